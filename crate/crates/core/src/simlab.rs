//! Synthetic designs with a known change point, and the replication harness
//! that scores detectors on them.
//!
//! Positions are 0-based; rows `0..theta` follow the pre-change law and rows
//! `theta..len` the post-change law. `N(a, b)` below means mean `a`,
//! variance `b`; `Exp(3)` has mean 3 and `Γ(3, 1)` has shape 3, scale 1.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, StandardNormal, Weibull};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::score_detection;
use crate::error::{EwsError, Result};
use crate::seed::RngSeed;
use crate::series::SeriesFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    /// Covariates stop driving the target at the change.
    Termination,
    /// The target starts driving the covariates at the change.
    Inversion,
    /// Tail-dependent Weibull design whose dependence vanishes at the change.
    TailDependent,
}

impl DgpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DgpKind::Termination => "termination",
            DgpKind::Inversion => "inversion",
            DgpKind::TailDependent => "tail",
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DgpKind {
    type Err = EwsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "termination" => Ok(DgpKind::Termination),
            "inversion" => Ok(DgpKind::Inversion),
            "tail" | "tail_dependent" | "tail-dependent" => Ok(DgpKind::TailDependent),
            other => Err(EwsError::InvalidConfig(format!("unknown design {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Series length `T`.
    pub len: usize,
    /// First post-change position.
    pub theta: usize,
    pub seed: RngSeed,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, seed: RngSeed) -> Self {
        Self {
            kind,
            len: 1000,
            theta: 500,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0 < self.theta && self.theta < self.len) {
            return Err(EwsError::InvalidConfig(format!(
                "change point {} must lie strictly inside 0..{}",
                self.theta, self.len
            )));
        }
        Ok(())
    }
}

/// Switches for the innovation terms; everything on reproduces the designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Noise {
    /// `ν_t` in the pre-change target equation.
    pub target: bool,
    /// `ψ_t`, `ζ_t` in the post-change covariate equations of the inversion design.
    pub feedback: bool,
}

impl Default for Noise {
    fn default() -> Self {
        Self {
            target: true,
            feedback: true,
        }
    }
}

pub fn generate(spec: &DgpSpec) -> Result<SeriesFrame> {
    spec.validate()?;
    simulate(
        spec.kind,
        spec.len,
        Some(spec.theta),
        spec.seed,
        Noise::default(),
    )
}

/// The design with every row drawn from the pre-change law.
pub fn generate_null(kind: DgpKind, len: usize, seed: RngSeed) -> Result<SeriesFrame> {
    simulate(kind, len, None, seed, Noise::default())
}

pub fn generate_with_noise(spec: &DgpSpec, noise: Noise) -> Result<SeriesFrame> {
    spec.validate()?;
    simulate(spec.kind, spec.len, Some(spec.theta), spec.seed, noise)
}

fn simulate(
    kind: DgpKind,
    len: usize,
    theta: Option<usize>,
    seed: RngSeed,
    noise: Noise,
) -> Result<SeriesFrame> {
    let theta = theta.unwrap_or(len);
    let mut rng = seed.rng();
    match kind {
        DgpKind::Termination => Ok(termination(len, theta, &mut rng, noise)),
        DgpKind::Inversion => Ok(inversion(len, theta, &mut rng, noise)),
        DgpKind::TailDependent => Ok(tail_dependent(len, theta, &mut rng)),
    }
}

struct Draws {
    exp3: Exp<f64>,
    gamma: Gamma<f64>,
}

impl Draws {
    fn new() -> Self {
        Self {
            exp3: Exp::new(1.0 / 3.0).expect("valid rate"),
            gamma: Gamma::new(3.0, 1.0).expect("valid shape"),
        }
    }
}

fn driven_target(x_prev: f64, z_prev: f64, nu: f64) -> f64 {
    0.5 * x_prev.ln() + 0.2 * z_prev * z_prev + 0.3 * nu
}

fn termination(len: usize, theta: usize, rng: &mut impl Rng, noise: Noise) -> SeriesFrame {
    let d = Draws::new();
    let post = Normal::new(5.0, 6.0).expect("valid sd");
    let (mut x_prev, mut z_prev) = (d.exp3.sample(rng), d.gamma.sample(rng));
    let (mut y, mut x, mut z) = (
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    );
    for t in 0..len {
        let nu: f64 = rng.sample(StandardNormal);
        let xi = post.sample(rng);
        let (xt, zt) = (d.exp3.sample(rng), d.gamma.sample(rng));
        let nu = if noise.target { nu } else { 0.0 };
        y.push(if t < theta {
            driven_target(x_prev, z_prev, nu)
        } else {
            xi
        });
        x.push(xt);
        z.push(zt);
        (x_prev, z_prev) = (xt, zt);
    }
    SeriesFrame::from_periods(y, vec!["x".into(), "z".into()], vec![x, z])
        .expect("generated columns align")
}

fn inversion(len: usize, theta: usize, rng: &mut impl Rng, noise: Noise) -> SeriesFrame {
    let d = Draws::new();
    let post = Normal::new(5.0, 3.0).expect("valid sd");
    let (mut x_prev, mut z_prev) = (d.exp3.sample(rng), d.gamma.sample(rng));
    let mut y_prev = driven_target(x_prev, z_prev, 0.0);
    let (mut y, mut x, mut z) = (
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    );
    for t in 0..len {
        let nu: f64 = rng.sample(StandardNormal);
        let xi = post.sample(rng);
        let (upsilon, delta) = (d.exp3.sample(rng), d.gamma.sample(rng));
        let psi: f64 = rng.sample(StandardNormal);
        let zeta: f64 = rng.sample(StandardNormal);
        let nu = if noise.target { nu } else { 0.0 };
        let (psi, zeta) = if noise.feedback {
            (psi, zeta)
        } else {
            (0.0, 0.0)
        };
        let (yt, xt, zt) = if t < theta {
            (driven_target(x_prev, z_prev, nu), upsilon, delta)
        } else {
            (
                xi,
                0.3 * y_prev + 0.1 * psi,
                0.6 * y_prev * y_prev + 0.1 * zeta,
            )
        };
        y.push(yt);
        x.push(xt);
        z.push(zt);
        (x_prev, z_prev, y_prev) = (xt, zt, yt);
    }
    SeriesFrame::from_periods(y, vec!["x".into(), "z".into()], vec![x, z])
        .expect("generated columns align")
}

/// `λ_t = (d_t - min d) / (max d - min d)` with `d_t = x_t - median(x)`.
pub fn tail_lambda(x: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let d: Vec<f64> = x.iter().map(|v| v - median).collect();
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        d.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; n]
    }
}

fn tail_dependent(len: usize, theta: usize, rng: &mut impl Rng) -> SeriesFrame {
    let weibull = Weibull::new(1.0, 1.5).expect("valid shape");
    let noise = Normal::new(0.0, 0.5f64.sqrt()).expect("valid sd");
    // x_all[0] is the pre-sample draw feeding y[0].
    let x_all: Vec<f64> = (0..=len).map(|_| weibull.sample(rng)).collect();
    let xi: Vec<f64> = (0..len).map(|_| noise.sample(rng)).collect();
    // λ is only needed where x drives y: the pre-change block.
    let lambda = tail_lambda(&x_all[..theta.min(len) + 1]);
    let y = (0..len)
        .map(|t| {
            if t < theta {
                x_all[t] + (1.0 - lambda[t].sqrt()) * xi[t]
            } else {
                0.9 + xi[t]
            }
        })
        .collect();
    SeriesFrame::from_periods(y, vec!["x".into()], vec![x_all[1..].to_vec()])
        .expect("generated columns align")
}

/// Independent standard normal target and covariates: a series with no
/// information transfer, used to calibrate on data without a known null law.
pub fn gaussian_null(len: usize, n_covariates: usize, seed: RngSeed) -> Result<SeriesFrame> {
    let mut rng = seed.rng();
    let mut draw = |_| {
        (0..len)
            .map(|_| rng.sample(StandardNormal))
            .collect::<Vec<f64>>()
    };
    let y = draw(0);
    let covariates: Vec<Vec<f64>> = (0..n_covariates).map(&mut draw).collect();
    let names = (1..=n_covariates).map(|j| format!("x{j}")).collect();
    SeriesFrame::from_periods(y, names, covariates)
}

/// Sample moments as reported for the synthetic designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    /// `m3 / m2^1.5`; `None` for a constant series.
    pub skewness: Option<f64>,
    /// Excess kurtosis `m4 / m2^2 - 3`; `None` for a constant series.
    pub kurtosis: Option<f64>,
    pub lag1_corr: Option<f64>,
    /// Spearman correlation of `(y_t, y_{t-1})`.
    pub lag1_rank_corr: Option<f64>,
}

pub fn summary_stats(y: &[f64]) -> Result<SummaryStats> {
    let n = y.len();
    if n < 3 {
        return Err(EwsError::InvalidConfig(format!(
            "summary statistics need 3 values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let central = |k: i32| y.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / nf;
    let m2 = central(2);
    let std = (m2 * nf / (nf - 1.0)).sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        (
            Some(central(3) / m2.powf(1.5)),
            Some(central(4) / (m2 * m2) - 3.0),
        )
    } else {
        (None, None)
    };
    let lag1_corr = pearson(&y[1..], &y[..n - 1]);
    let ranks = average_ranks(y);
    let lag1_rank_corr = pearson(&ranks[1..], &ranks[..n - 1]);
    Ok(SummaryStats {
        mean,
        std,
        skewness,
        kurtosis,
        lag1_corr,
        lag1_rank_corr,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

fn average_ranks(y: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0.0; y.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && y[idx[j + 1]] == y[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Anything that turns a series into alarm times on the series clock.
///
/// The entropy pipeline implements this; external baselines can too.
pub trait ChangeDetector: Sync {
    fn alarm_times(&self, frame: &SeriesFrame, seed: RngSeed) -> Result<Vec<usize>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: RngSeed,
    pub false_alarm: bool,
    pub delay: Option<usize>,
    pub non_detection: bool,
    pub alarms: Vec<usize>,
    /// Set when the pipeline failed; the run then counts as a non-detection.
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub pfa: f64,
    /// Mean delay over runs with an alarm at or after the change.
    pub add: Option<f64>,
    pub nd: f64,
    pub n_reps: usize,
    pub records: Vec<ReplicationRecord>,
}

impl ReplicationResult {
    pub fn from_records(records: Vec<ReplicationRecord>) -> Self {
        let n = records.len();
        let pfa = records.iter().filter(|r| r.false_alarm).count() as f64 / n as f64;
        let nd = records.iter().filter(|r| r.non_detection).count() as f64 / n as f64;
        let delays: Vec<f64> = records
            .iter()
            .filter_map(|r| r.delay.map(|d| d as f64))
            .collect();
        let add = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);
        Self {
            pfa,
            add,
            nd,
            n_reps: n,
            records,
        }
    }

    /// One row per replication.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "rep",
            "seed",
            "false_alarm",
            "delay",
            "non_detection",
            "first_alarm",
            "diagnostic",
        ])?;
        for r in &self.records {
            wtr.write_record([
                r.rep.to_string(),
                r.seed.0.to_string(),
                u8::from(r.false_alarm).to_string(),
                r.delay.map(|d| d.to_string()).unwrap_or_default(),
                u8::from(r.non_detection).to_string(),
                r.alarms.first().map(|a| a.to_string()).unwrap_or_default(),
                r.diagnostic.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Seed of replication `rep` under a root seed.
pub fn replication_seed(root: RngSeed, rep: usize) -> RngSeed {
    root.derive(0x5EED_0000 + rep as u64)
}

/// Generates `n_reps` series from `dgp` (seeds derived from `dgp.seed`),
/// runs the detector on each and scores the alarms against `dgp.theta`.
pub fn run_replications(
    dgp: &DgpSpec,
    detector: &dyn ChangeDetector,
    n_reps: usize,
) -> Result<ReplicationResult> {
    dgp.validate()?;
    if n_reps == 0 {
        return Err(EwsError::InvalidConfig("n_reps must be >= 1".into()));
    }
    let records = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(dgp.seed, rep);
            let spec = DgpSpec { seed, ..*dgp };
            let outcome =
                generate(&spec).and_then(|frame| detector.alarm_times(&frame, seed.derive(1)));
            match outcome {
                Ok(alarms) => {
                    let s = score_detection(&alarms, dgp.theta);
                    ReplicationRecord {
                        rep,
                        seed,
                        false_alarm: s.false_alarm,
                        delay: s.delay,
                        non_detection: s.non_detection,
                        alarms,
                        diagnostic: None,
                    }
                }
                Err(e) => ReplicationRecord {
                    rep,
                    seed,
                    false_alarm: false,
                    delay: None,
                    non_detection: true,
                    alarms: Vec::new(),
                    diagnostic: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ReplicationResult::from_records(records))
}
