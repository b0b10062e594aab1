//! Conditional densities and windowed conditional entropy.
//!
//! Within a window the residuals `e` are paired with a univariate
//! conditioner (the linear projection, its local-linear-forest counterpart,
//! or the ranks of either). A forest grown on `(conditioner -> e)` supplies
//! neighbour weights, a Gaussian kernel smooths the weighted residuals, and
//! each conditioner contributes `-∫ f ln f`, integrated with composite
//! Simpson. Larger values mean more uncertainty.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::forest::{fit_forest, ForestConfig, ForestModel, NeighborWeights};
use crate::seed::RngSeed;
use crate::window::Window;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Kernel terms beyond this many bandwidths are below 1e-16 and skipped.
const KERNEL_CUTOFF: f64 = 8.5;

/// How the conditioner and residuals enter the density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Residuals given the linear projection.
    Baseline,
    /// Residuals given the local linear forest estimate.
    Llf,
    /// Pseudo-observations of residuals and projection.
    Rank,
    /// Pseudo-observations of residuals and the forest estimate.
    LlfRank,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::Llf,
        Variant::Rank,
        Variant::LlfRank,
    ];

    pub fn uses_llf(self) -> bool {
        matches!(self, Variant::Llf | Variant::LlfRank)
    }

    pub fn uses_ranks(self) -> bool {
        matches!(self, Variant::Rank | Variant::LlfRank)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Llf => "llf",
            Variant::Rank => "rank",
            Variant::LlfRank => "llf-rank",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = EwsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "baseline" | "linear" => Ok(Variant::Baseline),
            "llf" => Ok(Variant::Llf),
            "rank" | "ranks" => Ok(Variant::Rank),
            "llf-rank" | "llf-ranks" => Ok(Variant::LlfRank),
            other => Err(EwsError::InvalidConfig(format!(
                "unknown variant {other:?}"
            ))),
        }
    }
}

/// `u_t = (1/Δ) Σ_{s=1..Δ} 1{x_{t-s} <= x_t}` for every `t >= delta`.
///
/// The returned vector starts at `t = delta`.
pub fn pseudo_observations(series: &[f64], delta: usize) -> Result<Vec<f64>> {
    if delta == 0 || series.len() <= delta {
        return Err(EwsError::InvalidConfig(format!(
            "pseudo-observations need more than {delta} values, got {}",
            series.len()
        )));
    }
    Ok((delta..series.len())
        .map(|t| {
            let count = series[t - delta..t]
                .iter()
                .filter(|v| **v <= series[t])
                .count();
            count as f64 / delta as f64
        })
        .collect())
}

/// Within-window pseudo-observations `#{j : x_j <= x_i} / n`, each in (0, 1].
pub fn window_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|v| sorted.partition_point(|s| s.total_cmp(v).is_le()) as f64 / n as f64)
        .collect()
}

/// Integration domain of a conditional density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportKind {
    /// `[min(e) - 3h, max(e) + 3h]`.
    Level,
    /// `[0, 1]` with kernels reflected at both ends.
    Unit,
}

/// Weighted Gaussian kernel density `f(ε) = Σ w_i K_h(ε - e_i)`.
#[derive(Debug, Clone)]
pub struct ConditionalDensity {
    pub support: (f64, f64),
    pub bandwidth: f64,
    centers: Vec<f64>,
    weights: Vec<f64>,
    reflect: bool,
}

impl ConditionalDensity {
    pub fn from_weights(
        train_e: &[f64],
        weights: &NeighborWeights,
        kind: SupportKind,
    ) -> Result<Self> {
        if train_e.len() != weights.weights.len() {
            return Err(EwsError::DimensionMismatch(format!(
                "{} residuals for {} weights",
                train_e.len(),
                weights.weights.len()
            )));
        }
        let (centers, w): (Vec<f64>, Vec<f64>) = train_e
            .iter()
            .zip(&weights.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(e, w)| (*e, *w))
            .unzip();
        if centers.is_empty() {
            return Err(EwsError::InvalidConfig(
                "all neighbour weights are zero".into(),
            ));
        }
        let bandwidth = silverman_bandwidth(&centers, &w);
        let support = match kind {
            SupportKind::Level => {
                let lo = train_e.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = train_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo - 3.0 * bandwidth, hi + 3.0 * bandwidth)
            }
            SupportKind::Unit => (0.0, 1.0),
        };
        Ok(Self {
            support,
            bandwidth,
            centers,
            weights: w,
            reflect: kind == SupportKind::Unit,
        })
    }

    pub fn eval(&self, eps: f64) -> f64 {
        let h = self.bandwidth;
        let kernel = |c: f64| {
            let z = (eps - c) / h;
            if z.abs() > KERNEL_CUTOFF {
                0.0
            } else {
                (-0.5 * z * z).exp()
            }
        };
        let sum: f64 = if self.reflect {
            self.centers
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * (kernel(*c) + kernel(-c) + kernel(2.0 - c)))
                .sum()
        } else {
            self.centers
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * kernel(*c))
                .sum()
        };
        sum * INV_SQRT_2PI / h
    }

    /// Density values on `points` equally spaced nodes spanning the support.
    pub fn on_grid(&self, points: usize) -> Vec<f64> {
        let (lo, hi) = self.support;
        let step = (hi - lo) / (points - 1) as f64;
        let h = self.bandwidth;
        // Coarse grids relative to h lose the recurrence's accuracy.
        if step > h {
            return (0..points)
                .map(|i| self.eval(lo + step * i as f64))
                .collect();
        }
        let mut out = vec![0.0; points];
        for (c, w) in self.centers.iter().zip(&self.weights) {
            accumulate_kernel(&mut out, lo, step, h, *c, *w);
            if self.reflect {
                accumulate_kernel(&mut out, lo, step, h, -c, *w);
                accumulate_kernel(&mut out, lo, step, h, 2.0 - c, *w);
            }
        }
        out.iter_mut().for_each(|v| *v *= INV_SQRT_2PI / h);
        out
    }

    fn spacing(&self, points: usize) -> f64 {
        (self.support.1 - self.support.0) / (points - 1) as f64
    }

    /// `∫ f` over the support by composite Simpson.
    pub fn mass(&self, quad_points: usize) -> Result<f64> {
        simpson(&self.on_grid(quad_points), self.spacing(quad_points))
    }

    /// `-∫ f ln f` over the support by composite Simpson.
    pub fn entropy(&self, quad_points: usize) -> Result<f64> {
        let integrand: Vec<f64> = self
            .on_grid(quad_points)
            .into_iter()
            .map(neg_f_ln_f)
            .collect();
        simpson(&integrand, self.spacing(quad_points))
    }

    /// `-∫ f ln f` by the composite trapezoid rule.
    pub fn entropy_trapezoid(&self, points: usize) -> f64 {
        let integrand: Vec<f64> = self.on_grid(points).into_iter().map(neg_f_ln_f).collect();
        trapezoid(&integrand, self.spacing(points))
    }
}

/// Adds `w exp(-z^2 / 2)`, `z = (lo + k step - c) / h`, to every node within
/// the kernel cutoff. Successive nodes differ by a factor that itself shrinks
/// by `exp(-d^2)`, so the loop needs two multiplications per node.
fn accumulate_kernel(out: &mut [f64], lo: f64, step: f64, h: f64, c: f64, w: f64) {
    let d = step / h;
    let first = (((c - KERNEL_CUTOFF * h - lo) / step).ceil().max(0.0)) as usize;
    let last = (((c + KERNEL_CUTOFF * h - lo) / step).floor()).min((out.len() - 1) as f64);
    if last < 0.0 || first as f64 > last {
        return;
    }
    let last = last as usize;
    let z0 = (lo + step * first as f64 - c) / h;
    let mut g = w * (-0.5 * z0 * z0).exp();
    let mut ratio = (-z0 * d - 0.5 * d * d).exp();
    let decay = (-d * d).exp();
    for v in &mut out[first..=last] {
        *v += g;
        g *= ratio;
        ratio *= decay;
    }
}

/// Density estimate of `e` at conditioner `query_cond` using a forest grown on
/// `(conditioner -> e)`.
pub fn conditional_density(
    train_e: &[f64],
    model: &ForestModel,
    query_cond: f64,
    kind: SupportKind,
) -> Result<ConditionalDensity> {
    let w = model.query_weights(&[query_cond])?;
    ConditionalDensity::from_weights(train_e, &w, kind)
}

/// `x ln x -> 0` as `x -> 0`.
fn neg_f_ln_f(f: f64) -> f64 {
    if f > 0.0 {
        -f * f.ln()
    } else {
        0.0
    }
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) n_eff^(-1/5)` with weighted
/// moments and Kish effective size, floored at `1e-6 (1 + |mean|)`.
pub fn silverman_bandwidth(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean).powi(2))
        .sum::<f64>()
        / total;
    let n_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    let sd = var.sqrt();
    let iqr = weighted_quantile(values, weights, 0.75) - weighted_quantile(values, weights, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n_eff.powf(-0.2);
    h.max(1e-6 * (1.0 + mean.abs()))
}

fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .cloned()
        .zip(weights.iter().cloned())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    let target = q * total;
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= target {
            return *v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(0.0)
}

/// Composite Simpson rule on an odd number of equally spaced samples.
pub fn simpson(values: &[f64], spacing: f64) -> Result<f64> {
    let n = values.len();
    if n < 3 || n % 2 == 0 {
        return Err(EwsError::InvalidConfig(format!(
            "Simpson needs an odd node count >= 3, got {n}"
        )));
    }
    let interior: f64 = values[1..n - 1]
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    Ok(spacing / 3.0 * (values[0] + interior + values[n - 1]))
}

pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    spacing * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>())
}

/// Settings shared by every window's density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub forest: ForestConfig,
    /// Simpson nodes per integral; odd and at least 51.
    pub quad_points: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            forest: ForestConfig::default(),
            quad_points: 201,
        }
    }
}

impl EntropyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quad_points < 51 || self.quad_points % 2 == 0 {
            return Err(EwsError::InvalidConfig(format!(
                "quad_points must be odd and >= 51, got {}",
                self.quad_points
            )));
        }
        Ok(())
    }
}

/// Conditional entropy summed over the window's conditioners:
/// `-Σ_c ∫ f(ε | c) ln f(ε | c) dε`.
///
/// `e` and `cond` are already on the scale the variant requires (levels or
/// pseudo-observations); `kind` picks the matching support.
pub fn window_entropy(
    e: &[f64],
    cond: &[f64],
    kind: SupportKind,
    config: &EntropyConfig,
    seed: RngSeed,
) -> Result<f64> {
    config.validate()?;
    if e.len() != cond.len() {
        return Err(EwsError::DimensionMismatch(format!(
            "{} residuals for {} conditioners",
            e.len(),
            cond.len()
        )));
    }
    let features: Vec<Vec<f64>> = cond.iter().map(|c| vec![*c]).collect();
    let model = fit_forest(&features, e, &config.forest, seed)?;
    // Conditioners sharing every leaf share their density.
    let mut cache: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut total = 0.0;
    for c in cond {
        let key = model.leaf_signature(&[*c])?;
        let h = match cache.get(&key) {
            Some(h) => *h,
            None => {
                let h = conditional_density(e, &model, *c, kind)?.entropy(config.quad_points)?;
                cache.insert(key, h);
                h
            }
        };
        total += h;
    }
    Ok(total)
}

/// Ordered entropy estimates, one per window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySeries {
    pub values: Vec<f64>,
    pub windows: Vec<Window>,
    pub variant: Variant,
}

impl EntropySeries {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["window_start", "window_end", "H", "variant"])?;
        for (w, h) in self.windows.iter().zip(&self.values) {
            wtr.write_record([
                w.start.to_string(),
                w.end.to_string(),
                h.to_string(),
                self.variant.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut values = Vec::new();
        let mut windows = Vec::new();
        let mut variant = None;
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| EwsError::Parse {
                row,
                message: e.to_string(),
            })?;
            let field = |k: usize| {
                record.get(k).ok_or_else(|| EwsError::Parse {
                    row,
                    message: "missing column".into(),
                })
            };
            let parse_err = |m: String| EwsError::Parse { row, message: m };
            let start = field(0)?
                .parse::<usize>()
                .map_err(|e| parse_err(e.to_string()))?;
            let end = field(1)?
                .parse::<usize>()
                .map_err(|e| parse_err(e.to_string()))?;
            let h = field(2)?
                .parse::<f64>()
                .map_err(|e| parse_err(e.to_string()))?;
            variant = Some(
                field(3)?
                    .parse::<Variant>()
                    .map_err(|e| parse_err(e.to_string()))?,
            );
            windows.push(Window { start, end });
            values.push(h);
        }
        let variant = variant.ok_or(EwsError::Parse {
            row: 2,
            message: "empty entropy file".into(),
        })?;
        Ok(Self {
            values,
            windows,
            variant,
        })
    }
}
