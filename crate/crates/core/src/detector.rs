//! Weighted Shiryaev-Roberts detection on an entropy stream.
//!
//! Each observation is standardised with exponentially smoothed moments,
//! `ξ_t = (H_t - μ_{t-1}) / σ_{t-1}`, and fed to one SR accumulator per
//! candidate mean shift `Δμ_i`:
//!
//! ```text
//! SR_t(i) = (1 + SR_{t-1}(i)) * exp(Δμ_i (ξ_t - Δμ_i / 2))
//! ```
//!
//! The alarm statistic is the plain average over shifts. Smoothed moments
//! are not updated on an alarm step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::seed::RngSeed;

/// Lower bound on the smoothed variance before dividing by it.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Shift used when the burn-in history has zero range.
pub const SHIFT_FLOOR: f64 = 0.1;

/// Alarm level: fixed, or calibrated by Monte Carlo on null streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    Fixed(f64),
    Calibrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Number of candidate mean shifts.
    pub m: usize,
    /// Smoothing weight of the mean update.
    pub alpha: f64,
    /// Smoothing weight of the variance update.
    pub beta: f64,
    pub threshold: Threshold,
    /// Reset the accumulators and keep going after an alarm, or stop.
    pub restart_after_alarm: bool,
}

impl DetectorConfig {
    /// Settings used on synthetic designs.
    pub fn simulation() -> Self {
        Self {
            m: 6,
            alpha: 0.5,
            beta: 0.9,
            threshold: Threshold::Calibrate,
            restart_after_alarm: true,
        }
    }

    /// Settings used on daily market data.
    pub fn empirical() -> Self {
        Self {
            m: 100,
            alpha: 0.95,
            beta: 0.95,
            threshold: Threshold::Calibrate,
            restart_after_alarm: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(EwsError::InvalidConfig(m));
        if self.m < 1 {
            return fail("m must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return fail(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if let Threshold::Fixed(a) = self.threshold {
            if !(a > 0.0) {
                return fail(format!("threshold must be positive, got {a}"));
            }
        }
        Ok(())
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::simulation()
    }
}

/// Shift grid `Δμ_i = i (max - min) / m`, `i = 1..=m`, over a standardised
/// burn-in history. A flat history falls back to [`SHIFT_FLOOR`].
pub fn build_shifts(history: &[f64], m: usize) -> Result<Vec<f64>> {
    if history.len() < 2 || m < 1 {
        return Err(EwsError::InvalidConfig(format!(
            "shift set needs m >= 1 and two history values, got m = {m}, {} values",
            history.len()
        )));
    }
    let lo = history.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return Ok(vec![SHIFT_FLOOR; m]);
    }
    Ok((1..=m).map(|i| i as f64 * range / m as f64).collect())
}

/// Burn-in values in units of their own sample mean and standard deviation.
/// A flat history maps to zeros.
pub fn burn_in_scores(history: &[f64]) -> Vec<f64> {
    let n = history.len() as f64;
    if history.len() < 2 {
        return vec![0.0; history.len()];
    }
    let mean = history.iter().sum::<f64>() / n;
    let sd = (history.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return vec![0.0; history.len()];
    }
    history.iter().map(|h| (h - mean) / sd).collect()
}

/// Smoothing-only pass: `ξ_2..ξ_n` for a stream whose moments are never
/// frozen by an alarm.
pub fn standardized_history(stream: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let Some((&first, rest)) = stream.split_first() else {
        return Vec::new();
    };
    let mut mu = first;
    let mut var = 1.0f64;
    rest.iter()
        .map(|&h| {
            let xi = (h - mu) / var.max(VARIANCE_FLOOR).sqrt();
            mu = alpha * mu + (1.0 - alpha) * h;
            var = (beta * var + (1.0 - beta) * (h - mu).powi(2)).max(VARIANCE_FLOOR);
            xi
        })
        .collect()
}

/// Mutable detector state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrState {
    /// One accumulator per shift.
    pub sr: Vec<f64>,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub shifts: Vec<f64>,
    /// 1-based index of the last observation consumed.
    pub t: usize,
    /// Steps (1-based) at which alarms were raised.
    pub alarms: Vec<usize>,
    pub halted: bool,
}

/// Result of one [`SrState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub xi: f64,
    /// Weighted statistic `SR^w_t`.
    pub sr_w: f64,
    pub alarm: bool,
}

impl SrState {
    /// Starting values: `SR_0 = 0`, `μ_1 = H_1`, `σ²_1 = 1`.
    pub fn new(first: f64, shifts: Vec<f64>) -> Result<Self> {
        if !first.is_finite() {
            return Err(EwsError::CorruptedStream {
                step: 1,
                value: first,
            });
        }
        if shifts.is_empty() {
            return Err(EwsError::InvalidConfig("empty shift set".into()));
        }
        Ok(Self {
            sr: vec![0.0; shifts.len()],
            mu_hat: first,
            sigma2_hat: 1.0,
            shifts,
            t: 1,
            alarms: Vec::new(),
            halted: false,
        })
    }

    pub fn sr_weighted(&self) -> f64 {
        self.sr.iter().sum::<f64>() / self.sr.len() as f64
    }

    /// Consumes `H_t`. On an alarm the accumulators are zeroed (or the state
    /// halts) and the smoothed moments keep their previous values.
    pub fn step(
        &mut self,
        h: f64,
        alpha: f64,
        beta: f64,
        threshold: f64,
        restart: bool,
    ) -> Result<StepOutcome> {
        let step = self.t + 1;
        if !h.is_finite() {
            return Err(EwsError::CorruptedStream { step, value: h });
        }
        if self.halted {
            return Err(EwsError::InvalidConfig(
                "detector halted after its first alarm".into(),
            ));
        }
        self.t = step;
        let xi = (h - self.mu_hat) / self.sigma2_hat.max(VARIANCE_FLOOR).sqrt();
        for (sr, &shift) in self.sr.iter_mut().zip(&self.shifts) {
            *sr = ((1.0 + *sr) * (shift * (xi - 0.5 * shift)).exp()).min(f64::MAX);
        }
        let sr_w = self.sr_weighted();
        if sr_w > threshold {
            self.alarms.push(step);
            if restart {
                self.sr.iter_mut().for_each(|s| *s = 0.0);
            } else {
                self.halted = true;
            }
            return Ok(StepOutcome {
                xi,
                sr_w,
                alarm: true,
            });
        }
        self.mu_hat = alpha * self.mu_hat + (1.0 - alpha) * h;
        self.sigma2_hat =
            (beta * self.sigma2_hat + (1.0 - beta) * (h - self.mu_hat).powi(2)).max(VARIANCE_FLOOR);
        Ok(StepOutcome {
            xi,
            sr_w,
            alarm: false,
        })
    }
}

/// Where the shift set comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    /// Built once from the first `n` stream values, z-scored.
    BurnIn(usize),
    Fixed(Vec<f64>),
}

/// Full pass of the detector over a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRun {
    pub shifts: Vec<f64>,
    /// `SR^w_t` for stream positions `1..`; shorter than `len - 1` only when
    /// the detector halted.
    pub sr_trajectory: Vec<f64>,
    /// 0-based stream positions of the alarms.
    pub alarms: Vec<usize>,
}

pub fn resolve_shifts(
    stream: &[f64],
    config: &DetectorConfig,
    policy: &ShiftPolicy,
) -> Result<Vec<f64>> {
    match policy {
        ShiftPolicy::Fixed(shifts) => {
            if shifts.is_empty() || shifts.iter().any(|s| !s.is_finite()) {
                return Err(EwsError::InvalidConfig(
                    "fixed shifts must be finite and non-empty".into(),
                ));
            }
            Ok(shifts.clone())
        }
        ShiftPolicy::BurnIn(n) => {
            let burn = &stream[..(*n).min(stream.len())];
            if let Some((step, value)) = burn.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(EwsError::CorruptedStream {
                    step: step + 1,
                    value: *value,
                });
            }
            build_shifts(&burn_in_scores(burn), config.m)
        }
    }
}

pub fn run_detector(
    stream: &[f64],
    config: &DetectorConfig,
    threshold: f64,
    policy: &ShiftPolicy,
) -> Result<DetectorRun> {
    let shifts = resolve_shifts(stream, config, policy)?;
    run_with_shifts(stream, config, threshold, shifts)
}

fn run_with_shifts(
    stream: &[f64],
    config: &DetectorConfig,
    threshold: f64,
    shifts: Vec<f64>,
) -> Result<DetectorRun> {
    let (&first, rest) = stream
        .split_first()
        .ok_or_else(|| EwsError::InvalidConfig("empty entropy stream".into()))?;
    let mut state = SrState::new(first, shifts)?;
    let mut sr_trajectory = Vec::with_capacity(rest.len());
    for &h in rest {
        let out = state.step(
            h,
            config.alpha,
            config.beta,
            threshold,
            config.restart_after_alarm,
        )?;
        sr_trajectory.push(out.sr_w);
        if state.halted {
            break;
        }
    }
    Ok(DetectorRun {
        alarms: state.alarms.iter().map(|t| t - 1).collect(),
        shifts: state.shifts,
        sr_trajectory,
    })
}

/// Checks the recursion `SR_t = (1 + SR_{t-1}) r_t` against the direct
/// form `SR_t = Σ_{k<=t} Π_{i=k..t} r_i` at every step (relative 1e-10).
pub fn sr_recursion_equivalence_check(ratios: &[f64]) -> bool {
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return false;
    }
    let mut recursive = 0.0;
    for t in 0..ratios.len() {
        recursive = (1.0 + recursive) * ratios[t];
        let mut direct = 0.0;
        let mut product = 1.0;
        for k in (0..=t).rev() {
            product *= ratios[k];
            direct += product;
        }
        if (recursive - direct).abs() > 1e-10 * direct.abs().max(f64::MIN_POSITIVE) {
            return false;
        }
    }
    true
}

/// Logarithmic grid of candidate thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub lo: f64,
    pub hi: f64,
    pub per_decade: usize,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            lo: 1.0,
            hi: 1e100,
            per_decade: 20,
        }
    }
}

impl ThresholdGrid {
    pub fn values(&self) -> Vec<f64> {
        let decades = (self.hi / self.lo).log10();
        let steps = (decades * self.per_decade as f64).round() as usize;
        (0..=steps)
            .map(|k| self.lo * 10f64.powf(k as f64 / self.per_decade as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    /// Null-run false-alarm fraction at `threshold`.
    pub achieved_pfa: f64,
    /// False when no grid value meets the target; `threshold` is then the grid maximum.
    pub attained: bool,
    pub target_pfa: f64,
    pub horizon: usize,
    pub n_mc: usize,
    pub seed: RngSeed,
    pub grid: ThresholdGrid,
}

/// Largest `SR^w` over stream positions `1..horizon` with alarms disabled.
/// The first alarm of any run falls before `horizon` exactly when this
/// maximum exceeds the threshold.
pub fn null_peak(
    stream: &[f64],
    config: &DetectorConfig,
    policy: &ShiftPolicy,
    horizon: usize,
) -> Result<f64> {
    let end = horizon.min(stream.len());
    let shifts = resolve_shifts(stream, config, policy)?;
    let run = run_with_shifts(&stream[..end], config, f64::INFINITY, shifts)?;
    Ok(run.sr_trajectory.iter().cloned().fold(0.0, f64::max))
}

/// Smallest grid threshold whose Monte Carlo false-alarm fraction over
/// `horizon` stream steps is at most `target_pfa`.
///
/// `null_stream` maps a per-run seed to a stream with no change.
pub fn calibrate_threshold<F>(
    null_stream: F,
    config: &DetectorConfig,
    policy: &ShiftPolicy,
    target_pfa: f64,
    horizon: usize,
    n_mc: usize,
    seed: RngSeed,
    grid: ThresholdGrid,
) -> Result<Calibration>
where
    F: Fn(RngSeed) -> Result<Vec<f64>> + Sync,
{
    if !(target_pfa > 0.0 && target_pfa <= 1.0) {
        return Err(EwsError::InvalidConfig(format!(
            "target PFA must lie in (0, 1], got {target_pfa}"
        )));
    }
    if n_mc == 0 || horizon < 2 {
        return Err(EwsError::InvalidConfig(
            "calibration needs n_mc >= 1 and horizon >= 2".into(),
        ));
    }
    let peaks = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            null_stream(seed.derive(i as u64)).and_then(|s| null_peak(&s, config, policy, horizon))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(calibrate_from_peaks(
        &peaks, target_pfa, horizon, seed, grid,
    ))
}

/// Threshold selection from precomputed null peaks.
pub fn calibrate_from_peaks(
    peaks: &[f64],
    target_pfa: f64,
    horizon: usize,
    seed: RngSeed,
    grid: ThresholdGrid,
) -> Calibration {
    let values = grid.values();
    let fraction = |a: f64| peaks.iter().filter(|p| **p > a).count() as f64 / peaks.len() as f64;
    let (threshold, attained) = values
        .iter()
        .find(|a| fraction(**a) <= target_pfa)
        .map(|a| (*a, true))
        .unwrap_or((*values.last().expect("grid is non-empty"), false));
    Calibration {
        threshold,
        achieved_pfa: fraction(threshold),
        attained,
        target_pfa,
        horizon,
        n_mc: peaks.len(),
        seed,
        grid,
    }
}

/// Outcome of one run relative to the true change point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionScore {
    /// First alarm strictly before the change.
    pub false_alarm: bool,
    /// `τ - θ` for the first alarm at or after the change.
    pub delay: Option<usize>,
    /// No alarm at or after the change.
    pub non_detection: bool,
}

/// Scores alarm times (on the same clock as `theta`).
pub fn score_detection(alarms: &[usize], theta: usize) -> DetectionScore {
    let false_alarm = alarms.first().is_some_and(|&a| a < theta);
    let delay = alarms.iter().find(|&&a| a >= theta).map(|a| a - theta);
    DetectionScore {
        false_alarm,
        delay,
        non_detection: delay.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn shift_examples() {
        let h: Vec<f64> = vec![0.0, 6.0, 3.0];
        assert_eq!(
            build_shifts(&h, 6).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
        assert_eq!(build_shifts(&[1.0, 3.5], 1).unwrap(), vec![2.5]);
        assert_eq!(
            build_shifts(&[-2.0, 4.0], 4).unwrap(),
            vec![1.5, 3.0, 4.5, 6.0]
        );
        assert_eq!(build_shifts(&[2.0, 2.0], 3).unwrap(), vec![SHIFT_FLOOR; 3]);
        assert!(build_shifts(&[1.0], 2).is_err());
    }

    #[test]
    fn exponent_vanishes_at_half_shift() {
        let mut s = SrState::new(0.0, vec![2.0]).unwrap();
        // σ² = 1, μ = 0, so ξ = H.
        let out = s.step(1.0, 0.5, 0.9, 1e9, true).unwrap();
        assert!((out.xi - 1.0).abs() < 1e-15);
        assert!((out.sr_w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn very_negative_xi_decays() {
        let mut s = SrState::new(0.0, vec![1.0]).unwrap();
        s.sr = vec![50.0];
        let mut prev = s.sr_weighted();
        for _ in 0..5 {
            // Hold the moments so ξ stays at -10.
            s.mu_hat = 0.0;
            s.sigma2_hat = 1.0;
            let out = s.step(-10.0, 0.5, 0.9, 1e9, true).unwrap();
            assert!(out.sr_w < prev);
            prev = out.sr_w;
        }
        // Fixed point of s -> (1 + s) e^{-10.5}.
        let floor = (-10.5f64).exp() / (1.0 - (-10.5f64).exp());
        assert!((prev - floor).abs() < 1e-6);
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut s = SrState::new(0.0, vec![1.0]).unwrap();
        assert!(matches!(
            s.step(f64::NAN, 0.5, 0.9, 10.0, true),
            Err(EwsError::CorruptedStream { step: 2, .. })
        ));
        assert!(SrState::new(f64::INFINITY, vec![1.0]).is_err());
    }

    #[test]
    fn alarm_freezes_moments_and_resets() {
        let mut s = SrState::new(0.0, vec![1.0]).unwrap();
        let out = s.step(50.0, 0.5, 0.9, 10.0, true).unwrap();
        assert!(out.alarm);
        assert_eq!(s.alarms, vec![2]);
        assert_eq!(s.sr, vec![0.0]);
        assert_eq!((s.mu_hat, s.sigma2_hat), (0.0, 1.0));
        let out = s.step(0.0, 0.5, 0.9, 10.0, true).unwrap();
        assert!(!out.alarm);
        assert_eq!(s.t, 3);
    }

    #[test]
    fn halting_mode_stops() {
        let cfg = DetectorConfig {
            restart_after_alarm: false,
            ..DetectorConfig::simulation()
        };
        let stream = [0.0, 0.0, 50.0, 0.0, 60.0];
        let run = run_detector(&stream, &cfg, 10.0, &ShiftPolicy::Fixed(vec![1.0])).unwrap();
        assert_eq!(run.alarms, vec![2]);
        assert_eq!(run.sr_trajectory.len(), 2);
    }

    #[test]
    fn degenerate_smoothing_freezes_moments() {
        // alpha = beta = 1 sits outside the configurable range but is exact
        // for the state machine itself.
        let mut s = SrState::new(3.0, vec![0.5, 1.0]).unwrap();
        let mut rng = RngSeed(1).rng();
        for _ in 0..100 {
            let h: f64 = rng.sample(StandardNormal);
            s.step(h, 1.0, 1.0, f64::INFINITY, true).unwrap();
            assert_eq!(s.mu_hat, 3.0);
            assert_eq!(s.sigma2_hat, 1.0);
        }
    }

    #[test]
    fn recursion_examples() {
        assert!(sr_recursion_equivalence_check(&[1.0; 50]));
        assert!(sr_recursion_equivalence_check(&[3.7]));
        assert!(!sr_recursion_equivalence_check(&[1.0, -1.0]));
        let mut rng = RngSeed(2).rng();
        let r: Vec<f64> = (0..100).map(|_| rng.gen_range(0.5..2.0)).collect();
        assert!(sr_recursion_equivalence_check(&r));
    }

    #[test]
    fn score_examples() {
        assert_eq!(
            score_detection(&[510], 500),
            DetectionScore {
                false_alarm: false,
                delay: Some(10),
                non_detection: false
            }
        );
        assert_eq!(
            score_detection(&[], 500),
            DetectionScore {
                false_alarm: false,
                delay: None,
                non_detection: true
            }
        );
        assert_eq!(
            score_detection(&[490, 507], 500),
            DetectionScore {
                false_alarm: true,
                delay: Some(7),
                non_detection: false
            }
        );
        assert_eq!(score_detection(&[500], 500).delay, Some(0));
    }

    fn gaussian_stream(seed: RngSeed, n: usize) -> Result<Vec<f64>> {
        let mut rng = seed.rng();
        Ok((0..n).map(|_| rng.sample(StandardNormal)).collect())
    }

    #[test]
    fn calibration_trivial_target_and_monotonicity() {
        let cfg = DetectorConfig {
            m: 1,
            ..DetectorConfig::simulation()
        };
        let policy = ShiftPolicy::Fixed(vec![1.0]);
        let grid = ThresholdGrid::default();
        let gen = |s| gaussian_stream(s, 200);
        let at = |p| calibrate_threshold(gen, &cfg, &policy, p, 200, 60, RngSeed(5), grid).unwrap();
        assert_eq!(at(1.0).threshold, grid.lo);
        let (a, b, c) = (at(0.5).threshold, at(0.1).threshold, at(0.01).threshold);
        assert!(a <= b && b <= c, "{a} {b} {c}");
        assert!(calibrate_threshold(gen, &cfg, &policy, 0.0, 200, 10, RngSeed(5), grid).is_err());
    }

    #[test]
    fn unattainable_target_returns_grid_max() {
        let peaks = [1e120, 1e121];
        let c = calibrate_from_peaks(&peaks, 0.1, 10, RngSeed(0), ThresholdGrid::default());
        assert!(!c.attained);
        assert_eq!(
            c.threshold,
            *ThresholdGrid::default().values().last().unwrap()
        );
    }

    #[test]
    fn burn_in_shifts_ignore_location_and_scale() {
        let cfg = DetectorConfig {
            m: 2,
            ..DetectorConfig::simulation()
        };
        let base = [1.0, 3.0, 2.0, 5.0, 4.0, 100.0];
        let scaled: Vec<f64> = base.iter().map(|h| 40.0 + 7.0 * h).collect();
        let a = resolve_shifts(&base, &cfg, &ShiftPolicy::BurnIn(5)).unwrap();
        let b = resolve_shifts(&scaled, &cfg, &ShiftPolicy::BurnIn(5)).unwrap();
        // Scores of 1..=5 have sd 1 after dividing by sqrt(2.5).
        let range = 4.0 / 2.5f64.sqrt();
        assert!((a[1] - range).abs() < 1e-12 && (a[0] - range / 2.0).abs() < 1e-12);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        let flat = resolve_shifts(&[3.0; 6], &cfg, &ShiftPolicy::BurnIn(5)).unwrap();
        assert_eq!(flat, vec![SHIFT_FLOOR; 2]);
    }

    #[test]
    fn grid_spans_bounds() {
        let v = ThresholdGrid::default().values();
        assert_eq!(v.len(), 2001);
        assert_eq!(v[0], 1.0);
        assert!((v[2000] / 1e100 - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn recursion_matches_direct_form(r in prop::collection::vec(0.01f64..5.0, 1..80)) {
            prop_assert!(sr_recursion_equivalence_check(&r));
        }

        #[test]
        fn shift_order_does_not_matter(
            stream in prop::collection::vec(-3.0f64..3.0, 3..60),
            mut shifts in prop::collection::vec(0.05f64..3.0, 1..7),
        ) {
            let cfg = DetectorConfig::simulation();
            let a = run_detector(&stream, &cfg, 1e6, &ShiftPolicy::Fixed(shifts.clone())).unwrap();
            shifts.reverse();
            let b = run_detector(&stream, &cfg, 1e6, &ShiftPolicy::Fixed(shifts)).unwrap();
            prop_assert_eq!(&a.alarms, &b.alarms);
            for (x, y) in a.sr_trajectory.iter().zip(&b.sr_trajectory) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn constant_offset_is_invisible(
            stream in prop::collection::vec(-3.0f64..3.0, 3..60),
            offset in -1e3f64..1e3,
        ) {
            let shifted: Vec<f64> = stream.iter().map(|v| v + offset).collect();
            let cfg = DetectorConfig::simulation();
            let a = standardized_history(&stream, cfg.alpha, cfg.beta);
            let b = standardized_history(&shifted, cfg.alpha, cfg.beta);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()));
            }
        }
    }
}
