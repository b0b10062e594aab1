//! End-to-end pass: windows, projections, entropy stream, detector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{
    calibrate_threshold, run_detector, Calibration, DetectorConfig, DetectorRun, ShiftPolicy,
    ThresholdGrid,
};
use crate::entropy::{
    window_entropy, window_ranks, EntropyConfig, EntropySeries, SupportKind, Variant,
};
use crate::error::{EwsError, Result};
use crate::forest::{fit_forest, llf_predict};
use crate::linproj::{fit_ar, lag_features, project_on_covariates};
use crate::seed::RngSeed;
use crate::series::SeriesFrame;
use crate::simlab::{generate_null, ChangeDetector, DgpKind};
use crate::window::{make_windows, Window, WindowPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub plan: WindowPlan,
    pub variant: Variant,
    pub entropy: EntropyConfig,
    /// Penalty on the local slopes of the LLF fit.
    pub ridge: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            plan: WindowPlan::default(),
            variant: Variant::Baseline,
            entropy: EntropyConfig::default(),
            ridge: 0.01,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.entropy.validate()?;
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(EwsError::InvalidConfig(format!(
                "ridge must be finite and >= 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// Orders chosen by BIC inside one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOrders {
    pub ar_order: usize,
    pub cov_lag: usize,
}

/// Residuals and conditioners of one window, before any rank transform.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInputs {
    /// AR residuals `e_t` over rows `start + lead ..= end`.
    pub e: Vec<f64>,
    /// Linear projection `ê_t`.
    pub e_hat: Vec<f64>,
    /// LLF estimate `ẽ_t`; only computed for the LLF variants.
    pub e_tilde: Option<Vec<f64>>,
    pub orders: WindowOrders,
}

impl WindowInputs {
    /// The conditioning column the variant uses.
    pub fn conditioner(&self, variant: Variant) -> &[f64] {
        match (&self.e_tilde, variant.uses_llf()) {
            (Some(t), true) => t,
            _ => &self.e_hat,
        }
    }
}

/// Seed of everything random inside the window starting at `start`.
pub fn window_seed(seed: RngSeed, start: usize) -> RngSeed {
    seed.derive(start as u64)
}

/// Fits the AR model and the covariate projection on one window and, for the
/// LLF variants, the local linear forest on the selected lag features.
///
/// Every window uses the same effective rows `start + lead ..= end`, where
/// `lead = max(max_ar_order, max_cov_lag)`; lags reach back into the window.
pub fn window_inputs(
    frame: &SeriesFrame,
    window: Window,
    config: &PipelineConfig,
    seed: RngSeed,
) -> Result<WindowInputs> {
    let plan = &config.plan;
    let lead = plan.lead();
    if window.end >= frame.len() || window.end < window.start + lead + 2 {
        return Err(EwsError::DimensionMismatch(format!(
            "window [{}, {}] does not fit a series of {} rows with lead {lead}",
            window.start,
            window.end,
            frame.len()
        )));
    }
    let first = window.start + lead;
    let y = &frame.target()[first - plan.max_ar_order..=window.end];
    let ar = fit_ar(y, plan.max_ar_order)?;
    let e = ar.residuals;
    let covs: Vec<Vec<f64>> = frame
        .covariates()
        .iter()
        .map(|c| c[first - plan.max_cov_lag..=window.end].to_vec())
        .collect();
    let proj = project_on_covariates(&e, &covs, plan.max_cov_lag)?;
    let e_tilde = if config.variant.uses_llf() {
        let features = lag_features(&covs, e.len(), proj.lag, plan.max_cov_lag);
        if features.first().map_or(true, |f| f.is_empty()) {
            return Err(EwsError::InvalidConfig(
                "the LLF variants need at least one covariate".into(),
            ));
        }
        let model = fit_forest(&features, &e, &config.entropy.forest, seed.derive(0))?;
        Some(
            features
                .iter()
                .map(|x| llf_predict(&model, &features, &e, x, config.ridge))
                .collect::<Result<Vec<f64>>>()?,
        )
    } else {
        None
    };
    Ok(WindowInputs {
        e,
        e_hat: proj.fitted,
        e_tilde,
        orders: WindowOrders {
            ar_order: ar.order,
            cov_lag: proj.lag,
        },
    })
}

/// Entropy of `e` given `cond` on the variant's scale: levels on a padded
/// data range, or within-window ranks on the unit interval.
pub fn variant_entropy(
    e: &[f64],
    cond: &[f64],
    variant: Variant,
    config: &EntropyConfig,
    seed: RngSeed,
) -> Result<f64> {
    if variant.uses_ranks() {
        window_entropy(
            &window_ranks(e),
            &window_ranks(cond),
            SupportKind::Unit,
            config,
            seed,
        )
    } else {
        window_entropy(e, cond, SupportKind::Level, config, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRun {
    pub series: EntropySeries,
    pub orders: Vec<WindowOrders>,
}

/// Entropy estimate for every window of the plan. Windows are independent
/// and run in parallel; each draws from its own derived seed.
pub fn entropy_stream(
    frame: &SeriesFrame,
    config: &PipelineConfig,
    seed: RngSeed,
) -> Result<EntropyRun> {
    config.validate()?;
    let windows = make_windows(&config.plan, frame.len())?;
    let per_window = windows
        .par_iter()
        .map(|w| {
            let s = window_seed(seed, w.start);
            let inputs = window_inputs(frame, *w, config, s)?;
            let h = variant_entropy(
                &inputs.e,
                inputs.conditioner(config.variant),
                config.variant,
                &config.entropy,
                s.derive(1),
            )?;
            Ok((h, inputs.orders))
        })
        .collect::<Result<Vec<_>>>()?;
    let (values, orders) = per_window.into_iter().unzip();
    Ok(EntropyRun {
        series: EntropySeries {
            values,
            windows,
            variant: config.variant,
        },
        orders,
    })
}

/// Series without entropy, for comparison detectors that watch a mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSignal {
    /// The target `Y_t`.
    Target,
    /// AR residual `e_t`.
    Residual,
    /// Covariate projection `ê_t`.
    Projection,
}

/// Value of `signal` at each window's last row, fitted on that window alone.
pub fn mean_signal_stream(
    frame: &SeriesFrame,
    plan: &WindowPlan,
    signal: MeanSignal,
) -> Result<Vec<f64>> {
    let config = PipelineConfig {
        plan: *plan,
        ..PipelineConfig::default()
    };
    config.validate()?;
    let windows = make_windows(plan, frame.len())?;
    windows
        .par_iter()
        .map(|w| match signal {
            MeanSignal::Target => Ok(frame.target()[w.end]),
            _ => {
                let inputs = window_inputs(frame, *w, &config, RngSeed(0))?;
                let v = if signal == MeanSignal::Residual {
                    &inputs.e
                } else {
                    &inputs.e_hat
                };
                Ok(*v.last().expect("window has effective rows"))
            }
        })
        .collect()
}

/// Entropy stream, detector pass, and alarms on the series clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub entropy: EntropyRun,
    pub run: DetectorRun,
    pub threshold: f64,
}

impl Detection {
    /// Row index of each alarm: the last row of the alarming window.
    pub fn alarm_times(&self) -> Vec<usize> {
        self.run
            .alarms
            .iter()
            .map(|&k| self.entropy.series.windows[k].end)
            .collect()
    }
}

/// Shift policy used by the pipeline: burn-in over the first `delta` stream values.
pub fn shift_policy(plan: &WindowPlan) -> ShiftPolicy {
    ShiftPolicy::BurnIn(plan.delta)
}

pub fn detect(
    frame: &SeriesFrame,
    config: &PipelineConfig,
    detector: &DetectorConfig,
    threshold: f64,
    seed: RngSeed,
) -> Result<Detection> {
    detector.validate()?;
    let entropy = entropy_stream(frame, config, seed)?;
    let run = run_detector(
        &entropy.series.values,
        detector,
        threshold,
        &shift_policy(&config.plan),
    )?;
    Ok(Detection {
        entropy,
        run,
        threshold,
    })
}

/// Monte Carlo calibration on change-free draws of a synthetic design.
///
/// Each null series has `theta` rows, so its windows are exactly those that
/// end before the change; an alarm anywhere in it is a false alarm.
pub fn calibrate_on_design(
    kind: DgpKind,
    theta: usize,
    config: &PipelineConfig,
    detector: &DetectorConfig,
    target_pfa: f64,
    n_mc: usize,
    seed: RngSeed,
) -> Result<Calibration> {
    calibrate_on_null(
        |s| generate_null(kind, theta, s),
        theta,
        config,
        detector,
        target_pfa,
        n_mc,
        seed,
    )
}

/// Calibration against any generator of change-free frames of `len` rows.
pub fn calibrate_on_null<F>(
    null_frame: F,
    len: usize,
    config: &PipelineConfig,
    detector: &DetectorConfig,
    target_pfa: f64,
    n_mc: usize,
    seed: RngSeed,
) -> Result<Calibration>
where
    F: Fn(RngSeed) -> Result<SeriesFrame> + Sync,
{
    config.validate()?;
    detector.validate()?;
    let horizon = make_windows(&config.plan, len)?.len();
    calibrate_threshold(
        |s| {
            let frame = null_frame(s)?;
            Ok(entropy_stream(&frame, config, s.derive(1))?.series.values)
        },
        detector,
        &shift_policy(&config.plan),
        target_pfa,
        horizon,
        n_mc,
        seed,
        ThresholdGrid::default(),
    )
}

/// The entropy pipeline with a fixed alarm level, as a replication detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyDetector {
    pub pipeline: PipelineConfig,
    pub detector: DetectorConfig,
    pub threshold: f64,
}

impl ChangeDetector for EntropyDetector {
    fn alarm_times(&self, frame: &SeriesFrame, seed: RngSeed) -> Result<Vec<usize>> {
        Ok(detect(frame, &self.pipeline, &self.detector, self.threshold, seed)?.alarm_times())
    }
}
