use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};

/// Sliding-window layout and lag-search bounds for the per-window fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    /// Window length in periods; a window spans `delta + 1` rows.
    pub delta: usize,
    /// Gap between consecutive window starts.
    pub step: usize,
    pub max_ar_order: usize,
    pub max_cov_lag: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self {
            delta: 50,
            step: 1,
            max_ar_order: 10,
            max_cov_lag: 10,
        }
    }
}

impl WindowPlan {
    pub fn new(delta: usize, step: usize, max_ar_order: usize, max_cov_lag: usize) -> Result<Self> {
        let plan = Self {
            delta,
            step,
            max_ar_order,
            max_cov_lag,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(EwsError::InvalidConfig(msg));
        if self.delta < 10 {
            return fail(format!("delta must be >= 10, got {}", self.delta));
        }
        if self.step < 1 {
            return fail("step must be >= 1".into());
        }
        if self.max_ar_order < 1 || self.max_cov_lag < 1 {
            return fail("max_ar_order and max_cov_lag must be >= 1".into());
        }
        if self.delta <= self.lead() + 5 {
            return fail(format!(
                "delta ({}) must exceed max(max_ar_order, max_cov_lag) + 5 = {}",
                self.delta,
                self.lead() + 5
            ));
        }
        Ok(())
    }

    /// Leading rows of each window consumed by lags.
    pub fn lead(&self) -> usize {
        self.max_ar_order.max(self.max_cov_lag)
    }
}

/// Inclusive row interval `[start, end]` with `end - start == delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn rows(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// All windows `[t0, t0 + delta]` with `t0 = 0, step, 2 step, ...` that fit in
/// a series of `len` rows.
pub fn make_windows(plan: &WindowPlan, len: usize) -> Result<Vec<Window>> {
    if len < plan.delta + 1 {
        return Err(EwsError::SeriesTooShort {
            len,
            delta: plan.delta,
        });
    }
    let step = plan.step.max(1);
    Ok((0..)
        .map(|k| k * step)
        .take_while(|t0| t0 + plan.delta < len)
        .map(|start| Window {
            start,
            end: start + plan.delta,
        })
        .collect())
}
