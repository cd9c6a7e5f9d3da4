//! Actual type I error of the classical one-sample log-rank test when its
//! reference curve is a Nelson–Aalen estimate from historical data.
//!
//! The historical Kaplan–Meier curve stands in for the experimental
//! survival under the null, and the new trial censors uniformly on
//! `[f, a + f]`. All integrals are of step functions against polynomials
//! and are evaluated in closed form.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::step::StepFunction;
use crate::survival::{kaplan_meier, na_variance, Cohort, KmTarget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationInput {
    pub historical: Cohort,
    pub accrual_a: f64,
    pub followup_f: f64,
    pub pi: f64,
    pub alpha: f64,
}

/// The two historical curves every expectation depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalCurves {
    survival: StepFunction,
    variance: StepFunction,
}

impl HistoricalCurves {
    pub fn from_cohort(historical: &Cohort) -> Result<Self> {
        if historical.event_count() == 0 {
            return Err(Error::Degenerate("historical cohort has no events".into()));
        }
        Ok(Self {
            survival: kaplan_meier(historical, KmTarget::Event)?,
            variance: na_variance(historical)?,
        })
    }

    pub fn from_curves(survival: StepFunction, variance: StepFunction) -> Self {
        Self { survival, variance }
    }

    /// `(1/a) ∫_f^{a+f} F̂_T(u) du`.
    pub fn expected_var_oslr(&self, a: f64, f: f64) -> f64 {
        let end = a + f;
        let mut total = 0.0;
        for (s, e, surv) in self.survival.pieces() {
            let (lo, hi) = (s.max(f), e.min(end));
            if hi > lo {
                total += (1.0 - surv) * (hi - lo);
            }
        }
        total / a
    }

    /// The bracketed correction term multiplying `2π`.
    pub fn correction(&self, a: f64, f: f64) -> f64 {
        let end = a + f;
        let censor_survival = |u: f64| ((end - u) / a).clamp(0.0, 1.0);

        // σ̂_A Ŝ² against the censoring density; ∫ S_C f_C over [lo, hi]
        let weight = self.variance.combine(&self.survival, |v, s| v * s * s);
        let mut against_censoring = 0.0;
        for (s, e, w) in weight.pieces() {
            let (lo, hi) = (s.max(f), e.min(end));
            if hi > lo && w != 0.0 {
                against_censoring += w * ((end - lo).powi(2) - (end - hi).powi(2)) / (2.0 * a * a);
            }
        }

        let mut against_events = 0.0;
        for &t in self.survival.jump_times() {
            let mass = -self.survival.jump_at(t);
            let sc = censor_survival(t);
            if mass != 0.0 && sc != 0.0 {
                against_events += self.variance.eval(t) * self.survival.eval(t) * sc * sc * mass;
            }
        }
        against_censoring + against_events
    }

    pub fn expected_var_new(&self, a: f64, f: f64, pi: f64) -> f64 {
        self.expected_var_oslr(a, f) + 2.0 * pi * self.correction(a, f)
    }

    pub fn inflated_level(&self, a: f64, f: f64, pi: f64, alpha: f64) -> Result<f64> {
        check_design(a, f, pi, alpha)?;
        let oslr = self.expected_var_oslr(a, f);
        let new = self.expected_var_new(a, f, pi);
        if new <= 0.0 {
            return Err(Error::Degenerate(
                "no historical events fall inside the planned follow-up window".into(),
            ));
        }
        Ok(level_from_ratio(oslr / new, alpha))
    }
}

/// `2 Φ(√ratio · Φ⁻¹(α/2))`; exactly `α` at ratio 1.
pub fn level_from_ratio(ratio: f64, alpha: f64) -> f64 {
    if ratio >= 1.0 {
        return alpha;
    }
    2.0 * normal::cdf(ratio.sqrt() * normal::quantile(alpha / 2.0))
}

fn check_design(a: f64, f: f64, pi: f64, alpha: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("accrual_a", format!("must be positive, got {a}")));
    }
    if !(f >= 0.0 && f.is_finite()) {
        return Err(Error::param("followup_f", format!("must be nonnegative, got {f}")));
    }
    if !(pi > 0.0 && pi.is_finite()) {
        return Err(Error::param("pi", format!("must be positive, got {pi}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

impl InflationInput {
    fn curves(&self) -> Result<HistoricalCurves> {
        check_design(self.accrual_a, self.followup_f, self.pi, self.alpha)?;
        HistoricalCurves::from_cohort(&self.historical)
    }
}

pub fn expected_var_oslr(input: &InflationInput) -> Result<f64> {
    Ok(input.curves()?.expected_var_oslr(input.accrual_a, input.followup_f))
}

pub fn expected_var_new(input: &InflationInput) -> Result<f64> {
    Ok(input
        .curves()?
        .expected_var_new(input.accrual_a, input.followup_f, input.pi))
}

pub fn inflated_level(input: &InflationInput) -> Result<f64> {
    input
        .curves()?
        .inflated_level(input.accrual_a, input.followup_f, input.pi, input.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Pi,
    Followup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub level: Option<f64>,
    pub error: Option<String>,
}

/// Inflated levels along one axis, other parameters taken from `input`.
/// Rows follow the grid order; a failing row carries its error message.
pub fn sweep(input: &InflationInput, axis: SweepAxis, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]).is_none_or(Ordering::is_gt))
    {
        return Err(Error::InvalidInput("sweep grid must be sorted".into()));
    }
    let curves = HistoricalCurves::from_cohort(&input.historical)?;
    Ok(grid
        .par_iter()
        .map(|&value| {
            let (f, pi) = match axis {
                SweepAxis::Pi => (input.followup_f, value),
                SweepAxis::Followup => (value, input.pi),
            };
            match curves.inflated_level(input.accrual_a, f, pi, input.alpha) {
                Ok(level) => SweepRow {
                    value,
                    level: Some(level),
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    level: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
