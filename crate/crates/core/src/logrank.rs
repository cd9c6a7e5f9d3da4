//! Significance tests comparing an experimental cohort against a reference.
//!
//! * [`new_test`]: one-sample log-rank test whose standardisation accounts for
//!   the sampling variability of a Nelson–Aalen reference curve.
//! * [`classical_oslr`]: the classical one-sample log-rank test, which treats
//!   the reference cumulative hazard as known.
//! * [`two_sample_logrank`]: Mantel's two-sample log-rank test.
//!
//! All statistics are oriented so that an excess of experimental events gives
//! a positive value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::step::StepFunction;
use crate::survival::{na_variance, nelson_aalen, Cohort};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    New,
    Oslr,
    TwoSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    /// Observed minus expected: `M̂₀(∞)` for the one-sample tests, `O - E`
    /// for the two-sample test.
    pub m_hat: f64,
    pub variance_new: Option<f64>,
    pub variance_oslr: Option<f64>,
    /// Hypergeometric variance of `O - E` (two-sample test only).
    pub variance_logrank: Option<f64>,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

impl TestResult {
    fn decide(
        test: TestKind,
        statistic: f64,
        m_hat: f64,
        alpha: f64,
        variances: (Option<f64>, Option<f64>, Option<f64>),
    ) -> Self {
        let critical = normal::quantile(1.0 - alpha / 2.0);
        Self {
            test,
            statistic,
            m_hat,
            variance_new: variances.0,
            variance_oslr: variances.1,
            variance_logrank: variances.2,
            p_value: normal::two_sided_p(statistic),
            reject: statistic.abs() >= critical,
            alpha,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")))
    }
}

fn nonempty(cohort: &Cohort) -> Result<()> {
    if cohort.is_empty() {
        Err(Error::EmptyCohort)
    } else {
        Ok(())
    }
}

fn m_hat_against(reference: &StepFunction, experimental: &Cohort) -> f64 {
    let n_b = experimental.len() as f64;
    let events = experimental.event_count() as f64;
    let expected: f64 = experimental.times().map(|t| reference.eval(t)).sum();
    (events - expected) / n_b.sqrt()
}

/// `M̂₀(∞) = n_B^{-1/2} [N_B(∞) - Σ_i Λ̂_A(X_{B,i})]`.
pub fn m_hat_zero(control: &Cohort, experimental: &Cohort) -> Result<f64> {
    nonempty(experimental)?;
    let reference = nelson_aalen(control)?;
    Ok(m_hat_against(&reference, experimental))
}

/// Sum over all ordered pairs `(i, j)` of `σ̂(X_i ∧ X_j)`, using that the
/// k-th smallest time is the pairwise minimum for `2 (n - k) + 1` pairs.
fn pairwise_min_sum(variance: &StepFunction, experimental: &Cohort) -> f64 {
    let n = experimental.len();
    experimental
        .times()
        .enumerate()
        .map(|(k, t)| variance.eval(t) * (2 * (n - k - 1) + 1) as f64)
        .sum()
}

/// Returns `(Σ̂²(∞), Σ̂²_OSLR(∞))`.
pub fn sigma_hat_sq(control: &Cohort, experimental: &Cohort) -> Result<(f64, f64)> {
    nonempty(experimental)?;
    let variance = na_variance(control)?;
    Ok(variances(&variance, control.len(), experimental))
}

fn variances(variance: &StepFunction, n_a: usize, experimental: &Cohort) -> (f64, f64) {
    let n_b = experimental.len() as f64;
    let oslr = experimental.event_count() as f64 / n_b;
    let correction = pairwise_min_sum(variance, experimental) / (n_b * n_a as f64);
    (oslr + correction, oslr)
}

/// One-sample log-rank test with the reference curve estimated from
/// `control`, standardised by `Σ̂(∞)`.
pub fn new_test(control: &Cohort, experimental: &Cohort, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    nonempty(experimental)?;
    let reference = nelson_aalen(control)?;
    let variance = na_variance(control)?;
    let m_hat = m_hat_against(&reference, experimental);
    let (var_new, var_oslr) = variances(&variance, control.len(), experimental);
    if var_new <= 0.0 {
        return Err(Error::DegenerateData);
    }
    Ok(TestResult::decide(
        TestKind::New,
        m_hat / var_new.sqrt(),
        m_hat,
        alpha,
        (Some(var_new), Some(var_oslr), None),
    ))
}

/// Classical one-sample log-rank test against a deterministic reference
/// cumulative hazard.
pub fn classical_oslr(reference: &StepFunction, experimental: &Cohort, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    nonempty(experimental)?;
    if reference.values().iter().any(|&v| v < 0.0)
        || reference.initial_value() < 0.0
        || reference.values().windows(2).any(|w| w[1] < w[0])
        || reference
            .values()
            .first()
            .is_some_and(|&v| v < reference.initial_value())
    {
        return Err(Error::InvalidInput(
            "reference cumulative hazard must be nonnegative and nondecreasing".into(),
        ));
    }
    let events = experimental.event_count();
    if events == 0 {
        return Err(Error::ZeroVariance);
    }
    let m_hat = m_hat_against(reference, experimental);
    let var_oslr = events as f64 / experimental.len() as f64;
    Ok(TestResult::decide(
        TestKind::Oslr,
        m_hat / var_oslr.sqrt(),
        m_hat,
        alpha,
        (None, Some(var_oslr), None),
    ))
}

/// Two-sample log-rank test with hypergeometric variance and the ties
/// factor `(Y - d) / (Y - 1)`.
pub fn two_sample_logrank(control: &Cohort, experimental: &Cohort, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    nonempty(control)?;
    nonempty(experimental)?;
    let a = control.records();
    let b = experimental.records();
    let (mut i, mut j) = (0, 0);
    let mut o_minus_e = 0.0;
    let mut var = 0.0;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.time.min(y.time),
            (Some(x), None) => x.time,
            (None, Some(y)) => y.time,
            (None, None) => unreachable!(),
        };
        let y_b = (b.len() - j) as f64;
        let y = (a.len() - i) as f64 + y_b;
        let mut d_a = 0usize;
        while i < a.len() && a[i].time == t {
            d_a += a[i].event as usize;
            i += 1;
        }
        let mut d_b = 0usize;
        while j < b.len() && b[j].time == t {
            d_b += b[j].event as usize;
            j += 1;
        }
        let d = (d_a + d_b) as f64;
        if d == 0.0 {
            continue;
        }
        let share = y_b / y;
        o_minus_e += d_b as f64 - d * share;
        let ties = if y > 1.0 { (y - d) / (y - 1.0) } else { 0.0 };
        var += d * share * (1.0 - share) * ties;
    }
    if var <= 0.0 {
        return Err(Error::NoInformativeEvents);
    }
    Ok(TestResult::decide(
        TestKind::TwoSample,
        o_minus_e / var.sqrt(),
        o_minus_e,
        alpha,
        (None, None, Some(var)),
    ))
}
