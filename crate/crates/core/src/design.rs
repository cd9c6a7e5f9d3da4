//! Analytic power and sample size for the new one-sample test under a
//! Weibull planning model with uniform accrual, plus Schoenfeld-formula
//! sizing of a randomised two-arm comparator.
//!
//! Patients enter uniformly over `[0, a]` and are followed until `a + f`, so
//! administrative censoring is `C ~ U(f, a + f)`.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::{bisect, Quadrature};

/// Cumulative hazards above this are treated as certain failure: the
/// neglected tail carries mass below `exp(-45)`.
const V_CAP: f64 = 45.0;
const A_START: f64 = 0.01;
pub const A_MAX: f64 = 100.0;

/// Weibull law with `Λ(t) = -ln(s1) · t^κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullModel {
    pub s1: f64,
    pub kappa: f64,
}

impl WeibullModel {
    pub fn new(s1: f64, kappa: f64) -> Result<Self> {
        if !(s1 > 0.0 && s1 < 1.0) {
            return Err(Error::param("s1", format!("must lie in (0, 1), got {s1}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
        }
        Ok(Self { s1, kappa })
    }

    fn scale(&self) -> f64 {
        -self.s1.ln()
    }

    pub fn cum_hazard(&self, t: f64) -> f64 {
        self.scale() * t.powf(self.kappa)
    }

    pub fn hazard(&self, t: f64) -> f64 {
        self.scale() * self.kappa * t.powf(self.kappa - 1.0)
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cum_hazard(t)).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.cum_hazard(t)).exp_m1()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.hazard(t) * self.survival(t)
    }

    /// Inverse of the cumulative hazard.
    pub fn time_at(&self, v: f64) -> f64 {
        (v / self.scale()).powf(1.0 / self.kappa)
    }
}

/// Convenience constructor mirroring the planning parameterisation.
pub fn weibull_cum_hazard(s1: f64, kappa: f64) -> Result<WeibullModel> {
    WeibullModel::new(s1, kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialDesign {
    pub accrual_a: f64,
    pub followup_f: f64,
    pub rate_r: f64,
    pub pi: f64,
    pub alpha: f64,
    pub omega0: f64,
    pub kappa: f64,
    pub s1: f64,
}

impl TrialDesign {
    pub fn validate(&self) -> Result<()> {
        self.validate_without_accrual()?;
        if !(self.accrual_a > 0.0 && self.accrual_a.is_finite()) {
            return Err(Error::param(
                "accrual_a",
                format!("must be positive, got {}", self.accrual_a),
            ));
        }
        Ok(())
    }

    fn validate_without_accrual(&self) -> Result<()> {
        if !(self.followup_f >= 0.0 && self.followup_f.is_finite()) {
            return Err(Error::param(
                "followup_f",
                format!("must be nonnegative, got {}", self.followup_f),
            ));
        }
        if !(self.rate_r > 0.0 && self.rate_r.is_finite()) {
            return Err(Error::param("rate_r", format!("must be positive, got {}", self.rate_r)));
        }
        if !(self.pi > 0.0 && self.pi.is_finite()) {
            return Err(Error::param("pi", format!("must be positive, got {}", self.pi)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.omega0 > 0.0 && self.omega0 <= 1.0) {
            return Err(Error::param(
                "omega0",
                format!("must lie in (0, 1], got {}", self.omega0),
            ));
        }
        WeibullModel::new(self.s1, self.kappa)?;
        Ok(())
    }

    pub fn model(&self) -> WeibullModel {
        WeibullModel {
            s1: self.s1,
            kappa: self.kappa,
        }
    }

    pub fn with_accrual(&self, accrual_a: f64) -> Self {
        Self { accrual_a, ..*self }
    }

    /// `n = r · a`, not rounded.
    pub fn n(&self) -> f64 {
        self.rate_r * self.accrual_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizingMethod {
    New,
    Schoenfeld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub method: SizingMethod,
    /// Accrual duration of the integer design, `n_total / r`.
    pub accrual_a: f64,
    /// Continuous solution of the sizing equation before rounding `n`.
    pub accrual_root: f64,
    pub n_total: u64,
    pub n_control: u64,
    pub n_experimental: u64,
    pub achieved_power: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Required number of events (Schoenfeld sizing only).
    pub events_required: Option<f64>,
}

/// Splits `n` into `(control, experimental)` with ratio close to `pi`.
pub fn allocate(n: u64, pi: f64) -> Result<(u64, u64)> {
    let control = (n as f64 / (1.0 + pi)).round() as u64;
    let experimental = n.saturating_sub(control);
    if control == 0 || experimental == 0 {
        return Err(Error::EmptyArm);
    }
    Ok((control, experimental))
}

fn geometric_breaks(from: f64, to: f64, count: i32) -> impl Iterator<Item = f64> {
    (1..=count).map(move |k| to + (from - to) * 0.5f64.powi(k))
}

/// Limiting quantities of the planning model, with `σ_A` memoised across
/// outer quadrature nodes.
struct Planning {
    model: WeibullModel,
    a: f64,
    f: f64,
    /// Upper end of integrals involving `σ_A`.
    upper: f64,
    quad: Quadrature,
    inner: Quadrature,
    sigma_cache: RefCell<BTreeMap<u64, f64>>,
}

impl Planning {
    fn new(design: &TrialDesign) -> Self {
        let model = design.model();
        let a = design.accrual_a;
        let f = design.followup_f;
        let upper = (a + f).min(model.time_at(V_CAP));
        let mut cache = BTreeMap::new();
        if f <= upper {
            cache.insert(f.to_bits(), model.cum_hazard(f).exp_m1());
        }
        Self {
            model,
            a,
            f,
            upper,
            quad: Quadrature {
                abs_tol: 1e-10,
                rel_tol: 1e-9,
                max_intervals: 4000,
            },
            inner: Quadrature {
                abs_tol: 1e-14,
                rel_tol: 1e-12,
                max_intervals: 2000,
            },
            sigma_cache: RefCell::new(cache),
        }
    }

    fn censor_survival(&self, u: f64) -> f64 {
        ((self.a + self.f - u) / self.a).clamp(0.0, 1.0)
    }

    /// `σ_A(s) = ∫_0^s λ / (S_T S_C)`.
    fn sigma_a(&self, s: f64) -> Result<f64> {
        if s <= self.f {
            return Ok(self.model.cum_hazard(s).exp_m1());
        }
        if s >= self.a + self.f {
            return Ok(f64::INFINITY);
        }
        let key = s.to_bits();
        let (start, base) = {
            let cache = self.sigma_cache.borrow();
            let (&k, &v) = cache
                .range(..=key)
                .next_back()
                .expect("cache is seeded at the follow-up time");
            (f64::from_bits(k), v)
        };
        if start == s {
            return Ok(base);
        }
        // Near zero, v = Λ(u) coordinates (λ du = dv) remove the hazard
        // singularity; near a + f, log-distance coordinates remove the pole.
        let (a, f, m) = (self.a, self.f, self.model);
        let split = (f + 0.5 * a).clamp(start, s);
        let mut add = self.inner.integrate(
            |v| v.exp() * a / (a + f - m.time_at(v)),
            m.cum_hazard(start),
            m.cum_hazard(split),
            &[],
        )?;
        // y = -ln(a + f - u) absorbs the pole at a + f: du / (a + f - u) = dy
        let end = a + f;
        add += self.inner.integrate(
            |y| {
                let u = end - (-y).exp();
                m.hazard(u) * m.cum_hazard(u).exp() * a
            },
            -(end - split).ln(),
            -(end - s).ln(),
            &[],
        )?;
        let value = base + add;
        self.sigma_cache.borrow_mut().insert(key, value);
        Ok(value)
    }

    /// `∫_0^∞ F_T(s ∧ u) f_C(u) du`.
    fn events_integral(&self, s: f64) -> Result<f64> {
        let (a, f) = (self.a, self.f);
        let end = s.min(a + f);
        let mut total = 0.0;
        if end > f {
            let m = self.model;
            let mut breaks: Vec<f64> = Vec::new();
            if f == 0.0 {
                breaks.extend(geometric_breaks(end, 0.0, 30));
            }
            total = self.quad.integrate(|u| m.cdf(u), f, end, &breaks)? / a;
        }
        if s < a + f {
            total += self.model.cdf(s) * self.censor_survival(s);
        }
        Ok(total)
    }

    /// `∫_0^∞ σ_A(s ∧ u) [f_T S_C + S_T f_C] S_T S_C du`.
    fn variance_integral(&self, s: f64) -> Result<f64> {
        let m = self.model;
        let (a, f) = (self.a, self.f);
        let end = s.min(self.upper);

        // [0, f]: S_C = 1 and f_C = 0, so the integrand is (e^v - 1) e^{-2v} dv
        let v_f = m.cum_hazard(f.min(end));
        let mut total = -(-v_f).exp_m1() + 0.5 * (-2.0 * v_f).exp_m1();

        if end > f {
            let failure = RefCell::new(None);
            let sigma = |u: f64| match self.sigma_a(u) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            };

            // f_T S_C S_T S_C du = S_T^2 S_C^2 dv
            let v_breaks: Vec<f64> = geometric_breaks(f, a + f, 30)
                .filter(|&u| u < end)
                .map(|u| m.cum_hazard(u))
                .collect();
            let first = self.quad.integrate(
                |v| {
                    let u = m.time_at(v).clamp(f, end);
                    let sc = self.censor_survival(u);
                    if sc == 0.0 {
                        return 0.0;
                    }
                    sigma(u) * (-2.0 * v).exp() * sc * sc
                },
                m.cum_hazard(f),
                m.cum_hazard(end),
                &v_breaks,
            );
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            total += first?;

            // S_T f_C S_T S_C du
            let mut u_breaks: Vec<f64> = geometric_breaks(f, a + f, 30).collect();
            if f == 0.0 {
                u_breaks.extend(geometric_breaks(end, 0.0, 30));
            }
            let second = self.quad.integrate(
                |u| {
                    let (st, sc) = (m.survival(u), self.censor_survival(u));
                    if sc == 0.0 {
                        return 0.0;
                    }
                    sigma(u) * st * st * sc / a
                },
                f,
                end,
                &u_breaks,
            );
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            total += second?;
        }

        if s < self.upper {
            // mass of the pairwise minimum beyond s: S_X(s)^2 / 2
            let sx = m.survival(s) * self.censor_survival(s);
            total += self.sigma_a(s)? * sx * sx / 2.0;
        }
        Ok(total)
    }
}

/// Mean and standard deviation of the limiting normal law of the new test
/// statistic under the planning alternative.
pub fn mu_sigma(design: &TrialDesign) -> Result<(f64, f64)> {
    design.validate()?;
    let p = Planning::new(design);
    let events = p.events_integral(f64::INFINITY)?;
    let var = p.variance_integral(f64::INFINITY)?;
    let mu = (design.n() * design.pi / (1.0 + design.pi)).sqrt() * events;
    let sigma2 = events + 2.0 * design.pi * var;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::Degenerate("limiting variance is zero".into()));
    }
    Ok((mu, sigma2.sqrt()))
}

fn power_from(design: &TrialDesign, mu: f64, sigma: f64) -> f64 {
    normal::cdf(normal::quantile(design.alpha / 2.0) - design.omega0.ln() * mu / sigma)
}

/// Probability of rejecting in favour of the experimental arm under the
/// planning hazard ratio `omega0`.
pub fn power(design: &TrialDesign) -> Result<f64> {
    let (mu, sigma) = mu_sigma(design)?;
    Ok(power_from(design, mu, sigma))
}

/// `(a, power)` pairs for plotting, evaluated in parallel.
pub fn power_curve(design: &TrialDesign, accruals: &[f64]) -> Result<Vec<(f64, f64)>> {
    accruals
        .par_iter()
        .map(|&a| power(&design.with_accrual(a)).map(|p| (a, p)))
        .collect()
}

fn check_target(design: &TrialDesign, target: f64) -> Result<()> {
    if !(target > design.alpha / 2.0 && target < 1.0) {
        return Err(Error::param(
            "target_power",
            format!("must lie in (alpha/2, 1), got {target}"),
        ));
    }
    Ok(())
}

/// Smallest accrual in `[A_START·2^k]` whose `g` is nonnegative, followed by
/// bisection on `g` to the continuous root.
fn solve_accrual(mut g: impl FnMut(f64) -> Result<f64>, what: &str) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = A_START;
    loop {
        if g(hi)? >= 0.0 {
            break;
        }
        if hi >= A_MAX {
            return Err(Error::Infeasible(format!(
                "{what} not reached with accrual up to {A_MAX} years"
            )));
        }
        lo = hi;
        hi = (hi * 2.0).min(A_MAX);
    }
    if lo == 0.0 {
        return Ok(hi);
    }
    let root = bisect(&mut g, lo, hi, 1e-12)?;
    // keep the side where the criterion holds
    let mut a = root;
    while g(a)? < 0.0 {
        a += 1e-12 * (1.0 + a);
    }
    Ok(a)
}

/// Smallest accrual (and patient count) at which the new test reaches
/// `target_power`. `base.accrual_a` is ignored.
pub fn required_accrual(base: &TrialDesign, target_power: f64) -> Result<DesignResult> {
    base.validate_without_accrual()?;
    check_target(base, target_power)?;
    let power_at = |a: f64| power(&base.with_accrual(a));
    let root = solve_accrual(|a| Ok(power_at(a)? - target_power), "target power")?;
    let r = base.rate_r;
    let mut n = (r * root).ceil().max(2.0) as u64;
    while n > 2 && power_at((n - 1) as f64 / r)? >= target_power {
        n -= 1;
    }
    while power_at(n as f64 / r)? < target_power {
        n += 1;
    }
    let design = base.with_accrual(n as f64 / r);
    let (mu, sigma) = mu_sigma(&design)?;
    let (n_control, n_experimental) = allocate(n, base.pi)?;
    Ok(DesignResult {
        method: SizingMethod::New,
        accrual_a: design.accrual_a,
        accrual_root: root,
        n_total: n,
        n_control,
        n_experimental,
        achieved_power: power_from(&design, mu, sigma),
        mu,
        sigma,
        events_required: None,
    })
}

/// Required events for a two-arm log-rank comparison (Schoenfeld).
pub fn schoenfeld_events(alpha: f64, target_power: f64, pi: f64, omega0: f64) -> f64 {
    let z = normal::quantile(1.0 - alpha / 2.0) + normal::quantile(target_power);
    z * z * (1.0 + pi).powi(2) / (pi * omega0.ln().powi(2))
}

/// Expected events in both arms of an equally allocated randomised trial
/// with accrual `a`.
fn expected_events(design: &TrialDesign, a: f64) -> Result<f64> {
    let m = design.model();
    let w = design.omega0;
    let f = design.followup_f;
    let mut breaks = Vec::new();
    if f == 0.0 {
        breaks.extend(geometric_breaks(a, 0.0, 30));
    }
    let integral = Quadrature::default().integrate(
        |t| {
            let v = m.cum_hazard(t);
            -(-v).exp_m1() - (-w * v).exp_m1()
        },
        f,
        a + f,
        &breaks,
    )?;
    Ok(design.rate_r / 2.0 * integral)
}

/// Sample size of the randomised comparator via Schoenfeld's event count,
/// rounded up to an even number. `base.accrual_a` is ignored; requires
/// equal allocation.
pub fn schoenfeld_sample_size(base: &TrialDesign, target_power: f64) -> Result<DesignResult> {
    base.validate_without_accrual()?;
    check_target(base, target_power)?;
    if base.pi != 1.0 {
        return Err(Error::param(
            "pi",
            "Schoenfeld sizing assumes equal allocation (pi = 1)",
        ));
    }
    if base.omega0 >= 1.0 {
        return Err(Error::Infeasible("no events suffice when omega0 = 1".into()));
    }
    let d = schoenfeld_events(base.alpha, target_power, base.pi, base.omega0);
    let root = solve_accrual(|a| Ok(expected_events(base, a)? - d), "required events")?;
    let n = 2 * (base.rate_r * root / 2.0).ceil().max(1.0) as u64;
    let a = n as f64 / base.rate_r;
    let events = expected_events(base, a)?;
    let pi = base.pi;
    let mu = base.omega0.ln().abs() * (events * pi).sqrt() / (1.0 + pi);
    let (n_control, n_experimental) = allocate(n, pi)?;
    Ok(DesignResult {
        method: SizingMethod::Schoenfeld,
        accrual_a: a,
        accrual_root: root,
        n_total: n,
        n_control,
        n_experimental,
        achieved_power: normal::cdf(mu - normal::quantile(1.0 - base.alpha / 2.0)),
        mu,
        sigma: 1.0,
        events_required: Some(d),
    })
}

/// Time-indexed drift `μ(s)` and variance `Σ²(s)` of the limiting process
/// under contiguous alternatives `ω_n = exp(-γ / √n)`.
pub struct DriftVariance {
    planning: Planning,
    pi: f64,
    gamma: f64,
}

impl DriftVariance {
    pub fn mu(&self, s: f64) -> Result<f64> {
        let e = self.planning.events_integral(s.max(0.0))?;
        Ok(-self.gamma * (self.pi / (1.0 + self.pi)).sqrt() * e)
    }

    pub fn sigma2(&self, s: f64) -> Result<f64> {
        let s = s.max(0.0);
        let e = self.planning.events_integral(s)?;
        let v = self.planning.variance_integral(s)?;
        Ok(e + 2.0 * self.pi * v)
    }
}

pub fn drift_variance_functions(design: &TrialDesign, gamma: f64) -> Result<DriftVariance> {
    design.validate()?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("must be nonnegative, got {gamma}")));
    }
    Ok(DriftVariance {
        planning: Planning::new(design),
        pi: design.pi,
        gamma,
    })
}
