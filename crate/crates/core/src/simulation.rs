//! Seedable Monte Carlo engine for trials with uniform accrual, Weibull
//! control survival and proportional hazards in the experimental arm.
//!
//! Replicate `i` draws from a ChaCha8 stream keyed by `(seed, i)`, so results
//! do not depend on how replicates are scheduled across threads.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{allocate, required_accrual, schoenfeld_sample_size, TrialDesign, WeibullModel};
use crate::error::{Error, Result};
use crate::logrank::{classical_oslr, new_test, two_sample_logrank, TestKind, TestResult};
use crate::step::StepFunction;
use crate::survival::{nelson_aalen, Cohort, Group, SubjectRecord};
use crate::tables::{self, PowerRow, ScenarioCells};

/// Reference curve handed to the classical one-sample test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OslrReference {
    /// Nelson–Aalen estimate from the simulated control arm.
    #[default]
    Estimated,
    /// The true control cumulative hazard.
    True,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Accrual, follow-up, rate, allocation, level and control law.
    /// `omega0` is not used.
    pub design: TrialDesign,
    pub omega_true: f64,
    /// Overrides `rate_r · accrual_a`; accrual then becomes `n_total / rate_r`.
    pub n_total: Option<u64>,
    pub replications: u64,
    pub seed: u64,
    pub tests: Vec<TestKind>,
    #[serde(default)]
    pub oslr_reference: OslrReference,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let d = &self.design;
        if !(d.rate_r > 0.0 && d.rate_r.is_finite()) {
            return Err(Error::param("rate_r", format!("must be positive, got {}", d.rate_r)));
        }
        if self.n_total.is_none() && !(d.accrual_a > 0.0 && d.accrual_a.is_finite()) {
            return Err(Error::param(
                "accrual_a",
                format!("must be positive, got {}", d.accrual_a),
            ));
        }
        if !(d.followup_f >= 0.0 && d.followup_f.is_finite()) {
            return Err(Error::param(
                "followup_f",
                format!("must be nonnegative, got {}", d.followup_f),
            ));
        }
        if !(d.pi > 0.0 && d.pi.is_finite()) {
            return Err(Error::param("pi", format!("must be positive, got {}", d.pi)));
        }
        if !(d.alpha > 0.0 && d.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {}", d.alpha)));
        }
        WeibullModel::new(d.s1, d.kappa)?;
        if !(self.omega_true > 0.0 && self.omega_true.is_finite()) {
            return Err(Error::param(
                "omega_true",
                format!("must be positive, got {}", self.omega_true),
            ));
        }
        if self.replications == 0 {
            return Err(Error::param("replications", "must be at least 1"));
        }
        if self.tests.is_empty() {
            return Err(Error::param("tests", "select at least one test"));
        }
        self.arms().map(|_| ())
    }

    pub fn n(&self) -> u64 {
        self.n_total
            .unwrap_or_else(|| (self.design.rate_r * self.design.accrual_a).round() as u64)
    }

    pub fn accrual(&self) -> f64 {
        match self.n_total {
            Some(n) => n as f64 / self.design.rate_r,
            None => self.design.accrual_a,
        }
    }

    /// `(n_A, n_B)`.
    pub fn arms(&self) -> Result<(u64, u64)> {
        allocate(self.n(), self.design.pi)
    }
}

fn draw_arm(
    rng: &mut ChaCha8Rng,
    count: u64,
    group: Group,
    a: f64,
    f: f64,
    hazard_scale: f64,
    kappa: f64,
) -> Result<Cohort> {
    let records = (0..count)
        .map(|_| {
            let entry: f64 = a * rng.sample::<f64, _>(Open01);
            let censor = a + f - entry;
            let u: f64 = rng.sample(Open01);
            let t = (-u.ln() / hazard_scale).powf(1.0 / kappa);
            if t <= censor {
                SubjectRecord::event(t, group)
            } else {
                SubjectRecord::censored(censor, group)
            }
        })
        .collect();
    Cohort::new(records)
}

/// Control and experimental cohorts of replicate `index`.
pub fn generate_trial(config: &SimulationConfig, index: u64) -> Result<(Cohort, Cohort)> {
    let (n_a, n_b) = config.arms()?;
    let d = &config.design;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let scale = -d.s1.ln();
    let a = config.accrual();
    let control = draw_arm(&mut rng, n_a, Group::A, a, d.followup_f, scale, d.kappa)?;
    let experimental = draw_arm(
        &mut rng,
        n_b,
        Group::B,
        a,
        d.followup_f,
        scale * config.omega_true,
        d.kappa,
    )?;
    Ok((control, experimental))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub reject: bool,
}

/// Results of one replicate; `None` marks a degenerate (untestable) sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: u64,
    pub m_hat: Option<f64>,
    pub variance_new: Option<f64>,
    pub new: Option<TestOutcome>,
    pub oslr: Option<TestOutcome>,
    pub two_sample: Option<TestOutcome>,
}

fn outcome(r: &Result<TestResult>) -> Option<TestOutcome> {
    r.as_ref().ok().map(|t| TestOutcome {
        statistic: t.statistic,
        reject: t.reject,
    })
}

fn true_reference(config: &SimulationConfig, experimental: &Cohort) -> StepFunction {
    let m = config.design.model();
    let mut times: Vec<f64> = experimental.times().filter(|&t| t > 0.0).collect();
    times.dedup();
    let values = times.iter().map(|&t| m.cum_hazard(t)).collect();
    StepFunction::new(times, values, 0.0).expect("sorted positive times")
}

pub fn run_replicate(config: &SimulationConfig, index: u64) -> Result<ReplicateOutcome> {
    let (control, experimental) = generate_trial(config, index)?;
    let alpha = config.design.alpha;
    let mut out = ReplicateOutcome {
        index,
        m_hat: None,
        variance_new: None,
        new: None,
        oslr: None,
        two_sample: None,
    };
    for test in &config.tests {
        match test {
            TestKind::New => {
                let r = new_test(&control, &experimental, alpha);
                if let Ok(t) = &r {
                    let (new, oslr) = (t.variance_new.unwrap_or(0.0), t.variance_oslr.unwrap_or(0.0));
                    assert!(new >= oslr, "variance dominance violated in replicate {index}");
                    out.m_hat = Some(t.m_hat);
                    out.variance_new = Some(new);
                }
                out.new = outcome(&r);
            }
            TestKind::Oslr => {
                let reference = match config.oslr_reference {
                    OslrReference::Estimated => nelson_aalen(&control)?,
                    OslrReference::True => true_reference(config, &experimental),
                };
                out.oslr = outcome(&classical_oslr(&reference, &experimental, alpha));
            }
            TestKind::TwoSample => {
                out.two_sample = outcome(&two_sample_logrank(&control, &experimental, alpha));
            }
        }
    }
    Ok(out)
}

/// All replicates in index order.
pub fn simulate(config: &SimulationConfig) -> Result<Vec<ReplicateOutcome>> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|i| run_replicate(config, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTally {
    pub test: TestKind,
    pub rejections: u64,
    pub degenerate: u64,
    pub replications: u64,
    pub rate: f64,
    pub mc_se: f64,
}

impl TestTally {
    fn from_outcomes<'a>(test: TestKind, outcomes: impl Iterator<Item = Option<&'a TestOutcome>>) -> Self {
        let (mut rejections, mut degenerate, mut replications) = (0, 0, 0);
        for o in outcomes {
            replications += 1;
            match o {
                Some(o) if o.reject => rejections += 1,
                Some(_) => {}
                None => degenerate += 1,
            }
        }
        let rate = rejections as f64 / replications as f64;
        Self {
            test,
            rejections,
            degenerate,
            replications,
            rate,
            mc_se: (rate * (1.0 - rate) / replications as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub replications: u64,
    pub n_total: u64,
    pub n_control: u64,
    pub n_experimental: u64,
    pub omega_true: f64,
    pub tallies: Vec<TestTally>,
}

impl SimulationReport {
    pub fn tally(&self, test: TestKind) -> Option<&TestTally> {
        self.tallies.iter().find(|t| t.test == test)
    }
}

pub fn summarize(config: &SimulationConfig, outcomes: &[ReplicateOutcome]) -> Result<SimulationReport> {
    let (n_control, n_experimental) = config.arms()?;
    let tallies = config
        .tests
        .iter()
        .map(|&test| {
            let pick = |o: &ReplicateOutcome| match test {
                TestKind::New => o.new,
                TestKind::Oslr => o.oslr,
                TestKind::TwoSample => o.two_sample,
            };
            let picked: Vec<Option<TestOutcome>> = outcomes.iter().map(pick).collect();
            TestTally::from_outcomes(test, picked.iter().map(|o| o.as_ref()))
        })
        .collect();
    Ok(SimulationReport {
        seed: config.seed,
        replications: outcomes.len() as u64,
        n_total: config.n(),
        n_control,
        n_experimental,
        omega_true: config.omega_true,
        tallies,
    })
}

/// Empirical rejection rates of the selected tests.
pub fn rejection_study(config: &SimulationConfig) -> Result<SimulationReport> {
    let outcomes = simulate(config)?;
    summarize(config, &outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableId {
    /// Type I error of the new and the classical one-sample test.
    T1,
    /// Power comparison, control one-year survival 0.5.
    T2,
    /// Power comparison, control one-year survival 0.8.
    T3,
    /// Power comparison, control one-year survival 0.2.
    T4,
}

impl TableId {
    pub fn len(self) -> usize {
        match self {
            TableId::T1 => tables::TYPE_ONE.len() * tables::TYPE_ONE_PIS.len(),
            _ => self.power_rows().len() * 2,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    fn power_rows(self) -> &'static [PowerRow] {
        match self {
            TableId::T1 => &[],
            TableId::T2 => &tables::POWER_S1_050,
            TableId::T3 => &tables::POWER_S1_080,
            TableId::T4 => &tables::POWER_S1_020,
        }
    }

    fn s1(self) -> f64 {
        match self {
            TableId::T1 | TableId::T2 => 0.5,
            TableId::T3 => 0.8,
            TableId::T4 => 0.2,
        }
    }
}

impl std::str::FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(TableId::T1),
            "T2" => Ok(TableId::T2),
            "T3" => Ok(TableId::T3),
            "T4" => Ok(TableId::T4),
            _ => Err(Error::InvalidInput(format!("unknown table `{s}`"))),
        }
    }
}

/// One reproduced table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub table: TableId,
    /// Index of the selected cell; see [`table_repro`].
    pub cell: usize,
    pub kappa: f64,
    pub pi: f64,
    pub omega0: Option<f64>,
    /// Sizing rule for power tables: 1 = Schoenfeld, 2 = new test.
    pub scenario: Option<u8>,
    pub n_published: u64,
    pub n_used: u64,
    pub quantity: String,
    pub published: f64,
    pub empirical: f64,
    pub mc_se: f64,
    pub abs_diff: f64,
}

const R: f64 = 100.0;
const F: f64 = 3.0;
const ALPHA: f64 = 0.05;

fn base_design(kappa: f64, s1: f64, pi: f64, omega0: f64) -> TrialDesign {
    TrialDesign {
        accrual_a: 1.0,
        followup_f: F,
        rate_r: R,
        pi,
        alpha: ALPHA,
        omega0,
        kappa,
        s1,
    }
}

fn cell(
    table: TableId,
    index: usize,
    context: (f64, f64, Option<f64>, Option<u8>, u64, u64),
    quantity: &str,
    published: f64,
    tally: &TestTally,
) -> CellReport {
    let (kappa, pi, omega0, scenario, n_published, n_used) = context;
    CellReport {
        table,
        cell: index,
        kappa,
        pi,
        omega0,
        scenario,
        n_published,
        n_used,
        quantity: quantity.to_string(),
        published,
        empirical: tally.rate,
        mc_se: tally.mc_se,
        abs_diff: (tally.rate - published).abs(),
    }
}

/// Reproduces selected cells of a published table.
///
/// For `T1`, cell `i` is row `i / 6` at allocation ratio `TYPE_ONE_PIS[i % 6]`.
/// For power tables, cell `i` is row `i / 2` under scenario `i % 2 + 1`; the
/// sample size is recomputed with the matching sizing rule. Cell `i` is
/// simulated with seed `seed + i`.
pub fn table_repro(table: TableId, cells: &[usize], replications: u64, seed: u64) -> Result<Vec<CellReport>> {
    let mut out = Vec::new();
    for &index in cells {
        if index >= table.len() {
            return Err(Error::InvalidInput(format!(
                "cell {index} out of range for {table:?} ({} cells)",
                table.len()
            )));
        }
        let cell_seed = seed.wrapping_add(index as u64);
        match table {
            TableId::T1 => {
                let (kappa, n, values) = tables::TYPE_ONE[index / 6];
                let pi = tables::TYPE_ONE_PIS[index % 6];
                let (alpha_new, alpha_lr) = values[index % 6];
                let config = SimulationConfig {
                    design: base_design(kappa, table.s1(), pi, 1.0),
                    omega_true: 1.0,
                    n_total: Some(n),
                    replications,
                    seed: cell_seed,
                    tests: vec![TestKind::New, TestKind::Oslr],
                    oslr_reference: OslrReference::Estimated,
                };
                let report = rejection_study(&config)?;
                let ctx = (kappa, pi, None, None, n, n);
                out.push(cell(
                    table,
                    index,
                    ctx,
                    "alpha_new",
                    alpha_new,
                    report.tally(TestKind::New).unwrap(),
                ));
                out.push(cell(
                    table,
                    index,
                    ctx,
                    "alpha_lr",
                    alpha_lr,
                    report.tally(TestKind::Oslr).unwrap(),
                ));
            }
            _ => {
                let row = table.power_rows()[index / 2];
                let scenario = (index % 2 + 1) as u8;
                let base = base_design(row.kappa, table.s1(), 1.0, row.omega0);
                let (sized, published): (u64, ScenarioCells) = if scenario == 1 {
                    (schoenfeld_sample_size(&base, 0.8)?.n_total, row.scenario1)
                } else {
                    (required_accrual(&base, 0.8)?.n_total, row.scenario2)
                };
                let ctx = (row.kappa, 1.0, Some(row.omega0), Some(scenario), published.n, sized);
                for (omega, labels) in [
                    (
                        1.0,
                        [("alpha_new", published.alpha_new), ("alpha_lr", published.alpha_lr)],
                    ),
                    (
                        row.omega0,
                        [("power_new", published.power_new), ("power_lr", published.power_lr)],
                    ),
                ] {
                    let config = SimulationConfig {
                        design: base,
                        omega_true: omega,
                        n_total: Some(sized),
                        replications,
                        seed: cell_seed,
                        tests: vec![TestKind::New, TestKind::TwoSample],
                        oslr_reference: OslrReference::Estimated,
                    };
                    let report = rejection_study(&config)?;
                    let [(q_new, p_new), (q_lr, p_lr)] = labels;
                    out.push(cell(
                        table,
                        index,
                        ctx,
                        q_new,
                        p_new,
                        report.tally(TestKind::New).unwrap(),
                    ));
                    out.push(cell(
                        table,
                        index,
                        ctx,
                        q_lr,
                        p_lr,
                        report.tally(TestKind::TwoSample).unwrap(),
                    ));
                }
            }
        }
    }
    Ok(out)
}
