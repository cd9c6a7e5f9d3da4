//! Counting-process primitives and nonparametric estimators for
//! right-censored data.
//!
//! All estimators work on a [`Cohort`], whose records are kept sorted by
//! follow-up time. Tied times are grouped: tied events jump together, and a
//! subject censored at an event time is still counted at risk at that time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Control or historical reference arm.
    A,
    /// Experimental arm.
    B,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::A => f.write_str("A"),
            Group::B => f.write_str("B"),
        }
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Group::A),
            "B" | "b" => Ok(Group::B),
            other => Err(Error::InvalidInput(format!(
                "unknown group label {other:?} (expected \"A\" or \"B\")"
            ))),
        }
    }
}

/// One observation: the follow-up time `min(T, C)` and whether the event was
/// observed before censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub time: f64,
    pub event: bool,
    pub group: Group,
}

impl SubjectRecord {
    pub fn new(time: f64, event: bool, group: Group) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidInput(format!(
                "follow-up time must be finite and nonnegative, got {time}"
            )));
        }
        Ok(Self { time, event, group })
    }

    pub fn event(time: f64, group: Group) -> Self {
        Self {
            time,
            event: true,
            group,
        }
    }

    pub fn censored(time: f64, group: Group) -> Self {
        Self {
            time,
            event: false,
            group,
        }
    }
}

/// Records of a single treatment group, sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    records: Vec<SubjectRecord>,
}

impl Cohort {
    /// Validates and sorts `records`. All records must carry the same group
    /// label. An empty cohort is representable; estimators reject it.
    pub fn new(mut records: Vec<SubjectRecord>) -> Result<Self> {
        if let Some(bad) = records.iter().find(|r| !r.time.is_finite() || r.time < 0.0) {
            return Err(Error::InvalidInput(format!(
                "follow-up time must be finite and nonnegative, got {}",
                bad.time
            )));
        }
        if let Some(first) = records.first() {
            if records.iter().any(|r| r.group != first.group) {
                return Err(Error::InvalidInput(
                    "a cohort must contain records from a single group".into(),
                ));
            }
        }
        records.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self { records })
    }

    /// Convenience constructor from `(time, event)` pairs.
    pub fn from_pairs(group: Group, pairs: &[(f64, bool)]) -> Result<Self> {
        let records = pairs
            .iter()
            .map(|&(time, event)| SubjectRecord::new(time, event, group))
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn group(&self) -> Option<Group> {
        self.records.first().map(|r| r.group)
    }

    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn max_time(&self) -> Option<f64> {
        self.records.last().map(|r| r.time)
    }

    /// Sorted follow-up times.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.time)
    }

    /// Applies a strictly increasing transform to every follow-up time.
    pub fn map_times(&self, g: impl Fn(f64) -> f64) -> Result<Cohort> {
        Cohort::new(
            self.records
                .iter()
                .map(|r| SubjectRecord::new(g(r.time), r.event, r.group))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.records.is_empty() {
            Err(Error::EmptyCohort)
        } else {
            Ok(())
        }
    }

    /// Distinct observed times with their event/censoring counts and the
    /// number at risk just before each time.
    pub(crate) fn risk_table(&self) -> Vec<RiskRow> {
        let n = self.records.len();
        let mut rows = Vec::new();
        let mut i = 0;
        while i < n {
            let t = self.records[i].time;
            let at_risk = n - i;
            let mut events = 0;
            let mut censored = 0;
            while i < n && self.records[i].time == t {
                if self.records[i].event {
                    events += 1;
                } else {
                    censored += 1;
                }
                i += 1;
            }
            rows.push(RiskRow {
                time: t,
                at_risk,
                events,
                censored,
            });
        }
        rows
    }
}

/// Splits mixed records into the control (A) and experimental (B) cohorts.
pub fn split_by_group(records: &[SubjectRecord]) -> Result<(Cohort, Cohort)> {
    let (a, b): (Vec<_>, Vec<_>) = records.iter().partition(|r| r.group == Group::A);
    Ok((Cohort::new(a)?, Cohort::new(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RiskRow {
    pub time: f64,
    pub at_risk: usize,
    pub events: usize,
    pub censored: usize,
}

/// Which indicator the product-limit estimator treats as the "failure".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmTarget {
    Event,
    Censoring,
}

/// The number-at-risk process `Y(s) = #{time >= s}`.
///
/// `Y` is left-continuous. It is stored as the right-continuous function
/// `s ↦ #{time > s}` and evaluated through its left limit, so every subject
/// whose time equals `s` counts as at risk at `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtRisk(StepFunction);

impl AtRisk {
    pub fn eval(&self, s: f64) -> f64 {
        self.0.eval_left(s)
    }

    /// The right-continuous companion `s ↦ #{time > s}`.
    pub fn right_continuous(&self) -> &StepFunction {
        &self.0
    }
}

/// `N(s)`: number of observed events up to and including `s`.
pub fn counting_process(cohort: &Cohort) -> Result<StepFunction> {
    cohort.ensure_nonempty()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut total = 0usize;
    for row in cohort.risk_table() {
        if row.events > 0 {
            total += row.events;
            times.push(row.time);
            values.push(total as f64);
        }
    }
    Ok(StepFunction::from_sorted(times, values, 0.0))
}

pub fn at_risk(cohort: &Cohort) -> Result<AtRisk> {
    cohort.ensure_nonempty()?;
    let n = cohort.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for row in cohort.risk_table() {
        let leaving = row.events + row.censored;
        times.push(row.time);
        values.push((row.at_risk - leaving) as f64);
    }
    Ok(AtRisk(StepFunction::from_sorted(times, values, n as f64)))
}

/// Nelson–Aalen estimate of the cumulative hazard, `Σ_{t<=s} d_t / Y(t)`.
pub fn nelson_aalen(cohort: &Cohort) -> Result<StepFunction> {
    cohort.ensure_nonempty()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut acc = 0.0;
    for row in cohort.risk_table() {
        if row.events > 0 {
            acc += row.events as f64 / row.at_risk as f64;
            times.push(row.time);
            values.push(acc);
        }
    }
    Ok(StepFunction::from_sorted(times, values, 0.0))
}

/// Variance-function estimate `n · Σ_{t<=s} d_t / Y(t)^2`.
pub fn na_variance(cohort: &Cohort) -> Result<StepFunction> {
    cohort.ensure_nonempty()?;
    let n = cohort.len() as f64;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut acc = 0.0;
    for row in cohort.risk_table() {
        if row.events > 0 {
            let y = row.at_risk as f64;
            acc += row.events as f64 / (y * y);
            times.push(row.time);
            values.push(n * acc);
        }
    }
    Ok(StepFunction::from_sorted(times, values, 0.0))
}

/// Product-limit estimate of the survival function of the event time
/// (`KmTarget::Event`) or of the censoring time (`KmTarget::Censoring`).
pub fn kaplan_meier(cohort: &Cohort, target: KmTarget) -> Result<StepFunction> {
    cohort.ensure_nonempty()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    for row in cohort.risk_table() {
        let d = match target {
            KmTarget::Event => row.events,
            KmTarget::Censoring => row.censored,
        };
        if d > 0 {
            surv *= 1.0 - d as f64 / row.at_risk as f64;
            times.push(row.time);
            values.push(surv);
        }
    }
    Ok(StepFunction::from_sorted(times, values, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(pairs: &[(f64, bool)]) -> Cohort {
        Cohort::from_pairs(Group::A, pairs).unwrap()
    }

    fn three() -> Cohort {
        cohort(&[(1.0, true), (1.5, false), (2.0, true)])
    }

    #[test]
    fn counting_process_examples() {
        let n = counting_process(&three()).unwrap();
        assert_eq!(n.eval(0.5), 0.0);
        assert_eq!(n.eval(1.0), 1.0);
        assert_eq!(n.eval(2.0), 2.0);

        let censored = cohort(&[(1.0, false), (3.0, false)]);
        let n = counting_process(&censored).unwrap();
        assert_eq!(n.eval(10.0), 0.0);

        let tied = cohort(&[(1.0, true), (1.0, true)]);
        let n = counting_process(&tied).unwrap();
        assert_eq!(n.eval_left(1.0), 0.0);
        assert_eq!(n.eval(1.0), 2.0);
    }

    #[test]
    fn at_risk_examples() {
        let y = at_risk(&three()).unwrap();
        assert_eq!(y.eval(0.0), 3.0);
        assert_eq!(y.eval(1.0), 3.0);
        assert_eq!(y.eval(1.2), 2.0);
        assert_eq!(y.eval(2.0), 1.0);
        assert_eq!(y.eval(2.1), 0.0);

        let tied = cohort(&[(1.0, true), (1.0, false)]);
        assert_eq!(at_risk(&tied).unwrap().eval(1.0), 2.0);
    }

    #[test]
    fn nelson_aalen_examples() {
        let na = nelson_aalen(&three()).unwrap();
        assert_eq!(na.eval(2.0), 1.0 / 3.0 + 1.0);
        assert!((na.eval(2.0) - 4.0 / 3.0).abs() < 1e-15);

        let censored = cohort(&[(1.0, false), (3.0, false)]);
        assert_eq!(nelson_aalen(&censored).unwrap().eval(5.0), 0.0);

        let tied = cohort(&[(1.0, true), (1.0, true), (2.0, false)]);
        assert_eq!(nelson_aalen(&tied).unwrap().eval(1.0), 2.0 / 3.0);
    }

    #[test]
    fn variance_examples() {
        let v = na_variance(&three()).unwrap();
        assert!((v.eval(2.0) - 10.0 / 3.0).abs() < 1e-15);

        let censored = cohort(&[(1.0, false), (3.0, false)]);
        assert_eq!(na_variance(&censored).unwrap().eval(5.0), 0.0);

        let single = cohort(&[(1.0, true)]);
        assert_eq!(na_variance(&single).unwrap().eval(1.0), 1.0);
    }

    #[test]
    fn kaplan_meier_examples() {
        let km = kaplan_meier(&three(), KmTarget::Event).unwrap();
        assert!((km.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.eval(2.0), 0.0);

        let censored = cohort(&[(1.0, false), (3.0, false)]);
        assert_eq!(kaplan_meier(&censored, KmTarget::Event).unwrap().eval(9.0), 1.0);

        let single = cohort(&[(1.0, true)]);
        assert_eq!(kaplan_meier(&single, KmTarget::Event).unwrap().eval(1.0), 0.0);

        // censoring distribution: the censored subject at 1.5 has 2 at risk
        let cens = kaplan_meier(&three(), KmTarget::Censoring).unwrap();
        assert_eq!(cens.eval(1.4), 1.0);
        assert_eq!(cens.eval(1.5), 0.5);
    }

    #[test]
    fn empty_cohort_is_rejected() {
        let empty = Cohort::new(Vec::new()).unwrap();
        assert_eq!(counting_process(&empty), Err(Error::EmptyCohort));
        assert!(matches!(at_risk(&empty), Err(Error::EmptyCohort)));
        assert_eq!(nelson_aalen(&empty), Err(Error::EmptyCohort));
        assert_eq!(na_variance(&empty), Err(Error::EmptyCohort));
        assert_eq!(kaplan_meier(&empty, KmTarget::Event), Err(Error::EmptyCohort));
    }

    #[test]
    fn invalid_records() {
        assert!(SubjectRecord::new(-1.0, true, Group::A).is_err());
        assert!(SubjectRecord::new(f64::INFINITY, true, Group::A).is_err());
        let mixed = vec![SubjectRecord::event(1.0, Group::A), SubjectRecord::event(2.0, Group::B)];
        assert!(Cohort::new(mixed.clone()).is_err());
        let (a, b) = split_by_group(&mixed).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert_eq!("b".parse::<Group>().unwrap(), Group::B);
        assert!("C".parse::<Group>().is_err());
    }
}
