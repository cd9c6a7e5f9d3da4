//! Right-continuous piecewise-constant functions of time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A right-continuous step function on `[0, ∞)`.
///
/// The function equals `initial` on `[0, t_1)`, `values[k]` on
/// `[t_{k+1}, t_{k+2})` and `values.last()` from the last jump onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    initial: f64,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, initial: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "step function has {} jump times but {} values",
                times.len(),
                values.len()
            )));
        }
        if !initial.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("step function values must be finite".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidInput("jump times must be finite and nonnegative".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("jump times must be strictly increasing".into()));
        }
        Ok(Self { times, values, initial })
    }

    /// Builder for callers that already guarantee the invariants.
    pub(crate) fn from_sorted(times: Vec<f64>, values: Vec<f64>, initial: f64) -> Self {
        debug_assert_eq!(times.len(), values.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self { times, values, initial }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_sorted(Vec::new(), Vec::new(), value)
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial)
    }

    /// Value at `t`, including a jump located exactly at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        // number of jump times <= t
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit at `t`, excluding a jump located exactly at `t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    /// Size of the jump at `t` (zero when `t` is not a jump time).
    pub fn jump_at(&self, t: f64) -> f64 {
        self.eval(t) - self.eval_left(t)
    }

    /// Iterates over the constant pieces as `(start, end, value)`, where the
    /// first piece starts at zero and the last one ends at infinity.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.times.len();
        (0..=n).map(move |k| {
            let start = if k == 0 { 0.0 } else { self.times[k - 1] };
            let end = if k == n { f64::INFINITY } else { self.times[k] };
            let value = if k == 0 { self.initial } else { self.values[k - 1] };
            (start, end, value)
        })
    }

    /// Combines two step functions pointwise on the union of their jump grids.
    pub fn combine(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> StepFunction {
        let mut times = Vec::with_capacity(self.times.len() + other.times.len());
        let (mut i, mut j) = (0, 0);
        while i < self.times.len() || j < other.times.len() {
            let next = match (self.times.get(i), other.times.get(j)) {
                (Some(&a), Some(&b)) if a == b => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(_), Some(&b)) => {
                    j += 1;
                    b
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            times.push(next);
        }
        let values = times.iter().map(|&t| op(self.eval(t), other.eval(t))).collect();
        StepFunction::from_sorted(times, values, op(self.initial, other.initial))
    }

    /// Applies `g` to every jump time. `g` must be strictly increasing on the
    /// jump times and map `[0, ∞)` into itself.
    pub fn map_times(&self, g: impl Fn(f64) -> f64) -> Result<StepFunction> {
        StepFunction::new(
            self.times.iter().map(|&t| g(t)).collect(),
            self.values.clone(),
            self.initial,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn staircase() -> StepFunction {
        StepFunction::new(vec![1.0, 2.0, 4.0], vec![1.0, 3.0, 6.0], 0.0).unwrap()
    }

    #[test]
    fn evaluation_is_right_continuous() {
        let f = staircase();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.999), 0.0);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(3.9), 3.0);
        assert_eq!(f.eval(4.0), 6.0);
        assert_eq!(f.eval(1e9), 6.0);
        assert_eq!(f.eval_left(1.0), 0.0);
        assert_eq!(f.eval_left(4.0), 3.0);
        assert_eq!(f.jump_at(2.0), 2.0);
        assert_eq!(f.jump_at(2.5), 0.0);
    }

    #[test]
    fn rejects_unsorted_or_mismatched() {
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.0, 0.0], 0.0).is_err());
        assert!(StepFunction::new(vec![2.0, 1.0], vec![0.0, 0.0], 0.0).is_err());
        assert!(StepFunction::new(vec![1.0], vec![], 0.0).is_err());
        assert!(StepFunction::new(vec![-1.0], vec![0.0], 0.0).is_err());
        assert!(StepFunction::new(vec![f64::NAN], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn combine_uses_union_grid() {
        let f = staircase();
        let g = StepFunction::new(vec![1.5, 2.0], vec![10.0, 20.0], 5.0).unwrap();
        let h = f.combine(&g, |a, b| a + b);
        assert_eq!(h.jump_times(), &[1.0, 1.5, 2.0, 4.0]);
        assert_eq!(h.initial_value(), 5.0);
        assert_eq!(h.values(), &[6.0, 11.0, 23.0, 26.0]);
    }

    #[test]
    fn pieces_cover_the_half_line() {
        let f = staircase();
        let p: Vec<_> = f.pieces().collect();
        assert_eq!(p.len(), 4);
        assert_eq!(p[0], (0.0, 1.0, 0.0));
        assert_eq!(p[3].0, 4.0);
        assert!(p[3].1.is_infinite());
        assert_eq!(StepFunction::constant(2.0).eval(17.0), 2.0);
    }
}
