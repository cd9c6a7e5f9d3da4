//! Adaptive Gauss–Kronrod (7/15) quadrature and bisection root finding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes plus the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integral estimate and error estimate over one interval.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0; 15];
    fv[7] = f(centre);
    for k in 0..7 {
        let dx = half * XGK[k];
        fv[k] = f(centre - dx);
        fv[14 - k] = f(centre + dx);
    }
    let mut kronrod = fv[7] * WGK[7];
    let mut gauss = fv[7] * WG[3];
    let mut abs_sum = fv[7].abs() * WGK[7];
    for k in 0..7 {
        let pair = fv[k] + fv[14 - k];
        kronrod += WGK[k] * pair;
        abs_sum += WGK[k] * (fv[k].abs() + fv[14 - k].abs());
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let mean = kronrod / 2.0;
    let mut spread = WGK[7] * (fv[7] - mean).abs();
    for k in 0..7 {
        spread += WGK[k] * ((fv[k] - mean).abs() + (fv[14 - k] - mean).abs());
    }
    // QUADPACK's error heuristic with its round-off floor
    let (spread, abs_sum) = (spread * half.abs(), abs_sum * half.abs());
    let mut error = ((kronrod - gauss) * half).abs();
    if spread != 0.0 && error != 0.0 {
        error = spread * (200.0 * error / spread).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    (kronrod * half, error)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl Quadrature {
    /// Integrates `f` over `[a, b]`, starting from the subintervals delimited
    /// by `breaks` (points outside `(a, b)` are ignored).
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if a > b || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInput(format!("bad integration range [{a}, {b}]")));
        }
        let mut points = vec![a];
        let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        points.extend(inner);
        points.push(b);

        let mut heap = BinaryHeap::new();
        let (mut total, mut total_err) = (0.0, 0.0);
        for w in points.windows(2) {
            let (value, error) = gk15(&mut f, w[0], w[1]);
            total += value;
            total_err += error;
            heap.push(Piece {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
        loop {
            if !total.is_finite() {
                return Err(Error::Degenerate("integrand is not finite".into()));
            }
            let tol = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= tol {
                return Ok(total);
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::Quadrature {
                    achieved: total_err,
                    requested: tol,
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // interval cannot be split further in floating point
                return Err(Error::Quadrature {
                    achieved: total_err,
                    requested: tol,
                });
            }
            let (v1, e1) = gk15(&mut f, worst.a, mid);
            let (v2, e2) = gk15(&mut f, mid, worst.b);
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
            heap.push(Piece {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Piece {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
    }
}

/// Finds a root of `f` in `[lo, hi]` by bisection. `f(lo)` and `f(hi)` must
/// have opposite signs (or one of them must be zero).
pub fn bisect(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Infeasible(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * (1.0 + mid.abs()) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_transcendentals() {
        let q = Quadrature::default();
        let v = q.integrate(|x| x * x, 0.0, 3.0, &[]).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = q.integrate(f64::exp, -1.0, 2.0, &[0.5]).unwrap();
        assert!((v - (2f64.exp() - (-1f64).exp())).abs() < 1e-11);
        let v = q.integrate(|x| x.sqrt(), 0.0, 1.0, &[]).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn kinks_at_breakpoints() {
        let q = Quadrature::default();
        let v = q.integrate(|x| (x - 1.0).abs(), 0.0, 3.0, &[1.0]).unwrap();
        assert!((v - 2.5).abs() < 1e-13);
        let v = q.integrate(|x| if x < 1.0 { 1.0 } else { 2.0 }, 0.0, 2.0, &[]).unwrap();
        assert!((v - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_ranges() {
        let q = Quadrature::default();
        assert_eq!(q.integrate(|x| x, 2.0, 2.0, &[]).unwrap(), 0.0);
        assert!(q.integrate(|x| x, 2.0, 1.0, &[]).is_err());
    }

    #[test]
    fn bisection() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect(|x| Ok(x * x + 1.0), 0.0, 2.0, 1e-12).is_err());
    }
}
