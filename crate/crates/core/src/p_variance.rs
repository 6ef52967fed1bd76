//! p-mean `omega_p(v)` and p-variance `kappa_p(v) = min_w ||v - w 1||_p`.
//!
//! `p = 1, 2, inf` use the median, mean and midrange. Other exponents locate
//! the root of `h(w) = sum_s sign(v_s - w) |v_s - w|^(p-1)`, which is
//! strictly decreasing and changes sign on `[min v, max v]`.

use crate::error::{MdpError, Result};
use crate::norm::NormIndex;
use crate::scalar::Scalar;

/// Iteration cap for the p-mean bisection.
pub const MAX_BISECTION_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PMeanResult<T> {
    /// Minimizing shift.
    pub omega: T,
    /// `||v - omega 1||_p`, nonnegative.
    pub kappa: T,
    /// Bisection steps taken (0 for closed forms).
    pub iterations: usize,
}

pub fn p_mean<T: Scalar>(v: &[T], p: NormIndex, tol: T) -> Result<PMeanResult<T>> {
    if v.is_empty() {
        return Err(MdpError::EmptyVector);
    }
    let (lo, hi) = min_max(v);
    if hi - lo <= tol {
        return Ok(PMeanResult {
            omega: (lo + hi) * T::lit(0.5),
            kappa: T::zero(),
            iterations: 0,
        });
    }
    let n = T::from_usize_lossy(v.len());
    let result = match p {
        NormIndex::Infinity => PMeanResult {
            omega: (lo + hi) * T::lit(0.5),
            kappa: (hi - lo) * T::lit(0.5),
            iterations: 0,
        },
        NormIndex::Two => {
            let mean = v.iter().copied().sum::<T>() / n;
            let ss: T = v.iter().map(|&x| (x - mean) * (x - mean)).sum();
            PMeanResult {
                omega: mean,
                kappa: ss.sqrt(),
                iterations: 0,
            }
        }
        NormIndex::One => {
            let omega = median(v);
            PMeanResult {
                omega,
                kappa: v.iter().map(|&x| (x - omega).abs()).sum(),
                iterations: 0,
            }
        }
        NormIndex::Finite(e) => {
            let r = T::lit(e.value());
            let (omega, iterations) = bisect_p_mean(v, r, lo, hi, tol);
            let kappa = v
                .iter()
                .map(|&x| (x - omega).abs().powf(r))
                .sum::<T>()
                .powf(r.recip());
            PMeanResult {
                omega,
                kappa,
                iterations,
            }
        }
    };
    Ok(result)
}

/// [`p_mean`] over the entries of `v` where `allowed` is true.
pub fn p_variance_masked<T: Scalar>(
    v: &[T],
    allowed: &[bool],
    p: NormIndex,
    tol: T,
) -> Result<PMeanResult<T>> {
    if allowed.len() != v.len() {
        return Err(MdpError::DimensionMismatch {
            what: "allowed mask",
            expected: v.len(),
            got: allowed.len(),
        });
    }
    let sub: Vec<T> = v
        .iter()
        .zip(allowed)
        .filter_map(|(&x, &ok)| ok.then_some(x))
        .collect();
    if sub.is_empty() {
        return Err(MdpError::AllMasked);
    }
    p_mean(&sub, p, tol)
}

/// Derivative-sign function whose root is the r-mean.
pub fn p_mean_residual<T: Scalar>(v: &[T], r: T, omega: T) -> T {
    let e = r - T::one();
    v.iter()
        .map(|&x| {
            let d = x - omega;
            if d > T::zero() {
                d.powf(e)
            } else if d < T::zero() {
                -(-d).powf(e)
            } else {
                T::zero()
            }
        })
        .sum()
}

fn bisect_p_mean<T: Scalar>(v: &[T], r: T, mut lo: T, mut hi: T, tol: T) -> (T, usize) {
    let half = T::lit(0.5);
    let mut steps = 0;
    while hi - lo > tol && steps < MAX_BISECTION_STEPS {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if p_mean_residual(v, r, mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    ((lo + hi) * half, steps)
}

fn min_max<T: Scalar>(v: &[T]) -> (T, T) {
    v.iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Average of the two middle order statistics (the middle one for odd n).
fn median<T: Scalar>(v: &[T]) -> T {
    let mut buf = v.to_vec();
    let n = buf.len();
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("finite values");
    let (_, &mut upper, _) = buf.select_nth_unstable_by(n / 2, cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = buf[..n / 2]
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        (lower + upper) * T::lit(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-10;

    fn finite(r: f64) -> NormIndex {
        NormIndex::from_exponent(r).unwrap()
    }

    fn all_norms() -> Vec<NormIndex> {
        vec![
            NormIndex::One,
            finite(1.5),
            NormIndex::Two,
            finite(3.0),
            finite(7.0),
            NormIndex::Infinity,
        ]
    }

    /// Dense grid minimization of `||v - w 1||_p` over `[min v, max v]`.
    fn grid_kappa(v: &[f64], p: NormIndex, step: f64) -> f64 {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n = ((hi - lo) / step).ceil() as usize;
        (0..=n)
            .map(|i| {
                let w = (lo + i as f64 * step).min(hi);
                let d: Vec<f64> = v.iter().map(|x| x - w).collect();
                p.norm(&d)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn constant_vector_has_zero_kappa() {
        for p in all_norms() {
            let r = p_mean(&[4.2, 4.2, 4.2], p, TOL).unwrap();
            assert_eq!(r.omega, 4.2);
            assert_eq!(r.kappa, 0.0);
        }
    }

    #[test]
    fn infinity_is_midrange() {
        let r = p_mean(&[0.0, 2.0], NormIndex::Infinity, TOL).unwrap();
        assert_eq!((r.omega, r.kappa), (1.0, 1.0));
    }

    #[test]
    fn one_is_top_half_minus_bottom_half() {
        let r = p_mean(&[1.0, 2.0, 6.0], NormIndex::One, TOL).unwrap();
        assert_eq!((r.omega, r.kappa), (2.0, 5.0));
        let r = p_mean(&[6.0, 1.0, 3.0, 2.0], NormIndex::One, TOL).unwrap();
        assert_eq!(r.omega, 2.5);
        assert_eq!(r.kappa, 6.0);
    }

    #[test]
    fn two_is_centered_euclidean_norm() {
        let r = p_mean(&[1.0, 2.0, 6.0], NormIndex::Two, TOL).unwrap();
        assert!((r.omega - 3.0).abs() < 1e-15);
        assert!((r.kappa - 14f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_point_cubic() {
        let r = p_mean(&[0.0, 1.0], finite(3.0), TOL).unwrap();
        assert!((r.omega - 0.5).abs() < 1e-10);
        assert!((r.kappa - (2.0f64 * 0.125).powf(1.0 / 3.0)).abs() < 1e-10);
        assert!(r.iterations > 0);
    }

    #[test]
    fn p_one_point_five_matches_grid() {
        let v = [0.3, 1.7, 2.2, 5.0];
        let r = p_mean(&v, finite(1.5), TOL).unwrap();
        let grid = grid_kappa(&v, finite(1.5), 1e-5);
        assert!((r.kappa - grid).abs() < 4.0 * 1e-5, "{} vs {}", r.kappa, grid);
        assert!(r.kappa <= grid + 1e-12);
    }

    #[test]
    fn empty_vector_is_an_error() {
        assert_eq!(p_mean::<f64>(&[], NormIndex::Two, TOL), Err(MdpError::EmptyVector));
    }

    #[test]
    fn masked_examples() {
        let v = [0.0, 100.0, 2.0];
        let r = p_variance_masked(&v, &[true, false, true], NormIndex::Infinity, TOL).unwrap();
        assert_eq!(r.kappa, 1.0);
        let full = p_variance_masked(&v, &[true; 3], NormIndex::Two, TOL).unwrap();
        assert_eq!(full, p_mean(&v, NormIndex::Two, TOL).unwrap());
        assert_eq!(
            p_variance_masked(&v, &[false; 3], NormIndex::Two, TOL),
            Err(MdpError::AllMasked)
        );
    }

    #[test]
    fn f32_closed_forms() {
        let r = p_mean(&[1.0f32, 2.0, 6.0], NormIndex::One, 1e-5).unwrap();
        assert_eq!(r.kappa, 5.0f32);
        let r = p_mean(&[0.0f32, 1.0], finite(3.0), 1e-6).unwrap();
        assert!((r.omega - 0.5).abs() < 1e-5);
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..9)
    }

    fn norm_strategy() -> impl Strategy<Value = NormIndex> {
        prop_oneof![
            Just(NormIndex::One),
            Just(NormIndex::Two),
            Just(NormIndex::Infinity),
            (1.05f64..12.0).prop_map(|r| NormIndex::from_exponent(r).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn translation_invariant(v in vec_strategy(), p in norm_strategy(), c in -20.0f64..20.0) {
            let a = p_mean(&v, p, TOL).unwrap().kappa;
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = p_mean(&shifted, p, TOL).unwrap().kappa;
            prop_assert!((a - b).abs() < 1e-7);
        }

        #[test]
        fn absolutely_homogeneous(v in vec_strategy(), p in norm_strategy(), c in -5.0f64..5.0) {
            let a = p_mean(&v, p, TOL).unwrap().kappa;
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = p_mean(&scaled, p, TOL).unwrap().kappa;
            prop_assert!((b - c.abs() * a).abs() < 1e-7);
        }

        #[test]
        fn minimal_over_probe_shifts(v in vec_strategy(), p in norm_strategy(),
                                     probes in prop::collection::vec(-15.0f64..15.0, 100)) {
            let k = p_mean(&v, p, TOL).unwrap().kappa;
            for w in probes {
                let d: Vec<f64> = v.iter().map(|x| x - w).collect();
                prop_assert!(p.norm(&d) >= k - 1e-8);
            }
        }

        #[test]
        fn root_is_bracketed(v in vec_strategy(), r in 1.05f64..12.0) {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(p_mean_residual(&v, r, lo) >= 0.0);
            prop_assert!(p_mean_residual(&v, r, hi) <= 0.0);
            let res = p_mean(&v, finite(r), TOL).unwrap();
            prop_assert!(res.omega >= lo && res.omega <= hi);
            prop_assert!(res.kappa >= 0.0);
        }

        #[test]
        fn masked_equals_gathered(v in prop::collection::vec(-10.0f64..10.0, 2..10),
                                  bits in any::<u16>()) {
            let mut allowed: Vec<bool> = (0..v.len()).map(|i| bits >> i & 1 == 1).collect();
            allowed[0] = true;
            let gathered: Vec<f64> = v.iter().zip(&allowed).filter(|(_, &a)| a).map(|(&x, _)| x).collect();
            let a = p_variance_masked(&v, &allowed, NormIndex::Two, TOL).unwrap();
            let b = p_mean(&gathered, NormIndex::Two, TOL).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn agrees_with_grid(v in prop::collection::vec(-3.0f64..3.0, 1..6), p in norm_strategy()) {
            let step = 1e-3;
            let k = p_mean(&v, p, TOL).unwrap().kappa;
            let g = grid_kappa(&v, p, step);
            prop_assert!(k <= g + 1e-9);
            prop_assert!(g - k <= step * v.len() as f64);
        }
    }
}
