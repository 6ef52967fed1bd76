//! Lp water filling: `max_{c in simplex} <c, b> - sigma ||c||_q`.
//!
//! With `b` sorted in descending order the optimum `zeta` is the smallest `x`
//! with `(sum_i (b_i - x)_+^p)^(1/p) = sigma`, the top `chi` entries (those
//! with `b_i >= zeta`) are active, and the optimal weights are proportional
//! to `(b_i - zeta)_+^(p-1)`.

use crate::norm::NormIndex;
use crate::scalar::Scalar;

/// Iteration cap for the general-p bisection.
pub const MAX_BISECTION_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct WaterFillResult<T> {
    /// Optimal value.
    pub zeta: T,
    /// Number of entries with `b_i >= zeta`.
    pub chi: usize,
    /// Optimizer, in the caller's index order.
    pub weights: Vec<T>,
    /// `|g(zeta)^p - sigma^p|`, or `|max b - zeta - sigma|` for `p = inf`.
    pub residual: T,
}

/// Reusable buffers for repeated solves of the same width.
#[derive(Clone, Debug, Default)]
pub struct WaterFillScratch<T> {
    order: Vec<usize>,
    sorted: Vec<T>,
}

impl<T: Scalar> WaterFillScratch<T> {
    pub fn new() -> Self {
        Self {
            order: Vec::new(),
            sorted: Vec::new(),
        }
    }

    /// Stable descending sort; ties keep the lower index first.
    fn sort(&mut self, b: &[T]) {
        self.order.clear();
        self.order.extend(0..b.len());
        self.order
            .sort_by(|&i, &j| b[j].partial_cmp(&b[i]).expect("finite values"));
        self.sorted.clear();
        self.sorted.extend(self.order.iter().map(|&i| b[i]));
    }
}

/// Solve the water-filling problem, weights included.
///
/// # Panics
/// If `b` is empty.
pub fn water_fill<T: Scalar>(b: &[T], sigma: T, p: NormIndex, tol: T) -> WaterFillResult<T> {
    let mut scratch = WaterFillScratch::new();
    let (zeta, chi) = water_fill_value(b, sigma, p, tol, &mut scratch);
    let weights = optimal_weights(b, zeta, chi, sigma, p, &scratch);
    WaterFillResult {
        zeta,
        chi,
        weights,
        residual: root_residual(b, zeta, sigma, p),
    }
}

/// `(zeta, chi)` only. Leaves `b` sorted in `scratch` except for `p = inf`
/// and `sigma = 0`, which need no ordering.
pub fn water_fill_value<T: Scalar>(
    b: &[T],
    sigma: T,
    p: NormIndex,
    tol: T,
    scratch: &mut WaterFillScratch<T>,
) -> (T, usize) {
    assert!(!b.is_empty(), "water filling needs at least one action");
    let best = b.iter().copied().fold(T::neg_infinity(), T::max);
    if sigma <= T::zero() {
        scratch.order.clear();
        return (best, count_at_least(b, best));
    }
    match p {
        NormIndex::Infinity => {
            scratch.order.clear();
            let zeta = best - sigma;
            (zeta, count_at_least(b, zeta))
        }
        NormIndex::One => {
            scratch.sort(b);
            highest_penalized_average(&scratch.sorted, sigma)
        }
        NormIndex::Two => {
            scratch.sort(b);
            incremental_quadratic(&scratch.sorted, sigma)
        }
        NormIndex::Finite(e) => {
            scratch.sort(b);
            let zeta = bisect_level(&scratch.sorted, sigma, T::lit(e.value()), tol);
            (zeta, count_at_least(&scratch.sorted, zeta))
        }
    }
}

fn count_at_least<T: Scalar>(b: &[T], level: T) -> usize {
    b.iter().filter(|&&x| x >= level).count()
}

/// `zeta = max_k (sum_{i<=k} b_i - sigma) / k`; ties go to the larger `k`.
fn highest_penalized_average<T: Scalar>(sorted: &[T], sigma: T) -> (T, usize) {
    let mut prefix = T::zero();
    let mut best = (T::neg_infinity(), 1);
    for (i, &x) in sorted.iter().enumerate() {
        prefix += x;
        let k = i + 1;
        let lambda = (prefix - sigma) / T::from_usize_lossy(k);
        if lambda >= best.0 {
            best = (lambda, k);
        }
    }
    best
}

/// `lambda_k = (sum_{i<=k} b_i - sigma) / k` for `k = 1..=A` over sorted `b`.
pub fn penalized_averages<T: Scalar>(b: &[T], sigma: T) -> Vec<T> {
    let mut scratch = WaterFillScratch::new();
    scratch.sort(b);
    let mut prefix = T::zero();
    scratch
        .sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            prefix += x;
            (prefix - sigma) / T::from_usize_lossy(i + 1)
        })
        .collect()
}

/// Grow the active set one action at a time while the current level lies at
/// or below the next value. Each level solves `sum_{i<=k} (b_i - x)^2 =
/// sigma^2` as `mean_k - sqrt((sigma^2 - SS_k) / k)`, with `SS_k` the
/// centered sum of squares of the top `k` entries.
fn incremental_quadratic<T: Scalar>(sorted: &[T], sigma: T) -> (T, usize) {
    let sigma_sq = sigma * sigma;
    let mut k = 1;
    let mut mean = sorted[0];
    let mut centered_ss = T::zero();
    let mut lambda = sorted[0] - sigma;
    while k < sorted.len() && lambda <= sorted[k] {
        // Welford update with the next entry.
        let x = sorted[k];
        k += 1;
        let delta = x - mean;
        mean += delta / T::from_usize_lossy(k);
        centered_ss += delta * (x - mean);
        let disc = ((sigma_sq - centered_ss) / T::from_usize_lossy(k)).max(T::zero());
        lambda = mean - disc.sqrt();
    }
    (lambda, k)
}

/// Smallest `x` in `[b_1 - sigma, b_1]` with `g(x) >= sigma` up to `tol`.
/// Returns the lower bracket end so that `g(zeta) >= sigma` always holds.
fn bisect_level<T: Scalar>(sorted: &[T], sigma: T, r: T, tol: T) -> T {
    let top = sorted[0];
    let mut lo = top - sigma;
    let mut hi = top;
    let half = T::lit(0.5);
    let mut steps = 0;
    while hi - lo > tol && steps < MAX_BISECTION_STEPS {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if scaled_gap_power(sorted, mid, sigma, r) >= T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    lo
}

/// `sum_i ((b_i - x)_+ / sigma)^r`; compares against 1 without underflow.
fn scaled_gap_power<T: Scalar>(sorted: &[T], x: T, sigma: T, r: T) -> T {
    let mut acc = T::zero();
    for &b in sorted {
        if b <= x {
            break;
        }
        acc += ((b - x) / sigma).powf(r);
    }
    acc
}

fn optimal_weights<T: Scalar>(
    b: &[T],
    zeta: T,
    chi: usize,
    sigma: T,
    p: NormIndex,
    scratch: &WaterFillScratch<T>,
) -> Vec<T> {
    let mut w = vec![T::zero(); b.len()];
    let first_max = || {
        let best = b.iter().copied().fold(T::neg_infinity(), T::max);
        b.iter().position(|&x| x == best).unwrap_or(0)
    };
    if sigma <= T::zero() || matches!(p, NormIndex::Infinity) {
        w[first_max()] = T::one();
        return w;
    }
    match p {
        NormIndex::One => {
            let share = T::one() / T::from_usize_lossy(chi);
            for &i in &scratch.order[..chi] {
                w[i] = share;
            }
        }
        NormIndex::Two | NormIndex::Finite(_) => {
            let exponent = T::lit(p.exponent() - 1.0);
            let mut total = T::zero();
            for (wi, &bi) in w.iter_mut().zip(b) {
                if bi > zeta {
                    *wi = if matches!(p, NormIndex::Two) {
                        (bi - zeta) / sigma
                    } else {
                        ((bi - zeta) / sigma).powf(exponent)
                    };
                    total += *wi;
                }
            }
            if total > T::zero() {
                w.iter_mut().for_each(|x| *x /= total);
            } else {
                w[first_max()] = T::one();
            }
        }
        NormIndex::Infinity => unreachable!(),
    }
    w
}

/// Distance from the defining equation of `zeta`.
pub fn root_residual<T: Scalar>(b: &[T], zeta: T, sigma: T, p: NormIndex) -> T {
    let gaps = b.iter().filter(|&&x| x > zeta).map(|&x| x - zeta);
    match p {
        NormIndex::Infinity => {
            let best = b.iter().copied().fold(T::neg_infinity(), T::max);
            (best - zeta - sigma).abs()
        }
        NormIndex::One => (gaps.sum::<T>() - sigma).abs(),
        NormIndex::Two => (gaps.map(|d| d * d).sum::<T>() - sigma * sigma).abs(),
        NormIndex::Finite(e) => {
            let r = T::lit(e.value());
            (gaps.map(|d| d.powf(r)).sum::<T>() - sigma.powf(r)).abs()
        }
    }
}

/// `chi_p = max { k : sum_{i<=k} (b_i - b_k)^p <= sigma^p }` over descending
/// `b`, computed without solving for `zeta`. For `p = inf` this is the number
/// of entries within `sigma` of the maximum.
pub fn active_count<T: Scalar>(b: &[T], sigma: T, p: NormIndex) -> usize {
    assert!(!b.is_empty(), "water filling needs at least one action");
    let mut scratch = WaterFillScratch::new();
    scratch.sort(b);
    let sorted = &scratch.sorted;
    let top = sorted[0];
    if sigma <= T::zero() {
        return count_at_least(sorted, top);
    }
    let mut count = 1;
    for k in 1..sorted.len() {
        let bk = sorted[k];
        let within = match p {
            NormIndex::Infinity => top - bk <= sigma,
            NormIndex::One => sorted[..=k].iter().map(|&x| x - bk).sum::<T>() <= sigma,
            NormIndex::Two => {
                sorted[..=k]
                    .iter()
                    .map(|&x| {
                        let d = (x - bk) / sigma;
                        d * d
                    })
                    .sum::<T>()
                    <= T::one()
            }
            NormIndex::Finite(e) => {
                let r = T::lit(e.value());
                sorted[..=k]
                    .iter()
                    .map(|&x| ((x - bk) / sigma).powf(r))
                    .sum::<T>()
                    <= T::one()
            }
        };
        if !within {
            break;
        }
        count = k + 1;
    }
    count
}
