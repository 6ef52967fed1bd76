use robust_mdp::NormIndex;

use crate::OracleConfig;

const CHUNK: usize = 512;

/// `min ||v - w 1||_p` over `w` on the grid `min v, min v + step, ..., max v`
/// (the right endpoint is always included).
///
/// # Panics
/// On empty `v` or an invalid `cfg`.
pub fn kappa_grid(v: &[f64], p: NormIndex, cfg: &OracleConfig) -> f64 {
    assert!(!v.is_empty(), "kappa_grid needs a nonempty vector");
    cfg.validate().expect("invalid oracle config");
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = cfg.grid_step;
    let n = ((hi - lo) / step).floor() as usize + 1;
    let omega = |k: usize| if k >= n { hi } else { lo + k as f64 * step };
    let total = n + 1;
    match p {
        NormIndex::One => scan(v, total, omega, |d| d, false),
        NormIndex::Two => scan(v, total, omega, |d| d * d, false).sqrt(),
        NormIndex::Infinity => scan(v, total, omega, |d| d, true),
        NormIndex::Finite(e) => {
            let r = e.value();
            let m = if r == 1.5 {
                scan(v, total, omega, |d| d * d.sqrt(), false)
            } else if r == 3.0 {
                scan(v, total, omega, |d| d * d * d, false)
            } else if r == 4.0 {
                scan(v, total, omega, |d| (d * d) * (d * d), false)
            } else {
                scan(v, total, omega, |d| d.powf(r), false)
            };
            m.powf(1.0 / r)
        }
    }
}

/// Smallest `sum_i f(|v_i - w|)` (or `max_i` when `use_max`) over the grid,
/// using AVX2 when the CPU has it.
fn scan(
    v: &[f64],
    total: usize,
    omega: impl Fn(usize) -> f64,
    f: impl Fn(f64) -> f64,
    use_max: bool,
) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was detected at runtime.
        return unsafe { scan_avx2(v, total, omega, f, use_max) };
    }
    scan_generic(v, total, omega, f, use_max)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn scan_avx2(
    v: &[f64],
    total: usize,
    omega: impl Fn(usize) -> f64,
    f: impl Fn(f64) -> f64,
    use_max: bool,
) -> f64 {
    scan_generic(v, total, omega, f, use_max)
}

#[inline(always)]
fn scan_generic(
    v: &[f64],
    total: usize,
    omega: impl Fn(usize) -> f64,
    f: impl Fn(f64) -> f64,
    use_max: bool,
) -> f64 {
    let mut best = f64::INFINITY;
    let mut grid = [0.0f64; CHUNK];
    let mut acc = [0.0f64; CHUNK];
    let mut base = 0;
    while base < total {
        let m = CHUNK.min(total - base);
        for (j, w) in grid[..m].iter_mut().enumerate() {
            *w = omega(base + j);
        }
        acc[..m].fill(0.0);
        for &x in v {
            if use_max {
                for (a, &w) in acc[..m].iter_mut().zip(&grid[..m]) {
                    *a = f64::max(*a, f((x - w).abs()));
                }
            } else {
                for (a, &w) in acc[..m].iter_mut().zip(&grid[..m]) {
                    *a += f((x - w).abs());
                }
            }
        }
        best = acc[..m].iter().copied().fold(best, f64::min);
        base += m;
    }
    best
}
