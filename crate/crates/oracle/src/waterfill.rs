use robust_mdp::NormIndex;

use crate::{OracleConfig, OracleError};

/// Lattice enumeration grows as `(1/step)^(n-1)`.
pub const MAX_LATTICE_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct GridWaterFill {
    /// Best lattice value of `<c, b> - sigma ||c||_q`.
    pub value: f64,
    /// First lattice point attaining it.
    pub weights: Vec<f64>,
}

/// Maximize `<c, b> - sigma ||c||_q` over simplex points whose coordinates
/// are multiples of `1/N`, `N = round(1 / grid_step)`.
pub fn waterfill_grid(
    b: &[f64],
    sigma: f64,
    q: NormIndex,
    cfg: &OracleConfig,
) -> Result<GridWaterFill, OracleError> {
    cfg.validate()?;
    if b.is_empty() || b.len() > MAX_LATTICE_DIM {
        return Err(OracleError::DimensionTooLarge { max: MAX_LATTICE_DIM, got: b.len() });
    }
    let n = (1.0 / cfg.grid_step).round().max(1.0) as usize;
    let scale = 1.0 / n as f64;
    let norm = |c: &[f64]| -> f64 {
        match q {
            NormIndex::One => c.iter().map(|x| x.abs()).sum(),
            NormIndex::Two => c.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormIndex::Infinity => c.iter().fold(0.0, |m, x| m.max(x.abs())),
            NormIndex::Finite(e) => {
                let r = e.value();
                c.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r)
            }
        }
    };

    let dim = b.len();
    let mut counts = vec![0usize; dim];
    let mut c = vec![0.0; dim];
    let mut best = GridWaterFill { value: f64::NEG_INFINITY, weights: vec![0.0; dim] };
    // odometer over compositions of n into `dim` parts; the last part is implied
    loop {
        let used: usize = counts[..dim - 1].iter().sum();
        if used <= n {
            counts[dim - 1] = n - used;
            for (ci, &k) in c.iter_mut().zip(&counts) {
                *ci = k as f64 * scale;
            }
            let obj = c.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() - sigma * norm(&c);
            if obj > best.value {
                best.value = obj;
                best.weights.copy_from_slice(&c);
            }
        }
        let mut i = 0;
        loop {
            if i + 1 >= dim {
                return Ok(best);
            }
            counts[i] += 1;
            if counts[..dim - 1].iter().sum::<usize>() <= n {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}
