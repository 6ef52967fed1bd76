use robust_mdp::{validate_mdp, MdpInstance, ValueFunction};

use crate::{OracleConfig, OracleError};

pub const VI_REFERENCE_MAX_ITERS: usize = 1_000_000;

/// Textbook value iteration `v <- max_a R + gamma P v` from zero, stopped
/// once the a posteriori error bound `gamma/(1-gamma) * residual` is below
/// `1e-11`.
pub fn vi_reference(
    inst: &MdpInstance<f64>,
    cfg: &OracleConfig,
) -> Result<ValueFunction<f64>, OracleError> {
    cfg.validate()?;
    validate_mdp(inst)?;
    let (ns, na) = (inst.num_states, inst.num_actions);
    let gamma = inst.gamma;
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    for _ in 0..VI_REFERENCE_MAX_ITERS {
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let mut total = inst.reward[s * na + a];
                for t in 0..ns {
                    total += gamma * inst.kernel[(s * na + a) * ns + t] * v[t];
                }
                if total > best {
                    best = total;
                }
            }
            next[s] = best;
        }
        let mut residual: f64 = 0.0;
        for s in 0..ns {
            residual = residual.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if gamma * residual <= 1e-11 * (1.0 - gamma) {
            return Ok(ValueFunction(v));
        }
    }
    Err(OracleError::NoConvergence { iterations: VI_REFERENCE_MAX_ITERS })
}
