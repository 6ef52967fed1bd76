use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use robust_mdp::{
    validate_mdp, MdpError, MdpInstance, NormIndex, Rectangularity, StochasticPolicy,
    UncertaintySpec,
};

use crate::{OracleConfig, OracleError};

/// Upper bound on `min_{(R,P) in U} sum_a pi(a|s) [R(s,a) + gamma <P(.|s,a), v>]`
/// from feasible noise only.
///
/// Noise blocks (rewards, then kernels) are independent, so each block is
/// minimized on its own with `noise_samples` evaluations: half random
/// feasible draws, half a (1+1) evolution strategy from the best draw. Every
/// candidate is zeroed on forbidden entries, shifted to sum zero per kernel
/// row and shrunk into the Lp ball.
pub fn inner_min_sampled(
    inst: &MdpInstance<f64>,
    unc: &UncertaintySpec<f64>,
    policy: &StochasticPolicy<f64>,
    v: &[f64],
    s: usize,
    cfg: &OracleConfig,
) -> Result<f64, OracleError> {
    cfg.validate()?;
    validate_mdp(inst)?;
    unc.validate(inst)?;
    let (ns, na) = (inst.num_states, inst.num_actions);
    if v.len() != ns {
        return Err(MdpError::DimensionMismatch { what: "value", expected: ns, got: v.len() }.into());
    }
    if s >= ns {
        return Err(MdpError::DimensionMismatch { what: "state", expected: ns, got: s }.into());
    }
    if policy.num_states() != ns || policy.num_actions() != na {
        return Err(MdpError::DimensionMismatch {
            what: "policy",
            expected: ns * na,
            got: policy.num_states() * policy.num_actions(),
        }
        .into());
    }
    let pi = policy.row(s);
    let gamma = inst.gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(s as u64));
    let budget = cfg.noise_samples;

    // reward noise r[a], kernel noise k[a][s']
    let mut r = vec![0.0; na];
    let mut k = vec![0.0; na * ns];
    match unc.rect {
        Rectangularity::NonRobust => {}
        Rectangularity::SA => {
            for a in 0..na {
                let i = s * na + a;
                let reward = Block { p: unc.p, radius: unc.alpha[i], groups: 0, width: 1 };
                r[a] = reward.minimize(&[pi[a]], &[true], budget, &mut rng)[0];
                let mask = allowed(unc, ns, na, s, a);
                let c: Vec<f64> = v.iter().map(|x| gamma * pi[a] * x).collect();
                let kernel = Block { p: unc.p, radius: unc.beta[i], groups: 1, width: ns };
                let x = kernel.minimize(&c, &mask, budget, &mut rng);
                k[a * ns..(a + 1) * ns].copy_from_slice(&x);
            }
        }
        Rectangularity::S => {
            let reward = Block { p: unc.p, radius: unc.alpha[s], groups: 0, width: na };
            r = reward.minimize(pi, &vec![true; na], budget, &mut rng);
            let row_mask = allowed(unc, ns, na, s, 0);
            let mask: Vec<bool> = (0..na).flat_map(|_| row_mask.iter().copied()).collect();
            let c: Vec<f64> = (0..na)
                .flat_map(|a| v.iter().map(move |x| gamma * pi[a] * x))
                .collect();
            let kernel = Block { p: unc.p, radius: unc.beta[s], groups: na, width: ns };
            k = kernel.minimize(&c, &mask, budget, &mut rng);
        }
    }

    let mut total = 0.0;
    for a in 0..na {
        let mut next = 0.0;
        for t in 0..ns {
            next += (inst.kernel[(s * na + a) * ns + t] + k[a * ns + t]) * v[t];
        }
        total += pi[a] * (inst.reward[s * na + a] + r[a] + gamma * next);
    }
    Ok(total)
}

fn allowed(unc: &UncertaintySpec<f64>, ns: usize, na: usize, s: usize, a: usize) -> Vec<bool> {
    unc.allowed_next(ns, na, s, a).unwrap_or_else(|| vec![true; ns])
}

/// `{x : ||x||_p <= radius, x = 0 off-mask, each of `groups` consecutive
/// runs of `width` entries sums to zero}`; `groups = 0` means no sum
/// constraint.
struct Block {
    p: NormIndex,
    radius: f64,
    groups: usize,
    width: usize,
}

impl Block {
    fn norm(&self, x: &[f64]) -> f64 {
        match self.p {
            NormIndex::One => x.iter().map(|y| y.abs()).sum(),
            NormIndex::Two => x.iter().map(|y| y * y).sum::<f64>().sqrt(),
            NormIndex::Infinity => x.iter().fold(0.0, |m, y| m.max(y.abs())),
            NormIndex::Finite(e) => {
                let r = e.value();
                x.iter().map(|y| y.abs().powf(r)).sum::<f64>().powf(1.0 / r)
            }
        }
    }

    fn project(&self, x: &mut [f64], mask: &[bool]) {
        for (y, &m) in x.iter_mut().zip(mask) {
            if !m {
                *y = 0.0;
            }
        }
        for g in 0..self.groups {
            let range = g * self.width..(g + 1) * self.width;
            let free = mask[range.clone()].iter().filter(|&&m| m).count();
            if free == 0 {
                continue;
            }
            let mean = x[range.clone()].iter().sum::<f64>() / free as f64;
            for (y, &m) in x[range.clone()].iter_mut().zip(&mask[range]) {
                if m {
                    *y -= mean;
                }
            }
        }
    }

    /// Shrink onto the ball if outside; `false` for the zero vector.
    fn clip(&self, x: &mut [f64]) -> bool {
        let n = self.norm(x);
        if !(n > 0.0) {
            return false;
        }
        if n > self.radius {
            let f = self.radius / n;
            x.iter_mut().for_each(|y| *y *= f);
        }
        true
    }

    fn minimize(&self, c: &[f64], mask: &[bool], budget: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let dim = c.len();
        let mut best = vec![0.0; dim];
        if !(self.radius > 0.0) {
            return best;
        }
        let obj = |x: &[f64]| x.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        let mut best_val = 0.0;
        let mut x = vec![0.0; dim];
        let draws = budget.div_ceil(2);
        for _ in 0..draws {
            x.iter_mut().for_each(|y| *y = rng.sample(StandardNormal));
            self.project(&mut x, mask);
            let n = self.norm(&x);
            if !(n > 0.0) {
                continue;
            }
            let target = if rng.random::<bool>() { self.radius } else { self.radius * rng.random::<f64>() };
            let f = target / n;
            x.iter_mut().for_each(|y| *y *= f);
            self.clip(&mut x);
            let val = obj(&x);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&x);
            }
        }

        let mut step = 0.3 * self.radius;
        let mut trial = vec![0.0; dim];
        for _ in draws..budget {
            for (t, b) in trial.iter_mut().zip(&best) {
                *t = b + step * rng.sample::<f64, _>(StandardNormal);
            }
            self.project(&mut trial, mask);
            if !self.clip(&mut trial) {
                continue;
            }
            let val = obj(&trial);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&trial);
                step *= 1.5;
            } else {
                step = (step * 0.9).max(1e-12 * self.radius);
            }
        }
        best
    }
}
