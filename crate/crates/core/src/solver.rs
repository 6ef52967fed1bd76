//! Fixed-point drivers: robust value iteration, sa-rectangular Q-value
//! iteration, robust policy evaluation and optimal policy extraction.

use std::time::{Duration, Instant};

use crate::bellman::{argmax, BellmanContext};
use crate::error::{MdpError, Result};
use crate::mdp::{sup_distance, validate_mdp, MdpInstance, StochasticPolicy, ValueFunction};
use crate::norm::NormIndex;
use crate::parallel::threads_from_env;
use crate::scalar::Scalar;
use crate::uncertainty::{Rectangularity, UncertaintySpec};

#[derive(Clone, Debug)]
pub struct SolveConfig<T> {
    /// Target sup-norm distance to the fixed point.
    pub epsilon: T,
    pub max_iters: usize,
    /// Bisection width for kappa and water-filling roots. `None` derives
    /// `(1 - gamma) * epsilon / 6` from the instance.
    pub inner_tol: Option<T>,
    pub record_residuals: bool,
    /// Threads for per-state work within a sweep.
    pub workers: usize,
}

impl<T: Scalar> Default for SolveConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(1e-6),
            max_iters: 10_000,
            inner_tol: None,
            record_residuals: true,
            workers: threads_from_env(),
        }
    }
}

impl<T: Scalar> SolveConfig<T> {
    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_inner_tol(mut self, tol: T) -> Self {
        self.inner_tol = Some(tol);
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_workers(mut self, n: usize) -> Self {
        self.workers = n.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(MdpError::InvalidConfig("epsilon must be positive".into()));
        }
        if let Some(t) = self.inner_tol {
            if !(t > T::zero()) {
                return Err(MdpError::InvalidConfig("inner_tol must be positive".into()));
            }
        }
        if self.max_iters == 0 {
            return Err(MdpError::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Bisection width actually used for `gamma`.
    pub fn effective_inner_tol(&self, gamma: T) -> T {
        self.inner_tol.unwrap_or_else(|| {
            let derived = (T::one() - gamma) * self.epsilon / T::lit(6.0);
            derived.max(T::epsilon() * T::lit(16.0))
        })
    }

    /// Residual below which `||v_{n+1} - v*|| <= epsilon / 2`.
    pub fn stopping_residual(&self, gamma: T) -> T {
        if gamma > T::zero() {
            self.epsilon * (T::one() - gamma) / (T::lit(2.0) * gamma)
        } else {
            T::infinity()
        }
    }
}

/// Accumulated wall-clock per sweep phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub kappa: Duration,
    pub q: Duration,
    pub regularize: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.kappa + self.q + self.regularize
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub value: ValueFunction<T>,
    pub policy: StochasticPolicy<T>,
    pub iterations: usize,
    /// `||v_{n+1} - v_n||_inf` per iteration (empty unless recorded).
    pub residuals: Vec<T>,
    pub final_residual: T,
    /// Actions with nonnegative advantage at the returned value.
    pub chi_per_state: Vec<usize>,
    pub timings: PhaseTimings,
    pub converged: bool,
}

/// One optimal robust Bellman sweep, with phase timings.
pub fn bellman_sweep<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    v: &[T],
    tol: T,
    workers: usize,
) -> Result<(ValueFunction<T>, Vec<usize>, PhaseTimings)> {
    let ctx = BellmanContext::prepare_with_workers(inst, unc, v, tol, workers)?;
    let started = Instant::now();
    let (next, chi) = ctx.optimal_step();
    let timings = PhaseTimings {
        kappa: ctx.timings.kappa,
        q: ctx.timings.q,
        regularize: started.elapsed(),
    };
    Ok((next, chi, timings))
}

fn check_inputs<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    cfg: &SolveConfig<T>,
) -> Result<()> {
    validate_mdp(inst)?;
    unc.validate(inst)?;
    unc.warn_large_beta(inst);
    cfg.validate()
}

/// Robust value iteration `v_{n+1} = T* v_n` from `v_0 = 0`.
pub fn value_iteration<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveReport<T>> {
    check_inputs(inst, unc, cfg)?;
    let tol = cfg.effective_inner_tol(inst.gamma);
    let stop = cfg.stopping_residual(inst.gamma);

    let mut v = ValueFunction::zeros(inst.num_states);
    let mut residuals = Vec::new();
    let mut timings = PhaseTimings::default();
    let mut residual = T::infinity();
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let (next, _, t) = bellman_sweep(inst, unc, &v.0, tol, cfg.workers)?;
        accumulate(&mut timings, &t);
        residual = next.sup_distance(&v);
        v = next;
        iterations += 1;
        if cfg.record_residuals {
            residuals.push(residual);
        }
        if residual <= stop {
            break;
        }
    }
    if !(residual <= stop) {
        return Err(MdpError::NoConvergence {
            iterations,
            residual: residual.to_f64_lossy(),
        });
    }
    let (policy, chi_per_state) = extract_policy_with_chi(inst, unc, &v.0, tol)?;
    Ok(SolveReport {
        value: v,
        policy,
        iterations,
        residuals,
        final_residual: residual,
        chi_per_state,
        timings,
        converged: true,
    })
}

/// `Q_{n+1}(s,a) = R0 - alpha_sa - gamma beta_sa kappa_q(v_n) + gamma P0 v_n`
/// with `v_n(s) = max_a Q_n(s,a)`, from `Q_0 = 0`. Stops on the sup-norm
/// change of `Q`.
pub fn q_value_iteration_sa<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveReport<T>> {
    if unc.rect == Rectangularity::S {
        return Err(MdpError::RectangularityMismatch {
            expected: Rectangularity::SA,
            got: unc.rect,
        });
    }
    check_inputs(inst, unc, cfg)?;
    let tol = cfg.effective_inner_tol(inst.gamma);
    let stop = cfg.stopping_residual(inst.gamma);
    let (ns, na) = (inst.num_states, inst.num_actions);

    let mut q = vec![T::zero(); ns * na];
    let mut v = vec![T::zero(); ns];
    let mut residuals = Vec::new();
    let mut timings = PhaseTimings::default();
    let mut residual = T::infinity();
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let ctx = BellmanContext::prepare_with_workers(inst, unc, &v, tol, cfg.workers)?;
        let started = Instant::now();
        let sigma = ctx.sigma();
        let next: Vec<T> = ctx
            .q()
            .data
            .iter()
            .enumerate()
            .map(|(i, &x)| if sigma.is_empty() { x } else { x - sigma[i] })
            .collect();
        residual = sup_distance(&next, &q);
        accumulate(
            &mut timings,
            &PhaseTimings {
                kappa: ctx.timings.kappa,
                q: ctx.timings.q,
                regularize: started.elapsed(),
            },
        );
        q = next;
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = argmax(q[s * na..(s + 1) * na].iter().copied()).0;
        }
        iterations += 1;
        if cfg.record_residuals {
            residuals.push(residual);
        }
        if residual <= stop {
            break;
        }
    }
    if !(residual <= stop) {
        return Err(MdpError::NoConvergence {
            iterations,
            residual: residual.to_f64_lossy(),
        });
    }
    let actions: Vec<usize> = (0..ns)
        .map(|s| argmax(q[s * na..(s + 1) * na].iter().copied()).1)
        .collect();
    Ok(SolveReport {
        value: ValueFunction(v),
        policy: StochasticPolicy::deterministic(na, &actions),
        iterations,
        residuals,
        final_residual: residual,
        chi_per_state: vec![1; ns],
        timings,
        converged: true,
    })
}

#[derive(Clone, Debug)]
pub struct PolicyEvaluation<T> {
    pub value: ValueFunction<T>,
    pub iterations: usize,
    pub final_residual: T,
}

/// Robust value of a fixed policy: the fixed point of `T^pi`.
pub fn evaluate_policy<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    policy: &StochasticPolicy<T>,
    cfg: &SolveConfig<T>,
) -> Result<PolicyEvaluation<T>> {
    check_inputs(inst, unc, cfg)?;
    policy.check_shape(inst.num_states, inst.num_actions)?;
    let tol = cfg.effective_inner_tol(inst.gamma);
    let stop = cfg.stopping_residual(inst.gamma);
    let mut v = ValueFunction::zeros(inst.num_states);
    let mut residual = T::infinity();
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let ctx = BellmanContext::prepare_with_workers(inst, unc, &v.0, tol, cfg.workers)?;
        let next = ctx.policy_step(policy)?;
        residual = next.sup_distance(&v);
        v = next;
        iterations += 1;
        if residual <= stop {
            return Ok(PolicyEvaluation {
                value: v,
                iterations,
                final_residual: residual,
            });
        }
    }
    Err(MdpError::NoConvergence {
        iterations,
        residual: residual.to_f64_lossy(),
    })
}

/// Optimal robust policy read off an (approximate) optimal value.
///
/// Non-robust and sa-rectangular sets give the one-hot best (penalized)
/// action. s-rectangular sets give the threshold policy: uniform over the
/// active actions for `p = 1`, weights `(Q(s,a) - zeta)^(p-1)` on actions
/// above the water level `zeta` for `1 < p < inf`, the best action for
/// `p = inf`.
pub fn extract_policy<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    v_star: &[T],
    tol: T,
) -> Result<StochasticPolicy<T>> {
    extract_policy_with_chi(inst, unc, v_star, tol).map(|(p, _)| p)
}

/// [`extract_policy`] plus the per-state active-action count.
pub fn extract_policy_with_chi<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    v_star: &[T],
    tol: T,
) -> Result<(StochasticPolicy<T>, Vec<usize>)> {
    let ctx = BellmanContext::prepare(inst, unc, v_star, tol)?;
    let (ns, na) = (inst.num_states, inst.num_actions);
    match unc.rect {
        Rectangularity::NonRobust => {
            let actions: Vec<usize> = (0..ns)
                .map(|s| argmax(ctx.q().row(s).iter().copied()).1)
                .collect();
            Ok((StochasticPolicy::deterministic(na, &actions), vec![1; ns]))
        }
        Rectangularity::SA => {
            let (_, actions) = ctx.sa_opt()?;
            Ok((StochasticPolicy::deterministic(na, &actions), vec![1; ns]))
        }
        Rectangularity::S => {
            let (_, fills) = ctx.s_opt()?;
            let mut probs = Vec::with_capacity(ns * na);
            let mut chi = Vec::with_capacity(ns);
            for (s, fill) in fills.into_iter().enumerate() {
                let mut w = fill.weights;
                if matches!(unc.p, NormIndex::Two | NormIndex::Finite(_)) {
                    clamp_small_advantages(&mut w, ctx.q().row(s), fill.zeta, tol);
                }
                probs.extend(w);
                chi.push(fill.chi);
            }
            Ok((StochasticPolicy::from_rows_unchecked(ns, na, probs), chi))
        }
    }
}

/// Zero the weight of actions whose advantage is within `tol` of zero and
/// renormalize, unless that would empty the row.
fn clamp_small_advantages<T: Scalar>(w: &mut [T], q: &[T], zeta: T, tol: T) {
    let keep: Vec<bool> = q.iter().map(|&x| x - zeta > tol).collect();
    let total: T = w
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&x, _)| x)
        .sum();
    if total > T::zero() {
        for (x, &k) in w.iter_mut().zip(&keep) {
            *x = if k { *x / total } else { T::zero() };
        }
    }
}

fn accumulate(into: &mut PhaseTimings, t: &PhaseTimings) {
    into.kappa += t.kappa;
    into.q += t.q;
    into.regularize += t.regularize;
}

/// Geometric decay rate of the last `window` residuals, from a least-squares
/// fit of `ln r_n` against `n`. `None` with fewer than two positive residuals.
pub fn residual_ratio<T: Scalar>(residuals: &[T], window: usize) -> Option<f64> {
    let start = residuals.len().saturating_sub(window);
    let pts: Vec<(f64, f64)> = residuals[start..]
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > T::zero())
        .map(|(i, r)| (i as f64, r.to_f64_lossy().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some((sxy / sxx).exp())
}
