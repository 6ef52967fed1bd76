//! Robust Bellman operators evaluated through nominal values plus penalties.
//!
//! A [`BellmanContext`] is prepared once per value vector: it computes the
//! q-variance `kappa_q(v)` (`q` the Hölder conjugate of the uncertainty norm),
//! the penalties `sigma = alpha + gamma * beta * kappa_q(v)` and the nominal
//! Q-values. The operators then fan out over states without further shared
//! work.

use std::time::{Duration, Instant};

use crate::error::{MdpError, Result};
use crate::mdp::{MdpInstance, QFunction, StochasticPolicy, ValueFunction};
use crate::norm::NormIndex;
use crate::p_variance::{p_mean, p_variance_masked, PMeanResult};
use crate::parallel::map_states_with;
use crate::scalar::Scalar;
use crate::uncertainty::{Rectangularity, UncertaintySpec};
use crate::water_filling::{water_fill, water_fill_value, WaterFillResult, WaterFillScratch};

/// Wall-clock spent preparing a context.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrepTimings {
    pub kappa: Duration,
    pub q: Duration,
}

#[derive(Clone, Debug)]
pub struct BellmanContext<'a, T> {
    inst: &'a MdpInstance<T>,
    unc: &'a UncertaintySpec<T>,
    v: &'a [T],
    /// `kappa_q(v)` over all states; `None` when non-robust or masked.
    pub kappa: Option<PMeanResult<T>>,
    /// Per-state (`S`) or per-pair (`SA`) penalties.
    sigma: Vec<T>,
    q: QFunction<T>,
    tol: T,
    workers: usize,
    pub timings: PrepTimings,
}

impl<'a, T: Scalar> BellmanContext<'a, T> {
    /// Single-threaded preparation. `tol` bounds every bisection.
    pub fn prepare(
        inst: &'a MdpInstance<T>,
        unc: &'a UncertaintySpec<T>,
        v: &'a [T],
        tol: T,
    ) -> Result<Self> {
        Self::prepare_with_workers(inst, unc, v, tol, 1)
    }

    pub fn prepare_with_workers(
        inst: &'a MdpInstance<T>,
        unc: &'a UncertaintySpec<T>,
        v: &'a [T],
        tol: T,
        workers: usize,
    ) -> Result<Self> {
        inst.check_value_len(v)?;
        if !(tol > T::zero()) {
            return Err(MdpError::InvalidConfig("inner tolerance must be positive".into()));
        }
        let started = Instant::now();
        let (kappa, sigma) = penalties(inst, unc, v, tol)?;
        let kappa_time = started.elapsed();

        let started = Instant::now();
        let na = inst.num_actions;
        let rows = map_states_with(
            inst.num_states,
            workers,
            || (),
            |_, s| {
                let mut row = vec![T::zero(); na];
                inst.q_row_into(v, s, &mut row);
                row
            },
        );
        let q = QFunction {
            num_states: inst.num_states,
            num_actions: na,
            data: rows.concat(),
        };
        let q_time = started.elapsed();

        Ok(Self {
            inst,
            unc,
            v,
            kappa,
            sigma,
            q,
            tol,
            workers: workers.max(1),
            timings: PrepTimings {
                kappa: kappa_time,
                q: q_time,
            },
        })
    }

    pub fn instance(&self) -> &MdpInstance<T> {
        self.inst
    }

    pub fn uncertainty(&self) -> &UncertaintySpec<T> {
        self.unc
    }

    /// The value vector this context was prepared from.
    pub fn value(&self) -> &[T] {
        self.v
    }

    pub fn q(&self) -> &QFunction<T> {
        &self.q
    }

    /// Penalties: length `S` for `S`, `S*A` for `SA`, empty otherwise.
    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    fn require(&self, expected: Rectangularity) -> Result<()> {
        if self.unc.rect != expected {
            return Err(MdpError::RectangularityMismatch {
                expected,
                got: self.unc.rect,
            });
        }
        Ok(())
    }

    fn check_policy(&self, policy: &StochasticPolicy<T>) -> Result<()> {
        policy.check_shape(self.inst.num_states, self.inst.num_actions)
    }

    fn per_state<R: Send>(&self, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
        map_states_with(self.inst.num_states, self.workers, || (), |_, s| f(s))
    }

    /// `sum_a pi(a|s) Q(s,a)`.
    pub fn nonrobust_policy(&self, policy: &StochasticPolicy<T>) -> Result<ValueFunction<T>> {
        self.check_policy(policy)?;
        Ok(ValueFunction(self.per_state(|s| dot(policy.row(s), self.q.row(s)))))
    }

    /// `sum_a pi(a|s) [Q(s,a) - alpha_sa - gamma beta_sa kappa_q(v)]`.
    pub fn sa_policy(&self, policy: &StochasticPolicy<T>) -> Result<ValueFunction<T>> {
        self.require(Rectangularity::SA)?;
        self.check_policy(policy)?;
        let na = self.inst.num_actions;
        Ok(ValueFunction(self.per_state(|s| {
            let pen = &self.sigma[s * na..(s + 1) * na];
            policy
                .row(s)
                .iter()
                .zip(self.q.row(s))
                .zip(pen)
                .fold(T::zero(), |acc, ((&w, &q), &c)| acc + w * (q - c))
        })))
    }

    /// Best penalized action per state, with its index (ties to the lowest).
    pub fn sa_opt(&self) -> Result<(ValueFunction<T>, Vec<usize>)> {
        self.require(Rectangularity::SA)?;
        let na = self.inst.num_actions;
        let best: Vec<(T, usize)> = self.per_state(|s| {
            let pen = &self.sigma[s * na..(s + 1) * na];
            argmax(self.q.row(s).iter().zip(pen).map(|(&q, &c)| q - c))
        });
        Ok(unzip_best(best))
    }

    /// `-sigma(s) ||pi_s||_q + sum_a pi(a|s) Q(s,a)`.
    pub fn s_policy(&self, policy: &StochasticPolicy<T>) -> Result<ValueFunction<T>> {
        self.require(Rectangularity::S)?;
        self.check_policy(policy)?;
        let q_norm = self.unc.p.conjugate();
        Ok(ValueFunction(self.per_state(|s| {
            let row = policy.row(s);
            dot(row, self.q.row(s)) - self.sigma[s] * q_norm.norm(row)
        })))
    }

    /// Water-filling level per state, with the full per-state solution.
    pub fn s_opt(&self) -> Result<(ValueFunction<T>, Vec<WaterFillResult<T>>)> {
        self.require(Rectangularity::S)?;
        let p = self.unc.p;
        let fills = self.per_state(|s| water_fill(self.q.row(s), self.sigma[s], p, self.tol));
        let v = fills.iter().map(|f| f.zeta).collect();
        Ok((ValueFunction(v), fills))
    }

    /// `max_a [Q(s,a) + alpha_sa + gamma beta_sa kappa_q(v)]`.
    pub fn optimistic_sa(&self) -> Result<ValueFunction<T>> {
        self.require(Rectangularity::SA)?;
        let na = self.inst.num_actions;
        Ok(ValueFunction(self.per_state(|s| {
            let pen = &self.sigma[s * na..(s + 1) * na];
            argmax(self.q.row(s).iter().zip(pen).map(|(&q, &c)| q + c)).0
        })))
    }

    /// `max_a Q(s,a) + sigma(s)`: the bonus `sigma ||pi_s||_q` peaks at a
    /// one-hot policy, where the q-norm is 1.
    pub fn optimistic_s(&self) -> Result<ValueFunction<T>> {
        self.require(Rectangularity::S)?;
        Ok(ValueFunction(self.per_state(|s| {
            argmax(self.q.row(s).iter().copied()).0 + self.sigma[s]
        })))
    }

    /// Robust policy evaluation step for whatever rectangularity the context
    /// carries.
    pub fn policy_step(&self, policy: &StochasticPolicy<T>) -> Result<ValueFunction<T>> {
        match self.unc.rect {
            Rectangularity::NonRobust => self.nonrobust_policy(policy),
            Rectangularity::SA => self.sa_policy(policy),
            Rectangularity::S => self.s_policy(policy),
        }
    }

    /// Optimal robust Bellman image and the active-action count per state,
    /// without materializing policies.
    pub fn optimal_step(&self) -> (ValueFunction<T>, Vec<usize>) {
        let na = self.inst.num_actions;
        let out: Vec<(T, usize)> = match self.unc.rect {
            Rectangularity::NonRobust => {
                self.per_state(|s| (argmax(self.q.row(s).iter().copied()).0, 1))
            }
            Rectangularity::SA => self.per_state(|s| {
                let pen = &self.sigma[s * na..(s + 1) * na];
                (argmax(self.q.row(s).iter().zip(pen).map(|(&q, &c)| q - c)).0, 1)
            }),
            Rectangularity::S => {
                let p = self.unc.p;
                map_states_with(
                    self.inst.num_states,
                    self.workers,
                    WaterFillScratch::new,
                    |scratch, s| water_fill_value(self.q.row(s), self.sigma[s], p, self.tol, scratch),
                )
            }
        };
        let (v, chi) = out.into_iter().unzip();
        (ValueFunction(v), chi)
    }
}

/// `(T* v)(s) = max_a Q(s,a)` for the nominal model.
pub fn bellman_opt_nonrobust<T: Scalar>(
    inst: &MdpInstance<T>,
    v: &[T],
) -> Result<ValueFunction<T>> {
    inst.check_value_len(v)?;
    let mut row = vec![T::zero(); inst.num_actions];
    let out = (0..inst.num_states)
        .map(|s| {
            inst.q_row_into(v, s, &mut row);
            argmax(row.iter().copied()).0
        })
        .collect();
    Ok(ValueFunction(out))
}

/// `kappa_q(v)` and the penalty vector for the given uncertainty.
fn penalties<T: Scalar>(
    inst: &MdpInstance<T>,
    unc: &UncertaintySpec<T>,
    v: &[T],
    tol: T,
) -> Result<(Option<PMeanResult<T>>, Vec<T>)> {
    let (ns, na) = (inst.num_states, inst.num_actions);
    let q_norm: NormIndex = unc.p.conjugate();
    let gamma = inst.gamma;
    let count = match unc.rect {
        Rectangularity::NonRobust => return Ok((None, Vec::new())),
        Rectangularity::SA => ns * na,
        Rectangularity::S => ns,
    };
    if unc.alpha.len() != count || unc.beta.len() != count {
        return Err(MdpError::DimensionMismatch {
            what: "radii",
            expected: count,
            got: unc.alpha.len().min(unc.beta.len()),
        });
    }
    let combine = |i: usize, kappa: T| unc.alpha[i] + gamma * unc.beta[i] * kappa;
    match &unc.forbidden {
        None => {
            let kappa = p_mean(v, q_norm, tol)?;
            let sigma = (0..count).map(|i| combine(i, kappa.kappa)).collect();
            Ok((Some(kappa), sigma))
        }
        Some(_) => {
            let mut sigma = Vec::with_capacity(count);
            for i in 0..count {
                let (s, a) = match unc.rect {
                    Rectangularity::SA => (i / na, i % na),
                    _ => (i, 0),
                };
                let allowed = unc
                    .allowed_next(ns, na, s, a)
                    .expect("mask present for robust spec");
                let kappa = p_variance_masked(v, &allowed, q_norm, tol)?;
                sigma.push(combine(i, kappa.kappa));
            }
            Ok((None, sigma))
        }
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Largest value and its first index.
#[inline]
pub(crate) fn argmax<T: Scalar>(values: impl Iterator<Item = T>) -> (T, usize) {
    let mut best = (T::neg_infinity(), 0);
    for (i, x) in values.enumerate() {
        if x > best.0 {
            best = (x, i);
        }
    }
    best
}

fn unzip_best<T: Scalar>(best: Vec<(T, usize)>) -> (ValueFunction<T>, Vec<usize>) {
    let (v, a) = best.into_iter().unzip();
    (ValueFunction(v), a)
}
