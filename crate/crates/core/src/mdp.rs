//! Nominal MDP data model, validation and random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{MdpError, Result};
use crate::scalar::Scalar;

/// Discount used by [`random_instance`] unless overridden.
pub const DEFAULT_DISCOUNT: f64 = 0.9;

/// Nominal model `(S, A, P0, R0, gamma, mu)` with dense storage.
///
/// `kernel` is laid out `[s][a][s']`, `reward` is `[s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpInstance<T> {
    pub num_states: usize,
    pub num_actions: usize,
    pub kernel: Vec<T>,
    pub reward: Vec<T>,
    pub gamma: T,
    pub initial_dist: Vec<T>,
}

impl<T: Scalar> MdpInstance<T> {
    /// Build and validate. `initial_dist` defaults to uniform.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        kernel: Vec<T>,
        reward: Vec<T>,
        gamma: T,
        initial_dist: Option<Vec<T>>,
    ) -> Result<Self> {
        let initial_dist = initial_dist.unwrap_or_else(|| {
            vec![T::one() / T::from_usize_lossy(num_states.max(1)); num_states]
        });
        let inst = Self {
            num_states,
            num_actions,
            kernel,
            reward,
            gamma,
            initial_dist,
        };
        validate_mdp(&inst)?;
        Ok(inst)
    }

    pub fn with_discount(mut self, gamma: T) -> Result<Self> {
        self.gamma = gamma;
        validate_mdp(&self)?;
        Ok(self)
    }

    #[inline]
    pub fn kernel_row(&self, s: usize, a: usize) -> &[T] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &self.kernel[start..start + n]
    }

    #[inline]
    pub fn reward_at(&self, s: usize, a: usize) -> T {
        self.reward[s * self.num_actions + a]
    }

    /// `Q(s, .)` written into `out` (length `A`).
    #[inline]
    pub fn q_row_into(&self, v: &[T], s: usize, out: &mut [T]) {
        for (a, q) in out.iter_mut().enumerate() {
            let ev: T = self
                .kernel_row(s, a)
                .iter()
                .zip(v)
                .fold(T::zero(), |acc, (&p, &x)| acc + p * x);
            *q = self.reward_at(s, a) + self.gamma * ev;
        }
    }

    /// Check that `v` has one entry per state.
    pub fn check_value_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.num_states {
            return Err(MdpError::DimensionMismatch {
                what: "value function",
                expected: self.num_states,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Returns normally iff every structural and stochastic invariant of the
/// instance holds.
pub fn validate_mdp<T: Scalar>(inst: &MdpInstance<T>) -> Result<()> {
    let (ns, na) = (inst.num_states, inst.num_actions);
    if ns == 0 {
        return Err(MdpError::DimensionMismatch {
            what: "num_states",
            expected: 1,
            got: 0,
        });
    }
    if na == 0 {
        return Err(MdpError::DimensionMismatch {
            what: "num_actions",
            expected: 1,
            got: 0,
        });
    }
    check_len("kernel", ns * na * ns, inst.kernel.len())?;
    check_len("reward", ns * na, inst.reward.len())?;
    check_len("initial_dist", ns, inst.initial_dist.len())?;

    let g = inst.gamma;
    if !(g >= T::zero() && g < T::one()) {
        return Err(MdpError::DiscountOutOfRange(g.to_f64_lossy()));
    }
    if inst.reward.iter().any(|r| !r.is_finite()) {
        return Err(MdpError::NonFinite("reward"));
    }

    let tol = T::stochastic_tol();
    for s in 0..ns {
        for a in 0..na {
            let row = inst.kernel_row(s, a);
            let sum: T = row.iter().copied().sum();
            let bad_entry = row.iter().any(|&p| !(p >= T::zero()) || !p.is_finite());
            if bad_entry || !((sum - T::one()).abs() <= tol) {
                return Err(MdpError::NonStochasticRow {
                    state: s,
                    action: a,
                    sum: sum.to_f64_lossy(),
                });
            }
        }
    }

    let mu_sum: T = inst.initial_dist.iter().copied().sum();
    if inst.initial_dist.iter().any(|&m| !(m >= T::zero())) || !((mu_sum - T::one()).abs() <= tol)
    {
        return Err(MdpError::NonStochasticInitial {
            sum: mu_sum.to_f64_lossy(),
        });
    }
    Ok(())
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(MdpError::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Length-`S` value vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction<T>(pub Vec<T>);

impl<T: Scalar> ValueFunction<T> {
    pub fn zeros(num_states: usize) -> Self {
        Self(vec![T::zero(); num_states])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `max_s |self(s) - other(s)|`.
    pub fn sup_distance(&self, other: &Self) -> T {
        sup_distance(&self.0, &other.0)
    }
}

pub(crate) fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Dense `S x A` matrix, row-major by state.
#[derive(Clone, Debug, PartialEq)]
pub struct QFunction<T> {
    pub num_states: usize,
    pub num_actions: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> QFunction<T> {
    #[inline]
    pub fn get(&self, s: usize, a: usize) -> T {
        self.data[s * self.num_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[T] {
        &self.data[s * self.num_actions..(s + 1) * self.num_actions]
    }
}

/// Row-stochastic `S x A` matrix `pi(a|s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPolicy<T> {
    num_states: usize,
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> StochasticPolicy<T> {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<T>) -> Result<Self> {
        check_len("policy", num_states * num_actions, probs.len())?;
        let tol = T::stochastic_tol();
        for s in 0..num_states {
            let row = &probs[s * num_actions..(s + 1) * num_actions];
            let sum: T = row.iter().copied().sum();
            if row.iter().any(|&x| !(x >= T::zero())) || !((sum - T::one()).abs() <= tol) {
                return Err(MdpError::NonStochasticPolicy {
                    state: s,
                    sum: sum.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    /// Deterministic policy playing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![T::zero(); actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = T::one();
        }
        Self {
            num_states: actions.len(),
            num_actions,
            probs,
        }
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let w = T::one() / T::from_usize_lossy(num_actions);
        Self {
            num_states,
            num_actions,
            probs: vec![w; num_states * num_actions],
        }
    }

    /// Rows given as normalized weights; callers guarantee stochasticity.
    pub(crate) fn from_rows_unchecked(num_states: usize, num_actions: usize, probs: Vec<T>) -> Self {
        debug_assert_eq!(probs.len(), num_states * num_actions);
        Self {
            num_states,
            num_actions,
            probs,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[T] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    /// Number of actions with strictly positive probability in state `s`.
    pub fn support_size(&self, s: usize) -> usize {
        self.row(s).iter().filter(|&&x| x > T::zero()).count()
    }

    pub(crate) fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        check_len("policy states", num_states, self.num_states)?;
        check_len("policy actions", num_actions, self.num_actions)
    }
}

/// `Q(s,a) = R0(s,a) + gamma * sum_s' P0(s'|s,a) v(s')`.
pub fn q_from_value<T: Scalar>(inst: &MdpInstance<T>, v: &[T]) -> Result<QFunction<T>> {
    inst.check_value_len(v)?;
    let na = inst.num_actions;
    let mut data = vec![T::zero(); inst.num_states * na];
    for (s, row) in data.chunks_mut(na).enumerate() {
        inst.q_row_into(v, s, row);
    }
    Ok(QFunction {
        num_states: inst.num_states,
        num_actions: na,
        data,
    })
}

/// Random instance: Dirichlet(1, ..., 1) kernel rows, rewards uniform on
/// `[0, reward_scale]`, discount [`DEFAULT_DISCOUNT`]. Deterministic in `seed`.
pub fn random_instance<T: Scalar>(
    num_states: usize,
    num_actions: usize,
    seed: u64,
    reward_scale: f64,
) -> Result<MdpInstance<T>> {
    if num_states == 0 || num_actions == 0 {
        return Err(MdpError::InvalidConfig(
            "random instance needs S >= 1 and A >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel = Vec::with_capacity(num_states * num_actions * num_states);
    let mut row = vec![0.0f64; num_states];
    for _ in 0..num_states * num_actions {
        // Normalized unit exponentials are a flat Dirichlet draw.
        for x in row.iter_mut() {
            *x = rng.sample::<f64, _>(Exp1);
        }
        let total: f64 = row.iter().sum();
        kernel.extend(row.iter().map(|x| T::lit(x / total)));
    }
    let reward = (0..num_states * num_actions)
        .map(|_| T::lit(rng.random::<f64>() * reward_scale))
        .collect();
    MdpInstance::new(
        num_states,
        num_actions,
        kernel,
        reward,
        T::lit(DEFAULT_DISCOUNT),
        None,
    )
}
