//! Randomized sweeps comparing the fast kernels against the brute-force
//! oracles.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use robust_mdp::{
    holder_conjugate, p_mean, random_instance, value_iteration, water_fill, BellmanContext, Mdp,
    NormIndex, Policy, Rectangularity, SolveConfig, Uncertainty,
};
use robust_mdp_oracle::{inner_min_sampled, kappa_grid, vi_reference, waterfill_grid, OracleConfig};

use crate::{CliError, Result};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub param: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
}

impl CheckRow {
    fn new(check: &str, param: String, cases: usize, max_error: f64, tolerance: f64, started: Instant) -> Self {
        Self {
            check: check.to_string(),
            param,
            cases,
            max_error,
            tolerance,
            pass: max_error <= tolerance,
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

/// Grid spacings and sample counts swept by [`oracle_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckSpec {
    pub cases: usize,
    pub seed: u64,
    pub kappa_steps: Vec<f64>,
    pub waterfill_steps: Vec<f64>,
    pub inner_samples: Vec<usize>,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            cases: 50,
            seed: 0,
            kappa_steps: vec![1e-3, 1e-4, 1e-5],
            waterfill_steps: vec![1e-2, 1e-3],
            inner_samples: vec![1_000, 10_000, 100_000],
        }
    }
}

pub const KAPPA_NORMS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];
pub const WATERFILL_NORMS: [f64; 4] = [1.0, 2.0, f64::INFINITY, 2.5];
pub const CLOSED_FORM_NORMS: [f64; 3] = [1.0, 2.0, f64::INFINITY];

fn norm(r: f64) -> NormIndex {
    NormIndex::from_exponent(r).expect("valid exponent")
}

/// `|kappa - kappa_grid|` over `cases` vectors of length 1..=8 with entries
/// in `[-10, 10]`, each at every exponent in [`KAPPA_NORMS`].
pub fn kappa_check(cases: usize, step: f64, tolerance: f64, seed: u64) -> CheckRow {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = OracleConfig::default().with_grid_step(step);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.random_range(1..=8);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..=10.0)).collect();
        for r in KAPPA_NORMS {
            let p = norm(r);
            let fast = p_mean(&v, p, 1e-12).expect("nonempty").kappa;
            worst = worst.max((fast - kappa_grid(&v, p, &cfg)).abs());
        }
    }
    CheckRow::new("kappa", format!("step={step:e}"), cases, worst, tolerance, started)
}

/// Water level and weight errors against the simplex lattice over `cases`
/// draws of `b` in `[-2, 2]^A`, `A <= 3`, `sigma` in `[0, 2]`, each at every
/// exponent in [`WATERFILL_NORMS`].
pub fn waterfill_check(
    cases: usize,
    step: f64,
    zeta_tol: f64,
    weight_tol: f64,
    seed: u64,
) -> Result<[CheckRow; 2]> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = OracleConfig::default().with_grid_step(step);
    let (mut zeta_err, mut weight_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..cases {
        let n = rng.random_range(1..=3);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let sigma = rng.random_range(0.0..=2.0);
        for r in WATERFILL_NORMS {
            let p = norm(r);
            let fast = water_fill(&b, sigma, p, 1e-12);
            let grid = waterfill_grid(&b, sigma, holder_conjugate(p), &cfg)?;
            zeta_err = zeta_err.max((fast.zeta - grid.value).abs());
            let w = fast.weights.iter().zip(&grid.weights).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            weight_err = weight_err.max(w);
        }
    }
    let param = format!("step={step:e}");
    Ok([
        CheckRow::new("waterfill-zeta", param.clone(), cases, zeta_err, zeta_tol, started),
        CheckRow::new("waterfill-weights", param, cases, weight_err, weight_tol, started),
    ])
}

/// Random `(instance, uncertainty, policy, v, s)` with `S <= 4`, `A <= 3`.
/// Half the instances forbid one next state per source state.
pub struct InnerCase {
    pub inst: Mdp,
    pub policy: Policy,
    pub v: Vec<f64>,
    pub state: usize,
    pub alpha: f64,
    pub beta: f64,
    pub masked: bool,
}

impl InnerCase {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        let ns = rng.random_range(1..=4);
        let na = rng.random_range(1..=3);
        let mut inst: Mdp = random_instance(ns, na, rng.random(), 1.0).expect("valid sizes");
        let masked = ns > 1 && rng.random::<bool>();
        if masked {
            for s in 0..ns {
                let t = rng.random_range(0..ns);
                for a in 0..na {
                    let row = &mut inst.kernel[(s * na + a) * ns..(s * na + a + 1) * ns];
                    row[t] = 0.0;
                    let total: f64 = row.iter().sum();
                    row.iter_mut().for_each(|x| *x /= total);
                }
            }
        }
        let mut probs = Vec::with_capacity(ns * na);
        for _ in 0..ns {
            let row: Vec<f64> = (0..na).map(|_| rng.random::<f64>()).collect();
            let total: f64 = row.iter().sum();
            probs.extend(row.into_iter().map(|x| x / total));
        }
        Self {
            policy: Policy::new(ns, na, probs).expect("normalized rows"),
            v: (0..ns).map(|_| rng.random_range(-5.0..=5.0)).collect(),
            state: rng.random_range(0..ns),
            alpha: rng.random_range(0.0..=0.3),
            beta: rng.random_range(0.0..=0.3),
            inst,
            masked,
        }
    }

    pub fn uncertainty(&self, rect: Rectangularity, p: NormIndex) -> Uncertainty {
        let (ns, na) = (self.inst.num_states, self.inst.num_actions);
        let unc = Uncertainty::uniform(rect, p, ns, na, self.alpha, self.beta);
        if self.masked {
            unc.with_forbidden_from_kernel(&self.inst)
        } else {
            unc
        }
    }

    /// Closed-form robust policy evaluation at the sampled state.
    pub fn closed_form(&self, unc: &Uncertainty) -> Result<f64> {
        let ctx = BellmanContext::prepare(&self.inst, unc, &self.v, 1e-13)?;
        Ok(ctx.policy_step(&self.policy)?.0[self.state])
    }

    pub fn sampled(&self, unc: &Uncertainty, samples: usize, seed: u64) -> Result<f64> {
        let cfg = OracleConfig::default().with_samples(samples).with_seed(seed);
        Ok(inner_min_sampled(&self.inst, unc, &self.policy, &self.v, self.state, &cfg)?)
    }
}

/// Soundness `closed <= sampled + 1e-9` at `samples` over both
/// rectangularities and [`CLOSED_FORM_NORMS`], plus the `p = 2` gap
/// `sampled - closed` at `gap_samples` when given.
pub fn inner_check(
    cases: usize,
    samples: usize,
    gap_samples: Option<(usize, f64)>,
    seed: u64,
) -> Result<Vec<CheckRow>> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut unsound, mut gap): (f64, f64) = (0.0, 0.0);
    for i in 0..cases {
        let case = InnerCase::draw(&mut rng);
        for rect in [Rectangularity::SA, Rectangularity::S] {
            for r in CLOSED_FORM_NORMS {
                let unc = case.uncertainty(rect, norm(r));
                let closed = case.closed_form(&unc)?;
                let sampled = case.sampled(&unc, samples, seed ^ i as u64)?;
                unsound = unsound.max(closed - sampled);
                if let (Some((n, _)), 2.0) = (gap_samples, r) {
                    gap = gap.max(case.sampled(&unc, n, seed ^ i as u64)? - closed);
                }
            }
        }
    }
    let mut rows = vec![CheckRow::new(
        "inner-soundness",
        format!("samples={samples}"),
        cases,
        unsound,
        1e-9,
        started,
    )];
    if let Some((n, tol)) = gap_samples {
        rows.push(CheckRow::new("inner-gap-p2", format!("samples={n}"), cases, gap, tol, started));
    }
    Ok(rows)
}

/// Non-robust value iteration against the textbook reference on random
/// instances with `S <= 10`, `A <= 5`.
pub fn vi_check(cases: usize, seed: u64) -> Result<CheckRow> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SolveConfig::default().with_epsilon(1e-10).with_workers(1);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let inst: Mdp =
            random_instance(rng.random_range(1..=10), rng.random_range(1..=5), rng.random(), 1.0)?;
        let fast = value_iteration(&inst, &Uncertainty::non_robust(), &cfg)?;
        let slow = vi_reference(&inst, &OracleConfig::default())?;
        worst = worst.max(fast.value.sup_distance(&slow));
    }
    Ok(CheckRow::new("value-iteration", "eps=1e-10".into(), cases, worst, 1e-8, started))
}

/// The full sweep behind `robustmdp oracle-check`.
pub fn oracle_check(spec: &CheckSpec) -> Result<Vec<CheckRow>> {
    if spec.cases == 0 {
        return Err(CliError::Spec("cases must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &step in &spec.kappa_steps {
        rows.push(kappa_check(spec.cases, step, (8.0 * step).max(1e-3), spec.seed));
    }
    for &step in &spec.waterfill_steps {
        let tol = (5.0 * step).max(5e-3);
        rows.extend(waterfill_check(spec.cases, step, tol, (5.0 * step).max(2e-2), spec.seed)?);
    }
    let largest = spec.inner_samples.iter().copied().max();
    for &n in &spec.inner_samples {
        let gap = (Some(n) == largest).then_some((n, 1e-2));
        rows.extend(inner_check(spec.cases, n, gap, spec.seed)?);
    }
    rows.push(vi_check(spec.cases, spec.seed)?);
    Ok(rows)
}

pub fn write_check_csv<W: Write>(rows: &[CheckRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io("csv output", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_sweep_passes() {
        let spec = CheckSpec {
            cases: 5,
            seed: 1,
            kappa_steps: vec![1e-3],
            waterfill_steps: vec![1e-2],
            inner_samples: vec![2_000],
        };
        let rows = oracle_check(&spec).unwrap();
        assert_eq!(rows.len(), 1 + 2 + 2 + 1);
        for row in &rows {
            assert!(row.pass, "{row:?}");
        }
        let mut buf = Vec::new();
        write_check_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("check,param,cases,max_error,tolerance,pass,seconds\n"));
    }
}
