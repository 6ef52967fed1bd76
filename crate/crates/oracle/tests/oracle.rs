use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_mdp::{
    holder_conjugate, p_mean, random_instance, value_iteration, water_fill, BellmanContext,
    MdpInstance, NormIndex, Rectangularity, SolveConfig, StochasticPolicy, UncertaintySpec,
};
use robust_mdp_oracle::{
    inner_min_sampled, kappa_grid, vi_reference, waterfill_grid, OracleConfig, OracleError,
};

fn cfg(step: f64) -> OracleConfig {
    OracleConfig::default().with_grid_step(step)
}

#[test]
fn config_validation() {
    assert!(OracleConfig::default().validate().is_ok());
    assert!(cfg(0.0).validate().is_err());
    assert!(cfg(f64::NAN).validate().is_err());
    assert!(OracleConfig::default().with_samples(0).validate().is_err());
}

#[test]
fn kappa_grid_constant_is_zero() {
    for p in [NormIndex::One, NormIndex::Two, NormIndex::Infinity] {
        assert_eq!(kappa_grid(&[1.5; 4], p, &cfg(1e-3)), 0.0);
    }
}

#[test]
fn kappa_grid_midrange() {
    let k = kappa_grid(&[0.0, 2.0], NormIndex::Infinity, &cfg(1e-3));
    assert!((k - 1.0).abs() <= 1e-3);
}

#[test]
fn kappa_grid_bounds_exact_value_from_above() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = NormIndex::from_exponent(2.5).unwrap();
    let step = 1e-4;
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let exact = p_mean(&v, p, 1e-12).unwrap().kappa;
        let grid = kappa_grid(&v, p, &cfg(step));
        assert!(grid >= exact - n as f64 * step);
        assert!(grid <= exact + n as f64 * step);
    }
}

#[test]
fn waterfill_grid_examples() {
    let c = cfg(1e-3);
    let g = waterfill_grid(&[0.3, 2.0, 1.0], 0.0, NormIndex::Two, &c).unwrap();
    assert_abs_diff_eq!(g.value, 2.0, epsilon = 1e-3);
    assert_eq!(g.weights, vec![0.0, 1.0, 0.0]);

    let g = waterfill_grid(&[2.0, 1.0], 0.5, NormIndex::Two, &c).unwrap();
    assert_abs_diff_eq!(g.value, 1.5, epsilon = 1e-3);

    let g = waterfill_grid(&[3.0, 2.0, 0.0], 2.0, NormIndex::Infinity, &c).unwrap();
    assert_abs_diff_eq!(g.value, 1.5, epsilon = 1e-3);
    assert_abs_diff_eq!(g.weights[0], 0.5, epsilon = 1e-3);
    assert_abs_diff_eq!(g.weights[1], 0.5, epsilon = 1e-3);
}

#[test]
fn waterfill_grid_rejects_large_dimension() {
    assert_eq!(
        waterfill_grid(&[0.0; 5], 1.0, NormIndex::Two, &cfg(0.1)),
        Err(OracleError::DimensionTooLarge { max: 4, got: 5 })
    );
}

#[test]
fn waterfill_grid_never_exceeds_exact_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in [NormIndex::One, NormIndex::Two, NormIndex::Infinity] {
        for _ in 0..20 {
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sigma = rng.random_range(0.0..2.0);
            let exact = water_fill(&b, sigma, p, 1e-12).zeta;
            let g = waterfill_grid(&b, sigma, holder_conjugate(p), &cfg(1e-2)).unwrap();
            assert!(g.value <= exact + 1e-9);
            assert!(g.value >= exact - 0.1);
        }
    }
}

fn small_setup(seed: u64, rect: Rectangularity, p: NormIndex) -> (MdpInstance<f64>, UncertaintySpec<f64>, StochasticPolicy<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst: MdpInstance<f64> = random_instance(2, 2, seed, 1.0).unwrap();
    let unc = UncertaintySpec::uniform(rect, p, 2, 2, 0.1, 0.1);
    let probs: Vec<f64> = (0..2).flat_map(|_| {
        let x: f64 = rng.random();
        [x, 1.0 - x]
    }).collect();
    let policy = StochasticPolicy::new(2, 2, probs).unwrap();
    let v: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
    (inst, unc, policy, v)
}

#[test]
fn inner_min_zero_radius_is_nominal() {
    let (inst, _, policy, v) = small_setup(3, Rectangularity::S, NormIndex::Two);
    for rect in [Rectangularity::SA, Rectangularity::S, Rectangularity::NonRobust] {
        let unc = UncertaintySpec::uniform(rect, NormIndex::Two, 2, 2, 0.0, 0.0);
        let got = inner_min_sampled(&inst, &unc, &policy, &v, 1, &OracleConfig::default()).unwrap();
        let mut nominal = 0.0;
        for a in 0..2 {
            let next: f64 = inst.kernel_row(1, a).iter().zip(&v).map(|(p, x)| p * x).sum();
            nominal += policy.row(1)[a] * (inst.reward_at(1, a) + inst.gamma * next);
        }
        assert_eq!(got, nominal);
    }
}

#[test]
fn inner_min_is_sound_and_tight() {
    for rect in [Rectangularity::SA, Rectangularity::S] {
        for p in [NormIndex::One, NormIndex::Two, NormIndex::Infinity] {
            let (inst, unc, policy, v) = small_setup(11, rect, p);
            let closed = BellmanContext::prepare(&inst, &unc, &v, 1e-12)
                .unwrap()
                .policy_step(&policy)
                .unwrap();
            for s in 0..2 {
                let sampled = inner_min_sampled(&inst, &unc, &policy, &v, s, &OracleConfig::default()).unwrap();
                assert!(closed.0[s] <= sampled + 1e-9, "{rect} {p} s={s}");
                if p == NormIndex::Two {
                    let fine = inner_min_sampled(
                        &inst, &unc, &policy, &v, s,
                        &OracleConfig::default().with_samples(100_000),
                    )
                    .unwrap();
                    assert!(fine - closed.0[s] <= 1e-2, "{rect} s={s}: gap {}", fine - closed.0[s]);
                }
            }
        }
    }
}

#[test]
fn inner_min_rejects_bad_state() {
    let (inst, unc, policy, v) = small_setup(1, Rectangularity::S, NormIndex::Two);
    assert!(inner_min_sampled(&inst, &unc, &policy, &v, 2, &OracleConfig::default()).is_err());
    assert!(inner_min_sampled(&inst, &unc, &policy, &v[..1], 0, &OracleConfig::default()).is_err());
}

#[test]
fn vi_reference_geometric_series() {
    let inst = MdpInstance::new(1, 1, vec![1.0], vec![1.0], 0.5, None).unwrap();
    let v = vi_reference(&inst, &OracleConfig::default()).unwrap();
    assert_abs_diff_eq!(v.0[0], 2.0, epsilon = 1e-10);
}

#[test]
fn vi_reference_deterministic_chain() {
    // 0 -> 1 -> 2 -> 2, reward 1 only on the terminal self-loop
    let kernel = vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let inst = MdpInstance::new(3, 1, kernel, vec![0.0, 0.0, 1.0], 0.9, None).unwrap();
    let v = vi_reference(&inst, &OracleConfig::default()).unwrap();
    let terminal = 1.0 / (1.0 - 0.9);
    for (got, want) in v.0.iter().zip([0.81 * terminal, 0.9 * terminal, terminal]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
    }
}

#[test]
fn vi_reference_matches_solver() {
    let inst: MdpInstance<f64> = random_instance(5, 3, 17, 1.0).unwrap();
    let reference = vi_reference(&inst, &OracleConfig::default()).unwrap();
    let cfg = SolveConfig::default().with_epsilon(1e-9);
    let solved = value_iteration(&inst, &UncertaintySpec::non_robust(), &cfg).unwrap();
    assert!(reference.sup_distance(&solved.value) <= 1e-8);
}
