use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_mdp::{
    random_instance, BellmanContext, Mdp, NormIndex, Policy, Rectangularity, Uncertainty,
    ValueFunction,
};

const TOL: f64 = 1e-12;

fn norm_strategy() -> impl Strategy<Value = NormIndex> {
    prop_oneof![
        Just(NormIndex::One),
        Just(NormIndex::Two),
        Just(NormIndex::Infinity),
        (1.2f64..6.0).prop_map(|r| NormIndex::from_exponent(r).unwrap()),
    ]
}

/// Random instance mixed with the uniform kernel so every nominal mass is at
/// least `0.5 / S`; radii below that keep perturbed kernels nonnegative.
fn mixed_instance(s: usize, a: usize, seed: u64) -> Mdp {
    let mut inst: Mdp = random_instance(s, a, seed, 1.0).unwrap();
    for x in inst.kernel.iter_mut() {
        *x = 0.5 * *x + 0.5 / s as f64;
    }
    inst
}

fn random_policy(rng: &mut ChaCha8Rng, s: usize, a: usize) -> Policy {
    let mut probs = Vec::with_capacity(s * a);
    for _ in 0..s {
        let row: Vec<f64> = (0..a).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = row.iter().sum();
        probs.extend(row.iter().map(|x| x / total));
    }
    Policy::new(s, a, probs).unwrap()
}

/// Every operator variant applied to `v`.
fn images(inst: &Mdp, unc: &Uncertainty, pi: &Policy, v: &[f64]) -> Vec<ValueFunction<f64>> {
    let ctx = BellmanContext::prepare(inst, unc, v, TOL).unwrap();
    let mut out = vec![ctx.optimal_step().0, ctx.policy_step(pi).unwrap()];
    match unc.rect {
        Rectangularity::SA => out.push(ctx.optimistic_sa().unwrap()),
        Rectangularity::S => out.push(ctx.optimistic_s().unwrap()),
        Rectangularity::NonRobust => {}
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_and_monotonicity(
        seed in 0u64..1000,
        s in 1usize..6,
        a in 1usize..5,
        p in norm_strategy(),
        rect in prop_oneof![Just(Rectangularity::SA), Just(Rectangularity::S)],
        alpha in 0.0f64..0.5,
        beta_frac in 0.0f64..1.0,
    ) {
        let inst = mixed_instance(s, a, seed);
        let min_mass = inst.kernel.iter().copied().fold(f64::INFINITY, f64::min);
        let unc = Uncertainty::uniform(rect, p, s, a, alpha, beta_frac * min_mass);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_policy(&mut rng, s, a);
        let u: Vec<f64> = (0..s).map(|_| rng.random_range(-5.0..5.0)).collect();
        let w: Vec<f64> = u.iter().map(|x| x + rng.random_range(0.0..2.0)).collect();
        let dist = u.iter().zip(&w).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        for (tu, tw) in images(&inst, &unc, &pi, &u).iter().zip(images(&inst, &unc, &pi, &w).iter()) {
            prop_assert!(tu.sup_distance(tw) <= inst.gamma * dist + 1e-9);
            for (x, y) in tu.0.iter().zip(&tw.0) {
                prop_assert!(*x <= *y + 1e-9);
            }
        }
    }

    #[test]
    fn robust_below_nominal_below_optimistic(
        seed in 0u64..1000,
        s in 1usize..6,
        a in 1usize..5,
        p in norm_strategy(),
        rect in prop_oneof![Just(Rectangularity::SA), Just(Rectangularity::S)],
    ) {
        let inst: Mdp = random_instance(s, a, seed, 1.0).unwrap();
        let unc = Uncertainty::uniform(rect, p, s, a, 0.1, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let v: Vec<f64> = (0..s).map(|_| rng.random_range(-5.0..5.0)).collect();
        let robust = images(&inst, &unc, &Policy::uniform(s, a), &v);
        let nominal = BellmanContext::prepare(&inst, &Uncertainty::non_robust(), &v, TOL)
            .unwrap()
            .optimal_step()
            .0;
        for st in 0..s {
            prop_assert!(robust[0].0[st] <= nominal.0[st] + 1e-12);
            prop_assert!(robust[1].0[st] <= robust[0].0[st] + 1e-9);
            prop_assert!(robust[2].0[st] >= nominal.0[st] - 1e-12);
        }
    }

    #[test]
    fn larger_radii_never_help(
        seed in 0u64..1000,
        p in norm_strategy(),
        rect in prop_oneof![Just(Rectangularity::SA), Just(Rectangularity::S)],
        r in 0.0f64..0.3,
        dr in 0.0f64..0.3,
    ) {
        let (s, a) = (4, 3);
        let inst: Mdp = random_instance(s, a, seed, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..s).map(|_| rng.random_range(-5.0..5.0)).collect();
        let small = Uncertainty::uniform(rect, p, s, a, r, r);
        let large = Uncertainty::uniform(rect, p, s, a, r + dr, r + dr);
        let lo = BellmanContext::prepare(&inst, &large, &v, TOL).unwrap().optimal_step().0;
        let hi = BellmanContext::prepare(&inst, &small, &v, TOL).unwrap().optimal_step().0;
        for (x, y) in lo.0.iter().zip(&hi.0) {
            prop_assert!(*x <= *y + 1e-9);
        }
    }

    #[test]
    fn constant_shift_moves_image_by_gamma(
        seed in 0u64..1000,
        p in norm_strategy(),
        rect in prop_oneof![Just(Rectangularity::SA), Just(Rectangularity::S)],
        c in -10.0f64..10.0,
    ) {
        let (s, a) = (5, 3);
        let inst: Mdp = random_instance(s, a, seed, 1.0).unwrap();
        let unc = Uncertainty::uniform(rect, p, s, a, 0.2, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..s).map(|_| rng.random_range(-5.0..5.0)).collect();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let base = BellmanContext::prepare(&inst, &unc, &v, TOL).unwrap().optimal_step().0;
        let moved = BellmanContext::prepare(&inst, &unc, &shifted, TOL).unwrap().optimal_step().0;
        for (x, y) in base.0.iter().zip(&moved.0) {
            prop_assert!((y - x - inst.gamma * c).abs() <= 1e-8);
        }
    }
}

#[test]
fn f32_operators_track_f64() {
    let inst64: Mdp = random_instance(6, 4, 2, 1.0).unwrap();
    let inst32: robust_mdp::Mdp32 = random_instance(6, 4, 2, 1.0).unwrap();
    let v64: Vec<f64> = (0..6).map(|i| i as f64 * 0.7 - 2.0).collect();
    let v32: Vec<f32> = v64.iter().map(|&x| x as f32).collect();
    for rect in [Rectangularity::SA, Rectangularity::S] {
        for p in [NormIndex::One, NormIndex::Two, NormIndex::Infinity] {
            let u64 = Uncertainty::uniform(rect, p, 6, 4, 0.1, 0.1);
            let u32 = robust_mdp::Uncertainty32::uniform(rect, p, 6, 4, 0.1, 0.1);
            let a = BellmanContext::prepare(&inst64, &u64, &v64, TOL).unwrap().optimal_step().0;
            let b = BellmanContext::prepare(&inst32, &u32, &v32, 1e-6).unwrap().optimal_step().0;
            for (x, y) in a.0.iter().zip(&b.0) {
                assert!((x - *y as f64).abs() < 1e-4, "{rect} {p}: {x} vs {y}");
            }
        }
    }
}
