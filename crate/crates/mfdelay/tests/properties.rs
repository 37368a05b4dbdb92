use mfdelay::control::AdmissibleSet;
use mfdelay::measure::prime_expectation;
use mfdelay::{w2_distance_1d, DelaySpec, EmpiricalLaw, RandomSource, TimeGrid};
use proptest::prelude::*;
use rand::Rng;

fn atoms(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

fn w2(a: &[f64], b: &[f64]) -> f64 {
    w2_distance_1d(
        &EmpiricalLaw::new(a, 1).unwrap(),
        &EmpiricalLaw::new(b, 1).unwrap(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn w2_is_a_metric(a in atoms(32), b in atoms(32), c in atoms(32)) {
        prop_assert_eq!(w2(&a, &a), 0.0);
        let mut shuffled = a.clone();
        shuffled.reverse();
        prop_assert!(w2(&a, &shuffled) <= 1e-12);
        prop_assert!((w2(&a, &b) - w2(&b, &a)).abs() <= 1e-12);
        prop_assert!(w2(&a, &c) <= w2(&a, &b) + w2(&b, &c) + 1e-12);
    }

    #[test]
    fn w2_scales_with_the_atoms(a in atoms(24), b in atoms(24), s in -5.0..5.0f64) {
        let sa: Vec<f64> = a.iter().map(|x| s * x).collect();
        let sb: Vec<f64> = b.iter().map(|x| s * x).collect();
        let lhs = w2(&sa, &sb);
        let rhs = s.abs() * w2(&a, &b);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs), "{} {}", lhs, rhs);
    }

    #[test]
    fn full_prime_expectation_ignores_atom_order(a in atoms(20), own in -3.0..3.0f64, seed in 0u64..1000) {
        let f = |y: &[f64], x: &[f64]| (y[0] - x[0]).powi(2) + y[0].sin();
        let mut p = a.clone();
        p.rotate_left(7);
        let rng = RandomSource::new(seed);
        let e1 = prime_expectation(f, &EmpiricalLaw::new(&a, 1).unwrap(), &[own], a.len(), &rng).unwrap();
        let e2 = prime_expectation(f, &EmpiricalLaw::new(&p, 1).unwrap(), &[own], p.len(), &RandomSource::new(seed + 1)).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12 * (1.0 + e1.abs()));
    }

    #[test]
    fn anticipation_targets_stay_on_the_grid(t_steps in 1usize..40, k_steps in 0usize..10, d in 0usize..10, z in 0usize..10) {
        let dt = 0.125;
        let grid = TimeGrid::new(t_steps as f64 * dt, k_steps as f64 * dt, d as f64 * dt, dt).unwrap();
        let clamped = grid.clone().with_anticipation(|_| d as f64 * dt, |_| z as f64 * dt, true).unwrap();
        for g in clamped.zero_index()..=clamped.horizon_index() {
            prop_assert!(clamped.delta_target(g) <= clamped.end_index());
            prop_assert!(clamped.zeta_target(g) <= clamped.end_index());
            prop_assert!(clamped.delta_target(g) >= g);
        }
        let l = clamped.min_l_bound();
        prop_assert!(l >= 1.0);
        prop_assert!(DelaySpec::for_grid(&clamped).check(&clamped).is_ok());
        let loose = DelaySpec { l_bound: l - 0.5, ..DelaySpec::for_grid(&clamped) };
        prop_assert!(loose.check(&clamped).is_err());
        let fits = d <= k_steps && z <= k_steps;
        prop_assert_eq!(grid.with_anticipation(|_| d as f64 * dt, |_| z as f64 * dt, false).is_ok(), fits);
    }

    #[test]
    fn projection_is_idempotent(v in prop::collection::vec(-20.0..20.0f64, 3), lo in -2.0..0.0f64, width in 0.0..4.0f64) {
        let set = AdmissibleSet::Box { lo: vec![lo; 3], hi: vec![lo + width; 3] };
        let mut once = v.clone();
        set.project(&mut once);
        let mut twice = once.clone();
        set.project(&mut twice);
        prop_assert_eq!(&once, &twice);
        prop_assert!(set.contains(&once));
        let mut free = v.clone();
        AdmissibleSet::Unbounded.project(&mut free);
        prop_assert_eq!(free, v);
    }
}

// At 10³ draws the sample correlation of independent streams has sd ≈ 0.032,
// so only a handful of fixed pairs are checked against 0.05.
#[test]
fn particle_streams_are_uncorrelated() {
    let rng = RandomSource::new(42);
    let draw = |mut r: rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..1000).map(|_| r.random::<f64>() - 0.5).collect()
    };
    let corr = |x: &[f64], y: &[f64]| {
        let mx = x.iter().sum::<f64>() / 1000.0;
        let my = y.iter().sum::<f64>() / 1000.0;
        let cov: f64 = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum();
        let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    };
    let s0 = draw(rng.particle(0));
    for other in [
        draw(rng.particle(1)),
        draw(rng.particle(999)),
        draw(rng.aux(0)),
        draw(rng.derive(1).particle(0)),
    ] {
        let r = corr(&s0, &other);
        assert!(r.abs() < 0.05, "{r}");
    }
}
