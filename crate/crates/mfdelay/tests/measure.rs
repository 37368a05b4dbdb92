use mfdelay::measure::{check_lions_derivative, prime_expectation, LionsReport};
use mfdelay::stats::loglog_slope;
use mfdelay::{EmpiricalLaw, RandomSource};
use rand::Rng;
use rand_distr::StandardNormal;

fn atoms(n: usize, seed: u64) -> Vec<f64> {
    let mut r = RandomSource::new(seed).aux(1);
    (0..n)
        .map(|_| 1.0 + r.sample::<f64, _>(StandardNormal))
        .collect()
}

fn mean(mu: &EmpiricalLaw) -> f64 {
    mu.mean()[0]
}

fn check(which: usize, mu: &EmpiricalLaw, eps: f64) -> LionsReport {
    let rng = RandomSource::new(7);
    match which {
        0 => check_lions_derivative(mean, |_, _, o| o[0] = 1.0, mu, 8, eps, &rng),
        1 => check_lions_derivative(
            |m| mean(m).powi(2),
            |m, _, o| o[0] = 2.0 * mean(m),
            mu,
            8,
            eps,
            &rng,
        ),
        _ => check_lions_derivative(
            |m| m.second_moment(),
            |_, y, o| o[0] = 2.0 * y[0],
            mu,
            8,
            eps,
            &rng,
        ),
    }
}

#[test]
fn documented_functionals_pass() {
    let a = atoms(1000, 1);
    let mu = EmpiricalLaw::new(&a, 1).unwrap();
    let linear = check(0, &mu, 1e-4);
    assert!(linear.passes(1e-8), "{linear:?}");
    for which in [1, 2] {
        let r = check(which, &mu, 1e-4);
        assert!(r.passes(1e-4), "{which} {r:?}");
        let eps = [1e-2, 1e-3, 1e-4];
        let errs: Vec<f64> = eps
            .iter()
            .map(|&e| check(which, &mu, e).max_error)
            .collect();
        let slope = loglog_slope(&eps, &errs);
        assert!(slope >= 0.9, "{which} {slope} {errs:?}");
    }
}

#[test]
fn wrong_derivative_is_caught() {
    let a = atoms(500, 2);
    let mu = EmpiricalLaw::new(&a, 1).unwrap();
    let r = check_lions_derivative(
        |m| m.second_moment(),
        |_, y, o| o[0] = y[0],
        &mu,
        4,
        1e-4,
        &RandomSource::new(0),
    );
    assert!(!r.passes(1e-2), "{r:?}");
}

#[test]
fn non_finite_functional_is_reported() {
    let a = atoms(50, 3);
    let mu = EmpiricalLaw::new(&a, 1).unwrap();
    let r = check_lions_derivative(
        |_| f64::NAN,
        |_, _, o| o[0] = 0.0,
        &mu,
        2,
        1e-4,
        &RandomSource::new(0),
    );
    assert!(!r.all_finite && !r.passes(1.0));
}

#[test]
fn prime_expectation_of_a_product_is_centered() {
    let mut r = RandomSource::new(5).aux(2);
    let a: Vec<f64> = (0..100_000).map(|_| r.sample(StandardNormal)).collect();
    let mu = EmpiricalLaw::new(&a, 1).unwrap();
    let e = prime_expectation(
        |y, x| y[0] * x[0],
        &mu,
        &[1.0],
        a.len(),
        &RandomSource::new(0),
    )
    .unwrap();
    assert!(e.abs() <= 0.01, "{e}");
    let one = prime_expectation(|_, _| 1.0, &mu, &[1.0], 50, &RandomSource::new(0)).unwrap();
    assert_eq!(one, 1.0);
}
