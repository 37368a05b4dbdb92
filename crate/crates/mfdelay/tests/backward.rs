use mfdelay::backward::*;
use mfdelay::error::Error;
use mfdelay::stats::mean_se;
use mfdelay::{Basis, BrownianIncrements, NodeArray, RandomSource, TerminalSegment, TimeGrid};

fn setup(grid: &TimeGrid, n: usize, seed: u64) -> (BrownianIncrements, NodeArray) {
    let noise = mfdelay::rng::sample_brownian(grid, n, 1, &RandomSource::new(seed));
    let features = noise.path(grid);
    (noise, features)
}

fn constant_terminal(grid: &TimeGrid, n: usize, c: f64) -> TerminalSegment {
    let (h, e) = (grid.horizon_index(), grid.end_index());
    let y = NodeArray::from_fn(h, e, n, 1, |_, _, out| out[0] = c);
    let z = NodeArray::zeros(h, e + 1 - h, n, 1);
    TerminalSegment::new(grid, y, z).unwrap()
}

fn unit_grid() -> TimeGrid {
    TimeGrid::new(1.0, 0.0, 0.0, 0.01).unwrap()
}

#[test]
fn zero_driver_recovers_brownian_motion() {
    let grid = unit_grid();
    let n = 100_000;
    let (noise, features) = setup(&grid, n, 11);
    let terminal = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        y[0] = b[0];
        z[0] = 1.0;
    })
    .unwrap();
    let f = DriverSpec::new(1, 1, 0.0, PrimedMode::Unused, false, |_, o| o[0] = 0.0);
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let s = solve_mfabsde(&f, &p, &BackwardConfig::default(), &RandomSource::new(0)).unwrap();
    let xi: Vec<f64> = terminal.y().at(grid.horizon_index()).to_vec();
    let (xi_mean, _) = mean_se(&xi);
    let mut worst_y: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for g in grid.zero_index()..grid.horizon_index() {
        let err: f64 = (0..n)
            .map(|i| (s.y().get(g, i)[0] - features.get(g, i)[0]).powi(2))
            .sum::<f64>()
            / n as f64;
        worst_y = worst_y.max(err.sqrt());
        worst_z = worst_z.max((s.z().node_mean(g)[0] - 1.0).abs());
        // martingale property
        let (m, se) = mean_se(s.y().at(g));
        assert!(
            (m - xi_mean).abs() <= 3.0 * se.max(1e-12),
            "node {g}: {m} vs {xi_mean}"
        );
    }
    assert!(worst_y <= 0.02, "Y error {worst_y}");
    assert!(worst_z <= 0.02, "Z error {worst_z}");
    assert_eq!(s.picard_norms().last(), Some(&0.0));
}

#[test]
fn linear_decay_driver() {
    let grid = unit_grid();
    let n = 2000;
    let (noise, features) = setup(&grid, n, 1);
    let terminal = constant_terminal(&grid, n, 1.0);
    let f = DriverSpec::new(1, 1, 1.0, PrimedMode::Unused, false, |a, o| o[0] = -a.y[0]);
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let s = solve_mfabsde(&f, &p, &BackwardConfig::default(), &RandomSource::new(0)).unwrap();
    assert!((s.y0()[0] - (-1.0f64).exp()).abs() <= 0.01, "{}", s.y0()[0]);
}

#[test]
fn constant_driver_integrates_to_horizon() {
    let grid = unit_grid();
    let n = 1000;
    let (noise, features) = setup(&grid, n, 2);
    let terminal = TerminalSegment::zeros(&grid, n, 1, 1);
    let f = DriverSpec::new(1, 1, 0.0, PrimedMode::Unused, false, |_, o| o[0] = 1.0);
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let s = solve_mfabsde(&f, &p, &BackwardConfig::default(), &RandomSource::new(0)).unwrap();
    assert!((s.y0()[0] - 1.0).abs() < 1e-10);
    assert!(s.z().data().iter().all(|z| z.abs() < 1e-10));
}

#[test]
fn mean_field_growth() {
    let grid = unit_grid();
    let n = 1000;
    let (noise, features) = setup(&grid, n, 3);
    let terminal = constant_terminal(&grid, n, 1.0);
    let f = DriverSpec::new(1, 1, 1.0, PrimedMode::Affine, false, |a, o| o[0] = a.y_p[0]);
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let cfg = BackwardConfig {
        picard_max_iter: 200,
        ..Default::default()
    };
    let s = solve_mfabsde(&f, &p, &cfg, &RandomSource::new(0)).unwrap();
    let e = std::f64::consts::E;
    assert!((s.y0()[0] - e).abs() / e <= 0.01, "{}", s.y0()[0]);
}

#[test]
fn terminal_segments_are_kept_exactly() {
    let grid = TimeGrid::new(1.0, 0.2, 0.0, 0.01)
        .unwrap()
        .with_shifts(10, 5);
    let n = 500;
    let (noise, features) = setup(&grid, n, 4);
    let terminal = TerminalSegment::from_brownian(&grid, &noise, 1, |t, b, y, z| {
        y[0] = b[0].sin() + t;
        z[0] = b[0].cos();
    })
    .unwrap();
    let f = DriverSpec::new(1, 1, 0.5, PrimedMode::Affine, true, |a, o| {
        o[0] = -0.5 * a.y[0] + 0.25 * a.y_ant[0] + 0.1 * a.z_ant[0] + 0.2 * a.y_p[0];
    });
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let s = solve_mfabsde(&f, &p, &BackwardConfig::default(), &RandomSource::new(0)).unwrap();
    for g in grid.horizon_index()..=grid.end_index() {
        assert_eq!(s.y().at(g), terminal.y().at(g));
        assert_eq!(s.z().at(g), terminal.z().at(g));
    }
}

#[test]
fn anticipated_reduction_matches_full_solver() {
    let grid = TimeGrid::new(1.0, 0.25, 0.0, 0.01)
        .unwrap()
        .with_shifts(25, 10);
    let n = 2000;
    let (noise, features) = setup(&grid, n, 5);
    let terminal = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        y[0] = b[0].max(0.0);
        z[0] = if b[0] > 0.0 { 1.0 } else { 0.0 };
    })
    .unwrap();
    let rule = |y: f64, z: f64, ya: f64, za: f64| 0.3 * y - 0.2 * z + 0.5 * ya + 0.25 * za + 0.1;
    let full = DriverSpec::new(1, 1, 0.5, PrimedMode::Unused, true, |a, o| {
        o[0] = rule(a.y[0], a.z[0], a.y_ant[0], a.z_ant[0])
    });
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let cfg = BackwardConfig::default();
    let a = solve_mfabsde(&full, &p, &cfg, &RandomSource::new(0)).unwrap();
    let b = solve_anticipated_bsde(
        |_, y, z, ya, za, o| o[0] = rule(y[0], z[0], ya[0], za[0]),
        &p,
        &cfg.basis,
    )
    .unwrap();
    let gap = a
        .y()
        .data()
        .iter()
        .zip(b.y().data())
        .chain(a.z().data().iter().zip(b.z().data()));
    let worst = gap.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn mean_field_reduction_matches_full_solver() {
    let grid = unit_grid();
    let n = 300;
    let (noise, features) = setup(&grid, n, 6);
    let terminal = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        y[0] = b[0] * b[0];
        z[0] = 2.0 * b[0];
    })
    .unwrap();
    let rule = |y: f64, z: f64, yp: f64, zp: f64| {
        -0.5 * y + 0.2 * z + 0.3 * (yp * y).sin() + 0.1 * zp.cos()
    };
    let full = DriverSpec::new(1, 1, 0.5, PrimedMode::General, false, |a, o| {
        o[0] = rule(a.y[0], a.z[0], a.y_p[0], a.z_p[0])
    });
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let cfg = BackwardConfig {
        interaction_budget: n,
        picard_tol: 1e-9,
        ..Default::default()
    };
    let beta = cfg.beta_for(0.5, &grid);
    let a = solve_mfabsde(&full, &p, &cfg, &RandomSource::new(0)).unwrap();
    let b = solve_mean_field_bsde(
        |_, y, z, yp, zp, o| o[0] = rule(y[0], z[0], yp[0], zp[0]),
        &p,
        &cfg.basis,
        beta,
        cfg.picard_tol,
        cfg.picard_max_iter,
    )
    .unwrap();
    assert_eq!(a.picard_norms().len(), b.picard_norms().len());
    let gap = a
        .y()
        .data()
        .iter()
        .zip(b.y().data())
        .chain(a.z().data().iter().zip(b.z().data()));
    let worst = gap.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn linear_in_terminal_data() {
    let grid = TimeGrid::new(1.0, 0.2, 0.0, 0.02)
        .unwrap()
        .with_shifts(10, 5);
    let n = 2000;
    let (noise, features) = setup(&grid, n, 7);
    let t1 = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        y[0] = b[0];
        z[0] = 1.0;
    })
    .unwrap();
    let t2 = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        y[0] = b[0] * b[0];
        z[0] = 2.0 * b[0];
    })
    .unwrap();
    let (a, b) = (2.0, -0.5);
    let comb = TerminalSegment::from_brownian(&grid, &noise, 1, |_, x, y, z| {
        y[0] = a * x[0] + b * x[0] * x[0];
        z[0] = a + b * 2.0 * x[0];
    })
    .unwrap();
    let f = DriverSpec::new(1, 1, 0.5, PrimedMode::Affine, true, |a, o| {
        o[0] = -0.4 * a.y[0] + 0.3 * a.z[0] + 0.2 * a.y_ant[0] + 0.1 * a.z_ant[0] + 0.25 * a.y_p[0];
    });
    let cfg = BackwardConfig {
        picard_tol: 1e-12,
        picard_max_iter: 60,
        ..Default::default()
    };
    let rng = RandomSource::new(0);
    let solve = |t: &TerminalSegment| {
        solve_mfabsde(
            &f,
            &BackwardProblem {
                grid: &grid,
                noise: &noise,
                features: &features,
                terminal: t,
            },
            &cfg,
            &rng,
        )
        .unwrap()
    };
    let (s1, s2, s) = (solve(&t1), solve(&t2), solve(&comb));
    let worst = (0..s.y().data().len())
        .map(|k| (s.y().data()[k] - (a * s1.y().data()[k] + b * s2.y().data()[k])).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-8, "{worst}");
}

/// f = ½(E′[Y′] + E′[Y′_{t+δ}]) on [0, 1] with δ ≡ 0.2 and K = 0.2: C = ½
/// and L = 1.
fn contraction_setup(beta: Option<f64>) -> Vec<f64> {
    let grid = TimeGrid::new(1.0, 0.2, 0.0, 0.01)
        .unwrap()
        .with_shifts(20, 20);
    let n = 2000;
    let (noise, features) = setup(&grid, n, 8);
    let terminal = TerminalSegment::from_brownian(&grid, &noise, 1, |t, b, y, z| {
        y[0] = 1.0 + b[0] + t;
        z[0] = 1.0;
    })
    .unwrap();
    let f = DriverSpec::new(1, 1, 0.5, PrimedMode::Affine, false, |a, o| {
        o[0] = 0.5 * (a.y_p[0] + a.y_ant_p[0])
    });
    let cfg = BackwardConfig {
        beta,
        l_bound: Some(1.0),
        picard_tol: 1e-10,
        picard_max_iter: 60,
        ..Default::default()
    };
    assert_eq!(grid.min_l_bound(), 1.0);
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    solve_mfabsde(&f, &p, &cfg, &RandomSource::new(0))
        .unwrap()
        .picard_norms()
        .to_vec()
}

#[test]
fn contraction_at_default_weight() {
    let norms = contraction_setup(None);
    assert!(norms.len() >= 4, "{norms:?}");
    let r = contraction_rate(&norms).unwrap();
    assert!(r <= 0.6, "{r}");
    let r2 = contraction_rate(&contraction_setup(Some(42.0))).unwrap();
    assert!(r2 <= r + 1e-9, "{r2} > {r}");
}

#[test]
fn zero_driver_contracts_in_one_step() {
    let grid = unit_grid();
    let (noise, features) = setup(&grid, 100, 9);
    let terminal = constant_terminal(&grid, 100, 1.0);
    let f = DriverSpec::new(1, 1, 0.0, PrimedMode::Unused, false, |_, o| o[0] = 0.0);
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &terminal,
    };
    let s = solve_mfabsde(&f, &p, &BackwardConfig::default(), &RandomSource::new(0)).unwrap();
    assert_eq!(contraction_rate(s.picard_norms()).unwrap(), 0.0);
}

#[test]
fn apriori_cases() {
    let grid = unit_grid();
    let n = 20_000;
    let (noise, features) = setup(&grid, n, 10);
    let rng = RandomSource::new(0);
    let cfg = BackwardConfig {
        record_driver: true,
        ..Default::default()
    };
    let zero = DriverSpec::new(1, 1, 0.0, PrimedMode::Unused, false, |_, o| o[0] = 0.0)
        .independent_of_solution();
    let one = DriverSpec::new(1, 1, 0.0, PrimedMode::Unused, false, |_, o| o[0] = 1.0)
        .independent_of_solution();

    let t0 = TerminalSegment::zeros(&grid, n, 1, 1);
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &t0,
    };
    let r =
        apriori_estimate_check(&solve_mfabsde(&zero, &p, &cfg, &rng).unwrap(), None, 2.0).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));

    let tb = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        y[0] = b[0];
        z[0] = 1.0;
    })
    .unwrap();
    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &tb,
    };
    let r =
        apriori_estimate_check(&solve_mfabsde(&zero, &p, &cfg, &rng).unwrap(), None, 2.0).unwrap();
    assert!(r.holds(0.02), "{r:?}");
    let e2 = 2.0f64.exp();
    assert!((r.rhs - e2).abs() < 0.15, "{r:?}");
    assert!((r.lhs - (0.75 * e2 - 0.25)).abs() < 0.1, "{r:?}");

    let p = BackwardProblem {
        grid: &grid,
        noise: &noise,
        features: &features,
        terminal: &t0,
    };
    let r =
        apriori_estimate_check(&solve_mfabsde(&one, &p, &cfg, &rng).unwrap(), None, 2.0).unwrap();
    assert!(r.holds(0.02), "{r:?}");
    assert!((r.rhs - (e2 - 1.0) / 2.0).abs() < 0.01, "{r:?}");

    let dependent = DriverSpec::new(1, 1, 1.0, PrimedMode::Unused, false, |a, o| o[0] = -a.y[0]);
    let s = solve_mfabsde(&dependent, &p, &cfg, &rng).unwrap();
    assert!(matches!(
        apriori_estimate_check(&s, None, 2.0),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn comparison_examples() {
    let grid = TimeGrid::new(1.0, 0.2, 0.0, 0.01)
        .unwrap()
        .with_shifts(20, 20);
    let n = 5000;
    let (noise, features) = setup(&grid, n, 12);
    let rng = RandomSource::new(0);
    let cfg = BackwardConfig {
        basis: Basis::Bins { count: 20 },
        ..Default::default()
    };
    let pos = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        y[0] = b[0].max(0.0);
        z[0] = if b[0] > 0.0 { 1.0 } else { 0.0 };
    })
    .unwrap();
    let zero = TerminalSegment::zeros(&grid, n, 1, 1);
    let f2 = || {
        DriverSpec::new(1, 1, 1.0, PrimedMode::Unused, true, |a, o| {
            o[0] = a.y_ant[0]
        })
        .with_flags(MonotonicityFlags::ALL)
    };
    let r = comparison_run(
        &f2(),
        &f2(),
        &pos,
        &zero,
        &grid,
        &noise,
        &features,
        &cfg,
        4,
        &rng,
    )
    .unwrap();
    assert!(r.violation_fraction <= 1e-3, "{r:?}");
    assert!(r.bootstrap_violation_fraction <= 1e-3, "{r:?}");

    let same = comparison_run(
        &f2(),
        &f2(),
        &pos,
        &pos,
        &grid,
        &noise,
        &features,
        &cfg,
        0,
        &rng,
    )
    .unwrap();
    assert_eq!(same.violation_fraction, 0.0);
    assert_eq!(same.y0_1, same.y0_2);

    let shifted = DriverSpec::new(1, 1, 1.0, PrimedMode::Unused, false, |_, o| o[0] = 1.0);
    let base = DriverSpec::new(1, 1, 1.0, PrimedMode::Unused, false, |_, o| o[0] = 0.0)
        .with_flags(MonotonicityFlags::ALL);
    let r = comparison_run(
        &shifted, &base, &pos, &pos, &grid, &noise, &features, &cfg, 0, &rng,
    )
    .unwrap();
    assert!((r.y0_1 - r.y0_2 - 1.0).abs() <= 0.02, "{r:?}");

    // f₂ decreasing in y′ contradicts its declaration
    let liar = DriverSpec::new(1, 1, 1.0, PrimedMode::Affine, false, |a, o| {
        o[0] = -a.y_p[0]
    })
    .with_flags(MonotonicityFlags::ALL);
    let e = comparison_run(
        &f2(),
        &liar,
        &pos,
        &zero,
        &grid,
        &noise,
        &features,
        &cfg,
        0,
        &rng,
    );
    assert!(matches!(e, Err(Error::Precondition(_))));
}

#[test]
fn counterexample_value() {
    let r = counterexample_clark_ocone(
        100_000,
        0.01,
        &BackwardConfig::default(),
        &RandomSource::new(42),
    )
    .unwrap();
    let exact = 1.5 - 2.0 / (2.0 * std::f64::consts::PI).sqrt();
    assert!((r.y1_0 - exact).abs() <= 0.05, "{r:?}");
    assert_eq!(r.y2_0, 0.0);
    assert!(r.y2_0.is_sign_positive());
    assert!(r.violation);
    assert!((r.mean_xi1 + 0.7979).abs() <= 0.01, "{}", r.mean_xi1);
}
