use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    solve_mfabsde, solve_with_anticipation, Anticipation, BackwardConfig, BackwardProblem,
    BackwardSolution, CoParticles, Driver, DriverArgs, DriverInputs, DriverSpec,
};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::{NodeArray, TerminalSegment};
use crate::rng::{sample_brownian, BrownianIncrements, RandomSource};
use crate::stats::mean_se;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Fraction of (particle, node) pairs with Y¹ < Y² − 3σ_MC.
    pub violation_fraction: f64,
    /// Same statistic over consecutive members of Y¹, Y⁽³⁾, Y⁽⁴⁾, ….
    pub bootstrap_violation_fraction: f64,
    pub y0_1: f64,
    pub y0_2: f64,
    /// Y₀ of Y⁽³⁾, Y⁽⁴⁾, ….
    pub bootstrap_y0: Vec<f64>,
    /// max_t E|Y⁽ⁿ⁾ − Y²| for the last bootstrap member.
    pub bootstrap_gap: f64,
    /// Node times on [0, T+K] and the cross-sectional means of Y¹ and Y².
    pub times: Vec<f64>,
    pub y1_mean: Vec<f64>,
    pub y2_mean: Vec<f64>,
}

/// Fraction of (particle, node) pairs where `a < b − 3σ_k`, σ_k the standard
/// error of a − b at node k.
fn violations(a: &NodeArray, b: &NodeArray) -> (usize, usize) {
    let (mut bad, mut total) = (0, 0);
    for g in a.first_node()..=a.last_node() {
        let diff: Vec<f64> = a.at(g).iter().zip(b.at(g)).map(|(x, y)| x - y).collect();
        let (_, se) = mean_se(&diff);
        bad += diff.iter().filter(|&&d| d < -3.0 * se).count();
        total += diff.len();
    }
    (bad, total)
}

fn probe_order<F1, F2>(
    d1: &DriverSpec<F1>,
    d2: &DriverSpec<F2>,
    n_probes: usize,
    rng: &RandomSource,
) -> Result<()>
where
    F1: Fn(&DriverArgs, &mut [f64]) + Sync,
    F2: Fn(&DriverArgs, &mut [f64]) + Sync,
{
    let (m, d) = (d1.dim(), d1.noise_dim());
    let mut r = rng.aux(0xc0_3a7e);
    let mut o1 = vec![0.0; m];
    let mut o2 = vec![0.0; m];
    for _ in 0..n_probes {
        let mut g =
            |k: usize| -> Vec<f64> { (0..k).map(|_| r.sample::<f64, _>(StandardNormal)).collect() };
        let v: Vec<Vec<f64>> = [m, m * d, m, m * d, m, m * d, m, m * d]
            .iter()
            .map(|&k| g(k))
            .collect();
        let a = DriverArgs {
            t: 0.5,
            y: &v[0],
            z: &v[1],
            y_ant: &v[2],
            z_ant: &v[3],
            y_p: &v[4],
            z_p: &v[5],
            y_ant_p: &v[6],
            z_ant_p: &v[7],
        };
        d1.call(&a, &mut o1);
        d2.call(&a, &mut o2);
        if o1
            .iter()
            .zip(&o2)
            .any(|(x, y)| *x < y - 1e-12 * y.abs().max(1.0))
        {
            return Err(Error::Precondition("f1 >= f2 fails on a probe".into()));
        }
    }
    Ok(())
}

/// Solves both equations on common noise and checks Y¹ ≥ Y²; then runs the
/// monotone bootstrap Y⁽³⁾, Y⁽⁴⁾, … in which Y⁽ⁿ⁾ solves the second equation
/// with its anticipated arguments (own and primed) taken from Y⁽ⁿ⁻¹⁾,
/// starting from Y¹, and checks Y¹ ≥ Y⁽³⁾ ≥ Y⁽⁴⁾ ≥ ….
#[allow(clippy::too_many_arguments)]
pub fn comparison_run<F1, F2>(
    d1: &DriverSpec<F1>,
    d2: &DriverSpec<F2>,
    terminal1: &TerminalSegment,
    terminal2: &TerminalSegment,
    grid: &TimeGrid,
    noise: &BrownianIncrements,
    features: &NodeArray,
    cfg: &BackwardConfig,
    bootstrap_steps: usize,
    rng: &RandomSource,
) -> Result<ComparisonReport>
where
    F1: Fn(&DriverArgs, &mut [f64]) + Sync,
    F2: Fn(&DriverArgs, &mut [f64]) + Sync,
{
    if !d2.flags.all() {
        return Err(Error::Precondition(
            "driver 2 must declare restrictions (i)-(vi)".into(),
        ));
    }
    d2.check_flags(64, rng)?;
    probe_order(d1, d2, 64, rng)?;
    let ordered = terminal1
        .y()
        .data()
        .iter()
        .zip(terminal2.y().data())
        .all(|(a, b)| a >= b);
    if !ordered {
        return Err(Error::Precondition(
            "terminal data are not ordered (xi1 >= xi2)".into(),
        ));
    }
    let p1 = BackwardProblem {
        grid,
        noise,
        features,
        terminal: terminal1,
    };
    let p2 = BackwardProblem {
        grid,
        noise,
        features,
        terminal: terminal2,
    };
    let s1 = solve_mfabsde(d1, &p1, cfg, rng)?;
    let s2 = solve_mfabsde(d2, &p2, cfg, rng)?;
    let (bad, total) = violations(&s1.y, &s2.y);

    let mut chain: Vec<BackwardSolution> = Vec::new();
    let (mut bbad, mut btotal) = (0, 0);
    for step in 0..bootstrap_steps {
        let prev = chain.last().unwrap_or(&s1);
        let next = solve_with_anticipation(d2, &p2, cfg, rng, Anticipation::External(prev))?;
        let (b, t) = violations(&prev.y, &next.y);
        bbad += b;
        btotal += t;
        chain.push(next);
        if step > 0 && chain[step].y == chain[step - 1].y {
            break;
        }
    }
    let gap = chain.last().map_or(0.0, |last| {
        (grid.zero_index()..=grid.end_index())
            .map(|g| {
                let v: f64 = last
                    .y
                    .at(g)
                    .iter()
                    .zip(s2.y.at(g))
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                v / last.y.n_particles() as f64
            })
            .fold(0.0, f64::max)
    });
    Ok(ComparisonReport {
        violation_fraction: bad as f64 / total as f64,
        bootstrap_violation_fraction: if btotal == 0 {
            0.0
        } else {
            bbad as f64 / btotal as f64
        },
        y0_1: s1.y0()[0],
        y0_2: s2.y0()[0],
        bootstrap_y0: chain.iter().map(|s| s.y0()[0]).collect(),
        bootstrap_gap: gap,
        times: (grid.zero_index()..=grid.end_index())
            .map(|g| grid.time(g))
            .collect(),
        y1_mean: (grid.zero_index()..=grid.end_index())
            .map(|g| s1.y.node_mean(g)[0])
            .collect(),
        y2_mean: (grid.zero_index()..=grid.end_index())
            .map(|g| s2.y.node_mean(g)[0])
            .collect(),
    })
}

/// The driver −E′[Z′_{s+ζ(s)}].
struct NegMeanAnticipatedZ;

impl Driver for NegMeanAnticipatedZ {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn uses_co_particles(&self) -> bool {
        true
    }
    fn co_aggregates(&self, co: &CoParticles) -> Vec<f64> {
        let n = co.len();
        vec![crate::par::sum(n, |j| co.z_anticipated(j)[0]) / n as f64]
    }
    fn eval(&self, _inp: &DriverInputs, _co: &CoParticles, agg: &[f64], out: &mut [f64]) {
        out[0] = 0.0 - agg[0];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub y1_0: f64,
    pub y2_0: f64,
    /// Y₀¹ > Y₀² although ξ₁ ≤ ξ₂.
    pub violation: bool,
    /// Sample mean and standard error of ξ₁ = −(B₁⁺)³.
    pub mean_xi1: f64,
    pub se_xi1: f64,
    pub times: Vec<f64>,
    pub y1_mean: Vec<f64>,
    pub z1_mean: Vec<f64>,
}

/// Solves Y = ξ + ∫E′[−Z′_{s+ζ(s)}]ds − ∫Z dB on [0, 1] with ζ ≡ 0.25
/// clamped at 1, for ξ₁ = −(B₁⁺)³ (η₁ = −3(B₁⁺)² at T) and ξ₂ = 0.
pub fn counterexample_clark_ocone(
    n: usize,
    dt: f64,
    cfg: &BackwardConfig,
    rng: &RandomSource,
) -> Result<CounterexampleReport> {
    let grid = TimeGrid::new(1.0, 0.0, 0.0, dt)?.with_anticipation(|_| 0.25, |_| 0.25, true)?;
    let noise = sample_brownian(&grid, n, 1, rng);
    let features = noise.path(&grid);
    let t1 = TerminalSegment::from_brownian(&grid, &noise, 1, |_, b, y, z| {
        let p = b[0].max(0.0);
        y[0] = -p * p * p;
        z[0] = -3.0 * p * p;
    })?;
    let t2 = TerminalSegment::zeros(&grid, n, 1, 1);
    let xi: Vec<f64> = t1.y().at(grid.horizon_index()).to_vec();
    let (mean_xi1, se_xi1) = mean_se(&xi);
    let s1 = solve_mfabsde(
        &NegMeanAnticipatedZ,
        &BackwardProblem {
            grid: &grid,
            noise: &noise,
            features: &features,
            terminal: &t1,
        },
        cfg,
        rng,
    )?;
    let s2 = solve_mfabsde(
        &NegMeanAnticipatedZ,
        &BackwardProblem {
            grid: &grid,
            noise: &noise,
            features: &features,
            terminal: &t2,
        },
        cfg,
        rng,
    )?;
    let (y1_0, y2_0) = (s1.y0()[0], s2.y0()[0]);
    let nodes = grid.zero_index()..=grid.horizon_index();
    Ok(CounterexampleReport {
        y1_0,
        y2_0,
        violation: y1_0 > y2_0,
        mean_xi1,
        se_xi1,
        times: nodes.clone().map(|g| grid.time(g)).collect(),
        y1_mean: nodes.clone().map(|g| s1.y.node_mean(g)[0]).collect(),
        z1_mean: nodes.map(|g| s1.z.node_mean(g)[0]).collect(),
    })
}
