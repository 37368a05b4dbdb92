use rand::Rng;
use rand_distr::StandardNormal;

use super::adjoint::solve_adjoint;
use super::cost::{cost_functional, Estimate};
use super::smp::{control_gradient, hamiltonian};
use super::ControlConfig;
use crate::coefficients::{CoefficientSet, StateArgs};
use crate::control::ControlProcess;
use crate::error::{config, Error, Result};
use crate::forward::{simulate_with_noise, ForwardSolution};
use crate::grid::TimeGrid;
use crate::measure::EmpiricalLaw;
use crate::paths::InitialSegment;
use crate::regression::Projector;
use crate::rng::{sample_brownian, BrownianIncrements, RandomSource};
use crate::stats::trapezoid_weights;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub step: f64,
    pub max_iter: usize,
    /// Stop when the RMS of the projected gradient, (E∫|Δu|²dt)^{1/2}/step,
    /// falls below this.
    pub tol: f64,
    /// Consecutive increases of J that trigger a step halving.
    pub patience: usize,
    pub max_halvings: usize,
    /// Rises of J below max(3σ of the paired difference, `rise_tol`·|J|)
    /// do not count as increases.
    pub rise_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step: 0.25,
            max_iter: 100,
            tol: 1e-4,
            patience: 5,
            rise_tol: 1e-4,
            max_halvings: 4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite())
            || !(self.tol > 0.0)
            || self.patience == 0
            || !(self.rise_tol >= 0.0)
        {
            return Err(config("optimizer step, tol and patience must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Best iterate and its state trajectory.
    pub control: ControlProcess,
    pub solution: ForwardSolution,
    pub cost: Estimate,
    /// J after every accepted or rejected iterate, starting with J(u0).
    pub history: Vec<f64>,
    /// Projected-gradient RMS per iteration.
    pub gradient_norms: Vec<f64>,
    pub step: f64,
    pub halvings: usize,
    pub converged: bool,
    /// The increments every iterate was simulated with.
    pub noise: BrownianIncrements,
}

/// Projected gradient descent on u ↦ J(u) with common noise: per iteration
/// forward solve, adjoint solve, gradient g = H_v + E_t[H_{v_δ}|_{t+δ}], and
/// u ← Project_U(fit(u − step·g)), where `fit` regresses each node on the
/// node's control features so the iterate stays a feedback of them.
/// Five (`patience`) consecutive increases of J beyond 3σ of the paired
/// difference (and beyond `rise_tol` relative) halve the step and restart from the best iterate; more than `max_halvings` halvings is a
/// non-convergence error carrying the J history. Returns the last iterate
/// when the gradient tolerance is met and the best one otherwise.
pub fn optimize_control(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    u0: &ControlProcess,
    grid: &TimeGrid,
    cfg: &ControlConfig,
    opt: &OptimizerConfig,
    rng: &RandomSource,
) -> Result<OptimizeResult> {
    opt.validate()?;
    let noise = sample_brownian(grid, cfg.forward.n_particles, c.dims().noise, rng);
    let simulate = |u: &ControlProcess| -> Result<(ForwardSolution, Estimate)> {
        let sol = simulate_with_noise(c, boundary, u, grid, &cfg.forward, &noise)?;
        let j = cost_functional(c, &sol, u)?;
        Ok((sol, j))
    };
    let (z, h) = (grid.zero_index(), grid.horizon_index());
    let w = trapezoid_weights(h - z + 1, grid.dt());
    let n = cfg.forward.n_particles;
    let k = u0.dim();
    let mut u = u0.clone();
    let (mut sol, j) = simulate(&u)?;
    let mut history = vec![j.value];
    let mut gradient_norms = Vec::new();
    let mut best = (u.clone(), sol.clone(), j.clone());
    let mut current = j;
    let mut step = opt.step;
    let (mut increases, mut halvings) = (0, 0);
    let mut converged = false;
    let mut target = vec![0.0; n * k];
    let mut fitted = vec![0.0; n * k];
    for it in 0..opt.max_iter {
        let features = cfg.features.build(&sol, &u);
        let adj = solve_adjoint(
            c,
            &sol,
            &u,
            &noise,
            &features,
            &cfg.backward,
            &rng.derive(it as u64 + 1),
        )?;
        let grad = control_gradient(c, &sol, &u, &adj, &features, &cfg.backward.basis)?;
        let mut next = u.clone();
        let mut moved = 0.0;
        for g in z..=h {
            for ((t, a), b) in target.iter_mut().zip(u.at(g)).zip(grad.at(g)) {
                *t = a - step * b;
            }
            Projector::fit(features.at(g), features.width(), &cfg.backward.basis).project(
                features.at(g),
                &target,
                k,
                &mut fitted,
            );
            next.set_node(g, &fitted);
            moved += w[g - z]
                * next
                    .at(g)
                    .iter()
                    .zip(u.at(g))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                / n as f64;
        }
        let gnorm = moved.sqrt() / step;
        gradient_norms.push(gnorm);
        let (sol_n, j_n) = simulate(&next)?;
        history.push(j_n.value);
        let rise = j_n.paired_difference(&current);
        if rise.value > (3.0 * rise.standard_error).max(opt.rise_tol * current.value.abs()) {
            increases += 1;
        } else {
            increases = 0;
        }
        if j_n.value < best.2.value {
            best = (next.clone(), sol_n.clone(), j_n.clone());
        }
        if increases >= opt.patience {
            halvings += 1;
            if halvings > opt.max_halvings {
                return Err(Error::NonConvergence { norms: history });
            }
            step *= 0.5;
            increases = 0;
            (u, sol, current) = best.clone();
            continue;
        }
        u = next;
        sol = sol_n;
        current = j_n;
        if gnorm <= opt.tol {
            converged = true;
            break;
        }
    }
    // a converged run ends at a stationary point of the adjoint gradient, which
    // can sit a hair above the lowest sampled J; otherwise keep the best
    let (control, solution, cost) = if converged { (u, sol, current) } else { best };
    Ok(OptimizeResult {
        control,
        solution,
        cost,
        history,
        gradient_norms,
        step,
        halvings,
        converged,
        noise,
    })
}

/// V(0, x0) = x0²/(1+T) + ln(1+T) for dX = u dt + dB, J = E[∫u²dt + X_T²],
/// from P_t = 1/(1+T−t).
pub fn lq_riccati_value(x0: f64, horizon: f64) -> f64 {
    x0 * x0 / (1.0 + horizon) + (1.0 + horizon).ln()
}

/// u*_t = −X_t/(1+T−t).
pub fn lq_riccati_feedback(t: f64, x: f64, horizon: f64) -> f64 {
    -x / (1.0 + horizon - t)
}

/// Minimal cost of the Euler-discretized delayed problem X_{j+1} = X_j +
/// u_{j−D}dt + sΔB_j, J = E[Σ_j w_j u_j² + X_T²] (trapezoid weights w, u ≡ 0
/// before t = 0), by dynamic programming on Y_j = X_j + Σ_{i=j−D}^{j−1} u_i dt,
/// which obeys Y_{j+1} = Y_j + u_j dt + sΔB_j and equals X_T from j = n − D on.
pub fn delayed_lq_dp_value(x0: f64, s: f64, grid: &TimeGrid) -> f64 {
    let (n, d, dt) = (grid.horizon_steps(), grid.delay_steps(), grid.dt());
    let w = trapezoid_weights(n + 1, dt);
    let start = n.saturating_sub(d);
    let mut p = 1.0;
    let mut cst = (n - start) as f64 * dt * s * s;
    for j in (0..start).rev() {
        cst += p * dt * s * s;
        p = p * w[j] / (w[j] + p * dt * dt);
    }
    p * x0 * x0 + cst
}

/// Adapted random controls v = Project_U(u + scale·(a + b·X_t + c·t)) with
/// standard normal (a, b, c) per probe and per control component, X_t read
/// from `base`. Probes are built lazily, one full control at a time.
pub fn random_probes<'a>(
    base: &'a ForwardSolution,
    u: &'a ControlProcess,
    count: usize,
    scale: f64,
    rng: &RandomSource,
) -> impl Iterator<Item = ControlProcess> + 'a {
    let grid = base.grid();
    let (z, h) = (grid.zero_index(), grid.horizon_index());
    let (m, k) = (base.dim(), u.dim());
    let mut r = rng.aux(0x9b0b);
    (0..count).map(move |_| {
        let coef: Vec<[f64; 3]> = (0..k)
            .map(|_| {
                [
                    r.sample(StandardNormal),
                    r.sample(StandardNormal),
                    r.sample(StandardNormal),
                ]
            })
            .collect();
        let mut v = u.clone();
        let mut row = vec![0.0; u.n_particles() * k];
        for g in z..=h {
            let t = grid.time(g);
            for (i, out) in row.chunks_mut(k.max(1)).enumerate().take(u.n_particles()) {
                let x = base.states().get(g, i);
                for (c, o) in out.iter_mut().enumerate() {
                    let xs = x[c.min(m - 1)];
                    *o = u.get(g, i)[c] + scale * (coef[c][0] + coef[c][1] * xs + coef[c][2] * t);
                }
            }
            if k > 0 {
                v.set_node(g, &row);
            }
        }
        v
    })
}

/// Midpoint-convexity probe of (x, x_δ, v, v_δ) ↦ H(Θ, p, q) for random p, q
/// and of x ↦ Φ(x, μ), at a fixed random law. Returns the worst violation
/// (positive when convexity fails).
pub fn convexity_probe(c: &dyn CoefficientSet, n_probes: usize, rng: &RandomSource) -> Result<f64> {
    let dims = c.dims();
    let (m, d, k) = (dims.state, dims.noise, dims.control);
    let mut r = rng.aux(0xc0de);
    let mut g = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| r.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let atoms = g(16 * m);
    let atoms_d = g(16 * m);
    let law = EmpiricalLaw::new(&atoms, m)?;
    let law_d = EmpiricalLaw::new(&atoms_d, m)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_probes {
        let (p, q) = (g(m), g(m * d));
        let a: Vec<Vec<f64>> = vec![g(m), g(m), g(k), g(k)];
        let b: Vec<Vec<f64>> = vec![g(m), g(m), g(k), g(k)];
        let mid: Vec<Vec<f64>> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x.iter().zip(y).map(|(s, t)| 0.5 * (s + t)).collect())
            .collect();
        let eval = |v: &[Vec<f64>]| -> Result<f64> {
            let args = StateArgs {
                t: 0.5,
                x: &v[0],
                x_delay: &v[1],
                law: &law,
                law_delay: &law_d,
                v: &v[2],
                v_delay: &v[3],
            };
            Ok(hamiltonian(c, &args, &p, &q)?.value)
        };
        let (ha, hb, hm) = (eval(&a)?, eval(&b)?, eval(&mid)?);
        worst = worst.max(hm - 0.5 * (ha + hb) - 1e-12 * (1.0 + ha.abs() + hb.abs()));
        let (fa, fb, fm) = (
            c.terminal_cost(&a[0], &law),
            c.terminal_cost(&b[0], &law),
            c.terminal_cost(&mid[0], &law),
        );
        worst = worst.max(fm - 0.5 * (fa + fb) - 1e-12 * (1.0 + fa.abs() + fb.abs()));
    }
    Ok(worst)
}

/// J(u*) against J(v) for random admissible v, on the optimizer's noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficiencyReport {
    pub convexity_violation: f64,
    /// min over probes of (J(v) − J(u*)) / se of the paired difference.
    pub worst_z_score: f64,
    pub probes: usize,
}

impl SufficiencyReport {
    pub fn holds(&self) -> bool {
        self.convexity_violation <= 0.0 && self.worst_z_score >= -3.0
    }
}

pub fn sufficiency_check(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    result: &OptimizeResult,
    cfg: &ControlConfig,
    probes: usize,
    scale: f64,
    rng: &RandomSource,
) -> Result<SufficiencyReport> {
    let grid = result.solution.grid();
    let convexity_violation = convexity_probe(c, 256, rng)?;
    let mut worst = f64::INFINITY;
    for v in random_probes(&result.solution, &result.control, probes, scale, rng) {
        let sol = simulate_with_noise(c, boundary, &v, grid, &cfg.forward, &result.noise)?;
        let jv = cost_functional(c, &sol, &v)?;
        let diff = jv.paired_difference(&result.cost);
        let z = if diff.standard_error > 0.0 {
            diff.value / diff.standard_error
        } else if diff.value >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        worst = worst.min(z);
    }
    Ok(SufficiencyReport {
        convexity_violation,
        worst_z_score: worst,
        probes,
    })
}

/// RMS over nodes and particles of u − u_ref(t, X_t) along `sol`.
pub fn feedback_rms(
    sol: &ForwardSolution,
    u: &ControlProcess,
    reference: impl Fn(f64, f64) -> f64,
) -> f64 {
    let grid = sol.grid();
    let (z, h) = (grid.zero_index(), grid.horizon_index());
    let n = sol.n_particles();
    let mut acc = 0.0;
    for g in z..=h {
        let t = grid.time(g);
        for i in 0..n {
            acc += (u.get(g, i)[0] - reference(t, sol.states().get(g, i)[0])).powi(2);
        }
    }
    (acc / ((h - z + 1) * n) as f64).sqrt()
}
