//! Interacting-particle solvers for the mean-field delay SDE
//!
//!   dX_t = b(t, X_t, X_{t−δ}, P_{X_t}, P_{X_{t−δ}}, v_t, v_{t−δ})dt + σ(…)dB_t,  X = ξ on [−δ, 0],
//!
//! by direct Euler–Maruyama or by Picard iteration of the frozen-argument map,
//! and a residual check of the Itô formula for functionals Φ(x, μ).

use crate::coefficients::{probe_lipschitz, CoefficientSet, StateArgs};
use crate::control::ControlProcess;
use crate::error::{config, Error, Result};
use crate::grid::TimeGrid;
use crate::measure::{EmpiricalLaw, Subsample};
use crate::par;
use crate::paths::{InitialSegment, NodeArray};
use crate::rng::{sample_brownian, BrownianIncrements, IncrementStream, RandomSource};
use crate::stats::{mean_se, trapezoid_weights};

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardConfig {
    pub n_particles: usize,
    /// Weight of the Picard norm; `None` means 1 + 4C².
    pub beta: Option<f64>,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Run the Lipschitz probe on the coefficients before solving.
    pub probe_coefficients: bool,
}

impl ForwardConfig {
    pub fn new(n_particles: usize) -> Self {
        ForwardConfig {
            n_particles,
            beta: None,
            picard_tol: 1e-6,
            picard_max_iter: 50,
            probe_coefficients: false,
        }
    }

    pub fn beta_for(&self, lipschitz: f64) -> f64 {
        self.beta.unwrap_or(1.0 + 4.0 * lipschitz * lipschitz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(config(format!(
                "n_particles must be at least 2, got {}",
                self.n_particles
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(config("picard_tol must be positive"));
        }
        if matches!(self.beta, Some(b) if !(b > 0.0)) {
            return Err(config("beta must be positive"));
        }
        Ok(())
    }
}

/// Particle paths on [−δ, T] and, in Picard mode, the norm history.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    grid: TimeGrid,
    x: NodeArray,
    picard_norms: Vec<f64>,
}

impl ForwardSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    /// X at global nodes 0..=T.
    pub fn states(&self) -> &NodeArray {
        &self.x
    }
    pub fn n_particles(&self) -> usize {
        self.x.n_particles()
    }
    pub fn dim(&self) -> usize {
        self.x.width()
    }
    /// Empirical law of the ensemble at node `g`.
    pub fn law(&self, g: usize) -> EmpiricalLaw<'_> {
        EmpiricalLaw::new(self.x.at(g), self.dim()).expect("solutions are finite")
    }
    pub fn terminal(&self) -> &[f64] {
        self.x.at(self.grid.horizon_index())
    }
    pub fn picard_norms(&self) -> &[f64] {
        &self.picard_norms
    }
}

fn check_inputs(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    control: &ControlProcess,
    grid: &TimeGrid,
    cfg: &ForwardConfig,
    noise: &BrownianIncrements,
) -> Result<()> {
    cfg.validate()?;
    let dims = c.dims();
    let n = cfg.n_particles;
    if boundary.n_particles() != n || boundary.dim() != dims.state {
        return Err(config(format!(
            "initial segment is {} particles × {}, expected {n} × {}",
            boundary.n_particles(),
            boundary.dim(),
            dims.state
        )));
    }
    if boundary.values().last_node() != grid.zero_index() {
        return Err(config("initial segment does not match the grid"));
    }
    control.check_grid(grid, n)?;
    if control.dim() != dims.control {
        return Err(config(format!(
            "control has dimension {}, expected {}",
            control.dim(),
            dims.control
        )));
    }
    if noise.n_particles() != n
        || noise.dim() != dims.noise
        || noise.n_steps() < grid.horizon_steps()
        || (noise.dt() - grid.dt()).abs() > 1e-12 * grid.dt()
    {
        return Err(config(
            "Brownian increments do not match the grid or particle count",
        ));
    }
    if cfg.probe_coefficients {
        probe_lipschitz(c, 32, &RandomSource::new(0)).into_result()?;
    }
    Ok(())
}

/// One Euler step from node `g` into `out`: row i gets
/// `base_i + b(args_i)·dt + σ(args_i)·ΔB_i`, where the arguments (and the laws)
/// are read from `arg` at nodes g and g − D.
fn euler_step(
    c: &dyn CoefficientSet,
    grid: &TimeGrid,
    g: usize,
    base: &[f64],
    arg_now: &[f64],
    arg_delay: &[f64],
    control: &ControlProcess,
    dbs: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let dims = c.dims();
    let (m, d, k) = (dims.state, dims.noise, dims.control);
    let dt = grid.dt();
    let gd = g - grid.delay_steps();
    let law = EmpiricalLaw::new(arg_now, m)?;
    let law_d = EmpiricalLaw::new(arg_delay, m)?;
    let t = grid.time(g);
    let (u, ud) = (control.at(g), control.at(gd));
    par::for_each_row(out, m, m + m * d, |i, row, s| {
        let (b, sig) = s.split_at_mut(m);
        let a = StateArgs {
            t,
            x: &arg_now[i * m..(i + 1) * m],
            x_delay: &arg_delay[i * m..(i + 1) * m],
            law: &law,
            law_delay: &law_d,
            v: &u[i * k..(i + 1) * k],
            v_delay: &ud[i * k..(i + 1) * k],
        };
        c.drift(&a, b);
        c.diffusion(&a, sig);
        let db = &dbs[i * d..(i + 1) * d];
        for r in 0..m {
            let noise: f64 = (0..d).map(|j| sig[r * d + j] * db[j]).sum();
            row[r] = base[i * m + r] + b[r] * dt + noise;
        }
    });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step: g - grid.zero_index(),
            time: t,
        });
    }
    Ok(())
}

fn with_boundary(boundary: &InitialSegment, grid: &TimeGrid) -> NodeArray {
    let n = boundary.n_particles();
    let m = boundary.dim();
    let mut x = NodeArray::zeros(0, grid.horizon_index() + 1, n, m);
    let z = grid.zero_index();
    for g in 0..=z {
        x.at_mut(g).copy_from_slice(boundary.values().at(g));
    }
    x
}

/// Euler–Maruyama on fresh increments drawn from `rng`.
pub fn simulate_gmfdsde(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    control: &ControlProcess,
    grid: &TimeGrid,
    cfg: &ForwardConfig,
    rng: &RandomSource,
) -> Result<ForwardSolution> {
    let noise = sample_brownian(grid, cfg.n_particles, c.dims().noise, rng);
    simulate_with_noise(c, boundary, control, grid, cfg, &noise)
}

/// Euler–Maruyama on the given increments. The laws inside the coefficients
/// are the empirical laws of the ensemble at the current and delayed nodes.
pub fn simulate_with_noise(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    control: &ControlProcess,
    grid: &TimeGrid,
    cfg: &ForwardConfig,
    noise: &BrownianIncrements,
) -> Result<ForwardSolution> {
    check_inputs(c, boundary, control, grid, cfg, noise)?;
    let mut x = with_boundary(boundary, grid);
    let (z, h, dl) = (grid.zero_index(), grid.horizon_index(), grid.delay_steps());
    for g in z..h {
        let (past, next) = x.split_next(g);
        let now = past.at(g);
        euler_step(
            c,
            grid,
            g,
            now,
            now,
            past.at(g - dl),
            control,
            noise.step(g - z),
            next,
        )?;
    }
    Ok(ForwardSolution {
        grid: grid.clone(),
        x,
        picard_norms: Vec::new(),
    })
}

/// (E ∫_{−δ}^T e^{−βt}|a_t − b_t|² dt)^{1/2}, trapezoid rule in t.
pub fn beta_norm_forward(grid: &TimeGrid, a: &NodeArray, b: &NodeArray, beta: f64) -> f64 {
    let h = grid.horizon_index();
    let w = trapezoid_weights(h + 1, grid.dt());
    let n = a.n_particles() as f64;
    let mut acc = 0.0;
    for g in 0..=h {
        let sq = par::sum(a.n_particles(), |i| {
            a.get(g, i)
                .iter()
                .zip(b.get(g, i))
                .map(|(p, q)| (p - q) * (p - q))
                .sum()
        });
        acc += w[g] * (-beta * grid.time(g)).exp() * sq / n;
    }
    acc.sqrt()
}

/// Picard iteration x ↦ Φ(x): the coefficients (and their laws) are
/// evaluated along the frozen iterate x and integrated against the same
/// increments. Starts from ξ extended constantly past t = 0 and stops when the
/// β-weighted distance between successive iterates drops below `picard_tol`.
pub fn picard_solve_forward(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    control: &ControlProcess,
    grid: &TimeGrid,
    cfg: &ForwardConfig,
    rng: &RandomSource,
) -> Result<ForwardSolution> {
    let noise = sample_brownian(grid, cfg.n_particles, c.dims().noise, rng);
    picard_with_noise(c, boundary, control, grid, cfg, &noise)
}

pub fn picard_with_noise(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    control: &ControlProcess,
    grid: &TimeGrid,
    cfg: &ForwardConfig,
    noise: &BrownianIncrements,
) -> Result<ForwardSolution> {
    check_inputs(c, boundary, control, grid, cfg, noise)?;
    let beta = cfg.beta_for(c.lipschitz());
    let (z, h, dl) = (grid.zero_index(), grid.horizon_index(), grid.delay_steps());
    let mut frozen = with_boundary(boundary, grid);
    for g in z + 1..=h {
        let (prev, next) = frozen.step_pair_mut(g - 1);
        next.copy_from_slice(prev);
    }
    let mut next_iter = frozen.clone();
    let mut norms = Vec::new();
    for _ in 0..cfg.picard_max_iter {
        for g in z..h {
            let (past, out) = next_iter.split_next(g);
            euler_step(
                c,
                grid,
                g,
                past.at(g),
                frozen.at(g),
                frozen.at(g - dl),
                control,
                noise.step(g - z),
                out,
            )?;
        }
        let diff = beta_norm_forward(grid, &next_iter, &frozen, beta);
        norms.push(diff);
        std::mem::swap(&mut frozen, &mut next_iter);
        if diff < cfg.picard_tol {
            return Ok(ForwardSolution {
                grid: grid.clone(),
                x: frozen,
                picard_norms: norms,
            });
        }
    }
    Err(Error::NonConvergence { norms })
}

/// A functional Φ(x, μ) with the derivatives entering the Itô formula.
pub trait ItoFunctional: Sync {
    fn value(&self, x: &[f64], law: &EmpiricalLaw) -> f64;

    /// ∂_xΦ (length m).
    fn grad_x(&self, _x: &[f64], _law: &EmpiricalLaw, _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingPartial("Phi_x"))
    }

    /// ∂²_{xx}Φ (m × m).
    fn hess_x(&self, _x: &[f64], _law: &EmpiricalLaw, _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingPartial("Phi_xx"))
    }

    /// ∂_μΦ(x, μ)(y) (length m).
    fn measure_derivative(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingPartial("Phi_mu"))
    }

    /// ∂_y∂_μΦ(x, μ)(y) (m × m).
    fn measure_derivative_grad(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingPartial("Phi_ymu"))
    }

    /// The two measure derivatives do not depend on x, so every E′ term is
    /// computed once per node.
    fn measure_terms_separable(&self) -> bool {
        false
    }
}

/// Settings of [`verify_ito_formula`].
#[derive(Debug, Clone, PartialEq)]
pub struct ItoConfig {
    pub n_particles: usize,
    /// Deterministic initial value of the mean-field process.
    pub x0: Vec<f64>,
    /// Starting point x of the probe process X^{x, P_ξ}.
    pub x_probe: Vec<f64>,
    /// Co-particles per E′ average when the functional is not separable.
    pub interaction_budget: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItoReport {
    /// max over nodes of |mean_i(LHS − RHS)|.
    pub residual: f64,
    /// Standard error of the mean residual at the node attaining the max.
    pub standard_error: f64,
    /// max over nodes of mean_i |LHS − RHS| (pathwise discretization error).
    pub mean_abs_residual: f64,
    pub times: Vec<f64>,
    pub mean_residual: Vec<f64>,
}

/// Simulates the undelayed mean-field SDE with v ≡ 0 started at `x0`
/// together with the probe process started at `x_probe` (same noise, laws
/// from the ensemble) and accumulates both sides of the Itô formula for
/// Φ(X^x_s, P_{X_s}) node by node. Memory is O(N): no path is stored.
///
/// The right side carries, besides the four generator terms and
/// Σ∂_xΦ·σ·ΔB, the martingale part of the empirical law itself,
/// (1/N)Σ_j ∂_μΦ(X^x, μ, X^j)·σ(X^j)ΔB^j, which vanishes as N → ∞.
pub fn verify_ito_formula(
    c: &dyn CoefficientSet,
    phi: &dyn ItoFunctional,
    grid: &TimeGrid,
    cfg: &ItoConfig,
    rng: &RandomSource,
) -> Result<ItoReport> {
    let dims = c.dims();
    let (m, d) = (dims.state, dims.noise);
    let n = cfg.n_particles;
    if grid.delay_steps() != 0 {
        return Err(Error::Precondition("the Itô check needs δ = 0".into()));
    }
    if n < 2 || cfg.x0.len() != m || cfg.x_probe.len() != m {
        return Err(config(
            "Itô check needs N >= 2 and x0, x_probe of the state dimension",
        ));
    }
    let sep = phi.measure_terms_separable();
    let budget = cfg.interaction_budget.clamp(2, n);
    let mut x: Vec<f64> = cfg.x0.iter().copied().cycle().take(n * m).collect();
    let mut x_next = x.clone();
    {
        let law = EmpiricalLaw::new(&x, m)?;
        let mut buf = vec![0.0; m * m];
        let y = law.atom(0);
        for r in [
            phi.grad_x(y, &law, &mut buf[..m]),
            phi.hess_x(y, &law, &mut buf),
            phi.measure_derivative(y, &law, y, &mut buf[..m]),
            phi.measure_derivative_grad(y, &law, y, &mut buf),
        ] {
            if let Err(e) = r {
                return Err(config(format!("Itô functional: {e}")));
            }
        }
    }
    let phi0 = {
        let law = EmpiricalLaw::new(&x, m)?;
        phi.value(&cfg.x_probe, &law)
    };
    // probe state and accumulated right side per particle
    let w = m + 1;
    let mut probe: Vec<f64> = (0..n)
        .flat_map(|_| cfg.x_probe.iter().copied().chain([0.0]))
        .collect();
    let mut stream = IncrementStream::new(rng, n, d, grid.dt());
    let mut db = vec![0.0; n * d];
    let dt = grid.dt();
    let mut times = vec![grid.time(0)];
    let mut mean_res = vec![0.0];
    let (mut worst, mut worst_se, mut worst_abs) = (0.0f64, 0.0, 0.0f64);
    let scratch = 2 * m + m * d + 2 * m * m + m;

    for g in 0..grid.horizon_index() {
        stream.next_step(&mut db);
        let t = grid.time(g);
        let law = EmpiricalLaw::new(&x, m)?;
        // uncontrolled: v ≡ 0
        let no_v = vec![0.0; dims.control];
        // co-particle coefficients, evaluated once per node
        let coef: Vec<f64> = {
            let mut out = vec![0.0; n * (m + m * d)];
            par::for_each_row(&mut out, m + m * d, 0, |j, row, _| {
                let xj = &x[j * m..(j + 1) * m];
                let a = StateArgs {
                    t,
                    x: xj,
                    x_delay: xj,
                    law: &law,
                    law_delay: &law,
                    v: &no_v,
                    v_delay: &no_v,
                };
                let (b, s) = row.split_at_mut(m);
                c.drift(&a, b);
                c.diffusion(&a, s);
            });
            out
        };
        let sub = if sep {
            Subsample::all(n)
        } else {
            Subsample::draw(n, budget, &mut rng.aux(0x170_0000 + g as u64))?
        };
        // E′ terms for probe value `xp`: E′[∂_μΦ·b′], E′[tr(∂_y∂_μΦ σσ*′)], and
        // the empirical-law martingale increment
        let prime_terms = |xp: &[f64], buf: &mut [f64]| -> [f64; 3] {
            let (dm, rest) = buf.split_at_mut(m);
            let (dym, _) = rest.split_at_mut(m * m);
            let mut acc = [0.0; 3];
            for j in sub.iter() {
                let y = &x[j * m..(j + 1) * m];
                let (bj, sj) = coef[j * (m + m * d)..(j + 1) * (m + m * d)].split_at(m);
                let _ = phi.measure_derivative(xp, &law, y, dm);
                let _ = phi.measure_derivative_grad(xp, &law, y, dym);
                acc[0] += dm.iter().zip(bj).map(|(p, q)| p * q).sum::<f64>();
                acc[1] += trace_a_sst(dym, sj, m, d);
                let dbj = &db[j * d..(j + 1) * d];
                for r in 0..m {
                    acc[2] += dm[r] * (0..d).map(|l| sj[r * d + l] * dbj[l]).sum::<f64>();
                }
            }
            let k = sub.len() as f64;
            [acc[0] / k, acc[1] / k, acc[2] / k]
        };
        let shared = if sep {
            Some(prime_terms(&cfg.x_probe, &mut vec![0.0; m + m * m]))
        } else {
            None
        };

        par::for_each_row(&mut probe, w, scratch, |i, row, s| {
            let (xp, acc) = row.split_at_mut(m);
            let (b, s) = s.split_at_mut(m);
            let (sig, s) = s.split_at_mut(m * d);
            let (grad, s) = s.split_at_mut(m);
            let (hess, s) = s.split_at_mut(m * m);
            let a = StateArgs {
                t,
                x: xp,
                x_delay: xp,
                law: &law,
                law_delay: &law,
                v: &no_v,
                v_delay: &no_v,
            };
            c.drift(&a, b);
            c.diffusion(&a, sig);
            let _ = phi.grad_x(xp, &law, grad);
            let _ = phi.hess_x(xp, &law, hess);
            let pt = match shared {
                Some(v) => v,
                None => prime_terms(xp, s),
            };
            let dbi = &db[i * d..(i + 1) * d];
            let mut mart = 0.0;
            for r in 0..m {
                mart += grad[r] * (0..d).map(|l| sig[r * d + l] * dbi[l]).sum::<f64>();
            }
            let gen = grad.iter().zip(b.iter()).map(|(p, q)| p * q).sum::<f64>()
                + 0.5 * trace_a_sst(hess, sig, m, d)
                + pt[0]
                + 0.5 * pt[1];
            acc[0] += gen * dt + mart + pt[2];
            for r in 0..m {
                xp[r] += b[r] * dt + (0..d).map(|l| sig[r * d + l] * dbi[l]).sum::<f64>();
            }
        });
        par::for_each_row(&mut x_next, m, 0, |j, row, _| {
            let (bj, sj) = coef[j * (m + m * d)..(j + 1) * (m + m * d)].split_at(m);
            let dbj = &db[j * d..(j + 1) * d];
            for r in 0..m {
                row[r] =
                    x[j * m + r] + bj[r] * dt + (0..d).map(|l| sj[r * d + l] * dbj[l]).sum::<f64>();
            }
        });
        std::mem::swap(&mut x, &mut x_next);
        if x.iter().chain(probe.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: g, time: t });
        }
        let law = EmpiricalLaw::new(&x, m)?;
        let res: Vec<f64> = par::map(n, |i| {
            let row = &probe[i * w..(i + 1) * w];
            phi.value(&row[..m], &law) - phi0 - row[m]
        });
        let (mu, se) = mean_se(&res);
        let mabs = res.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
        if mu.abs() > worst {
            worst = mu.abs();
            worst_se = se;
        }
        worst_abs = worst_abs.max(mabs);
        times.push(grid.time(g + 1));
        mean_res.push(mu);
    }
    Ok(ItoReport {
        residual: worst,
        standard_error: worst_se,
        mean_abs_residual: worst_abs,
        times,
        mean_residual: mean_res,
    })
}

/// tr(A σσ*) for A (m × m) and σ (m × d).
fn trace_a_sst(a: &[f64], s: &[f64], m: usize, d: usize) -> f64 {
    let mut tr = 0.0;
    for r in 0..m {
        for c in 0..m {
            let ss: f64 = (0..d).map(|l| s[c * d + l] * s[r * d + l]).sum();
            tr += a[r * m + c] * ss;
        }
    }
    tr
}
