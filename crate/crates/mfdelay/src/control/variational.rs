use super::frame::{add_product, check_partials, Frame, Partials};
use crate::coefficients::{CoefficientSet, LawSlot};
use crate::control::{perturb_control, ControlProcess};
use crate::error::{config, Result};
use crate::forward::{simulate_with_noise, ForwardConfig, ForwardSolution};
use crate::grid::TimeGrid;
use crate::measure::Subsample;
use crate::par;
use crate::paths::{InitialSegment, NodeArray};
use crate::rng::{sample_brownian, BrownianIncrements, RandomSource};
use crate::stats::loglog_slope;

const SUBSAMPLE_TAG: u64 = 0x7a_0000_0000;

/// K on [−δ, T] per particle; zero on [−δ, 0].
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalSolution {
    grid: TimeGrid,
    k: NodeArray,
}

impl VariationalSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    /// K at global nodes 0..=T.
    pub fn values(&self) -> &NodeArray {
        &self.k
    }
    pub fn terminal(&self) -> &[f64] {
        self.k.at(self.grid.horizon_index())
    }
}

/// Euler scheme for the linearized state equation in the direction v − u,
///
///   dK = [b_x K + E′[∂_μb(Θ)(X′)K′] + b_{x_δ}K_{t−δ} + E′[∂_{μ_δ}b(Θ)(X′_{t−δ})K′_{t−δ}]
///         + b_v(v − u) + b_{v_δ}(v_{t−δ} − u_{t−δ})]dt + (σ-analogue)dB,
///
/// with the partials frozen along the base trajectory, which must have been
/// simulated under `u` with the increments `noise`. E′ runs over a seeded
/// subsample of `budget` co-particles unless the measure derivatives are
/// separable, in which case it is exact.
pub fn solve_variational(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    v: &ControlProcess,
    noise: &BrownianIncrements,
    budget: usize,
    rng: &RandomSource,
) -> Result<VariationalSolution> {
    let f = Frame::new(c, base, u)?;
    check_partials(c, &f)?;
    if !u.compatible(v) {
        return Err(config("controls differ in shape or initial segment"));
    }
    let grid = f.grid;
    let dims = f.dims;
    let (m, d, kd) = (dims.state, dims.noise, dims.control);
    let n = f.n();
    if noise.n_particles() != n || noise.dim() != d || noise.n_steps() < grid.horizon_steps() {
        return Err(config("Brownian increments do not match the base solution"));
    }
    let st = c.structure();
    let (z, h, dl) = (grid.zero_index(), grid.horizon_index(), grid.delay_steps());
    let dt = grid.dt();
    let sub = Subsample::draw(n, budget, &mut rng.aux(SUBSAMPLE_TAG))?;
    let mut k = NodeArray::zeros(0, h + 1, n, m);
    let md = m * d;
    for g in z..h {
        let gd = g - dl;
        // separable E′ terms: one pass over the atoms at this node
        let shared = if st.mean_field && st.separable_measure {
            Some(measure_terms(c, &f, &k, g, 0, &Subsample::all(n)))
        } else {
            None
        };
        let (past, next) = k.split_next(g);
        let (kn, kdl) = (past.at(g), past.at(gd));
        let db = noise.step(g - z);
        par::for_each_row(next, m, m + md + m + md + kd, |i, row, s| {
            let (drift, rest) = s.split_at_mut(m);
            let (diff, rest) = rest.split_at_mut(md);
            let (mb, rest) = rest.split_at_mut(m);
            let (ms, dv) = rest.split_at_mut(md);
            let ki = &kn[i * m..(i + 1) * m];
            let kdi = &kdl[i * m..(i + 1) * m];
            Partials::at(dims, c, &f.args(g, i), &f.cost_args(g, i), |p| {
                drift.fill(0.0);
                diff.fill(0.0);
                add_product(&p.b.x, ki, m, drift);
                add_product(&p.s.x, ki, m, diff);
                if st.delayed {
                    add_product(&p.b.x_delay, kdi, m, drift);
                    add_product(&p.s.x_delay, kdi, m, diff);
                }
                for (o, (a, b)) in dv.iter_mut().zip(v.get(g, i).iter().zip(u.get(g, i))) {
                    *o = a - b;
                }
                add_product(&p.b.v, dv, kd, drift);
                add_product(&p.s.v, dv, kd, diff);
                if st.delayed {
                    for (o, (a, b)) in dv.iter_mut().zip(v.get(gd, i).iter().zip(u.get(gd, i))) {
                        *o = a - b;
                    }
                    add_product(&p.b.v_delay, dv, kd, drift);
                    add_product(&p.s.v_delay, dv, kd, diff);
                }
            });
            if st.mean_field {
                match &shared {
                    Some((b, s)) => {
                        mb.copy_from_slice(b);
                        ms.copy_from_slice(s);
                    }
                    None => {
                        let (b, s) = measure_terms_view(c, &f, (kn, kdl), g, i, &sub);
                        mb.copy_from_slice(&b);
                        ms.copy_from_slice(&s);
                    }
                }
                for r in 0..m {
                    drift[r] += mb[r];
                }
                for (a, b) in diff.iter_mut().zip(ms.iter()) {
                    *a += b;
                }
            }
            let dbi = &db[i * d..(i + 1) * d];
            for r in 0..m {
                row[r] =
                    ki[r] + drift[r] * dt + (0..d).map(|l| diff[r * d + l] * dbi[l]).sum::<f64>();
            }
        });
    }
    Ok(VariationalSolution {
        grid: grid.clone(),
        k,
    })
}

fn measure_terms(
    c: &dyn CoefficientSet,
    f: &Frame,
    k: &NodeArray,
    g: usize,
    i: usize,
    sub: &Subsample,
) -> (Vec<f64>, Vec<f64>) {
    measure_terms_view(c, f, (k.at(g), k.at(g - f.grid.delay_steps())), g, i, sub)
}

/// (E′[∂_μb(Θ_i)(X′)K′ + ∂_{μ_δ}b(Θ_i)(X′_δ)K′_δ], σ-analogue).
fn measure_terms_view(
    c: &dyn CoefficientSet,
    f: &Frame,
    (kn, kdl): (&[f64], &[f64]),
    g: usize,
    i: usize,
    sub: &Subsample,
) -> (Vec<f64>, Vec<f64>) {
    let dims = f.dims;
    let (m, md) = (dims.state, dims.state * dims.noise);
    let gd = g - f.grid.delay_steps();
    let a = f.args(g, i);
    let mut jb = vec![0.0; m * m];
    let mut js = vec![0.0; md * m];
    let mut acc = vec![0.0; m + md];
    sub.average_into(&mut acc, |j, acc| {
        for (slot, node, kk) in [(LawSlot::Current, g, kn), (LawSlot::Delayed, gd, kdl)] {
            let y = f.x(node, j);
            let kj = &kk[j * m..(j + 1) * m];
            c.drift_measure_derivative(&a, slot, y, &mut jb)
                .expect("partials checked");
            c.diffusion_measure_derivative(&a, slot, y, &mut js)
                .expect("partials checked");
            let (ab, as_) = acc.split_at_mut(m);
            add_product(&jb, kj, m, ab);
            add_product(&js, kj, m, as_);
        }
    });
    let s = acc.split_off(m);
    (acc, s)
}

/// E[sup_t |X^θ_t − X^u_t|²] for each θ, on common noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    /// Log-log slope of the values against θ.
    pub slope: f64,
}

impl PerturbationReport {
    /// Values nonincreasing as θ decreases and slope within 2 ± `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        let monotone = self.values.windows(2).all(|w| w[1] <= w[0]);
        monotone && (self.slope - 2.0).abs() <= tol
    }
}

fn check_thetas(thetas: &[f64]) -> Result<()> {
    if thetas.is_empty() || thetas.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(config("thetas must lie in (0, 1]"));
    }
    if thetas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config("thetas must be strictly decreasing"));
    }
    Ok(())
}

fn sup_sq(
    a: &NodeArray,
    b: impl Fn(usize, usize) -> Vec<f64> + Sync,
    nodes: std::ops::RangeInclusive<usize>,
) -> f64 {
    let n = a.n_particles();
    par::sum(n, |i| {
        nodes
            .clone()
            .map(|g| {
                let bv = b(g, i);
                a.get(g, i)
                    .iter()
                    .zip(&bv)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }) / n as f64
}

/// Simulates X^θ under u + θ(v − u) for each θ on the noise of X^u and
/// reports E[sup_t |X^θ_t − X^u_t|²].
pub fn perturbation_convergence_check(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    u: &ControlProcess,
    v: &ControlProcess,
    thetas: &[f64],
    grid: &TimeGrid,
    cfg: &ForwardConfig,
    rng: &RandomSource,
) -> Result<PerturbationReport> {
    check_thetas(thetas)?;
    let noise = sample_brownian(grid, cfg.n_particles, c.dims().noise, rng);
    let base = simulate_with_noise(c, boundary, u, grid, cfg, &noise)?;
    let nodes = grid.zero_index()..=grid.horizon_index();
    let values = thetas
        .iter()
        .map(|&th| {
            let x =
                simulate_with_noise(c, boundary, &perturb_control(u, v, th)?, grid, cfg, &noise)?;
            Ok(sup_sq(
                x.states(),
                |g, i| base.states().get(g, i).to_vec(),
                nodes.clone(),
            ))
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = slope_or_nan(thetas, &values);
    Ok(PerturbationReport {
        thetas: thetas.to_vec(),
        values,
        slope,
    })
}

fn slope_or_nan(thetas: &[f64], values: &[f64]) -> f64 {
    if thetas.len() < 2 || values.iter().any(|v| !(*v > 0.0)) {
        f64::NAN
    } else {
        loglog_slope(thetas, values)
    }
}

/// E[sup_t |(X^θ_t − X^u_t)/θ − K_t|²] for each θ.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalReport {
    pub thetas: Vec<f64>,
    pub discrepancy: Vec<f64>,
    pub slope: f64,
}

impl VariationalReport {
    pub fn decreasing(&self) -> bool {
        self.discrepancy.windows(2).all(|w| w[1] < w[0])
    }
}

/// Difference quotients of the state against the variational process, all
/// on the noise of the base run.
pub fn variational_consistency_check(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    u: &ControlProcess,
    v: &ControlProcess,
    thetas: &[f64],
    grid: &TimeGrid,
    cfg: &ForwardConfig,
    budget: usize,
    rng: &RandomSource,
) -> Result<VariationalReport> {
    check_thetas(thetas)?;
    let noise = sample_brownian(grid, cfg.n_particles, c.dims().noise, rng);
    let base = simulate_with_noise(c, boundary, u, grid, cfg, &noise)?;
    let k = solve_variational(c, &base, u, v, &noise, budget, rng)?;
    let nodes = grid.zero_index()..=grid.horizon_index();
    let discrepancy = thetas
        .iter()
        .map(|&th| {
            let x =
                simulate_with_noise(c, boundary, &perturb_control(u, v, th)?, grid, cfg, &noise)?;
            let q = |g: usize, i: usize| -> Vec<f64> {
                x.states()
                    .get(g, i)
                    .iter()
                    .zip(base.states().get(g, i))
                    .map(|(a, b)| (a - b) / th)
                    .collect()
            };
            Ok(sup_sq(k.values(), q, nodes.clone()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = slope_or_nan(thetas, &discrepancy);
    Ok(VariationalReport {
        thetas: thetas.to_vec(),
        discrepancy,
        slope,
    })
}
