use super::{
    BackwardConfig, BackwardProblem, BackwardSolution, CoParticles, Diagnostics, Driver,
    DriverInputs, FutureView,
};
use crate::error::{config, Error, Result};
use crate::grid::TimeGrid;
use crate::measure::Subsample;
use crate::par;
use crate::paths::NodeArray;
use crate::regression::Projector;
use crate::rng::RandomSource;
use crate::stats::trapezoid_weights;

const SUBSAMPLE_TAG: u64 = 0xba_c000_0000;

/// Where own and primed anticipated values come from.
#[derive(Debug, Clone, Copy)]
pub enum Anticipation<'a> {
    /// Own values from the current sweep, primed values from the frozen
    /// iterate.
    Internal,
    /// Both from a given solution (the bootstrap of the comparison proof).
    External(&'a BackwardSolution),
}

/// (E ∫_0^{T+K} (|ΔY|² + |ΔZ|²) e^{βs} ds)^{1/2}, trapezoid rule.
pub fn beta_norm_backward(
    grid: &TimeGrid,
    a: (&NodeArray, &NodeArray),
    b: (&NodeArray, &NodeArray),
    beta: f64,
) -> f64 {
    let (z, e) = (grid.zero_index(), grid.end_index());
    let w = trapezoid_weights(e - z + 1, grid.dt());
    let n = a.0.n_particles();
    // summed in log space: e^{βs} overflows for the large β of clamped maps
    let mut terms = Vec::with_capacity(e - z + 1);
    for g in z..=e {
        let sq = par::sum(n, |i| {
            let dy: f64 =
                a.0.get(g, i)
                    .iter()
                    .zip(b.0.get(g, i))
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum();
            let dz: f64 =
                a.1.get(g, i)
                    .iter()
                    .zip(b.1.get(g, i))
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum();
            dy + dz
        });
        if !sq.is_finite() {
            return f64::NAN;
        }
        if sq > 0.0 && w[g - z] > 0.0 {
            terms.push((w[g - z] * sq / n as f64).ln() + beta * grid.time(g));
        }
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return 0.0;
    }
    (0.5 * (top + terms.iter().map(|l| (l - top).exp()).sum::<f64>().ln())).exp()
}

/// Solves the equation of `driver` by Picard iteration over the primed
/// arguments. Each iterate is one backward sweep: at node k
///
///   Ŷ_k = E_k[Y_{k+1}],  Z_k = E_k[(Y_{k+1} − Ŷ_k)ΔB_k*]/dt,  Â_k = E_k[A],
///   Y_k = Ŷ_k + E′[f(t_k, Ŷ_k, Z_k, Â_k, primed)]·dt,
///
/// with every E_k a least-squares projection on the node-k features and the
/// anticipated integrand A read from nodes already computed in this sweep.
/// Subtracting Ŷ_k does not change the conditional expectation but removes
/// the O(1/dt) variance of Y_{k+1}ΔB/dt from the Z estimate, and each Z
/// column is divided by the fitted E_k[ΔB_l²]/dt (exactly 1 in law) so the
/// sampling error of ΔB² cancels.
pub fn solve_mfabsde(
    driver: &dyn Driver,
    problem: &BackwardProblem,
    cfg: &BackwardConfig,
    rng: &RandomSource,
) -> Result<BackwardSolution> {
    solve_with_anticipation(driver, problem, cfg, rng, Anticipation::Internal)
}

pub fn solve_with_anticipation(
    driver: &dyn Driver,
    problem: &BackwardProblem,
    cfg: &BackwardConfig,
    rng: &RandomSource,
    anticipation: Anticipation,
) -> Result<BackwardSolution> {
    cfg.validate()?;
    let (m, d) = (driver.dim(), driver.noise_dim());
    problem.check(m, d)?;
    let grid = problem.grid;
    if let Anticipation::External(s) = anticipation {
        if s.y.n_particles() != problem.terminal.n_particles()
            || s.y.width() != m
            || s.grid != *grid
        {
            return Err(config(
                "external anticipation source does not match the problem",
            ));
        }
    }
    let beta = cfg.beta_for(driver.lipschitz(), grid);
    let mut sweep = Sweep::new(driver, problem, cfg, rng);
    let (mut frozen_y, mut frozen_z) = sweep.initial();
    let (mut y, mut z) = (frozen_y.clone(), frozen_z.clone());
    let mut norms = Vec::new();
    for _ in 0..cfg.picard_max_iter {
        let driver_values = sweep.run(&frozen_y, &frozen_z, &mut y, &mut z, anticipation)?;
        let diff = beta_norm_backward(grid, (&y, &z), (&frozen_y, &frozen_z), beta);
        norms.push(diff);
        std::mem::swap(&mut y, &mut frozen_y);
        std::mem::swap(&mut z, &mut frozen_z);
        let done = if !driver.uses_co_particles() {
            // the map does not read its argument: the next iterate repeats
            norms.push(0.0);
            true
        } else {
            diff < cfg.picard_tol
        };
        if done {
            return Ok(BackwardSolution {
                grid: grid.clone(),
                y: frozen_y,
                z: frozen_z,
                picard_norms: norms,
                diagnostics: sweep.diagnostics(),
                driver_values,
                driver_independent: !driver.depends_on_solution(),
            });
        }
    }
    Err(Error::NonConvergence { norms })
}

pub(crate) struct Sweep<'a> {
    driver: &'a dyn Driver,
    problem: &'a BackwardProblem<'a>,
    cfg: &'a BackwardConfig,
    rng: &'a RandomSource,
    projectors: Vec<Option<Projector>>,
    sweeps: usize,
}

impl<'a> Sweep<'a> {
    pub(crate) fn new(
        driver: &'a dyn Driver,
        problem: &'a BackwardProblem<'a>,
        cfg: &'a BackwardConfig,
        rng: &'a RandomSource,
    ) -> Self {
        let n_nodes = problem.grid.horizon_steps();
        Sweep {
            driver,
            problem,
            cfg,
            rng,
            projectors: (0..n_nodes).map(|_| None).collect(),
            sweeps: 0,
        }
    }

    /// Zero on [0, T), the terminal segments on [T, T+K].
    pub(crate) fn initial(&self) -> (NodeArray, NodeArray) {
        let g = self.problem.grid;
        let t = self.problem.terminal;
        let (zi, e, h) = (g.zero_index(), g.end_index(), g.horizon_index());
        let n = t.n_particles();
        let mut y = NodeArray::zeros(zi, e - zi + 1, n, t.dim());
        let mut z = NodeArray::zeros(zi, e - zi + 1, n, t.dim() * t.noise_dim());
        for node in h..=e {
            y.at_mut(node).copy_from_slice(t.y().at(node));
            z.at_mut(node).copy_from_slice(t.z().at(node));
        }
        (y, z)
    }

    pub(crate) fn diagnostics(&self) -> Diagnostics {
        let z = self.problem.grid.zero_index();
        Diagnostics {
            ridge_nodes: self
                .projectors
                .iter()
                .enumerate()
                .filter(|(_, p)| p.as_ref().is_some_and(|p| p.used_ridge()))
                .map(|(k, _)| k + z)
                .collect(),
            sweeps: self.sweeps,
        }
    }

    fn projector(&mut self, k: usize) -> &Projector {
        let z = self.problem.grid.zero_index();
        let slot = &mut self.projectors[k - z];
        if slot.is_none() {
            let f = self.problem.features;
            *slot = Some(Projector::fit(f.at(k), f.width(), &self.cfg.basis));
        }
        slot.as_ref().unwrap()
    }

    /// One backward sweep into (y, z), whose terminal segments must already
    /// be in place. Returns the driver values when recording.
    pub(crate) fn run(
        &mut self,
        frozen_y: &NodeArray,
        frozen_z: &NodeArray,
        y: &mut NodeArray,
        z: &mut NodeArray,
        anticipation: Anticipation,
    ) -> Result<Option<NodeArray>> {
        self.sweeps += 1;
        let driver = self.driver;
        let grid = self.problem.grid;
        let noise = self.problem.noise;
        let (m, d) = (driver.dim(), driver.noise_dim());
        let a = driver.anticipated_dim();
        let n = self.problem.terminal.n_particles();
        let dt = grid.dt();
        let (zi, h, e) = (grid.zero_index(), grid.horizon_index(), grid.end_index());
        for node in h..=e {
            y.at_mut(node)
                .copy_from_slice(self.problem.terminal.y().at(node));
            z.at_mut(node)
                .copy_from_slice(self.problem.terminal.z().at(node));
        }
        let mut record = self
            .cfg
            .record_driver
            .then(|| NodeArray::zeros(zi, h - zi, n, m));
        // Z targets, anticipated integrand, ΔB_l²/dt
        let zw = m * d + a + d;
        let mut y_hat = vec![0.0; n * m];
        let mut targets = vec![0.0; n * zw];
        let mut fitted = vec![0.0; n * zw];
        let budget = self.cfg.interaction_budget;
        for k in (zi..h).rev() {
            let db = noise.step(k - zi);
            let features = self.problem.features.at(k);
            let (yk, y_future) = y.split_prev(k);
            let (zk, z_future) = z.split_prev(k);
            let y_next = y_future.at(k + 1);
            self.projector(k).project(features, y_next, m, &mut y_hat);
            let (ant_y, ant_z) = match anticipation {
                Anticipation::Internal => (y_future, z_future),
                Anticipation::External(s) => (s.y.view(), s.z.view()),
            };
            let yh = &y_hat;
            par::for_each_row(&mut targets, zw, 0, |i, row, _| {
                let yn = &y_next[i * m..(i + 1) * m];
                let yhi = &yh[i * m..(i + 1) * m];
                let dbi = &db[i * d..(i + 1) * d];
                for r in 0..m {
                    for l in 0..d {
                        row[r * d + l] = (yn[r] - yhi[r]) * dbi[l] / dt;
                    }
                }
                for l in 0..d {
                    row[m * d + a + l] = dbi[l] * dbi[l] / dt;
                }
                if a > 0 {
                    let fv = FutureView {
                        node: k,
                        particle: i,
                        y: ant_y,
                        z: ant_z,
                        y_next: yn,
                        y_hat: yhi,
                        db: dbi,
                        dt,
                        grid,
                    };
                    driver.anticipated_integrand(&fv, &mut row[m * d..m * d + a]);
                }
            });
            self.projector(k)
                .project(features, &targets, zw, &mut fitted);

            let sub = if driver.uses_co_particles() {
                Subsample::draw(n, budget, &mut self.rng.aux(SUBSAMPLE_TAG + k as u64))?
            } else {
                Subsample::all(n)
            };
            let (py, pz) = match anticipation {
                Anticipation::Internal => (frozen_y, frozen_z),
                Anticipation::External(s) => (&s.y, &s.z),
            };
            let co = CoParticles {
                node: k,
                grid,
                y: frozen_y,
                z: frozen_z,
                ant_y: py,
                ant_z: pz,
                subsample: &sub,
            };
            let agg = if driver.uses_co_particles() {
                driver.co_aggregates(&co)
            } else {
                Vec::new()
            };
            let t = grid.time(k);
            let fitted = &fitted;
            par::for_each_row2(yk, m, zk, m * d, |i, yrow, zrow| {
                let f = &fitted[i * zw..(i + 1) * zw];
                let yhi = &yh[i * m..(i + 1) * m];
                normalize_z(&f[..m * d], &f[m * d + a..], zrow);
                let inp = DriverInputs {
                    node: k,
                    t,
                    particle: i,
                    y: yhi,
                    z: zrow,
                    anticipated: &f[m * d..m * d + a],
                };
                driver.eval(&inp, &co, &agg, yrow);
                for r in 0..m {
                    yrow[r] = yhi[r] + yrow[r] * dt;
                }
            });
            if yk.iter().chain(zk.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step: k - zi,
                    time: t,
                });
            }
            if let Some(rec) = record.as_mut() {
                let out = rec.at_mut(k);
                for (o, (v, w)) in out.iter_mut().zip(yk.iter().zip(yh)) {
                    *o = (v - w) / dt;
                }
            }
        }
        Ok(record)
    }
}

/// Z_{r,l} = raw_{r,l} / q_l, with q_l the fitted E_k[ΔB_l²]/dt; a fit
/// below ½ is an outlier of the regression and leaves the column as is.
pub(crate) fn normalize_z(raw: &[f64], q: &[f64], out: &mut [f64]) {
    let d = q.len();
    for (k, (o, r)) in out.iter_mut().zip(raw).enumerate() {
        let ql = q[k % d];
        *o = if ql > 0.5 { r / ql } else { *r };
    }
}
