//! Direct solvers for the two special cases: the anticipated BSDE (no
//! primed arguments, one sweep) and the mean-field BSDE (no anticipated
//! arguments). They share the regression engine but not the general sweep,
//! so they serve as independent references for it.

use super::solver::normalize_z;
use super::{beta_norm_backward, BackwardProblem, BackwardSolution, Diagnostics};
use crate::error::{Error, Result};
use crate::paths::NodeArray;
use crate::regression::{Basis, Projector};

fn start(problem: &BackwardProblem) -> (NodeArray, NodeArray) {
    let g = problem.grid;
    let t = problem.terminal;
    let (zi, h, e) = (g.zero_index(), g.horizon_index(), g.end_index());
    let mut y = NodeArray::zeros(zi, e - zi + 1, t.n_particles(), t.dim());
    let mut z = NodeArray::zeros(zi, e - zi + 1, t.n_particles(), t.dim() * t.noise_dim());
    for node in h..=e {
        y.at_mut(node).copy_from_slice(t.y().at(node));
        z.at_mut(node).copy_from_slice(t.z().at(node));
    }
    (y, z)
}

/// Ŷ_k and the targets (Y_{k+1} − Ŷ_k)ΔB/dt, `extra` zero columns, ΔB_l²/dt.
fn node_targets(
    proj: &Projector,
    feats: &[f64],
    y_next: &[f64],
    db: &[f64],
    (m, d, dt): (usize, usize, f64),
    extra: usize,
) -> (Vec<f64>, Vec<f64>, usize) {
    let n = y_next.len() / m;
    let mut y_hat = vec![0.0; n * m];
    proj.project(feats, y_next, m, &mut y_hat);
    let tw = m * d + extra + d;
    let mut out = vec![0.0; n * tw];
    for i in 0..n {
        for l in 0..d {
            out[i * tw + m * d + extra + l] = db[i * d + l] * db[i * d + l] / dt;
        }
        for r in 0..m {
            for l in 0..d {
                out[i * tw + r * d + l] =
                    (y_next[i * m + r] - y_hat[i * m + r]) * db[i * d + l] / dt;
            }
        }
    }
    (y_hat, out, tw)
}

fn finish(
    problem: &BackwardProblem,
    y: NodeArray,
    z: NodeArray,
    norms: Vec<f64>,
) -> BackwardSolution {
    BackwardSolution {
        grid: problem.grid.clone(),
        y,
        z,
        picard_norms: norms,
        diagnostics: Diagnostics::default(),
        driver_values: None,
        driver_independent: false,
    }
}

/// Y_t = ξ_T + ∫_t^T f(s, Y_s, Z_s, E_s[Y_{s+δ(s)}], E_s[Z_{s+ζ(s)}])ds − ∫_t^T Z dB.
pub fn solve_anticipated_bsde(
    f: impl Fn(f64, &[f64], &[f64], &[f64], &[f64], &mut [f64]),
    problem: &BackwardProblem,
    basis: &Basis,
) -> Result<BackwardSolution> {
    let grid = problem.grid;
    let (m, d) = (problem.terminal.dim(), problem.terminal.noise_dim());
    problem.check(m, d)?;
    let (zi, h) = (grid.zero_index(), grid.horizon_index());
    let dt = grid.dt();
    let (mut y, mut z) = start(problem);
    let n = problem.terminal.n_particles();
    let mut fitted = Vec::new();
    let mut out = vec![0.0; m];
    let mut zk = vec![0.0; m * d];
    for k in (zi..h).rev() {
        let db = problem.noise.step(k - zi);
        let feats = problem.features.at(k);
        let proj = Projector::fit(feats, problem.features.width(), basis);
        let (y_hat, mut t, tw) = node_targets(&proj, feats, y.at(k + 1), db, (m, d, dt), m + m * d);
        let (dg, zg) = (grid.delta_target(k), grid.zeta_target(k));
        for i in 0..n {
            let ant = &mut t[i * tw + m * d..i * tw + m * d + m + m * d];
            if dg > k {
                ant[..m].copy_from_slice(y.get(dg, i));
            } else {
                ant[..m].copy_from_slice(y.get(k + 1, i));
            }
            if zg > k {
                ant[m..].copy_from_slice(z.get(zg, i));
            } else {
                for r in 0..m {
                    for l in 0..d {
                        ant[m + r * d + l] =
                            (y.get(k + 1, i)[r] - y_hat[i * m + r]) * db[i * d + l] / dt;
                    }
                }
            }
        }
        fitted.resize(n * tw, 0.0);
        proj.project(feats, &t, tw, &mut fitted);
        for i in 0..n {
            let fr = &fitted[i * tw..(i + 1) * tw];
            let yh = &y_hat[i * m..(i + 1) * m];
            let (raw, rest) = fr.split_at(m * d);
            let (ant, q) = rest.split_at(m + m * d);
            normalize_z(raw, q, &mut zk);
            f(grid.time(k), yh, &zk, &ant[..m], &ant[m..], &mut out);
            for r in 0..m {
                y.get_mut(k, i)[r] = yh[r] + out[r] * dt;
            }
            z.get_mut(k, i).copy_from_slice(&zk);
        }
        if !y.at(k).iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step: k - zi,
                time: grid.time(k),
            });
        }
    }
    Ok(finish(problem, y, z, vec![0.0]))
}

/// Y_t = ξ_T + ∫_t^T E′[f(s, Y_s, Z_s, Y′_s, Z′_s)]ds − ∫_t^T Z dB, by Picard
/// iteration on (Y′, Z′) with E′ averaged over all co-particles.
pub fn solve_mean_field_bsde(
    f: impl Fn(f64, &[f64], &[f64], &[f64], &[f64], &mut [f64]),
    problem: &BackwardProblem,
    basis: &Basis,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BackwardSolution> {
    let grid = problem.grid;
    let (m, d) = (problem.terminal.dim(), problem.terminal.noise_dim());
    problem.check(m, d)?;
    let (zi, h) = (grid.zero_index(), grid.horizon_index());
    let dt = grid.dt();
    let n = problem.terminal.n_particles();
    let (mut fy, mut fz) = start(problem);
    let projectors: Vec<Projector> = (zi..h)
        .map(|k| Projector::fit(problem.features.at(k), problem.features.width(), basis))
        .collect();
    let mut norms = Vec::new();
    let mut fitted = Vec::new();
    let mut acc = vec![0.0; m];
    let mut out = vec![0.0; m];
    let mut zk = vec![0.0; m * d];
    for _ in 0..max_iter {
        let (mut y, mut z) = start(problem);
        for k in (zi..h).rev() {
            let feats = problem.features.at(k);
            let (y_hat, t, tw) = node_targets(
                &projectors[k - zi],
                feats,
                y.at(k + 1),
                problem.noise.step(k - zi),
                (m, d, dt),
                0,
            );
            fitted.resize(n * tw, 0.0);
            projectors[k - zi].project(feats, &t, tw, &mut fitted);
            for i in 0..n {
                let yh = &y_hat[i * m..(i + 1) * m];
                let fr = &fitted[i * tw..(i + 1) * tw];
                normalize_z(&fr[..m * d], &fr[m * d..], &mut zk);
                acc.fill(0.0);
                for j in 0..n {
                    f(grid.time(k), yh, &zk, fy.get(k, j), fz.get(k, j), &mut out);
                    for (a, v) in acc.iter_mut().zip(&out) {
                        *a += v;
                    }
                }
                for r in 0..m {
                    y.get_mut(k, i)[r] = yh[r] + acc[r] / n as f64 * dt;
                }
                z.get_mut(k, i).copy_from_slice(&zk);
            }
        }
        let diff = beta_norm_backward(grid, (&y, &z), (&fy, &fz), beta);
        norms.push(diff);
        fy = y;
        fz = z;
        if diff < tol {
            return Ok(finish(problem, fy, fz, norms));
        }
    }
    Err(Error::NonConvergence { norms })
}
