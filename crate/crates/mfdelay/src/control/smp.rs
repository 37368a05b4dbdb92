use super::adjoint::{solve_adjoint, AdjointSolution};
use super::cost::{cost_functional, Estimate};
use super::frame::{add_transposed, check_partials, Frame, Partials};
use super::variational::VariationalSolution;
use super::ControlConfig;
use crate::coefficients::{CoefficientSet, CostArgs, CostGradients, Jacobians, LawSlot, StateArgs};
use crate::control::{perturb_control, ControlProcess};
use crate::error::{config, Result};
use crate::forward::{simulate_with_noise, ForwardSolution};
use crate::grid::TimeGrid;
use crate::measure::Subsample;
use crate::par;
use crate::paths::{InitialSegment, NodeArray};
use crate::regression::{Basis, Projector};
use crate::rng::{sample_brownian, RandomSource};
use crate::stats::trapezoid_weights;

/// H(t, Θ, p, q) = b·p + σ·q + h and its partials.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    pub x: Vec<f64>,
    pub x_delay: Vec<f64>,
    pub v: Vec<f64>,
    pub v_delay: Vec<f64>,
}

fn cost_args<'a>(a: &'a StateArgs<'a>) -> CostArgs<'a> {
    CostArgs {
        t: a.t,
        x: a.x,
        law: a.law,
        v: a.v,
        v_delay: a.v_delay,
    }
}

/// Evaluates H and its partials at Θ = `a` from the coefficient partials.
pub fn hamiltonian(
    c: &dyn CoefficientSet,
    a: &StateArgs,
    p: &[f64],
    q: &[f64],
) -> Result<HamiltonianEval> {
    let dims = c.dims();
    let (m, d, k) = (dims.state, dims.noise, dims.control);
    if p.len() != m || q.len() != m * d || a.x.len() != m || a.v.len() != k {
        return Err(config(
            "hamiltonian arguments do not match the coefficient dimensions",
        ));
    }
    let ca = cost_args(a);
    let mut b = vec![0.0; m];
    let mut s = vec![0.0; m * d];
    c.drift(a, &mut b);
    c.diffusion(a, &mut s);
    let value = b.iter().zip(p).map(|(x, y)| x * y).sum::<f64>()
        + s.iter().zip(q).map(|(x, y)| x * y).sum::<f64>()
        + c.running_cost(&ca);
    let mut jb = Jacobians::zeros(m, dims);
    let mut js = Jacobians::zeros(m * d, dims);
    let mut hg = CostGradients::zeros(dims);
    super::frame::require(c.drift_jacobians(a, &mut jb))?;
    super::frame::require(c.diffusion_jacobians(a, &mut js))?;
    super::frame::require(c.running_cost_gradients(&ca, &mut hg))?;
    let assemble = |fb: &[f64], fs: &[f64], cols: usize, h: Option<&[f64]>| {
        let mut out = h.map_or_else(|| vec![0.0; cols], |h| h.to_vec());
        add_transposed(fb, p, cols, &mut out);
        add_transposed(fs, q, cols, &mut out);
        out
    };
    Ok(HamiltonianEval {
        value,
        x: assemble(&jb.x, &js.x, m, Some(&hg.x)),
        x_delay: assemble(&jb.x_delay, &js.x_delay, m, None),
        v: assemble(&jb.v, &js.v, k, Some(&hg.v)),
        v_delay: assemble(&jb.v_delay, &js.v_delay, k, Some(&hg.v_delay)),
    })
}

/// ∂_μH(Θ, p, q)(y) for the current or delayed law; h enters only through
/// the current law.
pub fn hamiltonian_measure_derivative(
    c: &dyn CoefficientSet,
    a: &StateArgs,
    slot: LawSlot,
    p: &[f64],
    q: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    let dims = c.dims();
    let (m, d) = (dims.state, dims.noise);
    let mut jb = vec![0.0; m * m];
    let mut js = vec![0.0; m * d * m];
    super::frame::require(c.drift_measure_derivative(a, slot, y, &mut jb))?;
    super::frame::require(c.diffusion_measure_derivative(a, slot, y, &mut js))?;
    let mut out = vec![0.0; m];
    if slot == LawSlot::Current {
        super::frame::require(c.running_cost_measure_derivative(&cost_args(a), y, &mut out))?;
    }
    add_transposed(&jb, p, m, &mut out);
    add_transposed(&js, q, m, &mut out);
    Ok(out)
}

/// g_t = H_v(Θ_t, p_t, q_t) + E_t[H_{v_δ}(Θ_{t+δ}, p_{t+δ}, q_{t+δ})] at nodes
/// 0..=T (width k); the time-advanced term vanishes once t+δ > T.
pub fn control_gradient(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    adjoint: &AdjointSolution,
    features: &NodeArray,
    basis: &Basis,
) -> Result<NodeArray> {
    gradient_field(
        c,
        base,
        u,
        adjoint.p(),
        adjoint.q(),
        Some((features, basis)),
    )
}

/// The gradient with the pathwise adjoint in place of p and the raw shifted
/// H_{v_δ} in place of its conditional expectation. Paired with an adapted
/// direction it has the mean of [`control_gradient`]'s pairing, and its
/// per-path spread is the Monte Carlo error of that pairing.
pub fn pathwise_gradient(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    adjoint: &AdjointSolution,
) -> Result<NodeArray> {
    gradient_field(c, base, u, adjoint.p_pathwise(), adjoint.q(), None)
}

fn gradient_field(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    p: &NodeArray,
    q: &NodeArray,
    fit: Option<(&NodeArray, &Basis)>,
) -> Result<NodeArray> {
    let f = Frame::new(c, base, u)?;
    check_partials(c, &f)?;
    let grid = f.grid;
    let dims = f.dims;
    let k = dims.control;
    let (z, h, dl) = (grid.zero_index(), grid.horizon_index(), grid.delay_steps());
    if let Some((features, _)) = fit {
        if features.first_node() > z || features.last_node() < h || features.n_particles() != f.n()
        {
            return Err(config(
                "control features must cover [0, T] for every particle",
            ));
        }
    }
    let st = c.structure();
    let n = f.n();
    let mut grad = NodeArray::zeros(z, h - z + 1, n, k);
    let mut ahead = vec![0.0; n * k];
    let mut fitted = vec![0.0; n * k];
    for g in z..=h {
        // H_{v_δ} at t+δ, read on the same path and projected on node-g features
        let g2 = g + dl;
        let shifted = st.delayed && dl > 0 && g2 <= h;
        if shifted {
            par::for_each_row(&mut ahead, k, 0, |i, row, _| {
                Partials::at(dims, c, &f.args(g2, i), &f.cost_args(g2, i), |pt| {
                    row.copy_from_slice(&pt.h.v_delay);
                    add_transposed(&pt.b.v_delay, p.get(g2, i), k, row);
                    add_transposed(&pt.s.v_delay, q.get(g2, i), k, row);
                });
            });
            match fit {
                Some((features, basis)) => Projector::fit(features.at(g), features.width(), basis)
                    .project(features.at(g), &ahead, k, &mut fitted),
                None => fitted.copy_from_slice(&ahead),
            }
        }
        let fitted = &fitted;
        par::for_each_row(grad.at_mut(g), k, 0, |i, row, _| {
            Partials::at(dims, c, &f.args(g, i), &f.cost_args(g, i), |pt| {
                row.copy_from_slice(&pt.h.v);
                add_transposed(&pt.b.v, p.get(g, i), k, row);
                add_transposed(&pt.s.v, q.get(g, i), k, row);
                if st.delayed && dl == 0 {
                    row.iter_mut().zip(&pt.h.v_delay).for_each(|(o, v)| *o += v);
                    add_transposed(&pt.b.v_delay, p.get(g, i), k, row);
                    add_transposed(&pt.s.v_delay, q.get(g, i), k, row);
                }
            });
            if shifted {
                row.iter_mut()
                    .zip(&fitted[i * k..(i + 1) * k])
                    .for_each(|(o, v)| *o += v);
            }
        });
    }
    Ok(grad)
}

/// Pairing ⟨g, v − u⟩ per (node, particle) and its (t, ω)-integral.
#[derive(Debug, Clone, PartialEq)]
pub struct SmpReport {
    pub field: NodeArray,
    pub integral: Estimate,
    /// The same integral from the pathwise gradient; its standard error is
    /// the σ the residual is judged against.
    pub pathwise: Estimate,
}

impl SmpReport {
    /// Regressed integral in units of the pathwise standard error.
    pub fn z_score(&self) -> f64 {
        let se = self.pathwise.standard_error;
        if se > 0.0 {
            self.integral.value / se
        } else if self.integral.value == 0.0 {
            0.0
        } else {
            self.integral.value.signum() * f64::INFINITY
        }
    }

    /// integral ≥ −3σ.
    pub fn nonnegative(&self) -> bool {
        self.z_score() >= -3.0
    }
}

/// ⟨g_t, v_t − u_t⟩ for precomputed regressed and pathwise gradient fields.
pub fn smp_pairing(
    grid: &TimeGrid,
    gradient: &NodeArray,
    pathwise: &NodeArray,
    u: &ControlProcess,
    v: &ControlProcess,
) -> Result<SmpReport> {
    for gr in [gradient, pathwise] {
        if !u.compatible(v) || gr.n_particles() != u.n_particles() || gr.width() != u.dim() {
            return Err(config("probe control does not match the gradient"));
        }
    }
    let (z, h) = (grid.zero_index(), grid.horizon_index());
    let k = u.dim();
    let n = u.n_particles();
    let field = NodeArray::from_fn(z, h, n, 1, |g, i, out| {
        let gr = gradient.get(g, i);
        out[0] = (0..k)
            .map(|c| gr[c] * (v.get(g, i)[c] - u.get(g, i)[c]))
            .sum();
    });
    let w = trapezoid_weights(h - z + 1, grid.dt());
    let samples = par::map(n, |i| (z..=h).map(|g| w[g - z] * field.get(g, i)[0]).sum());
    let raw = par::map(n, |i| {
        (z..=h)
            .map(|g| {
                let gr = pathwise.get(g, i);
                w[g - z]
                    * (0..k)
                        .map(|c| gr[c] * (v.get(g, i)[c] - u.get(g, i)[c]))
                        .sum::<f64>()
            })
            .sum()
    });
    Ok(SmpReport {
        field,
        integral: Estimate::from_samples(samples),
        pathwise: Estimate::from_samples(raw),
    })
}

/// The maximum-principle pairing for one probe control.
pub fn smp_residual(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    adjoint: &AdjointSolution,
    v_probe: &ControlProcess,
    features: &NodeArray,
    basis: &Basis,
) -> Result<SmpReport> {
    let g = control_gradient(c, base, u, adjoint, features, basis)?;
    let raw = pathwise_gradient(c, base, u, adjoint)?;
    smp_pairing(base.grid(), &g, &raw, u, v_probe)
}

/// Finite-difference directional derivative of J against the adjoint
/// pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct GateauxReport {
    pub finite_difference: Estimate,
    pub duality: Estimate,
    pub relative_error: f64,
}

impl GateauxReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.relative_error <= tol
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// [J(u + θ(v − u)) − J(u)]/θ on common noise against E∫⟨g, v − u⟩dt with g
/// from the adjoint along X^u.
pub fn gateaux_consistency_check(
    c: &dyn CoefficientSet,
    boundary: &InitialSegment,
    u: &ControlProcess,
    v: &ControlProcess,
    grid: &TimeGrid,
    cfg: &ControlConfig,
    rng: &RandomSource,
) -> Result<GateauxReport> {
    let noise = sample_brownian(grid, cfg.forward.n_particles, c.dims().noise, rng);
    let base = simulate_with_noise(c, boundary, u, grid, &cfg.forward, &noise)?;
    let ju = cost_functional(c, &base, u)?;
    let theta = cfg.fd_theta;
    let ut = perturb_control(u, v, theta)?;
    let pert = simulate_with_noise(c, boundary, &ut, grid, &cfg.forward, &noise)?;
    let jt = cost_functional(c, &pert, &ut)?;
    let mut fd = jt.paired_difference(&ju);
    fd.samples.iter_mut().for_each(|s| *s /= theta);
    let fd = Estimate::from_samples(fd.samples);
    let features = cfg.features.build(&base, u);
    let adj = solve_adjoint(
        c,
        &base,
        u,
        &noise,
        &features,
        &cfg.backward,
        &rng.derive(1),
    )?;
    let duality = smp_residual(c, &base, u, &adj, v, &features, &cfg.backward.basis)?.integral;
    let relative_error = relative_error(fd.value, duality.value);
    Ok(GateauxReport {
        finite_difference: fd,
        duality,
        relative_error,
    })
}

/// E{Φ_x K_T + E′[∂_μΦ K′_T] + ∫(h_x K + E′[∂_μh K′] + h_v(v − u) + h_{v_δ}(v_δ − u_δ))dt}
/// along the base trajectory, per-particle samples with the E′ terms
/// attached to the particle whose K they multiply.
pub fn first_order_value(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    v: &ControlProcess,
    k: &VariationalSolution,
    budget: usize,
    rng: &RandomSource,
) -> Result<Estimate> {
    let f = Frame::new(c, base, u)?;
    check_partials(c, &f)?;
    if !u.compatible(v) {
        return Err(config("controls differ in shape or initial segment"));
    }
    let grid = f.grid;
    let dims = f.dims;
    let (m, kd) = (dims.state, dims.control);
    let (z, h, dl) = (grid.zero_index(), grid.horizon_index(), grid.delay_steps());
    let n = f.n();
    let st = c.structure();
    let sub = if st.separable_measure {
        Subsample::all(n)
    } else {
        Subsample::draw(n, budget, &mut rng.aux(0xf0))?
    };
    let w = trapezoid_weights(h - z + 1, grid.dt());
    let kv = k.values();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let samples = par::map(n, |i| {
        let mut buf = vec![0.0; m];
        let mut acc = vec![0.0; m];
        let x_t = f.x(h, i);
        let law_t = f.law(h);
        c.terminal_cost_gradient(x_t, law_t, &mut buf)
            .expect("partials checked");
        let mut total = dot(&buf, kv.get(h, i));
        if st.mean_field {
            if st.separable_measure {
                c.terminal_cost_measure_derivative(x_t, law_t, x_t, &mut buf)
                    .expect("partials checked");
                total += dot(&buf, kv.get(h, i));
            } else {
                sub.average_into(&mut acc, |j, acc| {
                    let mut s = vec![0.0; m];
                    c.terminal_cost_measure_derivative(f.x(h, j), law_t, x_t, &mut s)
                        .expect("partials checked");
                    acc.iter_mut().zip(&s).for_each(|(o, v)| *o += v);
                });
                total += dot(&acc, kv.get(h, i));
            }
        }
        let mut hg = CostGradients::zeros(dims);
        let mut dv = vec![0.0; kd];
        for g in z..=h {
            c.running_cost_gradients(&f.cost_args(g, i), &mut hg)
                .expect("partials checked");
            let mut term = dot(&hg.x, kv.get(g, i));
            for (o, (a, b)) in dv.iter_mut().zip(v.get(g, i).iter().zip(u.get(g, i))) {
                *o = a - b;
            }
            term += dot(&hg.v, &dv);
            for (o, (a, b)) in dv
                .iter_mut()
                .zip(v.get(g - dl, i).iter().zip(u.get(g - dl, i)))
            {
                *o = a - b;
            }
            term += dot(&hg.v_delay, &dv);
            if st.mean_field {
                let y = f.x(g, i);
                if st.separable_measure {
                    c.running_cost_measure_derivative(&f.cost_args(g, i), y, &mut buf)
                        .expect("partials checked");
                    term += dot(&buf, kv.get(g, i));
                } else {
                    sub.average_into(&mut acc, |j, acc| {
                        let mut s = vec![0.0; m];
                        c.running_cost_measure_derivative(&f.cost_args(g, j), y, &mut s)
                            .expect("partials checked");
                        acc.iter_mut().zip(&s).for_each(|(o, v)| *o += v);
                    });
                    term += dot(&acc, kv.get(g, i));
                }
            }
            total += w[g - z] * term;
        }
        total
    });
    Ok(Estimate::from_samples(samples))
}

/// Both sides of the delay-shift identity
///
///   Σ_t K_{t−δ}·b_{x_δ}(t)ᵀp_t Δt = Σ_t K_t·E_t[b_{x_δ}ᵀ|_{t+δ} p_{t+δ}] Δt,
///
/// with the right side also taken with the raw shifted product in place of
/// E_t (the two sums are then equal term by term after reindexing).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayShiftReport {
    pub lhs: f64,
    pub rhs_regressed: f64,
    pub rhs_raw: f64,
}

impl DelayShiftReport {
    pub fn relative_error(&self) -> f64 {
        relative_error(self.lhs, self.rhs_regressed)
    }
    pub fn raw_relative_error(&self) -> f64 {
        relative_error(self.lhs, self.rhs_raw)
    }
}

pub fn delay_shift_identity(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    k: &VariationalSolution,
    adjoint: &AdjointSolution,
    features: &NodeArray,
    basis: &Basis,
) -> Result<DelayShiftReport> {
    let f = Frame::new(c, base, u)?;
    check_partials(c, &f)?;
    let grid = f.grid;
    let dims = f.dims;
    let m = dims.state;
    let (z, h, dl) = (grid.zero_index(), grid.horizon_index(), grid.delay_steps());
    let n = f.n();
    let dt = grid.dt();
    let kv = k.values();
    let p = adjoint.p();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // b_{x_δ}(t)ᵀp_t per node and particle
    let bp = NodeArray::from_fn(z, h, n, m, |g, i, out| {
        let mut jb = Jacobians::zeros(m, dims);
        c.drift_jacobians(&f.args(g, i), &mut jb)
            .expect("partials checked");
        out.fill(0.0);
        add_transposed(&jb.x_delay, p.get(g, i), m, out);
    });
    let mut lhs = 0.0;
    let mut rhs_raw = 0.0;
    let mut rhs_reg = 0.0;
    let mut fitted = vec![0.0; n * m];
    for g in z..=h {
        if g >= z + dl {
            lhs += dt * par::sum(n, |i| dot(kv.get(g - dl, i), bp.get(g, i))) / n as f64;
        }
        if g + dl <= h {
            rhs_raw += dt * par::sum(n, |i| dot(kv.get(g, i), bp.get(g + dl, i))) / n as f64;
            Projector::fit(features.at(g), features.width(), basis).project(
                features.at(g),
                bp.at(g + dl),
                m,
                &mut fitted,
            );
            let fit = &fitted;
            rhs_reg += dt * par::sum(n, |i| dot(kv.get(g, i), &fit[i * m..(i + 1) * m])) / n as f64;
        }
    }
    Ok(DelayShiftReport {
        lhs,
        rhs_regressed: rhs_reg,
        rhs_raw,
    })
}
