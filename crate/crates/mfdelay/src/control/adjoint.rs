use super::frame::{add_transposed, check_partials, Frame, Partials};
use crate::backward::{
    solve_mfabsde, BackwardConfig, BackwardProblem, CoParticles, Driver, DriverInputs, FutureView,
};
use crate::coefficients::{CoefficientSet, LawSlot, Structure};
use crate::control::ControlProcess;
use crate::error::{config, Result};
use crate::forward::ForwardSolution;
use crate::grid::TimeGrid;
use crate::measure::Subsample;
use crate::par;
use crate::paths::{NodeArray, TerminalSegment};
use crate::rng::{BrownianIncrements, RandomSource};

const TERMINAL_TAG: u64 = 0xad_0000_0000;

/// Regression features for conditional expectations along a controlled
/// trajectory. The state X_t is always included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControlFeatures {
    /// Adds X_{t−δ}.
    pub lagged_state: bool,
    /// Adds ∫_{t−δ}^t u_s ds, the control already committed but not yet
    /// felt by a state equation driven by u_{t−δ}.
    pub pending_control: bool,
}

impl ControlFeatures {
    pub fn width(&self, m: usize, k: usize) -> usize {
        m + if self.lagged_state { m } else { 0 } + if self.pending_control { k } else { 0 }
    }

    /// Features at nodes 0..=T.
    pub fn build(&self, sol: &ForwardSolution, u: &ControlProcess) -> NodeArray {
        let grid = sol.grid();
        let (m, k) = (sol.dim(), u.dim());
        let (z, h, dl) = (grid.zero_index(), grid.horizon_index(), grid.delay_steps());
        let dt = grid.dt();
        let w = self.width(m, k);
        let x = sol.states();
        NodeArray::from_fn(z, h, sol.n_particles(), w, |g, i, out| {
            out[..m].copy_from_slice(x.get(g, i));
            let mut o = m;
            if self.lagged_state {
                out[o..o + m].copy_from_slice(x.get(g - dl, i));
                o += m;
            }
            if self.pending_control {
                let pend = &mut out[o..o + k];
                pend.fill(0.0);
                for j in g - dl..g {
                    for (a, b) in pend.iter_mut().zip(u.get(j, i)) {
                        *a += b * dt;
                    }
                }
            }
        })
    }
}

/// The grid of the adjoint equation: [0, T+δ] with the anticipation shift δ.
pub fn adjoint_grid(grid: &TimeGrid) -> Result<TimeGrid> {
    let d = grid.delay_steps();
    Ok(TimeGrid::new(grid.horizon(), grid.delay(), grid.delay(), grid.dt())?.with_shifts(d, d))
}

/// (p, q) on [0, T+δ]; zero on (T, T+δ].
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    grid: TimeGrid,
    p: NodeArray,
    q: NodeArray,
    p_path: NodeArray,
    picard_norms: Vec<f64>,
}

impl AdjointSolution {
    /// The adjoint grid; global node indices agree with the state grid.
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    /// p at global nodes zero_index()..=T+δ.
    pub fn p(&self) -> &NodeArray {
        &self.p
    }
    /// q (m × d per entry) at the same nodes; zero from T on.
    pub fn q(&self) -> &NodeArray {
        &self.q
    }
    /// p_T + Σ_{s≥t} f_s Δt along each path, before conditioning on F_t, at
    /// nodes zero_index()..=T. Its conditional mean is p; pairings against
    /// adapted directions have the same expectation with honest spread.
    pub fn p_pathwise(&self) -> &NodeArray {
        &self.p_path
    }
    pub fn picard_norms(&self) -> &[f64] {
        &self.picard_norms
    }
}

struct AdjointDriver<'a, 'b> {
    c: &'a dyn CoefficientSet,
    f: &'a Frame<'b>,
    st: Structure,
}

impl AdjointDriver<'_, '_> {
    fn shift(&self) -> usize {
        self.f.grid.delay_steps()
    }

    /// Σ over co-particles of ∂_μ(b, σ, h)(Θ′)(y)ᵀ(p′, q′) for one law slot,
    /// evaluated at node `g` with the co-particle values from `pq`.
    fn measure_sum<'c>(
        &self,
        g: usize,
        slot: LawSlot,
        y: &[f64],
        pq: &dyn Fn(usize) -> (&'c [f64], &'c [f64]),
        j: usize,
        out: &mut [f64],
    ) {
        let dims = self.f.dims;
        let (m, md) = (dims.state, dims.state * dims.noise);
        let mut jb = vec![0.0; m * m];
        let mut js = vec![0.0; md * m];
        let a = self.f.args(g, j);
        let (p, q) = pq(j);
        self.c
            .drift_measure_derivative(&a, slot, y, &mut jb)
            .expect("partials checked");
        self.c
            .diffusion_measure_derivative(&a, slot, y, &mut js)
            .expect("partials checked");
        add_transposed(&jb, p, m, out);
        add_transposed(&js, q, m, out);
        if slot == LawSlot::Current {
            let mut hm = vec![0.0; m];
            self.c
                .running_cost_measure_derivative(&self.f.cost_args(g, j), y, &mut hm)
                .expect("partials checked");
            out.iter_mut().zip(&hm).for_each(|(o, v)| *o += v);
        }
    }
}

impl Driver for AdjointDriver<'_, '_> {
    fn dim(&self) -> usize {
        self.f.dims.state
    }
    fn noise_dim(&self) -> usize {
        self.f.dims.noise
    }
    fn lipschitz(&self) -> f64 {
        self.c.lipschitz()
    }
    fn anticipated_dim(&self) -> usize {
        if self.st.delayed && self.shift() > 0 {
            self.f.dims.state
        } else {
            0
        }
    }

    /// b_{x_δ}(Θ_{t+δ})ᵀp_{t+δ} + σ_{x_δ}(Θ_{t+δ})ᵀq_{t+δ}; zero past T.
    fn anticipated_integrand(&self, fv: &FutureView, out: &mut [f64]) {
        out.fill(0.0);
        let g2 = fv.node() + self.shift();
        if g2 > self.f.grid.horizon_index() {
            return;
        }
        let i = fv.particle();
        Partials::at(
            self.f.dims,
            self.c,
            &self.f.args(g2, i),
            &self.f.cost_args(g2, i),
            |pt| {
                add_transposed(&pt.b.x_delay, fv.y(g2), self.f.dims.state, out);
                add_transposed(&pt.s.x_delay, fv.z(g2), self.f.dims.state, out);
            },
        );
    }

    fn uses_co_particles(&self) -> bool {
        self.st.mean_field
    }

    fn co_aggregates(&self, co: &CoParticles) -> Vec<f64> {
        if self.st.separable_measure {
            co.means()
        } else {
            Vec::new()
        }
    }

    fn eval(&self, inp: &DriverInputs, co: &CoParticles, agg: &[f64], out: &mut [f64]) {
        let dims = self.f.dims;
        let (m, md) = (dims.state, dims.state * dims.noise);
        let (g, i) = (inp.node, inp.particle);
        let (p, q) = (inp.y, inp.z);
        Partials::at(
            dims,
            self.c,
            &self.f.args(g, i),
            &self.f.cost_args(g, i),
            |pt| {
                out.copy_from_slice(&pt.h.x);
                add_transposed(&pt.b.x, p, m, out);
                add_transposed(&pt.s.x, q, m, out);
                if self.st.delayed && self.shift() == 0 {
                    add_transposed(&pt.b.x_delay, p, m, out);
                    add_transposed(&pt.s.x_delay, q, m, out);
                }
            },
        );
        if self.st.delayed && self.shift() > 0 {
            out.iter_mut()
                .zip(inp.anticipated)
                .for_each(|(o, a)| *o += a);
        }
        if !self.st.mean_field {
            return;
        }
        let y = self.f.x(g, i);
        let g2 = g + self.shift();
        let delayed_live = g2 <= self.f.grid.horizon_index();
        if self.st.separable_measure {
            // the derivatives do not depend on the co-particle's own tuple
            let (mp, rest) = agg.split_at(m);
            let (mq, rest) = rest.split_at(md);
            let (mpd, mqd) = rest.split_at(m);
            let same = |_: usize| (mp, mq);
            self.measure_sum(g, LawSlot::Current, y, &same, i, out);
            if delayed_live {
                let (dp, dq) = if self.shift() == 0 {
                    (mp, mq)
                } else {
                    (mpd, mqd)
                };
                let ahead = |_: usize| (dp, dq);
                self.measure_sum(g2, LawSlot::Delayed, y, &ahead, i, out);
            }
            return;
        }
        let sub = co.subsample();
        let mut acc = vec![0.0; m];
        let now = |j: usize| (co.y(j), co.z(j));
        let ahead = |j: usize| {
            if self.shift() == 0 {
                (co.y(j), co.z(j))
            } else {
                (co.y_anticipated(j), co.z_anticipated(j))
            }
        };
        sub.average_into(&mut acc, |j, acc| {
            self.measure_sum(g, LawSlot::Current, y, &now, j, acc);
            if delayed_live {
                self.measure_sum(g2, LawSlot::Delayed, y, &ahead, j, acc);
            }
        });
        out.iter_mut().zip(&acc).for_each(|(o, a)| *o += a);
    }
}

/// p_T = Φ_x(X_T, μ_T) + E′[∂_μΦ(X′_T, μ_T)(X_T)] per particle.
fn terminal_adjoint(
    c: &dyn CoefficientSet,
    f: &Frame,
    budget: usize,
    rng: &RandomSource,
) -> Result<Vec<f64>> {
    let m = f.dims.state;
    let h = f.grid.horizon_index();
    let n = f.n();
    let law = f.law(h);
    let st = c.structure();
    let sub = if st.separable_measure {
        Subsample::all(n)
    } else {
        Subsample::draw(n, budget, &mut rng.aux(TERMINAL_TAG))?
    };
    let mut out = vec![0.0; n * m];
    par::for_each_row(&mut out, m, m, |i, row, s| {
        let x = f.x(h, i);
        c.terminal_cost_gradient(x, law, row)
            .expect("partials checked");
        if !st.mean_field {
            return;
        }
        if st.separable_measure {
            c.terminal_cost_measure_derivative(x, law, x, s)
                .expect("partials checked");
            row.iter_mut().zip(s.iter()).for_each(|(o, v)| *o += v);
        } else {
            let mut acc = vec![0.0; m];
            sub.average_into(&mut acc, |j, acc| {
                c.terminal_cost_measure_derivative(f.x(h, j), law, x, s)
                    .expect("partials checked");
                acc.iter_mut().zip(s.iter()).for_each(|(o, v)| *o += v);
            });
            row.iter_mut().zip(&acc).for_each(|(o, v)| *o += v);
        }
    });
    Ok(out)
}

/// Solves the adjoint equation
///
///   −dp = [b_xᵀp + σ_xᵀq + h_x + E′[∂_μb(Θ′)(X)ᵀp′ + ∂_μσ(Θ′)(X)ᵀq′ + ∂_μh(Θ′)(X)]
///          + E_t[b_{x_δ}ᵀ|_{t+δ} p_{t+δ} + σ_{x_δ}ᵀ|_{t+δ} q_{t+δ}]
///          + E′[E_t[∂_{μ_δ}b(Θ′)|_{t+δ}(X)ᵀp′_{t+δ} + ∂_{μ_δ}σ(Θ′)|_{t+δ}(X)ᵀq′_{t+δ}]]]dt − q dB,
///
/// with p_T = Φ_x + E′[∂_μΦ] and p = q = 0 on (T, T+δ], along the base
/// trajectory (simulated under `u` with `noise`). Coefficients marked
/// "|_{t+δ}" are evaluated on the base tuple at t+δ; every conditional
/// expectation is a regression on `features` (nodes 0..T).
pub fn solve_adjoint(
    c: &dyn CoefficientSet,
    base: &ForwardSolution,
    u: &ControlProcess,
    noise: &BrownianIncrements,
    features: &NodeArray,
    cfg: &BackwardConfig,
    rng: &RandomSource,
) -> Result<AdjointSolution> {
    let f = Frame::new(c, base, u)?;
    check_partials(c, &f)?;
    let grid = adjoint_grid(f.grid)?;
    let (m, d) = (f.dims.state, f.dims.noise);
    let n = f.n();
    let (h, e) = (grid.horizon_index(), grid.end_index());
    if features.n_particles() != n
        || features.first_node() > grid.zero_index()
        || features.last_node() + 1 < h
    {
        return Err(config(
            "control features must cover [0, T) for every particle",
        ));
    }
    let p_t = terminal_adjoint(c, &f, cfg.interaction_budget, rng)?;
    let mut ty = NodeArray::zeros(h, e + 1 - h, n, m);
    ty.at_mut(h).copy_from_slice(&p_t);
    let terminal = TerminalSegment::new(&grid, ty, NodeArray::zeros(h, e + 1 - h, n, m * d))?;
    let driver = AdjointDriver {
        c,
        f: &f,
        st: c.structure(),
    };
    let problem = BackwardProblem {
        grid: &grid,
        noise,
        features,
        terminal: &terminal,
    };
    let cfg = BackwardConfig {
        record_driver: true,
        ..cfg.clone()
    };
    let sol = solve_mfabsde(&driver, &problem, &cfg, rng)?;
    let zi = grid.zero_index();
    let drv = sol.driver_values().expect("recorded");
    let dt = grid.dt();
    let mut p_path = NodeArray::zeros(zi, h - zi + 1, n, m);
    p_path.at_mut(h).copy_from_slice(sol.y().at(h));
    for k in (zi..h).rev() {
        let (now, later) = p_path.split_prev(k);
        let next = later.at(k + 1);
        for ((o, a), f) in now.iter_mut().zip(next).zip(drv.at(k)) {
            *o = a + f * dt;
        }
    }
    Ok(AdjointSolution {
        p: sol.y().clone(),
        q: sol.z().clone(),
        p_path,
        picard_norms: sol.picard_norms().to_vec(),
        grid,
    })
}
