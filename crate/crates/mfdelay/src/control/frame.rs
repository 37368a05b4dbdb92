//! Read access to the tuple Θ_t = (t, X_t, X_{t−δ}, μ_t, μ_{t−δ}, u_t, u_{t−δ})
//! along a simulated base trajectory.

use std::cell::RefCell;

use crate::coefficients::{
    CoefficientSet, CostArgs, CostGradients, Dims, Jacobians, LawSlot, StateArgs,
};
use crate::control::ControlProcess;
use crate::error::{config, Error, Result};
use crate::forward::ForwardSolution;
use crate::grid::TimeGrid;
use crate::measure::EmpiricalLaw;

pub(crate) struct Frame<'a> {
    pub grid: &'a TimeGrid,
    pub dims: Dims,
    pub sol: &'a ForwardSolution,
    pub u: &'a ControlProcess,
    laws: Vec<EmpiricalLaw<'a>>,
}

impl<'a> Frame<'a> {
    pub fn new(
        c: &dyn CoefficientSet,
        sol: &'a ForwardSolution,
        u: &'a ControlProcess,
    ) -> Result<Self> {
        let grid = sol.grid();
        let dims = c.dims();
        u.check_grid(grid, sol.n_particles())?;
        if u.dim() != dims.control || sol.dim() != dims.state {
            return Err(config(
                "control or solution does not match the coefficient dimensions",
            ));
        }
        let x = sol.states();
        let laws = (0..=grid.horizon_index())
            .map(|g| EmpiricalLaw::new(x.at(g), dims.state))
            .collect::<Result<Vec<_>>>()?;
        Ok(Frame {
            grid,
            dims,
            sol,
            u,
            laws,
        })
    }

    pub fn n(&self) -> usize {
        self.sol.n_particles()
    }

    pub fn law(&self, g: usize) -> &EmpiricalLaw<'a> {
        &self.laws[g]
    }

    pub fn x(&self, g: usize, i: usize) -> &'a [f64] {
        self.sol.states().get(g, i)
    }

    /// Θ at node `g ≥ zero_index` for particle `i`.
    pub fn args(&self, g: usize, i: usize) -> StateArgs<'_> {
        let gd = g - self.grid.delay_steps();
        StateArgs {
            t: self.grid.time(g),
            x: self.x(g, i),
            x_delay: self.x(gd, i),
            law: &self.laws[g],
            law_delay: &self.laws[gd],
            v: self.u.get(g, i),
            v_delay: self.u.get(gd, i),
        }
    }

    pub fn cost_args(&self, g: usize, i: usize) -> CostArgs<'_> {
        let gd = g - self.grid.delay_steps();
        CostArgs {
            t: self.grid.time(g),
            x: self.x(g, i),
            law: &self.laws[g],
            v: self.u.get(g, i),
            v_delay: self.u.get(gd, i),
        }
    }
}

/// Scratch for the partials of b, σ and h at one point.
pub(crate) struct Partials {
    dims: Dims,
    pub b: Jacobians,
    pub s: Jacobians,
    pub h: CostGradients,
}

thread_local! {
    static SCRATCH: RefCell<Option<Partials>> = const { RefCell::new(None) };
}

impl Partials {
    pub fn new(dims: Dims) -> Self {
        Partials {
            dims,
            b: Jacobians::zeros(dims.state, dims),
            s: Jacobians::zeros(dims.state * dims.noise, dims),
            h: CostGradients::zeros(dims),
        }
    }

    /// Runs `f` on this thread's scratch, evaluated at (a, ca).
    pub fn at<R>(
        dims: Dims,
        c: &dyn CoefficientSet,
        a: &StateArgs,
        ca: &CostArgs,
        f: impl FnOnce(&Partials) -> R,
    ) -> R {
        let mut pt = SCRATCH
            .with(|s| s.take())
            .filter(|p| p.dims == dims)
            .unwrap_or_else(|| Partials::new(dims));
        pt.eval(c, a, ca).expect("partials checked");
        let r = f(&pt);
        SCRATCH.with(|s| s.replace(Some(pt)));
        r
    }

    pub fn eval(&mut self, c: &dyn CoefficientSet, a: &StateArgs, ca: &CostArgs) -> Result<()> {
        self.b.clear();
        self.s.clear();
        for v in [&mut self.h.x, &mut self.h.v, &mut self.h.v_delay] {
            v.fill(0.0);
        }
        c.drift_jacobians(a, &mut self.b)?;
        c.diffusion_jacobians(a, &mut self.s)?;
        c.running_cost_gradients(ca, &mut self.h)
    }
}

/// Turns a missing partial into a configuration error.
pub(crate) fn require<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::MissingPartial(name) => config(format!(
            "the coefficients do not supply the partial `{name}`"
        )),
        other => other,
    })
}

/// Calls every partial the linearized equations need once at node zero, so
/// that the solvers can treat them as infallible afterwards.
pub(crate) fn check_partials(c: &dyn CoefficientSet, f: &Frame) -> Result<()> {
    let dims = f.dims;
    let z = f.grid.zero_index();
    let (a, ca) = (f.args(z, 0), f.cost_args(z, 0));
    require(Partials::new(dims).eval(c, &a, &ca))?;
    let st = c.structure();
    let x = f.x(f.grid.horizon_index(), 0);
    let law_t = f.law(f.grid.horizon_index());
    let mut out = vec![0.0; dims.state * dims.state * dims.noise.max(1)];
    require(c.terminal_cost_gradient(x, law_t, &mut out[..dims.state]))?;
    if st.mean_field {
        for slot in [LawSlot::Current, LawSlot::Delayed] {
            require(c.drift_measure_derivative(
                &a,
                slot,
                a.x,
                &mut out[..dims.state * dims.state],
            ))?;
            require(c.diffusion_measure_derivative(&a, slot, a.x, &mut out))?;
        }
        require(c.running_cost_measure_derivative(&ca, a.x, &mut out[..dims.state]))?;
        require(c.terminal_cost_measure_derivative(x, law_t, x, &mut out[..dims.state]))?;
    }
    Ok(())
}

/// out += Jᵀ w for a row-major `rows × cols` matrix J.
pub(crate) fn add_transposed(j: &[f64], w: &[f64], cols: usize, out: &mut [f64]) {
    for (r, wr) in w.iter().enumerate() {
        if *wr == 0.0 {
            continue;
        }
        for c in 0..cols {
            out[c] += j[r * cols + c] * wr;
        }
    }
}

/// out += J w for a row-major `rows × cols` matrix J.
pub(crate) fn add_product(j: &[f64], w: &[f64], cols: usize, out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += (0..cols).map(|c| j[r * cols + c] * w[c]).sum::<f64>();
    }
}
