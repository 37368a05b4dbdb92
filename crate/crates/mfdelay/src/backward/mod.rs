//! Mean-field anticipated BSDEs
//!
//!   Y_t = ξ_T + ∫_t^T E′[f(s, Y_s, Z_s, Y_{s+δ(s)}, Z_{s+ζ(s)}, Y′_s, Z′_s, Y′_{s+δ(s)}, Z′_{s+ζ(s)})]ds − ∫_t^T Z_s dB_s,
//!   (Y, Z) = (ξ, η) on [T, T+K],
//!
//! solved by an outer Picard loop over the primed (independent-copy)
//! arguments and an inner explicit backward regression sweep.

mod analysis;
mod comparison;
mod reduced;
mod solver;
mod spec;

pub use analysis::{apriori_estimate_check, contraction_rate, AprioriReport};
pub use comparison::{
    comparison_run, counterexample_clark_ocone, ComparisonReport, CounterexampleReport,
};
pub use reduced::{solve_anticipated_bsde, solve_mean_field_bsde};
pub use solver::{beta_norm_backward, solve_mfabsde, solve_with_anticipation, Anticipation};
pub use spec::{DriverArgs, DriverSpec, MonotonicityFlags, PrimedMode};

use crate::error::{config, Result};
use crate::grid::TimeGrid;
use crate::measure::Subsample;
use crate::paths::{NodeArray, NodeView, TerminalSegment};
use crate::regression::Basis;
use crate::rng::BrownianIncrements;

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardConfig {
    /// Weight of the Picard norm; `None` means 32C²L + 32C² + 6C + 2CL + 1.
    pub beta: Option<f64>,
    /// Constant L of the change of variables; `None` takes the smallest
    /// valid value on the grid.
    pub l_bound: Option<f64>,
    pub basis: Basis,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Co-particles per E′ average for drivers that need pairwise terms.
    pub interaction_budget: usize,
    /// Keep the realized driver values f(s, …) per particle and node.
    pub record_driver: bool,
}

impl Default for BackwardConfig {
    fn default() -> Self {
        BackwardConfig {
            beta: None,
            l_bound: None,
            basis: Basis::Polynomial { degree: 2 },
            picard_tol: 1e-8,
            picard_max_iter: 30,
            interaction_budget: 256,
            record_driver: false,
        }
    }
}

impl BackwardConfig {
    pub fn beta_for(&self, c: f64, grid: &TimeGrid) -> f64 {
        let l = self.l_bound.unwrap_or_else(|| grid.min_l_bound());
        self.beta
            .unwrap_or(32.0 * c * c * l + 32.0 * c * c + 6.0 * c + 2.0 * c * l + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if !(self.picard_tol > 0.0) {
            return Err(config("picard_tol must be positive"));
        }
        if matches!(self.beta, Some(b) if !(b > 0.0)) {
            return Err(config("beta must be positive"));
        }
        if self.interaction_budget < 2 {
            return Err(config("interaction_budget must be at least 2"));
        }
        Ok(())
    }
}

/// Inputs shared by every solve on one noise realization.
#[derive(Debug, Clone, Copy)]
pub struct BackwardProblem<'a> {
    pub grid: &'a TimeGrid,
    /// Brownian increments on [0, T+K].
    pub noise: &'a BrownianIncrements,
    /// Regression features at nodes 0..T (global nodes zero_index()..).
    pub features: &'a NodeArray,
    pub terminal: &'a TerminalSegment,
}

impl BackwardProblem<'_> {
    pub(crate) fn check(&self, m: usize, d: usize) -> Result<()> {
        let g = self.grid;
        let n = self.terminal.n_particles();
        if self.terminal.dim() != m || self.terminal.noise_dim() != d {
            return Err(config(format!(
                "terminal data is {}-dimensional with {} noise components; the driver expects {m} and {d}",
                self.terminal.dim(),
                self.terminal.noise_dim()
            )));
        }
        if self.noise.n_particles() != n
            || self.noise.dim() != d
            || self.noise.n_steps() < g.horizon_steps()
        {
            return Err(config("Brownian increments do not match the terminal data"));
        }
        let f = self.features;
        if f.n_particles() != n
            || f.first_node() > g.zero_index()
            || f.last_node() + 1 < g.horizon_index()
        {
            return Err(config(
                "regression features must cover [0, T) for every particle",
            ));
        }
        Ok(())
    }
}

/// Values of the driver's own anticipated integrand are read from here: the
/// future of the current sweep, or an external solution.
#[derive(Debug, Clone, Copy)]
pub struct FutureView<'a> {
    pub(crate) node: usize,
    pub(crate) particle: usize,
    pub(crate) y: NodeView<'a>,
    pub(crate) z: NodeView<'a>,
    pub(crate) y_next: &'a [f64],
    pub(crate) y_hat: &'a [f64],
    pub(crate) db: &'a [f64],
    pub(crate) dt: f64,
    pub(crate) grid: &'a TimeGrid,
}

impl<'a> FutureView<'a> {
    pub fn node(&self) -> usize {
        self.node
    }
    pub fn particle(&self) -> usize {
        self.particle
    }
    pub fn grid(&self) -> &'a TimeGrid {
        self.grid
    }
    /// Y at node `g > node` of this particle.
    pub fn y(&self, g: usize) -> &'a [f64] {
        self.y.get(g, self.particle)
    }
    /// Z at node `g > node` of this particle.
    pub fn z(&self, g: usize) -> &'a [f64] {
        self.z.get(g, self.particle)
    }
    /// Y at the next node and the increment ΔB over [t_k, t_{k+1}].
    pub fn next(&self) -> (&'a [f64], &'a [f64]) {
        (self.y_next, self.db)
    }
    /// Ŷ_k = E_k[Y_{k+1}] of this particle.
    pub fn y_hat(&self) -> &'a [f64] {
        self.y_hat
    }

    /// Writes the default integrand (Y_{k+δ(k)}, Z_{k+ζ(k)}) into `out`. A zero
    /// shift uses Y_{k+1} and (Y_{k+1} − Ŷ_k)ΔB_k/dt, whose conditional
    /// expectations are Ŷ_k and Z_k.
    pub fn default_integrand(&self, out: &mut [f64]) {
        let m = self.y_next.len();
        let d = self.db.len();
        let (dg, zg) = (
            self.grid.delta_target(self.node),
            self.grid.zeta_target(self.node),
        );
        let (oy, oz) = out.split_at_mut(m);
        if dg > self.node {
            oy.copy_from_slice(self.y(dg));
        } else {
            oy.copy_from_slice(self.y_next);
        }
        if zg > self.node {
            oz.copy_from_slice(self.z(zg));
        } else {
            for r in 0..m {
                for l in 0..d {
                    oz[r * d + l] = (self.y_next[r] - self.y_hat[r]) * self.db[l] / self.dt;
                }
            }
        }
    }
}

/// Primed arguments at one node: the frozen iterate for (Y′_s, Z′_s) and the
/// anticipation source for (Y′_{s+δ(s)}, Z′_{s+ζ(s)}).
#[derive(Debug, Clone, Copy)]
pub struct CoParticles<'a> {
    pub(crate) node: usize,
    pub(crate) grid: &'a TimeGrid,
    pub(crate) y: &'a NodeArray,
    pub(crate) z: &'a NodeArray,
    pub(crate) ant_y: &'a NodeArray,
    pub(crate) ant_z: &'a NodeArray,
    pub(crate) subsample: &'a Subsample,
}

impl<'a> CoParticles<'a> {
    pub fn node(&self) -> usize {
        self.node
    }
    pub fn len(&self) -> usize {
        self.y.n_particles()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn y(&self, j: usize) -> &'a [f64] {
        self.y.get(self.node, j)
    }
    pub fn z(&self, j: usize) -> &'a [f64] {
        self.z.get(self.node, j)
    }
    pub fn y_anticipated(&self, j: usize) -> &'a [f64] {
        self.ant_y.get(self.grid.delta_target(self.node), j)
    }
    pub fn z_anticipated(&self, j: usize) -> &'a [f64] {
        self.ant_z.get(self.grid.zeta_target(self.node), j)
    }
    /// Seeded subsample used for pairwise E′ averages.
    pub fn subsample(&self) -> &'a Subsample {
        self.subsample
    }
    /// Cross-sectional means of (Y′, Z′, Y′_δ, Z′_ζ), concatenated.
    pub fn means(&self) -> Vec<f64> {
        let (m, w) = (self.y.width(), self.z.width());
        let n = self.len() as f64;
        let mut out = vec![0.0; 2 * (m + w)];
        let parts: [(&NodeArray, usize, usize); 4] = [
            (self.y, self.node, 0),
            (self.z, self.node, m),
            (self.ant_y, self.grid.delta_target(self.node), m + w),
            (self.ant_z, self.grid.zeta_target(self.node), 2 * m + w),
        ];
        for (arr, g, off) in parts {
            let wd = arr.width();
            let s = crate::par::sum_rows(arr.n_particles(), wd, |j, acc| {
                for (a, v) in acc.iter_mut().zip(arr.get(g, j)) {
                    *a += v;
                }
            });
            for (o, v) in out[off..off + wd].iter_mut().zip(s) {
                *o = v / n;
            }
        }
        out
    }
}

/// Own arguments of the driver for one particle at one node.
#[derive(Debug, Clone, Copy)]
pub struct DriverInputs<'a> {
    pub node: usize,
    pub t: f64,
    pub particle: usize,
    /// Ŷ_k = E_k[Y_{k+1}].
    pub y: &'a [f64],
    /// Z_k (m × d, row-major).
    pub z: &'a [f64],
    /// E_k of the anticipated integrand.
    pub anticipated: &'a [f64],
}

/// Driver of a mean-field anticipated BSDE.
pub trait Driver: Sync {
    /// Dimension m of Y.
    fn dim(&self) -> usize;
    /// Dimension d of the Brownian motion.
    fn noise_dim(&self) -> usize;
    /// Declared Lipschitz constant C.
    fn lipschitz(&self) -> f64;

    /// Width of the anticipated integrand whose conditional expectation is
    /// handed to [`Driver::eval`]; 0 when the driver has no own anticipated
    /// arguments.
    fn anticipated_dim(&self) -> usize {
        0
    }

    /// The anticipated integrand A of one particle, read from the future.
    fn anticipated_integrand(&self, future: &FutureView, out: &mut [f64]) {
        future.default_integrand(out)
    }

    /// True when the driver reads primed arguments (and so needs the outer
    /// Picard loop).
    fn uses_co_particles(&self) -> bool {
        false
    }

    /// Per-node summary of the co-particles, computed once and passed to
    /// every [`Driver::eval`] at that node.
    fn co_aggregates(&self, _co: &CoParticles) -> Vec<f64> {
        Vec::new()
    }

    /// E′[f(…)] for one particle, written into `out` (length m).
    fn eval(&self, inp: &DriverInputs, co: &CoParticles, aggregates: &[f64], out: &mut [f64]);

    /// False when f does not involve (Y, Z) at all.
    fn depends_on_solution(&self) -> bool {
        true
    }
}

/// Solver bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Nodes whose regression needed the ridge fallback.
    pub ridge_nodes: Vec<usize>,
    pub sweeps: usize,
}

/// (Y, Z) on [0, T+K] for every particle.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution {
    pub(crate) grid: TimeGrid,
    pub(crate) y: NodeArray,
    pub(crate) z: NodeArray,
    pub(crate) picard_norms: Vec<f64>,
    pub(crate) diagnostics: Diagnostics,
    pub(crate) driver_values: Option<NodeArray>,
    pub(crate) driver_independent: bool,
}

impl BackwardSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    /// Y at global nodes zero_index()..=end_index().
    pub fn y(&self) -> &NodeArray {
        &self.y
    }
    pub fn z(&self) -> &NodeArray {
        &self.z
    }
    pub fn picard_norms(&self) -> &[f64] {
        &self.picard_norms
    }
    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }
    /// Realized driver values at nodes 0..T, when recorded.
    pub fn driver_values(&self) -> Option<&NodeArray> {
        self.driver_values.as_ref()
    }
    /// Cross-sectional mean of Y at t = 0.
    pub fn y0(&self) -> Vec<f64> {
        self.y.node_mean(self.grid.zero_index())
    }
}
