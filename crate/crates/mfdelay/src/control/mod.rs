//! Controlled delay problems: cost, perturbations, variational and adjoint
//! equations, the Hamiltonian, and a projected-gradient optimizer.

mod adjoint;
mod cost;
mod frame;
mod optimize;
mod process;
mod smp;
mod variational;

pub use adjoint::{adjoint_grid, solve_adjoint, AdjointSolution, ControlFeatures};
pub use cost::{cost_functional, Estimate};
pub use optimize::{
    convexity_probe, delayed_lq_dp_value, feedback_rms, lq_riccati_feedback, lq_riccati_value,
    optimize_control, random_probes, sufficiency_check, OptimizeResult, OptimizerConfig,
    SufficiencyReport,
};
pub use process::{perturb_control, AdmissibleSet, ControlProcess};
pub use smp::{
    control_gradient, delay_shift_identity, first_order_value, gateaux_consistency_check,
    hamiltonian, hamiltonian_measure_derivative, pathwise_gradient, smp_pairing, smp_residual,
    DelayShiftReport, GateauxReport, HamiltonianEval, SmpReport,
};
pub use variational::{
    perturbation_convergence_check, solve_variational, variational_consistency_check,
    PerturbationReport, VariationalReport, VariationalSolution,
};

use crate::backward::BackwardConfig;
use crate::forward::ForwardConfig;
use crate::regression::Basis;

/// Solver settings shared by the control routines.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub forward: ForwardConfig,
    /// Settings of the adjoint solve and of every conditional expectation.
    pub backward: BackwardConfig,
    pub features: ControlFeatures,
    /// Step θ of the finite-difference derivative of J.
    pub fd_theta: f64,
}

impl ControlConfig {
    /// Defaults for `n` particles. The adjoint's Picard norm uses β = 1: the
    /// adjoint is linear in (p, q), and the large β of the general bound would
    /// scale the stopping tolerance by e^{β(T+δ)/2}.
    pub fn new(n: usize) -> Self {
        ControlConfig {
            forward: ForwardConfig::new(n),
            backward: BackwardConfig {
                beta: Some(1.0),
                basis: Basis::Polynomial { degree: 2 },
                picard_tol: 1e-8,
                picard_max_iter: 60,
                ..BackwardConfig::default()
            },
            features: ControlFeatures::default(),
            fd_theta: 1e-3,
        }
    }
}
