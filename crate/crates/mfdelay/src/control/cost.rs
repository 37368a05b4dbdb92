use super::frame::Frame;
use crate::coefficients::CoefficientSet;
use crate::control::ControlProcess;
use crate::error::Result;
use crate::forward::ForwardSolution;
use crate::par;
use crate::stats::{mean_se, trapezoid_weights};

/// Monte Carlo estimate with its standard error and the per-particle
/// samples it was formed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
    pub samples: Vec<f64>,
}

impl Estimate {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let (value, standard_error) = mean_se(&samples);
        Estimate {
            value,
            standard_error,
            samples,
        }
    }

    /// Estimate of the difference self − other on common samples.
    pub fn paired_difference(&self, other: &Estimate) -> Estimate {
        Estimate::from_samples(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// J(u) = E[∫_0^T h(t, X_t, μ_t, u_t, u_{t−δ})dt + Φ(X_T, μ_T)], trapezoid
/// rule in t, laws taken from the ensemble.
pub fn cost_functional(
    c: &dyn CoefficientSet,
    solution: &ForwardSolution,
    control: &ControlProcess,
) -> Result<Estimate> {
    let f = Frame::new(c, solution, control)?;
    let grid = f.grid;
    let (z, h) = (grid.zero_index(), grid.horizon_index());
    let w = trapezoid_weights(h - z + 1, grid.dt());
    let law_t = f.law(h);
    let samples = par::map(f.n(), |i| {
        let running: f64 = (z..=h)
            .map(|g| w[g - z] * c.running_cost(&f.cost_args(g, i)))
            .sum();
        running + c.terminal_cost(f.x(h, i), law_t)
    });
    Ok(Estimate::from_samples(samples))
}
