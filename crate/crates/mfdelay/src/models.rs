//! Benchmark coefficient sets with every partial supplied.

use crate::coefficients::{
    CoefficientSet, CostArgs, CostGradients, Dims, Jacobians, LawSlot, StateArgs, Structure,
};
use crate::control::ControlProcess;
use crate::error::Result;
use crate::forward::{simulate_with_noise, ForwardConfig, ItoFunctional};
use crate::grid::TimeGrid;
use crate::measure::EmpiricalLaw;
use crate::paths::InitialSegment;
use crate::rng::{sample_brownian, RandomSource};

/// Scalar model, affine in every argument of the state equation:
///
///   b = a x + a_d x_δ + a_m ∫y dμ + a_md ∫y dμ_δ + b_v v + b_vd v_δ + c
///   σ = s + s_x x
///   h = q x² + r v² + r_d v_δ²
///   Φ = p x² + p_l x + p_m (∫y dμ)²
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AffineScalar {
    pub a: f64,
    pub a_delay: f64,
    pub a_mean: f64,
    pub a_mean_delay: f64,
    pub b_v: f64,
    pub b_v_delay: f64,
    pub c: f64,
    pub s: f64,
    pub s_x: f64,
    pub q: f64,
    pub r: f64,
    pub r_delay: f64,
    pub p: f64,
    pub p_lin: f64,
    pub p_mean: f64,
}

impl AffineScalar {
    /// dX = v dt + dB, cost E[∫v² dt + X_T²].
    pub fn lq() -> Self {
        AffineScalar {
            b_v: 1.0,
            s: 1.0,
            r: 1.0,
            p: 1.0,
            ..Default::default()
        }
    }

    /// dX = v_{t−δ} dt + dB, cost E[∫v² dt + X_T²].
    pub fn delayed_lq() -> Self {
        AffineScalar {
            b_v_delay: 1.0,
            s: 1.0,
            r: 1.0,
            p: 1.0,
            ..Default::default()
        }
    }

    /// dX = a X dt + s X dB.
    pub fn geometric(a: f64, s: f64) -> Self {
        AffineScalar {
            a,
            s_x: s,
            ..Default::default()
        }
    }
}

impl CoefficientSet for AffineScalar {
    fn dims(&self) -> Dims {
        Dims {
            state: 1,
            noise: 1,
            control: 1,
        }
    }
    fn lipschitz(&self) -> f64 {
        [
            self.a,
            self.a_delay,
            self.a_mean,
            self.a_mean_delay,
            self.s_x,
        ]
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
    fn structure(&self) -> Structure {
        Structure {
            mean_field: self.a_mean != 0.0 || self.a_mean_delay != 0.0 || self.p_mean != 0.0,
            delayed: self.a_delay != 0.0
                || self.a_mean_delay != 0.0
                || self.b_v_delay != 0.0
                || self.r_delay != 0.0,
            separable_measure: true,
        }
    }
    fn drift(&self, a: &StateArgs, out: &mut [f64]) {
        let mut b = self.a * a.x[0]
            + self.a_delay * a.x_delay[0]
            + self.b_v * a.v[0]
            + self.b_v_delay * a.v_delay[0]
            + self.c;
        if self.a_mean != 0.0 {
            b += self.a_mean * a.law.mean()[0];
        }
        if self.a_mean_delay != 0.0 {
            b += self.a_mean_delay * a.law_delay.mean()[0];
        }
        out[0] = b;
    }
    fn diffusion(&self, a: &StateArgs, out: &mut [f64]) {
        out[0] = self.s + self.s_x * a.x[0];
    }
    fn running_cost(&self, a: &CostArgs) -> f64 {
        self.q * a.x[0] * a.x[0]
            + self.r * a.v[0] * a.v[0]
            + self.r_delay * a.v_delay[0] * a.v_delay[0]
    }
    fn terminal_cost(&self, x: &[f64], law: &EmpiricalLaw) -> f64 {
        let mut v = self.p * x[0] * x[0] + self.p_lin * x[0];
        if self.p_mean != 0.0 {
            v += self.p_mean * law.mean()[0].powi(2);
        }
        v
    }
    fn drift_jacobians(&self, _a: &StateArgs, j: &mut Jacobians) -> Result<()> {
        j.x[0] = self.a;
        j.x_delay[0] = self.a_delay;
        j.v[0] = self.b_v;
        j.v_delay[0] = self.b_v_delay;
        Ok(())
    }
    fn diffusion_jacobians(&self, _a: &StateArgs, j: &mut Jacobians) -> Result<()> {
        j.clear();
        j.x[0] = self.s_x;
        Ok(())
    }
    fn drift_measure_derivative(
        &self,
        _a: &StateArgs,
        slot: LawSlot,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = match slot {
            LawSlot::Current => self.a_mean,
            LawSlot::Delayed => self.a_mean_delay,
        };
        Ok(())
    }
    fn diffusion_measure_derivative(
        &self,
        _a: &StateArgs,
        _slot: LawSlot,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn running_cost_gradients(&self, a: &CostArgs, g: &mut CostGradients) -> Result<()> {
        g.x[0] = 2.0 * self.q * a.x[0];
        g.v[0] = 2.0 * self.r * a.v[0];
        g.v_delay[0] = 2.0 * self.r_delay * a.v_delay[0];
        Ok(())
    }
    fn running_cost_measure_derivative(
        &self,
        _a: &CostArgs,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn terminal_cost_gradient(
        &self,
        x: &[f64],
        _law: &EmpiricalLaw,
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 2.0 * self.p * x[0] + self.p_lin;
        Ok(())
    }
    fn terminal_cost_measure_derivative(
        &self,
        _x: &[f64],
        law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = if self.p_mean != 0.0 {
            2.0 * self.p_mean * law.mean()[0]
        } else {
            0.0
        };
        Ok(())
    }
}

/// b = sin x + ½∫tanh dμ + 0.3 cos x_δ + 0.2∫y dμ_δ + v,  σ = s + 0.1 sin x,
/// h = v² + x², Φ = x².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearMeanField {
    pub s: f64,
}

impl CoefficientSet for NonlinearMeanField {
    fn dims(&self) -> Dims {
        Dims {
            state: 1,
            noise: 1,
            control: 1,
        }
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn structure(&self) -> Structure {
        Structure {
            mean_field: true,
            delayed: true,
            separable_measure: true,
        }
    }
    fn drift(&self, a: &StateArgs, out: &mut [f64]) {
        let m = a.law.atoms().iter().map(|y| y.tanh()).sum::<f64>() / a.law.len() as f64;
        out[0] = a.x[0].sin()
            + 0.5 * m
            + 0.3 * a.x_delay[0].cos()
            + 0.2 * a.law_delay.mean()[0]
            + a.v[0];
    }
    fn diffusion(&self, a: &StateArgs, out: &mut [f64]) {
        out[0] = self.s + 0.1 * a.x[0].sin();
    }
    fn running_cost(&self, a: &CostArgs) -> f64 {
        a.v[0] * a.v[0] + a.x[0] * a.x[0]
    }
    fn terminal_cost(&self, x: &[f64], _law: &EmpiricalLaw) -> f64 {
        x[0] * x[0]
    }
    fn drift_jacobians(&self, a: &StateArgs, j: &mut Jacobians) -> Result<()> {
        j.x[0] = a.x[0].cos();
        j.x_delay[0] = -0.3 * a.x_delay[0].sin();
        j.v[0] = 1.0;
        j.v_delay[0] = 0.0;
        Ok(())
    }
    fn diffusion_jacobians(&self, a: &StateArgs, j: &mut Jacobians) -> Result<()> {
        j.clear();
        j.x[0] = 0.1 * a.x[0].cos();
        Ok(())
    }
    fn drift_measure_derivative(
        &self,
        _a: &StateArgs,
        slot: LawSlot,
        y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = match slot {
            LawSlot::Current => 0.5 * (1.0 - y[0].tanh().powi(2)),
            LawSlot::Delayed => 0.2,
        };
        Ok(())
    }
    fn diffusion_measure_derivative(
        &self,
        _a: &StateArgs,
        _slot: LawSlot,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn running_cost_gradients(&self, a: &CostArgs, g: &mut CostGradients) -> Result<()> {
        g.x[0] = 2.0 * a.x[0];
        g.v[0] = 2.0 * a.v[0];
        g.v_delay[0] = 0.0;
        Ok(())
    }
    fn running_cost_measure_derivative(
        &self,
        _a: &CostArgs,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn terminal_cost_gradient(
        &self,
        x: &[f64],
        _law: &EmpiricalLaw,
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 2.0 * x[0];
        Ok(())
    }
    fn terminal_cost_measure_derivative(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
}

/// Strong errors of Euler–Maruyama for dX = aX dt + sX dB, X_0 = x0, on
/// [0, T] against X_T = x0 exp((a − s²/2)T + sB_T). All step sizes
/// T/2^level share one Brownian path per particle, drawn on the finest grid.
/// Returns (dt, (E|X_T^dt − X_T|²)^{1/2}) per level.
pub fn gbm_strong_errors(
    a: f64,
    s: f64,
    x0: f64,
    t: f64,
    levels: &[u32],
    n_particles: usize,
    rng: &RandomSource,
) -> Result<Vec<(f64, f64)>> {
    let finest = *levels.iter().max().unwrap_or(&0);
    let fine_grid = TimeGrid::new(t, 0.0, 0.0, t / 2f64.powi(finest as i32))?;
    let fine = sample_brownian(&fine_grid, n_particles, 1, rng);
    let bt: Vec<f64> = (0..n_particles)
        .map(|i| (0..fine.n_steps()).map(|k| fine.get(k, i)[0]).sum())
        .collect();
    let model = AffineScalar::geometric(a, s);
    let cfg = ForwardConfig::new(n_particles);
    levels
        .iter()
        .map(|&level| {
            let dt = t / 2f64.powi(level as i32);
            let grid = TimeGrid::new(t, 0.0, 0.0, dt)?;
            let noise = fine.coarsen(1 << (finest - level));
            let start = InitialSegment::constant(&grid, n_particles, &[x0]);
            let control = ControlProcess::uncontrolled(&grid, n_particles, 1);
            let sol = simulate_with_noise(&model, &start, &control, &grid, &cfg, &noise)?;
            let sq: f64 = sol
                .terminal()
                .iter()
                .zip(&bt)
                .map(|(x, b)| {
                    let exact = x0 * ((a - 0.5 * s * s) * t + s * b).exp();
                    (x - exact).powi(2)
                })
                .sum();
            Ok((dt, (sq / n_particles as f64).sqrt()))
        })
        .collect()
}

/// Φ(x, μ) = x (scalar).
#[derive(Debug, Clone, Copy)]
pub struct Identity;

/// Φ(x, μ) = x².
#[derive(Debug, Clone, Copy)]
pub struct Square;

/// Φ(x, μ) = (∫y dμ)².
#[derive(Debug, Clone, Copy)]
pub struct SquaredMean;

impl ItoFunctional for Identity {
    fn value(&self, x: &[f64], _law: &EmpiricalLaw) -> f64 {
        x[0]
    }
    fn grad_x(&self, _x: &[f64], _law: &EmpiricalLaw, out: &mut [f64]) -> Result<()> {
        out[0] = 1.0;
        Ok(())
    }
    fn hess_x(&self, _x: &[f64], _law: &EmpiricalLaw, out: &mut [f64]) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn measure_derivative(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn measure_derivative_grad(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn measure_terms_separable(&self) -> bool {
        true
    }
}

impl ItoFunctional for Square {
    fn value(&self, x: &[f64], _law: &EmpiricalLaw) -> f64 {
        x[0] * x[0]
    }
    fn grad_x(&self, x: &[f64], _law: &EmpiricalLaw, out: &mut [f64]) -> Result<()> {
        out[0] = 2.0 * x[0];
        Ok(())
    }
    fn hess_x(&self, _x: &[f64], _law: &EmpiricalLaw, out: &mut [f64]) -> Result<()> {
        out[0] = 2.0;
        Ok(())
    }
    fn measure_derivative(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn measure_derivative_grad(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn measure_terms_separable(&self) -> bool {
        true
    }
}

impl ItoFunctional for SquaredMean {
    fn value(&self, _x: &[f64], law: &EmpiricalLaw) -> f64 {
        law.mean()[0].powi(2)
    }
    fn grad_x(&self, _x: &[f64], _law: &EmpiricalLaw, out: &mut [f64]) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn hess_x(&self, _x: &[f64], _law: &EmpiricalLaw, out: &mut [f64]) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn measure_derivative(
        &self,
        _x: &[f64],
        law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 2.0 * law.mean()[0];
        Ok(())
    }
    fn measure_derivative_grad(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        out[0] = 0.0;
        Ok(())
    }
    fn measure_terms_separable(&self) -> bool {
        true
    }
}
