//! Coefficient interface of the controlled state equation and cost.
//!
//! The state equation is dX = b(t, X, X_δ, μ, μ_δ, v, v_δ)dt + σ(…)dB with
//! X ∈ ℝ^m, B ∈ ℝ^d, v ∈ ℝ^k; the cost is E[∫h(t, X, μ, v, v_δ)dt + Φ(X_T, μ_T)].
//! σ is handled as a flat vector of length m·d (row-major m × d), so b and σ
//! share one Jacobian layout: an r-output coefficient has Jacobians r × m with
//! respect to x and x_δ and r × k with respect to v and v_δ, and measure
//! derivatives ∂_μ(·)(y) of shape r × m.
//!
//! Everything except `dims`, `lipschitz`, `drift` and `diffusion` is optional.
//! A partial that is needed but not supplied surfaces as
//! [`Error::MissingPartial`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measure::{w2_distance_1d, EmpiricalLaw};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub state: usize,
    pub noise: usize,
    pub control: usize,
}

/// Which law a measure derivative refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawSlot {
    Current,
    Delayed,
}

/// Sparsity hints. A `false` lets the solvers skip the corresponding terms,
/// which must then vanish identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Structure {
    /// Coefficients or costs depend on μ or μ_δ.
    pub mean_field: bool,
    /// Coefficients or costs depend on x_δ, μ_δ or v_δ.
    pub delayed: bool,
    /// ∂_μ b(t, Θ)(y) and its analogues depend on (t, μ, y) only, not on
    /// the own tuple (x, x_δ, v, v_δ). E′ terms then factor through one pass
    /// over the atoms.
    pub separable_measure: bool,
}

impl Default for Structure {
    fn default() -> Self {
        Structure {
            mean_field: true,
            delayed: true,
            separable_measure: false,
        }
    }
}

/// Arguments Θ = (t, x, x_δ, μ, μ_δ, v, v_δ) of b and σ.
#[derive(Debug, Clone, Copy)]
pub struct StateArgs<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub x_delay: &'a [f64],
    pub law: &'a EmpiricalLaw<'a>,
    pub law_delay: &'a EmpiricalLaw<'a>,
    pub v: &'a [f64],
    pub v_delay: &'a [f64],
}

/// Arguments of the running cost h(t, x, μ, v, v_δ).
#[derive(Debug, Clone, Copy)]
pub struct CostArgs<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub law: &'a EmpiricalLaw<'a>,
    pub v: &'a [f64],
    pub v_delay: &'a [f64],
}

/// Jacobians of an r-output coefficient, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobians {
    pub x: Vec<f64>,
    pub x_delay: Vec<f64>,
    pub v: Vec<f64>,
    pub v_delay: Vec<f64>,
}

impl Jacobians {
    pub fn zeros(rows: usize, dims: Dims) -> Self {
        Jacobians {
            x: vec![0.0; rows * dims.state],
            x_delay: vec![0.0; rows * dims.state],
            v: vec![0.0; rows * dims.control],
            v_delay: vec![0.0; rows * dims.control],
        }
    }
    pub fn clear(&mut self) {
        for a in [
            &mut self.x,
            &mut self.x_delay,
            &mut self.v,
            &mut self.v_delay,
        ] {
            a.fill(0.0);
        }
    }
}

/// Gradients of the running cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradients {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_delay: Vec<f64>,
}

impl CostGradients {
    pub fn zeros(dims: Dims) -> Self {
        CostGradients {
            x: vec![0.0; dims.state],
            v: vec![0.0; dims.control],
            v_delay: vec![0.0; dims.control],
        }
    }
}

pub trait CoefficientSet: Sync {
    fn dims(&self) -> Dims;

    /// Declared Lipschitz constant C of b and σ.
    fn lipschitz(&self) -> f64;

    fn structure(&self) -> Structure {
        Structure::default()
    }

    fn drift(&self, a: &StateArgs, out: &mut [f64]);

    /// σ as an m·d vector (row-major m × d).
    fn diffusion(&self, a: &StateArgs, out: &mut [f64]);

    fn running_cost(&self, _a: &CostArgs) -> f64 {
        0.0
    }

    fn terminal_cost(&self, _x: &[f64], _law: &EmpiricalLaw) -> f64 {
        0.0
    }

    fn drift_jacobians(&self, _a: &StateArgs, _out: &mut Jacobians) -> Result<()> {
        Err(Error::MissingPartial("b_x"))
    }

    fn diffusion_jacobians(&self, _a: &StateArgs, _out: &mut Jacobians) -> Result<()> {
        Err(Error::MissingPartial("sigma_x"))
    }

    /// ∂_μ b(Θ)(y) (m × m) for the current or the delayed law.
    fn drift_measure_derivative(
        &self,
        _a: &StateArgs,
        _slot: LawSlot,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingPartial("b_mu"))
    }

    /// ∂_μ σ(Θ)(y) ((m·d) × m).
    fn diffusion_measure_derivative(
        &self,
        _a: &StateArgs,
        _slot: LawSlot,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingPartial("sigma_mu"))
    }

    fn running_cost_gradients(&self, _a: &CostArgs, _out: &mut CostGradients) -> Result<()> {
        Err(Error::MissingPartial("h_x"))
    }

    /// ∂_μ h(t, x, μ, v, v_δ)(y) (length m).
    fn running_cost_measure_derivative(
        &self,
        _a: &CostArgs,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingPartial("h_mu"))
    }

    fn terminal_cost_gradient(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingPartial("Phi_x"))
    }

    /// ∂_μ Φ(x, μ)(y) (length m).
    fn terminal_cost_measure_derivative(
        &self,
        _x: &[f64],
        _law: &EmpiricalLaw,
        _y: &[f64],
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::MissingPartial("Phi_mu"))
    }
}

/// Result of a probe check.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub probes: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "coefficient probe failed: {}",
                self.failures.join("; ")
            )))
        }
    }
}

const PROBE_ATOMS: usize = 8;

struct Probe {
    t: f64,
    x: Vec<f64>,
    xd: Vec<f64>,
    atoms: Vec<f64>,
    atoms_d: Vec<f64>,
    v: Vec<f64>,
    vd: Vec<f64>,
}

impl Probe {
    fn draw<R: Rng>(dims: Dims, r: &mut R) -> Probe {
        let mut g =
            |n: usize| -> Vec<f64> { (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect() };
        Probe {
            t: 0.0,
            x: g(dims.state),
            xd: g(dims.state),
            atoms: g(dims.state * PROBE_ATOMS),
            atoms_d: g(dims.state * PROBE_ATOMS),
            v: g(dims.control),
            vd: g(dims.control),
        }
    }

    fn slot_mut(&mut self, slot: usize, col: usize) -> &mut f64 {
        match slot {
            0 => &mut self.x[col],
            1 => &mut self.xd[col],
            2 => &mut self.v[col],
            _ => &mut self.vd[col],
        }
    }

    fn with<T>(&self, m: usize, f: impl FnOnce(&StateArgs) -> T) -> T {
        let law = EmpiricalLaw::new(&self.atoms, m).expect("finite probe");
        let law_d = EmpiricalLaw::new(&self.atoms_d, m).expect("finite probe");
        f(&StateArgs {
            t: self.t,
            x: &self.x,
            x_delay: &self.xd,
            law: &law,
            law_delay: &law_d,
            v: &self.v,
            v_delay: &self.vd,
        })
    }
}

fn close(fd: f64, an: f64, tol: f64) -> (bool, f64) {
    let err = (fd - an).abs() / an.abs().max(1.0);
    (err <= tol, err)
}

/// Compares the declared Jacobians and measure derivatives of b and σ with
/// centered differences of step `h` at `n_probes` random arguments.
/// Measure derivatives are checked through the lift: moving atom j of an
/// N-atom law changes the coefficient at rate ∂_μ(·)(y_j)/N.
pub fn probe_partials(
    c: &dyn CoefficientSet,
    n_probes: usize,
    h: f64,
    tol: f64,
    rng: &RandomSource,
) -> ProbeReport {
    let dims = c.dims();
    let (m, d) = (dims.state, dims.noise);
    let st = c.structure();
    let mut r = rng.aux(0xc0ef);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut check = |name: &str, fd: f64, an: f64, failures: &mut Vec<String>| {
        let (ok, e) = close(fd, an, tol);
        worst = worst.max(e);
        if !ok && failures.len() < 8 {
            failures.push(format!("{name}: analytic {an} vs difference {fd}"));
        }
    };
    type Eval = fn(&dyn CoefficientSet, &StateArgs, &mut [f64]);
    let coefs: [(&str, usize, Eval, bool); 2] = [
        ("b", m, |c, a, o| c.drift(a, o), true),
        ("sigma", m * d, |c, a, o| c.diffusion(a, o), false),
    ];
    for _ in 0..n_probes {
        let p = Probe::draw(dims, &mut r);
        for &(name, rows, eval, is_drift) in &coefs {
            let mut jac = Jacobians::zeros(rows, dims);
            let got = p.with(m, |a| {
                if is_drift {
                    c.drift_jacobians(a, &mut jac)
                } else {
                    c.diffusion_jacobians(a, &mut jac)
                }
            });
            if let Err(e) = got {
                failures.push(format!("{name}: {e}"));
                continue;
            }
            let mut plus = vec![0.0; rows];
            let mut minus = vec![0.0; rows];
            let slots: [(&str, usize, &Vec<f64>); 4] = [
                ("x", m, &jac.x),
                ("x_delay", m, &jac.x_delay),
                ("v", dims.control, &jac.v),
                ("v_delay", dims.control, &jac.v_delay),
            ];
            for (slot, (sname, cols, an)) in slots.iter().enumerate() {
                for col in 0..*cols {
                    let mut q = clone_probe(&p);
                    let base = *q.slot_mut(slot, col);
                    *q.slot_mut(slot, col) = base + h;
                    q.with(m, |a| eval(c, a, &mut plus));
                    *q.slot_mut(slot, col) = base - h;
                    q.with(m, |a| eval(c, a, &mut minus));
                    for row in 0..rows {
                        let fd = (plus[row] - minus[row]) / (2.0 * h);
                        check(
                            &format!("{name}_{sname}[{row},{col}]"),
                            fd,
                            an[row * cols + col],
                            &mut failures,
                        );
                    }
                }
            }
            if !st.mean_field {
                continue;
            }
            for (slot, lname) in [(LawSlot::Current, "mu"), (LawSlot::Delayed, "mu_delay")] {
                for j in 0..PROBE_ATOMS {
                    let atoms = if slot == LawSlot::Current {
                        &p.atoms
                    } else {
                        &p.atoms_d
                    };
                    let y = atoms[j * m..(j + 1) * m].to_vec();
                    let mut an = vec![0.0; rows * m];
                    let got = p.with(m, |a| {
                        if is_drift {
                            c.drift_measure_derivative(a, slot, &y, &mut an)
                        } else {
                            c.diffusion_measure_derivative(a, slot, &y, &mut an)
                        }
                    });
                    if let Err(e) = got {
                        failures.push(format!("{name}_{lname}: {e}"));
                        break;
                    }
                    for col in 0..m {
                        let mut q = clone_probe(&p);
                        let target = if slot == LawSlot::Current {
                            &mut q.atoms
                        } else {
                            &mut q.atoms_d
                        };
                        let base = target[j * m + col];
                        target[j * m + col] = base + h;
                        q.with(m, |a| eval(c, a, &mut plus));
                        let target = if slot == LawSlot::Current {
                            &mut q.atoms
                        } else {
                            &mut q.atoms_d
                        };
                        target[j * m + col] = base - h;
                        q.with(m, |a| eval(c, a, &mut minus));
                        for row in 0..rows {
                            let fd = PROBE_ATOMS as f64 * (plus[row] - minus[row]) / (2.0 * h);
                            check(
                                &format!("{name}_{lname}[{row},{col}]"),
                                fd,
                                an[row * m + col],
                                &mut failures,
                            );
                        }
                    }
                }
            }
        }
    }
    ProbeReport {
        probes: n_probes,
        worst,
        failures,
    }
}

fn clone_probe(p: &Probe) -> Probe {
    Probe {
        t: p.t,
        x: p.x.clone(),
        xd: p.xd.clone(),
        atoms: p.atoms.clone(),
        atoms_d: p.atoms_d.clone(),
        v: p.v.clone(),
        vd: p.vd.clone(),
    }
}

/// Upper bound on W₂ between two probe laws: exact in one dimension, the
/// index coupling otherwise.
fn w2_upper(a: &[f64], b: &[f64], m: usize) -> f64 {
    if m == 1 {
        let (p, q) = (
            EmpiricalLaw::new(a, 1).unwrap(),
            EmpiricalLaw::new(b, 1).unwrap(),
        );
        return w2_distance_1d(&p, &q).unwrap();
    }
    let n = a.len() / m;
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64).sqrt()
}

/// Checks |g(θ) − g(θ′)| ≤ C(|x−x′| + |x_δ−x_δ′| + W₂(μ,μ′) + W₂(μ_δ,μ_δ′))
/// for g = b and σ on random pairs sharing (t, v, v_δ).
pub fn probe_lipschitz(c: &dyn CoefficientSet, n_probes: usize, rng: &RandomSource) -> ProbeReport {
    let dims = c.dims();
    let (m, d) = (dims.state, dims.noise);
    let lip = c.lipschitz();
    let mut r = rng.aux(0x11b5);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let (mut b0, mut b1) = (vec![0.0; m], vec![0.0; m]);
    let (mut s0, mut s1) = (vec![0.0; m * d], vec![0.0; m * d]);
    for _ in 0..n_probes {
        let p = Probe::draw(dims, &mut r);
        let mut q = Probe::draw(dims, &mut r);
        let scale: f64 = r.random_range(1e-3..1.0);
        for (a, b) in [
            (&p.x, &mut q.x),
            (&p.xd, &mut q.xd),
            (&p.atoms, &mut q.atoms),
            (&p.atoms_d, &mut q.atoms_d),
        ] {
            b.iter_mut()
                .zip(a.iter())
                .for_each(|(y, x)| *y = x + scale * *y);
        }
        q.v.clone_from(&p.v);
        q.vd.clone_from(&p.vd);
        let dist = |u: &[f64], w: &[f64]| {
            u.iter()
                .zip(w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let bound = lip
            * (dist(&p.x, &q.x)
                + dist(&p.xd, &q.xd)
                + w2_upper(&p.atoms, &q.atoms, m)
                + w2_upper(&p.atoms_d, &q.atoms_d, m));
        p.with(m, |a| {
            c.drift(a, &mut b0);
            c.diffusion(a, &mut s0)
        });
        q.with(m, |a| {
            c.drift(a, &mut b1);
            c.diffusion(a, &mut s1)
        });
        for (name, u, w) in [("b", &b0, &b1), ("sigma", &s0, &s1)] {
            let diff = dist(u, w);
            let slack = bound * (1.0 + 1e-9) + 1e-12;
            if diff > 0.0 {
                worst = worst.max(diff / bound.max(1e-300));
            }
            if diff > slack && failures.len() < 8 {
                failures.push(format!("{name}: |Δ| = {diff} exceeds C·distance = {bound}"));
            }
        }
    }
    ProbeReport {
        probes: n_probes,
        worst,
        failures,
    }
}
