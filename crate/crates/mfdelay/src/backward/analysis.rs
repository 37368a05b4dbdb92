use super::BackwardSolution;
use crate::error::{Error, Result};
use crate::paths::NodeArray;
use crate::stats::{mean_se, slope, trapezoid_weights};

/// Geometric rate r of the squared Picard differences d_n², from a
/// least-squares fit of log d_n² against n. Differences below 10⁻¹² d_1 are
/// at rounding level and end the fit; an exact zero right after the first
/// iterate means the map was constant, reported as rate 0.
pub fn contraction_rate(norm_history: &[f64]) -> Result<f64> {
    let first = norm_history.first().copied().unwrap_or(0.0);
    let usable: Vec<f64> = norm_history
        .iter()
        .copied()
        .take_while(|&d| d > 1e-12 * first && d > 0.0)
        .collect();
    if norm_history.len() >= 2 && usable.len() < norm_history.len() && usable.len() <= 1 {
        return Ok(0.0);
    }
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable Picard differences, need at least 3",
            usable.len()
        )));
    }
    let n: Vec<f64> = (0..usable.len()).map(|i| i as f64).collect();
    let logs: Vec<f64> = usable.iter().map(|d| (d * d).ln()).collect();
    Ok(slope(&n, &logs).exp())
}

/// Both sides of the basic estimate
///   |y₀|² + E∫_0^T(β/2|y|² + |z|²)e^{βs}ds ≤ E[|ξ|²e^{βT}] + (2/β)E∫_0^T|g₀|²e^{βs}ds
/// for a driver g₀ that does not involve the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs.
    pub slack: f64,
    /// Standard error of the slack over particles.
    pub standard_error: f64,
}

impl AprioriReport {
    /// Slack nonnegative up to `tol` plus three standard errors.
    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -(tol + 3.0 * self.standard_error)
    }
}

/// Evaluates both sides of the estimate from a solution and the realized
/// driver samples g₀ (nodes 0..T; the solver records them when
/// `record_driver` is set). Integrals use the trapezoid rule.
pub fn apriori_estimate_check(
    solution: &BackwardSolution,
    g0: Option<&NodeArray>,
    beta: f64,
) -> Result<AprioriReport> {
    if !solution.driver_independent {
        return Err(Error::Precondition(
            "the estimate needs a driver that does not involve (Y, Z)".into(),
        ));
    }
    let grid = &solution.grid;
    let (zi, h) = (grid.zero_index(), grid.horizon_index());
    let n = solution.y.n_particles();
    let w = trapezoid_weights(h - zi + 1, grid.dt());
    let g0 = g0.or(solution.driver_values.as_ref());
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let per_particle: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let mut lhs = sq(solution.y.get(zi, i));
            let mut rhs = sq(solution.y.get(h, i)) * (beta * grid.time(h)).exp();
            for g in zi..=h {
                let e = (beta * grid.time(g)).exp() * w[g - zi];
                lhs += (0.5 * beta * sq(solution.y.get(g, i)) + sq(solution.z.get(g, i))) * e;
                if let Some(g0) = g0 {
                    // g₀ lives on [0, T); its value at T enters with weight dt/2
                    let gg = if g < h { g } else { h - 1 };
                    rhs += 2.0 / beta * sq(g0.get(gg, i)) * e;
                }
            }
            (lhs, rhs)
        })
        .collect();
    let slacks: Vec<f64> = per_particle.iter().map(|(l, r)| r - l).collect();
    let (slack, se) = mean_se(&slacks);
    let lhs = per_particle.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let rhs = per_particle.iter().map(|p| p.1).sum::<f64>() / n as f64;
    Ok(AprioriReport {
        lhs,
        rhs,
        slack,
        standard_error: se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates() {
        let h: Vec<f64> = (0..6).map(|i| 0.5f64.powi(i)).collect();
        assert!((contraction_rate(&h).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(contraction_rate(&[1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            contraction_rate(&[1.0, 0.5]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            contraction_rate(&[]),
            Err(Error::InsufficientData(_))
        ));
    }
}
