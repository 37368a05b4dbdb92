//! Least-squares conditional expectations on node features.
//!
//! A [`Projector`] is fitted once per node from the feature rows of all
//! particles and then projects any number of target columns onto the span of
//! the basis. Polynomial bases use standardized features and total-degree
//! monomials; the normal equations fall back to a ridge term
//! λ = 1e-8·tr(G)/p when they are (numerically) singular. The bin basis
//! averages over equiprobable bins of the first feature and is monotone:
//! nonnegative targets give nonnegative fits.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{config, Result};
use crate::par;

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Monomials of total degree ≤ `degree` in the standardized features.
    Polynomial { degree: usize },
    /// Piecewise constant on `count` equiprobable bins of the first feature.
    Bins { count: usize },
}

impl Basis {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Basis::Polynomial { degree } if degree >= 1 => Ok(()),
            Basis::Bins { count } if count >= 1 => Ok(()),
            _ => Err(config(format!("invalid regression basis {self:?}"))),
        }
    }
}

fn monomials(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; dim]];
    for total in 1..=degree {
        let mut cur = vec![0u32; dim];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(cur.clone());
                return;
            }
            for e in (0..=left).rev() {
                cur[pos] = e;
                rec(pos + 1, left - e, cur, out);
            }
        }
        if dim > 0 {
            rec(0, total as u32, &mut cur, &mut out);
        }
    }
    out
}

#[derive(Debug, Clone)]
enum Kind {
    Poly {
        degree: usize,
        shift: Vec<f64>,
        scale: Vec<f64>,
        exps: Vec<Vec<u32>>,
        chol: Cholesky<f64, Dyn>,
    },
    Bins {
        thresholds: Vec<f64>,
        bin_of: Vec<u32>,
        counts: Vec<usize>,
    },
}

/// A fitted projection onto the basis at one node.
#[derive(Debug, Clone)]
pub struct Projector {
    dim: usize,
    n: usize,
    ridge: bool,
    kind: Kind,
}

impl Projector {
    /// Fits the projector to `features` (N × `dim`, row-major).
    pub fn fit(features: &[f64], dim: usize, basis: &Basis) -> Projector {
        let n = if dim == 0 { 0 } else { features.len() / dim };
        match *basis {
            Basis::Polynomial { degree } => Self::fit_poly(features, dim, n, degree),
            Basis::Bins { count } => Self::fit_bins(features, dim, n, count),
        }
    }

    fn fit_poly(features: &[f64], dim: usize, n: usize, degree: usize) -> Projector {
        let moments = par::sum_rows(n, 2 * dim, |i, acc| {
            for c in 0..dim {
                let x = features[i * dim + c];
                acc[c] += x;
                acc[dim + c] += x * x;
            }
        });
        let mut shift = vec![0.0; dim];
        let mut scale = vec![1.0; dim];
        for c in 0..dim {
            let m = moments[c] / n as f64;
            let var = (moments[dim + c] / n as f64 - m * m).max(0.0);
            shift[c] = m;
            // a constant feature yields an all-zero column, caught by the ridge
            scale[c] = if var > 1e-300 { var.sqrt() } else { 1.0 };
            if var <= 1e-300 {
                shift[c] = features[c];
            }
        }
        let exps = monomials(dim, degree);
        let p = exps.len();
        let mut proj = Projector {
            dim,
            n,
            ridge: false,
            kind: Kind::Poly {
                degree,
                shift,
                scale,
                exps,
                chol: Cholesky::new(DMatrix::identity(1, 1)).unwrap(),
            },
        };
        let scratch = proj.scratch_len();
        let gram = par::sum_rows_with(n, p * p, scratch, |i, acc, s| {
            let (phi, pw) = s.split_at_mut(p);
            proj.basis_row(&features[i * dim..(i + 1) * dim], phi, pw);
            for a in 0..p {
                for b in 0..=a {
                    acc[a * p + b] += phi[a] * phi[b];
                }
            }
        });
        let mut g = DMatrix::from_fn(p, p, |a, b| {
            if b <= a {
                gram[a * p + b]
            } else {
                gram[b * p + a]
            }
        });
        let trace: f64 = (0..p).map(|a| g[(a, a)]).sum();
        let max_diag = (0..p).map(|a| g[(a, a)]).fold(0.0, f64::max);
        let well_posed = |c: &Cholesky<f64, Dyn>| {
            let l = c.l_dirty();
            (0..p).all(|a| l[(a, a)] * l[(a, a)] > 1e-12 * max_diag)
        };
        let chol = match Cholesky::new(g.clone()) {
            Some(c) if well_posed(&c) => c,
            _ => {
                proj.ridge = true;
                let lambda = RIDGE * trace / p as f64;
                // the intercept (first monomial) is left unpenalized
                for a in 1..p {
                    g[(a, a)] += lambda;
                }
                Cholesky::new(g).expect("ridge-regularized Gram matrix is positive definite")
            }
        };
        if let Kind::Poly { chol: c, .. } = &mut proj.kind {
            *c = chol;
        }
        proj
    }

    fn fit_bins(features: &[f64], dim: usize, n: usize, count: usize) -> Projector {
        let mut first: Vec<f64> = (0..n).map(|i| features[i * dim]).collect();
        first.sort_unstable_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = (1..count)
            .map(|b| first[(b * n / count).min(n - 1)])
            .collect();
        thresholds.dedup();
        let bin_index = |x: f64| thresholds.partition_point(|&t| t < x) as u32;
        let bin_of: Vec<u32> = (0..n).map(|i| bin_index(features[i * dim])).collect();
        let mut counts = vec![0usize; thresholds.len() + 1];
        for &b in &bin_of {
            counts[b as usize] += 1;
        }
        Projector {
            dim,
            n,
            ridge: false,
            kind: Kind::Bins {
                thresholds,
                bin_of,
                counts,
            },
        }
    }

    /// Scratch length needed by [`Projector::basis_row`] plus the row itself.
    fn scratch_len(&self) -> usize {
        match &self.kind {
            Kind::Poly { degree, exps, .. } => exps.len() + self.dim * (degree + 1),
            Kind::Bins { .. } => 0,
        }
    }

    /// Basis functions evaluated at one feature row; `powers` is scratch of
    /// length dim·(degree+1).
    fn basis_row(&self, x: &[f64], out: &mut [f64], powers: &mut [f64]) {
        match &self.kind {
            Kind::Poly {
                degree,
                shift,
                scale,
                exps,
                ..
            } => {
                let d = *degree;
                // powers[c * (d + 1) + e] = z_c^e
                for c in 0..self.dim {
                    powers[c * (d + 1)] = 1.0;
                    let z = (x[c] - shift[c]) / scale[c];
                    for e in 1..=d {
                        powers[c * (d + 1) + e] = powers[c * (d + 1) + e - 1] * z;
                    }
                }
                for (o, ex) in out.iter_mut().zip(exps) {
                    *o = ex
                        .iter()
                        .enumerate()
                        .map(|(c, &e)| powers[c * (d + 1) + e as usize])
                        .product();
                }
            }
            Kind::Bins { .. } => unreachable!("bins have no basis row"),
        }
    }

    /// Number of basis functions.
    pub fn n_basis(&self) -> usize {
        match &self.kind {
            Kind::Poly { exps, .. } => exps.len(),
            Kind::Bins { counts, .. } => counts.len(),
        }
    }

    /// True when the ridge fallback was needed.
    pub fn used_ridge(&self) -> bool {
        self.ridge
    }

    /// Coefficients (n_basis × width, row-major) of the projection of
    /// `target` (N × width).
    pub fn coefficients(&self, features: &[f64], target: &[f64], width: usize) -> Vec<f64> {
        let n = self.n;
        match &self.kind {
            Kind::Poly { chol, exps, .. } => {
                let p = exps.len();
                let rhs = par::sum_rows_with(n, p * width, self.scratch_len(), |i, acc, s| {
                    let (phi, pw) = s.split_at_mut(p);
                    self.basis_row(&features[i * self.dim..(i + 1) * self.dim], phi, pw);
                    let t = &target[i * width..(i + 1) * width];
                    for a in 0..p {
                        for (c, tv) in t.iter().enumerate() {
                            acc[a * width + c] += phi[a] * tv;
                        }
                    }
                });
                let mut coef = vec![0.0; p * width];
                for c in 0..width {
                    let b = DVector::from_fn(p, |a, _| rhs[a * width + c]);
                    let x = chol.solve(&b);
                    for a in 0..p {
                        coef[a * width + c] = x[a];
                    }
                }
                coef
            }
            Kind::Bins { bin_of, counts, .. } => {
                let mut coef = vec![0.0; counts.len() * width];
                for (i, &b) in bin_of.iter().enumerate() {
                    for c in 0..width {
                        coef[b as usize * width + c] += target[i * width + c];
                    }
                }
                for (b, &k) in counts.iter().enumerate() {
                    if k > 0 {
                        coef[b * width..(b + 1) * width]
                            .iter_mut()
                            .for_each(|v| *v /= k as f64);
                    }
                }
                coef
            }
        }
    }

    /// Value of the fitted function with coefficients `coef` at feature row
    /// `x`.
    pub fn evaluate(&self, coef: &[f64], width: usize, x: &[f64], out: &mut [f64]) {
        let mut s = vec![0.0; self.scratch_len()];
        self.evaluate_with(coef, width, x, out, &mut s);
    }

    fn evaluate_with(&self, coef: &[f64], width: usize, x: &[f64], out: &mut [f64], s: &mut [f64]) {
        match &self.kind {
            Kind::Poly { exps, .. } => {
                let (phi, pw) = s.split_at_mut(exps.len());
                self.basis_row(x, phi, pw);
                out.fill(0.0);
                for (a, f) in phi.iter().enumerate() {
                    for c in 0..width {
                        out[c] += f * coef[a * width + c];
                    }
                }
            }
            Kind::Bins { thresholds, .. } => {
                let b = thresholds.partition_point(|&t| t < x[0]);
                out.copy_from_slice(&coef[b * width..(b + 1) * width]);
            }
        }
    }

    /// Fitted values of `target` (N × width) at the fitting rows.
    pub fn project(&self, features: &[f64], target: &[f64], width: usize, out: &mut [f64]) {
        let coef = self.coefficients(features, target, width);
        match &self.kind {
            Kind::Bins { bin_of, .. } => {
                for (i, row) in out.chunks_mut(width).enumerate() {
                    let b = bin_of[i] as usize;
                    row.copy_from_slice(&coef[b * width..(b + 1) * width]);
                }
            }
            Kind::Poly { .. } => {
                let d = self.dim;
                par::for_each_row(out, width, self.scratch_len(), |i, row, s| {
                    self.evaluate_with(&coef, width, &features[i * d..(i + 1) * d], row, s)
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(2, 2).len(), 6);
        assert_eq!(monomials(3, 1).len(), 4);
    }

    #[test]
    fn exact_on_polynomials() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.173).sin() * 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.5 * v * v).collect();
        let p = Projector::fit(&x, 1, &Basis::Polynomial { degree: 2 });
        let mut out = vec![0.0; 200];
        p.project(&x, &y, 1, &mut out);
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(!p.used_ridge());
    }

    #[test]
    fn constant_features_fall_back_to_mean() {
        let x = vec![0.0; 50];
        let y: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let p = Projector::fit(&x, 1, &Basis::Polynomial { degree: 3 });
        assert!(p.used_ridge());
        let mut out = vec![0.0; 50];
        p.project(&x, &y, 1, &mut out);
        assert!(out.iter().all(|v| (v - 24.5).abs() < 1e-9));
    }

    #[test]
    fn bins_are_monotone_and_measurable() {
        let x: Vec<f64> = (0..100).map(|i| (i % 10) as f64).collect();
        let y: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let p = Projector::fit(&x, 1, &Basis::Bins { count: 4 });
        let mut out = vec![0.0; 100];
        p.project(&x, &y, 1, &mut out);
        assert!(out.iter().all(|&v| v >= 0.0));
        // equal features, equal fits
        for i in 0..100 {
            for j in 0..100 {
                if x[i] == x[j] {
                    assert_eq!(out[i], out[j]);
                }
            }
        }
    }
}
