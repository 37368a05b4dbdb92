//! Empirical laws, W₂ distances, the independent-copy expectation E′ and a
//! finite-difference check of measure derivatives through the lift.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::RandomSource;

const SLICED_TAG: u64 = 0x51_1ce;
const PRIME_TAG: u64 = 0x9e_0001;
const LIONS_TAG: u64 = 0x110_0000;

/// Uniform-weight empirical law of N atoms in ℝ^m. Borrows its atoms.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw<'a> {
    atoms: &'a [f64],
    dim: usize,
    mean: Vec<f64>,
    second_moment: f64,
}

impl<'a> EmpiricalLaw<'a> {
    /// Law of the rows of `atoms` (N × dim). Fails on empty or non-finite
    /// input.
    pub fn new(atoms: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || atoms.len() % dim != 0 {
            return Err(Error::Domain(format!(
                "cannot form a law from {} values of dimension {dim}",
                atoms.len()
            )));
        }
        let n = atoms.len() / dim;
        let sums = par::sum_rows(n, dim + 1, |i, acc| {
            let a = &atoms[i * dim..(i + 1) * dim];
            for (s, v) in acc.iter_mut().zip(a) {
                *s += v;
            }
            acc[dim] += a.iter().map(|v| v * v).sum::<f64>();
        });
        let mean: Vec<f64> = sums[..dim].iter().map(|s| s / n as f64).collect();
        let second_moment = sums[dim] / n as f64;
        if !second_moment.is_finite() || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain("law has non-finite atoms".into()));
        }
        Ok(EmpiricalLaw {
            atoms,
            dim,
            mean,
            second_moment,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn atoms(&self) -> &'a [f64] {
        self.atoms
    }
    pub fn atom(&self, j: usize) -> &'a [f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }
    /// ∫ y μ(dy).
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    /// ∫ |y|² μ(dy).
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }
}

fn sorted(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut s: Vec<f64> = v.collect();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Squared W₂ between two sorted samples through their quantile functions.
fn w2_sq_sorted(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        return s / a.len() as f64;
    }
    // merge the breakpoints i/na and j/nb of the two step quantile functions
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut u, mut acc) = (0, 0, 0.0, 0.0);
    while i < a.len() && j < b.len() {
        let next = ((i + 1) as f64 / na).min((j + 1) as f64 / nb);
        acc += (a[i] - b[j]).powi(2) * (next - u);
        u = next;
        if (i + 1) as f64 / na <= next {
            i += 1;
        }
        if (j + 1) as f64 / nb <= next {
            j += 1;
        }
    }
    acc
}

/// Exact W₂ between two one-dimensional empirical laws (sorted-atom
/// coupling; the quantile coupling when atom counts differ).
pub fn w2_distance_1d(p: &EmpiricalLaw, q: &EmpiricalLaw) -> Result<f64> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::Dispatch(format!(
            "w2_distance_1d needs 1-d laws (got {} and {}); use w2_distance_sliced",
            p.dim(),
            q.dim()
        )));
    }
    let a = sorted(p.atoms().iter().copied());
    let b = sorted(q.atoms().iter().copied());
    Ok(w2_sq_sorted(&a, &b).sqrt())
}

/// Random orthonormal frames in ℝ^m, concatenated until `n` directions.
fn frame_directions(m: usize, n: usize, rng: &RandomSource) -> Vec<Vec<f64>> {
    let mut r = rng.aux(SLICED_TAG);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while dirs.len() < n {
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(m);
        while frame.len() < m {
            let mut v: Vec<f64> = (0..m).map(|_| r.sample(StandardNormal)).collect();
            for e in &frame {
                let c: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|a| *a /= norm);
                frame.push(v);
            }
        }
        dirs.extend(frame);
    }
    dirs.truncate(n);
    dirs
}

/// Sliced W₂: sqrt(m · mean over directions u of W₂²(⟨p,u⟩, ⟨q,u⟩)).
///
/// Directions come in random orthonormal frames, so a pure translation by
/// `s` returns |s| exactly. The factor m makes the surrogate agree with W₂ on
/// translations; for m = 1 this is [`w2_distance_1d`].
pub fn w2_distance_sliced(
    p: &EmpiricalLaw,
    q: &EmpiricalLaw,
    n_projections: usize,
    rng: &RandomSource,
) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    if n_projections == 0 {
        return Err(Error::Domain("need at least one projection".into()));
    }
    let m = p.dim();
    if m == 1 {
        return w2_distance_1d(p, q);
    }
    let dirs = frame_directions(m, n_projections, rng);
    let project = |law: &EmpiricalLaw, u: &[f64]| {
        sorted((0..law.len()).map(|j| law.atom(j).iter().zip(u).map(|(a, b)| a * b).sum()))
    };
    let total: f64 = par::map(dirs.len(), |k| {
        w2_sq_sorted(&project(p, &dirs[k]), &project(q, &dirs[k]))
    })
    .into_iter()
    .sum();
    Ok((m as f64 * total / dirs.len() as f64).sqrt())
}

/// Index set S over which E′ is averaged: all atoms, or a seeded subsample
/// of size M.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    indices: Option<Vec<usize>>,
    n: usize,
}

impl Subsample {
    pub fn all(n: usize) -> Self {
        Subsample { indices: None, n }
    }

    /// Subsample of `budget` distinct atoms out of `n`; `budget ≥ n` gives
    /// all atoms.
    pub fn draw<R: Rng>(n: usize, budget: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("empty law".into()));
        }
        if budget < 2.min(n) {
            return Err(Error::Domain(format!(
                "interaction budget {budget} below 2"
            )));
        }
        if budget >= n {
            return Ok(Subsample::all(n));
        }
        let mut idx = index::sample(rng, n, budget).into_vec();
        idx.sort_unstable();
        Ok(Subsample {
            indices: Some(idx),
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.as_ref().map_or(self.n, |v| v.len())
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn is_full(&self) -> bool {
        self.indices.is_none()
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = usize> + '_> {
        match &self.indices {
            None => Box::new(0..self.n),
            Some(v) => Box::new(v.iter().copied()),
        }
    }

    /// (1/M) Σ_{j∈S} f(j), summed in index order.
    pub fn average(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.iter().map(f).sum::<f64>() / self.len() as f64
    }

    /// Vector version of [`Subsample::average`]: `f(j, acc)` adds into `acc`.
    pub fn average_into(&self, out: &mut [f64], mut f: impl FnMut(usize, &mut [f64])) {
        out.fill(0.0);
        for j in self.iter() {
            f(j, out);
        }
        let m = self.len() as f64;
        out.iter_mut().for_each(|v| *v /= m);
    }
}

/// E′[f(θ′, θ)] with θ = `own` held fixed, averaged over a seeded subsample
/// of `budget` atoms (all atoms when `budget` equals N).
pub fn prime_expectation(
    f: impl Fn(&[f64], &[f64]) -> f64,
    law: &EmpiricalLaw,
    own: &[f64],
    budget: usize,
    rng: &RandomSource,
) -> Result<f64> {
    if law.is_empty() {
        return Err(Error::Domain("empty law".into()));
    }
    if budget < 2 || budget > law.len() {
        return Err(Error::Domain(format!(
            "interaction budget {budget} outside [2, {}]",
            law.len()
        )));
    }
    let s = Subsample::draw(law.len(), budget, &mut rng.aux(PRIME_TAG))?;
    Ok(s.average(|j| f(law.atom(j), own)))
}

/// Outcome of [`check_lions_derivative`].
#[derive(Debug, Clone, PartialEq)]
pub struct LionsReport {
    pub epsilon: f64,
    /// Relative error per direction.
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub all_finite: bool,
}

impl LionsReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.all_finite && self.max_error <= tol
    }
}

/// Compares the lifted difference quotient [f(law(𝔳+εη)) − f(law(𝔳))]/ε with
/// the pairing (1/N)Σ⟨df(μ, atom_i), η_i⟩ for `directions` random direction
/// fields η of unit L²(μ) norm.
///
/// The error is relative to ‖df(μ,·)‖_{L²(μ)}·‖η‖ (absolute when df vanishes).
pub fn check_lions_derivative<F, D>(
    f: F,
    df: D,
    mu: &EmpiricalLaw,
    directions: usize,
    epsilon: f64,
    rng: &RandomSource,
) -> LionsReport
where
    F: Fn(&EmpiricalLaw) -> f64,
    D: Fn(&EmpiricalLaw, &[f64], &mut [f64]),
{
    let (n, m) = (mu.len(), mu.dim());
    let mut grad = vec![0.0; n * m];
    for j in 0..n {
        df(mu, mu.atom(j), &mut grad[j * m..(j + 1) * m]);
    }
    let df_norm = (grad.iter().map(|g| g * g).sum::<f64>() / n as f64).sqrt();
    let base = f(mu);
    let mut errors = Vec::with_capacity(directions);
    let mut all_finite = base.is_finite() && df_norm.is_finite();
    for r in 0..directions {
        let mut g = rng.aux(LIONS_TAG + r as u64);
        let mut eta: Vec<f64> = (0..n * m).map(|_| g.sample(StandardNormal)).collect();
        let norm = (eta.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
        eta.iter_mut().for_each(|e| *e /= norm);
        let moved: Vec<f64> = mu
            .atoms()
            .iter()
            .zip(&eta)
            .map(|(a, e)| a + epsilon * e)
            .collect();
        let fd = match EmpiricalLaw::new(&moved, m) {
            Ok(law) => (f(&law) - base) / epsilon,
            Err(_) => f64::NAN,
        };
        let pairing = grad.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let scale = if df_norm > 0.0 { df_norm } else { 1.0 };
        let err = (fd - pairing).abs() / scale;
        if !err.is_finite() {
            all_finite = false;
        }
        errors.push(if err.is_finite() { err } else { f64::INFINITY });
    }
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    LionsReport {
        epsilon,
        errors,
        max_error,
        all_finite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, mean: f64, seed: u64) -> Vec<f64> {
        let mut r = RandomSource::new(seed).aux(1);
        (0..n)
            .map(|_| mean + r.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn point_masses() {
        let a = vec![0.0; 10];
        let b = vec![3.5; 10];
        let (p, q) = (
            EmpiricalLaw::new(&a, 1).unwrap(),
            EmpiricalLaw::new(&b, 1).unwrap(),
        );
        assert_eq!(w2_distance_1d(&p, &p).unwrap(), 0.0);
        assert!((w2_distance_1d(&p, &q).unwrap() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_shift() {
        let a = gaussian(100_000, 0.0, 1);
        let b = gaussian(100_000, 2.0, 2);
        let d = w2_distance_1d(
            &EmpiricalLaw::new(&a, 1).unwrap(),
            &EmpiricalLaw::new(&b, 1).unwrap(),
        )
        .unwrap();
        assert!((d - 2.0).abs() < 0.03, "{d}");
    }

    #[test]
    fn multi_d_needs_sliced() {
        let a = vec![0.0; 4];
        let p = EmpiricalLaw::new(&a, 2).unwrap();
        assert!(matches!(w2_distance_1d(&p, &p), Err(Error::Dispatch(_))));
    }

    #[test]
    fn unequal_counts_use_quantiles() {
        let a = [0.0, 1.0];
        let b = [0.0, 0.0, 1.0, 1.0];
        let d = w2_distance_1d(
            &EmpiricalLaw::new(&a, 1).unwrap(),
            &EmpiricalLaw::new(&b, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(d, 0.0);
        let c = [0.0, 0.0, 0.0, 1.0];
        let d = w2_distance_1d(
            &EmpiricalLaw::new(&a, 1).unwrap(),
            &EmpiricalLaw::new(&c, 1).unwrap(),
        )
        .unwrap();
        assert!((d * d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sliced_translation() {
        let a = gaussian(2000, 0.0, 3);
        let b: Vec<f64> = a.chunks(2).flat_map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
        let (p, q) = (
            EmpiricalLaw::new(&a, 2).unwrap(),
            EmpiricalLaw::new(&b, 2).unwrap(),
        );
        let d = w2_distance_sliced(&p, &q, 128, &RandomSource::new(0)).unwrap();
        assert!((d - 5.0).abs() < 0.1, "{d}");
        assert_eq!(
            w2_distance_sliced(&p, &p, 128, &RandomSource::new(0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn sliced_reduces_to_1d() {
        let a = gaussian(500, 0.0, 4);
        let b = gaussian(500, 1.0, 5);
        let (p, q) = (
            EmpiricalLaw::new(&a, 1).unwrap(),
            EmpiricalLaw::new(&b, 1).unwrap(),
        );
        assert_eq!(
            w2_distance_sliced(&p, &q, 1, &RandomSource::new(9)).unwrap(),
            w2_distance_1d(&p, &q).unwrap()
        );
    }

    #[test]
    fn prime_expectation_examples() {
        let atoms = [1.0, 2.0, 3.0];
        let law = EmpiricalLaw::new(&atoms, 1).unwrap();
        let rng = RandomSource::new(0);
        assert_eq!(
            prime_expectation(|_, _| 1.0, &law, &[0.0], 3, &rng).unwrap(),
            1.0
        );
        assert_eq!(
            prime_expectation(|a, _| a[0], &law, &[0.0], 3, &rng).unwrap(),
            2.0
        );
        assert!(prime_expectation(|a, _| a[0], &law, &[0.0], 1, &rng).is_err());
        let g = gaussian(100_000, 0.0, 6);
        let law = EmpiricalLaw::new(&g, 1).unwrap();
        let v = prime_expectation(|a, o| a[0] * o[0], &law, &[1.0], 100_000, &rng).unwrap();
        assert!(v.abs() < 0.01);
    }

    #[test]
    fn non_finite_atoms_rejected() {
        assert!(EmpiricalLaw::new(&[1.0, f64::NAN], 1).is_err());
        assert!(EmpiricalLaw::new(&[], 1).is_err());
    }
}
