use crate::error::{config, Error, Result};
use crate::grid::TimeGrid;
use crate::paths::NodeArray;

/// Convex control domain U ⊂ ℝ^k.
#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibleSet {
    Unbounded,
    /// Componentwise box [lo, hi].
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl AdmissibleSet {
    /// Euclidean projection onto U, in place.
    pub fn project(&self, v: &mut [f64]) {
        if let AdmissibleSet::Box { lo, hi } = self {
            for ((x, l), h) in v.iter_mut().zip(lo).zip(hi) {
                *x = x.clamp(*l, *h);
            }
        }
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        match self {
            AdmissibleSet::Unbounded => v.iter().all(|x| x.is_finite()),
            AdmissibleSet::Box { lo, hi } => {
                v.iter().zip(lo).zip(hi).all(|((x, l), h)| l <= x && x <= h)
            }
        }
    }

    fn check(&self, k: usize) -> Result<()> {
        if let AdmissibleSet::Box { lo, hi } = self {
            if lo.len() != k || hi.len() != k || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                return Err(config(format!("control box must have {k} ordered bounds")));
            }
        }
        Ok(())
    }
}

/// Per-particle control u on [−δ, T], stored at global nodes 0..=T. Values on
/// [−δ, 0) are the initial segment γ and never change; node t = 0 is the first
/// controllable node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProcess {
    values: NodeArray,
    set: AdmissibleSet,
    first_free: usize,
}

impl ControlProcess {
    /// Control of dimension `k` with u ≡ γ ≡ 0.
    pub fn zeros(
        grid: &TimeGrid,
        n_particles: usize,
        k: usize,
        set: AdmissibleSet,
    ) -> Result<Self> {
        set.check(k)?;
        let values = NodeArray::zeros(0, grid.horizon_index() + 1, n_particles, k);
        let mut u = ControlProcess {
            values,
            set,
            first_free: grid.zero_index(),
        };
        u.project_all();
        Ok(u)
    }

    /// The empty control (k = 0) for uncontrolled problems.
    pub fn none(grid: &TimeGrid, n_particles: usize) -> Self {
        ControlProcess::uncontrolled(grid, n_particles, 0)
    }

    /// v ≡ 0 in ℝ^k with U = ℝ^k.
    pub fn uncontrolled(grid: &TimeGrid, n_particles: usize, k: usize) -> Self {
        ControlProcess::zeros(grid, n_particles, k, AdmissibleSet::Unbounded)
            .expect("unbounded set")
    }

    /// u_t^i = `gamma(t, i)` on [−δ, 0) and `f(g, t, i)` on [0, T], projected
    /// onto U.
    pub fn from_fn(
        grid: &TimeGrid,
        n_particles: usize,
        k: usize,
        set: AdmissibleSet,
        mut gamma: impl FnMut(f64, usize, &mut [f64]),
        mut f: impl FnMut(usize, f64, usize, &mut [f64]),
    ) -> Result<Self> {
        set.check(k)?;
        let z = grid.zero_index();
        let values = NodeArray::from_fn(0, grid.horizon_index(), n_particles, k, |g, i, out| {
            if g < z {
                gamma(grid.time(g), i, out)
            } else {
                f(g, grid.time(g), i, out)
            }
        });
        if !values.all_finite() {
            return Err(Error::Domain("control has non-finite values".into()));
        }
        let mut u = ControlProcess {
            values,
            set,
            first_free: z,
        };
        u.project_all();
        Ok(u)
    }

    fn project_all(&mut self) {
        let k = self.values.width();
        if k == 0 {
            return;
        }
        let set = &self.set;
        self.values
            .data_mut()
            .chunks_mut(k)
            .for_each(|r| set.project(r));
    }

    pub fn dim(&self) -> usize {
        self.values.width()
    }
    pub fn n_particles(&self) -> usize {
        self.values.n_particles()
    }
    pub fn set(&self) -> &AdmissibleSet {
        &self.set
    }
    pub fn values(&self) -> &NodeArray {
        &self.values
    }
    /// First node whose value may be changed (the node t = 0).
    pub fn first_free_node(&self) -> usize {
        self.first_free
    }
    pub fn last_node(&self) -> usize {
        self.values.last_node()
    }
    pub fn get(&self, g: usize, i: usize) -> &[f64] {
        self.values.get(g, i)
    }
    pub fn at(&self, g: usize) -> &[f64] {
        self.values.at(g)
    }

    /// Overwrites node `g ≥ 0` with `values` (N × k) projected onto U.
    pub fn set_node(&mut self, g: usize, values: &[f64]) {
        assert!(
            g >= self.first_free,
            "node {g} belongs to the initial segment"
        );
        let k = self.dim();
        let row = self.values.at_mut(g);
        row.copy_from_slice(values);
        if k > 0 {
            row.chunks_mut(k).for_each(|r| self.set.project(r));
        }
    }

    /// True when shapes and the initial segment agree.
    pub fn compatible(&self, other: &ControlProcess) -> bool {
        self.values.n_particles() == other.values.n_particles()
            && self.dim() == other.dim()
            && self.last_node() == other.last_node()
            && (0..self.first_free).all(|g| self.at(g) == other.at(g))
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid, n_particles: usize) -> Result<()> {
        if self.last_node() != grid.horizon_index() || self.first_free != grid.zero_index() {
            return Err(config("control does not match the grid"));
        }
        if self.n_particles() != n_particles {
            return Err(config(format!(
                "control has {} particles, expected {n_particles}",
                self.n_particles()
            )));
        }
        Ok(())
    }
}

/// u + θ(v − u). Admissible by convexity of U.
pub fn perturb_control(
    u: &ControlProcess,
    v: &ControlProcess,
    theta: f64,
) -> Result<ControlProcess> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, 1]")));
    }
    if !u.compatible(v) {
        return Err(config("controls differ in shape or initial segment"));
    }
    let mut out = u.clone();
    for (o, (a, b)) in out
        .values
        .data_mut()
        .iter_mut()
        .zip(u.values.data().iter().zip(v.values.data()))
    {
        *o = a + theta * (b - a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 0.0, 0.25, 0.25).unwrap()
    }

    #[test]
    fn perturbation_endpoints() {
        let g = grid();
        let set = AdmissibleSet::Unbounded;
        let u = ControlProcess::zeros(&g, 3, 1, set.clone()).unwrap();
        let v =
            ControlProcess::from_fn(&g, 3, 1, set, |_, _, o| o[0] = 0.0, |_, _, _, o| o[0] = 2.0)
                .unwrap();
        assert_eq!(perturb_control(&u, &v, 0.0).unwrap(), u);
        assert_eq!(perturb_control(&u, &v, 1.0).unwrap(), v);
        let h = perturb_control(&u, &v, 0.5).unwrap();
        assert!(h.values().at(g.zero_index()).iter().all(|&x| x == 1.0));
        assert!(h.values().at(0).iter().all(|&x| x == 0.0));
        assert!(matches!(
            perturb_control(&u, &v, 1.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn box_projection() {
        let s = AdmissibleSet::Box {
            lo: vec![-1.0],
            hi: vec![1.0],
        };
        let mut x = [3.0];
        s.project(&mut x);
        assert_eq!(x, [1.0]);
        assert!(s.contains(&x));
        assert!(ControlProcess::zeros(&grid(), 2, 2, s).is_err());
    }
}
