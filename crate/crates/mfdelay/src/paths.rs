//! Path storage.
//!
//! A [`NodeArray`] holds one `width`-vector per (node, particle), node-major,
//! for a contiguous range of global grid nodes. It is the storage behind the
//! particle ensembles, the backward solutions, controls and regression
//! features.

use crate::error::{config, Error, Result};
use crate::grid::TimeGrid;
use crate::rng::BrownianIncrements;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeArray {
    first: usize,
    n_nodes: usize,
    n_particles: usize,
    width: usize,
    data: Vec<f64>,
}

/// Read-only view of a prefix of a [`NodeArray`].
#[derive(Debug, Clone, Copy)]
pub struct NodeView<'a> {
    first: usize,
    n_particles: usize,
    width: usize,
    data: &'a [f64],
}

impl<'a> NodeView<'a> {
    pub fn at(&self, g: usize) -> &'a [f64] {
        let w = self.n_particles * self.width;
        let o = (g - self.first) * w;
        &self.data[o..o + w]
    }
    pub fn get(&self, g: usize, i: usize) -> &'a [f64] {
        let o = ((g - self.first) * self.n_particles + i) * self.width;
        &self.data[o..o + self.width]
    }
}

impl NodeArray {
    pub fn zeros(first: usize, n_nodes: usize, n_particles: usize, width: usize) -> Self {
        NodeArray {
            first,
            n_nodes,
            n_particles,
            width,
            data: vec![0.0; n_nodes * n_particles * width],
        }
    }

    /// Builds an array covering global nodes `first..=last` from `f(g, i, out)`.
    pub fn from_fn(
        first: usize,
        last: usize,
        n_particles: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, &mut [f64]),
    ) -> Self {
        let mut a = NodeArray::zeros(first, last + 1 - first, n_particles, width);
        for g in first..=last {
            for i in 0..n_particles {
                f(g, i, a.get_mut(g, i));
            }
        }
        a
    }

    pub fn first_node(&self) -> usize {
        self.first
    }
    pub fn last_node(&self) -> usize {
        self.first + self.n_nodes - 1
    }
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    pub fn n_particles(&self) -> usize {
        self.n_particles
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn contains(&self, g: usize) -> bool {
        g >= self.first && g <= self.last_node()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offset(&self, g: usize) -> usize {
        debug_assert!(
            self.contains(g),
            "node {g} outside {}..={}",
            self.first,
            self.last_node()
        );
        (g - self.first) * self.n_particles * self.width
    }

    /// All particles at node `g` (N × width).
    pub fn at(&self, g: usize) -> &[f64] {
        let o = self.offset(g);
        &self.data[o..o + self.n_particles * self.width]
    }
    pub fn at_mut(&mut self, g: usize) -> &mut [f64] {
        let o = self.offset(g);
        let w = self.n_particles * self.width;
        &mut self.data[o..o + w]
    }
    pub fn get(&self, g: usize, i: usize) -> &[f64] {
        let o = self.offset(g) + i * self.width;
        &self.data[o..o + self.width]
    }
    pub fn get_mut(&mut self, g: usize, i: usize) -> &mut [f64] {
        let o = self.offset(g) + i * self.width;
        let w = self.width;
        &mut self.data[o..o + w]
    }

    pub fn view(&self) -> NodeView<'_> {
        NodeView {
            first: self.first,
            n_particles: self.n_particles,
            width: self.width,
            data: &self.data,
        }
    }

    /// Nodes up to and including `g` as a view, and node `g + 1` mutably.
    pub fn split_next(&mut self, g: usize) -> (NodeView<'_>, &mut [f64]) {
        let o = self.offset(g + 1);
        let w = self.n_particles * self.width;
        let (head, tail) = self.data.split_at_mut(o);
        (
            NodeView {
                first: self.first,
                n_particles: self.n_particles,
                width: self.width,
                data: head,
            },
            &mut tail[..w],
        )
    }

    /// Nodes from `g + 1` on as a view, and node `g` mutably.
    pub fn split_prev(&mut self, g: usize) -> (&mut [f64], NodeView<'_>) {
        let o = self.offset(g);
        let w = self.n_particles * self.width;
        let (head, tail) = self.data.split_at_mut(o + w);
        (
            &mut head[o..],
            NodeView {
                first: g + 1,
                n_particles: self.n_particles,
                width: self.width,
                data: tail,
            },
        )
    }

    /// Node `g` immutably and node `g + 1` mutably.
    pub fn step_pair_mut(&mut self, g: usize) -> (&[f64], &mut [f64]) {
        let o = self.offset(g);
        let w = self.n_particles * self.width;
        let (head, tail) = self.data[o..].split_at_mut(w);
        (head, &mut tail[..w])
    }

    /// Copy of the path of particle `i`.
    pub fn path(&self, i: usize) -> SamplePath {
        let mut values = Vec::with_capacity(self.n_nodes * self.width);
        for g in self.first..=self.last_node() {
            values.extend_from_slice(self.get(g, i));
        }
        SamplePath {
            first_node: self.first,
            width: self.width,
            values,
        }
    }

    /// Cross-sectional mean at node `g`.
    pub fn node_mean(&self, g: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.width];
        for row in self.at(g).chunks(self.width) {
            for (a, v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n_particles as f64);
        m
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// One particle's path over a range of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub first_node: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn at(&self, g: usize) -> &[f64] {
        let o = (g - self.first_node) * self.width;
        &self.values[o..o + self.width]
    }
}

/// Initial segment ξ on [−δ, 0] for every particle.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSegment {
    values: NodeArray,
}

impl InitialSegment {
    pub fn new(grid: &TimeGrid, values: NodeArray) -> Result<Self> {
        if values.first_node() != 0 || values.last_node() != grid.zero_index() {
            return Err(config(format!(
                "initial segment must cover nodes 0..={}, got {}..={}",
                grid.zero_index(),
                values.first_node(),
                values.last_node()
            )));
        }
        if !values.all_finite() {
            return Err(Error::Domain(
                "initial segment has non-finite values".into(),
            ));
        }
        Ok(InitialSegment { values })
    }

    /// ξ ≡ `x0` for every particle.
    pub fn constant(grid: &TimeGrid, n_particles: usize, x0: &[f64]) -> Self {
        let values =
            NodeArray::from_fn(0, grid.zero_index(), n_particles, x0.len(), |_, _, out| {
                out.copy_from_slice(x0)
            });
        InitialSegment::new(grid, values).expect("finite constant segment")
    }

    /// ξ_t^i = f(t, i).
    pub fn from_fn(
        grid: &TimeGrid,
        n_particles: usize,
        dim: usize,
        mut f: impl FnMut(f64, usize, &mut [f64]),
    ) -> Result<Self> {
        let values = NodeArray::from_fn(0, grid.zero_index(), n_particles, dim, |g, i, out| {
            f(grid.time(g), i, out)
        });
        InitialSegment::new(grid, values)
    }

    pub fn values(&self) -> &NodeArray {
        &self.values
    }
    pub fn n_particles(&self) -> usize {
        self.values.n_particles()
    }
    pub fn dim(&self) -> usize {
        self.values.width()
    }
}

/// Terminal segments (ξ_t, η_t) for Y and Z on [T, T+K].
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSegment {
    y: NodeArray,
    z: NodeArray,
}

impl TerminalSegment {
    pub fn new(grid: &TimeGrid, y: NodeArray, z: NodeArray) -> Result<Self> {
        for (name, a) in [("Y", &y), ("Z", &z)] {
            if a.first_node() != grid.horizon_index() || a.last_node() != grid.end_index() {
                return Err(config(format!(
                    "terminal {name} segment must cover nodes {}..={}",
                    grid.horizon_index(),
                    grid.end_index()
                )));
            }
            if !a.all_finite() {
                return Err(Error::Domain(format!(
                    "terminal {name} segment has non-finite values"
                )));
            }
        }
        if y.n_particles() != z.n_particles() || z.width() % y.width().max(1) != 0 {
            return Err(config("terminal Y and Z segments disagree in shape"));
        }
        Ok(TerminalSegment { y, z })
    }

    /// Segments built from the Brownian path: `f(t, B_t, y_out, z_out)`.
    pub fn from_brownian(
        grid: &TimeGrid,
        increments: &BrownianIncrements,
        m: usize,
        mut f: impl FnMut(f64, &[f64], &mut [f64], &mut [f64]),
    ) -> Result<Self> {
        let b = increments.path(grid);
        let d = increments.dim();
        let n = increments.n_particles();
        let (h, e) = (grid.horizon_index(), grid.end_index());
        let mut y = NodeArray::zeros(h, e + 1 - h, n, m);
        let mut z = NodeArray::zeros(h, e + 1 - h, n, m * d);
        for g in h..=e {
            for i in 0..n {
                f(grid.time(g), b.get(g, i), y.get_mut(g, i), z.get_mut(g, i));
            }
        }
        TerminalSegment::new(grid, y, z)
    }

    /// Zero segments.
    pub fn zeros(grid: &TimeGrid, n_particles: usize, m: usize, d: usize) -> Self {
        let (h, e) = (grid.horizon_index(), grid.end_index());
        TerminalSegment {
            y: NodeArray::zeros(h, e + 1 - h, n_particles, m),
            z: NodeArray::zeros(h, e + 1 - h, n_particles, m * d),
        }
    }

    pub fn y(&self) -> &NodeArray {
        &self.y
    }
    pub fn z(&self) -> &NodeArray {
        &self.z
    }
    pub fn n_particles(&self) -> usize {
        self.y.n_particles()
    }
    pub fn dim(&self) -> usize {
        self.y.width()
    }
    pub fn noise_dim(&self) -> usize {
        self.z.width() / self.y.width().max(1)
    }
}
