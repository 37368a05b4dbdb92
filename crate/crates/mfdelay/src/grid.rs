//! Uniform time grid on [−δ, T+K] with delay and anticipation offsets.
//!
//! Nodes are addressed by a global index `g`, with `t_g = −δ + g·dt`.
//! `zero_index()` is the node at t = 0, `horizon_index()` the node at T and
//! `end_index()` the node at T+K.

use crate::error::{config, Error, Result};

/// Largest node count accepted by [`TimeGrid::new`].
pub const MAX_NODES: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    delay_steps: usize,
    horizon_steps: usize,
    extension_steps: usize,
    // Indexed by g - zero_index() for nodes in [0, T].
    delta_map: Vec<usize>,
    zeta_map: Vec<usize>,
}

fn steps_of(name: &str, value: f64, dt: f64) -> Result<usize> {
    let n = value / dt;
    let r = n.round();
    if (n - r).abs() > 1e-9 * r.max(1.0) {
        return Err(config(format!(
            "{name} ({value}) is not an integer multiple of dt ({dt})"
        )));
    }
    Ok(r as usize)
}

impl TimeGrid {
    /// Builds the grid for horizon `t`, anticipation window `k`, delay `delta`
    /// and step `dt`. Anticipation maps default to the constant shift `delta`
    /// clamped at T+K.
    pub fn new(t: f64, k: f64, delta: f64, dt: f64) -> Result<Self> {
        let finite = [t, k, delta, dt].iter().all(|v| v.is_finite());
        if !finite || t <= 0.0 || k < 0.0 || delta < 0.0 || dt <= 0.0 {
            return Err(config(format!(
                "need T > 0, K >= 0, delta >= 0, dt > 0 (got T={t}, K={k}, delta={delta}, dt={dt})"
            )));
        }
        let mut errors = Vec::new();
        let mut steps = |name, v| {
            steps_of(name, v, dt).unwrap_or_else(|e| {
                errors.push(e.to_string());
                0
            })
        };
        let (n_t, n_k, n_d) = (steps("T", t), steps("K", k), steps("delta", delta));
        if !errors.is_empty() {
            return Err(config(errors.join("; ")));
        }
        let nodes = (n_d as u128) + (n_t as u128) + (n_k as u128) + 1;
        if nodes > MAX_NODES as u128 {
            return Err(Error::Capacity(format!(
                "{nodes} grid nodes exceed the limit {MAX_NODES}"
            )));
        }
        let mut grid = TimeGrid {
            dt,
            delay_steps: n_d,
            horizon_steps: n_t,
            extension_steps: n_k,
            delta_map: Vec::new(),
            zeta_map: Vec::new(),
        };
        grid.set_shifts(n_d, n_d);
        Ok(grid)
    }

    fn set_shifts(&mut self, delta_steps: usize, zeta_steps: usize) {
        let end = self.end_index();
        let nodes = self.zero_index()..=self.horizon_index();
        self.delta_map = nodes.clone().map(|g| (g + delta_steps).min(end)).collect();
        self.zeta_map = nodes.map(|g| (g + zeta_steps).min(end)).collect();
    }

    /// Replaces the anticipation maps by constant shifts (in steps), clamped
    /// at T+K.
    pub fn with_shifts(mut self, delta_steps: usize, zeta_steps: usize) -> Self {
        self.set_shifts(delta_steps, zeta_steps);
        self
    }

    /// Replaces the anticipation maps by general offsets δ(s), ζ(s) ≥ 0.
    /// Offsets must be grid multiples; targets beyond T+K are clamped at the
    /// right end when `clamp` is set and rejected otherwise.
    pub fn with_anticipation(
        mut self,
        delta_fn: impl Fn(f64) -> f64,
        zeta_fn: impl Fn(f64) -> f64,
        clamp: bool,
    ) -> Result<Self> {
        let end = self.end_index();
        let build = |name: &str, f: &dyn Fn(f64) -> f64| -> Result<Vec<usize>> {
            (self.zero_index()..=self.horizon_index())
                .map(|g| {
                    let s = self.time(g);
                    let off = f(s);
                    if !(off >= 0.0) {
                        return Err(config(format!("{name}({s}) = {off} is negative")));
                    }
                    let target = g + steps_of(name, off, self.dt)?;
                    if target > end && !clamp {
                        return Err(config(format!("s + {name}(s) exceeds T+K at s = {s}")));
                    }
                    Ok(target.min(end))
                })
                .collect()
        };
        let d = build("delta", &delta_fn)?;
        let z = build("zeta", &zeta_fn)?;
        self.delta_map = d;
        self.zeta_map = z;
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }
    pub fn delay(&self) -> f64 {
        self.delay_steps as f64 * self.dt
    }
    pub fn horizon(&self) -> f64 {
        self.horizon_steps as f64 * self.dt
    }
    pub fn extension(&self) -> f64 {
        self.extension_steps as f64 * self.dt
    }
    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }
    pub fn extension_steps(&self) -> usize {
        self.extension_steps
    }
    pub fn n_nodes(&self) -> usize {
        self.delay_steps + self.horizon_steps + self.extension_steps + 1
    }
    pub fn n_steps(&self) -> usize {
        self.n_nodes() - 1
    }
    pub fn zero_index(&self) -> usize {
        self.delay_steps
    }
    pub fn horizon_index(&self) -> usize {
        self.delay_steps + self.horizon_steps
    }
    pub fn end_index(&self) -> usize {
        self.n_nodes() - 1
    }
    pub fn t_start(&self) -> f64 {
        -self.delay()
    }
    pub fn t_end(&self) -> f64 {
        self.horizon() + self.extension()
    }

    /// Time of global node `g`. Computed from the step count so that t = 0
    /// and t = T come out exact.
    pub fn time(&self, g: usize) -> f64 {
        (g as f64 - self.delay_steps as f64) * self.dt
    }

    /// Node reached from `g` by t ↦ t + δ(t); `g` must lie in [0, T].
    pub fn delta_target(&self, g: usize) -> usize {
        self.delta_map[g - self.zero_index()]
    }

    /// Node reached from `g` by t ↦ t + ζ(t); `g` must lie in [0, T].
    pub fn zeta_target(&self, g: usize) -> usize {
        self.zeta_map[g - self.zero_index()]
    }

    /// Smallest L with Σ_{s≤T} g(s+δ(s))Δt ≤ L·Σ_{s≤T+K} g(s)Δt for all
    /// nonnegative grid functions g: the largest preimage count of the two
    /// anticipation maps.
    pub fn min_l_bound(&self) -> f64 {
        let mut counts = vec![0usize; self.n_nodes()];
        let mut worst = 0;
        for map in [&self.delta_map, &self.zeta_map] {
            counts.iter_mut().for_each(|c| *c = 0);
            for &g in map.iter() {
                counts[g] += 1;
                worst = worst.max(counts[g]);
            }
        }
        worst.max(1) as f64
    }
}

/// Delay and anticipation data of a problem together with the change of
/// variables constant L.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySpec {
    pub delta: f64,
    pub l_bound: f64,
}

impl DelaySpec {
    /// The tightest admissible spec for `grid`.
    pub fn for_grid(grid: &TimeGrid) -> Self {
        DelaySpec {
            delta: grid.delay(),
            l_bound: grid.min_l_bound(),
        }
    }

    /// Checks the declared L against the grid's anticipation maps.
    pub fn check(&self, grid: &TimeGrid) -> Result<()> {
        let need = grid.min_l_bound();
        if self.l_bound < need {
            return Err(config(format!(
                "declared L = {} is below the grid's preimage bound {need}",
                self.l_bound
            )));
        }
        if (self.delta - grid.delay()).abs() > 1e-12 * self.delta.max(1.0) {
            return Err(config(format!(
                "delta = {} does not match the grid delay {}",
                self.delta,
                grid.delay()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_horizon_has_101_nodes() {
        let g = TimeGrid::new(1.0, 0.0, 0.0, 0.01).unwrap();
        assert_eq!(g.n_nodes(), 101);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(g.end_index()), 1.0);
    }

    #[test]
    fn quarter_grid() {
        let g = TimeGrid::new(1.0, 0.25, 0.25, 0.25).unwrap();
        let times: Vec<f64> = (0..g.n_nodes()).map(|i| g.time(i)).collect();
        assert_eq!(times, vec![-0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.25]);
        assert_eq!(g.delay_steps(), 1);
        assert_eq!(g.delta_target(g.horizon_index()), g.end_index());
    }

    #[test]
    fn rejects_non_multiple_delay() {
        let err = TimeGrid::new(1.0, 0.0, 0.3, 0.25).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("delta") && m.contains("dt")));
    }

    #[test]
    fn capacity_limit() {
        assert!(matches!(
            TimeGrid::new(1.0, 0.0, 0.0, 1e-9),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn clamped_anticipation_raises_l() {
        let g = TimeGrid::new(1.0, 0.0, 0.0, 0.01)
            .unwrap()
            .with_anticipation(|_| 0.25, |_| 0.25, true)
            .unwrap();
        // the last 26 nodes of [0, 1] all map onto T
        assert_eq!(g.min_l_bound(), 26.0);
        assert!(DelaySpec {
            delta: 0.0,
            l_bound: 25.0
        }
        .check(&g)
        .is_err());
        assert!(DelaySpec::for_grid(&g).check(&g).is_ok());
    }

    #[test]
    fn unclamped_overflow_is_rejected() {
        let g = TimeGrid::new(1.0, 0.1, 0.0, 0.1).unwrap();
        assert!(g
            .clone()
            .with_anticipation(|_| 0.2, |_| 0.0, false)
            .is_err());
        assert!(g.with_anticipation(|_| 0.1, |_| 0.0, false).is_ok());
    }
}
