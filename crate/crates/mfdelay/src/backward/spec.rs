use rand::Rng;
use rand_distr::StandardNormal;

use super::{CoParticles, Driver, DriverInputs};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Arguments of a driver f(t, y, z, y_δ, z_ζ, y′, z′, y′_δ, z′_ζ).
#[derive(Debug, Clone, Copy)]
pub struct DriverArgs<'a> {
    pub t: f64,
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub y_ant: &'a [f64],
    pub z_ant: &'a [f64],
    pub y_p: &'a [f64],
    pub z_p: &'a [f64],
    pub y_ant_p: &'a [f64],
    pub z_ant_p: &'a [f64],
}

/// How E′ is taken over the primed arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimedMode {
    /// f does not read primed arguments (they are passed as zeros).
    Unused,
    /// f is affine in the primed arguments, so E′[f] = f at their means.
    Affine,
    /// Average over the seeded interaction subsample.
    General,
}

/// Which comparison restrictions a driver claims:
/// (i) independent of z′, (ii) nondecreasing in y′, (iii) increasing in the
/// anticipated Y, (iv) independent of the anticipated Z, (v) independent of
/// the anticipated z′, (vi) nondecreasing in the anticipated y′.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MonotonicityFlags {
    pub indep_z_prime: bool,
    pub nondecr_y_prime: bool,
    pub incr_y_ant: bool,
    pub indep_z_ant: bool,
    pub indep_z_ant_prime: bool,
    pub nondecr_y_ant_prime: bool,
}

impl MonotonicityFlags {
    pub const ALL: MonotonicityFlags = MonotonicityFlags {
        indep_z_prime: true,
        nondecr_y_prime: true,
        incr_y_ant: true,
        indep_z_ant: true,
        indep_z_ant_prime: true,
        nondecr_y_ant_prime: true,
    };

    pub fn all(&self) -> bool {
        *self == Self::ALL
    }
}

/// A driver given as a closure over the full argument list.
pub struct DriverSpec<F> {
    m: usize,
    d: usize,
    lipschitz: f64,
    f: F,
    primed: PrimedMode,
    anticipated: bool,
    solution_dependent: bool,
    zeros: Vec<f64>,
    pub flags: MonotonicityFlags,
}

impl<F> DriverSpec<F>
where
    F: Fn(&DriverArgs, &mut [f64]) + Sync,
{
    /// `anticipated` says whether f reads its own anticipated arguments.
    pub fn new(
        m: usize,
        d: usize,
        lipschitz: f64,
        primed: PrimedMode,
        anticipated: bool,
        f: F,
    ) -> Self {
        DriverSpec {
            m,
            d,
            lipschitz,
            f,
            primed,
            anticipated,
            solution_dependent: true,
            zeros: vec![0.0; (m * d).max(m)],
            flags: MonotonicityFlags::default(),
        }
    }

    pub fn with_flags(mut self, flags: MonotonicityFlags) -> Self {
        self.flags = flags;
        self
    }

    /// Declares that f reads neither (Y, Z) nor their anticipated or primed
    /// versions.
    pub fn independent_of_solution(mut self) -> Self {
        self.solution_dependent = false;
        self
    }

    pub fn call(&self, a: &DriverArgs, out: &mut [f64]) {
        (self.f)(a, out)
    }

    fn widths(&self) -> [usize; 4] {
        [self.m, self.m * self.d, self.m, self.m * self.d]
    }

    /// Falsifies the declared flags on `n_probes` random argument tuples.
    pub fn check_flags(&self, n_probes: usize, rng: &RandomSource) -> Result<()> {
        let mut r = rng.aux(0xf1a9);
        let w = self.widths();
        let total: usize = 2 * w.iter().sum::<usize>();
        let mut out0 = vec![0.0; self.m];
        let mut out1 = vec![0.0; self.m];
        // slot index into the flat argument vector for each flag
        let slots: [(bool, usize, bool, &str); 6] = [
            (
                self.flags.indep_z_prime,
                4 + 1,
                false,
                "(i) independence of z'",
            ),
            (
                self.flags.nondecr_y_prime,
                4,
                true,
                "(ii) monotonicity in y'",
            ),
            (
                self.flags.incr_y_ant,
                2,
                true,
                "(iii) monotonicity in the anticipated y",
            ),
            (
                self.flags.indep_z_ant,
                3,
                false,
                "(iv) independence of the anticipated z",
            ),
            (
                self.flags.indep_z_ant_prime,
                4 + 3,
                false,
                "(v) independence of the anticipated z'",
            ),
            (
                self.flags.nondecr_y_ant_prime,
                4 + 2,
                true,
                "(vi) monotonicity in the anticipated y'",
            ),
        ];
        let offsets: Vec<usize> = (0..8)
            .scan(0, |o, s| {
                let cur = *o;
                *o += w[s % 4];
                Some(cur)
            })
            .collect();
        for _ in 0..n_probes {
            let base: Vec<f64> = (0..total)
                .map(|_| r.sample::<f64, _>(StandardNormal))
                .collect();
            let t: f64 = r.random_range(0.0..1.0);
            let eval = |v: &[f64], out: &mut [f64]| {
                let s = |k: usize| &v[offsets[k]..offsets[k] + w[k % 4]];
                let a = DriverArgs {
                    t,
                    y: s(0),
                    z: s(1),
                    y_ant: s(2),
                    z_ant: s(3),
                    y_p: s(4),
                    z_p: s(5),
                    y_ant_p: s(6),
                    z_ant_p: s(7),
                };
                (self.f)(&a, out)
            };
            eval(&base, &mut out0);
            for &(claimed, slot, monotone, name) in &slots {
                if !claimed {
                    continue;
                }
                let mut v = base.clone();
                let step: f64 = r.random_range(0.1..2.0);
                for x in &mut v[offsets[slot]..offsets[slot] + w[slot % 4]] {
                    *x += if monotone {
                        step
                    } else {
                        step * r.sample::<f64, _>(StandardNormal)
                    };
                }
                eval(&v, &mut out1);
                for (a, b) in out0.iter().zip(&out1) {
                    let tol = 1e-12 * a.abs().max(1.0);
                    let bad = if monotone {
                        *b < a - tol
                    } else {
                        (b - a).abs() > tol
                    };
                    if bad {
                        return Err(Error::Precondition(format!(
                            "declared restriction {name} fails on a probe"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl<F> Driver for DriverSpec<F>
where
    F: Fn(&DriverArgs, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.m
    }
    fn noise_dim(&self) -> usize {
        self.d
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn anticipated_dim(&self) -> usize {
        if self.anticipated {
            self.m + self.m * self.d
        } else {
            0
        }
    }
    fn uses_co_particles(&self) -> bool {
        self.primed != PrimedMode::Unused
    }
    fn co_aggregates(&self, co: &CoParticles) -> Vec<f64> {
        match self.primed {
            PrimedMode::Affine => co.means(),
            _ => Vec::new(),
        }
    }
    fn depends_on_solution(&self) -> bool {
        self.solution_dependent
    }

    fn eval(&self, inp: &DriverInputs, co: &CoParticles, agg: &[f64], out: &mut [f64]) {
        let (m, md) = (self.m, self.m * self.d);
        let zeros_y = &self.zeros[..m];
        let zeros_z = &self.zeros[..md];
        let (ya, za) = if self.anticipated {
            inp.anticipated.split_at(m)
        } else {
            (zeros_y, zeros_z)
        };
        let own = |yp, zp, yap, zap| DriverArgs {
            t: inp.t,
            y: inp.y,
            z: inp.z,
            y_ant: ya,
            z_ant: za,
            y_p: yp,
            z_p: zp,
            y_ant_p: yap,
            z_ant_p: zap,
        };
        match self.primed {
            PrimedMode::Unused => (self.f)(&own(zeros_y, zeros_z, zeros_y, zeros_z), out),
            PrimedMode::Affine => {
                let (yp, rest) = agg.split_at(m);
                let (zp, rest) = rest.split_at(md);
                let (yap, zap) = rest.split_at(m);
                (self.f)(&own(yp, zp, yap, zap), out)
            }
            PrimedMode::General => {
                let mut tmp = vec![0.0; m];
                co.subsample().average_into(out, |j, acc| {
                    (self.f)(
                        &own(co.y(j), co.z(j), co.y_anticipated(j), co.z_anticipated(j)),
                        &mut tmp,
                    );
                    for (a, v) in acc.iter_mut().zip(&tmp) {
                        *a += v;
                    }
                });
            }
        }
    }
}
