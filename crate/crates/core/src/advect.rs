//! Semi-Lagrangian transport of scalar grids along RK4 characteristics.

use rayon::prelude::*;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::field::{FieldSpec, FIELD_BOUND};
use crate::geometry::Window;
use crate::grid::GridField;
use crate::mollify::{FrozenMollified, MollifiedField};

/// A velocity field frozen at one time.
pub trait FrozenVelocity: Sync {
    fn eval(&self, x: [f64; 2]) -> [f64; 2];
}

/// A time-dependent velocity field.
pub trait Velocity: Sync {
    type At<'a>: FrozenVelocity
    where
        Self: 'a;
    fn at(&self, t: f64) -> Self::At<'_>;
}

pub struct SpecAt<'a> {
    spec: &'a FieldSpec,
    t: f64,
}

impl FrozenVelocity for SpecAt<'_> {
    fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        self.spec.eval(self.t, x)
    }
}

impl Velocity for FieldSpec {
    type At<'a> = SpecAt<'a>;
    fn at(&self, t: f64) -> SpecAt<'_> {
        SpecAt { spec: self, t }
    }
}

impl FrozenVelocity for FrozenMollified<'_> {
    fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        FrozenMollified::eval(self, x)
    }
}

impl Velocity for MollifiedField {
    type At<'a> = FrozenMollified<'a>;
    fn at(&self, t: f64) -> FrozenMollified<'_> {
        MollifiedField::at(self, t)
    }
}

pub struct ZeroField;

pub struct ZeroAt;

impl FrozenVelocity for ZeroAt {
    fn eval(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

impl Velocity for ZeroField {
    type At<'a> = ZeroAt;
    fn at(&self, _: f64) -> ZeroAt {
        ZeroAt
    }
}

#[inline]
fn rk4_step(
    k_t: &impl FrozenVelocity,
    k_mid: &impl FrozenVelocity,
    k_end: &impl FrozenVelocity,
    dt: f64,
    x: [f64; 2],
) -> [f64; 2] {
    let a = k_t.eval(x);
    let b = k_mid.eval([x[0] + 0.5 * dt * a[0], x[1] + 0.5 * dt * a[1]]);
    let c = k_mid.eval([x[0] + 0.5 * dt * b[0], x[1] + 0.5 * dt * b[1]]);
    let d = k_end.eval([x[0] + dt * c[0], x[1] + dt * c[1]]);
    [
        x[0] + dt / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
        x[1] + dt / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
    ]
}

/// RK4 solution of `x' = v(t, x)` from `t_from` to `t_to` (either
/// direction) with steps of at most `dt`.
pub fn trace_characteristic(
    v: &impl Velocity,
    t_from: f64,
    t_to: f64,
    x: [f64; 2],
    dt: f64,
) -> [f64; 2] {
    let span = t_to - t_from;
    if span == 0.0 {
        return x;
    }
    let n = (span.abs() / dt).ceil().max(1.0) as usize;
    let step = span / n as f64;
    let mut p = x;
    for k in 0..n {
        let t = t_from + step * k as f64;
        p = rk4_step(&v.at(t), &v.at(t + 0.5 * step), &v.at(t + step), step, p);
    }
    p
}

/// When the density is resampled onto the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Remap {
    /// Classic scheme: interpolate after every time step.
    EveryStep,
    /// Trace feet back to the previous checkpoint and interpolate once per
    /// checkpoint interval.
    AtCheckpoints,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub h: f64,
    pub cfl: f64,
    pub window: Window,
    pub periodic: bool,
    pub checkpoints: Vec<Dyadic>,
    pub remap: Remap,
}

impl SolverConfig {
    pub fn new(window: Window, h: f64, checkpoints: Vec<Dyadic>) -> Self {
        SolverConfig {
            h,
            cfl: 0.25,
            window,
            periodic: true,
            checkpoints,
            remap: Remap::AtCheckpoints,
        }
    }

    /// Largest power of two not above `cfl h / |b|_inf`.
    pub fn dt(&self) -> f64 {
        let raw = self.cfl * self.h / FIELD_BOUND;
        raw.log2().floor().exp2()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Cfl { cfl: self.cfl });
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidParameter("no checkpoints".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) || self.checkpoints[0] < Dyadic::ZERO {
            return Err(Error::InvalidParameter(
                "checkpoints must increase from 0".into(),
            ));
        }
        let dt = Dyadic::from_f64(self.dt())
            .ok_or_else(|| Error::InvalidParameter("bad step".into()))?;
        let dt_exp = dt.exponent();
        for c in &self.checkpoints {
            if c.exponent() > dt_exp {
                return Err(Error::InvalidParameter(format!(
                    "time step 2^-{dt_exp} does not divide checkpoint {c}"
                )));
            }
        }
        if self.periodic {
            let side = self.window.side;
            if !(side.is_integer() && side.numerator() % 2 == 0) {
                return Err(Error::InvalidParameter(
                    "periodic windows need an even integer side".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<(Dyadic, GridField)>,
    pub steps: usize,
}

impl Trajectory {
    pub fn at(&self, t: Dyadic) -> Option<&GridField> {
        self.snapshots.iter().find(|(s, _)| *s == t).map(|(_, g)| g)
    }

    pub fn last(&self) -> &GridField {
        &self.snapshots.last().unwrap().1
    }
}

/// Evolve `data` (a scalar grid on the config window) from time 0 through
/// every checkpoint.
pub fn solve(v: &impl Velocity, data: &GridField, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    let expect = GridField::on_window(&config.window, config.h, 1)?;
    if data.dims() != expect.dims() || data.origin() != expect.origin() || data.h() != config.h {
        return Err(Error::InvalidParameter(
            "data is not on the solver grid".into(),
        ));
    }
    let dt = config.dt();
    let (lo, hi) = data.min_max();
    let tol = 1e-12;
    let mut snapshots = Vec::new();
    let mut cur = data.clone();
    let mut t = Dyadic::ZERO;
    let mut steps = 0usize;
    let (nx, _) = data.dims();
    let h = config.h;
    let origin = data.origin();
    let nodes = data.data().len();
    for &cp in &config.checkpoints {
        let n = ((cp - t).to_f64() / dt).round() as usize;
        let t0 = t.to_f64();
        match config.remap {
            Remap::EveryStep => {
                for k in 0..n {
                    let t_new = t0 + dt * (k + 1) as f64;
                    let (a, b, c) = (v.at(t_new), v.at(t_new - 0.5 * dt), v.at(t_new - dt));
                    let prev = &cur;
                    let next: Vec<f64> = (0..nodes)
                        .into_par_iter()
                        .map(|idx| {
                            let p = [
                                origin[0] + ((idx % nx) as f64 + 0.5) * h,
                                origin[1] + ((idx / nx) as f64 + 0.5) * h,
                            ];
                            let foot = rk4_step(&a, &b, &c, -dt, p);
                            prev.sample(foot, config.periodic, 0.0)
                        })
                        .collect();
                    cur.data_mut().copy_from_slice(&next);
                }
            }
            Remap::AtCheckpoints => {
                let frozen: Vec<_> = (0..n)
                    .rev()
                    .map(|k| {
                        let t_hi = t0 + dt * (k + 1) as f64;
                        (v.at(t_hi), v.at(t_hi - 0.5 * dt), v.at(t_hi - dt))
                    })
                    .collect();
                let prev = &cur;
                // each foot runs through every step so its table lookups stay local
                let next: Vec<f64> = (0..nodes)
                    .into_par_iter()
                    .map(|idx| {
                        let mut p = [
                            origin[0] + ((idx % nx) as f64 + 0.5) * h,
                            origin[1] + ((idx / nx) as f64 + 0.5) * h,
                        ];
                        for (a, b, c) in &frozen {
                            p = rk4_step(a, b, c, -dt, p);
                        }
                        prev.sample(p, config.periodic, 0.0)
                    })
                    .collect();
                cur.data_mut().copy_from_slice(&next);
            }
        }
        steps += n;
        let (a, b) = cur.min_max();
        if a < lo.min(0.0) - tol || b > hi.max(0.0) + tol {
            return Err(Error::InvalidParameter(format!(
                "maximum principle violated at t = {cp}: [{a}, {b}]"
            )));
        }
        t = cp;
        snapshots.push((cp, cur.clone()));
    }
    Ok(Trajectory { snapshots, steps })
}
