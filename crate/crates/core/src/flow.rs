//! Exact evolution: block quarter-rotations of cell fields, the pointwise
//! flow along square streamlines, and the branch solutions built from them.

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::field::{stage_at, FieldSpec, Stage, Variant, VortexLayout};
use crate::geometry::{checkerboard, rho_in, CellField, Window};

/// How blocks that cross the window edge are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// The window is a torus. Exact for periodic data whenever the window
    /// side is a multiple of the field period `2^(1-n)`.
    Periodic,
    /// Every active block must lie inside the window.
    Isolated,
}

/// One stage acting on level-`L` cells: filled blocks of side `2^-n`
/// rotate a quarter turn, counterclockwise for forward stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StagePermutation {
    pub stage: Stage,
    /// `N` of the active square, if spatially truncated.
    pub space: Option<u32>,
}

impl StagePermutation {
    pub fn new(stage: Stage) -> Self {
        StagePermutation { stage, space: None }
    }

    pub fn for_spec(spec: &FieldSpec, stage: Stage) -> Self {
        StagePermutation {
            stage,
            space: spec.space,
        }
    }
}

/// Rotate every filled block of the stage.
pub fn apply_stage(
    field: &CellField,
    perm: &StagePermutation,
    boundary: Boundary,
) -> Result<CellField> {
    let n = perm.stage.scale;
    let level = field.level();
    if level < n + 1 {
        return Err(Error::LevelTooCoarse {
            have: level,
            need: n + 1,
        });
    }
    let d = level - n;
    if d > 40 {
        return Err(Error::InvalidParameter(
            "stage scale too fine for the cell level".into(),
        ));
    }
    let m = 1i64 << d;
    let half = m / 2;
    let size = field.cells_per_side() as i64;
    let (ox, oy) = field.origin();
    let src = field.numerators();
    let mut out = field.clone();
    let dst = out.numerators_mut();
    let ccw = !perm.stage.mirrored;

    let rotate = |dst: &mut [i64], bx: i64, by: i64, wrap: bool| {
        // (bx, by): global index of the block's lower-left cell
        let idx = |a: i64, b: i64| -> usize {
            let (mut ix, mut iy) = (bx + a - ox, by + b - oy);
            if wrap {
                ix = ix.rem_euclid(size);
                iy = iy.rem_euclid(size);
            }
            (iy * size + ix) as usize
        };
        for b in 0..m {
            for a in 0..m {
                let v = src[idx(a, b)];
                let (na, nb) = if ccw { (m - 1 - b, a) } else { (b, m - 1 - a) };
                dst[idx(na, nb)] = v;
            }
        }
    };

    match boundary {
        Boundary::Periodic => {
            if perm.space.is_some() {
                return Err(Error::InvalidParameter(
                    "periodic boundary needs an untruncated field".into(),
                ));
            }
            let period = 2 * m;
            if size % period != 0 {
                return Err(Error::InvalidParameter(format!(
                    "window {} is not a multiple of the scale-{n} period",
                    field.window()
                )));
            }
            // block corners sit at (2c - 1) * half for block centers c
            let first = |o: i64| -> i64 { (o + half).div_euclid(m) };
            let cx0 = first(ox);
            let cy0 = first(oy);
            let count = size / m;
            for cy in cy0..cy0 + count + 1 {
                for cx in cx0..cx0 + count + 1 {
                    if (cx + cy).rem_euclid(2) != 0 {
                        continue;
                    }
                    let bx = cx * m - half;
                    let by = cy * m - half;
                    // count each torus block once: lower-left corner inside the window
                    if bx < ox || bx >= ox + size || by < oy || by >= oy + size {
                        continue;
                    }
                    rotate(dst, bx, by, true);
                }
            }
        }
        Boundary::Isolated => {
            let big = perm.space.ok_or_else(|| {
                Error::InvalidParameter(
                    "isolated boundary needs a spatially truncated field".into(),
                )
            })? as i64;
            let reach = big << n;
            for cy in -reach..=reach {
                for cx in -reach..=reach {
                    if (cx + cy).rem_euclid(2) != 0 {
                        continue;
                    }
                    let bx = cx * m - half;
                    let by = cy * m - half;
                    if bx < ox || bx + m > ox + size || by < oy || by + m > oy + size {
                        return Err(Error::InvalidParameter(format!(
                            "window {} does not contain the active vortices",
                            field.window()
                        )));
                    }
                    rotate(dst, bx, by, false);
                }
            }
        }
    }
    #[cfg(debug_assertions)]
    debug_assert_eq!(out.value_multiset(), field.value_multiset());
    Ok(out)
}

fn boundary_for(spec: &FieldSpec) -> Boundary {
    if spec.space.is_some() {
        Boundary::Isolated
    } else {
        Boundary::Periodic
    }
}

/// Evolve `data` from time 0 to the dyadic time `t`, which may not lie
/// strictly inside a running stage.
pub fn evolve_exact(data: &CellField, spec: &FieldSpec, t: Dyadic) -> Result<CellField> {
    let stages = stages_until(spec, t)?;
    let boundary = boundary_for(spec);
    let mut cur = data.clone();
    for s in stages {
        cur = apply_stage(&cur, &StagePermutation::for_spec(spec, s), boundary)?;
    }
    Ok(cur)
}

/// Active stages completed by time `t`, in order.
pub fn stages_until(spec: &FieldSpec, t: Dyadic) -> Result<Vec<Stage>> {
    if t <= Dyadic::ZERO {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    match spec.truncation {
        None => {
            if t >= Dyadic::ONE {
                return Err(Error::NotStageEndpoint(format!(
                    "{t}: the untruncated schedule has infinitely many stages before 1"
                )));
            }
            let mut n = 0u32;
            loop {
                let s = Stage::forward(n);
                if s.end() <= t {
                    out.push(s);
                } else if s.start() < t {
                    return Err(Error::NotStageEndpoint(t.to_string()));
                } else {
                    break;
                }
                n += 1;
            }
        }
        Some(_) => {
            for s in spec.active_stages(0) {
                if s.end() <= t {
                    out.push(s);
                } else if s.start() < t {
                    return Err(Error::NotStageEndpoint(t.to_string()));
                }
            }
        }
    }
    Ok(out)
}

/// Position after moving for `duration` along the streamlines of the
/// layout. The flag is true when the start point lies on a tie diagonal or
/// a cell edge, where the field vanishes and the point stays put.
pub fn vortex_flow(layout: &VortexLayout, duration: f64, x: [f64; 2]) -> ([f64; 2], bool) {
    let (c, y) = layout.locate(x);
    if !layout.is_filled(c) {
        return (x, false);
    }
    let r = y[0].abs().max(y[1].abs());
    if r == 0.0 {
        return (x, false);
    }
    if y[0].abs() == y[1].abs() || r >= 0.5 {
        return (x, true);
    }
    let scale = (layout.scale as f64).exp2();
    // perimeter parameter from the corner (r, -r), counterclockwise
    let s = if y[0].abs() > y[1].abs() {
        if y[0] > 0.0 {
            y[1] + r
        } else {
            4.0 * r + (r - y[1])
        }
    } else if y[1] > 0.0 {
        2.0 * r + (r - y[0])
    } else {
        6.0 * r + (y[0] + r)
    };
    let per = 8.0 * r;
    let s = (s + layout.sign * scale * 4.0 * r * duration).rem_euclid(per);
    let (e, q) = ((s / (2.0 * r)).floor().min(3.0), s % (2.0 * r));
    let z = match e as u8 {
        0 => [r, q - r],
        1 => [r - q, r],
        2 => [-r, r - q],
        _ => [q - r, -r],
    };
    let inv = 1.0 / scale;
    (
        [(c[0] as f64 + z[0]) * inv, (c[1] as f64 + z[1]) * inv],
        false,
    )
}

/// Exact flow from `t0` to `t1` inside a single stage (or a stretch where
/// the field vanishes). Times may run backwards.
pub fn exact_point_flow(
    spec: &FieldSpec,
    t0: f64,
    t1: f64,
    x: [f64; 2],
) -> Result<([f64; 2], bool)> {
    if t0 == t1 {
        return Ok((x, false));
    }
    let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
    let mid = 0.5 * (lo + hi);
    let stage = stage_at(mid);
    if let Some(s) = stage {
        let (a, b) = (s.start().to_f64(), s.end().to_f64());
        if lo < a || hi > b {
            return Err(Error::InvalidParameter(format!(
                "[{lo}, {hi}] crosses a stage boundary"
            )));
        }
        if !spec.is_active(s) {
            return Ok((x, false));
        }
        Ok(vortex_flow(&spec.layout(s), t1 - t0, x))
    } else {
        Ok((x, false))
    }
}

/// Quarter rotation of the filled block containing `x`, exact up to one
/// rounding. Used for whole stages.
fn quarter_turn(layout: &VortexLayout, ccw: bool, x: [f64; 2]) -> [f64; 2] {
    let (c, y) = layout.locate(x);
    if !layout.is_filled(c) {
        return x;
    }
    let z = if ccw { [-y[1], y[0]] } else { [y[1], -y[0]] };
    let inv = (-(layout.scale as f64)).exp2();
    [(c[0] as f64 + z[0]) * inv, (c[1] as f64 + z[1]) * inv]
}

/// Flow from `t0` to `t1` composed across stages. Whole stages use exact
/// quarter turns. Fails if more than `max_stages` stages are crossed.
pub fn point_flow_through(
    spec: &FieldSpec,
    t0: f64,
    t1: f64,
    x: [f64; 2],
    max_stages: u32,
) -> Result<[f64; 2]> {
    let forward = t1 >= t0;
    let mut t = t0;
    let mut p = x;
    let mut crossed = 0u32;
    while t != t1 {
        let probe = if forward { next_up(t) } else { next_down(t) };
        if let Some((za, zb)) = spec.zero_interval() {
            let (za, zb) = (za.to_f64(), zb.to_f64());
            if probe > za && probe < zb {
                t = if forward { zb.min(t1) } else { za.max(t1) };
                continue;
            }
        }
        let Some(s) = stage_at(probe) else {
            // gap between stages or outside the schedule
            let next = next_break(t, forward);
            t = if forward { next.min(t1) } else { next.max(t1) };
            continue;
        };
        crossed += 1;
        if crossed > max_stages {
            return Err(Error::InvalidParameter("too many stages crossed".into()));
        }
        let (a, b) = (s.start().to_f64(), s.end().to_f64());
        let stop = if forward { b.min(t1) } else { a.max(t1) };
        let active = spec.is_active(s) && !in_zero_interval(spec, 0.5 * (t + stop));
        if active {
            let layout = spec.layout(s);
            let whole = (forward && t == a && stop == b) || (!forward && t == b && stop == a);
            p = if whole {
                // forward in time along a forward stage turns counterclockwise
                quarter_turn(&layout, forward != s.mirrored, p)
            } else {
                vortex_flow(&layout, stop - t, p).0
            };
        }
        t = stop;
    }
    Ok(p)
}

fn in_zero_interval(spec: &FieldSpec, t: f64) -> bool {
    spec.zero_interval()
        .is_some_and(|(a, b)| t > a.to_f64() && t < b.to_f64())
}

fn next_up(t: f64) -> f64 {
    t + (t.abs() * 1e-15).max(1e-300)
}

fn next_down(t: f64) -> f64 {
    t - (t.abs() * 1e-15).max(1e-300)
}

/// Next point where the schedule can change, walking in the given direction
/// from a time outside every stage.
fn next_break(t: f64, forward: bool) -> f64 {
    if forward {
        if t < 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else if t > 2.0 {
        2.0
    } else {
        f64::NEG_INFINITY
    }
}

/// The exact solutions of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Mixes to 1/2 and stays there after time 1.
    Prime,
    /// Unmixes symmetrically, back to the checkerboard at time 2.
    Tilde,
    /// The unique solution for a time-truncated field.
    Truncated(Variant, u32),
}

impl Branch {
    pub fn parse(name: &str, i: Option<u32>) -> Result<Branch> {
        match (name, i) {
            ("prime", _) => Ok(Branch::Prime),
            ("tilde", _) => Ok(Branch::Tilde),
            ("trunc1", Some(i)) => Ok(Branch::Truncated(Variant::Asymmetric, i)),
            ("trunc2", Some(i)) => Ok(Branch::Truncated(Variant::Symmetric, i)),
            ("trunc1" | "trunc2", None) => Err(Error::InvalidParameter(format!(
                "branch {name} needs the truncation index i"
            ))),
            _ => Err(Error::InvalidParameter(format!("unknown branch `{name}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Branch::Prime => "prime".into(),
            Branch::Tilde => "tilde".into(),
            Branch::Truncated(v, i) => format!("trunc{}_i{i}", v.number()),
        }
    }

    /// Field the branch solves; prime and tilde solve the untruncated one.
    pub fn spec(&self) -> Result<FieldSpec> {
        match self {
            Branch::Prime | Branch::Tilde => Ok(FieldSpec::base()),
            Branch::Truncated(v, i) => FieldSpec::base().truncate_time(*i, *v),
        }
    }

    /// Coarsest level at which the snapshot at `t` is representable.
    pub fn required_level(&self, t: Dyadic) -> Result<u32> {
        let t = match self {
            Branch::Tilde if t > Dyadic::ONE => Dyadic::from_int(2) - t,
            _ => t,
        };
        let spec = self.spec()?;
        if matches!(self, Branch::Prime | Branch::Tilde) && t >= Dyadic::ONE {
            return Ok(0);
        }
        let stages = stages_until(&spec, t)?;
        Ok(stages.iter().map(|s| s.scale + 1).max().unwrap_or(0))
    }
}

/// Exact density of a branch at the dyadic time `t` on `window`, at `level`.
/// At `t = 1` the prime and tilde branches are represented by their weak
/// limit, the constant 1/2.
pub fn branch_snapshot(branch: Branch, t: Dyadic, level: u32, window: Window) -> Result<CellField> {
    let spec = branch.spec()?;
    let data = checkerboard(0, window)?.refine(level)?;
    match branch {
        Branch::Prime | Branch::Tilde if t >= Dyadic::ONE => {
            if branch == Branch::Prime || t == Dyadic::ONE {
                return CellField::constant(level, window, Dyadic::HALF);
            }
            let back = Dyadic::from_int(2) - t;
            if back < Dyadic::ZERO {
                return Ok(data);
            }
            evolve_exact(&data, &spec, back)
        }
        _ => evolve_exact(&data, &spec, t),
    }
}

/// Slice at `y0` of a lifted branch at time `t`: zero off the slab
/// `t - 1 <= y0 <= t`, otherwise the branch at the clipped time `y0`.
pub fn lifted_snapshot(
    branch: Branch,
    t: Dyadic,
    y0: Dyadic,
    level: u32,
    window: Window,
) -> Result<CellField> {
    if !matches!(branch, Branch::Prime | Branch::Tilde) {
        return Err(Error::InvalidParameter(
            "lifted snapshots exist for prime and tilde".into(),
        ));
    }
    if y0 < t - Dyadic::ONE || y0 > t {
        return CellField::constant(level, window, Dyadic::ZERO);
    }
    let tau = y0.max(Dyadic::ZERO).min(Dyadic::from_int(2));
    branch_snapshot(branch, tau, level, window)
}

/// Stages finer than this are treated as fully mixed by [`density`].
pub const DENSITY_MAX_SCALE: u32 = 40;

/// Pointwise density of a branch, `rho_in` at the backward foot of the exact
/// flow. Inside stages finer than [`DENSITY_MAX_SCALE`] the value is the
/// weak limit 1/2.
pub fn density(branch: Branch, t: f64, x: [f64; 2]) -> f64 {
    if t <= 0.0 {
        return rho_in(x);
    }
    let (spec, t) = match branch {
        Branch::Prime if t >= 1.0 => return 0.5,
        Branch::Tilde if t >= 1.0 => {
            if t == 1.0 {
                return 0.5;
            }
            (FieldSpec::base(), (2.0 - t).max(0.0))
        }
        Branch::Prime | Branch::Tilde => (FieldSpec::base(), t),
        Branch::Truncated(v, i) => match FieldSpec::base().truncate_time(i, v) {
            Ok(s) => (s, t.min(2.0)),
            Err(_) => return f64::NAN,
        },
    };
    if spec.truncation.is_none() {
        if let Some(s) = stage_at(t) {
            if s.scale > DENSITY_MAX_SCALE {
                return 0.5;
            }
        }
    }
    match point_flow_through(&spec, t, 0.0, x, 2 * DENSITY_MAX_SCALE + 4) {
        Ok(p) => rho_in(p),
        Err(_) => 0.5,
    }
}
