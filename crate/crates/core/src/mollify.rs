//! Space-time mollification of the scheduled field and spatial mollification
//! of the checkerboard.
//!
//! Every stage is `chi_I(t) u(2^n x)`, so its convolution with a product
//! kernel factors into a time weight (the kernel CDF over `I`) times the
//! spatial convolution `(u * phi_{2^n eps})(2^n x)`. The latter is periodic
//! and is tabulated once per scale.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{eval_w, FieldSpec, Stage, VortexLayout};
use crate::geometry::{rho_in, Window};
use crate::grid::GridField;
use crate::polygon::Poly;
use crate::quadrature::GaussLegendre;

/// `exp(-1 / (1 - z^2))` on `|z| < 1`.
#[inline]
pub fn bump(z2: f64) -> f64 {
    if z2 < 1.0 {
        (-1.0 / (1.0 - z2)).exp()
    } else {
        0.0
    }
}

pub(crate) fn mass_1d() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| GaussLegendre::new(20).integrate_composite(-1.0, 1.0, 64, |z| bump(z * z)))
}

fn mass_2d() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| {
        2.0 * std::f64::consts::PI
            * GaussLegendre::new(20).integrate_composite(0.0, 1.0, 64, |r| r * bump(r * r))
    })
}

/// Normalized radial bump at scale `eps` in one or two dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub dim: u32,
    pub eps: f64,
}

impl Kernel {
    pub fn time(eps: f64) -> Self {
        Kernel { dim: 1, eps }
    }

    pub fn space(eps: f64) -> Self {
        Kernel { dim: 2, eps }
    }

    /// Density at a point given by its squared distance from the origin.
    #[inline]
    pub fn density(&self, r2: f64) -> f64 {
        let e2 = self.eps * self.eps;
        match self.dim {
            1 => bump(r2 / e2) / (mass_1d() * self.eps),
            _ => bump(r2 / e2) / (mass_2d() * e2),
        }
    }

    /// Mass of the 1D kernel on `(-inf, s]`.
    pub fn cdf(&self, s: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let z = s / self.eps;
        if z <= -1.0 {
            0.0
        } else if z >= 1.0 {
            1.0
        } else if z <= 0.0 {
            cdf_table(z)
        } else {
            1.0 - cdf_table(-z)
        }
    }
}

/// Standard CDF on `[-1, 0]` by Hermite interpolation of a fine table.
fn cdf_table(z: f64) -> f64 {
    const N: usize = 4096;
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    let table = T.get_or_init(|| {
        let gl = GaussLegendre::new(12);
        let m = mass_1d();
        let mut v = vec![0.0; N + 1];
        for k in 1..=N {
            let a = -1.0 + (k - 1) as f64 / N as f64;
            let b = -1.0 + k as f64 / N as f64;
            v[k] = v[k - 1] + gl.integrate(a, b, |z| bump(z * z)) / m;
        }
        v
    });
    let m = mass_1d();
    let x = (z + 1.0) * N as f64;
    let k = (x.floor() as usize).min(N - 1);
    let s = x - k as f64;
    let h = 1.0 / N as f64;
    let z0 = -1.0 + k as f64 * h;
    let d0 = bump(z0 * z0) / m * h;
    let d1 = bump((z0 + h) * (z0 + h)) / m * h;
    let (p0, p1) = (table[k], table[k + 1]);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * d0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * d1
}

/// Distance from the local point `y` (cell coordinates) to the jump set of
/// `u` seen from its own cell: cell edges, plus the diagonals when filled.
#[inline]
fn jump_distance(y: [f64; 2], filled: bool) -> f64 {
    let (a, b) = (y[0].abs(), y[1].abs());
    let edge = 0.5 - a.max(b);
    if filled {
        edge.min((a - b).abs() * std::f64::consts::FRAC_1_SQRT_2)
    } else {
        edge
    }
}

/// `floor` without a libm call.
#[inline(always)]
fn ifloor(x: f64) -> i64 {
    let i = x as i64;
    if (i as f64) > x {
        i - 1
    } else {
        i
    }
}

#[inline]
fn eval_u0(y: [f64; 2]) -> [f64; 2] {
    let c = [(y[0] + 0.5).floor(), (y[1] + 0.5).floor()];
    if (c[0] as i64 + c[1] as i64).rem_euclid(2) != 0 {
        return [0.0, 0.0];
    }
    eval_w([y[0] - c[0], y[1] - c[1]])
}

/// Gauss rule on the triangle with barycentric weights `(b, c)` for the
/// second and third vertices, built by collapsing a tensor rule on the square.
struct TriangleRule {
    pts: Vec<(f64, f64, f64)>,
}

impl TriangleRule {
    fn new(order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let one: Vec<(f64, f64)> = gl.mapped(0.0, 1.0).collect();
        let mut pts = Vec::with_capacity(order * order);
        for &(s, ws) in &one {
            for &(t, wt) in &one {
                pts.push((s - s * t, s * t, ws * wt * s));
            }
        }
        TriangleRule { pts }
    }

    /// Integral of `f` over the triangle `p`.
    fn integrate(&self, p: [[f64; 2]; 3], mut f: impl FnMut([f64; 2]) -> [f64; 2]) -> [f64; 2] {
        let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
        let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
        let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        let mut acc = [0.0; 2];
        for &(b, c, w) in &self.pts {
            let x = [
                p[0][0] + b * e1[0] + c * e2[0],
                p[0][1] + b * e1[1] + c * e2[1],
            ];
            let v = f(x);
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        }
        [acc[0] * jac, acc[1] * jac]
    }
}

/// `(u_L * phi_delta)(y)` where `u_L` is the unsigned layout with unit cells
/// (`y` and `delta` in cell units), by exact splitting of the kernel
/// support along the pieces where `u` is linear.
fn convolve_cells(
    y: [f64; 2],
    delta: f64,
    filled: impl Fn([i64; 2]) -> bool,
    rule: &TriangleRule,
) -> [f64; 2] {
    let kernel = Kernel::space(delta);
    let lo = [ifloor(y[0] - delta + 0.5), ifloor(y[1] - delta + 0.5)];
    let hi = [ifloor(y[0] + delta + 0.5), ifloor(y[1] + delta + 0.5)];
    let mut acc = [0.0, 0.0];
    for c1 in lo[1]..=hi[1] {
        for c0 in lo[0]..=hi[0] {
            let c = [c0, c1];
            if !filled(c) {
                continue;
            }
            let o = [c[0] as f64, c[1] as f64];
            let corners = [[0.5, -0.5], [0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5]];
            for k in 0..4 {
                let a = corners[k];
                let b = corners[(k + 1) % 4];
                // triangles in order: x1 > 0, x2 > 0, x1 < 0, x2 < 0
                let poly = Poly::triangle(o, [o[0] + a[0], o[1] + a[1]], [o[0] + b[0], o[1] + b[1]]);
                let x1_dominant = k % 2 == 0;
                // quadrants around y keep the pieces small against the bump
                for q in 0..4 {
                    let (sx, sy) = (
                        if q & 1 == 0 { 1.0 } else { -1.0 },
                        if q & 2 == 0 { 1.0 } else { -1.0 },
                    );
                    let poly = poly
                        .clip(0, y[0] + sx * delta, sx)
                        .clip(0, y[0], -sx)
                        .clip(1, y[1] + sy * delta, sy)
                        .clip(1, y[1], -sy);
                    if poly.n < 3 {
                        continue;
                    }
                    for f in 1..poly.n - 1 {
                        let tri = [poly.v[0], poly.v[f], poly.v[f + 1]];
                        let r = rule.integrate(tri, |x| {
                            let d = [y[0] - x[0], y[1] - x[1]];
                            let kd = kernel.density(d[0] * d[0] + d[1] * d[1]);
                            if x1_dominant {
                                [0.0, kd * 4.0 * (x[0] - o[0])]
                            } else {
                                [-kd * 4.0 * (x[1] - o[1]), 0.0]
                            }
                        });
                        acc[0] += r[0];
                        acc[1] += r[1];
                    }
                }
            }
        }
    }
    acc
}

/// `(u * phi_delta)(y)`.
pub fn convolve_u(y: [f64; 2], delta: f64) -> [f64; 2] {
    convolve_cells(y, delta, |c| (c[0] + c[1]) & 1 == 0, triangle_rule())
}

fn triangle_rule() -> &'static TriangleRule {
    static R: OnceLock<TriangleRule> = OnceLock::new();
    R.get_or_init(|| TriangleRule::new(16))
}

/// Cheaper rule for table nodes; its error sits well below the bilinear
/// interpolation error of the table.
fn coarse_triangle_rule() -> &'static TriangleRule {
    static R: OnceLock<TriangleRule> = OnceLock::new();
    R.get_or_init(|| TriangleRule::new(6))
}

/// `u * phi_delta` on a periodic node grid over `[0, 2)^2`, in the
/// coordinates of `u`.
#[derive(Debug)]
pub struct VortexTable {
    pub delta: f64,
    m: usize,
    inv_g: f64,
    /// Jump distance beyond which `eval` skips the table.
    reach: f64,
    data: Vec<[f32; 2]>,
}

impl VortexTable {
    pub fn new(delta: f64) -> Self {
        let m = ((16.0 / delta).ceil() as usize)
            .next_power_of_two()
            .clamp(16, 1 << 13);
        let g = 2.0 / m as f64;
        let data: Vec<[f32; 2]> = (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let y = [(idx % m) as f64 * g, (idx / m) as f64 * g];
                let c = [(y[0] + 0.5).floor(), (y[1] + 0.5).floor()];
                let local = [y[0] - c[0], y[1] - c[1]];
                let filled = (c[0] as i64 + c[1] as i64).rem_euclid(2) == 0;
                let v = if jump_distance(local, filled) > delta {
                    // w is linear on the kernel support and the kernel is even
                    eval_u0(y)
                } else {
                    convolve_cells(y, delta, |c| (c[0] + c[1]) & 1 == 0, coarse_triangle_rule())
                };
                [v[0] as f32, v[1] as f32]
            })
            .collect();
        VortexTable {
            delta,
            m,
            inv_g: 1.0 / g,
            // one and a half spacings of slack keep the bilinear stencil
            // clear of the fast path
            reach: delta + 1.5 * g,
            data,
        }
    }

    /// Value at `y` in the coordinates of `u`: exact away from the jump
    /// set, bilinear table lookup near it.
    #[inline]
    pub fn eval(&self, y: [f64; 2]) -> [f64; 2] {
        let c = [ifloor(y[0] + 0.5), ifloor(y[1] + 0.5)];
        let local = [y[0] - c[0] as f64, y[1] - c[1] as f64];
        let filled = (c[0] + c[1]) & 1 == 0;
        if jump_distance(local, filled) > self.reach {
            return if filled { eval_w(local) } else { [0.0, 0.0] };
        }
        self.lookup(y)
    }

    /// Bilinear periodic lookup.
    #[inline]
    pub fn lookup(&self, y: [f64; 2]) -> [f64; 2] {
        let fx = y[0] * self.inv_g;
        let fy = y[1] * self.inv_g;
        let ix = ifloor(fx);
        let iy = ifloor(fy);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        // m is a power of two
        let mask = self.m as i64 - 1;
        let m = self.m;
        let i0 = (ix & mask) as usize;
        let k0 = (iy & mask) as usize;
        let i1 = ((ix + 1) & mask) as usize;
        let k1 = ((iy + 1) & mask) as usize;
        let d = &self.data;
        let a = d[k0 * m + i0].map(f64::from);
        let b = d[k0 * m + i1].map(f64::from);
        let c = d[k1 * m + i0].map(f64::from);
        let e = d[k1 * m + i1].map(f64::from);
        let w00 = (1.0 - tx) * (1.0 - ty);
        let w10 = tx * (1.0 - ty);
        let w01 = (1.0 - tx) * ty;
        let w11 = tx * ty;
        [
            w00 * a[0] + w10 * b[0] + w01 * c[0] + w11 * e[0],
            w00 * a[1] + w10 * b[1] + w01 * c[1] + w11 * e[1],
        ]
    }

    /// Direct quadrature value, for checking the table.
    pub fn exact(&self, y: [f64; 2]) -> [f64; 2] {
        convolve_u(y, self.delta)
    }
}

/// Finest scale kept relative to the mollification level `j`; at scale
/// `j + 4` the kernel spans sixteen periods of the vortex lattice.
pub const SCALE_MARGIN: u32 = 3;

#[derive(Clone, Debug)]
struct MollifiedStage {
    stage: Stage,
    start: f64,
    end: f64,
    table: Arc<VortexTable>,
    layout: VortexLayout,
    scale: f64,
}

/// `b * phi_{2^-j}` for a field spec, with the product kernel.
#[derive(Clone, Debug)]
pub struct MollifiedField {
    pub spec: FieldSpec,
    pub j: u32,
    pub eps: f64,
    stages: Vec<MollifiedStage>,
    /// Stages finer than the cutoff that were dropped.
    pub dropped: usize,
}

impl MollifiedField {
    pub fn new(spec: &FieldSpec, j: u32) -> Result<Self> {
        if j > 12 {
            return Err(Error::InvalidParameter(format!(
                "mollification level {j} above 12"
            )));
        }
        let eps = (-(j as f64)).exp2();
        let max_scale = j + SCALE_MARGIN;
        let all = match spec.truncation {
            Some(_) => spec.active_stages(0),
            None => spec.active_stages(max_scale + 1),
        };
        let dropped = all.iter().filter(|s| s.scale > max_scale).count();
        let mut tables: Vec<Option<Arc<VortexTable>>> = vec![None; max_scale as usize + 1];
        let mut stages = Vec::new();
        for s in all.into_iter().filter(|s| s.scale <= max_scale) {
            let table = tables[s.scale as usize]
                .get_or_insert_with(|| Arc::new(VortexTable::new(eps * (s.scale as f64).exp2())))
                .clone();
            stages.push(MollifiedStage {
                stage: s,
                start: s.start().to_f64(),
                end: s.end().to_f64(),
                table,
                layout: spec.layout(s),
                scale: (s.scale as f64).exp2(),
            });
        }
        Ok(MollifiedField {
            spec: *spec,
            j,
            eps,
            stages,
            dropped,
        })
    }

    /// Time-frozen field: the stages whose weight at `t` is nonzero.
    pub fn at(&self, t: f64) -> FrozenMollified<'_> {
        let k = Kernel::time(self.eps);
        let mut terms = Vec::new();
        for s in &self.stages {
            if t <= s.start - self.eps || t >= s.end + self.eps {
                continue;
            }
            let w = k.cdf(t - s.start) - k.cdf(t - s.end);
            if w != 0.0 {
                terms.push((w * s.stage.sign(), s));
            }
        }
        FrozenMollified { field: self, terms }
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        self.at(t).eval(x)
    }

    /// Vector grid of the field at time `t`.
    pub fn sample_grid(&self, t: f64, window: &Window, h: f64) -> Result<GridField> {
        if h > (-(self.j as f64) - 2.0).exp2() {
            return Err(Error::InvalidParameter(format!(
                "spacing {h} does not resolve the mollifier 2^-{}",
                self.j
            )));
        }
        let mut g = GridField::on_window(window, h, 2)?;
        let frozen = self.at(t);
        let (nx, _) = g.dims();
        let origin = g.origin();
        g.data_mut()
            .par_chunks_mut(2 * nx)
            .enumerate()
            .for_each(|(k, row)| {
                for i in 0..nx {
                    let p = [
                        origin[0] + (i as f64 + 0.5) * h,
                        origin[1] + (k as f64 + 0.5) * h,
                    ];
                    let v = frozen.eval(p);
                    row[2 * i] = v[0];
                    row[2 * i + 1] = v[1];
                }
            });
        Ok(g)
    }
}

/// The mollified field at one time.
pub struct FrozenMollified<'a> {
    field: &'a MollifiedField,
    terms: Vec<(f64, &'a MollifiedStage)>,
}

impl FrozenMollified<'_> {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let mut acc = [0.0, 0.0];
        for &(w, s) in &self.terms {
            let v = self.field.spatial(s, x);
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of stages contributing at this time.
    pub fn len(&self) -> usize {
        self.terms.len()
    }
}

impl MollifiedField {
    #[inline]
    fn spatial(&self, s: &MollifiedStage, x: [f64; 2]) -> [f64; 2] {
        let scale = s.scale;
        match s.layout.active_half_side {
            None => s.table.eval([x[0] * scale, x[1] * scale]),
            Some(w) => {
                let far = x[0].abs().max(x[1].abs());
                if far >= w + self.eps {
                    [0.0, 0.0]
                } else if far < w - self.eps {
                    s.table.eval([x[0] * scale, x[1] * scale])
                } else {
                    self.spatial_edge(s, x)
                }
            }
        }
    }

    #[inline(never)]
    fn spatial_edge(&self, s: &MollifiedStage, x: [f64; 2]) -> [f64; 2] {
        let scale = s.scale;
        let layout = s.layout;
        // unsigned: the stage sign rides on the time weight
        convolve_cells(
            [x[0] * scale, x[1] * scale],
            self.eps * scale,
            |c| layout.is_filled(c),
            triangle_rule(),
        )
    }
}

/// Mass of the normalized 2D kernel on the half-plane `{z1 < d}`.
fn half_plane_mass(d: f64) -> f64 {
    const N: usize = 4096;
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    let marginal = |z: f64| -> f64 {
        let r = (1.0 - z * z).max(0.0).sqrt();
        if r == 0.0 {
            return 0.0;
        }
        GaussLegendre::new(12).integrate_composite(-r, r, 8, |s| bump(z * z + s * s)) / mass_2d()
    };
    if d <= -1.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    if d > 0.0 {
        return 1.0 - half_plane_mass(-d);
    }
    let table = T.get_or_init(|| {
        let gl = GaussLegendre::new(8);
        let mut v = vec![0.0; N + 1];
        for k in 1..=N {
            let a = -1.0 + (k - 1) as f64 / N as f64;
            let b = -1.0 + k as f64 / N as f64;
            v[k] = v[k - 1] + gl.integrate(a, b, marginal);
        }
        // pin the half mass at 0 exactly
        let total = 2.0 * v[N];
        v.iter_mut().for_each(|x| *x /= total);
        v
    });
    let x = (d + 1.0) * N as f64;
    let k = (x.floor() as usize).min(N - 1);
    let s = x - k as f64;
    let h = 1.0 / N as f64;
    let z0 = -1.0 + k as f64 * h;
    let d0 = marginal(z0) * h;
    let d1 = marginal(z0 + h) * h;
    let (p0, p1) = (table[k], table[k + 1]);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * d0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * d1
}

/// `rho_in * psi_{2^-j}` at a point, restricted to `Q_N` when `space` is
/// set.
pub fn mollified_data_at(j: u32, space: Option<u32>, x: [f64; 2]) -> f64 {
    let eps = (-(j as f64)).exp2();
    let data = |p: [f64; 2]| -> f64 {
        match space {
            Some(n) => {
                let n = n as f64;
                if p[0] >= -n && p[0] < n && p[1] >= -n && p[1] < n {
                    rho_in(p)
                } else {
                    0.0
                }
            }
            None => rho_in(p),
        }
    };
    // jump lines lie on integers
    let off = |v: f64| v.round() - v;
    let (ox, oy) = (off(x[0]), off(x[1]));
    let (nx, ny) = (ox.abs() < eps, oy.abs() < eps);
    let v = match (nx, ny) {
        (false, false) => return data(x),
        (true, false) => {
            let m = half_plane_mass(ox / eps);
            let lo = data([x[0] + ox - 0.5 * eps, x[1]]);
            let hi = data([x[0] + ox + 0.5 * eps, x[1]]);
            lo * m + hi * (1.0 - m)
        }
        (false, true) => {
            let m = half_plane_mass(oy / eps);
            let lo = data([x[0], x[1] + oy - 0.5 * eps]);
            let hi = data([x[0], x[1] + oy + 0.5 * eps]);
            lo * m + hi * (1.0 - m)
        }
        (true, true) => {
            // near a corner: quadrature on the four constant quadrants
            let gl = GaussLegendre::new(10);
            let kernel = Kernel::space(eps);
            let mut acc = 0.0;
            for (a0, a1) in [(-eps, ox), (ox, eps)] {
                for (b0, b1) in [(-eps, oy), (oy, eps)] {
                    if a1 <= a0 || b1 <= b0 {
                        continue;
                    }
                    let val = data([x[0] + 0.5 * (a0 + a1), x[1] + 0.5 * (b0 + b1)]);
                    if val == 0.0 {
                        continue;
                    }
                    let mass = gl.integrate_composite(b0, b1, 8, |zy| {
                        gl.integrate_composite(a0, a1, 8, |zx| kernel.density(zx * zx + zy * zy))
                    });
                    acc += val * mass;
                }
            }
            acc
        }
    };
    v.clamp(0.0, 1.0)
}

/// Mollified checkerboard sampled on the nodes of `window`.
pub fn mollify_data(j: u32, space: Option<u32>, window: &Window, h: f64) -> Result<GridField> {
    if h > (-(j as f64) - 2.0).exp2() {
        return Err(Error::InvalidParameter(format!(
            "spacing {h} does not resolve the mollifier 2^-{j}"
        )));
    }
    GridField::from_fn(window, h, |p| mollified_data_at(j, space, p))
}

/// Centered-difference divergence of a vector grid; one-sided at the edges
/// unless `periodic`.
pub fn discrete_divergence(field: &GridField, periodic: bool) -> Result<GridField> {
    if field.ncomp() != 2 {
        return Err(Error::InvalidParameter(
            "divergence needs a vector grid".into(),
        ));
    }
    let (nx, ny) = field.dims();
    let h = field.h();
    let mut out = GridField::zeros(field.origin(), h, nx, ny, 1)?;
    let d = |c: usize, i: usize, k: usize, n: usize, along_x: bool| -> f64 {
        let at = |m: isize| -> f64 {
            let m = if periodic {
                m.rem_euclid(n as isize)
            } else {
                m
            };
            let m = m as usize;
            if along_x {
                field.get(m, k, c)
            } else {
                field.get(i, m, c)
            }
        };
        let idx = if along_x { i } else { k } as isize;
        if periodic || (idx > 0 && (idx as usize) < n - 1) {
            (at(idx + 1) - at(idx - 1)) / (2.0 * h)
        } else if idx == 0 {
            (at(1) - at(0)) / h
        } else {
            (at(idx) - at(idx - 1)) / h
        }
    };
    for k in 0..ny {
        for i in 0..nx {
            let v = d(0, i, k, nx, true) + d(1, i, k, ny, false);
            out.set(i, k, 0, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Variant;
    use rand::{Rng, SeedableRng};

    /// Tensor Gauss rule on the square `[-r, r]^2`, split into `s x s` pieces.
    fn square_rule(r: f64, pieces: usize, order: usize) -> Vec<([f64; 2], f64)> {
        let gl = GaussLegendre::new(order);
        let h = 2.0 * r / pieces as f64;
        let one: Vec<(f64, f64)> = (0..pieces)
            .flat_map(|k| {
                let lo = -r + h * k as f64;
                gl.mapped(lo, lo + h).collect::<Vec<_>>()
            })
            .collect();
        let mut pts = Vec::new();
        for &(y, wy) in &one {
            for &(x, wx) in &one {
                if x * x + y * y < r * r {
                    pts.push(([x, y], wx * wy));
                }
            }
        }
        pts
    }

    /// Polar brute force for `(u * phi_delta)(y)`.
    fn polar_oracle(y: [f64; 2], delta: f64) -> [f64; 2] {
        let k = Kernel::space(delta);
        let gl = GaussLegendre::new(12);
        let mut acc = [0.0, 0.0];
        for c in 0..2 {
            acc[c] = gl.integrate_composite(0.0, delta, 40, |r| {
                r * k.density(r * r)
                    * gl.integrate_composite(0.0, std::f64::consts::TAU, 256, |a| {
                        eval_u0([y[0] - r * a.cos(), y[1] - r * a.sin()])[c]
                    })
            });
        }
        acc
    }

    #[test]
    fn kernels_have_unit_mass() {
        let gl = GaussLegendre::new(16);
        let k1 = Kernel::time(0.3);
        let m1 = gl.integrate_composite(-0.3, 0.3, 32, |s| k1.density(s * s));
        assert!((m1 - 1.0).abs() < 1e-10, "{m1}");
        let k2 = Kernel::space(0.2);
        let rule = square_rule(0.2, 32, 16);
        let m2: f64 = rule
            .iter()
            .map(|(z, w)| w * k2.density(z[0] * z[0] + z[1] * z[1]))
            .sum();
        assert!((m2 - 1.0).abs() < 1e-10, "{m2}");
        assert_eq!(k1.cdf(-0.3), 0.0);
        assert_eq!(k1.cdf(0.31), 1.0);
        assert!((k1.cdf(0.0) - 0.5).abs() < 1e-14);
        let part = gl.integrate_composite(-0.3, 0.1, 32, |s| k1.density(s * s));
        assert!((k1.cdf(0.1) - part).abs() < 1e-10);
    }

    #[test]
    fn zero_field_mollifies_to_zero() {
        let spec = FieldSpec::base()
            .truncate_time(1, Variant::Asymmetric)
            .unwrap();
        let m = MollifiedField::new(&spec, 4).unwrap();
        // inside the zero interval beyond the kernel reach
        assert!(m.at(1.5).is_zero());
        assert_eq!(m.eval(3.0, [0.2, 0.1]), [0.0, 0.0]);
    }

    #[test]
    fn deep_interior_values_are_exact() {
        let m = MollifiedField::new(&FieldSpec::base(), 5).unwrap();
        let v = m.eval(0.25, [0.3, 0.1]);
        assert!((v[0]).abs() < 1e-12 && (v[1] - 1.2).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn split_convolution_matches_polar_quadrature() {
        let delta = 0.1;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for k in 0..30 {
            let y = if k < 10 {
                // corners and centers, where several jump lines meet
                [
                    (k / 2) as f64 * 0.5 + 0.01 * k as f64,
                    0.5 * (k % 2) as f64 - 0.013,
                ]
            } else {
                [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
            };
            let a = convolve_u(y, delta);
            let b = polar_oracle(y, delta);
            assert!(
                (a[0] - b[0]).abs() < 2e-4 && (a[1] - b[1]).abs() < 2e-4,
                "{y:?}: {a:?} vs {b:?}"
            );
        }
        // linear neighbourhood: the even kernel reproduces w
        let v = convolve_u([0.3, 0.05], delta);
        assert!(v[0].abs() < 1e-12 && (v[1] - 1.2).abs() < 1e-5, "{v:?}");
    }

    #[test]
    fn table_matches_direct_convolution() {
        let t = VortexTable::new(1.0 / 16.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for _ in 0..400 {
            let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let a = t.eval(y);
            let b = t.exact(y);
            worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
        eprintln!("table error {worst}");
        assert!(worst < 0.02, "table error {worst}");
    }

    #[test]
    fn sup_bound_and_mirror_symmetry() {
        let spec = FieldSpec::base()
            .truncate_time(2, Variant::Symmetric)
            .unwrap();
        let m = MollifiedField::new(&spec, 5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5000 {
            let t = rng.random_range(0.0..2.0);
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let v = m.eval(t, x);
            assert!(v[0].hypot(v[1]) <= 2.0 + 1e-9);
            let u = m.eval(2.0 - t, x);
            assert!((v[0] + u[0]).abs() < 1e-12 && (v[1] + u[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn data_examples() {
        assert_eq!(mollified_data_at(3, None, [0.5, 0.5]), 0.0);
        assert_eq!(mollified_data_at(3, None, [1.5, 0.5]), 1.0);
        let e = mollified_data_at(3, None, [1.0, 0.5]);
        assert!((e - 0.5).abs() < 1e-12, "{e}");
        let corner = mollified_data_at(3, None, [1.0, 1.0]);
        assert!((corner - 0.5).abs() < 1e-9, "{corner}");
        // independent oracle: tensor quadrature split at the jump lines
        let gl = GaussLegendre::new(16);
        let k = Kernel::space(0.125);
        let oracle = |p: [f64; 2]| -> f64 {
            let split = |c: f64| -> Vec<(f64, f64)> {
                let (lo, hi) = (c - 0.125, c + 0.125);
                let r = c.round();
                if r > lo && r < hi {
                    vec![(lo, r), (r, hi)]
                } else {
                    vec![(lo, hi)]
                }
            };
            let mut acc = 0.0;
            for (a, b) in split(p[0]) {
                for (c, d) in split(p[1]) {
                    let v = rho_in([0.5 * (a + b), 0.5 * (c + d)]);
                    acc += v * gl.integrate_composite(c, d, 32, |y| {
                        gl.integrate_composite(a, b, 32, |x| {
                            k.density((x - p[0]).powi(2) + (y - p[1]).powi(2))
                        })
                    });
                }
            }
            acc
        };
        for p in [[1.03, 0.98], [1.05, 0.5], [0.5, -0.02], [-1.1, 2.95]] {
            let (got, want) = (mollified_data_at(3, None, p), oracle(p));
            assert!((got - want).abs() < 1e-9, "{p:?}: {got} vs {want}");
        }
        let g = mollify_data(3, None, &Window::q(1), 1.0 / 64.0).unwrap();
        assert!((g.integral() - 2.0).abs() < 1e-9);
        let (lo, hi) = g.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(mollify_data(3, None, &Window::q(1), 0.25).is_err());
    }

    #[test]
    fn truncated_field_vanishes_outside_window() {
        let spec = FieldSpec::base().truncate_space(1).unwrap();
        let m = MollifiedField::new(&spec, 4).unwrap();
        assert_eq!(m.eval(0.25, [2.0, 0.0]), [0.0, 0.0]);
        let inside = m.eval(0.25, [0.3, 0.1]);
        assert!((inside[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn constant_field_has_zero_divergence() {
        let mut g = GridField::on_window(&Window::q(1), 0.125, 2).unwrap();
        for v in g.data_mut().chunks_mut(2) {
            v[0] = 0.7;
            v[1] = -0.2;
        }
        let d = discrete_divergence(&g, false).unwrap();
        assert!(d.data().iter().all(|v| *v == 0.0));
    }
}
