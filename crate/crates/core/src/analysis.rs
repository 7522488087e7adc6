//! Weak-star diagnostics, weak-form residuals and norm estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::field::{stage_at, FieldSpec, VortexLayout, FIELD_BOUND};
use crate::flow::{density, Branch};
use crate::geometry::{rho_in, CellField, Window};
use crate::grid::{pairwise_sum, GridField};
use crate::mollify::{bump, mass_1d};
use crate::polygon::{clip_segment, Poly};
use crate::quadrature::GaussLegendre;

/// Largest deviation from 1/2 among the level-`level` cell averages of
/// `field` inside `window`. Exact.
pub fn weak_gap(field: &CellField, level: u32, window: Window) -> Result<Dyadic> {
    window.check_aligned(level)?;
    let part = field.restrict(window)?;
    let avg = if level > part.level() {
        part.refine(level)?
    } else {
        part.cell_averages(level)?
    };
    let n = avg.cells_per_side();
    let mut worst = Dyadic::ZERO;
    for iy in 0..n {
        for ix in 0..n {
            worst = worst.max((avg.local(ix, iy) - Dyadic::HALF).abs());
        }
    }
    Ok(worst)
}

/// `weak_gap` for a sampled scalar grid: cell averages are node means.
pub fn weak_gap_grid(g: &GridField, level: u32, window: Window) -> Result<f64> {
    window.check_aligned(level)?;
    let side = (-(level as f64)).exp2();
    let h = g.h();
    if g.ncomp() != 1 || side < h {
        return Err(Error::InvalidParameter(format!(
            "level {level} cells are not resolved by spacing {h}"
        )));
    }
    let per = (side / h) as usize;
    let o = g.origin();
    let (i0, k0) = ((window.x0.to_f64() - o[0]) / h, (window.y0.to_f64() - o[1]) / h);
    let (nx, ny) = g.dims();
    let cells = (window.side.to_f64() / side) as usize;
    if i0 < 0.0 || k0 < 0.0 || i0 as usize + cells * per > nx || k0 as usize + cells * per > ny {
        return Err(Error::DisjointWindows);
    }
    let (i0, k0) = (i0 as usize, k0 as usize);
    let mut worst: f64 = 0.0;
    for cy in 0..cells {
        for cx in 0..cells {
            let mut vals = Vec::with_capacity(per * per);
            for k in 0..per {
                for i in 0..per {
                    vals.push(g.get(i0 + cx * per + i, k0 + cy * per + k, 0));
                }
            }
            let mean = pairwise_sum(&vals) / vals.len() as f64;
            worst = worst.max((mean - 0.5).abs());
        }
    }
    Ok(worst)
}

/// `exp(-1 / (1 - z^2))` centred at `center`, with support radius `radius`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bump1 {
    pub center: f64,
    pub radius: f64,
}

impl Bump1 {
    pub fn new(center: f64, radius: f64) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        Bump1 { center, radius }
    }

    pub fn value(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.radius;
        bump(z * z)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.radius;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - z * z;
        bump(z * z) * (-2.0 * z / (q * q)) / self.radius
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    pub fn integral(&self) -> f64 {
        mass_1d() * self.radius
    }

    /// Integral over `[a, b]`, resolved to rounding.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            return 0.0;
        }
        let panels = ((8.0 * (b - a) / self.radius).ceil() as usize).max(1);
        gl16().integrate_composite(a, b, panels, |s| self.value(s))
    }

    /// `sup |phi| = e^-1`, attained at the centre.
    pub fn sup(&self) -> f64 {
        (-1.0f64).exp()
    }

    /// `sup |phi'|`; the maximum sits at `z^4 = 1/3`.
    pub fn sup_derivative(&self) -> f64 {
        let z2 = 3f64.sqrt().recip();
        let z = z2.sqrt();
        let q = 1.0 - z2;
        bump(z2) * 2.0 * z / (q * q) / self.radius
    }
}

fn gl16() -> &'static GaussLegendre {
    static R: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(16))
}

/// Tensor product of 1D bumps in `x1`, `x2` and optionally `t`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TestFunction {
    pub t: Option<Bump1>,
    pub x: [Bump1; 2],
}

impl TestFunction {
    pub fn space(center: [f64; 2], radius: [f64; 2]) -> Self {
        TestFunction {
            t: None,
            x: [Bump1::new(center[0], radius[0]), Bump1::new(center[1], radius[1])],
        }
    }

    pub fn space_time(t: Bump1, center: [f64; 2], radius: [f64; 2]) -> Self {
        TestFunction {
            t: Some(t),
            ..Self::space(center, radius)
        }
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        match self.t {
            Some(b) => (b.value(t), b.derivative(t)),
            None => (1.0, 0.0),
        }
    }

    pub fn value(&self, t: f64, x: [f64; 2]) -> f64 {
        self.time_factor(t).0 * self.x[0].value(x[0]) * self.x[1].value(x[1])
    }

    /// `(d/dt, d/dx1, d/dx2)`.
    pub fn gradient(&self, t: f64, x: [f64; 2]) -> [f64; 3] {
        let (a, da) = self.time_factor(t);
        let (p, dp) = (self.x[0].value(x[0]), self.x[0].derivative(x[0]));
        let (q, dq) = (self.x[1].value(x[1]), self.x[1].derivative(x[1]));
        [da * p * q, a * dp * q, a * p * dq]
    }

    /// Spatial support box `[x0, y0, x1, y1]`.
    pub fn support_box(&self) -> [f64; 4] {
        let (a, b) = self.x[0].support();
        let (c, d) = self.x[1].support();
        [a, c, b, d]
    }

    /// `sup |grad_x phi|` over space-time, bounded componentwise in closed
    /// form: `max_k sup|phi_k'| prod_{l != k} sup|phi_l|`, scaled by `sqrt 2`
    /// so it dominates the Euclidean norm.
    pub fn sup_space_gradient(&self) -> f64 {
        let ts = self.t.map_or(1.0, |b| b.sup());
        let g0 = self.x[0].sup_derivative() * self.x[1].sup();
        let g1 = self.x[0].sup() * self.x[1].sup_derivative();
        ts * std::f64::consts::SQRT_2 * g0.max(g1)
    }

    pub fn sup_time_derivative(&self) -> f64 {
        self.t.map_or(0.0, |b| b.sup_derivative()) * self.x[0].sup() * self.x[1].sup()
    }

    /// Integral over space at a fixed time.
    pub fn space_integral(&self) -> f64 {
        self.x[0].integral() * self.x[1].integral()
    }

    fn check_inside(&self, window: &Window) -> Result<()> {
        let b = self.support_box();
        let w = window.bounds_f64();
        if b[0] < w[0] || b[1] < w[1] || b[2] > w[2] || b[3] > w[3] {
            return Err(Error::SupportEscape);
        }
        Ok(())
    }
}

/// Five fixed spatial bumps inside `Q_1`, off-centre so that no symmetry of
/// the lattice is shared.
pub fn spatial_battery() -> [TestFunction; 5] {
    [
        TestFunction::space([0.13, -0.21], [0.6, 0.6]),
        TestFunction::space([-0.37, 0.29], [0.45, 0.45]),
        TestFunction::space([0.41, 0.52], [0.3, 0.35]),
        TestFunction::space([0.07, 0.03], [0.85, 0.85]),
        TestFunction::space([-0.23, -0.45], [0.5, 0.33]),
    ]
}

/// Five fixed space-time bumps, each with time support crossing `t = 1`
/// except the first.
pub fn space_time_battery() -> [TestFunction; 5] {
    [
        TestFunction::space_time(Bump1::new(0.5, 0.3), [0.13, -0.21], [0.6, 0.6]),
        TestFunction::space_time(Bump1::new(1.0, 0.5), [-0.37, 0.29], [0.45, 0.45]),
        TestFunction::space_time(Bump1::new(0.9, 0.35), [0.41, 0.52], [0.3, 0.35]),
        TestFunction::space_time(Bump1::new(1.2, 0.45), [0.07, 0.03], [0.7, 0.7]),
        TestFunction::space_time(Bump1::new(1.05, 0.25), [-0.23, -0.45], [0.5, 0.33]),
    ]
}

/// Per-cell integrals of `phi` over the columns and rows of `field`.
fn cell_integrals(field: &CellField, phi: &TestFunction) -> (Vec<f64>, Vec<f64>) {
    let n = field.cells_per_side();
    let side = field.cell_side();
    let w = field.window().bounds_f64();
    let col = (0..n)
        .map(|i| {
            let a = w[0] + i as f64 * side;
            phi.x[0].integral_over(a, a + side)
        })
        .collect();
    let row = (0..n)
        .map(|k| {
            let a = w[1] + k as f64 * side;
            phi.x[1].integral_over(a, a + side)
        })
        .collect();
    (col, row)
}

/// `int phi f dx` for a cell field: `phi` is integrated exactly on each cell
/// (to rounding) and weighted by the cell value.
pub fn pair(field: &CellField, phi: &TestFunction) -> Result<f64> {
    pair_centered(field, phi, 0.0)
}

/// `int phi (f - c) dx`, summed cell by cell so that small deviations from
/// `c` are not lost to cancellation.
pub fn pair_centered(field: &CellField, phi: &TestFunction, c: f64) -> Result<f64> {
    if phi.t.is_some() {
        return Err(Error::InvalidParameter(
            "pairing takes a purely spatial test function".into(),
        ));
    }
    phi.check_inside(&field.window())?;
    let (col, row) = cell_integrals(field, phi);
    let n = field.cells_per_side();
    let rows: Vec<f64> = (0..n)
        .map(|k| {
            if row[k] == 0.0 {
                return 0.0;
            }
            let terms: Vec<f64> = (0..n)
                .map(|i| (field.local(i, k).to_f64() - c) * col[i])
                .collect();
            row[k] * pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&rows))
}

/// Midpoint-rule pairing for a sampled scalar grid.
pub fn pair_grid(g: &GridField, phi: &TestFunction) -> Result<f64> {
    let b = g.bounds();
    let s = phi.support_box();
    if s[0] < b[0] || s[1] < b[1] || s[2] > b[2] || s[3] > b[3] {
        return Err(Error::SupportEscape);
    }
    let (nx, ny) = g.dims();
    let h = g.h();
    let rows: Vec<f64> = (0..ny)
        .map(|k| {
            let terms: Vec<f64> = (0..nx)
                .map(|i| g.get(i, k, 0) * phi.value(0.0, g.node(i, k)))
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&rows) * h * h)
}

/// Space-time rectangle rule: spacing at most `h`, nodes at fractions
/// `shift` of each step in `(t, x1, x2)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rule {
    pub h: f64,
    pub shift: [f64; 3],
}

impl Rule {
    pub fn midpoint(h: f64) -> Self {
        Rule { h, shift: [0.5; 3] }
    }

    /// The `k`-th member of a fixed family of shifted rules; member 0 is the
    /// midpoint rule, the rest follow an additive recurrence.
    pub fn shifted(h: f64, k: usize) -> Self {
        const ALPHA: [f64; 3] = [0.819_172_513_396_164_4, 0.671_043_606_703_789_2, 0.549_700_477_901_970_4];
        let shift = std::array::from_fn(|d| (0.5 + k as f64 * ALPHA[d]).fract());
        Rule { h, shift }
    }

    fn check(&self) -> Result<()> {
        if !(self.h > 0.0) || self.shift.iter().any(|s| !(0.0..1.0).contains(s)) {
            return Err(Error::InvalidParameter(format!("quadrature rule {self:?}")));
        }
        Ok(())
    }
}

/// Rectangle-rule nodes of `[a, b]` split into pieces no longer than `h`,
/// placed at fraction `theta` of each piece.
fn nodes(a: f64, b: f64, h: f64, theta: f64) -> (Vec<f64>, f64) {
    if b <= a {
        return (Vec::new(), 0.0);
    }
    let n = ((b - a) / h).ceil().max(1.0) as usize;
    let step = (b - a) / n as f64;
    ((0..n).map(|k| a + (k as f64 + theta) * step).collect(), step)
}

/// `int int rho (d_t phi + b . grad phi) dx dt` over `t` in `[t0, t1]`,
/// by the rectangle rule `q`.
fn residual_slab(
    rho: &(impl Fn(f64, [f64; 2]) -> f64 + Sync),
    spec: &FieldSpec,
    phi: &TestFunction,
    t0: f64,
    t1: f64,
    q: Rule,
) -> f64 {
    let (h, shift) = (q.h, q.shift);
    let sb = phi.support_box();
    let (t0, t1) = match phi.t {
        Some(b) => (t0.max(b.support().0), t1.min(b.support().1)),
        None => (t0, t1),
    };
    let (ts, dt) = nodes(t0, t1, h, shift[0]);
    let (xs, dx) = nodes(sb[0], sb[2], h, shift[1]);
    let (ys, dy) = nodes(sb[1], sb[3], h, shift[2]);
    let slices: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let rows: Vec<f64> = ys
                .iter()
                .map(|&y| {
                    let terms: Vec<f64> = xs
                        .iter()
                        .map(|&x| {
                            let p = [x, y];
                            let g = phi.gradient(t, p);
                            if g == [0.0; 3] {
                                return 0.0;
                            }
                            let b = spec.eval(t, p);
                            rho(t, p) * (g[0] + b[0] * g[1] + b[1] * g[2])
                        })
                        .collect();
                    pairwise_sum(&terms)
                })
                .collect();
            pairwise_sum(&rows)
        })
        .collect();
    pairwise_sum(&slices) * dt * dx * dy
}

/// `int rho(t, x) phi(s, x) dx` by the spatial part of `q`.
fn slice_pairing(
    rho: &(impl Fn(f64, [f64; 2]) -> f64 + Sync),
    t: f64,
    phi: &TestFunction,
    s: f64,
    q: Rule,
) -> f64 {
    let (h, shift) = (q.h, q.shift);
    let sb = phi.support_box();
    let (xs, dx) = nodes(sb[0], sb[2], h, shift[1]);
    let (ys, dy) = nodes(sb[1], sb[3], h, shift[2]);
    let rows: Vec<f64> = ys
        .par_iter()
        .map(|&y| {
            let terms: Vec<f64> = xs.iter().map(|&x| rho(t, [x, y]) * phi.value(s, [x, y])).collect();
            pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&rows) * dx * dy
}

/// Signed distributional residual
/// `int int rho (d_t phi + b . grad phi) + int rho_in phi(0, .)`.
pub fn weak_residual_signed(
    rho: &(impl Fn(f64, [f64; 2]) -> f64 + Sync),
    spec: &FieldSpec,
    data: &(impl Fn([f64; 2]) -> f64 + Sync),
    phi: &TestFunction,
    q: Rule,
) -> Result<f64> {
    let tb = phi.t.ok_or_else(|| {
        Error::InvalidParameter("the residual needs a space-time test function".into())
    })?;
    q.check()?;
    let (_, t_hi) = tb.support();
    let bulk = residual_slab(rho, spec, phi, 0.0, t_hi, q);
    let initial = if tb.value(0.0) != 0.0 {
        slice_pairing(&|_, x| data(x), 0.0, phi, 0.0, q)
    } else {
        0.0
    };
    Ok(bulk + initial)
}

/// `|R(phi)|` for a density given pointwise.
pub fn weak_residual(
    rho: &(impl Fn(f64, [f64; 2]) -> f64 + Sync),
    spec: &FieldSpec,
    data: &(impl Fn([f64; 2]) -> f64 + Sync),
    phi: &TestFunction,
    q: Rule,
) -> Result<f64> {
    weak_residual_signed(rho, spec, data, phi, q).map(f64::abs)
}

/// `|R(phi)|` for an exact branch, with its density sampled pointwise.
pub fn branch_residual(branch: Branch, phi: &TestFunction, q: Rule) -> Result<f64> {
    let spec = branch.spec()?;
    weak_residual(&|t, x| density(branch, t, x), &spec, &rho_in, phi, q)
}

/// Largest `|R(phi)|` over the first `rules` shifted rules at spacing `h`.
/// A single rule can land on a lucky cancellation; the envelope over shifts
/// tracks the quadrature error itself.
pub fn branch_residual_envelope(branch: Branch, phi: &TestFunction, h: f64, rules: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..rules.max(1) {
        worst = worst.max(branch_residual(branch, phi, Rule::shifted(h, k))?);
    }
    Ok(worst)
}

/// One row of the gluing experiment.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GluingReport {
    pub beta: f64,
    /// `|R(phi)|` of the glued density.
    pub residual: f64,
    /// Residual restricted to `t` outside `(1 - beta, 1 + beta)`, initial
    /// term included.
    pub outside: f64,
    /// Contribution of the gap `(1 - beta, 1 + beta)`.
    pub gap: f64,
    /// `2 beta |D phi| |b| |rho|_1`.
    pub transport_term: f64,
    /// `2 beta |d_t phi| |rho|_1`.
    pub time_term: f64,
    /// `|int rho(1 - beta) phi(1 - beta) - int rho(1 + beta) phi(1 - beta)|`.
    pub matching: f64,
}

impl GluingReport {
    /// The full bound: linear part plus matching term.
    pub fn bound(&self) -> f64 {
        self.transport_term + self.time_term + self.matching
    }
}

/// Residual of a glued solution split at `1 +- beta`, with the terms of the
/// gluing estimate. `|rho|_1` is bounded by the area of the spatial support,
/// since densities lie in `[0, 1]`.
pub fn gluing_experiment(branch: Branch, phi: &TestFunction, beta: f64, q: Rule) -> Result<GluingReport> {
    q.check()?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("gap {beta} outside (0, 1)")));
    }
    let tb = phi.t.ok_or_else(|| {
        Error::InvalidParameter("the gluing estimate needs a space-time test function".into())
    })?;
    let spec = branch.spec()?;
    let rho = |t: f64, x: [f64; 2]| density(branch, t, x);
    let (_, t_hi) = tb.support();
    let initial = if tb.value(0.0) != 0.0 {
        slice_pairing(&|_, x| rho_in(x), 0.0, phi, 0.0, q)
    } else {
        0.0
    };
    let before = residual_slab(&rho, &spec, phi, 0.0, 1.0 - beta, q);
    let gap = residual_slab(&rho, &spec, phi, 1.0 - beta, 1.0 + beta, q);
    let after = residual_slab(&rho, &spec, phi, 1.0 + beta, t_hi, q);
    let sb = phi.support_box();
    let rho_l1 = (sb[2] - sb[0]) * (sb[3] - sb[1]);
    let left = slice_pairing(&rho, 1.0 - beta, phi, 1.0 - beta, q);
    let right = slice_pairing(&rho, 1.0 + beta, phi, 1.0 - beta, q);
    Ok(GluingReport {
        beta,
        residual: (before + gap + after + initial).abs(),
        outside: (before + after + initial).abs(),
        gap: gap.abs(),
        transport_term: 2.0 * beta * phi.sup_space_gradient() * FIELD_BOUND * rho_l1,
        time_term: 2.0 * beta * phi.sup_time_derivative() * rho_l1,
        matching: (left - right).abs(),
    })
}

/// Pieces of the BV norm of a vortex layout on a box.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct BvParts {
    pub l1: f64,
    /// `int |Du|` over the smooth pieces (Frobenius norm).
    pub absolutely_continuous: f64,
    /// Jumps across the cell diagonals.
    pub diagonal_jumps: f64,
    /// Jumps across the cell edges.
    pub edge_jumps: f64,
}

impl BvParts {
    /// Total variation `|Du|(region)`.
    pub fn variation(&self) -> f64 {
        self.absolutely_continuous + self.diagonal_jumps + self.edge_jumps
    }

    /// `|u|_{L^1} + |Du|`.
    pub fn total(&self) -> f64 {
        self.l1 + self.variation()
    }
}

/// Exact BV pieces of `layout` on the open box `[x0, y0, x1, y1]`.
pub fn tv_norm(layout: &VortexLayout, region: [f64; 4]) -> BvParts {
    let s = (layout.scale as f64).exp2();
    let r = region.map(|v| v * s);
    let lo = [(r[0] + 0.5).floor() as i64, (r[1] + 0.5).floor() as i64];
    let hi = [(r[2] + 0.5).floor() as i64, (r[3] + 0.5).floor() as i64];
    let corners = [[0.5, -0.5], [0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5]];
    let mut unit = BvParts::default();
    for c1 in lo[1]..=hi[1] {
        for c0 in lo[0]..=hi[0] {
            if !layout.is_filled([c0, c1]) {
                continue;
            }
            let o = [c0 as f64, c1 as f64];
            for k in 0..4 {
                let a = [o[0] + corners[k][0], o[1] + corners[k][1]];
                let b = [o[0] + corners[(k + 1) % 4][0], o[1] + corners[(k + 1) % 4][1]];
                // triangle k: |x1| dominant for even k, |x2| for odd k;
                // |w| = 4 |x_dom| is linear there
                let (area, g) = Poly::triangle(o, a, b).clip_box(r).area_centroid();
                let axis = k % 2;
                unit.l1 += area * 4.0 * (g[axis] - o[axis]).abs();
                unit.absolutely_continuous += area * 4.0;
                // half-diagonal from the centre to corner a: jump 4 sqrt2 |a|
                // over arc length sqrt2 da
                if let Some((s0, s1)) = clip_segment(o, a, r) {
                    unit.diagonal_jumps += 4.0 * 0.25 * (s1 * s1 - s0 * s0);
                }
                // the edge from a to b; |w| = 2 along it and the neighbour is
                // empty
                if let Some((s0, s1)) = clip_segment(a, b, r) {
                    unit.edge_jumps += 2.0 * (s1 - s0);
                }
            }
        }
    }
    BvParts {
        l1: unit.l1 / (s * s),
        absolutely_continuous: unit.absolutely_continuous / s,
        diagonal_jumps: unit.diagonal_jumps / s,
        edge_jumps: unit.edge_jumps / s,
    }
}

/// Discrete total variation of a grid field: isotropic forward differences,
/// `sum |(D_x f, D_y f)| h` over interior nodes.
pub fn tv_norm_grid(g: &GridField) -> f64 {
    let (nx, ny) = g.dims();
    let nc = g.ncomp();
    let h = g.h();
    let rows: Vec<f64> = (0..ny.saturating_sub(1))
        .into_par_iter()
        .map(|k| {
            let terms: Vec<f64> = (0..nx - 1)
                .map(|i| {
                    let mut sq = 0.0;
                    for c in 0..nc {
                        let v = g.get(i, k, c);
                        let dx = g.get(i + 1, k, c) - v;
                        let dy = g.get(i, k + 1, c) - v;
                        sq += dx * dx + dy * dy;
                    }
                    sq.sqrt()
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&rows) * h
}

/// Monte-Carlo value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GagliardoConfig {
    pub s: f64,
    /// Total number of sampled pairs.
    pub samples: u64,
    pub seed: u64,
    /// Dyadic distance shells `[R 2^-k-1, R 2^-k)`, `R` the region diameter.
    pub shells: u32,
}

impl GagliardoConfig {
    pub fn new(s: f64, samples: u64, seed: u64) -> Self {
        GagliardoConfig {
            s,
            samples,
            seed,
            shells: 40,
        }
    }
}

const CHUNK: u64 = 1 << 14;

/// `int int |f(z) - f(z')| / |z - z'|^(D + s)` over `region x region`.
///
/// Pairs are drawn shell by shell in `|z - z'|`: `z` uniform in the region,
/// `z'` uniform in the shell around it, rejected outside the region. Shells
/// below `R 2^-shells` are dropped. Every chunk of samples has its own
/// ChaCha stream, so the result does not depend on the thread count.
pub fn gagliardo_mc<const D: usize>(
    f: &(impl Fn([f64; D]) -> [f64; 2] + Sync),
    region: [[f64; 2]; D],
    cfg: &GagliardoConfig,
) -> Result<Estimate> {
    if !(cfg.s > 0.0 && cfg.s < 1.0) {
        return Err(Error::InvalidParameter(format!("smoothness {} outside (0, 1)", cfg.s)));
    }
    if !(D == 2 || D == 3) {
        return Err(Error::InvalidParameter(format!("dimension {D} unsupported")));
    }
    if cfg.shells == 0 || cfg.samples < cfg.shells as u64 {
        return Err(Error::InvalidParameter("sampling budget below one pair per shell".into()));
    }
    let volume: f64 = region.iter().map(|r| r[1] - r[0]).product();
    let diam = region.iter().map(|r| (r[1] - r[0]).powi(2)).sum::<f64>().sqrt();
    let sphere = if D == 2 { 2.0 * std::f64::consts::PI } else { 4.0 * std::f64::consts::PI };
    let per_shell = cfg.samples / cfg.shells as u64;
    let chunks = per_shell.div_ceil(CHUNK);
    let jobs: Vec<(u32, u64)> = (0..cfg.shells).flat_map(|k| (0..chunks).map(move |c| (k, c))).collect();
    let sums: Vec<(f64, f64, u64)> = jobs
        .par_iter()
        .map(|&(k, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((k as u64) << 32) | c);
            let n = CHUNK.min(per_shell - c * CHUNK);
            let (b, a) = (diam * (-(k as f64)).exp2(), diam * (-(k as f64) - 1.0).exp2());
            let (ad, bd) = (a.powi(D as i32), b.powi(D as i32));
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let mut z = [0.0; D];
                for d in 0..D {
                    z[d] = rng.random_range(region[d][0]..region[d][1]);
                }
                let r = (ad + rng.random::<f64>() * (bd - ad)).powf(1.0 / D as f64);
                let dir = unit_vector::<D>(&mut rng);
                let mut zp = [0.0; D];
                let mut inside = true;
                for d in 0..D {
                    zp[d] = z[d] + r * dir[d];
                    inside &= zp[d] >= region[d][0] && zp[d] < region[d][1];
                }
                if !inside {
                    continue;
                }
                let (u, v) = (f(z), f(zp));
                let g = (u[0] - v[0]).hypot(u[1] - v[1]) / r.powf(D as f64 + cfg.s);
                s1 += g;
                s2 += g * g;
            }
            (s1, s2, n)
        })
        .collect();
    let mut value = 0.0;
    let mut var = 0.0;
    for k in 0..cfg.shells {
        let part = &sums[(k as u64 * chunks) as usize..((k as u64 + 1) * chunks) as usize];
        let n: u64 = part.iter().map(|p| p.2).sum();
        let s1: f64 = part.iter().map(|p| p.0).sum();
        let s2: f64 = part.iter().map(|p| p.1).sum();
        let (b, a) = (diam * (-(k as f64)).exp2(), diam * (-(k as f64) - 1.0).exp2());
        let shell = sphere * (b.powi(D as i32) - a.powi(D as i32)) / D as f64;
        let w = volume * shell;
        let mean = s1 / n as f64;
        let m2 = (s2 / n as f64 - mean * mean).max(0.0);
        value += w * mean;
        var += w * w * m2 / n as f64;
    }
    Ok(Estimate {
        value,
        stderr: var.sqrt(),
    })
}

fn unit_vector<const D: usize>(rng: &mut ChaCha8Rng) -> [f64; D] {
    let mut v = [0.0; D];
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    if D == 2 {
        v[0] = phi.cos();
        v[1] = phi.sin();
    } else {
        let z: f64 = rng.random_range(-1.0..1.0);
        let rho = (1.0 - z * z).sqrt();
        v[0] = rho * phi.cos();
        v[1] = rho * phi.sin();
        v[2] = z;
    }
    v
}

/// `B = [-1/2, 1/2]^2`.
pub const UNIT_BOX: [f64; 4] = [-0.5, -0.5, 0.5, 0.5];

/// `b chi_{I_i}` for the base field: the two stages of scale `i`.
pub fn stage_band(spec: &FieldSpec, i: u32) -> impl Fn([f64; 3]) -> [f64; 2] + Sync + '_ {
    move |z: [f64; 3]| match stage_at(z[0]) {
        Some(st) if st.scale == i && spec.is_active(st) => spec.eval(z[0], [z[1], z[2]]),
        _ => [0.0, 0.0],
    }
}

/// Gagliardo `W^{s,1}` seminorm of `b chi_{I_i}` on `[0, 2] x B`.
pub fn gagliardo_seminorm(spec: &FieldSpec, i: u32, cfg: &GagliardoConfig) -> Result<Estimate> {
    let f = stage_band(spec, i);
    gagliardo_mc::<3>(&f, [[0.0, 2.0], [-0.5, 0.5], [-0.5, 0.5]], cfg)
}

/// `L^1` and BV norms of `b chi_{I_i}` on `[0, 2] x B`, exact. The BV norm
/// counts the spatial variation over `I_i` and the four time jumps at its
/// endpoints.
pub fn band_norms(i: u32) -> (f64, f64) {
    let parts = tv_norm(&VortexLayout::new(i), UNIT_BOX);
    let len = (-(i as f64)).exp2();
    let l1 = len * parts.l1;
    let bv = l1 + len * parts.variation() + 4.0 * parts.l1;
    (l1, bv)
}

/// `p(s, sigma) = sigma / s`, from `1/p = s/sigma`.
pub fn interpolation_exponent(s: f64, sigma: f64) -> Result<f64> {
    if !(0.0 < s && s < sigma && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < s < sigma < 1, got s = {s}, sigma = {sigma}"
        )));
    }
    Ok(sigma / s)
}

/// Least-squares slope of `ys` against `xs`, with the standard error
/// propagated from independent errors `sd` on `ys`.
pub fn fit_slope(xs: &[f64], ys: &[f64], sd: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let var: f64 = xs.iter().zip(sd).map(|(x, s)| ((x - mx) / sxx).powi(2) * s * s).sum();
    (slope, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct NormRow {
    pub i: u32,
    /// `|b chi_{I_i}|_{L^1(Omega)}`.
    pub l1: f64,
    /// `|b chi_{I_i}|_{BV(Omega)}`.
    pub bv: f64,
    /// `|u(2^{i+1} .)|_{BV(B)}`.
    pub bv_u: f64,
    pub gagliardo: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct NormReport {
    pub s: f64,
    pub rows: Vec<NormRow>,
    /// Fitted `log2` slope of the Gagliardo estimates against `i`.
    pub slope: f64,
    pub slope_stderr: f64,
    /// Ratios `estimate / (L1^(1-s) BV^s)`; one constant fits if they stay
    /// within a bounded spread.
    pub gn_ratios: Vec<f64>,
    pub sigma: f64,
    pub p: f64,
}

pub fn norm_report(i_list: &[u32], s: f64, sigma: f64, samples: u64, seed: u64) -> Result<NormReport> {
    if i_list.len() < 2 {
        return Err(Error::InvalidParameter("a slope needs at least two scales".into()));
    }
    let p = interpolation_exponent(s, sigma)?;
    let spec = FieldSpec::base();
    let mut rows = Vec::new();
    for &i in i_list {
        let cfg = GagliardoConfig::new(s, samples, seed.wrapping_add(i as u64));
        let est = gagliardo_seminorm(&spec, i, &cfg)?;
        let (l1, bv) = band_norms(i);
        rows.push(NormRow {
            i,
            l1,
            bv,
            bv_u: tv_norm(&VortexLayout::new(i + 1), UNIT_BOX).total(),
            gagliardo: est.value,
            stderr: est.stderr,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.i as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gagliardo.log2()).collect();
    let sd: Vec<f64> = rows
        .iter()
        .map(|r| r.stderr / (r.gagliardo * std::f64::consts::LN_2))
        .collect();
    let (slope, slope_stderr) = fit_slope(&xs, &ys, &sd);
    let gn_ratios = rows
        .iter()
        .map(|r| r.gagliardo / (r.l1.powf(1.0 - s) * r.bv.powf(s)))
        .collect();
    Ok(NormReport {
        s,
        rows,
        slope,
        slope_stderr,
        gn_ratios,
        sigma,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::branch_snapshot;
    use crate::geometry::checkerboard;
    use crate::field::Variant;
    use proptest::prelude::*;

    fn q1() -> Window {
        Window::q(1)
    }

    #[test]
    fn weak_gap_examples() {
        for i in 1..=3u32 {
            let cb = checkerboard(2 * i, q1()).unwrap();
            assert_eq!(weak_gap(&cb, 2 * i - 1, q1()).unwrap(), Dyadic::ZERO);
        }
        let cb0 = checkerboard(0, q1()).unwrap();
        assert_eq!(weak_gap(&cb0, 0, q1()).unwrap(), Dyadic::HALF);
        let snap = branch_snapshot(Branch::Truncated(Variant::Asymmetric, 2), Dyadic::from_int(2), 4, q1()).unwrap();
        assert_eq!(weak_gap(&snap, 3, q1()).unwrap(), Dyadic::ZERO);
    }

    #[test]
    fn weak_gap_of_grid_matches_cells() {
        let cb = checkerboard(2, q1()).unwrap();
        let g = GridField::from_cells(&cb, 1.0 / 16.0).unwrap();
        assert_eq!(weak_gap_grid(&g, 1, q1()).unwrap(), 0.0);
        assert_eq!(weak_gap_grid(&g, 2, q1()).unwrap(), 0.5);
        assert!(weak_gap_grid(&g, 5, q1()).is_err());
    }

    #[test]
    fn bump_derivative_and_sup() {
        let b = Bump1::new(0.3, 0.7);
        for s in [0.0, 0.25, 0.6, 0.9] {
            let fd = (b.value(s + 1e-6) - b.value(s - 1e-6)) / 2e-6;
            assert!((fd - b.derivative(s)).abs() < 1e-7);
        }
        let grid_max = (0..200_001)
            .map(|k| b.derivative(-0.4 + 1.4 * k as f64 / 200_000.0).abs())
            .fold(0.0, f64::max);
        assert!((grid_max - b.sup_derivative()).abs() < 1e-6 * grid_max);
        let total = GaussLegendre::new(20).integrate_composite(-0.4, 1.0, 64, |s| b.value(s));
        assert!((total - b.integral()).abs() < 1e-12);
        assert!((b.integral_over(-5.0, 5.0) - b.integral()).abs() < 1e-13);
    }

    #[test]
    fn pairing_examples() {
        let half = CellField::constant(3, q1(), Dyadic::HALF).unwrap();
        for phi in spatial_battery() {
            let p = pair(&half, &phi).unwrap();
            assert!((p - 0.5 * phi.space_integral()).abs() < 1e-13);
        }
        let far = TestFunction::space([3.0, 3.0], [0.5, 0.5]);
        assert!(matches!(pair(&half, &far), Err(Error::SupportEscape)));
        // phi vanishing on the window: supported in the empty corner cell
        let cb = checkerboard(0, q1()).unwrap();
        let corner = TestFunction::space([0.5, 0.5], [0.4, 0.4]);
        assert_eq!(pair(&cb, &corner).unwrap(), 0.0);
    }

    #[test]
    fn pairing_matches_grid_midpoint() {
        let cb = checkerboard(2, q1()).unwrap();
        let g = GridField::from_cells(&cb, 1.0 / 256.0).unwrap();
        let phi = spatial_battery()[0];
        let exact = pair(&cb, &phi).unwrap();
        let mid = pair_grid(&g, &phi).unwrap();
        assert!((exact - mid).abs() < 1e-4, "{exact} vs {mid}");
    }

    #[test]
    fn residual_of_constant_density_vanishes() {
        let spec = FieldSpec::base().truncate_space(1).unwrap();
        let mut phi = space_time_battery()[0];
        // no time dependence inside the window of integration
        phi.t = Some(Bump1::new(0.25, 0.2));
        let r = weak_residual_signed(&|_, _| 0.7, &spec, &|_| 0.7, &phi, Rule::midpoint(1.0 / 128.0)).unwrap();
        // d_t phi integrates to zero in time and b . grad phi in space
        assert!(r.abs() < 1e-3, "{r}");
    }

    #[test]
    fn exact_branch_residuals_are_small() {
        // off-centre in time, so the tilde symmetry about t = 1 does not
        // cancel the integrand by itself
        for k in [0, 2] {
            let phi = space_time_battery()[k];
            for branch in [Branch::Prime, Branch::Tilde] {
                let r = branch_residual(branch, &phi, Rule::midpoint(1.0 / 64.0)).unwrap();
                assert!(r < 5e-3, "{branch:?} {k} {r}");
            }
        }
        // instant mixing violates the initial condition
        let spec = FieldSpec::base();
        let phi = TestFunction::space_time(Bump1::new(0.0, 0.3), [0.5, 0.5], [0.45, 0.45]);
        let exact = branch_residual(Branch::Prime, &phi, Rule::midpoint(1.0 / 64.0)).unwrap();
        assert!(exact < 5e-3, "{exact}");
        let mixed = weak_residual(&|_, _| 0.5, &spec, &rho_in, &phi, Rule::midpoint(1.0 / 64.0)).unwrap();
        // rho_in = 0 under phi; the bulk term of 1/2 is -1/2 int phi(0, .)
        let want = 0.5 * phi.space_integral() * bump(0.0);
        assert!((mixed - want).abs() < 1e-2 * want, "{mixed} vs {want}");
    }

    #[test]
    fn gluing_bounds_hold() {
        let phi = space_time_battery()[1];
        for branch in [Branch::Prime, Branch::Tilde] {
            let r = gluing_experiment(branch, &phi, 0.125, Rule::midpoint(1.0 / 32.0)).unwrap();
            assert!(r.gap <= r.transport_term + r.time_term, "{r:?}");
            assert!(r.residual <= r.bound(), "{r:?}");
        }
        let tilde = gluing_experiment(Branch::Tilde, &phi, 0.25, Rule::midpoint(1.0 / 32.0)).unwrap();
        assert!(tilde.matching < 1e-12);
    }

    #[test]
    fn w_l1_norm_is_four_thirds() {
        let parts = tv_norm(&VortexLayout::new(0), UNIT_BOX);
        assert!((parts.l1 - 4.0 / 3.0).abs() < 1e-14);
        // independent check by quadrature of |w| on the box
        let gl = GaussLegendre::new(8);
        let norm = |x: f64, y: f64| {
            let v = crate::field::eval_w([x, y]);
            v[0].hypot(v[1])
        };
        let q = gl.integrate_composite(-0.5, 0.5, 64, |y| {
            let a = y.abs();
            gl.integrate(-0.5, -a, |x| norm(x, y))
                + gl.integrate(-a, a, |x| norm(x, y))
                + gl.integrate(a, 0.5, |x| norm(x, y))
        });
        assert!((q - 4.0 / 3.0).abs() < 1e-12, "{q}");
        // |Dw| = 4 on the cell, the diagonals carry 4; the cell edges lie
        // on the boundary of the open box
        assert!((parts.absolutely_continuous - 4.0).abs() < 1e-14);
        assert!((parts.diagonal_jumps - 4.0).abs() < 1e-14);
        assert_eq!(parts.edge_jumps, 0.0);
        let wide = tv_norm(&VortexLayout::new(0), [-1.0, -1.0, 1.0, 1.0]);
        // five filled cells meet the wider box: one whole, four quarters
        assert!((wide.edge_jumps - 16.0).abs() < 1e-14, "{wide:?}");
    }

    #[test]
    fn bv_scales_like_two_to_the_i() {
        let ratios: Vec<f64> = (1..=5)
            .map(|i| tv_norm(&VortexLayout::new(i + 1), UNIT_BOX).total() / (i as f64).exp2())
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 1.05, "{ratios:?}");
    }

    #[test]
    fn grid_tv_approaches_exact() {
        let layout = VortexLayout::new(1);
        let exact = tv_norm(&layout, UNIT_BOX).variation();
        assert!((exact - 16.0).abs() < 1e-12);
        let errs: Vec<f64> = [32.0, 64.0, 128.0]
            .iter()
            .map(|&n| {
                let h = 1.0 / n;
                // offset nodes, off the tie sets and cell edges
                let n = n as usize;
                let o = [-0.5 + 0.31 * h, -0.5 + 0.73 * h];
                let mut g = GridField::zeros(o, h, n, n, 2).unwrap();
                let (nx, ny) = g.dims();
                for k in 0..ny {
                    for i in 0..nx {
                        let v = layout.eval(g.node(i, k));
                        g.set(i, k, 0, v[0]);
                        g.set(i, k, 1, v[1]);
                    }
                }
                (tv_norm_grid(&g) - exact).abs()
            })
            .collect();
        assert!(errs[2] < errs[1] && errs[1] < errs[0] && errs[2] < 0.1 * exact, "{errs:?}");
    }

    #[test]
    fn gagliardo_zero_field_and_validation() {
        let cfg = GagliardoConfig::new(0.5, 10_000, 1);
        let e = gagliardo_mc::<2>(&|_| [0.0, 0.0], [[0.0, 1.0], [0.0, 1.0]], &cfg).unwrap();
        assert_eq!(e.value, 0.0);
        let bad = GagliardoConfig::new(1.0, 10_000, 1);
        assert!(gagliardo_mc::<2>(&|_| [0.0, 0.0], [[0.0, 1.0], [0.0, 1.0]], &bad).is_err());
    }

    #[test]
    fn gagliardo_matches_half_plane_indicator() {
        // f = 1 on x1 > 1/2 in the unit square. The seminorm is
        // 2 int_{x<1/2} int_{x'>1/2} ... ; for s = 1/2 by quadrature of the
        // 1D reduction it is the line integral of the kernel.
        let f = |z: [f64; 2]| if z[0] > 0.5 { [1.0, 0.0] } else { [0.0, 0.0] };
        let cfg = GagliardoConfig::new(0.5, 2_000_000, 3);
        let e = gagliardo_mc::<2>(&f, [[0.0, 1.0], [0.0, 1.0]], &cfg).unwrap();
        // oracle: 2 int_A int_B |z - z'|^-2.5 by tensor quadrature on the
        // four coordinates, split at the jump
        let gl = GaussLegendre::new(6);
        let inner = |x: f64, y: f64| {
            gl.integrate_composite(0.5, 1.0, 24, |xp| {
                gl.integrate_composite(0.0, 1.0, 24, |yp| {
                    let d2 = (x - xp).powi(2) + (y - yp).powi(2);
                    d2.powf(-1.25)
                })
            })
        };
        let oracle = 2.0
            * gl.integrate_composite(0.0, 0.5, 24, |x| gl.integrate_composite(0.0, 1.0, 24, |y| inner(x, y)));
        assert!((e.value - oracle).abs() < 4.0 * e.stderr + 0.03 * oracle, "{e:?} vs {oracle}");
    }

    #[test]
    fn gagliardo_dilation_scaling() {
        // [g(2 .)] on B/2 equals 2^(s - d) [g] on B
        let w = |z: [f64; 2]| crate::field::eval_w(z);
        let w2 = |z: [f64; 2]| crate::field::eval_w([2.0 * z[0], 2.0 * z[1]]);
        let cfg = GagliardoConfig::new(0.5, 1_000_000, 9);
        let a = gagliardo_mc::<2>(&w, [[-0.5, 0.5], [-0.5, 0.5]], &cfg).unwrap();
        let b = gagliardo_mc::<2>(&w2, [[-0.25, 0.25], [-0.25, 0.25]], &cfg).unwrap();
        let want = (0.5f64 - 2.0).exp2();
        let ratio = b.value / a.value;
        let tol = 4.0 * ratio * (a.stderr / a.value + b.stderr / b.value);
        assert!((ratio - want).abs() < tol.max(0.02), "{ratio} vs {want}");
    }

    #[test]
    fn gagliardo_is_deterministic() {
        let cfg = GagliardoConfig::new(0.5, 100_000, 5);
        let spec = FieldSpec::base();
        let a = gagliardo_seminorm(&spec, 2, &cfg).unwrap();
        let b = gagliardo_seminorm(&spec, 2, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolation_exponent(0.5, 0.75).unwrap(), 1.5);
        assert!((interpolation_exponent(0.5, 0.500001).unwrap() - 1.0).abs() < 1e-5);
        assert!((interpolation_exponent(0.5, 0.999999).unwrap() - 2.0).abs() < 1e-5);
        assert!(interpolation_exponent(0.5, 1.0).is_err());
        assert!(interpolation_exponent(0.5, 0.4).is_err());
        assert!(interpolation_exponent(0.0, 0.4).is_err());
    }

    #[test]
    fn slope_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (m, sd) = fit_slope(&xs, &ys, &[0.1; 4]);
        assert!((m + 0.5).abs() < 1e-14);
        assert!((sd - 0.1 / 5f64.sqrt()).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn weak_gap_monotone_under_coarsening(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = CellField::from_fn(3, q1(), 0, |_, _| rng.random_range(0..2)).unwrap();
            let mut prev = weak_gap(&f, 3, q1()).unwrap();
            for level in (0..3).rev() {
                let g = weak_gap(&f, level, q1()).unwrap();
                prop_assert!(g <= prev);
                prev = g;
            }
        }

        #[test]
        fn pairing_bounded_and_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = CellField::from_fn(3, q1(), 0, |_, _| rng.random_range(0..2)).unwrap();
            let phi = spatial_battery()[(seed % 5) as usize];
            let p = pair(&f, &phi).unwrap();
            let l1 = phi.space_integral();
            prop_assert!(p.abs() <= l1 + 1e-12);
            // linear in the field: pairing with the complement adds up
            let q = pair(&f.complement(), &phi).unwrap();
            prop_assert!((p + q - l1).abs() < 1e-12);
            // linear in phi via the centring constant
            let c = pair_centered(&f, &phi, a).unwrap();
            prop_assert!((c - (p - a * l1)).abs() < 1e-12);
        }
    }
}
