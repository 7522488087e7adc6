//! Uniform cell-centered grids, their binary dump and PGM export.
//!
//! Node `(i, k)` sits at `origin + (i + 1/2, k + 1/2) h`; values are stored
//! row-major from the bottom row with components interleaved.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{CellField, Window};

pub const GF01_MAGIC: &[u8; 4] = b"GF01";
const HEADER_LEN: usize = 4 + 3 * 4 + 3 * 8;
/// Grids above this many values are refused when decoding.
const MAX_VALUES: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    origin: [f64; 2],
    h: f64,
    nx: usize,
    ny: usize,
    ncomp: usize,
    data: Vec<f64>,
}

fn is_pow2(h: f64) -> bool {
    h > 0.0 && h.is_finite() && {
        let bits = h.to_bits();
        bits & ((1u64 << 52) - 1) == 0 && (bits >> 52) != 0
    }
}

impl GridField {
    pub fn zeros(origin: [f64; 2], h: f64, nx: usize, ny: usize, ncomp: usize) -> Result<Self> {
        if !is_pow2(h) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing {h} is not a power of two"
            )));
        }
        if nx == 0
            || ny == 0
            || ncomp == 0
            || nx.saturating_mul(ny).saturating_mul(ncomp) > MAX_VALUES
        {
            return Err(Error::InvalidParameter(format!(
                "unsupported grid shape {nx}x{ny}x{ncomp}"
            )));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(GridField {
            origin,
            h,
            nx,
            ny,
            ncomp,
            data: vec![0.0; nx * ny * ncomp],
        })
    }

    /// Grid covering `window` with spacing `h`.
    pub fn on_window(window: &Window, h: f64, ncomp: usize) -> Result<Self> {
        let side = window.side.to_f64();
        let n = side / h;
        if n.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "spacing {h} does not divide window {window}"
            )));
        }
        Self::zeros(
            [window.x0.to_f64(), window.y0.to_f64()],
            h,
            n as usize,
            n as usize,
            ncomp,
        )
    }

    /// Scalar grid sampled from `f` at the nodes.
    pub fn from_fn(window: &Window, h: f64, f: impl Fn([f64; 2]) -> f64 + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let mut g = Self::on_window(window, h, 1)?;
        let (nx, origin) = (g.nx, g.origin);
        g.data.par_chunks_mut(nx).enumerate().for_each(|(k, row)| {
            let y = origin[1] + (k as f64 + 0.5) * h;
            for (i, v) in row.iter_mut().enumerate() {
                *v = f([origin[0] + (i as f64 + 0.5) * h, y]);
            }
        });
        Ok(g)
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn node(&self, i: usize, k: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (k as f64 + 0.5) * self.h,
        ]
    }

    pub fn get(&self, i: usize, k: usize, c: usize) -> f64 {
        self.data[(k * self.nx + i) * self.ncomp + c]
    }

    pub fn set(&mut self, i: usize, k: usize, c: usize, v: f64) {
        self.data[(k * self.nx + i) * self.ncomp + c] = v;
    }

    pub fn bounds(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[1],
            self.origin[0] + self.nx as f64 * self.h,
            self.origin[1] + self.ny as f64 * self.h,
        ]
    }

    /// Bilinear sample of a scalar grid. With `periodic` the grid is a
    /// torus; otherwise points beyond the outer nodes read `outside`.
    pub fn sample(&self, p: [f64; 2], periodic: bool, outside: f64) -> f64 {
        let fx = (p[0] - self.origin[0]) / self.h - 0.5;
        let fy = (p[1] - self.origin[1]) / self.h - 0.5;
        let ix = fx.floor();
        let iy = fy.floor();
        let tx = fx - ix;
        let ty = fy - iy;
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let (ix, iy) = (ix as i64, iy as i64);
        let at = |i: i64, k: i64| -> f64 {
            if periodic {
                self.data[(k.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize]
            } else if i < 0 || k < 0 || i >= nx || k >= ny {
                outside
            } else {
                self.data[(k * nx + i) as usize]
            }
        };
        let a = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
        let b = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
        a * (1.0 - ty) + b * ty
    }

    /// `sum |v| h^2` of a scalar grid.
    pub fn l1_norm(&self) -> f64 {
        pairwise_sum(&self.data.iter().map(|v| v.abs()).collect::<Vec<_>>()) * self.h * self.h
    }

    /// `sum v h^2` of a scalar grid.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.data) * self.h * self.h
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Exact rasterization of a cell field: each node takes the value of the
    /// cell containing it.
    pub fn from_cells(cells: &CellField, h: f64) -> Result<Self> {
        let w = cells.window();
        GridField::from_fn(&w, h, |p| cells.value_at(p).map_or(0.0, |v| v.to_f64()))
    }

    pub fn to_gf01(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(GF01_MAGIC);
        for v in [self.ncomp, self.nx, self.ny] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in [self.origin[0], self.origin[1], self.h] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_gf01(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Decode("truncated header".into()));
        }
        if &bytes[..4] != GF01_MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let u =
            |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
        let f = |k: usize| f64::from_le_bytes(bytes[16 + 8 * k..24 + 8 * k].try_into().unwrap());
        let (ncomp, nx, ny) = (u(0), u(1), u(2));
        let mut g = GridField::zeros([f(0), f(1)], f(2), nx, ny, ncomp)
            .map_err(|e| Error::Decode(e.to_string()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * g.data.len() {
            return Err(Error::Decode(format!(
                "expected {} payload bytes, found {}",
                8 * g.data.len(),
                body.len()
            )));
        }
        for (v, chunk) in g.data.iter_mut().zip(body.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(g)
    }

    /// Binary PGM of a scalar grid: values clamped to [0, 1], scaled by 255
    /// and rounded half to even; top row is the largest `y`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.nx * self.ny);
        write!(out, "P5\n{} {}\n255\n", self.nx, self.ny).unwrap();
        for k in (0..self.ny).rev() {
            for i in 0..self.nx {
                out.push(gray(self.data[(k * self.nx + i) * self.ncomp]));
            }
        }
        out
    }
}

fn gray(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round_ties_even() as u8
}

/// Pairwise summation; the reduction tree depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Window-restricted L1 distance per unit area between two scalar grids on
/// the same lattice, by the midpoint rule.
pub fn l1_distance(a: &GridField, b: &GridField, window: &Window) -> Result<f64> {
    if a.h != b.h {
        return Err(Error::InvalidParameter(
            "grids have different spacing".into(),
        ));
    }
    let [x0, y0, x1, y1] = window.bounds_f64();
    let h = a.h;
    let mut terms = Vec::new();
    let nx = ((x1 - x0) / h).round() as usize;
    let ny = ((y1 - y0) / h).round() as usize;
    for k in 0..ny {
        for i in 0..nx {
            let p = [x0 + (i as f64 + 0.5) * h, y0 + (k as f64 + 0.5) * h];
            let va = a.value_at_node(p).ok_or(Error::DisjointWindows)?;
            let vb = b.value_at_node(p).ok_or(Error::DisjointWindows)?;
            terms.push((va - vb).abs());
        }
    }
    Ok(pairwise_sum(&terms) / (nx * ny) as f64)
}

impl GridField {
    /// Value at a point that must coincide with a node.
    fn value_at_node(&self, p: [f64; 2]) -> Option<f64> {
        let fx = (p[0] - self.origin[0]) / self.h - 0.5;
        let fy = (p[1] - self.origin[1]) / self.h - 0.5;
        let (i, k) = (fx.round(), fy.round());
        if (fx - i).abs() > 1e-9 || (fy - k).abs() > 1e-9 {
            return None;
        }
        if i < 0.0 || k < 0.0 || i as usize >= self.nx || k as usize >= self.ny {
            return None;
        }
        Some(self.data[(k as usize * self.nx + i as usize) * self.ncomp])
    }
}
