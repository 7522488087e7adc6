//! Dyadic lattices, square subdivisions and exact piecewise-constant fields.
//!
//! `Parity::Primary` squares at level `j` are `2^-j [k, k+1) x [l, l+1)`;
//! `Parity::Offset` squares are the same grid shifted by `2^-j-1` in both
//! axes. Every square is half-open, which settles all boundary ties.

use std::fmt;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    /// Corners on `2^-j Z^2`.
    Primary,
    /// Corners on `2^-j-1 (1,1) + 2^-j Z^2`.
    Offset,
}

impl Parity {
    pub fn dual(self) -> Parity {
        match self {
            Parity::Primary => Parity::Offset,
            Parity::Offset => Parity::Primary,
        }
    }
}

/// A square of side `2^-level` in the subdivision of the given parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicSquare {
    pub level: u32,
    pub parity: Parity,
    pub index: (i64, i64),
}

impl DyadicSquare {
    pub fn side(&self) -> Dyadic {
        Dyadic::pow2(-(self.level as i32))
    }

    fn offset(&self) -> Dyadic {
        match self.parity {
            Parity::Primary => Dyadic::ZERO,
            Parity::Offset => Dyadic::pow2(-(self.level as i32) - 1),
        }
    }

    pub fn corner(&self) -> (Dyadic, Dyadic) {
        let s = self.side();
        let o = self.offset();
        (
            o + Dyadic::from_int(self.index.0) * s,
            o + Dyadic::from_int(self.index.1) * s,
        )
    }

    pub fn center(&self) -> (Dyadic, Dyadic) {
        let (x, y) = self.corner();
        let h = Dyadic::pow2(-(self.level as i32) - 1);
        (x + h, y + h)
    }

    /// Whether the point lies in the half-open square.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (x, y) = self.corner();
        let s = self.side().to_f64();
        let (x, y) = (x.to_f64(), y.to_f64());
        p[0] >= x && p[0] < x + s && p[1] >= y && p[1] < y + s
    }
}

/// Whether `(x, y)` lies on the lattice `L^parity_level`.
pub fn on_lattice(p: (Dyadic, Dyadic), level: u32, parity: Parity) -> bool {
    let shift = match parity {
        Parity::Primary => Dyadic::ZERO,
        Parity::Offset => Dyadic::pow2(-(level as i32) - 1),
    };
    (p.0 - shift).scaled_integer(level).is_some() && (p.1 - shift).scaled_integer(level).is_some()
}

/// The unique square of the given subdivision containing `p` under the
/// half-open convention.
pub fn cell_of(p: [f64; 2], level: u32, parity: Parity) -> DyadicSquare {
    let scale = (level as f64).exp2();
    let shift = match parity {
        Parity::Primary => 0.0,
        Parity::Offset => 0.5,
    };
    // p * 2^level is exact; subtracting 1/2 cannot move a value across an
    // integer because the integers adjacent to the result are representable.
    let k = (p[0] * scale - shift).floor() as i64;
    let l = (p[1] * scale - shift).floor() as i64;
    DyadicSquare {
        level,
        parity,
        index: (k, l),
    }
}

/// An axis-aligned square `[x0, x0 + side) x [y0, y0 + side)` with dyadic
/// corners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub x0: Dyadic,
    pub y0: Dyadic,
    pub side: Dyadic,
}

impl Window {
    pub fn new(x0: Dyadic, y0: Dyadic, side: Dyadic) -> Result<Self> {
        if side <= Dyadic::ZERO {
            return Err(Error::InvalidParameter(format!(
                "window side {side} must be positive"
            )));
        }
        Ok(Window { x0, y0, side })
    }

    /// `Q_N = [-N, N]^2`.
    pub fn centered(half_side: Dyadic) -> Self {
        Window {
            x0: -half_side,
            y0: -half_side,
            side: half_side + half_side,
        }
    }

    pub fn q(n: i64) -> Self {
        Window::centered(Dyadic::from_int(n))
    }

    pub fn is_aligned(&self, level: u32) -> bool {
        self.x0.scaled_integer(level).is_some()
            && self.y0.scaled_integer(level).is_some()
            && self.side.scaled_integer(level).is_some()
    }

    pub fn check_aligned(&self, level: u32) -> Result<()> {
        if self.is_aligned(level) {
            Ok(())
        } else {
            Err(Error::Misaligned {
                window: self.to_string(),
                level,
            })
        }
    }

    pub fn area(&self) -> f64 {
        let s = self.side.to_f64();
        s * s
    }

    pub fn bounds_f64(&self) -> [f64; 4] {
        let x0 = self.x0.to_f64();
        let y0 = self.y0.to_f64();
        let s = self.side.to_f64();
        [x0, y0, x0 + s, y0 + s]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [x0, y0, x1, y1] = self.bounds_f64();
        p[0] >= x0 && p[0] < x1 && p[1] >= y0 && p[1] < y1
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.x0 >= self.x0
            && other.y0 >= self.y0
            && other.x0 + other.side <= self.x0 + self.side
            && other.y0 + other.side <= self.y0 + self.side
    }

    pub fn intersection(&self, other: &Window) -> Option<(Dyadic, Dyadic, Dyadic, Dyadic)> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = (self.x0 + self.side).min(other.x0 + other.side);
        let y1 = (self.y0 + self.side).min(other.y0 + other.side);
        (x0 < x1 && y0 < y1).then_some((x0, y0, x1, y1))
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.x0, self.y0, self.side)
    }
}

/// Piecewise-constant density on the primary squares of one level,
/// restricted to a window. Values are dyadic rationals sharing the common
/// denominator `2^denom_exp`.
#[derive(Clone, Debug)]
pub struct CellField {
    level: u32,
    window: Window,
    origin: (i64, i64),
    n: usize,
    denom_exp: u32,
    nums: Vec<i64>,
}

/// Cell counts above this are refused (memory guard).
const MAX_CELLS: usize = 1 << 26;

impl CellField {
    fn layout(level: u32, window: &Window) -> Result<((i64, i64), usize)> {
        window.check_aligned(level)?;
        let kx0 = window.x0.scaled_integer(level).unwrap();
        let ky0 = window.y0.scaled_integer(level).unwrap();
        let n = window.side.scaled_integer(level).unwrap();
        if n <= 0 || (n as u128) * (n as u128) > MAX_CELLS as u128 {
            return Err(Error::InvalidParameter(format!(
                "window {window} at level {level} has an unsupported cell count"
            )));
        }
        Ok(((kx0, ky0), n as usize))
    }

    /// Build from numerators over `2^denom_exp`; `f` receives global cell
    /// indices `(k, l)`.
    pub fn from_fn(
        level: u32,
        window: Window,
        denom_exp: u32,
        mut f: impl FnMut(i64, i64) -> i64,
    ) -> Result<Self> {
        if denom_exp > 60 {
            return Err(Error::InvalidParameter(
                "denominator exponent above 60".into(),
            ));
        }
        let (origin, n) = Self::layout(level, &window)?;
        let one = 1i64 << denom_exp;
        let mut nums = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                let v = f(origin.0 + ix as i64, origin.1 + iy as i64);
                if !(0..=one).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "cell value {v}/2^{denom_exp} outside [0, 1]"
                    )));
                }
                nums.push(v);
            }
        }
        Ok(CellField {
            level,
            window,
            origin,
            n,
            denom_exp,
            nums,
        })
    }

    pub(crate) fn from_parts(
        level: u32,
        window: Window,
        denom_exp: u32,
        nums: Vec<i64>,
    ) -> Result<Self> {
        let (origin, n) = Self::layout(level, &window)?;
        debug_assert_eq!(nums.len(), n * n);
        Ok(CellField {
            level,
            window,
            origin,
            n,
            denom_exp,
            nums,
        })
    }

    pub fn constant(level: u32, window: Window, value: Dyadic) -> Result<Self> {
        if value < Dyadic::ZERO || value > Dyadic::ONE {
            return Err(Error::InvalidParameter(format!(
                "constant {value} outside [0, 1]"
            )));
        }
        let e = value.exponent();
        let v = value.numerator() as i64;
        Self::from_fn(level, window, e, |_, _| v)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Global index of the lower-left cell.
    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn denom_exp(&self) -> u32 {
        self.denom_exp
    }

    pub fn numerators(&self) -> &[i64] {
        &self.nums
    }

    pub(crate) fn numerators_mut(&mut self) -> &mut [i64] {
        &mut self.nums
    }

    pub fn cell_side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Value of the cell with local indices (column `ix`, row `iy`).
    pub fn local(&self, ix: usize, iy: usize) -> Dyadic {
        Dyadic::new(self.nums[iy * self.n + ix] as i128, self.denom_exp)
    }

    /// Value of the cell with global index `(k, l)`, if inside the window.
    pub fn get(&self, k: i64, l: i64) -> Option<Dyadic> {
        let ix = k - self.origin.0;
        let iy = l - self.origin.1;
        let n = self.n as i64;
        ((0..n).contains(&ix) && (0..n).contains(&iy)).then(|| self.local(ix as usize, iy as usize))
    }

    pub fn value_at(&self, p: [f64; 2]) -> Option<Dyadic> {
        let sq = cell_of(p, self.level, Parity::Primary);
        self.get(sq.index.0, sq.index.1)
    }

    /// Floating-point values, row-major from the bottom row.
    pub fn values_f64(&self) -> Vec<f64> {
        let scale = (-(self.denom_exp as f64)).exp2();
        self.nums.iter().map(|&v| v as f64 * scale).collect()
    }

    /// Same function represented on a finer level.
    pub fn refine(&self, level: u32) -> Result<CellField> {
        if level < self.level {
            return Err(Error::InvalidParameter(format!(
                "cannot refine level {} to coarser level {level}",
                self.level
            )));
        }
        let m = 1i64 << (level - self.level);
        let (ox, oy) = self.origin;
        let n = self.n as i64;
        let nums = &self.nums;
        Self::from_fn(level, self.window, self.denom_exp, |k, l| {
            let ix = k.div_euclid(m) - ox;
            let iy = l.div_euclid(m) - oy;
            debug_assert!(ix >= 0 && ix < n && iy >= 0 && iy < n);
            nums[(iy * n + ix) as usize]
        })
    }

    /// `1 - field`.
    pub fn complement(&self) -> CellField {
        let one = 1i64 << self.denom_exp;
        let mut out = self.clone();
        for v in out.nums.iter_mut() {
            *v = one - *v;
        }
        out
    }

    /// Exact means over the primary squares of `target_level`.
    pub fn cell_averages(&self, target_level: u32) -> Result<CellField> {
        if target_level > self.level {
            return Err(Error::InvalidParameter(format!(
                "target level {target_level} finer than field level {}",
                self.level
            )));
        }
        self.window.check_aligned(target_level)?;
        let d = self.level - target_level;
        let m = 1usize << d;
        let denom_exp = self.denom_exp + 2 * d;
        if denom_exp > 60 {
            return Err(Error::InvalidParameter(
                "averaging depth overflows the denominator".into(),
            ));
        }
        let n_coarse = self.n / m;
        let mut sums = vec![0i64; n_coarse * n_coarse];
        for iy in 0..self.n {
            let row = &self.nums[iy * self.n..(iy + 1) * self.n];
            let cy = iy / m;
            for (ix, &v) in row.iter().enumerate() {
                sums[cy * n_coarse + ix / m] += v;
            }
        }
        let mut out = Self::from_parts(target_level, self.window, denom_exp, sums)?;
        out.normalize();
        Ok(out)
    }

    /// Reduce the shared denominator as far as possible.
    pub fn normalize(&mut self) {
        while self.denom_exp > 0 && self.nums.iter().all(|v| v & 1 == 0) {
            for v in self.nums.iter_mut() {
                *v >>= 1;
            }
            self.denom_exp -= 1;
        }
    }

    pub fn normalized(&self) -> CellField {
        let mut c = self.clone();
        c.normalize();
        c
    }

    /// Sorted numerators over the normalized denominator; equal for two
    /// fields related by a permutation of cells.
    pub fn value_multiset(&self) -> (u32, Vec<i64>) {
        let c = self.normalized();
        let mut v = c.nums;
        v.sort_unstable();
        (c.denom_exp, v)
    }

    /// Max and min cell values.
    pub fn range(&self) -> (Dyadic, Dyadic) {
        let lo = self.nums.iter().copied().min().unwrap_or(0);
        let hi = self.nums.iter().copied().max().unwrap_or(0);
        (
            Dyadic::new(lo as i128, self.denom_exp),
            Dyadic::new(hi as i128, self.denom_exp),
        )
    }

    pub fn is_constant(&self, value: Dyadic) -> bool {
        self.nums
            .iter()
            .all(|&v| Dyadic::new(v as i128, self.denom_exp) == value)
    }

    /// Sub-field on a window contained in this one.
    pub fn restrict(&self, window: Window) -> Result<CellField> {
        if !self.window.contains_window(&window) {
            return Err(Error::InvalidParameter(format!(
                "window {window} not inside {}",
                self.window
            )));
        }
        Self::from_fn(self.level, window, self.denom_exp, |k, l| {
            let ix = (k - self.origin.0) as usize;
            let iy = (l - self.origin.1) as usize;
            self.nums[iy * self.n + ix]
        })
    }

    /// Text dump: a header line followed by one line per row of cells,
    /// bottom row first.
    pub fn to_text(&self) -> String {
        let c = self.normalized();
        let mut out = format!("cellfield level={} window={}\n", c.level, c.window);
        for iy in 0..c.n {
            let row: Vec<String> = (0..c.n).map(|ix| c.local(ix, iy).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<CellField> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty document".into(),
        })?;
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let rest = header
            .strip_prefix("cellfield level=")
            .ok_or_else(|| perr(1, "expected `cellfield level=`"))?;
        let (lvl, rest) = rest
            .split_once(" window=")
            .ok_or_else(|| perr(1, "expected ` window=`"))?;
        let level: u32 = lvl.parse().map_err(|_| perr(1, "bad level"))?;
        if level > 50 {
            return Err(perr(1, "level above 50"));
        }
        let parts: Vec<&str> = rest.split(' ').collect();
        if parts.len() != 3 {
            return Err(perr(1, "window needs three dyadic numbers"));
        }
        let num = |s: &str| s.parse::<Dyadic>().map_err(|e| perr(1, &e.to_string()));
        let window = Window::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
            .map_err(|e| perr(1, &e.to_string()))?;
        let (_, n) = Self::layout(level, &window).map_err(|e| perr(1, &e.to_string()))?;
        let mut values: Vec<Dyadic> = Vec::new();
        let mut rows = 0;
        for (i, line) in lines {
            if line.is_empty() && rows == n {
                continue;
            }
            if rows == n {
                return Err(perr(i + 1, "too many rows"));
            }
            let before = values.len();
            for tok in line.split(' ') {
                let v = tok
                    .parse::<Dyadic>()
                    .map_err(|e| perr(i + 1, &e.to_string()))?;
                if v < Dyadic::ZERO || v > Dyadic::ONE {
                    return Err(perr(i + 1, "value outside [0, 1]"));
                }
                values.push(v);
            }
            if values.len() - before != n {
                return Err(perr(i + 1, "wrong number of cells in row"));
            }
            rows += 1;
        }
        if rows != n {
            return Err(perr(rows + 2, "too few rows"));
        }
        let denom_exp = values.iter().map(|v| v.exponent()).max().unwrap_or(0);
        if denom_exp > 60 {
            return Err(perr(1, "denominator exponent above 60"));
        }
        let nums = values
            .iter()
            .map(|v| (v.numerator() << (denom_exp - v.exponent())) as i64)
            .collect();
        Self::from_parts(level, window, denom_exp, nums)
    }
}

impl PartialEq for CellField {
    /// Equal as functions on the same window at the same level.
    fn eq(&self, other: &Self) -> bool {
        if self.level != other.level || self.window != other.window {
            return false;
        }
        let e = self.denom_exp.max(other.denom_exp);
        let sa = e - self.denom_exp;
        let sb = e - other.denom_exp;
        self.nums
            .iter()
            .zip(&other.nums)
            .all(|(&a, &b)| (a << sa) == (b << sb))
    }
}

/// The checkerboard `rho_in(2^level x)`: cell `(k, l)` carries `(k + l) mod 2`.
pub fn checkerboard(level: u32, window: Window) -> Result<CellField> {
    CellField::from_fn(level, window, 0, |k, l| (k + l).rem_euclid(2))
}

/// Pointwise `rho_in(x) = (floor(x1) + floor(x2)) mod 2`.
pub fn rho_in(x: [f64; 2]) -> f64 {
    ((x[0].floor() as i64 + x[1].floor() as i64).rem_euclid(2)) as f64
}
