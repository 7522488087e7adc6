//! The singular vortex field, its dyadic time schedule, truncations and the
//! autonomous lift.
//!
//! The elementary vortex `w` lives on the square `|x|_inf < 1/2`, where it
//! turns counterclockwise along the sup-norm circles at speed `4 r`. The
//! periodized field `u` places a copy of `w` on every unit square centered
//! at a point of `Lambda = {y in Z^2 : y1 + y2 even}`. Stage `n` of the
//! schedule runs `u(2^n x)` for exactly a quarter period.

use std::fmt;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::geometry::rho_in;
use crate::kv;

/// Horizon of the time-dependent field.
pub const HORIZON: i64 = 2;

/// Sup-norm bound of every field built here.
pub const FIELD_BOUND: f64 = 2.0;

/// The elementary vortex. Zero on the tie set `|x1| = |x2|` and outside the
/// open unit square.
#[inline]
pub fn eval_w(x: [f64; 2]) -> [f64; 2] {
    let a1 = x[0].abs();
    let a2 = x[1].abs();
    if a1 < 0.5 && a1 > a2 {
        [0.0, 4.0 * x[0]]
    } else if a2 < 0.5 && a2 > a1 {
        [-4.0 * x[1], 0.0]
    } else {
        [0.0, 0.0]
    }
}

/// Copies of `w` on the scale-`n` cells centered at `2^-n Lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VortexLayout {
    pub scale: u32,
    pub sign: f64,
    /// Half-side `W` of the active square `Q_W`; cells whose centers lie
    /// outside are switched off. Always sits on scale-`n` cell edges.
    pub active_half_side: Option<f64>,
}

impl VortexLayout {
    pub fn new(scale: u32) -> Self {
        VortexLayout {
            scale,
            sign: 1.0,
            active_half_side: None,
        }
    }

    /// Center (in units of `2^-scale`) of the scale cell containing `x`, and
    /// the local coordinates inside it.
    #[inline]
    pub fn locate(&self, x: [f64; 2]) -> ([i64; 2], [f64; 2]) {
        let s = (self.scale as f64).exp2();
        let y = [x[0] * s, x[1] * s];
        let c = [(y[0] + 0.5).floor(), (y[1] + 0.5).floor()];
        ([c[0] as i64, c[1] as i64], [y[0] - c[0], y[1] - c[1]])
    }

    /// Whether the cell with the given center index carries a vortex.
    #[inline]
    pub fn is_filled(&self, c: [i64; 2]) -> bool {
        if (c[0] + c[1]).rem_euclid(2) != 0 {
            return false;
        }
        match self.active_half_side {
            None => true,
            Some(w) => {
                let s = (-(self.scale as f64)).exp2();
                (c[0] as f64 * s).abs() < w && (c[1] as f64 * s).abs() < w
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let (c, y) = self.locate(x);
        if !self.is_filled(c) {
            return [0.0, 0.0];
        }
        let v = eval_w(y);
        [self.sign * v[0], self.sign * v[1]]
    }
}

/// `sign * u(2^n x)` with optional active window.
pub fn eval_u(x: [f64; 2], layout: &VortexLayout) -> [f64; 2] {
    layout.eval(x)
}

/// One dyadic time interval of the schedule.
///
/// Forward stage `n` occupies `(1 - 2^-n, 1 - 2^-n-1)`; its mirror occupies
/// `(1 + 2^-n-1, 1 + 2^-n)` and runs the reversed field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stage {
    pub scale: u32,
    pub mirrored: bool,
}

impl Stage {
    pub fn forward(scale: u32) -> Self {
        Stage {
            scale,
            mirrored: false,
        }
    }

    pub fn mirror(scale: u32) -> Self {
        Stage {
            scale,
            mirrored: true,
        }
    }

    pub fn start(&self) -> Dyadic {
        let n = self.scale as i32;
        if self.mirrored {
            Dyadic::ONE + Dyadic::pow2(-n - 1)
        } else {
            Dyadic::ONE - Dyadic::pow2(-n)
        }
    }

    pub fn end(&self) -> Dyadic {
        let n = self.scale as i32;
        if self.mirrored {
            Dyadic::ONE + Dyadic::pow2(-n)
        } else {
            Dyadic::ONE - Dyadic::pow2(-n - 1)
        }
    }

    /// `2^-n-1`, a quarter of the scale-`n` vortex period.
    pub fn duration(&self) -> Dyadic {
        Dyadic::pow2(-(self.scale as i32) - 1)
    }

    pub fn sign(&self) -> f64 {
        if self.mirrored {
            -1.0
        } else {
            1.0
        }
    }
}

/// Stage active at time `t`, or `None` at stage endpoints and outside
/// `(0, 2)`.
pub fn stage_at(t: f64) -> Option<Stage> {
    if !(t > 0.0 && t < 2.0) || t == 1.0 {
        return None;
    }
    let (s, mirrored) = if t < 1.0 {
        (1.0 - t, false)
    } else {
        (t - 1.0, true)
    };
    // s in (2^e, 2^(e+1)) is forward stage n = -e-1; s in (2^-n-1, 2^-n) is
    // mirrored stage n, i.e. n = -e-1 as well.
    if s < f64::MIN_POSITIVE {
        return None;
    }
    let bits = s.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i32 - 1023;
    if bits & ((1u64 << 52) - 1) == 0 {
        return None;
    }
    let n = -e - 1;
    // forward stage 0 starts at t = 0; 1 - t <= 1 for t > 0 so n >= 0
    if n < 0 {
        return None;
    }
    Some(Stage {
        scale: n as u32,
        mirrored,
    })
}

/// The first `count` forward stages followed by their mirrors, in time
/// order.
pub fn schedule(count: u32) -> Vec<Stage> {
    let mut v: Vec<Stage> = (0..count).map(Stage::forward).collect();
    v.extend((0..count).rev().map(Stage::mirror));
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    /// Zero on `(1 - 2^-2i, 1 + 2^-2i+2)`; selects the constant branch.
    Asymmetric,
    /// Zero on `(1 - 2^-2i, 1 + 2^-2i)`; selects the unmixing branch.
    Symmetric,
}

impl Variant {
    pub fn number(self) -> u32 {
        match self {
            Variant::Asymmetric => 1,
            Variant::Symmetric => 2,
        }
    }

    pub fn from_number(k: u32) -> Result<Variant> {
        match k {
            1 => Ok(Variant::Asymmetric),
            2 => Ok(Variant::Symmetric),
            _ => Err(Error::InvalidParameter(format!(
                "variant must be 1 or 2, got {k}"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimeTruncation {
    pub variant: Variant,
    pub i: u32,
}

impl TimeTruncation {
    /// Open interval on which the truncated field vanishes.
    pub fn zero_interval(&self) -> (Dyadic, Dyadic) {
        let k = 2 * self.i as i32;
        let start = Dyadic::ONE - Dyadic::pow2(-k);
        let end = match self.variant {
            Variant::Asymmetric => Dyadic::ONE + Dyadic::pow2(-k + 2),
            Variant::Symmetric => Dyadic::ONE + Dyadic::pow2(-k),
        };
        (start, end)
    }
}

/// Exactly evaluable description of the divergence-free field: the dyadic
/// schedule with optional zero interval in time and optional spatial
/// truncation to `Q_N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    pub truncation: Option<TimeTruncation>,
    pub space: Option<u32>,
    pub lifted: bool,
}

impl FieldSpec {
    /// The untruncated field `b`.
    pub fn base() -> Self {
        FieldSpec {
            truncation: None,
            space: None,
            lifted: false,
        }
    }

    /// `b` with the zero interval of the given variant; `i >= 1`.
    pub fn truncate_time(&self, i: u32, variant: Variant) -> Result<FieldSpec> {
        if i < 1 {
            return Err(Error::InvalidParameter(
                "truncation index i must be >= 1".into(),
            ));
        }
        if i > 24 {
            return Err(Error::InvalidParameter(
                "truncation index i must be <= 24".into(),
            ));
        }
        Ok(FieldSpec {
            truncation: Some(TimeTruncation { variant, i }),
            ..*self
        })
    }

    /// Switch off vortex cells outside `Q_{N + 2^-n-1}` at scale `n`.
    pub fn truncate_space(&self, n: u32) -> Result<FieldSpec> {
        if n < 1 {
            return Err(Error::InvalidParameter(
                "spatial truncation N must be >= 1".into(),
            ));
        }
        if n > 1 << 20 {
            return Err(Error::InvalidParameter(
                "spatial truncation N too large".into(),
            ));
        }
        Ok(FieldSpec {
            space: Some(n),
            ..*self
        })
    }

    pub fn lift(&self) -> FieldSpec {
        FieldSpec {
            lifted: true,
            ..*self
        }
    }

    pub fn zero_interval(&self) -> Option<(Dyadic, Dyadic)> {
        self.truncation.map(|t| t.zero_interval())
    }

    /// Whether the stage runs (is not inside the zero interval).
    pub fn is_active(&self, stage: Stage) -> bool {
        match self.zero_interval() {
            None => true,
            Some((a, b)) => !(stage.start() >= a && stage.end() <= b),
        }
    }

    /// Stages that run, in time order. Without truncation the schedule is
    /// infinite and only the forward stages below `max_scale` are returned.
    pub fn active_stages(&self, max_scale: u32) -> Vec<Stage> {
        match self.truncation {
            None => (0..max_scale).map(Stage::forward).collect(),
            Some(t) => schedule(2 * t.i)
                .into_iter()
                .filter(|s| self.is_active(*s))
                .collect(),
        }
    }

    /// Half-side of the active square at the given scale.
    pub fn window_half_side(&self, scale: u32) -> Option<Dyadic> {
        self.space
            .map(|n| Dyadic::from_int(n as i64) + Dyadic::pow2(-(scale as i32) - 1))
    }

    pub fn layout(&self, stage: Stage) -> VortexLayout {
        VortexLayout {
            scale: stage.scale,
            sign: stage.sign(),
            active_half_side: self.window_half_side(stage.scale).map(|w| w.to_f64()),
        }
    }

    /// Field at time `t` and point `x`; zero outside `(0, 2)`.
    #[inline]
    pub fn eval(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let Some(stage) = stage_at(t) else {
            return [0.0, 0.0];
        };
        if let Some((a, b)) = self.zero_interval() {
            if t > a.to_f64() && t < b.to_f64() {
                return [0.0, 0.0];
            }
        }
        self.layout(stage).eval(x)
    }

    /// The autonomous lift `(1, b(y0, y1, y2))`.
    pub fn eval_lifted(&self, y: [f64; 3]) -> [f64; 3] {
        let v = self.eval(y[0], [y[1], y[2]]);
        [1.0, v[0], v[1]]
    }

    /// Initial checkerboard, restricted to `Q_N` when spatially truncated.
    pub fn initial_density(&self, x: [f64; 2]) -> f64 {
        match self.space {
            Some(n) => {
                let n = n as f64;
                if x[0] >= -n && x[0] < n && x[1] >= -n && x[1] < n {
                    rho_in(x)
                } else {
                    0.0
                }
            }
            None => rho_in(x),
        }
    }

    /// Lifted initial data: the checkerboard on the slab `-1 <= y0 <= 0`.
    pub fn theta_in(&self, y: [f64; 3]) -> f64 {
        if (-1.0..=0.0).contains(&y[0]) {
            self.initial_density([y[1], y[2]])
        } else {
            0.0
        }
    }

    pub fn to_kv(&self) -> String {
        let (variant, i) = match self.truncation {
            None => ("none".to_string(), "none".to_string()),
            Some(t) => (t.variant.to_string(), t.i.to_string()),
        };
        kv::render(&[
            ("variant", variant),
            ("i", i),
            ("N", self.space.map_or("none".into(), |n| n.to_string())),
            ("lifted", self.lifted.to_string()),
            ("horizon", HORIZON.to_string()),
        ])
    }

    pub fn from_kv(text: &str) -> Result<FieldSpec> {
        let entries = kv::parse(text)?;
        let mut variant: Option<Option<u32>> = None;
        let mut i: Option<Option<u32>> = None;
        let mut space: Option<Option<u32>> = None;
        let mut lifted: Option<bool> = None;
        let mut horizon_seen = false;
        let opt_u32 = |e: &kv::Entry| -> Result<Option<u32>> {
            if e.value == "none" {
                return Ok(None);
            }
            e.value.parse::<u32>().map(Some).map_err(|_| Error::Parse {
                line: e.line,
                msg: format!("`{}` expects an integer or `none`", e.key),
            })
        };
        for e in &entries {
            match e.key.as_str() {
                "variant" => variant = Some(opt_u32(e)?),
                "i" => i = Some(opt_u32(e)?),
                "N" => space = Some(opt_u32(e)?),
                "lifted" => {
                    lifted = Some(match e.value.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => {
                            return Err(Error::Parse {
                                line: e.line,
                                msg: "`lifted` expects true or false".into(),
                            })
                        }
                    })
                }
                "horizon" => {
                    let h: Dyadic = e.value.parse()?;
                    if h != Dyadic::from_int(HORIZON) {
                        return Err(Error::Parse {
                            line: e.line,
                            msg: "only horizon = 2 is supported".into(),
                        });
                    }
                    horizon_seen = true;
                }
                other => {
                    return Err(Error::Parse {
                        line: e.line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 0,
            msg: format!("missing key `{k}`"),
        };
        let variant = variant.ok_or_else(|| missing("variant"))?;
        let i = i.ok_or_else(|| missing("i"))?;
        let space = space.ok_or_else(|| missing("N"))?;
        let lifted = lifted.ok_or_else(|| missing("lifted"))?;
        if !horizon_seen {
            return Err(missing("horizon"));
        }
        let mut spec = FieldSpec::base();
        match (variant, i) {
            (None, None) => {}
            (Some(v), Some(i)) => spec = spec.truncate_time(i, Variant::from_number(v)?)?,
            _ => {
                return Err(Error::InvalidParameter(
                    "`variant` and `i` must both be set or both be none".into(),
                ))
            }
        }
        if let Some(n) = space {
            spec = spec.truncate_space(n)?;
        }
        spec.lifted = lifted;
        Ok(spec)
    }
}
