//! Small convex polygons clipped against axis-aligned half-planes.

/// Convex polygon with at most eight vertices, counterclockwise or clockwise.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Poly {
    pub v: [[f64; 2]; 8],
    pub n: usize,
}

impl Poly {
    pub fn triangle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Poly {
        let mut v = [[0.0; 2]; 8];
        v[0] = a;
        v[1] = b;
        v[2] = c;
        Poly { v, n: 3 }
    }

    /// Keeps the part where `s * x[axis] <= s * bound`.
    pub fn clip(&self, axis: usize, bound: f64, s: f64) -> Poly {
        let mut out = Poly {
            v: [[0.0; 2]; 8],
            n: 0,
        };
        for k in 0..self.n {
            let p = self.v[k];
            let q = self.v[(k + 1) % self.n];
            let (dp, dq) = (s * (p[axis] - bound), s * (q[axis] - bound));
            if dp <= 0.0 {
                out.v[out.n] = p;
                out.n += 1;
            }
            if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
                let r = dp / (dp - dq);
                out.v[out.n] = [p[0] + r * (q[0] - p[0]), p[1] + r * (q[1] - p[1])];
                out.n += 1;
            }
        }
        out
    }

    /// Part inside the box `[x0, x1] x [y0, y1]`.
    pub fn clip_box(&self, b: [f64; 4]) -> Poly {
        self.clip(0, b[2], 1.0)
            .clip(0, b[0], -1.0)
            .clip(1, b[3], 1.0)
            .clip(1, b[1], -1.0)
    }

    /// Area and centroid.
    pub fn area_centroid(&self) -> (f64, [f64; 2]) {
        if self.n < 3 {
            return (0.0, [0.0, 0.0]);
        }
        let mut a2 = 0.0;
        let mut c = [0.0, 0.0];
        for k in 0..self.n {
            let p = self.v[k];
            let q = self.v[(k + 1) % self.n];
            let cross = p[0] * q[1] - q[0] * p[1];
            a2 += cross;
            c[0] += (p[0] + q[0]) * cross;
            c[1] += (p[1] + q[1]) * cross;
        }
        if a2 == 0.0 {
            return (0.0, self.v[0]);
        }
        (0.5 * a2.abs(), [c[0] / (3.0 * a2), c[1] / (3.0 * a2)])
    }
}

/// Parameter range `[s0, s1]` of `p + s (q - p)`, `s` in `[0, 1]`, lying in
/// the open box `b`. `None` if the segment misses it or runs along its edge.
pub(crate) fn clip_segment(p: [f64; 2], q: [f64; 2], b: [f64; 4]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for axis in 0..2 {
        let d = q[axis] - p[axis];
        let (min, max) = (b[axis], b[axis + 2]);
        if d == 0.0 {
            if p[axis] <= min || p[axis] >= max {
                return None;
            }
            continue;
        }
        let (a, c) = ((min - p[axis]) / d, (max - p[axis]) / d);
        lo = lo.max(a.min(c));
        hi = hi.min(a.max(c));
    }
    (lo < hi).then_some((lo, hi))
}
