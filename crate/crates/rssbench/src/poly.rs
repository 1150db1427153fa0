//! Degree-3 polynomials in local time and the root/extremum isolation they
//! admit in closed form.
//!
//! Everything downstream (interval bound checks, clearance minimization,
//! sup-metric evaluation) reduces to questions about cubics on a closed
//! interval, which are answered exactly: critical points come from the
//! quadratic formula, sign changes are bisected on monotone segments.

use serde::{Deserialize, Serialize};

/// Absolute tolerance for root isolation, see the crate-level numeric policy.
pub const ROOT_TOL: f64 = 1e-12;

/// `c[0] + c[1] s + c[2] s^2 + c[3] s^3` in local time `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic {
    pub c: [f64; 4],
}

impl Cubic {
    pub const ZERO: Cubic = Cubic { c: [0.0; 4] };

    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Self {
        Cubic { c: [c0, c1, c2, c3] }
    }

    pub fn constant(v: f64) -> Self {
        Cubic::new(v, 0.0, 0.0, 0.0)
    }

    /// Horner evaluation. All call sites share this exact operation order so
    /// chained-coefficient constructions reproduce bit-identical values.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        ((self.c[3] * s + self.c[2]) * s + self.c[1]) * s + self.c[0]
    }

    /// First derivative value.
    #[inline]
    pub fn d1(&self, s: f64) -> f64 {
        (3.0 * self.c[3] * s + 2.0 * self.c[2]) * s + self.c[1]
    }

    /// Second derivative value.
    #[inline]
    pub fn d2(&self, s: f64) -> f64 {
        6.0 * self.c[3] * s + 2.0 * self.c[2]
    }

    pub fn derivative(&self) -> Cubic {
        Cubic::new(self.c[1], 2.0 * self.c[2], 3.0 * self.c[3], 0.0)
    }

    /// Taylor shift: returns `q` with `q(s) = self(tau + s)`.
    pub fn rebase(&self, tau: f64) -> Cubic {
        let [c0, c1, c2, c3] = self.c;
        Cubic::new(
            ((c3 * tau + c2) * tau + c1) * tau + c0,
            (3.0 * c3 * tau + 2.0 * c2) * tau + c1,
            3.0 * c3 * tau + c2,
            c3,
        )
    }

    pub fn add(&self, other: &Cubic) -> Cubic {
        Cubic::new(
            self.c[0] + other.c[0],
            self.c[1] + other.c[1],
            self.c[2] + other.c[2],
            self.c[3] + other.c[3],
        )
    }

    pub fn sub(&self, other: &Cubic) -> Cubic {
        Cubic::new(
            self.c[0] - other.c[0],
            self.c[1] - other.c[1],
            self.c[2] - other.c[2],
            self.c[3] - other.c[3],
        )
    }

    pub fn neg(&self) -> Cubic {
        Cubic::new(-self.c[0], -self.c[1], -self.c[2], -self.c[3])
    }

    pub fn offset(&self, dv: f64) -> Cubic {
        Cubic::new(self.c[0] + dv, self.c[1], self.c[2], self.c[3])
    }
}

/// Multiplies a quadratic (given as `a0 + a1 s + a2 s^2`) by a linear
/// (`b0 + b1 s`). The product is the cubic `v * a` needed by the lateral
/// braking-direction check.
pub fn quad_times_linear(a0: f64, a1: f64, a2: f64, b0: f64, b1: f64) -> Cubic {
    Cubic::new(a0 * b0, a0 * b1 + a1 * b0, a1 * b1 + a2 * b0, a2 * b1)
}

/// Real roots of `a s^2 + b s + c` inside `[lo, hi]`, ascending.
pub fn quadratic_roots_in(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if a == 0.0 {
        if b != 0.0 {
            let r = -c / b;
            if r >= lo && r <= hi {
                out.push(r);
            }
        }
        return out;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return out;
    }
    let sq = disc.sqrt();
    // Citardauq pairing avoids cancellation for the small root.
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if b == 0.0 {
        let r = (disc.sqrt() / (2.0 * a)).abs();
        (-r, r)
    } else {
        (q / a, if q != 0.0 { c / q } else { -b / a - q / a })
    };
    let (mut r1, mut r2) = (r1, r2);
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if r1 >= lo && r1 <= hi {
        out.push(r1);
    }
    if r2 >= lo && r2 <= hi && (out.is_empty() || (r2 - out[0]).abs() > ROOT_TOL) {
        out.push(r2);
    }
    out
}

/// Critical points of a cubic (roots of its derivative) inside `[lo, hi]`.
pub fn critical_points_in(p: &Cubic, lo: f64, hi: f64) -> Vec<f64> {
    quadratic_roots_in(3.0 * p.c[3], 2.0 * p.c[2], p.c[1], lo, hi)
}

/// All roots of `p` in `[lo, hi]`, isolated by splitting at critical points
/// and bisecting each monotone segment with a sign change.
pub fn roots_in(p: &Cubic, lo: f64, hi: f64) -> Vec<f64> {
    debug_assert!(lo <= hi);
    let mut pts = vec![lo];
    for c in critical_points_in(p, lo, hi) {
        if c > lo && c < hi {
            pts.push(c);
        }
    }
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out: Vec<f64> = Vec::new();
    let mut push = |r: f64, out: &mut Vec<f64>| {
        if out.last().map_or(true, |&last| (r - last).abs() > ROOT_TOL) {
            out.push(r);
        }
    };
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (p.eval(a), p.eval(b));
        if fa == 0.0 {
            push(a, &mut out);
        }
        if fa * fb < 0.0 {
            push(bisect(p, a, b), &mut out);
        }
        if fb == 0.0 && (b - hi).abs() < f64::EPSILON {
            push(b, &mut out);
        }
    }
    out
}

fn bisect(p: &Cubic, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = p.eval(lo);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = p.eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Exact minimum of `p` over `[lo, hi]`: endpoints plus interior critical
/// points. Returns `(argmin, min)`.
pub fn min_on(p: &Cubic, lo: f64, hi: f64) -> (f64, f64) {
    let mut best = (lo, p.eval(lo));
    let ev = p.eval(hi);
    if ev < best.1 {
        best = (hi, ev);
    }
    for s in critical_points_in(p, lo, hi) {
        let v = p.eval(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    best
}

pub fn max_on(p: &Cubic, lo: f64, hi: f64) -> (f64, f64) {
    let (s, v) = min_on(&p.neg(), lo, hi);
    (s, -v)
}

/// Maximum of `|p|` over `[lo, hi]`.
pub fn max_abs_on(p: &Cubic, lo: f64, hi: f64) -> f64 {
    let (_, mn) = min_on(p, lo, hi);
    let (_, mx) = max_on(p, lo, hi);
    mn.abs().max(mx.abs())
}

/// Exact minimum over `[lo, hi]` of the quadratic `A + B s + C s^2`.
/// Used for the longitudinal-velocity sign check, where the verdict must not
/// depend on sampling.
pub fn quadratic_min_on(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> (f64, f64) {
    let mut best = (lo, (c * lo + b) * lo + a);
    let vhi = (c * hi + b) * hi + a;
    if vhi < best.1 {
        best = (hi, vhi);
    }
    if c > 0.0 {
        let s = -b / (2.0 * c);
        if s > lo && s < hi {
            let v = (c * s + b) * s + a;
            if v < best.1 {
                best = (s, v);
            }
        }
    }
    best
}

/// Maximal sub-intervals of `[lo, hi]` where `p > 0`, together with the
/// supremum of `p` on each. Intervals whose supremum does not exceed
/// `min_excess` are dropped; that absolute floor is the documented numeric
/// tolerance for event detection.
pub fn positive_intervals(p: &Cubic, lo: f64, hi: f64, min_excess: f64) -> Vec<(f64, f64, f64)> {
    if hi <= lo {
        return Vec::new();
    }
    let mut bps = vec![lo];
    bps.extend(roots_in(p, lo, hi).into_iter().filter(|&r| r > lo && r < hi));
    bps.push(hi);
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        if p.eval(0.5 * (a + b)) > 0.0 {
            let (_, sup) = max_on(p, a, b);
            match out.last_mut() {
                Some(last) if (a - last.1).abs() <= ROOT_TOL => {
                    last.1 = b;
                    last.2 = last.2.max(sup);
                }
                _ => out.push((a, b, sup)),
            }
        }
    }
    out.retain(|&(_, _, sup)| sup > min_excess);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivatives() {
        let p = Cubic::new(1.0, -2.0, 3.0, 0.5);
        let s = 1.7;
        assert!((p.eval(s) - (1.0 - 2.0 * s + 3.0 * s * s + 0.5 * s * s * s)).abs() < 1e-12);
        assert!((p.d1(s) - (-2.0 + 6.0 * s + 1.5 * s * s)).abs() < 1e-12);
        assert!((p.d2(s) - (6.0 + 3.0 * s)).abs() < 1e-12);
    }

    #[test]
    fn rebase_matches_direct_eval() {
        let p = Cubic::new(0.3, 1.1, -0.7, 0.25);
        let q = p.rebase(2.5);
        for i in 0..20 {
            let s = i as f64 * 0.17;
            assert!((q.eval(s) - p.eval(2.5 + s)).abs() < 1e-9 * (1.0 + p.eval(2.5 + s).abs()));
        }
    }

    #[test]
    fn cubic_roots_known() {
        // (s-1)(s-2)(s-3) = s^3 - 6s^2 + 11s - 6
        let p = Cubic::new(-6.0, 11.0, -6.0, 1.0);
        let rs = roots_in(&p, 0.0, 4.0);
        assert_eq!(rs.len(), 3);
        for (r, want) in rs.iter().zip([1.0, 2.0, 3.0]) {
            assert!((r - want).abs() < 1e-9, "root {r} vs {want}");
        }
    }

    #[test]
    fn min_max_on_interval() {
        // s^2 - 2s on [0,3]: min -1 at 1, max 3 at 3
        let p = Cubic::new(0.0, -2.0, 1.0, 0.0);
        let (am, m) = min_on(&p, 0.0, 3.0);
        assert!((am - 1.0).abs() < 1e-9 && (m + 1.0).abs() < 1e-12);
        let (ax, x) = max_on(&p, 0.0, 3.0);
        assert!((ax - 3.0).abs() < 1e-12 && (x - 3.0).abs() < 1e-12);
    }

    #[test]
    fn positive_intervals_of_parabola() {
        // -(s-1)(s-2) > 0 on (1,2)
        let p = Cubic::new(-2.0, 3.0, -1.0, 0.0);
        let iv = positive_intervals(&p, 0.0, 4.0, 0.0);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 - 1.0).abs() < 1e-9 && (iv[0].1 - 2.0).abs() < 1e-9);
        assert!((iv[0].2 - 0.25).abs() < 1e-9);
    }

    #[test]
    fn positive_intervals_drops_slivers() {
        let p = Cubic::new(1e-30, 0.0, 0.0, 0.0);
        assert!(positive_intervals(&p, 0.0, 1.0, 1e-9).is_empty());
        assert_eq!(positive_intervals(&p, 0.0, 1.0, 0.0).len(), 1);
    }

    #[test]
    fn zero_polynomial_has_no_positive_region() {
        assert!(positive_intervals(&Cubic::ZERO, 0.0, 5.0, 0.0).is_empty());
    }
}
