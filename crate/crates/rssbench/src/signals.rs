//! Position, velocity, acceleration, and delay signals with exact
//! piecewise-polynomial semantics.
//!
//! A car track stores per-axis piecewise cubics over a shared knot grid, so
//! acceleration is continuous piecewise-linear, velocity is C^1 piecewise
//! quadratic, and position is C^2. Continuity at interior knots holds by
//! construction: every builder chains each piece's low-order coefficients
//! from the previous piece's end values, and the validator recomputes the
//! same expressions, so the residuals it reports are exactly zero for traces
//! built through those paths.
//!
//! Delay signals assign to each ordered car pair an observation timestamp
//! `tau(t)` within the band `[max(0, t - rho), t]`.

use crate::error::{Error, Result};
use crate::poly::{self, Cubic};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Index of a car within a fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CarId(pub usize);

impl std::fmt::Display for CarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "car{}", self.0)
    }
}

/// Road axes: `x` is lateral, `y` is longitudinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn axis(&self, a: Axis) -> f64 {
        match a {
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }

    /// Chebyshev magnitude, the per-point distance used throughout.
    pub fn linf(&self) -> f64 {
        self.x.abs().max(self.y.abs())
    }
}

/// Position with its first two derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
}

/// A scalar signal on `[0, horizon]` made of degree-<=3 pieces in local time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    knots: Vec<f64>,
    pieces: Vec<Cubic>,
}

impl PiecewisePoly {
    /// Builds from raw knots and pieces, checking structure only (strictly
    /// increasing knots from 0, one piece per interval). Continuity of the
    /// pieces is the validator's concern, not a construction precondition.
    pub fn from_raw(knots: Vec<f64>, pieces: Vec<Cubic>) -> Result<Self> {
        if knots.len() < 2 || pieces.len() + 1 != knots.len() {
            return Err(Error::domain(format!(
                "knot/piece count mismatch: {} knots, {} pieces",
                knots.len(),
                pieces.len()
            )));
        }
        if knots[0] != 0.0 {
            return Err(Error::domain("knot grid must start at 0"));
        }
        for w in knots.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::domain(format!(
                    "knots must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(PiecewisePoly { knots, pieces })
    }

    pub fn constant(value: f64, horizon: f64) -> Self {
        PiecewisePoly {
            knots: vec![0.0, horizon],
            pieces: vec![Cubic::constant(value)],
        }
    }

    /// Single polynomial piece over the whole horizon.
    pub fn single(piece: Cubic, horizon: f64) -> Self {
        PiecewisePoly {
            knots: vec![0.0, horizon],
            pieces: vec![piece],
        }
    }

    /// C^2 chained construction from an initial state and per-piece
    /// `(duration, jerk)` segments. Piece `i` has `c3 = jerk/6` and its low
    /// coefficients are the previous piece's end values.
    pub fn from_jerk_segments(p0: f64, v0: f64, a0: f64, segments: &[(f64, f64)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain("at least one segment required"));
        }
        let mut b = ChainBuilder::new(p0, v0, a0);
        for &(dt, jerk) in segments {
            if !(dt > 0.0) {
                return Err(Error::domain("segment durations must be positive"));
            }
            b.push_jerk(dt, jerk);
        }
        Ok(b.finish())
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Cubic] {
        &self.pieces
    }

    /// Piece index and local time for `t` in `[0, horizon]`. Interior knots
    /// resolve to the piece starting there; both candidates agree on C^2
    /// signals.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !(t >= 0.0) || t > self.horizon() {
            return Err(Error::domain(format!(
                "time {t} outside horizon [0, {}]",
                self.horizon()
            )));
        }
        let idx = match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.pieces.len() - 1),
            Err(i) => i - 1,
        };
        Ok((idx, t - self.knots[idx]))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (i, s) = self.locate(t)?;
        Ok(self.pieces[i].eval(s))
    }

    pub fn eval_d1(&self, t: f64) -> Result<f64> {
        let (i, s) = self.locate(t)?;
        Ok(self.pieces[i].d1(s))
    }

    pub fn eval_d2(&self, t: f64) -> Result<f64> {
        let (i, s) = self.locate(t)?;
        Ok(self.pieces[i].d2(s))
    }

    /// Residuals `[value, d1, d2]` across each interior knot, evaluated with
    /// the same Horner path the builders use.
    pub fn c2_residuals(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.pieces.len().saturating_sub(1));
        for i in 0..self.pieces.len() - 1 {
            let w = self.knots[i + 1] - self.knots[i];
            let a = &self.pieces[i];
            let b = &self.pieces[i + 1];
            out.push([
                a.eval(w) - b.c[0],
                a.d1(w) - b.c[1],
                a.d2(w) - 2.0 * b.c[2],
            ]);
        }
        out
    }

    /// Translates the signal by a constant.
    pub fn offset(&self, dv: f64) -> Self {
        PiecewisePoly {
            knots: self.knots.clone(),
            pieces: self.pieces.iter().map(|p| p.offset(dv)).collect(),
        }
    }

    /// Pointwise sum over the merged knot grid, re-chained so interior
    /// continuity stays exact.
    pub fn add(&self, other: &PiecewisePoly) -> Result<Self> {
        if (self.horizon() - other.horizon()).abs() > 0.0 {
            return Err(Error::domain("mismatched horizons in signal sum"));
        }
        let grid = merge_knots(&self.knots, &other.knots);
        let mut b = ChainBuilder::new(
            self.pieces[0].c[0] + other.pieces[0].c[0],
            self.pieces[0].c[1] + other.pieces[0].c[1],
            2.0 * (self.pieces[0].c[2] + other.pieces[0].c[2]),
        );
        for w in grid.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let pa = self.rebased_piece(t0)?;
            let pb = other.rebased_piece(t0)?;
            b.push_c3(t1 - t0, pa.c[3] + pb.c[3]);
        }
        Ok(b.finish())
    }

    /// The piece covering `t`, rebased so local time 0 is at `t`.
    fn rebased_piece(&self, t: f64) -> Result<Cubic> {
        let (i, s) = self.locate(t)?;
        Ok(self.pieces[i].rebase(s))
    }
}

/// Incremental C^2 builder: each pushed piece chains position, velocity and
/// acceleration from the previous end state.
pub(crate) struct ChainBuilder {
    knots: Vec<f64>,
    pieces: Vec<Cubic>,
    pos: f64,
    vel: f64,
    acc: f64,
}

impl ChainBuilder {
    pub fn new(pos: f64, vel: f64, acc: f64) -> Self {
        ChainBuilder {
            knots: vec![0.0],
            pieces: Vec::new(),
            pos,
            vel,
            acc,
        }
    }

    pub fn state(&self) -> (f64, f64, f64) {
        (self.pos, self.vel, self.acc)
    }

    pub fn time(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn push_jerk(&mut self, dt: f64, jerk: f64) {
        self.push_piece(dt, jerk / 6.0);
    }

    pub fn push_c3(&mut self, dt: f64, c3: f64) {
        self.push_piece(dt, c3);
    }

    /// Pushes a piece ending with the given acceleration (linear ramp).
    pub fn push_ramp(&mut self, dt: f64, a_end: f64) {
        self.push_piece(dt, (a_end - self.acc) / (6.0 * dt));
    }

    /// Pushes an explicit piece, overriding the chained c3 (used by the
    /// stop-landing tuner). c0..c2 still chain.
    pub fn push_piece(&mut self, dt: f64, c3: f64) {
        let piece = Cubic::new(self.pos, self.vel, self.acc / 2.0, c3);
        self.pos = piece.eval(dt);
        self.vel = piece.d1(dt);
        self.acc = piece.d2(dt);
        let t = self.time() + dt;
        self.knots.push(t);
        self.pieces.push(piece);
    }

    pub fn finish(self) -> PiecewisePoly {
        PiecewisePoly {
            knots: self.knots,
            pieces: self.pieces,
        }
    }
}

pub(crate) fn merge_knots(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup_by(|x, y| (*x - *y).abs() <= 0.0);
    grid
}

/// One car's motion: lateral and longitudinal position signals over a shared
/// knot grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarTrack {
    x: PiecewisePoly,
    y: PiecewisePoly,
}

impl CarTrack {
    pub fn new(x: PiecewisePoly, y: PiecewisePoly) -> Result<Self> {
        if x.knots() != y.knots() {
            return Err(Error::domain("car track axes must share the knot grid"));
        }
        Ok(CarTrack { x, y })
    }

    /// Stationary car.
    pub fn parked(x: f64, y: f64, horizon: f64) -> Self {
        CarTrack {
            x: PiecewisePoly::constant(x, horizon),
            y: PiecewisePoly::constant(y, horizon),
        }
    }

    /// Constant-velocity car.
    pub fn cruising(pos: Vec2, vel: Vec2, horizon: f64) -> Self {
        CarTrack {
            x: PiecewisePoly::single(Cubic::new(pos.x, vel.x, 0.0, 0.0), horizon),
            y: PiecewisePoly::single(Cubic::new(pos.y, vel.y, 0.0, 0.0), horizon),
        }
    }

    pub fn axis(&self, a: Axis) -> &PiecewisePoly {
        match a {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.y.horizon()
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        CarTrack {
            x: self.x.offset(dx),
            y: self.y.offset(dy),
        }
    }
}

/// Fleet of car tracks over a common finite horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTrace {
    cars: Vec<CarTrack>,
    horizon: f64,
}

impl FleetTrace {
    pub fn new(cars: Vec<CarTrack>) -> Result<Self> {
        if cars.is_empty() {
            return Err(Error::domain("fleet must contain at least one car"));
        }
        let horizon = cars[0].horizon();
        for (i, c) in cars.iter().enumerate() {
            if (c.horizon() - horizon).abs() > 0.0 {
                return Err(Error::domain(format!(
                    "car {i} horizon {} does not match fleet horizon {horizon}",
                    c.horizon()
                )));
            }
        }
        Ok(FleetTrace { cars, horizon })
    }

    pub fn n_cars(&self) -> usize {
        self.cars.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn car(&self, c: CarId) -> &CarTrack {
        &self.cars[c.0]
    }

    pub fn cars(&self) -> &[CarTrack] {
        &self.cars
    }

    pub fn check_car(&self, c: CarId) -> Result<()> {
        if c.0 >= self.cars.len() {
            return Err(Error::domain(format!(
                "{c} outside fleet of {} cars",
                self.cars.len()
            )));
        }
        Ok(())
    }

    /// Exact position and first two derivatives of car `c` at `t`.
    pub fn eval_kinematics(&self, t: f64, c: CarId) -> Result<KinematicState> {
        self.check_car(c)?;
        let track = self.car(c);
        let (xi, xs) = track.x.locate(t)?;
        let (yi, ys) = track.y.locate(t)?;
        let px = &track.x.pieces()[xi];
        let py = &track.y.pieces()[yi];
        Ok(KinematicState {
            pos: Vec2::new(px.eval(xs), py.eval(ys)),
            vel: Vec2::new(px.d1(xs), py.d1(ys)),
            acc: Vec2::new(px.d2(xs), py.d2(ys)),
        })
    }

    /// Returns a copy with car `c` translated by a constant offset. The sup
    /// distance to the original is `max(|dx|, |dy|)` and derivatives are
    /// untouched.
    pub fn shift_track(&self, c: CarId, dx: f64, dy: f64) -> Result<FleetTrace> {
        self.check_car(c)?;
        let mut cars = self.cars.clone();
        cars[c.0] = cars[c.0].shifted(dx, dy);
        Ok(FleetTrace {
            cars,
            horizon: self.horizon,
        })
    }

    /// Sup over time of the max over cars and axes of the coordinate
    /// difference, evaluated exactly per polynomial-difference piece.
    pub fn sup_metric(&self, other: &FleetTrace) -> Result<f64> {
        if self.n_cars() != other.n_cars() {
            return Err(Error::domain("sup metric requires equal fleet sizes"));
        }
        if (self.horizon - other.horizon).abs() > 0.0 {
            return Err(Error::domain("sup metric requires equal horizons"));
        }
        let mut sup: f64 = 0.0;
        for (a, b) in self.cars.iter().zip(&other.cars) {
            for axis in [Axis::X, Axis::Y] {
                let pa = a.axis(axis);
                let pb = b.axis(axis);
                let grid = merge_knots(pa.knots(), pb.knots());
                for w in grid.windows(2) {
                    let diff = pa.rebased_piece(w[0])?.sub(&pb.rebased_piece(w[0])?);
                    sup = sup.max(poly::max_abs_on(&diff, 0.0, w[1] - w[0]));
                }
            }
        }
        Ok(sup)
    }

    /// Structural and semantic validation: C^2 residuals at knots (must be
    /// exactly zero), per-piece exact minimum of the longitudinal velocity
    /// (must be >= 0), and horizon consistency.
    pub fn validate(&self) -> ValidationReport {
        let mut cars = Vec::with_capacity(self.cars.len());
        for (i, car) in self.cars.iter().enumerate() {
            let mut continuity_defects = Vec::new();
            for axis in [Axis::X, Axis::Y] {
                let p = car.axis(axis);
                for (k, r) in p.c2_residuals().iter().enumerate() {
                    if r.iter().any(|&v| v != 0.0) {
                        continuity_defects.push(ContinuityDefect {
                            axis,
                            knot: p.knots()[k + 1],
                            residual: *r,
                        });
                    }
                }
            }
            let mut vy_violations = Vec::new();
            let mut vy_min = f64::INFINITY;
            let y = car.axis(Axis::Y);
            for (pi, piece) in y.pieces().iter().enumerate() {
                let w = y.knots()[pi + 1] - y.knots()[pi];
                let (_, m) = poly::quadratic_min_on(
                    piece.c[1],
                    2.0 * piece.c[2],
                    3.0 * piece.c[3],
                    0.0,
                    w,
                );
                vy_min = vy_min.min(m);
                if m < 0.0 {
                    // Report the sub-intervals where vy < 0 in trace time.
                    let neg_vel = Cubic::new(-piece.c[1], -2.0 * piece.c[2], -3.0 * piece.c[3], 0.0);
                    for (a, b, _) in poly::positive_intervals(&neg_vel, 0.0, w, 0.0) {
                        vy_violations.push((y.knots()[pi] + a, y.knots()[pi] + b));
                    }
                }
            }
            merge_adjacent(&mut vy_violations);
            let horizon_ok = (car.horizon() - self.horizon).abs() == 0.0;
            cars.push(CarValidation {
                car: CarId(i),
                continuity_defects,
                vy_min,
                vy_violations,
                horizon_ok,
            });
        }
        let valid = cars.iter().all(|c| {
            c.continuity_defects.is_empty() && c.vy_min >= 0.0 && c.horizon_ok
        });
        ValidationReport { valid, cars }
    }
}

fn merge_adjacent(iv: &mut Vec<(f64, f64)>) {
    iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for &(a, b) in iv.iter() {
        match out.last_mut() {
            Some(last) if a - last.1 <= poly::ROOT_TOL => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    *iv = out;
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityDefect {
    pub axis: Axis,
    pub knot: f64,
    pub residual: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct CarValidation {
    pub car: CarId,
    pub continuity_defects: Vec<ContinuityDefect>,
    pub vy_min: f64,
    pub vy_violations: Vec<(f64, f64)>,
    pub horizon_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub cars: Vec<CarValidation>,
}

/// Per-ordered-pair observation timestamps with bounded staleness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySignal {
    n_cars: usize,
    rho: f64,
    horizon: f64,
    /// Row-major `n_cars * n_cars` table indexed by `(observer, observed)`.
    fns: Vec<DelayFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DelayFn {
    /// `tau(t) = t`.
    Zero,
    /// `tau(t) = max(0, t - lag)`.
    ConstantLag { lag: f64 },
    /// `tau(t) = max(0, floor((t - phase) / period) * period + phase)`.
    ZeroOrderHold { period: f64, phase: f64 },
    /// Piecewise-linear interpolation of in-band samples; linearity keeps the
    /// interpolant inside the band because the upper bound is linear and the
    /// lower bound convex.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl DelayFn {
    fn eval(&self, t: f64) -> f64 {
        match self {
            DelayFn::Zero => t,
            DelayFn::ConstantLag { lag } => (t - lag).max(0.0),
            DelayFn::ZeroOrderHold { period, phase } => {
                (((t - phase) / period).floor() * period + phase).max(0.0)
            }
            DelayFn::PiecewiseLinear { points } => {
                match points.binary_search_by(|(pt, _)| pt.partial_cmp(&t).unwrap()) {
                    Ok(i) => points[i].1,
                    Err(0) => points[0].1,
                    Err(i) if i == points.len() => points[i - 1].1,
                    Err(i) => {
                        let (t0, v0) = points[i - 1];
                        let (t1, v1) = points[i];
                        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
                    }
                }
            }
        }
    }
}

impl DelaySignal {
    /// No staleness anywhere.
    pub fn zero(n_cars: usize, rho: f64, horizon: f64) -> Self {
        DelaySignal {
            n_cars,
            rho,
            horizon,
            fns: vec![DelayFn::Zero; n_cars * n_cars],
        }
    }

    /// Every observation is `lag` seconds old (clipped at 0).
    pub fn constant_lag(n_cars: usize, lag: f64, rho: f64, horizon: f64) -> Result<Self> {
        if lag < 0.0 || lag > rho {
            return Err(Error::config(format!("constant lag {lag} outside [0, rho={rho}]")));
        }
        Ok(DelaySignal {
            n_cars,
            rho,
            horizon,
            fns: vec![DelayFn::ConstantLag { lag }; n_cars * n_cars],
        })
    }

    /// Sample-and-hold observations at the given period.
    pub fn zero_order_hold(
        n_cars: usize,
        period: f64,
        phase: f64,
        rho: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(period > 0.0) || period > rho {
            return Err(Error::config(format!("zoh period {period} outside (0, rho={rho}]")));
        }
        Ok(DelaySignal {
            n_cars,
            rho,
            horizon,
            fns: vec![DelayFn::ZeroOrderHold { period, phase }; n_cars * n_cars],
        })
    }

    /// Seeded random piecewise-linear delays within the band, differing per
    /// ordered pair.
    pub fn random_band(n_cars: usize, rho: f64, horizon: f64, seed: u64) -> Self {
        if rho == 0.0 {
            return DelaySignal::zero(n_cars, rho, horizon);
        }
        let step = (rho * 0.5).min(horizon / 8.0).max(1e-3);
        let fns = (0..n_cars * n_cars)
            .map(|pair| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(pair as u64 + 1)));
                let mut points = vec![(0.0, 0.0)];
                let mut t = step;
                while t < horizon + step {
                    let tk = t.min(horizon);
                    let lo = (tk - rho).max(0.0);
                    points.push((tk, rng.gen_range(lo..=tk)));
                    if tk >= horizon {
                        break;
                    }
                    t += step;
                }
                DelayFn::PiecewiseLinear { points }
            })
            .collect();
        DelaySignal {
            n_cars,
            rho,
            horizon,
            fns,
        }
    }

    pub fn n_cars(&self) -> usize {
        self.n_cars
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `tau(t, c1, c2)`: the timestamp at which `c1`'s view of `c2` was
    /// taken. The self pair `c1 == c2` is legal and models stale
    /// self-observation. The result is clamped into the admissible band.
    pub fn eval(&self, t: f64, c1: CarId, c2: CarId) -> Result<f64> {
        if c1.0 >= self.n_cars || c2.0 >= self.n_cars {
            return Err(Error::domain(format!(
                "pair ({c1}, {c2}) outside fleet of {}",
                self.n_cars
            )));
        }
        if !(t >= 0.0) || t > self.horizon {
            return Err(Error::domain(format!(
                "time {t} outside horizon [0, {}]",
                self.horizon
            )));
        }
        let raw = self.fns[c1.0 * self.n_cars + c2.0].eval(t);
        Ok(raw.clamp((t - self.rho).max(0.0), t))
    }

    /// Short human-readable description, used in evidence listings.
    pub fn describe(&self) -> String {
        match &self.fns[0] {
            DelayFn::Zero => "zero".into(),
            DelayFn::ConstantLag { lag } => format!("constant-lag({lag})"),
            DelayFn::ZeroOrderHold { period, phase } => format!("zoh({period}, phase={phase})"),
            DelayFn::PiecewiseLinear { .. } => "random-band".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quadratic_track(horizon: f64) -> CarTrack {
        // y(t) = t^2, x(t) = 5
        CarTrack::new(
            PiecewisePoly::constant(5.0, horizon),
            PiecewisePoly::single(Cubic::new(0.0, 0.0, 1.0, 0.0), horizon),
        )
        .unwrap()
    }

    #[test]
    fn monomial_kinematics() {
        let trace = FleetTrace::new(vec![quadratic_track(4.0)]).unwrap();
        let k = trace.eval_kinematics(2.0, CarId(0)).unwrap();
        assert_eq!(k.pos.y, 4.0);
        assert_eq!(k.vel.y, 4.0);
        assert_eq!(k.acc.y, 2.0);
        assert_eq!(k.vel.x, 0.0);
        assert_eq!(k.acc.x, 0.0);
    }

    #[test]
    fn out_of_horizon_is_domain_error() {
        let trace = FleetTrace::new(vec![quadratic_track(4.0)]).unwrap();
        assert!(trace.eval_kinematics(4.5, CarId(0)).is_err());
        assert!(trace.eval_kinematics(-0.1, CarId(0)).is_err());
        assert!(trace.eval_kinematics(4.0, CarId(0)).is_ok());
    }

    #[test]
    fn chained_builder_is_c2_exact() {
        let p = PiecewisePoly::from_jerk_segments(
            1.0,
            2.0,
            -0.5,
            &[(0.5, 3.0), (0.7, -6.0), (0.3, 1.0), (1.5, 0.0)],
        )
        .unwrap();
        for r in p.c2_residuals() {
            assert_eq!(r, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn finite_difference_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let segs: Vec<(f64, f64)> = (0..12)
            .map(|_| (rng.gen_range(0.2..0.8), rng.gen_range(-4.0..4.0)))
            .collect();
        let p = PiecewisePoly::from_jerk_segments(0.0, 3.0, 0.1, &segs).unwrap();
        let h = 1e-5;
        let horizon = p.horizon();
        for _ in 0..100 {
            let t = rng.gen_range(2.0 * h..horizon - 2.0 * h);
            // Stay away from knots so the central difference spans one piece.
            if p.knots().iter().any(|k| (k - t).abs() < 2.0 * h) {
                continue;
            }
            let fd = (p.eval(t + h).unwrap() - p.eval(t - h).unwrap()) / (2.0 * h);
            let an = p.eval_d1(t).unwrap();
            assert!(
                (an - fd).abs() <= 1e-6 * (1.0 + an.abs()),
                "t={t}: analytic {an} vs fd {fd}"
            );
        }
    }

    #[test]
    fn validator_accepts_stationary_fleet() {
        let trace = FleetTrace::new(vec![
            CarTrack::parked(0.0, 0.0, 2.0),
            CarTrack::parked(3.0, 10.0, 2.0),
        ])
        .unwrap();
        let rep = trace.validate();
        assert!(rep.valid);
    }

    #[test]
    fn validator_reports_negative_vy_interval() {
        // vy(t) = 1 - t on [0,2]: violation on (1, 2]
        let y = PiecewisePoly::single(Cubic::new(0.0, 1.0, -0.5, 0.0), 2.0);
        let x = PiecewisePoly::constant(0.0, 2.0);
        let trace = FleetTrace::new(vec![CarTrack::new(x, y).unwrap()]).unwrap();
        let rep = trace.validate();
        assert!(!rep.valid);
        let viol = &rep.cars[0].vy_violations;
        assert_eq!(viol.len(), 1);
        assert!((viol[0].0 - 1.0).abs() < 1e-9);
        assert!((viol[0].1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sup_metric_constant_offset() {
        let a = FleetTrace::new(vec![quadratic_track(4.0), CarTrack::parked(1.0, 8.0, 4.0)]).unwrap();
        let b = a.shift_track(CarId(0), 0.7, 0.0).unwrap();
        assert_eq!(a.sup_metric(&a).unwrap(), 0.0);
        assert!((a.sup_metric(&b).unwrap() - 0.7).abs() < 1e-12);
        assert!((b.sup_metric(&a).unwrap() - 0.7).abs() < 1e-12);
        // Shifting preserves validity.
        assert!(b.validate().valid);
    }

    #[test]
    fn sup_metric_dominates_grid_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let mk = |rng: &mut ChaCha8Rng| {
                let segs: Vec<(f64, f64)> = (0..6)
                    .map(|_| (rng.gen_range(0.5..1.5), rng.gen_range(-2.0..2.0)))
                    .collect();
                let total: f64 = segs.iter().map(|s| s.0).sum();
                let y = PiecewisePoly::from_jerk_segments(0.0, 5.0, 0.0, &segs).unwrap();
                let x = PiecewisePoly::constant(rng.gen_range(-1.0..1.0), total);
                FleetTrace::new(vec![CarTrack::new(x, y).unwrap()]).unwrap()
            };
            let a = mk(&mut rng);
            // Rebuild b on the same horizon by reusing a's knot total.
            let b = {
                let h = a.horizon();
                let y = PiecewisePoly::single(Cubic::new(0.3, 4.7, 0.05, -0.01), h);
                let x = PiecewisePoly::constant(0.4, h);
                FleetTrace::new(vec![CarTrack::new(x, y).unwrap()]).unwrap()
            };
            let sup = a.sup_metric(&b).unwrap();
            let n = 10_000;
            let mut grid_max: f64 = 0.0;
            for i in 0..=n {
                let t = a.horizon() * i as f64 / n as f64;
                let ka = a.eval_kinematics(t, CarId(0)).unwrap();
                let kb = b.eval_kinematics(t, CarId(0)).unwrap();
                grid_max = grid_max
                    .max((ka.pos.x - kb.pos.x).abs())
                    .max((ka.pos.y - kb.pos.y).abs());
            }
            assert!(sup >= grid_max - 1e-9, "sup {sup} below grid max {grid_max}");
            assert!(sup - grid_max <= 1e-9 * (1.0 + grid_max) + 1e-6);
        }
    }

    #[test]
    fn delay_constructors() {
        let d = DelaySignal::zero(2, 0.5, 10.0);
        assert_eq!(d.eval(3.3, CarId(0), CarId(1)).unwrap(), 3.3);

        let d = DelaySignal::constant_lag(2, 0.3, 0.5, 10.0).unwrap();
        assert_eq!(d.eval(0.1, CarId(0), CarId(1)).unwrap(), 0.0);
        assert!((d.eval(2.0, CarId(0), CarId(1)).unwrap() - 1.7).abs() < 1e-12);

        let d = DelaySignal::zero_order_hold(2, 0.25, 0.0, 0.5, 10.0).unwrap();
        assert!((d.eval(0.6, CarId(0), CarId(1)).unwrap() - 0.5).abs() < 1e-12);

        assert!(DelaySignal::constant_lag(2, 0.6, 0.5, 10.0).is_err());
    }

    proptest! {
        #[test]
        fn delay_band_invariant(seed in 0u64..50, t in 0.0f64..10.0) {
            for d in [
                DelaySignal::zero(3, 0.5, 10.0),
                DelaySignal::constant_lag(3, 0.5, 0.5, 10.0).unwrap(),
                DelaySignal::zero_order_hold(3, 0.25, 0.1, 0.5, 10.0).unwrap(),
                DelaySignal::random_band(3, 0.5, 10.0, seed),
            ] {
                for c1 in 0..3 {
                    for c2 in 0..3 {
                        let tau = d.eval(t, CarId(c1), CarId(c2)).unwrap();
                        prop_assert!(tau <= t + 1e-12);
                        prop_assert!(tau >= (t - 0.5).max(0.0) - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn metric_axioms(dx in -3.0f64..3.0, dy in -3.0f64..3.0, ex in -3.0f64..3.0) {
            let a = FleetTrace::new(vec![quadratic_track(4.0)]).unwrap();
            let b = a.shift_track(CarId(0), dx, dy).unwrap();
            let c = a.shift_track(CarId(0), ex, -dy).unwrap();
            let dab = a.sup_metric(&b).unwrap();
            let dba = b.sup_metric(&a).unwrap();
            let dac = a.sup_metric(&c).unwrap();
            let dbc = b.sup_metric(&c).unwrap();
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert_eq!(a.sup_metric(&a).unwrap(), 0.0);
            prop_assert!(dac <= dab + dbc + 1e-9);
        }
    }
}
