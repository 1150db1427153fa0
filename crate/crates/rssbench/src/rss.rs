//! Minimum safe distances, dangerous-situation signals, blame time, the
//! driving policy, and responsibility, all evaluated through delayed
//! observations.
//!
//! Conventions: `y` is longitudinal (forward), `x` is lateral. For an ordered
//! pair `(c1, c2)`, `c1` observes itself at `t1 = tau(t, c1, c1)` and `c2` at
//! `t2 = tau(t, c1, c2)`. Distance comparisons are strict: a gap exactly
//! equal to the minimum distance is not dangerous, and a `-inf` distance
//! never exceeds anything.

use crate::error::{Error, Result};
use crate::poly::{self, Cubic};
use crate::signals::{Axis, CarId, DelaySignal, FleetTrace, KinematicState, PiecewisePoly};
use serde::{Deserialize, Serialize};

/// The eight model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RssParams {
    /// Response time (s).
    pub rho: f64,
    /// Minimum distance floor (m).
    pub mu: f64,
    /// Maximum longitudinal acceleration (m/s^2).
    pub a_max_accel: f64,
    /// Minimum longitudinal deceleration the rear car must apply (m/s^2).
    pub a_min_brake: f64,
    /// Maximum longitudinal deceleration the front car may apply (m/s^2).
    pub a_max_brake: f64,
    /// Maximum lateral acceleration (m/s^2).
    pub a_max_accel_lat: f64,
    /// Minimum lateral deceleration (m/s^2).
    pub a_min_brake_lat: f64,
    /// Maximum lateral deceleration (m/s^2).
    pub a_max_brake_lat: f64,
}

impl RssParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) {
            return Err(Error::config("rho must be >= 0"));
        }
        for (name, v) in [
            ("mu", self.mu),
            ("a_max_accel", self.a_max_accel),
            ("a_min_brake", self.a_min_brake),
            ("a_max_brake", self.a_max_brake),
            ("a_max_accel_lat", self.a_max_accel_lat),
            ("a_min_brake_lat", self.a_min_brake_lat),
            ("a_max_brake_lat", self.a_max_brake_lat),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.a_min_brake > self.a_max_brake {
            return Err(Error::config("a_min_brake must be <= a_max_brake"));
        }
        if self.a_min_brake_lat > self.a_max_brake_lat {
            return Err(Error::config("a_min_brake_lat must be <= a_max_brake_lat"));
        }
        Ok(())
    }
}

/// Numeric knobs for event localization. `grid_step` is the scan resolution;
/// indicator episodes shorter than it can be missed, which is the documented
/// soundness caveat of the monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// Indicator scan resolution (s).
    pub grid_step: f64,
    /// Bisection tolerance for located transition times (s).
    pub delta_t: f64,
    /// Tolerance when matching a combined blame time against its
    /// longitudinal/lateral variants.
    pub blame_match_tol: f64,
    /// Positional tolerance for the collision predicate (m).
    pub eps_collision: f64,
    /// Absolute floor below which clause excursions are treated as noise.
    pub violation_tol: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            grid_step: 0.01,
            delta_t: 1e-6,
            blame_match_tol: 1e-5,
            eps_collision: 1e-6,
            violation_tol: 1e-9,
        }
    }
}

/// A minimum-distance value: finite, or `-inf` for the degenerate pair
/// orderings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ExtendedDistance {
    NegInfinity,
    Finite(f64),
}

impl ExtendedDistance {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedDistance::Finite(v) => Some(v),
            ExtendedDistance::NegInfinity => None,
        }
    }

    /// Strict comparison against a gap; `-inf` exceeds nothing.
    pub fn strictly_exceeds(self, gap: f64) -> bool {
        match self {
            ExtendedDistance::Finite(v) => v > gap,
            ExtendedDistance::NegInfinity => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DangerKind {
    Longitudinal,
    Lateral,
    Combined,
}

/// Closed-form minimum longitudinal distance for a rear car at `v_rear` and a
/// front car at `v_front`, clamped below by `mu`.
pub fn d_min_lon_closed(p: &RssParams, v_rear: f64, v_front: f64) -> Result<f64> {
    if v_rear < 0.0 || v_front < 0.0 {
        return Err(Error::domain(format!(
            "longitudinal speeds must be non-negative, got rear={v_rear}, front={v_front}"
        )));
    }
    Ok(p.mu.max(d_min_lon_raw(p, v_rear, v_front)))
}

/// The unclamped worst-case term of the longitudinal formula: rear travel
/// (accelerate for rho, then brake at `a_min_brake` to rest) minus front
/// travel (brake at `a_max_brake` to rest).
pub fn d_min_lon_raw(p: &RssParams, v_rear: f64, v_front: f64) -> f64 {
    let v_resp = v_rear + p.rho * p.a_max_accel;
    p.rho * v_rear + 0.5 * p.a_max_accel * p.rho * p.rho + v_resp * v_resp / (2.0 * p.a_min_brake)
        - v_front * v_front / (2.0 * p.a_max_brake)
}

/// Closed-form minimum lateral distance. Symmetric in the two speed
/// magnitudes; no side assumption is made about which car is on the left.
pub fn d_min_lat_closed(p: &RssParams, v1x: f64, v2x: f64) -> f64 {
    let half = |v: f64| {
        let v = v.abs();
        let v_resp = v + p.rho * p.a_max_accel_lat;
        p.rho * v
            + 0.5 * p.a_max_accel_lat * p.rho * p.rho
            + v_resp * v_resp / (2.0 * p.a_min_brake_lat)
    };
    p.mu + half(v1x) + half(v2x)
}

/// One delayed observation of a pair: `own` is `c1` as seen by itself at
/// `t1`, `other` is `c2` as seen by `c1` at `t2`.
#[derive(Debug, Clone, Copy)]
pub struct ObservedPair {
    pub t1: f64,
    pub t2: f64,
    pub own: KinematicState,
    pub other: KinematicState,
}

pub fn observe_pair(
    trace: &FleetTrace,
    delay: &DelaySignal,
    t: f64,
    c1: CarId,
    c2: CarId,
) -> Result<ObservedPair> {
    let t1 = delay.eval(t, c1, c1)?;
    let t2 = delay.eval(t, c1, c2)?;
    Ok(ObservedPair {
        t1,
        t2,
        own: trace.eval_kinematics(t1, c1)?,
        other: trace.eval_kinematics(t2, c2)?,
    })
}

/// Minimum longitudinal distance from observed states. `-inf` when the
/// observed rear is ahead of the observed front.
pub fn d_min_lon_obs(p: &RssParams, own: &KinematicState, other: &KinematicState) -> Result<ExtendedDistance> {
    if own.pos.y > other.pos.y {
        return Ok(ExtendedDistance::NegInfinity);
    }
    Ok(ExtendedDistance::Finite(d_min_lon_closed(
        p, own.vel.y, other.vel.y,
    )?))
}

pub fn d_min_lat_obs(p: &RssParams, own: &KinematicState, other: &KinematicState) -> ExtendedDistance {
    ExtendedDistance::Finite(d_min_lat_closed(p, own.vel.x, other.vel.x))
}

pub fn d_min_lon(
    trace: &FleetTrace,
    delay: &DelaySignal,
    p: &RssParams,
    t: f64,
    c1: CarId,
    c2: CarId,
) -> Result<ExtendedDistance> {
    if c1 == c2 {
        return Ok(ExtendedDistance::NegInfinity);
    }
    let obs = observe_pair(trace, delay, t, c1, c2)?;
    d_min_lon_obs(p, &obs.own, &obs.other)
}

pub fn d_min_lat(
    trace: &FleetTrace,
    delay: &DelaySignal,
    p: &RssParams,
    t: f64,
    c1: CarId,
    c2: CarId,
) -> Result<ExtendedDistance> {
    if c1 == c2 {
        return Ok(ExtendedDistance::NegInfinity);
    }
    let obs = observe_pair(trace, delay, t, c1, c2)?;
    Ok(d_min_lat_obs(p, &obs.own, &obs.other))
}

pub fn dangerous_lon_obs(p: &RssParams, own: &KinematicState, other: &KinematicState) -> Result<bool> {
    let gap = other.pos.y - own.pos.y;
    Ok(d_min_lon_obs(p, own, other)?.strictly_exceeds(gap))
}

pub fn dangerous_lat_obs(p: &RssParams, own: &KinematicState, other: &KinematicState) -> bool {
    let gap = (other.pos.x - own.pos.x).abs();
    d_min_lat_obs(p, own, other).strictly_exceeds(gap)
}

/// The dangerous-situation indicator for the requested kind.
pub fn dangerous(
    trace: &FleetTrace,
    delay: &DelaySignal,
    p: &RssParams,
    t: f64,
    c1: CarId,
    c2: CarId,
    kind: DangerKind,
) -> Result<bool> {
    if c1 == c2 {
        return Ok(false);
    }
    let obs = observe_pair(trace, delay, t, c1, c2)?;
    Ok(match kind {
        DangerKind::Longitudinal => dangerous_lon_obs(p, &obs.own, &obs.other)?,
        DangerKind::Lateral => dangerous_lat_obs(p, &obs.own, &obs.other),
        DangerKind::Combined => {
            dangerous_lon_obs(p, &obs.own, &obs.other)? && dangerous_lat_obs(p, &obs.own, &obs.other)
        }
    })
}

/// Blame values for a query time. `f64::INFINITY` encodes "no blame": the
/// indicator is false at the query time, or has been true since time 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlameResult {
    /// Blame for the requested kind.
    pub value: f64,
    /// Longitudinal-indicator blame.
    pub lon: f64,
    /// Lateral-indicator blame.
    pub lat: f64,
}

/// Locates the start of the maximal interval `(t', t]` on which the
/// indicator is continuously true, by backward grid scan plus bisection.
pub(crate) fn blame_scan(
    ind: &dyn Fn(f64) -> Result<bool>,
    t: f64,
    cfg: &MonitorConfig,
) -> Result<f64> {
    if !ind(t)? {
        return Ok(f64::INFINITY);
    }
    let mut prev_true = t;
    let mut k = 1usize;
    loop {
        let tk = (t - k as f64 * cfg.grid_step).max(0.0);
        if ind(tk)? {
            if tk == 0.0 {
                // True at every probe down to and including 0: dangerous
                // throughout [0, t] at grid resolution.
                return Ok(f64::INFINITY);
            }
            prev_true = tk;
        } else {
            return Ok(bisect_rising(ind, tk, prev_true, cfg.delta_t)?);
        }
        k += 1;
    }
}

/// Bisects a false->true bracket; returns a point on the true side within
/// `delta` of the transition.
fn bisect_rising(ind: &dyn Fn(f64) -> Result<bool>, mut lo: f64, mut hi: f64, delta: f64) -> Result<f64> {
    while hi - lo > delta * 0.5 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ind(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Bisects a true->false bracket; returns a point on the true side.
fn bisect_falling(ind: &dyn Fn(f64) -> Result<bool>, mut lo: f64, mut hi: f64, delta: f64) -> Result<f64> {
    while hi - lo > delta * 0.5 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ind(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Maximal true-intervals of an indicator over `[lo, hi]`, endpoints located
/// by bisection. Returns the intervals and whether the indicator held at
/// `lo` itself.
pub(crate) fn indicator_intervals(
    ind: &dyn Fn(f64) -> Result<bool>,
    lo: f64,
    hi: f64,
    cfg: &MonitorConfig,
) -> Result<(Vec<(f64, f64)>, bool)> {
    let mut intervals = Vec::new();
    let mut t = lo;
    let mut prev = ind(lo)?;
    let true_at_lo = prev;
    let mut prev_t = lo;
    let mut start = if prev { Some(lo) } else { None };
    while t < hi {
        t = (t + cfg.grid_step).min(hi);
        let cur = ind(t)?;
        if cur != prev {
            if cur {
                start = Some(bisect_rising(ind, prev_t, t, cfg.delta_t)?);
            } else {
                let s = start.take().expect("falling edge without a start");
                let e = bisect_falling(ind, prev_t, t, cfg.delta_t)?;
                if e > s {
                    intervals.push((s, e));
                }
            }
            prev = cur;
        }
        prev_t = t;
    }
    if let Some(s) = start {
        if hi > s {
            intervals.push((s, hi));
        }
    }
    Ok((intervals, true_at_lo))
}

/// Blame time per the requested kind, with the longitudinal and lateral
/// variants resolved alongside.
pub fn blame_time(
    trace: &FleetTrace,
    delay: &DelaySignal,
    p: &RssParams,
    cfg: &MonitorConfig,
    t: f64,
    c1: CarId,
    c2: CarId,
    kind: DangerKind,
) -> Result<BlameResult> {
    let mk = |k: DangerKind| move |tt: f64| dangerous(trace, delay, p, tt, c1, c2, k);
    let lon_ind = mk(DangerKind::Longitudinal);
    let lat_ind = mk(DangerKind::Lateral);
    let com_ind = mk(DangerKind::Combined);
    let lon = blame_scan(&lon_ind, t, cfg)?;
    let lat = blame_scan(&lat_ind, t, cfg)?;
    let value = match kind {
        DangerKind::Longitudinal => lon,
        DangerKind::Lateral => lat,
        DangerKind::Combined => blame_scan(&com_ind, t, cfg)?,
    };
    Ok(BlameResult { value, lon, lat })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyClause {
    /// Rear acceleration bounded by `a_max_accel` during the response window.
    Lon1,
    /// Rear must brake at least `a_min_brake` after the response window.
    Lon2,
    /// Front may not brake harder than `a_max_brake` after blame time.
    Lon3,
    /// Lateral acceleration bounded by `a_max_accel_lat` during the response
    /// window.
    Lat1,
    /// Lateral acceleration bounded by `a_min_brake_lat` and opposing the
    /// lateral velocity after the response window.
    Lat2,
}

impl std::fmt::Display for PolicyClause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PolicyClause::Lon1 => "lon-1",
            PolicyClause::Lon2 => "lon-2",
            PolicyClause::Lon3 => "lon-3",
            PolicyClause::Lat1 => "lat-1",
            PolicyClause::Lat2 => "lat-2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyViolation {
    pub clause: PolicyClause,
    /// The car whose danger episode triggered the clause. For `Lon3` the
    /// offending acceleration belongs to this counterpart, not to the car
    /// under judgement; the verdict exposes that so either attribution can be
    /// applied downstream.
    pub counterpart: CarId,
    pub interval: (f64, f64),
    /// Supremum of the constraint excursion on the interval.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyVerdict {
    pub compliant: bool,
    pub violations: Vec<PolicyViolation>,
}

impl PolicyVerdict {
    fn from_violations(mut violations: Vec<PolicyViolation>) -> Self {
        violations.sort_by(|a, b| a.interval.0.partial_cmp(&b.interval.0).unwrap());
        PolicyVerdict {
            compliant: violations.is_empty(),
            violations,
        }
    }
}

/// Collects sub-intervals of `[lo, hi]` where any of the polynomials
/// produced by `qs` (per rebased piece, in piece-local time) is positive.
fn excursions(
    sig: &PiecewisePoly,
    lo: f64,
    hi: f64,
    tol: f64,
    qs: &dyn Fn(&Cubic) -> Vec<Cubic>,
) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    if hi <= lo {
        return out;
    }
    let knots = sig.knots();
    for (i, piece) in sig.pieces().iter().enumerate() {
        let (k0, k1) = (knots[i], knots[i + 1]);
        let (a, b) = (lo.max(k0), hi.min(k1));
        if b <= a {
            continue;
        }
        for q in qs(piece) {
            for (s0, s1, sup) in poly::positive_intervals(&q, a - k0, b - k0, tol) {
                out.push((k0 + s0, k0 + s1, sup));
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut merged: Vec<(f64, f64, f64)> = Vec::new();
    for (a, b, sup) in out {
        match merged.last_mut() {
            Some(last) if a - last.1 <= 1e-9 => {
                last.1 = last.1.max(b);
                last.2 = last.2.max(sup);
            }
            _ => merged.push((a, b, sup)),
        }
    }
    merged
}

fn accel_above(piece: &Cubic, bound: f64) -> Cubic {
    // a(s) - bound with a(s) = 2 c2 + 6 c3 s
    Cubic::new(2.0 * piece.c[2] - bound, 6.0 * piece.c[3], 0.0, 0.0)
}

fn accel_below(piece: &Cubic, bound: f64) -> Cubic {
    // bound - a(s)
    Cubic::new(bound - 2.0 * piece.c[2], -6.0 * piece.c[3], 0.0, 0.0)
}

fn vel_times_accel(piece: &Cubic) -> Cubic {
    poly::quad_times_linear(
        piece.c[1],
        2.0 * piece.c[2],
        3.0 * piece.c[3],
        2.0 * piece.c[2],
        6.0 * piece.c[3],
    )
}

/// Clause bundle for one danger epoch of one ordered pair.
struct EpochWindows {
    t_b: f64,
    t_sup: f64,
    lon: bool,
    lat: bool,
}

fn check_epoch(
    trace: &FleetTrace,
    p: &RssParams,
    cfg: &MonitorConfig,
    c1: CarId,
    c2: CarId,
    w: &EpochWindows,
    out: &mut Vec<PolicyViolation>,
) {
    let horizon = trace.horizon();
    let tol = cfg.violation_tol;
    let own_y = trace.car(c1).axis(Axis::Y);
    let own_x = trace.car(c1).axis(Axis::X);
    let other_y = trace.car(c2).axis(Axis::Y);
    let push = |out: &mut Vec<PolicyViolation>, clause, iv: Vec<(f64, f64, f64)>| {
        for (a, b, excess) in iv {
            out.push(PolicyViolation {
                clause,
                counterpart: c2,
                interval: (a, b),
                excess,
            });
        }
    };
    if w.lon {
        if p.rho > 0.0 {
            // With continuous acceleration the sup over the open response
            // window equals the max over its closure.
            let w1 = (w.t_b, (w.t_b + p.rho).min(horizon));
            push(
                out,
                PolicyClause::Lon1,
                excursions(own_y, w1.0, w1.1, tol, &|pc| vec![accel_above(pc, p.a_max_accel)]),
            );
        }
        let w2 = (w.t_b + p.rho, w.t_sup.min(horizon));
        if w2.1 >= w2.0 {
            push(
                out,
                PolicyClause::Lon2,
                excursions(own_y, w2.0, w2.1, tol, &|pc| vec![accel_above(pc, -p.a_min_brake)]),
            );
        }
        let w3 = (w.t_b, w.t_sup.min(horizon));
        push(
            out,
            PolicyClause::Lon3,
            excursions(other_y, w3.0, w3.1, tol, &|pc| vec![accel_below(pc, -p.a_max_brake)]),
        );
    }
    if w.lat {
        if p.rho > 0.0 {
            let w1 = (w.t_b, (w.t_b + p.rho).min(horizon));
            push(
                out,
                PolicyClause::Lat1,
                excursions(own_x, w1.0, w1.1, tol, &|pc| {
                    vec![
                        accel_above(pc, p.a_max_accel_lat),
                        accel_below(pc, -p.a_max_accel_lat),
                    ]
                }),
            );
        }
        let w2 = (w.t_b + p.rho, w.t_sup.min(horizon));
        if w2.1 >= w2.0 {
            push(
                out,
                PolicyClause::Lat2,
                excursions(own_x, w2.0, w2.1, tol, &|pc| {
                    vec![
                        accel_above(pc, p.a_min_brake_lat),
                        accel_below(pc, -p.a_min_brake_lat),
                        vel_times_accel(pc),
                    ]
                }),
            );
        }
    }
}

/// Whether `c1` follows the policy at the single time `t`.
pub fn policy_at(
    trace: &FleetTrace,
    delay: &DelaySignal,
    p: &RssParams,
    cfg: &MonitorConfig,
    t: f64,
    c1: CarId,
) -> Result<PolicyVerdict> {
    trace.check_car(c1)?;
    let mut violations = Vec::new();
    for i in 0..trace.n_cars() {
        let c2 = CarId(i);
        if c2 == c1 {
            continue;
        }
        if !dangerous(trace, delay, p, t, c1, c2, DangerKind::Combined)? {
            continue;
        }
        let blame = blame_time(trace, delay, p, cfg, t, c1, c2, DangerKind::Combined)?;
        if !blame.value.is_finite() {
            continue;
        }
        let w = EpochWindows {
            t_b: blame.value,
            t_sup: t,
            lon: (blame.lon - blame.value).abs() <= cfg.blame_match_tol,
            lat: (blame.lat - blame.value).abs() <= cfg.blame_match_tol,
        };
        check_epoch(trace, p, cfg, c1, c2, &w, &mut violations);
    }
    Ok(PolicyVerdict::from_violations(violations))
}

/// Whether `c1` follows the policy at every time in `interval`. Clause
/// windows are aggregated per danger epoch: blame is constant on each
/// maximal dangerous interval, so the union of per-time windows collapses to
/// one window per clause per epoch.
pub fn policy_over(
    trace: &FleetTrace,
    delay: &DelaySignal,
    p: &RssParams,
    cfg: &MonitorConfig,
    interval: (f64, f64),
    c1: CarId,
) -> Result<PolicyVerdict> {
    trace.check_car(c1)?;
    let (q0, q1) = interval;
    if !(q0 >= 0.0) || q1 > trace.horizon() || q1 < q0 {
        return Err(Error::domain(format!(
            "query interval [{q0}, {q1}] outside horizon [0, {}]",
            trace.horizon()
        )));
    }
    let mut violations = Vec::new();
    for i in 0..trace.n_cars() {
        let c2 = CarId(i);
        if c2 == c1 {
            continue;
        }
        let com = |tt: f64| dangerous(trace, delay, p, tt, c1, c2, DangerKind::Combined);
        let lon = |tt: f64| dangerous(trace, delay, p, tt, c1, c2, DangerKind::Longitudinal);
        let lat = |tt: f64| dangerous(trace, delay, p, tt, c1, c2, DangerKind::Lateral);
        let (epochs, true_at_0) = indicator_intervals(&com, 0.0, q1, cfg)?;
        if epochs.is_empty() {
            continue;
        }
        let (lon_iv, lon_at_0) = indicator_intervals(&lon, 0.0, q1, cfg)?;
        let (lat_iv, lat_at_0) = indicator_intervals(&lat, 0.0, q1, cfg)?;
        for (s, e) in &epochs {
            let t_sup = e.min(q1);
            if t_sup <= *s || t_sup < q0 {
                continue;
            }
            if *s == 0.0 && true_at_0 && com(0.0)? {
                // Dangerous from time 0: blame is infinite, no obligations.
                continue;
            }
            // The epoch is covered by exactly one maximal interval of each
            // weaker indicator; blame matches when that interval starts with
            // the epoch (rather than earlier).
            let variant_blame = |ivs: &[(f64, f64)], at0: bool| -> f64 {
                for (vs, ve) in ivs {
                    if *vs <= s + cfg.blame_match_tol && *ve >= t_sup - cfg.blame_match_tol {
                        if *vs == 0.0 && at0 {
                            return f64::INFINITY;
                        }
                        return *vs;
                    }
                }
                f64::INFINITY
            };
            let blame_lon = variant_blame(&lon_iv, lon_at_0);
            let blame_lat = variant_blame(&lat_iv, lat_at_0);
            let w = EpochWindows {
                t_b: *s,
                t_sup,
                lon: (blame_lon - s).abs() <= cfg.blame_match_tol,
                lat: (blame_lat - s).abs() <= cfg.blame_match_tol,
            };
            check_epoch(trace, p, cfg, c1, c2, &w, &mut violations);
        }
    }
    Ok(PolicyVerdict::from_violations(violations))
}

/// Whether `c1` is responsible for the collision with `c2` at time `t`: the
/// pair is dangerous from `c1`'s delayed viewpoint and `c1` broke the policy
/// somewhere in `(t_b, t]`.
pub fn responsible(
    trace: &FleetTrace,
    delay: &DelaySignal,
    p: &RssParams,
    cfg: &MonitorConfig,
    t: f64,
    c1: CarId,
    c2: CarId,
) -> Result<bool> {
    let k1 = trace.eval_kinematics(t, c1)?;
    let k2 = trace.eval_kinematics(t, c2)?;
    let gap = Vec2::new(k2.pos.x - k1.pos.x, k2.pos.y - k1.pos.y).linf();
    if gap > cfg.eps_collision {
        return Err(Error::domain(format!(
            "t={t} is not a collision time of ({c1}, {c2}): residual {gap}"
        )));
    }
    if !dangerous(trace, delay, p, t, c1, c2, DangerKind::Combined)? {
        return Ok(false);
    }
    let blame = blame_time(trace, delay, p, cfg, t, c1, c2, DangerKind::Combined)?;
    if !blame.value.is_finite() {
        return Ok(false);
    }
    let verdict = policy_over(trace, delay, p, cfg, (blame.value, t), c1)?;
    Ok(!verdict.compliant)
}

use crate::signals::Vec2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::CarTrack;

    pub(crate) fn params() -> RssParams {
        RssParams {
            rho: 1.0,
            mu: 1.0,
            a_max_accel: 2.0,
            a_min_brake: 2.0,
            a_max_brake: 4.0,
            a_max_accel_lat: 1.0,
            a_min_brake_lat: 1.0,
            a_max_brake_lat: 2.0,
        }
    }

    #[test]
    fn lon_closed_form_hand_values() {
        let mut p = params();
        p.rho = 0.0;
        assert_eq!(d_min_lon_closed(&p, 0.0, 0.0).unwrap(), 1.0);

        let p = params();
        let v = d_min_lon_closed(&p, 10.0, 10.0).unwrap();
        assert!((v - 34.5).abs() < 1e-12, "got {v}");
        assert!(d_min_lon_closed(&p, -1.0, 0.0).is_err());
    }

    #[test]
    fn lat_closed_form_hand_values() {
        let mut p = params();
        p.rho = 0.0;
        p.mu = 0.5;
        assert_eq!(d_min_lat_closed(&p, 0.0, 0.0), 0.5);

        let mut p = params();
        p.mu = 0.5;
        p.a_max_accel_lat = 1.0;
        p.a_min_brake_lat = 1.0;
        let v = d_min_lat_closed(&p, 1.0, 2.0);
        assert!((v - 11.0).abs() < 1e-12, "got {v}");
        // Symmetry in the two speeds, including signs.
        assert_eq!(d_min_lat_closed(&p, -2.0, 1.0), v);
    }

    #[test]
    fn clamp_and_monotonicity() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p = params();
        for _ in 0..1000 {
            let vr: f64 = rng.gen_range(0.0..30.0);
            let vf: f64 = rng.gen_range(0.0..30.0);
            let d = d_min_lon_closed(&p, vr, vf).unwrap();
            assert!(d >= p.mu);
            assert!(d_min_lat_closed(&p, rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)) >= p.mu);
            // Non-decreasing in v_rear, non-increasing in v_front.
            assert!(d_min_lon_closed(&p, vr + 0.5, vf).unwrap() >= d - 1e-12);
            assert!(d_min_lon_closed(&p, vr, vf + 0.5).unwrap() <= d + 1e-12);
        }
    }

    fn two_car_trace(gap: f64, horizon: f64) -> FleetTrace {
        FleetTrace::new(vec![
            CarTrack::parked(0.0, 0.0, horizon),
            CarTrack::parked(0.0, gap, horizon),
        ])
        .unwrap()
    }

    #[test]
    fn self_pair_and_order_cases() {
        let p = params();
        let trace = two_car_trace(10.0, 2.0);
        let d = DelaySignal::zero(2, p.rho, 2.0);
        assert_eq!(
            d_min_lon(&trace, &d, &p, 1.0, CarId(0), CarId(0)).unwrap(),
            ExtendedDistance::NegInfinity
        );
        // Rear observed ahead of front.
        assert_eq!(
            d_min_lon(&trace, &d, &p, 1.0, CarId(1), CarId(0)).unwrap(),
            ExtendedDistance::NegInfinity
        );
        assert!(!dangerous(&trace, &d, &p, 1.0, CarId(0), CarId(0), DangerKind::Combined).unwrap());
    }

    #[test]
    fn stationary_combined_danger() {
        let p = params();
        // Gap mu/2 < mu: dangerous both ways.
        let trace = two_car_trace(0.5, 2.0);
        let d = DelaySignal::zero(2, p.rho, 2.0);
        assert!(dangerous(&trace, &d, &p, 0.5, CarId(0), CarId(1), DangerKind::Combined).unwrap());
        // Large lateral gap defuses the combined signal.
        let trace2 = FleetTrace::new(vec![
            CarTrack::parked(0.0, 0.0, 2.0),
            CarTrack::parked(10.0 * p.mu + 10.0, 0.25, 2.0),
        ])
        .unwrap();
        assert!(!dangerous(&trace2, &d, &p, 0.5, CarId(0), CarId(1), DangerKind::Combined).unwrap());
    }

    /// Two cars at identical speed profiles crossing the danger threshold at
    /// analytically known times: speed v(t) = 10 + k (t-2)(5-t) crosses
    /// v* = 10 upward at t=2 and downward at t=5, and with a constant gap
    /// chosen so danger holds exactly when v > v*.
    pub(crate) fn threshold_fixture() -> (FleetTrace, DelaySignal, RssParams) {
        let mut p = params();
        p.rho = 0.0;
        p.mu = 1.0;
        p.a_min_brake = 2.0;
        p.a_max_brake = 4.0;
        let horizon = 6.0;
        let k = 0.5;
        // v(t) = 10 + k(t-2)(5-t) = 10 + k(-t^2 + 7t - 10)
        // y(t) = 10 t + k(-t^3/3 + 3.5 t^2 - 10 t)
        let vel_poly = |y0: f64| {
            Cubic::new(
                y0,
                10.0 - 10.0 * k,
                3.5 * k,
                -k / 3.0,
            )
        };
        let gap = 10.0 * 10.0 * (1.0 / (2.0 * p.a_min_brake) - 1.0 / (2.0 * p.a_max_brake));
        let rear = CarTrack::new(
            PiecewisePoly::constant(0.0, horizon),
            PiecewisePoly::single(vel_poly(0.0), horizon),
        )
        .unwrap();
        let front = CarTrack::new(
            PiecewisePoly::constant(0.0, horizon),
            PiecewisePoly::single(vel_poly(gap), horizon),
        )
        .unwrap();
        let trace = FleetTrace::new(vec![rear, front]).unwrap();
        let delay = DelaySignal::zero(2, p.rho, horizon);
        (trace, delay, p)
    }

    #[test]
    fn blame_time_on_threshold_fixture() {
        let (trace, delay, p) = threshold_fixture();
        let cfg = MonitorConfig::default();
        // Not dangerous at t=1.5, dangerous at t=4.
        assert!(!dangerous(&trace, &delay, &p, 1.5, CarId(0), CarId(1), DangerKind::Combined).unwrap());
        assert!(dangerous(&trace, &delay, &p, 4.0, CarId(0), CarId(1), DangerKind::Combined).unwrap());

        let b = blame_time(&trace, &delay, &p, &cfg, 4.0, CarId(0), CarId(1), DangerKind::Combined)
            .unwrap();
        assert!((b.value - 2.0).abs() <= 1e-6, "blame {}", b.value);
        // Lateral gap is 0 throughout, so the lateral indicator is true from
        // time 0 and its blame is infinite.
        assert!(b.lat.is_infinite());
        assert!((b.lon - 2.0).abs() <= 1e-6);

        // Indicator false at the query time.
        let b = blame_time(&trace, &delay, &p, &cfg, 5.5, CarId(0), CarId(1), DangerKind::Combined)
            .unwrap();
        assert!(b.value.is_infinite());
    }

    #[test]
    fn blame_infinite_when_dangerous_from_zero() {
        let p = params();
        let trace = two_car_trace(0.5, 2.0);
        let d = DelaySignal::zero(2, p.rho, 2.0);
        let cfg = MonitorConfig::default();
        let b = blame_time(&trace, &d, &p, &cfg, 1.0, CarId(0), CarId(1), DangerKind::Combined)
            .unwrap();
        assert!(b.value.is_infinite());
        // And therefore vacuously compliant.
        let v = policy_at(&trace, &d, &p, &cfg, 1.0, CarId(0)).unwrap();
        assert!(v.compliant);
    }

    #[test]
    fn policy_vacuous_without_danger() {
        let p = params();
        let trace = two_car_trace(500.0, 2.0);
        let d = DelaySignal::zero(2, p.rho, 2.0);
        let cfg = MonitorConfig::default();
        assert!(policy_at(&trace, &d, &p, &cfg, 1.0, CarId(0)).unwrap().compliant);
        assert!(policy_over(&trace, &d, &p, &cfg, (0.0, 2.0), CarId(0)).unwrap().compliant);
    }
}
