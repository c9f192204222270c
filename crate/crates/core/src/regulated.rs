//! Regulated scalar functions with declared jump tables.
//!
//! One-sided limits are not computable from point queries, so every jump is
//! declared up front with its left limit, value and right limit. Away from
//! the table the function is evaluated through its smooth segments.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gode::modulus::ModulusFunction;
use crate::partition::{
    cousin_partition, gauge_sequence, Gauge, GaugeBase, PartitionError, TagPolicy,
};
use crate::ScalarFn;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegulatedError {
    #[error("t = {t} outside the domain [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("invalid regulated function: {0}")]
    Invalid(String),
    #[error("family is empty")]
    EmptyFamily,
    #[error("family members live on different domains")]
    DomainMismatch,
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("member {member} oscillates by {oscillation} on the gap ({left}, {right})")]
    OscillationViolation {
        member: usize,
        left: f64,
        right: f64,
        oscillation: f64,
    },
    #[error("no local radius found for member {member} at {at}")]
    NoLocalRadius { member: usize, at: f64 },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A declared discontinuity: `f(at-) = left`, `f(at) = value`, `f(at+) = right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub at: f64,
    pub left: f64,
    pub value: f64,
    pub right: f64,
}

#[derive(Clone)]
struct Segment {
    start: f64,
    end: f64,
    f: ScalarFn,
}

/// Scalar function on `[a, b]`: smooth segments plus a jump table.
#[derive(Clone)]
pub struct RegulatedFunction {
    a: f64,
    b: f64,
    segments: Vec<Segment>,
    jumps: Vec<Jump>,
}

impl fmt::Debug for RegulatedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bounds: Vec<(f64, f64)> = self.segments.iter().map(|s| (s.start, s.end)).collect();
        f.debug_struct("RegulatedFunction")
            .field("domain", &(self.a, self.b))
            .field("segments", &bounds)
            .field("jumps", &self.jumps)
            .finish()
    }
}

impl RegulatedFunction {
    /// Build from segments `(start, end, f)` tiling `[a, b]` and a jump table.
    pub fn new(
        a: f64,
        b: f64,
        segments: Vec<(f64, f64, ScalarFn)>,
        mut jumps: Vec<Jump>,
    ) -> Result<Self, RegulatedError> {
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(RegulatedError::Invalid(format!("empty domain [{a}, {b}]")));
        }
        if segments.is_empty() {
            return Err(RegulatedError::Invalid("no segments".into()));
        }
        if segments[0].0 != a || segments[segments.len() - 1].1 != b {
            return Err(RegulatedError::Invalid(format!(
                "segments do not cover [{a}, {b}]"
            )));
        }
        for w in segments.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(RegulatedError::Invalid(format!(
                    "segments not contiguous at {} / {}",
                    w[0].1, w[1].0
                )));
            }
        }
        if let Some(s) = segments.iter().find(|s| !(s.0 < s.1)) {
            return Err(RegulatedError::Invalid(format!(
                "empty segment [{}, {}]",
                s.0, s.1
            )));
        }
        jumps.sort_by(|x, y| x.at.total_cmp(&y.at));
        for j in &jumps {
            if !(a <= j.at && j.at <= b) {
                return Err(RegulatedError::Invalid(format!(
                    "jump at {} outside domain",
                    j.at
                )));
            }
            if !(j.left.is_finite() && j.value.is_finite() && j.right.is_finite()) {
                return Err(RegulatedError::Invalid(format!(
                    "non-finite jump at {}",
                    j.at
                )));
            }
        }
        if jumps.windows(2).any(|w| w[0].at == w[1].at) {
            return Err(RegulatedError::Invalid("duplicate jump point".into()));
        }
        Ok(RegulatedFunction {
            a,
            b,
            segments: segments
                .into_iter()
                .map(|(start, end, f)| Segment { start, end, f })
                .collect(),
            jumps,
        })
    }

    pub fn continuous(
        a: f64,
        b: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, RegulatedError> {
        RegulatedFunction::new(a, b, vec![(a, b, Arc::new(f))], Vec::new())
    }

    /// Left-continuous step: `0` on `[a, at]`, `height` on `(at, b]`.
    pub fn step(a: f64, b: f64, at: f64, height: f64) -> Result<Self, RegulatedError> {
        if !(a < at && at < b) {
            return Err(RegulatedError::Invalid(format!(
                "step point {at} must lie inside ({a}, {b})"
            )));
        }
        RegulatedFunction::new(
            a,
            b,
            vec![
                (a, at, Arc::new(|_| 0.0)),
                (at, b, Arc::new(move |_| height)),
            ],
            vec![Jump {
                at,
                left: 0.0,
                value: 0.0,
                right: height,
            }],
        )
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn jump_points(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.at).collect()
    }

    /// Interior points where one segment hands over to the next.
    pub fn segment_boundaries(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.start).collect()
    }

    fn jump_at(&self, t: f64) -> Option<&Jump> {
        self.jumps
            .binary_search_by(|j| j.at.total_cmp(&t))
            .ok()
            .map(|i| &self.jumps[i])
    }

    /// Segment whose closure contains `t`, preferring the left one at a boundary.
    fn left_segment(&self, t: f64) -> &Segment {
        let i = self.segments.partition_point(|s| s.end < t);
        &self.segments[i.min(self.segments.len() - 1)]
    }

    fn right_segment(&self, t: f64) -> &Segment {
        let i = self.segments.partition_point(|s| s.end <= t);
        &self.segments[i.min(self.segments.len() - 1)]
    }

    fn check_domain(&self, t: f64) -> Result<(), RegulatedError> {
        if self.a <= t && t <= self.b {
            Ok(())
        } else {
            Err(RegulatedError::OutOfDomain {
                t,
                a: self.a,
                b: self.b,
            })
        }
    }

    /// Value at `t`, which must lie in the domain.
    pub fn value(&self, t: f64) -> Result<f64, RegulatedError> {
        self.check_domain(t)?;
        Ok(self.eval(t))
    }

    /// Value at `t` without a domain check; points outside evaluate the
    /// nearest segment's formula.
    pub fn eval(&self, t: f64) -> f64 {
        match self.jump_at(t) {
            Some(j) => j.value,
            None => (self.left_segment(t).f)(t),
        }
    }

    pub fn one_sided_limit(&self, t: f64, side: Side) -> Result<f64, RegulatedError> {
        let ok = match side {
            Side::Left => self.a < t && t <= self.b,
            Side::Right => self.a <= t && t < self.b,
        };
        if !ok {
            return Err(RegulatedError::OutOfDomain {
                t,
                a: self.a,
                b: self.b,
            });
        }
        Ok(self.limit_unchecked(t, side))
    }

    /// One-sided limit; at the endpoints the missing side falls back to the value.
    pub fn limit_unchecked(&self, t: f64, side: Side) -> f64 {
        if let Some(j) = self.jump_at(t) {
            return match side {
                Side::Left if t > self.a => j.left,
                Side::Right if t < self.b => j.right,
                _ => j.value,
            };
        }
        match side {
            Side::Left => (self.left_segment(t).f)(t),
            Side::Right => (self.right_segment(t).f)(t),
        }
    }

    /// Largest gap between tabulated one-sided limits and the function value
    /// `2^-40 (b - a)` away, over all jumps and segment boundaries.
    pub fn limit_discrepancy(&self) -> f64 {
        let h = (self.b - self.a) * 2f64.powi(-40);
        let mut worst = 0.0f64;
        let mut probe = |t: f64| {
            if t > self.a {
                let d = (self.limit_unchecked(t, Side::Left) - self.eval(t - h)).abs();
                worst = worst.max(d);
            }
            if t < self.b {
                let d = (self.limit_unchecked(t, Side::Right) - self.eval(t + h)).abs();
                worst = worst.max(d);
            }
        };
        for t in self.jump_points() {
            probe(t);
        }
        for t in self.segment_boundaries() {
            probe(t);
        }
        worst
    }

    /// Sampled monotonicity on `n` uniform points plus the jump table.
    pub fn is_nondecreasing_sampled(&self, n: usize) -> bool {
        let mut ts: Vec<f64> = (0..=n)
            .map(|i| self.a + (self.b - self.a) * i as f64 / n as f64)
            .collect();
        ts.extend(self.jump_points());
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut prev = f64::NEG_INFINITY;
        for t in ts {
            let l = self.limit_unchecked(t, Side::Left);
            let v = self.eval(t);
            let r = self.limit_unchecked(t, Side::Right);
            if l < prev || v < l || r < v {
                return false;
            }
            prev = r;
        }
        true
    }
}

/// A nondecreasing `h` with a modulus `zeta` bounding
/// `|x(t) - x(s)| <= zeta(|h(t) - h(s)|)`.
#[derive(Debug, Clone)]
pub struct JumpProfile {
    pub h: RegulatedFunction,
    pub zeta: ModulusFunction,
}

impl JumpProfile {
    pub fn new(h: RegulatedFunction, zeta: ModulusFunction) -> Result<Self, RegulatedError> {
        if !h.is_nondecreasing_sampled(1024) {
            return Err(RegulatedError::Invalid("h is not nondecreasing".into()));
        }
        Ok(JumpProfile { h, zeta })
    }
}

/// `J(tau) = max(zeta(|h(tau) - h(tau-)|), zeta(|h(tau) - h(tau+)|))`,
/// one-sided at the endpoints.
pub fn jump_magnitude(profile: &JumpProfile, tau: f64) -> f64 {
    let h = &profile.h;
    let (a, b) = h.domain();
    let v = h.eval(tau);
    let left = if tau > a {
        (v - h.limit_unchecked(tau, Side::Left)).abs()
    } else {
        0.0
    };
    let right = if tau < b {
        (v - h.limit_unchecked(tau, Side::Right)).abs()
    } else {
        0.0
    };
    profile.zeta.eval(left).max(profile.zeta.eval(right))
}

fn shared_domain(family: &[RegulatedFunction]) -> Result<(f64, f64), RegulatedError> {
    let first = family.first().ok_or(RegulatedError::EmptyFamily)?;
    let d = first.domain();
    if family.iter().any(|f| f.domain() != d) {
        return Err(RegulatedError::DomainMismatch);
    }
    Ok(d)
}

const RADIUS_SAMPLES: usize = 32;
const RADIUS_DEPTH: i32 = 48;

/// Largest radius `(b - a) 2^-j` such that sampled values on each side of
/// `tau` stay strictly within `half_eps` of the matching one-sided limit.
fn local_radius(f: &RegulatedFunction, tau: f64, half_eps: f64) -> Option<f64> {
    let (a, b) = f.domain();
    let left = f.limit_unchecked(tau, Side::Left);
    let right = f.limit_unchecked(tau, Side::Right);
    for j in 0..=RADIUS_DEPTH {
        let r = (b - a) * 2f64.powi(-j);
        let ok = (1..=RADIUS_SAMPLES).all(|k| {
            let s = r * k as f64 / RADIUS_SAMPLES as f64;
            let lo = tau - s;
            let hi = tau + s;
            (lo <= a || (f.eval(lo) - left).abs() < half_eps)
                && (hi >= b || (f.eval(hi) - right).abs() < half_eps)
        });
        if ok {
            return Some(r);
        }
    }
    None
}

const GAP_SAMPLES: usize = 1024;

/// Sampled oscillation of `f` on the open gap `(l, r)`, including the
/// one-sided limits at both ends and any interior segment boundaries.
fn gap_oscillation(f: &RegulatedFunction, l: f64, r: f64) -> f64 {
    let mut lo = f.limit_unchecked(l, Side::Right);
    let mut hi = lo;
    let mut see = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    see(f.limit_unchecked(r, Side::Left));
    for i in 1..GAP_SAMPLES {
        see(f.eval(l + (r - l) * i as f64 / GAP_SAMPLES as f64));
    }
    for t in f.segment_boundaries().into_iter().chain(f.jump_points()) {
        if l < t && t < r {
            see(f.eval(t));
            see(f.limit_unchecked(t, Side::Left));
            see(f.limit_unchecked(t, Side::Right));
        }
    }
    hi - lo
}

/// Division `a = s_0 < ... < s_k = b` such that every family member
/// oscillates by less than `eps` on each open gap `(s_{j-1}, s_j)`.
///
/// The gauge at `tau` is the smallest per-member radius keeping values
/// within `eps/2` of the one-sided limits at `tau`, intersected with `seed`.
/// Division points are the partition points together with the tags.
pub fn oscillation_division(
    family: &[RegulatedFunction],
    eps: f64,
    seed: &Gauge,
) -> Result<Vec<f64>, RegulatedError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(RegulatedError::InvalidEpsilon(eps));
    }
    let (a, b) = shared_domain(family)?;
    if seed.interval() != (a, b) {
        return Err(RegulatedError::DomainMismatch);
    }
    for (m, f) in family.iter().enumerate() {
        for t in f.jump_points() {
            if local_radius(f, t, 0.5 * eps).is_none() {
                return Err(RegulatedError::NoLocalRadius { member: m, at: t });
            }
        }
    }
    let fam: Vec<RegulatedFunction> = family.to_vec();
    let tiny = (b - a) * 2f64.powi(-RADIUS_DEPTH);
    let base = GaugeBase::Function(Arc::new(move |tau| {
        fam.iter()
            .map(|f| local_radius(f, tau, 0.5 * eps).unwrap_or(tiny))
            .fold(f64::INFINITY, f64::min)
    }));
    let mut gauge = Gauge::new(a, b, base)?;
    for f in family {
        for t in f.jump_points() {
            gauge = gauge.with_default_anchor(t)?;
        }
    }
    let gauge = gauge.min_with(seed)?;

    let mut last = None;
    for k in 0..2 {
        let division = division_from(&gauge_sequence(&gauge, k))?;
        match first_violation(family, &division, eps) {
            None => return Ok(division),
            Some(v) => last = Some(v),
        }
    }
    Err(last.expect("loop ran"))
}

fn division_from(g: &Gauge) -> Result<Vec<f64>, RegulatedError> {
    let p = cousin_partition(g, TagPolicy::FreeTag)?;
    let mut pts = p.points();
    pts.extend(p.tags());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(pts)
}

fn first_violation(
    family: &[RegulatedFunction],
    division: &[f64],
    eps: f64,
) -> Option<RegulatedError> {
    for (m, f) in family.iter().enumerate() {
        for w in division.windows(2) {
            let osc = gap_oscillation(f, w[0], w[1]);
            if !(osc < eps) {
                return Some(RegulatedError::OscillationViolation {
                    member: m,
                    left: w[0],
                    right: w[1],
                    oscillation: osc,
                });
            }
        }
    }
    None
}

/// Shrinking radii `(b - a) 2^-j`, `j = 1..=depth`, each probed with
/// `samples` points per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    pub depth: u32,
    pub samples: usize,
    /// Uniform probe grid size; jump points are always added.
    pub grid: usize,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        ProbeSchedule {
            depth: 6,
            samples: 32,
            grid: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EquiregVerdict {
    Pass {
        probes: usize,
    },
    /// At the finest radius, `member` deviates from its one-sided limit at
    /// `tau` by `deviation >= eps` at time `t`.
    Fail {
        eps: f64,
        tau: f64,
        member: usize,
        t: f64,
        side: Side,
        deviation: f64,
    },
}

impl EquiregVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, EquiregVerdict::Pass { .. })
    }
}

struct Worst {
    member: usize,
    t: f64,
    side: Side,
    deviation: f64,
}

/// Sampled test of equiregulatedness: for every `eps` and probe point `tau`
/// search a common radius from the schedule that keeps all members within
/// `eps` of their one-sided limits at `tau`.
///
/// A pass is evidence at the schedule's resolution, not a proof.
pub fn is_equiregulated(
    family: &[RegulatedFunction],
    eps_grid: &[f64],
    schedule: ProbeSchedule,
) -> Result<EquiregVerdict, RegulatedError> {
    let (a, b) = shared_domain(family)?;
    if let Some(&e) = eps_grid.iter().find(|e| !(**e > 0.0)) {
        return Err(RegulatedError::InvalidEpsilon(e));
    }
    let n = schedule.grid.max(1);
    let mut taus: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    for f in family {
        taus.extend(f.jump_points());
    }
    taus.sort_by(f64::total_cmp);
    taus.dedup();

    let mut probes = 0;
    for &eps in eps_grid {
        for &tau in &taus {
            probes += 1;
            let mut worst = None;
            let mut found = false;
            for j in 1..=schedule.depth {
                let r = (b - a) * 2f64.powi(-(j as i32));
                match worst_deviation(family, tau, r, eps, schedule.samples) {
                    None => {
                        found = true;
                        break;
                    }
                    Some(w) => worst = Some(w),
                }
            }
            if !found {
                let w = worst.expect("schedule has at least one radius");
                return Ok(EquiregVerdict::Fail {
                    eps,
                    tau,
                    member: w.member,
                    t: w.t,
                    side: w.side,
                    deviation: w.deviation,
                });
            }
        }
    }
    Ok(EquiregVerdict::Pass { probes })
}

/// `None` when all members stay within `eps`; otherwise the largest offender.
fn worst_deviation(
    family: &[RegulatedFunction],
    tau: f64,
    r: f64,
    eps: f64,
    samples: usize,
) -> Option<Worst> {
    let (a, b) = family[0].domain();
    let mut worst: Option<Worst> = None;
    for (m, f) in family.iter().enumerate() {
        let left = f.limit_unchecked(tau, Side::Left);
        let right = f.limit_unchecked(tau, Side::Right);
        for k in 1..=samples {
            let s = r * k as f64 / (samples + 1) as f64;
            for (side, t, lim) in [(Side::Left, tau - s, left), (Side::Right, tau + s, right)] {
                if t <= a || t >= b {
                    continue;
                }
                let d = (f.eval(t) - lim).abs();
                if d >= eps && worst.as_ref().is_none_or(|w| d > w.deviation) {
                    worst = Some(Worst {
                        member: m,
                        t,
                        side,
                        deviation: d,
                    });
                }
            }
        }
    }
    worst
}

/// Piecewise-constant function: `gap_values[j]` on `(points[j], points[j+1])`
/// and `point_values[j]` at `points[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub points: Vec<f64>,
    pub gap_values: Vec<f64>,
    pub point_values: Vec<f64>,
}

impl StepFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self.points.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => self.point_values[i],
            Err(0) => self.point_values[0],
            Err(i) if i >= self.points.len() => self.point_values[self.points.len() - 1],
            Err(i) => self.gap_values[i - 1],
        }
    }

    /// Number of open gaps, i.e. maximal constant pieces after merging.
    pub fn pieces(&self) -> usize {
        self.gap_values.len()
    }

    /// Sampled sup distance to `f` on `n` uniform points plus the breakpoints.
    pub fn sup_distance(&self, f: &RegulatedFunction, n: usize) -> f64 {
        let (a, b) = f.domain();
        let uniform = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64);
        uniform
            .chain(self.points.iter().copied())
            .map(|t| (self.eval(t) - f.eval(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Step approximation of `f`, whose values lie in `range`, within `eps`.
///
/// The division comes from [`oscillation_division`] at `eps/2`; values are
/// snapped to the lattice `range.0 + k eps`, whose cells have radius `eps/2`.
pub fn step_net_approx(
    f: &RegulatedFunction,
    range: (f64, f64),
    eps: f64,
) -> Result<StepFunction, RegulatedError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(RegulatedError::InvalidEpsilon(eps));
    }
    let (lo, hi) = range;
    if !(lo <= hi) {
        return Err(RegulatedError::Invalid(format!("empty range [{lo}, {hi}]")));
    }
    let (a, b) = f.domain();
    let top = ((hi - lo) / eps).ceil().max(0.0);
    let snap = |v: f64| lo + eps * ((v - lo) / eps).round().clamp(0.0, top);
    let seed = Gauge::constant(a, b, b - a)?;
    let division = oscillation_division(std::slice::from_ref(f), 0.5 * eps, &seed)?;

    let mut points = vec![division[0]];
    let mut point_values = vec![snap(f.eval(division[0]))];
    let mut gap_values: Vec<f64> = Vec::new();
    for w in division.windows(2) {
        let g = snap(f.eval(0.5 * (w[0] + w[1])));
        let pv = snap(f.eval(w[1]));
        let last = points.len() - 1;
        // drop the previous breakpoint when nothing changes across it
        if last > 0 && gap_values[last - 1] == g && point_values[last] == g {
            points[last] = w[1];
            point_values[last] = pv;
        } else {
            gap_values.push(g);
            points.push(w[1]);
            point_values.push(pv);
        }
    }
    Ok(StepFunction {
        points,
        gap_values,
        point_values,
    })
}
