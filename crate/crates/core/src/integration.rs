//! Strong Henstock-Kurzweil defect sums, a refinement-based Stieltjes
//! evaluator and the monotonically-controlled (MC) limit verifier.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::l2_norm;
use crate::partition::{
    for_each_cousin_cell, gauge_sequence, Gauge, PartitionError, TagPolicy, TaggedPartition,
    DEFAULT_DEPTH_CAP,
};
use crate::regulated::RegulatedFunction;
use crate::ScalarFn;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("non-finite {what} in cell {cell}")]
    NonFinite { cell: usize, what: &'static str },
    #[error("dimension mismatch: integrand has {integrand}, path has {path}")]
    DimensionMismatch { integrand: usize, path: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("max level must be at least 1")]
    NoLevels,
    #[error("control function is constant between {tau} and {t}")]
    DegenerateControl { tau: f64, t: f64 },
    #[error("check point {0} outside [{1}, {2}]")]
    OutOfDomain(f64, f64, f64),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

type CoupledFn = Arc<dyn Fn(f64, f64, &mut [f64]) + Send + Sync>;

/// A vector-valued integrand `U(tau, t)`; `eval(tau, t, out)` writes the value.
#[derive(Clone)]
pub struct CoupledIntegrand {
    eval: CoupledFn,
    dim: usize,
}

impl fmt::Debug for CoupledIntegrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoupledIntegrand")
            .field("dim", &self.dim)
            .finish()
    }
}

impl CoupledIntegrand {
    pub fn new(dim: usize, f: impl Fn(f64, f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        CoupledIntegrand {
            eval: Arc::new(f),
            dim,
        }
    }

    pub fn scalar(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CoupledIntegrand::new(1, move |tau, t, out| out[0] = f(tau, t))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval_into(&self, tau: f64, t: f64, out: &mut [f64]) {
        (self.eval)(tau, t, out)
    }
}

/// An increasing function `xi` dominating the local defects in the MC sense.
#[derive(Clone)]
pub struct ControlFunction {
    eval: ScalarFn,
    pub declared_increasing: bool,
}

impl fmt::Debug for ControlFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlFunction")
            .field("declared_increasing", &self.declared_increasing)
            .finish()
    }
}

impl ControlFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ControlFunction {
            eval: Arc::new(f),
            declared_increasing: true,
        }
    }

    /// `xi(t) = t`
    pub fn identity() -> Self {
        ControlFunction::new(|t| t)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// Strictly increasing on `n + 1` uniform points of `[a, b]`.
    pub fn is_increasing_sampled(&self, a: f64, b: f64, n: usize) -> bool {
        let mut prev = self.eval(a);
        (1..=n).all(|i| {
            let v = self.eval(a + (b - a) * i as f64 / n as f64);
            let ok = v > prev;
            prev = v;
            ok
        })
    }
}

/// `sum_i || u(t_i) - u(t_{i-1}) - U(tau_i, t_i) + U(tau_i, t_{i-1}) ||_2`
pub fn shk_defect<P>(
    mut u: P,
    integrand: &CoupledIntegrand,
    p: &TaggedPartition,
) -> Result<f64, IntegrationError>
where
    P: FnMut(f64, &mut [f64]),
{
    let dim = integrand.dim;
    let mut u_prev = vec![0.0; dim];
    let mut u_next = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    let mut lo = vec![0.0; dim];
    let mut term = vec![0.0; dim];
    u(p.start(), &mut u_prev);
    if u_prev.iter().any(|v| !v.is_finite()) {
        return Err(IntegrationError::NonFinite {
            cell: 0,
            what: "path value",
        });
    }
    let mut total = 0.0;
    for (i, c) in p.cells().iter().enumerate() {
        u(c.right, &mut u_next);
        integrand.eval_into(c.tag, c.right, &mut hi);
        integrand.eval_into(c.tag, c.left, &mut lo);
        if u_next.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFinite {
                cell: i,
                what: "path value",
            });
        }
        if hi.iter().chain(&lo).any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFinite {
                cell: i,
                what: "integrand value",
            });
        }
        for d in 0..dim {
            term[d] = u_next[d] - u_prev[d] - hi[d] + lo[d];
        }
        total += l2_norm(&term);
        std::mem::swap(&mut u_prev, &mut u_next);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSum {
    pub k: u32,
    pub mesh: f64,
    pub cells: usize,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StieltjesReport {
    /// The last computed sum.
    pub value: f64,
    pub converged: bool,
    pub levels: Vec<LevelSum>,
}

/// Options for [`shk_stieltjes`].
#[derive(Debug, Clone)]
pub struct StieltjesOptions {
    /// Base gauge; defaults to the constant `b - a`. Jump points of the
    /// integrator are always added as anchors.
    pub gauge: Option<Gauge>,
    pub tol: f64,
    pub max_level: u32,
    pub policy: TagPolicy,
}

impl Default for StieltjesOptions {
    fn default() -> Self {
        StieltjesOptions {
            gauge: None,
            tol: 1e-9,
            max_level: 12,
            policy: TagPolicy::FreeTag,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// One Riemann-Stieltjes sum `sum_i f(tau_i) (g(t_i) - g(t_{i-1}))` over the
/// Cousin partition of `gauge`, streamed cell by cell.
///
/// The sum is rearranged by parts as
/// `f(tau_n) g(b) - f(tau_1) g(a) - sum_{i<n} g(t_i) (f(tau_{i+1}) - f(tau_i))`,
/// so a constant `f` gives `c (g(b) - g(a))` without rounding drift.
pub fn stieltjes_sum<F>(
    mut f: F,
    g: &RegulatedFunction,
    gauge: &Gauge,
    policy: TagPolicy,
) -> Result<LevelSum, IntegrationError>
where
    F: FnMut(f64) -> f64,
{
    let (a, b) = gauge.interval();
    let mut inner = Compensated::default();
    let mut first: Option<f64> = None;
    let mut prev_f = 0.0;
    let mut cells = 0usize;
    let mut mesh = 0.0f64;
    let mut bad: Option<usize> = None;
    for_each_cousin_cell(gauge, policy, DEFAULT_DEPTH_CAP, |c| {
        let fv = f(c.tag);
        if !fv.is_finite() && bad.is_none() {
            bad = Some(cells);
        }
        match first {
            None => first = Some(fv),
            Some(_) => inner.add(g.eval(c.left) * (fv - prev_f)),
        }
        prev_f = fv;
        cells += 1;
        mesh = mesh.max(c.width());
    })?;
    if let Some(cell) = bad {
        return Err(IntegrationError::NonFinite {
            cell,
            what: "integrand value",
        });
    }
    let f1 = first.unwrap_or(0.0);
    let mut total = Compensated::default();
    if prev_f == f1 {
        total.add(f1 * (g.eval(b) - g.eval(a)));
    } else {
        total.add(prev_f * g.eval(b));
        total.add(-f1 * g.eval(a));
    }
    total.add(-inner.value());
    Ok(LevelSum {
        k: 0,
        mesh,
        cells,
        sum: total.value(),
    })
}

/// Stieltjes-Henstock-Kurzweil integral of `f` against the regulated `g`
/// along the refinement sequence `k = 1..=max_level`.
///
/// Stops once two successive levels differ by less than `tol`; otherwise the
/// report comes back with `converged = false` and every level computed.
pub fn shk_stieltjes<F>(
    f: F,
    g: &RegulatedFunction,
    opts: &StieltjesOptions,
) -> Result<StieltjesReport, IntegrationError>
where
    F: Fn(f64) -> f64,
{
    if !(opts.tol > 0.0) {
        return Err(IntegrationError::InvalidTolerance(opts.tol));
    }
    if opts.max_level == 0 {
        return Err(IntegrationError::NoLevels);
    }
    let (a, b) = g.domain();
    let mut base = match &opts.gauge {
        Some(gauge) => gauge.clone(),
        None => Gauge::constant(a, b, b - a)?,
    };
    for t in g.jump_points() {
        base = base.with_default_anchor(t)?;
    }
    let mut levels: Vec<LevelSum> = Vec::new();
    for k in 1..=opts.max_level {
        let mut s = stieltjes_sum(&f, g, &gauge_sequence(&base, k), opts.policy)?;
        s.k = k;
        let done = levels
            .last()
            .is_some_and(|prev| (s.sum - prev.sum).abs() < opts.tol);
        levels.push(s);
        if done {
            return Ok(StieltjesReport {
                value: levels[levels.len() - 1].sum,
                converged: true,
                levels,
            });
        }
    }
    Ok(StieltjesReport {
        value: levels[levels.len() - 1].sum,
        converged: false,
        levels,
    })
}

/// Signed steps `+-2^-j (b - a)`, `j = j_min..=j_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub j_min: i32,
    pub j_max: i32,
    /// How many of the finest quotients must lie below the tolerance.
    pub tail: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule {
            j_min: 4,
            j_max: 20,
            tail: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quotient {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McPointReport {
    pub tau: f64,
    pub pass: bool,
    /// First tail quotient at or above the tolerance.
    pub witness: Option<Quotient>,
    pub left: Vec<Quotient>,
    pub right: Vec<Quotient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub pass: bool,
    pub points: Vec<McPointReport>,
}

/// Check the MC limit
/// `||u(t) - u(tau) - U(tau, t) + U(tau, tau)|| / |xi(t) - xi(tau)| -> 0`
/// at each `tau` along the step schedule on both sides.
///
/// A point passes when the finest `schedule.tail` quotients on each
/// available side are below `tol`.
pub fn mc_verify<P>(
    mut u: P,
    integrand: &CoupledIntegrand,
    xi: &ControlFunction,
    interval: (f64, f64),
    check_points: &[f64],
    schedule: StepSchedule,
    tol: f64,
) -> Result<McReport, IntegrationError>
where
    P: FnMut(f64, &mut [f64]),
{
    if !(tol > 0.0) {
        return Err(IntegrationError::InvalidTolerance(tol));
    }
    let (a, b) = interval;
    let dim = integrand.dim;
    let mut u_tau = vec![0.0; dim];
    let mut u_t = vec![0.0; dim];
    let mut base = vec![0.0; dim];
    let mut val = vec![0.0; dim];
    let mut term = vec![0.0; dim];
    let mut points = Vec::with_capacity(check_points.len());
    for &tau in check_points {
        if !(a <= tau && tau <= b) {
            return Err(IntegrationError::OutOfDomain(tau, a, b));
        }
        u(tau, &mut u_tau);
        integrand.eval_into(tau, tau, &mut base);
        let xi_tau = xi.eval(tau);
        let mut sides: [Vec<Quotient>; 2] = [Vec::new(), Vec::new()];
        for (side, sign) in [(0usize, -1.0), (1, 1.0)] {
            for j in schedule.j_min..=schedule.j_max {
                let t = (tau + sign * (b - a) * 2f64.powi(-j)).clamp(a, b);
                if t == tau {
                    continue;
                }
                let dxi = (xi.eval(t) - xi_tau).abs();
                if !(dxi > 0.0) {
                    return Err(IntegrationError::DegenerateControl { tau, t });
                }
                u(t, &mut u_t);
                integrand.eval_into(tau, t, &mut val);
                for d in 0..dim {
                    term[d] = u_t[d] - u_tau[d] - val[d] + base[d];
                }
                sides[side].push(Quotient {
                    t,
                    value: l2_norm(&term) / dxi,
                });
            }
        }
        let mut witness = None;
        for q in &sides {
            let start = q.len().saturating_sub(schedule.tail);
            if let Some(w) = q[start..].iter().find(|x| !(x.value < tol)) {
                witness.get_or_insert_with(|| w.clone());
            }
        }
        let [left, right] = sides;
        points.push(McPointReport {
            tau,
            pass: witness.is_none(),
            witness,
            left,
            right,
        });
    }
    Ok(McReport {
        pass: points.iter().all(|p| p.pass),
        points,
    })
}
