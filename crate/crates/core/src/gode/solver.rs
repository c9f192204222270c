//! Tangent-curve Euler construction of approximate solutions.
//!
//! On each cell `[t_{j-1}, t_j]` with tag `tau_j` the approximate solution
//! follows the tangent curve `t -> F(y, tau_j, t)` through the point `y`
//! that makes it pass through the previous node: `F(y, tau_j, t_{j-1}) =
//! v(t_{j-1})`. With left tags this is simply `y = v(t_{j-1})`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FieldError, TangentField};
use crate::metric::{l2_norm, MetricError, SpacePoint};
use crate::partition::{
    cousin_partition, gauge_sequence, Cell, Gauge, PartitionError, TagPolicy, TaggedPartition,
};
use crate::regulated::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("trajectory leaves the domain at t = {t}")]
    DomainEscape { t: f64 },
    #[error("backward solve failed in cell {cell} (tag {tag}): residual {residual} after {iterations} iterations")]
    BackwardSolveFailed {
        cell: usize,
        tag: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// How the level-`k` partition is produced.
#[derive(Debug, Clone, Default)]
pub enum PartitionScheme {
    /// Cousin partition of the constant gauge `b - a`, scaled by `2^-k`.
    #[default]
    ConstantGauge,
    /// Cousin partition of the given gauge, scaled by `2^-k`.
    Gauge(Gauge),
    /// `cells * 2^(k-1)` equal cells, split further at jump points.
    Uniform { cells: usize },
}

/// Damped fixed-point iteration for `F(y, tau, s) = target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackwardSolve {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
}

impl Default for BackwardSolve {
    fn default() -> Self {
        BackwardSolve {
            max_iter: 100,
            tol: 1e-13,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Containment radius around `x1 = F(x0, a, a+)`.
    pub lambda: f64,
    pub levels: u32,
    pub tol: f64,
    pub tag_policy: TagPolicy,
    pub scheme: PartitionScheme,
    pub backward: BackwardSolve,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            lambda: 1.0,
            levels: 8,
            tol: 1e-9,
            tag_policy: TagPolicy::LeftTag,
            scheme: PartitionScheme::ConstantGauge,
            backward: BackwardSolve::default(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidSettings(m.into()));
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if self.levels == 0 {
            return bad("levels must be at least 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if let PartitionScheme::Uniform { cells: 0 } = self.scheme {
            return bad("uniform scheme needs at least one cell");
        }
        Ok(())
    }
}

/// An approximate solution: nodes at the partition points and, per cell,
/// the point whose tangent curve the solution follows.
#[derive(Debug, Clone)]
pub struct Trajectory {
    field: TangentField,
    partition: TaggedPartition,
    nodes: Vec<SpacePoint>,
    curve_points: Vec<SpacePoint>,
}

impl Trajectory {
    pub fn partition(&self) -> &TaggedPartition {
        &self.partition
    }

    /// Values at `partition().points()`.
    pub fn nodes(&self) -> &[SpacePoint] {
        &self.nodes
    }

    /// Per cell, the `y` with `v(t) = F(y, tau_j, t)` on that cell.
    pub fn curve_points(&self) -> &[SpacePoint] {
        &self.curve_points
    }

    pub fn final_state(&self) -> &SpacePoint {
        &self.nodes[self.nodes.len() - 1]
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.partition.start(), self.partition.end())
    }

    /// `v(t)`; times outside the interval are clamped. Partition points
    /// return their node, other times the segment of the containing cell.
    pub fn eval(&self, t: f64) -> SpacePoint {
        let (a, b) = self.interval();
        let t = t.clamp(a, b);
        let cells = self.partition.cells();
        let i = cells.partition_point(|c| c.right < t);
        if i == 0 && t == a {
            return self.nodes[0].clone();
        }
        let i = i.min(cells.len() - 1);
        if cells[i].right == t {
            return self.nodes[i + 1].clone();
        }
        self.field.eval(&self.curve_points[i], cells[i].tag, t)
    }
}

fn backward_solve(
    field: &TangentField,
    target: &SpacePoint,
    tag: f64,
    s: f64,
    opts: BackwardSolve,
    cell: usize,
) -> Result<SpacePoint, SolverError> {
    let space = field.space();
    let mut y = target.clone();
    let mut theta = opts.damping;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let r = space.displacement(&field.eval(&y, tag, s), target);
        let norm = l2_norm(&r);
        if !norm.is_finite() {
            break;
        }
        if norm <= opts.tol {
            return Ok(y);
        }
        if norm > residual {
            theta *= 0.5;
        }
        residual = norm;
        y = space.offset(&y, &r, theta);
    }
    Err(SolverError::BackwardSolveFailed {
        cell,
        tag,
        residual,
        iterations: opts.max_iter,
    })
}

/// Chain tangent curves along `p` starting from `x0` at `p.start()`.
pub fn solve_on_partition(
    field: &TangentField,
    x0: &SpacePoint,
    p: &TaggedPartition,
    backward: BackwardSolve,
) -> Result<Trajectory, SolverError> {
    field.space().check(x0)?;
    if !field.in_domain(x0) {
        return Err(SolverError::DomainEscape { t: p.start() });
    }
    let mut nodes = Vec::with_capacity(p.len() + 1);
    let mut curve_points = Vec::with_capacity(p.len());
    nodes.push(x0.clone());
    for (j, c) in p.cells().iter().enumerate() {
        let prev = &nodes[j];
        let y = if c.tag == c.left {
            prev.clone()
        } else {
            backward_solve(field, prev, c.tag, c.left, backward, j)?
        };
        if !field.in_domain(&y) {
            return Err(SolverError::DomainEscape { t: c.tag });
        }
        let next = field.eval(&y, c.tag, c.right);
        if !field.in_domain(&next) {
            return Err(SolverError::DomainEscape { t: c.right });
        }
        curve_points.push(y);
        nodes.push(next);
    }
    Ok(Trajectory {
        field: field.clone(),
        partition: p.clone(),
        nodes,
        curve_points,
    })
}

fn defect_terms<U>(
    mut u: U,
    field: &TangentField,
    p: &TaggedPartition,
    mut combine: impl FnMut(f64, f64) -> f64,
) -> Result<f64, SolverError>
where
    U: FnMut(f64) -> SpacePoint,
{
    let space = field.space();
    let mut left_val = u(p.start());
    let mut total = 0.0;
    for c in p.cells() {
        let at_tag = if c.tag == c.left {
            left_val.clone()
        } else {
            u(c.tag)
        };
        if !field.in_domain(&at_tag) {
            return Err(SolverError::DomainEscape { t: c.tag });
        }
        let right_val = u(c.right);
        let to_right = space.distance_unchecked(&right_val, &field.eval(&at_tag, c.tag, c.right));
        let to_left = space.distance_unchecked(&left_val, &field.eval(&at_tag, c.tag, c.left));
        total += combine(to_right, to_left);
        left_val = right_val;
    }
    Ok(total)
}

/// `sum_i ( |u(t_i) - F(u(tau_i), tau_i, t_i)| + |u(t_{i-1}) - F(u(tau_i), tau_i, t_{i-1})| )`
pub fn solution_defect<U>(
    u: U,
    field: &TangentField,
    p: &TaggedPartition,
) -> Result<f64, SolverError>
where
    U: FnMut(f64) -> SpacePoint,
{
    defect_terms(u, field, p, |r, l| r + l)
}

/// `sum_i | |u(t_i) - F(u(tau_i), tau_i, t_i)| - |u(t_{i-1}) - F(u(tau_i), tau_i, t_{i-1})| |`
pub fn solution_defect_minus<U>(
    u: U,
    field: &TangentField,
    p: &TaggedPartition,
) -> Result<f64, SolverError>
where
    U: FnMut(f64) -> SpacePoint,
{
    defect_terms(u, field, p, |r, l| (r - l).abs())
}

/// Partition used at refinement level `k >= 1`. The start `a` and every
/// jump point of the field's metadata inside `[a, b]` are tags.
pub fn level_partition(
    field: &TangentField,
    interval: (f64, f64),
    settings: &SolverSettings,
    k: u32,
) -> Result<TaggedPartition, SolverError> {
    let (a, b) = interval;
    let jumps: Vec<f64> = field
        .metadata()
        .jump_points
        .iter()
        .copied()
        .filter(|t| a <= *t && *t <= b)
        .collect();
    let base = match &settings.scheme {
        PartitionScheme::Uniform { cells } => {
            return Ok(uniform_with_jumps(
                a,
                b,
                cells << (k - 1),
                &jumps,
                settings.tag_policy,
            )?)
        }
        PartitionScheme::ConstantGauge => Gauge::constant(a, b, b - a)?,
        PartitionScheme::Gauge(g) => {
            if g.interval() != (a, b) {
                return Err(SolverError::InvalidSettings(format!(
                    "gauge lives on {:?}, solve interval is {:?}",
                    g.interval(),
                    (a, b)
                )));
            }
            g.clone()
        }
    };
    let mut g = base.with_default_anchor(a)?;
    for t in jumps {
        g = g.with_default_anchor(t)?;
    }
    Ok(cousin_partition(
        &gauge_sequence(&g, k),
        settings.tag_policy,
    )?)
}

fn uniform_with_jumps(
    a: f64,
    b: f64,
    n: usize,
    jumps: &[f64],
    policy: TagPolicy,
) -> Result<TaggedPartition, PartitionError> {
    let mut pts: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    pts[n] = b;
    pts.extend(jumps.iter().copied());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let cells = pts
        .windows(2)
        .map(|w| {
            let (l, r) = (w[0], w[1]);
            let tag = if l == a || jumps.contains(&l) {
                l
            } else if r == b && jumps.contains(&b) {
                b
            } else {
                match policy {
                    TagPolicy::LeftTag => l,
                    TagPolicy::FreeTag => 0.5 * (l + r),
                }
            };
            Cell::new(l, r, tag)
        })
        .collect();
    TaggedPartition::new(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub k: u32,
    pub cells: usize,
    pub mesh: f64,
    /// Defect of this level's trajectory measured on the next level's partition.
    pub defect: f64,
    pub final_state: SpacePoint,
}

/// Ball containment diagnostics of the construction around
/// `x1 = F(x0, a, a+)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub x1: SpacePoint,
    pub lambda: f64,
    /// `omega(3 lambda + |x0 - x1|)`.
    pub k: f64,
    /// Last node time up to which the time-regularity thresholds
    /// `zeta(|h(a+) - h(t)|) < lambda/10` and `|xi(a+) - xi(t)| < lambda/(2K)` hold.
    pub horizon: f64,
    /// `max |x1 - v(t)|` over nodes in `(a, horizon]`.
    pub max_distance: f64,
    pub contained: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub accepted_level: Option<u32>,
    pub levels: Vec<LevelReport>,
    /// Trajectory of the accepted level, or of the last level tried.
    pub trajectory: Trajectory,
    pub containment: Option<ContainmentReport>,
}

/// Solve on refinement levels `1..=settings.levels` and accept the first
/// level whose defect, measured on the next finer partition, is below
/// `settings.tol`.
pub fn solve_tangent_euler(
    field: &TangentField,
    x0: &SpacePoint,
    interval: (f64, f64),
    settings: &SolverSettings,
) -> Result<SolveReport, SolverError> {
    settings.validate()?;
    let (a, b) = interval;
    if !(a < b && a.is_finite() && b.is_finite()) {
        return Err(SolverError::InvalidSettings(format!(
            "empty interval [{a}, {b}]"
        )));
    }
    let mut levels = Vec::new();
    let mut current = level_partition(field, interval, settings, 1)?;
    let mut accepted = None;
    let mut last = None;
    for k in 1..=settings.levels {
        let traj = solve_on_partition(field, x0, &current, settings.backward)?;
        let finer = level_partition(field, interval, settings, k + 1)?;
        let defect = solution_defect(|t| traj.eval(t), field, &finer)?;
        levels.push(LevelReport {
            k,
            cells: current.len(),
            mesh: current.mesh(),
            defect,
            final_state: traj.final_state().clone(),
        });
        last = Some(traj);
        if defect < settings.tol {
            accepted = Some(k);
            break;
        }
        current = finer;
    }
    let trajectory = last.expect("at least one level");
    let containment = containment_report(field, x0, &trajectory, settings.lambda);
    Ok(SolveReport {
        converged: accepted.is_some(),
        accepted_level: accepted,
        levels,
        trajectory,
        containment,
    })
}

/// Needs `omega` in the field metadata; `h`, `zeta` and `xi` narrow the horizon
/// when present.
pub fn containment_report(
    field: &TangentField,
    x0: &SpacePoint,
    traj: &Trajectory,
    lambda: f64,
) -> Option<ContainmentReport> {
    let meta = field.metadata();
    let omega = meta.omega.as_ref()?;
    let space = field.space();
    let (a, b) = traj.interval();
    let a_plus = a + (b - a) * 2f64.powi(-40);
    let x1 = field.eval(x0, a, a_plus);
    let k = omega.eval(3.0 * lambda + space.distance_unchecked(x0, &x1));
    let h_a = meta.h.as_ref().map(|h| h.limit_unchecked(a, Side::Right));
    let xi_a = meta.xi.as_ref().map(|xi| xi.eval(a_plus));
    let within = |t: f64| {
        let zeta_ok = match (&meta.h, &meta.zeta, h_a) {
            (Some(h), Some(z), Some(ha)) => z.eval((ha - h.eval(t)).abs()) < lambda / 10.0,
            _ => true,
        };
        let xi_ok = match (&meta.xi, xi_a) {
            (Some(xi), Some(xa)) => (xa - xi.eval(t)).abs() < lambda / (2.0 * k),
            _ => true,
        };
        t - a < lambda && zeta_ok && xi_ok
    };
    let mut horizon = a;
    let mut max_distance = 0.0f64;
    for (t, v) in traj.partition.points().into_iter().zip(&traj.nodes).skip(1) {
        if !within(t) {
            break;
        }
        horizon = t;
        max_distance = max_distance.max(space.distance_unchecked(&x1, v));
    }
    Some(ContainmentReport {
        x1,
        lambda,
        k,
        horizon,
        max_distance,
        contained: max_distance < lambda,
    })
}
