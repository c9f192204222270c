//! Gauges, tagged partitions and the Cousin bisection constructor.
//!
//! A gauge assigns every point `tau` of `[a, b]` a positive radius
//! `delta(tau)`. A tagged partition is delta-fine when every cell
//! `[l, r]` with tag `tau` sits inside the open window
//! `(tau - delta(tau), tau + delta(tau))`. Anchors are points that must
//! appear as tags; each carries its own radius which overrides the base
//! gauge at that point.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bisection depth cap, roughly where dyadic widths hit machine precision.
pub const DEFAULT_DEPTH_CAP: u32 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("partition has no cells")]
    Empty,
    #[error("partition does not tile [{a}, {b}]: {reason}")]
    NotTiling { a: f64, b: f64, reason: String },
    #[error("cell {index} is invalid: {reason}")]
    InvalidCell { index: usize, reason: String },
    #[error("invalid gauge: {0}")]
    InvalidGauge(String),
    #[error("gauge is not positive at {at} (value {value})")]
    NonPositiveGauge { at: f64, value: f64 },
    #[error("gauge too irregular: bisection exceeded depth {depth} near [{left}, {right}]")]
    GaugeTooIrregular { depth: u32, left: f64, right: f64 },
}

/// One cell of a tagged partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub left: f64,
    pub right: f64,
    pub tag: f64,
}

impl Cell {
    pub fn new(left: f64, right: f64, tag: f64) -> Self {
        Cell { left, right, tag }
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn is_left_tagged(&self) -> bool {
        self.tag == self.left
    }
}

/// `[left, right]` lies inside the open window of radius `delta` around `tag`.
#[inline]
pub fn cell_is_fine(left: f64, right: f64, tag: f64, delta: f64) -> bool {
    tag - delta < left && right < tag + delta
}

/// Where to put tags when a partition is built on a fixed grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagPosition {
    Left,
    Midpoint,
    Right,
}

/// Ordered cells tiling an interval `[a, b]`, each carrying a tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedPartition {
    cells: Vec<Cell>,
}

impl TaggedPartition {
    /// Validate and wrap `cells`. Cells must be contiguous, nondegenerate
    /// and carry their tag inside the closed cell.
    pub fn new(cells: Vec<Cell>) -> Result<Self, PartitionError> {
        if cells.is_empty() {
            return Err(PartitionError::Empty);
        }
        for (i, c) in cells.iter().enumerate() {
            if !(c.left.is_finite() && c.right.is_finite() && c.tag.is_finite()) {
                return Err(PartitionError::InvalidCell {
                    index: i,
                    reason: "non-finite coordinate".into(),
                });
            }
            if c.left >= c.right {
                return Err(PartitionError::InvalidCell {
                    index: i,
                    reason: format!("degenerate cell [{}, {}]", c.left, c.right),
                });
            }
            if c.tag < c.left || c.tag > c.right {
                return Err(PartitionError::InvalidCell {
                    index: i,
                    reason: format!("tag {} outside [{}, {}]", c.tag, c.left, c.right),
                });
            }
        }
        for (i, w) in cells.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(PartitionError::NotTiling {
                    a: cells[0].left,
                    b: cells[cells.len() - 1].right,
                    reason: format!(
                        "gap between cell {} (right {}) and cell {} (left {})",
                        i,
                        w[0].right,
                        i + 1,
                        w[1].left
                    ),
                });
            }
        }
        Ok(TaggedPartition { cells })
    }

    /// `n` equal cells of `[a, b]` with tags at the requested position.
    pub fn uniform(a: f64, b: f64, n: usize, tags: TagPosition) -> Result<Self, PartitionError> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(PartitionError::InvalidInterval { a, b });
        }
        if n == 0 {
            return Err(PartitionError::Empty);
        }
        let h = (b - a) / n as f64;
        let point = |i: usize| if i == n { b } else { a + h * i as f64 };
        let cells = (0..n)
            .map(|i| {
                let (l, r) = (point(i), point(i + 1));
                let tag = match tags {
                    TagPosition::Left => l,
                    TagPosition::Right => r,
                    TagPosition::Midpoint => 0.5 * (l + r),
                };
                Cell::new(l, r, tag)
            })
            .collect();
        TaggedPartition::new(cells)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.cells[0].left
    }

    pub fn end(&self) -> f64 {
        self.cells[self.cells.len() - 1].right
    }

    /// Largest cell width.
    pub fn mesh(&self) -> f64 {
        self.cells.iter().map(Cell::width).fold(0.0, f64::max)
    }

    /// Partition points `t_0 < t_1 < ... < t_n`.
    pub fn points(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.cells.len() + 1);
        pts.push(self.start());
        pts.extend(self.cells.iter().map(|c| c.right));
        pts
    }

    pub fn tags(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.tag)
    }

    /// Check that the partition tiles `[a, b]`.
    pub fn check_tiles(&self, a: f64, b: f64) -> Result<(), PartitionError> {
        if self.start() != a || self.end() != b {
            return Err(PartitionError::NotTiling {
                a,
                b,
                reason: format!("partition covers [{}, {}]", self.start(), self.end()),
            });
        }
        Ok(())
    }

    /// Index of the cell containing `t`; interior partition points belong to
    /// the cell on their left.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let i = self.cells.partition_point(|c| c.right < t);
        Some(i.min(self.cells.len() - 1))
    }
}

/// Base part of a gauge.
#[derive(Clone)]
pub enum GaugeBase {
    /// `delta = c` everywhere.
    Constant(f64),
    /// Pieces `(t0, t1, c)` tiling the interval; shared endpoints take the
    /// smaller value.
    Piecewise(Vec<(f64, f64, f64)>),
    /// `delta(tau) = min(cap, scale * |tau - center|^power)`. Vanishes at
    /// `center`, which must then be an anchor.
    Power {
        center: f64,
        scale: f64,
        power: f64,
        cap: f64,
    },
    /// Arbitrary callable; positivity is checked at every query.
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for GaugeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeBase::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            GaugeBase::Piecewise(p) => f.debug_tuple("Piecewise").field(p).finish(),
            GaugeBase::Power {
                center,
                scale,
                power,
                cap,
            } => f
                .debug_struct("Power")
                .field("center", center)
                .field("scale", scale)
                .field("power", power)
                .field("cap", cap)
                .finish(),
            GaugeBase::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl GaugeBase {
    fn eval(&self, tau: f64) -> f64 {
        match self {
            GaugeBase::Constant(c) => *c,
            GaugeBase::Piecewise(pieces) => pieces
                .iter()
                .filter(|(t0, t1, _)| *t0 <= tau && tau <= *t1)
                .map(|(_, _, c)| *c)
                .fold(f64::INFINITY, f64::min),
            GaugeBase::Power {
                center,
                scale,
                power,
                cap,
            } => (scale * (tau - center).abs().powf(*power)).min(*cap),
            GaugeBase::Function(f) => f(tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub at: f64,
    pub radius: f64,
}

/// A positive width function on `[a, b]` plus anchors that must appear as tags.
#[derive(Debug, Clone)]
pub struct Gauge {
    a: f64,
    b: f64,
    base: GaugeBase,
    anchors: Vec<Anchor>,
    scale: f64,
}

impl Gauge {
    pub fn new(a: f64, b: f64, base: GaugeBase) -> Result<Self, PartitionError> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(PartitionError::InvalidInterval { a, b });
        }
        match &base {
            GaugeBase::Constant(c) if !(*c > 0.0 && c.is_finite()) => {
                return Err(PartitionError::InvalidGauge(format!(
                    "constant gauge must be positive, got {c}"
                )));
            }
            GaugeBase::Piecewise(pieces) => check_pieces(a, b, pieces)?,
            GaugeBase::Power {
                scale, power, cap, ..
            } if !(*scale > 0.0 && *power >= 0.0 && *cap > 0.0) => {
                return Err(PartitionError::InvalidGauge(
                    "power gauge needs scale > 0, power >= 0, cap > 0".into(),
                ));
            }
            _ => {}
        }
        Ok(Gauge {
            a,
            b,
            base,
            anchors: Vec::new(),
            scale: 1.0,
        })
    }

    pub fn constant(a: f64, b: f64, c: f64) -> Result<Self, PartitionError> {
        Gauge::new(a, b, GaugeBase::Constant(c))
    }

    /// Add an anchor. Anchors are kept sorted; adding an existing point keeps
    /// the smaller radius.
    pub fn with_anchor(mut self, at: f64, radius: f64) -> Result<Self, PartitionError> {
        if !(self.a <= at && at <= self.b) {
            return Err(PartitionError::InvalidGauge(format!(
                "anchor {at} outside [{}, {}]",
                self.a, self.b
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PartitionError::InvalidGauge(format!(
                "anchor radius must be positive, got {radius}"
            )));
        }
        let radius = radius / self.scale;
        match self.anchors.binary_search_by(|p| p.at.total_cmp(&at)) {
            Ok(i) => self.anchors[i].radius = self.anchors[i].radius.min(radius),
            Err(i) => self.anchors.insert(i, Anchor { at, radius }),
        }
        Ok(self)
    }

    /// Add an anchor whose radius is the base gauge value at that point.
    pub fn with_default_anchor(self, at: f64) -> Result<Self, PartitionError> {
        let r = self.base.eval(at) * self.scale;
        let r = if r > 0.0 && r.is_finite() {
            r
        } else {
            (self.b - self.a) * self.scale
        };
        self.with_anchor(at, r)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn base(&self) -> &GaugeBase {
        &self.base
    }

    /// Anchors with their effective (scaled) radii.
    pub fn anchors(&self) -> Vec<Anchor> {
        self.anchors
            .iter()
            .map(|p| Anchor {
                at: p.at,
                radius: p.radius * self.scale,
            })
            .collect()
    }

    pub fn is_anchor(&self, tau: f64) -> bool {
        self.anchor_index(tau).is_some()
    }

    fn anchor_index(&self, tau: f64) -> Option<usize> {
        self.anchors.binary_search_by(|p| p.at.total_cmp(&tau)).ok()
    }

    /// Multiplier applied to base and anchor radii.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `delta(tau)`, with anchor radii overriding the base at anchor points.
    pub fn delta(&self, tau: f64) -> f64 {
        match self.anchor_index(tau) {
            Some(i) => self.anchors[i].radius * self.scale,
            None => self.base.eval(tau) * self.scale,
        }
    }

    fn checked_delta(&self, tau: f64) -> Result<f64, PartitionError> {
        let d = self.delta(tau);
        if d > 0.0 && !d.is_nan() {
            Ok(d)
        } else {
            Err(PartitionError::NonPositiveGauge { at: tau, value: d })
        }
    }

    /// Pointwise minimum of two gauges on the same interval, used to
    /// intersect a computed gauge with a seed.
    pub fn min_with(&self, other: &Gauge) -> Result<Gauge, PartitionError> {
        if self.interval() != other.interval() {
            return Err(PartitionError::InvalidGauge(
                "gauges live on different intervals".into(),
            ));
        }
        let (x, y) = (self.clone(), other.clone());
        let base = GaugeBase::Function(Arc::new(move |t| x.delta(t).min(y.delta(t))));
        let mut g = Gauge::new(self.a, self.b, base)?;
        for p in self.anchors().into_iter().chain(other.anchors()) {
            let r = self.delta(p.at).min(other.delta(p.at));
            g = g.with_anchor(p.at, r)?;
        }
        Ok(g)
    }
}

fn check_pieces(a: f64, b: f64, pieces: &[(f64, f64, f64)]) -> Result<(), PartitionError> {
    let bad = |m: String| Err(PartitionError::InvalidGauge(m));
    if pieces.is_empty() {
        return bad("piecewise gauge has no pieces".into());
    }
    for &(t0, t1, c) in pieces {
        if !(t0 < t1) {
            return bad(format!("piece [{t0}, {t1}] is empty"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return bad(format!("piece value {c} is not positive"));
        }
    }
    for w in pieces.windows(2) {
        if w[0].1 != w[1].0 {
            return bad(format!("pieces not contiguous at {} / {}", w[0].1, w[1].0));
        }
    }
    if pieces[0].0 > a || pieces[pieces.len() - 1].1 < b {
        return bad(format!("pieces do not cover [{a}, {b}]"));
    }
    Ok(())
}

/// Result of a delta-fineness check.
#[derive(Debug, Clone, PartialEq)]
pub struct FineCheck {
    pub fine: bool,
    /// First cell violating the window containment.
    pub first_violation: Option<usize>,
    /// Anchors that are not a tag of any cell.
    pub missing_anchors: Vec<f64>,
}

/// Check the partition against the gauge: every cell must sit inside the
/// window of its tag and every anchor must be a tag.
pub fn is_delta_fine(p: &TaggedPartition, g: &Gauge) -> Result<FineCheck, PartitionError> {
    p.check_tiles(g.a, g.b)?;
    let first_violation = p
        .cells()
        .iter()
        .position(|c| !cell_is_fine(c.left, c.right, c.tag, g.delta(c.tag)));
    let missing_anchors: Vec<f64> = g
        .anchors
        .iter()
        .map(|x| x.at)
        .filter(|&x| !p.cells().iter().any(|c| c.tag == x))
        .collect();
    Ok(FineCheck {
        fine: first_violation.is_none() && missing_anchors.is_empty(),
        first_violation,
        missing_anchors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagPolicy {
    /// Every non-anchor cell is tagged at its left endpoint.
    #[default]
    #[serde(alias = "left")]
    LeftTag,
    /// Tags may be the midpoint or either endpoint.
    #[serde(alias = "free")]
    FreeTag,
}

/// Build a delta-fine partition of the gauge interval by recursive bisection.
pub fn cousin_partition(g: &Gauge, policy: TagPolicy) -> Result<TaggedPartition, PartitionError> {
    cousin_partition_with_cap(g, policy, DEFAULT_DEPTH_CAP)
}

pub fn cousin_partition_with_cap(
    g: &Gauge,
    policy: TagPolicy,
    depth_cap: u32,
) -> Result<TaggedPartition, PartitionError> {
    let mut cells = Vec::new();
    for_each_cousin_cell(g, policy, depth_cap, |c| cells.push(c))?;
    TaggedPartition::new(cells)
}

/// Stream the cells of the Cousin partition in order without materializing it.
///
/// The interval is first split at every interior anchor. Each anchor is then
/// consumed as the left tag of the piece starting there; an anchor at `b`
/// becomes the right tag of the last cell.
pub fn for_each_cousin_cell<F: FnMut(Cell)>(
    g: &Gauge,
    policy: TagPolicy,
    depth_cap: u32,
    mut emit: F,
) -> Result<(), PartitionError> {
    let mut cuts = vec![g.a];
    cuts.extend(
        g.anchors
            .iter()
            .map(|p| p.at)
            .filter(|&t| g.a < t && t < g.b),
    );
    cuts.push(g.b);
    let last = cuts.len() - 2;
    for (i, w) in cuts.windows(2).enumerate() {
        let need_left = g.is_anchor(w[0]);
        let need_right = i == last && g.is_anchor(g.b);
        let mut b = Bisector {
            g,
            policy,
            cap: depth_cap,
            emit: &mut emit,
        };
        b.run(w[0], w[1], need_left, need_right, 0)?;
    }
    Ok(())
}

struct Bisector<'a, F> {
    g: &'a Gauge,
    policy: TagPolicy,
    cap: u32,
    emit: &'a mut F,
}

impl<F: FnMut(Cell)> Bisector<'_, F> {
    fn run(
        &mut self,
        lo: f64,
        hi: f64,
        need_left: bool,
        need_right: bool,
        depth: u32,
    ) -> Result<(), PartitionError> {
        if depth > self.cap {
            return Err(PartitionError::GaugeTooIrregular {
                depth: self.cap,
                left: lo,
                right: hi,
            });
        }
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            return Err(PartitionError::GaugeTooIrregular {
                depth,
                left: lo,
                right: hi,
            });
        }
        if need_left && need_right {
            self.run(lo, mid, true, false, depth + 1)?;
            return self.run(mid, hi, false, true, depth + 1);
        }
        let probes: &[f64] = if need_left {
            &[lo]
        } else if need_right {
            &[hi]
        } else {
            match self.policy {
                TagPolicy::LeftTag => &[lo],
                TagPolicy::FreeTag => &[mid, lo, hi],
            }
        };
        for &tau in probes {
            let d = self.g.checked_delta(tau)?;
            if cell_is_fine(lo, hi, tau, d) {
                (self.emit)(Cell::new(lo, hi, tau));
                return Ok(());
            }
        }
        self.run(lo, mid, need_left, false, depth + 1)?;
        self.run(mid, hi, false, need_right, depth + 1)
    }
}

/// Split every cell with an interior tag into two cells sharing that tag.
pub fn split_at_tags(p: &TaggedPartition) -> TaggedPartition {
    let mut cells = Vec::with_capacity(2 * p.len());
    for c in p.cells() {
        if c.left < c.tag && c.tag < c.right {
            cells.push(Cell::new(c.left, c.tag, c.tag));
            cells.push(Cell::new(c.tag, c.right, c.tag));
        } else {
            cells.push(*c);
        }
    }
    TaggedPartition { cells }
}

/// The `k`-th member of the refinement sequence: base and anchor radii
/// scaled by `2^-k`.
pub fn gauge_sequence(base: &Gauge, k: u32) -> Gauge {
    let mut g = base.clone();
    g.scale = base.scale * 0.5f64.powi(k as i32);
    g
}
