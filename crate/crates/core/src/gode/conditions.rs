//! Sampled checks of the regularity conditions on fields.
//!
//! Every check evaluates the inequality on a finite sample and reports the
//! worst margin `rhs - lhs`. A clean report is evidence, not a proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FieldError, ModulusFunction, TangentField};
use crate::integration::StepSchedule;
use crate::metric::{l2_distance, l2_norm, SpacePoint};
use crate::regulated::RegulatedFunction;

/// Margins below `-(REL_SLACK * max(|lhs|, |rhs|) + ABS_SLACK)` count as
/// violations; the slack absorbs rounding.
const REL_SLACK: f64 = 1e-10;
const ABS_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub t: f64,
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub checked: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` seen.
    pub worst_margin: f64,
    /// The sample attaining the worst margin.
    pub witness: Option<Witness>,
}

impl ConditionReport {
    fn new(condition: &str) -> Self {
        ConditionReport {
            condition: condition.into(),
            checked: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            witness: None,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, witness: impl FnOnce() -> Witness) {
        self.checked += 1;
        let margin = rhs - lhs;
        let slack = REL_SLACK * lhs.abs().max(rhs.abs()) + ABS_SLACK;
        if margin < -slack || margin.is_nan() {
            self.violations += 1;
        }
        if margin < self.worst_margin || (margin.is_nan() && !self.worst_margin.is_nan()) {
            self.worst_margin = margin;
            let mut w = witness();
            w.lhs = lhs;
            w.rhs = rhs;
            self.witness = Some(w);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Space samples and time pairs for [`check_class_f`].
#[derive(Debug, Clone, Default)]
pub struct ClassFSamples {
    pub xs: Vec<Vec<f64>>,
    /// All pairs of these times are checked.
    pub times: Vec<f64>,
    /// Extra `(t, s)` pairs, e.g. clustered near a suspected singularity.
    pub pairs: Vec<(f64, f64)>,
}

impl ClassFSamples {
    fn time_pairs(&self) -> Vec<(f64, f64)> {
        let mut out = self.pairs.clone();
        for (i, &t) in self.times.iter().enumerate() {
            for &s in &self.times[i + 1..] {
                out.push((t, s));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFReport {
    /// `||G(x,t) - G(x,s)|| <= |h(t) - h(s)|`
    pub f1: ConditionReport,
    /// `||G(x,t) - G(x,s) - G(y,t) + G(y,s)|| <= omega(||x - y||) |h(t) - h(s)|`
    pub f2: ConditionReport,
}

impl ClassFReport {
    pub fn passed(&self) -> bool {
        self.f1.passed() && self.f2.passed()
    }
}

/// Sample the class conditions for a right-hand side `G(x, t)`.
pub fn check_class_f<G>(
    g: G,
    h: &RegulatedFunction,
    omega: &ModulusFunction,
    samples: &ClassFSamples,
) -> ClassFReport
where
    G: Fn(&[f64], f64) -> Vec<f64>,
{
    let pairs = samples.time_pairs();
    let mut f1 = ConditionReport::new("F1");
    let mut f2 = ConditionReport::new("F2");
    let diff = |x: &[f64], t: f64, s: f64| -> Vec<f64> {
        g(x, t).iter().zip(g(x, s)).map(|(a, b)| a - b).collect()
    };
    for &(t, s) in &pairs {
        let dh = (h.eval(t) - h.eval(s)).abs();
        let diffs: Vec<Vec<f64>> = samples.xs.iter().map(|x| diff(x, t, s)).collect();
        for (i, x) in samples.xs.iter().enumerate() {
            f1.record(l2_norm(&diffs[i]), dh, || Witness {
                x: x.clone(),
                y: None,
                tau: None,
                sigma: None,
                t,
                s,
                lhs: 0.0,
                rhs: 0.0,
            });
            for (j, y) in samples.xs.iter().enumerate().skip(i + 1) {
                let lhs = l2_distance(&diffs[i], &diffs[j]);
                let rhs = omega.eval(l2_distance(x, y)) * dh;
                f2.record(lhs, rhs, || Witness {
                    x: x.clone(),
                    y: Some(y.clone()),
                    tau: None,
                    sigma: None,
                    t,
                    s,
                    lhs: 0.0,
                    rhs: 0.0,
                });
            }
        }
    }
    ClassFReport { f1, f2 }
}

/// Random tuples drawn from the given points and times.
#[derive(Debug, Clone)]
pub struct WeakClassSamples {
    pub points: Vec<SpacePoint>,
    pub times: Vec<f64>,
    pub tuples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakClassReport {
    /// `|F(x,tau,t) - F(x,tau,s)| <= zeta(|h(t) - h(s)|)`
    pub time_regularity: ConditionReport,
    /// `|F(x,tau,t) - F(y,sigma,t)| <= |F(x,tau,s) - F(y,sigma,s)| + omega(|x-y| + |tau-sigma|) |xi(t) - xi(s)|`
    pub coupling: ConditionReport,
    /// Linear spaces only: the mixed difference
    /// `||F(x,tau,t) - F(y,sigma,t) - F(x,tau,s) + F(y,sigma,s)||` against the same bound.
    pub mixed_difference: Option<ConditionReport>,
}

impl WeakClassReport {
    pub fn passed(&self) -> bool {
        self.time_regularity.passed()
            && self.coupling.passed()
            && self.mixed_difference.as_ref().is_none_or(|r| r.passed())
    }
}

/// Sample the weak class conditions using the field's metadata
/// `h, zeta, xi, omega`. Half of the coupling tuples use `sigma = tau = s`,
/// which probes continuity in `x`.
pub fn check_weak_class(
    field: &TangentField,
    samples: &WeakClassSamples,
) -> Result<WeakClassReport, FieldError> {
    let meta = field.metadata();
    let h = meta.h.as_ref().ok_or(FieldError::MissingMetadata("h"))?;
    let zeta = meta
        .zeta
        .as_ref()
        .ok_or(FieldError::MissingMetadata("zeta"))?;
    let xi = meta.xi.as_ref().ok_or(FieldError::MissingMetadata("xi"))?;
    let omega = meta
        .omega
        .as_ref()
        .ok_or(FieldError::MissingMetadata("omega"))?;
    if samples.points.is_empty() || samples.times.is_empty() {
        return Err(FieldError::MissingMetadata("sample points and times"));
    }
    for p in &samples.points {
        field.space().check(p)?;
    }
    let space = field.space();
    let linear = space.is_linear();
    let mut rng = ChaCha8Rng::seed_from_u64(samples.seed);
    let pick_t = |rng: &mut ChaCha8Rng| samples.times[rng.gen_range(0..samples.times.len())];
    let pick_x = |rng: &mut ChaCha8Rng| &samples.points[rng.gen_range(0..samples.points.len())];

    let mut e2 = ConditionReport::new("time regularity");
    let mut e4 = ConditionReport::new("coupling");
    let mut mixed = ConditionReport::new("mixed difference");
    for n in 0..samples.tuples {
        let x = pick_x(&mut rng);
        let (tau, t, s) = (pick_t(&mut rng), pick_t(&mut rng), pick_t(&mut rng));
        let ft = field.eval(x, tau, t);
        let fs = field.eval(x, tau, s);
        e2.record(
            space.distance_unchecked(&ft, &fs),
            zeta.eval((h.eval(t) - h.eval(s)).abs()),
            || Witness {
                x: x.coords().to_vec(),
                y: None,
                tau: Some(tau),
                sigma: None,
                t,
                s,
                lhs: 0.0,
                rhs: 0.0,
            },
        );

        let y = pick_x(&mut rng);
        let (sigma, s) = if n % 2 == 0 {
            (tau, tau)
        } else {
            (pick_t(&mut rng), s)
        };
        let fs = field.eval(x, tau, s);
        let gt = field.eval(y, sigma, t);
        let gs = field.eval(y, sigma, s);
        let rhs = omega.eval(space.distance_unchecked(x, y) + (tau - sigma).abs())
            * (xi.eval(t) - xi.eval(s)).abs();
        let witness = || Witness {
            x: x.coords().to_vec(),
            y: Some(y.coords().to_vec()),
            tau: Some(tau),
            sigma: Some(sigma),
            t,
            s,
            lhs: 0.0,
            rhs: 0.0,
        };
        let lhs = space.distance_unchecked(&ft, &gt) - space.distance_unchecked(&fs, &gs);
        e4.record(lhs, rhs, witness);
        if linear {
            let m: Vec<f64> = (0..ft.coords().len())
                .map(|d| ft.coords()[d] - gt.coords()[d] - fs.coords()[d] + gs.coords()[d])
                .collect();
            mixed.record(l2_norm(&m), rhs, witness);
        }
    }
    Ok(WeakClassReport {
        time_regularity: e2,
        coupling: e4,
        mixed_difference: linear.then_some(mixed),
    })
}

/// One-sided limit estimate along a halving step sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    /// Raw values at steps `2^-j (b - a)`, finest last.
    pub values: Vec<f64>,
    /// Minimum over the tail of the Richardson-extrapolated values
    /// `2 d_{j+1} - d_j`, which removes a first-order error in the step.
    pub liminf: f64,
    /// Running minimum of the raw tail.
    pub raw_min: f64,
}

fn estimate(values: Vec<f64>, tail: usize) -> Option<LimitEstimate> {
    if values.is_empty() {
        return None;
    }
    let start = values.len().saturating_sub(tail);
    let raw_min = values[start..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let extrapolated: Vec<f64> = values.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let liminf = if extrapolated.is_empty() {
        raw_min
    } else {
        let start = extrapolated.len().saturating_sub(tail);
        extrapolated[start..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    Some(LimitEstimate {
        values,
        liminf,
        raw_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UPairReport {
    pub tau: f64,
    pub distance: f64,
    /// `liminf_{t -> tau-} |F(x,tau,t) - F(y,tau,t)| - |x - y|`, must be `>= 0`.
    pub u1: Option<LimitEstimate>,
    pub u1_pass: bool,
    /// `liminf_{t -> tau+} (|F(x,tau,t) - F(y,tau,t)| - |x - y|) / (xi(t) - xi(tau))`,
    /// must be `<= omega(|x - y|)`.
    pub u2: Option<LimitEstimate>,
    pub u2_bound: Option<f64>,
    pub u2_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UReport {
    pub pairs: Vec<UPairReport>,
    pub u1_pass: bool,
    /// `None` when the field carries no `xi`, `omega`.
    pub u2_pass: Option<bool>,
}

/// Sample the one-sided uniqueness conditions at `(x, y, tau)` triples.
pub fn check_u_conditions(
    field: &TangentField,
    pairs: &[(SpacePoint, SpacePoint, f64)],
    interval: (f64, f64),
    schedule: StepSchedule,
    tol: f64,
) -> Result<UReport, FieldError> {
    let (a, b) = interval;
    let space = field.space();
    let meta = field.metadata();
    let u2_data = meta.xi.as_ref().zip(meta.omega.as_ref());
    let mut out = Vec::with_capacity(pairs.len());
    for (x, y, tau) in pairs {
        space.check(x)?;
        space.check(y)?;
        let tau = *tau;
        let dxy = space.distance_unchecked(x, y);
        let gap =
            |t: f64| space.distance_unchecked(&field.eval(x, tau, t), &field.eval(y, tau, t)) - dxy;
        let steps = (schedule.j_min..=schedule.j_max).map(|j| (b - a) * 2f64.powi(-j));
        let left: Vec<f64> = steps
            .clone()
            .map(|h| tau - h)
            .filter(|t| *t >= a)
            .map(gap)
            .collect();
        let u1 = estimate(left, schedule.tail);
        let u1_pass = u1.as_ref().is_none_or(|e| e.liminf >= -tol);
        let (u2, u2_bound, u2_pass) = match u2_data {
            Some((xi, omega)) => {
                let xi_tau = xi.eval(tau);
                let right: Vec<f64> = steps
                    .map(|h| tau + h)
                    .filter(|t| *t <= b)
                    .map(|t| gap(t) / (xi.eval(t) - xi_tau))
                    .collect();
                let bound = omega.eval(dxy);
                let est = estimate(right, schedule.tail);
                let pass = est.as_ref().is_none_or(|e| e.liminf <= bound + tol);
                (est, Some(bound), Some(pass))
            }
            None => (None, None, None),
        };
        out.push(UPairReport {
            tau,
            distance: dxy,
            u1,
            u1_pass,
            u2,
            u2_bound,
            u2_pass,
        });
    }
    let u1_pass = out.iter().all(|p| p.u1_pass);
    let u2_pass = u2_data.map(|_| out.iter().all(|p| p.u2_pass == Some(true)));
    Ok(UReport {
        pairs: out,
        u1_pass,
        u2_pass,
    })
}
