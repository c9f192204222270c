//! Osgood moduli and the `Psi = Phi(Delta) + 2 xi` separation monitor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ModulusFunction;
use crate::integration::ControlFunction;
use crate::metric::{MetricSpace, SpacePoint};
use crate::quadrature::{integrate_log_panels, QuadError, QuadOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OsgoodError {
    #[error("r must lie in (0, nu], got r = {r}, nu = {nu}")]
    InvalidRadius { r: f64, nu: f64 },
    #[error("nu must be positive, got {0}")]
    InvalidNu(f64),
    #[error("depth must be at least 1")]
    NoDepth,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        max_intervals: 4000,
    }
}

/// Signed `int_lo^hi ds / omega(s)` for positive `lo`, `hi`.
fn inverse_integral(omega: &ModulusFunction, lo: f64, hi: f64) -> Result<f64, QuadError> {
    let f = |s: f64| 1.0 / omega.eval(s);
    if lo <= hi {
        integrate_log_panels(f, lo, hi, quad_opts())
    } else {
        integrate_log_panels(f, hi, lo, quad_opts()).map(|v| -v)
    }
}

/// `Phi(r) = int_r^nu ds / omega(s)` for `0 < r <= nu`.
pub fn phi(omega: &ModulusFunction, nu: f64, r: f64) -> Result<f64, OsgoodError> {
    if !(r > 0.0 && r <= nu) {
        return Err(OsgoodError::InvalidRadius { r, nu });
    }
    Ok(inverse_integral(omega, r, nu)?)
}

/// `Phi` extended to `r > nu` as `-int_nu^r ds / omega(s)`, still decreasing.
fn phi_extended(omega: &ModulusFunction, nu: f64, r: f64) -> Result<f64, OsgoodError> {
    if !(r > 0.0) {
        return Err(OsgoodError::InvalidRadius { r, nu });
    }
    Ok(inverse_integral(omega, r, nu)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OsgoodVerdict {
    Osgood,
    NotOsgood,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsgoodOptions {
    /// Every decade must add at least this much for an "osgood" verdict.
    pub floor: f64,
    /// Successive increment ratios at most this value count as geometric decay.
    pub decay_ratio: f64,
}

impl Default for OsgoodOptions {
    fn default() -> Self {
        OsgoodOptions {
            floor: 0.1,
            decay_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsgoodReport {
    pub verdict: OsgoodVerdict,
    /// `I_k = int_{10^-k}^nu ds / omega(s)` for `k = 1..=depth`.
    pub integrals: Vec<f64>,
    /// `I_k - I_{k-1}` with `I_0 = int_1^nu`.
    pub increments: Vec<f64>,
    /// The sampled profile was inconclusive and the modulus' declaration decided.
    pub from_declaration: bool,
}

/// Classify `omega` by the growth of `int_{10^-k}^nu ds / omega(s)`.
pub fn check_osgood(
    omega: &ModulusFunction,
    nu: f64,
    depth: u32,
    opts: OsgoodOptions,
) -> Result<OsgoodReport, OsgoodError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(OsgoodError::InvalidNu(nu));
    }
    if depth == 0 {
        return Err(OsgoodError::NoDepth);
    }
    let mut prev = inverse_integral(omega, 1.0, nu)?;
    let mut lo = 1.0;
    let mut integrals = Vec::with_capacity(depth as usize);
    let mut increments = Vec::with_capacity(depth as usize);
    for k in 1..=depth {
        let next_lo = 10f64.powi(-(k as i32));
        // integrate one decade at a time so each increment is computed directly
        let inc = inverse_integral(omega, next_lo, lo)?;
        let ik = prev + inc;
        increments.push(inc);
        integrals.push(ik);
        prev = ik;
        lo = next_lo;
    }
    let mut verdict = classify(&increments, opts);
    let mut from_declaration = false;
    if verdict == OsgoodVerdict::Inconclusive {
        if let Some(declared) = omega.declared_osgood() {
            verdict = if declared {
                OsgoodVerdict::Osgood
            } else {
                OsgoodVerdict::NotOsgood
            };
            from_declaration = true;
        }
    }
    Ok(OsgoodReport {
        verdict,
        integrals,
        increments,
        from_declaration,
    })
}

fn classify(increments: &[f64], opts: OsgoodOptions) -> OsgoodVerdict {
    if increments.iter().all(|d| *d >= opts.floor) {
        return OsgoodVerdict::Osgood;
    }
    let last = increments[increments.len() - 1];
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    if last < opts.floor && !tail.is_empty() && tail.iter().all(|r| *r <= opts.decay_ratio) {
        OsgoodVerdict::NotOsgood
    } else {
        OsgoodVerdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSample {
    pub t: f64,
    pub delta: f64,
    /// `None` where the two paths coincide and `Phi` is undefined.
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MonitorVerdict {
    Nondecreasing,
    /// First step where `Psi` drops by more than the tolerance.
    Decreasing {
        from: f64,
        to: f64,
        drop: f64,
    },
    /// Fewer than two points with distinct paths.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub samples: Vec<PsiSample>,
    pub identical: usize,
    pub verdict: MonitorVerdict,
}

/// Evaluate `Psi(t) = Phi(|u(t) - v(t)|) + 2 xi(t)` on `grid` and report
/// whether it is nondecreasing up to `tol`.
///
/// `Phi` is continued past `nu` by the same integral with reversed limits.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_monitor<U, V>(
    mut u: U,
    mut v: V,
    space: &MetricSpace,
    omega: &ModulusFunction,
    xi: &ControlFunction,
    nu: f64,
    grid: &[f64],
    tol: f64,
) -> Result<MonitorReport, OsgoodError>
where
    U: FnMut(f64) -> SpacePoint,
    V: FnMut(f64) -> SpacePoint,
{
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(OsgoodError::InvalidNu(nu));
    }
    let mut samples = Vec::with_capacity(grid.len());
    for &t in grid {
        let delta = space.distance_unchecked(&u(t), &v(t));
        let psi = if delta > 0.0 {
            Some(phi_extended(omega, nu, delta)? + 2.0 * xi.eval(t))
        } else {
            None
        };
        samples.push(PsiSample { t, delta, psi });
    }
    let identical = samples.iter().filter(|s| s.psi.is_none()).count();
    let defined: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|s| s.psi.map(|p| (s.t, p)))
        .collect();
    let verdict = if defined.len() < 2 {
        MonitorVerdict::Vacuous
    } else {
        defined
            .windows(2)
            .find(|w| w[1].1 < w[0].1 - tol)
            .map(|w| MonitorVerdict::Decreasing {
                from: w[0].0,
                to: w[1].0,
                drop: w[0].1 - w[1].1,
            })
            .unwrap_or(MonitorVerdict::Nondecreasing)
    };
    Ok(MonitorReport {
        samples,
        identical,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_closed_forms() {
        let id = ModulusFunction::identity();
        assert!((phi(&id, 1.0, (-2f64).exp()).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(phi(&id, 1.0, 1.0).unwrap(), 0.0);
        let one = ModulusFunction::constant(1.0);
        assert!((phi(&one, 1.0, 0.25).unwrap() - 0.75).abs() < 1e-14);
        assert!(phi(&id, 1.0, 0.0).is_err());
        assert!(phi(&id, 1.0, 2.0).is_err());
    }

    #[test]
    fn phi_is_decreasing() {
        let m = ModulusFunction::log_lipschitz();
        let vals: Vec<f64> = (1..=50)
            .map(|i| phi(&m, 1.0, i as f64 / 50.0).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn linear_modulus_is_osgood() {
        let r = check_osgood(
            &ModulusFunction::identity(),
            1.0,
            6,
            OsgoodOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, OsgoodVerdict::Osgood);
        assert!(!r.from_declaration);
        for d in &r.increments {
            assert!((d - 10f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn sqrt_is_not_osgood() {
        let r = check_osgood(
            &ModulusFunction::new("sqrt", f64::sqrt),
            1.0,
            6,
            OsgoodOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, OsgoodVerdict::NotOsgood);
        for (k, i) in r.integrals.iter().enumerate() {
            let exact = 2.0 * (1.0 - 10f64.powf(-((k + 1) as f64) / 2.0));
            assert!((i - exact).abs() < 1e-10);
        }
        assert!(*r.integrals.last().unwrap() <= 2.0);
    }

    #[test]
    fn log_lipschitz_is_osgood() {
        let r = check_osgood(
            &ModulusFunction::log_lipschitz(),
            1.0,
            6,
            OsgoodOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, OsgoodVerdict::Osgood);
        for (k, i) in r.integrals.iter().enumerate() {
            let exact = (1.0 + (k + 1) as f64 * 10f64.ln()).ln();
            assert!((i - exact).abs() < 1e-10);
        }
        // deeper profiles drop below the floor and fall back on the declaration
        let deep = check_osgood(
            &ModulusFunction::log_lipschitz().with_declared_osgood(true),
            1.0,
            14,
            OsgoodOptions::default(),
        )
        .unwrap();
        assert_eq!(deep.verdict, OsgoodVerdict::Osgood);
        assert!(deep.from_declaration);
    }

    #[test]
    fn growing_pair_keeps_psi_nondecreasing() {
        let grid: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let r = uniqueness_monitor(
            |t| SpacePoint::scalar(t.exp()),
            |t| SpacePoint::scalar(1.1 * t.exp()),
            &MetricSpace::euclidean(1).unwrap(),
            &ModulusFunction::identity(),
            &ControlFunction::identity(),
            1.0,
            &grid,
            1e-9,
        )
        .unwrap();
        assert_eq!(r.verdict, MonitorVerdict::Nondecreasing);
        for s in &r.samples {
            let psi = s.psi.unwrap();
            assert!((psi - (10f64.ln() + s.t)).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_paths_are_vacuous() {
        let r = uniqueness_monitor(
            SpacePoint::scalar,
            SpacePoint::scalar,
            &MetricSpace::euclidean(1).unwrap(),
            &ModulusFunction::identity(),
            &ControlFunction::identity(),
            1.0,
            &[0.0, 0.5, 1.0],
            1e-9,
        )
        .unwrap();
        assert_eq!(r.verdict, MonitorVerdict::Vacuous);
        assert_eq!(r.identical, 3);
    }

    #[test]
    fn branching_pair() {
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let space = MetricSpace::euclidean(1).unwrap();
        // with omega = s the monitor sees Psi = -2 ln t + 2 t drop on (0, 1)
        let r = uniqueness_monitor(
            |t| SpacePoint::scalar(t * t),
            |_| SpacePoint::scalar(0.0),
            &space,
            &ModulusFunction::identity(),
            &ControlFunction::identity(),
            1.0,
            &grid,
            1e-9,
        )
        .unwrap();
        assert!(matches!(r.verdict, MonitorVerdict::Decreasing { from, .. } if from == 0.01));
        // with omega = sqrt(s), Phi(t^2) = 2 - 2t exactly cancels 2 xi(t)
        let r = uniqueness_monitor(
            |t| SpacePoint::scalar(t * t),
            |_| SpacePoint::scalar(0.0),
            &space,
            &ModulusFunction::sqrt(),
            &ControlFunction::identity(),
            1.0,
            &grid,
            1e-9,
        )
        .unwrap();
        assert_eq!(r.verdict, MonitorVerdict::Nondecreasing);
        for s in &r.samples {
            assert!((s.psi.unwrap() - 2.0).abs() < 1e-9);
        }
    }
}
