//! Turn config sections into core objects.

use std::f64::consts::PI;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use gode_core::problems::{
    bv_example_field, bv_y, bv_y_dot, carath_field, circle_rotation_field,
    henstock_composite_field, linear_growth_field, mde_field, sqrt_growth_field, Forcing,
    Reference,
};
use gode_core::{
    Gauge, GaugeBase, Jump, MetricSpace, ModulusFunction, PartitionScheme, ProblemSpec,
    QuadOptions, RegulatedFunction, SolverSettings, SpacePoint, TangentField,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::config::{
    AnchorConfig, CurveConfig, GaugeConfig, IntegratorConfig, ModulusConfig, ProblemConfig,
    RhsConfig, ScalarConfig, SchemeConfig, SettingsConfig,
};

/// Command-line values that take precedence over the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub levels: Option<u32>,
    pub seed: Option<u64>,
}

pub fn modulus(cfg: &ModulusConfig) -> ModulusFunction {
    match cfg {
        ModulusConfig::Identity => ModulusFunction::identity(),
        ModulusConfig::Linear { l } => ModulusFunction::linear(*l),
        ModulusConfig::Power { c, p } => ModulusFunction::power(*c, *p),
        ModulusConfig::Sqrt => ModulusFunction::sqrt(),
        ModulusConfig::LogLipschitz { declared_osgood } => {
            let m = ModulusFunction::log_lipschitz();
            match declared_osgood {
                Some(d) => m.with_declared_osgood(*d),
                None => m,
            }
        }
        ModulusConfig::Constant { c } => ModulusFunction::constant(*c),
    }
}

pub fn scalar(cfg: ScalarConfig) -> fn(f64) -> f64 {
    match cfg {
        ScalarConfig::Zero => |_| 0.0,
        ScalarConfig::One => |_| 1.0,
        ScalarConfig::Identity => |t| t,
        ScalarConfig::Square => |t| t * t,
        ScalarConfig::Sin => f64::sin,
        ScalarConfig::Cos => f64::cos,
        ScalarConfig::Exp => f64::exp,
        ScalarConfig::BvDerivative => bv_y_dot,
    }
}

pub fn curve(cfg: CurveConfig) -> fn(f64) -> f64 {
    match cfg {
        CurveConfig::Zero => |_| 0.0,
        CurveConfig::TSquared => |t| t * t,
        CurveConfig::Exp => f64::exp,
        CurveConfig::Identity => |t| t,
    }
}

fn rhs(cfg: RhsConfig) -> impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + Clone + 'static {
    move |x: &[f64], t: f64| -> Vec<f64> {
        match cfg {
            RhsConfig::Zero => vec![0.0; x.len()],
            RhsConfig::Identity => x.to_vec(),
            RhsConfig::SinT => vec![t.sin(); x.len()],
            RhsConfig::CosT => vec![t.cos(); x.len()],
            RhsConfig::Scaled(c) => x.iter().map(|v| c * v).collect(),
        }
    }
}

pub fn integrator(cfg: &IntegratorConfig, (a, b): (f64, f64)) -> Result<RegulatedFunction> {
    Ok(match cfg {
        IntegratorConfig::Identity => RegulatedFunction::continuous(a, b, |t| t)?,
        IntegratorConfig::BvY => RegulatedFunction::continuous(a, b, bv_y)?,
        IntegratorConfig::Step { at, height } => RegulatedFunction::step(a, b, *at, *height)?,
        IntegratorConfig::Steps { jumps } => steps(a, b, jumps)?,
    })
}

/// Left-continuous staircase starting at `0`.
fn steps(a: f64, b: f64, jumps: &[(f64, f64)]) -> Result<RegulatedFunction> {
    let mut jumps = jumps.to_vec();
    jumps.sort_by(|x, y| x.0.total_cmp(&y.0));
    if jumps.is_empty() {
        bail!("`steps` needs at least one jump");
    }
    if let Some((at, _)) = jumps.iter().find(|(at, _)| !(a < *at && *at < b)) {
        bail!("jump point {at} must lie inside ({a}, {b})");
    }
    let mut segments: Vec<(f64, f64, gode_core::ScalarFn)> = Vec::new();
    let mut table = Vec::new();
    let mut start = a;
    let mut level = 0.0;
    for &(at, height) in &jumps {
        let value = level;
        segments.push((start, at, Arc::new(move |_| value)));
        table.push(Jump {
            at,
            left: level,
            value: level,
            right: level + height,
        });
        level += height;
        start = at;
    }
    let value = level;
    segments.push((start, b, Arc::new(move |_| value)));
    Ok(RegulatedFunction::new(a, b, segments, table)?)
}

pub fn gauge(cfg: &GaugeConfig, (a, b): (f64, f64)) -> Result<Gauge> {
    let (base, anchors) = match cfg {
        GaugeConfig::Constant { value, anchors } => (GaugeBase::Constant(*value), anchors),
        GaugeConfig::Piecewise { pieces, anchors } => (GaugeBase::Piecewise(pieces.clone()), anchors),
        GaugeConfig::Power {
            center,
            scale,
            power,
            cap,
            anchors,
        } => (
            GaugeBase::Power {
                center: *center,
                scale: *scale,
                power: *power,
                cap: *cap,
            },
            anchors,
        ),
    };
    let mut g = Gauge::new(a, b, base)?;
    for anchor in anchors {
        g = match anchor {
            AnchorConfig::At(at) => g.with_default_anchor(*at)?,
            AnchorConfig::WithRadius { at, radius } => g.with_anchor(*at, *radius)?,
        };
    }
    Ok(g)
}

pub fn settings(cfg: &SettingsConfig, interval: (f64, f64), o: Overrides) -> Result<SolverSettings> {
    let mut s = SolverSettings::default();
    if let Some(v) = cfg.levels {
        s.levels = v;
    }
    if let Some(v) = cfg.tol {
        s.tol = v;
    }
    if let Some(v) = cfg.lambda {
        s.lambda = v;
    }
    if let Some(v) = cfg.tag_policy {
        s.tag_policy = v;
    }
    if let Some(v) = cfg.backward {
        s.backward = v;
    }
    if let Some(scheme) = &cfg.scheme {
        s.scheme = match scheme {
            SchemeConfig::ConstantGauge => PartitionScheme::ConstantGauge,
            SchemeConfig::Uniform { cells } => PartitionScheme::Uniform { cells: *cells },
            SchemeConfig::Gauge { gauge: g } => {
                PartitionScheme::Gauge(gauge(g, interval).context("settings.scheme.gauge")?)
            }
        };
    }
    if let Some(v) = o.levels {
        s.levels = v;
    }
    if let Some(v) = o.tol {
        s.tol = v;
    }
    Ok(s)
}

fn params<T: DeserializeOwned + Default>(value: &Value) -> Result<T> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone()).context("problem.params")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ExpParams {
    rate: f64,
    dim: usize,
}

impl Default for ExpParams {
    fn default() -> Self {
        ExpParams { rate: 1.0, dim: 1 }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MdeParams {
    #[serde(default = "zero_rhs")]
    f: RhsConfig,
    #[serde(default = "identity_rhs")]
    h: RhsConfig,
    g: IntegratorConfig,
    #[serde(default = "one")]
    dim: usize,
}

impl Default for MdeParams {
    fn default() -> Self {
        MdeParams {
            f: RhsConfig::Zero,
            h: RhsConfig::Identity,
            g: IntegratorConfig::Step {
                at: 0.5,
                height: 1.0,
            },
            dim: 1,
        }
    }
}

fn zero_rhs() -> RhsConfig {
    RhsConfig::Zero
}

fn identity_rhs() -> RhsConfig {
    RhsConfig::Identity
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RateParams {
    rate: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams { rate: 1.0 }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CarathParams {
    f: RhsConfig,
    dim: usize,
}

impl Default for CarathParams {
    fn default() -> Self {
        CarathParams {
            f: RhsConfig::Identity,
            dim: 1,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CompositeParams {
    forcing: String,
    h: RhsConfig,
}

impl Default for CompositeParams {
    fn default() -> Self {
        CompositeParams {
            forcing: "bv_derivative".into(),
            h: RhsConfig::Identity,
        }
    }
}

fn componentwise(x0: Vec<f64>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Reference {
    Arc::new(move |t| SpacePoint::Vector(x0.iter().map(|v| f(*v, t)).collect()))
}

/// Build the problem named by the config's preset.
pub fn problem(cfg: &ProblemConfig) -> Result<ProblemSpec> {
    let name = cfg.preset.as_str();
    let interval = |default: (f64, f64)| cfg.interval.map_or(default, |[a, b]| (a, b));
    let x0 = |default: Vec<f64>| cfg.x0.clone().unwrap_or(default);
    let (field, (a, b), x0, reference): (TangentField, _, Vec<f64>, Option<Reference>) = match name {
        "exp" => {
            let p: ExpParams = params(&cfg.params)?;
            let (a, b) = interval((0.0, 1.0));
            let x0 = x0(vec![1.0; p.dim]);
            let rate = p.rate;
            let reference = componentwise(x0.clone(), move |v, t| v * (rate * (t - a)).exp());
            (linear_growth_field(p.dim, rate)?, (a, b), x0, Some(reference))
        }
        "bv" => {
            params::<NoParams>(&cfg.params)?;
            let (a, b) = interval((0.0, 1.0));
            let x0 = x0(vec![1.0]);
            let reference = componentwise(x0.clone(), move |v, t| v + bv_y(t) - bv_y(a));
            (bv_example_field(), (a, b), x0, Some(reference))
        }
        "mde" => {
            let p: MdeParams = params(&cfg.params)?;
            let (a, b) = interval((0.0, 1.0));
            let x0 = x0(vec![1.0; p.dim]);
            let g = integrator(&p.g, (a, b)).context("problem.params.g")?;
            let reference = match (p.f, p.h, &p.g) {
                (RhsConfig::Zero, RhsConfig::Identity, IntegratorConfig::Identity) => {
                    Some(componentwise(x0.clone(), move |v, t| v * (t - a).exp()))
                }
                (RhsConfig::Zero, RhsConfig::Identity, IntegratorConfig::Step { .. })
                | (RhsConfig::Zero, RhsConfig::Identity, IntegratorConfig::Steps { .. }) => {
                    let jumps: Vec<(f64, f64)> = g
                        .jumps()
                        .iter()
                        .map(|j| (j.at, j.right - j.value))
                        .collect();
                    Some(componentwise(x0.clone(), move |v, t| {
                        jumps
                            .iter()
                            .filter(|(at, _)| *at < t)
                            .fold(v, |acc, (_, dg)| acc * (1.0 + dg))
                    }))
                }
                _ => None,
            };
            (mde_field(p.dim, rhs(p.f), rhs(p.h), g)?, (a, b), x0, reference)
        }
        "circle" => {
            let p: RateParams = params(&cfg.params)?;
            let (a, b) = interval((0.0, 2.0 * PI));
            let x0 = x0(vec![0.0]);
            let (theta0, rate) = (x0.first().copied().unwrap_or(0.0), p.rate);
            let reference: Reference = Arc::new(move |t| SpacePoint::angle(theta0 + rate * (t - a)));
            (circle_rotation_field(rate), (a, b), x0, Some(reference))
        }
        "carath" => {
            let p: CarathParams = params(&cfg.params)?;
            let (a, b) = interval((0.0, 1.0));
            let x0 = x0(vec![1.0; p.dim]);
            let reference = match p.f {
                RhsConfig::Zero => componentwise(x0.clone(), |v, _| v),
                RhsConfig::Identity => componentwise(x0.clone(), move |v, t| v * (t - a).exp()),
                RhsConfig::Scaled(c) => {
                    componentwise(x0.clone(), move |v, t| v * (c * (t - a)).exp())
                }
                RhsConfig::SinT => componentwise(x0.clone(), move |v, t| v + a.cos() - t.cos()),
                RhsConfig::CosT => componentwise(x0.clone(), move |v, t| v + t.sin() - a.sin()),
            };
            let field = carath_field(p.dim, rhs(p.f), QuadOptions::default(), None)?;
            (field, (a, b), x0, Some(reference))
        }
        "composite" => {
            let p: CompositeParams = params(&cfg.params)?;
            let (a, b) = interval((0.0, 1.0));
            let x0 = x0(vec![1.0]);
            let forcing = Forcing::from_name(&p.forcing).context("problem.params.forcing")?;
            let reference = if p.forcing == "bv_derivative"
                && p.h == RhsConfig::Identity
                && (a, b) == (0.0, 1.0)
                && x0 == [1.0]
            {
                ProblemSpec::preset("composite")?.reference
            } else {
                None
            };
            let field = henstock_composite_field(x0.len(), forcing, rhs(p.h), QuadOptions::default())?;
            (field, (a, b), x0, reference)
        }
        "sqrt" => {
            params::<NoParams>(&cfg.params)?;
            let (a, b) = interval((0.0, 1.0));
            let x0 = x0(vec![0.0]);
            let reference = match x0.as_slice() {
                [v] if *v > 0.0 => {
                    let r = v.sqrt();
                    Some(componentwise(x0.clone(), move |_, t| (r + t - a).powi(2)))
                }
                _ => None,
            };
            (sqrt_growth_field(), (a, b), x0, reference)
        }
        other => bail!("unknown problem preset `{other}` (expected exp, bv, mde, circle, carath, composite or sqrt)"),
    };
    let start = match field.space() {
        MetricSpace::Circle => match x0.as_slice() {
            [theta] => SpacePoint::angle(*theta),
            _ => bail!("circle problems take a single angle as x0"),
        },
        _ => SpacePoint::Vector(x0),
    };
    ProblemSpec::new(name, field, (a, b), start, reference).map_err(|e| anyhow!(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(json: &str) -> ProblemConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn staircase_integrator() {
        let g = integrator(
            &IntegratorConfig::Steps {
                jumps: vec![(0.7, -1.0), (0.25, 2.0)],
            },
            (0.0, 1.0),
        )
        .unwrap();
        assert_eq!(g.eval(0.25), 0.0);
        assert_eq!(g.eval(0.5), 2.0);
        assert_eq!(g.eval(0.7), 2.0);
        assert_eq!(g.eval(0.9), 1.0);
        assert_eq!(g.jump_points(), vec![0.25, 0.7]);
    }

    #[test]
    fn presets_build() {
        for preset in ["exp", "bv", "mde", "circle", "carath", "composite", "sqrt"] {
            let p = problem(&cfg(&format!(r#"{{"preset": "{preset}"}}"#))).unwrap();
            assert_eq!(p.name, preset);
        }
    }

    #[test]
    fn mde_reference_multiplies_jumps() {
        let p = problem(&cfg(
            r#"{"preset": "mde", "params": {"g": {"type": "steps", "jumps": [[0.3, 1], [0.6, 0.5]]}}, "x0": [2]}"#,
        ))
        .unwrap();
        let r = p.reference.unwrap();
        assert_eq!(r(0.3).coords()[0], 2.0);
        assert_eq!(r(0.5).coords()[0], 4.0);
        assert_eq!(r(1.0).coords()[0], 6.0);
        assert_eq!(p.jump_points, vec![0.3, 0.6]);
    }

    #[test]
    fn bad_params_are_reported() {
        let e = problem(&cfg(r#"{"preset": "exp", "params": {"rat": 2}}"#)).unwrap_err();
        assert!(format!("{e:#}").contains("rat"));
        let e = problem(&cfg(r#"{"preset": "nope"}"#)).unwrap_err();
        assert!(e.to_string().contains("nope"));
        let e = problem(&cfg(r#"{"preset": "composite", "params": {"forcing": "x"}}"#)).unwrap_err();
        assert!(format!("{e:#}").contains("unsupported preset"));
    }

    #[test]
    fn overrides_win() {
        let s = settings(
            &SettingsConfig {
                levels: Some(3),
                tol: Some(1e-3),
                ..Default::default()
            },
            (0.0, 1.0),
            Overrides {
                levels: Some(5),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((s.levels, s.tol), (5, 1e-3));
    }
}
