//! Factories turning classical equation classes into tangent fields.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::gode::{normalize_field, FieldError, FieldMetadata, ModulusFunction, TangentField};
use crate::integration::ControlFunction;
use crate::metric::{MetricSpace, SpacePoint};
use crate::quadrature::{integrate, integrate_vec, QuadError, QuadOptions};
use crate::regulated::{RegulatedError, RegulatedFunction};
use crate::ScalarFn;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unsupported preset `{0}`")]
    UnsupportedPreset(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Regulated(#[from] RegulatedError),
}

/// Right-hand side `f(x, t)` of a classical equation.
pub type Rhs = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// Closed-form solution used as a test oracle.
pub type Reference = Arc<dyn Fn(f64) -> SpacePoint + Send + Sync>;

/// `y(s) = s^2 cos(pi / s^2)`, `y(0) = 0`: differentiable everywhere on
/// `[0, 1]` but of unbounded variation.
pub fn bv_y(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * s * (PI / (s * s)).cos()
    }
}

/// Derivative of [`bv_y`]: `2s cos(pi/s^2) + (2pi/s) sin(pi/s^2)`, zero at 0.
pub fn bv_y_dot(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        let phase = PI / (s * s);
        2.0 * s * phase.cos() + 2.0 * PI / s * phase.sin()
    }
}

/// Pairs `(s, s + s^3/20)` at `s = 1/sqrt(k + 1/2)`, where `|y'| ~ 2pi/s` peaks.
/// Difference quotients of `y` on these pairs are about `6/s`.
pub fn bv_steep_pairs(ks: impl IntoIterator<Item = f64>) -> Vec<(f64, f64)> {
    ks.into_iter()
        .map(|k| {
            let s = 1.0 / (k + 0.5).sqrt();
            (s, s + s * s * s / 20.0)
        })
        .collect()
}

const BV_GRID: usize = 10_000;

/// Upper bound on `|y(t) - y(s)|` for `|t - s| <= r` from the shape of `y`:
/// near zero `|y| <= s^2`, away from zero `|y'| <= 2 + 2pi/s`.
fn bv_modulus_analytic(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let sigma = (PI * r).cbrt();
    let near = 2.0 * (sigma + r).powi(2);
    let far = (2.0 * (1.0 + r) + 2.0 * PI / sigma) * r;
    near.max(far)
}

/// Running maximum over lags of `max_i |y(s_{i+k}) - y(s_i)|` on the grid.
fn bv_lag_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let ys: Vec<f64> = (0..=BV_GRID)
            .map(|i| bv_y(i as f64 / BV_GRID as f64))
            .collect();
        let mut out = vec![0.0; BV_GRID + 1];
        for k in 1..=BV_GRID {
            let m = ys
                .iter()
                .zip(&ys[k..])
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max);
            out[k] = m.max(out[k - 1]);
        }
        out
    })
}

/// Modulus of continuity of [`bv_y`] on `[0, 1]`, from a lag table on a
/// `10^4`-point grid padded by the off-grid error, capped by the analytic bound.
pub fn bv_zeta() -> ModulusFunction {
    ModulusFunction::new("bv modulus", |r| {
        if r <= 0.0 {
            return 0.0;
        }
        let step = 1.0 / BV_GRID as f64;
        let table = bv_lag_table();
        let lag = r / step + 2.0;
        let i = lag.floor() as usize;
        let tabulated = if i >= BV_GRID {
            table[BV_GRID]
        } else {
            let w = lag - i as f64;
            table[i] * (1.0 - w) + table[i + 1] * w
        };
        let gridded = tabulated + 2.0 * bv_modulus_analytic(step / 2.0);
        2.0f64.min(bv_modulus_analytic(r)).min(gridded)
    })
}

/// `F(x, tau, t) = x + y(t) - y(tau)` on the line, with metadata
/// `h(t) = t`, `zeta` from [`bv_zeta`], `xi(t) = t`, `omega(s) = s`.
pub fn bv_example_field() -> TangentField {
    let field =
        normalize_field(|_, t| vec![bv_y(t)], line(), "bv example").expect("the line is linear");
    field.with_metadata(FieldMetadata {
        h: Some(RegulatedFunction::continuous(0.0, 1.0, |t| t).expect("valid domain")),
        zeta: Some(bv_zeta()),
        xi: Some(ControlFunction::identity()),
        omega: Some(ModulusFunction::identity()),
        jump_points: Vec::new(),
    })
}

fn line() -> MetricSpace {
    MetricSpace::euclidean(1).expect("dimension 1")
}

fn euclidean(dim: usize) -> Result<MetricSpace, ProblemError> {
    MetricSpace::euclidean(dim).map_err(|e| ProblemError::Field(e.into()))
}

/// Integrability data for a Caratheodory right-hand side:
/// `|f(x, t)| <= m(t)` and `|f(x, t) - f(y, t)| <= l(t) omega(|x - y|)`.
#[derive(Clone)]
pub struct CarathBounds {
    pub m: ScalarFn,
    pub l: ScalarFn,
    pub omega: ModulusFunction,
    pub interval: (f64, f64),
}

/// `F(x, tau, t) = x + int_tau^t f(x, s) ds` with `x` frozen, by adaptive
/// quadrature. A failed quadrature makes the field evaluate to NaN, which
/// solvers report as leaving the domain.
///
/// With bounds, the metadata gets `h(t) = int_a^t m + l`, `zeta(r) = r`,
/// `xi = h` and the given `omega`.
pub fn carath_field(
    dim: usize,
    f: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    quad: QuadOptions,
    bounds: Option<CarathBounds>,
) -> Result<TangentField, ProblemError> {
    let space = euclidean(dim)?;
    let f: Rhs = Arc::new(f);
    let field = TangentField::new(space, "caratheodory", move |x, tau, t| {
        let x = x.coords();
        let mut buf = x.to_vec();
        let integral = integrate_vec(
            |s, out| {
                let v = f(x, s);
                out.copy_from_slice(&v);
            },
            tau,
            t,
            dim,
            quad,
        );
        match integral {
            Ok(v) => {
                for (b, d) in buf.iter_mut().zip(v) {
                    *b += d;
                }
            }
            Err(_) => buf.iter_mut().for_each(|b| *b = f64::NAN),
        }
        SpacePoint::Vector(buf)
    });
    let Some(bounds) = bounds else {
        return Ok(field);
    };
    let (a, b) = bounds.interval;
    let (m, l) = (bounds.m.clone(), bounds.l.clone());
    integrate(|s| m(s) + l(s), a, b, quad)?;
    let h_fn = move |t: f64| integrate(|s| m(s) + l(s), a, t, quad).unwrap_or(f64::NAN);
    let h_ctrl = h_fn.clone();
    Ok(field.with_metadata(FieldMetadata {
        h: Some(RegulatedFunction::continuous(a, b, h_fn)?),
        zeta: Some(ModulusFunction::identity()),
        xi: Some(ControlFunction::new(h_ctrl)),
        omega: Some(bounds.omega),
        jump_points: Vec::new(),
    }))
}

/// `x' = rate * x` with the frozen integral: `F(x, tau, t) = x + rate x (t - tau)`.
pub fn linear_growth_field(dim: usize, rate: f64) -> Result<TangentField, ProblemError> {
    let field = normalize_field(
        move |x, t| x.iter().map(|v| rate * v * t).collect(),
        euclidean(dim)?,
        "linear growth",
    )?;
    Ok(field)
}

/// Measure differential equation `Dx = f(x, t) + h(x, t) Dg`:
/// `F(x, tau, t) = x + f(x, tau)(t - tau) + h(x, tau)(g(t) - g(tau))`.
/// The jumps of `g` become anchor points of the solver.
pub fn mde_field(
    dim: usize,
    f: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    h: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    g: RegulatedFunction,
) -> Result<TangentField, ProblemError> {
    let space = euclidean(dim)?;
    let jump_points = g.jump_points();
    let field = TangentField::new(space, "measure differential equation", move |x, tau, t| {
        let x = x.coords();
        let fx = f(x, tau);
        let hx = h(x, tau);
        let dg = g.eval(t) - g.eval(tau);
        SpacePoint::Vector(
            (0..x.len())
                .map(|i| x[i] + fx[i] * (t - tau) + hx[i] * dg)
                .collect(),
        )
    });
    Ok(field.with_metadata(FieldMetadata {
        jump_points,
        ..Default::default()
    }))
}

/// Space-independent forcing term of a composite field.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// The derivative of [`bv_y`], integrated in closed form.
    BvDerivative,
    /// A continuous function, integrated by quadrature.
    Continuous(ScalarFn),
}

impl Forcing {
    pub fn from_name(name: &str) -> Result<Forcing, ProblemError> {
        match name {
            "zero" => Ok(Forcing::Zero),
            "bv_derivative" => Ok(Forcing::BvDerivative),
            "sin" => Ok(Forcing::Continuous(Arc::new(f64::sin))),
            "cos" => Ok(Forcing::Continuous(Arc::new(f64::cos))),
            "one" => Ok(Forcing::Continuous(Arc::new(|_| 1.0))),
            other => Err(ProblemError::UnsupportedPreset(other.into())),
        }
    }

    /// `int_tau^t g(s) ds`.
    fn increment(&self, tau: f64, t: f64, quad: QuadOptions) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::BvDerivative => bv_y(t) - bv_y(tau),
            Forcing::Continuous(g) => integrate(|s| g(s), tau, t, quad).unwrap_or(f64::NAN),
        }
    }
}

/// `x' = g(t) + h(x, t)`: the Caratheodory field of `h` plus the indefinite
/// integral of the forcing `g`, added to every coordinate.
pub fn henstock_composite_field(
    dim: usize,
    forcing: Forcing,
    h: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    quad: QuadOptions,
) -> Result<TangentField, ProblemError> {
    let base = carath_field(dim, h, quad, None)?;
    let field = TangentField::new(*base.space(), "composite", move |x, tau, t| {
        let shift = forcing.increment(tau, t, quad);
        let mut p = base.eval(x, tau, t);
        if let SpacePoint::Vector(v) = &mut p {
            v.iter_mut().for_each(|c| *c += shift);
        }
        p
    });
    Ok(field)
}

/// `theta' = rate` on the circle.
pub fn circle_rotation_field(rate: f64) -> TangentField {
    TangentField::new(MetricSpace::Circle, "rotation", move |x, tau, t| {
        SpacePoint::angle(x.coords()[0] + rate * (t - tau))
    })
}

/// `x' = 2 sqrt|x|`, which has the solutions `x = t^2` and `x = 0` from zero.
pub fn sqrt_growth_field() -> TangentField {
    normalize_field(
        |x, t| vec![2.0 * x[0].abs().sqrt() * t],
        line(),
        "square root growth",
    )
    .expect("the line is linear")
}

/// A field with an interval, initial value, jump set and optional oracle.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub field: TangentField,
    pub interval: (f64, f64),
    pub x0: SpacePoint,
    pub jump_points: Vec<f64>,
    pub reference: Option<Reference>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("field", &self.field)
            .field("interval", &self.interval)
            .field("x0", &self.x0)
            .field("jump_points", &self.jump_points)
            .field("reference", &self.reference.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        mut field: TangentField,
        interval: (f64, f64),
        x0: SpacePoint,
        reference: Option<Reference>,
    ) -> Result<Self, ProblemError> {
        let (a, b) = interval;
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(ProblemError::Invalid(format!("empty interval [{a}, {b}]")));
        }
        field.space().check(&x0).map_err(FieldError::from)?;
        let mut jump_points = field.metadata().jump_points.clone();
        if let Some(&t) = jump_points.iter().find(|t| !(a <= **t && **t <= b)) {
            return Err(ProblemError::Invalid(format!(
                "jump point {t} outside [{a}, {b}]"
            )));
        }
        jump_points.sort_by(f64::total_cmp);
        jump_points.dedup();
        field.metadata_mut().jump_points = jump_points.clone();
        Ok(ProblemSpec {
            name: name.into(),
            field,
            interval,
            x0,
            jump_points,
            reference,
        })
    }

    /// Built-in problems: `exp`, `bv`, `impulse`, `circle`, `composite`, `sqrt`.
    pub fn preset(name: &str) -> Result<ProblemSpec, ProblemError> {
        match name {
            "exp" => ProblemSpec::new(
                name,
                linear_growth_field(1, 1.0)?,
                (0.0, 1.0),
                SpacePoint::scalar(1.0),
                Some(Arc::new(|t: f64| SpacePoint::scalar(t.exp()))),
            ),
            "bv" => ProblemSpec::new(
                name,
                bv_example_field(),
                (0.0, 1.0),
                SpacePoint::scalar(1.0),
                Some(Arc::new(|t| SpacePoint::scalar(1.0 + bv_y(t)))),
            ),
            "impulse" => ProblemSpec::new(
                name,
                mde_field(
                    1,
                    |_, _| vec![0.0],
                    |x, _| x.to_vec(),
                    RegulatedFunction::step(0.0, 1.0, 0.5, 1.0)?,
                )?,
                (0.0, 1.0),
                SpacePoint::scalar(1.0),
                Some(Arc::new(|t| {
                    SpacePoint::scalar(if t > 0.5 { 2.0 } else { 1.0 })
                })),
            ),
            "circle" => ProblemSpec::new(
                name,
                circle_rotation_field(1.0),
                (0.0, 2.0 * PI),
                SpacePoint::angle(0.0),
                Some(Arc::new(SpacePoint::angle)),
            ),
            "composite" => ProblemSpec::new(
                name,
                henstock_composite_field(
                    1,
                    Forcing::BvDerivative,
                    |x, _| x.to_vec(),
                    QuadOptions::default(),
                )?,
                (0.0, 1.0),
                SpacePoint::scalar(1.0),
                Some(Arc::new(composite_reference)),
            ),
            "sqrt" => ProblemSpec::new(
                name,
                sqrt_growth_field(),
                (0.0, 1.0),
                SpacePoint::scalar(0.0),
                None,
            ),
            other => Err(ProblemError::UnsupportedPreset(other.into())),
        }
    }
}

/// Solution of `x' = x + y'(t)`, `x(0) = 1`, after integrating by parts:
/// `x(t) = e^t + y(t) + e^t int_0^t e^{-s} y(s) ds`.
fn composite_reference(t: f64) -> SpacePoint {
    SpacePoint::scalar(t.exp() + bv_y(t) + t.exp() * damped_bv_integral(t))
}

/// `int_0^t e^{-s} y(s) ds` from a cumulative table over the zeros
/// `1/sqrt(k + 1/2)` of `y`. Below the last zero `|y(s)| <= s^2`, so dropping
/// that piece costs less than `1e-8`.
fn damped_bv_integral(t: f64) -> f64 {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let opts = QuadOptions::with_tol(1e-14);
    let piece =
        |lo: f64, hi: f64| integrate(|s| (-s).exp() * bv_y(s), lo, hi, opts).unwrap_or(f64::NAN);
    let (points, cumulative) = TABLE.get_or_init(|| {
        let mut points: Vec<f64> = (1..120_000)
            .map(|k| 1.0 / (k as f64 + 0.5).sqrt())
            .collect();
        points.reverse();
        points.push(1.0);
        let mut cumulative = vec![0.0; points.len()];
        for i in 1..points.len() {
            cumulative[i] = cumulative[i - 1] + piece(points[i - 1], points[i]);
        }
        (points, cumulative)
    });
    if t <= points[0] {
        return 0.0;
    }
    let i = points.partition_point(|p| *p <= t) - 1;
    cumulative[i] + piece(points[i], t)
}
