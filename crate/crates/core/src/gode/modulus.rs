use std::fmt;
use std::sync::Arc;

use crate::ScalarFn;

/// A modulus function `omega`: continuous, nondecreasing, `omega(0) = 0`,
/// positive away from zero.
///
/// Construction does not enforce the axioms (some callers integrate `1/omega`
/// for functions like `omega = 1`); use [`ModulusFunction::validate`] to
/// sample them.
#[derive(Clone)]
pub struct ModulusFunction {
    eval: ScalarFn,
    label: String,
    declared_osgood: Option<bool>,
}

impl fmt::Debug for ModulusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusFunction")
            .field("label", &self.label)
            .field("declared_osgood", &self.declared_osgood)
            .finish()
    }
}

impl ModulusFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ModulusFunction {
            eval: Arc::new(f),
            label: label.into(),
            declared_osgood: None,
        }
    }

    /// `s -> l * s`
    pub fn linear(l: f64) -> Self {
        ModulusFunction::new(format!("{l}*s"), move |s| l * s).with_declared_osgood(true)
    }

    pub fn identity() -> Self {
        ModulusFunction::linear(1.0)
    }

    /// `s -> c * s^p`
    pub fn power(c: f64, p: f64) -> Self {
        let m = ModulusFunction::new(format!("{c}*s^{p}"), move |s| c * s.powf(p));
        if p >= 1.0 {
            m.with_declared_osgood(p == 1.0)
        } else {
            m.with_declared_osgood(false)
        }
    }

    pub fn sqrt() -> Self {
        ModulusFunction::power(1.0, 0.5)
    }

    /// `s -> s * (1 + |ln s|)`, Osgood but not Lipschitz at zero.
    pub fn log_lipschitz() -> Self {
        ModulusFunction::new("s*(1+|ln s|)", |s| {
            if s == 0.0 {
                0.0
            } else {
                s * (1.0 + s.ln().abs())
            }
        })
    }

    pub fn constant(c: f64) -> Self {
        ModulusFunction::new(format!("{c}"), move |_| c)
    }

    /// Piecewise-linear interpolation of `(s, value)` knots starting at `(0, 0)`.
    /// Beyond the last knot the function stays constant.
    pub fn tabulated(label: impl Into<String>, knots: Vec<(f64, f64)>) -> Self {
        let knots = Arc::new(knots);
        ModulusFunction::new(label, move |s| interpolate(&knots, s))
    }

    pub fn with_declared_osgood(mut self, osgood: bool) -> Self {
        self.declared_osgood = Some(osgood);
        self
    }

    pub fn declared_osgood(&self) -> Option<bool> {
        self.declared_osgood
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.eval)(s)
    }

    /// Sample the modulus axioms on `n` points of `[0, nu]`.
    pub fn validate(&self, nu: f64, n: usize) -> Result<(), String> {
        if self.eval(0.0) != 0.0 {
            return Err(format!("omega(0) = {} != 0", self.eval(0.0)));
        }
        let mut prev = 0.0;
        for i in 1..=n {
            let s = nu * i as f64 / n as f64;
            let v = self.eval(s);
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("omega({s}) = {v} is not positive"));
            }
            if v < prev {
                return Err(format!("omega decreases before s = {s}"));
            }
            prev = v;
        }
        Ok(())
    }
}

fn interpolate(knots: &[(f64, f64)], s: f64) -> f64 {
    if s <= 0.0 || knots.is_empty() {
        return 0.0;
    }
    let i = knots.partition_point(|k| k.0 < s);
    if i == 0 {
        let (s1, v1) = knots[0];
        return v1 * s / s1;
    }
    if i == knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (s0, v0) = knots[i - 1];
    let (s1, v1) = knots[i];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}
