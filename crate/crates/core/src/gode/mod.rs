//! Generalized ODEs `x' = D_t F(x, tau, t)` in metric spaces.
//!
//! A [`TangentField`] assigns to every point `x` and time `tau` a tangent
//! curve `t -> F(x, tau, t)` through `x` (`F(x, tau, tau) = x`). Solutions are
//! paths whose local defect against these curves vanishes under refinement.

pub mod conditions;
pub mod modulus;
pub mod osgood;
pub mod solver;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integration::ControlFunction;
use crate::metric::{MetricError, MetricSpace, SpacePoint};
use crate::regulated::RegulatedFunction;

pub use modulus::ModulusFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("normalization needs a linear space; {0:?} is not one")]
    NotLinear(MetricSpace),
    #[error("field metadata lacks {0}")]
    MissingMetadata(&'static str),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub type FieldFn = Arc<dyn Fn(&SpacePoint, f64, f64) -> SpacePoint + Send + Sync>;

/// Regularity data attached to a field.
///
/// `h` and `zeta` bound the time regularity
/// `|F(x, tau, t) - F(x, tau, s)| <= zeta(|h(t) - h(s)|)`; `xi` and `omega`
/// bound the dependence on `(x, tau)`. Jump points are registered as anchors
/// by the solver.
#[derive(Debug, Clone, Default)]
pub struct FieldMetadata {
    pub h: Option<RegulatedFunction>,
    pub zeta: Option<ModulusFunction>,
    pub xi: Option<ControlFunction>,
    pub omega: Option<ModulusFunction>,
    pub jump_points: Vec<f64>,
}

/// Closed metric ball used as the admissible domain of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: SpacePoint,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, space: &MetricSpace, p: &SpacePoint) -> bool {
        space.distance_unchecked(&self.center, p) <= self.radius
    }
}

/// The right-hand side `F(x, tau, t)` of a generalized ODE.
#[derive(Clone)]
pub struct TangentField {
    space: MetricSpace,
    f: FieldFn,
    metadata: FieldMetadata,
    domain: Option<Ball>,
    label: String,
}

impl fmt::Debug for TangentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TangentField")
            .field("label", &self.label)
            .field("space", &self.space)
            .field("metadata", &self.metadata)
            .field("domain", &self.domain)
            .finish()
    }
}

impl TangentField {
    /// Wrap a field that is already normalized. Use
    /// [`TangentField::normalization_error`] to check that it is.
    pub fn new(
        space: MetricSpace,
        label: impl Into<String>,
        f: impl Fn(&SpacePoint, f64, f64) -> SpacePoint + Send + Sync + 'static,
    ) -> Self {
        TangentField {
            space,
            f: Arc::new(f),
            metadata: FieldMetadata::default(),
            domain: None,
            label: label.into(),
        }
    }

    pub fn with_metadata(mut self, metadata: FieldMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn with_domain(mut self, domain: Ball) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn metadata(&self) -> &FieldMetadata {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut FieldMetadata {
        &mut self.metadata
    }

    pub fn domain(&self) -> Option<&Ball> {
        self.domain.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: &SpacePoint, tau: f64, t: f64) -> SpacePoint {
        (self.f)(x, tau, t)
    }

    pub fn in_domain(&self, p: &SpacePoint) -> bool {
        p.is_finite()
            && self
                .domain
                .as_ref()
                .is_none_or(|b| b.contains(&self.space, p))
    }

    /// Largest `distance(F(x, tau, tau), x)` over the given samples.
    pub fn normalization_error(&self, samples: &[(SpacePoint, f64)]) -> f64 {
        samples
            .iter()
            .map(|(x, tau)| self.space.distance_unchecked(&self.eval(x, *tau, *tau), x))
            .fold(0.0, f64::max)
    }

    /// `x + F(x, tau, t) - F(x, tau, tau)` applied to this field.
    pub fn renormalized(&self) -> Result<TangentField, FieldError> {
        if !self.space.is_linear() {
            return Err(FieldError::NotLinear(self.space));
        }
        let inner = self.f.clone();
        let mut out = self.clone();
        out.f = Arc::new(move |x, tau, t| {
            let ft = inner(x, tau, t);
            let f0 = inner(x, tau, tau);
            SpacePoint::Vector(
                x.coords()
                    .iter()
                    .zip(ft.coords().iter().zip(f0.coords()))
                    .map(|(xi, (a, b))| xi + (a - b))
                    .collect(),
            )
        });
        Ok(out)
    }
}

/// Normalize an autonomous-in-`tau` right-hand side:
/// `F(x, tau, t) = x + (G(x, t) - G(x, tau))`.
pub fn normalize_field(
    g: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    space: MetricSpace,
    label: impl Into<String>,
) -> Result<TangentField, FieldError> {
    if !space.is_linear() {
        return Err(FieldError::NotLinear(space));
    }
    Ok(TangentField::new(space, label, move |x, tau, t| {
        let x = x.coords();
        let gt = g(x, t);
        let g0 = g(x, tau);
        SpacePoint::Vector(
            x.iter()
                .zip(gt.iter().zip(&g0))
                .map(|(xi, (a, b))| xi + (a - b))
                .collect(),
        )
    }))
}
