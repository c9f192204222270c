//! Run configuration files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use gode_core::{BackwardSolve, TagPolicy};
use serde::Deserialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// One config file. Each subcommand reads the sections it needs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub settings: SettingsConfig,
    #[serde(default)]
    pub integral: Option<IntegralConfig>,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    #[serde(default)]
    pub monitor: Option<MonitorConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.version != SCHEMA_VERSION {
            bail!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                cfg.version
            );
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        RunConfig::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub preset: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

/// Right-hand side `f(x, t)` presets, applied componentwise.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum RhsConfig {
    Zero,
    Identity,
    SinT,
    CosT,
    /// `c * x`
    Scaled(f64),
}

/// Regulated integrators `g` on the problem interval.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegratorConfig {
    Identity,
    /// Left-continuous unit-style step.
    Step { at: f64, height: f64 },
    /// Several left-continuous steps `(at, height)`.
    Steps { jumps: Vec<(f64, f64)> },
    /// `s^2 cos(pi / s^2)`.
    BvY,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ScalarConfig {
    Zero,
    One,
    Identity,
    Square,
    Sin,
    Cos,
    Exp,
    BvDerivative,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulusConfig {
    Identity,
    Linear { l: f64 },
    Power { c: f64, p: f64 },
    Sqrt,
    LogLipschitz {
        #[serde(default)]
        declared_osgood: Option<bool>,
    },
    Constant { c: f64 },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AnchorConfig {
    At(f64),
    WithRadius { at: f64, radius: f64 },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeConfig {
    Constant {
        value: f64,
        #[serde(default)]
        anchors: Vec<AnchorConfig>,
    },
    Piecewise {
        pieces: Vec<(f64, f64, f64)>,
        #[serde(default)]
        anchors: Vec<AnchorConfig>,
    },
    Power {
        center: f64,
        scale: f64,
        power: f64,
        cap: f64,
        #[serde(default)]
        anchors: Vec<AnchorConfig>,
    },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    ConstantGauge,
    Uniform { cells: usize },
    Gauge { gauge: GaugeConfig },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SettingsConfig {
    pub levels: Option<u32>,
    pub tol: Option<f64>,
    pub lambda: Option<f64>,
    pub tag_policy: Option<TagPolicy>,
    pub scheme: Option<SchemeConfig>,
    pub backward: Option<BackwardSolve>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralConfig {
    pub integrand: ScalarConfig,
    pub integrator: IntegratorConfig,
    #[serde(default = "unit_interval")]
    pub interval: [f64; 2],
    #[serde(default)]
    pub gauge: Option<GaugeConfig>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_level: Option<u32>,
    #[serde(default)]
    pub policy: Option<TagPolicy>,
}

fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_nu() -> f64 {
    1.0
}

fn default_depth() -> u32 {
    12
}

fn default_times() -> usize {
    21
}

fn default_tuples() -> usize {
    2000
}

fn default_u_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// `t^n` for `n = 1..=max` on `[0, 1]`.
    Powers { max: u32 },
    /// `t + c` for each shift on `[0, 1]`.
    Translates { shifts: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckConfig {
    Osgood {
        modulus: ModulusConfig,
        #[serde(default = "default_nu")]
        nu: f64,
        #[serde(default = "default_depth")]
        depth: u32,
    },
    /// Class conditions of `G(x, t) = F(x, a, t) - x` with `h(t) = slope * t`.
    ClassF {
        h_slope: f64,
        omega: ModulusConfig,
        xs: Vec<Vec<f64>>,
        #[serde(default = "default_times")]
        times: usize,
        /// Add the steep pairs of the oscillating example near zero.
        #[serde(default)]
        steep_pairs: bool,
    },
    WeakClass {
        points: Vec<Vec<f64>>,
        #[serde(default = "default_times")]
        times: usize,
        #[serde(default = "default_tuples")]
        tuples: usize,
    },
    UConditions {
        /// `(x, y, tau)` triples.
        pairs: Vec<(Vec<f64>, Vec<f64>, f64)>,
        #[serde(default = "default_u_tol")]
        tol: f64,
    },
    Equiregulated {
        family: FamilyConfig,
        eps: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum CurveConfig {
    Zero,
    TSquared,
    Exp,
    Identity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairConfig {
    /// Solve the config's problem from both initial values.
    Solve { x0: [Vec<f64>; 2] },
    ClosedForm { u: CurveConfig, v: CurveConfig },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub pair: PairConfig,
    pub omega: ModulusConfig,
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Number of grid intervals; the grid has `grid + 1` points.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_monitor_tol")]
    pub tol: f64,
    #[serde(default = "unit_interval")]
    pub interval: [f64; 2],
}

fn default_grid() -> usize {
    99
}

fn default_monitor_tol() -> f64 {
    1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::parse(r#"{"version": 1, "problem": {"preset": "exp"}}"#).unwrap();
        assert_eq!(c.problem.unwrap().preset, "exp");
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn version_is_checked() {
        let e = RunConfig::parse(r#"{"version": 2}"#).unwrap_err();
        assert!(e.to_string().contains("version 2"));
    }

    #[test]
    fn unknown_fields_report_position() {
        let e = RunConfig::parse("{\"version\": 1,\n  \"problme\": {}}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("problme") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn tagged_sections() {
        let c = RunConfig::parse(
            r#"{"version": 1,
                "settings": {"scheme": {"type": "uniform", "cells": 1000}, "tag_policy": "left"},
                "checks": [{"kind": "osgood", "modulus": {"type": "sqrt"}}],
                "integral": {"integrand": "identity", "integrator": {"type": "step", "at": 0.5, "height": 1}}}"#,
        )
        .unwrap();
        assert_eq!(c.settings.scheme, Some(SchemeConfig::Uniform { cells: 1000 }));
        assert!(matches!(
            &c.checks[0],
            CheckConfig::Osgood { modulus: ModulusConfig::Sqrt, nu, depth: 12 } if *nu == 1.0
        ));
        let i = c.integral.unwrap();
        assert_eq!(i.integrator, IntegratorConfig::Step { at: 0.5, height: 1.0 });
    }

    #[test]
    fn anchors_accept_both_forms() {
        let g: GaugeConfig = serde_json::from_str(
            r#"{"type": "constant", "value": 1, "anchors": [0.5, {"at": 0.2, "radius": 0.01}]}"#,
        )
        .unwrap();
        let GaugeConfig::Constant { anchors, .. } = g else { panic!() };
        assert_eq!(anchors[0], AnchorConfig::At(0.5));
        assert_eq!(anchors[1], AnchorConfig::WithRadius { at: 0.2, radius: 0.01 });
    }
}
