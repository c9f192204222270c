//! The five workflows. Each returns its artifacts as strings so batch runs
//! can write them independently.

use std::fmt::Write as _;

use anyhow::{anyhow, Context, Result};
use gode_core::gode::solver::{level_partition, ContainmentReport, LevelReport};
use gode_core::integration::LevelSum;
use gode_core::problems::bv_steep_pairs;
use gode_core::{
    check_class_f, check_osgood, check_u_conditions, check_weak_class, is_equiregulated,
    shk_stieltjes, solution_defect, solve_on_partition, solve_tangent_euler, uniqueness_monitor,
    ClassFReport, ClassFSamples, ControlFunction, EquiregVerdict, MetricSpace, MonitorReport,
    OsgoodOptions, OsgoodReport, OsgoodVerdict, ProbeSchedule, ProblemSpec, RegulatedFunction,
    SpacePoint, StepSchedule, StieltjesOptions, UReport, WeakClassReport, WeakClassSamples,
};
use serde::Serialize;

use crate::config::{CheckConfig, FamilyConfig, PairConfig, RunConfig};
use crate::setup::{self, Overrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Integrate,
    Check,
    Convergence,
    Monitor,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Integrate => "integrate",
            Command::Check => "check",
            Command::Convergence => "convergence",
            Command::Monitor => "monitor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NotConverged,
}

/// Failure classes that map to distinct exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Malformed config, unknown preset, invalid parameters.
    Input(anyhow::Error),
    /// The computation itself failed, e.g. a trajectory left its domain.
    Compute(anyhow::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Input(e) => write!(f, "input error: {e:#}"),
            RunError::Compute(e) => write!(f, "computation failed: {e:#}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub json: String,
    pub csv: String,
    pub status: Status,
}

fn input<T>(r: Result<T>) -> Result<T, RunError> {
    r.map_err(RunError::Input)
}

fn compute<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Compute(e.into()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 records")
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn state_header(space: &MetricSpace) -> Vec<String> {
    match space {
        MetricSpace::Circle => vec!["theta".into()],
        MetricSpace::Euclidean { dim: 1 } => vec!["x".into()],
        MetricSpace::Euclidean { dim } => (0..*dim).map(|i| format!("x{i}")).collect(),
    }
}

pub fn run_config(cmd: Command, cfg: &RunConfig, o: Overrides) -> Result<Artifacts, RunError> {
    match cmd {
        Command::Solve => solve(cfg, o),
        Command::Integrate => integrate(cfg, o),
        Command::Check => check(cfg, o),
        Command::Convergence => convergence(cfg, o),
        Command::Monitor => monitor(cfg, o),
    }
}

fn problem(cfg: &RunConfig) -> Result<ProblemSpec, RunError> {
    let p = cfg
        .problem
        .as_ref()
        .ok_or_else(|| RunError::Input(anyhow!("config lacks a `problem` section")))?;
    input(setup::problem(p).context("problem"))
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    command: &'static str,
    problem: &'a str,
    description: Option<&'a str>,
    interval: (f64, f64),
    x0: &'a SpacePoint,
    converged: bool,
    accepted_level: Option<u32>,
    cells: usize,
    final_state: &'a SpacePoint,
    reference_final: Option<SpacePoint>,
    max_node_error: Option<f64>,
    levels: &'a [LevelReport],
    containment: Option<&'a ContainmentReport>,
}

fn solve(cfg: &RunConfig, o: Overrides) -> Result<Artifacts, RunError> {
    let spec = problem(cfg)?;
    let settings = input(setup::settings(&cfg.settings, spec.interval, o))?;
    let report = compute(solve_tangent_euler(&spec.field, &spec.x0, spec.interval, &settings))?;
    let traj = &report.trajectory;
    let space = spec.field.space();
    let points = traj.partition().points();
    let max_node_error = spec.reference.as_ref().map(|r| {
        points
            .iter()
            .zip(traj.nodes())
            .map(|(t, v)| space.distance(v, &r(*t)).unwrap_or(f64::NAN))
            .fold(0.0, f64::max)
    });
    let summary = SolveSummary {
        command: "solve",
        problem: &spec.name,
        description: cfg.description.as_deref(),
        interval: spec.interval,
        x0: &spec.x0,
        converged: report.converged,
        accepted_level: report.accepted_level,
        cells: traj.partition().len(),
        final_state: traj.final_state(),
        reference_final: spec.reference.as_ref().map(|r| r(spec.interval.1)),
        max_node_error,
        levels: &report.levels,
        containment: report.containment.as_ref(),
    };
    let mut header = vec!["t".to_string()];
    header.extend(state_header(space));
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(traj.nodes())
        .map(|(t, v)| std::iter::once(num(*t)).chain(v.coords().iter().map(|c| num(*c))).collect())
        .collect();
    Ok(Artifacts {
        json: to_json(&summary),
        csv: csv_table(&header, &rows),
        status: if report.converged {
            Status::Success
        } else {
            Status::NotConverged
        },
    })
}

#[derive(Serialize)]
struct ConvergenceRow {
    k: u32,
    cells: usize,
    mesh: f64,
    defect: f64,
    node_error: Option<f64>,
    final_state: SpacePoint,
}

#[derive(Serialize)]
struct ConvergenceSummary<'a> {
    command: &'static str,
    problem: &'a str,
    description: Option<&'a str>,
    levels: Vec<ConvergenceRow>,
}

fn convergence(cfg: &RunConfig, o: Overrides) -> Result<Artifacts, RunError> {
    let spec = problem(cfg)?;
    let settings = input(setup::settings(&cfg.settings, spec.interval, o))?;
    compute(settings.validate())?;
    let space = spec.field.space();
    let mut rows = Vec::new();
    let mut next = compute(level_partition(&spec.field, spec.interval, &settings, 1))?;
    for k in 1..=settings.levels {
        let p = next;
        next = compute(level_partition(&spec.field, spec.interval, &settings, k + 1))?;
        let traj = compute(solve_on_partition(&spec.field, &spec.x0, &p, settings.backward))?;
        let defect = compute(solution_defect(|t| traj.eval(t), &spec.field, &next))?;
        let node_error = spec.reference.as_ref().map(|r| {
            p.points()
                .iter()
                .zip(traj.nodes())
                .map(|(t, v)| space.distance(v, &r(*t)).unwrap_or(f64::NAN))
                .fold(0.0, f64::max)
        });
        rows.push(ConvergenceRow {
            k,
            cells: p.len(),
            mesh: p.mesh(),
            defect,
            node_error,
            final_state: traj.final_state().clone(),
        });
    }
    let header: Vec<String> = ["k", "cells", "mesh", "defect", "node_error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.cells.to_string(),
                num(r.mesh),
                num(r.defect),
                r.node_error.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    let summary = ConvergenceSummary {
        command: "convergence",
        problem: &spec.name,
        description: cfg.description.as_deref(),
        levels: rows,
    };
    Ok(Artifacts {
        json: to_json(&summary),
        csv: csv_table(&header, &table),
        status: Status::Success,
    })
}

#[derive(Serialize)]
struct IntegrateSummary<'a> {
    command: &'static str,
    description: Option<&'a str>,
    value: f64,
    converged: bool,
    levels: &'a [LevelSum],
}

fn integrate(cfg: &RunConfig, o: Overrides) -> Result<Artifacts, RunError> {
    let ic = cfg
        .integral
        .as_ref()
        .ok_or_else(|| RunError::Input(anyhow!("config lacks an `integral` section")))?;
    let interval = (ic.interval[0], ic.interval[1]);
    let g = input(setup::integrator(&ic.integrator, interval).context("integral.integrator"))?;
    let mut opts = StieltjesOptions::default();
    if let Some(gc) = &ic.gauge {
        opts.gauge = Some(input(setup::gauge(gc, interval).context("integral.gauge"))?);
    }
    if let Some(t) = o.tol.or(ic.tol) {
        opts.tol = t;
    }
    if let Some(m) = o.levels.or(ic.max_level) {
        opts.max_level = m;
    }
    if let Some(p) = ic.policy {
        opts.policy = p;
    }
    let f = setup::scalar(ic.integrand);
    let report = compute(shk_stieltjes(f, &g, &opts))?;
    let header: Vec<String> = ["k", "cells", "mesh", "sum"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .map(|l| vec![l.k.to_string(), l.cells.to_string(), num(l.mesh), num(l.sum)])
        .collect();
    let summary = IntegrateSummary {
        command: "integrate",
        description: cfg.description.as_deref(),
        value: report.value,
        converged: report.converged,
        levels: &report.levels,
    };
    Ok(Artifacts {
        json: to_json(&summary),
        csv: csv_table(&header, &rows),
        status: if report.converged {
            Status::Success
        } else {
            Status::NotConverged
        },
    })
}

fn verdict_text(v: OsgoodVerdict) -> &'static str {
    match v {
        OsgoodVerdict::Osgood => "osgood",
        OsgoodVerdict::NotOsgood => "not osgood",
        OsgoodVerdict::Inconclusive => "inconclusive",
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CheckOutcome {
    Osgood {
        verdict: &'static str,
        report: OsgoodReport,
    },
    ClassF {
        passed: bool,
        report: ClassFReport,
    },
    WeakClass {
        passed: bool,
        report: WeakClassReport,
    },
    UConditions {
        passed: bool,
        report: UReport,
    },
    Equiregulated {
        passed: bool,
        report: EquiregVerdict,
    },
}

impl CheckOutcome {
    fn row(&self) -> Vec<String> {
        let (kind, result, detail) = match self {
            CheckOutcome::Osgood { verdict, report } => (
                "osgood",
                verdict.to_string(),
                report.integrals.last().map(|v| num(*v)).unwrap_or_default(),
            ),
            CheckOutcome::ClassF { passed, report } => (
                "class_f",
                pass_text(*passed),
                num(report.f1.worst_margin.min(report.f2.worst_margin)),
            ),
            CheckOutcome::WeakClass { passed, report } => (
                "weak_class",
                pass_text(*passed),
                num(report.time_regularity.worst_margin.min(report.coupling.worst_margin)),
            ),
            CheckOutcome::UConditions { passed, report } => (
                "u_conditions",
                pass_text(*passed),
                format!("u1={} u2={:?}", report.u1_pass, report.u2_pass),
            ),
            CheckOutcome::Equiregulated { passed, report } => (
                "equiregulated",
                pass_text(*passed),
                match report {
                    EquiregVerdict::Pass { probes } => format!("probes={probes}"),
                    EquiregVerdict::Fail { tau, member, .. } => format!("tau={tau} member={member}"),
                },
            ),
        };
        vec![kind.to_string(), result, detail]
    }
}

fn pass_text(p: bool) -> String {
    if p { "pass" } else { "fail" }.to_string()
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    command: &'static str,
    description: Option<&'a str>,
    seed: u64,
    checks: Vec<CheckOutcome>,
}

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2) - 1;
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

fn point(space: &MetricSpace, coords: &[f64]) -> Result<SpacePoint, RunError> {
    input(space.point(coords).map_err(anyhow::Error::from))
}

fn check(cfg: &RunConfig, o: Overrides) -> Result<Artifacts, RunError> {
    if cfg.checks.is_empty() {
        return Err(RunError::Input(anyhow!("config lists no `checks`")));
    }
    let seed = o.seed.unwrap_or(cfg.seed);
    let mut spec: Option<ProblemSpec> = None;
    let mut outcomes = Vec::new();
    for (i, c) in cfg.checks.iter().enumerate() {
        let ctx = || format!("checks[{i}]");
        let outcome = match c {
            CheckConfig::Osgood { modulus, nu, depth } => {
                let m = setup::modulus(modulus);
                let report = input(check_osgood(&m, *nu, *depth, OsgoodOptions::default()).with_context(ctx))?;
                CheckOutcome::Osgood {
                    verdict: verdict_text(report.verdict),
                    report,
                }
            }
            CheckConfig::Equiregulated { family, eps } => {
                let members: Vec<RegulatedFunction> = match family {
                    FamilyConfig::Powers { max } => (1..=*max)
                        .map(|n| RegulatedFunction::continuous(0.0, 1.0, move |t| t.powi(n as i32)))
                        .collect::<Result<_, _>>(),
                    FamilyConfig::Translates { shifts } => shifts
                        .iter()
                        .map(|&c| RegulatedFunction::continuous(0.0, 1.0, move |t| t + c))
                        .collect::<Result<_, _>>(),
                }
                .map_err(|e| RunError::Input(anyhow!(e)))?;
                let report = input(is_equiregulated(&members, eps, ProbeSchedule::default()).with_context(ctx))?;
                CheckOutcome::Equiregulated {
                    passed: report.passed(),
                    report,
                }
            }
            _ => {
                if spec.is_none() {
                    spec = Some(problem(cfg)?);
                }
                let spec = spec.as_ref().expect("just built");
                field_check(c, spec, seed).map_err(|e| match e {
                    RunError::Input(e) => RunError::Input(e.context(ctx())),
                    RunError::Compute(e) => RunError::Compute(e.context(ctx())),
                })?
            }
        };
        outcomes.push(outcome);
    }
    let rows: Vec<Vec<String>> = outcomes.iter().map(CheckOutcome::row).collect();
    let header: Vec<String> = ["kind", "result", "detail"].iter().map(|s| s.to_string()).collect();
    let summary = CheckSummary {
        command: "check",
        description: cfg.description.as_deref(),
        seed,
        checks: outcomes,
    };
    Ok(Artifacts {
        json: to_json(&summary),
        csv: csv_table(&header, &rows),
        status: Status::Success,
    })
}

fn field_check(c: &CheckConfig, spec: &ProblemSpec, seed: u64) -> Result<CheckOutcome, RunError> {
    let field = &spec.field;
    let space = field.space();
    let (a, b) = spec.interval;
    Ok(match c {
        CheckConfig::ClassF {
            h_slope,
            omega,
            xs,
            times,
            steep_pairs,
        } => {
            if !space.is_linear() {
                return Err(RunError::Input(anyhow!("class_f needs a linear space")));
            }
            for x in xs {
                point(space, x)?;
            }
            let slope = *h_slope;
            let h = input(RegulatedFunction::continuous(a, b, move |t| slope * t).map_err(anyhow::Error::from))?;
            let mut pairs = Vec::new();
            if *steep_pairs {
                pairs = bv_steep_pairs((0..40).map(|i| 10f64.powf(0.3 * i as f64)))
                    .into_iter()
                    .filter(|(s, t)| a <= *s && *t <= b)
                    .collect();
            }
            let samples = ClassFSamples {
                xs: xs.clone(),
                times: grid(a, b, *times),
                pairs,
            };
            let g = |x: &[f64], t: f64| -> Vec<f64> {
                let p = SpacePoint::Vector(x.to_vec());
                let f = field.eval(&p, a, t);
                f.coords().iter().zip(x).map(|(fi, xi)| fi - xi).collect()
            };
            let report = check_class_f(g, &h, &setup::modulus(omega), &samples);
            CheckOutcome::ClassF {
                passed: report.passed(),
                report,
            }
        }
        CheckConfig::WeakClass {
            points,
            times,
            tuples,
        } => {
            let samples = WeakClassSamples {
                points: points.iter().map(|p| point(space, p)).collect::<Result<_, _>>()?,
                times: grid(a, b, *times),
                tuples: *tuples,
                seed,
            };
            let report = input(check_weak_class(field, &samples).map_err(anyhow::Error::from))?;
            CheckOutcome::WeakClass {
                passed: report.passed(),
                report,
            }
        }
        CheckConfig::UConditions { pairs, tol } => {
            let triples = pairs
                .iter()
                .map(|(x, y, tau)| Ok((point(space, x)?, point(space, y)?, *tau)))
                .collect::<Result<Vec<_>, RunError>>()?;
            let report = input(
                check_u_conditions(field, &triples, (a, b), StepSchedule::default(), *tol)
                    .map_err(anyhow::Error::from),
            )?;
            CheckOutcome::UConditions {
                passed: report.u1_pass && report.u2_pass != Some(false),
                report,
            }
        }
        CheckConfig::Osgood { .. } | CheckConfig::Equiregulated { .. } => unreachable!("handled by the caller"),
    })
}

#[derive(Serialize)]
struct MonitorSummary<'a> {
    command: &'static str,
    description: Option<&'a str>,
    /// Whether each solved path converged; empty for closed-form pairs.
    converged: Vec<bool>,
    report: &'a MonitorReport,
}

fn monitor(cfg: &RunConfig, o: Overrides) -> Result<Artifacts, RunError> {
    let mc = cfg
        .monitor
        .as_ref()
        .ok_or_else(|| RunError::Input(anyhow!("config lacks a `monitor` section")))?;
    let omega = setup::modulus(&mc.omega);
    let tol = o.tol.unwrap_or(mc.tol);
    let (report, converged) = match &mc.pair {
        PairConfig::Solve { x0 } => {
            let spec = problem(cfg)?;
            let settings = input(setup::settings(&cfg.settings, spec.interval, o))?;
            let space = *spec.field.space();
            let mut trajs = Vec::new();
            let mut converged = Vec::new();
            for x in x0 {
                let start = point(&space, x)?;
                let r = compute(solve_tangent_euler(&spec.field, &start, spec.interval, &settings))?;
                converged.push(r.converged);
                trajs.push(r.trajectory);
            }
            let xi = spec
                .field
                .metadata()
                .xi
                .clone()
                .unwrap_or_else(ControlFunction::identity);
            let (a, b) = spec.interval;
            let report = input(
                uniqueness_monitor(
                    |t| trajs[0].eval(t),
                    |t| trajs[1].eval(t),
                    &space,
                    &omega,
                    &xi,
                    mc.nu,
                    &grid(a, b, mc.grid + 1),
                    tol,
                )
                .map_err(anyhow::Error::from),
            )?;
            (report, converged)
        }
        PairConfig::ClosedForm { u, v } => {
            let (u, v) = (setup::curve(*u), setup::curve(*v));
            let [a, b] = mc.interval;
            if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
                return Err(RunError::Input(anyhow!("monitor.interval must be increasing")));
            }
            let space = MetricSpace::Euclidean { dim: 1 };
            let report = input(
                uniqueness_monitor(
                    |t| SpacePoint::scalar(u(t)),
                    |t| SpacePoint::scalar(v(t)),
                    &space,
                    &omega,
                    &ControlFunction::identity(),
                    mc.nu,
                    &grid(a, b, mc.grid + 1),
                    tol,
                )
                .map_err(anyhow::Error::from),
            )?;
            (report, Vec::new())
        }
    };
    let header: Vec<String> = ["t", "delta", "psi"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = report
        .samples
        .iter()
        .map(|s| vec![num(s.t), num(s.delta), s.psi.map(num).unwrap_or_default()])
        .collect();
    let summary = MonitorSummary {
        command: "monitor",
        description: cfg.description.as_deref(),
        converged,
        report: &report,
    };
    Ok(Artifacts {
        json: to_json(&summary),
        csv: csv_table(&header, &rows),
        status: Status::Success,
    })
}

/// One-line human summary printed after each run.
pub fn headline(cmd: Command, artifacts: &Artifacts) -> String {
    let v: serde_json::Value = serde_json::from_str(&artifacts.json).unwrap_or_default();
    let mut s = String::new();
    match cmd {
        Command::Solve => {
            let _ = write!(
                s,
                "converged={} level={} final={}",
                v["converged"], v["accepted_level"], v["final_state"]
            );
        }
        Command::Integrate => {
            let _ = write!(s, "value={} converged={}", v["value"], v["converged"]);
        }
        Command::Check => {
            let parts: Vec<String> = v["checks"]
                .as_array()
                .map(|cs| {
                    cs.iter()
                        .map(|c| match c["kind"].as_str() {
                            Some("osgood") => format!("osgood: {}", c["verdict"].as_str().unwrap_or("?")),
                            Some(k) => format!("{k}: {}", if c["passed"] == true { "pass" } else { "fail" }),
                            None => "?".into(),
                        })
                        .collect()
                })
                .unwrap_or_default();
            s = parts.join("; ");
        }
        Command::Convergence => {
            let n = v["levels"].as_array().map_or(0, |l| l.len());
            let last = &v["levels"][n.saturating_sub(1)];
            let _ = write!(s, "levels={n} last_defect={} last_node_error={}", last["defect"], last["node_error"]);
        }
        Command::Monitor => {
            let _ = write!(s, "verdict={}", v["report"]["verdict"]["verdict"]);
        }
    }
    if artifacts.status == Status::NotConverged {
        s.push_str(" (not converged)");
    }
    s
}
