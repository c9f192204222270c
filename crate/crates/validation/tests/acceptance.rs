//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use gode_cli::{execute, Command, Format, RunArgs};
use gode_core::gode::solver::level_partition;
use gode_core::problems::{bv_example_field, bv_y, bv_y_dot, circle_rotation_field, linear_growth_field, mde_field};
use gode_core::{
    check_class_f, check_osgood, cousin_partition, is_delta_fine, is_equiregulated, shk_stieltjes,
    solution_defect, solve_on_partition, solve_tangent_euler, split_at_tags, uniqueness_monitor,
    ClassFSamples, ControlFunction, EquiregVerdict, Gauge, GaugeBase, MetricSpace, ModulusFunction,
    MonitorVerdict, OsgoodOptions, OsgoodVerdict, PartitionScheme, ProbeSchedule, RegulatedFunction,
    SolverSettings, SpacePoint, StieltjesOptions, TagPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn scalar(p: &SpacePoint) -> f64 {
    p.coords()[0]
}

fn telescoping_exactness() -> Outcome {
    let start = Instant::now();
    let field = bv_example_field();
    let settings = SolverSettings::default();
    let mut worst_node = 0.0f64;
    let mut worst_defect = 0.0f64;
    let mut cells = 0;
    for k in 1..=10 {
        let p = level_partition(&field, (0.0, 1.0), &settings, k).map_err(err)?;
        let traj = solve_on_partition(&field, &SpacePoint::scalar(1.0), &p, settings.backward).map_err(err)?;
        for (t, v) in p.points().iter().zip(traj.nodes()) {
            worst_node = worst_node.max((scalar(v) - 1.0 - bv_y(*t)).abs());
        }
        let next = level_partition(&field, (0.0, 1.0), &settings, k + 1).map_err(err)?;
        worst_defect = worst_defect.max(solution_defect(|t| traj.eval(t), &field, &next).map_err(err)?);
        worst_defect = worst_defect.max(
            solution_defect(|t| SpacePoint::scalar(1.0 + bv_y(t)), &field, &p).map_err(err)?,
        );
        cells = p.len();
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(worst_node <= 1e-12, || format!("node error {worst_node:e}"))?;
    ensure(worst_defect <= 1e-12, || format!("defect {worst_defect:e}"))?;
    ensure(elapsed < 1.0, || format!("runtime {elapsed:.3}s"))?;

    let mut margins = Vec::new();
    for c in [1.0, 1e3, 1e6] {
        let h = RegulatedFunction::continuous(0.0, 1.0, move |t| c * t).map_err(err)?;
        let samples = ClassFSamples {
            xs: vec![vec![0.0], vec![1.0]],
            times: (0..=20).map(|i| i as f64 / 20.0).collect(),
            pairs: gode_core::problems::bv_steep_pairs((0..40).map(|i| 10f64.powf(0.3 * i as f64))),
        };
        let r = check_class_f(|_, t| vec![bv_y(t)], &h, &ModulusFunction::identity(), &samples);
        ensure(!r.f1.passed(), || format!("no F1 violation found for C = {c}"))?;
        margins.push(r.f1.worst_margin);
    }
    Ok(format!(
        "node error {worst_node:.1e}, defect {worst_defect:.1e} up to {cells} cells in {elapsed:.3}s; \
         growth bound broken for C = 1, 1e3, 1e6 (worst margins {:.2e}, {:.2e}, {:.2e})",
        margins[0], margins[1], margins[2]
    ))
}

fn classical_consistency() -> Outcome {
    let start = Instant::now();
    let field = linear_growth_field(1, 1.0).map_err(err)?;
    let settings = SolverSettings {
        scheme: PartitionScheme::Uniform { cells: 1000 },
        tag_policy: TagPolicy::LeftTag,
        levels: 8,
        ..Default::default()
    };
    let x0 = SpacePoint::scalar(1.0);
    let mut defects = Vec::new();
    let mut first_error = f64::NAN;
    let mut next = level_partition(&field, (0.0, 1.0), &settings, 1).map_err(err)?;
    for k in 1..=8 {
        let p = next;
        next = level_partition(&field, (0.0, 1.0), &settings, k + 1).map_err(err)?;
        let traj = solve_on_partition(&field, &x0, &p, settings.backward).map_err(err)?;
        if k == 1 {
            ensure(p.len() == 1000 && p.cells().iter().all(|c| c.tag == c.left), || {
                "level 1 is not 1000 left-tagged cells".into()
            })?;
            first_error = (scalar(traj.final_state()) - std::f64::consts::E).abs();
        }
        defects.push(solution_defect(|t| traj.eval(t), &field, &next).map_err(err)?);
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(first_error < 3e-3, || format!("|x(1) - e| = {first_error:e}"))?;
    ensure(defects.windows(2).all(|w| w[1] <= w[0]), || format!("defects not monotone: {defects:?}"))?;
    ensure(elapsed < 1.0, || format!("runtime {elapsed:.3}s"))?;
    Ok(format!(
        "|x(1) - e| = {first_error:.3e} at 1000 cells; defect {:.2e} -> {:.2e} over 8 levels in {elapsed:.3}s",
        defects[0], defects[7]
    ))
}

fn impulse_correctness() -> Outcome {
    let start = Instant::now();
    let g = RegulatedFunction::step(0.0, 1.0, 0.5, 1.0).map_err(err)?;
    let field = mde_field(1, |_, _| vec![0.0], |x, _| x.to_vec(), g).map_err(err)?;
    let settings = SolverSettings {
        scheme: PartitionScheme::Uniform { cells: 7 },
        levels: 4,
        ..Default::default()
    };
    let report = solve_tangent_euler(&field, &SpacePoint::scalar(1.0), (0.0, 1.0), &settings).map_err(err)?;
    let traj = &report.trajectory;
    ensure(traj.partition().tags().any(|t| t == 0.5), || "0.5 is not a tag".into())?;
    let mut worst = 0.0f64;
    let dense = (0..=10_000).map(|i| i as f64 / 10_000.0);
    for t in traj.partition().points().into_iter().chain(dense) {
        let expect = if t > 0.5 { 2.0 } else { 1.0 };
        worst = worst.max((scalar(&traj.eval(t)) - expect).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-12, || format!("deviation {worst:e}"))?;
    ensure(elapsed < 1.0, || format!("runtime {elapsed:.3}s"))?;
    Ok(format!(
        "1 on [0, 0.5], 2 on (0.5, 1] within {worst:.1e}; 0.5 tagged; {elapsed:.3}s"
    ))
}

fn stieltjes_jump_integral() -> Outcome {
    let g = RegulatedFunction::step(0.0, 1.0, 0.5, 1.0).map_err(err)?;
    let opts = StieltjesOptions {
        max_level: 6,
        ..Default::default()
    };
    let r = shk_stieltjes(|t| t, &g, &opts).map_err(err)?;
    ensure(r.converged && (r.value - 0.5).abs() <= 1e-9, || {
        format!("step integral {} after {} levels", r.value, r.levels.len())
    })?;
    let step_line = format!("int t dg = {} in {} levels", r.value, r.levels.len());

    // oscillating integrand: gauge c s^3 with an anchor at 0, refined 4 times
    let start = Instant::now();
    let id = RegulatedFunction::continuous(0.0, 1.0, |t| t).map_err(err)?;
    let gauge = Gauge::new(
        0.0,
        1.0,
        GaugeBase::Power {
            center: 0.0,
            scale: 1.0,
            power: 3.0,
            cap: 1.0,
        },
    )
    .and_then(|g| g.with_anchor(0.0, 0.01))
    .map_err(err)?;
    let opts = StieltjesOptions {
        gauge: Some(gauge),
        tol: 1e-6,
        max_level: 4,
        policy: TagPolicy::FreeTag,
    };
    let r = shk_stieltjes(bv_y_dot, &id, &opts).map_err(err)?;
    let last = r.levels.last().expect("at least one level");
    let error = (r.value + 1.0).abs();
    ensure(error <= 1e-6, || {
        format!(
            "{step_line}; int y' dt = {:.9} (error {error:.2e}) after {} levels, {} cells, {:.1}s",
            r.value,
            r.levels.len(),
            last.cells,
            start.elapsed().as_secs_f64()
        )
    })?;
    Ok(format!("{step_line}; int y' dt = {:.9}", r.value))
}

fn osgood_classifier() -> Outcome {
    let lin = check_osgood(&ModulusFunction::identity(), 1.0, 12, OsgoodOptions::default()).map_err(err)?;
    let worst = lin
        .increments
        .iter()
        .map(|d| (d - std::f64::consts::LN_10).abs())
        .fold(0.0, f64::max);
    ensure(lin.verdict == OsgoodVerdict::Osgood, || format!("identity: {:?}", lin.verdict))?;
    ensure(worst <= 1e-6, || format!("increment deviation {worst:e}"))?;
    let sqrt = check_osgood(&ModulusFunction::sqrt(), 1.0, 12, OsgoodOptions::default()).map_err(err)?;
    let top = sqrt.integrals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(sqrt.verdict == OsgoodVerdict::NotOsgood, || format!("sqrt: {:?}", sqrt.verdict))?;
    ensure(top <= 2.0 + 1e-9, || format!("sqrt integral {top}"))?;
    Ok(format!(
        "identity osgood (increments ln 10 within {worst:.1e}); sqrt not osgood (integral {top:.9} <= 2)"
    ))
}

fn uniqueness_monitor_check() -> Outcome {
    let field = linear_growth_field(1, 1.0).map_err(err)?;
    let settings = SolverSettings {
        scheme: PartitionScheme::Uniform { cells: 1000 },
        levels: 1,
        ..Default::default()
    };
    let solve = |x: f64| solve_tangent_euler(&field, &SpacePoint::scalar(x), (0.0, 1.0), &settings);
    let u = solve(1.0).map_err(err)?.trajectory;
    let v = solve(1.1).map_err(err)?.trajectory;
    let grid: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let line = MetricSpace::euclidean(1).map_err(err)?;
    let omega = ModulusFunction::identity();
    let xi = ControlFunction::identity();
    let r = uniqueness_monitor(|t| u.eval(t), |t| v.eval(t), &line, &omega, &xi, 1.0, &grid, 1e-9).map_err(err)?;
    ensure(r.verdict == MonitorVerdict::Nondecreasing, || format!("x' = x pair: {:?}", r.verdict))?;
    let r2 = uniqueness_monitor(
        |t| SpacePoint::scalar(t * t),
        |_| SpacePoint::scalar(0.0),
        &line,
        &omega,
        &xi,
        1.0,
        &grid,
        1e-9,
    )
    .map_err(err)?;
    let MonitorVerdict::Decreasing { from, to, drop } = r2.verdict else {
        return Err(format!("t^2 vs 0 pair: {:?}", r2.verdict));
    };
    Ok(format!(
        "x' = x pair nondecreasing on 100 points; t^2 vs 0 drops by {drop:.3} between t = {from:.3} and {to:.3}"
    ))
}

fn random_gauge(rng: &mut ChaCha8Rng) -> Result<Gauge, String> {
    let pieces = rng.gen_range(1..=5);
    let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut bounds = vec![0.0];
    bounds.extend(cuts);
    bounds.push(1.0);
    let base: Vec<(f64, f64, f64)> = bounds
        .windows(2)
        .map(|w| (w[0], w[1], 10f64.powf(rng.gen_range(-3.0..-0.3))))
        .collect();
    let mut g = Gauge::new(0.0, 1.0, GaugeBase::Piecewise(base)).map_err(err)?;
    for _ in 0..rng.gen_range(0..=3) {
        let at = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) };
        g = g.with_anchor(at, 10f64.powf(rng.gen_range(-4.0..-1.0))).map_err(err)?;
    }
    Ok(g)
}

fn partition_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cells = 0usize;
    for i in 0..100 {
        let g = random_gauge(&mut rng)?;
        for policy in [TagPolicy::LeftTag, TagPolicy::FreeTag] {
            let p = cousin_partition(&g, policy).map_err(err)?;
            let check = is_delta_fine(&p, &g).map_err(err)?;
            ensure(check.fine && check.missing_anchors.is_empty(), || {
                format!("gauge {i} {policy:?}: {check:?}")
            })?;
            let q = split_at_tags(&p);
            ensure(is_delta_fine(&q, &g).map_err(err)?.fine, || {
                format!("gauge {i} {policy:?}: split partition not fine")
            })?;
            cells += p.len();
        }
    }
    Ok(format!("100 gauges x 2 tag policies fine before and after splitting ({cells} cells)"))
}

fn circle_run() -> Outcome {
    let field = circle_rotation_field(1.0);
    let settings = SolverSettings::default();
    let start = SpacePoint::angle(0.0);
    let full = solve_tangent_euler(&field, &start, (0.0, 2.0 * std::f64::consts::PI), &settings).map_err(err)?;
    let back = MetricSpace::Circle.distance(full.trajectory.final_state(), &start).map_err(err)?;
    ensure(back <= 1e-9, || format!("return distance {back:e}"))?;
    let ten = solve_tangent_euler(&field, &start, (0.0, 10.0), &settings).map_err(err)?;
    let expect = SpacePoint::angle(10.0 % (2.0 * std::f64::consts::PI));
    let d = MetricSpace::Circle.distance(ten.trajectory.final_state(), &expect).map_err(err)?;
    ensure(d <= 1e-6, || format!("distance to 10 mod 2pi: {d:e}"))?;
    Ok(format!("return distance {back:.1e}; |theta(10) - 10 mod 2pi| = {d:.1e}"))
}

fn equiregulated_detector() -> Outcome {
    let powers: Vec<RegulatedFunction> = (1..=50)
        .map(|n| RegulatedFunction::continuous(0.0, 1.0, move |t| t.powi(n)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let eps = [0.5, 0.25, 0.1];
    let v = is_equiregulated(&powers, &eps, ProbeSchedule::default()).map_err(err)?;
    let EquiregVerdict::Fail { tau, member, .. } = v else {
        return Err(format!("powers passed: {v:?}"));
    };
    ensure(tau >= 0.95, || format!("witness tau = {tau}"))?;
    let translates: Vec<RegulatedFunction> = [0.0, 0.5]
        .iter()
        .map(|&c| RegulatedFunction::continuous(0.0, 1.0, move |t| t + c))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let v2 = is_equiregulated(&translates, &eps, ProbeSchedule::default()).map_err(err)?;
    ensure(v2.passed(), || format!("translates failed: {v2:?}"))?;
    Ok(format!("powers fail at tau = {tau:.4} (t^{}); translates pass", member + 1))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(err)?
        .map(|e| {
            let e = e.map_err(err)?;
            let bytes = std::fs::read(e.path()).map_err(err)?;
            Ok((e.file_name().to_string_lossy().into_owned(), bytes))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let dir = configs_dir();
    let batches: [(Command, &[&str]); 5] = [
        (Command::Solve, &["exp", "impulse", "circle", "composite", "bv_telescoping"]),
        (Command::Check, &["bv_telescoping", "osgood_sqrt", "equiregulated"]),
        (Command::Monitor, &["monitor_exp", "monitor_sqrt"]),
        (Command::Integrate, &["step_stieltjes"]),
        (Command::Convergence, &["exp_convergence", "impulse"]),
    ];
    let mut outputs = Vec::new();
    for jobs in [1usize, 4, 4] {
        let out = tempfile::tempdir().map_err(err)?;
        for (cmd, names) in &batches {
            let args = RunArgs {
                configs: names.iter().map(|n| dir.join(format!("{n}.json"))).collect(),
                tol: None,
                levels: None,
                seed: None,
                out: Some(out.path().to_path_buf()),
                format: Format::Json,
                jobs,
            };
            for o in execute(*cmd, &args).map_err(err)? {
                if let Err(e) = o.result {
                    return Err(format!("{}: {e}", o.config.display()));
                }
            }
        }
        outputs.push(read_dir_sorted(out.path())?);
    }
    let files = outputs[0].len();
    ensure(files == 2 * 13, || format!("expected 26 artifacts, found {files}"))?;
    ensure(outputs[0] == outputs[1] && outputs[1] == outputs[2], || {
        "artifacts differ between sequential and parallel runs".into()
    })?;
    Ok(format!("{files} artifacts byte-identical across 1 sequential and 2 parallel batch runs"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("telescoping exactness", telescoping_exactness),
        ("classical consistency", classical_consistency),
        ("impulse correctness", impulse_correctness),
        ("stieltjes jump integral", stieltjes_jump_integral),
        ("osgood classifier", osgood_classifier),
        ("uniqueness monitor", uniqueness_monitor_check),
        ("partition round-trips", partition_round_trips),
        ("metric-space run", circle_run),
        ("equiregulated detector", equiregulated_detector),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
