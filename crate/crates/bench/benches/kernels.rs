use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gode_core::{
    check_osgood, cousin_partition, gauge_sequence, solve_tangent_euler, stieltjes_sum, Gauge,
    GaugeBase, ModulusFunction, OsgoodOptions, PartitionScheme, ProblemSpec, RegulatedFunction,
    SolverSettings, TagPolicy,
};

fn partitions(c: &mut Criterion) {
    let base = Gauge::constant(0.0, 1.0, 1.0).unwrap();
    let fine = gauge_sequence(&base, 12);
    c.bench_function("cousin_partition/constant_4096", |b| {
        b.iter(|| cousin_partition(black_box(&fine), TagPolicy::LeftTag).unwrap())
    });
    let power = Gauge::new(
        0.0,
        1.0,
        GaugeBase::Power { center: 0.0, scale: 1.0, power: 2.0, cap: 0.05 },
    )
    .unwrap()
    .with_anchor(0.0, 1e-3)
    .unwrap();
    c.bench_function("cousin_partition/power_gauge", |b| {
        b.iter(|| cousin_partition(black_box(&power), TagPolicy::FreeTag).unwrap())
    });
}

fn stieltjes(c: &mut Criterion) {
    let g = RegulatedFunction::step(0.0, 1.0, 0.5, 1.0).unwrap();
    let gauge = gauge_sequence(
        &Gauge::constant(0.0, 1.0, 1.0).unwrap().with_default_anchor(0.5).unwrap(),
        14,
    );
    c.bench_function("stieltjes_sum/step_16k", |b| {
        b.iter(|| stieltjes_sum(|t| t.sin(), black_box(&g), &gauge, TagPolicy::LeftTag).unwrap())
    });
}

fn solver(c: &mut Criterion) {
    let exp = ProblemSpec::preset("exp").unwrap();
    let settings = SolverSettings {
        levels: 1,
        tol: 1.0,
        scheme: PartitionScheme::Uniform { cells: 1000 },
        ..SolverSettings::default()
    };
    c.bench_function("solve_tangent_euler/exp_1000", |b| {
        b.iter(|| solve_tangent_euler(&exp.field, &exp.x0, exp.interval, black_box(&settings)))
    });
    let bv = ProblemSpec::preset("bv").unwrap();
    let settings = SolverSettings { levels: 1, tol: 1.0, ..settings };
    c.bench_function("solve_tangent_euler/bv_1000", |b| {
        b.iter(|| solve_tangent_euler(&bv.field, &bv.x0, bv.interval, black_box(&settings)))
    });
}

fn osgood(c: &mut Criterion) {
    let moduli = [ModulusFunction::sqrt(), ModulusFunction::identity()];
    c.bench_function("check_osgood/depth_12", |b| {
        b.iter(|| {
            for m in &moduli {
                black_box(check_osgood(m, 1.0, 12, OsgoodOptions::default()).unwrap());
            }
        })
    });
}

criterion_group!(benches, partitions, stieltjes, solver, osgood);
criterion_main!(benches);
