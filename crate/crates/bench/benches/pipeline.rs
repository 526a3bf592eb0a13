use std::f64::consts::FRAC_PI_4;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use holonomy_core::{
    bundle_along, holonomy_m, stroboscopic_evolve, Coord, GaugePolicy, LoopDef, ModelSpec, ParameterPoint, Schedule,
};

fn lambda_loop() -> (ModelSpec, LoopDef) {
    let spec = ModelSpec::spin_half(1.0, 1);
    (spec, LoopDef::coordinate(Coord::Lambda, ParameterPoint::spin_half(0.0, 0.7, 0.0)))
}

fn three_half_loop() -> (ModelSpec, LoopDef) {
    let spec = ModelSpec::spin_three_half(1.1, 1);
    (spec, LoopDef::coordinate(Coord::Lambda, ParameterPoint::spin_three_half(0.0, 0.7, FRAC_PI_4, 0.3, 1.1)))
}

fn bench_bundle(c: &mut Criterion) {
    let mut group = c.benchmark_group("bundle_along");
    for (name, (spec, loop_def)) in [("spin_half", lambda_loop()), ("spin_three_half", three_half_loop())] {
        for k in [256usize, 1024] {
            group.bench_with_input(BenchmarkId::new(name, k), &k, |b, &k| {
                b.iter(|| bundle_along(&spec, &loop_def, black_box(k), GaugePolicy::SmoothPhase, 1e-6).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_holonomy(c: &mut Criterion) {
    let mut group = c.benchmark_group("holonomy_m");
    for (name, (spec, loop_def)) in [("spin_half", lambda_loop()), ("spin_three_half", three_half_loop())] {
        let bundle = bundle_along(&spec, &loop_def, 1024, GaugePolicy::SmoothPhase, 1e-6).unwrap();
        group.bench_function(name, |b| b.iter(|| holonomy_m(black_box(&bundle)).unwrap()));
    }
    group.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let (spec, loop_def) = lambda_loop();
    let sched = Schedule::new(4000, loop_def);
    c.bench_function("stroboscopic_evolve/spin_half/4000", |b| {
        b.iter(|| stroboscopic_evolve(&spec, black_box(&sched)).unwrap())
    });
}

criterion_group!(benches, bench_bundle, bench_holonomy, bench_evolve);
criterion_main!(benches);
