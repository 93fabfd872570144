use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dirac_bench::{preset, PRESETS};
use dirac_core::flow::{initial_state, FlowSetup};
use dirac_core::sample::random_expr;
use dirac_core::{parse_expr, render_expr, ConstrainedSystem, VarId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn derive(c: &mut Criterion) {
    let mut group = c.benchmark_group("derive");
    for (name, _) in PRESETS {
        let def = preset(name);
        group.bench_function(*name, |b| {
            b.iter(|| ConstrainedSystem::derive(black_box(&def.lagrangian), &def.chart).unwrap())
        });
    }
    group.finish();
}

fn bracket(c: &mut Criterion) {
    let def = preset("so2");
    let sys = ConstrainedSystem::derive(&def.lagrangian, &def.chart).unwrap();
    let chart = &sys.chart;
    let vars: Vec<VarId> = chart.fields().iter().chain(chart.momenta()).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<_> = (0..32)
        .map(|_| {
            (
                random_expr(&mut rng, chart, &vars, 4, 8),
                random_expr(&mut rng, chart, &vars, 4, 8),
            )
        })
        .collect();
    c.bench_function("bracket/random_degree4", |b| {
        b.iter(|| {
            for (f, g) in &pairs {
                black_box(sys.bracket(f, g).unwrap());
            }
        })
    });
    c.bench_function("bracket/dirac", |b| {
        b.iter(|| {
            for (f, g) in &pairs[..4] {
                black_box(sys.dirac_bracket(f, g).unwrap());
            }
        })
    });
}

fn parse_render(c: &mut Criterion) {
    let def = preset("so2");
    let chart = &def.chart;
    let vars: Vec<VarId> = chart.fields().iter().chain(chart.velocities()).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let texts: Vec<String> = (0..32)
        .map(|_| render_expr(&random_expr(&mut rng, chart, &vars, 5, 10), chart))
        .collect();
    c.bench_function("parse/random_degree5", |b| {
        b.iter(|| {
            for t in &texts {
                black_box(parse_expr(t, chart).unwrap());
            }
        })
    });
}

fn integrate(c: &mut Criterion) {
    let def = preset("so2");
    let sys = ConstrainedSystem::derive(&def.lagrangian, &def.chart).unwrap();
    let lie = def.generators.as_ref().unwrap();
    let init = initial_state(&sys, &[1.0, 0.0], Some(lie)).unwrap();
    let full = FlowSetup::full(&sys).unwrap();
    let reduced = FlowSetup::reduced(&sys, lie).unwrap();
    c.bench_function("integrate/full_turn", |b| {
        b.iter(|| full.integrate(black_box(&init), std::f64::consts::TAU, 1e-3).unwrap())
    });
    c.bench_function("integrate/full_turn_reduced", |b| {
        b.iter(|| {
            reduced
                .integrate(black_box(&init), std::f64::consts::TAU, 1e-3)
                .unwrap()
        })
    });
}

criterion_group!(benches, derive, bracket, parse_render, integrate);
criterion_main!(benches);
