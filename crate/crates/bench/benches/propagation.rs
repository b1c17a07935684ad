use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use negaflow_core::{
    expectation, gaussian_state, wigner_from_pure, ConfigurationState, Engine, GaussianSpec,
    Observable1D, ObservableSpec, PhaseSpaceGrid, PhysicalParams, Potential, SplitStepper,
};
use std::hint::black_box;

const MORSE: Potential = Potential::Morse {
    depth: 20.0,
    width: 0.16,
};

fn spec() -> GaussianSpec {
    GaussianSpec {
        x0: 2.5,
        p0: 0.0,
        sigma_x: 0.7029266564879363,
        hermite_order: 1,
    }
}

fn grid(n: usize) -> PhaseSpaceGrid {
    PhaseSpaceGrid::new(n, n, -5.0, 12.0, -8.0, 8.0).unwrap()
}

fn step_unified(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_unified");
    for n in [128, 256] {
        let g = grid(n);
        let params = PhysicalParams::atomic();
        let state = gaussian_state(&spec(), params, &g).unwrap();
        let stepper = SplitStepper::new(&g, &MORSE, &params, Engine::Unified, 0.001).unwrap();
        let mut field = state.field().into_owned();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{n}x{n}")),
            &n,
            |b, _| b.iter(|| stepper.step(black_box(&mut field))),
        );
    }
    group.finish();
}

fn wigner_transform(c: &mut Criterion) {
    let g = grid(256);
    let params = PhysicalParams::atomic();
    let s = spec();
    let phi =
        ConfigurationState::hermite_gaussian(&g, params, s.x0, s.p0, s.sigma_x, s.hermite_order)
            .unwrap();
    c.bench_function("wigner_from_pure/256x256", |b| {
        b.iter(|| wigner_from_pure(black_box(&phi), &g).unwrap())
    });
}

fn expectation_value(c: &mut Criterion) {
    let g = grid(256);
    let state = gaussian_state(&spec(), PhysicalParams::atomic(), &g).unwrap();
    let obs = ObservableSpec::new(Observable1D::Square, Observable1D::Coordinate);
    c.bench_function("expectation/x2p/256x256", |b| {
        b.iter(|| expectation(black_box(&state), &obs).unwrap())
    });
}

criterion_group!(benches, step_unified, wigner_transform, expectation_value);
criterion_main!(benches);
