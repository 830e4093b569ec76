use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pvwdn::controller::{expected_cost_gradient, solve_mpc, MpcConfig, MpcProblem};
use pvwdn::forecast::{DailyProfile, Forecaster};
use pvwdn::harness::{ExperimentConfig, Weather};
use pvwdn::plant::{identify_linear_model, LinearPlantModel};
use pvwdn::scenario::{sample_night, ScenarioSet};
use pvwdn::Exec;

const POLICIES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

struct Fixture {
    forecaster: Forecaster,
    model: LinearPlantModel,
    experiment: ExperimentConfig,
}

fn fixture() -> Fixture {
    let experiment = ExperimentConfig::default();
    let grid = *experiment.grid();
    let slots = grid.slots_per_day();
    let data = experiment.pv.generate(&grid, 30, 3, &[Weather::Cloudy]);
    let mut forecaster = Forecaster::new(experiment.forecast, slots).unwrap();
    for (d, day) in data.days.into_iter().enumerate() {
        let day: Vec<f64> = day.into_iter().map(|v| v * 90.0).collect();
        forecaster
            .ingest_day(&DailyProfile::new(d, day, slots).unwrap())
            .unwrap();
    }
    let model = identify_linear_model(
        &experiment.network,
        &experiment.excitation,
        grid.step_seconds,
    )
    .unwrap()
    .model;
    Fixture {
        forecaster,
        model,
        experiment,
    }
}

fn scenarios(f: &Fixture, count: usize, exec: Exec) -> ScenarioSet {
    let shape = f.forecaster.shape();
    let errors = f.forecaster.error_model();
    sample_night(f.forecaster.prior(), &shape, &errors, count, 11, 0, exec)
}

fn problem(f: &Fixture, count: usize) -> MpcProblem {
    MpcProblem {
        t: 0.0,
        h0: vec![1.8, 1.9],
        demand: f.experiment.demand.base.clone(),
        price: f.experiment.price.clone(),
        scenarios: scenarios(f, count, Exec::Sequential),
        terminal_target: vec![1.8, 1.9],
    }
}

fn config(f: &Fixture, exec: Exec) -> MpcConfig {
    MpcConfig {
        exec,
        ..f.experiment.controller.clone()
    }
}

fn bench_sampling(c: &mut Criterion) {
    let f = fixture();
    let mut group = c.benchmark_group("scenario_sampling");
    for count in [50, 500] {
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, count), &count, |b, &count| {
                b.iter(|| scenarios(&f, black_box(count), exec))
            });
        }
    }
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let f = fixture();
    let mut group = c.benchmark_group("expected_cost_gradient");
    for count in [50, 500] {
        let p = problem(&f, count);
        let u = vec![40.0; 2 * p.demand.len()];
        for (name, exec) in POLICIES {
            let cfg = config(&f, exec);
            group.bench_with_input(BenchmarkId::new(name, count), &count, |b, _| {
                let mut grad = vec![0.0; u.len()];
                b.iter(|| {
                    expected_cost_gradient(&f.model, &cfg, &p, black_box(&u), &mut grad).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let f = fixture();
    let mut group = c.benchmark_group("solve_mpc");
    group.sample_size(10);
    let p = problem(&f, 50);
    for (name, exec) in POLICIES {
        let cfg = config(&f, exec);
        group.bench_function(name, |b| {
            b.iter(|| solve_mpc(&f.model, &cfg, black_box(&p), None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sampling, bench_gradient, bench_solve);
criterion_main!(benches);
