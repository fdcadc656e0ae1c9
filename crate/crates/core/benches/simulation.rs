use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bound_bridge::guarantee::{HpGuarantee, WitnessParams};
use bound_bridge::parallel::Execution;
use bound_bridge::simulate::zoo::bundled_problem;
use bound_bridge::simulate::{
    exact_excess_risk_distribution_with, mc_excess_risk_distribution_with,
};
use bound_bridge::transform::rate_table_with;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn monte_carlo(c: &mut Criterion) {
    let p = bundled_problem("squared_loss_constants").unwrap().problem;
    let mut group = c.benchmark_group("monte_carlo_n8_m20000");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mc_excess_risk_distribution_with(black_box(&p), 8, 20_000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn exact(c: &mut Criterion) {
    let p = bundled_problem("rare_large_loss").unwrap().problem;
    let mut group = c.benchmark_group("exact_n60_k3");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| exact_excess_risk_distribution_with(black_box(&p), 60, exec).unwrap())
        });
    }
    group.finish();
}

fn rates(c: &mut Criterion) {
    let g = HpGuarantee::log_inverse(1.0, 1.0).unwrap();
    let w = WitnessParams::new(1.0, 1.0).unwrap();
    let ns: Vec<u64> = (1..=64).map(|i| 100 * i).collect();
    let mut group = c.benchmark_group("rate_table_numeric_64");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| rate_table_with(black_box(&g), &w, &ns, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, exact, rates);
criterion_main!(benches);
