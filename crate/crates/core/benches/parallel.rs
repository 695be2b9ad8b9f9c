use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mprt::correlation::{estimate_correlation, CorrelationConfig};
use mprt::datamodel::{Dataset, VariableSet};
use mprt::exec::Execution;
use mprt::harness::{
    apply_discretization, gen_rank_instance, run_type12, sample_gaussian, DiscretizationPolicy, ExperimentConfig,
    Metric, RankInstanceParams,
};
use mprt::ranktest::{mprt, Method, MprtConfig, RankHypothesis};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn mixed(p: usize, q: usize, n: usize) -> Dataset {
    let sigma = gen_rank_instance(p, q, 1, &RankInstanceParams::default(), 1).unwrap();
    let latent = sample_gaussian(&sigma, n, 1).unwrap();
    apply_discretization(&latent, &DiscretizationPolicy::RandomFraction { fraction: 0.5, levels: 3 }, 1).unwrap()
}

fn bench_mprt(c: &mut Criterion) {
    let d = mixed(3, 3, 1000);
    let hyp = RankHypothesis::new(VariableSet::new(vec![0, 1, 2], vec![3, 4, 5], 6).unwrap(), 1).unwrap();
    let mut group = c.benchmark_group("mprt_n1000_b50");
    group.sample_size(10);
    for (name, exec) in MODES {
        let config = MprtConfig {
            num_perms: 50,
            seed: 3,
            correlation: CorrelationConfig { execution: exec, ..Default::default() },
            execution: exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| mprt(black_box(&d), &hyp, &config).unwrap()));
    }
    group.finish();
}

fn bench_correlation(c: &mut Criterion) {
    let d = mixed(4, 4, 2000);
    let all: Vec<usize> = (0..8).collect();
    let mut group = c.benchmark_group("estimate_correlation_m8_n2000");
    group.sample_size(10);
    for (name, exec) in MODES {
        let config = CorrelationConfig { execution: exec, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate_correlation(black_box(&d), &all, &config).unwrap())
        });
    }
    group.finish();
}

fn bench_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("type1_trials_8x_n500");
    group.sample_size(10);
    for (name, exec) in MODES {
        let config = ExperimentConfig {
            sample_sizes: vec![500],
            trials: 8,
            perms: 50,
            metrics: vec![Metric::Type1],
            methods: vec![Method::Mprt],
            execution: exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_type12(black_box(&config)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_mprt, bench_correlation, bench_trials);
criterion_main!(benches);
