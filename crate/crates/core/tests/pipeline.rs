use nalgebra::DMatrix;
use proptest::prelude::*;
use tempfile::TempDir;

use mprt::correlation::{estimate_correlation, CorrelationConfig};
use mprt::datamodel::{load_dataset, save_dataset, VariableSet};
use mprt::exec::Execution;
use mprt::harness::{
    apply_discretization, gen_rank_instance, sample_gaussian, write_csv, run_type12, DiscretizationPolicy,
    ExperimentConfig, Metric, RankInstanceParams,
};
use mprt::ranktest::{cca, mprt, split_blocks, Method, MprtConfig, RankHypothesis};

fn hypothesis(p: usize, q: usize, k: usize) -> RankHypothesis {
    RankHypothesis::new(VariableSet::new((0..p).collect(), (p..p + q).collect(), p + q).unwrap(), k).unwrap()
}

#[test]
fn population_rank_is_recovered_by_cca() {
    for true_rank in 0..=3 {
        let sigma = gen_rank_instance(3, 4, true_rank, &RankInstanceParams::default(), 40 + true_rank as u64).unwrap();
        let union: Vec<usize> = (0..7).collect();
        let vars = VariableSet::new(vec![0, 1, 2], vec![3, 4, 5, 6], 7).unwrap();
        let (sx, sxy, sy) = split_blocks(&sigma, &union, &vars);
        let sol = cca(&sx, &sxy, &sy).unwrap();
        assert_eq!(sol.scores.iter().filter(|&&s| s > 0.1).count(), true_rank, "{:?}", sol.scores);
    }
}

#[test]
fn large_sample_estimate_keeps_rank_structure() {
    let sigma = gen_rank_instance(2, 2, 1, &RankInstanceParams::default(), 3).unwrap();
    let latent = sample_gaussian(&sigma, 20_000, 3).unwrap();
    let d = apply_discretization(&latent, &DiscretizationPolicy::Columns { columns: vec![0, 3], levels: 3 }, 3).unwrap();
    let union: Vec<usize> = (0..4).collect();
    let est = estimate_correlation(&d, &union, &CorrelationConfig::default()).unwrap();
    let vars = VariableSet::new(vec![0, 1], vec![2, 3], 4).unwrap();
    let (sx, sxy, sy) = split_blocks(&est.r_matrix, &union, &vars);
    let scores = cca(&sx, &sxy, &sy).unwrap().scores;
    assert!(scores[0] > 0.3 && scores[1] < 0.1, "{scores:?}");
}

#[test]
fn mprt_roundtrips_through_files_and_modes() {
    let sigma = gen_rank_instance(2, 3, 1, &RankInstanceParams::default(), 8).unwrap();
    let latent = sample_gaussian(&sigma, 300, 8).unwrap();
    let d = apply_discretization(&latent, &DiscretizationPolicy::default(), 8).unwrap();
    let dir = TempDir::new().unwrap();
    let (csv, schema) = (dir.path().join("d.csv"), dir.path().join("d.json"));
    save_dataset(&d, &csv, &schema).unwrap();
    let loaded = load_dataset(&csv, &schema).unwrap();
    assert_eq!(loaded.metas(), d.metas());

    let hyp = hypothesis(2, 3, 1);
    let config = |execution| MprtConfig {
        num_perms: 39,
        seed: 12,
        keep_perm_statistics: true,
        correlation: CorrelationConfig { execution, ..Default::default() },
        execution,
        ..Default::default()
    };
    let par = mprt(&loaded, &hyp, &config(Execution::Parallel)).unwrap();
    let seq = mprt(&d, &hyp, &config(Execution::Sequential)).unwrap();
    assert_eq!(par, seq);
    let perms = par.perm_statistics.unwrap();
    let hits = perms.iter().filter(|&&s| s >= par.statistic).count();
    assert_eq!(par.p_value, (1 + hits) as f64 / 40.0);
}

#[test]
fn experiment_tables_are_byte_identical() {
    let config = ExperimentConfig {
        sample_sizes: vec![120],
        trials: 3,
        perms: 9,
        seed: 77,
        metrics: vec![Metric::Type1, Metric::Type2],
        methods: vec![Method::Mprt, Method::CcartD],
        ..Default::default()
    };
    let dir = TempDir::new().unwrap();
    let mut bytes = Vec::new();
    for (i, execution) in [Execution::Parallel, Execution::Sequential].into_iter().enumerate() {
        let r = run_type12(&ExperimentConfig { execution, ..config.clone() }).unwrap();
        let path = dir.path().join(format!("summary{i}.csv"));
        write_csv(&path, &r.summary).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimates_are_valid_correlation_matrices(seed in 0u64..10_000, p in 1usize..3, q in 1usize..3) {
        let sigma = gen_rank_instance(p, q, 1, &RankInstanceParams::default(), seed).unwrap();
        let latent = sample_gaussian(&sigma, 250, seed).unwrap();
        let d = apply_discretization(&latent, &DiscretizationPolicy::default(), seed).unwrap();
        let union: Vec<usize> = (0..p + q).collect();
        let est = estimate_correlation(&d, &union, &CorrelationConfig::default()).unwrap();
        let r: &DMatrix<f64> = &est.r_matrix;
        prop_assert!(r.symmetric_eigenvalues().min() >= -1e-8);
        for i in 0..p + q {
            prop_assert_eq!(r[(i, i)], 1.0);
            for j in 0..p + q {
                prop_assert_eq!(r[(i, j)], r[(j, i)]);
            }
        }
    }

    #[test]
    fn p_values_lie_on_the_permutation_grid(seed in 0u64..10_000, k in 0usize..2) {
        let sigma = gen_rank_instance(2, 2, 1, &RankInstanceParams::default(), seed).unwrap();
        let latent = sample_gaussian(&sigma, 150, seed).unwrap();
        let d = apply_discretization(&latent, &DiscretizationPolicy::default(), seed).unwrap();
        let config = MprtConfig { num_perms: 19, seed, ..Default::default() };
        let r = mprt(&d, &hypothesis(2, 2, k), &config).unwrap();
        let scaled = r.p_value * 20.0;
        prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        prop_assert!(r.p_value >= 0.05 && r.p_value <= 1.0);
        prop_assert_eq!(r.decision, r.p_value >= r.alpha);
    }
}
