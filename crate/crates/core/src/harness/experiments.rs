use serde::{Deserialize, Serialize};

use super::{apply_discretization, gen_rank_instance, gen_scm, ks_uniform, sample_gaussian, sample_scm};
use super::{CiMethod, DiscretizationPolicy, ExperimentConfig, Metric, Scenario};
use crate::causal::{pc_skeleton, skeleton_metrics, CcartCi, CiTest, CorrSource, FisherZCi, PcConfig, RankCi};
use crate::correlation::CorrelationConfig;
use crate::datamodel::{Dataset, VariableSet};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::ranktest::{ccart, mprt, CcartConfig, CcartVariant, Method, MprtConfig, RankHypothesis};
use crate::rng::mix_seed;

/// One aggregated rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub rate: f64,
    pub trials: usize,
    pub seed: u64,
}

/// One test run inside one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub metric: String,
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Type12Result {
    pub summary: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
}

impl Type12Result {
    pub fn rate(&self, method: Method, n: usize, metric: Metric) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method.label() && r.n == n && r.metric == metric.label())
            .map(|r| r.rate)
    }

    pub fn p_values(&self, method: Method, n: usize, metric: Metric) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method.label() && r.n == n && r.metric == metric.label())
            .map(|r| r.p_value)
            .collect()
    }

    /// Fraction of trials on which two methods reached the same decision.
    pub fn agreement(&self, a: Method, b: Method, n: usize, metric: Metric) -> Option<f64> {
        let pick = |m: Method| -> Vec<(usize, bool)> {
            self.records
                .iter()
                .filter(|r| r.method == m.label() && r.n == n && r.metric == metric.label())
                .map(|r| (r.trial, r.reject))
                .collect()
        };
        let (ra, rb) = (pick(a), pick(b));
        if ra.is_empty() || ra.len() != rb.len() {
            return None;
        }
        let same = ra.iter().zip(&rb).filter(|(x, y)| x.0 == y.0 && x.1 == y.1).count();
        Some(same as f64 / ra.len() as f64)
    }
}

fn check_config(config: &ExperimentConfig) -> Result<()> {
    if config.trials == 0 || config.sample_sizes.is_empty() {
        return Err(Error::InvalidArgument("experiment needs trials and sample sizes".into()));
    }
    if config.perms == 0 {
        return Err(Error::InvalidArgument("experiment needs at least one permutation".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    Ok(())
}

fn policy_for(config: &ExperimentConfig) -> DiscretizationPolicy {
    match config.scenario {
        Scenario::Type12Continuous => DiscretizationPolicy::None,
        _ => config.discretization.clone(),
    }
}

/// Tests run inside a trial use the sequential path when trials themselves
/// are spread over the pool.
fn inner_execution(config: &ExperimentConfig) -> Execution {
    if config.execution.is_parallel() {
        Execution::Sequential
    } else {
        config.execution
    }
}

fn run_methods(
    config: &ExperimentConfig,
    n: usize,
    trial: usize,
    metric: Metric,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let (p, q) = (config.p, config.q);
    let (true_rank, params, tag) = match metric {
        Metric::Type1 => (config.k, &config.null_instance, 1),
        Metric::Type2 => (config.k + 1, &config.alt_instance, 2),
    };
    let seed = mix_seed(&[seed, tag]);
    let sigma = gen_rank_instance(p, q, true_rank, params, seed)?;
    let latent = sample_gaussian(&sigma, n, seed)?;
    let observed = apply_discretization(&latent, &policy_for(config), seed)?;
    let continuous = apply_discretization(&latent, &DiscretizationPolicy::None, seed)?;
    let vars = VariableSet::new((0..p).collect(), (p..p + q).collect(), p + q)?;
    let hyp = RankHypothesis::new(vars, config.k)?;
    let exec = inner_execution(config);
    let correlation = CorrelationConfig { execution: exec, ..Default::default() };
    let ccart_config = CcartConfig { alpha: config.alpha, df: config.ccart_df, correlation: correlation.clone() };

    let mut out = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let report = match method {
            Method::Mprt => {
                let mc = MprtConfig {
                    alpha: config.alpha,
                    num_perms: config.perms,
                    seed,
                    keep_perm_statistics: false,
                    correlation: correlation.clone(),
                    execution: exec,
                };
                mprt(&observed, &hyp, &mc)
            }
            Method::CcartC => ccart(&continuous, &hyp, &ccart_config, CcartVariant::C),
            Method::CcartD => ccart(&observed, &hyp, &ccart_config, CcartVariant::D),
            Method::CcartDe => ccart(&observed, &hyp, &ccart_config, CcartVariant::DE),
        };
        // A numerically failed test counts as a non-rejection at p = 1.
        let (statistic, p_value) = match report {
            Ok(r) => (r.statistic, r.p_value),
            Err(e) if e.is_numerical() => (f64::NAN, 1.0),
            Err(e) => return Err(e),
        };
        out.push(TrialRecord {
            n,
            trial,
            metric: metric.label().into(),
            method: method.label().into(),
            statistic,
            p_value,
            reject: p_value < config.alpha,
        });
    }
    Ok(out)
}

fn trial_seed(config: &ExperimentConfig, n: usize, trial: usize) -> u64 {
    mix_seed(&[config.seed, n as u64, trial as u64])
}

/// Type I and Type II error rates of each rank test across sample sizes.
///
/// Type I trials draw truth with cross-block rank `k`; Type II trials draw
/// rank `k + 1` and count failures to reject `rank ≤ k`. All methods see the
/// same draws within a trial; CCART_C reads the latent continuous values.
pub fn run_type12(config: &ExperimentConfig) -> Result<Type12Result> {
    check_config(config)?;
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for &n in &config.sample_sizes {
        for &metric in &config.metrics {
            let per_trial = try_map_indexed(config.trials, config.execution, |t| {
                run_methods(config, n, t, metric, trial_seed(config, n, t))
            })?;
            let flat: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
            for &method in &config.methods {
                let rejects = flat.iter().filter(|r| r.method == method.label() && r.reject).count();
                let hits = match metric {
                    Metric::Type1 => rejects,
                    Metric::Type2 => config.trials - rejects,
                };
                summary.push(SummaryRow {
                    method: method.label().into(),
                    n,
                    metric: metric.label().into(),
                    rate: hits as f64 / config.trials as f64,
                    trials: config.trials,
                    seed: config.seed,
                });
            }
            records.extend(flat);
        }
    }
    Ok(Type12Result { summary, records })
}

/// Kolmogorov–Smirnov distance of the null p-values of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub ks: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NullHistResult {
    pub ks: Vec<KsRow>,
    pub records: Vec<TrialRecord>,
}

impl NullHistResult {
    pub fn ks(&self, method: Method, n: usize) -> Option<f64> {
        self.ks.iter().find(|r| r.method == method.label() && r.n == n).map(|r| r.ks)
    }
}

/// Raw p-values of every method under a true rank-`k` null.
pub fn run_null_pvalue_hist(config: &ExperimentConfig) -> Result<NullHistResult> {
    let config = ExperimentConfig { metrics: vec![Metric::Type1], ..config.clone() };
    let t12 = run_type12(&config)?;
    let mut ks = Vec::new();
    for &n in &config.sample_sizes {
        for &method in &config.methods {
            ks.push(KsRow {
                method: method.label().into(),
                n,
                ks: ks_uniform(&t12.p_values(method, n, Metric::Type1)),
                trials: config.trials,
                seed: config.seed,
            });
        }
    }
    Ok(NullHistResult { ks, records: t12.records })
}

/// Skeleton scores of one PC run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub graph: usize,
    pub method: String,
    pub f1: f64,
    pub shd: usize,
    pub precision: f64,
    pub recall: f64,
    pub true_edges: usize,
    pub estimated_edges: usize,
    pub tests_run: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcSummaryRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub mean: f64,
    pub graphs: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcComparisonResult {
    pub summary: Vec<PcSummaryRow>,
    pub records: Vec<PcRecord>,
}

impl PcComparisonResult {
    pub fn mean(&self, method: CiMethod, n: usize, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method.label() && r.n == n && r.metric == metric)
            .map(|r| r.mean)
    }
}

fn pc_graph(config: &ExperimentConfig, n: usize, graph: usize) -> Result<Vec<PcRecord>> {
    let seed = mix_seed(&[config.seed, graph as u64]);
    // The graph depends on the replicate only, so every N sees the same SCMs.
    let spec = gen_scm(config.pc.nodes, &config.pc.scm, seed);
    let truth = spec.skeleton();
    let data_seed = trial_seed(config, n, graph);
    let latent = sample_scm(&spec, n, data_seed);
    let data: Dataset = apply_discretization(&latent, &config.discretization, data_seed)?;
    let exec = inner_execution(config);
    let pc = PcConfig { max_cond: config.pc.max_cond, orient: false, execution: exec };
    let correlation = CorrelationConfig { execution: exec, ..Default::default() };
    let ccart_config = CcartConfig { alpha: config.alpha, df: config.ccart_df, correlation: correlation.clone() };

    let mut out = Vec::new();
    for &method in &config.pc.ci_methods {
        let oracle: Box<dyn CiTest + '_> = match method {
            CiMethod::Mprt => Box::new(RankCi::new(
                &data,
                MprtConfig {
                    alpha: config.alpha,
                    num_perms: config.perms,
                    seed: data_seed,
                    keep_perm_statistics: false,
                    correlation: correlation.clone(),
                    execution: exec,
                },
            )),
            CiMethod::FisherZ => Box::new(FisherZCi::new(&data, config.alpha, CorrSource::Sample)?),
            CiMethod::CcartD => Box::new(CcartCi::new(&data, ccart_config.clone(), CcartVariant::D)),
            CiMethod::CcartDe => Box::new(CcartCi::new(&data, ccart_config.clone(), CcartVariant::DE)),
        };
        let result = pc_skeleton(oracle.as_ref(), &pc)?;
        let m = skeleton_metrics(&result.graph, &truth)?;
        out.push(PcRecord {
            n,
            graph,
            method: method.label().into(),
            f1: m.f1,
            shd: m.shd,
            precision: m.precision,
            recall: m.recall,
            true_edges: truth.edges().len(),
            estimated_edges: result.graph.edges().len(),
            tests_run: result.tests_run,
        });
    }
    Ok(out)
}

/// Skeleton F1 and SHD of PC under each CI test over random SCMs.
pub fn run_pc_comparison(config: &ExperimentConfig) -> Result<PcComparisonResult> {
    check_config(config)?;
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for &n in &config.sample_sizes {
        let per_graph = try_map_indexed(config.trials, config.execution, |g| pc_graph(config, n, g))?;
        let flat: Vec<PcRecord> = per_graph.into_iter().flatten().collect();
        for &method in &config.pc.ci_methods {
            let rows: Vec<&PcRecord> = flat.iter().filter(|r| r.method == method.label()).collect();
            let count = rows.len() as f64;
            let f1 = rows.iter().map(|r| r.f1).sum::<f64>() / count;
            let shd = rows.iter().map(|r| r.shd as f64).sum::<f64>() / count;
            for (metric, mean) in [("f1", f1), ("shd", shd)] {
                summary.push(PcSummaryRow {
                    method: method.label().into(),
                    n,
                    metric: metric.into(),
                    mean,
                    graphs: config.trials,
                    seed: config.seed,
                });
            }
        }
        records.extend(flat);
    }
    Ok(PcComparisonResult { summary, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> ExperimentConfig {
        ExperimentConfig {
            scenario,
            sample_sizes: vec![200],
            trials: 4,
            perms: 19,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn type12_is_deterministic_and_execution_independent() {
        let c = small(Scenario::Type12Mixed);
        let a = run_type12(&c).unwrap();
        let b = run_type12(&ExperimentConfig { execution: Execution::Sequential, ..c.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summary.len(), 2 * 4);
        assert_eq!(a.records.len(), 2 * 4 * 4);
        for r in &a.summary {
            assert!((0.0..=1.0).contains(&r.rate));
        }
    }

    #[test]
    fn continuous_scenario_makes_d_and_c_identical() {
        let r = run_type12(&small(Scenario::Type12Continuous)).unwrap();
        let c = r.p_values(Method::CcartC, 200, Metric::Type1);
        let d = r.p_values(Method::CcartD, 200, Metric::Type1);
        assert_eq!(c, d);
    }

    #[test]
    fn pc_comparison_runs_and_repeats() {
        let mut c = small(Scenario::PcComparison);
        c.trials = 2;
        c.pc.nodes = 4;
        c.pc.max_cond = 1;
        let a = run_pc_comparison(&c).unwrap();
        assert_eq!(a, run_pc_comparison(&c).unwrap());
        assert_eq!(a.summary.len(), 4 * 2);
        for r in &a.records {
            assert!((0.0..=1.0).contains(&r.f1));
        }
    }

    #[test]
    fn null_hist_reports_ks_per_method() {
        let r = run_null_pvalue_hist(&small(Scenario::NullPvalueHist)).unwrap();
        assert_eq!(r.ks.len(), 4);
        assert!(r.ks(Method::Mprt, 200).unwrap() <= 1.0);
    }
}
