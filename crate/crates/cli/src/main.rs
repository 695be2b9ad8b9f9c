use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mprt::causal::{orient, pc_skeleton, write_graph, CcartCi, CiTest, CorrSource, FisherZCi, PcConfig, RankCi};
use mprt::correlation::{estimate_correlation, CorrelationConfig};
use mprt::datamodel::{load_dataset, Dataset, VariableSet};
use mprt::error::Error;
use mprt::harness::{
    run_null_pvalue_hist, run_pc_comparison, run_type12, write_csv, write_manifest, ExperimentConfig,
};
use mprt::ranktest::{ccart, mprt, CcartConfig, CcartVariant, DfConvention, MprtConfig, RankHypothesis};

#[derive(Parser)]
#[command(name = "mprt", version, about = "Rank tests, latent correlations and PC search for mixed data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test rank(Σ_XY) <= k.
    Test(TestArgs),
    /// Estimate the latent correlation matrix.
    EstimateCorr(EstimateArgs),
    /// Learn a skeleton with the PC algorithm.
    Pc(PcArgs),
    /// Run a reproducible experiment from a JSON config.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_dataset(&self.data, &self.schema)
            .with_context(|| format!("loading {} with schema {}", self.data.display(), self.schema.display()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestMethod {
    Mprt,
    CcartC,
    CcartD,
    CcartDe,
}

#[derive(Clone, Copy, ValueEnum)]
enum DfArg {
    Paper,
    Classical,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated column names of the X set.
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    y: Vec<String>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    perms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mprt")]
    method: TestMethod,
    /// Degrees-of-freedom convention for the chi-square tests.
    #[arg(long, value_enum, default_value = "paper")]
    df: DfArg,
    /// Include every permutation statistic in the report.
    #[arg(long)]
    emit_perms: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    Mprt,
    FisherZ,
    CcartD,
    CcartDe,
}

#[derive(Args)]
struct PcArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "mprt")]
    ci: CiArg,
    #[arg(long, default_value_t = 200)]
    perms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    max_cond: usize,
    /// Orient edges after the skeleton search.
    #[arg(long)]
    orient: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Type12,
    Pc,
    Nullhist,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn run_test(a: &TestArgs) -> Result<()> {
    let d = a.data.load()?;
    let vars = VariableSet::new(d.indices_of(&a.x)?, d.indices_of(&a.y)?, d.n_cols())?;
    let hyp = RankHypothesis::new(vars, a.k)?;
    let df = match a.df {
        DfArg::Paper => DfConvention::Paper,
        DfArg::Classical => DfConvention::Classical,
    };
    let ccart_config = CcartConfig { alpha: a.alpha, df, ..Default::default() };
    let report = match a.method {
        TestMethod::Mprt => {
            let config = MprtConfig {
                alpha: a.alpha,
                num_perms: a.perms,
                seed: a.seed,
                keep_perm_statistics: a.emit_perms,
                ..Default::default()
            };
            mprt(&d, &hyp, &config)?
        }
        TestMethod::CcartC => ccart(&d, &hyp, &ccart_config, CcartVariant::C)?,
        TestMethod::CcartD => ccart(&d, &hyp, &ccart_config, CcartVariant::D)?,
        TestMethod::CcartDe => ccart(&d, &hyp, &ccart_config, CcartVariant::DE)?,
    };
    write_json(&a.out, &report)
}

fn run_estimate(a: &EstimateArgs) -> Result<()> {
    let d = a.data.load()?;
    let subset = match &a.subset {
        Some(names) => d.indices_of(names)?,
        None => (0..d.n_cols()).collect(),
    };
    let est = estimate_correlation(&d, &subset, &CorrelationConfig::default())?;
    let names: Vec<&str> = est.variables.iter().map(|&j| d.meta(j).name.as_str()).collect();
    let r: Vec<Vec<f64>> = est.r_matrix.row_iter().map(|row| row.iter().copied().collect()).collect();
    let thresholds: BTreeMap<&str, &[f64]> = names
        .iter()
        .zip(&est.thresholds)
        .filter_map(|(name, t)| t.as_ref().map(|t| (*name, t.interior())))
        .collect();
    write_json(
        &a.out,
        &json!({
            "variables": names,
            "r": r,
            "thresholds": thresholds,
            "converged": est.converged,
            "iterations": est.iterations,
            "objective": est.objective,
        }),
    )
}

fn run_pc(a: &PcArgs) -> Result<()> {
    let d = a.data.load()?;
    let ccart_config = CcartConfig { alpha: a.alpha, ..Default::default() };
    let oracle: Box<dyn CiTest + '_> = match a.ci {
        CiArg::Mprt => Box::new(RankCi::new(
            &d,
            MprtConfig { alpha: a.alpha, num_perms: a.perms, seed: a.seed, ..Default::default() },
        )),
        CiArg::FisherZ => Box::new(FisherZCi::new(&d, a.alpha, CorrSource::Sample)?),
        CiArg::CcartD => Box::new(CcartCi::new(&d, ccart_config, CcartVariant::D)),
        CiArg::CcartDe => Box::new(CcartCi::new(&d, ccart_config, CcartVariant::DE)),
    };
    let config = PcConfig { max_cond: a.max_cond, orient: a.orient, ..Default::default() };
    let mut result = pc_skeleton(oracle.as_ref(), &config)?;
    if a.orient {
        orient(&mut result.graph, &result.sepsets);
    }
    let names: Vec<String> = d.metas().iter().map(|m| m.name.clone()).collect();
    write_graph(&a.out, &result.graph, &names)?;
    Ok(())
}

fn run_bench(a: &BenchArgs) -> Result<()> {
    let config = ExperimentConfig::from_json_file(&a.config)
        .with_context(|| format!("reading experiment config {}", a.config.display()))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    match a.experiment {
        Experiment::Type12 => {
            let r = run_type12(&config)?;
            write_csv(a.out.join("summary.csv"), &r.summary)?;
            write_csv(a.out.join("trials.csv"), &r.records)?;
            write_manifest(&a.out, "type12", &config)?;
        }
        Experiment::Pc => {
            let r = run_pc_comparison(&config)?;
            write_csv(a.out.join("summary.csv"), &r.summary)?;
            write_csv(a.out.join("graphs.csv"), &r.records)?;
            write_manifest(&a.out, "pc", &config)?;
        }
        Experiment::Nullhist => {
            let r = run_null_pvalue_hist(&config)?;
            write_csv(a.out.join("ks.csv"), &r.ks)?;
            write_csv(a.out.join("pvalues.csv"), &r.records)?;
            write_manifest(&a.out, "nullhist", &config)?;
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("MPRT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().with_context(|| format!("MPRT_THREADS={value:?}"))?;
    if threads == 0 {
        bail!("MPRT_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Test(a) => run_test(a),
        Command::EstimateCorr(a) => run_estimate(a),
        Command::Pc(a) => run_pc(a),
        Command::Bench(a) => run_bench(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
