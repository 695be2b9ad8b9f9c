//! Rank tests for cross-covariance matrices.
//!
//! `mprt` is the permutation test: canonical directions are fitted once on
//! the estimated latent correlation, and the null distribution of the
//! residual statistic is sampled by re-estimating only the cross block under
//! random row permutations of the Y side. `ccart` is the classical
//! Bartlett/chi-square test on a plug-in correlation matrix.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::bivariate::fit_pair;
use crate::correlation::{estimate_correlation, pair_data, prepare_columns, CorrelationConfig, PreparedColumn};
use crate::datamodel::{Dataset, VariableSet};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::linalg::{inv_sqrt_sym, min_eigenvalue, EIGEN_FLOOR};
use crate::rng::{permutation, stream_rng};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankHypothesis {
    pub vars: VariableSet,
    pub k: usize,
}

impl RankHypothesis {
    pub fn new(vars: VariableSet, k: usize) -> Result<Self> {
        if k > vars.max_rank() {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds min(P, Q) = {}", vars.max_rank())));
        }
        Ok(Self { vars, k })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcaSolution {
    /// P×K
    pub a: DMatrix<f64>,
    /// Q×K
    pub b: DMatrix<f64>,
    /// Descending canonical correlations, clamped to [0, 1].
    pub scores: Vec<f64>,
}

/// Canonical correlation analysis of a partitioned covariance.
pub fn cca(sigma_x: &DMatrix<f64>, sigma_xy: &DMatrix<f64>, sigma_y: &DMatrix<f64>) -> Result<CcaSolution> {
    let (p, q) = sigma_xy.shape();
    if sigma_x.shape() != (p, p) || sigma_y.shape() != (q, q) {
        return Err(Error::InvalidArgument("covariance blocks have inconsistent shapes".into()));
    }
    if p == 0 || q == 0 {
        return Err(Error::InvalidArgument("empty variable set".into()));
    }
    let wx = whitener(sigma_x, "X")?;
    let wy = whitener(sigma_y, "Y")?;
    let m = &wx * sigma_xy * &wy;
    let k = p.min(q);
    let svd = SVD::new(m, true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.truncate(k);
    let uk = DMatrix::from_fn(p, k, |r, c| u[(r, order[c])]);
    let vk = DMatrix::from_fn(q, k, |r, c| v_t[(order[c], r)]);
    Ok(CcaSolution {
        a: &wx * uk,
        b: &wy * vk,
        scores: order.iter().map(|&i| svd.singular_values[i].clamp(0.0, 1.0)).collect(),
    })
}

fn whitener(sigma: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    let lo = min_eigenvalue(sigma);
    if !lo.is_finite() || lo < -1e-8 {
        return Err(Error::Degenerate(format!("{name} block has eigenvalue {lo}")));
    }
    if sigma.iter().all(|v| v.abs() <= EIGEN_FLOOR) {
        return Err(Error::Degenerate(format!("{name} block is zero")));
    }
    Ok(inv_sqrt_sym(sigma, EIGEN_FLOOR).0)
}

/// Bartlett's corrected likelihood-ratio statistic over scores `k..K`.
pub fn bartlett_statistic(scores: &[f64], n: usize, p: usize, q: usize, k: usize) -> f64 {
    let factor = n as f64 - (p + q + 3) as f64 / 2.0;
    let mut log_prod = 0.0;
    for &r in scores.iter().skip(k) {
        if r >= 1.0 {
            return f64::INFINITY;
        }
        log_prod += (-r * r).ln_1p();
    }
    if log_prod == 0.0 {
        0.0
    } else {
        -factor * log_prod
    }
}

/// Degrees of freedom for the chi-square reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfConvention {
    /// `(P - k + 1)(Q - k + 1)`
    #[default]
    Paper,
    /// `(P - k)(Q - k)`, Bartlett's original count.
    Classical,
}

impl DfConvention {
    pub fn df(self, p: usize, q: usize, k: usize) -> i64 {
        let (p, q, k) = (p as i64, q as i64, k as i64);
        match self {
            DfConvention::Paper => (p - k + 1) * (q - k + 1),
            DfConvention::Classical => (p - k) * (q - k),
        }
    }
}

pub fn chi_square_pvalue(lambda: f64, p: usize, q: usize, k: usize, convention: DfConvention) -> Result<f64> {
    let df = convention.df(p, q, k);
    if df <= 0 {
        return Err(Error::InvalidArgument(format!("non-positive degrees of freedom {df}")));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("statistic must be non-negative, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    if lambda == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, lambda / 2.0).clamp(0.0, 1.0))
}

/// Residual statistic for a fixed CCA solution as a function of the cross
/// block: whitened residual canonical directions are precomputed so that each
/// permutation costs one small matrix product and SVD.
#[derive(Clone, Debug)]
pub struct ResidualProjector {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    k: usize,
    /// Eigenvalues of the residual within-set blocks that had to be floored.
    pub floored: usize,
}

impl ResidualProjector {
    pub fn new(sol: &CcaSolution, sigma_x: &DMatrix<f64>, sigma_y: &DMatrix<f64>, k: usize) -> Result<Self> {
        let big_k = sol.scores.len();
        if k >= big_k {
            return Err(Error::InvalidArgument(format!("residual statistic needs k < K = {big_k}, got {k}")));
        }
        let ak = sol.a.columns(k, big_k - k).into_owned();
        let bk = sol.b.columns(k, big_k - k).into_owned();
        let (wx, fx) = inv_sqrt_sym(&(ak.transpose() * sigma_x * &ak), EIGEN_FLOOR);
        let (wy, fy) = inv_sqrt_sym(&(bk.transpose() * sigma_y * &bk), EIGEN_FLOOR);
        Ok(Self { left: wx * ak.transpose(), right: bk * wy, k, floored: fx + fy })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Singular values of the whitened residual cross block, descending.
    pub fn residual_scores(&self, cross: &DMatrix<f64>) -> Vec<f64> {
        let g = &self.left * cross * &self.right;
        let mut s: Vec<f64> = g.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn statistic(&self, cross: &DMatrix<f64>, n: usize, p: usize, q: usize) -> f64 {
        bartlett_statistic(&self.residual_scores(cross), n, p, q, 0)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn residual_statistic(
    sol: &CcaSolution,
    sigma_x: &DMatrix<f64>,
    sigma_y: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    k: usize,
    n: usize,
    p: usize,
    q: usize,
) -> Result<f64> {
    Ok(ResidualProjector::new(sol, sigma_x, sigma_y, k)?.statistic(cross, n, p, q))
}

/// Re-estimates the X–Y cross correlations with the Y rows read through a
/// permutation. Column marginals (standardization, thresholds) are fixed.
#[derive(Clone, Debug)]
pub struct CrossBlockEstimator {
    x: Vec<PreparedColumn>,
    y: Vec<PreparedColumn>,
}

impl CrossBlockEstimator {
    pub fn new(d: &Dataset, vars: &VariableSet) -> Result<Self> {
        Ok(Self { x: prepare_columns(d, vars.x())?, y: prepare_columns(d, vars.y())? })
    }

    pub fn from_prepared(x: Vec<PreparedColumn>, y: Vec<PreparedColumn>) -> Self {
        Self { x, y }
    }

    /// `perm[k]` is the Y row paired with X row `k`.
    pub fn block(&self, perm: &[usize]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.x.len(), self.y.len());
        for (i, a) in self.x.iter().enumerate() {
            for (j, b) in self.y.iter().enumerate() {
                out[(i, j)] = match (a, b) {
                    (PreparedColumn::Continuous(x), PreparedColumn::Continuous(y)) => {
                        let dot: f64 = x.iter().zip(perm).map(|(v, &k)| v * y[k]).sum();
                        dot / (x.len() - 1) as f64
                    }
                    _ => fit_pair(&pair_data(a, b, Some(perm))?, 0.0)?,
                };
            }
        }
        Ok(out)
    }
}

pub fn permuted_cross_block(d: &Dataset, vars: &VariableSet, perm: &[usize]) -> Result<DMatrix<f64>> {
    if perm.len() != d.n_rows() {
        return Err(Error::InvalidArgument("permutation length differs from N".into()));
    }
    CrossBlockEstimator::new(d, vars)?.block(perm)
}

/// Add-one smoothed permutation p-value.
pub fn pvalue_from_permutations(lambda_obs: f64, lambda_perms: &[f64]) -> Result<f64> {
    if lambda_perms.is_empty() {
        return Err(Error::InvalidArgument("no permutation statistics".into()));
    }
    let hits = lambda_perms.iter().filter(|&&l| l >= lambda_obs).count();
    Ok((1 + hits) as f64 / (1 + lambda_perms.len()) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MPRT")]
    Mprt,
    #[serde(rename = "CCART_C")]
    CcartC,
    #[serde(rename = "CCART_D")]
    CcartD,
    #[serde(rename = "CCART_DE")]
    CcartDe,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Mprt => "MPRT",
            Method::CcartC => "CCART_C",
            Method::CcartD => "CCART_D",
            Method::CcartDe => "CCART_DE",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub num_permutations: usize,
    /// `true` when the null rank hypothesis is not rejected.
    pub decision: bool,
    pub alpha: f64,
    pub seed: u64,
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perm_statistics: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MprtConfig {
    pub alpha: f64,
    pub num_perms: usize,
    pub seed: u64,
    pub keep_perm_statistics: bool,
    pub correlation: CorrelationConfig,
    pub execution: Execution,
}

impl Default for MprtConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            num_perms: 200,
            seed: 0,
            keep_perm_statistics: false,
            correlation: CorrelationConfig::default(),
            execution: Execution::default(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_vars(d: &Dataset, vars: &VariableSet) -> Result<()> {
    if let Some(&bad) = vars.x().iter().chain(vars.y()).find(|&&j| j >= d.n_cols()) {
        return Err(Error::InvalidArgument(format!("column index {bad} out of range")));
    }
    Ok(())
}

/// Blocks of a correlation matrix over `union` for the sets of `vars`.
pub fn split_blocks(
    r: &DMatrix<f64>,
    union: &[usize],
    vars: &VariableSet,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let pos = |c: usize| union.iter().position(|&u| u == c).expect("column in union");
    let xi: Vec<usize> = vars.x().iter().map(|&c| pos(c)).collect();
    let yi: Vec<usize> = vars.y().iter().map(|&c| pos(c)).collect();
    let pick = |a: &[usize], b: &[usize]| DMatrix::from_fn(a.len(), b.len(), |i, j| r[(a[i], b[j])]);
    (pick(&xi, &xi), pick(&xi, &yi), pick(&yi, &yi))
}

/// Permutation-based rank test of `rank(Σ_XY) ≤ k` on mixed data.
pub fn mprt(d: &Dataset, hyp: &RankHypothesis, config: &MprtConfig) -> Result<TestReport> {
    check_alpha(config.alpha)?;
    check_vars(d, &hyp.vars)?;
    if config.num_perms == 0 {
        return Err(Error::InvalidArgument("at least one permutation is required".into()));
    }
    let vars = &hyp.vars;
    let (n, p, q, k) = (d.n_rows(), vars.p(), vars.q(), hyp.k);
    let report = |statistic: f64, p_value: f64, scores: Vec<f64>, perms: Option<Vec<f64>>| TestReport {
        statistic,
        p_value,
        method: Method::Mprt,
        num_permutations: config.num_perms,
        decision: p_value >= config.alpha,
        alpha: config.alpha,
        seed: config.seed,
        k,
        n,
        p,
        q,
        scores,
        df: None,
        perm_statistics: perms,
    };
    if k > vars.max_rank() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds min(P, Q) = {}", vars.max_rank())));
    }
    if k == vars.max_rank() {
        return Ok(report(0.0, 1.0, Vec::new(), None));
    }

    let union = vars.union();
    let corr_config = CorrelationConfig { execution: config.execution, ..config.correlation.clone() };
    let est = estimate_correlation(d, &union, &corr_config)?;
    let (sx, sxy, sy) = split_blocks(&est.r_matrix, &union, vars);
    let sol = cca(&sx, &sxy, &sy)?;
    let projector = ResidualProjector::new(&sol, &sx, &sy, k)?;
    let observed = projector.statistic(&sxy, n, p, q);

    let estimator = CrossBlockEstimator::new(d, vars)?;
    let perm_stats = try_map_indexed(config.num_perms, config.execution, |b| {
        let perm = permutation(n, &mut stream_rng(config.seed, b as u64));
        Ok::<_, Error>(projector.statistic(&estimator.block(&perm)?, n, p, q))
    })?;
    let p_value = pvalue_from_permutations(observed, &perm_stats)?;
    Ok(report(observed, p_value, sol.scores, config.keep_perm_statistics.then_some(perm_stats)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcartVariant {
    /// Sample correlation of continuous observations.
    C,
    /// Ordinal codes treated as continuous values.
    D,
    /// Latent correlation from the pseudo-likelihood estimator.
    DE,
}

impl CcartVariant {
    pub fn method(self) -> Method {
        match self {
            CcartVariant::C => Method::CcartC,
            CcartVariant::D => Method::CcartD,
            CcartVariant::DE => Method::CcartDe,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcartConfig {
    pub alpha: f64,
    pub df: DfConvention,
    pub correlation: CorrelationConfig,
}

impl Default for CcartConfig {
    fn default() -> Self {
        Self { alpha: 0.05, df: DfConvention::default(), correlation: CorrelationConfig::default() }
    }
}

/// Pearson correlation matrix of the given columns, codes taken at face value.
pub fn sample_correlation(d: &Dataset, subset: &[usize]) -> Result<DMatrix<f64>> {
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData("sample correlation needs N >= 2".into()));
    }
    let cols: Vec<Vec<f64>> = subset
        .iter()
        .map(|&j| {
            let v = d.column(j);
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if !(var > 0.0) {
                return Err(Error::ZeroVariance(d.meta(j).name.clone()));
            }
            let sd = var.sqrt();
            Ok(v.iter().map(|x| (x - mean) / sd).collect())
        })
        .collect::<Result<_>>()?;
    let m = subset.len();
    let mut r = DMatrix::identity(m, m);
    for i in 0..m {
        for j in 0..i {
            let v = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum::<f64>() / (n - 1) as f64;
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Chi-square rank test on an already computed correlation matrix over
/// `union` (sorted column indices covering X ∪ Y).
pub fn ccart_from_correlation(
    r: &DMatrix<f64>,
    union: &[usize],
    n: usize,
    hyp: &RankHypothesis,
    config: &CcartConfig,
    variant: CcartVariant,
) -> Result<TestReport> {
    check_alpha(config.alpha)?;
    let vars = &hyp.vars;
    let (p, q, k) = (vars.p(), vars.q(), hyp.k);
    let report = |statistic: f64, p_value: f64, scores: Vec<f64>, df: Option<i64>| TestReport {
        statistic,
        p_value,
        method: variant.method(),
        num_permutations: 0,
        decision: p_value >= config.alpha,
        alpha: config.alpha,
        seed: 0,
        k,
        n,
        p,
        q,
        scores,
        df,
        perm_statistics: None,
    };
    if k > vars.max_rank() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds min(P, Q) = {}", vars.max_rank())));
    }
    let (sx, sxy, sy) = split_blocks(r, union, vars);
    let sol = cca(&sx, &sxy, &sy)?;
    if k == vars.max_rank() {
        return Ok(report(0.0, 1.0, sol.scores, None));
    }
    let statistic = bartlett_statistic(&sol.scores, n, p, q, k);
    let p_value = chi_square_pvalue(statistic, p, q, k, config.df)?;
    Ok(report(statistic, p_value, sol.scores, Some(config.df.df(p, q, k))))
}

/// Classical CCA rank test with the variant's plug-in correlation matrix.
pub fn ccart(d: &Dataset, hyp: &RankHypothesis, config: &CcartConfig, variant: CcartVariant) -> Result<TestReport> {
    check_vars(d, &hyp.vars)?;
    let union = hyp.vars.union();
    let r = match variant {
        CcartVariant::C => {
            if let Some(&j) = union.iter().find(|&&j| d.meta(j).kind.is_ordinal()) {
                return Err(Error::InvalidArgument(format!(
                    "CCART-C needs continuous columns; '{}' is ordinal",
                    d.meta(j).name
                )));
            }
            sample_correlation(d, &union)?
        }
        CcartVariant::D => sample_correlation(d, &union)?,
        CcartVariant::DE => estimate_correlation(d, &union, &config.correlation)?.r_matrix,
    };
    ccart_from_correlation(&r, &union, d.n_rows(), hyp, config, variant)
}
