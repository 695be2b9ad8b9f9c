//! Pseudo-likelihood estimation of a latent correlation matrix over mixed
//! columns.
//!
//! Pairwise fits give a starting matrix; a joint descent over spherical
//! angles then enforces positive semidefiniteness. Column `i` of the upper
//! triangular factor `U` is a unit vector written in spherical coordinates:
//!
//! ```text
//! U[0][i] = cos θ[0][i]
//! U[j][i] = cos θ[j][i] · sin θ[0][i] ⋯ sin θ[j-1][i]     (0 < j < i)
//! U[i][i] = sin θ[0][i] ⋯ sin θ[i-1][i]
//! ```
//!
//! and `R = UᵀU`, so `R` has unit diagonal and is PSD by construction.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::bivariate::{estimate_thresholds, fit_pair, PairData, ThresholdVector, R_BOUND};
use crate::datamodel::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::linalg::{clip_to_correlation, min_eigenvalue};

/// Angles are kept in `[ANGLE_EPS, π - ANGLE_EPS]`.
pub const ANGLE_EPS: f64 = 1e-6;
/// Eigenvalue floor used when repairing an indefinite pairwise start.
pub const REPAIR_FLOOR: f64 = 1e-6;

/// Strictly upper triangular angle matrix; `theta[(j, i)]` for `j < i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleParam {
    theta: DMatrix<f64>,
}

impl AngleParam {
    /// Takes the strict upper triangle of `theta`, clamping each angle into
    /// the open interval. Everything else is zeroed.
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        if theta.nrows() != theta.ncols() {
            return Err(Error::InvalidArgument("angle matrix must be square".into()));
        }
        let m = theta.nrows();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..i {
                let v = theta[(j, i)];
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("angle ({j},{i}) is not finite")));
                }
                t[(j, i)] = clamp_angle(v);
            }
        }
        Ok(Self { theta: t })
    }

    /// All angles π/2, i.e. the identity correlation.
    pub fn identity(m: usize) -> Self {
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..i {
                t[(j, i)] = std::f64::consts::FRAC_PI_2;
            }
        }
        Self { theta: t }
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.theta[(j, i)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// Free angles in column-major order of the strict upper triangle.
    pub fn to_vec(&self) -> Vec<f64> {
        angle_positions(self.dim()).map(|(j, i)| self.theta[(j, i)]).collect()
    }

    fn from_vec(m: usize, v: &[f64]) -> Self {
        let mut t = DMatrix::zeros(m, m);
        for ((j, i), &x) in angle_positions(m).zip(v) {
            t[(j, i)] = clamp_angle(x);
        }
        Self { theta: t }
    }
}

fn clamp_angle(v: f64) -> f64 {
    v.clamp(ANGLE_EPS, std::f64::consts::PI - ANGLE_EPS)
}

fn angle_positions(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(|i| (0..i).map(move |j| (j, i)))
}

fn cholesky_column(theta: &DMatrix<f64>, i: usize, out: &mut [f64]) {
    let mut s = 1.0;
    for j in 0..i {
        let t = theta[(j, i)];
        out[j] = t.cos() * s;
        s *= t.sin();
    }
    out[i] = s;
    for v in out.iter_mut().skip(i + 1) {
        *v = 0.0;
    }
}

pub fn angles_to_cholesky(theta: &AngleParam) -> DMatrix<f64> {
    let m = theta.dim();
    let mut u = DMatrix::zeros(m, m);
    let mut col = vec![0.0; m];
    for i in 0..m {
        cholesky_column(&theta.theta, i, &mut col);
        for j in 0..=i {
            u[(j, i)] = col[j];
        }
    }
    u
}

pub fn correlation_from_angles(theta: &AngleParam) -> DMatrix<f64> {
    let u = angles_to_cholesky(theta);
    let mut r = u.transpose() * &u;
    for i in 0..r.nrows() {
        r[(i, i)] = 1.0;
    }
    r
}

/// Inverts [`correlation_from_angles`] through a Cholesky factorization.
pub fn angles_from_correlation(r: &DMatrix<f64>) -> Result<AngleParam> {
    let m = r.nrows();
    let chol = Cholesky::new(crate::linalg::symmetrize(r)).ok_or(Error::RepairRequired)?;
    let u = chol.l().transpose();
    let mut theta = DMatrix::zeros(m, m);
    for i in 0..m {
        let norm = u.column(i).norm();
        let mut s = 1.0;
        for j in 0..i {
            let c = if s > 0.0 { (u[(j, i)] / norm / s).clamp(-1.0, 1.0) } else { 0.0 };
            let t = clamp_angle(c.acos());
            theta[(j, i)] = t;
            s *= t.sin();
        }
    }
    Ok(AngleParam { theta })
}

/// How the joint stage differentiates the objective with respect to angles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Central differences over every angle.
    #[default]
    FiniteDifference,
    /// Per-pair central differences in `r` times the exact `∂R/∂θ`.
    ChainRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub gradient: GradientMethod,
    pub fd_step: f64,
    /// Estimation requires at least this many rows per variable.
    pub min_rows_per_var: usize,
    pub execution: Execution,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 500,
            gradient: GradientMethod::FiniteDifference,
            fd_step: 1e-5,
            min_rows_per_var: 10,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationEstimate {
    /// Dataset column indices, in the order of `r_matrix` rows.
    pub variables: Vec<usize>,
    pub r_matrix: DMatrix<f64>,
    /// One entry per variable; `Some` for ordinal columns.
    pub thresholds: Vec<Option<ThresholdVector>>,
    /// Negative summed pairwise log-likelihood at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the pairwise start had to be repaired to positive definite.
    pub repaired: bool,
}

/// A column ready for pairwise likelihoods: standardized values or codes
/// with their estimated thresholds.
#[derive(Clone, Debug)]
pub enum PreparedColumn {
    Continuous(Vec<f64>),
    Ordinal { codes: Vec<u32>, thresholds: ThresholdVector },
}

impl PreparedColumn {
    pub fn thresholds(&self) -> Option<&ThresholdVector> {
        match self {
            PreparedColumn::Continuous(_) => None,
            PreparedColumn::Ordinal { thresholds, .. } => Some(thresholds),
        }
    }

    fn raw(&self) -> Vec<f64> {
        match self {
            PreparedColumn::Continuous(v) => v.clone(),
            PreparedColumn::Ordinal { codes, .. } => codes.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Standardizes continuous columns and estimates thresholds for ordinal ones.
pub fn prepare_columns(d: &Dataset, subset: &[usize]) -> Result<Vec<PreparedColumn>> {
    subset
        .iter()
        .map(|&j| {
            if j >= d.n_cols() {
                return Err(Error::InvalidArgument(format!("column index {j} out of range")));
            }
            match d.meta(j).kind {
                ColumnKind::Continuous => {
                    let v = d.column(j);
                    let n = v.len() as f64;
                    if v.len() < 2 {
                        return Err(Error::InsufficientData("standardization needs N >= 2".into()));
                    }
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    if !(var > 0.0) {
                        return Err(Error::ZeroVariance(d.meta(j).name.clone()));
                    }
                    let sd = var.sqrt();
                    Ok(PreparedColumn::Continuous(v.iter().map(|x| (x - mean) / sd).collect()))
                }
                ColumnKind::Ordinal { levels } => {
                    let codes = d.codes(j);
                    let thresholds = estimate_thresholds(&codes, levels)?;
                    Ok(PreparedColumn::Ordinal { codes, thresholds })
                }
            }
        })
        .collect()
}

/// Pair likelihood inputs for `(a, b)`, optionally reading `b` through a row
/// permutation (`b[perm[k]]` is paired with `a[k]`).
pub fn pair_data(a: &PreparedColumn, b: &PreparedColumn, perm: Option<&[usize]>) -> Result<PairData> {
    use PreparedColumn::{Continuous as C, Ordinal as O};
    match (a, b) {
        (C(x), C(y)) => match perm {
            None => PairData::cont_cont(x, y),
            Some(p) => PairData::cont_cont(x, &p.iter().map(|&k| y[k]).collect::<Vec<_>>()),
        },
        (C(x), O { codes, thresholds }) => match perm {
            None => PairData::polyserial(x, codes, thresholds),
            Some(p) => Ok(PairData::ContOrd(crate::bivariate::PolyserialData::permuted(x, codes, thresholds, p)?)),
        },
        (O { codes, thresholds }, C(y)) => match perm {
            None => PairData::polyserial(y, codes, thresholds),
            Some(p) => {
                let y: Vec<f64> = p.iter().map(|&k| y[k]).collect();
                PairData::polyserial(&y, codes, thresholds)
            }
        },
        (O { codes: ca, thresholds: ta }, O { codes: cb, thresholds: tb }) => match perm {
            None => PairData::polychoric(ca, ta, cb, tb),
            Some(p) => {
                let cb: Vec<u32> = p.iter().map(|&k| cb[k]).collect();
                PairData::polychoric(ca, ta, &cb, tb)
            }
        },
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let r = sxy / (sxx * syy).sqrt();
    if r.is_finite() {
        r
    } else {
        0.0
    }
}

/// Summed pairwise negative log-likelihood as a function of angles.
pub struct PseudoLikelihood {
    m: usize,
    // pairs[(j, i)] for j < i, stored at index i*(i-1)/2 + j
    pairs: Vec<PairData>,
}

fn pair_index(j: usize, i: usize) -> usize {
    i * (i - 1) / 2 + j
}

impl PseudoLikelihood {
    pub fn new(columns: &[PreparedColumn], exec: Execution) -> Result<Self> {
        let m = columns.len();
        let positions: Vec<(usize, usize)> = angle_positions(m).collect();
        let pairs = try_map_indexed(positions.len(), exec, |k| {
            let (j, i) = positions[k];
            pair_data(&columns[j], &columns[i], None)
        })?;
        Ok(Self { m, pairs })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn pair(&self, j: usize, i: usize) -> &PairData {
        let (j, i) = if j < i { (j, i) } else { (i, j) };
        &self.pairs[pair_index(j, i)]
    }

    pub fn value_at(&self, r: &DMatrix<f64>) -> f64 {
        angle_positions(self.m).map(|(j, i)| -self.pairs[pair_index(j, i)].loglik(r[(j, i)])).sum()
    }

    pub fn value(&self, theta: &AngleParam) -> f64 {
        self.value_at(&correlation_from_angles(theta))
    }

    // Contribution of all pairs touching variable `i` given column `i` of U.
    fn column_terms(&self, u: &DMatrix<f64>, i: usize, col: &[f64]) -> f64 {
        let mut total = 0.0;
        for k in 0..self.m {
            if k == i {
                continue;
            }
            let r: f64 = (0..=k.min(i)).map(|l| u[(l, k)] * col[l]).sum();
            total -= self.pair(k, i).loglik(r.clamp(-1.0, 1.0));
        }
        total
    }

    /// Central-difference gradient over every free angle. Moving an angle in
    /// column `i` only changes row/column `i` of `R`, so each difference is
    /// evaluated on the pairs that involve `i`; the remaining terms cancel.
    pub fn gradient_fd(&self, theta: &AngleParam, h: f64) -> Vec<f64> {
        let u = angles_to_cholesky(theta);
        let mut work = theta.theta.clone();
        let mut col = vec![0.0; self.m];
        angle_positions(self.m)
            .map(|(j, i)| {
                let t0 = work[(j, i)];
                work[(j, i)] = t0 + h;
                cholesky_column(&work, i, &mut col);
                let up = self.column_terms(&u, i, &col);
                work[(j, i)] = t0 - h;
                cholesky_column(&work, i, &mut col);
                let down = self.column_terms(&u, i, &col);
                work[(j, i)] = t0;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Full central-difference gradient that re-evaluates every pair; slow,
    /// kept as an independent reference for the incremental forms.
    pub fn gradient_fd_full(&self, theta: &AngleParam, h: f64) -> Vec<f64> {
        let v = theta.to_vec();
        (0..v.len())
            .map(|k| {
                let mut a = v.clone();
                a[k] += h;
                let mut b = v.clone();
                b[k] -= h;
                let up = self.value_at(&correlation_from_unclamped(self.m, &a));
                let down = self.value_at(&correlation_from_unclamped(self.m, &b));
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Chain rule: `∂ℒ/∂θ[j][i] = Σ_k ∂ℒ_{ki}/∂r · ∂R[k][i]/∂θ[j][i]`.
    pub fn gradient_chain(&self, theta: &AngleParam, h: f64) -> Vec<f64> {
        let u = angles_to_cholesky(theta);
        let r = u.transpose() * &u;
        let mut dl_dr = DMatrix::zeros(self.m, self.m);
        for (j, i) in angle_positions(self.m) {
            let rv = r[(j, i)];
            let step = h.min(0.5 * (1.0 - rv.abs())).max(f64::EPSILON);
            let pd = &self.pairs[pair_index(j, i)];
            let d = -(pd.loglik(rv + step) - pd.loglik(rv - step)) / (2.0 * step);
            dl_dr[(j, i)] = d;
            dl_dr[(i, j)] = d;
        }
        let mut du = vec![0.0; self.m];
        angle_positions(self.m)
            .map(|(j, i)| {
                // ∂U[·][i]/∂θ[j][i]: zero above j, -sin·prefix at j, U·cot below
                let prefix: f64 = (0..j).map(|l| theta.theta[(l, i)].sin()).product();
                let t = theta.theta[(j, i)];
                for (l, slot) in du.iter_mut().enumerate() {
                    *slot = if l < j {
                        0.0
                    } else if l == j {
                        -t.sin() * prefix
                    } else if l <= i {
                        u[(l, i)] * t.cos() / t.sin()
                    } else {
                        0.0
                    };
                }
                (0..self.m)
                    .filter(|&k| k != i)
                    .map(|k| {
                        let dr: f64 = (0..=k.min(i)).map(|l| u[(l, k)] * du[l]).sum();
                        dl_dr[(k, i)] * dr
                    })
                    .sum()
            })
            .collect()
    }

    pub fn gradient(&self, theta: &AngleParam, method: GradientMethod, h: f64) -> Vec<f64> {
        match method {
            GradientMethod::FiniteDifference => self.gradient_fd(theta, h),
            GradientMethod::ChainRule => self.gradient_chain(theta, h),
        }
    }
}

fn correlation_from_unclamped(m: usize, v: &[f64]) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(m, m);
    for ((j, i), &x) in angle_positions(m).zip(v) {
        t[(j, i)] = x;
    }
    let u = angles_to_cholesky(&AngleParam { theta: t });
    u.transpose() * u
}

/// Independent per-pair fits; diagonal 1, possibly indefinite.
pub fn pairwise_init(
    d: &Dataset,
    subset: &[usize],
    exec: Execution,
) -> Result<(DMatrix<f64>, Vec<Option<ThresholdVector>>)> {
    let columns = prepare_columns(d, subset)?;
    let lik = PseudoLikelihood::new(&columns, exec)?;
    let r = pairwise_fits(&columns, &lik, exec)?;
    Ok((r, columns.iter().map(|c| c.thresholds().cloned()).collect()))
}

fn pairwise_fits(columns: &[PreparedColumn], lik: &PseudoLikelihood, exec: Execution) -> Result<DMatrix<f64>> {
    let m = columns.len();
    let positions: Vec<(usize, usize)> = angle_positions(m).collect();
    let fits = try_map_indexed(positions.len(), exec, |k| {
        let (j, i) = positions[k];
        let start = pearson(&columns[j].raw(), &columns[i].raw()).clamp(-0.9, 0.9);
        fit_pair(lik.pair(j, i), start)
    })?;
    let mut r = DMatrix::identity(m, m);
    for (&(j, i), &v) in positions.iter().zip(&fits) {
        r[(j, i)] = v;
        r[(i, j)] = v;
    }
    debug_assert!(fits.iter().all(|v| v.abs() <= R_BOUND));
    Ok(r)
}

/// Full estimator: pairwise start, PD repair if needed, then backtracking
/// gradient descent over angles.
pub fn estimate_correlation(d: &Dataset, subset: &[usize], config: &CorrelationConfig) -> Result<CorrelationEstimate> {
    let m = subset.len();
    if m == 0 {
        return Err(Error::InvalidArgument("empty variable subset".into()));
    }
    let mut seen = subset.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != m {
        return Err(Error::InvalidArgument("duplicate column in subset".into()));
    }
    if d.n_rows() < config.min_rows_per_var * m {
        return Err(Error::InsufficientData(format!(
            "N = {} but at least {} rows are required for {m} variables",
            d.n_rows(),
            config.min_rows_per_var * m
        )));
    }
    let columns = prepare_columns(d, subset)?;
    let thresholds: Vec<Option<ThresholdVector>> = columns.iter().map(|c| c.thresholds().cloned()).collect();
    let lik = PseudoLikelihood::new(&columns, config.execution)?;
    let init = pairwise_fits(&columns, &lik, config.execution)?;
    if m == 1 {
        return Ok(CorrelationEstimate {
            variables: subset.to_vec(),
            r_matrix: init,
            thresholds,
            objective: 0.0,
            iterations: 0,
            converged: true,
            repaired: false,
        });
    }

    let (start, repaired) = match angles_from_correlation(&init) {
        Ok(t) if min_eigenvalue(&init) > 0.0 => (t, false),
        _ => (angles_from_correlation(&clip_to_correlation(&init, REPAIR_FLOOR))?, true),
    };
    let (theta, objective, iterations, converged) = descend(&lik, start, config);
    let r_matrix = correlation_from_angles(&theta);
    Ok(CorrelationEstimate { variables: subset.to_vec(), r_matrix, thresholds, objective, iterations, converged, repaired })
}

fn descend(lik: &PseudoLikelihood, start: AngleParam, config: &CorrelationConfig) -> (AngleParam, f64, usize, bool) {
    let m = lik.dim();
    let mut theta = start;
    let mut value = lik.value(&theta);
    for iter in 0..config.max_iters {
        let g = lik.gradient(&theta, config.gradient, config.fd_step);
        let x = theta.to_vec();
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-12 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let cand = AngleParam::from_vec(m, &cand);
            let v = lik.value(&cand);
            if v < value {
                accepted = Some((cand, v));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            // no descent step exists along -g: stationary to working precision
            None => return (theta, value, iter, true),
            Some((cand, v)) => {
                let rel = (value - v) / value.abs().max(1.0);
                theta = cand;
                value = v;
                if rel < config.tol {
                    return (theta, value, iter + 1, true);
                }
            }
        }
    }
    (theta, value, config.max_iters, false)
}
