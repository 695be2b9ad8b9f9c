//! Synthetic data: random linear-Gaussian SCMs, factor-model covariances with
//! a prescribed cross-block rank, and random discretization.

use nalgebra::{Cholesky, DMatrix};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::causal::Pdag;
use crate::datamodel::{discretize_column, ColumnMeta, Dataset};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Linear SCM `V_i = Σ_{j ∈ Pa(i)} a_ji V_j + ε_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub n_nodes: usize,
    /// A topological order of the nodes.
    pub order: Vec<usize>,
    /// `(parent, child, coefficient)`
    pub edges: Vec<(usize, usize, f64)>,
    pub noise_vars: Vec<f64>,
    pub seed: u64,
}

impl ScmSpec {
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for &(p, c, w) in &self.edges {
            a[(p, c)] = w;
        }
        a
    }

    pub fn skeleton(&self) -> Pdag {
        let mut g = Pdag::empty(self.n_nodes);
        for &(p, c, _) in &self.edges {
            g.add_edge(p, c);
        }
        g
    }

    /// `(I - A)⁻ᵀ Ω (I - A)⁻¹` with `A[parent][child]` the coefficients.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let n = self.n_nodes;
        let ia = DMatrix::identity(n, n) - self.coefficient_matrix();
        let inv = ia.try_inverse().expect("I - A is unit triangular under a topological order");
        let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.noise_vars.clone()));
        inv.transpose() * omega * inv
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScmParams {
    pub edge_prob: f64,
    /// Range of |a|; the sign is drawn separately.
    pub coeff_range: (f64, f64),
    pub noise_var_range: (f64, f64),
}

impl Default for ScmParams {
    fn default() -> Self {
        Self { edge_prob: 0.4, coeff_range: (0.5, 2.0), noise_var_range: (0.5, 1.5) }
    }
}

/// Random DAG from a random topological order with Bernoulli edges.
pub fn gen_scm(nodes: usize, params: &ScmParams, seed: u64) -> ScmSpec {
    let mut rng = stream_rng(seed, 0);
    let mut order: Vec<usize> = (0..nodes).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut edges = Vec::new();
    for (i, &child) in order.iter().enumerate() {
        for &parent in &order[..i] {
            if rng.random::<f64>() < params.edge_prob {
                let (lo, hi) = params.coeff_range;
                let mag = if hi > lo { rng.random_range(lo..hi) } else { lo };
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                edges.push((parent, child, sign * mag));
            }
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    let (lo, hi) = params.noise_var_range;
    let noise_vars = (0..nodes).map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect();
    ScmSpec { n_nodes: nodes, order, edges, noise_vars, seed }
}

/// Ancestral sampling; returns `n_nodes` columns of length `n`.
pub fn sample_scm(spec: &ScmSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 1);
    let mut cols = vec![vec![0.0; n]; spec.n_nodes];
    let sd: Vec<f64> = spec.noise_vars.iter().map(|v| v.sqrt()).collect();
    let mut parents = vec![Vec::new(); spec.n_nodes];
    for &(p, c, w) in &spec.edges {
        parents[c].push((p, w));
    }
    #[allow(clippy::needless_range_loop)]
    for row in 0..n {
        for &v in &spec.order {
            let e: f64 = rng.sample(StandardNormal);
            let mut x = sd[v] * e;
            for &(p, w) in &parents[v] {
                x += w * cols[p][row];
            }
            cols[v][row] = x;
        }
    }
    cols
}

/// Loading magnitudes for the factor construction of rank instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankInstanceParams {
    /// |loading| range on the factors shared by X and Y.
    pub shared: (f64, f64),
    /// |loading| range on the X-only and Y-only factors.
    pub specific: (f64, f64),
}

impl Default for RankInstanceParams {
    fn default() -> Self {
        Self { shared: (1.2, 2.0), specific: (0.3, 0.8) }
    }
}

/// Population correlation over `p + q` variables whose cross block has rank
/// exactly `true_rank`: `true_rank` shared factors load on every variable,
/// one set-specific factor loads on each side, plus unit noise; the result is
/// rescaled to unit diagonal.
pub fn gen_rank_instance(p: usize, q: usize, true_rank: usize, params: &RankInstanceParams, seed: u64) -> Result<DMatrix<f64>> {
    if true_rank > p.min(q) {
        return Err(Error::InvalidArgument(format!("rank {true_rank} exceeds min(p, q) = {}", p.min(q))));
    }
    let mut rng = stream_rng(seed, 2);
    let m = p + q;
    let mut draw = |range: (f64, f64)| {
        let mag = if range.1 > range.0 { rng.random_range(range.0..range.1) } else { range.0 };
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    };
    // columns: shared factors, X factor, Y factor
    let mut load = DMatrix::zeros(m, true_rank + 2);
    for i in 0..m {
        for f in 0..true_rank {
            load[(i, f)] = draw(params.shared);
        }
        let own = if i < p { true_rank } else { true_rank + 1 };
        load[(i, own)] = draw(params.specific);
    }
    let cov = &load * load.transpose() + DMatrix::identity(m, m);
    let s = cov.diagonal().map(|v| 1.0 / v.sqrt());
    let mut r = DMatrix::from_fn(m, m, |i, j| cov[(i, j)] * s[i] * s[j]);
    for i in 0..m {
        r[(i, i)] = 1.0;
    }
    Ok(r)
}

/// `n` draws from N(0, sigma), returned column-major.
pub fn sample_gaussian(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let l = Cholesky::new(sigma.clone())
        .ok_or_else(|| Error::Degenerate("covariance is not positive definite".into()))?
        .l();
    let m = sigma.nrows();
    let mut rng = stream_rng(seed, 3);
    let mut cols = vec![Vec::with_capacity(n); m];
    let mut z = vec![0.0; m];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (i, col) in cols.iter_mut().enumerate() {
            col.push((0..=i).map(|k| l[(i, k)] * z[k]).sum());
        }
    }
    Ok(cols)
}

/// Which columns become ordinal, and how many levels they get.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscretizationPolicy {
    None,
    All { levels: u32 },
    Columns { columns: Vec<usize>, levels: u32 },
    /// `round(fraction · M)` columns chosen uniformly at random.
    RandomFraction { fraction: f64, levels: u32 },
}

impl Default for DiscretizationPolicy {
    fn default() -> Self {
        DiscretizationPolicy::RandomFraction { fraction: 0.5, levels: 3 }
    }
}

/// Interval from which thresholds are drawn (latent columns standardized).
pub const THRESHOLD_RANGE: (f64, f64) = (-1.5, 1.5);
const MAX_THRESHOLD_DRAWS: usize = 1000;

/// Discretizes the selected latent columns with `levels - 1` sorted uniform
/// thresholds. Thresholds are applied to the column after sample
/// standardization; draws that leave a level empty are rejected and redrawn.
pub fn apply_discretization(data: &[Vec<f64>], policy: &DiscretizationPolicy, seed: u64) -> Result<Dataset> {
    let m = data.len();
    let mut rng = stream_rng(seed, 4);
    let (chosen, levels): (Vec<usize>, u32) = match policy {
        DiscretizationPolicy::None => (Vec::new(), 0),
        DiscretizationPolicy::All { levels } => ((0..m).collect(), *levels),
        DiscretizationPolicy::Columns { columns, levels } => {
            if let Some(&bad) = columns.iter().find(|&&c| c >= m) {
                return Err(Error::InvalidArgument(format!("column {bad} out of range")));
            }
            (columns.clone(), *levels)
        }
        DiscretizationPolicy::RandomFraction { fraction, levels } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
            }
            let count = (fraction * m as f64).round() as usize;
            let mut idx = sample_indices(&mut rng, m, count).into_vec();
            idx.sort_unstable();
            (idx, *levels)
        }
    };
    if !chosen.is_empty() && levels < 2 {
        return Err(Error::InvalidArgument("discretization needs at least 2 levels".into()));
    }
    let mut columns = Vec::with_capacity(m);
    let mut metas = Vec::with_capacity(m);
    for (j, col) in data.iter().enumerate() {
        let name = format!("v{j}");
        if !chosen.contains(&j) {
            columns.push(col.clone());
            metas.push(ColumnMeta::continuous(name));
            continue;
        }
        let codes = discretize_standardized(col, levels, &mut rng)?;
        columns.push(codes.into_iter().map(f64::from).collect());
        metas.push(ColumnMeta::ordinal(name, levels));
    }
    Dataset::new(columns, metas)
}

fn discretize_standardized(col: &[f64], levels: u32, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let z: Vec<f64> = col.iter().map(|v| (v - mean) / sd).collect();
    for _ in 0..MAX_THRESHOLD_DRAWS {
        let mut t: Vec<f64> =
            (0..levels - 1).map(|_| rng.random_range(THRESHOLD_RANGE.0..THRESHOLD_RANGE.1)).collect();
        t.sort_by(f64::total_cmp);
        if t.windows(2).any(|w| w[0] >= w[1]) {
            continue;
        }
        let codes = discretize_column(&z, &t)?;
        let mut seen = vec![false; levels as usize];
        for &c in &codes {
            seen[c as usize - 1] = true;
        }
        if seen.iter().all(|&s| s) {
            return Ok(codes);
        }
    }
    Err(Error::InsufficientData("could not draw thresholds that populate every level".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scm_edge_probability_extremes() {
        assert!(gen_scm(5, &ScmParams { edge_prob: 0.0, ..Default::default() }, 1).edges.is_empty());
        let full = gen_scm(3, &ScmParams { edge_prob: 1.0, ..Default::default() }, 1);
        assert_eq!(full.edges.len(), 3);
        for &(_, _, w) in &full.edges {
            assert!((0.5..=2.0).contains(&w.abs()));
        }
        assert_eq!(gen_scm(6, &ScmParams::default(), 9), gen_scm(6, &ScmParams::default(), 9));
    }

    #[test]
    fn scm_edges_follow_topological_order() {
        let spec = gen_scm(8, &ScmParams { edge_prob: 0.6, ..Default::default() }, 4);
        let pos = |v: usize| spec.order.iter().position(|&o| o == v).unwrap();
        assert!(spec.edges.iter().all(|&(p, c, _)| pos(p) < pos(c)));
    }

    #[test]
    fn scm_sampling_matches_closed_form() {
        let spec = ScmSpec { n_nodes: 2, order: vec![0, 1], edges: vec![(0, 1, 1.0)], noise_vars: vec![1.0, 1.0], seed: 0 };
        let sigma = spec.population_covariance();
        let want = sigma[(0, 1)] / (sigma[(0, 0)] * sigma[(1, 1)]).sqrt();
        assert!((want - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let cols = sample_scm(&spec, 10_000, 3);
        let d = Dataset::new(cols.clone(), vec![ColumnMeta::continuous("x"), ColumnMeta::continuous("y")]).unwrap();
        let r = crate::ranktest::sample_correlation(&d, &[0, 1]).unwrap();
        assert!((r[(0, 1)] - want).abs() < 0.03);
        assert_eq!(sample_scm(&spec, 50, 3), sample_scm(&spec, 50, 3));
        let empty = gen_scm(3, &ScmParams { edge_prob: 0.0, ..Default::default() }, 2);
        let cols = sample_scm(&empty, 10_000, 2);
        let d = Dataset::new(cols, (0..3).map(|i| ColumnMeta::continuous(format!("c{i}"))).collect()).unwrap();
        let r = crate::ranktest::sample_correlation(&d, &[0, 1, 2]).unwrap();
        assert!(r[(0, 1)].abs() < 0.04 && r[(1, 2)].abs() < 0.04);
    }

    #[test]
    fn rank_instance_structure() {
        let params = RankInstanceParams::default();
        for rank in 0..=2 {
            let s = gen_rank_instance(2, 2, rank, &params, 5).unwrap();
            assert!(s.diagonal().iter().all(|&v| (v - 1.0).abs() < 1e-12));
            let cross = s.view((0, 2), (2, 2)).into_owned();
            let sv = cross.singular_values();
            let nonzero = sv.iter().filter(|&&v| v > 1e-10).count();
            assert_eq!(nonzero, rank, "rank {rank}: {sv}");
        }
        assert!(gen_rank_instance(2, 3, 3, &params, 1).is_err());
    }

    #[test]
    fn discretization_policies() {
        let sigma = gen_rank_instance(2, 2, 1, &RankInstanceParams::default(), 1).unwrap();
        let latent = sample_gaussian(&sigma, 500, 2).unwrap();
        let none = apply_discretization(&latent, &DiscretizationPolicy::None, 3).unwrap();
        assert!(none.all_continuous());
        let all = apply_discretization(&latent, &DiscretizationPolicy::All { levels: 3 }, 3).unwrap();
        for j in 0..4 {
            let mut codes = all.codes(j);
            codes.sort_unstable();
            codes.dedup();
            assert_eq!(codes, vec![1, 2, 3]);
        }
        let half = apply_discretization(&latent, &DiscretizationPolicy::default(), 3).unwrap();
        assert_eq!(half.metas().iter().filter(|m| m.kind.is_ordinal()).count(), 2);
        assert_eq!(half, apply_discretization(&latent, &DiscretizationPolicy::default(), 3).unwrap());
        let cols = DiscretizationPolicy::Columns { columns: vec![1], levels: 4 };
        let one = apply_discretization(&latent, &cols, 3).unwrap();
        assert_eq!(one.meta(1).kind.levels(), Some(4));
        assert!(!one.meta(0).kind.is_ordinal());
    }
}
