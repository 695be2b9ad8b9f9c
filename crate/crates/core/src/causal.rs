//! Constraint-based skeleton search with pluggable conditional-independence
//! tests.
//!
//! Under a linear Gaussian (or thresholded Gaussian) model, `x ⟂ y | C`
//! holds iff `rank(Σ_{{x}∪C, {y}∪C}) = |C|`, so any rank test doubles as a CI
//! test.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bivariate::std_normal_cdf;
use crate::correlation::{estimate_correlation, CorrelationConfig};
use crate::datamodel::{Dataset, VariableSet};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::ranktest::{
    ccart, mprt, sample_correlation, CcartConfig, CcartVariant, MprtConfig, RankHypothesis,
};
use crate::rng::mix_seed;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CiQuery {
    pub x: usize,
    pub y: usize,
    pub cond: Vec<usize>,
}

impl CiQuery {
    pub fn new(x: usize, y: usize, cond: Vec<usize>) -> Result<Self> {
        if x == y {
            return Err(Error::InvalidArgument("CI query needs two distinct variables".into()));
        }
        if cond.contains(&x) || cond.contains(&y) {
            return Err(Error::InvalidArgument("conditioning set contains a queried variable".into()));
        }
        Ok(Self { x, y, cond })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiOutcome {
    pub independent: bool,
    pub p_value: f64,
}

pub trait CiTest: Sync {
    fn n_vars(&self) -> usize;
    fn test(&self, q: &CiQuery) -> Result<CiOutcome>;
}

fn check_query(q: &CiQuery, n_vars: usize) -> Result<()> {
    if q.x >= n_vars || q.y >= n_vars || q.cond.iter().any(|&c| c >= n_vars) {
        return Err(Error::InvalidArgument("CI query index out of range".into()));
    }
    if q.x == q.y || q.cond.contains(&q.x) || q.cond.contains(&q.y) {
        return Err(Error::InvalidArgument("malformed CI query".into()));
    }
    Ok(())
}

fn rank_hypothesis(q: &CiQuery, n_cols: usize) -> Result<RankHypothesis> {
    let mut x = vec![q.x];
    x.extend(&q.cond);
    let mut y = vec![q.y];
    y.extend(&q.cond);
    RankHypothesis::new(VariableSet::new(x, y, n_cols)?, q.cond.len())
}

/// CI through the permutation rank test: `x ⟂ y | C` is accepted when
/// `rank ≤ |C|` is not rejected for `X = {x} ∪ C`, `Y = {y} ∪ C`.
pub struct RankCi<'a> {
    data: &'a Dataset,
    config: MprtConfig,
}

impl<'a> RankCi<'a> {
    /// `config.seed` is a master seed; each query derives its own stream
    /// from it and the query contents.
    pub fn new(data: &'a Dataset, config: MprtConfig) -> Self {
        Self { data, config }
    }
}

impl CiTest for RankCi<'_> {
    fn n_vars(&self) -> usize {
        self.data.n_cols()
    }

    fn test(&self, q: &CiQuery) -> Result<CiOutcome> {
        check_query(q, self.n_vars())?;
        let mut parts = vec![self.config.seed, q.x as u64, q.y as u64];
        parts.extend(q.cond.iter().map(|&c| c as u64));
        let config = MprtConfig { seed: mix_seed(&parts), ..self.config.clone() };
        let r = mprt(self.data, &rank_hypothesis(q, self.n_vars())?, &config)?;
        Ok(CiOutcome { independent: r.decision, p_value: r.p_value })
    }
}

pub fn rank_ci_test(d: &Dataset, q: &CiQuery, alpha: f64, perms: usize, seed: u64) -> Result<CiOutcome> {
    RankCi::new(d, MprtConfig { alpha, num_perms: perms, seed, ..Default::default() }).test(q)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrSource {
    /// Pearson correlation with ordinal codes taken at face value.
    #[default]
    Sample,
    /// Latent correlation from the pseudo-likelihood estimator.
    Estimated,
}

/// Fisher-Z test of a partial correlation read off a fixed correlation
/// matrix over all columns.
pub struct FisherZCi {
    corr: DMatrix<f64>,
    n: usize,
    alpha: f64,
}

impl FisherZCi {
    pub fn new(d: &Dataset, alpha: f64, source: CorrSource) -> Result<Self> {
        let all: Vec<usize> = (0..d.n_cols()).collect();
        let corr = match source {
            CorrSource::Sample => sample_correlation(d, &all)?,
            CorrSource::Estimated => estimate_correlation(d, &all, &CorrelationConfig::default())?.r_matrix,
        };
        Ok(Self::from_correlation(corr, d.n_rows(), alpha))
    }

    pub fn from_correlation(corr: DMatrix<f64>, n: usize, alpha: f64) -> Self {
        Self { corr, n, alpha }
    }

    pub fn partial_correlation(&self, q: &CiQuery) -> Result<f64> {
        let idx: Vec<usize> = [q.x, q.y].into_iter().chain(q.cond.iter().copied()).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.corr[(idx[i], idx[j])]);
        let prec = sub
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("conditioning-set correlation is singular".into()))?;
        let rho = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
        if !rho.is_finite() {
            return Err(Error::Degenerate("partial correlation is not finite".into()));
        }
        Ok(rho.clamp(-1.0, 1.0))
    }
}

impl CiTest for FisherZCi {
    fn n_vars(&self) -> usize {
        self.corr.nrows()
    }

    fn test(&self, q: &CiQuery) -> Result<CiOutcome> {
        check_query(q, self.n_vars())?;
        if self.n <= q.cond.len() + 3 {
            return Err(Error::InsufficientData(format!("Fisher-Z needs N > |C| + 3, got N = {}", self.n)));
        }
        let rho = self.partial_correlation(q)?.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
        let z = rho.atanh() * ((self.n - q.cond.len() - 3) as f64).sqrt();
        let p_value = (2.0 * std_normal_cdf(-z.abs())).min(1.0);
        Ok(CiOutcome { independent: p_value >= self.alpha, p_value })
    }
}

pub fn fisher_z_ci(d: &Dataset, q: &CiQuery, alpha: f64, source: CorrSource) -> Result<CiOutcome> {
    FisherZCi::new(d, alpha, source)?.test(q)
}

/// CI through the chi-square rank test.
pub struct CcartCi<'a> {
    data: &'a Dataset,
    config: CcartConfig,
    variant: CcartVariant,
}

impl<'a> CcartCi<'a> {
    pub fn new(data: &'a Dataset, config: CcartConfig, variant: CcartVariant) -> Self {
        Self { data, config, variant }
    }
}

impl CiTest for CcartCi<'_> {
    fn n_vars(&self) -> usize {
        self.data.n_cols()
    }

    fn test(&self, q: &CiQuery) -> Result<CiOutcome> {
        check_query(q, self.n_vars())?;
        let r = ccart(self.data, &rank_hypothesis(q, self.n_vars())?, &self.config, self.variant)?;
        Ok(CiOutcome { independent: r.decision, p_value: r.p_value })
    }
}

/// Undirected skeleton with optional orientations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pdag {
    n: usize,
    adj: Vec<bool>,
    // directed[i * n + j]: i → j
    directed: Vec<bool>,
}

impl Pdag {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![false; n * n], directed: vec![false; n * n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in 0..n {
                g.adj[i * n + j] = i != j;
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidArgument(format!("invalid edge ({a}, {b})")));
            }
            g.add_edge(a, b);
        }
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.n + b]
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.adj[a * self.n + b] = true;
        self.adj[b * self.n + a] = true;
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        for (u, v) in [(a, b), (b, a)] {
            self.adj[u * self.n + v] = false;
            self.directed[u * self.n + v] = false;
        }
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.n).filter(|&b| self.adjacent(a, b)).collect()
    }

    /// Undirected edge list with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n).flat_map(|a| ((a + 1)..self.n).map(move |b| (a, b))).filter(|&(a, b)| self.adjacent(a, b)).collect()
    }

    pub fn is_directed(&self, from: usize, to: usize) -> bool {
        self.directed[from * self.n + to]
    }

    fn orient(&mut self, from: usize, to: usize) -> bool {
        if !self.adjacent(from, to) || self.is_directed(from, to) || self.is_directed(to, from) {
            return false;
        }
        self.directed[from * self.n + to] = true;
        true
    }

    fn undirected(&self, a: usize, b: usize) -> bool {
        self.adjacent(a, b) && !self.is_directed(a, b) && !self.is_directed(b, a)
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|a| (0..self.n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.is_directed(a, b))
            .collect()
    }

    pub fn to_json(&self, names: &[String]) -> Result<GraphJson> {
        if names.len() != self.n {
            return Err(Error::InvalidArgument("one name per node required".into()));
        }
        let pair = |(a, b): (usize, usize)| [names[a].clone(), names[b].clone()];
        Ok(GraphJson {
            nodes: names.to_vec(),
            edges: self.edges().into_iter().map(pair).collect(),
            directed: self.directed_edges().into_iter().map(pair).collect(),
        })
    }

    pub fn from_json(g: &GraphJson) -> Result<Self> {
        let pos = |name: &str| {
            g.nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidArgument(format!("edge refers to unknown node '{name}'")))
        };
        let mut out = Self::empty(g.nodes.len());
        for [a, b] in &g.edges {
            let (a, b) = (pos(a)?, pos(b)?);
            if a == b {
                return Err(Error::InvalidArgument("self-loop in graph".into()));
            }
            out.add_edge(a, b);
        }
        for [a, b] in &g.directed {
            let (a, b) = (pos(a)?, pos(b)?);
            if !out.adjacent(a, b) {
                out.add_edge(a, b);
            }
            out.orient(a, b);
        }
        Ok(out)
    }
}

/// `{"nodes": [...], "edges": [["a", "b"], ...]}`; `directed` lists oriented
/// edges as `[from, to]` and is omitted when empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub directed: Vec<[String; 2]>,
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<(Pdag, Vec<String>)> {
    let g: GraphJson = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    Ok((Pdag::from_json(&g)?, g.nodes))
}

pub fn write_graph(path: impl AsRef<Path>, g: &Pdag, names: &[String]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(f, &g.to_json(names)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcConfig {
    /// Largest conditioning-set size tried.
    pub max_cond: usize,
    pub orient: bool,
    pub execution: Execution,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self { max_cond: 3, orient: false, execution: Execution::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcResult {
    pub graph: Pdag,
    /// Separating set for every removed edge, keyed `(a, b)` with `a < b`.
    pub sepsets: BTreeMap<(usize, usize), Vec<usize>>,
    pub tests_run: usize,
}

fn subsets(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < size - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, size, 0, &mut Vec::new(), &mut out);
    out
}

/// Order-independent ("stable") PC adjacency search.
///
/// At each level ℓ the adjacency sets are frozen; every remaining edge
/// `a - b` is tested against the size-ℓ subsets of `adj(a) \ {b}` and then
/// `adj(b) \ {a}` in lexicographic order, stopping at the first independence.
/// Removals are applied together at the end of the level.
pub fn pc_skeleton(oracle: &dyn CiTest, config: &PcConfig) -> Result<PcResult> {
    let n = oracle.n_vars();
    let mut g = Pdag::complete(n);
    let mut sepsets = BTreeMap::new();
    let mut tests_run = 0;
    for level in 0..=config.max_cond {
        let frozen = g.clone();
        let edges = frozen.edges();
        let work: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|&(a, b)| frozen.neighbors(a).len() > level || frozen.neighbors(b).len() > level)
            .collect();
        if work.is_empty() {
            break;
        }
        let results = try_map_indexed(work.len(), config.execution, |i| {
            let (a, b) = work[i];
            let mut tried = BTreeSet::new();
            let mut count = 0;
            for (from, other) in [(a, b), (b, a)] {
                let pool: Vec<usize> = frozen.neighbors(from).into_iter().filter(|&v| v != other).collect();
                for cond in subsets(&pool, level) {
                    if !tried.insert(cond.clone()) {
                        continue;
                    }
                    count += 1;
                    if oracle.test(&CiQuery { x: a, y: b, cond: cond.clone() })?.independent {
                        return Ok::<_, Error>((Some(cond), count));
                    }
                }
            }
            Ok((None, count))
        })?;
        for (&(a, b), (sep, count)) in work.iter().zip(results) {
            tests_run += count;
            if let Some(s) = sep {
                g.remove_edge(a, b);
                sepsets.insert((a, b), s);
            }
        }
    }
    if config.orient {
        orient(&mut g, &sepsets);
    }
    Ok(PcResult { graph: g, sepsets, tests_run })
}

/// Unshielded colliders from separating sets, then Meek's rules 1–3 to a
/// fixed point.
pub fn orient(g: &mut Pdag, sepsets: &BTreeMap<(usize, usize), Vec<usize>>) {
    let n = g.n_nodes();
    for z in 0..n {
        let nb = g.neighbors(z);
        for (i, &x) in nb.iter().enumerate() {
            for &y in &nb[i + 1..] {
                if g.adjacent(x, y) {
                    continue;
                }
                let key = (x.min(y), x.max(y));
                if sepsets.get(&key).is_some_and(|s| !s.contains(&z)) {
                    if !g.is_directed(z, x) {
                        g.orient(x, z);
                    }
                    if !g.is_directed(z, y) {
                        g.orient(y, z);
                    }
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if a == b || !g.undirected(a, b) {
                    continue;
                }
                // R1: c → a - b with c, b non-adjacent
                let r1 = (0..n).any(|c| g.is_directed(c, a) && !g.adjacent(c, b) && c != b);
                // R2: a → c → b
                let r2 = (0..n).any(|c| g.is_directed(a, c) && g.is_directed(c, b));
                // R3: a - c → b, a - d → b, c and d non-adjacent
                let r3 = {
                    let cs: Vec<usize> = (0..n).filter(|&c| g.undirected(a, c) && g.is_directed(c, b)).collect();
                    cs.iter().enumerate().any(|(i, &c)| cs[i + 1..].iter().any(|&d| !g.adjacent(c, d)))
                };
                if (r1 || r2 || r3) && g.orient(a, b) {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub shd: usize,
}

/// Precision, recall and F1 over undirected edges, and the count of edge
/// disagreements. Two empty graphs score F1 = 1.
pub fn skeleton_metrics(estimated: &Pdag, truth: &Pdag) -> Result<SkeletonMetrics> {
    if estimated.n_nodes() != truth.n_nodes() {
        return Err(Error::InvalidArgument("graphs have different node counts".into()));
    }
    let e: BTreeSet<_> = estimated.edges().into_iter().collect();
    let t: BTreeSet<_> = truth.edges().into_iter().collect();
    let tp = e.intersection(&t).count() as f64;
    let shd = e.symmetric_difference(&t).count();
    if e.is_empty() && t.is_empty() {
        return Ok(SkeletonMetrics { precision: 1.0, recall: 1.0, f1: 1.0, shd });
    }
    let precision = if e.is_empty() { 0.0 } else { tp / e.len() as f64 };
    let recall = if t.is_empty() { 0.0 } else { tp / t.len() as f64 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(SkeletonMetrics { precision, recall, f1, shd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::ColumnMeta;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Oracle answering from a known DAG's d-separation via a lookup table.
    struct TableOracle {
        n: usize,
        independent: Vec<(usize, usize, Vec<usize>)>,
    }

    impl CiTest for TableOracle {
        fn n_vars(&self) -> usize {
            self.n
        }
        fn test(&self, q: &CiQuery) -> Result<CiOutcome> {
            let hit = self.independent.iter().any(|(x, y, c)| {
                ((*x == q.x && *y == q.y) || (*x == q.y && *y == q.x)) && {
                    let mut a = c.clone();
                    let mut b = q.cond.clone();
                    a.sort_unstable();
                    b.sort_unstable();
                    a == b
                }
            });
            Ok(CiOutcome { independent: hit, p_value: if hit { 1.0 } else { 0.0 } })
        }
    }

    fn chain_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut c = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b = 1.0 * a + rng.sample::<f64, _>(StandardNormal);
            let d = 1.0 * b + rng.sample::<f64, _>(StandardNormal);
            x.push(a);
            c.push(b);
            y.push(d);
        }
        Dataset::new(
            vec![x, c, y],
            vec![ColumnMeta::continuous("x"), ColumnMeta::continuous("c"), ColumnMeta::continuous("y")],
        )
        .unwrap()
    }

    #[test]
    fn metrics_counting() {
        let t = Pdag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let e = Pdag::from_edges(3, &[(0, 1)]).unwrap();
        let m = skeleton_metrics(&e, &t).unwrap();
        assert_eq!((m.precision, m.recall, m.shd), (1.0, 0.5, 1));
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        let same = skeleton_metrics(&t, &t).unwrap();
        assert_eq!((same.f1, same.shd), (1.0, 0));
        let t3 = Pdag::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let e3 = Pdag::from_edges(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        assert_eq!(skeleton_metrics(&e3, &t3).unwrap().shd, 2);
        assert_eq!(skeleton_metrics(&t3, &e3).unwrap().shd, 2);
        let empty = Pdag::empty(3);
        assert_eq!(skeleton_metrics(&empty, &empty).unwrap().f1, 1.0);
        assert_eq!(skeleton_metrics(&empty, &t).unwrap().f1, 0.0);
    }

    #[test]
    fn pc_recovers_chain_from_perfect_oracle() {
        let oracle = TableOracle { n: 3, independent: vec![(0, 2, vec![1])] };
        let res = pc_skeleton(&oracle, &PcConfig { orient: true, ..Default::default() }).unwrap();
        assert_eq!(res.graph.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(res.sepsets.get(&(0, 2)), Some(&vec![1]));
        // a chain has no unshielded collider
        assert!(res.graph.directed_edges().is_empty());
    }

    #[test]
    fn pc_orients_collider_and_propagates() {
        // 0 → 2 ← 1, 2 → 3
        let oracle = TableOracle {
            n: 4,
            independent: vec![(0, 1, vec![]), (0, 3, vec![2]), (1, 3, vec![2])],
        };
        let seq = PcConfig { orient: true, execution: Execution::Sequential, ..Default::default() };
        let res = pc_skeleton(&oracle, &seq).unwrap();
        assert_eq!(res.graph.edges(), vec![(0, 2), (1, 2), (2, 3)]);
        assert!(res.graph.is_directed(0, 2) && res.graph.is_directed(1, 2));
        assert!(res.graph.is_directed(2, 3), "Meek R1");
        let par = pc_skeleton(&oracle, &PcConfig { orient: true, ..Default::default() }).unwrap();
        assert_eq!(par, res);
    }

    #[test]
    fn lexicographic_subsets() {
        assert_eq!(subsets(&[3, 5, 7], 2), vec![vec![3, 5], vec![3, 7], vec![5, 7]]);
        assert_eq!(subsets(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(subsets(&[1], 2).is_empty());
    }

    #[test]
    fn fisher_z_arithmetic() {
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let fz = FisherZCi::from_correlation(corr, 100, 0.05);
        let q = CiQuery::new(0, 1, vec![]).unwrap();
        let out = fz.test(&q).unwrap();
        // z = atanh(0.5)·√97 = 5.41; two-sided tail ≈ 6.3e-8
        assert!(out.p_value < 1e-6 && !out.independent);
        let zero = FisherZCi::from_correlation(DMatrix::identity(2, 2), 100, 0.05);
        assert_eq!(zero.test(&q).unwrap().p_value, 1.0);
        let tiny = FisherZCi::from_correlation(DMatrix::identity(3, 3), 4, 0.05);
        assert!(tiny.test(&CiQuery::new(0, 1, vec![2]).unwrap()).is_err());
    }

    #[test]
    fn partial_correlation_of_chain_vanishes() {
        let d = chain_data(4000, 1);
        let fz = FisherZCi::new(&d, 0.05, CorrSource::Sample).unwrap();
        let given = fz.partial_correlation(&CiQuery::new(0, 2, vec![1]).unwrap()).unwrap();
        let marginal = fz.partial_correlation(&CiQuery::new(0, 2, vec![]).unwrap()).unwrap();
        assert!(given.abs() < 0.05);
        assert!(marginal > 0.4);
    }

    #[test]
    fn rank_ci_on_chain() {
        let d = chain_data(1000, 2);
        let given = rank_ci_test(&d, &CiQuery::new(0, 2, vec![1]).unwrap(), 0.05, 60, 3).unwrap();
        let marginal = rank_ci_test(&d, &CiQuery::new(0, 2, vec![]).unwrap(), 0.05, 60, 3).unwrap();
        assert!(given.independent, "{given:?}");
        assert!(!marginal.independent, "{marginal:?}");
        assert!(CiQuery::new(1, 1, vec![]).is_err());
        assert!(CiQuery::new(0, 1, vec![1]).is_err());
    }

    #[test]
    fn graph_json_round_trip() {
        let mut g = Pdag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        g.orient(0, 1);
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let js = g.to_json(&names).unwrap();
        let text = serde_json::to_string(&js).unwrap();
        assert!(text.contains("\"edges\":[[\"a\",\"b\"],[\"b\",\"c\"]]"));
        let back = Pdag::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, g);
        let no_dir = serde_json::to_string(&Pdag::empty(2).to_json(&names[..2]).unwrap()).unwrap();
        assert_eq!(no_dir, r#"{"nodes":["a","b"],"edges":[]}"#);
    }
}
