//! Gaussian numerics and the pairwise latent-correlation likelihoods.
//!
//! Every ordinal column is modelled as a thresholded standard normal. A pair
//! of columns then has a single free parameter, the latent correlation `r`,
//! whose log-likelihood takes one of three forms depending on the column
//! kinds: Gaussian (both continuous), polyserial (one ordinal) or polychoric
//! (both ordinal).

pub mod bvn;
pub mod normal;

use serde::{Deserialize, Serialize};

pub use bvn::bvn_cdf;
pub use normal::{normal_interval_prob, std_normal_cdf, std_normal_ln_pdf, std_normal_pdf, std_normal_quantile};

use crate::datamodel::ColumnKind;
use crate::error::{Error, Result};
use crate::optim::minimize_from;

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;
/// Search interval for pairwise fits is `[-R_BOUND, R_BOUND]`.
pub const R_BOUND: f64 = 0.99;
/// Absolute tolerance in `r` for pairwise fits.
pub const R_XATOL: f64 = 1e-6;
const FIT_MAX_EVALS: usize = 200;

/// Finite interior thresholds of an ordinal column with `C` levels.
///
/// Level `t` (1-based) covers the latent interval `(lower(t), upper(t)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdVector {
    interior: Vec<f64>,
}

impl ThresholdVector {
    pub fn new(interior: Vec<f64>) -> Result<Self> {
        if interior.is_empty()
            || interior.iter().any(|t| !t.is_finite())
            || interior.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::NonAscendingThresholds);
        }
        Ok(Self { interior })
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn levels(&self) -> u32 {
        self.interior.len() as u32 + 1
    }

    pub fn lower(&self, level: u32) -> f64 {
        if level <= 1 {
            f64::NEG_INFINITY
        } else {
            self.interior[level as usize - 2]
        }
    }

    pub fn upper(&self, level: u32) -> f64 {
        if level as usize > self.interior.len() {
            f64::INFINITY
        } else {
            self.interior[level as usize - 1]
        }
    }

    /// All `C + 1` cut points including the two infinite ends.
    pub fn bounds(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.interior.len() + 2);
        b.push(f64::NEG_INFINITY);
        b.extend_from_slice(&self.interior);
        b.push(f64::INFINITY);
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    ContCont,
    ContOrd,
    OrdOrd,
}

impl PairKind {
    pub fn of(a: ColumnKind, b: ColumnKind) -> Self {
        match (a.is_ordinal(), b.is_ordinal()) {
            (false, false) => PairKind::ContCont,
            (true, true) => PairKind::OrdOrd,
            _ => PairKind::ContOrd,
        }
    }
}

/// Thresholds from cumulative level proportions: `T_{t+1} = Φ⁻¹(#{x ≤ t} / N)`.
pub fn estimate_thresholds(codes: &[u32], levels: u32) -> Result<ThresholdVector> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("ordinal column needs at least 2 levels, got {levels}")));
    }
    if codes.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut counts = vec![0usize; levels as usize];
    for &c in codes {
        if c == 0 || c > levels {
            return Err(Error::InvalidArgument(format!("level {c} out of range 1..={levels}")));
        }
        counts[c as usize - 1] += 1;
    }
    let n = codes.len() as f64;
    let mut cum = 0usize;
    let mut interior = Vec::with_capacity(levels as usize - 1);
    for (t, &count) in counts[..levels as usize - 1].iter().enumerate() {
        cum += count;
        let proportion = cum as f64 / n;
        let level = t + 1;
        if cum == 0 || cum == codes.len() {
            return Err(Error::UnidentifiableThreshold { level, proportion });
        }
        let q = std_normal_quantile(proportion)?;
        if interior.last().is_some_and(|&prev| prev >= q) {
            return Err(Error::UnidentifiableThreshold { level, proportion });
        }
        interior.push(q);
    }
    ThresholdVector::new(interior)
}

/// Gaussian pair log-likelihood in trace/log-determinant form,
/// `-(tr(R⁻¹S) + ln det R) / 2`, for unit-variance columns with sample
/// correlation `s`. Its maximizer over `r` is exactly `s`.
pub fn loglik_cont_cont(r: f64, sample_corr: f64) -> f64 {
    let det = 1.0 - r * r;
    -0.5 * ((2.0 - 2.0 * r * sample_corr) / det + det.ln())
}

/// Average polyserial log-likelihood of a continuous column `cont`
/// (standardized) against an ordinal column `ord` with thresholds `thr`.
pub fn loglik_polyserial(r: f64, cont: &[f64], ord: &[u32], thr: &ThresholdVector) -> f64 {
    debug_assert_eq!(cont.len(), ord.len());
    let sd = (1.0 - r * r).sqrt();
    let total: f64 = cont
        .iter()
        .zip(ord)
        .map(|(&x, &t)| {
            let p = normal_interval_prob((thr.lower(t) - r * x) / sd, (thr.upper(t) - r * x) / sd);
            std_normal_ln_pdf(x) + p.max(PROB_FLOOR).ln()
        })
        .sum();
    total / cont.len() as f64
}

/// Level-by-level contingency counts of two ordinal columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn zeros(rows: u32, cols: u32) -> Self {
        Self { rows: rows as usize, cols: cols as usize, counts: vec![0; rows as usize * cols as usize] }
    }

    pub fn from_codes(a: &[u32], levels_a: u32, b: &[u32], levels_b: u32) -> Self {
        let mut t = Self::zeros(levels_a, levels_b);
        for (&i, &j) in a.iter().zip(b) {
            t.counts[(i as usize - 1) * t.cols + (j as usize - 1)] += 1;
        }
        t
    }

    /// Counts with the second column read through `perm` (`b[perm[k]]`).
    pub fn from_codes_permuted(a: &[u32], levels_a: u32, b: &[u32], levels_b: u32, perm: &[usize]) -> Self {
        let mut t = Self::zeros(levels_a, levels_b);
        for (&i, &k) in a.iter().zip(perm) {
            t.counts[(i as usize - 1) * t.cols + (b[k] as usize - 1)] += 1;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Count for the 1-based level pair `(a, b)`.
    pub fn get(&self, a: u32, b: u32) -> u64 {
        self.counts[(a as usize - 1) * self.cols + (b as usize - 1)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Probability of every latent rectangle, row-major over level pairs.
pub fn rectangle_probs(r: f64, thr_a: &ThresholdVector, thr_b: &ThresholdVector) -> Vec<f64> {
    let ba = thr_a.bounds();
    let bb = thr_b.bounds();
    let (ra, rb) = (ba.len(), bb.len());
    // corner[i][j] = Φ₂(ba[i], bb[j]; r); edges of the grid are marginals
    let mut corner = vec![0.0; ra * rb];
    for i in 0..ra {
        for j in 0..rb {
            corner[i * rb + j] = if i == 0 || j == 0 {
                0.0
            } else if i == ra - 1 {
                std_normal_cdf(bb[j])
            } else if j == rb - 1 {
                std_normal_cdf(ba[i])
            } else {
                bvn::bvn_lower(ba[i], bb[j], r)
            };
        }
    }
    let mut probs = Vec::with_capacity((ra - 1) * (rb - 1));
    for i in 0..ra - 1 {
        for j in 0..rb - 1 {
            probs.push(
                corner[(i + 1) * rb + j + 1] - corner[i * rb + j + 1] - corner[(i + 1) * rb + j] + corner[i * rb + j],
            );
        }
    }
    probs
}

/// Average polychoric log-likelihood of a contingency table.
pub fn loglik_polychoric(r: f64, table: &ContingencyTable, thr_a: &ThresholdVector, thr_b: &ThresholdVector) -> f64 {
    debug_assert_eq!(table.rows(), thr_a.levels() as usize);
    debug_assert_eq!(table.cols(), thr_b.levels() as usize);
    let probs = rectangle_probs(r, thr_a, thr_b);
    let mut total = 0.0;
    for (&c, &p) in table.counts.iter().zip(&probs) {
        if c > 0 {
            total += c as f64 * p.max(PROB_FLOOR).ln();
        }
    }
    total / table.total() as f64
}

/// Polyserial inputs regrouped by ordinal level so the likelihood loop runs
/// over contiguous slices.
#[derive(Clone, Debug)]
pub struct PolyserialData {
    by_level: Vec<Vec<f64>>,
    bounds: Vec<f64>,
    mean_ln_pdf: f64,
    n: usize,
}

impl PolyserialData {
    pub fn new(cont: &[f64], ord: &[u32], thr: &ThresholdVector) -> Result<Self> {
        Self::build(cont.iter().copied().zip(ord.iter().copied()), cont.len(), ord.len(), thr)
    }

    /// Pairs `cont[k]` with `ord[perm[k]]`.
    pub fn permuted(cont: &[f64], ord: &[u32], thr: &ThresholdVector, perm: &[usize]) -> Result<Self> {
        Self::build(cont.iter().copied().zip(perm.iter().map(|&k| ord[k])), cont.len(), perm.len(), thr)
    }

    fn build(pairs: impl Iterator<Item = (f64, u32)>, n: usize, m: usize, thr: &ThresholdVector) -> Result<Self> {
        if n != m {
            return Err(Error::InvalidArgument(format!("pair length mismatch: {n} vs {m}")));
        }
        if n == 0 {
            return Err(Error::EmptyData);
        }
        let levels = thr.levels();
        let mut by_level = vec![Vec::new(); levels as usize];
        let mut ln_pdf = 0.0;
        for (x, t) in pairs {
            if t == 0 || t > levels {
                return Err(Error::InvalidArgument(format!("level {t} out of range 1..={levels}")));
            }
            ln_pdf += std_normal_ln_pdf(x);
            by_level[t as usize - 1].push(x);
        }
        Ok(Self { by_level, bounds: thr.bounds(), mean_ln_pdf: ln_pdf / n as f64, n })
    }

    pub fn loglik(&self, r: f64) -> f64 {
        let sd = (1.0 - r * r).sqrt();
        let mut total = 0.0;
        for (t, xs) in self.by_level.iter().enumerate() {
            let (lo, hi) = (self.bounds[t], self.bounds[t + 1]);
            for &x in xs {
                let p = normal_interval_prob((lo - r * x) / sd, (hi - r * x) / sd);
                total += p.max(PROB_FLOOR).ln();
            }
        }
        self.mean_ln_pdf + total / self.n as f64
    }
}

#[derive(Clone, Debug)]
pub struct PolychoricData {
    pub table: ContingencyTable,
    pub thr_a: ThresholdVector,
    pub thr_b: ThresholdVector,
}

impl PolychoricData {
    pub fn loglik(&self, r: f64) -> f64 {
        loglik_polychoric(r, &self.table, &self.thr_a, &self.thr_b)
    }
}

/// Everything a pairwise fit needs, prepared once per pair.
#[derive(Clone, Debug)]
pub enum PairData {
    ContCont { sample_corr: f64 },
    ContOrd(PolyserialData),
    OrdOrd(PolychoricData),
}

impl PairData {
    /// Two standardized continuous columns.
    pub fn cont_cont(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidArgument("continuous pair needs two equal columns with N >= 2".into()));
        }
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        Ok(PairData::ContCont { sample_corr: dot / (x.len() - 1) as f64 })
    }

    pub fn polyserial(cont: &[f64], ord: &[u32], thr: &ThresholdVector) -> Result<Self> {
        Ok(PairData::ContOrd(PolyserialData::new(cont, ord, thr)?))
    }

    pub fn polychoric(a: &[u32], thr_a: &ThresholdVector, b: &[u32], thr_b: &ThresholdVector) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidArgument("ordinal pair needs two equal non-empty columns".into()));
        }
        if let Some(&bad) = a.iter().find(|&&c| c == 0 || c > thr_a.levels()) {
            return Err(Error::InvalidArgument(format!("level {bad} out of range 1..={}", thr_a.levels())));
        }
        if let Some(&bad) = b.iter().find(|&&c| c == 0 || c > thr_b.levels()) {
            return Err(Error::InvalidArgument(format!("level {bad} out of range 1..={}", thr_b.levels())));
        }
        let table = ContingencyTable::from_codes(a, thr_a.levels(), b, thr_b.levels());
        Ok(PairData::OrdOrd(PolychoricData { table, thr_a: thr_a.clone(), thr_b: thr_b.clone() }))
    }

    pub fn kind(&self) -> PairKind {
        match self {
            PairData::ContCont { .. } => PairKind::ContCont,
            PairData::ContOrd(_) => PairKind::ContOrd,
            PairData::OrdOrd(_) => PairKind::OrdOrd,
        }
    }

    pub fn loglik(&self, r: f64) -> f64 {
        match self {
            PairData::ContCont { sample_corr } => loglik_cont_cont(r, *sample_corr),
            PairData::ContOrd(d) => d.loglik(r),
            PairData::OrdOrd(d) => d.loglik(r),
        }
    }
}

/// Maximizes the pair log-likelihood over `r ∈ [-0.99, 0.99]`.
///
/// The Gaussian kernel's maximizer is the sample correlation itself, so that
/// case is returned in closed form (clamped to the search interval). The
/// ordinal kernels use a bracketed Brent search started at `r_init`.
pub fn fit_pair(data: &PairData, r_init: f64) -> Result<f64> {
    if !(r_init.abs() <= R_BOUND) {
        return Err(Error::InvalidArgument(format!("r_init must lie in [-{R_BOUND}, {R_BOUND}], got {r_init}")));
    }
    match data {
        PairData::ContCont { sample_corr } => Ok(sample_corr.clamp(-R_BOUND, R_BOUND)),
        _ => {
            let m = minimize_from(|r| -data.loglik(r), r_init, -R_BOUND, R_BOUND, R_XATOL, FIT_MAX_EVALS)?;
            Ok(m.x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::discretize_column;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn bivariate_sample(n: usize, r: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (1.0 - r * r).sqrt();
        (0..n)
            .map(|_| {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                (z1, r * z1 + s * z2)
            })
            .unzip()
    }

    fn standardized(v: &[f64]) -> Vec<f64> {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        v.iter().map(|x| (x - mean) / sd).collect()
    }

    fn grid_argmax(f: impl Fn(f64) -> f64) -> f64 {
        (-95..=95).map(|i| i as f64 / 100.0).max_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap()
    }

    fn codes_with_counts(counts: &[usize]) -> Vec<u32> {
        counts.iter().enumerate().flat_map(|(t, &c)| std::iter::repeat_n(t as u32 + 1, c)).collect()
    }

    #[test]
    fn thresholds_from_counts() {
        let thr = estimate_thresholds(&codes_with_counts(&[10, 30, 60]), 3).unwrap();
        let want = [-1.2816, -0.2533];
        for (got, want) in thr.interior().iter().zip(want) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
        let thr = estimate_thresholds(&codes_with_counts(&[50, 50]), 2).unwrap();
        assert_eq!(thr.interior(), &[0.0]);
        assert!(matches!(
            estimate_thresholds(&codes_with_counts(&[100, 0, 0]), 3),
            Err(Error::UnidentifiableThreshold { .. })
        ));
        assert!(estimate_thresholds(&codes_with_counts(&[0, 40, 60]), 3).is_err());
    }

    #[test]
    fn thresholds_reproduce_proportions_on_fresh_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let latent: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
        let codes = discretize_column(&latent, &[-0.8, 0.1, 1.2]).unwrap();
        let thr = estimate_thresholds(&codes, 4).unwrap();
        let n = 4000;
        let fresh: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let again = discretize_column(&fresh, thr.interior()).unwrap();
        for level in 1..=4u32 {
            let p0 = codes.iter().filter(|&&c| c == level).count() as f64 / n as f64;
            let p1 = again.iter().filter(|&&c| c == level).count() as f64 / n as f64;
            assert!((p0 - p1).abs() < 3.0 / (n as f64).sqrt(), "level {level}: {p0} vs {p1}");
        }
    }

    #[test]
    fn threshold_vector_accessors() {
        let thr = ThresholdVector::new(vec![-0.5, 0.7]).unwrap();
        assert_eq!(thr.levels(), 3);
        assert_eq!(thr.lower(1), f64::NEG_INFINITY);
        assert_eq!(thr.upper(1), -0.5);
        assert_eq!(thr.lower(3), 0.7);
        assert_eq!(thr.upper(3), f64::INFINITY);
        assert!(ThresholdVector::new(vec![0.2, 0.2]).is_err());
        assert!(ThresholdVector::new(vec![]).is_err());
    }

    #[test]
    fn cont_cont_kernel() {
        assert!((loglik_cont_cont(0.0, 0.0) + 1.0).abs() < 1e-15);
        for s in [-0.7, -0.2, 0.4, 0.9] {
            assert!(loglik_cont_cont(s, s) >= loglik_cont_cont(-s, s));
        }
        // golden-section oracle, independent of the Brent code
        let f = |r: f64| -loglik_cont_cont(r, 0.5);
        let (mut a, mut b) = (-0.99f64, 0.99f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-9 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        assert!((0.5 * (a + b) - 0.5).abs() < 5e-2);
        let (x, y) = bivariate_sample(20_000, 0.3, 1);
        let pd = PairData::cont_cont(&standardized(&x), &standardized(&y)).unwrap();
        assert!((fit_pair(&pd, 0.0).unwrap() - 0.3).abs() < 0.05);
    }

    #[test]
    fn polyserial_decouples_at_zero() {
        let (x, y) = bivariate_sample(500, 0.5, 2);
        let x = standardized(&x);
        let ord = discretize_column(&y, &[-0.4, 0.6]).unwrap();
        let thr = estimate_thresholds(&ord, 3).unwrap();
        let v = loglik_polyserial(0.0, &x, &ord, &thr);
        let want: f64 = x
            .iter()
            .zip(&ord)
            .map(|(&c, &t)| std_normal_ln_pdf(c) + normal_interval_prob(thr.lower(t), thr.upper(t)).ln())
            .sum::<f64>()
            / 500.0;
        assert!((v - want).abs() < 1e-12);
        let mut shuffled = ord.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        assert!((loglik_polyserial(0.0, &x, &shuffled, &thr) - v).abs() < 1e-12);
    }

    #[test]
    fn polyserial_prepared_matches_direct() {
        let (x, y) = bivariate_sample(300, -0.4, 4);
        let x = standardized(&x);
        let ord = discretize_column(&y, &[0.0]).unwrap();
        let thr = estimate_thresholds(&ord, 2).unwrap();
        let prepared = PolyserialData::new(&x, &ord, &thr).unwrap();
        for r in [-0.9, -0.3, 0.0, 0.5] {
            assert!((prepared.loglik(r) - loglik_polyserial(r, &x, &ord, &thr)).abs() < 1e-12);
        }
        let perm: Vec<usize> = (0..300).rev().collect();
        let permuted_ord: Vec<u32> = perm.iter().map(|&k| ord[k]).collect();
        let a = PolyserialData::permuted(&x, &ord, &thr, &perm).unwrap();
        assert!((a.loglik(0.3) - loglik_polyserial(0.3, &x, &permuted_ord, &thr)).abs() < 1e-12);
    }

    #[test]
    fn polyserial_recovers_correlation() {
        let (x, y) = bivariate_sample(5000, 0.6, 5);
        let x = standardized(&x);
        let ord = discretize_column(&y, &[-0.5, 0.7]).unwrap();
        let thr = estimate_thresholds(&ord, 3).unwrap();
        let pd = PairData::polyserial(&x, &ord, &thr).unwrap();
        let grid = grid_argmax(|r| pd.loglik(r));
        assert!((grid - 0.6).abs() < 0.05, "grid {grid}");
        let fit = fit_pair(&pd, 0.0).unwrap();
        assert!((fit - grid).abs() < 0.011, "fit {fit} grid {grid}");
    }

    #[test]
    fn polychoric_rectangles_partition_the_plane() {
        let a = ThresholdVector::new(vec![-1.0, 0.2, 0.9]).unwrap();
        let b = ThresholdVector::new(vec![-0.3, 1.1]).unwrap();
        for r in [-0.95, -0.5, 0.0, 0.3, 0.98] {
            let probs = rectangle_probs(r, &a, &b);
            assert_eq!(probs.len(), 12);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|&p| p > -1e-15));
        }
    }

    #[test]
    fn polychoric_factorizes_at_zero() {
        let (x, y) = bivariate_sample(1000, 0.4, 6);
        let a = discretize_column(&x, &[-0.5, 0.5]).unwrap();
        let b = discretize_column(&y, &[0.2]).unwrap();
        let ta = estimate_thresholds(&a, 3).unwrap();
        let tb = estimate_thresholds(&b, 2).unwrap();
        let table = ContingencyTable::from_codes(&a, 3, &b, 2);
        let mut want = 0.0;
        for i in 1..=3 {
            for j in 1..=2 {
                let p = normal_interval_prob(ta.lower(i), ta.upper(i));
                let q = normal_interval_prob(tb.lower(j), tb.upper(j));
                want += table.get(i, j) as f64 * (p * q).ln();
            }
        }
        assert!((loglik_polychoric(0.0, &table, &ta, &tb) - want / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn polychoric_recovers_correlation_from_median_split() {
        let (x, y) = bivariate_sample(10_000, 0.5, 7);
        let a = discretize_column(&x, &[0.0]).unwrap();
        let b = discretize_column(&y, &[0.0]).unwrap();
        let ta = estimate_thresholds(&a, 2).unwrap();
        let tb = estimate_thresholds(&b, 2).unwrap();
        let pd = PairData::polychoric(&a, &ta, &b, &tb).unwrap();
        let grid = grid_argmax(|r| pd.loglik(r));
        assert!((grid - 0.5).abs() < 0.05, "grid {grid}");
        assert!((fit_pair(&pd, 0.0).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn kernels_invariant_to_joint_row_permutation() {
        let (x, y) = bivariate_sample(400, 0.3, 8);
        let xs = standardized(&x);
        let ys = standardized(&y);
        let a = discretize_column(&x, &[-0.3, 0.8]).unwrap();
        let b = discretize_column(&y, &[0.1]).unwrap();
        let ta = estimate_thresholds(&a, 3).unwrap();
        let tb = estimate_thresholds(&b, 2).unwrap();
        let mut order: Vec<usize> = (0..400).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(12));
        let p = |v: &[f64]| order.iter().map(|&k| v[k]).collect::<Vec<_>>();
        let pc = |v: &[u32]| order.iter().map(|&k| v[k]).collect::<Vec<_>>();
        let before = [
            PairData::cont_cont(&xs, &ys).unwrap(),
            PairData::polyserial(&xs, &b, &tb).unwrap(),
            PairData::polychoric(&a, &ta, &b, &tb).unwrap(),
        ];
        let after = [
            PairData::cont_cont(&p(&xs), &p(&ys)).unwrap(),
            PairData::polyserial(&p(&xs), &pc(&b), &tb).unwrap(),
            PairData::polychoric(&pc(&a), &ta, &pc(&b), &tb).unwrap(),
        ];
        for (u, v) in before.iter().zip(&after) {
            for r in [-0.6, 0.0, 0.45] {
                assert!((u.loglik(r) - v.loglik(r)).abs() < 1e-12, "{:?}", u.kind());
            }
        }
    }

    #[test]
    fn fitted_argmax_is_stationary_and_start_independent() {
        let (x, y) = bivariate_sample(2000, 0.45, 10);
        let xs = standardized(&x);
        let a = discretize_column(&x, &[-0.6, 0.4]).unwrap();
        let b = discretize_column(&y, &[-0.2, 0.9]).unwrap();
        let ta = estimate_thresholds(&a, 3).unwrap();
        let tb = estimate_thresholds(&b, 3).unwrap();
        let pairs = [
            PairData::cont_cont(&xs, &standardized(&y)).unwrap(),
            PairData::polyserial(&xs, &b, &tb).unwrap(),
            PairData::polychoric(&a, &ta, &b, &tb).unwrap(),
        ];
        for pd in &pairs {
            let r = fit_pair(pd, 0.5).unwrap();
            let r2 = fit_pair(pd, -0.5).unwrap();
            assert!((r - r2).abs() < 1e-4, "{:?}: {r} vs {r2}", pd.kind());
            let h = 1e-4;
            let deriv = (pd.loglik(r + h) - pd.loglik(r - h)) / (2.0 * h);
            assert!(deriv.abs() < 1e-3, "{:?}: derivative {deriv}", pd.kind());
        }
    }

    #[test]
    fn independent_data_fits_near_zero() {
        let (x, y) = bivariate_sample(10_000, 0.0, 13);
        let xs = standardized(&x);
        let a = discretize_column(&x, &[-0.4, 0.5]).unwrap();
        let b = discretize_column(&y, &[0.3]).unwrap();
        let ta = estimate_thresholds(&a, 3).unwrap();
        let tb = estimate_thresholds(&b, 2).unwrap();
        for pd in [
            PairData::cont_cont(&xs, &standardized(&y)).unwrap(),
            PairData::polyserial(&xs, &b, &tb).unwrap(),
            PairData::polychoric(&a, &ta, &b, &tb).unwrap(),
        ] {
            assert!(fit_pair(&pd, 0.3).unwrap().abs() < 0.05, "{:?}", pd.kind());
        }
    }

    #[test]
    fn pair_kind_from_metas() {
        let c = ColumnKind::Continuous;
        let o = ColumnKind::Ordinal { levels: 3 };
        assert_eq!(PairKind::of(c, c), PairKind::ContCont);
        assert_eq!(PairKind::of(c, o), PairKind::ContOrd);
        assert_eq!(PairKind::of(o, c), PairKind::ContOrd);
        assert_eq!(PairKind::of(o, o), PairKind::OrdOrd);
    }

    #[test]
    fn fit_rejects_out_of_range_start() {
        let pd = PairData::ContCont { sample_corr: 0.2 };
        assert!(fit_pair(&pd, 1.2).is_err());
    }
}
