//! Generative model `Y = A X`: domain types, seeded synthetic instances, and
//! measurement of the model constants (incoherence, spectral norm, RIP).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::par;
use crate::rng::{stream_rng, Stream};

/// Unit-norm tolerance for dictionary columns.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Per-column draw budget of the rejection sampler.
pub const DEFAULT_MAX_ATTEMPTS: usize = 200;
/// Largest number of supports `rip_constant` will enumerate.
pub const RIP_ENUMERATION_LIMIT: u128 = 1_000_000;

/// Distribution of the nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueModel {
    /// ±1 with equal probability.
    BernoulliSigned,
    /// Magnitude uniform on `[m, M]`, independent fair sign.
    UniformSymmetric,
}

impl fmt::Display for ValueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueModel::BernoulliSigned => "bernoulli",
            ValueModel::UniformSymmetric => "uniform",
        })
    }
}

impl FromStr for ValueModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(ValueModel::BernoulliSigned),
            "uniform" => Ok(ValueModel::UniformSymmetric),
            other => Err(Error::InvalidParameter(format!("unknown value model `{other}`"))),
        }
    }
}

/// How dictionary atoms are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryEnsemble {
    /// Gaussian columns normalised to the sphere, each accepted only if its
    /// coherence with the already accepted columns is within the declared
    /// `mu0`. When `r <= d` the columns are orthonormalised instead.
    Spherical,
    /// Concatenated orthonormal bases (identity, then a Hadamard basis when
    /// `d` is a power of two, then Haar-random bases) under one common random
    /// rotation. When `r` is a multiple of `d` this is a tight frame.
    BasisUnion,
}

impl fmt::Display for DictionaryEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictionaryEnsemble::Spherical => "spherical",
            DictionaryEnsemble::BasisUnion => "basis-union",
        })
    }
}

impl FromStr for DictionaryEnsemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical" => Ok(DictionaryEnsemble::Spherical),
            "basis-union" => Ok(DictionaryEnsemble::BasisUnion),
            other => Err(Error::InvalidParameter(format!(
                "unknown dictionary ensemble `{other}`"
            ))),
        }
    }
}

/// Dimensions and constants of the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Ambient dimension.
    pub d: usize,
    /// Number of atoms.
    pub r: usize,
    /// Nonzeros per coefficient column.
    pub s: usize,
    /// Smallest nonzero coefficient magnitude.
    pub coef_min: f64,
    /// Largest nonzero coefficient magnitude.
    pub coef_max: f64,
    /// Declared incoherence: `|<a_i, a_j>| <= mu0 / sqrt(d)`.
    pub mu0: f64,
    /// Declared spectral constant: `||A|| <= mu1 * sqrt(r / d)`.
    pub mu1: f64,
    pub value_model: ValueModel,
    pub ensemble: DictionaryEnsemble,
}

impl ModelParams {
    /// ±1 coefficients with default declared constants for `(d, r)`.
    pub fn bernoulli(d: usize, r: usize, s: usize) -> Self {
        ModelParams {
            d,
            r,
            s,
            coef_min: 1.0,
            coef_max: 1.0,
            mu0: default_mu0(d, r),
            mu1: default_mu1(d, r),
            value_model: ValueModel::BernoulliSigned,
            ensemble: DictionaryEnsemble::Spherical,
        }
    }

    pub fn with_ensemble(mut self, ensemble: DictionaryEnsemble) -> Self {
        self.ensemble = ensemble;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.d == 0 || self.r == 0 || self.s == 0 {
            return bad(format!(
                "d, r, s must be positive (d={}, r={}, s={})",
                self.d, self.r, self.s
            ));
        }
        if self.s > self.r || self.s > self.d {
            return bad(format!("s={} must not exceed r={} or d={}", self.s, self.r, self.d));
        }
        if !(self.coef_min > 0.0) || self.coef_max < self.coef_min {
            return bad(format!("need 0 < m <= M (m={}, M={})", self.coef_min, self.coef_max));
        }
        if self.value_model == ValueModel::BernoulliSigned && (self.coef_min != 1.0 || self.coef_max != 1.0) {
            return bad("bernoulli coefficients require m = M = 1".into());
        }
        if !(self.mu0 >= 0.0) || !(self.mu1 > 0.0) {
            return bad(format!(
                "need mu0 >= 0 and mu1 > 0 (mu0={}, mu1={})",
                self.mu0, self.mu1
            ));
        }
        Ok(())
    }

    /// `sqrt(2 s) M`, the bound on every sample norm.
    pub fn sample_norm_bound(&self) -> f64 {
        (2.0 * self.s as f64).sqrt() * self.coef_max
    }
}

/// Declared `mu0` that the spherical sampler meets comfortably.
pub fn default_mu0(d: usize, r: usize) -> f64 {
    if r <= d {
        1.0
    } else {
        (2.0 * (r as f64).ln()).sqrt().max(1.0)
    }
}

pub fn default_mu1(d: usize, r: usize) -> f64 {
    1.5 * (1.0 + (d as f64 / r as f64).sqrt())
}

/// A `d x r` matrix with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary(DMatrix<f64>);

impl Dictionary {
    /// Wraps a matrix whose columns already have unit norm.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        for (j, col) in columns.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidParameter(format!("column {j} has norm {norm}")));
            }
        }
        Ok(Dictionary(columns))
    }

    /// Normalises every column; fails on a zero column.
    pub fn normalized(mut columns: DMatrix<f64>) -> Result<Self> {
        for (j, mut col) in columns.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "column {j} cannot be normalised (norm {norm})"
                )));
            }
            col /= norm;
        }
        Ok(Dictionary(columns))
    }

    pub fn from_atoms(atoms: &[DVector<f64>]) -> Result<Self> {
        let d = atoms.first().map_or(0, |a| a.len());
        if atoms.iter().any(|a| a.len() != d) {
            return Err(Error::DimensionMismatch("atoms of differing length".into()));
        }
        Dictionary::new(DMatrix::from_columns(atoms))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn atom(&self, i: usize) -> DVectorView<'_, f64> {
        self.0.column(i)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// An `r x n` coefficient matrix together with its per-column supports.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    values: DMatrix<f64>,
    supports: Vec<Vec<usize>>,
}

impl CoefficientMatrix {
    /// Supports are read off the nonzero pattern.
    pub fn from_values(values: DMatrix<f64>) -> Self {
        let supports = values
            .column_iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        CoefficientMatrix { values, supports }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn support(&self, col: usize) -> &[usize] {
        &self.supports[col]
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// Checks the model constraints: exactly `s` nonzeros with magnitudes in
    /// `[m, M]` (exactly ±1 for Bernoulli).
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        for (j, supp) in self.supports.iter().enumerate() {
            if supp.len() != params.s {
                return Err(Error::InvalidParameter(format!(
                    "column {j} has {} nonzeros, expected {}",
                    supp.len(),
                    params.s
                )));
            }
            for &i in supp {
                let v = self.values[(i, j)];
                let ok = match params.value_model {
                    ValueModel::BernoulliSigned => v == 1.0 || v == -1.0,
                    ValueModel::UniformSymmetric => v.abs() >= params.coef_min && v.abs() <= params.coef_max,
                };
                if !ok {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i}, {j}) = {v} outside the value model"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `X X^T`, accumulated over supports.
    pub fn gram(&self) -> DMatrix<f64> {
        let r = self.rows();
        let mut g = DMatrix::zeros(r, r);
        for (j, supp) in self.supports.iter().enumerate() {
            for &a in supp {
                let va = self.values[(a, j)];
                for &b in supp {
                    g[(a, b)] += va * self.values[(b, j)];
                }
            }
        }
        g
    }
}

/// The generating factors of a synthetic sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dictionary: Dictionary,
    pub coefficients: CoefficientMatrix,
}

/// A `d x n` sample matrix, optionally with the factors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: DMatrix<f64>,
    ground_truth: Option<GroundTruth>,
}

impl SampleSet {
    pub fn new(samples: DMatrix<f64>) -> Self {
        SampleSet {
            samples,
            ground_truth: None,
        }
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> DVectorView<'_, f64> {
        self.samples.column(i)
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    pub fn max_sample_norm(&self) -> f64 {
        self.samples.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Seeded dictionary satisfying the declared `mu0` and `mu1`.
pub fn generate_dictionary(params: &ModelParams, seed: u64) -> Result<Dictionary> {
    generate_dictionary_with(params, seed, DEFAULT_MAX_ATTEMPTS)
}

pub fn generate_dictionary_with(params: &ModelParams, seed: u64, max_attempts: usize) -> Result<Dictionary> {
    params.validate()?;
    if params.d < 2 || params.r < 2 {
        return Err(Error::InvalidParameter(
            "dictionary generation needs d >= 2 and r >= 2".into(),
        ));
    }
    let mut rng = stream_rng(seed, Stream::Dictionary);
    let (d, r) = (params.d, params.r);
    let matrix = match params.ensemble {
        DictionaryEnsemble::Spherical if r <= d => linalg::random_orthonormal(d, r, &mut rng),
        DictionaryEnsemble::Spherical => spherical_rejection(params, max_attempts, &mut rng)?,
        DictionaryEnsemble::BasisUnion => basis_union(d, r, &mut rng),
    };
    let dict = Dictionary::normalized(matrix)?;
    let stats = coherence_stats(&dict);
    if stats.mu0_hat > params.mu0 {
        return Err(Error::InfeasibleIncoherence {
            declared: params.mu0,
            best: stats.mu0_hat,
        });
    }
    if stats.mu1_hat > params.mu1 {
        return Err(Error::InfeasibleSpectralNorm {
            declared: params.mu1,
            measured: stats.mu1_hat,
        });
    }
    Ok(dict)
}

fn spherical_rejection<R: Rng>(params: &ModelParams, max_attempts: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let (d, r) = (params.d, params.r);
    let sqrt_d = (d as f64).sqrt();
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut running_mu0: f64 = 0.0;
    while accepted.len() < r {
        let mut best = f64::INFINITY;
        let mut chosen = None;
        for _ in 0..max_attempts.max(1) {
            let mut v = linalg::gaussian_vector(d, rng);
            let norm = v.norm();
            if norm == 0.0 {
                continue;
            }
            v /= norm;
            let mu = accepted.iter().map(|a| a.dot(&v).abs()).fold(0.0, f64::max) * sqrt_d;
            if mu <= params.mu0 {
                running_mu0 = running_mu0.max(mu);
                chosen = Some(v);
                break;
            }
            best = best.min(mu);
        }
        match chosen {
            Some(v) => accepted.push(v),
            None => {
                return Err(Error::InfeasibleIncoherence {
                    declared: params.mu0,
                    best: running_mu0.max(best),
                })
            }
        }
    }
    Ok(DMatrix::from_columns(&accepted))
}

fn basis_union<R: Rng>(d: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let mut columns = DMatrix::zeros(d, r);
    let mut filled = 0;
    let mut basis_index = 0;
    while filled < r {
        let basis = match basis_index {
            0 => DMatrix::identity(d, d),
            1 if d.is_power_of_two() => linalg::hadamard(d),
            _ => linalg::random_orthonormal(d, d, rng),
        };
        let take = (r - filled).min(d);
        columns.columns_mut(filled, take).copy_from(&basis.columns(0, take));
        filled += take;
        basis_index += 1;
    }
    linalg::random_orthonormal(d, d, rng) * columns
}

/// Seeded `r x n` coefficient matrix: uniform `s`-subsets, values per the
/// value model.
pub fn generate_coefficients(params: &ModelParams, n: usize, seed: u64) -> Result<CoefficientMatrix> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, Stream::Coefficients);
    let mut values = DMatrix::zeros(params.r, n);
    let mut supports = Vec::with_capacity(n);
    for j in 0..n {
        let mut supp = index::sample(&mut rng, params.r, params.s).into_vec();
        supp.sort_unstable();
        for &i in &supp {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let magnitude = match params.value_model {
                ValueModel::BernoulliSigned => 1.0,
                ValueModel::UniformSymmetric => rng.random_range(params.coef_min..=params.coef_max),
            };
            values[(i, j)] = sign * magnitude;
        }
        supports.push(supp);
    }
    Ok(CoefficientMatrix { values, supports })
}

/// `Y = A X` with the factors attached as ground truth.
pub fn synthesize(dictionary: &Dictionary, coefficients: &CoefficientMatrix) -> Result<SampleSet> {
    if dictionary.len() != coefficients.rows() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {} atoms but coefficients have {} rows",
            dictionary.len(),
            coefficients.rows()
        )));
    }
    let a = dictionary.matrix();
    let mut y = DMatrix::zeros(a.nrows(), coefficients.cols());
    for (j, supp) in coefficients.supports().iter().enumerate() {
        let mut col = y.column_mut(j);
        for &i in supp {
            col.axpy(coefficients.values()[(i, j)], &a.column(i), 1.0);
        }
    }
    Ok(SampleSet {
        samples: y,
        ground_truth: Some(GroundTruth {
            dictionary: dictionary.clone(),
            coefficients: coefficients.clone(),
        }),
    })
}

/// Measured model constants of a dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceStats {
    /// `max_{i != j} |<a_i, a_j>| * sqrt(d)`.
    pub mu0_hat: f64,
    /// `||A||_2 * sqrt(d / r)`.
    pub mu1_hat: f64,
}

pub fn coherence_stats(dictionary: &Dictionary) -> CoherenceStats {
    let a = dictionary.matrix();
    let (d, r) = (a.nrows(), a.ncols());
    let gram = a.transpose() * a;
    let mut max_inner: f64 = 0.0;
    for i in 0..r {
        for j in (i + 1)..r {
            max_inner = max_inner.max(gram[(i, j)].abs());
        }
    }
    let spectral = linalg::spectral_norm(a);
    CoherenceStats {
        mu0_hat: max_inner * (d as f64).sqrt(),
        mu1_hat: spectral * (d as f64 / r as f64).sqrt(),
    }
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Exact restricted isometry constant of order `k` by enumerating every
/// `k`-column sub-dictionary.
pub fn rip_constant(dictionary: &Dictionary, k: usize) -> Result<f64> {
    let (d, r) = (dictionary.dim(), dictionary.len());
    if k == 0 || k > r || k > d {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= min(d, r), got k={k} (d={d}, r={r})"
        )));
    }
    let count = binomial(r, k);
    if count > RIP_ENUMERATION_LIMIT {
        return Err(Error::TooLargeToEnumerate {
            count,
            limit: RIP_ENUMERATION_LIMIT,
        });
    }
    let a = dictionary.matrix();
    let gram = a.transpose() * a;
    // Split the enumeration by the smallest index of the subset.
    let per_first = par::map_range(r - k + 1, |first| {
        let mut worst: f64 = 0.0;
        let mut subset: Vec<usize> = (first..first + k).collect();
        loop {
            let sub = DMatrix::from_fn(k, k, |i, j| gram[(subset[i], subset[j])]);
            let (lo, hi) = linalg::symmetric_extremes(sub);
            worst = worst.max(1.0 - lo).max(hi - 1.0);
            if !next_combination_tail(&mut subset, r) {
                break;
            }
        }
        worst
    });
    Ok(per_first.into_iter().fold(0.0, f64::max))
}

/// Advances `subset[1..]` to the next combination in lexicographic order,
/// keeping `subset[0]` fixed. Returns false when exhausted.
fn next_combination_tail(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 1 {
        i -= 1;
        if subset[i] < n - (k - i) {
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Moves every atom along the sphere to distance exactly `distance` in a
/// random direction orthogonal to it.
pub fn perturb_dictionary(dictionary: &Dictionary, distance: f64, seed: u64) -> Result<Dictionary> {
    if !(0.0..=2.0).contains(&distance) {
        return Err(Error::InvalidParameter(format!(
            "perturbation distance {distance} outside [0, 2]"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Perturbation);
    let theta = 2.0 * (distance / 2.0).asin();
    let a = dictionary.matrix();
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let atom = a.column(j);
        let mut dir = linalg::gaussian_vector(a.nrows(), &mut rng);
        let proj = atom.dot(&dir);
        dir.axpy(-proj, &atom, 1.0);
        let norm = dir.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("degenerate perturbation direction".into()));
        }
        dir /= norm;
        col.copy_from(&(atom * theta.cos() + dir * theta.sin()));
    }
    Dictionary::normalized(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn orthonormal_dict(d: usize) -> Dictionary {
        let params = ModelParams::bernoulli(d, d, 1);
        generate_dictionary(&params, 0).unwrap()
    }

    #[test]
    fn square_orthonormal_has_zero_coherence() {
        let dict = orthonormal_dict(8);
        let stats = coherence_stats(&dict);
        assert!(stats.mu0_hat < 1e-12, "{}", stats.mu0_hat);
        assert!((stats.mu1_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_has_unit_spectral_constant() {
        let dict = Dictionary::new(DMatrix::identity(5, 5)).unwrap();
        let stats = coherence_stats(&dict);
        assert_eq!(stats.mu0_hat, 0.0);
        assert!((stats.mu1_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_matches_pairwise_scan() {
        let params = ModelParams::bernoulli(64, 128, 3);
        let dict = generate_dictionary(&params, 1).unwrap();
        let a = dict.matrix();
        let mut worst: f64 = 0.0;
        let mut pairs = 0;
        for i in 0..128 {
            for j in (i + 1)..128 {
                let ip: f64 = (0..64).map(|t| a[(t, i)] * a[(t, j)]).sum();
                worst = worst.max(ip.abs());
                pairs += 1;
            }
        }
        assert_eq!(pairs, 8128);
        let stats = coherence_stats(&dict);
        assert!((stats.mu0_hat - worst * 8.0).abs() < 1e-12);
        assert!(stats.mu0_hat <= params.mu0);
        // Full SVD oracle for the spectral constant.
        let sv = a.clone().svd(false, false).singular_values;
        let top = sv.iter().copied().fold(0.0, f64::max);
        assert!((stats.mu1_hat - top * (64.0f64 / 128.0).sqrt()).abs() < 1e-12);
        assert!(stats.mu1_hat <= params.mu1);
    }

    #[test]
    fn welch_regime_is_infeasible() {
        let mut params = ModelParams::bernoulli(4, 64, 1);
        params.mu0 = 0.1;
        match generate_dictionary(&params, 0) {
            Err(Error::InfeasibleIncoherence { declared, best }) => {
                assert_eq!(declared, 0.1);
                assert!(best > 0.1);
            }
            other => panic!("expected InfeasibleIncoherence, got {other:?}"),
        }
    }

    #[test]
    fn basis_union_is_tight_frame() {
        let params = ModelParams::bernoulli(64, 128, 2).with_ensemble(DictionaryEnsemble::BasisUnion);
        let dict = generate_dictionary(&params, 5).unwrap();
        let a = dict.matrix();
        let frame = a * a.transpose();
        assert!((frame - DMatrix::identity(64, 64) * 2.0).amax() < 1e-10);
        let stats = coherence_stats(&dict);
        assert!((stats.mu0_hat - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_support_when_s_equals_r() {
        let params = ModelParams::bernoulli(6, 6, 6);
        let x = generate_coefficients(&params, 10, 3).unwrap();
        for supp in x.supports() {
            assert_eq!(supp, &(0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn bernoulli_values_are_signs() {
        let params = ModelParams::bernoulli(16, 40, 4);
        let x = generate_coefficients(&params, 500, 9).unwrap();
        x.validate(&params).unwrap();
        assert!(x.values().iter().all(|v| *v == 0.0 || v.abs() == 1.0));
    }

    #[test]
    fn uniform_values_within_bounds() {
        let mut params = ModelParams::bernoulli(16, 40, 4);
        params.value_model = ValueModel::UniformSymmetric;
        params.coef_min = 0.5;
        params.coef_max = 2.0;
        let x = generate_coefficients(&params, 500, 9).unwrap();
        x.validate(&params).unwrap();
        let mean: f64 = x.values().iter().sum::<f64>() / (500.0 * 4.0);
        assert!(mean.abs() < 0.1);
    }

    #[test]
    fn unit_coefficient_reproduces_atom() {
        let dict = orthonormal_dict(5);
        let mut values = DMatrix::zeros(5, 5);
        for i in 0..5 {
            values[(i, i)] = 1.0;
        }
        values[(2, 2)] = -1.0;
        let x = CoefficientMatrix::from_values(values);
        let y = synthesize(&dict, &x).unwrap();
        for i in 0..5 {
            let expected = if i == 2 {
                -dict.atom(i)
            } else {
                dict.atom(i).into_owned()
            };
            assert_eq!(y.sample(i).into_owned(), expected);
        }
    }

    #[test]
    fn synthesize_rejects_mismatch() {
        let dict = orthonormal_dict(4);
        let x = CoefficientMatrix::from_values(DMatrix::zeros(3, 2));
        assert!(matches!(synthesize(&dict, &x), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sample_norms_within_bound() {
        let params = ModelParams::bernoulli(16, 24, 2);
        let dict = generate_dictionary(&params, 4).unwrap();
        let x = generate_coefficients(&params, 100, 4).unwrap();
        let y = synthesize(&dict, &x).unwrap();
        let bound = params.sample_norm_bound();
        for i in 0..100 {
            assert!(y.sample(i).norm() <= bound);
        }
        let product = dict.matrix() * x.values();
        assert!((product - y.samples()).amax() <= 1e-12);
    }

    #[test]
    fn gram_matches_dense_product() {
        let params = ModelParams::bernoulli(8, 12, 3);
        let x = generate_coefficients(&params, 50, 1).unwrap();
        let dense = x.values() * x.values().transpose();
        assert!((x.gram() - dense).amax() < 1e-12);
    }

    #[test]
    fn rip_of_orthonormal_is_zero() {
        let dict = orthonormal_dict(8);
        for k in 1..=4 {
            assert!(rip_constant(&dict, k).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rip_guard() {
        let params = ModelParams::bernoulli(32, 64, 2);
        let dict = generate_dictionary(&params, 0).unwrap();
        assert!(matches!(rip_constant(&dict, 6), Err(Error::TooLargeToEnumerate { .. })));
        assert!(rip_constant(&dict, 0).is_err());
    }

    #[test]
    fn rip_matches_direct_enumeration() {
        // Independent route: singular values of every column subset.
        let params = ModelParams::bernoulli(6, 9, 1);
        let dict = generate_dictionary(&params, 2).unwrap();
        let a = dict.matrix();
        let k = 3;
        let mut worst: f64 = 0.0;
        for i in 0..9 {
            for j in (i + 1)..9 {
                for l in (j + 1)..9 {
                    let sub = DMatrix::from_columns(&[a.column(i), a.column(j), a.column(l)]);
                    let sv = sub.svd(false, false).singular_values;
                    let lo = sv.min();
                    let hi = sv.max();
                    worst = worst.max(1.0 - lo * lo).max(hi * hi - 1.0);
                }
            }
        }
        assert!((rip_constant(&dict, k).unwrap() - worst).abs() < 1e-10);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(48, 4), 194_580);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn perturbation_has_exact_distance() {
        let params = ModelParams::bernoulli(16, 24, 2);
        let dict = generate_dictionary(&params, 0).unwrap();
        let moved = perturb_dictionary(&dict, 0.05, 1).unwrap();
        for j in 0..24 {
            let dist = (dict.atom(j) - moved.atom(j)).norm();
            assert!((dist - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::bernoulli(8, 8, 9);
        assert!(p.validate().is_err());
        p.s = 2;
        p.coef_max = 2.0;
        assert!(p.validate().is_err());
        p.value_model = ValueModel::UniformSymmetric;
        p.validate().unwrap();
        p.coef_min = 0.0;
        assert!(p.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn generation_is_deterministic_and_unit_norm(seed in any::<u64>(), d in 4usize..20, extra in 0usize..12) {
            let r = d + extra;
            let params = ModelParams::bernoulli(d, r, 2);
            let a = generate_dictionary(&params, seed).unwrap();
            let b = generate_dictionary(&params, seed).unwrap();
            prop_assert_eq!(&a, &b);
            for col in a.matrix().column_iter() {
                prop_assert!((col.norm() - 1.0).abs() <= UNIT_NORM_TOL);
            }
            let x = generate_coefficients(&params, 30, seed).unwrap();
            prop_assert_eq!(&x, &generate_coefficients(&params, 30, seed).unwrap());
        }

        #[test]
        fn rip_within_incoherence_bound(seed in any::<u64>()) {
            let params = ModelParams::bernoulli(12, 16, 2);
            let dict = generate_dictionary(&params, seed).unwrap();
            let stats = coherence_stats(&dict);
            let delta = rip_constant(&dict, 4).unwrap();
            prop_assert!(delta <= 2.0 * stats.mu0_hat * 2.0 / 12f64.sqrt());
        }
    }
}
