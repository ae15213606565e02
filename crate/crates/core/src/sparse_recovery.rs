//! Refinement of an approximate dictionary: sparse-code every sample against
//! it, round the codes to signs, and re-solve for the dictionary by least
//! squares.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CoefficientMatrix, Dictionary, SampleSet};
use crate::par;

/// Largest condition number accepted for a selected sub-dictionary.
pub const MAX_SUPPORT_CONDITION: f64 = 1e8;
/// Smallest accepted `sigma_min / sigma_max` of the coefficient Gram matrix.
pub const MIN_GRAM_RATIO: f64 = 1e-10;
/// Relative refit residual above which a recovery is flagged as inconsistent.
pub const FIT_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodeResult {
    pub xhat: DVector<f64>,
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    /// `||y - Abar xhat||_2`.
    pub residual_norm: f64,
}

/// Orthogonal matching pursuit: at most `s` greedy selections, stopping early
/// once the residual is within `eps_coeff`; coefficients are the least-squares
/// fit on the selected atoms.
pub fn sparse_code(abar: &Dictionary, y: DVectorView<'_, f64>, s: usize, eps_coeff: f64) -> Result<SparseCodeResult> {
    let a = abar.matrix();
    let (d, r) = (a.nrows(), a.ncols());
    if y.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "sample has length {}, dictionary dimension is {d}",
            y.len()
        )));
    }
    if s > d || s > r {
        return Err(Error::InvalidParameter(format!("sparsity {s} exceeds d={d} or r={r}")));
    }
    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut coef = DVector::zeros(0);
    let mut residual: DVector<f64> = y.into_owned();
    while support.len() < s && residual.norm() > eps_coeff {
        let corr = a.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if support.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| c.abs() > b) {
                best = Some((j, c.abs()));
            }
        }
        match best {
            Some((j, c)) if c > 0.0 => support.push(j),
            _ => break,
        }
        let sub = DMatrix::from_fn(d, support.len(), |i, k| a[(i, support[k])]);
        let svd = sub.clone().svd(true, true);
        let hi = svd.singular_values.max();
        let lo = svd.singular_values.min();
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > MAX_SUPPORT_CONDITION {
            return Err(Error::IllConditionedSupport { cond });
        }
        coef = svd
            .solve(&y, 0.0)
            .map_err(|e| Error::InvalidParameter(format!("least-squares solve failed: {e}")))?;
        residual = y - &sub * &coef;
    }
    let mut xhat = DVector::zeros(r);
    for (k, &j) in support.iter().enumerate() {
        xhat[j] = coef[k];
    }
    let residual_norm = (y - a * &xhat).norm();
    Ok(SparseCodeResult {
        xhat,
        support,
        residual_norm,
    })
}

/// Entries with magnitude below 1/2 become 0, the rest their sign.
pub fn threshold_signs(xhat: &DMatrix<f64>) -> DMatrix<f64> {
    xhat.map(|v| {
        if v >= 0.5 {
            1.0
        } else if v <= -0.5 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Smallest eigenvalue of `X X^T`.
pub fn gram_min_eigenvalue(x: &CoefficientMatrix) -> f64 {
    linalg::symmetric_extremes(x.gram()).0
}

/// `n s / (4 r)`: lower bound on the smallest eigenvalue of `X X^T` under
/// which the refit is well posed.
pub fn well_posed_bound(n: usize, s: usize, r: usize) -> f64 {
    (n * s) as f64 / (4 * r) as f64
}

/// `A = Y X^T (X X^T)^{-1}` with unit-normalised columns.
pub fn reestimate_dictionary(samples: &SampleSet, xhat: &DMatrix<f64>) -> Result<Dictionary> {
    let y = samples.samples();
    if xhat.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficient columns for {} samples",
            xhat.ncols(),
            y.ncols()
        )));
    }
    let x = CoefficientMatrix::from_values(xhat.clone());
    let gram = x.gram();
    let (lo, hi) = linalg::symmetric_extremes(gram.clone());
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio >= MIN_GRAM_RATIO) {
        return Err(Error::SingularGram { ratio });
    }
    // Y X^T accumulated over supports.
    let mut cross = DMatrix::zeros(y.nrows(), x.rows());
    for (j, supp) in x.supports().iter().enumerate() {
        for &i in supp {
            cross.column_mut(i).axpy(xhat[(i, j)], &y.column(j), 1.0);
        }
    }
    let chol = gram.cholesky().ok_or(Error::SingularGram { ratio })?;
    // G A^T = (Y X^T)^T
    let at = chol.solve(&cross.transpose());
    Dictionary::normalized(at.transpose())
}

/// Output of the refinement stage.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRecovery {
    pub dictionary: Dictionary,
    /// Sign-thresholded codes.
    pub coefficients: CoefficientMatrix,
    /// Per-sample sparse-coding residual against the input dictionary.
    pub code_residuals: Vec<f64>,
    /// Largest `||y_i - Ahat xhat_i|| / ||y_i||` after the refit.
    pub max_fit_residual: f64,
}

impl CoefficientRecovery {
    /// True when the refitted factors reproduce every sample.
    pub fn is_consistent(&self) -> bool {
        self.max_fit_residual <= FIT_RESIDUAL_TOL
    }
}

/// Sparse-codes every sample, thresholds, and re-estimates the dictionary.
pub fn recover_coeff(samples: &SampleSet, abar: &Dictionary, s: usize, eps_coeff: f64) -> Result<CoefficientRecovery> {
    if abar.dim() != samples.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary dimension {} vs sample dimension {}",
            abar.dim(),
            samples.dim()
        )));
    }
    let n = samples.len();
    let codes = par::map_range(n, |i| sparse_code(abar, samples.sample(i), s, eps_coeff));
    let mut raw = DMatrix::zeros(abar.len(), n);
    let mut code_residuals = Vec::with_capacity(n);
    for (i, code) in codes.into_iter().enumerate() {
        let code = code?;
        raw.set_column(i, &code.xhat);
        code_residuals.push(code.residual_norm);
    }
    let signs = threshold_signs(&raw);
    let dictionary = reestimate_dictionary(samples, &signs)?;
    let fit = dictionary.matrix() * &signs;
    let max_fit_residual = (0..n)
        .map(|i| {
            let y = samples.sample(i);
            let scale = y.norm().max(f64::MIN_POSITIVE);
            (y - fit.column(i)).norm() / scale
        })
        .fold(0.0, f64::max);
    Ok(CoefficientRecovery {
        dictionary,
        coefficients: CoefficientMatrix::from_values(signs),
        code_residuals,
        max_fit_residual,
    })
}
