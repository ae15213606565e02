//! Evaluation against ground truth: permutation- and sign-invariant
//! dictionary comparison, the approximate-recovery error bound, and
//! brute-force checks of the correlation-graph and clustering guarantees.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::clustering::{evaluate_anchor, ClusteringConfig};
use crate::corr_graph::{CorrelationGraph, Node};
use crate::error::{Error, Result};
use crate::hungarian;
use crate::io;
use crate::model::{coherence_stats, CoefficientMatrix, Dictionary, GroundTruth, ModelParams, SampleSet};
use crate::par;
use crate::rng::{derive_seed, stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedAtom {
    pub estimate: usize,
    pub truth: usize,
    /// `z` in `min_z ||z a_truth - ahat_estimate||`.
    pub sign: f64,
    pub error: f64,
}

/// Optimal one-to-one pairing of estimated and true atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Ordered by estimate index.
    pub matches: Vec<MatchedAtom>,
    pub unmatched_true: Vec<usize>,
    pub unmatched_estimates: Vec<usize>,
    /// Largest per-atom error; infinite when nothing matched.
    pub eps_a: f64,
    pub mean_error: f64,
    /// Sum of squared per-atom errors of the assignment.
    pub cost: f64,
}

impl Matching {
    /// Estimate index -> true index.
    pub fn permutation(&self, estimates: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; estimates];
        for m in &self.matches {
            map[m.estimate] = Some(m.truth);
        }
        map
    }

    /// `estimate,truth,sign,error` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<String> = self
            .matches
            .iter()
            .map(|m| format!("{},{},{},{}", m.estimate, m.truth, m.sign as i8, io::fmt_f64(m.error)))
            .collect();
        io::write_table(path, "estimate,truth,sign,error", &rows)
    }
}

fn squared_signed_distance(a: &DVector<f64>, b: &DVector<f64>) -> (f64, f64) {
    let plus = (a - b).norm_squared();
    let minus = (a + b).norm_squared();
    if plus <= minus {
        (plus, 1.0)
    } else {
        (minus, -1.0)
    }
}

/// Solves the assignment problem on `c(i, j) = min_z ||z a_i - ahat_j||^2`.
pub fn match_dictionaries(truth: &Dictionary, estimate: &Dictionary) -> Result<Matching> {
    if truth.dim() != estimate.dim() {
        return Err(Error::DimensionMismatch(format!(
            "true atoms have dimension {}, estimates {}",
            truth.dim(),
            estimate.dim()
        )));
    }
    let (r, k) = (truth.len(), estimate.len());
    let true_atoms: Vec<DVector<f64>> = (0..r).map(|i| truth.atom(i).into_owned()).collect();
    let est_atoms: Vec<DVector<f64>> = (0..k).map(|j| estimate.atom(j).into_owned()).collect();
    let cost = DMatrix::from_fn(r, k, |i, j| squared_signed_distance(&true_atoms[i], &est_atoms[j]).0);

    let pairs: Vec<(usize, usize)> = if r <= k {
        let (cols, _) = hungarian::assign(&cost);
        cols.into_iter().enumerate().collect()
    } else {
        let (rows, _) = hungarian::assign(&cost.transpose());
        rows.into_iter().enumerate().map(|(j, i)| (i, j)).collect()
    };
    let mut matches: Vec<MatchedAtom> = pairs
        .into_iter()
        .map(|(i, j)| {
            let (sq, sign) = squared_signed_distance(&true_atoms[i], &est_atoms[j]);
            MatchedAtom {
                estimate: j,
                truth: i,
                sign,
                error: sq.sqrt(),
            }
        })
        .collect();
    matches.sort_by_key(|m| m.estimate);
    let mut true_used = vec![false; r];
    let mut est_used = vec![false; k];
    for m in &matches {
        true_used[m.truth] = true;
        est_used[m.estimate] = true;
    }
    let eps_a = if matches.is_empty() {
        f64::INFINITY
    } else {
        matches.iter().map(|m| m.error).fold(0.0, f64::max)
    };
    let mean_error = if matches.is_empty() {
        f64::INFINITY
    } else {
        matches.iter().map(|m| m.error).sum::<f64>() / matches.len() as f64
    };
    let cost = matches.iter().map(|m| m.error * m.error).sum();
    Ok(Matching {
        matches,
        unmatched_true: (0..r).filter(|&i| !true_used[i]).collect(),
        unmatched_estimates: (0..k).filter(|&j| !est_used[j]).collect(),
        eps_a,
        mean_error,
        cost,
    })
}

/// True when every matched estimated code row equals the signed true row.
pub fn coefficients_agree(matching: &Matching, truth: &CoefficientMatrix, estimate: &CoefficientMatrix) -> bool {
    if truth.cols() != estimate.cols() || !matching.unmatched_true.is_empty() {
        return false;
    }
    let (tx, ex) = (truth.values(), estimate.values());
    matching
        .matches
        .iter()
        .all(|m| (0..tx.ncols()).all(|c| ex[(m.estimate, c)] * m.sign == tx[(m.truth, c)]))
        && matching
            .unmatched_estimates
            .iter()
            .all(|&j| ex.row(j).iter().all(|v| *v == 0.0))
}

/// `(32 s M^2 / m^2) (mu1 / sqrt(d s) + mu1^2 / d + s^3 / r + alpha^2 + alpha / sqrt(s))`
/// using the `mu1` in `params`. Meaningful for `alpha` in `[0, 1/20)`.
pub fn theoretical_error_bound(params: &ModelParams, alpha: f64) -> f64 {
    let (d, r, s) = (params.d as f64, params.r as f64, params.s as f64);
    let ratio = params.coef_max * params.coef_max / (params.coef_min * params.coef_min);
    let mu1 = params.mu1;
    32.0 * s * ratio * (mu1 / (d * s).sqrt() + mu1 * mu1 / d + s.powi(3) / r + alpha * alpha + alpha / s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// A pair sharing exactly one atom has no edge.
    MissingEdge,
    /// An edge joins two samples with disjoint supports.
    SpuriousEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub kind: ViolationKind,
    pub shared: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    pub pairs_checked: usize,
    /// Whether `rho` lies strictly inside the interval where the edge
    /// guarantees hold; `None` when not assessed.
    pub rho_in_regime: Option<bool>,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    /// `i,j,kind,shared` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<String> = self
            .violations
            .iter()
            .map(|v| {
                let kind = match v.kind {
                    ViolationKind::MissingEdge => "missing_edge",
                    ViolationKind::SpuriousEdge => "spurious_edge",
                };
                format!("{},{},{kind},{}", v.i, v.j, v.shared)
            })
            .collect();
        io::write_table(path, "i,j,kind,shared", &rows)
    }
}

/// Interval `(s^2 M^2 mu0 / sqrt(d), m^2 - s^2 M^2 mu0 / sqrt(d))` of thresholds
/// for which the edge guarantees hold.
pub fn guarantee_interval(params: &ModelParams, mu0: f64) -> (f64, f64) {
    let s = params.s as f64;
    let lower = s * s * params.coef_max * params.coef_max * mu0 / (params.d as f64).sqrt();
    (lower, params.coef_min * params.coef_min - lower)
}

/// Checks every sample pair against the edge guarantees, after confirming
/// that the threshold interval is nonempty for the measured incoherence.
pub fn verify_corr_graph(
    graph: &CorrelationGraph,
    truth: &GroundTruth,
    params: &ModelParams,
) -> Result<ViolationReport> {
    let mu0_hat = coherence_stats(&truth.dictionary).mu0_hat;
    let (lower, upper) = guarantee_interval(params, mu0_hat);
    if !(lower < upper) {
        return Err(Error::RegimeNotApplicable { lower, upper });
    }
    let mut report = scan_corr_graph(graph, &truth.coefficients)?;
    report.rho_in_regime = Some(lower < graph.rho() && graph.rho() < upper);
    Ok(report)
}

/// Lists pairs sharing exactly one atom without an edge, and edges between
/// samples with disjoint supports. No regime check.
pub fn scan_corr_graph(graph: &CorrelationGraph, coefficients: &CoefficientMatrix) -> Result<ViolationReport> {
    let n = graph.node_count();
    if coefficients.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficient columns for {n} nodes",
            coefficients.cols()
        )));
    }
    let per_row = par::map_range(n, |i| {
        let mut found = Vec::new();
        for j in (i + 1)..n {
            let shared = shared_atoms(coefficients.support(i), coefficients.support(j));
            let edge = graph.has_edge(i, j);
            if shared == 1 && !edge {
                found.push(Violation {
                    i,
                    j,
                    kind: ViolationKind::MissingEdge,
                    shared,
                });
            } else if shared == 0 && edge {
                found.push(Violation {
                    i,
                    j,
                    kind: ViolationKind::SpuriousEdge,
                    shared,
                });
            }
        }
        found
    });
    Ok(ViolationReport {
        violations: per_row.into_iter().flatten().collect(),
        pairs_checked: n * n.saturating_sub(1) / 2,
        rho_in_regime: None,
    })
}

fn shared_atoms(a: &[usize], b: &[usize]) -> usize {
    let (mut p, mut q, mut count) = (0, 0, 0);
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                p += 1;
                q += 1;
            }
        }
    }
    count
}

/// Whether samples `i` and `j` share exactly one atom.
pub fn unique_intersection_oracle(truth: &GroundTruth, i: usize, j: usize) -> bool {
    let x = &truth.coefficients;
    shared_atoms(x.support(i), x.support(j)) == 1
}

/// Agreement between the unique-intersection test and the oracle on sampled
/// anchor edges. A verdict of "accept" counts as positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementReport {
    pub sampled: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    /// Whether `s^3 <= r / 1536`, the regime where the test is guaranteed.
    pub in_regime: bool,
}

impl AgreementReport {
    pub fn rate(&self) -> f64 {
        (self.true_positive + self.true_negative) as f64 / self.sampled as f64
    }

    /// The four-field `tp,fp,tn,fn` row.
    pub fn confusion_csv(&self) -> String {
        format!(
            "{},{},{},{}",
            self.true_positive, self.false_positive, self.true_negative, self.false_negative
        )
    }
}

/// Samples up to `sample_count` distinct anchor edges and compares the
/// test's verdict with [`unique_intersection_oracle`]. Anchors whose common
/// neighborhood is below the minimum cluster size count as rejections.
pub fn procedure_agreement(
    samples: &SampleSet,
    graph: &CorrelationGraph,
    truth: &GroundTruth,
    sample_count: usize,
    seed: u64,
    config: &ClusteringConfig,
) -> Result<AgreementReport> {
    let edges = graph.edges();
    let count = sample_count.min(edges.len());
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let picked = index::sample(&mut stream_rng(seed, Stream::AgreementSample), edges.len(), count).into_vec();
    let verdicts = par::map_slice(&picked, |&e| -> Result<(bool, bool)> {
        let anchor: (Node, Node) = edges[e];
        let pairing = derive_seed(seed, Stream::Pairing, e as u64);
        let candidate = evaluate_anchor(samples, graph, anchor, pairing, config)?;
        Ok((
            candidate.accepted,
            unique_intersection_oracle(truth, anchor.0 as usize, anchor.1 as usize),
        ))
    });
    let r = truth.dictionary.len() as f64;
    let s = truth.coefficients.support(0).len() as f64;
    let mut report = AgreementReport {
        sampled: count,
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
        in_regime: s.powi(3) <= r / 1536.0,
    };
    for v in verdicts {
        match v? {
            (true, true) => report.true_positive += 1,
            (true, false) => report.false_positive += 1,
            (false, false) => report.true_negative += 1,
            (false, true) => report.false_negative += 1,
        }
    }
    Ok(report)
}
