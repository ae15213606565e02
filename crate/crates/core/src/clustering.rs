//! Dictionary estimation by clustering the correlation graph.
//!
//! Every anchor edge `(i, j)` proposes the set of common neighbors of its
//! endpoints. The set is kept only if a random pairing of its members is
//! almost entirely made of graph edges (the unique-intersection test); the
//! top eigenvector of the members' scatter matrix is then a candidate atom,
//! stored unless it lies within `2 eps_dict` (up to sign) of an atom already
//! found.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::corr_graph::{build_graph, common_neighbors, CorrelationGraph, Node};
use crate::error::{Error, Result};
use crate::io;
use crate::linalg;
use crate::model::{Dictionary, SampleSet};
use crate::par;
use crate::rng::{derive_seed, indexed_rng, stream_rng, Stream};

/// Fraction of member pairs that must be edges for a cluster to pass.
pub const DEFAULT_PAIR_EDGE_FRACTION: f64 = 61.0 / 64.0;
/// Candidate sets smaller than this are skipped.
pub const DEFAULT_MIN_CLUSTER: usize = 4;
/// Relative gap below which the top eigenvalue counts as repeated.
pub const DEGENERATE_GAP: f64 = 1e-10;
/// Anchor edges evaluated per parallel batch.
const EDGE_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringConfig {
    /// Separation parameter; stored atoms are more than `2 eps_dict` apart.
    pub eps_dict: f64,
    pub seed: u64,
    /// Stop once this many atoms are stored.
    pub max_atoms: Option<usize>,
    pub min_cluster: usize,
    pub pair_edge_fraction: f64,
}

impl ClusteringConfig {
    pub fn new(eps_dict: f64, seed: u64) -> Self {
        ClusteringConfig {
            eps_dict,
            seed,
            max_atoms: None,
            min_cluster: DEFAULT_MIN_CLUSTER,
            pair_edge_fraction: DEFAULT_PAIR_EDGE_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_dict > 0.0 && self.eps_dict < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "eps_dict must lie in (0, 1/2), got {}",
                self.eps_dict
            )));
        }
        if !(0.0..1.0).contains(&self.pair_edge_fraction) {
            return Err(Error::InvalidParameter(format!(
                "pair edge fraction must lie in [0, 1), got {}",
                self.pair_edge_fraction
            )));
        }
        if self.min_cluster < 2 {
            return Err(Error::InvalidParameter("min_cluster must be at least 2".into()));
        }
        if self.max_atoms == Some(0) {
            return Err(Error::InvalidParameter("max_atoms must be positive".into()));
        }
        Ok(())
    }
}

/// Top eigenvector of a cluster's scatter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementEstimate {
    /// Unit vector whose first nonzero component is positive.
    pub vector: DVector<f64>,
    pub eigenvalue: f64,
    /// Difference between the two largest eigenvalues.
    pub spectral_gap: f64,
    /// Set when the top eigenvalue is repeated and the direction is arbitrary.
    pub degenerate: bool,
}

/// The outcome of evaluating one anchor edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCandidate {
    pub anchor: (Node, Node),
    pub shat: Vec<Node>,
    pub accepted: bool,
    pub estimate: Option<ElementEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub anchor: (Node, Node),
    pub cluster_size: usize,
}

/// Atoms found by the clustering stage, in discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEstimate {
    atoms: Vec<DVector<f64>>,
    provenance: Vec<Provenance>,
}

impl DictionaryEstimate {
    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn to_dictionary(&self) -> Result<Dictionary> {
        Dictionary::from_atoms(&self.atoms)
    }

    /// Atoms in the matrix CSV format plus an
    /// `atom_index,anchor_i,anchor_j,cluster_size` sidecar.
    pub fn write_csv(&self, atoms_path: &Path, provenance_path: &Path) -> Result<()> {
        io::write_matrix(atoms_path, &DMatrix::from_columns(&self.atoms))?;
        let rows: Vec<String> = self
            .provenance
            .iter()
            .enumerate()
            .map(|(k, p)| format!("{k},{},{},{}", p.anchor.0, p.anchor.1, p.cluster_size))
            .collect();
        io::write_table(provenance_path, "atom_index,anchor_i,anchor_j,cluster_size", &rows)
    }

    /// Whether `candidate` is more than `2 eps_dict` from every stored atom,
    /// up to sign.
    fn is_separated(&self, candidate: &DVector<f64>, eps_dict: f64) -> bool {
        self.atoms
            .iter()
            .all(|b| linalg::signed_distance(candidate, b) > 2.0 * eps_dict)
    }
}

/// Counters from one clustering run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LearnStats {
    pub edges_examined: usize,
    pub clusters_tested: usize,
    pub clusters_accepted: usize,
    pub degenerate: usize,
}

/// Unique-intersection test with the default pair fraction and minimum size.
pub fn unique_intersection_test(shat: &[Node], graph: &CorrelationGraph, seed: u64) -> Result<bool> {
    unique_intersection_test_with(shat, graph, seed, DEFAULT_PAIR_EDGE_FRACTION, DEFAULT_MIN_CLUSTER)
}

/// Shuffles `shat`, splits it into disjoint pairs (the leftover element of
/// an odd set is dropped) and passes iff strictly more than
/// `fraction * pairs` of the pairs are edges.
pub fn unique_intersection_test_with(
    shat: &[Node],
    graph: &CorrelationGraph,
    seed: u64,
    fraction: f64,
    min_cluster: usize,
) -> Result<bool> {
    if shat.len() < min_cluster.max(2) {
        return Err(Error::ClusterTooSmall {
            size: shat.len(),
            min: min_cluster.max(2),
        });
    }
    let mut members = shat.to_vec();
    members.shuffle(&mut indexed_rng(seed, Stream::Pairing, 0));
    let pairs = members.len() / 2;
    let edges = members
        .chunks_exact(2)
        .filter(|p| graph.has_edge(p[0] as usize, p[1] as usize))
        .count();
    Ok(edges as f64 > fraction * pairs as f64)
}

/// Top eigenvector of `sum_{k in shat} y_k y_k^T`.
pub fn estimate_element(shat: &[Node], samples: &SampleSet) -> Result<ElementEstimate> {
    if shat.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let y = samples.samples();
    let block = DMatrix::from_fn(y.nrows(), shat.len(), |r, c| y[(r, shat[c] as usize)]);
    let scatter = &block * block.transpose();
    let (values, vectors) = linalg::sorted_symmetric_eigen(scatter);
    let top = values[0];
    let gap = values.get(1).map_or(f64::INFINITY, |second| top - second);
    let mut vector: DVector<f64> = vectors.column(0).into_owned();
    vector /= vector.norm();
    if let Some(lead) = vector.iter().find(|v| v.abs() > 1e-12) {
        if *lead < 0.0 {
            vector.neg_mut();
        }
    }
    Ok(ElementEstimate {
        vector,
        eigenvalue: top,
        spectral_gap: gap,
        degenerate: gap <= DEGENERATE_GAP * top.abs().max(1.0),
    })
}

/// Builds the correlation graph at `rho` and clusters it with default test
/// settings.
pub fn dictionary_learn(
    samples: &SampleSet,
    rho: f64,
    eps_dict: f64,
    seed: u64,
    max_atoms: Option<usize>,
) -> Result<DictionaryEstimate> {
    let mut config = ClusteringConfig::new(eps_dict, seed);
    config.max_atoms = max_atoms;
    config.validate()?;
    let graph = build_graph(samples, rho)?;
    learn_from_graph(samples, &graph, &config).map(|(est, _)| est)
}

/// Evaluates one anchor edge. `pairing_seed` drives the test's shuffle.
pub fn evaluate_anchor(
    samples: &SampleSet,
    graph: &CorrelationGraph,
    anchor: (Node, Node),
    pairing_seed: u64,
    config: &ClusteringConfig,
) -> Result<AnchorCandidate> {
    let shat = common_neighbors(graph, anchor.0 as usize, anchor.1 as usize)?;
    let accepted = match unique_intersection_test_with(
        &shat,
        graph,
        pairing_seed,
        config.pair_edge_fraction,
        config.min_cluster,
    ) {
        Ok(verdict) => verdict,
        Err(Error::ClusterTooSmall { .. }) => false,
        Err(e) => return Err(e),
    };
    let estimate = if accepted {
        Some(estimate_element(&shat, samples)?)
    } else {
        None
    };
    Ok(AnchorCandidate {
        anchor,
        shat,
        accepted,
        estimate,
    })
}

/// Clusters an existing graph. Anchor edges are visited in a seeded random
/// order; batches are evaluated in parallel and folded in order, so the
/// result does not depend on the number of workers.
pub fn learn_from_graph(
    samples: &SampleSet,
    graph: &CorrelationGraph,
    config: &ClusteringConfig,
) -> Result<(DictionaryEstimate, LearnStats)> {
    config.validate()?;
    if graph.node_count() != samples.len() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} nodes but there are {} samples",
            graph.node_count(),
            samples.len()
        )));
    }
    let mut order: Vec<u32> = (0..graph.edge_count() as u32).collect();
    order.shuffle(&mut stream_rng(config.seed, Stream::EdgeOrder));

    let mut estimate = DictionaryEstimate {
        atoms: Vec::new(),
        provenance: Vec::new(),
    };
    let mut stats = LearnStats::default();
    let limit = config.max_atoms.unwrap_or(usize::MAX);

    'batches: for (batch_index, batch) in order.chunks(EDGE_BATCH).enumerate() {
        let base = batch_index * EDGE_BATCH;
        let positions: Vec<usize> = (base..base + batch.len()).collect();
        let candidates = par::map_slice(&positions, |&pos| {
            let anchor = graph.edges()[order[pos] as usize];
            let seed = derive_seed(config.seed, Stream::Pairing, pos as u64);
            evaluate_anchor(samples, graph, anchor, seed, config)
        });
        for candidate in candidates {
            let candidate = candidate?;
            stats.edges_examined += 1;
            if candidate.shat.len() >= config.min_cluster {
                stats.clusters_tested += 1;
            }
            let Some(element) = candidate.estimate else { continue };
            stats.clusters_accepted += 1;
            if element.degenerate {
                stats.degenerate += 1;
            }
            if estimate.is_separated(&element.vector, config.eps_dict) {
                estimate.atoms.push(element.vector);
                estimate.provenance.push(Provenance {
                    anchor: candidate.anchor,
                    cluster_size: candidate.shat.len(),
                });
                if estimate.len() >= limit {
                    break 'batches;
                }
            }
        }
    }
    if estimate.is_empty() {
        return Err(Error::NoAtomsRecovered {
            edges: stats.edges_examined,
        });
    }
    Ok((estimate, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_coefficients, generate_dictionary, synthesize, ModelParams};
    use proptest::prelude::*;

    fn complete_graph(n: usize) -> CorrelationGraph {
        CorrelationGraph::from_edges(n, 0.5, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))).unwrap()
    }

    #[test]
    fn all_pairs_edges_passes() {
        let g = complete_graph(10);
        let shat: Vec<Node> = (0..10).collect();
        for seed in 0..5 {
            assert!(unique_intersection_test(&shat, &g, seed).unwrap());
        }
    }

    #[test]
    fn no_pair_edges_fails() {
        let g = CorrelationGraph::from_edges(10, 0.5, std::iter::empty()).unwrap();
        let shat: Vec<Node> = (0..10).collect();
        assert!(!unique_intersection_test(&shat, &g, 0).unwrap());
    }

    #[test]
    fn boundary_is_strict() {
        // 128 members; whichever pairing the shuffle picks, exactly 61 of the
        // 64 pairs are edges when the three non-edge pairs are chosen to be
        // the pairs the shuffle produces.
        let shat: Vec<Node> = (0..128).collect();
        let mut members = shat.clone();
        members.shuffle(&mut indexed_rng(11, Stream::Pairing, 0));
        let pairs: Vec<(usize, usize)> = members
            .chunks_exact(2)
            .map(|p| (p[0] as usize, p[1] as usize))
            .collect();
        let g61 = CorrelationGraph::from_edges(128, 0.5, pairs[3..].iter().copied()).unwrap();
        assert!(!unique_intersection_test(&shat, &g61, 11).unwrap());
        let g62 = CorrelationGraph::from_edges(128, 0.5, pairs[2..].iter().copied()).unwrap();
        assert!(unique_intersection_test(&shat, &g62, 11).unwrap());
    }

    #[test]
    fn small_cluster_rejected() {
        let g = complete_graph(3);
        assert!(matches!(
            unique_intersection_test(&[0, 1, 2], &g, 0),
            Err(Error::ClusterTooSmall { size: 3, min: 4 })
        ));
    }

    #[test]
    fn odd_cluster_drops_one_member() {
        // Five members, node 4 isolated: passes whenever 4 is the dropped one.
        let g = CorrelationGraph::from_edges(5, 0.5, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let shat: Vec<Node> = (0..5).collect();
        let verdicts: Vec<bool> = (0..40)
            .map(|s| unique_intersection_test(&shat, &g, s).unwrap())
            .collect();
        assert!(verdicts.iter().any(|v| *v));
        assert!(verdicts.iter().any(|v| !*v));
    }

    #[test]
    fn rank_one_cluster_returns_atom() {
        let a = DVector::from_vec(vec![0.0, -0.6, 0.8]);
        let y = DMatrix::from_columns(&[a.clone(), -a.clone(), a.clone()]);
        let est = estimate_element(&[0, 1, 2], &SampleSet::new(y)).unwrap();
        assert!((&est.vector + &a).norm() < 1e-12);
        assert!(est.vector[1] > 0.0);
        assert!((est.eigenvalue - 3.0).abs() < 1e-12);
        assert!(!est.degenerate);
    }

    #[test]
    fn empty_cluster_errors() {
        let y = SampleSet::new(DMatrix::identity(3, 3));
        assert!(matches!(estimate_element(&[], &y), Err(Error::EmptyCluster)));
    }

    #[test]
    fn repeated_eigenvalue_is_flagged() {
        let y = SampleSet::new(DMatrix::identity(3, 3));
        assert!(estimate_element(&[0, 1], &y).unwrap().degenerate);
    }

    #[test]
    fn single_atom_world() {
        let a = DVector::from_vec(vec![0.36, 0.48, 0.8]);
        let cols: Vec<DVector<f64>> = (0..30)
            .map(|k| if k % 3 == 0 { -a.clone() } else { a.clone() })
            .collect();
        let y = SampleSet::new(DMatrix::from_columns(&cols));
        let est = dictionary_learn(&y, 0.5, 0.2, 1, None).unwrap();
        assert_eq!(est.len(), 1);
        assert!(linalg::signed_distance(&est.atoms()[0], &a) < 1e-12);
    }

    #[test]
    fn s1_cluster_recovers_atom_exactly() {
        let params = ModelParams::bernoulli(16, 16, 1);
        let dict = generate_dictionary(&params, 4).unwrap();
        let x = generate_coefficients(&params, 200, 4).unwrap();
        let y = synthesize(&dict, &x).unwrap();
        let members: Vec<Node> = (0..200).filter(|&i| x.support(i) == [5]).map(|i| i as Node).collect();
        let est = estimate_element(&members, &y).unwrap();
        assert!(linalg::signed_distance(&est.vector, &dict.atom(5).into_owned()) < 1e-12);
    }

    #[test]
    fn no_edges_means_no_atoms() {
        let y = SampleSet::new(DMatrix::identity(4, 4));
        assert!(matches!(
            dictionary_learn(&y, 0.5, 0.2, 0, None),
            Err(Error::NoAtomsRecovered { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(ClusteringConfig::new(0.5, 0).validate().is_err());
        assert!(ClusteringConfig::new(0.0, 0).validate().is_err());
        ClusteringConfig::new(0.3, 0).validate().unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn eigen_residual_small(seed in any::<u64>(), k in 1usize..40) {
            let params = ModelParams::bernoulli(12, 20, 3);
            let dict = generate_dictionary(&params, seed).unwrap();
            let x = generate_coefficients(&params, k, seed).unwrap();
            let y = synthesize(&dict, &x).unwrap();
            let members: Vec<Node> = (0..k as Node).collect();
            let est = estimate_element(&members, &y).unwrap();
            let block = y.samples();
            let scatter = block * block.transpose();
            let residual = (&scatter * &est.vector - &est.vector * est.eigenvalue).norm();
            prop_assert!(residual <= 1e-8 * est.eigenvalue);
            prop_assert!((est.vector.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn stored_atoms_are_separated(seed in any::<u64>()) {
            let params = ModelParams::bernoulli(32, 32, 1);
            let dict = generate_dictionary(&params, seed).unwrap();
            let x = generate_coefficients(&params, 400, seed).unwrap();
            let y = synthesize(&dict, &x).unwrap();
            let eps = 0.2;
            let est = dictionary_learn(&y, 0.5, eps, seed, None).unwrap();
            for (i, a) in est.atoms().iter().enumerate() {
                for b in &est.atoms()[i + 1..] {
                    prop_assert!(linalg::signed_distance(a, b) > 2.0 * eps);
                }
            }
        }
    }
}
