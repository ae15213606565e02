//! Sample correlation graph: nodes are samples, edges join pairs whose
//! absolute inner product strictly exceeds a threshold.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::io;
use crate::model::{ModelParams, SampleSet};
use crate::par;

/// Number of samples per block of the blocked Gram computation.
const GRAM_BLOCK: usize = 256;

pub type Node = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGraph {
    rho: f64,
    neighbors: Vec<Vec<Node>>,
    edges: Vec<(Node, Node)>,
}

impl CorrelationGraph {
    /// Builds a graph from an explicit edge list. Duplicate and self edges are
    /// dropped; pairs are stored with `i < j`.
    pub fn from_edges(n: usize, rho: f64, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for n={n}"
                )));
            }
            if i != j {
                neighbors[i].push(j as Node);
                neighbors[j].push(i as Node);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::from_neighbor_lists(rho, neighbors))
    }

    fn from_neighbor_lists(rho: f64, neighbors: Vec<Vec<Node>>) -> Self {
        let mut edges = Vec::new();
        for (i, list) in neighbors.iter().enumerate() {
            let i = i as Node;
            edges.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        CorrelationGraph { rho, neighbors, edges }
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Sorted neighbor list of `i`.
    pub fn neighbors(&self, i: usize) -> &[Node] {
        &self.neighbors[i]
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(Node, Node)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && i < self.neighbors.len() && self.neighbors[i].binary_search(&(j as Node)).is_ok()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Writes `# n=<n> rho=<rho>` followed by one `i,j` line per edge.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<String> = self.edges.iter().map(|(i, j)| format!("{i},{j}")).collect();
        let header = format!("# n={} rho={}", self.node_count(), io::fmt_f64(self.rho));
        io::write_table(path, &header, &rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        use std::io::BufRead;
        let reader = io::open(path)?;
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(io::parse_err(path, 1, "empty file")),
        };
        let (n, rho) = parse_graph_header(&header).ok_or_else(|| io::parse_err(path, 1, "bad graph header"))?;
        let mut pairs = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match parsed {
                Some(pair) => pairs.push(pair),
                None => return Err(io::parse_err(path, idx + 2, format!("bad edge `{line}`"))),
            }
        }
        Self::from_edges(n, rho, pairs)
    }
}

fn parse_graph_header(line: &str) -> Option<(usize, f64)> {
    let rest = line.strip_prefix('#')?.trim();
    let mut n = None;
    let mut rho = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=')? {
            ("n", v) => n = v.parse().ok(),
            ("rho", v) => rho = v.parse().ok(),
            _ => return None,
        }
    }
    Some((n?, rho?))
}

/// `rho = m^2 / 2 - s^2 M^2 mu0 / sqrt(d)`, which must be positive.
pub fn default_threshold(params: &ModelParams, mu0_effective: f64) -> Result<f64> {
    let m2 = params.coef_min * params.coef_min;
    let big_m2 = params.coef_max * params.coef_max;
    let sqrt_d = (params.d as f64).sqrt();
    let s = params.s as f64;
    let rho = m2 / 2.0 - s * s * big_m2 * mu0_effective / sqrt_d;
    if rho > 0.0 {
        return Ok(rho);
    }
    // Largest integer s with m^2/2 - s^2 M^2 mu0 / sqrt(d) > 0.
    let mut max_sparsity = 0;
    loop {
        let t = (max_sparsity + 1) as f64;
        if m2 / 2.0 - t * t * big_m2 * mu0_effective / sqrt_d > 0.0 && max_sparsity < params.d {
            max_sparsity += 1;
        } else {
            break;
        }
    }
    Err(Error::InvalidRegime { rho, max_sparsity })
}

/// Exact all-pairs thresholding of `|<y_i, y_j>| > rho`.
pub fn build_graph(samples: &SampleSet, rho: f64) -> Result<CorrelationGraph> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {rho}"
        )));
    }
    let y = samples.samples();
    let n = y.ncols();
    if n > Node::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "{n} samples exceed the node index range"
        )));
    }
    let blocks = n.div_ceil(GRAM_BLOCK);
    // Each block owns the upper-triangular neighbors of its rows.
    let upper: Vec<Vec<Vec<Node>>> = par::map_range(blocks, |b| {
        let start = b * GRAM_BLOCK;
        let len = GRAM_BLOCK.min(n - start);
        let rest = n - start;
        let block: DMatrix<f64> = y.columns(start, len).transpose() * y.columns(start, rest);
        (0..len)
            .map(|local| {
                ((local + 1)..rest)
                    .filter(|&c| block[(local, c)].abs() > rho)
                    .map(|c| (start + c) as Node)
                    .collect()
            })
            .collect()
    });
    let mut neighbors: Vec<Vec<Node>> = upper.into_iter().flatten().collect();
    let mut lower: Vec<Vec<Node>> = vec![Vec::new(); n];
    for (i, list) in neighbors.iter().enumerate() {
        for &j in list {
            lower[j as usize].push(i as Node);
        }
    }
    for (list, low) in neighbors.iter_mut().zip(lower) {
        // `low` is ascending and entirely below `list`.
        let mut merged = low;
        merged.append(list);
        *list = merged;
    }
    Ok(CorrelationGraph::from_neighbor_lists(rho, neighbors))
}

/// Common neighbors of the endpoints of edge `(i, j)`, ascending.
pub fn common_neighbors(graph: &CorrelationGraph, i: usize, j: usize) -> Result<Vec<Node>> {
    if !graph.has_edge(i, j) {
        return Err(Error::NotAnEdge(i, j));
    }
    Ok(sorted_intersection(graph.neighbors(i), graph.neighbors(j), i, j))
}

fn sorted_intersection(a: &[Node], b: &[Node], skip_a: usize, skip_b: usize) -> Vec<Node> {
    let (mut p, mut q) = (0, 0);
    let mut out = Vec::new();
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                let v = a[p] as usize;
                if v != skip_a && v != skip_b {
                    out.push(a[p]);
                }
                p += 1;
                q += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_coefficients, generate_dictionary, synthesize, DictionaryEnsemble};
    use proptest::prelude::*;

    fn params(d: usize, s: usize, m: f64, big_m: f64) -> ModelParams {
        let mut p = ModelParams::bernoulli(d, d.max(s), s);
        p.coef_min = m;
        p.coef_max = big_m;
        p
    }

    #[test]
    fn threshold_arithmetic() {
        let rho = default_threshold(&params(400, 2, 1.0, 1.0), 1.0).unwrap();
        assert!((rho - 0.3).abs() < 1e-15);
        let rho = default_threshold(&params(1024, 2, 0.5, 1.0), 0.8).unwrap();
        assert!((rho - 0.025).abs() < 1e-15);
    }

    #[test]
    fn threshold_boundary_is_invalid() {
        match default_threshold(&params(4, 1, 1.0, 1.0), 1.0) {
            Err(Error::InvalidRegime { rho, max_sparsity }) => {
                assert_eq!(rho, 0.0);
                assert_eq!(max_sparsity, 0);
            }
            other => panic!("{other:?}"),
        }
        match default_threshold(&params(64, 3, 1.0, 1.0), 1.0) {
            // 0.5 - s^2/8 > 0 holds for s <= 1.
            Err(Error::InvalidRegime { max_sparsity, .. }) => assert_eq!(max_sparsity, 1),
            other => panic!("{other:?}"),
        }
    }

    fn samples(cols: &[&[f64]]) -> SampleSet {
        let d = cols[0].len();
        let flat: Vec<f64> = cols.iter().flat_map(|c| c.iter().copied()).collect();
        SampleSet::new(DMatrix::from_column_slice(d, cols.len(), &flat))
    }

    #[test]
    fn orthogonal_samples_have_no_edges() {
        let y = samples(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, -2.0]]);
        assert_eq!(build_graph(&y, 0.1).unwrap().edge_count(), 0);
    }

    #[test]
    fn identical_samples_are_joined() {
        let y = samples(&[&[0.6, 0.8], &[0.6, 0.8]]);
        let g = build_graph(&y, 0.5).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert!(g.has_edge(1, 0));
    }

    #[test]
    fn threshold_is_strict() {
        let y = samples(&[&[1.0, 0.0], &[0.5, 1.0], &[-0.5, 0.0]]);
        let g = build_graph(&y, 0.5).unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = build_graph(&y, 0.499).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn rejects_nonpositive_threshold() {
        let y = samples(&[&[1.0], &[1.0]]);
        assert!(build_graph(&y, 0.0).is_err());
    }

    #[test]
    fn star_and_complete_graphs() {
        let star = CorrelationGraph::from_edges(5, 1.0, (1..5).map(|j| (0, j))).unwrap();
        assert!(common_neighbors(&star, 0, 3).unwrap().is_empty());
        assert!(matches!(common_neighbors(&star, 1, 2), Err(Error::NotAnEdge(1, 2))));
        let pairs = (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j)));
        let complete = CorrelationGraph::from_edges(5, 1.0, pairs).unwrap();
        assert_eq!(common_neighbors(&complete, 0, 1).unwrap(), vec![2, 3, 4]);
    }

    #[test]
    fn matches_naive_scan_and_brute_force_common_neighbors() {
        let p = ModelParams::bernoulli(16, 24, 2);
        let a = generate_dictionary(&p, 3).unwrap();
        let x = generate_coefficients(&p, 600, 3).unwrap();
        let y = synthesize(&a, &x).unwrap();
        let g = build_graph(&y, 0.5).unwrap();
        let ym = y.samples();
        let mut expected = Vec::new();
        for i in 0..600 {
            for j in (i + 1)..600 {
                let ip: f64 = ym.column(i).dot(&ym.column(j));
                if ip.abs() > 0.5 {
                    expected.push((i as Node, j as Node));
                }
            }
        }
        assert_eq!(g.edges(), expected.as_slice());
        for &(i, j) in g.edges().iter().step_by(97) {
            let (i, j) = (i as usize, j as usize);
            let brute: Vec<Node> = (0..600)
                .filter(|&k| g.has_edge(k, i) && g.has_edge(k, j))
                .map(|k| k as Node)
                .collect();
            assert_eq!(common_neighbors(&g, i, j).unwrap(), brute);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = CorrelationGraph::from_edges(4, 0.25, [(0, 1), (2, 3), (1, 3)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        g.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# n=4 rho="));
        assert_eq!(CorrelationGraph::read_csv(&path).unwrap(), g);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn graph_is_symmetric_and_loop_free(seed in any::<u64>(), n in 2usize..120) {
            let p = ModelParams::bernoulli(8, 12, 2).with_ensemble(DictionaryEnsemble::BasisUnion);
            let a = generate_dictionary(&p, seed).unwrap();
            let x = generate_coefficients(&p, n, seed).unwrap();
            let y = synthesize(&a, &x).unwrap();
            let g = build_graph(&y, 0.4).unwrap();
            for i in 0..n {
                prop_assert!(!g.has_edge(i, i));
                for &j in g.neighbors(i) {
                    prop_assert!(g.has_edge(j as usize, i));
                }
                prop_assert!(g.neighbors(i).windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
