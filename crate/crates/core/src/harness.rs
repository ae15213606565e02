//! Seeded end-to-end experiments: configuration, execution of the two
//! learning stages against a synthetic instance, sweeps, and persistence.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::clustering::{learn_from_graph, ClusteringConfig, DEFAULT_MIN_CLUSTER, DEFAULT_PAIR_EDGE_FRACTION};
use crate::corr_graph::{build_graph, default_threshold};
use crate::error::{Error, Result};
use crate::eval::{coefficients_agree, match_dictionaries, procedure_agreement, theoretical_error_bound, Matching};
use crate::io;
use crate::model::{
    coherence_stats, default_mu0, default_mu1, generate_coefficients, generate_dictionary, synthesize,
    DictionaryEnsemble, ModelParams, ValueModel,
};
use crate::par;
use crate::sparse_recovery::recover_coeff;

pub const DEFAULT_ALPHA: f64 = 0.04;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_SAMPLE_MULTIPLIER: f64 = 10.0;
pub const DEFAULT_EPS_DICT: f64 = 0.3;
pub const DEFAULT_AGREEMENT_SAMPLES: usize = 200;

/// Which learning stages to run after generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub cluster: bool,
    pub postprocess: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        cluster: true,
        postprocess: true,
    };
    pub const NONE: Stages = Stages {
        cluster: false,
        postprocess: false,
    };
}

impl Display for Stages {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = [(self.cluster, "cluster"), (self.postprocess, "postprocess")]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join("+"))
        }
    }
}

impl FromStr for Stages {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut stages = Stages::NONE;
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "cluster" => stages.cluster = true,
                "postprocess" => stages.postprocess = true,
                "none" => {}
                other => return Err(Error::InvalidParameter(format!("unknown stage `{other}`"))),
            }
        }
        Ok(stages)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub n: usize,
    pub alpha: f64,
    pub delta: f64,
    /// Constant in front of the suggested sample size.
    pub sample_multiplier: f64,
    pub eps_dict: f64,
    /// OMP stopping residual; defaults to `s` times the stage-one error.
    pub eps_coeff: Option<f64>,
    /// Graph threshold; computed from the measured incoherence when unset.
    pub rho: Option<f64>,
    pub pair_edge_fraction: f64,
    pub min_cluster: usize,
    pub max_atoms: Option<usize>,
    pub agreement_samples: usize,
    pub seed: u64,
    pub stages: Stages,
    pub output_dir: Option<PathBuf>,
    /// Also write the sample and coefficient matrices.
    pub persist_samples: bool,
}

/// Keys accepted in config files and `--set` overrides.
pub const CONFIG_KEYS: &[&str] = &[
    "d",
    "r",
    "s",
    "n",
    "coef_min",
    "coef_max",
    "mu0",
    "mu1",
    "value_model",
    "ensemble",
    "alpha",
    "delta",
    "sample_multiplier",
    "eps_dict",
    "eps_coeff",
    "rho",
    "pair_edge_fraction",
    "min_cluster",
    "max_atoms",
    "agreement_samples",
    "seed",
    "stages",
    "output_dir",
    "persist_samples",
];

/// Ordered `key=value` entries. Later entries win.
pub type ConfigEntries = Vec<(String, String)>;

/// Parses `key = value` lines; `#` starts a comment. Lines whose key starts
/// with `grid.` are returned separately as sweep axes.
pub fn parse_config_text(text: &str, origin: &Path) -> Result<(ConfigEntries, ConfigEntries)> {
    let mut entries = Vec::new();
    let mut grid = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(io::parse_err(
                origin,
                k + 1,
                format!("expected key=value, got `{line}`"),
            ));
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        match key.strip_prefix("grid.") {
            Some(axis) => grid.push((axis.to_string(), value)),
            None => entries.push((key, value)),
        }
    }
    Ok((entries, grid))
}

pub fn read_config_file(path: &Path) -> Result<(ConfigEntries, ConfigEntries)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text, path)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidParameter(format!("{key} = `{value}`: {e}")))
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match value {
        "" | "auto" | "none" => Ok(None),
        v => parse_value(key, v).map(Some),
    }
}

impl ExperimentConfig {
    /// Defaults for the given shape.
    pub fn new(d: usize, r: usize, s: usize, n: usize) -> Self {
        ExperimentConfig {
            model: ModelParams::bernoulli(d, r, s),
            n,
            alpha: DEFAULT_ALPHA,
            delta: DEFAULT_DELTA,
            sample_multiplier: DEFAULT_SAMPLE_MULTIPLIER,
            eps_dict: DEFAULT_EPS_DICT,
            eps_coeff: None,
            rho: None,
            pair_edge_fraction: DEFAULT_PAIR_EDGE_FRACTION,
            min_cluster: DEFAULT_MIN_CLUSTER,
            max_atoms: None,
            agreement_samples: DEFAULT_AGREEMENT_SAMPLES,
            seed: 0,
            stages: Stages::ALL,
            output_dir: None,
            persist_samples: false,
        }
    }

    /// Builds a config from entries applied over the defaults. `mu0` and
    /// `mu1` default to values derived from the final `d` and `r`.
    pub fn from_entries(entries: &[(String, String)]) -> Result<Self> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for (key, value) in entries {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::InvalidParameter(format!("unknown config key `{key}`")));
            }
            map.insert(key, value);
        }
        let get = |key: &str| map.get(key).copied();
        let required = |key: &str| -> Result<usize> {
            parse_value(
                key,
                get(key).ok_or_else(|| Error::InvalidParameter(format!("missing `{key}`")))?,
            )
        };
        let (d, r, s, n) = (required("d")?, required("r")?, required("s")?, required("n")?);
        let mut c = ExperimentConfig::new(d, r, s, n);
        let m = &mut c.model;
        if let Some(v) = get("coef_min") {
            m.coef_min = parse_value("coef_min", v)?;
        }
        if let Some(v) = get("coef_max") {
            m.coef_max = parse_value("coef_max", v)?;
        }
        m.mu0 = get("mu0")
            .map(|v| parse_value("mu0", v))
            .transpose()?
            .unwrap_or(default_mu0(d, r));
        m.mu1 = get("mu1")
            .map(|v| parse_value("mu1", v))
            .transpose()?
            .unwrap_or(default_mu1(d, r));
        if let Some(v) = get("value_model") {
            m.value_model = v.parse::<ValueModel>()?;
        }
        if let Some(v) = get("ensemble") {
            m.ensemble = v.parse::<DictionaryEnsemble>()?;
        }
        if let Some(v) = get("alpha") {
            c.alpha = parse_value("alpha", v)?;
        }
        if let Some(v) = get("delta") {
            c.delta = parse_value("delta", v)?;
        }
        if let Some(v) = get("sample_multiplier") {
            c.sample_multiplier = parse_value("sample_multiplier", v)?;
        }
        if let Some(v) = get("eps_dict") {
            c.eps_dict = parse_value("eps_dict", v)?;
        }
        if let Some(v) = get("eps_coeff") {
            c.eps_coeff = parse_optional("eps_coeff", v)?;
        }
        if let Some(v) = get("rho") {
            c.rho = parse_optional("rho", v)?;
        }
        if let Some(v) = get("pair_edge_fraction") {
            c.pair_edge_fraction = parse_value("pair_edge_fraction", v)?;
        }
        if let Some(v) = get("min_cluster") {
            c.min_cluster = parse_value("min_cluster", v)?;
        }
        if let Some(v) = get("max_atoms") {
            c.max_atoms = parse_optional("max_atoms", v)?;
        }
        if let Some(v) = get("agreement_samples") {
            c.agreement_samples = parse_value("agreement_samples", v)?;
        }
        if let Some(v) = get("seed") {
            c.seed = parse_value("seed", v)?;
        }
        if let Some(v) = get("stages") {
            c.stages = v.parse()?;
        }
        if let Some(v) = get("output_dir") {
            c.output_dir = (!v.is_empty()).then(|| PathBuf::from(v));
        }
        if let Some(v) = get("persist_samples") {
            c.persist_samples = parse_value("persist_samples", v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 0.05) {
            return bad(format!("alpha must lie in (0, 1/20), got {}", self.alpha));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.sample_multiplier > 0.0) {
            return bad(format!(
                "sample_multiplier must be positive, got {}",
                self.sample_multiplier
            ));
        }
        if let Some(e) = self.eps_coeff {
            if !(e >= 0.0) {
                return bad(format!("eps_coeff must be nonnegative, got {e}"));
            }
        }
        if self.stages.postprocess && !self.stages.cluster {
            return Err(Error::MissingStage("postprocess"));
        }
        self.clustering_config().validate()
    }

    pub fn clustering_config(&self) -> ClusteringConfig {
        ClusteringConfig {
            eps_dict: self.eps_dict,
            seed: self.seed,
            max_atoms: self.max_atoms,
            min_cluster: self.min_cluster,
            pair_edge_fraction: self.pair_edge_fraction,
        }
    }

    /// `c r / (alpha^2 s) ln(d / delta)` with `c = sample_multiplier`.
    pub fn n_suggest(&self) -> f64 {
        let m = &self.model;
        self.sample_multiplier * m.r as f64 / (self.alpha * self.alpha * m.s as f64) * (m.d as f64 / self.delta).ln()
    }
}

/// Wall-clock time per stage in milliseconds. Kept out of [`ReportRow`]'s
/// CSV so that reports are reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub generate_ms: f64,
    pub graph_ms: f64,
    pub cluster_ms: f64,
    pub postprocess_ms: f64,
    pub eval_ms: f64,
}

impl StageTimings {
    pub const HEADER: &'static str = "seed,generate_ms,graph_ms,cluster_ms,postprocess_ms,eval_ms";
}

/// One experiment's outcome. Fields not reached are NaN or zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub config: ExperimentConfig,
    /// `ok`, or the kind of the error that stopped the run.
    pub status: String,
    pub n_suggest: f64,
    pub mu0_hat: f64,
    pub mu1_hat: f64,
    pub rho: f64,
    pub edges: usize,
    pub recovered_atoms: usize,
    pub eps_a_stage1: f64,
    pub mean_error_stage1: f64,
    pub procedure_agreement: f64,
    /// Error bound at the measured `mu1` and configured `alpha`.
    pub error_bound: f64,
    /// `eps_a_stage1^2 / error_bound`.
    pub bound_slack: f64,
    pub eps_coeff: f64,
    pub exact_recovery: bool,
    pub eps_a_stage2: f64,
    pub timings: StageTimings,
}

impl ReportRow {
    pub const HEADER: &'static str = "seed,d,r,s,n,value_model,ensemble,coef_min,coef_max,mu0,mu1,alpha,delta,\
sample_multiplier,n_suggest,eps_dict,pair_edge_fraction,min_cluster,max_atoms,stages,status,mu0_hat,mu1_hat,rho,\
edges,recovered_atoms,eps_a_stage1,mean_error_stage1,procedure_agreement,error_bound,bound_slack,eps_coeff,\
exact_recovery,eps_a_stage2";

    fn empty(config: &ExperimentConfig) -> Self {
        ReportRow {
            config: config.clone(),
            status: "ok".into(),
            n_suggest: config.n_suggest(),
            mu0_hat: f64::NAN,
            mu1_hat: f64::NAN,
            rho: f64::NAN,
            edges: 0,
            recovered_atoms: 0,
            eps_a_stage1: f64::NAN,
            mean_error_stage1: f64::NAN,
            procedure_agreement: f64::NAN,
            error_bound: f64::NAN,
            bound_slack: f64::NAN,
            eps_coeff: f64::NAN,
            exact_recovery: false,
            eps_a_stage2: f64::NAN,
            timings: StageTimings::default(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Whether the run completed, every atom was matched, and (when the
    /// second stage ran) recovery was exact.
    pub fn passed(&self) -> bool {
        let c = &self.config;
        self.is_ok()
            && (!c.stages.cluster || self.recovered_atoms == c.model.r)
            && (!c.stages.postprocess || self.exact_recovery)
    }

    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let m = &c.model;
        let max_atoms = c.max_atoms.map_or("none".to_string(), |v| v.to_string());
        [
            c.seed.to_string(),
            m.d.to_string(),
            m.r.to_string(),
            m.s.to_string(),
            c.n.to_string(),
            m.value_model.to_string(),
            m.ensemble.to_string(),
            m.coef_min.to_string(),
            m.coef_max.to_string(),
            m.mu0.to_string(),
            m.mu1.to_string(),
            c.alpha.to_string(),
            c.delta.to_string(),
            c.sample_multiplier.to_string(),
            self.n_suggest.to_string(),
            c.eps_dict.to_string(),
            c.pair_edge_fraction.to_string(),
            c.min_cluster.to_string(),
            max_atoms,
            c.stages.to_string(),
            self.status.clone(),
            self.mu0_hat.to_string(),
            self.mu1_hat.to_string(),
            self.rho.to_string(),
            self.edges.to_string(),
            self.recovered_atoms.to_string(),
            self.eps_a_stage1.to_string(),
            self.mean_error_stage1.to_string(),
            self.procedure_agreement.to_string(),
            self.error_bound.to_string(),
            self.bound_slack.to_string(),
            self.eps_coeff.to_string(),
            self.exact_recovery.to_string(),
            self.eps_a_stage2.to_string(),
        ]
        .join(",")
    }

    pub fn timings_csv(&self) -> String {
        let t = &self.timings;
        format!(
            "{},{:.3},{:.3},{:.3},{:.3},{:.3}",
            self.config.seed, t.generate_ms, t.graph_ms, t.cluster_ms, t.postprocess_ms, t.eval_ms
        )
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs one experiment. Stage errors end the run and are recorded in the
/// row's status; results of completed stages are kept.
pub fn run_experiment(config: &ExperimentConfig) -> ReportRow {
    let mut row = ReportRow::empty(config);
    if let Err(e) = run_stages(config, &mut row) {
        row.status = e.kind().to_string();
    }
    if let Some(dir) = &config.output_dir {
        let written = io::write_table(&dir.join("report.csv"), ReportRow::HEADER, &[row.to_csv()])
            .and_then(|_| io::write_table(&dir.join("timings.csv"), StageTimings::HEADER, &[row.timings_csv()]));
        if let Err(e) = written {
            row.status = e.kind().to_string();
        }
    }
    row
}

fn write_matching(dir: Option<&Path>, name: &str, matching: &Matching) -> Result<()> {
    match dir {
        Some(dir) => matching.write_csv(&dir.join(name)),
        None => Ok(()),
    }
}

fn run_stages(config: &ExperimentConfig, row: &mut ReportRow) -> Result<()> {
    config.validate()?;
    let params = &config.model;
    let dir = config.output_dir.as_deref();

    let start = Instant::now();
    let dictionary = generate_dictionary(params, config.seed)?;
    let coefficients = generate_coefficients(params, config.n, config.seed)?;
    let samples = synthesize(&dictionary, &coefficients)?;
    let stats = coherence_stats(&dictionary);
    row.mu0_hat = stats.mu0_hat;
    row.mu1_hat = stats.mu1_hat;
    row.timings.generate_ms = elapsed_ms(start);
    if let Some(dir) = dir {
        io::write_matrix(&dir.join("dictionary.csv"), dictionary.matrix())?;
        io::write_index_lists(&dir.join("supports.csv"), coefficients.supports())?;
        if config.persist_samples {
            io::write_matrix(&dir.join("coefficients.csv"), coefficients.values())?;
            io::write_matrix(&dir.join("samples.csv"), samples.samples())?;
        }
    }
    if !config.stages.cluster {
        return Ok(());
    }
    let truth = samples.ground_truth().ok_or(Error::MissingStage("generate"))?;

    let start = Instant::now();
    let rho = match config.rho {
        Some(rho) => rho,
        None => default_threshold(params, stats.mu0_hat)?,
    };
    row.rho = rho;
    let graph = build_graph(&samples, rho)?;
    row.edges = graph.edge_count();
    row.timings.graph_ms = elapsed_ms(start);

    let start = Instant::now();
    let clustering = config.clustering_config();
    let (estimate, _) = learn_from_graph(&samples, &graph, &clustering)?;
    let stage1 = estimate.to_dictionary()?;
    row.timings.cluster_ms = elapsed_ms(start);

    let start = Instant::now();
    let matching = match_dictionaries(&dictionary, &stage1)?;
    row.recovered_atoms = matching.matches.len();
    row.eps_a_stage1 = matching.eps_a;
    row.mean_error_stage1 = matching.mean_error;
    let measured = ModelParams {
        mu1: stats.mu1_hat,
        ..params.clone()
    };
    row.error_bound = theoretical_error_bound(&measured, config.alpha);
    row.bound_slack = matching.eps_a * matching.eps_a / row.error_bound;
    row.procedure_agreement = match procedure_agreement(
        &samples,
        &graph,
        truth,
        config.agreement_samples,
        config.seed,
        &clustering,
    ) {
        Ok(report) => report.rate(),
        Err(Error::EmptySample) => f64::NAN,
        Err(e) => return Err(e),
    };
    row.timings.eval_ms = elapsed_ms(start);
    if let Some(dir) = dir {
        estimate.write_csv(&dir.join("stage1_dictionary.csv"), &dir.join("stage1_provenance.csv"))?;
    }
    write_matching(dir, "stage1_matching.csv", &matching)?;
    if !config.stages.postprocess {
        return Ok(());
    }

    let start = Instant::now();
    let eps_coeff = config.eps_coeff.unwrap_or(params.s as f64 * matching.eps_a);
    row.eps_coeff = eps_coeff;
    let recovery = recover_coeff(&samples, &stage1, params.s, eps_coeff)?;
    row.timings.postprocess_ms = elapsed_ms(start);

    let start = Instant::now();
    let matching2 = match_dictionaries(&dictionary, &recovery.dictionary)?;
    row.eps_a_stage2 = matching2.eps_a;
    row.exact_recovery =
        recovery.is_consistent() && coefficients_agree(&matching2, &coefficients, &recovery.coefficients);
    row.timings.eval_ms += elapsed_ms(start);
    if let Some(dir) = dir {
        io::write_matrix(&dir.join("stage2_dictionary.csv"), recovery.dictionary.matrix())?;
        if config.persist_samples {
            io::write_matrix(&dir.join("stage2_coefficients.csv"), recovery.coefficients.values())?;
        }
    }
    write_matching(dir, "stage2_matching.csv", &matching2)
}

/// Cartesian product of `axes` applied over `base`, in row-major order with
/// the first axis varying slowest.
pub fn expand_grid(base: &[(String, String)], axes: &[(String, String)]) -> Result<Vec<ExperimentConfig>> {
    let mut combos: Vec<ConfigEntries> = vec![base.to_vec()];
    for (key, values) in axes {
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!("grid axis `{key}` has no values")));
        }
        combos = combos
            .into_iter()
            .flat_map(|entries| {
                values.iter().map(move |v| {
                    let mut e = entries.clone();
                    e.push((key.clone(), v.to_string()));
                    e
                })
            })
            .collect();
    }
    combos.iter().map(|e| ExperimentConfig::from_entries(e)).collect()
}

/// Runs every config, possibly concurrently; rows come back in grid order.
pub fn sweep(grid: &[ExperimentConfig]) -> Result<Vec<ReportRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    Ok(par::map_slice(grid, run_experiment))
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let lines: Vec<String> = rows.iter().map(ReportRow::to_csv).collect();
    io::write_table(path, ReportRow::HEADER, &lines)
}

pub fn write_timings(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let lines: Vec<String> = rows.iter().map(ReportRow::timings_csv).collect();
    io::write_table(path, StageTimings::HEADER, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(pairs: &[(&str, &str)]) -> ConfigEntries {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn small() -> ConfigEntries {
        entries(&[
            ("d", "16"),
            ("r", "16"),
            ("s", "1"),
            ("n", "200"),
            ("rho", "0.5"),
            ("eps_dict", "0.2"),
        ])
    }

    #[test]
    fn parse_text_and_grid_lines() {
        let text = "# comment\nd = 8\nr=16 # trailing\n\ngrid.seed = 1,2\n";
        let (e, g) = parse_config_text(text, Path::new("x")).unwrap();
        assert_eq!(e, entries(&[("d", "8"), ("r", "16")]));
        assert_eq!(g, entries(&[("seed", "1,2")]));
        let err = parse_config_text("d 8", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn later_entries_win_and_unknown_keys_fail() {
        let mut e = small();
        e.push(("n".into(), "300".into()));
        assert_eq!(ExperimentConfig::from_entries(&e).unwrap().n, 300);
        e.push(("bogus".into(), "1".into()));
        assert!(ExperimentConfig::from_entries(&e).is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        for (k, v) in [
            ("n", "0"),
            ("alpha", "0.05"),
            ("eps_dict", "0.5"),
            ("stages", "postprocess"),
        ] {
            let mut e = small();
            e.push((k.into(), v.into()));
            assert!(ExperimentConfig::from_entries(&e).is_err(), "{k}={v}");
        }
    }

    #[test]
    fn stages_round_trip() {
        for s in [
            Stages::ALL,
            Stages::NONE,
            Stages {
                cluster: true,
                postprocess: false,
            },
        ] {
            assert_eq!(s.to_string().parse::<Stages>().unwrap(), s);
        }
        assert_eq!("".parse::<Stages>().unwrap(), Stages::NONE);
    }

    #[test]
    fn suggested_sample_size() {
        let c = ExperimentConfig::new(64, 128, 2, 1);
        let expected = 10.0 * 128.0 / (0.04 * 0.04 * 2.0) * (64.0f64 / 0.05).ln();
        assert!((c.n_suggest() - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn generation_only_row() {
        let mut e = small();
        e.push(("stages".into(), "none".into()));
        let row = run_experiment(&ExperimentConfig::from_entries(&e).unwrap());
        assert!(row.is_ok());
        assert!(row.mu0_hat < 1e-12);
        assert!(row.eps_a_stage1.is_nan());
        assert_eq!(row.recovered_atoms, 0);
    }

    #[test]
    fn orthonormal_single_sparse_run_is_exact() {
        let row = run_experiment(&ExperimentConfig::from_entries(&small()).unwrap());
        assert_eq!(row.status, "ok");
        assert_eq!(row.recovered_atoms, 16);
        assert!(row.exact_recovery);
        assert!(row.passed());
        assert_eq!(row.to_csv().split(',').count(), ReportRow::HEADER.split(',').count());
    }

    #[test]
    fn invalid_regime_is_a_status() {
        let row = run_experiment(
            &ExperimentConfig::from_entries(&entries(&[("d", "64"), ("r", "96"), ("s", "2"), ("n", "50")])).unwrap(),
        );
        assert_eq!(row.status, "InvalidRegime");
        assert!(!row.passed());
    }

    #[test]
    fn sweep_keeps_grid_order_and_duplicates_agree() {
        let grid = expand_grid(&small(), &entries(&[("seed", "3,1,3")])).unwrap();
        let rows = sweep(&grid).unwrap();
        assert_eq!(rows.iter().map(|r| r.config.seed).collect::<Vec<_>>(), vec![3, 1, 3]);
        assert_eq!(rows[0].to_csv(), rows[2].to_csv());
        assert!(sweep(&[]).is_err());
    }
}
