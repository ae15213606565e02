use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use overdict::clustering::learn_from_graph;
use overdict::corr_graph::{build_graph, default_threshold, CorrelationGraph};
use overdict::eval::{coefficients_agree, match_dictionaries, scan_corr_graph, theoretical_error_bound};
use overdict::harness::{
    expand_grid, read_config_file, run_experiment, sweep, write_report, write_timings, ConfigEntries, ExperimentConfig,
    ReportRow,
};
use overdict::io;
use overdict::model::{
    coherence_stats, generate_coefficients, generate_dictionary, synthesize, CoefficientMatrix, Dictionary, SampleSet,
};
use overdict::sparse_recovery::recover_coeff;
use overdict::Error;

#[derive(Parser)]
#[command(name = "overdict", version, about = "Overcomplete dictionary learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dictionary, coefficients and samples.
    Gen(Common),
    /// Threshold sample correlations into a graph.
    Graph(Common),
    /// Estimate atoms by clustering the graph.
    Cluster(Common),
    /// Refine the clustered estimate by sparse coding and refitting.
    Recover(Common),
    /// Compare estimates in the output directory against the truth.
    Eval(Common),
    /// Generate, learn and evaluate in one go.
    Run(Common),
    /// Run a grid of experiments.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep axis, e.g. `n=4096,8192`. Repeatable.
        #[arg(long = "grid", value_name = "KEY=V1,V2")]
        grid: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps_dict: Option<f64>,
    #[arg(long)]
    eps_coeff: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_parser = ["bernoulli", "uniform"])]
    value_model: Option<String>,
    #[arg(long, value_parser = ["spherical", "basis-union"])]
    ensemble: Option<String>,
    #[arg(long)]
    pair_edge_fraction: Option<f64>,
    #[arg(long)]
    max_atoms: Option<usize>,
    /// Comma-separated subset of `cluster,postprocess`, or `none`.
    #[arg(long)]
    stages: Option<String>,
    /// Any other config key. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn split_pair(text: &str) -> Result<(String, String), Error> {
    text.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::InvalidParameter(format!("expected KEY=VALUE, got `{text}`")))
}

impl Common {
    /// Config-file entries followed by flag overrides, plus grid axes.
    fn entries(&self) -> Result<(ConfigEntries, ConfigEntries), Error> {
        let (mut entries, grid) = match &self.config {
            Some(path) => read_config_file(path)?,
            None => (Vec::new(), Vec::new()),
        };
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                entries.push((key.to_string(), v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("d", self.d.map(|v| v.to_string()));
        push("r", self.r.map(|v| v.to_string()));
        push("s", self.s.map(|v| v.to_string()));
        push("n", self.n.map(|v| v.to_string()));
        push("rho", self.rho.map(|v| v.to_string()));
        push("eps_dict", self.eps_dict.map(|v| v.to_string()));
        push("eps_coeff", self.eps_coeff.map(|v| v.to_string()));
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("delta", self.delta.map(|v| v.to_string()));
        push("value_model", self.value_model.clone());
        push("ensemble", self.ensemble.clone());
        push("pair_edge_fraction", self.pair_edge_fraction.map(|v| v.to_string()));
        push("max_atoms", self.max_atoms.map(|v| v.to_string()));
        push("stages", self.stages.clone());
        for item in &self.set {
            entries.push(split_pair(item)?);
        }
        Ok((entries, grid))
    }

    fn config(&self) -> Result<ExperimentConfig, Error> {
        let (entries, _) = self.entries()?;
        ExperimentConfig::from_entries(&entries)
    }
}

enum Failure {
    Config(Error),
    Runtime(Error),
    Gate,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn read_dictionary(path: &Path) -> Result<Dictionary, Error> {
    Dictionary::new(io::read_matrix(path)?)
}

fn read_samples(out: &Path) -> Result<SampleSet, Error> {
    Ok(SampleSet::new(io::read_matrix(&out.join("samples.csv"))?))
}

fn gen(config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let a = generate_dictionary(&config.model, config.seed)?;
    let x = generate_coefficients(&config.model, config.n, config.seed)?;
    let y = synthesize(&a, &x)?;
    io::write_matrix(&out.join("dictionary.csv"), a.matrix())?;
    io::write_matrix(&out.join("coefficients.csv"), x.values())?;
    io::write_index_lists(&out.join("supports.csv"), x.supports())?;
    io::write_matrix(&out.join("samples.csv"), y.samples())?;
    let stats = coherence_stats(&a);
    println!(
        "mu0_hat={} mu1_hat={} max_sample_norm={}",
        stats.mu0_hat,
        stats.mu1_hat,
        y.max_sample_norm()
    );
    Ok(())
}

fn graph(config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let samples = read_samples(out)?;
    let rho = match config.rho {
        Some(rho) => rho,
        None => {
            let truth = out.join("dictionary.csv");
            let mu0 = if truth.exists() {
                coherence_stats(&read_dictionary(&truth)?).mu0_hat
            } else {
                config.model.mu0
            };
            default_threshold(&config.model, mu0)?
        }
    };
    let g = build_graph(&samples, rho)?;
    g.write_csv(&out.join("graph.csv"))?;
    println!("rho={rho} nodes={} edges={}", g.node_count(), g.edge_count());
    Ok(())
}

fn cluster(config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let samples = read_samples(out)?;
    let g = CorrelationGraph::read_csv(&out.join("graph.csv"))?;
    let (estimate, stats) = learn_from_graph(&samples, &g, &config.clustering_config())?;
    estimate.write_csv(&out.join("stage1_dictionary.csv"), &out.join("stage1_provenance.csv"))?;
    println!(
        "atoms={} edges_examined={} clusters_tested={} clusters_accepted={} degenerate={}",
        estimate.len(),
        stats.edges_examined,
        stats.clusters_tested,
        stats.clusters_accepted,
        stats.degenerate
    );
    Ok(())
}

fn recover(config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let samples = read_samples(out)?;
    let abar = read_dictionary(&out.join("stage1_dictionary.csv"))?;
    let s = config.model.s;
    let eps_coeff = config.eps_coeff.unwrap_or(s as f64 * config.eps_dict);
    let rec = recover_coeff(&samples, &abar, s, eps_coeff)?;
    io::write_matrix(&out.join("stage2_dictionary.csv"), rec.dictionary.matrix())?;
    io::write_matrix(&out.join("stage2_coefficients.csv"), rec.coefficients.values())?;
    println!(
        "atoms={} eps_coeff={eps_coeff} max_fit_residual={}",
        rec.dictionary.len(),
        rec.max_fit_residual
    );
    Ok(())
}

fn eval(config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let truth = read_dictionary(&out.join("dictionary.csv"))?;
    let stats = coherence_stats(&truth);
    let measured = overdict::model::ModelParams {
        mu1: stats.mu1_hat,
        ..config.model.clone()
    };
    println!("error_bound={}", theoretical_error_bound(&measured, config.alpha));
    let coefficients = out.join("coefficients.csv");
    let x = if coefficients.exists() {
        Some(CoefficientMatrix::from_values(io::read_matrix(&coefficients)?))
    } else {
        None
    };
    for stage in ["stage1", "stage2"] {
        let path = out.join(format!("{stage}_dictionary.csv"));
        if !path.exists() {
            continue;
        }
        let m = match_dictionaries(&truth, &read_dictionary(&path)?)?;
        m.write_csv(&out.join(format!("{stage}_matching.csv")))?;
        println!(
            "{stage}: matched={} eps_a={} mean_error={} unmatched_true={}",
            m.matches.len(),
            m.eps_a,
            m.mean_error,
            m.unmatched_true.len()
        );
        let codes = out.join(format!("{stage}_coefficients.csv"));
        if let (Some(x), true) = (&x, codes.exists()) {
            let xhat = CoefficientMatrix::from_values(io::read_matrix(&codes)?);
            println!("{stage}: exact_coefficients={}", coefficients_agree(&m, x, &xhat));
        }
    }
    let graph = out.join("graph.csv");
    if let (Some(x), true) = (&x, graph.exists()) {
        let report = scan_corr_graph(&CorrelationGraph::read_csv(&graph)?, x)?;
        report.write_csv(&out.join("violations.csv"))?;
        println!(
            "graph: pairs_checked={} violations={}",
            report.pairs_checked,
            report.violations.len()
        );
    }
    Ok(())
}

fn print_row(row: &ReportRow) {
    println!("{}", ReportRow::HEADER);
    println!("{}", row.to_csv());
}

fn execute(command: Command) -> Result<(), Failure> {
    let config_of = |c: &Common| c.config().map_err(Failure::Config);
    match command {
        Command::Gen(c) => gen(&config_of(&c)?, &c.out)?,
        Command::Graph(c) => graph(&config_of(&c)?, &c.out)?,
        Command::Cluster(c) => cluster(&config_of(&c)?, &c.out)?,
        Command::Recover(c) => recover(&config_of(&c)?, &c.out)?,
        Command::Eval(c) => eval(&config_of(&c)?, &c.out)?,
        Command::Run(c) => {
            let mut config = config_of(&c)?;
            config.output_dir = Some(c.out.clone());
            let row = run_experiment(&config);
            print_row(&row);
            if !row.passed() {
                return Err(Failure::Gate);
            }
        }
        Command::Sweep { common, grid } => {
            let (base, mut axes) = common.entries().map_err(Failure::Config)?;
            for item in &grid {
                axes.push(split_pair(item).map_err(Failure::Config)?);
            }
            let mut configs = expand_grid(&base, &axes).map_err(Failure::Config)?;
            for (k, config) in configs.iter_mut().enumerate() {
                config.output_dir = Some(common.out.join(format!("row_{k:03}")));
            }
            let rows = sweep(&configs).map_err(Failure::Config)?;
            write_report(&common.out.join("report.csv"), &rows)?;
            write_timings(&common.out.join("timings.csv"), &rows)?;
            println!("{}", ReportRow::HEADER);
            for row in &rows {
                println!("{}", row.to_csv());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Gate) => ExitCode::from(3),
    }
}
