//! Command-line front end: each subcommand resolves the run configuration,
//! delegates to the library and writes CSV/JSON artifacts to the output
//! directory.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use sinrgraph::io::{
    self, ConfigFile, DomainKind, EntropyMethodKind, EntropyReport, EvaluatorReport, GraphSummary, Lambdas, Meta,
    RunConfig, SuiteKind,
};
use sinrgraph::measures::{reference_measure, BinLayout};
use sinrgraph::montecarlo::{simulate, ExperimentReport, GraphModel};
use sinrgraph::pointprocess::SeedRecord;
use sinrgraph::sinr::InterferenceConvention;
use sinrgraph::theory::{kullback_action, rate_i1, rate_joint, shannon_entropy, KernelFrame, RateValue};
use sinrgraph::{Error, Result};

/// Environment variable that overrides the output directory of a config file.
const OUT_DIR_ENV: &str = "SINRG_OUT_DIR";

#[derive(Parser)]
#[command(name = "sinrgraph", version, about = "Marked SINR random graphs: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one configuration and its graph
    Simulate(Flags),
    /// Compare edge frequencies with the connection probability
    VerifyConnectivity(Flags),
    /// Shannon entropy H(Q×Q) of the limiting kernel
    Entropy(Flags),
    /// Likelihood statistic against the entropy over a λ sweep
    Aep(Flags),
    /// Deviation of the empirical measures from their limits
    Wlln(Flags),
    /// Point counts against the Poisson and Bennett tails
    Concentration(Flags),
    /// Rate functions of measures read from CSV
    Rate(Flags),
    /// Run the suite named by `suite`
    Sweep(Flags),
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Flags mirror the configuration keys; a flag overrides the file.
#[derive(Args)]
struct Flags {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// disk | box | torus
    #[arg(long, value_parser = serde_enum::<DomainKind>)]
    domain: Option<DomainKind>,
    #[arg(long)]
    dim: Option<usize>,
    /// Side of a box or torus, radius of a disk
    #[arg(long)]
    size: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// One intensity or a comma-separated increasing list
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    lambda: Option<Vec<f64>>,
    /// Rate of the exponential mark law
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    beta0_breaks: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    beta0_values: Option<Vec<f64>>,
    /// Background noise N0
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// include-desired | exclude-desired
    #[arg(long, value_parser = serde_enum::<InterferenceConvention>)]
    convention: Option<InterferenceConvention>,
    /// origin | receiver
    #[arg(long, value_parser = serde_enum::<KernelFrame>)]
    frame: Option<KernelFrame>,
    /// sinr | kernel
    #[arg(long, value_parser = serde_enum::<GraphModel>)]
    graph: Option<GraphModel>,
    #[arg(long)]
    seed: Option<u64>,
    /// Spatial cells per axis
    #[arg(long)]
    n_s: Option<usize>,
    /// Bounded mark intervals
    #[arg(long)]
    n_m: Option<usize>,
    #[arg(long)]
    replicates: Option<u64>,
    /// connectivity | aep | wlln | concentration | kernel-limit
    #[arg(long, value_parser = serde_enum::<SuiteKind>)]
    suite: Option<SuiteKind>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// quadrature | monte-carlo
    #[arg(long, value_parser = serde_enum::<EntropyMethodKind>)]
    entropy_method: Option<EntropyMethodKind>,
    #[arg(long)]
    mc_samples: Option<u64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    test_x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    test_y: Option<Vec<f64>>,
    #[arg(long)]
    test_sx: Option<f64>,
    #[arg(long)]
    test_sy: Option<f64>,
    #[arg(long)]
    epsilon_l1: Option<f64>,
    #[arg(long)]
    epsilon_l2: Option<f64>,
    #[arg(long)]
    refinement: Option<usize>,
    #[arg(long)]
    max_clamp_fraction: Option<f64>,
    #[arg(long)]
    omega_file: Option<PathBuf>,
    #[arg(long)]
    pi_file: Option<PathBuf>,
    #[arg(long)]
    rate_bound: Option<f64>,
    #[arg(long)]
    rate_tol: Option<f64>,
}

impl Flags {
    fn into_layer(self) -> (Option<PathBuf>, ConfigFile) {
        let lambda = self.lambda.map(|v| if v.len() == 1 { Lambdas::One(v[0]) } else { Lambdas::Many(v) });
        let layer = ConfigFile {
            schema_version: None,
            domain: self.domain,
            dim: self.dim,
            size: self.size,
            alpha: self.alpha,
            lambda,
            c: self.c,
            beta0: self.beta0,
            beta0_breaks: self.beta0_breaks,
            beta0_values: self.beta0_values,
            noise: self.noise,
            gamma: self.gamma,
            convention: self.convention,
            frame: self.frame,
            graph: self.graph,
            seed: self.seed,
            n_s: self.n_s,
            n_m: self.n_m,
            replicates: self.replicates,
            suite: self.suite,
            output_dir: self.output_dir,
            entropy_method: self.entropy_method,
            mc_samples: self.mc_samples,
            test_x: self.test_x,
            test_y: self.test_y,
            test_sx: self.test_sx,
            test_sy: self.test_sy,
            epsilon_l1: self.epsilon_l1,
            epsilon_l2: self.epsilon_l2,
            refinement: self.refinement,
            max_clamp_fraction: self.max_clamp_fraction,
            omega_file: self.omega_file,
            pi_file: self.pi_file,
            rate_bound: self.rate_bound,
            rate_tol: self.rate_tol,
        };
        (self.config, layer)
    }

    /// File, then the environment's output directory, then flags.
    fn resolve(self) -> Result<RunConfig> {
        let (path, flags) = self.into_layer();
        let mut merged = match path {
            Some(p) => ConfigFile::load(&p)?,
            None => ConfigFile::default(),
        };
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            merged.output_dir = Some(PathBuf::from(dir));
        }
        RunConfig::resolve(merged.overlay(flags))
    }
}

struct Output {
    dir: PathBuf,
    meta: Meta,
}

impl Output {
    fn create(cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output_dir)?;
        let out = Output { dir: cfg.output_dir.clone(), meta: cfg.meta() };
        fs::write(out.dir.join("effective_config.toml"), cfg.to_toml())?;
        Ok(out)
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn report(&self, report: &ExperimentReport) -> Result<()> {
        io::write_report_csv(self.file("report.csv")?, report, &self.meta)?;
        io::write_json(self.file("report.json")?, report, &self.meta)?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        for v in &report.verdicts {
            println!("{}: {} {}", v.name, if v.passed { "PASS" } else { "FAIL" }, v.detail);
        }
        Ok(())
    }
}

fn single_lambda(cfg: &RunConfig) -> Result<f64> {
    match cfg.lambda.as_slice() {
        [l] => Ok(*l),
        _ => Err(Error::Config("this subcommand takes a single lambda".into())),
    }
}

fn run_suite(cfg: &RunConfig, suite: SuiteKind) -> Result<(ExperimentReport, Output)> {
    let plan = cfg.plan(suite)?;
    let out = Output::create(cfg)?;
    let report = plan.run()?;
    out.report(&report)?;
    Ok((report, out))
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let lambda = single_lambda(cfg)?;
    if cfg.graph == GraphModel::Kernel {
        cfg.require_integrable()?;
    }
    let model = cfg.model()?;
    let out = Output::create(cfg)?;
    let (config, graph) = simulate(&model, lambda, cfg.graph, SeedRecord::new(cfg.seed, 0))?;
    io::write_configuration(out.file("configuration.csv")?, &config, &out.meta)?;
    io::write_edges(out.file("edges.csv")?, &graph, &out.meta)?;
    let summary = GraphSummary::of(&graph);
    io::write_json(out.file("summary.json")?, &summary, &out.meta)?;
    println!("n = {}, |E| = {}, mean degree = {:.4}", summary.n, summary.edges, summary.mean_degree);
    Ok(())
}

fn cmd_entropy(cfg: &RunConfig) -> Result<()> {
    cfg.require_integrable()?;
    let lambda = cfg.lambda[0];
    let params = cfg.model()?.kernel(lambda)?;
    let out = Output::create(cfg)?;
    let est = shannon_entropy(&params, cfg.entropy_method())?;
    let report = EntropyReport {
        h_nats: est.value,
        h_bits: est.bits(),
        method: est.method.name().to_string(),
        error_estimate: est.error,
    };
    io::write_json(out.file("entropy.json")?, &report, &out.meta)?;
    println!("H = {:.10} nats = {:.10} bits (error {:.1e})", report.h_nats, report.h_bits, report.error_estimate);
    Ok(())
}

fn cmd_aep(cfg: &RunConfig) -> Result<()> {
    let (report, out) = run_suite(cfg, SuiteKind::Aep)?;
    io::write_aep_csv(out.file("aep.csv")?, &report, &out.meta)
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Config(format!("`{key}` is required")))
}

fn evaluation(inputs: &str, value: RateValue, method: &str) -> EvaluatorReport {
    EvaluatorReport {
        inputs_digest: inputs.to_string(),
        value: if value.finite { value.value } else { f64::INFINITY },
        error_estimate: 0.0,
        method: method.to_string(),
        clamp_count: 0,
    }
}

fn cmd_rate(cfg: &RunConfig) -> Result<()> {
    cfg.require_integrable()?;
    let omega_path = required(&cfg.omega_file, "omega_file")?;
    let params = cfg.model()?.kernel(cfg.lambda[0])?;
    let layout = Arc::new(BinLayout::Product(cfg.partition()?));
    let omega_bytes = fs::read(omega_path)?;
    let omega = io::read_measure(omega_bytes.as_slice(), &layout)?;
    let digest = cfg.digest();
    let mut results = BTreeMap::new();

    let reference = reference_measure(&layout, params.law())?;
    let inputs = io::inputs_digest([digest.as_bytes(), &omega_bytes]);
    results.insert("rate_i1", evaluation(&inputs, rate_i1(&omega, &reference)?, "relative-entropy"));

    if let Some(pi_path) = &cfg.pi_file {
        let pi_bytes = fs::read(pi_path)?;
        let pi = io::read_pair_measure(pi_bytes.as_slice(), &layout)?;
        let inputs = io::inputs_digest([digest.as_bytes(), &omega_bytes, &pi_bytes]);
        let joint = rate_joint(&omega, &pi, &params, cfg.rate_tol)?;
        results.insert("rate_joint", evaluation(&inputs, joint, "binned"));
        let action = kullback_action(&omega, &pi, cfg.rate_bound, &params)?;
        results.insert("kullback_action", evaluation(&inputs, RateValue::finite(action), "l1-bound"));
    }
    let out = Output::create(cfg)?;
    io::write_json(out.file("rate.json")?, &results, &out.meta)?;
    for (name, r) in &results {
        println!("{name} = {}", r.value);
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(f) => cmd_simulate(&f.resolve()?),
        Command::VerifyConnectivity(f) => run_suite(&f.resolve()?, SuiteKind::Connectivity).map(drop),
        Command::Entropy(f) => cmd_entropy(&f.resolve()?),
        Command::Aep(f) => cmd_aep(&f.resolve()?),
        Command::Wlln(f) => run_suite(&f.resolve()?, SuiteKind::Wlln).map(drop),
        Command::Concentration(f) => run_suite(&f.resolve()?, SuiteKind::Concentration).map(drop),
        Command::Rate(f) => cmd_rate(&f.resolve()?),
        Command::Sweep(f) => {
            let cfg = f.resolve()?;
            run_suite(&cfg, cfg.suite).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
