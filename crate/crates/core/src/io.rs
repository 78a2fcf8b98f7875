//! Run configuration and artifact formats.
//!
//! Configuration files are flat TOML; every key is optional and unknown keys
//! are rejected. Every CSV artifact starts with `#`-comment lines carrying the
//! seed and the digest of the effective configuration, and every JSON artifact
//! carries the same two fields.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::DeviceDomain;
use crate::measures::{BinLayout, BinnedMeasure, BinnedPairMeasure, ProductPartition};
use crate::montecarlo::{
    ExperimentPlan, ExperimentReport, GraphModel, Model, SuiteSettings, TestMarks,
};
use crate::pointprocess::{MarkLaw, MarkedConfiguration, MarkedPoint};
use crate::sinr::{BaseBeta, InterferenceConvention, SinrGraph, SinrParams};
use crate::theory::KernelFrame;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Disk,
    Box,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    Connectivity,
    Aep,
    Wlln,
    Concentration,
    KernelLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMethodKind {
    Quadrature,
    MonteCarlo,
}

/// A single intensity or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambdas {
    One(f64),
    Many(Vec<f64>),
}

impl Lambdas {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Lambdas::One(l) => vec![*l],
            Lambdas::Many(v) => v.clone(),
        }
    }
}

/// The keys of a configuration file, all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: Option<u32>,
    pub domain: Option<DomainKind>,
    pub dim: Option<usize>,
    /// Side of a box or torus, radius of a disk.
    pub size: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<Lambdas>,
    /// Rate of the exponential mark law.
    pub c: Option<f64>,
    pub beta0: Option<f64>,
    pub beta0_breaks: Option<Vec<f64>>,
    pub beta0_values: Option<Vec<f64>>,
    pub noise: Option<f64>,
    pub gamma: Option<f64>,
    pub convention: Option<InterferenceConvention>,
    pub frame: Option<KernelFrame>,
    pub graph: Option<GraphModel>,
    pub seed: Option<u64>,
    /// Spatial cells per axis (rings and sectors on a disk).
    pub n_s: Option<usize>,
    /// Equal-probability mark intervals before the tail.
    pub n_m: Option<usize>,
    pub replicates: Option<u64>,
    pub suite: Option<SuiteKind>,
    pub output_dir: Option<PathBuf>,
    pub entropy_method: Option<EntropyMethodKind>,
    pub mc_samples: Option<u64>,
    pub test_x: Option<Vec<f64>>,
    pub test_y: Option<Vec<f64>>,
    pub test_sx: Option<f64>,
    pub test_sy: Option<f64>,
    pub epsilon_l1: Option<f64>,
    pub epsilon_l2: Option<f64>,
    pub refinement: Option<usize>,
    pub max_clamp_fraction: Option<f64>,
    pub omega_file: Option<PathBuf>,
    pub pi_file: Option<PathBuf>,
    pub rate_bound: Option<f64>,
    pub rate_tol: Option<f64>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// `self` with every key set in `top` replaced by its value there.
    pub fn overlay(mut self, top: ConfigFile) -> Self {
        overlay_fields!(self, top; schema_version, domain, dim, size, alpha, lambda, c, beta0, beta0_breaks,
            beta0_values, noise, gamma, convention, frame, graph, seed, n_s, n_m, replicates, suite, output_dir,
            entropy_method, mc_samples, test_x, test_y, test_sx, test_sy, epsilon_l1, epsilon_l2, refinement,
            max_clamp_fraction, omega_file, pi_file, rate_bound, rate_tol);
        self
    }
}

/// A fully resolved configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub domain: DomainKind,
    pub dim: usize,
    pub size: f64,
    pub alpha: f64,
    pub lambda: Vec<f64>,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0_breaks: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0_values: Option<Vec<f64>>,
    pub noise: f64,
    pub gamma: f64,
    pub convention: InterferenceConvention,
    pub frame: KernelFrame,
    pub graph: GraphModel,
    pub seed: u64,
    pub n_s: usize,
    pub n_m: usize,
    pub replicates: u64,
    pub suite: SuiteKind,
    pub output_dir: PathBuf,
    pub entropy_method: EntropyMethodKind,
    pub mc_samples: u64,
    pub test_x: Vec<f64>,
    pub test_y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_sx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_sy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_l2: Option<f64>,
    pub refinement: usize,
    pub max_clamp_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi_file: Option<PathBuf>,
    pub rate_bound: f64,
    pub rate_tol: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// Fills defaults and checks every constraint that does not depend on the subcommand.
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let schema_version = file.schema_version.unwrap_or(SCHEMA_VERSION);
        if schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unrecognized schema_version {schema_version}; expected {SCHEMA_VERSION}")));
        }
        let domain = file.domain.unwrap_or(DomainKind::Disk);
        let dim = file.dim.unwrap_or(2);
        let size = file.size.unwrap_or(match domain {
            DomainKind::Disk => std::f64::consts::PI.sqrt().recip(),
            _ => 1.0,
        });
        let table = file.beta0_values.is_some() || file.beta0_breaks.is_some();
        if table && file.beta0.is_some() {
            return Err(Error::Config("set either beta0 or beta0_breaks/beta0_values, not both".into()));
        }
        let cfg = RunConfig {
            schema_version,
            domain,
            dim,
            size,
            alpha: file.alpha.unwrap_or(1.0),
            lambda: file.lambda.map(|l| l.to_vec()).unwrap_or_else(|| vec![100.0]),
            c: file.c.unwrap_or(1.0),
            beta0: if table { None } else { Some(file.beta0.unwrap_or(1.0)) },
            beta0_breaks: if table { Some(file.beta0_breaks.unwrap_or_default()) } else { None },
            beta0_values: if table { Some(file.beta0_values.unwrap_or_default()) } else { None },
            noise: file.noise.unwrap_or(0.0),
            gamma: file.gamma.unwrap_or(1.0),
            convention: file.convention.unwrap_or_default(),
            frame: file.frame.unwrap_or_default(),
            graph: file.graph.unwrap_or_default(),
            seed: file.seed.unwrap_or(0),
            n_s: file.n_s.unwrap_or(4),
            n_m: file.n_m.unwrap_or(3),
            replicates: file.replicates.unwrap_or(100),
            suite: file.suite.unwrap_or(SuiteKind::Aep),
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            entropy_method: file.entropy_method.unwrap_or(EntropyMethodKind::Quadrature),
            mc_samples: file.mc_samples.unwrap_or(1_000_000),
            test_x: file.test_x.unwrap_or_else(|| vec![-0.15, 0.0]),
            test_y: file.test_y.unwrap_or_else(|| vec![0.15, 0.0]),
            test_sx: file.test_sx,
            test_sy: file.test_sy,
            epsilon_l1: file.epsilon_l1,
            epsilon_l2: file.epsilon_l2,
            refinement: file.refinement.unwrap_or(16),
            max_clamp_fraction: file.max_clamp_fraction.unwrap_or(1e-3),
            omega_file: file.omega_file,
            pi_file: file.pi_file,
            rate_bound: file.rate_bound.unwrap_or(1.0),
            rate_tol: file.rate_tol.unwrap_or(1e-9),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        positive("size", self.size)?;
        positive("alpha", self.alpha)?;
        positive("c", self.c)?;
        positive("gamma", self.gamma)?;
        positive("rate_bound", self.rate_bound)?;
        positive("rate_tol", self.rate_tol)?;
        if self.lambda.is_empty() {
            return Err(Error::param("lambda", "need at least one value"));
        }
        for l in &self.lambda {
            positive("lambda", *l)?;
        }
        if self.lambda.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("lambda", "values must be strictly increasing"));
        }
        if self.domain == DomainKind::Disk && self.dim != 2 {
            return Err(Error::param("dim", "a disk domain is two-dimensional"));
        }
        if self.replicates == 0 {
            return Err(Error::param("replicates", "must be at least 1"));
        }
        if self.n_s == 0 {
            return Err(Error::param("n_s", "must be at least 1"));
        }
        if self.test_sx.is_some() != self.test_sy.is_some() {
            return Err(Error::Config("set both test_sx and test_sy or neither".into()));
        }
        self.domain()?;
        self.sinr()?;
        Ok(())
    }

    /// Checks `α < d`, needed by every kernel-based computation.
    pub fn require_integrable(&self) -> Result<()> {
        if self.alpha >= self.dim as f64 {
            return Err(Error::param(
                "alpha",
                format!("alpha < d is required for the kernel (alpha = {}, d = {})", self.alpha, self.dim),
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DeviceDomain> {
        match self.domain {
            DomainKind::Disk => DeviceDomain::disk(self.size),
            DomainKind::Box => DeviceDomain::cube(self.dim, self.size),
            DomainKind::Torus => DeviceDomain::torus(self.dim, self.size),
        }
    }

    pub fn base_beta(&self) -> Result<BaseBeta> {
        match (&self.beta0, &self.beta0_breaks, &self.beta0_values) {
            (Some(v), _, _) => BaseBeta::constant(*v),
            (None, Some(b), Some(v)) => BaseBeta::table(b.clone(), v.clone()),
            _ => Err(Error::Config("incomplete beta0 table".into())),
        }
    }

    pub fn sinr(&self) -> Result<SinrParams> {
        let mut p = SinrParams::new(self.alpha, self.base_beta()?)?;
        p.noise = self.noise;
        p.gamma = self.gamma;
        p.convention = self.convention;
        p.validate()?;
        Ok(p)
    }

    pub fn law(&self) -> Result<MarkLaw> {
        MarkLaw::exponential(self.c)
    }

    pub fn model(&self) -> Result<Model> {
        let mut m = Model::new(self.domain()?, self.sinr()?, self.law()?);
        m.frame = self.frame;
        Ok(m)
    }

    /// The product partition with `n_s` cells per axis and `n_m + 1` mark intervals.
    pub fn partition(&self) -> Result<ProductPartition> {
        let domain = self.domain()?;
        let grid = ProductPartition::regular_grid(&domain, self.n_s);
        ProductPartition::equal_probability(domain, grid, self.n_m, None, &self.law()?)
    }

    pub fn entropy_method(&self) -> crate::theory::EntropyMethod {
        match self.entropy_method {
            EntropyMethodKind::Quadrature => crate::theory::EntropyMethod::Quadrature,
            EntropyMethodKind::MonteCarlo => {
                crate::theory::EntropyMethod::MonteCarlo { samples: self.mc_samples, seed: self.seed }
            }
        }
    }

    pub fn suite_settings(&self, suite: SuiteKind) -> Result<SuiteSettings> {
        Ok(match suite {
            SuiteKind::Connectivity => SuiteSettings::Connectivity {
                x: self.test_x.clone(),
                y: self.test_y.clone(),
                marks: match (self.test_sx, self.test_sy) {
                    (Some(x), Some(y)) => TestMarks::Fixed { x, y },
                    _ => TestMarks::Random,
                },
            },
            SuiteKind::Aep => SuiteSettings::Aep {
                graph: self.graph,
                entropy_mc_samples: match self.entropy_method {
                    EntropyMethodKind::MonteCarlo => Some(self.mc_samples),
                    EntropyMethodKind::Quadrature => None,
                },
                max_clamp_fraction: self.max_clamp_fraction,
            },
            SuiteKind::Wlln => SuiteSettings::Wlln {
                grid: ProductPartition::regular_grid(&self.domain()?, self.n_s),
                mark_bins: self.n_m + 1,
                epsilon: match (self.epsilon_l1, self.epsilon_l2) {
                    (Some(a), Some(b)) => Some([a, b]),
                    (None, None) => None,
                    _ => return Err(Error::Config("set both epsilon_l1 and epsilon_l2 or neither".into())),
                },
                refinement: self.refinement,
                graph: self.graph,
            },
            SuiteKind::Concentration => SuiteSettings::Concentration,
            SuiteKind::KernelLimit => SuiteSettings::kernel_limit_default(),
        })
    }

    pub fn plan(&self, suite: SuiteKind) -> Result<ExperimentPlan> {
        if suite != SuiteKind::Concentration {
            self.require_integrable()?;
        }
        let plan = ExperimentPlan {
            model: self.model()?,
            lambdas: self.lambda.clone(),
            replicates: self.replicates,
            seed: self.seed,
            settings: self.suite_settings(suite)?,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// The effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of [`RunConfig::to_toml`] with `output_dir` blanked, hex
    /// encoded, so the same run written to two places carries one digest.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn meta(&self) -> Meta {
        Meta { seed: self.seed, config_digest: self.digest() }
    }
}

/// Provenance embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub seed: u64,
    pub config_digest: String,
}

fn write_meta<W: Write>(w: &mut W, meta: &Meta) -> Result<()> {
    writeln!(w, "# seed={}", meta.seed)?;
    writeln!(w, "# config_digest={}", meta.config_digest)?;
    Ok(())
}

/// Shortest text that parses back to the same `f64`.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn csv_writer<W: Write>(mut w: W, meta: &Meta) -> Result<csv::Writer<W>> {
    write_meta(&mut w, meta)?;
    Ok(csv::WriterBuilder::new().from_writer(w))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r)
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Malformed(format!("{what}: `{field}` is not a number")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field.trim().parse().map_err(|_| Error::Malformed(format!("{what}: `{field}` is not an index")))
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[String]) -> Result<()> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != expected {
        return Err(Error::Malformed(format!("expected header {expected:?}, found {header:?}")));
    }
    Ok(())
}

fn configuration_header(dim: usize) -> Vec<String> {
    let mut h = vec!["idx".to_string()];
    h.extend((1..=dim).map(|k| format!("x{k}")));
    h.push("mark".into());
    h
}

/// `idx,x1,...,xd,mark`.
pub fn write_configuration<W: Write>(w: W, config: &MarkedConfiguration, meta: &Meta) -> Result<()> {
    let mut wtr = csv_writer(w, meta)?;
    wtr.write_record(configuration_header(config.dim()))?;
    for i in 0..config.len() {
        let mut rec = vec![i.to_string()];
        rec.extend(config.position(i).iter().map(|x| fmt(*x)));
        rec.push(fmt(config.mark(i)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_configuration<R: Read>(r: R, domain: &DeviceDomain, lambda: f64) -> Result<MarkedConfiguration> {
    let dim = domain.dim();
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &configuration_header(dim))?;
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if parse_usize(&rec[0], "idx")? != row {
            return Err(Error::Malformed(format!("row {row}: idx out of sequence")));
        }
        let position = (1..=dim).map(|k| parse_f64(&rec[k], "coordinate")).collect::<Result<_>>()?;
        points.push(MarkedPoint { position, mark: parse_f64(&rec[dim + 1], "mark")? });
    }
    MarkedConfiguration::from_points(domain.clone(), lambda, &points)
}

/// `i,j` with `i < j`.
pub fn write_edges<W: Write>(w: W, graph: &SinrGraph, meta: &Meta) -> Result<()> {
    let mut wtr = csv_writer(w, meta)?;
    wtr.write_record(["i", "j"])?;
    for (i, j) in graph.edges() {
        wtr.write_record([i.to_string(), j.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_edges<R: Read>(r: R, n: usize) -> Result<SinrGraph> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &["i".to_string(), "j".to_string()])?;
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        edges.push((parse_usize(&rec[0], "i")?, parse_usize(&rec[1], "j")?));
    }
    SinrGraph::from_edges(n, edges)
}

fn measure_header() -> Vec<String> {
    ["bin_id", "spatial_cell", "mark_interval", "mass"].iter().map(|s| s.to_string()).collect()
}

/// `bin_id,spatial_cell,mark_interval,mass`; the middle columns are blank
/// unless the layout is a product partition.
pub fn write_measure<W: Write>(w: W, measure: &BinnedMeasure, meta: &Meta) -> Result<()> {
    use crate::measures::Binned;
    let mut wtr = csv_writer(w, meta)?;
    wtr.write_record(measure_header())?;
    let partition = measure.layout().partition();
    for (b, m) in measure.masses().iter().enumerate() {
        let (cell, interval) = match partition {
            Some(p) => {
                let (c, k) = p.split(b);
                (c.to_string(), k.to_string())
            }
            None => (String::new(), String::new()),
        };
        wtr.write_record([b.to_string(), cell, interval, fmt(*m)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_measure<R: Read>(r: R, layout: &Arc<BinLayout>) -> Result<BinnedMeasure> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &measure_header())?;
    let partition = layout.partition();
    let mut masses = Vec::with_capacity(layout.len());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if parse_usize(&rec[0], "bin_id")? != row {
            return Err(Error::Malformed(format!("row {row}: bin_id out of sequence")));
        }
        if let Some(p) = partition {
            if row < p.n_bins() {
                let (c, k) = p.split(row);
                if parse_usize(&rec[1], "spatial_cell")? != c || parse_usize(&rec[2], "mark_interval")? != k {
                    return Err(Error::Malformed(format!("row {row}: cell and interval disagree with the partition")));
                }
            }
        }
        masses.push(parse_f64(&rec[3], "mass")?);
    }
    BinnedMeasure::new(layout.clone(), masses)
}

/// `bin_i,bin_j,mass` over the upper triangle `bin_i ≤ bin_j`.
pub fn write_pair_measure<W: Write>(w: W, measure: &BinnedPairMeasure, meta: &Meta) -> Result<()> {
    let mut wtr = csv_writer(w, meta)?;
    wtr.write_record(["bin_i", "bin_j", "mass"])?;
    let n = measure.n_bins();
    for a in 0..n {
        for b in a..n {
            wtr.write_record([a.to_string(), b.to_string(), fmt(measure.get(a, b))])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an upper-triangle pair measure; missing entries are zero.
pub fn read_pair_measure<R: Read>(r: R, layout: &Arc<BinLayout>) -> Result<BinnedPairMeasure> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &["bin_i".to_string(), "bin_j".to_string(), "mass".to_string()])?;
    let n = layout.len();
    let mut masses = vec![0.0; n * n];
    let mut seen = vec![false; n * n];
    for rec in rdr.records() {
        let rec = rec?;
        let (a, b) = (parse_usize(&rec[0], "bin_i")?, parse_usize(&rec[1], "bin_j")?);
        if a > b || b >= n {
            return Err(Error::Malformed(format!("pair ({a}, {b}) is not in the upper triangle of {n} bins")));
        }
        if std::mem::replace(&mut seen[a * n + b], true) {
            return Err(Error::Malformed(format!("pair ({a}, {b}) appears twice")));
        }
        let m = parse_f64(&rec[2], "mass")?;
        masses[a * n + b] = m;
        masses[b * n + a] = m;
    }
    BinnedPairMeasure::new(layout.clone(), masses)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// `lambda,label,estimate,se,theory,z`.
pub fn write_report_csv<W: Write>(w: W, report: &ExperimentReport, meta: &Meta) -> Result<()> {
    let mut wtr = csv_writer(w, meta)?;
    wtr.write_record(["lambda", "label", "estimate", "se", "theory", "z"])?;
    for r in &report.rows {
        wtr.write_record([fmt(r.lambda), r.label.clone(), fmt(r.estimate), fmt(r.se), fmt(r.theory), opt(r.z)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `lambda,mean,se,H,gap` from an AEP report.
pub fn write_aep_csv<W: Write>(w: W, report: &ExperimentReport, meta: &Meta) -> Result<()> {
    let mut wtr = csv_writer(w, meta)?;
    wtr.write_record(["lambda", "mean", "se", "H", "gap"])?;
    for r in report.rows_labeled("statistic") {
        let gap = r.extra.get("gap").copied().unwrap_or((r.estimate - r.theory).abs());
        wtr.write_record([fmt(r.lambda), fmt(r.estimate), fmt(r.se), fmt(r.theory), fmt(gap)])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    seed: u64,
    config_digest: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON of `body` with the seed and digest added, newline terminated.
pub fn write_json<W: Write, T: Serialize>(mut w: W, body: &T, meta: &Meta) -> Result<()> {
    let wrapped = WithMeta { seed: meta.seed, config_digest: &meta.config_digest, body };
    serde_json::to_writer_pretty(&mut w, &wrapped)?;
    writeln!(w)?;
    Ok(())
}

/// Output of a single analytic evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatorReport {
    pub inputs_digest: String,
    pub value: f64,
    pub error_estimate: f64,
    pub method: String,
    pub clamp_count: u64,
}

/// SHA-256 over a sequence of byte strings, each length-prefixed.
pub fn inputs_digest<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    #[serde(rename = "H_nats")]
    pub h_nats: f64,
    #[serde(rename = "H_bits")]
    pub h_bits: f64,
    pub method: String,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub n: usize,
    #[serde(rename = "|E|")]
    pub edges: usize,
    pub mean_degree: f64,
}

impl GraphSummary {
    pub fn of(graph: &SinrGraph) -> Self {
        GraphSummary { n: graph.node_count(), edges: graph.edge_count(), mean_degree: graph.mean_degree() }
    }
}
