//! Interference, directional SINR and the two-sided edge rule.
//!
//! Thresholds follow the product schedule `τ_λ(a)·γ_λ(a) = β₀(a) / (2λ)`,
//! which makes `λ[τ_λγ_λ(a) + τ_λγ_λ(b)] = β(a, b) = (β₀(a) + β₀(b)) / 2`
//! hold exactly at every intensity. `γ_λ` is a constant (default 1) and `τ_λ`
//! absorbs the rest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PathLoss;
use crate::pointprocess::MarkedConfiguration;

/// The mark-dependent base constant `β₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseBeta {
    Constant { value: f64 },
    /// Piecewise constant: `values[k]` on `(breaks[k-1], breaks[k]]`, with
    /// `breaks[-1] = 0` and `breaks[len] = ∞`.
    Table { breaks: Vec<f64>, values: Vec<f64> },
}

impl BaseBeta {
    pub fn constant(value: f64) -> Result<Self> {
        let b = BaseBeta::Constant { value };
        b.validate()?;
        Ok(b)
    }

    pub fn table(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let b = BaseBeta::Table { breaks, values };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseBeta::Constant { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return Err(Error::param("beta0", "must be nonnegative and finite"));
                }
            }
            BaseBeta::Table { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::param("beta0", "a table needs one more value than breakpoints"));
                }
                if breaks.iter().any(|b| !(*b > 0.0 && b.is_finite())) || breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::param("beta0", "breakpoints must be positive and increasing"));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::param("beta0", "values must be nonnegative and finite"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, mark: f64) -> f64 {
        match self {
            BaseBeta::Constant { value } => *value,
            BaseBeta::Table { breaks, values } => values[breaks.partition_point(|b| *b < mark)],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BaseBeta::Constant { value } => *value == 0.0,
            BaseBeta::Table { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Mark values where `β₀` jumps.
    pub fn breaks(&self) -> &[f64] {
        match self {
            BaseBeta::Constant { .. } => &[],
            BaseBeta::Table { breaks, .. } => breaks,
        }
    }
}

/// Which transmitters count as interference at a receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceConvention {
    /// Every device other than the receiver, the desired transmitter included.
    #[default]
    IncludeDesired,
    /// Every device other than the receiver and the desired transmitter.
    ExcludeDesired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrParams {
    pub path_loss: PathLoss,
    pub noise: f64,
    pub beta0: BaseBeta,
    /// Constant value of `γ_λ`.
    pub gamma: f64,
    pub convention: InterferenceConvention,
}

impl SinrParams {
    /// Noise-free parameters with `γ_λ ≡ 1` and the desired transmitter counted as interference.
    pub fn new(alpha: f64, beta0: BaseBeta) -> Result<Self> {
        let p = SinrParams {
            path_loss: PathLoss::new(alpha)?,
            noise: 0.0,
            beta0,
            gamma: 1.0,
            convention: InterferenceConvention::IncludeDesired,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.beta0.validate()?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::param("noise", "N0 must be nonnegative and finite"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("gamma", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.path_loss.alpha()
    }

    /// `τ_λ(a)·γ_λ(a) = β₀(a) / (2λ)`.
    pub fn tau_gamma(&self, mark: f64, lambda: f64) -> f64 {
        self.beta0.eval(mark) / (2.0 * lambda)
    }

    pub fn gamma_at(&self, _mark: f64, _lambda: f64) -> f64 {
        self.gamma
    }

    pub fn tau(&self, mark: f64, lambda: f64) -> f64 {
        self.tau_gamma(mark, lambda) / self.gamma
    }

    /// `β(a, b) = (β₀(a) + β₀(b)) / 2`.
    pub fn beta(&self, a: f64, b: f64) -> f64 {
        0.5 * (self.beta0.eval(a) + self.beta0.eval(b))
    }
}

/// Power from transmitter `i` received at `j`.
#[inline]
fn received(config: &MarkedConfiguration, pl: &PathLoss, i: usize, j: usize) -> Result<f64> {
    let r2 = config.dist2(i, j);
    if r2 == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(config.mark(i) * pl.gain_sq(r2))
}

fn check_index(config: &MarkedConfiguration, i: usize) -> Result<()> {
    if i >= config.len() {
        return Err(Error::param("index", format!("{i} out of range for {} points", config.len())));
    }
    Ok(())
}

/// `Σ_{i≠j} σ_i ℓ(|X_i − X_j|)`: total power received at `j`, summed in index order.
pub fn interference_at(config: &MarkedConfiguration, j: usize, path_loss: &PathLoss) -> Result<f64> {
    check_index(config, j)?;
    let mut total = 0.0;
    for i in 0..config.len() {
        if i != j {
            total += received(config, path_loss, i, j)?;
        }
    }
    Ok(total)
}

fn ratio(signal: f64, noise: f64, gamma: f64, interference: f64) -> f64 {
    let den = noise + gamma * interference.max(0.0);
    if den == 0.0 {
        f64::INFINITY
    } else {
        signal / den
    }
}

/// SINR of transmitter `i` at receiver `j`; `+∞` when noise and interference vanish.
pub fn sinr(config: &MarkedConfiguration, i: usize, j: usize, params: &SinrParams) -> Result<f64> {
    check_index(config, i)?;
    check_index(config, j)?;
    if i == j {
        return Err(Error::param("index", "transmitter and receiver must differ"));
    }
    let pl = &params.path_loss;
    let signal = received(config, pl, i, j)?;
    let interference = match params.convention {
        InterferenceConvention::IncludeDesired => interference_at(config, j, pl)?,
        InterferenceConvention::ExcludeDesired => {
            let mut total = 0.0;
            for k in 0..config.len() {
                if k != j && k != i {
                    total += received(config, pl, k, j)?;
                }
            }
            total
        }
    };
    let lambda = config.lambda();
    Ok(ratio(signal, params.noise, params.gamma_at(config.mark(j), lambda), interference))
}

/// Undirected simple graph on the points of a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinrGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl SinrGraph {
    /// Validates and normalizes an edge list to sorted `(i, j)` pairs with `i < j`.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::param("edge", format!("({i}, {j}) references a missing point")));
            }
            if i == j {
                return Err(Error::param("edge", "self-loops are not allowed"));
            }
            out.push((i.min(j), i.max(j)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(SinrGraph { n, edges: out })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.n as f64
        }
    }
}

/// Connects `{i, j}` iff `SINR(i→j) ≥ τ_λ(σ_j)` and `SINR(j→i) ≥ τ_λ(σ_i)`.
///
/// O(n²): the total received power at each receiver is computed once and the
/// desired signal is subtracted when the convention excludes it.
pub fn build_graph(config: &MarkedConfiguration, params: &SinrParams) -> Result<SinrGraph> {
    let n = config.len();
    let pl = &params.path_loss;
    let lambda = config.lambda();
    let totals: Vec<f64> =
        (0..n).into_par_iter().map(|j| interference_at(config, j, pl)).collect::<Result<_>>()?;
    let thresholds: Vec<f64> = config.marks().iter().map(|&m| params.tau(m, lambda)).collect();
    let gammas: Vec<f64> = config.marks().iter().map(|&m| params.gamma_at(m, lambda)).collect();

    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in i + 1..n {
                let sig_ij = received(config, pl, i, j)?;
                let sig_ji = received(config, pl, j, i)?;
                let (int_j, int_i) = match params.convention {
                    InterferenceConvention::IncludeDesired => (totals[j], totals[i]),
                    InterferenceConvention::ExcludeDesired => (totals[j] - sig_ij, totals[i] - sig_ji),
                };
                let forward = ratio(sig_ij, params.noise, gammas[j], int_j) >= thresholds[j];
                if forward && ratio(sig_ji, params.noise, gammas[i], int_i) >= thresholds[i] {
                    row.push(j);
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let edges = rows.into_iter().enumerate().flat_map(|(i, row)| row.into_iter().map(move |j| (i, j))).collect();
    Ok(SinrGraph { n, edges })
}

/// Reference O(n³) construction that recomputes every SINR from scratch.
pub fn build_graph_naive(config: &MarkedConfiguration, params: &SinrParams) -> Result<SinrGraph> {
    let n = config.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if connected(config, i, j, params)? {
                edges.push((i, j));
            }
        }
    }
    SinrGraph::from_edges(n, edges)
}

/// The two-sided edge rule for a single pair, in O(n).
pub fn connected(config: &MarkedConfiguration, i: usize, j: usize, params: &SinrParams) -> Result<bool> {
    let lambda = config.lambda();
    Ok(sinr(config, i, j, params)? >= params.tau(config.mark(j), lambda)
        && sinr(config, j, i, params)? >= params.tau(config.mark(i), lambda))
}
