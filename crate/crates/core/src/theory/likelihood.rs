//! The graph log-likelihood functional `−(1/λ²) log P_λ(X)`, split into its
//! edge, non-edge, density and diagonal terms.
//!
//! Pairs are counted in both orders, matching the pair-measure expansion, so
//! the edge plus non-edge terms equal `(2/λ²)` times the negative
//! log-probability of the graph given the marked points.

use rayon::prelude::*;
use serde::Serialize;

use super::{KernelEvaluator, KernelParams};
use crate::error::{Error, Result};
use crate::pointprocess::MarkedConfiguration;
use crate::sinr::SinrGraph;

/// Probabilities inside logarithms are clamped to `[CLAMP_LOW, CLAMP_HIGH]`.
pub const CLAMP_LOW: f64 = 1e-300;
pub const CLAMP_HIGH: f64 = 1.0 - 1e-15;

const MAX_NEG_LOG_P: f64 = 690.775_527_898_213_7; // −ln 1e−300
const MIN_COMPLEMENT: f64 = 1e-15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LikelihoodTerms {
    /// `⟨−log(p/(1−p)), L₂⟩`.
    pub edge: f64,
    /// `⟨−log(1−p), L₁⊗L₁⟩` over distinct points.
    pub non_edge: f64,
    /// `(1/λ)⟨−log(λ m ⊗ Q), L₁⟩`.
    pub density: f64,
    /// `⟨−log(1−p), L_Δ⟩`, where every factor is clamped since `p(x, x) = 1`.
    pub diagonal: f64,
    /// Off-diagonal pairs whose probability was clamped.
    pub clamp_count: u64,
    pub diagonal_clamp_count: u64,
}

impl LikelihoodTerms {
    /// Edge plus non-edge terms, the quantity that converges to `H(Q×Q)`.
    pub fn statistic(&self) -> f64 {
        self.edge + self.non_edge
    }

    pub fn total(&self) -> f64 {
        self.edge + self.non_edge + self.density + self.diagonal
    }
}

/// `(−ln p, −ln(1 − p), clamped)` for `p = exp(−exponent)`.
fn neg_logs(exponent: f64) -> (f64, f64, bool) {
    let mut clamped = false;
    let mut nlp = exponent;
    if nlp > MAX_NEG_LOG_P {
        nlp = MAX_NEG_LOG_P;
        clamped = true;
    }
    let mut comp = -(-exponent).exp_m1();
    if comp < MIN_COMPLEMENT {
        comp = MIN_COMPLEMENT;
        clamped = true;
    }
    (nlp, -comp.ln(), clamped)
}

fn check_inputs(config: &MarkedConfiguration, graph: &SinrGraph, params: &KernelParams) -> Result<()> {
    if config.lambda() != params.lambda() {
        return Err(Error::param("lambda", "configuration and kernel intensities differ"));
    }
    if config.domain() != params.domain() {
        return Err(Error::param("domain", "configuration and kernel domains differ"));
    }
    if graph.node_count() != config.len() {
        return Err(Error::DimensionMismatch { expected: config.len(), found: graph.node_count() });
    }
    if params.sinr().noise != 0.0 {
        return Err(Error::param("noise", "the likelihood uses the noise-free edge probability"));
    }
    Ok(())
}

/// Evaluates `−(1/λ²) log P_λ` term by term.
pub fn log_likelihood_rate(
    config: &MarkedConfiguration,
    graph: &SinrGraph,
    kernel: &KernelEvaluator,
) -> Result<LikelihoodTerms> {
    let params = kernel.params();
    check_inputs(config, graph, params)?;
    let n = config.len();
    let lambda = params.lambda();

    let rows: Vec<(f64, f64, u64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut edge, mut all, mut clamps) = (0.0, 0.0, 0u64);
            for j in i + 1..n {
                let e = kernel.exponent(config.position(i), config.mark(i), config.position(j), config.mark(j))?;
                let (nlp, nlq, clamped) = neg_logs(e);
                if clamped {
                    clamps += 1;
                }
                if graph.has_edge(i, j) {
                    edge += nlp - nlq;
                }
                all += nlq;
            }
            Ok((edge, all, clamps))
        })
        .collect::<Result<_>>()?;

    let scale = 2.0 / (lambda * lambda);
    let mut terms = LikelihoodTerms::default();
    for (edge, all, clamps) in rows {
        terms.edge += edge;
        terms.non_edge += all;
        terms.clamp_count += clamps;
    }
    terms.edge *= scale;
    terms.non_edge *= scale;

    let law = params.law();
    let intensity = lambda / params.domain().volume();
    let density: f64 = config.marks().iter().map(|&s| -(intensity * law.density(s)).ln()).sum();
    terms.density = density / (lambda * lambda);
    terms.diagonal = n as f64 * -MIN_COMPLEMENT.ln() / (lambda * lambda);
    terms.diagonal_clamp_count = n as u64;
    Ok(terms)
}

/// `Π_{edges} p · Π_{non-edges} (1 − p)` over unordered pairs of distinct points.
pub fn conditional_graph_likelihood(
    config: &MarkedConfiguration,
    graph: &SinrGraph,
    kernel: &KernelEvaluator,
) -> Result<f64> {
    check_inputs(config, graph, kernel.params())?;
    let mut prob = 1.0;
    for i in 0..config.len() {
        for j in i + 1..config.len() {
            let e = kernel.exponent(config.position(i), config.mark(i), config.position(j), config.mark(j))?;
            prob *= if graph.has_edge(i, j) { (-e).exp() } else { -(-e).exp_m1() };
        }
    }
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DeviceDomain;
    use crate::pointprocess::{MarkLaw, MarkedPoint};
    use crate::sinr::{BaseBeta, SinrParams};

    fn kernel(lambda: f64) -> KernelEvaluator {
        let p = KernelParams::new(
            DeviceDomain::unit_area_disk(),
            SinrParams::new(1.0, BaseBeta::constant(1.0).unwrap()).unwrap(),
            MarkLaw::exponential(1.0).unwrap(),
            lambda,
        )
        .unwrap();
        KernelEvaluator::new(&p).unwrap()
    }

    fn three_points(lambda: f64) -> MarkedConfiguration {
        let pts = [
            MarkedPoint { position: vec![0.1, 0.2], mark: 0.5 },
            MarkedPoint { position: vec![-0.3, 0.1], mark: 1.5 },
            MarkedPoint { position: vec![0.2, -0.35], mark: 0.9 },
        ];
        MarkedConfiguration::from_points(DeviceDomain::unit_area_disk(), lambda, &pts).unwrap()
    }

    #[test]
    fn empty_configuration_has_zero_terms() {
        let cfg = MarkedConfiguration::empty(DeviceDomain::unit_area_disk(), 5.0).unwrap();
        let t = log_likelihood_rate(&cfg, &SinrGraph::from_edges(0, []).unwrap(), &kernel(5.0)).unwrap();
        assert_eq!(t.statistic(), 0.0);
        assert_eq!(t.total(), 0.0);
    }

    #[test]
    fn three_point_graphs_normalize() {
        let ev = kernel(3.0);
        let cfg = three_points(3.0);
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let mut total = 0.0;
        for mask in 0..8u32 {
            let edges: Vec<_> = (0..3).filter(|k| mask >> k & 1 == 1).map(|k| pairs[k]).collect();
            total += conditional_graph_likelihood(&cfg, &SinrGraph::from_edges(3, edges).unwrap(), &ev).unwrap();
        }
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn statistic_equals_scaled_negative_log_likelihood() {
        let ev = kernel(3.0);
        let cfg = three_points(3.0);
        let g = SinrGraph::from_edges(3, [(0, 2)]).unwrap();
        let t = log_likelihood_rate(&cfg, &g, &ev).unwrap();
        let p = conditional_graph_likelihood(&cfg, &g, &ev).unwrap();
        assert!((t.statistic() - 2.0 * -p.ln() / 9.0).abs() < 1e-12);
        assert_eq!(t.clamp_count, 0);
        assert_eq!(t.diagonal_clamp_count, 3);
        // density term: marks enter through −log(λ c e^{−cσ}) with |D| = 1
        let dens: f64 = [0.5, 1.5, 0.9].iter().map(|s| -(3.0f64).ln() + s).sum::<f64>() / 9.0;
        assert!((t.density - dens).abs() < 1e-14);
    }

    #[test]
    fn clamps_are_counted() {
        let (a, b, c) = neg_logs(0.0);
        assert!(c && a == 0.0 && (b - 1e15f64.ln()).abs() < 1e-12);
        let (a, _, c) = neg_logs(1e4);
        assert!(c && a == MAX_NEG_LOG_P);
        assert!(!neg_logs(1.0).2);
    }

    #[test]
    fn mismatched_intensity_is_rejected() {
        let cfg = three_points(4.0);
        assert!(log_likelihood_rate(&cfg, &SinrGraph::from_edges(3, []).unwrap(), &kernel(3.0)).is_err());
    }
}
