//! The pair entropy `H(Q×Q)`: the mean binary entropy of the limiting edge
//! probability `exp(−R)` over two independent marked devices.
//!
//! Positions enter only through the distance `|x − y|`, so the quadrature
//! integrates against the exact distance law of two uniform points of `D`,
//! and the marks through `β(a, b)`, which takes finitely many values when
//! `β₀` is piecewise constant.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use super::{scale_breaks, shell_profile, KernelEvaluator, KernelParams};
use crate::error::{Error, Result};
use crate::geometry::{DeviceDomain, Shape};
use crate::pointprocess::{stream, MarkDistribution, MarkLaw};
use crate::quadrature::{integrate_with_breaks, Estimate, Tolerance};
use crate::sinr::BaseBeta;

/// `−p ln p − (1 − p) ln(1 − p)`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.ln() - (1.0 - p) * (-p).ln_1p()
}

/// Binary entropy of `p = exp(−rate)`, stable for small and large rates.
pub fn entropy_from_rate(rate: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    let p = (-rate).exp();
    let q = -(-rate).exp_m1();
    p * rate - q * q.ln()
}

/// Law of `|X − Y|` for independent uniform points of a domain.
pub struct DistanceLaw {
    density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    breaks: Vec<f64>,
}

impl DistanceLaw {
    pub fn new(domain: &DeviceDomain) -> Result<Self> {
        if domain.is_periodic() {
            // the minimum-image difference is uniform on the centered box
            let (shell, breaks) = shell_profile(domain)?;
            let vol = domain.volume();
            return Ok(DistanceLaw { density: Box::new(move |r| shell(r) / vol), breaks });
        }
        match (*domain.shape(), domain.dim()) {
            (Shape::Box { side }, 1) => Ok(DistanceLaw {
                density: Box::new(move |r| if r <= side { 2.0 * (side - r) / (side * side) } else { 0.0 }),
                breaks: vec![0.0, side],
            }),
            (Shape::Box { side }, 2) => {
                let l = side;
                Ok(DistanceLaw {
                    density: Box::new(move |r: f64| {
                        // 4r/L⁴ ∫ (L − r cos θ)(L − r sin θ) dθ over the angles where both factors are positive
                        let t0 = if r <= l { 0.0 } else { (l / r).min(1.0).acos() };
                        let t1 = 0.5 * PI - t0;
                        if t1 <= t0 {
                            return 0.0;
                        }
                        let anti = |t: f64| l * l * t - l * r * (t.sin() - t.cos()) + 0.5 * r * r * t.sin().powi(2);
                        4.0 * r * (anti(t1) - anti(t0)) / l.powi(4)
                    }),
                    breaks: vec![0.0, l, l * 2f64.sqrt()],
                })
            }
            (Shape::Disk { radius }, _) => {
                let area = PI * radius * radius;
                Ok(DistanceLaw {
                    density: Box::new(move |r: f64| {
                        if r >= 2.0 * radius {
                            return 0.0;
                        }
                        let cov = 2.0 * radius * radius * (r / (2.0 * radius)).acos()
                            - 0.5 * r * (4.0 * radius * radius - r * r).sqrt();
                        2.0 * PI * r * cov / (area * area)
                    }),
                    breaks: vec![0.0, 2.0 * radius],
                })
            }
            (_, d) => Err(Error::Unsupported(format!("pair distance law in {d} dimensions"))),
        }
    }

    pub fn density(&self, r: f64) -> f64 {
        if r < 0.0 {
            0.0
        } else {
            (self.density)(r)
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().expect("nonempty"))
    }

    /// `E g(|X − Y|)`, with extra breakpoints where `g` changes scale.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G, extra: &[f64], tol: Tolerance) -> Estimate {
        let (a, b) = self.support();
        let mut pts = self.breaks.clone();
        pts.extend(extra.iter().copied().filter(|s| *s > a && *s < b));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        integrate_with_breaks(|r| g(r) * self.density(r), &pts, tol)
    }
}

/// `E g(|X − Y|)` for independent uniform points of `domain`.
pub fn pair_distance_expectation<G: Fn(f64) -> f64>(domain: &DeviceDomain, g: G, tol: Tolerance) -> Result<Estimate> {
    Ok(DistanceLaw::new(domain)?.expectation(g, &[], tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EntropyMethod {
    Quadrature,
    MonteCarlo { samples: u64, seed: u64 },
}

impl EntropyMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EntropyMethod::Quadrature => "quadrature",
            EntropyMethod::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEstimate {
    /// Nats.
    pub value: f64,
    /// Absolute quadrature error, or one standard error for Monte Carlo.
    pub error: f64,
    pub method: EntropyMethod,
}

impl EntropyEstimate {
    pub fn bits(&self) -> f64 {
        self.value / LN_2
    }
}

/// Values of `β₀(σ)` with their probabilities under `Q`.
fn beta0_values(beta0: &BaseBeta, law: &MarkLaw) -> Vec<(f64, f64)> {
    match beta0 {
        BaseBeta::Constant { value } => vec![(*value, 1.0)],
        BaseBeta::Table { breaks, values } => (0..values.len())
            .map(|k| {
                let lo = if k == 0 { 0.0 } else { breaks[k - 1] };
                let hi = breaks.get(k).copied().unwrap_or(f64::INFINITY);
                (values[k], law.interval_probability(lo, hi))
            })
            .collect(),
    }
}

/// Distinct values of `β(a, b)` with their probabilities under `Q × Q`.
fn beta_mixture(beta0: &BaseBeta, law: &MarkLaw) -> Vec<(f64, f64)> {
    let single = beta0_values(beta0, law);
    let mut mix: Vec<(f64, f64)> = Vec::new();
    for (bk, pk) in &single {
        for (bl, pl) in &single {
            let b = 0.5 * (bk + bl);
            match mix.iter_mut().find(|(v, _)| *v == b) {
                Some(entry) => entry.1 += pk * pl,
                None => mix.push((b, pk * pl)),
            }
        }
    }
    mix.sort_by(|x, y| x.0.total_cmp(&y.0));
    mix
}

/// `E h(p_λ(X, Y))` for independent uniform points with independent marks.
///
/// Since `E N(N − 1) = λ²`, this is the exact mean of the likelihood statistic
/// when edges are drawn independently with probability `p_λ`. Needs a frame
/// in which the kernel depends on the points only through their distance.
pub fn finite_lambda_entropy(kernel: &KernelEvaluator) -> Result<Estimate> {
    let params = kernel.params();
    if !params.pole_free() {
        return Err(Error::Unsupported("the finite-intensity entropy needs a pole-free kernel frame".into()));
    }
    let lambda = params.lambda();
    let alpha = params.alpha();
    let single = beta0_values(&params.sinr().beta0, params.law());
    let law = DistanceLaw::new(params.domain())?;
    let (_, top) = law.support();
    let mut extra = Vec::new();
    let q = params.q_alpha();
    for (b, _) in &single {
        if *b > 0.0 {
            extra.extend(scale_breaks(&[0.0, top], (q * b).powf(-1.0 / alpha)));
        }
    }
    let origin = vec![0.0; params.domain().dim()];
    let failed = std::cell::Cell::new(false);
    let est = law.expectation(
        |r| {
            let ra = r.powf(alpha);
            let mut psi = Vec::with_capacity(single.len());
            for (b, _) in &single {
                match kernel.psi(&origin, b / (2.0 * lambda) * ra) {
                    Ok(v) => psi.push(v),
                    Err(_) => {
                        failed.set(true);
                        return 0.0;
                    }
                }
            }
            let mut total = 0.0;
            for (i, (_, wi)) in single.iter().enumerate() {
                for (j, (_, wj)) in single.iter().enumerate() {
                    total += wi * wj * entropy_from_rate(lambda * (psi[i] + psi[j]));
                }
            }
            total
        },
        &extra,
        Tolerance::relative(1e-9),
    );
    if failed.get() {
        return Err(Error::Unsupported("kernel evaluation failed inside the distance integral".into()));
    }
    Ok(est)
}

const MC_BLOCK: u64 = 1 << 16;

/// `H(Q×Q)` in nats.
pub fn shannon_entropy(params: &KernelParams, method: EntropyMethod) -> Result<EntropyEstimate> {
    let q = params.q_alpha();
    let alpha = params.alpha();
    let beta0 = &params.sinr().beta0;
    if beta0.is_zero() {
        return Ok(EntropyEstimate { value: 0.0, error: 0.0, method });
    }
    match method {
        EntropyMethod::Quadrature => {
            let mix = beta_mixture(beta0, params.law());
            let law = DistanceLaw::new(params.domain())?;
            let (_, top) = law.support();
            let mut extra = Vec::new();
            for (b, _) in &mix {
                if *b > 0.0 {
                    extra.extend(scale_breaks(&[0.0, top], (q * b).powf(-1.0 / alpha)));
                }
            }
            let est = law.expectation(
                |r| {
                    let ra = r.powf(alpha);
                    mix.iter().map(|(b, w)| w * entropy_from_rate(q * b * ra)).sum()
                },
                &extra,
                Tolerance::relative(1e-11),
            );
            Ok(EntropyEstimate { value: est.value, error: est.error, method })
        }
        EntropyMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::param("samples", "need at least two samples"));
            }
            let domain = params.domain();
            let marks = params.law();
            let sinr = params.sinr();
            let d = domain.dim();
            let blocks = samples.div_ceil(MC_BLOCK);
            let sums: Vec<(f64, f64)> = (0..blocks)
                .into_par_iter()
                .map(|blk| {
                    let mut rng = stream(seed, blk);
                    let count = MC_BLOCK.min(samples - blk * MC_BLOCK);
                    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
                    let (mut s, mut s2) = (0.0, 0.0);
                    for _ in 0..count {
                        domain.sample_uniform(&mut rng, &mut x);
                        domain.sample_uniform(&mut rng, &mut y);
                        let a = marks.sample(&mut rng);
                        let b = marks.sample(&mut rng);
                        let r = domain.dist2(&x, &y).sqrt();
                        let v = entropy_from_rate(q * sinr.beta(a, b) * r.powf(alpha));
                        s += v;
                        s2 += v * v;
                    }
                    (s, s2)
                })
                .collect();
            let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
            let n = samples as f64;
            let mean = s / n;
            let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(EntropyEstimate { value: mean, error: (var / n).sqrt(), method })
        }
    }
}
