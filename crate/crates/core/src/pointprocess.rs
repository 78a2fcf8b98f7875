//! Seeded sampling of the marked Poisson point process.
//!
//! Every replicate of an experiment draws from its own ChaCha8 stream derived
//! from `(master_seed, replicate)`, so replicates can be generated in any
//! order or in parallel without changing their content.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DeviceDomain;

pub type Stream = ChaCha8Rng;

/// Where a configuration's randomness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub replicate: u64,
}

impl SeedRecord {
    pub fn new(master: u64, replicate: u64) -> Self {
        SeedRecord { master, replicate }
    }

    pub fn stream(&self) -> Stream {
        stream(self.master, self.replicate)
    }
}

/// Independent stream number `replicate` of the master seed.
pub fn stream(master: u64, replicate: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replicate);
    rng
}

/// A law for device marks.
pub trait MarkDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn cdf(&self, x: f64) -> f64;
}

/// Exponential mark law with rate `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkLaw {
    rate: f64,
}

impl MarkLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::param("c", "mark rate must be positive and finite"));
        }
        Ok(MarkLaw { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.rate
    }

    /// Smallest `x` with `cdf(x) >= p`; infinite at `p = 1`.
    pub fn quantile(&self, p: f64) -> f64 {
        -(-p).ln_1p() / self.rate
    }

    /// Probability of the interval `(a, b]`; `b` may be infinite.
    pub fn interval_probability(&self, a: f64, b: f64) -> f64 {
        (-self.rate * a).exp() - if b.is_finite() { (-self.rate * b).exp() } else { 0.0 }
    }

    /// `E[σ | a < σ <= b]`, using memorylessness for the unbounded tail.
    pub fn conditional_mean(&self, a: f64, b: f64) -> f64 {
        if !b.is_finite() {
            return a + self.mean();
        }
        let (ea, eb) = ((-self.rate * a).exp(), (-self.rate * b).exp());
        let p = ea - eb;
        if p <= 0.0 {
            return 0.5 * (a + b);
        }
        ((a + self.mean()) * ea - (b + self.mean()) * eb) / p
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.rate * (-self.rate * x).exp()
        }
    }
}

impl MarkDistribution for MarkLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1 - U lies in (0, 1], so the mark is finite and nonnegative
        -(1.0 - rng.random::<f64>()).ln() / self.rate
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rate * x).exp_m1()
        }
    }
}

/// One device: position in `D` and a positive mark.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPoint {
    pub position: Vec<f64>,
    pub mark: f64,
}

/// One realization of the marked process. Points are indexed `0..len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedConfiguration {
    domain: DeviceDomain,
    lambda: f64,
    coords: Vec<f64>,
    marks: Vec<f64>,
    seed: Option<SeedRecord>,
}

impl MarkedConfiguration {
    /// Builds a configuration from explicit points, validating the invariants.
    pub fn from_points(domain: DeviceDomain, lambda: f64, points: &[MarkedPoint]) -> Result<Self> {
        check_lambda(lambda)?;
        let dim = domain.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        let mut marks = Vec::with_capacity(points.len());
        for p in points {
            if p.position.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.position.len() });
            }
            if !domain.contains(&p.position) {
                return Err(Error::param("position", format!("{:?} lies outside the domain", p.position)));
            }
            if !(p.mark > 0.0 && p.mark.is_finite()) {
                return Err(Error::param("mark", "marks must be positive and finite"));
            }
            coords.extend_from_slice(&p.position);
            marks.push(p.mark);
        }
        let config = MarkedConfiguration { domain, lambda, coords, marks, seed: None };
        if let Some((i, j)) = config.coincident_pair() {
            return Err(Error::param("position", format!("points {i} and {j} coincide")));
        }
        Ok(config)
    }

    pub fn empty(domain: DeviceDomain, lambda: f64) -> Result<Self> {
        Self::from_points(domain, lambda, &[])
    }

    pub fn domain(&self) -> &DeviceDomain {
        &self.domain
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn seed(&self) -> Option<SeedRecord> {
        self.seed
    }

    pub(crate) fn with_seed(mut self, seed: SeedRecord) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn mark(&self, i: usize) -> f64 {
        self.marks[i]
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn points(&self) -> impl Iterator<Item = MarkedPoint> + '_ {
        (0..self.len()).map(|i| MarkedPoint { position: self.position(i).to_vec(), mark: self.mark(i) })
    }

    /// Squared distance between points `i` and `j` under the domain metric.
    #[inline]
    pub(crate) fn dist2(&self, i: usize, j: usize) -> f64 {
        self.domain.dist2(self.position(i), self.position(j))
    }

    /// A copy with one more point appended at index `len()`.
    pub fn with_point(&self, point: &MarkedPoint) -> Result<Self> {
        let mut pts: Vec<MarkedPoint> = self.points().collect();
        pts.push(point.clone());
        let mut out = Self::from_points(self.domain.clone(), self.lambda, &pts)?;
        out.seed = self.seed;
        Ok(out)
    }

    /// Reorders points so that new index `k` holds old point `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&i| i >= self.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::param("perm", "must be a permutation of the point indices"));
        }
        let mut out = self.clone();
        out.coords.clear();
        out.marks.clear();
        for &i in perm {
            out.coords.extend_from_slice(self.position(i));
            out.marks.push(self.mark(i));
        }
        Ok(out)
    }

    fn coincident_pair(&self) -> Option<(usize, usize)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.position(a)
                .iter()
                .zip(self.position(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx.windows(2).find(|w| self.position(w[0]) == self.position(w[1])).map(|w| (w[0], w[1]))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "intensity must be nonnegative and finite"));
    }
    Ok(())
}

/// Draws `|I| ~ Poisson(lambda)`; the device measure has total mass one.
///
/// Inversion by sequential search for `lambda <= 30`, otherwise Hörmann's
/// transformed rejection with squeeze (PTRS).
pub fn sample_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(0);
    }
    if lambda <= 30.0 {
        return Ok(poisson_inversion(lambda, rng));
    }
    Ok(poisson_ptrs(lambda, rng))
}

fn poisson_inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            // u fell into the rounding gap above the summed CDF
            break;
        }
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * loglam - ln_factorial(k as u64) {
            return k as u64;
        }
    }
}

pub(crate) fn ln_factorial(k: u64) -> f64 {
    if k < 20 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = k as f64;
    let x2 = x * x;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x * x2 * x2)
}

/// Draws a marked configuration: Poisson count, i.i.d. uniform positions,
/// i.i.d. marks. Coincident positions (a null event) are redrawn.
pub fn sample_configuration<M: MarkDistribution>(
    domain: &DeviceDomain,
    lambda: f64,
    mark_law: &M,
    rng: &mut Stream,
) -> Result<MarkedConfiguration> {
    let n = sample_count(lambda, rng)? as usize;
    let dim = domain.dim();
    let mut coords = vec![0.0; n * dim];
    let mut marks = Vec::with_capacity(n);
    for i in 0..n {
        domain.sample_uniform(rng, &mut coords[i * dim..(i + 1) * dim]);
        marks.push(mark_law.sample(rng));
    }
    let mut config = MarkedConfiguration { domain: domain.clone(), lambda, coords, marks, seed: None };
    while let Some((_, j)) = config.coincident_pair() {
        domain.sample_uniform(rng, &mut config.coords[j * dim..(j + 1) * dim]);
    }
    Ok(config)
}

/// [`sample_configuration`] on the dedicated stream of `seed`.
pub fn sample_seeded<M: MarkDistribution>(
    domain: &DeviceDomain,
    lambda: f64,
    mark_law: &M,
    seed: SeedRecord,
) -> Result<MarkedConfiguration> {
    let mut rng = seed.stream();
    Ok(sample_configuration(domain, lambda, mark_law, &mut rng)?.with_seed(seed))
}
