//! Binned measures on product partitions of `D × (0, ∞)`.
//!
//! A [`ProductPartition`] crosses a regular spatial grid with a set of mark
//! intervals. Measures carry a shared [`BinLayout`] so that operations can
//! refuse to combine measures that live on different partitions.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DeviceDomain, Shape};
use crate::pointprocess::{MarkDistribution, MarkLaw, MarkedConfiguration};
use crate::sinr::SinrGraph;

/// Spatial cells of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialGrid {
    /// `per_axis^d` congruent sub-boxes of a box domain.
    Cubes { per_axis: usize },
    /// Equal-area rings crossed with equal sectors of a disk domain.
    Polar { rings: usize, sectors: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPartition {
    domain: DeviceDomain,
    grid: SpatialGrid,
    /// Upper ends of the bounded mark intervals; the last interval is `(T, ∞)`.
    mark_breaks: Vec<f64>,
}

impl ProductPartition {
    pub fn new(domain: DeviceDomain, grid: SpatialGrid, mark_breaks: Vec<f64>) -> Result<Self> {
        match (&grid, domain.shape()) {
            (SpatialGrid::Cubes { per_axis }, Shape::Box { .. }) if *per_axis > 0 => {}
            (SpatialGrid::Polar { rings, sectors }, Shape::Disk { .. }) if *rings > 0 && *sectors > 0 => {}
            _ => return Err(Error::param("partition", "grid must match the domain shape and be nonempty")),
        }
        if mark_breaks.iter().any(|b| !(*b > 0.0 && b.is_finite())) || mark_breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("mark_breaks", "must be positive, finite and increasing"));
        }
        Ok(ProductPartition { domain, grid, mark_breaks })
    }

    /// `k^d` cubes on a box or `k` rings by `k` sectors on a disk.
    pub fn regular_grid(domain: &DeviceDomain, k: usize) -> SpatialGrid {
        match domain.shape() {
            Shape::Box { .. } => SpatialGrid::Cubes { per_axis: k },
            Shape::Disk { .. } => SpatialGrid::Polar { rings: k, sectors: k },
        }
    }

    /// `n_m` equal-probability intervals on `(0, T]` plus the tail `(T, ∞)`.
    ///
    /// Without an explicit `T` the cut is placed so that all `n_m + 1`
    /// intervals carry the same probability.
    pub fn equal_probability(
        domain: DeviceDomain,
        grid: SpatialGrid,
        n_m: usize,
        threshold: Option<f64>,
        law: &MarkLaw,
    ) -> Result<Self> {
        let head = match threshold {
            Some(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::param("mark_threshold", "must be positive and finite"))
            }
            Some(t) => law.cdf(t),
            None => n_m as f64 / (n_m as f64 + 1.0),
        };
        if n_m == 0 && threshold.is_some() {
            return Err(Error::param("n_m", "a mark threshold needs at least one bounded interval"));
        }
        let mut breaks: Vec<f64> = (1..=n_m).map(|k| law.quantile(head * k as f64 / n_m as f64)).collect();
        if let (Some(t), Some(last)) = (threshold, breaks.last_mut()) {
            *last = t;
        }
        Self::new(domain, grid, breaks)
    }

    pub fn domain(&self) -> &DeviceDomain {
        &self.domain
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn mark_breaks(&self) -> &[f64] {
        &self.mark_breaks
    }

    pub fn n_cells(&self) -> usize {
        match self.grid {
            SpatialGrid::Cubes { per_axis } => per_axis.pow(self.domain.dim() as u32),
            SpatialGrid::Polar { rings, sectors } => rings * sectors,
        }
    }

    pub fn n_intervals(&self) -> usize {
        self.mark_breaks.len() + 1
    }

    pub fn n_bins(&self) -> usize {
        self.n_cells() * self.n_intervals()
    }

    pub fn bin_index(&self, cell: usize, interval: usize) -> usize {
        cell * self.n_intervals() + interval
    }

    /// `(spatial cell, mark interval)` of a bin.
    pub fn split(&self, bin: usize) -> (usize, usize) {
        (bin / self.n_intervals(), bin % self.n_intervals())
    }

    /// Mark interval `(lo, hi]`, with `hi = ∞` for the tail.
    pub fn interval_bounds(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { 0.0 } else { self.mark_breaks[k - 1] };
        let hi = self.mark_breaks.get(k).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    pub fn interval_of(&self, mark: f64) -> usize {
        self.mark_breaks.partition_point(|b| *b < mark)
    }

    pub fn cell_of(&self, p: &[f64]) -> usize {
        match (&self.grid, self.domain.shape()) {
            (SpatialGrid::Cubes { per_axis }, Shape::Box { side }) => {
                let k = *per_axis;
                p.iter().rev().fold(0, |acc, x| acc * k + axis_index(*x / side + 0.5, k))
            }
            (SpatialGrid::Polar { rings, sectors }, Shape::Disk { radius }) => {
                let ring = axis_index((p[0] * p[0] + p[1] * p[1]) / (radius * radius), *rings);
                let theta = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
                ring * sectors + axis_index(theta / (2.0 * PI), *sectors)
            }
            _ => unreachable!("grid validated against shape"),
        }
    }

    pub fn bin_of(&self, p: &[f64], mark: f64) -> usize {
        self.bin_index(self.cell_of(p), self.interval_of(mark))
    }

    /// Lebesgue volume of each cell; all cells are congruent or equal-area.
    pub fn cell_volume(&self) -> f64 {
        self.domain.volume() / self.n_cells() as f64
    }

    /// Centroid of a spatial cell.
    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        self.cell_points(cell, 1).pop().expect("one point")
    }

    /// Centroids of the `m^d` (box) or `m × m` (disk) equal-volume sub-cells of `cell`.
    pub fn cell_points(&self, cell: usize, m: usize) -> Vec<Vec<f64>> {
        match (&self.grid, self.domain.shape()) {
            (SpatialGrid::Cubes { per_axis }, Shape::Box { side }) => {
                let d = self.domain.dim();
                let k = *per_axis;
                let h = side / k as f64;
                let mut origin = Vec::with_capacity(d);
                let mut rest = cell;
                for _ in 0..d {
                    origin.push(-0.5 * side + (rest % k) as f64 * h);
                    rest /= k;
                }
                let sub = h / m as f64;
                (0..m.pow(d as u32))
                    .map(|s| {
                        let mut rest = s;
                        origin
                            .iter()
                            .map(|o| {
                                let v = o + ((rest % m) as f64 + 0.5) * sub;
                                rest /= m;
                                v
                            })
                            .collect()
                    })
                    .collect()
            }
            (SpatialGrid::Polar { rings, sectors }, Shape::Disk { radius }) => {
                let (ring, sector) = (cell / sectors, cell % sectors);
                let total_rings = rings * m;
                let total_sectors = sectors * m;
                let mut out = Vec::with_capacity(m * m);
                for a in 0..m {
                    let q = ring * m + a;
                    let r0 = radius * (q as f64 / total_rings as f64).sqrt();
                    let r1 = radius * ((q + 1) as f64 / total_rings as f64).sqrt();
                    for b in 0..m {
                        let s = sector * m + b;
                        let width = 2.0 * PI / total_sectors as f64;
                        let mid = (s as f64 + 0.5) * width;
                        let half = 0.5 * width;
                        let rc = 2.0 / 3.0 * (r1.powi(3) - r0.powi(3)) / (r1 * r1 - r0 * r0) * half.sin() / half;
                        out.push(vec![rc * mid.cos(), rc * mid.sin()]);
                    }
                }
                out
            }
            _ => unreachable!("grid validated against shape"),
        }
    }
}

fn axis_index(u: f64, k: usize) -> usize {
    ((u * k as f64).floor().max(0.0) as usize).min(k - 1)
}

/// Index set that a measure's masses refer to.
#[derive(Debug, Clone, PartialEq)]
pub enum BinLayout {
    Product(ProductPartition),
    /// Groups of bins of a parent layout, each group becoming one bin.
    Coarsened { parent: Arc<BinLayout>, groups: Vec<Vec<usize>> },
    /// Bins with no geometry attached.
    Plain { n: usize },
}

impl BinLayout {
    pub fn len(&self) -> usize {
        match self {
            BinLayout::Product(p) => p.n_bins(),
            BinLayout::Coarsened { groups, .. } => groups.len(),
            BinLayout::Plain { n } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn partition(&self) -> Option<&ProductPartition> {
        match self {
            BinLayout::Product(p) => Some(p),
            _ => None,
        }
    }
}

fn same_layout(a: &Arc<BinLayout>, b: &Arc<BinLayout>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::PartitionMismatch)
    }
}

fn check_masses(masses: &[f64]) -> Result<()> {
    if masses.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
        return Err(Error::param("masses", "must be nonnegative and finite"));
    }
    Ok(())
}

/// Compensated sum, so totals do not depend on how bins are grouped.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Common read access to single and pair measures.
pub trait Binned {
    fn layout(&self) -> &Arc<BinLayout>;
    fn values(&self) -> &[f64];

    fn total(&self) -> f64 {
        neumaier_sum(self.values().iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMeasure {
    layout: Arc<BinLayout>,
    masses: Vec<f64>,
}

impl BinnedMeasure {
    pub fn new(layout: Arc<BinLayout>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), found: masses.len() });
        }
        check_masses(&masses)?;
        Ok(BinnedMeasure { layout, masses })
    }

    pub fn zero(layout: Arc<BinLayout>) -> Self {
        let n = layout.len();
        BinnedMeasure { layout, masses: vec![0.0; n] }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total() - 1.0).abs() <= tol
    }
}

impl Binned for BinnedMeasure {
    fn layout(&self) -> &Arc<BinLayout> {
        &self.layout
    }
    fn values(&self) -> &[f64] {
        &self.masses
    }
}

/// Symmetric measure on pairs of bins, stored densely in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedPairMeasure {
    layout: Arc<BinLayout>,
    masses: Vec<f64>,
}

impl BinnedPairMeasure {
    pub fn new(layout: Arc<BinLayout>, masses: Vec<f64>) -> Result<Self> {
        let n = layout.len();
        if masses.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: masses.len() });
        }
        check_masses(&masses)?;
        for a in 0..n {
            for b in a + 1..n {
                if masses[a * n + b] != masses[b * n + a] {
                    return Err(Error::param("masses", format!("pair measure is not symmetric at ({a}, {b})")));
                }
            }
        }
        Ok(BinnedPairMeasure { layout, masses })
    }

    pub fn zero(layout: Arc<BinLayout>) -> Self {
        let n = layout.len();
        BinnedPairMeasure { layout, masses: vec![0.0; n * n] }
    }

    pub fn n_bins(&self) -> usize {
        self.layout.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.masses[a * self.n_bins() + b]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

impl Binned for BinnedPairMeasure {
    fn layout(&self) -> &Arc<BinLayout> {
        &self.layout
    }
    fn values(&self) -> &[f64] {
        &self.masses
    }
}

fn bins_of(config: &MarkedConfiguration, partition: &ProductPartition) -> Result<Vec<usize>> {
    if config.domain() != partition.domain() {
        return Err(Error::PartitionMismatch);
    }
    Ok((0..config.len()).map(|i| partition.bin_of(config.position(i), config.mark(i))).collect())
}

/// `count / scale`, zero when the intensity is zero.
fn normalize(counts: Vec<u64>, scale: f64) -> Vec<f64> {
    counts.into_iter().map(|c| if scale > 0.0 { c as f64 / scale } else { 0.0 }).collect()
}

/// `L₁ = (1/λ) Σ_i δ_{(X_i, σ_i)}`.
pub fn empirical_mark_measure(config: &MarkedConfiguration, layout: &Arc<BinLayout>) -> Result<BinnedMeasure> {
    let partition = layout.partition().ok_or(Error::PartitionMismatch)?;
    let mut counts = vec![0u64; layout.len()];
    for b in bins_of(config, partition)? {
        counts[b] += 1;
    }
    Ok(BinnedMeasure { layout: layout.clone(), masses: normalize(counts, config.lambda()) })
}

/// `L₂ = (1/λ²) Σ_{edges {i,j}} (δ_{(X_i, X_j)} + δ_{(X_j, X_i)})`.
pub fn empirical_pair_measure(
    config: &MarkedConfiguration,
    graph: &SinrGraph,
    layout: &Arc<BinLayout>,
) -> Result<BinnedPairMeasure> {
    let partition = layout.partition().ok_or(Error::PartitionMismatch)?;
    if graph.node_count() != config.len() {
        return Err(Error::DimensionMismatch { expected: config.len(), found: graph.node_count() });
    }
    let bins = bins_of(config, partition)?;
    let n = layout.len();
    let mut counts = vec![0u64; n * n];
    for &(i, j) in graph.edges() {
        let (a, b) = (bins[i], bins[j]);
        counts[a * n + b] += 1;
        counts[b * n + a] += 1;
    }
    let lambda = config.lambda();
    Ok(BinnedPairMeasure { layout: layout.clone(), masses: normalize(counts, lambda * lambda) })
}

/// `L_Δ = (1/λ²) Σ_i δ_{(X_i, X_i)}`.
pub fn diagonal_measure(config: &MarkedConfiguration, layout: &Arc<BinLayout>) -> Result<BinnedPairMeasure> {
    let partition = layout.partition().ok_or(Error::PartitionMismatch)?;
    let n = layout.len();
    let mut counts = vec![0u64; n * n];
    for b in bins_of(config, partition)? {
        counts[b * n + b] += 1;
    }
    let lambda = config.lambda();
    Ok(BinnedPairMeasure { layout: layout.clone(), masses: normalize(counts, lambda * lambda) })
}

/// The normalized device measure times the mark law, `m ⊗ Q`, on the bins.
pub fn reference_measure(layout: &Arc<BinLayout>, law: &MarkLaw) -> Result<BinnedMeasure> {
    let partition = layout.partition().ok_or(Error::PartitionMismatch)?;
    let cell = 1.0 / partition.n_cells() as f64;
    let masses = (0..partition.n_bins())
        .map(|b| {
            let (lo, hi) = partition.interval_bounds(partition.split(b).1);
            cell * law.interval_probability(lo, hi)
        })
        .collect();
    Ok(BinnedMeasure { layout: layout.clone(), masses })
}

/// `Σ_b ω_b log(ω_b / ρ_b)` over raw mass vectors, `+∞` when `ω` is not dominated by `ρ`.
pub fn kl_divergence(omega: &[f64], rho: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&w, &r) in omega.iter().zip(rho) {
        if w == 0.0 {
            continue;
        }
        if r == 0.0 {
            return f64::INFINITY;
        }
        total += w * (w / r).ln();
    }
    total
}

/// `H(ω | ρ)`, with `0 log 0 = 0` and `+∞` on absolute-continuity failure.
pub fn relative_entropy(omega: &BinnedMeasure, rho: &BinnedMeasure) -> Result<f64> {
    same_layout(&omega.layout, &rho.layout)?;
    Ok(kl_divergence(&omega.masses, &rho.masses))
}

/// Checks that `groups` partitions `0..n` and returns the group of each bin.
fn group_index(n: usize, groups: &[Vec<usize>]) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; n];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::NotAPartition(format!("group {g} is empty")));
        }
        for &b in members {
            if b >= n {
                return Err(Error::NotAPartition(format!("bin {b} does not exist")));
            }
            if owner[b] != usize::MAX {
                return Err(Error::NotAPartition(format!("bin {b} appears twice")));
            }
            owner[b] = g;
        }
    }
    if let Some(b) = owner.iter().position(|o| *o == usize::MAX) {
        return Err(Error::NotAPartition(format!("bin {b} is not covered")));
    }
    Ok(owner)
}

fn coarsened_layout(parent: &Arc<BinLayout>, groups: &[Vec<usize>]) -> Arc<BinLayout> {
    Arc::new(BinLayout::Coarsened { parent: parent.clone(), groups: groups.to_vec() })
}

/// Pushforward onto the coarser partition whose bins are `groups`.
pub fn coarsen(measure: &BinnedMeasure, groups: &[Vec<usize>]) -> Result<BinnedMeasure> {
    group_index(measure.len(), groups)?;
    let masses = groups.iter().map(|g| neumaier_sum(g.iter().map(|&b| measure.masses[b]))).collect();
    Ok(BinnedMeasure { layout: coarsened_layout(&measure.layout, groups), masses })
}

pub fn coarsen_pair(measure: &BinnedPairMeasure, groups: &[Vec<usize>]) -> Result<BinnedPairMeasure> {
    let n = measure.n_bins();
    let owner = group_index(n, groups)?;
    let k = groups.len();
    let mut masses = vec![0.0; k * k];
    for a in 0..n {
        for b in 0..n {
            masses[owner[a] * k + owner[b]] += measure.masses[a * n + b];
        }
    }
    // summation order differs across the diagonal; restore exact symmetry
    for g in 0..k {
        for h in g + 1..k {
            let v = 0.5 * (masses[g * k + h] + masses[h * k + g]);
            masses[g * k + h] = v;
            masses[h * k + g] = v;
        }
    }
    Ok(BinnedPairMeasure { layout: coarsened_layout(&measure.layout, groups), masses })
}

/// Groups that merge all mark intervals of each spatial cell.
pub fn spatial_groups(partition: &ProductPartition) -> Vec<Vec<usize>> {
    (0..partition.n_cells())
        .map(|c| (0..partition.n_intervals()).map(|k| partition.bin_index(c, k)).collect())
        .collect()
}

/// `max_b |a_b − b_b|`.
pub fn sup_deviation<M: Binned>(a: &M, b: &M) -> Result<f64> {
    same_layout(a.layout(), b.layout())?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// `Σ_b |a_b − b_b|`.
pub fn l1_distance<M: Binned>(a: &M, b: &M) -> Result<f64> {
    same_layout(a.layout(), b.layout())?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointprocess::{sample_seeded, MarkedPoint, SeedRecord};
    use proptest::prelude::*;

    fn plain(n: usize) -> Arc<BinLayout> {
        Arc::new(BinLayout::Plain { n })
    }

    fn square_partition(k: usize, n_m: usize) -> Arc<BinLayout> {
        let d = DeviceDomain::cube(2, 1.0).unwrap();
        let law = MarkLaw::exponential(1.0).unwrap();
        let p = ProductPartition::equal_probability(d, SpatialGrid::Cubes { per_axis: k }, n_m, None, &law).unwrap();
        Arc::new(BinLayout::Product(p))
    }

    #[test]
    fn relative_entropy_examples() {
        let l = plain(2);
        let w = BinnedMeasure::new(l.clone(), vec![0.5, 0.5]).unwrap();
        let r = BinnedMeasure::new(l.clone(), vec![0.25, 0.75]).unwrap();
        let oracle = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((relative_entropy(&w, &r).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.143841).abs() < 1e-6);
        assert_eq!(relative_entropy(&w, &w).unwrap(), 0.0);
        let null = BinnedMeasure::new(l, vec![1.0, 0.0]).unwrap();
        assert_eq!(relative_entropy(&w, &null).unwrap(), f64::INFINITY);
        let other = BinnedMeasure::new(plain(3), vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(relative_entropy(&w, &other), Err(Error::PartitionMismatch)));
    }

    #[test]
    fn reference_measure_examples() {
        let one = Arc::new(BinLayout::Product(
            ProductPartition::new(DeviceDomain::cube(2, 1.0).unwrap(), SpatialGrid::Cubes { per_axis: 1 }, vec![]).unwrap(),
        ));
        let law = MarkLaw::exponential(1.0).unwrap();
        assert_eq!(reference_measure(&one, &law).unwrap().masses(), &[1.0]);

        let halves = Arc::new(BinLayout::Product(
            ProductPartition::new(DeviceDomain::cube(1, 2.0).unwrap(), SpatialGrid::Cubes { per_axis: 2 }, vec![]).unwrap(),
        ));
        assert_eq!(reference_measure(&halves, &law).unwrap().masses(), &[0.5, 0.5]);

        let p = ProductPartition::equal_probability(
            DeviceDomain::cube(2, 1.0).unwrap(),
            SpatialGrid::Cubes { per_axis: 4 },
            1,
            Some(4f64.ln()),
            &law,
        )
        .unwrap();
        let r = reference_measure(&Arc::new(BinLayout::Product(p)), &law).unwrap();
        assert_eq!(r.len(), 32);
        for pair in r.masses().chunks(2) {
            assert!((pair[0] - 0.75 / 16.0).abs() < 1e-15);
            assert!((pair[1] - 0.25 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn default_mark_cut_gives_equal_probabilities() {
        let law = MarkLaw::exponential(2.0).unwrap();
        let p = ProductPartition::equal_probability(DeviceDomain::unit_area_disk(), SpatialGrid::Polar { rings: 2, sectors: 3 }, 3, None, &law)
            .unwrap();
        for k in 0..4 {
            let (lo, hi) = p.interval_bounds(k);
            assert!((law.interval_probability(lo, hi) - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn empirical_measures_match_classifier() {
        let layout = square_partition(3, 2);
        let partition = layout.partition().unwrap().clone();
        let law = MarkLaw::exponential(1.0).unwrap();
        let cfg = sample_seeded(partition.domain(), 200.0, &law, SeedRecord::new(3, 1)).unwrap();
        let l1 = empirical_mark_measure(&cfg, &layout).unwrap();
        // brute force: test membership of every point in every bin
        let breaks = partition.mark_breaks().to_vec();
        let mut oracle = vec![0.0; partition.n_bins()];
        for i in 0..cfg.len() {
            let p = cfg.position(i);
            for cell in 0..9 {
                let (cx, cy) = (cell % 3, cell / 3);
                let inx = p[0] >= -0.5 + cx as f64 / 3.0 && p[0] < -0.5 + (cx + 1) as f64 / 3.0 + if cx == 2 { 1e-12 } else { 0.0 };
                let iny = p[1] >= -0.5 + cy as f64 / 3.0 && p[1] < -0.5 + (cy + 1) as f64 / 3.0 + if cy == 2 { 1e-12 } else { 0.0 };
                if inx && iny {
                    for k in 0..3 {
                        let lo = if k == 0 { 0.0 } else { breaks[k - 1] };
                        let hi = if k == 2 { f64::INFINITY } else { breaks[k] };
                        if cfg.mark(i) > lo && cfg.mark(i) <= hi {
                            oracle[cell * 3 + k] += 1.0;
                        }
                    }
                }
            }
        }
        for (a, b) in l1.masses().iter().zip(&oracle) {
            assert_eq!(*a, b / 200.0);
        }
        assert!((l1.total() - cfg.len() as f64 / 200.0).abs() < 1e-12);
    }

    #[test]
    fn pair_measure_examples() {
        let layout = square_partition(2, 1);
        let d = layout.partition().unwrap().domain().clone();
        let pts = vec![
            MarkedPoint { position: vec![-0.3, -0.3], mark: 0.1 },
            MarkedPoint { position: vec![0.3, 0.3], mark: 5.0 },
            MarkedPoint { position: vec![0.2, -0.3], mark: 0.2 },
        ];
        let cfg = MarkedConfiguration::from_points(d, 10.0, &pts).unwrap();
        let empty = empirical_pair_measure(&cfg, &SinrGraph::from_edges(3, []).unwrap(), &layout).unwrap();
        assert_eq!(empty.total(), 0.0);
        let single = empirical_pair_measure(&cfg, &SinrGraph::from_edges(3, [(0, 1)]).unwrap(), &layout).unwrap();
        assert!((single.total() - 2.0 / 100.0).abs() < 1e-15);
        let p = layout.partition().unwrap();
        let (a, b) = (p.bin_of(&[-0.3, -0.3], 0.1), p.bin_of(&[0.3, 0.3], 5.0));
        assert_eq!(single.get(a, b), 0.01);
        assert_eq!(single.get(b, a), 0.01);
        let diag = diagonal_measure(&cfg, &layout).unwrap();
        assert!((diag.total() - 0.03).abs() < 1e-15);
    }

    #[test]
    fn pair_measure_matches_double_loop() {
        use crate::sinr::{build_graph, BaseBeta, SinrParams};
        let layout = square_partition(2, 2);
        let d = layout.partition().unwrap().domain().clone();
        let cfg = sample_seeded(&d, 60.0, &MarkLaw::exponential(1.0).unwrap(), SeedRecord::new(9, 0)).unwrap();
        let g = build_graph(&cfg, &SinrParams::new(1.0, BaseBeta::constant(0.5).unwrap()).unwrap()).unwrap();
        let l2 = empirical_pair_measure(&cfg, &g, &layout).unwrap();
        let p = layout.partition().unwrap();
        let n = p.n_bins();
        let mut oracle = vec![0.0; n * n];
        for i in 0..cfg.len() {
            for j in 0..cfg.len() {
                if i != j && g.has_edge(i, j) {
                    let a = p.bin_of(cfg.position(i), cfg.mark(i));
                    let b = p.bin_of(cfg.position(j), cfg.mark(j));
                    oracle[a * n + b] += 1.0;
                }
            }
        }
        for (x, y) in l2.masses().iter().zip(&oracle) {
            assert_eq!(*x, y / 3600.0);
        }
        assert!((l2.total() - 2.0 * g.edge_count() as f64 / 3600.0).abs() < 1e-12);
    }

    #[test]
    fn empty_configuration_gives_zero_measure() {
        let layout = square_partition(2, 1);
        let d = layout.partition().unwrap().domain().clone();
        let cfg = MarkedConfiguration::empty(d, 5.0).unwrap();
        assert!(empirical_mark_measure(&cfg, &layout).unwrap().masses().iter().all(|m| *m == 0.0));
    }

    #[test]
    fn one_point_per_unit_intensity_has_mass_one() {
        let layout = square_partition(2, 1);
        let d = layout.partition().unwrap().domain().clone();
        let pts: Vec<MarkedPoint> =
            (0..4).map(|k| MarkedPoint { position: vec![0.2 * k as f64 - 0.3, 0.1], mark: 1.0 + k as f64 }).collect();
        let cfg = MarkedConfiguration::from_points(d, 4.0, &pts).unwrap();
        assert_eq!(empirical_mark_measure(&cfg, &layout).unwrap().total(), 1.0);
    }

    #[test]
    fn polar_cells_are_consistent() {
        let law = MarkLaw::exponential(1.0).unwrap();
        let p = ProductPartition::equal_probability(DeviceDomain::disk(2.0).unwrap(), SpatialGrid::Polar { rings: 3, sectors: 5 }, 1, None, &law)
            .unwrap();
        for cell in 0..p.n_cells() {
            assert_eq!(p.cell_of(&p.cell_center(cell)), cell);
            for q in p.cell_points(cell, 3) {
                assert_eq!(p.cell_of(&q), cell);
            }
        }
        // centroid of a full disk cut into one ring and one sector is the origin
        let whole = ProductPartition::new(DeviceDomain::disk(1.0).unwrap(), SpatialGrid::Polar { rings: 1, sectors: 1 }, vec![]).unwrap();
        assert!(whole.cell_center(0).iter().all(|x| x.abs() < 1e-15));
        let half = ProductPartition::new(DeviceDomain::disk(1.0).unwrap(), SpatialGrid::Polar { rings: 1, sectors: 2 }, vec![]).unwrap();
        let c = half.cell_center(0);
        assert!((c[1] - 4.0 / (3.0 * PI)).abs() < 1e-14 && c[0].abs() < 1e-15);
    }

    #[test]
    fn box_cells_are_consistent() {
        let p = ProductPartition::new(DeviceDomain::cube(3, 2.0).unwrap(), SpatialGrid::Cubes { per_axis: 3 }, vec![1.0]).unwrap();
        for cell in 0..p.n_cells() {
            assert_eq!(p.cell_of(&p.cell_center(cell)), cell);
            assert_eq!(p.cell_points(cell, 2).len(), 8);
        }
        assert_eq!(p.cell_of(&[1.0, 1.0, 1.0]), 26);
        assert_eq!(p.cell_of(&[-1.0, -1.0, -1.0]), 0);
    }

    #[test]
    fn coarsen_examples() {
        let l = plain(4);
        let m = BinnedMeasure::new(l, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let id: Vec<Vec<usize>> = (0..4).map(|b| vec![b]).collect();
        assert_eq!(coarsen(&m, &id).unwrap().masses(), m.masses());
        let all = coarsen(&m, &[vec![0, 1, 2, 3]]).unwrap();
        assert!((all.masses()[0] - 1.0).abs() < 1e-15);
        assert!(matches!(coarsen(&m, &[vec![0, 1], vec![1, 2, 3]]), Err(Error::NotAPartition(_))));
        assert!(matches!(coarsen(&m, &[vec![0, 1], vec![2]]), Err(Error::NotAPartition(_))));
    }

    #[test]
    fn sup_deviation_examples() {
        let l = plain(3);
        let a = BinnedMeasure::new(l.clone(), vec![0.1, 0.5, 0.4]).unwrap();
        let b = BinnedMeasure::new(l, vec![0.1, 0.2, 0.4]).unwrap();
        assert_eq!(sup_deviation(&a, &a).unwrap(), 0.0);
        assert!((sup_deviation(&a, &b).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn pair_measure_requires_symmetry() {
        assert!(BinnedPairMeasure::new(plain(2), vec![0.1, 0.2, 0.3, 0.4]).is_err());
        assert!(BinnedPairMeasure::new(plain(2), vec![0.1, 0.2, 0.2, 0.4]).is_ok());
    }

    fn probability(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    fn grouping(n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
        proptest::collection::vec(0usize..4, n).prop_map(|labels| {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); 4];
            for (b, g) in labels.into_iter().enumerate() {
                groups[g].push(b);
            }
            groups.into_iter().filter(|g| !g.is_empty()).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn gibbs_inequality(w in probability(6), r in probability(6)) {
            let l = plain(6);
            let h = relative_entropy(&BinnedMeasure::new(l.clone(), w.clone()).unwrap(), &BinnedMeasure::new(l, r.clone()).unwrap()).unwrap();
            prop_assert!(h >= -1e-15);
            if w != r {
                prop_assert!(h > 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn data_processing_inequality(w in probability(8), r in probability(8), g in grouping(8)) {
            let l = plain(8);
            let w = BinnedMeasure::new(l.clone(), w).unwrap();
            let r = BinnedMeasure::new(l, r).unwrap();
            let fine = relative_entropy(&w, &r).unwrap();
            let coarse = relative_entropy(&coarsen(&w, &g).unwrap(), &coarsen(&r, &g).unwrap()).unwrap();
            prop_assert!(coarse <= fine + 1e-12);
        }

        #[test]
        fn coarsening_preserves_total(w in proptest::collection::vec(0.0f64..1.0, 8), g in grouping(8)) {
            let m = BinnedMeasure::new(plain(8), w).unwrap();
            prop_assert!((coarsen(&m, &g).unwrap().total() - m.total()).abs() <= 1e-15);
        }

        #[test]
        fn relative_entropy_is_jointly_convex(w1 in probability(5), r1 in probability(5), w2 in probability(5), r2 in probability(5)) {
            let mid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<_>>();
            let lhs = kl_divergence(&mid(&w1, &w2), &mid(&r1, &r2));
            let rhs = 0.5 * kl_divergence(&w1, &r1) + 0.5 * kl_divergence(&w2, &r2);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn sup_deviation_is_elementwise_max(a in proptest::collection::vec(0.0f64..1.0, 7), b in proptest::collection::vec(0.0f64..1.0, 7)) {
            let l = plain(7);
            let oracle = (0..7).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max);
            let got = sup_deviation(&BinnedMeasure::new(l.clone(), a).unwrap(), &BinnedMeasure::new(l, b).unwrap()).unwrap();
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn empirical_measures_ignore_point_order(seed in 0u64..50, rot in 0usize..40) {
            let layout = square_partition(2, 2);
            let d = layout.partition().unwrap().domain().clone();
            let cfg = sample_seeded(&d, 30.0, &MarkLaw::exponential(1.0).unwrap(), SeedRecord::new(seed, 0)).unwrap();
            let n = cfg.len();
            prop_assume!(n > 1);
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let shuffled = cfg.permuted(&perm).unwrap();
            prop_assert_eq!(empirical_mark_measure(&cfg, &layout).unwrap(), empirical_mark_measure(&shuffled, &layout).unwrap());
        }
    }
}
