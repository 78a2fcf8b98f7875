//! Rate functionals on binned measures: the mark-measure rate, the joint
//! rate, the spectral potential and the Kullback action.

use std::sync::Arc;

use serde::Serialize;

use super::{r_limit_value, KernelParams};
use crate::error::{Error, Result};
use crate::measures::{
    l1_distance, reference_measure, relative_entropy, sup_deviation, BinLayout, Binned, BinnedMeasure,
    BinnedPairMeasure, ProductPartition,
};

/// A rate value that is either finite and nonnegative or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValue {
    pub finite: bool,
    pub value: f64,
}

impl RateValue {
    pub fn finite(value: f64) -> Self {
        if value.is_finite() {
            RateValue { finite: true, value: value.max(0.0) }
        } else {
            Self::infinite()
        }
    }

    pub fn infinite() -> Self {
        RateValue { finite: false, value: f64::INFINITY }
    }
}

const MASS_TOL: f64 = 1e-9;

/// `H(ω | m⊗Q)` when `ω` is a probability measure, `+∞` otherwise.
pub fn rate_i1(omega: &BinnedMeasure, reference: &BinnedMeasure) -> Result<RateValue> {
    let h = relative_entropy(omega, reference)?;
    if !omega.is_probability(MASS_TOL) {
        return Ok(RateValue::infinite());
    }
    Ok(RateValue::finite(h))
}

fn partition_of(layout: &Arc<BinLayout>) -> Result<&ProductPartition> {
    layout.partition().ok_or_else(|| Error::Unsupported("kernel evaluation needs a product partition".into()))
}

/// Values of `β₀` on the pieces of a mark interval, with their conditional probabilities.
fn interval_pieces(partition: &ProductPartition, params: &KernelParams, k: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = partition.interval_bounds(k);
    let law = params.law();
    let beta0 = &params.sinr().beta0;
    let mut cuts = vec![lo];
    cuts.extend(beta0.breaks().iter().copied().filter(|b| *b > lo && *b < hi));
    cuts.push(hi);
    let total = law.interval_probability(lo, hi);
    cuts.windows(2)
        .map(|w| {
            let p = law.interval_probability(w[0], w[1]);
            let rep = if w[1].is_finite() { 0.5 * (w[0] + w[1]) } else { w[0] + 1.0 };
            (beta0.eval(rep), if total > 0.0 { p / total } else { 0.0 })
        })
        .collect()
}

fn fill_symmetric(n: usize, mut value: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
    let mut masses = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = value(a, b);
            masses[a * n + b] = v;
            masses[b * n + a] = v;
        }
    }
    masses
}

/// `e^{−R} ω⊗ω` with the kernel evaluated at cell centroids and conditional mean marks.
pub fn product_reference(omega: &BinnedMeasure, params: &KernelParams) -> Result<BinnedPairMeasure> {
    let partition = partition_of(omega.layout())?;
    let domain = params.domain();
    let centers: Vec<Vec<f64>> = (0..partition.n_cells()).map(|c| partition.cell_center(c)).collect();
    let reps: Vec<f64> = (0..partition.n_intervals())
        .map(|k| {
            let (lo, hi) = partition.interval_bounds(k);
            params.law().conditional_mean(lo, hi)
        })
        .collect();
    let w = omega.masses();
    let masses = fill_symmetric(partition.n_bins(), |a, b| {
        let ((ca, ka), (cb, kb)) = (partition.split(a), partition.split(b));
        let dist = domain.dist2(&centers[ca], &centers[cb]).sqrt();
        let r = r_limit_value(params.sinr().beta(reps[ka], reps[kb]), params.q_alpha(), dist, params.alpha());
        (-r).exp() * w[a] * w[b]
    });
    BinnedPairMeasure::new(omega.layout().clone(), masses)
}

/// As [`product_reference`], with the kernel averaged over `m` sub-cells per
/// axis of each cell and exactly over marks within each interval.
pub fn product_reference_averaged(omega: &BinnedMeasure, params: &KernelParams, m: usize) -> Result<BinnedPairMeasure> {
    if m == 0 {
        return Err(Error::param("refinement", "must be positive"));
    }
    let partition = partition_of(omega.layout())?;
    let domain = params.domain();
    let cells = partition.n_cells();
    let points: Vec<Vec<Vec<f64>>> = (0..cells).map(|c| partition.cell_points(c, m)).collect();
    let pieces: Vec<Vec<(f64, f64)>> = (0..partition.n_intervals()).map(|k| interval_pieces(partition, params, k)).collect();

    let mut betas: Vec<f64> = Vec::new();
    for pa in &pieces {
        for pb in &pieces {
            for (ba, _) in pa {
                for (bb, _) in pb {
                    let b = 0.5 * (ba + bb);
                    if !betas.contains(&b) {
                        betas.push(b);
                    }
                }
            }
        }
    }
    // mean of exp(−q β |s − t|^α) over sub-point pairs, per cell pair and β
    let q = params.q_alpha();
    let alpha = params.alpha();
    let mut spatial = vec![vec![0.0; betas.len()]; cells * cells];
    for ca in 0..cells {
        for cb in ca..cells {
            let mut acc = vec![0.0; betas.len()];
            for s in &points[ca] {
                for t in &points[cb] {
                    let da = domain.dist2(s, t).sqrt().powf(alpha);
                    for (slot, b) in acc.iter_mut().zip(&betas) {
                        *slot += (-q * b * da).exp();
                    }
                }
            }
            let count = (points[ca].len() * points[cb].len()) as f64;
            let avg: Vec<f64> = acc.into_iter().map(|v| v / count).collect();
            spatial[ca * cells + cb] = avg.clone();
            spatial[cb * cells + ca] = avg;
        }
    }
    let w = omega.masses();
    let masses = fill_symmetric(partition.n_bins(), |a, b| {
        let ((ca, ka), (cb, kb)) = (partition.split(a), partition.split(b));
        let mut kernel = 0.0;
        for (ba, pa) in &pieces[ka] {
            for (bb, pb) in &pieces[kb] {
                let idx = betas.iter().position(|x| *x == 0.5 * (ba + bb)).expect("collected above");
                kernel += pa * pb * spatial[ca * cells + cb][idx];
            }
        }
        kernel * w[a] * w[b]
    });
    BinnedPairMeasure::new(omega.layout().clone(), masses)
}

/// `I(ω, π) = H(ω | m⊗Q)` when `π` matches `e^{−R}ω⊗ω` within `tol` and `‖ω‖ = 1`, else `+∞`.
pub fn rate_joint(omega: &BinnedMeasure, pi: &BinnedPairMeasure, params: &KernelParams, tol: f64) -> Result<RateValue> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let target = product_reference(omega, params)?;
    let dev = sup_deviation(pi, &target)?;
    let reference = reference_measure(omega.layout(), params.law())?;
    let h = rate_i1(omega, &reference)?;
    if dev > tol {
        return Ok(RateValue::infinite());
    }
    Ok(h)
}

fn check_pair_function(g: &[f64], n: usize) -> Result<()> {
    if g.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: g.len() });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("g", "must be bounded"));
    }
    for a in 0..n {
        for b in a + 1..n {
            if g[a * n + b] != g[b * n + a] {
                return Err(Error::param("g", format!("must be symmetric; differs at ({a}, {b})")));
            }
        }
    }
    Ok(())
}

/// `U(g, ω) = ⟨g, e^{−R}ω⊗ω⟩` for a symmetric function `g` on bin pairs (row-major).
pub fn spectral_potential(g: &[f64], omega: &BinnedMeasure, params: &KernelParams) -> Result<f64> {
    check_pair_function(g, omega.len())?;
    let reference = product_reference(omega, params)?;
    Ok(g.iter().zip(reference.masses()).map(|(x, y)| x * y).sum())
}

/// `sup_{|g| ≤ M} ⟨g, π − ρ⟩ = M ‖π − ρ‖₁`; with `M = ∞` this is `0` when `π = ρ` and `+∞` otherwise.
pub fn kullback_action_l1(pi: &BinnedPairMeasure, reference: &BinnedPairMeasure, bound: f64) -> Result<f64> {
    if !(bound > 0.0) {
        return Err(Error::param("bound", "must be positive"));
    }
    let l1 = l1_distance(pi, reference)?;
    if l1 == 0.0 {
        return Ok(0.0);
    }
    Ok(bound * l1)
}

/// The Kullback action of `π` against `e^{−R}ω⊗ω` over test functions bounded by `bound`.
pub fn kullback_action(omega: &BinnedMeasure, pi: &BinnedPairMeasure, bound: f64, params: &KernelParams) -> Result<f64> {
    let reference = product_reference(omega, params)?;
    kullback_action_l1(pi, &reference, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DeviceDomain;
    use crate::measures::{coarsen, SpatialGrid};
    use crate::pointprocess::{stream, MarkLaw};
    use crate::sinr::{BaseBeta, SinrParams};
    use proptest::prelude::*;
    use rand::Rng;

    fn setup(beta0: f64) -> (KernelParams, Arc<BinLayout>) {
        let law = MarkLaw::exponential(1.0).unwrap();
        let domain = DeviceDomain::torus(2, 1.0).unwrap();
        let params = KernelParams::new(
            domain.clone(),
            SinrParams::new(1.0, BaseBeta::constant(beta0).unwrap()).unwrap(),
            law,
            100.0,
        )
        .unwrap();
        let p = ProductPartition::equal_probability(domain, SpatialGrid::Cubes { per_axis: 2 }, 1, None, &law).unwrap();
        (params, Arc::new(BinLayout::Product(p)))
    }

    fn random_probability(layout: &Arc<BinLayout>, seed: u64) -> BinnedMeasure {
        let mut rng = stream(seed, 0);
        let v: Vec<f64> = (0..layout.len()).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = v.iter().sum();
        BinnedMeasure::new(layout.clone(), v.into_iter().map(|x| x / s).collect()).unwrap()
    }

    #[test]
    fn rate_i1_examples() {
        let (params, layout) = setup(1.0);
        let reference = reference_measure(&layout, params.law()).unwrap();
        assert_eq!(rate_i1(&reference, &reference).unwrap(), RateValue::finite(0.0));
        let short = BinnedMeasure::new(layout.clone(), reference.masses().iter().map(|m| 0.9 * m).collect()).unwrap();
        assert!(!rate_i1(&short, &reference).unwrap().finite);
        let w = random_probability(&layout, 1);
        assert_eq!(rate_i1(&w, &reference).unwrap().value, relative_entropy(&w, &reference).unwrap());
    }

    #[test]
    fn product_reference_examples() {
        let (params, layout) = setup(0.0);
        let w = random_probability(&layout, 2);
        let plain = product_reference(&w, &params).unwrap();
        for a in 0..w.len() {
            for b in 0..w.len() {
                assert_eq!(plain.get(a, b), w.masses()[a] * w.masses()[b]);
            }
        }
        let (params, _) = setup(2.0);
        let damped = product_reference(&w, &params).unwrap();
        assert!(damped.total() <= w.total().powi(2));
        assert!(damped.total() < plain.total());
    }

    #[test]
    fn averaged_reference_converges_under_refinement() {
        let (params, layout) = setup(1.0);
        let w = reference_measure(&layout, params.law()).unwrap();
        let fine = product_reference_averaged(&w, &params, 32).unwrap();
        let mut prev = f64::INFINITY;
        for m in [2, 4, 8] {
            let gap = l1_distance(&product_reference_averaged(&w, &params, m).unwrap(), &fine).unwrap();
            assert!(gap < prev, "m={m}: {gap}");
            prev = gap;
        }
        assert!(prev / fine.total() < 0.01);
    }

    #[test]
    fn rate_joint_examples() {
        let (params, layout) = setup(1.0);
        let reference = reference_measure(&layout, params.law()).unwrap();
        let pi = product_reference(&reference, &params).unwrap();
        assert_eq!(rate_joint(&reference, &pi, &params, 1e-9).unwrap(), RateValue::finite(0.0));

        let tol = 1e-6;
        let mut bumped = pi.masses().to_vec();
        bumped[0] += 10.0 * tol;
        let bumped = BinnedPairMeasure::new(layout.clone(), bumped).unwrap();
        assert!(!rate_joint(&reference, &bumped, &params, tol).unwrap().finite);

        let w = random_probability(&layout, 3);
        let on_manifold = product_reference(&w, &params).unwrap();
        let r = rate_joint(&w, &on_manifold, &params, tol).unwrap();
        assert!(r.finite);
        assert_eq!(r.value, relative_entropy(&w, &reference).unwrap());
    }

    #[test]
    fn rate_joint_only_loses_finiteness_as_tol_shrinks() {
        let (params, layout) = setup(1.0);
        let w = random_probability(&layout, 4);
        let mut masses = product_reference(&w, &params).unwrap().masses().to_vec();
        masses[5] += 3e-4;
        let n = layout.len();
        let (a, b) = (5 / n, 5 % n);
        masses[b * n + a] = masses[a * n + b];
        let pi = BinnedPairMeasure::new(layout, masses).unwrap();
        let mut seen_infinite = false;
        for tol in [1e-2, 1e-3, 1e-4, 1e-5] {
            let finite = rate_joint(&w, &pi, &params, tol).unwrap().finite;
            assert!(!(seen_infinite && finite));
            seen_infinite |= !finite;
        }
        assert!(seen_infinite);
    }

    #[test]
    fn spectral_potential_properties() {
        let (params, layout) = setup(1.0);
        let w = random_probability(&layout, 5);
        let n = layout.len();
        let reference = product_reference(&w, &params).unwrap();
        assert_eq!(spectral_potential(&vec![0.0; n * n], &w, &params).unwrap(), 0.0);
        let one = spectral_potential(&vec![1.0; n * n], &w, &params).unwrap();
        assert!((one - reference.total()).abs() < 1e-15);

        let mut rng = stream(6, 0);
        let mut sym = || {
            let mut g = vec![0.0; n * n];
            for a in 0..n {
                for b in a..n {
                    let v = rng.random::<f64>() * 2.0 - 1.0;
                    g[a * n + b] = v;
                    g[b * n + a] = v;
                }
            }
            g
        };
        let (g1, g2) = (sym(), sym());
        let c = 0.37;
        let mix: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| c * a + b).collect();
        let lhs = spectral_potential(&mix, &w, &params).unwrap();
        let rhs = c * spectral_potential(&g1, &w, &params).unwrap() + spectral_potential(&g2, &w, &params).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let shifted: Vec<f64> = g1.iter().map(|v| v + 0.5).collect();
        let u1 = spectral_potential(&g1, &w, &params).unwrap();
        assert!((spectral_potential(&shifted, &w, &params).unwrap() - (u1 + 0.5 * reference.total())).abs() < 1e-12);
        let larger: Vec<f64> = g1.iter().map(|v| v.max(0.2)).collect();
        assert!(spectral_potential(&larger, &w, &params).unwrap() >= u1);

        let mut asym = g1.clone();
        asym[1] += 0.1;
        assert!(spectral_potential(&asym, &w, &params).unwrap_err().is_usage());
    }

    #[test]
    fn kullback_action_closed_form_and_optimizer() {
        let (params, layout) = setup(1.0);
        let w = random_probability(&layout, 7);
        let reference = product_reference(&w, &params).unwrap();
        for bound in [0.5, 1.0, 7.0] {
            assert_eq!(kullback_action(&w, &reference, bound, &params).unwrap(), 0.0);
        }
        let n = layout.len();
        let mut masses = reference.masses().to_vec();
        masses[0] += 0.01;
        masses[n + 2] += 0.002;
        masses[2 * n + 1] += 0.002;
        let pi = BinnedPairMeasure::new(layout, masses).unwrap();
        let oracle: f64 = pi.masses().iter().zip(reference.masses()).map(|(a, b)| (a - b).abs()).sum();
        for bound in [0.5, 1.0, 7.0] {
            let v = kullback_action(&w, &pi, bound, &params).unwrap();
            assert!((v - bound * oracle).abs() < 1e-12);
            // g* = M sign(π − ρ) attains the supremum
            let g: Vec<f64> = pi
                .masses()
                .iter()
                .zip(reference.masses())
                .map(|(a, b)| bound * (a - b).signum() * if a == b { 0.0 } else { 1.0 })
                .collect();
            let dual = g.iter().zip(pi.masses()).map(|(x, y)| x * y).sum::<f64>() - spectral_potential(&g, &w, &params).unwrap();
            assert!((dual - v).abs() < 1e-12);
        }
        assert_eq!(kullback_action_l1(&pi, &reference, f64::INFINITY).unwrap(), f64::INFINITY);
        assert_eq!(kullback_action_l1(&reference, &reference, f64::INFINITY).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn kullback_action_is_convex_in_pi(seed in 0u64..200, t1 in 0.0f64..0.01, t2 in 0.0f64..0.01) {
            let (params, layout) = setup(1.0);
            let w = random_probability(&layout, seed);
            let base = product_reference(&w, &params).unwrap().masses().to_vec();
            let n = layout.len();
            let bump = |t: f64, a: usize, b: usize| {
                let mut m = base.clone();
                m[a * n + b] += t;
                if a != b { m[b * n + a] += t; }
                BinnedPairMeasure::new(layout.clone(), m).unwrap()
            };
            let p1 = bump(t1, 0, 1);
            let p2 = bump(t2, 2, 2);
            let mid = BinnedPairMeasure::new(layout.clone(), p1.masses().iter().zip(p2.masses()).map(|(a, b)| 0.5 * (a + b)).collect()).unwrap();
            let k = |p: &BinnedPairMeasure| kullback_action(&w, p, 2.0, &params).unwrap();
            prop_assert!(k(&mid) <= 0.5 * k(&p1) + 0.5 * k(&p2) + 1e-12);
        }

        #[test]
        fn coarsened_rate_never_exceeds_fine_rate(seed in 0u64..200) {
            let (params, layout) = setup(1.0);
            let w = random_probability(&layout, seed);
            let reference = reference_measure(&layout, params.law()).unwrap();
            let groups = vec![vec![0, 1, 2], vec![3, 4], vec![5, 6, 7]];
            let fine = rate_i1(&w, &reference).unwrap().value;
            let coarse = rate_i1(&coarsen(&w, &groups).unwrap(), &coarsen(&reference, &groups).unwrap()).unwrap().value;
            prop_assert!(coarse <= fine + 1e-12);
        }
    }
}
