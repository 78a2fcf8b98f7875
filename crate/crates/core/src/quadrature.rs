//! Adaptive Gauss–Kronrod quadrature on finite intervals.
//!
//! A 7/15-point Gauss–Kronrod pair is applied to every segment; the segment
//! with the largest error estimate is bisected until the summed error meets
//! the requested tolerance. Known kinks or singular points should be passed
//! as breakpoints so that no segment straddles them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value and absolute error estimate of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-10, abs: 1e-300, max_segments: 4000 }
    }
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance { rel, ..Default::default() }
    }
}

/// Single 15-point Kronrod evaluation with the embedded 7-point Gauss error.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Estimate { value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

struct Segment {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Integrates `f` over the ordered breakpoints `points` (at least two).
///
/// The integrand is never evaluated at a breakpoint, so integrable endpoint
/// singularities are allowed.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], tol: Tolerance) -> Estimate {
    debug_assert!(points.len() >= 2);
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let est = gk15(&mut f, w[0], w[1]);
        value += est.value;
        error += est.error;
        heap.push(Segment { a: w[0], b: w[1], est });
    }
    while error > tol.abs.max(tol.rel * value.abs()) && heap.len() < tol.max_segments {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        value += left.value + right.value - worst.est.value;
        error += left.error + right.error - worst.est.error;
        heap.push(Segment { a: worst.a, b: mid, est: left });
        heap.push(Segment { a: mid, b: worst.b, est: right });
    }
    // re-sum to shed accumulated cancellation from the running updates
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    Estimate {
        value: segs.iter().map(|s| s.est.value).sum(),
        error: segs.iter().map(|s| s.est.error).sum(),
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    integrate_with_breaks(f, &[a, b], tol)
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
