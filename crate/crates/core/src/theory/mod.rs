//! Analytic side of the model: the connection kernel `R_λ`, its limit `R`,
//! the edge probability `p_λ = exp(−λ R_λ)`, the pair entropy, the graph
//! likelihood and the rate functionals.
//!
//! Every integrand of `R_λ` has the form `κ / (κ + |z − pole|^α)` with
//! `κ = τ_λ(σ)γ_λ(σ)·|x − y|^α`, so all kernel evaluations reduce to
//!
//! ```text
//! Ψ(κ; pole) = ∫_D κ / (κ + |z − pole|^α) dz.
//! ```
//!
//! The displayed formula places the pole at the origin for both terms
//! ([`KernelFrame::Origin`]). [`KernelFrame::Receiver`] places it at the
//! receiving device instead, which is what the interference field seen by a
//! device inside a bounded domain actually integrates. On a periodic box the
//! two coincide.

mod entropy;
mod likelihood;
mod rates;

pub use entropy::{
    binary_entropy, entropy_from_rate, finite_lambda_entropy, pair_distance_expectation, shannon_entropy, DistanceLaw, EntropyEstimate,
    EntropyMethod,
};
pub use likelihood::{conditional_graph_likelihood, log_likelihood_rate, LikelihoodTerms, CLAMP_HIGH, CLAMP_LOW};
pub use rates::{
    kullback_action, kullback_action_l1, product_reference, product_reference_averaged, rate_i1, rate_joint,
    spectral_potential, RateValue,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{integrate_about, q_alpha, DeviceDomain, Shape};
use crate::pointprocess::MarkLaw;
use crate::quadrature::{integrate_with_breaks, Estimate, Tolerance};
use crate::sinr::SinrParams;

/// Where the pole of each `R_λ` integrand sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFrame {
    #[default]
    Origin,
    Receiver,
}

/// Everything the kernel depends on, with `q_α` computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    domain: DeviceDomain,
    sinr: SinrParams,
    law: MarkLaw,
    lambda: f64,
    frame: KernelFrame,
    q_alpha: f64,
}

impl KernelParams {
    /// Fails with [`Error::Divergent`] unless `α < d`.
    pub fn new(domain: DeviceDomain, sinr: SinrParams, law: MarkLaw, lambda: f64) -> Result<Self> {
        sinr.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive and finite"));
        }
        let q = q_alpha(&domain, sinr.alpha())?;
        Ok(KernelParams { domain, sinr, law, lambda, frame: KernelFrame::Origin, q_alpha: q })
    }

    pub fn with_frame(mut self, frame: KernelFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive and finite"));
        }
        Ok(KernelParams { lambda, ..self.clone() })
    }

    pub fn domain(&self) -> &DeviceDomain {
        &self.domain
    }

    pub fn sinr(&self) -> &SinrParams {
        &self.sinr
    }

    pub fn law(&self) -> &MarkLaw {
        &self.law
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn frame(&self) -> KernelFrame {
        self.frame
    }

    pub fn alpha(&self) -> f64 {
        self.sinr.alpha()
    }

    pub fn q_alpha(&self) -> f64 {
        self.q_alpha
    }

    /// Whether `Ψ` is the same for every pole, so one table serves all pairs.
    fn pole_free(&self) -> bool {
        self.frame == KernelFrame::Origin || self.domain.is_periodic()
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch { expected: self.domain.dim(), found: p.len() });
        }
        Ok(())
    }
}

/// Length of the sphere `|z| = r` inside the origin-centered domain, with the
/// radii where it changes form.
fn shell_profile(domain: &DeviceDomain) -> Result<(Box<dyn Fn(f64) -> f64 + Send + Sync>, Vec<f64>)> {
    match (*domain.shape(), domain.dim()) {
        (Shape::Box { side }, 1) => {
            let h = 0.5 * side;
            Ok((Box::new(move |r| if r <= h { 2.0 } else { 0.0 }), vec![0.0, h]))
        }
        (Shape::Box { side }, 2) => {
            let h = 0.5 * side;
            Ok((
                Box::new(move |r: f64| {
                    if r <= h {
                        2.0 * PI * r
                    } else if r < h * 2f64.sqrt() {
                        2.0 * r * (PI - 4.0 * (h / r).acos())
                    } else {
                        0.0
                    }
                }),
                vec![0.0, h, h * 2f64.sqrt()],
            ))
        }
        (Shape::Disk { radius }, _) => Ok((Box::new(move |r| if r <= radius { 2.0 * PI * r } else { 0.0 }), vec![0.0, radius])),
        (_, d) => Err(Error::Unsupported(format!("kernel integrals in {d} dimensions"))),
    }
}

/// Breakpoints `a < … < b` that bracket the scale `κ^{1/α}` of the integrand.
fn scale_breaks(base: &[f64], scale: f64) -> Vec<f64> {
    let (a, b) = (base[0], *base.last().expect("nonempty"));
    let mut pts = base.to_vec();
    for f in [1e-3, 1e-1, 1.0, 1e1, 1e3] {
        let s = scale * f;
        if s > a && s < b {
            pts.push(s);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

const RADIAL_TOL: f64 = 1e-13;

/// `Ψ(κ)` and `Ψ'(κ)` about the origin (or any pole on a periodic box).
pub(crate) fn psi_origin(domain: &DeviceDomain, kappa: f64, alpha: f64) -> Result<(Estimate, Estimate)> {
    let (shell, base) = shell_profile(domain)?;
    if kappa == 0.0 {
        let zero = Estimate { value: 0.0, error: 0.0 };
        let q = q_alpha(domain, alpha)?;
        return Ok((zero, Estimate { value: q, error: 0.0 }));
    }
    let breaks = scale_breaks(&base, kappa.powf(1.0 / alpha));
    let tol = Tolerance::relative(RADIAL_TOL);
    let value = integrate_with_breaks(|r| kappa * shell(r) / (kappa + r.powf(alpha)), &breaks, tol);
    let slope = integrate_with_breaks(
        |r| {
            let ra = r.powf(alpha);
            shell(r) * ra / ((kappa + ra) * (kappa + ra))
        },
        &breaks,
        tol,
    );
    Ok((value, slope))
}

/// `Ψ(κ; pole)` for an arbitrary pole inside the domain, by polar quadrature.
pub(crate) fn psi_about(domain: &DeviceDomain, pole: &[f64], kappa: f64, alpha: f64) -> Result<Estimate> {
    if domain.is_periodic() || pole.iter().all(|p| *p == 0.0) {
        return psi_origin(domain, kappa, alpha).map(|e| e.0);
    }
    if kappa == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let d = domain.dim();
    let region = domain.region_about(pole);
    let scale = kappa.powf(1.0 / alpha);
    integrate_about(
        &region,
        |a, b, _| {
            let breaks = scale_breaks(&[a, b], scale);
            integrate_with_breaks(
                |r| kappa * r.powi(d as i32 - 1) / (kappa + r.powf(alpha)),
                &breaks,
                Tolerance::relative(RADIAL_TOL),
            )
            .value
        },
        Tolerance::relative(1e-11),
    )
}

/// Cubic Hermite table of `ln Ψ` against `ln κ` for one domain and `α`.
///
/// Outside the tabulated range the value is computed directly.
#[derive(Debug, Clone)]
pub struct PsiTable {
    domain: DeviceDomain,
    alpha: f64,
    u0: f64,
    h: f64,
    ln_psi: Vec<f64>,
    slope: Vec<f64>,
}

impl PsiTable {
    pub fn new(domain: &DeviceDomain, alpha: f64, kappa_min: f64, kappa_max: f64, per_decade: usize) -> Result<Self> {
        if !(kappa_min > 0.0 && kappa_max > kappa_min && per_decade > 0) {
            return Err(Error::param("kappa", "need 0 < kappa_min < kappa_max"));
        }
        let u0 = kappa_min.ln();
        let span = kappa_max.ln() - u0;
        let n = ((span / std::f64::consts::LN_10) * per_decade as f64).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let nodes: Vec<Result<(f64, f64)>> = (0..=n)
            .map(|i| {
                let kappa = (u0 + i as f64 * h).exp();
                let (v, dv) = psi_origin(domain, kappa, alpha)?;
                Ok((v.value.ln(), kappa * dv.value / v.value))
            })
            .collect();
        let mut ln_psi = Vec::with_capacity(n + 1);
        let mut slope = Vec::with_capacity(n + 1);
        for node in nodes {
            let (f, s) = node?;
            ln_psi.push(f);
            slope.push(s);
        }
        Ok(PsiTable { domain: domain.clone(), alpha, u0, h, ln_psi, slope })
    }

    pub fn eval(&self, kappa: f64) -> Result<f64> {
        if kappa == 0.0 {
            return Ok(0.0);
        }
        let t = (kappa.ln() - self.u0) / self.h;
        let last = self.ln_psi.len() - 1;
        if !(t >= 0.0 && t <= last as f64) {
            return psi_origin(&self.domain, kappa, self.alpha).map(|e| e.0.value);
        }
        let i = (t.floor() as usize).min(last - 1);
        let s = t - i as f64;
        let (s2, s3) = (s * s, s * s * s);
        let f = (2.0 * s3 - 3.0 * s2 + 1.0) * self.ln_psi[i]
            + (s3 - 2.0 * s2 + s) * self.h * self.slope[i]
            + (-2.0 * s3 + 3.0 * s2) * self.ln_psi[i + 1]
            + (s3 - s2) * self.h * self.slope[i + 1];
        Ok(f.exp())
    }
}

/// Evaluates `λ R_λ` and `p_λ` for many pairs, tabulating `Ψ` when the frame allows.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    params: KernelParams,
    table: Option<PsiTable>,
}

impl KernelEvaluator {
    pub fn new(params: &KernelParams) -> Result<Self> {
        let beta_max = match &params.sinr.beta0 {
            crate::sinr::BaseBeta::Constant { value } => *value,
            crate::sinr::BaseBeta::Table { values, .. } => values.iter().copied().fold(0.0, f64::max),
        };
        let table = if params.pole_free() && beta_max > 0.0 {
            let kappa_max = beta_max / (2.0 * params.lambda) * params.domain.diameter().powf(params.alpha());
            Some(PsiTable::new(&params.domain, params.alpha(), kappa_max * 1e-9, kappa_max * 1.001, 80)?)
        } else {
            None
        };
        Ok(KernelEvaluator { params: params.clone(), table })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    fn psi(&self, pole: &[f64], kappa: f64) -> Result<f64> {
        match &self.table {
            Some(t) => t.eval(kappa),
            None if self.params.pole_free() => psi_origin(&self.params.domain, kappa, self.params.alpha()).map(|e| e.0.value),
            None => psi_about(&self.params.domain, pole, kappa, self.params.alpha()).map(|e| e.value),
        }
    }

    /// `R_λ` between two marked points.
    pub fn r_lambda(&self, x: &[f64], sx: f64, y: &[f64], sy: f64) -> Result<f64> {
        let p = &self.params;
        p.check_point(x)?;
        p.check_point(y)?;
        let dist = p.domain.distance(x, y)?;
        if dist == 0.0 {
            return Ok(0.0);
        }
        let da = dist.powf(p.alpha());
        let kx = p.sinr.tau_gamma(sx, p.lambda) * da;
        let ky = p.sinr.tau_gamma(sy, p.lambda) * da;
        Ok(self.psi(x, kx)? + self.psi(y, ky)?)
    }

    /// `λ R_λ`, the exponent of the edge probability.
    pub fn exponent(&self, x: &[f64], sx: f64, y: &[f64], sy: f64) -> Result<f64> {
        Ok(self.params.lambda * self.r_lambda(x, sx, y, sy)?)
    }
}

/// `R_λ([x, σx], [y, σy])` by adaptive quadrature.
pub fn r_lambda(x: &[f64], sx: f64, y: &[f64], sy: f64, params: &KernelParams) -> Result<f64> {
    r_lambda_estimate(x, sx, y, sy, params).map(|e| e.value)
}

/// As [`r_lambda`], with the quadrature error estimate.
pub fn r_lambda_estimate(x: &[f64], sx: f64, y: &[f64], sy: f64, params: &KernelParams) -> Result<Estimate> {
    params.check_point(x)?;
    params.check_point(y)?;
    let dist = params.domain.distance(x, y)?;
    if dist == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let da = dist.powf(params.alpha());
    let origin = vec![0.0; params.domain.dim()];
    let (px, py) = match params.frame {
        KernelFrame::Origin => (origin.as_slice(), origin.as_slice()),
        KernelFrame::Receiver => (x, y),
    };
    let a = psi_about(&params.domain, px, params.sinr.tau_gamma(sx, params.lambda) * da, params.alpha())?;
    let b = psi_about(&params.domain, py, params.sinr.tau_gamma(sy, params.lambda) * da, params.alpha())?;
    Ok(Estimate { value: a.value + b.value, error: a.error + b.error })
}

/// `p_λ = exp(−λ R_λ)`; the closed form assumes no external noise.
pub fn p_lambda(x: &[f64], sx: f64, y: &[f64], sy: f64, params: &KernelParams) -> Result<f64> {
    if params.sinr.noise != 0.0 {
        return Err(Error::param("noise", "the Laplace-transform formula requires N0 = 0"));
    }
    Ok((-params.lambda * r_lambda(x, sx, y, sy, params)?).exp())
}

/// `R = q_α β(σx, σy) |y − x|^α`.
pub fn r_limit(x: &[f64], sx: f64, y: &[f64], sy: f64, params: &KernelParams) -> Result<f64> {
    params.check_point(x)?;
    params.check_point(y)?;
    let dist = params.domain.distance(x, y)?;
    Ok(r_limit_value(params.sinr.beta(sx, sy), params.q_alpha, dist, params.alpha()))
}

pub fn r_limit_value(beta: f64, q_alpha: f64, dist: f64, alpha: f64) -> f64 {
    q_alpha * beta * dist.powf(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointprocess::stream;
    use crate::sinr::BaseBeta;
    use rand::Rng;

    fn params(domain: DeviceDomain, alpha: f64, beta0: f64, lambda: f64) -> KernelParams {
        KernelParams::new(
            domain,
            SinrParams::new(alpha, BaseBeta::constant(beta0).unwrap()).unwrap(),
            MarkLaw::exponential(1.0).unwrap(),
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn zero_threshold_and_coincident_points() {
        let p = params(DeviceDomain::unit_area_disk(), 1.0, 0.0, 100.0);
        assert_eq!(r_lambda(&[0.1, 0.0], 1.0, &[-0.1, 0.2], 2.0, &p).unwrap(), 0.0);
        assert_eq!(p_lambda(&[0.1, 0.0], 1.0, &[-0.1, 0.2], 2.0, &p).unwrap(), 1.0);
        let p = params(DeviceDomain::unit_area_disk(), 1.0, 1.0, 100.0);
        assert_eq!(r_lambda(&[0.1, 0.0], 1.0, &[0.1, 0.0], 2.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn divergent_exponent_is_rejected() {
        let sinr = SinrParams::new(2.5, BaseBeta::constant(1.0).unwrap()).unwrap();
        let err = KernelParams::new(DeviceDomain::unit_area_disk(), sinr, MarkLaw::exponential(1.0).unwrap(), 10.0);
        assert!(matches!(err, Err(Error::Divergent { .. })));
    }

    #[test]
    fn disk_psi_closed_form() {
        // α = 1 on a disk of radius R: Ψ(κ) = 2πκ[R − κ ln((κ + R)/κ)]
        let radius = 0.7;
        let d = DeviceDomain::disk(radius).unwrap();
        for kappa in [1e-7, 1e-4, 0.01, 0.3, 5.0] {
            let exact = 2.0 * PI * kappa * (radius - kappa * (radius / kappa).ln_1p());
            let got = psi_origin(&d, kappa, 1.0).unwrap().0.value;
            assert!((got - exact).abs() <= 1e-11 * exact, "κ={kappa}: {got} vs {exact}");
        }
        let d1 = DeviceDomain::cube(1, 2.0).unwrap();
        for kappa in [1e-5f64, 0.2, 3.0] {
            // α = 0.5 on [-1, 1]: ∫ κ/(κ + √r) dr over [0,1], twice; substitute r = s²
            let exact = 2.0 * kappa * (2.0 * (1.0 - kappa * (1.0 / kappa).ln_1p()));
            let got = psi_origin(&d1, kappa, 0.5).unwrap().0.value;
            assert!((got - exact).abs() <= 1e-11 * exact, "κ={kappa}: {got} vs {exact}");
        }
    }

    #[test]
    fn square_psi_matches_polar_quadrature() {
        let d = DeviceDomain::cube(2, 1.0).unwrap();
        for kappa in [1e-5, 0.02, 0.9] {
            let shell = psi_origin(&d, kappa, 1.3).unwrap().0.value;
            let polar = {
                let region = d.region_about(&[0.0, 0.0]);
                integrate_about(
                    &region,
                    |a, b, _| {
                        integrate_with_breaks(|r| kappa * r / (kappa + r.powf(1.3)), &scale_breaks(&[a, b], kappa.powf(1.0 / 1.3)), Tolerance::relative(1e-13))
                            .value
                    },
                    Tolerance::relative(1e-12),
                )
                .unwrap()
                .value
            };
            assert!((shell - polar).abs() <= 1e-10 * polar, "κ={kappa}: {shell} vs {polar}");
        }
    }

    #[test]
    fn psi_derivative_matches_finite_difference() {
        let d = DeviceDomain::unit_area_disk();
        let kappa = 0.013;
        let (_, slope) = psi_origin(&d, kappa, 1.0).unwrap();
        let h = kappa * 1e-5;
        let fd = (psi_origin(&d, kappa + h, 1.0).unwrap().0.value - psi_origin(&d, kappa - h, 1.0).unwrap().0.value) / (2.0 * h);
        assert!((slope.value - fd).abs() < 1e-7 * fd.abs());
    }

    #[test]
    fn table_matches_direct_quadrature() {
        for d in [DeviceDomain::unit_area_disk(), DeviceDomain::torus(2, 1.0).unwrap()] {
            let t = PsiTable::new(&d, 1.0, 1e-9, 1.0, 80).unwrap();
            let mut rng = stream(1, 0);
            for _ in 0..200 {
                let kappa = 10f64.powf(-9.0 + 9.0 * rng.random::<f64>());
                let direct = psi_origin(&d, kappa, 1.0).unwrap().0.value;
                let tab = t.eval(kappa).unwrap();
                assert!((tab - direct).abs() <= 1e-9 * direct, "κ={kappa}: {tab} vs {direct}");
            }
        }
    }

    #[test]
    fn r_lambda_matches_monte_carlo_integration() {
        // independent estimate: average the integrand at uniform points of the disk
        let d = DeviceDomain::unit_area_disk();
        let p = params(d.clone(), 1.0, 2.0, 3.0);
        let (x, y, sx, sy) = ([0.15, -0.1], [-0.2, 0.25], 0.7, 1.9);
        let dist = ((x[0] - y[0]) as f64).hypot(x[1] - y[1]);
        let tg = 2.0 / 6.0;
        let mut rng = stream(2, 0);
        let n = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        let mut z = [0.0; 2];
        for _ in 0..n {
            d.sample_uniform(&mut rng, &mut z);
            let r = z[0].hypot(z[1]);
            let v = d.volume() * 2.0 * tg / (tg + r / dist);
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let q = r_lambda(&x, sx, &y, sy, &p).unwrap();
        assert!((q - mean).abs() < 3.0 * se, "{q} vs {mean} ± {se}");
    }

    #[test]
    fn receiver_frame_matches_monte_carlo_integration() {
        let d = DeviceDomain::unit_area_disk();
        let p = params(d.clone(), 1.0, 1.0, 10.0).with_frame(KernelFrame::Receiver);
        let (x, y) = ([0.3, 0.1], [-0.1, -0.3]);
        let dist = (0.4f64).hypot(0.4);
        let tg = 1.0 / 20.0;
        let mut rng = stream(3, 0);
        let n = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        let mut z = [0.0; 2];
        for _ in 0..n {
            d.sample_uniform(&mut rng, &mut z);
            let rx = (z[0] - x[0]).hypot(z[1] - x[1]);
            let ry = (z[0] - y[0]).hypot(z[1] - y[1]);
            let v = d.volume() * (tg / (tg + rx / dist) + tg / (tg + ry / dist));
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let q = r_lambda(&x, 1.0, &y, 1.0, &p).unwrap();
        assert!((q - mean).abs() < 3.0 * se, "{q} vs {mean} ± {se}");
    }

    #[test]
    fn evaluator_agrees_with_direct_kernel() {
        let p = params(DeviceDomain::unit_area_disk(), 1.0, 1.0, 50.0);
        let ev = KernelEvaluator::new(&p).unwrap();
        let (x, y) = ([0.1, 0.2], [-0.3, 0.05]);
        let a = ev.r_lambda(&x, 0.4, &y, 2.0).unwrap();
        let b = r_lambda(&x, 0.4, &y, 2.0, &p).unwrap();
        assert!((a - b).abs() <= 1e-9 * b);
        let pr = p.clone().with_frame(KernelFrame::Receiver);
        let evr = KernelEvaluator::new(&pr).unwrap();
        let c = evr.r_lambda(&x, 0.4, &y, 2.0).unwrap();
        assert!((c - r_lambda(&x, 0.4, &y, 2.0, &pr).unwrap()).abs() <= 1e-12 * c);
        assert!((c - b).abs() > 1e-3 * b, "off-center receivers see a different region");
    }

    #[test]
    fn frames_coincide_on_a_torus() {
        let p = params(DeviceDomain::torus(2, 1.0).unwrap(), 1.5, 1.0, 20.0);
        let (x, y) = ([0.4, -0.45], [-0.45, 0.3]);
        let a = r_lambda(&x, 1.0, &y, 3.0, &p).unwrap();
        let b = r_lambda(&x, 1.0, &y, 3.0, &p.clone().with_frame(KernelFrame::Receiver)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn r_limit_examples() {
        let p = params(DeviceDomain::disk(1.0).unwrap(), 1.0, 1.0, 1.0);
        assert!((p.q_alpha() - 2.0 * PI).abs() < 1e-10);
        let v = r_limit(&[0.0, 0.5], 1.0, &[0.0, -0.5], 2.0, &p).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-10);
        let z = params(DeviceDomain::disk(1.0).unwrap(), 1.0, 0.0, 1.0);
        assert_eq!(r_limit(&[0.0, 0.5], 1.0, &[0.0, -0.5], 2.0, &z).unwrap(), 0.0);
    }

    #[test]
    fn p_lambda_decreases_in_lambda() {
        let base = params(DeviceDomain::unit_area_disk(), 1.0, 1.0, 1.0);
        let mut prev = 1.0;
        for lambda in [1.0, 10.0, 100.0, 1000.0] {
            let p = p_lambda(&[0.1, 0.1], 1.0, &[-0.1, 0.0], 1.0, &base.with_lambda(lambda).unwrap()).unwrap();
            assert!(p > 0.0 && p < prev);
            prev = p;
        }
    }

    #[test]
    fn scaled_kernel_increases_towards_limit() {
        let base = params(DeviceDomain::unit_area_disk(), 1.0, 1.0, 1.0);
        let (x, y) = ([0.2, -0.1], [-0.25, 0.2]);
        let limit = r_limit(&x, 0.5, &y, 1.5, &base).unwrap();
        let mut prev = 0.0;
        for lambda in [1e1, 1e2, 1e3, 1e4, 1e5] {
            let v = lambda * r_lambda(&x, 0.5, &y, 1.5, &base.with_lambda(lambda).unwrap()).unwrap();
            assert!(v > prev && v < limit, "λ={lambda}: {v}");
            prev = v;
        }
        assert!((limit - prev) / limit < 1e-3);
    }

    proptest::proptest! {
        #[test]
        fn kernel_is_nonnegative_and_symmetric(
            x0 in -0.5f64..0.5, x1 in -0.5f64..0.5, y0 in -0.5f64..0.5, y1 in -0.5f64..0.5,
            sx in 0.01f64..5.0, sy in 0.01f64..5.0, lambda in 1.0f64..1e3,
        ) {
            let p = params(DeviceDomain::cube(2, 1.0).unwrap(), 1.2, 0.8, lambda);
            let ev = KernelEvaluator::new(&p).unwrap();
            let a = ev.r_lambda(&[x0, x1], sx, &[y0, y1], sy).unwrap();
            let b = ev.r_lambda(&[y0, y1], sy, &[x0, x1], sx).unwrap();
            proptest::prop_assert!(a >= 0.0);
            proptest::prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
            let pr = (-lambda * a).exp();
            proptest::prop_assert!(pr > 0.0 && pr <= 1.0);
            let l1 = r_limit(&[x0, x1], sx, &[y0, y1], sy, &p).unwrap();
            let l2 = r_limit(&[y0, y1], sy, &[x0, x1], sx, &p).unwrap();
            proptest::prop_assert_eq!(l1, l2);
        }
    }
}
