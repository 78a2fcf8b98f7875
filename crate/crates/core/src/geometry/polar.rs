//! Integration in polar coordinates about a pole.
//!
//! A convex region is described relative to the pole; every ray from the pole
//! meets it in at most one interval `[r_in, r_out]`. The caller supplies the
//! radial integral over that interval (including the `r^{d-1}` Jacobian) and
//! the angular integral is done adaptively, split at the directions where the
//! interval endpoints switch between faces.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, Estimate, Tolerance};

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Axis-aligned box `[lo, hi]`, one or two dimensions.
    Rect { lo: Vec<f64>, hi: Vec<f64> },
    Disk { center: [f64; 2], radius: f64 },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Rect { lo, .. } => lo.len(),
            Region::Disk { .. } => 2,
        }
    }

    /// Whether the pole (the coordinate origin) lies in the closed region.
    pub fn contains_pole(&self) -> bool {
        match self {
            Region::Rect { lo, hi } => lo.iter().zip(hi).all(|(l, h)| *l <= 0.0 && 0.0 <= *h),
            Region::Disk { center, radius } => center[0].hypot(center[1]) <= *radius,
        }
    }

    /// Parameter interval of the ray `t * dir, t >= 0` inside the region.
    fn ray_interval(&self, dir: &[f64]) -> Option<(f64, f64)> {
        let (r_in, r_out) = match self {
            Region::Rect { lo, hi } => {
                let mut enter = 0.0f64;
                let mut exit = f64::INFINITY;
                for k in 0..lo.len() {
                    if dir[k] == 0.0 {
                        if lo[k] > 0.0 || hi[k] < 0.0 {
                            return None;
                        }
                        continue;
                    }
                    let (t1, t2) = (lo[k] / dir[k], hi[k] / dir[k]);
                    enter = enter.max(t1.min(t2));
                    exit = exit.min(t1.max(t2));
                }
                (enter, exit)
            }
            Region::Disk { center, radius } => {
                let b = dir[0] * center[0] + dir[1] * center[1];
                let c = center[0] * center[0] + center[1] * center[1] - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                ((b - s).max(0.0), b + s)
            }
        };
        (r_out > r_in).then_some((r_in, r_out))
    }

    /// Directions (angles in [0, 2π]) where the ray interval changes form.
    fn angular_breaks(&self) -> Vec<f64> {
        let mut breaks = vec![0.0, 2.0 * PI];
        let norm = |a: f64| if a < 0.0 { a + 2.0 * PI } else { a };
        match self {
            Region::Rect { lo, hi } => {
                for x in [lo[0], hi[0]] {
                    for y in [lo[1], hi[1]] {
                        if x != 0.0 || y != 0.0 {
                            breaks.push(norm(y.atan2(x)));
                        }
                    }
                }
            }
            Region::Disk { center, radius } => {
                let dist = center[0].hypot(center[1]);
                if dist > *radius {
                    let phi = center[1].atan2(center[0]);
                    let half = (radius / dist).asin();
                    breaks.push(norm((phi - half).rem_euclid(2.0 * PI)));
                    breaks.push(norm((phi + half).rem_euclid(2.0 * PI)));
                    breaks.push(norm(phi.rem_euclid(2.0 * PI)));
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }
}

/// `∫_region f(z) dz` where the caller integrates along rays.
///
/// `radial(r_in, r_out, dir)` must return `∫_{r_in}^{r_out} f(r·dir) r^{d-1} dr`.
/// Supported for one- and two-dimensional regions.
pub fn integrate_about<F>(region: &Region, mut radial: F, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64, f64, &[f64]) -> f64,
{
    match region.dim() {
        1 => {
            let mut value = 0.0;
            for dir in [[1.0], [-1.0]] {
                if let Some((a, b)) = region.ray_interval(&dir) {
                    value += radial(a, b, &dir);
                }
            }
            Ok(Estimate { value, error: 0.0 })
        }
        2 => {
            let breaks = region.angular_breaks();
            Ok(integrate_with_breaks(
                |theta| {
                    let dir = [theta.cos(), theta.sin()];
                    match region.ray_interval(&dir) {
                        Some((a, b)) => radial(a, b, &dir),
                        None => 0.0,
                    }
                },
                &breaks,
                tol,
            ))
        }
        d => Err(Error::Unsupported(format!("spatial quadrature in {d} dimensions"))),
    }
}

/// `∫_region |z|^-alpha dz` with the radial part done in closed form.
pub(crate) fn power_integral(region: &Region, alpha: f64) -> Result<Estimate> {
    let d = region.dim();
    if region.contains_pole() && alpha >= d as f64 {
        return Err(Error::Divergent { alpha, dim: d });
    }
    let e = d as f64 - alpha;
    integrate_about(
        region,
        |a, b, _| {
            if e == 0.0 {
                (b / a).ln()
            } else {
                (b.powf(e) - a.powf(e)) / e
            }
        },
        Tolerance::relative(1e-13),
    )
}

/// `∫ |z|^-alpha dz` over the rectangle `[lo, hi]`, which need not contain the origin.
pub fn power_integral_rect(lo: &[f64], hi: &[f64], alpha: f64) -> Result<f64> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch { expected: lo.len(), found: hi.len() });
    }
    if lo.iter().zip(hi).any(|(l, h)| l >= h) {
        return Err(Error::param("rect", "lower corner must be below upper corner"));
    }
    power_integral(&Region::Rect { lo: lo.to_vec(), hi: hi.to_vec() }, alpha).map(|e| e.value)
}
