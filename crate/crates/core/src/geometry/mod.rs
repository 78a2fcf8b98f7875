//! Device domains, Euclidean distances, power-law path loss and the singular
//! integral `q_alpha = ∫_D |z|^-alpha dz`.
//!
//! The device measure used by the point process is Lebesgue measure
//! normalized to mass one on the domain. `q_alpha` and every other spatial
//! integral in this module are taken against *unnormalized* Lebesgue measure.

mod polar;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::Estimate;

pub use polar::{integrate_about, power_integral_rect, Region};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Axis-aligned cube `[-side/2, side/2]^d`.
    Box { side: f64 },
    /// Disk of the given radius about the origin; two dimensions only.
    Disk { radius: f64 },
}

/// The region `D ⊂ R^d` that devices live in. Always centered at the origin.
///
/// A periodic box identifies opposite faces, so distances are measured by
/// the minimum-image convention and every point sees the same box around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDomain {
    dim: usize,
    shape: Shape,
    #[serde(default)]
    periodic: bool,
}

impl DeviceDomain {
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be a positive integer"));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::param("side", "must be positive and finite"));
        }
        Ok(DeviceDomain { dim, shape: Shape::Box { side }, periodic: false })
    }

    pub fn torus(dim: usize, side: f64) -> Result<Self> {
        let mut d = Self::cube(dim, side)?;
        d.periodic = true;
        Ok(d)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", "must be positive and finite"));
        }
        Ok(DeviceDomain { dim: 2, shape: Shape::Disk { radius }, periodic: false })
    }

    /// Disk of area one, the reference geometry of the verification suites.
    pub fn unit_area_disk() -> Self {
        DeviceDomain { dim: 2, shape: Shape::Disk { radius: (1.0 / PI).sqrt() }, periodic: false }
    }

    pub fn new(dim: usize, shape: Shape, periodic: bool) -> Result<Self> {
        match shape {
            Shape::Box { side } if periodic => Self::torus(dim, side),
            Shape::Box { side } => Self::cube(dim, side),
            Shape::Disk { radius } => {
                if dim != 2 {
                    return Err(Error::param("dim", "disk domains are two-dimensional"));
                }
                if periodic {
                    return Err(Error::param("periodic", "only box domains can be periodic"));
                }
                Self::disk(radius)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Box { side } => side.powi(self.dim as i32),
            Shape::Disk { radius } => PI * radius * radius,
        }
    }

    /// Largest possible distance between two points of the domain.
    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Box { side } if self.periodic => 0.5 * side * (self.dim as f64).sqrt(),
            Shape::Box { side } => side * (self.dim as f64).sqrt(),
            Shape::Disk { radius } => 2.0 * radius,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim {
            return false;
        }
        match self.shape {
            Shape::Box { side } => p.iter().all(|x| x.abs() <= 0.5 * side),
            Shape::Disk { radius } => p[0] * p[0] + p[1] * p[1] <= radius * radius,
        }
    }

    /// Writes one uniformly distributed point into `out`.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.shape {
            Shape::Box { side } => {
                for x in out.iter_mut() {
                    *x = side * (rng.random::<f64>() - 0.5);
                }
            }
            Shape::Disk { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                out[0] = r * theta.cos();
                out[1] = r * theta.sin();
            }
        }
    }

    /// Distance between two points of the domain, minimum-image when periodic.
    pub fn distance(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        check_dims(self.dim, p)?;
        check_dims(self.dim, q)?;
        Ok(self.dist2(p, q).sqrt())
    }

    pub(crate) fn dist2(&self, p: &[f64], q: &[f64]) -> f64 {
        match self.shape {
            Shape::Box { side } if self.periodic => p
                .iter()
                .zip(q)
                .map(|(a, b)| {
                    let mut d = (a - b).abs();
                    if d > 0.5 * side {
                        d = side - d;
                    }
                    d * d
                })
                .sum(),
            _ => p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(),
        }
    }

    /// The integration region seen from `pole`, in coordinates relative to it.
    pub(crate) fn region_about(&self, pole: &[f64]) -> Region {
        match self.shape {
            Shape::Box { side } if self.periodic => Region::Rect {
                lo: vec![-0.5 * side; self.dim],
                hi: vec![0.5 * side; self.dim],
            },
            Shape::Box { side } => Region::Rect {
                lo: pole.iter().map(|p| -0.5 * side - p).collect(),
                hi: pole.iter().map(|p| 0.5 * side - p).collect(),
            },
            Shape::Disk { radius } => Region::Disk { center: [-pole[0], -pole[1]], radius },
        }
    }
}

fn check_dims(dim: usize, p: &[f64]) -> Result<()> {
    if p.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
    }
    Ok(())
}

/// Euclidean distance `|p - q|`.
pub fn distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_dims(p.len(), q)?;
    Ok(p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Power-law path loss `r^-alpha`.
pub fn path_loss(r: f64, alpha: f64) -> Result<f64> {
    PathLoss::new(alpha)?.gain(r)
}

/// Power-law attenuation with exponent `alpha > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    alpha: f64,
}

impl PathLoss {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", "must be positive and finite"));
        }
        Ok(PathLoss { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gain(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::Singularity);
        }
        Ok(r.powf(-self.alpha))
    }

    /// Gain from a squared distance; `r2` must be positive.
    #[inline]
    pub(crate) fn gain_sq(&self, r2: f64) -> f64 {
        if self.alpha == 1.0 {
            1.0 / r2.sqrt()
        } else if self.alpha == 2.0 {
            1.0 / r2
        } else {
            r2.powf(-0.5 * self.alpha)
        }
    }
}

/// `q_alpha = ∫_D |z|^-alpha dz` with respect to unnormalized Lebesgue measure.
pub fn q_alpha(domain: &DeviceDomain, alpha: f64) -> Result<f64> {
    q_alpha_about(domain, &vec![0.0; domain.dim()], alpha).map(|e| e.value)
}

/// `∫_D |z - pole|^-alpha dz`, the same integral seen from an arbitrary point.
pub fn q_alpha_about(domain: &DeviceDomain, pole: &[f64], alpha: f64) -> Result<Estimate> {
    check_dims(domain.dim(), pole)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be nonnegative and finite"));
    }
    let region = domain.region_about(pole);
    polar::power_integral(&region, alpha)
}
