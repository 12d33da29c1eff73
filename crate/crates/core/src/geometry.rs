//! Euclidean geometry on ℝⁿ: points, distances, geodesics, balls, and the
//! quadrilateral inequality that characterises CAT(0) spaces.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute slack for floating-point comparisons in audits.
pub const DEFAULT_ETA: f64 = 1e-9;

/// A point of ℝⁿ with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn scalar(x: f64) -> Self {
        Vector(vec![x])
    }

    /// Builds a vector without the finiteness check. Callers guarantee the
    /// coordinates come from arithmetic on finite inputs.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn check_dim(&self, other: &Vector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&a| f(a)).collect())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Euclidean distance ‖x − y‖₂.
pub fn distance(x: &Vector, y: &Vector) -> Result<f64> {
    x.check_dim(y)?;
    Ok(dist_unchecked(x, y))
}

pub(crate) fn dist_unchecked(x: &Vector, y: &Vector) -> f64 {
    x.0.iter().zip(&y.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub(crate) fn dist_sq(x: &Vector, y: &Vector) -> f64 {
    x.0.iter().zip(&y.0).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// The point `(1 − t)x + ty` on the segment from `x` to `y`.
pub fn geodesic_point(x: &Vector, y: &Vector, t: f64) -> Result<Vector> {
    x.check_dim(y)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("{t} is outside [0, 1]")));
    }
    Ok(Vector(
        x.0.iter().zip(&y.0).map(|(a, b)| (1.0 - t) * a + t * b).collect(),
    ))
}

/// Right-hand side minus left-hand side of the quadrilateral inequality
/// `d(x,y)² + d(u,v)² ≤ d(x,v)² + d(y,u)² + d(x,u)² + d(y,v)²`.
///
/// Nonnegative (up to rounding) in every CAT(0) space, in particular in ℝⁿ.
pub fn quadrilateral_defect(x: &Vector, y: &Vector, u: &Vector, v: &Vector) -> Result<f64> {
    x.check_dim(y)?;
    x.check_dim(u)?;
    x.check_dim(v)?;
    let lhs = dist_sq(x, y) + dist_sq(u, v);
    let rhs = dist_sq(x, v) + dist_sq(y, u) + dist_sq(x, u) + dist_sq(y, v);
    Ok(rhs - lhs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedBall {
    pub center: Vector,
    pub radius: f64,
}

impl ClosedBall {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", format!("{radius} must be finite and >= 0")));
        }
        Ok(ClosedBall { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &Vector, eta: f64) -> bool {
        dist_unchecked(&self.center, x) <= self.radius + eta
    }

    /// Uniform sample: a normalised Gaussian direction scaled by
    /// `radius · U^(1/n)` with `U` uniform on [0, 1).
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vector {
        let n = self.dim();
        if n == 0 {
            return Vector(Vec::new());
        }
        let dir: Vec<f64> = loop {
            let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-300 {
                break g.into_iter().map(|c| c / norm).collect();
            }
        };
        let u: f64 = rng.random();
        let r = self.radius * u.powf(1.0 / n as f64);
        Vector(self.center.0.iter().zip(dir).map(|(c, d)| c + r * d).collect())
    }

    /// `count` samples from a generator seeded with `seed`.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<Vector> {
        let mut rng = seeded_rng(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }
}

/// The documented generator behind every sampled audit: ChaCha8 seeded
/// through `SeedableRng::seed_from_u64`.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Absolute slack used by comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub eta: f64,
}

impl Tolerance {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", format!("{eta} must be finite and >= 0")));
        }
        Ok(Tolerance { eta })
    }

    /// `value < bound + eta`
    pub fn below(&self, value: f64, bound: f64) -> bool {
        value < bound + self.eta
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { eta: DEFAULT_ETA }
    }
}
