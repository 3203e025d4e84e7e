//! Axis-aligned boxes used for initial sets and admissible control sets.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{random_sign, uniform_around};

/// `{ center + diag(half_width) * s : s in [-1, 1]^n }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    #[serde(with = "crate::io::vector")]
    pub center: DVector<f64>,
    #[serde(with = "crate::io::vector")]
    pub half_width: DVector<f64>,
}

impl BoxSet {
    pub fn new(center: DVector<f64>, half_width: DVector<f64>) -> Result<Self> {
        if center.len() != half_width.len() {
            return Err(Error::Shape(format!(
                "box center has {} entries but half-width has {}",
                center.len(),
                half_width.len()
            )));
        }
        if half_width.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::Config("box half-widths must be finite and non-negative".into()));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("box center must be finite".into()));
        }
        Ok(Self { center, half_width })
    }

    pub fn from_slices(center: &[f64], half_width: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(center), DVector::from_column_slice(half_width))
    }

    /// Box centred at the origin.
    pub fn symmetric(half_width: &[f64]) -> Result<Self> {
        Self::new(DVector::zeros(half_width.len()), DVector::from_column_slice(half_width))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self) -> DVector<f64> {
        &self.center - &self.half_width
    }

    pub fn upper(&self) -> DVector<f64> {
        &self.center + &self.half_width
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter()
            .zip(self.center.iter().zip(self.half_width.iter()))
            .all(|(v, (c, h))| (v - c).abs() <= h + tol)
    }

    /// Maximiser of `<direction, x>` over the box. Zero direction components
    /// select the center coordinate.
    pub fn support_point(&self, direction: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|j| self.center[j] + self.half_width[j] * sign0(direction[j])),
        )
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|j| uniform_around(rng, self.center[j], self.half_width[j])),
        )
    }

    /// Uniform draw over the `2^n` vertices.
    pub fn sample_vertex<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|j| self.center[j] + self.half_width[j] * random_sign(rng)),
        )
    }

    /// All `2^n` vertices, in binary counting order over the axes.
    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                DVector::from_iterator(
                    n,
                    (0..n).map(|j| {
                        let s = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                        self.center[j] + s * self.half_width[j]
                    }),
                )
            })
            .collect()
    }
}

/// Sign with `sign0(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A box whose center may move with the discrete time index `k`.
pub trait InputSet: Sync {
    fn box_at(&self, k: usize) -> BoxSet;
}

impl InputSet for BoxSet {
    fn box_at(&self, _k: usize) -> BoxSet {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};

    #[test]
    fn rejects_negative_width() {
        assert!(BoxSet::from_slices(&[0.0], &[-1.0]).is_err());
        assert!(BoxSet::from_slices(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn support_point_uses_center_on_ties() {
        let b = BoxSet::from_slices(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]).unwrap();
        let p = b.support_point(&DVector::from_vec(vec![1.0, 0.0, -3.0]));
        assert_eq!(p.as_slice(), &[1.5, 2.0, 2.5]);
    }

    #[test]
    fn vertices_and_samples_stay_inside() {
        let b = BoxSet::from_slices(&[0.0, 1.0], &[1.0, 0.25]).unwrap();
        let vs = b.vertices();
        assert_eq!(vs.len(), 4);
        let mut rng = substream(0, Domain::Test, 0);
        for _ in 0..1000 {
            assert!(b.contains(&b.sample_uniform(&mut rng), 0.0));
            let v = b.sample_vertex(&mut rng);
            assert!(vs.contains(&v));
        }
    }
}
