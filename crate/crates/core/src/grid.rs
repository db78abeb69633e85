//! Uniform spatial grids and their resolution guards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Uniform grid `z_i = z_min + i*h`, `i = 0..n_points`.
///
/// `n_points = round((z_max - z_min)/h) + 1`; the last point is
/// `z_min + (n_points-1)*h`, which may differ from the requested `z_max` by
/// a fraction of a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub h: f64,
    pub n_points: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid bounds must satisfy z_min < z_max, got [{0}, {1}]")]
    EmptyDomain(f64, f64),
    #[error("grid step must be positive, got {0}")]
    BadStep(f64),
    #[error(
        "step h = {h} too coarse: local de Broglie wavelength {lambda:.4} needs h <= {need:.4} \
         (20 points per wavelength)"
    )]
    DeBroglieGuard { h: f64, lambda: f64, need: f64 },
    #[error("step h = {h} too coarse: lattice period {period:.4} needs h <= {need:.4}")]
    PeriodGuard { h: f64, period: f64, need: f64 },
}

impl SpatialGrid {
    pub fn new(z_min: f64, z_max: f64, h: f64) -> Result<Self, GridError> {
        if !(z_min < z_max) {
            return Err(GridError::EmptyDomain(z_min, z_max));
        }
        if !(h > 0.0) {
            return Err(GridError::BadStep(h));
        }
        let n_points = ((z_max - z_min) / h).round() as usize + 1;
        Ok(SpatialGrid { z_min, z_max, h, n_points })
    }

    pub fn point(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.h
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.point(i))
    }

    /// Resolution guard: at least 20 points per local de Broglie wavelength
    /// for the largest local momentum `k_max`, and 20 per lattice period.
    pub fn check_resolution(&self, k_max: f64, lattice_period: f64) -> Result<(), GridError> {
        if k_max > 0.0 {
            let lambda = 2.0 * std::f64::consts::PI / k_max;
            let need = lambda / 20.0;
            if self.h > need {
                return Err(GridError::DeBroglieGuard { h: self.h, lambda, need });
            }
        }
        let need = lattice_period / 20.0;
        if self.h > need {
            return Err(GridError::PeriodGuard { h: self.h, period: lattice_period, need });
        }
        Ok(())
    }

    /// Trapezoid weight of point `i`.
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.h
        } else {
            self.h
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_count_and_values() {
        let g = SpatialGrid::new(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.n_points, 5);
        assert_eq!(g.point(4), 1.0);
    }

    #[test]
    fn resolution_guard_trips() {
        let g = SpatialGrid::new(0.0, 100.0, 0.5).unwrap();
        // q = 3 -> lambda ~ 2.09, need h <= 0.105
        assert!(matches!(g.check_resolution(3.0, 3.6), Err(GridError::DeBroglieGuard { .. })));
        let g = SpatialGrid::new(0.0, 100.0, 0.05).unwrap();
        assert!(g.check_resolution(3.0, 3.6).is_ok());
        assert!(matches!(g.check_resolution(0.1, 0.9), Err(GridError::PeriodGuard { .. })));
    }

    #[test]
    fn rejects_degenerate() {
        assert!(SpatialGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 0.0).is_err());
    }
}
