//! Damped fixed-point iteration on `(x₁, x₂, y)`.

use crate::error::{Error, Result};
use crate::model::EquilibriumMeans;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointSettings {
    /// Stop once `‖R(z) − z‖₂ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// `z ← (1 − d) z + d R(z)`
    pub damping: f64,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 1.0,
        }
    }
}

impl FixedPointSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("fp_tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("fp_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the iterate trace: the iterate and its residual `‖R(z) − z‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub z: EquilibriumMeans,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointSolution {
    pub z: EquilibriumMeans,
    /// Number of updates applied to the starting point.
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<TraceRow>,
}

pub fn iterate<F>(
    mut map: F,
    start: EquilibriumMeans,
    settings: &FixedPointSettings,
) -> Result<FixedPointSolution>
where
    F: FnMut(&EquilibriumMeans) -> Result<EquilibriumMeans>,
{
    settings.validate()?;
    let mut z = start;
    let mut trace = Vec::new();
    for iter in 0..=settings.max_iter {
        let image = map(&z)?;
        let residual = image.distance(&z);
        trace.push(TraceRow { iter, z, residual });
        if !residual.is_finite() {
            break;
        }
        if residual <= settings.tol {
            return Ok(FixedPointSolution {
                z,
                iterations: iter,
                residual,
                trace,
            });
        }
        if iter < settings.max_iter {
            z = z.blend(&image, settings.damping);
        }
    }
    let last = trace.last().copied();
    Err(Error::NotConverged {
        iterations: last.map_or(0, |r| r.iter),
        residual: last.map_or(f64::NAN, |r| r.residual),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_contraction_converges() {
        let target = EquilibriumMeans::new(1.0, -2.0, 0.5);
        let map = |z: &EquilibriumMeans| {
            Ok(EquilibriumMeans::new(
                0.5 * z.x1 + 0.5 * target.x1,
                0.5 * z.x2 + 0.5 * target.x2,
                0.5 * z.y + 0.5 * target.y,
            ))
        };
        let sol = iterate(map, EquilibriumMeans::ZERO, &FixedPointSettings::default()).unwrap();
        assert!(sol.z.distance(&target) < 1e-9);
        assert!(sol.residual <= 1e-10);
        assert_eq!(sol.trace.len(), sol.iterations + 1);
    }

    #[test]
    fn constant_map_needs_one_update() {
        let c = EquilibriumMeans::new(3.0, 1.0, -1.0);
        let sol = iterate(|_| Ok(c), EquilibriumMeans::ZERO, &FixedPointSettings::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.z, c);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn non_convergence_reports_trace() {
        let flip = |z: &EquilibriumMeans| Ok(EquilibriumMeans::new(1.0 - z.x1, 0.0, 0.0));
        let settings = FixedPointSettings {
            max_iter: 5,
            ..Default::default()
        };
        match iterate(flip, EquilibriumMeans::ZERO, &settings) {
            Err(Error::NotConverged { iterations, residual, trace }) => {
                assert_eq!(iterations, 5);
                assert_eq!(residual, 1.0);
                assert_eq!(trace.len(), 6);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
        // Damping turns the oscillation into a contraction.
        let damped = FixedPointSettings {
            damping: 0.5,
            ..Default::default()
        };
        let sol = iterate(flip, EquilibriumMeans::ZERO, &damped).unwrap();
        assert!((sol.z.x1 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn settings_validation() {
        let bad = FixedPointSettings {
            damping: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = FixedPointSettings {
            tol: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
