//! Reference measures dμ = σ(x) dx on the torus.

use crate::analytic::TrigScalar;
use crate::error::{FinslerError, Result};
use crate::grid::TorusGrid;
use crate::linalg::Vec3;
use crate::metric::FinslerStructure;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Lebesgue,
    RiemannianVolume,
    Custom,
}

/// Positive density field defining dμ = σ(x) dx.
#[derive(Debug, Clone)]
pub struct MeasureField {
    pub grid: TorusGrid,
    pub kind: MeasureKind,
    rep: MeasureRep,
}

#[derive(Debug, Clone)]
enum MeasureRep {
    Constant(f64),
    /// log σ as a trigonometric polynomial (positivity by construction).
    LogTrig(TrigScalar),
    /// σ = √det g of the metric frozen at construction time; evaluated
    /// through that metric's own (exact where analytic) representation.
    MetricVolume(Box<FinslerStructure>),
}

impl MeasureField {
    pub fn lebesgue(grid: TorusGrid) -> Self {
        MeasureField {
            grid,
            kind: MeasureKind::Lebesgue,
            rep: MeasureRep::Constant(1.0),
        }
    }

    /// dμ = √det g(x) dx for a quadratic (Riemannian-class) metric. The
    /// density is frozen at construction; it does not follow later metric
    /// updates.
    pub fn riemannian_volume(metric: &FinslerStructure) -> Result<Self> {
        if !metric.is_quadratic() {
            return Err(FinslerError::UnsupportedFamily(format!(
                "riemannian-volume measure needs a direction-independent tensor, got {}",
                metric.family_name()
            )));
        }
        Ok(MeasureField {
            grid: metric.grid,
            kind: MeasureKind::RiemannianVolume,
            rep: MeasureRep::MetricVolume(Box::new(metric.clone())),
        })
    }

    /// Custom positive density σ = exp(trig).
    pub fn custom_log(grid: TorusGrid, log_sigma: TrigScalar) -> Self {
        MeasureField {
            grid,
            kind: MeasureKind::Custom,
            rep: MeasureRep::LogTrig(log_sigma),
        }
    }

    pub fn density(&self, x: &Vec3) -> f64 {
        match &self.rep {
            MeasureRep::Constant(c) => *c,
            MeasureRep::LogTrig(p) => p.eval(x, self.grid.l).exp(),
            MeasureRep::MetricVolume(m) => m.volume_density(x).expect("quadratic metric"),
        }
    }

    pub fn density_at_node(&self, idx: usize) -> f64 {
        self.density(&self.grid.position(idx))
    }

    /// Native x-gradient of σ.
    pub fn density_gradient(&self, x: &Vec3) -> Vec3 {
        match &self.rep {
            MeasureRep::Constant(_) => [0.0; 3],
            MeasureRep::LogTrig(p) => {
                let s = p.eval(x, self.grid.l).exp();
                let g = p.grad(x, self.grid.l);
                [s * g[0], s * g[1], s * g[2]]
            }
            MeasureRep::MetricVolume(m) => {
                // ∂_k √det g = ½ √det g tr(g^{-1} ∂_k g)
                let n = self.grid.dim;
                let g = m.riemannian_tensor(x).expect("quadratic metric");
                let ginv = crate::linalg::inverse(n, &g).expect("SPD metric");
                let dg = m.dg_dx(x, &[1.0, 0.0, 0.0]);
                let sigma = crate::linalg::det(n, &g).sqrt();
                let mut out = [0.0; 3];
                for k in 0..n {
                    let mut tr = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            tr += ginv[i][j] * dg[k][j][i];
                        }
                    }
                    out[k] = 0.5 * sigma * tr;
                }
                out
            }
        }
    }

    /// ∫ f dμ over the torus (node sum times cell volume).
    pub fn integrate(&self, f: &crate::grid::ScalarField) -> f64 {
        let cell = self.grid.spacing().powi(self.grid.dim as i32);
        let mut s = 0.0;
        for idx in 0..self.grid.node_count() {
            s += f.data[idx] * self.density_at_node(idx);
        }
        s * cell
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;
    use approx::assert_relative_eq;

    #[test]
    fn lebesgue_integrates_constants_exactly() {
        let grid = TorusGrid::new(2, 16, 2.0).unwrap();
        let mu = MeasureField::lebesgue(grid);
        let f = ScalarField::constant(grid, 3.0, 0.0);
        assert_relative_eq!(mu.integrate(&f), 3.0 * 4.0, epsilon = 1e-12);
    }

    #[test]
    fn riemannian_volume_matches_det_sqrt() {
        let grid = TorusGrid::new(2, 16, 1.0).unwrap();
        let phi = TrigScalar::single(0.0, 0.1, [1, 0, 0], 0.0);
        let m = FinslerStructure::conformal(grid, phi.clone());
        let mu = MeasureField::riemannian_volume(&m).unwrap();
        let x = grid.position(5);
        // det(e^{2φ} I) = e^{4φ} in 2-D
        assert_relative_eq!(
            mu.density_at_node(5),
            (2.0 * phi.eval(&x, 1.0)).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn riemannian_volume_rejects_randers() {
        let grid = TorusGrid::new(2, 16, 1.0).unwrap();
        let m = FinslerStructure::randers(
            grid,
            None,
            [
                TrigScalar::constant(0.3),
                TrigScalar::constant(0.0),
                TrigScalar::constant(0.0),
            ],
        )
        .unwrap();
        assert!(MeasureField::riemannian_volume(&m).is_err());
    }
}
