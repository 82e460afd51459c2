//! Discrete Finsler differential operators on grid fields.
//!
//! The differential uses second-order periodic central differences; the
//! gradient is the pointwise Legendre transform of the differential; the
//! divergence is in flux form div V = (1/σ) Σ ∂_i(σ V^i), which telescopes
//! exactly on the periodic grid and makes every Laplacian integral vanish to
//! round-off. The nonlinear Finsler Laplacian is the composition.

use crate::curvature::{self, EffectiveDim};
use crate::error::{FinslerError, Result};
use crate::grid::{CovectorField, ScalarField, VectorField};
use crate::linalg::{self, Vec3, ZERO_VEC};
use crate::measure::MeasureField;
use crate::metric::FinslerStructure;
use rayon::prelude::*;

/// Differentials below this Euclidean norm are treated as vanishing and the
/// gradient is set to zero (the convention off M_u).
pub const GRAD_EPS: f64 = 1e-10;

/// Hessian-dependent quantities are only evaluated where ‖du‖ exceeds this.
pub const HESSIAN_MASK_EPS: f64 = 1e-6;

/// du by second-order periodic central differences.
pub fn differential(u: &ScalarField) -> CovectorField {
    let grid = u.grid;
    let n = grid.dim;
    let h = grid.spacing();
    let mut out = VectorField::zeros(grid, u.t);
    for idx in 0..grid.node_count() {
        let mut d = ZERO_VEC;
        for ax in 0..n {
            let p = u.data[grid.shift(idx, ax, 1)];
            let m = u.data[grid.shift(idx, ax, -1)];
            d[ax] = (p - m) / (2.0 * h);
        }
        out.set(idx, &d);
    }
    out
}

/// ∇u = L*(du) per node; differentials below [`GRAD_EPS`] map to zero.
pub fn gradient_field(metric: &FinslerStructure, u: &ScalarField) -> Result<VectorField> {
    let du = differential(u);
    gradient_from_differential(metric, &du)
}

pub fn gradient_from_differential(
    metric: &FinslerStructure,
    du: &CovectorField,
) -> Result<VectorField> {
    let grid = du.grid;
    let n = grid.dim;
    let data: Vec<Result<Vec3>> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let xi = du.get(idx);
            if linalg::norm(n, &xi) < GRAD_EPS {
                return Ok(ZERO_VEC);
            }
            metric
                .legendre_dual(&grid.position(idx), &xi)
                .map_err(|e| {
                    FinslerError::Numerical {
                        what: format!("legendre transform failed at node {idx}: {e}"),
                        iterations: 0,
                        residual: f64::NAN,
                    }
                })
        })
        .collect();
    let mut out = VectorField::zeros(grid, du.t);
    for (idx, v) in data.into_iter().enumerate() {
        out.set(idx, &v?);
    }
    Ok(out)
}

/// Flux-form divergence (1/σ) Σ ∂_i(σ V^i) with central differences.
pub fn divergence(measure: &MeasureField, v: &VectorField) -> ScalarField {
    let grid = v.grid;
    let n = grid.dim;
    let h = grid.spacing();
    let sigma: Vec<f64> = (0..grid.node_count())
        .map(|i| measure.density_at_node(i))
        .collect();
    let data: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let mut s = 0.0;
            for ax in 0..n {
                let p = grid.shift(idx, ax, 1);
                let m = grid.shift(idx, ax, -1);
                s += (sigma[p] * v.get(p)[ax] - sigma[m] * v.get(m)[ax]) / (2.0 * h);
            }
            s / sigma[idx]
        })
        .collect();
    ScalarField {
        grid,
        data,
        t: v.t,
    }
}

/// Nonlinear Finsler Laplacian Δu = div(∇u).
pub fn finsler_laplacian(
    metric: &FinslerStructure,
    measure: &MeasureField,
    u: &ScalarField,
) -> Result<ScalarField> {
    let grad = gradient_field(metric, u)?;
    Ok(divergence(measure, &grad))
}

/// Weighted gradient ∇^V u = g^{ij}(V) ∂_j u ∂_i on M_V, zero where V
/// vanishes.
pub fn weighted_gradient(
    metric: &FinslerStructure,
    v_field: &VectorField,
    u: &ScalarField,
) -> Result<VectorField> {
    let grid = u.grid;
    let n = grid.dim;
    let du = differential(u);
    let mut out = VectorField::zeros(grid, u.t);
    for idx in 0..grid.node_count() {
        let v = v_field.get(idx);
        if linalg::norm(n, &v) < crate::metric::ZERO_VECTOR_EPS {
            continue;
        }
        let x = grid.position(idx);
        let g = metric.fundamental_tensor_unchecked(&x, &v);
        let ginv = linalg::inverse(n, &g).ok_or_else(|| {
            FinslerError::StrongConvexity(format!(
                "singular fundamental tensor in weighted gradient at node {idx}"
            ))
        })?;
        out.set(idx, &linalg::mat_vec(n, &ginv, &du.get(idx)));
    }
    Ok(out)
}

/// Weighted Laplacian Δ^V u = div(∇^V u); linear in u for fixed V.
pub fn weighted_laplacian(
    metric: &FinslerStructure,
    measure: &MeasureField,
    v_field: &VectorField,
    u: &ScalarField,
) -> Result<ScalarField> {
    let wg = weighted_gradient(metric, v_field, u)?;
    Ok(divergence(measure, &wg))
}

/// Pointwise pairing ξ(V) of a covector field with a vector field.
pub fn contract(cov: &CovectorField, vec: &VectorField) -> ScalarField {
    let grid = cov.grid;
    let n = grid.dim;
    let data = (0..grid.node_count())
        .map(|idx| linalg::dot(n, &cov.get(idx), &vec.get(idx)))
        .collect();
    ScalarField {
        grid,
        data,
        t: cov.t,
    }
}

/// F(∇u)² per node (equal to F*(du)² by the Legendre identity).
pub fn grad_norm_sq(metric: &FinslerStructure, u: &ScalarField) -> Result<ScalarField> {
    let grad = gradient_field(metric, u)?;
    let grid = u.grid;
    let data = (0..grid.node_count())
        .map(|idx| metric.fsq(&grid.position(idx), &grad.get(idx)))
        .collect();
    Ok(ScalarField {
        grid,
        data,
        t: u.t,
    })
}

/// A field defined only on unmasked nodes.
#[derive(Debug, Clone)]
pub struct MaskedField {
    pub grid: crate::grid::TorusGrid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl MaskedField {
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .fold(0.0f64, |a, (v, _)| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .fold(f64::INFINITY, |a, (v, _)| a.min(*v))
    }

    pub fn evaluated_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Hilbert–Schmidt squared norm of the Hessian ∇²u = D^{∇u}∇u in a
/// g_{∇u}-orthonormal frame: g^{ia} g^{jb} H_ij H_ab with
/// H_ij = ∂²u − Γ^k_ij(∇u) ∂_k u. Nodes with ‖du‖ < 1e-6 are masked.
pub fn hessian_norm(metric: &FinslerStructure, u: &ScalarField) -> Result<MaskedField> {
    let grid = u.grid;
    let n = grid.dim;
    let du = differential(u);
    let grad = gradient_from_differential(metric, &du)?;
    let entries: Vec<Result<(f64, bool)>> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            if linalg::norm(n, &du.get(idx)) < HESSIAN_MASK_EPS {
                return Ok((0.0, false));
            }
            let v = grad.get(idx);
            let gamma = curvature::chern_connection(metric, idx, &v)?;
            let hess = curvature::covariant_hessian_at_node(&grid, &u.data, &gamma, idx);
            let x = grid.position(idx);
            let g = metric.fundamental_tensor_unchecked(&x, &v);
            let ginv = linalg::inverse(n, &g).ok_or_else(|| {
                FinslerError::StrongConvexity(format!(
                    "singular fundamental tensor in hessian norm at node {idx}"
                ))
            })?;
            let mut hs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            hs += ginv[i][a] * ginv[j][b] * hess[i][j] * hess[a][b];
                        }
                    }
                }
            }
            Ok((hs, true))
        })
        .collect();
    let mut values = vec![0.0; grid.node_count()];
    let mut mask = vec![false; grid.node_count()];
    for (idx, e) in entries.into_iter().enumerate() {
        let (v, m) = e?;
        values[idx] = v;
        mask[idx] = m;
    }
    Ok(MaskedField { grid, values, mask })
}

/// Trace of the Hessian with respect to g_{∇u} (for the Cauchy–Schwarz
/// check ‖∇²u‖² ≥ (tr ∇²u)²/n).
pub fn hessian_trace(metric: &FinslerStructure, u: &ScalarField) -> Result<MaskedField> {
    let grid = u.grid;
    let n = grid.dim;
    let du = differential(u);
    let grad = gradient_from_differential(metric, &du)?;
    let mut values = vec![0.0; grid.node_count()];
    let mut mask = vec![false; grid.node_count()];
    for idx in 0..grid.node_count() {
        if linalg::norm(n, &du.get(idx)) < HESSIAN_MASK_EPS {
            continue;
        }
        let v = grad.get(idx);
        let gamma = curvature::chern_connection(metric, idx, &v)?;
        let hess = curvature::covariant_hessian_at_node(&grid, &u.data, &gamma, idx);
        let x = grid.position(idx);
        let g = metric.fundamental_tensor_unchecked(&x, &v);
        let ginv = linalg::inverse(n, &g).unwrap();
        let mut tr = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr += ginv[i][j] * hess[j][i];
            }
        }
        values[idx] = tr;
        mask[idx] = true;
    }
    Ok(MaskedField { grid, values, mask })
}

/// Pointwise Bochner–Weitzenböck diagnostics.
#[derive(Debug, Clone)]
pub struct BochnerReport {
    /// Residual of the identity
    /// Δ^{∇u}(F²(∇u)/2) − d(Δu)(∇u) − Ric_∞(∇u) − ‖∇²u‖²_HS.
    pub residual: MaskedField,
    /// Margin of the inequality form:
    /// Δ^{∇u}(F²(∇u)/2) − d(Δu)(∇u) − Ric_N(∇u) − (Δu)²/N.
    pub inequality_margin: MaskedField,
}

/// Evaluate both Bochner–Weitzenböck forms on the unmasked nodes.
pub fn bochner_residual(
    metric: &FinslerStructure,
    measure: &MeasureField,
    u: &ScalarField,
    n_param: EffectiveDim,
) -> Result<BochnerReport> {
    n_param.validate(metric.dim())?;
    let grid = u.grid;
    let n = grid.dim;
    let du = differential(u);
    let grad = gradient_from_differential(metric, &du)?;
    // w = F²(∇u)/2
    let w = ScalarField {
        grid,
        data: (0..grid.node_count())
            .map(|idx| 0.5 * metric.fsq(&grid.position(idx), &grad.get(idx)))
            .collect(),
        t: u.t,
    };
    let lhs1 = weighted_laplacian(metric, measure, &grad, &w)?;
    let lap = divergence(measure, &grad);
    let dlap = differential(&lap);
    let lhs2 = contract(&dlap, &grad);
    let hs = hessian_norm(metric, u)?;
    let entries: Vec<Result<(f64, f64, bool)>> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            if !hs.mask[idx] {
                return Ok((0.0, 0.0, false));
            }
            let x = grid.position(idx);
            let v = grad.get(idx);
            let fsq = metric.fsq(&x, &v);
            let ric = curvature::ricci_scalar(metric, idx, &v)?;
            let (s, s_dot) = curvature::s_curvature(metric, measure, &x, &v)?;
            let lhs = lhs1.data[idx] - lhs2.data[idx];
            // 2-homogeneous weighted Ricci values
            let ric_inf = (ric + s_dot) * fsq;
            let residual = lhs - ric_inf - hs.values[idx];
            let ric_n = match n_param {
                EffectiveDim::Infinite => ric_inf,
                EffectiveDim::Finite(nn) => {
                    if (nn - n as f64).abs() < 1e-12 {
                        if s.abs() / fsq.sqrt() > 1e-8 {
                            f64::NEG_INFINITY
                        } else {
                            ric_inf
                        }
                    } else {
                        ric_inf - s * s / (nn - n as f64)
                    }
                }
            };
            let margin = match n_param {
                EffectiveDim::Infinite => lhs - ric_n,
                EffectiveDim::Finite(nn) => lhs - ric_n - lap.data[idx] * lap.data[idx] / nn,
            };
            Ok((residual, margin, true))
        })
        .collect();
    let mut residual = MaskedField {
        grid,
        values: vec![0.0; grid.node_count()],
        mask: vec![false; grid.node_count()],
    };
    let mut margin = residual.clone();
    for (idx, e) in entries.into_iter().enumerate() {
        let (r, m, ok) = e?;
        residual.values[idx] = r;
        residual.mask[idx] = ok;
        margin.values[idx] = m;
        margin.mask[idx] = ok;
    }
    Ok(BochnerReport {
        residual,
        inequality_margin: margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::TrigScalar;
    use crate::grid::TorusGrid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::TAU;

    fn grid(m: usize) -> TorusGrid {
        TorusGrid::new(2, m, 1.0).unwrap()
    }

    fn mode_field(g: TorusGrid) -> ScalarField {
        ScalarField::from_fn(g, 0.0, |x| 2.0 + 0.5 * (TAU * x[0]).cos() + 0.25 * (TAU * x[1]).sin())
    }

    #[test]
    fn differential_constant_and_mode() {
        let g = grid(32);
        let c = ScalarField::constant(g, 4.2, 0.0);
        let dc = differential(&c);
        assert_eq!(dc.data.iter().fold(0.0f64, |a, v| a.max(v.abs())), 0.0);

        let u = ScalarField::from_fn(g, 0.0, |x| (TAU * x[0]).sin());
        let du = differential(&u);
        let mut worst: f64 = 0.0;
        for idx in 0..g.node_count() {
            let x = g.position(idx);
            worst = worst.max((du.get(idx)[0] - TAU * (TAU * x[0]).cos()).abs());
        }
        assert!(worst < TAU * TAU * TAU / 6.0 * g.spacing() * g.spacing() * 1.1);
    }

    #[test]
    fn differential_linearity_exact() {
        let g = grid(16);
        let u = mode_field(g);
        let v = ScalarField::from_fn(g, 0.0, |x| (TAU * (x[0] + 2.0 * x[1])).cos());
        let combo = ScalarField {
            grid: g,
            data: u
                .data
                .iter()
                .zip(&v.data)
                .map(|(a, b)| 2.5 * a - 1.25 * b)
                .collect(),
            t: 0.0,
        };
        let d_combo = differential(&combo);
        let du = differential(&u);
        let dv = differential(&v);
        for idx in 0..g.node_count() {
            for ax in 0..2 {
                let expect = 2.5 * du.get(idx)[ax] - 1.25 * dv.get(idx)[ax];
                assert_abs_diff_eq!(d_combo.get(idx)[ax], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gradient_euclidean_is_sharp_of_du() {
        let g = grid(16);
        let m = FinslerStructure::euclidean(g);
        let u = mode_field(g);
        let du = differential(&u);
        let grad = gradient_field(&m, &u).unwrap();
        for idx in 0..g.node_count() {
            for ax in 0..2 {
                assert_abs_diff_eq!(grad.get(idx)[ax], du.get(idx)[ax], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gradient_legendre_identities_randers() {
        let g = grid(16);
        let m = FinslerStructure::randers(
            g,
            None,
            [
                TrigScalar::single(0.3, 0.1, [0, 1, 0], 0.3),
                TrigScalar::constant(0.1),
                TrigScalar::constant(0.0),
            ],
        )
        .unwrap();
        let u = mode_field(g);
        let du = differential(&u);
        let grad = gradient_field(&m, &u).unwrap();
        for idx in 0..g.node_count() {
            let x = g.position(idx);
            let xi = du.get(idx);
            let v = grad.get(idx);
            if linalg::norm(2, &xi) < 1e-8 {
                continue;
            }
            let f_grad = m.eval_metric(&x, &v).unwrap();
            let f_dual = m.dual_norm(&x, &xi).unwrap();
            assert_relative_eq!(f_grad, f_dual, epsilon = 1e-8);
            // defining relation du(∇u) = F*(du)²
            assert_relative_eq!(
                linalg::dot(2, &xi, &v),
                f_dual * f_dual,
                epsilon = 1e-8,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn divergence_constant_field_and_telescoping() {
        let g = grid(16);
        let leb = MeasureField::lebesgue(g);
        let v = VectorField::from_fn(g, 0.0, |_| [1.3, -0.7, 0.0]);
        let div = divergence(&leb, &v);
        assert_eq!(div.data.iter().fold(0.0f64, |a, x| a.max(x.abs())), 0.0);

        // random field: integral of the divergence telescopes to zero
        use rand::{Rng as _, SeedableRng as _};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut w = VectorField::zeros(g, 0.0);
        for idx in 0..g.node_count() {
            w.set(
                idx,
                &[rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, 0.0],
            );
        }
        let sigma = MeasureField::custom_log(g, TrigScalar::single(0.0, 0.3, [1, 1, 0], 0.7));
        let div = divergence(&sigma, &w);
        let total = sigma.integrate(&div);
        assert_abs_diff_eq!(total, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn divergence_of_gradient_matches_calculus() {
        let g = grid(64);
        let leb = MeasureField::lebesgue(g);
        let m = FinslerStructure::euclidean(g);
        let u = ScalarField::from_fn(g, 0.0, |x| (TAU * x[0]).sin());
        let lap = finsler_laplacian(&m, &leb, &u).unwrap();
        let mut worst: f64 = 0.0;
        for idx in 0..g.node_count() {
            let x = g.position(idx);
            let expect = -TAU * TAU * (TAU * x[0]).sin();
            worst = worst.max((lap.data[idx] - expect).abs());
        }
        // wide-stencil O(h²)
        assert!(worst < 0.15, "worst {worst}");
    }

    #[test]
    fn laplacian_riemannian_matches_laplace_beltrami_oracle() {
        // Oracle: Δ_g u = (1/√g) Σ_i [∂_i(√g g^{ii}) D₀u + √g g^{ii} D²u]
        // with analytic coefficient derivatives and compact second
        // differences; independent of the gradient/divergence composition.
        let psis = [
            TrigScalar::single(0.0, 0.08, [1, 0, 0], 0.2),
            TrigScalar::single(0.05, 0.06, [0, 1, 0], 1.0),
            TrigScalar::constant(0.0),
        ];
        let mut errs = Vec::new();
        for m_nodes in [16usize, 32] {
            let g = grid(m_nodes);
            let metric = FinslerStructure::riemannian_diagonal(g, psis.clone());
            let vol = MeasureField::riemannian_volume(&metric).unwrap();
            let u = mode_field(g);
            let lap = finsler_laplacian(&metric, &vol, &u).unwrap();
            let h = g.spacing();
            let mut worst: f64 = 0.0;
            for idx in 0..g.node_count() {
                let x = g.position(idx);
                let mut oracle = 0.0;
                let sqrtg = metric.volume_density(&x).unwrap();
                for ax in 0..2 {
                    let psi = &psis[ax];
                    let e2 = (2.0 * psi.eval(&x, 1.0)).exp();
                    // coefficient c = √g g^{aa} = √g e^{-2ψ_a}
                    let c = sqrtg / e2;
                    // analytic ∂_a c
                    let mut dlog = psis[0].grad(&x, 1.0)[ax] + psis[1].grad(&x, 1.0)[ax];
                    dlog -= 2.0 * psi.grad(&x, 1.0)[ax];
                    let dc = c * dlog;
                    let up = u.data[g.shift(idx, ax, 1)];
                    let um = u.data[g.shift(idx, ax, -1)];
                    let u0 = u.data[idx];
                    oracle += dc * (up - um) / (2.0 * h) + c * (up - 2.0 * u0 + um) / (h * h);
                }
                oracle /= sqrtg;
                worst = worst.max((lap.data[idx] - oracle).abs());
            }
            errs.push(worst);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.8, "order {order}, errors {errs:?}");
    }

    #[test]
    fn laplacian_nonlinearity_witness_randers() {
        let g = grid(16);
        let m = FinslerStructure::randers(
            g,
            None,
            [
                TrigScalar::constant(0.4),
                TrigScalar::constant(0.1),
                TrigScalar::constant(0.0),
            ],
        )
        .unwrap();
        let leb = MeasureField::lebesgue(g);
        let u = mode_field(g);
        let lap_u = finsler_laplacian(&m, &leb, &u).unwrap();
        let minus_u = u.map(|v| -v);
        let lap_minus = finsler_laplacian(&m, &leb, &minus_u).unwrap();
        let witness = lap_minus
            .data
            .iter()
            .zip(&lap_u.data)
            .fold(0.0f64, |a, (x, y)| a.max((x + y).abs()));
        assert!(witness > 1e-3, "Finsler Laplacian looks odd-linear: {witness}");
    }

    #[test]
    fn weighted_laplacian_euclidean_and_linearity() {
        let g = grid(16);
        let m = FinslerStructure::euclidean(g);
        let leb = MeasureField::lebesgue(g);
        let u = mode_field(g);
        let v_field = VectorField::from_fn(g, 0.0, |x| [1.0, 0.3 * (TAU * x[0]).cos(), 0.0]);
        let wl = weighted_laplacian(&m, &leb, &v_field, &u).unwrap();
        let flat = finsler_laplacian(&m, &leb, &u).unwrap();
        for idx in 0..g.node_count() {
            assert_abs_diff_eq!(wl.data[idx], flat.data[idx], epsilon = 1e-12);
        }
        // linearity in u for fixed V
        let w = ScalarField::from_fn(g, 0.0, |x| (TAU * (x[0] - x[1])).cos());
        let combo = ScalarField {
            grid: g,
            data: u
                .data
                .iter()
                .zip(&w.data)
                .map(|(a, b)| 3.0 * a + 0.5 * b)
                .collect(),
            t: 0.0,
        };
        let lap_u = weighted_laplacian(&m, &leb, &v_field, &u).unwrap();
        let lap_w = weighted_laplacian(&m, &leb, &v_field, &w).unwrap();
        let lap_c = weighted_laplacian(&m, &leb, &v_field, &combo).unwrap();
        for idx in 0..g.node_count() {
            assert_abs_diff_eq!(
                lap_c.data[idx],
                3.0 * lap_u.data[idx] + 0.5 * lap_w.data[idx],
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn weighted_laplacian_at_gradient_recovers_finsler_laplacian() {
        let g = grid(16);
        let m = FinslerStructure::randers(
            g,
            None,
            [
                TrigScalar::constant(0.3),
                TrigScalar::constant(0.0),
                TrigScalar::constant(0.0),
            ],
        )
        .unwrap();
        let leb = MeasureField::lebesgue(g);
        let u = mode_field(g);
        let grad = gradient_field(&m, &u).unwrap();
        let du = differential(&u);
        let wl = weighted_laplacian(&m, &leb, &grad, &u).unwrap();
        let lap = finsler_laplacian(&m, &leb, &u).unwrap();
        for idx in 0..g.node_count() {
            if linalg::norm(2, &du.get(idx)) > 1e-6 {
                // neighbours with tiny du can pollute the stencil; compare
                // only where the whole stencil is clear of critical points
                let mut clear = true;
                for ax in 0..2 {
                    for dlt in [-1isize, 1] {
                        if linalg::norm(2, &du.get(g.shift(idx, ax, dlt))) <= 1e-6 {
                            clear = false;
                        }
                    }
                }
                if clear {
                    assert_abs_diff_eq!(wl.data[idx], lap.data[idx], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn hessian_norm_quadratic_bump_equals_dimension() {
        let g = grid(32);
        let m = FinslerStructure::euclidean(g);
        let center = [0.5, 0.5, 0.0];
        let u = ScalarField::from_fn(g, 0.0, |x| {
            let d = g.min_image(&linalg::sub(2, x, &center));
            0.5 * linalg::dot(2, &d, &d)
        });
        let hs = hessian_norm(&m, &u).unwrap();
        // evaluate away from the center (masked) and the cut locus
        for idx in 0..g.node_count() {
            let d = g.min_image(&linalg::sub(2, &g.position(idx), &center));
            let r = linalg::norm(2, &d);
            if r > 0.05 && r < 0.2 {
                assert!(hs.mask[idx]);
                assert_abs_diff_eq!(hs.values[idx], 2.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn hessian_norm_cauchy_schwarz_lower_bound() {
        let g = grid(16);
        let m = FinslerStructure::riemannian_diagonal(
            g,
            [
                TrigScalar::single(0.0, 0.1, [1, 0, 0], 0.0),
                TrigScalar::single(0.0, 0.07, [0, 1, 0], 0.5),
                TrigScalar::constant(0.0),
            ],
        );
        let u = mode_field(g);
        let hs = hessian_norm(&m, &u).unwrap();
        let tr = hessian_trace(&m, &u).unwrap();
        for idx in 0..g.node_count() {
            if hs.mask[idx] {
                let bound = tr.values[idx] * tr.values[idx] / 2.0;
                assert!(
                    hs.values[idx] >= bound - 1e-9 * bound.abs().max(1.0),
                    "HS {} < tr²/n {}",
                    hs.values[idx],
                    bound
                );
            }
        }
    }

    #[test]
    fn hessian_norm_riemannian_christoffel_oracle() {
        // Oracle: H_ij = ∂²u − Γ^k_ij ∂_k u with analytic Christoffels of the
        // diagonal metric and plain stencil derivatives of u, HS-normed by
        // the analytic inverse metric.
        let psis = [
            TrigScalar::single(0.0, 0.08, [1, 0, 0], 0.2),
            TrigScalar::single(0.05, 0.06, [0, 1, 0], 1.0),
            TrigScalar::constant(0.0),
        ];
        let g = grid(32);
        let metric = FinslerStructure::riemannian_diagonal(g, psis.clone());
        let u = mode_field(g);
        let hs = hessian_norm(&metric, &u).unwrap();
        let h = g.spacing();
        let mut worst: f64 = 0.0;
        for idx in 0..g.node_count() {
            if !hs.mask[idx] {
                continue;
            }
            let x = g.position(idx);
            // analytic Christoffels for diag(e^{2ψ_1}, e^{2ψ_2}):
            // Γ^k_ij = δ_ki ∂_j ψ_i + δ_kj ∂_i ψ_i − δ_ij e^{2(ψ_i−ψ_k)} ∂_k ψ_i
            let dpsi = [psis[0].grad(&x, 1.0), psis[1].grad(&x, 1.0)];
            let e2 = [
                (2.0 * psis[0].eval(&x, 1.0)).exp(),
                (2.0 * psis[1].eval(&x, 1.0)).exp(),
            ];
            let mut gamma = [[[0.0f64; 2]; 2]; 2];
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = 0.0;
                        if k == i {
                            v += dpsi[i][j];
                        }
                        if k == j {
                            v += dpsi[j][i];
                        }
                        if i == j {
                            v -= e2[i] / e2[k] * dpsi[i][k];
                        }
                        gamma[k][i][j] = v;
                    }
                }
            }
            let mut grad_u = [0.0f64; 2];
            let mut hess_u = [[0.0f64; 2]; 2];
            for ax in 0..2 {
                let p = u.data[g.shift(idx, ax, 1)];
                let mm = u.data[g.shift(idx, ax, -1)];
                grad_u[ax] = (p - mm) / (2.0 * h);
                hess_u[ax][ax] = (p - 2.0 * u.data[idx] + mm) / (h * h);
            }
            let pp = u.data[g.shift(g.shift(idx, 0, 1), 1, 1)];
            let pm = u.data[g.shift(g.shift(idx, 0, 1), 1, -1)];
            let mp = u.data[g.shift(g.shift(idx, 0, -1), 1, 1)];
            let mm2 = u.data[g.shift(g.shift(idx, 0, -1), 1, -1)];
            hess_u[0][1] = (pp - pm - mp + mm2) / (4.0 * h * h);
            hess_u[1][0] = hess_u[0][1];
            let mut oracle = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let mut hij = hess_u[i][j];
                    for k in 0..2 {
                        hij -= gamma[k][i][j] * grad_u[k];
                    }
                    oracle += hij * hij / (e2[i] * e2[j]);
                }
            }
            worst = worst.max((hs.values[idx] - oracle).abs());
        }
        assert!(worst < 0.6, "worst {worst}");
    }

    #[test]
    fn bochner_euclidean_quadratic_residual_zero() {
        let g = grid(32);
        let m = FinslerStructure::euclidean(g);
        let leb = MeasureField::lebesgue(g);
        let center = [0.5, 0.5, 0.0];
        let u = ScalarField::from_fn(g, 0.0, |x| {
            let d = g.min_image(&linalg::sub(2, x, &center));
            0.5 * linalg::dot(2, &d, &d)
        });
        let rep = bochner_residual(&m, &leb, &u, EffectiveDim::Finite(2.0)).unwrap();
        for idx in 0..g.node_count() {
            let d = g.min_image(&linalg::sub(2, &g.position(idx), &center));
            let r = linalg::norm(2, &d);
            if r > 0.05 && r < 0.2 && rep.residual.mask[idx] {
                assert_abs_diff_eq!(rep.residual.values[idx], 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn bochner_riemannian_convergence_and_inequality() {
        let psis = [
            TrigScalar::single(0.0, 0.08, [1, 0, 0], 0.2),
            TrigScalar::single(0.05, 0.06, [0, 1, 0], 1.0),
            TrigScalar::constant(0.0),
        ];
        let mut errs = Vec::new();
        for m_nodes in [16usize, 32] {
            let g = grid(m_nodes);
            let metric = FinslerStructure::riemannian_diagonal(g, psis.clone());
            let vol = MeasureField::riemannian_volume(&metric).unwrap();
            let u = mode_field(g);
            let rep = bochner_residual(&metric, &vol, &u, EffectiveDim::Finite(2.0)).unwrap();
            errs.push(rep.residual.max_abs());
            // inequality margin at N = n with riemannian volume
            let tol = 10.0 * g.spacing() * rep.residual.max_abs().max(1.0);
            assert!(
                rep.inequality_margin.min() >= -tol,
                "margin {} below -{tol}",
                rep.inequality_margin.min()
            );
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 0.9, "order {order}, errors {errs:?}");
    }
}
