//! Curvature engine: geodesic spray, Ricci curvature and Ricci tensor via
//! the spray-curvature (Jacobi endomorphism) trace, distortion, S-curvature
//! along short geodesics, weighted Ricci curvature, Chern connection
//! coefficients, and curvature-bound extraction over node/direction samples.
//!
//! Tensor assembly at grid nodes differentiates the metric in x with
//! second-order periodic central differences so that curvature errors track
//! the solver's O(h²) budget. Short geodesic integrations (S-curvature) use
//! the metric's native derivatives instead, which are exact for the
//! closed-form families.

use crate::error::{FinslerError, Result};
use crate::grid::{deriv1_5pt, deriv2_5pt, TorusGrid};
use crate::linalg::{self, Mat3, Vec3, ZERO_MAT, ZERO_VEC};
use crate::measure::MeasureField;
use crate::metric::FinslerStructure;
use rayon::prelude::*;

/// Relative step for first/second y-derivatives of the spray.
const SPRAY_Y_STEP_REL: f64 = 1e-2;
/// Relative step for the y-Hessian defining the Ricci tensor.
const RICCI_TENSOR_Y_STEP_REL: f64 = 1e-2;
/// |S|/F above this threshold blocks the N = n branch of Ric_N.
const S_CURV_THRESHOLD: f64 = 1e-8;

/// Extended-real effective dimension N ∈ [n, ∞].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectiveDim {
    Finite(f64),
    Infinite,
}

impl EffectiveDim {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let EffectiveDim::Finite(nn) = self {
            if !nn.is_finite() || *nn < dim as f64 {
                return Err(FinslerError::Domain(format!(
                    "effective dimension N must satisfy N >= n = {dim}, got {nn}"
                )));
            }
        }
        Ok(())
    }
}

/// Spray coefficients G^k(x, y) from native metric derivatives; geodesics
/// satisfy ẍ^k + 2 G^k(x, ẋ) = 0.
pub fn spray_coefficients(metric: &FinslerStructure, x: &Vec3, y: &Vec3) -> Result<Vec3> {
    let n = metric.dim();
    if linalg::norm(n, y) < crate::metric::ZERO_VECTOR_EPS {
        return Err(FinslerError::ZeroVector("spray needs a direction".into()));
    }
    let g = metric.fundamental_tensor_unchecked(x, y);
    let ginv = linalg::inverse(n, &g).ok_or_else(|| {
        FinslerError::StrongConvexity("singular fundamental tensor in spray".into())
    })?;
    let dg = metric.dg_dx(x, y);
    Ok(spray_from_dg(n, &ginv, &dg, y))
}

/// Spray at a grid node with the x-derivatives of g taken by second-order
/// periodic central differences over neighbouring nodes.
pub fn spray_at_node(metric: &FinslerStructure, idx: usize, y: &Vec3) -> Result<Vec3> {
    let n = metric.dim();
    let grid = metric.grid;
    let x = grid.position(idx);
    let g = metric.fundamental_tensor_unchecked(&x, y);
    let ginv = linalg::inverse(n, &g).ok_or_else(|| {
        FinslerError::StrongConvexity("singular fundamental tensor in spray".into())
    })?;
    let dg = stencil_dg(metric, idx, y);
    Ok(spray_from_dg(n, &ginv, &dg, y))
}

fn stencil_dg(metric: &FinslerStructure, idx: usize, y: &Vec3) -> [Mat3; 3] {
    let n = metric.dim();
    let grid = metric.grid;
    let h = grid.spacing();
    let mut dg = [ZERO_MAT; 3];
    for k in 0..n {
        let gp = metric.fundamental_tensor_unchecked(&grid.position(grid.shift(idx, k, 1)), y);
        let gm = metric.fundamental_tensor_unchecked(&grid.position(grid.shift(idx, k, -1)), y);
        for i in 0..n {
            for j in 0..n {
                dg[k][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
            }
        }
    }
    dg
}

fn spray_from_dg(n: usize, ginv: &Mat3, dg: &[Mat3; 3], y: &Vec3) -> Vec3 {
    // G^i = ¼ g^{il} ( 2 ∂_k g_{lj} y^j y^k - ∂_l g_{jk} y^j y^k )
    let mut rhs = ZERO_VEC;
    for l in 0..n {
        let mut s = 0.0;
        for k in 0..n {
            for j in 0..n {
                s += 2.0 * dg[k][l][j] * y[j] * y[k];
            }
        }
        s -= linalg::quad_form(n, &dg[l], y, y);
        rhs[l] = s;
    }
    let mut out = ZERO_VEC;
    for i in 0..n {
        for l in 0..n {
            out[i] += 0.25 * ginv[i][l] * rhs[l];
        }
    }
    out
}

/// Spray with its first and second y-derivatives at a node.
struct SprayJet {
    g: Vec3,
    /// dy[i][k] = ∂G^i/∂y^k
    dy: Mat3,
    /// dyy[i][j][k] = ∂²G^i/∂y^j∂y^k
    dyy: [Mat3; 3],
}

fn spray_jet_at_node(metric: &FinslerStructure, idx: usize, y: &Vec3) -> Result<SprayJet> {
    let n = metric.dim();
    let step = SPRAY_Y_STEP_REL * linalg::norm(n, y);
    let eval = |yy: &Vec3| spray_at_node(metric, idx, yy);
    let center = eval(y)?;
    let mut plus = [ZERO_VEC; 3];
    let mut minus = [ZERO_VEC; 3];
    for k in 0..n {
        let mut yp = *y;
        yp[k] += step;
        let mut ym = *y;
        ym[k] -= step;
        plus[k] = eval(&yp)?;
        minus[k] = eval(&ym)?;
    }
    let mut dy = ZERO_MAT;
    let mut dyy = [ZERO_MAT; 3];
    for i in 0..n {
        for k in 0..n {
            dy[i][k] = (plus[k][i] - minus[k][i]) / (2.0 * step);
            dyy[i][k][k] = (plus[k][i] - 2.0 * center[i] + minus[k][i]) / (step * step);
        }
    }
    for j in 0..n {
        for k in j + 1..n {
            let mut ypp = *y;
            ypp[j] += step;
            ypp[k] += step;
            let mut ypm = *y;
            ypm[j] += step;
            ypm[k] -= step;
            let mut ymp = *y;
            ymp[j] -= step;
            ymp[k] += step;
            let mut ymm = *y;
            ymm[j] -= step;
            ymm[k] -= step;
            let (gpp, gpm, gmp, gmm) = (eval(&ypp)?, eval(&ypm)?, eval(&ymp)?, eval(&ymm)?);
            for i in 0..n {
                let v = (gpp[i] - gpm[i] - gmp[i] + gmm[i]) / (4.0 * step * step);
                dyy[i][j][k] = v;
                dyy[i][k][j] = v;
            }
        }
    }
    Ok(SprayJet {
        g: center,
        dy,
        dyy,
    })
}

/// Spray-curvature endomorphism R^i_k(x, y) at a grid node:
/// R^i_k = 2 ∂G^i/∂x^k − y^j ∂²G^i/∂x^j∂y^k + 2 G^j ∂²G^i/∂y^j∂y^k
///         − ∂G^i/∂y^j ∂G^j/∂y^k.
pub fn spray_curvature_matrix(metric: &FinslerStructure, idx: usize, y: &Vec3) -> Result<Mat3> {
    let n = metric.dim();
    let grid = metric.grid;
    let h = grid.spacing();
    let jet = spray_jet_at_node(metric, idx, y)?;
    let mut jets_p = Vec::with_capacity(n);
    let mut jets_m = Vec::with_capacity(n);
    for ax in 0..n {
        jets_p.push(spray_jet_at_node(metric, grid.shift(idx, ax, 1), y)?);
        jets_m.push(spray_jet_at_node(metric, grid.shift(idx, ax, -1), y)?);
    }
    let mut r = ZERO_MAT;
    for i in 0..n {
        for k in 0..n {
            // 2 ∂G^i/∂x^k
            let mut v = 2.0 * (jets_p[k].g[i] - jets_m[k].g[i]) / (2.0 * h);
            // − y^j ∂_x^j (∂G^i/∂y^k)
            for j in 0..n {
                let mixed = (jets_p[j].dy[i][k] - jets_m[j].dy[i][k]) / (2.0 * h);
                v -= y[j] * mixed;
            }
            // + 2 G^j ∂²G^i/∂y^j∂y^k − ∂G^i/∂y^j ∂G^j/∂y^k
            for j in 0..n {
                v += 2.0 * jet.g[j] * jet.dyy[i][j][k];
                v -= jet.dy[i][j] * jet.dy[j][k];
            }
            r[i][k] = v;
        }
    }
    Ok(r)
}

/// Ricci curvature Ric(y) = trace R / F², zero-homogeneous in y.
pub fn ricci_scalar(metric: &FinslerStructure, idx: usize, y: &Vec3) -> Result<f64> {
    let n = metric.dim();
    let r = spray_curvature_matrix(metric, idx, y)?;
    let x = metric.grid.position(idx);
    let fsq = metric.fsq(&x, y);
    let mut tr = 0.0;
    for i in 0..n {
        tr += r[i][i];
    }
    Ok(tr / fsq)
}

/// F² Ric(y) (the trace of the spray curvature), 2-homogeneous.
fn ricci_trace(metric: &FinslerStructure, idx: usize, y: &Vec3) -> Result<f64> {
    let n = metric.dim();
    let r = spray_curvature_matrix(metric, idx, y)?;
    let mut tr = 0.0;
    for i in 0..n {
        tr += r[i][i];
    }
    Ok(tr)
}

/// Ricci tensor Ric_ij = ½ ∂²(F² Ric)/∂y^i∂y^j at a node, by central
/// differences of the curvature trace in y.
pub fn ricci_tensor(metric: &FinslerStructure, idx: usize, y: &Vec3) -> Result<Mat3> {
    let n = metric.dim();
    if linalg::norm(n, y) < crate::metric::ZERO_VECTOR_EPS {
        return Err(FinslerError::ZeroVector(
            "ricci tensor needs a direction".into(),
        ));
    }
    let step = RICCI_TENSOR_Y_STEP_REL * linalg::norm(n, y);
    let psi = |yy: &Vec3| ricci_trace(metric, idx, yy);
    let center = psi(y)?;
    let mut out = ZERO_MAT;
    let mut plus = ZERO_VEC;
    let mut minus = ZERO_VEC;
    for i in 0..n {
        let mut yp = *y;
        yp[i] += step;
        let mut ym = *y;
        ym[i] -= step;
        plus[i] = psi(&yp)?;
        minus[i] = psi(&ym)?;
        out[i][i] = 0.5 * (plus[i] - 2.0 * center + minus[i]) / (step * step);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut ypp = *y;
            ypp[i] += step;
            ypp[j] += step;
            let mut ypm = *y;
            ypm[i] += step;
            ypm[j] -= step;
            let mut ymp = *y;
            ymp[i] -= step;
            ymp[j] += step;
            let mut ymm = *y;
            ymm[i] -= step;
            ymm[j] -= step;
            let v = 0.5 * (psi(&ypp)? - psi(&ypm)? - psi(&ymp)? + psi(&ymm)?)
                / (4.0 * step * step);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Distortion τ(x, y) = ln(√det g(x,y) / σ(x)).
pub fn distortion(
    metric: &FinslerStructure,
    measure: &MeasureField,
    x: &Vec3,
    y: &Vec3,
) -> Result<f64> {
    let n = metric.dim();
    if linalg::norm(n, y) < crate::metric::ZERO_VECTOR_EPS {
        return Err(FinslerError::ZeroVector(
            "distortion needs a direction".into(),
        ));
    }
    let g = metric.fundamental_tensor_unchecked(x, y);
    let d = linalg::det(n, &g);
    if !(d > 0.0) {
        return Err(FinslerError::StrongConvexity(
            "non-positive metric determinant in distortion".into(),
        ));
    }
    Ok((d.sqrt() / measure.density(x)).ln())
}

/// One RK4 step of the geodesic system ẋ = v, v̇ = −2G(x, v) using native
/// metric derivatives.
fn geodesic_rk4_step(
    metric: &FinslerStructure,
    x: &Vec3,
    v: &Vec3,
    dt: f64,
) -> Result<(Vec3, Vec3)> {
    let n = metric.dim();
    let acc = |xx: &Vec3, vv: &Vec3| -> Result<Vec3> {
        Ok(linalg::scale(n, &spray_coefficients(metric, xx, vv)?, -2.0))
    };
    let k1x = *v;
    let k1v = acc(x, v)?;
    let x2 = linalg::axpy(n, x, dt / 2.0, &k1x);
    let v2 = linalg::axpy(n, v, dt / 2.0, &k1v);
    let k2x = v2;
    let k2v = acc(&x2, &v2)?;
    let x3 = linalg::axpy(n, x, dt / 2.0, &k2x);
    let v3 = linalg::axpy(n, v, dt / 2.0, &k2v);
    let k3x = v3;
    let k3v = acc(&x3, &v3)?;
    let x4 = linalg::axpy(n, x, dt, &k3x);
    let v4 = linalg::axpy(n, v, dt, &k3v);
    let k4x = v4;
    let k4v = acc(&x4, &v4)?;
    let mut xn = *x;
    let mut vn = *v;
    for i in 0..n {
        xn[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        vn[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    }
    Ok((xn, vn))
}

/// S-curvature and its derivative: S = d/dt τ(γ̇(t))|₀ and
/// Ṡ = F⁻² d/dt S(γ(t), γ̇(t))|₀, by integrating the geodesic two tiny RK4
/// steps each way (step 1e-3·h) and applying five-point centered stencils
/// to the sampled distortion.
pub fn s_curvature(
    metric: &FinslerStructure,
    measure: &MeasureField,
    x: &Vec3,
    y: &Vec3,
) -> Result<(f64, f64)> {
    let n = metric.dim();
    if linalg::norm(n, y) < crate::metric::ZERO_VECTOR_EPS {
        return Err(FinslerError::ZeroVector(
            "s-curvature needs a direction".into(),
        ));
    }
    let dt = 1e-3 * metric.grid.spacing();
    let mut tau = [0.0; 5];
    tau[2] = distortion(metric, measure, x, y)?;
    // forward
    let (mut xc, mut vc) = (*x, *y);
    for step in 0..2 {
        let (xn, vn) = geodesic_rk4_step(metric, &xc, &vc, dt)?;
        xc = xn;
        vc = vn;
        tau[3 + step] = distortion(metric, measure, &xc, &vc)?;
    }
    // backward
    let (mut xc, mut vc) = (*x, *y);
    for step in 0..2 {
        let (xn, vn) = geodesic_rk4_step(metric, &xc, &vc, -dt)?;
        xc = xn;
        vc = vn;
        tau[1 - step] = distortion(metric, measure, &xc, &vc)?;
    }
    let s = deriv1_5pt(&tau, dt);
    let fsq = metric.fsq(x, y);
    let s_dot = deriv2_5pt(&tau, dt) / fsq;
    Ok((s, s_dot))
}

/// Weighted Ricci curvature Ric_N(y), zero-homogeneous normalization
/// (the 2-homogeneous value divided by F²). N = n with |S|/F above 1e-8
/// yields the −∞ sentinel.
pub fn weighted_ricci(
    metric: &FinslerStructure,
    measure: &MeasureField,
    n_param: EffectiveDim,
    idx: usize,
    y: &Vec3,
) -> Result<f64> {
    let dim = metric.dim();
    n_param.validate(dim)?;
    let x = metric.grid.position(idx);
    let ric = ricci_scalar(metric, idx, y)?;
    let (s, s_dot) = s_curvature(metric, measure, &x, y)?;
    let f = metric.eval_metric(&x, y)?;
    match n_param {
        EffectiveDim::Infinite => Ok(ric + s_dot),
        EffectiveDim::Finite(nn) => {
            if (nn - dim as f64).abs() < 1e-12 {
                if s.abs() / f > S_CURV_THRESHOLD {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Ok(ric + s_dot)
                }
            } else {
                Ok(ric + s_dot - (s * s) / ((nn - dim as f64) * f * f))
            }
        }
    }
}

/// Chern connection coefficients Γ^k_ij(x, V) at a node.
///
/// Uses δ/δx_i = ∂/∂x_i − N^m_i ∂/∂y^m with N = ∂G/∂y; x-derivatives of g
/// by grid stencils, y-derivatives by finite differences (zero for
/// quadratic families).
pub fn chern_connection(metric: &FinslerStructure, idx: usize, y: &Vec3) -> Result<[Mat3; 3]> {
    let n = metric.dim();
    let x = metric.grid.position(idx);
    let g = metric.fundamental_tensor_unchecked(&x, y);
    let ginv = linalg::inverse(n, &g).ok_or_else(|| {
        FinslerError::StrongConvexity("singular fundamental tensor in chern connection".into())
    })?;
    let dgx = stencil_dg(metric, idx, y);
    let delta = if metric.is_quadratic() {
        dgx
    } else {
        let jet = spray_jet_at_node(metric, idx, y)?;
        let dgy = metric.dg_dy(&x, y);
        let mut d = [ZERO_MAT; 3];
        for i in 0..n {
            for l in 0..n {
                for j in 0..n {
                    let mut v = dgx[i][l][j];
                    for m in 0..n {
                        v -= jet.dy[m][i] * dgy[m][l][j];
                    }
                    d[i][l][j] = v;
                }
            }
        }
        d
    };
    let mut gamma = [ZERO_MAT; 3];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    v += 0.5 * ginv[k][l] * (delta[i][l][j] + delta[j][l][i] - delta[l][i][j]);
                }
                gamma[k][i][j] = v;
            }
        }
    }
    Ok(gamma)
}

/// Levi-Civita Christoffel symbols per node for a quadratic metric,
/// assembled from grid-stencil derivatives of the tensor field.
pub fn christoffel_field(metric: &FinslerStructure) -> Result<Vec<[Mat3; 3]>> {
    if !metric.is_quadratic() {
        return Err(FinslerError::UnsupportedFamily(
            "christoffel field needs a direction-independent tensor".into(),
        ));
    }
    let grid = metric.grid;
    let e1 = [1.0, 0.0, 0.0];
    (0..grid.node_count())
        .into_par_iter()
        .map(|idx| chern_connection(metric, idx, &e1))
        .collect()
}

/// Riemannian Ricci tensor per node from Christoffel stencils:
/// Ric_ij = ∂_k Γ^k_ij − ∂_i Γ^k_kj + Γ^k_kl Γ^l_ij − Γ^k_il Γ^l_kj.
///
/// This is the fast path used by the Ricci flow on quadratic tensor data;
/// the general spray route above remains the implementation for
/// direction-dependent metrics.
pub fn riemannian_ricci_field(metric: &FinslerStructure) -> Result<Vec<Mat3>> {
    let gammas = christoffel_field(metric)?;
    Ok(riemannian_ricci_from_christoffels(&metric.grid, &gammas))
}

pub fn riemannian_ricci_from_christoffels(grid: &TorusGrid, gammas: &[[Mat3; 3]]) -> Vec<Mat3> {
    let n = grid.dim;
    let h = grid.spacing();
    (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let mut ric = ZERO_MAT;
            let gam = &gammas[idx];
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for k in 0..n {
                        let p = grid.shift(idx, k, 1);
                        let m = grid.shift(idx, k, -1);
                        v += (gammas[p][k][i][j] - gammas[m][k][i][j]) / (2.0 * h);
                    }
                    for k in 0..n {
                        let p = grid.shift(idx, i, 1);
                        let m = grid.shift(idx, i, -1);
                        v -= (gammas[p][k][k][j] - gammas[m][k][k][j]) / (2.0 * h);
                    }
                    for k in 0..n {
                        for l in 0..n {
                            v += gam[k][k][l] * gam[l][i][j];
                            v -= gam[k][i][l] * gam[l][k][j];
                        }
                    }
                    ric[i][j] = v;
                }
            }
            // enforce symmetry against stencil noise
            let mut sym = ZERO_MAT;
            for i in 0..n {
                for j in 0..n {
                    sym[i][j] = 0.5 * (ric[i][j] + ric[j][i]);
                }
            }
            sym
        })
        .collect()
}

/// Hessian of a scalar function with respect to a connection:
/// Hess φ_ij = ∂²φ/∂x_i∂x_j − Γ^k_ij ∂_k φ, stencil second derivatives.
pub fn covariant_hessian_at_node(
    grid: &TorusGrid,
    values: &[f64],
    gamma: &[Mat3; 3],
    idx: usize,
) -> Mat3 {
    let n = grid.dim;
    let h = grid.spacing();
    let at = |id: usize| values[id];
    let v0 = at(idx);
    let mut grad = ZERO_VEC;
    let mut hess = ZERO_MAT;
    for ax in 0..n {
        let p = at(grid.shift(idx, ax, 1));
        let m = at(grid.shift(idx, ax, -1));
        grad[ax] = (p - m) / (2.0 * h);
        hess[ax][ax] = (p - 2.0 * v0 + m) / (h * h);
    }
    for ax in 0..n {
        for bx in ax + 1..n {
            let pp = at(grid.shift_vec(idx, &offset2(ax, 1, bx, 1)));
            let pm = at(grid.shift_vec(idx, &offset2(ax, 1, bx, -1)));
            let mp = at(grid.shift_vec(idx, &offset2(ax, -1, bx, 1)));
            let mm = at(grid.shift_vec(idx, &offset2(ax, -1, bx, -1)));
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[ax][bx] = v;
            hess[bx][ax] = v;
        }
    }
    let mut out = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            let mut v = hess[i][j];
            for k in 0..n {
                v -= gamma[k][i][j] * grad[k];
            }
            out[i][j] = v;
        }
    }
    out
}

fn offset2(ax: usize, da: isize, bx: usize, db: isize) -> [isize; 3] {
    let mut o = [0isize; 3];
    o[ax] = da;
    o[bx] = db;
    o
}

/// Curvature sample at one (node, direction) pair, for reporting.
#[derive(Debug, Clone)]
pub struct CurvatureSample {
    pub idx: usize,
    pub y: Vec3,
    pub f: f64,
    pub ric: f64,
    pub ric_ij: Mat3,
    pub tau: f64,
    pub s: f64,
    pub s_dot: f64,
    pub ric_n: f64,
}

pub fn curvature_sample(
    metric: &FinslerStructure,
    measure: &MeasureField,
    n_param: EffectiveDim,
    idx: usize,
    y: &Vec3,
) -> Result<CurvatureSample> {
    let x = metric.grid.position(idx);
    let f = metric.eval_metric(&x, y)?;
    let ric = ricci_scalar(metric, idx, y)?;
    let ric_ij = ricci_tensor(metric, idx, y)?;
    let tau = distortion(metric, measure, &x, y)?;
    let (s, s_dot) = s_curvature(metric, measure, &x, y)?;
    let ric_n = weighted_ricci(metric, measure, n_param, idx, y)?;
    Ok(CurvatureSample {
        idx,
        y: *y,
        f,
        ric,
        ric_ij,
        tau,
        s,
        s_dot,
        ric_n,
    })
}

/// Sampled curvature bounds feeding the estimate hypotheses.
#[derive(Debug, Clone)]
pub struct CurvatureBounds {
    /// min sampled Ric_N (may be −∞ at N = n with nonvanishing S).
    pub k: f64,
    /// Achieving (node, direction index) for `k`.
    pub k_witness: (usize, usize),
    /// max(0, −min eigenvalue of Ric_ij over samples).
    pub k1: f64,
    /// max(0, max eigenvalue of Ric_ij over samples).
    pub k2: f64,
    pub k1_witness: (usize, usize),
    pub k2_witness: (usize, usize),
    /// max(0, −min dσ̃(y)/F(y)); the realized isotropic decompositions all
    /// have σ̃ ≡ 0. `None` when the decomposition is unsupported.
    pub k3: Option<f64>,
    /// max(0, −min eigenvalue of Hess φ relative to g), φ = τ.
    pub k4: Option<f64>,
    pub k4_witness: Option<usize>,
}

/// Sample weighted Ricci and Ricci-tensor extremes over all grid nodes and
/// the given direction quadrature; attach the isotropic S-curvature data
/// (K3, K4) when the family supports the σ̃ ≡ 0, φ = τ decomposition.
pub fn curvature_bounds(
    metric: &FinslerStructure,
    measure: &MeasureField,
    n_param: EffectiveDim,
    directions: &[Vec3],
) -> Result<CurvatureBounds> {
    if directions.is_empty() {
        return Err(FinslerError::Domain(
            "curvature bounds need a nonempty direction sample".into(),
        ));
    }
    n_param.validate(metric.dim())?;
    let n = metric.dim();
    let grid = metric.grid;
    let node_count = grid.node_count();
    // Quadratic families have direction-independent Ric_ij and Ric; a
    // two-direction spot check keeps the scan honest without the full
    // quadrature cost.
    let dirs_eff: Vec<Vec3> = if metric.is_quadratic() {
        directions.iter().take(2).cloned().collect()
    } else {
        directions.to_vec()
    };
    let per_node: Vec<Result<(f64, usize, f64, usize, f64, usize)>> = (0..node_count)
        .into_par_iter()
        .map(|idx| {
            let mut kmin = f64::INFINITY;
            let mut kmin_dir = 0usize;
            let mut eig_min = f64::INFINITY;
            let mut eig_min_dir = 0usize;
            let mut eig_max = f64::NEG_INFINITY;
            let mut eig_max_dir = 0usize;
            for (di, y) in dirs_eff.iter().enumerate() {
                let ric_n = weighted_ricci(metric, measure, n_param, idx, y)?;
                if ric_n < kmin {
                    kmin = ric_n;
                    kmin_dir = di;
                }
                let rt = ricci_tensor(metric, idx, y)?;
                let lo = linalg::sym_eig_min(n, &rt);
                let hi = linalg::sym_eig_max(n, &rt);
                if lo < eig_min {
                    eig_min = lo;
                    eig_min_dir = di;
                }
                if hi > eig_max {
                    eig_max = hi;
                    eig_max_dir = di;
                }
            }
            Ok((kmin, kmin_dir, eig_min, eig_min_dir, eig_max, eig_max_dir))
        })
        .collect();
    let mut k = f64::INFINITY;
    let mut k_witness = (0, 0);
    let mut eig_min = f64::INFINITY;
    let mut k1_witness = (0, 0);
    let mut eig_max = f64::NEG_INFINITY;
    let mut k2_witness = (0, 0);
    for (idx, r) in per_node.into_iter().enumerate() {
        let (kmin, kd, lo, lod, hi, hid) = r?;
        if kmin < k {
            k = kmin;
            k_witness = (idx, kd);
        }
        if lo < eig_min {
            eig_min = lo;
            k1_witness = (idx, lod);
        }
        if hi > eig_max {
            eig_max = hi;
            k2_witness = (idx, hid);
        }
    }
    let (k3, k4, k4_witness) = if metric.is_quadratic() {
        let (k4, witness) = isotropic_k4(metric, measure)?;
        (Some(0.0), Some(k4), Some(witness))
    } else {
        (None, None, None)
    };
    Ok(CurvatureBounds {
        k,
        k_witness,
        k1: (-eig_min).max(0.0),
        k2: eig_max.max(0.0),
        k1_witness,
        k2_witness,
        k3,
        k4,
        k4_witness,
    })
}

/// K4 for the σ̃ ≡ 0, φ = τ isotropic decomposition of a quadratic metric:
/// max(0, −min over nodes of the smallest eigenvalue of Hess τ relative to
/// g). The eigenvalue solve realizes the infimum over all directions.
pub fn isotropic_k4(metric: &FinslerStructure, measure: &MeasureField) -> Result<(f64, usize)> {
    if !metric.is_quadratic() {
        return Err(FinslerError::UnsupportedFamily(
            "isotropic S-curvature data needs direction-independent distortion".into(),
        ));
    }
    let grid = metric.grid;
    let phi = distortion_field(metric, measure)?;
    let gammas = christoffel_field(metric)?;
    let per_node: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let hess = covariant_hessian_at_node(&grid, &phi, &gammas[idx], idx);
            let g = metric
                .riemannian_tensor(&grid.position(idx))
                .expect("quadratic family");
            linalg::sym_gen_eig_min(grid.dim, &hess, &g)
        })
        .collect();
    let mut min_val = f64::INFINITY;
    let mut witness = 0usize;
    for (idx, v) in per_node.iter().enumerate() {
        if *v < min_val {
            min_val = *v;
            witness = idx;
        }
    }
    Ok(((-min_val).max(0.0), witness))
}

/// Distortion τ(x) per node for a quadratic metric (y-independent).
pub fn distortion_field(metric: &FinslerStructure, measure: &MeasureField) -> Result<Vec<f64>> {
    if !metric.is_quadratic() {
        return Err(FinslerError::UnsupportedFamily(
            "distortion field needs a direction-independent tensor".into(),
        ));
    }
    let grid = metric.grid;
    Ok((0..grid.node_count())
        .map(|idx| {
            let x = grid.position(idx);
            let sigma = metric.volume_density(&x).expect("quadratic family");
            (sigma / measure.density_at_node(idx)).ln()
        })
        .collect())
}


#[cfg(test)]
impl MeasureField {
    /// Test helper: riemannian volume without the Result plumbing.
    pub fn riemannianvolume_helper(metric: &FinslerStructure) -> MeasureField {
        MeasureField::riemannian_volume(metric).unwrap()
    }
}
