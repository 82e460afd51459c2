//! Finsler metric families on the periodic grid.
//!
//! A [`FinslerStructure`] evaluates F(x,y), its fundamental tensor
//! g_ij(x,y) = ½ ∂²F²/∂y^i∂y^j, native x-derivatives of g, the dual norm
//! F*, and the Legendre transform from covectors to vectors. Families:
//!
//! * `euclidean` — F = |y|;
//! * `riemannian` — F = sqrt(g_ij(x) y^i y^j), diagonal-exponential
//!   closed form or a grid-sampled symmetric tensor;
//! * `conformal-flat` — g = e^{2φ(x)} δ;
//! * `randers` — F = α + β with α a (diagonal) Riemannian norm and β a
//!   one-form with ‖b‖_a < 1.
//!
//! Closed-form families evaluate exactly at any point. Sampled data is
//! extended off the grid by a local quadratic model around the nearest node
//! built from second-order stencils, which keeps short geodesic integrations
//! smooth at desk resolutions.

use crate::analytic::TrigScalar;
use crate::error::{FinslerError, Result};
use crate::grid::TorusGrid;
use crate::linalg::{self, Mat3, Vec3, ZERO_MAT, ZERO_VEC};

/// Vectors shorter than this are treated as the zero section; F is not
/// smooth there by design.
pub const ZERO_VECTOR_EPS: f64 = 1e-12;

/// Randers admissibility margin: construction rejects ‖b‖_a >= 1 - this.
pub const RANDERS_MARGIN: f64 = 1e-6;

// Newton residual target; well inside the 1e-10 contract so that
// quantities divided by the grid spacing stay at the contracted accuracy.
const LEGENDRE_TOL: f64 = 1e-13;
const LEGENDRE_MAX_ITER: usize = 50;

/// Grid-sampled symmetric tensor field, node-major, upper-triangle layout.
#[derive(Debug, Clone)]
pub struct SampledSymField {
    pub grid: TorusGrid,
    comps: Vec<f64>,
}

fn tri_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn tri_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row-major upper triangle
    i * dim - i * (i + 1) / 2 + j
}

impl SampledSymField {
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&Vec3) -> Mat3) -> Self {
        let n = grid.dim;
        let mut comps = vec![0.0; grid.node_count() * tri_len(n)];
        for idx in 0..grid.node_count() {
            let m = f(&grid.position(idx));
            for i in 0..n {
                for j in i..n {
                    comps[idx * tri_len(n) + tri_index(n, i, j)] = m[i][j];
                }
            }
        }
        SampledSymField { grid, comps }
    }

    pub fn get(&self, idx: usize) -> Mat3 {
        let n = self.grid.dim;
        let base = idx * tri_len(n);
        let mut m = ZERO_MAT;
        for i in 0..n {
            for j in i..n {
                let v = self.comps[base + tri_index(n, i, j)];
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn set(&mut self, idx: usize, m: &Mat3) {
        let n = self.grid.dim;
        let base = idx * tri_len(n);
        for i in 0..n {
            for j in i..n {
                self.comps[base + tri_index(n, i, j)] = m[i][j];
            }
        }
    }

    /// Component value together with stencil gradient and Hessian at a node.
    fn component_jet(&self, idx: usize, i: usize, j: usize) -> (f64, Vec3, Mat3) {
        let n = self.grid.dim;
        let h = self.grid.spacing();
        let at = |id: usize| self.comps[id * tri_len(n) + tri_index(n, i, j)];
        let v0 = at(idx);
        let mut grad = ZERO_VEC;
        let mut hess = ZERO_MAT;
        for ax in 0..n {
            let p = at(self.grid.shift(idx, ax, 1));
            let m = at(self.grid.shift(idx, ax, -1));
            grad[ax] = (p - m) / (2.0 * h);
            hess[ax][ax] = (p - 2.0 * v0 + m) / (h * h);
        }
        for ax in 0..n {
            for bx in ax + 1..n {
                let pp = at(self.grid.shift(self.grid.shift(idx, ax, 1), bx, 1));
                let pm = at(self.grid.shift(self.grid.shift(idx, ax, 1), bx, -1));
                let mp = at(self.grid.shift(self.grid.shift(idx, ax, -1), bx, 1));
                let mm = at(self.grid.shift(self.grid.shift(idx, ax, -1), bx, -1));
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                hess[ax][bx] = v;
                hess[bx][ax] = v;
            }
        }
        (v0, grad, hess)
    }

    /// Quadratic-model value at an arbitrary point.
    pub fn taylor_value(&self, x: &Vec3) -> Mat3 {
        let idx = self.grid.nearest_node(x);
        let d = self.grid.min_image(&linalg::sub(3, x, &self.grid.position(idx)));
        let n = self.grid.dim;
        let mut m = ZERO_MAT;
        for i in 0..n {
            for j in i..n {
                let (v0, g, hh) = self.component_jet(idx, i, j);
                let v = v0
                    + linalg::dot(n, &g, &d)
                    + 0.5 * linalg::quad_form(n, &hh, &d, &d);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    /// Componentwise linear interpolation toward `other`.
    pub fn lerp(&self, other: &SampledSymField, theta: f64) -> SampledSymField {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a + theta * (b - a))
            .collect();
        SampledSymField {
            grid: self.grid,
            comps,
        }
    }

    /// Quadratic-model x-derivatives (∂_k g_ij) at an arbitrary point.
    pub fn taylor_grad(&self, x: &Vec3) -> [Mat3; 3] {
        let idx = self.grid.nearest_node(x);
        let d = self.grid.min_image(&linalg::sub(3, x, &self.grid.position(idx)));
        let n = self.grid.dim;
        let mut out = [ZERO_MAT; 3];
        for i in 0..n {
            for j in i..n {
                let (_, g, hh) = self.component_jet(idx, i, j);
                for k in 0..n {
                    let v = g[k] + linalg::dot(n, &hh[k], &d);
                    out[k][i][j] = v;
                    out[k][j][i] = v;
                }
            }
        }
        out
    }
}

/// Grid-sampled scalar with the same quadratic off-grid model.
#[derive(Debug, Clone)]
pub struct SampledScalar {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl SampledScalar {
    fn jet(&self, idx: usize) -> (f64, Vec3, Mat3) {
        let n = self.grid.dim;
        let h = self.grid.spacing();
        let at = |id: usize| self.values[id];
        let v0 = at(idx);
        let mut grad = ZERO_VEC;
        let mut hess = ZERO_MAT;
        for ax in 0..n {
            let p = at(self.grid.shift(idx, ax, 1));
            let m = at(self.grid.shift(idx, ax, -1));
            grad[ax] = (p - m) / (2.0 * h);
            hess[ax][ax] = (p - 2.0 * v0 + m) / (h * h);
        }
        for ax in 0..n {
            for bx in ax + 1..n {
                let pp = at(self.grid.shift(self.grid.shift(idx, ax, 1), bx, 1));
                let pm = at(self.grid.shift(self.grid.shift(idx, ax, 1), bx, -1));
                let mp = at(self.grid.shift(self.grid.shift(idx, ax, -1), bx, 1));
                let mm = at(self.grid.shift(self.grid.shift(idx, ax, -1), bx, -1));
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                hess[ax][bx] = v;
                hess[bx][ax] = v;
            }
        }
        (v0, grad, hess)
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        let idx = self.grid.nearest_node(x);
        let d = self.grid.min_image(&linalg::sub(3, x, &self.grid.position(idx)));
        let n = self.grid.dim;
        let (v0, g, hh) = self.jet(idx);
        v0 + linalg::dot(n, &g, &d) + 0.5 * linalg::quad_form(n, &hh, &d, &d)
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        let idx = self.grid.nearest_node(x);
        let d = self.grid.min_image(&linalg::sub(3, x, &self.grid.position(idx)));
        let n = self.grid.dim;
        let (_, g, hh) = self.jet(idx);
        let mut out = ZERO_VEC;
        for k in 0..n {
            out[k] = g[k] + linalg::dot(n, &hh[k], &d);
        }
        out
    }
}

/// Representation of a y-independent (Riemannian) tensor.
#[derive(Debug, Clone)]
pub enum RiemannianTensor {
    /// g = diag(e^{2ψ_1}, ..., e^{2ψ_n}) with trigonometric ψ_i.
    DiagonalExp([TrigScalar; 3]),
    /// Grid-sampled symmetric tensor (Ricci-flow snapshots).
    Sampled(SampledSymField),
}

/// Conformal factor representation.
#[derive(Debug, Clone)]
pub enum ConformalScalar {
    Analytic(TrigScalar),
    Sampled(SampledScalar),
}

/// Randers data: F = α_a + b·y with diagonal-exponential a (identity when
/// absent) and trigonometric one-form components.
#[derive(Debug, Clone)]
pub struct RandersParams {
    pub a_logs: Option<[TrigScalar; 3]>,
    pub b: [TrigScalar; 3],
}

#[derive(Debug, Clone)]
pub enum MetricFamily {
    Euclidean,
    Riemannian(RiemannianTensor),
    ConformalFlat(ConformalScalar),
    Randers(RandersParams),
}

/// A Finsler metric family instance over a torus grid.
#[derive(Debug, Clone)]
pub struct FinslerStructure {
    pub grid: TorusGrid,
    pub family: MetricFamily,
}

impl FinslerStructure {
    pub fn euclidean(grid: TorusGrid) -> Self {
        FinslerStructure {
            grid,
            family: MetricFamily::Euclidean,
        }
    }

    pub fn riemannian_diagonal(grid: TorusGrid, logs: [TrigScalar; 3]) -> Self {
        FinslerStructure {
            grid,
            family: MetricFamily::Riemannian(RiemannianTensor::DiagonalExp(logs)),
        }
    }

    pub fn riemannian_sampled(grid: TorusGrid, field: SampledSymField) -> Result<Self> {
        for idx in 0..grid.node_count() {
            let g = field.get(idx);
            if !linalg::is_spd(grid.dim, &g) {
                return Err(FinslerError::StrongConvexity(format!(
                    "sampled tensor not positive definite at node {idx}"
                )));
            }
        }
        Ok(FinslerStructure {
            grid,
            family: MetricFamily::Riemannian(RiemannianTensor::Sampled(field)),
        })
    }

    pub fn conformal(grid: TorusGrid, phi: TrigScalar) -> Self {
        FinslerStructure {
            grid,
            family: MetricFamily::ConformalFlat(ConformalScalar::Analytic(phi)),
        }
    }

    pub fn conformal_sampled(grid: TorusGrid, values: Vec<f64>) -> Self {
        FinslerStructure {
            grid,
            family: MetricFamily::ConformalFlat(ConformalScalar::Sampled(SampledScalar {
                grid,
                values,
            })),
        }
    }

    /// Randers metric; rejects data with ‖b‖_a >= 1 - margin at any node.
    pub fn randers(
        grid: TorusGrid,
        a_logs: Option<[TrigScalar; 3]>,
        b: [TrigScalar; 3],
    ) -> Result<Self> {
        let m = FinslerStructure {
            grid,
            family: MetricFamily::Randers(RandersParams { a_logs, b }),
        };
        for idx in 0..grid.node_count() {
            let x = grid.position(idx);
            let norm = m.randers_b_norm(&x);
            if norm >= 1.0 - RANDERS_MARGIN {
                return Err(FinslerError::StrongConvexity(format!(
                    "randers one-form has a-norm {norm:.6} >= {} at node {idx}",
                    1.0 - RANDERS_MARGIN
                )));
            }
        }
        Ok(m)
    }

    fn randers_b_norm(&self, x: &Vec3) -> f64 {
        match &self.family {
            MetricFamily::Randers(p) => {
                let n = self.grid.dim;
                let mut s = 0.0;
                for i in 0..n {
                    let bi = p.b[i].eval(x, self.grid.l);
                    let aii = match &p.a_logs {
                        Some(logs) => (2.0 * logs[i].eval(x, self.grid.l)).exp(),
                        None => 1.0,
                    };
                    // ‖b‖_a² = a^{ij} b_i b_j = b_i² / a_ii for diagonal a
                    s += bi * bi / aii;
                }
                s.sqrt()
            }
            _ => 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn family_name(&self) -> &'static str {
        match &self.family {
            MetricFamily::Euclidean => "euclidean",
            MetricFamily::Riemannian(_) => "riemannian",
            MetricFamily::ConformalFlat(_) => "conformal-flat",
            MetricFamily::Randers(_) => "randers",
        }
    }

    /// True when g_ij does not depend on the direction (Riemannian class).
    pub fn is_quadratic(&self) -> bool {
        !matches!(self.family, MetricFamily::Randers(_))
    }

    /// True when F(x, ·) does not depend on x (locally Minkowski instance).
    pub fn is_locally_minkowski(&self) -> bool {
        match &self.family {
            MetricFamily::Euclidean => true,
            MetricFamily::Riemannian(RiemannianTensor::DiagonalExp(logs)) => {
                logs.iter().all(|l| l.is_constant())
            }
            MetricFamily::Riemannian(RiemannianTensor::Sampled(_)) => false,
            MetricFamily::ConformalFlat(ConformalScalar::Analytic(p)) => p.is_constant(),
            MetricFamily::ConformalFlat(ConformalScalar::Sampled(_)) => false,
            MetricFamily::Randers(p) => {
                p.b.iter().all(|c| c.is_constant())
                    && p.a_logs
                        .as_ref()
                        .map(|ls| ls.iter().all(|l| l.is_constant()))
                        .unwrap_or(true)
            }
        }
    }

    /// The Riemannian tensor at x for quadratic families.
    pub fn riemannian_tensor(&self, x: &Vec3) -> Option<Mat3> {
        let n = self.grid.dim;
        match &self.family {
            MetricFamily::Euclidean => {
                let mut g = ZERO_MAT;
                for i in 0..n {
                    g[i][i] = 1.0;
                }
                Some(g)
            }
            MetricFamily::Riemannian(RiemannianTensor::DiagonalExp(logs)) => {
                let mut g = ZERO_MAT;
                for i in 0..n {
                    g[i][i] = (2.0 * logs[i].eval(x, self.grid.l)).exp();
                }
                Some(g)
            }
            MetricFamily::Riemannian(RiemannianTensor::Sampled(f)) => Some(f.taylor_value(x)),
            MetricFamily::ConformalFlat(phi) => {
                let e2 = (2.0 * self.conformal_phi(phi, x)).exp();
                let mut g = ZERO_MAT;
                for i in 0..n {
                    g[i][i] = e2;
                }
                Some(g)
            }
            MetricFamily::Randers(_) => None,
        }
    }

    fn conformal_phi(&self, rep: &ConformalScalar, x: &Vec3) -> f64 {
        match rep {
            ConformalScalar::Analytic(p) => p.eval(x, self.grid.l),
            ConformalScalar::Sampled(s) => s.value(x),
        }
    }

    /// φ and its native x-gradient for the conformal family.
    pub fn conformal_phi_jet(&self, x: &Vec3) -> Option<(f64, Vec3)> {
        match &self.family {
            MetricFamily::ConformalFlat(rep) => match rep {
                ConformalScalar::Analytic(p) => {
                    Some((p.eval(x, self.grid.l), p.grad(x, self.grid.l)))
                }
                ConformalScalar::Sampled(s) => Some((s.value(x), s.gradient(x))),
            },
            _ => None,
        }
    }

    /// F(x, y); errors on (near-)zero directions.
    pub fn eval_metric(&self, x: &Vec3, y: &Vec3) -> Result<f64> {
        if linalg::norm(self.grid.dim, y) < ZERO_VECTOR_EPS {
            return Err(FinslerError::ZeroVector(
                "metric evaluated on the zero section".into(),
            ));
        }
        Ok(self.fsq(x, y).sqrt())
    }

    /// F(x, y)², defined as 0 at y = 0.
    pub fn fsq(&self, x: &Vec3, y: &Vec3) -> f64 {
        let n = self.grid.dim;
        match &self.family {
            MetricFamily::Euclidean => linalg::dot(n, y, y),
            MetricFamily::Randers(_) => {
                let (alpha, beta) = self.randers_alpha_beta(x, y);
                let f = alpha + beta;
                f * f
            }
            _ => {
                let g = self.riemannian_tensor(x).expect("quadratic family");
                linalg::quad_form(n, &g, y, y)
            }
        }
    }

    fn randers_pieces(&self, x: &Vec3) -> (Vec3, Vec3) {
        // (a_ii diagonal, b_i)
        match &self.family {
            MetricFamily::Randers(p) => {
                let n = self.grid.dim;
                let mut a = ZERO_VEC;
                let mut b = ZERO_VEC;
                for i in 0..n {
                    a[i] = match &p.a_logs {
                        Some(logs) => (2.0 * logs[i].eval(x, self.grid.l)).exp(),
                        None => 1.0,
                    };
                    b[i] = p.b[i].eval(x, self.grid.l);
                }
                (a, b)
            }
            _ => unreachable!("randers_pieces on non-randers family"),
        }
    }

    fn randers_alpha_beta(&self, x: &Vec3, y: &Vec3) -> (f64, f64) {
        let n = self.grid.dim;
        let (a, b) = self.randers_pieces(x);
        let mut a2 = 0.0;
        let mut beta = 0.0;
        for i in 0..n {
            a2 += a[i] * y[i] * y[i];
            beta += b[i] * y[i];
        }
        (a2.sqrt(), beta)
    }

    /// ∂F²/∂y^i = 2 g_ij(x,y) y^j, analytic.
    pub fn d_fsq_dy(&self, x: &Vec3, y: &Vec3) -> Vec3 {
        let n = self.grid.dim;
        match &self.family {
            MetricFamily::Randers(_) => {
                let (a, b) = self.randers_pieces(x);
                let mut alpha2 = 0.0;
                let mut beta = 0.0;
                for i in 0..n {
                    alpha2 += a[i] * y[i] * y[i];
                    beta += b[i] * y[i];
                }
                let alpha = alpha2.sqrt();
                let f = alpha + beta;
                let mut out = ZERO_VEC;
                for i in 0..n {
                    let li = a[i] * y[i] / alpha + b[i];
                    out[i] = 2.0 * f * li;
                }
                out
            }
            _ => {
                let g = self.riemannian_tensor(x).expect("quadratic family");
                linalg::scale(n, &linalg::mat_vec(n, &g, y), 2.0)
            }
        }
    }

    /// Fundamental tensor with a positive-definiteness check.
    pub fn fundamental_tensor(&self, x: &Vec3, y: &Vec3) -> Result<Mat3> {
        if linalg::norm(self.grid.dim, y) < ZERO_VECTOR_EPS {
            return Err(FinslerError::ZeroVector(
                "fundamental tensor needs a nonzero direction".into(),
            ));
        }
        let g = self.fundamental_tensor_unchecked(x, y);
        if !linalg::is_spd(self.grid.dim, &g) {
            return Err(FinslerError::StrongConvexity(format!(
                "fundamental tensor not positive definite at x={:?}",
                &x[..self.grid.dim]
            )));
        }
        Ok(g)
    }

    /// Fundamental tensor without the SPD check, for hot paths.
    pub fn fundamental_tensor_unchecked(&self, x: &Vec3, y: &Vec3) -> Mat3 {
        let n = self.grid.dim;
        match &self.family {
            MetricFamily::Randers(_) => {
                let (a, b) = self.randers_pieces(x);
                let mut alpha2 = 0.0;
                let mut beta = 0.0;
                for i in 0..n {
                    alpha2 += a[i] * y[i] * y[i];
                    beta += b[i] * y[i];
                }
                let alpha = alpha2.sqrt();
                let f = alpha + beta;
                let mut g = ZERO_MAT;
                for i in 0..n {
                    let yi_low = a[i] * y[i];
                    let li = yi_low / alpha + b[i];
                    for j in 0..n {
                        let yj_low = a[j] * y[j];
                        let lj = yj_low / alpha + b[j];
                        let aij = if i == j { a[i] } else { 0.0 };
                        g[i][j] = li * lj + (f / alpha) * (aij - yi_low * yj_low / alpha2);
                    }
                }
                g
            }
            _ => self.riemannian_tensor(x).expect("quadratic family"),
        }
    }

    /// Native x-derivatives ∂_k g_ij(x, y).
    pub fn dg_dx(&self, x: &Vec3, y: &Vec3) -> [Mat3; 3] {
        let n = self.grid.dim;
        match &self.family {
            MetricFamily::Euclidean => [ZERO_MAT; 3],
            MetricFamily::Riemannian(RiemannianTensor::DiagonalExp(logs)) => {
                let mut out = [ZERO_MAT; 3];
                for i in 0..n {
                    let v = (2.0 * logs[i].eval(x, self.grid.l)).exp();
                    let gr = logs[i].grad(x, self.grid.l);
                    for k in 0..n {
                        out[k][i][i] = 2.0 * gr[k] * v;
                    }
                }
                out
            }
            MetricFamily::Riemannian(RiemannianTensor::Sampled(f)) => f.taylor_grad(x),
            MetricFamily::ConformalFlat(rep) => {
                let (phi, grad) = match rep {
                    ConformalScalar::Analytic(p) => {
                        (p.eval(x, self.grid.l), p.grad(x, self.grid.l))
                    }
                    ConformalScalar::Sampled(s) => (s.value(x), s.gradient(x)),
                };
                let e2 = (2.0 * phi).exp();
                let mut out = [ZERO_MAT; 3];
                for k in 0..n {
                    for i in 0..n {
                        out[k][i][i] = 2.0 * grad[k] * e2;
                    }
                }
                out
            }
            MetricFamily::Randers(p) => {
                let l = self.grid.l;
                let (a, b) = self.randers_pieces(x);
                let mut da = [ZERO_VEC; 3]; // da[k][i] = ∂_k a_ii
                let mut db = [ZERO_VEC; 3];
                for i in 0..n {
                    let bg = p.b[i].grad(x, l);
                    let ag = match &p.a_logs {
                        Some(logs) => {
                            let gr = logs[i].grad(x, l);
                            linalg::scale(n, &gr, 2.0 * a[i])
                        }
                        None => ZERO_VEC,
                    };
                    for k in 0..n {
                        da[k][i] = ag[k];
                        db[k][i] = bg[k];
                    }
                }
                let mut alpha2 = 0.0;
                let mut beta = 0.0;
                for i in 0..n {
                    alpha2 += a[i] * y[i] * y[i];
                    beta += b[i] * y[i];
                }
                let alpha = alpha2.sqrt();
                let f = alpha + beta;
                let mut yl = ZERO_VEC; // lowered y
                let mut ell = ZERO_VEC;
                for i in 0..n {
                    yl[i] = a[i] * y[i];
                    ell[i] = yl[i] / alpha + b[i];
                }
                let mut out = [ZERO_MAT; 3];
                for k in 0..n {
                    let mut d_alpha2 = 0.0;
                    let mut d_beta = 0.0;
                    for i in 0..n {
                        d_alpha2 += da[k][i] * y[i] * y[i];
                        d_beta += db[k][i] * y[i];
                    }
                    let d_alpha = d_alpha2 / (2.0 * alpha);
                    let d_f = d_alpha + d_beta;
                    let mut d_yl = ZERO_VEC;
                    let mut d_ell = ZERO_VEC;
                    for i in 0..n {
                        d_yl[i] = da[k][i] * y[i];
                        d_ell[i] = d_yl[i] / alpha - yl[i] * d_alpha / alpha2 + db[k][i];
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let aij = if i == j { a[i] } else { 0.0 };
                            let d_aij = if i == j { da[k][i] } else { 0.0 };
                            let core = aij - yl[i] * yl[j] / alpha2;
                            let d_core = d_aij
                                - (d_yl[i] * yl[j] + yl[i] * d_yl[j]) / alpha2
                                + 2.0 * yl[i] * yl[j] * d_alpha / (alpha2 * alpha);
                            out[k][i][j] = d_ell[i] * ell[j]
                                + ell[i] * d_ell[j]
                                + (d_f / alpha - f * d_alpha / alpha2) * core
                                + (f / alpha) * d_core;
                        }
                    }
                }
                out
            }
        }
    }

    /// ∂F²/∂x^k, native.
    pub fn d_fsq_dx(&self, x: &Vec3, y: &Vec3) -> Vec3 {
        let n = self.grid.dim;
        let dg = self.dg_dx(x, y);
        let mut out = ZERO_VEC;
        for k in 0..n {
            out[k] = linalg::quad_form(n, &dg[k], y, y);
        }
        out
    }

    /// y-derivatives of the fundamental tensor by fourth-order central
    /// differences (the Cartan tensor contribution), step `1e-3 * |y|`.
    pub fn dg_dy(&self, x: &Vec3, y: &Vec3) -> [Mat3; 3] {
        let n = self.grid.dim;
        if self.is_quadratic() {
            return [ZERO_MAT; 3];
        }
        let step = 1e-3 * linalg::norm(n, y).max(1e-8);
        let mut out = [ZERO_MAT; 3];
        for k in 0..n {
            let mut samples = [ZERO_MAT; 4];
            for (si, off) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
                let mut yy = *y;
                yy[k] += off * step;
                samples[si] = self.fundamental_tensor_unchecked(x, &yy);
            }
            for i in 0..n {
                for j in 0..n {
                    out[k][i][j] = (samples[0][i][j] - 8.0 * samples[1][i][j]
                        + 8.0 * samples[2][i][j]
                        - samples[3][i][j])
                        / (12.0 * step);
                }
            }
        }
        out
    }

    /// Legendre transform: the unique v with g_ij(x,v) v^j = ξ_i.
    ///
    /// Newton iteration on ½∇_y F²(v) - ξ with Jacobian g(v), started from
    /// the Euclidean sharp of ξ; ξ = 0 maps to 0.
    pub fn legendre_dual(&self, x: &Vec3, xi: &Vec3) -> Result<Vec3> {
        let n = self.grid.dim;
        let xi_norm = linalg::norm(n, xi);
        if xi_norm == 0.0 {
            return Ok(ZERO_VEC);
        }
        // Solve at unit scale; 1-homogeneity restores the result.
        let xi_unit = linalg::scale(n, xi, 1.0 / xi_norm);
        if self.is_quadratic() {
            let g = self.riemannian_tensor(x).expect("quadratic family");
            let v = linalg::solve(n, &g, &xi_unit).ok_or_else(|| {
                FinslerError::StrongConvexity("singular metric tensor in legendre solve".into())
            })?;
            return Ok(linalg::scale(n, &v, xi_norm));
        }
        let mut v = xi_unit;
        let mut residual = f64::INFINITY;
        for iter in 0..LEGENDRE_MAX_ITER {
            let grad_half = linalg::scale(n, &self.d_fsq_dy(x, &v), 0.5);
            let phi = linalg::sub(n, &grad_half, &xi_unit);
            residual = linalg::norm(n, &phi);
            if residual <= LEGENDRE_TOL {
                return Ok(linalg::scale(n, &v, xi_norm));
            }
            let g = self.fundamental_tensor_unchecked(x, &v);
            let step = linalg::solve(n, &g, &phi).ok_or(FinslerError::Numerical {
                what: "legendre newton jacobian singular".into(),
                iterations: iter,
                residual,
            })?;
            v = linalg::sub(n, &v, &step);
            if linalg::norm(n, &v) < 1e-14 {
                // Step collapsed to the zero section; restart slightly off it.
                v = linalg::scale(n, &xi_unit, 0.5);
            }
        }
        Err(FinslerError::Numerical {
            what: "legendre transform did not converge".into(),
            iterations: LEGENDRE_MAX_ITER,
            residual,
        })
    }

    /// Dual norm F*(x, ξ) via the Legendre solve; F*(0) = 0.
    pub fn dual_norm(&self, x: &Vec3, xi: &Vec3) -> Result<f64> {
        let n = self.grid.dim;
        if linalg::norm(n, xi) == 0.0 {
            return Ok(0.0);
        }
        let v = self.legendre_dual(x, xi)?;
        self.eval_metric(x, &v)
    }

    /// √det g(x) for quadratic families (the Riemannian volume density).
    pub fn volume_density(&self, x: &Vec3) -> Option<f64> {
        self.riemannian_tensor(x)
            .map(|g| linalg::det(self.grid.dim, &g).sqrt())
    }

    /// Snapshot of the conformal factor values at the nodes, when the
    /// family is conformal-flat.
    pub fn conformal_values(&self) -> Option<Vec<f64>> {
        match &self.family {
            MetricFamily::ConformalFlat(ConformalScalar::Analytic(p)) => Some(
                (0..self.grid.node_count())
                    .map(|i| p.eval(&self.grid.position(i), self.grid.l))
                    .collect(),
            ),
            MetricFamily::ConformalFlat(ConformalScalar::Sampled(s)) => Some(s.values.clone()),
            _ => None,
        }
    }

    /// Snapshot of the symmetric tensor samples for quadratic families.
    pub fn sampled_tensor(&self) -> Option<SampledSymField> {
        if !self.is_quadratic() {
            return None;
        }
        match &self.family {
            MetricFamily::Riemannian(RiemannianTensor::Sampled(f)) => Some(f.clone()),
            _ => Some(SampledSymField::from_fn(self.grid, |x| {
                self.riemannian_tensor(x).expect("quadratic family")
            })),
        }
    }

    /// Linear interpolation between metric snapshots of the same family
    /// representation; `None` when the variants do not match.
    pub fn lerp(&self, other: &FinslerStructure, theta: f64) -> Option<FinslerStructure> {
        match (&self.family, &other.family) {
            (
                MetricFamily::Riemannian(RiemannianTensor::Sampled(a)),
                MetricFamily::Riemannian(RiemannianTensor::Sampled(b)),
            ) => Some(FinslerStructure {
                grid: self.grid,
                family: MetricFamily::Riemannian(RiemannianTensor::Sampled(a.lerp(b, theta))),
            }),
            (
                MetricFamily::ConformalFlat(ConformalScalar::Sampled(a)),
                MetricFamily::ConformalFlat(ConformalScalar::Sampled(b)),
            ) => {
                let values = a
                    .values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| x + theta * (y - x))
                    .collect();
                Some(FinslerStructure::conformal_sampled(self.grid, values))
            }
            _ => None,
        }
    }

    /// Largest eigenvalue of g^{-1}(x,y) over all nodes and a direction
    /// quadrature; used by the CFL guard.
    pub fn max_inverse_metric_eigenvalue(&self, directions: &[Vec3]) -> f64 {
        let n = self.grid.dim;
        let mut lam = 0.0f64;
        for idx in 0..self.grid.node_count() {
            let x = self.grid.position(idx);
            if self.is_quadratic() {
                let g = self.fundamental_tensor_unchecked(&x, &[1.0, 0.0, 0.0]);
                lam = lam.max(1.0 / linalg::sym_eig_min(n, &g));
            } else {
                for y in directions {
                    let g = self.fundamental_tensor_unchecked(&x, y);
                    lam = lam.max(1.0 / linalg::sym_eig_min(n, &g));
                }
            }
        }
        lam
    }
}

/// Evenly spread unit directions for quadratures over the direction sphere:
/// `count` angles on the circle in 2-D, a Fibonacci sphere in 3-D.
pub fn direction_quadrature(dim: usize, count: usize) -> Vec<Vec3> {
    let mut dirs = Vec::with_capacity(count);
    if dim == 2 {
        for k in 0..count {
            let th = std::f64::consts::TAU * k as f64 / count as f64;
            dirs.push([th.cos(), th.sin(), 0.0]);
        }
    } else {
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        for k in 0..count {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let th = std::f64::consts::TAU * (k as f64 / golden).fract();
            dirs.push([r * th.cos(), r * th.sin(), z]);
        }
    }
    dirs
}
