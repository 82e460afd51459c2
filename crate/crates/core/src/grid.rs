//! Periodic uniform grid and grid-sampled tensor fields.

use crate::error::{FinslerError, Result};
use crate::linalg::{Vec3, ZERO_VEC};

/// Uniform periodic grid realizing a flat n-torus chart: `m` nodes per axis,
/// period `l` per axis, spacing `h = l / m`. Indexing wraps periodically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    pub dim: usize,
    pub m: usize,
    pub l: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, m: usize, l: f64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(FinslerError::Config(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if m < 8 {
            return Err(FinslerError::Config(format!(
                "nodes per axis must be >= 8, got {m}"
            )));
        }
        if !(l > 0.0) {
            return Err(FinslerError::Config(format!("period must be > 0, got {l}")));
        }
        Ok(TorusGrid { dim, m, l })
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.m as f64
    }

    pub fn node_count(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Multi-index of a flat index, axis 0 fastest.
    pub fn coords_of(&self, idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut r = idx;
        for item in c.iter_mut().take(self.dim) {
            *item = r % self.m;
            r /= self.m;
        }
        c
    }

    pub fn index_of(&self, c: &[usize; 3]) -> usize {
        let mut idx = 0usize;
        for ax in (0..self.dim).rev() {
            idx = idx * self.m + (c[ax] % self.m);
        }
        idx
    }

    /// Flat index shifted by `delta` nodes along `axis`, wrapping.
    pub fn shift(&self, idx: usize, axis: usize, delta: isize) -> usize {
        let mut c = self.coords_of(idx);
        let m = self.m as isize;
        let v = (c[axis] as isize + delta).rem_euclid(m);
        c[axis] = v as usize;
        self.index_of(&c)
    }

    /// Flat index shifted by a node offset vector, wrapping.
    pub fn shift_vec(&self, idx: usize, delta: &[isize; 3]) -> usize {
        let mut c = self.coords_of(idx);
        let m = self.m as isize;
        for ax in 0..self.dim {
            c[ax] = (c[ax] as isize + delta[ax]).rem_euclid(m) as usize;
        }
        self.index_of(&c)
    }

    /// Physical position of a node.
    pub fn position(&self, idx: usize) -> Vec3 {
        let c = self.coords_of(idx);
        let h = self.spacing();
        let mut p = ZERO_VEC;
        for ax in 0..self.dim {
            p[ax] = c[ax] as f64 * h;
        }
        p
    }

    /// Nearest node to an arbitrary point (wrapping each coordinate).
    pub fn nearest_node(&self, x: &Vec3) -> usize {
        let h = self.spacing();
        let mut c = [0usize; 3];
        for ax in 0..self.dim {
            let j = (x[ax] / h).round() as i64;
            c[ax] = j.rem_euclid(self.m as i64) as usize;
        }
        self.index_of(&c)
    }

    /// Wrap a displacement into the symmetric fundamental cell, per axis.
    pub fn min_image(&self, d: &Vec3) -> Vec3 {
        let mut r = ZERO_VEC;
        for ax in 0..self.dim {
            let mut v = d[ax] % self.l;
            if v > self.l / 2.0 {
                v -= self.l;
            }
            if v < -self.l / 2.0 {
                v += self.l;
            }
            r[ax] = v;
        }
        r
    }

    /// Wrap a point into [0, L)^n.
    pub fn wrap_point(&self, x: &Vec3) -> Vec3 {
        let mut r = ZERO_VEC;
        for ax in 0..self.dim {
            r[ax] = x[ax].rem_euclid(self.l);
        }
        r
    }
}

/// Scalar samples on a [`TorusGrid`] with a time stamp.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: TorusGrid,
    pub data: Vec<f64>,
    pub t: f64,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, data: Vec<f64>, t: f64) -> Result<Self> {
        if data.len() != grid.node_count() {
            return Err(FinslerError::Config(format!(
                "field has {} entries, grid needs {}",
                data.len(),
                grid.node_count()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FinslerError::Domain("non-finite field value".into()));
        }
        Ok(ScalarField { grid, data, t })
    }

    pub fn constant(grid: TorusGrid, value: f64, t: f64) -> Self {
        ScalarField {
            grid,
            data: vec![value; grid.node_count()],
            t,
        }
    }

    pub fn from_fn(grid: TorusGrid, t: f64, f: impl Fn(&Vec3) -> f64) -> Self {
        let data = (0..grid.node_count())
            .map(|i| f(&grid.position(i)))
            .collect();
        ScalarField { grid, data, t }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
            t: self.t,
        }
    }

    /// Max absolute value.
    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

/// Vector (or covector) samples: `dim` components per node, interleaved.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: TorusGrid,
    pub data: Vec<f64>,
    pub t: f64,
}

/// Covector fields share the storage layout of vector fields; the distinction
/// is carried by the type alias at API boundaries.
pub type CovectorField = VectorField;

impl VectorField {
    pub fn zeros(grid: TorusGrid, t: f64) -> Self {
        VectorField {
            grid,
            data: vec![0.0; grid.node_count() * grid.dim],
            t,
        }
    }

    pub fn from_fn(grid: TorusGrid, t: f64, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let mut out = Self::zeros(grid, t);
        for i in 0..grid.node_count() {
            out.set(i, &f(&grid.position(i)));
        }
        out
    }

    pub fn get(&self, idx: usize) -> Vec3 {
        let n = self.grid.dim;
        let mut v = ZERO_VEC;
        v[..n].copy_from_slice(&self.data[idx * n..idx * n + n]);
        v
    }

    pub fn set(&mut self, idx: usize, v: &Vec3) {
        let n = self.grid.dim;
        self.data[idx * n..idx * n + n].copy_from_slice(&v[..n]);
    }
}

/// Fourth-order central first derivative on 5 samples [-2Δ..2Δ].
pub fn deriv1_5pt(samples: &[f64; 5], step: f64) -> f64 {
    (samples[0] - 8.0 * samples[1] + 8.0 * samples[3] - samples[4]) / (12.0 * step)
}

/// Fourth-order central second derivative on 5 samples [-2Δ..2Δ].
pub fn deriv2_5pt(samples: &[f64; 5], step: f64) -> f64 {
    (-samples[0] + 16.0 * samples[1] - 30.0 * samples[2] + 16.0 * samples[3] - samples[4])
        / (12.0 * step * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn indexing_roundtrip_and_wrap() {
        let g = TorusGrid::new(2, 8, 1.0).unwrap();
        for idx in 0..g.node_count() {
            let c = g.coords_of(idx);
            assert_eq!(g.index_of(&c), idx);
        }
        let idx = g.index_of(&[7, 3, 0]);
        assert_eq!(g.shift(idx, 0, 1), g.index_of(&[0, 3, 0]));
        assert_eq!(g.shift(idx, 1, -4), g.index_of(&[7, 7, 0]));
    }

    #[test]
    fn grid_rejects_small_m() {
        assert!(TorusGrid::new(2, 4, 1.0).is_err());
        assert!(TorusGrid::new(4, 16, 1.0).is_err());
    }

    #[test]
    fn min_image_is_symmetric_cell() {
        let g = TorusGrid::new(2, 16, 2.0).unwrap();
        let d = g.min_image(&[1.75, -1.75, 0.0]);
        assert_relative_eq!(d[0], -0.25, epsilon = 1e-14);
        assert_relative_eq!(d[1], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn five_point_stencils_are_fourth_order() {
        let f = |x: f64| (1.3 * x).sin();
        let step = 1e-2;
        let s = [-2.0, -1.0, 0.0, 1.0, 2.0].map(|k| f(k * step));
        assert_relative_eq!(deriv1_5pt(&s, step), 1.3, epsilon = 1e-8);
        assert_relative_eq!(deriv2_5pt(&s, step), 0.0, epsilon = 1e-7);
    }
}
