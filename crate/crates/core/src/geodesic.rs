//! Geodesic shooting, the exponential map, and the asymmetric Finsler
//! distance on the discretized torus.
//!
//! Distances are shortest directed paths on the grid graph whose edges join
//! each node to its primitive neighbours with offsets in {-2..2}^n (the
//! 8/26 immediate neighbours plus knight moves), weighted by a two-point
//! Gauss quadrature of F along the straight segment. Any graph path is an
//! admissible curve, so the graph distance is an upper bound of d_F up to
//! quadrature error, which keeps Harnack checks conservative.

use crate::error::{FinslerError, Result};
use crate::grid::TorusGrid;
use crate::linalg::{self, Vec3, ZERO_VEC};
use crate::metric::FinslerStructure;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Integrated geodesic: (t, x, ẋ) samples, positions unwrapped.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub samples: Vec<(f64, Vec3, Vec3)>,
    pub step: f64,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> (Vec3, Vec3) {
        let last = self.samples.last().expect("nonempty path");
        (last.1, last.2)
    }

    /// Max relative drift of F(x(t), ẋ(t)) from the launch speed.
    pub fn max_speed_drift(&self, metric: &FinslerStructure) -> f64 {
        let f0 = metric
            .eval_metric(&self.samples[0].1, &self.samples[0].2)
            .unwrap_or(f64::NAN);
        self.samples
            .iter()
            .map(|(_, x, v)| {
                let f = metric.eval_metric(x, v).unwrap_or(f64::NAN);
                (f - f0).abs() / f0
            })
            .fold(0.0f64, f64::max)
    }
}

fn geodesic_acc(metric: &FinslerStructure, x: &Vec3, v: &Vec3) -> Result<Vec3> {
    Ok(linalg::scale(
        metric.dim(),
        &crate::curvature::spray_coefficients(metric, x, v)?,
        -2.0,
    ))
}

/// RK4 integration of ẍ = −2G(x, ẋ) from (x, v) for parameter time `t_end`,
/// with step at most h / (4 F(v)).
pub fn shoot_geodesic(
    metric: &FinslerStructure,
    x: &Vec3,
    v: &Vec3,
    t_end: f64,
) -> Result<GeodesicPath> {
    let n = metric.dim();
    if linalg::norm(n, v) < crate::metric::ZERO_VECTOR_EPS {
        return Err(FinslerError::ZeroVector(
            "geodesic shooting needs a nonzero velocity".into(),
        ));
    }
    let f = metric.eval_metric(x, v)?;
    let h = metric.grid.spacing();
    let max_step = h / (4.0 * f);
    let steps = (t_end / max_step).ceil().max(1.0);
    if steps > 2e7 {
        return Err(FinslerError::Numerical {
            what: "geodesic step size underflow".into(),
            iterations: steps as usize,
            residual: max_step,
        });
    }
    let steps = steps as usize;
    let dt = t_end / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut xc = *x;
    let mut vc = *v;
    samples.push((0.0, xc, vc));
    for k in 0..steps {
        let (xn, vn) = rk4_step(metric, &xc, &vc, dt)?;
        xc = xn;
        vc = vn;
        samples.push(((k + 1) as f64 * dt, xc, vc));
    }
    Ok(GeodesicPath { samples, step: dt })
}

fn rk4_step(metric: &FinslerStructure, x: &Vec3, v: &Vec3, dt: f64) -> Result<(Vec3, Vec3)> {
    let n = metric.dim();
    let k1x = *v;
    let k1v = geodesic_acc(metric, x, v)?;
    let x2 = linalg::axpy(n, x, dt / 2.0, &k1x);
    let v2 = linalg::axpy(n, v, dt / 2.0, &k1v);
    let k2x = v2;
    let k2v = geodesic_acc(metric, &x2, &v2)?;
    let x3 = linalg::axpy(n, x, dt / 2.0, &k2x);
    let v3 = linalg::axpy(n, v, dt / 2.0, &k2v);
    let k3x = v3;
    let k3v = geodesic_acc(metric, &x3, &v3)?;
    let x4 = linalg::axpy(n, x, dt, &k3x);
    let v4 = linalg::axpy(n, v, dt, &k3v);
    let k4x = v4;
    let k4v = geodesic_acc(metric, &x4, &v4)?;
    let mut xn = *x;
    let mut vn = *v;
    for i in 0..n {
        xn[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        vn[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    }
    Ok((xn, vn))
}

/// Exponential map exp_x(v) (wrapped to the fundamental cell).
pub fn exp_map(metric: &FinslerStructure, x: &Vec3, v: &Vec3) -> Result<Vec3> {
    let path = shoot_geodesic(metric, x, v, 1.0)?;
    Ok(metric.grid.wrap_point(&path.endpoint().0))
}

/// Primitive offsets with components in {-2..2}: immediate neighbours plus
/// knight moves (16 in 2-D, 98 in 3-D).
pub fn stencil_offsets(dim: usize) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    let range: Vec<isize> = vec![-2, -1, 0, 1, 2];
    let zs: Vec<isize> = if dim == 2 { vec![0] } else { range.clone() };
    for &a in &range {
        for &b in &range {
            for &c in &zs {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let g = gcd(gcd(a.unsigned_abs(), b.unsigned_abs()), c.unsigned_abs());
                if g == 1 {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Directed distance queries on the grid graph of a metric snapshot.
pub struct DistanceOracle<'a> {
    pub metric: &'a FinslerStructure,
    pub grid: TorusGrid,
    offsets: Vec<[isize; 3]>,
    /// weights[idx * offsets.len() + o] = ∫ F along the straight segment.
    weights: Vec<f64>,
}

impl<'a> DistanceOracle<'a> {
    pub fn new(metric: &'a FinslerStructure) -> Self {
        let grid = metric.grid;
        let n = grid.dim;
        let h = grid.spacing();
        let offsets = stencil_offsets(n);
        let gauss = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
        let mut weights = vec![0.0; grid.node_count() * offsets.len()];
        for idx in 0..grid.node_count() {
            let x = grid.position(idx);
            for (oi, off) in offsets.iter().enumerate() {
                let mut d = ZERO_VEC;
                for ax in 0..n {
                    d[ax] = off[ax] as f64 * h;
                }
                let mut w = 0.0;
                for q in gauss {
                    let xq = linalg::axpy(n, &x, q, &d);
                    w += 0.5 * metric.fsq(&xq, &d).sqrt();
                }
                weights[idx * offsets.len() + oi] = w;
            }
        }
        DistanceOracle {
            metric,
            grid,
            offsets,
            weights,
        }
    }

    /// Single-source directed distances to every node.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        self.run_dijkstra(source).0
    }

    fn run_dijkstra(&self, source: usize) -> (Vec<f64>, Vec<usize>) {
        #[derive(PartialEq)]
        struct State {
            cost: f64,
            node: usize,
        }
        impl Eq for State {}
        impl Ord for State {
            fn cmp(&self, other: &Self) -> Ordering {
                other
                    .cost
                    .partial_cmp(&self.cost)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| other.node.cmp(&self.node))
            }
        }
        impl PartialOrd for State {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        let nn = self.grid.node_count();
        let mut dist = vec![f64::INFINITY; nn];
        let mut prev = vec![usize::MAX; nn];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(State {
            cost: 0.0,
            node: source,
        });
        while let Some(State { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for (oi, off) in self.offsets.iter().enumerate() {
                let next = self.grid.shift_vec(node, off);
                let cand = cost + self.weights[node * self.offsets.len() + oi];
                if cand < dist[next] {
                    dist[next] = cand;
                    prev[next] = node;
                    heap.push(State {
                        cost: cand,
                        node: next,
                    });
                }
            }
        }
        (dist, prev)
    }

    /// Directed distance d_F(from, to); asymmetric in general.
    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.distances_from(from)[to]
    }

    /// Node sequence of the shortest directed path.
    pub fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let (_, prev) = self.run_dijkstra(from);
        let mut nodes = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            if cur == usize::MAX {
                return Vec::new();
            }
            nodes.push(cur);
        }
        nodes.reverse();
        nodes
    }

    /// Physical polyline of the shortest path, unwrapped starting at `from`.
    pub fn path_points(&self, from: usize, to: usize) -> Vec<Vec3> {
        let nodes = self.path(from, to);
        let n = self.grid.dim;
        let mut pts = Vec::with_capacity(nodes.len());
        let mut cur = self.grid.position(from);
        pts.push(cur);
        for w in nodes.windows(2) {
            let step = self
                .grid
                .min_image(&linalg::sub(n, &self.grid.position(w[1]), &self.grid.position(w[0])));
            cur = linalg::add(n, &cur, &step);
            pts.push(cur);
        }
        pts
    }
}

/// Reverse curve η(τ) = exp_y((t−τ)v) on [s, t] with η(t) = y and η(s) ≈ x.
#[derive(Debug, Clone)]
pub struct ReverseCurve {
    /// (τ, position, η̇(τ)) samples, τ ascending from s to t.
    pub samples: Vec<(f64, Vec3, Vec3)>,
    /// Euclidean distance from η(s) to the requested x (min-image).
    pub endpoint_error: f64,
    /// F(−η̇) averaged over the samples.
    pub mean_reverse_speed: f64,
    /// True when shooting failed and the grid-graph polyline was used.
    pub fallback: bool,
}

/// Construct the reverse curve of the minimal geodesic from y to x:
/// shoot along the grid-graph departure direction with the speed scaled so
/// F(v) = d_F(y,x)/(t−s), refine the velocity scale, and fall back to the
/// graph polyline when shooting cannot reach x.
pub fn reverse_geodesic_curve(
    metric: &FinslerStructure,
    oracle: &DistanceOracle,
    y_idx: usize,
    x_idx: usize,
    s: f64,
    t: f64,
) -> Result<ReverseCurve> {
    if !(s < t) {
        return Err(FinslerError::Domain(format!(
            "reverse curve needs s < t, got s={s}, t={t}"
        )));
    }
    let n = metric.dim();
    let grid = metric.grid;
    let y = grid.position(y_idx);
    let x = grid.position(x_idx);
    let d = oracle.distance(y_idx, x_idx);
    let span = t - s;
    if y_idx == x_idx || d == 0.0 {
        // constant curve
        let mut samples = Vec::new();
        for k in 0..=16 {
            let tau = s + span * k as f64 / 16.0;
            samples.push((tau, y, ZERO_VEC));
        }
        return Ok(ReverseCurve {
            samples,
            endpoint_error: 0.0,
            mean_reverse_speed: 0.0,
            fallback: false,
        });
    }
    let path = oracle.path(y_idx, x_idx);
    let fallback_curve = |flag: bool| -> ReverseCurve {
        let pts = oracle.path_points(y_idx, x_idx);
        graph_polyline_reverse(metric, &pts, d, s, t, flag)
    };
    if path.len() < 2 {
        return Ok(fallback_curve(true));
    }
    let dir0 = grid.min_image(&linalg::sub(
        n,
        &grid.position(path[1]),
        &grid.position(path[0]),
    ));
    let f_dir = match metric.eval_metric(&y, &dir0) {
        Ok(v) => v,
        Err(_) => return Ok(fallback_curve(true)),
    };
    let base_speed = d / span;
    let v_unit = linalg::scale(n, &dir0, 1.0 / f_dir);
    let miss = |scale: f64| -> f64 {
        let v = linalg::scale(n, &v_unit, base_speed * scale);
        match shoot_geodesic(metric, &y, &v, span) {
            Ok(p) => {
                let end = p.endpoint().0;
                linalg::norm(n, &grid.min_image(&linalg::sub(n, &end, &x)))
            }
            Err(_) => f64::INFINITY,
        }
    };
    // golden-section refinement of the speed scale
    let (mut lo, mut hi) = (0.5, 1.6);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut dd = lo + phi * (hi - lo);
    let mut fc = miss(c);
    let mut fd = miss(dd);
    for _ in 0..32 {
        if fc < fd {
            hi = dd;
            dd = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = miss(c);
        } else {
            lo = c;
            c = dd;
            fc = fd;
            dd = lo + phi * (hi - lo);
            fd = miss(dd);
        }
    }
    let best = 0.5 * (lo + hi);
    let v = linalg::scale(n, &v_unit, base_speed * best);
    let shot = match shoot_geodesic(metric, &y, &v, span) {
        Ok(p) => p,
        Err(_) => return Ok(fallback_curve(true)),
    };
    let err = linalg::norm(
        n,
        &grid.min_image(&linalg::sub(n, &shot.endpoint().0, &x)),
    );
    if err > grid.spacing() * 1.5 {
        return Ok(fallback_curve(true));
    }
    // reparameterize: η(τ) = σ(t − τ) where σ is the shot geodesic
    let mut samples: Vec<(f64, Vec3, Vec3)> = shot
        .samples
        .iter()
        .map(|(u, xx, vv)| (t - u, *xx, linalg::scale(n, vv, -1.0)))
        .collect();
    samples.reverse();
    let mut speed_sum = 0.0;
    for (_, xx, eta_dot) in &samples {
        let minus = linalg::scale(n, eta_dot, -1.0);
        speed_sum += metric.eval_metric(xx, &minus).unwrap_or(f64::NAN);
    }
    Ok(ReverseCurve {
        endpoint_error: err,
        mean_reverse_speed: speed_sum / samples.len() as f64,
        samples,
        fallback: false,
    })
}

fn graph_polyline_reverse(
    metric: &FinslerStructure,
    pts: &[Vec3],
    d: f64,
    s: f64,
    t: f64,
    fallback: bool,
) -> ReverseCurve {
    let n = metric.dim();
    let span = t - s;
    let mm = pts.len() - 1;
    let mut samples = Vec::with_capacity(mm + 1);
    let mut speed_sum = 0.0;
    // σ(u) walks y→x over [0, span]; η(τ) = σ(t−τ)
    for (j, p) in pts.iter().enumerate() {
        let u = span * j as f64 / mm as f64;
        let vel = if j < mm {
            linalg::scale(
                n,
                &linalg::sub(n, &pts[j + 1], p),
                mm as f64 / span,
            )
        } else {
            linalg::scale(
                n,
                &linalg::sub(n, p, &pts[j - 1]),
                mm as f64 / span,
            )
        };
        speed_sum += metric.eval_metric(p, &vel).unwrap_or(f64::NAN);
        samples.push((t - u, *p, linalg::scale(n, &vel, -1.0)));
    }
    samples.reverse();
    let _ = d;
    ReverseCurve {
        endpoint_error: 0.0,
        mean_reverse_speed: speed_sum / (mm + 1) as f64,
        samples,
        fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::TrigScalar;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    fn grid(m: usize) -> TorusGrid {
        TorusGrid::new(2, m, 1.0).unwrap()
    }

    fn const_randers(g: TorusGrid, b0: f64) -> FinslerStructure {
        FinslerStructure::randers(
            g,
            None,
            [
                TrigScalar::constant(b0),
                TrigScalar::constant(0.0),
                TrigScalar::constant(0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn euclidean_shooting_is_straight() {
        let m = FinslerStructure::euclidean(grid(16));
        let x = [0.1, 0.2, 0.0];
        let v = [0.3, 0.4, 0.0];
        let end = exp_map(&m, &x, &v).unwrap();
        assert_relative_eq!(end[0], 0.4, epsilon = 1e-10);
        assert_relative_eq!(end[1], 0.6, epsilon = 1e-10);
    }

    #[test]
    fn constant_randers_shooting_is_straight() {
        let m = const_randers(grid(16), 0.5);
        let x = [0.9, 0.9, 0.0];
        let v = [0.3, 0.3, 0.0];
        let end = exp_map(&m, &x, &v).unwrap();
        assert_relative_eq!(end[0], 0.2, epsilon = 1e-10, max_relative = 1e-10);
        assert_relative_eq!(end[1], 0.2, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn speed_drift_below_tolerance() {
        let m = FinslerStructure::riemannian_diagonal(
            grid(32),
            [
                TrigScalar::single(0.0, 0.08, [1, 0, 0], 0.2),
                TrigScalar::single(0.05, 0.06, [0, 1, 0], 1.0),
                TrigScalar::constant(0.0),
            ],
        );
        let path = shoot_geodesic(&m, &[0.3, 0.6, 0.0], &[0.5, 0.25, 0.0], 1.0).unwrap();
        assert!(
            path.max_speed_drift(&m) <= 1e-6,
            "drift {}",
            path.max_speed_drift(&m)
        );
    }

    #[test]
    fn zero_velocity_rejected() {
        let m = FinslerStructure::euclidean(grid(16));
        assert!(shoot_geodesic(&m, &[0.0; 3], &[0.0; 3], 1.0).is_err());
    }

    #[test]
    fn stencil_offsets_counts() {
        assert_eq!(stencil_offsets(2).len(), 16);
        assert_eq!(stencil_offsets(3).len(), 98);
    }

    #[test]
    fn distance_flat_axis_pair() {
        let g = grid(64);
        let m = FinslerStructure::euclidean(g);
        let oracle = DistanceOracle::new(&m);
        let a = g.index_of(&[0, 0, 0]);
        let b = g.index_of(&[16, 0, 0]); // (0.25, 0)
        let d = oracle.distance(a, b);
        assert!((d - 0.25).abs() <= 0.02 * 0.25, "d = {d}");
        assert_eq!(oracle.distance(a, a), 0.0);
    }

    #[test]
    fn distance_constant_randers_asymmetric_closed_form() {
        let g = grid(64);
        let m = const_randers(g, 0.5);
        let oracle = DistanceOracle::new(&m);
        let a = g.index_of(&[0, 0, 0]);
        let b = g.index_of(&[16, 0, 0]);
        // closed form: min over lattice shifts of |Δ| + <b, Δ>
        let closed = |from: &Vec3, to: &Vec3| -> f64 {
            let mut best = f64::INFINITY;
            for kx in -1..=1 {
                for ky in -1..=1 {
                    let delta = [
                        to[0] - from[0] + kx as f64,
                        to[1] - from[1] + ky as f64,
                        0.0,
                    ];
                    best = best.min(linalg::norm(2, &delta) + 0.5 * delta[0]);
                }
            }
            best
        };
        let pa = g.position(a);
        let pb = g.position(b);
        let dab = oracle.distance(a, b);
        let dba = oracle.distance(b, a);
        assert!((dab - closed(&pa, &pb)).abs() <= 0.02 * closed(&pa, &pb).max(0.1));
        assert!((dba - closed(&pb, &pa)).abs() <= 0.02 * closed(&pb, &pa).max(0.1));
        assert!((dab - dba).abs() > 0.1, "directed distances should differ");
    }

    #[test]
    fn distance_favored_directions_within_two_percent() {
        let g = grid(64);
        let m = FinslerStructure::euclidean(g);
        let oracle = DistanceOracle::new(&m);
        let a = g.index_of(&[0, 0, 0]);
        for (coords, exact) in [
            ([12usize, 0, 0], 12.0 / 64.0),
            ([12, 12, 0], (2.0f64).sqrt() * 12.0 / 64.0),
            ([24, 12, 0], (5.0f64).sqrt() * 12.0 / 64.0),
        ] {
            let b = g.index_of(&coords);
            let d = oracle.distance(a, b);
            assert!(
                (d - exact).abs() <= 0.02 * exact,
                "dir {coords:?}: {d} vs {exact}"
            );
        }
    }

    #[test]
    fn directed_triangle_inequality_random_triples() {
        let g = grid(16);
        let m = const_randers(g, 0.3);
        let oracle = DistanceOracle::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let x = rng.gen_range(0..g.node_count());
            let y = rng.gen_range(0..g.node_count());
            let z = rng.gen_range(0..g.node_count());
            let dxz = oracle.distance(x, z);
            let dxy = oracle.distance(x, y);
            let dyz = oracle.distance(y, z);
            // 2 * stencil tolerance on the right-hand side
            assert!(
                dxz <= dxy + dyz + 0.04 * (dxy + dyz).max(g.spacing()),
                "triangle violated: {dxz} > {dxy} + {dyz}"
            );
        }
    }

    #[test]
    fn reverse_curve_euclidean_straight_segment() {
        let g = grid(32);
        let m = FinslerStructure::euclidean(g);
        let oracle = DistanceOracle::new(&m);
        let y = g.index_of(&[4, 4, 0]);
        let x = g.index_of(&[20, 4, 0]); // straight axis segment, d = 0.5
        let (s, t) = (0.2, 1.2);
        let curve = reverse_geodesic_curve(&m, &oracle, y, x, s, t).unwrap();
        assert!(!curve.fallback);
        assert!(curve.endpoint_error <= g.spacing(), "err {}", curve.endpoint_error);
        // speed = d/(t−s) within 2%
        let expect = 0.5 / (t - s);
        assert!(
            (curve.mean_reverse_speed - expect).abs() <= 0.02 * expect,
            "speed {} vs {}",
            curve.mean_reverse_speed,
            expect
        );
        // endpoints: η(t) = y, η(s) ≈ x
        let last = curve.samples.last().unwrap();
        assert_abs_diff_eq!(last.0, t, epsilon = 1e-12);
        let py = g.position(y);
        assert_abs_diff_eq!(
            linalg::norm(2, &g.min_image(&linalg::sub(2, &last.1, &py))),
            0.0,
            epsilon = 1e-9
        );
        let first = curve.samples.first().unwrap();
        assert_abs_diff_eq!(first.0, s, epsilon = 1e-12);
    }

    #[test]
    fn reverse_curve_zero_distance_branch() {
        let g = grid(16);
        let m = FinslerStructure::euclidean(g);
        let oracle = DistanceOracle::new(&m);
        let y = g.index_of(&[3, 3, 0]);
        let curve = reverse_geodesic_curve(&m, &oracle, y, y, 0.1, 0.9).unwrap();
        assert_eq!(curve.mean_reverse_speed, 0.0);
        assert!(!curve.fallback);
    }

    #[test]
    fn reverse_curve_rejects_bad_interval() {
        let g = grid(16);
        let m = FinslerStructure::euclidean(g);
        let oracle = DistanceOracle::new(&m);
        assert!(reverse_geodesic_curve(&m, &oracle, 0, 5, 0.9, 0.2).is_err());
    }
}
