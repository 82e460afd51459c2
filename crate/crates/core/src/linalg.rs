//! Small dense linear algebra on stack arrays.
//!
//! The spatial dimension is 2 or 3 at runtime, so vectors and symmetric
//! matrices are carried in fixed `[f64; 3]` / `[[f64; 3]; 3]` storage with
//! only the leading `n` entries meaningful. All routines take `n` explicitly.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO_VEC: Vec3 = [0.0; 3];
pub const ZERO_MAT: Mat3 = [[0.0; 3]; 3];

pub fn dot(n: usize, a: &Vec3, b: &Vec3) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        s += a[i] * b[i];
    }
    s
}

pub fn norm(n: usize, a: &Vec3) -> f64 {
    dot(n, a, a).sqrt()
}

pub fn scale(n: usize, a: &Vec3, c: f64) -> Vec3 {
    let mut r = ZERO_VEC;
    for i in 0..n {
        r[i] = a[i] * c;
    }
    r
}

pub fn add(n: usize, a: &Vec3, b: &Vec3) -> Vec3 {
    let mut r = ZERO_VEC;
    for i in 0..n {
        r[i] = a[i] + b[i];
    }
    r
}

pub fn sub(n: usize, a: &Vec3, b: &Vec3) -> Vec3 {
    let mut r = ZERO_VEC;
    for i in 0..n {
        r[i] = a[i] - b[i];
    }
    r
}

/// a + c*b
pub fn axpy(n: usize, a: &Vec3, c: f64, b: &Vec3) -> Vec3 {
    let mut r = ZERO_VEC;
    for i in 0..n {
        r[i] = a[i] + c * b[i];
    }
    r
}

pub fn mat_vec(n: usize, m: &Mat3, v: &Vec3) -> Vec3 {
    let mut r = ZERO_VEC;
    for i in 0..n {
        for j in 0..n {
            r[i] += m[i][j] * v[j];
        }
    }
    r
}

/// v^T M w
pub fn quad_form(n: usize, m: &Mat3, v: &Vec3, w: &Vec3) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += m[i][j] * v[i] * w[j];
        }
    }
    s
}

pub fn det(n: usize, m: &Mat3) -> f64 {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => panic!("dimension {n} out of range"),
    }
}

/// Inverse via cofactors. Returns `None` when |det| is below `1e-300`.
pub fn inverse(n: usize, m: &Mat3) -> Option<Mat3> {
    let d = det(n, m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut r = ZERO_MAT;
    match n {
        2 => {
            r[0][0] = m[1][1] / d;
            r[0][1] = -m[0][1] / d;
            r[1][0] = -m[1][0] / d;
            r[1][1] = m[0][0] / d;
        }
        3 => {
            r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
            r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
            r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
            r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
            r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
            r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
            r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
            r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
            r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
        }
        _ => panic!("dimension {n} out of range"),
    }
    Some(r)
}

/// Solve M x = b for SPD or general small M. Returns `None` on singularity.
pub fn solve(n: usize, m: &Mat3, b: &Vec3) -> Option<Vec3> {
    inverse(n, m).map(|inv| mat_vec(n, &inv, b))
}

/// Eigenvalues of a symmetric matrix, ascending.
///
/// 2x2 closed form; 3x3 via the trigonometric method (Smith's algorithm).
pub fn sym_eigenvalues(n: usize, m: &Mat3) -> Vec3 {
    match n {
        2 => {
            let tr = m[0][0] + m[1][1];
            let d = det(2, m);
            let disc = (tr * tr / 4.0 - d).max(0.0).sqrt();
            [tr / 2.0 - disc, tr / 2.0 + disc, 0.0]
        }
        3 => {
            let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
            let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
            if p1 < 1e-300 {
                let mut ev = [m[0][0], m[1][1], m[2][2]];
                ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
                return ev;
            }
            let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2)
                + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let mut b = ZERO_MAT;
            for i in 0..3 {
                for j in 0..3 {
                    b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
                }
            }
            let r = (det(3, &b) / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let e1 = q + 2.0 * p * phi.cos();
            let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            let e2 = 3.0 * q - e1 - e3;
            let mut ev = [e1, e2, e3];
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ev
        }
        _ => panic!("dimension {n} out of range"),
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_eig_min(n: usize, m: &Mat3) -> f64 {
    sym_eigenvalues(n, m)[0]
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_eig_max(n: usize, m: &Mat3) -> f64 {
    sym_eigenvalues(n, m)[n - 1]
}

/// Smallest generalized eigenvalue of the pencil (A, B) with B SPD,
/// i.e. min over y != 0 of A(y,y)/B(y,y).
pub fn sym_gen_eig_min(n: usize, a: &Mat3, b: &Mat3) -> f64 {
    // Cholesky of B, then ordinary eigenvalues of L^-1 A L^-T.
    let l = cholesky(n, b).expect("generalized eigenvalue pencil requires SPD B");
    let linv = lower_inverse(n, &l);
    let mut c = ZERO_MAT;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..n {
                for q in 0..n {
                    s += linv[i][p] * a[p][q] * linv[j][q];
                }
            }
            c[i][j] = s;
        }
    }
    sym_eig_min(n, &c)
}

/// Cholesky factor L with M = L L^T. Returns `None` when M is not SPD.
pub fn cholesky(n: usize, m: &Mat3) -> Option<Mat3> {
    let mut l = ZERO_MAT;
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn lower_inverse(n: usize, l: &Mat3) -> Mat3 {
    let mut inv = ZERO_MAT;
    for i in 0..n {
        inv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s += l[i][k] * inv[k][j];
            }
            inv[i][j] = -s / l[i][i];
        }
    }
    inv
}

/// True when the symmetric matrix is positive definite.
pub fn is_spd(n: usize, m: &Mat3) -> bool {
    cholesky(n, m).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_roundtrip_3x3() {
        let m: Mat3 = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 5.0]];
        let inv = inverse(3, &m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += m[i][k] * inv[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(s, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalues_3x3_diagonal_dominant() {
        let m: Mat3 = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 7.0]];
        let ev = sym_eigenvalues(3, &m);
        assert_relative_eq!(ev[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(ev[2], 7.0, epsilon = 1e-12);
    }

    #[test]
    fn generalized_eigenvalue_matches_rayleigh_scan() {
        let a: Mat3 = [[1.0, 0.3, 0.0], [0.3, -2.0, 0.0], [0.0, 0.0, 0.0]];
        let b: Mat3 = [[2.0, 0.1, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 0.0]];
        let lam = sym_gen_eig_min(2, &a, &b);
        let mut best = f64::INFINITY;
        for k in 0..3600 {
            let th = 2.0 * std::f64::consts::PI * (k as f64) / 3600.0;
            let y = [th.cos(), th.sin(), 0.0];
            best = best.min(quad_form(2, &a, &y, &y) / quad_form(2, &b, &y, &y));
        }
        assert_relative_eq!(lam, best, epsilon = 1e-5);
    }
}
