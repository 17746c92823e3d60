//! Small dense linear algebra: 4×4 jet matrices and the closed-form symmetric
//! 3×3 eigensolver.

use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::jet::Jet;

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];
pub type Mat4 = [[f64; 4]; 4];
pub type Mat4J = [[Jet; 4]; 4];

pub fn mat4j_values(m: &Mat4J) -> Mat4 {
    core::array::from_fn(|a| core::array::from_fn(|b| m[a][b].value()))
}

pub fn mat4j_truncate(m: &Mat4J, order: u8) -> Mat4J {
    core::array::from_fn(|a| core::array::from_fn(|b| m[a][b].truncate(order)))
}

pub fn mat4j_constant(m: &Mat4, order: u8) -> Mat4J {
    core::array::from_fn(|a| core::array::from_fn(|b| Jet::constant(m[a][b], order)))
}

/// Leading principal minors of a 4×4 matrix, smallest first.
pub fn leading_minors(m: &Mat4) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (n, slot) in out.iter_mut().enumerate() {
        let size = n + 1;
        let mut a = [[0.0; 4]; 4];
        for i in 0..size {
            for j in 0..size {
                a[i][j] = m[i][j];
            }
        }
        *slot = det_small(&mut a, size);
    }
    out
}

fn det_small(a: &mut Mat4, n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let mut piv = c;
        for r in c + 1..n {
            if a[r][c].abs() > a[piv][c].abs() {
                piv = r;
            }
        }
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}

/// Checks positive-definiteness through the leading principal minors.
pub fn check_positive_definite(m: &Mat4) -> Result<()> {
    for (i, d) in leading_minors(m).iter().enumerate() {
        if !(*d > 0.0) {
            return Err(Error::NotPositiveDefinite {
                minor: i + 1,
                value: *d,
            });
        }
    }
    Ok(())
}

/// Determinant and inverse of a jet matrix by Gauss–Jordan elimination
/// without pivoting (the caller guarantees positive-definiteness).
pub fn det_inverse4(m: &Mat4J) -> Result<(Jet, Mat4J)> {
    let order = m[0][0].order();
    let mut a = m.clone();
    let mut inv: Mat4J = core::array::from_fn(|i| {
        core::array::from_fn(|j| Jet::constant(if i == j { 1.0 } else { 0.0 }, order))
    });
    let mut det = Jet::constant(1.0, order);
    for c in 0..4 {
        let pivot = a[c][c].clone();
        det = &det * &pivot;
        let r = pivot.recip()?;
        for k in 0..4 {
            a[c][k] = &a[c][k] * &r;
            inv[c][k] = &inv[c][k] * &r;
        }
        for row in 0..4 {
            if row == c {
                continue;
            }
            let f = a[row][c].clone();
            if f.taylor_coeffs().iter().all(|v| *v == 0.0) {
                continue;
            }
            for k in 0..4 {
                let t = &f * &a[c][k];
                a[row][k] -= &t;
                let t = &f * &inv[c][k];
                inv[row][k] -= &t;
            }
        }
    }
    Ok((det, inv))
}

/// Determinant and inverse of a positive-definite matrix, same elimination
/// as [`det_inverse4`] in plain floating point.
pub fn det_inverse4_f64(m: &Mat4) -> Result<(f64, Mat4)> {
    let mut a = *m;
    let mut inv: Mat4 =
        core::array::from_fn(|i| core::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }));
    let mut det = 1.0;
    for c in 0..4 {
        let pivot = a[c][c];
        if pivot == 0.0 {
            return Err(Error::Domain("singular matrix".into()));
        }
        det *= pivot;
        for k in 0..4 {
            a[c][k] /= pivot;
            inv[c][k] /= pivot;
        }
        for row in 0..4 {
            if row == c || a[row][c] == 0.0 {
                continue;
            }
            let f = a[row][c];
            for k in 0..4 {
                a[row][k] -= f * a[c][k];
                inv[row][k] -= f * inv[c][k];
            }
        }
    }
    Ok((det, inv))
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

fn scale3(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn mat3_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    core::array::from_fn(|i| dot3(&m[i], v))
}

/// Eigenvalues of a symmetric 3×3 matrix in descending order.
///
/// Trigonometric closed form; the eigenvalue farthest from the others gets
/// one Newton step on the characteristic polynomial (kept only when it
/// reduces the residual) and the remaining pair is solved exactly on its
/// invariant plane.
pub fn sym3_eigenvalues(m: &Mat3) -> Vec3 {
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    if off == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| b.total_cmp(a));
        return d;
    }
    let b: Mat3 = core::array::from_fn(|i| {
        core::array::from_fn(|j| (m[i][j] - if i == j { q } else { 0.0 }) / p)
    });
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;

    // Characteristic polynomial λ³ − c2 λ² + c1 λ − c0.
    let c2 = 3.0 * q;
    let c1 = m[0][0] * m[1][1] + m[0][0] * m[2][2] + m[1][1] * m[2][2] - off;
    let c0 = det3(m);
    let poly = |x: f64| ((x - c2) * x + c1) * x - c0;
    let dpoly = |x: f64| (3.0 * x - 2.0 * c2) * x + c1;
    let polish = |x: f64| {
        let d = dpoly(x);
        if d.abs() <= f64::EPSILON * p * p {
            return x;
        }
        let y = x - poly(x) / d;
        if poly(y).abs() < poly(x).abs() {
            y
        } else {
            x
        }
    };
    // The trigonometric pair closest together is only accurate to about
    // sqrt(eps) near a double root, where Newton stalls as well. The isolated
    // eigenvalue is polished and the pair recomputed on its orthogonal
    // complement, where the 2×2 formula is exact to rounding.
    let (isolated, top) = if l1 - l2 >= l2 - l3 {
        (polish(l1), true)
    } else {
        (polish(l3), false)
    };
    let v = null_vector(m, isolated);
    let u = orthogonal_unit(&v);
    let w = cross(&v, &u);
    let mu = mat3_vec(m, &u);
    let mw = mat3_vec(m, &w);
    let (a, b, d) = (
        dot3(&u, &mu),
        0.5 * (dot3(&u, &mw) + dot3(&w, &mu)),
        dot3(&w, &mw),
    );
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let mut ev = if top {
        [isolated, mean + radius, mean - radius]
    } else {
        [mean + radius, mean - radius, isolated]
    };
    if ev[0] < ev[1] {
        ev.swap(0, 1);
    }
    if ev[1] < ev[2] {
        ev.swap(1, 2);
    }
    if ev[0] < ev[1] {
        ev.swap(0, 1);
    }
    ev
}

/// Unit null vector of `m − λI`: cross product of the two rows spanning the
/// largest area, falling back to a vector orthogonal to the largest row when
/// the matrix has rank ≤ 1.
pub fn null_vector(m: &Mat3, lambda: f64) -> Vec3 {
    let rows: [Vec3; 3] = core::array::from_fn(|i| {
        core::array::from_fn(|j| m[i][j] - if i == j { lambda } else { 0.0 })
    });
    let candidates = [
        cross(&rows[0], &rows[1]),
        cross(&rows[1], &rows[2]),
        cross(&rows[2], &rows[0]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| dot3(a, a).total_cmp(&dot3(b, b)))
        .copied()
        .unwrap_or([0.0; 3]);
    let scale = rows.iter().map(|r| dot3(r, r)).fold(0.0, f64::max);
    if dot3(&best, &best) > 1e-24 * scale * scale && scale > 0.0 {
        return scale3(&best, 1.0 / norm3(&best));
    }
    let pivot = rows
        .iter()
        .max_by(|a, b| dot3(a, a).total_cmp(&dot3(b, b)))
        .copied()
        .unwrap_or([0.0; 3]);
    orthogonal_unit(&pivot)
}

/// Some unit vector orthogonal to `v` (any unit vector if `v = 0`).
pub fn orthogonal_unit(v: &Vec3) -> Vec3 {
    if dot3(v, v) == 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let axis = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
        [1.0, 0.0, 0.0]
    } else if v[1].abs() <= v[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let c = cross(v, &axis);
    scale3(&c, 1.0 / norm3(&c))
}

/// Eigen-decomposition of a symmetric 3×3 matrix: descending eigenvalues and
/// an orthonormal right-handed set of eigenvectors (`vectors[i]` belongs to
/// `values[i]`).
pub fn sym3_eigen(m: &Mat3) -> (Vec3, [Vec3; 3]) {
    let ev = sym3_eigenvalues(m);
    let scale = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tiny = 1e-12 * scale;
    let gap12 = ev[0] - ev[1];
    let gap23 = ev[1] - ev[2];
    if scale == 0.0 || (gap12 <= tiny && gap23 <= tiny) {
        return (ev, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }
    let orthonormalize = |v: Vec3, against: &Vec3, degenerate: bool| -> Vec3 {
        let w = if degenerate {
            orthogonal_unit(against)
        } else {
            v
        };
        let w = [
            w[0] - dot3(&w, against) * against[0],
            w[1] - dot3(&w, against) * against[1],
            w[2] - dot3(&w, against) * against[2],
        ];
        let n = norm3(&w);
        if n < 1e-8 {
            orthogonal_unit(against)
        } else {
            scale3(&w, 1.0 / n)
        }
    };
    if gap12 >= gap23 {
        let v1 = null_vector(m, ev[0]);
        let v2 = orthonormalize(null_vector(m, ev[1]), &v1, gap23 <= tiny);
        let v3 = cross(&v1, &v2);
        (ev, [v1, v2, v3])
    } else {
        let v3 = null_vector(m, ev[2]);
        let v2 = orthonormalize(null_vector(m, ev[1]), &v3, gap12 <= tiny);
        let v1 = cross(&v2, &v3);
        (ev, [v1, v2, v3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let (ev, vecs) = sym3_eigen(&[[-1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0]]);
        assert_eq!(ev, [2.0, -1.0, -1.0]);
        assert!((vecs[0][1].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_satisfy_equation() {
        let m = [[1.0, 2.0, 0.5], [2.0, -3.0, 0.25], [0.5, 0.25, 2.0]];
        let (ev, vecs) = sym3_eigen(&m);
        for (l, v) in ev.iter().zip(&vecs) {
            let mv = mat3_vec(&m, v);
            for i in 0..3 {
                assert!((mv[i] - l * v[i]).abs() < 1e-12);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let d = dot3(&vecs[i], &vecs[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jet_inverse_matches_float_inverse() {
        let g: Mat4 = [
            [2.0, 0.1, 0.0, 0.3],
            [0.1, 1.5, 0.2, 0.0],
            [0.0, 0.2, 1.0, 0.1],
            [0.3, 0.0, 0.1, 3.0],
        ];
        let (det, inv) = det_inverse4(&mat4j_constant(&g, 0)).unwrap();
        let minors = leading_minors(&g);
        assert!((det.value() - minors[3]).abs() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| g[i][k] * inv[k][j].value()).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let mut g = [[0.0; 4]; 4];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        g[0][0] = -1.0;
        assert!(matches!(
            check_positive_definite(&g),
            Err(Error::NotPositiveDefinite { minor: 1, .. })
        ));
    }
}
