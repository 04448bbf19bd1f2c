//! Small dense linear algebra on `f64` slices.
//!
//! Everything here works in dimension at most [`MAX_DIM`], which keeps the
//! hot loops (parallelepiped volumes over millions of direction tuples)
//! allocation free.

/// Largest ambient dimension supported by the stack-allocated kernels.
pub const MAX_DIM: usize = 8;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Coordinates of `v` in the orthonormal frame `basis`.
pub fn coordinates(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    basis.iter().map(|b| dot(v, b)).collect()
}

/// Determinant of an `n x n` row-major matrix, destroying the input.
pub fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            if f != 0.0 {
                for c in col..n {
                    a[row * n + c] -= f * a[col * n + c];
                }
            }
        }
    }
    det
}

/// Solves `A x = b` for a square row-major `A` with partial pivoting.
///
/// Returns `None` when a pivot falls below `rel_pivot` times the largest
/// entry of `A`, i.e. the system is numerically singular.
pub fn solve(a: &[f64], b: &[f64], n: usize, rel_pivot: f64) -> Option<Vec<f64>> {
    debug_assert!(n <= MAX_DIM);
    let mut m = [0.0; MAX_DIM * MAX_DIM];
    let mut rhs = [0.0; MAX_DIM];
    m[..n * n].copy_from_slice(&a[..n * n]);
    rhs[..n].copy_from_slice(&b[..n]);
    let scale = a[..n * n].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let threshold = rel_pivot * scale;
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for row in col + 1..n {
            let v = m[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best <= threshold {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            rhs.swap(col, piv);
        }
        let p = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            if f != 0.0 {
                for c in col..n {
                    m[row * n + c] -= f * m[col * n + c];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= m[row * n + c] * x[c];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}

/// `j`-volume of the parallelepiped spanned by `vectors` (all of the same
/// length `d >= j`). Uses `|det|` when `j == d` and the Gram determinant
/// otherwise.
pub fn parallelepiped_volume<V: AsRef<[f64]>>(vectors: &[V]) -> f64 {
    let j = vectors.len();
    if j == 0 {
        return 1.0;
    }
    let d = vectors[0].as_ref().len();
    debug_assert!(j <= d && d <= MAX_DIM);
    let mut m = [0.0; MAX_DIM * MAX_DIM];
    if j == d {
        for (r, v) in vectors.iter().enumerate() {
            m[r * d..(r + 1) * d].copy_from_slice(v.as_ref());
        }
        return det_in_place(&mut m[..d * d], d).abs();
    }
    for r in 0..j {
        for c in r..j {
            let g = dot(vectors[r].as_ref(), vectors[c].as_ref());
            m[r * j + c] = g;
            m[c * j + r] = g;
        }
    }
    det_in_place(&mut m[..j * j], j).max(0.0).sqrt()
}

/// Pivoted Gram–Schmidt. Returns an orthonormal basis of the span of
/// `vectors`; a candidate whose residual is at most `rel_tol` times the
/// largest input norm is treated as dependent.
pub fn orthonormal_basis<V: AsRef<[f64]>>(vectors: &[V], rel_tol: f64) -> Vec<Vec<f64>> {
    let mut residuals: Vec<Vec<f64>> = vectors.iter().map(|v| v.as_ref().to_vec()).collect();
    let scale = residuals.iter().fold(0.0f64, |acc, v| acc.max(norm(v)));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    let mut used = vec![false; residuals.len()];
    loop {
        let mut best = None;
        let mut best_norm = rel_tol * scale;
        for (i, r) in residuals.iter().enumerate() {
            if used[i] {
                continue;
            }
            let n = norm(r);
            if n > best_norm {
                best_norm = n;
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        used[i] = true;
        let q: Vec<f64> = residuals[i].iter().map(|x| x / best_norm).collect();
        for (k, r) in residuals.iter_mut().enumerate() {
            if used[k] {
                continue;
            }
            let c = dot(r, &q);
            for (x, qx) in r.iter_mut().zip(&q) {
                *x -= c * qx;
            }
        }
        // second pass keeps the basis orthonormal to working precision
        let mut q = q;
        for b in &basis {
            let c = dot(&q, b);
            for (x, bx) in q.iter_mut().zip(b) {
                *x -= c * bx;
            }
        }
        let n = norm(&q);
        for x in &mut q {
            *x /= n;
        }
        basis.push(q);
    }
    basis
}

pub fn rank<V: AsRef<[f64]>>(vectors: &[V], rel_tol: f64) -> usize {
    orthonormal_basis(vectors, rel_tol).len()
}

/// Orthonormal basis of the orthogonal complement of `span(vectors)` in
/// `R^d`. Returns `None` if the vectors are linearly dependent within
/// `rel_tol`.
pub fn orthogonal_complement<V: AsRef<[f64]>>(
    vectors: &[V],
    d: usize,
    rel_tol: f64,
) -> Option<Vec<Vec<f64>>> {
    let span = orthonormal_basis(vectors, rel_tol);
    if span.len() < vectors.len() {
        return None;
    }
    let mut full = span.clone();
    let mut complement = Vec::with_capacity(d - span.len());
    while full.len() < d {
        // pick the unit vector with the largest residual
        let mut best: Option<Vec<f64>> = None;
        let mut best_norm = 0.0;
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            for b in &full {
                let c = dot(&e, b);
                for (x, bx) in e.iter_mut().zip(b) {
                    *x -= c * bx;
                }
            }
            let n = norm(&e);
            if n > best_norm {
                best_norm = n;
                best = Some(e);
            }
        }
        let mut q = best.expect("complement exists when rank < d");
        for b in &full {
            let c = dot(&q, b);
            for (x, bx) in q.iter_mut().zip(b) {
                *x -= c * bx;
            }
        }
        let n = norm(&q);
        for x in &mut q {
            *x /= n;
        }
        full.push(q.clone());
        complement.push(q);
    }
    Some(complement)
}
