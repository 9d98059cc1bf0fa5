//! Small dense vector helpers shared by the geometric modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n <= 1e-300 || !n.is_finite() {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// Vectors whose residual norm falls below `tol` times their original norm are
/// dropped, so the output spans the same space with orthonormal vectors.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let orig = norm(v);
        if orig <= 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _pass in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }
        let r = norm(&w);
        if r > tol * orig {
            out.push(scale(&w, 1.0 / r));
        }
    }
    out
}

/// Extend an orthonormal family to an orthonormal basis of ℝ^dim, completing
/// with standard basis vectors in index order.
pub fn complete_basis(family: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = family.to_vec();
    for i in 0..dim {
        all.push(unit(dim, i));
    }
    let ortho = orthonormalize(&all, 1e-8);
    ortho.into_iter().take(dim).collect()
}

/// Orthonormal basis of the orthogonal complement of span(family) in ℝ^dim.
pub fn complement(family: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let full = complete_basis(family, dim);
    full.into_iter().skip(family.len()).collect()
}

/// Eigen-decomposition of a symmetric matrix given row-major; eigenpairs sorted
/// by decreasing eigenvalue.
pub fn sym_eigen(mat: &[f64], dim: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = DMatrix::from_row_slice(dim, dim, mat);
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Cosines of the principal angles between two orthonormal families (descending).
pub fn principal_cosines(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &b[j]));
    let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s.into_iter().map(|c| c.min(1.0)).collect()
}

/// Least-squares solve of `a x = b` (a is rows×cols, row-major) via SVD.
pub fn lstsq(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(rows, cols, a);
    let rhs = DVector::from_column_slice(b);
    let svd = m.svd(true, true);
    svd.solve(&rhs, 1e-12).ok().map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let v = vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 1.0, 0.0]];
        let q = orthonormalize(&v, 1e-10);
        assert_eq!(q.len(), 2);
        assert!(dot(&q[0], &q[1]).abs() < 1e-14);
    }

    #[test]
    fn completion_of_trailing_axis_is_identity() {
        let b = complete_basis(&[], 3);
        for (i, row) in b.iter().enumerate() {
            assert_eq!(row, &unit(3, i));
        }
    }

    #[test]
    fn eigen_sorted_descending() {
        let (vals, _) = sym_eigen(&[1.0, 0.0, 0.0, 3.0], 2);
        assert_eq!(vals, vec![3.0, 1.0]);
    }
}
