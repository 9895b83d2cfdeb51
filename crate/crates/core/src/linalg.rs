//! Small dense helpers: trace norms, tangent frames, reproducible sums.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Sum of singular values.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() || m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.sum()
}

/// Smallest eigenvalue of a symmetric matrix (upper triangle is trusted).
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i <= j {
            m[(i, j)]
        } else {
            m[(j, i)]
        }
    });
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub fn dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn enorm(a: &DVector<f64>) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormal basis (under `inner`) of the `inner`-orthogonal complement of
/// `normal`.
///
/// Deterministic Gram–Schmidt seeded from the coordinate axes; the axis most
/// parallel to `normal` is dropped.
pub fn complement_basis<F>(normal: &DVector<f64>, inner: F) -> Vec<DVector<f64>>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let n = normal.len();
    let nn = inner(normal, normal);
    let axis = |k: usize| {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        e
    };
    let drop = (0..n)
        .map(|k| {
            let e = axis(k);
            let c = inner(&e, normal);
            (k, c * c / inner(&e, &e))
        })
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n.saturating_sub(1));
    for k in (0..n).filter(|k| *k != drop) {
        let mut v = axis(k);
        v -= normal * (inner(&v, normal) / nn);
        for b in &basis {
            v -= b * inner(&v, b);
        }
        let len = inner(&v, &v).sqrt();
        basis.push(v / len);
    }
    basis
}

/// Pairwise (cascade) summation; the tree depends only on the slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trace_norm_basics() {
        assert_eq!(trace_norm(&DMatrix::identity(2, 2)), 2.0);
        assert_eq!(trace_norm(&DMatrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn trace_norm_against_gram_eigenvalues() {
        // singular values are square roots of the eigenvalues of MᵀM, which
        // for 2×2 follow from trace and determinant
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.gen_range(-3.0..3.0));
            let g = m.transpose() * &m;
            let (tr, det) = (g.trace(), g.determinant());
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let oracle = (tr / 2.0 + disc).sqrt() + (tr / 2.0 - disc).max(0.0).sqrt();
            assert!((trace_norm(&m) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let inner = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
        let normal = DVector::from_vec(vec![0.2, -1.0, 0.4]);
        let basis = complement_basis(&normal, inner);
        assert_eq!(basis.len(), 2);
        for (i, a) in basis.iter().enumerate() {
            assert!(inner(a, &normal).abs() < 1e-14);
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((inner(a, b) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
