//! Small dense linear-algebra helpers shared by the covariance and GP modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Absolute PSD/PD threshold used throughout: `1e-10 * max(1, trace)`.
pub fn eigen_tolerance(trace: f64) -> f64 {
    1e-10 * trace.abs().max(1.0)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of `(m + mᵀ)/2`, sorted ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Smallest eigenvalue of the symmetrized matrix; `+inf` for an empty matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn mean(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.sum() / m.len() as f64
    }
}

/// Lower-triangular `k×k` factor from a packed vector: diagonal entries are
/// `exp` of the stored values, off-diagonal entries are stored raw.
/// Entries are read row by row (`(0,0), (1,0), (1,1), (2,0), ...`).
pub fn cholesky_from_log_diag(k: usize, packed: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(packed.len(), k * (k + 1) / 2);
    let mut l = DMatrix::zeros(k, k);
    let mut it = packed.iter();
    for i in 0..k {
        for j in 0..=i {
            let v = *it.next().expect("packed length checked");
            l[(i, j)] = if i == j { v.exp() } else { v };
        }
    }
    l
}

/// Inverse of [`cholesky_from_log_diag`]; `None` when `m` is not positive definite.
pub fn log_diag_from_spd(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    let k = m.nrows();
    if k == 0 {
        return Some(Vec::new());
    }
    let chol = nalgebra::Cholesky::new(symmetrize(m))?;
    let l = chol.l();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in 0..=i {
            let v = l[(i, j)];
            out.push(if i == j { v.ln() } else { v });
        }
    }
    if out.iter().all(|v| v.is_finite()) {
        Some(out)
    } else {
        None
    }
}

/// Forward substitution `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Back substitution `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_diag_round_trip() {
        let packed = [0.3, -0.4, 0.1, 0.7, 0.2, -0.5];
        let l = cholesky_from_log_diag(3, &packed);
        let m = &l * l.transpose();
        let back = log_diag_from_spd(&m).unwrap();
        for (a, b) in packed.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn triangular_solves() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 1.5]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = solve_lower(&l, &b);
        assert!((&l * &x - &b).norm() < 1e-14);
        let y = solve_lower_transpose(&l, &b);
        assert!((l.transpose() * &y - &b).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }
}
