//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest condition number accepted by [`inverse_checked`].
pub const MAX_CONDITION: f64 = 1e12;

/// 2-norm condition number from the singular values. Empty matrices have condition 1.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse by partially pivoted LU, refused above [`MAX_CONDITION`].
pub fn inverse_checked(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok((DMatrix::zeros(0, 0), 1.0));
    }
    let cond = condition_number(m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { cond });
    }
    let inv = m.clone().lu().try_inverse().ok_or(Error::IllConditioned { cond })?;
    Ok((inv, cond))
}

/// Solve `m x = rhs` by partially pivoted LU with the same conditioning guard.
pub fn solve_checked(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (inv, _) = inverse_checked(m)?;
    Ok(inv * rhs)
}

/// Numerical rank with relative tolerance on the singular values.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * max).count()
}

/// Orthonormal basis of the column space of `cols`, by modified Gram-Schmidt with
/// reorthogonalization. Columns whose residual falls below `rel_tol` are dropped.
pub fn column_basis(cols: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let m = cols.nrows();
    let scale = cols.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).into_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > rel_tol * scale {
            basis.push(v / norm);
        }
    }
    if basis.is_empty() {
        return DMatrix::zeros(m, 0);
    }
    DMatrix::from_columns(&basis)
}

/// Orthonormal basis, as rows, of the orthogonal complement of the column space of `cols`.
///
/// Pivoted Gram-Schmidt over the coordinate axes: at every step the axis with the
/// largest residual norm is taken next, so the result is deterministic.
pub fn complement_rows(cols: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let m = cols.nrows();
    let mut basis: Vec<DVector<f64>> = column_basis(cols, rel_tol).column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    let mut candidates: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut out = Vec::new();
    while basis.len() < m {
        for c in candidates.iter_mut() {
            for _ in 0..2 {
                for q in &basis {
                    let d = q.dot(c);
                    c.axpy(-d, q, 1.0);
                }
            }
        }
        let (best, norm) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm <= 1e-8 {
            break;
        }
        let q = candidates.swap_remove(best) / norm;
        basis.push(q.clone());
        out.push(q.transpose());
    }
    debug_assert_eq!(basis.len() - start, out.len());
    if out.is_empty() {
        return DMatrix::zeros(0, m);
    }
    DMatrix::from_rows(&out)
}

/// Orthonormal complement from the unit eigenvectors of the projector `I - P_Z`.
///
/// A second, independent annihilator policy. Rows are ordered by eigenvector index.
pub fn complement_rows_projector(cols: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let m = cols.nrows();
    let q = column_basis(cols, rel_tol);
    let proj = DMatrix::<f64>::identity(m, m) - &q * q.transpose();
    let eig = proj.symmetric_eigen();
    let mut idx: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
    let rows: Vec<_> = idx.iter().map(|&i| eig.eigenvectors.column(i).transpose()).collect();
    if rows.is_empty() {
        return DMatrix::zeros(0, m);
    }
    DMatrix::from_rows(&rows)
}

/// Max-abs entry.
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Row-major nested vectors.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Build a matrix from row-major nested vectors; `ncols` is used when there are no rows.
pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, ncols));
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod serde_rows {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Doc {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        Doc { rows: m.nrows(), cols: m.ncols(), data: to_rows(m) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let doc = Doc::deserialize(d)?;
        if doc.data.len() != doc.rows || doc.data.iter().any(|r| r.len() != doc.cols) {
            return Err(serde::de::Error::custom("matrix shape does not match its data"));
        }
        Ok(DMatrix::from_fn(doc.rows, doc.cols, |i, j| doc.data[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_of_axis() {
        let z = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = complement_rows(&z, 1e-12);
        assert_eq!(b.nrows(), 2);
        assert_eq!(norm_inf(&(&b * &z)), 0.0);
    }

    #[test]
    fn both_policies_span_the_same_space() {
        let z = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 1.0, 3.0, -2.0]);
        let b1 = complement_rows(&z, 1e-12);
        let b2 = complement_rows_projector(&z, 1e-12);
        assert!(norm_inf(&(&b1 * &z)) < 1e-12);
        assert!(norm_inf(&(&b2 * &z)) < 1e-12);
        let chi = &b2 * b1.transpose();
        assert!(norm_inf(&(&chi * &b1 - &b2)) < 1e-12);
    }

    #[test]
    fn refuses_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(inverse_checked(&m).is_err());
    }
}
