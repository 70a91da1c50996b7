//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest singular value. Empty matrices have norm zero.
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    singular_values(m)[0]
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// The `k`-th largest singular value (1-indexed); zero when `k` exceeds the rank budget.
pub fn sigma_k(m: &Mat, k: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    singular_values(m).get(k - 1).copied().unwrap_or(0.0)
}

/// Smallest singular value counted over `min(rows, cols)`.
pub fn sigma_min(m: &Mat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Spectral radius from the real Schur form. Falls back to Gelfand's formula
/// with repeated squaring when the QR iteration does not converge.
pub fn spectral_radius(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if let Some(schur) = Schur::try_new(a.clone(), 1e-14, 10_000) {
        return schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
    }
    let mut p = a.clone();
    let mut k = 1.0;
    for _ in 0..20 {
        let n = op_norm(&p);
        if n == 0.0 || !n.is_finite() {
            break;
        }
        p /= n;
        p = &p * &p;
        k *= 2.0;
    }
    op_norm(&(&p * a)).powf(1.0 / k)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eig(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eig(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Square root of a symmetric positive semidefinite matrix.
pub fn psd_sqrt(m: &Mat) -> Mat {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Assemble a dense matrix from a grid of blocks. Row heights come from the
/// first block of each row, column widths from the first row.
pub fn block(rows: &[Vec<&Mat>]) -> Mat {
    let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    let mut out = Mat::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            assert_eq!(b.nrows(), heights[i], "block row height");
            assert_eq!(b.ncols(), widths[j], "block column width");
            out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(*b);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    out
}

pub fn vstack(parts: &[&Mat]) -> Mat {
    let rows: Vec<Vec<&Mat>> = parts.iter().map(|p| vec![*p]).collect();
    block(&rows)
}

pub fn hstack(parts: &[&Mat]) -> Mat {
    block(&[parts.to_vec()])
}

pub fn vcat(parts: &[&Vector]) -> Vector {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(n);
    let mut k = 0;
    for p in parts {
        out.rows_mut(k, p.len()).copy_from(*p);
        k += p.len();
    }
    out
}

pub fn block_diag(parts: &[&Mat]) -> Mat {
    let r: usize = parts.iter().map(|p| p.nrows()).sum();
    let c: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::zeros(r, c);
    let (mut r0, mut c0) = (0, 0);
    for p in parts {
        out.view_mut((r0, c0), (p.nrows(), p.ncols())).copy_from(*p);
        r0 += p.nrows();
        c0 += p.ncols();
    }
    out
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Build a matrix from row-major nested arrays. `ncols` is used when there
/// are no rows to infer it from.
pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Mat, String> {
    if rows.is_empty() {
        return Ok(Mat::zeros(0, ncols));
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        return Err("ragged matrix rows".into());
    }
    Ok(Mat::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod rowmajor {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        from_rows(&rows, 0).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for a list of matrices.
pub mod rowmajor_list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[Mat], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Vec<Vec<f64>>> = ms.iter().map(rows_of).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
        let v: Vec<Vec<Vec<f64>>> = Vec::deserialize(d)?;
        v.iter()
            .map(|rows| from_rows(rows, 0).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for a list of vectors as nested arrays.
pub mod vector_list {
    use super::*;

    pub fn serialize<S: Serializer>(vs: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<&[f64]> = vs.iter().map(|x| x.as_slice()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        let v: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(Vector::from_vec).collect())
    }
}

/// Reshape a matrix to `r x c`, used when a serialized matrix had no rows
/// or empty rows and its true shape comes from its neighbours.
pub(crate) fn fix_shape(m: Mat, r: usize, c: usize) -> Result<Mat, String> {
    if m.nrows() == r && m.ncols() == c {
        Ok(m)
    } else if m.is_empty() && r * c == 0 {
        Ok(Mat::zeros(r, c))
    } else {
        Err(format!("expected {r}x{c} matrix, found {}x{}", m.nrows(), m.ncols()))
    }
}
