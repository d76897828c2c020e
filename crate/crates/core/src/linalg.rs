//! Covariance and principal-axis helpers over row-sample matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub fn column_means(rows: &DMatrix<f64>) -> DVector<f64> {
    let n = rows.nrows() as f64;
    DVector::from_iterator(rows.ncols(), rows.column_iter().map(|c| c.sum() / n))
}

pub fn centered(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = column_means(rows);
    let mut out = rows.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}

/// Unbiased sample covariance (`N − 1` denominator).
pub fn covariance(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rows.nrows() < 2 {
        return Err(Error::Contract(format!(
            "covariance needs at least 2 rows, got {}",
            rows.nrows()
        )));
    }
    let c = centered(rows);
    Ok(c.transpose() * &c / (rows.nrows() as f64 - 1.0))
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending; column
/// `i` of the returned matrix belongs to eigenvalue `i`.
pub fn sorted_eigen(sym: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(sym.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Number of eigenvalues above `tol · λ_max`; zero when `λ_max ≤ 0`.
pub fn numerical_rank(sorted_values: &[f64], tol: f64) -> usize {
    let largest = sorted_values.first().copied().unwrap_or(0.0);
    if largest <= 0.0 {
        return 0;
    }
    sorted_values.iter().filter(|&&v| v > tol * largest).count()
}

/// Leading principal axes of the rows: `(mean, axes, variances)` with the
/// first `k` eigenvectors of the covariance as columns of `axes`.
///
/// Each axis is oriented so that the projections onto it have non-negative
/// third central moment. This fixes the eigenvector sign from the data alone,
/// so it is unchanged by any rotation or reflection of the input cloud.
pub fn principal_axes(rows: &DMatrix<f64>, k: usize) -> Result<(DVector<f64>, DMatrix<f64>, Vec<f64>)> {
    let cov = covariance(rows)?;
    let (values, vectors) = sorted_eigen(&cov);
    let k = k.min(values.len());
    let mean = column_means(rows);
    let c = centered(rows);
    let mut axes = vectors.columns(0, k).into_owned();
    for mut axis in axes.column_iter_mut() {
        let proj = &c * &axis;
        let skew: f64 = proj.iter().map(|p| p * p * p).sum();
        let flip = if skew.abs() > 1e-12 * proj.norm_squared().powf(1.5).max(f64::MIN_POSITIVE) {
            skew < 0.0
        } else {
            // symmetric cloud: fall back to the largest component being positive
            axis.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best }) < 0.0
        };
        if flip {
            axis.neg_mut();
        }
    }
    Ok((mean, axes, values[..k].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_constructed_clouds() {
        let line = DMatrix::from_fn(50, 3, |i, j| (i as f64) * [1.0, -2.0, 0.5][j] + 4.0);
        let (vals, _) = sorted_eigen(&covariance(&line).unwrap());
        assert_eq!(numerical_rank(&vals, 1e-8), 1);
        let same = DMatrix::from_element(10, 3, 2.5);
        let (vals, _) = sorted_eigen(&covariance(&same).unwrap());
        assert_eq!(numerical_rank(&vals, 1e-8), 0);
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = sorted_eigen(&m);
        assert_eq!(vals, vec![5.0, 2.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_orientation_follows_skew() {
        // Long right tail along +x.
        let xs = [0.0, 0.1, 0.2, 0.1, 0.0, 5.0];
        let rows = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { xs[i] } else { 0.01 * i as f64 });
        let (_, axes, _) = principal_axes(&rows, 1).unwrap();
        assert!(axes[(0, 0)] > 0.0);
        let flipped = -rows;
        let (_, axes, _) = principal_axes(&flipped, 1).unwrap();
        assert!(axes[(0, 0)] < 0.0);
    }

    #[test]
    fn too_few_rows() {
        assert!(covariance(&DMatrix::zeros(1, 2)).is_err());
    }
}
