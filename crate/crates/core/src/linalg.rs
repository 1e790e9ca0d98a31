//! Small dense helpers shared by the geometric modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative singular-value cut used for rank decisions on frames.
pub const RANK_REL_TOL: f64 = 1e-10;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Thin singular value decomposition `m = U·diag(σ)·Vᵀ` with `σ` descending.
///
/// For `rows ≥ cols`, `V` is square orthogonal and columns of `U` paired with a zero singular
/// value are zero. Wide inputs are handled through the transpose, swapping these roles.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided Jacobi SVD. Small singular values are computed to high relative accuracy,
/// which rank decisions on nearly intersecting subspaces depend on.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let mut u = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let alpha = u.column(i).norm_squared();
                let beta = u.column(j).norm_squared();
                let gamma = u.column(i).dot(&u.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let (a, b) = (u[(k, i)], u[(k, j)]);
                    u[(k, i)] = c * a - s * b;
                    u[(k, j)] = s * a + c * b;
                }
                for k in 0..cols {
                    let (a, b) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * a - s * b;
                    v[(k, j)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut out_u = DMatrix::zeros(rows, cols);
    let mut out_v = DMatrix::zeros(cols, cols);
    let mut sigma = DVector::zeros(cols);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        if norms[src] > 0.0 {
            out_u.set_column(dst, &(u.column(src) / norms[src]));
        }
        out_v.set_column(dst, &v.column(src));
    }
    Svd {
        u: out_u,
        singular_values: sigma,
        v: out_v,
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    svd(m).singular_values
}

/// Orthonormal basis of the column space of `m`, requiring full column rank.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok(DMatrix::zeros(rows, 0));
    }
    if rows < cols {
        return Err(Error::RankDeficient(format!(
            "{cols} columns cannot be independent in dimension {rows}"
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite frame entry".into()));
    }
    let svd = svd(m);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= RANK_REL_TOL * smax {
        return Err(Error::RankDeficient(format!(
            "smallest singular value {smin:e} against largest {smax:e}"
        )));
    }
    Ok(svd.u)
}

/// Orthonormal basis of `{x : m x = 0}`, using a relative singular-value cut.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad to a square matrix so the SVD returns a complete right basis.
    let size = rows.max(cols);
    let mut padded = DMatrix::zeros(size, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = svd(&padded);
    let smax = svd.singular_values.max();
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    let picked: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= cut)
        .collect();
    let mut out = DMatrix::zeros(cols, picked.len());
    for (j, &i) in picked.iter().enumerate() {
        out.set_column(j, &svd.v.column(i));
    }
    out
}

/// Residual of `vecs` after orthogonal projection onto the span of the orthonormal `basis`.
pub fn projection_residual(basis: &DMatrix<f64>, vecs: &DMatrix<f64>) -> DMatrix<f64> {
    vecs - basis * (basis.transpose() * vecs)
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = m.nrows();
    if d == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_symmetric<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, d, d);
    (&g + g.transpose()) * (0.5 * scale)
}

pub fn columns_to_matrix(rows: usize, cols: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        if c.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: c.len(),
            });
        }
        m.set_column(j, c);
    }
    Ok(m)
}
