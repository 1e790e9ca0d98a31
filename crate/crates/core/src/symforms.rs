//! Symmetric bilinear forms with tolerance-aware inertia.
//!
//! Inertia is read off a symmetric eigendecomposition. An eigenvalue counts as zero when its
//! magnitude is at most `tol_rank * max(ρ, scale)`, where `ρ` is the spectral radius and
//! `scale` is an optional absolute reference magnitude (zero by default). Forms produced by
//! chart evaluations carry `scale = 1` so that a numerically vanishing form is not inflated
//! by its own round-off.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, sym_eigen};

pub const DEFAULT_TOL_RANK: f64 = 1e-9;

/// Eigenvalues within this factor of the zero cut are reported as marginal.
pub const MARGINAL_FACTOR: f64 = 10.0;

/// Default relative rank tolerance, overridable once per process through `MASLOVKIT_TOL`.
pub fn default_tol_rank() -> f64 {
    static TOL: OnceLock<f64> = OnceLock::new();
    *TOL.get_or_init(|| {
        std::env::var("MASLOVKIT_TOL")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t >= 0.0)
            .unwrap_or(DEFAULT_TOL_RANK)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    /// `n₋`: dimension of a maximal negative definite subspace.
    pub index: usize,
    /// `n₊`: dimension of a maximal positive definite subspace.
    pub coindex: usize,
    pub nullity: usize,
    pub signature: i64,
    /// Some eigenvalue sat within [`MARGINAL_FACTOR`] of the zero cut.
    pub marginal: bool,
}

impl Inertia {
    pub fn new(index: usize, coindex: usize, nullity: usize) -> Self {
        Inertia {
            index,
            coindex,
            nullity,
            signature: coindex as i64 - index as i64,
            marginal: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.index + self.coindex + self.nullity
    }

    /// Index and coindex exchanged, as for the negated form.
    pub fn negated(&self) -> Self {
        Inertia {
            index: self.coindex,
            coindex: self.index,
            nullity: self.nullity,
            signature: -self.signature,
            marginal: self.marginal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricForm {
    matrix: DMatrix<f64>,
    tol_rank: f64,
    scale: f64,
}

impl SymmetricForm {
    /// Builds a form from a square matrix, symmetrizing it as `(M + Mᵀ)/2`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "form matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite form entry".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Ok(SymmetricForm {
            matrix: sym,
            tol_rank: default_tol_rank(),
            scale: 0.0,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        SymmetricForm {
            matrix: DMatrix::zeros(dim, dim),
            tol_rank: default_tol_rank(),
            scale: 0.0,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput(
                "form rows must form a square matrix".into(),
            ));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn with_tol(mut self, tol_rank: f64) -> Self {
        self.tol_rank = tol_rank;
        self
    }

    /// Sets the absolute reference magnitude used as a floor for the zero cut.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale.abs();
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn tol_rank(&self) -> f64 {
        self.tol_rank
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.matrix * y)[(0, 0)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigen(&self.matrix).0
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |a, x| a.max(x.abs()))
    }

    /// Magnitude at or below which an eigenvalue is treated as zero.
    pub fn zero_cut(&self) -> f64 {
        self.tol_rank * self.spectral_radius().max(self.scale)
    }

    pub fn inertia(&self) -> Inertia {
        let values = self.eigenvalues();
        let reference = values
            .iter()
            .fold(0.0_f64, |a, x| a.max(x.abs()))
            .max(self.scale);
        if reference == 0.0 {
            return Inertia::new(0, 0, self.dim());
        }
        let cut = self.tol_rank * reference;
        let mut inertia = Inertia::new(0, 0, 0);
        for &v in &values {
            if v > cut {
                inertia.coindex += 1;
            } else if v < -cut {
                inertia.index += 1;
            } else {
                inertia.nullity += 1;
            }
            let m = v.abs();
            if m > cut / MARGINAL_FACTOR && m < cut * MARGINAL_FACTOR {
                inertia.marginal = true;
            }
        }
        inertia.signature = inertia.coindex as i64 - inertia.index as i64;
        inertia
    }

    /// Inertia with the kernel dimension decided externally: the `nullity` eigenvalues of
    /// smallest magnitude are taken as zero and the remaining ones are classified by sign.
    /// The result is flagged marginal when this disagrees with the form's own zero cut.
    pub fn inertia_with_nullity(&self, nullity: usize) -> Result<Inertia> {
        let d = self.dim();
        if nullity > d {
            return Err(Error::InvalidInput(format!(
                "nullity {nullity} exceeds form dimension {d}"
            )));
        }
        let mut values = self.eigenvalues();
        values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let own = self.inertia();
        let mut inertia = Inertia::new(0, 0, nullity);
        for &v in &values[nullity..] {
            if v > 0.0 {
                inertia.coindex += 1;
            } else {
                inertia.index += 1;
            }
        }
        inertia.signature = inertia.coindex as i64 - inertia.index as i64;
        inertia.marginal = own.marginal || own.nullity != nullity;
        Ok(inertia)
    }

    /// Orthonormal basis of the numerical kernel.
    pub fn kernel_basis(&self) -> Vec<DVector<f64>> {
        let (values, vectors) = sym_eigen(&self.matrix);
        let reference = values
            .iter()
            .fold(0.0_f64, |a, x| a.max(x.abs()))
            .max(self.scale);
        let cut = self.tol_rank * reference;
        values
            .iter()
            .enumerate()
            .filter(|(_, v)| reference == 0.0 || v.abs() <= cut)
            .map(|(i, _)| vectors.column(i).into_owned())
            .collect()
    }

    /// The `k×k` form `(B(wᵢ, wⱼ))` on the span of linearly independent vectors `W`.
    pub fn restrict(&self, w: &[DVector<f64>]) -> Result<SymmetricForm> {
        let d = self.dim();
        if w.is_empty() {
            return Ok(SymmetricForm::zeros(0).with_tol(self.tol_rank));
        }
        let wm = linalg::columns_to_matrix(d, w)?;
        let sv = linalg::singular_values(&wm);
        let (smin, smax) = (sv.min(), sv.max());
        if w.len() > d || smax == 0.0 || smin <= linalg::RANK_REL_TOL * smax {
            return Err(Error::RankDeficient(format!(
                "restriction vectors are dependent (singular values {smin:e}..{smax:e})"
            )));
        }
        let m = wm.transpose() * &self.matrix * &wm;
        Ok(SymmetricForm::new(m)?
            .with_tol(self.tol_rank)
            .with_scale(self.scale * smax * smax))
    }

    /// Congruence `AᵀBA`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<SymmetricForm> {
        if a.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.nrows(),
            });
        }
        let m = a.transpose() * &self.matrix * a;
        Ok(SymmetricForm::new(m)?
            .with_tol(self.tol_rank)
            .with_scale(self.scale))
    }

    pub fn negated(&self) -> SymmetricForm {
        SymmetricForm {
            matrix: -&self.matrix,
            tol_rank: self.tol_rank,
            scale: self.scale,
        }
    }

    pub fn try_add(&self, other: &SymmetricForm) -> Result<SymmetricForm> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(SymmetricForm {
            matrix: &self.matrix + &other.matrix,
            tol_rank: self.tol_rank.max(other.tol_rank),
            scale: self.scale.max(other.scale),
        })
    }

    pub fn scaled(&self, factor: f64) -> SymmetricForm {
        SymmetricForm {
            matrix: &self.matrix * factor,
            tol_rank: self.tol_rank,
            scale: self.scale * factor.abs(),
        }
    }
}

pub fn inertia(b: &SymmetricForm) -> Inertia {
    b.inertia()
}

pub fn kernel_basis(b: &SymmetricForm) -> Vec<DVector<f64>> {
    b.kernel_basis()
}

pub fn restrict_form(b: &SymmetricForm, w: &[DVector<f64>]) -> Result<SymmetricForm> {
    b.restrict(w)
}

/// Outcome of checking `−n₋(C) ≤ n₊(B+C) − n₊(B) ≤ n₊(C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationVerdict {
    pub holds: bool,
    pub difference: i64,
    pub lower_bound: i64,
    pub upper_bound: i64,
    pub lower_slack: i64,
    pub upper_slack: i64,
    /// Some rank decision involved a near-threshold eigenvalue.
    pub marginal: bool,
}

pub fn check_perturbation_bounds(
    b: &SymmetricForm,
    c: &SymmetricForm,
) -> Result<PerturbationVerdict> {
    let sum = b.try_add(c)?;
    let (ib, ic, is) = (b.inertia(), c.inertia(), sum.inertia());
    let difference = is.coindex as i64 - ib.coindex as i64;
    let lower_bound = -(ic.index as i64);
    let upper_bound = ic.coindex as i64;
    Ok(PerturbationVerdict {
        holds: lower_bound <= difference && difference <= upper_bound,
        difference,
        lower_bound,
        upper_bound,
        lower_slack: difference - lower_bound,
        upper_slack: upper_bound - difference,
        marginal: ib.marginal || ic.marginal || is.marginal,
    })
}

/// Left and right sides of `|n₊(B₁) − n₊(B₂) − n₊(B₁+C) + n₊(B₂+C)| ≤ n₋(C) + n₊(C)`.
pub fn difference_bound(
    b1: &SymmetricForm,
    b2: &SymmetricForm,
    c: &SymmetricForm,
) -> Result<(i64, i64)> {
    let np = |f: &SymmetricForm| f.inertia().coindex as i64;
    let lhs = (np(b1) - np(b2) - np(&b1.try_add(c)?) + np(&b2.try_add(c)?)).abs();
    let ic = c.inertia();
    Ok((lhs, (ic.index + ic.coindex) as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi rotations; independent of the LAPACK-style path used by the crate.
    fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[(i, i)]).collect()
    }

    fn oracle_n_plus(m: &DMatrix<f64>) -> i64 {
        let vals = jacobi_eigenvalues(m);
        let rho = vals.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        vals.iter().filter(|&&v| v > 1e-9 * rho).count() as i64
    }

    fn oracle_n_minus(m: &DMatrix<f64>) -> i64 {
        let vals = jacobi_eigenvalues(m);
        let rho = vals.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        vals.iter().filter(|&&v| v < -1e-9 * rho).count() as i64
    }

    #[test]
    fn inertia_of_diagonal_form() {
        let b = SymmetricForm::from_diagonal(&[2.0, -3.0, 0.0]).unwrap();
        let i = b.inertia();
        assert_eq!((i.index, i.coindex, i.nullity), (1, 1, 1));
        assert_eq!(i.signature, 0);
    }

    #[test]
    fn inertia_of_zero_form() {
        let i = SymmetricForm::zeros(4).inertia();
        assert_eq!((i.index, i.coindex, i.nullity), (0, 0, 4));
    }

    #[test]
    fn inertia_of_hyperbolic_plane() {
        let b = SymmetricForm::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let i = b.inertia();
        assert_eq!((i.index, i.coindex, i.nullity), (1, 1, 0));
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(SymmetricForm::new(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn symmetrizes_on_construction() {
        let b = SymmetricForm::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).unwrap();
        assert_eq!(b.matrix()[(0, 1)], b.matrix()[(1, 0)]);
        assert_eq!(b.matrix()[(0, 1)], 1.0);
    }

    #[test]
    fn kernel_examples() {
        let k = SymmetricForm::from_diagonal(&[1.0, 0.0])
            .unwrap()
            .kernel_basis();
        assert_eq!(k.len(), 1);
        assert!((k[0][1].abs() - 1.0).abs() < 1e-14);

        let id = SymmetricForm::new(DMatrix::identity(3, 3)).unwrap();
        assert!(id.kernel_basis().is_empty());

        let rank_one = SymmetricForm::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let k = rank_one.kernel_basis();
        assert_eq!(k.len(), 1);
        let expected = DVector::from_vec(vec![1.0, -1.0]) / 2f64.sqrt();
        let dot = k[0].dot(&expected).abs();
        assert!((dot - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restriction_examples() {
        let b = SymmetricForm::from_diagonal(&[1.0, -1.0, 1.0]).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let r = b.restrict(&[e1.clone(), e3]).unwrap();
        assert_eq!(r.matrix(), &DMatrix::identity(2, 2));

        let empty = b.restrict(&[]).unwrap();
        assert_eq!(empty.dim(), 0);
        assert_eq!(empty.inertia(), Inertia::new(0, 0, 0));

        let lorentz = SymmetricForm::from_diagonal(&[1.0, -1.0]).unwrap();
        let r = lorentz
            .restrict(&[DVector::from_vec(vec![1.0, 1.0])])
            .unwrap();
        assert_eq!(r.matrix()[(0, 0)], 0.0);

        let dependent = b.restrict(&[e1.clone(), e1 * 2.0]);
        assert!(matches!(dependent, Err(Error::RankDeficient(_))));
    }

    #[test]
    fn perturbation_examples() {
        let b = SymmetricForm::from_diagonal(&[1.0, -1.0]).unwrap();
        let c = SymmetricForm::from_diagonal(&[0.0, 2.0]).unwrap();
        let v = check_perturbation_bounds(&b, &c).unwrap();
        assert!(v.holds);
        assert_eq!(v.difference, 1);
        assert_eq!((v.lower_bound, v.upper_bound), (0, 1));
        assert_eq!(v.upper_slack, 0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = SymmetricForm::new(linalg::gaussian_symmetric(&mut rng, 4, 1.0)).unwrap();
        let v = check_perturbation_bounds(&SymmetricForm::zeros(4), &c).unwrap();
        assert_eq!(v.difference, c.inertia().coindex as i64);
        assert_eq!(v.upper_slack, 0);

        let mismatch =
            check_perturbation_bounds(&SymmetricForm::zeros(2), &SymmetricForm::zeros(3));
        assert!(matches!(mismatch, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn random_pair_against_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let bm = linalg::gaussian_symmetric(&mut rng, 5, 1.0);
            let cm = linalg::gaussian_symmetric(&mut rng, 5, 1.0);
            let v = check_perturbation_bounds(
                &SymmetricForm::new(bm.clone()).unwrap(),
                &SymmetricForm::new(cm.clone()).unwrap(),
            )
            .unwrap();
            let diff = oracle_n_plus(&(&bm + &cm)) - oracle_n_plus(&bm);
            assert_eq!(v.difference, diff);
            assert_eq!(v.upper_bound, oracle_n_plus(&cm));
            assert_eq!(v.lower_bound, -oracle_n_minus(&cm));
            assert!(v.holds);
        }
    }

    #[test]
    fn forced_nullity_classifies_remaining_signs() {
        let b = SymmetricForm::from_diagonal(&[1e-14, -2.0, 3.0])
            .unwrap()
            .with_scale(1.0);
        let i = b.inertia_with_nullity(1).unwrap();
        assert_eq!((i.index, i.coindex, i.nullity), (1, 1, 1));
        assert!(!i.marginal);
        let forced = b.inertia_with_nullity(0).unwrap();
        assert_eq!(forced.coindex, 2);
        assert!(forced.marginal);
    }

    fn symmetric_strategy(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-3.0..3.0f64, d * d).prop_map(move |v| {
            let m = DMatrix::from_vec(d, d, v);
            (&m + m.transpose()) * 0.5
        })
    }

    proptest! {
        #[test]
        fn sylvester_congruence_invariance(
            (b, a) in (1usize..7).prop_flat_map(|d| (symmetric_strategy(d), proptest::collection::vec(-2.0..2.0f64, d * d)))
        ) {
            let d = b.nrows();
            let a = DMatrix::from_vec(d, d, a) + DMatrix::identity(d, d) * 3.0;
            prop_assume!(crate::linalg::singular_values(&a).min() > 0.1);
            let form = SymmetricForm::new(b).unwrap();
            prop_assume!(!form.inertia().marginal);
            let congruent = form.congruence(&a).unwrap();
            let (i0, i1) = (form.inertia(), congruent.inertia());
            prop_assume!(!i1.marginal);
            prop_assert_eq!((i0.index, i0.coindex, i0.nullity), (i1.index, i1.coindex, i1.nullity));
        }

        #[test]
        fn negation_swaps_index_and_coindex(b in (1usize..7).prop_flat_map(symmetric_strategy)) {
            let form = SymmetricForm::new(b).unwrap();
            let (i, n) = (form.inertia(), form.negated().inertia());
            prop_assert_eq!(i.index, n.coindex);
            prop_assert_eq!(i.coindex, n.index);
            prop_assert_eq!(i.nullity, n.nullity);
            prop_assert_eq!(i.dim(), form.dim());
        }

        #[test]
        fn perturbation_lemma_bounds(
            (b, c) in (1usize..9).prop_flat_map(|d| (symmetric_strategy(d), symmetric_strategy(d)))
        ) {
            let v = check_perturbation_bounds(
                &SymmetricForm::new(b).unwrap(),
                &SymmetricForm::new(c).unwrap(),
            ).unwrap();
            prop_assert!(v.holds, "{:?}", v);
        }

        #[test]
        fn difference_corollary(
            (b1, b2, c) in (1usize..7).prop_flat_map(|d| (symmetric_strategy(d), symmetric_strategy(d), symmetric_strategy(d)))
        ) {
            let (lhs, rhs) = difference_bound(
                &SymmetricForm::new(b1).unwrap(),
                &SymmetricForm::new(b2).unwrap(),
                &SymmetricForm::new(c).unwrap(),
            ).unwrap();
            prop_assert!(lhs <= rhs);
        }
    }
}
