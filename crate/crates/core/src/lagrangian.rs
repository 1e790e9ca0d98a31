//! Symplectic vector spaces, Lagrangian frames and the chart atlas of the Lagrangian
//! Grassmannian.
//!
//! Subspaces are stored as frames with orthonormal columns. For a Lagrangian decomposition
//! `(L0, L1)` the chart `φ_{L0,L1}` sends a Lagrangian `L` transverse to `L1` to the symmetric
//! form `ω(T·,·)` on `L0`, where `T: L0 → L1` is the linear map whose graph is `L`. The form is
//! expressed in the stored orthonormal basis of `L0`.
//!
//! Convention check in the standard plane (`ω(e₁,e₂) = 1`): with `L0 = span{e₁}`,
//! `L1 = span{e₂}` and `L = span{(1, s)}` the chart value is the `1×1` form `[-s]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs, orthonormal_columns, projection_residual, singular_values};
use crate::symforms::SymmetricForm;

/// Sines of principal angles at or below this value count as an intersection direction.
pub const INTERSECTION_TOL: f64 = 1e-8;

/// Transversality floor (sine of the smallest principal angle) for random generation.
pub const RANDOM_TRANSVERSALITY_FLOOR: f64 = 1e-6;

/// Isotropy residual accepted on input frames before they are projected onto `Λ`.
pub const INPUT_ISOTROPY_TOL: f64 = 1e-6;

/// Isotropy residual guaranteed for every stored frame.
pub const ISOTROPY_TOL: f64 = 1e-10;

const RANDOM_BUDGET: usize = 256;

#[derive(Debug)]
pub struct SymplecticSpace {
    n: usize,
    omega: DMatrix<f64>,
    omega_inv: DMatrix<f64>,
    horizontal: DMatrix<f64>,
    vertical: DMatrix<f64>,
}

impl SymplecticSpace {
    /// Wraps an antisymmetric nondegenerate `2n×2n` matrix `Ω` with `ω(x, y) = xᵀΩy`.
    pub fn new(omega: DMatrix<f64>) -> Result<Arc<Self>> {
        let d = omega.nrows();
        if d == 0 || d != omega.ncols() || !d.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "symplectic form must be a nonempty even square matrix, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite symplectic form entry".into(),
            ));
        }
        let scale = max_abs(&omega);
        if max_abs(&(&omega + omega.transpose())) > 1e-12 * scale {
            return Err(Error::InvalidInput(
                "symplectic form is not antisymmetric".into(),
            ));
        }
        let sv = singular_values(&omega);
        if sv.min() <= 1e-12 * sv.max() {
            return Err(Error::InvalidInput("symplectic form is degenerate".into()));
        }
        let omega_inv = omega
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("symplectic form is not invertible".into()))?;
        let (horizontal, vertical) = symplectic_gram_schmidt(&omega)?;
        Ok(Arc::new(SymplecticSpace {
            n: d / 2,
            omega,
            omega_inv,
            horizontal,
            vertical,
        }))
    }

    /// The model `(ℝ²ⁿ, ω)` with `ω(eᵢ, e_{n+i}) = 1`.
    pub fn standard(n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "half-dimension must be positive".into(),
            ));
        }
        let mut omega = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            omega[(i, n + i)] = 1.0;
            omega[(n + i, i)] = -1.0;
        }
        Self::new(omega)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn omega_inverse(&self) -> &DMatrix<f64> {
        &self.omega_inv
    }

    pub fn pairing(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.omega * y)[(0, 0)]
    }

    /// The same vector space with `−ω`.
    pub fn opposite(&self) -> Arc<Self> {
        Arc::new(SymplecticSpace {
            n: self.n,
            omega: -&self.omega,
            omega_inv: -&self.omega_inv,
            horizontal: self.horizontal.clone(),
            vertical: self.vertical.clone(),
        })
    }

    /// Whether `Φ` preserves `ω` up to `tol` in max norm.
    pub fn is_symplectic(&self, phi: &DMatrix<f64>, tol: f64) -> bool {
        phi.shape() == self.omega.shape()
            && max_abs(&(phi.transpose() * &self.omega * phi - &self.omega)) <= tol
    }

    pub fn same_as(&self, other: &SymplecticSpace) -> bool {
        std::ptr::eq(self, other) || self.omega == other.omega
    }

    /// A fixed Lagrangian from the canonical symplectic basis.
    pub fn canonical_horizontal(self: &Arc<Self>) -> LagrangianFrame {
        LagrangianFrame {
            space: Arc::clone(self),
            frame: self.horizontal.clone(),
        }
    }

    /// A fixed Lagrangian transverse to [`Self::canonical_horizontal`].
    pub fn canonical_vertical(self: &Arc<Self>) -> LagrangianFrame {
        LagrangianFrame {
            space: Arc::clone(self),
            frame: self.vertical.clone(),
        }
    }
}

pub fn standard_space(n: usize) -> Result<Arc<SymplecticSpace>> {
    SymplecticSpace::standard(n)
}

/// Symplectic Gram–Schmidt on the standard basis, returning orthonormal frames of the two
/// Lagrangians spanned by the `eᵢ` and the `fᵢ` of a symplectic basis.
fn symplectic_gram_schmidt(omega: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = omega.nrows();
    let n = d / 2;
    let pair = |x: &DVector<f64>, y: &DVector<f64>| (x.transpose() * omega * y)[(0, 0)];
    let mut pool: Vec<DVector<f64>> = (0..d)
        .map(|i| {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut es = Vec::with_capacity(n);
    let mut fs = Vec::with_capacity(n);
    while es.len() < n {
        pool.retain(|v| v.norm() > 1e-10);
        let u = pool
            .first()
            .cloned()
            .ok_or_else(|| Error::InvalidInput("symplectic basis construction failed".into()))?;
        let (best, value) = pool
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, v)| (i, pair(&u, v)))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .ok_or_else(|| Error::InvalidInput("symplectic basis construction failed".into()))?;
        if value.abs() < 1e-12 {
            return Err(Error::InvalidInput("symplectic form is degenerate".into()));
        }
        let v = &pool[best] / value;
        pool.remove(best);
        pool.remove(0);
        for w in pool.iter_mut() {
            let a = pair(w, &v);
            let b = pair(w, &u);
            *w = &*w - &u * a + &v * b;
        }
        es.push(u);
        fs.push(v);
    }
    let h = orthonormal_columns(&linalg::columns_to_matrix(d, &es)?)?;
    let v = orthonormal_columns(&linalg::columns_to_matrix(d, &fs)?)?;
    Ok((h, v))
}

/// A Lagrangian subspace stored through an orthonormal spanning frame.
#[derive(Debug, Clone)]
pub struct LagrangianFrame {
    space: Arc<SymplecticSpace>,
    frame: DMatrix<f64>,
}

impl LagrangianFrame {
    /// Validates a `2n×n` spanning frame, orthonormalizes it and projects out the residual
    /// isotropy error so that `FᵀΩF` vanishes to round-off.
    pub fn new(space: &Arc<SymplecticSpace>, frame: DMatrix<f64>) -> Result<Self> {
        let (d, n) = (space.dim(), space.n());
        if frame.shape() != (d, n) {
            return Err(Error::InvalidInput(format!(
                "Lagrangian frame must be {d}x{n}, got {}x{}",
                frame.nrows(),
                frame.ncols()
            )));
        }
        let mut q = orthonormal_columns(&frame)?;
        let omega_scale = max_abs(space.omega());
        let residual = isotropy_residual(space, &q) / omega_scale;
        if residual > INPUT_ISOTROPY_TOL {
            return Err(Error::NotLagrangian(format!(
                "isotropy residual {residual:e} exceeds {INPUT_ISOTROPY_TOL:e}"
            )));
        }
        for _ in 0..4 {
            if isotropy_residual(space, &q) <= 1e-15 * omega_scale {
                break;
            }
            q = orthonormal_columns(&isotropic_correction(space, &q)?)?;
        }
        let residual = isotropy_residual(space, &q) / omega_scale;
        if residual > ISOTROPY_TOL {
            return Err(Error::NotLagrangian(format!(
                "isotropy residual {residual:e} after correction"
            )));
        }
        Ok(LagrangianFrame {
            space: Arc::clone(space),
            frame: q,
        })
    }

    pub fn from_columns(space: &Arc<SymplecticSpace>, cols: &[DVector<f64>]) -> Result<Self> {
        let m = linalg::columns_to_matrix(space.dim(), cols)?;
        Self::new(space, m)
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn isotropy_residual(&self) -> f64 {
        isotropy_residual(&self.space, &self.frame)
    }

    /// The same subspace regarded in another symplectic space on the same vector space.
    pub fn in_space(&self, space: &Arc<SymplecticSpace>) -> Result<Self> {
        Self::new(space, self.frame.clone())
    }

    /// Image under a linear map of the ambient space.
    pub fn mapped(&self, map: &DMatrix<f64>) -> Result<Self> {
        Self::new(&self.space, map * &self.frame)
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        let r = v - &self.frame * (self.frame.transpose() * v);
        r.norm() <= tol * v.norm().max(f64::MIN_POSITIVE)
    }

    /// Same subspace up to `tol` in sine of the largest principal angle.
    pub fn same_subspace(&self, other: &LagrangianFrame, tol: f64) -> bool {
        gap(self, other).map(|g| g <= tol).unwrap_or(false)
    }

    fn check_space(&self, other: &LagrangianFrame) -> Result<()> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }
}

fn isotropy_residual(space: &SymplecticSpace, q: &DMatrix<f64>) -> f64 {
    max_abs(&(q.transpose() * space.omega() * q))
}

/// One Newton step towards `FᵀΩF = 0`: `F − ½·R·E` with `E = FᵀΩF` and `FᵀΩR = I`.
fn isotropic_correction(space: &SymplecticSpace, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let omega = space.omega();
    let e = f.transpose() * omega * f;
    let e = (&e - e.transpose()) * 0.5;
    let g = omega.transpose() * f;
    let gram = f.transpose() * omega * &g;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::NotLagrangian("isotropy correction is singular".into()))?;
    let r = g * gram_inv;
    Ok(f - r * e * 0.5)
}

/// Sines of the principal angles between two frames, ascending.
pub fn principal_sines(l: &LagrangianFrame, m: &LagrangianFrame) -> Result<Vec<f64>> {
    l.check_space(m)?;
    let residual = projection_residual(l.frame(), m.frame());
    let mut s: Vec<f64> = singular_values(&residual).iter().copied().collect();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `dim(L ∩ M) = 2n − rank[L | M]`, with the rank of the concatenation evaluated as
/// `n + rank((I − P_L)·M)` so that small principal angles are resolved accurately.
pub fn intersection_dimension(l: &LagrangianFrame, m: &LagrangianFrame) -> Result<usize> {
    Ok(principal_sines(l, m)?
        .iter()
        .filter(|&&s| s <= INTERSECTION_TOL)
        .count())
}

/// Sine of the smallest principal angle; zero iff the subspaces meet.
pub fn transversality_margin(l: &LagrangianFrame, m: &LagrangianFrame) -> Result<f64> {
    Ok(principal_sines(l, m)?.first().copied().unwrap_or(1.0))
}

/// Sine of the largest principal angle, a metric on the Grassmannian.
pub fn gap(l: &LagrangianFrame, m: &LagrangianFrame) -> Result<f64> {
    Ok(principal_sines(l, m)?.last().copied().unwrap_or(0.0))
}

/// A Lagrangian decomposition `(L0, L1)` and the precomputed data of `φ_{L0,L1}`.
#[derive(Debug, Clone)]
pub struct Chart {
    l0: LagrangianFrame,
    l1: LagrangianFrame,
    basis_inv: DMatrix<f64>,
    /// `ω(L1 basis, L0 basis)`, an invertible `n×n` matrix.
    pairing: DMatrix<f64>,
    pairing_inv: DMatrix<f64>,
}

impl Chart {
    pub fn new(l0: &LagrangianFrame, l1: &LagrangianFrame) -> Result<Self> {
        l0.check_space(l1)?;
        let k = intersection_dimension(l0, l1)?;
        if k > 0 {
            return Err(Error::NotTransverse(format!(
                "chart pair meets in dimension {k}"
            )));
        }
        let n = l0.n();
        let mut basis = DMatrix::zeros(2 * n, 2 * n);
        basis.view_mut((0, 0), (2 * n, n)).copy_from(l0.frame());
        basis.view_mut((0, n), (2 * n, n)).copy_from(l1.frame());
        let basis_inv = basis
            .try_inverse()
            .ok_or_else(|| Error::NotTransverse("chart basis is singular".into()))?;
        let pairing = l1.frame().transpose() * l0.space().omega() * l0.frame();
        let pairing_inv = pairing
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotTransverse("chart pairing is singular".into()))?;
        Ok(Chart {
            l0: l0.clone(),
            l1: l1.clone(),
            basis_inv,
            pairing,
            pairing_inv,
        })
    }

    pub fn l0(&self) -> &LagrangianFrame {
        &self.l0
    }

    pub fn l1(&self) -> &LagrangianFrame {
        &self.l1
    }

    /// Coordinates `(X, Y)` with `frame = L0·X + L1·Y`.
    fn split(&self, frame: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.l0.n();
        let c = &self.basis_inv * frame;
        (c.rows(0, n).into_owned(), c.rows(n, n).into_owned())
    }

    /// `φ_{L0,L1}(L)`.
    pub fn apply(&self, l: &LagrangianFrame) -> Result<SymmetricForm> {
        self.l0.check_space(l)?;
        let k = intersection_dimension(l, &self.l1)?;
        if k > 0 {
            return Err(Error::NotInChartDomain(k));
        }
        let (x, y) = self.split(l.frame());
        let x_inv = x.try_inverse().ok_or(Error::NotInChartDomain(1))?;
        let t = y * x_inv;
        let b = t.transpose() * &self.pairing;
        Ok(SymmetricForm::new(b)?.with_scale(max_abs(l.space().omega())))
    }

    /// The unique `L` transverse to `L1` with `φ_{L0,L1}(L) = B`.
    pub fn invert(&self, b: &SymmetricForm) -> Result<LagrangianFrame> {
        let n = self.l0.n();
        if b.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.dim(),
            });
        }
        let t = self.pairing_inv.transpose() * b.matrix();
        let frame = self.l0.frame() + self.l1.frame() * t;
        LagrangianFrame::new(self.l0.space(), frame)
    }
}

pub fn chart_apply(c: &Chart, l: &LagrangianFrame) -> Result<SymmetricForm> {
    c.apply(l)
}

pub fn chart_invert(c: &Chart, b: &SymmetricForm) -> Result<LagrangianFrame> {
    c.invert(b)
}

/// The constant form `C = η_* φ_{L1,L}(L0)` on `L0` with
/// `n₊(φ_{L1,L}(α)) = n₊(φ_{L0,L}(α) + C)` for every `α` transverse to `L`, where
/// `η: L1 → L0` is the projection along `L`.
pub fn transition_reference(
    l0: &LagrangianFrame,
    l1: &LagrangianFrame,
    l: &LagrangianFrame,
) -> Result<SymmetricForm> {
    l0.check_space(l1)?;
    l0.check_space(l)?;
    let via_l0 = Chart::new(l0, l)
        .map_err(|_| Error::NotTransverse("reference L must be transverse to L0".into()))?;
    let via_l1 = Chart::new(l1, l)
        .map_err(|_| Error::NotTransverse("reference L must be transverse to L1".into()))?;
    let (eta, _) = via_l0.split(l1.frame());
    let eta_inv = eta
        .try_inverse()
        .ok_or_else(|| Error::NotTransverse("projection L1 → L0 along L is singular".into()))?;
    let s1 = via_l1.apply(l0)?;
    let c = eta_inv.transpose() * s1.matrix() * &eta_inv;
    Ok(SymmetricForm::new(c)?.with_scale(s1.scale()))
}

/// A subspace `P ⊆ L1` with a symmetric form `S` on it.
#[derive(Debug, Clone)]
pub struct PSData {
    pub p_basis: Vec<DVector<f64>>,
    pub s: SymmetricForm,
}

impl PSData {
    pub fn new(p_basis: Vec<DVector<f64>>, s: SymmetricForm) -> Result<Self> {
        if s.dim() != p_basis.len() {
            return Err(Error::DimensionMismatch {
                expected: p_basis.len(),
                got: s.dim(),
            });
        }
        Ok(PSData { p_basis, s })
    }

    pub fn dim_p(&self) -> usize {
        self.p_basis.len()
    }
}

/// `L_{P,S} = {v + w : v ∈ P, w ∈ L0, ω(w,·)|_P + S(v,·) = 0}`.
pub fn lagrangian_from_ps(c: &Chart, data: &PSData) -> Result<LagrangianFrame> {
    let space = c.l0().space();
    let (d, n) = (space.dim(), space.n());
    let k = data.dim_p();
    if k > n {
        return Err(Error::RankDeficient(format!("dim P = {k} exceeds n = {n}")));
    }
    if k == 0 {
        return Ok(c.l0().clone());
    }
    let p = linalg::columns_to_matrix(d, &data.p_basis)?;
    let residual = max_abs(&projection_residual(c.l1().frame(), &p)) / max_abs(&p).max(1e-300);
    if residual > 1e-9 {
        return Err(Error::NotInComplement(residual));
    }
    let sv = singular_values(&p);
    if sv.min() <= linalg::RANK_REL_TOL * sv.max() {
        return Err(Error::RankDeficient("P basis is dependent".into()));
    }
    // Unknowns (m, x) with v = P·m and w = L0·x; the condition reads (PᵀΩL0)·x = S·m.
    let a = c.l0().frame();
    let coupling = p.transpose() * space.omega() * a;
    let mut system = DMatrix::zeros(k, k + n);
    system
        .view_mut((0, 0), (k, k))
        .copy_from(&(-data.s.matrix()));
    system.view_mut((0, k), (k, n)).copy_from(&coupling);
    let kernel = linalg::null_space(&system, 1e-10);
    if kernel.ncols() != n {
        return Err(Error::Inconsistent(format!(
            "L_(P,S) has dimension {} instead of {n}",
            kernel.ncols()
        )));
    }
    let frame = &p * kernel.rows(0, k) + a * kernel.rows(k, n);
    LagrangianFrame::new(space, frame)
}

/// The pair `(P, S)` with `L = L_{P,S}`, where `P` is the projection of `L` to `L1` along `L0`.
pub fn ps_from_lagrangian(c: &Chart, l: &LagrangianFrame) -> Result<PSData> {
    c.l0().check_space(l)?;
    let space = l.space();
    let (x, y) = c.split(l.frame());
    let svd = linalg::svd(&y);
    let smax = svd.singular_values.max();
    let u = &svd.u;
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > INTERSECTION_TOL * smax.max(1.0))
        .collect();
    let k = kept.len();
    let mut p_vecs = Vec::with_capacity(k);
    let mut w_vecs = Vec::with_capacity(k);
    for &i in &kept {
        let coeff = c.l1().frame() * u.column(i);
        p_vecs.push(coeff);
        let z = svd.v.column(i) / svd.singular_values[i];
        w_vecs.push(c.l0().frame() * (&x * z));
    }
    let s = DMatrix::from_fn(k, k, |i, j| -space.pairing(&w_vecs[i], &p_vecs[j]));
    PSData::new(
        p_vecs,
        SymmetricForm::new(s)?.with_scale(max_abs(space.omega())),
    )
}

/// A random symplectic automorphism `exp(Ω⁻¹S)` with Gaussian symmetric `S`.
pub fn random_symplectic<R: Rng + ?Sized>(
    space: &SymplecticSpace,
    rng: &mut R,
    scale: f64,
) -> DMatrix<f64> {
    let s = linalg::gaussian_symmetric(rng, space.dim(), scale);
    (space.omega_inverse() * s).exp()
}

/// Random symplectic automorphism fixing every vector of `fixed` (columns).
pub fn random_symplectic_fixing<R: Rng + ?Sized>(
    space: &SymplecticSpace,
    rng: &mut R,
    fixed: &DMatrix<f64>,
    scale: f64,
) -> Result<DMatrix<f64>> {
    let d = space.dim();
    let s = linalg::gaussian_symmetric(rng, d, scale);
    let s = if fixed.ncols() == 0 {
        s
    } else {
        let q = orthonormal_columns(fixed)?;
        let proj = DMatrix::identity(d, d) - &q * q.transpose();
        &proj * s * &proj
    };
    Ok((space.omega_inverse() * s).exp())
}

/// A pseudo-random Lagrangian transverse to each frame in `transverse_to`, with margin at
/// least `floor`. Draws are `Ψ·graph(S)` for a random symplectic `Ψ` and a random form `S`
/// over the canonical chart.
pub fn random_lagrangian_with<R: Rng + ?Sized>(
    space: &Arc<SymplecticSpace>,
    rng: &mut R,
    transverse_to: &[&LagrangianFrame],
    floor: f64,
    budget: usize,
) -> Result<LagrangianFrame> {
    for other in transverse_to {
        if !space.same_as(other.space()) {
            return Err(Error::SpaceMismatch);
        }
    }
    let canonical = Chart::new(&space.canonical_horizontal(), &space.canonical_vertical())?;
    let mut best = 0.0_f64;
    for _ in 0..budget {
        let s = SymmetricForm::new(linalg::gaussian_symmetric(rng, space.n(), 1.0))?;
        let graph = canonical.invert(&s)?;
        let psi = random_symplectic(space, rng, 0.7);
        let candidate = match graph.mapped(&psi) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let mut margin = f64::INFINITY;
        for other in transverse_to {
            margin = margin.min(transversality_margin(&candidate, other)?);
        }
        if margin >= floor {
            return Ok(candidate);
        }
        best = best.max(margin);
    }
    Err(Error::RetryExhausted(format!(
        "no transverse Lagrangian after {budget} draws (best margin {best:e}, floor {floor:e})"
    )))
}

/// Deterministic random Lagrangian transverse to every listed frame.
pub fn random_lagrangian(
    space: &Arc<SymplecticSpace>,
    seed: u64,
    transverse_to: &[&LagrangianFrame],
) -> Result<LagrangianFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_lagrangian_with(
        space,
        &mut rng,
        transverse_to,
        RANDOM_TRANSVERSALITY_FLOOR,
        RANDOM_BUDGET,
    )
}

/// A random Lagrangian meeting `base` in (generically exactly) `k` dimensions.
pub fn random_lagrangian_sharing<R: Rng + ?Sized>(
    base: &LagrangianFrame,
    rng: &mut R,
    k: usize,
) -> Result<LagrangianFrame> {
    let n = base.n();
    if k > n {
        return Err(Error::InvalidInput(format!(
            "cannot share {k} > {n} dimensions"
        )));
    }
    let mix = orthonormal_columns(&linalg::gaussian_matrix(rng, n, n))?;
    let shared = base.frame() * mix.columns(0, k);
    let psi = random_symplectic_fixing(base.space(), rng, &shared, 1.0)?;
    base.mapped(&psi)
}
