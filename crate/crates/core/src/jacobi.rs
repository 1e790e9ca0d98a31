//! Jacobi flow along a semi-Riemannian geodesic, in a parallel frame.
//!
//! The geodesic itself is never represented. A system is the diagonal metric `g = diag(±1)`,
//! the curvature operator `M(t)v = R(γ̇, v)γ̇` and an interval, with the Jacobi equation
//! `J″ = M(t)·J`. The first frame vector is the geodesic direction `γ̇`.
//!
//! On `V = ℝⁿ ⊕ ℝⁿ` the symplectic form is `ω((v₁,w₁),(v₂,w₂)) = g(v₂,w₁) − g(v₁,w₂)`, the
//! flow `Φ_t(v, w) = (J(t), J′(t))` preserves it, and `ℓ(t) = Φ_t⁻¹({0} ⊕ ℝⁿ)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{ps_from_lagrangian, Chart, LagrangianFrame, SymplecticSpace};
use crate::linalg::{self, max_abs};
use crate::maslov::LagrangianPath;
use crate::symforms::{Inertia, SymmetricForm};

/// Symplecticity residual allowed per unit of `max(1, ‖Φ‖²_max)`.
pub const DEFAULT_DRIFT_BOUND: f64 = 1e-8;

/// Tolerance on the `g`-symmetry of the curvature operator.
pub const CURVATURE_SYMMETRY_TOL: f64 = 1e-12;

/// Singular-value cut deciding that `ℓ(t)` meets the reference.
pub const EVENT_TOL: f64 = 1e-7;

/// Events beyond this count indicate accumulation.
pub const MAX_EVENTS: usize = 64;

/// Upper bound on the number of stored samples of a flow-induced path.
pub const MAX_PATH_SAMPLES: usize = 1024;

type CurvatureFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// A programmatic curvature evaluator `t ↦ M(t)`.
#[derive(Clone)]
pub struct CustomCurvature(pub CurvatureFn);

impl fmt::Debug for CustomCurvature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomCurvature(..)")
    }
}

/// `M(t) = C + Σₖ cos(k·ν·t)·Aₖ + sin(k·ν·t)·Bₖ`, `k = 1, 2, …`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FourierCoefficients {
    pub frequency: f64,
    pub constant: Vec<Vec<f64>>,
    #[serde(default)]
    pub cos: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub sin: Vec<Vec<Vec<f64>>>,
}

/// Curvature profile in the parallel frame. Time is the absolute affine parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coefficients", rename_all = "kebab-case")]
pub enum CurvatureModel {
    /// A constant matrix, given by rows.
    Constant(Vec<Vec<f64>>),
    /// Diagonal `M(t)` whose `i`-th entry is the polynomial with coefficients `cᵢ₀, cᵢ₁, …`.
    DiagonalProfile(Vec<Vec<f64>>),
    /// `M(t) = Σₖ Mₖ tᵏ`.
    Polynomial(Vec<Vec<Vec<f64>>>),
    Fourier(FourierCoefficients),
    #[serde(skip)]
    Custom(CustomCurvature),
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!("{what} must be {n}x{n}")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} has non-finite entries"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

impl CurvatureModel {
    pub fn zero(n: usize) -> Self {
        CurvatureModel::Constant(vec![vec![0.0; n]; n])
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        CurvatureModel::DiagonalProfile(entries.iter().map(|&x| vec![x]).collect())
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        CurvatureModel::Custom(CustomCurvature(Arc::new(f)))
    }

    /// The matrices whose linear combinations make up `M(t)`; `None` for custom evaluators.
    fn components(&self, n: usize) -> Result<Option<Vec<DMatrix<f64>>>> {
        let out = match self {
            CurvatureModel::Constant(rows) => vec![matrix_from_rows(rows, n, "curvature")?],
            CurvatureModel::DiagonalProfile(entries) => {
                if entries.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "diagonal profile needs {n} entries, got {}",
                        entries.len()
                    )));
                }
                if entries.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput(
                        "diagonal profile has non-finite entries".into(),
                    ));
                }
                return Ok(Some(Vec::new()));
            }
            CurvatureModel::Polynomial(ms) => {
                if ms.is_empty() {
                    return Err(Error::InvalidInput(
                        "polynomial curvature needs coefficients".into(),
                    ));
                }
                ms.iter()
                    .map(|m| matrix_from_rows(m, n, "polynomial coefficient"))
                    .collect::<Result<Vec<_>>>()?
            }
            CurvatureModel::Fourier(f) => {
                if !f.frequency.is_finite() {
                    return Err(Error::InvalidInput("non-finite Fourier frequency".into()));
                }
                let mut v = vec![matrix_from_rows(&f.constant, n, "Fourier constant")?];
                for m in f.cos.iter().chain(f.sin.iter()) {
                    v.push(matrix_from_rows(m, n, "Fourier coefficient")?);
                }
                v
            }
            CurvatureModel::Custom(_) => return Ok(None),
        };
        Ok(Some(out))
    }

    pub fn eval(&self, t: f64, n: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            CurvatureModel::Constant(rows) => matrix_from_rows(rows, n, "curvature")?,
            CurvatureModel::DiagonalProfile(entries) => DMatrix::from_diagonal(
                &DVector::from_iterator(n, entries.iter().map(|c| horner(c, t))),
            ),
            CurvatureModel::Polynomial(ms) => {
                let mut acc = DMatrix::zeros(n, n);
                for m in ms.iter().rev() {
                    acc = acc * t + matrix_from_rows(m, n, "polynomial coefficient")?;
                }
                acc
            }
            CurvatureModel::Fourier(f) => {
                let mut acc = matrix_from_rows(&f.constant, n, "Fourier constant")?;
                for (k, m) in f.cos.iter().enumerate() {
                    acc += matrix_from_rows(m, n, "Fourier coefficient")?
                        * ((k + 1) as f64 * f.frequency * t).cos();
                }
                for (k, m) in f.sin.iter().enumerate() {
                    acc += matrix_from_rows(m, n, "Fourier coefficient")?
                        * ((k + 1) as f64 * f.frequency * t).sin();
                }
                acc
            }
            CurvatureModel::Custom(f) => {
                let m = (f.0)(t);
                if m.shape() != (n, n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.nrows(),
                    });
                }
                m
            }
        };
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite curvature at t = {t}"
            )));
        }
        Ok(m)
    }
}

fn g_symmetry_defect(signature: &[f64], m: &DMatrix<f64>) -> f64 {
    let gm = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| signature[i] * m[(i, j)]);
    max_abs(&(&gm - gm.transpose())) / max_abs(&gm).max(1.0)
}

/// Metric signature, curvature profile, interval and integration settings.
#[derive(Debug, Clone)]
pub struct JacobiSystem {
    signature: Vec<f64>,
    curvature: CurvatureModel,
    a: f64,
    b: f64,
    step: f64,
    drift_bound: f64,
    space: Arc<SymplecticSpace>,
}

impl JacobiSystem {
    pub fn new(
        signature: Vec<f64>,
        curvature: CurvatureModel,
        a: f64,
        b: f64,
        step: f64,
    ) -> Result<Self> {
        let n = signature.len();
        if n == 0 {
            return Err(Error::InvalidInput("signature must be nonempty".into()));
        }
        if let Some((i, s)) = signature
            .iter()
            .enumerate()
            .find(|(_, &s)| s != 1.0 && s != -1.0)
        {
            return Err(Error::InvalidInput(format!(
                "signature[{i}] = {s} is not ±1"
            )));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("invalid interval [{a}, {b}]")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "step must be positive, got {step}"
            )));
        }
        match curvature.components(n)? {
            Some(parts) => {
                for m in parts {
                    let defect = g_symmetry_defect(&signature, &m);
                    if defect > CURVATURE_SYMMETRY_TOL {
                        return Err(Error::NotMetricSymmetric(format!(
                            "g·M is not symmetric (defect {defect:e})"
                        )));
                    }
                }
            }
            None => {
                for k in 0..=16 {
                    let t = a + (b - a) * k as f64 / 16.0;
                    check_symmetric_at(&signature, &curvature.eval(t, n)?, t)?;
                }
            }
        }
        let g = DMatrix::from_diagonal(&DVector::from_vec(signature.clone()));
        let mut omega = DMatrix::zeros(2 * n, 2 * n);
        omega.view_mut((0, n), (n, n)).copy_from(&(-&g));
        omega.view_mut((n, 0), (n, n)).copy_from(&g);
        let space = SymplecticSpace::new(omega)?;
        Ok(JacobiSystem {
            signature,
            curvature,
            a,
            b,
            step,
            drift_bound: DEFAULT_DRIFT_BOUND,
            space,
        })
    }

    pub fn with_interval(&self, a: f64, b: f64) -> Result<Self> {
        let mut s = Self::new(
            self.signature.clone(),
            self.curvature.clone(),
            a,
            b,
            self.step,
        )?;
        s.drift_bound = self.drift_bound;
        Ok(s)
    }

    pub fn with_step(&self, step: f64) -> Result<Self> {
        let mut s = Self::new(
            self.signature.clone(),
            self.curvature.clone(),
            self.a,
            self.b,
            step,
        )?;
        s.drift_bound = self.drift_bound;
        Ok(s)
    }

    pub fn with_drift_bound(mut self, bound: f64) -> Self {
        self.drift_bound = bound;
        self
    }

    pub fn n(&self) -> usize {
        self.signature.len()
    }

    pub fn signature(&self) -> &[f64] {
        &self.signature
    }

    pub fn curvature(&self) -> &CurvatureModel {
        &self.curvature
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn drift_bound(&self) -> f64 {
        self.drift_bound
    }

    pub fn metric(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.signature.clone()))
    }

    pub fn metric_form(&self) -> SymmetricForm {
        SymmetricForm::from_diagonal(&self.signature).expect("signature entries are finite")
    }

    /// `n₋(g)` and `n₊(g)`.
    pub fn metric_inertia(&self) -> Inertia {
        self.metric_form().inertia()
    }

    pub fn is_riemannian(&self) -> bool {
        self.signature.iter().all(|&s| s > 0.0)
    }

    /// Exactly one negative entry, on the geodesic direction.
    pub fn is_timelike_lorentzian(&self) -> bool {
        self.signature[0] < 0.0 && self.signature[1..].iter().all(|&s| s > 0.0)
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        &self.space
    }

    /// `L₀ = {0} ⊕ ℝⁿ`.
    pub fn l0(&self) -> LagrangianFrame {
        let n = self.n();
        let mut f = DMatrix::zeros(2 * n, n);
        f.view_mut((n, 0), (n, n)).fill_with_identity();
        LagrangianFrame::new(&self.space, f).expect("vertical subspace is Lagrangian")
    }

    /// `ℝⁿ ⊕ {0}`, the complement used for `(P, S)` extraction.
    pub fn horizontal(&self) -> LagrangianFrame {
        let n = self.n();
        let mut f = DMatrix::zeros(2 * n, n);
        f.view_mut((0, 0), (n, n)).fill_with_identity();
        LagrangianFrame::new(&self.space, f).expect("horizontal subspace is Lagrangian")
    }

    pub fn curvature_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let m = self.curvature.eval(t, self.n())?;
        if matches!(self.curvature, CurvatureModel::Custom(_)) {
            check_symmetric_at(&self.signature, &m, t)?;
        }
        Ok(m)
    }

    pub fn drift(&self, phi: &DMatrix<f64>) -> f64 {
        let omega = self.space.omega();
        max_abs(&(phi.transpose() * omega * phi - omega))
    }
}

fn check_symmetric_at(signature: &[f64], m: &DMatrix<f64>, t: f64) -> Result<()> {
    let defect = g_symmetry_defect(signature, m);
    if defect > CURVATURE_SYMMETRY_TOL {
        return Err(Error::NotMetricSymmetric(format!(
            "g·M({t}) is not symmetric (defect {defect:e})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    pub phi: DMatrix<f64>,
    /// `‖ΦᵀΩΦ − Ω‖_max`.
    pub drift: f64,
}

/// `Φ_t` on a uniform grid of `[a, b]` (or `[b, a]` when integrating backwards).
#[derive(Debug, Clone)]
pub struct JacobiFlow {
    system: JacobiSystem,
    samples: Vec<FlowSample>,
}

/// `(X_top, X_bot)′ = (X_bot, M·X_top)`.
fn flow_field(m: &DMatrix<f64>, x: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * n, x.ncols());
    out.view_mut((0, 0), (n, x.ncols()))
        .copy_from(&x.rows(n, n));
    out.view_mut((n, 0), (n, x.ncols()))
        .copy_from(&(m * x.rows(0, n)));
    out
}

fn rk4_step(sys: &JacobiSystem, t: f64, h: f64, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sys.n();
    let m0 = sys.curvature_at(t)?;
    let mh = sys.curvature_at(t + 0.5 * h)?;
    let m1 = sys.curvature_at(t + h)?;
    let k1 = flow_field(&m0, x, n);
    let k2 = flow_field(&mh, &(x + &k1 * (0.5 * h)), n);
    let k3 = flow_field(&mh, &(x + &k2 * (0.5 * h)), n);
    let k4 = flow_field(&m1, &(x + &k3 * h), n);
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn check_drift(sys: &JacobiSystem, t: f64, phi: &DMatrix<f64>) -> Result<f64> {
    let drift = sys.drift(phi);
    let bound = sys.drift_bound * max_abs(phi).powi(2).max(1.0);
    if drift.is_nan() || drift > bound {
        return Err(Error::DriftExceeded { t, drift, bound });
    }
    Ok(drift)
}

/// Integrates from `Φ_a = I` to `target` with a step no larger than the system step, landing
/// exactly on `target`.
fn integrate_to(sys: &JacobiSystem, target: f64) -> Result<Vec<FlowSample>> {
    let a = sys.a;
    let span = target - a;
    let steps = ((span.abs() / sys.step).ceil() as usize).max(1);
    let h = span / steps as f64;
    let d = 2 * sys.n();
    let mut phi = DMatrix::identity(d, d);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(FlowSample {
        t: a,
        phi: phi.clone(),
        drift: 0.0,
    });
    for k in 0..steps {
        let t = a + h * k as f64;
        phi = rk4_step(sys, t, h, &phi)?;
        let t_next = if k + 1 == steps {
            target
        } else {
            a + h * (k + 1) as f64
        };
        let drift = check_drift(sys, t_next, &phi)?;
        out.push(FlowSample {
            t: t_next,
            phi: phi.clone(),
            drift,
        });
    }
    Ok(out)
}

pub fn integrate_flow(sys: &JacobiSystem) -> Result<JacobiFlow> {
    let samples = integrate_to(sys, sys.b)?;
    Ok(JacobiFlow {
        system: sys.clone(),
        samples,
    })
}

/// `Φ_{t}` at a single instant, possibly before `a`.
pub fn flow_at(sys: &JacobiSystem, t: f64) -> Result<DMatrix<f64>> {
    if t == sys.a {
        let d = 2 * sys.n();
        return Ok(DMatrix::identity(d, d));
    }
    Ok(integrate_to(sys, t)?.pop().expect("nonempty").phi)
}

impl JacobiFlow {
    pub fn system(&self) -> &JacobiSystem {
        &self.system
    }

    pub fn samples(&self) -> &[FlowSample] {
        &self.samples
    }

    pub fn max_drift(&self) -> f64 {
        self.samples.iter().map(|s| s.drift).fold(0.0, f64::max)
    }

    /// `Φ_t` for `t` in the integrated interval, re-integrating from the nearest grid sample.
    pub fn phi_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let (lo, hi) = (self.samples[0].t, self.samples[self.samples.len() - 1].t);
        if !(lo.min(hi) <= t && t <= lo.max(hi)) {
            return Err(Error::InvalidInput(format!(
                "t = {t} outside the integrated interval [{}, {}]",
                lo.min(hi),
                lo.max(hi)
            )));
        }
        let idx = self
            .samples
            .partition_point(|s| if hi >= lo { s.t <= t } else { s.t >= t });
        let nearest = [idx.saturating_sub(1), idx.min(self.samples.len() - 1)]
            .into_iter()
            .min_by(|&i, &j| {
                (self.samples[i].t - t)
                    .abs()
                    .total_cmp(&(self.samples[j].t - t).abs())
            })
            .expect("nonempty");
        let start = &self.samples[nearest];
        let span = t - start.t;
        if span == 0.0 {
            return Ok(start.phi.clone());
        }
        let steps = ((span.abs() / self.system.step).ceil() as usize).max(1);
        let h = span / steps as f64;
        let mut phi = start.phi.clone();
        for k in 0..steps {
            phi = rk4_step(&self.system, start.t + h * k as f64, h, &phi)?;
        }
        Ok(phi)
    }

    /// `Φ_t⁻¹(L)` as a Lagrangian of `V`.
    pub fn pullback(
        &self,
        phi: &DMatrix<f64>,
        t: f64,
        l: &LagrangianFrame,
    ) -> Result<LagrangianFrame> {
        let lu = phi.clone().lu();
        let frame = lu.solve(l.frame()).ok_or(Error::SingularFlow(t))?;
        LagrangianFrame::new(self.system.space(), frame).map_err(|_| Error::SingularFlow(t))
    }

    /// `ℓ(t) = Φ_t⁻¹(L₀)`.
    pub fn ell_at(&self, t: f64) -> Result<LagrangianFrame> {
        if t == self.system.a {
            return Ok(self.system.l0());
        }
        let phi = self.phi_at(t)?;
        self.pullback(&phi, t, &self.system.l0())
    }
}

/// `ℓ(t) = Φ_t⁻¹({0} ⊕ ℝⁿ)`, sampled from the flow grid (thinned to at most
/// [`MAX_PATH_SAMPLES`]) with an evaluator that re-integrates.
pub fn lagrangian_path_from_flow(flow: &Arc<JacobiFlow>) -> Result<LagrangianPath> {
    let l0 = flow.system.l0();
    let count = flow.samples.len();
    let stride = count.div_ceil(MAX_PATH_SAMPLES).max(1);
    let mut samples = Vec::new();
    for (k, s) in flow.samples.iter().enumerate() {
        if k % stride == 0 || k + 1 == count {
            let l = if k == 0 {
                l0.clone()
            } else {
                flow.pullback(&s.phi, s.t, &l0)?
            };
            samples.push((s.t, l));
        }
    }
    let f = Arc::clone(flow);
    LagrangianPath::new(samples, Some(Arc::new(move |t: f64| f.ell_at(t))))
}

/// Initial submanifold data: `T𝒫 = P ⊆ γ̇^⊥` and the shape operator `S` on `P`.
#[derive(Debug, Clone)]
pub struct SubmanifoldData {
    /// Euclidean-orthonormal basis of `P` as columns (`n×k`).
    p_basis: DMatrix<f64>,
    /// `S` in the basis `p_basis`.
    shape: DMatrix<f64>,
    restricted_metric: SymmetricForm,
}

impl SubmanifoldData {
    /// Validates `P` (columns of `p_basis`) and the operator `shape` given in that basis.
    pub fn new(sys: &JacobiSystem, p_basis: DMatrix<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let n = sys.n();
        let k = p_basis.ncols();
        if p_basis.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p_basis.nrows(),
            });
        }
        if shape.shape() != (k, k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: shape.nrows(),
            });
        }
        if shape.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite shape operator".into()));
        }
        if k == 0 {
            return Ok(Self::point(sys));
        }
        if k >= n {
            return Err(Error::InvalidInput(format!(
                "P must lie in the orthogonal of the geodesic direction (dim {k} ≥ {n})"
            )));
        }
        let scale = max_abs(&p_basis);
        if p_basis.row(0).iter().any(|x| x.abs() > 1e-12 * scale) {
            return Err(Error::InvalidInput(
                "P must lie in the orthogonal of the geodesic direction".into(),
            ));
        }
        // P = Q·R; in Q coordinates the operator is R·S·R⁻¹.
        let q = linalg::orthonormal_columns(&p_basis)?;
        let r = q.transpose() * &p_basis;
        let r_inv = r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient("P basis is dependent".into()))?;
        let shape_q = &r * shape * r_inv;
        let gp = q.transpose() * sys.metric() * &q;
        let restricted = SymmetricForm::new(gp.clone())?;
        if restricted.inertia().nullity > 0 {
            return Err(Error::DegenerateRestriction(
                "the metric restricted to P is degenerate".into(),
            ));
        }
        let lhs = shape_q.transpose() * &gp;
        let rhs = &gp * &shape_q;
        if max_abs(&(&lhs - &rhs)) > 1e-10 * max_abs(&shape_q).max(1.0) {
            return Err(Error::NotMetricSymmetric(
                "shape operator is not g-symmetric".into(),
            ));
        }
        Ok(SubmanifoldData {
            p_basis: q,
            shape: shape_q,
            restricted_metric: restricted,
        })
    }

    /// The trivial initial submanifold `𝒫 = {γ(a)}`.
    pub fn point(sys: &JacobiSystem) -> Self {
        SubmanifoldData {
            p_basis: DMatrix::zeros(sys.n(), 0),
            shape: DMatrix::zeros(0, 0),
            restricted_metric: SymmetricForm::zeros(0),
        }
    }

    /// `P = γ̇^⊥ = span{e₂, …, eₙ}` with `S = c·Id`.
    pub fn normal_hyperplane(sys: &JacobiSystem, c: f64) -> Result<Self> {
        let n = sys.n();
        let p = DMatrix::from_fn(n, n - 1, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        Self::new(sys, p, DMatrix::identity(n - 1, n - 1) * c)
    }

    pub fn dim(&self) -> usize {
        self.p_basis.ncols()
    }

    pub fn codim(&self, sys: &JacobiSystem) -> usize {
        sys.n() - self.dim()
    }

    pub fn p_basis(&self) -> &DMatrix<f64> {
        &self.p_basis
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// Inertia of `g` restricted to `P`: `n₋(g,𝒫)` and `n₊(g,𝒫)`.
    pub fn metric_inertia(&self) -> Inertia {
        self.restricted_metric.inertia()
    }
}

/// `L_𝒫 = {(v, w) : v ∈ P, w + S·v ∈ P^{⊥g}}`.
pub fn lagrangian_from_submanifold(
    sys: &JacobiSystem,
    data: &SubmanifoldData,
) -> Result<LagrangianFrame> {
    let n = sys.n();
    let k = data.dim();
    if data.p_basis.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: data.p_basis.nrows(),
        });
    }
    if k == 0 {
        return Ok(sys.l0());
    }
    let q = &data.p_basis;
    let normal = linalg::null_space(&(q.transpose() * sys.metric()), 1e-12);
    let mut frame = DMatrix::zeros(2 * n, n);
    frame.view_mut((0, 0), (n, k)).copy_from(q);
    frame
        .view_mut((n, 0), (n, k))
        .copy_from(&(-(q * &data.shape)));
    frame.view_mut((n, k), (n, n - k)).copy_from(&normal);
    LagrangianFrame::new(sys.space(), frame)
}

/// The linear converse: `(P, S)` with `L = L_𝒫`, where `P` is the projection of `L` onto the
/// first factor along `L₀`.
pub fn submanifold_from_lagrangian(
    sys: &JacobiSystem,
    l: &LagrangianFrame,
) -> Result<SubmanifoldData> {
    let n = sys.n();
    let chart = Chart::new(&sys.l0(), &sys.horizontal())?;
    let ps = ps_from_lagrangian(&chart, l)?;
    let k = ps.dim_p();
    let p = DMatrix::from_fn(n, k, |i, j| ps.p_basis[j][i]);
    let gp = p.transpose() * sys.metric() * &p;
    let gp_inv = gp.try_inverse().ok_or_else(|| {
        Error::DegenerateRestriction("the metric restricted to P is degenerate".into())
    })?;
    let shape = gp_inv * ps.s.matrix();
    SubmanifoldData::new(sys, p, shape)
}

/// A conjugate or focal instant.
#[derive(Debug, Clone, Serialize)]
pub struct FocalEvent {
    pub t: f64,
    pub multiplicity: usize,
    /// Columns spanning `A[t] = {J′(t) : J(t) = 0}` for the reference Jacobi fields.
    #[serde(serialize_with = "serialize_columns")]
    pub a_basis: DMatrix<f64>,
    /// Inertia of `g` on `A[t]`.
    pub inertia_on_a: Inertia,
    pub degenerate: bool,
    /// Smallest singular value of the intersection test at `t`.
    pub residual: f64,
}

fn serialize_columns<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.ncols()))?;
    for j in 0..m.ncols() {
        seq.serialize_element(&m.column(j).iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

#[derive(Debug, Clone, Default)]
pub struct DetectOptions {
    /// Report an event at `t = a`.
    pub include_start: bool,
    /// Restrict the scan to `[lo, hi]`.
    pub window: Option<(f64, f64)>,
    /// Events closer than this are merged and marked degenerate; defaults to the step.
    pub cluster: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalScan {
    pub events: Vec<FocalEvent>,
    pub warning: Option<String>,
}

/// Top and bottom blocks of an orthonormal frame of `Φ_t(L_ref)`, i.e. `(J(t), J′(t))`.
fn transported(
    phi: &DMatrix<f64>,
    l_ref: &LagrangianFrame,
    n: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let q = linalg::orthonormal_columns(&(phi * l_ref.frame()))?;
    Ok((q.rows(0, n).into_owned(), q.rows(n, n).into_owned()))
}

fn intersection_sine(phi: &DMatrix<f64>, l_ref: &LagrangianFrame, n: usize) -> Result<f64> {
    let (top, _) = transported(phi, l_ref, n)?;
    Ok(linalg::singular_values(&top).min())
}

/// Minimizes `s` on `[lo, hi]` by golden-section search.
fn golden_minimum<F: Fn(f64) -> Result<f64>>(
    s: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = s(x1)?;
    let mut f2 = s(x2)?;
    let (f_lo, f_hi) = (s(lo)?, s(hi)?);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = s(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = s(x2)?;
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for cand in [(lo, s(lo)?), (hi, s(hi)?), (lo, f_lo), (hi, f_hi)] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    Ok(best)
}

/// Intersection data of `ℓ(t)` with `L_ref` at a given instant.
pub fn event_at(flow: &JacobiFlow, l_ref: &LagrangianFrame, t: f64) -> Result<FocalEvent> {
    let sys = &flow.system;
    let n = sys.n();
    let phi = flow.phi_at(t)?;
    let (top, bottom) = transported(&phi, l_ref, n)?;
    let d = linalg::svd(&top);
    let small: Vec<usize> = (0..n)
        .filter(|&i| d.singular_values[i] < EVENT_TOL)
        .collect();
    let residual = d.singular_values.min();
    let a_basis = if small.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        linalg::orthonormal_columns(&(&bottom * d.v.select_columns(small.iter())))?
    };
    let restricted = SymmetricForm::new(a_basis.transpose() * sys.metric() * &a_basis)?;
    let inertia = restricted.inertia();
    Ok(FocalEvent {
        t,
        multiplicity: small.len(),
        a_basis,
        degenerate: inertia.nullity > 0,
        inertia_on_a: inertia,
        residual,
    })
}

/// Instants in `]a, b]` where `ℓ(t)` meets `L_ref`, equivalently where a nonzero Jacobi field
/// with initial data in `L_ref` vanishes.
pub fn detect_focal_instants(
    flow: &JacobiFlow,
    l_ref: &LagrangianFrame,
    opts: &DetectOptions,
) -> Result<FocalScan> {
    let sys = &flow.system;
    let n = sys.n();
    if !l_ref.space().same_as(sys.space()) {
        return Err(Error::SpaceMismatch);
    }
    let (a, b) = sys.interval();
    let (lo, hi) = opts.window.unwrap_or((a, b));
    let grid: Vec<(f64, f64)> = flow
        .samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .map(|s| intersection_sine(&s.phi, l_ref, n).map(|v| (s.t, v)))
        .collect::<Result<_>>()?;
    if grid.len() < 2 {
        return Ok(FocalScan {
            events: Vec::new(),
            warning: None,
        });
    }
    let resolution = 1e-12 * (b - a).max(1.0);
    let s = |t: f64| -> Result<f64> { intersection_sine(&flow.phi_at(t)?, l_ref, n) };
    let mut found: Vec<FocalEvent> = Vec::new();
    let last = grid.len() - 1;
    for k in 0..=last {
        let here = grid[k].1;
        let left_ok = k == 0 || here <= grid[k - 1].1;
        let right_ok = k == last || here <= grid[k + 1].1;
        if !(left_ok && right_ok) {
            continue;
        }
        let bracket_lo = grid[k.saturating_sub(1)].0;
        let bracket_hi = grid[(k + 1).min(last)].0;
        let (mut t, value) = if here == 0.0 {
            (grid[k].0, 0.0)
        } else {
            golden_minimum(s, bracket_lo, bracket_hi, resolution)?
        };
        if value >= EVENT_TOL {
            continue;
        }
        if (t - a).abs() <= 10.0 * resolution {
            t = a;
        }
        if (t - b).abs() <= 10.0 * resolution {
            t = b;
        }
        if t == a && !opts.include_start {
            continue;
        }
        found.push(event_at(flow, l_ref, t)?);
    }

    // When the reference meets ℓ at the scan start, σ_min vanishes there too and hides events
    // inside the first step; rescan that step on a grid accumulating at the start.
    if grid[0].1 < EVENT_TOL {
        let (t_start, t_next) = (grid[0].0, grid[1].0);
        let mut fine: Vec<f64> = (0..=60)
            .map(|j| t_start + (t_next - t_start) * 0.6f64.powi(j))
            .collect();
        fine.extend((1..16).map(|j| t_start + (t_next - t_start) * j as f64 / 16.0));
        fine.sort_by(f64::total_cmp);
        fine.dedup();
        let values: Vec<f64> = fine.iter().map(|&t| s(t)).collect::<Result<_>>()?;
        for k in 1..fine.len().saturating_sub(1) {
            if values[k] <= values[k - 1] && values[k] <= values[k + 1] {
                let (t, value) = golden_minimum(s, fine[k - 1], fine[k + 1], resolution)?;
                if value < EVENT_TOL && t - t_start > 10.0 * resolution {
                    found.push(event_at(flow, l_ref, t)?);
                }
            }
        }
    }
    found.sort_by(|x, y| x.t.total_cmp(&y.t));

    let cluster = opts.cluster.unwrap_or(sys.step());
    let mut events: Vec<FocalEvent> = Vec::new();
    for ev in found {
        match events.last_mut() {
            Some(prev) if (ev.t - prev.t).abs() <= 1e3 * resolution => {
                // The same instant bracketed from both neighbouring samples.
                if ev.residual < prev.residual {
                    *prev = ev;
                }
            }
            Some(prev) if ev.t - prev.t <= cluster => {
                prev.degenerate = true;
                prev.multiplicity = prev.multiplicity.max(ev.multiplicity);
            }
            _ => events.push(ev),
        }
    }
    let mut warning = None;
    if events.len() > MAX_EVENTS {
        warning = Some(format!(
            "{} events detected; accumulation suspected, report truncated to {MAX_EVENTS}",
            events.len()
        ));
        events.truncate(MAX_EVENTS);
    }
    Ok(FocalScan { events, warning })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContributionLedger {
    /// `n₊(g) − n₊(g,𝒫)`.
    pub initial: i64,
    /// `(t, σ(g,𝒫,t))` for events in `]a, b[`.
    pub interior: Vec<(f64, i64)>,
    /// `−n₋(g,𝒫,b)` when `b` is an event.
    pub final_contribution: Option<i64>,
    pub total: i64,
}

/// Closed-form contributions of the events to `μ_{L_𝒫}(ℓ)` on `[a, b]`.
pub fn endpoint_contributions(
    sys: &JacobiSystem,
    data: &SubmanifoldData,
    events: &[FocalEvent],
) -> Result<ContributionLedger> {
    let (a, b) = sys.interval();
    let initial = sys.metric_inertia().coindex as i64 - data.metric_inertia().coindex as i64;
    let mut interior = Vec::new();
    let mut final_contribution = None;
    for ev in events {
        if ev.degenerate {
            return Err(Error::DegenerateEvent(ev.t));
        }
        if ev.t == a {
            continue;
        }
        if ev.t == b {
            final_contribution = Some(-(ev.inertia_on_a.index as i64));
        } else {
            interior.push((ev.t, ev.inertia_on_a.signature));
        }
    }
    let total =
        initial + interior.iter().map(|(_, s)| s).sum::<i64>() + final_contribution.unwrap_or(0);
    Ok(ContributionLedger {
        initial,
        interior,
        final_contribution,
        total,
    })
}
