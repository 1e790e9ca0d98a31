//! Maslov index of Lagrangian paths.
//!
//! The chart method partitions `[a, b]` into pieces, each contained in the chart domain of a
//! reference Lagrangian `L1` transverse to `L0`, and sums `n₊(φ_{L0,L1}(ℓ(end))) −
//! n₊(φ_{L0,L1}(ℓ(start)))` over the pieces. It needs no differentiability and no
//! nondegeneracy and is the authoritative value. The crossing method localizes the instants
//! where `ℓ(t)` meets `L0` and sums the inertia of the crossing forms.
//!
//! Values are stored doubled so the half-integer Robbin–Salamon convention is exact.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{
    gap, intersection_dimension, random_lagrangian_with, random_symplectic, transversality_margin,
    Chart, LagrangianFrame, SymplecticSpace,
};
use crate::linalg::{self, sym_eigen};
use crate::symforms::{Inertia, SymmetricForm};

pub type Evaluator = Arc<dyn Fn(f64) -> Result<LagrangianFrame> + Send + Sync>;

/// A sampled continuous curve `[a, b] → Λ`, optionally backed by an exact evaluator.
#[derive(Clone)]
pub struct LagrangianPath {
    samples: Vec<(f64, LagrangianFrame)>,
    refiner: Option<Evaluator>,
}

impl fmt::Debug for LagrangianPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianPath")
            .field("interval", &(self.a(), self.b()))
            .field("samples", &self.samples.len())
            .field("has_refiner", &self.refiner.is_some())
            .finish()
    }
}

impl LagrangianPath {
    pub fn new(samples: Vec<(f64, LagrangianFrame)>, refiner: Option<Evaluator>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(
                "a path needs at least 2 samples".into(),
            ));
        }
        let space = samples[0].1.space().clone();
        for w in samples.windows(2) {
            if !(w[0].0.is_finite() && w[1].0.is_finite() && w[0].0 < w[1].0) {
                return Err(Error::InvalidInput(format!(
                    "sample instants must be finite and strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if samples.iter().any(|(_, l)| !l.space().same_as(&space)) {
            return Err(Error::SpaceMismatch);
        }
        Ok(LagrangianPath { samples, refiner })
    }

    /// Samples `f` on `count` equally spaced instants of `[a, b]` and keeps `f` as evaluator.
    pub fn from_fn<F>(a: f64, b: f64, count: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<LagrangianFrame> + Send + Sync + 'static,
    {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("invalid interval [{a}, {b}]")));
        }
        let count = count.max(2);
        let samples = (0..count)
            .map(|i| {
                let t = if i + 1 == count {
                    b
                } else {
                    a + (b - a) * i as f64 / (count - 1) as f64
                };
                f(t).map(|l| (t, l))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, Some(Arc::new(f)))
    }

    pub fn constant(l: &LagrangianFrame, a: f64, b: f64) -> Result<Self> {
        let fixed = l.clone();
        Self::from_fn(a, b, 2, move |_| Ok(fixed.clone()))
    }

    pub fn a(&self) -> f64 {
        self.samples[0].0
    }

    pub fn b(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn start(&self) -> &LagrangianFrame {
        &self.samples[0].1
    }

    pub fn end(&self) -> &LagrangianFrame {
        &self.samples[self.samples.len() - 1].1
    }

    pub fn samples(&self) -> &[(f64, LagrangianFrame)] {
        &self.samples
    }

    pub fn space(&self) -> &Arc<SymplecticSpace> {
        self.samples[0].1.space()
    }

    pub fn n(&self) -> usize {
        self.space().n()
    }

    pub fn has_refiner(&self) -> bool {
        self.refiner.is_some()
    }

    /// `ℓ(t)` from the evaluator, or from a sample at exactly `t`.
    pub fn eval(&self, t: f64) -> Result<LagrangianFrame> {
        if let Some(f) = &self.refiner {
            return f(t);
        }
        self.samples
            .iter()
            .find(|(s, _)| *s == t)
            .map(|(_, l)| l.clone())
            .ok_or_else(|| Error::RefinementExhausted(format!("no evaluator for t = {t}")))
    }

    /// The path `t ↦ ℓ(a + b − t)` on the same interval.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.a(), self.b());
        let mut samples: Vec<_> = self
            .samples
            .iter()
            .rev()
            .map(|(t, l)| (a + b - t, l.clone()))
            .collect();
        // Keep the endpoints bit-exact.
        samples[0].0 = a;
        let last = samples.len() - 1;
        samples[last].0 = b;
        let refiner = self
            .refiner
            .clone()
            .map(|f| -> Evaluator { Arc::new(move |t: f64| f(a + b - t)) });
        LagrangianPath { samples, refiner }
    }

    /// The restriction to `[t0, t1]`; endpoints not on the grid need the evaluator.
    pub fn restrict(&self, t0: f64, t1: f64) -> Result<Self> {
        if !(self.a() <= t0 && t0 < t1 && t1 <= self.b()) {
            return Err(Error::InvalidInput(format!(
                "[{t0}, {t1}] is not a subinterval of [{}, {}]",
                self.a(),
                self.b()
            )));
        }
        let mut samples = vec![(t0, self.eval(t0)?)];
        samples.extend(
            self.samples
                .iter()
                .filter(|(t, _)| *t > t0 && *t < t1)
                .cloned(),
        );
        samples.push((t1, self.eval(t1)?));
        Self::new(samples, self.refiner.clone())
    }

    /// Concatenation with a path starting at `self.b()` from the same subspace.
    pub fn concat(&self, other: &LagrangianPath) -> Result<Self> {
        let junction = self.b();
        if other.a() != junction {
            return Err(Error::InvalidInput(format!(
                "concatenation needs matching instants ({} vs {})",
                junction,
                other.a()
            )));
        }
        if !self.end().same_subspace(other.start(), 1e-9) {
            return Err(Error::InvalidInput("concatenated paths do not meet".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().skip(1).cloned());
        let refiner = match (&self.refiner, &other.refiner) {
            (Some(f), Some(g)) => {
                let (f, g) = (Arc::clone(f), Arc::clone(g));
                Some(Arc::new(move |t: f64| if t <= junction { f(t) } else { g(t) }) as Evaluator)
            }
            _ => None,
        };
        Self::new(samples, refiner)
    }

    /// The same path regarded in another symplectic structure on the same vector space.
    pub fn in_space(&self, space: &Arc<SymplecticSpace>) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|(t, l)| l.in_space(space).map(|m| (*t, m)))
            .collect::<Result<Vec<_>>>()?;
        let refiner = self.refiner.clone().map(|f| -> Evaluator {
            let space = Arc::clone(space);
            Arc::new(move |t: f64| f(t)?.in_space(&space))
        });
        Self::new(samples, refiner)
    }
}

/// `ℓ(t) = exp((t − a)·Ω⁻¹S)·L` for a symmetric `S` on `[a, b]`.
pub fn symplectic_arc(
    start: &LagrangianFrame,
    hamiltonian: &DMatrix<f64>,
    a: f64,
    b: f64,
    count: usize,
) -> Result<LagrangianPath> {
    let space = start.space();
    if hamiltonian.shape() != (space.dim(), space.dim()) {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: hamiltonian.nrows(),
        });
    }
    let generator = space.omega_inverse() * SymmetricForm::new(hamiltonian.clone())?.matrix();
    let base = start.clone();
    LagrangianPath::from_fn(a, b, count, move |t| {
        base.mapped(&(&generator * (t - a)).exp())
    })
}

/// A random symplectic arc on `[0, 1]` from `start` with Hamiltonian of size `scale`.
pub fn random_symplectic_arc<R: Rng + ?Sized>(
    start: &LagrangianFrame,
    rng: &mut R,
    scale: f64,
    count: usize,
) -> Result<LagrangianPath> {
    let h = linalg::gaussian_symmetric(rng, start.space().dim(), scale);
    symplectic_arc(start, &h, 0.0, 1.0, count)
}

/// `t ↦ φ_{La,L}⁻¹(t·φ_{La,L}(Lb))` on `[0, 1]`, a path from `La` to `Lb` inside `Λ⁰(L)`.
pub fn chart_segment(
    la: &LagrangianFrame,
    lb: &LagrangianFrame,
    via: &LagrangianFrame,
    count: usize,
) -> Result<LagrangianPath> {
    let chart = Chart::new(la, via)?;
    let target = chart.apply(lb)?;
    let (la, lb) = (la.clone(), lb.clone());
    LagrangianPath::from_fn(0.0, 1.0, count, move |t| {
        if t == 0.0 {
            Ok(la.clone())
        } else if t == 1.0 {
            Ok(lb.clone())
        } else {
            chart.invert(&target.scaled(t))
        }
    })
}

/// A chart segment from `La` to `Lb` through a random Lagrangian transverse to both.
pub fn connecting_path<R: Rng + ?Sized>(
    la: &LagrangianFrame,
    lb: &LagrangianFrame,
    rng: &mut R,
) -> Result<LagrangianPath> {
    let via = random_lagrangian_with(la.space(), rng, &[la, lb], 0.05, 256)?;
    chart_segment(la, lb, &via, 33)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `n₊` chart differences.
    #[serde(rename = "paper")]
    PositiveInertia,
    /// Half-signature chart differences.
    RobbinSalamon,
    /// The `PositiveInertia` convention for `−ω`.
    OppositeForm,
}

/// One chart piece of the partition.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentRecord {
    pub t_start: f64,
    pub t_end: f64,
    /// Row-major frame of the reference Lagrangian `L1` used on this piece.
    pub reference: Vec<Vec<f64>>,
    pub inertia_start: Inertia,
    pub inertia_end: Inertia,
    /// Doubled contribution of this piece.
    pub contribution_times_two: i64,
    /// Whether an endpoint of the whole path meets `L0` at this piece.
    pub degenerate_endpoint: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaslovResult {
    pub value_times_two: i64,
    pub convention: Convention,
    pub segment_log: Vec<SegmentRecord>,
    /// Some chart form had eigenvalues near the rank cut.
    pub marginal: bool,
    /// Samples inserted by adaptive refinement.
    pub refinements: usize,
}

impl MaslovResult {
    pub fn value(&self) -> f64 {
        self.value_times_two as f64 / 2.0
    }

    /// The integer value; panics on a half-integer, which only the Robbin–Salamon
    /// convention produces.
    pub fn integer(&self) -> i64 {
        assert!(
            self.value_times_two % 2 == 0,
            "half-integer Maslov index {}",
            self.value()
        );
        self.value_times_two / 2
    }

    pub fn has_degenerate_endpoint(&self) -> bool {
        self.segment_log.iter().any(|s| s.degenerate_endpoint)
    }
}

#[derive(Debug, Clone)]
pub struct MaslovOptions {
    pub seed: u64,
    /// Minimal transversality margin between `L1` and every sample of its piece.
    pub floor: f64,
    /// Minimal transversality margin between `L1` and `L0`.
    pub reference_floor: f64,
    /// Candidate references drawn before an edge is bisected.
    pub draws: usize,
    pub refinement_budget: usize,
}

impl Default for MaslovOptions {
    fn default() -> Self {
        MaslovOptions {
            seed: 0x6d61_736c_6f76,
            floor: 0.02,
            reference_floor: 0.05,
            draws: 16,
            refinement_budget: 4096,
        }
    }
}

struct Piece {
    start: usize,
    end: usize,
    chart: Chart,
}

struct Partition {
    samples: Vec<(f64, LagrangianFrame)>,
    pieces: Vec<Piece>,
    refinements: usize,
}

/// Greedy chart partition. An edge between consecutive samples is admissible for a reference
/// `L1` when both margins reach the floor and exceed twice the gap between the samples, so that
/// the unsampled arc stays in the chart domain at the sampling resolution.
fn partition(
    path: &LagrangianPath,
    l0: &LagrangianFrame,
    opts: &MaslovOptions,
) -> Result<Partition> {
    if !l0.space().same_as(path.space()) {
        return Err(Error::SpaceMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples = path.samples.clone();
    let mut pieces = Vec::new();
    let mut refinements = 0;
    let span = path.b() - path.a();
    let mut i = 0;
    while i + 1 < samples.len() {
        let mut best: Option<(usize, LagrangianFrame)> = None;
        for _ in 0..opts.draws.max(1) {
            let l1 =
                random_lagrangian_with(path.space(), &mut rng, &[l0], opts.reference_floor, 256)?;
            let mut prev = transversality_margin(&l1, &samples[i].1)?;
            if prev < opts.floor {
                continue;
            }
            let mut j = i;
            while j + 1 < samples.len() {
                let next = transversality_margin(&l1, &samples[j + 1].1)?;
                let step = gap(&samples[j].1, &samples[j + 1].1)?;
                if next >= opts.floor && prev.min(next) > 2.0 * step {
                    j += 1;
                    prev = next;
                } else {
                    break;
                }
            }
            if j > i && best.as_ref().is_none_or(|(reach, _)| j > *reach) {
                let done = j + 1 == samples.len();
                best = Some((j, l1));
                if done {
                    break;
                }
            }
        }
        match best {
            Some((j, l1)) => {
                pieces.push(Piece {
                    start: i,
                    end: j,
                    chart: Chart::new(l0, &l1)?,
                });
                i = j;
            }
            None => {
                let (ta, tb) = (samples[i].0, samples[i + 1].0);
                if path.refiner.is_none() {
                    return Err(Error::RefinementExhausted(format!(
                        "no admissible chart on [{ta}, {tb}] and the path has no evaluator"
                    )));
                }
                if refinements >= opts.refinement_budget || tb - ta <= 1e-12 * span {
                    return Err(Error::RefinementExhausted(format!(
                        "no admissible chart on [{ta}, {tb}] after {refinements} refinements"
                    )));
                }
                let tm = 0.5 * (ta + tb);
                samples.insert(i + 1, (tm, path.eval(tm)?));
                refinements += 1;
            }
        }
    }
    Ok(Partition {
        samples,
        pieces,
        refinements,
    })
}

/// Inertia of `φ_{L0,L1}(L)` with the nullity fixed to `dim(L ∩ L0)`.
fn chart_inertia(chart: &Chart, l: &LagrangianFrame) -> Result<Inertia> {
    let b = chart.apply(l)?;
    let k = intersection_dimension(l, chart.l0())?;
    b.inertia_with_nullity(k)
}

fn frame_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn maslov_index(
    path: &LagrangianPath,
    l0: &LagrangianFrame,
    convention: Convention,
) -> Result<MaslovResult> {
    maslov_index_with(path, l0, convention, &MaslovOptions::default())
}

pub fn maslov_index_with(
    path: &LagrangianPath,
    l0: &LagrangianFrame,
    convention: Convention,
    opts: &MaslovOptions,
) -> Result<MaslovResult> {
    if convention == Convention::OppositeForm {
        let opposite = path.space().opposite();
        let flipped = path.in_space(&opposite)?;
        let mut r = maslov_index_with(
            &flipped,
            &l0.in_space(&opposite)?,
            Convention::PositiveInertia,
            opts,
        )?;
        r.convention = Convention::OppositeForm;
        return Ok(r);
    }
    let part = partition(path, l0, opts)?;
    let last = part.samples.len() - 1;
    let mut total = 0;
    let mut marginal = false;
    let mut log = Vec::with_capacity(part.pieces.len());
    for piece in &part.pieces {
        let ia = chart_inertia(&piece.chart, &part.samples[piece.start].1)?;
        let ib = chart_inertia(&piece.chart, &part.samples[piece.end].1)?;
        marginal |= ia.marginal || ib.marginal;
        let contribution = match convention {
            Convention::PositiveInertia => 2 * (ib.coindex as i64 - ia.coindex as i64),
            Convention::RobbinSalamon => ib.signature - ia.signature,
            Convention::OppositeForm => unreachable!("handled above"),
        };
        total += contribution;
        let degenerate_endpoint =
            (piece.start == 0 && ia.nullity > 0) || (piece.end == last && ib.nullity > 0);
        log.push(SegmentRecord {
            t_start: part.samples[piece.start].0,
            t_end: part.samples[piece.end].0,
            reference: frame_rows(piece.chart.l1().frame()),
            inertia_start: ia,
            inertia_end: ib,
            contribution_times_two: contribution,
            degenerate_endpoint,
        });
    }
    Ok(MaslovResult {
        value_times_two: total,
        convention,
        segment_log: log,
        marginal,
        refinements: part.refinements,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingLocation {
    Start,
    Interior,
    End,
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub location: CrossingLocation,
    /// Dimension of `ℓ(t) ∩ L0`.
    pub multiplicity: usize,
    /// Inertia of the crossing form `B′(t)` restricted to `Ker B(t)`.
    pub inertia: Inertia,
    pub contribution: i64,
}

/// Crossing localization resolution relative to `b − a`.
pub const CROSSING_RESOLUTION: f64 = 1e-10;
/// Finite-difference step relative to `b − a`.
pub const DERIVATIVE_STEP: f64 = 1e-5;
/// Eigenvalues of `B(t₀)` below this (relative to `max(ρ, 1)`) span the crossing kernel.
pub const KERNEL_TOL: f64 = 1e-6;

fn sign_counts(b: &SymmetricForm) -> (usize, usize) {
    let ev = b.eigenvalues();
    (
        ev.iter().filter(|&&x| x < 0.0).count(),
        ev.iter().filter(|&&x| x > 0.0).count(),
    )
}

/// Maslov index through crossing forms; the path needs an evaluator and every crossing must be
/// nondegenerate.
pub fn maslov_index_crossings(
    path: &LagrangianPath,
    l0: &LagrangianFrame,
) -> Result<(MaslovResult, Vec<Crossing>)> {
    maslov_index_crossings_with(path, l0, &MaslovOptions::default())
}

pub fn maslov_index_crossings_with(
    path: &LagrangianPath,
    l0: &LagrangianFrame,
    opts: &MaslovOptions,
) -> Result<(MaslovResult, Vec<Crossing>)> {
    if !path.has_refiner() {
        return Err(Error::InvalidInput(
            "the crossing method needs a path evaluator".into(),
        ));
    }
    let part = partition(path, l0, opts)?;
    let (a, b) = (path.a(), path.b());
    let span = b - a;
    let offset = 1e-7 * span;
    let form_at = |chart: &Chart, t: f64| -> Result<SymmetricForm> { chart.apply(&path.eval(t)?) };

    // (instant, piece index) of every crossing, in increasing order.
    let mut located: Vec<(f64, usize)> = Vec::new();
    for (p, piece) in part.pieces.iter().enumerate() {
        for k in piece.start..=piece.end {
            let (t, l) = &part.samples[k];
            let boundary_seen = k == piece.start && p > 0;
            if !boundary_seen && intersection_dimension(l, l0)? > 0 {
                located.push((*t, p));
            }
        }
        for k in piece.start..piece.end {
            let (ta, la) = &part.samples[k];
            let (tb, lb) = &part.samples[k + 1];
            let (ta, tb) = (*ta, *tb);
            let ta_eff = if intersection_dimension(la, l0)? > 0 {
                ta + offset.min(0.25 * (tb - ta))
            } else {
                ta
            };
            let tb_eff = if intersection_dimension(lb, l0)? > 0 {
                tb - offset.min(0.25 * (tb - ta))
            } else {
                tb
            };
            let sa = sign_counts(&form_at(&piece.chart, ta_eff)?);
            let sb = sign_counts(&form_at(&piece.chart, tb_eff)?);
            if sa != sb {
                let mut found = Vec::new();
                bisect_crossings(
                    &piece.chart,
                    &form_at,
                    ta_eff,
                    sa,
                    tb_eff,
                    sb,
                    CROSSING_RESOLUTION * span,
                    &mut found,
                    0,
                )?;
                located.extend(found.into_iter().map(|t| (t, p)));
            }
        }
    }
    located.sort_by(|x, y| x.0.total_cmp(&y.0));

    let h = DERIVATIVE_STEP * span;
    let mut crossings = Vec::with_capacity(located.len());
    let mut total = 0;
    for (t0, p) in located {
        let chart = &part.pieces[p].chart;
        let location = if t0 == a {
            CrossingLocation::Start
        } else if t0 == b {
            CrossingLocation::End
        } else {
            CrossingLocation::Interior
        };
        let b_t0 = form_at(chart, t0)?;
        let (values, vectors) = sym_eigen(b_t0.matrix());
        let cut = KERNEL_TOL * b_t0.spectral_radius().max(1.0);
        let kernel: Vec<usize> = (0..values.len())
            .filter(|&i| values[i].abs() <= cut)
            .collect();
        if kernel.is_empty() {
            return Err(Error::Inconsistent(format!(
                "no crossing kernel at t = {t0}"
            )));
        }
        let derivative = match location {
            CrossingLocation::Start => (form_at(chart, t0 + h)?.matrix() - b_t0.matrix()) / h,
            CrossingLocation::End => (b_t0.matrix() - form_at(chart, t0 - h)?.matrix()) / h,
            CrossingLocation::Interior => {
                (form_at(chart, t0 + h)?.matrix() - form_at(chart, t0 - h)?.matrix()) / (2.0 * h)
            }
        };
        let basis = vectors.select_columns(kernel.iter());
        let crossing_form = SymmetricForm::new(basis.transpose() * derivative * &basis)?
            .with_scale(b_t0.scale().max(b_t0.spectral_radius()) / span);
        let inertia = crossing_form.inertia();
        if inertia.nullity > 0 {
            return Err(Error::DegenerateCrossing { t: t0 });
        }
        let contribution = match location {
            CrossingLocation::Start => inertia.coindex as i64,
            CrossingLocation::End => -(inertia.index as i64),
            CrossingLocation::Interior => inertia.signature,
        };
        total += contribution;
        crossings.push(Crossing {
            t: t0,
            location,
            multiplicity: kernel.len(),
            inertia,
            contribution,
        });
    }
    let result = MaslovResult {
        value_times_two: 2 * total,
        convention: Convention::PositiveInertia,
        segment_log: Vec::new(),
        marginal: false,
        refinements: part.refinements,
    };
    Ok((result, crossings))
}

#[allow(clippy::too_many_arguments)]
fn bisect_crossings<F>(
    chart: &Chart,
    form_at: &F,
    ta: f64,
    sa: (usize, usize),
    tb: f64,
    sb: (usize, usize),
    resolution: f64,
    out: &mut Vec<f64>,
    depth: usize,
) -> Result<()>
where
    F: Fn(&Chart, f64) -> Result<SymmetricForm>,
{
    if tb - ta <= resolution || depth > 200 {
        out.push(0.5 * (ta + tb));
        return Ok(());
    }
    let tm = 0.5 * (ta + tb);
    let form = form_at(chart, tm)?;
    let sm = sign_counts(&form);
    if sm.0 + sm.1 < form.dim() {
        // Exact hit: record it and bracket the remaining halves around it.
        out.push(tm);
        let eps = resolution.min(0.25 * (tb - ta));
        let left = sign_counts(&form_at(chart, tm - eps)?);
        let right = sign_counts(&form_at(chart, tm + eps)?);
        if left != sa {
            bisect_crossings(
                chart,
                form_at,
                ta,
                sa,
                tm - eps,
                left,
                resolution,
                out,
                depth + 1,
            )?;
        }
        if right != sb {
            bisect_crossings(
                chart,
                form_at,
                tm + eps,
                right,
                tb,
                sb,
                resolution,
                out,
                depth + 1,
            )?;
        }
        return Ok(());
    }
    if sm != sa {
        bisect_crossings(chart, form_at, ta, sa, tm, sm, resolution, out, depth + 1)?;
    }
    if sm != sb {
        bisect_crossings(chart, form_at, tm, sm, tb, sb, resolution, out, depth + 1)?;
    }
    Ok(())
}

/// The four Lagrangians of a Hörmander index `𝔮(L0, L1; La, Lb)`.
#[derive(Debug, Clone)]
pub struct HormanderQuery {
    pub l0: LagrangianFrame,
    pub l1: LagrangianFrame,
    pub la: LagrangianFrame,
    pub lb: LagrangianFrame,
}

impl HormanderQuery {
    pub fn new(
        l0: &LagrangianFrame,
        l1: &LagrangianFrame,
        la: &LagrangianFrame,
        lb: &LagrangianFrame,
    ) -> Result<Self> {
        for other in [l1, la, lb] {
            if !l0.space().same_as(other.space()) {
                return Err(Error::SpaceMismatch);
            }
        }
        Ok(HormanderQuery {
            l0: l0.clone(),
            l1: l1.clone(),
            la: la.clone(),
            lb: lb.clone(),
        })
    }
}

const HORMANDER_SEED: u64 = 0x686f_726d;

/// `μ_{L0}(ℓ) − μ_{L1}(ℓ)` for a chart segment `ℓ` from `La` to `Lb`.
pub fn hormander_index(q: &HormanderQuery) -> Result<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(HORMANDER_SEED);
    let path = connecting_path(&q.la, &q.lb, &mut rng)?;
    hormander_index_along(q, &path)
}

/// `μ_{L0}(ℓ) − μ_{L1}(ℓ)` along a caller-supplied path from `La` to `Lb`.
pub fn hormander_index_along(q: &HormanderQuery, path: &LagrangianPath) -> Result<i64> {
    if !path.start().same_subspace(&q.la, 1e-8) || !path.end().same_subspace(&q.lb, 1e-8) {
        return Err(Error::InvalidInput("path does not join La to Lb".into()));
    }
    let m0 = maslov_index(path, &q.l0, Convention::PositiveInertia)?;
    let m1 = maslov_index(path, &q.l1, Convention::PositiveInertia)?;
    Ok(m0.integer() - m1.integer())
}

/// `τ(L0, L1, L2) = 𝔮(L0, L1; L2, L0)`, cross-checked against `−𝔮(L0, L1; L0, L2)`.
pub fn kashiwara_index(
    l0: &LagrangianFrame,
    l1: &LagrangianFrame,
    l2: &LagrangianFrame,
) -> Result<i64> {
    let forward = hormander_index(&HormanderQuery::new(l0, l1, l2, l0)?)?;
    let backward = hormander_index(&HormanderQuery::new(l0, l1, l0, l2)?)?;
    if forward != -backward {
        return Err(Error::Inconsistent(format!(
            "Kashiwara index mismatch: {forward} vs {}",
            -backward
        )));
    }
    Ok(forward)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateVerdict {
    pub name: &'static str,
    pub left: i64,
    pub right: i64,
    pub slack: i64,
    pub holds: bool,
}

impl EstimateVerdict {
    fn new(name: &'static str, left: i64, right: i64) -> Self {
        EstimateVerdict {
            name,
            left,
            right,
            slack: right - left,
            holds: left <= right,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub mu_l0: i64,
    pub mu_l1: i64,
    /// `μ_{L0}` for the opposite form `−ω`.
    pub mu_l0_opposite: i64,
    pub verdicts: Vec<EstimateVerdict>,
    /// `μ⁻ = −μ + dim(ℓ(a)∩L0) − dim(ℓ(b)∩L0)`.
    pub opposite_relation_holds: bool,
}

impl EstimateReport {
    pub fn all_hold(&self) -> bool {
        self.opposite_relation_holds && self.verdicts.iter().all(|v| v.holds)
    }
}

/// Evaluates the reference-change bounds on `|μ_{L0} − μ_{L1}|` and the opposite-form relation.
pub fn check_estimates(
    path: &LagrangianPath,
    l0: &LagrangianFrame,
    l1: &LagrangianFrame,
) -> Result<EstimateReport> {
    let n = path.n() as i64;
    let mu0 = maslov_index(path, l0, Convention::PositiveInertia)?.integer();
    let mu1 = maslov_index(path, l1, Convention::PositiveInertia)?.integer();
    let mu_minus = maslov_index(path, l0, Convention::OppositeForm)?.integer();
    let dim =
        |x: &LagrangianFrame, y: &LagrangianFrame| intersection_dimension(x, y).map(|d| d as i64);
    let (la, lb) = (path.start(), path.end());
    let d01 = dim(l0, l1)?;
    let dab = dim(la, lb)?;
    let (da0, da1, db0, db1) = (dim(la, l0)?, dim(la, l1)?, dim(lb, l0)?, dim(lb, l1)?);
    let corrected = mu0 - mu1 - da0 + da1 + db0 - db1;
    let verdicts = vec![
        EstimateVerdict::new("references", (mu0 - mu1).abs(), n - d01),
        EstimateVerdict::new("endpoints", (mu0 - mu1).abs(), n - dab),
        EstimateVerdict::new("corrected_references", corrected.abs(), n - d01),
        EstimateVerdict::new("corrected_endpoints", corrected.abs(), n - dab),
    ];
    Ok(EstimateReport {
        mu_l0: mu0,
        mu_l1: mu1,
        mu_l0_opposite: mu_minus,
        verdicts,
        opposite_relation_holds: mu_minus == -mu0 + da0 - db0,
    })
}

/// A random symplectic arc whose start optionally shares `k` dimensions with `anchor`.
pub fn random_test_path<R: Rng + ?Sized>(
    space: &Arc<SymplecticSpace>,
    rng: &mut R,
    anchor: Option<(&LagrangianFrame, usize)>,
    scale: f64,
) -> Result<LagrangianPath> {
    let start = match anchor {
        Some((base, k)) => crate::lagrangian::random_lagrangian_sharing(base, rng, k)?,
        None => {
            let psi = random_symplectic(space, rng, 1.0);
            space.canonical_horizontal().mapped(&psi)?
        }
    };
    random_symplectic_arc(&start, rng, scale, 48)
}
