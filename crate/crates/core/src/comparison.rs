//! Conjugate versus focal comparison verdicts along a Jacobi flow.
//!
//! Every verdict is an inequality `left ≤ right` on logged quantities, so a report can be
//! re-checked by plain arithmetic.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jacobi::{
    detect_focal_instants, endpoint_contributions, event_at, flow_at, integrate_flow,
    lagrangian_from_submanifold, lagrangian_path_from_flow, ContributionLedger, DetectOptions,
    FocalScan, JacobiFlow, JacobiSystem, SubmanifoldData,
};
use crate::lagrangian::LagrangianFrame;
use crate::maslov::{maslov_index, Convention, LagrangianPath, MaslovResult};

/// Event localization accuracy relative to `max(1, b − a)`.
pub const LOCALIZATION_TOL: f64 = 1e-9;

/// Two instants closer than this multiple of the localization accuracy are treated as equal.
pub const COINCIDENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Holds,
    Violated,
    NotApplicable,
    NotEvaluable,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Holds => "true",
            VerdictStatus::Violated => "false",
            VerdictStatus::NotApplicable => "n/a",
            VerdictStatus::NotEvaluable => "not-evaluable",
        }
    }
}

/// `left ≤ right`, or the reason it was not asserted.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub id: String,
    pub left: f64,
    pub right: f64,
    pub status: VerdictStatus,
    pub slack: f64,
    pub reason: Option<String>,
}

impl Verdict {
    pub fn compare(id: impl Into<String>, left: f64, right: f64) -> Self {
        Verdict {
            id: id.into(),
            left,
            right,
            status: if left <= right {
                VerdictStatus::Holds
            } else {
                VerdictStatus::Violated
            },
            slack: right - left,
            reason: None,
        }
    }

    fn skipped(id: impl Into<String>, status: VerdictStatus, reason: impl Into<String>) -> Self {
        Verdict {
            id: id.into(),
            left: f64::NAN,
            right: f64::NAN,
            status,
            slack: f64::NAN,
            reason: Some(reason.into()),
        }
    }

    pub fn not_applicable(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::skipped(id, VerdictStatus::NotApplicable, reason)
    }

    pub fn not_evaluable(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::skipped(id, VerdictStatus::NotEvaluable, reason)
    }

    /// Whether the recorded status follows from `left` and `right`.
    pub fn is_consistent(&self) -> bool {
        match self.status {
            VerdictStatus::Holds => self.left <= self.right,
            VerdictStatus::Violated => self.left > self.right,
            _ => true,
        }
    }
}

/// Maslov indices of `ℓ` restricted to one interval, for both references.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalIndices {
    pub lo: f64,
    pub hi: f64,
    pub mu_l0: Option<i64>,
    pub mu_lp: Option<i64>,
    pub log_l0: Option<MaslovResult>,
    pub log_lp: Option<MaslovResult>,
    pub error: Option<String>,
}

impl IntervalIndices {
    fn both(&self) -> Option<(i64, i64)> {
        Some((self.mu_l0?, self.mu_lp?))
    }
}

/// Conjugate and focal multiplicities at an instant where both occur.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityRecord {
    pub t: f64,
    pub conjugate: usize,
    pub focal: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub epsilon: f64,
    pub dim_p: usize,
    pub intervals: Vec<IntervalIndices>,
    pub conjugate: FocalScan,
    pub focal: FocalScan,
    /// First conjugate instant in `]a, b]`.
    pub t0: Option<f64>,
    /// First focal instant in `]a, b]`.
    pub t_p: Option<f64>,
    pub coincidences: Vec<MultiplicityRecord>,
    pub conjugate_ledger: Option<ContributionLedger>,
    pub focal_ledger: Option<ContributionLedger>,
    pub verdicts: Vec<Verdict>,
    pub max_drift: f64,
}

impl ComparisonReport {
    pub fn any_violation(&self) -> bool {
        self.verdicts
            .iter()
            .any(|v| v.status == VerdictStatus::Violated)
    }
}

fn maslov_on(
    path: &LagrangianPath,
    lo: f64,
    hi: f64,
    reference: &LagrangianFrame,
) -> Result<MaslovResult> {
    let piece = if lo == path.a() && hi == path.b() {
        path.clone()
    } else {
        path.restrict(lo, hi)?
    };
    maslov_index(&piece, reference, Convention::PositiveInertia)
}

fn indices_on(
    path: &LagrangianPath,
    lo: f64,
    hi: f64,
    l0: &LagrangianFrame,
    lp: &LagrangianFrame,
) -> IntervalIndices {
    let r0 = maslov_on(path, lo, hi, l0);
    let rp = maslov_on(path, lo, hi, lp);
    let error = match (&r0, &rp) {
        (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    let (log_l0, log_lp) = (r0.ok(), rp.ok());
    IntervalIndices {
        lo,
        hi,
        mu_l0: log_l0.as_ref().map(MaslovResult::integer),
        mu_lp: log_lp.as_ref().map(MaslovResult::integer),
        log_l0,
        log_lp,
        error,
    }
}

/// Number of events in `[lo, hi]`, counting the start `a` when the reference meets `ℓ(a)`.
fn events_in(scan: &FocalScan, lo: f64, hi: f64, start: f64, meets_at_start: bool) -> usize {
    let at_start = usize::from(lo == start && meets_at_start);
    at_start
        + scan
            .events
            .iter()
            .filter(|e| e.t >= lo && e.t <= hi)
            .count()
}

fn multiplicity_in(scan: &FocalScan, lo: f64, hi: f64) -> usize {
    scan.events
        .iter()
        .filter(|e| e.t > lo && e.t < hi)
        .map(|e| e.multiplicity)
        .sum()
}

/// Integrates the flow and evaluates every comparison verdict.
pub fn run_comparison(
    sys: &JacobiSystem,
    data: &SubmanifoldData,
    subintervals: &[(f64, f64)],
) -> Result<ComparisonReport> {
    let flow = Arc::new(integrate_flow(sys)?);
    run_comparison_on(&flow, data, subintervals)
}

pub fn run_comparison_on(
    flow: &Arc<JacobiFlow>,
    data: &SubmanifoldData,
    subintervals: &[(f64, f64)],
) -> Result<ComparisonReport> {
    let sys = flow.system();
    let (a, b) = sys.interval();
    for &(lo, hi) in subintervals {
        if !(a <= lo && lo < hi && hi <= b) {
            return Err(Error::InvalidInput(format!(
                "subinterval [{lo}, {hi}] is not inside [{a}, {b}]"
            )));
        }
    }
    let dim_p = data.dim();
    let l0 = sys.l0();
    let lp = lagrangian_from_submanifold(sys, data)?;
    let opts = DetectOptions::default();
    let conjugate = detect_focal_instants(flow, &l0, &opts)?;
    let focal = detect_focal_instants(flow, &lp, &opts)?;
    let t0 = conjugate.events.first().map(|e| e.t);
    let t_p = focal.events.first().map(|e| e.t);

    let first_event = [t0, t_p].into_iter().flatten().fold(b, f64::min);
    let epsilon = (0.5 * (first_event - a)).min(0.1 * (b - a));

    let path = lagrangian_path_from_flow(flow)?;
    let mut intervals: Vec<IntervalIndices> = Vec::new();
    let tail = indices_on(&path, a + epsilon, b, &l0, &lp);
    for &(lo, hi) in subintervals {
        intervals.push(indices_on(&path, lo, hi, &l0, &lp));
    }

    let mut verdicts = Vec::new();
    let dim_p_f = dim_p as f64;
    let metric_p = data.metric_inertia();
    let codim = data.codim(sys);

    // Reference change between L₀ and L_𝒫, on every requested interval and on [a+ε, b].
    for iv in intervals.iter().chain(std::iter::once(&tail)) {
        let id = format!("reference_change[{:.6},{:.6}]", iv.lo, iv.hi);
        match iv.both() {
            Some((m0, mp)) => verdicts.push(Verdict::compare(id, (m0 - mp).abs() as f64, dim_p_f)),
            None => verdicts.push(Verdict::not_evaluable(
                id,
                iv.error.clone().unwrap_or_default(),
            )),
        }
    }

    // Two-sided bound on [a+ε, b].
    match tail.both() {
        Some((m0, mp)) => {
            verdicts.push(Verdict::compare(
                "tail_lower",
                -(metric_p.index as f64),
                (mp - m0) as f64,
            ));
            verdicts.push(Verdict::compare("tail_upper", (mp - m0) as f64, dim_p_f));
        }
        None => {
            let reason = tail.error.clone().unwrap_or_default();
            verdicts.push(Verdict::not_evaluable("tail_lower", reason.clone()));
            verdicts.push(Verdict::not_evaluable("tail_upper", reason));
        }
    }

    // Existence and absence statements per interval.
    let mut scoped = intervals.clone();
    scoped.push(tail.clone());
    for iv in &scoped {
        let range = format!("[{:.6},{:.6}]", iv.lo, iv.hi);
        let Some((m0, mp)) = iv.both() else {
            let reason = iv.error.clone().unwrap_or_default();
            verdicts.push(Verdict::not_evaluable(
                format!("focal_exists{range}"),
                reason.clone(),
            ));
            verdicts.push(Verdict::not_evaluable(
                format!("conjugate_exists{range}"),
                reason,
            ));
            continue;
        };
        let focal_count = events_in(&focal, iv.lo, iv.hi, a, codim > 0);
        let conj_count = events_in(&conjugate, iv.lo, iv.hi, a, true);
        if m0.unsigned_abs() as usize > dim_p {
            verdicts.push(Verdict::compare(
                format!("focal_exists{range}"),
                1.0,
                focal_count as f64,
            ));
        } else {
            verdicts.push(Verdict::not_applicable(
                format!("focal_exists{range}"),
                "|mu_L0| <= dim P",
            ));
        }
        if mp.unsigned_abs() as usize > dim_p {
            verdicts.push(Verdict::compare(
                format!("conjugate_exists{range}"),
                1.0,
                conj_count as f64,
            ));
        } else {
            verdicts.push(Verdict::not_applicable(
                format!("conjugate_exists{range}"),
                "|mu_LP| <= dim P",
            ));
        }
        if conj_count == 0 {
            verdicts.push(Verdict::compare(
                format!("no_conjugate_bound{range}"),
                mp.abs() as f64,
                dim_p_f,
            ));
        } else {
            verdicts.push(Verdict::not_applicable(
                format!("no_conjugate_bound{range}"),
                "conjugate instant present",
            ));
        }
        if focal_count == 0 {
            verdicts.push(Verdict::compare(
                format!("no_focal_bound{range}"),
                m0.abs() as f64,
                dim_p_f,
            ));
        } else {
            verdicts.push(Verdict::not_applicable(
                format!("no_focal_bound{range}"),
                "focal instant present",
            ));
        }
    }

    // Focal instants come first in the Riemannian and timelike regimes.
    let coincide = COINCIDENCE_FACTOR * LOCALIZATION_TOL * (b - a).max(1.0);
    let mut coincidences = Vec::new();
    for ev in &focal.events {
        if let Some(c) = conjugate
            .events
            .iter()
            .find(|c| (c.t - ev.t).abs() <= coincide)
        {
            coincidences.push(MultiplicityRecord {
                t: ev.t,
                conjugate: c.multiplicity,
                focal: ev.multiplicity,
            });
        }
    }
    let ordered_regime =
        sys.is_riemannian() || (sys.is_timelike_lorentzian() && metric_p.index == 0);
    if !ordered_regime {
        verdicts.push(Verdict::not_applicable(
            "focal_first",
            "metric is neither Riemannian nor timelike Lorentzian with spacelike P",
        ));
    } else {
        match (t_p, t0) {
            (None, None) => verdicts.push(Verdict::not_applicable(
                "focal_first",
                "no conjugate instant",
            )),
            (Some(tp), None) => verdicts.push(Verdict::compare("focal_first", tp, b)),
            (None, Some(tc)) => verdicts.push(Verdict::compare("focal_first", f64::INFINITY, tc)),
            (Some(tp), Some(tc)) => {
                verdicts.push(Verdict::compare("focal_first", tp, tc + coincide));
                if (tp - tc).abs() <= coincide {
                    let rec = coincidences.iter().find(|r| (r.t - tp).abs() <= coincide);
                    let (mc, mf) = rec.map(|r| (r.conjugate, r.focal)).unwrap_or((0, 0));
                    verdicts.push(Verdict::compare(
                        "focal_first_multiplicity",
                        mc as f64,
                        mf as f64,
                    ));
                }
            }
        }
    }

    // Riemannian counts in ]a, b[.
    if sys.is_riemannian() {
        let focal_mult = multiplicity_in(&focal, a, b);
        let conj_mult = multiplicity_in(&conjugate, a, b);
        let diff = focal_mult as f64 - conj_mult as f64;
        verdicts.push(Verdict::compare("count_lower", 0.0, diff));
        verdicts.push(Verdict::compare("count_upper", diff, dim_p_f));
    } else {
        verdicts.push(Verdict::not_applicable(
            "count_lower",
            "metric is not Riemannian",
        ));
        verdicts.push(Verdict::not_applicable(
            "count_upper",
            "metric is not Riemannian",
        ));
    }

    let conjugate_ledger =
        endpoint_contributions(sys, &SubmanifoldData::point(sys), &conjugate.events).ok();
    let focal_ledger = endpoint_contributions(sys, data, &focal.events).ok();

    intervals.push(tail);
    Ok(ComparisonReport {
        epsilon,
        dim_p,
        intervals,
        conjugate,
        focal,
        t0,
        t_p,
        coincidences,
        conjugate_ledger,
        focal_ledger,
        verdicts,
        max_drift: flow.max_drift(),
    })
}

/// `L′ = {(v, w) : J_{v,w}(a′) = 0}` at the frame of `a`, for `a′ < a`.
#[derive(Debug, Clone)]
pub struct ShiftedLagrangian {
    pub a_prime: f64,
    pub frame: LagrangianFrame,
}

pub fn shifted_start_lagrangian(sys: &JacobiSystem, a_prime: f64) -> Result<ShiftedLagrangian> {
    let (a, _) = sys.interval();
    if !(a_prime.is_finite() && a_prime < a) {
        return Err(Error::InvalidInput(format!(
            "shifted start {a_prime} must precede {a}"
        )));
    }
    let phi = flow_at(sys, a_prime)?;
    let frame = phi
        .clone()
        .lu()
        .solve(sys.l0().frame())
        .ok_or(Error::SingularFlow(a_prime))?;
    Ok(ShiftedLagrangian {
        a_prime,
        frame: LagrangianFrame::new(sys.space(), frame)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftedReport {
    pub a_prime: f64,
    pub t0: f64,
    pub multiplicity: usize,
    /// `μ_{L₀}(ℓ|[a+ε, t₀])`.
    pub mu_before: Option<i64>,
    pub general_hypothesis: bool,
    /// `t₀` first, nondegenerate, and `mul(t₀) > n₋(g) + n₋(g, t₀)`.
    pub first_instant_hypothesis: bool,
    /// An instant in `[a, t₀]` where `ℓ` meets `L′`.
    pub conclusion: Option<f64>,
    pub verdict: Verdict,
}

/// Shifted-start criteria for a detected conjugate instant `t0`.
pub fn check_shifted_criteria(
    flow: &Arc<JacobiFlow>,
    a_prime: f64,
    t0: f64,
    epsilon: f64,
) -> Result<ShiftedReport> {
    let sys = flow.system();
    let (a, _) = sys.interval();
    let id = format!("shifted_start[{a_prime:.6}]");
    let l0 = sys.l0();
    let event = event_at(flow, &l0, t0)?;
    let scan = detect_focal_instants(flow, &l0, &DetectOptions::default())?;
    let is_first = scan
        .events
        .iter()
        .all(|e| e.t >= t0 - 1e-9 * (t0 - a).max(1.0));
    let g = sys.metric_inertia();

    let path = lagrangian_path_from_flow(flow)?;
    let mu_before = if a + epsilon < t0 {
        maslov_on(&path, a + epsilon, t0, &l0)
            .ok()
            .map(|r| r.integer())
    } else {
        None
    };
    let mul = event.multiplicity as i64;
    let general_hypothesis =
        mu_before.is_some_and(|mu| mul > g.index as i64 - mu || mu < -(g.coindex as i64));
    let first_instant_hypothesis =
        is_first && !event.degenerate && mul > (g.index + event.inertia_on_a.index) as i64;

    let mut conclusion = None;
    if general_hypothesis || first_instant_hypothesis {
        let shifted = shifted_start_lagrangian(sys, a_prime)?;
        let opts = DetectOptions {
            include_start: true,
            window: Some((a, t0)),
            cluster: None,
        };
        let hits = detect_focal_instants(flow, &shifted.frame, &opts)?;
        conclusion = hits.events.first().map(|e| e.t);
        if conclusion.is_none() && t0 == flow.samples().last().map_or(t0, |s| s.t) {
            let at_end = event_at(flow, &shifted.frame, t0)?;
            conclusion = (at_end.multiplicity > 0).then_some(t0);
        }
    }
    let verdict = if !(general_hypothesis || first_instant_hypothesis) {
        Verdict::not_applicable(id, "hypotheses do not hold")
    } else {
        let found = conclusion.map_or(0.0, |_| 1.0);
        Verdict::compare(id, 1.0, found)
    };
    Ok(ShiftedReport {
        a_prime,
        t0,
        multiplicity: event.multiplicity,
        mu_before,
        general_hypothesis,
        first_instant_hypothesis,
        conclusion,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::CurvatureModel;
    use crate::lagrangian::intersection_dimension;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn sphere(b: f64) -> JacobiSystem {
        JacobiSystem::new(
            vec![1.0; 3],
            CurvatureModel::diagonal(&[0.0, -1.0, -1.0]),
            0.0,
            b,
            1e-3,
        )
        .unwrap()
    }

    fn verdict<'a>(r: &'a ComparisonReport, id: &str) -> &'a Verdict {
        r.verdicts.iter().find(|v| v.id == id).unwrap()
    }

    #[test]
    fn flat_with_spherical_submanifold() {
        let sys = JacobiSystem::new(vec![1.0; 3], CurvatureModel::zero(3), 0.0, 3.0, 1e-2).unwrap();
        let data = SubmanifoldData::normal_hyperplane(&sys, 0.5).unwrap();
        let r = run_comparison(&sys, &data, &[]).unwrap();
        let tail = r.intervals.last().unwrap();
        assert_eq!(tail.mu_l0, Some(0));
        assert_eq!(tail.mu_lp, Some(2));
        let upper = verdict(&r, "tail_upper");
        assert_eq!(upper.status, VerdictStatus::Holds);
        assert_eq!(upper.slack, 0.0);
        assert_eq!(verdict(&r, "count_upper").slack, 0.0);
        assert!(!r.any_violation());
        assert!(r.verdicts.iter().all(Verdict::is_consistent));
    }

    #[test]
    fn equatorial_focal_before_conjugate() {
        let sys = sphere(3.5);
        let data = SubmanifoldData::normal_hyperplane(&sys, 0.0).unwrap();
        let r = run_comparison(&sys, &data, &[(0.0, 3.5), (1.0, 2.0)]).unwrap();
        assert!((r.t_p.unwrap() - PI / 2.0).abs() < 1e-6);
        assert!((r.t0.unwrap() - PI).abs() < 1e-6);
        assert_eq!(verdict(&r, "focal_first").status, VerdictStatus::Holds);
        assert!(!r.any_violation(), "{:#?}", r.verdicts);

        // Shorter interval: no conjugate instant, the ordering holds vacuously.
        let short = sphere(2.0);
        let r = run_comparison(
            &short,
            &SubmanifoldData::normal_hyperplane(&short, 0.0).unwrap(),
            &[],
        )
        .unwrap();
        assert!(r.t0.is_none());
        assert_eq!(verdict(&r, "focal_first").status, VerdictStatus::Holds);
    }

    #[test]
    fn point_submanifold_gives_equal_indices() {
        let sys = sphere(7.0);
        let r = run_comparison(
            &sys,
            &SubmanifoldData::point(&sys),
            &[(0.0, 7.0), (0.5, 4.0)],
        )
        .unwrap();
        for iv in &r.intervals {
            assert_eq!(iv.mu_l0, iv.mu_lp);
        }
        assert!(!r.any_violation());
    }

    #[test]
    fn lorentzian_regime_is_not_asserted() {
        let sys = JacobiSystem::new(
            vec![1.0, -1.0, 1.0],
            CurvatureModel::Constant(vec![
                vec![0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.5],
                vec![0.0, -0.5, -1.0],
            ]),
            0.0,
            4.0,
            1e-3,
        )
        .unwrap();
        let r = run_comparison(
            &sys,
            &SubmanifoldData::normal_hyperplane(&sys, 0.0).unwrap(),
            &[],
        )
        .unwrap();
        assert_eq!(
            verdict(&r, "focal_first").status,
            VerdictStatus::NotApplicable
        );
        assert_eq!(
            verdict(&r, "count_upper").status,
            VerdictStatus::NotApplicable
        );
    }

    #[test]
    fn shifted_lagrangian_closed_forms() {
        let flat =
            JacobiSystem::new(vec![1.0; 2], CurvatureModel::zero(2), 0.0, 1.0, 1e-2).unwrap();
        let s = shifted_start_lagrangian(&flat, -1.0).unwrap();
        let diagonal = LagrangianFrame::new(
            flat.space(),
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        assert!(s.frame.same_subspace(&diagonal, 1e-10));
        let near = shifted_start_lagrangian(&flat, -1e-9).unwrap();
        assert_eq!(intersection_dimension(&near.frame, &flat.l0()).unwrap(), 2);

        let osc = JacobiSystem::new(vec![1.0], CurvatureModel::diagonal(&[-1.0]), 0.0, 1.0, 1e-3)
            .unwrap();
        let s = shifted_start_lagrangian(&osc, -PI / 2.0).unwrap();
        // J(t) = v cos t + w sin t vanishes at −π/2 iff w = 0.
        let horizontal =
            LagrangianFrame::new(osc.space(), DMatrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert!(s.frame.same_subspace(&horizontal, 1e-10));
    }

    #[test]
    fn shifted_criteria_on_the_sphere() {
        let sys = sphere(3.5);
        let flow = Arc::new(integrate_flow(&sys).unwrap());
        let r = check_shifted_criteria(&flow, -PI / 2.0, PI, 0.1).unwrap();
        assert!(r.first_instant_hypothesis);
        assert_eq!(r.verdict.status, VerdictStatus::Holds);
        assert!((r.conclusion.unwrap() - PI / 2.0).abs() < 1e-6);
    }
}
