//! Scenario files, built-in models, report bundles and the randomized property suite.
//!
//! Exit-code contract of the binary: `0` when every asserted inequality holds, `1` on a
//! mathematical violation (the report is still written), `2` on input errors.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::comparison::{
    check_shifted_criteria, run_comparison_on, ComparisonReport, ShiftedReport, Verdict,
    VerdictStatus, LOCALIZATION_TOL,
};
use crate::error::{Error, Result};
use crate::jacobi::{
    integrate_flow, CurvatureModel, JacobiSystem, SubmanifoldData, DEFAULT_DRIFT_BOUND, EVENT_TOL,
};
use crate::lagrangian::{
    intersection_dimension, random_lagrangian_sharing, random_lagrangian_with, standard_space,
    transition_reference, transversality_margin, Chart, LagrangianFrame,
};
use crate::linalg::{gaussian_matrix, RANK_REL_TOL};
use crate::maslov::{
    check_estimates, hormander_index, kashiwara_index, random_test_path, HormanderQuery,
};
use crate::symforms::{
    check_perturbation_bounds, default_tol_rank, difference_bound, SymmetricForm,
};

/// Initial submanifold in a scenario: `"point"` or a basis of `P` (one vector per row) with
/// the shape operator in that basis.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SubmanifoldSpec {
    Named(String),
    Data {
        p_basis: Vec<Vec<f64>>,
        s: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    pub signature: Vec<f64>,
    pub curvature: CurvatureModel,
    pub interval: [f64; 2],
    pub step: f64,
    pub submanifold: SubmanifoldSpec,
    #[serde(default)]
    pub subintervals: Vec<[f64; 2]>,
    #[serde(default)]
    pub shifted_points: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn field_error(field: &str, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("field `{field}`: {e}"))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("scenario parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Expands the descriptor, validating every field.
    pub fn system(&self) -> Result<JacobiSystem> {
        if self.signature.len() != self.dimension {
            return Err(field_error(
                "signature",
                format!(
                    "expected {} entries, got {}",
                    self.dimension,
                    self.signature.len()
                ),
            ));
        }
        if let Some((i, s)) = self
            .signature
            .iter()
            .enumerate()
            .find(|(_, &s)| s != 1.0 && s != -1.0)
        {
            return Err(field_error(
                &format!("signature[{i}]"),
                format!("{s} is not ±1"),
            ));
        }
        let [a, b] = self.interval;
        JacobiSystem::new(
            self.signature.clone(),
            self.curvature.clone(),
            a,
            b,
            self.step,
        )
        .map_err(|e| match e {
            Error::NotMetricSymmetric(_) | Error::DimensionMismatch { .. } => {
                field_error("curvature", e)
            }
            Error::InvalidInput(msg)
                if msg.contains("curvature")
                    || msg.contains("profile")
                    || msg.contains("coefficient") =>
            {
                field_error("curvature", msg)
            }
            Error::InvalidInput(msg) if msg.contains("interval") => field_error("interval", msg),
            Error::InvalidInput(msg) if msg.contains("step") => field_error("step", msg),
            other => other,
        })
    }

    pub fn submanifold_data(&self, sys: &JacobiSystem) -> Result<SubmanifoldData> {
        match &self.submanifold {
            SubmanifoldSpec::Named(name) if name == "point" => Ok(SubmanifoldData::point(sys)),
            SubmanifoldSpec::Named(name) => Err(field_error(
                "submanifold",
                format!("unknown value {name:?}"),
            )),
            SubmanifoldSpec::Data { p_basis, s } => {
                let n = sys.n();
                let k = p_basis.len();
                if p_basis.iter().any(|r| r.len() != n) {
                    return Err(field_error(
                        "submanifold.p_basis",
                        format!("rows must have length {n}"),
                    ));
                }
                if s.len() != k || s.iter().any(|r| r.len() != k) {
                    return Err(field_error("submanifold.s", format!("must be {k}x{k}")));
                }
                let p = DMatrix::from_fn(n, k, |i, j| p_basis[j][i]);
                let shape = DMatrix::from_fn(k, k, |i, j| s[i][j]);
                SubmanifoldData::new(sys, p, shape).map_err(|e| field_error("submanifold", e))
            }
        }
    }

    pub fn subinterval_list(&self) -> Result<Vec<(f64, f64)>> {
        let [a, b] = self.interval;
        self.subintervals
            .iter()
            .enumerate()
            .map(|(i, &[lo, hi])| {
                if a <= lo && lo < hi && hi <= b {
                    Ok((lo, hi))
                } else {
                    Err(field_error(
                        &format!("subintervals[{i}]"),
                        format!("[{lo}, {hi}] not inside [{a}, {b}]"),
                    ))
                }
            })
            .collect()
    }
}

pub const MODEL_NAMES: [&str; 5] = [
    "flat",
    "sphere",
    "hyperbolic",
    "lorentz-flat",
    "lorentz-const",
];

fn diagonal_rows(d: &[f64]) -> Vec<Vec<f64>> {
    let n = d.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect()
}

/// A scenario realizing one of the built-in models. `P` defaults to the orthogonal of the
/// geodesic direction with vanishing shape operator.
///
/// `lorentz-const` uses `g = diag(1, −1, 1, …)` and the constant curvature with block
/// `[[1, 1/2], [−1/2, −1]]` on `(e₂, e₃)` and `−1/2` on the remaining transverse directions
/// (`diag(0, 1)` when `n = 2`).
pub fn builtin_model(name: &str, n: usize, interval: Option<(f64, f64)>) -> Result<Scenario> {
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let transverse = |x: f64| {
        let mut d = vec![x; n];
        d[0] = 0.0;
        d
    };
    let (signature, curvature, default_interval, shifted) = match name {
        "flat" => (
            vec![1.0; n],
            diagonal_rows(&vec![0.0; n]),
            (0.0, 3.0),
            vec![],
        ),
        "sphere" => (
            vec![1.0; n],
            diagonal_rows(&transverse(-1.0)),
            (0.0, 3.5 * PI),
            vec![-PI / 2.0],
        ),
        "hyperbolic" => (
            vec![1.0; n],
            diagonal_rows(&transverse(1.0)),
            (0.0, 10.0),
            vec![],
        ),
        "lorentz-flat" => {
            let mut g = vec![1.0; n];
            g[0] = -1.0;
            (g, diagonal_rows(&vec![0.0; n]), (0.0, 3.0), vec![])
        }
        "lorentz-const" => {
            if n < 2 {
                return Err(Error::InvalidInput("lorentz-const needs n >= 2".into()));
            }
            let mut g = vec![1.0; n];
            g[1] = -1.0;
            let mut m = diagonal_rows(&transverse(-0.5));
            if n == 2 {
                m[1][1] = 1.0;
            } else {
                m[1][1] = 1.0;
                m[1][2] = 0.5;
                m[2][1] = -0.5;
                m[2][2] = -1.0;
            }
            (g, m, (0.0, 6.0), vec![])
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown model {other:?}; expected one of {}",
                MODEL_NAMES.join(", ")
            )))
        }
    };
    let (a, b) = interval.unwrap_or(default_interval);
    let submanifold = if n == 1 {
        SubmanifoldSpec::Named("point".into())
    } else {
        SubmanifoldSpec::Data {
            p_basis: (1..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            s: diagonal_rows(&vec![0.0; n - 1]),
        }
    };
    let scenario = Scenario {
        name: name.to_string(),
        dimension: n,
        signature,
        curvature: CurvatureModel::Constant(curvature),
        interval: [a, b],
        step: 1e-3,
        submanifold,
        subintervals: vec![[a, b]],
        shifted_points: shifted.into_iter().filter(|&s| s < a).collect(),
        seed: 0,
    };
    scenario.system()?;
    Ok(scenario)
}

/// Seventeen significant digits.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub report: ComparisonReport,
    pub shifted: Vec<ShiftedReport>,
    pub verdicts: Vec<Verdict>,
    pub all_hold: bool,
}

/// Integrates, detects, compares and evaluates the shifted-start criteria.
pub fn evaluate_scenario(scenario: &Scenario) -> Result<RunOutcome> {
    let sys = scenario.system()?;
    let data = scenario.submanifold_data(&sys)?;
    let subintervals = scenario.subinterval_list()?;
    for (i, &ap) in scenario.shifted_points.iter().enumerate() {
        if ap.is_nan() || ap >= sys.interval().0 {
            return Err(field_error(
                &format!("shifted_points[{i}]"),
                format!("{ap} must precede the start"),
            ));
        }
    }
    let flow = Arc::new(integrate_flow(&sys)?);
    let report = run_comparison_on(&flow, &data, &subintervals)?;
    let mut verdicts = report.verdicts.clone();
    let mut shifted = Vec::new();
    for &ap in &scenario.shifted_points {
        match report.t0 {
            Some(t0) => {
                let r = check_shifted_criteria(&flow, ap, t0, report.epsilon)?;
                verdicts.push(r.verdict.clone());
                shifted.push(r);
            }
            None => verdicts.push(Verdict::not_applicable(
                format!("shifted_start[{ap:.6}]"),
                "no conjugate instant",
            )),
        }
    }
    let all_hold = verdicts.iter().all(|v| v.status != VerdictStatus::Violated);
    Ok(RunOutcome {
        report,
        shifted,
        verdicts,
        all_hold,
    })
}

pub fn events_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("reference,t,multiplicity,n_minus,n_plus,signature,degenerate\n");
    for (reference, scan) in [("L0", &report.conjugate), ("LP", &report.focal)] {
        for e in &scan.events {
            let _ = writeln!(
                out,
                "{reference},{},{},{},{},{},{}",
                fmt_f64(e.t),
                e.multiplicity,
                e.inertia_on_a.index,
                e.inertia_on_a.coindex,
                e.inertia_on_a.signature,
                e.degenerate
            );
        }
    }
    out
}

pub fn maslov_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("interval_lo,interval_hi,reference,convention,value_times_two\n");
    for iv in &report.intervals {
        for (reference, log) in [("L0", &iv.log_l0), ("LP", &iv.log_lp)] {
            if let Some(r) = log {
                let _ = writeln!(
                    out,
                    "{},{},{reference},paper,{}",
                    fmt_f64(iv.lo),
                    fmt_f64(iv.hi),
                    r.value_times_two
                );
            }
        }
    }
    out
}

pub fn verdicts_csv(verdicts: &[Verdict]) -> String {
    let mut out = String::from("id,left,right,holds,slack\n");
    for v in verdicts {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            v.id,
            fmt_f64(v.left),
            fmt_f64(v.right),
            v.status.as_str(),
            fmt_f64(v.slack)
        );
    }
    out
}

pub fn run_metadata(scenario: &Scenario, outcome: &RunOutcome) -> Value {
    let r = &outcome.report;
    let warnings: Vec<String> = [r.conjugate.warning.clone(), r.focal.warning.clone()]
        .into_iter()
        .flatten()
        .collect();
    json!({
        "name": scenario.name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": scenario.seed,
        "step": scenario.step,
        "dimension": scenario.dimension,
        "signature": scenario.signature,
        "interval": scenario.interval,
        "tolerances": {
            "event": EVENT_TOL,
            "localization": LOCALIZATION_TOL,
            "drift_bound": DEFAULT_DRIFT_BOUND,
            "rank": default_tol_rank(),
            "rank_relative": RANK_REL_TOL,
        },
        "epsilon": r.epsilon,
        "dim_p": r.dim_p,
        "t0": r.t0,
        "t_p": r.t_p,
        "max_drift": r.max_drift,
        "coincidences": r.coincidences,
        "conjugate_ledger": r.conjugate_ledger,
        "focal_ledger": r.focal_ledger,
        "warnings": warnings,
        "shifted": outcome.shifted,
        "intervals": r.intervals,
        "all_hold": outcome.all_hold,
    })
}

/// Writes `events.csv`, `maslov.csv`, `verdicts.csv` and `run.json` into `out`.
pub fn write_bundle(out: &Path, scenario: &Scenario, outcome: &RunOutcome) -> Result<()> {
    let io =
        |e: std::io::Error| Error::InvalidInput(format!("cannot write to {}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    fs::write(out.join("events.csv"), events_csv(&outcome.report)).map_err(io)?;
    fs::write(out.join("maslov.csv"), maslov_csv(&outcome.report)).map_err(io)?;
    fs::write(out.join("verdicts.csv"), verdicts_csv(&outcome.verdicts)).map_err(io)?;
    let meta = serde_json::to_string_pretty(&run_metadata(scenario, outcome))
        .expect("metadata serializes");
    fs::write(out.join("run.json"), meta + "\n").map_err(io)?;
    Ok(())
}

/// Loads a scenario file, optionally overriding the step, and writes the report bundle.
pub fn run_scenario(path: &Path, out: &Path, step: Option<f64>) -> Result<RunOutcome> {
    let mut scenario = Scenario::load(path)?;
    if let Some(h) = step {
        scenario.step = h;
    }
    let outcome = evaluate_scenario(&scenario)?;
    write_bundle(out, &scenario, &outcome)?;
    Ok(outcome)
}

pub fn default_out_dir(scenario_path: &Path) -> PathBuf {
    let stem = scenario_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    PathBuf::from(format!("{stem}-report"))
}

pub const PROPERTY_FAMILIES: [&str; 8] = [
    "inertia_perturbation",
    "inertia_difference",
    "reference_estimates",
    "opposite_form",
    "hormander_antisymmetry",
    "kashiwara_decomposition",
    "transition_identity",
    "chart_kernel",
];

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub family: String,
    pub trials: usize,
    pub passed: usize,
    /// Smallest `right − left` seen; `None` for identities.
    pub worst_slack: Option<i64>,
    pub counterexample: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropsSummary {
    pub seed: u64,
    pub trials: usize,
    pub dims: Vec<usize>,
    pub families: Vec<FamilySummary>,
}

impl PropsSummary {
    pub fn all_pass(&self) -> bool {
        self.families.iter().all(|f| f.passed == f.trials)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "seed {} trials {} dims {:?}\n",
            self.seed, self.trials, self.dims
        );
        for f in &self.families {
            let slack = f.worst_slack.map_or("-".to_string(), |s| s.to_string());
            let _ = writeln!(
                out,
                "{:<24} {:>5}/{:<5} worst slack {slack}",
                f.family, f.passed, f.trials
            );
        }
        out
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// `X·diag(±1)·Xᵀ` with random rank.
fn random_form<R: Rng + ?Sized>(rng: &mut R, d: usize) -> SymmetricForm {
    let r = rng.random_range(0..=d);
    let x = gaussian_matrix(rng, d, r);
    let signs = DMatrix::from_fn(r, r, |i, j| {
        if i != j {
            0.0
        } else if rng.random_bool(0.5) {
            1.0
        } else {
            -1.0
        }
    });
    SymmetricForm::new(&x * signs * x.transpose()).expect("finite form")
}

/// One trial: `Ok((passed, slack, counterexample))`.
type Trial = (bool, Option<i64>, Value);

fn trial(family: &str, n: usize, rng: &mut ChaCha8Rng) -> Result<Trial> {
    let space = standard_space(n)?;
    let generic = |rng: &mut ChaCha8Rng, others: &[&LagrangianFrame]| {
        random_lagrangian_with(&space, rng, others, 1e-3, 256)
    };
    let frame = |l: &LagrangianFrame| rows(l.frame());
    match family {
        "inertia_perturbation" => {
            let (b, c) = (random_form(rng, n), random_form(rng, n));
            let v = check_perturbation_bounds(&b, &c)?;
            let ce = json!({"b": rows(b.matrix()), "c": rows(c.matrix()), "verdict": v});
            Ok((v.holds, Some(v.lower_slack.min(v.upper_slack)), ce))
        }
        "inertia_difference" => {
            let (b1, b2, c) = (
                random_form(rng, n),
                random_form(rng, n),
                random_form(rng, n),
            );
            let (lhs, rhs) = difference_bound(&b1, &b2, &c)?;
            let ce =
                json!({"b1": rows(b1.matrix()), "b2": rows(b2.matrix()), "c": rows(c.matrix())});
            Ok((lhs <= rhs, Some(rhs - lhs), ce))
        }
        "reference_estimates" | "opposite_form" => {
            let l0 = generic(rng, &[])?;
            let k0 = rng.random_range(0..=n);
            let l1 = random_lagrangian_sharing(&l0, rng, k0)?;
            let anchor_k = rng.random_range(0..=n);
            let anchor = if rng.random_bool(0.5) { &l0 } else { &l1 };
            let path = random_test_path(&space, rng, Some((anchor, anchor_k)), 3.0)?;
            let report = check_estimates(&path, &l0, &l1)?;
            let ce = json!({"l0": frame(&l0), "l1": frame(&l1), "start": frame(path.start()), "end": frame(path.end()), "report": report});
            if family == "opposite_form" {
                Ok((report.opposite_relation_holds, None, ce))
            } else {
                let slack = report.verdicts.iter().map(|v| v.slack).min();
                Ok((report.verdicts.iter().all(|v| v.holds), slack, ce))
            }
        }
        "hormander_antisymmetry" | "kashiwara_decomposition" => {
            let mut ls: Vec<LagrangianFrame> = Vec::new();
            for _ in 0..4 {
                let refs: Vec<&LagrangianFrame> = ls.iter().collect();
                ls.push(generic(rng, &refs)?);
            }
            let q = hormander_index(&HormanderQuery::new(&ls[0], &ls[1], &ls[2], &ls[3])?)?;
            let ce_frames: Vec<_> = ls.iter().map(frame).collect();
            if family == "hormander_antisymmetry" {
                let swapped =
                    hormander_index(&HormanderQuery::new(&ls[2], &ls[3], &ls[0], &ls[1])?)?;
                Ok((
                    q == -swapped,
                    None,
                    json!({"lagrangians": ce_frames, "q": q, "swapped": swapped}),
                ))
            } else {
                let tau_a = kashiwara_index(&ls[0], &ls[1], &ls[2])?;
                let tau_b = kashiwara_index(&ls[0], &ls[1], &ls[3])?;
                Ok((
                    q == tau_a - tau_b,
                    None,
                    json!({"lagrangians": ce_frames, "q": q, "tau_a": tau_a, "tau_b": tau_b}),
                ))
            }
        }
        "transition_identity" => {
            let l0 = generic(rng, &[])?;
            let k = rng.random_range(0..=n);
            let l1 = random_lagrangian_sharing(&l0, rng, k)?;
            let l = generic(rng, &[&l0, &l1])?;
            let alpha = generic(rng, &[&l])?;
            let c = transition_reference(&l0, &l1, &l)?;
            let lhs = Chart::new(&l1, &l)?.apply(&alpha)?.inertia().coindex;
            let rhs = Chart::new(&l0, &l)?
                .apply(&alpha)?
                .try_add(&c)?
                .inertia()
                .coindex;
            let kernel_ok = c.inertia().nullity == intersection_dimension(&l0, &l1)?;
            let ce =
                json!({"l0": frame(&l0), "l1": frame(&l1), "l": frame(&l), "alpha": frame(&alpha)});
            Ok((lhs == rhs && kernel_ok, None, ce))
        }
        "chart_kernel" => {
            let l0 = generic(rng, &[])?;
            let l1 = generic(rng, &[&l0])?;
            let k = rng.random_range(0..=n);
            let mut l = random_lagrangian_sharing(&l0, rng, k)?;
            let mut tries = 0;
            while transversality_margin(&l, &l1)? <= 1e-3 && tries < 256 {
                l = random_lagrangian_sharing(&l0, rng, k)?;
                tries += 1;
            }
            let nullity = Chart::new(&l0, &l1)?.apply(&l)?.inertia().nullity;
            let dim = intersection_dimension(&l, &l0)?;
            let ce = json!({"l0": frame(&l0), "l1": frame(&l1), "l": frame(&l), "nullity": nullity, "intersection": dim});
            Ok((nullity == dim && dim == k, None, ce))
        }
        other => Err(Error::InvalidInput(format!(
            "unknown property family {other:?}"
        ))),
    }
}

fn family_seed(seed: u64, family: usize, n: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((family as u64) << 40) ^ (n as u64)
}

/// Runs every property family `trials` times for each dimension in `dims`.
pub fn property_suite(seed: u64, trials: usize, dims: &[usize]) -> Result<PropsSummary> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if dims.is_empty() || dims.iter().any(|&d| d == 0 || d > 8) {
        return Err(Error::InvalidInput(
            "dims must be a nonempty list of values in 1..=8".into(),
        ));
    }
    let mut families = Vec::new();
    for (fi, family) in PROPERTY_FAMILIES.iter().enumerate() {
        let mut summary = FamilySummary {
            family: family.to_string(),
            trials: 0,
            passed: 0,
            worst_slack: None,
            counterexample: None,
        };
        for &n in dims {
            let mut rng = ChaCha8Rng::seed_from_u64(family_seed(seed, fi, n));
            for t in 0..trials {
                summary.trials += 1;
                let (ok, slack, ce) = match trial(family, n, &mut rng) {
                    Ok(result) => result,
                    Err(e) => (false, None, json!({"error": e.to_string()})),
                };
                if let Some(s) = slack {
                    summary.worst_slack = Some(summary.worst_slack.map_or(s, |w: i64| w.min(s)));
                }
                if ok {
                    summary.passed += 1;
                } else if summary.counterexample.is_none() {
                    summary.counterexample = Some(json!({"dimension": n, "trial": t, "data": ce}));
                }
            }
        }
        families.push(summary);
    }
    Ok(PropsSummary {
        seed,
        trials,
        dims: dims.to_vec(),
        families,
    })
}
