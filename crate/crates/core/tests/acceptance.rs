//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use maslovkit::cli::builtin_model;
use maslovkit::comparison::{
    check_shifted_criteria, run_comparison, run_comparison_on, VerdictStatus,
};
use maslovkit::jacobi::{
    detect_focal_instants, integrate_flow, lagrangian_path_from_flow, DetectOptions, JacobiSystem,
    SubmanifoldData,
};
use maslovkit::lagrangian::{
    intersection_dimension, random_lagrangian_sharing, random_lagrangian_with, standard_space,
    transition_reference, transversality_margin, Chart, LagrangianFrame, SymplecticSpace,
};
use maslovkit::maslov::{
    check_estimates, connecting_path, hormander_index, hormander_index_along, kashiwara_index,
    maslov_index, maslov_index_crossings, random_symplectic_arc, random_test_path, Convention,
    HormanderQuery, LagrangianPath,
};
use maslovkit::symforms::{check_perturbation_bounds, SymmetricForm};
use maslovkit::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn generic(
    space: &Arc<SymplecticSpace>,
    r: &mut ChaCha8Rng,
    others: &[&LagrangianFrame],
) -> LagrangianFrame {
    random_lagrangian_with(space, r, others, 1e-3, 256).unwrap()
}

fn random_orthogonal(r: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `Q·diag(λ)·Qᵀ` with prescribed sign pattern; returns the form and its `(n₋, n₊, n₀)`.
fn form_with_known_inertia(r: &mut ChaCha8Rng, d: usize) -> (SymmetricForm, (usize, usize, usize)) {
    let mut counts = (0, 0, 0);
    let lambdas: Vec<f64> = (0..d)
        .map(|_| match r.random_range(0..3) {
            0 => {
                counts.0 += 1;
                -r.random_range(0.1..3.0)
            }
            1 => {
                counts.1 += 1;
                r.random_range(0.1..3.0)
            }
            _ => {
                counts.2 += 1;
                0.0
            }
        })
        .collect();
    let q = random_orthogonal(r, d);
    let m = &q * DMatrix::from_diagonal(&DVector::from_vec(lambdas)) * q.transpose();
    (
        SymmetricForm::new((&m + m.transpose()) * 0.5).unwrap(),
        counts,
    )
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut min_slack = i64::MAX;
    for trial in 0..1000 {
        let d = 1 + trial % 8;
        let (b, ib) = form_with_known_inertia(&mut r, d);
        let (c, ic) = form_with_known_inertia(&mut r, d);
        let measured = (b.inertia(), c.inertia());
        ensure(
            (measured.0.index, measured.0.coindex, measured.0.nullity) == ib
                && (measured.1.index, measured.1.coindex, measured.1.nullity) == ic,
            || format!("trial {trial}: inertia differs from construction"),
        )?;
        let v = check_perturbation_bounds(&b, &c).map_err(|e| e.to_string())?;
        // Recompute the bounds from the constructed inertia.
        ensure(
            v.lower_bound == -(ic.0 as i64) && v.upper_bound == ic.1 as i64,
            || format!("trial {trial}: bounds"),
        )?;
        ensure(v.holds, || format!("trial {trial}: {v:?}"))?;
        min_slack = min_slack.min(v.lower_slack.min(v.upper_slack));
    }
    Ok(format!("1000 pairs, min slack {min_slack}"))
}

fn estimate_paths(
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<(LagrangianPath, LagrangianFrame, LagrangianFrame)>, String> {
    let space = standard_space(n).unwrap();
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    for trial in 0..count {
        let l0 = generic(&space, &mut r, &[]);
        // Cycle through shared dimensions of L0, L1 and of the start with either reference.
        let l1 = random_lagrangian_sharing(&l0, &mut r, trial % (n + 1)).unwrap();
        let anchor = if trial % 2 == 0 { &l0 } else { &l1 };
        let path = random_test_path(&space, &mut r, Some((anchor, (trial / 2) % (n + 1))), 3.0)
            .map_err(|e| e.to_string())?;
        out.push((path, l0, l1));
    }
    Ok(out)
}

fn criterion_2() -> Outcome {
    let mut nongeneric = 0;
    for n in 1..=4 {
        for (i, (path, l0, l1)) in estimate_paths(n, 500, 20 + n as u64)?.iter().enumerate() {
            let report =
                check_estimates(path, l0, l1).map_err(|e| format!("n={n} path {i}: {e}"))?;
            ensure(report.verdicts.iter().all(|v| v.holds), || {
                format!("n={n} path {i}: {:?}", report.verdicts)
            })?;
            if intersection_dimension(path.start(), l0).unwrap() > 0
                || intersection_dimension(l0, l1).unwrap() > 0
            {
                nongeneric += 1;
            }
        }
    }
    Ok(format!(
        "2000 paths ({nongeneric} with non-generic endpoints or references), 0 violations"
    ))
}

fn criterion_3() -> Outcome {
    for n in 1..=4 {
        for (i, (path, l0, _)) in estimate_paths(n, 50, 30 + n as u64)?.iter().enumerate() {
            let mu = maslov_index(path, l0, Convention::PositiveInertia)
                .map_err(|e| e.to_string())?
                .integer();
            let opposite = maslov_index(path, l0, Convention::OppositeForm)
                .map_err(|e| e.to_string())?
                .integer();
            let da = intersection_dimension(path.start(), l0).unwrap() as i64;
            let db = intersection_dimension(path.end(), l0).unwrap() as i64;
            ensure(opposite == -mu + da - db, || {
                format!("n={n} path {i}: {opposite} vs {}", -mu + da - db)
            })?;
        }
    }
    Ok("200 paths, exact".into())
}

fn shifted(path: &LagrangianPath, by: f64) -> LagrangianPath {
    let p = path.clone();
    LagrangianPath::from_fn(
        path.a() + by,
        path.b() + by,
        path.samples().len(),
        move |t| p.eval(t - by),
    )
    .unwrap()
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut nonzero = 0;
    for trial in 0..200 {
        let n = 1 + trial % 4;
        let space = standard_space(n).unwrap();
        let mut ls: Vec<LagrangianFrame> = Vec::new();
        for _ in 0..4 {
            let refs: Vec<&LagrangianFrame> = ls.iter().collect();
            ls.push(generic(&space, &mut r, &refs));
        }
        let q = |a: usize, b: usize, c: usize, d: usize| {
            hormander_index(&HormanderQuery::new(&ls[a], &ls[b], &ls[c], &ls[d]).unwrap())
                .map_err(|e| e.to_string())
        };
        let forward = q(0, 1, 2, 3)?;
        ensure(forward == -q(2, 3, 0, 1)?, || {
            format!("trial {trial}: antisymmetry")
        })?;
        let tau = |c: usize| kashiwara_index(&ls[0], &ls[1], &ls[c]).map_err(|e| e.to_string());
        ensure(forward == tau(2)? - tau(3)?, || {
            format!("trial {trial}: Kashiwara decomposition")
        })?;
        nonzero += usize::from(forward != 0);
    }
    for trial in 0..100 {
        let n = 1 + trial % 4;
        let space = standard_space(n).unwrap();
        let ls: Vec<LagrangianFrame> = (0..4).map(|_| generic(&space, &mut r, &[])).collect();
        let query = HormanderQuery::new(&ls[0], &ls[1], &ls[2], &ls[3]).unwrap();
        let direct = connecting_path(&ls[2], &ls[3], &mut r).unwrap();
        let mid = generic(&space, &mut r, &[]);
        let detour = connecting_path(&ls[2], &mid, &mut r)
            .unwrap()
            .concat(&shifted(
                &connecting_path(&mid, &ls[3], &mut r).unwrap(),
                1.0,
            ))
            .unwrap();
        let (x, y) = (
            hormander_index_along(&query, &direct).map_err(|e| e.to_string())?,
            hormander_index_along(&query, &detour).map_err(|e| e.to_string())?,
        );
        ensure(x == y, || format!("pair {trial}: {x} vs {y}"))?;
    }
    Ok(format!(
        "200 quadruples ({nonzero} with nonzero index), 100 path pairs, exact"
    ))
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    for trial in 0..200 {
        let n = 1 + trial % 4;
        let space = standard_space(n).unwrap();
        let l0 = generic(&space, &mut r, &[]);
        let l1 = random_lagrangian_sharing(&l0, &mut r, trial % (n + 1)).unwrap();
        let l = generic(&space, &mut r, &[&l0, &l1]);
        let alpha = generic(&space, &mut r, &[&l]);
        let c = transition_reference(&l0, &l1, &l).map_err(|e| e.to_string())?;
        let lhs = Chart::new(&l1, &l)
            .unwrap()
            .apply(&alpha)
            .unwrap()
            .inertia()
            .coindex;
        let rhs = Chart::new(&l0, &l)
            .unwrap()
            .apply(&alpha)
            .unwrap()
            .try_add(&c)
            .unwrap()
            .inertia()
            .coindex;
        ensure(lhs == rhs, || {
            format!("transition trial {trial}: {lhs} vs {rhs}")
        })?;
    }
    for trial in 0..200 {
        let n = 1 + trial % 4;
        let space = standard_space(n).unwrap();
        let l0 = generic(&space, &mut r, &[]);
        let l1 = generic(&space, &mut r, &[&l0]);
        let k = trial % (n + 1);
        let l = loop {
            let cand = random_lagrangian_sharing(&l0, &mut r, k).unwrap();
            if transversality_margin(&cand, &l1).unwrap() > 1e-3 {
                break cand;
            }
        };
        let nullity = Chart::new(&l0, &l1)
            .unwrap()
            .apply(&l)
            .unwrap()
            .inertia()
            .nullity;
        ensure(
            nullity == k && intersection_dimension(&l, &l0).unwrap() == k,
            || format!("kernel trial {trial}: nullity {nullity}, shared {k}"),
        )?;
    }
    Ok("200 transition and 200 chart-kernel configurations, exact".into())
}

fn model(name: &str, n: usize, interval: Option<(f64, f64)>) -> JacobiSystem {
    builtin_model(name, n, interval).unwrap().system().unwrap()
}

fn criterion_6() -> Outcome {
    let sys = model("sphere", 3, Some((0.0, 3.5 * PI)));
    ensure(sys.step() == 1e-3, || "step".into())?;
    let flow = Arc::new(integrate_flow(&sys).map_err(|e| e.to_string())?);
    let scan = detect_focal_instants(&flow, &sys.l0(), &DetectOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(scan.events.len() == 3, || {
        format!("{} events", scan.events.len())
    })?;
    let mut worst = 0f64;
    for (k, e) in scan.events.iter().enumerate() {
        let err = (e.t - (k + 1) as f64 * PI).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("instant {} off by {err:e}", e.t))?;
        ensure(e.multiplicity == 2 && e.inertia_on_a.signature == 2, || {
            format!("{e:?}")
        })?;
    }
    let report = run_comparison_on(&flow, &SubmanifoldData::point(&sys), &[(0.0, 3.5 * PI)])
        .map_err(|e| e.to_string())?;
    let full = report.intervals[0]
        .mu_l0
        .ok_or("full-interval index unavailable")?;
    let tail = report
        .intervals
        .last()
        .unwrap()
        .mu_l0
        .ok_or("tail index unavailable")?;
    ensure(full == 9 && tail == 6, || {
        format!("mu full {full}, tail {tail}")
    })?;
    ensure(flow.max_drift() <= 1e-8, || {
        format!("drift {:e}", flow.max_drift())
    })?;
    Ok(format!(
        "instants within {worst:.1e}, mu[eps,b] = {tail}, mu[a,b] = {full}, drift {:.1e}",
        flow.max_drift()
    ))
}

fn criterion_7() -> Outcome {
    let sys = model("flat", 3, Some((0.0, 3.0)));
    let data = SubmanifoldData::normal_hyperplane(&sys, 0.5).map_err(|e| e.to_string())?;
    let report = run_comparison(&sys, &data, &[]).map_err(|e| e.to_string())?;
    ensure(
        report.focal.events.len() == 1 && report.conjugate.events.is_empty(),
        || "event sets".into(),
    )?;
    let e = &report.focal.events[0];
    ensure((e.t - 2.0).abs() <= 1e-8, || {
        format!("focal instant {}", e.t)
    })?;
    ensure(e.multiplicity == 2 && e.inertia_on_a.signature == 2, || {
        format!("{e:?}")
    })?;
    let tail = report.intervals.last().unwrap();
    ensure(tail.mu_l0 == Some(0) && tail.mu_lp == Some(2), || {
        format!("{:?} {:?}", tail.mu_l0, tail.mu_lp)
    })?;
    let tail_change = format!("reference_change[{:.6},{:.6}]", tail.lo, tail.hi);
    for id in ["tail_upper", "count_upper", tail_change.as_str()] {
        let v = report
            .verdicts
            .iter()
            .find(|v| v.id == id)
            .ok_or(format!("missing {id}"))?;
        ensure(v.status == VerdictStatus::Holds && v.slack == 0.0, || {
            format!("{v:?}")
        })?;
    }
    ensure(!report.any_violation(), || "violated verdict".into())?;
    Ok(format!(
        "focal instant at 2 + {:.1e}, upper slack 0",
        e.t - 2.0
    ))
}

fn criterion_8() -> Outcome {
    let sys = model("sphere", 3, Some((0.0, 3.5)));
    let data = SubmanifoldData::normal_hyperplane(&sys, 0.0).map_err(|e| e.to_string())?;
    let report = run_comparison(&sys, &data, &[]).map_err(|e| e.to_string())?;
    let (tp, t0) = (
        report.t_p.ok_or("no focal instant")?,
        report.t0.ok_or("no conjugate instant")?,
    );
    ensure(
        (tp - PI / 2.0).abs() <= 1e-6 && (t0 - PI).abs() <= 1e-6 && tp < t0,
        || format!("tP {tp}, t0 {t0}"),
    )?;
    let v = report
        .verdicts
        .iter()
        .find(|v| v.id == "focal_first")
        .ok_or("verdict")?;
    ensure(v.status == VerdictStatus::Holds, || format!("{v:?}"))?;
    Ok(format!("tP = {tp:.9}, t0 = {t0:.9}"))
}

fn criterion_9() -> Outcome {
    let sys = model("sphere", 3, Some((0.0, 3.5)));
    let flow = Arc::new(integrate_flow(&sys).map_err(|e| e.to_string())?);
    let r = check_shifted_criteria(&flow, -PI / 2.0, PI, 0.1).map_err(|e| e.to_string())?;
    ensure(r.first_instant_hypothesis, || {
        "hypothesis not applicable".into()
    })?;
    let t = r
        .conclusion
        .ok_or("no instant conjugate to the shifted start")?;
    ensure(
        (t - PI / 2.0).abs() <= 1e-6 && r.verdict.status == VerdictStatus::Holds,
        || format!("t' = {t}"),
    )?;
    Ok(format!("t' = {t:.9}"))
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let (mut compared, mut redrawn, mut with_crossings) = (0, 0, 0);
    while compared < 100 {
        let n = 1 + compared % 4;
        let space = standard_space(n).unwrap();
        let l0 = generic(&space, &mut r, &[]);
        let start = generic(&space, &mut r, &[&l0]);
        let path = random_symplectic_arc(&start, &mut r, 3.0, 64).unwrap();
        match maslov_index_crossings(&path, &l0) {
            Ok((crossing, list)) => {
                let chart = maslov_index(&path, &l0, Convention::PositiveInertia)
                    .map_err(|e| e.to_string())?;
                ensure(chart.integer() == crossing.integer(), || {
                    format!(
                        "path {compared}: chart {} vs crossing {}",
                        chart.integer(),
                        crossing.integer()
                    )
                })?;
                with_crossings += usize::from(!list.is_empty());
                compared += 1;
            }
            Err(Error::DegenerateCrossing { .. }) => redrawn += 1,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(format!(
        "100 paths ({with_crossings} with crossings, {redrawn} redrawn), exact"
    ))
}

fn criterion_11() -> Outcome {
    let sys = model("lorentz-flat", 3, None);
    let flow = Arc::new(integrate_flow(&sys).map_err(|e| e.to_string())?);
    let report =
        run_comparison_on(&flow, &SubmanifoldData::point(&sys), &[]).map_err(|e| e.to_string())?;
    let (a, _) = sys.interval();
    let path = lagrangian_path_from_flow(&flow).map_err(|e| e.to_string())?;
    let head = path
        .restrict(a, a + report.epsilon)
        .map_err(|e| e.to_string())?;
    let mu = maslov_index(&head, &sys.l0(), Convention::PositiveInertia)
        .map_err(|e| e.to_string())?
        .integer();
    let n_plus = sys.metric_inertia().coindex as i64;
    ensure(mu == 2 && n_plus == 2, || format!("mu {mu}, n+ {n_plus}"))?;
    Ok(format!("mu[a,a+eps] = {mu} = n+(g)"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("inertia perturbation bounds", criterion_1),
        ("reference-change estimates", criterion_2),
        ("opposite-form relation", criterion_3),
        ("Hormander and Kashiwara identities", criterion_4),
        ("transition and chart-kernel identities", criterion_5),
        ("sphere conjugate instants", criterion_6),
        ("flat space, spherical submanifold", criterion_7),
        ("focal before conjugate on the sphere", criterion_8),
        ("shifted start on the sphere", criterion_9),
        ("chart versus crossing method", criterion_10),
        ("Lorentzian initial contribution", criterion_11),
    ];
    let total = Instant::now();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failures,
        criteria.len(),
        total.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
