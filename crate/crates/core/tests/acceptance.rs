//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL` line to stderr (uncaptured) before asserting.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use common::*;
use pdgmpc::baselines::{qp_solve, solve_qp, QpProblem};
use pdgmpc::certify::{
    certify_ct, certify_dt, pencil_ct, pencil_ct_augmented, plant_supply_ct, plant_supply_dt, smoothness_matrices,
    InputMap, SmoothnessBound,
};
use pdgmpc::config::Scenario;
use pdgmpc::harness::{self, ControllerKind, SimConfig, SimLog, Termination};
use pdgmpc::model::discretize;
use pdgmpc::numkit;
use pdgmpc::ocp::{build_objective, ObjectiveForm, OcpSpec, WeightOrder};
use pdgmpc::pdg::{GammaPolicy, InequalityOn, Pdg, PdgParams, PdgState};
use rand::Rng;

fn suite_start() -> Instant {
    static START: OnceLock<Instant> = OnceLock::new();
    *START.get_or_init(Instant::now)
}

fn report(n: usize, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // write to the raw handle so the line shows even when output is captured
    let _ = writeln!(std::io::stderr(), "criterion {n}: {verdict} | {detail}");
}

/// Certified closed loops of cases 1, 2, 3 and 5, shared across criteria.
fn certified_runs() -> &'static Vec<(usize, SimLog)> {
    static RUNS: OnceLock<Vec<(usize, SimLog)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [1, 2, 3, 5]
            .into_iter()
            .map(|c| {
                let s = case(c);
                let cert = harness::certificate_for(&s, ControllerKind::PdgProj).unwrap();
                assert!(cert.feasible, "case {c} projected certificate");
                let cfg = SimConfig::from_scenario(&s, ControllerKind::PdgProj);
                (c, harness::simulate(&cfg, &s, Some(&cert)).unwrap())
            })
            .collect()
    })
}

#[test]
fn criterion_01_continuous_certificate() {
    suite_start();
    let t0 = Instant::now();
    let mut lines = Vec::new();
    let mut all_negative = true;
    let mut best = None;
    for (order, variant) in variant_grid() {
        let s = case_with_order(3, order);
        let c = certify_ct(&s.spec, &s.params, &s.plant, variant).unwrap();
        all_negative &= c.lambda_max_star < 0.0;
        lines.push(format!(
            "{order:?}/{:?}/{:?}: δ*={:.4} λ*={:.4}",
            variant.objective_block, variant.input_map, c.delta_star, c.lambda_max_star
        ));
        if order == WeightOrder::Physical && variant == BEST_MATCH {
            best = Some(c);
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let best = best.unwrap();
    let close = rel_err(best.delta_star, 0.2850) <= 0.05 && rel_err(best.lambda_max_star, -0.0870) <= 0.05;
    let pass = close && all_negative && elapsed < 10.0;
    report(
        1,
        pass,
        &format!(
            "best match δ*={:.4} λ*={:.4} (want 0.2850/-0.0870 ±5%), all λ*<0: {all_negative}, {elapsed:.2}s; {}",
            best.delta_star,
            best.lambda_max_star,
            lines.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_discrete_certificates() {
    suite_start();
    let t0 = Instant::now();
    let mut pattern_ok = true;
    let mut violations = Vec::new();
    for c in 1..=5 {
        for (order, variant) in variant_grid() {
            let s = case_with_order(c, order);
            let cert = certify_dt(&s.spec, &s.params, &s.plant_dt, variant).unwrap();
            if cert.feasible != (c != 4) {
                pattern_ok = false;
                violations.push(format!(
                    "case{c} {order:?}/{:?}/{:?} λ*={:.4}",
                    variant.objective_block, variant.input_map, cert.lambda_max_star
                ));
            }
        }
    }
    let best: Vec<_> = (1..=5)
        .map(|c| {
            let s = case(c);
            certify_dt(&s.spec, &s.params, &s.plant_dt, BEST_MATCH).unwrap()
        })
        .collect();
    let elapsed = t0.elapsed().as_secs_f64();
    let targets = [(3, 0.4586, -0.0116), (4, 14.7560, 3.2423), (5, 0.4578, -0.0116)];
    let values_ok = targets
        .iter()
        .all(|(c, d, l)| rel_err(best[c - 1].delta_star, *d) <= 0.10 && rel_err(best[c - 1].lambda_max_star, *l) <= 0.10);
    // n significant figures: relative difference below 5·10⁻ⁿ
    let (c3, c5) = (&best[2], &best[4]);
    let sig3 = rel_err(c5.delta_star, c3.delta_star) < 5e-3 && rel_err(c5.lambda_max_star, c3.lambda_max_star) < 5e-3;
    let pass = pattern_ok && values_ok && sig3 && elapsed < 60.0;
    let values: Vec<String> =
        best.iter().enumerate().map(|(i, b)| format!("case{} {:.4}/{:.4}", i + 1, b.delta_star, b.lambda_max_star)).collect();
    report(
        2,
        pass,
        &format!(
            "best match {}; values ±10%: {values_ok}; case3~case5 3 s.f.: {sig3}; sign pattern under all variants: {pattern_ok} ({} violations: {}); {elapsed:.2}s",
            values.join(", "),
            violations.len(),
            violations.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_lyapunov_monotonicity() {
    suite_start();
    let mut pass = true;
    let mut details = Vec::new();
    for (c, log) in certified_runs() {
        let mut bad = 0;
        for k in 0..log.len() {
            if log.state_norms[k] > 1e-8 && log.delta_v[k].partial_cmp(&0.0) != Some(std::cmp::Ordering::Less) {
                bad += 1;
            }
        }
        let free = log.backtrack_free_fraction();
        let err = log.final_relative_error();
        let ok = log.completed() && bad == 0 && free >= 0.99 && err < 1e-3;
        pass &= ok;
        details.push(format!(
            "case{c}: ΔV≥0 steps {bad}, backtrack-free {:.2}%, final rel err {err:.2e}{}",
            100.0 * free,
            if ok { "" } else { " (fails)" }
        ));
    }
    report(3, pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_04_case4_failure_reproduction() {
    suite_start();
    let s = case(4);
    let cert = harness::certificate_for(&s, ControllerKind::PdgProj).unwrap();
    assert!(!cert.feasible);
    let run = |policy| {
        let mut cfg = SimConfig::from_scenario(&s, ControllerKind::PdgProj);
        cfg.allow_uncertified = true;
        cfg.gamma_policy = policy;
        harness::simulate(&cfg, &s, Some(&cert)).unwrap()
    };
    let fixed = run(GammaPolicy::Fixed(1.0));
    let alg1 = run(GammaPolicy::Backtracking);
    let to_cap = run(GammaPolicy::BacktrackingToCap);
    let diverged_without = matches!(fixed.termination, Termination::Diverged { .. });
    let stable_with = alg1.completed();
    let pass = diverged_without && stable_with;
    report(
        4,
        pass,
        &format!(
            "γ≡1: {:?}; backtracking: {:?}; backtracking continued past its cap: {:?}",
            fixed.termination, alg1.termination, to_cap.termination
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_equilibrium_probe() {
    suite_start();
    let s = case(3);
    let pdg = Pdg::new(s.spec.clone(), s.params).unwrap().with_projection(InequalityOn::Projected).unwrap();
    let xr = s.target.x_ref.clone();
    let states: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0],
        numkit::scaled(&xr, -0.05),
        numkit::scaled(&xr, -0.2),
        numkit::scaled(&xr, -0.5),
        numkit::scaled(&xr, -1.0),
        numkit::scaled(&xr, -1.5),
        numkit::scaled(&xr, 0.5),
        vec![-40.0, 2.0],
        vec![10.0, -3.0],
        vec![-100.0, 0.0],
    ];
    let mut pass = true;
    let mut active = 0;
    let mut worst_g = f64::NEG_INFINITY;
    let mut worst_h = 0.0f64;
    for x in &states {
        match pdg.equilibrium_probe(x, 1e-13, 5_000_000) {
            Ok(eq) => {
                let g = pdg.ineq(&eq.w, x).into_iter().fold(f64::NEG_INFINITY, f64::max);
                let h = pdg.stationarity(&eq, x);
                if g > -1e-6 {
                    active += 1;
                }
                worst_g = worst_g.max(g);
                worst_h = worst_h.max(h);
                pass &= g <= 1e-6 && h <= 1e-6;
            }
            Err(e) => {
                pass = false;
                let _ = writeln!(std::io::stderr(), "probe at {x:?}: {e}");
            }
        }
    }
    pass &= active > 0;
    report(
        5,
        pass,
        &format!("10 frozen states, {active} with an active bound; max g = {worst_g:.2e}, max ‖h − αλ‖ = {worst_h:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_projection_exactness() {
    suite_start();
    let mut worst = 0.0f64;
    for (_, log) in certified_runs() {
        worst = log.equality_residuals.iter().fold(worst, |a, v| a.max(*v));
    }
    let s = case(3);
    let p = s.spec.projection().unwrap();
    let ck = s.spec.c.mul(&p.k).max_abs();
    let mut cl = s.spec.c.mul(&p.l);
    cl.add_scaled(1.0, &s.spec.d);
    let cl = cl.max_abs();
    let pass = worst <= 1e-9 && ck <= 1e-9 && cl <= 1e-9;
    report(6, pass, &format!("max ‖h(w_proj; x)‖ over cases 1,2,3,5 = {worst:.2e}; max|CK| = {ck:.2e}; max|CL + D| = {cl:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_07_comparison_orderings() {
    suite_start();
    let s = case(5);
    let (rep, _) = harness::compare(&s).unwrap();
    let oracle = rep.row(ControllerKind::MpcOracle);
    let pdg = rep.row(ControllerKind::Pdg);
    let proj = rep.row(ControllerKind::PdgProj);
    let oracle_ones = oracle.normalized.actual_obj == 1.0 && oracle.normalized.horizon_obj == 1.0;
    let proj_better = proj.raw.actual_obj <= pdg.raw.actual_obj;
    let con_gap = pdg.raw.horizon_con >= 10.0 * proj.raw.horizon_con;
    let oracle_con = oracle.raw.actual_con <= 1e-8;
    let pass = oracle_ones && proj_better && con_gap && oracle_con;
    report(
        7,
        pass,
        &format!(
            "oracle objective columns = 1: {oracle_ones}; pdg_proj actual_obj ≤ pdg: {proj_better} ({:.4} vs {:.4} normalized); pdg horizon_con / pdg_proj = {:.1} (≥10: {con_gap}); oracle actual_con = {:.1e}",
            proj.normalized.actual_obj,
            pdg.normalized.actual_obj,
            pdg.normalized.horizon_con,
            oracle.raw.actual_con
        ),
    );
    let _ = writeln!(std::io::stderr(), "{}", rep.to_table());
    assert!(pass);
}

fn full_problem(spec: &OcpSpec, x: &[f64]) -> QpProblem {
    let nw = spec.nw();
    let mut beq = spec.d.matvec(x);
    beq.iter_mut().for_each(|v| *v = -*v);
    let bin: Vec<f64> = spec.g0.iter().map(|v| -v).collect();
    QpProblem::new(spec.p().clone(), vec![0.0; nw])
        .with_equalities(spec.c.clone(), beq)
        .with_inequalities(spec.g.clone(), bin)
}

#[test]
fn criterion_08_oracle_equivalence() {
    suite_start();
    let mut r = rng(8);
    let mut worst_box = 0.0f64;
    for _ in 0..100 {
        let n = r.gen_range(1..=4);
        let h = random_spd(&mut r, n);
        let q = random_vec(&mut r, n, 3.0);
        let lo = random_vec(&mut r, n, 1.0).into_iter().map(|v| v - 1.0).collect::<Vec<_>>();
        let hi = lo.iter().map(|l| l + r.gen_range(0.1..2.0)).collect::<Vec<_>>();
        let sol = solve_qp(&box_problem(&h, &q, &lo, &hi), 1e-10).unwrap();
        let bf = brute_force_box(&h, &q, &lo, &hi);
        worst_box = worst_box.max(numkit::norm(&numkit::sub(&sol.u_seq, &bf)));
    }
    let mut worst_full = 0.0f64;
    let model = discretize(&pdgmpc::model::dc_motor(), 0.1).unwrap();
    for horizon in 1..=3 {
        for upper in [1.0, 26.6] {
            let o = build_objective(1.0, 0.1, 2, 1, horizon, WeightOrder::Physical, ObjectiveForm::WeightedNorm).unwrap();
            let spec = OcpSpec::assemble(&model, horizon, o, &[upper]).unwrap();
            let qp = spec.condense().unwrap();
            for _ in 0..5 {
                let x = random_vec(&mut r, 2, 60.0);
                let cond = qp_solve(&qp, &x, 1e-12).unwrap();
                let full = solve_qp(&full_problem(&spec, &x), 1e-12).unwrap();
                let w = qp.full_vector(&cond.u_seq, &x);
                worst_full = worst_full.max(numkit::norm(&numkit::sub(&w, &full.u_seq)));
            }
        }
    }
    let pass = worst_box <= 1e-4 && worst_full <= 1e-7;
    report(
        8,
        pass,
        &format!("100 random box QPs vs 3ⁿ enumeration: max err {worst_box:.2e}; condensed vs full (N ≤ 3, 30 instances): max err {worst_full:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_consistency_suite() {
    suite_start();
    let s = case(3);
    let mut r = rng(9);
    let mut lines = Vec::new();

    // Euler consistency of the sampled controller against the continuous field
    let pdg = Pdg::new(s.spec.clone(), s.params).unwrap();
    // μ large enough that no multiplier lands on zero within the step (η̄ = 1)
    let mut euler = 0.0f64;
    for _ in 0..10 {
        let st = PdgState {
            w: random_vec(&mut r, s.spec.nw(), 20.0),
            mu: (0..s.spec.n_mu()).map(|_| r.gen_range(10.0..20.0)).collect(),
            lambda: random_vec(&mut r, s.spec.n_lambda(), 5.0),
        };
        let x = random_vec(&mut r, 2, 20.0);
        let f = pdg.cont_field(&st, &x);
        let d = pdg.candidate(&st, &x, 1.0).unwrap();
        for (a, b) in [(&f.w, &d.w), (&f.mu, &d.mu), (&f.lambda, &d.lambda)] {
            let want = numkit::scaled(a, s.params.dt);
            let scale = numkit::norm(&want);
            if scale > 0.0 {
                euler = euler.max(numkit::norm(&numkit::sub(&want, b)) / scale);
            }
        }
    }
    let euler_ok = euler <= 1e-12;
    lines.push(format!("Euler rel err {euler:.1e}"));

    // sampled plant supply tends to the continuous one
    let tiny = 1e-9;
    let (hpd, _) = plant_supply_dt(&discretize(&s.plant, tiny).unwrap()).unwrap();
    let hpc = plant_supply_ct(&s.plant).unwrap();
    let supply_gap = hpd.sub(&hpc).max_abs();
    let supply_ok = supply_gap <= 1e-4;
    lines.push(format!("‖H_P_d − H_P_c‖max at Δt=1e-9: {supply_gap:.1e}"));

    // λ*_max limit
    let params = PdgParams::new(s.params.alpha, s.params.beta, 1.0, tiny).unwrap();
    let plant_tiny = discretize(&s.plant, tiny).unwrap();
    let dt_cert = certify_dt(&s.spec, &params, &plant_tiny, BEST_MATCH).unwrap();
    let ct_cert = certify_ct(&s.spec, &params, &s.plant, BEST_MATCH).unwrap();
    let (_, aug_lambda, _) = pencil_ct_augmented(&s.spec, &params, &s.plant, BEST_MATCH).unwrap().minimize().unwrap();
    let limit_gap = (dt_cert.lambda_max_star - ct_cert.lambda_max_star).abs();
    let limit_ok = limit_gap <= 1e-4;
    lines.push(format!(
        "λ*(dt, Δt=1e-9, ζ=1) = {:.4} vs λ*(H_c) = {:.4} (gap {limit_gap:.1e}); vs min λ_max(H̄_c) = {aug_lambda:.4} (gap {:.1e})",
        dt_cert.lambda_max_star,
        ct_cert.lambda_max_star,
        (dt_cert.lambda_max_star - aug_lambda).abs()
    ));

    // Schur sign equivalence of H_c and H̄_c
    let pc = pencil_ct(&s.spec, &s.params, &s.plant, BEST_MATCH).unwrap();
    let pa = pencil_ct_augmented(&s.spec, &s.params, &s.plant, BEST_MATCH).unwrap();
    let mut schur_ok = true;
    let mut neg = 0;
    for _ in 0..20 {
        let delta = 10f64.powf(r.gen_range(-3.0..3.0));
        let a = pc.lambda_max(delta).unwrap();
        let b = pa.lambda_max(delta).unwrap();
        schur_ok &= (a < 0.0) == (b < 0.0);
        neg += (a < 0.0) as usize;
    }
    lines.push(format!("Schur signs agree on 20 δ: {schur_ok} ({neg} negative)"));

    // smoothness bound on random z
    let mut lemma3_ok = true;
    let nz = s.spec.nw() + s.spec.n + s.spec.n_lambda();
    for bound in [SmoothnessBound::Quadratic, SmoothnessBound::Generic] {
        let (x_mat, pbar, _) = smoothness_matrices(&s.spec, &s.params, bound).unwrap();
        for _ in 0..200 {
            let z = random_vec(&mut r, nz, 10.0);
            let mut lhs = s.spec.grad_f(&z[..s.spec.nw()]);
            x_mat.matvec_acc(1.0, &z, &mut lhs);
            let l = numkit::norm_sq(&lhs);
            let rhs = pbar.quad_form(&z);
            lemma3_ok &= l <= rhs + 1e-9 * rhs.abs().max(1.0);
        }
    }
    lines.push(format!("‖∇f + Xz‖² ≤ zᵀP̄z on 200 z (both bounds): {lemma3_ok}"));

    // μ ≥ 0 along trajectories
    let mu_ok = certified_runs().iter().all(|(_, log)| log.mu_min.iter().all(|m| *m >= 0.0));
    lines.push(format!("μ ≥ 0 along all runs: {mu_ok}"));

    let pass = euler_ok && supply_ok && limit_ok && schur_ok && lemma3_ok && mu_ok;
    report(9, pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_10_timing() {
    suite_start();
    let s: Scenario = case(3);
    let rep = harness::bench(&s, &[ControllerKind::PdgProj, ControllerKind::MpcOracle], 10).unwrap();
    let pdg = rep.row(ControllerKind::PdgProj).unwrap();
    let qp = rep.row(ControllerKind::MpcOracle).unwrap();
    let faster = pdg.mean_step_time < qp.mean_step_time;
    let one_iter = pdg.max_iter == 1 && pdg.mean_iter == 1.0;
    let elapsed = suite_start().elapsed().as_secs_f64();
    let pass = faster && one_iter && elapsed < 600.0;
    report(
        10,
        pass,
        &format!(
            "pdg_proj mean step {:.2e}s vs QP oracle {:.2e}s; pdg iterations max {} mean {:.2}; suite time so far {elapsed:.1}s",
            pdg.mean_step_time, qp.mean_step_time, pdg.max_iter, pdg.mean_iter
        ),
    );
    assert!(pass);
}

#[test]
fn projected_input_map_is_the_default_controller() {
    // the certificate used by criteria 3 and 6 belongs to the projected controller
    assert_eq!(ControllerKind::PdgProj.input_map(), InputMap::Projected);
}
