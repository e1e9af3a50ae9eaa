//! Independent oracles: closed-form ΔV, brute-force QP enumeration,
//! condensed vs full problems and the C/GMRES residual at the optimum.

mod common;

use common::*;
use pdgmpc::baselines::{cgmres_residual, qp_solve, solve_qp, BaselineError, QpProblem};
use pdgmpc::certify::{certify_dt, pencil_dt, CertVariant, InputMap};
use pdgmpc::config::Scenario;
use pdgmpc::numkit::{self, Matrix};
use pdgmpc::pdg::{Pdg, PdgState};
use proptest::prelude::*;
use rand::Rng;

fn plain_variant() -> CertVariant {
    CertVariant { input_map: InputMap::Plain, ..BEST_MATCH }
}

/// Case with a feasible plain-W certificate, so `H̄_d ≺ 0` at δ*.
fn plain_setup(n: usize) -> (Scenario, Pdg, Matrix, f64) {
    let s = case(n);
    let cert = certify_dt(&s.spec, &s.params, &s.plant_dt, plain_variant()).unwrap();
    assert!(cert.feasible);
    let hbar = pencil_dt(&s.spec, &s.params, &s.plant_dt, plain_variant()).unwrap().at(cert.delta_star);
    let pdg = Pdg::new(s.spec.clone(), s.params).unwrap();
    (s, pdg, hbar, cert.delta_star)
}

fn random_state(r: &mut rand_chacha::ChaCha8Rng, s: &Scenario, w_scale: f64, mu_scale: f64) -> PdgState {
    PdgState {
        w: random_vec(r, s.spec.nw(), w_scale),
        mu: (0..s.spec.n_mu()).map(|_| r.gen_range(0.0..mu_scale)).collect(),
        lambda: random_vec(r, s.spec.n_lambda(), 5.0),
    }
}

#[test]
fn delta_v_matches_quadratic_form_without_active_constraints() {
    let (s, pdg, hbar, delta) = plain_setup(2);
    let mut r = rng(11);
    for _ in 0..20 {
        // μ = 0 and inputs far below the bound: the γ terms vanish
        let mut st = random_state(&mut r, &s, 1.0, 1.0);
        st.mu.iter_mut().for_each(|m| *m = 0.0);
        let x = random_vec(&mut r, 2, 1.0);
        let bound = pdg.analytic_gamma(&st, &x, &hbar).unwrap();
        assert_eq!((bound.a, bound.b), (0.0, 0.0));
        let cand = pdg.candidate(&st, &x, 1.0).unwrap();
        let dv = pdg.delta_v(&st, &x, &cand, delta, &s.plant_dt);
        let mut z = st.w.clone();
        z.extend_from_slice(&x);
        z.extend_from_slice(&st.lambda);
        let want = s.params.zeta_dt() * hbar.quad_form(&z);
        assert!((dv - want).abs() <= 1e-9 * want.abs(), "ΔV {dv} vs {want}");
        assert!(dv < 0.0);
    }
}

#[test]
fn delta_v_bounded_by_closed_form_and_negative_below_gamma_bar() {
    let (s, pdg, hbar, delta) = plain_setup(2);
    let mut r = rng(12);
    for _ in 0..50 {
        let st = random_state(&mut r, &s, 40.0, 10.0);
        let x = random_vec(&mut r, 2, 30.0);
        let bound = pdg.analytic_gamma(&st, &x, &hbar).unwrap();
        let mut z = st.w.clone();
        z.extend_from_slice(&x);
        z.extend_from_slice(&st.lambda);
        let base = hbar.quad_form(&z);
        for gamma in [1.0, 0.5, 0.25, 1e-3] {
            let cand = pdg.candidate(&st, &x, gamma).unwrap();
            let dv = pdg.delta_v(&st, &x, &cand, delta, &s.plant_dt);
            let closed = s.params.zeta_dt() * (base + bound.a * gamma * gamma + bound.b * gamma);
            assert!(dv <= closed + 1e-9 * closed.abs().max(1.0), "ΔV {dv} above {closed}");
            if gamma < bound.gamma_bar {
                assert!(dv < 0.0);
            }
        }
    }
}

#[test]
fn analytic_gamma_refuses_projected_inequality() {
    let s = case(3);
    let pdg = Pdg::new(s.spec.clone(), s.params)
        .unwrap()
        .with_projection(pdgmpc::pdg::InequalityOn::Projected)
        .unwrap();
    let n = s.spec.nw() + s.spec.n + s.spec.n_lambda();
    let st = PdgState::zeros(&s.spec);
    assert!(pdg.analytic_gamma(&st, &[1.0, 0.0], &Matrix::identity(n).scale(-1.0)).is_err());
}

#[test]
fn brute_force_three_to_the_fourth() {
    let mut r = rng(21);
    for _ in 0..200 {
        let h = random_spd(&mut r, 4);
        let q = random_vec(&mut r, 4, 4.0);
        let lo = vec![-1.0; 4];
        let hi = vec![1.0; 4];
        let sol = solve_qp(&box_problem(&h, &q, &lo, &hi), 1e-10).unwrap();
        let bf = brute_force_box(&h, &q, &lo, &hi);
        assert!(numkit::norm(&numkit::sub(&sol.u_seq, &bf)) < 1e-8);
        assert!(sol.kkt_residual <= 1e-8);
    }
}

#[test]
fn infeasible_box_is_reported() {
    let h = Matrix::identity(1);
    let p = box_problem(&h, &[0.0], &[1.0], &[0.0]);
    assert!(matches!(solve_qp(&p, 1e-10), Err(BaselineError::Infeasible { .. })));
}

#[test]
fn qp_oracle_matches_rollout_grid_search_for_tiny_horizon() {
    // N = 1, scalar input: scan a fine grid of admissible inputs
    use pdgmpc::model::{dc_motor, discretize};
    use pdgmpc::ocp::{build_objective, ObjectiveForm, OcpSpec, WeightOrder};
    let model = discretize(&dc_motor(), 0.1).unwrap();
    let o = build_objective(1.0, 0.1, 2, 1, 1, WeightOrder::Physical, ObjectiveForm::WeightedNorm).unwrap();
    let spec = OcpSpec::assemble(&model, 1, o, &[5.0]).unwrap();
    let qp = spec.condense().unwrap();
    for x in [[-60.0, -4.0], [10.0, 1.0], [-5.0, 0.5]] {
        let sol = qp_solve(&qp, &x, 1e-12).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=200_000 {
            let u = -100.0 + 105.0 * i as f64 / 200_000.0;
            let v = spec.objective_value(&spec.rollout(&[u], &x));
            if v < best.0 {
                best = (v, u);
            }
        }
        assert!((sol.u_seq[0] - best.1).abs() < 1e-3, "{} vs {}", sol.u_seq[0], best.1);
    }
}

#[test]
fn cgmres_residual_vanishes_at_the_oracle_optimum() {
    let s = case(3);
    let qp = s.spec.condense().unwrap();
    for x in [s.x0_error(), vec![-20.0, -1.0], vec![5.0, 0.2]] {
        let sol = qp_solve(&qp, &x, 1e-12).unwrap();
        let mut omega = sol.u_seq.clone();
        omega.extend_from_slice(&sol.multipliers);
        let f = cgmres_residual(&omega, &x, &qp);
        assert!(numkit::norm(&f) <= 1e-7, "‖F‖ = {:e}", numkit::norm(&f));
    }
}

#[test]
fn full_and_condensed_agree_on_dc_motor_horizon() {
    let s = case(3);
    let qp = s.spec.condense().unwrap();
    let x = s.x0_error();
    let cond = qp_solve(&qp, &x, 1e-12).unwrap();
    let beq: Vec<f64> = s.spec.d.matvec(&x).into_iter().map(|v| -v).collect();
    let bin: Vec<f64> = s.spec.g0.iter().map(|v| -v).collect();
    let full = QpProblem::new(s.spec.p().clone(), vec![0.0; s.spec.nw()])
        .with_equalities(s.spec.c.clone(), beq)
        .with_inequalities(s.spec.g.clone(), bin);
    let full = solve_qp(&full, 1e-12).unwrap();
    let w = qp.full_vector(&cond.u_seq, &x);
    let err = numkit::norm(&numkit::sub(&w, &full.u_seq)) / numkit::norm(&w);
    assert!(err < 1e-7, "relative gap {err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_box_qps_match_enumeration(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let h = random_spd(&mut r, n);
        let q = random_vec(&mut r, n, 5.0);
        let lo: Vec<f64> = random_vec(&mut r, n, 1.0).into_iter().map(|v| v - 1.5).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + r.gen_range(0.05..3.0)).collect();
        let sol = solve_qp(&box_problem(&h, &q, &lo, &hi), 1e-10).unwrap();
        let bf = brute_force_box(&h, &q, &lo, &hi);
        prop_assert!(numkit::norm(&numkit::sub(&sol.u_seq, &bf)) < 1e-4);
    }
}
