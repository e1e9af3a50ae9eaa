#![allow(dead_code)]

use pdgmpc::baselines::QpProblem;
use pdgmpc::certify::{CertVariant, InputMap, ObjectiveBlock, SmoothnessBound};
use pdgmpc::config::{RunConfig, Scenario};
use pdgmpc::numkit::{solve_linear, Matrix};
use pdgmpc::ocp::WeightOrder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn case(n: usize) -> Scenario {
    Scenario::from_config(&RunConfig::dc_motor_case(n)).unwrap()
}

pub fn case_with_order(n: usize, order: WeightOrder) -> Scenario {
    let mut cfg = RunConfig::dc_motor_case(n);
    cfg.ocp.weight_order = order;
    Scenario::from_config(&cfg).unwrap()
}

pub const BEST_MATCH: CertVariant = CertVariant {
    objective_block: ObjectiveBlock::Hessian,
    smoothness: SmoothnessBound::Quadratic,
    input_map: InputMap::Projected,
};

/// Every combination of objective block, weight order and input map.
pub fn variant_grid() -> Vec<(WeightOrder, CertVariant)> {
    let mut out = Vec::new();
    for order in [WeightOrder::Physical, WeightOrder::Literal] {
        for objective_block in [ObjectiveBlock::Hessian, ObjectiveBlock::Sigma] {
            for input_map in [InputMap::Projected, InputMap::Plain] {
                out.push((order, CertVariant { objective_block, smoothness: SmoothnessBound::Quadratic, input_map }));
            }
        }
    }
    out
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

/// Random symmetric positive definite matrix `MᵀM + εI`.
pub fn random_spd(r: &mut ChaCha8Rng, n: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_vec(r, n, 1.0)).collect();
    let m = Matrix::from_rows(&rows).unwrap();
    let mut h = m.tmul(&m);
    h.add_scaled(0.1, &Matrix::identity(n));
    h
}

/// Box QP `min ½uᵀHu + qᵀu, lo ≤ u ≤ hi` as a [`QpProblem`].
pub fn box_problem(h: &Matrix, q: &[f64], lo: &[f64], hi: &[f64]) -> QpProblem {
    let n = q.len();
    let mut a = Matrix::zeros(2 * n, n);
    let mut b = vec![0.0; 2 * n];
    for i in 0..n {
        a[(i, i)] = 1.0;
        b[i] = hi[i];
        a[(n + i, i)] = -1.0;
        b[n + i] = -lo[i];
    }
    QpProblem::new(h.clone(), q.to_vec()).with_inequalities(a, b)
}

/// Exhaustive search over the `3ⁿ` patterns (at lower bound, free, at upper
/// bound); returns the pattern that satisfies all KKT conditions.
pub fn brute_force_box(h: &Matrix, q: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = q.len();
    let patterns = 3usize.pow(n as u32);
    for code in 0..patterns {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut u = vec![0.0; n];
        for i in 0..n {
            match state[i] {
                0 => u[i] = lo[i],
                2 => u[i] = hi[i],
                _ => {}
            }
        }
        let free: Vec<usize> = (0..n).filter(|i| state[*i] == 1).collect();
        if !free.is_empty() {
            let k = free.len();
            let mut hff = Matrix::zeros(k, k);
            let mut rhs = Matrix::zeros(k, 1);
            for (a, &i) in free.iter().enumerate() {
                let mut r = -q[i];
                for j in 0..n {
                    if state[j] != 1 {
                        r -= h[(i, j)] * u[j];
                    }
                }
                rhs[(a, 0)] = r;
                for (b, &j) in free.iter().enumerate() {
                    hff[(a, b)] = h[(i, j)];
                }
            }
            let sol = solve_linear(&hff, &rhs).unwrap();
            for (a, &i) in free.iter().enumerate() {
                u[i] = sol[(a, 0)];
            }
        }
        let grad: Vec<f64> = (0..n).map(|i| q[i] + (0..n).map(|j| h[(i, j)] * u[j]).sum::<f64>()).collect();
        let ok = (0..n).all(|i| match state[i] {
            0 => grad[i] >= -1e-10,
            2 => grad[i] <= 1e-10,
            _ => u[i] >= lo[i] - 1e-10 && u[i] <= hi[i] + 1e-10,
        });
        if ok {
            return u;
        }
    }
    panic!("no KKT pattern found");
}
