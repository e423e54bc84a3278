mod common;

use common::{cir_params, one_asset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use volterra_merton::merton::{
    control_fields, expected_variance, g0_curve, indifference_price, strategy_curve, strategy_exponential,
    strategy_log, strategy_power, value_exponential, value_for, value_log, value_power,
};
use volterra_merton::riccati::solve_utility;
use volterra_merton::sim::Strategy;
use volterra_merton::{
    JumpSpec, KernelSpec, ModelParams, RiccatiSolution, TimeGrid, UtilityKind, UtilityProblem,
};

fn with_theta(p: &ModelParams, theta: Vec<f64>) -> ModelParams {
    let mut inp = p.inputs();
    inp.theta = theta;
    ModelParams::new(inp).unwrap()
}

fn zero_solution(grid: TimeGrid, d: usize, u: UtilityProblem) -> RiccatiSolution {
    RiccatiSolution { grid, psi: vec![vec![0.0; d]; grid.steps() + 1], utility: Some(u), forcing: vec![0.0; d], blow_up: None }
}

#[test]
fn g0_examples() {
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let flat = one_asset(KernelSpec::fractional(0.6).unwrap(), 0.01, 0.0, 0.2, 0.4, -0.7, 0.1, 0.0);
    assert!(g0_curve(&flat, &grid).values.iter().all(|v| v[0] == 0.01));
    let p = one_asset(KernelSpec::fractional(0.6).unwrap(), 0.01, 2.0, 0.2, 0.4, -0.7, 0.1, 0.0);
    let g = g0_curve(&p, &grid);
    assert!((g.values[10][0] - (0.01 + 2.0 / common::gamma(1.6))).abs() < 1e-12);
    assert!((g.values[10][0] - 2.24835).abs() < 1e-5);
    let c = cir_params(0.01, 2.0, 0.2, 0.4, -0.7, 0.1, 0.0);
    let g = g0_curve(&c, &grid);
    for k in 0..=10 {
        assert!((g.values[k][0] - (0.01 + 2.0 * grid.t(k))).abs() < 1e-14);
    }
}

#[test]
fn control_field_examples() {
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let p = one_asset(KernelSpec::constant(), 0.04, 1.0, 0.2, 0.4, -0.7, 0.1, 0.0).with_jumps(JumpSpec::gaussian(1, 2.0, 0.1)).unwrap();
    let u = UtilityProblem::exponential(0.2, vec![0.0]).unwrap();
    let zero = zero_solution(grid, 1, u.clone());
    let f = control_fields(&p, &zero, 2, &[0.04]).unwrap();
    assert_eq!(f.lambda, vec![0.0]);
    assert!(f.u.iter().all(|x| *x == 0.0));

    let mut s = zero.clone();
    s.psi[2] = vec![-0.5];
    let f = control_fields(&p, &s, 2, &[0.04]).unwrap();
    assert!((f.lambda[0] + 0.04).abs() < 1e-15);
    assert!(f.u.iter().all(|x| *x <= 0.0));
    let p0 = p.with_jumps(JumpSpec::gaussian(1, 2.0, 0.0)).unwrap();
    assert!(control_fields(&p0, &s, 2, &[0.04]).unwrap().u.iter().all(|x| *x == 0.0));
    assert!(control_fields(&p, &s, 2, &[-0.01]).is_err());
}

#[test]
fn strategy_examples() {
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let p = one_asset(KernelSpec::constant(), 0.04, 1.0, 0.2, 0.4, -0.7, 0.1, 0.0);
    let u = UtilityProblem::exponential(0.2, vec![0.0]).unwrap();
    let zero = zero_solution(grid, 1, u);
    let a = strategy_exponential(&p, &zero, 3, &[0.09]).unwrap();
    assert!((a.alpha[0] - 0.1 * 0.3 / 0.2).abs() < 1e-15);
    assert_eq!(strategy_exponential(&p, &zero, 3, &[0.0]).unwrap().alpha, vec![0.0]);
    assert_eq!(strategy_exponential(&p, &zero, 3, &[0.0]).unwrap().pi, vec![0.0]);

    let up = UtilityProblem::power(0.4, 1).unwrap();
    let zero = zero_solution(grid, 1, up);
    let a = strategy_power(&p, &zero, 3, &[0.09]).unwrap();
    assert!((a.alpha[0] - 0.1 * 0.3 / 0.6).abs() < 1e-15);

    let l = strategy_log(&ModelParams::reference(0.0, 0.0), &[0.01, 0.03]);
    assert!((l.alpha[0] - 0.01).abs() < 1e-15);
    assert!((l.alpha[1] - 0.0173205).abs() < 1e-7);
    let scaled = strategy_log(&ModelParams::reference(0.0, 0.0), &[0.04, 0.12]);
    assert!((scaled.alpha[0] - 2.0 * l.alpha[0]).abs() < 1e-15);
    assert!((scaled.alpha[1] - 2.0 * l.alpha[1]).abs() < 1e-15);
}

#[test]
fn reference_strategy_composition() {
    let p = ModelParams::reference(0.0, 0.0);
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let u = UtilityProblem::exponential(0.2, vec![0.0, 0.0]).unwrap();
    let s = solve_utility(&p, &u, &grid).unwrap();
    let a = strategy_exponential(&p, &s, 0, &[0.01, 0.03]).unwrap();
    let psi_t = s.psi[200][0];
    let expect = 5.0 * (-0.02f64).exp() * (0.1 + 0.2 * (-0.7) * 0.4 * psi_t) * 0.1;
    assert!((a.alpha[0] - expect).abs() < 1e-15);

    let up = UtilityProblem::power(0.5, 2).unwrap();
    let s = solve_utility(&p, &up, &grid).unwrap();
    let a = strategy_power(&p, &s, 0, &[0.01, 0.03]).unwrap();
    let expect = (0.1 + (-0.7) * 0.4 * s.psi[200][0]) * 0.1 / 0.5;
    assert!((a.alpha[0] - expect).abs() < 1e-15);
}

#[test]
fn power_strategy_tends_to_log() {
    let p = one_asset(KernelSpec::fractional(0.7).unwrap(), 0.04, 1.0, 0.3, 0.4, -0.6, 0.1, 0.0);
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let log = strategy_log(&p, &[0.05]).alpha[0];
    let gaps: Vec<f64> = [1e-2, 1e-3]
        .iter()
        .map(|g| {
            let s = solve_utility(&p, &UtilityProblem::power(*g, 1).unwrap(), &grid).unwrap();
            (0..=100).map(|k| (strategy_power(&p, &s, k, &[0.05]).unwrap().alpha[0] - log).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(gaps[1] < 0.15 * gaps[0] && gaps[1] < 2e-3 * log, "{gaps:?}");
}

#[test]
fn value_exponential_examples() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let p = with_theta(&ModelParams::reference(0.0, 0.0), vec![0.0, 0.0]);
    let u = UtilityProblem::exponential(0.2, vec![0.0, 0.0]).unwrap();
    let s = solve_utility(&p, &u, &grid).unwrap();
    let v = value_exponential(&p, &s, 1.0, &grid).unwrap();
    let theta0 = -(-0.2 * 0.02f64.exp()).exp() / 0.2;
    assert!((v.value - theta0).abs() < 1e-15);

    let mut inp = ModelParams::reference(0.0, 0.0).inputs();
    inp.rate = 0.0;
    let p0 = ModelParams::new(inp).unwrap();
    let s = solve_utility(&p0, &UtilityProblem::exponential(0.2, vec![0.0, 0.0]).unwrap(), &grid).unwrap();
    let v = value_exponential(&p0, &s, 0.0, &grid).unwrap();
    assert!((v.value * (-v.y0 * 0.2).exp() + 5.0).abs() < 1e-14);
}

#[test]
fn value_power_examples() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let mut inp = ModelParams::reference(0.0, 0.0).inputs();
    inp.theta = vec![0.0, 0.0];
    inp.rate = 0.0;
    let p = ModelParams::new(inp.clone()).unwrap();
    let u = UtilityProblem::power(0.5, 2).unwrap();
    let s = solve_utility(&p, &u, &grid).unwrap();
    assert!((value_power(&p, &s, 4.0, &grid).unwrap().value - 4.0).abs() < 1e-14);
    inp.rate = 0.02;
    let p = ModelParams::new(inp).unwrap();
    let s = solve_utility(&p, &u, &grid).unwrap();
    let v = value_power(&p, &s, 1.0, &grid).unwrap().value;
    assert!((v - 0.01f64.exp() / 0.5).abs() < 1e-14);
    assert!((v - 2.0201).abs() < 1e-4);
}

#[test]
fn value_power_refuses_after_blow_up() {
    let p = one_asset(KernelSpec::fractional(0.7).unwrap(), 0.02, 1.0, 0.0, 3.0, 0.9, 2.0, 0.0);
    let grid = TimeGrid::new(5.0, 500).unwrap();
    let u = UtilityProblem::power(0.9, 1).unwrap();
    let s = solve_utility(&p, &u, &grid).unwrap();
    let err = value_power(&p, &s, 1.0, &grid).unwrap_err();
    assert!(!err.is_validation());
    assert!(err.to_string().contains("blew up"), "{err}");
}

#[test]
fn value_monotone_in_wealth_and_beats_bond() {
    let p = ModelParams::reference(0.0, 0.0);
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let u = UtilityProblem::exponential(0.2, vec![0.0, 0.0]).unwrap();
    let s = solve_utility(&p, &u, &grid).unwrap();
    let up = UtilityProblem::power(0.3, 2).unwrap();
    let sp = solve_utility(&p, &up, &grid).unwrap();
    let mut last = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for x0 in [0.5, 1.0, 2.0, 5.0] {
        let ve = value_exponential(&p, &s, x0, &grid).unwrap().value;
        let vp = value_power(&p, &sp, x0, &grid).unwrap().value;
        assert!(ve < 0.0 && vp > 0.0);
        assert!(ve > last.0 && vp > last.1);
        last = (ve, vp);
        let bond = -(-0.2 * x0 * 0.02f64.exp()).exp() / 0.2;
        assert!(ve >= bond);
    }
    let l1 = value_log(&p, 1.0, &grid).unwrap().value;
    let l3 = value_log(&p, 3.0, &grid).unwrap().value;
    assert!((l3 - l1 - 3.0f64.ln()).abs() < 1e-14);
}

#[test]
fn expected_variance_examples() {
    let grid = TimeGrid::new(1.0, 400).unwrap();
    let p = ModelParams::reference(0.0, 0.0);
    let ev = expected_variance(&p, &grid).unwrap();
    assert_eq!(ev[0], vec![0.01, 0.03]);

    let mut inp = p.inputs();
    inp.drift = vec![0.0; 4];
    let p0 = ModelParams::new(inp).unwrap();
    let ev = expected_variance(&p0, &grid).unwrap();
    assert_eq!(ev, g0_curve(&p0, &grid).values);

    let (v0, mu, lambda) = (0.04, 0.08, 1.5);
    let c = cir_params(v0, mu, lambda, 0.5, -0.5, 0.2, 0.03);
    let ev = expected_variance(&c, &grid).unwrap();
    let err = (0..=400)
        .map(|k| (ev[k][0] - (mu / lambda + (v0 - mu / lambda) * (-lambda * grid.t(k)).exp())).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-4, "{err}");

    let vl = value_log(&c, 2.0, &grid).unwrap().value;
    let int_mean = mu / lambda + (v0 - mu / lambda) * (1.0 - (-lambda).exp()) / lambda;
    let exact = 2.0f64.ln() + 0.03 + 0.02 * int_mean;
    assert!((vl - exact).abs() < 1e-6);
    let flat = with_theta(&c, vec![0.0]);
    assert!((value_log(&flat, 2.0, &grid).unwrap().value - (2.0f64.ln() + 0.03)).abs() < 1e-15);
}

#[test]
fn indifference_routes() {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let p = ModelParams::reference(0.0, 0.0);
    let u = UtilityProblem::exponential(0.2, vec![0.0, 0.0]).unwrap();
    assert_eq!(indifference_price(&p, &u, 1.0, &grid).unwrap().price, 0.0);

    let u = UtilityProblem::exponential(0.2, vec![0.005, 0.005]).unwrap();
    let r = indifference_price(&p, &u, 1.0, &grid).unwrap();
    assert!(r.price.is_finite() && r.formula_price.is_finite());
    assert!(r.residual.abs() < 1e-12);
    println!("gamma=0.2: price {} formula {} discrepancy {}", r.price, r.formula_price, r.discrepancy);

    let u1 = UtilityProblem::exponential(1.0, vec![0.005, 0.005]).unwrap();
    let r = indifference_price(&p, &u1, 1.0, &grid).unwrap();
    assert!((r.price - r.formula_price).abs() < 1e-13 * r.price.abs().max(1.0), "{r:?}");

    let flat = with_theta(&p, vec![0.0, 0.0]).with_jumps(JumpSpec::none(2)).unwrap();
    let r = indifference_price(&flat, &UtilityProblem::exponential(1.0, vec![0.0, 0.0]).unwrap(), 1.0, &grid);
    assert!(r.is_err() || r.unwrap().price == 0.0);
}

// Drift factors of the candidate value processes, written out independently.
fn drift_exponential(alpha: &[f64], h: &[f64], gamma: f64, disc: f64) -> f64 {
    let aa: f64 = alpha.iter().map(|a| a * a).sum();
    let ah: f64 = alpha.iter().zip(h).map(|(a, b)| a * b).sum();
    let hh: f64 = h.iter().map(|x| x * x).sum();
    gamma * gamma / 2.0 * disc * disc * aa - gamma * disc * ah + hh / 2.0
}

fn drift_power(alpha: &[f64], h: &[f64], gamma: f64) -> f64 {
    let aa: f64 = alpha.iter().map(|a| a * a).sum();
    let ah: f64 = alpha.iter().zip(h).map(|(a, b)| a * b).sum();
    let hh: f64 = h.iter().map(|x| x * x).sum();
    gamma * (gamma - 1.0) / 2.0 * aa + gamma * ah - gamma / (2.0 * (1.0 - gamma)) * hh
}

fn drift_log(alpha: &[f64], lam: &[f64]) -> f64 {
    alpha.iter().zip(lam).map(|(a, l)| a * l - a * a / 2.0 - l * l / 2.0).sum()
}

/// Brute-force optimum over [-2, 2]^2 with step 1e-3.
fn grid_search<F: Fn(&[f64]) -> f64>(f: F, maximize: bool) -> [f64; 2] {
    let mut best = [0.0, 0.0];
    let mut best_v = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for i in 0..=4000 {
        let a0 = -2.0 + 1e-3 * i as f64;
        for j in 0..=4000 {
            let a1 = -2.0 + 1e-3 * j as f64;
            let v = f(&[a0, a1]);
            if (maximize && v > best_v) || (!maximize && v < best_v) {
                best_v = v;
                best = [a0, a1];
            }
        }
    }
    best
}

#[test]
fn closed_form_strategies_optimize_the_drift() {
    let p = ModelParams::reference(0.0, 0.0);
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let ue = UtilityProblem::exponential(0.2, vec![0.005, 0.005]).unwrap();
    let se = solve_utility(&p, &ue, &grid).unwrap();
    let up = UtilityProblem::power(0.5, 2).unwrap();
    let sp = solve_utility(&p, &up, &grid).unwrap();
    let ce = strategy_curve(&p, &ue, Some(&se), &grid).unwrap();
    let cp = strategy_curve(&p, &up, Some(&sp), &grid).unwrap();
    let cl = strategy_curve(&p, &UtilityProblem::log(2), None, &grid).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for _ in 0..10 {
        let k = rng.random_range(0..=100usize);
        let v = [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)];
        let lam: Vec<f64> = (0..2).map(|i| p.theta[i] * f64::sqrt(v[i])).collect();
        let big = |s: &RiccatiSolution, i: usize| p.sigma_v[i] * s.psi[100 - k][i] * f64::sqrt(v[i]);

        let disc = (0.02 * (1.0 - grid.t(k))).exp();
        let he: Vec<f64> = (0..2).map(|i| lam[i] + 0.2 * p.rho[i] * big(&se, i)).collect();
        let best = grid_search(|a| drift_exponential(a, &he, 0.2, disc), false);
        let mut a = [0.0; 2];
        ce.eval(k, &v, &mut a);
        assert!((a[0] - best[0]).abs() <= 1e-3 && (a[1] - best[1]).abs() <= 1e-3, "{a:?} vs {best:?}");
        assert!(drift_exponential(&a, &he, 0.2, disc).abs() < 1e-14);

        let hp: Vec<f64> = (0..2).map(|i| lam[i] + p.rho[i] * big(&sp, i)).collect();
        let best = grid_search(|a| drift_power(a, &hp, 0.5), true);
        cp.eval(k, &v, &mut a);
        assert!((a[0] - best[0]).abs() <= 1e-3 && (a[1] - best[1]).abs() <= 1e-3, "{a:?} vs {best:?}");
        assert!(drift_power(&a, &hp, 0.5).abs() < 1e-14);

        let best = grid_search(|a| drift_log(a, &lam), true);
        cl.eval(k, &v, &mut a);
        assert!((a[0] - best[0]).abs() <= 1e-3 && (a[1] - best[1]).abs() <= 1e-3);
        assert!(drift_log(&a, &lam).abs() < 1e-15);
    }
}

#[test]
fn value_report_json_keys() {
    let p = ModelParams::reference(0.0, 0.0);
    let grid = TimeGrid::new(1.0, 20).unwrap();
    for u in [
        UtilityProblem::exponential(0.2, vec![0.005, 0.005]).unwrap(),
        UtilityProblem::power(0.5, 2).unwrap(),
        UtilityProblem::log(2),
    ] {
        let (r, _) = value_for(&p, &u, 1.0, &grid).unwrap();
        assert!(r.admissible, "{:?}", r.diagnostics);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["utility", "gamma", "zeta", "value", "y0", "t_max", "admissible", "strategy_curve"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["strategy_curve"].as_array().unwrap().len(), 21);
        assert_eq!(json["strategy_curve"][0].as_array().unwrap().len(), 3);
        match u.kind {
            UtilityKind::Exponential => assert!(r.value < 0.0),
            _ => assert!(r.value > 0.0),
        }
    }
}
