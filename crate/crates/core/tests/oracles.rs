use mosquito_release::adjoint::{continuous_gradient, discrete_gradient};
use mosquito_release::dynamics::{integrate_states, TimeGrid};
use mosquito_release::equilibria::{sit_equilibria, wol_equilibria, EquilibriumLabel};
use mosquito_release::optimizer::Problem;
use mosquito_release::params::{SitParams, WolParams};
use mosquito_release::{Model, StateVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_admissible(problem: &Problem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = problem.grid.intervals();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * problem.ubar).collect();
    problem.project(&raw).unwrap()
}

fn gradient_error(problem: &Problem, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-4 * problem.ubar;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let u = random_admissible(problem, &mut rng);
        let g = discrete_gradient(problem, &u).unwrap().gradient;
        for _ in 0..10 {
            let k = rng.gen_range(0..u.len());
            let mut up = u.clone();
            let mut dn = u.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (problem.cost_of(&up).unwrap() - problem.cost_of(&dn).unwrap()) / (2.0 * h);
            let err = (fd - g[k]).abs() / g[k].abs().max(f64::MIN_POSITIVE);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn sit_gradient_matches_finite_differences() {
    let grid = TimeGrid::with_default_resolution(7.0).unwrap();
    let problem = Problem::sit(SitParams::default(), grid, 1000.0, 3000.0).unwrap();
    let err = gradient_error(&problem, 11);
    assert!(err < 1e-5, "worst relative error {err:e}");
}

#[test]
fn wolbachia_gradient_matches_finite_differences() {
    let grid = TimeGrid::with_default_resolution(90.0).unwrap();
    let problem = Problem::wolbachia(WolParams::default(), grid, 500.0, 10000.0).unwrap();
    let err = gradient_error(&problem, 12);
    assert!(err < 1e-5, "worst relative error {err:e}");
}

#[test]
fn continuous_adjoint_approaches_discrete_gradient() {
    let gap = |n: usize| {
        let grid = TimeGrid::new(7.0, n).unwrap();
        let problem = Problem::sit(SitParams::default(), grid, 1000.0, 3000.0).unwrap();
        let u: Vec<f64> = (0..n)
            .map(|k| if 2 * k < n { 800.0 } else { 0.0 })
            .collect();
        let d = discrete_gradient(&problem, &u).unwrap().gradient;
        let c = continuous_gradient(&problem, &u).unwrap();
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        d.iter()
            .zip(&c)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale
    };
    let coarse = gap(70);
    let fine = gap(280);
    assert!(fine < coarse / 4.0, "coarse {coarse:e} fine {fine:e}");
    assert!(fine < 1e-4);
}

fn terminal(model: Model, init: StateVec, u: f64, horizon: f64, n: usize) -> StateVec {
    let grid = TimeGrid::new(horizon, n).unwrap();
    let rhs = |x: &StateVec, u: f64| model.rhs(x, u);
    *integrate_states(&rhs, &init, &vec![u; n], &grid)
        .unwrap()
        .last()
        .unwrap()
}

#[test]
fn rk4_converges_with_fourth_order() {
    let p = SitParams::default();
    let model = Model::Sit(p);
    let init = sit_equilibria(&p)[1].state;
    let reference = terminal(model, init, 1500.0, 7.0, 12800);
    let err = |n| terminal(model, init, 1500.0, 7.0, n).max_abs_diff(&reference);
    let orders: Vec<f64> = [20usize, 40, 80]
        .iter()
        .map(|&n| (err(n) / err(2 * n)).log2())
        .collect();
    for order in &orders {
        assert!((3.7..=4.3).contains(order), "orders {orders:?}");
    }
}

#[test]
fn perturbations_of_stable_equilibria_decay() {
    let sit = SitParams::default();
    let wol = WolParams::default();
    let mut cases = vec![(Model::Sit(sit), sit_equilibria(&sit)[1].state)];
    for eq in wol_equilibria(&wol) {
        if matches!(
            eq.label,
            EquilibriumLabel::WolbachiaInvasion | EquilibriumLabel::WolbachiaExtinction
        ) {
            cases.push((Model::Wolbachia(wol), eq.state));
        }
    }
    assert_eq!(cases.len(), 3);
    for (model, eq) in cases {
        let mut start = eq;
        for i in 0..start.dim() {
            start[i] *= 1.02;
        }
        let d0 = start.max_abs_diff(&eq);
        let end = terminal(model, start, 0.0, 400.0, 4000);
        assert!(end.max_abs_diff(&eq) < 0.05 * d0, "{model:?}");
    }
}
