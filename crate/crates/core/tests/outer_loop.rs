mod common;

use hypergrad::hypergrad::{full_rmd, Engine};
use hypergrad::num::{norm, softplus, SeededRng};
use hypergrad::outer::{optimize, run_trials, EngineConfig, OptTrace, Optimizer, OuterConfig, Schedule};
use hypergrad::par::Exec;
use hypergrad::problems::meta_ridge::{make_meta_ridge_from_task, MetaRidgeConfig, TaskDistribution};
use hypergrad::problems::task_interaction::{make_task_interaction, synthetic_task_family};
use hypergrad::problems::toy;
use nalgebra::{DMatrix, DVector};

fn strip_wallclock(t: &OptTrace) -> OptTrace {
    let mut t = t.clone();
    for r in &mut t.records {
        r.wallclock = 0.0;
    }
    t
}

fn toy_full_run() -> OptTrace {
    let p = toy::make_toy();
    let e = EngineConfig { engine: Engine::FullRmd, horizon: 100 };
    let cfg = OuterConfig {
        iters: 400,
        eta0: 0.01,
        schedule: Schedule::DecaySqrt,
        record_full_gradient_every: Some(1),
        lambda0: Some(vec![2.8, -2.8]),
        ..Default::default()
    };
    optimize(&p, &e, &cfg, &SeededRng::new(17)).unwrap()
}

#[test]
fn exact_hypergradient_descent_converges_on_the_toy() {
    let tr = toy_full_run();
    let g = |i: usize| tr.records[i - 1].true_gradient.as_ref().unwrap().norm;
    assert!(g(400) < g(10), "{} vs {}", g(400), g(10));
    for w in tr.records[10..].windows(2) {
        assert!(w[1].upper_value <= w[0].upper_value, "iteration {}", w[1].iter);
    }
}

#[test]
fn replay_reproduces_the_trace() {
    let a = strip_wallclock(&toy_full_run());
    let b = strip_wallclock(&toy_full_run());
    assert_eq!(a, b);
}

#[test]
fn trials_are_independent_of_the_execution_policy() {
    let p = common::meta_ridge_fixture();
    let e = EngineConfig { engine: Engine::KRmd { k: 5 }, horizon: 50 };
    let cfg = OuterConfig { iters: 20, eta0: 0.05, ..Default::default() };
    let seeds = [1, 2, 3, 4];
    let seq: Vec<OptTrace> = run_trials(&p, &e, &cfg, &seeds, Exec::Sequential).into_iter().map(|r| strip_wallclock(&r.unwrap())).collect();
    let par: Vec<OptTrace> = run_trials(&p, &e, &cfg, &seeds, Exec::Parallel).into_iter().map(|r| strip_wallclock(&r.unwrap())).collect();
    assert_eq!(seq, par);
    assert_ne!(seq[0].final_lambda, seq[1].final_lambda);
}

#[test]
fn normalization_only_rescales_eta0() {
    let p = toy::make_toy();
    let e = EngineConfig { engine: Engine::KRmd { k: 3 }, horizon: 100 };
    let base = OuterConfig { iters: 6, eta0: 0.3, lambda0: Some(vec![2.8, -2.8]), ..Default::default() };
    let normed = OuterConfig { normalize_first_update: Some(0.6), ..base.clone() };
    let a = optimize(&p, &e, &base, &SeededRng::new(0)).unwrap();
    let b = optimize(&p, &e, &normed, &SeededRng::new(0)).unwrap();
    for i in 1..6 {
        let ra = a.records[i].step_size / a.records[i - 1].step_size;
        let rb = b.records[i].step_size / b.records[i - 1].step_size;
        assert!((ra - rb).abs() < 1e-14);
    }
}

#[test]
fn coupling_grows_between_related_tasks() {
    // Same class means, few examples per task: pooling the two tasks helps.
    let (t, v) = synthetic_task_family(21, 2, 6, 60, 5, 3, 1.0).unwrap();
    let p = make_task_interaction(t, v).unwrap();
    let e = EngineConfig { engine: Engine::FullRmd, horizon: 100 };
    let cfg = OuterConfig { optimizer: Optimizer::adam(), iters: 30, eta0: 0.05, schedule: Schedule::Constant, ..Default::default() };
    let tr = optimize(&p, &e, &cfg, &SeededRng::new(0)).unwrap();
    let c12 = |l: &[f64]| softplus(l[1]) + softplus(l[2]);
    assert!(c12(&tr.final_lambda) > c12(&p.default_lambda), "{:?}", tr.final_lambda);
}

#[test]
fn task_interaction_default_step_is_stable() {
    let p = common::task_interaction_fixture();
    let lam = p.default_lambda.clone();
    let w = vec![0.0; p.state_dim()];
    // Power iteration for the largest Hessian eigenvalue at the initial point.
    let mut v: Vec<f64> = SeededRng::new(1).normal_vec(p.state_dim());
    let mut beta = 0.0;
    for _ in 0..300 {
        let hv = p.lower.hvp(&w, &lam, &v);
        beta = norm(&hv) / norm(&v);
        v = hv.iter().map(|x| x / norm(&hv)).collect();
    }
    let gamma = p.transition.step_size(&lam).unwrap();
    assert!(gamma * beta < 2.0, "γβ = {}", gamma * beta);
    assert!(full_rmd(&p, &lam, 100).is_ok());
}

#[test]
fn learned_centre_approaches_least_squares_solution() {
    let dist = TaskDistribution::new(MetaRidgeConfig { d: 3, n_train: 12, seed: 4, ..Default::default() }).unwrap();
    let mut task = dist.draw(&mut SeededRng::new(8));
    task.x_val = task.x_train.clone();
    task.y_val = task.y_train.clone();
    let (x, y) = (task.x_train.clone(), task.y_train.clone());
    let p = make_meta_ridge_from_task(task, 0.01).unwrap();
    let e = EngineConfig { engine: Engine::FullRmd, horizon: 100 };
    let cfg = OuterConfig {
        optimizer: Optimizer::adam(),
        iters: 400,
        eta0: 0.05,
        schedule: Schedule::Constant,
        lambda0: Some(vec![0.0, 0.0, 0.0, 0.0]),
        ..Default::default()
    };
    let tr = optimize(&p, &e, &cfg, &SeededRng::new(0)).unwrap();

    let xm = DMatrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j));
    let ls = (xm.transpose() * &xm).lu().solve(&(xm.transpose() * DVector::from_vec(y))).unwrap();
    let c = &tr.final_lambda[..3];
    let start = ls.norm();
    let err: f64 = (0..3).map(|i| (c[i] - ls[i]).powi(2)).sum::<f64>().sqrt();
    assert!(err < 1e-3 * start, "distance {err} from {:?}", ls.as_slice());
}
