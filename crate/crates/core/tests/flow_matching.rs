mod common;

use common::flow::{gradient_check, least_squares_optimum};
use condforge::flow_matching::{fit, fm_loss, fm_loss_gradient, planted_dataset, FlowDims, FlowSample, LinearVelocityModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_batch(rng: &mut ChaCha8Rng, dims: FlowDims, n: usize) -> Vec<FlowSample> {
    let normal = |rng: &mut ChaCha8Rng, len| nalgebra::DVector::from_fn(len, |_, _| StandardNormal.sample(rng));
    (0..n)
        .map(|_| FlowSample {
            x0: normal(rng, dims.data),
            x1: normal(rng, dims.data),
            t: rng.random_range(0.0..=1.0),
            c_text: normal(rng, dims.text),
            c_cond: normal(rng, dims.cond),
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for draw in 0..100 {
        let dims = FlowDims::default();
        let n = rng.random_range(1..=16);
        let batch = random_batch(&mut rng, dims, n);
        let model = LinearVelocityModel::random(&mut rng, dims, 1.0);
        let g = fm_loss_gradient(&model, &batch).unwrap();
        let worst = gradient_check(&model, &batch, (&g.weight, &g.bias));
        assert!(worst <= 1e-5, "draw {draw}: relative error {worst:e}");
    }
}

#[test]
fn fit_reaches_the_least_squares_optimum_on_noise() {
    // unrealizable targets: the optimum is strictly positive
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let dims = FlowDims::default();
    let batch = random_batch(&mut rng, dims, 256);
    let (_, optimum) = least_squares_optimum(&batch);
    let fitted = fit(&LinearVelocityModel::zeros(dims), &batch, 2000, 0.2).unwrap();
    let last = *fitted.losses.last().unwrap();
    assert!(optimum > 0.1);
    assert!(last - optimum <= 1e-6, "excess {:e}", last - optimum);
    assert!(last >= optimum - 1e-12);
}

#[test]
fn fit_recovers_a_planted_velocity_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let dims = FlowDims::default();
    let planted = LinearVelocityModel::random(&mut rng, dims, 0.3);
    let data = planted_dataset(&mut rng, &planted, dims, 256);
    let (oracle, optimum) = least_squares_optimum(&data);
    assert!(optimum < 1e-20);
    assert!((&oracle.weight - &planted.weight).amax() < 1e-8);
    let fitted = fit(&LinearVelocityModel::zeros(dims), &data, 2000, 0.1).unwrap();
    assert!(fm_loss(&fitted.model, &data).unwrap() - optimum <= 1e-6);
    assert!((&fitted.model.weight - &planted.weight).amax() < 1e-3);
}

#[test]
fn conditioning_coupling_shows_up_in_the_fitted_weights() {
    let dims = FlowDims::default();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let base = LinearVelocityModel::random(&mut rng, dims, 0.3);
    let mut coupled = base.clone();
    let mut uncoupled = base.clone();
    for c in dims.cond_columns() {
        coupled.weight[(0, c)] = 0.8;
        coupled.weight[(1, c)] = -0.5;
        uncoupled.weight[(0, c)] = 0.0;
        uncoupled.weight[(1, c)] = 0.0;
    }
    // identical draws for both datasets
    let a = planted_dataset(&mut ChaCha8Rng::seed_from_u64(25), &coupled, dims, 256);
    let b = planted_dataset(&mut ChaCha8Rng::seed_from_u64(25), &uncoupled, dims, 256);
    assert!(a.iter().zip(&b).all(|(p, q)| p.x0 == q.x0 && p.c_cond == q.c_cond && p.t == q.t));
    let fa = fit(&LinearVelocityModel::zeros(dims), &a, 2000, 0.1).unwrap().model;
    let fb = fit(&LinearVelocityModel::zeros(dims), &b, 2000, 0.1).unwrap().model;
    let cols = dims.cond_columns();
    let block = |m: &LinearVelocityModel| m.weight.columns(cols.start, cols.len()).into_owned();
    assert!((block(&fa) - block(&coupled)).amax() < 1e-3);
    assert!(block(&fb).amax() < 1e-3);
    assert!((block(&fa) - block(&fb)).amax() > 0.4);
    // the other blocks agree
    let text_cols = 0..cols.start;
    for c in text_cols {
        assert!((fa.weight.column(c) - fb.weight.column(c)).amax() < 1e-3);
    }
}

