//! Independent oracles for the flow-matching objective.

use condforge::flow_matching::{fm_loss, interpolate, model_input, target_velocity, FlowSample, LinearVelocityModel};
use nalgebra::{DMatrix, DVector};

/// Largest relative disagreement between the analytic gradient and central
/// differences, with the denominator floored at 1e-8.
pub fn gradient_check(model: &LinearVelocityModel, batch: &[FlowSample], analytic: (&DMatrix<f64>, &DVector<f64>)) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut compare = |numeric: f64, exact: f64| {
        worst = worst.max((numeric - exact).abs() / exact.abs().max(numeric.abs()).max(1e-8));
    };
    for i in 0..model.weight.nrows() {
        for j in 0..model.weight.ncols() {
            let mut plus = model.clone();
            plus.weight[(i, j)] += h;
            let mut minus = model.clone();
            minus.weight[(i, j)] -= h;
            let fd = (fm_loss(&plus, batch).unwrap() - fm_loss(&minus, batch).unwrap()) / (2.0 * h);
            compare(fd, analytic.0[(i, j)]);
        }
        let mut plus = model.clone();
        plus.bias[i] += h;
        let mut minus = model.clone();
        minus.bias[i] -= h;
        let fd = (fm_loss(&plus, batch).unwrap() - fm_loss(&minus, batch).unwrap()) / (2.0 * h);
        compare(fd, analytic.1[i]);
    }
    worst
}

/// Minimum achievable loss over all affine models, by SVD least squares on
/// the design matrix `[z | 1]`.
pub fn least_squares_optimum(batch: &[FlowSample]) -> (LinearVelocityModel, f64) {
    let n = batch.len();
    let zs: Vec<DVector<f64>> = batch
        .iter()
        .map(|s| model_input(&interpolate(s).unwrap(), s.t, &s.c_text, &s.c_cond))
        .collect();
    let p = zs[0].len();
    let d = batch[0].x0.len();
    let design = DMatrix::from_fn(n, p + 1, |r, c| if c < p { zs[r][c] } else { 1.0 });
    let targets = DMatrix::from_fn(n, d, |r, c| target_velocity(&batch[r]).unwrap()[c]);
    let theta = design.clone().svd(true, true).solve(&targets, 1e-12).unwrap();
    let model = LinearVelocityModel {
        weight: theta.rows(0, p).transpose(),
        bias: theta.row(p).transpose(),
    };
    let residual = &design * &theta - &targets;
    (model, residual.norm_squared() / n as f64)
}
