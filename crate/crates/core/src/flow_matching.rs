//! Conditional flow matching on a linear probability path, small enough to
//! check against closed-form answers.
//!
//! Data sits at `t = 0` and noise at `t = 1`:
//! `x_t = (1 - t) x0 + t x1` with target velocity `v_t = x1 - x0`.
//! The velocity model is affine in `concat(x_t, t, c_text, c_cond)`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlowError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("t = {0} is outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("learning rate {0} must be finite and non-negative")]
    InvalidLearningRate(f64),
    #[error("diverged at step {step}: loss {loss:e}")]
    Diverged { step: usize, loss: f64 },
}

/// Sizes of the data, text-embedding and conditioning vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowDims {
    pub data: usize,
    pub text: usize,
    pub cond: usize,
}

impl Default for FlowDims {
    fn default() -> Self {
        Self {
            data: 2,
            text: 4,
            cond: 4,
        }
    }
}

impl FlowDims {
    /// Length of the model input `concat(x_t, t, c_text, c_cond)`.
    pub fn input(&self) -> usize {
        self.data + 1 + self.text + self.cond
    }

    /// Column range of the conditioning block inside `W`.
    pub fn cond_columns(&self) -> std::ops::Range<usize> {
        let start = self.data + 1 + self.text;
        start..start + self.cond
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub x0: DVector<f64>,
    pub x1: DVector<f64>,
    pub t: f64,
    pub c_text: DVector<f64>,
    pub c_cond: DVector<f64>,
}

impl FlowSample {
    pub fn dims(&self) -> FlowDims {
        FlowDims {
            data: self.x0.len(),
            text: self.c_text.len(),
            cond: self.c_cond.len(),
        }
    }

    fn check(&self, dims: FlowDims) -> Result<(), FlowError> {
        let pairs = [
            ("x0", dims.data, self.x0.len()),
            ("x1", dims.data, self.x1.len()),
            ("c_text", dims.text, self.c_text.len()),
            ("c_cond", dims.cond, self.c_cond.len()),
        ];
        for (what, expected, got) in pairs {
            if expected != got {
                return Err(FlowError::DimensionMismatch { what, expected, got });
            }
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(FlowError::TimeOutOfRange(self.t));
        }
        Ok(())
    }
}

pub fn interpolate(s: &FlowSample) -> Result<DVector<f64>, FlowError> {
    s.check(s.dims())?;
    Ok(&s.x0 * (1.0 - s.t) + &s.x1 * s.t)
}

pub fn target_velocity(s: &FlowSample) -> Result<DVector<f64>, FlowError> {
    s.check(s.dims())?;
    Ok(&s.x1 - &s.x0)
}

/// `v_theta(z) = W z + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearVelocityModel {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl LinearVelocityModel {
    pub fn zeros(dims: FlowDims) -> Self {
        Self {
            weight: DMatrix::zeros(dims.data, dims.input()),
            bias: DVector::zeros(dims.data),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, dims: FlowDims, scale: f64) -> Self {
        Self {
            weight: DMatrix::from_fn(dims.data, dims.input(), |_, _| {
                let x: f64 = StandardNormal.sample(&mut *rng);
                scale * x
            }),
            bias: normal_vector(rng, dims.data) * scale,
        }
    }

    pub fn dims(&self, sample: &FlowSample) -> FlowDims {
        FlowDims {
            data: self.weight.nrows(),
            ..sample.dims()
        }
    }

    pub fn predict(&self, x_t: &DVector<f64>, t: f64, c_text: &DVector<f64>, c_cond: &DVector<f64>) -> DVector<f64> {
        &self.weight * model_input(x_t, t, c_text, c_cond) + &self.bias
    }
}

fn normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(&mut *rng))
}

pub fn model_input(x_t: &DVector<f64>, t: f64, c_text: &DVector<f64>, c_cond: &DVector<f64>) -> DVector<f64> {
    let mut z = Vec::with_capacity(x_t.len() + 1 + c_text.len() + c_cond.len());
    z.extend(x_t.iter());
    z.push(t);
    z.extend(c_text.iter());
    z.extend(c_cond.iter());
    DVector::from_vec(z)
}

/// Model input and residual `v_theta - v_t` for one sample.
fn residual(model: &LinearVelocityModel, s: &FlowSample) -> Result<(DVector<f64>, DVector<f64>), FlowError> {
    let dims = model.dims(s);
    s.check(dims)?;
    if model.weight.ncols() != dims.input() {
        return Err(FlowError::DimensionMismatch {
            what: "model input",
            expected: model.weight.ncols(),
            got: dims.input(),
        });
    }
    let z = model_input(&interpolate(s)?, s.t, &s.c_text, &s.c_cond);
    let r = &model.weight * &z + &model.bias - target_velocity(s)?;
    Ok((z, r))
}

/// Mean squared velocity error over the batch.
pub fn fm_loss(model: &LinearVelocityModel, batch: &[FlowSample]) -> Result<f64, FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let mut sum = 0.0;
    for s in batch {
        sum += residual(model, s)?.1.norm_squared();
    }
    Ok(sum / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// `dL/dW = 2/N sum r z^T`, `dL/db = 2/N sum r`.
pub fn fm_loss_gradient(model: &LinearVelocityModel, batch: &[FlowSample]) -> Result<Gradient, FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let mut gw = DMatrix::zeros(model.weight.nrows(), model.weight.ncols());
    let mut gb = DVector::zeros(model.bias.len());
    for s in batch {
        let (z, r) = residual(model, s)?;
        gw += &r * z.transpose();
        gb += &r;
    }
    let k = 2.0 / batch.len() as f64;
    Ok(Gradient {
        weight: gw * k,
        bias: gb * k,
    })
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: LinearVelocityModel,
    /// Loss before each step, followed by the final loss.
    pub losses: Vec<f64>,
}

const DIVERGENCE_LOSS: f64 = 1e12;

/// Full-batch gradient descent.
pub fn fit(
    model: &LinearVelocityModel,
    dataset: &[FlowSample],
    steps: usize,
    lr: f64,
) -> Result<FitResult, FlowError> {
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(FlowError::InvalidLearningRate(lr));
    }
    let mut model = model.clone();
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let loss = fm_loss(&model, dataset)?;
        if !(loss <= DIVERGENCE_LOSS) {
            return Err(FlowError::Diverged { step, loss });
        }
        losses.push(loss);
        if step == steps {
            break;
        }
        let g = fm_loss_gradient(&model, dataset)?;
        model.weight -= g.weight * lr;
        model.bias -= g.bias * lr;
    }
    Ok(FitResult { model, losses })
}

/// Samples whose target velocity is exactly `planted` evaluated on the path.
///
/// `x0`, `t`, `c_text` and `c_cond` are drawn at random, then `x1` is chosen
/// so that `x1 - x0 = W z(x_t) + b`. Since `x_t = x0 + t v`, this is the
/// linear system `(I - t W_x) v = W_x x0 + w_t t + W_c c + b`.
pub fn planted_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    planted: &LinearVelocityModel,
    dims: FlowDims,
    n: usize,
) -> Vec<FlowSample> {
    let wx = planted.weight.columns(0, dims.data).into_owned();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x0 = normal_vector(rng, dims.data);
        let c_text = normal_vector(rng, dims.text);
        let c_cond = normal_vector(rng, dims.cond);
        let t: f64 = rng.random_range(0.0..=1.0);
        let rhs = planted.predict(&x0, t, &c_text, &c_cond);
        let a = DMatrix::identity(dims.data, dims.data) - &wx * t;
        let Some(v) = a.lu().solve(&rhs) else {
            continue;
        };
        out.push(FlowSample {
            x1: &x0 + v,
            x0,
            t,
            c_text,
            c_cond,
        });
    }
    out
}

/// Writes `step,loss` rows.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "step,loss")?;
    for (step, loss) in losses.iter().enumerate() {
        writeln!(out, "{step},{loss:e}")?;
    }
    out.flush()
}
