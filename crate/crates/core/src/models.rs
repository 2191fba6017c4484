//! Regression models: squared-error, logistic, and Huber loss.
//!
//! Each model defines a per-sample loss `f(x, y, θ)` and its gradient in θ.
//! Shard-level operations return sample averages, so a worker's report is
//! `g_j = (1/n) Σ_i ∇f(x_i, y_i, θ)`. [`local_erm`] minimizes the average
//! loss on one shard; [`surrogate_minimize`] minimizes the average loss
//! tilted by a linear term, the update step of the iterated distributed
//! learner.

use crate::numerics::{dot, linf_norm, Matrix, NumericsError};

/// Default Huber threshold.
pub const DEFAULT_HUBER_DELTA: f64 = 1.345;

/// Ridge added to the Huber Newton system, whose Hessian loses rank when
/// every residual is clipped.
const HUBER_RIDGE: f64 = 1e-10;

/// Gradient sup-norm at which the iterative solvers declare convergence.
const NEWTON_TOL: f64 = 1e-8;

const NEWTON_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("shard has {rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("shard is unlabeled; model evaluation requires labels")]
    MissingLabels,
    #[error("logistic labels must be 0 or 1, found {value} at row {row}")]
    NonBinaryLabel { value: f64, row: usize },
    #[error("huber threshold must be positive and finite, got {0}")]
    InvalidHuberDelta(f64),
    #[error("theta has dimension {got}, expected {expected}")]
    ThetaDimension { got: usize, expected: usize },
    #[error(
        "solver did not converge after {iters} iterations (gradient sup-norm {grad_norm:.3e})"
    )]
    NoConvergence {
        iters: usize,
        grad_norm: f64,
        /// Last iterate, for diagnostics.
        iterate: Vec<f64>,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Logistic,
    Huber,
}

/// A model family instantiated at a fixed covariate dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub p: usize,
    /// Threshold for the Huber loss; ignored by the other kinds.
    pub huber_delta: f64,
}

impl ModelSpec {
    pub fn linear(p: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Linear,
            p,
            huber_delta: DEFAULT_HUBER_DELTA,
        }
    }

    pub fn logistic(p: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Logistic,
            p,
            huber_delta: DEFAULT_HUBER_DELTA,
        }
    }

    pub fn huber(p: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Huber,
            p,
            huber_delta: DEFAULT_HUBER_DELTA,
        }
    }

    pub fn huber_with_delta(p: usize, delta: f64) -> Result<Self, ModelError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ModelError::InvalidHuberDelta(delta));
        }
        Ok(ModelSpec {
            kind: ModelKind::Huber,
            p,
            huber_delta: delta,
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::Huber => "huber",
        }
    }
}

/// One machine's data: covariate rows and (for regression) labels.
#[derive(Debug, Clone)]
pub struct DataShard {
    x: Matrix,
    y: Vec<f64>,
}

impl DataShard {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self, ModelError> {
        if y.len() != x.rows() {
            return Err(ModelError::LabelMismatch {
                rows: x.rows(),
                labels: y.len(),
            });
        }
        Ok(DataShard { x, y })
    }

    /// A covariate-only shard (distributed mean estimation).
    pub fn unlabeled(x: Matrix) -> Self {
        DataShard { x, y: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Replaces the labels, preserving shape.
    pub fn with_labels(&self, y: Vec<f64>) -> Result<Self, ModelError> {
        DataShard::new(self.x.clone(), y)
    }

    fn require_labels(&self, model: &ModelSpec) -> Result<(), ModelError> {
        if self.y.len() != self.n() {
            return Err(ModelError::MissingLabels);
        }
        if model.kind == ModelKind::Logistic {
            for (row, &v) in self.y.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    return Err(ModelError::NonBinaryLabel { value: v, row });
                }
            }
        }
        Ok(())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<(), ModelError> {
        if theta.len() != self.p() {
            return Err(ModelError::ThetaDimension {
                got: theta.len(),
                expected: self.p(),
            });
        }
        Ok(())
    }
}

/// Numerically stable logistic function exp(u)/(1+exp(u)).
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Stable log(1 + exp(u)).
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn huber_loss(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * (r.abs() - 0.5 * delta)
    }
}

/// Average loss over the shard.
pub fn loss_value(model: &ModelSpec, shard: &DataShard, theta: &[f64]) -> Result<f64, ModelError> {
    shard.require_labels(model)?;
    shard.check_theta(theta)?;
    let n = shard.n() as f64;
    let mut total = 0.0;
    for i in 0..shard.n() {
        let u = dot(shard.x.row(i), theta);
        total += match model.kind {
            ModelKind::Linear => {
                let r = shard.y[i] - u;
                r * r
            }
            ModelKind::Logistic => softplus(u) - shard.y[i] * u,
            ModelKind::Huber => huber_loss(shard.y[i] - u, model.huber_delta),
        };
    }
    Ok(total / n)
}

/// Per-sample loss gradient at row `i`, written into `out`.
fn sample_gradient_into(
    model: &ModelSpec,
    shard: &DataShard,
    theta: &[f64],
    i: usize,
    out: &mut [f64],
) {
    let row = shard.x.row(i);
    let u = dot(row, theta);
    let w = match model.kind {
        ModelKind::Linear => 2.0 * (u - shard.y[i]),
        ModelKind::Logistic => sigmoid(u) - shard.y[i],
        ModelKind::Huber => {
            let r = shard.y[i] - u;
            -r.clamp(-model.huber_delta, model.huber_delta)
        }
    };
    for (o, &x) in out.iter_mut().zip(row) {
        *o = w * x;
    }
}

/// Shard-average gradient `(1/n) Σ_i ∇f(x_i, y_i, θ)`.
pub fn gradient(
    model: &ModelSpec,
    shard: &DataShard,
    theta: &[f64],
) -> Result<Vec<f64>, ModelError> {
    shard.require_labels(model)?;
    shard.check_theta(theta)?;
    let p = shard.p();
    let mut acc = vec![0.0; p];
    let mut buf = vec![0.0; p];
    for i in 0..shard.n() {
        sample_gradient_into(model, shard, theta, i, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let n = shard.n() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}

/// All per-sample gradients, one vector per row (used for the master's
/// per-coordinate scale estimate).
pub fn per_sample_gradients(
    model: &ModelSpec,
    shard: &DataShard,
    theta: &[f64],
) -> Result<Vec<Vec<f64>>, ModelError> {
    shard.require_labels(model)?;
    shard.check_theta(theta)?;
    let p = shard.p();
    let mut out = Vec::with_capacity(shard.n());
    let mut buf = vec![0.0; p];
    for i in 0..shard.n() {
        sample_gradient_into(model, shard, theta, i, &mut buf);
        out.push(buf.clone());
    }
    Ok(out)
}

/// Minimizes the average loss on one shard.
///
/// Linear solves the normal equations exactly; the other kinds run damped
/// Newton from the origin until the gradient sup-norm falls to 1e-8
/// (at most 200 iterations, step halving on objective increase).
pub fn local_erm(model: &ModelSpec, shard: &DataShard) -> Result<Vec<f64>, ModelError> {
    surrogate_minimize(model, shard, &vec![0.0; shard.p()])
}

/// Minimizes `(1/n) Σ_i f(x_i, y_i, θ) - <shift, θ>`.
///
/// At the returned point the shard gradient matches `shift` to within 1e-7
/// in sup-norm. A `shift` of zero recovers [`local_erm`].
pub fn surrogate_minimize(
    model: &ModelSpec,
    shard: &DataShard,
    shift: &[f64],
) -> Result<Vec<f64>, ModelError> {
    shard.require_labels(model)?;
    if shift.len() != shard.p() {
        return Err(ModelError::ThetaDimension {
            got: shift.len(),
            expected: shard.p(),
        });
    }
    match model.kind {
        ModelKind::Linear => linear_surrogate(shard, shift),
        ModelKind::Logistic | ModelKind::Huber => newton_surrogate(model, shard, shift),
    }
}

/// Closed form for the squared-error surrogate:
/// `(2/n) X'X θ = (2/n) X'y + shift`.
fn linear_surrogate(shard: &DataShard, shift: &[f64]) -> Result<Vec<f64>, ModelError> {
    let p = shard.p();
    let n = shard.n() as f64;
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for i in 0..shard.n() {
        let row = shard.x.row(i);
        for a in 0..p {
            for b in a..p {
                gram[(a, b)] += row[a] * row[b];
            }
            rhs[a] += row[a] * shard.y[i];
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = 2.0 * gram[(a, b)] / n;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
        rhs[a] = 2.0 * rhs[a] / n + shift[a];
    }
    gram.solve_spd(&rhs).map_err(ModelError::from)
}

fn surrogate_objective(
    model: &ModelSpec,
    shard: &DataShard,
    shift: &[f64],
    theta: &[f64],
) -> Result<f64, ModelError> {
    Ok(loss_value(model, shard, theta)? - dot(shift, theta))
}

fn newton_surrogate(
    model: &ModelSpec,
    shard: &DataShard,
    shift: &[f64],
) -> Result<Vec<f64>, ModelError> {
    let p = shard.p();
    let mut theta = vec![0.0; p];
    let mut objective = surrogate_objective(model, shard, shift, &theta)?;
    for iter in 0..NEWTON_MAX_ITERS {
        let mut grad = gradient(model, shard, &theta)?;
        for (g, s) in grad.iter_mut().zip(shift) {
            *g -= s;
        }
        if linf_norm(&grad) <= NEWTON_TOL {
            return Ok(theta);
        }
        let hess = hessian(model, shard, &theta);
        let direction = hess.solve_spd(&grad)?;
        // Step halving: Newton directions on these convex objectives always
        // admit a decreasing step; give up the halving after ~2^-40.
        let mut step = 1.0;
        loop {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&direction)
                .map(|(t, d)| t - step * d)
                .collect();
            let cand_obj = surrogate_objective(model, shard, shift, &candidate)?;
            if cand_obj < objective || step < 1e-12 {
                theta = candidate;
                objective = cand_obj;
                break;
            }
            step *= 0.5;
        }
        let _ = iter;
    }
    let mut grad = gradient(model, shard, &theta)?;
    for (g, s) in grad.iter_mut().zip(shift) {
        *g -= s;
    }
    Err(ModelError::NoConvergence {
        iters: NEWTON_MAX_ITERS,
        grad_norm: linf_norm(&grad),
        iterate: theta,
    })
}

/// Average-loss Hessian. Logistic weights are `σ(u)(1-σ(u))`; Huber uses
/// the indicator of unclipped residuals plus a tiny ridge.
fn hessian(model: &ModelSpec, shard: &DataShard, theta: &[f64]) -> Matrix {
    let p = shard.p();
    let n = shard.n() as f64;
    let mut h = Matrix::zeros(p, p);
    for i in 0..shard.n() {
        let row = shard.x.row(i);
        let u = dot(row, theta);
        let w = match model.kind {
            ModelKind::Linear => 2.0,
            ModelKind::Logistic => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            ModelKind::Huber => {
                if (shard.y[i] - u).abs() <= model.huber_delta {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if w == 0.0 {
            continue;
        }
        for a in 0..p {
            for b in a..p {
                h[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = h[(a, b)] / n;
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    if model.kind == ModelKind::Huber {
        for a in 0..p {
            h[(a, a)] += HUBER_RIDGE;
        }
    }
    h
}
