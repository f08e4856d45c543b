//! First-order optimizers operating on flat parameter/gradient slices.
//!
//! RProp is the default for every learned measure; Adam and RMSProp exist for
//! the optimizer comparison. All three are deterministic functions of their
//! state and the gradient sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Rprop,
    Adam,
    Rmsprop,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Rprop => "rprop",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rprop" => Ok(OptimizerKind::Rprop),
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// iRprop- hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpropParams {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_init: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for RpropParams {
    fn default() -> Self {
        Self {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_init: 0.1,
            delta_min: 1e-6,
            delta_max: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmspropParams {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmspropParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer choice plus the hyperparameters of every optimizer, so reports
/// record the full set of defaults whichever one ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub rprop: RpropParams,
    pub adam: AdamParams,
    pub rmsprop: RmspropParams,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Rprop,
            rprop: RpropParams::default(),
            adam: AdamParams::default(),
            rmsprop: RmspropParams::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_kind(kind: OptimizerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rprop;
        if !(r.eta_plus > 1.0 && r.eta_minus > 0.0 && r.eta_minus < 1.0) {
            return Err(Error::Config(
                "rprop needs eta_plus > 1 and 0 < eta_minus < 1".into(),
            ));
        }
        if !(0.0 < r.delta_min && r.delta_min <= r.delta_init && r.delta_init <= r.delta_max) {
            return Err(Error::Config(
                "rprop needs 0 < delta_min <= delta_init <= delta_max".into(),
            ));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2))
        {
            return Err(Error::Config("adam needs lr > 0 and betas in [0, 1)".into()));
        }
        let m = &self.rmsprop;
        if !(m.learning_rate > 0.0 && (0.0..1.0).contains(&m.decay)) {
            return Err(Error::Config("rmsprop needs lr > 0 and decay in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn build<T: Scalar>(&self, n_params: usize) -> Optimizer<T> {
        match self.kind {
            OptimizerKind::Rprop => Optimizer::Rprop(Rprop::new(self.rprop, n_params)),
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(self.adam, n_params)),
            OptimizerKind::Rmsprop => Optimizer::Rmsprop(Rmsprop::new(self.rmsprop, n_params)),
        }
    }
}

fn check_lengths(expected: usize, params: usize, grad: usize) -> Result<()> {
    if params != expected {
        return Err(Error::shape(expected, params, "optimizer parameters"));
    }
    if grad != expected {
        return Err(Error::shape(expected, grad, "optimizer gradient"));
    }
    Ok(())
}

/// iRprop- (Igel & Huesken variant of resilient backpropagation).
///
/// Step sizes grow by `eta_plus` while a gradient keeps its sign and shrink by
/// `eta_minus` on a sign change. After a sign change the stored gradient is
/// zeroed and the parameter is left alone for that step.
#[derive(Debug, Clone)]
pub struct Rprop<T> {
    params: RpropParams,
    step_sizes: Vec<T>,
    previous: Vec<T>,
    iteration: u64,
}

impl<T: Scalar> Rprop<T> {
    pub fn new(params: RpropParams, n_params: usize) -> Self {
        Self {
            params,
            step_sizes: vec![T::cast(params.delta_init); n_params],
            previous: vec![T::zero(); n_params],
            iteration: 0,
        }
    }

    pub fn step_sizes(&self) -> &[T] {
        &self.step_sizes
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        check_lengths(self.step_sizes.len(), params.len(), grad.len())?;
        let eta_plus = T::cast(self.params.eta_plus);
        let eta_minus = T::cast(self.params.eta_minus);
        let delta_min = T::cast(self.params.delta_min);
        let delta_max = T::cast(self.params.delta_max);
        for i in 0..params.len() {
            let g = grad[i];
            let product = self.previous[i] * g;
            if product > T::zero() {
                self.step_sizes[i] = (self.step_sizes[i] * eta_plus).min(delta_max);
            } else if product < T::zero() {
                self.step_sizes[i] = (self.step_sizes[i] * eta_minus).max(delta_min);
                self.previous[i] = T::zero();
                continue;
            }
            if g > T::zero() {
                params[i] -= self.step_sizes[i];
            } else if g < T::zero() {
                params[i] += self.step_sizes[i];
            }
            self.previous[i] = g;
        }
        self.iteration += 1;
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    params: AdamParams,
    first: Vec<T>,
    second: Vec<T>,
    iteration: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: AdamParams, n_params: usize) -> Self {
        Self {
            params,
            first: vec![T::zero(); n_params],
            second: vec![T::zero(); n_params],
            iteration: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        check_lengths(self.first.len(), params.len(), grad.len())?;
        self.iteration += 1;
        let p = &self.params;
        let b1 = T::cast(p.beta1);
        let b2 = T::cast(p.beta2);
        let lr = T::cast(p.learning_rate);
        let eps = T::cast(p.epsilon);
        let t = self.iteration as i32;
        let correction1 = T::one() - b1.powi(t);
        let correction2 = T::one() - b2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.first[i] = b1 * self.first[i] + (T::one() - b1) * g;
            self.second[i] = b2 * self.second[i] + (T::one() - b2) * g * g;
            let m_hat = self.first[i] / correction1;
            let v_hat = self.second[i] / correction2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// RMSProp: `v <- decay v + (1 - decay) g^2`, `p <- p - lr g / (sqrt(v) + eps)`.
#[derive(Debug, Clone)]
pub struct Rmsprop<T> {
    params: RmspropParams,
    mean_square: Vec<T>,
    iteration: u64,
}

impl<T: Scalar> Rmsprop<T> {
    pub fn new(params: RmspropParams, n_params: usize) -> Self {
        Self {
            params,
            mean_square: vec![T::zero(); n_params],
            iteration: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        check_lengths(self.mean_square.len(), params.len(), grad.len())?;
        let decay = T::cast(self.params.decay);
        let lr = T::cast(self.params.learning_rate);
        let eps = T::cast(self.params.epsilon);
        for i in 0..params.len() {
            let g = grad[i];
            self.mean_square[i] = decay * self.mean_square[i] + (T::one() - decay) * g * g;
            params[i] -= lr * g / (self.mean_square[i].sqrt() + eps);
        }
        self.iteration += 1;
        Ok(())
    }
}

/// Optimizer state for one parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer<T> {
    Rprop(Rprop<T>),
    Adam(Adam<T>),
    Rmsprop(Rmsprop<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        match self {
            Optimizer::Rprop(o) => o.step(params, grad),
            Optimizer::Adam(o) => o.step(params, grad),
            Optimizer::Rmsprop(o) => o.step(params, grad),
        }
    }

    pub fn iteration(&self) -> u64 {
        match self {
            Optimizer::Rprop(o) => o.iteration,
            Optimizer::Adam(o) => o.iteration,
            Optimizer::Rmsprop(o) => o.iteration,
        }
    }
}
