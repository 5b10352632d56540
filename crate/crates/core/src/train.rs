//! Maximum-likelihood learning of the sum weights.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::evidence::Evidence;
use crate::graph::{Network, Node};
use crate::math;
use crate::params::ParamVector;
use crate::rng;

/// Samples per unit of work in the batch reduction. Partial sums are
/// always combined in chunk order, so results do not depend on the
/// number of threads.
const REDUCE_CHUNK: usize = 8;

struct Backward<'a> {
    eval: Evaluator<'a>,
    values: Vec<f64>,
    adjoint: Vec<f64>,
}

impl<'a> Backward<'a> {
    fn new(eval: Evaluator<'a>) -> Self {
        let n = eval.network().len();
        Backward {
            eval,
            values: vec![0.0; n],
            adjoint: vec![0.0; n],
        }
    }

    /// Adds the gradient of `log Ψ_root(sample)` to `grad`; returns the log
    /// value.
    fn accumulate(&mut self, index: usize, sample: &Evidence, grad: &mut [f64]) -> Result<f64> {
        let net = self.eval.network();
        self.eval.check_evidence(sample)?;
        self.eval.eval_into_unchecked(sample, &mut self.values)?;
        let root = net.root();
        let value = self.values[root.index()];
        if value == f64::NEG_INFINITY {
            return Err(Error::ZeroProbability { index });
        }
        self.adjoint.fill(0.0);
        self.adjoint[root.index()] = 1.0;
        let lw = self.eval.log_weights();
        for &id in net.order().iter().rev() {
            let g = self.adjoint[id.index()];
            let v = self.values[id.index()];
            if g == 0.0 || v == f64::NEG_INFINITY {
                continue;
            }
            match net.node(id) {
                Node::Indicator { .. } => {}
                Node::Product { children } => {
                    for c in children {
                        self.adjoint[c.index()] += g;
                    }
                }
                Node::Quotient { numerator, denominator } => {
                    self.adjoint[numerator.index()] += g;
                    self.adjoint[denominator.index()] -= g;
                }
                Node::Sum { children, block } => {
                    let offset = net.block(*block).offset;
                    for (k, c) in children.iter().enumerate() {
                        let r = math::exp(lw[offset + k] + self.values[c.index()] - v);
                        self.adjoint[c.index()] += g * r;
                        grad[offset + k] += g * (r - math::exp(lw[offset + k]));
                    }
                }
            }
        }
        Ok(value)
    }
}

/// Mean log-likelihood of `batch` and its gradient with respect to the
/// logits. A zero-probability sample is an error naming its index.
pub fn grad_mean_log_likelihood(network: &Network, params: &ParamVector, batch: &[Evidence]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::input("empty batch"));
    }
    let eval = Evaluator::new(network, params)?;
    let p = network.num_params();
    let chunk = |(ci, samples): (usize, &[Evidence])| -> Result<(f64, Vec<f64>)> {
        let mut bw = Backward::new(eval.clone());
        let mut grad = vec![0.0; p];
        let mut total = 0.0;
        for (k, s) in samples.iter().enumerate() {
            total += bw.accumulate(ci * REDUCE_CHUNK + k, s, &mut grad)?;
        }
        Ok((total, grad))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<(f64, Vec<f64>)> = {
        use rayon::prelude::*;
        batch.par_chunks(REDUCE_CHUNK).enumerate().map(chunk).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(f64, Vec<f64>)> = batch.chunks(REDUCE_CHUNK).enumerate().map(chunk).collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut grad = vec![0.0; p];
    for (t, g) in parts {
        total += t;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-2,
            beta1: 0.9,
            beta2: 0.9,
            epsilon: 1e-8,
            batch_size: 100,
            epochs: 20,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::input(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::input(format!("beta1 and beta2 must lie in (0, 1), got {} and {}", self.beta1, self.beta2)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::input("epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch size must be positive"));
        }
        Ok(())
    }
}

/// Adam moments. Frozen coordinates are never touched.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
    frozen: Vec<bool>,
}

impl AdamState {
    pub fn new(network: &Network) -> Self {
        let p = network.num_params();
        AdamState {
            m: vec![0.0; p],
            v: vec![0.0; p],
            t: 0,
            frozen: ParamVector::frozen_mask(network),
        }
    }
}

/// One bias-corrected Adam step in the ascent direction.
pub fn adam_step(state: &mut AdamState, params: &mut ParamVector, grad: &[f64], config: &TrainConfig) -> Result<()> {
    let logits = params.as_mut_slice();
    if grad.len() != logits.len() || state.m.len() != logits.len() {
        return Err(Error::input(format!(
            "gradient has {} entries, optimizer state {}, parameters {}",
            grad.len(),
            state.m.len(),
            logits.len()
        )));
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { index, value: grad[index] });
    }
    state.t += 1;
    let c1 = 1.0 - math::powi(config.beta1, state.t as i32);
    let c2 = 1.0 - math::powi(config.beta2, state.t as i32);
    for i in 0..logits.len() {
        if state.frozen[i] {
            continue;
        }
        let g = grad[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        logits[i] += config.learning_rate * m_hat / (math::sqrt(v_hat) + config.epsilon);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_ll: f64,
    pub valid_ll: Option<f64>,
}

/// Mini-batch Adam. Epoch `k` shuffles with random stream `k` of the seed;
/// after each epoch the mean log-likelihood of both sets is recorded.
pub fn train(
    network: &Network,
    params: &ParamVector,
    train_set: &[Evidence],
    valid_set: Option<&[Evidence]>,
    config: &TrainConfig,
) -> Result<(ParamVector, Vec<EpochStats>)> {
    config.check()?;
    params.check_layout(network)?;
    if train_set.is_empty() {
        return Err(Error::input("empty training set"));
    }
    if valid_set.is_some_and(|v| v.is_empty()) {
        return Err(Error::input("empty validation set"));
    }
    let mut params = params.clone();
    let mut state = AdamState::new(network);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng::stream(config.seed, epoch as u64));
        }
        for idx in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| train_set[i].clone()));
            let (_, grad) = grad_mean_log_likelihood(network, &params, &batch).map_err(|e| match e {
                Error::ZeroProbability { index } => Error::ZeroProbability { index: idx[index] },
                other => other,
            })?;
            adam_step(&mut state, &mut params, &grad, config)?;
        }
        let eval = Evaluator::new(network, &params)?;
        history.push(EpochStats {
            epoch: epoch + 1,
            train_ll: eval.mean_log_likelihood(train_set)?,
            valid_ll: valid_set.map(|v| eval.mean_log_likelihood(v)).transpose()?,
        });
    }
    Ok((params, history))
}
