//! Unconstrained sum-node parameters.
//!
//! Each sum node views a block of logits; its weights are the normalized
//! exponentials of that block, which keeps them strictly positive and
//! summing to one. Blocks may be shared by many sum nodes.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{BlockId, Network};
use crate::math;
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    logits: Vec<f64>,
}

impl ParamVector {
    pub fn new(logits: Vec<f64>) -> Self {
        ParamVector { logits }
    }

    /// Logits drawn i.i.d. uniform in `[-0.1, 0.1]`. Frozen blocks keep
    /// the values in `base`.
    pub fn random_init(network: &Network, base: &ParamVector, seed: u64) -> Self {
        Self::random_uniform(network, base, seed, 0.1)
    }

    /// Logits drawn i.i.d. uniform in `[-half_width, half_width]` for every
    /// non-frozen block.
    pub fn random_uniform(network: &Network, base: &ParamVector, seed: u64, half_width: f64) -> Self {
        let mut rng = rng::stream(seed, 0);
        let mut logits = base.logits.clone();
        for spec in network.blocks() {
            if spec.frozen {
                continue;
            }
            for l in &mut logits[spec.offset..spec.offset + spec.len] {
                *l = rng.random_range(-half_width..=half_width);
            }
        }
        ParamVector { logits }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.logits
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.logits
    }

    pub fn check_layout(&self, network: &Network) -> Result<()> {
        if self.logits.len() != network.num_params() {
            return Err(Error::input(format!(
                "{} logits for a network with {} parameters",
                self.logits.len(),
                network.num_params()
            )));
        }
        if let Some(i) = self.logits.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                value: self.logits[i],
            });
        }
        Ok(())
    }

    pub fn block_logits(&self, network: &Network, block: BlockId) -> &[f64] {
        let spec = network.block(block);
        &self.logits[spec.offset..spec.offset + spec.len]
    }

    /// Normalized weights of one block.
    pub fn weights(&self, network: &Network, block: BlockId) -> Vec<f64> {
        let mut out = alloc::vec![0.0; network.block(block).len];
        math::log_softmax_into(self.block_logits(network, block), &mut out);
        out.iter_mut().for_each(|w| *w = math::exp(*w));
        out
    }

    /// Log weights of every block, laid out like the logits.
    pub fn log_weights(&self, network: &Network) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.logits.len()];
        for spec in network.blocks() {
            let r = spec.offset..spec.offset + spec.len;
            math::log_softmax_into(&self.logits[r.clone()], &mut out[r]);
        }
        out
    }

    /// Mask of logits that belong to frozen blocks.
    pub fn frozen_mask(network: &Network) -> Vec<bool> {
        let mut mask = alloc::vec![false; network.num_params()];
        for spec in network.blocks() {
            mask[spec.offset..spec.offset + spec.len].fill(spec.frozen);
        }
        mask
    }
}
