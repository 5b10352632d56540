//! 1-D convolutional SPQNs.
//!
//! Layer `d` turns a length-`L` sequence of `C_{d-1}` channels into a
//! length-`L / S_d` sequence of `C_d` channels. The output at position `t`
//! (1-based) and channel `c` is a CMO whose B-part covers the stride window
//! `tS-S+1 ..= tS` and whose A-part covers the conditioning window
//! `tS-R+1 ..= tS-S`, clipped at position 1:
//!
//! ```text
//!              Σ_i Wout[c,i] Π_{j=1..S} In(i,j,tS-j+1) · Π_{j=S+1..R} In(i,j,tS-j+1)
//! O[d,t,c] =  -----------------------------------------------------------------------
//!              Σ_i Wout[c,i] Π_{j=S+1..R} In(i,j,tS-j+1)
//!
//! In(i,j,p) = Σ_k Win[i,j,k] O[d-1,p,k]
//! ```
//!
//! `Win` and `Wout` are shared across positions of a layer. Layer 0 holds
//! `C_0` leaf CMOs per input position, one shared block per channel.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::builders::cmo::{cmo_from_rows, cmo_rows, leaf_cmo_with_block};
use crate::error::{Error, Result};
use crate::graph::{BlockId, NetworkBuilder, NodeId};
use crate::model::Model;
use crate::params::ParamVector;
use crate::validate::CmoAnnotation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub stride: usize,
    pub receptive_field: usize,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvNetSpec {
    pub input_length: usize,
    pub leaf_channels: usize,
    pub layers: Vec<ConvLayerSpec>,
}

impl ConvNetSpec {
    /// Spatial length after each layer. Fails unless every stride divides
    /// its input, `R >= S >= 1`, and the last layer has length 1 and one
    /// channel.
    pub fn output_lengths(&self) -> Result<Vec<usize>> {
        if self.input_length == 0 || self.leaf_channels == 0 || self.layers.is_empty() {
            return Err(Error::input("conv spec needs a positive input length, leaf channels and at least one layer"));
        }
        let mut len = self.input_length;
        let mut out = Vec::with_capacity(self.layers.len());
        for (d, l) in self.layers.iter().enumerate() {
            if l.stride == 0 || l.channels == 0 {
                return Err(Error::input(format!("layer {}: stride and channels must be positive", d + 1)));
            }
            if l.receptive_field < l.stride {
                return Err(Error::input(format!("layer {}: receptive field {} is smaller than stride {}", d + 1, l.receptive_field, l.stride)));
            }
            if !len.is_multiple_of(l.stride) {
                return Err(Error::input(format!("layer {}: input length {len} is not divisible by stride {}", d + 1, l.stride)));
            }
            len /= l.stride;
            out.push(len);
        }
        if len != 1 {
            return Err(Error::input(format!("final spatial length is {len}, expected 1")));
        }
        if self.layers.last().unwrap().channels != 1 {
            return Err(Error::input("the last layer must have a single channel"));
        }
        Ok(out)
    }

    /// The same spec with every receptive field equal to its stride.
    pub fn non_overlapping(&self) -> ConvNetSpec {
        ConvNetSpec {
            layers: self
                .layers
                .iter()
                .map(|l| ConvLayerSpec {
                    receptive_field: l.stride,
                    ..*l
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// Builds the convolutional SPQN with logits drawn uniform in
/// `[-0.1, 0.1]` from `seed`. Returns the CMO annotations of every
/// channel-mixing sum and every layer output.
pub fn build_conv_spqn(spec: &ConvNetSpec, seed: u64) -> Result<Model> {
    spec.output_lengths()?;
    let n = spec.input_length;
    let mut b = NetworkBuilder::new(n);
    let mut cmos = Vec::new();

    let leaf_blocks: Vec<BlockId> = (0..spec.leaf_channels).map(|_| b.block(&[0.0, 0.0], false)).collect();
    let mut prev: Vec<Vec<NodeId>> = (0..n)
        .map(|p| {
            leaf_blocks
                .iter()
                .map(|&blk| leaf_cmo_with_block(&mut b, p, blk))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut prev_channels = spec.leaf_channels;

    for layer in &spec.layers {
        let (s, r, channels) = (layer.stride, layer.receptive_field, layer.channels);
        let out_len = prev.len() / s;
        // Win[i][j] is allocated on first use.
        let mut w_in: BTreeMap<(usize, usize), BlockId> = BTreeMap::new();
        let w_out: Vec<BlockId> = (0..channels).map(|_| b.block(&vec![0.0; channels], false)).collect();
        let mut next = Vec::with_capacity(out_len);
        for t in 1..=out_len {
            let cols = r.min(t * s);
            // inner[i][j-1] = Σ_k Win[i,j,k] O[d-1, tS-j+1, k]
            let mut inner = vec![Vec::with_capacity(cols); channels];
            for (i, row) in inner.iter_mut().enumerate() {
                for j in 1..=cols {
                    let p = t * s - j; // 0-based position tS-j+1
                    let blk = *w_in
                        .entry((i, j))
                        .or_insert_with(|| b.block(&vec![0.0; prev_channels], false));
                    let id = b.sum(prev[p].clone(), blk)?;
                    cmos.push(CmoAnnotation {
                        root: id,
                        a: vec![],
                        b: prev[p].iter().map(|&o| vec![o]).collect(),
                    });
                    row.push(id);
                }
            }
            // Columns in increasing position order.
            let b_cols: Vec<Vec<NodeId>> = inner.iter().map(|row| row[..s].iter().rev().copied().collect()).collect();
            let a_cols: Vec<Vec<NodeId>> = if cols > s {
                inner.iter().map(|row| row[s..].iter().rev().copied().collect()).collect()
            } else {
                vec![]
            };
            let rows = cmo_rows(&mut b, &a_cols, &b_cols)?;
            let mut outputs = Vec::with_capacity(channels);
            for &blk in &w_out {
                let root = cmo_from_rows(&mut b, &rows, blk)?;
                cmos.push(CmoAnnotation {
                    root,
                    a: a_cols.clone(),
                    b: b_cols.clone(),
                });
                outputs.push(root);
            }
            next.push(outputs);
        }
        prev = next;
        prev_channels = channels;
    }

    let root = prev[0][0];
    let (network, zeros) = b.finish(root)?;
    let params = ParamVector::random_init(&network, &zeros, seed);
    Ok(Model::new(network, params).with_cmos(cmos))
}

/// The non-overlapping counterpart of `spec` (every `R_d = S_d`): a plain
/// decomposable and complete SPN without quotient nodes.
pub fn build_baseline_spn(spec: &ConvNetSpec, seed: u64) -> Result<Model> {
    build_conv_spqn(&spec.non_overlapping(), seed)
}
