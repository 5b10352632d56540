use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{BlockId, NetworkBuilder, NodeId};
use crate::validate::CmoAnnotation;

/// Leaf CMO `w_0 1[x = 0] + w_1 1[x = 1]` with a fresh logit block.
pub fn build_leaf_cmo(b: &mut NetworkBuilder, var: usize, logits: [f64; 2]) -> Result<NodeId> {
    let block = b.block(&logits, false);
    leaf_cmo_with_block(b, var, block)
}

/// Leaf CMO over the shared indicators of `var`, viewing an existing block.
pub fn leaf_cmo_with_block(b: &mut NetworkBuilder, var: usize, block: BlockId) -> Result<NodeId> {
    let zero = b.shared_indicator(var, false)?;
    let one = b.shared_indicator(var, true)?;
    b.sum(alloc::vec![zero, one], block)
}

/// The per-row products of a CMO, independent of the mixing weights.
///
/// `a_rows[i]` is `Π_j A_ij` (absent when α = 0), `top[i]` is the numerator
/// term `(Π_j A_ij)(Π_j B_ij)`. Single-factor products are elided.
#[derive(Clone, Debug)]
pub struct CmoRows {
    pub a_rows: Vec<Option<NodeId>>,
    pub b_rows: Vec<NodeId>,
    pub top: Vec<NodeId>,
}

pub fn cmo_rows(b: &mut NetworkBuilder, a: &[Vec<NodeId>], bm: &[Vec<NodeId>]) -> Result<CmoRows> {
    let gamma = bm.len();
    if gamma == 0 {
        return Err(Error::input("a CMO needs at least one mixing row"));
    }
    let beta = bm[0].len();
    if beta == 0 {
        return Err(Error::input("a CMO needs β > 0"));
    }
    let alpha = a.first().map_or(0, Vec::len);
    if (!a.is_empty() && a.len() != gamma) || a.iter().any(|r| r.len() != alpha) || bm.iter().any(|r| r.len() != beta) {
        return Err(Error::input("ragged CMO child matrices"));
    }
    let mut rows = CmoRows {
        a_rows: Vec::with_capacity(gamma),
        b_rows: Vec::with_capacity(gamma),
        top: Vec::with_capacity(gamma),
    };
    for i in 0..gamma {
        let b_row = b.product_or_single(bm[i].clone())?;
        let (a_row, top) = if alpha == 0 {
            (None, b_row)
        } else {
            let a_row = b.product_or_single(a[i].clone())?;
            (Some(a_row), b.product(alloc::vec![a_row, b_row])?)
        };
        rows.a_rows.push(a_row);
        rows.b_rows.push(b_row);
        rows.top.push(top);
    }
    Ok(rows)
}

/// Mixes prepared rows with `block`. The denominator sum shares the A-row
/// products with the numerator; with α = 0 the numerator is returned as is.
pub fn cmo_from_rows(b: &mut NetworkBuilder, rows: &CmoRows, block: BlockId) -> Result<NodeId> {
    let numerator = b.sum(rows.top.clone(), block)?;
    match rows.a_rows.iter().copied().collect::<Option<Vec<_>>>() {
        Some(a_rows) if !a_rows.is_empty() => {
            let denominator = b.sum(a_rows, block)?;
            b.quotient(numerator, denominator)
        }
        _ => Ok(numerator),
    }
}

/// A CMO over the child matrices `a` (γ×α) and `bm` (γ×β) with a fresh
/// block of `logits` (length γ).
pub fn build_cmo(b: &mut NetworkBuilder, a: &[Vec<NodeId>], bm: &[Vec<NodeId>], logits: &[f64]) -> Result<(NodeId, CmoAnnotation)> {
    if logits.len() != bm.len() {
        return Err(Error::input("one logit per mixing row is required"));
    }
    if bm.is_empty() {
        return Err(Error::input("a CMO needs at least one mixing row"));
    }
    let block = b.block(logits, false);
    build_cmo_with_block(b, a, bm, block)
}

pub fn build_cmo_with_block(b: &mut NetworkBuilder, a: &[Vec<NodeId>], bm: &[Vec<NodeId>], block: BlockId) -> Result<(NodeId, CmoAnnotation)> {
    let rows = cmo_rows(b, a, bm)?;
    let root = cmo_from_rows(b, &rows, block)?;
    Ok((
        root,
        CmoAnnotation {
            root,
            a: a.to_vec(),
            b: bm.to_vec(),
        },
    ))
}
