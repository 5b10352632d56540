//! A tractable SPQN whose support is exactly the triangle-free graphs on
//! `M` labelled vertices.
//!
//! Variables are the `M(M-1)/2` edge indicators `E_{ij}` (`i < j`, 1-based
//! vertices) in lexicographic order. For every edge `(i2, i3)` with
//! `i2 > 1` a CMO gives the distribution of `E_{i2 i3}` conditioned on the
//! edges `E_{i1 i2}, E_{i1 i3}` (`i1 < i2`) of the triangles in which it is
//! the lexicographically largest edge:
//!
//! ```text
//!   φ1 = Π_{i1} (1[E12=1]1[E13=0] + 1[E12=0]1[E13=1] + 1[E12=0]1[E13=0]) / 3
//!   φ2 = Σ_{i1} 1/(i2-1) · 1[E12=1]1[E13=1] · Π_{i'≠i1} U(E_{i'i2}) U(E_{i'i3})
//!   Φ  = (½ φ1 U(E_{i2i3}) + ½ φ2 1[E_{i2i3}=0]) / (½ φ1 + ½ φ2)
//! ```
//!
//! (edges abbreviated relative to `i1`), where `U` is the uniform leaf.
//! Edges out of vertex 1 are uniform, and the root multiplies all `Φ`.
//! Every weight is fixed and its block frozen.

use alloc::vec;
use alloc::vec::Vec;

use crate::builders::cmo::{cmo_from_rows, cmo_rows};
use crate::error::{Error, Result};
use crate::graph::{BlockId, NetworkBuilder, NodeId};
use crate::model::Model;

/// Variable index of edge `(i, j)`, `1 <= i < j <= m`.
pub fn edge_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(1 <= i && i < j && j <= m);
    // edges (1,2)..(1,m), (2,3)..(2,m), ...
    (i - 1) * m - (i - 1) * i / 2 + (j - i - 1)
}

/// Independent triangle predicate over an edge assignment.
pub fn is_triangle_free(m: usize, edges: &[bool]) -> bool {
    for a in 1..=m {
        for b in a + 1..=m {
            if !edges[edge_index(m, a, b)] {
                continue;
            }
            for c in b + 1..=m {
                if edges[edge_index(m, a, c)] && edges[edge_index(m, b, c)] {
                    return false;
                }
            }
        }
    }
    true
}

struct Builder {
    b: NetworkBuilder,
    m: usize,
    uniform: Vec<Option<NodeId>>,
    frozen: Vec<Option<BlockId>>,
}

impl Builder {
    /// Frozen all-zero block of length `len`, i.e. uniform weights.
    fn uniform_block(&mut self, len: usize) -> BlockId {
        if let Some(b) = self.frozen.get(len).copied().flatten() {
            return b;
        }
        let blk = self.b.block(&vec![0.0; len], true);
        if self.frozen.len() <= len {
            self.frozen.resize(len + 1, None);
        }
        self.frozen[len] = Some(blk);
        blk
    }

    fn uniform_leaf(&mut self, var: usize) -> Result<NodeId> {
        if let Some(id) = self.uniform[var] {
            return Ok(id);
        }
        let zero = self.b.shared_indicator(var, false)?;
        let one = self.b.shared_indicator(var, true)?;
        let blk = self.uniform_block(2);
        let id = self.b.sum(vec![zero, one], blk)?;
        self.uniform[var] = Some(id);
        Ok(id)
    }

    fn ind(&mut self, i: usize, j: usize, value: bool) -> Result<NodeId> {
        let var = edge_index(self.m, i, j);
        self.b.shared_indicator(var, value)
    }

    /// Non-zero iff no `i1 < i2` has both `E_{i1 i2}` and `E_{i1 i3}`.
    fn phi_open(&mut self, i2: usize, i3: usize) -> Result<NodeId> {
        let mut factors = Vec::with_capacity(i2 - 1);
        let third = self.uniform_block(3);
        for i1 in 1..i2 {
            let patterns = [(true, false), (false, true), (false, false)];
            let mut terms = Vec::with_capacity(3);
            for (x, y) in patterns {
                let a = self.ind(i1, i2, x)?;
                let c = self.ind(i1, i3, y)?;
                terms.push(self.b.product(vec![a, c])?);
            }
            factors.push(self.b.sum(terms, third)?);
        }
        self.b.product_or_single(factors)
    }

    /// Non-zero iff some `i1 < i2` has both `E_{i1 i2}` and `E_{i1 i3}`.
    fn phi_closed(&mut self, i2: usize, i3: usize) -> Result<NodeId> {
        let mut terms = Vec::with_capacity(i2 - 1);
        for i1 in 1..i2 {
            let mut factors = vec![self.ind(i1, i2, true)?, self.ind(i1, i3, true)?];
            for other in (1..i2).filter(|&k| k != i1) {
                factors.push(self.uniform_leaf(edge_index(self.m, other, i2))?);
                factors.push(self.uniform_leaf(edge_index(self.m, other, i3))?);
            }
            terms.push(self.b.product(factors)?);
        }
        let blk = self.uniform_block(i2 - 1);
        self.b.sum(terms, blk)
    }
}

/// Builds the triangle-free SPQN for `m >= 2` vertices.
pub fn build_trianglefree_spqn(m: usize) -> Result<Model> {
    if m < 2 {
        return Err(Error::input("the triangle-free construction needs at least two vertices"));
    }
    let n = m * (m - 1) / 2;
    let mut tb = Builder {
        b: NetworkBuilder::new(n),
        m,
        uniform: vec![None; n],
        frozen: Vec::new(),
    };
    let mut factors = Vec::with_capacity(n);
    for i2 in 1..m {
        for i3 in i2 + 1..=m {
            let var = edge_index(m, i2, i3);
            if i2 == 1 {
                factors.push(tb.uniform_leaf(var)?);
                continue;
            }
            let open = tb.phi_open(i2, i3)?;
            let closed = tb.phi_closed(i2, i3)?;
            let free = tb.uniform_leaf(var)?;
            let absent = tb.b.shared_indicator(var, false)?;
            let rows = cmo_rows(&mut tb.b, &[vec![open], vec![closed]], &[vec![free], vec![absent]])?;
            let half = tb.uniform_block(2);
            factors.push(cmo_from_rows(&mut tb.b, &rows, half)?);
        }
    }
    let root = tb.b.product_or_single(factors)?;
    let (network, params) = tb.b.finish(root)?;
    Ok(Model::new(network, params))
}
