//! The SPQN computational DAG.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::scope::{self, DependencyGraph, ScopeTable};

/// Dense index of a node within one [`Network`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a logit block. Several sum nodes may view the same block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u32);

impl BlockId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Indicator { var: usize, value: bool },
    Sum { children: Vec<NodeId>, block: BlockId },
    Product { children: Vec<NodeId> },
    Quotient { numerator: NodeId, denominator: NodeId },
}

impl Node {
    /// Visits every child, including the quotient denominator.
    pub fn for_each_child(&self, mut f: impl FnMut(NodeId)) {
        match self {
            Node::Indicator { .. } => {}
            Node::Sum { children, .. } | Node::Product { children } => {
                children.iter().copied().for_each(f)
            }
            Node::Quotient {
                numerator,
                denominator,
            } => {
                f(*numerator);
                f(*denominator);
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Node::Indicator { .. } => "indicator",
            Node::Sum { .. } => "sum",
            Node::Product { .. } => "product",
            Node::Quotient { .. } => "quotient",
        }
    }
}

/// Layout of one logit block inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    pub offset: usize,
    pub len: usize,
    /// Frozen blocks are excluded from training updates.
    pub frozen: bool,
}

/// An immutable, validated SPQN structure.
///
/// Every node is reachable from the root, the graph is acyclic, and every
/// sum node's block has exactly one logit per child. Scopes and the
/// per-product sampling orders are computed once at construction.
#[derive(Clone, Debug)]
pub struct Network {
    num_vars: usize,
    nodes: Vec<Node>,
    root: NodeId,
    blocks: Vec<BlockSpec>,
    order: Vec<NodeId>,
    scopes: ScopeTable,
    product_orders: Vec<Option<Vec<NodeId>>>,
}

impl Network {
    /// Validates and freezes a node list.
    pub fn from_parts(
        num_vars: usize,
        nodes: Vec<Node>,
        root: NodeId,
        blocks: Vec<BlockSpec>,
    ) -> Result<Self> {
        if root.index() >= nodes.len() {
            return Err(Error::input(format!(
                "root {root} out of range for {} nodes",
                nodes.len()
            )));
        }
        let mut expected_offset = 0;
        for (b, spec) in blocks.iter().enumerate() {
            if spec.offset != expected_offset || spec.len == 0 {
                return Err(Error::input(format!("malformed layout for block {b}")));
            }
            expected_offset += spec.len;
        }
        for (i, node) in nodes.iter().enumerate() {
            let id = NodeId(i as u32);
            let mut bad_child = None;
            node.for_each_child(|c| {
                if c.index() >= nodes.len() {
                    bad_child = Some(c);
                }
            });
            if let Some(c) = bad_child {
                return Err(Error::structure(id, format!("child {c} does not exist")));
            }
            match node {
                Node::Indicator { var, .. } if *var >= num_vars => {
                    return Err(Error::structure(
                        id,
                        format!("variable {var} out of range for {num_vars} variables"),
                    ));
                }
                Node::Sum { children, block } => {
                    if children.is_empty() {
                        return Err(Error::structure(id, "sum node without children"));
                    }
                    let spec = blocks.get(block.index()).ok_or_else(|| {
                        Error::structure(id, format!("unknown block {}", block.0))
                    })?;
                    if spec.len != children.len() {
                        return Err(Error::structure(
                            id,
                            format!(
                                "block {} has {} weights for {} children",
                                block.0,
                                spec.len,
                                children.len()
                            ),
                        ));
                    }
                }
                Node::Product { children } if children.is_empty() => {
                    return Err(Error::structure(id, "product node without children"));
                }
                _ => {}
            }
        }
        let order = topological_order(&nodes, root)?;
        if order.len() != nodes.len() {
            let mut seen = vec![false; nodes.len()];
            for id in &order {
                seen[id.index()] = true;
            }
            let orphan = seen.iter().position(|s| !s).unwrap();
            return Err(Error::structure(
                NodeId(orphan as u32),
                "node is not reachable from the root",
            ));
        }
        let scopes = scope::compute_from_parts(num_vars, &nodes, &order);
        let product_orders = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| match node {
                Node::Product { children } => {
                    DependencyGraph::build(&scopes, NodeId(i as u32), children).topological_order()
                }
                _ => None,
            })
            .collect();
        Ok(Network {
            num_vars,
            nodes,
            root,
            blocks,
            order,
            scopes,
            product_orders,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of parent-to-child edges, counting the quotient denominator.
    pub fn edge_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Indicator { .. } => 0,
                Node::Sum { children, .. } | Node::Product { children } => children.len(),
                Node::Quotient { .. } => 2,
            })
            .sum()
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    #[inline]
    pub fn block(&self, id: BlockId) -> &BlockSpec {
        &self.blocks[id.index()]
    }

    pub fn num_params(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    /// Children-before-parents order of all nodes, ties broken by `NodeId`.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn scopes(&self) -> &ScopeTable {
        &self.scopes
    }

    /// Order in which a product node's children are sampled: a topological
    /// order of its child dependency graph, or `None` if that graph is cyclic.
    pub fn product_order(&self, product: NodeId) -> Option<&[NodeId]> {
        self.product_orders[product.index()].as_deref()
    }

    pub fn count_quotients(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Quotient { .. }))
            .count()
    }

    /// Parent lists, one per node (a parent appears once per edge).
    pub fn parents(&self) -> Vec<Vec<NodeId>> {
        let mut parents = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            node.for_each_child(|c| parents[c.index()].push(NodeId(i as u32)));
        }
        parents
    }

    /// Every indicator node, grouped by variable.
    pub fn indicators_by_var(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.num_vars];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Indicator { var, .. } = node {
                out[*var].push(NodeId(i as u32));
            }
        }
        out
    }

    /// Ids of sum nodes that view each block.
    pub fn block_users(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.blocks.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Sum { block, .. } = node {
                out[block.index()].push(NodeId(i as u32));
            }
        }
        out
    }
}

/// Children-before-parents order of the nodes reachable from `root`.
///
/// Among ready nodes the smallest id goes first, so the order is
/// deterministic. Fails with [`Error::Cycle`] if the reachable sub-graph has
/// a cycle.
pub fn topological_order(nodes: &[Node], root: NodeId) -> Result<Vec<NodeId>> {
    let n = nodes.len();
    let mut reachable = vec![false; n];
    let mut stack = vec![root];
    reachable[root.index()] = true;
    while let Some(id) = stack.pop() {
        nodes[id.index()].for_each_child(|c| {
            if !reachable[c.index()] {
                reachable[c.index()] = true;
                stack.push(c);
            }
        });
    }
    let mut pending = vec![0usize; n];
    let mut parents: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        if !reachable[i] {
            continue;
        }
        node.for_each_child(|c| {
            pending[i] += 1;
            parents[c.index()].push(i as u32);
        });
    }
    let mut ready: BinaryHeap<Reverse<u32>> = (0..n)
        .filter(|&i| reachable[i] && pending[i] == 0)
        .map(|i| Reverse(i as u32))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(NodeId(i));
        for &p in &parents[i as usize] {
            pending[p as usize] -= 1;
            if pending[p as usize] == 0 {
                ready.push(Reverse(p));
            }
        }
    }
    let reachable_count = reachable.iter().filter(|&&r| r).count();
    if order.len() != reachable_count {
        let stuck = (0..n).find(|&i| reachable[i] && pending[i] > 0).unwrap();
        return Err(Error::Cycle(NodeId(stuck as u32)));
    }
    Ok(order)
}

/// Append-only network construction. Children must exist before their
/// parents, so builder output is acyclic by construction.
#[derive(Clone, Debug)]
pub struct NetworkBuilder {
    num_vars: usize,
    nodes: Vec<Node>,
    blocks: Vec<BlockSpec>,
    logits: Vec<f64>,
    shared_indicators: Vec<[Option<NodeId>; 2]>,
}

impl NetworkBuilder {
    pub fn new(num_vars: usize) -> Self {
        NetworkBuilder {
            num_vars,
            nodes: Vec::new(),
            blocks: Vec::new(),
            logits: Vec::new(),
            shared_indicators: vec![[None, None]; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    fn push(&mut self, node: Node) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    fn check_children(&self, children: &[NodeId]) -> Result<()> {
        match children.iter().find(|c| c.index() >= self.nodes.len()) {
            Some(c) => Err(Error::input(format!("child {c} does not exist yet"))),
            None => Ok(()),
        }
    }

    pub fn indicator(&mut self, var: usize, value: bool) -> Result<NodeId> {
        if var >= self.num_vars {
            return Err(Error::input(format!(
                "variable {var} out of range for {} variables",
                self.num_vars
            )));
        }
        Ok(self.push(Node::Indicator { var, value }))
    }

    /// The indicator for `(var, value)`, created on first use and shared
    /// afterwards.
    pub fn shared_indicator(&mut self, var: usize, value: bool) -> Result<NodeId> {
        if let Some(id) = self.shared_indicators.get(var).and_then(|s| s[value as usize]) {
            return Ok(id);
        }
        let id = self.indicator(var, value)?;
        self.shared_indicators[var][value as usize] = Some(id);
        Ok(id)
    }

    /// Allocates a logit block initialized to `logits`.
    pub fn block(&mut self, logits: &[f64], frozen: bool) -> BlockId {
        assert!(!logits.is_empty(), "empty logit block");
        let id = BlockId(self.blocks.len() as u32);
        self.blocks.push(BlockSpec {
            offset: self.logits.len(),
            len: logits.len(),
            frozen,
        });
        self.logits.extend_from_slice(logits);
        id
    }

    pub fn block_len(&self, block: BlockId) -> usize {
        self.blocks[block.index()].len
    }

    pub fn sum(&mut self, children: Vec<NodeId>, block: BlockId) -> Result<NodeId> {
        self.check_children(&children)?;
        let spec = self
            .blocks
            .get(block.index())
            .ok_or_else(|| Error::input(format!("unknown block {}", block.0)))?;
        if children.is_empty() || spec.len != children.len() {
            return Err(Error::input(format!(
                "sum with {} children over a block of {} weights",
                children.len(),
                spec.len
            )));
        }
        Ok(self.push(Node::Sum { children, block }))
    }

    pub fn product(&mut self, children: Vec<NodeId>) -> Result<NodeId> {
        self.check_children(&children)?;
        if children.is_empty() {
            return Err(Error::input("product without children"));
        }
        Ok(self.push(Node::Product { children }))
    }

    /// A product, or the single child itself when there is only one.
    pub fn product_or_single(&mut self, children: Vec<NodeId>) -> Result<NodeId> {
        if children.len() == 1 {
            self.check_children(&children)?;
            return Ok(children[0]);
        }
        self.product(children)
    }

    pub fn quotient(&mut self, numerator: NodeId, denominator: NodeId) -> Result<NodeId> {
        self.check_children(&[numerator, denominator])?;
        Ok(self.push(Node::Quotient {
            numerator,
            denominator,
        }))
    }

    /// Freezes the structure rooted at `root`.
    pub fn finish(self, root: NodeId) -> Result<(Network, ParamVector)> {
        let network = Network::from_parts(self.num_vars, self.nodes, root, self.blocks)?;
        Ok((network, ParamVector::new(self.logits)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(b: &mut NetworkBuilder, var: usize) -> NodeId {
        let i0 = b.indicator(var, false).unwrap();
        let i1 = b.indicator(var, true).unwrap();
        let blk = b.block(&[0.0, 0.0], false);
        b.sum(vec![i0, i1], blk).unwrap()
    }

    #[test]
    fn single_indicator_order() {
        let mut b = NetworkBuilder::new(1);
        let i = b.indicator(0, true).unwrap();
        let (net, _) = b.finish(i).unwrap();
        assert_eq!(net.order(), &[i]);
    }

    #[test]
    fn leaf_cmo_order_puts_indicators_first() {
        let mut b = NetworkBuilder::new(1);
        let s = leaf(&mut b, 0);
        let (net, _) = b.finish(s).unwrap();
        assert_eq!(net.order(), &[NodeId(0), NodeId(1), NodeId(2)]);
    }

    #[test]
    fn shared_children_appear_once() {
        let mut b = NetworkBuilder::new(2);
        let a = leaf(&mut b, 0);
        let c = leaf(&mut b, 1);
        let p = b.product(vec![a, c]).unwrap();
        let q = b.quotient(p, a).unwrap();
        let (net, _) = b.finish(q).unwrap();
        let order = net.order();
        assert_eq!(order.len(), net.len());
        let pos = |id: NodeId| order.iter().position(|&x| x == id).unwrap();
        assert!(pos(a) < pos(p) && pos(p) < pos(q));
        assert_eq!(order.iter().filter(|&&x| x == a).count(), 1);
    }

    #[test]
    fn cycle_is_reported() {
        let nodes = vec![
            Node::Indicator { var: 0, value: false },
            Node::Product {
                children: vec![NodeId(0), NodeId(2)],
            },
            Node::Product {
                children: vec![NodeId(1)],
            },
        ];
        let err = Network::from_parts(1, nodes, NodeId(2), vec![]).unwrap_err();
        assert!(matches!(err, Error::Cycle(_)), "{err:?}");
    }

    #[test]
    fn unreachable_nodes_are_rejected() {
        let nodes = vec![
            Node::Indicator { var: 0, value: false },
            Node::Indicator { var: 0, value: true },
        ];
        let err = Network::from_parts(1, nodes, NodeId(1), vec![]).unwrap_err();
        assert_eq!(
            err,
            Error::structure(NodeId(0), "node is not reachable from the root")
        );
    }

    #[test]
    fn block_length_must_match_children() {
        let mut b = NetworkBuilder::new(1);
        let i0 = b.indicator(0, false).unwrap();
        let blk = b.block(&[0.0, 0.0], false);
        assert!(b.sum(vec![i0], blk).is_err());
        assert!(b.indicator(1, false).is_err());
    }
}
