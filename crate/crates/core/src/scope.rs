//! General, effective and conditional scopes, and the child dependency
//! graph of product nodes.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::graph::{Network, Node, NodeId};
use crate::varset::VarSet;

/// Per-node scopes.
///
/// * `scope`: every variable with an indicator below the node.
/// * `effective`: the variables the node is a distribution over. Unions at
///   sums and products; at a quotient, the numerator's minus the
///   denominator's.
/// * `conditional`: `scope \ effective`, the variables conditioned on.
#[derive(Clone, Debug)]
pub struct ScopeTable {
    scope: Vec<VarSet>,
    effective: Vec<VarSet>,
    conditional: Vec<VarSet>,
}

impl ScopeTable {
    #[inline]
    pub fn scope(&self, id: NodeId) -> &VarSet {
        &self.scope[id.index()]
    }

    #[inline]
    pub fn effective(&self, id: NodeId) -> &VarSet {
        &self.effective[id.index()]
    }

    #[inline]
    pub fn conditional(&self, id: NodeId) -> &VarSet {
        &self.conditional[id.index()]
    }

    pub fn len(&self) -> usize {
        self.scope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scope.is_empty()
    }
}

/// Scopes of every node of `network`. The network caches the same table,
/// see [`Network::scopes`].
pub fn compute_scopes(network: &Network) -> ScopeTable {
    compute_from_parts(network.num_vars(), network.nodes(), network.order())
}

pub(crate) fn compute_from_parts(num_vars: usize, nodes: &[Node], order: &[NodeId]) -> ScopeTable {
    let empty = VarSet::empty(num_vars);
    let mut scope = vec![empty.clone(); nodes.len()];
    let mut effective = vec![empty.clone(); nodes.len()];
    for &id in order {
        let i = id.index();
        let (s, e) = match &nodes[i] {
            Node::Indicator { var, .. } => {
                let s = VarSet::singleton(num_vars, *var);
                (s.clone(), s)
            }
            Node::Sum { children, .. } | Node::Product { children } => {
                let mut s = empty.clone();
                let mut e = empty.clone();
                for c in children {
                    s.union_with(&scope[c.index()]);
                    e.union_with(&effective[c.index()]);
                }
                (s, e)
            }
            Node::Quotient {
                numerator,
                denominator,
            } => {
                let s = scope[numerator.index()].union(&scope[denominator.index()]);
                let e = effective[numerator.index()].difference(&effective[denominator.index()]);
                (s, e)
            }
        };
        scope[i] = s;
        effective[i] = e;
    }
    let conditional = scope
        .iter()
        .zip(&effective)
        .map(|(s, e)| s.difference(e))
        .collect();
    ScopeTable {
        scope,
        effective,
        conditional,
    }
}

/// Dependency graph over a product's children: an edge `a -> b` whenever
/// the effective scope of `a` meets the conditional scope of `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    pub product: NodeId,
    pub vertices: Vec<NodeId>,
    /// Edges as index pairs into `vertices`.
    pub edges: Vec<(usize, usize)>,
}

impl DependencyGraph {
    pub fn build(scopes: &ScopeTable, product: NodeId, children: &[NodeId]) -> Self {
        let mut edges = Vec::new();
        for (a, &ca) in children.iter().enumerate() {
            for (b, &cb) in children.iter().enumerate() {
                if a != b && scopes.effective(ca).intersects(scopes.conditional(cb)) {
                    edges.push((a, b));
                }
            }
        }
        DependencyGraph {
            product,
            vertices: children.to_vec(),
            edges,
        }
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges
            .iter()
            .any(|&(a, b)| self.vertices[a] == from && self.vertices[b] == to)
    }

    /// Topological order with ties broken by `NodeId`; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let k = self.vertices.len();
        let mut indegree = vec![0usize; k];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); k];
        for &(a, b) in &self.edges {
            indegree[b] += 1;
            out[a].push(b);
        }
        let mut ready: BinaryHeap<Reverse<(NodeId, usize)>> = (0..k)
            .filter(|&v| indegree[v] == 0)
            .map(|v| Reverse((self.vertices[v], v)))
            .collect();
        let mut order = Vec::with_capacity(k);
        while let Some(Reverse((id, v))) = ready.pop() {
            order.push(id);
            for &w in &out[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.push(Reverse((self.vertices[w], w)));
                }
            }
        }
        (order.len() == k).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }
}

/// Dependency graph of the children of `product`.
///
/// # Panics
/// If `product` is not a product node.
pub fn child_dependency_graph(network: &Network, scopes: &ScopeTable, product: NodeId) -> DependencyGraph {
    match network.node(product) {
        Node::Product { children } => DependencyGraph::build(scopes, product, children),
        other => panic!("node {product} is a {} node, not a product", other.kind_name()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NetworkBuilder;

    fn leaf(b: &mut NetworkBuilder, var: usize) -> NodeId {
        let i0 = b.indicator(var, false).unwrap();
        let i1 = b.indicator(var, true).unwrap();
        let blk = b.block(&[0.0, 0.0], false);
        b.sum(vec![i0, i1], blk).unwrap()
    }

    #[test]
    fn indicator_scope() {
        let mut b = NetworkBuilder::new(5);
        let i = b.indicator(3, true).unwrap();
        let (net, _) = b.finish(i).unwrap();
        let s = net.scopes();
        assert_eq!(s.scope(i).to_vec(), vec![3]);
        assert_eq!(s.effective(i).to_vec(), vec![3]);
        assert!(s.conditional(i).is_empty());
    }

    #[test]
    fn product_of_disjoint_indicators() {
        let mut b = NetworkBuilder::new(3);
        let a = b.indicator(1, true).unwrap();
        let c = b.indicator(2, false).unwrap();
        let p = b.product(vec![a, c]).unwrap();
        let (net, _) = b.finish(p).unwrap();
        assert_eq!(net.scopes().effective(p).to_vec(), vec![1, 2]);
        assert!(net.scopes().conditional(p).is_empty());
    }

    /// P(X1,X2|X3) / P(X2|X3) has effective scope {1} and conditions on {2,3}.
    #[test]
    fn quotient_of_conditionals() {
        let mut b = NetworkBuilder::new(4);
        let x1 = leaf(&mut b, 1);
        let x2 = leaf(&mut b, 2);
        let x3 = leaf(&mut b, 3);
        // P(X2 | X3) = (X2 X3) / X3
        let p23 = b.product(vec![x2, x3]).unwrap();
        let x2_given_x3 = b.quotient(p23, x3).unwrap();
        // P(X1, X2 | X3) = (X1 X2 X3) / X3
        let p123 = b.product(vec![x1, x2, x3]).unwrap();
        let x12_given_x3 = b.quotient(p123, x3).unwrap();
        let q = b.quotient(x12_given_x3, x2_given_x3).unwrap();
        let (net, _) = b.finish(q).unwrap();
        let s = net.scopes();
        assert_eq!(s.effective(x12_given_x3).to_vec(), vec![1, 2]);
        assert_eq!(s.conditional(x12_given_x3).to_vec(), vec![3]);
        assert_eq!(s.effective(x2_given_x3).to_vec(), vec![2]);
        assert_eq!(s.effective(q).to_vec(), vec![1]);
        assert_eq!(s.conditional(q).to_vec(), vec![2, 3]);
    }

    #[test]
    fn dependency_edges() {
        // c1 over {1} given {2}; c2 over {2} given {1}; c3 over {0}.
        let mut b = NetworkBuilder::new(3);
        let x0 = leaf(&mut b, 0);
        let x1 = leaf(&mut b, 1);
        let x2 = leaf(&mut b, 2);
        let p12 = b.product(vec![x1, x2]).unwrap();
        let c1 = b.quotient(p12, x2).unwrap();
        let c2 = b.quotient(p12, x1).unwrap();
        let top = b.product(vec![c1, c2, x0]).unwrap();
        let disjoint = b.product(vec![x0, x1]).unwrap();
        let one_way = b.product(vec![x1, c2]).unwrap();
        let root = b.product(vec![top, disjoint, one_way]).unwrap();
        let (net, _) = b.finish(root).unwrap();
        let s = net.scopes();

        let g = child_dependency_graph(&net, s, disjoint);
        assert!(g.edges.is_empty());

        let g = child_dependency_graph(&net, s, one_way);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert!(g.has_edge(x1, c2));
        assert_eq!(g.topological_order(), Some(vec![x1, c2]));

        let g = child_dependency_graph(&net, s, top);
        assert!(g.has_edge(c1, c2) && g.has_edge(c2, c1));
        assert!(!g.is_acyclic());
        assert_eq!(net.product_order(top), None);
    }
}
