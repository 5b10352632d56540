//! Ancestral sampling.
//!
//! Traversal from the start node keeps a partial sample (`*` = not yet
//! drawn):
//!
//! * quotient: continue into the numerator only;
//! * product: visit children in a topological order of their dependency
//!   graph, skipping children whose effective scope is already assigned;
//! * sum: draw child `c` with probability proportional to `w_c Ψ_c(s)`,
//!   evaluated at the current partial sample;
//! * indicator `1[x_i = a]`: assign `s_i = a`.
//!
//! Node values are cached between draws. Assigning a variable invalidates
//! exactly the nodes whose scope contains it, and stale values are
//! recomputed lazily when a sum node needs them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::evidence::{Evidence, Value};
use crate::graph::{Network, Node, NodeId};
use crate::math;
use crate::params::ParamVector;
use crate::rng::{self, SpqnRng};
use crate::validate;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CacheMode {
    /// Invalidate and lazily recompute only affected nodes.
    #[default]
    Incremental,
    /// Re-evaluate the whole network before every sum-node draw.
    FullRecompute,
}

pub struct Sampler<'a> {
    evaluator: Evaluator<'a>,
    parents: Vec<Vec<NodeId>>,
    indicators: Vec<Vec<NodeId>>,
    mode: CacheMode,
}

/// Per-sample state: the partial assignment and the value cache.
pub struct SamplerState {
    pub partial: Evidence,
    values: Vec<f64>,
    dirty: Vec<bool>,
}

impl<'a> Sampler<'a> {
    pub fn new(network: &'a Network, params: &ParamVector) -> Result<Self> {
        Ok(Sampler {
            evaluator: Evaluator::new(network, params)?,
            parents: network.parents(),
            indicators: network.indicators_by_var(),
            mode: CacheMode::Incremental,
        })
    }

    pub fn with_mode(mut self, mode: CacheMode) -> Self {
        self.mode = mode;
        self
    }

    fn network(&self) -> &'a Network {
        self.evaluator.network()
    }

    /// Draws the unassigned variables in the effective scope of `start`,
    /// conditioned on the assigned entries of `partial`.
    ///
    /// The `*` entries of `partial` must pass the marginalization check,
    /// otherwise the conditional would not be exact and the call is refused.
    pub fn sample(&self, start: NodeId, partial: &Evidence, rng: &mut SpqnRng) -> Result<Evidence> {
        let net = self.network();
        if partial.len() != net.num_vars() {
            return Err(Error::input(format!("partial sample has {} entries, network has {} variables", partial.len(), net.num_vars())));
        }
        if start.index() >= net.len() {
            return Err(Error::input(format!("start node {start} does not exist")));
        }
        if let Some(var) = validate::star_pattern_violation(net, partial) {
            return Err(Error::StarPattern { var });
        }
        let mut state = SamplerState {
            partial: partial.clone(),
            values: vec![0.0; net.len()],
            dirty: vec![false; net.len()],
        };
        self.evaluator.eval_into_unchecked(&state.partial, &mut state.values)?;

        let mut stack = vec![(start, false)];
        let mut weights = Vec::new();
        while let Some((v, from_product)) = stack.pop() {
            if from_product && net.scopes().effective(v).iter().all(|i| state.partial[i] != Value::Star) {
                continue;
            }
            match net.node(v) {
                Node::Quotient { numerator, .. } => stack.push((*numerator, false)),
                Node::Product { .. } => {
                    let order = net.product_order(v).ok_or_else(|| Error::Sampling {
                        node: v,
                        detail: "child dependency graph is cyclic".into(),
                    })?;
                    stack.extend(order.iter().rev().map(|&c| (c, true)));
                }
                Node::Sum { children, block } => {
                    match self.mode {
                        CacheMode::Incremental => {
                            for &c in children {
                                self.refresh(&mut state, c)?;
                            }
                        }
                        CacheMode::FullRecompute => {
                            self.evaluator.eval_into_unchecked(&state.partial, &mut state.values)?;
                            state.dirty.fill(false);
                        }
                    }
                    let lw = &self.evaluator.log_weights()[net.block(*block).offset..];
                    weights.clear();
                    weights.extend(children.iter().enumerate().map(|(k, c)| lw[k] + state.values[c.index()]));
                    let norm = math::log_sum_exp(&weights);
                    if norm == f64::NEG_INFINITY {
                        return Err(Error::Sampling {
                            node: v,
                            detail: format!("every child has zero probability given {}", state.partial),
                        });
                    }
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = children.len() - 1;
                    for (k, &w) in weights.iter().enumerate() {
                        acc += math::exp(w - norm);
                        if u < acc {
                            chosen = k;
                            break;
                        }
                    }
                    // Guard against the cumulative sum falling short of 1.
                    while weights[chosen] == f64::NEG_INFINITY {
                        chosen -= 1;
                    }
                    stack.push((children[chosen], false));
                }
                Node::Indicator { var, value } => match state.partial[*var] {
                    Value::Star => self.assign(&mut state, *var, Value::from_bool(*value)),
                    current if current == Value::from_bool(*value) => {}
                    _ => {
                        return Err(Error::Sampling {
                            node: v,
                            detail: format!("indicator contradicts the assigned value of variable {var}"),
                        })
                    }
                },
            }
        }
        Ok(state.partial)
    }

    fn assign(&self, state: &mut SamplerState, var: usize, value: Value) {
        state.partial.set(var, value);
        let mut stack: Vec<NodeId> = self.indicators[var].clone();
        while let Some(id) = stack.pop() {
            if state.dirty[id.index()] {
                continue;
            }
            state.dirty[id.index()] = true;
            stack.extend(self.parents[id.index()].iter().copied());
        }
    }

    /// Recomputes `node` and any stale descendants. Dirty nodes form an
    /// ancestor-closed set, so a clean node has clean descendants.
    fn refresh(&self, state: &mut SamplerState, node: NodeId) -> Result<()> {
        if !state.dirty[node.index()] {
            return Ok(());
        }
        let net = self.network();
        let mut stack = vec![(node, false)];
        while let Some((id, expanded)) = stack.pop() {
            if !state.dirty[id.index()] {
                continue;
            }
            if expanded {
                state.values[id.index()] = self.evaluator.node_value(id, &state.partial, &state.values)?;
                state.dirty[id.index()] = false;
            } else {
                stack.push((id, true));
                net.node(id).for_each_child(|c| {
                    if state.dirty[c.index()] {
                        stack.push((c, false));
                    }
                });
            }
        }
        Ok(())
    }

    /// `count` samples from the root given `partial`; sample `i` draws from
    /// random stream `i` of `seed`.
    pub fn sample_batch(&self, partial: &Evidence, count: usize, seed: u64) -> Result<Vec<Evidence>> {
        let root = self.network().root();
        let one = |i: usize| self.sample(root, partial, &mut rng::stream(seed, i as u64));
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..count).map(one).collect()
        }
    }
}

/// One sample from `start` using random stream 0 of `seed`.
pub fn sample(network: &Network, params: &ParamVector, start: NodeId, partial: &Evidence, seed: u64) -> Result<Evidence> {
    Sampler::new(network, params)?.sample(start, partial, &mut rng::stream(seed, 0))
}

pub fn sample_batch(network: &Network, params: &ParamVector, partial: &Evidence, count: usize, seed: u64) -> Result<Vec<Evidence>> {
    Sampler::new(network, params)?.sample_batch(partial, count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{build_leaf_cmo, build_trianglefree_spqn, is_triangle_free, random_cmo_network};
    use crate::graph::NetworkBuilder;

    #[test]
    fn leaf_frequencies() {
        let mut b = NetworkBuilder::new(1);
        let s = build_leaf_cmo(&mut b, 0, [0.3f64.ln(), 0.7f64.ln()]).unwrap();
        let (net, params) = b.finish(s).unwrap();
        let draws = sample_batch(&net, &params, &Evidence::all_star(1), 100_000, 5).unwrap();
        let ones = draws.iter().filter(|e| e[0] == Value::One).count() as f64 / 1e5;
        assert!((ones - 0.7).abs() < 0.01, "{ones}");
    }

    #[test]
    fn observed_input_is_returned_unchanged() {
        let model = random_cmo_network(5, 3, 1.0, 2).unwrap();
        let full = Evidence::from_bits(&[true, false, true, true, false]);
        let out = sample(&model.network, &model.params, model.network.root(), &full, 9).unwrap();
        assert_eq!(out, full);
    }

    #[test]
    fn empty_batch() {
        let model = random_cmo_network(3, 2, 1.0, 2).unwrap();
        let out = sample_batch(&model.network, &model.params, &Evidence::all_star(3), 0, 1).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn same_seed_same_batch() {
        let model = random_cmo_network(6, 3, 1.0, 4).unwrap();
        let a = sample_batch(&model.network, &model.params, &Evidence::all_star(6), 50, 77).unwrap();
        let b = sample_batch(&model.network, &model.params, &Evidence::all_star(6), 50, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn triangle_free_samples_have_no_triangles() {
        let model = build_trianglefree_spqn(3).unwrap();
        let draws = sample_batch(&model.network, &model.params, &Evidence::all_star(3), 10_000, 3).unwrap();
        for d in draws {
            let bits: Vec<bool> = d.values().iter().map(|v| *v == Value::One).collect();
            assert!(is_triangle_free(3, &bits));
        }
    }

    #[test]
    fn incremental_cache_matches_full_recompute() {
        for seed in 0..5 {
            let model = random_cmo_network(7, 3, 1.5, seed).unwrap();
            let inc = Sampler::new(&model.network, &model.params).unwrap();
            let full = Sampler::new(&model.network, &model.params).unwrap().with_mode(CacheMode::FullRecompute);
            let start = Evidence::all_star(7);
            assert_eq!(inc.sample_batch(&start, 200, seed).unwrap(), full.sample_batch(&start, 200, seed).unwrap());
        }
        let model = build_trianglefree_spqn(5).unwrap();
        let inc = Sampler::new(&model.network, &model.params).unwrap();
        let full = Sampler::new(&model.network, &model.params).unwrap().with_mode(CacheMode::FullRecompute);
        let start = Evidence::all_star(10);
        assert_eq!(inc.sample_batch(&start, 200, 1).unwrap(), full.sample_batch(&start, 200, 1).unwrap());
    }

    #[test]
    fn invalid_conditioning_is_refused() {
        // x1 | x0 as a CMO: conditioning on x1 while x0 is unassigned is not exact.
        let mut b = NetworkBuilder::new(2);
        let a: Vec<_> = (0..2).map(|k| build_leaf_cmo(&mut b, 0, [k as f64, 0.0]).unwrap()).collect();
        let c: Vec<_> = (0..2).map(|k| build_leaf_cmo(&mut b, 1, [0.0, 2.0 * k as f64]).unwrap()).collect();
        let (q, _) = crate::builders::build_cmo(&mut b, &[vec![a[0]], vec![a[1]]], &[vec![c[0]], vec![c[1]]], &[0.0, 0.0]).unwrap();
        let x0 = build_leaf_cmo(&mut b, 0, [0.0, 0.0]).unwrap();
        let root = b.product(vec![x0, q]).unwrap();
        let (net, params) = b.finish(root).unwrap();
        let partial = Evidence::new(vec![Value::Star, Value::One]);
        let err = sample(&net, &params, root, &partial, 0).unwrap_err();
        assert!(matches!(err, Error::StarPattern { .. }));
        let ok = Evidence::new(vec![Value::One, Value::Star]);
        assert_eq!(sample(&net, &params, root, &ok, 0).unwrap()[0], Value::One);
    }
}
