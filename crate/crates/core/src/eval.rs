//! Exact bottom-up evaluation in log space.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::graph::{Network, Node, NodeId};
use crate::math;
use crate::params::ParamVector;
use crate::validate;

/// `log Ψ`; `-inf` encodes probability zero exactly. Never NaN.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogValue(pub f64);

impl LogValue {
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn prob(self) -> f64 {
        math::exp(self.0)
    }
}

/// Log value of every node for one evidence vector, indexed by [`NodeId`].
#[derive(Clone, Debug, PartialEq)]
pub struct EvalTrace {
    values: Vec<f64>,
    root: NodeId,
}

impl EvalTrace {
    pub fn root(&self) -> LogValue {
        LogValue(self.values[self.root.index()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Index<NodeId> for EvalTrace {
    type Output = f64;

    fn index(&self, id: NodeId) -> &f64 {
        &self.values[id.index()]
    }
}

/// Evaluation context with the log weights materialized once.
///
/// Weights always come from the logits through the normalized-exponential
/// map; nothing is cached across parameter changes.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    network: &'a Network,
    log_weights: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(network: &'a Network, params: &ParamVector) -> Result<Self> {
        params.check_layout(network)?;
        Ok(Evaluator {
            network,
            log_weights: params.log_weights(network),
        })
    }

    pub fn network(&self) -> &'a Network {
        self.network
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Length check plus, for evidence with `*` entries, the marginalization
    /// pattern check.
    pub fn check_evidence(&self, evidence: &Evidence) -> Result<()> {
        self.check_length(evidence)?;
        if evidence.has_star() {
            if let Some(var) = validate::star_pattern_violation(self.network, evidence) {
                return Err(Error::StarPattern { var });
            }
        }
        Ok(())
    }

    fn check_length(&self, evidence: &Evidence) -> Result<()> {
        if evidence.len() != self.network.num_vars() {
            return Err(Error::input(format!(
                "evidence has {} entries, network has {} variables",
                evidence.len(),
                self.network.num_vars()
            )));
        }
        Ok(())
    }

    /// Log value of `id` from the values of its children in `values`.
    #[inline]
    pub fn node_value(&self, id: NodeId, evidence: &Evidence, values: &[f64]) -> Result<f64> {
        Ok(match self.network.node(id) {
            Node::Indicator { var, value } => {
                if evidence[*var].admits(*value) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Node::Sum { children, block } => {
                let lw = &self.log_weights[self.network.block(*block).offset..];
                let mut max = f64::NEG_INFINITY;
                for (k, c) in children.iter().enumerate() {
                    max = max.max(lw[k] + values[c.index()]);
                }
                if max == f64::NEG_INFINITY {
                    max
                } else {
                    let mut total = 0.0;
                    for (k, c) in children.iter().enumerate() {
                        total += math::exp(lw[k] + values[c.index()] - max);
                    }
                    max + math::ln(total)
                }
            }
            Node::Product { children } => {
                let mut acc = 0.0;
                for c in children {
                    acc += values[c.index()];
                }
                acc
            }
            Node::Quotient {
                numerator,
                denominator,
            } => {
                let den = values[denominator.index()];
                if den == f64::NEG_INFINITY {
                    return Err(Error::Evaluation {
                        node: id,
                        detail: format!("denominator {denominator} evaluates to zero"),
                    });
                }
                values[numerator.index()] - den
            }
        })
    }

    /// Fills `values` (one slot per node) without the marginalization check.
    pub fn eval_into_unchecked(&self, evidence: &Evidence, values: &mut [f64]) -> Result<()> {
        self.check_length(evidence)?;
        for &id in self.network.order() {
            values[id.index()] = self.node_value(id, evidence, values)?;
        }
        Ok(())
    }

    pub fn trace(&self, evidence: &Evidence) -> Result<EvalTrace> {
        self.check_evidence(evidence)?;
        self.trace_unchecked(evidence)
    }

    pub fn trace_unchecked(&self, evidence: &Evidence) -> Result<EvalTrace> {
        let mut values = vec![0.0; self.network.len()];
        self.eval_into_unchecked(evidence, &mut values)?;
        Ok(EvalTrace {
            values,
            root: self.network.root(),
        })
    }

    pub fn evaluate(&self, evidence: &Evidence) -> Result<LogValue> {
        Ok(self.trace(evidence)?.root())
    }

    /// Evaluates even when `*` entries fail the marginalization check; the
    /// result is then not guaranteed to be a marginal.
    pub fn evaluate_unchecked(&self, evidence: &Evidence) -> Result<LogValue> {
        Ok(self.trace_unchecked(evidence)?.root())
    }

    /// Log value of the root for each sample, in order.
    pub fn evaluate_batch(&self, data: &[Evidence]) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            data.par_iter()
                .map(|e| self.evaluate(e).map(LogValue::get))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut values = vec![0.0; self.network.len()];
            data.iter()
                .map(|e| {
                    self.check_evidence(e)?;
                    self.eval_into_unchecked(e, &mut values)?;
                    Ok(values[self.network.root().index()])
                })
                .collect()
        }
    }

    pub fn mean_log_likelihood(&self, data: &[Evidence]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::input("empty dataset"));
        }
        let values = self.evaluate_batch(data)?;
        Ok(values.iter().sum::<f64>() / data.len() as f64)
    }
}

/// `log Ψ_root(evidence)`. Evidence with `*` entries must pass the
/// marginalization check.
pub fn evaluate(network: &Network, params: &ParamVector, evidence: &Evidence) -> Result<LogValue> {
    Evaluator::new(network, params)?.evaluate(evidence)
}

/// Like [`evaluate`] but skips the marginalization check.
pub fn evaluate_unchecked(network: &Network, params: &ParamVector, evidence: &Evidence) -> Result<LogValue> {
    Evaluator::new(network, params)?.evaluate_unchecked(evidence)
}

pub fn evaluate_trace(network: &Network, params: &ParamVector, evidence: &Evidence) -> Result<EvalTrace> {
    Evaluator::new(network, params)?.trace(evidence)
}

/// Mean of `log Ψ_root` over the dataset; `-inf` if any sample has zero
/// probability.
pub fn mean_log_likelihood(network: &Network, params: &ParamVector, data: &[Evidence]) -> Result<f64> {
    Evaluator::new(network, params)?.mean_log_likelihood(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::Value;
    use crate::graph::NetworkBuilder;

    fn leaf_model(w0: f64, w1: f64) -> (Network, ParamVector) {
        let mut b = NetworkBuilder::new(1);
        let i0 = b.indicator(0, false).unwrap();
        let i1 = b.indicator(0, true).unwrap();
        let blk = b.block(&[w0.ln(), w1.ln()], false);
        let s = b.sum(vec![i0, i1], blk).unwrap();
        b.finish(s).unwrap()
    }

    #[test]
    fn leaf_cmo_values() {
        let (net, params) = leaf_model(0.3, 0.7);
        let one = Evidence::new(vec![Value::One]);
        let v = evaluate(&net, &params, &one).unwrap();
        assert!((v.get() - 0.7f64.ln()).abs() < 1e-15);
        let star = evaluate(&net, &params, &Evidence::all_star(1)).unwrap();
        assert!(star.get().abs() < 1e-15);

        let zero = Evidence::new(vec![Value::Zero]);
        let t = evaluate_trace(&net, &params, &zero).unwrap();
        assert_eq!(t.values()[..2], [0.0, f64::NEG_INFINITY]);
        assert!((t.root().get() - 0.3f64.ln()).abs() < 1e-15);
        assert_eq!(t.len(), net.len());
    }

    #[test]
    fn product_root_is_sum_of_children() {
        let mut b = NetworkBuilder::new(2);
        let mut leaves = vec![];
        for v in 0..2 {
            let i0 = b.indicator(v, false).unwrap();
            let i1 = b.indicator(v, true).unwrap();
            let blk = b.block(&[0.2, -0.4], false);
            leaves.push(b.sum(vec![i0, i1], blk).unwrap());
        }
        let p = b.product(leaves.clone()).unwrap();
        let (net, params) = b.finish(p).unwrap();
        let t = evaluate_trace(&net, &params, &Evidence::from_bits(&[true, false])).unwrap();
        assert_eq!(t[p], t[leaves[0]] + t[leaves[1]]);
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let mut b = NetworkBuilder::new(1);
        let i0 = b.indicator(0, false).unwrap();
        let i1 = b.indicator(0, true).unwrap();
        let q = b.quotient(i1, i0).unwrap();
        let root = b.product(vec![q]).unwrap();
        let (net, params) = b.finish(root).unwrap();
        let err = evaluate(&net, &params, &Evidence::from_bits(&[true])).unwrap_err();
        assert!(matches!(err, Error::Evaluation { node, .. } if node == q));
    }

    #[test]
    fn mean_log_likelihood_basics() {
        let (net, params) = leaf_model(0.5, 0.5);
        let data: Vec<_> = [true, false, true].iter().map(|&b| Evidence::from_bits(&[b])).collect();
        let m = mean_log_likelihood(&net, &params, &data).unwrap();
        assert!((m - 0.5f64.ln()).abs() < 1e-15);
        assert!(mean_log_likelihood(&net, &params, &[]).is_err());

        let (net, params) = leaf_model(0.3, 0.7);
        let one = Evidence::from_bits(&[true]);
        let single = mean_log_likelihood(&net, &params, core::slice::from_ref(&one)).unwrap();
        let repeated = mean_log_likelihood(&net, &params, &vec![one; 7]).unwrap();
        assert!((single - repeated).abs() < 1e-15);
    }

    #[test]
    fn wrong_length_evidence_is_rejected() {
        let (net, params) = leaf_model(0.5, 0.5);
        assert!(evaluate(&net, &params, &Evidence::all_star(2)).is_err());
    }

    #[test]
    fn large_log_magnitudes_stay_finite() {
        let mut b = NetworkBuilder::new(1);
        let i0 = b.indicator(0, false).unwrap();
        let i1 = b.indicator(0, true).unwrap();
        let blk = b.block(&[300.0, -300.0], false);
        let s = b.sum(vec![i0, i1], blk).unwrap();
        let (net, params) = b.finish(s).unwrap();
        let v = evaluate(&net, &params, &Evidence::from_bits(&[true])).unwrap();
        assert!(v.get().is_finite());
        assert!((v.get() + 600.0).abs() < 1e-9);
    }
}
