//! Brute-force enumeration of a network's distribution.
//!
//! Used as the reference for normalization, marginal, sampling and
//! soundness checks on small networks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::evidence::{Evidence, Value};
use crate::graph::Network;
use crate::params::ParamVector;
use crate::varset::VarSet;

/// Probability table over `{0,1}^N`; entry `code` holds the assignment
/// whose bit `i` is variable `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution {
    num_vars: usize,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn from_table(num_vars: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), 1usize << num_vars);
        ExactDistribution { num_vars, probs }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, code: u64) -> f64 {
        self.probs[code as usize]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Sums out the variables in `out`. The result is a table over the
    /// remaining variables, renumbered in increasing order.
    pub fn marginalize(&self, out: &VarSet) -> ExactDistribution {
        let keep: Vec<usize> = (0..self.num_vars).filter(|&v| !out.contains(v)).collect();
        let mut probs = vec![0.0; 1 << keep.len()];
        for (code, &p) in self.probs.iter().enumerate() {
            let mut sub = 0usize;
            for (k, &v) in keep.iter().enumerate() {
                sub |= (code >> v & 1) << k;
            }
            probs[sub] += p;
        }
        ExactDistribution {
            num_vars: keep.len(),
            probs,
        }
    }

    /// Probability of the observed entries of `evidence`, summing over the
    /// completions of its `*` entries.
    pub fn marginal_prob(&self, evidence: &Evidence) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(code, _)| agrees(evidence, *code as u64))
            .map(|(_, p)| p)
            .sum()
    }

    /// Distribution over all variables conditioned on the observed entries
    /// of `evidence` (zero outside the matching slice). `None` when the
    /// observation has probability zero.
    pub fn conditional(&self, evidence: &Evidence) -> Option<ExactDistribution> {
        let z = self.marginal_prob(evidence);
        if z <= 0.0 {
            return None;
        }
        let probs = self
            .probs
            .iter()
            .enumerate()
            .map(|(code, &p)| if agrees(evidence, code as u64) { p / z } else { 0.0 })
            .collect();
        Some(ExactDistribution {
            num_vars: self.num_vars,
            probs,
        })
    }

    /// Total variation distance to another table over the same variables.
    pub fn tvd(&self, other: &ExactDistribution) -> f64 {
        assert_eq!(self.num_vars, other.num_vars);
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Total variation distance to the empirical distribution of `counts`.
    pub fn tvd_counts(&self, counts: &[u64]) -> f64 {
        assert_eq!(counts.len(), self.probs.len());
        let n: u64 = counts.iter().sum();
        0.5 * self
            .probs
            .iter()
            .zip(counts)
            .map(|(p, &c)| (p - c as f64 / n as f64).abs())
            .sum::<f64>()
    }
}

fn agrees(evidence: &Evidence, code: u64) -> bool {
    evidence.values().iter().enumerate().all(|(i, v)| match v {
        Value::Star => true,
        Value::One => code >> i & 1 == 1,
        Value::Zero => code >> i & 1 == 0,
    })
}

/// Evaluates every full assignment. Refuses networks over more than
/// `max_vars` variables.
pub fn enumerate_distribution(network: &Network, params: &ParamVector, max_vars: usize) -> Result<ExactDistribution> {
    let n = network.num_vars();
    if n > max_vars || n >= 63 {
        return Err(Error::TooManyVars { num_vars: n, max: max_vars });
    }
    let evaluator = Evaluator::new(network, params)?;
    let total = 1u64 << n;
    let eval_range = |range: core::ops::Range<u64>| -> Result<Vec<f64>> {
        let mut buf = vec![0.0; network.len()];
        range
            .map(|code| {
                evaluator.eval_into_unchecked(&Evidence::from_index(n, code), &mut buf)?;
                Ok(crate::math::exp(buf[network.root().index()]))
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let probs = {
        use rayon::prelude::*;
        let chunk = 1024u64;
        let parts: Vec<Vec<f64>> = (0..total.div_ceil(chunk))
            .into_par_iter()
            .map(|k| eval_range(k * chunk..((k + 1) * chunk).min(total)))
            .collect::<Result<_>>()?;
        parts.concat()
    };
    #[cfg(not(feature = "parallel"))]
    let probs = eval_range(0..total)?;
    Ok(ExactDistribution { num_vars: n, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::build_leaf_cmo;
    use crate::graph::NetworkBuilder;

    #[test]
    fn leaf_cmo_table() {
        let mut b = NetworkBuilder::new(1);
        let s = build_leaf_cmo(&mut b, 0, [0.0, 0.0]).unwrap();
        let (net, params) = b.finish(s).unwrap();
        let d = enumerate_distribution(&net, &params, 20).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn independent_leaves_give_outer_product() {
        let mut b = NetworkBuilder::new(2);
        let x = build_leaf_cmo(&mut b, 0, [0.3f64.ln(), 0.7f64.ln()]).unwrap();
        let y = build_leaf_cmo(&mut b, 1, [0.4f64.ln(), 0.6f64.ln()]).unwrap();
        let p = b.product(alloc::vec![x, y]).unwrap();
        let (net, params) = b.finish(p).unwrap();
        let d = enumerate_distribution(&net, &params, 20).unwrap();
        let expect = [0.3 * 0.4, 0.7 * 0.4, 0.3 * 0.6, 0.7 * 0.6];
        for (a, e) in d.probs().iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        let full = d.marginalize(&VarSet::full(2));
        assert_eq!(full.num_vars(), 0);
        assert!((full.probs()[0] - 1.0).abs() < 1e-15);
        assert_eq!(d.marginalize(&VarSet::empty(2)), d);
        let only_x = d.marginalize(&VarSet::singleton(2, 1));
        assert!((only_x.probs()[1] - 0.7).abs() < 1e-15);
        assert!(enumerate_distribution(&net, &params, 1).is_err());
    }

    #[test]
    fn tvd_of_identical_tables_is_zero() {
        let d = ExactDistribution::from_table(1, alloc::vec![0.25, 0.75]);
        assert_eq!(d.tvd(&d), 0.0);
        assert!((d.tvd_counts(&[1, 1]) - 0.25).abs() < 1e-15);
        let c = d.conditional(&Evidence::from_bits(&[true])).unwrap();
        assert_eq!(c.probs(), &[0.0, 1.0]);
    }
}
