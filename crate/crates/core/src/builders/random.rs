//! Random networks assembled from valid CMOs, for property tests.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::builders::cmo::{build_cmo, build_leaf_cmo};
use crate::error::{Error, Result};
use crate::graph::{NetworkBuilder, NodeId};
use crate::model::Model;
use crate::params::ParamVector;
use crate::rng::{self, SpqnRng};
use crate::validate::CmoAnnotation;

struct Gen<'a> {
    b: NetworkBuilder,
    rng: &'a mut SpqnRng,
    cmos: Vec<CmoAnnotation>,
}

impl Gen<'_> {
    /// A node with effective scope `vars` that conditions only on
    /// variables from `pool` (disjoint from `vars`).
    ///
    /// Parts of a row are generated in order and part `k` may condition on
    /// the parts before it, so dependency edges only point forward. A-rows
    /// draw their variables from `pool`, and B-rows never touch the pool
    /// entries used by A, so there is no edge from B to A.
    fn node(&mut self, vars: &[usize], pool: &[usize], depth: usize) -> Result<NodeId> {
        if vars.len() == 1 && (depth == 0 || self.rng.random_bool(0.3)) {
            return build_leaf_cmo(&mut self.b, vars[0], [0.0, 0.0]);
        }
        if depth == 0 {
            let leaves = vars
                .iter()
                .map(|&v| build_leaf_cmo(&mut self.b, v, [0.0, 0.0]))
                .collect::<Result<Vec<_>>>()?;
            let (root, ann) = build_cmo(&mut self.b, &[], &[leaves], &[0.0])?;
            self.cmos.push(ann);
            return Ok(root);
        }
        let gamma = self.rng.random_range(1..=3);
        let beta = self.rng.random_range(1..=vars.len().min(3));
        let alpha = if !pool.is_empty() && self.rng.random_bool(0.7) {
            self.rng.random_range(1..=pool.len().min(2))
        } else {
            0
        };
        // Every A-row covers the same variables so the denominator sum is
        // complete on effective scope.
        let a_vars: Vec<usize> = if alpha > 0 {
            let take = self.rng.random_range(alpha..=pool.len().min(alpha + 2));
            let mut chosen: Vec<usize> = pool.choose_multiple(self.rng, take).copied().collect();
            chosen.sort_unstable();
            chosen
        } else {
            Vec::new()
        };
        let a_pool: Vec<usize> = pool.iter().copied().filter(|v| !a_vars.contains(v)).collect();
        let mut a = Vec::with_capacity(gamma);
        let mut bm = Vec::with_capacity(gamma);
        for _ in 0..gamma {
            bm.push(self.row(vars, beta, pool, depth - 1)?);
            if alpha > 0 {
                a.push(self.row(&a_vars, alpha, &a_pool, depth - 1)?);
            }
        }
        let (root, ann) = build_cmo(&mut self.b, &a, &bm, &vec![0.0; gamma])?;
        self.cmos.push(ann);
        Ok(root)
    }

    fn row(&mut self, vars: &[usize], parts: usize, pool: &[usize], depth: usize) -> Result<Vec<NodeId>> {
        let mut row = Vec::with_capacity(parts);
        let mut allowed = pool.to_vec();
        for part in self.partition(vars, parts) {
            row.push(self.node(&part, &allowed, depth)?);
            allowed.extend_from_slice(&part);
        }
        Ok(row)
    }

    /// Random split of `vars` into `parts` non-empty sorted blocks.
    fn partition(&mut self, vars: &[usize], parts: usize) -> Vec<Vec<usize>> {
        let mut shuffled = vars.to_vec();
        shuffled.shuffle(self.rng);
        let mut out = vec![Vec::new(); parts];
        for (k, &v) in shuffled.iter().enumerate() {
            let slot = if k < parts { k } else { self.rng.random_range(0..parts) };
            out[slot].push(v);
        }
        for p in &mut out {
            p.sort_unstable();
        }
        out
    }
}

/// A random unconditional network over `num_vars` variables built from
/// valid CMOs nested at most `depth` levels, with logits uniform in
/// `[-logit_range, logit_range]`.
pub fn random_cmo_network(num_vars: usize, depth: usize, logit_range: f64, seed: u64) -> Result<Model> {
    if num_vars == 0 {
        return Err(Error::input("random networks need at least one variable"));
    }
    let mut rng = rng::stream(seed, 1);
    let mut g = Gen {
        b: NetworkBuilder::new(num_vars),
        rng: &mut rng,
        cmos: Vec::new(),
    };
    let vars: Vec<usize> = (0..num_vars).collect();
    let root = g.node(&vars, &[], depth)?;
    let cmos = g.cmos;
    let (network, zeros) = g.b.finish(root)?;
    let params = ParamVector::random_uniform(&network, &zeros, seed, logit_range);
    Ok(Model::new(network, params).with_cmos(cmos))
}
