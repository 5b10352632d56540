use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// A fixed-width set of variable indices.
///
/// All sets produced for one network share the same width (the network's
/// variable count), so the binary operations work word by word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VarSet {
    words: Vec<u64>,
}

impl VarSet {
    pub fn empty(width: usize) -> Self {
        VarSet {
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn singleton(width: usize, var: usize) -> Self {
        let mut s = Self::empty(width);
        s.insert(var);
        s
    }

    pub fn full(width: usize) -> Self {
        let mut s = Self::empty(width);
        for v in 0..width {
            s.insert(v);
        }
        s
    }

    pub fn from_iter_with_width(width: usize, vars: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(width);
        for v in vars {
            s.insert(v);
        }
        s
    }

    #[inline]
    pub fn insert(&mut self, var: usize) {
        self.words[var / 64] |= 1 << (var % 64);
    }

    #[inline]
    pub fn remove(&mut self, var: usize) {
        self.words[var / 64] &= !(1 << (var % 64));
    }

    #[inline]
    pub fn contains(&self, var: usize) -> bool {
        self.words
            .get(var / 64)
            .is_some_and(|w| w & (1 << (var % 64)) != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &VarSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &VarSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn difference_with(&mut self, other: &VarSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union(&self, other: &VarSet) -> VarSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &VarSet) -> VarSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn difference(&self, other: &VarSet) -> VarSet {
        let mut s = self.clone();
        s.difference_with(other);
        s
    }

    pub fn intersects(&self, other: &VarSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &VarSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut rest = w;
            core::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i * 64 + bit)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn min(&self) -> Option<usize> {
        self.iter().next()
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn set(width: usize, v: &BTreeSet<usize>) -> VarSet {
        VarSet::from_iter_with_width(width, v.iter().copied())
    }

    proptest! {
        #[test]
        fn set_algebra_matches_btreeset(
            a in proptest::collection::btree_set(0usize..150, 0..40),
            b in proptest::collection::btree_set(0usize..150, 0..40),
        ) {
            let (sa, sb) = (set(150, &a), set(150, &b));
            prop_assert_eq!(sa.union(&sb).to_vec(), a.union(&b).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.intersection(&sb).to_vec(), a.intersection(&b).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.difference(&sb).to_vec(), a.difference(&b).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.is_subset(&sb), a.is_subset(&b));
            prop_assert_eq!(sa.intersects(&sb), !a.is_disjoint(&b));
            prop_assert_eq!(sa.len(), a.len());
        }
    }

    #[test]
    fn contains_out_of_width_is_false() {
        let s = VarSet::full(3);
        assert!(s.contains(2));
        assert!(!s.contains(3));
        assert!(!s.contains(1000));
    }
}
