use std::fmt;

use fixedbitset::FixedBitSet;

/// Set of variable indices a unit depends on.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Scope(FixedBitSet);

impl Scope {
    pub fn empty() -> Scope {
        Scope(FixedBitSet::new())
    }

    pub fn singleton(var: usize) -> Scope {
        let mut b = FixedBitSet::with_capacity(var + 1);
        b.insert(var);
        Scope(b)
    }

    pub fn from_vars<I: IntoIterator<Item = usize>>(vars: I) -> Scope {
        let mut b = FixedBitSet::new();
        for v in vars {
            b.grow(v + 1);
            b.insert(v);
        }
        Scope(b)
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.contains(var)
    }

    pub fn union(&self, other: &Scope) -> Scope {
        let mut b = self.0.clone();
        b.union_with(&other.0);
        Scope(b).normalized()
    }

    pub fn intersection(&self, other: &Scope) -> Scope {
        let mut b = self.0.clone();
        b.intersect_with(&other.0);
        Scope(b).normalized()
    }

    pub fn difference(&self, other: &Scope) -> Scope {
        let mut b = self.0.clone();
        b.difference_with(&other.0);
        Scope(b).normalized()
    }

    pub fn is_disjoint(&self, other: &Scope) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &Scope) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn min_var(&self) -> Option<usize> {
        self.0.ones().next()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.0.ones().collect()
    }

    // Trailing zero blocks would make equal sets compare unequal.
    fn normalized(self) -> Scope {
        match self.0.ones().last() {
            None => Scope::empty(),
            Some(max) => {
                if self.0.len() == max + 1 {
                    self
                } else {
                    Scope::from_vars(self.0.ones())
                }
            }
        }
    }
}

impl fmt::Debug for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.ones()).finish()
    }
}
