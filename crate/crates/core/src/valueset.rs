//! Fixed-universe bitsets over domain value indices.

use std::fmt;

const WORD: usize = 64;

/// A subset of `0..universe`, where the universe is the size of one
/// parameter or variable domain.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueSet {
    universe: usize,
    words: Vec<u64>,
}

impl ValueSet {
    pub fn empty(universe: usize) -> Self {
        ValueSet {
            universe,
            words: vec![0; universe.div_ceil(WORD)],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut set = Self::empty(universe);
        for (i, w) in set.words.iter_mut().enumerate() {
            let lo = i * WORD;
            let n = (universe - lo).min(WORD);
            *w = if n == WORD { u64::MAX } else { (1u64 << n) - 1 };
        }
        set
    }

    pub fn singleton(universe: usize, value: usize) -> Self {
        let mut set = Self::empty(universe);
        set.insert(value);
        set
    }

    /// Builds a set from value indices. Panics if an index is outside the universe.
    pub fn from_values<I: IntoIterator<Item = usize>>(universe: usize, values: I) -> Self {
        let mut set = Self::empty(universe);
        for v in values {
            set.insert(v);
        }
        set
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn contains(&self, value: usize) -> bool {
        value < self.universe && self.words[value / WORD] & (1 << (value % WORD)) != 0
    }

    pub fn insert(&mut self, value: usize) {
        assert!(
            value < self.universe,
            "value {value} outside universe {}",
            self.universe
        );
        self.words[value / WORD] |= 1 << (value % WORD);
    }

    pub fn remove(&mut self, value: usize) {
        if value < self.universe {
            self.words[value / WORD] &= !(1 << (value % WORD));
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.universe
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.universe).filter(move |&v| self.contains(v))
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn intersection(&self, other: &ValueSet) -> ValueSet {
        debug_assert_eq!(self.universe, other.universe);
        ValueSet {
            universe: self.universe,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn difference(&self, other: &ValueSet) -> ValueSet {
        debug_assert_eq!(self.universe, other.universe);
        ValueSet {
            universe: self.universe,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    pub fn union(&self, other: &ValueSet) -> ValueSet {
        debug_assert_eq!(self.universe, other.universe);
        ValueSet {
            universe: self.universe,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    pub fn is_subset(&self, other: &ValueSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &ValueSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// Sum of `weights[v]` over members.
    pub fn mass(&self, weights: &[f64]) -> f64 {
        self.iter().map(|v| weights[v]).sum()
    }
}

impl fmt::Debug for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
