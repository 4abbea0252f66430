//! Finite multisets over an ordered element domain.
//!
//! Markings, steps and pre/postsets are all multisets; the algebra here
//! (sum, truncated difference, pointwise max, scaling, restriction) is the
//! substrate for everything else in the crate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A finite multiset: a map from elements to positive counts.
///
/// Elements with count zero are never stored, so two multisets that agree on
/// all positive counts are structurally equal regardless of how they were
/// produced.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiset<T: Ord> {
    entries: BTreeMap<T, u64>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Multiset::new()
    }
}

impl<T: Ord> Multiset<T> {
    pub fn new() -> Self {
        Multiset {
            entries: BTreeMap::new(),
        }
    }

    pub fn singleton(element: T) -> Self {
        Self::with_count(element, 1)
    }

    pub fn with_count(element: T, count: u64) -> Self {
        let mut entries = BTreeMap::new();
        if count > 0 {
            entries.insert(element, count);
        }
        Multiset { entries }
    }

    /// Multiplicity of `element`; zero when absent.
    pub fn count(&self, element: &T) -> u64 {
        self.entries.get(element).copied().unwrap_or(0)
    }

    pub fn contains(&self, element: &T) -> bool {
        self.entries.contains_key(element)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cardinality: the sum of all multiplicities.
    pub fn size(&self) -> u64 {
        self.entries.values().sum()
    }

    /// Number of distinct elements.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    /// Adds `count` occurrences of `element`.
    pub fn insert(&mut self, element: T, count: u64) {
        if count > 0 {
            let slot = self.entries.entry(element).or_insert(0);
            *slot = slot.checked_add(count).expect("multiset count overflow");
        }
    }

    /// Removes up to `count` occurrences; returns how many were removed.
    pub fn remove(&mut self, element: &T, count: u64) -> u64 {
        match self.entries.get_mut(element) {
            None => 0,
            Some(have) => {
                if *have > count {
                    *have -= count;
                    count
                } else {
                    let removed = *have;
                    self.entries.remove(element);
                    removed
                }
            }
        }
    }

    /// Iterates over `(element, count)` pairs in element order.
    pub fn iter(&self) -> impl Iterator<Item = (&T, u64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    /// Iterates over the distinct elements (the support).
    pub fn elements(&self) -> impl Iterator<Item = &T> {
        self.entries.keys()
    }

    /// Pointwise sum.
    pub fn sum(&self, other: &Self) -> Self
    where
        T: Clone,
    {
        let mut result = self.clone();
        for (x, n) in other.iter() {
            result.insert(x.clone(), n);
        }
        result
    }

    /// Truncated difference: counts never drop below zero.
    pub fn monus(&self, other: &Self) -> Self
    where
        T: Clone,
    {
        let mut entries = BTreeMap::new();
        for (x, n) in self.iter() {
            let m = other.count(x);
            if n > m {
                entries.insert(x.clone(), n - m);
            }
        }
        Multiset { entries }
    }

    /// Pointwise maximum.
    pub fn union(&self, other: &Self) -> Self
    where
        T: Clone,
    {
        let mut result = self.clone();
        for (x, n) in other.iter() {
            let have = result.count(x);
            if n > have {
                result.entries.insert(x.clone(), n);
            }
        }
        result
    }

    /// Pointwise comparison: `self(x) <= other(x)` for every `x`.
    pub fn leq(&self, other: &Self) -> bool {
        self.iter().all(|(x, n)| n <= other.count(x))
    }

    /// Pointwise scaling; `scale(0)` is the empty multiset.
    pub fn scale(&self, factor: u64) -> Self
    where
        T: Clone,
    {
        if factor == 0 {
            return Multiset::new();
        }
        let entries = self
            .entries
            .iter()
            .map(|(x, &n)| {
                (
                    x.clone(),
                    n.checked_mul(factor).expect("multiset count overflow"),
                )
            })
            .collect();
        Multiset { entries }
    }

    /// Restriction to a domain: entries outside `domain` are dropped.
    pub fn restrict(&self, domain: &BTreeSet<T>) -> Self
    where
        T: Clone,
    {
        let entries = self
            .entries
            .iter()
            .filter(|(x, _)| domain.contains(x))
            .map(|(x, &n)| (x.clone(), n))
            .collect();
        Multiset { entries }
    }

    /// Restriction to a single element, as in `G restricted to {t}`.
    pub fn project(&self, element: &T) -> Self
    where
        T: Clone,
    {
        Multiset::with_count(element.clone(), self.count(element))
    }

    /// True when the supports are disjoint.
    pub fn disjoint_support(&self, other: &Self) -> bool {
        self.elements().all(|x| !other.contains(x))
    }

    /// Elements present in both, in element order.
    pub fn common_elements<'a>(&'a self, other: &'a Self) -> impl Iterator<Item = &'a T> {
        self.elements().filter(move |x| other.contains(x))
    }
}

impl<T: Ord> FromIterator<(T, u64)> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = (T, u64)>>(iter: I) -> Self {
        let mut result = Multiset::new();
        for (x, n) in iter {
            result.insert(x, n);
        }
        result
    }
}

impl<T: Ord> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut result = Multiset::new();
        for x in iter {
            result.insert(x, 1);
        }
        result
    }
}

impl<T: Ord + fmt::Debug> fmt::Debug for Multiset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (x, n)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x:?}:{n}")?;
        }
        write!(f, "}}")
    }
}
