//! Adjacency of firing sequences, trace classes and runs.
//!
//! Two firing sequences are adjacent when they differ only in the exchange
//! of two neighbouring transitions that were jointly enabled as a step at
//! the exchange point. The closure of adjacency partitions firing sequences
//! into trace classes; prefix-closed directed sets of classes are runs.
//!
//! Adjacency here is semantic, not an alphabet-level independence relation:
//! whether an exchange is allowed depends on the marking reached by the
//! common prefix. Classes are therefore closed eagerly by breadth-first
//! search through the (bounded, same-length) permutation space.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::conflict::{candidate_steps, ConflictWitness};
use crate::multiset::Multiset;
use crate::net::{Ident, Marking, Net, Word};
use crate::verdict::{Bounds, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error(
        "`{word}` is not a firing sequence: `{transition}` not enabled at position {position}"
    )]
    NotFiringSequence {
        word: String,
        position: usize,
        transition: String,
    },
}

fn ensure_firing_sequence(net: &Net, word: &[Ident]) -> Result<(), TraceError> {
    match net.fire_sequence(net.initial_marking(), word) {
        Ok(_) => Ok(()),
        Err(crate::net::NetError::SequenceStuck {
            position,
            transition,
        }) => Err(TraceError::NotFiringSequence {
            word: net.show_word(word),
            position,
            transition,
        }),
        Err(e) => Err(TraceError::NotFiringSequence {
            word: net.show_word(word),
            position: 0,
            transition: e.to_string(),
        }),
    }
}

/// Markings reached by every proper prefix of a firing sequence, index `i`
/// holding the marking before position `i`.
fn prefix_markings(net: &Net, word: &[Ident]) -> Vec<Marking> {
    let mut out = Vec::with_capacity(word.len() + 1);
    let mut m = net.initial_marking().clone();
    out.push(m.clone());
    for &t in word {
        m = net
            .fire_step(&m, &Multiset::singleton(t))
            .expect("member of a trace closure must fire");
        out.push(m.clone());
    }
    out
}

fn exchange_step(a: Ident, b: Ident) -> Multiset<Ident> {
    let mut step = Multiset::singleton(a);
    step.insert(b, 1);
    step
}

/// Adjacency: `left` and `right` decompose as `s t u s'` and `s u t s'`
/// with the step `{t, u}` enabled after `s`.
pub fn adjacent(net: &Net, left: &[Ident], right: &[Ident]) -> Result<bool, TraceError> {
    ensure_firing_sequence(net, left)?;
    ensure_firing_sequence(net, right)?;
    if left.len() != right.len() {
        return Ok(false);
    }
    let markings = prefix_markings(net, left);
    if left == right {
        // exchanging two equal neighbours is allowed when the doubled
        // transition forms an enabled step
        for i in 0..left.len().saturating_sub(1) {
            if left[i] == left[i + 1]
                && net.enabled(&markings[i], &exchange_step(left[i], left[i + 1]))
            {
                return Ok(true);
            }
        }
        return Ok(false);
    }
    let Some(i) = left.iter().zip(right).position(|(a, b)| a != b) else {
        return Ok(false);
    };
    if i + 1 >= left.len()
        || left[i] != right[i + 1]
        || left[i + 1] != right[i]
        || left[i + 2..] != right[i + 2..]
    {
        return Ok(false);
    }
    Ok(net.enabled(&markings[i], &exchange_step(left[i], left[i + 1])))
}

/// Closure of `start` under adjacency; stops early when `target` is found.
fn closure(net: &Net, start: &[Ident], target: Option<&[Ident]>) -> (BTreeSet<Word>, bool) {
    let mut members: BTreeSet<Word> = BTreeSet::new();
    let mut queue: VecDeque<Word> = VecDeque::new();
    members.insert(start.to_vec());
    queue.push_back(start.to_vec());
    if target == Some(start) {
        return (members, true);
    }
    while let Some(word) = queue.pop_front() {
        let markings = prefix_markings(net, &word);
        for i in 0..word.len().saturating_sub(1) {
            if word[i] == word[i + 1] {
                continue;
            }
            if !net.enabled(&markings[i], &exchange_step(word[i], word[i + 1])) {
                continue;
            }
            let mut neighbour = word.clone();
            neighbour.swap(i, i + 1);
            if members.insert(neighbour.clone()) {
                if target == Some(neighbour.as_slice()) {
                    return (members, true);
                }
                queue.push_back(neighbour);
            }
        }
    }
    (members, false)
}

/// An equivalence class of firing sequences under the closure of adjacency.
///
/// All members have the same length and the same transition multiset; the
/// representative is the least member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceClass {
    members: BTreeSet<Word>,
}

impl TraceClass {
    pub fn representative(&self) -> &Word {
        self.members.first().expect("classes are never empty")
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn word_len(&self) -> usize {
        self.representative().len()
    }

    pub fn members(&self) -> impl Iterator<Item = &Word> {
        self.members.iter()
    }

    pub fn contains(&self, word: &[Ident]) -> bool {
        self.members.contains(word)
    }

    pub fn transition_multiset(&self) -> Multiset<Ident> {
        self.representative().iter().copied().collect()
    }
}

/// The trace class of a firing sequence, closed eagerly.
pub fn trace_class(net: &Net, word: &[Ident]) -> Result<TraceClass, TraceError> {
    ensure_firing_sequence(net, word)?;
    let (members, _) = closure(net, word, None);
    Ok(TraceClass { members })
}

/// Whether two firing sequences belong to the same trace class.
/// Fast-rejects on unequal transition multisets.
pub fn trace_equivalent(net: &Net, left: &[Ident], right: &[Ident]) -> Result<bool, TraceError> {
    ensure_firing_sequence(net, left)?;
    ensure_firing_sequence(net, right)?;
    if left.len() != right.len() {
        return Ok(false);
    }
    let multiset = |w: &[Ident]| w.iter().copied().collect::<Multiset<Ident>>();
    if multiset(left) != multiset(right) {
        return Ok(false);
    }
    let (_, found) = closure(net, left, Some(right));
    Ok(found)
}

/// Prefix order on trace classes: some member of `bigger` extends some
/// member of `smaller` literally.
pub fn class_leq(smaller: &TraceClass, bigger: &TraceClass) -> bool {
    let k = smaller.word_len();
    if k > bigger.word_len() {
        return false;
    }
    bigger.members().any(|m| smaller.contains(&m[..k]))
}

/// All trace classes of firing sequences up to a length bound.
#[derive(Debug, Clone)]
pub struct RunEnumeration {
    /// Classes in order of discovery: by word length, then least member.
    pub classes: Vec<TraceClass>,
    /// Indices of classes that are not strict prefixes of another
    /// enumerated class.
    pub maximal: Vec<usize>,
    /// True when some sequence at the length bound can still fire.
    pub truncated: bool,
}

impl RunEnumeration {
    pub fn maximal_classes(&self) -> impl Iterator<Item = &TraceClass> {
        self.maximal.iter().map(|&i| &self.classes[i])
    }
}

/// Enumerates every firing sequence of length at most `depth` and partitions
/// them into trace classes.
pub fn enumerate_runs(net: &Net, depth: usize) -> RunEnumeration {
    // breadth-first word enumeration: (length, lexicographic) order
    let mut words: Vec<Word> = Vec::new();
    let mut truncated = false;
    let mut frontier: VecDeque<(Word, Marking)> =
        VecDeque::from([(Vec::new(), net.initial_marking().clone())]);
    while let Some((word, marking)) = frontier.pop_front() {
        words.push(word.clone());
        let enabled = net.enabled_transitions(&marking);
        if word.len() == depth {
            if !enabled.is_empty() {
                truncated = true;
            }
            continue;
        }
        for t in enabled {
            let mut next = word.clone();
            next.push(t);
            let m = net
                .fire_step(&marking, &Multiset::singleton(t))
                .expect("enabled");
            frontier.push_back((next, m));
        }
    }

    let mut assigned: BTreeSet<Word> = BTreeSet::new();
    let mut classes: Vec<TraceClass> = Vec::new();
    for word in &words {
        if assigned.contains(word) {
            continue;
        }
        let (members, _) = closure(net, word, None);
        assigned.extend(members.iter().cloned());
        classes.push(TraceClass { members });
    }

    let maximal = (0..classes.len())
        .filter(|&i| {
            !(0..classes.len()).any(|j| {
                j != i
                    && classes[i].word_len() < classes[j].word_len()
                    && class_leq(&classes[i], &classes[j])
            })
        })
        .collect();

    RunEnumeration {
        classes,
        maximal,
        truncated,
    }
}

/// A finite run: the prefix-closed, directed set of trace classes below a
/// largest class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteRun {
    net: Arc<Net>,
    /// Classes keyed by representative; includes the largest element.
    classes: BTreeMap<Word, TraceClass>,
    largest: Word,
}

impl FiniteRun {
    /// The run determined by one class: all classes of prefixes of its
    /// members.
    pub fn of_class(net: &Arc<Net>, class: &TraceClass) -> FiniteRun {
        let mut prefixes: BTreeSet<Word> = BTreeSet::new();
        for member in class.members() {
            for k in 0..=member.len() {
                prefixes.insert(member[..k].to_vec());
            }
        }
        let mut classes: BTreeMap<Word, TraceClass> = BTreeMap::new();
        let mut assigned: BTreeSet<Word> = BTreeSet::new();
        for word in &prefixes {
            if assigned.contains(word) {
                continue;
            }
            let (members, _) = closure(net, word, None);
            assigned.extend(members.iter().cloned());
            let class = TraceClass { members };
            classes.insert(class.representative().clone(), class);
        }
        FiniteRun {
            net: net.clone(),
            classes,
            largest: class.representative().clone(),
        }
    }

    pub fn classes(&self) -> impl Iterator<Item = &TraceClass> {
        self.classes.values()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn largest(&self) -> &TraceClass {
        &self.classes[&self.largest]
    }

    /// Whether the class of `word` belongs to this run. Membership is
    /// class-level, so a lookup among all member words suffices.
    pub fn contains_word(&self, word: &[Ident]) -> bool {
        self.classes.values().any(|c| c.contains(word))
    }

    /// Every member word of every class, shortest first.
    pub fn member_words(&self) -> Vec<Word> {
        let mut words: Vec<Word> = self
            .classes
            .values()
            .flat_map(|c| c.members().cloned())
            .collect();
        words.sort_by_key(|w| (w.len(), w.clone()));
        words
    }
}

/// Bounded conflict-freeness of a run: for every member word and every
/// candidate multiset `G` (multiplicities up to `gmax`), if each
/// single-transition branch stays inside the run and is enabled, the whole
/// of `G` must be enabled.
pub fn run_conflict_free(net: &Net, run: &FiniteRun, gmax: u64) -> Verdict<ConflictWitness> {
    let bounds = Bounds::with_gmax(run.largest().word_len(), u64::MAX, gmax);
    for sigma in run.member_words() {
        let marking = net
            .fire_sequence(net.initial_marking(), &sigma)
            .expect("run members are firing sequences");
        for g in candidate_steps(net, &marking, gmax) {
            let premise = g.iter().all(|(&t, count)| {
                let mut extended = sigma.clone();
                extended.extend(std::iter::repeat_n(t, count as usize));
                run.contains_word(&extended)
            });
            if premise && !net.enabled(&marking, &g) {
                return Verdict::violated(
                    ConflictWitness {
                        sequence: sigma,
                        marking,
                        multiset: g,
                    },
                    bounds,
                );
            }
        }
    }
    Verdict::holds(bounds)
}
