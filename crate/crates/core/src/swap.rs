//! The swap transformation on processes, swapping equivalence, the prefix
//! order on swap classes, and the run of a finite process.
//!
//! Swapping exchanges the outgoing arcs of two causally unordered place
//! occurrences that map to the same host place. Its reflexive-transitive
//! closure identifies processes that differ only in which interchangeable
//! token a transition consumed.
//!
//! Deciding the closure directly means a breadth-first search over
//! isomorphism classes. The default decision route instead hops to the
//! sequence level: two processes are swap-equivalent exactly when their
//! linearisations are trace-equivalent, and the trace side is a far smaller
//! search space. The direct search is kept as an independent oracle.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::net::{Net, Word};
use crate::process::{are_isomorphic, build_process, canonical_key, OccKey, Process, TokenPolicy};
use crate::traces::{
    class_leq, enumerate_runs, trace_class, trace_equivalent, FiniteRun, TraceClass,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwapError {
    #[error("unknown place occurrence `{0}`")]
    UnknownOccurrence(String),
    #[error("occurrences map to different places ({0} vs {1})")]
    LabelMismatch(String, String),
    #[error("occurrences {0} and {1} are causally ordered")]
    CausallyOrdered(String, String),
}

/// How to decide swapping equivalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwapMethod {
    /// Reduce to trace equivalence of linearisations.
    #[default]
    ViaTraces,
    /// Breadth-first closure of single swaps over canonical isomorphism
    /// representatives.
    DirectBfs,
}

fn show(p: &Process, key: &OccKey) -> String {
    format!("{}.{}", p.net().name(key.host), key.birth)
}

/// Exchanges the outgoing arcs of place occurrences `x` and `y`.
///
/// Requires both occurrences to map to the same host place and to be
/// causally unordered. The result is again a process of the same net.
pub fn swap(p: &Process, x: &OccKey, y: &OccKey) -> Result<Process, SwapError> {
    for key in [x, y] {
        if p.place_view(key).is_none() {
            return Err(SwapError::UnknownOccurrence(show(p, key)));
        }
    }
    if x.host != y.host {
        return Err(SwapError::LabelMismatch(show(p, x), show(p, y)));
    }
    if p.places_causally_ordered(x, y)
        .expect("both occurrences exist")
    {
        return Err(SwapError::CausallyOrdered(show(p, x), show(p, y)));
    }
    Ok(p.with_exchanged_consumers(x, y))
}

/// All unordered pairs of distinct place occurrences on which `swap` is
/// defined.
fn admissible_pairs(p: &Process) -> Vec<(OccKey, OccKey)> {
    let views = p.place_views();
    let mut by_host: BTreeMap<_, Vec<OccKey>> = BTreeMap::new();
    for v in &views {
        by_host.entry(v.key.host).or_default().push(v.key);
    }
    let mut pairs = Vec::new();
    for group in by_host.values() {
        for (i, &x) in group.iter().enumerate() {
            for &y in &group[i + 1..] {
                if !p.places_causally_ordered(&x, &y).expect("keys exist") {
                    pairs.push((x, y));
                }
            }
        }
    }
    pairs
}

/// One-step swapping equivalence: some admissible swap of `p` is
/// isomorphic to `q`. Reflexive, since the identity swap is admissible.
pub fn one_step_equiv(p: &Process, q: &Process) -> bool {
    if !p.same_net(q) || p.transition_hosts() != q.transition_hosts() {
        return false;
    }
    if are_isomorphic(p, q) {
        return true;
    }
    admissible_pairs(p)
        .into_iter()
        .any(|(x, y)| are_isomorphic(&p.with_exchanged_consumers(&x, &y), q))
}

/// Swapping equivalence of finite processes of the same net.
pub fn swap_equivalent(p: &Process, q: &Process, method: SwapMethod) -> bool {
    if !p.same_net(q) || p.transition_hosts() != q.transition_hosts() {
        return false;
    }
    match method {
        SwapMethod::ViaTraces => {
            let sigma = p.some_linearisation();
            let rho = q.some_linearisation();
            trace_equivalent(p.net(), &sigma, &rho).expect("linearisations are firing sequences")
        }
        SwapMethod::DirectBfs => {
            let target = canonical_key(q);
            let start_key = canonical_key(p);
            if start_key == target {
                return true;
            }
            let mut seen = BTreeSet::from([start_key]);
            let mut queue = VecDeque::from([p.clone()]);
            while let Some(current) = queue.pop_front() {
                for (x, y) in admissible_pairs(&current) {
                    let next = current.with_exchanged_consumers(&x, &y);
                    let key = canonical_key(&next);
                    if key == target {
                        return true;
                    }
                    if seen.insert(key) {
                        queue.push_back(next);
                    }
                }
            }
            false
        }
    }
}

/// Reference to a swap-equivalence class of finite processes.
///
/// The canonical representative is the oldest-first process built from the
/// least member of the corresponding trace class; two references are equal
/// exactly when their classes coincide.
#[derive(Debug, Clone)]
pub struct BdClassRef {
    class: TraceClass,
    canonical: Process,
}

impl BdClassRef {
    fn from_class(net: &Arc<Net>, class: TraceClass) -> BdClassRef {
        let canonical = build_process(net, class.representative(), &TokenPolicy::OldestFirst)
            .expect("class members are firing sequences");
        BdClassRef { class, canonical }
    }

    /// The swap class of a finite process.
    pub fn of_process(p: &Process) -> BdClassRef {
        let class = trace_class(p.net(), &p.some_linearisation())
            .expect("linearisations are firing sequences");
        BdClassRef::from_class(p.net(), class)
    }

    pub fn canonical_process(&self) -> &Process {
        &self.canonical
    }

    /// The trace class the bijection with sequence classes assigns to this
    /// swap class.
    pub fn trace_class(&self) -> &TraceClass {
        &self.class
    }

    pub fn representative_word(&self) -> &Word {
        self.class.representative()
    }

    pub fn transition_count(&self) -> usize {
        self.class.word_len()
    }
}

impl PartialEq for BdClassRef {
    fn eq(&self, other: &Self) -> bool {
        self.canonical.same_net(&other.canonical) && self.class == other.class
    }
}

impl Eq for BdClassRef {}

/// Prefix order on swap classes, decided through the order-preserving
/// bijection with trace classes.
pub fn bd_class_leq(smaller: &BdClassRef, bigger: &BdClassRef) -> bool {
    smaller.canonical.same_net(&bigger.canonical) && class_leq(&smaller.class, &bigger.class)
}

/// Prefix order on swap classes, decided directly on the process side:
/// search the swap closure of `bigger` for a member with a prefix
/// swap-equivalent to `smaller`. Independent of the trace route; intended
/// as its cross-check at small scale.
pub fn bd_class_leq_direct(smaller: &Process, bigger: &Process) -> bool {
    if !smaller.same_net(bigger) {
        return false;
    }
    let want_hosts = smaller.transition_hosts();
    let want_len = smaller.transition_count();

    let mut seen = BTreeSet::from([canonical_key(bigger)]);
    let mut queue = VecDeque::from([bigger.clone()]);
    while let Some(member) = queue.pop_front() {
        for keep in member.downward_closed_sets() {
            if keep.len() != want_len {
                continue;
            }
            let prefix = member
                .prefix_by_transitions(&keep)
                .expect("downward closed by construction");
            if prefix.transition_hosts() == want_hosts
                && swap_equivalent(&prefix, smaller, SwapMethod::DirectBfs)
            {
                return true;
            }
        }
        for (x, y) in admissible_pairs(&member) {
            let next = member.with_exchanged_consumers(&x, &y);
            let key = canonical_key(&next);
            if seen.insert(key) {
                queue.push_back(next);
            }
        }
    }
    false
}

/// A finite, prefix-closed, directed set of swap classes: the run of a
/// finite process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteBdRun {
    classes: BTreeMap<Word, BdClassRef>,
}

impl FiniteBdRun {
    pub fn classes(&self) -> impl Iterator<Item = &BdClassRef> {
        self.classes.values()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn contains(&self, class: &BdClassRef) -> bool {
        self.classes.contains_key(class.representative_word())
    }

    /// Membership by trace-class representative.
    pub fn contains_rep(&self, representative: &Word) -> bool {
        self.classes.contains_key(representative)
    }

    /// The class every other class of this run is a prefix of.
    pub fn top(&self) -> &BdClassRef {
        self.classes
            .values()
            .max_by_key(|c| c.transition_count())
            .expect("runs are never empty")
    }
}

/// The downward closure of the swap classes of all prefixes of a finite
/// process. For finite processes this is exactly the set of classes below
/// the class of the process itself.
pub fn bdify(p: &Process) -> FiniteBdRun {
    let net = p.net();
    let top =
        trace_class(net, &p.some_linearisation()).expect("linearisations are firing sequences");
    let run = FiniteRun::of_class(net, &top);
    let classes = run
        .classes()
        .map(|c| {
            let reference = BdClassRef::from_class(net, c.clone());
            (reference.representative_word().clone(), reference)
        })
        .collect();
    FiniteBdRun { classes }
}

/// Bound-qualified uniqueness of the maximal classes of a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uniqueness {
    Unique,
    Multiple,
    /// The exploration was truncated, so currently-maximal classes might
    /// still merge under longer sequences.
    Unknown,
}

impl std::fmt::Display for Uniqueness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Uniqueness::Unique => write!(f, "unique"),
            Uniqueness::Multiple => write!(f, "multiple"),
            Uniqueness::Unknown => write!(f, "unknown"),
        }
    }
}

/// Swap classes of maximal processes reachable within a depth bound.
#[derive(Debug, Clone)]
pub struct MaximalProcesses {
    /// One reference per maximal-within-bound class.
    pub classes: Vec<BdClassRef>,
    pub verdict: Uniqueness,
    pub truncated: bool,
}

/// Enumerates the swap classes that are maximal within `depth`, through the
/// bijection with trace classes.
pub fn maximal_processes(net: &Arc<Net>, depth: usize) -> MaximalProcesses {
    let runs = enumerate_runs(net, depth);
    let classes: Vec<BdClassRef> = runs
        .maximal_classes()
        .map(|c| BdClassRef::from_class(net, c.clone()))
        .collect();
    let verdict = if runs.truncated {
        Uniqueness::Unknown
    } else if classes.len() == 1 {
        Uniqueness::Unique
    } else {
        Uniqueness::Multiple
    };
    MaximalProcesses {
        classes,
        verdict,
        truncated: runs.truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{net_a, net_b, net_c};
    use crate::process::{empty_process, validate_process};

    fn w(net: &Net, text: &str) -> Word {
        net.parse_word(text).unwrap()
    }

    fn key(net: &Net, name: &str, birth: u32) -> OccKey {
        OccKey {
            host: net.lookup(name).unwrap(),
            birth,
        }
    }

    fn left_process() -> Process {
        let a = net_a();
        build_process(&a, &w(&a, "a b c"), &TokenPolicy::OldestFirst).unwrap()
    }

    fn right_process() -> Process {
        let a = net_a();
        build_process(
            &a,
            &w(&a, "a b c"),
            &TokenPolicy::Explicit(vec![0, 0, 0, 1]),
        )
        .unwrap()
    }

    #[test]
    fn swapping_the_buffer_tokens_gives_the_other_process() {
        let a = net_a();
        let left = left_process();
        let swapped = swap(&left, &key(&a, "4", 0), &key(&a, "4", 1)).unwrap();
        assert!(are_isomorphic(&swapped, &right_process()));
        assert!(!are_isomorphic(&swapped, &left));
    }

    #[test]
    fn self_swap_is_identity() {
        let a = net_a();
        let left = left_process();
        let same = swap(&left, &key(&a, "4", 0), &key(&a, "4", 0)).unwrap();
        assert_eq!(same, left);
    }

    #[test]
    fn swap_preconditions() {
        let a = net_a();
        let left = left_process();
        let err = swap(&left, &key(&a, "4", 0), &key(&a, "5", 0)).unwrap_err();
        assert!(matches!(err, SwapError::LabelMismatch(..)));

        let err = swap(&left, &key(&a, "4", 5), &key(&a, "4", 0)).unwrap_err();
        assert!(matches!(err, SwapError::UnknownOccurrence(..)));

        // a chain s -> t -> s -> t reuses the same host place causally
        let chain = Arc::new(
            crate::net::NetBuilder::new()
                .place("s", 1)
                .transition("t")
                .arc("s", "t", 1)
                .arc("t", "s", 1)
                .build()
                .unwrap(),
        );
        let p = build_process(&chain, &w(&chain, "t t"), &TokenPolicy::OldestFirst).unwrap();
        let err = swap(&p, &key(&chain, "s", 0), &key(&chain, "s", 1)).unwrap_err();
        assert!(matches!(err, SwapError::CausallyOrdered(..)));
    }

    #[test]
    fn swap_is_an_involution_and_preserves_validity() {
        let a = net_a();
        let left = left_process();
        let once = swap(&left, &key(&a, "4", 0), &key(&a, "4", 1)).unwrap();
        let twice = swap(&once, &key(&a, "4", 0), &key(&a, "4", 1)).unwrap();
        assert_eq!(twice, left);
        validate_process(&a, &once.sketch()).unwrap();
    }

    #[test]
    fn one_step_equivalence() {
        let left = left_process();
        let right = right_process();
        assert!(one_step_equiv(&left, &right));
        assert!(one_step_equiv(&right, &left));
        assert!(one_step_equiv(&left, &left));

        let a = net_a();
        let ab = build_process(&a, &w(&a, "a b"), &TokenPolicy::OldestFirst).unwrap();
        assert!(!one_step_equiv(&ab, &left));
    }

    #[test]
    fn swap_equivalence_both_methods() {
        let left = left_process();
        let right = right_process();
        for method in [SwapMethod::ViaTraces, SwapMethod::DirectBfs] {
            assert!(swap_equivalent(&left, &right, method));
            assert!(swap_equivalent(&left, &left, method));
        }

        let a = net_a();
        let ab = build_process(&a, &w(&a, "a b"), &TokenPolicy::OldestFirst).unwrap();
        for method in [SwapMethod::ViaTraces, SwapMethod::DirectBfs] {
            assert!(!swap_equivalent(&ab, &left, method));
        }
    }

    #[test]
    fn bd_class_prefix_order() {
        let a = net_a();
        let ab = BdClassRef::of_process(
            &build_process(&a, &w(&a, "a b"), &TokenPolicy::OldestFirst).unwrap(),
        );
        let left = BdClassRef::of_process(&left_process());
        let right = BdClassRef::of_process(&right_process());
        assert_eq!(left, right);
        assert!(bd_class_leq(&ab, &left));
        assert!(bd_class_leq(&ab, &ab));
        assert!(!bd_class_leq(&left, &ab));
    }

    #[test]
    fn direct_prefix_search_agrees() {
        let a = net_a();
        let ab = build_process(&a, &w(&a, "a b"), &TokenPolicy::OldestFirst).unwrap();
        let left = left_process();
        assert!(bd_class_leq_direct(&ab, &left));
        assert!(!bd_class_leq_direct(&left, &ab));

        let c = net_c();
        let t = build_process(&c, &w(&c, "t"), &TokenPolicy::OldestFirst).unwrap();
        let u = build_process(&c, &w(&c, "u"), &TokenPolicy::OldestFirst).unwrap();
        assert!(!bd_class_leq_direct(&t, &u));
        assert!(!bd_class_leq_direct(&u, &t));
    }

    #[test]
    fn bdify_of_the_empty_process() {
        let c = net_c();
        let run = bdify(&empty_process(&c));
        assert_eq!(run.class_count(), 1);
    }

    #[test]
    fn bdify_is_the_same_for_swap_equivalent_processes() {
        let run_left = bdify(&left_process());
        let run_right = bdify(&right_process());
        assert_eq!(run_left, run_right);
    }

    /// Oracle for the run of the three-transition process: enumerate the
    /// prefixes of both maximal processes, dedupe by swapping equivalence,
    /// then close downwards under the class prefix order.
    #[test]
    fn bdify_content_matches_prefix_enumeration() {
        let a = net_a();
        let run = bdify(&left_process());

        let mut expected: Vec<Process> = Vec::new();
        for p in [left_process(), right_process()] {
            for keep in p.downward_closed_sets() {
                let prefix = p.prefix_by_transitions(&keep).unwrap();
                if !expected
                    .iter()
                    .any(|q| swap_equivalent(q, &prefix, SwapMethod::DirectBfs))
                {
                    expected.push(prefix);
                }
            }
        }
        // every prefix class is in the run
        for p in &expected {
            assert!(run.contains(&BdClassRef::of_process(p)));
        }
        // the run only holds classes below the top, reps in normal form
        let reps: BTreeSet<String> = run
            .classes()
            .map(|c| a.show_word(c.representative_word()))
            .collect();
        let expected_reps: BTreeSet<String> = ["", "a", "b", "a b", "a c", "b c", "a b c"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(reps, expected_reps);
        assert_eq!(run.class_count(), 7);
    }

    #[test]
    fn bdify_is_prefix_closed_and_directed() {
        let run = bdify(&left_process());
        let top = run.top();
        for class in run.classes() {
            assert!(bd_class_leq(class, top));
            // prefix-closure at the class level: every class of a prefix of
            // the canonical member is present
            for keep in class.canonical_process().downward_closed_sets() {
                let prefix = class
                    .canonical_process()
                    .prefix_by_transitions(&keep)
                    .unwrap();
                assert!(run.contains(&BdClassRef::of_process(&prefix)));
            }
        }
    }

    #[test]
    fn maximal_process_classes_of_the_fixtures() {
        let a = net_a();
        let result = maximal_processes(&a, 3);
        assert_eq!(result.classes.len(), 1);
        assert_eq!(result.verdict, Uniqueness::Unique);

        let b = net_b();
        let result = maximal_processes(&b, 4);
        assert_eq!(result.classes.len(), 1);
        assert_eq!(result.verdict, Uniqueness::Unique);

        let c = net_c();
        let result = maximal_processes(&c, 1);
        assert_eq!(result.classes.len(), 2);
        assert_eq!(result.verdict, Uniqueness::Multiple);
    }

    #[test]
    fn truncated_exploration_gives_unknown() {
        let b = net_b();
        let result = maximal_processes(&b, 2);
        assert_eq!(result.verdict, Uniqueness::Unknown);
        assert!(result.truncated);
    }
}
