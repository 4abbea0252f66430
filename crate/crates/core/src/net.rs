//! Place/transition nets with weighted arcs and step firing.
//!
//! A net is immutable once built. Identifiers are interned in lexicographic
//! order of their names, so `Ident`'s derived ordering is the name ordering
//! and every downstream canonical choice (BFS expansion order, multiset
//! iteration, word comparison) is fixed by it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::multiset::Multiset;

/// Interned name of a place or transition. Ordering follows the name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(u32);

/// A marking: multiset over the places of a net.
pub type Marking = Multiset<Ident>;

/// A step: finite non-empty multiset over the transitions of a net.
pub type Step = Multiset<Ident>;

/// A word over transition identifiers.
pub type Word = Vec<Ident>;

/// A structural defect found while building a net.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetIssue {
    #[error("identifier `{0}` is declared as both place and transition")]
    NotDisjoint(String),
    #[error("duplicate declaration of place `{0}`")]
    DuplicatePlace(String),
    #[error("duplicate declaration of transition `{0}`")]
    DuplicateTransition(String),
    #[error("transition `{0}` has an empty preset")]
    EmptyPreset(String),
    #[error("arc {0} -> {1} has zero weight")]
    ZeroWeight(String, String),
    #[error("duplicate arc {0} -> {1}")]
    DuplicateArc(String, String),
    #[error("arc {0} -> {1} does not connect a place with a transition")]
    SameSortArc(String, String),
    #[error("arc endpoint `{0}` is not declared")]
    UnknownEndpoint(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("invalid net: {}", issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { issues: Vec<NetIssue> },
    #[error("`{0}` is not an element of the net")]
    UnknownElement(String),
    #[error("`{0}` is not a transition of the net")]
    NotATransition(String),
    #[error("step {0} is not enabled")]
    NotEnabled(String),
    #[error("empty step")]
    EmptyStep,
    #[error("transition `{transition}` not enabled at position {position}")]
    SequenceStuck { position: usize, transition: String },
}

/// Raw net description, as produced by a parser or generator.
#[derive(Debug, Clone, Default)]
pub struct NetBuilder {
    places: Vec<(String, u64)>,
    transitions: Vec<String>,
    arcs: Vec<(String, String, u64)>,
}

impl NetBuilder {
    pub fn new() -> Self {
        NetBuilder::default()
    }

    pub fn place(mut self, name: &str, tokens: u64) -> Self {
        self.places.push((name.to_string(), tokens));
        self
    }

    pub fn transition(mut self, name: &str) -> Self {
        self.transitions.push(name.to_string());
        self
    }

    pub fn arc(mut self, from: &str, to: &str, weight: u64) -> Self {
        self.arcs.push((from.to_string(), to.to_string(), weight));
        self
    }

    /// Validates the description and interns identifiers.
    ///
    /// All violations are reported, not just the first.
    pub fn build(self) -> Result<Net, NetError> {
        let mut issues = Vec::new();

        let mut names: Vec<String> = Vec::new();
        names.extend(self.places.iter().map(|(n, _)| n.clone()));
        names.extend(self.transitions.iter().cloned());
        names.sort();
        names.dedup();

        let index: BTreeMap<String, Ident> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), Ident(i as u32)))
            .collect();

        let mut place_set: BTreeSet<Ident> = BTreeSet::new();
        let mut seen_places: BTreeSet<&str> = BTreeSet::new();
        for (name, _) in &self.places {
            if !seen_places.insert(name) {
                issues.push(NetIssue::DuplicatePlace(name.clone()));
            }
            place_set.insert(index[name]);
        }
        let mut transition_set: BTreeSet<Ident> = BTreeSet::new();
        let mut seen_transitions: BTreeSet<&str> = BTreeSet::new();
        for name in &self.transitions {
            if !seen_transitions.insert(name) {
                issues.push(NetIssue::DuplicateTransition(name.clone()));
            }
            if seen_places.contains(name.as_str()) {
                issues.push(NetIssue::NotDisjoint(name.clone()));
            }
            transition_set.insert(index[name]);
        }

        let mut flow: BTreeMap<(Ident, Ident), u64> = BTreeMap::new();
        for (from, to, weight) in &self.arcs {
            let (fi, ti) = match (index.get(from), index.get(to)) {
                (Some(&f), Some(&t)) => (f, t),
                (f, t) => {
                    if f.is_none() {
                        issues.push(NetIssue::UnknownEndpoint(from.clone()));
                    }
                    if t.is_none() {
                        issues.push(NetIssue::UnknownEndpoint(to.clone()));
                    }
                    continue;
                }
            };
            let from_is_place = place_set.contains(&fi);
            let to_is_place = place_set.contains(&ti);
            if from_is_place == to_is_place {
                issues.push(NetIssue::SameSortArc(from.clone(), to.clone()));
                continue;
            }
            if *weight == 0 {
                issues.push(NetIssue::ZeroWeight(from.clone(), to.clone()));
                continue;
            }
            if flow.insert((fi, ti), *weight).is_some() {
                issues.push(NetIssue::DuplicateArc(from.clone(), to.clone()));
            }
        }

        for &t in &transition_set {
            let has_pre = flow.keys().any(|&(_, to)| to == t);
            if !has_pre {
                issues.push(NetIssue::EmptyPreset(names[t.0 as usize].clone()));
            }
        }

        if !issues.is_empty() {
            return Err(NetError::Invalid { issues });
        }

        let mut initial = Marking::new();
        for (name, tokens) in &self.places {
            initial.insert(index[name], *tokens);
        }

        let mut pre: BTreeMap<Ident, Multiset<Ident>> = BTreeMap::new();
        let mut post: BTreeMap<Ident, Multiset<Ident>> = BTreeMap::new();
        for (&(from, to), &w) in &flow {
            post.entry(from).or_default().insert(to, w);
            pre.entry(to).or_default().insert(from, w);
        }

        Ok(Net {
            names,
            places: place_set,
            transitions: transition_set,
            flow,
            initial,
            pre,
            post,
        })
    }
}

/// An immutable place/transition net with an initial marking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    names: Vec<String>,
    places: BTreeSet<Ident>,
    transitions: BTreeSet<Ident>,
    flow: BTreeMap<(Ident, Ident), u64>,
    initial: Marking,
    pre: BTreeMap<Ident, Multiset<Ident>>,
    post: BTreeMap<Ident, Multiset<Ident>>,
}

impl Net {
    pub fn name(&self, id: Ident) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<Ident> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| Ident(i as u32))
    }

    pub fn places(&self) -> impl Iterator<Item = Ident> + '_ {
        self.places.iter().copied()
    }

    pub fn transitions(&self) -> impl Iterator<Item = Ident> + '_ {
        self.transitions.iter().copied()
    }

    pub fn is_place(&self, id: Ident) -> bool {
        self.places.contains(&id)
    }

    pub fn is_transition(&self, id: Ident) -> bool {
        self.transitions.contains(&id)
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn arc_weight(&self, from: Ident, to: Ident) -> u64 {
        self.flow.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn arcs(&self) -> impl Iterator<Item = (Ident, Ident, u64)> + '_ {
        self.flow.iter().map(|(&(f, t), &w)| (f, t, w))
    }

    /// Resolves a transition name, failing when unknown or a place.
    pub fn transition(&self, name: &str) -> Result<Ident, NetError> {
        match self.lookup(name) {
            Some(id) if self.is_transition(id) => Ok(id),
            Some(_) => Err(NetError::NotATransition(name.to_string())),
            None => Err(NetError::UnknownElement(name.to_string())),
        }
    }

    /// Parses a whitespace-separated word of transition names.
    pub fn parse_word(&self, text: &str) -> Result<Word, NetError> {
        text.split_whitespace()
            .map(|n| self.transition(n))
            .collect()
    }

    fn empty() -> &'static Multiset<Ident> {
        static EMPTY: std::sync::OnceLock<Multiset<Ident>> = std::sync::OnceLock::new();
        EMPTY.get_or_init(Multiset::new)
    }

    /// Preset of a single element: incoming arc weights.
    pub fn preset_of(&self, x: Ident) -> &Multiset<Ident> {
        self.pre.get(&x).unwrap_or_else(|| Self::empty())
    }

    /// Postset of a single element: outgoing arc weights.
    pub fn postset_of(&self, x: Ident) -> &Multiset<Ident> {
        self.post.get(&x).unwrap_or_else(|| Self::empty())
    }

    /// Preset of a multiset: the weighted sum of element presets.
    pub fn preset(&self, xs: &Multiset<Ident>) -> Result<Multiset<Ident>, NetError> {
        let mut result = Multiset::new();
        for (&x, n) in xs.iter() {
            self.check_element(x)?;
            result = result.sum(&self.preset_of(x).scale(n));
        }
        Ok(result)
    }

    /// Postset of a multiset: the weighted sum of element postsets.
    pub fn postset(&self, xs: &Multiset<Ident>) -> Result<Multiset<Ident>, NetError> {
        let mut result = Multiset::new();
        for (&x, n) in xs.iter() {
            self.check_element(x)?;
            result = result.sum(&self.postset_of(x).scale(n));
        }
        Ok(result)
    }

    fn check_element(&self, x: Ident) -> Result<(), NetError> {
        if (x.0 as usize) < self.names.len() {
            Ok(())
        } else {
            Err(NetError::UnknownElement(format!("#{}", x.0)))
        }
    }

    /// A step is enabled when its combined preset fits in the marking.
    pub fn enabled(&self, marking: &Marking, step: &Step) -> bool {
        match self.preset(step) {
            Ok(pre) => pre.leq(marking),
            Err(_) => false,
        }
    }

    /// Fires an enabled step: `(M - pre(G)) + post(G)`.
    pub fn fire_step(&self, marking: &Marking, step: &Step) -> Result<Marking, NetError> {
        if step.is_empty() {
            return Err(NetError::EmptyStep);
        }
        let pre = self.preset(step)?;
        if !pre.leq(marking) {
            return Err(NetError::NotEnabled(self.show_multiset(step)));
        }
        let post = self.postset(step)?;
        Ok(marking.monus(&pre).sum(&post))
    }

    /// Fires a word transition by transition; reports the first stuck position.
    pub fn fire_sequence(&self, marking: &Marking, word: &[Ident]) -> Result<Marking, NetError> {
        let mut current = marking.clone();
        for (i, &t) in word.iter().enumerate() {
            if !self.is_transition(t) {
                return Err(NetError::NotATransition(self.name(t).to_string()));
            }
            let step = Multiset::singleton(t);
            if !self.enabled(&current, &step) {
                return Err(NetError::SequenceStuck {
                    position: i + 1,
                    transition: self.name(t).to_string(),
                });
            }
            current = self.fire_step(&current, &step)?;
        }
        Ok(current)
    }

    /// True when `word` can fire from the initial marking.
    pub fn is_firing_sequence(&self, word: &[Ident]) -> bool {
        self.fire_sequence(&self.initial, word).is_ok()
    }

    /// Transitions enabled (as singletons) at `marking`, in identifier order.
    pub fn enabled_transitions(&self, marking: &Marking) -> Vec<Ident> {
        self.transitions()
            .filter(|&t| self.preset_of(t).leq(marking))
            .collect()
    }

    /// Breadth-first bounded exploration of the reachable markings.
    ///
    /// States are generated by singleton firings in identifier order, so the
    /// result is a pure function of the inputs. A marking whose expansion is
    /// cut off (depth reached while something is still enabled, or a place
    /// above `max_tokens`) sets the truncation flag but is still reported.
    pub fn explore(&self, max_depth: usize, max_tokens: u64) -> Exploration {
        let mut seen: BTreeSet<Marking> = BTreeSet::new();
        let mut states: Vec<ReachedMarking> = Vec::new();
        let mut queue: VecDeque<(Marking, Word)> = VecDeque::new();
        let mut truncated = false;

        seen.insert(self.initial.clone());
        queue.push_back((self.initial.clone(), Vec::new()));

        while let Some((marking, witness)) = queue.pop_front() {
            let over_tokens = marking.iter().any(|(_, n)| n > max_tokens);
            let enabled = self.enabled_transitions(&marking);
            states.push(ReachedMarking {
                marking: marking.clone(),
                witness: witness.clone(),
            });
            if over_tokens || witness.len() >= max_depth {
                if !enabled.is_empty() {
                    truncated = true;
                }
                continue;
            }
            for t in enabled {
                let next = self
                    .fire_step(&marking, &Multiset::singleton(t))
                    .expect("enabled transition must fire");
                if seen.insert(next.clone()) {
                    let mut w = witness.clone();
                    w.push(t);
                    queue.push_back((next, w));
                }
            }
        }

        Exploration { states, truncated }
    }

    /// Renders a multiset in identifier names, e.g. `{p:2, q}`.
    pub fn show_multiset(&self, m: &Multiset<Ident>) -> String {
        let mut out = String::from("{");
        for (i, (&x, n)) in m.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(self.name(x));
            if n > 1 {
                out.push_str(&format!(":{n}"));
            }
        }
        out.push('}');
        out
    }

    /// Renders a word as space-separated transition names.
    pub fn show_word(&self, word: &[Ident]) -> String {
        word.iter()
            .map(|&t| self.name(t))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A reachable marking together with one witness firing sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachedMarking {
    pub marking: Marking,
    pub witness: Word,
}

/// Result of bounded exploration, in BFS discovery order.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub states: Vec<ReachedMarking>,
    pub truncated: bool,
}

impl Exploration {
    pub fn markings(&self) -> impl Iterator<Item = &Marking> {
        self.states.iter().map(|s| &s.marking)
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{net_a, net_b, net_c};

    /// Independent firing oracle: per-place integer arithmetic straight off
    /// the arc weights, no multiset algebra involved.
    fn naive_fire(net: &Net, word: &[Ident]) -> Option<BTreeMap<Ident, i64>> {
        let mut tokens: BTreeMap<Ident, i64> = net
            .places()
            .map(|s| (s, net.initial_marking().count(&s) as i64))
            .collect();
        for &t in word {
            for s in net.places() {
                if tokens[&s] < net.arc_weight(s, t) as i64 {
                    return None;
                }
            }
            for s in net.places() {
                let delta = net.arc_weight(t, s) as i64 - net.arc_weight(s, t) as i64;
                *tokens.get_mut(&s).unwrap() += delta;
            }
        }
        Some(tokens)
    }

    fn marking_of(net: &Net, pairs: &[(&str, u64)]) -> Marking {
        pairs
            .iter()
            .map(|(name, n)| (net.lookup(name).unwrap(), *n))
            .collect()
    }

    fn step_of(net: &Net, names: &[&str]) -> Step {
        names.iter().map(|n| net.transition(n).unwrap()).collect()
    }

    fn assert_matches_naive(net: &Net, word: &[Ident]) {
        let naive = naive_fire(net, word).expect("oracle says firable");
        let fired = net.fire_sequence(net.initial_marking(), word).unwrap();
        for (s, n) in naive {
            assert_eq!(fired.count(&s) as i64, n, "place {}", net.name(s));
        }
    }

    #[test]
    fn fixture_nets_validate() {
        net_a();
        net_b();
        net_c();
    }

    #[test]
    fn empty_preset_is_rejected() {
        let err = NetBuilder::new()
            .place("s", 1)
            .transition("t")
            .build()
            .unwrap_err();
        match err {
            NetError::Invalid { issues } => {
                assert!(matches!(issues[0], NetIssue::EmptyPreset(ref n) if n == "t"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn place_transition_clash_is_rejected() {
        let err = NetBuilder::new()
            .place("x", 1)
            .transition("x")
            .arc("x", "x", 1)
            .build()
            .unwrap_err();
        let NetError::Invalid { issues } = err else {
            panic!()
        };
        assert!(issues
            .iter()
            .any(|i| matches!(i, NetIssue::NotDisjoint(n) if n == "x")));
    }

    #[test]
    fn zero_weight_and_duplicate_arcs_are_rejected() {
        let err = NetBuilder::new()
            .place("s", 1)
            .transition("t")
            .arc("s", "t", 0)
            .build()
            .unwrap_err();
        let NetError::Invalid { issues } = err else {
            panic!()
        };
        assert!(issues.iter().any(|i| matches!(i, NetIssue::ZeroWeight(..))));

        let err = NetBuilder::new()
            .place("s", 1)
            .transition("t")
            .arc("s", "t", 1)
            .arc("s", "t", 2)
            .build()
            .unwrap_err();
        let NetError::Invalid { issues } = err else {
            panic!()
        };
        assert!(issues
            .iter()
            .any(|i| matches!(i, NetIssue::DuplicateArc(..))));
    }

    #[test]
    fn preset_of_single_and_multiset() {
        let a = net_a();
        let c = a.transition("c").unwrap();
        assert_eq!(
            a.preset(&Multiset::singleton(c)).unwrap(),
            marking_of(&a, &[("3", 1), ("4", 1)])
        );

        let b = net_b();
        let ab = step_of(&b, &["a", "b"]);
        assert_eq!(
            b.preset(&ab).unwrap(),
            marking_of(&b, &[("p", 2), ("pa", 1), ("pb", 1)])
        );

        assert_eq!(b.preset(&Multiset::new()).unwrap(), Multiset::new());
    }

    #[test]
    fn step_enabledness() {
        let b = net_b();
        let m0 = b.initial_marking();
        assert!(b.enabled(m0, &step_of(&b, &["a", "b"])));
        assert!(!b.enabled(m0, &step_of(&b, &["a", "b", "c"])));

        let c = net_c();
        assert!(!c.enabled(c.initial_marking(), &step_of(&c, &["t", "t"])));
    }

    #[test]
    fn fire_step_examples() {
        let a = net_a();
        let m = a
            .fire_step(a.initial_marking(), &step_of(&a, &["a"]))
            .unwrap();
        assert_eq!(m, marking_of(&a, &[("2", 1), ("3", 1), ("4", 1)]));

        let b = net_b();
        let m = b
            .fire_step(b.initial_marking(), &step_of(&b, &["a", "b"]))
            .unwrap();
        assert_eq!(m, marking_of(&b, &[("pc", 1), ("pd", 1), ("q", 2)]));
    }

    #[test]
    fn self_loop_firing_is_a_fixpoint() {
        let net = NetBuilder::new()
            .place("s", 1)
            .transition("t")
            .arc("s", "t", 1)
            .arc("t", "s", 1)
            .build()
            .unwrap();
        let m = net
            .fire_step(net.initial_marking(), &step_of(&net, &["t"]))
            .unwrap();
        assert_eq!(&m, net.initial_marking());
    }

    #[test]
    fn fire_sequence_matches_per_place_arithmetic() {
        let a = net_a();
        let word = a.parse_word("a b c").unwrap();
        assert_matches_naive(&a, &word);
        // two tokens land on 4 and only one is consumed
        let m = a.fire_sequence(a.initial_marking(), &word).unwrap();
        assert_eq!(m, marking_of(&a, &[("4", 1), ("5", 1)]));

        let b = net_b();
        let word = b.parse_word("a b d c").unwrap();
        assert_matches_naive(&b, &word);
        let m = b.fire_sequence(b.initial_marking(), &word).unwrap();
        assert_eq!(m, marking_of(&b, &[("q", 2)]));
    }

    #[test]
    fn fire_sequence_reports_stuck_position() {
        let c = net_c();
        let word = c.parse_word("t u").unwrap();
        let err = c.fire_sequence(c.initial_marking(), &word).unwrap_err();
        assert_eq!(
            err,
            NetError::SequenceStuck {
                position: 2,
                transition: "u".to_string()
            }
        );
        assert!(naive_fire(&c, &word).is_none());
    }

    /// Independent reachability oracle: depth-bounded recursive enumeration
    /// over the naive firing function.
    fn naive_reachable(net: &Net, depth: usize) -> BTreeSet<Vec<(Ident, i64)>> {
        fn go(
            net: &Net,
            word: &mut Vec<Ident>,
            depth: usize,
            acc: &mut BTreeSet<Vec<(Ident, i64)>>,
        ) {
            let tokens = naive_fire(net, word).unwrap();
            acc.insert(tokens.into_iter().collect());
            if word.len() == depth {
                return;
            }
            for t in net.transitions().collect::<Vec<_>>() {
                word.push(t);
                if naive_fire(net, word).is_some() {
                    go(net, word, depth, acc);
                }
                word.pop();
            }
        }
        let mut acc = BTreeSet::new();
        go(net, &mut Vec::new(), depth, &mut acc);
        acc
    }

    fn full_counts(net: &Net, m: &Marking) -> Vec<(Ident, i64)> {
        net.places().map(|s| (s, m.count(&s) as i64)).collect()
    }

    #[test]
    fn explore_small_nets() {
        let c = net_c();
        let result = c.explore(2, 16);
        let markings: BTreeSet<_> = result.markings().cloned().collect();
        assert_eq!(
            markings,
            [marking_of(&c, &[("s", 1)]), Marking::new()].into()
        );
        assert!(!result.truncated);

        let b = net_b();
        let result = b.explore(0, 16);
        assert_eq!(result.states.len(), 1);
        assert_eq!(&result.states[0].marking, b.initial_marking());
        assert!(result.truncated);
    }

    #[test]
    fn explore_matches_brute_force_enumeration() {
        let a = net_a();
        let expected = naive_reachable(&a, 3);
        let result = a.explore(3, 16);
        let got: BTreeSet<_> = result.markings().map(|m| full_counts(&a, m)).collect();
        assert_eq!(got, expected);
        assert_eq!(result.states.len(), 7);
        assert!(!result.truncated);
    }

    #[test]
    fn explore_witnesses_replay() {
        let b = net_b();
        for state in b.explore(4, 16).states {
            let replayed = b
                .fire_sequence(b.initial_marking(), &state.witness)
                .unwrap();
            assert_eq!(replayed, state.marking);
        }
    }

    #[test]
    fn explore_is_deterministic() {
        let b = net_b();
        let one = b.explore(4, 16);
        let two = b.explore(4, 16);
        assert_eq!(one.states, two.states);
        assert_eq!(one.truncated, two.truncated);
    }

    #[test]
    fn step_implies_both_interleavings() {
        let b = net_b();
        let m0 = b.initial_marking();
        let t = b.transition("a").unwrap();
        let u = b.transition("b").unwrap();
        let step = step_of(&b, &["a", "b"]);
        assert!(b.enabled(m0, &step));
        let direct = b.fire_step(m0, &step).unwrap();
        let tu = b.fire_sequence(m0, &[t, u]).unwrap();
        let ut = b.fire_sequence(m0, &[u, t]).unwrap();
        assert_eq!(direct, tu);
        assert_eq!(direct, ut);
    }

    #[test]
    fn token_bound_truncates() {
        // q accumulates unboundedly
        let net = NetBuilder::new()
            .place("s", 1)
            .place("q", 0)
            .transition("t")
            .arc("s", "t", 1)
            .arc("t", "s", 1)
            .arc("t", "q", 1)
            .build()
            .unwrap();
        let result = net.explore(50, 3);
        assert!(result.truncated);
        assert!(result
            .markings()
            .all(|m| { m.count(&net.lookup("q").unwrap()) <= 4 }));
    }
}
