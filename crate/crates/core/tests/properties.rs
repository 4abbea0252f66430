//! Property suites over randomized inputs: the algebra laws, firing
//! coherence, construction/linearisation coherence, and the equivalence
//! cross-checks at small scale.

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use ptsem_core::format::{export_process, parse_net, parse_process, write_net, ProcessFormat};
use ptsem_core::generate::{random_net, GenParams};
use ptsem_core::multiset::Multiset;
use ptsem_core::net::{Ident, Net, Word};
use ptsem_core::process::{
    are_isomorphic, build_process, canonical_key, pi_members, validate_process, TokenPolicy,
};
use ptsem_core::swap::{
    bd_class_leq, bdify, one_step_equiv, swap, swap_equivalent, BdClassRef, SwapMethod,
};
use ptsem_core::traces::{class_leq, enumerate_runs, trace_class, trace_equivalent};

type Bag = Multiset<String>;

fn bag() -> impl Strategy<Value = Bag> {
    proptest::collection::btree_map("[a-e]", 1u64..6, 0..5).prop_map(|m| m.into_iter().collect())
}

proptest! {
    #[test]
    fn sum_is_commutative_and_associative(a in bag(), b in bag(), c in bag()) {
        prop_assert_eq!(a.sum(&b), b.sum(&a));
        prop_assert_eq!(a.sum(&b).sum(&c), a.sum(&b.sum(&c)));
        prop_assert_eq!(a.sum(&Bag::new()), a);
    }

    #[test]
    fn monus_undoes_sum(a in bag(), b in bag()) {
        prop_assert_eq!(a.sum(&b).monus(&b), a);
    }

    #[test]
    fn monus_size_under_leq(a in bag(), b in bag()) {
        let bigger = a.sum(&b);
        prop_assert!(a.leq(&bigger));
        prop_assert_eq!(bigger.monus(&a).size(), bigger.size() - a.size());
    }

    #[test]
    fn operations_keep_normal_form(a in bag(), b in bag(), k in 0u64..4) {
        for result in [a.sum(&b), a.monus(&b), a.union(&b), a.scale(k)] {
            prop_assert!(result.iter().all(|(_, n)| n >= 1));
        }
    }

    #[test]
    fn union_bounds_both(a in bag(), b in bag()) {
        let u = a.union(&b);
        prop_assert!(a.leq(&u) && b.leq(&u));
        prop_assert!(u.leq(&a.sum(&b)));
    }
}

/// Small random nets driven by a seed tuple.
fn net_strategy() -> impl Strategy<Value = Arc<Net>> {
    (1usize..=6, 0usize..=4, 0u64..=2, 1u64..=2, any::<u64>()).prop_map(
        |(places, transitions, tokens, weight, seed)| {
            Arc::new(random_net(&GenParams {
                place_count: places,
                transition_count: transitions,
                arc_density: 0.35,
                max_weight: weight,
                max_initial_tokens: tokens,
                seed,
            }))
        },
    )
}

fn firing_words(net: &Net, depth: usize, cap: usize) -> Vec<Word> {
    let mut words = vec![Word::new()];
    let mut frontier = vec![(Word::new(), net.initial_marking().clone())];
    while !frontier.is_empty() && words.len() < cap {
        let mut next = Vec::new();
        for (word, marking) in frontier {
            if word.len() == depth {
                continue;
            }
            for t in net.enabled_transitions(&marking) {
                if words.len() >= cap {
                    return words;
                }
                let mut w = word.clone();
                w.push(t);
                let m = net.fire_step(&marking, &Multiset::singleton(t)).unwrap();
                words.push(w.clone());
                next.push((w, m));
            }
        }
        frontier = next;
    }
    words
}

fn pick<T>(items: &[T], salt: u64) -> &T {
    &items[(salt as usize) % items.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Firing agrees with independent per-place arithmetic.
    #[test]
    fn firing_conserves_tokens(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 4, 30);
        let word = pick(&words, salt);
        let fired = net.fire_sequence(net.initial_marking(), word).unwrap();
        for s in net.places() {
            let mut expected = net.initial_marking().count(&s) as i64;
            for &t in word {
                expected += net.arc_weight(t, s) as i64 - net.arc_weight(s, t) as i64;
            }
            prop_assert_eq!(fired.count(&s) as i64, expected);
        }
    }

    /// An enabled two-transition step admits both interleavings, with the
    /// same final marking.
    #[test]
    fn steps_interleave(net in net_strategy(), salt in any::<u64>()) {
        let transitions: Vec<Ident> = net.transitions().collect();
        if transitions.is_empty() {
            return Ok(());
        }
        let t = *pick(&transitions, salt);
        let u = *pick(&transitions, salt / 7);
        let mut step = Multiset::singleton(t);
        step.insert(u, 1);
        let m0 = net.initial_marking();
        if net.enabled(m0, &step) {
            let direct = net.fire_step(m0, &step).unwrap();
            let tu = net.fire_sequence(m0, &[t, u]).unwrap();
            let ut = net.fire_sequence(m0, &[u, t]).unwrap();
            prop_assert_eq!(&direct, &tu);
            prop_assert_eq!(&direct, &ut);
        }
    }

    /// A word is always among the linearisations of the process built from
    /// it, whatever the policy.
    #[test]
    fn built_processes_linearise_their_word(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 4, 30);
        let word = pick(&words, salt);
        for policy in [TokenPolicy::OldestFirst, TokenPolicy::NewestFirst] {
            let process = build_process(&net, word, &policy).unwrap();
            prop_assert!(process.linearisations().contains(word));
        }
    }

    /// Every enumerated process validates, and every linearisation fires.
    #[test]
    fn pi_members_are_valid_processes(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 3, 20);
        let word = pick(&words, salt);
        let members = pi_members(&net, word, true, 64).unwrap();
        for process in &members.processes {
            let validated = validate_process(&net, &process.sketch()).unwrap();
            prop_assert_eq!(&validated, process);
            for lin in process.linearisations() {
                prop_assert!(net.is_firing_sequence(&lin));
            }
        }
    }

    /// Pairwise isomorphism agrees with canonical-key equality.
    #[test]
    fn isomorphism_matches_canonical_keys(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 3, 15);
        let one = pick(&words, salt);
        let two = pick(&words, salt / 3);
        let p = build_process(&net, one, &TokenPolicy::OldestFirst).unwrap();
        let q = build_process(&net, two, &TokenPolicy::NewestFirst).unwrap();
        prop_assert_eq!(are_isomorphic(&p, &q), canonical_key(&p) == canonical_key(&q));
        prop_assert!(are_isomorphic(&p, &p));
    }

    /// Construction is cumulative: the process of a prefix word is a prefix
    /// of the process of the word.
    #[test]
    fn prefix_words_give_prefix_processes(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 4, 30);
        let word = pick(&words, salt);
        let k = (salt as usize / 11) % (word.len() + 1);
        for policy in [TokenPolicy::OldestFirst, TokenPolicy::NewestFirst] {
            let small = build_process(&net, &word[..k], &policy).unwrap();
            let big = build_process(&net, word, &policy).unwrap();
            prop_assert!(small.is_prefix_of(&big));
            // and the prefix is recovered by restriction
            let recovered = big.prefix_by_transitions(&small.transition_keys()).unwrap();
            prop_assert_eq!(recovered, small);
        }
    }

    /// Swaps are involutions that preserve validity; one-step equivalence
    /// is symmetric.
    #[test]
    fn swap_involution_on_admissible_pairs(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 4, 30);
        let word = pick(&words, salt);
        let process = build_process(&net, word, &TokenPolicy::OldestFirst).unwrap();
        let views = process.place_views();
        let mut checked = 0;
        for (i, a) in views.iter().enumerate() {
            for b in &views[i + 1..] {
                if a.key.host != b.key.host
                    || process.places_causally_ordered(&a.key, &b.key).unwrap()
                {
                    continue;
                }
                let once = swap(&process, &a.key, &b.key).unwrap();
                validate_process(&net, &once.sketch()).unwrap();
                let twice = swap(&once, &a.key, &b.key).unwrap();
                prop_assert_eq!(&twice, &process);
                prop_assert!(one_step_equiv(&process, &once));
                prop_assert!(one_step_equiv(&once, &process));
                checked += 1;
                if checked >= 4 {
                    return Ok(());
                }
            }
        }
    }

    /// The two decision procedures for swapping equivalence agree.
    #[test]
    fn swap_equivalence_methods_agree(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 4, 20);
        let one = pick(&words, salt);
        let two = pick(&words, salt / 5);
        let p = pick(&pi_members(&net, one, true, 32).unwrap().processes, salt / 7).clone();
        let q = pick(&pi_members(&net, two, true, 32).unwrap().processes, salt / 11).clone();
        prop_assert_eq!(
            swap_equivalent(&p, &q, SwapMethod::ViaTraces),
            swap_equivalent(&p, &q, SwapMethod::DirectBfs)
        );
    }

    /// Members of a class carry the same transition multiset; extensions
    /// preserve equivalence.
    #[test]
    fn trace_classes_are_multiset_stable(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 4, 30);
        let word = pick(&words, salt);
        let class = trace_class(&net, word).unwrap();
        let reference: Multiset<Ident> = word.iter().copied().collect();
        for member in class.members() {
            let bag: Multiset<Ident> = member.iter().copied().collect();
            prop_assert_eq!(&bag, &reference);
        }
        // extension stability
        let marking = net.fire_sequence(net.initial_marking(), word).unwrap();
        if let Some(&t) = net.enabled_transitions(&marking).first() {
            let member = pick(&class.members().cloned().collect::<Vec<_>>(), salt / 13).clone();
            let mut left = word.clone();
            left.push(t);
            let mut right = member;
            right.push(t);
            prop_assert!(trace_equivalent(&net, &left, &right).unwrap());
        }
    }

    /// The class prefix order is a partial order on enumerated classes.
    #[test]
    fn class_order_is_a_partial_order(net in net_strategy()) {
        let runs = enumerate_runs(&net, 3);
        let classes = &runs.classes;
        for a in classes {
            prop_assert!(class_leq(a, a));
        }
        for a in classes {
            for b in classes {
                if class_leq(a, b) && class_leq(b, a) {
                    prop_assert_eq!(a, b);
                }
                for c in classes {
                    if class_leq(a, b) && class_leq(b, c) {
                        prop_assert!(class_leq(a, c));
                    }
                }
            }
        }
    }

    /// Same, lifted to swap classes through the bijection.
    #[test]
    fn bd_class_order_is_a_partial_order(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 3, 12);
        let refs: Vec<BdClassRef> = words
            .iter()
            .map(|w| BdClassRef::of_process(&build_process(&net, w, &TokenPolicy::OldestFirst).unwrap()))
            .collect();
        let _ = salt;
        for a in &refs {
            prop_assert!(bd_class_leq(a, a));
        }
        for a in &refs {
            for b in &refs {
                if bd_class_leq(a, b) && bd_class_leq(b, a) {
                    prop_assert_eq!(a, b);
                }
                for c in &refs {
                    if bd_class_leq(a, b) && bd_class_leq(b, c) {
                        prop_assert!(bd_class_leq(a, c));
                    }
                }
            }
        }
    }

    /// Runs of processes are prefix-closed and directed.
    #[test]
    fn bdify_invariants(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 3, 15);
        let word = pick(&words, salt);
        let process = build_process(&net, word, &TokenPolicy::OldestFirst).unwrap();
        let run = bdify(&process);
        let top = run.top();
        for class in run.classes() {
            prop_assert!(bd_class_leq(class, top));
            for member in class.trace_class().members() {
                for k in 0..member.len() {
                    let rep = trace_class(&net, &member[..k]).unwrap().representative().clone();
                    prop_assert!(run.contains_rep(&rep));
                }
            }
        }
    }

    /// Net files round-trip through the canonical writer.
    #[test]
    fn net_files_round_trip(net in net_strategy()) {
        let text = write_net(&net);
        let reparsed = parse_net(&text).unwrap();
        prop_assert_eq!(&reparsed, &*net);
        prop_assert_eq!(write_net(&reparsed), text);
    }

    /// Structured process exports round-trip through the parser and the
    /// validating importer.
    #[test]
    fn process_exports_round_trip(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 4, 20);
        let word = pick(&words, salt);
        let process = build_process(&net, word, &TokenPolicy::OldestFirst).unwrap();
        let text = export_process(&process, ProcessFormat::Structured);
        let sketch = parse_process(&text).unwrap();
        let validated = validate_process(&net, &sketch).unwrap();
        prop_assert_eq!(validated, process);
    }

    /// On structural conflict nets, deciding conflict of a transition set
    /// by pairs agrees with the multiset definition at every explored
    /// marking.
    #[test]
    fn pairwise_reduction_agrees_on_structural_nets(net in net_strategy(), salt in any::<u64>()) {
        let structural = ptsem_core::conflict::check_structural(&net, 6, 12);
        if structural.status != ptsem_core::verdict::Status::HoldsWithinBound {
            return Ok(());
        }
        let transitions: Vec<Ident> = net.transitions().collect();
        if transitions.is_empty() {
            return Ok(());
        }
        let mut set = BTreeSet::new();
        let mut salt = salt;
        for _ in 0..=(salt % 3) {
            set.insert(*pick(&transitions, salt));
            salt /= 3;
        }
        for state in net.explore(4, 12).states {
            let reduced = ptsem_core::conflict::pairwise_conflict_reduction(
                &net,
                &state.marking,
                &set,
                &structural,
            )
            .unwrap();
            let full = ptsem_core::conflict::is_conflict(
                &net,
                &state.marking,
                &set.iter().copied().collect(),
            );
            prop_assert_eq!(reduced, full);
        }
    }

    /// Exploration visits exactly the markings a naive enumeration reaches.
    #[test]
    fn exploration_matches_naive_reachability(net in net_strategy()) {
        let depth = 3;
        let explored: BTreeSet<_> = net.explore(depth, 64).markings().cloned().collect();
        let mut naive: BTreeSet<_> = BTreeSet::new();
        for word in firing_words(&net, depth, usize::MAX) {
            naive.insert(net.fire_sequence(net.initial_marking(), &word).unwrap());
        }
        prop_assert_eq!(explored, naive);
    }
}

/// Definition-literal isomorphism oracle: exhaustively tries every
/// host-respecting bijection of place and transition occurrences and checks
/// that producer and consumer links correspond. Exponential, so callers
/// keep the occurrence counts tiny.
mod iso_oracle {
    use super::*;
    use ptsem_core::process::{OccKey, PlaceView, Process};
    use std::collections::BTreeMap;

    /// All ways to pair up two equal-length slices, as index mappings.
    fn pairings(n: usize) -> Vec<Vec<usize>> {
        fn go(remaining: &mut Vec<usize>, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if remaining.is_empty() {
                out.push(acc.clone());
                return;
            }
            for i in 0..remaining.len() {
                let chosen = remaining.remove(i);
                acc.push(chosen);
                go(remaining, acc, out);
                acc.pop();
                remaining.insert(i, chosen);
            }
        }
        let mut out = Vec::new();
        go(&mut (0..n).collect(), &mut Vec::new(), &mut out);
        out
    }

    /// Host-respecting bijections between two keyed occurrence sets, or
    /// `None` when the host profiles differ.
    fn bijections(left: &[OccKey], right: &[OccKey]) -> Option<Vec<BTreeMap<OccKey, OccKey>>> {
        let mut left_by_host: BTreeMap<Ident, Vec<OccKey>> = BTreeMap::new();
        let mut right_by_host: BTreeMap<Ident, Vec<OccKey>> = BTreeMap::new();
        for &k in left {
            left_by_host.entry(k.host).or_default().push(k);
        }
        for &k in right {
            right_by_host.entry(k.host).or_default().push(k);
        }
        if left_by_host.len() != right_by_host.len() {
            return None;
        }
        let mut maps: Vec<BTreeMap<OccKey, OccKey>> = vec![BTreeMap::new()];
        for (host, lks) in &left_by_host {
            let rks = right_by_host.get(host)?;
            if lks.len() != rks.len() {
                return None;
            }
            let mut extended = Vec::new();
            for map in &maps {
                for pairing in pairings(lks.len()) {
                    let mut bigger = map.clone();
                    for (i, &j) in pairing.iter().enumerate() {
                        bigger.insert(lks[i], rks[j]);
                    }
                    extended.push(bigger);
                }
            }
            maps = extended;
        }
        Some(maps)
    }

    pub fn definitionally_isomorphic(a: &Process, b: &Process) -> bool {
        let a_places: Vec<OccKey> = a.place_views().iter().map(|v| v.key).collect();
        let b_places: Vec<OccKey> = b.place_views().iter().map(|v| v.key).collect();
        let a_trans: Vec<OccKey> = a.transition_views().iter().map(|v| v.key).collect();
        let b_trans: Vec<OccKey> = b.transition_views().iter().map(|v| v.key).collect();
        let (Some(place_maps), Some(trans_maps)) = (
            bijections(&a_places, &b_places),
            bijections(&a_trans, &b_trans),
        ) else {
            return false;
        };
        let b_links: BTreeMap<OccKey, PlaceView> =
            b.place_views().into_iter().map(|v| (v.key, v)).collect();
        for trans_map in &trans_maps {
            for place_map in &place_maps {
                let ok = a.place_views().into_iter().all(|v| {
                    let image = &b_links[&place_map[&v.key]];
                    image.producer == v.producer.map(|t| trans_map[&t])
                        && image.consumer == v.consumer.map(|t| trans_map[&t])
                });
                if ok {
                    return true;
                }
            }
        }
        false
    }

    /// Bijection count for the instance-size cap.
    pub fn search_space(a: &Process) -> usize {
        fn factorial_product(keys: Vec<OccKey>) -> usize {
            let mut by_host: BTreeMap<Ident, usize> = BTreeMap::new();
            for k in keys {
                *by_host.entry(k.host).or_default() += 1;
            }
            by_host
                .values()
                .map(|&n| (1..=n).product::<usize>())
                .product()
        }
        factorial_product(a.place_views().iter().map(|v| v.key).collect()).saturating_mul(
            factorial_product(a.transition_views().iter().map(|v| v.key).collect()),
        )
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Both isomorphism routes agree with the exhaustive bijection search.
    #[test]
    fn isomorphism_matches_the_definition(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 3, 15);
        let one = pick(&words, salt);
        let two = pick(&words, salt / 3);
        for (w1, w2, policy) in [
            (one, two, TokenPolicy::OldestFirst),
            (one, one, TokenPolicy::NewestFirst),
        ] {
            let p = build_process(&net, w1, &TokenPolicy::OldestFirst).unwrap();
            let q = build_process(&net, w2, &policy).unwrap();
            if iso_oracle::search_space(&p).saturating_mul(iso_oracle::search_space(&q)) > 100_000 {
                continue;
            }
            let by_definition = iso_oracle::definitionally_isomorphic(&p, &q);
            prop_assert_eq!(are_isomorphic(&p, &q), by_definition);
            prop_assert_eq!(canonical_key(&p) == canonical_key(&q), by_definition);
        }
    }

    /// The swap outputs and enumerated processes also agree with the
    /// definitional check.
    #[test]
    fn pi_classes_are_definitionally_distinct(net in net_strategy(), salt in any::<u64>()) {
        let words = firing_words(&net, 3, 12);
        let word = pick(&words, salt);
        let members = pi_members(&net, word, true, 16).unwrap();
        if members.truncated {
            return Ok(());
        }
        for (i, p) in members.processes.iter().enumerate() {
            if iso_oracle::search_space(p) > 2_000 {
                return Ok(());
            }
            for q in &members.processes[i + 1..] {
                prop_assert!(!iso_oracle::definitionally_isomorphic(p, q));
            }
        }
    }
}

/// Deterministic anchors for the definitional oracle: the two buffer-net
/// processes are distinct, and a birth-renamed copy is isomorphic.
#[test]
fn definitional_oracle_anchors() {
    let net = Arc::new(parse_net(include_str!("../fixtures/net-a.net")).unwrap());
    let word = net.parse_word("a b c").unwrap();
    let left = build_process(&net, &word, &TokenPolicy::OldestFirst).unwrap();
    let right = build_process(&net, &word, &TokenPolicy::Explicit(vec![0, 0, 0, 1])).unwrap();

    assert!(iso_oracle::definitionally_isomorphic(&left, &left));
    assert!(!iso_oracle::definitionally_isomorphic(&left, &right));
    assert!(!are_isomorphic(&left, &right));

    let mut sketch = left.sketch();
    for place in &mut sketch.places {
        if place.host == "4" {
            let birth: u32 = place.id.rsplit_once('.').unwrap().1.parse().unwrap();
            place.id = format!("4.{}", birth + 3);
        }
    }
    for arc in &mut sketch.arcs {
        for end in [&mut arc.0, &mut arc.1] {
            if let Some(("4", birth)) = end.rsplit_once('.') {
                let birth: u32 = birth.parse().unwrap();
                *end = format!("4.{}", birth + 3);
            }
        }
    }
    let renamed = validate_process(&net, &sketch).unwrap();
    assert!(iso_oracle::definitionally_isomorphic(&left, &renamed));
    assert!(are_isomorphic(&left, &renamed));
}
