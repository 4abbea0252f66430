//! Cross-checking property suites over fixtures and generated nets.
//!
//! Each check confronts two independently implemented views of the same
//! notion on seeded random nets: sequence-level trace equivalence against
//! process-level swapping equivalence, the class prefix order against
//! direct prefix search, and run conflict-freeness against conflict
//! scanning.
//! Instances are kept at desk scale so the exhaustive sub-oracles (full
//! process enumeration, full trace closures) stay fast.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conflict::find_conflicts;
use crate::format::write_net;
use crate::generate::{one_safe_within, random_net, GenParams};
use crate::multiset::Multiset;
use crate::net::{Ident, Net, Word};
use crate::process::{build_process, canonical_key, pi_members, Process, TokenPolicy};
use crate::swap::{
    bd_class_leq, bd_class_leq_direct, bdify, maximal_processes, swap_equivalent, BdClassRef,
    SwapMethod, Uniqueness,
};
use crate::traces::{
    adjacent, class_leq, enumerate_runs, run_conflict_free, trace_class, trace_equivalent,
    FiniteRun,
};
use crate::verdict::Status;

/// Outcome of one property suite.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub property: String,
    pub instances: usize,
    pub failures: Vec<String>,
    pub seed: u64,
}

impl PropertyReport {
    fn new(property: &str, seed: u64) -> Self {
        PropertyReport {
            property: property.to_string(),
            instances: 0,
            failures: Vec::new(),
            seed,
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok {
            self.failures.push(describe());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl std::fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} ({} instances, {} failures, seed {})",
            self.property,
            if self.passed() { "pass" } else { "FAIL" },
            self.instances,
            self.failures.len(),
            self.seed
        )?;
        for failure in &self.failures {
            write!(f, "\n  failure: {failure}")?;
        }
        Ok(())
    }
}

fn small_params(rng: &mut ChaCha8Rng) -> GenParams {
    GenParams {
        place_count: rng.gen_range(2..=6),
        transition_count: rng.gen_range(1..=4),
        arc_density: rng.gen_range(0.25..=0.5),
        max_weight: rng.gen_range(1..=2),
        max_initial_tokens: rng.gen_range(1..=2),
        seed: rng.gen(),
    }
}

/// Breadth-first enumeration of firing sequences, capped.
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
                let m = net
                    .fire_step(&marking, &Multiset::singleton(t))
                    .expect("enabled");
                words.push(w.clone());
                next.push((w, m));
            }
        }
        frontier = next;
    }
    words
}

fn describe_net(net: &Net) -> String {
    write_net(net).replace('\n', "; ")
}

fn random_pi_member(net: &Arc<Net>, word: &[Ident], rng: &mut ChaCha8Rng) -> Option<Process> {
    let members = pi_members(net, word, false, 64).ok()?;
    if members.processes.is_empty() {
        return None;
    }
    let i = rng.gen_range(0..members.processes.len());
    Some(members.processes[i].clone())
}

/// Common-member and adjacency coherence:
/// a shared process forces trace equivalence, and adjacency forces a shared
/// process.
pub fn check_shared_member_coherence(net_count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("shared-process/adjacency coherence", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // fixture instances
    {
        let a = crate::format::parse_net(include_str!("../fixtures/net-a.net"))
            .map(Arc::new)
            .expect("fixture parses");
        let abc = a.parse_word("a b c").unwrap();
        let bac = a.parse_word("b a c").unwrap();
        let keys = |w: &Word| -> Vec<_> {
            pi_members(&a, w, true, 1000)
                .unwrap()
                .processes
                .iter()
                .map(canonical_key)
                .collect()
        };
        let shared = keys(&abc).iter().any(|k| keys(&bac).contains(k));
        report.check(shared && trace_equivalent(&a, &abc, &bac).unwrap(), || {
            "fixture: abc/bac must share a process and be trace equivalent".into()
        });
    }

    for _ in 0..net_count {
        let net = Arc::new(random_net(&small_params(&mut rng)));
        let words = firing_words(&net, 4, 40);

        // group by process classes: any two words sharing a member must be
        // trace equivalent
        let mut by_key: std::collections::BTreeMap<_, Vec<&Word>> = Default::default();
        let mut truncated = false;
        for word in &words {
            match pi_members(&net, word, true, 128) {
                Ok(members) if !members.truncated => {
                    for p in &members.processes {
                        by_key.entry(canonical_key(p)).or_default().push(word);
                    }
                }
                _ => truncated = true,
            }
        }
        if truncated {
            continue;
        }
        for group in by_key.values().filter(|g| g.len() > 1) {
            for pair in group.windows(2) {
                report.check(
                    trace_equivalent(&net, pair[0], pair[1]).unwrap_or(false),
                    || {
                        format!(
                            "common member but not trace equivalent: `{}` vs `{}` on {}",
                            net.show_word(pair[0]),
                            net.show_word(pair[1]),
                            describe_net(&net)
                        )
                    },
                );
            }
        }

        // adjacent words must share a process
        for word in words.iter().take(25) {
            for i in 0..word.len().saturating_sub(1) {
                let mut other = word.clone();
                other.swap(i, i + 1);
                if other == *word || !net.is_firing_sequence(&other) {
                    continue;
                }
                if !adjacent(&net, word, &other).unwrap_or(false) {
                    continue;
                }
                let keys_a: Vec<_> = pi_members(&net, word, true, 128)
                    .unwrap()
                    .processes
                    .iter()
                    .map(canonical_key)
                    .collect();
                let keys_b: Vec<_> = pi_members(&net, &other, true, 128)
                    .unwrap()
                    .processes
                    .iter()
                    .map(canonical_key)
                    .collect();
                report.check(keys_a.iter().any(|k| keys_b.contains(k)), || {
                    format!(
                        "adjacent words without a common member: `{}` vs `{}` on {}",
                        net.show_word(word),
                        net.show_word(&other),
                        describe_net(&net)
                    )
                });
            }
        }
    }
    report
}

/// Sequence-level and process-level equivalence must agree: trace
/// equivalence of two words decides swapping equivalence of any two
/// processes linearising them, and the two procedures are independent.
pub fn check_equivalence_agreement(instance_count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("trace/swap equivalence agreement", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // fixture instances: the two buffer-net processes agree on both sides,
    // the two single-transition processes of the choice net disagree on
    // neither
    {
        let a = crate::format::parse_net(include_str!("../fixtures/net-a.net"))
            .map(Arc::new)
            .expect("fixture parses");
        let abc = a.parse_word("a b c").unwrap();
        let bca = a.parse_word("b c a").unwrap();
        let p = build_process(&a, &abc, &TokenPolicy::OldestFirst).unwrap();
        let q = build_process(&a, &bca, &TokenPolicy::OldestFirst).unwrap();
        report.check(
            trace_equivalent(&a, &abc, &bca).unwrap()
                && swap_equivalent(&p, &q, SwapMethod::DirectBfs),
            || "fixture: abc/bca must be equivalent on both sides".into(),
        );

        let c = crate::format::parse_net(include_str!("../fixtures/net-c.net"))
            .map(Arc::new)
            .expect("fixture parses");
        let t = c.parse_word("t").unwrap();
        let u = c.parse_word("u").unwrap();
        let pt = build_process(&c, &t, &TokenPolicy::OldestFirst).unwrap();
        let pu = build_process(&c, &u, &TokenPolicy::OldestFirst).unwrap();
        report.check(
            !trace_equivalent(&c, &t, &u).unwrap()
                && !swap_equivalent(&pt, &pu, SwapMethod::DirectBfs),
            || "fixture: t/u must be inequivalent on both sides".into(),
        );
    }

    let fixture_instances = report.instances;
    while report.instances - fixture_instances < instance_count {
        let net = Arc::new(random_net(&small_params(&mut rng)));
        let words = firing_words(&net, 5, 60);
        if words.len() < 2 {
            continue;
        }
        let pairs_to_draw = 4.min(instance_count + fixture_instances - report.instances);
        for _ in 0..pairs_to_draw {
            let sigma = &words[rng.gen_range(0..words.len())];
            // bias towards same-multiset pairs, where equivalence is possible
            let same: Vec<&Word> = words
                .iter()
                .filter(|w| {
                    w.len() == sigma.len()
                        && w.iter().copied().collect::<Multiset<Ident>>()
                            == sigma.iter().copied().collect::<Multiset<Ident>>()
                })
                .collect();
            let rho: Word = if !same.is_empty() && rng.gen_bool(0.7) {
                same[rng.gen_range(0..same.len())].clone()
            } else {
                words[rng.gen_range(0..words.len())].clone()
            };
            let (Some(p), Some(q)) = (
                random_pi_member(&net, sigma, &mut rng),
                random_pi_member(&net, &rho, &mut rng),
            ) else {
                continue;
            };
            let sequence_level = trace_equivalent(&net, sigma, &rho).unwrap();
            let process_level = swap_equivalent(&p, &q, SwapMethod::DirectBfs);
            report.check(sequence_level == process_level, || {
                format!(
                    "disagreement on `{}` vs `{}` (traces {} / swaps {}) on {}",
                    net.show_word(sigma),
                    net.show_word(&rho),
                    sequence_level,
                    process_level,
                    describe_net(&net)
                )
            });
        }
    }
    report
}

/// The bijection between trace classes and swap classes preserves the
/// prefix order: the class order decided on words agrees with direct
/// prefix search between processes.
pub fn check_order_preservation(instance_count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("class order preservation", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // fixture instances: a one-transition prefix sits below the full class
    // on both sides; the two branches of the choice net are incomparable
    {
        let a = crate::format::parse_net(include_str!("../fixtures/net-a.net"))
            .map(Arc::new)
            .expect("fixture parses");
        let short = a.parse_word("a").unwrap();
        let long = a.parse_word("a b c").unwrap();
        let p = build_process(&a, &short, &TokenPolicy::OldestFirst).unwrap();
        let q = build_process(&a, &long, &TokenPolicy::OldestFirst).unwrap();
        let word_level = class_leq(
            &trace_class(&a, &short).unwrap(),
            &trace_class(&a, &long).unwrap(),
        );
        report.check(word_level && bd_class_leq_direct(&p, &q), || {
            "fixture: [a] must sit below [abc] on both sides".into()
        });

        let c = crate::format::parse_net(include_str!("../fixtures/net-c.net"))
            .map(Arc::new)
            .expect("fixture parses");
        let t = c.parse_word("t").unwrap();
        let u = c.parse_word("u").unwrap();
        let pt = build_process(&c, &t, &TokenPolicy::OldestFirst).unwrap();
        let pu = build_process(&c, &u, &TokenPolicy::OldestFirst).unwrap();
        let word_level = class_leq(&trace_class(&c, &t).unwrap(), &trace_class(&c, &u).unwrap());
        report.check(!word_level && !bd_class_leq_direct(&pt, &pu), || {
            "fixture: [t] and [u] must be incomparable on both sides".into()
        });
    }

    let fixture_instances = report.instances;
    while report.instances - fixture_instances < instance_count {
        let net = Arc::new(random_net(&small_params(&mut rng)));
        let words = firing_words(&net, 4, 40);
        if words.len() < 2 {
            continue;
        }
        let pairs_to_draw = 4.min(instance_count + fixture_instances - report.instances);
        for _ in 0..pairs_to_draw {
            let mut sigma = words[rng.gen_range(0..words.len())].clone();
            let mut rho = words[rng.gen_range(0..words.len())].clone();
            if sigma.len() > rho.len() {
                std::mem::swap(&mut sigma, &mut rho);
            }
            let (Some(p), Some(q)) = (
                random_pi_member(&net, &sigma, &mut rng),
                random_pi_member(&net, &rho, &mut rng),
            ) else {
                continue;
            };
            let class_sigma = trace_class(&net, &sigma).unwrap();
            let class_rho = trace_class(&net, &rho).unwrap();
            let word_level = class_leq(&class_sigma, &class_rho);
            let process_level = bd_class_leq_direct(&p, &q);
            report.check(word_level == process_level, || {
                format!(
                    "order disagreement on `{}` vs `{}` (classes {} / processes {}) on {}",
                    net.show_word(&sigma),
                    net.show_word(&rho),
                    word_level,
                    process_level,
                    describe_net(&net)
                )
            });
        }
    }
    report
}

fn conflicted_small_params(rng: &mut ChaCha8Rng) -> GenParams {
    GenParams {
        place_count: rng.gen_range(1..=3),
        transition_count: rng.gen_range(2..=4),
        arc_density: rng.gen_range(0.35..=0.6),
        max_weight: 1,
        max_initial_tokens: rng.gen_range(1..=2),
        seed: rng.gen(),
    }
}

/// Structural conflict nets whose full sequence space ends within `depth`,
/// so bounded verdicts are exact.
fn sample_structural_nets(
    rng: &mut ChaCha8Rng,
    count: usize,
    depth: usize,
    require_conflict: bool,
    require_complete: bool,
) -> Vec<Arc<Net>> {
    let mut nets = Vec::new();
    let mut attempts = 0;
    while nets.len() < count && attempts < count * 400 {
        attempts += 1;
        let net = random_net(&conflicted_small_params(rng));
        if crate::conflict::check_structural(&net, depth + 2, 12).status != Status::HoldsWithinBound
        {
            continue;
        }
        if require_complete && enumerate_runs(&net, depth).truncated {
            continue;
        }
        if require_conflict {
            let scan = find_conflicts(&net, depth, 12, 4);
            if scan.witnesses.is_empty() {
                continue;
            }
        }
        nets.push(Arc::new(net));
    }
    nets
}

/// On structural conflict nets, every run is conflict-free.
pub fn check_runs_conflict_free(net_count: usize, seed: u64) -> PropertyReport {
    let mut report =
        PropertyReport::new("runs of structural conflict nets are conflict-free", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nets = sample_structural_nets(&mut rng, net_count, 6, false, false);
    for net in &nets {
        let runs = enumerate_runs(net, 6);
        for class in &runs.classes {
            let run = FiniteRun::of_class(net, class);
            let verdict = run_conflict_free(net, &run, 4);
            report.check(!verdict.is_violated(), || {
                format!(
                    "run of `{}` is not conflict-free on {}",
                    net.show_word(class.representative()),
                    describe_net(net)
                )
            });
        }
    }
    report
}

/// Contrapositive evidence on structural conflict nets: a semantic conflict
/// forces at least two maximal runs and at least two maximal process
/// classes. Sampled nets have a complete sequence space within the suite
/// depth so the verdicts are exact.
pub fn check_conflict_splits_runs(net_count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("a conflict splits runs and processes", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conflicted = sample_structural_nets(&mut rng, net_count, 6, true, true);
    for net in &conflicted {
        let scan = find_conflicts(net, 6, 12, 4);
        let witness = &scan.witnesses[0];
        let depth = witness.sequence.len();
        let spread = witness.multiset.iter().map(|(_, n)| n).max().unwrap_or(1) as usize;

        let runs = enumerate_runs(net, depth + spread);
        report.check(runs.maximal.len() >= 2, || {
            format!(
                "conflict at depth {depth} but a single maximal class at bound {} on {}",
                depth + spread,
                describe_net(net)
            )
        });

        let processes = maximal_processes(net, 6);
        report.check(processes.verdict == Uniqueness::Multiple, || {
            format!(
                "conflict but maximal-process verdict {} on {}",
                processes.verdict,
                describe_net(net)
            )
        });
    }
    report
}

/// Both conflict suites together, as one merged report.
pub fn check_conflict_coherence(net_count: usize, seed: u64) -> PropertyReport {
    let one = check_runs_conflict_free(net_count, seed);
    let two = check_conflict_splits_runs(net_count, seed.wrapping_add(17));
    PropertyReport {
        property: "conflict-free runs / conflict splits runs".to_string(),
        instances: one.instances + two.instances,
        failures: one.failures.into_iter().chain(two.failures).collect(),
        seed,
    }
}

/// The run of a finite process is prefix-closed and directed; directedness
/// is witnessed by componentwise prefix unions.
pub fn check_process_run_invariants(sample_count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("process runs are prefix-closed and directed", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // fixture instance: the two maximal processes of the buffer net induce
    // the same run
    {
        let a = crate::format::parse_net(include_str!("../fixtures/net-a.net"))
            .map(Arc::new)
            .expect("fixture parses");
        let abc = a.parse_word("a b c").unwrap();
        let left = build_process(&a, &abc, &TokenPolicy::OldestFirst).unwrap();
        let right = build_process(&a, &abc, &TokenPolicy::Explicit(vec![0, 0, 0, 1])).unwrap();
        report.check(bdify(&left) == bdify(&right), || {
            "fixture: the two maximal processes must induce the same run".into()
        });
    }

    let mut samples = 0;
    while samples < sample_count {
        let net = Arc::new(random_net(&small_params(&mut rng)));
        let words = firing_words(&net, 4, 30);
        let word = &words[rng.gen_range(0..words.len())];
        let Some(process) = random_pi_member(&net, word, &mut rng) else {
            continue;
        };
        samples += 1;
        let run = bdify(&process);

        // prefix-closed: classes of member prefixes stay inside
        let mut prefix_closed = true;
        'outer: for class in run.classes() {
            for member in class.trace_class().members() {
                for k in 0..member.len() {
                    let prefix_rep = trace_class(&net, &member[..k])
                        .expect("prefixes of members fire")
                        .representative()
                        .clone();
                    if !run.contains_rep(&prefix_rep) {
                        prefix_closed = false;
                        break 'outer;
                    }
                }
            }
        }
        report.check(prefix_closed, || {
            format!(
                "run of `{}` not prefix-closed on {}",
                net.show_word(word),
                describe_net(&net)
            )
        });

        // directed, via the componentwise union of two prefixes
        let downsets = process.downward_closed_sets();
        for _ in 0..3 {
            let one = &downsets[rng.gen_range(0..downsets.len())];
            let two = &downsets[rng.gen_range(0..downsets.len())];
            let p1 = process.prefix_by_transitions(one).unwrap();
            let p2 = process.prefix_by_transitions(two).unwrap();
            let union: std::collections::BTreeSet<_> = one.union(two).copied().collect();
            let joined = process.prefix_by_transitions(&union).unwrap();
            let r1 = BdClassRef::of_process(&p1);
            let r2 = BdClassRef::of_process(&p2);
            let rj = BdClassRef::of_process(&joined);
            report.check(
                p1.is_prefix_of(&joined)
                    && p2.is_prefix_of(&joined)
                    && joined.is_prefix_of(&process)
                    && bd_class_leq(&r1, &rj)
                    && bd_class_leq(&r2, &rj)
                    && run.contains(&rj),
                || {
                    format!(
                        "prefix union is not an upper bound inside the run of `{}` on {}",
                        net.show_word(word),
                        describe_net(&net)
                    )
                },
            );
        }
    }
    report
}

/// On one-safe nets every firing sequence has exactly one process up to
/// isomorphism.
pub fn check_one_safe_pi_singleton(net_count: usize, seed: u64) -> PropertyReport {
    let mut report = PropertyReport::new("one-safe nets have singleton process sets", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = 0;
    let mut attempts = 0;
    while sampled < net_count && attempts < net_count * 200 {
        attempts += 1;
        let params = GenParams {
            max_initial_tokens: 1,
            ..small_params(&mut rng)
        };
        let net = Arc::new(random_net(&params));
        if !one_safe_within(&net, 6) {
            continue;
        }
        let words = firing_words(&net, 5, 30);
        if words.len() < 3 {
            // skip nets where hardly anything fires
            continue;
        }
        sampled += 1;
        for word in words {
            let members = pi_members(&net, &word, true, 1000).unwrap();
            report.check(members.processes.len() == 1 && !members.truncated, || {
                format!(
                    "{} processes for `{}` on one-safe {}",
                    members.processes.len(),
                    net.show_word(&word),
                    describe_net(&net)
                )
            });
            // no swapping is possible: every admissible swap is isomorphic
            // to the original
            let process = &members.processes[0];
            let views = process.place_views();
            for (i, x) in views.iter().enumerate() {
                for y in &views[i + 1..] {
                    if x.key.host != y.key.host
                        || process.places_causally_ordered(&x.key, &y.key).unwrap()
                    {
                        continue;
                    }
                    let swapped = crate::swap::swap(process, &x.key, &y.key).unwrap();
                    report.check(crate::process::are_isomorphic(&swapped, process), || {
                        format!(
                            "swap changed a one-safe process of `{}` on {}",
                            net.show_word(&word),
                            describe_net(&net)
                        )
                    });
                }
            }
        }
    }
    report
}

/// Runs every suite with counts matching the acceptance criteria.
pub fn run_all(seed: u64) -> Vec<PropertyReport> {
    vec![
        check_shared_member_coherence(100, seed),
        check_equivalence_agreement(200, seed.wrapping_add(1)),
        check_order_preservation(200, seed.wrapping_add(2)),
        check_conflict_coherence(100, seed.wrapping_add(3)),
        check_process_run_invariants(100, seed.wrapping_add(4)),
        check_one_safe_pi_singleton(50, seed.wrapping_add(5)),
    ]
}
