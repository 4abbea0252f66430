//! Occurrence-net processes of a net.
//!
//! A process is an acyclic net whose places have at most one producer and at
//! most one consumer, together with a mapping onto a host net. Here the
//! occurrence net is stored as linked occurrence records; the 0/1 arc
//! weights of the flow relation are implicit in the links.
//!
//! Occurrence identity is a `(host, birth)` pair assigned in creation order,
//! which makes construction from a firing sequence canonical and keeps
//! prefixes literally comparable to the processes they came from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::multiset::Multiset;
use crate::net::{Ident, Net, Word};

/// Identity of a place or transition occurrence within one construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccKey {
    pub host: Ident,
    pub birth: u32,
}

/// Which available token to consume when several occurrences of the same
/// host place are unconsumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenPolicy {
    /// Consume the occurrence created earliest. Total and deterministic;
    /// the canonical choice.
    OldestFirst,
    /// Consume the occurrence created last.
    NewestFirst,
    /// One index per consumption event, indexing into the list of available
    /// occurrences in creation order. Events are ordered by word position,
    /// then preplace (identifier order), then arc-weight copy.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessIssue {
    #[error("occurrence `{0}` has an unknown host `{1}`")]
    UnknownHost(String, String),
    #[error("occurrence `{0}` maps to `{1}` which has the wrong sort")]
    WrongSort(String, String),
    #[error("duplicate occurrence id `{0}`")]
    DuplicateOccurrence(String),
    #[error("occurrence id `{0}` is not of the form <host>.<index>")]
    BadOccurrenceId(String),
    #[error("arc endpoint `{0}` is not a declared occurrence")]
    ArcEndpointUnknown(String),
    #[error("arc {0} -> {1} does not connect a place with a transition occurrence")]
    ArcSameSort(String, String),
    #[error("place occurrence `{0}` branches (more than one producer or consumer)")]
    PlaceBranching(String),
    #[error("the flow relation has a cycle")]
    Cycle,
    #[error("occurrence `{0}` initial flag contradicts its arcs")]
    InitialFlagMismatch(String),
    #[error("initial occurrences map {found} tokens onto place `{host}`, marking has {expected}")]
    InitialMarkingMismatch {
        host: String,
        expected: u64,
        found: u64,
    },
    #[error("transition occurrence `{occ}`: {found} {dir} occurrences of place `{place}`, host net needs {expected}")]
    FlowCountMismatch {
        occ: String,
        place: String,
        dir: &'static str,
        expected: u64,
        found: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessError {
    #[error("word is not a firing sequence: transition `{transition}` not enabled at position {position}")]
    NotFiringSequence { position: usize, transition: String },
    #[error("`{0}` is not a transition of the host net")]
    NotATransition(String),
    #[error("choice {index} out of range at event {event} ({available} tokens available)")]
    ChoiceUnavailable {
        event: usize,
        index: usize,
        available: usize,
    },
    #[error("choice list ends before event {event}")]
    ChoiceListTooShort { event: usize },
    #[error("choice list has {provided} entries but only {events} consumption events happen")]
    ChoiceListTooLong { events: usize, provided: usize },
    #[error("transition set is not downward closed: cause of `{0}` is missing")]
    NotDownwardClosed(String),
    #[error("unknown occurrence `{0}`")]
    UnknownOccurrence(String),
    #[error("invalid process: {}", issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { issues: Vec<ProcessIssue> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PlaceOcc {
    key: OccKey,
    producer: Option<usize>,
    consumer: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TransOcc {
    key: OccKey,
    preset: Vec<usize>,
    postset: Vec<usize>,
}

/// A finite process of a net. Valid by construction.
#[derive(Clone)]
pub struct Process {
    net: Arc<Net>,
    places: Vec<PlaceOcc>,
    transitions: Vec<TransOcc>,
}

/// Producer and consumer of each place occurrence, by key.
type PlaceLinks = BTreeMap<OccKey, (Option<OccKey>, Option<OccKey>)>;

/// Read-only view of a place occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceView {
    pub key: OccKey,
    pub producer: Option<OccKey>,
    pub consumer: Option<OccKey>,
}

impl PlaceView {
    pub fn is_initial(&self) -> bool {
        self.producer.is_none()
    }
}

/// Read-only view of a transition occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransView {
    pub key: OccKey,
    pub preset: Vec<OccKey>,
    pub postset: Vec<OccKey>,
}

impl Process {
    pub fn net(&self) -> &Arc<Net> {
        &self.net
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn same_net(&self, other: &Process) -> bool {
        Arc::ptr_eq(&self.net, &other.net) || *self.net == *other.net
    }

    pub fn place_views(&self) -> Vec<PlaceView> {
        self.places
            .iter()
            .map(|p| PlaceView {
                key: p.key,
                producer: p.producer.map(|i| self.transitions[i].key),
                consumer: p.consumer.map(|i| self.transitions[i].key),
            })
            .collect()
    }

    pub fn transition_views(&self) -> Vec<TransView> {
        self.transitions
            .iter()
            .map(|t| TransView {
                key: t.key,
                preset: t.preset.iter().map(|&i| self.places[i].key).collect(),
                postset: t.postset.iter().map(|&i| self.places[i].key).collect(),
            })
            .collect()
    }

    pub fn transition_keys(&self) -> BTreeSet<OccKey> {
        self.transitions.iter().map(|t| t.key).collect()
    }

    /// Multiset of host transitions this process fires.
    pub fn transition_hosts(&self) -> Multiset<Ident> {
        self.transitions.iter().map(|t| t.key.host).collect()
    }

    /// Hosts of the final marking: unconsumed place occurrences.
    pub fn final_marking(&self) -> Multiset<Ident> {
        self.places
            .iter()
            .filter(|p| p.consumer.is_none())
            .map(|p| p.key.host)
            .collect()
    }

    fn place_index(&self, key: &OccKey) -> Option<usize> {
        self.places.iter().position(|p| p.key == *key)
    }

    fn trans_index(&self, key: &OccKey) -> Option<usize> {
        self.transitions.iter().position(|t| t.key == *key)
    }

    /// For each transition occurrence, the indices of the transition
    /// occurrences that produced its inputs.
    fn direct_causes(&self) -> Vec<BTreeSet<usize>> {
        self.transitions
            .iter()
            .map(|t| {
                t.preset
                    .iter()
                    .filter_map(|&p| self.places[p].producer)
                    .collect()
            })
            .collect()
    }

    /// Transition-level causal reachability: `reach[i]` contains every
    /// transition occurrence that causally precedes `i` (its strict causes).
    fn causes_closure(&self) -> Vec<BTreeSet<usize>> {
        let direct = self.direct_causes();
        let order = self.topological_order(&direct);
        let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.transitions.len()];
        for &i in &order {
            let mut acc = BTreeSet::new();
            for &d in &direct[i] {
                acc.insert(d);
                acc.extend(reach[d].iter().copied());
            }
            reach[i] = acc;
        }
        reach
    }

    fn topological_order(&self, direct: &[BTreeSet<usize>]) -> Vec<usize> {
        let n = self.transitions.len();
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        // direct causes form a DAG by the process invariants
        while order.len() < n {
            let mut progressed = false;
            for i in 0..n {
                if !placed[i] && direct[i].iter().all(|&d| placed[d]) {
                    placed[i] = true;
                    order.push(i);
                    progressed = true;
                }
            }
            assert!(progressed, "process flow relation must be acyclic");
        }
        order
    }

    /// Causal order between two place occurrences: whether there is a path
    /// from `p` through its consumer to the producer of `q`.
    pub fn places_causally_ordered(&self, p: &OccKey, q: &OccKey) -> Result<bool, ProcessError> {
        let pi = self
            .place_index(p)
            .ok_or_else(|| ProcessError::UnknownOccurrence(self.show_key(p)))?;
        let qi = self
            .place_index(q)
            .ok_or_else(|| ProcessError::UnknownOccurrence(self.show_key(q)))?;
        let closure = self.causes_closure();
        let before = |x: usize, y: usize| {
            // place x strictly precedes place y
            match (self.places[x].consumer, self.places[y].producer) {
                (Some(c), Some(g)) => c == g || closure[g].contains(&c),
                _ => false,
            }
        };
        Ok(before(pi, qi) || before(qi, pi))
    }

    /// All words `pi(t1)..pi(tn)` over host transitions obtained by
    /// enumerating the linear extensions of the causal order.
    pub fn linearisations(&self) -> BTreeSet<Word> {
        let n = self.transitions.len();
        assert!(
            n <= 64,
            "linearisation enumeration supports up to 64 transition occurrences"
        );
        let direct = self.direct_causes();
        let masks: Vec<u64> = direct
            .iter()
            .map(|ds| ds.iter().fold(0u64, |m, &d| m | (1 << d)))
            .collect();
        let mut out = BTreeSet::new();
        let mut word = Vec::with_capacity(n);
        fn go(
            this: &Process,
            masks: &[u64],
            fired: u64,
            count: usize,
            word: &mut Word,
            out: &mut BTreeSet<Word>,
        ) {
            if count == this.transitions.len() {
                out.insert(word.clone());
                return;
            }
            for i in 0..this.transitions.len() {
                let bit = 1u64 << i;
                if fired & bit == 0 && masks[i] & fired == masks[i] {
                    word.push(this.transitions[i].key.host);
                    go(this, masks, fired | bit, count + 1, word, out);
                    word.pop();
                }
            }
        }
        go(self, &masks, 0, 0, &mut word, &mut out);
        out
    }

    /// One linearisation, cheaply: repeatedly fires the available
    /// occurrence with the least key.
    pub fn some_linearisation(&self) -> Word {
        let direct = self.direct_causes();
        let n = self.transitions.len();
        let mut done = vec![false; n];
        let mut word = Vec::with_capacity(n);
        for _ in 0..n {
            let next = (0..n)
                .filter(|&i| !done[i] && direct[i].iter().all(|&d| done[d]))
                .min_by_key(|&i| self.transitions[i].key)
                .expect("acyclic process always has an available occurrence");
            done[next] = true;
            word.push(self.transitions[next].key.host);
        }
        word
    }

    /// Prefix test per the restriction equations: occurrence sets are
    /// subsets, the initial occurrences coincide, and flow and mapping of
    /// `self` are exactly the restriction of `other`'s.
    pub fn is_prefix_of(&self, other: &Process) -> bool {
        if !self.same_net(other) {
            return false;
        }
        let my_trans = self.transition_keys();
        let their_trans = other.transition_keys();
        if !my_trans.is_subset(&their_trans) {
            return false;
        }
        let theirs: BTreeMap<OccKey, PlaceView> = other
            .place_views()
            .into_iter()
            .map(|v| (v.key, v))
            .collect();
        let my_initial: BTreeSet<OccKey> = self
            .place_views()
            .iter()
            .filter(|v| v.is_initial())
            .map(|v| v.key)
            .collect();
        let their_initial: BTreeSet<OccKey> = theirs
            .values()
            .filter(|v| v.is_initial())
            .map(|v| v.key)
            .collect();
        if my_initial != their_initial {
            return false;
        }
        for mine in self.place_views() {
            let Some(t) = theirs.get(&mine.key) else {
                return false;
            };
            let expect_producer = t.producer.filter(|k| my_trans.contains(k));
            let expect_consumer = t.consumer.filter(|k| my_trans.contains(k));
            if mine.producer != expect_producer || mine.consumer != expect_consumer {
                return false;
            }
        }
        true
    }

    /// The unique prefix whose transition occurrences are `keep`.
    ///
    /// `keep` must be causally downward closed.
    pub fn prefix_by_transitions(&self, keep: &BTreeSet<OccKey>) -> Result<Process, ProcessError> {
        let mut keep_idx = BTreeSet::new();
        for key in keep {
            let i = self
                .trans_index(key)
                .ok_or_else(|| ProcessError::UnknownOccurrence(self.show_key(key)))?;
            keep_idx.insert(i);
        }
        let direct = self.direct_causes();
        for &i in &keep_idx {
            for &d in &direct[i] {
                if !keep_idx.contains(&d) {
                    return Err(ProcessError::NotDownwardClosed(
                        self.show_key(&self.transitions[i].key),
                    ));
                }
            }
        }

        let keep_place = |p: &PlaceOcc| match p.producer {
            None => true,
            Some(t) => keep_idx.contains(&t),
        };
        let mut place_map: BTreeMap<usize, usize> = BTreeMap::new();
        let mut places = Vec::new();
        for (i, p) in self.places.iter().enumerate() {
            if keep_place(p) {
                place_map.insert(i, places.len());
                places.push(PlaceOcc {
                    key: p.key,
                    producer: None,
                    consumer: None,
                });
            }
        }
        let mut trans_map: BTreeMap<usize, usize> = BTreeMap::new();
        let mut transitions = Vec::new();
        for (i, t) in self.transitions.iter().enumerate() {
            if keep_idx.contains(&i) {
                trans_map.insert(i, transitions.len());
                transitions.push(TransOcc {
                    key: t.key,
                    preset: Vec::new(),
                    postset: Vec::new(),
                });
            }
        }
        for (&old_i, &new_i) in &trans_map {
            let t = &self.transitions[old_i];
            for &p in &t.preset {
                let np = place_map[&p];
                places[np].consumer = Some(new_i);
                transitions[new_i].preset.push(np);
            }
            for &p in &t.postset {
                let np = place_map[&p];
                places[np].producer = Some(new_i);
                transitions[new_i].postset.push(np);
            }
        }
        Ok(Process {
            net: self.net.clone(),
            places,
            transitions,
        })
    }

    /// Every causally downward-closed set of transition occurrences, i.e.
    /// the transition sets of all prefixes. Exponential in the amount of
    /// concurrency; intended for desk-scale processes.
    pub fn downward_closed_sets(&self) -> Vec<BTreeSet<OccKey>> {
        let direct = self.direct_causes();
        let n = self.transitions.len();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut queue: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
        seen.insert(Vec::new());
        let mut out = Vec::new();
        while let Some(set) = queue.pop() {
            out.push(
                set.iter()
                    .map(|&i| self.transitions[i].key)
                    .collect::<BTreeSet<_>>(),
            );
            for (i, causes) in direct.iter().enumerate().take(n) {
                if !set.contains(&i) && causes.iter().all(|d| set.contains(d)) {
                    let mut bigger = set.clone();
                    bigger.insert(i);
                    let fingerprint: Vec<usize> = bigger.iter().copied().collect();
                    if seen.insert(fingerprint) {
                        queue.push(bigger);
                    }
                }
            }
        }
        out
    }

    fn show_key(&self, key: &OccKey) -> String {
        format!("{}.{}", self.net.name(key.host), key.birth)
    }

    /// View of one place occurrence, if present.
    pub fn place_view(&self, key: &OccKey) -> Option<PlaceView> {
        self.place_index(key).map(|i| {
            let p = &self.places[i];
            PlaceView {
                key: p.key,
                producer: p.producer.map(|t| self.transitions[t].key),
                consumer: p.consumer.map(|t| self.transitions[t].key),
            }
        })
    }

    /// Exchanges the consumers of two place occurrences. The caller is
    /// responsible for the admissibility checks.
    pub(crate) fn with_exchanged_consumers(&self, a: &OccKey, b: &OccKey) -> Process {
        let ia = self.place_index(a).expect("checked by caller");
        let ib = self.place_index(b).expect("checked by caller");
        let mut next = self.clone();
        let ca = next.places[ia].consumer;
        let cb = next.places[ib].consumer;
        if ia == ib || ca == cb {
            return next;
        }
        next.places[ia].consumer = cb;
        next.places[ib].consumer = ca;
        if let Some(t) = ca {
            for slot in &mut next.transitions[t].preset {
                if *slot == ia {
                    *slot = ib;
                }
            }
        }
        if let Some(t) = cb {
            for slot in &mut next.transitions[t].preset {
                if *slot == ib {
                    *slot = ia;
                }
            }
        }
        next
    }

    /// Structured form of this process, suitable for export and
    /// re-validation.
    pub fn sketch(&self) -> ProcessSketch {
        let mut places = Vec::new();
        for v in self.place_views() {
            places.push(SketchPlace {
                id: self.show_key(&v.key),
                host: self.net.name(v.key.host).to_string(),
                initial: v.is_initial(),
            });
        }
        let mut transitions = Vec::new();
        let mut arcs = Vec::new();
        for v in self.transition_views() {
            let id = self.show_key(&v.key);
            transitions.push(SketchTrans {
                id: id.clone(),
                host: self.net.name(v.key.host).to_string(),
            });
            for p in &v.preset {
                arcs.push((self.show_key(p), id.clone()));
            }
            for p in &v.postset {
                arcs.push((id.clone(), self.show_key(p)));
            }
        }
        ProcessSketch {
            places,
            transitions,
            arcs,
        }
    }

    /// Normal form used for structural equality: keyed place links plus the
    /// transition key set.
    fn normal_form(&self) -> (PlaceLinks, BTreeSet<OccKey>) {
        let links = self
            .place_views()
            .into_iter()
            .map(|v| (v.key, (v.producer, v.consumer)))
            .collect();
        (links, self.transition_keys())
    }
}

impl PartialEq for Process {
    fn eq(&self, other: &Self) -> bool {
        self.same_net(other) && self.normal_form() == other.normal_form()
    }
}

impl Eq for Process {}

impl fmt::Debug for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Process[")?;
        for (i, t) in self.transitions.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", self.show_key(&t.key))?;
        }
        write!(f, " | ")?;
        for (i, v) in self.place_views().into_iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            let prod = v.producer.map_or("_".to_string(), |k| self.show_key(&k));
            let cons = v.consumer.map_or("_".to_string(), |k| self.show_key(&k));
            write!(f, "{}<{}>{}", prod, self.show_key(&v.key), cons)?;
        }
        write!(f, "]")
    }
}

/// Structured description of a candidate process, as read from a file or
/// assembled by hand. `validate_process` turns it into a `Process`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProcessSketch {
    pub places: Vec<SketchPlace>,
    pub transitions: Vec<SketchTrans>,
    pub arcs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchPlace {
    pub id: String,
    pub host: String,
    pub initial: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchTrans {
    pub id: String,
    pub host: String,
}

// ---------------------------------------------------------------------------
// Construction by playing the token game

enum Drive {
    Complete(Box<Process>, usize),
    NeedsChoice {
        event: usize,
        available: usize,
        /// For each available occurrence, the position of the first one
        /// with the same producer; consuming either yields isomorphic
        /// completions.
        groups: Vec<usize>,
    },
}

fn new_key(births: &mut BTreeMap<Ident, u32>, host: Ident) -> OccKey {
    let b = births.entry(host).or_insert(0);
    let key = OccKey { host, birth: *b };
    *b += 1;
    key
}

/// Plays the token game for `word`, asking `choose` which available
/// occurrence to consume at each consumption event. `choose` may answer
/// `None` to halt and report the branching factor instead.
fn construct(
    net: &Arc<Net>,
    word: &[Ident],
    mut choose: impl FnMut(usize, usize) -> Result<Option<usize>, ProcessError>,
) -> Result<Drive, ProcessError> {
    let mut places: Vec<PlaceOcc> = Vec::new();
    let mut transitions: Vec<TransOcc> = Vec::new();
    let mut births: BTreeMap<Ident, u32> = BTreeMap::new();
    let mut avail: BTreeMap<Ident, Vec<usize>> = BTreeMap::new();
    let mut event = 0usize;

    for s in net.places() {
        for _ in 0..net.initial_marking().count(&s) {
            let key = new_key(&mut births, s);
            let idx = places.len();
            places.push(PlaceOcc {
                key,
                producer: None,
                consumer: None,
            });
            avail.entry(s).or_default().push(idx);
        }
    }

    for (pos, &t) in word.iter().enumerate() {
        if !net.is_transition(t) {
            return Err(ProcessError::NotATransition(net.name(t).to_string()));
        }
        let t_idx = transitions.len();
        let mut preset = Vec::new();
        let pre = net.preset_of(t).clone();
        for (&s, weight) in pre.iter() {
            for _ in 0..weight {
                let list = avail.entry(s).or_default();
                let n = list.len();
                if n == 0 {
                    return Err(ProcessError::NotFiringSequence {
                        position: pos + 1,
                        transition: net.name(t).to_string(),
                    });
                }
                let pick = match choose(event, n)? {
                    Some(i) => i,
                    None => {
                        let groups = list
                            .iter()
                            .map(|&idx| {
                                list.iter()
                                    .position(|&other| {
                                        places[other].producer == places[idx].producer
                                    })
                                    .expect("idx itself is in the list")
                            })
                            .collect();
                        return Ok(Drive::NeedsChoice {
                            event,
                            available: n,
                            groups,
                        });
                    }
                };
                if pick >= n {
                    return Err(ProcessError::ChoiceUnavailable {
                        event,
                        index: pick,
                        available: n,
                    });
                }
                let p_idx = list.remove(pick);
                places[p_idx].consumer = Some(t_idx);
                preset.push(p_idx);
                event += 1;
            }
        }
        let key = new_key(&mut births, t);
        let mut postset = Vec::new();
        let post = net.postset_of(t).clone();
        for (&s, weight) in post.iter() {
            for _ in 0..weight {
                let pkey = new_key(&mut births, s);
                let p_idx = places.len();
                places.push(PlaceOcc {
                    key: pkey,
                    producer: Some(t_idx),
                    consumer: None,
                });
                avail.entry(s).or_default().push(p_idx);
                postset.push(p_idx);
            }
        }
        transitions.push(TransOcc {
            key,
            preset,
            postset,
        });
    }

    Ok(Drive::Complete(
        Box::new(Process {
            net: net.clone(),
            places,
            transitions,
        }),
        event,
    ))
}

fn check_firing_sequence(net: &Net, word: &[Ident]) -> Result<(), ProcessError> {
    match net.fire_sequence(net.initial_marking(), word) {
        Ok(_) => Ok(()),
        Err(crate::net::NetError::SequenceStuck {
            position,
            transition,
        }) => Err(ProcessError::NotFiringSequence {
            position,
            transition,
        }),
        Err(crate::net::NetError::NotATransition(n)) => Err(ProcessError::NotATransition(n)),
        Err(e) => Err(ProcessError::NotATransition(e.to_string())),
    }
}

/// Builds one process with `word` among its linearisations.
///
/// With the oldest-first policy the result is a deterministic function of
/// the net and the word.
pub fn build_process(
    net: &Arc<Net>,
    word: &[Ident],
    policy: &TokenPolicy,
) -> Result<Process, ProcessError> {
    check_firing_sequence(net, word)?;
    let drive = match policy {
        TokenPolicy::OldestFirst => construct(net, word, |_, _| Ok(Some(0)))?,
        TokenPolicy::NewestFirst => construct(net, word, |_, n| Ok(Some(n - 1)))?,
        TokenPolicy::Explicit(choices) => {
            let drive = construct(net, word, |e, _| match choices.get(e) {
                Some(&i) => Ok(Some(i)),
                None => Err(ProcessError::ChoiceListTooShort { event: e }),
            })?;
            if let Drive::Complete(_, events) = &drive {
                if choices.len() > *events {
                    return Err(ProcessError::ChoiceListTooLong {
                        events: *events,
                        provided: choices.len(),
                    });
                }
            }
            drive
        }
    };
    match drive {
        Drive::Complete(p, _) => Ok(*p),
        Drive::NeedsChoice { .. } => unreachable!("total policies always pick"),
    }
}

/// The process of the empty firing sequence: initial occurrences only.
pub fn empty_process(net: &Arc<Net>) -> Process {
    build_process(net, &[], &TokenPolicy::OldestFirst).expect("empty word always fires")
}

/// Result of enumerating the processes that linearise to a word.
#[derive(Debug, Clone)]
pub struct PiEnumeration {
    /// Representatives, in discovery order of their least choice vector.
    pub processes: Vec<Process>,
    /// For each representative, the least choice vector reconstructing it.
    pub choices: Vec<Vec<usize>>,
    /// Concrete processes constructed during the search. Without
    /// deduplication this is the full choice space; with it, symmetric
    /// choices are pruned.
    pub enumerated: usize,
    pub truncated: bool,
}

/// Enumerates every process obtainable by varying the token-consumption
/// choices while firing `word`, i.e. the members of the linearisation
/// preimage of `word`. With `iso_dedup` the result keeps one process per
/// isomorphism class.
pub fn pi_members(
    net: &Arc<Net>,
    word: &[Ident],
    iso_dedup: bool,
    limit: usize,
) -> Result<PiEnumeration, ProcessError> {
    check_firing_sequence(net, word)?;
    let mut out = PiEnumeration {
        processes: Vec::new(),
        choices: Vec::new(),
        enumerated: 0,
        truncated: false,
    };
    let mut seen: BTreeSet<CanonicalKey> = BTreeSet::new();
    let mut prefix: Vec<usize> = Vec::new();
    dfs(
        net,
        word,
        &mut prefix,
        iso_dedup,
        limit,
        &mut seen,
        &mut out,
    )?;
    return Ok(out);

    fn dfs(
        net: &Arc<Net>,
        word: &[Ident],
        prefix: &mut Vec<usize>,
        iso_dedup: bool,
        limit: usize,
        seen: &mut BTreeSet<CanonicalKey>,
        out: &mut PiEnumeration,
    ) -> Result<(), ProcessError> {
        if out.enumerated >= limit {
            out.truncated = true;
            return Ok(());
        }
        let drive = construct(net, word, |e, _| Ok(prefix.get(e).copied()))?;
        match drive {
            Drive::Complete(p, _) => {
                out.enumerated += 1;
                let keep = !iso_dedup || seen.insert(canonical_key(&p));
                if keep {
                    out.processes.push(*p);
                    out.choices.push(prefix.clone());
                }
            }
            Drive::NeedsChoice {
                event,
                available,
                groups,
            } => {
                debug_assert_eq!(event, prefix.len(), "events are consumed in order");
                debug_assert_eq!(groups.len(), available);
                for (i, &group) in groups.iter().enumerate() {
                    // consuming either of two tokens with the same producer
                    // gives isomorphic processes, so one branch suffices
                    // when deduplicating
                    if iso_dedup && group != i {
                        continue;
                    }
                    prefix.push(i);
                    dfs(net, word, prefix, iso_dedup, limit, seen, out)?;
                    prefix.pop();
                    if out.truncated {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Validation of candidate processes

/// Checks every process invariant on a structured candidate and assembles
/// the process when they all hold. Violations are reported together.
pub fn validate_process(net: &Arc<Net>, sketch: &ProcessSketch) -> Result<Process, ProcessError> {
    let mut issues = Vec::new();

    #[derive(Clone, Copy, PartialEq)]
    enum Sort {
        Place,
        Trans,
    }

    fn parse_key(net: &Net, id: &str, host: Ident) -> Option<OccKey> {
        let (stem, index) = id.rsplit_once('.')?;
        if stem != net.name(host) {
            return None;
        }
        let birth: u32 = index.parse().ok()?;
        Some(OccKey { host, birth })
    }

    let mut ids: BTreeMap<&str, (Sort, usize)> = BTreeMap::new();
    let mut place_keys: Vec<Option<OccKey>> = Vec::new();
    for (i, p) in sketch.places.iter().enumerate() {
        match net.lookup(&p.host) {
            None => {
                issues.push(ProcessIssue::UnknownHost(p.id.clone(), p.host.clone()));
                place_keys.push(None);
            }
            Some(h) if !net.is_place(h) => {
                issues.push(ProcessIssue::WrongSort(p.id.clone(), p.host.clone()));
                place_keys.push(None);
            }
            Some(h) => match parse_key(net, &p.id, h) {
                Some(key) => place_keys.push(Some(key)),
                None => {
                    issues.push(ProcessIssue::BadOccurrenceId(p.id.clone()));
                    place_keys.push(None);
                }
            },
        }
        if ids.insert(&p.id, (Sort::Place, i)).is_some() {
            issues.push(ProcessIssue::DuplicateOccurrence(p.id.clone()));
        }
    }
    let mut trans_keys: Vec<Option<OccKey>> = Vec::new();
    for (i, t) in sketch.transitions.iter().enumerate() {
        match net.lookup(&t.host) {
            None => {
                issues.push(ProcessIssue::UnknownHost(t.id.clone(), t.host.clone()));
                trans_keys.push(None);
            }
            Some(h) if !net.is_transition(h) => {
                issues.push(ProcessIssue::WrongSort(t.id.clone(), t.host.clone()));
                trans_keys.push(None);
            }
            Some(h) => match parse_key(net, &t.id, h) {
                Some(key) => trans_keys.push(Some(key)),
                None => {
                    issues.push(ProcessIssue::BadOccurrenceId(t.id.clone()));
                    trans_keys.push(None);
                }
            },
        }
        if ids.insert(&t.id, (Sort::Trans, i)).is_some() {
            issues.push(ProcessIssue::DuplicateOccurrence(t.id.clone()));
        }
    }

    // arc wiring; degrees counted with multiplicity
    let mut producer: Vec<Vec<usize>> = vec![Vec::new(); sketch.places.len()];
    let mut consumer: Vec<Vec<usize>> = vec![Vec::new(); sketch.places.len()];
    let mut preset: Vec<Vec<usize>> = vec![Vec::new(); sketch.transitions.len()];
    let mut postset: Vec<Vec<usize>> = vec![Vec::new(); sketch.transitions.len()];
    for (from, to) in &sketch.arcs {
        let f = ids.get(from.as_str()).copied();
        let t = ids.get(to.as_str()).copied();
        if f.is_none() {
            issues.push(ProcessIssue::ArcEndpointUnknown(from.clone()));
        }
        if t.is_none() {
            issues.push(ProcessIssue::ArcEndpointUnknown(to.clone()));
        }
        match (f, t) {
            (Some((Sort::Place, p)), Some((Sort::Trans, x))) => {
                consumer[p].push(x);
                preset[x].push(p);
            }
            (Some((Sort::Trans, x)), Some((Sort::Place, p))) => {
                producer[p].push(x);
                postset[x].push(p);
            }
            (Some(_), Some(_)) => {
                issues.push(ProcessIssue::ArcSameSort(from.clone(), to.clone()));
            }
            _ => {}
        }
    }

    for (i, p) in sketch.places.iter().enumerate() {
        if producer[i].len() > 1 || consumer[i].len() > 1 {
            issues.push(ProcessIssue::PlaceBranching(p.id.clone()));
        }
        let has_producer = !producer[i].is_empty();
        if p.initial == has_producer {
            issues.push(ProcessIssue::InitialFlagMismatch(p.id.clone()));
        }
    }

    // acyclicity over the occurrence graph
    {
        let n = sketch.places.len() + sketch.transitions.len();
        let place_node = |i: usize| i;
        let trans_node = |i: usize| sketch.places.len() + i;
        let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (p, xs) in consumer.iter().enumerate() {
            for &x in xs {
                succs[place_node(p)].push(trans_node(x));
            }
        }
        for (p, xs) in producer.iter().enumerate() {
            for &x in xs {
                succs[trans_node(x)].push(place_node(p));
            }
        }
        let mut indeg = vec![0usize; n];
        for out in &succs {
            for &v in out {
                indeg[v] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for &w in &succs[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push(w);
                }
            }
        }
        if seen != n {
            issues.push(ProcessIssue::Cycle);
        }
    }

    // initial occurrences must map onto the initial marking
    let mut initial_hosts: Multiset<Ident> = Multiset::new();
    for (i, p) in sketch.places.iter().enumerate() {
        if producer[i].is_empty() {
            if let Some(h) = net.lookup(&p.host) {
                initial_hosts.insert(h, 1);
            }
        }
    }
    if issues.is_empty() {
        for s in net.places() {
            let expected = net.initial_marking().count(&s);
            let found = initial_hosts.count(&s);
            if expected != found {
                issues.push(ProcessIssue::InitialMarkingMismatch {
                    host: net.name(s).to_string(),
                    expected,
                    found,
                });
            }
        }
    }

    // arc counts around every transition occurrence must match the host flow
    if issues.is_empty() {
        for (x, t) in sketch.transitions.iter().enumerate() {
            let host = net.lookup(&t.host).expect("checked above");
            let pre_found: Multiset<Ident> = preset[x]
                .iter()
                .map(|&p| net.lookup(&sketch.places[p].host).expect("checked"))
                .collect();
            let post_found: Multiset<Ident> = postset[x]
                .iter()
                .map(|&p| net.lookup(&sketch.places[p].host).expect("checked"))
                .collect();
            for (dir, found, expected) in [
                ("incoming", &pre_found, net.preset_of(host)),
                ("outgoing", &post_found, net.postset_of(host)),
            ] {
                for &s in expected.elements().chain(found.elements()) {
                    if expected.count(&s) != found.count(&s) {
                        issues.push(ProcessIssue::FlowCountMismatch {
                            occ: t.id.clone(),
                            place: net.name(s).to_string(),
                            dir,
                            expected: expected.count(&s),
                            found: found.count(&s),
                        });
                    }
                }
            }
        }
        issues.dedup();
    }

    if !issues.is_empty() {
        return Err(ProcessError::Invalid { issues });
    }

    let places = sketch
        .places
        .iter()
        .enumerate()
        .map(|(i, _)| PlaceOcc {
            key: place_keys[i].expect("no issues"),
            producer: producer[i].first().copied(),
            consumer: consumer[i].first().copied(),
        })
        .collect();
    let transitions = sketch
        .transitions
        .iter()
        .enumerate()
        .map(|(x, _)| TransOcc {
            key: trans_keys[x].expect("no issues"),
            preset: preset[x].clone(),
            postset: postset[x].clone(),
        })
        .collect();
    let process = Process {
        net: net.clone(),
        places,
        transitions,
    };
    // keys must still be unique after id parsing
    let mut key_set: BTreeSet<OccKey> = BTreeSet::new();
    for p in &process.places {
        if !key_set.insert(p.key) {
            return Err(ProcessError::Invalid {
                issues: vec![ProcessIssue::DuplicateOccurrence(process.show_key(&p.key))],
            });
        }
    }
    let mut key_set: BTreeSet<OccKey> = BTreeSet::new();
    for t in &process.transitions {
        if !key_set.insert(t.key) {
            return Err(ProcessError::Invalid {
                issues: vec![ProcessIssue::DuplicateOccurrence(process.show_key(&t.key))],
            });
        }
    }
    Ok(process)
}

// ---------------------------------------------------------------------------
// Isomorphism

/// Per-occurrence structural data used by isomorphism search: consumed
/// initial tokens by host, and consumed produced tokens by (producer, host).
struct NodeInfo {
    host: Ident,
    depth: usize,
    init: Multiset<Ident>,
    edges: BTreeMap<usize, Multiset<Ident>>,
}

fn node_infos(p: &Process) -> Vec<NodeInfo> {
    let direct = p.direct_causes();
    let mut depth = vec![0usize; p.transitions.len()];
    for i in p.topological_order(&direct) {
        depth[i] = direct[i].iter().map(|&d| depth[d] + 1).max().unwrap_or(0);
    }
    p.transitions
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut init = Multiset::new();
            let mut edges: BTreeMap<usize, Multiset<Ident>> = BTreeMap::new();
            for &pl in &t.preset {
                let place = &p.places[pl];
                match place.producer {
                    None => init.insert(place.key.host, 1),
                    Some(u) => edges.entry(u).or_default().insert(place.key.host, 1),
                }
            }
            NodeInfo {
                host: t.key.host,
                depth: depth[i],
                init,
                edges,
            }
        })
        .collect()
}

/// Decides whether two processes of the same net are isomorphic by a
/// bijection that preserves flow, the initial occurrences and the mapping
/// to the host net.
///
/// Backtracking over transition occurrences, pruned by host label, causal
/// depth and wiring; the place bijection is forced once transitions match.
pub fn are_isomorphic(a: &Process, b: &Process) -> bool {
    if !a.same_net(b) {
        return false;
    }
    if a.transition_count() != b.transition_count() || a.place_count() != b.place_count() {
        return false;
    }
    if a.transition_hosts() != b.transition_hosts() || a.final_marking() != b.final_marking() {
        return false;
    }
    let infos_a = node_infos(a);
    let infos_b = node_infos(b);
    let profile = |infos: &[NodeInfo]| {
        let mut m: Multiset<(Ident, usize)> = Multiset::new();
        for info in infos {
            m.insert((info.host, info.depth), 1);
        }
        m
    };
    if profile(&infos_a) != profile(&infos_b) {
        return false;
    }

    let order = a.topological_order(&a.direct_causes());
    let n = order.len();
    let mut map: Vec<Option<usize>> = vec![None; infos_a.len()];
    let mut used = vec![false; infos_b.len()];

    fn matches(ia: &NodeInfo, ib: &NodeInfo, map: &[Option<usize>]) -> bool {
        if ia.host != ib.host || ia.depth != ib.depth || ia.init != ib.init {
            return false;
        }
        if ia.edges.len() != ib.edges.len() {
            return false;
        }
        ia.edges
            .iter()
            .all(|(u, hosts)| map[*u].is_some_and(|mu| ib.edges.get(&mu) == Some(hosts)))
    }

    fn rec(
        k: usize,
        order: &[usize],
        infos_a: &[NodeInfo],
        infos_b: &[NodeInfo],
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
    ) -> bool {
        if k == order.len() {
            return true;
        }
        let i = order[k];
        // exchanging twin targets cannot turn a failure into a success
        let twins = |x: usize, y: usize| {
            infos_b[x].host == infos_b[y].host
                && infos_b[x].init == infos_b[y].init
                && infos_b[x].edges == infos_b[y].edges
                && infos_b.iter().all(|c| c.edges.get(&x) == c.edges.get(&y))
        };
        let mut failed: Vec<usize> = Vec::new();
        for j in 0..infos_b.len() {
            if !used[j] && matches(&infos_a[i], &infos_b[j], map) {
                if failed.iter().any(|&f| twins(f, j)) {
                    continue;
                }
                map[i] = Some(j);
                used[j] = true;
                if rec(k + 1, order, infos_a, infos_b, map, used) {
                    return true;
                }
                map[i] = None;
                used[j] = false;
                failed.push(j);
            }
        }
        false
    }

    n == 0 || rec(0, &order, &infos_a, &infos_b, &mut map, &mut used)
}

// ---------------------------------------------------------------------------
// Canonical forms

/// Canonical structural code: two processes of the same net have equal keys
/// exactly when they are isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanonicalKey(Vec<CanonChunk>);

type CanonChunk = (Ident, Vec<(Ident, u64)>, Vec<(usize, Ident, u64)>);

/// Least code over all topological placements of the transition
/// occurrences. Ties branch; the search explores only locally minimal
/// extensions, which preserves the global minimum.
pub fn canonical_key(p: &Process) -> CanonicalKey {
    let infos = node_infos(p);
    let direct = p.direct_causes();
    let n = infos.len();

    let chunk_of = |i: usize, pos: &[Option<usize>]| -> CanonChunk {
        let init: Vec<(Ident, u64)> = infos[i].init.iter().map(|(&h, c)| (h, c)).collect();
        let mut edges: Vec<(usize, Ident, u64)> = Vec::new();
        for (u, hosts) in &infos[i].edges {
            let up = pos[*u].expect("producers are placed before consumers");
            for (&h, c) in hosts.iter() {
                edges.push((up, h, c));
            }
        }
        edges.sort();
        (infos[i].host, init, edges)
    };

    struct Search<'a> {
        n: usize,
        direct: &'a [BTreeSet<usize>],
        twins: &'a dyn Fn(usize, usize) -> bool,
        pos: Vec<Option<usize>>,
        placed: Vec<bool>,
        code: Vec<CanonChunk>,
        best: Option<Vec<CanonChunk>>,
    }

    impl Search<'_> {
        fn run(&mut self, k: usize, chunk_of: &dyn Fn(usize, &[Option<usize>]) -> CanonChunk) {
            if k == self.n {
                if self
                    .best
                    .as_ref()
                    .is_none_or(|b| self.code.as_slice() < b.as_slice())
                {
                    self.best = Some(self.code.clone());
                }
                return;
            }
            let mut candidates: Vec<(CanonChunk, usize)> = (0..self.n)
                .filter(|&i| !self.placed[i] && self.direct[i].iter().all(|&d| self.placed[d]))
                .map(|i| (chunk_of(i, &self.pos), i))
                .collect();
            candidates.sort();
            let min_chunk = candidates[0].0.clone();
            let mut tried: Vec<usize> = Vec::new();
            for (chunk, i) in candidates {
                if chunk != min_chunk {
                    break;
                }
                // transposing two twins is an automorphism: exploring one
                // of them is enough
                if tried.iter().any(|&j| (self.twins)(i, j)) {
                    continue;
                }
                tried.push(i);
                self.placed[i] = true;
                self.pos[i] = Some(k);
                self.code.push(chunk);
                self.run(k + 1, chunk_of);
                self.code.pop();
                self.pos[i] = None;
                self.placed[i] = false;
            }
        }
    }

    // i and j are twins when exchanging them leaves the occurrence DAG
    // unchanged: same host, same consumed tokens from the same concrete
    // producers, and every other occurrence consumes the same tokens from
    // both
    let twins = |i: usize, j: usize| -> bool {
        infos[i].host == infos[j].host
            && infos[i].init == infos[j].init
            && infos[i].edges == infos[j].edges
            && infos.iter().all(|c| c.edges.get(&i) == c.edges.get(&j))
    };

    let mut search = Search {
        n,
        direct: &direct,
        twins: &twins,
        pos: vec![None; n],
        placed: vec![false; n],
        code: Vec::new(),
        best: None,
    };
    if n > 0 {
        search.run(0, &chunk_of);
    }
    CanonicalKey(search.best.unwrap_or_default())
}
