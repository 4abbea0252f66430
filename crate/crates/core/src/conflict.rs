//! Semantic conflict of transition multisets and the structural-conflict
//! net check.
//!
//! A multiset of transitions is in conflict at a marking when each
//! single-transition part can fire on its own but the whole multiset
//! cannot. Both whole-net checks here quantify over reachable markings, so
//! they run over a bounded exploration and answer with a [`Verdict`].

use std::collections::BTreeSet;

use thiserror::Error;

use crate::multiset::Multiset;
use crate::net::{Ident, Marking, Net, Word};
use crate::verdict::{Bounds, Status, Verdict};

/// A semantic conflict found at a reachable marking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictWitness {
    /// Firing sequence reaching the marking.
    pub sequence: Word,
    pub marking: Marking,
    /// The conflicting multiset of transitions.
    pub multiset: Multiset<Ident>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConflictError {
    #[error("structural-conflict precondition not established (verdict was {0})")]
    StructuralNotEstablished(Status),
}

/// Semantic conflict: every single-transition part of `g` is enabled at
/// `marking` but `g` itself is not. `g` must be non-empty.
pub fn is_conflict(net: &Net, marking: &Marking, g: &Multiset<Ident>) -> bool {
    !g.is_empty()
        && g.elements().all(|t| net.enabled(marking, &g.project(t)))
        && !net.enabled(marking, g)
}

/// Candidate multisets `G` at a marking: non-empty, per-transition
/// multiplicity bounded both by `gmax` and by single-part enabledness
/// (`G(t)` copies of `t` must fire as a step on their own).
///
/// Ordered by support (lexicographic over transition identifiers), then by
/// ascending multiplicity vector.
pub fn candidate_steps(net: &Net, marking: &Marking, gmax: u64) -> Vec<Multiset<Ident>> {
    let caps: Vec<(Ident, u64)> = net
        .transitions()
        .filter_map(|t| {
            let pre = net.preset_of(t);
            if pre.is_empty() {
                return None;
            }
            let cap = pre
                .iter()
                .map(|(s, w)| marking.count(s) / w)
                .min()
                .unwrap_or(0)
                .min(gmax);
            (cap > 0).then_some((t, cap))
        })
        .collect();

    let mut out = Vec::new();
    let mut current: Vec<u64> = vec![0; caps.len()];
    loop {
        // advance the odometer, last digit fastest
        let mut i = caps.len();
        loop {
            if i == 0 {
                out.sort_by_key(|g: &Multiset<Ident>| {
                    (
                        g.elements().copied().collect::<Vec<_>>(),
                        g.iter().map(|(_, n)| n).collect::<Vec<_>>(),
                    )
                });
                return out;
            }
            i -= 1;
            if current[i] < caps[i].1 {
                current[i] += 1;
                for d in current.iter_mut().skip(i + 1) {
                    *d = 0;
                }
                break;
            }
        }
        let g: Multiset<Ident> = caps
            .iter()
            .zip(&current)
            .filter(|(_, &m)| m > 0)
            .map(|(&(t, _), &m)| (t, m))
            .collect();
        out.push(g);
    }
}

/// Result of scanning reachable markings for semantic conflicts.
#[derive(Debug, Clone)]
pub struct ConflictScan {
    /// Inclusion-minimal conflicting multisets, one group per marking, in
    /// exploration order.
    pub witnesses: Vec<ConflictWitness>,
    pub truncated: bool,
    pub bounds: Bounds,
}

impl ConflictScan {
    pub fn is_conflict_free_within_bounds(&self) -> bool {
        self.witnesses.is_empty() && !self.truncated
    }
}

/// Scans every explored reachable marking for semantic conflicts and
/// reports the inclusion-minimal conflicting multisets per marking.
pub fn find_conflicts(net: &Net, depth: usize, max_tokens: u64, gmax: u64) -> ConflictScan {
    let exploration = net.explore(depth, max_tokens);
    let mut witnesses = Vec::new();
    for state in &exploration.states {
        let conflicting: Vec<Multiset<Ident>> = candidate_steps(net, &state.marking, gmax)
            .into_iter()
            .filter(|g| !net.enabled(&state.marking, g))
            .collect();
        let mut minimal: Vec<&Multiset<Ident>> = conflicting
            .iter()
            .filter(|g| {
                !conflicting
                    .iter()
                    .any(|smaller| smaller != *g && smaller.leq(g))
            })
            .collect();
        minimal.sort_by_key(|g| (g.size(), (*g).clone()));
        for g in minimal {
            witnesses.push(ConflictWitness {
                sequence: state.witness.clone(),
                marking: state.marking.clone(),
                multiset: g.clone(),
            });
        }
    }
    ConflictScan {
        witnesses,
        truncated: exploration.truncated,
        bounds: Bounds::with_gmax(depth, max_tokens, gmax),
    }
}

/// Witness that a net is not a structural conflict net: a reachable step of
/// two transitions that share a preplace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralWitness {
    pub sequence: Word,
    pub marking: Marking,
    /// The co-fireable pair; equal entries mean a self-concurrent step.
    pub pair: (Ident, Ident),
    /// The shared preplaces.
    pub shared: Vec<Ident>,
}

/// Checks whether transitions that can occur together in one reachable step
/// never share a preplace. A self-concurrent step always violates this,
/// since every transition shares its own non-empty preset.
pub fn check_structural(net: &Net, depth: usize, max_tokens: u64) -> Verdict<StructuralWitness> {
    let bounds = Bounds::new(depth, max_tokens);
    let exploration = net.explore(depth, max_tokens);
    let transitions: Vec<Ident> = net.transitions().collect();
    for state in &exploration.states {
        for (i, &t) in transitions.iter().enumerate() {
            for &u in &transitions[i..] {
                let mut step = Multiset::singleton(t);
                step.insert(u, 1);
                if !net.enabled(&state.marking, &step) {
                    continue;
                }
                let shared: Vec<Ident> = net
                    .preset_of(t)
                    .common_elements(net.preset_of(u))
                    .copied()
                    .collect();
                if !shared.is_empty() {
                    return Verdict::violated(
                        StructuralWitness {
                            sequence: state.witness.clone(),
                            marking: state.marking.clone(),
                            pair: (t, u),
                            shared,
                        },
                        bounds,
                    );
                }
            }
        }
    }
    if exploration.truncated {
        Verdict::unknown(bounds)
    } else {
        Verdict::holds(bounds)
    }
}

/// Decides conflict of a *set* of transitions by looking at pairs only:
/// all members individually enabled and some two distinct members not
/// jointly fireable.
///
/// Sound exactly on structural conflict nets, which the caller must have
/// established; pass the verdict from [`check_structural`].
pub fn pairwise_conflict_reduction(
    net: &Net,
    marking: &Marking,
    g: &BTreeSet<Ident>,
    structural: &Verdict<StructuralWitness>,
) -> Result<bool, ConflictError> {
    if structural.status != Status::HoldsWithinBound {
        return Err(ConflictError::StructuralNotEstablished(structural.status));
    }
    let all_enabled = g
        .iter()
        .all(|&t| net.enabled(marking, &Multiset::singleton(t)));
    if !all_enabled {
        return Ok(false);
    }
    let g: Vec<Ident> = g.iter().copied().collect();
    for (i, &t) in g.iter().enumerate() {
        for &u in &g[i + 1..] {
            let mut step = Multiset::singleton(t);
            step.insert(u, 1);
            if !net.enabled(marking, &step) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
