//! Three-valued answers for bounded whole-net analyses.
//!
//! Reachability-quantified questions are only semi-decidable on unbounded
//! nets, so every such check carries the bounds it ran under and may answer
//! `Unknown` when a bound was hit.

use std::fmt;

/// Outcome of a bounded check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// No violation found and the bounded exploration was exhaustive.
    HoldsWithinBound,
    /// A violation was found; the verdict carries a witness.
    Violated,
    /// No violation found but a bound cut the exploration short.
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::HoldsWithinBound => write!(f, "holds-within-bound"),
            Status::Violated => write!(f, "violated"),
            Status::Unknown => write!(f, "unknown"),
        }
    }
}

/// Bounds a check ran under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    /// Maximum firing-sequence length explored.
    pub depth: usize,
    /// Exploration stops expanding markings where a place exceeds this.
    pub max_tokens: u64,
    /// Cap on per-transition multiplicity in candidate steps, where used.
    pub gmax: Option<u64>,
}

impl Bounds {
    pub fn new(depth: usize, max_tokens: u64) -> Self {
        Bounds {
            depth,
            max_tokens,
            gmax: None,
        }
    }

    pub fn with_gmax(depth: usize, max_tokens: u64, gmax: u64) -> Self {
        Bounds {
            depth,
            max_tokens,
            gmax: Some(gmax),
        }
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "depth {}", self.depth)?;
        if self.max_tokens != u64::MAX {
            write!(f, ", tokens {}", self.max_tokens)?;
        }
        if let Some(g) = self.gmax {
            write!(f, ", gmax {g}")?;
        }
        Ok(())
    }
}

/// A status plus an optional witness of type `W` and the bounds used.
///
/// Invariant: `status == Violated` implies the witness is present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict<W> {
    pub status: Status,
    pub witness: Option<W>,
    pub bounds: Bounds,
}

impl<W> Verdict<W> {
    pub fn holds(bounds: Bounds) -> Self {
        Verdict {
            status: Status::HoldsWithinBound,
            witness: None,
            bounds,
        }
    }

    pub fn violated(witness: W, bounds: Bounds) -> Self {
        Verdict {
            status: Status::Violated,
            witness: Some(witness),
            bounds,
        }
    }

    pub fn unknown(bounds: Bounds) -> Self {
        Verdict {
            status: Status::Unknown,
            witness: None,
            bounds,
        }
    }

    pub fn is_violated(&self) -> bool {
        self.status == Status::Violated
    }
}
