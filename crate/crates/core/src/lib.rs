//! Semantics workbench for place/transition nets.
//!
//! The crate models weighted P/T nets with step firing and builds the whole
//! chain of causal-semantics notions on top of them:
//!
//! * occurrence-net processes of a net, constructed from firing sequences
//!   ([`process`]),
//! * the swap transformation on processes and swapping equivalence
//!   ([`swap`]),
//! * adjacency of firing sequences and trace classes, runs and their prefix
//!   order ([`traces`]),
//! * semantic conflict of transition multisets and the structural-conflict
//!   net check ([`conflict`]).
//!
//! Whole-net questions quantify over all reachable markings, which is not
//! decidable for unbounded nets, so those analyses take explicit bounds and
//! answer with three-valued [`verdict::Verdict`]s.
//!
//! [`generate`] produces seeded random nets for the property suites in
//! [`oracle`], which cross-check the sequence-level and process-level views
//! of equivalence against each other. [`mod@format`] holds the textual net
//! format and process exports.
//!
//! ```
//! use ptsem_core::format::parse_net;
//! use ptsem_core::process::{build_process, pi_members, TokenPolicy};
//! use ptsem_core::swap::{swap_equivalent, SwapMethod};
//! use std::sync::Arc;
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! // two producers fill a buffer place, a consumer drains one token
//! let net = Arc::new(parse_net(
//!     "place s1 1\nplace s2 1\nplace buf\ntrans a\ntrans b\ntrans c\n\
//!      arc s1 a\narc s2 b\narc a buf\narc b buf\narc buf c\n",
//! )?);
//! let word = net.parse_word("a b c")?;
//!
//! // c may take either buffer token: two processes up to isomorphism,
//! // identified by swapping
//! let members = pi_members(&net, &word, true, 1000)?;
//! assert_eq!(members.processes.len(), 2);
//! assert!(swap_equivalent(
//!     &members.processes[0],
//!     &members.processes[1],
//!     SwapMethod::ViaTraces,
//! ));
//!
//! let process = build_process(&net, &word, &TokenPolicy::OldestFirst)?;
//! assert_eq!(process.linearisations().len(), 3);
//! # Ok(())
//! # }
//! ```

pub mod conflict;
pub mod format;
pub mod generate;
pub mod multiset;
pub mod net;
pub mod oracle;
pub mod process;
pub mod swap;
pub mod traces;
pub mod verdict;

pub use multiset::Multiset;
pub use net::{Ident, Marking, Net, NetBuilder, Step, Word};
pub use process::{Process, TokenPolicy};
pub use verdict::{Bounds, Status, Verdict};
