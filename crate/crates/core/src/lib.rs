//! Socio-cultural measures over time-binned streams of group-attributed
//! communication transactions.
//!
//! The pipeline runs in stages:
//!
//! 1. [`corpus`] ingests raw or pre-extracted records, extracts facts
//!    (hashtags, retweetees, mentionees, followees) and validates the
//!    resulting [`Transaction`] stream against a user→group roster.
//! 2. [`stream`] bins transactions into fixed-width windows and builds one
//!    [`CultureVector`] per (group, window, practice).
//! 3. [`measures`] computes cultural focus, similarity and reproduction
//!    series per group plus the cross-group average.
//! 4. [`facts`] scores individual facts: institutionness (a temporal
//!    h-index normalized by the window's average fact rate) and burstiness
//!    (two-state cost improvement, normalized per group).
//! 5. [`network`] aggregates user→user references into practice graphs and
//!    reports density, degrees, weights and individual-level homophily.
//!
//! [`synth`] generates synthetic streams from cumulative advantage and
//! homophily mechanisms for validation, [`pipeline`] wires everything to
//! CSV artifacts, and [`selftest`] replays the oracle checks at runtime.
//!
//! Work items that are independent per (group, window) or per fact run on
//! rayon when the `parallel` feature is enabled; see [`exec`].

pub mod corpus;
pub mod exec;
pub mod facts;
pub mod measures;
pub mod network;
pub mod pipeline;
pub mod selftest;
pub mod stream;
pub mod synth;

pub use corpus::{Fact, FactKind, GroupId, Practice, Roster, Transaction, UserHandle};
pub use exec::ExecMode;
pub use stream::{CultureSet, CultureVector, RankedVector, WindowSpec};
