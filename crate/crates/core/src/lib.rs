//! Causal statistical fault localization.
//!
//! The pipeline turns every branch and loop predicate of a MIL program into an
//! assignment to a fresh boolean ([`transform`]), versions every assignment
//! target and places value-recording sites ([`gsa`]), runs the instrumented
//! program over a test suite ([`profile`]), and scores each site by the
//! largest difference between counterfactual failure rates predicted by a
//! random forest that adjusts for the site's causal parents ([`scorer`],
//! [`forest`]). Coverage-, regression-, value- and switching-based baselines
//! live in [`baselines`]; cost metrics and corpus experiments in [`eval`].

pub mod baselines;
pub mod corpus;
pub mod eval;
pub mod forest;
pub mod gsa;
pub mod lang;
pub mod pipeline;
pub mod profile;
pub mod ranking;
pub mod scorer;
pub mod seed;
pub mod transform;

pub use lang::{parse, Program, SiteId, Value};
pub use ranking::{ElementKind, RankEntry, Ranking, Technique};
