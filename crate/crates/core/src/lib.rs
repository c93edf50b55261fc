//! Commit-and-open Σ-protocols over a hash-based random oracle, with the
//! machinery to study them: the Fiat-Shamir and Unruh transformations,
//! Merkle-tree collective commitments with octopus openings, an online
//! witness extractor that inspects a recording oracle's query database,
//! adversarial provers for grinding and collision attacks, and exact
//! evaluators for the associated extraction-error bounds.
//!
//! The crate is organised around the lifecycle of a proof:
//!
//! * [`rom`] — the random-oracle abstraction: tagged inputs, a recording
//!   (lazy-sampling) database, and a concrete production hash.
//! * [`sigma`] — plain Σ-protocol descriptors and generalized soundness
//!   systems (monotone families of qualifying challenge sets).
//! * [`cno`] — commit-and-open protocols, parallel repetition, and the
//!   search-based witness extractor.
//! * [`merkle`] — Merkle-tree commitments, octopus openings, and
//!   reverse-engineering trees out of an oracle database.
//! * [`fs`] — the Fiat-Shamir transformation producing [`fs::NizkProof`]s
//!   and signatures with a bit-exact wire format.
//! * [`unruh`] — the pre-Unruh transformation of a plain Σ-protocol and the
//!   composed Unruh / Merkle-Unruh schemes.
//! * [`extract`] — the online extractor, database diagnostics, and
//!   adversarial provers used to validate the bounds empirically.
//! * [`params`] — exact big-rational evaluation of the extraction-error
//!   bound formulas and the reduction-loss comparison table.
//! * [`instances`] — a toy graph 3-coloring protocol and a binary-challenge
//!   discrete-log protocol that drive the whole stack end to end.

pub mod cno;
pub mod extract;
pub mod fs;
pub mod instances;
pub mod merkle;
pub mod params;
pub mod rom;
pub mod sigma;
pub mod unruh;

use thiserror::Error;

/// Errors shared across the crate. Verification failures are never errors:
/// verifiers return `false`/reject on malformed data. Errors mark misuse of
/// an operation outside its stated preconditions.
#[derive(Debug, Error)]
pub enum Error {
    /// An oracle input exceeds the configured maximum encoded length.
    #[error("oracle input too long: {len} bytes exceeds limit {max}")]
    InputTooLong { len: usize, max: usize },

    /// Exhaustive work over a challenge space was requested beyond the gate.
    #[error("challenge space too large for {op}: |C| = {size}")]
    ChallengeSpaceTooLarge { op: &'static str, size: String },

    /// A set handed to the set-given extractor is not a minimal qualifying set.
    #[error("challenge set is not a minimal qualifying set")]
    NotMinimalSet,

    /// A challenge is not a valid member of the challenge space.
    #[error("invalid challenge: {0}")]
    InvalidChallenge(String),

    /// Restricting a challenge space left no member within the bound.
    #[error("challenge-space restriction is empty (bound {bound})")]
    EmptyRestriction { bound: usize },

    /// The digest length cannot support a near-uniform challenge derivation.
    #[error("bias budget violated: n = {n} bits < 64 + ceil(log2 |C|) = {required}")]
    BiasBudgetViolated { n: usize, required: usize },

    /// A prover exceeded its declared query budget or otherwise broke the
    /// harness contract.
    #[error("prover misbehaved: {0}")]
    ProverMisbehaved(String),

    /// The honest prover was invoked on an instance without a valid witness.
    #[error("instance is not colorable by the supplied witness")]
    NotColorable,

    /// Malformed structured input (instance files, witness files, proofs
    /// where an error rather than a reject is appropriate).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
