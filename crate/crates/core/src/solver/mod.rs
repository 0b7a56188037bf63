//! Weighted-partial MaxSAT backends.
//!
//! [`solve_brute_force`] enumerates every assignment and serves as an oracle;
//! [`solve_branch_and_bound`] is the built-in anytime solver;
//! [`solve_external`] runs any WDIMACS solver as a subprocess.

mod bnb;
mod brute;
mod external;

use std::time::Duration;

use crate::wcnf::{Assignment, Lit, WcnfFormula};
use crate::Result;

pub use bnb::solve_branch_and_bound;
pub use brute::{solve_brute_force, BRUTE_FORCE_VAR_CAP};
pub use external::solve_external;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    /// The search finished; the cost is the global minimum.
    Optimal,
    /// A limit was hit; the assignment is the best one found.
    BestEffort,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::BestEffort => "best-effort",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    /// Satisfies every hard clause.
    pub assignment: Assignment,
    pub cost: u64,
    pub status: SolveStatus,
    pub elapsed: Duration,
    /// Branching decisions made (0 for backends that do not branch).
    pub nodes: u64,
    /// Incumbent costs in the order they were found.
    pub trace: Vec<u64>,
}

/// Which variable value to try first when branching.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Always `false` first.
    False,
    /// The value satisfying more unresolved hard clauses; ties go to the
    /// value preferred by unit soft clauses, then to `false`.
    #[default]
    Occurrence,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Wall-clock limit; `None` runs to completion.
    pub timeout: Option<Duration>,
    /// Limit on branching decisions; deterministic, unlike `timeout`.
    pub node_limit: Option<u64>,
    /// Non-zero seeds shuffle the tie-break between equally ranked variables.
    pub seed: u64,
    pub polarity: Polarity,
    /// Values for a first greedy descent that may seed the incumbent, e.g.
    /// the previous rule of a mini-batch. Unlisted variables default to false.
    pub hint: Vec<Lit>,
}

impl SolveOptions {
    pub fn unlimited() -> Self {
        Self::default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    BruteForce,
    #[default]
    BranchAndBound,
    /// Command line of an external solver; the WDIMACS path is appended.
    External(String),
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::BruteForce => f.write_str("brute-force"),
            Backend::BranchAndBound => f.write_str("branch-and-bound"),
            Backend::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

pub fn solve(f: &WcnfFormula, backend: &Backend, opts: &SolveOptions) -> Result<SolveResult> {
    match backend {
        Backend::BruteForce => solve_brute_force(f),
        Backend::BranchAndBound => solve_branch_and_bound(f, opts),
        Backend::External(cmd) => solve_external(f, cmd, opts.timeout),
    }
}
