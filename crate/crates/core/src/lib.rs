//! Consistency-based diagnosis over acyclic causal influence graphs.
//!
//! Variables are linked by affine influence equations, each owned by a
//! component. Observations that depart from the all-OK simulation mark
//! misbehaving variables; the graph is cut into islands around them, each
//! island is searched for minimal conflicts, and diagnoses are the minimal
//! hitting sets of those conflicts.
//!
//! ```
//! use causaldx::{fixtures, pipeline, text};
//!
//! let obs = text::parse_observations("obs P = 1\nobs X = 5\nobs Y = 6").unwrap();
//! let run = pipeline::diagnose(&fixtures::fork(), &obs, &Default::default()).unwrap();
//! assert_eq!(run.conflicts.len(), 2);
//! assert_eq!(run.diagnoses.len(), 2);
//! ```

pub mod conflict;
pub mod detection;
pub mod diagnosis;
pub mod equation;
pub mod fixtures;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod restriction;
pub mod text;
pub mod value;

pub use conflict::{
    enumerate_pcs, find_minimal_conflicts, verify_pcs, zero_order_conflicts, ConflictSet, PotentialConflictStructure,
    SearchOutcome, SearchStats, SearchStrategy,
};
pub use detection::{detect_misbehaving, simulate, MisbehaviourReport};
pub use diagnosis::{compare_diagnosis_sets, minimal_hitting_sets, Diagnosis};
pub use equation::{check_satisfied, eval_backward, eval_forward, solve_structure, Assignment, Residual, Solution};
pub use model::{
    ancestors, descendants, topological_order, validate_model, CausalGraph, ComponentId, Influence, InfluenceId,
    Variable, VariableId,
};
pub use oracle::{linear_feasible, oracle_conflicts, oracle_hitting_sets};
pub use pipeline::{diagnose, RunOptions, RunResult};
pub use restriction::{closure, islands, Closure};
pub use text::{parse_model, parse_observations};
pub use value::Value;
