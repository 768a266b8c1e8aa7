//! Probabilistic constraint satisfaction.
//!
//! A problem splits its unknowns into decision variables, chosen by the
//! agent, and parameters, set by the world according to independent
//! discrete distributions. Constraints are explicit tables over any mix of
//! the two. The crate answers two questions:
//!
//! * which single decision covers the actual world with the highest
//!   probability ([`pure_search`]), and
//! * which conditional decision, a table from sets of worlds to decisions,
//!   covers every world that can be covered at all ([`conditional`]).
//!
//! Both searches are anytime. [`oracle`] computes the same quantities by
//! brute force for checking.
//!
//! ```
//! use pcsp_core::examples::dinner;
//! use pcsp_core::pure_search::{search_optimal_pure, PureSearchOptions};
//!
//! let spec = dinner();
//! let out = search_optimal_pure(&spec, &PureSearchOptions::default()).unwrap();
//! assert_eq!(spec.decision_names(&out.best.unwrap()), ["R", "T"]);
//! assert!((out.best_ps - 0.5).abs() < 1e-9);
//! ```

pub mod classical;
pub mod conditional;
pub mod decomposition;
pub mod examples;
pub mod generate;
pub mod io;
pub mod model;
pub mod oracle;
pub mod pure_search;
pub mod search;
pub mod valueset;

pub use conditional::{solve_conditional, ConditionalDecision, ConditionalOptions, Picker, Rule};
pub use model::{
    Constraint, Decision, DecisionVariable, Environment, Parameter, PartialAssignment, ProblemSpec,
    VarRef, World, TOLERANCE,
};
pub use pure_search::{search_optimal_pure, PureSearchOptions, SearchOutcome, VariableOrder};
pub use search::{Budget, ProgressRecord, ProgressSink};
pub use valueset::ValueSet;
