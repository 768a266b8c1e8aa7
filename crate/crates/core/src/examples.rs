//! Bundled example problems.

use crate::io::parse_problem;
use crate::model::ProblemSpec;

/// The three-guest dinner problem in the JSON problem format.
pub const DINNER_JSON: &str = include_str!("../data/dinner.json");

/// Wine `x1 ∈ {W, R}` and dish `x2 ∈ {T, B, F}` under three independent
/// guests `l1`, `l2`, `l3`, each either coming (`c`, with probabilities
/// 0.6, 0.9, 0.5) or not (`nc`).
pub fn dinner() -> ProblemSpec {
    parse_problem(DINNER_JSON).expect("bundled dinner problem is valid")
}

/// The dinner problem where the third guest certainly stays home.
pub fn dinner_third_guest_absent() -> ProblemSpec {
    dinner()
        .with_distribution(2, vec![0.0, 1.0])
        .expect("still a distribution")
}
