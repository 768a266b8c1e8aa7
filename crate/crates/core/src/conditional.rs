//! Anytime construction of an optimal conditional decision.
//!
//! The worklist starts as the single environment holding every world.
//! Each iteration picks an environment `E`. If no `(world, decision)` pair
//! with the world in `E` satisfies the constraints, `E` holds only bad
//! worlds and moves to the bad list. Otherwise the solution's decision `d`
//! covers a Cartesian set of worlds `WC`; every awaiting environment is
//! decomposed against `WC`, the parts inside `WC` become rules mapped to
//! `d`, and the remainders form the new worklist.
//!
//! `p_good` and `p_bad` only grow, and at every step
//! `p_good ≤ P(consistent) ≤ 1 − p_bad`. At the natural stop both bounds meet.

use serde::Serialize;
use thiserror::Error;

use crate::classical::{solve_mixed, MixedOutcome};
use crate::decomposition::{covered_environment, dec, DecompositionError};
use crate::model::{Decision, Environment, ModelError, ProblemSpec, World};
use crate::search::{Budget, NoProgress, ProgressRecord, ProgressSink};

/// Worlds of `environment` are mapped to `decision`, which covers all of them.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub environment: Environment,
    pub decision: Decision,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalDecision {
    /// Pairwise disjoint rules, in the order they were found.
    pub rules: Vec<Rule>,
    /// Environments holding only worlds no decision covers.
    pub bad: Vec<Environment>,
    /// Environments not yet classified when the run was interrupted.
    pub pending: Vec<Environment>,
    pub p_good: f64,
    pub p_bad: f64,
    pub iterations: u64,
    /// The worklist was emptied, so the rules form an optimal conditional decision.
    pub complete: bool,
}

impl ConditionalDecision {
    /// Assembles a conditional decision from rule and bad lists, with
    /// probabilities summed from the environments.
    pub fn from_parts(rules: Vec<Rule>, bad: Vec<Environment>) -> Self {
        ConditionalDecision {
            p_good: rules.iter().map(|r| r.environment.probability()).sum(),
            p_bad: bad.iter().map(Environment::probability).sum(),
            rules,
            bad,
            pending: Vec::new(),
            iterations: 0,
            complete: false,
        }
    }

    /// The decision for `world`, or `None` if the world is bad or unprocessed.
    pub fn lookup(&self, world: &World) -> Option<&Decision> {
        self.rules
            .iter()
            .find(|r| r.environment.contains(world))
            .map(|r| &r.decision)
    }

    pub fn is_known_bad(&self, world: &World) -> bool {
        self.bad.iter().any(|e| e.contains(world))
    }
}

/// Which awaiting environment to expand next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Picker {
    /// Highest probability first; ties go to the oldest.
    #[default]
    MaxProb,
    /// Oldest first.
    Fifo,
}

#[derive(Clone, Debug, Default)]
pub struct ConditionalOptions {
    pub picker: Picker,
    /// `max_steps` counts iterations.
    pub budget: Budget,
}

/// Loop state: rules found so far, the awaiting worklist, the bad list and
/// the two probability bounds.
#[derive(Clone, Debug)]
pub struct ConditionalSearchState {
    pub decisions: Vec<Rule>,
    pub env: Vec<Environment>,
    pub bad: Vec<Environment>,
    pub p_good: f64,
    pub p_bad: f64,
    pub iterations: u64,
}

impl ConditionalSearchState {
    pub fn new(spec: &ProblemSpec) -> Self {
        ConditionalSearchState {
            decisions: Vec::new(),
            env: vec![Environment::full(spec)],
            bad: Vec::new(),
            p_good: 0.0,
            p_bad: 0.0,
            iterations: 0,
        }
    }

    fn pick(&self, picker: Picker) -> usize {
        match picker {
            Picker::Fifo => 0,
            Picker::MaxProb => {
                let mut best = 0;
                for (i, e) in self.env.iter().enumerate().skip(1) {
                    if e.probability() > self.env[best].probability() {
                        best = i;
                    }
                }
                best
            }
        }
    }

    fn mark_bad(&mut self, index: usize) {
        let e = self.env.remove(index);
        self.p_bad += e.probability();
        self.bad.push(e);
    }

    /// Subtracts `covered` from every awaiting environment and records the
    /// overlaps as rules for `decision`.
    fn cover(
        &mut self,
        spec: &ProblemSpec,
        decision: &Decision,
        covered: &Environment,
    ) -> Result<(), DecompositionError> {
        let mut next = Vec::with_capacity(self.env.len() + spec.parameters().len());
        let mut pieces = Vec::new();
        for g in &self.env {
            let split = dec(spec, g, covered)?;
            self.p_good += split.overlap_probability;
            next.extend(split.remainders);
            let overlap = g.intersection(spec, covered);
            if !overlap.is_empty() {
                pieces.push(overlap);
            }
        }
        self.env = next;
        self.decisions.extend(
            merge_pieces(spec, pieces)
                .into_iter()
                .map(|environment| Rule {
                    environment,
                    decision: decision.clone(),
                }),
        );
        Ok(())
    }

    fn finish(self, complete: bool) -> ConditionalDecision {
        ConditionalDecision {
            rules: self.decisions,
            bad: self.bad,
            pending: self.env,
            p_good: self.p_good,
            p_bad: self.p_bad,
            iterations: self.iterations,
            complete,
        }
    }
}

/// Joins environments that differ along a single parameter. Inputs are
/// disjoint, so the joined sets stay disjoint and Cartesian.
fn merge_pieces(spec: &ProblemSpec, mut pieces: Vec<Environment>) -> Vec<Environment> {
    'outer: loop {
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                let a = pieces[i].sets();
                let b = pieces[j].sets();
                let differing: Vec<usize> = (0..a.len()).filter(|&k| a[k] != b[k]).collect();
                if let [k] = differing[..] {
                    let mut sets = a.to_vec();
                    sets[k] = a[k].union(&b[k]);
                    pieces[i] = Environment::new(spec, sets).expect("same shape");
                    pieces.remove(j);
                    continue 'outer;
                }
            }
        }
        return pieces;
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error("forced decision {index} covers no world of the picked environment")]
    ForcedDecisionCoversNothing { index: usize },
}

pub fn solve_conditional(
    spec: &ProblemSpec,
    options: &ConditionalOptions,
) -> Result<ConditionalDecision, ConditionalError> {
    solve_conditional_with_progress(spec, options, &mut NoProgress)
}

pub fn solve_conditional_with_progress(
    spec: &ProblemSpec,
    options: &ConditionalOptions,
    sink: &mut dyn ProgressSink,
) -> Result<ConditionalDecision, ConditionalError> {
    spec.require_property_f()?;
    let clock = options.budget.start();
    let mut state = ConditionalSearchState::new(spec);
    while !state.env.is_empty() {
        if clock.exhausted(state.iterations) {
            return Ok(state.finish(false));
        }
        let index = state.pick(options.picker);
        match solve_mixed(spec, &state.env[index]).outcome {
            MixedOutcome::Inconsistent => state.mark_bad(index),
            MixedOutcome::Consistent { decision, .. } => {
                let covered = covered_environment(spec, &decision)?
                    .expect("a solution's decision covers its own world");
                state.cover(spec, &decision, &covered)?;
            }
        }
        state.iterations += 1;
        sink.record(ProgressRecord::Iteration {
            p_good: state.p_good,
            p_bad: state.p_bad,
            iterations: state.iterations,
            elapsed_ms: clock.elapsed_ms(),
        });
    }
    Ok(state.finish(true))
}

/// Snapshot after one iteration of a replay.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayStep {
    /// The forced decision used, or `None` when the picked environment was bad.
    pub decision: Option<Decision>,
    pub p_good: f64,
    pub p_bad: f64,
    /// Worklist after the iteration.
    pub env: Vec<Environment>,
}

/// Runs the loop with oldest-first picking, using `forced[i]` in place of
/// the solver's decision at the `i`-th covering iteration. Stops when the
/// worklist empties or a covering iteration has no forced decision left.
pub fn replay_conditional(
    spec: &ProblemSpec,
    forced: &[Decision],
) -> Result<Vec<ReplayStep>, ConditionalError> {
    spec.require_property_f()?;
    let mut state = ConditionalSearchState::new(spec);
    let mut forced_iter = forced.iter().enumerate();
    let mut trace = Vec::new();
    while !state.env.is_empty() {
        let index = state.pick(Picker::Fifo);
        let used = if solve_mixed(spec, &state.env[index]).is_consistent() {
            let Some((i, decision)) = forced_iter.next() else {
                break;
            };
            let covered = covered_environment(spec, decision)?
                .filter(|c| !c.intersection(spec, &state.env[index]).is_empty())
                .ok_or(ConditionalError::ForcedDecisionCoversNothing { index: i })?;
            state.cover(spec, decision, &covered)?;
            Some(decision.clone())
        } else {
            state.mark_bad(index);
            None
        };
        state.iterations += 1;
        trace.push(ReplayStep {
            decision: used,
            p_good: state.p_good,
            p_bad: state.p_bad,
            env: state.env.clone(),
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::dinner;
    use crate::model::{approx_eq, Constraint, DecisionVariable, Parameter, VarRef};

    #[test]
    fn dinner_natural_stop() {
        let spec = dinner();
        let cd = solve_conditional(&spec, &ConditionalOptions::default()).unwrap();
        assert!(cd.complete);
        assert!(approx_eq(cd.p_good, 0.55));
        assert!(approx_eq(cd.p_bad, 0.45));
        let bad: Vec<World> = cd.bad.iter().flat_map(|e| e.worlds()).collect();
        assert_eq!(bad.len(), 2);
        assert!(bad.contains(&spec.world_by_names(&["c", "c", "c"]).unwrap()));
        assert!(bad.contains(&spec.world_by_names(&["nc", "c", "c"]).unwrap()));
    }

    #[test]
    fn dinner_lookups() {
        let spec = dinner();
        let cd = solve_conditional(&spec, &ConditionalOptions::default()).unwrap();
        let w = |n: &[&str]| spec.world_by_names(n).unwrap();
        let d = |n: &[&str]| spec.decision_by_names(n).unwrap();
        assert_eq!(cd.lookup(&w(&["c", "nc", "c"])), Some(&d(&["W", "F"])));
        assert_eq!(cd.lookup(&w(&["c", "c", "c"])), None);
        assert!(cd.is_known_bad(&w(&["c", "c", "c"])));
        assert_eq!(cd.lookup(&w(&["c", "c", "nc"])), Some(&d(&["R", "T"])));
    }

    #[test]
    fn unsatisfiable_core_is_all_bad_after_one_iteration() {
        let spec = ProblemSpec::new(
            vec![Parameter::new("l", [("a", 0.5), ("b", 0.5)])],
            vec![DecisionVariable::new("x", ["0"])],
            vec![Constraint::new("never", vec![VarRef::Var(0)], vec![])],
        )
        .unwrap();
        let cd = solve_conditional(&spec, &ConditionalOptions::default()).unwrap();
        assert!(cd.rules.is_empty());
        assert_eq!(cd.iterations, 1);
        assert!(approx_eq(cd.p_bad, 1.0));
    }

    #[test]
    fn parameterless_problem_is_one_rule() {
        let spec =
            ProblemSpec::new(vec![], vec![DecisionVariable::new("x", ["0", "1"])], vec![]).unwrap();
        let cd = solve_conditional(&spec, &ConditionalOptions::default()).unwrap();
        assert_eq!(cd.rules.len(), 1);
        assert_eq!(cd.p_good, 1.0);
        assert_eq!(
            cd.lookup(&spec.world(vec![]).unwrap()),
            Some(&cd.rules[0].decision)
        );
    }

    #[test]
    fn replay_follows_the_worked_trace() {
        let spec = dinner();
        let forced: Vec<Decision> = [["R", "B"], ["R", "T"], ["W", "F"]]
            .iter()
            .map(|n| spec.decision_by_names(n).unwrap())
            .collect();
        let trace = replay_conditional(&spec, &forced).unwrap();
        let goods: Vec<f64> = trace.iter().map(|s| s.p_good).collect();
        let bads: Vec<f64> = trace.iter().map(|s| s.p_bad).collect();
        for (got, want) in goods.iter().zip([0.2, 0.5, 0.55, 0.55, 0.55]) {
            assert!(approx_eq(*got, want), "{goods:?}");
        }
        for (got, want) in bads.iter().zip([0.0, 0.0, 0.0, 0.27, 0.45]) {
            assert!(approx_eq(*got, want), "{bads:?}");
        }
        assert_eq!(trace.len(), 5);
        let before_bad = &trace[2].env;
        assert_eq!(before_bad.len(), 2);
        assert!(before_bad[0]
            .same_worlds(&Environment::from_names(&spec, &[&["c"], &["c"], &["c"]]).unwrap()));
        assert!(approx_eq(before_bad[0].probability(), 0.27));
        assert!(before_bad[1]
            .same_worlds(&Environment::from_names(&spec, &[&["nc"], &["c"], &["c"]]).unwrap()));
        assert!(approx_eq(before_bad[1].probability(), 0.18));
    }

    #[test]
    fn replay_without_forced_decisions_is_empty() {
        let spec = dinner();
        assert!(replay_conditional(&spec, &[]).unwrap().is_empty());
    }

    #[test]
    fn replay_rejects_a_useless_forced_decision() {
        let spec = dinner();
        let d = spec.decision_by_names(&["W", "B"]).unwrap();
        assert_eq!(
            replay_conditional(&spec, &[d]),
            Err(ConditionalError::ForcedDecisionCoversNothing { index: 0 })
        );
    }

    #[test]
    fn iteration_budget_returns_a_sound_partial_answer() {
        let spec = dinner();
        let opts = ConditionalOptions {
            budget: Budget::steps(1),
            ..Default::default()
        };
        let cd = solve_conditional(&spec, &opts).unwrap();
        assert!(!cd.complete);
        assert_eq!(cd.iterations, 1);
        assert!(!cd.pending.is_empty());
        assert!(crate::oracle::is_sound(&spec, &cd));
    }

    #[test]
    fn fifo_picker_also_reaches_the_optimum() {
        let spec = dinner();
        let opts = ConditionalOptions {
            picker: Picker::Fifo,
            ..Default::default()
        };
        let cd = solve_conditional(&spec, &opts).unwrap();
        assert!(approx_eq(cd.p_good, 0.55));
        assert!(approx_eq(crate::oracle::conditional_ps(&spec, &cd), 0.55));
    }
}
