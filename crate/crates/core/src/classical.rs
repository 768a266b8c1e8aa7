//! Backtracking with forward checking over the mixed network, parameters
//! treated as ordinary variables.
//!
//! Search order is static: decision variables first, then parameters, each
//! in problem order, values in domain order. The first solution found is
//! returned.

use thiserror::Error;

use crate::model::{Decision, Environment, ProblemSpec, World};
use crate::search::{Domains, Network};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MixedOutcome {
    Consistent { world: World, decision: Decision },
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedAssignmentResult {
    pub outcome: MixedOutcome,
    /// Assignments tried.
    pub nodes_expanded: u64,
}

impl MixedAssignmentResult {
    pub fn is_consistent(&self) -> bool {
        matches!(self.outcome, MixedOutcome::Consistent { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("classical solving needs a problem without parameters, this one has {0}")]
pub struct HasParameters(pub usize);

/// Finds a joint `(world, decision)` satisfying every constraint with the
/// world drawn from `env`, or proves there is none.
pub fn solve_mixed(spec: &ProblemSpec, env: &Environment) -> MixedAssignmentResult {
    let net = Network::new(spec);
    let mut doms = net.domains(Some(env));
    let mut nodes = 0;
    let found =
        !env.is_empty() && net.filter_all(&mut doms) && backtrack(&net, &mut doms, 0, &mut nodes);
    let outcome = if found {
        let values: Vec<usize> = doms
            .assigned
            .iter()
            .map(|v| v.expect("complete assignment"))
            .collect();
        MixedOutcome::Consistent {
            decision: Decision(values[..net.n_vars].to_vec()),
            world: World(values[net.n_vars..].to_vec()),
        }
    } else {
        MixedOutcome::Inconsistent
    };
    MixedAssignmentResult {
        outcome,
        nodes_expanded: nodes,
    }
}

fn backtrack(net: &Network<'_>, doms: &mut Domains, node: usize, nodes: &mut u64) -> bool {
    if node == net.len() {
        return true;
    }
    let candidates: Vec<usize> = doms.doms[node].iter().collect();
    for value in candidates {
        *nodes += 1;
        let mark = doms.mark();
        if net.assign(node, value, doms) && backtrack(net, doms, node + 1, nodes) {
            return true;
        }
        doms.undo(mark);
    }
    false
}

/// Solves a problem with no parameters as a classical CSP.
pub fn solve_classical(spec: &ProblemSpec) -> Result<Option<Decision>, HasParameters> {
    if !spec.parameters().is_empty() {
        return Err(HasParameters(spec.parameters().len()));
    }
    Ok(match solve_mixed(spec, &Environment::full(spec)).outcome {
        MixedOutcome::Consistent { decision, .. } => Some(decision),
        MixedOutcome::Inconsistent => None,
    })
}
