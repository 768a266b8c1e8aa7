//! Subdomain extraction: splitting an environment `E` around a covered
//! environment `F` into disjoint remainders outside `F`, with the
//! probability of each piece maintained incrementally.

use thiserror::Error;

use crate::model::{approx_eq, Decision, Environment, ModelError, ProblemSpec, VarRef};
use crate::valueset::ValueSet;

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionResult {
    /// Disjoint sub-environments of `E \ F`, in parameter order of their split.
    pub remainders: Vec<Environment>,
    /// Probability of `E ∩ F`.
    pub overlap_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompositionError {
    #[error("cannot decompose an empty environment")]
    Empty,
    #[error("environments range over different parameters")]
    Shape,
    #[error("cached probability {cached} disagrees with the environment's probability {actual}")]
    Probability { cached: f64, actual: f64 },
}

/// Decomposes `e` against `f`.
///
/// Parameters are visited in problem order. At parameter `i` the values of
/// the running environment `E'` outside `F` are split off as a remainder,
/// its probability obtained by scaling `p(E')` by the mass ratio along `i`,
/// and `E'` narrows to its intersection with `F` along `i`. The loop stops
/// early once `E'` becomes empty. What is left of `E'` is `E ∩ F`.
///
/// When `E` and `F` share no world, `E` is returned whole rather than
/// split along the parameters that precede the first disjoint one.
pub fn dec(
    spec: &ProblemSpec,
    e: &Environment,
    f: &Environment,
) -> Result<DecompositionResult, DecompositionError> {
    let n = spec.parameters().len();
    if e.sets().len() != n || f.sets().len() != n {
        return Err(DecompositionError::Shape);
    }
    if e.is_empty() {
        return Err(DecompositionError::Empty);
    }
    let actual = e.recompute_probability(spec);
    if !approx_eq(actual, e.probability()) {
        return Err(DecompositionError::Probability {
            cached: e.probability(),
            actual,
        });
    }

    if e.is_disjoint(f) {
        return Ok(DecompositionResult {
            remainders: vec![e.clone()],
            overlap_probability: 0.0,
        });
    }

    let mut remainders = Vec::new();
    let mut current: Vec<ValueSet> = e.sets().to_vec();
    let mut p_current = e.probability();
    for (i, param) in spec.parameters().iter().enumerate() {
        let probs = param.probabilities();
        let rest = current[i].difference(f.set(i));
        if !rest.is_empty() {
            let mass_current = current[i].mass(probs);
            let p_rest = if mass_current > 0.0 {
                p_current * rest.mass(probs) / mass_current
            } else {
                0.0
            };
            let mut sets = current.clone();
            sets[i] = rest;
            remainders.push(Environment::with_probability(sets, p_rest));
            current[i] = current[i].intersection(f.set(i));
            p_current = (p_current - p_rest).max(0.0);
        }
        if current[i].is_empty() {
            return Ok(DecompositionResult {
                remainders,
                overlap_probability: 0.0,
            });
        }
    }
    Ok(DecompositionResult {
        remainders,
        overlap_probability: p_current,
    })
}

/// The worlds covered by `decision`, as an environment, or `None` when it
/// covers no world at all.
///
/// Each parameter keeps the values every constraint on it allows alongside
/// `decision`. This is exact only when each constraint involves at most one
/// parameter, which is checked.
pub fn covered_environment(
    spec: &ProblemSpec,
    decision: &Decision,
) -> Result<Option<Environment>, ModelError> {
    spec.require_property_f()?;
    let mut sets: Vec<ValueSet> = spec
        .parameters()
        .iter()
        .map(|p| ValueSet::full(p.domain_size()))
        .collect();
    for c in spec.constraints() {
        let param = c.scope().iter().position(|r| matches!(r, VarRef::Param(_)));
        match param {
            None => {
                if !c.is_satisfied(&[], decision.values()) {
                    return Ok(None);
                }
            }
            Some(pos) => {
                let VarRef::Param(k) = c.scope()[pos] else {
                    unreachable!()
                };
                let allowed: ValueSet = ValueSet::from_values(
                    sets[k].universe(),
                    c.allowed()
                        .iter()
                        .filter(|t| {
                            c.scope().iter().zip(t.iter()).all(|(r, &v)| match *r {
                                VarRef::Var(i) => decision.values()[i] == v,
                                VarRef::Param(_) => true,
                            })
                        })
                        .map(|t| t[pos]),
                );
                sets[k] = sets[k].intersection(&allowed);
            }
        }
    }
    let env = Environment::new(spec, sets)?;
    Ok((!env.is_empty()).then_some(env))
}
