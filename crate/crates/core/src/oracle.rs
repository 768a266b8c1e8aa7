//! Reference semantics by exhaustive enumeration of worlds and decisions.
//!
//! Everything here is exponential and meant for small instances: it is the
//! referee the search algorithms are checked against. It accepts problems
//! whose constraints involve several parameters.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::conditional::ConditionalDecision;
use crate::model::{approx_eq, Decision, ProblemSpec, World};

/// Largest `|worlds| · |decisions|` the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{worlds} worlds × {decisions} decisions exceeds the enumeration limit of {ORACLE_LIMIT}")]
pub struct TooLarge {
    pub worlds: u128,
    pub decisions: u128,
}

pub fn check_size(spec: &ProblemSpec) -> Result<(), TooLarge> {
    let worlds = spec.world_count();
    let decisions = spec.decision_count();
    if worlds.saturating_mul(decisions) > ORACLE_LIMIT {
        return Err(TooLarge { worlds, decisions });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    /// Possible worlds covered by at least one decision.
    pub good_worlds: BTreeSet<World>,
    /// Possible worlds covered by no decision.
    pub bad_worlds: BTreeSet<World>,
    pub p_cons: f64,
    pub ps_table: BTreeMap<Decision, f64>,
    /// Every decision whose PS is maximal (within tolerance).
    pub optimal_pure: BTreeSet<Decision>,
    pub p_spd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Universality {
    StrongUniversal,
    Universal,
    Neither,
}

/// Probability that `decision` covers the actual world.
pub fn ps_of_decision(spec: &ProblemSpec, decision: &Decision) -> f64 {
    spec.worlds()
        .filter(|w| spec.covers(decision, w))
        .map(|w| spec.world_probability(&w))
        .sum()
}

fn is_good(spec: &ProblemSpec, world: &World) -> bool {
    spec.decisions().any(|d| spec.covers(&d, world))
}

/// Splits the possible worlds into good and bad ones.
pub fn partition_worlds(
    spec: &ProblemSpec,
) -> Result<(BTreeSet<World>, BTreeSet<World>, f64), TooLarge> {
    check_size(spec)?;
    let mut good = BTreeSet::new();
    let mut bad = BTreeSet::new();
    let mut p_cons = 0.0;
    for w in spec.worlds() {
        let pr = spec.world_probability(&w);
        if pr <= 0.0 {
            continue;
        }
        if is_good(spec, &w) {
            p_cons += pr;
            good.insert(w);
        } else {
            bad.insert(w);
        }
    }
    Ok((good, bad, p_cons))
}

pub fn p_cons(spec: &ProblemSpec) -> Result<f64, TooLarge> {
    partition_worlds(spec).map(|(_, _, p)| p)
}

/// All pure decisions of maximal PS, and that maximum.
pub fn optimal_pure(spec: &ProblemSpec) -> Result<(BTreeSet<Decision>, f64), TooLarge> {
    check_size(spec)?;
    let table: BTreeMap<Decision, f64> = spec
        .decisions()
        .map(|d| {
            let ps = ps_of_decision(spec, &d);
            (d, ps)
        })
        .collect();
    Ok(argmax(&table))
}

fn argmax(table: &BTreeMap<Decision, f64>) -> (BTreeSet<Decision>, f64) {
    let best = table.values().copied().fold(0.0, f64::max);
    let set = table
        .iter()
        .filter(|(_, &ps)| approx_eq(ps, best))
        .map(|(d, _)| d.clone())
        .collect();
    (set, best)
}

pub fn analyze(spec: &ProblemSpec) -> Result<OracleReport, TooLarge> {
    let (good_worlds, bad_worlds, p_cons) = partition_worlds(spec)?;
    let ps_table: BTreeMap<Decision, f64> = spec
        .decisions()
        .map(|d| {
            let ps = ps_of_decision(spec, &d);
            (d, ps)
        })
        .collect();
    let (optimal_pure, p_spd) = argmax(&ps_table);
    Ok(OracleReport {
        good_worlds,
        bad_worlds,
        p_cons,
        ps_table,
        optimal_pure,
        p_spd,
    })
}

/// Compares PS(d) with 1 and with the probability of consistency.
pub fn universality_check(
    spec: &ProblemSpec,
    decision: &Decision,
) -> Result<Universality, TooLarge> {
    let p_cons = p_cons(spec)?;
    let ps = ps_of_decision(spec, decision);
    Ok(if approx_eq(ps, 1.0) {
        Universality::StrongUniversal
    } else if approx_eq(ps, p_cons) {
        Universality::Universal
    } else {
        Universality::Neither
    })
}

/// True when some pure decision covers every possible world.
pub fn is_strongly_consistent(spec: &ProblemSpec) -> Result<bool, TooLarge> {
    optimal_pure(spec).map(|(_, p)| approx_eq(p, 1.0))
}

/// For each possible world, the lexicographically first covering decision,
/// or `None` for bad worlds.
pub fn optimal_conditional_table(
    spec: &ProblemSpec,
) -> Result<BTreeMap<World, Option<Decision>>, TooLarge> {
    check_size(spec)?;
    Ok(spec
        .worlds()
        .filter(|w| spec.world_probability(w) > 0.0)
        .map(|w| {
            let d = spec.decisions().find(|d| spec.covers(d, &w));
            (w, d)
        })
        .collect())
}

/// PS of a table-form conditional decision: total probability of the
/// worlds whose assigned decision covers them.
pub fn table_ps(spec: &ProblemSpec, table: &BTreeMap<World, Option<Decision>>) -> f64 {
    table
        .iter()
        .filter_map(|(w, d)| d.as_ref().map(|d| (w, d)))
        .filter(|(w, d)| spec.covers(d, w))
        .map(|(w, _)| spec.world_probability(w))
        .sum()
}

/// PS of a rule-list conditional decision, by summing over the worlds each
/// rule maps. Assumes the rule environments are disjoint.
pub fn conditional_ps(spec: &ProblemSpec, cd: &ConditionalDecision) -> f64 {
    cd.rules
        .iter()
        .flat_map(|r| r.environment.worlds().map(move |w| (w, &r.decision)))
        .filter(|(w, d)| spec.covers(d, w))
        .map(|(w, _)| spec.world_probability(&w))
        .sum()
}

/// Every world mapped by a rule is covered by that rule's decision.
pub fn is_sound(spec: &ProblemSpec, cd: &ConditionalDecision) -> bool {
    cd.rules
        .iter()
        .all(|r| r.environment.worlds().all(|w| spec.covers(&r.decision, &w)))
}
