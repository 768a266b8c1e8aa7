//! Depth-first branch and bound for an optimal pure decision.
//!
//! Decision variables are assigned one at a time. After each assignment,
//! forward checking removes incompatible values from the domains of the
//! other variables and of the parameters. The worlds left in the parameter
//! domains are a superset of the worlds any completion can cover, so under
//! independence the product over parameters of the remaining probability
//! mass bounds the PS of every leaf below. At a leaf the bound is exactly
//! the PS of the decision.
//!
//! The search is anytime: the incumbent only improves, and a budgeted run
//! returns the best decision found so far.

use serde::Serialize;

use crate::model::{Decision, ModelError, ProblemSpec, TOLERANCE};
use crate::search::{Budget, Clock, Domains, Network, NoProgress, ProgressRecord, ProgressSink};
use crate::valueset::ValueSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariableOrder {
    /// Problem order.
    #[default]
    Static,
    /// Unassigned variable with the fewest remaining values; ties by problem order.
    SmallestDomain,
}

#[derive(Clone, Debug, Default)]
pub struct PureSearchOptions {
    pub order: VariableOrder,
    pub budget: Budget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    /// `None` when no decision covers any world.
    pub best: Option<Decision>,
    pub best_ps: f64,
    /// The search reached its natural stop, so `best` is optimal.
    pub proven_optimal: bool,
    pub nodes_expanded: u64,
    pub interrupted: bool,
}

/// Remaining probability mass per parameter and their product.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundState {
    masses: Vec<f64>,
    bound: f64,
}

impl BoundState {
    pub fn new(masses: Vec<f64>) -> Self {
        let bound = masses.iter().product();
        BoundState { masses, bound }
    }

    pub fn from_domains(spec: &ProblemSpec, domains: &[ValueSet]) -> Self {
        Self::new(
            domains
                .iter()
                .zip(spec.parameters())
                .map(|(d, p)| d.mass(p.probabilities()))
                .collect(),
        )
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Replaces one parameter's mass, scaling the bound by the relative decrease.
    pub fn update(&mut self, parameter: usize, mass: f64) {
        let old = self.masses[parameter];
        if old > 0.0 {
            self.bound *= mass / old;
        }
        self.masses[parameter] = mass;
    }

    pub fn upper_bound(&self) -> f64 {
        self.bound
    }

    /// The bound recomputed as a fresh product of the masses.
    pub fn recompute(&self) -> f64 {
        self.masses.iter().product()
    }
}

pub fn upper_bound(state: &BoundState) -> f64 {
    state.upper_bound()
}

pub fn search_optimal_pure(
    spec: &ProblemSpec,
    options: &PureSearchOptions,
) -> Result<SearchOutcome, ModelError> {
    search_optimal_pure_with_progress(spec, options, &mut NoProgress)
}

pub fn search_optimal_pure_with_progress(
    spec: &ProblemSpec,
    options: &PureSearchOptions,
    sink: &mut dyn ProgressSink,
) -> Result<SearchOutcome, ModelError> {
    spec.require_property_f()?;
    let net = Network::new(spec);
    let mut doms = net.domains(None);
    let clock = options.budget.start();
    let mut searcher = Searcher {
        net: &net,
        clock,
        sink,
        order: options.order,
        alpha: 0.0,
        best: None,
        nodes: 0,
        interrupted: false,
    };
    if net.filter_all(&mut doms) {
        let root = BoundState::from_domains(spec, &doms.doms[net.n_vars..]);
        searcher.search(&mut doms, 0, root);
    }
    Ok(SearchOutcome {
        best_ps: if searcher.best.is_some() {
            searcher.alpha
        } else {
            0.0
        },
        best: searcher.best,
        proven_optimal: !searcher.interrupted,
        nodes_expanded: searcher.nodes,
        interrupted: searcher.interrupted,
    })
}

struct Searcher<'n, 's> {
    net: &'n Network<'n>,
    clock: Clock<'n>,
    sink: &'s mut dyn ProgressSink,
    order: VariableOrder,
    alpha: f64,
    best: Option<Decision>,
    nodes: u64,
    interrupted: bool,
}

impl Searcher<'_, '_> {
    fn search(&mut self, doms: &mut Domains, depth: usize, bound: BoundState) {
        if self.clock.exhausted(self.nodes) {
            self.interrupted = true;
            return;
        }
        self.nodes += 1;
        let n_vars = self.net.n_vars;
        if depth == n_vars {
            let ps = bound.recompute();
            self.alpha = ps;
            self.best = Some(Decision(
                doms.assigned[..n_vars]
                    .iter()
                    .map(|v| v.expect("leaf assigns every variable"))
                    .collect(),
            ));
            self.sink.record(ProgressRecord::Incumbent {
                incumbent_ps: ps,
                nodes: self.nodes,
                elapsed_ms: self.clock.elapsed_ms(),
            });
            return;
        }
        let var = self.choose(doms);
        let values: Vec<usize> = doms.doms[var].iter().collect();
        for value in values {
            let mark = doms.mark();
            if self.net.assign(var, value, doms) {
                let mut child = bound.clone();
                let mut touched: Vec<usize> = doms
                    .changed_since(mark)
                    .filter(|&n| n >= n_vars)
                    .map(|n| n - n_vars)
                    .collect();
                touched.sort_unstable();
                touched.dedup();
                for k in touched {
                    let probs = self.net.spec.parameters()[k].probabilities();
                    child.update(k, doms.doms[self.net.param_node(k)].mass(probs));
                }
                if self.admits(child.upper_bound()) {
                    self.search(doms, depth + 1, child);
                }
            }
            doms.undo(mark);
            if self.interrupted {
                return;
            }
        }
    }

    /// Descend only if the bound beats the incumbent. Before any leaf is
    /// reached every live branch is admitted, so zero-mass decisions can
    /// still become the incumbent.
    fn admits(&self, bound: f64) -> bool {
        self.best.is_none() || bound > self.alpha + TOLERANCE
    }

    fn choose(&self, doms: &Domains) -> usize {
        let unassigned = (0..self.net.n_vars).filter(|&i| doms.assigned[i].is_none());
        match self.order {
            VariableOrder::Static => unassigned.min(),
            VariableOrder::SmallestDomain => unassigned.min_by_key(|&i| (doms.doms[i].len(), i)),
        }
        .expect("an unassigned variable remains")
    }
}

/// Bound after forward checking the given `(variable, value)` assignments
/// in order from the root; `None` when forward checking hits a dead end.
pub fn upper_bound_after(
    spec: &ProblemSpec,
    assignments: &[(usize, usize)],
) -> Result<Option<f64>, ModelError> {
    spec.require_property_f()?;
    for &(i, v) in assignments {
        spec.check_value(crate::model::VarRef::Var(i), v)?;
    }
    let net = Network::new(spec);
    let mut doms = net.domains(None);
    if !net.filter_all(&mut doms) {
        return Ok(None);
    }
    for &(i, v) in assignments {
        if !doms.doms[i].contains(v) || !net.assign(i, v, &mut doms) {
            return Ok(None);
        }
    }
    Ok(Some(
        BoundState::from_domains(spec, &doms.doms[net.n_vars..]).recompute(),
    ))
}
