//! Machinery shared by the tree searches: budgets, progress records and
//! a forward-checking constraint network over parameters and variables.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::model::{Environment, ProblemSpec, VarRef};
use crate::valueset::ValueSet;

/// Limits on a search run. All limits are optional; an empty budget runs to
/// the natural stop.
#[derive(Clone, Debug, Default)]
pub struct Budget {
    /// Node expansions for the pure search, iterations for the conditional search.
    pub max_steps: Option<u64>,
    pub time_limit: Option<Duration>,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn steps(n: u64) -> Self {
        Budget {
            max_steps: Some(n),
            ..Self::default()
        }
    }

    pub fn time(limit: Duration) -> Self {
        Budget {
            time_limit: Some(limit),
            ..Self::default()
        }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub(crate) fn start(&self) -> Clock<'_> {
        Clock {
            budget: self,
            started: Instant::now(),
        }
    }
}

pub(crate) struct Clock<'a> {
    budget: &'a Budget,
    started: Instant,
}

impl Clock<'_> {
    /// True once `steps` reaches the step limit, the time limit passes, or
    /// the cancel flag is raised.
    pub(crate) fn exhausted(&self, steps: u64) -> bool {
        if self.budget.max_steps.is_some_and(|m| steps >= m) {
            return true;
        }
        if self
            .budget
            .time_limit
            .is_some_and(|t| self.started.elapsed() >= t)
        {
            return true;
        }
        self.budget
            .cancel
            .as_ref()
            .is_some_and(|c| c.load(Ordering::Relaxed))
    }

    pub(crate) fn elapsed_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }
}

/// One line of the progress stream.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProgressRecord {
    /// The pure search found a strictly better decision.
    Incumbent {
        incumbent_ps: f64,
        nodes: u64,
        elapsed_ms: u64,
    },
    /// The conditional search finished an iteration.
    Iteration {
        p_good: f64,
        p_bad: f64,
        iterations: u64,
        elapsed_ms: u64,
    },
}

/// Receives progress records as the search runs.
pub trait ProgressSink {
    fn record(&mut self, record: ProgressRecord);
}

impl<F: FnMut(ProgressRecord)> ProgressSink for F {
    fn record(&mut self, record: ProgressRecord) {
        self(record)
    }
}

/// Discards every record.
pub struct NoProgress;

impl ProgressSink for NoProgress {
    fn record(&mut self, _: ProgressRecord) {}
}

/// Constraint network over the unified index space: decision variable `i`
/// is node `i`, parameter `k` is node `n_vars + k`.
pub(crate) struct Network<'a> {
    pub(crate) spec: &'a ProblemSpec,
    pub(crate) n_vars: usize,
    scopes: Vec<Vec<usize>>,
    watchers: Vec<Vec<usize>>,
}

impl<'a> Network<'a> {
    pub(crate) fn new(spec: &'a ProblemSpec) -> Self {
        let n_vars = spec.variables().len();
        let n = n_vars + spec.parameters().len();
        let scopes: Vec<Vec<usize>> = spec
            .constraints()
            .iter()
            .map(|c| {
                c.scope()
                    .iter()
                    .map(|r| match *r {
                        VarRef::Var(i) => i,
                        VarRef::Param(k) => n_vars + k,
                    })
                    .collect()
            })
            .collect();
        let mut watchers = vec![Vec::new(); n];
        for (ci, scope) in scopes.iter().enumerate() {
            for &v in scope {
                watchers[v].push(ci);
            }
        }
        Network {
            spec,
            n_vars,
            scopes,
            watchers,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.watchers.len()
    }

    pub(crate) fn param_node(&self, k: usize) -> usize {
        self.n_vars + k
    }

    /// Initial domains: full variable domains, parameter domains taken from `env`.
    pub(crate) fn domains(&self, env: Option<&Environment>) -> Domains {
        let mut doms: Vec<ValueSet> = self
            .spec
            .variables()
            .iter()
            .map(|x| ValueSet::full(x.domain_size()))
            .collect();
        match env {
            Some(e) => doms.extend(e.sets().iter().cloned()),
            None => doms.extend(
                self.spec
                    .parameters()
                    .iter()
                    .map(|p| ValueSet::full(p.domain_size())),
            ),
        }
        Domains {
            doms,
            assigned: vec![None; self.len()],
            trail: Vec::new(),
        }
    }

    /// Filters the unassigned members of a constraint's scope down to values
    /// that appear in some tuple compatible with the current domains.
    /// Returns false when no tuple is compatible or a domain empties.
    fn revise(&self, ci: usize, doms: &mut Domains) -> bool {
        let scope = &self.scopes[ci];
        let allowed = self.spec.constraints()[ci].allowed();
        let mut support: Vec<Option<ValueSet>> = scope
            .iter()
            .map(|&v| {
                doms.assigned[v]
                    .is_none()
                    .then(|| ValueSet::empty(doms.doms[v].universe()))
            })
            .collect();
        let mut any = false;
        for t in allowed {
            if scope.iter().zip(t).all(|(&v, &x)| doms.doms[v].contains(x)) {
                any = true;
                for (s, &x) in support.iter_mut().zip(t) {
                    if let Some(s) = s {
                        s.insert(x);
                    }
                }
            }
        }
        if !any {
            return false;
        }
        for (&v, s) in scope.iter().zip(support) {
            if let Some(s) = s {
                if !doms.doms[v].is_subset(&s) {
                    let narrowed = doms.doms[v].intersection(&s);
                    doms.set(v, narrowed);
                    if doms.doms[v].is_empty() {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Revises every constraint once, as a root-level filter. Catches unary
    /// constraints, which forward checking never sees.
    pub(crate) fn filter_all(&self, doms: &mut Domains) -> bool {
        (0..self.scopes.len()).all(|ci| self.revise(ci, doms))
    }

    /// Assigns `node := value` and forward-checks every constraint on `node`.
    /// The caller undoes with [`Domains::undo`] using a mark taken before.
    pub(crate) fn assign(&self, node: usize, value: usize, doms: &mut Domains) -> bool {
        doms.set(node, ValueSet::singleton(doms.doms[node].universe(), value));
        doms.assigned[node] = Some(value);
        self.watchers[node].iter().all(|&ci| self.revise(ci, doms))
    }
}

/// Current domains with an undo trail.
#[derive(Clone, Debug)]
pub(crate) struct Domains {
    pub(crate) doms: Vec<ValueSet>,
    pub(crate) assigned: Vec<Option<usize>>,
    trail: Vec<(usize, ValueSet, Option<usize>)>,
}

impl Domains {
    fn set(&mut self, node: usize, dom: ValueSet) {
        let old = std::mem::replace(&mut self.doms[node], dom);
        self.trail.push((node, old, self.assigned[node]));
    }

    pub(crate) fn mark(&self) -> usize {
        self.trail.len()
    }

    /// Nodes whose domain changed since `mark`, possibly with repeats.
    pub(crate) fn changed_since(&self, mark: usize) -> impl Iterator<Item = usize> + '_ {
        self.trail[mark..].iter().map(|(n, _, _)| *n)
    }

    pub(crate) fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (node, dom, assigned) = self.trail.pop().expect("trail above mark");
            self.doms[node] = dom;
            self.assigned[node] = assigned;
        }
    }
}
