//! Problem representation: parameters with independent distributions,
//! decision variables, extensional constraints, and the probability
//! computations that follow from parameter independence.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::valueset::ValueSet;

/// Absolute tolerance used for every probability comparison.
pub const TOLERANCE: f64 = 1e-9;

pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOLERANCE
}

/// An uncontrollable unknown with a discrete distribution over its values.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    name: String,
    values: Vec<String>,
    probabilities: Vec<f64>,
}

impl Parameter {
    pub fn new<N, V, I>(name: N, values: I) -> Self
    where
        N: Into<String>,
        V: Into<String>,
        I: IntoIterator<Item = (V, f64)>,
    {
        let (values, probabilities) = values.into_iter().map(|(v, p)| (v.into(), p)).unzip();
        Parameter {
            name: name.into(),
            values,
            probabilities,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, value: usize) -> f64 {
        self.probabilities[value]
    }

    pub fn domain_size(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// A variable the agent assigns freely.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVariable {
    name: String,
    values: Vec<String>,
}

impl DecisionVariable {
    pub fn new<N, V, I>(name: N, values: I) -> Self
    where
        N: Into<String>,
        V: Into<String>,
        I: IntoIterator<Item = V>,
    {
        DecisionVariable {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn domain_size(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// Reference to a parameter or a decision variable by its position in the problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Param(usize),
    Var(usize),
}

/// An extensional constraint: a scope and the explicit table of allowed tuples.
///
/// Tuples hold value indices, one per scope entry, and are kept sorted
/// lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    name: String,
    scope: Vec<VarRef>,
    allowed: Vec<Vec<usize>>,
}

impl Constraint {
    pub fn new(name: impl Into<String>, scope: Vec<VarRef>, mut allowed: Vec<Vec<usize>>) -> Self {
        allowed.sort();
        Constraint {
            name: name.into(),
            scope,
            allowed,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scope(&self) -> &[VarRef] {
        &self.scope
    }

    pub fn allowed(&self) -> &[Vec<usize>] {
        &self.allowed
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.scope
            .iter()
            .filter(|r| matches!(r, VarRef::Param(_)))
            .count()
    }

    /// True when the scope mentions at most one parameter.
    pub fn has_property_f(&self) -> bool {
        self.parameter_count() <= 1
    }

    pub fn involves(&self, r: VarRef) -> bool {
        self.scope.contains(&r)
    }

    pub fn allows(&self, tuple: &[usize]) -> bool {
        self.allowed
            .binary_search_by(|t| t.as_slice().cmp(tuple))
            .is_ok()
    }

    /// Whether the joint assignment `(world, decision)` satisfies this constraint.
    pub fn is_satisfied(&self, world: &[usize], decision: &[usize]) -> bool {
        let tuple: Vec<usize> = self
            .scope
            .iter()
            .map(|r| match *r {
                VarRef::Param(k) => world[k],
                VarRef::Var(i) => decision[i],
            })
            .collect();
        self.allows(&tuple)
    }

    /// Restricts the constraint to the tuples compatible with `assignment`
    /// and projects them onto the unassigned part of the scope.
    ///
    /// Entries of `assignment` outside the scope are ignored; they must
    /// still name a legal value of the problem.
    pub fn reduce(
        &self,
        spec: &ProblemSpec,
        assignment: &PartialAssignment,
    ) -> Result<Constraint, ModelError> {
        for (&r, &value) in assignment.iter() {
            spec.check_value(r, value)?;
        }
        let fixed: Vec<Option<usize>> = self.scope.iter().map(|r| assignment.get(*r)).collect();
        let scope = self
            .scope
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(r, _)| *r)
            .collect();
        let mut allowed: Vec<Vec<usize>> = self
            .allowed
            .iter()
            .filter(|t| {
                fixed
                    .iter()
                    .zip(t.iter())
                    .all(|(f, v)| f.is_none_or(|f| f == *v))
            })
            .map(|t| {
                t.iter()
                    .zip(&fixed)
                    .filter(|(_, f)| f.is_none())
                    .map(|(v, _)| *v)
                    .collect()
            })
            .collect();
        allowed.dedup();
        Ok(Constraint {
            name: self.name.clone(),
            scope,
            allowed,
        })
    }
}

/// Complete assignment of the parameters, as value indices in parameter order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct World(pub(crate) Vec<usize>);

/// Complete assignment of the decision variables, as value indices in variable order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Decision(pub(crate) Vec<usize>);

impl World {
    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

impl Decision {
    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

/// Assignment of any subset of parameters and decision variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialAssignment(BTreeMap<VarRef, usize>);

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, r: VarRef, value: usize) -> Self {
        self.0.insert(r, value);
        self
    }

    pub fn insert(&mut self, r: VarRef, value: usize) {
        self.0.insert(r, value);
    }

    pub fn get(&self, r: VarRef) -> Option<usize> {
        self.0.get(&r).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarRef, &usize)> {
        self.0.iter()
    }

    /// Union of two assignments over disjoint names.
    pub fn union(&self, other: &PartialAssignment) -> PartialAssignment {
        let mut merged = self.0.clone();
        merged.extend(other.0.iter().map(|(r, v)| (*r, *v)));
        PartialAssignment(merged)
    }

    pub fn from_world(world: &World) -> Self {
        PartialAssignment(
            world
                .0
                .iter()
                .enumerate()
                .map(|(k, &v)| (VarRef::Param(k), v))
                .collect(),
        )
    }

    pub fn from_decision(decision: &Decision) -> Self {
        PartialAssignment(
            decision
                .0
                .iter()
                .enumerate()
                .map(|(i, &v)| (VarRef::Var(i), v))
                .collect(),
        )
    }
}

/// A single broken invariant of a problem definition.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Diagnostic {
    #[error("parameter `{parameter}`: probabilities sum to {sum}, expected 1")]
    ProbabilitySum { parameter: String, sum: f64 },
    #[error(
        "parameter `{parameter}`: probability {probability} of value `{value}` is outside [0, 1]"
    )]
    ProbabilityRange {
        parameter: String,
        value: String,
        probability: f64,
    },
    #[error("name `{name}` is declared more than once")]
    DuplicateName { name: String },
    #[error("`{name}` has an empty domain")]
    EmptyDomain { name: String },
    #[error("`{name}` lists value `{value}` more than once")]
    DuplicateValue { name: String, value: String },
    #[error("constraint `{constraint}` involves no decision variable")]
    NoDecisionVariable { constraint: String },
    #[error(
        "constraint `{constraint}`: scope entry `{name}` does not name a parameter or variable"
    )]
    UnresolvedName { constraint: String, name: String },
    #[error("constraint `{constraint}`: `{name}` appears more than once in the scope")]
    DuplicateScopeEntry { constraint: String, name: String },
    #[error("constraint `{constraint}`: tuple {tuple} has {found} values, scope has {expected}")]
    TupleArity {
        constraint: String,
        tuple: usize,
        expected: usize,
        found: usize,
    },
    #[error("constraint `{constraint}`: tuple {tuple} uses `{value}`, which is not in the domain of `{name}`")]
    TupleValue {
        constraint: String,
        tuple: usize,
        name: String,
        value: String,
    },
    #[error("constraint `{constraint}`: tuple {tuple} is listed more than once")]
    DuplicateTuple { constraint: String, tuple: usize },
}

impl Diagnostic {
    /// Short identifier of the violated rule.
    pub fn rule(&self) -> &'static str {
        match self {
            Diagnostic::ProbabilitySum { .. } => "probability-sum",
            Diagnostic::ProbabilityRange { .. } => "probability-range",
            Diagnostic::DuplicateName { .. } => "duplicate-name",
            Diagnostic::EmptyDomain { .. } => "empty-domain",
            Diagnostic::DuplicateValue { .. } => "duplicate-value",
            Diagnostic::NoDecisionVariable { .. } => "no-decision-variable",
            Diagnostic::UnresolvedName { .. } => "unresolved-name",
            Diagnostic::DuplicateScopeEntry { .. } => "duplicate-scope-entry",
            Diagnostic::TupleArity { .. } => "tuple-arity",
            Diagnostic::TupleValue { .. } => "tuple-value",
            Diagnostic::DuplicateTuple { .. } => "duplicate-tuple",
        }
    }
}

/// Outcome of [`validate`]: every violation plus whether each constraint has at most one parameter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
    /// `(constraint name, involves at most one parameter)` in constraint order.
    pub property_f: Vec<(String, bool)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn all_property_f(&self) -> bool {
        self.property_f.iter().all(|(_, f)| *f)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("invalid problem: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct InvalidProblem(pub Vec<Diagnostic>);

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Invalid(#[from] InvalidProblem),
    #[error("unknown parameter or variable `{0}`")]
    UnknownName(String),
    #[error("reference {0:?} is out of range")]
    UnknownRef(VarRef),
    #[error("value `{value}` is not in the domain of `{name}`")]
    UnknownValue { name: String, value: String },
    #[error("value index {value} is outside the domain of `{name}`")]
    ValueOutOfDomain { name: String, value: usize },
    #[error("expected {expected} values, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("constraint `{0}` involves more than one parameter")]
    NotPropertyF(String),
}

/// Checks every structural invariant of a problem and reports all violations.
pub fn validate(
    parameters: &[Parameter],
    variables: &[DecisionVariable],
    constraints: &[Constraint],
) -> ValidationReport {
    let mut diagnostics = Vec::new();

    let mut seen = std::collections::BTreeSet::new();
    let names = parameters
        .iter()
        .map(|p| p.name())
        .chain(variables.iter().map(|x| x.name()));
    for name in names {
        if !seen.insert(name) {
            diagnostics.push(Diagnostic::DuplicateName { name: name.into() });
        }
    }

    let mut domain_checks = |name: &str, values: &[String]| {
        if values.is_empty() {
            diagnostics.push(Diagnostic::EmptyDomain { name: name.into() });
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in values {
            if !seen.insert(v) {
                diagnostics.push(Diagnostic::DuplicateValue {
                    name: name.into(),
                    value: v.clone(),
                });
            }
        }
    };
    for p in parameters {
        domain_checks(p.name(), p.values());
    }
    for x in variables {
        domain_checks(x.name(), x.values());
    }

    for p in parameters {
        for (v, &pr) in p.values().iter().zip(p.probabilities()) {
            if !(0.0..=1.0).contains(&pr) {
                diagnostics.push(Diagnostic::ProbabilityRange {
                    parameter: p.name().into(),
                    value: v.clone(),
                    probability: pr,
                });
            }
        }
        let sum: f64 = p.probabilities().iter().sum();
        if !approx_eq(sum, 1.0) {
            diagnostics.push(Diagnostic::ProbabilitySum {
                parameter: p.name().into(),
                sum,
            });
        }
    }

    let resolve = |r: &VarRef| -> Option<(&str, &[String])> {
        match *r {
            VarRef::Param(k) => parameters.get(k).map(|p| (p.name(), p.values())),
            VarRef::Var(i) => variables.get(i).map(|x| (x.name(), x.values())),
        }
    };

    for c in constraints {
        if !c.scope().iter().any(|r| matches!(r, VarRef::Var(_))) {
            diagnostics.push(Diagnostic::NoDecisionVariable {
                constraint: c.name().into(),
            });
        }
        let mut resolved = Vec::with_capacity(c.arity());
        let mut scope_ok = true;
        for (pos, r) in c.scope().iter().enumerate() {
            match resolve(r) {
                Some(entry) => resolved.push(entry),
                None => {
                    scope_ok = false;
                    diagnostics.push(Diagnostic::UnresolvedName {
                        constraint: c.name().into(),
                        name: format!("{r:?}"),
                    });
                }
            }
            if c.scope()[..pos].contains(r) {
                diagnostics.push(Diagnostic::DuplicateScopeEntry {
                    constraint: c.name().into(),
                    name: resolve(r).map_or_else(|| format!("{r:?}"), |(n, _)| n.into()),
                });
            }
        }
        for (ti, t) in c.allowed().iter().enumerate() {
            if t.len() != c.arity() {
                diagnostics.push(Diagnostic::TupleArity {
                    constraint: c.name().into(),
                    tuple: ti,
                    expected: c.arity(),
                    found: t.len(),
                });
                continue;
            }
            if scope_ok {
                for (&v, (name, values)) in t.iter().zip(&resolved) {
                    if v >= values.len() {
                        diagnostics.push(Diagnostic::TupleValue {
                            constraint: c.name().into(),
                            tuple: ti,
                            name: (*name).into(),
                            value: format!("#{v}"),
                        });
                    }
                }
            }
            if ti > 0 && c.allowed()[ti - 1] == *t {
                diagnostics.push(Diagnostic::DuplicateTuple {
                    constraint: c.name().into(),
                    tuple: ti,
                });
            }
        }
    }

    ValidationReport {
        diagnostics,
        property_f: constraints
            .iter()
            .map(|c| (c.name().to_string(), c.has_property_f()))
            .collect(),
    }
}

/// A validated probabilistic CSP with mutually independent parameters.
///
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    parameters: Vec<Parameter>,
    variables: Vec<DecisionVariable>,
    constraints: Vec<Constraint>,
}

impl ProblemSpec {
    pub fn new(
        parameters: Vec<Parameter>,
        variables: Vec<DecisionVariable>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, InvalidProblem> {
        let report = validate(&parameters, &variables, &constraints);
        if !report.is_valid() {
            return Err(InvalidProblem(report.diagnostics));
        }
        Ok(ProblemSpec {
            parameters,
            variables,
            constraints,
        })
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn variables(&self) -> &[DecisionVariable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name() == name)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.parameters, &self.variables, &self.constraints)
    }

    /// True when every constraint involves at most one parameter.
    pub fn has_property_f(&self) -> bool {
        self.constraints.iter().all(Constraint::has_property_f)
    }

    /// Fails with the first constraint that involves two or more parameters.
    pub fn require_property_f(&self) -> Result<(), ModelError> {
        match self.constraints.iter().find(|c| !c.has_property_f()) {
            Some(c) => Err(ModelError::NotPropertyF(c.name().into())),
            None => Ok(()),
        }
    }

    /// Returns a copy with one parameter's distribution replaced.
    pub fn with_distribution(
        &self,
        parameter: usize,
        probabilities: Vec<f64>,
    ) -> Result<Self, InvalidProblem> {
        let mut parameters = self.parameters.clone();
        parameters[parameter].probabilities = probabilities;
        ProblemSpec::new(parameters, self.variables.clone(), self.constraints.clone())
    }

    pub fn resolve(&self, name: &str) -> Option<VarRef> {
        if let Some(k) = self.parameters.iter().position(|p| p.name() == name) {
            return Some(VarRef::Param(k));
        }
        self.variables
            .iter()
            .position(|x| x.name() == name)
            .map(VarRef::Var)
    }

    pub fn name_of(&self, r: VarRef) -> &str {
        match r {
            VarRef::Param(k) => self.parameters[k].name(),
            VarRef::Var(i) => self.variables[i].name(),
        }
    }

    pub fn domain_values(&self, r: VarRef) -> &[String] {
        match r {
            VarRef::Param(k) => self.parameters[k].values(),
            VarRef::Var(i) => self.variables[i].values(),
        }
    }

    pub fn domain_size(&self, r: VarRef) -> usize {
        self.domain_values(r).len()
    }

    pub(crate) fn check_value(&self, r: VarRef, value: usize) -> Result<(), ModelError> {
        let size = match r {
            VarRef::Param(k) => self.parameters.get(k).map(Parameter::domain_size),
            VarRef::Var(i) => self.variables.get(i).map(DecisionVariable::domain_size),
        }
        .ok_or(ModelError::UnknownRef(r))?;
        if value >= size {
            return Err(ModelError::ValueOutOfDomain {
                name: self.name_of(r).into(),
                value,
            });
        }
        Ok(())
    }

    fn value_index(&self, r: VarRef, value: &str) -> Result<usize, ModelError> {
        self.domain_values(r)
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| ModelError::UnknownValue {
                name: self.name_of(r).into(),
                value: value.into(),
            })
    }

    pub fn world(&self, values: Vec<usize>) -> Result<World, ModelError> {
        if values.len() != self.parameters.len() {
            return Err(ModelError::Arity {
                expected: self.parameters.len(),
                found: values.len(),
            });
        }
        for (k, &v) in values.iter().enumerate() {
            self.check_value(VarRef::Param(k), v)?;
        }
        Ok(World(values))
    }

    pub fn decision(&self, values: Vec<usize>) -> Result<Decision, ModelError> {
        if values.len() != self.variables.len() {
            return Err(ModelError::Arity {
                expected: self.variables.len(),
                found: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            self.check_value(VarRef::Var(i), v)?;
        }
        Ok(Decision(values))
    }

    /// World from value names given in parameter order.
    pub fn world_by_names(&self, values: &[&str]) -> Result<World, ModelError> {
        if values.len() != self.parameters.len() {
            return Err(ModelError::Arity {
                expected: self.parameters.len(),
                found: values.len(),
            });
        }
        let indices = values
            .iter()
            .enumerate()
            .map(|(k, v)| self.value_index(VarRef::Param(k), v))
            .collect::<Result<_, _>>()?;
        Ok(World(indices))
    }

    /// Decision from value names given in variable order.
    pub fn decision_by_names(&self, values: &[&str]) -> Result<Decision, ModelError> {
        if values.len() != self.variables.len() {
            return Err(ModelError::Arity {
                expected: self.variables.len(),
                found: values.len(),
            });
        }
        let indices = values
            .iter()
            .enumerate()
            .map(|(i, v)| self.value_index(VarRef::Var(i), v))
            .collect::<Result<_, _>>()?;
        Ok(Decision(indices))
    }

    pub fn assignment_by_names(
        &self,
        pairs: &[(&str, &str)],
    ) -> Result<PartialAssignment, ModelError> {
        let mut a = PartialAssignment::new();
        for &(name, value) in pairs {
            let r = self
                .resolve(name)
                .ok_or_else(|| ModelError::UnknownName(name.into()))?;
            a.insert(r, self.value_index(r, value)?);
        }
        Ok(a)
    }

    pub fn world_names(&self, world: &World) -> Vec<&str> {
        world
            .0
            .iter()
            .zip(&self.parameters)
            .map(|(&v, p)| p.values()[v].as_str())
            .collect()
    }

    pub fn decision_names(&self, decision: &Decision) -> Vec<&str> {
        decision
            .0
            .iter()
            .zip(&self.variables)
            .map(|(&v, x)| x.values()[v].as_str())
            .collect()
    }

    /// Probability of a world: product of its per-parameter value probabilities.
    pub fn world_probability(&self, world: &World) -> f64 {
        world
            .0
            .iter()
            .zip(&self.parameters)
            .map(|(&v, p)| p.probability(v))
            .product()
    }

    /// Probability of a Cartesian set of worlds: product over parameters of
    /// the summed member probabilities.
    pub fn environment_probability(&self, sets: &[ValueSet]) -> f64 {
        sets.iter()
            .zip(&self.parameters)
            .map(|(s, p)| s.mass(p.probabilities()))
            .product()
    }

    /// True iff `(world, decision)` satisfies every constraint.
    pub fn covers(&self, decision: &Decision, world: &World) -> bool {
        self.constraints
            .iter()
            .all(|c| c.is_satisfied(&world.0, &decision.0))
    }

    pub fn world_count(&self) -> u128 {
        self.parameters
            .iter()
            .map(|p| p.domain_size() as u128)
            .product()
    }

    pub fn decision_count(&self) -> u128 {
        self.variables
            .iter()
            .map(|x| x.domain_size() as u128)
            .product()
    }

    /// All worlds in lexicographic order of value indices.
    pub fn worlds(&self) -> impl Iterator<Item = World> {
        Odometer::new(self.parameters.iter().map(Parameter::domain_size).collect()).map(World)
    }

    /// All decisions in lexicographic order of value indices.
    pub fn decisions(&self) -> impl Iterator<Item = Decision> {
        Odometer::new(
            self.variables
                .iter()
                .map(DecisionVariable::domain_size)
                .collect(),
        )
        .map(Decision)
    }
}

/// Mixed-radix counter over `0..radices[0] × 0..radices[1] × …`.
#[derive(Clone, Debug)]
pub(crate) struct Odometer {
    radices: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Odometer {
    pub(crate) fn new(radices: Vec<usize>) -> Self {
        let next = if radices.contains(&0) {
            None
        } else {
            Some(vec![0; radices.len()])
        };
        Odometer { radices, next }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.radices[i] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

/// A Cartesian product of per-parameter value subsets, with its probability cached.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    sets: Vec<ValueSet>,
    probability: f64,
}

impl Environment {
    /// The set of all worlds.
    pub fn full(spec: &ProblemSpec) -> Self {
        let sets: Vec<ValueSet> = spec
            .parameters()
            .iter()
            .map(|p| ValueSet::full(p.domain_size()))
            .collect();
        let probability = spec.environment_probability(&sets);
        Environment { sets, probability }
    }

    pub fn new(spec: &ProblemSpec, sets: Vec<ValueSet>) -> Result<Self, ModelError> {
        if sets.len() != spec.parameters().len() {
            return Err(ModelError::Arity {
                expected: spec.parameters().len(),
                found: sets.len(),
            });
        }
        for (s, p) in sets.iter().zip(spec.parameters()) {
            if s.universe() != p.domain_size() {
                return Err(ModelError::Arity {
                    expected: p.domain_size(),
                    found: s.universe(),
                });
            }
        }
        let probability = spec.environment_probability(&sets);
        Ok(Environment { sets, probability })
    }

    /// Builds an environment from per-parameter lists of value indices.
    pub fn from_values(spec: &ProblemSpec, values: &[&[usize]]) -> Result<Self, ModelError> {
        let sets = values
            .iter()
            .zip(spec.parameters())
            .enumerate()
            .map(|(k, (vs, p))| {
                vs.iter()
                    .map(|&v| spec.check_value(VarRef::Param(k), v))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ValueSet::from_values(p.domain_size(), vs.iter().copied()))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Self::new(spec, sets)
    }

    /// Builds an environment from per-parameter lists of value names.
    pub fn from_names(spec: &ProblemSpec, values: &[&[&str]]) -> Result<Self, ModelError> {
        let indices = values
            .iter()
            .enumerate()
            .map(|(k, names)| {
                names
                    .iter()
                    .map(|n| spec.value_index(VarRef::Param(k), n))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&[usize]> = indices.iter().map(Vec::as_slice).collect();
        Self::from_values(spec, &refs)
    }

    pub(crate) fn with_probability(sets: Vec<ValueSet>, probability: f64) -> Self {
        Environment { sets, probability }
    }

    pub fn sets(&self) -> &[ValueSet] {
        &self.sets
    }

    pub fn set(&self, parameter: usize) -> &ValueSet {
        &self.sets[parameter]
    }

    /// Cached probability.
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn is_empty(&self) -> bool {
        self.sets.iter().any(ValueSet::is_empty)
    }

    pub fn contains(&self, world: &World) -> bool {
        world.0.len() == self.sets.len()
            && self.sets.iter().zip(&world.0).all(|(s, &v)| s.contains(v))
    }

    pub fn intersection(&self, spec: &ProblemSpec, other: &Environment) -> Environment {
        let sets: Vec<ValueSet> = self
            .sets
            .iter()
            .zip(&other.sets)
            .map(|(a, b)| a.intersection(b))
            .collect();
        let probability = spec.environment_probability(&sets);
        Environment { sets, probability }
    }

    pub fn is_subset(&self, other: &Environment) -> bool {
        self.is_empty()
            || self
                .sets
                .iter()
                .zip(&other.sets)
                .all(|(a, b)| a.is_subset(b))
    }

    pub fn is_disjoint(&self, other: &Environment) -> bool {
        self.is_empty()
            || other.is_empty()
            || self
                .sets
                .iter()
                .zip(&other.sets)
                .any(|(a, b)| a.is_disjoint(b))
    }

    /// Same set of worlds, ignoring the cached probability.
    pub fn same_worlds(&self, other: &Environment) -> bool {
        (self.is_empty() && other.is_empty()) || self.sets == other.sets
    }

    pub fn world_count(&self) -> u128 {
        self.sets.iter().map(|s| s.len() as u128).product()
    }

    pub fn worlds(&self) -> impl Iterator<Item = World> + '_ {
        let members: Vec<Vec<usize>> = self.sets.iter().map(|s| s.iter().collect()).collect();
        Odometer::new(members.iter().map(Vec::len).collect())
            .map(move |idx| World(idx.iter().zip(&members).map(|(&i, m)| m[i]).collect()))
    }

    /// Probability recomputed from the sets rather than read from the cache.
    pub fn recompute_probability(&self, spec: &ProblemSpec) -> f64 {
        spec.environment_probability(&self.sets)
    }

    /// Renders the sets as value names, one list per parameter.
    pub fn names<'a>(&self, spec: &'a ProblemSpec) -> Vec<Vec<&'a str>> {
        self.sets
            .iter()
            .zip(spec.parameters())
            .map(|(s, p)| s.iter().map(|v| p.values()[v].as_str()).collect())
            .collect()
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::dinner;

    #[test]
    fn reduce_by_world_matches_hand_worked_reductions() {
        let spec = dinner();
        let c4 = spec.constraint("C4").unwrap();
        let a = spec.assignment_by_names(&[("l3", "c")]).unwrap();
        let r = c4.reduce(&spec, &a).unwrap();
        assert_eq!(r.scope(), &[VarRef::Var(1)]);
        let f = spec.variables()[1].value_index("F").unwrap();
        assert_eq!(r.allowed(), &[vec![f]]);

        let c2 = spec.constraint("C2").unwrap();
        let a = spec.assignment_by_names(&[("l1", "c")]).unwrap();
        let r = c2.reduce(&spec, &a).unwrap();
        let names: Vec<&str> = r
            .allowed()
            .iter()
            .map(|t| spec.variables()[1].values()[t[0]].as_str())
            .collect();
        assert_eq!(names, vec!["T", "F"]);
    }

    #[test]
    fn reduce_by_nothing_is_identity() {
        let spec = dinner();
        let c1 = spec.constraint("C1").unwrap();
        assert_eq!(&c1.reduce(&spec, &PartialAssignment::new()).unwrap(), c1);
    }

    #[test]
    fn reduce_rejects_out_of_domain_values() {
        let spec = dinner();
        let c1 = spec.constraint("C1").unwrap();
        let a = PartialAssignment::new().with(VarRef::Var(0), 7);
        assert!(matches!(
            c1.reduce(&spec, &a),
            Err(ModelError::ValueOutOfDomain { .. })
        ));
        let a = PartialAssignment::new().with(VarRef::Param(9), 0);
        assert!(matches!(
            c1.reduce(&spec, &a),
            Err(ModelError::UnknownRef(_))
        ));
        assert!(matches!(
            spec.assignment_by_names(&[("nobody", "c")]),
            Err(ModelError::UnknownName(_))
        ));
    }

    #[test]
    fn world_probabilities() {
        let spec = dinner();
        let w1 = spec.world_by_names(&["c", "nc", "c"]).unwrap();
        assert!(approx_eq(spec.world_probability(&w1), 0.03));
        let w2 = spec.world_by_names(&["c", "c", "c"]).unwrap();
        assert!(approx_eq(spec.world_probability(&w2), 0.27));

        let empty =
            ProblemSpec::new(vec![], vec![DecisionVariable::new("x", ["a"])], vec![]).unwrap();
        let w = empty.world(vec![]).unwrap();
        assert_eq!(empty.world_probability(&w), 1.0);
        assert_eq!(empty.worlds().count(), 1);
    }

    #[test]
    fn environment_probabilities() {
        let spec = dinner();
        assert!(approx_eq(Environment::full(&spec).probability(), 1.0));
        let e = Environment::from_names(&spec, &[&["c"], &["c", "nc"], &["c", "nc"]]).unwrap();
        assert!(approx_eq(e.probability(), 0.6));
        let e = Environment::from_names(&spec, &[&["nc"], &["c", "nc"], &["c"]]).unwrap();
        assert!(approx_eq(e.probability(), 0.2));
        let e = Environment::from_names(&spec, &[&[], &["c", "nc"], &["c"]]).unwrap();
        assert!(e.is_empty());
        assert_eq!(e.probability(), 0.0);
        assert_eq!(e.worlds().count(), 0);
    }

    #[test]
    fn covers_follows_the_constraint_tables() {
        let spec = dinner();
        let wf = spec.decision_by_names(&["W", "F"]).unwrap();
        let w1 = spec.world_by_names(&["c", "nc", "c"]).unwrap();
        assert!(spec.covers(&wf, &w1));
        let w2 = spec.world_by_names(&["c", "c", "c"]).unwrap();
        assert!(spec.decisions().all(|d| !spec.covers(&d, &w2)));

        let free = ProblemSpec::new(
            vec![Parameter::new("l", [("a", 0.5), ("b", 0.5)])],
            vec![DecisionVariable::new("x", ["0", "1"])],
            vec![],
        )
        .unwrap();
        for d in free.decisions() {
            assert!(free.worlds().all(|w| free.covers(&d, &w)));
        }
    }

    #[test]
    fn validate_dinner_is_clean_and_has_property_f() {
        let report = dinner().validate();
        assert!(report.is_valid());
        assert_eq!(report.property_f.len(), 4);
        assert!(report.all_property_f());
    }

    #[test]
    fn validate_reports_probability_sum() {
        let params = vec![Parameter::new("l", [("a", 0.5), ("b", 0.6)])];
        let vars = vec![DecisionVariable::new("x", ["0"])];
        let report = validate(&params, &vars, &[]);
        assert_eq!(report.diagnostics.len(), 1);
        assert_eq!(report.diagnostics[0].rule(), "probability-sum");
        assert!(report.diagnostics[0].to_string().contains("`l`"));
    }

    #[test]
    fn validate_reports_parameter_only_scope() {
        let params = vec![Parameter::new("l", [("a", 0.5), ("b", 0.5)])];
        let vars = vec![DecisionVariable::new("x", ["0"])];
        let c = Constraint::new("only-l", vec![VarRef::Param(0)], vec![vec![0]]);
        let report = validate(&params, &vars, &[c]);
        assert_eq!(
            report.diagnostics,
            vec![Diagnostic::NoDecisionVariable {
                constraint: "only-l".into()
            }]
        );
    }

    #[test]
    fn validate_reports_tuple_problems() {
        let vars = vec![
            DecisionVariable::new("x", ["0", "1"]),
            DecisionVariable::new("x", ["0"]),
        ];
        let c = Constraint::new(
            "c",
            vec![VarRef::Var(0), VarRef::Var(0), VarRef::Var(5)],
            vec![vec![0, 0, 0], vec![0, 0, 0], vec![1]],
        );
        let rules: Vec<_> = validate(&[], &vars, &[c])
            .diagnostics
            .iter()
            .map(Diagnostic::rule)
            .collect();
        for r in [
            "duplicate-name",
            "duplicate-scope-entry",
            "unresolved-name",
            "tuple-arity",
            "duplicate-tuple",
        ] {
            assert!(rules.contains(&r), "missing {r} in {rules:?}");
        }
    }

    #[test]
    fn property_f_flag() {
        let c = Constraint::new(
            "two",
            vec![VarRef::Param(0), VarRef::Param(1), VarRef::Var(0)],
            vec![],
        );
        assert!(!c.has_property_f());
        let c = Constraint::new("one", vec![VarRef::Param(0), VarRef::Var(0)], vec![]);
        assert!(c.has_property_f());
    }

    #[test]
    fn odometer_enumerates_in_lexicographic_order() {
        let all: Vec<_> = Odometer::new(vec![2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[5], vec![1, 2]);
        assert_eq!(Odometer::new(vec![]).count(), 1);
        assert_eq!(Odometer::new(vec![2, 0]).count(), 0);
    }
}
