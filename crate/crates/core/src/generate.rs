//! Random instance generation for benchmarks and property tests.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{
    Constraint, DecisionVariable, Environment, Odometer, Parameter, ProblemSpec, VarRef,
};
use crate::valueset::ValueSet;

/// Size limits for generated instances.
#[derive(Clone, Debug)]
pub struct InstanceShape {
    pub max_parameters: usize,
    pub max_variables: usize,
    pub max_domain: usize,
    pub max_constraints: usize,
    /// Decision variables per constraint.
    pub max_constraint_vars: usize,
    /// Chance that a parameter value gets probability zero.
    pub zero_probability_rate: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape {
            max_parameters: 3,
            max_variables: 4,
            max_domain: 3,
            max_constraints: 5,
            max_constraint_vars: 2,
            zero_probability_rate: 0.1,
        }
    }
}

fn distribution<R: Rng>(rng: &mut R, n: usize, zero_rate: f64) -> Vec<f64> {
    let mut weights: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(zero_rate) {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        let i = rng.gen_range(0..n);
        weights[i] = 1.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn random_table<R: Rng>(rng: &mut R, sizes: &[usize], density: f64) -> Vec<Vec<usize>> {
    Odometer::new(sizes.to_vec())
        .filter(|_| rng.gen_bool(density))
        .collect()
}

/// A random problem in which every constraint involves at most one parameter.
pub fn random_f_instance<R: Rng>(rng: &mut R, shape: &InstanceShape) -> ProblemSpec {
    let n_params = rng.gen_range(0..=shape.max_parameters);
    let n_vars = rng.gen_range(1..=shape.max_variables);
    let parameters: Vec<Parameter> = (0..n_params)
        .map(|k| {
            let size = rng.gen_range(1..=shape.max_domain);
            let probs = distribution(rng, size, shape.zero_probability_rate);
            Parameter::new(
                format!("l{k}"),
                probs
                    .into_iter()
                    .enumerate()
                    .map(|(v, p)| (format!("v{v}"), p)),
            )
        })
        .collect();
    let variables: Vec<DecisionVariable> = (0..n_vars)
        .map(|i| {
            let size = rng.gen_range(1..=shape.max_domain);
            DecisionVariable::new(format!("x{i}"), (0..size).map(|v| format!("d{v}")))
        })
        .collect();

    let n_constraints = rng.gen_range(0..=shape.max_constraints);
    let mut constraints = Vec::with_capacity(n_constraints);
    for c in 0..n_constraints {
        let k = rng.gen_range(1..=shape.max_constraint_vars.min(n_vars));
        let mut all: Vec<usize> = (0..n_vars).collect();
        all.shuffle(rng);
        let mut scope: Vec<VarRef> = all[..k].iter().map(|&i| VarRef::Var(i)).collect();
        if n_params > 0 && rng.gen_bool(0.7) {
            let at = rng.gen_range(0..=scope.len());
            scope.insert(at, VarRef::Param(rng.gen_range(0..n_params)));
        }
        let sizes: Vec<usize> = scope
            .iter()
            .map(|r| match *r {
                VarRef::Param(k) => parameters[k].domain_size(),
                VarRef::Var(i) => variables[i].domain_size(),
            })
            .collect();
        let density = rng.gen_range(0.3..0.95);
        constraints.push(Constraint::new(
            format!("c{c}"),
            scope,
            random_table(rng, &sizes, density),
        ));
    }
    ProblemSpec::new(parameters, variables, constraints).expect("generated instances are valid")
}

/// A problem where each uncertain constraint is switched on by its own
/// two-valued parameter (`on` relevant, `off` irrelevant), alongside
/// certain constraints. Both parameter values have positive probability.
#[derive(Clone, Debug)]
pub struct UncertainRelevanceInstance {
    pub spec: ProblemSpec,
    /// The classical problem with every certain and every uncertain constraint active.
    pub top: ProblemSpec,
}

pub fn random_u_instance<R: Rng>(rng: &mut R, shape: &InstanceShape) -> UncertainRelevanceInstance {
    let n_vars = rng.gen_range(1..=shape.max_variables);
    let variables: Vec<DecisionVariable> = (0..n_vars)
        .map(|i| {
            let size = rng.gen_range(1..=shape.max_domain);
            DecisionVariable::new(format!("x{i}"), (0..size).map(|v| format!("d{v}")))
        })
        .collect();
    let random_scope = |rng: &mut R| -> Vec<usize> {
        let k = rng.gen_range(1..=shape.max_constraint_vars.min(n_vars));
        let mut all: Vec<usize> = (0..n_vars).collect();
        all.shuffle(rng);
        all.truncate(k);
        all
    };

    let mut certain = Vec::new();
    for c in 0..rng.gen_range(0..=2) {
        let scope = random_scope(rng);
        let sizes: Vec<usize> = scope.iter().map(|&i| variables[i].domain_size()).collect();
        let density = rng.gen_range(0.5..0.95);
        certain.push(Constraint::new(
            format!("k{c}"),
            scope.into_iter().map(VarRef::Var).collect(),
            random_table(rng, &sizes, density),
        ));
    }

    let n_uncertain = rng.gen_range(1..=shape.max_parameters.max(1));
    let mut parameters = Vec::with_capacity(n_uncertain);
    let mut parameterized = Vec::with_capacity(n_uncertain);
    let mut uncertain = Vec::with_capacity(n_uncertain);
    for q in 0..n_uncertain {
        let p_on = rng.gen_range(0.05..0.95);
        parameters.push(Parameter::new(
            format!("r{q}"),
            [("on", p_on), ("off", 1.0 - p_on)],
        ));
        let scope = random_scope(rng);
        let sizes: Vec<usize> = scope.iter().map(|&i| variables[i].domain_size()).collect();
        let density = rng.gen_range(0.4..0.95);
        let table = random_table(rng, &sizes, density);
        let mut tuples: Vec<Vec<usize>> = table.iter().map(|t| [&[0][..], t].concat()).collect();
        tuples.extend(Odometer::new(sizes.clone()).map(|t| [&[1][..], &t].concat()));
        let mut pscope = vec![VarRef::Param(q)];
        pscope.extend(scope.iter().map(|&i| VarRef::Var(i)));
        parameterized.push(Constraint::new(format!("u{q}"), pscope, tuples));
        uncertain.push(Constraint::new(
            format!("u{q}"),
            scope.into_iter().map(VarRef::Var).collect(),
            table,
        ));
    }

    let spec = ProblemSpec::new(
        parameters,
        variables.clone(),
        certain.iter().cloned().chain(parameterized).collect(),
    )
    .expect("generated instances are valid");
    let top = ProblemSpec::new(
        vec![],
        variables,
        certain.into_iter().chain(uncertain).collect(),
    )
    .expect("generated instances are valid");
    UncertainRelevanceInstance { spec, top }
}

/// A random environment over `spec`'s parameters; each value is kept with
/// probability one half. With `nonempty`, every set keeps at least one value.
pub fn random_environment<R: Rng>(rng: &mut R, spec: &ProblemSpec, nonempty: bool) -> Environment {
    let sets = spec
        .parameters()
        .iter()
        .map(|p| {
            let n = p.domain_size();
            let mut s = ValueSet::from_values(n, (0..n).filter(|_| rng.gen_bool(0.5)));
            if nonempty && s.is_empty() && n > 0 {
                s.insert(rng.gen_range(0..n));
            }
            s
        })
        .collect();
    Environment::new(spec, sets).expect("sets match the parameter domains")
}

/// A random problem with the given parameter domain sizes, no variables
/// beyond one placeholder, and no constraints. Used to exercise
/// environment algebra.
pub fn random_parameter_space<R: Rng>(
    rng: &mut R,
    max_parameters: usize,
    max_domain: usize,
) -> ProblemSpec {
    let parameters = (0..rng.gen_range(0..=max_parameters))
        .map(|k| {
            let size = rng.gen_range(1..=max_domain);
            let probs = distribution(rng, size, 0.15);
            Parameter::new(
                format!("l{k}"),
                probs
                    .into_iter()
                    .enumerate()
                    .map(|(v, p)| (format!("v{v}"), p)),
            )
        })
        .collect();
    ProblemSpec::new(parameters, vec![DecisionVariable::new("x", ["0"])], vec![])
        .expect("generated instances are valid")
}
