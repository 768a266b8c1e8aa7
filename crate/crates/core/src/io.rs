//! JSON problem documents and conditional-decision rule lists.
//!
//! A problem document has three top-level keys, all optional and all
//! order-significant:
//!
//! ```json
//! {
//!   "parameters":  [ { "name": "l1", "values": [ { "value": "c", "prob": 0.6 },
//!                                                { "value": "nc", "prob": "2/5" } ] } ],
//!   "variables":   [ { "name": "x1", "values": [ "W", "R" ] } ],
//!   "constraints": [ { "name": "C3", "scope": [ "l1", "x1" ],
//!                      "allowed": [ [ "c", "R" ], [ "nc", "W" ] ] } ]
//! }
//! ```
//!
//! `prob` is a JSON number or a string holding a decimal or a fraction `a/b`.

use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::conditional::{ConditionalDecision, Rule};
use crate::model::{
    validate, Constraint, Decision, DecisionVariable, Diagnostic, Environment, ModelError,
    Parameter, ProblemSpec, VarRef,
};
use crate::valueset::ValueSet;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid problem: {}", .0.iter().map(|d| format!("[{}] {d}", d.rule())).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Syntax(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rule {0}: environment must list every parameter in order")]
    EnvironmentShape(usize),
    #[error("rule {0}: decision must list every variable in order")]
    DecisionShape(usize),
}

/// A probability written as a JSON number, a decimal string or a fraction string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probability(pub f64);

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ProbVisitor;

        impl Visitor<'_> for ProbVisitor {
            type Value = Probability;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a string like \"0.25\" or \"1/4\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Probability, E> {
                Ok(Probability(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Probability, E> {
                Ok(Probability(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Probability, E> {
                Ok(Probability(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Probability, E> {
                parse_probability(v)
                    .map(Probability)
                    .ok_or_else(|| E::custom(format!("cannot read `{v}` as a probability")))
            }
        }

        d.deserialize_any(ProbVisitor)
    }
}

fn parse_probability(text: &str) -> Option<f64> {
    let text = text.trim();
    match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().ok()?;
            let den: f64 = den.trim().parse().ok()?;
            (den != 0.0).then(|| num / den)
        }
        None => text.parse().ok(),
    }
}

/// JSON object whose keys keep insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedMap<V>(pub Vec<(String, V)>);

impl<V: Serialize> Serialize for OrderedMap<V> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de, V: Deserialize<'de>> Deserialize<'de> for OrderedMap<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct MapVisitor<V>(std::marker::PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for MapVisitor<V> {
            type Value = OrderedMap<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = access.next_entry()? {
                    entries.push((k, v));
                }
                Ok(OrderedMap(entries))
            }
        }

        d.deserialize_map(MapVisitor(std::marker::PhantomData))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default)]
    pub parameters: Vec<ParameterDoc>,
    #[serde(default)]
    pub variables: Vec<VariableDoc>,
    #[serde(default)]
    pub constraints: Vec<ConstraintDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDoc {
    pub name: String,
    pub values: Vec<ValueDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueDoc {
    pub value: String,
    pub prob: Probability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    pub name: String,
    pub scope: Vec<String>,
    pub allowed: Vec<Vec<String>>,
}

/// Parses and validates a problem document.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, ParseError> {
    let doc: ProblemDocument = serde_json::from_str(text)?;
    problem_from_document(&doc)
}

pub fn problem_from_document(doc: &ProblemDocument) -> Result<ProblemSpec, ParseError> {
    let parameters: Vec<Parameter> = doc
        .parameters
        .iter()
        .map(|p| {
            Parameter::new(
                &p.name,
                p.values.iter().map(|v| (v.value.as_str(), v.prob.0)),
            )
        })
        .collect();
    let variables: Vec<DecisionVariable> = doc
        .variables
        .iter()
        .map(|x| DecisionVariable::new(&x.name, &x.values))
        .collect();

    let resolve = |name: &str| -> Option<(VarRef, &[String])> {
        if let Some(k) = parameters.iter().position(|p| p.name() == name) {
            return Some((VarRef::Param(k), parameters[k].values()));
        }
        variables
            .iter()
            .position(|x| x.name() == name)
            .map(|i| (VarRef::Var(i), variables[i].values()))
    };

    let mut diagnostics = Vec::new();
    let mut constraints = Vec::with_capacity(doc.constraints.len());
    for c in &doc.constraints {
        let mut scope = Vec::with_capacity(c.scope.len());
        let mut domains = Vec::with_capacity(c.scope.len());
        for name in &c.scope {
            match resolve(name) {
                Some((r, values)) => {
                    scope.push(r);
                    domains.push(values);
                }
                None => diagnostics.push(Diagnostic::UnresolvedName {
                    constraint: c.name.clone(),
                    name: name.clone(),
                }),
            }
        }
        if scope.len() != c.scope.len() {
            continue;
        }
        let mut tuples = Vec::with_capacity(c.allowed.len());
        for (ti, t) in c.allowed.iter().enumerate() {
            if t.len() != scope.len() {
                diagnostics.push(Diagnostic::TupleArity {
                    constraint: c.name.clone(),
                    tuple: ti,
                    expected: scope.len(),
                    found: t.len(),
                });
                continue;
            }
            let mut tuple = Vec::with_capacity(t.len());
            for ((value, values), name) in t.iter().zip(&domains).zip(&c.scope) {
                match values.iter().position(|v| v == value) {
                    Some(i) => tuple.push(i),
                    None => diagnostics.push(Diagnostic::TupleValue {
                        constraint: c.name.clone(),
                        tuple: ti,
                        name: name.clone(),
                        value: value.clone(),
                    }),
                }
            }
            if tuple.len() == t.len() {
                tuples.push(tuple);
            }
        }
        constraints.push(Constraint::new(&c.name, scope, tuples));
    }

    diagnostics.extend(validate(&parameters, &variables, &constraints).diagnostics);
    if !diagnostics.is_empty() {
        return Err(ParseError::Invalid(diagnostics));
    }
    ProblemSpec::new(parameters, variables, constraints).map_err(|e| ParseError::Invalid(e.0))
}

pub fn problem_to_document(spec: &ProblemSpec) -> ProblemDocument {
    ProblemDocument {
        parameters: spec
            .parameters()
            .iter()
            .map(|p| ParameterDoc {
                name: p.name().into(),
                values: p
                    .values()
                    .iter()
                    .zip(p.probabilities())
                    .map(|(v, &pr)| ValueDoc {
                        value: v.clone(),
                        prob: Probability(pr),
                    })
                    .collect(),
            })
            .collect(),
        variables: spec
            .variables()
            .iter()
            .map(|x| VariableDoc {
                name: x.name().into(),
                values: x.values().to_vec(),
            })
            .collect(),
        constraints: spec
            .constraints()
            .iter()
            .map(|c| ConstraintDoc {
                name: c.name().into(),
                scope: c
                    .scope()
                    .iter()
                    .map(|r| spec.name_of(*r).to_string())
                    .collect(),
                allowed: c
                    .allowed()
                    .iter()
                    .map(|t| {
                        t.iter()
                            .zip(c.scope())
                            .map(|(&v, r)| spec.domain_values(*r)[v].clone())
                            .collect()
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn serialize_problem(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(&problem_to_document(spec)).expect("problem documents serialize")
}

/// Rounds to 12 significant digits, the precision of every printed probability.
pub fn round_probability(p: f64) -> f64 {
    if p == 0.0 || !p.is_finite() {
        return p;
    }
    format!("{p:.11e}").parse().unwrap_or(p)
}

/// One `(environment, decision)` pair of a conditional decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleDoc {
    pub environment: OrderedMap<Vec<String>>,
    pub decision: OrderedMap<String>,
    pub probability: f64,
}

/// Environment listing, used for the bad and pending parts of a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentDoc {
    pub environment: OrderedMap<Vec<String>>,
    pub probability: f64,
}

/// The rule-list view of a conditional decision. Extra keys are ignored so
/// a full `solve-conditional` result document can be read back as a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub rules: Vec<RuleDoc>,
    #[serde(default)]
    pub bad: Vec<EnvironmentDoc>,
}

pub fn environment_to_map(spec: &ProblemSpec, env: &Environment) -> OrderedMap<Vec<String>> {
    OrderedMap(
        spec.parameters()
            .iter()
            .zip(env.names(spec))
            .map(|(p, vs)| {
                (
                    p.name().to_string(),
                    vs.into_iter().map(String::from).collect(),
                )
            })
            .collect(),
    )
}

pub fn decision_to_map(spec: &ProblemSpec, d: &Decision) -> OrderedMap<String> {
    OrderedMap(
        spec.variables()
            .iter()
            .zip(spec.decision_names(d))
            .map(|(x, v)| (x.name().to_string(), v.to_string()))
            .collect(),
    )
}

pub fn policy_to_document(spec: &ProblemSpec, cd: &ConditionalDecision) -> PolicyDocument {
    PolicyDocument {
        rules: cd
            .rules
            .iter()
            .map(|r| RuleDoc {
                environment: environment_to_map(spec, &r.environment),
                decision: decision_to_map(spec, &r.decision),
                probability: round_probability(r.environment.probability()),
            })
            .collect(),
        bad: cd
            .bad
            .iter()
            .map(|e| EnvironmentDoc {
                environment: environment_to_map(spec, e),
                probability: round_probability(e.probability()),
            })
            .collect(),
    }
}

fn environment_from_map(
    spec: &ProblemSpec,
    map: &OrderedMap<Vec<String>>,
    index: usize,
) -> Result<Environment, PolicyError> {
    if map.0.len() != spec.parameters().len()
        || map
            .0
            .iter()
            .zip(spec.parameters())
            .any(|((k, _), p)| k != p.name())
    {
        return Err(PolicyError::EnvironmentShape(index));
    }
    let sets = map
        .0
        .iter()
        .zip(spec.parameters())
        .map(|((_, values), p)| {
            let mut set = ValueSet::empty(p.domain_size());
            for v in values {
                let i = p.value_index(v).ok_or_else(|| ModelError::UnknownValue {
                    name: p.name().into(),
                    value: v.clone(),
                })?;
                set.insert(i);
            }
            Ok(set)
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(Environment::new(spec, sets)?)
}

/// Rebuilds a conditional decision from its rule list, recomputing probabilities.
pub fn policy_from_document(
    spec: &ProblemSpec,
    doc: &PolicyDocument,
) -> Result<ConditionalDecision, PolicyError> {
    let mut rules = Vec::with_capacity(doc.rules.len());
    for (i, r) in doc.rules.iter().enumerate() {
        let environment = environment_from_map(spec, &r.environment, i)?;
        if r.decision.0.len() != spec.variables().len()
            || r.decision
                .0
                .iter()
                .zip(spec.variables())
                .any(|((k, _), x)| k != x.name())
        {
            return Err(PolicyError::DecisionShape(i));
        }
        let names: Vec<&str> = r.decision.0.iter().map(|(_, v)| v.as_str()).collect();
        let decision = spec.decision_by_names(&names)?;
        rules.push(Rule {
            environment,
            decision,
        });
    }
    let bad = doc
        .bad
        .iter()
        .enumerate()
        .map(|(i, b)| environment_from_map(spec, &b.environment, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConditionalDecision::from_parts(rules, bad))
}

pub fn parse_policy(spec: &ProblemSpec, text: &str) -> Result<ConditionalDecision, PolicyError> {
    let doc: PolicyDocument = serde_json::from_str(text)?;
    policy_from_document(spec, &doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{dinner, DINNER_JSON};

    #[test]
    fn dinner_file_shape() {
        let spec = parse_problem(DINNER_JSON).unwrap();
        assert_eq!(spec.parameters().len(), 3);
        assert_eq!(spec.variables().len(), 2);
        assert_eq!(spec.constraints().len(), 4);
    }

    #[test]
    fn probability_sum_violation_names_the_parameter() {
        let text = r#"{ "parameters": [ { "name": "rain", "values": [
                { "value": "yes", "prob": 0.5 }, { "value": "no", "prob": 0.6 } ] } ],
            "variables": [ { "name": "x", "values": ["a"] } ] }"#;
        match parse_problem(text) {
            Err(ParseError::Invalid(d)) => {
                assert_eq!(d.len(), 1);
                assert_eq!(d[0].rule(), "probability-sum");
                assert!(d[0].to_string().contains("rain"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_constraint_list_is_valid() {
        let text = r#"{ "parameters": [], "variables": [ { "name": "x", "values": ["a", "b"] } ],
                        "constraints": [] }"#;
        let spec = parse_problem(text).unwrap();
        assert!(spec.constraints().is_empty());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = "{\n  \"parameters\": [\n    { \"name\": 3 }\n  ]\n}";
        match parse_problem(text) {
            Err(ParseError::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_problem(r#"{ "params": [] }"#),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn fractions_and_decimal_strings() {
        let text = r#"{ "parameters": [ { "name": "l", "values": [
                { "value": "a", "prob": "1/3" }, { "value": "b", "prob": "2/3" } ] } ],
            "variables": [ { "name": "x", "values": ["0"] } ] }"#;
        let spec = parse_problem(text).unwrap();
        assert_eq!(spec.parameters()[0].probability(0), 1.0 / 3.0);
        assert_eq!(parse_probability("0.25"), Some(0.25));
        assert_eq!(parse_probability("1/0"), None);
        assert_eq!(parse_probability("half"), None);
    }

    #[test]
    fn unknown_names_and_values_are_diagnosed() {
        let text = r#"{ "variables": [ { "name": "x", "values": ["a"] } ],
            "constraints": [
              { "name": "c1", "scope": ["y"], "allowed": [["a"]] },
              { "name": "c2", "scope": ["x"], "allowed": [["b"], ["a", "a"]] } ] }"#;
        match parse_problem(text) {
            Err(ParseError::Invalid(d)) => {
                let rules: Vec<_> = d.iter().map(Diagnostic::rule).collect();
                assert_eq!(rules, vec!["unresolved-name", "tuple-value", "tuple-arity"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serialized_dinner_parses_back() {
        let spec = dinner();
        assert_eq!(parse_problem(&serialize_problem(&spec)).unwrap(), spec);
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round_probability(0.1 + 0.45), 0.55);
        assert_eq!(round_probability(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_probability(0.0), 0.0);
    }
}
