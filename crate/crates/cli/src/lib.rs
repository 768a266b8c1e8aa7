//! The `pcsp` command line: argument handling, output documents and exit codes.
//!
//! Every command prints one pretty JSON document on stdout. Exit code 0 means
//! success, 1 a well-formed problem without a useful answer (nothing covered,
//! no decision found), 2 an input error. Progress records go to stderr as
//! JSON lines.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcsp_core::conditional::{solve_conditional_with_progress, ConditionalOptions, Picker};
use pcsp_core::decomposition::covered_environment;
use pcsp_core::io::{
    decision_to_map, environment_to_map, parse_policy, parse_problem, policy_to_document,
    round_probability, EnvironmentDoc, OrderedMap, ParseError, RuleDoc,
};
use pcsp_core::model::{Decision, ProblemSpec, VarRef, World};
use pcsp_core::oracle;
use pcsp_core::pure_search::{search_optimal_pure_with_progress, PureSearchOptions, VariableOrder};
use pcsp_core::search::NoProgress;
use pcsp_core::{Budget, ProgressRecord, ProgressSink};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_ANSWER: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "pcsp",
    version,
    about = "Solve probabilistic constraint satisfaction problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a problem file.
    Validate(FileArg),
    /// Brute-force report: probability of consistency, bad worlds, best pure decisions.
    Analyze(FileArg),
    /// Find a decision with the highest probability of covering the actual world.
    SolvePure(SolvePureArgs),
    /// Build a conditional decision covering every world that can be covered.
    SolveConditional(SolveConditionalArgs),
    /// Evaluate a decision, or look a world up in a policy.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct FileArg {
    /// Problem file.
    file: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Stop after this many milliseconds and report the best answer so far.
    #[arg(long)]
    budget_ms: Option<u64>,
    /// Stream one JSON record per improvement to stderr.
    #[arg(long)]
    progress: bool,
    /// Include wall time in the output; makes output differ between runs.
    #[arg(long)]
    timing: bool,
    /// Reserved. No command uses randomness.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SolvePureArgs {
    file: PathBuf,
    /// Stop after this many node expansions.
    #[arg(long)]
    budget_nodes: Option<u64>,
    #[arg(long, value_enum, default_value_t = OrderArg::Static)]
    order: OrderArg,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct SolveConditionalArgs {
    file: PathBuf,
    /// Stop after this many iterations.
    #[arg(long, visible_alias = "budget-nodes")]
    budget_iterations: Option<u64>,
    #[arg(long, value_enum, default_value_t = PickerArg::Maxprob)]
    picker: PickerArg,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    file: PathBuf,
    /// Decision to score, as `var=value,...`.
    #[arg(long, conflicts_with_all = ["policy", "world"], required_unless_present = "policy")]
    decision: Option<String>,
    /// Policy file: a rule list or a `solve-conditional` output document.
    #[arg(long, requires = "world")]
    policy: Option<PathBuf>,
    /// World to look up, as `param=value,...`.
    #[arg(long, requires = "policy")]
    world: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrderArg {
    Static,
    SmallestDomain,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PickerArg {
    Maxprob,
    Fifo,
}

/// An input error, reported on stderr with exit code 2.
#[derive(Debug)]
struct InputError(String);

impl<E: Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Outcome = Result<(i32, String), InputError>;

/// Runs the command line `args` (program name first), writing the result
/// document to `out` and diagnostics and progress to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return if code == 0 { EXIT_OK } else { EXIT_INPUT };
        }
    };
    let result = match &cli.command {
        Command::Validate(a) => validate(&a.file),
        Command::Analyze(a) => analyze(&a.file),
        Command::SolvePure(a) => solve_pure(a, err),
        Command::SolveConditional(a) => solve_conditional(a, err),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok((code, doc)) => {
            let _ = writeln!(out, "{doc}");
            code
        }
        Err(InputError(msg)) => {
            let _ = writeln!(err, "pcsp: error: {msg}");
            EXIT_INPUT
        }
    }
}

fn to_json<T: Serialize>(doc: &T) -> String {
    serde_json::to_string_pretty(doc).expect("output documents serialize")
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ProblemSpec, InputError> {
    parse_problem(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn budget(steps: Option<u64>, run: &RunArgs) -> Budget {
    Budget {
        max_steps: steps,
        time_limit: run.budget_ms.map(Duration::from_millis),
        cancel: None,
    }
}

/// Writes each record to `err` as one JSON line.
struct JsonLines<'a>(&'a mut dyn Write);

impl ProgressSink for JsonLines<'_> {
    fn record(&mut self, mut record: ProgressRecord) {
        match &mut record {
            ProgressRecord::Incumbent { incumbent_ps, .. } => {
                *incumbent_ps = round_probability(*incumbent_ps)
            }
            ProgressRecord::Iteration { p_good, p_bad, .. } => {
                *p_good = round_probability(*p_good);
                *p_bad = round_probability(*p_bad);
            }
        }
        if let Ok(line) = serde_json::to_string(&record) {
            let _ = writeln!(self.0, "{line}");
        }
    }
}

#[derive(Serialize)]
struct DiagnosticDoc {
    rule: String,
    message: String,
}

#[derive(Serialize)]
struct ValidateDoc<'a> {
    command: &'static str,
    file: &'a str,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    parameters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variables: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraints: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    one_parameter_per_constraint: Option<bool>,
    diagnostics: Vec<DiagnosticDoc>,
}

fn validate(path: &Path) -> Outcome {
    let file = path.display().to_string();
    let mut doc = ValidateDoc {
        command: "validate",
        file: &file,
        valid: false,
        parameters: None,
        variables: None,
        constraints: None,
        one_parameter_per_constraint: None,
        diagnostics: Vec::new(),
    };
    match parse_problem(&read(path)?) {
        Ok(spec) => {
            doc.valid = true;
            doc.parameters = Some(spec.parameters().len());
            doc.variables = Some(spec.variables().len());
            doc.constraints = Some(spec.constraints().len());
            doc.one_parameter_per_constraint = Some(spec.has_property_f());
            Ok((EXIT_OK, to_json(&doc)))
        }
        Err(ParseError::Invalid(diagnostics)) => {
            doc.diagnostics = diagnostics
                .iter()
                .map(|d| DiagnosticDoc {
                    rule: d.rule().to_string(),
                    message: d.to_string(),
                })
                .collect();
            Ok((EXIT_INPUT, to_json(&doc)))
        }
        Err(e @ ParseError::Syntax { .. }) => {
            doc.diagnostics.push(DiagnosticDoc {
                rule: "syntax".into(),
                message: e.to_string(),
            });
            Ok((EXIT_INPUT, to_json(&doc)))
        }
    }
}

fn world_to_map(spec: &ProblemSpec, w: &World) -> OrderedMap<String> {
    OrderedMap(
        spec.parameters()
            .iter()
            .zip(spec.world_names(w))
            .map(|(p, v)| (p.name().to_string(), v.to_string()))
            .collect(),
    )
}

#[derive(Serialize)]
struct WorldDoc {
    world: OrderedMap<String>,
    probability: f64,
}

#[derive(Serialize)]
struct ScoredDecision {
    decision: OrderedMap<String>,
    ps: f64,
}

#[derive(Serialize)]
struct AnalyzeDoc<'a> {
    command: &'static str,
    file: &'a str,
    p_cons: f64,
    p_spd: f64,
    good_world_count: usize,
    bad_worlds: Vec<WorldDoc>,
    optimal_pure: Vec<ScoredDecision>,
    decisions: Vec<ScoredDecision>,
}

fn analyze(path: &Path) -> Outcome {
    let spec = load(path)?;
    let report = oracle::analyze(&spec)?;
    let scored = |d: &Decision| ScoredDecision {
        decision: decision_to_map(&spec, d),
        ps: round_probability(report.ps_table[d]),
    };
    let file = path.display().to_string();
    let doc = AnalyzeDoc {
        command: "analyze",
        file: &file,
        p_cons: round_probability(report.p_cons),
        p_spd: round_probability(report.p_spd),
        good_world_count: report.good_worlds.len(),
        bad_worlds: report
            .bad_worlds
            .iter()
            .map(|w| WorldDoc {
                world: world_to_map(&spec, w),
                probability: round_probability(spec.world_probability(w)),
            })
            .collect(),
        optimal_pure: report.optimal_pure.iter().map(scored).collect(),
        decisions: report.ps_table.keys().map(scored).collect(),
    };
    let code = if report.p_cons > 0.0 {
        EXIT_OK
    } else {
        EXIT_NO_ANSWER
    };
    Ok((code, to_json(&doc)))
}

#[derive(Serialize)]
struct SolvePureDoc<'a> {
    command: &'static str,
    file: &'a str,
    order: VariableOrder,
    decision: Option<OrderedMap<String>>,
    ps: f64,
    proven_optimal: bool,
    interrupted: bool,
    nodes_expanded: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<u64>,
}

fn solve_pure(args: &SolvePureArgs, err: &mut dyn Write) -> Outcome {
    let spec = load(&args.file)?;
    let options = PureSearchOptions {
        order: match args.order {
            OrderArg::Static => VariableOrder::Static,
            OrderArg::SmallestDomain => VariableOrder::SmallestDomain,
        },
        budget: budget(args.budget_nodes, &args.run),
    };
    let started = Instant::now();
    let outcome = if args.run.progress {
        search_optimal_pure_with_progress(&spec, &options, &mut JsonLines(err))?
    } else {
        search_optimal_pure_with_progress(&spec, &options, &mut NoProgress)?
    };
    let file = args.file.display().to_string();
    let doc = SolvePureDoc {
        command: "solve-pure",
        file: &file,
        order: options.order,
        decision: outcome.best.as_ref().map(|d| decision_to_map(&spec, d)),
        ps: round_probability(outcome.best_ps),
        proven_optimal: outcome.proven_optimal,
        interrupted: outcome.interrupted,
        nodes_expanded: outcome.nodes_expanded,
        elapsed_ms: args
            .run
            .timing
            .then(|| started.elapsed().as_millis() as u64),
    };
    let code = if outcome.best.is_some() && outcome.best_ps > 0.0 {
        EXIT_OK
    } else {
        EXIT_NO_ANSWER
    };
    Ok((code, to_json(&doc)))
}

#[derive(Serialize)]
struct SolveConditionalDoc<'a> {
    command: &'static str,
    file: &'a str,
    picker: Picker,
    p_good: f64,
    p_bad: f64,
    complete: bool,
    iterations: u64,
    rules: Vec<RuleDoc>,
    bad: Vec<EnvironmentDoc>,
    pending: Vec<EnvironmentDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<u64>,
}

fn solve_conditional(args: &SolveConditionalArgs, err: &mut dyn Write) -> Outcome {
    let spec = load(&args.file)?;
    let options = ConditionalOptions {
        picker: match args.picker {
            PickerArg::Maxprob => Picker::MaxProb,
            PickerArg::Fifo => Picker::Fifo,
        },
        budget: budget(args.budget_iterations, &args.run),
    };
    let started = Instant::now();
    let cd = if args.run.progress {
        solve_conditional_with_progress(&spec, &options, &mut JsonLines(err))?
    } else {
        solve_conditional_with_progress(&spec, &options, &mut NoProgress)?
    };
    let policy = policy_to_document(&spec, &cd);
    let file = args.file.display().to_string();
    let doc = SolveConditionalDoc {
        command: "solve-conditional",
        file: &file,
        picker: options.picker,
        p_good: round_probability(cd.p_good),
        p_bad: round_probability(cd.p_bad),
        complete: cd.complete,
        iterations: cd.iterations,
        rules: policy.rules,
        bad: policy.bad,
        pending: cd
            .pending
            .iter()
            .map(|e| EnvironmentDoc {
                environment: environment_to_map(&spec, e),
                probability: round_probability(e.probability()),
            })
            .collect(),
        elapsed_ms: args
            .run
            .timing
            .then(|| started.elapsed().as_millis() as u64),
    };
    let code = if cd.rules.is_empty() {
        EXIT_NO_ANSWER
    } else {
        EXIT_OK
    };
    Ok((code, to_json(&doc)))
}

/// Parses `name=value,...` into value indices for `refs`, which must each
/// appear exactly once and be the only names used.
fn parse_pairs(
    spec: &ProblemSpec,
    text: &str,
    refs: &[VarRef],
    what: &str,
) -> Result<Vec<usize>, InputError> {
    let mut pairs = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| InputError(format!("expected name=value, got `{item}`")))?;
        pairs.push((k.trim(), v.trim()));
    }
    let assignment = spec.assignment_by_names(&pairs)?;
    if assignment.len() != pairs.len() {
        return Err(InputError(format!("{what} names something twice")));
    }
    if let Some((r, _)) = assignment.iter().find(|(r, _)| !refs.contains(r)) {
        return Err(InputError(format!(
            "{what} cannot set `{}`",
            spec.name_of(*r)
        )));
    }
    refs.iter()
        .map(|&r| {
            assignment
                .get(r)
                .ok_or_else(|| InputError(format!("{what} is missing `{}`", spec.name_of(r))))
        })
        .collect()
}

#[derive(Serialize)]
struct EvalDecisionDoc<'a> {
    command: &'static str,
    file: &'a str,
    decision: OrderedMap<String>,
    ps: f64,
}

#[derive(Serialize)]
struct EvalWorldDoc<'a> {
    command: &'static str,
    file: &'a str,
    policy: &'a str,
    world: OrderedMap<String>,
    /// `rule`, `bad` or `unknown`.
    status: &'static str,
    decision: Option<OrderedMap<String>>,
}

fn eval(args: &EvalArgs) -> Outcome {
    let spec = load(&args.file)?;
    let file = args.file.display().to_string();
    if let Some(text) = &args.decision {
        let refs: Vec<VarRef> = (0..spec.variables().len()).map(VarRef::Var).collect();
        let d = spec.decision(parse_pairs(&spec, text, &refs, "decision")?)?;
        let ps = if spec.has_property_f() {
            covered_environment(&spec, &d)?.map_or(0.0, |e| e.probability())
        } else {
            oracle::check_size(&spec)?;
            oracle::ps_of_decision(&spec, &d)
        };
        let doc = EvalDecisionDoc {
            command: "eval",
            file: &file,
            decision: decision_to_map(&spec, &d),
            ps: round_probability(ps),
        };
        let code = if ps > 0.0 { EXIT_OK } else { EXIT_NO_ANSWER };
        return Ok((code, to_json(&doc)));
    }

    let (Some(policy_path), Some(text)) = (&args.policy, &args.world) else {
        return Err(InputError(
            "eval needs --decision, or --policy with --world".into(),
        ));
    };
    let policy = parse_policy(&spec, &read(policy_path)?)
        .map_err(|e| InputError(format!("{}: {e}", policy_path.display())))?;
    let refs: Vec<VarRef> = (0..spec.parameters().len()).map(VarRef::Param).collect();
    let w = spec.world(parse_pairs(&spec, text, &refs, "world")?)?;
    let decision = policy.lookup(&w);
    let status = match decision {
        Some(_) => "rule",
        None if policy.is_known_bad(&w) => "bad",
        None => "unknown",
    };
    let policy_name = policy_path.display().to_string();
    let doc = EvalWorldDoc {
        command: "eval",
        file: &file,
        policy: &policy_name,
        world: world_to_map(&spec, &w),
        status,
        decision: decision.map(|d| decision_to_map(&spec, d)),
    };
    let code = if decision.is_some() {
        EXIT_OK
    } else {
        EXIT_NO_ANSWER
    };
    Ok((code, to_json(&doc)))
}
