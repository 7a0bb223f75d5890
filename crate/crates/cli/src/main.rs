use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use idvoi::analysis::{analyze, is_soluble, minimal_d_reduction, voc_criterion, voi_criterion, Verdict};
use idvoi::error::{
    AnalysisError, FixtureError, GraphError, HomError, ModelError, NormalizeError, SeparationError, SolverError, SystemError,
    WitnessError,
};
use idvoi::fixtures;
use idvoi::graph::{DotStyle, IdGraph, NodeId};
use idvoi::hom::IdHom;
use idvoi::model::IdModel;
use idvoi::normalize::{normal_form_stages, TransformResult};
use idvoi::random::{random_model, rng};
use idvoi::rational::Rational;
use idvoi::separation::{d_separated, find_active_path};
use idvoi::solver::{
    backward_induction, enumerate_optimal, solve, voc_certificate, voi_certificate, InterventionMode, SolverConfig,
    DEFAULT_POLICY_CAP,
};
use idvoi::systems::{build_full_tree, normal_form_check, SystemTree};
use idvoi::witness::{
    check_taskified, taskify, voc_witness, voi_witness, Task, UmaxRule, WitnessConfig, WitnessReport, DEFAULT_BIT_CAP,
};

#[derive(Parser)]
#[command(name = "idvoi", version, about = "Graphical value of information and control for influence diagrams")]
struct Cli {
    #[command(flatten)]
    caps: Caps,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Caps {
    /// Largest deterministic-policy space the solver enumerates.
    #[arg(long, global = true, default_value_t = DEFAULT_POLICY_CAP, value_parser = clap::value_parser!(u64).range(1..))]
    policy_cap: u64,
    /// Longest bitstring domain in witness models.
    #[arg(long, global = true, default_value_t = DEFAULT_BIT_CAP, value_parser = positive)]
    bit_cap: usize,
    /// Seed for random-model sweeps; recorded in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Test solubility and print a decision ordering or a failing pair.
    Check {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test `A ⫫ B | given`, printing an active path when connected.
    Dsep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report solubility, the minimal d-reduction and every VoI and VoC verdict.
    Analyze {
        #[arg(long)]
        graph: PathBuf,
        /// Check each zero verdict on this many random models.
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write Graphviz with removed links dashed.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Build or check trees of systems.
    #[command(subcommand)]
    Tree(TreeCommand),
    /// Run the normal-form pipeline for one information link.
    Normalize {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, num_args = 2, value_names = ["X", "D"], required = true)]
        infolink: Vec<String>,
        /// Directory receiving graph, tree and hom documents per stage.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Construct and certify a witness model.
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Compute an optimal policy exactly.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveMethod::Auto)]
        method: SolveMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Value of information of an existing link.
    Voi {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, num_args = 2, value_names = ["X", "D"], required = true)]
        link: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Value of control of a chance node.
    Voc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        node: String,
        /// Restrict interventions to constants.
        #[arg(long)]
        constant: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extend a model so that optimal policies perform the given tasks.
    Taskify {
        #[arg(long)]
        model: PathBuf,
        /// `X:D` for the identity task, or `X:D=i,j,...` mapping value indices.
        #[arg(long = "task", required = true)]
        tasks: Vec<String>,
        #[arg(long, value_enum, default_value_t = UmaxArg::RangeSum)]
        umax: UmaxArg,
        /// Enumerate optimal policies and check the extension.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write fixture graphs and models.
    Fixtures {
        name: Option<String>,
        #[arg(long, conflicts_with = "name")]
        all: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Verify or compose homomorphisms.
    #[command(subcommand)]
    Hom(HomCommand),
}

#[derive(Subcommand)]
enum TreeCommand {
    /// The full tree of systems for `X -> D` on the minimal d-reduction.
    Build {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, num_args = 2, value_names = ["X", "D"], required = true)]
        infolink: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Validate a tree document against a graph.
    Check {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        /// Reduce the graph first, as `tree build` does.
        #[arg(long)]
        reduce: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum WitnessCommand {
    /// A model in which `node` has positive VoI for `decision`.
    Voi {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        decision: String,
        #[command(flatten)]
        opts: WitnessOpts,
    },
    /// A model in which `node` has positive VoC.
    Voc {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
        /// Directed path to a utility, comma separated; shortest by default.
        #[arg(long, value_delimiter = ',')]
        path: Option<Vec<String>>,
        /// Probability that the controlled node is 1.
        #[arg(long, default_value = "1/4")]
        epsilon: String,
        #[arg(long)]
        constant: bool,
        #[command(flatten)]
        opts: WitnessOpts,
    },
}

#[derive(Args)]
struct WitnessOpts {
    #[arg(long, value_enum, default_value_t = UmaxArg::RangeSum)]
    umax: UmaxArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the transformed graph with tree paths coloured.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HomCommand {
    /// Check conditions (a) to (d).
    Verify {
        #[arg(long)]
        hom: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose a chain given outermost first.
    Compose {
        #[arg(long = "hom", required = true)]
        homs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Auto,
    Enum,
    Bi,
}

#[derive(Clone, Copy, ValueEnum)]
enum UmaxArg {
    RangeSum,
    DoubledForGuesses,
}

impl From<UmaxArg> for UmaxRule {
    fn from(u: UmaxArg) -> Self {
        match u {
            UmaxArg::RangeSum => UmaxRule::RangeSum,
            UmaxArg::DoubledForGuesses => UmaxRule::DoubledForGuesses,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Validation,
    Precondition,
    Resource,
}

impl Class {
    fn code(self) -> u8 {
        match self {
            Class::Validation => 1,
            Class::Precondition => 2,
            Class::Resource => 3,
        }
    }
}

trait Classify {
    fn class(&self) -> Class;
}

impl Classify for GraphError {
    fn class(&self) -> Class {
        Class::Validation
    }
}

impl Classify for FixtureError {
    fn class(&self) -> Class {
        Class::Validation
    }
}

impl Classify for SeparationError {
    fn class(&self) -> Class {
        Class::Validation
    }
}

impl Classify for AnalysisError {
    fn class(&self) -> Class {
        match self {
            AnalysisError::Graph(_) => Class::Validation,
            _ => Class::Precondition,
        }
    }
}

impl Classify for HomError {
    fn class(&self) -> Class {
        match self {
            HomError::Graph(_) | HomError::PartialMap(_) | HomError::DomainMismatch(_) => Class::Validation,
            _ => Class::Precondition,
        }
    }
}

impl Classify for SystemError {
    fn class(&self) -> Class {
        match self {
            SystemError::Graph(_) | SystemError::Separation(_) | SystemError::Malformed(_) => Class::Validation,
            _ => Class::Precondition,
        }
    }
}

impl Classify for NormalizeError {
    fn class(&self) -> Class {
        match self {
            NormalizeError::Graph(_) => Class::Validation,
            NormalizeError::System(e) => e.class(),
            NormalizeError::Hom(e) => e.class(),
            _ => Class::Precondition,
        }
    }
}

impl Classify for ModelError {
    fn class(&self) -> Class {
        match self {
            ModelError::TooLarge { .. } => Class::Resource,
            ModelError::Hom(e) => e.class(),
            ModelError::UnverifiedHom(_) | ModelError::NotAnInfolink(..) => Class::Precondition,
            _ => Class::Validation,
        }
    }
}

impl Classify for SolverError {
    fn class(&self) -> Class {
        match self {
            SolverError::Model(e) => e.class(),
            _ => Class::Precondition,
        }
    }
}

impl Classify for WitnessError {
    fn class(&self) -> Class {
        match self {
            WitnessError::DomainBlowup { .. } => Class::Resource,
            WitnessError::Graph(e) => e.class(),
            WitnessError::Analysis(e) => e.class(),
            WitnessError::Normalize(e) => e.class(),
            WitnessError::Model(e) => e.class(),
            WitnessError::Hom(e) => e.class(),
            WitnessError::InvalidTask(_) => Class::Validation,
            _ => Class::Precondition,
        }
    }
}

#[derive(Debug)]
struct Failure {
    class: Class,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { class: Class::Validation, message: message.into() }
    }

    fn precondition(message: impl Into<String>) -> Self {
        Failure { class: Class::Precondition, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl<E: Classify + fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { class: e.class(), message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::validation(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<IdGraph, Failure> {
    Ok(IdGraph::from_json(&read(path)?)?)
}

fn load_model(path: &Path) -> Result<IdModel, Failure> {
    Ok(IdModel::from_json(&read(path)?)?)
}

fn to_json<T: serde::Serialize>(v: &T) -> Json {
    serde_json::to_value(v).expect("documents serialize")
}

fn pretty(j: &Json) -> String {
    let mut s = serde_json::to_string_pretty(j).expect("json serializes");
    s.push('\n');
    s
}

/// Writes `report` with the seed recorded, to `out` or stdout.
fn emit(mut report: Json, seed: u64, out: Option<&Path>) -> Outcome {
    if let Json::Object(map) = &mut report {
        map.insert("seed".into(), json!(seed));
    }
    match out {
        Some(p) => write(p, &pretty(&report)),
        None => {
            print!("{}", pretty(&report));
            Ok(())
        }
    }
}

fn pair(v: &[String]) -> (&str, &str) {
    (&v[0], &v[1])
}

const PALETTE: [&str; 6] = ["blue", "red", "darkgreen", "orange", "purple", "brown"];

fn tree_style(t: &SystemTree, removed: Vec<(NodeId, NodeId)>) -> DotStyle {
    let paths = t
        .systems
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.paths().into_iter().map(move |(_, p)| (PALETTE[k % PALETTE.len()].to_string(), p.nodes.clone())))
        .collect();
    DotStyle { removed, paths }
}

fn stage_json(r: &TransformResult) -> Json {
    json!({
        "graph": to_json(&r.graph.to_doc()),
        "tree": to_json(&r.tree.to_doc()),
        "hom": to_json(&r.hom.to_doc()),
        "provenance": to_json(&r.provenance),
    })
}

fn run(cli: Cli) -> Outcome {
    let seed = cli.caps.seed;
    let solver = SolverConfig { policy_cap: cli.caps.policy_cap };
    match cli.command {
        Command::Check { graph, out } => {
            let g = load_graph(&graph)?;
            let r = is_soluble(&g);
            match (&r.ordering, &r.failing_pair) {
                (Some(o), _) => eprintln!("soluble; ordering {}", o.join(" < ")),
                (None, Some((p, d, path))) => {
                    eprintln!("insoluble: {p} is connected to the utilities of {d} via {}", path.nodes.join(" - "))
                }
                (None, None) => eprintln!("insoluble"),
            }
            let mut j = to_json(&r);
            j["verdict"] = json!(if r.soluble { "soluble" } else { "insoluble" });
            emit(j, seed, out.as_deref())
        }
        Command::Dsep { graph, a, b, given, out } => {
            let g = load_graph(&graph)?;
            let (sa, sb, z): (BTreeSet<NodeId>, BTreeSet<NodeId>, BTreeSet<NodeId>) =
                (a.iter().cloned().collect(), b.iter().cloned().collect(), given.iter().cloned().collect());
            let separated = d_separated(&g, &sa, &sb, &z)?;
            let mut path = None;
            if !separated {
                'outer: for x in &sa {
                    for y in &sb {
                        if let Some(p) = find_active_path(&g, x, y, &z)? {
                            path = Some(p.nodes);
                            break 'outer;
                        }
                    }
                }
            }
            let verdict = if separated { "separated" } else { "connected" };
            match &path {
                Some(p) => eprintln!("{verdict} via {}", p.join(" - ")),
                None => eprintln!("{verdict}"),
            }
            emit(json!({ "verdict": verdict, "separated": separated, "path": path }), seed, out.as_deref())
        }
        Command::Analyze { graph, sweep, out, dot } => {
            let g = load_graph(&graph)?;
            let report = analyze(&g);
            eprintln!(
                "{}; {} nonrequisite link(s); {} VoI and {} VoC verdicts",
                if report.soluble { "soluble" } else { "insoluble" },
                report.removed_links.len(),
                report.voi.len(),
                report.voc.len()
            );
            if let Some(p) = &dot {
                write(p, &g.to_dot_styled(&DotStyle { removed: report.removed_links.clone(), paths: vec![] }))?;
            }
            let mut j = to_json(&report);
            if let Some(n) = sweep {
                let s = zero_sweep(&g, n, seed, &solver)?;
                let failed = !s["violations"].as_array().is_some_and(|v| v.is_empty());
                eprintln!("sweep: {} zero verdict(s) checked on {n} model(s) each", s["checked"]);
                j["sweep"] = s;
                if failed {
                    emit(j, seed, out.as_deref())?;
                    return Err(Failure::precondition("a zero verdict has nonzero value on a sampled model"));
                }
            }
            emit(j, seed, out.as_deref())
        }
        Command::Tree(TreeCommand::Build { graph, infolink, out, dot }) => {
            let g = load_graph(&graph)?;
            let (x, d) = pair(&infolink);
            g.require(x)?;
            g.require_decision(d)?;
            if !is_soluble(&g).soluble {
                return Err(NormalizeError::Insoluble.into());
            }
            let (reduced, trace) = minimal_d_reduction(&g);
            if !reduced.has_edge(x, d) {
                return Err(NormalizeError::CriterionFails(x.into(), d.into()).into());
            }
            let t = build_full_tree(&reduced, x, d)?;
            eprintln!("{} system(s) for {x} -> {d}", t.systems.len());
            if let Some(p) = &dot {
                write(p, &reduced.to_dot_styled(&tree_style(&t, trace.links())))?;
            }
            emit(to_json(&t.to_doc()), seed, out.as_deref())
        }
        Command::Tree(TreeCommand::Check { graph, tree, reduce, out }) => {
            let mut g = load_graph(&graph)?;
            if reduce {
                g = minimal_d_reduction(&g).0;
            }
            let t = SystemTree::from_json(&g, &read(&tree)?)?;
            let violations = t.validate(&g);
            let nf = normal_form_check(&g, &t);
            eprintln!(
                "{}; {}; {}",
                if violations.is_empty() { "valid" } else { "invalid" },
                if t.is_full(&g) { "full" } else { "not full" },
                if nf.holds() { "normal form" } else { "not in normal form" }
            );
            let valid = violations.is_empty();
            emit(
                json!({ "valid": valid, "violations": violations, "full": t.is_full(&g), "normal_form": to_json(&nf) }),
                seed,
                out.as_deref(),
            )?;
            if valid {
                Ok(())
            } else {
                Err(Failure::precondition("tree is invalid"))
            }
        }
        Command::Normalize { graph, infolink, out, dot } => {
            let g = load_graph(&graph)?;
            let (x, d) = pair(&infolink);
            let st = normal_form_stages(&g, x, d)?;
            let stages = [("split", &st.split), ("frontdoor", &st.frontdoor), ("pruned", &st.pruned), ("result", &st.result)];
            let mut summary = vec![];
            for (name, r) in stages {
                let mut h = r.hom.clone();
                let verified = h.verify().is_ok();
                let nf = normal_form_check(&r.graph, &r.tree);
                summary.push(json!({
                    "stage": name,
                    "nodes": r.graph.len(),
                    "edges": r.graph.edge_count(),
                    "hom_verified": verified,
                    "soluble": is_soluble(&r.graph).soluble,
                    "normal_form": to_json(&nf),
                }));
                if let Some(dir) = &out {
                    write(&dir.join(format!("{name}.graph.json")), &format!("{}\n", r.graph.to_json()))?;
                    write(&dir.join(format!("{name}.tree.json")), &format!("{}\n", r.tree.to_json()))?;
                    write(&dir.join(format!("{name}.hom.json")), &format!("{}\n", r.hom.to_json()))?;
                }
            }
            if let Some(dir) = &out {
                write(&dir.join("reduced.graph.json"), &format!("{}\n", st.reduced.to_json()))?;
            }
            if let Some(p) = &dot {
                write(p, &st.result.graph.to_dot_styled(&tree_style(&st.result.tree, vec![])))?;
            }
            let nf = normal_form_check(&st.result.graph, &st.result.tree);
            eprintln!(
                "{} -> {d}: {} node(s) after normalization; {}",
                x,
                st.result.graph.len(),
                if nf.holds() { "normal form holds" } else { "normal form fails" }
            );
            let mut j = json!({
                "infolink": [x, d],
                "reduced": to_json(&st.reduced.to_doc()),
                "removed_links": st.reduction.links(),
                "stages": summary,
            });
            if out.is_none() {
                j["result"] = stage_json(&st.result);
            }
            emit(j, seed, None)
        }
        Command::Witness(w) => {
            let (report, opts) = match w {
                WitnessCommand::Voi { graph, node, decision, opts } => {
                    let g = load_graph(&graph)?;
                    let cfg = witness_config(&cli.caps, solver, &opts, Rational::new(1, 4), InterventionMode::ReadsParents);
                    (voi_witness(&g, &node, &decision, &cfg)?.report, opts)
                }
                WitnessCommand::Voc { graph, node, path, epsilon, constant, opts } => {
                    let g = load_graph(&graph)?;
                    let eps: Rational = epsilon.parse().map_err(|e| Failure::validation(format!("bad --epsilon: {e}")))?;
                    if !eps.is_positive() || eps >= Rational::one() {
                        return Err(Failure::validation("--epsilon must lie strictly between 0 and 1"));
                    }
                    let mode = if constant { InterventionMode::Constant } else { InterventionMode::ReadsParents };
                    let cfg = witness_config(&cli.caps, solver, &opts, eps, mode);
                    (voc_witness(&g, &node, path.as_deref(), &cfg)?.report, opts)
                }
            };
            summarize_witness(&report);
            if let Some(p) = &opts.dot {
                let t = report.trees.last().expect("a witness has a tree");
                write(p, &report.transformed.to_dot_styled(&tree_style(t, vec![])))?;
            }
            emit(report.to_json(), seed, opts.out.as_deref())
        }
        Command::Solve { model, method, out } => {
            let m = load_model(&model)?;
            let s = match method {
                SolveMethod::Auto => solve(&m, &solver)?,
                SolveMethod::Enum => enumerate_optimal(&m, &solver)?,
                SolveMethod::Bi => {
                    let ordering = is_soluble(&m.graph).ordering.ok_or_else(|| Failure::from(NormalizeError::Insoluble))?;
                    backward_induction(&m, &ordering)?
                }
            };
            eprintln!("EU* = {} ({}) by {}", s.eu, s.eu.to_f64(), s.method);
            emit(s.to_json(&m), seed, out.as_deref())
        }
        Command::Voi { model, link, out } => {
            let m = load_model(&model)?;
            let (x, d) = pair(&link);
            let c = voi_certificate(&m, x, d, &solver)?;
            eprintln!("VoI({x}, {d}) = {} ({})", c.value, c.value.to_f64());
            emit(
                json!({
                    "link": [x, d],
                    "with_link": c.with_link.to_json(&m),
                    "without_link": c.without_link.to_json(&m.remove_infolink(x, d)?),
                    "voi": c.value.to_string(),
                    "voi_decimal": c.value.to_f64(),
                }),
                seed,
                out.as_deref(),
            )
        }
        Command::Voc { model, node, constant, out } => {
            let m = load_model(&model)?;
            let mode = if constant { InterventionMode::Constant } else { InterventionMode::ReadsParents };
            let c = voc_certificate(&m, &node, mode, &solver)?;
            eprintln!("VoC({node}) = {} ({})", c.value, c.value.to_f64());
            let intervention: Vec<String> = c.intervention.iter().map(|i| m.domains[&node].value(*i).to_string()).collect();
            emit(
                json!({
                    "node": node,
                    "mode": c.mode,
                    "eu_baseline": c.baseline.to_string(),
                    "eu_controlled": c.controlled.to_string(),
                    "intervention": intervention,
                    "voc": c.value.to_string(),
                    "voc_decimal": c.value.to_f64(),
                }),
                seed,
                out.as_deref(),
            )
        }
        Command::Taskify { model, tasks, umax, check, out } => {
            let m = load_model(&model)?;
            let tasks = tasks.iter().map(|t| parse_task(&m, t)).collect::<Result<Vec<_>, _>>()?;
            let cfg = WitnessConfig { bit_cap: cli.caps.bit_cap, solver, umax: umax.into(), ..WitnessConfig::default() };
            let t = taskify(&m, &tasks, &cfg)?;
            eprintln!("{} node(s), {} added utilit(ies)", t.graph.len(), t.added_utilities.len());
            let mut j = json!({
                "tasks": to_json(&tasks),
                "graph": to_json(&t.graph.to_doc()),
                "model": to_json(&t.model.to_doc()),
                "hom": to_json(&t.hom.to_doc()),
                "added_utilities": t.added_utilities,
            });
            if check {
                let c = check_taskified(&t, &m, &tasks, &cfg)?;
                eprintln!("check {}", if c.holds() { "holds" } else { "fails" });
                j["check"] = to_json(&c);
            }
            emit(j, seed, out.as_deref())
        }
        Command::Fixtures { name, all, out } => {
            let names: Vec<String> = match (name, all) {
                (Some(n), false) => vec![n],
                (None, true) => fixtures::NAMES.iter().map(|s| s.to_string()).collect(),
                _ => return Err(Failure::validation("give a fixture name or --all")),
            };
            let mut written = vec![];
            for n in &names {
                let g = fixtures::graph(n)?;
                let gp = out.join(format!("{n}.json"));
                write(&gp, &format!("{}\n", g.to_json()))?;
                written.push(gp.display().to_string());
                if let Some(m) = fixtures::model(n)? {
                    let mp = out.join(format!("{n}.model.json"));
                    write(&mp, &format!("{}\n", m.to_json()))?;
                    written.push(mp.display().to_string());
                }
            }
            eprintln!("wrote {} file(s)", written.len());
            emit(json!({ "fixtures": names, "files": written }), seed, None)
        }
        Command::Hom(HomCommand::Verify { hom, out }) => {
            let mut h = IdHom::from_json(&read(&hom)?)?;
            let violations = h.violations();
            let verified = h.verify().is_ok();
            eprintln!("{}", if verified { "verified".to_string() } else { format!("{} violation(s)", violations.len()) });
            emit(json!({ "verified": verified, "violations": to_json(&violations) }), seed, out.as_deref())?;
            if verified {
                Ok(())
            } else {
                Err(Failure::precondition("homomorphism conditions fail"))
            }
        }
        Command::Hom(HomCommand::Compose { homs, out }) => {
            let chain = homs.iter().map(|p| Ok(IdHom::from_json(&read(p)?)?)).collect::<Result<Vec<_>, Failure>>()?;
            let refs: Vec<&IdHom> = chain.iter().collect();
            let h = IdHom::compose_all(&refs)?;
            eprintln!("composed {} hom(s): {} -> {} node(s)", chain.len(), h.source.len(), h.target.len());
            emit(to_json(&h.to_doc()), seed, out.as_deref())
        }
    }
}

fn witness_config(caps: &Caps, solver: SolverConfig, opts: &WitnessOpts, epsilon: Rational, intervention: InterventionMode) -> WitnessConfig {
    WitnessConfig { bit_cap: caps.bit_cap, solver, epsilon, intervention, umax: opts.umax.into() }
}

fn summarize_witness(r: &WitnessReport) {
    let what = match &r.decision {
        Some(d) => format!("VoI({}, {d})", r.node),
        None => format!("VoC({})", r.node),
    };
    for c in &r.certificates {
        eprintln!("{what} = {} at the {:?} level", c.value(), c.level());
    }
}

/// `X:D` or `X:D=i,j,...`.
fn parse_task(m: &IdModel, s: &str) -> Result<Task, Failure> {
    let (link, map) = match s.split_once('=') {
        Some((l, r)) => (l, Some(r)),
        None => (s, None),
    };
    let (x, d) = link.split_once(':').ok_or_else(|| Failure::validation(format!("task {s:?} is not X:D")))?;
    m.graph.require(x)?;
    m.graph.require_decision(d)?;
    match map {
        Some(r) => {
            let map = r
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|e| Failure::validation(format!("task {s:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            Ok(Task::new(x, d, map))
        }
        None => Ok(Task::identity(x, d, m.domain(x), m.domain(d))?),
    }
}

/// Samples `n` random models and checks every zero verdict numerically.
fn zero_sweep(g: &IdGraph, n: usize, seed: u64, solver: &SolverConfig) -> Result<Json, Failure> {
    let voi_zero: Vec<(NodeId, NodeId)> = g
        .infolinks()
        .into_iter()
        .filter(|(x, d)| g.is_chance(x) && voi_criterion(g, x, d).is_ok_and(|v| v == Verdict::Zero))
        .collect();
    let voc_zero: Vec<NodeId> = g
        .nodes()
        .filter(|x| g.is_chance(x) && voc_criterion(g, x).is_ok_and(|v| v == Verdict::Zero))
        .cloned()
        .collect();
    let mut r = rng(seed);
    let mut sampled = 0;
    let mut violations = vec![];
    for _ in 0..n {
        let Some(m) = random_model(&mut r, g, 2, 16) else { continue };
        sampled += 1;
        for (x, d) in &voi_zero {
            let v = voi_certificate(&m, x, d, solver)?.value;
            if !v.is_zero() {
                violations.push(json!({ "voi": [x, d], "value": v.to_string() }));
            }
        }
        for x in &voc_zero {
            let v = voc_certificate(&m, x, InterventionMode::ReadsParents, solver)?.value;
            if !v.is_zero() {
                violations.push(json!({ "voc": x, "value": v.to_string() }));
            }
        }
    }
    Ok(json!({
        "checked": voi_zero.len() + voc_zero.len(),
        "models": sampled,
        "voi_zero": voi_zero,
        "voc_zero": voc_zero,
        "violations": violations,
    }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(Class::Validation.code()) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.class.code())
        }
    }
}
