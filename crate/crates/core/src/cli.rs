//! The `bss` command line.
//!
//! Exit status is 0 on success or a feasible result, 1 when a run completed
//! but the result is infeasible or the agent failed, and 2 on usage or input
//! errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agent::{
    run_claba, run_laba, serve_proposer, AgentOptions, AgentRunResult, ClabaRoles, ConstraintTester, EngineExecutor,
    ExternalProposer, Proposer, RagContext, ScriptedProposer, TestPredicate, PROPOSER_ENDPOINT_ENV,
};
use crate::coverage::check_constraints;
use crate::data_io::{
    generate_instance, load_deployment, load_instance_dir, save_deployment, save_instance_dir, GeneratorConfig,
    ParamsDocument,
};
use crate::experiment::{run_experiment, ExperimentConfig, Method};
use crate::model::{CandidateFilter, ProblemInstance};
use crate::rag::{read_knowledge_base, HashEmbedder, VectorStore, DEFAULT_DIMENSION};
use crate::render::{render, ImageFormat};
use crate::solvers::{solve, Algorithm, ObjectiveMode, SolveError, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "bss", version, about = "Place macro and micro base stations over weak-coverage traffic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic instance directory.
    Gen(GenArgs),
    /// Solve an instance with one algorithm.
    Solve(SolveArgs),
    /// Check a deployment against every constraint.
    Eval(EvalArgs),
    /// Draw an instance and optional deployment.
    Render(RenderArgs),
    /// Compare methods over sampled regions.
    Experiment(ExperimentArgs),
    /// Agent loops.
    #[command(subcommand)]
    Agent(AgentCommand),
    /// Knowledge-base indexing and retrieval.
    #[command(subcommand)]
    Rag(RagCommand),
    /// Serve a scripted proposer over stdin/stdout.
    Proposer(ProposerArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 100)]
    pub width: i64,
    #[arg(long, default_value_t = 100)]
    pub height: i64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub hotspots: Option<usize>,
    /// Existing stations to place.
    #[arg(long)]
    pub stations: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Instance directory.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub algo: Option<Algorithm>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluation budget.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub objective: Option<ObjectiveMode>,
    /// `weak_cells_only`, `all_cells` or `explicit:x,y;x,y`.
    #[arg(long)]
    pub candidates: Option<String>,
    /// Solver configuration JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Deployment CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluation report JSON to write.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub deployment: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub deployment: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to svg for `.svg` outputs and ppm otherwise.
    #[arg(long)]
    pub format: Option<ImageFormat>,
    /// Pixels per cell.
    #[arg(long, default_value_t = 4)]
    pub scale: u32,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// Parent instance directory; generated when omitted.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value_t = 2500)]
    pub gen_width: i64,
    #[arg(long, default_value_t = 2500)]
    pub gen_height: i64,
    #[arg(long, default_value_t = 0)]
    pub gen_seed: u64,
    #[arg(long, default_value_t = 25)]
    pub regions: usize,
    /// Region side length.
    #[arg(long, default_value_t = 100)]
    pub size: i64,
    /// Comma-separated: greedy, sa, pso, pso-cov, laba, claba.
    #[arg(long, value_delimiter = ',', default_value = "greedy,sa,pso")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20_000)]
    pub budget: usize,
    #[arg(long, default_value_t = crate::agent::DEFAULT_CAP)]
    pub cap: usize,
    /// Scripted proposer preset for agent methods.
    #[arg(long, default_value = "budget-doubling")]
    pub preset: String,
    /// Scripted proposer rule table (JSON), instead of a preset.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Knowledge base for agent methods.
    #[arg(long)]
    pub rag: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub topk: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Report CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum AgentCommand {
    /// Run one agent strategy on an instance.
    Run(AgentRunArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Laba,
    Claba,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposerKind {
    Scripted,
    External,
}

#[derive(Args, Debug)]
pub struct AgentRunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Strategy::Laba)]
    pub strategy: Strategy,
    #[arg(long, value_enum, default_value_t = ProposerKind::Scripted)]
    pub proposer: ProposerKind,
    #[arg(long, default_value = "greedy")]
    pub preset: String,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// `tcp://host:port` or a command line; defaults to $BSS_PROPOSER_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = crate::agent::DEFAULT_CAP)]
    pub cap: usize,
    /// Knowledge-base file or directory.
    #[arg(long)]
    pub rag: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub topk: usize,
    /// Extra tester criterion for the pipeline strategy.
    #[arg(long)]
    pub min_coverage: Option<f64>,
    /// Transcript to write, one JSON record per line.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Deployment CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum RagCommand {
    /// Build a store file from a knowledge base.
    Index(RagIndexArgs),
    /// Retrieve the top documents for a query.
    Query(RagQueryArgs),
}

#[derive(Args, Debug)]
pub struct RagIndexArgs {
    /// Knowledge-base file or directory.
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIMENSION)]
    pub dim: usize,
}

#[derive(Args, Debug)]
pub struct RagQueryArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(required = true)]
    pub query: Vec<String>,
}

#[derive(Args, Debug)]
pub struct ProposerArgs {
    #[arg(long, default_value = "greedy")]
    pub preset: String,
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

type CmdResult = Result<i32, String>;

fn read_to_string(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(dir: &Path) -> Result<ProblemInstance, String> {
    load_instance_dir(dir).map_err(|e| e.to_string())
}

fn verdict(feasible: bool) -> i32 {
    if feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    }
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let mut cfg = GeneratorConfig::for_area(a.width, a.height, a.seed);
    if let Some(n) = a.hotspots {
        cfg.hotspots = n;
    }
    if let Some(n) = a.stations {
        cfg.existing_stations = n;
    }
    if let Some(t) = a.theta {
        cfg.params.theta_cp = t;
    }
    let inst = generate_instance(&cfg).map_err(|e| e.to_string())?;
    save_instance_dir(&inst, &a.out, Some(&ParamsDocument::from_generator(&cfg))).map_err(|e| e.to_string())?;
    println!(
        "wrote {} cells ({} weak, weak traffic {:.3}) and {} existing stations to {}",
        inst.cells().len(),
        inst.weak_cells().count(),
        inst.total_weak_traffic(),
        inst.existing_stations().len(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_solve(a: SolveArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let mut cfg = match &a.config {
        Some(path) => serde_json::from_str::<SolverConfig>(&read_to_string(path)?)
            .map_err(|e| format!("{}: {e}", path.display()))?,
        None => SolverConfig::default(),
    };
    if let Some(alg) = a.algo {
        cfg.algorithm = alg;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(n) = a.budget {
        cfg.max_evaluations = n;
    }
    if let Some(mode) = a.objective {
        cfg.objective_mode = mode;
    }
    if let Some(c) = &a.candidates {
        cfg.candidates = CandidateFilter::parse_wire(c)?;
    }
    let res = solve(&inst, &cfg).map_err(|e| match e {
        SolveError::NoCandidates => format!("{e}; widen --candidates"),
        other => other.to_string(),
    })?;
    if let Some(out) = &a.out {
        save_deployment(&res.deployment, out).map_err(|e| e.to_string())?;
    }
    if let Some(path) = &a.report {
        write_file(path, serde_json::to_string_pretty(&res.report).expect("report serializes") + "\n")?;
    }
    println!(
        "{}: {} macro, {} micro, {} evaluations, {:.1} ms",
        cfg.algorithm,
        res.deployment.count(crate::model::StationKind::Macro),
        res.deployment.count(crate::model::StationKind::Micro),
        res.evaluations_used,
        res.wall_time.as_secs_f64() * 1e3
    );
    print!("{}", res.report);
    Ok(verdict(res.report.feasible))
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let dep = load_deployment(&a.deployment).map_err(|e| e.to_string())?;
    let report = check_constraints(&inst, &dep);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{report}");
    }
    Ok(verdict(report.feasible))
}

fn cmd_render(a: RenderArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    let dep = match &a.deployment {
        Some(p) => Some(load_deployment(p).map_err(|e| e.to_string())?),
        None => None,
    };
    let format = a.format.unwrap_or(match a.out.extension().and_then(|e| e.to_str()) {
        Some("svg") => ImageFormat::Svg,
        _ => ImageFormat::Ppm,
    });
    write_file(&a.out, render(&inst, dep.as_ref(), format, a.scale))?;
    Ok(EXIT_OK)
}

fn scripted(preset: &str, rules: Option<&Path>) -> Result<ScriptedProposer, String> {
    match rules {
        Some(path) => ScriptedProposer::from_json(&read_to_string(path)?).map_err(|e| format!("{}: {e}", path.display())),
        None => ScriptedProposer::preset(preset).ok_or_else(|| {
            format!("unknown preset `{preset}` (expected one of {})", ScriptedProposer::PRESETS.join(", "))
        }),
    }
}

fn build_store(kb: &Path, dim: usize) -> Result<VectorStore, String> {
    if dim == 0 {
        return Err("embedding dimension must be positive".into());
    }
    let docs = read_knowledge_base(kb).map_err(|e| e.to_string())?;
    VectorStore::with_documents(Box::new(HashEmbedder::new(dim)), docs).map_err(|e| e.to_string())
}

fn cmd_experiment(a: ExperimentArgs) -> CmdResult {
    let parent = match &a.instance {
        Some(dir) => load(dir)?,
        None => generate_instance(&GeneratorConfig::for_area(a.gen_width, a.gen_height, a.gen_seed))
            .map_err(|e| e.to_string())?,
    };
    let store = a.rag.as_deref().map(|kb| build_store(kb, DEFAULT_DIMENSION)).transpose()?;
    if a.cap == 0 {
        return Err("--cap must be at least 1".into());
    }
    let config = ExperimentConfig {
        regions: a.regions,
        region_width: a.size,
        region_height: a.size,
        seed: a.seed,
        methods: a.methods,
        max_evaluations: a.budget,
        cap: a.cap,
        proposer: scripted(&a.preset, a.rules.as_deref())?,
        top_k: a.topk,
        jobs: a.jobs,
    };
    let report = run_experiment(&parent, &config, store.as_ref()).map_err(|e| e.to_string())?;
    if let Some(out) = &a.out {
        write_file(out, report.to_csv())?;
    }
    print!("{}", report.table());
    for r in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("region {} {}: {}", r.region, r.method, r.error.as_deref().unwrap_or_default());
    }
    Ok(EXIT_OK)
}

fn connect(endpoint: Option<&str>, timeout: Duration) -> Result<Box<dyn Proposer>, String> {
    let endpoint = match endpoint {
        Some(e) => e.to_string(),
        None => std::env::var(PROPOSER_ENDPOINT_ENV)
            .map_err(|_| format!("no --endpoint given and {PROPOSER_ENDPOINT_ENV} is not set"))?,
    };
    Ok(Box::new(ExternalProposer::connect(&endpoint, timeout).map_err(|e| e.to_string())?))
}

fn cmd_agent_run(a: AgentRunArgs) -> CmdResult {
    let inst = load(&a.instance)?;
    if a.cap == 0 {
        return Err("--cap must be at least 1".into());
    }
    let store = a.rag.as_deref().map(|kb| build_store(kb, DEFAULT_DIMENSION)).transpose()?;
    let mut options = AgentOptions::with_cap(a.cap);
    if let Some(store) = &store {
        options = options.with_rag(RagContext::new(store, a.topk));
    }
    let timeout = Duration::from_millis(a.timeout_ms);
    let make = || -> Result<Box<dyn Proposer>, String> {
        match a.proposer {
            ProposerKind::Scripted => Ok(Box::new(scripted(&a.preset, a.rules.as_deref())?)),
            ProposerKind::External => connect(a.endpoint.as_deref(), timeout),
        }
    };
    let result: AgentRunResult = match a.strategy {
        Strategy::Laba => run_laba(&inst, make()?.as_mut(), &options),
        Strategy::Claba => {
            let (mut modeler, mut planner) = (make()?, make()?);
            let predicates = a.min_coverage.map(TestPredicate::MinCoverage).into_iter().collect();
            let roles = ClabaRoles {
                modeler: modeler.as_mut(),
                planner: planner.as_mut(),
                executor: &mut EngineExecutor,
                tester: &mut ConstraintTester::new(predicates),
            };
            run_claba(&inst, roles, &options)
        }
    }
    .map_err(|e| e.to_string())?;
    if let Some(path) = &a.transcript {
        let mut buf = Vec::new();
        result.write_transcript(&mut buf).map_err(|e| e.to_string())?;
        write_file(path, buf)?;
    }
    if let Some(out) = &a.out {
        save_deployment(&result.deployment, out).map_err(|e| e.to_string())?;
    }
    println!(
        "{} after {} iteration(s)",
        if result.success { "success" } else { "failure" },
        result.iterations_used
    );
    print!("{}", result.report);
    Ok(verdict(result.success))
}

fn cmd_rag(c: RagCommand) -> CmdResult {
    match c {
        RagCommand::Index(a) => {
            let store = build_store(&a.kb, a.dim)?;
            store.save(&a.out).map_err(|e| e.to_string())?;
            println!("indexed {} documents into {}", store.len(), a.out.display());
            Ok(EXIT_OK)
        }
        RagCommand::Query(a) => {
            let text = read_to_string(&a.store)?;
            let dim = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v.get("dimension").and_then(serde_json::Value::as_u64))
                .ok_or_else(|| format!("{}: not a store file", a.store.display()))?;
            let store = VectorStore::load(&a.store, Box::new(HashEmbedder::new(dim.max(1) as usize)))
                .map_err(|e| e.to_string())?;
            let hits = store.retrieve(&a.query.join(" "), a.k).map_err(|e| e.to_string())?;
            for (i, h) in hits.iter().enumerate() {
                let first = h.document.text.lines().next().unwrap_or_default();
                println!("{}. [{}] {:.6} {}", i + 1, h.document.id, h.score, first);
            }
            Ok(EXIT_OK)
        }
    }
}

fn cmd_proposer(a: ProposerArgs) -> CmdResult {
    let mut p = scripted(&a.preset, a.rules.as_deref())?;
    let stdin = io::stdin();
    serve_proposer(&mut p, BufReader::new(stdin.lock()), io::stdout().lock()).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Render(a) => cmd_render(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Agent(AgentCommand::Run(a)) => cmd_agent_run(a),
        Command::Rag(c) => cmd_rag(c),
        Command::Proposer(a) => cmd_proposer(a),
    };
    outcome.unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        EXIT_USAGE
    })
}
