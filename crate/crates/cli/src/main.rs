use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use side_core::agent::{run, PlannerChoice, RunSpec};
use side_core::config;
use side_core::kb::{matching_facts, query, Dimension, EntityId, Fact, Object, Origin, SemanticGraph, Term};
use side_core::reason::{
    apply_dependency_rules, compose_spatial, infer_concepts, temporal_closure, TemporalOrder,
};
use side_core::rules::{parse_atom, RuleSet};
use side_core::trace::replay;

#[derive(Parser)]
#[command(name = "side", version, about = "Run, replay and query the embodied agent")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario to completion and optionally write its trace.
    Run(RunArgs),
    /// Re-run a trace and compare it line by line.
    Replay {
        trace: PathBuf,
    },
    /// Load a knowledge base, saturate it and answer one query.
    Reason {
        #[arg(long)]
        kb: PathBuf,
        /// Rule file; the shipped rules when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Pattern such as `LeftOf(vase, ?x)`.
        query: String,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    scenario: PathBuf,
    /// `scripted`, `cmd:<shell command>` or `tcp:<host:port>`.
    #[arg(long, default_value = "scripted", conflicts_with_all = ["planner_cmd", "planner_tcp"])]
    planner: String,
    /// Shorthand for `--planner cmd:<command>`.
    #[arg(long)]
    planner_cmd: Option<String>,
    /// Shorthand for `--planner tcp:<addr>`.
    #[arg(long)]
    planner_tcp: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_ticks: Option<u64>,
    /// Skip hazard assessment.
    #[arg(long)]
    no_hazard: bool,
    /// Force sensor noise on.
    #[arg(long)]
    noise: bool,
    /// Config file; falls back to $SIDE_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted config override, repeatable: `--set memory.wm_capacity=128`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Replay { trace } => cmd_replay(&trace),
        Cmd::Reason { kb, rules, query } => cmd_reason(&kb, rules.as_deref(), &query),
    };
    ExitCode::from(code as u8)
}

fn cmd_run(args: RunArgs) -> i32 {
    let planner = if let Some(c) = args.planner_cmd {
        PlannerChoice::Command(c)
    } else if let Some(a) = args.planner_tcp {
        PlannerChoice::Tcp(a)
    } else {
        match PlannerChoice::parse(&args.planner) {
            Some(p) => p,
            None => {
                eprintln!("error: unknown planner {:?}", args.planner);
                return 3;
            }
        }
    };
    let mut overrides = Vec::new();
    for kv in &args.set {
        match kv.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                eprintln!("error: --set expects KEY=VALUE, got {kv:?}");
                return 3;
            }
        }
    }
    let spec = RunSpec {
        scenario: args.scenario,
        config: config::resolve_path(args.config),
        seed: args.seed,
        max_ticks: args.max_ticks,
        no_hazard: args.no_hazard,
        noise: args.noise.then_some(true),
        planner,
        overrides,
    };
    let report = match run(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(path) = &args.trace {
        let mut text = report.lines.join("\n");
        text.push('\n');
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: {}: {e}", path.display());
            return 3;
        }
    }
    eprintln!(
        "{}: {} episode(s), goal {}",
        report.status.as_str(),
        report.episodes,
        if report.goal_met { "met" } else { "not met" }
    );
    report.status.exit_code()
}

fn cmd_replay(path: &Path) -> i32 {
    match replay(path) {
        Ok(r) if r.equal() => {
            println!("equal: {} lines", r.lines);
            0
        }
        Ok(r) => {
            let d = r.divergence.expect("unequal report carries a divergence");
            let tick = d.tick.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
            let path = if d.path.is_empty() { "<line>" } else { d.path.as_str() };
            println!("diverged: line {} record {} tick {tick} field {path}", d.line, d.record);
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            3
        }
    }
}

/// One fact per line, either `Rel(s, o)` or the canonical form. `#` starts
/// a comment.
fn load_kb(path: &Path) -> Result<SemanticGraph, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut graph = SemanticGraph::new(Dimension::Unified);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |e: String| format!("{}:{}: {e}", path.display(), i + 1);
        let fact = if line.contains('(') {
            let atom = parse_atom(line).map_err(at)?;
            match (atom.subject, atom.object) {
                (Term::Const(Object::Atom(s)), Term::Const(o)) => Fact::new(s, atom.relation, o),
                _ => return Err(at("facts must be ground".into())),
            }
        } else {
            Fact::parse_canonical(line).map_err(at)?
        };
        graph.insert(fact.with_origin(Origin::Asserted)).map_err(|e| at(e.to_string()))?;
    }
    Ok(graph)
}

fn saturate(mut graph: SemanticGraph, rules: &RuleSet) -> Result<SemanticGraph, String> {
    // dependency and concept rules can feed composition and back, so loop
    loop {
        let mut derived = apply_dependency_rules(&graph, &rules.dependency);
        derived.extend(infer_concepts(&graph, &rules.concept));
        derived.extend(compose_spatial(&graph, &rules.composition));
        let order = TemporalOrder::from_pairs(
            graph
                .with_relation("before")
                .filter_map(|f| f.object.as_atom().map(|o| (f.subject.to_string(), o.to_string()))),
        );
        let closed = temporal_closure(&order).map_err(|e| e.to_string())?;
        for (a, b) in closed.pairs() {
            if !order.contains(a, b) {
                let a = EntityId::new(a).map_err(|e| e.to_string())?;
                let b = Object::atom(b).map_err(|e| e.to_string())?;
                derived.push(Fact::new(a, "before", b).with_origin(Origin::Derived));
            }
        }
        let mut changed = false;
        for f in derived {
            changed |= graph.insert(f).map_err(|e| e.to_string())?;
        }
        if !changed {
            return Ok(graph);
        }
    }
}

fn cmd_reason(kb: &Path, rules: Option<&Path>, pattern: &str) -> i32 {
    let result = (|| -> Result<Vec<String>, String> {
        let graph = load_kb(kb)?;
        let rules = match rules {
            Some(p) => RuleSet::load(p).map_err(|e| format!("{}: {e}", p.display()))?,
            None => RuleSet::shipped(),
        };
        let atom = parse_atom(pattern).map_err(|e| format!("query: {e}"))?;
        let graph = saturate(graph, &rules)?;
        let vars = atom.variables();
        if vars.is_empty() {
            return Ok(if matching_facts(&graph, &atom).is_empty() {
                vec![]
            } else {
                vec!["true".into()]
            });
        }
        Ok(query(&graph, &atom)
            .iter()
            .map(|b| {
                vars.iter()
                    .map(|v| format!("?{v} = {}", b[*v]))
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .collect())
    })();
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            3
        }
    }
}
