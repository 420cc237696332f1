//! The agent loop. Every tick runs perception, reasoning, cognition and
//! metacognition over a fresh observation; decision cycles sit on top and
//! spend one tick per executed plan step.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::canon::digest;
use crate::cognition::{aggregate, assess_hazards, detect_contradictions, CognitionError};
use crate::config::{ConfigError, RunConfig};
use crate::decide::{
    check_condition, formulate_query, interpret_task, ExternalPlanner, Plan, Planner,
    PlannerEndpoint, PlannerFailure, TaskError, TaskInstruction,
};
use crate::kb::{Dimension, EntityId, Fact, FactKey, Object, Origin, SemanticGraph};
use crate::memory::{Episode, LongTermMemory, Outcome, WmItem, WorkingMemory};
use crate::metacog::{monitor, regulate, Anomaly, Directive, EventPrediction, PositionPrediction, TickState};
use crate::perceive::{
    attend_and_bind, extract_conceptual, extract_spatial, extract_temporal, percept_graphs, AffordanceLexicon,
    AttentionWeights, Observation, PerceiveError, SalienceContext,
};
use crate::reason::{
    apply_dependency_rules, compose_spatial, detect_collision, infer_concepts, predict_trajectory, temporal_closure,
    Cell, EventSequenceModel, ReasonError, TemporalOrder,
};
use crate::rules::RuleSet;
use crate::trace;
use crate::world::{load_scenario, Action, ActionResult, RulesRef, Scenario, ScenarioError, World};

/// Relations with one current value per subject; a new value replaces the
/// old one in working memory.
const FUNCTIONAL: &[&str] = &["pos_x", "pos_y", "LocatedIn", "OnTopOf", "holding"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlannerChoice {
    Scripted,
    Command(String),
    Tcp(String),
}

impl fmt::Display for PlannerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerChoice::Scripted => f.write_str("scripted"),
            PlannerChoice::Command(c) => write!(f, "cmd:{c}"),
            PlannerChoice::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

impl PlannerChoice {
    pub fn parse(s: &str) -> Option<PlannerChoice> {
        if s == "scripted" {
            Some(PlannerChoice::Scripted)
        } else if let Some(c) = s.strip_prefix("cmd:") {
            Some(PlannerChoice::Command(c.to_string()))
        } else {
            s.strip_prefix("tcp:").map(|a| PlannerChoice::Tcp(a.to_string()))
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub scenario: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_ticks: Option<u64>,
    pub no_hazard: bool,
    pub noise: Option<bool>,
    pub planner: PlannerChoice,
    /// Dotted-key config overrides applied last.
    pub overrides: Vec<(String, String)>,
}

impl RunSpec {
    pub fn new(scenario: impl Into<PathBuf>) -> Self {
        Self {
            scenario: scenario.into(),
            config: None,
            seed: None,
            max_ticks: None,
            no_hazard: false,
            noise: None,
            planner: PlannerChoice::Scripted,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("rules {path}: {reason}")]
    Rules { path: String, reason: String },
    #[error("{path}: {source}")]
    Task {
        path: String,
        #[source]
        source: TaskError,
    },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("perception failed at tick {tick}: {source}")]
    Perceive { tick: u64, source: PerceiveError },
    #[error("cognition failed at tick {tick}: {source}")]
    Cognition { tick: u64, source: CognitionError },
}

/// A scenario with its configuration fully resolved.
pub struct Setup {
    pub spec: RunSpec,
    pub scenario: Scenario,
    pub config: RunConfig,
    pub rules: RuleSet,
    pub tasks: Vec<TaskInstruction>,
    pub seed: u64,
}

/// Resolve scenario, rules and configuration. Precedence, lowest first:
/// defaults, config file, scenario `config`/`sensor`/`ticks` lines, flags.
pub fn prepare(spec: &RunSpec) -> Result<Setup, SetupError> {
    let scenario = load_scenario(&spec.scenario)?;
    let mut config = match &spec.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in &scenario.config {
        config.set(k, v)?;
    }
    if let Some(n) = scenario.noise {
        config.sensor.noise = n;
    }
    if let Some(o) = scenario.occlusion {
        config.sensor.occlusion = o;
    }
    if scenario.radius.is_some() {
        config.sensor.radius = scenario.radius;
    }
    if let Some(t) = scenario.max_ticks {
        config.run.max_ticks = t;
    }
    for (k, v) in &spec.overrides {
        config.set(k, v)?;
    }
    if let Some(n) = spec.noise {
        config.sensor.noise = n;
    }
    if let Some(t) = spec.max_ticks {
        config.run.max_ticks = t;
    }

    let base = spec.scenario.parent().unwrap_or(Path::new("."));
    let mut rules = RuleSet::default();
    if scenario.rules.is_empty() {
        rules = RuleSet::shipped();
    }
    for r in &scenario.rules {
        match r {
            RulesRef::Default => rules.absorb(RuleSet::shipped()),
            RulesRef::Path(p) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                let set = RuleSet::load(&path).map_err(|e| SetupError::Rules {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
                rules.absorb(set);
            }
        }
    }

    let agent = scenario.world.agent().clone();
    let tasks = scenario
        .tasks
        .iter()
        .map(|t| interpret_task(t, &agent))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| SetupError::Task {
            path: spec.scenario.display().to_string(),
            source,
        })?;
    let seed = spec.seed.unwrap_or(scenario.seed);
    Ok(Setup {
        spec: spec.clone(),
        scenario,
        config,
        rules,
        tasks,
        seed,
    })
}

/// How a planner failure is kept in the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureNote {
    pub tag: String,
    pub detail: String,
}

impl From<&PlannerFailure> for FailureNote {
    fn from(f: &PlannerFailure) -> Self {
        Self {
            tag: f.tag().to_string(),
            detail: f.to_string(),
        }
    }
}

pub type PlanOutcome = Result<Plan, FailureNote>;

/// Source of plans: a live planner, or plans read back from a trace.
pub enum PlanProvider {
    Live(Planner),
    Recorded(VecDeque<PlanOutcome>),
}

impl PlanProvider {
    /// Live provider for a planner choice.
    pub fn live(choice: &PlannerChoice, cfg: &RunConfig) -> Self {
        let timeout = Duration::from_secs_f64(cfg.decide.planner_timeout_secs);
        PlanProvider::Live(match choice {
            PlannerChoice::Scripted => Planner::Scripted,
            PlannerChoice::Command(c) => {
                Planner::External(ExternalPlanner::new(PlannerEndpoint::Command(c.clone()), timeout))
            }
            PlannerChoice::Tcp(a) => Planner::External(ExternalPlanner::new(PlannerEndpoint::Tcp(a.clone()), timeout)),
        })
    }

    fn next(&mut self, query: &crate::decide::PlannerQuery) -> PlanOutcome {
        match self {
            PlanProvider::Live(p) => p.plan(query).map_err(|f| FailureNote::from(&f)),
            PlanProvider::Recorded(q) => q.pop_front().unwrap_or_else(|| {
                Err(FailureNote {
                    tag: "planner_unreachable".into(),
                    detail: "trace holds no further plans".into(),
                })
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    Aborted,
    MaxTicks,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Success => "success",
            RunStatus::Aborted => "aborted",
            RunStatus::MaxTicks => "max_ticks",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Aborted | RunStatus::MaxTicks => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub lines: Vec<String>,
    pub status: RunStatus,
    pub episodes: usize,
    pub goal_met: bool,
}

struct StepInfo {
    index: usize,
    result: ActionResult,
}

struct TickCtx<'a> {
    task: Option<(usize, u32)>,
    focus: &'a BTreeSet<EntityId>,
    step: Option<StepInfo>,
}

#[derive(Default)]
struct TickOutcome {
    replan: bool,
    anomalies: Vec<Anomaly>,
}

pub struct Engine {
    world: World,
    cfg: RunConfig,
    rules: RuleSet,
    lexicon: AffordanceLexicon,
    asserted: Vec<Fact>,
    tasks: Vec<TaskInstruction>,
    no_hazard: bool,
    weights: AttentionWeights,
    window: VecDeque<Observation>,
    wm: WorkingMemory,
    ltm: LongTermMemory,
    histories: BTreeMap<EntityId, Vec<String>>,
    model: EventSequenceModel,
    pending: Vec<EventPrediction>,
    positions: BTreeMap<EntityId, Vec<(u64, Cell)>>,
    prediction_scale: f64,
    last_hazards: Vec<Fact>,
    lines: Vec<String>,
}

impl Engine {
    pub fn new(setup: &Setup) -> Self {
        let mut world = setup.scenario.world.clone();
        world.reseed(setup.seed);
        let cfg = setup.config;
        let lines = vec![trace::header(setup).render()];
        Self {
            world,
            cfg,
            rules: setup.rules.clone(),
            lexicon: AffordanceLexicon::shipped(),
            asserted: setup.scenario.facts.clone(),
            tasks: setup.tasks.clone(),
            no_hazard: setup.spec.no_hazard,
            weights: cfg.perceive.weights,
            window: VecDeque::new(),
            wm: WorkingMemory::with_config(&cfg.memory),
            ltm: LongTermMemory::new(),
            histories: BTreeMap::new(),
            model: EventSequenceModel::new(cfg.reason.sequence_order),
            pending: Vec::new(),
            positions: BTreeMap::new(),
            prediction_scale: 1.0,
            last_hazards: Vec::new(),
            lines,
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn working_memory(&self) -> &WorkingMemory {
        &self.wm
    }

    pub fn long_term_memory(&self) -> &LongTermMemory {
        &self.ltm
    }

    pub fn weights(&self) -> AttentionWeights {
        self.weights
    }

    /// Run every task to completion, abort or the tick budget. Scenarios
    /// without tasks are watched with `Wait` until the budget runs out.
    pub fn run(mut self, plans: &mut PlanProvider) -> Result<RunReport, EngineError> {
        let agent_only = BTreeSet::from([self.world.agent().clone()]);
        // the first plan is made from tick 0, so attend to what it needs
        let mut initial = agent_only.clone();
        if let Some(first) = self.tasks.first() {
            initial.extend(first.referenced(&self.world));
        }
        self.run_tick(TickCtx {
            task: None,
            focus: &initial,
            step: None,
        })?;
        let max_ticks = self.cfg.run.max_ticks;
        let mut status = RunStatus::Success;
        let mut episodes = 0;

        if self.tasks.is_empty() {
            while self.world.tick() < max_ticks {
                let result = self.world.step(&Action::Wait);
                self.run_tick(TickCtx {
                    task: None,
                    focus: &agent_only,
                    step: Some(StepInfo { index: 0, result }),
                })?;
            }
        }

        let tasks = self.tasks.clone();
        'tasks: for (ti, task) in tasks.iter().enumerate() {
            let focus = task.referenced(&self.world);
            let mut cycle: u32 = 0;
            loop {
                cycle += 1;
                let start = self.world.tick();
                let recent: Vec<&Episode> = self.ltm.retrieve_episodes(task.kind.as_str(), self.cfg.memory.episode_k);
                let query = formulate_query(&self.wm, task, &self.last_hazards, &recent);
                let outcome = plans.next(&query);
                self.lines.push(trace::plan_record(start, ti, cycle, &digest(&query.to_wire()), &outcome).render());

                let mut plan_text = Vec::new();
                let mut results = Vec::new();
                let mut anomalies = Vec::new();
                let mut halted = false;
                let mut cut = false;
                match &outcome {
                    Err(note) => {
                        anomalies.push(note.tag.clone());
                        halted = true;
                    }
                    Ok(plan) => {
                        plan_text = plan.steps.iter().map(|s| s.action.to_string()).collect();
                        for (i, step) in plan.steps.iter().enumerate() {
                            if self.world.tick() >= max_ticks {
                                cut = true;
                                break;
                            }
                            let result = self.world.step(&step.action);
                            results.push(match &result.reason {
                                None => "ok".to_string(),
                                Some(r) => format!("failed: {r}"),
                            });
                            let out = self.run_tick(TickCtx {
                                task: Some((ti, cycle)),
                                focus: &focus,
                                step: Some(StepInfo { index: i, result }),
                            })?;
                            anomalies.extend(out.anomalies.iter().map(|a| a.kind.as_str().to_string()));
                            if out.replan {
                                halted = true;
                                break;
                            }
                        }
                    }
                }
                let met = !halted && !cut && self.goal_met(task);
                let outcome = if met {
                    Outcome::Success
                } else if cut || cycle >= self.cfg.decide.replan_limit {
                    Outcome::Aborted
                } else {
                    Outcome::Failure
                };
                let episode = Episode {
                    task_kind: task.kind.as_str().to_string(),
                    instruction: describe_task(task),
                    plan: plan_text,
                    results,
                    anomalies,
                    outcome,
                    start_tick: start,
                    end_tick: self.world.tick(),
                };
                self.lines.push(trace::episode_record(ti, cycle, &episode).render());
                self.ltm
                    .consolidate(&self.wm, episode, self.cfg.memory.consolidation_threshold);
                episodes += 1;
                match outcome {
                    Outcome::Success => break,
                    Outcome::Aborted => {
                        status = if cut { RunStatus::MaxTicks } else { RunStatus::Aborted };
                        break 'tasks;
                    }
                    Outcome::Failure => {
                        // drop perceptions the last tick did not confirm
                        let now = self.world.tick();
                        self.wm
                            .retain(|item| item.fact.origin != Origin::Perceived || item.last_touched == now);
                    }
                }
            }
        }

        let goals: Vec<trace::GoalCheck> = self
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t, self.conditions(t)))
            .collect();
        let goal_met = goals.iter().all(|(_, _, c)| c.iter().all(|(_, ok)| *ok));
        let summary = trace::summary_record(&goals, episodes, status, self.world.tick());
        self.lines.push(summary.render());
        Ok(RunReport {
            lines: self.lines,
            status,
            episodes,
            goal_met,
        })
    }

    fn conditions(&self, task: &TaskInstruction) -> Vec<(String, bool)> {
        task.goal
            .iter()
            .map(|c| {
                (
                    c.to_string(),
                    check_condition(&self.world, c, task, &self.rules.hazard, self.cfg.perceive.near_cells),
                )
            })
            .collect()
    }

    fn goal_met(&self, task: &TaskInstruction) -> bool {
        self.conditions(task).iter().all(|(_, ok)| *ok)
    }

    fn run_tick(&mut self, ctx: TickCtx) -> Result<TickOutcome, EngineError> {
        let tick = self.world.tick();
        let perceive_err = |source| EngineError::Perceive { tick, source };
        let cognition_err = |source| EngineError::Cognition { tick, source };
        let near = self.cfg.perceive.near_cells;

        // perception
        let obs = self.world.observe(&self.cfg.sensor);
        let obs_digest = digest(&obs.canonical());
        self.window.push_back(obs.clone());
        while self.window.len() > self.cfg.perceive.window {
            self.window.pop_front();
        }
        let window: Vec<Observation> = self.window.iter().cloned().collect();
        let ft = extract_temporal(&window).map_err(perceive_err)?;
        let agent = self.world.agent().clone();
        let fs = extract_spatial(&obs, &agent).map_err(perceive_err)?;
        let fc = extract_conceptual(&obs, &self.lexicon);
        let salience = SalienceContext {
            agent: Some(agent.clone()),
            task_entities: ctx.focus.clone(),
            threshold: self.cfg.perceive.threshold,
        };
        let bound = attend_and_bind(&ft, &fs, &fc, &self.weights, &salience).map_err(perceive_err)?;
        let scores: BTreeMap<&EntityId, f64> = bound.iter().map(|b| (&b.entity, b.score)).collect();
        let below: BTreeSet<&EntityId> = bound.iter().filter(|b| b.below_threshold).map(|b| &b.entity).collect();

        let (t, s, c) = percept_graphs(tick, &ft, &fs, &fc, &obs, near);
        let mut graphs = [
            SemanticGraph::new(Dimension::Temporal),
            SemanticGraph::new(Dimension::Spatial),
            SemanticGraph::new(Dimension::Conceptual),
        ];
        for (slot, g) in [&t, &s, &c].into_iter().enumerate() {
            for f in g.facts().filter(|f| !below.contains(&f.subject)) {
                let _ = graphs[slot].insert(f.clone());
            }
        }
        for f in &self.asserted {
            let slot = match Dimension::of_relation(&f.relation) {
                Dimension::Temporal => 0,
                Dimension::Spatial => 1,
                _ => 2,
            };
            let _ = graphs[slot].insert(f.clone().at_tick(tick));
        }

        // cognition and reasoning
        let [gt, gs, gc] = &graphs;
        let mut u = aggregate(gt, gs, gc, &self.rules.integration, &self.rules.exclusions).map_err(cognition_err)?;
        let mut derived = apply_dependency_rules(&u.graph, &self.rules.dependency);
        derived.extend(infer_concepts(&u.graph, &self.rules.concept));
        derived.extend(compose_spatial(&u.graph, &self.rules.composition));
        for f in derived {
            let _ = u.graph.insert(f.with_origin(Origin::Derived));
        }
        let order = TemporalOrder::from_pairs(
            u.graph
                .with_relation("before")
                .filter_map(|f| f.object.as_atom().map(|o| (f.subject.to_string(), o.to_string()))),
        );
        let mut temporal_cycle = None;
        match temporal_closure(&order) {
            Ok(closed) => {
                for (a, b) in closed.pairs() {
                    if order.contains(a, b) {
                        continue;
                    }
                    if let (Ok(a), Ok(b)) = (EntityId::new(a), Object::atom(b)) {
                        let _ = u.graph.insert(Fact::new(a, "before", b).at_tick(tick).with_origin(Origin::Derived));
                    }
                }
            }
            Err(ReasonError::TemporalCycle { cycle }) => temporal_cycle = Some(cycle),
            Err(_) => {}
        }

        // predictions made last tick are checked against this one
        let event_predictions = std::mem::take(&mut self.pending);
        let mut observed_events: BTreeMap<EntityId, Vec<String>> = BTreeMap::new();
        for ev in ft.events.iter().filter(|e| e.start == tick && tick > 0) {
            observed_events.entry(ev.entity.clone()).or_default().push(ev.kind.clone());
        }
        let k1 = self.model.order() + 1;
        for (e, kinds) in &observed_events {
            let h = self.histories.entry(e.clone()).or_default();
            for kind in kinds {
                h.push(kind.clone());
                if h.len() >= k1 {
                    self.model.train(&h[h.len() - k1..]);
                }
            }
        }

        let bounds = self.world.bounds();
        let mut position_predictions = Vec::new();
        let mut observed_positions = BTreeMap::new();
        for (id, r) in obs.readings.iter().filter(|(_, r)| !r.occluded) {
            let Some(h) = self.positions.get(id) else { continue };
            if h.last().map(|(t, _)| t + 1) != Some(tick) {
                continue;
            }
            if let Ok(tr) = predict_trajectory(id.clone(), h, 1, bounds) {
                if let Some(cell) = tr.at(tick) {
                    position_predictions.push(PositionPrediction {
                        entity: id.clone(),
                        cell,
                        low_confidence: tr.low_confidence,
                    });
                    observed_positions.insert(id.clone(), r.position);
                }
            }
        }
        for (id, r) in obs.readings.iter().filter(|(_, r)| !r.occluded) {
            let h = self.positions.entry(id.clone()).or_default();
            if h.last().map(|(t, _)| t + 1) != Some(tick) {
                h.clear();
            }
            h.push((tick, r.position));
            if h.len() > 2 {
                h.remove(0);
            }
        }

        // collision risk between the agent and every other mobile entity
        let mut risks: Vec<(EntityId, u64)> = Vec::new();
        let horizon = self.cfg.reason.horizon;
        let trajectory = |id: &EntityId| {
            let h = self.positions.get(id)?;
            let mut tr = predict_trajectory(id.clone(), h, horizon, bounds).ok()?;
            let &(t0, p0) = h.last()?;
            tr.positions.insert(t0, p0);
            Some(tr)
        };
        if let Some(mine) = trajectory(&agent) {
            for (id, slice) in &fc.entities {
                if *id == agent || slice.class.as_deref() != Some("mobile") {
                    continue;
                }
                let Some(theirs) = trajectory(id) else { continue };
                let Ok(report) = detect_collision(&mine, &theirs, self.cfg.reason.collision_eps) else {
                    continue;
                };
                if !report.risks.is_empty() {
                    let _ = u.graph.insert(
                        Fact::new(agent.clone(), "collision_risk", Object::Atom(id.clone()))
                            .at_tick(tick)
                            .with_origin(Origin::Derived),
                    );
                }
                risks.extend(report.risks.iter().map(|(t, _)| (id.clone(), *t)));
            }
        }

        let hazards = if self.no_hazard {
            Vec::new()
        } else {
            assess_hazards(&mut u, &self.rules.hazard).map_err(cognition_err)?
        };
        u.contradictions = detect_contradictions(&u.graph, &self.rules.exclusions);
        self.last_hazards = hazards.clone();

        // working memory
        let inferences: Vec<String> = u
            .graph
            .facts()
            .filter(|f| f.origin == Origin::Derived && self.wm.get(&f.key()).is_none())
            .map(|f| f.key().to_string())
            .collect();
        for f in u.graph.facts() {
            if FUNCTIONAL.contains(&f.relation.as_str()) {
                let stale: Vec<FactKey> = self
                    .wm
                    .items()
                    .filter(|i| i.fact.subject == f.subject && i.fact.relation == f.relation && i.fact.object != f.object)
                    .map(|i| i.fact.key())
                    .collect();
                for k in stale {
                    self.wm.remove(&k);
                }
            }
            let salience = if f.relation == "hazard" {
                1.0
            } else {
                scores.get(&f.subject).copied().unwrap_or(0.5)
            };
            self.wm.insert(WmItem::new(f.clone(), salience.clamp(0.0, 1.0), tick), tick);
        }

        // metacognition
        let goal_fact_ages = self
            .wm
            .items()
            .filter(|i| ctx.focus.contains(&i.fact.subject))
            .map(|i| (i.fact.key(), tick.saturating_sub(i.last_touched)))
            .collect();
        let action_failure = ctx
            .step
            .as_ref()
            .and_then(|s| s.result.reason.as_ref().map(|r| format!("{}: {r}", s.result.action)));
        let state = TickState {
            tick,
            event_predictions,
            observed_events,
            position_predictions,
            observed_positions,
            contradictions: u.contradictions.clone(),
            action_failure,
            temporal_cycle,
            goal_fact_ages,
        };
        let anomalies = monitor(&state, &self.cfg.metacog);
        let (directives, weights) = regulate(&anomalies, &self.weights, &self.cfg.metacog);
        self.weights = weights;
        let mut replan = false;
        let mut decayed = false;
        for d in &directives {
            match &d.directive {
                Directive::TriggerReplan => replan = true,
                Directive::DecayPredictionConfidence { factor } => {
                    self.prediction_scale *= factor;
                    decayed = true;
                }
                Directive::RetrieveFromLtm { pattern } => {
                    for f in self.ltm.retrieve(pattern, self.cfg.memory.retrieve_k) {
                        let f = f.with_origin(Origin::Retrieved);
                        self.wm.insert(WmItem::new(f, 0.5, tick), tick);
                    }
                }
                Directive::ReweightAttention { .. } => {}
            }
        }
        if !decayed {
            self.prediction_scale = (self.prediction_scale / self.cfg.metacog.decay_factor).min(1.0);
        }

        // next-event predictions for the coming tick
        for (e, h) in &self.histories {
            if h.len() < self.model.order() {
                continue;
            }
            let Ok(dist) = self.model.predict_next(h) else { continue };
            if dist.uninformed {
                continue;
            }
            if let Some((kind, p)) = dist.top() {
                self.pending.push(EventPrediction {
                    entity: e.clone(),
                    kind: kind.to_string(),
                    probability: p * self.prediction_scale,
                });
            }
        }

        let record = trace::TickRecord {
            tick,
            task: ctx.task,
            obs: obs_digest,
            bound: &bound,
            inferences,
            hazards: hazards.iter().map(|h| h.key().to_string()).collect(),
            risks,
            anomalies: &anomalies,
            directives: &directives,
            weights: self.weights,
            step: ctx.step.as_ref().map(|s| (s.index, &s.result)),
            wm: self.wm.len(),
        };
        self.lines.push(record.to_json().render());
        Ok(TickOutcome { replan, anomalies })
    }
}

fn describe_task(task: &TaskInstruction) -> String {
    let params: Vec<String> = task.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{} {}", task.kind.as_str(), params.join(" "))
}

/// Resolve and run in one go.
pub fn run(spec: &RunSpec) -> Result<RunReport, RunError> {
    let setup = prepare(spec)?;
    let mut plans = PlanProvider::live(&spec.planner, &setup.config);
    Ok(Engine::new(&setup).run(&mut plans)?)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        3
    }
}
