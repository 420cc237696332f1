//! Decision layer: task interpretation, goal checking against ground
//! truth, planner queries, and the scripted planner backend.

mod external;
mod wire;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognition::assess_hazards;
use crate::kb::{EntityId, Fact, FactKey, Object, Rule};
use crate::memory::{Episode, WorkingMemory};
use crate::reason::Cell;
use crate::world::{Action, Dir, EntityClass, TaskSpec, World};

pub use external::{ExternalPlanner, PlannerEndpoint};
pub use wire::{parse_plan_response, plan_to_wire, PROTOCOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecideConfig {
    pub replan_limit: u32,
    pub planner_timeout_secs: f64,
}

impl Default for DecideConfig {
    fn default() -> Self {
        Self {
            replan_limit: 5,
            planner_timeout_secs: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerFailure {
    #[error("planner_timeout")]
    Timeout,
    #[error("planner_malformed at {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("planner_error: {0}")]
    Refused(String),
    #[error("planner_unreachable: {0}")]
    Transport(String),
    #[error("planner_unsupported: {0}")]
    Unsupported(String),
}

impl PlannerFailure {
    /// Short machine tag, e.g. `planner_timeout`.
    pub fn tag(&self) -> &'static str {
        match self {
            PlannerFailure::Timeout => "planner_timeout",
            PlannerFailure::Malformed { .. } => "planner_malformed",
            PlannerFailure::Refused(_) => "planner_error",
            PlannerFailure::Transport(_) => "planner_unreachable",
            PlannerFailure::Unsupported(_) => "planner_unsupported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("line {line}: unknown task kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: task {kind} needs parameter {param:?}")]
    MissingParam { line: usize, kind: String, param: &'static str },
    #[error("line {line}: task {kind}: {reason}")]
    BadParam { line: usize, kind: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskKind {
    Arrange,
    FixHazard,
    Navigate,
    Fetch,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Arrange => "arrange",
            TaskKind::FixHazard => "fix_hazard",
            TaskKind::Navigate => "navigate",
            TaskKind::Fetch => "fetch",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        [TaskKind::Arrange, TaskKind::FixHazard, TaskKind::Navigate, TaskKind::Fetch]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Entity(EntityId),
    Cell(Cell),
}

/// One machine-checkable goal condition over world state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalCondition {
    /// Every arranged item is on the surface, one stack per color.
    GroupedByColor { surface: EntityId },
    /// Within each stack on the surface, sizes never grow upwards among
    /// non-fragile items.
    SizesDescending { surface: EntityId },
    /// No non-fragile item sits above a fragile one, and nothing is broken.
    FragileTopmost { surface: EntityId },
    NoLeak { zone: String },
    NoWet { zone: String },
    NoHazard { zone: String },
    AgentAt { target: Target },
    RestsOn { item: EntityId, target: EntityId },
}

impl fmt::Display for GoalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalCondition::GroupedByColor { surface } => write!(f, "grouped_by_color({surface})"),
            GoalCondition::SizesDescending { surface } => write!(f, "sizes_descending({surface})"),
            GoalCondition::FragileTopmost { surface } => write!(f, "fragile_topmost({surface})"),
            GoalCondition::NoLeak { zone } => write!(f, "no_leak({zone})"),
            GoalCondition::NoWet { zone } => write!(f, "no_wet({zone})"),
            GoalCondition::NoHazard { zone } => write!(f, "no_hazard({zone})"),
            GoalCondition::AgentAt { target: Target::Entity(e) } => write!(f, "agent_at({e})"),
            GoalCondition::AgentAt { target: Target::Cell((x, y)) } => write!(f, "agent_at({x}, {y})"),
            GoalCondition::RestsOn { item, target } => write!(f, "rests_on({item}, {target})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstruction {
    pub kind: TaskKind,
    pub agent: EntityId,
    pub params: BTreeMap<String, String>,
    pub goal: Vec<GoalCondition>,
}

pub const SORT_KEYS: &[&str] = &["color", "size"];

impl TaskInstruction {
    /// Sort keys of an arrange task, in priority order.
    pub fn sort_keys(&self) -> Vec<&str> {
        self.params
            .get("sort")
            .map(|s| s.split(',').collect())
            .unwrap_or_default()
    }

    /// Entities the task names, for attention.
    pub fn referenced(&self, world: &World) -> BTreeSet<EntityId> {
        let mut out = BTreeSet::from([self.agent.clone()]);
        let param_id = |k: &str| self.params.get(k).and_then(|v| EntityId::new(v).ok());
        match self.kind {
            TaskKind::Arrange => {
                out.extend(param_id("surface"));
                out.extend(arranged_items(world, &self.sort_keys()));
            }
            TaskKind::FixHazard => {
                if let Some(zone) = self.params.get("zone").and_then(|z| world.region(z)) {
                    out.extend(world.entities().filter(|e| zone.contains(e.position)).map(|e| e.id.clone()));
                }
            }
            TaskKind::Navigate => out.extend(param_id("to")),
            TaskKind::Fetch => {
                out.extend(param_id("item"));
                out.extend(param_id("to"));
            }
        }
        out
    }
}

pub fn interpret_task(spec: &TaskSpec, agent: &EntityId) -> Result<TaskInstruction, TaskError> {
    let kind = TaskKind::parse(&spec.kind).ok_or_else(|| TaskError::UnknownKind {
        line: spec.line,
        kind: spec.kind.clone(),
    })?;
    let missing = |param: &'static str| TaskError::MissingParam {
        line: spec.line,
        kind: spec.kind.clone(),
        param,
    };
    let bad = |reason: String| TaskError::BadParam {
        line: spec.line,
        kind: spec.kind.clone(),
        reason,
    };
    let entity = |param: &'static str| -> Result<EntityId, TaskError> {
        let v = spec.params.get(param).ok_or_else(|| missing(param))?;
        EntityId::new(v).map_err(|e| bad(format!("{param}: {e}")))
    };
    let mut params = spec.params.clone();
    let goal = match kind {
        TaskKind::Arrange => {
            let surface = entity("surface")?;
            let sort = params.entry("sort".into()).or_insert_with(|| "color,size".into()).clone();
            let keys: Vec<&str> = sort.split(',').collect();
            let mut seen = BTreeSet::new();
            for k in &keys {
                if !SORT_KEYS.contains(k) {
                    return Err(bad(format!("unknown sort key {k:?}")));
                }
                if !seen.insert(*k) {
                    return Err(bad(format!("sort key {k:?} repeated")));
                }
            }
            let mut goal = Vec::new();
            if keys.contains(&"color") {
                goal.push(GoalCondition::GroupedByColor { surface: surface.clone() });
            }
            if keys.contains(&"size") {
                goal.push(GoalCondition::SizesDescending { surface: surface.clone() });
            }
            match params.get("constraint").map(String::as_str) {
                None => {}
                Some("fragile_on_top") => goal.push(GoalCondition::FragileTopmost { surface }),
                Some(other) => return Err(bad(format!("unknown constraint {other:?}"))),
            }
            goal
        }
        TaskKind::FixHazard => {
            let zone = spec.params.get("zone").ok_or_else(|| missing("zone"))?.clone();
            vec![
                GoalCondition::NoLeak { zone: zone.clone() },
                GoalCondition::NoWet { zone: zone.clone() },
                GoalCondition::NoHazard { zone },
            ]
        }
        TaskKind::Navigate => {
            let target = match (spec.params.get("to"), spec.params.get("x"), spec.params.get("y")) {
                (Some(_), _, _) => Target::Entity(entity("to")?),
                (None, Some(x), Some(y)) => Target::Cell((
                    x.parse().map_err(|_| bad(format!("x must be an integer, got {x:?}")))?,
                    y.parse().map_err(|_| bad(format!("y must be an integer, got {y:?}")))?,
                )),
                _ => return Err(missing("to")),
            };
            vec![GoalCondition::AgentAt { target }]
        }
        TaskKind::Fetch => vec![GoalCondition::RestsOn {
            item: entity("item")?,
            target: entity("to")?,
        }],
    };
    Ok(TaskInstruction {
        kind,
        agent: agent.clone(),
        params,
        goal,
    })
}

/// Items an arrange task moves: portable entities that carry every sort
/// attribute.
pub fn arranged_items(world: &World, sort_keys: &[&str]) -> Vec<EntityId> {
    world
        .entities()
        .filter(|e| e.class == EntityClass::Item)
        .filter(|e| {
            sort_keys.iter().all(|k| match *k {
                "color" => e.appearance.color.is_some(),
                "size" => e.appearance.size.is_some(),
                _ => true,
            })
        })
        .map(|e| e.id.clone())
        .collect()
}

/// Stacks (bottom first) standing on `surface`.
fn stacks_on(world: &World, surface: &EntityId) -> Vec<Vec<EntityId>> {
    let Some(s) = world.entity(surface) else { return vec![] };
    s.footprint()
        .into_iter()
        .map(|c| world.stack_at(c).to_vec())
        .filter(|stack| !stack.is_empty() && world.support(&stack[0]).as_ref() == Some(surface))
        .collect()
}

/// Evaluate one goal condition against ground truth.
pub fn check_condition(
    world: &World,
    cond: &GoalCondition,
    task: &TaskInstruction,
    hazard_rules: &[Rule],
    near_cells: f64,
) -> bool {
    let attr = |id: &EntityId| world.entity(id).map(|e| e.appearance.clone());
    let fragile = |id: &EntityId| world.entity(id).is_some_and(|e| e.has(crate::perceive::StateFlag::Fragile));
    let in_zone = |zone: &str, pos: Cell| world.region(zone).is_some_and(|r| r.contains(pos));
    match cond {
        GoalCondition::GroupedByColor { surface } => {
            let stacks = stacks_on(world, surface);
            let on_surface: BTreeSet<&EntityId> = stacks.iter().flatten().collect();
            let items = arranged_items(world, &task.sort_keys());
            if !items.iter().all(|i| on_surface.contains(i)) {
                return false;
            }
            let mut colors_seen = BTreeSet::new();
            stacks.iter().all(|stack| {
                let colors: BTreeSet<Option<String>> =
                    stack.iter().map(|i| attr(i).and_then(|a| a.color)).collect();
                colors.len() == 1 && colors_seen.insert(colors.into_iter().next())
            })
        }
        GoalCondition::SizesDescending { surface } => stacks_on(world, surface).iter().all(|stack| {
            let sizes: Vec<i64> = stack
                .iter()
                .filter(|i| !fragile(i))
                .map(|i| attr(i).and_then(|a| a.size).unwrap_or(0))
                .collect();
            sizes.windows(2).all(|w| w[0] >= w[1])
        }) && arranged_items(world, &task.sort_keys()).iter().all(|i| {
            world.entity(i).is_some_and(|e| {
                world.entity(surface).is_some_and(|s| s.covers(e.position)) && world.held() != Some(i)
            })
        }),
        GoalCondition::FragileTopmost { surface } => stacks_on(world, surface).iter().all(|stack| {
            let first_fragile = stack.iter().position(&fragile).unwrap_or(stack.len());
            stack[first_fragile..].iter().all(&fragile)
                && stack
                    .iter()
                    .all(|i| !world.entity(i).is_some_and(|e| e.has(crate::perceive::StateFlag::Broken)))
        }),
        GoalCondition::NoLeak { zone } => !world
            .entities()
            .any(|e| in_zone(zone, e.position) && e.has(crate::perceive::StateFlag::Leaking)),
        GoalCondition::NoWet { zone } => !world
            .entities()
            .any(|e| in_zone(zone, e.position) && e.has(crate::perceive::StateFlag::Wet)),
        GoalCondition::NoHazard { zone } => {
            let graph = world.truth_graph(near_cells);
            let mut u = crate::cognition::UnifiedCognition {
                graph,
                correspondence: BTreeMap::new(),
                contradictions: vec![],
                hazards: vec![],
            };
            let hazards = assess_hazards(&mut u, hazard_rules).unwrap_or_default();
            !hazards.iter().any(|h| {
                world
                    .entity(&h.subject)
                    .is_some_and(|e| in_zone(zone, e.position))
            })
        }
        GoalCondition::AgentAt { target } => {
            let here = world.agent_position();
            match target {
                Target::Cell(c) => here == *c,
                Target::Entity(e) => world.entity(e).is_some_and(|e| e.covers(here) || e.position == here),
            }
        }
        GoalCondition::RestsOn { item, target } => {
            world.held() != Some(item) && world.support(item).as_ref() == Some(target)
        }
    }
}

/// Short record of a past decision cycle for the planner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeSummary {
    pub task: String,
    pub outcome: String,
    pub steps: usize,
    pub start: u64,
    pub end: u64,
}

impl From<&Episode> for EpisodeSummary {
    fn from(e: &Episode) -> Self {
        Self {
            task: e.task_kind.clone(),
            outcome: e.outcome.as_str().to_string(),
            steps: e.plan.len(),
            start: e.start_tick,
            end: e.end_tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerQuery {
    pub version: u32,
    pub task: TaskInstruction,
    pub hazards: Vec<Fact>,
    pub facts: Vec<Fact>,
    pub episodes: Vec<EpisodeSummary>,
}

pub fn formulate_query(
    wm: &WorkingMemory,
    task: &TaskInstruction,
    hazards: &[Fact],
    episodes: &[&Episode],
) -> PlannerQuery {
    let mut hazards = hazards.to_vec();
    hazards.sort_by_key(Fact::key);
    hazards.dedup_by_key(|f| f.key());
    PlannerQuery {
        version: PROTOCOL_VERSION,
        task: task.clone(),
        hazards,
        facts: wm.facts().cloned().collect(),
        episodes: episodes.iter().map(|e| EpisodeSummary::from(*e)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanSource {
    Scripted,
    External,
}

impl PlanSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanSource::Scripted => "scripted",
            PlanSource::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub action: Action,
    pub effects: Vec<FactKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub source: PlanSource,
}

/// Current beliefs about each subject, keeping only facts from the most
/// recent tick at which that subject was seen.
struct Beliefs<'a> {
    facts: Vec<&'a Fact>,
}

impl<'a> Beliefs<'a> {
    fn new(query: &'a PlannerQuery) -> Self {
        let mut latest: BTreeMap<&EntityId, u64> = BTreeMap::new();
        for f in &query.facts {
            let t = latest.entry(&f.subject).or_insert(0);
            *t = (*t).max(f.tick);
        }
        let facts = query
            .facts
            .iter()
            .filter(|f| f.tick == latest[&f.subject])
            .collect();
        Self { facts }
    }

    fn objects(&self, subject: &EntityId, relation: &str) -> impl Iterator<Item = &'a Object> + '_ {
        let subject = subject.clone();
        let relation = relation.to_string();
        self.facts
            .iter()
            .filter(move |f| f.subject == subject && f.relation == relation)
            .map(|f| &f.object)
    }

    fn atom(&self, subject: &EntityId, relation: &str) -> Option<String> {
        self.objects(subject, relation).find_map(|o| o.as_atom().map(|a| a.to_string()))
    }

    fn int(&self, subject: &EntityId, relation: &str) -> Option<i64> {
        self.objects(subject, relation).find_map(Object::as_int)
    }

    fn has(&self, subject: &EntityId, relation: &str, object: &str) -> bool {
        self.objects(subject, relation).any(|o| o.as_atom().is_some_and(|a| a.as_str() == object))
    }

    fn position(&self, e: &EntityId) -> Option<Cell> {
        Some((self.int(e, "pos_x")?, self.int(e, "pos_y")?))
    }

    fn subjects_with(&self, relation: &str, object: &str) -> BTreeSet<EntityId> {
        self.facts
            .iter()
            .filter(|f| f.relation == relation && f.object.as_atom().is_some_and(|a| a.as_str() == object))
            .map(|f| f.subject.clone())
            .collect()
    }

    fn subjects(&self) -> BTreeSet<EntityId> {
        self.facts.iter().map(|f| f.subject.clone()).collect()
    }
}

fn key(s: &EntityId, r: &str, o: Object) -> FactKey {
    FactKey {
        subject: s.clone(),
        relation: r.to_string(),
        object: o,
    }
}

struct PlanBuilder<'a> {
    agent: &'a EntityId,
    at: Cell,
    steps: Vec<PlanStep>,
}

impl PlanBuilder<'_> {
    fn walk_to(&mut self, to: Cell) {
        while self.at != to {
            let dir = if self.at.0 < to.0 {
                Dir::East
            } else if self.at.0 > to.0 {
                Dir::West
            } else if self.at.1 < to.1 {
                Dir::North
            } else {
                Dir::South
            };
            let (dx, dy) = dir.delta();
            self.at = (self.at.0 + dx, self.at.1 + dy);
            self.steps.push(PlanStep {
                action: Action::Move(dir),
                effects: vec![
                    key(self.agent, "pos_x", Object::Int(self.at.0)),
                    key(self.agent, "pos_y", Object::Int(self.at.1)),
                ],
            });
        }
    }

    fn push(&mut self, action: Action, effects: Vec<FactKey>) {
        self.steps.push(PlanStep { action, effects });
    }
}

fn unsupported(reason: impl Into<String>) -> PlannerFailure {
    PlannerFailure::Unsupported(reason.into())
}

/// Deterministic rule-of-thumb planner. A pure function of the query.
pub fn plan_scripted(query: &PlannerQuery) -> Result<Plan, PlannerFailure> {
    let beliefs = Beliefs::new(query);
    let task = &query.task;
    let agent = &task.agent;
    let start = beliefs
        .position(agent)
        .ok_or_else(|| unsupported(format!("agent {agent} has no known position")))?;
    let mut b = PlanBuilder {
        agent,
        at: start,
        steps: Vec::new(),
    };
    let param_id = |k: &str| -> Result<EntityId, PlannerFailure> {
        task.params
            .get(k)
            .and_then(|v| EntityId::new(v).ok())
            .ok_or_else(|| unsupported(format!("missing {k}")))
    };
    let locate = |e: &EntityId| {
        beliefs
            .position(e)
            .ok_or_else(|| unsupported(format!("{e} has no known position")))
    };
    match task.kind {
        TaskKind::Arrange => plan_arrange(query, &beliefs, &mut b, &param_id("surface")?)?,
        TaskKind::FixHazard => {
            let zone = task.params.get("zone").ok_or_else(|| unsupported("missing zone"))?;
            let in_zone: BTreeSet<EntityId> = beliefs.subjects_with("LocatedIn", zone);
            let mut cut: BTreeSet<EntityId> = BTreeSet::new();
            for h in &query.hazards {
                if beliefs.has(&h.subject, "has_state", "powered") {
                    cut.insert(h.subject.clone());
                }
                for p in beliefs.subjects_with("has_state", "powered") {
                    if beliefs.has(&p, "Near", h.subject.as_str()) || beliefs.has(&h.subject, "Near", p.as_str()) {
                        cut.insert(p);
                    }
                }
            }
            for p in cut {
                let effects = vec![key(&p, "not_state", Object::atom("powered").expect("token"))];
                b.push(Action::CutPower(p), effects);
            }
            for leak in beliefs.subjects_with("has_state", "leaking") {
                if in_zone.contains(&leak) {
                    b.walk_to(locate(&leak)?);
                    let effects = vec![key(&leak, "not_state", Object::atom("leaking").expect("token"))];
                    b.push(Action::FixLeak(leak), effects);
                }
            }
            let floors = beliefs.subjects_with("isa", "floor");
            for wet in beliefs.subjects_with("has_state", "wet") {
                if in_zone.contains(&wet) && floors.contains(&wet) {
                    b.walk_to(locate(&wet)?);
                    let effects = vec![key(&wet, "not_state", Object::atom("wet").expect("token"))];
                    b.push(Action::Mop(wet), effects);
                }
            }
        }
        TaskKind::Navigate => {
            let to = match (task.params.get("to"), task.params.get("x"), task.params.get("y")) {
                (Some(_), _, _) => locate(&param_id("to")?)?,
                (None, Some(x), Some(y)) => (
                    x.parse().map_err(|_| unsupported("bad x"))?,
                    y.parse().map_err(|_| unsupported("bad y"))?,
                ),
                _ => return Err(unsupported("navigate needs a target")),
            };
            b.walk_to(to);
        }
        TaskKind::Fetch => {
            let item = param_id("item")?;
            let to = param_id("to")?;
            b.walk_to(locate(&item)?);
            b.push(
                Action::PickUp(item.clone()),
                vec![key(agent, "holding", Object::Atom(item.clone()))],
            );
            b.walk_to(locate(&to)?);
            b.push(
                Action::PlaceOn(item.clone(), to.clone()),
                vec![key(&item, "OnTopOf", Object::Atom(to))],
            );
        }
    }
    Ok(Plan {
        steps: b.steps,
        source: PlanSource::Scripted,
    })
}

/// Cluster by color (lexicographic), then within a color stack by size
/// descending from the bottom, fragile items last.
fn plan_arrange(
    query: &PlannerQuery,
    beliefs: &Beliefs,
    b: &mut PlanBuilder,
    surface: &EntityId,
) -> Result<(), PlannerFailure> {
    let keys = query.task.sort_keys();
    let by_color = keys.contains(&"color");
    let by_size = keys.contains(&"size");
    let anchor = beliefs
        .position(surface)
        .ok_or_else(|| unsupported(format!("surface {surface} has no known position")))?;
    let w = beliefs.int(surface, "extent_x").unwrap_or(1);
    let h = beliefs.int(surface, "extent_y").unwrap_or(1);
    let mut cells: Vec<Cell> = (0..w)
        .flat_map(|dx| (0..h).map(move |dy| (anchor.0 + dx, anchor.1 + dy)))
        .collect();
    cells.sort();

    let items: Vec<EntityId> = beliefs
        .subjects()
        .into_iter()
        .filter(|e| beliefs.has(e, "class", "item"))
        .filter(|e| (!by_color || beliefs.atom(e, "color").is_some()) && (!by_size || beliefs.int(e, "size").is_some()))
        .collect();
    let mut groups: BTreeMap<String, Vec<EntityId>> = BTreeMap::new();
    for item in items {
        let color = if by_color { beliefs.atom(&item, "color").unwrap_or_default() } else { String::new() };
        groups.entry(color).or_default().push(item);
    }
    if groups.len() > cells.len() {
        return Err(unsupported(format!(
            "{} groups but {surface} has only {} cells",
            groups.len(),
            cells.len()
        )));
    }
    for (group, cell) in groups.values_mut().zip(cells) {
        group.sort_by(|a, c| {
            let fa = beliefs.has(a, "has_state", "fragile");
            let fc = beliefs.has(c, "has_state", "fragile");
            let sa = beliefs.int(a, "size").unwrap_or(0);
            let sc = beliefs.int(c, "size").unwrap_or(0);
            fa.cmp(&fc)
                .then(if by_size { sc.cmp(&sa) } else { std::cmp::Ordering::Equal })
                .then_with(|| a.cmp(c))
        });
        let mut base = surface.clone();
        let mut in_place = true;
        for item in group.iter() {
            in_place = in_place
                && beliefs.position(item) == Some(cell)
                && beliefs.has(item, "OnTopOf", base.as_str());
            if !in_place {
                let from = beliefs
                    .position(item)
                    .ok_or_else(|| unsupported(format!("{item} has no known position")))?;
                b.walk_to(from);
                b.push(
                    Action::PickUp(item.clone()),
                    vec![key(b.agent, "holding", Object::Atom(item.clone()))],
                );
                b.walk_to(cell);
                b.push(
                    Action::PlaceOn(item.clone(), base.clone()),
                    vec![key(item, "OnTopOf", Object::Atom(base.clone()))],
                );
            }
            base = item.clone();
        }
    }
    Ok(())
}

/// Where plans come from during a run.
pub enum Planner {
    Scripted,
    External(ExternalPlanner),
}

impl Planner {
    pub fn plan(&mut self, query: &PlannerQuery) -> Result<Plan, PlannerFailure> {
        match self {
            Planner::Scripted => plan_scripted(query),
            Planner::External(p) => p.plan(query),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Planner::Scripted => "scripted".into(),
            Planner::External(p) => p.endpoint().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Origin;

    fn spec(kind: &str, params: &[(&str, &str)]) -> TaskSpec {
        TaskSpec {
            kind: kind.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            line: 1,
        }
    }

    fn robot() -> EntityId {
        EntityId::new("robot").unwrap()
    }

    #[test]
    fn arrange_with_fragile_constraint_has_three_conditions() {
        let t = interpret_task(
            &spec("arrange", &[("surface", "table1"), ("sort", "color,size"), ("constraint", "fragile_on_top")]),
            &robot(),
        )
        .unwrap();
        assert_eq!(t.goal.len(), 3);
    }

    #[test]
    fn fix_hazard_goal_is_zone_scoped() {
        let t = interpret_task(&spec("fix_hazard", &[("zone", "kitchen")]), &robot()).unwrap();
        assert!(t.goal.contains(&GoalCondition::NoHazard { zone: "kitchen".into() }));
    }

    #[test]
    fn unknown_sort_key_and_kind_rejected() {
        let e = interpret_task(&spec("arrange", &[("surface", "table1"), ("sort", "weight")]), &robot()).unwrap_err();
        assert!(e.to_string().contains("weight"));
        assert!(matches!(
            interpret_task(&spec("juggle", &[]), &robot()),
            Err(TaskError::UnknownKind { .. })
        ));
        assert!(matches!(
            interpret_task(&spec("fetch", &[("item", "cup1")]), &robot()),
            Err(TaskError::MissingParam { param: "to", .. })
        ));
    }

    fn fact(s: &str, r: &str, o: &str, tick: u64) -> Fact {
        Fact::triple(s, r, o).at_tick(tick).with_origin(Origin::Perceived)
    }

    fn located(facts: &mut Vec<Fact>, id: &str, x: i64, y: i64) {
        let e = EntityId::new(id).unwrap();
        facts.push(Fact::new(e.clone(), "pos_x", Object::Int(x)).at_tick(1));
        facts.push(Fact::new(e, "pos_y", Object::Int(y)).at_tick(1));
    }

    fn query(task: TaskInstruction, mut facts: Vec<Fact>, hazards: Vec<Fact>) -> PlannerQuery {
        facts.sort_by_key(Fact::key);
        PlannerQuery {
            version: PROTOCOL_VERSION,
            task,
            hazards,
            facts,
            episodes: vec![],
        }
    }

    #[test]
    fn blue_stack_is_big_plate_small_plate_cup() {
        let task = interpret_task(
            &spec("arrange", &[("surface", "table1"), ("constraint", "fragile_on_top")]),
            &robot(),
        )
        .unwrap();
        let mut facts = vec![];
        located(&mut facts, "robot", 0, 0);
        located(&mut facts, "table1", 3, 3);
        for (id, size, fragile, x) in [("cup1", "1", true, 1), ("plate2", "2", false, 2), ("plate3", "3", false, 3)] {
            located(&mut facts, id, x, 0);
            facts.push(fact(id, "class", "item", 1));
            facts.push(fact(id, "color", "blue", 1));
            facts.push(Fact::new(EntityId::new(id).unwrap(), "size", size.parse::<Object>().unwrap()).at_tick(1));
            if fragile {
                facts.push(fact(id, "has_state", "fragile", 1));
            }
        }
        let plan = plan_scripted(&query(task, facts, vec![])).unwrap();
        let placed: Vec<String> = plan
            .steps
            .iter()
            .filter_map(|s| match &s.action {
                Action::PlaceOn(i, _) => Some(i.to_string()),
                _ => None,
            })
            .collect();
        assert_eq!(placed, ["plate3", "plate2", "cup1"]);
        assert!(plan.steps.iter().any(|s| s.action == Action::PlaceOn(
            EntityId::new("plate2").unwrap(),
            EntityId::new("plate3").unwrap()
        )));
    }

    fn leak_facts() -> Vec<Fact> {
        let mut facts = vec![];
        located(&mut facts, "robot", 0, 0);
        located(&mut facts, "pipe1", 2, 2);
        located(&mut facts, "floor2", 3, 2);
        located(&mut facts, "wire1", 4, 2);
        for id in ["pipe1", "floor2", "wire1"] {
            facts.push(fact(id, "LocatedIn", "kitchen", 1));
        }
        facts.push(fact("pipe1", "has_state", "leaking", 1));
        facts.push(fact("floor2", "isa", "floor", 1));
        facts.push(fact("floor2", "has_state", "wet", 1));
        facts.push(fact("floor2", "Near", "wire1", 1));
        facts.push(fact("wire1", "has_state", "powered", 1));
        facts
    }

    #[test]
    fn power_is_cut_before_remediation() {
        let task = interpret_task(&spec("fix_hazard", &[("zone", "kitchen")]), &robot()).unwrap();
        let hazard = fact("wire1", "hazard", "electrocution", 1);
        let plan = plan_scripted(&query(task.clone(), leak_facts(), vec![hazard])).unwrap();
        let names: Vec<&str> = plan.steps.iter().map(|s| s.action.name()).filter(|n| *n != "Move").collect();
        assert_eq!(names, ["CutPower", "FixLeak", "Mop"]);

        let plain = plan_scripted(&query(task, leak_facts(), vec![])).unwrap();
        assert!(plain.steps.iter().all(|s| s.action.name() != "CutPower"));
    }

    #[test]
    fn scripted_plans_are_pure() {
        let task = interpret_task(&spec("fix_hazard", &[("zone", "kitchen")]), &robot()).unwrap();
        let q = query(task, leak_facts(), vec![]);
        assert_eq!(plan_scripted(&q).unwrap(), plan_scripted(&q).unwrap());
    }

    #[test]
    fn empty_memory_query_keeps_task_block() {
        let task = interpret_task(&spec("fetch", &[("item", "cup1"), ("to", "counter1")]), &robot()).unwrap();
        let wm = WorkingMemory::new(4, 0.95);
        let q = formulate_query(&wm, &task, &[], &[]);
        assert!(q.facts.is_empty());
        assert_eq!(q.task, task);
    }
}
