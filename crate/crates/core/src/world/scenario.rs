//! Scenario files.
//!
//! ```text
//! scenario arrange
//! version 1
//! grid 10 6
//! region kitchen 0 0 4 5
//! agent robot at 0 0
//! entity table1 at 2 3 category=table extent=4x1
//! entity plate1 at 1 1 category=plate class=item color=blue size=3 flags=fragile,hot
//! fact contains cup1 liq1
//! event 4 set cup1 knocked_over
//! event 2..5 move walker east
//! task arrange surface=table1 sort=color,size constraint=fragile_on_top
//! rules default
//! config memory.wm_capacity 128
//! sensor noise on
//! seed 7
//! ticks 200
//! ```
//!
//! Entity keys: `category` (required), `class` (`fixture` default, `item`,
//! `mobile`), `material`, `shape`, `color`, `size`, `extent`, `flags`.
//! Event changes: `set E FLAG`, `clear E FLAG`, `teleport E X Y`,
//! `move E DIR`, `remove E`. Relative `rules` paths resolve against the
//! scenario's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Dir, EntityClass, Region, ScriptedChange, ScriptedEvent, World, WorldEntity};
use crate::kb::{is_relation_name, EntityId, Fact, Object, Origin};
use crate::perceive::{Appearance, StateFlag};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RulesRef {
    Default,
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub kind: String,
    pub params: BTreeMap<String, String>,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub world: World,
    pub tasks: Vec<TaskSpec>,
    pub facts: Vec<Fact>,
    pub rules: Vec<RulesRef>,
    /// `(dotted key, value)` overrides on top of the run configuration.
    pub config: Vec<(String, String)>,
    pub noise: Option<bool>,
    pub occlusion: Option<bool>,
    pub radius: Option<f64>,
    pub seed: u64,
    pub max_ticks: Option<u64>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}

fn parse_i64(s: &str, what: &str) -> Result<i64, String> {
    s.parse().map_err(|_| format!("{what} must be an integer, got {s:?}"))
}

fn parse_id(s: &str) -> Result<EntityId, String> {
    EntityId::new(s).map_err(|e| e.to_string())
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(format!("expected on/off, got {other:?}")),
    }
}

fn parse_ticks(s: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("bad tick range {s:?}");
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.parse().map_err(|_| bad())?;
            let b: u64 = b.parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.parse().map_err(|_| bad())?]),
    }
}

struct Pending {
    agent: Option<WorldEntity>,
    entities: Vec<(usize, WorldEntity)>,
}

pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario, ScenarioError> {
    let mut name = String::from("unnamed");
    let mut grid: Option<(i64, i64)> = None;
    let mut regions: Vec<(usize, Region)> = Vec::new();
    let mut pending = Pending {
        agent: None,
        entities: Vec::new(),
    };
    let mut events: Vec<(usize, ScriptedEvent)> = Vec::new();
    let mut tasks = Vec::new();
    let mut facts = Vec::new();
    let mut rules = Vec::new();
    let mut config = Vec::new();
    let (mut noise, mut occlusion, mut radius) = (None, None, None);
    let mut seed = 0u64;
    let mut max_ticks = None;
    let mut order = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |reason: String| ScenarioError::Parse { line: line_no, reason };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let arity = |n: usize| {
            if words.len() == n {
                Ok(())
            } else {
                Err(err(format!("`{}` expects {} fields", words[0], n - 1)))
            }
        };
        match words[0] {
            "scenario" => {
                arity(2)?;
                name = words[1].to_string();
            }
            "version" => {
                arity(2)?;
                if words[1] != SCENARIO_FORMAT_VERSION.to_string() {
                    return Err(err(format!("unsupported scenario version {}", words[1])));
                }
            }
            "grid" => {
                arity(3)?;
                let w = parse_i64(words[1], "grid width").map_err(err)?;
                let h = parse_i64(words[2], "grid height").map_err(err)?;
                if w <= 0 || h <= 0 {
                    return Err(err("grid dimensions must be positive".into()));
                }
                grid = Some((w, h));
            }
            "region" => {
                arity(6)?;
                let n: Vec<i64> = words[2..]
                    .iter()
                    .map(|s| parse_i64(s, "region corner"))
                    .collect::<Result<_, _>>()
                    .map_err(err)?;
                parse_id(words[1]).map_err(err)?;
                regions.push((
                    line_no,
                    Region {
                        id: words[1].to_string(),
                        min: (n[0].min(n[2]), n[1].min(n[3])),
                        max: (n[0].max(n[2]), n[1].max(n[3])),
                    },
                ));
            }
            "agent" | "entity" => {
                if words.len() < 5 || words[2] != "at" {
                    return Err(err(format!("expected `{} ID at X Y ...`", words[0])));
                }
                let id = parse_id(words[1]).map_err(err)?;
                let x = parse_i64(words[3], "x").map_err(err)?;
                let y = parse_i64(words[4], "y").map_err(err)?;
                let mut e = WorldEntity {
                    id,
                    class: EntityClass::Fixture,
                    appearance: Appearance::default(),
                    flags: BTreeSet::new(),
                    position: (x, y),
                    extent: (1, 1),
                    order,
                };
                order += 1;
                let mut has_category = false;
                for kv in &words[5..] {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected key=value, got {kv:?}")))?;
                    match k {
                        "category" => {
                            e.appearance.category = v.to_string();
                            has_category = true;
                        }
                        "class" => e.class = v.parse().map_err(err)?,
                        "material" => e.appearance.material = Some(v.to_string()),
                        "shape" => e.appearance.shape = Some(v.to_string()),
                        "color" => e.appearance.color = Some(v.to_string()),
                        "size" => e.appearance.size = Some(parse_i64(v, "size").map_err(err)?),
                        "extent" => {
                            let (a, b) = v
                                .split_once('x')
                                .ok_or_else(|| err(format!("extent must be WxH, got {v:?}")))?;
                            let a = parse_i64(a, "extent").map_err(err)?;
                            let b = parse_i64(b, "extent").map_err(err)?;
                            if a < 1 || b < 1 {
                                return Err(err("extent must be at least 1x1".into()));
                            }
                            e.extent = (a, b);
                        }
                        "flags" => {
                            for f in v.split(',').filter(|f| !f.is_empty()) {
                                e.flags.insert(f.parse::<StateFlag>().map_err(err)?);
                            }
                        }
                        other => return Err(err(format!("unknown attribute {other:?}"))),
                    }
                }
                for value in [&e.appearance.material, &e.appearance.shape, &e.appearance.color]
                    .into_iter()
                    .flatten()
                {
                    parse_id(value).map_err(|r| err(format!("attribute value: {r}")))?;
                }
                if words[0] == "agent" {
                    if pending.agent.is_some() {
                        return Err(err("only one agent is allowed".into()));
                    }
                    e.class = EntityClass::Mobile;
                    if !has_category {
                        e.appearance.category = "agent".into();
                    }
                    pending.agent = Some(e);
                } else {
                    if !has_category {
                        return Err(err(format!("entity {} needs a category", e.id)));
                    }
                    parse_id(&e.appearance.category).map_err(|r| err(format!("category: {r}")))?;
                    if e.class != EntityClass::Fixture && e.extent != (1, 1) {
                        return Err(err("only fixtures may have an extent".into()));
                    }
                    pending.entities.push((line_no, e));
                }
            }
            "fact" => {
                arity(4)?;
                if !is_relation_name(words[1]) {
                    return Err(err(format!("bad relation {:?}", words[1])));
                }
                let s = parse_id(words[2]).map_err(err)?;
                let o: Object = words[3].parse().map_err(|e: crate::kb::KbError| err(e.to_string()))?;
                facts.push(Fact::new(s, words[1], o).with_origin(Origin::Asserted));
            }
            "event" => {
                if words.len() < 4 {
                    return Err(err("expected `event TICK CHANGE ...`".into()));
                }
                let ticks = parse_ticks(words[1]).map_err(err)?;
                let id = parse_id(words[3]).map_err(err)?;
                let change = match (words[2], words.len()) {
                    ("set", 5) => ScriptedChange::Set(id, words[4].parse().map_err(err)?),
                    ("clear", 5) => ScriptedChange::Clear(id, words[4].parse().map_err(err)?),
                    ("teleport", 6) => ScriptedChange::Teleport(
                        id,
                        (
                            parse_i64(words[4], "x").map_err(err)?,
                            parse_i64(words[5], "y").map_err(err)?,
                        ),
                    ),
                    ("move", 5) => ScriptedChange::Move(id, words[4].parse::<Dir>().map_err(err)?),
                    ("remove", 4) => ScriptedChange::Remove(id),
                    (other, _) => return Err(err(format!("bad event change {other:?}"))),
                };
                for tick in ticks {
                    if tick == 0 {
                        return Err(err("scripted events start at tick 1".into()));
                    }
                    events.push((
                        line_no,
                        ScriptedEvent {
                            tick,
                            change: change.clone(),
                        },
                    ));
                }
            }
            "task" => {
                if words.len() < 2 {
                    return Err(err("expected `task KIND key=value ...`".into()));
                }
                let mut params = BTreeMap::new();
                for kv in &words[2..] {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected key=value, got {kv:?}")))?;
                    params.insert(k.to_string(), v.to_string());
                }
                tasks.push(TaskSpec {
                    kind: words[1].to_string(),
                    params,
                    line: line_no,
                });
            }
            "rules" => {
                arity(2)?;
                rules.push(if words[1] == "default" {
                    RulesRef::Default
                } else {
                    RulesRef::Path(base.join(words[1]))
                });
            }
            "config" => {
                arity(3)?;
                config.push((words[1].to_string(), words[2].to_string()));
            }
            "sensor" => {
                arity(3)?;
                match words[1] {
                    "noise" => noise = Some(parse_on_off(words[2]).map_err(err)?),
                    "occlusion" => occlusion = Some(parse_on_off(words[2]).map_err(err)?),
                    "radius" => {
                        radius = Some(
                            words[2]
                                .parse::<f64>()
                                .ok()
                                .filter(|r| *r > 0.0)
                                .ok_or_else(|| err("radius must be a positive number".into()))?,
                        )
                    }
                    other => return Err(err(format!("unknown sensor setting {other:?}"))),
                }
            }
            "seed" => {
                arity(2)?;
                seed = words[1].parse().map_err(|_| err("seed must be a non-negative integer".into()))?;
            }
            "ticks" => {
                arity(2)?;
                max_ticks = Some(words[1].parse().map_err(|_| err("ticks must be a non-negative integer".into()))?);
            }
            other => return Err(err(format!("unknown directive {other:?}"))),
        }
    }

    let (width, height) = grid.ok_or_else(|| ScenarioError::Invalid("scenario needs a `grid` line".into()))?;
    let agent = pending
        .agent
        .ok_or_else(|| ScenarioError::Invalid("scenario needs an `agent` line".into()))?;
    if !(0..width).contains(&agent.position.0) || !(0..height).contains(&agent.position.1) {
        return Err(ScenarioError::Invalid(format!(
            "agent {} at ({}, {}) is outside the {width}x{height} grid",
            agent.id, agent.position.0, agent.position.1
        )));
    }
    let mut world = World::new(width, height, agent);
    for (line, r) in regions {
        if world.region(&r.id).is_some() {
            return Err(ScenarioError::Parse {
                line,
                reason: format!("duplicate region {}", r.id),
            });
        }
        world.regions.push(r);
    }
    for (line, e) in pending.entities {
        world.add_entity(e).map_err(|reason| ScenarioError::Parse { line, reason })?;
    }
    for (line, ev) in events {
        if world.entity(ev.change.entity()).is_none() {
            return Err(ScenarioError::Parse {
                line,
                reason: format!("event references unknown entity {}", ev.change.entity()),
            });
        }
        world.push_script(ev);
    }
    if rules.is_empty() {
        rules.push(RulesRef::Default);
    }
    world.reseed(seed);
    Ok(Scenario {
        name,
        world,
        tasks,
        facts,
        rules,
        config,
        noise,
        occlusion,
        radius,
        seed,
        max_ticks,
    })
}
