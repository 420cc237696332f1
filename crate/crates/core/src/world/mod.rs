//! Deterministic tick-based household gridworld.
//!
//! Entities come in three classes: fixtures (tables, floors, pipes) with a
//! rectangular footprint, portable items that live in per-cell stacks on
//! top of fixtures, and mobile entities (the agent, people, vehicles) that
//! move freely and never stack. North is `+y`.

pub mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kb::{EntityId, Fact, Object, Origin, SemanticGraph, Dimension};
use crate::perceive::{Appearance, Observation, Reading, StateFlag};
use crate::reason::{cell_distance, Cell, GridBounds};

pub use scenario::{load_scenario, parse_scenario, RulesRef, Scenario, ScenarioError, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityClass {
    Fixture,
    Item,
    Mobile,
}

impl EntityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityClass::Fixture => "fixture",
            EntityClass::Item => "item",
            EntityClass::Mobile => "mobile",
        }
    }
}

impl FromStr for EntityClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixture" => Ok(EntityClass::Fixture),
            "item" => Ok(EntityClass::Item),
            "mobile" => Ok(EntityClass::Mobile),
            other => Err(format!("unknown entity class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub id: String,
    pub min: Cell,
    pub max: Cell,
}

impl Region {
    pub fn contains(&self, (x, y): Cell) -> bool {
        (self.min.0..=self.max.0).contains(&x) && (self.min.1..=self.max.1).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldEntity {
    pub id: EntityId,
    pub class: EntityClass,
    pub appearance: Appearance,
    pub flags: BTreeSet<StateFlag>,
    pub position: Cell,
    pub extent: (i64, i64),
    /// Declaration order; later fixtures sit on top of earlier ones.
    pub order: usize,
}

impl WorldEntity {
    pub fn covers(&self, (x, y): Cell) -> bool {
        (self.position.0..self.position.0 + self.extent.0).contains(&x)
            && (self.position.1..self.position.1 + self.extent.1).contains(&y)
    }

    pub fn footprint(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for x in self.position.0..self.position.0 + self.extent.0 {
            for y in self.position.1..self.position.1 + self.extent.1 {
                cells.push((x, y));
            }
        }
        cells
    }

    pub fn has(&self, flag: StateFlag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    North,
    East,
    South,
    West,
}

impl Dir {
    pub fn delta(self) -> (i64, i64) {
        match self {
            Dir::North => (0, 1),
            Dir::East => (1, 0),
            Dir::South => (0, -1),
            Dir::West => (-1, 0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dir::North => "north",
            Dir::East => "east",
            Dir::South => "south",
            Dir::West => "west",
        }
    }
}

impl FromStr for Dir {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "north" | "n" => Ok(Dir::North),
            "east" | "e" => Ok(Dir::East),
            "south" | "s" => Ok(Dir::South),
            "west" | "w" => Ok(Dir::West),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Move(Dir),
    PickUp(EntityId),
    PlaceOn(EntityId, EntityId),
    CutPower(EntityId),
    Mop(EntityId),
    FixLeak(EntityId),
    Wait,
}

/// Action names with their argument roles.
pub const ACTION_CATALOG: &[(&str, &[&str])] = &[
    ("Move", &["dir"]),
    ("PickUp", &["entity"]),
    ("PlaceOn", &["entity", "target"]),
    ("CutPower", &["entity"]),
    ("Mop", &["entity"]),
    ("FixLeak", &["entity"]),
    ("Wait", &[]),
];

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Move(_) => "Move",
            Action::PickUp(_) => "PickUp",
            Action::PlaceOn(..) => "PlaceOn",
            Action::CutPower(_) => "CutPower",
            Action::Mop(_) => "Mop",
            Action::FixLeak(_) => "FixLeak",
            Action::Wait => "Wait",
        }
    }

    pub fn args(&self) -> Vec<String> {
        match self {
            Action::Move(d) => vec![d.as_str().to_string()],
            Action::PickUp(e) | Action::CutPower(e) | Action::Mop(e) | Action::FixLeak(e) => {
                vec![e.to_string()]
            }
            Action::PlaceOn(e, t) => vec![e.to_string(), t.to_string()],
            Action::Wait => vec![],
        }
    }

    /// Build from a catalog name and string arguments, checking arity and
    /// argument syntax.
    pub fn from_parts(name: &str, args: &[String]) -> Result<Action, String> {
        let (_, roles) = ACTION_CATALOG
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| format!("unknown action {name:?}"))?;
        if args.len() != roles.len() {
            return Err(format!("{name} takes {} arguments, got {}", roles.len(), args.len()));
        }
        let ent = |i: usize| EntityId::new(&args[i]).map_err(|e| format!("{name} argument {i}: {e}"));
        Ok(match name {
            "Move" => Action::Move(args[0].parse()?),
            "PickUp" => Action::PickUp(ent(0)?),
            "PlaceOn" => Action::PlaceOn(ent(0)?, ent(1)?),
            "CutPower" => Action::CutPower(ent(0)?),
            "Mop" => Action::Mop(ent(0)?),
            "FixLeak" => Action::FixLeak(ent(0)?),
            _ => Action::Wait,
        })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.args().join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedChange {
    Set(EntityId, StateFlag),
    Clear(EntityId, StateFlag),
    Teleport(EntityId, Cell),
    Move(EntityId, Dir),
    Remove(EntityId),
}

impl ScriptedChange {
    pub fn entity(&self) -> &EntityId {
        match self {
            ScriptedChange::Set(e, _)
            | ScriptedChange::Clear(e, _)
            | ScriptedChange::Teleport(e, _)
            | ScriptedChange::Move(e, _)
            | ScriptedChange::Remove(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedEvent {
    pub tick: u64,
    pub change: ScriptedChange,
}

/// Something that happened in the world during one step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WorldEvent {
    pub tick: u64,
    pub entity: EntityId,
    pub kind: String,
}

impl fmt::Display for WorldEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.tick, self.entity, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionResult {
    pub action: Action,
    pub ok: bool,
    pub reason: Option<String>,
    /// Proprioceptive signal raised when a placement crushes something.
    pub instability: bool,
    pub events: Vec<WorldEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Sensing radius in cells around the agent; whole grid when unset.
    pub radius: Option<f64>,
    pub noise: bool,
    pub occlusion: bool,
}

#[derive(Debug, Clone)]
pub struct World {
    pub width: i64,
    pub height: i64,
    pub regions: Vec<Region>,
    entities: BTreeMap<EntityId, WorldEntity>,
    /// Portable items per cell, bottom first.
    stacks: BTreeMap<Cell, Vec<EntityId>>,
    agent: EntityId,
    held: Option<EntityId>,
    tick: u64,
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
    script: Vec<ScriptedEvent>,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_state() == other.canonical_state()
    }
}

impl World {
    pub fn new(width: i64, height: i64, agent: WorldEntity) -> Self {
        let agent_id = agent.id.clone();
        let mut entities = BTreeMap::new();
        entities.insert(agent_id.clone(), agent);
        Self {
            width,
            height,
            regions: Vec::new(),
            entities,
            stacks: BTreeMap::new(),
            agent: agent_id,
            held: None,
            tick: 0,
            seed: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            draws: 0,
            script: Vec::new(),
        }
    }

    pub fn bounds(&self) -> GridBounds {
        GridBounds {
            width: self.width,
            height: self.height,
        }
    }

    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.draws = 0;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agent(&self) -> &EntityId {
        &self.agent
    }

    pub fn agent_position(&self) -> Cell {
        self.entities[&self.agent].position
    }

    pub fn held(&self) -> Option<&EntityId> {
        self.held.as_ref()
    }

    pub fn entity(&self, id: &EntityId) -> Option<&WorldEntity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &WorldEntity> {
        self.entities.values()
    }

    pub fn stacks(&self) -> &BTreeMap<Cell, Vec<EntityId>> {
        &self.stacks
    }

    pub fn stack_at(&self, cell: Cell) -> &[EntityId] {
        self.stacks.get(&cell).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn script(&self) -> &[ScriptedEvent] {
        &self.script
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn region_of(&self, cell: Cell) -> Option<&Region> {
        self.regions.iter().find(|r| r.contains(cell))
    }

    /// Add a non-agent entity. Items are pushed onto the stack of their
    /// cell in insertion order.
    pub fn add_entity(&mut self, entity: WorldEntity) -> Result<(), String> {
        if self.entities.contains_key(&entity.id) {
            return Err(format!("duplicate entity id {}", entity.id));
        }
        let far = (entity.position.0 + entity.extent.0 - 1, entity.position.1 + entity.extent.1 - 1);
        if !self.bounds().contains(entity.position) || !self.bounds().contains(far) {
            return Err(format!(
                "entity {} at ({}, {}) is outside the {}x{} grid",
                entity.id, entity.position.0, entity.position.1, self.width, self.height
            ));
        }
        if entity.class == EntityClass::Item {
            self.stacks.entry(entity.position).or_default().push(entity.id.clone());
        }
        self.entities.insert(entity.id.clone(), entity);
        Ok(())
    }

    pub fn push_script(&mut self, event: ScriptedEvent) {
        self.script.push(event);
    }

    /// Topmost fixture covering `cell`, skipping `except`.
    fn base_fixture(&self, cell: Cell, except: Option<&EntityId>) -> Option<&WorldEntity> {
        self.entities
            .values()
            .filter(|e| e.class == EntityClass::Fixture && e.covers(cell) && Some(&e.id) != except)
            .max_by_key(|e| e.order)
    }

    /// What `id` rests on: the item below it in its stack, or the fixture
    /// under the bottom of the stack.
    pub fn support(&self, id: &EntityId) -> Option<EntityId> {
        let e = self.entities.get(id)?;
        if e.class != EntityClass::Item || self.held.as_ref() == Some(id) {
            return None;
        }
        let stack = self.stack_at(e.position);
        let idx = stack.iter().position(|s| s == id)?;
        if idx > 0 {
            Some(stack[idx - 1].clone())
        } else {
            self.base_fixture(e.position, None).map(|f| f.id.clone())
        }
    }

    fn is_stack_top(&self, id: &EntityId) -> bool {
        let Some(e) = self.entities.get(id) else { return false };
        self.stack_at(e.position).last() == Some(id)
    }

    fn detach(&mut self, id: &EntityId) {
        if self.held.as_ref() == Some(id) {
            self.held = None;
        }
        for stack in self.stacks.values_mut() {
            stack.retain(|s| s != id);
        }
        self.stacks.retain(|_, s| !s.is_empty());
    }

    fn relocate(&mut self, id: &EntityId, to: Cell) {
        let class = self.entities[id].class;
        if class == EntityClass::Item {
            self.detach(id);
            self.stacks.entry(to).or_default().push(id.clone());
        }
        if let Some(e) = self.entities.get_mut(id) {
            e.position = to;
        }
        if *id == self.agent {
            if let Some(h) = self.held.clone() {
                if let Some(e) = self.entities.get_mut(&h) {
                    e.position = to;
                }
            }
        }
    }

    /// Wet ground within reach of the agent that is close to something
    /// powered.
    fn shock_risk(&self) -> Option<EntityId> {
        let here = self.agent_position();
        self.entities
            .values()
            .filter(|w| w.has(StateFlag::Wet) && cell_distance(w.position, here) <= 1.0)
            .find_map(|w| {
                self.entities
                    .values()
                    .find(|p| p.has(StateFlag::Powered) && cell_distance(p.position, w.position) < 1.5)
                    .map(|p| p.id.clone())
            })
    }

    fn require(&self, id: &EntityId) -> Result<&WorldEntity, String> {
        self.entities.get(id).ok_or_else(|| format!("{id} is missing"))
    }

    fn in_reach(&self, cell: Cell) -> bool {
        cell_distance(self.agent_position(), cell) <= 1.0
    }

    fn apply(&mut self, action: &Action) -> Result<(bool, Vec<(EntityId, String)>), String> {
        match action {
            Action::Wait => Ok((false, vec![])),
            Action::Move(dir) => {
                let (dx, dy) = dir.delta();
                let (x, y) = self.agent_position();
                let to = (x + dx, y + dy);
                if !self.bounds().contains(to) {
                    return Err(format!("cannot move {} off the grid", dir.as_str()));
                }
                let agent = self.agent.clone();
                self.relocate(&agent, to);
                Ok((false, vec![]))
            }
            Action::PickUp(id) => {
                let e = self.require(id)?;
                if e.class != EntityClass::Item {
                    return Err(format!("{id} is not portable"));
                }
                if self.held.is_some() {
                    return Err("hands are full".into());
                }
                if !self.in_reach(e.position) {
                    return Err(format!("{id} is out of reach"));
                }
                if !self.is_stack_top(id) {
                    return Err(format!("{id} is under another item"));
                }
                self.detach(id);
                let here = self.agent_position();
                self.entities.get_mut(id).expect("checked").position = here;
                self.held = Some(id.clone());
                Ok((false, vec![(id.clone(), "picked_up".into())]))
            }
            Action::PlaceOn(id, target) => {
                if self.held.as_ref() != Some(id) {
                    return Err(format!("not holding {id}"));
                }
                let t = self.require(target)?;
                let dest = match t.class {
                    EntityClass::Mobile => return Err(format!("cannot place onto {target}")),
                    EntityClass::Item => {
                        if self.held.as_ref() == Some(target) || !self.is_stack_top(target) {
                            return Err(format!("{target} is not a free stack top"));
                        }
                        t.position
                    }
                    EntityClass::Fixture => {
                        let here = self.agent_position();
                        let cell = t
                            .footprint()
                            .into_iter()
                            .min_by(|a, b| cell_distance(*a, here).total_cmp(&cell_distance(*b, here)).then(a.cmp(b)))
                            .expect("non-empty footprint");
                        if !self.stack_at(cell).is_empty() {
                            return Err(format!("{target} is occupied at ({}, {})", cell.0, cell.1));
                        }
                        if self.base_fixture(cell, None).map(|f| &f.id) != Some(target) {
                            return Err(format!("{target} is covered at ({}, {})", cell.0, cell.1));
                        }
                        cell
                    }
                };
                if !self.in_reach(dest) {
                    return Err(format!("{target} is out of reach"));
                }
                let mut events = vec![(id.clone(), "placed".to_string())];
                let mut instability = false;
                let below = self.stack_at(dest).last().cloned();
                if let Some(below) = below {
                    let placed_fragile = self.entities[id].has(StateFlag::Fragile);
                    let b = self.entities.get_mut(&below).expect("stacked entity exists");
                    if b.has(StateFlag::Fragile) && !placed_fragile {
                        b.flags.insert(StateFlag::Broken);
                        instability = true;
                        events.push((below, "crushed".into()));
                    }
                }
                self.held = None;
                self.stacks.entry(dest).or_default().push(id.clone());
                self.entities.get_mut(id).expect("held exists").position = dest;
                Ok((instability, events))
            }
            Action::CutPower(id) => {
                let e = self.require(id)?;
                if !e.has(StateFlag::Powered) {
                    return Err(format!("{id} is not powered"));
                }
                self.entities.get_mut(id).expect("checked").flags.remove(&StateFlag::Powered);
                Ok((false, vec![]))
            }
            Action::Mop(id) => {
                let cell = self.require(id)?.position;
                if !self.in_reach(cell) {
                    return Err(format!("{id} is out of reach"));
                }
                if let Some(p) = self.shock_risk() {
                    return Err(format!("electrocution risk from {p}"));
                }
                for e in self.entities.values_mut() {
                    if e.class != EntityClass::Mobile && e.covers(cell) {
                        e.flags.remove(&StateFlag::Wet);
                    }
                }
                Ok((false, vec![]))
            }
            Action::FixLeak(id) => {
                let e = self.require(id)?;
                if !self.in_reach(e.position) {
                    return Err(format!("{id} is out of reach"));
                }
                if !e.has(StateFlag::Leaking) {
                    return Err(format!("{id} is not leaking"));
                }
                if let Some(p) = self.shock_risk() {
                    return Err(format!("electrocution risk from {p}"));
                }
                self.entities.get_mut(id).expect("checked").flags.remove(&StateFlag::Leaking);
                Ok((false, vec![]))
            }
        }
    }

    fn apply_scripted(&mut self, change: &ScriptedChange, events: &mut Vec<(EntityId, String)>) {
        let id = change.entity().clone();
        if !self.entities.contains_key(&id) {
            return;
        }
        match change {
            ScriptedChange::Set(_, flag) => {
                self.entities.get_mut(&id).expect("checked").flags.insert(*flag);
            }
            ScriptedChange::Clear(_, flag) => {
                self.entities.get_mut(&id).expect("checked").flags.remove(flag);
            }
            ScriptedChange::Teleport(_, to) => {
                if self.bounds().contains(*to) {
                    self.relocate(&id, *to);
                    events.push((id, "teleported".into()));
                }
            }
            ScriptedChange::Move(_, dir) => {
                let (x, y) = self.entities[&id].position;
                let (dx, dy) = dir.delta();
                if self.bounds().contains((x + dx, y + dy)) {
                    self.relocate(&id, (x + dx, y + dy));
                }
            }
            ScriptedChange::Remove(_) => {
                if id != self.agent {
                    self.detach(&id);
                    self.entities.remove(&id);
                    events.push((id, "removed".into()));
                }
            }
        }
    }

    /// Leaking entities wet every floor within one cell.
    fn leak_physics(&mut self) {
        let leaks: Vec<Cell> = self
            .entities
            .values()
            .filter(|e| e.has(StateFlag::Leaking))
            .map(|e| e.position)
            .collect();
        for e in self.entities.values_mut() {
            if e.appearance.category == "floor" && leaks.iter().any(|l| cell_distance(*l, e.position) <= 1.0) {
                e.flags.insert(StateFlag::Wet);
            }
        }
    }

    /// Execute one action, advance the tick, then apply scripted events,
    /// leak physics and motion flags. Failed actions leave the world as it
    /// was apart from the tick and scripted effects.
    pub fn step(&mut self, action: &Action) -> ActionResult {
        let before: BTreeMap<EntityId, (Cell, BTreeSet<StateFlag>)> = self
            .entities
            .iter()
            .map(|(id, e)| (id.clone(), (e.position, e.flags.clone())))
            .collect();
        let snapshot = (self.entities.clone(), self.stacks.clone(), self.held.clone());
        let outcome = self.apply(action);
        if outcome.is_err() {
            (self.entities, self.stacks, self.held) = snapshot;
        }
        self.tick += 1;
        let tick = self.tick;
        let (ok, reason, instability, mut raw) = match outcome {
            Ok((instability, events)) => (true, None, instability, events),
            Err(reason) => (false, Some(reason), false, vec![]),
        };
        let due: Vec<ScriptedChange> = self
            .script
            .iter()
            .filter(|e| e.tick == tick)
            .map(|e| e.change.clone())
            .collect();
        for change in &due {
            self.apply_scripted(change, &mut raw);
        }
        self.leak_physics();
        for (id, e) in self.entities.iter_mut() {
            let moved = before.get(id).is_some_and(|(pos, _)| *pos != e.position);
            if moved {
                e.flags.insert(StateFlag::Moving);
            } else {
                e.flags.remove(&StateFlag::Moving);
            }
        }
        for (id, (_, old)) in &before {
            let Some(e) = self.entities.get(id) else { continue };
            for f in e.flags.difference(old) {
                raw.push((id.clone(), format!("{}_on", f.as_str())));
            }
            for f in old.difference(&e.flags) {
                raw.push((id.clone(), format!("{}_off", f.as_str())));
            }
        }
        let events = raw
            .into_iter()
            .map(|(entity, kind)| WorldEvent { tick, entity, kind })
            .collect();
        ActionResult {
            action: action.clone(),
            ok,
            reason,
            instability,
            events,
        }
    }

    fn reading(&self, e: &WorldEntity, occluded: bool, position: Cell) -> Reading {
        let region = self.region_of(position).map(|r| r.id.clone());
        if occluded {
            return Reading::occluded_at(position, region);
        }
        let mut appearance = e.appearance.clone();
        appearance.class = Some(e.class.as_str().to_string());
        Reading {
            position,
            extent: e.extent,
            region,
            appearance: Some(appearance),
            flags: e.flags.clone(),
            support: self.support(&e.id),
            held_by: (self.held.as_ref() == Some(&e.id)).then(|| self.agent.clone()),
            occluded: false,
        }
    }

    /// Sense the world from the agent's point of view.
    pub fn observe(&mut self, sensor: &SensorConfig) -> Observation {
        let here = self.agent_position();
        let mut readings = BTreeMap::new();
        let ids: Vec<EntityId> = self.entities.keys().cloned().collect();
        for id in ids {
            let e = &self.entities[&id];
            let is_agent = id == self.agent;
            if let Some(r) = sensor.radius {
                if !is_agent && cell_distance(e.position, here) > r {
                    continue;
                }
            }
            let occluded = sensor.occlusion
                && e.class == EntityClass::Item
                && self.held.as_ref() != Some(&id)
                && !self.is_stack_top(&id);
            let mut position = e.position;
            if sensor.noise && !is_agent {
                let dx = self.rng.gen_range(-1..=1);
                let dy = self.rng.gen_range(-1..=1);
                self.draws += 2;
                position = self.bounds().clamp((position.0 + dx, position.1 + dy));
            }
            let e = &self.entities[&id];
            readings.insert(id.clone(), self.reading(e, occluded, position));
        }
        Observation {
            tick: self.tick,
            readings,
        }
    }

    /// Noise-free, occlusion-free reading of every entity.
    pub fn ground_truth(&self) -> Observation {
        let readings = self
            .entities
            .values()
            .map(|e| (e.id.clone(), self.reading(e, false, e.position)))
            .collect();
        Observation {
            tick: self.tick,
            readings,
        }
    }

    /// Ground-truth facts for goal checks: attributes, flags, positions,
    /// regions, supports, `Near` below `near_cells`, and `active(e, kind)`
    /// for every flag currently set.
    pub fn truth_graph(&self, near_cells: f64) -> SemanticGraph {
        let mut g = SemanticGraph::new(Dimension::Unified);
        let tick = self.tick;
        let mut put = |s: &EntityId, r: &str, o: Object| {
            let _ = g.insert(Fact::new(s.clone(), r, o).at_tick(tick).with_origin(Origin::Perceived));
        };
        let atom = |s: &str| Object::atom(s).ok();
        for e in self.entities.values() {
            put(&e.id, "pos_x", Object::Int(e.position.0));
            put(&e.id, "pos_y", Object::Int(e.position.1));
            if let Some(r) = self.region_of(e.position).and_then(|r| atom(&r.id)) {
                put(&e.id, "LocatedIn", r);
            }
            if let Some(c) = atom(&e.appearance.category) {
                put(&e.id, "isa", c);
            }
            if let Some(c) = e.appearance.color.as_deref().and_then(atom) {
                put(&e.id, "color", c);
            }
            if let Some(s) = e.appearance.size {
                put(&e.id, "size", Object::Int(s));
            }
            for f in &e.flags {
                if *f != StateFlag::Moving {
                    put(&e.id, "has_state", atom(f.as_str()).expect("flag names are tokens"));
                }
                put(&e.id, "active", atom(f.event_kind()).expect("flag names are tokens"));
            }
            if let Some(s) = self.support(&e.id) {
                put(&e.id, "OnTopOf", Object::Atom(s));
            }
        }
        let all: Vec<&WorldEntity> = self.entities.values().collect();
        for a in &all {
            for b in &all {
                if a.id != b.id && cell_distance(a.position, b.position) < near_cells {
                    put(&a.id, "Near", Object::Atom(b.id.clone()));
                }
            }
        }
        if let Some(h) = &self.held {
            put(&self.agent, "holding", Object::Atom(h.clone()));
        }
        g
    }

    /// Stable text rendering of the full state, for determinism checks.
    pub fn canonical_state(&self) -> String {
        let mut out = format!(
            "tick {} seed {} draws {} grid {}x{}\n",
            self.tick, self.seed, self.draws, self.width, self.height
        );
        for e in self.entities.values() {
            let flags: Vec<&str> = e.flags.iter().map(|f| f.as_str()).collect();
            out.push_str(&format!(
                "{} {} {} {} {}x{} [{}]\n",
                e.id,
                e.class.as_str(),
                e.position.0,
                e.position.1,
                e.extent.0,
                e.extent.1,
                flags.join(",")
            ));
        }
        for (cell, stack) in &self.stacks {
            let ids: Vec<&str> = stack.iter().map(EntityId::as_str).collect();
            out.push_str(&format!("stack {} {}: {}\n", cell.0, cell.1, ids.join(" ")));
        }
        out.push_str(&format!(
            "held {}\n",
            self.held.as_ref().map(EntityId::as_str).unwrap_or("-")
        ));
        out
    }

    /// Every item is in exactly one stack at its own position, or held.
    pub fn stacks_well_formed(&self) -> bool {
        let mut seen = BTreeSet::new();
        for (cell, stack) in &self.stacks {
            if stack.is_empty() {
                return false;
            }
            for id in stack {
                let Some(e) = self.entities.get(id) else { return false };
                if e.class != EntityClass::Item || e.position != *cell || !seen.insert(id.clone()) {
                    return false;
                }
            }
        }
        let items = self.entities.values().filter(|e| e.class == EntityClass::Item).count();
        let held = usize::from(self.held.is_some());
        if let Some(h) = &self.held {
            if seen.contains(h) || self.entities.get(h).map(|e| e.position) != Some(self.agent_position()) {
                return false;
            }
        }
        seen.len() + held == items
    }
}
