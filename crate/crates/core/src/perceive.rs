//! Semantic perception: three independent feature pathways over simulated
//! observations, then attention-weighted binding into one record per
//! entity.
//!
//! Attention is a fixed salience table rather than a learned mechanism:
//! each present dimension contributes `weight_d * salience_d`, and the
//! per-kind saliences are
//!
//! | cue                                   | salience |
//! |---------------------------------------|----------|
//! | task-referenced entity                | 1.0      |
//! | moving entity                         | 1.0      |
//! | state-flagged (hot / wet / powered)   | 0.9      |
//! | within 2 cells of the agent           | 0.8      |
//! | anything else                         | 0.3      |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Dimension, EntityId, Fact, Object, Origin, SemanticGraph};
use crate::reason::{cell_distance, Cell};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceiveError {
    #[error("observation window is empty")]
    EmptyWindow,
    #[error("observation ticks {0} and {1} are not consecutive")]
    NonConsecutive(u64, u64),
    #[error("agent {0} is not in the observation")]
    AgentMissing(EntityId),
    #[error("agent {0} is occluded and cannot self-localize")]
    AgentOccluded(EntityId),
    #[error("attention weights must be non-negative and sum to 1 (got {0:?})")]
    InvalidWeights([f64; 3]),
    #[error("lexicon line {line}: {reason}")]
    Lexicon { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateFlag {
    Hot,
    Fragile,
    Powered,
    Wet,
    Moving,
    Broken,
    KnockedOver,
    Tilted,
    Leaking,
}

impl StateFlag {
    pub const ALL: [StateFlag; 9] = [
        StateFlag::Hot,
        StateFlag::Fragile,
        StateFlag::Powered,
        StateFlag::Wet,
        StateFlag::Moving,
        StateFlag::Broken,
        StateFlag::KnockedOver,
        StateFlag::Tilted,
        StateFlag::Leaking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StateFlag::Hot => "hot",
            StateFlag::Fragile => "fragile",
            StateFlag::Powered => "powered",
            StateFlag::Wet => "wet",
            StateFlag::Moving => "moving",
            StateFlag::Broken => "broken",
            StateFlag::KnockedOver => "knocked_over",
            StateFlag::Tilted => "tilted",
            StateFlag::Leaking => "leaking",
        }
    }

    /// Event kind opened when the flag switches on.
    pub fn event_kind(self) -> &'static str {
        match self {
            StateFlag::Moving => "move",
            other => other.as_str(),
        }
    }

    /// Hot, wet and powered entities draw attention.
    pub fn is_alerting(self) -> bool {
        matches!(self, StateFlag::Hot | StateFlag::Wet | StateFlag::Powered)
    }
}

impl FromStr for StateFlag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateFlag::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown state flag {s:?}"))
    }
}

impl fmt::Display for StateFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Appearance {
    pub category: String,
    pub material: Option<String>,
    pub shape: Option<String>,
    pub color: Option<String>,
    pub size: Option<i64>,
    /// Mobility class: `item`, `fixture` or `mobile`.
    pub class: Option<String>,
}

/// One entity as seen in one tick. Occluded readings carry the position
/// only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reading {
    pub position: Cell,
    /// Footprint in cells, anchored at `position`.
    pub extent: (i64, i64),
    pub region: Option<String>,
    pub appearance: Option<Appearance>,
    pub flags: BTreeSet<StateFlag>,
    /// Item directly below in a stack.
    pub support: Option<EntityId>,
    pub held_by: Option<EntityId>,
    pub occluded: bool,
}

impl Reading {
    pub fn occluded_at(position: Cell, region: Option<String>) -> Self {
        Self {
            position,
            extent: (1, 1),
            region,
            appearance: None,
            flags: BTreeSet::new(),
            support: None,
            held_by: None,
            occluded: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub tick: u64,
    pub readings: BTreeMap<EntityId, Reading>,
}

impl Observation {
    /// Line-oriented canonical text, used for trace digests.
    pub fn canonical(&self) -> String {
        let mut out = format!("tick {}\n", self.tick);
        for (id, r) in &self.readings {
            let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
            let app = r
                .appearance
                .as_ref()
                .map(|a| {
                    format!(
                        "{}/{}/{}/{}/{}",
                        a.category,
                        a.material.as_deref().unwrap_or("-"),
                        a.shape.as_deref().unwrap_or("-"),
                        a.color.as_deref().unwrap_or("-"),
                        a.size.map(|s| s.to_string()).unwrap_or_else(|| "-".into())
                    )
                })
                .unwrap_or_else(|| "occluded".into());
            out.push_str(&format!(
                "{id} {} {} {}x{} {} {app} [{}] {} {}\n",
                r.position.0,
                r.position.1,
                r.extent.0,
                r.extent.1,
                r.region.as_deref().unwrap_or("-"),
                flags.join(","),
                r.support.as_ref().map(EntityId::as_str).unwrap_or("-"),
                r.held_by.as_ref().map(EntityId::as_str).unwrap_or("-"),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerceivedEvent {
    pub id: String,
    pub entity: EntityId,
    pub kind: String,
    pub start: u64,
    pub end: Option<u64>,
}

impl PerceivedEvent {
    pub fn is_open(&self) -> bool {
        self.end.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemporalFeatures {
    pub events: Vec<PerceivedEvent>,
    pub durations: BTreeMap<String, u64>,
    /// `start(j) - end(i)` for every closed `i` and any other `j`.
    pub intervals: BTreeMap<(String, String), i64>,
}

impl TemporalFeatures {
    pub fn event(&self, id: &str) -> Option<&PerceivedEvent> {
        self.events.iter().find(|e| e.id == id)
    }
}

/// Edge-triggered event detection: an event opens when a state flag (or
/// motion) switches on and closes when it switches off. Flags already set
/// when an entity is first seen are treated as its baseline.
pub fn extract_temporal(window: &[Observation]) -> Result<TemporalFeatures, PerceiveError> {
    let first = window.first().ok_or(PerceiveError::EmptyWindow)?;
    for pair in window.windows(2) {
        if pair[0].tick + 1 != pair[1].tick {
            return Err(PerceiveError::NonConsecutive(pair[0].tick, pair[1].tick));
        }
    }
    let mut known: BTreeMap<&EntityId, &BTreeSet<StateFlag>> = BTreeMap::new();
    for (id, r) in &first.readings {
        if !r.occluded {
            known.insert(id, &r.flags);
        }
    }
    let mut events: Vec<PerceivedEvent> = Vec::new();
    let mut open: BTreeMap<(EntityId, StateFlag), usize> = BTreeMap::new();
    for obs in &window[1..] {
        for (id, r) in &obs.readings {
            if r.occluded {
                continue;
            }
            if let Some(prev) = known.get(id) {
                for flag in prev.difference(&r.flags) {
                    if let Some(idx) = open.remove(&(id.clone(), *flag)) {
                        events[idx].end = Some(obs.tick);
                    }
                }
                for flag in r.flags.difference(prev) {
                    open.insert((id.clone(), *flag), events.len());
                    events.push(PerceivedEvent {
                        id: format!("ev{}", events.len() + 1),
                        entity: id.clone(),
                        kind: flag.event_kind().to_string(),
                        start: obs.tick,
                        end: None,
                    });
                }
            }
            known.insert(id, &r.flags);
        }
    }
    let durations = events
        .iter()
        .filter_map(|e| e.end.map(|end| (e.id.clone(), end - e.start)))
        .collect();
    let mut intervals = BTreeMap::new();
    for a in &events {
        let Some(end) = a.end else { continue };
        for b in &events {
            if a.id != b.id {
                intervals.insert((a.id.clone(), b.id.clone()), b.start as i64 - end as i64);
            }
        }
    }
    Ok(TemporalFeatures {
        events,
        durations,
        intervals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Compass {
    E,
    NE,
    N,
    NW,
    W,
    SW,
    S,
    SE,
}

impl Compass {
    const SECTORS: [Compass; 8] = [
        Compass::E,
        Compass::NE,
        Compass::N,
        Compass::NW,
        Compass::W,
        Compass::SW,
        Compass::S,
        Compass::SE,
    ];

    /// Heading of the offset `(dx, dy)` with north along `+y`; `None` for
    /// a zero offset.
    pub fn of_offset(dx: i64, dy: i64) -> Option<Compass> {
        if dx == 0 && dy == 0 {
            return None;
        }
        let angle = (dy as f64).atan2(dx as f64).to_degrees();
        let sector = (angle / 45.0).round() as i64;
        Some(Self::SECTORS[sector.rem_euclid(8) as usize])
    }

    pub fn opposite(self) -> Compass {
        let idx = Self::SECTORS.iter().position(|&c| c == self).expect("listed");
        Self::SECTORS[(idx + 4) % 8]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Compass::E => "E",
            Compass::NE => "NE",
            Compass::N => "N",
            Compass::NW => "NW",
            Compass::W => "W",
            Compass::SW => "SW",
            Compass::S => "S",
            Compass::SE => "SE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    /// Allocentric grid cell.
    pub cell: Cell,
    pub region: Option<String>,
    /// Offset from the agent's cell.
    pub egocentric: (i64, i64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpatialFeatures {
    /// Euclidean cell distance, stored for both orderings of each pair.
    pub distances: BTreeMap<(EntityId, EntityId), f64>,
    /// Heading from the first entity to the second; pairs sharing a cell
    /// have no heading.
    pub directions: BTreeMap<(EntityId, EntityId), Compass>,
    pub locations: BTreeMap<EntityId, Location>,
}

impl SpatialFeatures {
    pub fn distance(&self, a: &EntityId, b: &EntityId) -> Option<f64> {
        self.distances.get(&(a.clone(), b.clone())).copied()
    }
}

pub fn extract_spatial(obs: &Observation, agent: &EntityId) -> Result<SpatialFeatures, PerceiveError> {
    let me = obs
        .readings
        .get(agent)
        .ok_or_else(|| PerceiveError::AgentMissing(agent.clone()))?;
    if me.occluded {
        return Err(PerceiveError::AgentOccluded(agent.clone()));
    }
    let origin = me.position;
    let mut features = SpatialFeatures::default();
    for (id, r) in &obs.readings {
        features.locations.insert(
            id.clone(),
            Location {
                cell: r.position,
                region: r.region.clone(),
                egocentric: (r.position.0 - origin.0, r.position.1 - origin.1),
            },
        );
    }
    let ids: Vec<(&EntityId, Cell)> = obs.readings.iter().map(|(id, r)| (id, r.position)).collect();
    for (i, &(a, pa)) in ids.iter().enumerate() {
        for &(b, pb) in &ids[i + 1..] {
            let d = cell_distance(pa, pb);
            features.distances.insert((a.clone(), b.clone()), d);
            features.distances.insert((b.clone(), a.clone()), d);
            if let Some(dir) = Compass::of_offset(pb.0 - pa.0, pb.1 - pa.1) {
                features.directions.insert((a.clone(), b.clone()), dir);
                features.directions.insert((b.clone(), a.clone()), dir.opposite());
            }
        }
    }
    Ok(features)
}

/// Category → candidate functions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AffordanceLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

pub const LEXICON_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_LEXICON: &str = include_str!("../data/affordances.lex");

impl AffordanceLexicon {
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Self, PerceiveError> {
        let text = std::fs::read_to_string(path).map_err(|e| PerceiveError::Lexicon {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// `category: fn, fn` lines; `#` comments; optional `version 1`.
    pub fn parse(text: &str) -> Result<Self, PerceiveError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let err = |reason: String| PerceiveError::Lexicon {
                line: idx + 1,
                reason,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("version ") {
                if v.trim() != LEXICON_FORMAT_VERSION.to_string() {
                    return Err(err(format!("unsupported lexicon version {v}")));
                }
                continue;
            }
            let (category, functions) = line
                .split_once(':')
                .ok_or_else(|| err("expected `category: functions`".into()))?;
            let functions: Vec<String> = functions
                .split(',')
                .map(|f| f.trim().to_string())
                .filter(|f| !f.is_empty())
                .collect();
            entries.insert(category.trim().to_string(), functions);
        }
        Ok(Self { entries })
    }

    pub fn functions(&self, category: &str) -> &[String] {
        self.entries.get(category).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptSlice {
    pub category: String,
    pub material: Option<String>,
    pub shape: Option<String>,
    pub color: Option<String>,
    pub size: Option<i64>,
    pub class: Option<String>,
    pub functions: Vec<String>,
    pub flags: BTreeSet<StateFlag>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConceptualFeatures {
    pub entities: BTreeMap<EntityId, ConceptSlice>,
}

pub fn extract_conceptual(obs: &Observation, lexicon: &AffordanceLexicon) -> ConceptualFeatures {
    let entities = obs
        .readings
        .iter()
        .filter(|(_, r)| !r.occluded)
        .filter_map(|(id, r)| {
            let a = r.appearance.as_ref()?;
            Some((
                id.clone(),
                ConceptSlice {
                    category: a.category.clone(),
                    material: a.material.clone(),
                    shape: a.shape.clone(),
                    color: a.color.clone(),
                    size: a.size,
                    class: a.class.clone(),
                    functions: lexicon.functions(&a.category).to_vec(),
                    flags: r.flags.clone(),
                },
            ))
        })
        .collect();
    ConceptualFeatures { entities }
}

/// Per-dimension attention weights; always non-negative and summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub temporal: f64,
    pub spatial: f64,
    pub conceptual: f64,
}

impl Default for AttentionWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

impl AttentionWeights {
    pub fn uniform() -> Self {
        Self {
            temporal: 1.0 / 3.0,
            spatial: 1.0 / 3.0,
            conceptual: 1.0 / 3.0,
        }
    }

    pub fn new(temporal: f64, spatial: f64, conceptual: f64) -> Result<Self, PerceiveError> {
        let w = Self {
            temporal,
            spatial,
            conceptual,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), PerceiveError> {
        let arr = self.as_array();
        if arr.iter().any(|w| !(*w >= 0.0)) || (arr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(PerceiveError::InvalidWeights(arr));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.temporal, self.spatial, self.conceptual]
    }

    pub fn from_array(arr: [f64; 3]) -> Self {
        Self {
            temporal: arr[0],
            spatial: arr[1],
            conceptual: arr[2],
        }
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Temporal => self.temporal,
            Dimension::Spatial => self.spatial,
            Dimension::Conceptual => self.conceptual,
            Dimension::Unified => 0.0,
        }
    }
}

/// Cues attention needs beyond the features themselves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SalienceContext {
    pub agent: Option<EntityId>,
    pub task_entities: BTreeSet<EntityId>,
    pub threshold: f64,
}

pub const SALIENCE_TASK: f64 = 1.0;
pub const SALIENCE_MOVING: f64 = 1.0;
pub const SALIENCE_FLAGGED: f64 = 0.9;
pub const SALIENCE_ADJACENT: f64 = 0.8;
pub const SALIENCE_BACKGROUND: f64 = 0.3;
pub const ADJACENCY_CELLS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalSlice {
    pub events: Vec<String>,
    pub active_kinds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundObject {
    pub entity: EntityId,
    pub temporal: Option<TemporalSlice>,
    pub spatial: Option<Location>,
    pub conceptual: Option<ConceptSlice>,
    pub score: f64,
    pub below_threshold: bool,
}

/// Bind the three feature sets into one record per entity, scored by
/// weighted salience and sorted by `(score desc, entity asc)`.
pub fn attend_and_bind(
    ft: &TemporalFeatures,
    fs: &SpatialFeatures,
    fc: &ConceptualFeatures,
    weights: &AttentionWeights,
    ctx: &SalienceContext,
) -> Result<Vec<BoundObject>, PerceiveError> {
    weights.validate()?;
    let mut temporal: BTreeMap<&EntityId, TemporalSlice> = BTreeMap::new();
    for ev in &ft.events {
        let slice = temporal.entry(&ev.entity).or_insert_with(|| TemporalSlice {
            events: Vec::new(),
            active_kinds: Vec::new(),
        });
        slice.events.push(ev.id.clone());
        if ev.is_open() && !slice.active_kinds.contains(&ev.kind) {
            slice.active_kinds.push(ev.kind.clone());
        }
    }
    let entities: BTreeSet<&EntityId> = temporal
        .keys()
        .copied()
        .chain(fs.locations.keys())
        .chain(fc.entities.keys())
        .collect();

    let mut bound: Vec<BoundObject> = entities
        .into_iter()
        .map(|id| {
            let task = ctx.task_entities.contains(id);
            let t = temporal.get(id).cloned();
            let s = fs.locations.get(id).cloned();
            let c = fc.entities.get(id).cloned();
            let mut score = 0.0;
            if let Some(slice) = &t {
                let sal = if task || slice.active_kinds.iter().any(|k| k == "move") {
                    SALIENCE_MOVING
                } else if !slice.active_kinds.is_empty() {
                    SALIENCE_FLAGGED
                } else {
                    SALIENCE_BACKGROUND
                };
                score += weights.temporal * sal;
            }
            if s.is_some() {
                let adjacent = ctx.agent.as_ref().is_some_and(|agent| {
                    agent != id && fs.distance(agent, id).is_some_and(|d| d < ADJACENCY_CELLS)
                });
                let sal = if task {
                    SALIENCE_TASK
                } else if adjacent {
                    SALIENCE_ADJACENT
                } else {
                    SALIENCE_BACKGROUND
                };
                score += weights.spatial * sal;
            }
            if let Some(slice) = &c {
                let sal = if task || slice.flags.contains(&StateFlag::Moving) {
                    SALIENCE_MOVING
                } else if slice.flags.iter().any(|f| f.is_alerting()) {
                    SALIENCE_FLAGGED
                } else {
                    SALIENCE_BACKGROUND
                };
                score += weights.conceptual * sal;
            }
            let score = score.clamp(0.0, 1.0);
            BoundObject {
                entity: id.clone(),
                temporal: t,
                spatial: s,
                conceptual: c,
                score,
                below_threshold: score < ctx.threshold,
            }
        })
        .collect();
    bound.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.entity.cmp(&b.entity)));
    Ok(bound)
}

/// Per-dimension graphs `(T, S, C)` holding the perceived facts of one
/// tick. `near_cells` bounds the `Near` relation (strictly below).
pub fn percept_graphs(
    tick: u64,
    ft: &TemporalFeatures,
    fs: &SpatialFeatures,
    fc: &ConceptualFeatures,
    obs: &Observation,
    near_cells: f64,
) -> (SemanticGraph, SemanticGraph, SemanticGraph) {
    let fact = |s: &EntityId, r: &str, o: Object| {
        Fact::new(s.clone(), r, o)
            .at_tick(tick)
            .with_origin(Origin::Perceived)
    };
    let sym = |s: &str| Object::atom(s).ok();

    let mut t = SemanticGraph::new(Dimension::Temporal);
    for ev in &ft.events {
        if let (true, Some(kind)) = (ev.is_open(), sym(&ev.kind)) {
            let _ = t.insert(fact(&ev.entity, "active", kind));
        }
    }
    for a in &ft.events {
        let Some(end) = a.end else { continue };
        for b in &ft.events {
            if a.id != b.id && end <= b.start {
                if let (Ok(ida), Some(idb)) = (EntityId::new(&a.id), sym(&b.id)) {
                    let _ = t.insert(fact(&ida, "before", idb));
                }
            }
        }
    }

    let mut s = SemanticGraph::new(Dimension::Spatial);
    for (id, loc) in &fs.locations {
        let _ = s.insert(fact(id, "pos_x", Object::Int(loc.cell.0)));
        let _ = s.insert(fact(id, "pos_y", Object::Int(loc.cell.1)));
        if let Some(region) = loc.region.as_deref().and_then(sym) {
            let _ = s.insert(fact(id, "LocatedIn", region));
        }
    }
    for ((a, b), d) in &fs.distances {
        if *d < near_cells {
            let _ = s.insert(fact(a, "Near", Object::Atom(b.clone())));
        }
    }
    for (id, r) in &obs.readings {
        if r.extent != (1, 1) {
            let _ = s.insert(fact(id, "extent_x", Object::Int(r.extent.0)));
            let _ = s.insert(fact(id, "extent_y", Object::Int(r.extent.1)));
        }
        if let Some(support) = &r.support {
            let _ = s.insert(fact(id, "OnTopOf", Object::Atom(support.clone())));
        }
        if let Some(holder) = &r.held_by {
            let _ = s.insert(fact(holder, "holding", Object::Atom(id.clone())));
        }
    }

    let mut c = SemanticGraph::new(Dimension::Conceptual);
    for (id, slice) in &fc.entities {
        if let Some(cat) = sym(&slice.category) {
            let _ = c.insert(fact(id, "isa", cat));
        }
        for (rel, value) in [
            ("material", &slice.material),
            ("shape", &slice.shape),
            ("color", &slice.color),
            ("class", &slice.class),
        ] {
            if let Some(v) = value.as_deref().and_then(sym) {
                let _ = c.insert(fact(id, rel, v));
            }
        }
        if let Some(size) = slice.size {
            let _ = c.insert(fact(id, "size", Object::Int(size)));
        }
        for flag in &slice.flags {
            if *flag != StateFlag::Moving {
                if let Some(v) = sym(flag.as_str()) {
                    let _ = c.insert(fact(id, "has_state", v));
                }
            }
        }
        for func in &slice.functions {
            if let Some(v) = sym(func) {
                let _ = c.insert(fact(id, "affords", v));
            }
        }
    }
    (t, s, c)
}
