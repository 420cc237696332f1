//! Knowledge representation shared by every layer: facts, Horn rules,
//! per-dimension semantic graphs and the forward-chaining engine.
//!
//! Unary predicates are stored as binary facts through the reserved
//! relations `isa` and `has_state`, so `Cup(cup1)` becomes
//! `cup1 isa cup`. A fact's identity is its `(subject, relation, object)`
//! triple; re-asserting a triple keeps the larger confidence and the later
//! tick.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("invalid entity id {0:?}")]
    InvalidEntity(String),
    #[error("invalid relation name {0:?}")]
    InvalidRelation(String),
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("rule {rule}: {reason}")]
    InvalidRule { rule: String, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Short lowercase token naming an entity, event or concept.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self, KbError> {
        let id = id.into();
        if is_token(&id) {
            Ok(Self(id))
        } else {
            Err(KbError::InvalidEntity(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_token(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

pub(crate) fn is_relation_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TryFrom<String> for EntityId {
    type Error = KbError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EntityId> for String {
    fn from(value: EntityId) -> Self {
        value.0
    }
}

impl FromStr for EntityId {
    type Err = KbError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for EntityId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Object position of a fact: a symbolic node (entity, event or concept)
/// or an integer literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Atom(EntityId),
    Int(i64),
}

impl Object {
    pub fn atom(s: &str) -> Result<Self, KbError> {
        EntityId::new(s).map(Object::Atom)
    }

    pub fn as_atom(&self) -> Option<&EntityId> {
        match self {
            Object::Atom(id) => Some(id),
            Object::Int(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Object::Int(n) => Some(*n),
            Object::Atom(_) => None,
        }
    }
}

impl FromStr for Object {
    type Err = KbError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<i64>() {
            Ok(n) => Ok(Object::Int(n)),
            Err(_) => Object::atom(s),
        }
    }
}

impl From<EntityId> for Object {
    fn from(id: EntityId) -> Self {
        Object::Atom(id)
    }
}

impl From<i64> for Object {
    fn from(n: i64) -> Self {
        Object::Int(n)
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Atom(id) => f.write_str(id.as_str()),
            Object::Int(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Perceived,
    Derived,
    Retrieved,
    Asserted,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Perceived => "perceived",
            Origin::Derived => "derived",
            Origin::Retrieved => "retrieved",
            Origin::Asserted => "asserted",
        }
    }
}

impl FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "perceived" => Ok(Origin::Perceived),
            "derived" => Ok(Origin::Derived),
            "retrieved" => Ok(Origin::Retrieved),
            "asserted" => Ok(Origin::Asserted),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

/// Identity key of a fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactKey {
    pub subject: EntityId,
    pub relation: String,
    pub object: Object,
}

impl fmt::Display for FactKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.relation, self.subject, self.object)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fact {
    pub subject: EntityId,
    pub relation: String,
    pub object: Object,
    pub confidence: f64,
    pub tick: u64,
    pub origin: Origin,
}

impl Fact {
    /// Asserted fact at tick 0 with full confidence.
    pub fn new(subject: EntityId, relation: impl Into<String>, object: impl Into<Object>) -> Self {
        Self {
            subject,
            relation: relation.into(),
            object: object.into(),
            confidence: 1.0,
            tick: 0,
            origin: Origin::Asserted,
        }
    }

    /// Convenience constructor from string tokens; panics on malformed ids.
    /// Intended for fixtures and tests.
    pub fn triple(subject: &str, relation: &str, object: &str) -> Self {
        Self::new(
            EntityId::new(subject).expect("valid subject"),
            relation,
            object.parse::<Object>().expect("valid object"),
        )
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn at_tick(mut self, tick: u64) -> Self {
        self.tick = tick;
        self
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn key(&self) -> FactKey {
        FactKey {
            subject: self.subject.clone(),
            relation: self.relation.clone(),
            object: self.object.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), KbError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(KbError::Confidence(self.confidence));
        }
        if !is_relation_name(&self.relation) {
            return Err(KbError::InvalidRelation(self.relation.clone()));
        }
        Ok(())
    }

    /// `subject|relation|object|confidence|tick|origin`
    pub fn canonical_line(&self) -> String {
        format!(
            "{}|{}|{}|{:.6}|{}|{}",
            self.subject,
            self.relation,
            self.object,
            self.confidence,
            self.tick,
            self.origin.as_str()
        )
    }

    pub fn parse_canonical(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 6 {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        }
        let subject = EntityId::new(fields[0]).map_err(|e| e.to_string())?;
        let object: Object = fields[2].parse().map_err(|e: KbError| e.to_string())?;
        let confidence: f64 = fields[3]
            .parse()
            .map_err(|_| format!("bad confidence {:?}", fields[3]))?;
        let tick: u64 = fields[4]
            .parse()
            .map_err(|_| format!("bad tick {:?}", fields[4]))?;
        let origin: Origin = fields[5].parse()?;
        let fact = Fact {
            subject,
            relation: fields[1].to_string(),
            object,
            confidence,
            tick,
            origin,
        };
        fact.validate().map_err(|e| e.to_string())?;
        Ok(fact)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}, {}) @{:.3}",
            self.relation, self.subject, self.object, self.confidence
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Temporal,
    Spatial,
    Conceptual,
    Unified,
}

pub const TEMPORAL_RELATIONS: &[&str] = &["active", "before", "ended"];

pub const SPATIAL_RELATIONS: &[&str] = &[
    "LeftOf",
    "RightOf",
    "Above",
    "Below",
    "OnTopOf",
    "Inside",
    "Near",
    "LocatedIn",
    "pos_x",
    "pos_y",
    "holding",
    "collision_risk",
    "extent_x",
    "extent_y",
];

impl Dimension {
    /// Cognitive dimension a relation belongs to. Anything that is neither
    /// temporal nor spatial is conceptual.
    pub fn of_relation(relation: &str) -> Dimension {
        if TEMPORAL_RELATIONS.contains(&relation) {
            Dimension::Temporal
        } else if SPATIAL_RELATIONS.contains(&relation) {
            Dimension::Spatial
        } else {
            Dimension::Conceptual
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Temporal => "temporal",
            Dimension::Spatial => "spatial",
            Dimension::Conceptual => "conceptual",
            Dimension::Unified => "unified",
        }
    }
}

/// Typed set of facts over entities, events and concepts.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    dimension: Dimension,
    facts: BTreeMap<FactKey, Fact>,
    entities: BTreeSet<EntityId>,
}

impl SemanticGraph {
    pub fn new(dimension: Dimension) -> Self {
        Self {
            dimension,
            facts: BTreeMap::new(),
            entities: BTreeSet::new(),
        }
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    /// Insert with max-merge on the identity key. Returns whether the graph
    /// changed.
    pub fn insert(&mut self, fact: Fact) -> Result<bool, KbError> {
        fact.validate()?;
        self.entities.insert(fact.subject.clone());
        if let Object::Atom(id) = &fact.object {
            self.entities.insert(id.clone());
        }
        let key = fact.key();
        match self.facts.get_mut(&key) {
            Some(existing) => {
                let mut changed = false;
                if fact.confidence > existing.confidence {
                    existing.confidence = fact.confidence;
                    changed = true;
                }
                if fact.tick > existing.tick {
                    existing.tick = fact.tick;
                    changed = true;
                }
                Ok(changed)
            }
            None => {
                self.facts.insert(key, fact);
                Ok(true)
            }
        }
    }

    pub fn extend<I: IntoIterator<Item = Fact>>(&mut self, facts: I) -> Result<(), KbError> {
        for fact in facts {
            self.insert(fact)?;
        }
        Ok(())
    }

    /// Max-merge every fact of `other` into `self`.
    pub fn merge(&mut self, other: &SemanticGraph) {
        for fact in other.facts() {
            // already validated on the way into `other`
            let _ = self.insert(fact.clone());
        }
    }

    pub fn get(&self, key: &FactKey) -> Option<&Fact> {
        self.facts.get(key)
    }

    pub fn contains(&self, subject: &str, relation: &str, object: &str) -> bool {
        let (Ok(subject), Ok(object)) = (EntityId::new(subject), object.parse::<Object>()) else {
            return false;
        };
        self.facts.contains_key(&FactKey {
            subject,
            relation: relation.to_string(),
            object,
        })
    }

    /// Facts in identity-key order.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &FactKey> {
        self.facts.keys()
    }

    pub fn with_relation<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        self.facts.values().filter(move |f| f.relation == relation)
    }

    pub fn entities(&self) -> &BTreeSet<EntityId> {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        for fact in self.facts.values() {
            out.push_str(&fact.canonical_line());
            out.push('\n');
        }
        out
    }

    pub fn from_snapshot(dimension: Dimension, text: &str) -> Result<Self, KbError> {
        let mut graph = SemanticGraph::new(dimension);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fact = Fact::parse_canonical(line).map_err(|reason| KbError::Parse {
                line: idx + 1,
                reason,
            })?;
            graph.insert(fact)?;
        }
        Ok(graph)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Object),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    fn resolve<'a>(&'a self, binding: &'a Binding) -> Option<&'a Object> {
        match self {
            Term::Var(v) => binding.get(v),
            Term::Const(o) => Some(o),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(o) => write!(f, "{o}"),
        }
    }
}

/// A relation over two terms, e.g. `LeftOf(?x, bed)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub relation: String,
    pub subject: Term,
    pub object: Term,
}

impl Atom {
    pub fn new(relation: &str, subject: Term, object: Term) -> Self {
        Self {
            relation: relation.to_string(),
            subject,
            object,
        }
    }

    /// Variables in first-appearance order.
    pub fn variables(&self) -> Vec<&str> {
        let mut vars = Vec::new();
        for term in [&self.subject, &self.object] {
            if let Term::Var(v) = term {
                if !vars.contains(&v.as_str()) {
                    vars.push(v.as_str());
                }
            }
        }
        vars
    }

    fn matches(&self, fact: &Fact, binding: &Binding) -> Option<Binding> {
        if fact.relation != self.relation {
            return None;
        }
        let mut out = binding.clone();
        let subject = Object::Atom(fact.subject.clone());
        for (term, value) in [(&self.subject, &subject), (&self.object, &fact.object)] {
            match term {
                Term::Const(c) => {
                    if c != value {
                        return None;
                    }
                }
                Term::Var(v) => match out.get(v) {
                    Some(bound) if bound != value => return None,
                    Some(_) => {}
                    None => {
                        out.insert(v.clone(), value.clone());
                    }
                },
            }
        }
        Some(out)
    }

    fn instantiate(&self, binding: &Binding) -> Option<(EntityId, Object)> {
        let subject = self.subject.resolve(binding)?.as_atom()?.clone();
        let object = self.object.resolve(binding)?.clone();
        Some((subject, object))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.relation, self.subject, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Numeric comparison between two integer-valued terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Guard {
    pub left: Term,
    pub op: CmpOp,
    pub right: Term,
}

impl Guard {
    fn holds(&self, binding: &Binding) -> bool {
        let (Some(a), Some(b)) = (
            self.left.resolve(binding).and_then(Object::as_int),
            self.right.resolve(binding).and_then(Object::as_int),
        ) else {
            return false;
        };
        match self.op {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

/// Range-restricted Horn rule with positive premises only.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub premises: Vec<Atom>,
    pub guards: Vec<Guard>,
    pub conclusion: Atom,
    pub weight: f64,
}

impl Rule {
    pub fn new(
        name: &str,
        premises: Vec<Atom>,
        guards: Vec<Guard>,
        conclusion: Atom,
        weight: f64,
    ) -> Result<Self, KbError> {
        let invalid = |reason: String| KbError::InvalidRule {
            rule: name.to_string(),
            reason,
        };
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(invalid(format!("weight {weight} outside (0, 1]")));
        }
        if premises.is_empty() {
            return Err(invalid("no premises".into()));
        }
        let bound: BTreeSet<&str> = premises.iter().flat_map(|p| p.variables()).collect();
        for v in conclusion.variables() {
            if !bound.contains(v) {
                return Err(invalid(format!("conclusion variable ?{v} not bound by any premise")));
            }
        }
        for guard in &guards {
            for term in [&guard.left, &guard.right] {
                if let Term::Var(v) = term {
                    if !bound.contains(v.as_str()) {
                        return Err(invalid(format!("guard variable ?{v} not bound by any premise")));
                    }
                }
            }
        }
        if matches!(conclusion.subject, Term::Const(Object::Int(_))) {
            return Err(invalid("conclusion subject must be an entity".into()));
        }
        Ok(Self {
            name: name.to_string(),
            premises,
            guards,
            conclusion,
            weight,
        })
    }

    /// Dimensions touched by the premises.
    pub fn premise_dimensions(&self) -> BTreeSet<Dimension> {
        self.premises
            .iter()
            .map(|p| Dimension::of_relation(&p.relation))
            .collect()
    }

    /// Every conclusion this rule yields on `graph`, without merging.
    fn fire(&self, index: &BTreeMap<&str, Vec<&Fact>>) -> Vec<Fact> {
        // (binding, product of premise confidences, latest premise tick)
        let mut partial: Vec<(Binding, f64, u64)> = vec![(Binding::new(), 1.0, 0)];
        for premise in &self.premises {
            let Some(candidates) = index.get(premise.relation.as_str()) else {
                return Vec::new();
            };
            let mut next = Vec::new();
            for (binding, conf, tick) in &partial {
                for fact in candidates {
                    if let Some(b) = premise.matches(fact, binding) {
                        next.push((b, conf * fact.confidence, (*tick).max(fact.tick)));
                    }
                }
            }
            if next.is_empty() {
                return Vec::new();
            }
            partial = next;
        }
        partial
            .into_iter()
            .filter(|(b, _, _)| self.guards.iter().all(|g| g.holds(b)))
            .filter_map(|(b, conf, tick)| {
                let (subject, object) = self.conclusion.instantiate(&b)?;
                Some(Fact {
                    subject,
                    relation: self.conclusion.relation.clone(),
                    object,
                    confidence: self.weight * conf,
                    tick,
                    origin: Origin::Derived,
                })
            })
            .collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: ", self.name, self.weight)?;
        let mut parts: Vec<String> = self.premises.iter().map(|p| p.to_string()).collect();
        parts.extend(self.guards.iter().map(|g| g.to_string()));
        write!(f, "{} -> {}", parts.join(", "), self.conclusion)
    }
}

/// Variable assignment produced by matching.
pub type Binding = BTreeMap<String, Object>;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub graph: SemanticGraph,
    /// Facts whose identity key was absent from the input graph, in key order.
    pub derived: Vec<Fact>,
    /// Set when the last permitted pass still changed the graph.
    pub truncated: bool,
    pub passes: usize,
}

fn relation_index(graph: &SemanticGraph) -> BTreeMap<&str, Vec<&Fact>> {
    let mut index: BTreeMap<&str, Vec<&Fact>> = BTreeMap::new();
    for fact in graph.facts() {
        index.entry(fact.relation.as_str()).or_default().push(fact);
    }
    index
}

/// Chain `rules` over `graph` until nothing changes (new facts or raised
/// confidences) or `max_iterations` passes have run.
///
/// Each pass evaluates every rule against the graph as it stood at the
/// start of the pass, so the outcome does not depend on rule order.
/// Derived confidence is `weight * product(premise confidences)`.
pub fn forward_chain(graph: &SemanticGraph, rules: &[Rule], max_iterations: usize) -> ChainResult {
    let mut current = graph.clone();
    let mut passes = 0;
    let mut fixpoint = rules.is_empty();
    while !fixpoint && passes < max_iterations.max(1) {
        passes += 1;
        let produced: Vec<Fact> = {
            let index = relation_index(&current);
            rules.iter().flat_map(|r| r.fire(&index)).collect()
        };
        let mut changed = false;
        for fact in produced {
            // rule weights and premise confidences are in range, so this cannot fail
            changed |= current.insert(fact).unwrap_or(false);
        }
        fixpoint = !changed;
    }
    let derived = current
        .facts()
        .filter(|f| graph.get(&f.key()).is_none())
        .cloned()
        .collect();
    ChainResult {
        graph: current,
        derived,
        truncated: !fixpoint,
        passes,
    }
}

/// All bindings of `pattern` against `graph`, sorted by the bound values
/// (variables taken in first-appearance order) and deduplicated.
pub fn query(graph: &SemanticGraph, pattern: &Atom) -> Vec<Binding> {
    let vars = pattern.variables();
    let mut rows: BTreeMap<Vec<Object>, Binding> = BTreeMap::new();
    let empty = Binding::new();
    for fact in graph.with_relation(&pattern.relation) {
        if let Some(b) = pattern.matches(fact, &empty) {
            let key: Vec<Object> = vars.iter().map(|v| b[*v].clone()).collect();
            rows.entry(key).or_insert(b);
        }
    }
    rows.into_values().collect()
}

/// Facts matching `pattern`, in identity-key order.
pub fn matching_facts<'a>(graph: &'a SemanticGraph, pattern: &'a Atom) -> Vec<&'a Fact> {
    let empty = Binding::new();
    graph
        .with_relation(&pattern.relation)
        .filter(|f| pattern.matches(f, &empty).is_some())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(rel: &str, s: &str, o: &str) -> Atom {
        let term = |t: &str| match t.strip_prefix('?') {
            Some(v) => Term::var(v),
            None => Term::Const(t.parse().unwrap()),
        };
        Atom::new(rel, term(s), term(o))
    }

    #[test]
    fn insert_into_empty_graph() {
        let mut g = SemanticGraph::new(Dimension::Conceptual);
        g.insert(Fact::triple("cup1", "isa", "cup")).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.entities().contains(&EntityId::new("cup1").unwrap()));
    }

    #[test]
    fn reinsert_keeps_max_confidence_and_latest_tick() {
        let mut g = SemanticGraph::new(Dimension::Conceptual);
        g.insert(Fact::triple("cup1", "isa", "cup").with_confidence(0.4).at_tick(5))
            .unwrap();
        g.insert(Fact::triple("cup1", "isa", "cup").with_confidence(0.9).at_tick(2))
            .unwrap();
        assert_eq!(g.len(), 1);
        let f = g.facts().next().unwrap();
        assert_eq!(f.confidence, 0.9);
        assert_eq!(f.tick, 5);
    }

    #[test]
    fn out_of_range_confidence_rejected() {
        let mut g = SemanticGraph::new(Dimension::Conceptual);
        let err = g
            .insert(Fact::triple("cup1", "isa", "cup").with_confidence(1.2))
            .unwrap_err();
        assert_eq!(err, KbError::Confidence(1.2));
        assert!(g.is_empty());
    }

    #[test]
    fn entity_ids_are_lowercase_tokens() {
        assert!(EntityId::new("cup1").is_ok());
        assert!(EntityId::new("").is_err());
        assert!(EntityId::new("Cup").is_err());
        assert!(EntityId::new("1cup").is_err());
    }

    #[test]
    fn knockover_rule_derives_spill() {
        let mut g = SemanticGraph::new(Dimension::Unified);
        g.extend([
            Fact::triple("cup1", "isa", "cup"),
            Fact::triple("cup1", "active", "knocked_over"),
            Fact::triple("cup1", "contains", "liq1"),
        ])
        .unwrap();
        let rule = Rule::new(
            "knockover_spill",
            vec![
                atom("isa", "?x", "cup"),
                atom("active", "?x", "knocked_over"),
                atom("contains", "?x", "?y"),
            ],
            vec![],
            atom("has_state", "?y", "spilling"),
            1.0,
        )
        .unwrap();
        let out = forward_chain(&g, &[rule], 10);
        assert_eq!(out.derived.len(), 1);
        assert_eq!(out.derived[0].key(), Fact::triple("liq1", "has_state", "spilling").key());
        assert_eq!(out.derived[0].origin, Origin::Derived);
        assert!(!out.truncated);
    }

    #[test]
    fn empty_rule_list_changes_nothing() {
        let mut g = SemanticGraph::new(Dimension::Unified);
        g.insert(Fact::triple("a", "p", "b")).unwrap();
        let out = forward_chain(&g, &[], 10);
        assert_eq!(out.graph, g);
        assert!(out.derived.is_empty());
    }

    #[test]
    fn unbound_conclusion_variable_rejected() {
        let err = Rule::new(
            "printed_form",
            vec![atom("isa", "?x", "cup"), atom("active", "?x", "knocked_over")],
            vec![],
            atom("has_state", "?y", "spilling"),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, KbError::InvalidRule { .. }));
    }

    #[test]
    fn guards_compare_integers() {
        let mut g = SemanticGraph::new(Dimension::Conceptual);
        g.extend([
            Fact::triple("p1", "size", "3"),
            Fact::triple("p2", "size", "1"),
        ])
        .unwrap();
        let rule = Rule::new(
            "big",
            vec![atom("size", "?x", "?s")],
            vec![Guard {
                left: Term::var("s"),
                op: CmpOp::Ge,
                right: Term::Const(Object::Int(2)),
            }],
            atom("isa", "?x", "big"),
            1.0,
        )
        .unwrap();
        let out = forward_chain(&g, &[rule], 4);
        assert_eq!(out.derived.len(), 1);
        assert_eq!(out.derived[0].subject.as_str(), "p1");
    }

    #[test]
    fn truncation_is_flagged() {
        let mut g = SemanticGraph::new(Dimension::Unified);
        g.insert(Fact::triple("a", "p", "b")).unwrap();
        let ab = Rule::new("ab", vec![atom("p", "?x", "?y")], vec![], atom("q", "?x", "?y"), 1.0).unwrap();
        let bc = Rule::new("bc", vec![atom("q", "?x", "?y")], vec![], atom("r", "?x", "?y"), 1.0).unwrap();
        let out = forward_chain(&g, &[ab.clone(), bc.clone()], 1);
        assert!(out.truncated);
        let out = forward_chain(&g, &[ab, bc], 10);
        assert!(!out.truncated);
        assert_eq!(out.derived.len(), 2);
    }

    #[test]
    fn query_single_match_and_empty() {
        let mut g = SemanticGraph::new(Dimension::Spatial);
        assert!(query(&g, &atom("LeftOf", "?x", "bed")).is_empty());
        g.insert(Fact::triple("table", "LeftOf", "bed")).unwrap();
        let rows = query(&g, &atom("LeftOf", "?x", "bed"));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["x"], Object::atom("table").unwrap());
    }

    #[test]
    fn query_orders_by_bound_value() {
        let mut g = SemanticGraph::new(Dimension::Conceptual);
        for id in ["cup3", "cup1", "cup2"] {
            g.insert(Fact::triple(id, "isa", "cup")).unwrap();
        }
        g.insert(Fact::triple("plate1", "isa", "plate")).unwrap();
        let ids: Vec<String> = query(&g, &atom("isa", "?x", "cup"))
            .iter()
            .map(|b| b["x"].to_string())
            .collect();
        assert_eq!(ids, ["cup1", "cup2", "cup3"]);
    }

    #[test]
    fn snapshot_is_sorted_and_parses_back() {
        let mut g = SemanticGraph::new(Dimension::Unified);
        g.insert(Fact::triple("vase", "OnTopOf", "table").with_confidence(0.5).at_tick(3))
            .unwrap();
        g.insert(Fact::triple("bed", "Near", "window").with_origin(Origin::Perceived))
            .unwrap();
        let text = g.to_snapshot();
        assert_eq!(
            text,
            "bed|Near|window|1.000000|0|perceived\nvase|OnTopOf|table|0.500000|3|asserted\n"
        );
        assert_eq!(SemanticGraph::from_snapshot(Dimension::Unified, &text).unwrap(), g);
    }

    #[test]
    fn relation_dimensions() {
        assert_eq!(Dimension::of_relation("LeftOf"), Dimension::Spatial);
        assert_eq!(Dimension::of_relation("active"), Dimension::Temporal);
        assert_eq!(Dimension::of_relation("has_state"), Dimension::Conceptual);
    }
}
