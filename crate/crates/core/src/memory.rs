//! Working memory and long-term (semantic + episodic) memory.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kb::{matching_facts, Atom, Dimension, Fact, FactKey, KbError, Origin, SemanticGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub wm_capacity: usize,
    /// Per-tick multiplicative salience decay.
    pub salience_decay: f64,
    pub consolidation_threshold: f64,
    pub episode_k: usize,
    pub retrieve_k: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            wm_capacity: 64,
            salience_decay: 0.95,
            consolidation_threshold: 0.5,
            episode_k: 3,
            retrieve_k: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmItem {
    pub fact: Fact,
    pub salience: f64,
    pub inserted: u64,
    pub last_touched: u64,
}

impl WmItem {
    pub fn new(fact: Fact, salience: f64, now: u64) -> Self {
        Self {
            fact,
            salience: salience.clamp(0.0, 1.0),
            inserted: now,
            last_touched: now,
        }
    }
}

/// Capacity-bounded buffer ordered by `(effective salience desc, last
/// touched desc, key asc)`; the last item in that order is evicted.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingMemory {
    items: BTreeMap<FactKey, WmItem>,
    capacity: usize,
    decay: f64,
}

impl WorkingMemory {
    pub fn new(capacity: usize, decay: f64) -> Self {
        Self {
            items: BTreeMap::new(),
            capacity: capacity.max(1),
            decay,
        }
    }

    pub fn with_config(cfg: &MemoryConfig) -> Self {
        Self::new(cfg.wm_capacity, cfg.salience_decay)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, key: &FactKey) -> Option<&WmItem> {
        self.items.get(key)
    }

    pub fn effective_salience(&self, item: &WmItem, now: u64) -> f64 {
        let age = now.saturating_sub(item.last_touched);
        item.salience * self.decay.powi(age.min(i32::MAX as u64) as i32)
    }

    fn compare(&self, a: &WmItem, b: &WmItem, now: u64) -> Ordering {
        self.effective_salience(b, now)
            .total_cmp(&self.effective_salience(a, now))
            .then(b.last_touched.cmp(&a.last_touched))
            .then_with(|| a.fact.key().cmp(&b.fact.key()))
    }

    /// Items in retention order at tick `now`.
    pub fn ordered(&self, now: u64) -> Vec<&WmItem> {
        let mut v: Vec<&WmItem> = self.items.values().collect();
        v.sort_by(|a, b| self.compare(a, b, now));
        v
    }

    /// Insert or refresh. Returns the evicted item, if any.
    pub fn insert(&mut self, item: WmItem, now: u64) -> Option<WmItem> {
        let key = item.fact.key();
        if let Some(existing) = self.items.get_mut(&key) {
            existing.salience = existing.salience.max(item.salience);
            existing.last_touched = existing.last_touched.max(now);
            existing.fact.confidence = existing.fact.confidence.max(item.fact.confidence);
            existing.fact.tick = existing.fact.tick.max(item.fact.tick);
            if existing.fact.origin == Origin::Retrieved && item.fact.origin != Origin::Retrieved {
                existing.fact.origin = item.fact.origin;
            }
            return None;
        }
        self.items.insert(key, item);
        if self.items.len() <= self.capacity {
            return None;
        }
        let victim = self
            .items
            .values()
            .max_by(|a, b| self.compare(a, b, now))
            .map(|i| i.fact.key())
            .expect("non-empty");
        self.items.remove(&victim)
    }

    pub fn remove(&mut self, key: &FactKey) -> Option<WmItem> {
        self.items.remove(key)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&WmItem) -> bool) {
        self.items.retain(|_, v| keep(v));
    }

    pub fn items(&self) -> impl Iterator<Item = &WmItem> {
        self.items.values()
    }

    /// Facts in key order.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.items.values().map(|i| &i.fact)
    }

    /// WM contents as a unified graph.
    pub fn to_graph(&self) -> SemanticGraph {
        let mut g = SemanticGraph::new(Dimension::Unified);
        for f in self.facts() {
            let _ = g.insert(f.clone());
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
    Aborted,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
            Outcome::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub task_kind: String,
    pub instruction: String,
    pub plan: Vec<String>,
    pub results: Vec<String>,
    pub anomalies: Vec<String>,
    pub outcome: Outcome,
    pub start_tick: u64,
    pub end_tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongTermMemory {
    pub semantic: SemanticGraph,
    episodic: Vec<Episode>,
}

impl Default for LongTermMemory {
    fn default() -> Self {
        Self::new()
    }
}

impl LongTermMemory {
    pub fn new() -> Self {
        Self {
            semantic: SemanticGraph::new(Dimension::Unified),
            episodic: Vec::new(),
        }
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodic
    }

    /// Up to `k` matching facts, by `(confidence desc, tick desc, key asc)`.
    pub fn retrieve(&self, pattern: &Atom, k: usize) -> Vec<Fact> {
        let mut hits: Vec<&Fact> = matching_facts(&self.semantic, pattern);
        hits.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then(b.tick.cmp(&a.tick))
                .then_with(|| a.key().cmp(&b.key()))
        });
        hits.into_iter().take(k).cloned().collect()
    }

    /// The `k` most recent episodes of `task_kind`, newest first.
    pub fn retrieve_episodes(&self, task_kind: &str, k: usize) -> Vec<&Episode> {
        self.episodic
            .iter()
            .rev()
            .filter(|e| e.task_kind == task_kind)
            .take(k)
            .collect()
    }

    /// Append the episode and fold confident perceived or derived WM facts
    /// into semantic memory.
    pub fn consolidate(&mut self, wm: &WorkingMemory, episode: Episode, threshold: f64) {
        self.episodic.push(episode);
        for f in wm.facts() {
            if f.confidence >= threshold && matches!(f.origin, Origin::Perceived | Origin::Derived) {
                let _ = self.semantic.insert(f.clone());
            }
        }
    }

    pub fn save_snapshot(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.semantic.to_snapshot())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|e| KbError::Parse {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Ok(Self {
            semantic: SemanticGraph::from_snapshot(Dimension::Unified, &text)?,
            episodic: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Object, Term};

    fn item(s: &str, sal: f64, now: u64) -> WmItem {
        WmItem::new(Fact::triple(s, "isa", "thing"), sal, now)
    }

    #[test]
    fn full_memory_evicts_weakest() {
        let mut wm = WorkingMemory::new(2, 0.95);
        wm.insert(item("a", 0.2, 0), 0);
        wm.insert(item("b", 0.7, 0), 0);
        let evicted = wm.insert(item("c", 1.0, 0), 0).unwrap();
        assert_eq!(evicted.fact.subject.as_str(), "a");
        assert_eq!(wm.len(), 2);
    }

    #[test]
    fn reinsert_raises_salience_without_eviction() {
        let mut wm = WorkingMemory::new(2, 0.95);
        wm.insert(item("a", 0.2, 0), 0);
        wm.insert(item("b", 0.7, 0), 0);
        assert!(wm.insert(item("a", 0.9, 1), 1).is_none());
        let key = Fact::triple("a", "isa", "thing").key();
        assert_eq!(wm.get(&key).unwrap().salience, 0.9);
        assert_eq!(wm.get(&key).unwrap().last_touched, 1);
    }

    #[test]
    fn ties_evict_larger_key() {
        let mut wm = WorkingMemory::new(2, 0.95);
        wm.insert(item("m", 0.5, 0), 0);
        wm.insert(item("z", 0.5, 0), 0);
        let evicted = wm.insert(item("a", 0.5, 0), 0).unwrap();
        assert_eq!(evicted.fact.subject.as_str(), "z");
    }

    #[test]
    fn decay_lowers_old_items() {
        let mut wm = WorkingMemory::new(2, 0.5);
        wm.insert(item("old", 0.8, 0), 0);
        wm.insert(item("new", 0.5, 2), 2);
        // old: 0.8 * 0.25 = 0.2 at tick 2
        let evicted = wm.insert(item("newer", 0.3, 2), 2).unwrap();
        assert_eq!(evicted.fact.subject.as_str(), "old");
    }

    fn cup(id: &str, conf: f64, tick: u64) -> Fact {
        Fact::triple(id, "isa", "cup")
            .with_confidence(conf)
            .at_tick(tick)
            .with_origin(Origin::Perceived)
    }

    fn cup_pattern() -> Atom {
        Atom::new("isa", Term::var("x"), Term::Const(Object::atom("cup").unwrap()))
    }

    #[test]
    fn retrieval_orders_by_confidence_then_recency() {
        let mut ltm = LongTermMemory::new();
        ltm.semantic.insert(cup("cup1", 0.9, 1)).unwrap();
        ltm.semantic.insert(cup("cup2", 0.9, 5)).unwrap();
        ltm.semantic.insert(cup("cup3", 1.0, 0)).unwrap();
        ltm.semantic.insert(Fact::triple("plate1", "isa", "plate")).unwrap();
        let got: Vec<String> = ltm
            .retrieve(&cup_pattern(), 3)
            .iter()
            .map(|f| f.subject.to_string())
            .collect();
        assert_eq!(got, ["cup3", "cup2", "cup1"]);
        assert_eq!(ltm.retrieve(&cup_pattern(), 1).len(), 1);
        let none = Atom::new("isa", Term::var("x"), Term::Const(Object::atom("bowl").unwrap()));
        assert!(ltm.retrieve(&none, 3).is_empty());
    }

    fn episode(kind: &str, start: u64) -> Episode {
        Episode {
            task_kind: kind.into(),
            instruction: String::new(),
            plan: vec![],
            results: vec![],
            anomalies: vec![],
            outcome: Outcome::Success,
            start_tick: start,
            end_tick: start + 1,
        }
    }

    #[test]
    fn episodes_newest_first_by_kind() {
        let mut ltm = LongTermMemory::new();
        let wm = WorkingMemory::new(4, 0.95);
        for (i, kind) in ["arrange", "fetch", "arrange", "arrange", "fetch", "arrange", "arrange"]
            .iter()
            .enumerate()
        {
            ltm.consolidate(&wm, episode(kind, i as u64), 0.5);
        }
        let starts: Vec<u64> = ltm.retrieve_episodes("arrange", 3).iter().map(|e| e.start_tick).collect();
        assert_eq!(starts, [6, 5, 3]);
        assert_eq!(ltm.retrieve_episodes("fetch", 3).len(), 2);
        assert!(ltm.retrieve_episodes("navigate", 3).is_empty());
    }

    #[test]
    fn consolidation_filters_and_max_merges() {
        let mut ltm = LongTermMemory::new();
        ltm.semantic.insert(cup("cup1", 0.7, 0)).unwrap();
        let mut wm = WorkingMemory::new(8, 0.95);
        wm.insert(WmItem::new(cup("cup1", 0.9, 1), 1.0, 1), 1);
        wm.insert(WmItem::new(cup("cup2", 0.4, 1), 1.0, 1), 1);
        wm.insert(
            WmItem::new(cup("cup3", 1.0, 1).with_origin(Origin::Retrieved), 1.0, 1),
            1,
        );
        ltm.consolidate(&wm, episode("fetch", 0), 0.5);
        assert_eq!(ltm.episodes().len(), 1);
        assert_eq!(ltm.semantic.get(&cup("cup1", 0.0, 0).key()).unwrap().confidence, 0.9);
        assert!(ltm.semantic.get(&cup("cup2", 0.0, 0).key()).is_none());
        assert!(ltm.semantic.get(&cup("cup3", 0.0, 0).key()).is_none());
        let before = ltm.semantic.clone();
        ltm.consolidate(&wm, episode("fetch", 1), 0.5);
        assert_eq!(ltm.semantic, before);
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ltm.kb");
        let mut ltm = LongTermMemory::new();
        ltm.semantic.insert(cup("cup1", 0.75, 3)).unwrap();
        ltm.save_snapshot(&path).unwrap();
        let back = LongTermMemory::load_snapshot(&path).unwrap();
        assert_eq!(back.semantic, ltm.semantic);
    }
}
