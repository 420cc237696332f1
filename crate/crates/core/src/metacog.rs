//! Self-monitoring and self-regulation.
//!
//! `monitor` turns one tick's state into anomalies; `regulate` maps them
//! through a fixed policy table to directives and new attention weights.
//! Both are pure.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kb::{Atom, Dimension, EntityId, Fact, FactKey, Object, Term};
use crate::perceive::AttentionWeights;
use crate::reason::{cell_distance, Cell};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetacogConfig {
    /// Minimum top-prediction probability for a mismatch to count.
    pub prediction_threshold: f64,
    /// Cells between a predicted and an observed position before the
    /// prediction counts as violated.
    pub position_tolerance: f64,
    pub stale_ttl: u64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub reweight_delta: f64,
    pub decay_factor: f64,
}

impl Default for MetacogConfig {
    fn default() -> Self {
        Self {
            prediction_threshold: 0.6,
            position_tolerance: 2.0,
            stale_ttl: 50,
            weight_min: 0.1,
            weight_max: 0.8,
            reweight_delta: 0.1,
            decay_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyKind {
    PredictionMismatch,
    Contradiction,
    ActionFailure,
    TemporalCycle,
    StaleWorkingMemory,
}

impl AnomalyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::PredictionMismatch => "prediction_mismatch",
            AnomalyKind::Contradiction => "contradiction",
            AnomalyKind::ActionFailure => "action_failure",
            AnomalyKind::TemporalCycle => "temporal_cycle",
            AnomalyKind::StaleWorkingMemory => "stale_working_memory",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub tick: u64,
    /// Offending facts, events or actions, rendered as text.
    pub payload: Vec<String>,
    pub severity: f64,
    /// Retrieval pattern attached to fact-level anomalies.
    pub pattern: Option<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    ReweightAttention { dimension: Dimension, delta: f64 },
    TriggerReplan,
    RetrieveFromLtm { pattern: Atom },
    DecayPredictionConfidence { factor: f64 },
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::ReweightAttention { dimension, delta } => {
                write!(f, "reweight_attention({}, {delta:+.6})", dimension.as_str())
            }
            Directive::TriggerReplan => f.write_str("trigger_replan"),
            Directive::RetrieveFromLtm { pattern } => write!(f, "retrieve_from_ltm({pattern})"),
            Directive::DecayPredictionConfidence { factor } => {
                write!(f, "decay_prediction_confidence({factor:.6})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IssuedDirective {
    pub directive: Directive,
    pub tick: u64,
    /// Index into the anomaly list passed to `regulate`.
    pub cause: usize,
}

/// Top predicted next event for one entity, made on the previous tick.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPrediction {
    pub entity: EntityId,
    pub kind: String,
    pub probability: f64,
}

/// Extrapolated position for one entity at the current tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionPrediction {
    pub entity: EntityId,
    pub cell: Cell,
    pub low_confidence: bool,
}

/// Everything `monitor` looks at for one tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickState {
    pub tick: u64,
    pub event_predictions: Vec<EventPrediction>,
    /// Event kinds that started this tick, per entity.
    pub observed_events: BTreeMap<EntityId, Vec<String>>,
    pub position_predictions: Vec<PositionPrediction>,
    pub observed_positions: BTreeMap<EntityId, Cell>,
    pub contradictions: Vec<(Fact, Fact)>,
    pub action_failure: Option<String>,
    pub temporal_cycle: Option<Vec<String>>,
    /// Ages of goal-relevant working-memory facts.
    pub goal_fact_ages: Vec<(FactKey, u64)>,
}

fn open_pattern(key: &FactKey) -> Atom {
    Atom::new(
        &key.relation,
        Term::Const(Object::Atom(key.subject.clone())),
        Term::var("o"),
    )
}

pub fn monitor(state: &TickState, cfg: &MetacogConfig) -> Vec<Anomaly> {
    let tick = state.tick;
    let mut out = Vec::new();

    for p in &state.event_predictions {
        if p.probability < cfg.prediction_threshold {
            continue;
        }
        let Some(seen) = state.observed_events.get(&p.entity) else {
            continue;
        };
        if let Some(other) = seen.iter().find(|k| **k != p.kind) {
            out.push(Anomaly {
                kind: AnomalyKind::PredictionMismatch,
                tick,
                payload: vec![
                    format!("{} predicted {} p={:.6}", p.entity, p.kind, p.probability),
                    format!("{} observed {other}", p.entity),
                ],
                severity: p.probability.clamp(0.0, 1.0),
                pattern: None,
            });
        }
    }

    for p in &state.position_predictions {
        let Some(&seen) = state.observed_positions.get(&p.entity) else {
            continue;
        };
        if cell_distance(p.cell, seen) > cfg.position_tolerance {
            out.push(Anomaly {
                kind: AnomalyKind::PredictionMismatch,
                tick,
                payload: vec![
                    format!("{} predicted at ({}, {})", p.entity, p.cell.0, p.cell.1),
                    format!("{} observed at ({}, {})", p.entity, seen.0, seen.1),
                ],
                severity: if p.low_confidence { 0.5 } else { 1.0 },
                pattern: None,
            });
        }
    }

    for (a, b) in &state.contradictions {
        out.push(Anomaly {
            kind: AnomalyKind::Contradiction,
            tick,
            payload: vec![a.key().to_string(), b.key().to_string()],
            severity: 0.8,
            pattern: Some(open_pattern(&a.key())),
        });
    }

    if let Some(action) = &state.action_failure {
        out.push(Anomaly {
            kind: AnomalyKind::ActionFailure,
            tick,
            payload: vec![action.clone()],
            severity: 1.0,
            pattern: None,
        });
    }

    if let Some(cycle) = &state.temporal_cycle {
        out.push(Anomaly {
            kind: AnomalyKind::TemporalCycle,
            tick,
            payload: if cycle.is_empty() { vec!["cycle".into()] } else { cycle.clone() },
            severity: 0.9,
            pattern: None,
        });
    }

    for (key, age) in &state.goal_fact_ages {
        if *age > cfg.stale_ttl {
            out.push(Anomaly {
                kind: AnomalyKind::StaleWorkingMemory,
                tick,
                payload: vec![format!("{key} age {age}")],
                severity: 0.3,
                pattern: Some(open_pattern(key)),
            });
        }
    }
    out
}

fn policy(anomaly: &Anomaly, cfg: &MetacogConfig) -> Vec<Directive> {
    match anomaly.kind {
        AnomalyKind::PredictionMismatch => vec![
            Directive::DecayPredictionConfidence {
                factor: cfg.decay_factor,
            },
            Directive::ReweightAttention {
                dimension: Dimension::Temporal,
                delta: cfg.reweight_delta,
            },
        ],
        AnomalyKind::Contradiction => {
            let mut d: Vec<Directive> = anomaly
                .pattern
                .iter()
                .map(|p| Directive::RetrieveFromLtm { pattern: p.clone() })
                .collect();
            d.push(Directive::ReweightAttention {
                dimension: Dimension::Spatial,
                delta: cfg.reweight_delta,
            });
            d
        }
        AnomalyKind::ActionFailure | AnomalyKind::TemporalCycle => vec![Directive::TriggerReplan],
        AnomalyKind::StaleWorkingMemory => anomaly
            .pattern
            .iter()
            .map(|p| Directive::RetrieveFromLtm { pattern: p.clone() })
            .collect(),
    }
}

/// Apply the policy table. Identical directives within one call are
/// issued once, citing the first anomaly that produced them.
pub fn regulate(
    anomalies: &[Anomaly],
    weights: &AttentionWeights,
    cfg: &MetacogConfig,
) -> (Vec<IssuedDirective>, AttentionWeights) {
    let mut issued: Vec<IssuedDirective> = Vec::new();
    for (idx, anomaly) in anomalies.iter().enumerate() {
        for directive in policy(anomaly, cfg) {
            if issued.iter().all(|d| d.directive != directive) {
                issued.push(IssuedDirective {
                    directive,
                    tick: anomaly.tick,
                    cause: idx,
                });
            }
        }
    }
    let mut w = weights.as_array();
    let mut touched = false;
    for d in &issued {
        if let Directive::ReweightAttention { dimension, delta } = d.directive {
            let i = match dimension {
                Dimension::Temporal => 0,
                Dimension::Spatial => 1,
                Dimension::Conceptual => 2,
                Dimension::Unified => continue,
            };
            w[i] += delta;
            touched = true;
        }
    }
    let new = if touched {
        AttentionWeights::from_array(project_weights(w, cfg.weight_min, cfg.weight_max))
    } else {
        *weights
    };
    (issued, new)
}

/// Renormalize to sum 1, then clamp each entry into `[lo, hi]` while
/// redistributing the excess proportionally over the unclamped entries.
pub fn project_weights(raw: [f64; 3], lo: f64, hi: f64) -> [f64; 3] {
    let mut w = raw.map(|x| if x.is_finite() { x.max(0.0) } else { 0.0 });
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return [1.0 / 3.0; 3];
    }
    for x in &mut w {
        *x /= total;
    }
    let mut fixed = [false; 3];
    for _ in 0..3 {
        let mut changed = false;
        for i in 0..3 {
            if !fixed[i] && (w[i] < lo || w[i] > hi) {
                w[i] = w[i].clamp(lo, hi);
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let fixed_mass: f64 = (0..3).filter(|&i| fixed[i]).map(|i| w[i]).sum();
        let free: Vec<usize> = (0..3).filter(|&i| !fixed[i]).collect();
        if free.is_empty() {
            break;
        }
        let free_mass: f64 = free.iter().map(|&i| w[i]).sum();
        let target = 1.0 - fixed_mass;
        for &i in &free {
            w[i] = if free_mass > 0.0 {
                w[i] * target / free_mass
            } else {
                target / free.len() as f64
            };
        }
    }
    // absorb rounding drift in the entry with the most room
    let drift = 1.0 - w.iter().sum::<f64>();
    if drift != 0.0 {
        let i = (0..3)
            .max_by(|&a, &b| {
                let room = |k: usize| if drift > 0.0 { hi - w[k] } else { w[k] - lo };
                room(a).total_cmp(&room(b))
            })
            .expect("three entries");
        w[i] += drift;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn cfg() -> MetacogConfig {
        MetacogConfig::default()
    }

    fn anomaly(kind: AnomalyKind) -> Anomaly {
        Anomaly {
            kind,
            tick: 3,
            payload: vec!["x".into()],
            severity: 0.5,
            pattern: Some(Atom::new("isa", Term::Const(Object::atom("a").unwrap()), Term::var("o"))),
        }
    }

    #[test]
    fn confident_wrong_prediction_is_flagged() {
        let state = TickState {
            tick: 4,
            event_predictions: vec![EventPrediction {
                entity: id("cart"),
                kind: "move".into(),
                probability: 0.9,
            }],
            observed_events: BTreeMap::from([(id("cart"), vec!["stop".into()])]),
            ..TickState::default()
        };
        let found = monitor(&state, &cfg());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, AnomalyKind::PredictionMismatch);
        assert_eq!(found[0].severity, 0.9);
    }

    #[test]
    fn weak_prediction_is_not_flagged() {
        let state = TickState {
            event_predictions: vec![EventPrediction {
                entity: id("cart"),
                kind: "move".into(),
                probability: 0.5,
            }],
            observed_events: BTreeMap::from([(id("cart"), vec!["stop".into()])]),
            ..TickState::default()
        };
        assert!(monitor(&state, &cfg()).is_empty());
    }

    #[test]
    fn clean_tick_is_quiet() {
        assert!(monitor(&TickState::default(), &cfg()).is_empty());
    }

    #[test]
    fn position_jump_is_flagged() {
        let state = TickState {
            position_predictions: vec![PositionPrediction {
                entity: id("box1"),
                cell: (2, 2),
                low_confidence: false,
            }],
            observed_positions: BTreeMap::from([(id("box1"), (7, 2))]),
            ..TickState::default()
        };
        let found = monitor(&state, &cfg());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].severity, 1.0);
    }

    #[test]
    fn stale_goal_fact_is_flagged_after_ttl() {
        let key = Fact::triple("plate1", "OnTopOf", "plate2").key();
        let state = TickState {
            goal_fact_ages: vec![(key.clone(), 50), (key.clone(), 51)],
            ..TickState::default()
        };
        let found = monitor(&state, &cfg());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, AnomalyKind::StaleWorkingMemory);
        assert_eq!(found[0].severity, 0.3);
    }

    #[test]
    fn action_failure_yields_one_replan() {
        let (d, w) = regulate(&[anomaly(AnomalyKind::ActionFailure)], &AttentionWeights::uniform(), &cfg());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].directive, Directive::TriggerReplan);
        assert_eq!(d[0].cause, 0);
        assert_eq!(w, AttentionWeights::uniform());
    }

    #[test]
    fn no_anomalies_no_change() {
        let w0 = AttentionWeights::new(0.5, 0.3, 0.2).unwrap();
        let (d, w) = regulate(&[], &w0, &cfg());
        assert!(d.is_empty());
        assert_eq!(w, w0);
    }

    #[test]
    fn duplicate_mismatches_collapse() {
        let a = anomaly(AnomalyKind::PredictionMismatch);
        let (d, w) = regulate(&[a.clone(), a], &AttentionWeights::uniform(), &cfg());
        let decays = d
            .iter()
            .filter(|x| matches!(x.directive, Directive::DecayPredictionConfidence { .. }))
            .count();
        assert_eq!(decays, 1);
        assert_eq!(d.len(), 2);
        // (1/3 + 0.1) / 1.1 and 1/3 / 1.1
        let expected_t = (1.0 / 3.0 + 0.1) / 1.1;
        let expected_o = (1.0 / 3.0) / 1.1;
        assert!((w.temporal - expected_t).abs() < 1e-12);
        assert!((w.spatial - expected_o).abs() < 1e-12);
        assert!((w.conceptual - expected_o).abs() < 1e-12);
    }

    #[test]
    fn every_anomaly_kind_maps_to_its_directive() {
        let cases = [
            (AnomalyKind::PredictionMismatch, "decay"),
            (AnomalyKind::Contradiction, "retrieve"),
            (AnomalyKind::ActionFailure, "replan"),
            (AnomalyKind::TemporalCycle, "replan"),
            (AnomalyKind::StaleWorkingMemory, "retrieve"),
        ];
        for (kind, expected) in cases {
            let (d, _) = regulate(&[anomaly(kind)], &AttentionWeights::uniform(), &cfg());
            let hit = d.iter().any(|x| {
                matches!(
                    (&x.directive, expected),
                    (Directive::DecayPredictionConfidence { .. }, "decay")
                        | (Directive::RetrieveFromLtm { .. }, "retrieve")
                        | (Directive::TriggerReplan, "replan")
                )
            });
            assert!(hit, "{kind:?}");
        }
    }

    #[test]
    fn projection_respects_clamps() {
        let w = project_weights([0.0, 0.0, 1.0], 0.1, 0.8);
        assert!((w[0] - 0.1).abs() < 1e-12 && (w[2] - 0.8).abs() < 1e-12);
        let w = project_weights([0.9, 0.3, 0.0], 0.1, 0.8);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|x| (0.1 - 1e-12..=0.8 + 1e-12).contains(x)));
    }
}
