//! Line-delimited run traces and their replay.
//!
//! Records, one JSON object per line, in this order: a `header`, then
//! `tick` records interleaved with `plan` (start of a decision cycle) and
//! `episode` (end of one) records, and a closing `summary`.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::agent::{prepare, Engine, FailureNote, PlanOutcome, PlanProvider, PlannerChoice, RunSpec, RunStatus, Setup};
use crate::canon::Json;
use crate::decide::{parse_plan_response, plan_to_wire, PlanSource, TaskInstruction};
use crate::memory::Episode;
use crate::metacog::{Anomaly, IssuedDirective};
use crate::perceive::{AttentionWeights, BoundObject};
use crate::kb::EntityId;
use crate::world::ActionResult;

pub const TRACE_VERSION: i64 = 1;

fn opt_str(s: Option<&str>) -> Json {
    s.map(Json::str).unwrap_or(Json::Null)
}

pub(crate) fn header(setup: &Setup) -> Json {
    let spec = &setup.spec;
    Json::obj()
        .field("record", Json::str("header"))
        .field("version", Json::Int(TRACE_VERSION))
        .field("scenario", Json::str(spec.scenario.display().to_string()))
        .field("config_path", opt_str(spec.config.as_ref().and_then(|p| p.to_str())))
        .field("seed", Json::Int(setup.seed as i64))
        .field("max_ticks", Json::Int(setup.config.run.max_ticks as i64))
        .field("planner", Json::str(spec.planner.to_string()))
        .field("no_hazard", Json::Bool(spec.no_hazard))
        .field("noise", Json::Bool(setup.config.sensor.noise))
        .field(
            "overrides",
            Json::Arr(
                spec.overrides
                    .iter()
                    .map(|(k, v)| Json::strs([k.clone(), v.clone()]))
                    .collect(),
            ),
        )
        .field("config", setup.config.echo())
        .build()
}

pub(crate) struct TickRecord<'a> {
    pub tick: u64,
    pub task: Option<(usize, u32)>,
    pub obs: String,
    pub bound: &'a [BoundObject],
    pub inferences: Vec<String>,
    pub hazards: Vec<String>,
    pub risks: Vec<(EntityId, u64)>,
    pub anomalies: &'a [Anomaly],
    pub directives: &'a [IssuedDirective],
    pub weights: AttentionWeights,
    pub step: Option<(usize, &'a ActionResult)>,
    pub wm: usize,
}

impl TickRecord<'_> {
    pub fn to_json(&self) -> Json {
        let (task, cycle) = match self.task {
            Some((t, c)) => (Json::Int(t as i64), Json::Int(c as i64)),
            None => (Json::Null, Json::Null),
        };
        let top = self
            .bound
            .iter()
            .take(5)
            .map(|b| {
                Json::obj()
                    .field("entity", Json::str(b.entity.as_str()))
                    .field("score", Json::Float(b.score))
                    .build()
            })
            .collect();
        let anomalies = self
            .anomalies
            .iter()
            .map(|a| {
                Json::obj()
                    .field("kind", Json::str(a.kind.as_str()))
                    .field("severity", Json::Float(a.severity))
                    .field("payload", Json::strs(a.payload.iter().cloned()))
                    .build()
            })
            .collect();
        let directives = self
            .directives
            .iter()
            .map(|d| {
                Json::obj()
                    .field("directive", Json::str(d.directive.to_string()))
                    .field("cause", Json::Int(d.cause as i64))
                    .build()
            })
            .collect();
        let (action, result) = match self.step {
            None => (Json::Null, Json::Null),
            Some((i, r)) => (
                Json::str(r.action.to_string()),
                Json::obj()
                    .field("step", Json::Int(i as i64))
                    .field("status", Json::str(if r.ok { "ok" } else { "failed" }))
                    .field("reason", opt_str(r.reason.as_deref()))
                    .field("instability", Json::Bool(r.instability))
                    .field(
                        "events",
                        Json::strs(r.events.iter().map(|e| format!("{}({})", e.kind, e.entity))),
                    )
                    .build(),
            ),
        };
        let w = self.weights.as_array();
        Json::obj()
            .field("record", Json::str("tick"))
            .field("tick", Json::Int(self.tick as i64))
            .field("task", task)
            .field("cycle", cycle)
            .field("obs", Json::str(self.obs.clone()))
            .field("bound", Json::Int(self.bound.len() as i64))
            .field("top", Json::Arr(top))
            .field("inferences", Json::strs(self.inferences.iter().cloned()))
            .field("hazards", Json::strs(self.hazards.iter().cloned()))
            .field(
                "risks",
                Json::Arr(
                    self.risks
                        .iter()
                        .map(|(e, t)| Json::Arr(vec![Json::str(e.as_str()), Json::Int(*t as i64)]))
                        .collect(),
                ),
            )
            .field("anomalies", Json::Arr(anomalies))
            .field("directives", Json::Arr(directives))
            .field("weights", Json::Arr(w.iter().map(|x| Json::Float(*x)).collect()))
            .field("action", action)
            .field("result", result)
            .field("wm", Json::Int(self.wm as i64))
            .build()
    }
}

pub(crate) fn plan_record(tick: u64, task: usize, cycle: u32, query_digest: &str, outcome: &PlanOutcome) -> Json {
    let b = Json::obj()
        .field("record", Json::str("plan"))
        .field("tick", Json::Int(tick as i64))
        .field("task", Json::Int(task as i64))
        .field("cycle", Json::Int(cycle as i64))
        .field("query", Json::str(query_digest));
    match outcome {
        Ok(plan) => {
            let steps = Json::from_value(
                &serde_json::from_str::<Value>(&plan_to_wire(plan)).expect("plan renders as JSON")["steps"],
            );
            b.field("source", Json::str(plan.source.as_str())).field("steps", steps).build()
        }
        Err(note) => b
            .field("failure", Json::str(note.tag.clone()))
            .field("detail", Json::str(note.detail.clone()))
            .build(),
    }
}

pub(crate) fn episode_record(task: usize, cycle: u32, e: &Episode) -> Json {
    Json::obj()
        .field("record", Json::str("episode"))
        .field("task", Json::Int(task as i64))
        .field("cycle", Json::Int(cycle as i64))
        .field("kind", Json::str(e.task_kind.clone()))
        .field("outcome", Json::str(e.outcome.as_str()))
        .field("start", Json::Int(e.start_tick as i64))
        .field("end", Json::Int(e.end_tick as i64))
        .field("plan", Json::strs(e.plan.iter().cloned()))
        .field("results", Json::strs(e.results.iter().cloned()))
        .field("anomalies", Json::strs(e.anomalies.iter().cloned()))
        .build()
}

/// Task index, task, and each goal condition with its verdict.
pub(crate) type GoalCheck<'a> = (usize, &'a TaskInstruction, Vec<(String, bool)>);

pub(crate) fn summary_record(
    goals: &[GoalCheck],
    episodes: usize,
    status: RunStatus,
    ticks: u64,
) -> Json {
    let goals = goals
        .iter()
        .map(|(i, t, conds)| {
            Json::obj()
                .field("task", Json::Int(*i as i64))
                .field("kind", Json::str(t.kind.as_str()))
                .field("met", Json::Bool(conds.iter().all(|(_, ok)| *ok)))
                .field(
                    "conditions",
                    Json::Arr(
                        conds
                            .iter()
                            .map(|(c, ok)| {
                                Json::obj()
                                    .field("condition", Json::str(c.clone()))
                                    .field("ok", Json::Bool(*ok))
                                    .build()
                            })
                            .collect(),
                    ),
                )
                .build()
        })
        .collect();
    Json::obj()
        .field("record", Json::str("summary"))
        .field("episodes", Json::Int(episodes as i64))
        .field("goal", Json::Arr(goals))
        .field("status", Json::str(status.as_str()))
        .field("exit", Json::Int(status.exit_code() as i64))
        .field("ticks", Json::Int(ticks as i64))
        .build()
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot re-run trace: {0}")]
    Rerun(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// 1-based line number in the trace.
    pub line: usize,
    pub record: String,
    pub tick: Option<u64>,
    /// e.g. `weights[1]` or `top[0].score`; empty when a line is missing.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub lines: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn equal(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Parsed trace, checked for shape: header first, summary last, every line
/// a JSON object with a `record` field.
pub struct Trace {
    pub lines: Vec<String>,
    pub records: Vec<Value>,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Trace, ReplayError> {
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        let mut records = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let v: Value = serde_json::from_str(line).map_err(|e| ReplayError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if v.get("record").and_then(Value::as_str).is_none() {
                return Err(ReplayError::Malformed {
                    line: i + 1,
                    reason: "no record type".into(),
                });
            }
            records.push(v);
        }
        let kind = |v: &Value| v["record"].as_str().unwrap_or_default().to_string();
        match records.first().map(kind).as_deref() {
            Some("header") => {}
            _ => {
                return Err(ReplayError::Malformed {
                    line: 1,
                    reason: "missing header".into(),
                })
            }
        }
        if records.last().map(kind).as_deref() != Some("summary") {
            return Err(ReplayError::Malformed {
                line: lines.len(),
                reason: "truncated: no summary record".into(),
            });
        }
        Ok(Trace { lines, records })
    }

    pub fn load(path: &Path) -> Result<Trace, ReplayError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReplayError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Trace::parse(&text)
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
        self.records.iter().filter(move |r| r["record"] == kind)
    }

    pub fn header(&self) -> &Value {
        &self.records[0]
    }

    pub fn summary(&self) -> &Value {
        self.records.last().expect("parse guarantees a summary")
    }

    /// The run inputs recorded in the header.
    pub fn run_spec(&self) -> Result<RunSpec, ReplayError> {
        let h = self.header();
        let bad = |field: &str| ReplayError::Malformed {
            line: 1,
            reason: format!("header field {field:?} missing or mistyped"),
        };
        let planner = h["planner"]
            .as_str()
            .and_then(PlannerChoice::parse)
            .ok_or_else(|| bad("planner"))?;
        let overrides = h["overrides"]
            .as_array()
            .ok_or_else(|| bad("overrides"))?
            .iter()
            .map(|p| match (p[0].as_str(), p[1].as_str()) {
                (Some(k), Some(v)) => Ok((k.to_string(), v.to_string())),
                _ => Err(bad("overrides")),
            })
            .collect::<Result<_, _>>()?;
        Ok(RunSpec {
            scenario: PathBuf::from(h["scenario"].as_str().ok_or_else(|| bad("scenario"))?),
            config: h["config_path"].as_str().map(PathBuf::from),
            seed: Some(h["seed"].as_u64().ok_or_else(|| bad("seed"))?),
            max_ticks: Some(h["max_ticks"].as_u64().ok_or_else(|| bad("max_ticks"))?),
            no_hazard: h["no_hazard"].as_bool().ok_or_else(|| bad("no_hazard"))?,
            noise: Some(h["noise"].as_bool().ok_or_else(|| bad("noise"))?),
            planner,
            overrides,
        })
    }

    /// Plans in the order they were obtained.
    pub fn recorded_plans(&self) -> Result<VecDeque<PlanOutcome>, ReplayError> {
        let mut out = VecDeque::new();
        for (i, r) in self.records.iter().enumerate() {
            if r["record"] != "plan" {
                continue;
            }
            let bad = |reason: String| ReplayError::Malformed { line: i + 1, reason };
            if let Some(tag) = r["failure"].as_str() {
                out.push_back(Err(FailureNote {
                    tag: tag.to_string(),
                    detail: r["detail"].as_str().unwrap_or_default().to_string(),
                }));
                continue;
            }
            let source = match r["source"].as_str() {
                Some("scripted") => PlanSource::Scripted,
                Some("external") => PlanSource::External,
                _ => return Err(bad("plan without source".into())),
            };
            let steps = Json::obj().field("steps", Json::from_value(&r["steps"])).build().render();
            let plan = parse_plan_response(&steps, source).map_err(|e| bad(e.to_string()))?;
            out.push_back(Ok(plan));
        }
        Ok(out)
    }
}

/// First differing JSON path between two values, `None` when equal.
pub fn first_difference(expected: &Value, actual: &Value) -> Option<String> {
    fn walk(a: &Value, b: &Value, path: String) -> Option<String> {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                for (k, va) in x {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    match y.get(k) {
                        Some(vb) => {
                            if let Some(d) = walk(va, vb, p) {
                                return Some(d);
                            }
                        }
                        None => return Some(p),
                    }
                }
                y.keys()
                    .find(|k| !x.contains_key(*k))
                    .map(|k| if path.is_empty() { k.clone() } else { format!("{path}.{k}") })
            }
            (Value::Array(x), Value::Array(y)) => {
                for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                    if let Some(d) = walk(va, vb, format!("{path}[{i}]")) {
                        return Some(d);
                    }
                }
                (x.len() != y.len()).then(|| format!("{path}[{}]", x.len().min(y.len())))
            }
            // numbers compare by text so 0.1 and 0.100000 differ as written
            _ => (a != b || *a != *b).then_some(path),
        }
    }
    walk(expected, actual, String::new())
}

/// Re-run the engine from the trace header and compare line by line.
/// Scripted plans are recomputed; external plans are taken from the trace.
pub fn replay(path: &Path) -> Result<ReplayReport, ReplayError> {
    let trace = Trace::load(path)?;
    let spec = trace.run_spec()?;
    let setup = prepare(&spec).map_err(|e| ReplayError::Rerun(e.to_string()))?;
    let mut plans = match spec.planner {
        PlannerChoice::Scripted => PlanProvider::live(&PlannerChoice::Scripted, &setup.config),
        _ => PlanProvider::Recorded(trace.recorded_plans()?),
    };
    let report = Engine::new(&setup)
        .run(&mut plans)
        .map_err(|e| ReplayError::Rerun(e.to_string()))?;
    Ok(compare(&trace, &report.lines))
}

pub fn compare(trace: &Trace, fresh: &[String]) -> ReplayReport {
    let n = trace.lines.len().max(fresh.len());
    for i in 0..n {
        let (Some(old), Some(new)) = (trace.lines.get(i), fresh.get(i)) else {
            let rec = trace.records.get(i).or(trace.records.last());
            return ReplayReport {
                lines: trace.lines.len(),
                divergence: Some(Divergence {
                    line: i + 1,
                    record: rec.and_then(|r| r["record"].as_str()).unwrap_or_default().to_string(),
                    tick: rec.and_then(|r| r["tick"].as_u64()),
                    path: String::new(),
                }),
            };
        };
        if old == new {
            continue;
        }
        let expected = &trace.records[i];
        let actual: Value = serde_json::from_str(new).unwrap_or(Value::Null);
        let path = first_difference(expected, &actual).unwrap_or_default();
        return ReplayReport {
            lines: trace.lines.len(),
            divergence: Some(Divergence {
                line: i + 1,
                record: expected["record"].as_str().unwrap_or_default().to_string(),
                tick: expected["tick"].as_u64(),
                path,
            }),
        };
    }
    ReplayReport {
        lines: trace.lines.len(),
        divergence: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_paths() {
        let a: Value = serde_json::from_str(r#"{"tick":3,"top":[{"entity":"a","score":0.5}],"w":[1,2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"tick":3,"top":[{"entity":"a","score":0.6}],"w":[1,2]}"#).unwrap();
        assert_eq!(first_difference(&a, &b).as_deref(), Some("top[0].score"));
        assert_eq!(first_difference(&a, &a), None);
        let c: Value = serde_json::from_str(r#"{"tick":3,"top":[{"entity":"a","score":0.5}],"w":[1]}"#).unwrap();
        assert_eq!(first_difference(&a, &c).as_deref(), Some("w[1]"));
    }

    #[test]
    fn truncated_trace_is_rejected() {
        let text = "{\"record\":\"header\"}\n{\"record\":\"tick\",\"tick\":0}\n";
        assert!(matches!(Trace::parse(text), Err(ReplayError::Malformed { .. })));
        let cut = "{\"record\":\"header\"}\n{\"record\":\"tick\",\"ti";
        assert!(matches!(Trace::parse(cut), Err(ReplayError::Malformed { line: 2, .. })));
    }
}
