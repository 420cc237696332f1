//! Line-oriented JSON protocol between the agent and a planner.
//!
//! Query: one line, fields `version, task, facts, hazards, episodes,
//! actions`. Facts travel as `[subject, relation, object, confidence, tick]`.
//! Response: `{"steps":[{"action":..,"args":[..],"effects":["Rel(s, o)"]}]}`
//! or `{"error":"..."}`. Validation is all-or-nothing.

use serde_json::Value;

use super::{
    interpret_task, EpisodeSummary, Plan, PlanSource, PlanStep, PlannerFailure, PlannerQuery,
};
use crate::canon::Json;
use crate::kb::{EntityId, Fact, FactKey, Object, Origin, Term};
use crate::rules::parse_atom;
use crate::world::{Action, TaskSpec, ACTION_CATALOG};

pub const PROTOCOL_VERSION: u32 = 1;

fn fact_json(f: &Fact) -> Json {
    Json::Arr(vec![
        Json::str(f.subject.as_str()),
        Json::str(f.relation.clone()),
        match &f.object {
            Object::Atom(a) => Json::str(a.as_str()),
            Object::Int(n) => Json::Int(*n),
        },
        Json::Float(f.confidence),
        Json::Int(f.tick as i64),
    ])
}

impl PlannerQuery {
    pub fn to_json(&self) -> Json {
        let task = &self.task;
        Json::obj()
            .field("version", Json::Int(self.version as i64))
            .field(
                "task",
                Json::obj()
                    .field("kind", Json::str(task.kind.as_str()))
                    .field("agent", Json::str(task.agent.as_str()))
                    .field(
                        "params",
                        Json::Obj(task.params.iter().map(|(k, v)| (k.clone(), Json::str(v.clone()))).collect()),
                    )
                    .field("goal", Json::strs(task.goal.iter().map(|g| g.to_string())))
                    .build(),
            )
            .field("facts", Json::Arr(self.facts.iter().map(fact_json).collect()))
            .field("hazards", Json::Arr(self.hazards.iter().map(fact_json).collect()))
            .field(
                "episodes",
                Json::Arr(
                    self.episodes
                        .iter()
                        .map(|e| {
                            Json::obj()
                                .field("task", Json::str(e.task.clone()))
                                .field("outcome", Json::str(e.outcome.clone()))
                                .field("steps", Json::Int(e.steps as i64))
                                .field("start", Json::Int(e.start as i64))
                                .field("end", Json::Int(e.end as i64))
                                .build()
                        })
                        .collect(),
                ),
            )
            .field(
                "actions",
                Json::Arr(
                    ACTION_CATALOG
                        .iter()
                        .map(|(name, roles)| {
                            Json::obj()
                                .field("name", Json::str(*name))
                                .field("args", Json::strs(roles.iter().copied()))
                                .build()
                        })
                        .collect(),
                ),
            )
            .build()
    }

    /// Single line, no trailing newline.
    pub fn to_wire(&self) -> String {
        self.to_json().render()
    }

    /// Inverse of [`to_wire`](Self::to_wire). Fact origins are not carried
    /// and come back as perceived.
    pub fn parse_wire(line: &str) -> Result<PlannerQuery, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| format!("not JSON: {e}"))?;
        let version = v["version"].as_u64().ok_or("missing version")? as u32;
        if version != PROTOCOL_VERSION {
            return Err(format!("unsupported protocol version {version}"));
        }
        let t = &v["task"];
        let kind = t["kind"].as_str().ok_or("missing task.kind")?;
        let agent = EntityId::new(t["agent"].as_str().ok_or("missing task.agent")?).map_err(|e| e.to_string())?;
        let params = t["params"]
            .as_object()
            .ok_or("missing task.params")?
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_str().ok_or(format!("task.params.{k} not a string"))?.to_string())))
            .collect::<Result<_, String>>()?;
        let spec = TaskSpec {
            kind: kind.to_string(),
            params,
            line: 0,
        };
        let task = interpret_task(&spec, &agent).map_err(|e| e.to_string())?;
        let facts = |field: &str| -> Result<Vec<Fact>, String> {
            v[field]
                .as_array()
                .ok_or(format!("missing {field}"))?
                .iter()
                .enumerate()
                .map(|(i, f)| parse_fact(f).map_err(|e| format!("{field}[{i}]: {e}")))
                .collect()
        };
        let episodes = v["episodes"]
            .as_array()
            .ok_or("missing episodes")?
            .iter()
            .map(|e| EpisodeSummary {
                task: e["task"].as_str().unwrap_or_default().to_string(),
                outcome: e["outcome"].as_str().unwrap_or_default().to_string(),
                steps: e["steps"].as_u64().unwrap_or(0) as usize,
                start: e["start"].as_u64().unwrap_or(0),
                end: e["end"].as_u64().unwrap_or(0),
            })
            .collect();
        Ok(PlannerQuery {
            version,
            task,
            hazards: facts("hazards")?,
            facts: facts("facts")?,
            episodes,
        })
    }
}

fn parse_fact(v: &Value) -> Result<Fact, String> {
    let a = v.as_array().filter(|a| a.len() == 5).ok_or("expected 5-element array")?;
    let subject = EntityId::new(a[0].as_str().ok_or("subject not a string")?).map_err(|e| e.to_string())?;
    let relation = a[1].as_str().ok_or("relation not a string")?;
    let object = match &a[2] {
        Value::String(s) => Object::atom(s).map_err(|e| e.to_string())?,
        Value::Number(n) => Object::Int(n.as_i64().ok_or("object not an integer")?),
        _ => return Err("bad object".into()),
    };
    let fact = Fact::new(subject, relation, object)
        .with_confidence(a[3].as_f64().ok_or("confidence not a number")?)
        .at_tick(a[4].as_u64().ok_or("tick not an integer")?)
        .with_origin(Origin::Perceived);
    fact.validate().map_err(|e| e.to_string())?;
    Ok(fact)
}

pub fn plan_to_wire(plan: &Plan) -> String {
    plan_json(plan).render()
}

pub(crate) fn plan_json(plan: &Plan) -> Json {
    Json::obj()
        .field(
            "steps",
            Json::Arr(
                plan.steps
                    .iter()
                    .map(|s| {
                        Json::obj()
                            .field("action", Json::str(s.action.name()))
                            .field("args", Json::strs(s.action.args()))
                            .field("effects", Json::strs(s.effects.iter().map(|k| k.to_string())))
                            .build()
                    })
                    .collect(),
            ),
        )
        .build()
}

fn malformed(path: impl Into<String>, reason: impl Into<String>) -> PlannerFailure {
    PlannerFailure::Malformed {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Validate a response line. Any defect rejects the whole plan.
pub fn parse_plan_response(line: &str, source: PlanSource) -> Result<Plan, PlannerFailure> {
    let v: Value = serde_json::from_str(line.trim()).map_err(|e| malformed("$", format!("not JSON: {e}")))?;
    let obj = v.as_object().ok_or_else(|| malformed("$", "expected an object"))?;
    if let Some(err) = obj.get("error") {
        let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
        return Err(PlannerFailure::Refused(msg));
    }
    let steps = obj
        .get("steps")
        .ok_or_else(|| malformed("steps", "missing"))?
        .as_array()
        .ok_or_else(|| malformed("steps", "expected an array"))?;
    let mut out = Vec::with_capacity(steps.len());
    for (i, step) in steps.iter().enumerate() {
        let at = |field: &str| format!("steps[{i}].{field}");
        let name = step
            .get("action")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(at("action"), "missing or not a string"))?;
        let args: Vec<String> = match step.get("args") {
            None => vec![],
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    x.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| malformed(format!("steps[{i}].args[{j}]"), "not a string"))
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(malformed(at("args"), "expected an array")),
        };
        let action = Action::from_parts(name, &args).map_err(|e| malformed(at("action"), e))?;
        let effects = match step.get("effects") {
            None => vec![],
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let path = format!("steps[{i}].effects[{j}]");
                    let text = x.as_str().ok_or_else(|| malformed(&path, "not a string"))?;
                    let atom = parse_atom(text).map_err(|e| malformed(&path, e))?;
                    match (atom.subject, atom.object) {
                        (Term::Const(Object::Atom(subject)), Term::Const(object)) => Ok(FactKey {
                            subject,
                            relation: atom.relation,
                            object,
                        }),
                        _ => Err(malformed(&path, "effects must be ground")),
                    }
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(malformed(at("effects"), "expected an array")),
        };
        out.push(PlanStep { action, effects });
    }
    Ok(Plan { steps: out, source })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn sample_query() -> PlannerQuery {
        let spec = TaskSpec {
            kind: "fix_hazard".into(),
            params: [("zone".to_string(), "kitchen".to_string())].into(),
            line: 1,
        };
        let task = interpret_task(&spec, &EntityId::new("robot").unwrap()).unwrap();
        PlannerQuery {
            version: PROTOCOL_VERSION,
            task,
            hazards: vec![Fact::triple("wire1", "hazard", "electrocution")
                .with_origin(Origin::Perceived)
                .at_tick(3)],
            facts: vec![
                Fact::triple("robot", "pos_x", "2").with_origin(Origin::Perceived).at_tick(3),
                Fact::triple("robot", "pos_y", "0").with_origin(Origin::Perceived).at_tick(3),
                Fact::triple("floor2", "has_state", "wet")
                    .with_confidence(0.75)
                    .with_origin(Origin::Perceived)
                    .at_tick(3),
            ],
            episodes: vec![],
        }
    }

    #[test]
    fn query_wire_field_order_and_round_trip() {
        let q = sample_query();
        let line = q.to_wire();
        assert!(!line.contains('\n'));
        let order: Vec<usize> = ["\"version\"", "\"task\"", "\"facts\"", "\"hazards\"", "\"episodes\"", "\"actions\""]
            .iter()
            .map(|k| line.find(k).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert!(line.contains(r#"["robot","pos_x",2,1.000000,3]"#));
        assert_eq!(PlannerQuery::parse_wire(&line).unwrap(), q);
    }

    #[test]
    fn response_round_trip() {
        let q = sample_query();
        let plan = plan_scripted(&q).unwrap();
        let back = parse_plan_response(&plan_to_wire(&plan), PlanSource::Scripted).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn unknown_action_names_its_path() {
        let line = r#"{"steps":[{"action":"Wait","args":[]},{"action":"Fly","args":["up"]}]}"#;
        let err = parse_plan_response(line, PlanSource::External).unwrap_err();
        assert_eq!(err.tag(), "planner_malformed");
        assert!(err.to_string().contains("steps[1].action"), "{err}");
    }

    #[test]
    fn error_object_is_a_refusal() {
        let err = parse_plan_response(r#"{"error":"no plan"}"#, PlanSource::External).unwrap_err();
        assert_eq!(err, PlannerFailure::Refused("no plan".into()));
        assert!(parse_plan_response("steps", PlanSource::External).is_err());
    }
}
