//! Declarative rule files.
//!
//! ```text
//! # comment
//! version 1
//! dependency knockover_spill 1.0: isa(?x, cup), active(?x, knocked_over), contains(?x, ?y) -> has_state(?y, spilling)
//! hazard electrocution 1.0: has_state(?f, wet), Near(?f, ?w), has_state(?w, powered) -> hazard(?w, electrocution)
//! concept big 0.9: size(?x, ?s), ?s >= 3 -> isa(?x, big)
//! exclusion LeftOf RightOf
//! compose OnTopOf LeftOf LeftOf
//! ```
//!
//! Rule kinds are `dependency`, `concept`, `integration` and `hazard`.
//! Hazard rules must conclude `hazard(..)` and their premises must touch at
//! least two cognitive dimensions. `exclusion A B` declares `A` and `B` as
//! mutually exclusive converse relations; `compose R1 R2 R3` adds the
//! composition-table entry `R1(a,b) & R2(b,c) -> R3(a,c)`.

use std::path::Path;

use crate::kb::{is_relation_name, Atom, CmpOp, Guard, KbError, Object, Rule, Term};
use crate::reason::CompositionTable;

pub const RULES_FORMAT_VERSION: u32 = 1;

pub const DEFAULT_RULES: &str = include_str!("../data/default.rules");
pub const DEFAULT_COMPOSITION: &str = include_str!("../data/composition.table");

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub dependency: Vec<Rule>,
    pub concept: Vec<Rule>,
    pub integration: Vec<Rule>,
    pub hazard: Vec<Rule>,
    pub exclusions: Vec<(String, String)>,
    pub composition: CompositionTable,
}

impl RuleSet {
    /// Shipped rules plus the shipped composition table.
    pub fn shipped() -> Self {
        let mut set = RuleSet::parse(DEFAULT_RULES).expect("shipped rule file parses");
        let table = RuleSet::parse(DEFAULT_COMPOSITION).expect("shipped composition table parses");
        set.absorb(table);
        set
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|e| KbError::Parse {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Append everything from `other`.
    pub fn absorb(&mut self, other: RuleSet) {
        self.dependency.extend(other.dependency);
        self.concept.extend(other.concept);
        self.integration.extend(other.integration);
        self.hazard.extend(other.hazard);
        self.exclusions.extend(other.exclusions);
        for (a, b, c) in other.composition.entries() {
            self.composition.insert(a, b, c);
        }
    }

    pub fn all_rules(&self) -> impl Iterator<Item = &Rule> {
        self.dependency
            .iter()
            .chain(&self.concept)
            .chain(&self.integration)
            .chain(&self.hazard)
    }

    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut set = RuleSet::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |reason: String| KbError::Parse {
                line: line_no,
                reason,
            };
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match keyword {
                "version" => {
                    let v: u32 = rest.parse().map_err(|_| err(format!("bad version {rest:?}")))?;
                    if v != RULES_FORMAT_VERSION {
                        return Err(err(format!("unsupported rule file version {v}")));
                    }
                }
                "exclusion" => {
                    let rels: Vec<&str> = rest.split_whitespace().collect();
                    if rels.len() != 2 || !rels.iter().all(|r| is_relation_name(r)) {
                        return Err(err("exclusion expects two relation names".into()));
                    }
                    set.exclusions.push((rels[0].to_string(), rels[1].to_string()));
                }
                "compose" => {
                    let rels: Vec<&str> = rest.split_whitespace().collect();
                    if rels.len() != 3 || !rels.iter().all(|r| is_relation_name(r)) {
                        return Err(err("compose expects three relation names".into()));
                    }
                    set.composition.insert(rels[0], rels[1], rels[2]);
                }
                "dependency" | "concept" | "integration" | "hazard" => {
                    let rule = parse_rule(rest).map_err(|reason| match reason {
                        KbError::InvalidRule { rule, reason } => {
                            err(format!("rule {rule}: {reason}"))
                        }
                        KbError::Parse { reason, .. } => err(reason),
                        other => err(other.to_string()),
                    })?;
                    match keyword {
                        "dependency" => set.dependency.push(rule),
                        "concept" => set.concept.push(rule),
                        "integration" => set.integration.push(rule),
                        _ => {
                            validate_hazard_rule(&rule).map_err(err)?;
                            set.hazard.push(rule);
                        }
                    }
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        Ok(set)
    }
}

/// Hazard rules conclude `hazard(..)` from premises spanning two or more
/// dimensions.
pub fn validate_hazard_rule(rule: &Rule) -> Result<(), String> {
    if rule.conclusion.relation != "hazard" {
        return Err(format!("hazard rule {} must conclude hazard(..)", rule.name));
    }
    let dims = rule.premise_dimensions();
    if dims.len() < 2 {
        return Err(format!(
            "hazard rule {} touches only one dimension ({})",
            rule.name,
            dims.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(",")
        ));
    }
    Ok(())
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_rule(text: &str) -> Result<Rule, KbError> {
    let perr = |reason: String| KbError::Parse { line: 0, reason };
    let (head, body) = text
        .split_once(':')
        .ok_or_else(|| perr("expected `name weight: premises -> conclusion`".into()))?;
    let mut head_parts = head.split_whitespace();
    let name = head_parts.next().ok_or_else(|| perr("missing rule name".into()))?;
    let weight: f64 = head_parts
        .next()
        .ok_or_else(|| perr(format!("rule {name}: missing weight")))?
        .parse()
        .map_err(|_| perr(format!("rule {name}: bad weight")))?;
    let (lhs, rhs) = body
        .split_once("->")
        .ok_or_else(|| perr(format!("rule {name}: missing `->`")))?;
    let mut premises = Vec::new();
    let mut guards = Vec::new();
    for part in split_top_level(lhs) {
        let part = part.trim();
        if part.contains('(') {
            premises.push(parse_atom(part).map_err(perr)?);
        } else {
            guards.push(parse_guard(part).map_err(perr)?);
        }
    }
    let conclusion = parse_atom(rhs.trim()).map_err(perr)?;
    Rule::new(name, premises, guards, conclusion, weight)
}

fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts.into_iter().filter(|p| !p.trim().is_empty()).collect()
}

pub fn parse_term(text: &str) -> Result<Term, String> {
    let text = text.trim();
    if let Some(var) = text.strip_prefix('?') {
        if var.is_empty() || !var.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad variable {text:?}"));
        }
        return Ok(Term::Var(var.to_string()));
    }
    text.parse::<Object>()
        .map(Term::Const)
        .map_err(|_| format!("bad term {text:?}"))
}

/// Parse `Relation(term, term)`.
pub fn parse_atom(text: &str) -> Result<Atom, String> {
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| format!("expected `Rel(a, b)`, got {text:?}"))?;
    if !text.ends_with(')') {
        return Err(format!("missing `)` in {text:?}"));
    }
    let relation = text[..open].trim();
    if !is_relation_name(relation) {
        return Err(format!("bad relation name {relation:?}"));
    }
    let args: Vec<&str> = text[open + 1..text.len() - 1].split(',').collect();
    if args.len() != 2 {
        return Err(format!("{relation} expects 2 arguments, got {}", args.len()));
    }
    Ok(Atom::new(relation, parse_term(args[0])?, parse_term(args[1])?))
}

fn parse_guard(text: &str) -> Result<Guard, String> {
    for (sym, op) in [
        ("<=", CmpOp::Le),
        (">=", CmpOp::Ge),
        ("==", CmpOp::Eq),
        ("!=", CmpOp::Ne),
        ("<", CmpOp::Lt),
        (">", CmpOp::Gt),
    ] {
        if let Some((l, r)) = text.split_once(sym) {
            return Ok(Guard {
                left: parse_term(l)?,
                op,
                right: parse_term(r)?,
            });
        }
    }
    Err(format!("expected atom or comparison, got {text:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Dimension;

    #[test]
    fn shipped_files_parse() {
        let set = RuleSet::shipped();
        assert!(!set.dependency.is_empty());
        assert!(!set.concept.is_empty());
        assert_eq!(set.hazard.len(), 2);
        assert!(set.exclusions.contains(&("LeftOf".into(), "RightOf".into())));
        assert_eq!(set.composition.get("LeftOf", "LeftOf"), Some("LeftOf"));
        assert_eq!(set.composition.get("LeftOf", "Near"), None);
    }

    #[test]
    fn rule_line_round_trip() {
        let set = RuleSet::parse(
            "version 1\nconcept big 0.9: size(?x, ?s), ?s >= 3 -> isa(?x, big) # trailing\n",
        )
        .unwrap();
        let rule = &set.concept[0];
        assert_eq!(rule.to_string(), "big 0.9: size(?x, ?s), ?s >= 3 -> isa(?x, big)");
    }

    #[test]
    fn single_dimension_hazard_rejected() {
        let err = RuleSet::parse("hazard bad 1.0: has_state(?x, hot) -> hazard(?x, burn)\n")
            .unwrap_err();
        match err {
            KbError::Parse { line, reason } => {
                assert_eq!(line, 1);
                assert!(reason.contains("only one dimension"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unbound_variable_reported_with_line() {
        let err = RuleSet::parse("\n\ndependency spill 1.0: isa(?x, cup) -> has_state(?y, spilling)\n")
            .unwrap_err();
        assert!(matches!(err, KbError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn atoms_parse_with_constants_and_ints() {
        let atom = parse_atom("size(plate3, 3)").unwrap();
        assert_eq!(atom.object, Term::Const(Object::Int(3)));
        assert!(parse_atom("LeftOf(?x)").is_err());
        assert!(parse_atom("left of(a, b)").is_err());
    }

    #[test]
    fn shipped_hazard_rules_span_dimensions() {
        for rule in &RuleSet::shipped().hazard {
            assert!(rule.premise_dimensions().len() >= 2);
            assert!(!rule.premise_dimensions().contains(&Dimension::Unified));
        }
    }
}
