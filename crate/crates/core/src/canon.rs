//! Canonical JSON text: fields in insertion order, floats with six
//! decimals, no whitespace. Used wherever output must be byte-exact.

use std::fmt::Write;

use sha2::{Digest, Sha256};

/// Hex SHA-256 of a text.
pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> ObjBuilder {
        ObjBuilder(Vec::new())
    }

    pub fn str(s: impl Into<String>) -> Json {
        Json::Str(s.into())
    }

    pub fn strs<I, S>(items: I) -> Json
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Json::Arr(items.into_iter().map(|s| Json::Str(s.into())).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out);
        out
    }

    fn write_to(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Float(f) => {
                let v = if f.is_finite() { *f } else { 0.0 };
                // avoid "-0.000000"
                let s = format!("{v:.6}");
                out.push_str(if s == "-0.000000" { "0.000000" } else { &s });
            }
            Json::Str(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
            Json::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write_to(out);
                }
                out.push(']');
            }
            Json::Obj(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                    out.push(':');
                    v.write_to(out);
                }
                out.push('}');
            }
        }
    }

    /// Convert a parsed value; numbers with a fractional part or exponent
    /// become floats.
    pub fn from_value(v: &serde_json::Value) -> Json {
        use serde_json::Value;
        match v {
            Value::Null => Json::Null,
            Value::Bool(b) => Json::Bool(*b),
            Value::Number(n) => match n.as_i64() {
                Some(i) if !n.to_string().contains(['.', 'e', 'E']) => Json::Int(i),
                _ => Json::Float(n.as_f64().unwrap_or(0.0)),
            },
            Value::String(s) => Json::Str(s.clone()),
            Value::Array(a) => Json::Arr(a.iter().map(Json::from_value).collect()),
            Value::Object(m) => Json::Obj(m.iter().map(|(k, v)| (k.clone(), Json::from_value(v))).collect()),
        }
    }
}

pub struct ObjBuilder(Vec<(String, Json)>);

impl ObjBuilder {
    pub fn field(mut self, key: &str, value: Json) -> Self {
        self.0.push((key.to_string(), value));
        self
    }

    pub fn build(self) -> Json {
        Json::Obj(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_compact_with_fixed_floats() {
        let j = Json::obj()
            .field("b", Json::Float(1.0 / 3.0))
            .field("a", Json::Arr(vec![Json::Int(2), Json::Null, Json::str("q\"x")]))
            .field("z", Json::Float(-0.0000001))
            .build();
        assert_eq!(j.render(), r#"{"b":0.333333,"a":[2,null,"q\"x"],"z":0.000000}"#);
    }

    #[test]
    fn parsed_values_keep_int_float_split() {
        let v: serde_json::Value = serde_json::from_str(r#"{"i":3,"f":3.000000}"#).unwrap();
        assert_eq!(Json::from_value(&v).render(), r#"{"i":3,"f":3.000000}"#);
    }
}
