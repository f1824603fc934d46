//! Context values stored on nodes and edges, and their canonical byte form.
//!
//! The canonical form is compact JSON: no whitespace, map keys in insertion
//! order, floats in shortest round-trip notation. Its byte length is the
//! "context size" used by the fast-edge rule.

use std::fmt;

use indexmap::IndexMap;
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Ordered string-keyed map used for contexts and map values.
pub type ContextMap = IndexMap<String, ContextValue>;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ContextValue {
    #[default]
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<ContextValue>),
    Map(ContextMap),
}

impl ContextValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ContextValue::Null => "null",
            ContextValue::Bool(_) => "bool",
            ContextValue::Int(_) => "int",
            ContextValue::Float(_) => "float",
            ContextValue::Str(_) => "string",
            ContextValue::List(_) => "list",
            ContextValue::Map(_) => "map",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ContextValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ContextValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Canonical compact JSON bytes.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("context values always serialize")
    }

    pub fn from_json(value: &serde_json::Value) -> ContextValue {
        match value {
            serde_json::Value::Null => ContextValue::Null,
            serde_json::Value::Bool(b) => ContextValue::Bool(*b),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    ContextValue::Int(i)
                } else {
                    ContextValue::Float(n.as_f64().unwrap_or(f64::NAN))
                }
            }
            serde_json::Value::String(s) => ContextValue::Str(s.clone()),
            serde_json::Value::Array(items) => {
                ContextValue::List(items.iter().map(ContextValue::from_json).collect())
            }
            serde_json::Value::Object(map) => ContextValue::Map(
                map.iter()
                    .map(|(k, v)| (k.clone(), ContextValue::from_json(v)))
                    .collect(),
            ),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("context values always serialize")
    }
}

/// Canonical serialization of a whole context map.
pub fn canonical_map(map: &ContextMap) -> String {
    serde_json::to_string(&MapRef(map)).expect("context maps always serialize")
}

/// Byte length of the canonical form of a context map.
pub fn context_size(map: &ContextMap) -> usize {
    canonical_map(map).len()
}

struct MapRef<'a>(&'a ContextMap);

impl Serialize for MapRef<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut m = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for ContextValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ContextValue::Null => serializer.serialize_unit(),
            ContextValue::Bool(b) => serializer.serialize_bool(*b),
            ContextValue::Int(i) => serializer.serialize_i64(*i),
            // non-finite floats have no JSON form and are written as null
            ContextValue::Float(f) if !f.is_finite() => serializer.serialize_unit(),
            ContextValue::Float(f) => serializer.serialize_f64(*f),
            ContextValue::Str(s) => serializer.serialize_str(s),
            ContextValue::List(items) => {
                let mut seq = serializer.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            ContextValue::Map(map) => MapRef(map).serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for ContextValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(ValueVisitor)
    }
}

struct ValueVisitor;

impl<'de> Visitor<'de> for ValueVisitor {
    type Value = ContextValue;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_unit<E>(self) -> Result<ContextValue, E> {
        Ok(ContextValue::Null)
    }

    fn visit_none<E>(self) -> Result<ContextValue, E> {
        Ok(ContextValue::Null)
    }

    fn visit_bool<E>(self, v: bool) -> Result<ContextValue, E> {
        Ok(ContextValue::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<ContextValue, E> {
        Ok(ContextValue::Int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<ContextValue, E> {
        match i64::try_from(v) {
            Ok(i) => Ok(ContextValue::Int(i)),
            Err(_) => Ok(ContextValue::Float(v as f64)),
        }
    }

    fn visit_f64<E>(self, v: f64) -> Result<ContextValue, E> {
        Ok(ContextValue::Float(v))
    }

    fn visit_str<E>(self, v: &str) -> Result<ContextValue, E> {
        Ok(ContextValue::Str(v.to_owned()))
    }

    fn visit_string<E>(self, v: String) -> Result<ContextValue, E> {
        Ok(ContextValue::Str(v))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<ContextValue, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element()? {
            items.push(item);
        }
        Ok(ContextValue::List(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<ContextValue, A::Error> {
        let mut map = ContextMap::new();
        while let Some((k, v)) = access.next_entry::<String, ContextValue>()? {
            map.insert(k, v);
        }
        Ok(ContextValue::Map(map))
    }
}

impl fmt::Display for ContextValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl From<&str> for ContextValue {
    fn from(s: &str) -> Self {
        ContextValue::Str(s.to_owned())
    }
}

impl From<String> for ContextValue {
    fn from(s: String) -> Self {
        ContextValue::Str(s)
    }
}

impl From<i64> for ContextValue {
    fn from(i: i64) -> Self {
        ContextValue::Int(i)
    }
}

impl From<f64> for ContextValue {
    fn from(f: f64) -> Self {
        ContextValue::Float(f)
    }
}

impl From<bool> for ContextValue {
    fn from(b: bool) -> Self {
        ContextValue::Bool(b)
    }
}
