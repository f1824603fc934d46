//! Operator semantics on context values.
//!
//! Integer arithmetic is checked; overflow, division by zero and
//! non-finite float results are type errors rather than silent values.
//! `and`, `or`, `not` and `if` conditions require booleans.

use std::cmp::Ordering;

use crate::lang::{BinOp, Literal, UnaryOp};
use crate::value::ContextValue as V;

pub(crate) type OpResult = Result<V, String>;

pub(crate) fn literal(l: &Literal) -> V {
    match l {
        Literal::Null => V::Null,
        Literal::Bool(b) => V::Bool(*b),
        Literal::Int(i) => V::Int(*i),
        Literal::Float(f) => V::Float(*f),
        Literal::Str(s) => V::Str(s.clone()),
    }
}

pub(crate) fn truthy(v: &V, what: &str) -> Result<bool, String> {
    match v {
        V::Bool(b) => Ok(*b),
        other => Err(format!("{what} must be a bool, got {}", other.type_name())),
    }
}

fn float(x: f64) -> OpResult {
    if x.is_finite() {
        Ok(V::Float(x))
    } else {
        Err("float result is not finite".into())
    }
}

fn as_f64(v: &V) -> Option<f64> {
    match v {
        V::Int(i) => Some(*i as f64),
        V::Float(f) => Some(*f),
        _ => None,
    }
}

/// Equality with ints and floats compared by numeric value.
pub(crate) fn equal(a: &V, b: &V) -> bool {
    match (a, b) {
        (V::Int(x), V::Float(y)) | (V::Float(y), V::Int(x)) => (*x as f64) == *y,
        (V::List(x), V::List(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| equal(p, q)),
        (V::Map(x), V::Map(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| equal(v, w)))
        }
        _ => a == b,
    }
}

fn compare(a: &V, b: &V) -> Result<Ordering, String> {
    match (a, b) {
        (V::Int(x), V::Int(y)) => Ok(x.cmp(y)),
        (V::Str(x), V::Str(y)) => Ok(x.cmp(y)),
        _ => match (as_f64(a), as_f64(b)) {
            (Some(x), Some(y)) => x.partial_cmp(&y).ok_or_else(|| "incomparable floats".into()),
            _ => Err(format!("cannot compare {} and {}", a.type_name(), b.type_name())),
        },
    }
}

fn arith(op: BinOp, a: &V, b: &V) -> OpResult {
    let mismatch = || {
        let verb = match op {
            BinOp::Add => "add",
            BinOp::Sub => "subtract",
            BinOp::Mul => "multiply",
            _ => "divide",
        };
        format!("cannot {verb} {} and {}", a.type_name(), b.type_name())
    };
    if let (V::Int(x), V::Int(y)) = (a, b) {
        let r = match op {
            BinOp::Add => x.checked_add(*y),
            BinOp::Sub => x.checked_sub(*y),
            BinOp::Mul => x.checked_mul(*y),
            _ if *y == 0 => return Err("division by zero".into()),
            _ => x.checked_div(*y),
        };
        return r.map(V::Int).ok_or_else(|| "integer overflow".into());
    }
    let (x, y) = match (as_f64(a), as_f64(b)) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(mismatch()),
    };
    match op {
        BinOp::Add => float(x + y),
        BinOp::Sub => float(x - y),
        BinOp::Mul => float(x * y),
        _ if y == 0.0 => Err("division by zero".into()),
        _ => float(x / y),
    }
}

/// Applies a non-short-circuit binary operator.
pub(crate) fn binary(op: BinOp, a: &V, b: &V) -> OpResult {
    match op {
        BinOp::Eq => Ok(V::Bool(equal(a, b))),
        BinOp::Ne => Ok(V::Bool(!equal(a, b))),
        BinOp::Lt => Ok(V::Bool(compare(a, b)? == Ordering::Less)),
        BinOp::Gt => Ok(V::Bool(compare(a, b)? == Ordering::Greater)),
        BinOp::Add => match (a, b) {
            (V::Str(x), V::Str(y)) => Ok(V::Str(format!("{x}{y}"))),
            (V::List(x), V::List(y)) => Ok(V::List(x.iter().chain(y).cloned().collect())),
            _ => arith(op, a, b),
        },
        BinOp::Sub | BinOp::Mul | BinOp::Div => arith(op, a, b),
        BinOp::And | BinOp::Or => {
            let (x, y) = (truthy(a, op.symbol())?, truthy(b, op.symbol())?);
            Ok(V::Bool(if op == BinOp::And { x && y } else { x || y }))
        }
    }
}

pub(crate) fn unary(op: UnaryOp, v: &V) -> OpResult {
    match (op, v) {
        (UnaryOp::Not, v) => Ok(V::Bool(!truthy(v, "not")?)),
        (UnaryOp::Neg, V::Int(i)) => i.checked_neg().map(V::Int).ok_or_else(|| "integer overflow".into()),
        (UnaryOp::Neg, V::Float(f)) => Ok(V::Float(-f)),
        (UnaryOp::Neg, other) => Err(format!("cannot negate {}", other.type_name())),
    }
}

/// `list[int]` and `map[string]`; a missing element is null.
pub(crate) fn index(base: &V, idx: &V) -> OpResult {
    match (base, idx) {
        (V::List(items), V::Int(i)) => Ok(usize::try_from(*i)
            .ok()
            .and_then(|i| items.get(i))
            .cloned()
            .unwrap_or(V::Null)),
        (V::Map(m), V::Str(k)) => Ok(m.get(k).cloned().unwrap_or(V::Null)),
        _ => Err(format!("cannot index {} with {}", base.type_name(), idx.type_name())),
    }
}

/// Items a `for` loop visits: list elements, or map keys in order.
pub(crate) fn iterate(v: &V) -> Result<Vec<V>, String> {
    match v {
        V::List(items) => Ok(items.clone()),
        V::Map(m) => Ok(m.keys().map(|k| V::Str(k.clone())).collect()),
        other => Err(format!("cannot iterate over {}", other.type_name())),
    }
}
