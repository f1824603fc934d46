//! Built-in actions. All are pure: equal arguments give equal results.
//!
//! `synth` stands in for a model inference call. Its compute time is a sleep
//! so that latency is reproducible on machines with few cores.

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::ActionFn;
use crate::value::ContextValue;

const NAMES: &[&str] = &["concat", "length", "summarize", "synth", "upper"];

pub fn builtin_names() -> &'static [&'static str] {
    NAMES
}

pub fn builtin(name: &str) -> Option<ActionFn> {
    let f: ActionFn = match name {
        "concat" => Arc::new(concat),
        "length" => Arc::new(length),
        "summarize" => Arc::new(summarize),
        "synth" => Arc::new(synth),
        "upper" => Arc::new(upper),
        _ => return None,
    };
    Some(f)
}

/// A fixed-parameter synthetic action that ignores its arguments.
pub fn synth_action(compute_ms: f64, payload_bytes: usize) -> ActionFn {
    Arc::new(move |_| {
        busy(compute_ms);
        Ok(ContextValue::Str(synth_payload(payload_bytes)))
    })
}

pub fn synth_payload(bytes: usize) -> String {
    "x".repeat(bytes)
}

fn busy(ms: f64) {
    if ms > 0.0 {
        thread::sleep(Duration::from_secs_f64(ms / 1e3));
    }
}

fn text(v: &ContextValue) -> String {
    match v {
        ContextValue::Str(s) => s.clone(),
        other => other.canonical(),
    }
}

fn concat(args: &[ContextValue]) -> Result<ContextValue, String> {
    let mut out = String::new();
    for a in args {
        match a {
            ContextValue::List(items) => items.iter().for_each(|i| out.push_str(&text(i))),
            other => out.push_str(&text(other)),
        }
    }
    Ok(ContextValue::Str(out))
}

fn length(args: &[ContextValue]) -> Result<ContextValue, String> {
    let n = match args {
        [ContextValue::Str(s)] => s.chars().count(),
        [ContextValue::List(l)] => l.len(),
        [ContextValue::Map(m)] => m.len(),
        _ => return Err("length expects one string, list or map".into()),
    };
    Ok(ContextValue::Int(n as i64))
}

fn upper(args: &[ContextValue]) -> Result<ContextValue, String> {
    match args {
        [ContextValue::Str(s)] => Ok(ContextValue::Str(s.to_uppercase())),
        _ => Err("upper expects one string".into()),
    }
}

/// Stub summarizer. A string summarizes to its first sentence; a list to
/// the first sentence of each item, each closed with a period if it has no
/// end mark.
fn summarize(args: &[ContextValue]) -> Result<ContextValue, String> {
    match args {
        [ContextValue::Str(s)] => Ok(ContextValue::Str(first_sentence(s))),
        [ContextValue::List(items)] => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| {
                    let mut s = first_sentence(&text(i));
                    if !s.is_empty() && !s.ends_with(['.', '!', '?']) {
                        s.push('.');
                    }
                    s
                })
                .filter(|s| !s.is_empty())
                .collect();
            Ok(ContextValue::Str(parts.join(" ")))
        }
        _ => Err("summarize expects one string or list".into()),
    }
}

/// Text up to and including the first `.`, `!` or `?` that ends the input
/// or is followed by whitespace; the whole trimmed text if there is none.
pub fn first_sentence(text: &str) -> String {
    let t = text.trim();
    let mut chars = t.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|(_, n)| n.is_whitespace()) {
            return t[..i + c.len_utf8()].to_owned();
        }
    }
    t.to_owned()
}

fn synth(args: &[ContextValue]) -> Result<ContextValue, String> {
    let num = |v: &ContextValue| match v {
        ContextValue::Int(i) if *i >= 0 => Some(*i as f64),
        ContextValue::Float(f) if *f >= 0.0 => Some(*f),
        _ => None,
    };
    match args {
        [c, p] => {
            let compute_ms = num(c).ok_or("synth compute_ms must be a non-negative number")?;
            let payload = num(p).ok_or("synth payload_bytes must be a non-negative number")?;
            busy(compute_ms);
            Ok(ContextValue::Str(synth_payload(payload as usize)))
        }
        _ => Err("synth expects (compute_ms, payload_bytes)".into()),
    }
}
