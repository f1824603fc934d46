//! The shipped program corpus. Each entry is `<name>.jac`, a golden file
//! `<name>.golden.json` and, for entries that run, a seed graph
//! `<name>.store.json`.
//!
//! A golden holds the fingerprint of the canonical pretty-print and,
//! optionally, a run: walker, start label, args and the expected outcome
//! (`{"report": [..], "status": ..}` or an error object). Goldens change
//! only through [`check_corpus`] with `bless` set.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::actions::ActionRegistry;
use crate::lang::{parse, pretty_print, BinOp, Direction, Expr, Literal, LValue, Program, SpawnDirection, Stmt, UnaryOp};
use crate::runtime::Runtime;
use crate::seed::{parse_seed, SeedObject};
use crate::storage::TierConfig;
use crate::value::ContextMap;

/// The corpus shipped with this crate.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRun {
    pub walker: String,
    pub start: String,
    #[serde(default)]
    pub args: ContextMap,
    #[serde(default)]
    pub outcome: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Golden {
    pub ast_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<GoldenRun>,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub source: String,
    pub golden: Option<Golden>,
    pub store: Option<Vec<SeedObject>>,
    dir: PathBuf,
}

impl CorpusEntry {
    pub fn golden_path(&self) -> PathBuf {
        self.dir.join(format!("{}.golden.json", self.name))
    }
}

/// Every `.jac` file in `dir`, sorted by name.
pub fn load_corpus(dir: &Path) -> io::Result<Vec<CorpusEntry>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension()? == "jac").then(|| p.file_stem()?.to_str().map(str::to_owned))?
        })
        .collect();
    names.sort();
    let bad = |e: String| io::Error::new(io::ErrorKind::InvalidData, e);
    names
        .into_iter()
        .map(|name| {
            let source = fs::read_to_string(dir.join(format!("{name}.jac")))?;
            let golden = match fs::read_to_string(dir.join(format!("{name}.golden.json"))) {
                Ok(t) => Some(serde_json::from_str(&t).map_err(|e| bad(format!("{name}.golden.json: {e}")))?),
                Err(e) if e.kind() == io::ErrorKind::NotFound => None,
                Err(e) => return Err(e),
            };
            let store = match fs::read_to_string(dir.join(format!("{name}.store.json"))) {
                Ok(t) => Some(parse_seed(&t).map_err(|e| bad(format!("{name}.store.json: {e}")))?),
                Err(e) if e.kind() == io::ErrorKind::NotFound => None,
                Err(e) => return Err(e),
            };
            Ok(CorpusEntry {
                name,
                source,
                golden,
                store,
                dir: dir.to_owned(),
            })
        })
        .collect()
}

/// Hex SHA-256 of the canonical pretty-print.
pub fn ast_fingerprint(program: &Program) -> String {
    Sha256::digest(pretty_print(program).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs `run` on a fresh in-memory store seeded from `store`; the outcome
/// is the report or the error object.
pub fn execute(program: &Program, store: &[SeedObject], run: &GoldenRun, actions: Arc<ActionRegistry>) -> Result<Value, String> {
    let rt = Runtime::new(program, TierConfig::default(), actions).map_err(|e| e.to_string())?;
    let labels = rt.seed(store).map_err(|e| e.to_string())?;
    let start = *labels
        .get(&run.start)
        .ok_or_else(|| format!("start label `{}` is not in the store", run.start))?;
    Ok(match rt.run_walker(&run.walker, start, run.args.clone()) {
        Ok(out) => json!({ "report": out.report, "status": out.status }),
        Err(e) => e.to_json(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryResult {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

/// Parses, round-trips and runs every entry, comparing against goldens.
/// With `bless` the computed fingerprint and outcome are written back
/// instead. Failures are reported per entry.
pub fn check_corpus(dir: &Path, bless: bool) -> io::Result<Vec<EntryResult>> {
    let entries = load_corpus(dir)?;
    let mut results = Vec::with_capacity(entries.len());
    for e in entries {
        let (ok, detail) = match check_entry(&e, bless) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        results.push(EntryResult { name: e.name, ok, detail });
    }
    Ok(results)
}

fn check_entry(e: &CorpusEntry, bless: bool) -> Result<String, String> {
    let program = parse(&e.source).map_err(|err| format!("parse: {err}"))?;
    let printed = pretty_print(&program);
    let reparsed = parse(&printed).map_err(|err| format!("reparse: {err}"))?;
    if reparsed != program {
        return Err("pretty-print does not round-trip".into());
    }
    if pretty_print(&reparsed) != printed {
        return Err("pretty-print is not idempotent".into());
    }
    let fingerprint = ast_fingerprint(&program);
    let mut golden = e.golden.clone().unwrap_or(Golden {
        ast_sha256: String::new(),
        run: None,
    });
    let mut notes = vec!["round-trip".to_owned()];
    let mut mismatches = Vec::new();
    if golden.ast_sha256 != fingerprint {
        mismatches.push(format!("fingerprint {fingerprint} != golden {}", golden.ast_sha256));
        golden.ast_sha256 = fingerprint;
    }
    if let Some(run) = golden.run.as_mut() {
        let store = e.store.as_deref().ok_or("golden run needs a store file")?;
        let outcome = execute(&program, store, run, Arc::new(ActionRegistry::with_builtins(None)))?;
        if outcome != run.outcome {
            mismatches.push(format!("outcome {outcome} != golden {}", run.outcome));
            run.outcome = outcome;
        }
        notes.push("run".into());
    }
    if bless {
        if !mismatches.is_empty() || e.golden.is_none() {
            let mut text = serde_json::to_string_pretty(&golden).expect("golden serializes");
            text.push('\n');
            fs::write(e.golden_path(), text).map_err(|err| err.to_string())?;
            notes.push("blessed".into());
        }
        return Ok(notes.join(", "));
    }
    if e.golden.is_none() {
        return Err("no golden file".into());
    }
    if mismatches.is_empty() {
        Ok(notes.join(", "))
    } else {
        Err(mismatches.join("; "))
    }
}

/// Grammar productions and expression forms exercised by a program.
pub fn productions_used(p: &Program) -> BTreeSet<&'static str> {
    let mut used = BTreeSet::new();
    used.insert("program");
    for n in &p.node_decls {
        used.insert("node_decl");
        if n.access_walkers.is_some() {
            used.insert("access_clause");
        }
        if !n.has_fields.is_empty() {
            used.insert("has_stmt");
        }
        if !n.can_actions.is_empty() {
            used.insert("can_stmt");
        }
    }
    for e in &p.edge_decls {
        used.insert("edge_decl");
        if !e.has_fields.is_empty() {
            used.insert("has_stmt");
        }
    }
    for w in &p.walker_decls {
        used.insert("walker_decl");
        if !w.has_fields.is_empty() {
            used.insert("has_stmt");
        }
        if !w.can_actions.is_empty() {
            used.insert("can_stmt");
        }
        stmts(&w.body, &mut used);
    }
    used
}

/// Everything [`productions_used`] can report.
pub const ALL_PRODUCTIONS: &[&str] = &[
    "program", "node_decl", "edge_decl", "walker_decl", "access_clause", "has_stmt", "can_stmt",
    "assign", "assign_here", "take", "take_out", "take_in", "take_both", "take_edge_filter",
    "take_node_filter", "spawn", "spawn_out", "spawn_in", "if", "if_else", "forin", "report",
    "disengage", "expr_stmt", "lit_null", "lit_bool", "lit_int", "lit_float", "lit_string",
    "list", "index", "call", "var", "here_field", "walker_field", "not", "neg", "or", "and",
    "==", "!=", "<", ">", "+", "-", "*", "/",
];

fn stmts(body: &[Stmt], used: &mut BTreeSet<&'static str>) {
    for s in body {
        match s {
            Stmt::Assign(lv, e) => {
                used.insert("assign");
                if matches!(lv, LValue::HereField(_)) {
                    used.insert("assign_here");
                }
                expr(e, used);
            }
            Stmt::Take {
                direction,
                edge_type,
                node_type,
            } => {
                used.insert("take");
                used.insert(match direction {
                    Direction::Out => "take_out",
                    Direction::In => "take_in",
                    Direction::Both => "take_both",
                });
                if edge_type.is_some() {
                    used.insert("take_edge_filter");
                }
                if node_type.is_some() {
                    used.insert("take_node_filter");
                }
            }
            Stmt::SpawnNode { direction, init, .. } => {
                used.insert("spawn");
                used.insert(match direction {
                    SpawnDirection::Out => "spawn_out",
                    SpawnDirection::In => "spawn_in",
                });
                init.iter().for_each(|(_, e)| expr(e, used));
            }
            Stmt::If(c, then, other) => {
                used.insert("if");
                if !other.is_empty() {
                    used.insert("if_else");
                }
                expr(c, used);
                stmts(then, used);
                stmts(other, used);
            }
            Stmt::ForIn(_, e, body) => {
                used.insert("forin");
                expr(e, used);
                stmts(body, used);
            }
            Stmt::Report(e) => {
                used.insert("report");
                expr(e, used);
            }
            Stmt::Disengage => {
                used.insert("disengage");
            }
            Stmt::Expr(e) => {
                used.insert("expr_stmt");
                expr(e, used);
            }
        }
    }
}

fn expr(e: &Expr, used: &mut BTreeSet<&'static str>) {
    match e {
        Expr::Literal(l) => {
            used.insert(match l {
                Literal::Null => "lit_null",
                Literal::Bool(_) => "lit_bool",
                Literal::Int(_) => "lit_int",
                Literal::Float(_) => "lit_float",
                Literal::Str(_) => "lit_string",
            });
        }
        Expr::Var(_) => {
            used.insert("var");
        }
        Expr::HereField(_) => {
            used.insert("here_field");
        }
        Expr::WalkerField(_) => {
            used.insert("walker_field");
        }
        Expr::ActionCall(_, args) => {
            used.insert("call");
            args.iter().for_each(|a| expr(a, used));
        }
        Expr::Binary(op, l, r) => {
            used.insert(match op {
                BinOp::Or => "or",
                BinOp::And => "and",
                _ => op.symbol(),
            });
            expr(l, used);
            expr(r, used);
        }
        Expr::Unary(op, inner) => {
            used.insert(match op {
                UnaryOp::Not => "not",
                UnaryOp::Neg => "neg",
            });
            expr(inner, used);
        }
        Expr::List(items) => {
            used.insert("list");
            items.iter().for_each(|i| expr(i, used));
        }
        Expr::Index(a, b) => {
            used.insert("index");
            expr(a, used);
            expr(b, used);
        }
    }
}

/// Which corpus entries use each production.
pub fn grammar_coverage(entries: &[CorpusEntry]) -> BTreeMap<&'static str, Vec<String>> {
    let mut cov: BTreeMap<&'static str, Vec<String>> = ALL_PRODUCTIONS.iter().map(|p| (*p, Vec::new())).collect();
    for e in entries {
        if let Ok(p) = parse(&e.source) {
            for prod in productions_used(&p) {
                cov.entry(prod).or_default().push(e.name.clone());
            }
        }
    }
    cov
}

/// Actions named in any `can` clause of the corpus.
pub fn corpus_actions(entries: &[CorpusEntry]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for e in entries {
        if let Ok(p) = parse(&e.source) {
            p.node_decls.iter().for_each(|n| out.extend(n.can_actions.iter().cloned()));
            p.walker_decls.iter().for_each(|w| out.extend(w.can_actions.iter().cloned()));
        }
    }
    out
}
