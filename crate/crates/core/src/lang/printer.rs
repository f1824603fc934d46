use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

/// Canonical source text for a program: node, edge then walker declarations,
/// four-space indentation, one statement per line, minimal parentheses.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    let mut first = true;
    let mut sep = |out: &mut String| {
        if !first {
            out.push('\n');
        }
        first = false;
    };
    for d in &program.node_decls {
        sep(&mut out);
        write!(out, "node {}", d.name).unwrap();
        if let Some(access) = &d.access_walkers {
            let names: Vec<&str> = access.iter().map(String::as_str).collect();
            write!(out, " access({})", names.join(", ")).unwrap();
        }
        if d.has_fields.is_empty() && d.can_actions.is_empty() {
            out.push_str(" {}\n");
            continue;
        }
        out.push_str(" {\n");
        decls(&mut out, &d.has_fields, &d.can_actions);
        out.push_str("}\n");
    }
    for d in &program.edge_decls {
        sep(&mut out);
        if d.has_fields.is_empty() {
            writeln!(out, "edge {} {{}}", d.name).unwrap();
            continue;
        }
        writeln!(out, "edge {} {{", d.name).unwrap();
        decls(&mut out, &d.has_fields, &[]);
        out.push_str("}\n");
    }
    for d in &program.walker_decls {
        sep(&mut out);
        if d.has_fields.is_empty() && d.can_actions.is_empty() && d.body.is_empty() {
            writeln!(out, "walker {} {{}}", d.name).unwrap();
            continue;
        }
        writeln!(out, "walker {} {{", d.name).unwrap();
        decls(&mut out, &d.has_fields, &d.can_actions);
        for s in &d.body {
            stmt(&mut out, s, 1);
        }
        out.push_str("}\n");
    }
    out
}

fn decls(out: &mut String, has: &[String], can: &[String]) {
    if !has.is_empty() {
        writeln!(out, "{INDENT}has {};", has.join(", ")).unwrap();
    }
    for c in can {
        writeln!(out, "{INDENT}can {c};").unwrap();
    }
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = INDENT.repeat(depth);
    out.push_str(&pad);
    match s {
        Stmt::Assign(target, value) => {
            match target {
                LValue::WalkerField(n) | LValue::Var(n) => out.push_str(n),
                LValue::HereField(n) => write!(out, "here.{n}").unwrap(),
            }
            writeln!(out, " = {};", expr(value)).unwrap();
        }
        Stmt::Take {
            direction,
            edge_type,
            node_type,
        } => {
            write!(out, "take {}", direction.arrow()).unwrap();
            if let Some(e) = edge_type {
                write!(out, ":{e}").unwrap();
            }
            if let Some(n) = node_type {
                write!(out, "({n})").unwrap();
            }
            out.push_str(";\n");
        }
        Stmt::SpawnNode {
            direction,
            edge_type,
            node_type,
            init,
        } => {
            let arrow = match direction {
                SpawnDirection::Out => "++>",
                SpawnDirection::In => "<++",
            };
            write!(out, "spawn here {arrow}:{edge_type} {node_type} {{").unwrap();
            for (field, value) in init {
                write!(out, " {field} = {};", expr(value)).unwrap();
            }
            if !init.is_empty() {
                out.push(' ');
            }
            out.push_str("};\n");
        }
        Stmt::If(cond, then, otherwise) => {
            writeln!(out, "if {} {{", expr(cond)).unwrap();
            block(out, then, depth + 1);
            if otherwise.is_empty() {
                writeln!(out, "{pad}}}").unwrap();
            } else {
                writeln!(out, "{pad}}} else {{").unwrap();
                block(out, otherwise, depth + 1);
                writeln!(out, "{pad}}}").unwrap();
            }
        }
        Stmt::ForIn(var, iter, body) => {
            writeln!(out, "for {var} in {} {{", expr(iter)).unwrap();
            block(out, body, depth + 1);
            writeln!(out, "{pad}}}").unwrap();
        }
        Stmt::Report(e) => writeln!(out, "report {};", expr(e)).unwrap(),
        Stmt::Disengage => out.push_str("disengage;\n"),
        Stmt::Expr(e) => writeln!(out, "{};", expr(e)).unwrap(),
    }
}

fn expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn child(out: &mut String, e: &Expr, min_prec: u8) {
    if e.precedence() < min_prec {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Literal(lit) => literal(out, lit),
        Expr::Var(n) | Expr::WalkerField(n) => out.push_str(n),
        Expr::HereField(n) => write!(out, "here.{n}").unwrap(),
        Expr::ActionCall(name, args) => {
            out.push_str(name);
            out.push('(');
            list(out, args);
            out.push(')');
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            child(out, l, p);
            write!(out, " {} ", op.symbol()).unwrap();
            child(out, r, p + 1);
        }
        Expr::Unary(UnaryOp::Not, inner) => {
            out.push_str("not ");
            child(out, inner, prec::NOT);
        }
        Expr::Unary(UnaryOp::Neg, inner) => {
            out.push('-');
            child(out, inner, prec::UNARY);
        }
        Expr::List(items) => {
            out.push('[');
            list(out, items);
            out.push(']');
        }
        Expr::Index(base, index) => {
            child(out, base, prec::POSTFIX);
            out.push('[');
            write_expr(out, index);
            out.push(']');
        }
    }
}

fn list(out: &mut String, items: &[Expr]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, item);
    }
}

fn literal(out: &mut String, lit: &Literal) {
    match lit {
        Literal::Null => out.push_str("null"),
        Literal::Bool(b) => write!(out, "{b}").unwrap(),
        Literal::Int(i) => write!(out, "{i}").unwrap(),
        Literal::Float(f) => write!(out, "{f:?}").unwrap(),
        Literal::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn minimal_round_trip() {
        let p = parse("walker w { has x; }").unwrap();
        let text = pretty_print(&p);
        assert_eq!(text, "walker w {\n    has x;\n}\n");
        assert_eq!(parse(&text).unwrap(), p);
    }

    #[test]
    fn parentheses_only_where_needed() {
        let src = "walker w { has a, b, c; report (a - (b - c)) * -(a + b)[0]; report not (a or b) and c; }";
        let p = parse(src).unwrap();
        let text = pretty_print(&p);
        assert!(text.contains("report (a - (b - c)) * -(a + b)[0];"), "{text}");
        assert!(text.contains("report not (a or b) and c;"), "{text}");
        assert_eq!(parse(&text).unwrap(), p);
    }

    #[test]
    fn full_statement_forms() {
        let src = r#"
node day access(process, audit) { has date; can summarize; }
edge next { has w; }
walker w {
    has n;
    can summarize;
    here.date = "x\n\"y\"";
    take <-->:next(day);
    take <--;
    spawn here <++:next day { date = 1.5; };
    spawn here ++>:next day {};
    if n { disengage; } else { n = [1, 2.0, null, true]; }
    for i in n { report summarize(i); }
    summarize();
}
"#;
        let p = parse(src).unwrap();
        let text = pretty_print(&p);
        assert_eq!(parse(&text).unwrap(), p);
        assert_eq!(pretty_print(&parse(&text).unwrap()), text);
        assert!(text.starts_with("node day access(audit, process) {\n"));
    }
}
