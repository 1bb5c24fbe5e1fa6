//! Source printer. Output always re-parses to the same tree.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for r in &program.records {
        let _ = writeln!(out, "record {} {{", r.name);
        for f in &r.fields {
            let _ = writeln!(out, "    {} {};", f.ty, f.name);
        }
        out.push_str("}\n\n");
    }
    for g in &program.globals {
        let kw = if g.constant { "const" } else { "global" };
        match &g.init {
            Some(e) => {
                let _ = writeln!(out, "{kw} {} {} = {};", g.ty, g.name, expr_to_string(e));
            }
            None => {
                let _ = writeln!(out, "{kw} {} {};", g.ty, g.name);
            }
        }
    }
    if !program.globals.is_empty() {
        out.push('\n');
    }
    for (i, m) in program.methods.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let params: Vec<String> = m.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
        let _ = write!(out, "{} {}({}) ", m.ret, m.name, params.join(", "));
        block(&mut out, &m.body, 0);
        out.push('\n');
    }
    out
}

/// Print a single method, as used in reports.
pub fn method_to_string(m: &MethodDecl) -> String {
    let mut out = String::new();
    let params: Vec<String> = m.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
    let _ = write!(out, "{} {}({}) ", m.ret, m.name, params.join(", "));
    block(&mut out, &m.body, 0);
    out.push('\n');
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn block(out: &mut String, body: &[Stmt], level: usize) {
    if body.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for s in body {
        stmt(out, s, level + 1);
    }
    indent(out, level);
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match &s.kind {
        StmtKind::If { cond, then_body, else_body } => {
            let _ = write!(out, "if ({}) ", expr_to_string(cond));
            block(out, then_body, level);
            if let Some(e) = else_body {
                out.push_str(" else ");
                block(out, e, level);
            }
            out.push('\n');
        }
        StmtKind::For { init, cond, update, body } => {
            let i = init.as_ref().map(|s| simple_to_string(s)).unwrap_or_default();
            let u = update.as_ref().map(|s| simple_to_string(s)).unwrap_or_default();
            let _ = write!(out, "for ({i}; {}; {u}) ", expr_to_string(cond));
            block(out, body, level);
            out.push('\n');
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", expr_to_string(cond));
            block(out, body, level);
            out.push('\n');
        }
        StmtKind::Switch { scrutinee, arms, default } => {
            let _ = writeln!(out, "switch ({}) {{", expr_to_string(scrutinee));
            for arm in arms {
                indent(out, level + 1);
                let _ = writeln!(out, "case {}:", arm.label);
                for s in &arm.body {
                    stmt(out, s, level + 2);
                }
            }
            if let Some(d) = default {
                indent(out, level + 1);
                out.push_str("default:\n");
                for s in d {
                    stmt(out, s, level + 2);
                }
            }
            indent(out, level);
            out.push_str("}\n");
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr_to_string(e));
        }
        StmtKind::Break => out.push_str("break;\n"),
        _ => {
            out.push_str(&simple_to_string(s));
            out.push_str(";\n");
        }
    }
}

/// Declarations, assignments, increments and calls, without `;`.
pub fn simple_to_string(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl { ty, name, init: Some(e) } => format!("{ty} {name} = {}", expr_to_string(e)),
        StmtKind::Decl { ty, name, init: None } => format!("{ty} {name}"),
        StmtKind::Assign { target, value } => format!("{} = {}", expr_to_string(target), expr_to_string(value)),
        StmtKind::IncDec { target, increment } => {
            format!("{}{}", expr_to_string(target), if *increment { "++" } else { "--" })
        }
        StmtKind::Expr(e) => expr_to_string(e),
        _ => {
            let mut out = String::new();
            stmt(&mut out, s, 0);
            out.trim_end().to_string()
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    expr(&mut out, e);
    out
}

/// Postfix-safe: can be followed by `.f` or `[i]` or stand as a unary operand.
fn is_atomic(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Var { .. }
            | ExprKind::Field { .. }
            | ExprKind::Index { .. }
            | ExprKind::Call { .. }
            | ExprKind::Lib { .. }
            | ExprKind::New { .. }
            | ExprKind::Bool(_)
            | ExprKind::Null
    ) || matches!(e.kind, ExprKind::Int(v) if v >= 0)
        || matches!(e.kind, ExprKind::Float(v) if v.is_sign_positive())
}

fn parenthesized(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}

fn expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Float(v) => {
            let _ = write!(out, "{v:?}");
        }
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Null => out.push_str("null"),
        ExprKind::Var { name, .. } => out.push_str(name),
        ExprKind::Field { object, field } => {
            parenthesized(out, object, !is_atomic(object) || object.is_literal());
            out.push('.');
            out.push_str(field);
        }
        ExprKind::Index { array, index } => {
            parenthesized(out, array, !is_atomic(array) || array.is_literal());
            out.push('[');
            expr(out, index);
            out.push(']');
        }
        ExprKind::Unary { op, operand } => {
            match op {
                UnaryOp::Neg => {
                    out.push('-');
                    // A bare literal after `-` would be read back as a negative literal.
                    let bare = is_atomic(operand) && !operand.is_literal();
                    parenthesized(out, operand, !bare);
                }
                UnaryOp::Not => {
                    out.push('!');
                    let bare = !matches!(operand.kind, ExprKind::Binary { .. });
                    parenthesized(out, operand, !bare);
                }
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let lp = matches!(&lhs.kind, ExprKind::Binary { op: l, .. } if l.precedence() < prec);
            let rp = matches!(&rhs.kind, ExprKind::Binary { op: r, .. } if r.precedence() <= prec);
            parenthesized(out, lhs, lp);
            let _ = write!(out, " {} ", op.symbol());
            parenthesized(out, rhs, rp);
        }
        ExprKind::Cast { to, operand } => {
            let _ = write!(out, "({to}) ");
            parenthesized(out, operand, matches!(operand.kind, ExprKind::Binary { .. }));
        }
        ExprKind::Call { callee, args } => call(out, callee, args),
        ExprKind::Lib { func, args } => call(out, func.name(), args),
        ExprKind::New { record } => {
            let _ = write!(out, "new {record}()");
        }
        ExprKind::NewArray { ty, len } => {
            let elem = match ty {
                super::types::Ty::FloatArray => "float",
                super::types::Ty::CharArray => "char",
                _ => "int",
            };
            let _ = write!(out, "new {elem}[");
            expr(out, len);
            out.push(']');
        }
    }
}

fn call(out: &mut String, name: &str, args: &[Expr]) {
    out.push_str(name);
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, a);
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_source;

    fn round_trip(src: &str) {
        let p = parse_source(src).unwrap();
        let printed = pretty_print(&p);
        let q = parse_source(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(p, q, "{printed}");
    }

    #[test]
    fn empty_body_prints_braces() {
        let p = parse_source("void f(){}").unwrap();
        assert_eq!(pretty_print(&p), "void f() {}\n");
    }

    #[test]
    fn tricky_expressions_round_trip() {
        round_trip("int f(int a, int b){ return -(1) - -1 - (a - b) + -a * (b + 1) + (int) (2.5 * -0.5); }");
        round_trip("bool g(bool p, int a){ return !(p && a > 1) || !p == (a << 2 >> 1 & 3 | 1 < 0); }");
        round_trip("record R { int[] xs; } int h(Object o){ if (o != null) return o.xs[o.xs.length - 1]; else { return 0; } }");
    }

    #[test]
    fn statements_round_trip() {
        round_trip(
            "global int n = 2; const float K = -1.5e-7;
             void f(int k){ int i; for (i = 0; i < 4; i++) { n = n + i; } while (k > 0) { --k; }
               switch (k) { case 0: emit_int(0); break; case -1: default: emit_int(2); } }",
        );
    }
}
