//! JSON view of the AST: node kind, type annotation, span and children.

use serde_json::{json, Value};

use super::ast::*;

pub fn program_to_json(program: &Program) -> Value {
    json!({
        "kind": "Program",
        "records": program.records.iter().map(|r| json!({
            "kind": "Record",
            "name": r.name,
            "span": span(r.span),
            "fields": r.fields.iter().map(|f| json!({"name": f.name, "type": f.ty.name()})).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "globals": program.globals.iter().map(|g| json!({
            "kind": if g.constant { "Const" } else { "Global" },
            "name": g.name,
            "type": g.ty.name(),
            "span": span(g.span),
            "children": g.init.iter().map(expr_json).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "methods": program.methods.iter().map(|m| json!({
            "kind": "Method",
            "name": m.name,
            "type": m.ret.name(),
            "params": m.params.iter().map(|p| json!({"name": p.name, "type": p.ty.name()})).collect::<Vec<_>>(),
            "span": span(m.span),
            "children": m.body.iter().map(stmt_json).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

fn span(s: Span) -> Value {
    json!({"line": s.line, "column": s.col})
}

fn body_json(kind: &str, body: &[Stmt]) -> Value {
    json!({"kind": kind, "children": body.iter().map(stmt_json).collect::<Vec<_>>()})
}

fn stmt_json(s: &Stmt) -> Value {
    let (kind, mut extra, children): (&str, Value, Vec<Value>) = match &s.kind {
        StmtKind::Decl { ty, name, init } => {
            ("Decl", json!({"name": name, "type": ty.name()}), init.iter().map(expr_json).collect())
        }
        StmtKind::Assign { target, value } => ("Assign", json!({}), vec![expr_json(target), expr_json(value)]),
        StmtKind::IncDec { target, increment } => {
            (if *increment { "Increment" } else { "Decrement" }, json!({}), vec![expr_json(target)])
        }
        StmtKind::If { cond, then_body, else_body } => {
            let mut c = vec![expr_json(cond), body_json("Then", then_body)];
            if let Some(e) = else_body {
                c.push(body_json("Else", e));
            }
            ("If", json!({}), c)
        }
        StmtKind::For { init, cond, update, body } => {
            let header = |s: &Option<Box<Stmt>>| s.as_deref().map(stmt_json).unwrap_or(Value::Null);
            ("For", json!({}), vec![header(init), expr_json(cond), header(update), body_json("Body", body)])
        }
        StmtKind::While { cond, body } => ("While", json!({}), vec![expr_json(cond), body_json("Body", body)]),
        StmtKind::Switch { scrutinee, arms, default } => {
            let mut c = vec![expr_json(scrutinee)];
            for a in arms {
                let mut arm = body_json("Case", &a.body);
                arm["label"] = json!(a.label);
                c.push(arm);
            }
            if let Some(d) = default {
                c.push(body_json("Default", d));
            }
            ("Switch", json!({}), c)
        }
        StmtKind::Expr(e) => ("ExprStmt", json!({}), vec![expr_json(e)]),
        StmtKind::Return(e) => ("Return", json!({}), e.iter().map(expr_json).collect()),
        StmtKind::Break => ("Break", json!({}), vec![]),
    };
    extra["kind"] = json!(kind);
    extra["span"] = span(s.span);
    extra["children"] = Value::Array(children);
    extra
}

fn expr_json(e: &Expr) -> Value {
    let mut v = match &e.kind {
        ExprKind::Int(x) => json!({"kind": "Int", "value": x}),
        ExprKind::Float(x) => json!({"kind": "Float", "value": x}),
        ExprKind::Bool(x) => json!({"kind": "Bool", "value": x}),
        ExprKind::Null => json!({"kind": "Null"}),
        ExprKind::Var { name, global } => json!({"kind": "Var", "name": name, "global": global}),
        ExprKind::Field { field, .. } => json!({"kind": "Field", "field": field}),
        ExprKind::Index { .. } => json!({"kind": "Index"}),
        ExprKind::Unary { op, .. } => json!({"kind": "Unary", "op": if *op == UnaryOp::Neg { "-" } else { "!" }}),
        ExprKind::Binary { op, .. } => json!({"kind": "Binary", "op": op.symbol()}),
        ExprKind::Cast { to, .. } => json!({"kind": "Cast", "to": to.name()}),
        ExprKind::Call { callee, .. } => json!({"kind": "Call", "callee": callee}),
        ExprKind::Lib { func, .. } => json!({"kind": "LibCall", "callee": func.name()}),
        ExprKind::New { record } => json!({"kind": "New", "record": record}),
        ExprKind::NewArray { ty, .. } => json!({"kind": "NewArray", "type": ty.name()}),
    };
    v["type"] = json!(e.ty.name());
    v["span"] = span(e.span);
    v["children"] = Value::Array(e.children().into_iter().map(expr_json).collect());
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load;

    #[test]
    fn dump_carries_types_and_spans() {
        let p = load("int f(){ return 1 + 2; }").unwrap();
        let v = program_to_json(&p);
        let ret = &v["methods"][0]["children"][0];
        assert_eq!(ret["kind"], "Return");
        assert_eq!(ret["children"][0]["type"], "int");
        assert_eq!(ret["children"][0]["op"], "+");
        assert_eq!(ret["span"]["line"], 1);
    }
}
