//! Statement paths, read/write effects, fresh names and constant evaluation.

use std::collections::{BTreeMap, BTreeSet};

use crate::blocks::path;
use crate::interp::eval_binary;
use crate::interp::value::Value;
use crate::lang::ast::*;
use crate::lang::{HeapRegion, LibFn, Ty};

/// Every statement of a method body with its path, in source order.
pub fn enumerate(body: &[Stmt]) -> Vec<(Vec<u32>, &Stmt)> {
    fn go<'a>(list: &'a [Stmt], prefix: &[u32], top: bool, out: &mut Vec<(Vec<u32>, &'a Stmt)>) {
        for (i, s) in list.iter().enumerate() {
            let p = if top { vec![i as u32] } else { [prefix, &[i as u32]].concat() };
            out.push((p.clone(), s));
            match &s.kind {
                StmtKind::If { then_body, else_body, .. } => {
                    go(then_body, &[&p[..], &[path::THEN]].concat(), false, out);
                    if let Some(e) = else_body {
                        go(e, &[&p[..], &[path::ELSE]].concat(), false, out);
                    }
                }
                StmtKind::For { init, update, body, .. } => {
                    if let Some(x) = init {
                        out.push((path::header(&p, path::INIT), x));
                    }
                    go(body, &[&p[..], &[path::BODY]].concat(), false, out);
                    if let Some(x) = update {
                        out.push((path::header(&p, path::UPDATE), x));
                    }
                }
                StmtKind::While { body, .. } => go(body, &[&p[..], &[path::BODY]].concat(), false, out),
                StmtKind::Switch { arms, default, .. } => {
                    for (k, a) in arms.iter().enumerate() {
                        go(&a.body, &[&p[..], &[path::ARM + k as u32]].concat(), false, out);
                    }
                    if let Some(d) = default {
                        go(d, &[&p[..], &[path::DEFAULT]].concat(), false, out);
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    go(body, &[], true, &mut out);
    out
}

fn sub_list(s: &mut Stmt, sel: u32) -> Option<&mut Vec<Stmt>> {
    match (&mut s.kind, sel) {
        (StmtKind::If { then_body, .. }, path::THEN) => Some(then_body),
        (StmtKind::If { else_body: Some(e), .. }, path::ELSE) => Some(e),
        (StmtKind::For { body, .. } | StmtKind::While { body, .. }, path::BODY) => Some(body),
        (StmtKind::Switch { default: Some(d), .. }, path::DEFAULT) => Some(d),
        (StmtKind::Switch { arms, .. }, k) if k >= path::ARM => arms.get_mut((k - path::ARM) as usize).map(|a| &mut a.body),
        _ => None,
    }
}

/// The statement list holding the statement at `p`, and its index there.
/// For-loop header statements are not in any list.
pub fn list_mut<'a>(body: &'a mut Vec<Stmt>, p: &[u32]) -> Option<(&'a mut Vec<Stmt>, usize)> {
    if p.len() % 2 == 0 || p.is_empty() {
        return None;
    }
    let mut list = body;
    let mut k = 0;
    while k + 1 < p.len() {
        let s = list.get_mut(p[k] as usize)?;
        list = sub_list(s, p[k + 1])?;
        k += 2;
    }
    let idx = p[k] as usize;
    (idx < list.len()).then_some((list, idx))
}

pub fn stmt_mut<'a>(body: &'a mut Vec<Stmt>, p: &[u32]) -> Option<&'a mut Stmt> {
    let (list, i) = list_mut(body, p)?;
    list.get_mut(i)
}

pub fn stmt_at<'a>(body: &'a [Stmt], p: &[u32]) -> Option<&'a Stmt> {
    enumerate(body).into_iter().find(|(q, _)| q == p).map(|(_, s)| s)
}

/// Number of statements, counting nested ones.
pub fn size(body: &[Stmt]) -> usize {
    let mut n = 0;
    walk_stmts(body, &mut |_| n += 1);
    n
}

/// All local names declared or used as parameters in a method.
pub fn local_names(m: &MethodDecl) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = m.params.iter().map(|p| p.name.clone()).collect();
    walk_stmts(&m.body, &mut |s| {
        if let StmtKind::Decl { name, .. } = &s.kind {
            names.insert(name.clone());
        }
    });
    names
}

/// Produces identifiers unused in a method and in the global namespace.
pub struct Fresh {
    taken: BTreeSet<String>,
}

impl Fresh {
    pub fn new(program: &Program, method: &MethodDecl) -> Self {
        let mut taken = local_names(method);
        taken.extend(program.globals.iter().map(|g| g.name.clone()));
        taken.extend(program.methods.iter().map(|m| m.name.clone()));
        taken.extend(program.records.iter().map(|r| r.name.clone()));
        Fresh { taken }
    }

    pub fn name(&mut self, base: &str) -> String {
        let mut k = 1;
        loop {
            let n = format!("{base}_{k}");
            if self.taken.insert(n.clone()) {
                return n;
            }
            k += 1;
        }
    }
}

/// What a piece of code may read or write. Locals are tracked by name;
/// record fields by field name regardless of the object.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    pub reads_locals: BTreeSet<String>,
    pub writes_locals: BTreeSet<String>,
    pub reads_globals: BTreeSet<String>,
    pub writes_globals: BTreeSet<String>,
    pub reads_fields: BTreeSet<String>,
    pub writes_fields: BTreeSet<String>,
    pub reads_arrays: bool,
    pub writes_arrays: bool,
    pub reads_regions: BTreeSet<HeapRegion>,
    pub writes_regions: BTreeSet<HeapRegion>,
    pub allocates: bool,
    pub may_trap: bool,
    pub calls: BTreeSet<String>,
}

impl Effects {
    pub fn union(&mut self, o: &Effects) {
        self.reads_locals.extend(o.reads_locals.iter().cloned());
        self.writes_locals.extend(o.writes_locals.iter().cloned());
        self.reads_globals.extend(o.reads_globals.iter().cloned());
        self.writes_globals.extend(o.writes_globals.iter().cloned());
        self.reads_fields.extend(o.reads_fields.iter().cloned());
        self.writes_fields.extend(o.writes_fields.iter().cloned());
        self.reads_arrays |= o.reads_arrays;
        self.writes_arrays |= o.writes_arrays;
        self.reads_regions.extend(o.reads_regions.iter().copied());
        self.writes_regions.extend(o.writes_regions.iter().copied());
        self.allocates |= o.allocates;
        self.may_trap |= o.may_trap;
        self.calls.extend(o.calls.iter().cloned());
    }

    /// No writes of any kind and no allocation.
    pub fn is_pure(&self) -> bool {
        self.writes_locals.is_empty()
            && self.writes_globals.is_empty()
            && self.writes_fields.is_empty()
            && !self.writes_arrays
            && self.writes_regions.is_empty()
            && !self.allocates
    }

    /// Whether anything read by `self` may be written by `w`.
    pub fn conflicts_with(&self, w: &Effects) -> bool {
        !self.reads_locals.is_disjoint(&w.writes_locals)
            || !self.reads_globals.is_disjoint(&w.writes_globals)
            || !self.reads_fields.is_disjoint(&w.writes_fields)
            || (self.reads_arrays && w.writes_arrays)
            || !self.reads_regions.is_disjoint(&w.writes_regions)
    }

    /// Effects visible outside a method: locals are dropped.
    fn external(mut self) -> Effects {
        self.reads_locals.clear();
        self.writes_locals.clear();
        self
    }
}

/// Transitive per-method summaries.
#[derive(Clone, Debug, Default)]
pub struct Summaries(pub BTreeMap<String, Effects>);

impl Summaries {
    pub fn compute(p: &Program) -> Self {
        let mut s = Summaries(p.methods.iter().map(|m| (m.name.clone(), Effects::default())).collect());
        loop {
            let mut changed = false;
            for m in &p.methods {
                let e = s.body(&m.body).external();
                if s.0[&m.name] != e {
                    s.0.insert(m.name.clone(), e);
                    changed = true;
                }
            }
            if !changed {
                return s;
            }
        }
    }

    pub fn is_recursive(&self, method: &str) -> bool {
        self.0.get(method).is_some_and(|e| e.calls.contains(method))
    }

    pub fn expr(&self, e: &Expr) -> Effects {
        let mut fx = Effects::default();
        e.walk(&mut |x| match &x.kind {
            ExprKind::Var { name, global: true } => {
                fx.reads_globals.insert(name.clone());
            }
            ExprKind::Var { name, global: false } => {
                fx.reads_locals.insert(name.clone());
            }
            ExprKind::Field { field, .. } => {
                fx.reads_fields.insert(field.clone());
                fx.may_trap = true;
            }
            ExprKind::Index { .. } => {
                fx.reads_arrays = true;
                fx.may_trap = true;
            }
            ExprKind::Binary { op: BinaryOp::Div, lhs, .. } if lhs.ty == Ty::Int => fx.may_trap = true,
            ExprKind::Call { callee, .. } => {
                fx.calls.insert(callee.clone());
                if let Some(c) = self.0.get(callee) {
                    fx.union(c);
                }
                // Recursion depth limits can trap any call.
                fx.may_trap = true;
            }
            ExprKind::Lib { func, .. } => {
                fx.reads_regions.extend(func.reads().iter().copied());
                fx.writes_regions.extend(func.writes().iter().copied());
                fx.may_trap |= func.may_trap();
                fx.allocates |= matches!(func, LibFn::ListNew | LibFn::BufferNew);
            }
            ExprKind::New { .. } => fx.allocates = true,
            ExprKind::NewArray { .. } => {
                fx.allocates = true;
                fx.may_trap = true;
            }
            _ => {}
        });
        fx
    }

    /// Effects of a single statement, excluding nested bodies.
    pub fn shallow(&self, s: &Stmt) -> Effects {
        let mut fx = Effects::default();
        let target = |t: &Expr, fx: &mut Effects| match &t.kind {
            ExprKind::Var { name, global: true } => {
                fx.writes_globals.insert(name.clone());
            }
            ExprKind::Var { name, global: false } => {
                fx.writes_locals.insert(name.clone());
            }
            ExprKind::Field { object, field } => {
                fx.writes_fields.insert(field.clone());
                fx.union(&self.expr(object));
                fx.may_trap = true;
            }
            ExprKind::Index { array, index } => {
                fx.writes_arrays = true;
                fx.union(&self.expr(array));
                fx.union(&self.expr(index));
                fx.may_trap = true;
            }
            _ => {}
        };
        match &s.kind {
            StmtKind::Decl { name, init, .. } => {
                fx.writes_locals.insert(name.clone());
                if let Some(e) = init {
                    fx.union(&self.expr(e));
                }
            }
            StmtKind::Assign { target: t, value } => {
                target(t, &mut fx);
                fx.union(&self.expr(value));
            }
            StmtKind::IncDec { target: t, .. } => {
                target(t, &mut fx);
                fx.union(&self.expr(t));
            }
            _ => {
                for e in s.exprs() {
                    fx.union(&self.expr(e));
                }
            }
        }
        fx
    }

    /// Effects of a statement including everything nested in it.
    pub fn stmt(&self, s: &Stmt) -> Effects {
        let mut fx = Effects::default();
        s.walk(&mut |x| fx.union(&self.shallow(x)));
        fx
    }

    pub fn body(&self, body: &[Stmt]) -> Effects {
        let mut fx = Effects::default();
        for s in body {
            fx.union(&self.stmt(s));
        }
        fx
    }
}

/// Contains `break` that would leave this statement list's enclosing loop
/// or switch (breaks nested inside inner loops or switches do not count).
pub fn has_escaping_break(body: &[Stmt]) -> bool {
    body.iter().any(|s| match &s.kind {
        StmtKind::Break => true,
        StmtKind::If { then_body, else_body, .. } => {
            has_escaping_break(then_body) || else_body.as_deref().is_some_and(has_escaping_break)
        }
        _ => false,
    })
}

pub fn has_return(body: &[Stmt]) -> bool {
    let mut r = false;
    walk_stmts(body, &mut |s| r |= matches!(s.kind, StmtKind::Return(_)));
    r
}

pub fn has_break(body: &[Stmt]) -> bool {
    let mut r = false;
    walk_stmts(body, &mut |s| r |= matches!(s.kind, StmtKind::Break));
    r
}

/// Locals assigned (not declared) anywhere in the statements.
pub fn assigned_locals(body: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_stmts(body, &mut |s| match &s.kind {
        StmtKind::Assign { target, .. } | StmtKind::IncDec { target, .. } => {
            if let ExprKind::Var { name, global: false } = &target.kind {
                out.insert(name.clone());
            }
        }
        _ => {}
    });
    out
}

/// Compile-time value of an expression built from literals, constant
/// globals and arithmetic, using the interpreter's own arithmetic.
pub fn const_value(p: &Program, e: &Expr) -> Option<Value> {
    match &e.kind {
        ExprKind::Int(v) => Some(Value::Int(*v)),
        ExprKind::Float(v) => Some(Value::Float(*v)),
        ExprKind::Bool(v) => Some(Value::Bool(*v)),
        ExprKind::Var { name, global: true } => {
            let g = p.global(name)?;
            if !g.constant {
                return None;
            }
            let v = const_value(p, g.init.as_ref()?)?;
            Some(coerce(v, g.ty))
        }
        ExprKind::Unary { op: UnaryOp::Neg, operand } => match const_value(p, operand)? {
            Value::Int(v) => Some(Value::Int(v.wrapping_neg())),
            Value::Float(v) => Some(Value::Float(-v)),
            _ => None,
        },
        ExprKind::Unary { op: UnaryOp::Not, operand } => match const_value(p, operand)? {
            Value::Bool(b) => Some(Value::Bool(!b)),
            _ => None,
        },
        ExprKind::Binary { op, lhs, rhs } => {
            let (l, r) = (const_value(p, lhs)?, const_value(p, rhs)?);
            eval_binary(*op, l, r).ok()
        }
        ExprKind::Cast { to, operand } => {
            let v = const_value(p, operand)?;
            Some(if *to == Ty::Int { Value::Int(v.as_int()) } else { Value::Float(v.as_float()) })
        }
        _ => None,
    }
}

fn coerce(v: Value, ty: Ty) -> Value {
    match (v, ty) {
        (Value::Int(x), Ty::Float) => Value::Float(x as f64),
        _ => v,
    }
}

pub fn literal(v: Value) -> Option<Expr> {
    Some(match v {
        Value::Int(x) => Expr::new(ExprKind::Int(x)).with_ty(Ty::Int),
        Value::Float(x) if x.is_finite() => Expr::new(ExprKind::Float(x)).with_ty(Ty::Float),
        Value::Bool(b) => Expr::new(ExprKind::Bool(b)).with_ty(Ty::Bool),
        _ => return None,
    })
}

/// Fixed length of a buffer-valued expression: a global assigned exactly
/// once in the whole program, as a top-level statement of `init()`, from
/// `buffer_new(<constant>)`.
pub fn static_buffer_len(p: &Program, e: &Expr) -> Option<i64> {
    let ExprKind::Var { name, global: true } = &e.kind else { return None };
    let mut sources = Vec::new();
    for m in &p.methods {
        walk_stmts(&m.body, &mut |s| {
            if let StmtKind::Assign { target, value } = &s.kind {
                if target.as_var() == Some(name) && matches!(target.kind, ExprKind::Var { global: true, .. }) {
                    sources.push((m.name.clone(), value.clone()));
                }
            }
        });
    }
    if p.global(name)?.init.is_some() || sources.len() != 1 || sources[0].0 != "init" {
        return None;
    }
    let init = p.method("init")?;
    let top_level = init.body.iter().any(|s| matches!(&s.kind, StmtKind::Assign { target, .. } if target.as_var() == Some(name)));
    let ExprKind::Lib { func: LibFn::BufferNew, args } = &sources[0].1.kind else { return None };
    match const_value(p, &args[0])? {
        Value::Int(n) if top_level && n >= 0 => Some(n),
        _ => None,
    }
}

/// Static value of an integer loop bound: a constant, the fixed length of
/// a buffer, or a local declared right before the loop from one of those
/// and never reassigned.
pub fn static_bound(p: &Program, m: &MethodDecl, before: &[Stmt], e: &Expr) -> Option<i64> {
    if let Some(Value::Int(v)) = const_value(p, e) {
        return Some(v);
    }
    match &e.kind {
        ExprKind::Lib { func: LibFn::BufferLimit, args } => static_buffer_len(p, &args[0]),
        ExprKind::Var { name, global: false } => {
            if assigned_locals(&m.body).contains(name) {
                return None;
            }
            before.iter().rev().find_map(|s| match &s.kind {
                StmtKind::Decl { name: n, init: Some(i), .. } if n == name => static_bound(p, m, &[], i),
                _ => None,
            })
        }
        _ => None,
    }
}

/// Replace every read of local `name` by `with`.
pub fn substitute_local(body: &mut [Stmt], name: &str, with: &Expr) {
    walk_stmts_mut(body, &mut |s| {
        for e in s.exprs_mut() {
            substitute_in_expr(e, name, with);
        }
    });
}

pub fn substitute_in_expr(e: &mut Expr, name: &str, with: &Expr) {
    if matches!(&e.kind, ExprKind::Var { name: n, global: false } if n == name) {
        *e = with.clone();
        return;
    }
    for c in e.children_mut() {
        substitute_in_expr(c, name, with);
    }
}

/// Rename a local everywhere: declarations, reads and assignment targets.
pub fn rename_local(body: &mut [Stmt], from: &str, to: &str) {
    walk_stmts_mut(body, &mut |s| {
        if let StmtKind::Decl { name, .. } = &mut s.kind {
            if name == from {
                *name = to.to_string();
            }
        }
        for e in s.exprs_mut() {
            e.walk_mut(&mut |x| {
                if let ExprKind::Var { name, global: false } = &mut x.kind {
                    if name == from {
                        *name = to.to_string();
                    }
                }
            });
        }
    });
}

pub fn count_local_uses(body: &[Stmt], name: &str) -> usize {
    let mut n = 0;
    walk_stmts(body, &mut |s| {
        for e in s.exprs() {
            e.walk(&mut |x| {
                if matches!(&x.kind, ExprKind::Var { name: v, global: false } if v == name) {
                    n += 1;
                }
            });
        }
    });
    n
}

pub fn count_in_expr(e: &Expr, name: &str) -> usize {
    let mut n = 0;
    e.walk(&mut |x| {
        if matches!(&x.kind, ExprKind::Var { name: v, global: false } if v == name) {
            n += 1;
        }
    });
    n
}

/// Whether `e` performs at least one counted operation of its own.
pub fn has_operation(e: &Expr) -> bool {
    let mut r = false;
    e.walk(&mut |x| {
        r |= !matches!(
            x.kind,
            ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::Var { global: false, .. }
        )
    });
    r
}
