//! Source-to-source refactorings. Each takes a type-checked program and
//! returns a new program, or explains why it does not apply.

use std::collections::BTreeSet;

use crate::blocks::{BlockMap, OpKind, Targets};
use crate::interp::value::Value;
use crate::lang::ast::*;
use crate::lang::{pretty_print, CheckedProgram, LibFn, Ty};

use super::analysis::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("not applicable: {0}")]
pub struct NotApplicable(pub String);

pub type Rewrite = Result<Program, NotApplicable>;

fn na<T>(msg: impl Into<String>) -> Result<T, NotApplicable> {
    Err(NotApplicable(msg.into()))
}

/// Re-parses and re-checks a rewritten program.
pub fn reload(p: &Program) -> Result<CheckedProgram, NotApplicable> {
    crate::lang::load(&pretty_print(p)).map_err(|e| NotApplicable(format!("rewritten program is invalid: {e}")))
}

fn var(name: &str, ty: Ty) -> Expr {
    Expr::local(name).with_ty(ty)
}

fn decl(ty: Ty, name: &str, init: Option<Expr>) -> Stmt {
    Stmt::new(StmtKind::Decl { ty, name: name.to_string(), init })
}

/// Loop statement (method, path) whose body or header is `block`.
pub fn find_loop(cp: &CheckedProgram, map: &BlockMap, block: &str) -> Option<(String, Vec<u32>)> {
    let i = map.index_of(block)?;
    let body = map.fold_target(i);
    let method = &map.blocks[i].method;
    let m = cp.method(method)?;
    enumerate(&m.body).into_iter().find_map(|(p, s)| {
        let pl = map.placement(method, &p)?;
        let hit = match (&s.kind, &pl.targets) {
            (StmtKind::For { .. }, Targets::For { body: b, .. }) | (StmtKind::While { .. }, Targets::While { body: b, .. }) => *b == body,
            _ => false,
        };
        hit.then(|| (method.clone(), p))
    })
}

/// Paths of the statements whose own operations are counted in `block`.
pub fn stmts_in_block(cp: &CheckedProgram, map: &BlockMap, block: &str) -> Vec<Vec<u32>> {
    let Some(i) = map.index_of(block) else { return vec![] };
    let method = &map.blocks[i].method;
    let Some(m) = cp.method(method) else { return vec![] };
    enumerate(&m.body).into_iter().filter(|(p, _)| map.placement(method, p).is_some_and(|pl| pl.block == i)).map(|(p, _)| p).collect()
}

fn with_method(cp: &CheckedProgram, name: &str, f: impl FnOnce(&mut MethodDecl) -> Result<(), NotApplicable>) -> Rewrite {
    let mut p = cp.program().clone();
    let m = p.method_mut(name).ok_or_else(|| NotApplicable(format!("no method `{name}`")))?;
    f(m)?;
    reload(&p)?;
    Ok(p)
}

/// Calls `f` on every statement list in the body until it returns true.
fn any_list_mut(list: &mut Vec<Stmt>, f: &mut impl FnMut(&mut Vec<Stmt>) -> bool) -> bool {
    if f(list) {
        return true;
    }
    for s in list.iter_mut() {
        for b in s.bodies_mut() {
            if any_list_mut(b, f) {
                return true;
            }
        }
    }
    false
}

fn top_decls(body: &[Stmt]) -> BTreeSet<String> {
    body.iter()
        .filter_map(|s| match &s.kind {
            StmtKind::Decl { name, .. } => Some(name.clone()),
            _ => None,
        })
        .collect()
}

fn all_decls(body: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_stmts(body, &mut |s| {
        if let StmtKind::Decl { name, .. } = &s.kind {
            out.insert(name.clone());
        }
    });
    out
}

// ---------------------------------------------------------------- if combination

/// Merges `if (c) A; S; if (c) B;` into `if (c) { A; S; B } else { S }`.
pub fn if_combination(cp: &CheckedProgram, method: &str) -> Rewrite {
    let sums = Summaries::compute(cp);
    let mut refusal = String::from("no pair of ifs with the same predicate");
    with_method(cp, method, |m| {
        let done = any_list_mut(&mut m.body, &mut |list| {
            for a in 0..list.len() {
                let StmtKind::If { cond: c1, then_body: t1, else_body: None } = &list[a].kind else { continue };
                for b in a + 1..list.len() {
                    let StmtKind::If { cond: c2, then_body: t2, else_body: None } = &list[b].kind else { continue };
                    if c1 != c2 {
                        continue;
                    }
                    let s = &list[a + 1..b];
                    let cfx = sums.expr(c1);
                    if !cfx.is_pure() {
                        refusal = "predicate has side effects".into();
                        continue;
                    }
                    let mut between = sums.body(t1);
                    between.union(&sums.body(s));
                    if cfx.conflicts_with(&between) {
                        refusal = "predicate inputs may change between the two tests".into();
                        continue;
                    }
                    if !top_decls(s).is_empty() {
                        refusal = "intervening statements declare variables".into();
                        continue;
                    }
                    let later: BTreeSet<String> = all_decls(s).union(&all_decls(t2)).cloned().collect();
                    if !top_decls(t1).is_disjoint(&later) {
                        refusal = "merged bodies would redeclare a variable".into();
                        continue;
                    }
                    let (t1, t2, cond) = (t1.clone(), t2.clone(), c1.clone());
                    let s: Vec<Stmt> = s.to_vec();
                    let mut then_body = t1;
                    then_body.extend(s.iter().cloned());
                    then_body.extend(t2);
                    let merged = Stmt::new(StmtKind::If { cond, then_body, else_body: Some(s) });
                    list.splice(a..=b, [merged]);
                    return true;
                }
            }
            false
        });
        if done { Ok(()) } else { na(refusal.clone()) }
    })
}

// ---------------------------------------------------------------- inlining

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InlineConfig {
    pub max_statements: usize,
}

impl Default for InlineConfig {
    fn default() -> Self {
        InlineConfig { max_statements: 30 }
    }
}

/// A method whose whole body is `return <expr>` using each parameter once.
pub fn is_accessor(cp: &CheckedProgram, m: &MethodDecl) -> bool {
    let [Stmt { kind: StmtKind::Return(Some(e)), .. }] = m.body.as_slice() else { return false };
    let sums = Summaries::compute(cp);
    let fx = sums.expr(e);
    fx.is_pure() && fx.calls.is_empty() && e.ty == m.ret && m.params.iter().all(|p| count_in_expr(e, &p.name) == 1)
}

fn inline_accessor_in_expr(e: &mut Expr, callee: &MethodDecl, body: &Expr, sums: &Summaries) -> usize {
    let mut n = 0;
    for c in e.children_mut() {
        n += inline_accessor_in_expr(c, callee, body, sums);
    }
    if let ExprKind::Call { callee: name, args } = &e.kind {
        if *name == callee.name {
            let safe_order = args.len() <= 1 || args.iter().all(|a| {
                let fx = sums.expr(a);
                fx.is_pure() && !fx.may_trap
            });
            if safe_order {
                let mut out = body.clone();
                subst_params(&mut out, &callee.params, args);
                *e = out;
                n += 1;
            }
        }
    }
    n
}

/// Simultaneous substitution of parameters by argument expressions.
fn subst_params(e: &mut Expr, params: &[Param], args: &[Expr]) {
    if let ExprKind::Var { name, global: false } = &e.kind {
        if let Some(k) = params.iter().position(|p| &p.name == name) {
            *e = args[k].clone();
            return;
        }
    }
    for c in e.children_mut() {
        subst_params(c, params, args);
    }
}

/// Replaces every call of accessor `callee` by the expression it returns.
pub fn inline_accessor(cp: &CheckedProgram, callee: &str) -> Rewrite {
    let m = cp.method(callee).ok_or_else(|| NotApplicable(format!("no method `{callee}`")))?;
    if !is_accessor(cp, m) {
        return na(format!("`{callee}` is not an accessor"));
    }
    let StmtKind::Return(Some(body)) = &m.body[0].kind else { unreachable!() };
    let sums = Summaries::compute(cp);
    let mut p = cp.program().clone();
    let mut n = 0;
    for caller in p.methods.iter_mut().filter(|x| x.name != callee) {
        walk_stmts_mut(&mut caller.body, &mut |s| {
            for e in s.exprs_mut() {
                n += inline_accessor_in_expr(e, m, body, &sums);
            }
        });
    }
    if n == 0 {
        return na(format!("no call sites of `{callee}`"));
    }
    reload(&p)?;
    Ok(p)
}

fn inlinable(cp: &CheckedProgram, sums: &Summaries, caller: &str, callee: &MethodDecl, cfg: &InlineConfig) -> Result<(), NotApplicable> {
    if callee.name == caller || sums.is_recursive(&callee.name) {
        return na(format!("`{}` is recursive", callee.name));
    }
    if size(&callee.body) > cfg.max_statements {
        return na(format!("`{}` is larger than {} statements", callee.name, cfg.max_statements));
    }
    let (last, rest) = match callee.body.split_last() {
        Some((l, r)) if matches!(l.kind, StmtKind::Return(_)) => (Some(l), r),
        _ => (None, callee.body.as_slice()),
    };
    if has_return(rest) || (callee.ret != Ty::Void && last.is_none()) {
        return na(format!("`{}` returns from more than one place", callee.name));
    }
    let _ = cp;
    Ok(())
}

/// Statements equivalent to a call of `callee` with `args`, and the
/// returned expression if any.
fn expand_call(program: &Program, caller: &MethodDecl, callee: &MethodDecl, args: &[Expr], fresh: &mut Fresh) -> (Vec<Stmt>, Option<Expr>) {
    let _ = program;
    let mut body = callee.body.clone();
    let ret = match body.last().map(|s| &s.kind) {
        Some(StmtKind::Return(e)) => {
            let e = e.clone();
            body.pop();
            e
        }
        _ => None,
    };
    let mut ret_holder = vec![Stmt::new(StmtKind::Return(ret))];
    for name in all_decls(&body) {
        let to = fresh.name(&name);
        rename_local(&mut body, &name, &to);
        rename_local(&mut ret_holder, &name, &to);
    }
    let assigned = assigned_locals(&callee.body);
    let mut prelude = Vec::new();
    for (prm, arg) in callee.params.iter().zip(args) {
        let direct = !assigned.contains(&prm.name)
            && (arg.is_literal() || matches!(arg.kind, ExprKind::Var { global: false, .. }))
            && arg.ty == prm.ty;
        if direct {
            substitute_local(&mut body, &prm.name, arg);
            substitute_local(&mut ret_holder, &prm.name, arg);
        } else {
            let t = fresh.name(&prm.name);
            rename_local(&mut body, &prm.name, &t);
            rename_local(&mut ret_holder, &prm.name, &t);
            prelude.push(decl(prm.ty, &t, Some(arg.clone())));
        }
    }
    let _ = caller;
    prelude.extend(body);
    let StmtKind::Return(ret) = ret_holder.pop().expect("holder").kind else { unreachable!() };
    (prelude, ret)
}

/// Inlines statement-level calls to `callee` inside `caller` at the given
/// statement paths (all eligible sites when `sites` is `None`).
pub fn inline_calls(cp: &CheckedProgram, caller: &str, callee: &str, sites: Option<&[Vec<u32>]>, cfg: &InlineConfig) -> Rewrite {
    let sums = Summaries::compute(cp);
    let target = cp.method(callee).ok_or_else(|| NotApplicable(format!("no method `{callee}`")))?;
    inlinable(cp, &sums, caller, target, cfg)?;
    let src = cp.method(caller).ok_or_else(|| NotApplicable(format!("no method `{caller}`")))?;
    let mut paths: Vec<Vec<u32>> = enumerate(&src.body)
        .into_iter()
        .filter(|(p, s)| p.len() % 2 == 1 && sites.map_or(true, |v| v.contains(p)) && call_site(s, callee).is_some())
        .map(|(p, _)| p)
        .collect();
    if paths.is_empty() {
        return na(format!("no statement-level call of `{callee}` in `{caller}`"));
    }
    // Later siblings first so earlier paths stay valid.
    paths.sort_by(|a, b| b.cmp(a));
    let program = cp.program().clone();
    let mut fresh = Fresh::new(&program, src);
    for n in local_names(target) {
        fresh.name(&n);
    }
    let mut p = program.clone();
    let m = p.method_mut(caller).expect("checked");
    let caller_copy = m.clone();
    for site in &paths {
        let (list, i) = list_mut(&mut m.body, site).expect("enumerated path");
        let (kind, args) = call_site(&list[i], callee).expect("filtered");
        let (mut stmts, ret) = expand_call(&program, &caller_copy, target, &args, &mut fresh);
        match (kind, ret) {
            (Site::Stmt, None) => {}
            (Site::Stmt, Some(e)) => {
                let fx = sums.expr(&e);
                if !(fx.is_pure() && !fx.may_trap) {
                    stmts.push(Stmt::new(StmtKind::Expr(e)));
                }
            }
            (Site::Decl(ty, name), Some(e)) => stmts.push(decl(ty, &name, Some(e))),
            (Site::Assign(t), Some(e)) => stmts.push(Stmt::new(StmtKind::Assign { target: t, value: e })),
            _ => return na("call result shape not supported"),
        }
        if stmts.iter().any(|s| matches!(s.kind, StmtKind::Expr(ref e) if !matches!(e.kind, ExprKind::Call { .. } | ExprKind::Lib { .. }))) {
            return na("returned value cannot be kept as a statement");
        }
        list.splice(i..=i, stmts);
    }
    reload(&p)?;
    Ok(p)
}

enum Site {
    Stmt,
    Decl(Ty, String),
    Assign(Expr),
}

fn call_site(s: &Stmt, callee: &str) -> Option<(Site, Vec<Expr>)> {
    let call = |e: &Expr| match &e.kind {
        ExprKind::Call { callee: c, args } if c == callee => Some(args.clone()),
        _ => None,
    };
    match &s.kind {
        StmtKind::Expr(e) => call(e).map(|a| (Site::Stmt, a)),
        StmtKind::Decl { ty, name, init: Some(e) } => call(e).map(|a| (Site::Decl(*ty, name.clone()), a)),
        StmtKind::Assign { target, value } if matches!(target.kind, ExprKind::Var { global: false, .. }) => {
            call(value).map(|a| (Site::Assign(target.clone()), a))
        }
        _ => None,
    }
}

/// Inlines every eligible call made from `block`; if `block` is the entry of
/// an accessor, inlines that accessor at all of its call sites instead.
pub fn inline_in_block(cp: &CheckedProgram, map: &BlockMap, block: &str, cfg: &InlineConfig) -> Rewrite {
    let info = map.get(block).ok_or_else(|| NotApplicable(format!("no block `{block}`")))?;
    let method = info.method.clone();
    if BlockMap::entry_id(&method) == block {
        if let Some(m) = cp.method(&method) {
            if is_accessor(cp, m) {
                return inline_accessor(cp, &method);
            }
        }
    }
    let sites = stmts_in_block(cp, map, block);
    let m = cp.method(&method).expect("block method exists");
    let mut callees: Vec<String> = Vec::new();
    for p in &sites {
        if let Some(s) = stmt_at(&m.body, p) {
            for e in s.exprs() {
                e.walk(&mut |x| {
                    if let ExprKind::Call { callee, .. } = &x.kind {
                        if !callees.contains(callee) {
                            callees.push(callee.clone());
                        }
                    }
                });
            }
        }
    }
    let mut current: Option<Program> = None;
    let mut reasons = Vec::new();
    for callee in callees {
        let base = match &current {
            Some(p) => reload(p)?,
            None => cp.clone(),
        };
        let accessor = base.method(&callee).is_some_and(|c| is_accessor(&base, c));
        let r = if accessor {
            inline_accessor(&base, &callee)
        } else {
            let bmap = crate::blocks::divide_blocks(&base);
            let here = if current.is_none() { Some(sites.clone()) } else { Some(stmts_in_block(&base, &bmap, block)) };
            inline_calls(&base, &method, &callee, here.as_deref(), cfg)
        };
        match r {
            Ok(p) => current = Some(p),
            Err(e) => reasons.push(format!("{callee}: {}", e.0)),
        }
    }
    current.ok_or_else(|| NotApplicable(if reasons.is_empty() { "no calls in block".into() } else { reasons.join("; ") }))
}

// ---------------------------------------------------------------- loop-invariant code motion

fn hoist_base(e: &Expr) -> &'static str {
    match &e.kind {
        ExprKind::Lib { func: LibFn::BufferLimit, .. } => "limit",
        ExprKind::Lib { func: LibFn::ListSize, .. } => "size",
        _ => "inv",
    }
}

/// Maximal invariant subexpressions of `e`. Plain variable reads stay put.
fn invariant_parts(e: &Expr, sums: &Summaries, loop_fx: &Effects, need_safe: bool, out: &mut Vec<Expr>) {
    if matches!(e.kind, ExprKind::Var { .. }) {
        return;
    }
    let fx = sums.expr(e);
    let ok = has_operation(e) && fx.is_pure() && !fx.conflicts_with(loop_fx) && !(need_safe && fx.may_trap) && e.ty != Ty::Unknown;
    if ok {
        if !out.contains(e) {
            out.push(e.clone());
        }
        return;
    }
    for c in e.children() {
        invariant_parts(c, sums, loop_fx, need_safe, out);
    }
}

fn replace_expr(e: &mut Expr, from: &Expr, to: &Expr) {
    if e == from {
        *e = to.clone();
        return;
    }
    for c in e.children_mut() {
        replace_expr(c, from, to);
    }
}

/// Hoists loop-invariant expressions and body declarations out of the loop
/// whose body or header is `block`.
pub fn loop_invariant_motion(cp: &CheckedProgram, map: &BlockMap, block: &str) -> Rewrite {
    let (method, lp) = find_loop(cp, map, block).ok_or_else(|| NotApplicable(format!("`{block}` is not part of a loop")))?;
    let sums = Summaries::compute(cp);
    let program = cp.program().clone();
    let mut fresh = Fresh::new(&program, cp.method(&method).expect("exists"));
    with_method(cp, &method, |m| {
        let (list, i) = list_mut(&mut m.body, &lp).ok_or_else(|| NotApplicable("loop is a header statement".into()))?;
        let loop_fx = sums.stmt(&list[i]);
        let mut hoisted: Vec<Stmt> = Vec::new();
        let mut stmt = list[i].clone();
        let (cond, body) = match &mut stmt.kind {
            StmtKind::For { cond, body, .. } | StmtKind::While { cond, body } => (cond, body),
            _ => return na("not a loop"),
        };
        let mut parts = Vec::new();
        invariant_parts(cond, &sums, &loop_fx, false, &mut parts);
        for s in body.iter() {
            if !s.is_compound() {
                for e in s.exprs() {
                    if let StmtKind::Assign { target, .. } | StmtKind::IncDec { target, .. } = &s.kind {
                        if std::ptr::eq(e, target) {
                            continue;
                        }
                    }
                    invariant_parts(e, &sums, &loop_fx, true, &mut parts);
                }
            }
        }
        for part in parts {
            let t = fresh.name(hoist_base(&part));
            let v = var(&t, part.ty);
            replace_expr(cond, &part, &v);
            walk_stmts_mut(body, &mut |s| {
                for e in s.exprs_mut() {
                    replace_expr(e, &part, &v);
                }
            });
            hoisted.push(decl(part.ty, &t, Some(part)));
        }
        for k in 0..body.len() {
            if let StmtKind::Decl { ty, name, init: Some(init) } = &body[k].kind {
                let (ty, name, init) = (*ty, name.clone(), init.clone());
                let h = fresh.name(&name);
                body[k] = Stmt::new(StmtKind::Assign { target: var(&name, ty), value: init });
                rename_local(body, &name, &h);
                hoisted.push(decl(ty, &h, None));
            }
        }
        if hoisted.is_empty() {
            return na("nothing loop-invariant to hoist");
        }
        list.splice(i..=i, hoisted.into_iter().chain([stmt]));
        Ok(())
    })
}

// ---------------------------------------------------------------- unrolling

struct Counted {
    index: String,
    start: i64,
    bound: i64,
    stride: i64,
}

fn counted_loop(p: &Program, m: &MethodDecl, before: &[Stmt], s: &Stmt) -> Result<Counted, NotApplicable> {
    let StmtKind::For { init: Some(init), cond, update: Some(update), body } = &s.kind else {
        return na("not a counted for-loop");
    };
    let StmtKind::Decl { ty: Ty::Int, name, init: Some(i0) } = &init.kind else { return na("loop index is not declared as int") };
    let Some(Value::Int(start)) = const_value(p, i0) else { return na("start value is not constant") };
    let ExprKind::Binary { op: BinaryOp::Lt, lhs, rhs } = &cond.kind else { return na("condition is not `index < bound`") };
    if lhs.as_var() != Some(name.as_str()) {
        return na("condition is not `index < bound`");
    }
    let bound = static_bound(p, m, before, rhs).ok_or_else(|| NotApplicable("loop bound is not known before the loop runs".into()))?;
    let stride = match &update.kind {
        StmtKind::IncDec { target, increment: true } if target.as_var() == Some(name) => 1,
        StmtKind::Assign { target, value } if target.as_var() == Some(name) => match &value.kind {
            ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } if lhs.as_var() == Some(name) => match const_value(p, rhs) {
                Some(Value::Int(s)) if s > 0 => s,
                _ => return na("stride is not a positive constant"),
            },
            _ => return na("update is not `index = index + stride`"),
        },
        _ => return na("update is not an increment of the index"),
    };
    if assigned_locals(body).contains(name) {
        return na("body assigns the loop index");
    }
    Ok(Counted { index: name.clone(), start, bound, stride })
}

/// Folds `(x + a) + b` into `x + (a+b)` for integer literals.
fn merge_offsets(e: &mut Expr) {
    for c in e.children_mut() {
        merge_offsets(c);
    }
    if let ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } = &mut e.kind {
        if let (ExprKind::Binary { op: BinaryOp::Add, lhs: x, rhs: a }, ExprKind::Int(b)) = (&lhs.kind, &rhs.kind) {
            if let ExprKind::Int(a) = a.kind {
                let sum = a.wrapping_add(*b);
                *e = Expr::binary(BinaryOp::Add, (**x).clone(), Expr::int(sum).with_ty(Ty::Int)).with_ty(Ty::Int);
            }
        }
    }
}

pub fn unroll_trip_count(cp: &CheckedProgram, map: &BlockMap, block: &str) -> Result<(i64, i64), NotApplicable> {
    let (method, lp) = find_loop(cp, map, block).ok_or_else(|| NotApplicable(format!("`{block}` is not part of a loop")))?;
    let m = cp.method(&method).expect("exists");
    let mut body = m.body.clone();
    let (list, i) = list_mut(&mut body, &lp).ok_or_else(|| NotApplicable("loop is a header statement".into()))?;
    let c = counted_loop(cp, m, &list[..i], &list[i])?;
    let span = (c.bound - c.start).max(0);
    Ok(((span + c.stride - 1) / c.stride, c.stride))
}

/// Largest factor in {8, 4, 2} dividing the trip count.
pub fn choose_unroll_factor(trips: i64) -> Option<usize> {
    [8, 4, 2].into_iter().find(|f| trips >= *f as i64 && trips % *f as i64 == 0)
}

/// Replicates the body `factor` times with shifted index and multiplies the
/// stride. `None` picks the largest factor in {8, 4, 2} that divides the trip count.
pub fn loop_unroll(cp: &CheckedProgram, map: &BlockMap, block: &str, factor: Option<usize>) -> Rewrite {
    let (method, lp) = find_loop(cp, map, block).ok_or_else(|| NotApplicable(format!("`{block}` is not part of a loop")))?;
    let m0 = cp.method(&method).expect("exists").clone();
    let program = cp.program().clone();
    let mut fresh = Fresh::new(&program, &m0);
    with_method(cp, &method, |m| {
        let (list, i) = list_mut(&mut m.body, &lp).ok_or_else(|| NotApplicable("loop is a header statement".into()))?;
        let c = counted_loop(&program, &m0, &list[..i], &list[i])?;
        let StmtKind::For { body, update, .. } = &mut list[i].kind else { unreachable!() };
        if has_escaping_break(body) || has_return(body) {
            return na("body can leave the loop early");
        }
        let span = c.bound - c.start;
        if span <= 0 || span % c.stride != 0 {
            return na(format!("range {span} is not a multiple of the stride {}", c.stride));
        }
        let trips = span / c.stride;
        let f = match factor {
            Some(f) if f >= 2 => f,
            Some(f) => return na(format!("factor {f} is too small")),
            None => choose_unroll_factor(trips).ok_or_else(|| NotApplicable(format!("no factor in {{8, 4, 2}} divides {trips} iterations")))?,
        };
        if trips % f as i64 != 0 {
            return na(format!("{span} is not divisible by factor × stride = {}", f as i64 * c.stride));
        }
        let original = body.clone();
        let mut out = original.clone();
        for k in 1..f {
            let mut copy = original.clone();
            let shifted = Expr::binary(BinaryOp::Add, var(&c.index, Ty::Int), Expr::int(k as i64 * c.stride).with_ty(Ty::Int)).with_ty(Ty::Int);
            substitute_local(&mut copy, &c.index, &shifted);
            for d in all_decls(&copy) {
                let to = fresh.name(&d);
                rename_local(&mut copy, &d, &to);
            }
            walk_stmts_mut(&mut copy, &mut |s| {
                for e in s.exprs_mut() {
                    merge_offsets(e);
                }
            });
            out.extend(copy);
        }
        *body = out;
        let step = Expr::binary(BinaryOp::Add, var(&c.index, Ty::Int), Expr::int(f as i64 * c.stride).with_ty(Ty::Int));
        *update = Some(Box::new(Stmt::new(StmtKind::Assign { target: var(&c.index, Ty::Int), value: step })));
        Ok(())
    })
}

// ---------------------------------------------------------------- library replacement

/// Index offset of `e` relative to `index`: `index` is 0, `index + k` is k.
fn offset_of(e: &Expr, index: &str) -> Option<i64> {
    match &e.kind {
        ExprKind::Var { name, global: false } if name == index => Some(0),
        ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } => match (&lhs.kind, &rhs.kind) {
            (ExprKind::Var { name, global: false }, ExprKind::Int(k)) if name == index => Some(*k),
            _ => None,
        },
        _ => None,
    }
}

/// Recognizes an element-by-element copy of a whole buffer into another
/// and replaces it with one `buffer_bulk_put`.
pub fn library_replacement(cp: &CheckedProgram, map: &BlockMap, block: &str) -> Rewrite {
    let (method, lp) = find_loop(cp, map, block).ok_or_else(|| NotApplicable(format!("`{block}` is not part of a loop")))?;
    let m0 = cp.method(&method).expect("exists").clone();
    let program = cp.program().clone();
    with_method(cp, &method, |m| {
        let (list, i) = list_mut(&mut m.body, &lp).ok_or_else(|| NotApplicable("loop is a header statement".into()))?;
        let StmtKind::For { init: Some(init), cond, update: Some(update), body } = &list[i].kind else {
            return na("not a counted for-loop");
        };
        let StmtKind::Decl { ty: Ty::Int, name: index, init: Some(i0) } = &init.kind else { return na("no int loop index") };
        if const_value(&program, i0) != Some(Value::Int(0)) {
            return na("copy does not start at element 0");
        }
        let stride = match &update.kind {
            StmtKind::IncDec { target, increment: true } if target.as_var() == Some(index) => 1,
            StmtKind::Assign { target, value } if target.as_var() == Some(index) => match &value.kind {
                ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } if lhs.as_var() == Some(index) => match rhs.kind {
                    ExprKind::Int(s) if s > 0 => s,
                    _ => return na("stride is not a positive literal"),
                },
                _ => return na("update is not `index = index + stride`"),
            },
            _ => return na("update is not an increment of the index"),
        };
        let mut src: Option<&Expr> = None;
        let mut dst: Option<&Expr> = None;
        for (k, s) in body.iter().enumerate() {
            let StmtKind::Expr(Expr { kind: ExprKind::Lib { func: LibFn::BufferPut, args: put }, .. }) = &s.kind else {
                return na("body is not a sequence of buffer_put calls");
            };
            let ExprKind::Lib { func: LibFn::BufferGet, args: get } = &put[1].kind else {
                return na("element is transformed before it is stored");
            };
            if offset_of(&get[1], index) != Some(k as i64) {
                return na("elements are not copied in order");
            }
            if !matches!(put[0].kind, ExprKind::Var { .. }) || !matches!(get[0].kind, ExprKind::Var { .. }) {
                return na("source and sink must be variables");
            }
            if src.is_some_and(|x| *x != get[0]) || dst.is_some_and(|x| *x != put[0]) {
                return na("copy mixes several buffers");
            }
            src = Some(&get[0]);
            dst = Some(&put[0]);
        }
        let (Some(src), Some(dst)) = (src, dst) else { return na("empty body") };
        if body.len() as i64 != stride {
            return na("body does not copy one element per index step");
        }
        if src == dst {
            return na("source and sink are the same buffer");
        }
        let ExprKind::Binary { op: BinaryOp::Lt, lhs, rhs: bound } = &cond.kind else { return na("condition is not `index < bound`") };
        if lhs.as_var() != Some(index.as_str()) {
            return na("condition is not `index < bound`");
        }
        let limit_of_src = |e: &Expr| matches!(&e.kind, ExprKind::Lib { func: LibFn::BufferLimit, args } if args[0] == *src);
        let full = limit_of_src(bound)
            || match &bound.kind {
                ExprKind::Var { name, global: false } => {
                    !assigned_locals(&m0.body).contains(name)
                        && list[..i].iter().any(|s| matches!(&s.kind, StmtKind::Decl { name: n, init: Some(e), .. } if n == name && limit_of_src(e)))
                }
                _ => false,
            }
            || static_bound(&program, &m0, &list[..i], bound).is_some_and(|b| Some(b) == static_buffer_len(&program, src));
        if !full {
            return na("copy does not cover the whole source buffer");
        }
        if stride > 1 {
            let len = static_buffer_len(&program, src).ok_or_else(|| NotApplicable("source length unknown; cannot check the stride divides it".into()))?;
            if len % stride != 0 {
                return na(format!("stride {stride} does not divide the source length {len}"));
            }
        }
        let call = Expr::new(ExprKind::Lib { func: LibFn::BufferBulkPut, args: vec![dst.clone(), src.clone()] }).with_ty(Ty::Void);
        list[i] = Stmt::new(StmtKind::Expr(call));
        Ok(())
    })
}

// ---------------------------------------------------------------- constant folding and CSE

fn fold_expr(p: &Program, e: &mut Expr, locals: &[(String, Expr)]) -> bool {
    if let ExprKind::Var { name, global: false } = &e.kind {
        if let Some((_, v)) = locals.iter().find(|(n, _)| n == name) {
            *e = v.clone();
            return true;
        }
    }
    if !e.is_literal() && !matches!(e.kind, ExprKind::Var { global: false, .. }) {
        if let Some(lit) = const_value(p, e).and_then(literal) {
            let ty = e.ty;
            // Keep the node's static type: an int literal in a float slot is widened the same way.
            if lit.ty == ty || ty == Ty::Unknown || (lit.ty == Ty::Int && ty == Ty::Float) {
                *e = lit;
                return true;
            }
        }
    }
    let mut changed = false;
    for c in e.children_mut() {
        changed |= fold_expr(p, c, locals);
    }
    changed
}

/// Replaces compile-time-evaluable expressions by literals and propagates
/// locals initialized with a literal and never reassigned.
pub fn constant_fold(cp: &CheckedProgram, method: &str) -> Rewrite {
    let program = cp.program().clone();
    with_method(cp, method, |m| {
        let assigned = assigned_locals(&m.body);
        let mut changed = false;
        for _ in 0..8 {
            let mut locals: Vec<(String, Expr)> = Vec::new();
            walk_stmts(&m.body, &mut |s| {
                if let StmtKind::Decl { ty, name, init: Some(e) } = &s.kind {
                    if e.is_literal() && !assigned.contains(name) && (e.ty == *ty || e.ty == Ty::Unknown && matches!(ty, Ty::Int | Ty::Bool)) {
                        locals.push((name.clone(), e.clone()));
                    }
                }
            });
            let mut round = false;
            walk_stmts_mut(&mut m.body, &mut |s| {
                let is_target = |s: &Stmt, k: usize| matches!(s.kind, StmtKind::Assign { .. } | StmtKind::IncDec { .. }) && k == 0;
                let n = s.exprs().len();
                for k in 0..n {
                    if is_target(s, k) {
                        // Fold inside index expressions of the target only.
                        let t = &mut s.exprs_mut()[k];
                        for c in t.children_mut() {
                            round |= fold_expr(&program, c, &locals);
                        }
                        continue;
                    }
                    let e = &mut s.exprs_mut()[k];
                    round |= fold_expr(&program, e, &locals);
                }
            });
            if !round {
                break;
            }
            changed = true;
            // Types of folded nodes are refreshed by the reload at the end.
        }
        if changed { Ok(()) } else { na("nothing to fold") }
    })
}

fn node_count(e: &Expr) -> usize {
    let mut n = 0;
    e.walk(&mut |_| n += 1);
    n
}

/// Modeled cost of evaluating `e` once.
/// Unpriced operations count as free.
pub fn expr_cost(e: &Expr, cost: &dyn Fn(OpKind) -> Option<f64>) -> f64 {
    let mut c = 0.0;
    e.walk(&mut |x| c += OpKind::of_expr(x).into_iter().map(|o| cost(o).unwrap_or(0.0)).sum::<f64>());
    c
}

fn occurrences(e: &Expr, of: &Expr) -> usize {
    let mut n = 0;
    e.walk(&mut |x| n += usize::from(x == of));
    n
}

/// Binds a repeated pure subexpression of straight-line code in `block` to a
/// temporary, when the modeled saving exceeds the cost of the new variable.
/// An unpriced declaration is never worth it.
pub fn common_subexpression(cp: &CheckedProgram, map: &BlockMap, block: &str, cost: &dyn Fn(OpKind) -> Option<f64>) -> Rewrite {
    let info = map.get(block).ok_or_else(|| NotApplicable(format!("no block `{block}`")))?;
    let method = info.method.clone();
    let in_block: Vec<Vec<u32>> = stmts_in_block(cp, map, block);
    let sums = Summaries::compute(cp);
    let program = cp.program().clone();
    let mut fresh = Fresh::new(&program, cp.method(&method).expect("exists"));
    let mut best_note = String::from("no repeated subexpression");
    with_method(cp, &method, |m| {
        // Group statement paths by enclosing list.
        let mut lists: Vec<(Vec<u32>, Vec<usize>)> = Vec::new();
        for p in in_block.iter().filter(|p| p.len() % 2 == 1) {
            let (parent, idx) = (p[..p.len() - 1].to_vec(), *p.last().unwrap() as usize);
            match lists.iter_mut().find(|(q, _)| *q == parent) {
                Some((_, v)) => v.push(idx),
                None => lists.push((parent, vec![idx])),
            }
        }
        for (parent, idxs) in lists {
            let probe = [&parent[..], &[idxs[0] as u32]].concat();
            let (list, _) = list_mut(&mut m.body, &probe).expect("valid path");
            // Runs of consecutive simple statements.
            let mut a = 0;
            while a < idxs.len() {
                let mut b = a;
                while b + 1 < idxs.len() && idxs[b + 1] == idxs[b] + 1 && !list[idxs[b + 1]].is_compound() {
                    b += 1;
                }
                let run: Vec<usize> = idxs[a..=b].iter().copied().filter(|k| !list[*k].is_compound()).collect();
                a = b + 1;
                if run.is_empty() {
                    continue;
                }
                let mut cands: Vec<Expr> = Vec::new();
                for &k in &run {
                    for e in list[k].exprs() {
                        e.walk(&mut |x| {
                            let fx = sums.expr(x);
                            if has_operation(x) && fx.is_pure() && fx.calls.is_empty() && x.ty != Ty::Unknown && x.ty != Ty::Void && !cands.contains(x) {
                                cands.push(x.clone());
                            }
                        });
                    }
                }
                cands.sort_by_key(|c| std::cmp::Reverse(node_count(c)));
                for c in cands {
                    let counts: Vec<usize> = run.iter().map(|&k| list[k].exprs().iter().map(|e| occurrences(e, &c)).sum()).collect();
                    let total: usize = counts.iter().sum();
                    if total < 2 {
                        continue;
                    }
                    let first = counts.iter().position(|n| *n > 0).unwrap();
                    let last = counts.iter().rposition(|n| *n > 0).unwrap();
                    let cfx = sums.expr(&c);
                    let mut between = Effects::default();
                    for (j, &k) in run.iter().enumerate().take(last + 1).skip(first) {
                        if j < last {
                            between.union(&sums.shallow(&list[k]));
                        } else {
                            for e in list[k].exprs() {
                                between.union(&sums.expr(e));
                            }
                        }
                    }
                    if cfx.conflicts_with(&between) {
                        continue;
                    }
                    let saving = (total - 1) as f64 * expr_cost(&c, cost);
                    let overhead = cost(OpKind::Declaration(c.ty)).unwrap_or(f64::INFINITY) + cost(OpKind::Assign(c.ty, c.ty)).unwrap_or(f64::INFINITY);
                    if saving <= overhead {
                        best_note = format!("saving {saving:.3} does not exceed declaration cost {overhead:.3}");
                        continue;
                    }
                    let t = fresh.name("cse");
                    let v = var(&t, c.ty);
                    for &k in &run[first..=last] {
                        for e in list[k].exprs_mut() {
                            replace_expr(e, &c, &v);
                        }
                    }
                    list.insert(run[first], decl(c.ty, &t, Some(c)));
                    return Ok(());
                }
            }
        }
        na(best_note.clone())
    })
}

/// Catalogued but not implemented.
pub fn loop_unswitching(_: &CheckedProgram, _: &BlockMap, _: &str) -> Rewrite {
    na("loop unswitching is not implemented")
}

/// Catalogued but not implemented.
pub fn induction_variable_elimination(_: &CheckedProgram, _: &BlockMap, _: &str) -> Rewrite {
    na("induction-variable elimination is not implemented")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{build_dictionary, divide_blocks, total_op_counts};
    use crate::blocks::ops::{CmpOp, GotoKind};
    use crate::interp::{ExecutionCase, InputEvent, Interpreter, Scalar};
    use crate::lang::load;

    fn case(frames: u32, args: impl Fn(u32) -> Vec<Scalar>) -> ExecutionCase {
        let mut c = ExecutionCase::plain("t", frames);
        c.inputs = (0..frames).map(|f| InputEvent { frame: f, args: args(f) }).collect();
        c
    }

    fn totals(cp: &CheckedProgram, c: &ExecutionCase) -> std::collections::BTreeMap<OpKind, u64> {
        let it = Interpreter::new(cp);
        let log = it.run(c).unwrap();
        assert!(log.failed.is_none(), "{:?}", log.failed);
        total_op_counts(&log.block_counts, &build_dictionary(cp, &it.map)).unwrap().as_map()
    }

    fn digest(cp: &CheckedProgram, c: &ExecutionCase) -> String {
        Interpreter::new(cp).run(c).unwrap().output_digest
    }

    const DOUBLE_IF: &str = "record Node { Object children; int z; }
        global Object root;
        void init(){ root = new Node(); }
        void draw(){ emit_int(1); }
        void visit(Object n){
            if (n.children != null) { emit_int(2); }
            draw();
            if (n.children != null) { emit_int(3); }
        }
        void frame(int k){ if (k > 3) { root.children = list_new(); } visit(root); }";

    #[test]
    fn if_combination_produces_merged_shape() {
        let cp = load(DOUBLE_IF).unwrap();
        let p = if_combination(&cp, "visit").unwrap();
        let expected = load(&DOUBLE_IF.replace(
            "if (n.children != null) { emit_int(2); }
            draw();
            if (n.children != null) { emit_int(3); }",
            "if (n.children != null) { emit_int(2); draw(); emit_int(3); } else { draw(); }",
        ))
        .unwrap();
        assert_eq!(&p, expected.program());
        let c = case(8, |f| vec![Scalar::Int(f as i64)]);
        let p = reload(&p).unwrap();
        assert_eq!(digest(&cp, &c), digest(&p, &c));
        let eq = OpKind::Compare(CmpOp::Equal, Ty::Object, Ty::Null);
        let (a, b) = (totals(&cp, &c), totals(&p, &c));
        assert_eq!(a[&eq] - b[&eq], 8, "one comparison saved per visit");
        // Each if takes exactly one goto (then or skip), so one is saved per visit.
        let g = OpKind::BlockGoto(GotoKind::If);
        assert_eq!(a[&g] - b[&g], 8);
    }

    #[test]
    fn if_combination_refuses_when_predicate_inputs_change() {
        let src = DOUBLE_IF.replace("draw();\n", "n.children = null;\n");
        let cp = load(&src).unwrap();
        assert!(if_combination(&cp, "visit").is_err());
    }

    const BLIT: &str = "global Object v; global Object out;
        void init(){ v = buffer_new(2112); out = buffer_new(2112); for (int i = 0; i < 2112; i++) { buffer_set(v, i, (float) i * 0.5); } }
        void frame(){ buffer_rewind(out); for (int i = 0; i < buffer_limit(v); i = i + 3) {
            buffer_put(out, buffer_get(v, i)); buffer_put(out, buffer_get(v, i + 1)); buffer_put(out, buffer_get(v, i + 2)); }
            emit_float(buffer_get(out, 2111)); }";

    #[test]
    fn unroll_by_eight_gives_stride_24() {
        let cp = load(BLIT).unwrap();
        let map = divide_blocks(&cp);
        let p = loop_unroll(&cp, &map, "frame().for_1", Some(8)).unwrap();
        let text = pretty_print(&p);
        assert!(text.contains("i = i + 24"), "{text}");
        assert!(text.contains("buffer_get(v, i + 23)"), "{text}");
        let q = reload(&p).unwrap();
        let it = Interpreter::new(&q);
        let log = it.run(&case(1, |_| vec![])).unwrap();
        assert_eq!(log.block_counts["frame().for_1"], 88);
        assert_eq!(digest(&cp, &case(1, |_| vec![])), log.output_digest);
        // Header work shrinks by exactly 7/8 of the original 704 iterations.
        let (a, b) = (totals(&cp, &case(1, |_| vec![])), totals(&q, &case(1, |_| vec![])));
        let g = OpKind::BlockGoto(GotoKind::For);
        assert_eq!(a[&g] - b[&g], 704 - 88);
    }

    #[test]
    fn unroll_refuses_non_divisible_factor() {
        let cp = load(BLIT).unwrap();
        let map = divide_blocks(&cp);
        assert!(loop_unroll(&cp, &map, "frame().for_1", Some(5)).is_err());
        assert_eq!(choose_unroll_factor(704), Some(8));
        assert_eq!(choose_unroll_factor(121), None);
    }

    #[test]
    fn licm_hoists_buffer_limit() {
        let cp = load(BLIT).unwrap();
        let map = divide_blocks(&cp);
        let p = loop_invariant_motion(&cp, &map, "frame().for_1.bool").unwrap();
        let text = pretty_print(&p);
        assert!(text.contains("int limit_1 = buffer_limit(v);"), "{text}");
        assert!(text.contains("i < limit_1"), "{text}");
        let q = reload(&p).unwrap();
        let lib = OpKind::Library(LibFn::BufferLimit);
        let c = case(1, |_| vec![]);
        assert_eq!(totals(&cp, &c)[&lib] - totals(&q, &c)[&lib], 704);
        assert_eq!(digest(&cp, &c), digest(&q, &c));
    }

    #[test]
    fn licm_refuses_when_the_loop_mutates_the_input() {
        let src = "void frame(){ Object l = list_new(); list_add(l, l); for (int i = 0; i < list_size(l); i++) { if (i < 4) { list_add(l, l); } } emit_int(list_size(l)); }";
        let cp = load(src).unwrap();
        let map = divide_blocks(&cp);
        assert!(loop_invariant_motion(&cp, &map, "frame().for_1").is_err());
    }

    #[test]
    fn library_replacement_on_copy_loop() {
        let cp = load(BLIT).unwrap();
        let map = divide_blocks(&cp);
        let p = library_replacement(&cp, &map, "frame().for_1").unwrap();
        assert!(pretty_print(&p).contains("buffer_bulk_put(out, v);"));
        let q = reload(&p).unwrap();
        let c = case(2, |_| vec![]);
        assert_eq!(digest(&cp, &c), digest(&q, &c));
        // Also after the bound was hoisted.
        let hoisted = reload(&loop_invariant_motion(&cp, &map, "frame().for_1").unwrap()).unwrap();
        let m2 = divide_blocks(&hoisted);
        library_replacement(&hoisted, &m2, "frame().for_1").unwrap();
    }

    #[test]
    fn library_replacement_refuses_scaling_loop() {
        let cp = load(&BLIT.replace("buffer_put(out, buffer_get(v, i + 1))", "buffer_put(out, buffer_get(v, i + 1) * 2.0)")).unwrap();
        let map = divide_blocks(&cp);
        assert!(library_replacement(&cp, &map, "frame().for_1").is_err());
    }

    #[test]
    fn constant_folding() {
        let cp = load("void frame(int y){ int x = 2 * 3 + y; emit_int(x); }").unwrap();
        let p = constant_fold(&cp, "frame").unwrap();
        assert!(pretty_print(&p).contains("int x = 6 + y;"), "{}", pretty_print(&p));
        let cp = load("const int K = 4; void frame(int y){ int k = K; emit_int(k * 2 + y); }").unwrap();
        let p = constant_fold(&cp, "frame").unwrap();
        assert!(pretty_print(&p).contains("emit_int(8 + y);"), "{}", pretty_print(&p));
        let cp = load("void frame(int y){ emit_int(y / 0); }").unwrap();
        assert!(constant_fold(&cp, "frame").is_err());
    }

    #[test]
    fn cse_respects_the_profitability_gate() {
        let src = "void frame(int a, int b, int c){ int x = a * b + c; int y = a * b + c; emit_int(x + y); }";
        let cp = load(src).unwrap();
        let map = divide_blocks(&cp);
        let cheap = |op: OpKind| Some(if matches!(op, OpKind::Declaration(_) | OpKind::Assign(..)) { 0.1 } else { 2.0 });
        let p = common_subexpression(&cp, &map, "frame()", &cheap).unwrap();
        let text = pretty_print(&p);
        assert!(text.contains("int cse_1 = a * b + c;"), "{text}");
        let q = reload(&p).unwrap();
        let c = case(3, |f| vec![Scalar::Int(f as i64), Scalar::Int(3), Scalar::Int(-2)]);
        assert_eq!(digest(&cp, &c), digest(&q, &c));
        let dear = |op: OpKind| Some(if matches!(op, OpKind::Declaration(_) | OpKind::Assign(..)) { 5.0 } else { 1.0 });
        assert!(common_subexpression(&cp, &map, "frame()", &dear).is_err());
    }

    const CALLS: &str = "record T { int id; } record N { Object tex; float x; float y; }
        global Object n;
        void init(){ n = new N(); n.tex = new T(); n.tex.id = 7; }
        int name(Object t){ return t.id; }
        void transform(Object m, float dx){ m.x = m.x + dx; if (m.x > 10.0) { m.x = 0.0; } m.y = m.x * 0.5; }
        int fact(int k){ if (k < 2) { return 1; } return k * fact(k - 1); }
        void frame(float d){ transform(n, d); emit_int(name(n.tex)); emit_int(name(n.tex) + 1); emit_int(fact(4)); emit_float(n.y); }";

    #[test]
    fn inlining_statement_call_and_accessor() {
        let cp = load(CALLS).unwrap();
        let map = divide_blocks(&cp);
        let p = inline_calls(&cp, "frame", "transform", None, &InlineConfig::default()).unwrap();
        let text = pretty_print(&p);
        assert!(!text.contains("transform(n, d);"), "{text}");
        assert!(text.contains("void transform("), "declaration kept");
        let q = reload(&p).unwrap();
        let c = case(6, |f| vec![Scalar::Float(f as f64 * 1.5)]);
        assert_eq!(digest(&cp, &c), digest(&q, &c));
        let mi = OpKind::MethodInvocation;
        assert_eq!(totals(&cp, &c)[&mi] - totals(&q, &c)[&mi], 6);

        let a = inline_accessor(&cp, "name").unwrap();
        let text = pretty_print(&a);
        assert!(text.contains("emit_int(n.tex.id);") && text.contains("emit_int(n.tex.id + 1);"), "{text}");
        assert_eq!(digest(&cp, &c), digest(&reload(&a).unwrap(), &c));
        assert!(inline_calls(&cp, "frame", "fact", None, &InlineConfig::default()).is_err());
        assert!(inline_in_block(&cp, &map, "name()", &InlineConfig::default()).is_ok());
    }
}
