//! Name resolution and static typing.

use std::collections::{HashMap, HashSet};
use std::ops::Deref;

use super::ast::*;
use super::library::LibFn;
use super::types::Ty;
use super::LangError;

/// A program whose every expression carries a static type and whose
/// variable references are resolved to locals or globals.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckedProgram {
    program: Program,
}

impl CheckedProgram {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn into_program(self) -> Program {
        self.program
    }
}

impl Deref for CheckedProgram {
    type Target = Program;

    fn deref(&self) -> &Program {
        &self.program
    }
}

/// Resolve names: reports duplicate methods, unknown identifiers and unknown
/// callees, and marks global variable references.
pub fn resolve(program: &mut Program) -> Result<(), LangError> {
    let mut methods = HashSet::new();
    for m in &program.methods {
        if LibFn::lookup(&m.name).is_some() {
            return Err(LangError::Duplicate { span: m.span, what: "method (library function)", name: m.name.clone() });
        }
        if !methods.insert(m.name.clone()) {
            return Err(LangError::Duplicate { span: m.span, what: "method", name: m.name.clone() });
        }
    }
    let mut globals = HashSet::new();
    for g in &program.globals {
        if !globals.insert(g.name.clone()) {
            return Err(LangError::Duplicate { span: g.span, what: "global", name: g.name.clone() });
        }
    }
    let records: HashSet<String> = program.records.iter().map(|r| r.name.clone()).collect();

    let mut r = Resolver { methods: &methods, globals: &globals, records: &records, scopes: Vec::new() };
    for g in program.globals.iter_mut() {
        if let Some(init) = &mut g.init {
            r.expr(init)?;
        }
    }
    for m in program.methods.iter_mut() {
        r.scopes = vec![m.params.iter().map(|p| p.name.clone()).collect()];
        r.stmts(&mut m.body)?;
    }
    Ok(())
}

struct Resolver<'a> {
    methods: &'a HashSet<String>,
    globals: &'a HashSet<String>,
    records: &'a HashSet<String>,
    scopes: Vec<HashSet<String>>,
}

impl Resolver<'_> {
    fn stmts(&mut self, body: &mut [Stmt]) -> Result<(), LangError> {
        self.scopes.push(HashSet::new());
        for s in body.iter_mut() {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), LangError> {
        match &mut s.kind {
            StmtKind::Decl { name, init, .. } => {
                if let Some(e) = init {
                    self.expr(e)?;
                }
                self.scopes.last_mut().expect("scope").insert(name.clone());
            }
            StmtKind::For { init, cond, update, body } => {
                self.scopes.push(HashSet::new());
                if let Some(i) = init {
                    self.stmt(i)?;
                }
                self.expr(cond)?;
                if let Some(u) = update {
                    self.stmt(u)?;
                }
                self.stmts(body)?;
                self.scopes.pop();
            }
            _ => {
                for e in s.exprs_mut() {
                    self.expr(e)?;
                }
                for b in s.bodies_mut() {
                    self.stmts(b)?;
                }
            }
        }
        Ok(())
    }

    fn expr(&mut self, e: &mut Expr) -> Result<(), LangError> {
        let span = e.span;
        match &mut e.kind {
            ExprKind::Var { name, global } => {
                if self.scopes.iter().any(|s| s.contains(name.as_str())) {
                    *global = false;
                } else if self.globals.contains(name.as_str()) {
                    *global = true;
                } else {
                    return Err(LangError::Unresolved { span, name: name.clone() });
                }
            }
            ExprKind::Call { callee, .. } if !self.methods.contains(callee.as_str()) => {
                return Err(LangError::Unresolved { span, name: callee.clone() });
            }
            ExprKind::New { record } if !self.records.contains(record.as_str()) => {
                return Err(LangError::Unresolved { span, name: record.clone() });
            }
            _ => {}
        }
        for c in e.children_mut() {
            self.expr(c)?;
        }
        Ok(())
    }
}

/// Resolve and type-check a program.
pub fn check(program: &Program) -> Result<CheckedProgram, LangError> {
    let mut program = program.clone();
    resolve(&mut program)?;

    let mut fields: HashMap<String, Ty> = HashMap::new();
    let mut record_names = HashSet::new();
    for r in &program.records {
        if !record_names.insert(r.name.clone()) {
            return Err(LangError::Duplicate { span: r.span, what: "record", name: r.name.clone() });
        }
        let mut local = HashSet::new();
        for f in &r.fields {
            if !local.insert(f.name.clone()) {
                return Err(LangError::Duplicate { span: r.span, what: "field", name: f.name.clone() });
            }
            if f.name == "length" {
                return Err(LangError::Type { span: r.span, message: "`length` is reserved for arrays".into() });
            }
            if let Some(prev) = fields.insert(f.name.clone(), f.ty) {
                if prev != f.ty {
                    return Err(LangError::Type {
                        span: r.span,
                        message: format!("field `{}` declared as both {prev} and {}", f.name, f.ty),
                    });
                }
            }
        }
    }

    let signatures: HashMap<String, (Vec<Ty>, Ty)> = program
        .methods
        .iter()
        .map(|m| (m.name.clone(), (m.params.iter().map(|p| p.ty).collect(), m.ret)))
        .collect();
    let mut globals: HashMap<String, (Ty, bool)> = HashMap::new();

    let mut checked_globals = program.globals.clone();
    for g in checked_globals.iter_mut() {
        if let Some(init) = &mut g.init {
            let mut tc = TypeChecker::new(&fields, &signatures, &globals, Ty::Void);
            let t = tc.expr(init)?;
            if !is_constant_expr(init) {
                return Err(LangError::Type { span: init.span, message: "global initializers must be constant".into() });
            }
            if !g.ty.accepts(t) {
                return Err(mismatch(init.span, g.ty, t));
            }
        } else if g.constant {
            return Err(LangError::Type { span: g.span, message: "constant requires an initializer".into() });
        }
        globals.insert(g.name.clone(), (g.ty, g.constant));
    }
    program.globals = checked_globals;

    let mut methods = std::mem::take(&mut program.methods);
    for m in methods.iter_mut() {
        let mut tc = TypeChecker::new(&fields, &signatures, &globals, m.ret);
        let mut scope = HashMap::new();
        for p in &m.params {
            if scope.insert(p.name.clone(), p.ty).is_some() {
                return Err(LangError::Duplicate { span: m.span, what: "parameter", name: p.name.clone() });
            }
        }
        tc.scopes.push(scope);
        tc.block(&mut m.body, false)?;
        if m.ret != Ty::Void && !definitely_returns(&m.body) {
            return Err(LangError::Type {
                span: m.span,
                message: format!("method `{}` may finish without returning a {}", m.name, m.ret),
            });
        }
    }
    program.methods = methods;
    Ok(CheckedProgram { program })
}

fn is_constant_expr(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Null => true,
        ExprKind::Var { .. } => false,
        ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => is_constant_expr(operand),
        ExprKind::Binary { op, lhs, rhs } => *op != BinaryOp::Div && is_constant_expr(lhs) && is_constant_expr(rhs),
        _ => false,
    }
}

/// Whether every path through `body` ends in a `return`.
pub fn definitely_returns(body: &[Stmt]) -> bool {
    body.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If { then_body, else_body: Some(e), .. } => definitely_returns(then_body) && definitely_returns(e),
        StmtKind::Switch { arms, default: Some(d), .. } => {
            arms.iter().all(|a| definitely_returns(&a.body)) && definitely_returns(d)
        }
        _ => false,
    })
}

fn mismatch(span: Span, expected: Ty, found: Ty) -> LangError {
    LangError::Type { span, message: format!("expected {expected}, found {found}") }
}

struct TypeChecker<'a> {
    fields: &'a HashMap<String, Ty>,
    methods: &'a HashMap<String, (Vec<Ty>, Ty)>,
    globals: &'a HashMap<String, (Ty, bool)>,
    ret: Ty,
    scopes: Vec<HashMap<String, Ty>>,
    loop_depth: usize,
    breakable_depth: usize,
}

impl<'a> TypeChecker<'a> {
    fn new(
        fields: &'a HashMap<String, Ty>,
        methods: &'a HashMap<String, (Vec<Ty>, Ty)>,
        globals: &'a HashMap<String, (Ty, bool)>,
        ret: Ty,
    ) -> Self {
        TypeChecker { fields, methods, globals, ret, scopes: Vec::new(), loop_depth: 0, breakable_depth: 0 }
    }

    fn lookup(&self, name: &str) -> Option<Ty> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, span: Span, name: &str, ty: Ty) -> Result<(), LangError> {
        if self.lookup(name).is_some() {
            return Err(LangError::Duplicate { span, what: "local variable", name: name.to_string() });
        }
        self.scopes.last_mut().expect("scope").insert(name.to_string(), ty);
        Ok(())
    }

    fn block(&mut self, body: &mut [Stmt], new_scope: bool) -> Result<(), LangError> {
        if new_scope {
            self.scopes.push(HashMap::new());
        }
        let n = body.len();
        for (i, s) in body.iter_mut().enumerate() {
            if i + 1 < n && matches!(s.kind, StmtKind::Return(_) | StmtKind::Break) {
                return Err(LangError::Type { span: s.span, message: "unreachable statement after jump".into() });
            }
            self.stmt(s)?;
        }
        if new_scope {
            self.scopes.pop();
        }
        Ok(())
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), LangError> {
        let span = s.span;
        match &mut s.kind {
            StmtKind::Decl { ty, name, init } => {
                if *ty == Ty::Void {
                    return Err(LangError::Type { span, message: "cannot declare a void variable".into() });
                }
                if let Some(e) = init {
                    let t = self.expr(e)?;
                    if !ty.accepts(t) {
                        return Err(mismatch(e.span, *ty, t));
                    }
                }
                let (ty, name) = (*ty, name.clone());
                self.declare(span, &name, ty)?;
            }
            StmtKind::Assign { target, value } => {
                let tt = self.lvalue(target)?;
                let vt = self.expr(value)?;
                if !tt.accepts(vt) {
                    return Err(mismatch(value.span, tt, vt));
                }
            }
            StmtKind::IncDec { target, .. } => {
                let tt = self.lvalue(target)?;
                if tt != Ty::Int {
                    return Err(mismatch(target.span, Ty::Int, tt));
                }
            }
            StmtKind::If { cond, then_body, else_body } => {
                self.condition(cond)?;
                self.block(then_body, true)?;
                if let Some(e) = else_body {
                    self.block(e, true)?;
                }
            }
            StmtKind::While { cond, body } => {
                self.condition(cond)?;
                self.loop_depth += 1;
                self.breakable_depth += 1;
                self.block(body, true)?;
                self.loop_depth -= 1;
                self.breakable_depth -= 1;
            }
            StmtKind::For { init, cond, update, body } => {
                self.scopes.push(HashMap::new());
                if let Some(i) = init {
                    if matches!(i.kind, StmtKind::If { .. } | StmtKind::For { .. } | StmtKind::While { .. } | StmtKind::Switch { .. } | StmtKind::Return(_) | StmtKind::Break) {
                        return Err(LangError::Type { span: i.span, message: "invalid for-loop initializer".into() });
                    }
                    self.stmt(i)?;
                }
                self.condition(cond)?;
                if let Some(u) = update {
                    if !matches!(u.kind, StmtKind::Assign { .. } | StmtKind::IncDec { .. } | StmtKind::Expr(_)) {
                        return Err(LangError::Type { span: u.span, message: "invalid for-loop update".into() });
                    }
                    self.stmt(u)?;
                }
                self.loop_depth += 1;
                self.breakable_depth += 1;
                self.block(body, true)?;
                self.loop_depth -= 1;
                self.breakable_depth -= 1;
                self.scopes.pop();
            }
            StmtKind::Switch { scrutinee, arms, default } => {
                let t = self.expr(scrutinee)?;
                if t != Ty::Int {
                    return Err(mismatch(scrutinee.span, Ty::Int, t));
                }
                let mut seen = HashSet::new();
                self.breakable_depth += 1;
                for arm in arms.iter_mut() {
                    if !seen.insert(arm.label) {
                        return Err(LangError::Duplicate { span, what: "case label", name: arm.label.to_string() });
                    }
                    self.block(&mut arm.body, true)?;
                }
                if let Some(d) = default {
                    self.block(d, true)?;
                }
                self.breakable_depth -= 1;
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Return(value) => match (value, self.ret) {
                (None, Ty::Void) => {}
                (None, r) => return Err(LangError::Type { span, message: format!("missing return value of type {r}") }),
                (Some(e), Ty::Void) => {
                    return Err(LangError::Type { span: e.span, message: "void method cannot return a value".into() })
                }
                (Some(e), r) => {
                    let t = self.expr(e)?;
                    if !r.accepts(t) {
                        return Err(mismatch(e.span, r, t));
                    }
                }
            },
            StmtKind::Break => {
                if self.breakable_depth == 0 {
                    return Err(LangError::Type { span, message: "`break` outside loop or switch".into() });
                }
            }
        }
        Ok(())
    }

    fn condition(&mut self, cond: &mut Expr) -> Result<(), LangError> {
        let t = self.expr(cond)?;
        if t != Ty::Bool {
            return Err(mismatch(cond.span, Ty::Bool, t));
        }
        Ok(())
    }

    fn lvalue(&mut self, target: &mut Expr) -> Result<Ty, LangError> {
        match &target.kind {
            ExprKind::Var { name, global: true } => {
                if self.globals.get(name).is_some_and(|(_, c)| *c) {
                    return Err(LangError::Type { span: target.span, message: format!("cannot assign to constant `{name}`") });
                }
            }
            ExprKind::Field { field, .. } if field == "length" => {
                return Err(LangError::Type { span: target.span, message: "cannot assign to `length`".into() });
            }
            _ => {}
        }
        self.expr(target)
    }

    fn expr(&mut self, e: &mut Expr) -> Result<Ty, LangError> {
        let span = e.span;
        let ty = match &mut e.kind {
            ExprKind::Int(_) => Ty::Int,
            ExprKind::Float(_) => Ty::Float,
            ExprKind::Bool(_) => Ty::Bool,
            ExprKind::Null => Ty::Null,
            ExprKind::Var { name, global } => {
                if let Some(t) = self.lookup(name) {
                    *global = false;
                    t
                } else if let Some((t, _)) = self.globals.get(name.as_str()) {
                    *global = true;
                    *t
                } else {
                    return Err(LangError::Unresolved { span, name: name.clone() });
                }
            }
            ExprKind::Field { object, field } => {
                let ot = self.expr(object)?;
                if ot.is_array() && field == "length" {
                    Ty::Int
                } else if ot == Ty::Object {
                    *self.fields.get(field.as_str()).ok_or_else(|| LangError::Unresolved { span, name: field.clone() })?
                } else {
                    return Err(LangError::Type { span, message: format!("no field `{field}` on {ot}") });
                }
            }
            ExprKind::Index { array, index } => {
                let at = self.expr(array)?;
                let it = self.expr(index)?;
                if it != Ty::Int {
                    return Err(mismatch(index.span, Ty::Int, it));
                }
                at.element().ok_or_else(|| LangError::Type { span, message: format!("cannot index {at}") })?
            }
            ExprKind::Unary { op, operand } => {
                let t = self.expr(operand)?;
                match op {
                    UnaryOp::Neg if t.is_numeric() => t,
                    UnaryOp::Not if t == Ty::Bool => Ty::Bool,
                    _ => return Err(LangError::Type { span, message: format!("invalid operand {t} for unary operator") }),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let (op, lt, rt) = (*op, self.expr(lhs)?, self.expr(rhs)?);
                binary_type(op, lt, rt).ok_or_else(|| LangError::Type {
                    span,
                    message: format!("operator `{}` cannot be applied to {lt} and {rt}", op.symbol()),
                })?
            }
            ExprKind::Cast { to, operand } => {
                let t = self.expr(operand)?;
                if !t.is_numeric() {
                    return Err(LangError::Type { span, message: format!("cannot convert {t} to {to}") });
                }
                *to
            }
            ExprKind::Call { callee, args } => {
                let (params, ret) = self.methods.get(callee.as_str()).cloned().ok_or_else(|| LangError::Unresolved { span, name: callee.clone() })?;
                self.args(span, callee, &params, args)?;
                ret
            }
            ExprKind::Lib { func, args } => {
                let sig = func.signature();
                let name = func.name().to_string();
                self.args(span, &name, sig.params, args)?;
                sig.ret
            }
            ExprKind::New { .. } => Ty::Object,
            ExprKind::NewArray { ty, len } => {
                let t = self.expr(len)?;
                if t != Ty::Int {
                    return Err(mismatch(len.span, Ty::Int, t));
                }
                *ty
            }
        };
        e.ty = ty;
        Ok(ty)
    }

    fn args(&mut self, span: Span, name: &str, params: &[Ty], args: &mut [Expr]) -> Result<(), LangError> {
        if params.len() != args.len() {
            return Err(LangError::Arity { span, name: name.to_string(), expected: params.len(), found: args.len() });
        }
        for (p, a) in params.iter().zip(args.iter_mut()) {
            let t = self.expr(a)?;
            if !p.accepts(t) {
                return Err(mismatch(a.span, *p, t));
            }
        }
        Ok(())
    }
}

/// Result type of a binary operator, or `None` if ill-typed.
pub fn binary_type(op: BinaryOp, lt: Ty, rt: Ty) -> Option<Ty> {
    use BinaryOp::*;
    match op {
        Add | Sub | Mul | Div if lt.is_numeric() && rt.is_numeric() => {
            Some(if lt == Ty::Float || rt == Ty::Float { Ty::Float } else { Ty::Int })
        }
        Lt | Le | Gt | Ge if lt.is_numeric() && rt.is_numeric() => Some(Ty::Bool),
        Eq | Ne => {
            let ok = (lt.is_numeric() && rt.is_numeric())
                || (lt == Ty::Bool && rt == Ty::Bool)
                || (lt.is_reference() && rt.is_reference() && (lt == rt || lt == Ty::Null || rt == Ty::Null));
            ok.then_some(Ty::Bool)
        }
        And | Or if lt == Ty::Bool && rt == Ty::Bool => Some(Ty::Bool),
        BitAnd | BitOr | Shl | Shr if lt == Ty::Int && rt == Ty::Int => Some(Ty::Int),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_source;

    fn checked(src: &str) -> Result<CheckedProgram, LangError> {
        check(&parse_source(src)?)
    }

    fn first_return_ty(p: &CheckedProgram) -> Ty {
        let StmtKind::Return(Some(e)) = &p.methods[0].body.last().unwrap().kind else { panic!() };
        e.ty
    }

    #[test]
    fn annotates_int_and_float_arithmetic() {
        let p = checked("int f(){ return 1 + 2; }").unwrap();
        assert_eq!(first_return_ty(&p), Ty::Int);
        let p = checked("float f(float a, float b){ return a * b; }").unwrap();
        assert_eq!(first_return_ty(&p), Ty::Float);
    }

    #[test]
    fn rejects_ill_typed_addition() {
        let err = checked("int f(){ return 1 + true; }").unwrap_err();
        assert!(matches!(err, LangError::Type { .. }), "{err}");
    }

    #[test]
    fn reports_arity_mismatch() {
        let err = checked("void g(int a){} void f(){ g(1, 2); }").unwrap_err();
        assert!(matches!(err, LangError::Arity { expected: 1, found: 2, .. }));
    }

    #[test]
    fn resolves_globals_and_shadowing() {
        let p = checked("global int n = 3; int f(){ int m = n; return m; }").unwrap();
        let StmtKind::Decl { init: Some(e), .. } = &p.methods[0].body[0].kind else { panic!() };
        assert_eq!(e.kind, ExprKind::Var { name: "n".into(), global: true });
    }

    #[test]
    fn missing_return_and_unreachable_code() {
        assert!(checked("int f(int a){ if (a > 0) { return 1; } }").is_err());
        assert!(checked("int f(){ return 1; emit_int(2); }").is_err());
        assert!(checked("int f(int a){ if (a > 0) { return 1; } else { return 2; } }").is_ok());
    }

    #[test]
    fn break_outside_loop_is_rejected() {
        assert!(checked("void f(){ break; }").is_err());
        assert!(checked("void f(){ while (true) { break; } }").is_ok());
    }

    #[test]
    fn constants_cannot_be_assigned() {
        assert!(checked("const int N = 4; void f(){ N = 5; }").is_err());
    }

    #[test]
    fn null_comparisons_and_fields() {
        let p = checked("record R { Object next; int v; } int f(Object o){ if (o.next != null) { return o.v; } return 0; }").unwrap();
        let StmtKind::If { cond, .. } = &p.methods[0].body[0].kind else { panic!() };
        let ExprKind::Binary { lhs, rhs, .. } = &cond.kind else { panic!() };
        assert_eq!((lhs.ty, rhs.ty), (Ty::Object, Ty::Null));
    }
}
