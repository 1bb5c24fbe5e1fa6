//! Lowering of checked programs into a slot-resolved tree the interpreter
//! walks. Every node carries the operations it performs, interned as
//! indices into the program's operation table.

use std::collections::HashMap;

use crate::blocks::ops::{GotoKind, OpKind};
use crate::blocks::{path, BlockMap, Targets};
use crate::lang::ast::*;
use crate::lang::{CheckedProgram, LibFn, Ty};

use super::value::Value;

pub type Ops = Box<[u16]>;

#[derive(Debug)]
pub struct LExpr {
    pub kind: LE,
    pub ops: Ops,
}

#[derive(Debug)]
pub enum LE {
    Const(Value),
    Local(usize),
    Global(usize),
    Field(Box<LExpr>, usize),
    Length(Box<LExpr>),
    Index(Box<LExpr>, Box<LExpr>),
    Neg(Box<LExpr>),
    Not(Box<LExpr>),
    Binary(BinaryOp, Box<LExpr>, Box<LExpr>),
    Cast(Ty, Box<LExpr>),
    Widen(Box<LExpr>),
    Call(usize, Vec<LExpr>),
    Lib(LibFn, Vec<LExpr>),
    New,
    NewArray(Ty, Box<LExpr>),
}

#[derive(Debug)]
pub enum LTarget {
    Local(usize),
    Global(usize),
    Field(LExpr, usize),
    Index(LExpr, LExpr),
}

#[derive(Debug)]
pub struct LBody {
    pub block: usize,
    pub stmts: Vec<LStmt>,
    pub goto: u16,
}

#[derive(Debug)]
pub struct LStmt {
    pub kind: LS,
    /// Operations of the statement itself, counted in `block`.
    pub ops: Ops,
    pub block: usize,
}

#[derive(Debug)]
pub enum LS {
    Decl(usize, Option<LExpr>, Value),
    /// `target_ops` are the operations of the target node (a field or
    /// array reference, or a global access).
    Assign { target: LTarget, target_ops: Ops, value: LExpr },
    IncDec { target: LTarget, target_ops: Ops, delta: i64 },
    If { cond: LExpr, then: LBody, other: LBody },
    For { init: Option<Box<LStmt>>, init_block: usize, cond: LExpr, bool_block: usize, body: LBody, update: Option<Box<LStmt>>, update_block: usize },
    While { cond: LExpr, header: usize, body: LBody },
    Switch { scrutinee: LExpr, arms: Vec<(i64, LBody)>, other: LBody },
    Expr(LExpr),
    Return(Option<LExpr>),
    Break,
    /// Entering a continuation block.
    Enter(usize),
}

#[derive(Debug)]
pub struct LMethod {
    pub name: String,
    pub params: Vec<Ty>,
    pub ret: Ty,
    pub n_slots: usize,
    pub entry_block: usize,
    pub body: Vec<LStmt>,
}

#[derive(Debug)]
pub struct LProgram {
    pub methods: Vec<LMethod>,
    pub method_index: HashMap<String, usize>,
    pub globals: Vec<(String, Value)>,
    /// Default value of every record field, program-wide.
    pub field_defaults: Vec<Value>,
    pub ops: Vec<OpKind>,
    pub n_blocks: usize,
}

pub fn zero(ty: Ty) -> Value {
    match ty {
        Ty::Int => Value::Int(0),
        Ty::Float => Value::Float(0.0),
        Ty::Bool => Value::Bool(false),
        _ => Value::Ref(None),
    }
}

/// Evaluate a constant global initializer.
fn const_value(e: &Expr, ty: Ty) -> Value {
    let v = match &e.kind {
        ExprKind::Int(v) => Value::Int(*v),
        ExprKind::Float(v) => Value::Float(*v),
        ExprKind::Bool(b) => Value::Bool(*b),
        ExprKind::Null => Value::Ref(None),
        ExprKind::Unary { op: UnaryOp::Neg, operand } => match const_value(operand, operand.ty) {
            Value::Int(v) => Value::Int(v.wrapping_neg()),
            Value::Float(v) => Value::Float(-v),
            other => other,
        },
        ExprKind::Unary { op: UnaryOp::Not, operand } => Value::Bool(!const_value(operand, Ty::Bool).as_bool()),
        ExprKind::Cast { to, operand } => {
            let v = const_value(operand, operand.ty);
            if *to == Ty::Int { Value::Int(v.as_int()) } else { Value::Float(v.as_float()) }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let (l, r) = (const_value(lhs, lhs.ty), const_value(rhs, rhs.ty));
            super::eval_binary(*op, l, r).expect("constant initializers never trap")
        }
        _ => unreachable!("checked: global initializers are constant"),
    };
    if ty == Ty::Float { Value::Float(v.as_float()) } else { v }
}

pub fn lower(program: &CheckedProgram, map: &BlockMap) -> LProgram {
    let method_index: HashMap<String, usize> =
        program.methods.iter().enumerate().map(|(i, m)| (m.name.clone(), i)).collect();
    let mut field_index: HashMap<String, usize> = HashMap::new();
    let mut field_defaults = Vec::new();
    for r in &program.records {
        for f in &r.fields {
            if !field_index.contains_key(&f.name) {
                field_index.insert(f.name.clone(), field_defaults.len());
                field_defaults.push(zero(f.ty));
            }
        }
    }
    let global_index: HashMap<String, usize> =
        program.globals.iter().enumerate().map(|(i, g)| (g.name.clone(), i)).collect();
    let globals = program
        .globals
        .iter()
        .map(|g| (g.name.clone(), g.init.as_ref().map_or(zero(g.ty), |e| const_value(e, g.ty))))
        .collect();

    let mut l = Lowerer {
        map,
        method_index: &method_index,
        field_index: &field_index,
        global_index: &global_index,
        signatures: program.methods.iter().map(|m| m.params.iter().map(|p| p.ty).collect()).collect(),
        ops: Vec::new(),
        op_index: HashMap::new(),
        method: String::new(),
        ret: Ty::Void,
        scopes: Vec::new(),
        n_slots: 0,
    };
    let mut methods = Vec::new();
    for m in &program.methods {
        l.method = m.name.clone();
        l.ret = m.ret;
        l.scopes = vec![HashMap::new()];
        l.n_slots = 0;
        for p in &m.params {
            let s = l.n_slots;
            l.scopes[0].insert(p.name.clone(), s);
            l.n_slots += 1;
        }
        let body = l.list(&m.body, &[], None);
        methods.push(LMethod {
            name: m.name.clone(),
            params: m.params.iter().map(|p| p.ty).collect(),
            ret: m.ret,
            n_slots: l.n_slots,
            entry_block: map.index_of(&BlockMap::entry_id(&m.name)).expect("entry block"),
            body,
        });
    }
    let ops = l.ops;
    LProgram { methods, method_index, globals, field_defaults, ops, n_blocks: map.len() }
}

struct Lowerer<'a> {
    map: &'a BlockMap,
    method_index: &'a HashMap<String, usize>,
    field_index: &'a HashMap<String, usize>,
    global_index: &'a HashMap<String, usize>,
    signatures: Vec<Vec<Ty>>,
    ops: Vec<OpKind>,
    op_index: HashMap<OpKind, u16>,
    method: String,
    ret: Ty,
    scopes: Vec<HashMap<String, usize>>,
    n_slots: usize,
}

impl Lowerer<'_> {
    fn intern(&mut self, ops: &[OpKind]) -> Ops {
        ops.iter()
            .map(|op| {
                *self.op_index.entry(*op).or_insert_with(|| {
                    self.ops.push(*op);
                    (self.ops.len() - 1) as u16
                })
            })
            .collect()
    }

    fn lookup(&self, name: &str) -> Option<usize> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str) -> usize {
        let s = self.n_slots;
        self.n_slots += 1;
        self.scopes.last_mut().expect("scope").insert(name.to_string(), s);
        s
    }

    fn coerce(&mut self, e: &Expr, to: Ty) -> LExpr {
        let inner = self.expr(e);
        if to == Ty::Float && e.ty == Ty::Int {
            LExpr { kind: LE::Widen(Box::new(inner)), ops: Box::new([]) }
        } else {
            inner
        }
    }

    fn expr(&mut self, e: &Expr) -> LExpr {
        let ops = self.intern(&OpKind::of_expr(e));
        let kind = match &e.kind {
            ExprKind::Int(v) => LE::Const(Value::Int(*v)),
            ExprKind::Float(v) => LE::Const(Value::Float(*v)),
            ExprKind::Bool(b) => LE::Const(Value::Bool(*b)),
            ExprKind::Null => LE::Const(Value::Ref(None)),
            ExprKind::Var { name, global } => {
                if *global {
                    LE::Global(self.global_index[name])
                } else {
                    LE::Local(self.lookup(name).expect("resolved local"))
                }
            }
            ExprKind::Field { object, field } => {
                let obj = Box::new(self.expr(object));
                if object.ty.is_array() {
                    LE::Length(obj)
                } else {
                    LE::Field(obj, self.field_index[field])
                }
            }
            ExprKind::Index { array, index } => LE::Index(Box::new(self.expr(array)), Box::new(self.expr(index))),
            ExprKind::Unary { op: UnaryOp::Neg, operand } => LE::Neg(Box::new(self.expr(operand))),
            ExprKind::Unary { op: UnaryOp::Not, operand } => LE::Not(Box::new(self.expr(operand))),
            ExprKind::Binary { op, lhs, rhs } => LE::Binary(*op, Box::new(self.expr(lhs)), Box::new(self.expr(rhs))),
            ExprKind::Cast { to, operand } => LE::Cast(*to, Box::new(self.expr(operand))),
            ExprKind::Call { callee, args } => {
                let m = self.method_index[callee];
                let params = self.signatures[m].clone();
                LE::Call(m, args.iter().zip(params).map(|(a, p)| self.coerce(a, p)).collect())
            }
            ExprKind::Lib { func, args } => {
                let params = func.signature().params;
                LE::Lib(*func, args.iter().zip(params).map(|(a, p)| self.coerce(a, *p)).collect())
            }
            ExprKind::New { .. } => LE::New,
            ExprKind::NewArray { ty, len } => LE::NewArray(*ty, Box::new(self.expr(len))),
        };
        LExpr { kind, ops }
    }

    fn target(&mut self, e: &Expr) -> (LTarget, Ops) {
        let ops = self.intern(&OpKind::of_expr(e));
        let t = match &e.kind {
            ExprKind::Var { name, global: true } => LTarget::Global(self.global_index[name]),
            ExprKind::Var { name, .. } => LTarget::Local(self.lookup(name).expect("resolved local")),
            ExprKind::Field { object, field } => LTarget::Field(self.expr(object), self.field_index[field]),
            ExprKind::Index { array, index } => LTarget::Index(self.expr(array), self.expr(index)),
            _ => unreachable!("checked assignment target"),
        };
        (t, ops)
    }

    fn body(&mut self, stmts: &[Stmt], parent: &[u32], selector: u32, block: usize, goto: GotoKind) -> LBody {
        let goto = self.intern(&[OpKind::BlockGoto(goto)])[0];
        self.scopes.push(HashMap::new());
        let stmts = self.list(stmts, parent, Some(selector));
        self.scopes.pop();
        LBody { block, stmts, goto }
    }

    fn empty_body(&mut self, block: usize, goto: GotoKind) -> LBody {
        let goto = self.intern(&[OpKind::BlockGoto(goto)])[0];
        LBody { block, stmts: Vec::new(), goto }
    }

    fn list(&mut self, body: &[Stmt], parent: &[u32], selector: Option<u32>) -> Vec<LStmt> {
        let mut out = Vec::new();
        for (i, s) in body.iter().enumerate() {
            let p = match selector {
                Some(sel) => path::child(parent, sel, i),
                None => vec![i as u32],
            };
            out.push(self.stmt(s, &p));
            if let Some(cont) = self.map.placement(&self.method, &p).and_then(|pl| pl.continuation) {
                let ops = self.intern(&[]);
                out.push(LStmt { kind: LS::Enter(cont), ops, block: cont });
            }
        }
        out
    }

    fn stmt(&mut self, s: &Stmt, p: &[u32]) -> LStmt {
        let placement = self.map.placement(&self.method, p).expect("statement placed").clone();
        let block = placement.block;
        let (kind, ops): (LS, Vec<OpKind>) = match (&s.kind, &placement.targets) {
            (StmtKind::Decl { ty, name, init }, _) => {
                let value = init.as_ref().map(|e| self.coerce(e, *ty));
                let mut ops = vec![OpKind::Declaration(*ty)];
                if let Some(e) = init {
                    ops.push(OpKind::Assign(*ty, e.ty));
                }
                let slot = self.declare(name);
                (LS::Decl(slot, value, zero(*ty)), ops)
            }
            (StmtKind::Assign { target, value }, _) => {
                let (t, target_ops) = self.target(target);
                let v = self.coerce(value, target.ty);
                (LS::Assign { target: t, target_ops, value: v }, vec![OpKind::Assign(target.ty, value.ty)])
            }
            (StmtKind::IncDec { target, increment }, _) => {
                let (t, target_ops) = self.target(target);
                let (delta, op) = if *increment { (1, OpKind::Increment) } else { (-1, OpKind::Decrement) };
                (LS::IncDec { target: t, target_ops, delta }, vec![op])
            }
            (StmtKind::Expr(e), _) => (LS::Expr(self.expr(e)), vec![]),
            (StmtKind::Return(v), _) => {
                let ret = self.ret;
                (LS::Return(v.as_ref().map(|e| self.coerce(e, ret))), vec![OpKind::Return(ret)])
            }
            (StmtKind::Break, _) => (LS::Break, vec![OpKind::Break]),
            (StmtKind::If { cond, then_body, else_body }, Targets::If { then, other }) => {
                let cond = self.expr(cond);
                let then = self.body(then_body, p, path::THEN, *then, GotoKind::If);
                let other = match else_body {
                    Some(e) => self.body(e, p, path::ELSE, *other, GotoKind::If),
                    None => self.empty_body(*other, GotoKind::If),
                };
                (LS::If { cond, then, other }, vec![])
            }
            (StmtKind::For { init, cond, update, body }, Targets::For { init: ib, boolean, body: bb, update: ub }) => {
                self.scopes.push(HashMap::new());
                let init_l = init.as_ref().map(|st| Box::new(self.stmt(st, &path::header(p, path::INIT))));
                let cond_l = self.expr(cond);
                let body_l = self.body(body, p, path::BODY, *bb, GotoKind::For);
                let update_l = update.as_ref().map(|st| Box::new(self.stmt(st, &path::header(p, path::UPDATE))));
                self.scopes.pop();
                (
                    LS::For { init: init_l, init_block: *ib, cond: cond_l, bool_block: *boolean, body: body_l, update: update_l, update_block: *ub },
                    vec![],
                )
            }
            (StmtKind::While { cond, body }, Targets::While { header, body: bb }) => {
                let cond = self.expr(cond);
                let body = self.body(body, p, path::BODY, *bb, GotoKind::While);
                (LS::While { cond, header: *header, body }, vec![])
            }
            (StmtKind::Switch { scrutinee, arms, default }, Targets::Switch { arms: ab, other }) => {
                let scrutinee = self.expr(scrutinee);
                let arms_l = arms
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (a.label, self.body(&a.body, p, path::ARM + k as u32, ab[k], GotoKind::Switch)))
                    .collect();
                let other = match default {
                    Some(d) => self.body(d, p, path::DEFAULT, *other, GotoKind::Switch),
                    None => self.empty_body(*other, GotoKind::Switch),
                };
                (LS::Switch { scrutinee, arms: arms_l, other }, vec![OpKind::Switch])
            }
            _ => unreachable!("placement does not match statement kind"),
        };
        let ops = self.intern(&ops);
        LStmt { kind, ops, block }
    }
}
