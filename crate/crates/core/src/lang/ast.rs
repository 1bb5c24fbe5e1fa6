use std::fmt;

use serde::{Deserialize, Serialize};

use super::library::LibFn;
use super::types::Ty;

/// Source position of a node (1-based).
///
/// Spans are positional metadata only: two spans always compare equal so
/// that structural equality of trees ignores where they came from.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub records: Vec<RecordDecl>,
    pub globals: Vec<GlobalDecl>,
    pub methods: Vec<MethodDecl>,
}

impl Program {
    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn method_mut(&mut self, name: &str) -> Option<&mut MethodDecl> {
        self.methods.iter_mut().find(|m| m.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Type of a record field. Field names are typed program-wide.
    pub fn field_ty(&self, field: &str) -> Option<Ty> {
        self.records
            .iter()
            .flat_map(|r| r.fields.iter())
            .find(|f| f.name == field)
            .map(|f| f.ty)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordDecl {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Ty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: Ty,
    pub init: Option<Expr>,
    pub constant: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Ty,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Ty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Decl {
        ty: Ty,
        name: String,
        init: Option<Expr>,
    },
    /// `target` is a variable, field or index expression.
    Assign {
        target: Expr,
        value: Expr,
    },
    IncDec {
        target: Expr,
        increment: bool,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Expr,
        update: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    /// Arms never fall through; `break` leaves the switch.
    Switch {
        scrutinee: Expr,
        arms: Vec<SwitchArm>,
        default: Option<Vec<Stmt>>,
    },
    /// A call evaluated for its effect.
    Expr(Expr),
    Return(Option<Expr>),
    Break,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchArm {
    pub label: i64,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub ty: Ty,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
    /// `global` is filled in by name resolution.
    Var {
        name: String,
        global: bool,
    },
    /// Record field, or `length` on an array.
    Field {
        object: Box<Expr>,
        field: String,
    },
    Index {
        array: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Cast {
        to: Ty,
        operand: Box<Expr>,
    },
    Call {
        callee: String,
        args: Vec<Expr>,
    },
    Lib {
        func: LibFn,
        args: Vec<Expr>,
    },
    New {
        record: String,
    },
    NewArray {
        ty: Ty,
        len: Box<Expr>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    BitAnd,
    BitOr,
    Shl,
    Shr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
        }
    }

    /// Binding strength; higher binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::BitOr => 3,
            BinaryOp::BitAnd => 4,
            BinaryOp::Eq | BinaryOp::Ne => 5,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 6,
            BinaryOp::Shl | BinaryOp::Shr => 7,
            BinaryOp::Add | BinaryOp::Sub => 8,
            BinaryOp::Mul | BinaryOp::Div => 9,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne
        )
    }

    pub fn is_bitwise(self) -> bool {
        matches!(self, BinaryOp::BitAnd | BinaryOp::BitOr | BinaryOp::Shl | BinaryOp::Shr)
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, ty: Ty::Unknown, span: Span::default() }
    }

    pub fn int(v: i64) -> Self {
        Expr::new(ExprKind::Int(v))
    }

    pub fn local(name: impl Into<String>) -> Self {
        Expr::new(ExprKind::Var { name: name.into(), global: false })
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
    }

    pub fn with_ty(mut self, ty: Ty) -> Self {
        self.ty = ty;
        self
    }

    pub fn is_literal(&self) -> bool {
        matches!(self.kind, ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Null)
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Var { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Direct subexpressions in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Bool(_)
            | ExprKind::Null
            | ExprKind::Var { .. }
            | ExprKind::New { .. } => vec![],
            ExprKind::Field { object, .. } => vec![object],
            ExprKind::Index { array, index } => vec![array, index],
            ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => vec![operand],
            ExprKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Call { args, .. } | ExprKind::Lib { args, .. } => args.iter().collect(),
            ExprKind::NewArray { len, .. } => vec![len],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Bool(_)
            | ExprKind::Null
            | ExprKind::Var { .. }
            | ExprKind::New { .. } => vec![],
            ExprKind::Field { object, .. } => vec![object],
            ExprKind::Index { array, index } => vec![array, index],
            ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => vec![operand],
            ExprKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Call { args, .. } | ExprKind::Lib { args, .. } => args.iter_mut().collect(),
            ExprKind::NewArray { len, .. } => vec![len],
        }
    }

    /// Pre-order visit of this expression and all subexpressions.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        for c in self.children_mut() {
            c.walk_mut(f);
        }
    }
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::default() }
    }

    /// Expressions evaluated directly by this statement (not by nested
    /// statement lists). Loop conditions and headers are included.
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl { init, .. } => init.iter().collect(),
            StmtKind::Assign { target, value } => vec![target, value],
            StmtKind::IncDec { target, .. } => vec![target],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::For { cond, .. } => vec![cond],
            StmtKind::Switch { scrutinee, .. } => vec![scrutinee],
            StmtKind::Expr(e) => vec![e],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Break => vec![],
        }
    }

    /// Nested statement lists. For-loop init/update statements are not
    /// included.
    pub fn bodies(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If { then_body, else_body, .. } => {
                let mut v = vec![then_body];
                if let Some(e) = else_body {
                    v.push(e);
                }
                v
            }
            StmtKind::For { body, .. } | StmtKind::While { body, .. } => vec![body],
            StmtKind::Switch { arms, default, .. } => {
                let mut v: Vec<&Vec<Stmt>> = arms.iter().map(|a| &a.body).collect();
                if let Some(d) = default {
                    v.push(d);
                }
                v
            }
            _ => vec![],
        }
    }

    pub fn bodies_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match &mut self.kind {
            StmtKind::If { then_body, else_body, .. } => {
                let mut v = vec![then_body];
                if let Some(e) = else_body {
                    v.push(e);
                }
                v
            }
            StmtKind::For { body, .. } | StmtKind::While { body, .. } => vec![body],
            StmtKind::Switch { arms, default, .. } => {
                let mut v: Vec<&mut Vec<Stmt>> = arms.iter_mut().map(|a| &mut a.body).collect();
                if let Some(d) = default {
                    v.push(d);
                }
                v
            }
            _ => vec![],
        }
    }

    pub fn is_compound(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::If { .. } | StmtKind::For { .. } | StmtKind::While { .. } | StmtKind::Switch { .. }
        )
    }

    /// Visit every statement reachable from this one (pre-order), including
    /// for-loop init/update statements.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        if let StmtKind::For { init, update, .. } = &self.kind {
            if let Some(s) = init {
                s.walk(f);
            }
            if let Some(s) = update {
                s.walk(f);
            }
        }
        for body in self.bodies() {
            for s in body {
                s.walk(f);
            }
        }
    }

    /// Visit every expression evaluated anywhere inside this statement.
    pub fn walk_exprs<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        self.walk(&mut |s: &'a Stmt| {
            for e in s.exprs() {
                e.walk(f);
            }
        });
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Stmt)) {
        f(self);
        if let StmtKind::For { init, update, .. } = &mut self.kind {
            if let Some(s) = init {
                s.walk_mut(f);
            }
            if let Some(s) = update {
                s.walk_mut(f);
            }
        }
        for body in self.bodies_mut() {
            for s in body.iter_mut() {
                s.walk_mut(f);
            }
        }
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            StmtKind::Decl { init, .. } => init.iter_mut().collect(),
            StmtKind::Assign { target, value } => vec![target, value],
            StmtKind::IncDec { target, .. } => vec![target],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::For { cond, .. } => vec![cond],
            StmtKind::Switch { scrutinee, .. } => vec![scrutinee],
            StmtKind::Expr(e) => vec![e],
            StmtKind::Return(e) => e.iter_mut().collect(),
            StmtKind::Break => vec![],
        }
    }

    /// Apply `f` to every expression tree root inside this statement.
    pub fn walk_exprs_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        self.walk_mut(&mut |s: &mut Stmt| {
            for e in s.exprs_mut() {
                f(e);
            }
        });
    }
}

pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in body {
        s.walk(f);
    }
}

pub fn walk_stmts_mut(body: &mut [Stmt], f: &mut impl FnMut(&mut Stmt)) {
    for s in body {
        s.walk_mut(f);
    }
}
