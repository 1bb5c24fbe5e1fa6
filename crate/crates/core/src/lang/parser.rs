use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::library::LibFn;
use super::types::Ty;
use super::LangError;

/// Parse source text into an unresolved program.
pub fn parse_program(src: &str) -> Result<Program, LangError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, LangError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn advance(&mut self) -> &Token {
        let t = &self.tokens[self.pos];
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if self.is(sym) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Float(v) => format!("`{v:?}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        };
        Err(LangError::syntax(self.span(), format!("{}, found {found}", msg.into())))
    }

    fn expect(&mut self, sym: &str) -> PResult<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.error(format!("expected `{sym}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn starts_type(&self) -> bool {
        matches!(self.peek(), Tok::Sym("int" | "float" | "bool" | "Object" | "char" | "void"))
    }

    fn ty(&mut self) -> PResult<Ty> {
        let base = match self.peek() {
            Tok::Sym("int") => Ty::Int,
            Tok::Sym("float") => Ty::Float,
            Tok::Sym("bool") => Ty::Bool,
            Tok::Sym("Object") => Ty::Object,
            Tok::Sym("void") => Ty::Void,
            Tok::Sym("char") => {
                self.advance();
                self.expect("[")?;
                self.expect("]")?;
                return Ok(Ty::CharArray);
            }
            _ => return self.error("expected type"),
        };
        self.advance();
        if self.is("[") && matches!(self.peek_at(1), Tok::Sym("]")) {
            self.advance();
            self.advance();
            return match base {
                Ty::Int => Ok(Ty::IntArray),
                Ty::Float => Ok(Ty::FloatArray),
                _ => self.error("only int[], float[] and char[] arrays are supported"),
            };
        }
        Ok(base)
    }

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        while *self.peek() != Tok::Eof {
            let span = self.span();
            if self.eat("record") {
                let name = self.ident()?;
                self.expect("{")?;
                let mut fields = Vec::new();
                while !self.eat("}") {
                    let ty = self.value_ty()?;
                    let name = self.ident()?;
                    self.expect(";")?;
                    fields.push(FieldDecl { name, ty });
                }
                prog.records.push(RecordDecl { name, fields, span });
            } else if self.is("global") || self.is("const") {
                let constant = self.is("const");
                self.advance();
                let ty = self.value_ty()?;
                let name = self.ident()?;
                let init = if self.eat("=") {
                    Some(self.expr()?)
                } else if constant {
                    return self.error("constant requires an initializer");
                } else {
                    None
                };
                self.expect(";")?;
                prog.globals.push(GlobalDecl { name, ty, init, constant, span });
            } else if self.starts_type() {
                let ret = self.ty()?;
                let name = self.ident()?;
                self.expect("(")?;
                let mut params = Vec::new();
                if !self.is(")") {
                    loop {
                        let ty = self.value_ty()?;
                        let name = self.ident()?;
                        params.push(Param { name, ty });
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                let body = self.block()?;
                prog.methods.push(MethodDecl { name, params, ret, body, span });
            } else {
                return self.error("expected `record`, `global`, `const` or a method declaration");
            }
        }
        Ok(prog)
    }

    fn value_ty(&mut self) -> PResult<Ty> {
        if self.is("void") {
            return self.error("`void` is not a value type");
        }
        self.ty()
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.eat("}") {
            if *self.peek() == Tok::Eof {
                return self.error("expected `}`");
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    /// A braced block, or a single statement standing in for one.
    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.is("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = match self.peek() {
            Tok::Sym("if") => {
                self.advance();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then_body = self.body()?;
                let else_body = if self.eat("else") { Some(self.body()?) } else { None };
                StmtKind::If { cond, then_body, else_body }
            }
            Tok::Sym("for") => {
                self.advance();
                self.expect("(")?;
                let init = if self.is(";") { None } else { Some(Box::new(self.simple_stmt()?)) };
                self.expect(";")?;
                let cond = self.expr()?;
                self.expect(";")?;
                let update = if self.is(")") { None } else { Some(Box::new(self.simple_stmt()?)) };
                self.expect(")")?;
                let body = self.body()?;
                StmtKind::For { init, cond, update, body }
            }
            Tok::Sym("while") => {
                self.advance();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let body = self.body()?;
                StmtKind::While { cond, body }
            }
            Tok::Sym("switch") => {
                self.advance();
                self.expect("(")?;
                let scrutinee = self.expr()?;
                self.expect(")")?;
                self.expect("{")?;
                let mut arms = Vec::new();
                let mut default = None;
                while !self.eat("}") {
                    let arm_span = self.span();
                    if self.eat("case") {
                        let negative = self.eat("-");
                        let label = match self.peek() {
                            Tok::Int(v) => *v,
                            _ => return self.error("expected integer case label"),
                        };
                        self.advance();
                        self.expect(":")?;
                        let body = self.arm_body()?;
                        arms.push(SwitchArm { label: if negative { -label } else { label }, body });
                    } else if self.eat("default") {
                        self.expect(":")?;
                        if default.is_some() {
                            return Err(LangError::syntax(arm_span, "duplicate `default` arm"));
                        }
                        default = Some(self.arm_body()?);
                    } else {
                        return self.error("expected `case` or `default`");
                    }
                }
                StmtKind::Switch { scrutinee, arms, default }
            }
            Tok::Sym("return") => {
                self.advance();
                let value = if self.is(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                StmtKind::Return(value)
            }
            Tok::Sym("break") => {
                self.advance();
                self.expect(";")?;
                StmtKind::Break
            }
            _ => {
                let s = self.simple_stmt()?;
                self.expect(";")?;
                return Ok(s);
            }
        };
        Ok(Stmt { kind, span })
    }

    fn arm_body(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while !(self.is("case") || self.is("default") || self.is("}")) {
            if *self.peek() == Tok::Eof {
                return self.error("expected `}`");
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    /// Declaration, assignment, increment/decrement or call, without the
    /// trailing semicolon.
    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        if self.starts_type() {
            let ty = self.value_ty()?;
            let name = self.ident()?;
            let init = if self.eat("=") { Some(self.expr()?) } else { None };
            return Ok(Stmt { kind: StmtKind::Decl { ty, name, init }, span });
        }
        if self.is("++") || self.is("--") {
            let increment = self.is("++");
            self.advance();
            let target = self.postfix()?;
            self.check_lvalue(&target)?;
            return Ok(Stmt { kind: StmtKind::IncDec { target, increment }, span });
        }
        let lhs = self.expr()?;
        if self.eat("=") {
            self.check_lvalue(&lhs)?;
            let value = self.expr()?;
            return Ok(Stmt { kind: StmtKind::Assign { target: lhs, value }, span });
        }
        if self.is("++") || self.is("--") {
            let increment = self.is("++");
            self.advance();
            self.check_lvalue(&lhs)?;
            return Ok(Stmt { kind: StmtKind::IncDec { target: lhs, increment }, span });
        }
        if matches!(lhs.kind, ExprKind::Call { .. } | ExprKind::Lib { .. }) {
            return Ok(Stmt { kind: StmtKind::Expr(lhs), span });
        }
        Err(LangError::syntax(lhs.span, "expression statement must be a call or assignment"))
    }

    fn check_lvalue(&self, e: &Expr) -> PResult<()> {
        match e.kind {
            ExprKind::Var { .. } | ExprKind::Field { .. } | ExprKind::Index { .. } => Ok(()),
            _ => Err(LangError::syntax(e.span, "invalid assignment target")),
        }
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let Tok::Sym(s) = self.peek() else { return None };
        Some(match *s {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "&&" => BinaryOp::And,
            "||" => BinaryOp::Or,
            "&" => BinaryOp::BitAnd,
            "|" => BinaryOp::BitOr,
            "<<" => BinaryOp::Shl,
            ">>" => BinaryOp::Shr,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let span = self.span();
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr { kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, ty: Ty::Unknown, span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.is("-") {
            // `-` glued to a numeric literal is part of the literal.
            let next = &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)];
            if next.glued {
                match next.tok {
                    Tok::Int(v) => {
                        self.advance();
                        self.advance();
                        return self.postfix_tail(Expr { kind: ExprKind::Int(v.wrapping_neg()), ty: Ty::Unknown, span });
                    }
                    Tok::Float(v) => {
                        self.advance();
                        self.advance();
                        return self.postfix_tail(Expr { kind: ExprKind::Float(-v), ty: Ty::Unknown, span });
                    }
                    _ => {}
                }
            }
            self.advance();
            let operand = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary { op: UnaryOp::Neg, operand: Box::new(operand) }, ty: Ty::Unknown, span });
        }
        if self.eat("!") {
            let operand = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary { op: UnaryOp::Not, operand: Box::new(operand) }, ty: Ty::Unknown, span });
        }
        if self.is("(") && matches!(self.peek_at(1), Tok::Sym("int" | "float")) && matches!(self.peek_at(2), Tok::Sym(")")) {
            self.advance();
            let to = if matches!(self.peek(), Tok::Sym("int")) { Ty::Int } else { Ty::Float };
            self.advance();
            self.advance();
            let operand = self.unary()?;
            return Ok(Expr { kind: ExprKind::Cast { to, operand: Box::new(operand) }, ty: Ty::Unknown, span });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let prim = self.primary()?;
        self.postfix_tail(prim)
    }

    fn postfix_tail(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            let span = self.span();
            if self.eat(".") {
                let field = self.ident()?;
                e = Expr { kind: ExprKind::Field { object: Box::new(e), field }, ty: Ty::Unknown, span };
            } else if self.eat("[") {
                let index = self.expr()?;
                self.expect("]")?;
                e = Expr { kind: ExprKind::Index { array: Box::new(e), index: Box::new(index) }, ty: Ty::Unknown, span };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                ExprKind::Int(v)
            }
            Tok::Float(v) => {
                self.advance();
                ExprKind::Float(v)
            }
            Tok::Sym("true") => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::Sym("false") => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::Sym("null") => {
                self.advance();
                ExprKind::Null
            }
            Tok::Sym("(") => {
                self.advance();
                let mut inner = self.expr()?;
                self.expect(")")?;
                inner.span = span;
                return Ok(inner);
            }
            Tok::Sym("new") => {
                self.advance();
                match self.peek().clone() {
                    Tok::Ident(record) => {
                        self.advance();
                        self.expect("(")?;
                        self.expect(")")?;
                        ExprKind::New { record }
                    }
                    Tok::Sym(s @ ("int" | "float" | "char")) => {
                        self.advance();
                        let ty = match s {
                            "int" => Ty::IntArray,
                            "float" => Ty::FloatArray,
                            _ => Ty::CharArray,
                        };
                        self.expect("[")?;
                        let len = self.expr()?;
                        self.expect("]")?;
                        ExprKind::NewArray { ty, len: Box::new(len) }
                    }
                    _ => return self.error("expected record name or array element type after `new`"),
                }
            }
            Tok::Ident(name) => {
                self.advance();
                if self.eat("(") {
                    let mut args = Vec::new();
                    if !self.is(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(",") {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    match LibFn::lookup(&name) {
                        Some(func) => ExprKind::Lib { func, args },
                        None => ExprKind::Call { callee: name, args },
                    }
                } else {
                    ExprKind::Var { name, global: false }
                }
            }
            _ => return self.error("expected expression"),
        };
        Ok(Expr { kind, ty: Ty::Unknown, span })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_unit() {
        let p = parse_program("void f(){int x; x = 1 + 2;}").unwrap();
        assert_eq!(p.methods.len(), 1);
        assert_eq!(p.methods[0].body.len(), 2);
    }

    #[test]
    fn missing_expression_reports_the_semicolon() {
        let err = parse_program("void f(){x = ;}").unwrap_err();
        let span = err.span().unwrap();
        assert_eq!((span.line, span.col), (1, 14));
        assert!(err.to_string().contains("expected expression"));
    }

    #[test]
    fn precedence_and_associativity() {
        let p = parse_program("int f(int a, int b, int c){ return a - b - c * 2; }").unwrap();
        let StmtKind::Return(Some(e)) = &p.methods[0].body[0].kind else { panic!() };
        let ExprKind::Binary { op: BinaryOp::Sub, lhs, rhs } = &e.kind else { panic!() };
        assert!(matches!(lhs.kind, ExprKind::Binary { op: BinaryOp::Sub, .. }));
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinaryOp::Mul, .. }));
    }

    #[test]
    fn negative_literals_and_negation() {
        let p = parse_program("int f(int a){ return a - -1 + -(2); }").unwrap();
        let StmtKind::Return(Some(e)) = &p.methods[0].body[0].kind else { panic!() };
        let ExprKind::Binary { lhs, rhs, .. } = &e.kind else { panic!() };
        let ExprKind::Binary { rhs: inner, .. } = &lhs.kind else { panic!() };
        assert_eq!(inner.kind, ExprKind::Int(-1));
        assert!(matches!(rhs.kind, ExprKind::Unary { op: UnaryOp::Neg, .. }));
    }

    #[test]
    fn switch_arms_and_casts() {
        let src = "void f(int k){ switch (k) { case 1: emit_int(1); case -2: break; default: emit_float((float) k); } }";
        let p = parse_program(src).unwrap();
        let StmtKind::Switch { arms, default, .. } = &p.methods[0].body[0].kind else { panic!() };
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[1].label, -2);
        assert!(default.is_some());
    }
}
