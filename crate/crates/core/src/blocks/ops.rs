//! Operation taxonomy: the atomic units energy is attributed to.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::lang::ast::{BinaryOp, Expr, ExprKind, UnaryOp};
use crate::lang::{LibFn, Ty};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Addition,
    Subtraction,
    Multi,
    Division,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Less,
    LessEqual,
    Greater,
    GreaterEqual,
    Equal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BitOp {
    BitAnd,
    BitOr,
    SignedBitShiftLeft,
    SignedBitShiftRight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GotoKind {
    If,
    For,
    While,
    Switch,
}

/// One kind of energy operation: a category plus an operand-type signature
/// or a library function name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Arith(ArithOp, Ty, Ty),
    Negate(Ty),
    Increment,
    Decrement,
    Compare(CmpOp, Ty, Ty),
    And,
    Or,
    Not,
    Bit(BitOp),
    ArrayReference,
    FieldReference,
    MethodInvocation,
    Parameter(Ty),
    Return(Ty),
    BlockGoto(GotoKind),
    Break,
    Switch,
    Assign(Ty, Ty),
    Declaration(Ty),
    NewObject,
    NewArray(Ty),
    Conversion(Ty, Ty),
    Library(LibFn),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Arithmetic,
    Boolean,
    Comparison,
    Bitwise,
    Reference,
    Function,
    Control,
    Assign,
    Declaration,
    Conversion,
    Library,
}

/// Coarser view used in block breakdown tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Assign,
    Declaration,
    Control,
    Array,
    Function,
    Boolean,
    Arithmetic,
    Library,
}

impl Group {
    pub const ALL: [Group; 8] = [
        Group::Assign,
        Group::Declaration,
        Group::Control,
        Group::Array,
        Group::Function,
        Group::Boolean,
        Group::Arithmetic,
        Group::Library,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::Assign => "Assign",
            Group::Declaration => "Declaration",
            Group::Control => "Control",
            Group::Array => "Array",
            Group::Function => "Function",
            Group::Boolean => "Boolean",
            Group::Arithmetic => "Arithmetic",
            Group::Library => "Library",
        }
    }
}

impl OpKind {
    pub fn category(self) -> Category {
        match self {
            OpKind::Arith(..) | OpKind::Negate(_) | OpKind::Increment | OpKind::Decrement => Category::Arithmetic,
            OpKind::Compare(..) => Category::Comparison,
            OpKind::And | OpKind::Or | OpKind::Not => Category::Boolean,
            OpKind::Bit(_) => Category::Bitwise,
            OpKind::ArrayReference => Category::Reference,
            OpKind::Parameter(_) | OpKind::Return(_) => Category::Function,
            OpKind::FieldReference
            | OpKind::MethodInvocation
            | OpKind::BlockGoto(_)
            | OpKind::Break
            | OpKind::Switch => Category::Control,
            OpKind::Assign(..) => Category::Assign,
            OpKind::Declaration(_) | OpKind::NewObject | OpKind::NewArray(_) => Category::Declaration,
            OpKind::Conversion(..) => Category::Conversion,
            OpKind::Library(_) => Category::Library,
        }
    }

    pub fn group(self) -> Group {
        match self.category() {
            Category::Arithmetic | Category::Bitwise | Category::Conversion => Group::Arithmetic,
            Category::Boolean | Category::Comparison => Group::Boolean,
            Category::Reference => Group::Array,
            Category::Function => Group::Function,
            Category::Control => Group::Control,
            Category::Assign => Group::Assign,
            Category::Declaration => Group::Declaration,
            Category::Library => Group::Library,
        }
    }

    /// Loop bookkeeping operations that unrolling removes.
    pub fn is_block_goto(self) -> bool {
        matches!(self, OpKind::BlockGoto(_))
    }

    /// The operation performed by this expression node itself, excluding
    /// its operands. `!=` is an `Equal` followed by a `Not` and so yields two.
    pub fn of_expr(e: &Expr) -> Vec<OpKind> {
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Bool(_) | ExprKind::Null => vec![],
            ExprKind::Var { global, .. } => {
                if *global {
                    vec![OpKind::FieldReference]
                } else {
                    vec![]
                }
            }
            ExprKind::Field { .. } => vec![OpKind::FieldReference],
            ExprKind::Index { .. } => vec![OpKind::ArrayReference],
            ExprKind::Unary { op: UnaryOp::Neg, .. } => vec![OpKind::Negate(e.ty)],
            ExprKind::Unary { op: UnaryOp::Not, .. } => vec![OpKind::Not],
            ExprKind::Binary { op, lhs, rhs } => binary_ops(*op, lhs.ty, rhs.ty),
            ExprKind::Cast { to, operand } => vec![OpKind::Conversion(operand.ty, *to)],
            ExprKind::Call { args, .. } => {
                let mut v = vec![OpKind::MethodInvocation];
                v.extend(args.iter().map(|a| OpKind::Parameter(a.ty)));
                v
            }
            ExprKind::Lib { func, .. } => vec![OpKind::Library(*func)],
            ExprKind::New { .. } => vec![OpKind::NewObject],
            ExprKind::NewArray { ty, .. } => vec![OpKind::NewArray(*ty)],
        }
    }
}

fn binary_ops(op: BinaryOp, l: Ty, r: Ty) -> Vec<OpKind> {
    use BinaryOp::*;
    match op {
        Add => vec![OpKind::Arith(ArithOp::Addition, l, r)],
        Sub => vec![OpKind::Arith(ArithOp::Subtraction, l, r)],
        Mul => vec![OpKind::Arith(ArithOp::Multi, l, r)],
        Div => vec![OpKind::Arith(ArithOp::Division, l, r)],
        Lt => vec![OpKind::Compare(CmpOp::Less, l, r)],
        Le => vec![OpKind::Compare(CmpOp::LessEqual, l, r)],
        Gt => vec![OpKind::Compare(CmpOp::Greater, l, r)],
        Ge => vec![OpKind::Compare(CmpOp::GreaterEqual, l, r)],
        Eq => vec![OpKind::Compare(CmpOp::Equal, l, r)],
        Ne => vec![OpKind::Compare(CmpOp::Equal, l, r), OpKind::Not],
        And => vec![OpKind::And],
        Or => vec![OpKind::Or],
        BitAnd => vec![OpKind::Bit(BitOp::BitAnd)],
        BitOr => vec![OpKind::Bit(BitOp::BitOr)],
        Shl => vec![OpKind::Bit(BitOp::SignedBitShiftLeft)],
        Shr => vec![OpKind::Bit(BitOp::SignedBitShiftRight)],
    }
}

fn ty_tag(t: Ty) -> &'static str {
    match t {
        Ty::IntArray => "intArray",
        Ty::FloatArray => "floatArray",
        Ty::CharArray => "charArray",
        other => other.name(),
    }
}

fn tag_ty(s: &str) -> Option<Ty> {
    Some(match s {
        "intArray" => Ty::IntArray,
        "floatArray" => Ty::FloatArray,
        "charArray" => Ty::CharArray,
        "?" => return None,
        other => other.parse().ok()?,
    })
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpKind::Arith(op, l, r) => write!(f, "{op:?}_{}_{}", ty_tag(*l), ty_tag(*r)),
            OpKind::Negate(t) => write!(f, "Negate_{}", ty_tag(*t)),
            OpKind::Increment => f.write_str("Increment"),
            OpKind::Decrement => f.write_str("Decrement"),
            OpKind::Compare(op, l, r) => write!(f, "{op:?}_{}_{}", ty_tag(*l), ty_tag(*r)),
            OpKind::And => f.write_str("And"),
            OpKind::Or => f.write_str("Or"),
            OpKind::Not => f.write_str("Not"),
            OpKind::Bit(op) => write!(f, "{op:?}"),
            OpKind::ArrayReference => f.write_str("ArrayReference"),
            OpKind::FieldReference => f.write_str("FieldReference"),
            OpKind::MethodInvocation => f.write_str("MethodInvocation"),
            OpKind::Parameter(t) => write!(f, "Parameter_{}", ty_tag(*t)),
            OpKind::Return(t) => write!(f, "Return_{}", ty_tag(*t)),
            OpKind::BlockGoto(k) => write!(f, "BlockGoto_{}", format!("{k:?}").to_lowercase()),
            OpKind::Break => f.write_str("Break"),
            OpKind::Switch => f.write_str("Switch_int"),
            OpKind::Assign(l, r) => write!(f, "Assign_{}_{}", ty_tag(*l), ty_tag(*r)),
            OpKind::Declaration(t) => write!(f, "Declaration_{}", ty_tag(*t)),
            OpKind::NewObject => f.write_str("NewObject"),
            OpKind::NewArray(t) => write!(f, "NewArray_{}", ty_tag(*t)),
            OpKind::Conversion(a, b) => write!(f, "Conversion_{}_{}", ty_tag(*a), ty_tag(*b)),
            OpKind::Library(func) => write!(f, "Lib_{}", func.name()),
        }
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unknown operation `{s}`");
        if let Some(name) = s.strip_prefix("Lib_") {
            return LibFn::lookup(name).map(OpKind::Library).ok_or_else(bad);
        }
        let simple = match s {
            "Increment" => Some(OpKind::Increment),
            "Decrement" => Some(OpKind::Decrement),
            "And" => Some(OpKind::And),
            "Or" => Some(OpKind::Or),
            "Not" => Some(OpKind::Not),
            "BitAnd" => Some(OpKind::Bit(BitOp::BitAnd)),
            "BitOr" => Some(OpKind::Bit(BitOp::BitOr)),
            "SignedBitShiftLeft" => Some(OpKind::Bit(BitOp::SignedBitShiftLeft)),
            "SignedBitShiftRight" => Some(OpKind::Bit(BitOp::SignedBitShiftRight)),
            "ArrayReference" => Some(OpKind::ArrayReference),
            "FieldReference" => Some(OpKind::FieldReference),
            "MethodInvocation" => Some(OpKind::MethodInvocation),
            "BlockGoto_if" => Some(OpKind::BlockGoto(GotoKind::If)),
            "BlockGoto_for" => Some(OpKind::BlockGoto(GotoKind::For)),
            "BlockGoto_while" => Some(OpKind::BlockGoto(GotoKind::While)),
            "BlockGoto_switch" => Some(OpKind::BlockGoto(GotoKind::Switch)),
            "Break" => Some(OpKind::Break),
            "Switch_int" => Some(OpKind::Switch),
            "NewObject" => Some(OpKind::NewObject),
            _ => None,
        };
        if let Some(k) = simple {
            return Ok(k);
        }
        let parts: Vec<&str> = s.split('_').collect();
        let ty = |i: usize| parts.get(i).and_then(|p| tag_ty(p)).ok_or_else(bad);
        let kind = match (parts[0], parts.len()) {
            ("Addition", 3) => OpKind::Arith(ArithOp::Addition, ty(1)?, ty(2)?),
            ("Subtraction", 3) => OpKind::Arith(ArithOp::Subtraction, ty(1)?, ty(2)?),
            ("Multi", 3) => OpKind::Arith(ArithOp::Multi, ty(1)?, ty(2)?),
            ("Division", 3) => OpKind::Arith(ArithOp::Division, ty(1)?, ty(2)?),
            ("Less", 3) => OpKind::Compare(CmpOp::Less, ty(1)?, ty(2)?),
            ("LessEqual", 3) => OpKind::Compare(CmpOp::LessEqual, ty(1)?, ty(2)?),
            ("Greater", 3) => OpKind::Compare(CmpOp::Greater, ty(1)?, ty(2)?),
            ("GreaterEqual", 3) => OpKind::Compare(CmpOp::GreaterEqual, ty(1)?, ty(2)?),
            ("Equal", 3) => OpKind::Compare(CmpOp::Equal, ty(1)?, ty(2)?),
            ("Negate", 2) => OpKind::Negate(ty(1)?),
            ("Parameter", 2) => OpKind::Parameter(ty(1)?),
            ("Return", 2) => OpKind::Return(ty(1)?),
            ("Assign", 3) => OpKind::Assign(ty(1)?, ty(2)?),
            ("Declaration", 2) => OpKind::Declaration(ty(1)?),
            ("NewArray", 2) => OpKind::NewArray(ty(1)?),
            ("Conversion", 3) => OpKind::Conversion(ty(1)?, ty(2)?),
            _ => return Err(bad()),
        };
        Ok(kind)
    }
}

impl Serialize for OpKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for OpKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_follow_the_signature_scheme() {
        assert_eq!(OpKind::Arith(ArithOp::Addition, Ty::Int, Ty::Int).to_string(), "Addition_int_int");
        assert_eq!(OpKind::Arith(ArithOp::Multi, Ty::Float, Ty::Float).to_string(), "Multi_float_float");
        assert_eq!(OpKind::Compare(CmpOp::Equal, Ty::Object, Ty::Null).to_string(), "Equal_Object_null");
        assert_eq!(OpKind::BlockGoto(GotoKind::For).to_string(), "BlockGoto_for");
        assert_eq!(OpKind::Library(LibFn::BufferPut).to_string(), "Lib_buffer_put");
    }

    #[test]
    fn text_form_round_trips() {
        let kinds = [
            OpKind::Assign(Ty::FloatArray, Ty::Null),
            OpKind::Conversion(Ty::Float, Ty::Int),
            OpKind::Negate(Ty::Float),
            OpKind::Switch,
            OpKind::Bit(BitOp::SignedBitShiftRight),
            OpKind::Library(LibFn::BufferBulkPut),
            OpKind::Compare(CmpOp::GreaterEqual, Ty::Int, Ty::Float),
        ];
        for k in kinds {
            assert_eq!(k.to_string().parse::<OpKind>(), Ok(k));
        }
        assert!("Frobnicate_int".parse::<OpKind>().is_err());
    }

    #[test]
    fn control_includes_field_reference_and_gotos() {
        for k in [OpKind::MethodInvocation, OpKind::FieldReference, OpKind::BlockGoto(GotoKind::While)] {
            assert_eq!(k.category(), Category::Control);
        }
        assert_eq!(OpKind::Compare(CmpOp::Less, Ty::Int, Ty::Int).group(), Group::Boolean);
    }
}
