use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Static type of an expression, variable or field.
///
/// `Null` is the type of the `null` literal only; it is assignable to
/// `Object` and to every array type. `Unknown` marks expressions that have
/// not been through the checker yet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ty {
    Int,
    Float,
    Bool,
    Object,
    Null,
    IntArray,
    FloatArray,
    CharArray,
    Void,
    Unknown,
}

impl Ty {
    pub fn is_numeric(self) -> bool {
        matches!(self, Ty::Int | Ty::Float)
    }

    pub fn is_array(self) -> bool {
        matches!(self, Ty::IntArray | Ty::FloatArray | Ty::CharArray)
    }

    pub fn is_reference(self) -> bool {
        matches!(self, Ty::Object | Ty::Null) || self.is_array()
    }

    /// Element type produced by indexing. `char` elements are read as `int`.
    pub fn element(self) -> Option<Ty> {
        match self {
            Ty::IntArray | Ty::CharArray => Some(Ty::Int),
            Ty::FloatArray => Some(Ty::Float),
            _ => None,
        }
    }

    /// Whether a value of type `from` may be stored in a slot of type `self`.
    pub fn accepts(self, from: Ty) -> bool {
        self == from
            || (self == Ty::Float && from == Ty::Int)
            || (from == Ty::Null && (self == Ty::Object || self.is_array()))
    }

    pub fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Float => "float",
            Ty::Bool => "bool",
            Ty::Object => "Object",
            Ty::Null => "null",
            Ty::IntArray => "int[]",
            Ty::FloatArray => "float[]",
            Ty::CharArray => "char[]",
            Ty::Void => "void",
            Ty::Unknown => "?",
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "int" => Ty::Int,
            "float" => Ty::Float,
            "bool" => Ty::Bool,
            "Object" => Ty::Object,
            "null" => Ty::Null,
            "int[]" => Ty::IntArray,
            "float[]" => Ty::FloatArray,
            "char[]" => Ty::CharArray,
            "void" => Ty::Void,
            _ => return Err(format!("unknown type `{s}`")),
        })
    }
}
