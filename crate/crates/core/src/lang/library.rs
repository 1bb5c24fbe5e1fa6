//! Registry of built-in library functions.
//!
//! Library functions are atomic energy operations: the interpreter gives
//! them native semantics and the operation dictionary counts one
//! `Library` operation per call, independent of what the call does
//! internally.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::types::Ty;

/// Mutable runtime state a library function may observe or change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeapRegion {
    /// Contents and sizes of lists.
    Lists,
    /// Contents and write positions of float buffers.
    Buffers,
    /// The observable output stream.
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LibFn {
    ListNew,
    ListAdd,
    ListGet,
    ListSize,
    BufferNew,
    BufferGet,
    BufferSet,
    BufferPut,
    BufferBulkPut,
    BufferLimit,
    BufferPosition,
    BufferRewind,
    MathSqrt,
    MathSin,
    MathCos,
    MathAbs,
    MathMin,
    MathMax,
    EmitInt,
    EmitFloat,
}

pub struct Signature {
    pub params: &'static [Ty],
    pub ret: Ty,
}

impl LibFn {
    pub const ALL: [LibFn; 20] = [
        LibFn::ListNew,
        LibFn::ListAdd,
        LibFn::ListGet,
        LibFn::ListSize,
        LibFn::BufferNew,
        LibFn::BufferGet,
        LibFn::BufferSet,
        LibFn::BufferPut,
        LibFn::BufferBulkPut,
        LibFn::BufferLimit,
        LibFn::BufferPosition,
        LibFn::BufferRewind,
        LibFn::MathSqrt,
        LibFn::MathSin,
        LibFn::MathCos,
        LibFn::MathAbs,
        LibFn::MathMin,
        LibFn::MathMax,
        LibFn::EmitInt,
        LibFn::EmitFloat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LibFn::ListNew => "list_new",
            LibFn::ListAdd => "list_add",
            LibFn::ListGet => "list_get",
            LibFn::ListSize => "list_size",
            LibFn::BufferNew => "buffer_new",
            LibFn::BufferGet => "buffer_get",
            LibFn::BufferSet => "buffer_set",
            LibFn::BufferPut => "buffer_put",
            LibFn::BufferBulkPut => "buffer_bulk_put",
            LibFn::BufferLimit => "buffer_limit",
            LibFn::BufferPosition => "buffer_position",
            LibFn::BufferRewind => "buffer_rewind",
            LibFn::MathSqrt => "math_sqrt",
            LibFn::MathSin => "math_sin",
            LibFn::MathCos => "math_cos",
            LibFn::MathAbs => "math_abs",
            LibFn::MathMin => "math_min",
            LibFn::MathMax => "math_max",
            LibFn::EmitInt => "emit_int",
            LibFn::EmitFloat => "emit_float",
        }
    }

    pub fn lookup(name: &str) -> Option<LibFn> {
        LibFn::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn signature(self) -> Signature {
        use Ty::*;
        let (params, ret): (&'static [Ty], Ty) = match self {
            LibFn::ListNew => (&[], Object),
            LibFn::ListAdd => (&[Object, Object], Void),
            LibFn::ListGet => (&[Object, Int], Object),
            LibFn::ListSize => (&[Object], Int),
            LibFn::BufferNew => (&[Int], Object),
            LibFn::BufferGet => (&[Object, Int], Float),
            LibFn::BufferSet => (&[Object, Int, Float], Void),
            LibFn::BufferPut => (&[Object, Float], Void),
            LibFn::BufferBulkPut => (&[Object, Object], Void),
            LibFn::BufferLimit => (&[Object], Int),
            LibFn::BufferPosition => (&[Object], Int),
            LibFn::BufferRewind => (&[Object], Void),
            LibFn::MathSqrt | LibFn::MathSin | LibFn::MathCos | LibFn::MathAbs => (&[Float], Float),
            LibFn::MathMin | LibFn::MathMax => (&[Float, Float], Float),
            LibFn::EmitInt => (&[Int], Void),
            LibFn::EmitFloat => (&[Float], Void),
        };
        Signature { params, ret }
    }

    /// Regions whose state the result depends on.
    pub fn reads(self) -> &'static [HeapRegion] {
        match self {
            LibFn::ListGet | LibFn::ListSize => &[HeapRegion::Lists],
            LibFn::BufferGet | LibFn::BufferPosition => &[HeapRegion::Buffers],
            LibFn::BufferBulkPut => &[HeapRegion::Buffers],
            // A buffer's limit is fixed when it is created.
            _ => &[],
        }
    }

    /// Regions the call mutates. Allocation counts as a write so that
    /// allocating calls are never treated as invariant.
    pub fn writes(self) -> &'static [HeapRegion] {
        match self {
            LibFn::ListNew | LibFn::ListAdd => &[HeapRegion::Lists],
            LibFn::BufferNew
            | LibFn::BufferSet
            | LibFn::BufferPut
            | LibFn::BufferBulkPut
            | LibFn::BufferRewind => &[HeapRegion::Buffers],
            LibFn::EmitInt | LibFn::EmitFloat => &[HeapRegion::Output],
            _ => &[],
        }
    }

    pub fn is_pure(self) -> bool {
        self.writes().is_empty()
    }

    /// Whether the call can raise a runtime error for some argument values.
    pub fn may_trap(self) -> bool {
        !matches!(
            self,
            LibFn::MathSqrt
                | LibFn::MathSin
                | LibFn::MathCos
                | LibFn::MathAbs
                | LibFn::MathMin
                | LibFn::MathMax
                | LibFn::EmitInt
                | LibFn::EmitFloat
                | LibFn::ListNew
        )
    }
}

impl fmt::Display for LibFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LibFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LibFn::lookup(s).ok_or_else(|| format!("unknown library function `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in LibFn::ALL {
            assert_eq!(LibFn::lookup(f.name()), Some(f));
        }
        assert_eq!(LibFn::lookup("printf"), None);
    }

    #[test]
    fn limit_is_pure_and_put_is_not() {
        assert!(LibFn::BufferLimit.is_pure());
        assert!(LibFn::ListSize.is_pure());
        assert!(!LibFn::BufferPut.is_pure());
        assert!(!LibFn::ListNew.is_pure());
    }
}
