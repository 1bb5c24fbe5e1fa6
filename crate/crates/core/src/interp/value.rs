//! Runtime values, the heap and the canonical state digest.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    /// `None` is `null`.
    Ref(Option<u32>),
    Void,
}

impl Value {
    pub fn as_int(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Float(v) => v as i64,
            Value::Bool(b) => b as i64,
            _ => 0,
        }
    }

    pub fn as_float(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Float(v) => v,
            _ => 0.0,
        }
    }

    pub fn as_bool(self) -> bool {
        matches!(self, Value::Bool(true))
    }
}

#[derive(Clone, Debug)]
pub enum Obj {
    Record(Vec<Value>),
    Ints(Vec<i64>),
    Floats(Vec<f64>),
    Chars(Vec<i64>),
    List(Vec<Value>),
    Buffer { data: Vec<f64>, pos: usize },
}

#[derive(Clone, Debug, Default)]
pub struct Heap {
    pub objects: Vec<Obj>,
}

impl Heap {
    pub fn alloc(&mut self, o: Obj) -> Value {
        self.objects.push(o);
        Value::Ref(Some((self.objects.len() - 1) as u32))
    }
}

/// Hashes observable outputs as they happen and, at the end, the object
/// graph reachable from globals. Objects are numbered in discovery order so
/// that allocation order does not affect the digest.
pub struct StateHasher {
    hasher: Sha256,
}

impl Default for StateHasher {
    fn default() -> Self {
        StateHasher { hasher: Sha256::new() }
    }
}

impl StateHasher {
    pub fn tag(&mut self, tag: &[u8]) {
        self.hasher.update(tag);
    }

    pub fn scalar(&mut self, v: Value) {
        match v {
            Value::Int(x) => {
                self.hasher.update(b"i");
                self.hasher.update(x.to_le_bytes());
            }
            Value::Float(x) => {
                self.hasher.update(b"f");
                self.hasher.update(x.to_bits().to_le_bytes());
            }
            Value::Bool(b) => self.hasher.update(if b { b"T" } else { b"F" }),
            Value::Ref(None) => self.hasher.update(b"n"),
            Value::Ref(Some(_)) => self.hasher.update(b"r"),
            Value::Void => self.hasher.update(b"v"),
        }
    }

    pub fn graph(&mut self, roots: &[Value], heap: &Heap) {
        let mut ids: HashMap<u32, u32> = HashMap::new();
        let mut stack: Vec<Value> = roots.iter().rev().copied().collect();
        while let Some(v) = stack.pop() {
            let Value::Ref(Some(r)) = v else {
                self.scalar(v);
                continue;
            };
            if let Some(id) = ids.get(&r) {
                self.hasher.update(b"@");
                self.hasher.update(id.to_le_bytes());
                continue;
            }
            let id = ids.len() as u32;
            ids.insert(r, id);
            match &heap.objects[r as usize] {
                Obj::Record(fields) => {
                    self.hasher.update(b"R");
                    self.hasher.update((fields.len() as u64).to_le_bytes());
                    stack.extend(fields.iter().rev().copied());
                }
                Obj::List(items) => {
                    self.hasher.update(b"L");
                    self.hasher.update((items.len() as u64).to_le_bytes());
                    stack.extend(items.iter().rev().copied());
                }
                Obj::Ints(xs) | Obj::Chars(xs) => {
                    self.hasher.update(b"I");
                    self.hasher.update((xs.len() as u64).to_le_bytes());
                    for x in xs {
                        self.hasher.update(x.to_le_bytes());
                    }
                }
                Obj::Floats(xs) => {
                    self.hasher.update(b"F");
                    self.hasher.update((xs.len() as u64).to_le_bytes());
                    for x in xs {
                        self.hasher.update(x.to_bits().to_le_bytes());
                    }
                }
                Obj::Buffer { data, pos } => {
                    self.hasher.update(b"B");
                    self.hasher.update((data.len() as u64).to_le_bytes());
                    self.hasher.update((*pos as u64).to_le_bytes());
                    for x in data {
                        self.hasher.update(x.to_bits().to_le_bytes());
                    }
                }
            }
        }
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}
