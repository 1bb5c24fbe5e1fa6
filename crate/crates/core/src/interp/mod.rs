//! Deterministic interpreter with per-block execution counting, block
//! ablation and an optional per-operation trace.

pub mod cases;
pub mod lower;
pub mod value;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::blocks::{divide_blocks, BlockMap, OpKind};
use crate::lang::ast::BinaryOp;
use crate::lang::{CheckedProgram, LibFn, Ty};

pub use cases::{generate_cases, AblationPolicy, CaseDesign, CaseError, ExecutionCase, InputEvent, Scalar};
use lower::{zero, LBody, LExpr, LProgram, LStmt, LTarget, LE, LS};
use value::{Heap, Obj, StateHasher, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpConfig {
    pub seconds_per_step: f64,
    pub step_limit: u64,
    pub max_call_depth: usize,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { seconds_per_step: 1e-6, step_limit: 200_000_000, max_call_depth: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeFailure {
    pub block: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub case_id: String,
    pub block_counts: BTreeMap<String, u64>,
    pub output_digest: String,
    pub step_count: u64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<RuntimeFailure>,
}

impl ExecutionLog {
    pub fn is_failed(&self) -> bool {
        self.failed.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InterpError {
    #[error("block `{0}` does not exist")]
    UnknownBlock(String),
    #[error("block `{0}` is not ablatable (only body and arm blocks are)")]
    NotAblatable(String),
    #[error("entry method `frame` is missing")]
    NoEntry,
    #[error("entry method `{0}` must take only int, float or bool parameters")]
    BadEntrySignature(String),
    #[error("case `{case}`: {message}")]
    Runtime { case: String, message: String },
}

/// A program prepared for repeated execution.
pub struct Interpreter {
    pub map: BlockMap,
    lowered: LProgram,
    pub config: InterpConfig,
}

struct Trap {
    block: usize,
    message: String,
}

enum Flow {
    Normal,
    Break,
    Return(Value),
}

type Exec<T> = Result<T, Trap>;

struct Machine<'a> {
    prog: &'a LProgram,
    heap: Heap,
    globals: Vec<Value>,
    counts: Vec<u64>,
    ablated: Vec<bool>,
    tally: Option<Vec<u64>>,
    out: StateHasher,
    steps: u64,
    step_limit: u64,
    depth: usize,
    max_depth: usize,
    /// Block whose code is currently running, for error reports.
    block: usize,
}

impl Interpreter {
    pub fn new(program: &CheckedProgram) -> Self {
        let map = divide_blocks(program);
        Self::with_map(program, map)
    }

    pub fn with_map(program: &CheckedProgram, map: BlockMap) -> Self {
        let lowered = lower::lower(program, &map);
        Interpreter { map, lowered, config: InterpConfig::default() }
    }

    pub fn with_config(mut self, config: InterpConfig) -> Self {
        self.config = config;
        self
    }

    /// Parameter types of `frame`, or `None` if the program has no frame method.
    pub fn frame_params(&self) -> Option<&[Ty]> {
        self.lowered.method_index.get("frame").map(|&m| self.lowered.methods[m].params.as_slice())
    }

    pub fn validate(&self, case: &ExecutionCase) -> Result<(), InterpError> {
        for b in &case.ablated_blocks {
            let info = self.map.get(b).ok_or_else(|| InterpError::UnknownBlock(b.clone()))?;
            if !info.kind.is_ablatable() {
                return Err(InterpError::NotAblatable(b.clone()));
            }
        }
        let params = self.frame_params().ok_or(InterpError::NoEntry)?;
        if params.iter().any(|t| !matches!(t, Ty::Int | Ty::Float | Ty::Bool)) {
            return Err(InterpError::BadEntrySignature("frame".into()));
        }
        Ok(())
    }

    pub fn run(&self, case: &ExecutionCase) -> Result<ExecutionLog, InterpError> {
        self.execute(case, false).map(|(log, _)| log)
    }

    /// Run a case and tally every executed operation individually.
    pub fn step_trace(&self, case: &ExecutionCase) -> Result<BTreeMap<OpKind, u64>, InterpError> {
        let (log, tally) = self.execute(case, true)?;
        if let Some(f) = log.failed {
            return Err(InterpError::Runtime { case: case.case_id.clone(), message: format!("{} in {}", f.message, f.block) });
        }
        let tally = tally.expect("traced");
        Ok(self.lowered.ops.iter().copied().zip(tally).filter(|(_, n)| *n > 0).collect())
    }

    /// Run many cases in parallel; results are in input order.
    pub fn run_all(&self, cases: &[ExecutionCase]) -> Result<Vec<ExecutionLog>, InterpError> {
        use rayon::prelude::*;
        cases.par_iter().map(|c| self.run(c)).collect()
    }

    fn execute(&self, case: &ExecutionCase, trace: bool) -> Result<(ExecutionLog, Option<Vec<u64>>), InterpError> {
        self.validate(case)?;
        let prog = &self.lowered;
        let mut ablated = vec![false; prog.n_blocks];
        for b in &case.ablated_blocks {
            ablated[self.map.index_of(b).expect("validated")] = true;
        }
        let mut m = Machine {
            prog,
            heap: Heap::default(),
            globals: prog.globals.iter().map(|(_, v)| *v).collect(),
            counts: vec![0; prog.n_blocks],
            ablated,
            tally: trace.then(|| vec![0; prog.ops.len()]),
            out: StateHasher::default(),
            steps: 0,
            step_limit: self.config.step_limit,
            depth: 0,
            max_depth: self.config.max_call_depth,
            block: 0,
        };
        let frame = prog.method_index["frame"];
        let result = (|| -> Exec<()> {
            if let Some(&init) = prog.method_index.get("init") {
                let args: Vec<Value> = prog.methods[init].params.iter().map(|t| zero(*t)).collect();
                let r = m.invoke(init, args)?;
                m.out.tag(b"init");
                m.out.scalar(r);
            }
            let events: BTreeMap<u32, &Vec<Scalar>> = case.inputs.iter().map(|e| (e.frame, &e.args)).collect();
            for f in 0..case.frame_budget {
                let params = &prog.methods[frame].params;
                let args: Vec<Value> = match events.get(&f) {
                    Some(vals) => params.iter().enumerate().map(|(i, t)| vals.get(i).map_or(zero(*t), |s| s.to_value(*t))).collect(),
                    None => params.iter().map(|t| zero(*t)).collect(),
                };
                let r = m.invoke(frame, args)?;
                m.out.tag(b"frame");
                m.out.scalar(r);
            }
            Ok(())
        })();
        let failed = result.err().map(|t| RuntimeFailure { block: self.map.id(t.block).to_string(), message: t.message });
        let Machine { heap, globals, counts, tally, mut out, steps, .. } = m;
        out.tag(b"globals");
        out.graph(&globals, &heap);
        let block_counts = counts.iter().enumerate().map(|(i, n)| (self.map.id(i).to_string(), *n)).collect();
        let log = ExecutionLog {
            case_id: case.case_id.clone(),
            block_counts,
            output_digest: out.finish(),
            step_count: steps,
            duration_s: steps as f64 * self.config.seconds_per_step,
            failed,
        };
        Ok((log, tally))
    }
}

/// Convenience wrapper: divide, lower and run one case.
pub fn run(program: &CheckedProgram, case: &ExecutionCase) -> Result<ExecutionLog, InterpError> {
    Interpreter::new(program).run(case)
}

pub fn step_trace(program: &CheckedProgram, case: &ExecutionCase) -> Result<BTreeMap<OpKind, u64>, InterpError> {
    Interpreter::new(program).step_trace(case)
}

pub(crate) fn eval_binary(op: BinaryOp, l: Value, r: Value) -> Result<Value, &'static str> {
    use BinaryOp::*;
    Ok(match op {
        Add | Sub | Mul | Div => match (l, r) {
            (Value::Int(a), Value::Int(b)) => Value::Int(match op {
                Add => a.wrapping_add(b),
                Sub => a.wrapping_sub(b),
                Mul => a.wrapping_mul(b),
                _ => {
                    if b == 0 {
                        return Err("division by zero");
                    }
                    a.wrapping_div(b)
                }
            }),
            _ => {
                let (a, b) = (l.as_float(), r.as_float());
                Value::Float(match op {
                    Add => a + b,
                    Sub => a - b,
                    Mul => a * b,
                    _ => a / b,
                })
            }
        },
        Lt | Le | Gt | Ge => {
            let ord = match (l, r) {
                (Value::Int(a), Value::Int(b)) => a.partial_cmp(&b),
                _ => l.as_float().partial_cmp(&r.as_float()),
            };
            Value::Bool(match ord {
                None => false,
                Some(o) => match op {
                    Lt => o.is_lt(),
                    Le => o.is_le(),
                    Gt => o.is_gt(),
                    _ => o.is_ge(),
                },
            })
        }
        Eq | Ne => {
            let eq = match (l, r) {
                (Value::Int(a), Value::Int(b)) => a == b,
                (Value::Bool(a), Value::Bool(b)) => a == b,
                (Value::Ref(a), Value::Ref(b)) => a == b,
                _ => l.as_float() == r.as_float(),
            };
            Value::Bool(if op == Eq { eq } else { !eq })
        }
        And => Value::Bool(l.as_bool() && r.as_bool()),
        Or => Value::Bool(l.as_bool() || r.as_bool()),
        BitAnd => Value::Int(l.as_int() & r.as_int()),
        BitOr => Value::Int(l.as_int() | r.as_int()),
        Shl => Value::Int(l.as_int().wrapping_shl((r.as_int() & 63) as u32)),
        Shr => Value::Int(l.as_int().wrapping_shr((r.as_int() & 63) as u32)),
    })
}

impl Machine<'_> {
    fn trap<T>(&self, message: impl Into<String>) -> Exec<T> {
        Err(Trap { block: self.block, message: message.into() })
    }

    #[inline]
    fn count_ops(&mut self, ops: &[u16]) {
        if let Some(t) = &mut self.tally {
            for &o in ops {
                t[o as usize] += 1;
            }
        }
    }

    fn step(&mut self) -> Exec<()> {
        self.steps += 1;
        if self.steps > self.step_limit {
            return self.trap("step limit exceeded");
        }
        Ok(())
    }

    fn enter(&mut self, block: usize) {
        self.counts[block] += 1;
        self.block = block;
    }

    fn invoke(&mut self, method: usize, args: Vec<Value>) -> Exec<Value> {
        if self.depth >= self.max_depth {
            return self.trap("call depth exceeded");
        }
        let prog = self.prog;
        let m = &prog.methods[method];
        let mut frame = args;
        frame.resize(m.n_slots, Value::Void);
        let caller_block = self.block;
        self.depth += 1;
        self.enter(m.entry_block);
        let flow = self.block_stmts(&m.body, &mut frame);
        self.depth -= 1;
        self.block = caller_block;
        match flow? {
            Flow::Return(v) => Ok(v),
            _ => Ok(Value::Void),
        }
    }

    fn block_stmts(&mut self, stmts: &[LStmt], frame: &mut [Value]) -> Exec<Flow> {
        for s in stmts {
            match self.stmt(s, frame)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    /// Enter a construct body unless it is ablated.
    fn run_body(&mut self, body: &LBody, frame: &mut [Value]) -> Exec<Flow> {
        if self.ablated[body.block] {
            return Ok(Flow::Normal);
        }
        let outer = self.block;
        self.enter(body.block);
        self.count_ops(&[body.goto]);
        let flow = self.block_stmts(&body.stmts, frame);
        self.block = outer;
        flow
    }

    fn stmt(&mut self, s: &LStmt, frame: &mut [Value]) -> Exec<Flow> {
        self.step()?;
        self.block = s.block;
        self.count_ops(&s.ops);
        match &s.kind {
            LS::Decl(slot, init, default) => {
                frame[*slot] = match init {
                    Some(e) => self.eval(e, frame)?,
                    None => *default,
                };
            }
            LS::Assign { target, target_ops, value } => {
                let place = self.place(target, frame)?;
                let v = self.eval(value, frame)?;
                self.count_ops(target_ops);
                self.store(place, v, frame)?;
            }
            LS::IncDec { target, target_ops, delta } => {
                let place = self.place(target, frame)?;
                self.count_ops(target_ops);
                let v = self.load(&place, frame)?;
                self.store(place, Value::Int(v.as_int().wrapping_add(*delta)), frame)?;
            }
            LS::Expr(e) => {
                self.eval(e, frame)?;
            }
            LS::Return(v) => {
                let v = match v {
                    Some(e) => self.eval(e, frame)?,
                    None => Value::Void,
                };
                return Ok(Flow::Return(v));
            }
            LS::Break => return Ok(Flow::Break),
            LS::Enter(b) => self.enter(*b),
            LS::If { cond, then, other } => {
                let c = self.eval(cond, frame)?.as_bool();
                return self.run_body(if c { then } else { other }, frame);
            }
            LS::Switch { scrutinee, arms, other } => {
                let k = self.eval(scrutinee, frame)?.as_int();
                let body = arms.iter().find(|(l, _)| *l == k).map_or(other, |(_, b)| b);
                return match self.run_body(body, frame)? {
                    Flow::Break => Ok(Flow::Normal),
                    f => Ok(f),
                };
            }
            LS::While { cond, header, body } => {
                let outer = self.block;
                loop {
                    self.step()?;
                    self.enter(*header);
                    let c = self.eval(cond, frame)?.as_bool();
                    self.block = outer;
                    if !c {
                        break;
                    }
                    match self.run_body(body, frame)? {
                        Flow::Normal => {}
                        Flow::Break => break,
                        f @ Flow::Return(_) => return Ok(f),
                    }
                }
            }
            LS::For { init, init_block, cond, bool_block, body, update, update_block } => {
                let outer = self.block;
                self.enter(*init_block);
                if let Some(i) = init {
                    self.stmt(i, frame)?;
                }
                loop {
                    self.step()?;
                    self.enter(*bool_block);
                    let c = self.eval(cond, frame)?.as_bool();
                    self.block = outer;
                    if !c {
                        break;
                    }
                    match self.run_body(body, frame)? {
                        Flow::Normal => {}
                        Flow::Break => break,
                        f @ Flow::Return(_) => return Ok(f),
                    }
                    self.enter(*update_block);
                    if let Some(u) = update {
                        self.stmt(u, frame)?;
                    }
                    self.block = outer;
                }
                self.block = outer;
            }
        }
        Ok(Flow::Normal)
    }

    fn place(&mut self, t: &LTarget, frame: &mut [Value]) -> Exec<Place> {
        Ok(match t {
            LTarget::Local(s) => Place::Local(*s),
            LTarget::Global(g) => Place::Global(*g),
            LTarget::Field(obj, f) => {
                let r = self.eval(obj, frame)?;
                Place::Field(self.deref(r)?, *f)
            }
            LTarget::Index(arr, idx) => {
                let r = self.eval(arr, frame)?;
                let i = self.eval(idx, frame)?.as_int();
                Place::Index(self.deref(r)?, i)
            }
        })
    }

    fn deref(&self, v: Value) -> Exec<u32> {
        match v {
            Value::Ref(Some(r)) => Ok(r),
            _ => self.trap("null dereference"),
        }
    }

    fn load(&self, p: &Place, frame: &[Value]) -> Exec<Value> {
        match *p {
            Place::Local(s) => Ok(frame[s]),
            Place::Global(g) => Ok(self.globals[g]),
            Place::Field(r, f) => self.field(r, f),
            Place::Index(r, i) => self.index(r, i),
        }
    }

    fn field(&self, r: u32, f: usize) -> Exec<Value> {
        match &self.heap.objects[r as usize] {
            Obj::Record(fields) => Ok(fields[f]),
            _ => self.trap("field access on a non-record object"),
        }
    }

    fn index(&self, r: u32, i: i64) -> Exec<Value> {
        let oob = || format!("array index {i} out of bounds");
        match &self.heap.objects[r as usize] {
            Obj::Ints(xs) | Obj::Chars(xs) => xs.get(usize::try_from(i).unwrap_or(usize::MAX)).map(|v| Value::Int(*v)).map_or_else(|| self.trap(oob()), Ok),
            Obj::Floats(xs) => xs.get(usize::try_from(i).unwrap_or(usize::MAX)).map(|v| Value::Float(*v)).map_or_else(|| self.trap(oob()), Ok),
            _ => self.trap("indexing a non-array object"),
        }
    }

    fn store(&mut self, p: Place, v: Value, frame: &mut [Value]) -> Exec<()> {
        match p {
            Place::Local(s) => frame[s] = v,
            Place::Global(g) => self.globals[g] = v,
            Place::Field(r, f) => match &mut self.heap.objects[r as usize] {
                Obj::Record(fields) => fields[f] = v,
                _ => return self.trap("field access on a non-record object"),
            },
            Place::Index(r, i) => {
                let idx = usize::try_from(i).unwrap_or(usize::MAX);
                let ok = match &mut self.heap.objects[r as usize] {
                    Obj::Ints(xs) | Obj::Chars(xs) => xs.get_mut(idx).map(|x| *x = v.as_int()).is_some(),
                    Obj::Floats(xs) => xs.get_mut(idx).map(|x| *x = v.as_float()).is_some(),
                    _ => return self.trap("indexing a non-array object"),
                };
                if !ok {
                    return self.trap(format!("array index {i} out of bounds"));
                }
            }
        }
        Ok(())
    }

    fn eval(&mut self, e: &LExpr, frame: &mut [Value]) -> Exec<Value> {
        let v = match &e.kind {
            LE::Const(v) => *v,
            LE::Local(s) => frame[*s],
            LE::Global(g) => self.globals[*g],
            LE::Field(obj, f) => {
                let r = self.eval(obj, frame)?;
                let r = self.deref(r)?;
                self.field(r, *f)?
            }
            LE::Length(obj) => {
                let r = self.eval(obj, frame)?;
                let r = self.deref(r)?;
                match &self.heap.objects[r as usize] {
                    Obj::Ints(xs) | Obj::Chars(xs) => Value::Int(xs.len() as i64),
                    Obj::Floats(xs) => Value::Int(xs.len() as i64),
                    _ => return self.trap("`length` of a non-array object"),
                }
            }
            LE::Index(arr, idx) => {
                let r = self.eval(arr, frame)?;
                let i = self.eval(idx, frame)?.as_int();
                let r = self.deref(r)?;
                self.index(r, i)?
            }
            LE::Neg(x) => match self.eval(x, frame)? {
                Value::Int(v) => Value::Int(v.wrapping_neg()),
                v => Value::Float(-v.as_float()),
            },
            LE::Not(x) => Value::Bool(!self.eval(x, frame)?.as_bool()),
            LE::Binary(op, l, r) => {
                // Both operands are always evaluated.
                let a = self.eval(l, frame)?;
                let b = self.eval(r, frame)?;
                match eval_binary(*op, a, b) {
                    Ok(v) => v,
                    Err(msg) => return self.trap(msg),
                }
            }
            LE::Cast(to, x) => {
                let v = self.eval(x, frame)?;
                if *to == Ty::Int { Value::Int(v.as_int()) } else { Value::Float(v.as_float()) }
            }
            LE::Widen(x) => Value::Float(self.eval(x, frame)?.as_float()),
            LE::Call(m, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, frame)?);
                }
                self.count_ops(&e.ops);
                return self.invoke(*m, vals);
            }
            LE::Lib(f, args) => {
                let mut vals = [Value::Void; 3];
                for (i, a) in args.iter().enumerate() {
                    vals[i] = self.eval(a, frame)?;
                }
                self.library(*f, &vals[..args.len()])?
            }
            LE::New => self.heap.alloc(Obj::Record(self.prog.field_defaults.clone())),
            LE::NewArray(ty, len) => {
                let n = self.eval(len, frame)?.as_int();
                if n < 0 {
                    return self.trap(format!("negative array size {n}"));
                }
                let n = n as usize;
                self.heap.alloc(match ty {
                    Ty::FloatArray => Obj::Floats(vec![0.0; n]),
                    Ty::CharArray => Obj::Chars(vec![0; n]),
                    _ => Obj::Ints(vec![0; n]),
                })
            }
        };
        self.count_ops(&e.ops);
        Ok(v)
    }

    fn library(&mut self, f: LibFn, a: &[Value]) -> Exec<Value> {
        let oob = |i: i64| format!("{} index {i} out of bounds", f.name());
        Ok(match f {
            LibFn::ListNew => self.heap.alloc(Obj::List(Vec::new())),
            LibFn::MathSqrt => Value::Float(a[0].as_float().sqrt()),
            LibFn::MathSin => Value::Float(a[0].as_float().sin()),
            LibFn::MathCos => Value::Float(a[0].as_float().cos()),
            LibFn::MathAbs => Value::Float(a[0].as_float().abs()),
            LibFn::MathMin => Value::Float(a[0].as_float().min(a[1].as_float())),
            LibFn::MathMax => Value::Float(a[0].as_float().max(a[1].as_float())),
            LibFn::EmitInt | LibFn::EmitFloat => {
                self.out.tag(b"emit");
                self.out.scalar(a[0]);
                Value::Void
            }
            LibFn::BufferNew => {
                let n = a[0].as_int();
                if n < 0 {
                    return self.trap(format!("negative buffer size {n}"));
                }
                self.heap.alloc(Obj::Buffer { data: vec![0.0; n as usize], pos: 0 })
            }
            _ => {
                let r = self.deref(a[0])? as usize;
                if f == LibFn::BufferBulkPut {
                    let src = self.deref(a[1])? as usize;
                    let Obj::Buffer { data: s, .. } = &self.heap.objects[src] else {
                        return self.trap("buffer_bulk_put source is not a buffer");
                    };
                    let s = s.clone();
                    let Obj::Buffer { data, pos } = &mut self.heap.objects[r] else {
                        return self.trap("buffer_bulk_put target is not a buffer");
                    };
                    if *pos + s.len() > data.len() {
                        return self.trap("buffer overflow");
                    }
                    data[*pos..*pos + s.len()].copy_from_slice(&s);
                    *pos += s.len();
                    return Ok(Value::Void);
                }
                match (&mut self.heap.objects[r], f) {
                    (Obj::List(items), LibFn::ListAdd) => {
                        items.push(a[1]);
                        Value::Void
                    }
                    (Obj::List(items), LibFn::ListGet) => {
                        let i = a[1].as_int();
                        match items.get(usize::try_from(i).unwrap_or(usize::MAX)) {
                            Some(v) => *v,
                            None => return self.trap(oob(i)),
                        }
                    }
                    (Obj::List(items), LibFn::ListSize) => Value::Int(items.len() as i64),
                    (Obj::Buffer { data, .. }, LibFn::BufferGet) => {
                        let i = a[1].as_int();
                        match data.get(usize::try_from(i).unwrap_or(usize::MAX)) {
                            Some(v) => Value::Float(*v),
                            None => return self.trap(oob(i)),
                        }
                    }
                    (Obj::Buffer { data, .. }, LibFn::BufferSet) => {
                        let i = a[1].as_int();
                        match data.get_mut(usize::try_from(i).unwrap_or(usize::MAX)) {
                            Some(x) => *x = a[2].as_float(),
                            None => return self.trap(oob(i)),
                        }
                        Value::Void
                    }
                    (Obj::Buffer { data, pos }, LibFn::BufferPut) => {
                        if *pos >= data.len() {
                            return self.trap("buffer overflow");
                        }
                        data[*pos] = a[1].as_float();
                        *pos += 1;
                        Value::Void
                    }
                    (Obj::Buffer { data, .. }, LibFn::BufferLimit) => Value::Int(data.len() as i64),
                    (Obj::Buffer { pos, .. }, LibFn::BufferPosition) => Value::Int(*pos as i64),
                    (Obj::Buffer { pos, .. }, LibFn::BufferRewind) => {
                        *pos = 0;
                        Value::Void
                    }
                    _ => return self.trap(format!("{} applied to the wrong kind of object", f.name())),
                }
            }
        })
    }
}

enum Place {
    Local(usize),
    Global(usize),
    Field(u32, usize),
    Index(u32, i64),
}

/// Blocks with a nonzero count in any of the logs.
pub fn executed_blocks(logs: &[ExecutionLog]) -> BTreeSet<String> {
    logs.iter().flat_map(|l| l.block_counts.iter().filter(|(_, n)| **n > 0).map(|(b, _)| b.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{build_dictionary, total_op_counts};
    use crate::lang::load;

    fn case(frames: u32, ablated: &[&str]) -> ExecutionCase {
        ExecutionCase {
            case_id: "c".into(),
            inputs: vec![],
            ablated_blocks: ablated.iter().map(|s| s.to_string()).collect(),
            replicate_count: 1,
            frame_budget: frames,
        }
    }

    const LOOP: &str = "void frame(){ int s = 0; for (int i = 0; i < 10; i++) { s = s + i; } emit_int(s); }";

    #[test]
    fn counted_loop_block_counts() {
        let p = load(LOOP).unwrap();
        let log = run(&p, &case(1, &[])).unwrap();
        let c = |b: &str| log.block_counts[b];
        assert_eq!((c("frame().for_1"), c("frame().for_1.bool"), c("frame().for_1.init"), c("frame().for_1.update")), (10, 11, 1, 10));
    }

    #[test]
    fn ablated_body_keeps_header_counts() {
        let p = load(LOOP).unwrap();
        let log = run(&p, &case(1, &["frame().for_1"])).unwrap();
        assert_eq!(log.block_counts["frame().for_1"], 0);
        assert_eq!(log.block_counts["frame().for_1.bool"], 11);
        assert_eq!(log.block_counts["frame().for_1.update"], 10);
    }

    #[test]
    fn header_blocks_cannot_be_ablated() {
        let p = load(LOOP).unwrap();
        assert!(matches!(run(&p, &case(1, &["frame().for_1.bool"])), Err(InterpError::NotAblatable(_))));
    }

    #[test]
    fn runtime_errors_name_the_block() {
        let p = load("void frame(int k){ int[] a = new int[2]; if (k == 0) { a[3] = 1; } }").unwrap();
        let log = run(&p, &case(1, &[])).unwrap();
        let f = log.failed.unwrap();
        assert_eq!(f.block, "frame().if_1");
        assert!(f.message.contains("out of bounds"));
    }

    #[test]
    fn deterministic_digest() {
        let p = load(LOOP).unwrap();
        let a = run(&p, &case(3, &[])).unwrap();
        let b = run(&p, &case(3, &[])).unwrap();
        assert_eq!(a, b);
        let c = run(&p, &case(3, &["frame().for_1"])).unwrap();
        assert_ne!(a.output_digest, c.output_digest);
    }

    #[test]
    fn trace_matches_dictionary_with_calls_and_early_returns() {
        let src = "record P { float x; }
            global Object p;
            void init(){ p = new P(); }
            int sign(int v){ if (v < 0) { return -1; } if (v == 0) return 0; return 1; }
            void frame(int k){
                int t = 0;
                while (t < 5) { t++; if (t == 3) { break; } }
                switch (sign(k - 2)) { case -1: p.x = p.x + 1; break; case 1: p.x = p.x * 2.0; default: emit_int(0); }
                for (int i = 0; i < k; i = i + 1) { emit_float(p.x / (float) (i + 1)); }
            }";
        let p = load(src).unwrap();
        let interp = Interpreter::new(&p);
        let d = build_dictionary(&p, &interp.map);
        let c = ExecutionCase {
            case_id: "t".into(),
            inputs: (0..6).map(|f| InputEvent { frame: f, args: vec![Scalar::Int(f as i64)] }).collect(),
            ablated_blocks: BTreeSet::new(),
            replicate_count: 1,
            frame_budget: 6,
        };
        let log = interp.run(&c).unwrap();
        assert!(log.failed.is_none());
        let totals = total_op_counts(&log.block_counts, &d).unwrap().as_map();
        assert_eq!(interp.step_trace(&c).unwrap(), totals);
    }

    #[test]
    fn loop_of_2112_with_stride_three() {
        let src = "global Object v; global Object out;
            void init(){ v = buffer_new(2112); out = buffer_new(2112); }
            void frame(){ buffer_rewind(out); for (int i = 0; i < buffer_limit(v); i = i + 3) {
                buffer_put(out, buffer_get(v, i)); buffer_put(out, buffer_get(v, i + 1)); buffer_put(out, buffer_get(v, i + 2)); } }";
        let p = load(src).unwrap();
        let log = run(&p, &case(1, &[])).unwrap();
        assert_eq!(log.block_counts["frame().for_1"], 704);
    }
}
