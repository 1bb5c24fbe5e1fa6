//! Random well-typed, terminating programs for property tests.

#![allow(dead_code)]

use enerlyze::interp::cases::fresh_cases;
use enerlyze::interp::{CaseDesign, ExecutionCase, Interpreter};
use enerlyze::lang::CheckedProgram;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HEADER: &str = "record R { int a; float b; Object nx; }
global int g0;
global float gf;
global Object go;
global int[] ga;

void init() {
    go = new R();
    ga = new int[8];
}

void h1(int p) {
    if (p > 3) {
        return;
    }
    emit_int(p);
}
";

struct Gen {
    rng: ChaCha8Rng,
    out: String,
    /// (name, assignable) per scope.
    ints: Vec<Vec<(String, bool)>>,
    floats: Vec<Vec<String>>,
    fresh: usize,
    loops: usize,
    in_switch: bool,
    in_helper: bool,
}

impl Gen {
    fn pick<'a>(&mut self, v: &'a [&'a str]) -> &'a str {
        v[self.rng.gen_range(0..v.len())]
    }

    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn int_vars(&self, assignable_only: bool) -> Vec<String> {
        let mut v: Vec<String> =
            self.ints.iter().flatten().filter(|(_, a)| *a || !assignable_only).map(|(n, _)| n.clone()).collect();
        v.push("g0".into());
        v
    }

    fn float_vars(&self) -> Vec<String> {
        let mut v: Vec<String> = self.floats.iter().flatten().cloned().collect();
        v.push("gf".into());
        v
    }

    fn iexpr(&mut self, d: u32) -> String {
        if d == 0 || self.rng.gen_bool(0.35) {
            return match self.rng.gen_range(0..5) {
                0 | 1 => self.rng.gen_range(0..10).to_string(),
                2 => "go.a".into(),
                _ => {
                    let v = self.int_vars(false);
                    v[self.rng.gen_range(0..v.len())].clone()
                }
            };
        }
        let a = self.iexpr(d - 1);
        let e = match self.rng.gen_range(0..13) {
            0 => format!("{a} + {}", self.iexpr(d - 1)),
            1 => format!("{a} - {}", self.iexpr(d - 1)),
            2 => format!("{a} * {}", self.iexpr(d - 1)),
            3 => format!("{a} / (({} & 3) + 1)", self.iexpr(d - 1)),
            4 => format!("-({a})"),
            5 => format!("({a}) << 1"),
            6 => format!("({a}) >> 1"),
            7 => format!("({a}) & ({})", self.iexpr(d - 1)),
            8 => format!("({a}) | ({})", self.iexpr(d - 1)),
            9 => format!("(int) ({})", self.fexpr(d - 1)),
            10 => format!("ga[({a}) & 7]"),
            11 if !self.in_helper => format!("h0({a}, {})", self.fexpr(d - 1)),
            _ => format!("({a}) + 1"),
        };
        format!("({e})")
    }

    fn fexpr(&mut self, d: u32) -> String {
        if d == 0 || self.rng.gen_bool(0.35) {
            return match self.rng.gen_range(0..5) {
                0 | 1 => {
                    let lits = ["0.5", "1.25", "2.0", "0.0", "3.75"];
                    self.pick(&lits).to_string()
                }
                2 => "go.b".into(),
                _ => {
                    let v = self.float_vars();
                    v[self.rng.gen_range(0..v.len())].clone()
                }
            };
        }
        let a = self.fexpr(d - 1);
        let e = match self.rng.gen_range(0..9) {
            0 => format!("{a} + {}", self.fexpr(d - 1)),
            1 => format!("{a} - {}", self.fexpr(d - 1)),
            2 => format!("{a} * {}", self.fexpr(d - 1)),
            3 => format!("({a}) / 2.0"),
            4 => format!("(float) ({})", self.iexpr(d - 1)),
            5 => format!("math_sin({a})"),
            6 => format!("math_min({a}, {})", self.fexpr(d - 1)),
            7 => format!("{a} + {}", self.iexpr(d - 1)),
            _ => format!("math_abs({a})"),
        };
        format!("({e})")
    }

    fn bexpr(&mut self, d: u32) -> String {
        let k = if d == 0 { self.rng.gen_range(0..4) } else { self.rng.gen_range(0..8) };
        match k {
            0 => format!("{} < {}", self.iexpr(1), self.iexpr(1)),
            1 => format!("{} == {}", self.iexpr(1), self.iexpr(1)),
            2 => format!("{} > {}", self.fexpr(1), self.fexpr(1)),
            3 => "go.nx == null".into(),
            4 => format!("!({})", self.bexpr(d - 1)),
            5 => format!("({}) && ({})", self.bexpr(d - 1), self.bexpr(d - 1)),
            6 => format!("({}) || ({})", self.bexpr(d - 1), self.bexpr(d - 1)),
            _ => format!("{} != {}", self.iexpr(1), self.iexpr(1)),
        }
    }

    fn line(&mut self, ind: usize, s: &str) {
        for _ in 0..ind {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn block(&mut self, ind: usize, depth: u32) {
        self.ints.push(vec![]);
        self.floats.push(vec![]);
        let n = self.rng.gen_range(1..=4);
        for _ in 0..n {
            self.stmt(ind, depth);
        }
        self.ints.pop();
        self.floats.pop();
    }

    fn stmt(&mut self, ind: usize, depth: u32) {
        let structured = depth > 0 && self.rng.gen_bool(0.4);
        if structured {
            match self.rng.gen_range(0..5) {
                0 | 1 => {
                    let c = self.bexpr(1);
                    self.line(ind, &format!("if ({c}) {{"));
                    self.block(ind + 1, depth - 1);
                    if self.rng.gen_bool(0.5) {
                        self.line(ind, "} else {");
                        self.block(ind + 1, depth - 1);
                    }
                    self.line(ind, "}");
                }
                2 => {
                    let i = self.name("i");
                    let bound = self.rng.gen_range(0..5);
                    self.line(ind, &format!("for (int {i} = 0; {i} < {bound}; {i}++) {{"));
                    self.ints.push(vec![(i, false)]);
                    self.floats.push(vec![]);
                    self.loops += 1;
                    self.block(ind + 1, depth - 1);
                    self.loops -= 1;
                    self.ints.pop();
                    self.floats.pop();
                    self.line(ind, "}");
                }
                3 => {
                    let w = self.name("w");
                    let bound = self.rng.gen_range(0..4);
                    self.line(ind, &format!("int {w} = 0;"));
                    self.ints.last_mut().expect("scope").push((w.clone(), false));
                    self.line(ind, &format!("while ({w} < {bound}) {{"));
                    self.loops += 1;
                    self.block(ind + 1, depth - 1);
                    self.loops -= 1;
                    self.line(ind + 1, &format!("{w}++;"));
                    self.line(ind, "}");
                }
                _ => {
                    let e = self.iexpr(1);
                    self.line(ind, &format!("switch (({e}) & 3) {{"));
                    let was = self.in_switch;
                    self.in_switch = true;
                    for label in 0..self.rng.gen_range(1..=3) {
                        self.line(ind + 1, &format!("case {label}:"));
                        self.block(ind + 2, depth - 1);
                    }
                    if self.rng.gen_bool(0.5) {
                        self.line(ind + 1, "default:");
                        self.block(ind + 2, depth - 1);
                    }
                    self.in_switch = was;
                    self.line(ind, "}");
                }
            }
            return;
        }
        match self.rng.gen_range(0..12) {
            0 => {
                let v = self.name("v");
                let e = self.iexpr(2);
                self.line(ind, &format!("int {v} = {e};"));
                self.ints.last_mut().expect("scope").push((v, true));
            }
            1 => {
                let v = self.name("f");
                let e = self.fexpr(2);
                self.line(ind, &format!("float {v} = {e};"));
                self.floats.last_mut().expect("scope").push(v);
            }
            2 | 3 => {
                let vs = self.int_vars(true);
                let v = vs[self.rng.gen_range(0..vs.len())].clone();
                let e = self.iexpr(2);
                self.line(ind, &format!("{v} = {e};"));
            }
            4 => {
                let vs = self.float_vars();
                let v = vs[self.rng.gen_range(0..vs.len())].clone();
                let e = self.fexpr(2);
                self.line(ind, &format!("{v} = {e};"));
            }
            5 => {
                let (i, e) = (self.iexpr(1), self.iexpr(2));
                self.line(ind, &format!("ga[({i}) & 7] = {e};"));
            }
            6 => {
                let e = self.iexpr(2);
                self.line(ind, &format!("go.a = {e};"));
            }
            7 => {
                let e = if self.rng.gen_bool(0.5) { "null" } else { "new R()" };
                self.line(ind, &format!("go.nx = {e};"));
            }
            8 => {
                let e = self.iexpr(2);
                self.line(ind, &format!("emit_int({e});"));
            }
            9 => {
                let e = self.fexpr(2);
                self.line(ind, &format!("emit_float({e});"));
            }
            10 if self.loops > 0 && !self.in_switch => {
                let c = self.bexpr(0);
                self.line(ind, &format!("if ({c}) {{"));
                self.line(ind + 1, "break;");
                self.line(ind, "}");
            }
            10 if !self.in_helper => {
                let e = self.iexpr(1);
                self.line(ind, &format!("h1({e});"));
            }
            _ => {
                let vs = self.int_vars(true);
                let v = vs[self.rng.gen_range(0..vs.len())].clone();
                let op = if self.rng.gen_bool(0.5) { "++" } else { "--" };
                self.line(ind, &format!("{v}{op};"));
            }
        }
    }
}

/// Source text of a random program with entry `frame(int x, float y)`.
pub fn random_program(seed: u64) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: HEADER.to_string(),
        ints: vec![vec![("p".into(), true)]],
        floats: vec![vec!["q".into()]],
        fresh: 0,
        loops: 0,
        in_switch: false,
        in_helper: true,
    };
    g.out.push_str("\nint h0(int p, float q) {\n");
    g.block(1, 2);
    let r = g.iexpr(2);
    g.line(1, &format!("return {r};"));
    g.out.push_str("}\n\nvoid frame(int x, float y) {\n");
    g.in_helper = false;
    g.ints = vec![vec![("x".into(), true)]];
    g.floats = vec![vec!["y".into()]];
    g.block(1, 3);
    g.out.push_str("}\n");
    g.out
}

/// A few input sequences for `cp`'s entry method, with nothing ablated.
pub fn some_cases(cp: &CheckedProgram, n: usize, seed: u64) -> Vec<ExecutionCase> {
    let params = Interpreter::new(cp).frame_params().expect("frame entry").to_vec();
    let design = CaseDesign { n_cases: n, seed, frame_budget: 6, ..CaseDesign::default() };
    fresh_cases(&params, &design, "p")
}
