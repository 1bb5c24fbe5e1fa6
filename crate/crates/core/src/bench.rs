//! Bundled benchmark programs.

use std::fmt;
use std::str::FromStr;

use crate::lang::{load, CheckedProgram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    /// Scene-graph traversal: one sprite moves, the tree is visited and drawn.
    ClickMove,
    /// A buffer copy loop that dominates every frame.
    Orbit,
    /// Nested grid loop through small accessor methods, plus the copy loop.
    Waves,
    /// Calibration workload with a varied operation mix.
    Calibrate,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [Benchmark::ClickMove, Benchmark::Orbit, Benchmark::Waves, Benchmark::Calibrate];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::ClickMove => "click_move",
            Benchmark::Orbit => "orbit",
            Benchmark::Waves => "waves",
            Benchmark::Calibrate => "calibrate",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            Benchmark::ClickMove => include_str!("../benchmarks/click_move.esrc"),
            Benchmark::Orbit => include_str!("../benchmarks/orbit.esrc"),
            Benchmark::Waves => include_str!("../benchmarks/waves.esrc"),
            Benchmark::Calibrate => include_str!("../benchmarks/calibrate.esrc"),
        }
    }

    pub fn program(self) -> CheckedProgram {
        load(self.source()).expect("bundled benchmarks are valid")
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Benchmark::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| format!("unknown benchmark `{s}` (click_move, orbit, waves, calibrate)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{ExecutionCase, Interpreter};

    #[test]
    fn benchmarks_load_and_run() {
        for b in Benchmark::ALL {
            let p = b.program();
            let log = Interpreter::new(&p).run(&ExecutionCase::plain("b", 3)).unwrap();
            assert!(log.failed.is_none(), "{b}: {:?}", log.failed);
        }
    }
}
