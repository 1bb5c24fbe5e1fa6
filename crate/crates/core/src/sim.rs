//! Synthetic power bench: turns an execution log into a sampled power trace
//! using a ground-truth cost table, an idle baseline and optional noise.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocks::ops::{ArithOp, CmpOp, GotoKind};
use crate::blocks::{total_op_counts, OpCountVector, OpKind, OperationDictionary};
use crate::interp::ExecutionLog;
use crate::lang::{LibFn, Ty};

/// Ground-truth energy per operation execution, in microjoules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub cost_uj: BTreeMap<OpKind, f64>,
    pub idle_power_w: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("log `{0}` has zero duration")]
    ZeroDuration(String),
    #[error("log `{0}` is from a failed run")]
    FailedRun(String),
    #[error("no cost for operation(s): {}", .0.join(", "))]
    Unpriced(Vec<String>),
    #[error("duration must be positive")]
    NonPositiveDuration,
    #[error(transparent)]
    Count(#[from] crate::blocks::CountError),
}

/// Cost of an operation under the seeded default table.
pub fn default_cost(op: OpKind) -> f64 {
    use OpKind::*;
    match op {
        MethodInvocation => 14.0,
        BlockGoto(GotoKind::If) => 6.7,
        BlockGoto(GotoKind::For) => 4.1,
        BlockGoto(GotoKind::While) => 1.1,
        BlockGoto(GotoKind::Switch) => 2.4,
        Declaration(Ty::Object) => 2.97,
        Declaration(Ty::Int) => 1.2,
        Declaration(Ty::Float) => 1.45,
        Declaration(Ty::Bool) => 0.95,
        Declaration(_) => 3.1,
        NewObject => 9.5,
        NewArray(_) => 8.8,
        FieldReference => 1.0,
        ArrayReference => 1.8,
        Parameter(Ty::Object) => 1.15,
        Parameter(_) => 0.85,
        Return(Ty::Void) => 0.6,
        Return(_) => 1.05,
        Assign(Ty::Int, Ty::Int) => 5.207,
        Assign(Ty::Float, Ty::Float) => 3.1,
        Assign(Ty::Float, Ty::Int) => 3.6,
        Assign(l, _) if l.is_reference() => 2.35,
        Assign(..) => 2.6,
        Compare(CmpOp::Less, Ty::Int, Ty::Int) => 6.39,
        Compare(CmpOp::Equal, Ty::Object, Ty::Null) => 2.2,
        Compare(CmpOp::Equal, _, _) => 1.9,
        Compare(_, Ty::Int, Ty::Int) => 2.8,
        Compare(..) => 3.3,
        Arith(ArithOp::Addition, Ty::Int, Ty::Int) => 1.455,
        Arith(ArithOp::Subtraction, Ty::Int, Ty::Int) => 1.5,
        Arith(ArithOp::Multi, Ty::Int, Ty::Int) => 2.4,
        Arith(ArithOp::Division, Ty::Int, Ty::Int) => 5.1,
        Arith(ArithOp::Addition | ArithOp::Subtraction, _, _) => 2.05,
        Arith(ArithOp::Multi, _, _) => 3.3,
        Arith(ArithOp::Division, _, _) => 6.2,
        Negate(_) => 0.7,
        Increment | Decrement => 1.25,
        And | Or => 0.55,
        Not => 0.4,
        Bit(_) => 0.65,
        Conversion(..) => 1.35,
        Break => 0.5,
        Switch => 2.1,
        Library(f) => match f {
            LibFn::BufferLimit => 0.3,
            LibFn::BufferGet => 0.55,
            LibFn::BufferPut => 0.73,
            LibFn::BufferBulkPut => 13.5,
            LibFn::BufferSet => 0.8,
            LibFn::BufferPosition => 0.3,
            LibFn::BufferRewind => 0.45,
            LibFn::BufferNew => 11.0,
            LibFn::ListNew => 7.5,
            LibFn::ListAdd => 2.6,
            LibFn::ListGet => 1.6,
            LibFn::ListSize => 0.9,
            LibFn::MathSqrt => 4.2,
            LibFn::MathSin | LibFn::MathCos => 7.1,
            LibFn::MathAbs => 0.6,
            LibFn::MathMin | LibFn::MathMax => 0.8,
            LibFn::EmitInt | LibFn::EmitFloat => 3.0,
        },
    }
}

pub const DEFAULT_IDLE_W: f64 = 0.5;

impl CostTable {
    /// The seeded default table restricted to `universe`.
    pub fn seeded(universe: &[OpKind]) -> Self {
        CostTable { cost_uj: universe.iter().map(|o| (*o, default_cost(*o))).collect(), idle_power_w: DEFAULT_IDLE_W }
    }

    pub fn cost(&self, op: OpKind) -> Option<f64> {
        self.cost_uj.get(&op).copied()
    }

    /// Modeled application energy in joules.
    pub fn energy_j(&self, counts: &OpCountVector) -> Result<f64, SimError> {
        let mut missing = Vec::new();
        let mut uj = 0.0;
        for (op, n) in counts.universe.iter().zip(&counts.counts) {
            if *n == 0 {
                continue;
            }
            match self.cost(*op) {
                Some(c) => uj += c * *n as f64,
                None => missing.push(op.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(SimError::Unpriced(missing));
        }
        Ok(uj * 1e-6)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "idle_power_W": self.idle_power_w,
            "cost_uJ": self.cost_uj.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        let idle_power_w = v["idle_power_W"].as_f64().ok_or("missing idle_power_W")?;
        let raw: BTreeMap<String, f64> = serde_json::from_value(v["cost_uJ"].clone()).map_err(|e| e.to_string())?;
        let mut cost_uj = BTreeMap::new();
        for (k, c) in raw {
            if c < 0.0 {
                return Err(format!("negative cost for {k}"));
            }
            cost_uj.insert(k.parse()?, c);
        }
        Ok(CostTable { cost_uj, idle_power_w })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    None,
    MultiplicativeGaussian { sigma_rel: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub sample_rate_hz: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { sample_rate_hz: 30.0, noise: NoiseModel::None, seed: 42 }
    }
}

impl SimConfig {
    pub fn sigma(&self) -> f64 {
        match self.noise {
            NoiseModel::None => 0.0,
            NoiseModel::MultiplicativeGaussian { sigma_rel } => sigma_rel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    /// (t seconds, power watts), strictly increasing in t.
    pub samples: Vec<(f64, f64)>,
}

impl PowerTrace {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.0 - a.0,
            _ => 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t_s", "power_w"]).expect("in-memory write");
        for (t, p) in &self.samples {
            w.write_record([format!("{t:?}"), format!("{p:?}")]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| e.to_string())?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_s", "power_w"] {
            return Err("trace header must be `t_s,power_w`".into());
        }
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let t: f64 = rec[0].parse().map_err(|_| format!("bad time `{}`", &rec[0]))?;
            let p: f64 = rec[1].parse().map_err(|_| format!("bad power `{}`", &rec[1]))?;
            samples.push((t, p));
        }
        Ok(PowerTrace { samples })
    }
}

/// Deterministic per-stream seed.
pub fn stream_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Sample times 0, 1/rate, 2/rate, ... and finally `duration` itself.
fn sample_times(duration: f64, rate: f64) -> Vec<f64> {
    let mut ts = Vec::new();
    let mut i = 0u64;
    loop {
        let t = i as f64 / rate;
        if t >= duration {
            break;
        }
        ts.push(t);
        i += 1;
    }
    ts.push(duration);
    ts
}

fn constant_trace(level_w: f64, duration: f64, cfg: &SimConfig, stream: u64) -> PowerTrace {
    let ts = sample_times(duration, cfg.sample_rate_hz);
    let sigma = cfg.sigma();
    let samples = if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let normal = Normal::new(1.0, sigma).expect("finite sigma");
        ts.into_iter().map(|t| (t, (level_w * normal.sample(&mut rng)).max(0.0))).collect()
    } else {
        ts.into_iter().map(|t| (t, level_w)).collect()
    };
    PowerTrace { samples }
}

/// Modeled application energy of a log, in joules.
pub fn modeled_energy_j(log: &ExecutionLog, dict: &OperationDictionary, table: &CostTable) -> Result<f64, SimError> {
    table.energy_j(&total_op_counts(&log.block_counts, dict)?)
}

/// Power trace of one replicate of a case run. The trace is constant over
/// the run, so its integral is exactly idle energy plus modeled energy.
pub fn simulate_power(
    log: &ExecutionLog,
    dict: &OperationDictionary,
    table: &CostTable,
    cfg: &SimConfig,
    replicate: u32,
) -> Result<PowerTrace, SimError> {
    if log.is_failed() {
        return Err(SimError::FailedRun(log.case_id.clone()));
    }
    if log.duration_s <= 0.0 {
        return Err(SimError::ZeroDuration(log.case_id.clone()));
    }
    let app = modeled_energy_j(log, dict, table)?;
    let level = table.idle_power_w + app / log.duration_s;
    let stream = stream_seed(cfg.seed, &["case", &log.case_id, &replicate.to_string()]);
    Ok(constant_trace(level, log.duration_s, cfg, stream))
}

/// Idle-only trace of the given length.
pub fn simulate_idle(duration_s: f64, table: &CostTable, cfg: &SimConfig, stream_id: &str, replicate: u32) -> Result<PowerTrace, SimError> {
    if duration_s <= 0.0 || !duration_s.is_finite() {
        return Err(SimError::NonPositiveDuration);
    }
    let stream = stream_seed(cfg.seed, &["idle", stream_id, &replicate.to_string()]);
    Ok(constant_trace(table.idle_power_w, duration_s, cfg, stream))
}

/// Coefficient of variation that multiplicative noise induces in the
/// integral of a trace with the given sample times.
pub fn predicted_cv(trace: &PowerTrace, sigma_rel: f64) -> f64 {
    let deltas: Vec<f64> = trace.samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let l1: f64 = deltas.iter().sum();
    let l2: f64 = deltas.iter().map(|d| d * d).sum::<f64>().sqrt();
    sigma_rel * l2 / l1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::integrate;

    fn log_with(duration: f64) -> ExecutionLog {
        ExecutionLog {
            case_id: "x".into(),
            block_counts: BTreeMap::from([("f()".to_string(), 1000)]),
            output_digest: String::new(),
            step_count: 0,
            duration_s: duration,
            failed: None,
        }
    }

    fn goto_dict() -> OperationDictionary {
        let op = OpKind::BlockGoto(GotoKind::For);
        OperationDictionary { op_universe: vec![op], counts: BTreeMap::from([("f()".to_string(), BTreeMap::from([(op, 1)]))]) }
    }

    #[test]
    fn seeded_values_and_invocation_is_the_maximum() {
        assert_eq!(default_cost(OpKind::BlockGoto(GotoKind::If)), 6.7);
        assert_eq!(default_cost(OpKind::BlockGoto(GotoKind::For)), 4.1);
        assert_eq!(default_cost(OpKind::BlockGoto(GotoKind::While)), 1.1);
        assert_eq!(default_cost(OpKind::Declaration(Ty::Object)), 2.97);
        let mi = default_cost(OpKind::MethodInvocation);
        for f in LibFn::ALL {
            assert!(default_cost(OpKind::Library(f)) < mi);
        }
    }

    #[test]
    fn goto_energy_plus_idle() {
        let d = goto_dict();
        let table = CostTable { cost_uj: BTreeMap::from([(OpKind::BlockGoto(GotoKind::For), 4.1)]), idle_power_w: 0.5 };
        let trace = simulate_power(&log_with(1.0), &d, &table, &SimConfig::default(), 0).unwrap();
        let e = integrate(&trace).unwrap();
        let want = 0.5 + 1000.0 * 4.1e-6;
        assert!((e - want).abs() <= 1e-9 * want, "{e} vs {want}");
    }

    #[test]
    fn idle_only() {
        let table = CostTable { cost_uj: BTreeMap::new(), idle_power_w: 0.5 };
        let cfg = SimConfig::default();
        let e = integrate(&simulate_idle(2.0, &table, &cfg, "i", 0).unwrap()).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        let e = integrate(&simulate_idle(10.0, &table, &cfg, "i", 0).unwrap()).unwrap();
        assert!((e - 5.0).abs() < 1e-12);
        assert!(simulate_idle(0.0, &table, &cfg, "i", 0).is_err());
    }

    #[test]
    fn noisy_idle_mean_is_close() {
        let table = CostTable { cost_uj: BTreeMap::new(), idle_power_w: 0.5 };
        let cfg = SimConfig { noise: NoiseModel::MultiplicativeGaussian { sigma_rel: 0.02 }, ..SimConfig::default() };
        let t = simulate_idle(60.0, &table, &cfg, "i", 0).unwrap();
        assert!(t.samples.len() >= 1000);
        let mean = t.samples.iter().map(|s| s.1).sum::<f64>() / t.samples.len() as f64;
        assert!((mean - 0.5).abs() < 0.005);
    }

    #[test]
    fn zero_duration_is_rejected() {
        let table = CostTable::seeded(&[]);
        assert!(matches!(simulate_power(&log_with(0.0), &goto_dict(), &table, &SimConfig::default(), 0), Err(SimError::ZeroDuration(_))));
    }

    #[test]
    fn csv_round_trip() {
        let t = PowerTrace { samples: vec![(0.0, 1.5), (0.1, 2.25)] };
        assert_eq!(PowerTrace::from_csv(&t.to_csv()).unwrap(), t);
    }
}
