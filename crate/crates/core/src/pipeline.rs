//! End-to-end chaining of the stages: cases, runs, simulated measurement,
//! fitting, accounting and optimization.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{accepted_profile, AccountError, EnergyProfile};
use crate::blocks::{build_dictionary, divide_blocks, BlockMap, OperationDictionary};
use crate::energy::{net_energy, CaseEnergy, EnergyError};
use crate::interp::cases::{fresh_cases, logs_to_jsonl};
use crate::interp::{generate_cases, CaseDesign, CaseError, ExecutionCase, ExecutionLog, InterpConfig, InterpError, Interpreter};
use crate::lang::{pretty_print, CheckedProgram};
use crate::model::{build_model, Dataset, EnergyModel, FitConfig, ModelError};
use crate::optimize::{optimize, OptimizeConfig, OptimizeError, Outcome};
use crate::sim::{simulate_idle, simulate_power, CostTable, NoiseModel, PowerTrace, SimConfig, SimError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Cases(#[from] CaseError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Account(#[from] AccountError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("program has no `frame` entry method")]
    NoEntry,
    #[error("profiling case `{0}` not found")]
    NoProfileCase(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub cases: CaseDesign,
    pub sim: SimConfig,
    pub idle_power_w: f64,
    pub fit: FitConfig,
    pub optimize: OptimizeConfig,
    pub interp: InterpConfig,
    /// Case used for profiling; the first case with nothing ablated if unset.
    pub profile_case: Option<String>,
    /// Pool the bundled calibration workload into training so that every
    /// operation cost is identifiable.
    pub calibrate: bool,
    pub calibration_cases: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            cases: CaseDesign::default(),
            sim: SimConfig { noise: NoiseModel::MultiplicativeGaussian { sigma_rel: 0.02 }, ..SimConfig::default() },
            idle_power_w: crate::sim::DEFAULT_IDLE_W,
            fit: FitConfig::default(),
            optimize: OptimizeConfig::default(),
            interp: InterpConfig::default(),
            profile_case: None,
            calibrate: true,
            calibration_cases: 800,
        }
    }
}

impl PipelineConfig {
    /// Sets the seed of every seeded stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.cases.seed = seed;
        self.sim.seed = seed;
        self.fit.seed = seed;
        self.fit.solver.seed = seed;
        self.optimize.seed = seed;
        self
    }
}

/// Replicate traces of one case and the matching idle traces.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseTraces {
    pub case_id: String,
    pub runs: Vec<PowerTrace>,
    pub idle: Vec<PowerTrace>,
}

pub fn design_cases(cp: &CheckedProgram, map: &BlockMap, design: &CaseDesign) -> Result<Vec<ExecutionCase>, PipelineError> {
    let interp = Interpreter::with_map(cp, map.clone());
    let params = interp.frame_params().ok_or(PipelineError::NoEntry)?.to_vec();
    Ok(generate_cases(map, &params, design)?)
}

pub fn run_cases(cp: &CheckedProgram, cases: &[ExecutionCase], icfg: &InterpConfig) -> Result<Vec<ExecutionLog>, PipelineError> {
    Ok(Interpreter::new(cp).with_config(icfg.clone()).run_all(cases)?)
}

/// Simulated power traces for every successful run.
pub fn simulate_traces(
    logs: &[ExecutionLog],
    cases: &[ExecutionCase],
    dict: &OperationDictionary,
    table: &CostTable,
    sim: &SimConfig,
) -> Result<Vec<CaseTraces>, PipelineError> {
    logs.par_iter()
        .zip(cases)
        .filter(|(l, _)| !l.is_failed())
        .map(|(log, case)| {
            let n = case.replicate_count.max(1);
            let runs = (0..n).map(|r| simulate_power(log, dict, table, sim, r)).collect::<Result<Vec<_>, _>>()?;
            let idle = (0..n).map(|r| simulate_idle(log.duration_s, table, sim, &log.case_id, r)).collect::<Result<Vec<_>, _>>()?;
            Ok(CaseTraces { case_id: log.case_id.clone(), runs, idle })
        })
        .collect()
}

pub fn case_energies(traces: &[CaseTraces]) -> Result<Vec<CaseEnergy>, PipelineError> {
    traces.par_iter().map(|t| Ok(net_energy(&t.case_id, &t.runs, &t.idle, false)?)).collect()
}

/// Everything produced up to and including the fitted model.
#[derive(Clone, Debug)]
pub struct Training {
    pub map: BlockMap,
    pub dict: OperationDictionary,
    pub table: CostTable,
    pub cases: Vec<ExecutionCase>,
    pub logs: Vec<ExecutionLog>,
    pub energies: Vec<CaseEnergy>,
    pub dataset: Dataset,
    pub model: EnergyModel,
}

pub fn train(cp: &CheckedProgram, cfg: &PipelineConfig) -> Result<Training, PipelineError> {
    let g = gather(cp, cfg)?;
    let dataset = if cfg.calibrate && !is_calibration(cp) { pool_calibration(g.dataset, cfg)? } else { g.dataset };
    let model = build_model(&dataset, &cfg.fit)?;
    Ok(Training { map: g.map, dict: g.dict, table: g.table, cases: g.cases, logs: g.logs, energies: g.energies, dataset, model })
}

fn is_calibration(cp: &CheckedProgram) -> bool {
    pretty_print(cp) == pretty_print(&crate::bench::Benchmark::Calibrate.program())
}

/// Rows of the bundled calibration workload, simulated under `cfg`.
pub fn calibration_dataset(cfg: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let cal_cfg = PipelineConfig { cases: CaseDesign { n_cases: cfg.calibration_cases, ..cfg.cases.clone() }, ..cfg.clone() };
    Ok(gather(&crate::bench::Benchmark::Calibrate.program(), &cal_cfg)?.dataset)
}

/// Appends calibration rows to `ds`; their case ids get a `calibrate/` prefix.
pub fn pool_calibration(ds: Dataset, cfg: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let cal = calibration_dataset(cfg)?;
    Ok(Dataset::pooled(&[("", &ds), ("calibrate", &cal)])?)
}

struct Gathered {
    map: BlockMap,
    dict: OperationDictionary,
    table: CostTable,
    cases: Vec<ExecutionCase>,
    logs: Vec<ExecutionLog>,
    energies: Vec<CaseEnergy>,
    dataset: Dataset,
}

/// Everything up to the fit.
fn gather(cp: &CheckedProgram, cfg: &PipelineConfig) -> Result<Gathered, PipelineError> {
    let map = divide_blocks(cp);
    let dict = build_dictionary(cp, &map);
    let mut table = CostTable::seeded(&dict.op_universe);
    table.idle_power_w = cfg.idle_power_w;
    let cases = design_cases(cp, &map, &cfg.cases)?;
    let logs = run_cases(cp, &cases, &cfg.interp)?;
    let traces = simulate_traces(&logs, &cases, &dict, &table, &cfg.sim)?;
    let energies = case_energies(&traces)?;
    let dataset = Dataset::from_runs(&dict, &logs, &energies)?;
    Ok(Gathered { map, dict, table, cases, logs, energies, dataset })
}

/// The profiling case and its loop-level profile under an accepted model.
pub fn profile(cp: &CheckedProgram, t: &Training, case_id: Option<&str>, icfg: &InterpConfig) -> Result<(ExecutionCase, EnergyProfile), PipelineError> {
    let case = match case_id {
        Some(id) => t.cases.iter().find(|c| c.case_id == id).ok_or_else(|| PipelineError::NoProfileCase(id.into()))?,
        None => t.cases.iter().find(|c| c.ablated_blocks.is_empty()).ok_or_else(|| PipelineError::NoProfileCase("<unablated>".into()))?,
    };
    let log = Interpreter::with_map(cp, t.map.clone()).with_config(icfg.clone()).run(case)?;
    let p = accepted_profile(&log, &t.dict, &t.model)?.folded(&t.map);
    Ok((case.clone(), p))
}

/// Training cases plus fresh unablated ones, for differential checks.
pub fn equivalence_corpus(cp: &CheckedProgram, training: &[ExecutionCase], cfg: &PipelineConfig) -> Vec<ExecutionCase> {
    let params = Interpreter::new(cp).frame_params().map(<[_]>::to_vec).unwrap_or_default();
    let design = CaseDesign { n_cases: cfg.optimize.equivalence_cases, seed: cfg.seed.wrapping_add(1), replicate_count: 1, ..cfg.cases.clone() };
    let mut all = training.to_vec();
    all.extend(fresh_cases(&params, &design, "eq"));
    all
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub training: Training,
    pub profile_case: ExecutionCase,
    pub profile: EnergyProfile,
    pub outcome: Outcome,
}

pub fn run_pipeline(cp: &CheckedProgram, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let training = train(cp, cfg)?;
    let (profile_case, profile) = profile(cp, &training, cfg.profile_case.as_deref(), &cfg.interp)?;
    let corpus = equivalence_corpus(cp, &training.cases, cfg);
    let outcome = optimize(cp, &training.model, &profile_case, &corpus, &cfg.optimize)?;
    Ok(PipelineOutput { training, profile_case, profile, outcome })
}

pub fn to_pretty_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Writes every pipeline artifact into `dir`.
pub fn write_artifacts(out: &PipelineOutput, dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    let t = &out.training;
    let put = |name: &str, text: String| std::fs::write(dir.join(name), text);
    put("blocks.json", to_pretty_json(&t.map.to_json()))?;
    put("dictionary.json", to_pretty_json(&t.dict.to_json()))?;
    put("cases.json", to_pretty_json(&serde_json::to_value(&t.cases).expect("cases serialize")))?;
    put("logs.jsonl", logs_to_jsonl(&t.logs))?;
    put("cost_table.json", to_pretty_json(&t.table.to_json()))?;
    put("energies.json", to_pretty_json(&serde_json::to_value(&t.energies).expect("energies serialize")))?;
    put("model.json", to_pretty_json(&t.model.to_json()))?;
    put("profile.json", to_pretty_json(&out.profile.to_json()))?;
    put("report.json", to_pretty_json(&out.outcome.report.to_json()))?;
    put("report.md", out.outcome.report.to_markdown())?;
    put("optimized.esrc", crate::optimize::emit(&out.outcome.program))?;
    Ok(())
}
