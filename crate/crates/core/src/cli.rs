//! Command-line front end. Each subcommand is one stage and reads the files
//! the previous stage wrote; `pipeline` chains them all.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::accounting::{accepted_profile, blocks_markdown, operations_markdown, AccountError};
use crate::blocks::{build_dictionary, divide_blocks};
use crate::energy::CaseEnergy;
use crate::interp::cases::{logs_from_jsonl, logs_to_jsonl};
use crate::interp::ExecutionCase;
use crate::lang::{dump::program_to_json, load, parse_source, pretty_print, CheckedProgram, LangError};
use crate::model::{build_model, Dataset, EnergyModel};
use crate::optimize::{emit, evaluate, optimize, HotBlockPolicy, OptimizeError, Strategy};
use crate::pipeline::{
    case_energies, design_cases, equivalence_corpus, pool_calibration, run_cases, run_pipeline, simulate_traces, to_pretty_json,
    write_artifacts, PipelineConfig, PipelineError,
};
use crate::sim::{CostTable, NoiseModel, PowerTrace};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_REJECTED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "enerlyze", version, about = "Source-level energy accounting and refactoring")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Pipeline configuration JSON; missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every seeded stage.
    #[arg(long, global = true, env = "ENERLYZE_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and type-check a program; prints its AST as JSON.
    Parse {
        file: PathBuf,
        /// Print the canonical source instead of the AST.
        #[arg(long)]
        pretty: bool,
    },
    /// Block division and operation dictionary.
    Blocks {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate execution cases.
    Cases {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run cases and write execution logs (JSONL).
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate power traces for logged runs into a directory of CSV files.
    Simulate {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        logs: PathBuf,
        /// Ground-truth cost table JSON; seeded defaults if absent.
        #[arg(long)]
        costs: Option<PathBuf>,
        /// Relative noise; overrides the config.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate traces into per-case net energies.
    Energy {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit operation costs and validate them.
    Fit(FitArgs),
    /// Per-block energy profile of one logged case.
    Account {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Case to profile; the first logged case by default.
        #[arg(long)]
        case: Option<String>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile-guided refactoring.
    Optimize {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Cases for profiling and equivalence; generated if absent.
        #[arg(long)]
        cases: Option<PathBuf>,
        #[arg(long)]
        case: Option<String>,
        /// `top:K` or `share:F`.
        #[arg(long)]
        policy: Option<HotBlockPolicy>,
        /// Comma-separated strategy names.
        #[arg(long)]
        strategies: Option<String>,
        #[arg(long)]
        emit: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare two programs: equivalence and modeled energy.
    Evaluate {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        refactored: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cases: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Every stage end to end; artifacts go to `--out`.
    Pipeline {
        #[arg(long)]
        program: PathBuf,
        #[arg(long, default_value = "enerlyze-out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Program whose dictionary maps logs to operation counts.
    #[arg(long, requires_all = ["logs", "energies"], conflicts_with = "dataset")]
    program: Option<PathBuf>,
    #[arg(long)]
    logs: Option<PathBuf>,
    #[arg(long)]
    energies: Option<PathBuf>,
    /// A ready dataset (JSON) instead of program, logs and energies.
    #[arg(long, required_unless_present = "program")]
    dataset: Option<PathBuf>,
    /// Pool the bundled calibration workload into the dataset.
    #[arg(long)]
    calibrate: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Lang { path: PathBuf, source: LangError },
    #[error("{0}")]
    Usage(String),
    #[error("model rejected: best fold accuracy is below the threshold")]
    Rejected,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Rejected | CliError::Pipeline(PipelineError::Account(AccountError::Rejected)) => EXIT_REJECTED,
            _ => EXIT_ERROR,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Read { .. } | CliError::Write { .. } => "io",
            CliError::Format { .. } => "format",
            CliError::Lang { source, .. } => source.kind(),
            CliError::Usage(_) => "usage",
            CliError::Rejected | CliError::Pipeline(PipelineError::Account(AccountError::Rejected)) => "model-rejected",
            CliError::Pipeline(_) => "pipeline",
        };
        let mut v = json!({ "error": kind, "message": self.to_string() });
        if let CliError::Lang { path, source } = self {
            v["file"] = json!(path.display().to_string());
            if let Some(span) = source.span() {
                v["line"] = json!(span.line);
                v["column"] = json!(span.col);
            }
        }
        v
    }
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.to_json()).expect("error json"));
            ExitCode::from(e.exit_code())
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.into(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.into(), source })
}

/// Writes to `out`, or prints when no path is given.
fn output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Format { path: path.into(), message: e.to_string() })
}

fn program(path: &Path) -> Result<CheckedProgram, CliError> {
    load(&read(path)?).map_err(|source| CliError::Lang { path: path.into(), source })
}

fn model_file(path: &Path) -> Result<EnergyModel, CliError> {
    let v: serde_json::Value = json_file(path)?;
    EnergyModel::from_json(&v).map_err(|e| CliError::Format { path: path.into(), message: e.to_string() })
}

fn logs_file(path: &Path) -> Result<Vec<crate::interp::ExecutionLog>, CliError> {
    logs_from_jsonl(&read(path)?).map_err(|e| CliError::Format { path: path.into(), message: e.to_string() })
}

pub fn config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let cfg = match &cli.config {
        Some(p) => json_file(p)?,
        None => PipelineConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = config(cli)?;
    match &cli.command {
        Command::Parse { file, pretty } => {
            let text = read(file)?;
            let lang = |source| CliError::Lang { path: file.clone(), source };
            let p = parse_source(&text).map_err(lang)?;
            let cp = crate::lang::check(&p).map_err(lang)?;
            if *pretty {
                print!("{}", pretty_print(&cp));
            } else {
                print!("{}", to_pretty_json(&program_to_json(&cp)));
            }
        }
        Command::Blocks { program: path, csv, out } => {
            let cp = program(path)?;
            let map = divide_blocks(&cp);
            let dict = build_dictionary(&cp, &map);
            let text = if *csv { dict.to_csv() } else { to_pretty_json(&json!({ "blocks": map.to_json(), "dictionary": dict.to_json() })) };
            output(out.as_deref(), &text)?;
        }
        Command::Cases { program: path, n, out } => {
            let cp = program(path)?;
            let map = divide_blocks(&cp);
            let mut design = cfg.cases.clone();
            if let Some(n) = n {
                design.n_cases = *n;
            }
            let cases = design_cases(&cp, &map, &design)?;
            output(out.as_deref(), &to_pretty_json(&serde_json::to_value(&cases).expect("cases serialize")))?;
        }
        Command::Run { program: path, cases, out } => {
            let cp = program(path)?;
            let cases: Vec<ExecutionCase> = json_file(cases)?;
            let logs = run_cases(&cp, &cases, &cfg.interp)?;
            output(out.as_deref(), &logs_to_jsonl(&logs))?;
        }
        Command::Simulate { program: path, cases, logs, costs, sigma, out } => {
            let cp = program(path)?;
            let map = divide_blocks(&cp);
            let dict = build_dictionary(&cp, &map);
            let cases: Vec<ExecutionCase> = json_file(cases)?;
            let logs = logs_file(logs)?;
            if logs.len() != cases.len() || logs.iter().zip(&cases).any(|(l, c)| l.case_id != c.case_id) {
                return Err(CliError::Usage("logs and cases must list the same case ids in the same order".into()));
            }
            let table = match costs {
                Some(p) => {
                    let v: serde_json::Value = json_file(p)?;
                    CostTable::from_json(&v).map_err(|message| CliError::Format { path: p.clone(), message })?
                }
                None => {
                    let mut t = CostTable::seeded(&dict.op_universe);
                    t.idle_power_w = cfg.idle_power_w;
                    t
                }
            };
            let mut sim = cfg.sim.clone();
            if let Some(s) = sigma {
                sim.noise = if *s > 0.0 { NoiseModel::MultiplicativeGaussian { sigma_rel: *s } } else { NoiseModel::None };
            }
            let traces = simulate_traces(&logs, &cases, &dict, &table, &sim)?;
            for t in &traces {
                let dir = out.join(&t.case_id);
                for (r, run) in t.runs.iter().enumerate() {
                    write(&dir.join(format!("run_{r}.csv")), &run.to_csv())?;
                }
                for (r, idle) in t.idle.iter().enumerate() {
                    write(&dir.join(format!("idle_{r}.csv")), &idle.to_csv())?;
                }
            }
            write(&out.join("cost_table.json"), &to_pretty_json(&table.to_json()))?;
        }
        Command::Energy { traces, out } => {
            let energies = read_energies(traces)?;
            output(out.as_deref(), &to_pretty_json(&serde_json::to_value(&energies).expect("energies serialize")))?;
        }
        Command::Fit(a) => fit(a, &cfg)?,
        Command::Account { program: path, logs, model, case, top, out } => {
            let cp = program(path)?;
            let map = divide_blocks(&cp);
            let dict = build_dictionary(&cp, &map);
            let model = model_file(model)?;
            let logs = logs_file(logs)?;
            let log = match case {
                Some(id) => logs.iter().find(|l| &l.case_id == id),
                None => logs.iter().find(|l| !l.is_failed()),
            }
            .ok_or_else(|| CliError::Usage(format!("case `{}` not found in logs", case.as_deref().unwrap_or("<any>"))))?;
            let profile = accepted_profile(log, &dict, &model).map_err(PipelineError::from)?.folded(&map);
            println!("{}", operations_markdown(&model, *top));
            println!("{}", blocks_markdown(&profile, *top));
            if let Some(p) = out {
                write(p, &to_pretty_json(&profile.to_json()))?;
            }
        }
        Command::Optimize { program: path, model, cases, case, policy, strategies, emit: emit_path, report } => {
            let cp = program(path)?;
            let model = model_file(model)?;
            if !model.accepted {
                return Err(CliError::Rejected);
            }
            let mut cfg = cfg.clone();
            if let Some(p) = policy {
                cfg.optimize.policy = *p;
            }
            if let Some(s) = strategies {
                cfg.optimize.strategies = Strategy::parse_list(s).map_err(CliError::Usage)?;
            }
            let cases = cases_or_design(&cp, cases.as_deref(), &cfg)?;
            let profile_case = pick_case(&cases, case.as_deref())?;
            let corpus = equivalence_corpus(&cp, &cases, &cfg);
            let outcome = optimize(&cp, &model, &profile_case, &corpus, &cfg.optimize)?;
            print!("{}", outcome.report.to_markdown());
            if let Some(p) = emit_path {
                write(p, &emit(&outcome.program))?;
            }
            if let Some(p) = report {
                write(p, &to_pretty_json(&outcome.report.to_json()))?;
            }
        }
        Command::Evaluate { original, refactored, model, cases, report } => {
            let a = program(original)?;
            let b = program(refactored)?;
            let model = model_file(model)?;
            let cases = cases_or_design(&a, cases.as_deref(), &cfg)?;
            let corpus = equivalence_corpus(&a, &cases, &cfg);
            let unablated: Vec<ExecutionCase> = corpus.into_iter().filter(|c| c.ablated_blocks.is_empty()).collect();
            let ev = evaluate(&a, &b, &model, &unablated, &cfg.interp)?;
            let text = to_pretty_json(&serde_json::to_value(&ev).expect("evaluation serializes"));
            println!(
                "{} cases, equivalence {}, modeled energy {:.6} J -> {:.6} J ({:.2}% saved)",
                ev.cases,
                if ev.equivalence.pass { "PASS" } else { "FAIL" },
                ev.energy_before_j,
                ev.energy_after_j,
                ev.saving_pct
            );
            if let Some(p) = report {
                write(p, &text)?;
            }
        }
        Command::Pipeline { program: path, out } => {
            let cp = program(path)?;
            let result = run_pipeline(&cp, &cfg)?;
            write_artifacts(&result, out)?;
            print!("{}", result.outcome.report.to_markdown());
        }
    }
    Ok(())
}

fn fit(a: &FitArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut fit_cfg = cfg.fit.clone();
    if let Some(k) = a.k {
        fit_cfg.k = k;
    }
    if let Some(t) = a.threshold {
        fit_cfg.threshold = t;
    }
    let mut dataset = match (&a.dataset, &a.program, &a.logs, &a.energies) {
        (Some(d), ..) => json_file::<Dataset>(d)?,
        (None, Some(p), Some(l), Some(e)) => {
            let cp = program(p)?;
            let dict = build_dictionary(&cp, &divide_blocks(&cp));
            let logs = logs_file(l)?;
            let energies: Vec<CaseEnergy> = json_file(e)?;
            Dataset::from_runs(&dict, &logs, &energies).map_err(PipelineError::from)?
        }
        _ => return Err(CliError::Usage("fit needs --dataset, or --program with --logs and --energies".into())),
    };
    if a.calibrate {
        dataset = pool_calibration(dataset, cfg)?;
    }
    let model = build_model(&dataset, &fit_cfg).map_err(PipelineError::from)?;
    output(a.out.as_deref(), &to_pretty_json(&model.to_json()))?;
    for f in &model.folds {
        eprintln!(
            "fold {}: nmae_valid {:.4}, r_valid {:.4}, nmae_train {:.4}, r_train {:.4}",
            f.fold_index, f.nmae_valid, f.r_valid, f.nmae_train, f.r_train
        );
    }
    if model.accepted {
        Ok(())
    } else {
        Err(CliError::Rejected)
    }
}

fn cases_or_design(cp: &CheckedProgram, path: Option<&Path>, cfg: &PipelineConfig) -> Result<Vec<ExecutionCase>, CliError> {
    match path {
        Some(p) => json_file(p),
        None => Ok(design_cases(cp, &divide_blocks(cp), &cfg.cases)?),
    }
}

fn pick_case(cases: &[ExecutionCase], id: Option<&str>) -> Result<ExecutionCase, CliError> {
    match id {
        Some(id) => cases.iter().find(|c| c.case_id == id),
        None => cases.iter().find(|c| c.ablated_blocks.is_empty()),
    }
    .cloned()
    .ok_or_else(|| CliError::Pipeline(PipelineError::NoProfileCase(id.unwrap_or("<unablated>").into())))
}

/// Reads `<dir>/<case>/run_<r>.csv` and `idle_<r>.csv` for every case
/// directory, in name order.
pub fn read_energies(dir: &Path) -> Result<Vec<CaseEnergy>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CliError::Read { path: dir.into(), source })?;
    let mut case_dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    case_dirs.sort();
    let mut traces = Vec::new();
    for d in case_dirs {
        let mut runs: BTreeMap<u32, PowerTrace> = BTreeMap::new();
        let mut idle: BTreeMap<u32, PowerTrace> = BTreeMap::new();
        let files = std::fs::read_dir(&d).map_err(|source| CliError::Read { path: d.clone(), source })?;
        for f in files.filter_map(|e| e.ok().map(|e| e.path())) {
            let Some(stem) = f.file_stem().and_then(|s| s.to_str()) else { continue };
            let (slot, r) = if let Some(r) = stem.strip_prefix("run_") {
                (&mut runs, r)
            } else if let Some(r) = stem.strip_prefix("idle_") {
                (&mut idle, r)
            } else {
                continue;
            };
            let Ok(r) = r.parse::<u32>() else { continue };
            let t = PowerTrace::from_csv(&read(&f)?).map_err(|message| CliError::Format { path: f.clone(), message })?;
            slot.insert(r, t);
        }
        let case_id = d.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        traces.push(crate::pipeline::CaseTraces { case_id, runs: runs.into_values().collect(), idle: idle.into_values().collect() });
    }
    Ok(case_energies(&traces)?)
}
