//! Run every stage on a bundled benchmark (Orbit by default) and write all
//! artifacts to a directory.
//!
//! cargo run --release --example full_pipeline -- waves /tmp/waves-out

use enerlyze::bench::Benchmark;
use enerlyze::pipeline::{run_pipeline, write_artifacts, PipelineConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let bench: Benchmark = args.next().map_or(Ok(Benchmark::Orbit), |a| a.parse()).expect("benchmark name");
    let out = args.next().unwrap_or_else(|| format!("target/pipeline-{bench}"));

    let result = run_pipeline(&bench.program(), &PipelineConfig::default()).expect("pipeline");
    write_artifacts(&result, std::path::Path::new(&out)).expect("artifacts");
    let m = &result.training.model;
    println!("model accepted: {} (fold {} of {})", m.accepted, m.selected_fold, m.folds.len());
    println!("{}", result.outcome.report.to_markdown());
    println!("artifacts in {out}");
}
