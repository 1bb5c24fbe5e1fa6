//! Fit per-operation costs from simulated measurements of the calibration
//! workload and compare them with the costs the simulator used.

use enerlyze::bench::Benchmark;
use enerlyze::pipeline::{train, PipelineConfig};
use enerlyze::sim::NoiseModel;

fn main() {
    let mut cfg = PipelineConfig::default();
    cfg.sim.noise = NoiseModel::None;
    let t = train(&Benchmark::Calibrate.program(), &cfg).expect("training");

    for f in &t.model.folds {
        println!("fold {}: NMAE valid {:.2e}, r valid {:.6}", f.fold_index, f.nmae_valid, f.r_valid);
    }
    println!("accepted: {}\n", t.model.accepted);
    let mut worst: f64 = 0.0;
    for (op, fitted) in &t.model.cost_uj {
        if let Some(truth) = t.table.cost(*op) {
            worst = worst.max((fitted - truth).abs() / truth);
        }
    }
    println!("{} operations, worst relative cost error {:.2e}", t.model.cost_uj.len(), worst);
    println!("groups of indistinguishable columns: {:?}", t.model.analysis.groups);
}
