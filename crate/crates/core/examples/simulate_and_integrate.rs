//! Simulate noisy power traces for one run, integrate them, subtract idle
//! energy and compare the spread with the prediction for the noise level.

use enerlyze::bench::Benchmark;
use enerlyze::blocks::{build_dictionary, divide_blocks};
use enerlyze::energy::{integrate, net_energy};
use enerlyze::interp::{ExecutionCase, Interpreter};
use enerlyze::sim::{modeled_energy_j, predicted_cv, simulate_idle, simulate_power, CostTable, NoiseModel, SimConfig};

fn main() {
    let cp = Benchmark::Orbit.program();
    let map = divide_blocks(&cp);
    let dict = build_dictionary(&cp, &map);
    let table = CostTable::seeded(&dict.op_universe);
    let log = Interpreter::new(&cp).run(&ExecutionCase::plain("demo", 20)).expect("run");
    let truth = modeled_energy_j(&log, &dict, &table).expect("priced");

    let cfg = SimConfig { sample_rate_hz: 1000.0, noise: NoiseModel::MultiplicativeGaussian { sigma_rel: 0.02 }, seed: 7 };
    let runs: Vec<_> = (0..10).map(|r| simulate_power(&log, &dict, &table, &cfg, r).expect("trace")).collect();
    let idle: Vec<_> = (0..10).map(|r| simulate_idle(log.duration_s, &table, &cfg, "demo", r).expect("idle")).collect();
    let e = net_energy("demo", &runs, &idle, false).expect("energy");

    println!("run length        {:.4} s, {} samples", log.duration_s, runs[0].samples.len());
    println!("first replicate   {:.6} J gross", integrate(&runs[0]).expect("integral"));
    println!("net energy        {:.6} J (modeled {:.6} J)", e.net_j, truth);
    println!("C_v               {:.4} (predicted {:.4})", e.cv, predicted_cv(&runs[0], 0.02));
}
