//! Train a model for Click&Move, then let the optimizer find hot blocks,
//! choose strategies and apply them one equivalence-checked step at a time.

use enerlyze::bench::Benchmark;
use enerlyze::optimize::{emit, optimize};
use enerlyze::pipeline::{equivalence_corpus, profile, train, PipelineConfig};

fn main() {
    let cfg = PipelineConfig::default();
    let cp = Benchmark::ClickMove.program();
    let t = train(&cp, &cfg).expect("training");
    let (case, _) = profile(&cp, &t, None, &cfg.interp).expect("profile");
    let corpus = equivalence_corpus(&cp, &t.cases, &cfg);
    let outcome = optimize(&cp, &t.model, &case, &corpus, &cfg.optimize).expect("optimize");

    println!("{}", outcome.report.to_markdown());
    let visit = emit(&outcome.program);
    let start = visit.find("void visit(").unwrap_or(0);
    let end = visit[start..].find("\n}\n").map_or(visit.len(), |e| start + e + 3);
    println!("refactored visit():\n{}", &visit[start..end]);
}
