//! The whole pipeline in memory: synthesize a protocol, fit every window,
//! train the embedding head, enroll gallery and probes, and evaluate.
//!
//!     cargo run --release --example end_to_end [eval-subjects] [seed]

use bodyid::aggregation::{Aggregation, ViewBinConfig};
use bodyid::body::ModelConfig;
use bodyid::dataset::{plan_dataset, synthesize, ProtocolConfig};
use bodyid::eval::{run_eval, DEFAULT_FAR_LEVELS, DEFAULT_RANKS};
use bodyid::pipeline::{run_pipeline, PipelineConfig};
use bodyid::synth::SynthConfig;

fn main() -> bodyid::Result<()> {
    let mut args = std::env::args().skip(1);
    let subjects: usize = args.next().map_or(20, |s| s.parse().expect("subject count"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let protocol = ProtocolConfig {
        train_subjects: 20,
        eval_subjects: subjects,
        frames: 5,
        ..ProtocolConfig::default()
    };
    let plan = plan_dataset(&ModelConfig::default(), &SynthConfig::default(), &protocol, seed)?;
    let data = synthesize(&plan)?;
    println!("{} sequences for {} subjects", data.sequences.len(), protocol.total_subjects());

    let cfg = PipelineConfig {
        aggregation: Aggregation::Mean,
        bins: ViewBinConfig::new(1)?,
        ..PipelineConfig::default()
    };
    let run = run_pipeline(&data, &cfg, seed)?;
    println!(
        "{} fitted windows, head loss {:.3} -> {:.3}, {} gallery subjects, {} probes",
        run.fits.len(),
        run.training.initial_loss(),
        run.training.final_loss(),
        run.enrollment.gallery.len(),
        run.enrollment.probes.len()
    );

    let report = run_eval(&run.enrollment.protocol()?, &DEFAULT_RANKS, &DEFAULT_FAR_LEVELS)?;
    for p in &report.cmc {
        println!("rank {:>2}: {:.3}", p.rank, p.accuracy);
    }
    for p in &report.tar_at_far {
        println!("TAR at FAR {}: {:.3}", p.far, p.tar);
    }
    Ok(())
}
