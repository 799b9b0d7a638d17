//! Fit the training subjects of a small synthetic protocol, train the
//! arc-margin embedding head on their shapes, and save it.
//!
//!     cargo run --release --example train_embedding [out-dir]

use std::path::PathBuf;

use bodyid::body::ModelConfig;
use bodyid::dataset::{plan_dataset, synthesize, ProtocolConfig, Role};
use bodyid::embedding::{EmbeddingHead, TrainConfig};
use bodyid::fitter::FitConfig;
use bodyid::pipeline::{fit_dataset, train_embedding, training_samples};
use bodyid::synth::SynthConfig;

fn main() -> bodyid::Result<()> {
    let out = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let protocol = ProtocolConfig {
        train_subjects: 8,
        eval_subjects: 2,
        frames: 10,
        ..ProtocolConfig::default()
    };
    let data = synthesize(&plan_dataset(&ModelConfig::default(), &SynthConfig::default(), &protocol, 5)?)?;
    let fit = FitConfig {
        max_iters: 150,
        ..FitConfig::default()
    };
    let fits = fit_dataset(&data, &[Role::Train], &fit, 5, false)?;
    println!("{} training windows from {} subjects", fits.len(), protocol.train_subjects);

    let (head, report) = train_embedding(&fits, &TrainConfig::default())?;
    println!(
        "arc-margin loss {:.3} -> {:.3} over {} epochs",
        report.initial_loss(),
        report.final_loss(),
        head.config().epochs
    );
    let (_, samples) = training_samples(&fits, Role::Train);
    let correct = samples
        .iter()
        .filter(|s| head.classify(&s.input).is_ok_and(|c| c == s.label))
        .count();
    println!("training accuracy {correct}/{}", samples.len());

    let path = out.join("head.json");
    head.save(&path)?;
    let back = EmbeddingHead::load(&path)?;
    let x = &samples[0].input;
    assert_eq!(back.embed(x)?, head.embed(x)?);
    println!("{}-dim head written to {}", head.embed_dim(), path.display());
    Ok(())
}
