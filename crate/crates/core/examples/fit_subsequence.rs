//! Fit shape, pose and camera to a synthetic subsequence and compare the
//! recovered shape with the ground truth.
//!
//!     cargo run --release --example fit_subsequence [frames]

use bodyid::body::{BodyModel, ModelConfig};
use bodyid::fitter::{fit_subsequence, FitConfig};
use bodyid::synth::{generate_population, generate_sequence, SequenceSpec, SynthConfig};

fn main() -> bodyid::Result<()> {
    let frames: usize = std::env::args().nth(1).map_or(5, |s| s.parse().expect("frame count"));
    let model = BodyModel::synthesize(7, &ModelConfig::default())?;
    let synth = SynthConfig::default();
    let population = generate_population(&model, 2, &synth, 1)?;
    let subject = &population.subjects[0];
    let spec = SequenceSpec::controlled(&subject.id, 0, frames, 3);
    let sequence = generate_sequence(&model, &population, &spec, &synth)?;
    let observations: Vec<_> = sequence.iter().map(|f| f.observation.clone()).collect();

    let cfg = FitConfig::default();
    let fit = fit_subsequence(&model, &observations, &cfg, 0)?;
    println!(
        "{} iterations (converged: {}), total loss {:.4}: chamfer {:.4}, keypoint {:.4}, consistency {:.4}",
        fit.iterations, fit.converged, fit.losses.total, fit.losses.chamfer, fit.losses.keypoint, fit.losses.consistency
    );
    for r in fit.history.iter().step_by(50) {
        println!("  iter {:>3}: {:.4}", r.iter, r.losses.total);
    }

    let truth = &sequence[0].truth.beta.0;
    println!("component  truth  fitted");
    for (k, (t, b)) in truth.iter().zip(&fit.feature).enumerate() {
        println!("{k:>9}  {t:>5.2}  {b:>6.2}");
    }
    let yaw_err: Vec<String> = fit
        .frames
        .iter()
        .zip(&sequence)
        .map(|(f, s)| format!("{:.2}", (f.view.yaw - s.truth.view.yaw).abs()))
        .collect();
    println!("per-frame yaw error (rad): {}", yaw_err.join(" "));
    Ok(())
}
