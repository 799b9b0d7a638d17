//! Score a hand-made gallery/probe protocol with a confuser and report CMC,
//! ROC and TAR at fixed FAR.
//!
//!     cargo run --release --example evaluate_protocol [out-dir]

use std::path::PathBuf;

use bodyid::aggregation::{FeatureBin, FeatureSet, ViewBinConfig};
use bodyid::eval::{run_eval, score_matrix, Probe, Protocol, DEFAULT_FAR_LEVELS};

fn set(angle: f64) -> bodyid::Result<FeatureSet> {
    let bin = FeatureBin {
        occupancy: 1,
        feature: Some(vec![angle.cos(), angle.sin()]),
    };
    FeatureSet::new(ViewBinConfig::default(), vec![bin])
}

fn main() -> bodyid::Result<()> {
    let out = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let gallery = (0..5)
        .map(|i| Ok((format!("g{i}"), set(i as f64 * 0.4)?)))
        .collect::<bodyid::Result<Vec<_>>>()?;
    // Probes sit near their subject; p3 is closer to g4 and "x" is not enrolled.
    let probes = [("p0", "g0", 0.05), ("p1", "g1", 0.45), ("p2", "g2", 0.7), ("p3", "g3", 1.45), ("p4", "x", 1.0)]
        .into_iter()
        .map(|(id, subject, angle)| {
            Ok(Probe {
                id: id.into(),
                subject: subject.into(),
                set: set(angle)?,
            })
        })
        .collect::<bodyid::Result<Vec<_>>>()?;
    let protocol = Protocol::new(gallery, probes)?;

    print!("{}", score_matrix(&protocol)?.to_csv());
    let report = run_eval(&protocol, &[1, 2, 3], &DEFAULT_FAR_LEVELS)?;
    for p in &report.cmc {
        println!("rank {}: {:.2}", p.rank, p.accuracy);
    }
    for p in &report.tar_at_far {
        println!("TAR at FAR {}: {:.2}", p.far, p.tar);
    }
    println!("counts: {:?}", report.counts);

    std::fs::write(out.join("report.json"), report.to_json()?).map_err(|e| bodyid::Error::io(&out, e))?;
    std::fs::write(out.join("roc.csv"), report.roc_csv()).map_err(|e| bodyid::Error::io(&out, e))?;
    println!("report.json and roc.csv written to {}", out.display());
    Ok(())
}
