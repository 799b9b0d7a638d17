//! View binning, per-bin aggregation (mean, median, best), occupancy-weighted
//! merging, and the matching rule between two feature sets.
//!
//!     cargo run --release --example view_bins

use std::f64::consts::PI;

use bodyid::aggregation::{aggregate, match_distance, merge, select_bin, yaw_bin, Aggregation, ViewBinConfig};
use bodyid::body::ViewAngles;

fn view(yaw: f64) -> ViewAngles {
    ViewAngles { yaw, pitch: 0.0, roll: 0.0 }
}

fn unit(angle: f64) -> Vec<f64> {
    vec![angle.cos(), angle.sin()]
}

fn main() -> bodyid::Result<()> {
    let bins = ViewBinConfig::new(8)?;
    for yaw in [0.0, PI / 8.0 - 1e-9, PI / 8.0, PI / 4.0, -PI] {
        println!("yaw {yaw:>7.4} -> bin {}", yaw_bin(yaw, &bins));
    }

    // Two agreeing features and one outlier in the frontal bin, one in the profile bin.
    let features = vec![
        (unit(0.0), view(0.05)),
        (unit(0.0), view(-0.1)),
        (unit(2.5), view(0.2)),
        (unit(1.0), view(PI / 2.0)),
    ];
    for method in [Aggregation::Mean, Aggregation::Median, Aggregation::parse("best")?] {
        let set = aggregate(&features, &method, &bins)?;
        let frontal = set.bins()[0].feature.as_ref().expect("occupied");
        println!("{method:?}: frontal bin feature [{:.3}, {:.3}], occupancies {:?}", frontal[0], frontal[1], set.occupancies());
    }

    let a = aggregate(&[(unit(0.0), view(0.0))], &Aggregation::Mean, &bins)?;
    let b = aggregate(&[(unit(0.3), view(0.0)), (unit(0.3), view(0.0)), (unit(0.3), view(0.0))], &Aggregation::Mean, &bins)?;
    let merged = merge(&[a.clone(), b])?;
    let f = merged.bins()[0].feature.as_ref().expect("occupied");
    println!("merged occupancy {}, direction {:.3} rad", merged.occupancies()[0], f[1].atan2(f[0]));

    let probe = aggregate(&[(unit(0.1), view(0.0)), (unit(1.2), view(PI / 2.0))], &Aggregation::Mean, &bins)?;
    println!("common bin {:?}, distance {:.3} rad", select_bin(&merged, &probe), match_distance(&merged, &probe)?);
    let side = aggregate(&[(unit(0.5), view(PI))], &Aggregation::Mean, &bins)?;
    println!(
        "no common bin: {:?}, collapsed distance {:.3} rad",
        select_bin(&a, &side),
        match_distance(&a, &side)?
    );
    Ok(())
}
