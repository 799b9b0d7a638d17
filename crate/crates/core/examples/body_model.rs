//! Build the capsule body model, pose it, project it, and round-trip the
//! model file.
//!
//!     cargo run --release --example body_model [out-dir]

use std::path::PathBuf;

use bodyid::body::{BodyModel, Camera, ModelConfig, PoseParams, ShapeParams};
use nalgebra::Vector3;

fn main() -> bodyid::Result<()> {
    let out = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let model = BodyModel::synthesize(7, &ModelConfig::default())?;
    println!(
        "{} joints, {} bones, {} vertices, {} shape components ({} length, {} girth)",
        model.joint_count(),
        model.bone_count(),
        model.vertex_count(),
        model.shape_dims(),
        model.length_components(),
        model.girth_components().len()
    );

    // Longer limbs, slimmer girth, a quarter turn and a raised arm.
    let mut beta = ShapeParams::zeros(model.shape_dims());
    beta.0[0] = 1.5;
    beta.0[model.girth_components().start] = -1.0;
    let mut theta = PoseParams::identity(model.joint_count());
    theta.0[0] = Vector3::new(0.0, std::f64::consts::FRAC_PI_4, 0.0);
    theta.0[3] = Vector3::new(0.0, 0.0, 1.2);

    let rest = model.bone_attributes(&ShapeParams::zeros(model.shape_dims()))?;
    let shaped = model.bone_attributes(&beta)?;
    for b in 0..3 {
        println!(
            "bone {b}: length {:.3} -> {:.3} m, radius {:.3} -> {:.3} m",
            rest.lengths[b], shaped.lengths[b], rest.radii[b], shaped.radii[b]
        );
    }

    let camera = Camera::new(100.0, 112.0, 112.0)?;
    let keypoints = model.keypoints(&beta, &theta, &camera)?;
    let vertices = camera.project(&model.lbs(&beta, &theta)?);
    let (lo, hi) = vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.y), hi.max(v.y)));
    println!("{} keypoints, projected body spans rows {lo:.1}..{hi:.1}", keypoints.len());

    let path = out.join("body_model.json");
    model.save(&path)?;
    let reloaded = BodyModel::load(&path)?;
    assert_eq!(reloaded.lbs(&beta, &theta)?, model.lbs(&beta, &theta)?);
    println!("model written to {} and reloaded bit-exactly", path.display());
    Ok(())
}
