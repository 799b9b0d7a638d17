//! Rasterize a posed body into a binary mask, sample a silhouette point
//! cloud, and simulate low-resolution capture.
//!
//!     cargo run --release --example silhouette_cloud [out-dir]

use std::path::PathBuf;

use bodyid::body::{BodyModel, Camera, ModelConfig, PoseParams, ShapeParams};
use bodyid::silhouette::{adaptive_sample_vertices, degrade_cloud, rasterize_mask, sample_silhouette_cloud, save_pgm};
use nalgebra::Vector3;

fn main() -> bodyid::Result<()> {
    let out = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let model = BodyModel::synthesize(7, &ModelConfig::default())?;
    let beta = ShapeParams::zeros(model.shape_dims());
    let mut theta = PoseParams::identity(model.joint_count());
    theta.0[0] = Vector3::new(0.0, 0.6, 0.0);
    let camera = Camera::new(95.0, 112.0, 112.0)?;

    let mask = rasterize_mask(&model, &beta, &theta, &camera, 224, 224)?;
    let path = out.join("silhouette.pgm");
    save_pgm(&mask, &path)?;
    println!("{} foreground pixels, mask written to {}", mask.count(), path.display());

    let cloud = sample_silhouette_cloud(&mask, 400, 1)?;
    let vertices = adaptive_sample_vertices(&camera.project(&model.lbs(&beta, &theta)?), 16, 2)?;
    println!("silhouette cloud {} points, adaptively sampled vertices {}", cloud.len(), vertices.len());

    for s in [224.0, 112.0, 56.0] {
        let degraded = degrade_cloud(&cloud, s, 0.5, 2)?;
        let shift = cloud
            .points
            .iter()
            .zip(&degraded.points)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            / cloud.len() as f64;
        println!("s = {s:>3}: mean point displacement {shift:.2} px");
    }
    Ok(())
}
