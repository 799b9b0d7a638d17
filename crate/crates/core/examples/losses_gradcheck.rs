//! Evaluate the chamfer, keypoint, shape-consistency and arc-margin losses
//! and compare their analytic gradients with central differences.
//!
//!     cargo run --release --example losses_gradcheck

use bodyid::losses::{arc_margin_loss, chamfer, chamfer_fast, keypoint_loss, shape_consistency, ArcMarginConfig};
use nalgebra::Vector2;

const H: f64 = 1e-5;

fn central(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] += H;
            let up = f(&p);
            p[i] -= 2.0 * H;
            (up - f(&p)) / (2.0 * H)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

fn points(x: &[f64]) -> Vec<Vector2<f64>> {
    x.chunks_exact(2).map(|c| Vector2::new(c[0], c[1])).collect()
}

fn main() -> bodyid::Result<()> {
    let a = [0.0, 0.0, 3.0, 1.0, 1.5, 4.0];
    let b = [0.4, 0.2, 2.1, 1.7, 5.0, 5.0, 1.0, 3.2];
    let l = chamfer(&points(&a), &points(&b))?;
    assert_eq!(l, chamfer_fast(&points(&a), &points(&b))?);
    let fd = central(&a, |x| chamfer(&points(x), &points(&b)).unwrap().value);
    println!("chamfer      {:.6}  gradient rel. error {:.1e}", l.value, rel_err(l.grad("cloud_a"), &fd));

    let gt = [10.0, 10.0, 50.0, 20.0, 30.0, 40.0];
    let pred = [12.0, 9.0, 47.5, 21.0, 30.0, 44.0];
    let visible = [true, true, false];
    let l = keypoint_loss(&points(&pred), &points(&gt), &visible)?;
    let fd = central(&pred, |x| keypoint_loss(&points(x), &points(&gt), &visible).unwrap().value);
    println!("keypoint     {:.6}  gradient rel. error {:.1e}", l.value, rel_err(l.grad("pred"), &fd));

    let betas = [0.1, -0.3, 0.5, 0.0, 0.2, -0.1, -0.4, 0.3, 0.6];
    let frames = |x: &[f64]| x.chunks(3).map(<[f64]>::to_vec).collect::<Vec<_>>();
    let l = shape_consistency(&frames(&betas))?;
    let fd = central(&betas, |x| shape_consistency(&frames(x)).unwrap().value);
    println!("consistency  {:.6}  gradient rel. error {:.1e}", l.value, rel_err(l.grad("betas"), &fd));

    let cfg = ArcMarginConfig::default();
    let weights = vec![vec![1.0, 0.2, -0.3], vec![-0.5, 1.0, 0.1], vec![0.0, -0.4, 1.0]];
    let e = [0.8, 0.5, 0.1];
    let l = arc_margin_loss(&e, &weights, 0, &cfg)?;
    let fd = central(&e, |x| arc_margin_loss(x, &weights, 0, &cfg).unwrap().value);
    println!("arc-margin   {:.6}  gradient rel. error {:.1e}", l.value, rel_err(l.grad("embedding"), &fd));
    Ok(())
}
