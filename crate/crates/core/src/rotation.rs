//! Axis-angle rotations, their Jacobians, and the yaw/pitch/roll decomposition
//! used for view binning.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix of an axis-angle vector.
pub fn rodrigues(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let k = skew(v);
    let (a, b) = if theta2 < 1e-12 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Partial derivatives of [`rodrigues`] with respect to each component of `v`.
pub fn rodrigues_jacobian(v: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta2 = v.norm_squared();
    let basis = [Vector3::x(), Vector3::y(), Vector3::z()];
    if theta2 < 1e-12 {
        let kv = skew(v);
        return basis.map(|e| {
            let ke = skew(&e);
            ke + (ke * kv + kv * ke) * 0.5
        });
    }
    let r = rodrigues(v);
    let kv = skew(v);
    let i_minus_r = Matrix3::identity() - r;
    basis.map(|e| {
        let vi = v.dot(&e);
        let w = v.cross(&(i_minus_r * e));
        (kv * vi + skew(&w)) * r / theta2
    })
}

/// Inverse of [`rodrigues`]; returns a vector with norm in `[0, π]`.
pub fn log_map(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let vee = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-10 {
        return vee * 0.5;
    }
    if angle > PI - 1e-3 {
        // sin(angle) is too small to divide by; recover the axis from the
        // symmetric part instead.
        let sym = (r + r.transpose()) * 0.5;
        let outer = (sym - Matrix3::identity() * cos) / (1.0 - cos);
        let col = (0..3)
            .max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)]))
            .unwrap_or(0);
        let mut axis: Vector3<f64> = outer.column(col).into();
        axis /= axis.norm();
        if axis.dot(&vee) < 0.0 {
            axis = -axis;
        }
        return axis * angle;
    }
    vee * (angle / (2.0 * angle.sin()))
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a - two_pi * ((a + PI) / two_pi).floor();
    if r >= PI {
        r -= two_pi;
    }
    if r < -PI {
        r += two_pi;
    }
    r
}

/// `R = R_y(yaw) · R_x(pitch) · R_z(roll)`.
pub fn compose_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    rot_y(yaw) * rot_x(pitch) * rot_z(roll)
}

/// Splits a rotation into `(yaw, pitch, roll, degenerate)` with the
/// convention of [`compose_yaw_pitch_roll`]. At gimbal lock roll is set to 0.
pub fn decompose_yaw_pitch_roll(r: &Matrix3<f64>) -> (f64, f64, f64, bool) {
    let sin_pitch = (-r[(1, 2)]).clamp(-1.0, 1.0);
    let pitch = sin_pitch.asin();
    if (pitch.abs() - PI / 2.0).abs() <= 1e-9 {
        let yaw = (-r[(2, 0)]).atan2(r[(0, 0)]);
        return (wrap_angle(yaw), wrap_angle(pitch), 0.0, true);
    }
    let yaw = r[(0, 2)].atan2(r[(2, 2)]);
    let roll = r[(1, 0)].atan2(r[(1, 1)]);
    (wrap_angle(yaw), wrap_angle(pitch), wrap_angle(roll), false)
}
