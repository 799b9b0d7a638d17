use nalgebra::{DVector, Matrix3, Vector3};

use super::{BodyModel, BoneAttributes, KinematicTree, PoseParams, ShapeParams};
use crate::rotation::{rodrigues, rodrigues_jacobian};

/// Intermediates of one posing pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub attrs: BoneAttributes,
    pub rest_joints: Vec<Vector3<f64>>,
    pub shaped: Vec<Vector3<f64>>,
    pub local: Vec<Matrix3<f64>>,
    pub global: Vec<Matrix3<f64>>,
    pub joints: Vec<Vector3<f64>>,
    pub vertices: Vec<Vector3<f64>>,
    theta: Vec<Vector3<f64>>,
}

/// Gradient of a scalar with respect to shape and pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardGrad {
    pub beta: Vec<f64>,
    pub theta: Vec<Vector3<f64>>,
}

pub(super) fn chain_rotations(tree: &KinematicTree, theta: &PoseParams) -> (Vec<Matrix3<f64>>, Vec<Matrix3<f64>>) {
    let local: Vec<Matrix3<f64>> = theta.0.iter().map(rodrigues).collect();
    let mut global = local.clone();
    for j in 1..tree.joint_count() {
        global[j] = global[tree.parent(j)] * local[j];
    }
    (local, global)
}

/// Posed joints built from bone vectors rather than joint differences, so the
/// identity pose reproduces the rest joints bit for bit.
pub(super) fn posed_joint_positions(
    tree: &KinematicTree,
    lengths: &[f64],
    global: &[Matrix3<f64>],
) -> Vec<Vector3<f64>> {
    let mut joints = vec![Vector3::zeros(); tree.joint_count()];
    for j in 1..tree.joint_count() {
        let p = tree.parent(j);
        joints[j] = joints[p] + global[p] * (tree.rest_dirs()[j - 1] * lengths[j - 1]);
    }
    joints
}

pub(super) fn forward(model: &BodyModel, beta: &ShapeParams, theta: &PoseParams) -> Forward {
    let tree = model.tree();
    let attrs = model.bone_attributes(beta).expect("dimensions checked by caller");
    let rest_joints = model.joints_from_lengths(&attrs.lengths);
    let shaped = model.vertices_from(&attrs, &rest_joints);
    let (local, global) = chain_rotations(tree, theta);

    let joints = posed_joint_positions(tree, &attrs.lengths, &global);

    // offsets[j] = P_j - R_j J_j, so that G_j(x) = R_j x + offsets[j]
    let offsets: Vec<Vector3<f64>> = (0..tree.joint_count())
        .map(|j| joints[j] - global[j] * rest_joints[j])
        .collect();
    let vertices = shaped
        .iter()
        .zip(model.skin())
        .map(|(x, skin)| {
            let a = skin.primary;
            let base = global[a] * x + offsets[a];
            let mut v = base;
            for &(j, w) in &skin.weights {
                if j != a {
                    v += (global[j] * x + offsets[j] - base) * w;
                }
            }
            v
        })
        .collect();

    Forward {
        attrs,
        rest_joints,
        shaped,
        local,
        global,
        joints,
        vertices,
        theta: theta.0.clone(),
    }
}

impl Forward {
    /// Pulls gradients on posed vertices and posed joints back to `β` and `θ`.
    pub fn backward(
        &self,
        model: &BodyModel,
        d_vertices: &[Vector3<f64>],
        d_joints: &[Vector3<f64>],
    ) -> ForwardGrad {
        let tree = model.tree();
        let nj = tree.joint_count();
        let bones = tree.bone_count();
        let dirs = tree.rest_dirs();

        let mut d_global = vec![Matrix3::zeros(); nj];
        let mut d_posed = d_joints.to_vec();
        let mut d_rest = vec![Vector3::zeros(); nj];
        let mut d_len = vec![0.0; bones];
        let mut d_rad = vec![0.0; bones];

        for (vi, (dv, skin)) in d_vertices.iter().zip(model.skin()).enumerate() {
            if *dv == Vector3::zeros() {
                continue;
            }
            let x = self.shaped[vi];
            let mut dx = Vector3::zeros();
            for &(j, w) in &skin.weights {
                let wdv = dv * w;
                d_global[j] += wdv * (x - self.rest_joints[j]).transpose();
                let back = self.global[j].transpose() * wdv;
                dx += back;
                d_rest[j] -= back;
                d_posed[j] += wdv;
            }
            let anchor = &model.anchors()[vi];
            let b = anchor.bone;
            d_rest[tree.parent(b + 1)] += dx;
            d_len[b] += anchor.t * dirs[b].dot(&dx);
            d_rad[b] += anchor.offset.dot(&dx);
        }

        for j in (1..nj).rev() {
            let p = tree.parent(j);
            let bone = dirs[j - 1] * self.attrs.lengths[j - 1];
            let dp = d_posed[j];
            d_posed[p] += dp;
            d_global[p] += dp * bone.transpose();
            d_len[j - 1] += dirs[j - 1].dot(&(self.global[p].transpose() * dp));
        }

        let mut d_local = vec![Matrix3::zeros(); nj];
        for j in (1..nj).rev() {
            let p = tree.parent(j);
            let dg = d_global[j];
            d_global[p] += dg * self.local[j].transpose();
            d_local[j] = self.global[p].transpose() * dg;
        }
        d_local[0] = d_global[0];

        let theta = (0..nj)
            .map(|j| {
                let jac = rodrigues_jacobian(&self.theta[j]);
                Vector3::new(
                    d_local[j].component_mul(&jac[0]).sum(),
                    d_local[j].component_mul(&jac[1]).sum(),
                    d_local[j].component_mul(&jac[2]).sum(),
                )
            })
            .collect();

        for j in (1..nj).rev() {
            let dj = d_rest[j];
            d_rest[tree.parent(j)] += dj;
            d_len[j - 1] += dirs[j - 1].dot(&dj);
        }

        let mut d_log = DVector::zeros(2 * bones);
        for b in 0..bones {
            d_log[b] = d_len[b] * self.attrs.lengths[b];
            d_log[bones + b] = d_rad[b] * self.attrs.radii[b];
        }
        let beta = (model.shape_basis().transpose() * d_log).iter().copied().collect();
        ForwardGrad { beta, theta }
    }
}
