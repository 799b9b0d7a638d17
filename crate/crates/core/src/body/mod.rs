//! Procedural articulated body: a tree of capsule bones whose lengths and
//! radii are driven multiplicatively by shape coefficients, posed with linear
//! blend skinning and viewed through a weak-perspective camera.
//!
//! Shape coefficients act through `attribute = template ⊙ exp(S·β)` where `S`
//! stacks one row per bone length followed by one row per bone radius. The
//! first `length_components` columns of `S` touch lengths only, the remaining
//! ("girth") columns touch radii only. Every column is zero-mean over the rows
//! it touches, so no coefficient can imitate a uniform rescale of the body,
//! which a weak-perspective camera cannot observe.

mod io;
mod kinematics;

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rotation::{decompose_yaw_pitch_roll, rodrigues};

pub use io::MODEL_FORMAT_VERSION;
pub use kinematics::{Forward, ForwardGrad};

/// Height used to turn a keypoint bounding box into a camera scale.
pub const NOMINAL_BODY_HEIGHT_M: f64 = 1.7;

/// Fraction of a bone, measured from either end, over which skinning weights
/// blend with the neighbouring bone.
const BLEND_SPAN: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTree {
    parents: Vec<usize>,
    /// `rest_dirs[b]` is the unit direction of bone `b`, which runs from
    /// `parents[b + 1]` to joint `b + 1`.
    rest_dirs: Vec<Vector3<f64>>,
}

impl KinematicTree {
    pub fn new(parents: Vec<usize>, rest_dirs: Vec<Vector3<f64>>) -> Result<Self> {
        if parents.len() < 2 {
            return Err(Error::Config(format!(
                "a kinematic tree needs at least 2 joints, got {}",
                parents.len()
            )));
        }
        check_len("rest directions", parents.len() - 1, rest_dirs.len())?;
        if parents[0] != 0 {
            return Err(Error::Config("joint 0 must be its own parent".into()));
        }
        for (j, &p) in parents.iter().enumerate().skip(1) {
            // parents precede children, which also rules out cycles
            if p >= j {
                return Err(Error::Config(format!(
                    "joint {j} has parent {p}; parents must precede their children"
                )));
            }
        }
        for (b, d) in rest_dirs.iter().enumerate() {
            if !((d.norm() - 1.0).abs() <= 1e-9) {
                return Err(Error::Config(format!("rest direction of bone {b} is not unit")));
            }
        }
        Ok(Self { parents, rest_dirs })
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn bone_count(&self) -> usize {
        self.parents.len() - 1
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn parent(&self, joint: usize) -> usize {
        self.parents[joint]
    }

    pub fn rest_dirs(&self) -> &[Vector3<f64>] {
        &self.rest_dirs
    }

    /// True if some bone starts at `joint`.
    pub fn has_children(&self, joint: usize) -> bool {
        self.parents.iter().skip(1).any(|&p| p == joint)
    }

    /// Joints in the subtree rooted at `joint`, including itself.
    pub fn subtree(&self, joint: usize) -> Vec<usize> {
        let mut inside = vec![false; self.joint_count()];
        inside[joint] = true;
        for j in joint + 1..self.joint_count() {
            inside[j] = inside[self.parents[j]];
        }
        (0..self.joint_count()).filter(|&j| inside[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeParams(pub Vec<f64>);

impl ShapeParams {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-joint axis-angle rotations; entry 0 is the global root orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct PoseParams(pub Vec<Vector3<f64>>);

impl From<Vec<[f64; 3]>> for PoseParams {
    fn from(rows: Vec<[f64; 3]>) -> Self {
        Self(rows.into_iter().map(Vector3::from).collect())
    }
}

impl From<PoseParams> for Vec<[f64; 3]> {
    fn from(p: PoseParams) -> Self {
        p.0.iter().map(|v| [v.x, v.y, v.z]).collect()
    }
}

impl PoseParams {
    pub fn identity(joints: usize) -> Self {
        Self(vec![Vector3::zeros(); joints])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn root(&self) -> Vector3<f64> {
        self.0[0]
    }
}

/// Weak-perspective camera: `pixel = scale · (x, y) + trans`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "CameraRecord", into = "CameraRecord")]
pub struct Camera {
    pub scale: f64,
    pub trans: Vector2<f64>,
}

#[derive(Serialize, Deserialize)]
struct CameraRecord {
    scale: f64,
    trans: [f64; 2],
}

impl From<CameraRecord> for Camera {
    fn from(r: CameraRecord) -> Self {
        Self {
            scale: r.scale,
            trans: Vector2::from(r.trans),
        }
    }
}

impl From<Camera> for CameraRecord {
    fn from(c: Camera) -> Self {
        Self {
            scale: c.scale,
            trans: [c.trans.x, c.trans.y],
        }
    }
}

impl Camera {
    pub fn new(scale: f64, tx: f64, ty: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("camera scale must be positive, got {scale}")));
        }
        Ok(Self {
            scale,
            trans: Vector2::new(tx, ty),
        })
    }

    pub fn project_point(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(p.x, p.y) * self.scale + self.trans
    }

    pub fn project(&self, points: &[Vector3<f64>]) -> Vec<Vector2<f64>> {
        points.iter().map(|p| self.project_point(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ViewAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Yaw (about vertical y), pitch (about x) and roll (about z) of the root
/// rotation. The flag is set at gimbal lock, where roll is reported as 0.
pub fn view_angles(theta: &PoseParams) -> (ViewAngles, bool) {
    view_angles_of(&rodrigues(&theta.root()))
}

pub fn view_angles_of(root: &Matrix3<f64>) -> (ViewAngles, bool) {
    let (yaw, pitch, roll, degenerate) = decompose_yaw_pitch_roll(root);
    (ViewAngles { yaw, pitch, roll }, degenerate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoneAttributes {
    pub lengths: Vec<f64>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub joints: usize,
    pub vertices: usize,
    pub shape_dims: usize,
    /// Leading shape coefficients that act on bone lengths; the rest act on radii.
    pub length_components: usize,
    /// Standard deviation of basis entries for length rows.
    pub length_basis_scale: f64,
    /// Standard deviation of basis entries for radius rows.
    pub girth_basis_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            joints: 17,
            vertices: 672,
            shape_dims: 10,
            length_components: 6,
            length_basis_scale: 0.1,
            girth_basis_scale: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.joints < 2 {
            return Err(Error::Config(format!("joints must be at least 2, got {}", self.joints)));
        }
        if self.shape_dims == 0 {
            return Err(Error::Config("shape_dims must be positive".into()));
        }
        let bones = self.joints - 1;
        if self.vertices < 4 * bones {
            return Err(Error::Config(format!(
                "need at least {} vertices for {bones} bones, got {}",
                4 * bones,
                self.vertices
            )));
        }
        if self.length_components > self.shape_dims {
            return Err(Error::Config("length_components exceeds shape_dims".into()));
        }
        if !(self.length_basis_scale >= 0.0 && self.girth_basis_scale >= 0.0) {
            return Err(Error::Config("basis scales must be non-negative".into()));
        }
        Ok(())
    }
}

/// Skinning weights of one vertex: the joint whose transform carries it and
/// the full (joint, weight) list, weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinWeights {
    pub primary: usize,
    pub weights: Vec<(usize, f64)>,
}

/// Where a vertex sits on its capsule: `x = J_start + t·L·dir + R·offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexAnchor {
    pub bone: usize,
    pub t: f64,
    pub offset: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    seed: u64,
    tree: KinematicTree,
    bone_lengths: Vec<f64>,
    bone_radii: Vec<f64>,
    shape_basis: DMatrix<f64>,
    length_components: usize,
    anchors: Vec<VertexAnchor>,
    skin: Vec<SkinWeights>,
    template: Vec<Vector3<f64>>,
}

// (parent, direction, length m, radius m); up is -y, front is +z, left is +x.
const HUMANOID: [(usize, [f64; 3], f64, f64); 16] = [
    (0, [0.0, -1.0, 0.05], 0.28, 0.13),  // 1 spine
    (1, [0.0, -1.0, -0.05], 0.26, 0.12), // 2 neck
    (2, [0.0, -1.0, 0.05], 0.25, 0.09),  // 3 head
    (2, [1.0, 0.15, 0.0], 0.18, 0.06),   // 4 left shoulder
    (4, [0.1, 1.0, 0.0], 0.30, 0.05),    // 5 left elbow
    (5, [0.05, 1.0, 0.1], 0.26, 0.04),   // 6 left wrist
    (2, [-1.0, 0.15, 0.0], 0.18, 0.06),  // 7 right shoulder
    (7, [-0.1, 1.0, 0.0], 0.30, 0.05),   // 8 right elbow
    (8, [-0.05, 1.0, 0.1], 0.26, 0.04),  // 9 right wrist
    (0, [1.0, 0.3, 0.0], 0.11, 0.08),    // 10 left hip
    (10, [0.0, 1.0, 0.05], 0.44, 0.07),  // 11 left knee
    (11, [0.0, 1.0, -0.08], 0.42, 0.05), // 12 left ankle
    (0, [-1.0, 0.3, 0.0], 0.11, 0.08),   // 13 right hip
    (13, [0.0, 1.0, 0.05], 0.44, 0.07),  // 14 right knee
    (14, [0.0, 1.0, -0.08], 0.42, 0.05), // 15 right ankle
    (3, [0.0, 0.3, 1.0], 0.10, 0.03),    // 16 nose
];

/// Named joints of the 17-joint humanoid used for initialization heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Landmarks {
    pub left_shoulder: usize,
    pub right_shoulder: usize,
    pub head: usize,
    pub nose: usize,
}

const HUMANOID_LANDMARKS: Landmarks = Landmarks {
    left_shoulder: 4,
    right_shoulder: 7,
    head: 3,
    nose: 16,
};

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Vertices per bone: four each, the rest in proportion to capsule area
/// (largest remainder).
fn vertex_allocation(lengths: &[f64], radii: &[f64], total: usize) -> Vec<usize> {
    let bones = lengths.len();
    let area: Vec<f64> = lengths.iter().zip(radii).map(|(l, r)| r * (l + 2.0 * r)).collect();
    let sum: f64 = area.iter().sum();
    let spare = total - 4 * bones;
    let share: Vec<f64> = area.iter().map(|a| a / sum * spare as f64).collect();
    let mut counts: Vec<usize> = share.iter().map(|s| 4 + s.floor() as usize).collect();
    let mut order: Vec<usize> = (0..bones).collect();
    order.sort_by(|&i, &j| (share[j] - share[j].floor()).total_cmp(&(share[i] - share[i].floor())).then(i.cmp(&j)));
    let assigned: usize = counts.iter().sum();
    for &b in order.iter().take(total - assigned) {
        counts[b] += 1;
    }
    counts
}

/// `n` points spread evenly over a capsule: a golden-angle spiral on the
/// cylinder and Fibonacci spirals on the two hemispherical caps, split by area.
fn capsule_anchors(
    bone: usize,
    d: &Vector3<f64>,
    (e1, e2): (Vector3<f64>, Vector3<f64>),
    length: f64,
    radius: f64,
    n: usize,
    phase: f64,
) -> Vec<VertexAnchor> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let cap_share = 2.0 * radius / (2.0 * radius + length);
    let per_cap = (((n as f64) * cap_share / 2.0).round() as usize).clamp(1, (n - 2) / 2);
    let side = n - 2 * per_cap;
    let ring = |phi: f64| e1 * phi.cos() + e2 * phi.sin();
    let mut out = Vec::with_capacity(n);
    for i in 0..side {
        out.push(VertexAnchor {
            bone,
            t: (i as f64 + 0.5) / side as f64,
            offset: ring(phase + golden * i as f64),
        });
    }
    for (t, sign) in [(0.0, -1.0), (1.0, 1.0)] {
        for i in 0..per_cap {
            // heights uniform in (0, 1] give uniform area on the hemisphere
            let h = 1.0 - i as f64 / per_cap as f64;
            let rho = (1.0 - h * h).max(0.0).sqrt();
            out.push(VertexAnchor {
                bone,
                t,
                offset: d * (sign * h) + ring(phase + golden * i as f64) * rho,
            });
        }
    }
    out
}

fn perpendicular_frame(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let axis = if d.x.abs() <= d.y.abs() && d.x.abs() <= d.z.abs() {
        Vector3::x()
    } else if d.y.abs() <= d.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = d.cross(&axis).normalize();
    let e2 = d.cross(&e1);
    (e1, e2)
}

impl BodyModel {
    /// Builds a model deterministically from `seed`.
    pub fn synthesize(seed: u64, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let joints = config.joints;
        let bones = joints - 1;

        let (parents, dirs, lengths, radii) = if joints == HUMANOID.len() + 1 {
            let mut parents = vec![0];
            let mut dirs = Vec::with_capacity(bones);
            let mut lengths = Vec::with_capacity(bones);
            let mut radii = Vec::with_capacity(bones);
            for &(p, d, l, r) in HUMANOID.iter() {
                parents.push(p);
                let jitter = Vector3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng));
                dirs.push((Vector3::from(d).normalize() + jitter * 0.02).normalize());
                lengths.push(l * (1.0 + 0.03 * gaussian(&mut rng)));
                radii.push(r * (1.0 + 0.03 * gaussian(&mut rng)));
            }
            (parents, dirs, lengths, radii)
        } else {
            let mut parents = vec![0];
            let mut dirs = Vec::with_capacity(bones);
            let mut lengths = Vec::with_capacity(bones);
            let mut radii = Vec::with_capacity(bones);
            for j in 1..joints {
                parents.push(rng.random_range(0..j));
                let d = Vector3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng));
                dirs.push(if d.norm() > 1e-6 { d.normalize() } else { Vector3::y() });
                lengths.push(rng.random_range(0.15..0.45));
                radii.push(rng.random_range(0.03..0.1));
            }
            (parents, dirs, lengths, radii)
        };
        let tree = KinematicTree::new(parents, dirs)?;

        let shape_basis = Self::synthesize_basis(&mut rng, bones, config);

        // Spread vertices over the capsule surfaces in proportion to their
        // area, then interleave them in a seeded random order so that
        // index-priority subsampling is spatially unbiased.
        let counts = vertex_allocation(&lengths, &radii, config.vertices);
        let mut anchors = Vec::with_capacity(config.vertices);
        for (b, &n) in counts.iter().enumerate() {
            let d = tree.rest_dirs[b];
            let frame = perpendicular_frame(&d);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            anchors.extend(capsule_anchors(b, &d, frame, lengths[b], radii[b], n, phase));
        }
        for i in (1..anchors.len()).rev() {
            let k = rng.random_range(0..=i);
            anchors.swap(i, k);
        }

        let skin = anchors.iter().map(|a| skin_for(&tree, a)).collect();
        let mut model = Self {
            seed,
            tree,
            bone_lengths: lengths,
            bone_radii: radii,
            shape_basis,
            length_components: config.length_components,
            anchors,
            skin,
            template: Vec::new(),
        };
        let zero = ShapeParams::zeros(config.shape_dims);
        model.template = model.shaped_vertices(&zero)?;
        Ok(model)
    }

    fn synthesize_basis(rng: &mut ChaCha8Rng, bones: usize, config: &ModelConfig) -> DMatrix<f64> {
        let mut basis = DMatrix::zeros(2 * bones, config.shape_dims);
        for c in 0..config.shape_dims {
            let (rows, scale) = if c < config.length_components {
                (0..bones, config.length_basis_scale)
            } else {
                (bones..2 * bones, config.girth_basis_scale)
            };
            let column: Vec<f64> = rows.clone().map(|_| gaussian(rng) * scale).collect();
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            for (r, v) in rows.zip(column) {
                basis[(r, c)] = v - mean;
            }
        }
        basis
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tree(&self) -> &KinematicTree {
        &self.tree
    }

    pub fn joint_count(&self) -> usize {
        self.tree.joint_count()
    }

    pub fn bone_count(&self) -> usize {
        self.tree.bone_count()
    }

    pub fn vertex_count(&self) -> usize {
        self.template.len()
    }

    pub fn shape_dims(&self) -> usize {
        self.shape_basis.ncols()
    }

    /// Keypoints are the projected joints.
    pub fn keypoint_count(&self) -> usize {
        self.joint_count()
    }

    pub fn length_components(&self) -> usize {
        self.length_components
    }

    /// Shape coefficients that only change bone radii.
    pub fn girth_components(&self) -> std::ops::Range<usize> {
        self.length_components..self.shape_dims()
    }

    pub fn shape_basis(&self) -> &DMatrix<f64> {
        &self.shape_basis
    }

    pub fn template_vertices(&self) -> &[Vector3<f64>] {
        &self.template
    }

    pub fn template_lengths(&self) -> &[f64] {
        &self.bone_lengths
    }

    pub fn template_radii(&self) -> &[f64] {
        &self.bone_radii
    }

    pub fn anchors(&self) -> &[VertexAnchor] {
        &self.anchors
    }

    pub fn skin(&self) -> &[SkinWeights] {
        &self.skin
    }

    /// Dense `V × J` skinning matrix.
    pub fn skin_weight_matrix(&self) -> Vec<Vec<f64>> {
        self.skin
            .iter()
            .map(|s| {
                let mut row = vec![0.0; self.joint_count()];
                for &(j, w) in &s.weights {
                    row[j] += w;
                }
                row
            })
            .collect()
    }

    pub fn landmarks(&self) -> Option<Landmarks> {
        (self.joint_count() == HUMANOID.len() + 1).then_some(HUMANOID_LANDMARKS)
    }

    fn check_beta(&self, beta: &ShapeParams) -> Result<()> {
        check_len("shape coefficients", self.shape_dims(), beta.len())
    }

    fn check_theta(&self, theta: &PoseParams) -> Result<()> {
        check_len("pose rotations", self.joint_count(), theta.len())
    }

    /// `template ⊙ exp(S·β)`, split into per-bone lengths and radii.
    pub fn bone_attributes(&self, beta: &ShapeParams) -> Result<BoneAttributes> {
        self.check_beta(beta)?;
        let bones = self.bone_count();
        let log_offsets = &self.shape_basis * nalgebra::DVector::from_column_slice(beta.as_slice());
        let lengths = (0..bones)
            .map(|b| self.bone_lengths[b] * log_offsets[b].exp())
            .collect();
        let radii = (0..bones)
            .map(|b| self.bone_radii[b] * log_offsets[bones + b].exp())
            .collect();
        Ok(BoneAttributes { lengths, radii })
    }

    /// Rest-pose joint positions; the root sits at the origin.
    pub fn regress_joints(&self, beta: &ShapeParams) -> Result<Vec<Vector3<f64>>> {
        let attrs = self.bone_attributes(beta)?;
        Ok(self.joints_from_lengths(&attrs.lengths))
    }

    fn joints_from_lengths(&self, lengths: &[f64]) -> Vec<Vector3<f64>> {
        let mut joints = vec![Vector3::zeros(); self.joint_count()];
        for j in 1..self.joint_count() {
            joints[j] = joints[self.tree.parent(j)] + self.tree.rest_dirs[j - 1] * lengths[j - 1];
        }
        joints
    }

    /// Rest-pose vertices for shape `beta`.
    pub fn shaped_vertices(&self, beta: &ShapeParams) -> Result<Vec<Vector3<f64>>> {
        let attrs = self.bone_attributes(beta)?;
        let joints = self.joints_from_lengths(&attrs.lengths);
        Ok(self.vertices_from(&attrs, &joints))
    }

    fn vertices_from(&self, attrs: &BoneAttributes, joints: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        self.anchors
            .iter()
            .map(|a| {
                let start = joints[self.tree.parent(a.bone + 1)];
                start
                    + self.tree.rest_dirs[a.bone] * (a.t * attrs.lengths[a.bone])
                    + a.offset * attrs.radii[a.bone]
            })
            .collect()
    }

    /// Posed vertices by linear blend skinning.
    pub fn lbs(&self, beta: &ShapeParams, theta: &PoseParams) -> Result<Vec<Vector3<f64>>> {
        Ok(self.forward(beta, theta)?.vertices)
    }

    /// Posed joint positions (root at origin).
    pub fn posed_joints(&self, beta: &ShapeParams, theta: &PoseParams) -> Result<Vec<Vector3<f64>>> {
        self.check_beta(beta)?;
        self.check_theta(theta)?;
        let attrs = self.bone_attributes(beta)?;
        let (_, global) = kinematics::chain_rotations(&self.tree, theta);
        Ok(kinematics::posed_joint_positions(&self.tree, &attrs.lengths, &global))
    }

    /// Projected joints, i.e. the model's 2D keypoints.
    pub fn keypoints(&self, beta: &ShapeParams, theta: &PoseParams, camera: &Camera) -> Result<Vec<Vector2<f64>>> {
        Ok(camera.project(&self.posed_joints(beta, theta)?))
    }

    /// Full forward pass retaining the intermediates needed for gradients.
    pub fn forward(&self, beta: &ShapeParams, theta: &PoseParams) -> Result<Forward> {
        self.check_beta(beta)?;
        self.check_theta(theta)?;
        Ok(kinematics::forward(self, beta, theta))
    }
}

fn skin_for(tree: &KinematicTree, anchor: &VertexAnchor) -> SkinWeights {
    let end = anchor.bone + 1;
    let start = tree.parent(end);
    let mut weights = vec![(start, 1.0)];
    if anchor.t > 1.0 - BLEND_SPAN && tree.has_children(end) {
        let w = 0.5 * (anchor.t - (1.0 - BLEND_SPAN)) / BLEND_SPAN;
        weights[0].1 = 1.0 - w;
        weights.push((end, w));
    } else if anchor.t < BLEND_SPAN && start != 0 {
        let w = 0.5 * (BLEND_SPAN - anchor.t) / BLEND_SPAN;
        weights[0].1 = 1.0 - w;
        weights.push((tree.parent(start), w));
    }
    SkinWeights {
        primary: start,
        weights,
    }
}
