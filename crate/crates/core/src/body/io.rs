//! Versioned JSON form of [`BodyModel`].
//!
//! Keys are written in a fixed order and every number is printed with 17
//! significant digits, so a saved model reloads bit-identically and two saves
//! of the same model are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use serde::Deserialize;

use super::{skin_for, BodyModel, KinematicTree, ShapeParams, VertexAnchor};
use crate::error::{check_len, Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub(crate) fn fmt_f64(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String cannot fail");
}

fn write_row(out: &mut String, row: impl IntoIterator<Item = f64>) {
    out.push('[');
    for (i, x) in row.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        fmt_f64(out, x);
    }
    out.push(']');
}

fn write_rows<I, R>(out: &mut String, key: &str, rows: I)
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    write!(out, ",\n  \"{key}\": [").unwrap();
    for (i, row) in rows.into_iter().enumerate() {
        out.push_str(if i > 0 { ",\n    " } else { "\n    " });
        write_row(out, row);
    }
    out.push_str("\n  ]");
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    seed: u64,
    parents: Vec<usize>,
    rest_dirs: Vec<[f64; 3]>,
    template: Vec<[f64; 3]>,
    shape_basis: Vec<Vec<f64>>,
    skin_weights: Vec<Vec<f64>>,
    bone_lengths: Vec<f64>,
    bone_radii: Vec<f64>,
    length_components: usize,
    vertex_anchors: Vec<VertexAnchorFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexAnchorFile {
    bone: usize,
    t: f64,
    offset: [f64; 3],
}

impl BodyModel {
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        write!(out, "{{\n  \"version\": {MODEL_FORMAT_VERSION},\n  \"seed\": {}", self.seed).unwrap();
        let parents: Vec<String> = self.tree.parents().iter().map(|p| p.to_string()).collect();
        write!(out, ",\n  \"parents\": [{}]", parents.join(",")).unwrap();
        write_rows(&mut out, "rest_dirs", self.tree.rest_dirs().iter().map(|d| [d.x, d.y, d.z]));
        write_rows(&mut out, "template", self.template.iter().map(|v| [v.x, v.y, v.z]));
        write_rows(
            &mut out,
            "shape_basis",
            self.shape_basis.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()),
        );
        write_rows(&mut out, "skin_weights", self.skin_weight_matrix());
        out.push_str(",\n  \"bone_lengths\": ");
        write_row(&mut out, self.bone_lengths.iter().copied());
        out.push_str(",\n  \"bone_radii\": ");
        write_row(&mut out, self.bone_radii.iter().copied());
        write!(out, ",\n  \"length_components\": {}", self.length_components).unwrap();
        out.push_str(",\n  \"vertex_anchors\": [");
        for (i, a) in self.anchors.iter().enumerate() {
            out.push_str(if i > 0 { ",\n    " } else { "\n    " });
            write!(out, "{{\"bone\": {}, \"t\": ", a.bone).unwrap();
            fmt_f64(&mut out, a.t);
            out.push_str(", \"offset\": ");
            write_row(&mut out, [a.offset.x, a.offset.y, a.offset.z]);
            out.push('}');
        }
        out.push_str("\n  ]\n}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {} (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        let tree = KinematicTree::new(
            file.parents,
            file.rest_dirs.iter().map(|d| Vector3::from(*d)).collect(),
        )?;
        let bones = tree.bone_count();
        check_len("bone lengths", bones, file.bone_lengths.len())?;
        check_len("bone radii", bones, file.bone_radii.len())?;
        check_len("shape basis rows", 2 * bones, file.shape_basis.len())?;
        let dims = file.shape_basis.first().map_or(0, Vec::len);
        if dims == 0 {
            return Err(Error::Format("shape basis has no columns".into()));
        }
        for row in &file.shape_basis {
            check_len("shape basis columns", dims, row.len())?;
        }
        if file.length_components > dims {
            return Err(Error::Format("length_components exceeds shape dimensions".into()));
        }
        let shape_basis = DMatrix::from_fn(2 * bones, dims, |r, c| file.shape_basis[r][c]);
        if shape_basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("shape basis has non-finite entries".into()));
        }
        let anchors: Vec<VertexAnchor> = file
            .vertex_anchors
            .iter()
            .map(|a| {
                if a.bone >= bones {
                    return Err(Error::Format(format!("vertex anchored to unknown bone {}", a.bone)));
                }
                Ok(VertexAnchor {
                    bone: a.bone,
                    t: a.t,
                    offset: Vector3::from(a.offset),
                })
            })
            .collect::<Result<_>>()?;
        check_len("template vertices", anchors.len(), file.template.len())?;
        check_len("skin weight rows", anchors.len(), file.skin_weights.len())?;
        let skin: Vec<_> = anchors.iter().map(|a| skin_for(&tree, a)).collect();

        let mut model = Self {
            seed: file.seed,
            tree,
            bone_lengths: file.bone_lengths,
            bone_radii: file.bone_radii,
            shape_basis,
            length_components: file.length_components,
            anchors,
            skin,
            template: file.template.iter().map(|v| Vector3::from(*v)).collect(),
        };
        // Skinning weights and template are derived data; a file that disagrees
        // with its own anchors was edited or corrupted.
        let dense = model.skin_weight_matrix();
        for (v, (stored, derived)) in file.skin_weights.iter().zip(&dense).enumerate() {
            check_len("skin weight columns", derived.len(), stored.len())?;
            if stored.iter().zip(derived).any(|(a, b)| (a - b).abs() > 1e-12) {
                return Err(Error::Format(format!("skin weights of vertex {v} do not match its anchor")));
            }
        }
        let rebuilt = model.shaped_vertices(&ShapeParams::zeros(dims))?;
        if rebuilt.iter().zip(&model.template).any(|(a, b)| (a - b).amax() > 1e-9) {
            return Err(Error::Format("template does not match bone geometry".into()));
        }
        model.template = rebuilt;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
