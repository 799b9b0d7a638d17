//! Synthetic gallery/probe datasets: the sequence plan, in-memory rendering
//! and the versioned on-disk layout (`manifest.json`, `model.json`,
//! `population.json`, one NDJSON file of frames per sequence).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{BodyModel, ModelConfig};
use crate::error::{Error, Result};
use crate::fitter::{FrameFit, FrameObservation};
use crate::silhouette::{CloudSource, PointCloud2D};
use crate::synth::{generate_population, generate_sequence, Population, SequenceSpec, SynthConfig, SyntheticFrame};

pub const DATASET_SCHEMA: &str = "synth/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Sequences of subjects reserved for training the embedding head.
    Train,
    Gallery,
    Probe,
}

/// Shape of a gallery/probe protocol. Training subjects and evaluation
/// subjects are disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub train_subjects: usize,
    pub eval_subjects: usize,
    pub frames: usize,
    /// Effective resolution of field sequences.
    pub field_resolution: f64,
    /// Probes are seen from the elevated camera.
    pub probe_pitch: bool,
    /// Training subjects get an extra field sequence from the elevated camera.
    pub train_pitch: bool,
    /// Drop keypoint noise and pose motion from every sequence.
    pub noiseless: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            train_subjects: 20,
            eval_subjects: 20,
            frames: 10,
            field_resolution: 112.0,
            probe_pitch: false,
            train_pitch: false,
            noiseless: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_subjects == 0 {
            return Err(Error::Config("at least one evaluation subject is required".into()));
        }
        if self.train_subjects == 1 {
            return Err(Error::Config("training needs at least two subjects (or none)".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("sequences need at least one frame".into()));
        }
        Ok(())
    }

    pub fn total_subjects(&self) -> usize {
        self.train_subjects + self.eval_subjects
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub id: String,
    pub role: Role,
    pub spec: SequenceSpec,
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetPlan {
    pub seed: u64,
    pub model: ModelConfig,
    pub synth: SynthConfig,
    pub protocol: ProtocolConfig,
    pub sequences: Vec<SequenceEntry>,
}

/// Lays out the sequences of a protocol. Subjects `0..train_subjects` are for
/// training, the rest for evaluation. Each training subject has a controlled
/// and a field sequence (plus an elevated one when `train_pitch`). Each
/// evaluation subject has a controlled gallery sequence in clothing 0 and a
/// field probe in clothing 1.
pub fn plan_dataset(model: &ModelConfig, synth: &SynthConfig, protocol: &ProtocolConfig, seed: u64) -> Result<DatasetPlan> {
    model.validate()?;
    synth.validate()?;
    protocol.validate()?;
    if synth.clothing_variants < 2 {
        return Err(Error::Config("the protocol needs two clothing variants".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d5e9);
    let mut sequences = Vec::new();
    let mut push = |id: String, role: Role, spec: SequenceSpec| {
        let spec = if protocol.noiseless { spec.noiseless() } else { spec };
        sequences.push(SequenceEntry { id, role, spec });
    };
    let f = protocol.frames;
    let s = protocol.field_resolution;
    for i in 0..protocol.total_subjects() {
        let subject = crate::synth::subject_id(i);
        if i < protocol.train_subjects {
            push(format!("{subject}-c0"), Role::Train, SequenceSpec::controlled(&subject, 0, f, rng.next_u64()));
            push(format!("{subject}-f1"), Role::Train, SequenceSpec::field(&subject, 1, f, s, false, rng.next_u64()));
            if protocol.train_pitch {
                push(format!("{subject}-e1"), Role::Train, SequenceSpec::field(&subject, 1, f, s, true, rng.next_u64()));
            }
        } else {
            push(format!("{subject}-c0"), Role::Gallery, SequenceSpec::controlled(&subject, 0, f, rng.next_u64()));
            let tag = if protocol.probe_pitch { "e1" } else { "f1" };
            push(
                format!("{subject}-{tag}"),
                Role::Probe,
                SequenceSpec::field(&subject, 1, f, s, protocol.probe_pitch, rng.next_u64()),
            );
        }
    }
    for e in &sequences {
        e.spec.validate()?;
    }
    Ok(DatasetPlan {
        seed,
        model: model.clone(),
        synth: synth.clone(),
        protocol: protocol.clone(),
        sequences,
    })
}

impl DatasetPlan {
    pub fn model_seed(&self) -> u64 {
        self.seed
    }

    pub fn population_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub entry: SequenceEntry,
    pub frames: Vec<SyntheticFrame>,
}

impl Sequence {
    pub fn observations(&self) -> Vec<FrameObservation> {
        self.frames.iter().map(|f| f.observation.clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub plan: DatasetPlan,
    pub model: BodyModel,
    pub population: Population,
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn sequences_with(&self, role: Role) -> impl Iterator<Item = &Sequence> {
        self.sequences.iter().filter(move |s| s.entry.role == role)
    }
}

/// Builds the model and population and renders every planned sequence.
pub fn synthesize(plan: &DatasetPlan) -> Result<Dataset> {
    let model = BodyModel::synthesize(plan.model_seed(), &plan.model)?;
    let population = generate_population(&model, plan.protocol.total_subjects(), &plan.synth, plan.population_seed())?;
    let sequences = plan
        .sequences
        .par_iter()
        .map(|entry| {
            Ok(Sequence {
                entry: entry.clone(),
                frames: generate_sequence(&model, &population, &entry.spec, &plan.synth)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        plan: plan.clone(),
        model,
        population,
        sequences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSequence {
    #[serde(flatten)]
    pub entry: SequenceEntry,
    pub frames_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub seed: u64,
    pub model: ModelConfig,
    pub synth: SynthConfig,
    pub protocol: ProtocolConfig,
    pub model_file: String,
    pub population_file: String,
    pub sequences: Vec<ManifestSequence>,
}

impl Manifest {
    pub fn plan(&self) -> DatasetPlan {
        DatasetPlan {
            seed: self.seed,
            model: self.model.clone(),
            synth: self.synth.clone(),
            protocol: self.protocol.clone(),
            sequences: self.sequences.iter().map(|s| s.entry.clone()).collect(),
        }
    }
}

/// One line of a sequence's frame file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame: usize,
    pub cloud: Vec<[f64; 2]>,
    pub keypoints: Vec<[f64; 2]>,
    pub visible: Vec<bool>,
    pub truth: FrameFit,
}

impl FrameRecord {
    pub fn new(frame: usize, f: &SyntheticFrame) -> Self {
        let pairs = |v: &[Vector2<f64>]| v.iter().map(|p| [p.x, p.y]).collect();
        Self {
            frame,
            cloud: pairs(&f.observation.cloud.points),
            keypoints: pairs(&f.observation.keypoints),
            visible: f.observation.visible.clone(),
            truth: f.truth.clone(),
        }
    }

    pub fn into_frame(self) -> Result<SyntheticFrame> {
        let points = |v: Vec<[f64; 2]>| v.into_iter().map(Vector2::from).collect::<Vec<_>>();
        let cloud = PointCloud2D::new(points(self.cloud), CloudSource::Silhouette)?;
        let observation = FrameObservation {
            cloud,
            keypoints: points(self.keypoints),
            visible: self.visible,
        };
        Ok(SyntheticFrame {
            observation,
            truth: self.truth,
        })
    }
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `manifest.json`, `model.json`, `population.json` and
/// `sequences/<id>.ndjson` under `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<Manifest> {
    create_dir(&dir.join("sequences"))?;
    dataset.model.save(&dir.join("model.json"))?;
    write_text(
        &dir.join("population.json"),
        &(serde_json::to_string_pretty(&dataset.population)? + "\n"),
    )?;
    let mut sequences = Vec::with_capacity(dataset.sequences.len());
    for seq in &dataset.sequences {
        let rel = format!("sequences/{}.ndjson", seq.entry.id);
        let path = dir.join(&rel);
        let mut out = create_file(&path)?;
        for (i, f) in seq.frames.iter().enumerate() {
            serde_json::to_writer(&mut out, &FrameRecord::new(i, f))?;
            out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        sequences.push(ManifestSequence {
            entry: seq.entry.clone(),
            frames_file: rel,
        });
    }
    let plan = &dataset.plan;
    let manifest = Manifest {
        schema: DATASET_SCHEMA.into(),
        seed: plan.seed,
        model: plan.model.clone(),
        synth: plan.synth.clone(),
        protocol: plan.protocol.clone(),
        model_file: "model.json".into(),
        population_file: "population.json".into(),
        sequences,
    };
    write_text(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.schema != DATASET_SCHEMA {
        return Err(Error::Format(format!(
            "unsupported dataset schema {:?} (expected {DATASET_SCHEMA})",
            manifest.schema
        )));
    }
    Ok(manifest)
}

/// Frames of one sequence file, plus the number of lines that could not be
/// parsed and were skipped.
pub fn read_frames(path: &Path) -> Result<(Vec<SyntheticFrame>, usize)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames = Vec::new();
    let mut skipped = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<FrameRecord>(&line).map_err(Error::from).and_then(FrameRecord::into_frame) {
            Ok(f) => frames.push(f),
            Err(e) => {
                log::warn!("{}:{}: skipping frame: {e}", path.display(), n + 1);
                skipped += 1;
            }
        }
    }
    Ok((frames, skipped))
}

/// Loads a dataset written by [`write_dataset`]. Unreadable frame lines are
/// skipped and counted.
pub fn read_dataset(dir: &Path) -> Result<(Dataset, usize)> {
    let manifest = read_manifest(dir)?;
    let model = BodyModel::load(&dir.join(&manifest.model_file))?;
    let pop_path = dir.join(&manifest.population_file);
    let text = fs::read_to_string(&pop_path).map_err(|e| Error::io(&pop_path, e))?;
    let population: Population = serde_json::from_str(&text)?;
    let mut skipped = 0;
    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    for s in &manifest.sequences {
        let path: PathBuf = dir.join(&s.frames_file);
        let (frames, bad) = read_frames(&path)?;
        skipped += bad;
        sequences.push(Sequence {
            entry: s.entry.clone(),
            frames,
        });
    }
    Ok((
        Dataset {
            plan: manifest.plan(),
            model,
            population,
            sequences,
        },
        skipped,
    ))
}
