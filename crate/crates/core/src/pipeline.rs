//! Batch stages between a dataset and an evaluation report: fitting every
//! window, training the embedding head, embedding the fits, and enrolling
//! gallery and probe feature sets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, merge, Aggregation, FeatureSet, ViewBinConfig};
use crate::body::ViewAngles;
use crate::dataset::{Dataset, Role};
use crate::embedding::{train_head, EmbeddingHead, Sample, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::eval::{Probe, Protocol};
use crate::fitter::{fit_subsequence, split_sequence, FitConfig, FitLosses, LossRecord};

/// Header of every loss-curve CSV.
pub const LOSS_CSV_HEADER: &str = "iter,total,chamfer,keypoint,consistency,arcmargin";

/// Result of fitting one window of one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub subject_id: String,
    pub sequence_id: String,
    pub role: Role,
    /// Half-open frame range `[start, end)`.
    pub window: [usize; 2],
    pub beta_mean: Vec<f64>,
    pub median_view: ViewAngles,
    pub losses: FitLosses,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<LossRecord>,
}

/// Identity feature of one fitted window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub subject_id: String,
    pub sequence_id: String,
    pub role: Role,
    pub window: [usize; 2],
    pub view: ViewAngles,
    pub feature: Vec<f64>,
}

fn window_seed(seed: u64, sequence: usize, window: usize) -> u64 {
    seed ^ ((sequence as u64) << 20) ^ window as u64
}

/// Fits every window of every sequence in `roles`. Output order follows the
/// dataset, whatever the scheduling.
pub fn fit_dataset(dataset: &Dataset, roles: &[Role], cfg: &FitConfig, seed: u64, keep_history: bool) -> Result<Vec<FitRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, std::ops::Range<usize>)> = dataset
        .sequences
        .iter()
        .enumerate()
        .filter(|(_, s)| roles.contains(&s.entry.role))
        .flat_map(|(i, s)| {
            split_sequence(s.frames.len(), cfg.seq_len)
                .into_iter()
                .enumerate()
                .map(move |(w, r)| (i, w, r))
        })
        .collect();
    jobs.par_iter()
        .map(|(i, w, range)| {
            let seq = &dataset.sequences[*i];
            let obs: Vec<_> = seq.frames[range.clone()].iter().map(|f| f.observation.clone()).collect();
            let fit = fit_subsequence(&dataset.model, &obs, cfg, window_seed(seed, *i, *w))?;
            log::debug!(
                "{} [{}, {}): {} iterations, loss {:.4}",
                seq.entry.id,
                range.start,
                range.end,
                fit.iterations,
                fit.losses.total
            );
            Ok(FitRecord {
                subject_id: seq.entry.spec.subject.clone(),
                sequence_id: seq.entry.id.clone(),
                role: seq.entry.role,
                window: [range.start, range.end],
                beta_mean: fit.feature,
                median_view: fit.median_view,
                losses: fit.losses,
                iterations: fit.iterations,
                converged: fit.converged,
                history: if keep_history { fit.history } else { Vec::new() },
            })
        })
        .collect()
}

/// Loss curve of one fit as CSV; the arc-margin column is empty.
pub fn fit_loss_csv(history: &[LossRecord]) -> String {
    let mut out = format!("{LOSS_CSV_HEADER}\n");
    for r in history {
        let l = r.losses;
        writeln!(out, "{},{:?},{:?},{:?},{:?},", r.iter, l.total, l.chamfer, l.keypoint, l.consistency).unwrap();
    }
    out
}

/// Loss curve of head training as CSV; only the arc-margin column is filled.
pub fn train_loss_csv(report: &TrainReport) -> String {
    let mut out = format!("{LOSS_CSV_HEADER}\n");
    for (i, l) in report.losses.iter().enumerate() {
        writeln!(out, "{i},{l:?},,,,{l:?}").unwrap();
    }
    out
}

/// Subject labels in first-seen order, and the labelled training samples.
pub fn training_samples(fits: &[FitRecord], role: Role) -> (Vec<String>, Vec<Sample>) {
    let mut labels: Vec<String> = Vec::new();
    let mut samples = Vec::new();
    for f in fits.iter().filter(|f| f.role == role) {
        let label = match labels.iter().position(|s| *s == f.subject_id) {
            Some(l) => l,
            None => {
                labels.push(f.subject_id.clone());
                labels.len() - 1
            }
        };
        samples.push(Sample {
            input: f.beta_mean.clone(),
            label,
        });
    }
    (labels, samples)
}

/// Trains the head on the windows of [`Role::Train`] sequences.
pub fn train_embedding(fits: &[FitRecord], cfg: &TrainConfig) -> Result<(EmbeddingHead, TrainReport)> {
    let (_, samples) = training_samples(fits, Role::Train);
    train_head(&samples, cfg)
}

pub fn embed_fits(head: &EmbeddingHead, fits: &[FitRecord]) -> Result<Vec<FeatureRecord>> {
    fits.iter()
        .map(|f| {
            Ok(FeatureRecord {
                subject_id: f.subject_id.clone(),
                sequence_id: f.sequence_id.clone(),
                role: f.role,
                window: f.window,
                view: f.median_view,
                feature: head.embed(&f.beta_mean)?.into_vec(),
            })
        })
        .collect()
}

/// Feature sets of one enrolment: the gallery merged per subject, and one
/// probe per probe sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Enrollment {
    pub gallery: Vec<(String, FeatureSet)>,
    pub probes: Vec<Probe>,
}

impl Enrollment {
    pub fn protocol(&self) -> Result<Protocol> {
        Protocol::new(self.gallery.clone(), self.probes.clone())
    }
}

fn sets_per_sequence(
    features: &[FeatureRecord],
    role: Role,
    method: &Aggregation,
    bins: &ViewBinConfig,
) -> Result<Vec<(String, String, FeatureSet)>> {
    // sequence -> (subject, windows)
    type Windows = Vec<(Vec<f64>, ViewAngles)>;
    let mut grouped: BTreeMap<&str, (&str, Windows)> = BTreeMap::new();
    for f in features.iter().filter(|f| f.role == role) {
        grouped
            .entry(&f.sequence_id)
            .or_insert((&f.subject_id, Vec::new()))
            .1
            .push((f.feature.clone(), f.view));
    }
    grouped
        .into_iter()
        .map(|(seq, (subject, list))| Ok((seq.to_string(), subject.to_string(), aggregate(&list, method, bins)?)))
        .collect()
}

/// Aggregates gallery windows per sequence and merges them per subject;
/// aggregates each probe sequence on its own.
pub fn enroll(features: &[FeatureRecord], method: &Aggregation, bins: &ViewBinConfig) -> Result<Enrollment> {
    let mut per_subject: BTreeMap<String, Vec<FeatureSet>> = BTreeMap::new();
    for (_, subject, set) in sets_per_sequence(features, Role::Gallery, method, bins)? {
        per_subject.entry(subject).or_default().push(set);
    }
    let gallery = per_subject
        .into_iter()
        .map(|(s, sets)| Ok((s, merge(&sets)?)))
        .collect::<Result<Vec<_>>>()?;
    let probes = sets_per_sequence(features, Role::Probe, method, bins)?
        .into_iter()
        .map(|(id, subject, set)| Probe { id, subject, set })
        .collect();
    Ok(Enrollment { gallery, probes })
}

/// Writes records as NDJSON.
pub fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads NDJSON records, skipping (and counting) lines that do not parse.
pub fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Vec<T>, usize)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.push(r),
            Err(e) => {
                log::warn!("{}:{}: skipping record: {e}", path.display(), n + 1);
                skipped += 1;
            }
        }
    }
    Ok((out, skipped))
}

/// Everything an end-to-end run needs besides the dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fit: FitConfig,
    pub train: TrainConfig,
    pub aggregation: Aggregation,
    pub bins: ViewBinConfig,
}

/// Fit, train, embed and enroll in memory, returning the protocol together
/// with the intermediate products.
pub struct PipelineRun {
    pub fits: Vec<FitRecord>,
    pub head: EmbeddingHead,
    pub training: TrainReport,
    pub features: Vec<FeatureRecord>,
    pub enrollment: Enrollment,
}

pub fn run_pipeline(dataset: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<PipelineRun> {
    let fits = fit_dataset(dataset, &[Role::Train, Role::Gallery, Role::Probe], &cfg.fit, seed, false)?;
    run_from_fits(fits, &cfg.train, &cfg.aggregation, &cfg.bins)
}

pub fn run_from_fits(fits: Vec<FitRecord>, train: &TrainConfig, method: &Aggregation, bins: &ViewBinConfig) -> Result<PipelineRun> {
    let (head, training) = train_embedding(&fits, train)?;
    let features = embed_fits(&head, &fits)?;
    let enrollment = enroll(&features, method, bins)?;
    Ok(PipelineRun {
        fits,
        head,
        training,
        features,
        enrollment,
    })
}
