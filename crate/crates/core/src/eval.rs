//! Gallery/probe evaluation: score matrices, CMC rank accuracies, ROC and
//! true-accept rate at fixed false-accept rates.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{match_distance, FeatureSet};
use crate::error::{Error, Result};

pub const DEFAULT_RANKS: [usize; 4] = [1, 5, 10, 20];
pub const DEFAULT_FAR_LEVELS: [f64; 2] = [0.01, 0.001];
/// Upper bound on the number of points written to an ROC curve.
pub const MAX_ROC_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: String,
    pub subject: String,
    pub set: FeatureSet,
}

/// Enrolled gallery subjects and the probes matched against them. Probes
/// whose subject is not enrolled act as confusers.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    gallery: Vec<(String, FeatureSet)>,
    probes: Vec<Probe>,
}

impl Protocol {
    pub fn new(gallery: Vec<(String, FeatureSet)>, probes: Vec<Probe>) -> Result<Self> {
        if gallery.is_empty() {
            return Err(Error::Empty("gallery".into()));
        }
        if probes.is_empty() {
            return Err(Error::Empty("probes".into()));
        }
        let mut seen = HashSet::new();
        for (id, set) in &gallery {
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!("gallery subject {id} enrolled twice")));
            }
            if set.total_occupancy() == 0 {
                return Err(Error::Format(format!("gallery subject {id} has no occupied bin")));
            }
        }
        if let Some(p) = probes.iter().find(|p| p.set.total_occupancy() == 0) {
            return Err(Error::Format(format!("probe {} has no occupied bin", p.id)));
        }
        Ok(Self { gallery, probes })
    }

    pub fn gallery(&self) -> &[(String, FeatureSet)] {
        &self.gallery
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    /// Gallery column of each probe's subject, `None` for confusers.
    pub fn truth(&self) -> Vec<Option<usize>> {
        self.probes
            .iter()
            .map(|p| self.gallery.iter().position(|(g, _)| *g == p.subject))
            .collect()
    }
}

/// Probe-by-gallery angular distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub probes: Vec<String>,
    pub gallery: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    /// Header row of gallery ids, then one row per probe.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("probe");
        for g in &self.gallery {
            write!(out, ",{g}").unwrap();
        }
        out.push('\n');
        for (p, row) in self.probes.iter().zip(&self.values) {
            out.push_str(p);
            for v in row {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn score_matrix(protocol: &Protocol) -> Result<ScoreMatrix> {
    let values = protocol
        .probes
        .par_iter()
        .map(|p| {
            protocol
                .gallery
                .iter()
                .map(|(g, set)| {
                    match_distance(&p.set, set).map_err(|e| Error::Match {
                        probe: p.id.clone(),
                        gallery: g.clone(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreMatrix {
        probes: protocol.probes.iter().map(|p| p.id.clone()).collect(),
        gallery: protocol.gallery.iter().map(|(g, _)| g.clone()).collect(),
        values,
    })
}

/// 1-based rank of column `truth` in `row`, ties going to the lower column.
pub fn rank_of(row: &[f64], truth: usize) -> usize {
    let t = row[truth];
    1 + row
        .iter()
        .enumerate()
        .filter(|&(g, &d)| d < t || (d == t && g < truth))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmcPoint {
    pub rank: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cmc {
    pub points: Vec<CmcPoint>,
    pub counted: usize,
    pub excluded: usize,
}

/// Fraction of probes whose true subject is among the `k` nearest gallery
/// entries, for each requested `k`. Probes without a gallery subject are
/// excluded and counted.
pub fn cmc(scores: &[Vec<f64>], truth: &[Option<usize>], ranks: &[usize]) -> Result<Cmc> {
    if scores.len() != truth.len() {
        return Err(Error::Shape {
            what: "probe truth labels",
            expected: scores.len(),
            got: truth.len(),
        });
    }
    if ranks.contains(&0) {
        return Err(Error::Config("ranks start at 1".into()));
    }
    let found: Vec<usize> = scores
        .iter()
        .zip(truth)
        .filter_map(|(row, t)| t.map(|t| rank_of(row, t)))
        .collect();
    let counted = found.len();
    if counted == 0 {
        return Err(Error::Empty("probes with an enrolled subject".into()));
    }
    let points = ranks
        .iter()
        .map(|&rank| CmcPoint {
            rank,
            accuracy: found.iter().filter(|&&r| r <= rank).count() as f64 / counted as f64,
        })
        .collect();
    Ok(Cmc {
        points,
        counted,
        excluded: truth.len() - counted,
    })
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn fraction_below(sorted_genuine: &[f64], threshold: f64) -> f64 {
    sorted_genuine.partition_point(|&d| d < threshold) as f64 / sorted_genuine.len() as f64
}

fn far_threshold(sorted_impostor: &[f64], far: f64) -> f64 {
    let k = ((far * sorted_impostor.len() as f64).floor() as usize).max(1);
    sorted_impostor[k - 1]
}

/// Fraction of genuine distances strictly below the `k`-th smallest impostor
/// distance, `k = max(⌊far·N⌋, 1)`.
pub fn tar_at_far(genuine: &[f64], impostor: &[f64], far: f64) -> Result<f64> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Empty("genuine or impostor distances".into()));
    }
    if !(far > 0.0 && far < 1.0) {
        return Err(Error::Config(format!("FAR must lie in (0, 1), got {far}")));
    }
    Ok(fraction_below(&sorted(genuine), far_threshold(&sorted(impostor), far)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub far: f64,
    pub tar: f64,
}

/// Operating points at thresholds equal to the `k`-th smallest impostor
/// distance, FAR = k/N, thinned to at most [`MAX_ROC_POINTS`].
pub fn roc(genuine: &[f64], impostor: &[f64]) -> Result<Vec<RocPoint>> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Empty("genuine or impostor distances".into()));
    }
    let g = sorted(genuine);
    let imp = sorted(impostor);
    let n = imp.len();
    let step = n.div_ceil(MAX_ROC_POINTS);
    let mut ks: Vec<usize> = (1..=n).step_by(step).collect();
    if ks.last() != Some(&n) {
        ks.push(n);
    }
    Ok(ks
        .into_iter()
        .map(|k| RocPoint {
            far: k as f64 / n as f64,
            tar: fraction_below(&g, imp[k - 1]),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub probes: usize,
    pub gallery: usize,
    pub counted_probes: usize,
    pub excluded_probes: usize,
    pub genuine: usize,
    pub impostor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub cmc: Vec<CmcPoint>,
    pub roc: Vec<RocPoint>,
    pub tar_at_far: Vec<RocPoint>,
    pub counts: Counts,
}

impl EvalReport {
    pub fn rank(&self, k: usize) -> Option<f64> {
        self.cmc.iter().find(|p| p.rank == k).map(|p| p.accuracy)
    }

    pub fn tar(&self, far: f64) -> Option<f64> {
        self.tar_at_far.iter().find(|p| p.far == far).map(|p| p.tar)
    }

    pub fn cmc_csv(&self) -> String {
        let mut out = String::from("rank,accuracy\n");
        for p in &self.cmc {
            writeln!(out, "{},{:?}", p.rank, p.accuracy).unwrap();
        }
        out
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("far,tar\n");
        for p in &self.roc {
            writeln!(out, "{:?},{:?}", p.far, p.tar).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Splits a score matrix into genuine distances (probe against its own
/// subject) and impostor distances (every other pair, confusers included).
pub fn split_scores(scores: &[Vec<f64>], truth: &[Option<usize>]) -> (Vec<f64>, Vec<f64>) {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (row, t) in scores.iter().zip(truth) {
        for (g, &d) in row.iter().enumerate() {
            if *t == Some(g) {
                genuine.push(d);
            } else {
                impostor.push(d);
            }
        }
    }
    (genuine, impostor)
}

pub fn evaluate_scores(scores: &ScoreMatrix, truth: &[Option<usize>], ranks: &[usize], far_levels: &[f64]) -> Result<EvalReport> {
    let curve = cmc(&scores.values, truth, ranks)?;
    let (genuine, impostor) = split_scores(&scores.values, truth);
    let tar_at_far = far_levels
        .iter()
        .map(|&far| Ok(RocPoint { far, tar: tar_at_far(&genuine, &impostor, far)? }))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        cmc: curve.points,
        roc: roc(&genuine, &impostor)?,
        tar_at_far,
        counts: Counts {
            probes: scores.probes.len(),
            gallery: scores.gallery.len(),
            counted_probes: curve.counted,
            excluded_probes: curve.excluded,
            genuine: genuine.len(),
            impostor: impostor.len(),
        },
    })
}

pub fn run_eval(protocol: &Protocol, ranks: &[usize], far_levels: &[f64]) -> Result<EvalReport> {
    let scores = score_matrix(protocol)?;
    evaluate_scores(&scores, &protocol.truth(), ranks, far_levels)
}
