//! View-binned feature sets: aggregation of subsequence features into yaw
//! bins, occupancy-weighted merging, and set-to-set matching.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::body::ViewAngles;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewBinConfig {
    pub n_yaw: usize,
}

impl Default for ViewBinConfig {
    fn default() -> Self {
        Self { n_yaw: 1 }
    }
}

impl ViewBinConfig {
    pub fn new(n_yaw: usize) -> Result<Self> {
        if n_yaw == 0 {
            return Err(Error::Config("at least one yaw bin is required".into()));
        }
        Ok(Self { n_yaw })
    }

    pub fn width(&self) -> f64 {
        2.0 * PI / self.n_yaw as f64
    }
}

/// Bin of `yaw` when `n_yaw` equal bins tile the circle with bin 0 centred on
/// yaw 0. Bins are closed on their lower edge.
pub fn yaw_bin(yaw: f64, cfg: &ViewBinConfig) -> usize {
    if cfg.n_yaw <= 1 {
        return 0;
    }
    let w = cfg.width();
    let shifted = (yaw + w / 2.0).rem_euclid(2.0 * PI);
    ((shifted / w).floor() as usize).min(cfg.n_yaw - 1)
}

/// Angle between two unit vectors, `arccos(a·b)` in `[0, π]`.
///
/// Evaluated as `2·atan2(‖a−b‖, ‖a+b‖)`, which stays accurate near 0 and π
/// where `arccos` of a rounded dot product does not; identical vectors give
/// exactly 0.
pub fn angular_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

fn normalized(v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 1e-12) {
        return Err(Error::ZeroNorm(what.to_string()));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

fn weighted_mean<'a>(items: impl IntoIterator<Item = (&'a [f64], f64)>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut total = 0.0;
    for (f, w) in items {
        if acc.is_empty() {
            acc = vec![0.0; f.len()];
        }
        for (a, x) in acc.iter_mut().zip(f) {
            *a += w * x;
        }
        total += w;
    }
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Linearly interpolated quantile of unsorted data, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    /// Mean of the inliers: features whose median angular distance to the
    /// other features of the bin lies strictly below the `percentile`
    /// quantile of all pairwise distances in that bin.
    Best { percentile: f64 },
}

impl Aggregation {
    pub const DEFAULT_BEST_PERCENTILE: f64 = 0.9;

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "best" => Ok(Self::Best {
                percentile: Self::DEFAULT_BEST_PERCENTILE,
            }),
            other => Err(Error::Config(format!("unknown aggregation {other:?} (mean, median, best)"))),
        }
    }

    fn combine(&self, feats: &[&[f64]]) -> Result<Vec<f64>> {
        let raw = match *self {
            Self::Mean => weighted_mean(feats.iter().map(|f| (*f, 1.0))),
            Self::Median => (0..feats[0].len())
                .map(|c| median_of(&mut feats.iter().map(|f| f[c]).collect::<Vec<_>>()))
                .collect(),
            Self::Best { percentile } => {
                let inliers = best_inliers(feats, percentile);
                if inliers.is_empty() {
                    weighted_mean(feats.iter().map(|f| (*f, 1.0)))
                } else {
                    weighted_mean(inliers.iter().map(|&i| (feats[i], 1.0)))
                }
            }
        };
        normalized(raw, "aggregated feature")
    }
}

/// Indices of the features kept by [`Aggregation::Best`].
pub fn best_inliers(feats: &[&[f64]], percentile: f64) -> Vec<usize> {
    let n = feats.len();
    if n < 2 {
        return (0..n).collect();
    }
    let mut dist = vec![vec![0.0; n]; n];
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = angular_distance(feats[i], feats[j]);
            dist[i][j] = d;
            dist[j][i] = d;
            pairs.push(d);
        }
    }
    let threshold = quantile(&pairs, percentile);
    (0..n)
        .filter(|&i| {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).collect();
            median_of(&mut others) < threshold
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureBin {
    pub occupancy: usize,
    /// Unit vector, present exactly when `occupancy > 0`.
    pub feature: Option<Vec<f64>>,
}

/// Per-bin features and occupancies of one enrolment or probe.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    cfg: ViewBinConfig,
    bins: Vec<FeatureBin>,
    /// Occupancy-weighted mean of the merged unit features before
    /// normalization, so that merging composes exactly.
    means: Vec<Option<Vec<f64>>>,
}

impl FeatureSet {
    pub fn new(cfg: ViewBinConfig, bins: Vec<FeatureBin>) -> Result<Self> {
        if bins.len() != cfg.n_yaw {
            return Err(Error::Shape {
                what: "feature bins",
                expected: cfg.n_yaw,
                got: bins.len(),
            });
        }
        let mut dim = None;
        for (i, b) in bins.iter().enumerate() {
            match (&b.feature, b.occupancy) {
                (None, 0) => {}
                (Some(f), o) if o > 0 => {
                    if *dim.get_or_insert(f.len()) != f.len() {
                        return Err(Error::Format(format!("bin {i} feature has a different length")));
                    }
                    let n = f.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if (n - 1.0).abs() > 1e-6 {
                        return Err(Error::Format(format!("bin {i} feature is not unit length ({n})")));
                    }
                }
                _ => return Err(Error::Format(format!("bin {i}: occupancy and feature disagree"))),
            }
        }
        let means = bins.iter().map(|b| b.feature.clone()).collect();
        Ok(Self { cfg, bins, means })
    }

    pub fn config(&self) -> ViewBinConfig {
        self.cfg
    }

    pub fn bins(&self) -> &[FeatureBin] {
        &self.bins
    }

    pub fn occupancies(&self) -> Vec<usize> {
        self.bins.iter().map(|b| b.occupancy).collect()
    }

    pub fn total_occupancy(&self) -> usize {
        self.bins.iter().map(|b| b.occupancy).sum()
    }

    fn occupied(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.bins
            .iter()
            .filter_map(|b| b.feature.as_deref().map(|f| (f, b.occupancy)))
    }

    /// Occupancy-weighted mean of all occupied bins.
    pub fn collapse(&self) -> Result<Vec<f64>> {
        if self.total_occupancy() == 0 {
            return Err(Error::Unoccupied);
        }
        normalized(
            weighted_mean(self.occupied().map(|(f, o)| (f, o as f64))),
            "collapsed feature set",
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FeatureSetFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FeatureSetFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinRecord {
    idx: usize,
    occupancy: usize,
    feature: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSetFile {
    cfg: ViewBinConfig,
    bins: Vec<BinRecord>,
}

impl From<&FeatureSet> for FeatureSetFile {
    fn from(s: &FeatureSet) -> Self {
        Self {
            cfg: s.cfg,
            bins: s
                .bins
                .iter()
                .enumerate()
                .filter_map(|(idx, b)| {
                    b.feature.as_ref().map(|f| BinRecord {
                        idx,
                        occupancy: b.occupancy,
                        feature: f.clone(),
                    })
                })
                .collect(),
        }
    }
}

impl TryFrom<FeatureSetFile> for FeatureSet {
    type Error = Error;

    fn try_from(file: FeatureSetFile) -> Result<Self> {
        let cfg = ViewBinConfig::new(file.cfg.n_yaw)?;
        let mut bins = vec![FeatureBin::default(); cfg.n_yaw];
        for r in file.bins {
            let slot = bins
                .get_mut(r.idx)
                .ok_or_else(|| Error::Format(format!("bin index {} out of range", r.idx)))?;
            if slot.occupancy > 0 {
                return Err(Error::Format(format!("bin {} listed twice", r.idx)));
            }
            *slot = FeatureBin {
                occupancy: r.occupancy,
                feature: Some(r.feature),
            };
        }
        FeatureSet::new(cfg, bins)
    }
}

/// Groups features by yaw bin and combines each group.
pub fn aggregate(features: &[(Vec<f64>, ViewAngles)], method: &Aggregation, cfg: &ViewBinConfig) -> Result<FeatureSet> {
    if features.is_empty() {
        return Err(Error::Empty("features to aggregate".into()));
    }
    let mut groups: Vec<Vec<&[f64]>> = vec![Vec::new(); cfg.n_yaw];
    for (f, view) in features {
        groups[yaw_bin(view.yaw, cfg)].push(f);
    }
    let bins = groups
        .iter()
        .map(|g| {
            Ok(if g.is_empty() {
                FeatureBin::default()
            } else {
                FeatureBin {
                    occupancy: g.len(),
                    feature: Some(method.combine(g)?),
                }
            })
        })
        .collect::<Result<_>>()?;
    FeatureSet::new(*cfg, bins)
}

/// Occupancy-weighted per-bin combination of several sets.
pub fn merge(sets: &[FeatureSet]) -> Result<FeatureSet> {
    let first = sets.first().ok_or_else(|| Error::Empty("feature sets to merge".into()))?;
    if let Some(other) = sets.iter().find(|s| s.cfg != first.cfg) {
        return Err(Error::MixedBins(first.cfg.n_yaw, other.cfg.n_yaw));
    }
    let bins = (0..first.cfg.n_yaw)
        .map(|i| {
            let parts: Vec<(&[f64], f64)> = sets
                .iter()
                .filter_map(|s| s.means[i].as_deref().map(|m| (m, s.bins[i].occupancy as f64)))
                .collect();
            Ok(if parts.is_empty() {
                (FeatureBin::default(), None)
            } else {
                let mean = weighted_mean(parts);
                let bin = FeatureBin {
                    occupancy: sets.iter().map(|s| s.bins[i].occupancy).sum(),
                    feature: Some(normalized(mean.clone(), "merged feature")?),
                };
                (bin, Some(mean))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (bins, means) = bins.into_iter().unzip();
    let mut merged = FeatureSet::new(first.cfg, bins)?;
    merged.means = means;
    Ok(merged)
}

/// The bin both sets are compared in: the highest product of occupancies,
/// lowest index on ties. `None` when no bin is occupied in both.
pub fn select_bin(a: &FeatureSet, b: &FeatureSet) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, (x, y)) in a.bins.iter().zip(&b.bins).enumerate() {
        let product = x.occupancy * y.occupancy;
        if product > 0 && best.is_none_or(|(_, p)| product > p) {
            best = Some((i, product));
        }
    }
    best.map(|(i, _)| i)
}

/// Angular distance between two feature sets; smaller is a better match.
pub fn match_distance(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.cfg != b.cfg {
        return Err(Error::MixedBins(a.cfg.n_yaw, b.cfg.n_yaw));
    }
    if a.total_occupancy() == 0 || b.total_occupancy() == 0 {
        return Err(Error::Unoccupied);
    }
    match select_bin(a, b) {
        Some(i) => Ok(angular_distance(
            a.bins[i].feature.as_deref().expect("occupied"),
            b.bins[i].feature.as_deref().expect("occupied"),
        )),
        None => Ok(angular_distance(&a.collapse()?, &b.collapse()?)),
    }
}

#[cfg(test)]
mod tests;
