//! Linear embedding head trained with the arc-margin loss, mapping fitted
//! shape vectors to unit identity features.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::losses::{arc_margin_loss, ArcMarginConfig};
use crate::optim::{Adam, AdamConfig};

pub const HEAD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub arc: ArcMarginConfig,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            epochs: 1000,
            lr: 0.01,
            seed: 0,
            arc: ArcMarginConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 {
            return Err(Error::Config("embedding dimension must be at least 2".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        self.arc.validate()?;
        self.adam.validate()
    }
}

/// Unit-norm identity feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdFeature(pub Vec<f64>);

impl IdFeature {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Bias-free linear map `W` (D_emb × D_in) plus per-class weight rows used
/// only during training.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingHead {
    w: DMatrix<f64>,
    class_w: Vec<Vec<f64>>,
    cfg: TrainConfig,
}

/// One labelled training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss before each epoch's update, then once more after the last.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least the initial loss is recorded")
    }
}

impl EmbeddingHead {
    pub fn new(w: DMatrix<f64>, class_w: Vec<Vec<f64>>, cfg: TrainConfig) -> Result<Self> {
        if w.nrows() < 2 {
            return Err(Error::Config("embedding dimension must be at least 2".into()));
        }
        for row in &class_w {
            check_len("class weight row", w.nrows(), row.len())?;
        }
        if w.iter().chain(class_w.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::Format("embedding head has non-finite weights".into()));
        }
        Ok(Self { w, class_w, cfg })
    }

    /// Random head: `W` entries from N(0, 1/D_in), class rows from N(0, 1).
    pub fn random(input_dim: usize, classes: usize, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let wn = Normal::new(0.0, (1.0 / input_dim as f64).sqrt()).expect("positive sigma");
        let w = DMatrix::from_fn(cfg.embed_dim, input_dim, |_, _| wn.sample(&mut rng));
        let cn = Normal::new(0.0, 1.0).expect("positive sigma");
        let class_w = (0..classes)
            .map(|_| (0..cfg.embed_dim).map(|_| cn.sample(&mut rng)).collect())
            .collect();
        Self::new(w, class_w, cfg)
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn embed_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn class_weights(&self) -> &[Vec<f64>] {
        &self.class_w
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_len("shape feature", self.input_dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("shape feature has non-finite entries".into()));
        }
        Ok(&self.w * DVector::from_column_slice(x))
    }

    /// `normalize(W·x)`.
    pub fn embed(&self, x: &[f64]) -> Result<IdFeature> {
        let e = self.project(x)?;
        let n = e.norm();
        if !(n > 1e-12) {
            return Err(Error::ZeroNorm("embedding output".into()));
        }
        Ok(IdFeature((e / n).iter().copied().collect()))
    }

    /// Class whose weight row has the highest cosine with the embedding.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let e = self.embed(x)?;
        let mut best = (0, f64::NEG_INFINITY);
        for (c, row) in self.class_w.iter().enumerate() {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos = row.iter().zip(e.as_slice()).map(|(a, b)| a * b).sum::<f64>() / n;
            if cos > best.1 {
                best = (c, cos);
            }
        }
        Ok(best.0)
    }

    /// Mean arc-margin loss over `data` and its gradient, laid out as `W`
    /// (column-major) followed by the class rows.
    pub fn loss_and_grad(&self, data: &[Sample]) -> Result<(f64, Vec<f64>)> {
        let d = self.embed_dim();
        let nw = d * self.input_dim();
        let mut grad = vec![0.0; nw + self.class_w.len() * d];
        let mut total = 0.0;
        for s in data {
            let e = self.project(&s.input)?;
            let loss = arc_margin_loss(e.as_slice(), &self.class_w, s.label, &self.cfg.arc)?;
            total += loss.value;
            let de = loss.grad("embedding");
            for (c, xc) in s.input.iter().enumerate() {
                for (r, g) in de.iter().enumerate() {
                    grad[c * d + r] += g * xc;
                }
            }
            for (g, dc) in grad[nw..].iter_mut().zip(loss.grad("class_weights")) {
                *g += dc;
            }
        }
        let n = data.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }

    fn params(&self) -> Vec<f64> {
        self.w.iter().chain(self.class_w.iter().flatten()).copied().collect()
    }

    fn set_params(&mut self, p: &[f64]) {
        let nw = self.w.len();
        self.w.copy_from_slice(&p[..nw]);
        let d = self.embed_dim();
        for (row, chunk) in self.class_w.iter_mut().zip(p[nw..].chunks(d)) {
            row.copy_from_slice(chunk);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HeadFile {
            version: HEAD_FORMAT_VERSION,
            w: self.w.row_iter().map(|r| r.iter().copied().collect()).collect(),
            class_w: self.class_w.clone(),
            cfg: self.cfg,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HeadFile = serde_json::from_str(text)?;
        if file.version != HEAD_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported head version {} (expected {HEAD_FORMAT_VERSION})",
                file.version
            )));
        }
        let rows = file.w.len();
        let cols = file.w.first().map_or(0, Vec::len);
        for r in &file.w {
            check_len("head weight columns", cols, r.len())?;
        }
        let w = DMatrix::from_fn(rows, cols, |r, c| file.w[r][c]);
        Self::new(w, file.class_w, file.cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadFile {
    version: u32,
    w: Vec<Vec<f64>>,
    class_w: Vec<Vec<f64>>,
    cfg: TrainConfig,
}

/// Full-batch Adam on the mean arc-margin loss. Labels must be `0..C`.
pub fn train_head(data: &[Sample], cfg: &TrainConfig) -> Result<(EmbeddingHead, TrainReport)> {
    cfg.validate()?;
    let first = data.first().ok_or_else(|| Error::Empty("training samples".into()))?;
    let input_dim = first.input.len();
    let classes = data.iter().map(|s| s.label).max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(Error::Config("training needs at least two classes".into()));
    }
    let mut counts = vec![0usize; classes];
    for s in data {
        check_len("shape feature", input_dim, s.input.len())?;
        counts[s.label] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::Config(format!("class {c} has fewer than two samples")));
    }

    let mut head = EmbeddingHead::random(input_dim, classes, *cfg)?;
    let mut params = head.params();
    let mut adam = Adam::new(cfg.adam, vec![cfg.lr; params.len()]);
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, grad) = head.loss_and_grad(data)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration: epoch });
        }
        losses.push(loss);
        if epoch == cfg.epochs {
            break;
        }
        adam.step(&mut params, &grad, 1.0)?;
        head.set_params(&params);
        log::trace!("epoch {epoch}: loss {loss:.6}");
    }
    Ok((head, TrainReport { losses }))
}

#[cfg(test)]
mod tests;
