//! Command-line front end: argument parsing and the subcommands that move
//! artifacts between the pipeline stages on disk.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 3 for data
//! and runtime errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::aggregation::{Aggregation, FeatureSet, ViewBinConfig};
use crate::body::ModelConfig;
use crate::dataset::{create_dir, plan_dataset, read_dataset, synthesize, write_dataset, write_text, ProtocolConfig, Role};
use crate::embedding::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_scores, score_matrix, EvalReport, Probe, Protocol, DEFAULT_FAR_LEVELS, DEFAULT_RANKS};
use crate::fitter::FitConfig;
use crate::pipeline::{
    embed_fits, enroll, fit_dataset, fit_loss_csv, read_ndjson, train_embedding, train_loss_csv, write_ndjson, FeatureRecord,
    FitRecord,
};
use crate::synth::SynthConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bodyid", version, about = "Body-shape biometrics on synthetic gallery/probe data")]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory that receives the command's outputs.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// JSON file overriding default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic population, its sequences and a manifest.
    Synth(SynthArgs),
    /// Fit the body model to every window of a dataset.
    Fit(FitArgs),
    /// Train the embedding head on training fits and embed all fits.
    EmbedTrain(EmbedTrainArgs),
    /// Aggregate features into gallery and probe feature sets.
    Enroll(EnrollArgs),
    /// Score probe feature sets against gallery feature sets.
    Match(MatchArgs),
    /// Evaluate an enrolled protocol: CMC, ROC and TAR at fixed FAR.
    Eval(EvalArgs),
    /// Re-emit the CSV and JSON bundle of an evaluation report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Evaluation subjects (gallery and probe).
    #[arg(long)]
    pub subjects: Option<usize>,
    /// Subjects reserved for training the embedding head.
    #[arg(long)]
    pub train_subjects: Option<usize>,
    /// Frames per sequence.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Effective resolution of field sequences.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Probes seen from the elevated camera.
    #[arg(long)]
    pub probe_pitch: bool,
    /// Extra elevated training sequences.
    #[arg(long)]
    pub train_pitch: bool,
    /// No keypoint noise and no pose motion.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Drop the silhouette term from the objective.
    #[arg(long)]
    pub keypoint_only: bool,
}

#[derive(Debug, Args)]
pub struct EmbedTrainArgs {
    /// Fits written by `fit`.
    #[arg(long)]
    pub fits: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    /// Features written by `embed-train`.
    #[arg(long)]
    pub features: PathBuf,
    /// mean, median or best.
    #[arg(long)]
    pub agg: Option<String>,
    #[arg(long)]
    pub yaw_bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// A feature-set JSON file or a directory of them.
    #[arg(long)]
    pub probe: PathBuf,
    /// A feature-set JSON file or a directory of them.
    #[arg(long)]
    pub gallery: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Protocol manifest written by `enroll`.
    #[arg(long)]
    pub protocol: PathBuf,
    /// Comma-separated CMC ranks.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    /// Comma-separated FAR levels.
    #[arg(long, value_delimiter = ',')]
    pub far: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `report.json` written by `eval`.
    #[arg(long)]
    pub report: PathBuf,
}

/// Settings a `--config` file may override. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub synth: SynthConfig,
    pub protocol: ProtocolConfig,
    pub fit: FitConfig,
    pub train: TrainConfig,
    pub aggregation: Aggregation,
    pub bins: ViewBinConfig,
    pub ranks: Option<Vec<usize>>,
    pub far_levels: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.synth.validate()?;
        self.protocol.validate()?;
        self.fit.validate()?;
        self.train.validate()?;
        ViewBinConfig::new(self.bins.n_yaw)?;
        Ok(())
    }
}

/// Protocol manifest: feature-set files per gallery subject and per probe,
/// relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolManifest {
    pub bins: ViewBinConfig,
    pub aggregation: Aggregation,
    pub gallery: Vec<GalleryFile>,
    pub probes: Vec<ProbeFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalleryFile {
    pub subject: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFile {
    pub id: String,
    pub subject: String,
    pub file: String,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    cli.out_dir
        .as_deref()
        .ok_or_else(|| Error::Config("--out-dir is required for this command".into()))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, &mut cfg, a),
        Command::Fit(a) => cmd_fit(cli, &mut cfg, a),
        Command::EmbedTrain(a) => cmd_embed_train(cli, &mut cfg, a),
        Command::Enroll(a) => cmd_enroll(cli, &mut cfg, a),
        Command::Match(a) => cmd_match(cli, a),
        Command::Eval(a) => cmd_eval(cli, &cfg, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

fn cmd_synth(cli: &Cli, cfg: &mut RunConfig, a: &SynthArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let p = &mut cfg.protocol;
    if let Some(n) = a.subjects {
        p.eval_subjects = n;
    }
    if let Some(n) = a.train_subjects {
        p.train_subjects = n;
    }
    if let Some(n) = a.frames {
        p.frames = n;
    }
    if let Some(s) = a.resolution {
        p.field_resolution = s;
    }
    p.probe_pitch |= a.probe_pitch;
    p.train_pitch |= a.train_pitch;
    p.noiseless |= a.noiseless;
    let plan = plan_dataset(&cfg.model, &cfg.synth, &cfg.protocol, cli.seed)?;
    let dataset = synthesize(&plan)?;
    let manifest = write_dataset(&dataset, dir)?;
    log::info!("wrote {} sequences to {}", manifest.sequences.len(), dir.display());
    Ok(())
}

fn cmd_fit(cli: &Cli, cfg: &mut RunConfig, a: &FitArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    if let Some(n) = a.seq_len {
        cfg.fit.seq_len = n;
    }
    if let Some(n) = a.max_iters {
        cfg.fit.max_iters = n;
    }
    if a.keypoint_only {
        cfg.fit.weights.chamfer = 0.0;
    }
    cfg.fit.validate()?;
    let (dataset, skipped) = read_dataset(&a.dataset)?;
    let fits = fit_dataset(&dataset, &[Role::Train, Role::Gallery, Role::Probe], &cfg.fit, cli.seed, true)?;
    create_dir(&dir.join("losses"))?;
    for f in &fits {
        let name = format!("{}-{}-{}.csv", f.sequence_id, f.window[0], f.window[1]);
        write_text(&dir.join("losses").join(name), &fit_loss_csv(&f.history))?;
    }
    let slim: Vec<FitRecord> = fits
        .into_iter()
        .map(|f| FitRecord {
            history: Vec::new(),
            ..f
        })
        .collect();
    write_ndjson(&dir.join("fits.ndjson"), &slim)?;
    let converged = slim.iter().filter(|f| f.converged).count();
    eprintln!(
        "fit: {} windows ({converged} converged), {skipped} corrupt frame lines skipped",
        slim.len()
    );
    Ok(())
}

fn cmd_embed_train(cli: &Cli, cfg: &mut RunConfig, a: &EmbedTrainArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    if let Some(n) = a.epochs {
        cfg.train.epochs = n;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    cfg.train.seed = cli.seed;
    cfg.train.validate()?;
    let (fits, skipped): (Vec<FitRecord>, usize) = read_ndjson(&a.fits)?;
    let (head, report) = train_embedding(&fits, &cfg.train)?;
    create_dir(&dir.join("losses"))?;
    head.save(&dir.join("head.json"))?;
    write_text(&dir.join("losses").join("embed.csv"), &train_loss_csv(&report))?;
    let features = embed_fits(&head, &fits)?;
    write_ndjson(&dir.join("features.ndjson"), &features)?;
    eprintln!(
        "embed-train: loss {:.4} -> {:.4}, {} features, {skipped} corrupt fit lines skipped",
        report.initial_loss(),
        report.final_loss(),
        features.len()
    );
    Ok(())
}

fn file_stem_id(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cmd_enroll(cli: &Cli, cfg: &mut RunConfig, a: &EnrollArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    if let Some(name) = &a.agg {
        cfg.aggregation = Aggregation::parse(name)?;
    }
    if let Some(n) = a.yaw_bins {
        cfg.bins = ViewBinConfig::new(n)?;
    }
    let (features, skipped): (Vec<FeatureRecord>, usize) = read_ndjson(&a.features)?;
    let enrollment = enroll(&features, &cfg.aggregation, &cfg.bins)?;
    create_dir(&dir.join("gallery"))?;
    create_dir(&dir.join("probes"))?;
    let mut gallery = Vec::new();
    for (subject, set) in &enrollment.gallery {
        let file = format!("gallery/{}.json", file_stem_id(subject));
        write_text(&dir.join(&file), &set.to_json()?)?;
        gallery.push(GalleryFile {
            subject: subject.clone(),
            file,
        });
    }
    let mut probes = Vec::new();
    for p in &enrollment.probes {
        let file = format!("probes/{}.json", file_stem_id(&p.id));
        write_text(&dir.join(&file), &p.set.to_json()?)?;
        probes.push(ProbeFile {
            id: p.id.clone(),
            subject: p.subject.clone(),
            file,
        });
    }
    let manifest = ProtocolManifest {
        bins: cfg.bins,
        aggregation: cfg.aggregation,
        gallery,
        probes,
    };
    write_text(&dir.join("protocol.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    eprintln!(
        "enroll: {} gallery subjects, {} probes, {skipped} corrupt feature lines skipped",
        manifest.gallery.len(),
        manifest.probes.len()
    );
    Ok(())
}

fn read_set(path: &Path) -> Result<FeatureSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeatureSet::from_json(&text)
}

/// `(id, set)` pairs from a feature-set file or a directory of them, sorted
/// by file name.
fn read_sets(path: &Path) -> Result<Vec<(String, FeatureSet)>> {
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files.iter().map(|f| Ok((stem(f), read_set(f)?))).collect()
    } else {
        Ok(vec![(stem(path), read_set(path)?)])
    }
}

fn check_bins(sets: &[(String, FeatureSet)], other: &[(String, FeatureSet)]) -> Result<()> {
    if let Some((_, first)) = sets.first() {
        let n = first.config().n_yaw;
        if let Some((_, bad)) = sets.iter().chain(other).find(|(_, s)| s.config().n_yaw != n) {
            return Err(Error::MixedBins(n, bad.config().n_yaw));
        }
    }
    Ok(())
}

fn cmd_match(cli: &Cli, a: &MatchArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let probes = read_sets(&a.probe)?;
    let gallery = read_sets(&a.gallery)?;
    if probes.is_empty() || gallery.is_empty() {
        return Err(Error::Empty("feature sets to match".into()));
    }
    check_bins(&probes, &gallery)?;
    // Probe ids double as their subject so that any shared id scores as genuine.
    let protocol = Protocol::new(
        gallery,
        probes
            .into_iter()
            .map(|(id, set)| Probe {
                subject: id.clone(),
                id,
                set,
            })
            .collect(),
    )?;
    let scores = score_matrix(&protocol)?;
    create_dir(dir)?;
    write_text(&dir.join("scores.csv"), &scores.to_csv())?;
    eprintln!("match: {} x {} scores", scores.probes.len(), scores.gallery.len());
    Ok(())
}

/// Loads the protocol listed in a manifest written by `enroll`.
pub fn load_protocol(path: &Path) -> Result<Protocol> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: ProtocolManifest = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let gallery: Vec<(String, FeatureSet)> = manifest
        .gallery
        .iter()
        .map(|g| Ok((g.subject.clone(), read_set(&base.join(&g.file))?)))
        .collect::<Result<_>>()?;
    let probes: Vec<Probe> = manifest
        .probes
        .iter()
        .map(|p| {
            Ok(Probe {
                id: p.id.clone(),
                subject: p.subject.clone(),
                set: read_set(&base.join(&p.file))?,
            })
        })
        .collect::<Result<_>>()?;
    let probe_sets: Vec<(String, FeatureSet)> = probes.iter().map(|p| (p.id.clone(), p.set.clone())).collect();
    check_bins(&gallery, &probe_sets)?;
    Protocol::new(gallery, probes)
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    create_dir(dir)?;
    write_text(&dir.join("report.json"), &(report.to_json()? + "\n"))?;
    write_text(&dir.join("cmc.csv"), &report.cmc_csv())?;
    write_text(&dir.join("roc.csv"), &report.roc_csv())
}

fn summary(report: &EvalReport) -> String {
    let mut parts: Vec<String> = report.cmc.iter().map(|p| format!("rank{} {:.3}", p.rank, p.accuracy)).collect();
    parts.extend(report.tar_at_far.iter().map(|p| format!("TAR@FAR={} {:.3}", p.far, p.tar)));
    parts.join(", ")
}

fn cmd_eval(cli: &Cli, cfg: &RunConfig, a: &EvalArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let ranks = a.ranks.clone().or_else(|| cfg.ranks.clone()).unwrap_or(DEFAULT_RANKS.to_vec());
    let fars = a.far.clone().or_else(|| cfg.far_levels.clone()).unwrap_or(DEFAULT_FAR_LEVELS.to_vec());
    if ranks.is_empty() || ranks.contains(&0) {
        return Err(Error::Config("ranks must be positive".into()));
    }
    if let Some(f) = fars.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(Error::Config(format!("FAR level {f} outside (0, 1)")));
    }
    let protocol = load_protocol(&a.protocol)?;
    let scores = score_matrix(&protocol)?;
    let report = evaluate_scores(&scores, &protocol.truth(), &ranks, &fars)?;
    write_report(dir, &report)?;
    write_text(&dir.join("scores.csv"), &scores.to_csv())?;
    eprintln!("eval: {}", summary(&report));
    Ok(())
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let text = fs::read_to_string(&a.report).map_err(|e| Error::io(&a.report, e))?;
    let report = EvalReport::from_json(&text)?;
    write_report(dir, &report)?;
    println!("{}", summary(&report));
    Ok(())
}
