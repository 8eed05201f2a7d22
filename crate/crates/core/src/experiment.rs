//! Configured workflows: window MSI over a dataset's videos, evaluation with
//! and without calibrated virtual data, and MSI cut-off sweeps.
//!
//! Every report embeds the resolved configuration and toolkit version, and
//! all randomness derives from the configured seeds, so the same config
//! produces byte-identical output files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{cutoff_sweep, SplineInput, SweepMode, SweepReport};
use crate::data::{
    load_flow_sequence, load_imu_csv, load_pose_track, resample_linear, write_imu_csv, DatasetManifest,
    FlowSequence, ImuSeries, Provenance,
};
use crate::error::{Error, Result};
use crate::flow::normalize_flow;
use crate::model::{f1_scores, per_class_f1, stratified_kfold, train_forest, F1Mode, ForestParams};
use crate::moments::{aggregate_moments, MomentParams};
use crate::msi::{class_msi_mode, video_windows, write_msi_csv, MsiParams, MsiWindow};
use crate::pipeline::{
    calibrate_pooled, segment, write_feature_csv, AxisStats, FeatureSet, FeatureWindow, RawWindow, WindowSpec,
};
use crate::rng::derive_seed;
use crate::{par, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Multi-class daily activities scored with macro F1.
    #[default]
    Daily,
    /// One positive class scored with binary F1 after moment aggregation.
    Eating,
    /// Macro F1 with an explicit window spec.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub n_knots: usize,
    pub spline_input: SplineInput,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            mode: SweepMode::IncludeVirtualOnly,
            n_knots: 5,
            spline_input: SplineInput::PerCutoff,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    #[serde(default)]
    pub task: Task,
    /// Defaults to 3 s / 1.5 s (daily) or 6 s / 3 s (eating) at 25 Hz.
    #[serde(default)]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub features: FeatureSet,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub moments: Option<MomentParams>,
    #[serde(default)]
    pub positive_class: Option<u32>,
    #[serde(default)]
    pub msi: MsiParams,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// One forest seed per run.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub fold_seed: u64,
    /// Add calibrated virtual data of every class to the training folds.
    #[serde(default)]
    pub augmented: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(manifest: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            manifest: manifest.into(),
            task: Task::Daily,
            window: None,
            features: FeatureSet::default(),
            forest: ForestParams::default(),
            moments: None,
            positive_class: None,
            msi: MsiParams::default(),
            sweep: SweepConfig::default(),
            seeds: default_seeds(),
            folds: default_folds(),
            fold_seed: 0,
            augmented: false,
            output_dir: None,
        }
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        if cfg.manifest.is_relative() {
            cfg.manifest = base.join(&cfg.manifest);
        }
        if let Some(out) = &cfg.output_dir {
            if out.is_relative() {
                cfg.output_dir = Some(base.join(out));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::ConfigInvalid(m.to_owned()));
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty");
        }
        if self.folds < 2 {
            return invalid("folds must be >= 2");
        }
        if self.task == Task::Eating && (self.moments.is_none() || self.positive_class.is_none()) {
            return invalid("task eating requires moments and positive_class");
        }
        if self.task == Task::Custom && self.window.is_none() {
            return invalid("task custom requires a window spec");
        }
        self.window_spec().validate()?;
        self.forest.validate()?;
        self.msi.validate()?;
        if let Some(m) = &self.moments {
            m.validate()?;
        }
        if let FeatureSet::Ecdf { points_per_axis } = self.features {
            if points_per_axis < 2 {
                return invalid("ecdf points_per_axis must be >= 2");
            }
        }
        Ok(())
    }

    pub fn window_spec(&self) -> WindowSpec {
        self.window.unwrap_or(match self.task {
            Task::Eating => WindowSpec::EATING,
            _ => WindowSpec::DAILY,
        })
    }

    fn binary(&self) -> Option<(u32, MomentParams)> {
        match self.task {
            Task::Eating => Some((self.positive_class?, self.moments?)),
            _ => None,
        }
    }

    pub fn metric_name(&self) -> &'static str {
        if self.task == Task::Eating {
            "binary_f1"
        } else {
            "macro_f1"
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            self.manifest
                .parent()
                .unwrap_or(Path::new("."))
                .join("out")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toolkit {
    pub name: String,
    pub version: String,
}

impl Toolkit {
    pub fn current() -> Self {
        Toolkit {
            name: "msihar".into(),
            version: crate::VERSION.into(),
        }
    }
}

/// A virtual series with the class it depicts.
#[derive(Debug, Clone)]
pub struct VirtualClip {
    pub class: u32,
    pub series: ImuSeries,
}

/// Manifest contents loaded and resampled to the window rate.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub real: Vec<ImuSeries>,
    pub virtual_clips: Vec<VirtualClip>,
}

impl Dataset {
    pub fn load(manifest_path: &Path, rate_hz: f64) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let mut real = Vec::new();
        let mut virtual_clips = Vec::new();
        for e in &manifest.imu {
            let mut s = load_imu_csv(&e.path, e.provenance)?;
            if let Some(subject) = &e.subject {
                s = s.with_subject_id(subject.clone());
            }
            if let Some(unit) = &e.unit {
                s = s.with_unit(unit.clone());
            }
            if e.source.is_some() {
                s = s.with_source_id(e.source.clone());
            }
            let s = resample_linear(&s, rate_hz)?;
            match e.provenance {
                Provenance::Real => real.push(s),
                Provenance::Virtual => {
                    let class = match e.source.as_deref().and_then(|id| manifest.video(id)) {
                        Some(v) => v.class,
                        None => majority(s.labels()),
                    };
                    virtual_clips.push(VirtualClip { class, series: s });
                }
            }
        }
        if real.is_empty() {
            return Err(Error::DataLoadFailed("manifest lists no real IMU data".into()));
        }
        Ok(Dataset {
            manifest,
            real,
            virtual_clips,
        })
    }
}

fn majority(labels: &[u32]) -> u32 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best = (0, 0);
    for (l, c) in counts {
        if c > best.1 {
            best = (l, c);
        }
    }
    best.0
}

/// Loads a flow sequence, normalizing it if stored in pixels.
pub fn load_normalized_flow(path: &Path, source_id: &str) -> Result<FlowSequence> {
    let seq = load_flow_sequence(path)?;
    let seq = if seq.is_normalized() {
        seq
    } else {
        let fps = seq.fps();
        let frames = seq.frames().iter().map(normalize_flow).collect::<Result<Vec<_>>>()?;
        FlowSequence::new(frames, fps, source_id)?
    };
    Ok(seq.with_source_id(source_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsiSummary {
    /// KDE mode of the window MSIs per class.
    pub class_cmsi: BTreeMap<u32, f64>,
    pub windows_per_class: BTreeMap<u32, usize>,
    /// Windows dropped for lack of usable keypoints.
    pub skipped: usize,
}

/// Window MSI over every video in the manifest.
pub fn compute_msi(
    manifest: &DatasetManifest,
    spec: &WindowSpec,
    params: &MsiParams,
) -> Result<(Vec<MsiWindow>, MsiSummary)> {
    let per_video = par::map(&manifest.videos, |v| -> Result<(Vec<MsiWindow>, usize)> {
        let seq = load_normalized_flow(&v.flow, &v.id)?;
        let pose = load_pose_track(&v.pose)?.with_target_joint(v.target_joint)?;
        video_windows(&seq, &pose, v.class, spec.length_s, spec.step_s, params)
    });
    let mut windows = Vec::new();
    let mut skipped = 0;
    for r in per_video {
        let (w, s) = r?;
        windows.extend(w);
        skipped += s;
    }
    let mut by_class: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for w in &windows {
        by_class.entry(w.class_id).or_default().push(w.msi);
    }
    let class_cmsi = by_class
        .iter()
        .map(|(&c, v)| Ok((c, class_msi_mode(v)?)))
        .collect::<Result<_>>()?;
    let windows_per_class = by_class.iter().map(|(&c, v)| (c, v.len())).collect();
    Ok((
        windows,
        MsiSummary {
            class_cmsi,
            windows_per_class,
            skipped,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary_f1: Option<f64>,
    pub per_class_f1: BTreeMap<u32, f64>,
    pub n_train_real: usize,
    pub n_train_virtual: usize,
    pub n_test: usize,
}

impl FoldResult {
    pub fn score(&self) -> f64 {
        self.macro_f1.or(self.binary_f1).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Mean over folds.
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub fold_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub metric: String,
    /// Mean over runs of the per-run fold means.
    pub mean: f64,
    /// Sample standard deviation of the run means.
    pub std_over_runs: f64,
    /// Sample standard deviation of the fold scores averaged over runs.
    pub std_over_folds: f64,
    /// Per-class F1 averaged over runs and folds.
    pub per_class_f1: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub toolkit: Toolkit,
    pub config: ExperimentConfig,
    pub augmented: bool,
    pub virtual_classes: Vec<u32>,
    pub runs: Vec<RunResult>,
    pub summary: EvalSummary,
}

struct RealWindow {
    recording: usize,
    raw: RawWindow,
    features: Vec<f64>,
}

/// Real windows, their features and the fold assignment, shared by every
/// evaluation of one experiment.
pub struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    spec: WindowSpec,
    data: &'a Dataset,
    real: Vec<RealWindow>,
    folds: Vec<Vec<usize>>,
}

struct Scored {
    score: f64,
    per_class: BTreeMap<u32, f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(cfg: &'a ExperimentConfig, data: &'a Dataset) -> Result<Self> {
        cfg.validate()?;
        if let Some(c) = cfg.positive_class {
            if !data.manifest.has_class(c) {
                return Err(Error::ConfigInvalid(format!("positive_class {c} is not in the manifest")));
            }
        }
        let spec = cfg.window_spec();
        let mut real = Vec::new();
        for (recording, series) in data.real.iter().enumerate() {
            let windows = segment(series, &spec)?;
            let features = par::map(&windows, |w| cfg.features.extract(w.samples(series)));
            for (raw, f) in windows.into_iter().zip(features) {
                if data.manifest.has_class(raw.label) {
                    real.push(RealWindow {
                        recording,
                        raw,
                        features: f?,
                    });
                }
            }
        }
        if real.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let labels: Vec<u32> = real.iter().map(|w| w.raw.label).collect();
        let folds = stratified_kfold(&labels, cfg.folds, cfg.fold_seed)?;
        Ok(Evaluator {
            cfg,
            spec,
            data,
            real,
            folds,
        })
    }

    pub fn n_real_windows(&self) -> usize {
        self.real.len()
    }

    /// Classes present among the real windows.
    pub fn classes(&self) -> BTreeSet<u32> {
        self.real.iter().map(|w| w.raw.label).collect()
    }

    fn virtual_training(&self, train: &[usize], classes: &BTreeSet<u32>) -> Result<(Vec<Vec<f64>>, Vec<u32>)> {
        let clips: Vec<&VirtualClip> = self
            .data
            .virtual_clips
            .iter()
            .filter(|c| classes.contains(&c.class))
            .collect();
        if clips.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        // calibrate against real training data of the same classes
        let reference = train
            .iter()
            .map(|&i| &self.real[i])
            .filter(|w| classes.contains(&w.raw.label))
            .flat_map(|w| w.raw.samples(&self.data.real[w.recording]));
        let target = AxisStats::of_samples(reference)?;
        let series: Vec<ImuSeries> = clips.iter().map(|c| c.series.clone()).collect();
        let calibrated = calibrate_pooled(&series, &target)?;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (clip, s) in clips.iter().zip(&calibrated) {
            let windows = match segment(s, &self.spec) {
                Ok(w) => w,
                Err(Error::SeriesTooShort { .. }) => continue,
                Err(e) => return Err(e),
            };
            for w in windows {
                x.push(self.cfg.features.extract(w.samples(s))?);
                y.push(clip.class);
            }
        }
        Ok((x, y))
    }

    /// Cross-validated scores with the task restricted to `task_classes`
    /// (all classes when `None`) and virtual data added for `virtual_classes`.
    pub fn evaluate(
        &self,
        task_classes: Option<&BTreeSet<u32>>,
        virtual_classes: &BTreeSet<u32>,
    ) -> Result<Vec<RunResult>> {
        let in_task = |c: u32| task_classes.is_none_or(|t| t.contains(&c));
        let virtual_classes: BTreeSet<u32> = virtual_classes.iter().copied().filter(|&c| in_task(c)).collect();
        let k = self.folds.len();
        let seeds = &self.cfg.seeds;

        // per fold: train once per seed, keep test indices and predictions
        let per_fold = par::try_map_range(k, |f| -> Result<_> {
            let train: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| self.folds[g].iter().copied())
                .filter(|&i| in_task(self.real[i].raw.label))
                .collect();
            let test: Vec<usize> = self.folds[f]
                .iter()
                .copied()
                .filter(|&i| in_task(self.real[i].raw.label))
                .collect();
            let (vx, vy) = self.virtual_training(&train, &virtual_classes)?;
            let n_virtual = vx.len();
            let mut x: Vec<Vec<f64>> = train.iter().map(|&i| self.real[i].features.clone()).collect();
            let mut y: Vec<u32> = train.iter().map(|&i| self.real[i].raw.label).collect();
            x.extend(vx);
            y.extend(vy);
            let tx: Vec<Vec<f64>> = test.iter().map(|&i| self.real[i].features.clone()).collect();
            let preds = seeds
                .iter()
                .map(|&seed| {
                    let params = ForestParams {
                        seed: derive_seed(seed, f as u64),
                        ..self.cfg.forest
                    };
                    train_forest(&x, &y, &params)?.predict(&tx)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((train.len(), n_virtual, test, preds))
        })?;

        let mut runs = Vec::with_capacity(seeds.len());
        for (r, &seed) in seeds.iter().enumerate() {
            let scored: Vec<Scored> = match self.cfg.binary() {
                None => per_fold
                    .iter()
                    .map(|(_, _, test, preds)| {
                        let truth: Vec<u32> = test.iter().map(|&i| self.real[i].raw.label).collect();
                        Ok(Scored {
                            score: f1_scores(&preds[r], &truth, F1Mode::Macro)?,
                            per_class: per_class_f1(&preds[r], &truth)?,
                        })
                    })
                    .collect::<Result<_>>()?,
                Some((positive, moments)) => self.score_moments(&per_fold, r, positive, &moments)?,
            };
            let folds: Vec<FoldResult> = scored
                .into_iter()
                .zip(&per_fold)
                .enumerate()
                .map(|(fold, (s, (n_real, n_virtual, test, _)))| FoldResult {
                    fold,
                    macro_f1: self.cfg.binary().is_none().then_some(s.score),
                    binary_f1: self.cfg.binary().is_some().then_some(s.score),
                    per_class_f1: s.per_class,
                    n_train_real: *n_real,
                    n_train_virtual: *n_virtual,
                    n_test: test.len(),
                })
                .collect();
            let scores: Vec<f64> = folds.iter().map(FoldResult::score).collect();
            runs.push(RunResult {
                seed,
                mean: stats::mean(&scores),
                fold_std: stats::sample_std(&scores),
                folds,
            });
        }
        Ok(runs)
    }

    /// Aggregates out-of-fold positive predictions per recording into
    /// moments, then scores each fold's windows against the moment labels.
    fn score_moments(
        &self,
        per_fold: &[(usize, usize, Vec<usize>, Vec<Vec<u32>>)],
        run: usize,
        positive: u32,
        moments: &MomentParams,
    ) -> Result<Vec<Scored>> {
        let mut predicted: BTreeMap<usize, bool> = BTreeMap::new();
        for (_, _, test, preds) in per_fold {
            for (&i, &p) in test.iter().zip(&preds[run]) {
                predicted.insert(i, p == positive);
            }
        }
        let mut aggregated: BTreeMap<usize, bool> = BTreeMap::new();
        for rec in 0..self.data.real.len() {
            let idx: Vec<usize> = predicted.keys().copied().filter(|&i| self.real[i].recording == rec).collect();
            let spans: Vec<(f64, f64)> = idx.iter().map(|&i| (self.real[i].raw.t_start, self.real[i].raw.t_end)).collect();
            let pos: Vec<bool> = idx.iter().map(|i| predicted[i]).collect();
            let (labels, _) = aggregate_moments(&spans, &pos, moments)?;
            aggregated.extend(idx.into_iter().zip(labels));
        }
        const NEGATIVE: u32 = u32::MAX;
        let as_label = |p: bool| if p { positive } else { NEGATIVE };
        per_fold
            .iter()
            .map(|(_, _, test, _)| {
                let pred: Vec<u32> = test.iter().map(|i| as_label(aggregated[i])).collect();
                let truth: Vec<u32> = test.iter().map(|&i| as_label(self.real[i].raw.label == positive)).collect();
                let score = f1_scores(&pred, &truth, F1Mode::Binary { positive })?;
                let per_class = per_class_f1(&pred, &truth)?;
                Ok(Scored { score, per_class })
            })
            .collect()
    }
}

pub fn summarize(metric: &str, runs: &[RunResult]) -> EvalSummary {
    let means: Vec<f64> = runs.iter().map(|r| r.mean).collect();
    let k = runs.first().map_or(0, |r| r.folds.len());
    let fold_means: Vec<f64> = (0..k)
        .map(|f| stats::mean(&runs.iter().map(|r| r.folds[f].score()).collect::<Vec<_>>()))
        .collect();
    let mut per_class: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for fold in runs.iter().flat_map(|r| &r.folds) {
        for (&c, &v) in &fold.per_class_f1 {
            per_class.entry(c).or_default().push(v);
        }
    }
    EvalSummary {
        metric: metric.to_owned(),
        mean: stats::mean(&means),
        std_over_runs: if means.len() > 1 { stats::sample_std(&means) } else { 0.0 },
        std_over_folds: if fold_means.len() > 1 { stats::sample_std(&fold_means) } else { 0.0 },
        per_class_f1: per_class.into_iter().map(|(c, v)| (c, stats::mean(&v))).collect(),
    }
}

/// Baseline (real only) or augmented (real + calibrated virtual) evaluation.
pub fn run_eval(cfg: &ExperimentConfig, augmented: bool) -> Result<EvalReport> {
    let data = Dataset::load(&cfg.manifest, cfg.window_spec().rate_hz)?;
    let ev = Evaluator::new(cfg, &data)?;
    let virtual_classes: BTreeSet<u32> = if augmented {
        data.virtual_clips.iter().map(|c| c.class).collect()
    } else {
        BTreeSet::new()
    };
    let runs = ev.evaluate(None, &virtual_classes)?;
    Ok(EvalReport {
        toolkit: Toolkit::current(),
        config: cfg.clone(),
        augmented,
        virtual_classes: virtual_classes.into_iter().collect(),
        summary: summarize(cfg.metric_name(), &runs),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub toolkit: Toolkit,
    pub config: ExperimentConfig,
    pub msi: MsiSummary,
    /// Mean score without virtual data, all classes.
    pub baseline: f64,
    pub report: SweepReport,
}

/// Computes cMSI per class from the videos, then sweeps the cut-off.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(SweepOutput, Vec<MsiWindow>)> {
    let spec = cfg.window_spec();
    let data = Dataset::load(&cfg.manifest, spec.rate_hz)?;
    let (windows, msi) = compute_msi(&data.manifest, &spec, &cfg.msi)?;
    if msi.class_cmsi.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    let ev = Evaluator::new(cfg, &data)?;
    let metric = cfg.metric_name();
    let mean_score = |task: Option<&BTreeSet<u32>>, virt: &BTreeSet<u32>| -> Result<EvalSummary> {
        Ok(summarize(metric, &ev.evaluate(task, virt)?))
    };
    let baseline = mean_score(None, &BTreeSet::new())?;
    let mode = cfg.sweep.mode;
    let points = cutoff_sweep(&msi.class_cmsi, mode, |step| {
        let included: BTreeSet<u32> = step.included.iter().copied().collect();
        match step.mode {
            SweepMode::IncludeVirtualOnly => Ok(mean_score(None, &included)?.mean - baseline.mean),
            SweepMode::IncludeClasses => {
                let with = mean_score(Some(&included), &included)?.mean;
                let without = mean_score(Some(&included), &BTreeSet::new())?.mean;
                Ok(with - without)
            }
        }
    })?;
    let per_class_points = match cfg.sweep.spline_input {
        SplineInput::PerCutoff => None,
        SplineInput::PerClass => {
            let all: BTreeSet<u32> = msi.class_cmsi.keys().copied().collect();
            let full = mean_score(None, &all)?;
            let mut pts: Vec<(f64, f64)> = msi
                .class_cmsi
                .iter()
                .filter_map(|(c, &x)| {
                    let with = full.per_class_f1.get(c)?;
                    let without = baseline.per_class_f1.get(c)?;
                    Some((x, with - without))
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Some(pts)
        }
    };
    let report = SweepReport::build(
        mode,
        points,
        cfg.sweep.spline_input,
        per_class_points.as_deref(),
        cfg.sweep.n_knots,
    )?;
    Ok((
        SweepOutput {
            toolkit: Toolkit::current(),
            config: cfg.clone(),
            msi,
            baseline: baseline.mean,
            report,
        },
        windows,
    ))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `eval_report.json`; returns its path.
pub fn write_eval(report: &EvalReport, dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let name = if report.augmented { "eval_augmented.json" } else { "eval_baseline.json" };
    let path = dir.join(name);
    write_json(report, &path)?;
    Ok(path)
}

/// Writes `sweep_report.json`, the plot CSVs and `msi_windows.csv`.
pub fn write_sweep(out: &SweepOutput, windows: &[MsiWindow], dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("sweep_report.json");
    write_json(out, &path)?;
    out.report.write_csvs(dir)?;
    write_msi_csv(windows, dir.join("msi_windows.csv"))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub toolkit: Toolkit,
    pub target: AxisStats,
    pub files: Vec<PathBuf>,
    pub n_real_windows: usize,
    pub n_virtual_windows: usize,
}

/// Calibrates all virtual series with one pooled map onto the pooled real
/// data, writes the calibrated CSVs and a feature CSV of every window.
/// Virtual windows carry the MSI of the video window with the nearest centre.
pub fn run_calibrate(cfg: &ExperimentConfig, dir: &Path) -> Result<CalibrationReport> {
    let spec = cfg.window_spec();
    let data = Dataset::load(&cfg.manifest, spec.rate_hz)?;
    if data.virtual_clips.is_empty() {
        return Err(Error::DataLoadFailed("manifest lists no virtual IMU data".into()));
    }
    let target = AxisStats::pooled(&data.real)?;
    let series: Vec<ImuSeries> = data.virtual_clips.iter().map(|c| c.series.clone()).collect();
    let calibrated = calibrate_pooled(&series, &target)?;
    let (msi_windows, _) = compute_msi(&data.manifest, &spec, &cfg.msi)?;

    ensure_dir(&dir.join("calibrated"))?;
    let mut files = Vec::new();
    let mut windows: Vec<FeatureWindow> = Vec::new();
    for s in &data.real {
        windows.extend(crate::pipeline::extract_windows(s, &spec, &cfg.features)?);
    }
    let n_real = windows.len();
    for (i, s) in calibrated.iter().enumerate() {
        let name = format!("virtual_{i:03}_{}.csv", s.source_id().unwrap_or("unknown"));
        let path = dir.join("calibrated").join(name);
        write_imu_csv(s, &path)?;
        files.push(path);
        let mut ws = match crate::pipeline::extract_windows(s, &spec, &cfg.features) {
            Ok(w) => w,
            Err(Error::SeriesTooShort { .. }) => continue,
            Err(e) => return Err(e),
        };
        for w in &mut ws {
            w.msi = nearest_msi(&msi_windows, s.source_id(), w.center(), spec.step_s);
        }
        windows.extend(ws);
    }
    let n_virtual = windows.len() - n_real;
    write_feature_csv(&windows, dir.join("features.csv"))?;
    let report = CalibrationReport {
        toolkit: Toolkit::current(),
        target,
        files,
        n_real_windows: n_real,
        n_virtual_windows: n_virtual,
    };
    write_json(&report, &dir.join("calibration.json"))?;
    Ok(report)
}

fn nearest_msi(windows: &[MsiWindow], source: Option<&str>, center: f64, step: f64) -> Option<f64> {
    let source = source?;
    windows
        .iter()
        .filter(|w| w.source_id == source)
        .map(|w| ((0.5 * (w.t_start + w.t_end) - center).abs(), w.msi))
        .filter(|(d, _)| *d <= 0.5 * step)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, m)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let base = Path::new("/data");
        let cfg = ExperimentConfig::from_json(r#"{"manifest": "m.json"}"#, base).unwrap();
        assert_eq!(cfg.manifest, PathBuf::from("/data/m.json"));
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.window_spec(), WindowSpec::DAILY);
        assert_eq!(cfg.metric_name(), "macro_f1");

        let bad = |text: &str| ExperimentConfig::from_json(text, base).unwrap_err();
        assert!(bad(r#"{"manifest": "m.json", "seeds": []}"#).is_config_error());
        assert!(bad(r#"{"manifest": "m.json", "task": "eating"}"#).is_config_error());
        assert!(bad(r#"{"manifest": "m.json", "task": "custom"}"#).is_config_error());
        assert!(bad(r#"{"manifest": "m.json", "folds": 1}"#).is_config_error());
        assert!(bad(r#"{"manifest": "m.json", "bogus": 1}"#).is_config_error());
        assert!(bad(r#"{"manifest": "m.json", "forest": {"n_trees": 0}}"#).is_config_error());

        let eating = ExperimentConfig::from_json(
            r#"{"manifest": "m.json", "task": "eating", "positive_class": 2, "moments": {"eps": 80, "min_pts": 2}}"#,
            base,
        )
        .unwrap();
        assert_eq!(eating.window_spec(), WindowSpec::EATING);
        assert_eq!(eating.metric_name(), "binary_f1");
    }

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::new("/x/m.json");
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap(), Path::new("/")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn summary_statistics() {
        let fold = |f: usize, s: f64| FoldResult {
            fold: f,
            macro_f1: Some(s),
            binary_f1: None,
            per_class_f1: BTreeMap::from([(0, s)]),
            n_train_real: 1,
            n_train_virtual: 0,
            n_test: 1,
        };
        let run = |seed: u64, a: f64, b: f64| RunResult {
            seed,
            folds: vec![fold(0, a), fold(1, b)],
            mean: (a + b) / 2.0,
            fold_std: stats::sample_std(&[a, b]),
        };
        let s = summarize("macro_f1", &[run(1, 0.5, 0.7), run(2, 0.7, 0.9)]);
        assert!((s.mean - 0.7).abs() < 1e-12);
        assert!((s.std_over_runs - stats::sample_std(&[0.6, 0.8])).abs() < 1e-12);
        assert!((s.std_over_folds - stats::sample_std(&[0.6, 0.8])).abs() < 1e-12);
        assert!((s.per_class_f1[&0] - 0.7).abs() < 1e-12);
    }
}
