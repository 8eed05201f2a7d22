//! Synthetic desk-scale dataset: per-class wrist trajectories rendered as
//! optical flow and pose tracks, virtual accelerometry from the tracked
//! keypoints, and real accelerometry for a few subjects.
//!
//! Each class moves the wrist sinusoidally along its own 3D direction with
//! its own amplitude. Virtual data is the second difference of the jittered
//! keypoint track, so pose jitter swamps it for small amplitudes while real
//! sensors still resolve them.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    write_flow_sequence, write_imu_csv, write_pose_csv, ClassEntry, DatasetManifest, FlowField, FlowSequence,
    ImuEntry, ImuSeries, Keypoint, PoseTrack, Provenance, VideoEntry, RIGHT_WRIST,
};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::par;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub id: u32,
    pub name: String,
    /// Peak wrist displacement in pixels.
    pub amplitude_px: f64,
    pub frequency_hz: f64,
    /// Unit motion direction (x right, y down, z toward the camera).
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub classes: Vec<SynthClass>,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub clips_per_class: usize,
    pub clip_seconds: f64,
    pub disk_radius_px: f64,
    pub flow_noise_px: f64,
    pub pose_jitter_px: f64,
    pub metres_per_px: f64,
    pub subjects: usize,
    pub real_seconds_per_class: f64,
    pub real_rate_hz: f64,
    pub sensor_noise: f64,
    /// Per-subject and per-clip gain is drawn from `1 ± gain_spread`.
    pub gain_spread: f64,
    /// Largest per-subject / per-clip rotation of the motion direction.
    pub rotation_deg: f64,
    /// Slow amplitude modulation depth within a recording.
    pub amplitude_drift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            classes: SynthConfig::geometric_classes(8, (0.6, 6.0), (0.8, 2.0)),
            height: 24,
            width: 30,
            fps: 25.0,
            clips_per_class: 8,
            clip_seconds: 12.0,
            disk_radius_px: 4.0,
            flow_noise_px: 0.02,
            pose_jitter_px: 0.05,
            metres_per_px: 0.05,
            subjects: 3,
            real_seconds_per_class: 4.0,
            real_rate_hz: 50.0,
            sensor_noise: 0.15,
            gain_spread: 0.1,
            rotation_deg: 5.0,
            amplitude_drift: 0.4,
        }
    }
}

impl SynthConfig {
    /// `n` classes with amplitudes (px) and frequencies (Hz) spaced
    /// geometrically over the given ranges, directions spread by the golden angle.
    pub fn geometric_classes(n: usize, amplitude_px: (f64, f64), frequency_hz: (f64, f64)) -> Vec<SynthClass> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                let theta = golden * i as f64;
                let z = if i % 2 == 0 { 0.6 } else { -0.6 };
                SynthClass {
                    id: i as u32,
                    name: format!("activity_{i}"),
                    amplitude_px: amplitude_px.0 * (amplitude_px.1 / amplitude_px.0).powf(t),
                    frequency_hz: frequency_hz.0 * (frequency_hz.1 / frequency_hz.0).powf(t),
                    direction: [0.8 * theta.cos(), 0.8 * theta.sin(), z],
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.classes.is_empty() {
            return bad("synth needs at least one class".into());
        }
        if self.height < 3 || self.width < 3 || !(self.fps > 0.0) {
            return bad("frames must be at least 3x3 at a positive fps".into());
        }
        if self.clips_per_class == 0 || self.subjects == 0 {
            return bad("clips_per_class and subjects must be >= 1".into());
        }
        if !(self.clip_seconds * self.fps >= 4.0) || !(self.real_seconds_per_class * self.real_rate_hz >= 2.0) {
            return bad("recordings are too short".into());
        }
        let reach = self.classes.iter().map(|c| c.amplitude_px).fold(0.0, f64::max) * (1.0 + self.amplitude_drift)
            * (1.0 + self.gain_spread);
        if reach >= self.height.min(self.width) as f64 / 2.0 - 1.0 {
            return bad("largest amplitude does not fit in the frame".into());
        }
        for c in &self.classes {
            let norm = c.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            if !(c.amplitude_px > 0.0 && c.frequency_hz > 0.0 && norm > 0.0) {
                return bad(format!("class {} needs positive amplitude, frequency and direction", c.id));
            }
        }
        Ok(())
    }
}

/// One recording's motion: gain, rotation, phase and drift applied to a class.
#[derive(Debug, Clone, Copy)]
struct Motion {
    amplitude: f64,
    omega: f64,
    phase: f64,
    direction: [f64; 3],
    drift: f64,
    drift_omega: f64,
    drift_phase: f64,
}

impl Motion {
    fn draw(class: &SynthClass, cfg: &SynthConfig, rng: &mut SplitMix64) -> Motion {
        let gain = rng.uniform(1.0 - cfg.gain_spread, 1.0 + cfg.gain_spread);
        let norm = class.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        let d = class.direction.map(|x| x / norm);
        Motion {
            amplitude: class.amplitude_px * gain,
            omega: TAU * class.frequency_hz,
            phase: rng.uniform(0.0, TAU),
            direction: rotate(d, random_axis(rng), rng.uniform(-1.0, 1.0) * cfg.rotation_deg.to_radians()),
            drift: cfg.amplitude_drift,
            drift_omega: TAU / rng.uniform(5.0, 9.0),
            drift_phase: rng.uniform(0.0, TAU),
        }
    }

    fn scale(&self, t: f64) -> f64 {
        self.amplitude * (1.0 + self.drift * (self.drift_omega * t + self.drift_phase).sin())
    }

    /// Displacement from the rest position, in pixels.
    fn position(&self, t: f64) -> [f64; 3] {
        let s = self.scale(t) * (self.omega * t + self.phase).sin();
        self.direction.map(|d| d * s)
    }

    /// Analytic second derivative of `position`, in pixels / s^2.
    fn acceleration(&self, t: f64) -> [f64; 3] {
        let (w, wd) = (self.omega, self.drift_omega);
        let arg = w * t + self.phase;
        let darg = wd * t + self.drift_phase;
        let m = self.scale(t);
        let dm = self.amplitude * self.drift * wd * darg.cos();
        let ddm = -self.amplitude * self.drift * wd * wd * darg.sin();
        let s = ddm * arg.sin() + 2.0 * dm * w * arg.cos() - m * w * w * arg.sin();
        self.direction.map(|d| d * s)
    }
}

fn random_axis(rng: &mut SplitMix64) -> [f64; 3] {
    loop {
        let v = [rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.map(|x| x / n);
        }
    }
}

/// Rodrigues rotation of `v` about unit `axis`.
fn rotate(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let cross = [
        axis[1] * v[2] - axis[2] * v[1],
        axis[2] * v[0] - axis[0] * v[2],
        axis[0] * v[1] - axis[1] * v[0],
    ];
    let dot: f64 = axis.iter().zip(&v).map(|(a, b)| a * b).sum();
    std::array::from_fn(|i| v[i] * c + cross[i] * s + axis[i] * dot * (1.0 - c))
}

/// One rendered video clip with its pose track and virtual IMU series.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub id: String,
    pub class: u32,
    pub flow: FlowSequence,
    pub pose: PoseTrack,
    pub virtual_imu: ImuSeries,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub clips: Vec<SynthClip>,
    pub real: Vec<ImuSeries>,
}

fn render_clip(cfg: &SynthConfig, class: &SynthClass, index: usize, seed: u64) -> Result<SynthClip> {
    let mut rng = SplitMix64::new(seed);
    let motion = Motion::draw(class, cfg, &mut rng);
    let n_frames = (cfg.clip_seconds * cfg.fps).round() as usize;
    let (h, w) = (cfg.height, cfg.width);
    let rest = [(w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, 0.0];
    let track: Vec<[f64; 3]> = (0..=n_frames)
        .map(|k| {
            let p = motion.position(k as f64 / cfg.fps);
            std::array::from_fn(|i| rest[i] + p[i])
        })
        .collect();
    // observed keypoints: true track plus jitter on every coordinate
    let observed: Vec<[f64; 3]> = track
        .iter()
        .map(|p| p.map(|x| x + cfg.pose_jitter_px * rng.next_gaussian()))
        .collect();

    let noise_seeds: Vec<u64> = (0..n_frames).map(|_| rng.next_u64()).collect();
    let r2 = cfg.disk_radius_px * cfg.disk_radius_px;
    let frames = par::map_range(n_frames, |k| {
        let mut noise = SplitMix64::new(noise_seeds[k]);
        let (p, q) = (track[k], track[k + 1]);
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let mut u = Vec::with_capacity(h * w);
        let mut v = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let inside = (c as f64 - p[0]).powi(2) + (r as f64 - p[1]).powi(2) <= r2;
                let (mu, mv) = if inside { (dy, dx) } else { (0.0, 0.0) };
                u.push(((mu + cfg.flow_noise_px * noise.next_gaussian()) / h as f64) as f32);
                v.push(((mv + cfg.flow_noise_px * noise.next_gaussian()) / w as f64) as f32);
            }
        }
        FlowField::new(h, w, u, v, true)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let id = format!("{}_{index:02}", class.name);
    let flow = FlowSequence::new(frames, cfg.fps, id.clone())?;
    let keypoints = observed[..n_frames]
        .iter()
        .enumerate()
        .map(|(k, p)| Keypoint {
            frame: k,
            joint: RIGHT_WRIST,
            x: p[0],
            y: p[1],
            confidence: 0.9,
        })
        .collect();
    let pose = PoseTrack::new(keypoints, RIGHT_WRIST)?;

    // virtual accelerometry: central second difference of the observed track
    let scale = cfg.metres_per_px * cfg.fps * cfg.fps;
    let mut ts = Vec::new();
    let mut samples = Vec::new();
    for k in 1..n_frames {
        ts.push(k as f64 / cfg.fps);
        samples.push(std::array::from_fn(|i| {
            (observed[k + 1][i] - 2.0 * observed[k][i] + observed[k - 1][i]) * scale
        }));
    }
    let labels = vec![class.id; ts.len()];
    let virtual_imu = ImuSeries::new(ts, samples, labels, Provenance::Virtual, "video")?
        .with_source_id(Some(id.clone()));
    Ok(SynthClip {
        id,
        class: class.id,
        flow,
        pose,
        virtual_imu,
    })
}

fn render_subject(cfg: &SynthConfig, subject: usize, seed: u64) -> Result<ImuSeries> {
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<&SynthClass> = cfg.classes.iter().collect();
    rng.shuffle(&mut order);
    let per_class = (cfg.real_seconds_per_class * cfg.real_rate_hz).round() as usize;
    let mut ts = Vec::new();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    // one orientation offset per subject, shared by all of their activities
    let axis = random_axis(&mut rng);
    let angle = rng.uniform(-1.0, 1.0) * cfg.rotation_deg.to_radians();
    for (segment, class) in order.iter().enumerate() {
        let motion = Motion::draw(class, cfg, &mut rng);
        for i in 0..per_class {
            let t = (segment * per_class + i) as f64 / cfg.real_rate_hz;
            let a = rotate(motion.acceleration(t), axis, angle);
            ts.push(t);
            samples.push(a.map(|x| x * cfg.metres_per_px + cfg.sensor_noise * rng.next_gaussian()));
            labels.push(class.id);
        }
    }
    ImuSeries::new(ts, samples, labels, Provenance::Real, format!("s{subject}"))
}

/// Renders the dataset in memory.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.classes.len())
        .flat_map(|c| (0..cfg.clips_per_class).map(move |k| (c, k)))
        .collect();
    let clips = par::map(&jobs, |&(c, k)| {
        let stream = (c * cfg.clips_per_class + k) as u64;
        render_clip(cfg, &cfg.classes[c], k, crate::rng::derive_seed(cfg.seed, stream))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let real = (0..cfg.subjects)
        .map(|s| render_subject(cfg, s, crate::rng::derive_seed(cfg.seed, (1 << 32) + s as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthDataset {
        config: cfg.clone(),
        clips,
        real,
    })
}

/// Paths of the files written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub manifest: PathBuf,
    pub eval_config: PathBuf,
    pub sweep_config: PathBuf,
}

/// Writes the dataset under `dir`: flow, pose and IMU files, `manifest.json`,
/// and ready-to-run `daily.json` and `sweep.json` experiment configs.
pub fn write_dataset(data: &SynthDataset, dir: &Path) -> Result<SynthPaths> {
    for sub in ["videos", "imu"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let written = par::map(&data.clips, |clip| -> Result<(VideoEntry, ImuEntry)> {
        let flow = PathBuf::from("videos").join(format!("{}.msif", clip.id));
        let pose = PathBuf::from("videos").join(format!("{}_pose.csv", clip.id));
        let imu = PathBuf::from("imu").join(format!("virtual_{}.csv", clip.id));
        write_flow_sequence(&clip.flow, dir.join(&flow))?;
        write_pose_csv(&clip.pose, dir.join(&pose))?;
        write_imu_csv(&clip.virtual_imu, dir.join(&imu))?;
        Ok((
            VideoEntry {
                id: clip.id.clone(),
                flow,
                pose,
                class: clip.class,
                target_joint: RIGHT_WRIST,
            },
            ImuEntry {
                path: imu,
                provenance: Provenance::Virtual,
                subject: None,
                unit: Some("m/s^2".into()),
                source: Some(clip.id.clone()),
            },
        ))
    });
    let mut videos = Vec::new();
    let mut imu = Vec::new();
    for w in written {
        let (v, i) = w?;
        videos.push(v);
        imu.push(i);
    }
    for s in &data.real {
        let path = PathBuf::from("imu").join(format!("real_{}.csv", s.subject_id()));
        write_imu_csv(s, dir.join(&path))?;
        imu.push(ImuEntry {
            path,
            provenance: Provenance::Real,
            subject: Some(s.subject_id().to_owned()),
            unit: Some("m/s^2".into()),
            source: None,
        });
    }
    let manifest = DatasetManifest {
        classes: data
            .config
            .classes
            .iter()
            .map(|c| ClassEntry {
                id: c.id,
                name: c.name.clone(),
            })
            .collect(),
        imu,
        videos,
    };
    let paths = SynthPaths {
        manifest: dir.join("manifest.json"),
        eval_config: dir.join("daily.json"),
        sweep_config: dir.join("sweep.json"),
    };
    manifest.save(&paths.manifest)?;

    let mut eval = ExperimentConfig::new("manifest.json");
    eval.output_dir = Some("out".into());
    let sweep = eval.clone();
    for (cfg, path) in [(&eval, &paths.eval_config), (&sweep, &paths.sweep_config)] {
        std::fs::write(path, cfg.to_json()?).map_err(|e| Error::io(path, e))?;
    }
    let synth = dir.join("synth.json");
    let text = serde_json::to_string_pretty(&data.config)? + "\n";
    std::fs::write(&synth, text).map_err(|e| Error::io(&synth, e))?;
    Ok(paths)
}
