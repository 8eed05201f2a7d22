//! Motion subtlety index.
//!
//! Per frame, the MSI is the mean normalized flow magnitude in a square patch
//! centred on the target keypoint. Over a window of frames it is
//! `exp(-w * std(per_frame))`: close to 1 when the local motion is steady or
//! absent, falling toward 0 as it fluctuates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FlowField, FlowSequence, PoseTrack};
use crate::error::{Error, Result};
use crate::{par, stats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsiParams {
    /// Patch side as a fraction of the larger frame dimension.
    pub patch_fraction: f64,
    /// Decay weight applied to the per-frame standard deviation.
    pub w: f64,
    /// Minimum fraction of frames in a window with a usable keypoint.
    pub min_valid_fraction: f64,
    /// Keypoints below this confidence drop their frame.
    pub min_confidence: f64,
}

impl Default for MsiParams {
    fn default() -> Self {
        MsiParams {
            patch_fraction: 0.02,
            w: 100.0,
            min_valid_fraction: 0.5,
            min_confidence: 0.3,
        }
    }
}

impl MsiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.patch_fraction > 0.0 && self.patch_fraction.is_finite()) {
            return Err(Error::InvalidParameter("patch_fraction must be > 0".into()));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::InvalidParameter("w must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.min_valid_fraction) {
            return Err(Error::InvalidParameter("min_valid_fraction must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::InvalidParameter("min_confidence must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// MSI of one analysis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsiWindow {
    pub per_frame: Vec<f64>,
    pub msi: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub class_id: u32,
    pub source_id: String,
    /// Frames in the window, valid or not.
    pub n_frames: usize,
}

impl MsiWindow {
    pub fn n_valid_frames(&self) -> usize {
        self.per_frame.len()
    }
}

/// Odd patch side `round(fraction * max(h, w))`, bumped to odd, at least 3.
pub fn patch_size(height: usize, width: usize, fraction: f64) -> usize {
    let k = (fraction * height.max(width) as f64).round() as usize;
    let k = if k % 2 == 0 { k + 1 } else { k };
    k.max(3)
}

/// Mean flow magnitude over the `k x k` patch centred on the rounded keypoint.
/// Near the border the patch is clipped and the mean taken over valid pixels.
pub fn msi_frame(flow: &FlowField, keypoint: (f64, f64), k: usize) -> Result<f64> {
    if !flow.normalized() {
        return Err(Error::NotNormalized);
    }
    if k < 3 || k % 2 == 0 {
        return Err(Error::InvalidParameter(format!("patch size {k} must be odd and >= 3")));
    }
    let (x, y) = keypoint;
    let (cx, cy) = (x.round(), y.round());
    let (h, w) = (flow.height(), flow.width());
    if !(cx >= 0.0 && cy >= 0.0 && (cx as usize) < w && (cy as usize) < h) {
        return Err(Error::KeypointOutsideFrame {
            x,
            y,
            width: w,
            height: h,
        });
    }
    let (cx, cy) = (cx as usize, cy as usize);
    let half = k / 2;
    let rows = cy.saturating_sub(half)..(cy + half + 1).min(h);
    let cols = cx.saturating_sub(half)..(cx + half + 1).min(w);
    let count = rows.len() * cols.len();
    let mut sum = 0.0;
    for r in rows {
        for c in cols.clone() {
            sum += flow.magnitude(r, c);
        }
    }
    Ok(sum / count as f64)
}

/// `exp(-w * std)` with the population standard deviation of `per_frame`.
pub fn msi_window(per_frame: &[f64], w: f64) -> Result<f64> {
    if per_frame.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(i) = per_frame.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue(format!("per-frame MSI {i}")));
    }
    // the rounded mean of equal values can differ from them, leaving a tiny std
    if per_frame.iter().all(|&x| x == per_frame[0]) {
        return Ok(1.0);
    }
    Ok((-w * stats::population_std(per_frame)).exp())
}

/// Frame index range whose start times `i / fps` fall in `[t_start, t_end)`.
fn frame_range(seq: &FlowSequence, t_start: f64, t_end: f64) -> Result<std::ops::Range<usize>> {
    const SLACK: f64 = 1e-9;
    let span = seq.duration();
    let out = || Error::SegmentOutOfRange {
        t_start,
        t_end,
        span,
    };
    if !(t_start >= -SLACK && t_end <= span + SLACK && t_end > t_start) {
        return Err(out());
    }
    let fps = seq.fps();
    let first = ((t_start * fps - SLACK).ceil().max(0.0)) as usize;
    let last = ((t_end * fps - SLACK).ceil() as usize).min(seq.len());
    if first >= last {
        return Err(out());
    }
    Ok(first..last)
}

/// Window MSI for the video segment `[t_start, t_end)` of one class.
///
/// Frames whose target keypoint is missing or below `min_confidence` are
/// dropped. The patch is anchored on the keypoint of the flow's first frame.
pub fn window_msi_for_segment(
    seq: &FlowSequence,
    pose: &PoseTrack,
    t_start: f64,
    t_end: f64,
    class_id: u32,
    params: &MsiParams,
) -> Result<MsiWindow> {
    params.validate()?;
    if !seq.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let frames = frame_range(seq, t_start, t_end)?;
    let (h, w) = seq.dims().expect("non-empty range implies frames");
    let k = patch_size(h, w, params.patch_fraction);
    let total = frames.len();
    let mut per_frame = Vec::with_capacity(total);
    for i in frames {
        let Some(kp) = pose.target_at(i) else { continue };
        if kp.confidence < params.min_confidence {
            continue;
        }
        per_frame.push(msi_frame(&seq.frames()[i], (kp.x, kp.y), k)?);
    }
    let valid = per_frame.len();
    if valid == 0 || (valid as f64) < params.min_valid_fraction * total as f64 {
        return Err(Error::InsufficientValidFrames {
            valid,
            total,
            required: params.min_valid_fraction,
        });
    }
    let msi = msi_window(&per_frame, params.w)?;
    Ok(MsiWindow {
        per_frame,
        msi,
        t_start,
        t_end,
        class_id,
        source_id: seq.source_id().to_owned(),
        n_frames: total,
    })
}

/// Sliding windows of `length_s` every `step_s` over a whole video.
///
/// Windows without enough usable keypoints are skipped; their count is
/// returned alongside the computed windows. Windows are independent and are
/// evaluated in parallel.
pub fn video_windows(
    seq: &FlowSequence,
    pose: &PoseTrack,
    class_id: u32,
    length_s: f64,
    step_s: f64,
    params: &MsiParams,
) -> Result<(Vec<MsiWindow>, usize)> {
    if !(length_s > 0.0 && step_s > 0.0 && step_s <= length_s) {
        return Err(Error::InvalidParameter(format!(
            "window {length_s} s / step {step_s} s"
        )));
    }
    let span = seq.duration();
    let n = if span + 1e-9 < length_s {
        0
    } else {
        ((span - length_s) / step_s + 1e-9).floor() as usize + 1
    };
    let results = par::map_range(n, |i| {
        let t0 = i as f64 * step_s;
        window_msi_for_segment(seq, pose, t0, (t0 + length_s).min(span), class_id, params)
    });
    let mut windows = Vec::with_capacity(n);
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(w) => windows.push(w),
            Err(Error::InsufficientValidFrames { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((windows, skipped))
}

const MODE_GRID: usize = 1001;
const MIN_BANDWIDTH: f64 = 1e-3;

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, floored at 1e-3.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let sorted = stats::sorted_copy(values);
    let sd = stats::sample_std(&sorted);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let h = 0.9 * sd.min(iqr / 1.34) * (sorted.len() as f64).powf(-0.2);
    h.max(MIN_BANDWIDTH)
}

/// Class MSI: argmax of a Gaussian KDE over a 1001-point grid on `[0, 1]`
/// (the smallest grid value wins ties).
pub fn class_msi_mode(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::InvalidParameter(format!("window MSI {v} outside (0, 1]")));
    }
    // a fixed summation order makes the result permutation-invariant
    let sorted = stats::sorted_copy(values);
    let h = silverman_bandwidth(&sorted);
    let step = 1.0 / (MODE_GRID - 1) as f64;
    let density = par::map_range(MODE_GRID, |i| {
        let x = i as f64 * step;
        sorted
            .iter()
            .map(|v| {
                let z = (x - v) / h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
    });
    let mut best = 0;
    for (i, d) in density.iter().enumerate() {
        if *d > density[best] {
            best = i;
        }
    }
    Ok(best as f64 * step)
}

/// Writes `source_id,class,t_start,t_end,msi,n_valid_frames`.
pub fn write_msi_csv(windows: &[MsiWindow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["source_id", "class", "t_start", "t_end", "msi", "n_valid_frames"])?;
    for win in windows {
        w.write_record([
            win.source_id.clone(),
            win.class_id.to_string(),
            win.t_start.to_string(),
            win.t_end.to_string(),
            win.msi.to_string(),
            win.n_valid_frames().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A row of the per-window MSI CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MsiRecord {
    pub source_id: String,
    pub class: u32,
    pub t_start: f64,
    pub t_end: f64,
    pub msi: f64,
    pub n_valid_frames: usize,
}

pub fn read_msi_csv(path: impl AsRef<Path>) -> Result<Vec<MsiRecord>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Keypoint;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn uniform_field(h: usize, w: usize, u: f32, v: f32) -> FlowField {
        FlowField::new(h, w, vec![u; h * w], vec![v; h * w], true).unwrap()
    }

    fn track(frames: usize, x: f64, y: f64, conf: f64) -> PoseTrack {
        let entries = (0..frames)
            .map(|frame| Keypoint {
                frame,
                joint: 10,
                x,
                y,
                confidence: conf,
            })
            .collect();
        PoseTrack::new(entries, 10).unwrap()
    }

    #[test]
    fn patch_sizes() {
        assert_eq!(patch_size(1080, 1920, 0.02), 39);
        assert_eq!(patch_size(100, 100, 0.02), 3);
        assert_eq!(patch_size(50, 50, 0.02), 3);
        assert_eq!(patch_size(1, 1, 0.02), 3);
        assert_eq!(patch_size(240, 320, 0.02), 7);
    }

    #[test]
    fn frame_msi_cases() {
        let f = uniform_field(20, 20, 0.03, 0.04);
        assert!((msi_frame(&f, (10.0, 10.0), 3).unwrap() - 0.05).abs() < 1e-7);
        let z = uniform_field(20, 20, 0.0, 0.0);
        assert_eq!(msi_frame(&z, (3.0, 4.0), 5).unwrap(), 0.0);

        let mut u = vec![0.0f32; 9];
        for i in [0, 2, 6, 8] {
            u[i] = 0.1;
        }
        let f = FlowField::new(3, 3, u, vec![0.0; 9], true).unwrap();
        let m = msi_frame(&f, (1.0, 1.0), 3).unwrap();
        assert!((m - 0.4 / 9.0).abs() < 1e-8, "{m}");
    }

    #[test]
    fn frame_msi_errors() {
        let f = uniform_field(10, 10, 0.0, 0.0);
        assert!(matches!(
            msi_frame(&f, (10.0, 2.0), 3),
            Err(Error::KeypointOutsideFrame { .. })
        ));
        assert!(matches!(
            msi_frame(&f, (-0.6, 2.0), 3),
            Err(Error::KeypointOutsideFrame { .. })
        ));
        // -0.4 rounds to column 0
        assert!(msi_frame(&f, (-0.4, 2.0), 3).is_ok());
        assert!(msi_frame(&f, (2.0, 2.0), 4).is_err());
        let raw = FlowField::zeros(10, 10, false);
        assert!(matches!(msi_frame(&raw, (2.0, 2.0), 3), Err(Error::NotNormalized)));
    }

    #[test]
    fn border_patch_averages_valid_pixels() {
        let mut u = vec![0.0f32; 16];
        u[0] = 0.4; // corner pixel
        let f = FlowField::new(4, 4, u, vec![0.0; 16], true).unwrap();
        // 3x3 patch at the corner covers the 2x2 valid pixels
        assert!((msi_frame(&f, (0.0, 0.0), 3).unwrap() - 0.1).abs() < 1e-8);
    }

    #[test]
    fn window_msi_cases() {
        assert_eq!(msi_window(&[0.3; 7], 100.0).unwrap(), 1.0);
        assert_eq!(msi_window(&[0.37; 20], 100.0).unwrap(), 1.0);
        let e = (-1.0f64).exp();
        assert!((msi_window(&[0.0, 0.02], 100.0).unwrap() - e).abs() < 1e-12);
        assert!((msi_window(&[0.0, 0.02], 100.0).unwrap() - 0.367879).abs() < 1e-6);
        assert!(matches!(msi_window(&[], 100.0), Err(Error::EmptySequence)));
        assert!(msi_window(&[f64::NAN], 100.0).is_err());
    }

    #[test]
    fn zero_flow_segment() {
        let seq = FlowSequence::new(vec![uniform_field(30, 30, 0.0, 0.0); 50], 25.0, "z").unwrap();
        let pose = track(50, 15.0, 15.0, 0.9);
        let w = window_msi_for_segment(&seq, &pose, 0.0, 2.0, 4, &MsiParams::default()).unwrap();
        assert_eq!(w.per_frame, vec![0.0; 50]);
        assert_eq!(w.msi, 1.0);
        assert_eq!((w.class_id, w.n_frames), (4, 50));
    }

    #[test]
    fn low_confidence_segment() {
        let seq = FlowSequence::new(vec![uniform_field(30, 30, 0.0, 0.0); 10], 10.0, "z").unwrap();
        let pose = track(10, 15.0, 15.0, 0.0);
        assert!(matches!(
            window_msi_for_segment(&seq, &pose, 0.0, 1.0, 0, &MsiParams::default()),
            Err(Error::InsufficientValidFrames { valid: 0, total: 10, .. })
        ));
    }

    #[test]
    fn half_valid_frames_suffice() {
        let seq = FlowSequence::new(vec![uniform_field(30, 30, 0.0, 0.0); 10], 10.0, "z").unwrap();
        let entries = (0..10)
            .map(|frame| Keypoint {
                frame,
                joint: 10,
                x: 5.0,
                y: 5.0,
                confidence: if frame % 2 == 0 { 0.9 } else { 0.1 },
            })
            .collect();
        let pose = PoseTrack::new(entries, 10).unwrap();
        let w = window_msi_for_segment(&seq, &pose, 0.0, 1.0, 0, &MsiParams::default()).unwrap();
        assert_eq!(w.n_valid_frames(), 5);
        let strict = MsiParams {
            min_valid_fraction: 0.6,
            ..Default::default()
        };
        assert!(window_msi_for_segment(&seq, &pose, 0.0, 1.0, 0, &strict).is_err());
    }

    #[test]
    fn oscillating_segment() {
        // patch magnitude alternates 0 / 0.02
        let frames: Vec<FlowField> = (0..40)
            .map(|i| {
                let m = if i % 2 == 0 { 0.0 } else { 0.02 };
                uniform_field(25, 25, m, 0.0)
            })
            .collect();
        let seq = FlowSequence::new(frames, 20.0, "osc").unwrap();
        let pose = track(40, 12.0, 12.0, 1.0);
        let w = window_msi_for_segment(&seq, &pose, 0.0, 2.0, 0, &MsiParams::default()).unwrap();
        // direct evaluation: population std of alternating {0, 0.02} is 0.01
        let direct = (-100.0f64 * 0.01).exp();
        assert!((w.msi - direct).abs() < 1e-6, "{}", w.msi);
    }

    #[test]
    fn segment_bounds() {
        let seq = FlowSequence::new(vec![uniform_field(10, 10, 0.0, 0.0); 10], 10.0, "b").unwrap();
        let pose = track(10, 5.0, 5.0, 1.0);
        let p = MsiParams::default();
        for (a, b) in [(-0.5, 0.5), (0.5, 1.5), (0.6, 0.6), (0.7, 0.2)] {
            assert!(matches!(
                window_msi_for_segment(&seq, &pose, a, b, 0, &p),
                Err(Error::SegmentOutOfRange { .. })
            ));
        }
        let w = window_msi_for_segment(&seq, &pose, 0.25, 0.55, 0, &p).unwrap();
        // frames starting at 0.3, 0.4, 0.5
        assert_eq!(w.n_frames, 3);
    }

    #[test]
    fn video_windows_slide() {
        let seq = FlowSequence::new(vec![uniform_field(10, 10, 0.0, 0.0); 100], 25.0, "v").unwrap();
        let pose = track(100, 5.0, 5.0, 1.0);
        let (ws, skipped) = video_windows(&seq, &pose, 2, 2.0, 1.0, &MsiParams::default()).unwrap();
        assert_eq!((ws.len(), skipped), (3, 0));
        assert_eq!(ws[2].t_start, 2.0);
        assert!(ws.iter().all(|w| w.n_frames == 50));
    }

    #[test]
    fn mode_of_degenerate_samples() {
        assert!((class_msi_mode(&[0.42; 25]).unwrap() - 0.42).abs() <= 1e-3);
        assert!((class_msi_mode(&[0.7]).unwrap() - 0.7).abs() <= 1e-3);
        assert!(matches!(class_msi_mode(&[]), Err(Error::EmptyInput)));
        assert!(class_msi_mode(&[0.0]).is_err());
        assert!(class_msi_mode(&[1.2]).is_err());
    }

    #[test]
    fn bandwidth_is_floored() {
        assert_eq!(silverman_bandwidth(&[0.5; 10]), 1e-3);
        let h = silverman_bandwidth(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert!(h > 0.05 && h < 0.2, "{h}");
    }

    /// Direct double-loop reference for the patch average.
    fn brute_patch(flow: &FlowField, x: f64, y: f64, k: usize) -> f64 {
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        let half = (k / 2) as i64;
        let mut sum = 0.0;
        let mut n = 0usize;
        for dy in -half..=half {
            for dx in -half..=half {
                let (r, c) = (cy + dy, cx + dx);
                if r >= 0 && c >= 0 && (r as usize) < flow.height() && (c as usize) < flow.width() {
                    let i = r as usize * flow.width() + c as usize;
                    let (u, v) = (flow.u()[i] as f64, flow.v()[i] as f64);
                    sum += (u * u + v * v).sqrt();
                    n += 1;
                }
            }
        }
        sum / n as f64
    }

    proptest! {
        #[test]
        fn frame_msi_matches_brute_force(seed in any::<u64>()) {
            let mut rng = SplitMix64::new(seed);
            let (h, w) = (1 + rng.next_below(12), 1 + rng.next_below(12));
            let u: Vec<f32> = (0..h * w).map(|_| rng.uniform(-0.1, 0.1) as f32).collect();
            let v: Vec<f32> = (0..h * w).map(|_| rng.uniform(-0.1, 0.1) as f32).collect();
            let f = FlowField::new(h, w, u, v, true).unwrap();
            let k = 3 + 2 * rng.next_below(4);
            let x = rng.uniform(-0.49, w as f64 - 0.51);
            let y = rng.uniform(-0.49, h as f64 - 0.51);
            prop_assert_eq!(msi_frame(&f, (x, y), k).unwrap(), brute_patch(&f, x, y, k));
        }

        #[test]
        fn window_msi_in_range(seed in any::<u64>(), n in 1usize..40) {
            let mut rng = SplitMix64::new(seed);
            let xs: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 0.05)).collect();
            let m = msi_window(&xs, 100.0).unwrap();
            prop_assert!(m > 0.0 && m <= 1.0);
            let constant = xs.iter().all(|&x| x == xs[0]);
            prop_assert_eq!(m == 1.0, constant);
        }

        #[test]
        fn amplifying_deviations_lowers_msi(seed in any::<u64>(), c in 1.05f64..4.0) {
            let mut rng = SplitMix64::new(seed);
            let xs: Vec<f64> = (0..20).map(|_| rng.uniform(0.0, 0.01)).collect();
            let mean = stats::mean(&xs);
            let ys: Vec<f64> = xs.iter().map(|x| mean + c * (x - mean)).collect();
            prop_assert!(msi_window(&ys, 100.0).unwrap() < msi_window(&xs, 100.0).unwrap());
        }

        #[test]
        fn mode_is_permutation_invariant(seed in any::<u64>()) {
            let mut rng = SplitMix64::new(seed);
            let n = 1 + rng.next_below(60);
            let mut xs: Vec<f64> = (0..n).map(|_| rng.uniform(0.01, 1.0)).collect();
            let a = class_msi_mode(&xs).unwrap();
            rng.shuffle(&mut xs);
            prop_assert_eq!(a, class_msi_mode(&xs).unwrap());
        }
    }
}
