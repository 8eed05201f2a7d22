//! Core value types and their on-disk formats.
//!
//! - [`FlowField`] / [`FlowSequence`]: per-pixel displacement planes, stored in
//!   the `MSIF1` binary container (see [`flow_file`])
//! - [`PoseTrack`]: 2D COCO-17 keypoints from a `frame,joint,x,y,conf` CSV
//! - [`ImuSeries`]: tri-axial accelerometry from a `t,ax,ay,az,label` CSV
//! - [`DatasetManifest`]: JSON document tying the files above to a class table

mod flow_file;
mod imu;
mod manifest;
mod pose;

pub use flow_file::{
    load_flow_sequence, parse_flow_sequence, parse_flow_text, write_flow_sequence,
    encode_flow_sequence, FLOW_MAGIC,
};
pub use imu::{load_imu_csv, parse_imu_csv, resample_linear, write_imu_csv, ImuSeries, Provenance};
pub use manifest::{ClassEntry, DatasetManifest, ImuEntry, VideoEntry};
pub use pose::{load_pose_track, parse_pose_csv, write_pose_csv, Keypoint, PoseTrack};

use crate::error::{Error, Result};

/// COCO-17 index of the right wrist, the default sensor location.
pub const RIGHT_WRIST: u8 = 10;
/// Number of joints in the COCO-17 keypoint schema.
pub const COCO_JOINTS: u8 = 17;

/// One optical-flow field between consecutive frames.
///
/// `u` is the vertical and `v` the horizontal displacement, both row-major
/// `height x width`. Values are in pixels per frame until [`normalized`]
/// is set, after which `u` is divided by the height and `v` by the width.
///
/// [`normalized`]: FlowField::normalized
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    u: Vec<f32>,
    v: Vec<f32>,
    normalized: bool,
}

impl FlowField {
    pub fn new(
        height: usize,
        width: usize,
        u: Vec<f32>,
        v: Vec<f32>,
        normalized: bool,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "flow field must be at least 1x1, got {height}x{width}"
            )));
        }
        let n = height * width;
        if u.len() != n || v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} entries per plane, got u={} v={}",
                u.len(),
                v.len()
            )));
        }
        for (plane, data) in [("u", &u), ("v", &v)] {
            if let Some(i) = data.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteValue(format!(
                    "{plane}[{}, {}]",
                    i / width,
                    i % width
                )));
            }
            if normalized {
                if let Some(i) = data.iter().position(|x| x.abs() > 1.0) {
                    return Err(Error::ImplausibleFlow(format!(
                        "|{plane}[{}, {}]| = {} > 1",
                        i / width,
                        i % width,
                        data[i].abs()
                    )));
                }
            }
        }
        Ok(FlowField {
            height,
            width,
            u,
            v,
            normalized,
        })
    }

    pub fn zeros(height: usize, width: usize, normalized: bool) -> Self {
        let n = height * width;
        FlowField::new(height, width, vec![0.0; n], vec![0.0; n], normalized)
            .expect("zero field is valid")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Vertical component plane, row-major.
    pub fn u(&self) -> &[f32] {
        &self.u
    }

    /// Horizontal component plane, row-major.
    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn at(&self, row: usize, col: usize) -> (f64, f64) {
        let i = row * self.width + col;
        (self.u[i] as f64, self.v[i] as f64)
    }

    /// Flow magnitude `sqrt(u^2 + v^2)` at a pixel.
    pub fn magnitude(&self, row: usize, col: usize) -> f64 {
        let (u, v) = self.at(row, col);
        (u * u + v * v).sqrt()
    }
}

/// Ordered flow fields of one video, one per consecutive frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSequence {
    frames: Vec<FlowField>,
    fps: f64,
    source_id: String,
}

impl FlowSequence {
    pub fn new(frames: Vec<FlowField>, fps: f64, source_id: impl Into<String>) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParameter(format!("fps must be > 0, got {fps}")));
        }
        if let Some(first) = frames.first() {
            let (h, w, n) = (first.height, first.width, first.normalized);
            if let Some(i) = frames
                .iter()
                .position(|f| f.height != h || f.width != w || f.normalized != n)
            {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} differs in size or normalization from frame 0"
                )));
            }
        }
        Ok(FlowSequence {
            frames,
            fps,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[FlowField] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(height, width)` shared by all frames, if any.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.height, f.width))
    }

    pub fn is_normalized(&self) -> bool {
        self.frames.first().is_some_and(|f| f.normalized)
    }

    /// Time covered by the sequence in seconds; frame `i` spans `[i/fps, (i+1)/fps)`.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }
}

pub(crate) fn file_stem(path: &std::path::Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_plane_length() {
        let r = FlowField::new(2, 2, vec![0.0; 4], vec![0.0; 3], false);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let mut u = vec![0.0; 4];
        u[3] = f32::INFINITY;
        let r = FlowField::new(2, 2, u, vec![0.0; 4], false);
        assert!(matches!(r, Err(Error::NonFiniteValue(_))));
    }

    #[test]
    fn normalized_flow_is_bounded() {
        let r = FlowField::new(1, 2, vec![0.5, 1.5], vec![0.0; 2], true);
        assert!(matches!(r, Err(Error::ImplausibleFlow(_))));
        // the same values are fine as raw pixel displacements
        assert!(FlowField::new(1, 2, vec![0.5, 1.5], vec![0.0; 2], false).is_ok());
    }

    #[test]
    fn sequence_frames_must_agree() {
        let a = FlowField::zeros(2, 2, false);
        let b = FlowField::zeros(2, 3, false);
        assert!(FlowSequence::new(vec![a.clone(), b], 25.0, "x").is_err());
        let c = FlowField::zeros(2, 2, true);
        assert!(FlowSequence::new(vec![a.clone(), c], 25.0, "x").is_err());
        assert!(FlowSequence::new(vec![a], 0.0, "x").is_err());
    }
}
