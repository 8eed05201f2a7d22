use std::path::Path;

use super::{COCO_JOINTS, RIGHT_WRIST};
use crate::error::{Error, Result};

const POSE_HEADER: [&str; 5] = ["frame", "joint", "x", "y", "conf"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub frame: usize,
    /// COCO-17 joint index.
    pub joint: u8,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

/// Keypoint detections of one person, sorted by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrack {
    entries: Vec<Keypoint>,
    target_joint: u8,
}

impl PoseTrack {
    /// Builds a track; entries are stably sorted by frame index.
    pub fn new(mut entries: Vec<Keypoint>, target_joint: u8) -> Result<Self> {
        if target_joint >= COCO_JOINTS {
            return Err(Error::InvalidParameter(format!(
                "target joint {target_joint} outside COCO-17"
            )));
        }
        for (i, k) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&k.confidence) {
                return Err(Error::ConfidenceOutOfRange {
                    line: i + 1,
                    value: k.confidence,
                });
            }
            if k.joint >= COCO_JOINTS || !k.x.is_finite() || !k.y.is_finite() {
                return Err(Error::MalformedRow {
                    line: i + 1,
                    reason: format!("invalid joint {} or coordinates", k.joint),
                });
            }
        }
        entries.sort_by_key(|k| k.frame);
        Ok(PoseTrack {
            entries,
            target_joint,
        })
    }

    pub fn entries(&self) -> &[Keypoint] {
        &self.entries
    }

    pub fn target_joint(&self) -> u8 {
        self.target_joint
    }

    pub fn with_target_joint(mut self, joint: u8) -> Result<Self> {
        if joint >= COCO_JOINTS {
            return Err(Error::InvalidParameter(format!("target joint {joint} outside COCO-17")));
        }
        self.target_joint = joint;
        Ok(self)
    }

    /// Detections of any joint at `frame`.
    pub fn at_frame(&self, frame: usize) -> &[Keypoint] {
        let lo = self.entries.partition_point(|k| k.frame < frame);
        let hi = self.entries.partition_point(|k| k.frame <= frame);
        &self.entries[lo..hi]
    }

    /// The most confident detection of the target joint at `frame`
    /// (earliest row wins a tie).
    pub fn target_at(&self, frame: usize) -> Option<&Keypoint> {
        self.at_frame(frame)
            .iter()
            .filter(|k| k.joint == self.target_joint)
            .fold(None, |best: Option<&Keypoint>, k| match best {
                Some(b) if b.confidence >= k.confidence => Some(b),
                _ => Some(k),
            })
    }
}

pub fn load_pose_track(path: impl AsRef<Path>) -> Result<PoseTrack> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose_csv(&text)
}

/// Parses the `frame,joint,x,y,conf` format; target joint defaults to the right wrist.
pub fn parse_pose_csv(text: &str) -> Result<PoseTrack> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(POSE_HEADER) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header {}", POSE_HEADER.join(",")),
        });
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let bad = |reason: String| Error::MalformedRow { line, reason };
        if record.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", record.len())));
        }
        let frame: usize = record[0]
            .parse()
            .map_err(|_| bad(format!("bad frame index {:?}", &record[0])))?;
        let joint: u8 = record[1]
            .parse()
            .ok()
            .filter(|&j| j < COCO_JOINTS)
            .ok_or_else(|| bad(format!("bad joint {:?}", &record[1])))?;
        let num = |j: usize| -> Result<f64> {
            record[j]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("bad number {:?}", &record[j])))
        };
        let (x, y, confidence) = (num(2)?, num(3)?, num(4)?);
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ConfidenceOutOfRange {
                line,
                value: confidence,
            });
        }
        entries.push(Keypoint {
            frame,
            joint,
            x,
            y,
            confidence,
        });
    }
    PoseTrack::new(entries, RIGHT_WRIST)
}

pub fn write_pose_csv(track: &PoseTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(POSE_HEADER)?;
    for k in track.entries() {
        w.write_record([
            k.frame.to_string(),
            k.joint.to_string(),
            k.x.to_string(),
            k.y.to_string(),
            k.confidence.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let t = parse_pose_csv("frame,joint,x,y,conf\n0,10,5.0,7.0,0.9\n").unwrap();
        assert_eq!(t.entries().len(), 1);
        let k = t.entries()[0];
        assert_eq!((k.frame, k.joint, k.x, k.y), (0, 10, 5.0, 7.0));
        assert_eq!(t.target_at(0).unwrap().confidence, 0.9);
    }

    #[test]
    fn sorts_by_frame() {
        let t = parse_pose_csv(
            "frame,joint,x,y,conf\n2,10,1,1,0.5\n0,10,2,2,0.5\n1,9,3,3,0.5\n0,9,4,4,0.5\n",
        )
        .unwrap();
        let frames: Vec<usize> = t.entries().iter().map(|k| k.frame).collect();
        assert_eq!(frames, vec![0, 0, 1, 2]);
        assert_eq!(t.entries()[0].x, 2.0);
        assert_eq!(t.entries()[1].x, 4.0);
        assert_eq!(t.at_frame(1).len(), 1);
        assert!(t.target_at(1).is_none());
    }

    #[test]
    fn confidence_bounds() {
        let r = parse_pose_csv("frame,joint,x,y,conf\n0,10,1,1,1.5\n");
        assert!(matches!(r, Err(Error::ConfidenceOutOfRange { line: 2, .. })));
    }

    #[test]
    fn malformed_rows() {
        for body in ["0,10,1,1", "0,17,1,1,0.5", "x,10,1,1,0.5", "0,10,nan,1,0.5"] {
            let r = parse_pose_csv(&format!("frame,joint,x,y,conf\n{body}\n"));
            assert!(matches!(r, Err(Error::MalformedRow { .. })), "{body}");
        }
        assert!(matches!(
            parse_pose_csv("f,j,x,y,c\n0,10,1,1,0.5\n"),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn best_target_detection_wins() {
        let t = parse_pose_csv("frame,joint,x,y,conf\n3,10,1,1,0.4\n3,10,2,2,0.8\n3,10,3,3,0.8\n")
            .unwrap();
        assert_eq!(t.target_at(3).unwrap().x, 2.0);
    }
}
