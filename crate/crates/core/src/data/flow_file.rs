//! `MSIF1` flow container.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "MSIF1\n"            6 bytes magic
//! height               u32
//! width                u32
//! frame count          u32
//! fps                  f64
//! normalized           u8 (0 or 1)
//! payload              f32 x 2*H*W*frames, frame-major, u plane then v plane
//! ```

use std::path::Path;

use super::{file_stem, FlowField, FlowSequence};
use crate::error::{Error, Result};

pub const FLOW_MAGIC: &[u8; 6] = b"MSIF1\n";
const HEADER_LEN: usize = 6 + 4 + 4 + 4 + 8 + 1;

pub fn load_flow_sequence(path: impl AsRef<Path>) -> Result<FlowSequence> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_flow_sequence(&bytes, file_stem(path))
}

pub fn parse_flow_sequence(bytes: &[u8], source_id: impl Into<String>) -> Result<FlowSequence> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "file is {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..6] != FLOW_MAGIC {
        return Err(Error::MalformedHeader("missing MSIF1 magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let height = u32_at(6);
    let width = u32_at(10);
    let n_frames = u32_at(14);
    let fps = f64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let normalized = match bytes[26] {
        0 => false,
        1 => true,
        b => {
            return Err(Error::MalformedHeader(format!(
                "normalized flag must be 0 or 1, got {b}"
            )))
        }
    };
    if height == 0 || width == 0 {
        return Err(Error::MalformedHeader(format!(
            "frame size {height}x{width} must be at least 1x1"
        )));
    }
    if n_frames == 0 {
        return Err(Error::MalformedHeader("frame count must be at least 1".into()));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::MalformedHeader(format!("fps must be > 0, got {fps}")));
    }

    let plane = height * width;
    let expected = 2 * plane * n_frames * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }

    let mut floats = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let mut frames = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let u: Vec<f32> = floats.by_ref().take(plane).collect();
        let v: Vec<f32> = floats.by_ref().take(plane).collect();
        let field = FlowField::new(height, width, u, v, normalized).map_err(|e| match e {
            Error::NonFiniteValue(at) => Error::NonFiniteValue(format!("frame {f}, {at}")),
            other => other,
        })?;
        frames.push(field);
    }
    FlowSequence::new(frames, fps, source_id)
}

pub fn encode_flow_sequence(seq: &FlowSequence) -> Vec<u8> {
    let (h, w) = seq.dims().unwrap_or((1, 1));
    let mut out = Vec::with_capacity(HEADER_LEN + seq.len() * 2 * h * w * 4);
    out.extend_from_slice(FLOW_MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    out.extend_from_slice(&seq.fps().to_le_bytes());
    out.push(seq.is_normalized() as u8);
    for frame in seq.frames() {
        for x in frame.u().iter().chain(frame.v()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn write_flow_sequence(seq: &FlowSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_flow_sequence(seq)).map_err(|e| Error::io(path, e))
}

/// Text importer, mostly for tests and hand-made fixtures.
///
/// First non-comment line: `height width frames fps normalized(0|1)`; the
/// remaining whitespace-separated numbers follow the binary payload order.
/// Lines starting with `#` are ignored.
pub fn parse_flow_text(text: &str, source_id: impl Into<String>) -> Result<FlowSequence> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace);
    let mut header = |name: &str| {
        tokens
            .next()
            .ok_or_else(|| Error::MalformedHeader(format!("missing {name}")))
            .map(str::to_owned)
    };
    let parse_usize = |s: String, name: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad {name}: {s}")))
    };
    let height = parse_usize(header("height")?, "height")?;
    let width = parse_usize(header("width")?, "width")?;
    let n_frames = parse_usize(header("frames")?, "frames")?;
    let fps_s = header("fps")?;
    let fps: f64 = fps_s
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad fps: {fps_s}")))?;
    let normalized = match header("normalized")?.as_str() {
        "0" => false,
        "1" => true,
        other => return Err(Error::MalformedHeader(format!("bad normalized flag: {other}"))),
    };
    if height == 0 || width == 0 || n_frames == 0 {
        return Err(Error::MalformedHeader(
            "frame size must be at least 1x1 with at least one frame".into(),
        ));
    }

    let values = tokens
        .map(|t| {
            t.parse::<f32>()
                .map_err(|_| Error::MalformedHeader(format!("bad value: {t}")))
        })
        .collect::<Result<Vec<f32>>>()?;
    let plane = height * width;
    if values.len() != 2 * plane * n_frames {
        return Err(Error::DimensionMismatch(format!(
            "{} values, header implies {}",
            values.len(),
            2 * plane * n_frames
        )));
    }
    let frames = values
        .chunks_exact(2 * plane)
        .map(|c| {
            FlowField::new(
                height,
                width,
                c[..plane].to_vec(),
                c[plane..].to_vec(),
                normalized,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    FlowSequence::new(frames, fps, source_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(h: u32, w: u32, frames: u32, fps: f64, normalized: u8) -> Vec<u8> {
        let mut b = FLOW_MAGIC.to_vec();
        b.extend_from_slice(&h.to_le_bytes());
        b.extend_from_slice(&w.to_le_bytes());
        b.extend_from_slice(&frames.to_le_bytes());
        b.extend_from_slice(&fps.to_le_bytes());
        b.push(normalized);
        b
    }

    #[test]
    fn single_zero_frame() {
        let mut b = header(2, 2, 1, 30.0, 0);
        b.extend(std::iter::repeat_n(0u8, 8 * 4));
        let seq = parse_flow_sequence(&b, "zero").unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.dims(), Some((2, 2)));
        assert!(seq.frames()[0].u().iter().chain(seq.frames()[0].v()).all(|&x| x == 0.0));
        assert!(!seq.is_normalized());
    }

    #[test]
    fn short_payload() {
        let mut b = header(2, 2, 1, 30.0, 0);
        b.extend(std::iter::repeat_n(0u8, (8 - 3) * 4));
        assert!(matches!(
            parse_flow_sequence(&b, "s"),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nan_entry() {
        let mut b = header(2, 2, 2, 30.0, 0);
        for i in 0..16 {
            let x = if i == 11 { f32::NAN } else { 0.25 };
            b.extend_from_slice(&x.to_le_bytes());
        }
        assert!(matches!(
            parse_flow_sequence(&b, "n"),
            Err(Error::NonFiniteValue(_))
        ));
    }

    #[test]
    fn bad_magic_and_flag() {
        let mut b = header(1, 1, 1, 30.0, 0);
        b[0] = b'X';
        assert!(matches!(parse_flow_sequence(&b, "m"), Err(Error::MalformedHeader(_))));
        let b = header(1, 1, 1, 30.0, 7);
        assert!(matches!(parse_flow_sequence(&b, "m"), Err(Error::MalformedHeader(_))));
        let b = header(1, 1, 1, -1.0, 0);
        assert!(matches!(parse_flow_sequence(&b, "m"), Err(Error::MalformedHeader(_))));
        let b = header(1, 1, 0, 30.0, 0);
        assert!(matches!(parse_flow_sequence(&b, "m"), Err(Error::MalformedHeader(_))));
        assert!(matches!(parse_flow_sequence(b"MSIF1\n", "m"), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn text_importer_matches_binary() {
        let text = "# two frames\n1 2 2 25 0\n1 2\n3 4\n5 6\n7 8\n";
        let seq = parse_flow_text(text, "t").unwrap();
        assert_eq!(seq.frames()[1].u(), &[5.0, 6.0]);
        assert_eq!(seq.frames()[1].v(), &[7.0, 8.0]);
        let round = parse_flow_sequence(&encode_flow_sequence(&seq), "t").unwrap();
        assert_eq!(round, seq);
        assert!(matches!(
            parse_flow_text("1 2 2 25 0\n1 2 3", "t"),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip7.msif");
        let seq = parse_flow_text("2 1 1 12.5 1\n0.1 -0.2 0.3 0.4", "ignored").unwrap();
        write_flow_sequence(&seq, &path).unwrap();
        let back = load_flow_sequence(&path).unwrap();
        assert_eq!(back.source_id(), "clip7");
        assert_eq!(back.frames(), seq.frames());
        assert_eq!(back.fps(), 12.5);
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_byte_identical(
            h in 1u32..5, w in 1u32..5, frames in 1u32..4,
            fps in 0.5f64..120.0, normalized in any::<bool>(), seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let mut bytes = header(h, w, frames, fps, normalized as u8);
            for _ in 0..(2 * h * w * frames) {
                let x = rng.uniform(-1.0, 1.0) as f32;
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            let seq = parse_flow_sequence(&bytes, "p").unwrap();
            prop_assert_eq!(encode_flow_sequence(&seq), bytes);
        }
    }
}
