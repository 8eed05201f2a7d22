//! Optical flow: frame-size normalization and a Horn–Schunck estimator.
//!
//! Component naming follows the flow container: `u` is vertical (rows) and
//! `v` horizontal (columns). Normalization divides `u` by the frame height
//! and `v` by the frame width.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FlowField;
use crate::error::{Error, Result};
use crate::par;

/// Grayscale frame with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayFrame {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width} frame with {} intensities",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(GrayFrame {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        GrayFrame::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Intensity with replicate padding outside the frame.
    fn clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.data[r * self.width + c]
    }
}

/// Reads an 8-bit binary PGM (`P5`), scaling intensities by `1 / maxval`.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayFrame> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::MalformedHeader(format!("expected P5, got {}", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad PGM field {s:?}")))
    };
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::MalformedHeader(format!("maxval {maxval} is not 8-bit")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos || bytes.len() - pos != n {
        return Err(Error::DimensionMismatch(format!(
            "PGM raster holds {} bytes, expected {n}",
            bytes.len().saturating_sub(pos)
        )));
    }
    let scale = 1.0 / maxval as f64;
    let data = bytes[pos..]
        .iter()
        .map(|&b| (b as f64 * scale).min(1.0))
        .collect();
    GrayFrame::new(height, width, data)
}

/// Divides `u` by the frame height and `v` by the frame width.
pub fn normalize_flow(raw: &FlowField) -> Result<FlowField> {
    if raw.normalized() {
        return Err(Error::AlreadyNormalized);
    }
    let (h, w) = (raw.height() as f64, raw.width() as f64);
    let u = raw.u().iter().map(|&x| (x as f64 / h) as f32).collect();
    let v = raw.v().iter().map(|&x| (x as f64 / w) as f32).collect();
    FlowField::new(raw.height(), raw.width(), u, v, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HornSchunckParams {
    pub alpha: f64,
    pub iterations: usize,
    pub convergence_eps: f64,
}

impl Default for HornSchunckParams {
    fn default() -> Self {
        HornSchunckParams {
            alpha: 1.0,
            iterations: 100,
            convergence_eps: 1e-4,
        }
    }
}

impl HornSchunckParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(self.convergence_eps >= 0.0) {
            return Err(Error::InvalidParameter("convergence_eps must be >= 0".into()));
        }
        Ok(())
    }
}

/// Image derivatives shared by every Jacobi sweep.
struct Gradients {
    height: usize,
    width: usize,
    ix: Vec<f64>,
    iy: Vec<f64>,
    it: Vec<f64>,
}

impl Gradients {
    /// Spatial central differences of the frame average, temporal forward difference.
    fn new(a: &GrayFrame, b: &GrayFrame) -> Self {
        let (h, w) = (a.height, a.width);
        let mut ix = vec![0.0; h * w];
        let mut iy = vec![0.0; h * w];
        let mut it = vec![0.0; h * w];
        for r in 0..h as isize {
            for c in 0..w as isize {
                let avg = |rr, cc| 0.5 * (a.clamped(rr, cc) + b.clamped(rr, cc));
                let i = r as usize * w + c as usize;
                ix[i] = 0.5 * (avg(r, c + 1) - avg(r, c - 1));
                iy[i] = 0.5 * (avg(r + 1, c) - avg(r - 1, c));
                it[i] = b.data[i] - a.data[i];
            }
        }
        Gradients {
            height: h,
            width: w,
            ix,
            iy,
            it,
        }
    }

    /// 4-neighbour mean of `(horizontal, vertical)` flow with replicate padding.
    fn neighbour_mean(&self, flow: &[[f64; 2]], r: usize, c: usize) -> [f64; 2] {
        let w = self.width;
        let up = flow[r.saturating_sub(1) * w + c];
        let down = flow[(r + 1).min(self.height - 1) * w + c];
        let left = flow[r * w + c.saturating_sub(1)];
        let right = flow[r * w + (c + 1).min(w - 1)];
        [
            0.25 * (up[0] + down[0] + left[0] + right[0]),
            0.25 * (up[1] + down[1] + left[1] + right[1]),
        ]
    }

    fn sweep(&self, prev: &[[f64; 2]], next: &mut [[f64; 2]], alpha2: f64) {
        let w = self.width;
        par::for_each_row_mut(next, w, |r, row| {
            for (c, out) in row.iter_mut().enumerate() {
                let i = r * w + c;
                let [hbar, vbar] = self.neighbour_mean(prev, r, c);
                let (ix, iy) = (self.ix[i], self.iy[i]);
                let k = (ix * hbar + iy * vbar + self.it[i]) / (alpha2 + ix * ix + iy * iy);
                *out = [hbar - ix * k, vbar - iy * k];
            }
        });
    }

    /// Data term plus `alpha^2 / 4` times the squared differences over every
    /// unordered 4-neighbour pair; the Jacobi sweep never increases it.
    fn energy(&self, flow: &[[f64; 2]], alpha2: f64) -> f64 {
        let (h, w) = (self.height, self.width);
        let mut data = 0.0;
        let mut smooth = 0.0;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let [hf, vf] = flow[i];
                let d = self.ix[i] * hf + self.iy[i] * vf + self.it[i];
                data += d * d;
                for j in [(c + 1 < w).then(|| i + 1), (r + 1 < h).then(|| i + w)]
                    .into_iter()
                    .flatten()
                {
                    let dh = hf - flow[j][0];
                    let dv = vf - flow[j][1];
                    smooth += dh * dh + dv * dv;
                }
            }
        }
        data + 0.25 * alpha2 * smooth
    }
}

fn check_pair(a: &GrayFrame, b: &GrayFrame) -> Result<()> {
    if a.height != b.height || a.width != b.width {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    if a.height < 3 || a.width < 3 {
        return Err(Error::FrameTooSmall {
            height: a.height,
            width: a.width,
        });
    }
    Ok(())
}

/// Result of a Horn–Schunck run with its convergence trace.
#[derive(Debug, Clone)]
pub struct HornSchunckRun {
    pub flow: FlowField,
    pub sweeps: usize,
    /// Objective value before the first sweep and after every sweep.
    pub energies: Vec<f64>,
}

/// Dense raw (pixel-unit) flow from `a` to `b` by Jacobi iteration of the
/// Horn–Schunck equations, starting from zero flow.
pub fn horn_schunck(a: &GrayFrame, b: &GrayFrame, p: &HornSchunckParams) -> Result<FlowField> {
    run_horn_schunck(a, b, p, false).map(|r| r.flow)
}

/// As [`horn_schunck`], also recording the objective after each sweep.
pub fn horn_schunck_traced(
    a: &GrayFrame,
    b: &GrayFrame,
    p: &HornSchunckParams,
) -> Result<HornSchunckRun> {
    run_horn_schunck(a, b, p, true)
}

fn run_horn_schunck(
    a: &GrayFrame,
    b: &GrayFrame,
    p: &HornSchunckParams,
    trace: bool,
) -> Result<HornSchunckRun> {
    check_pair(a, b)?;
    p.validate()?;
    let g = Gradients::new(a, b);
    let alpha2 = p.alpha * p.alpha;
    let n = a.height * a.width;
    let mut prev = vec![[0.0f64; 2]; n];
    let mut next = vec![[0.0f64; 2]; n];
    let mut energies = Vec::new();
    if trace {
        energies.push(g.energy(&prev, alpha2));
    }
    let mut sweeps = 0;
    for _ in 0..p.iterations {
        g.sweep(&prev, &mut next, alpha2);
        sweeps += 1;
        let max_update = prev
            .iter()
            .zip(&next)
            .map(|(o, n)| (o[0] - n[0]).abs().max((o[1] - n[1]).abs()))
            .fold(0.0, f64::max);
        std::mem::swap(&mut prev, &mut next);
        if trace {
            energies.push(g.energy(&prev, alpha2));
        }
        if max_update < p.convergence_eps {
            break;
        }
    }
    let v = prev.iter().map(|f| f[0] as f32).collect();
    let u = prev.iter().map(|f| f[1] as f32).collect();
    Ok(HornSchunckRun {
        flow: FlowField::new(a.height, a.width, u, v, false)?,
        sweeps,
        energies,
    })
}
