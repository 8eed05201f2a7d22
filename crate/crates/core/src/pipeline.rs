//! From IMU series to feature windows: calibration of virtual data,
//! sliding-window segmentation and per-window features.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ImuSeries, Provenance};
use crate::error::{Error, Result};
use crate::{par, stats};

/// Sliding-window geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length_s: f64,
    pub step_s: f64,
    pub rate_hz: f64,
}

impl WindowSpec {
    /// 3 s windows every 1.5 s at 25 Hz (daily activities).
    pub const DAILY: WindowSpec = WindowSpec {
        length_s: 3.0,
        step_s: 1.5,
        rate_hz: 25.0,
    };

    /// 6 s windows with 50% overlap at 25 Hz (eating).
    pub const EATING: WindowSpec = WindowSpec {
        length_s: 6.0,
        step_s: 3.0,
        rate_hz: 25.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.length_s > 0.0 && self.length_s.is_finite()) {
            return Err(Error::InvalidParameter("window length must be > 0".into()));
        }
        if !(self.step_s > 0.0 && self.step_s <= self.length_s) {
            return Err(Error::InvalidParameter("step must be in (0, length]".into()));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::InvalidParameter("rate must be > 0".into()));
        }
        Ok(())
    }

    /// Window length in samples, rounded half up.
    pub fn length_samples(&self) -> usize {
        round_half_up(self.length_s * self.rate_hz)
    }

    /// Step in samples, rounded half up.
    pub fn step_samples(&self) -> usize {
        round_half_up(self.step_s * self.rate_hz)
    }
}

fn round_half_up(x: f64) -> usize {
    // the small bias keeps 37.4999999 (float noise for 37.5) rounding up
    (x + 0.5 + 1e-9).floor() as usize
}

/// Sample range of one analysis window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawWindow {
    pub start: usize,
    pub len: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Majority label, ties to the smaller class id.
    pub label: u32,
}

impl RawWindow {
    pub fn samples<'a>(&self, series: &'a ImuSeries) -> &'a [[f64; 3]] {
        &series.samples()[self.start..self.start + self.len]
    }
}

/// Splits a series into windows starting at samples `0, S, 2S, ...` while
/// the whole window fits.
pub fn segment(series: &ImuSeries, spec: &WindowSpec) -> Result<Vec<RawWindow>> {
    spec.validate()?;
    if (series.rate_hz() - spec.rate_hz).abs() > 0.01 * spec.rate_hz {
        return Err(Error::InvalidParameter(format!(
            "series at {:.3} Hz, window spec expects {} Hz",
            series.rate_hz(),
            spec.rate_hz
        )));
    }
    let (len, step) = (spec.length_samples(), spec.step_samples());
    let n = series.len();
    if len == 0 || step == 0 || n < len {
        return Err(Error::SeriesTooShort {
            samples: n,
            window: len,
        });
    }
    let duration = len as f64 / spec.rate_hz;
    Ok((0..=n - len)
        .step_by(step)
        .map(|start| {
            let t_start = series.timestamps()[start];
            RawWindow {
                start,
                len,
                t_start,
                t_end: t_start + duration,
                label: majority_label(&series.labels()[start..start + len]),
            }
        })
        .collect())
}

fn majority_label(labels: &[u32]) -> u32 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    // BTreeMap iterates ascending, so the first maximum is the smallest id
    let mut best = (0, 0);
    for (l, c) in counts {
        if c > best.1 {
            best = (l, c);
        }
    }
    best.0
}

/// Per-axis mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl AxisStats {
    pub fn of_samples<'a>(samples: impl IntoIterator<Item = &'a [f64; 3]>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = [0.0; 3];
        let all: Vec<&[f64; 3]> = samples.into_iter().collect();
        for s in &all {
            n += 1;
            for ax in 0..3 {
                sum[ax] += s[ax];
            }
        }
        if n == 0 {
            return Err(Error::EmptyReference);
        }
        let mean = sum.map(|x| x / n as f64);
        let mut ss = [0.0; 3];
        for s in &all {
            for ax in 0..3 {
                let d = s[ax] - mean[ax];
                ss[ax] += d * d;
            }
        }
        Ok(AxisStats {
            mean,
            std: ss.map(|x| (x / n as f64).sqrt()),
        })
    }

    /// Statistics pooled over every sample of every series.
    pub fn pooled(series: &[ImuSeries]) -> Result<Self> {
        AxisStats::of_samples(series.iter().flat_map(|s| s.samples()))
    }
}

/// Maps each virtual axis onto the pooled real statistics:
/// `x' = (x - mean_v) / std_v * std_r + mean_r`.
pub fn calibrate_virtual(virtual_series: &ImuSeries, real_train: &[ImuSeries]) -> Result<ImuSeries> {
    if real_train.is_empty() {
        return Err(Error::EmptyReference);
    }
    calibrate_with_stats(virtual_series, &AxisStats::pooled(real_train)?)
}

pub fn calibrate_with_stats(virtual_series: &ImuSeries, target: &AxisStats) -> Result<ImuSeries> {
    let own = AxisStats::of_samples(virtual_series.samples())?;
    apply_calibration(virtual_series, &own, target)
}

/// Calibrates several virtual series with one shared map built from their
/// pooled statistics, so their relative scales are preserved.
pub fn calibrate_pooled(virtual_series: &[ImuSeries], target: &AxisStats) -> Result<Vec<ImuSeries>> {
    let own = AxisStats::pooled(virtual_series)?;
    virtual_series
        .iter()
        .map(|s| apply_calibration(s, &own, target))
        .collect()
}

fn apply_calibration(series: &ImuSeries, own: &AxisStats, target: &AxisStats) -> Result<ImuSeries> {
    if let Some(axis) = own.std.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::ZeroVarianceAxis { axis });
    }
    let samples = series
        .samples()
        .iter()
        .map(|s| {
            std::array::from_fn(|ax| (s[ax] - own.mean[ax]) / own.std[ax] * target.std[ax] + target.mean[ax])
        })
        .collect();
    Ok(series.map_samples(samples))
}

/// Feature family computed per window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum FeatureSet {
    /// Inverse-ECDF values at `points_per_axis` quantiles plus the mean, per axis.
    Ecdf { points_per_axis: usize },
    /// Mean, variance, skewness, kurtosis and RMS per axis.
    Stats,
}

impl Default for FeatureSet {
    fn default() -> Self {
        FeatureSet::Ecdf { points_per_axis: 15 }
    }
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        match *self {
            FeatureSet::Ecdf { points_per_axis } => 3 * (points_per_axis + 1),
            FeatureSet::Stats => 15,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extract(&self, window: &[[f64; 3]]) -> Result<Vec<f64>> {
        match *self {
            FeatureSet::Ecdf { points_per_axis } => ecdf_features(window, points_per_axis),
            FeatureSet::Stats => stat_features(window),
        }
    }
}

/// Per axis: sorted-sample values at levels `(k + 0.5) / points` by linear
/// interpolation of the empirical inverse CDF, then the axis mean.
pub fn ecdf_features(window: &[[f64; 3]], points_per_axis: usize) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if points_per_axis < 2 {
        return Err(Error::InvalidParameter("points_per_axis must be >= 2".into()));
    }
    let mut out = Vec::with_capacity(3 * (points_per_axis + 1));
    for ax in 0..3 {
        let axis: Vec<f64> = window.iter().map(|s| s[ax]).collect();
        let sorted = stats::sorted_copy(&axis);
        for k in 0..points_per_axis {
            let q = (k as f64 + 0.5) / points_per_axis as f64;
            out.push(stats::quantile_sorted(&sorted, q));
        }
        out.push(stats::mean(&axis));
    }
    Ok(out)
}

/// Per axis: mean, population variance, skewness `m3 / m2^1.5`, raw
/// kurtosis `m4 / m2^2` and RMS. A zero-variance axis has skewness and
/// kurtosis 0.
pub fn stat_features(window: &[[f64; 3]]) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let n = window.len() as f64;
    let mut out = Vec::with_capacity(15);
    for ax in 0..3 {
        let axis: Vec<f64> = window.iter().map(|s| s[ax]).collect();
        let mean = stats::mean(&axis);
        let (mut m2, mut m3, mut m4, mut sq) = (0.0, 0.0, 0.0, 0.0);
        for &x in &axis {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
            sq += x * x;
        }
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        // rounding in the mean leaves ~1e-34 residue on constant axes
        let flat = m2 <= 1e-24 * (1.0 + mean * mean);
        let (skew, kurt) = if flat {
            (0.0, 0.0)
        } else {
            (m3 / m2.powf(1.5), m4 / (m2 * m2))
        };
        out.extend([mean, if flat { 0.0 } else { m2 }, skew, kurt, (sq / n).sqrt()]);
    }
    Ok(out)
}

/// One analysis window's feature vector with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub features: Vec<f64>,
    pub label: u32,
    pub provenance: Provenance,
    pub t_start: f64,
    pub t_end: f64,
    /// Window MSI of the matching video segment (virtual windows only).
    pub msi: Option<f64>,
    pub subject_id: String,
    pub source_id: String,
}

impl FeatureWindow {
    pub fn center(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }
}

/// Segments a series and extracts one feature vector per window, in parallel.
pub fn extract_windows(
    series: &ImuSeries,
    spec: &WindowSpec,
    features: &FeatureSet,
) -> Result<Vec<FeatureWindow>> {
    let windows = segment(series, spec)?;
    let source = series.source_id().unwrap_or(series.subject_id()).to_owned();
    par::map(&windows, |w| {
        Ok(FeatureWindow {
            features: features.extract(w.samples(series))?,
            label: w.label,
            provenance: series.provenance(),
            t_start: w.t_start,
            t_end: w.t_end,
            msi: None,
            subject_id: series.subject_id().to_owned(),
            source_id: source.clone(),
        })
    })
    .into_iter()
    .collect()
}

/// Writes `subject,source,provenance,t_start,t_end,label,msi,f0..fN`.
pub fn write_feature_csv(windows: &[FeatureWindow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let width = windows.first().map_or(0, |w| w.features.len());
    if windows.iter().any(|w| w.features.len() != width) {
        return Err(Error::DimensionMismatch("feature lengths differ".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["subject", "source", "provenance", "t_start", "t_end", "label", "msi"]
        .map(String::from)
        .to_vec();
    header.extend((0..width).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for win in windows {
        let mut row = vec![
            win.subject_id.clone(),
            win.source_id.clone(),
            win.provenance.as_str().to_owned(),
            win.t_start.to_string(),
            win.t_end.to_string(),
            win.label.to_string(),
            win.msi.map(|m| m.to_string()).unwrap_or_default(),
        ];
        row.extend(win.features.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureWindow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |reason: &str| Error::MalformedRow {
            line,
            reason: reason.to_owned(),
        };
        if rec.len() < 7 {
            return Err(bad("expected at least 7 fields"));
        }
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| bad("bad number"));
        let features = (7..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
        out.push(FeatureWindow {
            subject_id: rec[0].to_owned(),
            source_id: rec[1].to_owned(),
            provenance: rec[2].parse()?,
            t_start: num(3)?,
            t_end: num(4)?,
            label: rec[5].parse().map_err(|_| bad("bad label"))?,
            msi: if rec[6].is_empty() { None } else { Some(num(6)?) },
            features,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn series_at(hz: f64, n: usize, f: impl Fn(usize) -> ([f64; 3], u32)) -> ImuSeries {
        let ts = (0..n).map(|i| i as f64 / hz).collect();
        let (samples, labels) = (0..n).map(f).unzip();
        ImuSeries::new(ts, samples, labels, Provenance::Real, "s").unwrap()
    }

    #[test]
    fn pooled_calibration_keeps_relative_scale() {
        let quiet = series_at(25.0, 100, |i| ([(i % 2) as f64, (i % 3) as f64, (i % 5) as f64], 0));
        let loud = quiet.map_samples(quiet.samples().iter().map(|s| s.map(|x| 4.0 * x)).collect());
        let target = AxisStats { mean: [1.0, -2.0, 0.5], std: [3.0, 1.0, 2.0] };
        let out = calibrate_pooled(&[quiet, loud], &target).unwrap();
        let pooled = AxisStats::pooled(&out).unwrap();
        for ax in 0..3 {
            assert!((pooled.mean[ax] - target.mean[ax]).abs() < 1e-9);
            assert!((pooled.std[ax] - target.std[ax]).abs() < 1e-9);
            let a = AxisStats::of_samples(out[0].samples()).unwrap().std[ax];
            let b = AxisStats::of_samples(out[1].samples()).unwrap().std[ax];
            assert!((b / a - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn window_sample_counts() {
        assert_eq!(WindowSpec::DAILY.length_samples(), 75);
        assert_eq!(WindowSpec::DAILY.step_samples(), 38);
        assert_eq!(WindowSpec::EATING.length_samples(), 150);
        assert_eq!(WindowSpec::EATING.step_samples(), 75);
    }

    #[test]
    fn segment_counts() {
        let s = series_at(25.0, 250, |_| ([0.0; 3], 0));
        let w = segment(&s, &WindowSpec::DAILY).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), vec![0, 38, 76, 114, 152]);
        let s = series_at(25.0, 1500, |_| ([0.0; 3], 0));
        assert_eq!(segment(&s, &WindowSpec::EATING).unwrap().len(), 19);
        let s = series_at(25.0, 50, |_| ([0.0; 3], 0));
        assert!(matches!(
            segment(&s, &WindowSpec::DAILY),
            Err(Error::SeriesTooShort { .. })
        ));
        let s = series_at(50.0, 500, |_| ([0.0; 3], 0));
        assert!(matches!(segment(&s, &WindowSpec::DAILY), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn majority_vote_ties_to_smaller_id() {
        assert_eq!(majority_label(&[3, 3, 1, 1, 2]), 1);
        assert_eq!(majority_label(&[5, 2, 5]), 5);
        let s = series_at(25.0, 75, |i| ([0.0; 3], if i < 40 { 4 } else { 2 }));
        assert_eq!(segment(&s, &WindowSpec::DAILY).unwrap()[0].label, 4);
    }

    fn random_series(seed: u64, n: usize, scale: f64, shift: f64) -> ImuSeries {
        let mut rng = SplitMix64::new(seed);
        let samples: Vec<[f64; 3]> = (0..n)
            .map(|_| std::array::from_fn(|ax| scale * rng.next_gaussian() + shift + ax as f64))
            .collect();
        ImuSeries::new(
            (0..n).map(|i| i as f64 / 25.0).collect(),
            samples,
            vec![0; n],
            Provenance::Virtual,
            "v",
        )
        .unwrap()
    }

    #[test]
    fn calibration_identity_and_shift() {
        let real = random_series(1, 500, 2.0, 1.0);
        let same = calibrate_virtual(&real, std::slice::from_ref(&real)).unwrap();
        for (a, b) in same.samples().iter().zip(real.samples()) {
            for ax in 0..3 {
                assert!((a[ax] - b[ax]).abs() < 1e-9);
            }
        }
        let shifted = real.map_samples(real.samples().iter().map(|s| [s[0] + 5.0, s[1], s[2]]).collect());
        let cal = calibrate_virtual(&shifted, std::slice::from_ref(&real)).unwrap();
        let m = AxisStats::of_samples(cal.samples()).unwrap();
        let r = AxisStats::of_samples(real.samples()).unwrap();
        assert!((m.mean[0] - r.mean[0]).abs() < 1e-9);
        assert_eq!(cal.timestamps(), real.timestamps());
        assert_eq!(cal.labels(), real.labels());
    }

    #[test]
    fn calibration_errors() {
        let real = random_series(1, 50, 1.0, 0.0);
        let flat = real.map_samples(real.samples().iter().map(|s| [s[0], 3.0, s[2]]).collect());
        assert!(matches!(
            calibrate_virtual(&flat, std::slice::from_ref(&real)),
            Err(Error::ZeroVarianceAxis { axis: 1 })
        ));
        assert!(matches!(calibrate_virtual(&real, &[]), Err(Error::EmptyReference)));
    }

    #[test]
    fn ecdf_constant_axis() {
        let f = ecdf_features(&[[2.5, -1.0, 0.0]; 30], 15).unwrap();
        assert_eq!(f.len(), 48);
        assert!(f[..16].iter().all(|&x| x == 2.5));
        assert!(f[16..32].iter().all(|&x| x == -1.0));
    }

    #[test]
    fn ecdf_of_ramp() {
        let w: Vec<[f64; 3]> = (0..1000).map(|i| [i as f64 / 999.0, 0.0, 0.0]).collect();
        let f = ecdf_features(&w, 15).unwrap();
        for k in 0..15 {
            // sort-based reference: order statistic at position q (n - 1)
            let q = (k as f64 + 0.5) / 15.0;
            assert!((f[k] - q).abs() <= 0.01, "{k}: {}", f[k]);
        }
        assert!((f[15] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ecdf_is_order_free() {
        let mut rng = SplitMix64::new(5);
        let mut w: Vec<[f64; 3]> = (0..64)
            .map(|_| [rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()])
            .collect();
        let a = ecdf_features(&w, 15).unwrap();
        rng.shuffle(&mut w);
        let b = ecdf_features(&w, 15).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(matches!(ecdf_features(&[], 15), Err(Error::EmptyWindow)));
        assert!(ecdf_features(&w, 1).is_err());
    }

    #[test]
    fn stat_feature_cases() {
        let f = stat_features(&[[3.0, -2.0, 0.1]; 10]).unwrap();
        assert_eq!(&f[..5], &[3.0, 0.0, 0.0, 0.0, 3.0]);
        assert_eq!(&f[5..10], &[-2.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(f[11..14], [0.0, 0.0, 0.0]);

        let f = stat_features(&[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(&f[..5], &[0.0, 1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(stat_features(&[]), Err(Error::EmptyWindow)));
    }

    #[test]
    fn symmetric_data_has_no_skew() {
        let w: Vec<[f64; 3]> = [-3.0, -1.5, -0.2, 0.2, 1.5, 3.0]
            .iter()
            .map(|&x| [x, 2.0 * x, x + 7.0])
            .collect();
        let f = stat_features(&w).unwrap();
        for ax in 0..3 {
            assert!(f[ax * 5 + 2].abs() < 1e-12);
        }
    }

    #[test]
    fn feature_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let ws = vec![
            FeatureWindow {
                features: vec![0.5, -1.25],
                label: 3,
                provenance: Provenance::Virtual,
                t_start: 1.5,
                t_end: 4.5,
                msi: Some(0.75),
                subject_id: "s1".into(),
                source_id: "clip".into(),
            },
            FeatureWindow {
                features: vec![2.0, 0.0],
                label: 1,
                provenance: Provenance::Real,
                t_start: 0.0,
                t_end: 3.0,
                msi: None,
                subject_id: "s2".into(),
                source_id: "s2".into(),
            },
        ];
        write_feature_csv(&ws, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("subject,source,provenance,t_start,t_end,label,msi,f0,f1\n"));
        assert_eq!(read_feature_csv(&p).unwrap(), ws);
    }

    proptest! {
        #[test]
        fn calibration_matches_moments_and_is_idempotent(seed in any::<u64>()) {
            let real = vec![random_series(seed, 200, 1.5, -2.0), random_series(seed ^ 1, 80, 0.5, 4.0)];
            let virt = random_series(seed ^ 2, 150, 7.0, 11.0);
            let once = calibrate_virtual(&virt, &real).unwrap();
            let target = AxisStats::pooled(&real).unwrap();
            let got = AxisStats::of_samples(once.samples()).unwrap();
            for ax in 0..3 {
                prop_assert!((got.mean[ax] - target.mean[ax]).abs() < 1e-9);
                prop_assert!((got.std[ax] - target.std[ax]).abs() < 1e-9);
            }
            let twice = calibrate_virtual(&once, &real).unwrap();
            for (a, b) in once.samples().iter().zip(twice.samples()) {
                for ax in 0..3 {
                    prop_assert!((a[ax] - b[ax]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn windows_tile_within_bounds(n in 75usize..600, len_s in 0.5f64..4.0, frac in 0.1f64..1.0) {
            let spec = WindowSpec { length_s: len_s, step_s: len_s * frac, rate_hz: 25.0 };
            let s = series_at(25.0, n, |i| ([i as f64, 0.0, 0.0], (i / 40) as u32));
            if let Ok(ws) = segment(&s, &spec) {
                let step = spec.step_samples();
                for (i, w) in ws.iter().enumerate() {
                    prop_assert_eq!(w.start, i * step);
                    prop_assert!(w.start + w.len <= n);
                }
                let last = ws.last().unwrap();
                prop_assert!(last.start + step + last.len > n);
            }
        }

        #[test]
        fn ecdf_shifts_with_constant(seed in any::<u64>(), c in -50.0f64..50.0) {
            let mut rng = SplitMix64::new(seed);
            let w: Vec<[f64; 3]> = (0..40).map(|_| [rng.next_gaussian(), rng.next_gaussian(), 0.0]).collect();
            let shifted: Vec<[f64; 3]> = w.iter().map(|s| [s[0] + c, s[1], s[2]]).collect();
            let (a, b) = (ecdf_features(&w, 15).unwrap(), ecdf_features(&shifted, 15).unwrap());
            for k in 0..16 {
                prop_assert!((a[k] + c - b[k]).abs() < 1e-9);
            }
            prop_assert_eq!(&a[16..], &b[16..]);
        }

        #[test]
        fn rms_squared_is_var_plus_mean_squared(seed in any::<u64>(), n in 1usize..100) {
            let mut rng = SplitMix64::new(seed);
            let w: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.uniform(-3.0, 3.0), rng.uniform(0.0, 9.0), rng.next_gaussian()])
                .collect();
            let f = stat_features(&w).unwrap();
            for ax in 0..3 {
                let (mean, var, rms) = (f[ax * 5], f[ax * 5 + 1], f[ax * 5 + 4]);
                prop_assert!((rms * rms - (var + mean * mean)).abs() < 1e-9);
            }
        }
    }
}
