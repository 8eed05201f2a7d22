use std::path::Path;

use serde::{Deserialize, Serialize};

use super::file_stem;
use crate::error::{Error, Result};

const IMU_HEADER: [&str; 5] = ["t", "ax", "ay", "az", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Virtual,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Virtual => "virtual",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Provenance::Real),
            "virtual" => Ok(Provenance::Virtual),
            other => Err(Error::InvalidParameter(format!("unknown provenance {other:?}"))),
        }
    }
}

/// Tri-axial accelerometry with per-sample class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuSeries {
    timestamps: Vec<f64>,
    samples: Vec<[f64; 3]>,
    labels: Vec<u32>,
    rate_hz: f64,
    provenance: Provenance,
    subject_id: String,
    /// Acceleration unit as recorded; never converted.
    unit: String,
    /// Video the series was synthesized from, for virtual data.
    source_id: Option<String>,
}

impl ImuSeries {
    /// Builds a series, estimating the nominal rate as `(n - 1) / (t_last - t_first)`.
    pub fn new(
        timestamps: Vec<f64>,
        samples: Vec<[f64; 3]>,
        labels: Vec<u32>,
        provenance: Provenance,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if timestamps.len() != samples.len() || timestamps.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} timestamps, {} samples, {} labels",
                timestamps.len(),
                samples.len(),
                labels.len()
            )));
        }
        if timestamps.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: timestamps.len(),
            });
        }
        if let Some(i) = timestamps.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFiniteValue(format!("timestamp {i}")));
        }
        if let Some(i) = samples.iter().position(|s| s.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFiniteValue(format!("sample {i}")));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonicTime { line: i + 1 });
        }
        let span = timestamps[timestamps.len() - 1] - timestamps[0];
        let rate_hz = (timestamps.len() - 1) as f64 / span;
        Ok(ImuSeries {
            timestamps,
            samples,
            labels,
            rate_hz,
            provenance,
            subject_id: subject_id.into(),
            unit: "m/s^2".into(),
            source_id: None,
        })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_source_id(mut self, source_id: Option<String>) -> Self {
        self.source_id = source_id;
        self
    }

    pub fn with_subject_id(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }

    pub(crate) fn with_rate(mut self, rate_hz: f64) -> Self {
        self.rate_hz = rate_hz;
        self
    }

    /// Same metadata and timing with replaced samples.
    pub(crate) fn map_samples(&self, samples: Vec<[f64; 3]>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        ImuSeries {
            samples,
            ..self.clone()
        }
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// One axis as a contiguous vector.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[axis]).collect()
    }
}

pub fn load_imu_csv(path: impl AsRef<Path>, provenance: Provenance) -> Result<ImuSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_imu_csv(&text, provenance, file_stem(path))
}

pub fn parse_imu_csv(
    text: &str,
    provenance: Provenance,
    subject_id: impl Into<String>,
) -> Result<ImuSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(IMU_HEADER) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header {}", IMU_HEADER.join(",")),
        });
    }
    let mut ts = Vec::new();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let bad = |reason: String| Error::MalformedRow { line, reason };
        if record.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", record.len())));
        }
        let num = |j: usize| -> Result<f64> {
            record[j]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("bad number {:?}", &record[j])))
        };
        let t = num(0)?;
        if ts.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::NonMonotonicTime { line });
        }
        ts.push(t);
        samples.push([num(1)?, num(2)?, num(3)?]);
        labels.push(
            record[4]
                .parse::<u32>()
                .map_err(|_| bad(format!("bad label {:?}", &record[4])))?,
        );
    }
    ImuSeries::new(ts, samples, labels, provenance, subject_id)
}

pub fn write_imu_csv(series: &ImuSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(IMU_HEADER)?;
    for ((t, s), l) in series.timestamps.iter().zip(&series.samples).zip(&series.labels) {
        w.write_record([
            t.to_string(),
            s[0].to_string(),
            s[1].to_string(),
            s[2].to_string(),
            l.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Resamples onto the uniform grid `t_first + k / target_hz` spanning
/// `[t_first, t_last]`, interpolating each axis linearly. Each output label is
/// the label of the nearest input sample in time (ties go to the earlier one).
pub fn resample_linear(series: &ImuSeries, target_hz: f64) -> Result<ImuSeries> {
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::InvalidParameter(format!("target rate must be > 0, got {target_hz}")));
    }
    let ts = series.timestamps();
    if ts.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: ts.len(),
        });
    }
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    // Tolerate float noise so a 2 s span at 25 Hz yields 51 points, not 50.
    let n_out = (span * target_hz + 1e-9).floor() as usize + 1;

    let mut out_t = Vec::with_capacity(n_out);
    let mut out_s = Vec::with_capacity(n_out);
    let mut out_l = Vec::with_capacity(n_out);
    let mut j = 0;
    for k in 0..n_out {
        let t = (t0 + k as f64 / target_hz).min(ts[ts.len() - 1]);
        while j + 2 < ts.len() && ts[j + 1] <= t {
            j += 1;
        }
        // ts[j] <= t <= ts[j + 1] (up to clamping at the ends)
        let (ta, tb) = (ts[j], ts[j + 1]);
        let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        let (a, b) = (series.samples[j], series.samples[j + 1]);
        let sample = std::array::from_fn(|ax| {
            if frac == 0.0 {
                a[ax]
            } else if frac == 1.0 {
                b[ax]
            } else {
                let (lo, hi) = (a[ax].min(b[ax]), a[ax].max(b[ax]));
                (a[ax] + (b[ax] - a[ax]) * frac).clamp(lo, hi)
            }
        });
        let label = if t - ta <= tb - t {
            series.labels[j]
        } else {
            series.labels[j + 1]
        };
        out_t.push(t);
        out_s.push(sample);
        out_l.push(label);
    }
    if out_t.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: out_t.len(),
        });
    }
    Ok(ImuSeries {
        timestamps: out_t,
        samples: out_s,
        labels: out_l,
        ..series.clone()
    }
    .with_rate(target_hz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(ts: Vec<f64>, f: impl Fn(f64) -> [f64; 3]) -> ImuSeries {
        let samples = ts.iter().map(|&t| f(t)).collect();
        let labels = vec![0; ts.len()];
        ImuSeries::new(ts, samples, labels, Provenance::Real, "s").unwrap()
    }

    fn grid(n: usize, hz: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 / hz).collect()
    }

    #[test]
    fn rate_is_estimated() {
        let s = parse_imu_csv(
            "t,ax,ay,az,label\n0,1,2,3,0\n0.04,1,2,3,0\n0.08,1,2,3,1\n",
            Provenance::Real,
            "a",
        )
        .unwrap();
        assert!((s.rate_hz() - 25.0).abs() < 1e-9);
        assert_eq!(s.labels(), &[0, 0, 1]);
    }

    #[test]
    fn duplicated_timestamp() {
        let r = parse_imu_csv(
            "t,ax,ay,az,label\n0,1,2,3,0\n0.04,1,2,3,0\n0.04,1,2,3,0\n",
            Provenance::Real,
            "a",
        );
        assert!(matches!(r, Err(Error::NonMonotonicTime { line: 4 })));
    }

    #[test]
    fn missing_label_column() {
        let r = parse_imu_csv("t,ax,ay,az\n0,1,2,3\n", Provenance::Real, "a");
        assert!(matches!(r, Err(Error::MalformedRow { .. })));
        let r = parse_imu_csv("t,ax,ay,az,label\n0,1,2,3\n0.1,1,2,3\n", Provenance::Real, "a");
        assert!(matches!(r, Err(Error::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn constant_signal_resamples_to_constant() {
        let s = series(grid(101, 50.0), |_| [1.0, 2.0, 3.0]);
        let r = resample_linear(&s, 25.0).unwrap();
        assert!(r.samples().iter().all(|x| *x == [1.0, 2.0, 3.0]));
        assert_eq!(r.rate_hz(), 25.0);
    }

    #[test]
    fn ramp_is_exact() {
        let s = series(grid(51, 50.0), |t| [t, 0.0, 0.0]);
        let r = resample_linear(&s, 25.0).unwrap();
        assert_eq!(r.len(), 26);
        for (t, x) in r.timestamps().iter().zip(r.samples()) {
            assert!((x[0] - t).abs() < 1e-12, "{t} {}", x[0]);
        }
    }

    #[test]
    fn grid_arithmetic() {
        let s = series(grid(101, 50.0), |t| [t, t, t]);
        assert_eq!(resample_linear(&s, 25.0).unwrap().len(), 51);
    }

    #[test]
    fn labels_follow_nearest_sample() {
        // samples at 0, 1, 2 with labels 0, 1, 2; grid at 0, 0.5, 1.0, 1.5, 2.0
        let s = ImuSeries::new(
            vec![0.0, 1.0, 2.0],
            vec![[0.0; 3]; 3],
            vec![0, 1, 2],
            Provenance::Real,
            "s",
        )
        .unwrap();
        let r = resample_linear(&s, 2.0).unwrap();
        assert_eq!(r.labels(), &[0, 0, 1, 1, 2]);
        let r = resample_linear(&s, 2.5).unwrap();
        // grid 0, 0.4, 0.8, 1.2, 1.6, 2.0
        assert_eq!(r.labels(), &[0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            ImuSeries::new(vec![0.0], vec![[0.0; 3]], vec![0], Provenance::Real, "s"),
            Err(Error::TooFewSamples { .. })
        ));
    }

    proptest! {
        #[test]
        fn resample_stays_within_bounds(seed in any::<u64>(), n in 2usize..60, hz in 1.0f64..80.0) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let mut t = 0.0;
            let ts: Vec<f64> = (0..n).map(|_| { t += rng.uniform(0.005, 0.1); t }).collect();
            let values: Vec<[f64; 3]> = (0..n).map(|_| [rng.uniform(-5.0, 5.0), 0.0, 0.0]).collect();
            let s = ImuSeries::new(ts, values, vec![0; n], Provenance::Real, "s").unwrap();
            if let Ok(r) = resample_linear(&s, hz) {
                for ax in 0..3 {
                    let a = s.axis(ax);
                    let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(r.axis(ax).iter().all(|&x| x >= lo && x <= hi));
                }
                let first = r.timestamps()[0];
                prop_assert_eq!(first, s.timestamps()[0]);
                prop_assert!(*r.timestamps().last().unwrap() <= *s.timestamps().last().unwrap());
            }
        }

        #[test]
        fn resample_is_idempotent_on_grid(seed in any::<u64>(), n in 2usize..80) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let hz = 25.0;
            let values: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
                .collect();
            let s = ImuSeries::new(grid(n, hz), values, vec![3; n], Provenance::Real, "s").unwrap();
            let r = resample_linear(&s, hz).unwrap();
            prop_assert_eq!(r.len(), n);
            for (a, b) in r.samples().iter().zip(s.samples()) {
                for ax in 0..3 {
                    prop_assert!((a[ax] - b[ax]).abs() < 1e-9);
                }
            }
        }
    }
}
