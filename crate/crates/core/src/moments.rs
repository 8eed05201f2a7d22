//! Temporal aggregation of positive window predictions into moments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentParams {
    /// Neighbourhood radius in seconds of window-centre time.
    pub eps: f64,
    /// Neighbourhood size needed for a core point, the point itself included.
    pub min_pts: usize,
}

impl Default for MomentParams {
    fn default() -> Self {
        MomentParams { eps: 80.0, min_pts: 2 }
    }
}

impl MomentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Clustering {
    /// Point indices per cluster, ascending; clusters ordered by first member.
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

/// DBSCAN on sorted 1-D times. Two points are neighbours when
/// `|t_i - t_j| <= eps`. A border point reachable from two clusters joins
/// the earlier one.
pub fn dbscan_1d(times: &[f64], p: &MomentParams) -> Result<Clustering> {
    p.validate()?;
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFiniteValue("moment times".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::UnsortedInput);
    }
    let n = times.len();
    // neighbourhood counts via two pointers
    let mut core = vec![false; n];
    let (mut lo, mut hi) = (0, 0);
    for i in 0..n {
        while times[i] - times[lo] > p.eps {
            lo += 1;
        }
        while hi + 1 < n && times[hi + 1] - times[i] <= p.eps {
            hi += 1;
        }
        hi = hi.max(i);
        core[i] = hi - lo + 1 >= p.min_pts;
    }

    // Core points in time order; consecutive cores within eps share a cluster.
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut n_clusters = 0;
    let mut prev_core: Option<usize> = None;
    for i in (0..n).filter(|&i| core[i]) {
        match prev_core {
            Some(j) if times[i] - times[j] <= p.eps => label[i] = label[j],
            _ => {
                label[i] = Some(n_clusters);
                n_clusters += 1;
            }
        }
        prev_core = Some(i);
    }

    // Border points: the nearest core on the left belongs to the earlier cluster.
    let mut last_core: Option<usize> = None;
    let mut next_core = vec![None; n];
    let mut following = None;
    for i in (0..n).rev() {
        next_core[i] = following;
        if core[i] {
            following = Some(i);
        }
    }
    for i in 0..n {
        if core[i] {
            last_core = Some(i);
            continue;
        }
        let left = last_core.filter(|&j| times[i] - times[j] <= p.eps);
        let right = next_core[i].filter(|&j| times[j] - times[i] <= p.eps);
        label[i] = left.or(right).and_then(|j| label[j]);
    }

    let mut out = Clustering {
        clusters: vec![Vec::new(); n_clusters],
        noise: Vec::new(),
    };
    for (i, l) in label.into_iter().enumerate() {
        match l {
            Some(c) => out.clusters[c].push(i),
            None => out.noise.push(i),
        }
    }
    Ok(out)
}

/// Marks windows belonging to a cluster as positive. `positive_windows[i]` is
/// the window index of clustered point `i`; noise and negatives stay negative.
pub fn moments_to_window_labels(
    clustering: &Clustering,
    positive_windows: &[usize],
    n_windows: usize,
) -> Vec<bool> {
    let mut labels = vec![false; n_windows];
    for &i in clustering.clusters.iter().flatten() {
        labels[positive_windows[i]] = true;
    }
    labels
}

/// Runs DBSCAN over the centres of positively predicted windows of one
/// recording and returns per-window moment labels and the moments found.
pub fn aggregate_moments(
    spans: &[(f64, f64)],
    positive: &[bool],
    p: &MomentParams,
) -> Result<(Vec<bool>, Vec<Moment>)> {
    if spans.len() != positive.len() {
        return Err(Error::LengthMismatch(spans.len(), positive.len()));
    }
    let idx: Vec<usize> = (0..spans.len()).filter(|&i| positive[i]).collect();
    let centers: Vec<f64> = idx.iter().map(|&i| 0.5 * (spans[i].0 + spans[i].1)).collect();
    let clustering = dbscan_1d(&centers, p)?;
    let labels = moments_to_window_labels(&clustering, &idx, spans.len());
    let picked: Vec<(f64, f64)> = idx.iter().map(|&i| spans[i]).collect();
    Ok((labels, moments(&clustering, &picked)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub cluster_id: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub n_windows: usize,
}

/// Extent of each cluster, given the `(t_start, t_end)` span of every clustered point.
pub fn moments(clustering: &Clustering, spans: &[(f64, f64)]) -> Vec<Moment> {
    clustering
        .clusters
        .iter()
        .enumerate()
        .map(|(id, members)| Moment {
            cluster_id: id,
            t_start: members.iter().map(|&i| spans[i].0).fold(f64::INFINITY, f64::min),
            t_end: members.iter().map(|&i| spans[i].1).fold(f64::NEG_INFINITY, f64::max),
            n_windows: members.len(),
        })
        .collect()
}

pub fn write_moment_csv(moments: &[Moment], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cluster_id", "t_start", "t_end", "n_windows"])?;
    for m in moments {
        w.write_record([
            m.cluster_id.to_string(),
            m.t_start.to_string(),
            m.t_end.to_string(),
            m.n_windows.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
