use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{argmax, GrowParams, Tree};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::SplitMix64;

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRule {
    /// `floor(sqrt(p))`, at least 1.
    Sqrt,
    All,
}

/// Features examined per split: a rule or a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaxFeatures {
    Count(usize),
    Rule(FeatureRule),
}

impl MaxFeatures {
    pub fn resolve(&self, n_features: usize) -> usize {
        let k = match *self {
            MaxFeatures::Count(k) => k,
            MaxFeatures::Rule(FeatureRule::Sqrt) => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Rule(FeatureRule::All) => n_features,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: MaxFeatures::Rule(FeatureRule::Sqrt),
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
            seed: 1,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be >= 1".into()));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::InvalidParameter("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

/// A trained random forest; serializes to a versioned JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    /// Class ids in ascending order; tree leaf counts index into this.
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
}

/// Trains `n_trees` CART trees, each on a bootstrap resample drawn from
/// the tree's own RNG stream. Trees are grown in parallel.
pub fn train_forest(x: &[Vec<f64>], y: &[u32], p: &ForestParams) -> Result<Forest> {
    p.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} rows, {} labels", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let n_features = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != n_features) {
        return Err(Error::DimensionMismatch(format!(
            "row {i} has {} features, row 0 has {n_features}",
            x[i].len()
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("feature matrix".into()));
    }
    let classes: Vec<u32> = y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let dense: Vec<usize> = y
        .iter()
        .map(|c| classes.binary_search(c).expect("class present"))
        .collect();
    let grow = GrowParams {
        max_features: p.max_features.resolve(n_features),
        min_samples_leaf: p.min_samples_leaf,
        max_depth: p.max_depth,
    };
    let n = x.len();
    let trees = par::map_range(p.n_trees, |t| {
        let mut rng = SplitMix64::derived(p.seed, t as u64);
        let samples = if p.bootstrap {
            (0..n).map(|_| rng.next_below(n)).collect()
        } else {
            (0..n).collect()
        };
        Tree::grow(x, &dense, classes.len(), samples, &grow, &mut rng)
    });
    Ok(Forest {
        version: FOREST_FORMAT_VERSION,
        classes,
        n_features,
        params: *p,
        trees,
    })
}

impl Forest {
    /// Majority vote of the trees' leaf-majority classes, ties to the smaller id.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<u32>> {
        if let Some(i) = x.iter().position(|r| r.len() != self.n_features) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} features, forest expects {}",
                x[i].len(),
                self.n_features
            )));
        }
        Ok(par::map(x, |row| self.classes[argmax(&self.votes(row))]))
    }

    /// Per-class tree votes for one row.
    pub fn votes(&self, row: &[f64]) -> Vec<u32> {
        let mut votes = vec![0u32; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(row)] += 1;
        }
        votes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let f: Forest = serde_json::from_str(text)?;
        if f.version != FOREST_FORMAT_VERSION {
            return Err(Error::ConfigInvalid(format!(
                "unsupported forest format version {}",
                f.version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Forest> {
        let path = path.as_ref();
        Forest::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
