use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

/// A binary decision tree stored as parallel node arrays.
///
/// Node `i` is a leaf when `feature[i] < 0`; otherwise samples with
/// `x[feature[i]] <= threshold[i]` go to `left[i]`, the rest to `right[i]`.
/// `counts[i]` holds the per-class training counts that reached node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub counts: Vec<Vec<u32>>,
    /// Weighted Gini decrease `n G - n_l G_l - n_r G_r` of each split (0 at leaves).
    pub gain: Vec<f64>,
}

pub(crate) struct GrowParams {
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Tree {
    /// Grows a CART tree on the rows listed in `samples` (duplicates allowed).
    pub(crate) fn grow(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        samples: Vec<usize>,
        params: &GrowParams,
        rng: &mut SplitMix64,
    ) -> Tree {
        let mut tree = Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            counts: Vec::new(),
            gain: Vec::new(),
        };
        let n_features = x.first().map_or(0, Vec::len);
        let mut order: Vec<usize> = (0..n_features).collect();
        let mut stack = vec![(tree.push_leaf(n_classes), samples, 0usize)];
        while let Some((node, samples, depth)) = stack.pop() {
            let mut counts = vec![0u32; n_classes];
            for &i in &samples {
                counts[y[i]] += 1;
            }
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let too_small = samples.len() < 2 * params.min_samples_leaf;
            let too_deep = params.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || too_small || too_deep {
                None
            } else {
                best_split(x, y, n_classes, &samples, &counts, &mut order, params, rng)
            };
            tree.counts[node] = counts;
            let Some(split) = split else { continue };

            let (left, right): (Vec<usize>, Vec<usize>) = samples
                .iter()
                .partition(|&&i| x[i][split.feature] <= split.threshold);
            let l = tree.push_leaf(n_classes);
            let r = tree.push_leaf(n_classes);
            tree.feature[node] = split.feature as i64;
            tree.threshold[node] = split.threshold;
            tree.gain[node] = split.gain;
            tree.left[node] = l as u32;
            tree.right[node] = r as u32;
            // right first so the left subtree is numbered first
            stack.push((r, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
        tree
    }

    fn push_leaf(&mut self, n_classes: usize) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.counts.push(vec![0; n_classes]);
        self.gain.push(0.0);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] < 0
    }

    /// Leaf reached by `row`.
    pub fn leaf(&self, row: &[f64]) -> usize {
        let mut node = 0;
        while !self.is_leaf(node) {
            node = if row[self.feature[node] as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        node
    }

    /// Majority class index of the leaf reached by `row` (ties to the smaller index).
    pub fn predict_index(&self, row: &[f64]) -> usize {
        argmax(&self.counts[self.leaf(row)])
    }
}

pub(crate) fn argmax(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn sum_sq(counts: &[u32]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Weighted Gini decrease from sums of squared class counts:
/// `n G - n_l G_l - n_r G_r = S_l / n_l + S_r / n_r - S / n`.
fn gain(sl: u128, nl: usize, sr: u128, nr: usize, s: u128, n: usize) -> f64 {
    sl as f64 / nl as f64 + sr as f64 / nr as f64 - s as f64 / n as f64
}

/// Exact test of `S_l / n_l + S_r / n_r > S / n` in integers.
fn gain_is_positive(sl: u128, nl: usize, sr: u128, nr: usize, s: u128, n: usize) -> bool {
    let (nl, nr, n) = (nl as u128, nr as u128, n as u128);
    sl * nr * n + sr * nl * n > s * nl * nr
}

#[allow(clippy::too_many_arguments)]
fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    samples: &[usize],
    parent: &[u32],
    order: &mut [usize],
    params: &GrowParams,
    rng: &mut SplitMix64,
) -> Option<Split> {
    let n = samples.len();
    let s_parent = sum_sq(parent);
    let mut best: Option<(Split, u128, usize, u128, usize)> = None;
    let mut visited = 0;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);

    // Features are drawn without replacement; constant ones do not count
    // toward max_features, so drawing continues past them.
    for drawn in 0..order.len() {
        if visited >= params.max_features {
            break;
        }
        let j = drawn + rng.next_below(order.len() - drawn);
        order.swap(drawn, j);
        let f = order[drawn];

        pairs.clear();
        pairs.extend(samples.iter().map(|&i| (x[i][f], y[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[n - 1].0 {
            continue;
        }
        visited += 1;

        let mut left = vec![0u32; n_classes];
        let mut right = parent.to_vec();
        let (mut sl, mut sr) = (0u128, s_parent);
        for i in 0..n - 1 {
            let k = pairs[i].1;
            sl += 2 * left[k] as u128 + 1;
            sr -= 2 * right[k] as u128 - 1;
            left[k] += 1;
            right[k] -= 1;
            let (nl, nr) = (i + 1, n - i - 1);
            if pairs[i].0 == pairs[i + 1].0
                || nl < params.min_samples_leaf
                || nr < params.min_samples_leaf
            {
                continue;
            }
            let g = gain(sl, nl, sr, nr, s_parent, n);
            let (a, b) = (pairs[i].0, pairs[i + 1].0);
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            let better = match &best {
                None => true,
                Some((cur, ..)) => {
                    g > cur.gain
                        || (g == cur.gain
                            && (f < cur.feature || (f == cur.feature && threshold < cur.threshold)))
                }
            };
            if better {
                best = Some((
                    Split {
                        feature: f,
                        threshold,
                        gain: g,
                    },
                    sl,
                    nl,
                    sr,
                    nr,
                ));
            }
        }
    }
    best.filter(|(_, sl, nl, sr, nr)| gain_is_positive(*sl, *nl, *sr, *nr, s_parent, n))
        .map(|(s, ..)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grow_all(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Tree {
        let p = GrowParams {
            max_features: x[0].len(),
            min_samples_leaf: 1,
            max_depth: None,
        };
        Tree::grow(x, y, n_classes, (0..x.len()).collect(), &p, &mut SplitMix64::new(0))
    }

    #[test]
    fn splits_at_midpoint() {
        let x = vec![vec![1.0], vec![2.0], vec![4.0], vec![5.0]];
        let t = grow_all(&x, &[0, 0, 1, 1], 2);
        assert_eq!(t.n_nodes(), 3);
        assert_eq!(t.feature[0], 0);
        assert_eq!(t.threshold[0], 3.0);
        assert_eq!(t.counts[1], vec![2, 0]);
        assert_eq!(t.counts[2], vec![0, 2]);
        assert_eq!(t.predict_index(&[2.9]), 0);
        assert_eq!(t.predict_index(&[3.1]), 1);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features separate the classes equally well
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let t = grow_all(&x, &[0, 1], 2);
        assert_eq!(t.feature[0], 0);
    }

    #[test]
    fn xor_is_not_split_without_gain() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let t = grow_all(&x, &[0, 0, 1, 1], 2);
        assert_eq!(t.n_nodes(), 1);
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![0, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let p = GrowParams {
            max_features: 1,
            min_samples_leaf: 3,
            max_depth: None,
        };
        let t = Tree::grow(&x, &y, 2, (0..10).collect(), &p, &mut SplitMix64::new(1));
        for node in 0..t.n_nodes() {
            if t.is_leaf(node) {
                assert!(t.counts[node].iter().sum::<u32>() >= 3);
            }
        }
    }

    #[test]
    fn max_depth_caps_growth() {
        let x: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let p = GrowParams {
            max_features: 1,
            min_samples_leaf: 1,
            max_depth: Some(1),
        };
        let t = Tree::grow(&x, &y, 2, (0..16).collect(), &p, &mut SplitMix64::new(1));
        assert!(t.n_nodes() <= 3);
    }

    #[test]
    fn exact_gain_sign() {
        assert!(!gain_is_positive(2, 2, 2, 2, 8, 4)); // [1,1] | [1,1] from [2,2]
        assert!(gain_is_positive(4, 2, 4, 2, 8, 4)); // [2,0] | [0,2]
    }
}
