use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum F1Mode {
    /// Unweighted mean over the classes present in the ground truth.
    Macro,
    /// F1 of one positive class.
    Binary { positive: u32 },
}

fn f1_for(pred: &[u32], truth: &[u32], class: u32) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == class, t == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn check_lengths(pred: &[u32], truth: &[u32]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn f1_scores(pred: &[u32], truth: &[u32], mode: F1Mode) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(match mode {
        F1Mode::Binary { positive } => f1_for(pred, truth, positive),
        F1Mode::Macro => {
            let classes: BTreeSet<u32> = truth.iter().copied().collect();
            classes.iter().map(|&c| f1_for(pred, truth, c)).sum::<f64>() / classes.len() as f64
        }
    })
}

/// F1 of every class present in the ground truth.
pub fn per_class_f1(pred: &[u32], truth: &[u32]) -> Result<BTreeMap<u32, f64>> {
    check_lengths(pred, truth)?;
    let classes: BTreeSet<u32> = truth.iter().copied().collect();
    Ok(classes.into_iter().map(|c| (c, f1_for(pred, truth, c))).collect())
}
