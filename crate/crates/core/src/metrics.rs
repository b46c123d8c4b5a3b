//! Accuracy of an estimated policy against the true one over test features.

use serde::{Deserialize, Serialize};

use crate::ddp::BeliefFeature;
use crate::error::{Error, Result};

pub const DEFAULT_KL_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyPair {
    pub feature: BeliefFeature,
    pub estimated: [f64; 3],
    pub truth: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub kl: f64,
    pub rank_acc: f64,
    pub n_test: usize,
}

impl MetricsReport {
    pub fn evaluate(pairs: &[PolicyPair]) -> Result<Self> {
        Ok(MetricsReport {
            mse: mse(pairs)?,
            kl: kl_divergence(pairs, DEFAULT_KL_EPSILON)?,
            rank_acc: rank_accuracy(pairs)?,
            n_test: pairs.len(),
        })
    }
}

fn mean_over<F: Fn(&PolicyPair) -> f64>(pairs: &[PolicyPair], f: F) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    Ok(pairs.iter().map(f).sum::<f64>() / pairs.len() as f64)
}

pub fn mse(pairs: &[PolicyPair]) -> Result<f64> {
    mean_over(pairs, |p| {
        p.estimated
            .iter()
            .zip(&p.truth)
            .map(|(e, t)| (e - t) * (e - t))
            .sum()
    })
}

/// Mean of `KL(truth ‖ estimated)`, flooring estimated mass at `epsilon`.
pub fn kl_divergence(pairs: &[PolicyPair], epsilon: f64) -> Result<f64> {
    mean_over(pairs, |p| {
        p.truth
            .iter()
            .zip(&p.estimated)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, e)| t * (t / e.max(epsilon)).ln())
            .sum()
    })
}

/// Indices sorted by descending value, ties by ascending index.
pub fn descending_order(v: &[f64; 3]) -> [usize; 3] {
    let mut idx = [0, 1, 2];
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

pub fn rank_accuracy(pairs: &[PolicyPair]) -> Result<f64> {
    mean_over(pairs, |p| {
        if descending_order(&p.estimated) == descending_order(&p.truth) {
            1.0
        } else {
            0.0
        }
    })
}
