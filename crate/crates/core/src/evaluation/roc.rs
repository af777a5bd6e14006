use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// One ROC operating point: everything scoring `≥ threshold` is flagged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// Anomalies.
    pub positives: usize,
    /// Normals.
    pub negatives: usize,
}

/// ROC curve with anomalies as the positive class. Equal scores form a single
/// threshold step, so ties contribute half credit to the area.
pub fn compute_roc(scores: &[(f64, Label)]) -> Result<RocResult> {
    if let Some((s, _)) = scores.iter().find(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidConfig(format!("score {s} is not comparable")));
    }
    let positives = scores.iter().filter(|(_, l)| *l == Label::Anomaly).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == threshold {
            match sorted[i].1 {
                Label::Anomaly => tp += 1,
                Label::Normal => fp += 1,
            }
            i += 1;
        }
        let prev = *points.last().expect("starts with origin");
        let pt = RocPoint { fpr: fp as f64 / n, tpr: tp as f64 / p, threshold };
        auc += (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr) / 2.0;
        points.push(pt);
    }
    Ok(RocResult { points, auc, positives, negatives })
}

/// Trapezoid area under a curve given as ordered points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Area under the curve for labeled scores.
pub fn auc(scores: &[(f64, Label)]) -> Result<f64> {
    compute_roc(scores).map(|r| r.auc)
}
