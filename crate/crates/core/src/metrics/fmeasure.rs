use super::threshold::{ThresholdCounts, THRESHOLDS};
use super::{check_pair, is_degenerate, EPS};
use crate::datakit::Plane;
use crate::error::Result;

pub const BETA2: f64 = 0.3;

/// Precision and recall at thresholds `k / 255`, `k = 0..=255`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    pub fn f_measure(&self, beta2: f64) -> Vec<f64> {
        self.precision.iter().zip(&self.recall).map(|(&p, &r)| (1.0 + beta2) * p * r / (beta2 * p + r + EPS)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxF {
    pub value: f64,
    /// F-measure at every threshold.
    pub curve: Vec<f64>,
    pub pr: PrCurve,
    /// Set when the mask is all background or all foreground; `value` is then 0.
    pub degenerate: bool,
}

pub fn mae(pred: &Plane, gt: &Plane) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(pred.data().iter().zip(gt.data()).map(|(p, g)| (p - g).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn max_f(pred: &Plane, gt: &Plane) -> Result<MaxF> {
    check_pair(pred, gt)?;
    let counts = ThresholdCounts::new(pred, gt);
    let mut precision = Vec::with_capacity(THRESHOLDS);
    let mut recall = Vec::with_capacity(THRESHOLDS);
    for k in 0..THRESHOLDS {
        let tp = counts.fg[k] as f64;
        let predicted = (counts.fg[k] + counts.bg[k]) as f64;
        precision.push(if predicted > 0.0 { tp / predicted } else { 0.0 });
        recall.push(if counts.fg_total > 0 { tp / counts.fg_total as f64 } else { 0.0 });
    }
    let pr = PrCurve { precision, recall };
    if is_degenerate(gt) {
        return Ok(MaxF { value: 0.0, curve: vec![0.0; THRESHOLDS], pr, degenerate: true });
    }
    let curve = pr.f_measure(BETA2);
    let value = curve.iter().copied().fold(0.0, f64::max);
    Ok(MaxF { value, curve, pr, degenerate: false })
}
