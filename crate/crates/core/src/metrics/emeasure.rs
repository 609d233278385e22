use super::threshold::{ThresholdCounts, THRESHOLDS};
use super::{check_pair, EPS};
use crate::datakit::Plane;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct EMeasure {
    /// Maximum over thresholds.
    pub value: f64,
    pub curve: Vec<f64>,
}

fn enhanced(phi_gt: f64, phi_pred: f64) -> f64 {
    let align = 2.0 * phi_gt * phi_pred / (phi_gt * phi_gt + phi_pred * phi_pred + EPS);
    (align + 1.0).powi(2) / 4.0
}

/// Enhanced-alignment measure, maximised over the 256 binarisation thresholds.
///
/// An all-background mask scores `1 - mean(pred)`, an all-foreground mask
/// `mean(pred)`, at every threshold.
pub fn e_measure(pred: &Plane, gt: &Plane) -> Result<EMeasure> {
    check_pair(pred, gt)?;
    let n = pred.len() as f64;
    let counts = ThresholdCounts::new(pred, gt);
    if counts.fg_total == 0 || counts.fg_total == counts.total {
        let m = pred.mean();
        let v = if counts.fg_total == 0 { 1.0 - m } else { m };
        return Ok(EMeasure { value: v, curve: vec![v; THRESHOLDS] });
    }
    let fg = counts.fg_total as f64;
    let bg = n - fg;
    let mu_gt = fg / n;
    let mut curve = Vec::with_capacity(THRESHOLDS);
    for k in 0..THRESHOLDS {
        // the binarised map and the mask take only four joint values
        let tp = counts.fg[k] as f64;
        let fp = counts.bg[k] as f64;
        let fn_ = fg - tp;
        let tn = bg - fp;
        let mu_pred = (tp + fp) / n;
        let score = tp * enhanced(1.0 - mu_gt, 1.0 - mu_pred)
            + fn_ * enhanced(1.0 - mu_gt, -mu_pred)
            + fp * enhanced(-mu_gt, 1.0 - mu_pred)
            + tn * enhanced(-mu_gt, -mu_pred);
        curve.push(score / n);
    }
    let value = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EMeasure { value, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_binary_prediction_scores_one() {
        let gt = Plane::from_fn(6, 6, |y, x| (y > x) as u8 as f64);
        assert!((e_measure(&gt, &gt).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_masks() {
        for p in [0.0, 0.5, 1.0] {
            let pred = Plane::filled(3, 3, p);
            assert_eq!(e_measure(&pred, &Plane::zeros(3, 3)).unwrap().value, 1.0 - p);
            assert_eq!(e_measure(&pred, &Plane::filled(3, 3, 1.0)).unwrap().value, p);
        }
    }
}
