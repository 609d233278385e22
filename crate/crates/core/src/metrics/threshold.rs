//! Binarisation at the 256 thresholds `k / 255`, shared by max-F and E-measure.

use crate::datakit::Plane;

pub const THRESHOLDS: usize = 256;

#[inline]
pub fn threshold(k: usize) -> f64 {
    k as f64 / 255.0
}

/// Number of thresholds strictly below `v`, i.e. the pixel is foreground
/// for every `k < exceeded(v)`.
fn exceeded(v: f64) -> usize {
    // start from the arithmetic guess, then settle with exact comparisons
    let mut n = ((v * 255.0).ceil().max(0.0) as usize).min(THRESHOLDS);
    while n > 0 && !(v > threshold(n - 1)) {
        n -= 1;
    }
    while n < THRESHOLDS && v > threshold(n) {
        n += 1;
    }
    n
}

/// Per-threshold counts of predicted positives, split by mask label.
pub struct ThresholdCounts {
    /// `fg[k]`: mask-foreground pixels with `pred > k / 255`.
    pub fg: [usize; THRESHOLDS],
    /// `bg[k]`: mask-background pixels with `pred > k / 255`.
    pub bg: [usize; THRESHOLDS],
    pub fg_total: usize,
    pub total: usize,
}

impl ThresholdCounts {
    pub fn new(pred: &Plane, gt: &Plane) -> Self {
        let mut hist_fg = [0usize; THRESHOLDS + 1];
        let mut hist_bg = [0usize; THRESHOLDS + 1];
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            let e = exceeded(p);
            if g > 0.5 {
                hist_fg[e] += 1;
            } else {
                hist_bg[e] += 1;
            }
        }
        let mut fg = [0usize; THRESHOLDS];
        let mut bg = [0usize; THRESHOLDS];
        // a pixel with exceeded = e is positive at thresholds 0..e
        let (mut cf, mut cb) = (0, 0);
        for k in (0..THRESHOLDS).rev() {
            cf += hist_fg[k + 1];
            cb += hist_bg[k + 1];
            fg[k] = cf;
            bg[k] = cb;
        }
        let fg_total = hist_fg.iter().sum();
        Self { fg, bg, fg_total, total: pred.len() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exceeded_is_strict() {
        assert_eq!(exceeded(0.0), 0);
        assert_eq!(exceeded(1.0 / 255.0), 1);
        assert_eq!(exceeded(1.0 / 255.0 + 1e-12), 2);
        assert_eq!(exceeded(1.0), 255);
        for i in 0..1000 {
            let v = i as f64 / 999.0;
            let direct = (0..THRESHOLDS).filter(|&k| v > threshold(k)).count();
            assert_eq!(exceeded(v), direct, "{v}");
        }
    }
}
