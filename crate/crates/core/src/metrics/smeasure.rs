use super::{check_pair, EPS};
use crate::datakit::Plane;
use crate::error::Result;

pub const ALPHA: f64 = 0.5;
pub const LAMBDA: f64 = 1.0;

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn object_score(values: &[f64]) -> f64 {
    let (m, sd) = mean_std(values);
    2.0 * m / (m * m + 1.0 + 2.0 * LAMBDA * sd + EPS)
}

fn object_similarity(pred: &Plane, gt: &Plane) -> f64 {
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if g > 0.5 {
            fg.push(p);
        } else {
            bg.push(1.0 - p);
        }
    }
    let u = fg.len() as f64 / pred.len() as f64;
    u * object_score(&fg) + (1.0 - u) * object_score(&bg)
}

/// Rounds half away from zero, like MATLAB `round`.
fn round_half_away(v: f64) -> usize {
    v.round() as usize
}

/// 1-based centroid `(x, y)` of the mask, rounded.
fn centroid(gt: &Plane) -> (usize, usize) {
    let (h, w) = gt.size();
    let total = gt.sum();
    if total == 0.0 {
        return (round_half_away(w as f64 / 2.0), round_half_away(h as f64 / 2.0));
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for y in 0..h {
        for x in 0..w {
            let g = gt.get(y, x);
            sx += g * (x + 1) as f64;
            sy += g * (y + 1) as f64;
        }
    }
    (round_half_away(sx / total), round_half_away(sy / total))
}

/// SSIM-style similarity of one quadrant.
fn quadrant_similarity(pred: &[f64], gt: &[f64]) -> f64 {
    let n = pred.len();
    let mx = pred.iter().sum::<f64>() / n as f64;
    let my = gt.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred.iter().zip(gt) {
        sxx += (p - mx) * (p - mx);
        syy += (g - my) * (g - my);
        sxy += (p - mx) * (g - my);
    }
    let d = if n > 1 { (n - 1) as f64 } else { f64::INFINITY };
    let (sxx, syy, sxy) = (sxx / d, syy / d, sxy / d);
    let alpha = 4.0 * mx * my * sxy;
    let beta = (mx * mx + my * my) * (sxx + syy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn region_similarity(pred: &Plane, gt: &Plane) -> f64 {
    let (h, w) = gt.size();
    let (cx, cy) = centroid(gt);
    let area = (h * w) as f64;
    let quadrants = [(0, cy, 0, cx), (0, cy, cx, w), (cy, h, 0, cx), (cy, h, cx, w)];
    let mut score = 0.0;
    for (y0, y1, x0, x1) in quadrants {
        if y1 <= y0 || x1 <= x0 {
            continue;
        }
        let mut p = Vec::with_capacity((y1 - y0) * (x1 - x0));
        let mut g = Vec::with_capacity(p.capacity());
        for y in y0..y1 {
            for x in x0..x1 {
                p.push(pred.get(y, x));
                g.push(gt.get(y, x));
            }
        }
        let weight = ((y1 - y0) * (x1 - x0)) as f64 / area;
        score += weight * quadrant_similarity(&p, &g);
    }
    score
}

/// Structure measure combining object- and region-aware similarity.
pub fn s_measure(pred: &Plane, gt: &Plane) -> Result<f64> {
    check_pair(pred, gt)?;
    let y = gt.mean();
    if y == 0.0 {
        return Ok(1.0 - pred.mean());
    }
    if y == 1.0 {
        return Ok(pred.mean());
    }
    let q = ALPHA * object_similarity(pred, gt) + (1.0 - ALPHA) * region_similarity(pred, gt);
    Ok(q.max(0.0))
}
