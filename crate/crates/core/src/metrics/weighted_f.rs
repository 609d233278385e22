use super::{check_pair, is_degenerate, EPS};
use crate::datakit::Plane;
use crate::error::Result;

const KERNEL: usize = 7;
const SIGMA: f64 = 5.0;
const BETA2: f64 = 1.0;

/// Euclidean distance to, and row-major index of, the nearest foreground
/// pixel. Equidistant candidates resolve to the smallest index.
pub fn nearest_foreground(gt: &Plane) -> (Vec<f64>, Vec<usize>) {
    let (h, w) = gt.size();
    // per column: nearest foreground row for every row
    let mut col_near: Vec<Option<usize>> = vec![None; h * w];
    for x in 0..w {
        let mut last = None;
        for y in 0..h {
            if gt.get(y, x) > 0.5 {
                last = Some(y);
            }
            col_near[y * w + x] = last;
        }
        let mut next = None;
        for y in (0..h).rev() {
            if gt.get(y, x) > 0.5 {
                next = Some(y);
            }
            let above = col_near[y * w + x];
            col_near[y * w + x] = match (above, next) {
                (Some(a), Some(b)) => Some(if b - y < y - a { b } else { a }),
                (a, b) => a.or(b),
            };
        }
    }
    let mut dist = vec![f64::INFINITY; h * w];
    let mut index = vec![usize::MAX; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut best = (usize::MAX, usize::MAX);
            for xc in 0..w {
                if let Some(yc) = col_near[y * w + xc] {
                    let d2 = yc.abs_diff(y).pow(2) + xc.abs_diff(x).pow(2);
                    let idx = yc * w + xc;
                    if (d2, idx) < best {
                        best = (d2, idx);
                    }
                }
            }
            if best.1 != usize::MAX {
                dist[y * w + x] = (best.0 as f64).sqrt();
                index[y * w + x] = best.1;
            }
        }
    }
    (dist, index)
}

fn gaussian_taps() -> Vec<f64> {
    let c = (KERNEL / 2) as f64;
    let raw: Vec<f64> = (0..KERNEL).map(|i| (-(i as f64 - c).powi(2) / (2.0 * SIGMA * SIGMA)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable 7x7 Gaussian, zero padded, same size.
fn gaussian_same(map: &[f64], h: usize, w: usize) -> Vec<f64> {
    let taps = gaussian_taps();
    let r = (KERNEL / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                let xx = x as isize + i as isize - r;
                if (0..w as isize).contains(&xx) {
                    acc += t * map[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                let yy = y as isize + i as isize - r;
                if (0..h as isize).contains(&yy) {
                    acc += t * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Weighted F-measure with distance-dependent error weighting.
///
/// Returns `(value, degenerate)`; an all-background or all-foreground mask
/// scores 0 and sets the flag.
pub fn weighted_f(pred: &Plane, gt: &Plane) -> Result<(f64, bool)> {
    check_pair(pred, gt)?;
    if is_degenerate(gt) {
        return Ok((0.0, true));
    }
    let (h, w) = gt.size();
    let g: Vec<bool> = gt.data().iter().map(|&v| v > 0.5).collect();
    let err: Vec<f64> = pred.data().iter().zip(gt.data()).map(|(p, q)| (p - q).abs()).collect();
    let (dist, nearest) = nearest_foreground(gt);

    // background pixels borrow the error of their nearest foreground pixel
    let borrowed: Vec<f64> = (0..h * w).map(|i| if g[i] { err[i] } else { err[nearest[i]] }).collect();
    let smoothed = gaussian_same(&borrowed, h, w);
    let alpha = 0.5f64.ln() / 5.0;

    let (mut fg_err, mut bg_err, mut fg_count) = (0.0, 0.0, 0.0);
    for i in 0..h * w {
        if g[i] {
            fg_err += if smoothed[i] < err[i] { smoothed[i] } else { err[i] };
            fg_count += 1.0;
        } else {
            bg_err += err[i] * (2.0 - (alpha * dist[i]).exp());
        }
    }
    let tp = fg_count - fg_err;
    let recall = 1.0 - fg_err / fg_count;
    let precision = tp / (EPS + tp + bg_err);
    let q = (1.0 + BETA2) * recall * precision / (EPS + recall + BETA2 * precision);
    Ok((q, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_ties_pick_smallest_index() {
        // foreground at (0,0) and (2,2); pixel (1,1) is equidistant
        let gt = Plane::from_fn(3, 3, |y, x| ((y, x) == (0, 0) || (y, x) == (2, 2)) as u8 as f64);
        let (d, idx) = nearest_foreground(&gt);
        assert_eq!(idx[4], 0);
        assert!((d[4] - 2f64.sqrt()).abs() < 1e-15);
        // pixel (0,2) is equidistant to (0,0) and (2,2)
        assert_eq!(idx[2], 0);
    }

    #[test]
    fn perfect_and_inverted_predictions() {
        let gt = Plane::from_fn(12, 12, |y, x| ((4..8).contains(&y) && (3..9).contains(&x)) as u8 as f64);
        assert!((weighted_f(&gt, &gt).unwrap().0 - 1.0).abs() < 1e-12);
        assert!(weighted_f(&gt.map(|v| 1.0 - v), &gt).unwrap().0 <= 0.01);
    }

    #[test]
    fn empty_mask_is_flagged() {
        assert_eq!(weighted_f(&Plane::zeros(4, 4), &Plane::zeros(4, 4)).unwrap(), (0.0, true));
    }
}
