//! Supervision terms for the saliency, reconstruction and contour objectives.
//!
//! Saliency uses boundary-weighted BCE on logits plus weighted IoU on
//! probabilities, summed over all side-outs. Reconstruction mixes L1 with a
//! Gaussian-window SSIM. Contours use L1 per side-out.

use sslsod_tensor::{Real, Tensor, Var};

use crate::error::{Error, Result};

/// Side of the mean-pool window used for boundary weights.
pub const WEIGHT_WINDOW: usize = 31;
/// Boundary amplification factor.
pub const WEIGHT_GAIN: f64 = 5.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Number of deeply supervised side-outs.
pub const SIDE_OUTS: usize = 5;

/// Index into `0..n` after mirror padding that repeats the edge sample
/// (`-1 -> 0`, `n -> n - 1`), reflecting again as often as needed.
fn mirror(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

fn box_mean(plane: &[f64], h: usize, w: usize, k: usize) -> Vec<f64> {
    let r = (k / 2) as isize;
    // horizontal running sums on the mirrored row, then vertical
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for dx in -r..=r {
                acc += row[mirror(x as isize + dx, w)];
            }
            rows[y * w + x] = acc;
        }
    }
    let area = (k * k) as f64;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                acc += rows[mirror(y as isize + dy, h) * w + x];
            }
            out[y * w + x] = acc / area;
        }
    }
    out
}

/// `1 + 5 * |meanpool31(gt) - gt|` per plane, with mirrored borders.
pub fn pixel_weight<T: Real>(gt: &Tensor<T>) -> Result<Tensor<T>> {
    if gt.data().iter().any(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::invalid("pixel weights need a binary mask"));
    }
    let [n, c, h, w] = gt.shape();
    let mut data = Vec::with_capacity(gt.len());
    for i in 0..n {
        for ch in 0..c {
            let plane: Vec<f64> = gt.plane(i, ch).iter().map(|v| v.to_f64_lossy()).collect();
            let pooled = box_mean(&plane, h, w, WEIGHT_WINDOW);
            data.extend(plane.iter().zip(&pooled).map(|(&g, &m)| T::of(1.0 + WEIGHT_GAIN * (m - g).abs())));
        }
    }
    Ok(Tensor::from_vec(gt.shape(), data))
}

fn same_shape(context: &'static str, a: [usize; 4], b: [usize; 4]) -> Result<()> {
    if a != b {
        return Err(Error::shape(context, a, b));
    }
    Ok(())
}

/// Weighted binary cross-entropy from logits, normalised by weight mass per item.
pub fn weighted_bce<'t, T: Real>(logits: Var<'t, T>, gt: &Tensor<T>, weight: &Tensor<T>) -> Result<Var<'t, T>> {
    same_shape("bce target", logits.shape(), gt.shape())?;
    same_shape("bce weight", logits.shape(), weight.shape())?;
    Ok(logits.weighted_bce(gt, weight))
}

/// `1 - (I + 1) / (U + 1)` with weighted intersection and union. Non-finite
/// probabilities pass through so a diverging run surfaces as a NaN loss.
pub fn weighted_iou<'t, T: Real>(probs: Var<'t, T>, gt: &Tensor<T>, weight: &Tensor<T>) -> Result<Var<'t, T>> {
    same_shape("iou target", probs.shape(), gt.shape())?;
    same_shape("iou weight", probs.shape(), weight.shape())?;
    if probs.with_value(|p| p.data().iter().any(|&v| v < T::zero() || v > T::one())) {
        return Err(Error::invalid("iou loss needs probabilities in [0, 1]"));
    }
    Ok(probs.weighted_iou(gt, weight))
}

/// Sum over the side-outs of `bce + iou`, each level weighted by its own mask.
pub fn sod_loss<'t, T: Real>(side_logits: &[Var<'t, T>], gts: &[Tensor<T>]) -> Result<Var<'t, T>> {
    if side_logits.len() != SIDE_OUTS || gts.len() != SIDE_OUTS {
        return Err(Error::invalid(format!(
            "saliency loss needs {SIDE_OUTS} side-outs and targets, got {} and {}",
            side_logits.len(),
            gts.len()
        )));
    }
    let mut total: Option<Var<'t, T>> = None;
    for (&logits, gt) in side_logits.iter().zip(gts) {
        let w = pixel_weight(gt)?;
        let level = weighted_bce(logits, gt, &w)?.add(weighted_iou(logits.sigmoid(), gt, &w)?);
        total = Some(match total {
            Some(t) => t.add(level),
            None => level,
        });
    }
    Ok(total.expect("five levels"))
}

/// Mean absolute difference.
pub fn l1<'t, T: Real>(pred: Var<'t, T>, target: Var<'t, T>) -> Result<Var<'t, T>> {
    same_shape("l1", pred.shape(), target.shape())?;
    Ok(pred.sub(target).abs().mean())
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over valid window positions and channels (dynamic range 1).
pub fn ssim<'t, T: Real>(pred: Var<'t, T>, target: Var<'t, T>) -> Result<Var<'t, T>> {
    same_shape("ssim", pred.shape(), target.shape())?;
    let [_, _, h, w] = pred.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!("ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} maps, got {h}x{w}")));
    }
    let taps: Vec<T> = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA).into_iter().map(T::of).collect();
    let filter = |v: Var<'t, T>| v.blur(&taps, true).blur(&taps, false);
    let (x, y) = (pred, target);
    let mu_x = filter(x);
    let mu_y = filter(y);
    let mu_xx = mu_x.square();
    let mu_yy = mu_y.square();
    let mu_xy = mu_x.mul(mu_y);
    let var_x = filter(x.square()).sub(mu_xx);
    let var_y = filter(y.square()).sub(mu_yy);
    let cov = filter(x.mul(y)).sub(mu_xy);
    let (c1, c2) = (T::of(SSIM_C1), T::of(SSIM_C2));
    let two = T::of(2.0);
    let num = mu_xy.scale(two).offset(c1).mul(cov.scale(two).offset(c2));
    let den = mu_xx.add(mu_yy).offset(c1).mul(var_x.add(var_y).offset(c2));
    Ok(num.div(den).mean())
}

/// `l1 + weight * (1 - ssim)`.
pub fn recon_loss<'t, T: Real>(pred: Var<'t, T>, target: Var<'t, T>, ssim_weight: f64) -> Result<Var<'t, T>> {
    let l = l1(pred, target)?;
    let k = T::of(ssim_weight);
    Ok(l.add(ssim(pred, target)?.scale(-k).offset(k)))
}

/// Sum over side-outs of the L1 distance between probabilities and contour targets.
pub fn contour_loss<'t, T: Real>(side_probs: &[Var<'t, T>], targets: &[Tensor<T>]) -> Result<Var<'t, T>> {
    if side_probs.len() != SIDE_OUTS || targets.len() != SIDE_OUTS {
        return Err(Error::invalid(format!(
            "contour loss needs {SIDE_OUTS} side-outs and targets, got {} and {}",
            side_probs.len(),
            targets.len()
        )));
    }
    let tape = side_probs[0].tape();
    let mut total: Option<Var<'t, T>> = None;
    for (&p, t) in side_probs.iter().zip(targets) {
        let level = l1(p, tape.constant(t.clone()))?;
        total = Some(match total {
            Some(acc) => acc.add(level),
            None => level,
        });
    }
    Ok(total.expect("five levels"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sslsod_tensor::Tape;

    #[test]
    fn mirror_reflects_repeatedly() {
        let idx: Vec<_> = (-4..7).map(|i| mirror(i, 3)).collect();
        assert_eq!(idx, [2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0]);
    }

    #[test]
    fn isolated_pixel_weight() {
        let mut gt = Tensor::<f64>::zeros([1, 1, 33, 33]);
        gt.data_mut()[16 * 33 + 16] = 1.0;
        let w = pixel_weight(&gt).unwrap();
        let expect = 1.0 + 5.0 * (1.0 - 1.0 / 961.0);
        assert!((w.at(0, 0, 16, 16) - expect).abs() < 1e-12);
        assert!(w.data().iter().all(|&v| (1.0..=6.0).contains(&v)));
    }

    #[test]
    fn constant_masks_have_unit_weight() {
        for v in [0.0, 1.0] {
            let w = pixel_weight(&Tensor::<f64>::full([2, 1, 5, 7], v)).unwrap();
            assert!(w.data().iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn soft_mask_is_rejected() {
        assert!(pixel_weight(&Tensor::<f64>::full([1, 1, 4, 4], 0.5)).is_err());
    }

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        let tape = Tape::<f64>::new();
        let gt = Tensor::full([1, 1, 4, 4], 1.0);
        let w = pixel_weight(&gt).unwrap();
        let l = weighted_bce(tape.constant(Tensor::zeros([1, 1, 4, 4])), &gt, &w).unwrap();
        assert!((l.value().item() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn iou_with_empty_prediction() {
        let tape = Tape::<f64>::new();
        let mut gt = Tensor::<f64>::zeros([1, 1, 5, 5]);
        for i in 0..9 {
            gt.data_mut()[i] = 1.0;
        }
        let w = Tensor::full([1, 1, 5, 5], 1.0);
        let l = weighted_iou(tape.constant(Tensor::zeros([1, 1, 5, 5])), &gt, &w).unwrap();
        assert!((l.value().item() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn ssim_of_opposite_constants() {
        let tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::full([1, 1, 16, 16], 1.0));
        let b = tape.constant(Tensor::zeros([1, 1, 16, 16]));
        let s = ssim(a, b).unwrap().value().item();
        assert!((s - SSIM_C1 / (1.0 + SSIM_C1)).abs() < 1e-12);
        let r = recon_loss(a, b, 1.0).unwrap().value().item();
        assert!((r - (2.0 - SSIM_C1 / (1.0 + SSIM_C1))).abs() < 1e-12);
    }

    #[test]
    fn ssim_rejects_small_inputs() {
        let tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::zeros([1, 1, 10, 16]));
        assert!(ssim(a, a).is_err());
    }

    #[test]
    fn sod_loss_needs_five_levels() {
        let tape = Tape::<f64>::new();
        let v = tape.constant(Tensor::zeros([1, 1, 2, 2]));
        let gts = vec![Tensor::zeros([1, 1, 2, 2]); 4];
        assert!(sod_loss(&[v; 4], &gts).is_err());
    }
}
