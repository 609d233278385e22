use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Plane, RgbImage, RgbdSample};
use crate::error::{Error, Result};

/// Random geometric and photometric jitter parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub hflip_prob: f64,
    /// Rotation angle drawn uniformly from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    pub brightness: (f64, f64),
    pub saturation: (f64, f64),
    pub contrast: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            hflip_prob: 0.5,
            rotation_deg: 10.0,
            brightness: (0.8, 1.2),
            saturation: (0.8, 1.2),
            contrast: (0.8, 1.2),
            seed: 0,
        }
    }
}

impl AugmentSpec {
    /// A spec under which `augment` returns its input unchanged.
    pub fn identity() -> Self {
        Self {
            hflip_prob: 0.0,
            rotation_deg: 0.0,
            brightness: (1.0, 1.0),
            saturation: (1.0, 1.0),
            contrast: (1.0, 1.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::invalid(format!("hflip probability {} outside [0, 1]", self.hflip_prob)));
        }
        if !(self.rotation_deg >= 0.0 && self.rotation_deg.is_finite()) {
            return Err(Error::invalid(format!(
                "rotation range {} must be finite and non-negative",
                self.rotation_deg
            )));
        }
        for (name, (lo, hi)) in
            [("brightness", self.brightness), ("saturation", self.saturation), ("contrast", self.contrast)]
        {
            if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
                return Err(Error::invalid(format!("{name} interval [{lo}, {hi}] must be positive and contain 1")));
            }
        }
        Ok(())
    }
}

/// Deterministic per-sample generator keyed by `(seed, id, epoch)`.
///
/// Because the key does not depend on visiting order, samples can be
/// augmented in any order or in parallel with identical results.
pub fn sample_rng(seed: u64, id: &str, epoch: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((id.len() as u64).to_le_bytes());
    h.update(id.as_bytes());
    h.update(epoch.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// One draw of all augmentation parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentDraw {
    pub flip: bool,
    pub angle_deg: f64,
    pub brightness: f64,
    pub saturation: f64,
    pub contrast: f64,
}

impl AugmentDraw {
    /// Always consumes the same number of random values, whatever the spec.
    pub fn sample(spec: &AugmentSpec, rng: &mut impl Rng) -> Self {
        let flip = rng.random::<f64>() < spec.hflip_prob;
        let angle_deg = uniform(rng, (-spec.rotation_deg, spec.rotation_deg));
        let brightness = uniform(rng, spec.brightness);
        let saturation = uniform(rng, spec.saturation);
        let contrast = uniform(rng, spec.contrast);
        Self { flip, angle_deg, brightness, saturation, contrast }
    }
}

pub fn hflip(p: &Plane) -> Plane {
    let w = p.width();
    Plane::from_fn(p.height(), w, |y, x| p.get(y, w - 1 - x))
}

/// Rotates about the image centre; samples outside the frame clamp to the border.
pub fn rotate(p: &Plane, angle_deg: f64, bilinear: bool) -> Plane {
    let (h, w) = p.size();
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let clamp_y = |v: f64| v.clamp(0.0, h as f64 - 1.0);
    let clamp_x = |v: f64| v.clamp(0.0, w as f64 - 1.0);
    Plane::from_fn(h, w, |y, x| {
        let dy = y as f64 - cy;
        let dx = x as f64 - cx;
        // inverse mapping: where did this output pixel come from
        let sy = clamp_y(cy + cos * dy - sin * dx);
        let sx = clamp_x(cx + sin * dy + cos * dx);
        if bilinear {
            let y0 = sy.floor() as usize;
            let x0 = sx.floor() as usize;
            let y1 = (y0 + 1).min(h - 1);
            let x1 = (x0 + 1).min(w - 1);
            let fy = sy - y0 as f64;
            let fx = sx - x0 as f64;
            let top = p.get(y0, x0) * (1.0 - fx) + p.get(y0, x1) * fx;
            let bot = p.get(y1, x0) * (1.0 - fx) + p.get(y1, x1) * fx;
            top * (1.0 - fy) + bot * fy
        } else {
            p.get(sy.round() as usize, sx.round() as usize)
        }
    })
}

/// Applies the geometric part of a draw to a single map.
pub fn apply_geometric(p: &Plane, draw: &AugmentDraw, bilinear: bool) -> Plane {
    let flipped = if draw.flip { hflip(p) } else { p.clone() };
    if draw.angle_deg == 0.0 {
        flipped
    } else {
        rotate(&flipped, draw.angle_deg, bilinear)
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Brightness, then contrast (about the mean luma), then saturation (about per-pixel luma).
pub fn apply_photometric(rgb: &RgbImage, draw: &AugmentDraw) -> RgbImage {
    let mut out = rgb.clone();
    if draw.brightness != 1.0 {
        out = out.map_channels(|p| p.map(|v| clamp01(v * draw.brightness)));
    }
    if draw.contrast != 1.0 {
        let m = out.luma().mean();
        out = out.map_channels(|p| p.map(|v| clamp01((v - m) * draw.contrast + m)));
    }
    if draw.saturation != 1.0 {
        let luma = out.luma();
        let s = draw.saturation;
        out = out.map_channels(|p| p.zip_map(&luma, |v, l| clamp01((v - l) * s + l)).expect("same size"));
    }
    out
}

/// Applies one random draw to all modalities of a sample.
pub fn augment(sample: &RgbdSample, spec: &AugmentSpec, rng: &mut impl Rng) -> RgbdSample {
    let draw = AugmentDraw::sample(spec, rng);
    augment_with(sample, &draw)
}

pub fn augment_with(sample: &RgbdSample, draw: &AugmentDraw) -> RgbdSample {
    let rgb = sample.rgb.map_channels(|p| apply_geometric(p, draw, true).map(clamp01));
    let rgb = apply_photometric(&rgb, draw);
    let depth = apply_geometric(&sample.depth, draw, true).map(clamp01);
    let gt = apply_geometric(&sample.gt, draw, false).map(|v| if v >= 0.5 { 1.0 } else { 0.0 });
    RgbdSample { id: sample.id.clone(), rgb, depth, gt, source_size: sample.source_size }
}
