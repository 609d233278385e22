use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Plane, RgbImage, RgbdSample};
use crate::error::{Error, Result};

/// Parameters of the synthetic RGB-D scene generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub size: usize,
    pub count: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
    pub fg_depth: (f64, f64),
    pub bg_depth: (f64, f64),
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            size: 64,
            count: 200,
            min_shapes: 1,
            max_shapes: 3,
            fg_depth: (0.6, 1.0),
            bg_depth: (0.0, 0.4),
            noise: 0.03,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("synthetic sample count must be positive"));
        }
        if self.size < 8 {
            return Err(Error::invalid(format!("synthetic image size {} is below 8 pixels", self.size)));
        }
        if self.min_shapes == 0 || self.min_shapes > self.max_shapes {
            return Err(Error::invalid(format!(
                "shape count range {}..={} must be non-empty and start at 1 or more",
                self.min_shapes, self.max_shapes
            )));
        }
        for (name, (lo, hi)) in [("foreground", self.fg_depth), ("background", self.bg_depth)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::invalid(format!("{name} depth range [{lo}, {hi}] is not inside [0, 1]")));
            }
        }
        let (f, b) = (self.fg_depth, self.bg_depth);
        if f.0 <= b.1 && b.0 <= f.1 {
            return Err(Error::invalid(format!(
                "foreground depth [{}, {}] overlaps background depth [{}, {}]",
                f.0, f.1, b.0, b.1
            )));
        }
        if !(self.noise >= 0.0 && self.noise < 0.5) {
            return Err(Error::invalid(format!("noise amplitude {} must lie in [0, 0.5)", self.noise)));
        }
        Ok(())
    }
}

pub fn synth_id(index: usize) -> String {
    format!("synth_{index:05}")
}

fn index_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"synth");
    h.update(seed.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

#[derive(Clone, Debug)]
enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64, theta: f64 },
    Rect { cy: f64, cx: f64, hy: f64, hx: f64, theta: f64 },
    Polygon { vertices: Vec<(f64, f64)> },
}

impl Shape {
    fn random(rng: &mut impl Rng, size: f64) -> Self {
        let cy = size * rng.random_range(0.25..0.75);
        let cx = size * rng.random_range(0.25..0.75);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        match rng.random_range(0..3) {
            0 => Shape::Ellipse {
                cy,
                cx,
                ry: size * rng.random_range(0.1..0.28),
                rx: size * rng.random_range(0.1..0.28),
                theta,
            },
            1 => Shape::Rect {
                cy,
                cx,
                hy: size * rng.random_range(0.08..0.25),
                hx: size * rng.random_range(0.08..0.25),
                theta,
            },
            _ => {
                let n = rng.random_range(3..=7);
                let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
                angles.sort_by(f64::total_cmp);
                let vertices = angles
                    .into_iter()
                    .map(|a| {
                        let r = size * rng.random_range(0.12..0.3);
                        (cy + r * a.sin(), cx + r * a.cos())
                    })
                    .collect();
                Shape::Polygon { vertices }
            }
        }
    }

    fn contains(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Ellipse { cy, cx, ry, rx, theta } => {
                let (s, c) = theta.sin_cos();
                let (dy, dx) = (y - cy, x - cx);
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Rect { cy, cx, hy, hx, theta } => {
                let (s, c) = theta.sin_cos();
                let (dy, dx) = (y - cy, x - cx);
                (c * dx + s * dy).abs() <= hx && (-s * dx + c * dy).abs() <= hy
            }
            Shape::Polygon { ref vertices } => {
                // even-odd ray casting along +x
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let (y1, x1) = vertices[i];
                    let (y2, x2) = vertices[(i + 1) % n];
                    if (y1 > y) != (y2 > y) && x < x1 + (y - y1) * (x2 - x1) / (y2 - y1) {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }
}

fn random_color(rng: &mut impl Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

/// Colour at least `0.35` away (max-norm) from every reference colour.
fn distinct_color(rng: &mut impl Rng, avoid: &[[f64; 3]]) -> [f64; 3] {
    let far =
        |c: &[f64; 3]| avoid.iter().all(|a| a.iter().zip(c).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) >= 0.35);
    for _ in 0..64 {
        let c = random_color(rng);
        if far(&c) {
            return c;
        }
    }
    // fall back to the complement of the first reference
    avoid.first().map(|a| a.map(|v| if v < 0.5 { 1.0 } else { 0.0 })).unwrap_or([1.0; 3])
}

fn scene(spec: &SynthSpec, rng: &mut impl Rng) -> (RgbImage, Plane, Plane) {
    let n = spec.size;
    let size = n as f64;
    let c0 = random_color(rng);
    let c1 = random_color(rng);
    let dir = rng.random_range(0.0..std::f64::consts::TAU);
    let (ds, dc) = dir.sin_cos();
    // gradient coordinate in [0, 1] along a random direction
    let ramp = |y: usize, x: usize| {
        let u = ((y as f64 / size - 0.5) * ds + (x as f64 / size - 0.5) * dc) / std::f64::consts::SQRT_2 + 0.5;
        u.clamp(0.0, 1.0)
    };
    let mut channels: [Plane; 3] = [0, 1, 2].map(|c| Plane::from_fn(n, n, |y, x| c0[c] + (c1[c] - c0[c]) * ramp(y, x)));
    for ch in channels.iter_mut() {
        for v in ch.data_mut() {
            *v = (*v + rng.random_range(-1.0..=1.0) * spec.noise).clamp(0.0, 1.0);
        }
    }
    let (blo, bhi) = spec.bg_depth;
    let depth_dir = rng.random_range(0.0..std::f64::consts::TAU);
    let (es, ec) = depth_dir.sin_cos();
    let mut depth = Plane::from_fn(n, n, |y, x| {
        let u = ((y as f64 / size - 0.5) * es + (x as f64 / size - 0.5) * ec) / std::f64::consts::SQRT_2 + 0.5;
        blo + (bhi - blo) * u.clamp(0.0, 1.0)
    });
    let mut gt = Plane::zeros(n, n);

    let bg_mean =
        [c0, c1].iter().fold([0.0; 3], |acc, c| [acc[0] + c[0] / 2.0, acc[1] + c[1] / 2.0, acc[2] + c[2] / 2.0]);
    let count = rng.random_range(spec.min_shapes..=spec.max_shapes);
    for _ in 0..count {
        let shape = Shape::random(rng, size);
        let color = distinct_color(rng, &[c0, c1, bg_mean]);
        let (flo, fhi) = spec.fg_depth;
        let d = if fhi > flo { rng.random_range(flo..=fhi) } else { flo };
        for y in 0..n {
            for x in 0..n {
                if shape.contains(y as f64 + 0.5, x as f64 + 0.5) {
                    for (c, ch) in channels.iter_mut().enumerate() {
                        ch.set(y, x, color[c]);
                    }
                    depth.set(y, x, d);
                    gt.set(y, x, 1.0);
                }
            }
        }
    }
    (RgbImage { channels }, depth, gt)
}

/// Generates sample `index`; the result depends only on `(spec, index)`.
pub fn gen_synth_sample(spec: &SynthSpec, index: usize) -> Result<RgbdSample> {
    spec.validate()?;
    let mut rng = index_rng(spec.seed, index);
    let full = (spec.size * spec.size) as f64;
    loop {
        let (rgb, depth, gt) = scene(spec, &mut rng);
        let area = gt.sum();
        if area > 0.0 && area < full {
            return RgbdSample::new(synth_id(index), rgb, depth, gt);
        }
    }
}

pub fn gen_synth(spec: &SynthSpec) -> Result<Vec<RgbdSample>> {
    spec.validate()?;
    (0..spec.count).map(|i| gen_synth_sample(spec, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec { size: 32, count: 8, seed: 7, ..SynthSpec::default() }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(gen_synth(&small()).unwrap(), gen_synth(&small()).unwrap());
    }

    #[test]
    fn foreground_depth_comes_from_foreground_range() {
        let spec = small();
        for s in gen_synth(&spec).unwrap() {
            for (&g, &d) in s.gt.data().iter().zip(s.depth.data()) {
                if g == 1.0 {
                    assert!((spec.fg_depth.0..=spec.fg_depth.1).contains(&d));
                } else {
                    assert!((spec.bg_depth.0..=spec.bg_depth.1).contains(&d));
                }
            }
        }
    }

    #[test]
    fn masks_are_neither_empty_nor_full() {
        for s in gen_synth(&small()).unwrap() {
            let a = s.gt.sum();
            assert!(a > 0.0 && a < s.gt.len() as f64, "{}", s.id);
        }
    }

    #[test]
    fn ids_are_zero_padded() {
        let s = gen_synth(&small()).unwrap();
        assert_eq!(s[3].id, "synth_00003");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(gen_synth(&SynthSpec { count: 0, ..small() }).is_err());
        assert!(gen_synth(&SynthSpec { fg_depth: (0.3, 0.8), ..small() }).is_err());
    }

    #[test]
    fn sample_does_not_depend_on_count() {
        let a = gen_synth_sample(&small(), 5).unwrap();
        let b = gen_synth_sample(&SynthSpec { count: 100, ..small() }, 5).unwrap();
        assert_eq!(a, b);
    }
}
