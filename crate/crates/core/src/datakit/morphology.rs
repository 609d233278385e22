//! Flat square-window grayscale morphology with replicate borders.
//!
//! A replicated border is the same as clamping the window to the image, so
//! constant maps are exact fixed points of both operators.

use super::Plane;
use crate::error::{Error, Result};

/// A full-ones `m x m` window, `m` odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    m: usize,
}

impl StructuringElement {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m % 2 == 0 {
            return Err(Error::invalid(format!("structuring element size must be odd and positive, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn radius(&self) -> usize {
        self.m / 2
    }
}

/// Default window side for depth contours.
pub const DEFAULT_CONTOUR_WINDOW: usize = 5;

fn windowed(map: &Plane, se: StructuringElement, pick: fn(f64, f64) -> f64) -> Plane {
    let (h, w) = map.size();
    let r = se.radius();
    if r == 0 {
        return map.clone();
    }
    // a square window is separable: rows first, then columns
    let mut rows = Plane::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            let mut acc = map.get(y, lo);
            for xx in lo + 1..=hi {
                acc = pick(acc, map.get(y, xx));
            }
            rows.set(y, x, acc);
        }
    }
    let mut out = Plane::zeros(h, w);
    for x in 0..w {
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r).min(h - 1);
            let mut acc = rows.get(lo, x);
            for yy in lo + 1..=hi {
                acc = pick(acc, rows.get(yy, x));
            }
            out.set(y, x, acc);
        }
    }
    out
}

/// Windowed maximum.
pub fn dilate(map: &Plane, se: StructuringElement) -> Plane {
    windowed(map, se, f64::max)
}

/// Windowed minimum.
pub fn erode(map: &Plane, se: StructuringElement) -> Plane {
    windowed(map, se, f64::min)
}

/// Morphological gradient `dilate(depth) - erode(depth)` with an `m x m` window.
pub fn depth_contour_gt(depth: &Plane, m: usize) -> Result<Plane> {
    let se = StructuringElement::new(m)?;
    dilate(depth, se).zip_map(&erode(depth, se), |d, e| d - e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[f64]) -> Plane {
        Plane::new(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn step_edge_examples() {
        let step = row(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let se = StructuringElement::new(3).unwrap();
        assert_eq!(dilate(&step, se).data(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(erode(&step, se).data(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(depth_contour_gt(&step, 3).unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_pixel_grows_into_block() {
        let mut p = Plane::zeros(5, 5);
        p.set(2, 2, 1.0);
        let d = dilate(&p, StructuringElement::new(3).unwrap());
        for y in 0..5 {
            for x in 0..5 {
                let inside = (1..=3).contains(&y) && (1..=3).contains(&x);
                assert_eq!(d.get(y, x), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_maps_are_fixed_points() {
        let c = Plane::filled(6, 7, 0.37);
        for m in [1, 3, 5, 7] {
            let se = StructuringElement::new(m).unwrap();
            assert_eq!(dilate(&c, se), c);
            assert_eq!(erode(&c, se), c);
            assert!(depth_contour_gt(&c, m).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn even_or_zero_window_is_rejected() {
        assert!(StructuringElement::new(4).is_err());
        assert!(StructuringElement::new(0).is_err());
        assert!(depth_contour_gt(&Plane::zeros(3, 3), 2).is_err());
    }

    #[test]
    fn default_window_is_five() {
        assert_eq!(DEFAULT_CONTOUR_WINDOW, 5);
    }
}
