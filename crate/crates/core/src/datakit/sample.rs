use sslsod_tensor::{Real, Tensor};

use super::{Plane, RgbImage};
use crate::error::{Error, Result};

/// An aligned RGB image, depth map and binary saliency mask.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbdSample {
    pub id: String,
    pub rgb: RgbImage,
    pub depth: Plane,
    pub gt: Plane,
    /// `(height, width)` of the files the sample was read from.
    pub source_size: (usize, usize),
}

impl RgbdSample {
    pub fn new(id: impl Into<String>, rgb: RgbImage, depth: Plane, gt: Plane) -> Result<Self> {
        let source_size = rgb.size();
        let sample = Self { id: id.into(), rgb, depth, gt, source_size };
        sample.validate()?;
        Ok(sample)
    }

    pub fn size(&self) -> (usize, usize) {
        self.rgb.size()
    }

    /// Checks aligned sizes, unit ranges and a strictly binary mask.
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.rgb.size();
        for (name, plane) in [("depth", &self.depth), ("gt", &self.gt)] {
            if plane.size() != (h, w) {
                return Err(Error::Dataset(format!(
                    "sample `{}`: {name} is {}x{} but rgb is {h}x{w}",
                    self.id,
                    plane.height(),
                    plane.width()
                )));
            }
        }
        if !self.rgb.in_unit_range() || !self.depth.in_unit_range() {
            return Err(Error::Dataset(format!("sample `{}` has values outside [0, 1]", self.id)));
        }
        if !self.gt.is_binary() {
            return Err(Error::Dataset(format!("sample `{}` has a non-binary mask", self.id)));
        }
        Ok(())
    }

    /// Resamples all modalities (bilinear for rgb/depth, nearest for the mask).
    pub fn resized(&self, height: usize, width: usize) -> Self {
        Self {
            id: self.id.clone(),
            rgb: self.rgb.map_channels(|p| p.resize_bilinear(height, width)),
            depth: self.depth.resize_bilinear(height, width),
            gt: self.gt.resize_nearest(height, width),
            source_size: self.source_size,
        }
    }
}

/// Mini-batch tensors assembled from samples.
pub struct Batch<T> {
    pub ids: Vec<String>,
    pub rgb: Tensor<T>,
    pub depth: Tensor<T>,
    pub gt: Tensor<T>,
}

impl<T: Real> Batch<T> {
    pub fn from_samples(samples: &[RgbdSample]) -> Self {
        Self {
            ids: samples.iter().map(|s| s.id.clone()).collect(),
            rgb: Tensor::stack(&samples.iter().map(|s| s.rgb.to_tensor()).collect::<Vec<_>>()),
            depth: Tensor::stack(&samples.iter().map(|s| s.depth.to_tensor()).collect::<Vec<_>>()),
            gt: Tensor::stack(&samples.iter().map(|s| s.gt.to_tensor()).collect::<Vec<_>>()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_misaligned_depth() {
        let rgb = RgbImage::filled(4, 4, [0.5; 3]);
        let err = RgbdSample::new("a", rgb, Plane::zeros(4, 3), Plane::zeros(4, 4)).unwrap_err();
        assert!(err.to_string().contains("depth"));
    }

    #[test]
    fn rejects_soft_mask() {
        let rgb = RgbImage::filled(2, 2, [0.5; 3]);
        assert!(RgbdSample::new("a", rgb, Plane::zeros(2, 2), Plane::filled(2, 2, 0.5)).is_err());
    }

    #[test]
    fn batch_stacks_along_first_axis() {
        let s = RgbdSample::new("a", RgbImage::filled(2, 2, [0.1, 0.2, 0.3]), Plane::zeros(2, 2), Plane::zeros(2, 2))
            .unwrap();
        let b = Batch::<f32>::from_samples(&[s.clone(), s]);
        assert_eq!(b.rgb.shape(), [2, 3, 2, 2]);
        assert_eq!(b.depth.shape(), [2, 1, 2, 2]);
    }
}
