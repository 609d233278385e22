use sslsod_tensor::{Real, Tensor};

use crate::error::{Error, Result};

/// A single-channel `H x W` map stored row-major in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape("plane data", [data.len()], [height, width]));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.size() != other.size() {
            return Err(Error::shape("plane zip", [self.height, self.width], [other.height, other.width]));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { height: self.height, width: self.width, data })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// `[1, 1, H, W]` tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::from_vec([1, 1, self.height, self.width], self.data.iter().map(|&v| T::of(v)).collect())
    }

    /// Channel `c` of batch item `n`.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, n: usize, c: usize) -> Self {
        let data = t.plane(n, c).iter().map(|v| v.to_f64_lossy()).collect();
        Self { height: t.height(), width: t.width(), data }
    }

    /// Bilinear resize with half-pixel centers.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Self {
        if (height, width) == self.size() {
            return self.clone();
        }
        let data = sslsod_tensor::kernels::resize_bilinear(&self.data, 1, self.height, self.width, height, width);
        Self { height, width, data }
    }

    /// Nearest-neighbour resize (used for label maps).
    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        Plane::from_fn(height, width, |y, x| {
            let iy = (((y as f64 + 0.5) * sy) as usize).min(self.height - 1);
            let ix = (((x as f64 + 0.5) * sx) as usize).min(self.width - 1);
            self.get(iy, ix)
        })
    }
}

/// A three-channel colour image as planar R, G, B maps in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub channels: [Plane; 3],
}

impl RgbImage {
    pub fn new(r: Plane, g: Plane, b: Plane) -> Result<Self> {
        if r.size() != g.size() || r.size() != b.size() {
            return Err(Error::shape("rgb channels", [r.height, r.width], [g.height, g.width]));
        }
        Ok(Self { channels: [r, g, b] })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        Self { channels: rgb.map(|v| Plane::filled(height, width, v)) }
    }

    pub fn height(&self) -> usize {
        self.channels[0].height
    }

    pub fn width(&self) -> usize {
        self.channels[0].width
    }

    pub fn size(&self) -> (usize, usize) {
        self.channels[0].size()
    }

    pub fn in_unit_range(&self) -> bool {
        self.channels.iter().all(Plane::in_unit_range)
    }

    pub fn map_channels(&self, f: impl Fn(&Plane) -> Plane) -> Self {
        Self { channels: [f(&self.channels[0]), f(&self.channels[1]), f(&self.channels[2])] }
    }

    /// `[1, 3, H, W]` tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let data = self.channels.iter().flat_map(|p| p.data.iter().map(|&v| T::of(v))).collect();
        Tensor::from_vec([1, 3, self.height(), self.width()], data)
    }

    pub fn from_tensor<T: Real>(t: &Tensor<T>, n: usize) -> Self {
        Self { channels: [0, 1, 2].map(|c| Plane::from_tensor(t, n, c)) }
    }

    /// ITU-R BT.601 luma.
    pub fn luma(&self) -> Plane {
        let [r, g, b] = &self.channels;
        Plane::from_fn(self.height(), self.width(), |y, x| {
            0.299 * r.get(y, x) + 0.587 * g.get(y, x) + 0.114 * b.get(y, x)
        })
    }
}
