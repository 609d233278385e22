use rand::Rng;
use sslsod_tensor::{ParamId, ParamStore, Real, Session, Tensor, Var};

/// Stride-1 square convolution with bias and optional ReLU.
#[derive(Clone, Debug)]
pub struct ConvBlock {
    pub name: String,
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub relu: bool,
}

impl ConvBlock {
    /// Fan-in uniform weights, zero bias.
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        relu: bool,
    ) -> Self {
        let weight = store.insert_fan_in_uniform(format!("{name}.weight"), [c_out, c_in, kernel, kernel], rng);
        let bias = store.insert(format!("{name}.bias"), Tensor::zeros([1, c_out, 1, 1]));
        Self { name: name.to_string(), weight, bias, kernel, relu }
    }

    /// A channel-preserving block that reproduces its input exactly: a
    /// centred delta kernel, zero bias and no rectification.
    pub fn identity<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize, kernel: usize) -> Self {
        let mid = kernel / 2;
        let w = Tensor::from_fn([channels, channels, kernel, kernel], |[o, i, y, x]| {
            if o == i && y == mid && x == mid {
                T::one()
            } else {
                T::zero()
            }
        });
        let weight = store.insert(format!("{name}.weight"), w);
        let bias = store.insert(format!("{name}.bias"), Tensor::zeros([1, channels, 1, 1]));
        Self { name: name.to_string(), weight, bias, kernel, relu: false }
    }

    pub fn forward<'s, T: Real>(&self, s: &'s Session<'_, T>, x: Var<'s, T>) -> Var<'s, T> {
        let y = x.conv2d(s.param(self.weight), Some(s.param(self.bias)), self.kernel / 2);
        if self.relu {
            y.relu()
        } else {
            y
        }
    }

    pub fn in_channels<T: Real>(&self, store: &ParamStore<T>) -> usize {
        store.value(self.weight).channels()
    }

    pub fn out_channels<T: Real>(&self, store: &ParamStore<T>) -> usize {
        store.value(self.weight).batch()
    }
}
