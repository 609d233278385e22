use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sslsod_tensor::{ParamStore, Real, Session, Var};

use crate::error::{Error, Result};
use crate::layers::ConvBlock;

pub const LEVELS: usize = 5;

/// Subtracted from every input value before the first convolution.
pub const INPUT_CENTER: f64 = 0.5;

/// VGG-16 style encoder geometry shared by both streams.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub widths: [usize; LEVELS],
    pub convs: [usize; LEVELS],
    pub rgb_channels: usize,
    /// 1 for native depth input; 3 replicates the depth map into three channels.
    pub depth_channels: usize,
    /// Common width of all transition layers, fusion sites and decoders.
    pub transition_width: usize,
    /// Width of the stage-1 autoencoder's feature pyramid.
    pub fpn_width: usize,
}

impl BackboneConfig {
    pub fn vgg16() -> Self {
        Self {
            widths: [64, 128, 256, 512, 512],
            convs: [2, 2, 3, 3, 3],
            rgb_channels: 3,
            depth_channels: 1,
            transition_width: 64,
            fpn_width: 64,
        }
    }

    pub fn tiny() -> Self {
        Self { widths: [16, 32, 32, 64, 64], transition_width: 16, fpn_width: 32, ..Self::vgg16() }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "tiny" => Ok(Self::tiny()),
            "vgg16" | "default" => Ok(Self::vgg16()),
            other => Err(Error::Config(format!("unknown backbone preset `{other}` (expected tiny or vgg16)"))),
        }
    }

    /// Output stride of each level.
    pub fn strides(&self) -> [usize; LEVELS] {
        [1, 2, 4, 8, 16]
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.contains(&0) || self.convs.contains(&0) || self.transition_width == 0 || self.fpn_width == 0 {
            return Err(Error::Config(
                "backbone widths, conv counts, transition and pyramid widths must be positive".into(),
            ));
        }
        if self.rgb_channels != 3 {
            return Err(Error::Config(format!("rgb stream needs 3 input channels, got {}", self.rgb_channels)));
        }
        if !matches!(self.depth_channels, 1 | 3) {
            return Err(Error::Config(format!("depth stream takes 1 or 3 channels, got {}", self.depth_channels)));
        }
        Ok(())
    }

    /// Hex SHA-256 over the parameter-shaping fields.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"backbone/v1");
        for v in self.widths.iter().chain(&self.convs) {
            h.update((*v as u64).to_le_bytes());
        }
        for v in [self.rgb_channels, self.depth_channels, self.transition_width, self.fpn_width] {
            h.update((v as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Which encoder stream an image belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Rgb,
    Depth,
}

impl Stream {
    pub fn prefix(self) -> &'static str {
        match self {
            Stream::Rgb => "rgb_encoder",
            Stream::Depth => "depth_encoder",
        }
    }
}

/// Five conv blocks; blocks 2..5 start with a 2x2 max-pool.
pub struct Encoder {
    stream: Stream,
    in_channels: usize,
    blocks: Vec<Vec<ConvBlock>>,
}

impl Encoder {
    pub fn new<T: Real>(store: &mut ParamStore<T>, rng: &mut impl Rng, cfg: &BackboneConfig, stream: Stream) -> Self {
        let in_channels = match stream {
            Stream::Rgb => cfg.rgb_channels,
            Stream::Depth => cfg.depth_channels,
        };
        let mut c = in_channels;
        let mut blocks = Vec::with_capacity(LEVELS);
        for level in 0..LEVELS {
            let mut convs = Vec::with_capacity(cfg.convs[level]);
            for j in 0..cfg.convs[level] {
                let name = format!("{}.block{}.conv{}", stream.prefix(), level + 1, j + 1);
                convs.push(ConvBlock::new(store, rng, &name, c, cfg.widths[level], 3, true));
                c = cfg.widths[level];
            }
            blocks.push(convs);
        }
        Self { stream, in_channels, blocks }
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Features at strides 1, 2, 4, 8 and 16.
    pub fn forward<'s, T: Real>(&self, s: &'s Session<'_, T>, image: Var<'s, T>) -> Result<Vec<Var<'s, T>>> {
        let mut x = image;
        let channels = x.shape()[1];
        if channels != self.in_channels {
            if self.stream == Stream::Depth && channels == 1 && self.in_channels == 3 {
                x = s.tape().concat_channels(&[x, x, x]);
            } else {
                return Err(Error::invalid(format!(
                    "{} expects {} input channels, got {channels}",
                    self.stream.prefix(),
                    self.in_channels
                )));
            }
        }
        let [_, _, h, w] = x.shape();
        let div = 1 << (LEVELS - 1);
        if h % div != 0 || w % div != 0 || h == 0 || w == 0 {
            return Err(Error::invalid(format!("input size {h}x{w} is not divisible by {div}")));
        }
        // centre inputs on zero so padding reads as mid-grey
        x = x.offset(T::of(-INPUT_CENTER));
        let mut feats = Vec::with_capacity(LEVELS);
        for (level, convs) in self.blocks.iter().enumerate() {
            if level > 0 {
                x = x.max_pool2();
            }
            for conv in convs {
                x = conv.forward(s, x);
            }
            feats.push(x);
        }
        Ok(feats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use sslsod_tensor::Tensor;

    #[test]
    fn tiny_features_follow_stride_schedule() {
        let cfg = BackboneConfig::tiny();
        let mut store = ParamStore::<f32>::new();
        let enc = Encoder::new(&mut store, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0), &cfg, Stream::Rgb);
        let s = Session::new(&store);
        let feats = enc.forward(&s, s.input(Tensor::zeros([1, 3, 64, 64]))).unwrap();
        let sizes: Vec<_> = feats.iter().map(|f| f.shape()[2]).collect();
        let chans: Vec<_> = feats.iter().map(|f| f.shape()[1]).collect();
        assert_eq!(sizes, [64, 32, 16, 8, 4]);
        assert_eq!(chans, [16, 32, 32, 64, 64]);
    }

    #[test]
    fn wrong_channel_count_is_rejected() {
        let cfg = BackboneConfig::tiny();
        let mut store = ParamStore::<f32>::new();
        let enc = Encoder::new(&mut store, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0), &cfg, Stream::Rgb);
        let s = Session::new(&store);
        assert!(enc.forward(&s, s.input(Tensor::zeros([1, 1, 64, 64]))).is_err());
    }

    #[test]
    fn fingerprint_tracks_widths() {
        assert_eq!(BackboneConfig::tiny().fingerprint(), BackboneConfig::tiny().fingerprint());
        assert_ne!(BackboneConfig::tiny().fingerprint(), BackboneConfig::vgg16().fingerprint());
    }

    #[test]
    fn vgg16_parameter_names_have_thirteen_convs() {
        let mut store = ParamStore::<f32>::new();
        let cfg = BackboneConfig { widths: [2, 2, 2, 2, 2], ..BackboneConfig::vgg16() };
        Encoder::new(&mut store, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0), &cfg, Stream::Depth);
        assert_eq!(store.len(), 26);
        assert!(store.get("depth_encoder.block5.conv3.weight").is_some());
    }
}
