use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sslsod_tensor::{ParamStore, Real, Session, Var};

use super::backbone::{BackboneConfig, Encoder, Stream, LEVELS};
use crate::error::{Error, Result};
use crate::layers::ConvBlock;

/// Which modality the autoencoder reads and which it predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    RgbToDepth,
    DepthToRgb,
}

impl Direction {
    pub fn input_stream(self) -> Stream {
        match self {
            Direction::RgbToDepth => Stream::Rgb,
            Direction::DepthToRgb => Stream::Depth,
        }
    }

    pub fn output_channels(self) -> usize {
        match self {
            Direction::RgbToDepth => 1,
            Direction::DepthToRgb => 3,
        }
    }
}

/// Encoder plus a feature-pyramid decoder producing one full-resolution map.
///
/// Each level applies a 1x1 lateral projection, adds the upsampled coarser
/// level, and smooths with a 3x3 conv+ReLU; a final 3x3 conv and a sigmoid
/// give the prediction.
pub struct AutoEncoder<T: Real> {
    direction: Direction,
    config: BackboneConfig,
    params: ParamStore<T>,
    encoder: Encoder,
    laterals: Vec<ConvBlock>,
    smooth: Vec<ConvBlock>,
    output: ConvBlock,
}

impl<T: Real> AutoEncoder<T> {
    pub fn new(config: BackboneConfig, direction: Direction, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, &mut rng, &config, direction.input_stream());
        let t = config.fpn_width;
        let mut laterals = Vec::with_capacity(LEVELS);
        let mut smooth = Vec::with_capacity(LEVELS);
        for l in 0..LEVELS {
            laterals.push(ConvBlock::new(
                &mut store,
                &mut rng,
                &format!("fpn.lateral{}", l + 1),
                config.widths[l],
                t,
                1,
                false,
            ));
            smooth.push(ConvBlock::new(&mut store, &mut rng, &format!("fpn.smooth{}", l + 1), t, t, 3, true));
        }
        let output = ConvBlock::new(&mut store, &mut rng, "fpn.output", t, direction.output_channels(), 3, false);
        Ok(Self { direction, config, params: store, encoder, laterals, smooth, output })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn fingerprint(&self) -> String {
        self.config.fingerprint()
    }

    /// Predicted target modality in `[0, 1]` at the input resolution.
    pub fn forward<'s>(&self, s: &'s Session<'_, T>, input: Var<'s, T>) -> Result<Var<'s, T>> {
        let feats = self.encoder.forward(s, input).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::invalid(format!("{:?} autoencoder: {m}", self.direction)),
            other => other,
        })?;
        let top = LEVELS - 1;
        let mut p = self.smooth[top].forward(s, self.laterals[top].forward(s, feats[top]));
        for l in (0..top).rev() {
            let [_, _, h, w] = feats[l].shape();
            let merged = self.laterals[l].forward(s, feats[l]).add(p.resize(h, w));
            p = self.smooth[l].forward(s, merged);
        }
        Ok(self.output.forward(s, p).sigmoid())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sslsod_tensor::Tensor;

    #[test]
    fn output_shapes_follow_direction() {
        for (dir, c_in, c_out) in [(Direction::RgbToDepth, 3, 1), (Direction::DepthToRgb, 1, 3)] {
            let ae = AutoEncoder::<f32>::new(BackboneConfig::tiny(), dir, 0).unwrap();
            let s = Session::new(ae.params());
            let y = ae.forward(&s, s.input(Tensor::full([1, c_in, 32, 32], 0.5))).unwrap();
            assert_eq!(y.shape(), [1, c_out, 32, 32]);
            assert!(y.value().data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn encoder_names_match_the_saliency_model() {
        let ae = AutoEncoder::<f32>::new(BackboneConfig::tiny(), Direction::DepthToRgb, 0).unwrap();
        assert!(ae.params().get("depth_encoder.block1.conv1.weight").is_some());
        assert!(ae.params().names().all(|n| n.starts_with("depth_encoder.") || n.starts_with("fpn.")));
    }
}
