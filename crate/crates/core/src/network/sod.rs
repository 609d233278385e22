use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sslsod_tensor::{ParamStore, Real, Session, Var};

use super::backbone::{BackboneConfig, Encoder, Stream, LEVELS};
use crate::error::{Error, Result};
use crate::fusion::{Branches, CdaOutput, Fusion, FusionMode};
use crate::layers::ConvBlock;

/// Architecture of the two-stream saliency / contour network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SodConfig {
    pub backbone: BackboneConfig,
    /// Fusion used at the five cross-modal sites.
    pub cross_modal: FusionMode,
    /// Fusion used at the four cross-level sites.
    pub cross_level: FusionMode,
}

impl SodConfig {
    pub fn full(backbone: BackboneConfig) -> Self {
        Self { backbone, cross_modal: FusionMode::Cda(Branches::ALL), cross_level: FusionMode::Cda(Branches::ALL) }
    }

    pub fn tiny() -> Self {
        Self::full(BackboneConfig::tiny())
    }
}

/// Structural counts of an instantiated model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Census {
    pub rgb_encoder_blocks: usize,
    pub depth_encoder_blocks: usize,
    pub transitions: usize,
    pub cross_modal_sites: usize,
    pub cross_level_sites: usize,
    pub cda_modules: usize,
    pub decoders: usize,
    pub heads: usize,
}

/// Level-wise pair of 1x1 transitions, one per stream.
struct Transition {
    rgb: ConvBlock,
    depth: ConvBlock,
}

/// Result of one forward pass.
pub struct SodForward<'s, T: Real> {
    /// Side-output logits, coarsest (stride 16) first.
    pub side_outs: Vec<Var<'s, T>>,
    /// Number of CDA evaluations performed.
    pub cda_calls: usize,
    /// `(site name, intermediates)` for every CDA site, in evaluation order.
    pub sites: Vec<(String, CdaOutput<'s, T>)>,
}

pub struct SodModel<T: Real> {
    config: SodConfig,
    params: ParamStore<T>,
    rgb_encoder: Encoder,
    depth_encoder: Encoder,
    transitions: Vec<Transition>,
    initial_head: ConvBlock,
    cross_modal: Vec<Fusion>,
    cross_level: Vec<Fusion>,
    decoders: Vec<[ConvBlock; 2]>,
    heads: Vec<ConvBlock>,
}

pub const ENCODER_PREFIXES: [&str; 2] = ["rgb_encoder.", "depth_encoder."];

pub fn is_encoder_param(name: &str) -> bool {
    ENCODER_PREFIXES.iter().any(|p| name.starts_with(p))
}

/// True for the five 1-channel side-out heads.
pub fn is_head_param(name: &str) -> bool {
    name.strip_prefix("head").is_some_and(|rest| rest.starts_with(|c: char| c.is_ascii_digit()))
}

impl<T: Real> SodModel<T> {
    pub fn new(config: SodConfig, seed: u64) -> Result<Self> {
        config.backbone.validate()?;
        let cfg = &config.backbone;
        let t = cfg.transition_width;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let rgb_encoder = Encoder::new(&mut store, &mut rng, cfg, Stream::Rgb);
        let depth_encoder = Encoder::new(&mut store, &mut rng, cfg, Stream::Depth);
        let transitions = (0..LEVELS)
            .map(|l| Transition {
                rgb: ConvBlock::new(
                    &mut store,
                    &mut rng,
                    &format!("transition{}.rgb", l + 1),
                    cfg.widths[l],
                    t,
                    1,
                    true,
                ),
                depth: ConvBlock::new(
                    &mut store,
                    &mut rng,
                    &format!("transition{}.depth", l + 1),
                    cfg.widths[l],
                    t,
                    1,
                    true,
                ),
            })
            .collect();
        let initial_head = ConvBlock::new(&mut store, &mut rng, "head5", 2 * t, 1, 3, false);
        let mut cross_modal = Vec::with_capacity(LEVELS);
        for l in 0..LEVELS {
            cross_modal.push(Fusion::new(&mut store, &mut rng, &format!("cm{}", l + 1), t, config.cross_modal)?);
        }
        let mut cross_level = Vec::with_capacity(LEVELS - 1);
        let mut decoders = Vec::with_capacity(LEVELS - 1);
        let mut heads = Vec::with_capacity(LEVELS - 1);
        for l in 0..LEVELS - 1 {
            let level = l + 1;
            cross_level.push(Fusion::new(&mut store, &mut rng, &format!("cl{level}"), t, config.cross_level)?);
            decoders.push([
                ConvBlock::new(&mut store, &mut rng, &format!("decoder{level}.conv1"), t, t, 3, true),
                ConvBlock::new(&mut store, &mut rng, &format!("decoder{level}.conv2"), t, t, 3, true),
            ]);
            heads.push(ConvBlock::new(&mut store, &mut rng, &format!("head{level}"), t, 1, 3, false));
        }
        Ok(Self {
            config,
            params: store,
            rgb_encoder,
            depth_encoder,
            transitions,
            initial_head,
            cross_modal,
            cross_level,
            decoders,
            heads,
        })
    }

    pub fn config(&self) -> &SodConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn fingerprint(&self) -> String {
        self.config.backbone.fingerprint()
    }

    pub fn census(&self) -> Census {
        let cda = |f: &[Fusion]| f.iter().filter(|x| x.as_cda().is_some()).count();
        Census {
            rgb_encoder_blocks: self.rgb_encoder.block_count(),
            depth_encoder_blocks: self.depth_encoder.block_count(),
            transitions: self.transitions.len(),
            cross_modal_sites: self.cross_modal.len(),
            cross_level_sites: self.cross_level.len(),
            cda_modules: cda(&self.cross_modal) + cda(&self.cross_level),
            decoders: self.decoders.len(),
            heads: self.heads.len() + 1,
        }
    }

    /// Excludes both encoders from optimisation. Returns the number of frozen tensors.
    pub fn freeze_encoders(&mut self) -> usize {
        let ids: Vec<_> = self.params.iter().filter(|(_, e)| is_encoder_param(&e.name)).map(|(id, _)| id).collect();
        for &id in &ids {
            self.params.set_trainable(id, false);
        }
        ids.len()
    }

    pub fn encode<'s>(&self, s: &'s Session<'_, T>, stream: Stream, image: Var<'s, T>) -> Result<Vec<Var<'s, T>>> {
        match stream {
            Stream::Rgb => self.rgb_encoder.forward(s, image),
            Stream::Depth => self.depth_encoder.forward(s, image),
        }
    }

    /// Shared top-down pipeline; side-outs are logits.
    pub fn forward<'s>(&self, s: &'s Session<'_, T>, rgb: Var<'s, T>, depth: Var<'s, T>) -> Result<SodForward<'s, T>> {
        let (rs, ds) = (rgb.shape(), depth.shape());
        if (rs[0], rs[2], rs[3]) != (ds[0], ds[2], ds[3]) {
            return Err(Error::shape("rgb/depth inputs", rs, ds));
        }
        let fr = self.encode(s, Stream::Rgb, rgb)?;
        let fd = self.encode(s, Stream::Depth, depth)?;
        let tr: Vec<_> = self.transitions.iter().zip(&fr).map(|(t, f)| t.rgb.forward(s, *f)).collect();
        let td: Vec<_> = self.transitions.iter().zip(&fd).map(|(t, f)| t.depth.forward(s, *f)).collect();

        let top = LEVELS - 1;
        let mut out = SodForward { side_outs: Vec::with_capacity(LEVELS), cda_calls: 0, sites: Vec::new() };
        let record = |name: String, trace: Option<CdaOutput<'s, T>>, out: &mut SodForward<'s, T>| {
            if let Some(t) = trace {
                out.cda_calls += 1;
                out.sites.push((name, t));
            }
        };

        let s_top = self.initial_head.forward(s, s.tape().concat_channels(&[tr[top], td[top]]));
        let (mut decoded, trace) = self.cross_modal[top].forward(s, tr[top], td[top], s_top.sigmoid())?;
        record(format!("cm{}", top + 1), trace, &mut out);
        out.side_outs.push(s_top);
        let mut previous = s_top;

        for l in (0..top).rev() {
            let [_, _, h, w] = tr[l].shape();
            let gate = previous.sigmoid().resize(h, w);
            let (cm, trace) = self.cross_modal[l].forward(s, tr[l], td[l], gate)?;
            record(format!("cm{}", l + 1), trace, &mut out);
            let (fused, trace) = self.cross_level[l].forward(s, cm, decoded.resize(h, w), gate)?;
            record(format!("cl{}", l + 1), trace, &mut out);
            let [c1, c2] = &self.decoders[l];
            decoded = c2.forward(s, c1.forward(s, fused));
            previous = self.heads[l].forward(s, decoded);
            out.side_outs.push(previous);
        }
        Ok(out)
    }

    /// Saliency side-out logits plus the full-resolution probability map.
    pub fn forward_sod<'s>(
        &self,
        s: &'s Session<'_, T>,
        rgb: Var<'s, T>,
        depth: Var<'s, T>,
    ) -> Result<(SodForward<'s, T>, Var<'s, T>)> {
        let [_, _, h, w] = rgb.shape();
        let f = self.forward(s, rgb, depth)?;
        let finest = *f.side_outs.last().expect("five side-outs");
        let map = finest.resize(h, w).sigmoid();
        Ok((f, map))
    }

    /// Same network with every side-out squashed into `[0, 1]`.
    pub fn forward_contour<'s>(
        &self,
        s: &'s Session<'_, T>,
        rgb: Var<'s, T>,
        depth: Var<'s, T>,
    ) -> Result<Vec<Var<'s, T>>> {
        Ok(self.forward(s, rgb, depth)?.side_outs.into_iter().map(Var::sigmoid).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sslsod_tensor::Tensor;

    #[test]
    fn census_of_full_model() {
        let m = SodModel::<f32>::new(SodConfig::tiny(), 0).unwrap();
        let c = m.census();
        assert_eq!((c.rgb_encoder_blocks, c.depth_encoder_blocks, c.transitions), (5, 5, 5));
        assert_eq!((c.cda_modules, c.decoders, c.heads), (9, 4, 5));
    }

    #[test]
    fn add_fusion_has_no_cda_calls() {
        let cfg = SodConfig { cross_modal: FusionMode::Add, cross_level: FusionMode::Add, ..SodConfig::tiny() };
        let m = SodModel::<f32>::new(cfg, 0).unwrap();
        let s = Session::new(m.params());
        let f = m.forward(&s, s.input(Tensor::zeros([1, 3, 32, 32])), s.input(Tensor::zeros([1, 1, 32, 32]))).unwrap();
        assert_eq!(f.cda_calls, 0);
        assert_eq!(f.side_outs.len(), 5);
        assert_eq!(m.census().cda_modules, 0);
    }

    #[test]
    fn indivisible_input_is_rejected() {
        let m = SodModel::<f32>::new(SodConfig::tiny(), 0).unwrap();
        let s = Session::new(m.params());
        let r = m.forward(&s, s.input(Tensor::zeros([1, 3, 24, 24])), s.input(Tensor::zeros([1, 1, 24, 24])));
        assert!(r.is_err());
    }

    #[test]
    fn freezing_counts_encoder_tensors() {
        let mut m = SodModel::<f32>::new(SodConfig::tiny(), 0).unwrap();
        let total = m.params().numel();
        let encoder = m.params().count_where(|e| is_encoder_param(&e.name));
        assert_eq!(m.freeze_encoders(), 2 * 13 * 2);
        assert_eq!(m.params().count_where(|e| e.trainable), total - encoder);
    }
}
