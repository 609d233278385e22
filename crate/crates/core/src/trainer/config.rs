//! Flat key/value run configuration.
//!
//! Files are TOML with one key per line. Every key is optional and falls back
//! to the defaults below. Command-line overrides use the same keys as
//! `key=value` strings, where the value is parsed as a TOML value (bare words
//! are taken as strings). The resolved configuration is echoed next to run
//! outputs so a run can be repeated from the echo alone.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `preset` | `"tiny"` | backbone preset, `tiny` or `vgg16` |
//! | `widths` | preset | five encoder block widths |
//! | `transition_width` | preset | width of transitions, fusion and decoder |
//! | `fpn_width` | preset | width of the stage-1 autoencoder pyramid |
//! | `depth_channels` | 1 | 1, or 3 to replicate depth into three channels |
//! | `image_size` | 64 | training resolution, a multiple of 16 |
//! | `seed` | 0 | weight init, shuffling and augmentation seed |
//! | `batch_size` | 4 | samples per step |
//! | `epochs` | 50 | passes over the data |
//! | `iterations` | unset | explicit step budget, overrides `epochs` |
//! | `momentum` / `weight_decay` | 0.9 / 5e-4 | SGD settings |
//! | `pretext_lr` / `pretext_schedule` | 0.001 / `poly` | both pretext stages |
//! | `backbone_lr` / `head_lr` | 0.005 / 0.05 | downstream peak rates |
//! | `downstream_schedule` | `warmup_linear` | downstream curve |
//! | `poly_power` / `warmup_frac` | 0.9 / 0.1 | schedule shapes |
//! | `ssim_weight` | 1.0 | SSIM term of the reconstruction loss |
//! | `contour_window` | 5 | structuring element of the contour targets |
//! | `augment` | true | random flips, rotations and colour jitter |
//! | `hflip_prob` / `rotation_deg` / `color_jitter` | 0.5 / 10 / 0.2 | augmentation ranges |
//! | `depth_norm` / `invert_depth` | `bit_depth` / false | depth loading |
//! | `use_cm_jc`, `use_cm_jd`, `use_cl_jc`, `use_cl_jd` | true | CDA branches |
//! | `fusion_fallback` | `add` | `add` or `add_conv` where both branches are off |
//! | `init_p1` / `init_p2` | true | downstream initialisation from the pretext stages |
//! | `reuse_stage2_heads` | true | keep the contour heads downstream instead of fresh ones |

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ablation::{AblationConfig, FusionFallback};
use super::schedule::{Schedule, ScheduleKind};
use crate::datakit::{AugmentSpec, DepthNorm, LoadOptions};
use crate::error::{Error, Result};
use crate::network::{BackboneConfig, LEVELS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<[usize; LEVELS]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpn_width: Option<usize>,
    pub depth_channels: usize,
    pub image_size: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub pretext_lr: f64,
    pub pretext_schedule: ScheduleKind,
    pub backbone_lr: f64,
    pub head_lr: f64,
    pub downstream_schedule: ScheduleKind,
    pub poly_power: f64,
    pub warmup_frac: f64,
    pub ssim_weight: f64,
    pub contour_window: usize,
    pub augment: bool,
    pub hflip_prob: f64,
    pub rotation_deg: f64,
    pub color_jitter: f64,
    pub depth_norm: DepthNorm,
    pub invert_depth: bool,
    pub use_cm_jc: bool,
    pub use_cm_jd: bool,
    pub use_cl_jc: bool,
    pub use_cl_jd: bool,
    pub fusion_fallback: FusionFallback,
    pub init_p1: bool,
    pub init_p2: bool,
    pub reuse_stage2_heads: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            preset: "tiny".into(),
            widths: None,
            transition_width: None,
            fpn_width: None,
            depth_channels: 1,
            image_size: 64,
            seed: 0,
            batch_size: 4,
            epochs: 50,
            iterations: None,
            momentum: 0.9,
            weight_decay: 5e-4,
            pretext_lr: 0.001,
            pretext_schedule: ScheduleKind::Poly,
            backbone_lr: 0.005,
            head_lr: 0.05,
            downstream_schedule: ScheduleKind::WarmupLinear,
            poly_power: 0.9,
            warmup_frac: 0.1,
            ssim_weight: 1.0,
            contour_window: 5,
            augment: true,
            hflip_prob: 0.5,
            rotation_deg: 10.0,
            color_jitter: 0.2,
            depth_norm: DepthNorm::BitDepth,
            invert_depth: false,
            use_cm_jc: true,
            use_cm_jd: true,
            use_cl_jc: true,
            use_cl_jd: true,
            fusion_fallback: FusionFallback::Add,
            init_p1: true,
            init_p2: true,
            reuse_stage2_heads: true,
        }
    }
}

/// Parses one `key=value` override into a single-entry TOML table.
fn override_table(raw: &str) -> Result<toml::Table> {
    let (key, value) =
        raw.split_once('=').ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() {
        return Err(Error::Config(format!("override `{raw}` has an empty key")));
    }
    let parsed: std::result::Result<toml::Table, _> = format!("v = {value}").parse();
    let value = match parsed {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let mut table = toml::Table::new();
    table.insert(key.to_string(), value);
    Ok(table)
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides in order, and validates.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for raw in overrides {
            table.extend(override_table(raw)?);
        }
        let config: Self =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let backbone = self.backbone()?;
        backbone.validate()?;
        if self.image_size == 0 || self.image_size % 16 != 0 {
            return Err(Error::Config(format!(
                "image_size must be a positive multiple of 16, got {}",
                self.image_size
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if !(self.ssim_weight >= 0.0) {
            return Err(Error::Config(format!("ssim_weight must be non-negative, got {}", self.ssim_weight)));
        }
        for s in [self.pretext_schedule_for(1), self.backbone_schedule(1), self.head_schedule(1)] {
            s.validate()?;
        }
        if !(0.0..1.0).contains(&self.color_jitter) {
            return Err(Error::Config(format!("color_jitter must lie in [0, 1), got {}", self.color_jitter)));
        }
        self.augment_spec().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.contour_window % 2 == 0 {
            return Err(Error::Config(format!("contour_window must be odd, got {}", self.contour_window)));
        }
        Ok(())
    }

    pub fn backbone(&self) -> Result<BackboneConfig> {
        let mut b = BackboneConfig::preset(&self.preset)?;
        if let Some(w) = self.widths {
            b.widths = w;
        }
        if let Some(t) = self.transition_width {
            b.transition_width = t;
        }
        if let Some(t) = self.fpn_width {
            b.fpn_width = t;
        }
        b.depth_channels = self.depth_channels;
        Ok(b)
    }

    pub fn ablation(&self) -> AblationConfig {
        AblationConfig {
            use_cm_jc: self.use_cm_jc,
            use_cm_jd: self.use_cm_jd,
            use_cl_jc: self.use_cl_jc,
            use_cl_jd: self.use_cl_jd,
            init_p1: self.init_p1,
            init_p2: self.init_p2,
            fusion_fallback: self.fusion_fallback,
        }
    }

    pub fn set_ablation(&mut self, a: AblationConfig) {
        self.use_cm_jc = a.use_cm_jc;
        self.use_cm_jd = a.use_cm_jd;
        self.use_cl_jc = a.use_cl_jc;
        self.use_cl_jd = a.use_cl_jd;
        self.init_p1 = a.init_p1;
        self.init_p2 = a.init_p2;
        self.fusion_fallback = a.fusion_fallback;
    }

    pub fn load_options(&self, require_gt: bool) -> LoadOptions {
        LoadOptions { depth_norm: self.depth_norm, invert_depth: self.invert_depth, require_gt }
    }

    pub fn augment_spec(&self) -> AugmentSpec {
        if !self.augment {
            return AugmentSpec { seed: self.seed, ..AugmentSpec::identity() };
        }
        let j = (1.0 - self.color_jitter, 1.0 + self.color_jitter);
        AugmentSpec {
            hflip_prob: self.hflip_prob,
            rotation_deg: self.rotation_deg,
            brightness: j,
            saturation: j,
            contrast: j,
            seed: self.seed,
        }
    }

    /// Step budget for a dataset of `samples` items.
    pub fn total_iterations(&self, samples: usize) -> usize {
        self.iterations.unwrap_or_else(|| self.epochs * samples.div_ceil(self.batch_size))
    }

    fn shaped(&self, kind: ScheduleKind, rate: f64, total: usize) -> Schedule {
        Schedule { kind, rate, power: self.poly_power, warmup_frac: self.warmup_frac, total }
    }

    pub fn pretext_schedule_for(&self, total: usize) -> Schedule {
        self.shaped(self.pretext_schedule, self.pretext_lr, total)
    }

    pub fn backbone_schedule(&self, total: usize) -> Schedule {
        self.shaped(self.downstream_schedule, self.backbone_lr, total)
    }

    pub fn head_schedule(&self, total: usize) -> Schedule {
        self.shaped(self.downstream_schedule, self.head_lr, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(TrainConfig::from_toml("").unwrap(), TrainConfig::default());
    }

    #[test]
    fn overrides_apply_in_order() {
        let c = TrainConfig::from_toml_with(
            "seed = 3\npreset = \"tiny\"",
            &["seed=9".into(), "fusion_fallback=add_conv".into(), "widths=[8,8,8,8,8]".into()],
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.fusion_fallback, FusionFallback::AddConv);
        assert_eq!(c.backbone().unwrap().widths, [8; 5]);
    }

    #[test]
    fn unknown_and_invalid_keys_fail() {
        assert!(matches!(TrainConfig::from_toml("sede = 1"), Err(Error::Config(_))));
        assert!(TrainConfig::from_toml("image_size = 40").is_err());
        assert!(TrainConfig::from_toml("momentum = 1.0").is_err());
        assert!(TrainConfig::from_toml_with("", &["novalue".into()]).is_err());
    }

    #[test]
    fn echo_roundtrips() {
        let c = TrainConfig { iterations: Some(12), transition_width: Some(8), ..TrainConfig::default() };
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
