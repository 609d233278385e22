use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Branches, FusionMode};
use crate::network::{BackboneConfig, SodConfig};

/// Replacement used wherever both CDA branches of a fusion site are disabled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionFallback {
    #[default]
    Add,
    /// Sum followed by convolutions holding as many parameters as a CDA.
    AddConv,
}

/// Where the downstream network's initial weights come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    Random,
    /// Encoders from the two stage-1 autoencoders.
    Stage1,
    /// Everything outside the encoders from the stage-2 contour network.
    Stage2,
    /// Encoders from stage 1, everything else from stage 2.
    Both,
}

/// Switches that reproduce the rows of the two ablation tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub use_cm_jc: bool,
    pub use_cm_jd: bool,
    pub use_cl_jc: bool,
    pub use_cl_jd: bool,
    pub init_p1: bool,
    pub init_p2: bool,
    pub fusion_fallback: FusionFallback,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self::full()
    }
}

fn site_mode(jc: bool, jd: bool, fallback: FusionFallback) -> FusionMode {
    let branches = Branches { consistency: jc, difference: jd };
    if branches.any() {
        FusionMode::Cda(branches)
    } else {
        match fallback {
            FusionFallback::Add => FusionMode::Add,
            FusionFallback::AddConv => FusionMode::AddConv,
        }
    }
}

impl AblationConfig {
    /// Every CDA branch on, both pretext initialisations on.
    pub fn full() -> Self {
        Self {
            use_cm_jc: true,
            use_cm_jd: true,
            use_cl_jc: true,
            use_cl_jd: true,
            init_p1: true,
            init_p2: true,
            fusion_fallback: FusionFallback::Add,
        }
    }

    /// All fusion sites additive, random initialisation.
    pub fn baseline() -> Self {
        Self {
            use_cm_jc: false,
            use_cm_jd: false,
            use_cl_jc: false,
            use_cl_jd: false,
            init_p1: false,
            init_p2: false,
            fusion_fallback: FusionFallback::Add,
        }
    }

    /// Rows 1-9 of the pretext ablation: `(P1, P2, CM, CL)` combinations.
    pub fn pretext_row(row: usize) -> Result<Self> {
        let (p1, p2, cm, cl) = match row {
            1 => (false, false, false, false),
            2 => (true, false, false, false),
            3 => (true, true, false, false),
            4 => (true, false, true, false),
            5 => (true, true, true, false),
            6 => (true, false, false, true),
            7 => (true, true, false, true),
            8 => (false, false, true, true),
            9 => (true, true, true, true),
            _ => return Err(Error::invalid(format!("pretext ablation has rows 1-9, got {row}"))),
        };
        Ok(Self {
            use_cm_jc: cm,
            use_cm_jd: cm,
            use_cl_jc: cl,
            use_cl_jd: cl,
            init_p1: p1,
            init_p2: p2,
            fusion_fallback: FusionFallback::Add,
        })
    }

    /// Rows 1-7 of the fusion ablation. Row 7 swaps every CDA for a
    /// parameter-matched add/conv block. Initialisation is random throughout.
    pub fn fusion_row(row: usize) -> Result<Self> {
        let (cm_jc, cm_jd, cl_jc, cl_jd) = match row {
            1 | 7 => (false, false, false, false),
            2 => (true, false, false, false),
            3 => (true, true, false, false),
            4 => (false, false, true, false),
            5 => (false, false, true, true),
            6 => (true, true, true, true),
            _ => return Err(Error::invalid(format!("fusion ablation has rows 1-7, got {row}"))),
        };
        Ok(Self {
            use_cm_jc: cm_jc,
            use_cm_jd: cm_jd,
            use_cl_jc: cl_jc,
            use_cl_jd: cl_jd,
            init_p1: false,
            init_p2: false,
            fusion_fallback: if row == 7 { FusionFallback::AddConv } else { FusionFallback::Add },
        })
    }

    pub fn init_source(&self) -> InitSource {
        match (self.init_p1, self.init_p2) {
            (false, false) => InitSource::Random,
            (true, false) => InitSource::Stage1,
            (false, true) => InitSource::Stage2,
            (true, true) => InitSource::Both,
        }
    }

    pub fn cross_modal(&self) -> FusionMode {
        site_mode(self.use_cm_jc, self.use_cm_jd, self.fusion_fallback)
    }

    pub fn cross_level(&self) -> FusionMode {
        site_mode(self.use_cl_jc, self.use_cl_jd, self.fusion_fallback)
    }

    /// CDA modules the resulting network holds (5 cross-modal + 4 cross-level at most).
    pub fn cda_count(&self) -> usize {
        let cm = matches!(self.cross_modal(), FusionMode::Cda(_)) as usize * 5;
        let cl = matches!(self.cross_level(), FusionMode::Cda(_)) as usize * 4;
        cm + cl
    }

    pub fn sod_config(&self, backbone: BackboneConfig) -> SodConfig {
        SodConfig { backbone, cross_modal: self.cross_modal(), cross_level: self.cross_level() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pretext_rows_are_distinct() {
        let rows: Vec<_> = (1..=9).map(|r| AblationConfig::pretext_row(r).unwrap()).collect();
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(rows[0], AblationConfig::baseline());
        assert_eq!(rows[8], AblationConfig::full());
        assert!(AblationConfig::pretext_row(10).is_err());
    }

    #[test]
    fn cda_counts() {
        assert_eq!(AblationConfig::baseline().cda_count(), 0);
        assert_eq!(AblationConfig::full().cda_count(), 9);
        assert_eq!(AblationConfig::pretext_row(4).unwrap().cda_count(), 5);
        assert_eq!(AblationConfig::pretext_row(6).unwrap().cda_count(), 4);
        assert_eq!(AblationConfig::fusion_row(7).unwrap().cross_modal(), FusionMode::AddConv);
    }

    #[test]
    fn partial_branches() {
        let a = AblationConfig::fusion_row(2).unwrap();
        assert_eq!(a.cross_modal(), FusionMode::Cda(Branches { consistency: true, difference: false }));
        assert_eq!(a.cross_level(), FusionMode::Add);
    }
}
