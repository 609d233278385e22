use serde::{Deserialize, Serialize};
use sslsod_tensor::{ParamStore, Real};

use super::sod::{is_encoder_param, is_head_param};
use crate::error::{Error, Result};

/// Which target parameters may be taken from a source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferPolicy {
    /// Only `rgb_encoder.*` and `depth_encoder.*`.
    EncodersOnly,
    /// Everything outside the two encoders.
    DecoderOnly,
    /// Everything outside the encoders and the side-out heads.
    DecoderWithoutHeads,
    /// Every parameter whose name and shape match.
    AllMatching,
}

impl TransferPolicy {
    pub fn admits(self, name: &str) -> bool {
        match self {
            TransferPolicy::EncodersOnly => is_encoder_param(name),
            TransferPolicy::DecoderOnly => !is_encoder_param(name),
            TransferPolicy::DecoderWithoutHeads => !is_encoder_param(name) && !is_head_param(name),
            TransferPolicy::AllMatching => true,
        }
    }
}

/// Fate of every target parameter after a transfer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferReport {
    pub loaded: Vec<String>,
    /// Parameters that kept their fresh initialisation.
    pub reinitialized: Vec<String>,
    /// Subset of `reinitialized` whose name matched but whose shape did not.
    pub shape_mismatches: Vec<String>,
}

/// Copies admitted parameters from the first source that provides them.
///
/// Fails when nothing at all could be loaded, which almost always means the
/// source and target were built from different configurations.
pub fn transfer_weights<T: Real>(
    sources: &[&ParamStore<T>],
    target: &mut ParamStore<T>,
    policy: TransferPolicy,
) -> Result<TransferReport> {
    let mut report = TransferReport::default();
    let ids: Vec<_> = target.ids().collect();
    for id in ids {
        let name = target.name(id).to_string();
        let shape = target.value(id).shape();
        let mut loaded = false;
        let mut mismatched = false;
        if policy.admits(&name) {
            for src in sources {
                if let Some(v) = src.get(&name) {
                    if v.shape() == shape {
                        *target.value_mut(id) = v.clone();
                        loaded = true;
                        break;
                    }
                    mismatched = true;
                }
            }
        }
        if loaded {
            report.loaded.push(name);
        } else {
            if mismatched {
                report.shape_mismatches.push(name.clone());
            }
            report.reinitialized.push(name);
        }
    }
    if report.loaded.is_empty() {
        return Err(Error::NoMatchingParameters(format!(
            "{:?} policy, {} shape mismatches",
            policy,
            report.shape_mismatches.len()
        )));
    }
    Ok(report)
}
