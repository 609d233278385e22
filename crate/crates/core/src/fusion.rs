//! Consistency-difference aggregation (CDA) of two feature maps under a saliency gate.
//!
//! Given features `a`, `b` of shape `[N, C, H, W]` and a gate `s` of shape
//! `[N, 1, H, W]` in `[0, 1]`:
//!
//! ```text
//! jc    = conv_jc(a * b * s)
//! jc_ab = conv_mix(conv_a(jc + a) + conv_b(jc + b))
//! jd    = conv_jd(|a - b| * s)
//! out   = conv_out(jc_ab + jd)
//! ```
//!
//! Every `conv_*` is a 3x3 channel-preserving convolution followed by ReLU.
//! The gate is broadcast over channels.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sslsod_tensor::{ParamStore, Real, Session, Var};

use crate::error::{Error, Result};
use crate::layers::ConvBlock;

const KERNEL: usize = 3;

/// Which of the two CDA branches are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branches {
    pub consistency: bool,
    pub difference: bool,
}

impl Branches {
    pub const ALL: Self = Self { consistency: true, difference: true };
    pub const NONE: Self = Self { consistency: false, difference: false };

    pub fn any(&self) -> bool {
        self.consistency || self.difference
    }
}

struct ConsistencyBlocks {
    product: ConvBlock,
    with_a: ConvBlock,
    with_b: ConvBlock,
    mix: ConvBlock,
}

/// One CDA instance with its own parameters.
pub struct Cda {
    name: String,
    channels: usize,
    consistency: Option<ConsistencyBlocks>,
    difference: Option<ConvBlock>,
    out: ConvBlock,
}

/// A pre-convolution product together with its convolved result.
#[derive(Clone, Copy)]
pub struct Gated<'s, T: Real> {
    pub pre: Var<'s, T>,
    pub out: Var<'s, T>,
}

/// Every intermediate of one CDA evaluation.
///
/// With the consistency branch off, `enhanced` is the plain sum `a + b` and
/// `consistency` is `None`; with the difference branch off, `difference` is
/// `None` and contributes nothing.
#[derive(Clone, Copy)]
pub struct CdaOutput<'s, T: Real> {
    pub consistency: Option<Gated<'s, T>>,
    pub enhanced: Var<'s, T>,
    pub difference: Option<Gated<'s, T>>,
    pub out: Var<'s, T>,
}

fn check_inputs<T: Real>(a: &Var<'_, T>, b: &Var<'_, T>, gate: Option<&Var<'_, T>>) -> Result<()> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb {
        return Err(Error::shape("fusion inputs", sa, sb));
    }
    if let Some(g) = gate {
        let sg = g.shape();
        if sg != [sa[0], 1, sa[2], sa[3]] {
            return Err(Error::shape("fusion gate", sg, [sa[0], 1, sa[2], sa[3]]));
        }
    }
    Ok(())
}

impl Cda {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        channels: usize,
        branches: Branches,
    ) -> Result<Self> {
        if !branches.any() {
            return Err(Error::invalid(format!("{name}: a CDA needs at least one active branch")));
        }
        let mut block =
            |suffix: &str| ConvBlock::new(store, rng, &format!("{name}.{suffix}"), channels, channels, KERNEL, true);
        let consistency = branches.consistency.then(|| ConsistencyBlocks {
            product: block("jc"),
            with_a: block("jc_a"),
            with_b: block("jc_b"),
            mix: block("jc_mix"),
        });
        let difference = branches.difference.then(|| block("jd"));
        let out = block("out");
        Ok(Self { name: name.to_string(), channels, consistency, difference, out })
    }

    /// All branches active and every convolution the exact identity map.
    pub fn identity<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        let mut block = |suffix: &str| ConvBlock::identity(store, &format!("{name}.{suffix}"), channels, KERNEL);
        let consistency = Some(ConsistencyBlocks {
            product: block("jc"),
            with_a: block("jc_a"),
            with_b: block("jc_b"),
            mix: block("jc_mix"),
        });
        let difference = Some(block("jd"));
        let out = block("out");
        Self { name: name.to_string(), channels, consistency, difference, out }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn branches(&self) -> Branches {
        Branches { consistency: self.consistency.is_some(), difference: self.difference.is_some() }
    }

    pub fn blocks(&self) -> Vec<&ConvBlock> {
        let mut v = Vec::new();
        if let Some(c) = &self.consistency {
            v.extend([&c.product, &c.with_a, &c.with_b, &c.mix]);
        }
        v.extend(self.difference.as_ref());
        v.push(&self.out);
        v
    }

    fn consistency_blocks(&self) -> Result<&ConsistencyBlocks> {
        self.consistency
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{}: consistency branch is disabled", self.name)))
    }

    /// `conv_jc(a * b * s)`.
    pub fn joint_consistency<'s, T: Real>(
        &self,
        s: &'s Session<'_, T>,
        a: Var<'s, T>,
        b: Var<'s, T>,
        gate: Var<'s, T>,
    ) -> Result<Gated<'s, T>> {
        check_inputs(&a, &b, Some(&gate))?;
        let blocks = self.consistency_blocks()?;
        let pre = a.mul(b).mul_plane(gate);
        Ok(Gated { pre, out: blocks.product.forward(s, pre) })
    }

    /// `conv_mix(conv_a(jc + a) + conv_b(jc + b))`.
    pub fn consistency_enhance<'s, T: Real>(
        &self,
        s: &'s Session<'_, T>,
        jc: Var<'s, T>,
        a: Var<'s, T>,
        b: Var<'s, T>,
    ) -> Result<Var<'s, T>> {
        check_inputs(&a, &b, None)?;
        check_inputs(&jc, &a, None)?;
        let blocks = self.consistency_blocks()?;
        let left = blocks.with_a.forward(s, jc.add(a));
        let right = blocks.with_b.forward(s, jc.add(b));
        Ok(blocks.mix.forward(s, left.add(right)))
    }

    /// `conv_jd(|a - b| * s)`.
    pub fn joint_difference<'s, T: Real>(
        &self,
        s: &'s Session<'_, T>,
        a: Var<'s, T>,
        b: Var<'s, T>,
        gate: Var<'s, T>,
    ) -> Result<Gated<'s, T>> {
        check_inputs(&a, &b, Some(&gate))?;
        let block = self
            .difference
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{}: difference branch is disabled", self.name)))?;
        let pre = a.sub(b).abs().mul_plane(gate);
        Ok(Gated { pre, out: block.forward(s, pre) })
    }

    pub fn forward<'s, T: Real>(
        &self,
        s: &'s Session<'_, T>,
        a: Var<'s, T>,
        b: Var<'s, T>,
        gate: Var<'s, T>,
    ) -> Result<CdaOutput<'s, T>> {
        check_inputs(&a, &b, Some(&gate))?;
        let (consistency, enhanced) = if self.consistency.is_some() {
            let jc = self.joint_consistency(s, a, b, gate)?;
            (Some(jc), self.consistency_enhance(s, jc.out, a, b)?)
        } else {
            (None, a.add(b))
        };
        let difference = match self.difference {
            Some(_) => Some(self.joint_difference(s, a, b, gate)?),
            None => None,
        };
        let merged = match difference {
            Some(d) => enhanced.add(d.out),
            None => enhanced,
        };
        Ok(CdaOutput { consistency, enhanced, difference, out: self.out.forward(s, merged) })
    }
}

/// How a fusion site combines its two inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Cda(Branches),
    /// Element-wise sum.
    Add,
    /// Element-wise sum followed by six 3x3 conv+ReLU blocks, matching the
    /// parameter count of a full CDA.
    AddConv,
}

/// One fusion site of the network.
pub enum Fusion {
    Cda(Cda),
    Add,
    AddConv(Vec<ConvBlock>),
}

impl Fusion {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        channels: usize,
        mode: FusionMode,
    ) -> Result<Self> {
        Ok(match mode {
            FusionMode::Cda(b) if b.any() => Fusion::Cda(Cda::new(store, rng, name, channels, b)?),
            FusionMode::Cda(_) | FusionMode::Add => Fusion::Add,
            FusionMode::AddConv => Fusion::AddConv(
                (0..6)
                    .map(|i| {
                        ConvBlock::new(store, rng, &format!("{name}.add_conv{i}"), channels, channels, KERNEL, true)
                    })
                    .collect(),
            ),
        })
    }

    pub fn as_cda(&self) -> Option<&Cda> {
        match self {
            Fusion::Cda(c) => Some(c),
            _ => None,
        }
    }

    /// Fuses `a` and `b`; the trace is present only for CDA sites.
    pub fn forward<'s, T: Real>(
        &self,
        s: &'s Session<'_, T>,
        a: Var<'s, T>,
        b: Var<'s, T>,
        gate: Var<'s, T>,
    ) -> Result<(Var<'s, T>, Option<CdaOutput<'s, T>>)> {
        match self {
            Fusion::Cda(cda) => {
                let o = cda.forward(s, a, b, gate)?;
                Ok((o.out, Some(o)))
            }
            Fusion::Add => {
                check_inputs(&a, &b, None)?;
                Ok((a.add(b), None))
            }
            Fusion::AddConv(blocks) => {
                check_inputs(&a, &b, None)?;
                Ok((blocks.iter().fold(a.add(b), |x, blk| blk.forward(s, x)), None))
            }
        }
    }
}
