use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POLY_POWER: f64 = 0.9;
pub const WARMUP_FRACTION: f64 = 0.1;

fn check_iter(iter: usize, total: usize) -> Result<()> {
    if iter > total {
        return Err(Error::invalid(format!("iteration {iter} is past the end of a {total}-iteration schedule")));
    }
    Ok(())
}

/// `base * (1 - iter / max_iter) ^ power`.
pub fn poly_lr(base: f64, iter: usize, max_iter: usize, power: f64) -> Result<f64> {
    check_iter(iter, max_iter)?;
    if !(base > 0.0) {
        return Err(Error::invalid(format!("base learning rate must be positive, got {base}")));
    }
    if max_iter == 0 {
        return Ok(0.0);
    }
    Ok(base * (1.0 - iter as f64 / max_iter as f64).powf(power))
}

/// Linear ramp from 0 to `max_rate` over the first `warmup_frac * total`
/// iterations, then linear decay back to 0 at `total`.
pub fn warmup_linear_lr(max_rate: f64, iter: usize, total: usize, warmup_frac: f64) -> Result<f64> {
    if !(warmup_frac > 0.0 && warmup_frac < 1.0) {
        return Err(Error::invalid(format!("warm-up fraction must lie in (0, 1), got {warmup_frac}")));
    }
    check_iter(iter, total)?;
    if total == 0 {
        return Ok(0.0);
    }
    let boundary = warmup_frac * total as f64;
    let t = iter as f64;
    Ok(if t <= boundary {
        max_rate * t / boundary
    } else {
        max_rate * (1.0 - (t - boundary) / (total as f64 - boundary))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Poly,
    WarmupLinear,
}

/// A learning-rate curve over a fixed number of iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Base rate for poly, peak rate for warm-up/linear.
    pub rate: f64,
    pub power: f64,
    pub warmup_frac: f64,
    pub total: usize,
}

impl Schedule {
    pub fn poly(rate: f64, total: usize) -> Self {
        Self { kind: ScheduleKind::Poly, rate, power: POLY_POWER, warmup_frac: WARMUP_FRACTION, total }
    }

    pub fn warmup_linear(rate: f64, total: usize) -> Self {
        Self { kind: ScheduleKind::WarmupLinear, rate, power: POLY_POWER, warmup_frac: WARMUP_FRACTION, total }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.rate)));
        }
        match self.kind {
            ScheduleKind::Poly if !(self.power > 0.0) => {
                Err(Error::Config(format!("poly power must be positive, got {}", self.power)))
            }
            ScheduleKind::WarmupLinear if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) => {
                Err(Error::Config(format!("warm-up fraction must lie in (0, 1), got {}", self.warmup_frac)))
            }
            _ => Ok(()),
        }
    }

    pub fn rate_at(&self, iter: usize) -> Result<f64> {
        match self.kind {
            ScheduleKind::Poly => poly_lr(self.rate, iter, self.total, self.power),
            ScheduleKind::WarmupLinear => warmup_linear_lr(self.rate, iter, self.total, self.warmup_frac),
        }
    }
}
