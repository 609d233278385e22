//! Slow, direct-from-definition reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

pub mod fd;
pub mod oracle;

use rand::Rng;
use sslsod::datakit::Plane;

pub fn random_plane(rng: &mut impl Rng, h: usize, w: usize) -> Plane {
    Plane::from_fn(h, w, |_, _| rng.random())
}

/// Binary mask with roughly `p` foreground, forced to contain both classes.
pub fn random_mask(rng: &mut impl Rng, h: usize, w: usize, p: f64) -> Plane {
    let mut m = Plane::from_fn(h, w, |_, _| (rng.random::<f64>() < p) as u8 as f64);
    let n = h * w;
    let fg = m.data().iter().filter(|&&v| v == 1.0).count();
    if fg == 0 {
        m.data_mut()[rng.random_range(0..n)] = 1.0;
    } else if fg == n {
        m.data_mut()[rng.random_range(0..n)] = 0.0;
    }
    m
}
