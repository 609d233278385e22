//! Central finite-difference checks for every differentiable op.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sslsod_tensor::{Shape, Tape, Tensor, Var};

fn random(shape: Shape, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Compares the tape gradient of `f` w.r.t. every input against central
/// differences with step `h`.
fn check(inputs: &[Tensor<f64>], f: impl for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Var<'t, f64>) {
    let h = 1e-6;
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let out = f(&tape, &vars);
    let grads = tape.backward(out);
    let eval = |perturbed: &[Tensor<f64>]| {
        let tape = Tape::new();
        let vars: Vec<_> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        f(&tape, &vars).value().item()
    };
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k]);
        for i in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic[i];
            let scale = a.abs().max(numeric.abs());
            let err = (a - numeric).abs();
            assert!(err < 1e-8 || err / scale < 1e-4, "input {k} element {i}: analytic {a} vs numeric {numeric}");
        }
    }
}

/// Random projection so that every output element matters with a distinct weight.
fn project<'t>(tape: &'t Tape<f64>, v: Var<'t, f64>, seed: u64) -> Var<'t, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random(v.shape(), &mut rng, -1.0, 1.0);
    (v * tape.constant(w)).sum()
}

#[test]
fn conv3x3_and_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = [
        random([2, 3, 5, 4], &mut rng, -1.0, 1.0),
        random([4, 3, 3, 3], &mut rng, -0.5, 0.5),
        random([1, 4, 1, 1], &mut rng, -0.5, 0.5),
    ];
    check(&inputs, |t, v| project(t, v[0].conv2d(v[1], Some(v[2]), 1), 7));
}

#[test]
fn pointwise_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inputs = [random([1, 3, 4, 4], &mut rng, -1.0, 1.0), random([2, 3, 1, 1], &mut rng, -0.5, 0.5)];
    check(&inputs, |t, v| project(t, v[0].conv2d(v[1], None, 0), 8));
}

#[test]
fn pooling_and_resizing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs = [random([1, 2, 4, 6], &mut rng, -1.0, 1.0)];
    check(&inputs, |t, v| project(t, v[0].max_pool2(), 9));
    check(&inputs, |t, v| project(t, v[0].resize(8, 12), 10));
    check(&inputs, |t, v| project(t, v[0].resize(3, 5), 11));
}

#[test]
fn elementwise_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inputs = [
        random([1, 2, 3, 3], &mut rng, -1.0, 1.0),
        random([1, 2, 3, 3], &mut rng, 0.5, 1.5),
        random([1, 1, 3, 3], &mut rng, 0.0, 1.0),
    ];
    check(&inputs, |t, v| project(t, (v[0] * v[1] - v[1]).abs() / v[1], 12));
    check(&inputs, |t, v| project(t, v[0].mul_plane(v[2]).sigmoid().relu(), 13));
    check(&inputs, |t, v| project(t, v[0].scale(3.0).offset(0.25).square(), 14));
    check(&inputs, |t, v| project(t, t.concat_channels(&[v[0], v[2]]), 15));
    check(&inputs, |_, v| v[0].mean());
}

#[test]
fn separable_blur() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs = [random([1, 2, 7, 6], &mut rng, -1.0, 1.0)];
    let kernel = [0.2, 0.5, 0.3];
    check(&inputs, |t, v| project(t, v[0].blur(&kernel, true).blur(&kernel, false), 16));
}

#[test]
fn fused_segmentation_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let logits = random([2, 1, 4, 4], &mut rng, -3.0, 3.0);
    let target = Tensor::from_fn([2, 1, 4, 4], |_| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let weight = random([2, 1, 4, 4], &mut rng, 1.0, 6.0);
    let probs = random([2, 1, 4, 4], &mut rng, 0.05, 0.95);
    check(&[logits], |_, v| v[0].weighted_bce(&target, &weight));
    check(&[probs], |_, v| v[0].weighted_iou(&target, &weight));
}
