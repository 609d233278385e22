use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sslsod_tensor::{ParamStore, Session, Shape, Tensor, Var};

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

pub fn random(shape: Shape, rng: &mut impl Rng, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Error of one gradient entry: 0 when the absolute gap is below 1e-8,
/// otherwise the gap relative to the larger magnitude.
pub fn entry_error(analytic: f64, numeric: f64) -> f64 {
    let gap = (analytic - numeric).abs();
    if gap < 1e-8 {
        0.0
    } else {
        gap / analytic.abs().max(numeric.abs())
    }
}

/// Worst entry error between tape gradients of the scalar `f` and central
/// differences, over every element of every input and every trainable
/// parameter in `store`.
pub fn max_error<F>(store: &ParamStore<f64>, inputs: &[Tensor<f64>], f: F) -> f64
where
    F: for<'s> Fn(&'s Session<'_, f64>, &[Var<'s, f64>]) -> Var<'s, f64>,
{
    let eval = |store: &ParamStore<f64>, inputs: &[Tensor<f64>]| {
        let s = Session::new(store);
        let vars: Vec<_> = inputs.iter().map(|t| s.input(t.clone())).collect();
        f(&s, &vars).value().item()
    };
    let central = |plus: f64, minus: f64| (plus - minus) / (2.0 * STEP);

    let s = Session::new(store);
    let vars: Vec<_> = inputs.iter().map(|t| s.tape().variable(t.clone())).collect();
    let grads = s.backward(f(&s, &vars));
    let mut worst = 0.0f64;

    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k]);
        for i in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= STEP;
            let numeric = central(eval(store, &plus), eval(store, &minus));
            worst = worst.max(entry_error(analytic[i], numeric));
        }
    }

    for (id, analytic) in s.param_grads(&grads) {
        for i in 0..analytic.len() {
            let mut plus = store.clone();
            plus.value_mut(id).data_mut()[i] += STEP;
            let mut minus = store.clone();
            minus.value_mut(id).data_mut()[i] -= STEP;
            let numeric = central(eval(&plus, inputs), eval(&minus, inputs));
            worst = worst.max(entry_error(analytic[i], numeric));
        }
    }
    worst
}

/// Fixed random projection to a scalar so every output element matters.
pub fn project<'s>(s: &'s Session<'_, f64>, v: Var<'s, f64>, seed: u64) -> Var<'s, f64> {
    let w = random(v.shape(), &mut ChaCha8Rng::seed_from_u64(seed), -1.0, 1.0);
    v.mul(s.input(w)).sum()
}
