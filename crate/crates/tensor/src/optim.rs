use crate::params::{ParamId, ParamStore};
use crate::Real;

/// SGD with heavy-ball momentum and L2 weight decay:
/// `d = g + wd * p; buf = momentum * buf + d; p -= lr * buf`.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    momentum: T,
    weight_decay: T,
    buffers: Vec<Option<Vec<T>>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(momentum: T, weight_decay: T) -> Self {
        Self { momentum, weight_decay, buffers: Vec::new() }
    }

    pub fn momentum(&self) -> T {
        self.momentum
    }

    pub fn weight_decay(&self) -> T {
        self.weight_decay
    }

    /// Applies one update. `lr` maps each parameter to its group's current
    /// rate; frozen parameters are skipped even if a gradient is supplied.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[(ParamId, Vec<T>)], lr: impl Fn(ParamId) -> T) {
        if self.buffers.len() < params.len() {
            self.buffers.resize(params.len(), None);
        }
        for (id, grad) in grads {
            if !params.is_trainable(*id) {
                continue;
            }
            let rate = lr(*id);
            let value = params.value_mut(*id).data_mut();
            assert_eq!(value.len(), grad.len(), "gradient length mismatch for parameter {}", id.0);
            let buf = self.buffers[id.0].get_or_insert_with(|| vec![T::zero(); grad.len()]);
            for ((p, &g), b) in value.iter_mut().zip(grad).zip(buf.iter_mut()) {
                let d = g + self.weight_decay * *p;
                *b = self.momentum * *b + d;
                *p -= rate * *b;
            }
        }
    }

    /// Momentum buffers by parameter id, for checkpointing.
    pub fn buffers(&self) -> impl Iterator<Item = (ParamId, &[T])> + '_ {
        self.buffers.iter().enumerate().filter_map(|(i, b)| b.as_deref().map(|b| (ParamId(i), b)))
    }

    pub fn set_buffer(&mut self, id: ParamId, values: Vec<T>) {
        if self.buffers.len() <= id.0 {
            self.buffers.resize(id.0 + 1, None);
        }
        self.buffers[id.0] = Some(values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("w", Tensor::from_vec([1, 1, 1, 3], vec![0.5, -1.0, 2.0]));
        let before = store.value(id).clone();
        let mut opt = Sgd::new(0.9, 0.0);
        for _ in 0..5 {
            opt.step(&mut store, &[(id, vec![0.0; 3])], |_| 0.1);
        }
        assert_eq!(store.value(id), &before);
    }

    #[test]
    fn momentum_accumulates() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("w", Tensor::scalar(0.0));
        let mut opt = Sgd::new(0.5, 0.0);
        opt.step(&mut store, &[(id, vec![1.0])], |_| 1.0);
        assert_eq!(store.value(id).item(), -1.0);
        opt.step(&mut store, &[(id, vec![1.0])], |_| 1.0);
        // buf = 0.5 * 1 + 1
        assert_eq!(store.value(id).item(), -2.5);
    }

    #[test]
    fn frozen_parameters_are_skipped() {
        let mut store = ParamStore::<f32>::new();
        let id = store.insert("w", Tensor::scalar(1.0));
        store.set_trainable(id, false);
        let mut opt = Sgd::new(0.9, 5e-4);
        opt.step(&mut store, &[(id, vec![3.0])], |_| 0.1);
        assert_eq!(store.value(id).item(), 1.0);
    }
}
