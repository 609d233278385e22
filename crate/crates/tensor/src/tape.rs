//! Reverse-mode tape: every op appends a node holding its forward value and
//! enough bookkeeping to push gradients back to its inputs.

use std::cell::{Ref, RefCell};
use std::rc::Rc;

use crate::kernels::{self, ConvGeom};
use crate::tensor::Shape;
use crate::{Real, Tensor};

enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    MulPlane(usize, usize),
    Scale(usize, T),
    Offset(usize),
    Abs(usize),
    Relu(usize),
    Sigmoid(usize),
    Conv { x: usize, w: usize, b: Option<usize>, geom: ConvGeom },
    MaxPool { x: usize, argmax: Vec<u32> },
    Resize(usize),
    Concat(Vec<usize>),
    Sum(usize),
    Mean(usize),
    Blur { x: usize, kernel: Vec<T>, horizontal: bool },
    WeightedBce { logits: usize, target: Rc<Tensor<T>>, weight: Rc<Tensor<T>> },
    WeightedIou { prob: usize, target: Rc<Tensor<T>>, weight: Rc<Tensor<T>> },
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation for a single backward pass.
pub struct Tape<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Real> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A leaf that gradients flow into when `requires_grad` is set.
    pub fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        self.push_raw(Rc::new(value), Op::Leaf, requires_grad)
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    pub fn variable(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, true)
    }

    fn push_raw(&self, value: Rc<Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        let op = if requires_grad { op } else { Op::Leaf };
        nodes.push(Node { value, op, requires_grad });
        Var { tape: self, id }
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, inputs: &[usize]) -> Var<'_, T> {
        let rg = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|&i| nodes[i].requires_grad)
        };
        self.push_raw(Rc::new(value), op, rg)
    }

    pub(crate) fn handle(&self, id: usize) -> Var<'_, T> {
        assert!(id < self.len(), "node {id} is not on this tape");
        Var { tape: self, id }
    }

    fn value(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels<'t>(&'t self, parts: &[Var<'t, T>]) -> Var<'t, T> {
        assert!(!parts.is_empty(), "concat of zero tensors");
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let [n, _, h, w] = values[0].shape();
        for v in &values {
            assert_eq!((v.batch(), v.height(), v.width()), (n, h, w), "concat shape mismatch");
        }
        let c_total: usize = values.iter().map(|v| v.channels()).sum();
        let mut data = Vec::with_capacity(n * c_total * h * w);
        for i in 0..n {
            for v in &values {
                data.extend_from_slice(v.item_slice(i));
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        self.push(Tensor::from_vec([n, c_total, h, w], data), Op::Concat(ids.clone()), &ids)
    }

    /// Reverse pass from a one-element `loss`.
    pub fn backward(&self, loss: Var<'_, T>) -> Gradients<T> {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.id].value.len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![T::one()]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            backprop_node(&nodes, node, &g, &mut grads);
        }
        Gradients { grads }
    }
}

/// Gradients produced by [`Tape::backward`]; only leaves keep theirs.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, var: Var<'_, T>) -> Option<&[T]> {
        self.by_id(var.id)
    }

    pub fn by_id(&self, id: usize) -> Option<&[T]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    /// Gradient of a leaf, or zeros when nothing reached it.
    pub fn get_or_zeros(&self, var: Var<'_, T>) -> Vec<T> {
        self.get(var).map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); var.value().len()])
    }
}

fn slot<T: Real>(grads: &mut [Option<Vec<T>>], id: usize, len: usize) -> &mut Vec<T> {
    grads[id].get_or_insert_with(|| vec![T::zero(); len])
}

fn backprop_node<T: Real>(nodes: &[Node<T>], node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let rg = |i: usize| nodes[i].requires_grad;
    let val = |i: usize| &*nodes[i].value;
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            for &i in [a, b] {
                if rg(i) {
                    let s = slot(grads, i, g.len());
                    s.iter_mut().zip(g).for_each(|(d, &gv)| *d += gv);
                }
            }
        }
        Op::Sub(a, b) => {
            if rg(*a) {
                let s = slot(grads, *a, g.len());
                s.iter_mut().zip(g).for_each(|(d, &gv)| *d += gv);
            }
            if rg(*b) {
                let s = slot(grads, *b, g.len());
                s.iter_mut().zip(g).for_each(|(d, &gv)| *d -= gv);
            }
        }
        Op::Mul(a, b) => {
            if rg(*a) {
                let other = val(*b).data();
                let s = slot(grads, *a, g.len());
                for ((d, &gv), &o) in s.iter_mut().zip(g).zip(other) {
                    *d += gv * o;
                }
            }
            if rg(*b) {
                let other = val(*a).data();
                let s = slot(grads, *b, g.len());
                for ((d, &gv), &o) in s.iter_mut().zip(g).zip(other) {
                    *d += gv * o;
                }
            }
        }
        Op::Div(a, b) => {
            let den = val(*b).data();
            if rg(*a) {
                let s = slot(grads, *a, g.len());
                for ((d, &gv), &q) in s.iter_mut().zip(g).zip(den) {
                    *d += gv / q;
                }
            }
            if rg(*b) {
                let num = val(*a).data();
                let s = slot(grads, *b, g.len());
                for (((d, &gv), &q), &p) in s.iter_mut().zip(g).zip(den).zip(num) {
                    *d -= gv * p / (q * q);
                }
            }
        }
        Op::MulPlane(x, s) => {
            let xv = val(*x);
            let sv = val(*s);
            let [n, c, h, w] = xv.shape();
            let hw = h * w;
            if rg(*x) {
                let dx = slot(grads, *x, g.len());
                for i in 0..n {
                    let gate = sv.plane(i, 0);
                    for ch in 0..c {
                        let off = (i * c + ch) * hw;
                        for p in 0..hw {
                            dx[off + p] += g[off + p] * gate[p];
                        }
                    }
                }
            }
            if rg(*s) {
                let ds = slot(grads, *s, n * hw);
                for i in 0..n {
                    for ch in 0..c {
                        let off = (i * c + ch) * hw;
                        let xp = xv.plane(i, ch);
                        for p in 0..hw {
                            ds[i * hw + p] += g[off + p] * xp[p];
                        }
                    }
                }
            }
        }
        Op::Scale(a, k) => {
            let s = slot(grads, *a, g.len());
            s.iter_mut().zip(g).for_each(|(d, &gv)| *d += gv * *k);
        }
        Op::Offset(a) => {
            let s = slot(grads, *a, g.len());
            s.iter_mut().zip(g).for_each(|(d, &gv)| *d += gv);
        }
        Op::Abs(a) => {
            let x = val(*a).data();
            let s = slot(grads, *a, g.len());
            for ((d, &gv), &xv) in s.iter_mut().zip(g).zip(x) {
                // subgradient 0 at the kink
                if xv > T::zero() {
                    *d += gv;
                } else if xv < T::zero() {
                    *d -= gv;
                }
            }
        }
        Op::Relu(a) => {
            let x = val(*a).data();
            let s = slot(grads, *a, g.len());
            for ((d, &gv), &xv) in s.iter_mut().zip(g).zip(x) {
                if xv > T::zero() {
                    *d += gv;
                }
            }
        }
        Op::Sigmoid(a) => {
            let y = node.value.data();
            let s = slot(grads, *a, g.len());
            for ((d, &gv), &yv) in s.iter_mut().zip(g).zip(y) {
                *d += gv * yv * (T::one() - yv);
            }
        }
        Op::Conv { x, w, b, geom } => {
            let xv = val(*x);
            let wv = val(*w);
            let mut dx = rg(*x).then(|| grads[*x].take().unwrap_or_else(|| vec![T::zero(); xv.len()]));
            let mut dw = rg(*w).then(|| grads[*w].take().unwrap_or_else(|| vec![T::zero(); wv.len()]));
            let mut db =
                b.filter(|&bi| rg(bi)).map(|bi| grads[bi].take().unwrap_or_else(|| vec![T::zero(); geom.c_out]));
            kernels::conv2d_backward(
                *geom,
                xv.data(),
                wv.data(),
                g,
                dx.as_deref_mut(),
                dw.as_deref_mut(),
                db.as_deref_mut(),
            );
            if let Some(v) = dx {
                grads[*x] = Some(v);
            }
            if let Some(v) = dw {
                grads[*w] = Some(v);
            }
            if let (Some(bi), Some(v)) = (b, db) {
                grads[*bi] = Some(v);
            }
        }
        Op::MaxPool { x, argmax } => {
            let [n, c, h, w] = val(*x).shape();
            let (ho, wo) = (h / 2, w / 2);
            let dx = slot(grads, *x, n * c * h * w);
            for p in 0..n * c {
                for o in 0..ho * wo {
                    let k = p * ho * wo + o;
                    dx[p * h * w + argmax[k] as usize] += g[k];
                }
            }
        }
        Op::Resize(x) => {
            let [n, c, h, w] = val(*x).shape();
            let [_, _, oh, ow] = node.value.shape();
            let dx = slot(grads, *x, n * c * h * w);
            kernels::resize_bilinear_backward(g, n * c, h, w, oh, ow, dx);
        }
        Op::Concat(ids) => {
            let [n, c_total, h, w] = node.value.shape();
            let hw = h * w;
            let mut c_off = 0;
            for &i in ids {
                let ci = val(i).channels();
                if rg(i) {
                    let d = slot(grads, i, n * ci * hw);
                    for b in 0..n {
                        let src = &g[(b * c_total + c_off) * hw..(b * c_total + c_off + ci) * hw];
                        let dst = &mut d[b * ci * hw..(b + 1) * ci * hw];
                        dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
                    }
                }
                c_off += ci;
            }
        }
        Op::Sum(a) => {
            let len = val(*a).len();
            let s = slot(grads, *a, len);
            s.iter_mut().for_each(|d| *d += g[0]);
        }
        Op::Mean(a) => {
            let len = val(*a).len();
            let gv = g[0] / T::of(len as f64);
            let s = slot(grads, *a, len);
            s.iter_mut().for_each(|d| *d += gv);
        }
        Op::Blur { x, kernel, horizontal } => {
            let [n, c, h, w] = val(*x).shape();
            let dx = slot(grads, *x, n * c * h * w);
            kernels::blur_valid_backward(g, n * c, h, w, kernel, *horizontal, dx);
        }
        Op::WeightedBce { logits, target, weight } => {
            let x = val(*logits);
            let n = x.batch();
            let per = x.len() / n;
            let scale = g[0] / T::of(n as f64);
            let d = slot(grads, *logits, x.len());
            for i in 0..n {
                let r = i * per..(i + 1) * per;
                let wsum: T = weight.data()[r.clone()].iter().copied().sum();
                for j in r {
                    let sig = sigmoid(x.data()[j]);
                    d[j] += scale * weight.data()[j] * (sig - target.data()[j]) / wsum;
                }
            }
        }
        Op::WeightedIou { prob, target, weight } => {
            let p = val(*prob);
            let n = p.batch();
            let per = p.len() / n;
            let scale = g[0] / T::of(n as f64);
            let d = slot(grads, *prob, p.len());
            for i in 0..n {
                let (inter, union) = iou_terms(p.data(), target.data(), weight.data(), i * per..(i + 1) * per);
                let (i1, u1) = (inter + T::one(), union + T::one());
                for j in i * per..(i + 1) * per {
                    let (wj, gj) = (weight.data()[j], target.data()[j]);
                    let d_inter = wj * gj;
                    let d_union = wj * (T::one() - gj);
                    d[j] -= scale * (d_inter * u1 - i1 * d_union) / (u1 * u1);
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn iou_terms<T: Real>(p: &[T], g: &[T], w: &[T], r: std::ops::Range<usize>) -> (T, T) {
    let mut inter = T::zero();
    let mut total = T::zero();
    for j in r {
        inter += w[j] * p[j] * g[j];
        total += w[j] * (p[j] + g[j]);
    }
    (inter, total - inter)
}

impl<'t, T: Real> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.tape.value(self.id)
    }

    /// Borrow of the tape's node list; prefer [`Var::value`] outside hot loops.
    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor<T>) -> R) -> R {
        let nodes: Ref<'_, Vec<Node<T>>> = self.tape.nodes.borrow();
        f(&nodes[self.id].value)
    }

    pub fn shape(&self) -> Shape {
        self.with_value(|v| v.shape())
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    fn unary(self, op: Op<T>, f: impl Fn(T) -> T) -> Self {
        let out = self.with_value(|v| v.map(f));
        self.tape.push(out, op, &[self.id])
    }

    fn zip(self, other: Self, op: Op<T>, f: impl Fn(T, T) -> T) -> Self {
        let a = self.value();
        let b = other.value();
        assert_eq!(a.shape(), b.shape(), "elementwise shape mismatch");
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        self.tape.push(Tensor::from_vec(a.shape(), data), op, &[self.id, other.id])
    }

    pub fn add(self, other: Self) -> Self {
        self.zip(other, Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Self) -> Self {
        self.zip(other, Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(self, other: Self) -> Self {
        self.zip(other, Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn div(self, other: Self) -> Self {
        self.zip(other, Op::Div(self.id, other.id), |a, b| a / b)
    }

    pub fn square(self) -> Self {
        self.mul(self)
    }

    /// Multiplies every channel by a one-channel map of the same spatial size.
    pub fn mul_plane(self, gate: Self) -> Self {
        let x = self.value();
        let s = gate.value();
        let [n, c, h, w] = x.shape();
        assert_eq!(s.shape(), [n, 1, h, w], "gate must be [N, 1, H, W] matching the features");
        let hw = h * w;
        let mut data = Vec::with_capacity(x.len());
        for i in 0..n {
            let sp = s.plane(i, 0);
            for ch in 0..c {
                data.extend(x.plane(i, ch).iter().zip(sp).map(|(&a, &b)| a * b));
            }
        }
        debug_assert_eq!(data.len(), n * c * hw);
        self.tape.push(Tensor::from_vec(x.shape(), data), Op::MulPlane(self.id, gate.id), &[self.id, gate.id])
    }

    pub fn scale(self, k: T) -> Self {
        self.unary(Op::Scale(self.id, k), |v| v * k)
    }

    pub fn offset(self, k: T) -> Self {
        self.unary(Op::Offset(self.id), |v| v + k)
    }

    pub fn abs(self) -> Self {
        self.unary(Op::Abs(self.id), |v| v.abs())
    }

    pub fn relu(self) -> Self {
        self.unary(Op::Relu(self.id), |v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn sigmoid(self) -> Self {
        self.unary(Op::Sigmoid(self.id), sigmoid)
    }

    /// Stride-1 convolution; `weight` is `[C_out, C_in, k, k]`, `bias` `[1, C_out, 1, 1]`.
    pub fn conv2d(self, weight: Self, bias: Option<Self>, pad: usize) -> Self {
        let x = self.value();
        let wv = weight.value();
        let [n, c_in, h, w] = x.shape();
        let [c_out, wc, k, k2] = wv.shape();
        assert_eq!(k, k2, "only square kernels are supported");
        assert_eq!(wc, c_in, "conv weight expects {wc} input channels, got {c_in}");
        let bv = bias.map(|b| {
            let v = b.value();
            assert_eq!(v.len(), c_out, "conv bias length mismatch");
            v
        });
        let geom = ConvGeom { n, c_in, c_out, h, w, k, pad };
        let (ho, wo) = geom.out_hw();
        let out = kernels::conv2d_forward(geom, x.data(), wv.data(), bv.as_ref().map(|b| b.data()));
        let mut ids = vec![self.id, weight.id];
        if let Some(b) = bias {
            ids.push(b.id);
        }
        self.tape.push(
            Tensor::from_vec([n, c_out, ho, wo], out),
            Op::Conv { x: self.id, w: weight.id, b: bias.map(|b| b.id), geom },
            &ids,
        )
    }

    pub fn max_pool2(self) -> Self {
        let x = self.value();
        let [n, c, h, w] = x.shape();
        let (out, argmax) = kernels::max_pool2(x.data(), n * c, h, w);
        self.tape.push(Tensor::from_vec([n, c, h / 2, w / 2], out), Op::MaxPool { x: self.id, argmax }, &[self.id])
    }

    /// Bilinear resize with half-pixel centers; identity when the size matches.
    pub fn resize(self, height: usize, width: usize) -> Self {
        let x = self.value();
        let [n, c, h, w] = x.shape();
        if (h, w) == (height, width) {
            return self;
        }
        let out = kernels::resize_bilinear(x.data(), n * c, h, w, height, width);
        self.tape.push(Tensor::from_vec([n, c, height, width], out), Op::Resize(self.id), &[self.id])
    }

    pub fn sum(self) -> Self {
        let s = self.with_value(|v| v.sum());
        self.tape.push(Tensor::scalar(s), Op::Sum(self.id), &[self.id])
    }

    pub fn mean(self) -> Self {
        let s = self.with_value(|v| v.mean());
        self.tape.push(Tensor::scalar(s), Op::Mean(self.id), &[self.id])
    }

    /// Valid 1-D correlation of every plane with `kernel`.
    pub fn blur(self, kernel: &[T], horizontal: bool) -> Self {
        let x = self.value();
        let [n, c, h, w] = x.shape();
        let k = kernel.len();
        assert!(if horizontal { w >= k } else { h >= k }, "blur kernel longer than the input");
        let out = kernels::blur_valid(x.data(), n * c, h, w, kernel, horizontal);
        let shape = if horizontal { [n, c, h, w + 1 - k] } else { [n, c, h + 1 - k, w] };
        self.tape.push(
            Tensor::from_vec(shape, out),
            Op::Blur { x: self.id, kernel: kernel.to_vec(), horizontal },
            &[self.id],
        )
    }

    /// Pixel-weighted binary cross-entropy from logits, normalised by the
    /// weight mass of each batch item and averaged over the batch.
    pub fn weighted_bce(self, target: &Tensor<T>, weight: &Tensor<T>) -> Self {
        let x = self.value();
        assert_eq!(x.shape(), target.shape(), "bce target shape mismatch");
        assert_eq!(x.shape(), weight.shape(), "bce weight shape mismatch");
        let n = x.batch();
        let per = x.len() / n;
        let mut total = T::zero();
        for i in 0..n {
            let mut num = T::zero();
            let mut den = T::zero();
            for j in i * per..(i + 1) * per {
                let (z, y, wj) = (x.data()[j], target.data()[j], weight.data()[j]);
                // max(z, 0) - z*y + ln(1 + e^{-|z|})
                let l = z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p();
                num += wj * l;
                den += wj;
            }
            total += num / den;
        }
        let loss = total / T::of(n as f64);
        self.tape.push(
            Tensor::scalar(loss),
            Op::WeightedBce { logits: self.id, target: Rc::new(target.clone()), weight: Rc::new(weight.clone()) },
            &[self.id],
        )
    }

    /// `1 - (I + 1) / (U + 1)` per batch item with weighted intersection and
    /// union, averaged over the batch.
    pub fn weighted_iou(self, target: &Tensor<T>, weight: &Tensor<T>) -> Self {
        let p = self.value();
        assert_eq!(p.shape(), target.shape(), "iou target shape mismatch");
        assert_eq!(p.shape(), weight.shape(), "iou weight shape mismatch");
        let n = p.batch();
        let per = p.len() / n;
        let mut total = T::zero();
        for i in 0..n {
            let (inter, union) = iou_terms(p.data(), target.data(), weight.data(), i * per..(i + 1) * per);
            total += T::one() - (inter + T::one()) / (union + T::one());
        }
        let loss = total / T::of(n as f64);
        self.tape.push(
            Tensor::scalar(loss),
            Op::WeightedIou { prob: self.id, target: Rc::new(target.clone()), weight: Rc::new(weight.clone()) },
            &[self.id],
        )
    }
}

impl<'t, T: Real> std::ops::Add for Var<'t, T> {
    type Output = Var<'t, T>;
    fn add(self, rhs: Self) -> Self::Output {
        Var::add(self, rhs)
    }
}

impl<'t, T: Real> std::ops::Sub for Var<'t, T> {
    type Output = Var<'t, T>;
    fn sub(self, rhs: Self) -> Self::Output {
        Var::sub(self, rhs)
    }
}

impl<'t, T: Real> std::ops::Mul for Var<'t, T> {
    type Output = Var<'t, T>;
    fn mul(self, rhs: Self) -> Self::Output {
        Var::mul(self, rhs)
    }
}

impl<'t, T: Real> std::ops::Div for Var<'t, T> {
    type Output = Var<'t, T>;
    fn div(self, rhs: Self) -> Self::Output {
        Var::div(self, rhs)
    }
}
