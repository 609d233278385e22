//! Slice-level compute kernels behind the tape ops.

use crate::real::{gemm, MatRef};
use crate::Real;

/// Output extent of a stride-1 convolution.
pub fn conv_out_dim(input: usize, kernel: usize, pad: usize) -> usize {
    (input + 2 * pad + 1).checked_sub(kernel).expect("convolution kernel larger than padded input")
}

/// Unfolds one `[C, H, W]` item into a `[C*k*k, Ho*Wo]` column matrix.
#[allow(clippy::too_many_arguments)]
pub fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, k: usize, pad: usize, cols: &mut [T]) {
    let ho = conv_out_dim(h, k, pad);
    let wo = conv_out_dim(w, k, pad);
    let plane = ho * wo;
    debug_assert_eq!(cols.len(), c * k * k * plane);
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                // valid output columns: 0 <= ox + kx - pad < w
                let x_lo = pad.saturating_sub(kx).min(wo);
                let x_hi = (w + pad).saturating_sub(kx).min(wo).max(x_lo);
                for oy in 0..ho {
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    line[..x_lo].fill(T::zero());
                    line[x_hi..].fill(T::zero());
                    if x_hi > x_lo {
                        let ix0 = x_lo + kx - pad;
                        let base = iy as usize * w;
                        line[x_lo..x_hi].copy_from_slice(&src[base + ix0..base + ix0 + (x_hi - x_lo)]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back into a `[C, H, W]` gradient.
#[allow(clippy::too_many_arguments)]
pub fn col2im<T: Real>(cols: &[T], c: usize, h: usize, w: usize, k: usize, pad: usize, dx: &mut [T]) {
    let ho = conv_out_dim(h, k, pad);
    let wo = conv_out_dim(w, k, pad);
    let plane = ho * wo;
    for ch in 0..c {
        let dst = &mut dx[ch * h * w..(ch + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                let x_lo = pad.saturating_sub(kx).min(wo);
                let x_hi = (w + pad).saturating_sub(kx).min(wo).max(x_lo);
                if x_hi <= x_lo {
                    continue;
                }
                for oy in 0..ho {
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let ix0 = x_lo + kx - pad;
                    let base = iy as usize * w + ix0;
                    let line = &src[oy * wo + x_lo..oy * wo + x_hi];
                    for (d, &s) in dst[base..base + line.len()].iter_mut().zip(line) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Geometry of a stride-1 2-D convolution over an NCHW batch.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeom {
    pub n: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_hw(&self) -> (usize, usize) {
        (conv_out_dim(self.h, self.k, self.pad), conv_out_dim(self.w, self.k, self.pad))
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.pad == 0
    }

    fn col_rows(&self) -> usize {
        self.c_in * self.k * self.k
    }
}

pub fn conv2d_forward<T: Real>(g: ConvGeom, x: &[T], weight: &[T], bias: Option<&[T]>) -> Vec<T> {
    let (ho, wo) = g.out_hw();
    let plane = ho * wo;
    let ck = g.col_rows();
    let mut out = vec![T::zero(); g.n * g.c_out * plane];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); ck * plane] };
    let in_item = g.c_in * g.h * g.w;
    for n in 0..g.n {
        let xi = &x[n * in_item..(n + 1) * in_item];
        let rhs = if g.is_pointwise() {
            xi
        } else {
            im2col(xi, g.c_in, g.h, g.w, g.k, g.pad, &mut cols);
            &cols[..]
        };
        let dst = &mut out[n * g.c_out * plane..(n + 1) * g.c_out * plane];
        gemm(MatRef::row_major(weight, g.c_out, ck), MatRef::row_major(rhs, ck, plane), T::zero(), dst);
        if let Some(b) = bias {
            for (co, chunk) in dst.chunks_mut(plane).enumerate() {
                let bv = b[co];
                chunk.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    out
}

/// Accumulates the requested convolution gradients.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Real>(
    g: ConvGeom,
    x: &[T],
    weight: &[T],
    dout: &[T],
    mut dx: Option<&mut [T]>,
    mut dweight: Option<&mut [T]>,
    mut dbias: Option<&mut [T]>,
) {
    let (ho, wo) = g.out_hw();
    let plane = ho * wo;
    let ck = g.col_rows();
    let in_item = g.c_in * g.h * g.w;
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); ck * plane] };
    for n in 0..g.n {
        let dy = &dout[n * g.c_out * plane..(n + 1) * g.c_out * plane];
        if let Some(db) = dbias.as_deref_mut() {
            for (co, chunk) in dy.chunks(plane).enumerate() {
                db[co] += chunk.iter().copied().sum::<T>();
            }
        }
        if let Some(dw) = dweight.as_deref_mut() {
            let xi = &x[n * in_item..(n + 1) * in_item];
            let col_view = if g.is_pointwise() {
                xi
            } else {
                im2col(xi, g.c_in, g.h, g.w, g.k, g.pad, &mut cols);
                &cols[..]
            };
            gemm(MatRef::row_major(dy, g.c_out, plane), MatRef::transposed(col_view, ck, plane), T::one(), dw);
        }
        if let Some(dxall) = dx.as_deref_mut() {
            let dxi = &mut dxall[n * in_item..(n + 1) * in_item];
            let wt = MatRef::transposed(weight, g.c_out, ck);
            if g.is_pointwise() {
                gemm(wt, MatRef::row_major(dy, g.c_out, plane), T::one(), dxi);
            } else {
                gemm(wt, MatRef::row_major(dy, g.c_out, plane), T::zero(), &mut cols);
                col2im(&cols, g.c_in, g.h, g.w, g.k, g.pad, dxi);
            }
        }
    }
}

/// 2x2 / stride-2 max pooling over every plane; returns values and flat argmax
/// offsets inside each input plane.
pub fn max_pool2<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * ho * wo);
    let mut arg = Vec::with_capacity(planes * ho * wo);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * oy + dy) * w + 2 * ox + dx;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out.push(src[best]);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

/// Half-pixel (`align_corners = false`) linear interpolation taps:
/// `(lo, hi, w_lo, w_hi)` per output coordinate.
pub fn linear_taps(input: usize, output: usize) -> Vec<(usize, usize, f64, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            let frac = if hi == lo { 0.0 } else { src - lo as f64 };
            (lo, hi, 1.0 - frac, frac)
        })
        .collect()
}

pub fn resize_bilinear<T: Real>(x: &[T], planes: usize, h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
    let ty = linear_taps(h, oh);
    let tx = linear_taps(w, ow);
    let mut out = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        for &(y0, y1, wy0, wy1) in &ty {
            let (wy0, wy1) = (T::of(wy0), T::of(wy1));
            for &(x0, x1, wx0, wx1) in &tx {
                let (wx0, wx1) = (T::of(wx0), T::of(wx1));
                let top = src[y0 * w + x0] * wx0 + src[y0 * w + x1] * wx1;
                let bot = src[y1 * w + x0] * wx0 + src[y1 * w + x1] * wx1;
                out.push(top * wy0 + bot * wy1);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn resize_bilinear_backward<T: Real>(
    dout: &[T],
    planes: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    dx: &mut [T],
) {
    let ty = linear_taps(h, oh);
    let tx = linear_taps(w, ow);
    for p in 0..planes {
        let g = &dout[p * oh * ow..(p + 1) * oh * ow];
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            let (wy0, wy1) = (T::of(wy0), T::of(wy1));
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                let (wx0, wx1) = (T::of(wx0), T::of(wx1));
                let gv = g[oy * ow + ox];
                dst[y0 * w + x0] += gv * wy0 * wx0;
                dst[y0 * w + x1] += gv * wy0 * wx1;
                dst[y1 * w + x0] += gv * wy1 * wx0;
                dst[y1 * w + x1] += gv * wy1 * wx1;
            }
        }
    }
}

/// Valid (no padding) 1-D correlation along rows (`horizontal = true`) or
/// columns of every plane.
pub fn blur_valid<T: Real>(x: &[T], planes: usize, h: usize, w: usize, kernel: &[T], horizontal: bool) -> Vec<T> {
    let k = kernel.len();
    let (oh, ow) = if horizontal { (h, w + 1 - k) } else { (h + 1 - k, w) };
    let mut out = vec![T::zero(); planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..oh {
            for xo in 0..ow {
                let mut acc = T::zero();
                for (t, &kv) in kernel.iter().enumerate() {
                    let v = if horizontal { src[y * w + xo + t] } else { src[(y + t) * w + xo] };
                    acc += kv * v;
                }
                dst[y * ow + xo] = acc;
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn blur_valid_backward<T: Real>(
    dout: &[T],
    planes: usize,
    h: usize,
    w: usize,
    kernel: &[T],
    horizontal: bool,
    dx: &mut [T],
) {
    let k = kernel.len();
    let (oh, ow) = if horizontal { (h, w + 1 - k) } else { (h + 1 - k, w) };
    for p in 0..planes {
        let g = &dout[p * oh * ow..(p + 1) * oh * ow];
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for y in 0..oh {
            for xo in 0..ow {
                let gv = g[y * ow + xo];
                for (t, &kv) in kernel.iter().enumerate() {
                    let idx = if horizontal { y * w + xo + t } else { (y + t) * w + xo };
                    dst[idx] += kv * gv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], c: usize, h: usize, w: usize, wt: &[f64], co: usize, k: usize, pad: usize) -> Vec<f64> {
        let ho = conv_out_dim(h, k, pad);
        let wo = conv_out_dim(w, k, pad);
        let mut out = vec![0.0; co * ho * wo];
        for o in 0..co {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = oy as isize + ky as isize - pad as isize;
                                let ix = ox as isize + kx as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += x[ci * h * w + iy as usize * w + ix as usize]
                                        * wt[((o * c + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    out[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_loops() {
        let (c, h, w, co) = (3, 5, 7, 4);
        let x: Vec<f64> = (0..c * h * w).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for (k, pad) in [(3, 1), (1, 0), (3, 0), (5, 2)] {
            let wt: Vec<f64> = (0..co * c * k * k).map(|i| ((i * 13) % 7) as f64 * 0.25 - 0.75).collect();
            let g = ConvGeom { n: 1, c_in: c, c_out: co, h, w, k, pad };
            let got = conv2d_forward(g, &x, &wt, None);
            assert_eq!(got, naive_conv(&x, c, h, w, &wt, co, k, pad), "k={k} pad={pad}");
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let (c, h, w, k, pad) = (2, 4, 5, 3, 1);
        let x: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.37).sin()).collect();
        let rows = c * k * k * h * w;
        let y: Vec<f64> = (0..rows).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut cols = vec![0.0; rows];
        im2col(&x, c, h, w, k, pad, &mut cols);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; c * h * w];
        col2im(&y, c, h, w, k, pad, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn linear_taps_identity_when_sizes_match() {
        for (i, &(lo, hi, a, b)) in linear_taps(6, 6).iter().enumerate() {
            assert_eq!(lo, i);
            assert_eq!(a + b, 1.0);
            if hi != lo {
                assert_eq!(b, 0.0);
            }
        }
    }

    #[test]
    fn upsample_by_two_matches_half_pixel_convention() {
        // [0, 1] -> [0, 0.25, 0.75, 1]
        let out = resize_bilinear(&[0.0f64, 1.0], 1, 1, 2, 1, 4);
        assert_eq!(out, vec![0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn max_pool_picks_window_maximum() {
        let x = [1.0f32, 5.0, 2.0, 0.0, 3.0, 4.0, 9.0, 8.0];
        let (v, a) = max_pool2(&x, 1, 2, 4);
        assert_eq!(v, vec![5.0, 9.0]);
        assert_eq!(a, vec![1, 6]);
    }
}
