use sslsod::datakit::Plane;

const EPS: f64 = 1e-20;

fn clamp_idx(v: isize, n: usize) -> usize {
    v.clamp(0, n as isize - 1) as usize
}

fn window_fold(p: &Plane, m: usize, init: f64, f: fn(f64, f64) -> f64) -> Plane {
    let r = (m / 2) as isize;
    let (h, w) = p.size();
    Plane::from_fn(h, w, |y, x| {
        let mut acc = init;
        for dy in -r..=r {
            for dx in -r..=r {
                acc = f(acc, p.get(clamp_idx(y as isize + dy, h), clamp_idx(x as isize + dx, w)));
            }
        }
        acc
    })
}

/// m x m maximum with edge replication, one window at a time.
pub fn dilate(p: &Plane, m: usize) -> Plane {
    window_fold(p, m, f64::NEG_INFINITY, f64::max)
}

pub fn erode(p: &Plane, m: usize) -> Plane {
    window_fold(p, m, f64::INFINITY, f64::min)
}

pub fn contour(p: &Plane, m: usize) -> Plane {
    let (d, e) = (dilate(p, m), erode(p, m));
    Plane::from_fn(p.height(), p.width(), |y, x| d.get(y, x) - e.get(y, x))
}

fn binary(gt: &Plane) -> Vec<bool> {
    gt.data().iter().map(|&v| v > 0.5).collect()
}

/// Brute-force weighted F-measure: exhaustive nearest-foreground search and
/// a full 2-D 7x7 Gaussian (sigma 5) with zero padding.
pub fn weighted_f(pred: &Plane, gt: &Plane) -> f64 {
    let (h, w) = gt.size();
    let g = binary(gt);
    let n_fg = g.iter().filter(|&&b| b).count();
    if n_fg == 0 || n_fg == h * w {
        return 0.0;
    }
    let e: Vec<f64> = (0..h * w).map(|i| (pred.data()[i] - gt.data()[i]).abs()).collect();

    let mut dist = vec![0.0; h * w];
    let mut et = e.clone();
    for i in 0..h * w {
        if g[i] {
            continue;
        }
        let (y, x) = ((i / w) as i64, (i % w) as i64);
        let mut best = (i64::MAX, 0usize);
        for j in 0..h * w {
            if g[j] {
                let (yj, xj) = ((j / w) as i64, (j % w) as i64);
                let d2 = (y - yj).pow(2) + (x - xj).pow(2);
                if d2 < best.0 {
                    best = (d2, j);
                }
            }
        }
        dist[i] = (best.0 as f64).sqrt();
        et[i] = e[best.1];
    }

    let mut kernel = [[0.0; 7]; 7];
    let mut total = 0.0;
    for (a, row) in kernel.iter_mut().enumerate() {
        for (b, k) in row.iter_mut().enumerate() {
            let (dy, dx) = (a as f64 - 3.0, b as f64 - 3.0);
            *k = (-(dy * dy + dx * dx) / 50.0).exp();
            total += *k;
        }
    }
    let mut ea = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (a, row) in kernel.iter().enumerate() {
                for (b, k) in row.iter().enumerate() {
                    let (yy, xx) = (y as isize + a as isize - 3, x as isize + b as isize - 3);
                    if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                        acc += k / total * et[yy as usize * w + xx as usize];
                    }
                }
            }
            ea[y * w + x] = acc;
        }
    }

    let alpha = 0.5f64.ln() / 5.0;
    let mut ew = vec![0.0; h * w];
    for i in 0..h * w {
        let min_e = if g[i] && ea[i] < e[i] { ea[i] } else { e[i] };
        let b = if g[i] { 1.0 } else { 2.0 - (alpha * dist[i]).exp() };
        ew[i] = min_e * b;
    }
    let ew_fg: f64 = (0..h * w).filter(|&i| g[i]).map(|i| ew[i]).sum();
    let ew_bg: f64 = (0..h * w).filter(|&i| !g[i]).map(|i| ew[i]).sum();
    let tpw = n_fg as f64 - ew_fg;
    let r = 1.0 - ew_fg / n_fg as f64;
    let p = tpw / (EPS + tpw + ew_bg);
    2.0 * r * p / (EPS + r + p)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn object(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let x = mean(values);
    2.0 * x / (x * x + 1.0 + 2.0 * sample_std(values) + EPS)
}

fn ssim_block(p: &[f64], g: &[f64]) -> f64 {
    let n = p.len() as f64;
    let (x, y) = (mean(p), mean(g));
    let d = if p.len() > 1 { n - 1.0 } else { 1.0 };
    let sx = p.iter().map(|v| (v - x).powi(2)).sum::<f64>() / d;
    let sy = g.iter().map(|v| (v - y).powi(2)).sum::<f64>() / d;
    let sxy = p.iter().zip(g).map(|(a, b)| (a - x) * (b - y)).sum::<f64>() / d;
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Structure measure written out region by region.
pub fn s_measure(pred: &Plane, gt: &Plane) -> f64 {
    let (h, w) = gt.size();
    let g = binary(gt);
    let y_mean = mean(gt.data());
    if y_mean == 0.0 {
        return 1.0 - mean(pred.data());
    }
    if y_mean == 1.0 {
        return mean(pred.data());
    }
    let fg: Vec<f64> = (0..h * w).filter(|&i| g[i]).map(|i| pred.data()[i]).collect();
    let bg: Vec<f64> = (0..h * w).filter(|&i| !g[i]).map(|i| 1.0 - pred.data()[i]).collect();
    let u = fg.len() as f64 / (h * w) as f64;
    let so = u * object(&fg) + (1.0 - u) * object(&bg);

    // 1-based centroid, rounded half away from zero
    let total: f64 = gt.data().iter().sum();
    let mut cx = 0.0;
    let mut cy = 0.0;
    for yy in 0..h {
        for xx in 0..w {
            cx += gt.get(yy, xx) * (xx + 1) as f64;
            cy += gt.get(yy, xx) * (yy + 1) as f64;
        }
    }
    let x_split = (cx / total).round() as usize;
    let y_split = (cy / total).round() as usize;
    let mut sr = 0.0;
    for (ys, xs) in
        [(0..y_split, 0..x_split), (0..y_split, x_split..w), (y_split..h, 0..x_split), (y_split..h, x_split..w)]
    {
        let mut p = Vec::new();
        let mut q = Vec::new();
        for yy in ys.clone() {
            for xx in xs.clone() {
                p.push(pred.get(yy, xx));
                q.push(gt.get(yy, xx));
            }
        }
        if p.is_empty() {
            continue;
        }
        sr += p.len() as f64 / (h * w) as f64 * ssim_block(&p, &q);
    }
    (0.5 * so + 0.5 * sr).max(0.0)
}

/// Enhanced-alignment measure evaluated pixel by pixel at every threshold.
pub fn e_measure(pred: &Plane, gt: &Plane) -> f64 {
    let n = gt.len() as f64;
    let g: Vec<f64> = binary(gt).into_iter().map(|b| b as u8 as f64).collect();
    let gm = g.iter().sum::<f64>() / n;
    if gm == 0.0 {
        return 1.0 - mean(pred.data());
    }
    if gm == 1.0 {
        return mean(pred.data());
    }
    let mut best = f64::NEG_INFINITY;
    for k in 0..256 {
        let t = k as f64 / 255.0;
        let bin: Vec<f64> = pred.data().iter().map(|&v| (v > t) as u8 as f64).collect();
        let bm = bin.iter().sum::<f64>() / n;
        let mut score = 0.0;
        for i in 0..gt.len() {
            let (a, b) = (g[i] - gm, bin[i] - bm);
            let xi = 2.0 * a * b / (a * a + b * b + EPS);
            score += (xi + 1.0) * (xi + 1.0) / 4.0;
        }
        best = best.max(score / n);
    }
    best
}
