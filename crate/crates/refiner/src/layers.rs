use rand::{Rng, RngExt};
use rayon::prelude::*;

use crate::tensor::Tensor4;

pub type ParamId = usize;

/// Flat, ordered parameter storage. Layers hold ids into the pool, which
/// makes optimizer updates and checkpoint serialization order-stable.
#[derive(Debug, Clone)]
pub struct ParamPool {
    entries: Vec<ParamEntry>,
}

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamPool {
    pub fn new() -> Self {
        ParamPool {
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> ParamId {
        assert_eq!(data.len(), shape.iter().product::<usize>());
        self.entries.push(ParamEntry {
            name: name.into(),
            shape,
            data,
        });
        self.entries.len() - 1
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.entries[id].data
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id].data
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.data.iter().all(|v| v.is_finite()))
    }
}

impl Default for ParamPool {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient storage aligned index-for-index with a [`ParamPool`]. Backward
/// passes accumulate into it; callers zero it between steps.
#[derive(Debug, Clone)]
pub struct GradPool {
    grads: Vec<Vec<f64>>,
}

impl GradPool {
    pub fn zeros_like(pool: &ParamPool) -> Self {
        GradPool {
            grads: pool.entries().iter().map(|e| vec![0.0; e.data.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.grads[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.grads.iter()
    }
}

fn he_normal<R: Rng + ?Sized>(rng: &mut R, n: usize, fan_in: usize) -> Vec<f64> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| {
            // Box-Muller
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos() * std
        })
        .collect()
}

/// 3D convolution with odd kernel size and same-padding (or 1×1×1), stride 1.
#[derive(Debug, Clone)]
pub struct Conv3d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl Conv3d {
    pub fn new<R: Rng + ?Sized>(
        pool: &mut ParamPool,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        rng: &mut R,
        zero_init: bool,
    ) -> Self {
        assert!(k % 2 == 1, "odd kernels only");
        let k3 = k * k * k;
        let w_data = if zero_init {
            vec![0.0; out_ch * in_ch * k3]
        } else {
            he_normal(rng, out_ch * in_ch * k3, in_ch * k3)
        };
        let w = pool.add(format!("{name}.w"), vec![out_ch, in_ch, k, k, k], w_data);
        let b = pool.add(format!("{name}.b"), vec![out_ch], vec![0.0; out_ch]);
        Conv3d {
            in_ch,
            out_ch,
            k,
            w,
            b,
        }
    }

    pub fn forward(&self, pool: &ParamPool, x: &Tensor4) -> Tensor4 {
        let [ci, d, wd, h] = x.shape();
        assert_eq!(ci, self.in_ch);
        let n = d * wd * h;
        let k = self.k;
        let pad = k / 2;
        let k3 = k * k * k;
        let weights = pool.get(self.w);
        let bias = pool.get(self.b);
        let mut out = vec![0.0f64; self.out_ch * n];
        out.par_chunks_mut(n).enumerate().for_each(|(oc, ochan)| {
            ochan.iter_mut().for_each(|v| *v = bias[oc]);
            for ic in 0..self.in_ch {
                let xc = x.channel(ic);
                let wbase = (oc * self.in_ch + ic) * k3;
                for kz in 0..k {
                    for ky in 0..k {
                        for kx in 0..k {
                            let wv = weights[wbase + (kz * k + ky) * k + kx];
                            if wv == 0.0 {
                                continue;
                            }
                            let dz = kz as isize - pad as isize;
                            let dy = ky as isize - pad as isize;
                            let dx = kx as isize - pad as isize;
                            axpy_shifted(ochan, xc, [d, wd, h], [dz, dy, dx], wv);
                        }
                    }
                }
            }
        });
        Tensor4::from_vec([self.out_ch, d, wd, h], out)
    }

    pub fn backward(
        &self,
        pool: &ParamPool,
        x: &Tensor4,
        dy: &Tensor4,
        grads: &mut GradPool,
    ) -> Tensor4 {
        let [ci, d, wd, h] = x.shape();
        let n = d * wd * h;
        let k = self.k;
        let pad = k / 2;
        let k3 = k * k * k;
        let weights = pool.get(self.w);

        // bias gradient
        {
            let db = grads.get_mut(self.b);
            for oc in 0..self.out_ch {
                db[oc] += dy.channel(oc).iter().sum::<f64>();
            }
        }
        // weight gradient: cross-correlation of input with the upstream
        {
            let dw = grads.get_mut(self.w);
            dw.par_chunks_mut(self.in_ch * k3)
                .enumerate()
                .for_each(|(oc, dwoc)| {
                    let dyc = dy.channel(oc);
                    for ic in 0..self.in_ch {
                        let xc = x.channel(ic);
                        for kz in 0..k {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let dz = kz as isize - pad as isize;
                                    let dyk = ky as isize - pad as isize;
                                    let dxk = kx as isize - pad as isize;
                                    dwoc[ic * k3 + (kz * k + ky) * k + kx] +=
                                        dot_shifted(dyc, xc, [d, wd, h], [dz, dyk, dxk]);
                                }
                            }
                        }
                    }
                });
        }
        // input gradient: correlation of the upstream with flipped kernels
        let mut dx = vec![0.0f64; ci * n];
        dx.par_chunks_mut(n).enumerate().for_each(|(ic, dxc)| {
            for oc in 0..self.out_ch {
                let dyc = dy.channel(oc);
                let wbase = (oc * self.in_ch + ic) * k3;
                for kz in 0..k {
                    for ky in 0..k {
                        for kx in 0..k {
                            let wv = weights[wbase + (kz * k + ky) * k + kx];
                            if wv == 0.0 {
                                continue;
                            }
                            // dx[p] += w[t] * dy[p - (t - pad)]
                            let dz = pad as isize - kz as isize;
                            let dyk = pad as isize - ky as isize;
                            let dxk = pad as isize - kx as isize;
                            axpy_shifted(dxc, dyc, [d, wd, h], [dz, dyk, dxk], wv);
                        }
                    }
                }
            }
        });
        Tensor4::from_vec([ci, d, wd, h], dx)
    }
}

/// `dst[z,y,x] += w * src[z+dz, y+dy, x+dx]` over the in-bounds overlap.
#[inline]
fn axpy_shifted(dst: &mut [f64], src: &[f64], [d, wd, h]: [usize; 3], shift: [isize; 3], w: f64) {
    let [dz, dy, dx] = shift;
    let z0 = (-dz).max(0) as usize;
    let z1 = ((d as isize - dz).min(d as isize)).max(0) as usize;
    let y0 = (-dy).max(0) as usize;
    let y1 = ((wd as isize - dy).min(wd as isize)).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = ((h as isize - dx).min(h as isize)).max(0) as usize;
    if x0 >= x1 {
        return;
    }
    for z in z0..z1 {
        let zs = (z as isize + dz) as usize;
        for y in y0..y1 {
            let ys = (y as isize + dy) as usize;
            let drow = &mut dst[(z * wd + y) * h + x0..(z * wd + y) * h + x1];
            let srow = &src[(zs * wd + ys) * h + ((x0 as isize + dx) as usize)
                ..(zs * wd + ys) * h + ((x1 as isize + dx) as usize)];
            for (dv, sv) in drow.iter_mut().zip(srow) {
                *dv += w * sv;
            }
        }
    }
}

/// `Σ_z,y,x a[z,y,x] * b[z+dz, y+dy, x+dx]` over the in-bounds overlap.
#[inline]
fn dot_shifted(a: &[f64], b: &[f64], [d, wd, h]: [usize; 3], shift: [isize; 3]) -> f64 {
    let [dz, dy, dx] = shift;
    let z0 = (-dz).max(0) as usize;
    let z1 = ((d as isize - dz).min(d as isize)).max(0) as usize;
    let y0 = (-dy).max(0) as usize;
    let y1 = ((wd as isize - dy).min(wd as isize)).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = ((h as isize - dx).min(h as isize)).max(0) as usize;
    if x0 >= x1 {
        return 0.0;
    }
    let mut acc = 0.0;
    for z in z0..z1 {
        let zs = (z as isize + dz) as usize;
        for y in y0..y1 {
            let ys = (y as isize + dy) as usize;
            let arow = &a[(z * wd + y) * h + x0..(z * wd + y) * h + x1];
            let brow = &b[(zs * wd + ys) * h + ((x0 as isize + dx) as usize)
                ..(zs * wd + ys) * h + ((x1 as isize + dx) as usize)];
            for (av, bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
        }
    }
    acc
}

/// Transposed convolution with kernel 2, stride 2: doubles each spatial dim.
/// Because stride equals kernel size, each output voxel receives exactly one
/// tap, so both passes are simple gathers.
#[derive(Debug, Clone)]
pub struct TransposedConv3d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl TransposedConv3d {
    pub fn new<R: Rng + ?Sized>(
        pool: &mut ParamPool,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        rng: &mut R,
    ) -> Self {
        let w_data = he_normal(rng, in_ch * out_ch * 8, in_ch);
        let w = pool.add(format!("{name}.w"), vec![in_ch, out_ch, 2, 2, 2], w_data);
        let b = pool.add(format!("{name}.b"), vec![out_ch], vec![0.0; out_ch]);
        TransposedConv3d {
            in_ch,
            out_ch,
            w,
            b,
        }
    }

    pub fn forward(&self, pool: &ParamPool, x: &Tensor4) -> Tensor4 {
        let [ci, d, wd, h] = x.shape();
        assert_eq!(ci, self.in_ch);
        let (od, ow, oh) = (2 * d, 2 * wd, 2 * h);
        let on = od * ow * oh;
        let weights = pool.get(self.w);
        let bias = pool.get(self.b);
        let mut out = vec![0.0f64; self.out_ch * on];
        out.par_chunks_mut(on).enumerate().for_each(|(oc, ochan)| {
            for z in 0..od {
                let (zi, dz) = (z / 2, z % 2);
                for y in 0..ow {
                    let (yi, dy) = (y / 2, y % 2);
                    for xo in 0..oh {
                        let (xi, dx) = (xo / 2, xo % 2);
                        let mut acc = bias[oc];
                        for ic in 0..self.in_ch {
                            let wv = weights[((ic * self.out_ch + oc) * 2 + dz) * 4 + dy * 2 + dx];
                            acc += wv * x.channel(ic)[(zi * wd + yi) * h + xi];
                        }
                        ochan[(z * ow + y) * oh + xo] = acc;
                    }
                }
            }
        });
        Tensor4::from_vec([self.out_ch, od, ow, oh], out)
    }

    pub fn backward(
        &self,
        pool: &ParamPool,
        x: &Tensor4,
        dy: &Tensor4,
        grads: &mut GradPool,
    ) -> Tensor4 {
        let [ci, d, wd, h] = x.shape();
        let [co, od, ow, oh] = dy.shape();
        assert_eq!(co, self.out_ch);
        let n = d * wd * h;
        let weights = pool.get(self.w);
        {
            let db = grads.get_mut(self.b);
            for oc in 0..self.out_ch {
                db[oc] += dy.channel(oc).iter().sum::<f64>();
            }
        }
        {
            let dw = grads.get_mut(self.w);
            dw.par_chunks_mut(self.out_ch * 8)
                .enumerate()
                .for_each(|(ic, dwic)| {
                    let xc = x.channel(ic);
                    for oc in 0..self.out_ch {
                        let dyc = dy.channel(oc);
                        for dz in 0..2 {
                            for dyo in 0..2 {
                                for dx in 0..2 {
                                    let mut acc = 0.0;
                                    for zi in 0..d {
                                        for yi in 0..wd {
                                            for xi in 0..h {
                                                acc += xc[(zi * wd + yi) * h + xi]
                                                    * dyc[((2 * zi + dz) * ow + 2 * yi + dyo) * oh
                                                        + 2 * xi + dx];
                                            }
                                        }
                                    }
                                    dwic[(oc * 2 + dz) * 4 + dyo * 2 + dx] += acc;
                                }
                            }
                        }
                    }
                });
        }
        let mut dx = vec![0.0f64; ci * n];
        dx.par_chunks_mut(n).enumerate().for_each(|(ic, dxc)| {
            for oc in 0..self.out_ch {
                let dyc = dy.channel(oc);
                for zi in 0..d {
                    for yi in 0..wd {
                        for xi in 0..h {
                            let mut acc = 0.0;
                            for dz in 0..2 {
                                for dyo in 0..2 {
                                    for dx3 in 0..2 {
                                        let wv = weights
                                            [((ic * self.out_ch + oc) * 2 + dz) * 4 + dyo * 2 + dx3];
                                        acc += wv
                                            * dyc[((2 * zi + dz) * ow + 2 * yi + dyo) * oh
                                                + 2 * xi + dx3];
                                    }
                                }
                            }
                            dxc[(zi * wd + yi) * h + xi] += acc;
                        }
                    }
                }
            }
        });
        let _ = od;
        Tensor4::from_vec([ci, d, wd, h], dx)
    }
}

/// Per-channel instance normalization with learned affine.
#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub channels: usize,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct InormCtx {
    pub xhat: Tensor4,
    pub inv_std: Vec<f64>,
}

impl InstanceNorm {
    pub fn new(pool: &mut ParamPool, name: &str, channels: usize) -> Self {
        let gamma = pool.add(format!("{name}.gamma"), vec![channels], vec![1.0; channels]);
        let beta = pool.add(format!("{name}.beta"), vec![channels], vec![0.0; channels]);
        InstanceNorm {
            channels,
            gamma,
            beta,
            eps: 1e-5,
        }
    }

    pub fn forward(&self, pool: &ParamPool, x: &Tensor4) -> (Tensor4, InormCtx) {
        let n = x.voxels();
        let gamma = pool.get(self.gamma);
        let beta = pool.get(self.beta);
        let mut xhat = Tensor4::zeros(x.shape());
        let mut y = Tensor4::zeros(x.shape());
        let mut inv_std = vec![0.0f64; self.channels];
        for c in 0..self.channels {
            let xc = x.channel(c);
            let mean = xc.iter().sum::<f64>() / n as f64;
            let var = xc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[c] = istd;
            let xh = xhat.channel_mut(c);
            for (o, v) in xh.iter_mut().zip(xc) {
                *o = (v - mean) * istd;
            }
            let yc = y.channel_mut(c);
            for (o, v) in yc.iter_mut().zip(xhat.channel(c)) {
                *o = gamma[c] * v + beta[c];
            }
        }
        (y, InormCtx { xhat, inv_std })
    }

    pub fn backward(
        &self,
        pool: &ParamPool,
        ctx: &InormCtx,
        dy: &Tensor4,
        grads: &mut GradPool,
    ) -> Tensor4 {
        let n = dy.voxels();
        let gamma = pool.get(self.gamma);
        let mut dx = Tensor4::zeros(dy.shape());
        let mut dgamma = vec![0.0f64; self.channels];
        let mut dbeta = vec![0.0f64; self.channels];
        for c in 0..self.channels {
            let dyc = dy.channel(c);
            let xh = ctx.xhat.channel(c);
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for (dv, xv) in dyc.iter().zip(xh) {
                sum_dy += dv;
                sum_dy_xhat += dv * xv;
            }
            dgamma[c] += sum_dy_xhat;
            dbeta[c] += sum_dy;
            let g = gamma[c];
            let istd = ctx.inv_std[c];
            let dxc = dx.channel_mut(c);
            let nf = n as f64;
            for i in 0..n {
                let dxhat = dyc[i] * g;
                dxc[i] = istd / nf * (nf * dxhat - g * sum_dy - xh[i] * g * sum_dy_xhat);
            }
        }
        for (gslot, v) in grads.get_mut(self.gamma).iter_mut().zip(&dgamma) {
            *gslot += v;
        }
        for (gslot, v) in grads.get_mut(self.beta).iter_mut().zip(&dbeta) {
            *gslot += v;
        }
        dx
    }
}

/// LeakyReLU with configurable negative slope.
pub fn leaky_relu(x: &Tensor4, slope: f64) -> Tensor4 {
    let mut y = x.clone();
    y.data_mut()
        .iter_mut()
        .for_each(|v| *v = if *v > 0.0 { *v } else { slope * *v });
    y
}

pub fn leaky_relu_backward(x: &Tensor4, dy: &Tensor4, slope: f64) -> Tensor4 {
    let mut dx = dy.clone();
    for (d, v) in dx.data_mut().iter_mut().zip(x.data()) {
        if *v <= 0.0 {
            *d *= slope;
        }
    }
    dx
}

/// 2×2×2 max-pooling with stride 2; requires even spatial dims.
#[derive(Debug, Clone, Copy)]
pub struct MaxPool3d;

impl MaxPool3d {
    pub fn forward(&self, x: &Tensor4) -> (Tensor4, Vec<u32>) {
        let [c, d, wd, h] = x.shape();
        assert!(d % 2 == 0 && wd % 2 == 0 && h % 2 == 0, "even dims required");
        let (od, ow, oh) = (d / 2, wd / 2, h / 2);
        let on = od * ow * oh;
        let mut y = Tensor4::zeros([c, od, ow, oh]);
        let mut argmax = vec![0u32; c * on];
        for ch in 0..c {
            let xc = x.channel(ch);
            let yc = y.channel_mut(ch);
            let am = &mut argmax[ch * on..(ch + 1) * on];
            for z in 0..od {
                for yy in 0..ow {
                    for xx in 0..oh {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_idx = 0usize;
                        for dz in 0..2 {
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let idx =
                                        ((2 * z + dz) * wd + 2 * yy + dy) * h + 2 * xx + dx;
                                    if xc[idx] > best {
                                        best = xc[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                        }
                        yc[(z * ow + yy) * oh + xx] = best;
                        am[(z * ow + yy) * oh + xx] = (ch * d * wd * h + best_idx) as u32;
                    }
                }
            }
        }
        (y, argmax)
    }

    pub fn backward(&self, in_shape: [usize; 4], argmax: &[u32], dy: &Tensor4) -> Tensor4 {
        let mut dx = Tensor4::zeros(in_shape);
        let data = dx.data_mut();
        for (i, dv) in dy.data().iter().enumerate() {
            data[argmax[i] as usize] += dv;
        }
        dx
    }
}

/// Concurrent spatial and channel squeeze-and-excitation; the two
/// recalibrations are combined by addition.
#[derive(Debug, Clone)]
pub struct ScSe {
    pub channels: usize,
    pub reduced: usize,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub ws: ParamId,
    pub bs: ParamId,
}

#[derive(Debug, Clone)]
pub struct ScSeCtx {
    pub z: Vec<f64>,
    pub h_pre: Vec<f64>,
    pub h_act: Vec<f64>,
    pub gate_c: Vec<f64>,
    pub t_map: Vec<f64>,
    pub gate_s: Vec<f64>,
}

impl ScSe {
    pub fn new<R: Rng + ?Sized>(
        pool: &mut ParamPool,
        name: &str,
        channels: usize,
        reduction: usize,
        rng: &mut R,
    ) -> Self {
        let reduced = (channels / reduction).max(1);
        let w1 = pool.add(
            format!("{name}.w1"),
            vec![reduced, channels],
            he_normal(rng, reduced * channels, channels),
        );
        let b1 = pool.add(format!("{name}.b1"), vec![reduced], vec![0.0; reduced]);
        let w2 = pool.add(
            format!("{name}.w2"),
            vec![channels, reduced],
            he_normal(rng, channels * reduced, reduced),
        );
        let b2 = pool.add(format!("{name}.b2"), vec![channels], vec![0.0; channels]);
        let ws = pool.add(
            format!("{name}.ws"),
            vec![channels],
            he_normal(rng, channels, channels),
        );
        let bs = pool.add(format!("{name}.bs"), vec![1], vec![0.0]);
        ScSe {
            channels,
            reduced,
            w1,
            b1,
            w2,
            b2,
            ws,
            bs,
        }
    }

    pub fn forward(&self, pool: &ParamPool, x: &Tensor4) -> (Tensor4, ScSeCtx) {
        let c = self.channels;
        let n = x.voxels();
        let nf = n as f64;
        let w1 = pool.get(self.w1);
        let b1 = pool.get(self.b1);
        let w2 = pool.get(self.w2);
        let b2 = pool.get(self.b2);
        let ws = pool.get(self.ws);
        let bs = pool.get(self.bs);

        // channel squeeze: GAP -> FC -> ReLU -> FC -> sigmoid
        let z: Vec<f64> = (0..c).map(|ch| x.channel(ch).iter().sum::<f64>() / nf).collect();
        let h_pre: Vec<f64> = (0..self.reduced)
            .map(|r| b1[r] + (0..c).map(|ch| w1[r * c + ch] * z[ch]).sum::<f64>())
            .collect();
        let h_act: Vec<f64> = h_pre.iter().map(|v| v.max(0.0)).collect();
        let gate_c: Vec<f64> = (0..c)
            .map(|ch| {
                let s = b2[ch]
                    + (0..self.reduced)
                        .map(|r| w2[ch * self.reduced + r] * h_act[r])
                        .sum::<f64>();
                sigmoid(s)
            })
            .collect();

        // spatial squeeze: 1×1×1 conv to one channel -> sigmoid
        let mut t_map = vec![bs[0]; n];
        for ch in 0..c {
            let xc = x.channel(ch);
            let wv = ws[ch];
            for (t, v) in t_map.iter_mut().zip(xc) {
                *t += wv * v;
            }
        }
        let gate_s: Vec<f64> = t_map.iter().map(|&t| sigmoid(t)).collect();

        let mut y = Tensor4::zeros(x.shape());
        for ch in 0..c {
            let xc = x.channel(ch);
            let yc = y.channel_mut(ch);
            let gc = gate_c[ch];
            for i in 0..n {
                yc[i] = xc[i] * (gc + gate_s[i]);
            }
        }
        (
            y,
            ScSeCtx {
                z,
                h_pre,
                h_act,
                gate_c,
                t_map,
                gate_s,
            },
        )
    }

    pub fn backward(
        &self,
        pool: &ParamPool,
        x: &Tensor4,
        ctx: &ScSeCtx,
        dy: &Tensor4,
        grads: &mut GradPool,
    ) -> Tensor4 {
        let c = self.channels;
        let n = x.voxels();
        let nf = n as f64;
        let w1 = pool.get(self.w1);
        let w2 = pool.get(self.w2);
        let ws = pool.get(self.ws);

        // gate gradients
        let mut dgate_c = vec![0.0f64; c];
        let mut dgate_s = vec![0.0f64; n];
        let mut dx = Tensor4::zeros(x.shape());
        for ch in 0..c {
            let xc = x.channel(ch);
            let dyc = dy.channel(ch);
            let dxc = dx.channel_mut(ch);
            let gc = ctx.gate_c[ch];
            let mut acc = 0.0;
            for i in 0..n {
                acc += dyc[i] * xc[i];
                dgate_s[i] += dyc[i] * xc[i];
                dxc[i] = dyc[i] * (gc + ctx.gate_s[i]);
            }
            dgate_c[ch] = acc;
        }

        // channel branch
        let ds: Vec<f64> = (0..c)
            .map(|ch| dgate_c[ch] * ctx.gate_c[ch] * (1.0 - ctx.gate_c[ch]))
            .collect();
        {
            let dw2 = grads.get_mut(self.w2);
            for ch in 0..c {
                for r in 0..self.reduced {
                    dw2[ch * self.reduced + r] += ds[ch] * ctx.h_act[r];
                }
            }
        }
        {
            let db2 = grads.get_mut(self.b2);
            for ch in 0..c {
                db2[ch] += ds[ch];
            }
        }
        let dh: Vec<f64> = (0..self.reduced)
            .map(|r| {
                let relu_grad = if ctx.h_pre[r] > 0.0 { 1.0 } else { 0.0 };
                relu_grad
                    * (0..c)
                        .map(|ch| ds[ch] * w2[ch * self.reduced + r])
                        .sum::<f64>()
            })
            .collect();
        {
            let dw1 = grads.get_mut(self.w1);
            for r in 0..self.reduced {
                for ch in 0..c {
                    dw1[r * c + ch] += dh[r] * ctx.z[ch];
                }
            }
        }
        {
            let db1 = grads.get_mut(self.b1);
            for r in 0..self.reduced {
                db1[r] += dh[r];
            }
        }
        let dz: Vec<f64> = (0..c)
            .map(|ch| (0..self.reduced).map(|r| dh[r] * w1[r * c + ch]).sum::<f64>())
            .collect();
        for ch in 0..c {
            let add = dz[ch] / nf;
            for v in dx.channel_mut(ch) {
                *v += add;
            }
        }

        // spatial branch
        let dt: Vec<f64> = (0..n)
            .map(|i| dgate_s[i] * ctx.gate_s[i] * (1.0 - ctx.gate_s[i]))
            .collect();
        {
            let dws = grads.get_mut(self.ws);
            for ch in 0..c {
                let xc = x.channel(ch);
                let mut acc = 0.0;
                for i in 0..n {
                    acc += dt[i] * xc[i];
                }
                dws[ch] += acc;
            }
        }
        grads.get_mut(self.bs)[0] += dt.iter().sum::<f64>();
        for ch in 0..c {
            let wv = ws[ch];
            let dxc = dx.channel_mut(ch);
            for i in 0..n {
                dxc[i] += dt[i] * wv;
            }
        }
        dx
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
