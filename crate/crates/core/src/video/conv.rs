use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Tensor};
use crate::params::Params;

pub const GN_EPS: f64 = 1e-9;

/// One 3×3×3 convolution, group norm, ReLU and 2×2 spatial max-pool block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub groups: usize,
}

impl ConvBlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.groups == 0 {
            return Err(Error::ConfigError(format!("degenerate conv block {self:?}")));
        }
        if self.out_channels % self.groups != 0 {
            return Err(Error::ConfigError(format!(
                "{} groups do not divide {} channels",
                self.groups, self.out_channels
            )));
        }
        Ok(())
    }

    /// Kernel, bias and group-norm affine terms.
    pub fn num_params(&self) -> usize {
        27 * self.in_channels * self.out_channels + 3 * self.out_channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub spec: ConvBlockSpec,
    /// `[out, in, kt, kh, kw]`.
    pub kernel: Tensor,
    pub bias: Tensor,
    pub gn_gamma: Tensor,
    pub gn_beta: Tensor,
}

impl ConvBlock {
    pub fn new<R: Rng + ?Sized>(spec: ConvBlockSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let (ci, co) = (spec.in_channels, spec.out_channels);
        Ok(ConvBlock {
            spec,
            kernel: Tensor::glorot(&[co, ci, 3, 3, 3], 27 * ci, 27 * co, rng),
            bias: Tensor::zeros(&[co]),
            gn_gamma: Tensor::filled(&[co], 1.0),
            gn_beta: Tensor::zeros(&[co]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }
}

impl Params for ConvBlock {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("kernel".into(), &self.kernel),
            ("bias".into(), &self.bias),
            ("gn_gamma".into(), &self.gn_gamma),
            ("gn_beta".into(), &self.gn_beta),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("kernel".into(), &mut self.kernel),
            ("bias".into(), &mut self.bias),
            ("gn_gamma".into(), &mut self.gn_gamma),
            ("gn_beta".into(), &mut self.gn_beta),
        ]
    }
}

/// Activations kept for the backward pass. Layouts are `[t][c][y][x]`.
#[derive(Debug, Clone)]
pub struct BlockCache {
    frames: usize,
    height: usize,
    width: usize,
    input: Vec<f64>,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    activated: Vec<f64>,
    pool_argmax: Vec<u32>,
}

#[inline]
fn src_frame(t: usize, kt: usize, frames: usize) -> usize {
    (t + kt).saturating_sub(1).min(frames - 1)
}

/// `[t][c][y][x]` layout, `h` and `w` even. Returns the pooled output
/// (`T × out × h/2 × w/2`) and the cache.
pub fn conv3d_block(block: &ConvBlock, input: &[f64], frames: usize, h: usize, w: usize) -> Result<(Vec<f64>, BlockCache)> {
    let spec = block.spec;
    spec.validate()?;
    let (ci, co) = (spec.in_channels, spec.out_channels);
    if input.len() != frames * ci * h * w {
        return Err(Error::shape(format!(
            "conv block expects {frames}x{ci}x{h}x{w} input, got {} values",
            input.len()
        )));
    }
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::ConfigError(format!("spatial size {h}x{w} must be even for 2x2 pooling")));
    }
    let plane = h * w;
    let kernel = block.kernel.data();
    let mut conv = vec![0.0; frames * co * plane];
    for t in 0..frames {
        for o in 0..co {
            let out = &mut conv[(t * co + o) * plane..(t * co + o + 1) * plane];
            out.iter_mut().for_each(|v| *v = block.bias.data()[o]);
            for kt in 0..3 {
                let st = src_frame(t, kt, frames);
                for i in 0..ci {
                    let src = &input[(st * ci + i) * plane..(st * ci + i + 1) * plane];
                    for kh in 0..3 {
                        for kw in 0..3 {
                            let wv = kernel[(((o * ci + i) * 3 + kt) * 3 + kh) * 3 + kw];
                            shifted_axpy(wv, src, out, h, w, kh, kw);
                        }
                    }
                }
            }
        }
    }

    let groups = spec.groups;
    let cpg = co / groups;
    let gsize = cpg * plane;
    let mut normalized = vec![0.0; conv.len()];
    let mut inv_std = vec![0.0; frames * groups];
    let mut activated = vec![0.0; conv.len()];
    for t in 0..frames {
        for g in 0..groups {
            let base = (t * co + g * cpg) * plane;
            let x = &conv[base..base + gsize];
            let mean = x.iter().sum::<f64>() / gsize as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / gsize as f64;
            let is = 1.0 / (var + GN_EPS).sqrt();
            inv_std[t * groups + g] = is;
            for c in 0..cpg {
                let ch = g * cpg + c;
                let (gam, bet) = (block.gn_gamma.data()[ch], block.gn_beta.data()[ch]);
                for p in 0..plane {
                    let idx = base + c * plane + p;
                    let n = (conv[idx] - mean) * is;
                    normalized[idx] = n;
                    activated[idx] = (gam * n + bet).max(0.0);
                }
            }
        }
    }

    let (ph, pw) = (h / 2, w / 2);
    let mut pooled = vec![0.0; frames * co * ph * pw];
    let mut pool_argmax = vec![0u32; pooled.len()];
    for tc in 0..frames * co {
        let src = &activated[tc * plane..(tc + 1) * plane];
        for y in 0..ph {
            for x in 0..pw {
                let cands = [
                    (2 * y) * w + 2 * x,
                    (2 * y) * w + 2 * x + 1,
                    (2 * y + 1) * w + 2 * x,
                    (2 * y + 1) * w + 2 * x + 1,
                ];
                let mut best = cands[0];
                for &c in &cands[1..] {
                    if src[c] > src[best] {
                        best = c;
                    }
                }
                let oi = tc * ph * pw + y * pw + x;
                pooled[oi] = src[best];
                pool_argmax[oi] = best as u32;
            }
        }
    }
    Ok((
        pooled,
        BlockCache {
            frames,
            height: h,
            width: w,
            input: input.to_vec(),
            normalized,
            inv_std,
            activated,
            pool_argmax,
        },
    ))
}

/// `out[y][x] += wv * src[y + kh - 1][x + kw - 1]` with zero padding.
#[inline]
fn shifted_axpy(wv: f64, src: &[f64], out: &mut [f64], h: usize, w: usize, kh: usize, kw: usize) {
    let (y0, y1) = if kh == 0 { (1, h) } else if kh == 2 { (0, h - 1) } else { (0, h) };
    let (x0, x1) = if kw == 0 { (1, w) } else if kw == 2 { (0, w - 1) } else { (0, w) };
    for y in y0..y1 {
        let sy = y + kh - 1;
        let s = &src[sy * w + x0 + kw - 1..sy * w + x1 + kw - 1];
        axpy(wv, s, &mut out[y * w + x0..y * w + x1]);
    }
}

#[inline]
fn shifted_dot(src: &[f64], dout: &[f64], h: usize, w: usize, kh: usize, kw: usize) -> f64 {
    let (y0, y1) = if kh == 0 { (1, h) } else if kh == 2 { (0, h - 1) } else { (0, h) };
    let (x0, x1) = if kw == 0 { (1, w) } else if kw == 2 { (0, w - 1) } else { (0, w) };
    let mut acc = 0.0;
    for y in y0..y1 {
        let sy = y + kh - 1;
        acc += dot(&src[sy * w + x0 + kw - 1..sy * w + x1 + kw - 1], &dout[y * w + x0..y * w + x1]);
    }
    acc
}

#[inline]
fn shifted_axpy_transpose(wv: f64, dout: &[f64], dsrc: &mut [f64], h: usize, w: usize, kh: usize, kw: usize) {
    let (y0, y1) = if kh == 0 { (1, h) } else if kh == 2 { (0, h - 1) } else { (0, h) };
    let (x0, x1) = if kw == 0 { (1, w) } else if kw == 2 { (0, w - 1) } else { (0, w) };
    for y in y0..y1 {
        let sy = y + kh - 1;
        axpy(
            wv,
            &dout[y * w + x0..y * w + x1],
            &mut dsrc[sy * w + x0 + kw - 1..sy * w + x1 + kw - 1],
        );
    }
}

/// Backward pass. Accumulates parameter gradients into `grads` and returns the
/// gradient with respect to the block input when `need_input_grad` is set.
pub fn conv3d_block_backward(
    block: &ConvBlock,
    cache: &BlockCache,
    d_pooled: &[f64],
    grads: &mut ConvBlock,
    need_input_grad: bool,
) -> Vec<f64> {
    let spec = block.spec;
    let (ci, co) = (spec.in_channels, spec.out_channels);
    let (frames, h, w) = (cache.frames, cache.height, cache.width);
    let plane = h * w;
    let (ph, pw) = (h / 2, w / 2);

    // max-pool and ReLU
    let mut d_act = vec![0.0; frames * co * plane];
    for tc in 0..frames * co {
        for k in 0..ph * pw {
            let oi = tc * ph * pw + k;
            let src = tc * plane + cache.pool_argmax[oi] as usize;
            if cache.activated[src] > 0.0 {
                d_act[src] += d_pooled[oi];
            }
        }
    }

    // group norm
    let groups = spec.groups;
    let cpg = co / groups;
    let gsize = (cpg * plane) as f64;
    let mut d_conv = vec![0.0; d_act.len()];
    {
        let mut d_gamma = vec![0.0; co];
        let mut d_beta = vec![0.0; co];
        let gamma = block.gn_gamma.data();
        for t in 0..frames {
            for g in 0..groups {
                let base = (t * co + g * cpg) * plane;
                let mut sum_dn = 0.0;
                let mut sum_dn_n = 0.0;
                for c in 0..cpg {
                    let ch = g * cpg + c;
                    let mut sg = 0.0;
                    let mut sb = 0.0;
                    for p in 0..plane {
                        let idx = base + c * plane + p;
                        let dy = d_act[idx];
                        let n = cache.normalized[idx];
                        sg += dy * n;
                        sb += dy;
                        let dn = dy * gamma[ch];
                        sum_dn += dn;
                        sum_dn_n += dn * n;
                    }
                    d_gamma[ch] += sg;
                    d_beta[ch] += sb;
                }
                let is = cache.inv_std[t * groups + g];
                let (mdn, mdnn) = (sum_dn / gsize, sum_dn_n / gsize);
                for c in 0..cpg {
                    let ch = g * cpg + c;
                    for p in 0..plane {
                        let idx = base + c * plane + p;
                        let dn = d_act[idx] * gamma[ch];
                        d_conv[idx] = is * (dn - mdn - cache.normalized[idx] * mdnn);
                    }
                }
            }
        }
        grads.gn_gamma.add_assign(&Tensor::from_vec(&[co], d_gamma).expect("sized"));
        grads.gn_beta.add_assign(&Tensor::from_vec(&[co], d_beta).expect("sized"));
    }

    // convolution
    let kernel = block.kernel.data();
    let mut d_input = if need_input_grad { vec![0.0; cache.input.len()] } else { Vec::new() };
    for t in 0..frames {
        for o in 0..co {
            let dout = &d_conv[(t * co + o) * plane..(t * co + o + 1) * plane];
            grads.bias.data_mut()[o] += dout.iter().sum::<f64>();
            for kt in 0..3 {
                let st = src_frame(t, kt, frames);
                for i in 0..ci {
                    let src_range = (st * ci + i) * plane..(st * ci + i + 1) * plane;
                    for kh in 0..3 {
                        for kw in 0..3 {
                            let kidx = (((o * ci + i) * 3 + kt) * 3 + kh) * 3 + kw;
                            grads.kernel.data_mut()[kidx] +=
                                shifted_dot(&cache.input[src_range.clone()], dout, h, w, kh, kw);
                            if need_input_grad {
                                shifted_axpy_transpose(
                                    kernel[kidx],
                                    dout,
                                    &mut d_input[src_range.clone()],
                                    h,
                                    w,
                                    kh,
                                    kw,
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    d_input
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn block(ci: usize, co: usize, groups: usize, seed: u64) -> ConvBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ConvBlock::new(ConvBlockSpec { in_channels: ci, out_channels: co, groups }, &mut rng).unwrap();
        for v in b.gn_gamma.data_mut() {
            *v = rng.gen_range(0.5..1.5);
        }
        for v in b.gn_beta.data_mut() {
            *v = rng.gen_range(-0.2..0.2);
        }
        b
    }

    #[test]
    fn zero_everything_gives_zero() {
        let mut b = block(3, 4, 2, 0);
        b.zero();
        let (out, _) = conv3d_block(&b, &vec![0.0; 2 * 3 * 8 * 8], 2, 8, 8).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_arithmetic() {
        let b = block(3, 8, 4, 1);
        let (out, _) = conv3d_block(&b, &vec![0.5; 3 * 3 * 16 * 16], 3, 16, 16).unwrap();
        assert_eq!(out.len(), 3 * 8 * 8 * 8);
    }

    #[test]
    fn group_norm_statistics() {
        let b = block(2, 8, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input: Vec<f64> = (0..3 * 2 * 8 * 8).map(|_| rng.gen()).collect();
        let (_, cache) = conv3d_block(&b, &input, 3, 8, 8).unwrap();
        let gsize = 2 * 64;
        for t in 0..3 {
            for g in 0..4 {
                let base = (t * 8 + g * 2) * 64;
                let x = &cache.normalized[base..base + gsize];
                let m = x.iter().sum::<f64>() / gsize as f64;
                let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / gsize as f64;
                assert!(m.abs() < 1e-5);
                assert!((v - 1.0).abs() < 1e-5, "variance {v}");
            }
        }
    }

    #[test]
    fn rejects_bad_groups_and_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ConvBlock::new(ConvBlockSpec { in_channels: 3, out_channels: 6, groups: 4 }, &mut rng).is_err());
        let b = block(3, 4, 2, 0);
        assert!(conv3d_block(&b, &vec![0.0; 10], 1, 4, 4).is_err());
    }

    fn loss(b: &ConvBlock, input: &[f64], proj: &[f64]) -> f64 {
        let (out, _) = conv3d_block(b, input, 3, 4, 4).unwrap();
        out.iter().zip(proj).map(|(a, p)| a * p).sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = block(2, 4, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let input: Vec<f64> = (0..3 * 2 * 16).map(|_| rng.gen()).collect();
        let (out, cache) = conv3d_block(&b, &input, 3, 4, 4).unwrap();
        let proj: Vec<f64> = (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut grads = b.zeros_like();
        let d_in = conv3d_block_backward(&b, &cache, &proj, &mut grads, true);
        let eps = 1e-6;
        let names: Vec<String> = b.params().into_iter().map(|(n, _)| n).collect();
        for name in names {
            let n = b.params().into_iter().find(|(k, _)| *k == name).unwrap().1.len();
            for i in 0..n {
                let mut p = b.clone();
                let mut m = b.clone();
                p.params_mut().into_iter().find(|(k, _)| *k == name).unwrap().1.data_mut()[i] += eps;
                m.params_mut().into_iter().find(|(k, _)| *k == name).unwrap().1.data_mut()[i] -= eps;
                let fd = (loss(&p, &input, &proj) - loss(&m, &input, &proj)) / (2.0 * eps);
                let an = grads.params().into_iter().find(|(k, _)| *k == name).unwrap().1.data()[i];
                assert!((fd - an).abs() <= 1e-5 * (1.0 + fd.abs()), "{name}[{i}]: fd {fd} an {an}");
            }
        }
        for i in 0..input.len() {
            let mut a = input.clone();
            let mut c = input.clone();
            a[i] += eps;
            c[i] -= eps;
            let fd = (loss(&b, &a, &proj) - loss(&b, &c, &proj)) / (2.0 * eps);
            assert!((fd - d_in[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "input[{i}]: fd {fd} an {}", d_in[i]);
        }
    }
}
