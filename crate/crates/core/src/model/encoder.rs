use rand::Rng;

use super::lstm::{LstmCell, StepCache};
use crate::linalg::Tensor;
use crate::params::{prefixed, prefixed_mut, Params};

/// One bidirectional layer: a forward and a backward cell whose outputs are
/// concatenated per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub layers: Vec<BiLstmLayer>,
}

pub struct EncoderCache {
    frames: usize,
    layers: Vec<(Vec<StepCache>, Vec<StepCache>)>,
}

impl BiLstmLayer {
    fn forward_pass(&self, xs: &[f64], n: usize) -> (Vec<f64>, Vec<StepCache>, Vec<StepCache>) {
        let h = self.forward.hidden;
        let (fo, fc) = self.forward.run(xs, n, false);
        let (bo, bc) = self.backward.run(xs, n, true);
        let mut out = vec![0.0; n * 2 * h];
        for t in 0..n {
            out[t * 2 * h..t * 2 * h + h].copy_from_slice(&fo[t * h..(t + 1) * h]);
            out[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&bo[t * h..(t + 1) * h]);
        }
        (out, fc, bc)
    }
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|i| {
                let d = if i == 0 { input_dim } else { 2 * hidden };
                BiLstmLayer {
                    forward: LstmCell::new(d, hidden, None, rng),
                    backward: LstmCell::new(d, hidden, None, rng),
                }
            })
            .collect();
        Encoder { layers }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers.last().map_or(0, |l| l.forward.hidden)
    }

    /// `xs` is `n × input_dim`; returns `n × output_dim`.
    pub fn forward(&self, xs: &[f64], n: usize) -> (Vec<f64>, EncoderCache) {
        let mut cur = xs.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, fc, bc) = layer.forward_pass(&cur, n);
            caches.push((fc, bc));
            cur = out;
        }
        (cur, EncoderCache { frames: n, layers: caches })
    }

    pub fn backward(&self, cache: &EncoderCache, d_out: &[f64], grads: &mut Encoder) -> Vec<f64> {
        let n = cache.frames;
        let mut d = d_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let h = layer.forward.hidden;
            let mut df = vec![0.0; n * h];
            let mut db = vec![0.0; n * h];
            for t in 0..n {
                df[t * h..(t + 1) * h].copy_from_slice(&d[t * 2 * h..t * 2 * h + h]);
                db[t * h..(t + 1) * h].copy_from_slice(&d[t * 2 * h + h..(t + 1) * 2 * h]);
            }
            let (fc, bc) = &cache.layers[i];
            let g = &mut grads.layers[i];
            let mut dx = layer.forward.run_backward(fc, &df, false, &mut g.forward);
            let dxb = layer.backward.run_backward(bc, &db, true, &mut g.backward);
            dx.iter_mut().zip(&dxb).for_each(|(a, b)| *a += b);
            d = dx;
        }
        d
    }
}

impl Params for Encoder {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            v.extend(prefixed(&format!("rnn{i}/fw"), l.forward.params()));
            v.extend(prefixed(&format!("rnn{i}/bw"), l.backward.params()));
        }
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            v.extend(prefixed_mut(&format!("rnn{i}/fw"), l.forward.params_mut()));
            v.extend(prefixed_mut(&format!("rnn{i}/bw"), l.backward.params_mut()));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_sequence_gives_empty_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = Encoder::new(5, 3, 2, &mut rng);
        assert!(enc.forward(&[], 0).0.is_empty());
    }

    #[test]
    fn reversal_with_swapped_directions_reverses_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, h, n) = (5, 3, 6);
        let enc = Encoder::new(d, h, 1, &mut rng);
        let xs: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rev: Vec<f64> = (0..n).rev().flat_map(|t| xs[t * d..(t + 1) * d].to_vec()).collect();
        let mut swapped = enc.clone();
        let l = &mut swapped.layers[0];
        std::mem::swap(&mut l.forward, &mut l.backward);
        let (a, _) = enc.forward(&xs, n);
        let (b, _) = swapped.forward(&rev, n);
        for t in 0..n {
            let row_a = &a[t * 2 * h..(t + 1) * 2 * h];
            let row_b = &b[(n - 1 - t) * 2 * h..(n - t) * 2 * h];
            // forward half of one equals backward half of the other
            for j in 0..h {
                assert!((row_a[j] - row_b[h + j]).abs() < 1e-12);
                assert!((row_a[h + j] - row_b[j]).abs() < 1e-12);
            }
        }
    }
}
