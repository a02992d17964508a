use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{log_softmax_in_place, matvec_acc, matvec_t_acc, outer_acc, Tensor};
use crate::params::Params;

/// Sums bias-free projections of the encoder and decoder outputs, applies
/// tanh and maps to label logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    /// `J × E`.
    pub enc_proj: Tensor,
    /// `J × P`.
    pub dec_proj: Tensor,
    /// `V × J`.
    pub output: Tensor,
    pub output_bias: Tensor,
}

/// Log-posteriors over a `T × (U+1)` grid plus what backprop needs.
pub struct JointLattice {
    pub frames: usize,
    pub cols: usize,
    pub vocab: usize,
    /// `T × (U+1) × V`.
    pub log_probs: Vec<f64>,
    hidden: Vec<f64>,
}

impl Joint {
    pub fn new<R: Rng + ?Sized>(enc_dim: usize, dec_dim: usize, joint_dim: usize, vocab: usize, rng: &mut R) -> Self {
        Joint {
            enc_proj: Tensor::glorot(&[joint_dim, enc_dim], enc_dim, joint_dim, rng),
            dec_proj: Tensor::glorot(&[joint_dim, dec_dim], dec_dim, joint_dim, rng),
            output: Tensor::glorot(&[vocab, joint_dim], joint_dim, vocab, rng),
            output_bias: Tensor::zeros(&[vocab]),
        }
    }

    pub fn joint_dim(&self) -> usize {
        self.enc_proj.shape()[0]
    }

    pub fn vocab(&self) -> usize {
        self.output.shape()[0]
    }

    fn project(w: &Tensor, rows: &[f64], n: usize) -> Vec<f64> {
        let (j, d) = (w.shape()[0], w.shape()[1]);
        let mut out = vec![0.0; n * j];
        for t in 0..n {
            matvec_acc(w.data(), j, d, &rows[t * d..(t + 1) * d], &mut out[t * j..(t + 1) * j]);
        }
        out
    }

    /// Projects `n` encoder rows into the joint space.
    pub fn project_encoder(&self, enc: &[f64], n: usize) -> Vec<f64> {
        Self::project(&self.enc_proj, enc, n)
    }

    pub fn project_decoder(&self, dec: &[f64], n: usize) -> Vec<f64> {
        Self::project(&self.dec_proj, dec, n)
    }

    /// Logits from already projected encoder and decoder vectors; also returns
    /// the tanh activation.
    pub fn logits_projected(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y).tanh()).collect();
        let mut z = self.output_bias.data().to_vec();
        matvec_acc(self.output.data(), self.vocab(), h.len(), &h, &mut z);
        (z, h)
    }

    /// Unnormalized label scores for one encoder frame and decoder output.
    pub fn logits(&self, enc: &[f64], dec: &[f64]) -> Result<Vec<f64>> {
        let (e, p) = (self.enc_proj.shape()[1], self.dec_proj.shape()[1]);
        if enc.len() != e || dec.len() != p {
            return Err(Error::shape(format!(
                "joint expects encoder {e} and decoder {p}, got {} and {}",
                enc.len(),
                dec.len()
            )));
        }
        let a = self.project_encoder(enc, 1);
        let b = self.project_decoder(dec, 1);
        Ok(self.logits_projected(&a, &b).0)
    }

    /// Log-softmax posteriors for every `(t, u)` pair.
    pub fn lattice(&self, a: &[f64], frames: usize, b: &[f64], cols: usize) -> JointLattice {
        let (j, v) = (self.joint_dim(), self.vocab());
        let mut log_probs = Vec::with_capacity(frames * cols * v);
        let mut hidden = Vec::with_capacity(frames * cols * j);
        for t in 0..frames {
            for u in 0..cols {
                let (mut z, h) = self.logits_projected(&a[t * j..(t + 1) * j], &b[u * j..(u + 1) * j]);
                log_softmax_in_place(&mut z);
                log_probs.extend_from_slice(&z);
                hidden.extend_from_slice(&h);
            }
        }
        JointLattice { frames, cols, vocab: v, log_probs, hidden }
    }

    /// Backpropagates `d log_probs` through the lattice. Returns gradients on
    /// the projected encoder rows and projected decoder rows.
    pub fn lattice_backward(&self, lat: &JointLattice, d_log_probs: &[f64], grads: &mut Joint) -> (Vec<f64>, Vec<f64>) {
        let (j, v) = (self.joint_dim(), lat.vocab);
        let mut da = vec![0.0; lat.frames * j];
        let mut db = vec![0.0; lat.cols * j];
        let mut dz = vec![0.0; v];
        let mut dh = vec![0.0; j];
        for t in 0..lat.frames {
            for u in 0..lat.cols {
                let cell = t * lat.cols + u;
                let lp = &lat.log_probs[cell * v..(cell + 1) * v];
                let g = &d_log_probs[cell * v..(cell + 1) * v];
                let total: f64 = g.iter().sum();
                if total == 0.0 && g.iter().all(|&x| x == 0.0) {
                    continue;
                }
                for k in 0..v {
                    dz[k] = g[k] - lp[k].exp() * total;
                }
                let h = &lat.hidden[cell * j..(cell + 1) * j];
                outer_acc(grads.output.data_mut(), &dz, h);
                grads.output_bias.data_mut().iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
                dh.iter_mut().for_each(|x| *x = 0.0);
                matvec_t_acc(self.output.data(), v, j, &dz, &mut dh);
                for k in 0..j {
                    let dp = dh[k] * (1.0 - h[k] * h[k]);
                    da[t * j + k] += dp;
                    db[u * j + k] += dp;
                }
            }
        }
        (da, db)
    }

    fn project_backward(w: &Tensor, rows: &[f64], n: usize, d_proj: &[f64], gw: &mut Tensor) -> Vec<f64> {
        let (j, d) = (w.shape()[0], w.shape()[1]);
        let mut dx = vec![0.0; n * d];
        for t in 0..n {
            outer_acc(gw.data_mut(), &d_proj[t * j..(t + 1) * j], &rows[t * d..(t + 1) * d]);
            matvec_t_acc(w.data(), j, d, &d_proj[t * j..(t + 1) * j], &mut dx[t * d..(t + 1) * d]);
        }
        dx
    }

    pub fn project_encoder_backward(&self, enc: &[f64], n: usize, da: &[f64], grads: &mut Joint) -> Vec<f64> {
        Self::project_backward(&self.enc_proj, enc, n, da, &mut grads.enc_proj)
    }

    pub fn project_decoder_backward(&self, dec: &[f64], n: usize, db: &[f64], grads: &mut Joint) -> Vec<f64> {
        Self::project_backward(&self.dec_proj, dec, n, db, &mut grads.dec_proj)
    }
}

impl Params for Joint {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("encoder/kernel".to_string(), &self.enc_proj),
            ("decoder/kernel".to_string(), &self.dec_proj),
            ("output/kernel".to_string(), &self.output),
            ("output/bias".to_string(), &self.output_bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("encoder/kernel".to_string(), &mut self.enc_proj),
            ("decoder/kernel".to_string(), &mut self.dec_proj),
            ("output/kernel".to_string(), &mut self.output),
            ("output/bias".to_string(), &mut self.output_bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_uniform_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut j = Joint::new(6, 4, 5, 75, &mut rng);
        j.zero();
        let mut z = j.logits(&[0.3; 6], &[-0.2; 4]).unwrap();
        assert!(z.iter().all(|&x| x == z[0]));
        log_softmax_in_place(&mut z);
        for x in z {
            assert!((x.exp() - 1.0 / 75.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bounded_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let j = Joint::new(6, 4, 5, 7, &mut rng);
        let z = j.logits(&[1e6; 6], &[-1e6; 4]).unwrap();
        assert!(z.iter().all(|x| x.is_finite()));
        let mut a = j.logits(&[0.5; 6], &[0.1; 4]).unwrap();
        let mut b: Vec<f64> = a.iter().map(|x| x + 37.5).collect();
        log_softmax_in_place(&mut a);
        log_softmax_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let total: f64 = a.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shape_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let j = Joint::new(6, 4, 5, 7, &mut rng);
        assert!(matches!(j.logits(&[0.0; 5], &[0.0; 4]), Err(Error::ShapeError(_))));
    }
}
