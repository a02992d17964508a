use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{matvec_acc, matvec_t_acc, outer_acc, sigmoid, Tensor};
use crate::params::Params;

/// Variance guard inside the gate layer norm.
pub const LN_EPS: f64 = 1e-6;

/// LSTM cell with layer normalization on each of the four gate blocks and an
/// optional bias-free output projection (the projected output is also what
/// feeds back as the recurrent input).
///
/// Gate order in the kernel is input, candidate, forget, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4H × (input_dim + R)` where `R` is the recurrent width.
    pub kernel: Tensor,
    pub bias: Tensor,
    pub ln_gamma: Tensor,
    pub ln_beta: Tensor,
    /// `P × H`.
    pub projection: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    /// Recurrent output: the projection of `h` when projecting, else `h`.
    pub r: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepCache {
    xr: Vec<f64>,
    normalized: Vec<f64>,
    inv_std: [f64; 4],
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, projection: Option<usize>, rng: &mut R) -> Self {
        let rec = projection.unwrap_or(hidden);
        LstmCell {
            input_dim,
            hidden,
            kernel: Tensor::glorot(&[4 * hidden, input_dim + rec], input_dim + rec, 4 * hidden, rng),
            bias: Tensor::zeros(&[4 * hidden]),
            ln_gamma: Tensor::filled(&[4 * hidden], 1.0),
            ln_beta: Tensor::zeros(&[4 * hidden]),
            projection: projection.map(|p| Tensor::glorot(&[p, hidden], hidden, p, rng)),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.projection.as_ref().map_or(self.hidden, |p| p.shape()[0])
    }

    pub fn zero_state(&self) -> LstmState {
        LstmState {
            c: vec![0.0; self.hidden],
            r: vec![0.0; self.output_dim()],
        }
    }

    /// Parameters of one cell: kernel, gate bias, layer-norm gain and shift,
    /// and the projection if present.
    pub fn count(input_dim: usize, hidden: usize, projection: Option<usize>) -> usize {
        let rec = projection.unwrap_or(hidden);
        (input_dim + rec) * hidden * 4 + 3 * 4 * hidden + projection.map_or(0, |p| p * hidden)
    }

    pub fn step(&self, x: &[f64], state: &LstmState) -> Result<(LstmState, StepCache)> {
        if x.len() != self.input_dim || state.r.len() != self.output_dim() || state.c.len() != self.hidden {
            return Err(Error::shape(format!(
                "lstm step: input {} (want {}), recurrent {} (want {})",
                x.len(),
                self.input_dim,
                state.r.len(),
                self.output_dim()
            )));
        }
        Ok(self.step_unchecked(x, state))
    }

    pub(crate) fn step_unchecked(&self, x: &[f64], state: &LstmState) -> (LstmState, StepCache) {
        let hsz = self.hidden;
        let mut xr = Vec::with_capacity(x.len() + state.r.len());
        xr.extend_from_slice(x);
        xr.extend_from_slice(&state.r);
        let mut z = self.bias.data().to_vec();
        matvec_acc(self.kernel.data(), 4 * hsz, xr.len(), &xr, &mut z);

        let mut normalized = vec![0.0; 4 * hsz];
        let mut inv_std = [0.0; 4];
        let mut gates = vec![0.0; 4 * hsz];
        let (gamma, beta) = (self.ln_gamma.data(), self.ln_beta.data());
        for k in 0..4 {
            let blk = &z[k * hsz..(k + 1) * hsz];
            let mean = blk.iter().sum::<f64>() / hsz as f64;
            let var = blk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hsz as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[k] = is;
            for j in 0..hsz {
                let i = k * hsz + j;
                let n = (z[i] - mean) * is;
                normalized[i] = n;
                let a = gamma[i] * n + beta[i];
                gates[i] = if k == 1 { a.tanh() } else { sigmoid(a) };
            }
        }
        let mut c = vec![0.0; hsz];
        let mut tanh_c = vec![0.0; hsz];
        let mut h = vec![0.0; hsz];
        for j in 0..hsz {
            let (ig, gg, fg, og) = (gates[j], gates[hsz + j], gates[2 * hsz + j], gates[3 * hsz + j]);
            c[j] = fg * state.c[j] + ig * gg;
            tanh_c[j] = c[j].tanh();
            h[j] = og * tanh_c[j];
        }
        let r = match &self.projection {
            Some(p) => {
                let mut r = vec![0.0; p.shape()[0]];
                matvec_acc(p.data(), p.shape()[0], hsz, &h, &mut r);
                r
            }
            None => h.clone(),
        };
        (
            LstmState { c: c.clone(), r },
            StepCache {
                xr,
                normalized,
                inv_std,
                gates,
                c_prev: state.c.clone(),
                tanh_c,
                h,
            },
        )
    }

    /// Backpropagates one step. `dr` is the gradient on this step's recurrent
    /// output and `dc` the gradient on its cell state. Returns the gradients on
    /// the step input, the previous recurrent output and the previous cell.
    pub fn step_backward(
        &self,
        cache: &StepCache,
        dr: &[f64],
        dc: &[f64],
        grads: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hsz = self.hidden;
        let dh = match (&self.projection, &mut grads.projection) {
            (Some(p), Some(gp)) => {
                outer_acc(gp.data_mut(), dr, &cache.h);
                let mut dh = vec![0.0; hsz];
                matvec_t_acc(p.data(), p.shape()[0], hsz, dr, &mut dh);
                dh
            }
            _ => dr.to_vec(),
        };
        let g = &cache.gates;
        let mut da = vec![0.0; 4 * hsz];
        let mut dc_prev = vec![0.0; hsz];
        for j in 0..hsz {
            let (ig, gg, fg, og) = (g[j], g[hsz + j], g[2 * hsz + j], g[3 * hsz + j]);
            let tc = cache.tanh_c[j];
            let dcj = dc[j] + dh[j] * og * (1.0 - tc * tc);
            let d_o = dh[j] * tc;
            let d_i = dcj * gg;
            let d_g = dcj * ig;
            let d_f = dcj * cache.c_prev[j];
            dc_prev[j] = dcj * fg;
            da[j] = d_i * ig * (1.0 - ig);
            da[hsz + j] = d_g * (1.0 - gg * gg);
            da[2 * hsz + j] = d_f * fg * (1.0 - fg);
            da[3 * hsz + j] = d_o * og * (1.0 - og);
        }
        let gamma = self.ln_gamma.data();
        let mut dz = vec![0.0; 4 * hsz];
        {
            let gg = grads.ln_gamma.data_mut();
            for i in 0..4 * hsz {
                gg[i] += da[i] * cache.normalized[i];
            }
        }
        grads.ln_beta.data_mut().iter_mut().zip(&da).for_each(|(b, d)| *b += d);
        for k in 0..4 {
            let range = k * hsz..(k + 1) * hsz;
            let mut mean_dn = 0.0;
            let mut mean_dn_n = 0.0;
            for i in range.clone() {
                let dn = da[i] * gamma[i];
                mean_dn += dn;
                mean_dn_n += dn * cache.normalized[i];
            }
            mean_dn /= hsz as f64;
            mean_dn_n /= hsz as f64;
            for i in range {
                let dn = da[i] * gamma[i];
                dz[i] = cache.inv_std[k] * (dn - mean_dn - cache.normalized[i] * mean_dn_n);
            }
        }
        grads.bias.data_mut().iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
        outer_acc(grads.kernel.data_mut(), &dz, &cache.xr);
        let mut dxr = vec![0.0; cache.xr.len()];
        matvec_t_acc(self.kernel.data(), 4 * hsz, cache.xr.len(), &dz, &mut dxr);
        let dr_prev = dxr.split_off(self.input_dim);
        (dxr, dr_prev, dc_prev)
    }

    /// Runs the cell over `n` inputs (row-major `n × input_dim`), optionally in
    /// reverse time order. Outputs are returned in input order.
    pub fn run(&self, xs: &[f64], n: usize, reverse: bool) -> (Vec<f64>, Vec<StepCache>) {
        let out_dim = self.output_dim();
        let mut out = vec![0.0; n * out_dim];
        let mut caches = Vec::with_capacity(n);
        let mut state = self.zero_state();
        for step in 0..n {
            let t = if reverse { n - 1 - step } else { step };
            let (next, cache) = self.step_unchecked(&xs[t * self.input_dim..(t + 1) * self.input_dim], &state);
            out[t * out_dim..(t + 1) * out_dim].copy_from_slice(&next.r);
            caches.push(cache);
            state = next;
        }
        (out, caches)
    }

    /// Backpropagation through time for [`LstmCell::run`]; `d_out` is in input
    /// order. Returns the gradient on the inputs.
    pub fn run_backward(&self, caches: &[StepCache], d_out: &[f64], reverse: bool, grads: &mut LstmCell) -> Vec<f64> {
        let n = caches.len();
        let out_dim = self.output_dim();
        let mut dxs = vec![0.0; n * self.input_dim];
        let mut dr_next = vec![0.0; out_dim];
        let mut dc_next = vec![0.0; self.hidden];
        for step in (0..n).rev() {
            let t = if reverse { n - 1 - step } else { step };
            let mut dr = d_out[t * out_dim..(t + 1) * out_dim].to_vec();
            dr.iter_mut().zip(&dr_next).for_each(|(a, b)| *a += b);
            let (dx, drp, dcp) = self.step_backward(&caches[step], &dr, &dc_next, grads);
            dxs[t * self.input_dim..(t + 1) * self.input_dim].copy_from_slice(&dx);
            dr_next = drp;
            dc_next = dcp;
        }
        dxs
    }
}

impl Params for LstmCell {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = vec![
            ("kernel".to_string(), &self.kernel),
            ("bias".to_string(), &self.bias),
            ("ln_gamma".to_string(), &self.ln_gamma),
            ("ln_beta".to_string(), &self.ln_beta),
        ];
        if let Some(p) = &self.projection {
            v.push(("projection".to_string(), p));
        }
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = vec![
            ("kernel".to_string(), &mut self.kernel),
            ("bias".to_string(), &mut self.bias),
            ("ln_gamma".to_string(), &mut self.ln_gamma),
            ("ln_beta".to_string(), &mut self.ln_beta),
        ];
        if let Some(p) = &mut self.projection {
            v.push(("projection".to_string(), p));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed(cell: &LstmCell, seed: u64) -> LstmCell {
        let mut c = cell.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t) in c.params_mut() {
            for v in t.data_mut() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
        c
    }

    #[test]
    fn degenerate_zero_case_is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cell = LstmCell::new(3, 4, None, &mut rng);
        cell.kernel.fill(0.0);
        cell.bias.fill(0.0);
        let (s, _) = cell.step(&[0.0; 3], &cell.zero_state()).unwrap();
        // all gates at sigmoid(0) = 0.5, candidate tanh(0) = 0
        assert!(s.c.iter().all(|&v| v == 0.0));
        assert!(s.r.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = LstmCell::new(3, 4, Some(2), &mut rng);
        let st = cell.zero_state();
        let a = cell.step(&[0.1, 0.2, 0.3], &st).unwrap().0;
        let b = cell.step(&[0.1, 0.2, 0.3], &st).unwrap().0;
        assert_eq!(a, b);
        assert_eq!(a.r.len(), 2);
        assert!(matches!(cell.step(&[0.0; 2], &st), Err(Error::ShapeError(_))));
    }

    fn seq_loss(cell: &LstmCell, xs: &[f64], n: usize, reverse: bool, proj: &[f64]) -> f64 {
        let (out, _) = cell.run(xs, n, reverse);
        out.iter().zip(proj).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for (projection, reverse) in [(None, false), (Some(2), false), (None, true), (Some(3), true)] {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let cell = perturbed(&LstmCell::new(3, 4, projection, &mut rng), 3);
            let n = 4;
            let xs: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let proj: Vec<f64> = (0..n * cell.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, caches) = cell.run(&xs, n, reverse);
            let mut grads = cell.clone();
            grads.zero();
            let dxs = cell.run_backward(&caches, &proj, reverse, &mut grads);
            let names: Vec<String> = cell.params().into_iter().map(|(k, _)| k).collect();
            for name in &names {
                let len = cell.params().into_iter().find(|(k, _)| k == name).unwrap().1.len();
                for i in 0..len {
                    let base = cell.params().into_iter().find(|(k, _)| k == name).unwrap().1.data()[i];
                    let fd = central_difference(
                        |v| {
                            let mut c = cell.clone();
                            c.params_mut().into_iter().find(|(k, _)| k == name).unwrap().1.data_mut()[i] = v;
                            seq_loss(&c, &xs, n, reverse, &proj)
                        },
                        base,
                        1e-4,
                    );
                    let an = grads.params().into_iter().find(|(k, _)| k == name).unwrap().1.data()[i];
                    assert!(relative_error(fd, an, 1e-6) < 1e-4, "{name}[{i}] fd {fd} an {an}");
                }
            }
            for i in 0..xs.len() {
                let fd = central_difference(
                    |v| {
                        let mut x = xs.clone();
                        x[i] = v;
                        seq_loss(&cell, &x, n, reverse, &proj)
                    },
                    xs[i],
                    1e-4,
                );
                assert!(relative_error(fd, dxs[i], 1e-6) < 1e-4, "x[{i}] fd {fd} an {}", dxs[i]);
            }
        }
    }
}
