use rand::Rng;

use super::lstm::{LstmCell, LstmState, StepCache};
use crate::error::{Error, Result};
use crate::linalg::Tensor;
use crate::params::{prefixed, prefixed_mut, Params};

/// Label-history network: stacked projected LSTMs fed a one-hot of the
/// previous label. The start input is the all-zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub vocab_size: usize,
    pub layers: Vec<LstmCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub layers: Vec<LstmState>,
}

impl DecoderState {
    /// Output of the top layer after the last consumed input.
    pub fn output(&self) -> &[f64] {
        &self.layers.last().expect("decoder has layers").r
    }
}

pub struct DecoderCache {
    steps: Vec<Vec<StepCache>>,
}

impl Decoder {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, hidden: usize, projection: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|i| {
                let d = if i == 0 { vocab_size } else { projection };
                LstmCell::new(d, hidden, Some(projection), rng)
            })
            .collect();
        Decoder { vocab_size, layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_dim())
    }

    fn one_hot(&self, label: Option<usize>) -> Vec<f64> {
        let mut x = vec![0.0; self.vocab_size];
        if let Some(l) = label {
            x[l] = 1.0;
        }
        x
    }

    fn zero_state(&self) -> DecoderState {
        DecoderState {
            layers: self.layers.iter().map(|l| l.zero_state()).collect(),
        }
    }

    fn advance(&self, state: &DecoderState, label: Option<usize>) -> (DecoderState, Vec<StepCache>) {
        let mut x = self.one_hot(label);
        let mut next = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (cell, st) in self.layers.iter().zip(&state.layers) {
            let (s, c) = cell.step_unchecked(&x, st);
            x = s.r.clone();
            next.push(s);
            caches.push(c);
        }
        (DecoderState { layers: next }, caches)
    }

    /// State after the start input.
    pub fn start(&self) -> DecoderState {
        self.advance(&self.zero_state(), None).0
    }

    /// State after additionally consuming `label`.
    pub fn extend(&self, state: &DecoderState, label: usize) -> DecoderState {
        self.advance(state, Some(label)).0
    }

    fn check_labels(&self, labels: &[usize]) -> Result<()> {
        match labels.iter().find(|&&l| l == 0 || l >= self.vocab_size) {
            Some(&l) => Err(Error::InvalidLabel { label: l, size: self.vocab_size }),
            None => Ok(()),
        }
    }

    /// `(U+1) × output_dim` rows: row 0 after the start input, row `u` after
    /// consuming `labels[u-1]`.
    pub fn predict(&self, labels: &[usize]) -> Result<Vec<f64>> {
        Ok(self.forward(labels)?.0)
    }

    pub fn forward(&self, labels: &[usize]) -> Result<(Vec<f64>, DecoderCache)> {
        self.check_labels(labels)?;
        let p = self.output_dim();
        let mut out = Vec::with_capacity((labels.len() + 1) * p);
        let mut steps = Vec::with_capacity(labels.len() + 1);
        let mut state = self.zero_state();
        for input in std::iter::once(None).chain(labels.iter().map(|&l| Some(l))) {
            let (s, c) = self.advance(&state, input);
            out.extend_from_slice(s.output());
            steps.push(c);
            state = s;
        }
        Ok((out, DecoderCache { steps }))
    }

    pub fn backward(&self, cache: &DecoderCache, d_out: &[f64], grads: &mut Decoder) {
        let p = self.output_dim();
        let nl = self.layers.len();
        let mut dr_next: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.output_dim()]).collect();
        let mut dc_next: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.hidden]).collect();
        for u in (0..cache.steps.len()).rev() {
            let mut d_above = d_out[u * p..(u + 1) * p].to_vec();
            for li in (0..nl).rev() {
                let mut dr = d_above;
                dr.iter_mut().zip(&dr_next[li]).for_each(|(a, b)| *a += b);
                let (dx, drp, dcp) =
                    self.layers[li].step_backward(&cache.steps[u][li], &dr, &dc_next[li], &mut grads.layers[li]);
                dr_next[li] = drp;
                dc_next[li] = dcp;
                d_above = dx;
            }
        }
    }
}

impl Params for Decoder {
    fn params(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("rnn{i}"), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| prefixed_mut(&format!("rnn{i}"), l.params_mut()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dec() -> Decoder {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Decoder::new(6, 5, 3, 2, &mut rng)
    }

    #[test]
    fn empty_prefix_gives_one_row() {
        assert_eq!(dec().predict(&[]).unwrap().len(), 3);
    }

    #[test]
    fn prefix_rows_bit_identical() {
        let d = dec();
        let full = d.predict(&[1, 4, 2, 5]).unwrap();
        for u in 0..4 {
            let part = d.predict(&[1, 4, 2, 5][..u]).unwrap();
            assert_eq!(part[..], full[..part.len()]);
        }
    }

    #[test]
    fn label_change_affects_later_rows_only() {
        let d = dec();
        let a = d.predict(&[1, 4, 2, 5]).unwrap();
        let b = d.predict(&[1, 4, 3, 5]).unwrap();
        // label index 2 is consumed to produce row 3
        assert_eq!(a[..9], b[..9]);
        for u in 3..5 {
            assert!(a[u * 3..(u + 1) * 3] != b[u * 3..(u + 1) * 3]);
        }
    }

    #[test]
    fn incremental_matches_batch() {
        let d = dec();
        let full = d.predict(&[2, 3]).unwrap();
        let s0 = d.start();
        let s1 = d.extend(&s0, 2);
        let s2 = d.extend(&s1, 3);
        assert_eq!(s0.output(), &full[0..3]);
        assert_eq!(s2.output(), &full[6..9]);
    }

    #[test]
    fn rejects_blank_and_out_of_range() {
        assert!(matches!(dec().predict(&[0]), Err(Error::InvalidLabel { .. })));
        assert!(matches!(dec().predict(&[6]), Err(Error::InvalidLabel { .. })));
    }
}
