use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum CiMethod {
    /// Percentile bootstrap over utterances.
    Bootstrap { resamples: usize, seed: u64 },
    /// Normal approximation of the ratio estimator.
    Normal,
}

impl Default for CiMethod {
    fn default() -> Self {
        CiMethod::Bootstrap {
            resamples: 10_000,
            seed: 0,
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Half-width, in WER percent, of the 95% interval of the corpus WER given
/// per-utterance error and reference-word counts.
pub fn confidence_interval_95(errors: &[usize], ref_words: &[usize], method: CiMethod) -> Result<f64> {
    if errors.len() != ref_words.len() {
        return Err(Error::shape("error and word counts differ in length"));
    }
    let n = errors.len();
    if n < 2 {
        return Err(Error::UndefinedCi);
    }
    let total_w: usize = ref_words.iter().sum();
    if total_w == 0 {
        return Err(Error::UndefinedCi);
    }
    match method {
        CiMethod::Normal => {
            let p = errors.iter().sum::<usize>() as f64 / total_w as f64;
            let ss: f64 = errors
                .iter()
                .zip(ref_words)
                .map(|(&e, &w)| (e as f64 - p * w as f64).powi(2))
                .sum();
            let var = ss * n as f64 / (n as f64 - 1.0) / (total_w as f64).powi(2);
            Ok(1.96 * var.sqrt() * 100.0)
        }
        CiMethod::Bootstrap { resamples, seed } => {
            if resamples < 2 {
                return Err(Error::ConfigError("bootstrap needs at least two resamples".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut stats = Vec::with_capacity(resamples);
            for _ in 0..resamples {
                let (mut e, mut w) = (0usize, 0usize);
                for _ in 0..n {
                    let k = rng.gen_range(0..n);
                    e += errors[k];
                    w += ref_words[k];
                }
                stats.push(if w == 0 { 0.0 } else { 100.0 * e as f64 / w as f64 });
            }
            stats.sort_by(f64::total_cmp);
            Ok((percentile(&stats, 0.975) - percentile(&stats, 0.025)) / 2.0)
        }
    }
}
