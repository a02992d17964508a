use crate::error::{Error, Result};

/// `ln(e^a + e^b)` without overflow or underflow.
#[inline]
pub fn logadd(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Forward and backward log-probabilities over the `T × (U+1)` grid.
#[derive(Debug, Clone)]
pub struct LossLattice {
    pub frames: usize,
    pub label_len: usize,
    pub log_alpha: Vec<f64>,
    pub log_beta: Vec<f64>,
}

impl LossLattice {
    pub fn alpha(&self, t: usize, u: usize) -> f64 {
        self.log_alpha[t * (self.label_len + 1) + u]
    }

    pub fn beta(&self, t: usize, u: usize) -> f64 {
        self.log_beta[t * (self.label_len + 1) + u]
    }
}

#[derive(Debug, Clone)]
pub struct TransducerLoss {
    /// `-ln P(labels | inputs)`.
    pub loss: f64,
    /// d loss / d log_probs, same layout as the input.
    pub grad: Vec<f64>,
    pub lattice: LossLattice,
}

/// Negative log-likelihood of `labels` summed over every monotone alignment.
///
/// `log_probs` is `frames × (labels.len() + 1) × vocab`, row-major, holding the
/// log-softmax joint outputs. The gradient is exact, computed from the
/// alpha/beta occupancies.
pub fn transducer_loss(
    log_probs: &[f64],
    frames: usize,
    labels: &[usize],
    vocab: usize,
    blank: usize,
) -> Result<TransducerLoss> {
    let u_len = labels.len();
    if frames == 0 {
        return Err(if u_len > 0 {
            Error::ImpossibleAlignment { labels: u_len }
        } else {
            Error::EmptyInput("transducer loss needs at least one frame".into())
        });
    }
    if blank >= vocab {
        return Err(Error::InvalidLabel { label: blank, size: vocab });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= vocab || l == blank) {
        return Err(Error::InvalidLabel { label: bad, size: vocab });
    }
    let cols = u_len + 1;
    if log_probs.len() != frames * cols * vocab {
        return Err(Error::shape(format!(
            "log_probs has {} values, expected {frames}x{cols}x{vocab}",
            log_probs.len()
        )));
    }
    let lp = |t: usize, u: usize, k: usize| log_probs[(t * cols + u) * vocab + k];
    let blank_lp = |t: usize, u: usize| lp(t, u, blank);
    let label_lp = |t: usize, u: usize| lp(t, u, labels[u]);

    let mut alpha = vec![f64::NEG_INFINITY; frames * cols];
    alpha[0] = 0.0;
    for t in 0..frames {
        for u in 0..cols {
            if t == 0 && u == 0 {
                continue;
            }
            let mut a = f64::NEG_INFINITY;
            if t > 0 {
                a = alpha[(t - 1) * cols + u] + blank_lp(t - 1, u);
            }
            if u > 0 {
                a = logadd(a, alpha[t * cols + u - 1] + label_lp(t, u - 1));
            }
            alpha[t * cols + u] = a;
        }
    }

    let mut beta = vec![f64::NEG_INFINITY; frames * cols];
    let last = (frames - 1) * cols + u_len;
    beta[last] = blank_lp(frames - 1, u_len);
    for t in (0..frames).rev() {
        for u in (0..cols).rev() {
            if t == frames - 1 && u == u_len {
                continue;
            }
            let mut b = f64::NEG_INFINITY;
            if t + 1 < frames {
                b = beta[(t + 1) * cols + u] + blank_lp(t, u);
            }
            if u < u_len {
                b = logadd(b, beta[t * cols + u + 1] + label_lp(t, u));
            }
            beta[t * cols + u] = b;
        }
    }

    let log_like = alpha[last] + blank_lp(frames - 1, u_len);
    let mut grad = vec![0.0; log_probs.len()];
    for t in 0..frames {
        for u in 0..cols {
            let a = alpha[t * cols + u];
            if a == f64::NEG_INFINITY {
                continue;
            }
            let next_blank = if t + 1 < frames {
                beta[(t + 1) * cols + u]
            } else if u == u_len {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            grad[(t * cols + u) * vocab + blank] = -(a + blank_lp(t, u) + next_blank - log_like).exp();
            if u < u_len {
                grad[(t * cols + u) * vocab + labels[u]] =
                    -(a + label_lp(t, u) + beta[t * cols + u + 1] - log_like).exp();
            }
        }
    }

    Ok(TransducerLoss {
        loss: -log_like,
        grad,
        lattice: LossLattice {
            frames,
            label_len: u_len,
            log_alpha: alpha,
            log_beta: beta,
        },
    })
}
