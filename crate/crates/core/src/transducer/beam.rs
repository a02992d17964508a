use std::cmp::Ordering;
use std::collections::HashMap;

use super::loss::logadd;
use crate::error::{Error, Result};

/// What the beam search needs from a model: per-frame posteriors given the
/// prediction-network state, and a way to advance that state by one label.
pub trait TransducerScorer {
    type State: Clone;
    fn num_frames(&self) -> usize;
    fn blank(&self) -> usize;
    /// State after the start-of-sequence input.
    fn start(&self) -> Self::State;
    fn extend(&self, state: &Self::State, label: usize) -> Self::State;
    /// Log-softmax posterior over the inventory at `frame`.
    fn log_probs(&self, frame: usize, state: &Self::State) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam_width: usize,
    /// Non-blank emissions allowed within one frame.
    pub max_symbols_per_frame: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_width: 4,
            max_symbols_per_frame: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub labels: Vec<usize>,
    pub log_score: f64,
}

struct Entry<S> {
    labels: Vec<usize>,
    score: f64,
    state: S,
}

/// Score descending, then lexicographically smaller label sequence first.
fn rank<S>(a: &Entry<S>, b: &Entry<S>) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.labels.cmp(&b.labels))
}

/// Hypotheses keyed by label sequence; equal sequences merge by log-sum.
struct Pool<S> {
    entries: Vec<Entry<S>>,
    index: HashMap<Vec<usize>, usize>,
}

impl<S> Pool<S> {
    fn new() -> Self {
        Pool {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn add(&mut self, labels: Vec<usize>, score: f64, state: impl FnOnce() -> S) {
        match self.index.get(&labels) {
            Some(&i) => {
                let e = &mut self.entries[i];
                e.score = logadd(e.score, score);
            }
            None => {
                self.index.insert(labels.clone(), self.entries.len());
                self.entries.push(Entry {
                    labels,
                    score,
                    state: state(),
                });
            }
        }
    }

    fn top(mut self, k: usize) -> Vec<Entry<S>> {
        self.entries.sort_by(rank);
        self.entries.truncate(k);
        self.entries
    }
}

/// Frame-synchronous beam search.
///
/// At each frame every hypothesis either emits blank (moving on to the next
/// frame) or emits a non-blank symbol and stays, up to
/// `max_symbols_per_frame` times. Both the in-frame expansions and the set
/// carried to the next frame are pruned to `beam_width`. Returns at most
/// `beam_width` hypotheses, best first.
pub fn beam_decode<M: TransducerScorer>(model: &M, cfg: BeamConfig) -> Result<Vec<Hypothesis>> {
    if cfg.beam_width == 0 {
        return Err(Error::ConfigError("beam width must be at least 1".into()));
    }
    let frames = model.num_frames();
    if frames == 0 {
        return Err(Error::EmptyInput("no encoder frames to decode".into()));
    }
    let blank = model.blank();
    let mut beam = vec![Entry {
        labels: Vec::new(),
        score: 0.0,
        state: model.start(),
    }];
    for t in 0..frames {
        let mut advanced: Pool<M::State> = Pool::new();
        let mut current = beam;
        for level in 0..=cfg.max_symbols_per_frame {
            // (labels, score, parent, label); children of distinct parents are distinct.
            let mut candidates: Vec<(Vec<usize>, f64, usize, usize)> = Vec::new();
            for (pi, hyp) in current.iter().enumerate() {
                let lp = model.log_probs(t, &hyp.state);
                advanced.add(hyp.labels.clone(), hyp.score + lp[blank], || hyp.state.clone());
                if level == cfg.max_symbols_per_frame {
                    continue;
                }
                for (k, &l) in lp.iter().enumerate() {
                    if k != blank {
                        let mut labels = hyp.labels.clone();
                        labels.push(k);
                        candidates.push((labels, hyp.score + l, pi, k));
                    }
                }
            }
            if candidates.is_empty() {
                break;
            }
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            candidates.truncate(cfg.beam_width);
            let next: Vec<Entry<M::State>> = candidates
                .into_iter()
                .map(|(labels, score, pi, k)| Entry {
                    labels,
                    score,
                    state: model.extend(&current[pi].state, k),
                })
                .collect();
            current = next;
        }
        beam = advanced.top(cfg.beam_width);
    }
    Ok(beam
        .into_iter()
        .map(|e| Hypothesis {
            labels: e.labels,
            log_score: e.score,
        })
        .collect())
}
