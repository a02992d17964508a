use serde::Serialize;

use super::ci::{confidence_interval_95, CiMethod};
use crate::error::Result;

/// Lowercases and, when `strip_punctuation` is set, replaces every character
/// that is neither alphanumeric, whitespace nor an apostrophe by a space.
pub fn normalize_text(text: &str, strip_punctuation: bool) -> String {
    text.chars()
        .flat_map(|c| c.to_lowercase())
        .map(|c| {
            if strip_punctuation && !(c.is_alphanumeric() || c.is_whitespace() || c == '\'') {
                ' '
            } else {
                c
            }
        })
        .collect()
}

pub fn tokenize(text: &str, strip_punctuation: bool) -> Vec<String> {
    normalize_text(text, strip_punctuation)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_words: usize,
    /// Percent; may exceed 100.
    pub wer: f64,
    /// Set when the reference is empty but the hypothesis is not; `wer` is
    /// then `100 * insertions`.
    pub degenerate: bool,
}

impl WerReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Diag,
    Del,
    Ins,
}

/// Unit-cost Levenshtein alignment. Ties in the backtrace prefer a
/// substitution (or match), then a deletion, then an insertion.
pub fn word_error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> WerReport {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut cost = vec![0usize; (n + 1) * w];
    let mut op = vec![Op::Diag; (n + 1) * w];
    for i in 1..=n {
        cost[i * w] = i;
        op[i * w] = Op::Del;
    }
    for j in 1..=m {
        cost[j] = j;
        op[j] = Op::Ins;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = cost[(i - 1) * w + j] + 1;
            let ins = cost[i * w + j - 1] + 1;
            let (c, o) = if diag <= del && diag <= ins {
                (diag, Op::Diag)
            } else if del <= ins {
                (del, Op::Del)
            } else {
                (ins, Op::Ins)
            };
            cost[i * w + j] = c;
            op[i * w + j] = o;
        }
    }
    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match op[i * w + j] {
            Op::Diag => {
                s += usize::from(reference[i - 1] != hypothesis[j - 1]);
                i -= 1;
                j -= 1;
            }
            Op::Del => {
                del += 1;
                i -= 1;
            }
            Op::Ins => {
                ins += 1;
                j -= 1;
            }
        }
    }
    let errors = s + ins + del;
    let (wer, degenerate) = if n == 0 {
        (100.0 * ins as f64, ins > 0)
    } else {
        (100.0 * errors as f64 / n as f64, false)
    };
    WerReport {
        substitutions: s,
        insertions: ins,
        deletions: del,
        ref_words: n,
        wer,
        degenerate,
    }
}

/// Corpus-level totals with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusWer {
    pub wer: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_words: usize,
    pub utterances: usize,
    pub ci_halfwidth_95: f64,
}

/// Pools per-utterance reports. The interval needs at least two utterances;
/// with fewer it is reported as NaN.
pub fn corpus_wer(reports: &[WerReport], method: CiMethod) -> Result<CorpusWer> {
    let sum = |f: fn(&WerReport) -> usize| reports.iter().map(f).sum::<usize>();
    let ref_words = sum(|r| r.ref_words);
    let (s, i, d) = (sum(|r| r.substitutions), sum(|r| r.insertions), sum(|r| r.deletions));
    let errors: Vec<usize> = reports.iter().map(|r| r.errors()).collect();
    let words: Vec<usize> = reports.iter().map(|r| r.ref_words).collect();
    let ci = if reports.len() >= 2 {
        confidence_interval_95(&errors, &words, method)?
    } else {
        f64::NAN
    };
    Ok(CorpusWer {
        wer: if ref_words == 0 { 0.0 } else { 100.0 * (s + i + d) as f64 / ref_words as f64 },
        substitutions: s,
        insertions: i,
        deletions: d,
        ref_words,
        utterances: reports.len(),
        ci_halfwidth_95: ci,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wer_str(r: &str, h: &str) -> WerReport {
        word_error_rate(&tokenize(r, true), &tokenize(h, true))
    }

    #[test]
    fn identical_is_zero() {
        let r = wer_str("the cat sat", "the cat sat");
        assert_eq!((r.errors(), r.wer), (0, 0.0));
    }

    #[test]
    fn substitution_and_insertion() {
        let r = wer_str("a b c", "a x c d");
        assert_eq!((r.substitutions, r.insertions, r.deletions), (1, 1, 0));
        assert!((r.wer - 66.666_666_666_666_67).abs() < 1e-9);
    }

    #[test]
    fn all_deletions_and_empty_reference() {
        let r = wer_str("a b", "");
        assert_eq!((r.deletions, r.wer), (2, 100.0));
        let r = wer_str("", "a b");
        assert!(r.degenerate);
        assert_eq!(r.wer, 200.0);
        assert_eq!(wer_str("", "").wer, 0.0);
    }

    #[test]
    fn tie_prefers_substitution() {
        // "a b" vs "b a": 2 substitutions or a deletion plus an insertion
        let r = wer_str("a b", "b a");
        assert_eq!((r.substitutions, r.insertions, r.deletions), (2, 0, 0));
    }

    #[test]
    fn swap_exchanges_insertions_and_deletions() {
        let a = wer_str("a b c d", "a c e d f");
        let b = wer_str("a c e d f", "a b c d");
        assert_eq!(a.errors(), b.errors());
    }

    #[test]
    fn normalization() {
        assert_eq!(tokenize("Hello, World!  it's", true), vec!["hello", "world", "it's"]);
        assert_eq!(tokenize("Hello, World!", false), vec!["hello,", "world!"]);
    }
}
