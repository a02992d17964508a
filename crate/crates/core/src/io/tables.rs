use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};

/// One decoded candidate: `utt_id<TAB>rank<TAB>score<TAB>text`, rank from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NbestLine {
    pub utt_id: String,
    pub rank: usize,
    pub score: f64,
    pub text: String,
}

pub fn write_nbest(path: &Path, lines: &[NbestLine]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        if l.utt_id.contains(['\t', '\n']) || l.text.contains(['\t', '\n']) {
            return Err(Error::ConfigError(format!("{}: tab or newline in n-best field", l.utt_id)));
        }
        writeln!(out, "{}\t{}\t{:.6}\t{}", l.utt_id, l.rank, l.score, l.text).expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_nbest(path: &Path) -> Result<Vec<NbestLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |i: usize, m: &str| Error::Format {
        path: path.display().to_string(),
        reason: format!("line {}: {m}", i + 1),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.splitn(4, '\t').collect();
            if f.len() != 4 {
                return Err(bad(i, "expected 4 tab-separated fields"));
            }
            Ok(NbestLine {
                utt_id: f[0].to_string(),
                rank: f[1].parse().map_err(|_| bad(i, "bad rank"))?,
                score: f[2].parse().map_err(|_| bad(i, "bad score"))?,
                text: f[3].to_string(),
            })
        })
        .collect()
}

/// What `corrupt` did to one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub utt_id: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub gain: f64,
    pub clip_scale: f64,
    pub seed: u64,
}

/// WER with 95% interval half-width per condition (rows) and mode (columns).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreGrid {
    pub conditions: Vec<String>,
    pub modes: Vec<String>,
    cells: Vec<Vec<Option<(f64, f64)>>>,
}

impl ScoreGrid {
    pub fn set(&mut self, condition: &str, mode: &str, wer: f64, ci: f64) {
        let r = match self.conditions.iter().position(|c| c == condition) {
            Some(r) => r,
            None => {
                self.conditions.push(condition.to_string());
                self.cells.push(vec![None; self.modes.len()]);
                self.conditions.len() - 1
            }
        };
        let c = match self.modes.iter().position(|m| m == mode) {
            Some(c) => c,
            None => {
                self.modes.push(mode.to_string());
                self.cells.iter_mut().for_each(|row| row.push(None));
                self.modes.len() - 1
            }
        };
        self.cells[r][c] = Some((wer, ci));
    }

    pub fn get(&self, condition: &str, mode: &str) -> Option<(f64, f64)> {
        let r = self.conditions.iter().position(|c| c == condition)?;
        let c = self.modes.iter().position(|m| m == mode)?;
        self.cells[r][c]
    }

    /// `condition,<mode>,<mode>_ci95,...`; missing cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition");
        for m in &self.modes {
            write!(out, ",{m},{m}_ci95").expect("string write");
        }
        out.push('\n');
        for (cond, row) in self.conditions.iter().zip(&self.cells) {
            out.push_str(cond);
            for cell in row {
                match cell {
                    Some((w, ci)) if ci.is_finite() => write!(out, ",{w:.2},{ci:.2}"),
                    Some((w, _)) => write!(out, ",{w:.2},"),
                    None => write!(out, ",,"),
                }
                .expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nbest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.tsv");
        let lines = vec![
            NbestLine {
                utt_id: "u1".into(),
                rank: 1,
                score: -0.5,
                text: "a b".into(),
            },
            NbestLine {
                utt_id: "u1".into(),
                rank: 2,
                score: -1.25,
                text: String::new(),
            },
        ];
        write_nbest(&p, &lines).unwrap();
        assert_eq!(read_nbest(&p).unwrap(), lines);
        std::fs::write(&p, "u1\tx\t0\ttext\n").unwrap();
        assert!(read_nbest(&p).is_err());
    }

    #[test]
    fn grid_layout() {
        let mut g = ScoreGrid::default();
        g.set("clean", "A", 10.0, 1.5);
        g.set("clean", "A+V", 8.0, 1.0);
        g.set("babble 0dB", "A", 30.0, f64::NAN);
        assert_eq!(
            g.to_csv(),
            "condition,A,A_ci95,A+V,A+V_ci95\nclean,10.00,1.50,8.00,1.00\nbabble 0dB,30.00,,,\n"
        );
        assert_eq!(g.get("clean", "A+V"), Some((8.0, 1.0)));
        assert_eq!(g.get("babble 0dB", "A+V"), None);
    }
}
