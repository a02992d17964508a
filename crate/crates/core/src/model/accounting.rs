//! Closed-form parameter counts per named component.

use super::config::ModelConfig;
use super::lstm::LstmCell;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRow {
    pub name: String,
    /// Human-readable kernel shape.
    pub shape: String,
    pub count: usize,
}

/// Published rounded counts of the full-scale model, by row name.
pub const REFERENCE_ROWS: &[(&str, &str)] = &[
    ("video/block0", "5.4K"),
    ("video/block1", "221.6K"),
    ("video/block2", "885.5K"),
    ("video/block3", "3.5M"),
    ("video/block4", "7.1M"),
    ("encoder/rnn0", "5.8M"),
    ("encoder/rnn1", "6.3M"),
    ("encoder/rnn2", "6.3M"),
    ("encoder/rnn3", "6.3M"),
    ("encoder/rnn4", "6.3M"),
    ("decoder/rnn0", "7.2M"),
    ("decoder/rnn1", "11.8M"),
    ("rnnt/encoder", "655.4K"),
    ("rnnt/decoder", "409.6K"),
    ("rnnt/output", "48.1K"),
    ("Total", "62.9M"),
];

/// One row per video block, encoder layer (both directions), decoder layer and
/// joint matrix. Counts include biases and normalization gains and shifts.
pub fn count_parameters(cfg: &ModelConfig) -> Vec<ParamRow> {
    let mut rows = Vec::new();
    for (i, spec) in cfg.video.block_specs().iter().enumerate() {
        rows.push(ParamRow {
            name: format!("video/block{i}"),
            shape: format!("3x3x3x{}x{}", spec.in_channels, spec.out_channels),
            count: spec.num_params(),
        });
    }
    let h = cfg.encoder_hidden;
    for i in 0..cfg.encoder_layers {
        let d = if i == 0 { cfg.input_dim() } else { 2 * h };
        rows.push(ParamRow {
            name: format!("encoder/rnn{i}"),
            shape: format!("{}x{h}x4x2", d + h),
            count: 2 * LstmCell::count(d, h, None),
        });
    }
    let (dh, p) = (cfg.decoder_hidden, cfg.decoder_projection);
    for i in 0..cfg.decoder_layers {
        let d = if i == 0 { cfg.vocab_size } else { p };
        rows.push(ParamRow {
            name: format!("decoder/rnn{i}"),
            shape: format!("{}x{dh}x4 + {dh}x{p}", d + p),
            count: LstmCell::count(d, dh, Some(p)),
        });
    }
    let j = cfg.joint_dim;
    let e = cfg.encoder_output_dim();
    rows.push(ParamRow {
        name: "rnnt/encoder".into(),
        shape: format!("{e}x{j}"),
        count: e * j,
    });
    rows.push(ParamRow {
        name: "rnnt/decoder".into(),
        shape: format!("{p}x{j}"),
        count: p * j,
    });
    rows.push(ParamRow {
        name: "rnnt/output".into(),
        shape: format!("{j}x{}", cfg.vocab_size),
        count: j * cfg.vocab_size + cfg.vocab_size,
    });
    rows
}

pub fn total(rows: &[ParamRow]) -> usize {
    rows.iter().map(|r| r.count).sum()
}

/// Formats a count with one decimal and a K or M suffix.
pub fn format_count(n: usize) -> String {
    if n < 1_000_000 {
        format!("{:.1}K", n as f64 / 1e3)
    } else {
        format!("{:.1}M", n as f64 / 1e6)
    }
}

/// Parses strings such as `655.4K` or `62.9M`.
pub fn parse_count(s: &str) -> Option<f64> {
    let (num, mult) = match s.chars().last()? {
        'K' => (&s[..s.len() - 1], 1e3),
        'M' => (&s[..s.len() - 1], 1e6),
        _ => (s, 1.0),
    };
    num.parse::<f64>().ok().map(|v| v * mult)
}

/// Row-by-row comparison against [`REFERENCE_ROWS`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowComparison {
    pub name: String,
    pub count: usize,
    pub formatted: String,
    pub reference: Option<&'static str>,
    /// Relative gap between the formatted value and the reference.
    pub delta: Option<f64>,
}

pub fn compare_with_reference(rows: &[ParamRow]) -> Vec<RowComparison> {
    let mut all: Vec<(String, usize)> = rows.iter().map(|r| (r.name.clone(), r.count)).collect();
    all.push(("Total".into(), total(rows)));
    all.into_iter()
        .map(|(name, count)| {
            let formatted = format_count(count);
            let reference = REFERENCE_ROWS.iter().find(|(n, _)| *n == name).map(|(_, v)| *v);
            let delta = reference.and_then(parse_count).zip(parse_count(&formatted)).map(|(r, f)| (f - r).abs() / r);
            RowComparison {
                name,
                count,
                formatted,
                reference,
                delta,
            }
        })
        .collect()
}
