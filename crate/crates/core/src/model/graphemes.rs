//! Output symbol inventory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BLANK: usize = 0;

const PUNCTUATION: &str = "'.,?!-:;\"()&/%$#@+=*_[]<>|";
const ACCENTED: &str = "àâäçéèêëîïô";

/// Maps graphemes to label ids. Id 0 is always the blank, which has no
/// surface form; id 1 is the space that separates words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphemeInventory {
    symbols: Vec<char>,
}

impl Default for GraphemeInventory {
    /// The 75-entry inventory: blank, space, lowercase letters, digits,
    /// punctuation and a handful of accented letters.
    fn default() -> Self {
        let mut symbols = vec![' '];
        symbols.extend('a'..='z');
        symbols.extend('0'..='9');
        symbols.extend(PUNCTUATION.chars());
        symbols.extend(ACCENTED.chars());
        GraphemeInventory { symbols }
    }
}

impl GraphemeInventory {
    /// Inventory over the given non-blank symbols. Space is inserted first if
    /// missing.
    pub fn from_symbols(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let mut symbols = vec![' '];
        for c in chars {
            if symbols.contains(&c) {
                if c == ' ' {
                    continue;
                }
                return Err(Error::ConfigError(format!("duplicate grapheme {c:?}")));
            }
            symbols.push(c);
        }
        Ok(GraphemeInventory { symbols })
    }

    /// Number of labels including the blank.
    pub fn size(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn id(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c).map(|i| i + 1)
    }

    /// Lowercases and collapses whitespace runs before mapping.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        normalized
            .chars()
            .flat_map(|c| c.to_lowercase())
            .map(|c| self.id(c).ok_or_else(|| Error::UnknownGrapheme(c)))
            .collect()
    }

    pub fn decode(&self, labels: &[usize]) -> Result<String> {
        labels
            .iter()
            .map(|&l| {
                if l == BLANK || l >= self.size() {
                    Err(Error::InvalidLabel { label: l, size: self.size() })
                } else {
                    Ok(self.symbols[l - 1])
                }
            })
            .collect()
    }
}
