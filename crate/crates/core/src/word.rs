//! Binary words indexing iterated integrals.
//!
//! Letter `0` is a `dt` slot and letter `1` a `dB` slot. The text form lists
//! letters innermost first: `"011"` is `∫_0^1 dB_{t3} ∫_0^{t3} dB_{t2} ∫_0^{t2} dt_1`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::invalid("word must have at least one letter"));
        }
        if let Some(bad) = letters.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("word letter {bad} is not 0 or 1")));
        }
        Ok(Word(letters))
    }

    /// Letters `i_1, …, i_k`, innermost first.
    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of `dB` slots.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&l| l == 1).count()
    }

    /// 1-based positions of the `dt` slots.
    pub fn dt_slots(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Word> {
        let letters = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::invalid(format!("word character {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Word::new(letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// All words of length `2m + n` with exactly `2m` ones, lexicographically.
pub fn words_for_exponent(m: usize, n: usize) -> Result<Vec<Word>> {
    if m == 0 && n == 0 {
        return Err(Error::invalid("exponent pair (0, 0) has no words"));
    }
    let len = 2 * m + n;
    let ones = 2 * m;
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(len);
    fill(&mut buf, len, ones, &mut out);
    Ok(out)
}

fn fill(buf: &mut Vec<u8>, len: usize, ones_left: usize, out: &mut Vec<Word>) {
    let remaining = len - buf.len();
    if remaining == 0 {
        out.push(Word(buf.clone()));
        return;
    }
    if remaining > ones_left {
        buf.push(0);
        fill(buf, len, ones_left, out);
        buf.pop();
    }
    if ones_left > 0 {
        buf.push(1);
        fill(buf, len, ones_left - 1, out);
        buf.pop();
    }
}
