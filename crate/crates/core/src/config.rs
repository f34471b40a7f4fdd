//! Bit-packed opinion configurations.
//!
//! Opinion `+1` is stored as bit 1 and `-1` as bit 0. Bits past `len` in the
//! last word are always zero, so derived equality and hashing are exact.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opinion {
    Negative,
    Positive,
}

impl Opinion {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Opinion::Positive
        } else {
            Opinion::Negative
        }
    }

    pub fn bit(self) -> bool {
        self == Opinion::Positive
    }

    /// `-1` or `+1`.
    pub fn value(self) -> i64 {
        if self.bit() {
            1
        } else {
            -1
        }
    }
}

impl FromStr for Opinion {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" | "+1" | "1" => Ok(Opinion::Positive),
            "-" | "-1" | "0" => Ok(Opinion::Negative),
            _ => Err(ConfigError::BadOpinion(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid opinion character `{0}` (expected one of + - 0 1)")]
    BadSymbol(char),
    #[error("invalid opinion `{0}`")]
    BadOpinion(String),
    #[error("configuration mixes the +/- and 0/1 renderings")]
    MixedRendering,
    #[error("configuration has {got} opinions, graph has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

const WORD: usize = 64;

/// One opinion per node, packed 64 to a word.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    len: usize,
    words: Vec<u64>,
}

impl Configuration {
    /// All nodes at `opinion`.
    pub fn uniform(len: usize, opinion: Opinion) -> Self {
        let fill = if opinion.bit() { u64::MAX } else { 0 };
        let mut c = Configuration {
            len,
            words: vec![fill; len.div_ceil(WORD)],
        };
        c.clear_tail();
        c
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % WORD == 0 {
                words.push(0);
            }
            if b {
                words[len / WORD] |= 1 << (len % WORD);
            }
            len += 1;
        }
        Configuration { len, words }
    }

    pub fn from_opinions(opinions: &[Opinion]) -> Self {
        Self::from_bits(opinions.iter().map(|o| o.bit()))
    }

    /// The configuration whose node `i` holds bit `i` of `index`.
    pub fn from_index(len: usize, index: u64) -> Self {
        assert!(len <= 64, "index encoding covers at most 64 nodes");
        Self::from_bits((0..len).map(|i| index >> i & 1 == 1))
    }

    /// Inverse of [`Configuration::from_index`].
    pub fn to_index(&self) -> u64 {
        assert!(self.len <= 64, "index encoding covers at most 64 nodes");
        self.words.first().copied().unwrap_or(0)
    }

    pub(crate) fn from_words(len: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), len.div_ceil(WORD));
        let mut c = Configuration { len, words };
        c.clear_tail();
        c
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, u: NodeId) -> bool {
        debug_assert!(u < self.len);
        self.words[u / WORD] >> (u % WORD) & 1 == 1
    }

    pub fn opinion(&self, u: NodeId) -> Opinion {
        Opinion::from_bit(self.bit(u))
    }

    pub fn set(&mut self, u: NodeId, opinion: Opinion) {
        assert!(u < self.len, "node {u} out of range");
        let mask = 1u64 << (u % WORD);
        if opinion.bit() {
            self.words[u / WORD] |= mask;
        } else {
            self.words[u / WORD] &= !mask;
        }
    }

    pub fn bits(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(|u| self.bit(u))
    }

    pub fn count_positive(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `+`/`-` rendering, node 0 first.
    pub fn to_pm_string(&self) -> String {
        self.bits().map(|b| if b { '+' } else { '-' }).collect()
    }

    /// `1`/`0` rendering, node 0 first.
    pub fn to_bit_string(&self) -> String {
        self.bits().map(|b| if b { '1' } else { '0' }).collect()
    }

    pub fn check_len(&self, expected: usize) -> Result<(), ConfigError> {
        if self.len == expected {
            Ok(())
        } else {
            Err(ConfigError::LengthMismatch {
                expected,
                got: self.len,
            })
        }
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({})", self.to_pm_string())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_pm_string())
    }
}

/// Accepts either rendering (`+-+` or `101`), but not a mix of the two.
impl FromStr for Configuration {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let pm = s.chars().any(|c| c == '+' || c == '-');
        let digits = s.chars().any(|c| c == '0' || c == '1');
        if pm && digits {
            return Err(ConfigError::MixedRendering);
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '+' | '1' => Ok(true),
                '-' | '0' => Ok(false),
                other => Err(ConfigError::BadSymbol(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Configuration::from_bits(bits))
    }
}
