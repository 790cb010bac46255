//! Word framing over a 16-symbol alphabet.
//!
//! A message body is `[tag, kind, value, check]`. `kind` is `[0]` for a
//! status and `[1]` for a pointer value, `value` is the value in base 16
//! without leading zeros, and `check` holds the two nibbles of a CRC-8 over
//! the length-prefixed serialization of the first three words.

use std::fmt;
use std::str::FromStr;

use crc::{Crc, CRC_8_SMBUS};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ChannelError;

pub const ALPHABET: u8 = 16;
/// Longest value word the decoder accepts.
pub const MAX_VALUE_SYMBOLS: usize = 4;

const CRC8: Crc<u8> = Crc::<u8>::new(&CRC_8_SMBUS);

/// Finite string of symbols in `0..16`, written as lowercase hex digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Result<Self, ChannelError> {
        if symbols.is_empty() {
            return Err(ChannelError::Word("empty word".into()));
        }
        if let Some(s) = symbols.iter().find(|&&s| s >= ALPHABET) {
            return Err(ChannelError::Word(format!("symbol {s} outside the alphabet")));
        }
        Ok(Self(symbols))
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical base-16 form of `v`.
    pub fn from_value(mut v: usize) -> Self {
        let mut s = Vec::new();
        loop {
            s.push((v % 16) as u8);
            v /= 16;
            if v == 0 {
                break;
            }
        }
        s.reverse();
        Self(s)
    }

    /// Inverse of [`Word::from_value`]; rejects leading zeros and overlong words.
    pub fn to_value(&self) -> Option<usize> {
        if self.0.len() > MAX_VALUE_SYMBOLS || (self.0.len() > 1 && self.0[0] == 0) {
            return None;
        }
        Some(self.0.iter().fold(0usize, |acc, &s| acc * 16 + s as usize))
    }

    /// Every word of length `1..=max_len`, shortest first.
    pub fn all_up_to(max_len: usize) -> impl Iterator<Item = Word> {
        (1..=max_len as u32).flat_map(|len| {
            (0..16usize.pow(len)).map(move |mut n| {
                let mut s = vec![0u8; len as usize];
                for slot in s.iter_mut().rev() {
                    *slot = (n % 16) as u8;
                    n /= 16;
                }
                Word(s)
            })
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s:x}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols = s
            .chars()
            .map(|c| {
                c.to_digit(16)
                    .filter(|_| !c.is_ascii_uppercase())
                    .map(|d| d as u8)
                    .ok_or_else(|| ChannelError::Word(format!("'{c}' is not a lowercase hex symbol")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Word::new(symbols)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What an accepted message says.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Content {
    Ready,
    Pointer(usize),
}

impl fmt::Display for Content {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Content::Ready => f.write_str("ready"),
            Content::Pointer(v) => write!(f, "P{v}"),
        }
    }
}

impl FromStr for Content {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ready" {
            return Ok(Content::Ready);
        }
        s.strip_prefix('P')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse().ok())
            .map(Content::Pointer)
            .ok_or_else(|| ChannelError::Word(format!("unknown content '{s}'")))
    }
}

impl Serialize for Content {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Content {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const KIND_STATUS: u8 = 0;
const KIND_POINTER: u8 = 1;
const STATUS_READY: usize = 0;

fn checksum(words: &[Word]) -> Word {
    let mut digest = CRC8.digest();
    for w in words {
        digest.update(&[w.len() as u8]);
        digest.update(&w.0);
    }
    let c = digest.finalize();
    Word(vec![c >> 4, c & 0x0f])
}

/// Frames `content` in the language identified by `tag`.
pub fn encode(tag: &Word, content: Content) -> Vec<Word> {
    let (kind, value) = match content {
        Content::Ready => (KIND_STATUS, STATUS_READY),
        Content::Pointer(v) => (KIND_POINTER, v),
    };
    let mut body = vec![tag.clone(), Word(vec![kind]), Word::from_value(value)];
    body.push(checksum(&body));
    body
}

/// Parses a body whose tag is already known to match. Errors describe the
/// first defect found.
pub fn decode_body(body: &[Word]) -> Result<Content, String> {
    if body.len() != 4 {
        return Err(format!("body has {} words, expected 4", body.len()));
    }
    if checksum(&body[..3]) != body[3] {
        return Err("checksum mismatch".into());
    }
    let value = body[2]
        .to_value()
        .ok_or_else(|| format!("value word '{}' is not canonical", body[2]))?;
    match body[1].symbols() {
        [KIND_STATUS] if value == STATUS_READY => Ok(Content::Ready),
        [KIND_STATUS] => Err(format!("unknown status code {value}")),
        [KIND_POINTER] => Ok(Content::Pointer(value)),
        _ => Err(format!("unknown kind word '{}'", body[1])),
    }
}
