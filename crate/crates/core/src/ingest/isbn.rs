//! ISBN extraction from free-text catalog fields.
//!
//! Catalog ISBN fields are messy: prices, binding notes, several ISBNs in one
//! string, stray hyphens and spaces. We scan for runs of 10 or 13 digits
//! (optionally separated by single spaces or hyphens, with an `X` allowed as
//! the last character of the 10-digit form) and keep the digits. Check digits
//! are not validated, and 10- and 13-digit forms of the same book are not
//! converted into each other.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

static ISBN13_AT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[0-9](?:[ -]?[0-9]){12}").unwrap());
static ISBN10_AT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[0-9](?:[ -]?[0-9]){8}[ -]?[0-9Xx]").unwrap());
static CANONICAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[0-9]{13}|[0-9]{9}[0-9X])$").unwrap());

/// A cleaned ISBN: 10 or 13 characters, no separators.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Isbn(String);

impl Isbn {
    /// Wrap an already-clean ISBN string, rejecting anything that is not in
    /// canonical form.
    pub fn new(digits: impl Into<String>) -> Result<Isbn> {
        let digits = digits.into();
        if CANONICAL.is_match(&digits) {
            Ok(Isbn(digits))
        } else {
            Err(Error::InvalidInput(format!("not a canonical ISBN: {digits:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Isbn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Isbn {
    type Error = Error;

    fn try_from(value: String) -> Result<Isbn> {
        Isbn::new(value)
    }
}

impl From<Isbn> for String {
    fn from(value: Isbn) -> String {
        value.0
    }
}

fn is_isbn_char(b: u8) -> bool {
    b.is_ascii_digit() || b == b'X' || b == b'x'
}

fn clean(text: &str) -> String {
    text.bytes()
        .filter(|b| is_isbn_char(*b))
        .map(|b| (b as char).to_ascii_uppercase())
        .collect()
}

/// Extract every ISBN-shaped sequence from a raw field.
///
/// Matches are non-overlapping and scanned left to right. A match may not be
/// directly adjacent to another digit, so a 13-digit run never yields an
/// embedded 10-digit ISBN and longer digit runs yield nothing.
pub fn extract_isbns(raw_field: &str) -> Vec<Isbn> {
    let bytes = raw_field.as_bytes();
    let mut found = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if !bytes[pos].is_ascii_digit() || (pos > 0 && bytes[pos - 1].is_ascii_digit()) {
            pos += 1;
            continue;
        }
        let rest = &raw_field[pos..];
        let hit = [&*ISBN13_AT, &*ISBN10_AT].into_iter().find_map(|re| {
            let m = re.find(rest)?;
            let next = bytes.get(pos + m.end()).copied();
            match next {
                Some(b) if is_isbn_char(b) => None,
                _ => Some(m.end()),
            }
        });
        match hit {
            Some(len) => {
                found.push(Isbn(clean(&rest[..len])));
                pos += len;
            }
            None => pos += 1,
        }
    }
    found
}
