//! Author name normalization for authority matching.
//!
//! Names appear both as "Last, First" and "First Last". We emit both orders so
//! that a book record and an authority record match regardless of which form
//! each one uses.

use std::collections::BTreeSet;

fn clean(text: &str) -> String {
    let folded: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalize a raw name into its plain and swapped forms.
///
/// With a comma, the swapped form moves the pre-comma segment to the end.
/// Without one, the final token moves to the front; multi-word surnames are
/// therefore mis-swapped, which only costs recall. Blank input gives an empty
/// set.
pub fn normalize_name(raw: &str) -> BTreeSet<String> {
    let mut forms = BTreeSet::new();
    let plain = clean(raw);
    if plain.is_empty() {
        return forms;
    }

    let swapped = match raw.split_once(',') {
        Some((last, rest)) => clean(&format!("{rest} {last}")),
        None => {
            let tokens: Vec<&str> = plain.split(' ').collect();
            let (last, init) = tokens.split_last().expect("non-empty");
            std::iter::once(*last)
                .chain(init.iter().copied())
                .collect::<Vec<_>>()
                .join(" ")
        }
    };

    forms.insert(plain);
    if !swapped.is_empty() {
        forms.insert(swapped);
    }
    forms
}
