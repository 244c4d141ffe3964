//! Mock recommenders with known propagation behaviour.

use std::collections::BTreeMap;

use recfair_core::ingest::AuthorGender;
use recfair_core::interactions::{profile_stats, InteractionSet};
use recfair_core::recommend::{recommend, train, Algorithm, Coverage, ModelConfig, RatingMatrix, RecList};
use recfair_core::{Error, Result};

pub const PROFILE_COPY: &str = "profile-copy";

/// Lists that copy each user's own author-gender balance: `n` known-gender
/// items from the popularity ranking, of which `round(n · y_u / n_u)` are
/// female-authored, kept in popularity order. A perfect propagator, so its
/// regression slope should be close to 1 with intercept near 0.
pub fn profile_copy(
    set: &InteractionSet,
    genders: &BTreeMap<String, AuthorGender>,
    users: &[String],
    n: usize,
) -> Result<Vec<RecList>> {
    let matrix = RatingMatrix::from_interactions(set)?;
    let model = train(&matrix, &ModelConfig::new(Algorithm::Popular))?;
    users
        .iter()
        .map(|u| {
            let p = profile_stats(u, set, genders)?;
            if p.n == 0 {
                return Err(Error::InvalidInput(format!("user {u} has no known-gender profile items to copy")));
            }
            let want_female = (n as f64 * p.y as f64 / p.n as f64).round() as usize;
            let ranked = recommend(&model, u, matrix.n_items(), &matrix)?;
            let (mut female, mut male) = (0, 0);
            let mut list = ranked.clone();
            list.entries.retain(|e| match genders.get(&e.item_id) {
                Some(AuthorGender::Female) if female < want_female => {
                    female += 1;
                    true
                }
                Some(AuthorGender::Male) if male < n - want_female => {
                    male += 1;
                    true
                }
                _ => false,
            });
            list.algorithm = PROFILE_COPY.to_string();
            list.coverage = if list.len() == n { Coverage::Full } else { Coverage::Short };
            Ok(list)
        })
        .collect()
}
