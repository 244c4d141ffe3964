//! User–item interactions: loading, rating deduplication, and per-user
//! author-gender profile statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{check_header, extract_isbns, AuthorGender, Isbn};
use crate::{Error, Result};

/// Whether rating values carry signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Explicit,
    Implicit,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Explicit => "explicit",
            Mode::Implicit => "implicit",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "explicit" => Ok(Mode::Explicit),
            "implicit" => Ok(Mode::Implicit),
            _ => Err(Error::InvalidInput(format!("mode must be explicit or implicit, got {s:?}"))),
        }
    }
}

/// Inclusive rating scale declared for a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub lo: f64,
    pub hi: f64,
}

impl RatingScale {
    pub fn new(lo: f64, hi: f64) -> Result<RatingScale> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("bad rating scale {lo}:{hi}")));
        }
        Ok(RatingScale { lo, hi })
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.lo, self.hi)
    }
}

impl FromStr for RatingScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<RatingScale> {
        let bad = || Error::InvalidInput(format!("rating scale must look like lo:hi, got {s:?}"));
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        RatingScale::new(lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for RatingScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, rating: Option<f64>) -> Interaction {
        Interaction {
            user_id: user.into(),
            item_id: item.into(),
            rating,
            timestamp: None,
        }
    }
}

/// Deduplicated interactions, sorted by user then item.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSet {
    mode: Mode,
    scale: Option<RatingScale>,
    interactions: Vec<Interaction>,
    n_users: usize,
    n_items: usize,
}

impl InteractionSet {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn scale(&self) -> Option<RatingScale> {
        self.scale
    }

    pub fn with_scale(mut self, scale: Option<RatingScale>) -> InteractionSet {
        self.scale = scale;
        self
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Distinct user ids in ascending order.
    pub fn users(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::with_capacity(self.n_users);
        for i in &self.interactions {
            if out.last() != Some(&i.user_id.as_str()) {
                out.push(&i.user_id);
            }
        }
        out
    }

    /// The interactions of one user, or `None` if the user is absent.
    pub fn user_interactions(&self, user: &str) -> Option<&[Interaction]> {
        let start = self.interactions.partition_point(|i| i.user_id.as_str() < user);
        let end = self.interactions.partition_point(|i| i.user_id.as_str() <= user);
        (start < end).then(|| &self.interactions[start..end])
    }

    /// Items per user.
    pub fn profile_sizes(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for i in &self.interactions {
            *out.entry(i.user_id.as_str()).or_insert(0) += 1;
        }
        out
    }

    /// A copy without the given (user, item) pairs.
    pub fn without_pairs(&self, pairs: &BTreeSet<(String, String)>) -> InteractionSet {
        let kept: Vec<Interaction> = self
            .interactions
            .iter()
            .filter(|i| !pairs.contains(&(i.user_id.clone(), i.item_id.clone())))
            .cloned()
            .collect();
        InteractionSet::from_sorted(self.mode, self.scale, kept)
    }

    fn from_sorted(mode: Mode, scale: Option<RatingScale>, interactions: Vec<Interaction>) -> InteractionSet {
        let n_users = interactions
            .windows(2)
            .filter(|w| w[0].user_id != w[1].user_id)
            .count()
            + usize::from(!interactions.is_empty());
        let n_items = interactions.iter().map(|i| i.item_id.as_str()).collect::<BTreeSet<_>>().len();
        InteractionSet {
            mode,
            scale,
            interactions,
            n_users,
            n_items,
        }
    }
}

/// Rows dropped during deduplication.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rejected {
    pub missing_rating: Vec<Interaction>,
}

/// Median with the mean-of-middle-two convention for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Collapse repeated (user, item) pairs.
///
/// Explicit mode keeps the median rating and rejects rows without one;
/// implicit mode drops ratings entirely. The latest timestamp is kept.
pub fn dedupe_ratings(rows: Vec<Interaction>, mode: Mode) -> (InteractionSet, Rejected) {
    let mut rejected = Rejected::default();
    let mut groups: BTreeMap<(String, String), (Vec<f64>, Option<i64>)> = BTreeMap::new();
    for row in rows {
        if mode == Mode::Explicit && row.rating.is_none() {
            rejected.missing_rating.push(row);
            continue;
        }
        let entry = groups.entry((row.user_id, row.item_id)).or_default();
        if let Some(r) = row.rating {
            entry.0.push(r);
        }
        entry.1 = entry.1.max(row.timestamp);
    }

    let interactions = groups
        .into_iter()
        .map(|((user_id, item_id), (mut ratings, timestamp))| Interaction {
            user_id,
            item_id,
            rating: match mode {
                Mode::Explicit => median(&mut ratings),
                Mode::Implicit => None,
            },
            timestamp,
        })
        .collect();
    (InteractionSet::from_sorted(mode, None, interactions), rejected)
}

/// Known-gender profile counts for one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub user_id: String,
    /// Distinct female- or male-authored items.
    pub n: u64,
    /// Female-authored items among those.
    pub y: u64,
}

/// Count a user's known-gender and female-authored items.
pub fn profile_stats(
    user_id: &str,
    interactions: &InteractionSet,
    genders: &BTreeMap<String, AuthorGender>,
) -> Result<ProfileStats> {
    let rows = interactions
        .user_interactions(user_id)
        .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
    let (mut n, mut y) = (0, 0);
    for row in rows {
        match genders.get(&row.item_id) {
            Some(AuthorGender::Female) => {
                n += 1;
                y += 1;
            }
            Some(AuthorGender::Male) => n += 1,
            _ => {}
        }
    }
    Ok(ProfileStats {
        user_id: user_id.to_string(),
        n,
        y,
    })
}

/// Profile statistics for every user, in user order.
pub fn all_profile_stats(interactions: &InteractionSet, genders: &BTreeMap<String, AuthorGender>) -> Vec<ProfileStats> {
    interactions
        .users()
        .into_iter()
        .map(|u| profile_stats(u, interactions, genders).expect("user present"))
        .collect()
}

/// Outcome of loading `interactions.csv`.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub set: InteractionSet,
    pub rejected: Rejected,
    /// Rows whose item reference mapped to no cluster.
    pub unmapped: usize,
    pub raw_rows: usize,
}

/// Resolves raw item references (item ids or ISBN text) to item ids.
pub struct ItemResolver {
    isbns: HashMap<Isbn, String>,
}

impl ItemResolver {
    pub fn new(isbns: HashMap<Isbn, String>) -> ItemResolver {
        ItemResolver { isbns }
    }

    pub fn resolve(&self, raw: &str) -> Option<String> {
        if raw.starts_with("it:") {
            return Some(raw.to_string());
        }
        extract_isbns(raw).into_iter().find_map(|i| self.isbns.get(&i).cloned())
    }
}

/// Load `interactions.csv` (`user,item,rating,timestamp`).
///
/// With a resolver, the item column may hold ISBN text which is mapped to
/// item ids; unresolvable rows are counted and dropped. In explicit mode every
/// present rating must lie within `scale`.
pub fn load_interactions<R: Read>(
    input: R,
    mode: Mode,
    scale: Option<RatingScale>,
    resolver: Option<&ItemResolver>,
) -> Result<LoadReport> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &["user", "item", "rating", "timestamp"])?;
    let mut rows = Vec::new();
    let mut unmapped = 0;
    let mut raw_rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        raw_rows += 1;
        let line = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: "interactions.csv".into(),
            line,
            message,
        };
        let item = match resolver {
            Some(res) => match res.resolve(&rec[1]) {
                Some(item) => item,
                None => {
                    unmapped += 1;
                    continue;
                }
            },
            None => rec[1].to_string(),
        };
        let rating = match rec[2].trim() {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| parse_err(format!("bad rating {s:?}")))?),
        };
        if mode == Mode::Explicit {
            if let (Some(r), Some(sc)) = (rating, scale) {
                if !sc.contains(r) {
                    return Err(parse_err(format!("rating {r} outside scale {sc}")));
                }
            }
        }
        let timestamp = match rec[3].trim() {
            "" => None,
            s => Some(s.parse::<i64>().map_err(|_| parse_err(format!("bad timestamp {s:?}")))?),
        };
        rows.push(Interaction {
            user_id: rec[0].to_string(),
            item_id: item,
            rating,
            timestamp,
        });
    }
    let (set, rejected) = dedupe_ratings(rows, mode);
    Ok(LoadReport {
        set: set.with_scale(scale),
        rejected,
        unmapped,
        raw_rows,
    })
}

/// Write interactions in the `interactions.csv` layout.
pub fn write_interactions<W: Write>(out: W, rows: &[Interaction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user", "item", "rating", "timestamp"])?;
    for row in rows {
        w.write_record([
            row.user_id.clone(),
            row.item_id.clone(),
            row.rating.map(|r| r.to_string()).unwrap_or_default(),
            row.timestamp.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
