//! Dataset ingestion and preprocessing.
//!
//! The pipeline mirrors the usual offline-evaluation recipe: load raw
//! (user, item, value) triples, keep the most active users and most
//! interacted items, binarize values into liked/not-liked, then split each
//! user's positives into a train half (feature construction) and a test
//! half (ground-truth attraction fitting). Suppliers and topics come from
//! sidecar TSV files keyed by item id.
//!
//! Every stage is a pure function with deterministic output; the split's
//! randomness is derived per user from the split seed, so adding or
//! removing one user never perturbs another user's split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// Where a table came from; decides how duplicate rows aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Explicit ratings; duplicates keep the last value.
    MovielensLike,
    /// Interaction counts; duplicates sum.
    LastfmLike,
    /// Generated ratings; duplicates keep the last value.
    Synthetic,
}

impl Provenance {
    fn sums_duplicates(self) -> bool {
        matches!(self, Provenance::LastfmLike)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::MovielensLike => "movielens-like",
            Provenance::LastfmLike => "lastfm-like",
            Provenance::Synthetic => "synthetic",
        };
        f.write_str(s)
    }
}

/// One (user, item, value) triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: u64,
    pub item: u64,
    pub value: f64,
}

/// Deduplicated interaction triples, sorted by (user, item).
#[derive(Debug, Clone)]
pub struct InteractionTable {
    pub provenance: Provenance,
    rows: Vec<Interaction>,
}

impl InteractionTable {
    /// Build from raw triples, aggregating duplicates per provenance.
    pub fn from_rows(provenance: Provenance, raw: Vec<Interaction>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyTable { context: "input rows".into() });
        }
        let mut agg: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for r in raw {
            if !r.value.is_finite() {
                return Err(Error::NonFinite { context: "interaction value" });
            }
            agg.entry((r.user, r.item))
                .and_modify(|v| {
                    if provenance.sums_duplicates() {
                        *v += r.value;
                    } else {
                        *v = r.value;
                    }
                })
                .or_insert(r.value);
        }
        let rows = agg
            .into_iter()
            .map(|((user, item), value)| Interaction { user, item, value })
            .collect();
        Ok(Self { provenance, rows })
    }

    pub fn rows(&self) -> &[Interaction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn distinct_users(&self) -> usize {
        self.rows.iter().map(|r| r.user).collect::<BTreeSet<_>>().len()
    }

    pub fn distinct_items(&self) -> usize {
        self.rows.iter().map(|r| r.item).collect::<BTreeSet<_>>().len()
    }
}

/// Shape of a delimited interaction file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FormatSpec {
    pub delimiter: char,
    pub has_header: bool,
    pub user_col: usize,
    pub item_col: usize,
    pub value_col: usize,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: false,
            user_col: 0,
            item_col: 1,
            value_col: 2,
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse a delimited interaction file into a deduplicated table.
/// Malformed rows fail hard with their 1-based line number.
pub fn load_interactions(
    path: &Path,
    format: &FormatSpec,
    provenance: Provenance,
) -> Result<InteractionTable> {
    let text = read_file(path)?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let need_cols = format.user_col.max(format.item_col).max(format.value_col) + 1;
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if format.has_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter).collect();
        if fields.len() < need_cols {
            return Err(parse_err(
                line_no,
                format!("expected at least {need_cols} fields, found {}", fields.len()),
            ));
        }
        let user: u64 = fields[format.user_col].trim().parse().map_err(|_| {
            parse_err(line_no, format!("bad user id {:?}", fields[format.user_col]))
        })?;
        let item: u64 = fields[format.item_col].trim().parse().map_err(|_| {
            parse_err(line_no, format!("bad item id {:?}", fields[format.item_col]))
        })?;
        let value: f64 = fields[format.value_col].trim().parse().map_err(|_| {
            parse_err(line_no, format!("bad value {:?}", fields[format.value_col]))
        })?;
        raw.push(Interaction { user, item, value });
    }
    if raw.is_empty() {
        return Err(Error::EmptyTable { context: format!("file {}", path.display()) });
    }
    InteractionTable::from_rows(provenance, raw)
}

/// Keep the `n_users` most active users and `n_items` most interacted
/// items, both ranked on the raw table simultaneously, ties broken by
/// ascending id. Interactions outside the kept cross-product are dropped.
pub fn top_n_filter(
    table: &InteractionTable,
    n_users: usize,
    n_items: usize,
) -> Result<InteractionTable> {
    if n_users == 0 || n_items == 0 {
        return Err(Error::InvalidParameter {
            name: "top_n",
            reason: "user and item budgets must be at least 1".into(),
        });
    }
    let mut user_counts: BTreeMap<u64, usize> = BTreeMap::new();
    let mut item_counts: BTreeMap<u64, usize> = BTreeMap::new();
    for r in table.rows() {
        *user_counts.entry(r.user).or_default() += 1;
        *item_counts.entry(r.item).or_default() += 1;
    }
    let keep = |counts: &BTreeMap<u64, usize>, n: usize, what: &'static str| -> Result<BTreeSet<u64>> {
        if counts.len() < n {
            return Err(Error::NotEnough { what, need: n, have: counts.len() });
        }
        let mut ranked: Vec<(u64, usize)> = counts.iter().map(|(&id, &c)| (id, c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked[..n].iter().map(|&(id, _)| id).collect())
    };
    let kept_users = keep(&user_counts, n_users, "users")?;
    let kept_items = keep(&item_counts, n_items, "items")?;

    let rows: Vec<Interaction> = table
        .rows()
        .iter()
        .filter(|r| kept_users.contains(&r.user) && kept_items.contains(&r.item))
        .copied()
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyTable { context: "top-n filter".into() });
    }
    Ok(InteractionTable { provenance: table.provenance, rows })
}

/// How raw values collapse into liked (1) / not liked (0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeRule {
    /// Liked iff the rating equals the given value exactly.
    RatingEquals(f64),
    /// Liked iff the count strictly exceeds the given value.
    CountGreater(f64),
}

impl BinarizeRule {
    fn apply(self, value: f64) -> f64 {
        let liked = match self {
            BinarizeRule::RatingEquals(v) => value == v,
            BinarizeRule::CountGreater(v) => value > v,
        };
        if liked {
            1.0
        } else {
            0.0
        }
    }
}

/// Map every value to 0 or 1 under the rule. Idempotent for the rules'
/// own outputs is not guaranteed in general (a 1 is not equal to rating 5),
/// so this is applied exactly once in the pipeline.
pub fn binarize(table: &InteractionTable, rule: BinarizeRule) -> InteractionTable {
    let rows = table
        .rows()
        .iter()
        .map(|r| Interaction { value: rule.apply(r.value), ..*r })
        .collect();
    InteractionTable { provenance: table.provenance, rows }
}

/// Per-user outcome of the train/test split.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct UserSplitCounts {
    pub positives: usize,
    pub train: usize,
    pub test: usize,
    /// True when the user cannot be evaluated (no held-out positives).
    pub excluded: bool,
}

/// Summary of one split, serialized as the split report JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitReport {
    pub ratio: f64,
    pub seed: u64,
    pub eligible_users: usize,
    pub excluded_users: usize,
    pub users: BTreeMap<u64, UserSplitCounts>,
}

/// Randomly partition each user's positive items into train and test
/// shares. Train gets `floor(n * ratio + 0.5)` of the user's `n` positives;
/// users with fewer than two positives keep their positive in train and
/// are flagged excluded. Rows with value 0 are treated as absence and
/// appear in neither half.
pub fn split_profile(
    table: &InteractionTable,
    ratio: f64,
    seed: u64,
) -> Result<(InteractionTable, InteractionTable, SplitReport)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter {
            name: "ratio",
            reason: format!("must be in (0, 1), got {ratio}"),
        });
    }
    let mut positives: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for r in table.rows() {
        if r.value == 1.0 {
            positives.entry(r.user).or_default().push(r.item);
        }
    }
    if positives.is_empty() {
        return Err(Error::EmptyTable { context: "binarized positives".into() });
    }

    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    let mut users = BTreeMap::new();
    for (&user, items) in &positives {
        // BTreeMap order makes `items` ascending already; the shuffle then
        // depends only on (seed, user).
        let mut pool = items.clone();
        let mut rng = seeding::stream(seed, &[seeding::role::SPLIT, user]);
        shuffle(&mut pool, &mut rng);

        let n = pool.len();
        let (n_train, excluded) = if n < 2 {
            (n, true)
        } else {
            let t = ((n as f64) * ratio + 0.5).floor() as usize;
            (t.min(n), t == n)
        };
        for &item in &pool[..n_train] {
            train_rows.push(Interaction { user, item, value: 1.0 });
        }
        for &item in &pool[n_train..] {
            test_rows.push(Interaction { user, item, value: 1.0 });
        }
        users.insert(
            user,
            UserSplitCounts { positives: n, train: n_train, test: n - n_train, excluded },
        );
    }
    let excluded_users = users.values().filter(|u| u.excluded).count();
    let report = SplitReport {
        ratio,
        seed,
        eligible_users: users.len() - excluded_users,
        excluded_users,
        users,
    };
    let train = InteractionTable::from_rows(table.provenance, train_rows)?;
    let test = if test_rows.is_empty() {
        InteractionTable { provenance: table.provenance, rows: vec![] }
    } else {
        InteractionTable::from_rows(table.provenance, test_rows)?
    };
    Ok((train, test, report))
}

/// Fisher-Yates with explicit modulo indexing, kept local so split layouts
/// cannot drift with rand's internal shuffle implementation.
fn shuffle<T, R: rand::Rng>(v: &mut [T], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = (rng.random::<u64>() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
}

/// Item-level sidecar data: supplier names and topic labels.
#[derive(Debug, Clone, Default)]
pub struct CatalogMetadata {
    pub supplier_of: BTreeMap<u64, String>,
    pub topics_of: BTreeMap<u64, BTreeSet<String>>,
}

/// Load `item<TAB>supplier` and `item<TAB>topic` tables. An item may carry
/// many topic rows but only one supplier; conflicting supplier rows fail.
pub fn load_metadata(path_suppliers: &Path, path_topics: &Path) -> Result<CatalogMetadata> {
    let mut meta = CatalogMetadata::default();
    let parse_pairs = |path: &Path| -> Result<Vec<(u64, String)>> {
        let text = read_file(path)?;
        let mut out = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let item_s = parts.next().unwrap_or_default();
            let label = parts.next().ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: "expected item<TAB>label".into(),
            })?;
            let item: u64 = item_s.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: format!("bad item id {item_s:?}"),
            })?;
            out.push((item, label.trim().to_string()));
        }
        Ok(out)
    };

    for (item, supplier) in parse_pairs(path_suppliers)? {
        if let Some(existing) = meta.supplier_of.get(&item) {
            if *existing != supplier {
                return Err(Error::Parse {
                    path: path_suppliers.to_path_buf(),
                    line: 0,
                    reason: format!(
                        "item {item} has conflicting suppliers {existing:?} and {supplier:?}"
                    ),
                });
            }
        } else {
            meta.supplier_of.insert(item, supplier);
        }
    }
    for (item, topic) in parse_pairs(path_topics)? {
        meta.topics_of.entry(item).or_default().insert(topic);
    }
    Ok(meta)
}

/// Index-interned view of a preprocessed dataset: items and users get
/// dense indices (ascending id order), supplier and topic names get
/// sorted-unique index tables.
#[derive(Debug, Clone)]
pub struct Catalog {
    item_ids: Vec<u64>,
    item_index: BTreeMap<u64, usize>,
    user_ids: Vec<u64>,
    user_index: BTreeMap<u64, usize>,
    supplier_names: Vec<String>,
    supplier_of: Vec<usize>,
    topic_names: Vec<String>,
    topics_of: Vec<Vec<usize>>,
}

impl Catalog {
    /// Intern every user and item of the (filtered, binarized) table.
    /// Every item must have a supplier; topics are optional per item but
    /// the catalog as a whole needs at least one topic label.
    pub fn build(table: &InteractionTable, meta: &CatalogMetadata) -> Result<Self> {
        let item_set: BTreeSet<u64> = table.rows().iter().map(|r| r.item).collect();
        let user_set: BTreeSet<u64> = table.rows().iter().map(|r| r.user).collect();
        if item_set.is_empty() {
            return Err(Error::EmptyTable { context: "catalog items".into() });
        }
        let item_ids: Vec<u64> = item_set.into_iter().collect();
        let user_ids: Vec<u64> = user_set.into_iter().collect();
        let item_index: BTreeMap<u64, usize> =
            item_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let user_index: BTreeMap<u64, usize> =
            user_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let mut supplier_names: Vec<String> = Vec::new();
        for &item in &item_ids {
            match meta.supplier_of.get(&item) {
                Some(s) => supplier_names.push(s.clone()),
                None => return Err(Error::MissingSupplier { item }),
            }
        }
        supplier_names.sort_unstable();
        supplier_names.dedup();
        let supplier_index: BTreeMap<&str, usize> = supplier_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let supplier_of: Vec<usize> = item_ids
            .iter()
            .map(|item| supplier_index[meta.supplier_of[item].as_str()])
            .collect();

        let mut topic_names: Vec<String> = item_ids
            .iter()
            .filter_map(|item| meta.topics_of.get(item))
            .flatten()
            .cloned()
            .collect();
        topic_names.sort_unstable();
        topic_names.dedup();
        if topic_names.is_empty() {
            return Err(Error::EmptyTable { context: "topic labels".into() });
        }
        let topic_index: BTreeMap<&str, usize> = topic_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let topics_of: Vec<Vec<usize>> = item_ids
            .iter()
            .map(|item| {
                meta.topics_of
                    .get(item)
                    .map(|set| set.iter().map(|t| topic_index[t.as_str()]).collect())
                    .unwrap_or_default()
            })
            .collect();

        Ok(Self {
            item_ids,
            item_index,
            user_ids,
            user_index,
            supplier_names,
            supplier_of,
            topic_names,
            topics_of,
        })
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_suppliers(&self) -> usize {
        self.supplier_names.len()
    }

    pub fn num_topics(&self) -> usize {
        self.topic_names.len()
    }

    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn item_index(&self, item: u64) -> Result<usize> {
        self.item_index
            .get(&item)
            .copied()
            .ok_or(Error::UnknownItem { item })
    }

    pub fn user_index(&self, user: u64) -> Option<usize> {
        self.user_index.get(&user).copied()
    }

    /// Supplier index per item index.
    pub fn supplier_of(&self) -> &[usize] {
        &self.supplier_of
    }

    pub fn supplier_name(&self, supplier: usize) -> &str {
        &self.supplier_names[supplier]
    }

    /// Topic indices per item index.
    pub fn topics_of(&self) -> &[Vec<usize>] {
        &self.topics_of
    }
}

/// Binary users-by-items matrix of the train half, aligned to catalog
/// indices; feeds the SVD.
pub fn train_matrix(catalog: &Catalog, train: &InteractionTable) -> Result<nalgebra::DMatrix<f64>> {
    let mut m = nalgebra::DMatrix::zeros(catalog.num_users(), catalog.num_items());
    for r in train.rows() {
        if r.value != 1.0 {
            continue;
        }
        let item = catalog.item_index(r.item)?;
        let user = catalog.user_index(r.user).ok_or(Error::Config(format!(
            "train row references user {} outside the catalog",
            r.user
        )))?;
        m[(user, item)] = 1.0;
    }
    Ok(m)
}

/// Test-half positives per user, as catalog item indices.
pub fn test_positives(
    catalog: &Catalog,
    test: &InteractionTable,
) -> Result<BTreeMap<u64, Vec<usize>>> {
    let mut out: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for r in test.rows() {
        if r.value != 1.0 {
            continue;
        }
        out.entry(r.user).or_default().push(catalog.item_index(r.item)?);
    }
    for items in out.values_mut() {
        items.sort_unstable();
    }
    Ok(out)
}
