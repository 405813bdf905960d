//! Synthetic long-tail dataset generator.
//!
//! Produces an interaction table with the shape the harness cares about:
//! Zipf-like item popularity (a short popular head, a long rarely-touched
//! tail), users with topic tastes, ratings concentrated on taste matches,
//! topic labels that repeat across items, and a skewed supplier
//! assignment where a few suppliers own the popular head. The repo's
//! committed fixtures are one frozen draw of this generator.

use std::path::Path;

use rand::Rng;

use crate::data::{Interaction, InteractionTable, Provenance};
use crate::error::{Error, Result};
use crate::seeding::{self, role};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_topics: usize,
    pub num_suppliers: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_users: 240,
            num_items: 360,
            num_topics: 12,
            num_suppliers: 40,
            seed: 20240,
        }
    }
}

/// Generated tables, ready to serialize or to feed the pipeline directly.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub interactions: InteractionTable,
    /// (item id, supplier name) pairs, one per item.
    pub suppliers: Vec<(u64, String)>,
    /// (item id, topic name) pairs, one per item-topic edge.
    pub topics: Vec<(u64, String)>,
}

fn item_id(i: usize) -> u64 {
    1000 + i as u64
}

fn user_id(u: usize) -> u64 {
    1 + u as u64
}

/// Draw `amount` distinct indices weighted by `weights`, via the
/// exponential-keys trick: take the largest `u^(1/w)` keys.
fn weighted_sample<R: Rng>(weights: &[f64], amount: usize, rng: &mut R) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random();
            (u.powf(1.0 / w.max(1e-12)), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.truncate(amount);
    keyed.into_iter().map(|(_, i)| i).collect()
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    if cfg.num_users < 2 || cfg.num_items < 4 || cfg.num_topics < 2 || cfg.num_suppliers < 1 {
        return Err(Error::InvalidParameter {
            name: "synthetic config",
            reason: "needs >=2 users, >=4 items, >=2 topics, >=1 supplier".into(),
        });
    }

    // Item topic sets: sizes skewed toward 1-2 topics, topic choice skewed
    // toward low-index topics so signatures repeat across many items.
    let mut rng = seeding::stream(cfg.seed, &[role::SYNTHETIC, 1]);
    let topic_weights: Vec<f64> = (0..cfg.num_topics)
        .map(|t| 1.0 / (1.0 + t as f64).powf(0.7))
        .collect();
    let mut topics_of: Vec<Vec<usize>> = Vec::with_capacity(cfg.num_items);
    for _ in 0..cfg.num_items {
        let roll: f64 = rng.random();
        let size = if roll < 0.45 {
            1
        } else if roll < 0.85 {
            2
        } else {
            3
        };
        let size = size.min(cfg.num_topics);
        let mut ts = weighted_sample(&topic_weights, size, &mut rng);
        ts.sort_unstable();
        topics_of.push(ts);
    }

    // Suppliers: block assignment with superlinear block growth, so early
    // suppliers own a handful of head items and late suppliers own wide
    // slabs of the tail.
    let suppliers: Vec<(u64, String)> = (0..cfg.num_items)
        .map(|i| {
            let frac = i as f64 / cfg.num_items as f64;
            let s = ((cfg.num_suppliers as f64) * frac.powf(1.4)) as usize;
            (item_id(i), format!("supplier-{:02}", s.min(cfg.num_suppliers - 1)))
        })
        .collect();

    // User tastes: 2-4 preferred topics each.
    let mut rng_users = seeding::stream(cfg.seed, &[role::SYNTHETIC, 2]);
    let mut tastes: Vec<Vec<usize>> = Vec::with_capacity(cfg.num_users);
    for _ in 0..cfg.num_users {
        let size = 2 + (rng_users.random::<u64>() % 3) as usize;
        let mut ts = weighted_sample(&topic_weights, size.min(cfg.num_topics), &mut rng_users);
        ts.sort_unstable();
        tastes.push(ts);
    }

    // Popularity: Zipf-like over item index.
    let popularity: Vec<f64> = (0..cfg.num_items)
        .map(|i| 1.0 / (1.0 + i as f64).powf(0.7))
        .collect();

    let mut rows = Vec::new();
    for u in 0..cfg.num_users {
        let mut rng_u = seeding::stream(cfg.seed, &[role::SYNTHETIC, 3, u as u64]);
        // Activity declines linearly across users, with jitter.
        let base = 30.0 + 110.0 * (cfg.num_users - u) as f64 / cfg.num_users as f64;
        let jitter = 0.8 + 0.4 * rng_u.random::<f64>();
        let n_u = ((base * jitter) as usize).min(cfg.num_items);

        let taste = &tastes[u];
        let weights: Vec<f64> = (0..cfg.num_items)
            .map(|i| {
                let shared = topics_of[i].iter().filter(|t| taste.contains(t)).count();
                let affinity = shared as f64 / topics_of[i].len().max(1) as f64;
                popularity[i] * (1.0 + 3.0 * affinity)
            })
            .collect();
        let picks = weighted_sample(&weights, n_u, &mut rng_u);

        for i in picks {
            let shared = topics_of[i].iter().filter(|t| taste.contains(t)).count();
            let affinity = shared as f64 / topics_of[i].len().max(1) as f64;
            let p_like = (0.08 + 0.75 * affinity).min(0.85);
            let rating = if rng_u.random::<f64>() < p_like {
                5.0
            } else {
                1.0 + (rng_u.random::<u64>() % 4) as f64
            };
            rows.push(Interaction { user: user_id(u), item: item_id(i), value: rating });
        }
    }

    let interactions = InteractionTable::from_rows(Provenance::Synthetic, rows)?;
    let topics: Vec<(u64, String)> = topics_of
        .iter()
        .enumerate()
        .flat_map(|(i, ts)| {
            ts.iter()
                .map(move |t| (item_id(i), format!("topic-{t:02}")))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(SyntheticDataset { interactions, suppliers, topics })
}

/// Serialize to `interactions.csv`, `suppliers.tsv`, `genres.tsv` in the
/// layouts the loaders expect.
pub fn write_to_dir(ds: &SyntheticDataset, dir: &Path) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut csv = String::new();
    for r in ds.interactions.rows() {
        csv.push_str(&format!("{},{},{}\n", r.user, r.item, r.value));
    }
    let path = dir.join("interactions.csv");
    std::fs::write(&path, csv).map_err(io_err(&path))?;

    let mut sup = String::new();
    for (item, name) in &ds.suppliers {
        sup.push_str(&format!("{item}\t{name}\n"));
    }
    let path = dir.join("suppliers.tsv");
    std::fs::write(&path, sup).map_err(io_err(&path))?;

    let mut gen = String::new();
    for (item, name) in &ds.topics {
        gen.push_str(&format!("{item}\t{name}\n"));
    }
    let path = dir.join("genres.tsv");
    std::fs::write(&path, gen).map_err(io_err(&path))?;
    Ok(())
}
