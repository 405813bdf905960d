//! List-construction routines shared by the policies.
//!
//! Relevance-only selection scores every item once and takes the top K;
//! gain-based selection rebuilds candidate features per position because a
//! gain vector depends on what the list prefix already covers. Both break
//! utility ties by ascending item id.

use crate::bandits::{utility, ExposureLedger, PolicyConfig, SelectionTrace};
use crate::error::{Error, Result};
use crate::features::FeatureBundle;
use crate::linalg::RidgeState;

fn check_catalog(k: usize, num_items: usize) -> Result<()> {
    if num_items == 0 {
        return Err(Error::EmptyTable { context: "policy catalog".into() });
    }
    if k > num_items {
        return Err(Error::NotEnough { what: "items", need: k, have: num_items });
    }
    Ok(())
}

/// Score all items with position-independent relevance features and return
/// the K highest utilities in descending order.
pub fn select_relevance(
    ridge: &RidgeState,
    bundle: &FeatureBundle,
    cfg: &PolicyConfig,
    ledger: &ExposureLedger,
) -> Result<SelectionTrace> {
    let l = bundle.num_items();
    check_catalog(cfg.k, l)?;
    let t = ledger.step();
    let theta = ridge.theta();
    let th = theta.as_slice();

    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(l);
    for item in 0..l {
        let x = bundle.relevance.row(item);
        let est: f64 = x.iter().zip(th).map(|(a, b)| a * b).sum();
        let width = ridge.ucb_width(x)?;
        let u = utility(est, width, cfg, ledger.count(item), t)?;
        scored.push((u, item));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(cfg.k);

    let list: Vec<usize> = scored.iter().map(|&(_, i)| i).collect();
    let features = list.iter().map(|&i| bundle.relevance.row(i).to_vec()).collect();
    Ok(SelectionTrace { list, features })
}

/// Build the list greedily: at each position, score every remaining item
/// with its prefix-dependent feature and append the utility argmax.
///
/// With `with_relevance` the feature is `[relevance; coverage gain]`,
/// otherwise the coverage gain alone. The recorded feature vectors are
/// bit-identical to the ones scored.
pub fn select_greedy_gain(
    ridge: &RidgeState,
    bundle: &FeatureBundle,
    with_relevance: bool,
    cfg: &PolicyConfig,
    ledger: &ExposureLedger,
) -> Result<SelectionTrace> {
    let l = bundle.num_items();
    check_catalog(cfg.k, l)?;
    let t = ledger.step();
    let theta = ridge.theta();
    let th = theta.as_slice();
    let r = if with_relevance { bundle.relevance_dim() } else { 0 };
    let dim = r + bundle.topic_dim();
    if ridge.dim() != dim {
        return Err(Error::DimensionMismatch {
            context: "greedy selection features",
            expected: ridge.dim(),
            got: dim,
        });
    }

    let mut prefix = vec![0.0; bundle.topic_dim()];
    // Scratch holds one candidate's dense feature at a time. The gain block
    // is sparse, so only the candidate's own topic slots are written and
    // cleared; the relevance block is fully overwritten per candidate.
    let mut scratch = vec![0.0; dim];
    let mut taken = vec![false; l];
    let mut list = Vec::with_capacity(cfg.k);
    let mut features = Vec::with_capacity(cfg.k);

    for _ in 0..cfg.k {
        let mut best: Option<(f64, usize)> = None;
        for item in 0..l {
            if taken[item] {
                continue;
            }
            let mut est = 0.0;
            if with_relevance {
                let x = bundle.relevance.row(item);
                scratch[..r].copy_from_slice(x);
                est += x.iter().zip(&th[..r]).map(|(a, b)| a * b).sum::<f64>();
            }
            bundle.topics.gain_into(item, &prefix, &mut scratch, r);
            est += bundle.topics.gain_dot(item, &prefix, th, r);
            let width = ridge.ucb_width(&scratch)?;
            bundle.topics.clear_gain(item, &mut scratch, r);
            let u = utility(est, width, cfg, ledger.count(item), t)?;
            // Strict improvement keeps the smallest id on ties.
            if best.map_or(true, |(bu, _)| u > bu) {
                best = Some((u, item));
            }
        }
        let (_, chosen) = best.expect("catalog checked nonempty");
        let mut feat = vec![0.0; dim];
        if with_relevance {
            feat[..r].copy_from_slice(bundle.relevance.row(chosen));
        }
        bundle.topics.gain_into(chosen, &prefix, &mut feat, r);
        bundle.topics.absorb(chosen, &mut prefix);
        taken[chosen] = true;
        list.push(chosen);
        features.push(feat);
    }
    Ok(SelectionTrace { list, features })
}
