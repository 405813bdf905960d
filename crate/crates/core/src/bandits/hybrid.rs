//! CascadeHybrid: concatenated relevance and coverage-gain features.

use std::sync::Arc;

use crate::bandits::select::select_greedy_gain;
use crate::bandits::{CascadePolicy, ExposureLedger, PolicyConfig, PolicyKind, SelectionTrace};
use crate::error::Result;
use crate::features::FeatureBundle;
use crate::linalg::RidgeState;

/// Learns attraction over `[relevance; coverage gain]` with a single ridge
/// state, combining personalization with diversity awareness. The gain
/// block is prefix-dependent, so lists are built greedily per position.
pub struct CascadeHybrid {
    cfg: PolicyConfig,
    ridge: RidgeState,
    bundle: Arc<FeatureBundle>,
}

impl CascadeHybrid {
    pub fn new(cfg: PolicyConfig, bundle: Arc<FeatureBundle>) -> Result<Self> {
        cfg.validate()?;
        let ridge = RidgeState::new(bundle.hybrid_dim(), cfg.reg)?;
        Ok(Self { cfg, ridge, bundle })
    }
}

impl CascadePolicy for CascadeHybrid {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Hybrid
    }

    fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    fn ridge_mut(&mut self) -> &mut RidgeState {
        &mut self.ridge
    }

    fn select(&self, ledger: &ExposureLedger) -> Result<SelectionTrace> {
        select_greedy_gain(&self.ridge, &self.bundle, true, &self.cfg, ledger)
    }
}
