//! CascadeLSB: topic-coverage gain features with greedy list building.

use std::sync::Arc;

use crate::bandits::select::select_greedy_gain;
use crate::bandits::{CascadePolicy, ExposureLedger, PolicyConfig, PolicyKind, SelectionTrace};
use crate::error::Result;
use crate::features::FeatureBundle;
use crate::linalg::RidgeState;

/// Learns attraction as a linear function of the marginal topic coverage an
/// item adds to the list built so far.
pub struct CascadeLsb {
    cfg: PolicyConfig,
    ridge: RidgeState,
    bundle: Arc<FeatureBundle>,
}

impl CascadeLsb {
    pub fn new(cfg: PolicyConfig, bundle: Arc<FeatureBundle>) -> Result<Self> {
        cfg.validate()?;
        let ridge = RidgeState::new(bundle.topic_dim(), cfg.reg)?;
        Ok(Self { cfg, ridge, bundle })
    }
}

impl CascadePolicy for CascadeLsb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Lsb
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
        select_greedy_gain(&self.ridge, &self.bundle, false, &self.cfg, ledger)
    }
}
