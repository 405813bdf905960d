//! CascadeLinUCB: latent-relevance features, top-K by utility.

use std::sync::Arc;

use crate::bandits::select::select_relevance;
use crate::bandits::{CascadePolicy, ExposureLedger, PolicyConfig, PolicyKind, SelectionTrace};
use crate::error::Result;
use crate::features::FeatureBundle;
use crate::linalg::RidgeState;

/// Learns attraction as a linear function of the item's SVD embedding;
/// features do not depend on list position, so selection is one scoring
/// pass plus a sort.
pub struct CascadeLinUcb {
    cfg: PolicyConfig,
    ridge: RidgeState,
    bundle: Arc<FeatureBundle>,
}

impl CascadeLinUcb {
    pub fn new(cfg: PolicyConfig, bundle: Arc<FeatureBundle>) -> Result<Self> {
        cfg.validate()?;
        let ridge = RidgeState::new(bundle.relevance_dim(), cfg.reg)?;
        Ok(Self { cfg, ridge, bundle })
    }
}

impl CascadePolicy for CascadeLinUcb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::LinUcb
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
        select_relevance(&self.ridge, &self.bundle, &self.cfg, ledger)
    }
}
