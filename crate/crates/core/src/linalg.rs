//! Incremental ridge regression.
//!
//! Every policy keeps one [`RidgeState`] per model: a regularized Gram
//! matrix, its inverse, and the response vector. The inverse is maintained
//! with Sherman-Morrison rank-one updates so a step costs O(d^2) instead of
//! O(d^3), and is re-factorized from the Gram matrix every
//! [`REFACTOR_INTERVAL`] updates to stop float drift from accumulating over
//! long runs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Updates between full inverse re-factorizations.
pub const REFACTOR_INTERVAL: u64 = 512;

/// State of one ridge regression: `gram = reg*I + sum(x x^T)` over observed
/// feature vectors, `response = sum(y x)`, plus the maintained inverse.
#[derive(Debug, Clone)]
pub struct RidgeState {
    dim: usize,
    reg: f64,
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    response: DVector<f64>,
    updates: u64,
    since_refactor: u64,
}

impl RidgeState {
    pub fn new(dim: usize, reg: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be at least 1".into(),
            });
        }
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "reg",
                reason: format!("must be finite and positive, got {reg}"),
            });
        }
        Ok(Self {
            dim,
            reg,
            gram: DMatrix::identity(dim, dim) * reg,
            gram_inv: DMatrix::identity(dim, dim) / reg,
            response: DVector::zeros(dim),
            updates: 0,
            since_refactor: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    fn check_vector(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context });
        }
        Ok(())
    }

    /// Absorb one observation `(x, y)`.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check_vector(x, "ridge update")?;
        if !y.is_finite() {
            return Err(Error::NonFinite { context: "ridge update response" });
        }
        let xv = DVector::from_column_slice(x);

        self.gram.ger(1.0, &xv, &xv, 1.0);
        self.response.axpy(y, &xv, 1.0);

        // Sherman-Morrison: (M + x x^T)^-1 = M^-1 - (u u^T)/(1 + x.u),
        // u = M^-1 x. The denominator is >= 1 because M is positive
        // definite, so the division is always safe.
        let u = &self.gram_inv * &xv;
        let denom = 1.0 + xv.dot(&u);
        self.gram_inv.ger(-1.0 / denom, &u, &u, 1.0);

        self.updates += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_INTERVAL {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recompute the inverse directly from the Gram matrix.
    pub fn refactor(&mut self) -> Result<()> {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or(Error::NonFinite { context: "gram cholesky" })?;
        self.gram_inv = chol.inverse();
        self.since_refactor = 0;
        Ok(())
    }

    /// Ridge estimate `theta = gram^-1 * response`.
    pub fn theta(&self) -> DVector<f64> {
        &self.gram_inv * &self.response
    }

    /// Quadratic form `x^T gram^-1 x`, skipping zero entries of `x`.
    /// Topic-gain features are sparse, so the skip matters in practice.
    fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let col = self.gram_inv.column(j);
            let mut s = 0.0;
            for i in 0..self.dim {
                s += col[i] * x[i];
            }
            acc += xj * s;
        }
        acc
    }

    /// Confidence width `sqrt(x^T gram^-1 x)`. Clamped at zero before the
    /// square root: the form is nonnegative in exact arithmetic but float
    /// drift can leave a tiny negative residue.
    pub fn ucb_width(&self, x: &[f64]) -> Result<f64> {
        self.check_vector(x, "ucb width")?;
        let q = self.quad_form(x).max(0.0);
        let w = q.sqrt();
        if !w.is_finite() {
            return Err(Error::NonFinite { context: "ucb width" });
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn fresh_state_is_scaled_identity() {
        let s = RidgeState::new(3, 2.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 } else { 0.0 };
                assert_eq!(s.gram()[(i, j)], expect);
                assert_eq!(s.gram_inv()[(i, j)], if i == j { 0.5 } else { 0.0 });
            }
        }
        assert_eq!(s.theta().as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_update_matches_closed_form() {
        // reg=1, one observation x=e1, y=1:
        // gram = diag(2, 1), response = (1, 0), theta = (1/2, 0).
        let mut s = RidgeState::new(2, 1.0).unwrap();
        s.update(&[1.0, 0.0], 1.0).unwrap();
        let th = s.theta();
        assert_abs_diff_eq!(th[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(th[1], 0.0, epsilon = 1e-12);
        let w = s.ucb_width(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(w, (0.5f64).sqrt(), epsilon = 1e-12);
        let w1 = s.ucb_width(&[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(w1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_vector_update_changes_nothing() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        s.update(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(s.gram()[(0, 0)], 1.0);
        assert_eq!(s.response()[0], 0.0);
        assert_eq!(s.updates(), 1);
    }

    #[test]
    fn sherman_morrison_tracks_direct_inverse() {
        let mut s = RidgeState::new(8, 0.7).unwrap();
        let mut rng = crate::seeding::stream(11, &[99]);
        for _ in 0..50 {
            let x: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let y = rng.random::<f64>();
            s.update(&x, y).unwrap();
        }
        let direct = s.gram().clone().try_inverse().unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_abs_diff_eq!(s.gram_inv()[(i, j)], direct[(i, j)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn refactor_keeps_inverse_consistent_over_long_runs() {
        let mut s = RidgeState::new(4, 1.0).unwrap();
        let mut rng = crate::seeding::stream(5, &[98]);
        for _ in 0..1200 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            s.update(&x, rng.random::<f64>()).unwrap();
        }
        let prod = s.gram() * s.gram_inv();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[(i, j)], expect, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(RidgeState::new(0, 1.0).is_err());
        assert!(RidgeState::new(3, 0.0).is_err());
        assert!(RidgeState::new(3, -1.0).is_err());
        assert!(RidgeState::new(3, f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_updates() {
        let mut s = RidgeState::new(2, 1.0).unwrap();
        assert!(matches!(
            s.update(&[1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            s.update(&[1.0, f64::NAN], 1.0),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            s.update(&[1.0, 0.0], f64::INFINITY),
            Err(Error::NonFinite { .. })
        ));
        assert!(s.ucb_width(&[1.0]).is_err());
    }

    proptest! {
        // Adding an observation grows the Gram matrix in the positive
        // semidefinite order, so confidence widths can only shrink.
        #[test]
        fn width_never_grows_with_data(
            seed in 0u64..1000,
            steps in 1usize..30,
        ) {
            let mut rng = crate::seeding::stream(seed, &[97]);
            let dim = 5;
            let mut s = RidgeState::new(dim, 1.0).unwrap();
            let probe: Vec<f64> =
                (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let mut prev = s.ucb_width(&probe).unwrap();
            for _ in 0..steps {
                let x: Vec<f64> =
                    (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                s.update(&x, rng.random::<f64>()).unwrap();
                let w = s.ucb_width(&probe).unwrap();
                prop_assert!(w <= prev + 1e-9, "width grew: {prev} -> {w}");
                prev = w;
            }
        }
    }
}
