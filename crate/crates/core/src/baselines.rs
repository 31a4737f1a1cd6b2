//! Comparison fits: voxel-wise least squares on raw responses, and the
//! spatial model with every exponent held at 1.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Result, StmError};
use crate::gibbs::{default_init, run_chain, Chain, SamplerConfig};
use crate::model::{Dataset, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Ols,
    GmrfFixedLambda,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Ols => "ols",
            BaselineMethod::GmrfFixedLambda => "gmrf-fixed-lambda",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineMethod {
    type Err = StmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(BaselineMethod::Ols),
            "gmrf-fixed-lambda" => Ok(BaselineMethod::GmrfFixedLambda),
            other => Err(StmError::Parameter(format!("unknown baseline method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    /// `N_D × p`, laid out like the posterior-mean map.
    pub beta_est: DMatrix<f64>,
    pub method: BaselineMethod,
}

/// `β̂(d) = (XᵀX)⁻¹Xᵀy(d)` on the untransformed responses.
pub fn fit_ols(ds: &Dataset) -> Result<BaselineResult> {
    let x = ds.x();
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky().ok_or_else(|| {
        StmError::Singular("XᵀX is not positive definite; covariates are collinear".into())
    })?;
    // p × N_D solution, transposed into the voxel-major layout.
    let coef = chol.solve(&(x.transpose() * ds.y()));
    Ok(BaselineResult {
        beta_est: coef.transpose(),
        method: BaselineMethod::Ols,
    })
}

/// The full sampler with the λ step switched off and λ ≡ 1.
pub fn run_fixed_lambda_chain(
    ds: &Dataset,
    hp: &Hyperparams,
    cfg: &SamplerConfig,
) -> Result<Chain> {
    if !hp.lambda_in_support(1.0) {
        return Err(StmError::Parameter(format!(
            "lambda = 1 lies outside the prior support (-{}, {})",
            hp.a, hp.b
        )));
    }
    let init = default_init(ds, hp);
    let cfg = SamplerConfig {
        sample_lambda: false,
        ..cfg.clone()
    };
    run_chain(ds, hp, &cfg, Some(init))
}

/// Posterior-mean coefficients of [`run_fixed_lambda_chain`].
pub fn fit_gmrf_fixed_lambda(
    ds: &Dataset,
    hp: &Hyperparams,
    cfg: &SamplerConfig,
) -> Result<BaselineResult> {
    let chain = run_fixed_lambda_chain(ds, hp, cfg)?;
    Ok(BaselineResult {
        beta_est: posterior_mean_beta(&chain)?,
        method: BaselineMethod::GmrfFixedLambda,
    })
}

pub fn posterior_mean_beta(chain: &Chain) -> Result<DMatrix<f64>> {
    let first = chain.draws.first().ok_or(StmError::EmptyChain)?;
    let mut sum = DMatrix::zeros(first.n_voxels(), first.n_covariates());
    for st in &chain.draws {
        sum += &st.beta;
    }
    Ok(sum / chain.draws.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use approx::assert_relative_eq;

    #[test]
    fn saturated_fit_has_zero_residuals() {
        let lat = Lattice::new(&[2, 3]).unwrap();
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -1.0, 1.0, 1.5, 0.0, 1.0, -0.7, 1.0]);
        let y = DMatrix::from_fn(3, 6, |i, d| 1.0 + (i * 7 + d * 3) as f64 % 5.0);
        let ds = Dataset::new(lat, y.clone(), x.clone(), 0.0).unwrap();
        let fit = fit_ols(&ds).unwrap();
        let resid = &y - &x * fit.beta_est.transpose();
        assert!(resid.amax() < 1e-10);
    }

    #[test]
    fn collinear_design_is_singular() {
        let lat = Lattice::new(&[1, 2]).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let ds = Dataset::new(lat, DMatrix::from_element(3, 2, 1.0), x, 0.0).unwrap();
        assert!(matches!(fit_ols(&ds), Err(StmError::Singular(_))));
    }

    #[test]
    fn exact_at_zero_noise() {
        let lat = Lattice::new(&[1, 2]).unwrap();
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 5.0]);
        let truth = [[0.5, 2.0], [3.0, -0.25]];
        let y = DMatrix::from_fn(4, 2, |i, d| truth[d][0] + truth[d][1] * x[(i, 1)]);
        let ds = Dataset::new(lat, y, x, 0.0).unwrap();
        let fit = fit_ols(&ds).unwrap();
        for d in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(fit.beta_est[(d, k)], truth[d][k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [BaselineMethod::Ols, BaselineMethod::GmrfFixedLambda] {
            assert_eq!(m.as_str().parse::<BaselineMethod>().unwrap(), m);
        }
        assert!("ridge".parse::<BaselineMethod>().is_err());
    }
}
