//! Data, hyperparameters, sampler state and exact log densities.
//!
//! Transformed responses follow `y_i^{(λ_d)}(d) = x_iᵀβ(d) + ε_i(d)` with
//! `ε_i(d) ~ N(0, τ_d⁻¹)`. Each coefficient image `β_(k)` carries the GMRF
//! prior `N(0, ν_k⁻¹(I + φ_k H)⁻¹)`; `τ_d ~ Gamma(δ0/2, γ0/2)`,
//! `ν_k ~ Gamma(n_ν/2, n_ν s_ν²/2)` and `λ_d ~ U(-a, b)`. Gamma laws are
//! parameterized by shape and rate throughout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::boxcox;
use crate::error::{Result, StmError};
use crate::lattice::{GmrfStructure, Lattice};

/// Responses on a lattice plus the subject design.
#[derive(Debug, Clone)]
pub struct Dataset {
    lattice: Lattice,
    /// `n × N_D`, column `d` holds voxel `d` for all subjects.
    y: DMatrix<f64>,
    /// `n × p`, column 0 is the intercept by convention.
    x: DMatrix<f64>,
    c0: f64,
    log_shifted: DMatrix<f64>,
    log_shifted_sums: Vec<f64>,
    full_rank: bool,
}

impl Dataset {
    pub fn new(lattice: Lattice, y: DMatrix<f64>, x: DMatrix<f64>, c0: f64) -> Result<Self> {
        if y.ncols() != lattice.len() {
            return Err(StmError::Dimension(format!(
                "response has {} voxels, lattice has {}",
                y.ncols(),
                lattice.len()
            )));
        }
        if y.nrows() != x.nrows() {
            return Err(StmError::Dimension(format!(
                "response has {} subjects, design has {}",
                y.nrows(),
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(StmError::Dimension("design has no columns".into()));
        }
        if !c0.is_finite() {
            return Err(StmError::Parameter(format!("c0 must be finite, got {c0}")));
        }
        let n = y.nrows();
        let mut log_shifted = DMatrix::zeros(n, y.ncols());
        for d in 0..y.ncols() {
            for i in 0..n {
                let shifted = y[(i, d)] + c0;
                if !(shifted > 0.0) {
                    return Err(StmError::Domain(format!(
                        "y + c0 must be positive: subject {i}, voxel {d}, y = {}, c0 = {c0}",
                        y[(i, d)]
                    )));
                }
                log_shifted[(i, d)] = shifted.ln();
            }
        }
        let log_shifted_sums = log_shifted.column_iter().map(|c| c.sum()).collect();
        let full_rank = design_rank(&x) == x.ncols();
        Ok(Dataset {
            lattice,
            y,
            x,
            c0,
            log_shifted,
            log_shifted_sums,
            full_rank,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn n_subjects(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_voxels(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    /// `log(y_i(d) + c0)`, `n × N_D`.
    pub fn log_shifted(&self) -> &DMatrix<f64> {
        &self.log_shifted
    }

    /// `Σ_i log(y_i(d) + c0)` per voxel.
    pub fn log_shifted_sum(&self, d: usize) -> f64 {
        self.log_shifted_sums[d]
    }

    /// False when the design is numerically rank deficient. Loading still
    /// succeeds; callers decide whether to warn.
    pub fn is_full_rank(&self) -> bool {
        self.full_rank
    }

    /// Responses at voxel `d` after the Box-Cox transform with exponent `lambda`.
    pub fn transformed_voxel(&self, d: usize, lambda: f64) -> Vec<f64> {
        self.log_shifted
            .column(d)
            .iter()
            .map(|&l| boxcox::transform_log(l, lambda))
            .collect()
    }
}

fn design_rank(x: &DMatrix<f64>) -> usize {
    if x.is_empty() {
        return 0;
    }
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    let tol = max * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub delta0: f64,
    pub gamma0: f64,
    pub n_nu: f64,
    pub s_nu_sq: f64,
    pub a: f64,
    pub b: f64,
    /// One spatial parameter per coefficient image; fixed, never sampled.
    pub phi: Vec<f64>,
    /// Standard deviation of the random-walk proposal for λ.
    pub delta_lambda: f64,
    pub r0: f64,
}

impl Hyperparams {
    /// Simulation-study settings for `p` covariates.
    pub fn simulation_defaults(p: usize) -> Self {
        Hyperparams {
            delta0: 1e-3,
            gamma0: 1e-3,
            n_nu: 1e-3,
            s_nu_sq: 1.0,
            a: 3.0,
            b: 3.0,
            phi: vec![10.0; p],
            delta_lambda: 0.1,
            r0: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("delta0", self.delta0),
            ("gamma0", self.gamma0),
            ("n_nu", self.n_nu),
            ("s_nu_sq", self.s_nu_sq),
            ("a", self.a),
            ("b", self.b),
            ("delta_lambda", self.delta_lambda),
            ("r0", self.r0),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(StmError::Parameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.phi.is_empty() {
            return Err(StmError::Parameter("phi must have at least one entry".into()));
        }
        if let Some(bad) = self.phi.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(StmError::Parameter(format!("phi entries must be positive, got {bad}")));
        }
        Ok(())
    }

    pub fn lambda_in_support(&self, lambda: f64) -> bool {
        -self.a < lambda && lambda < self.b
    }
}

/// Current values of every sampled parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// `N_D × p`; column `k` is the coefficient image `β_(k)`, row `d` is `β(d)`.
    pub beta: DMatrix<f64>,
    pub tau: DVector<f64>,
    pub lambda: DVector<f64>,
    pub nu: DVector<f64>,
}

impl ModelState {
    pub fn n_voxels(&self) -> usize {
        self.beta.nrows()
    }

    pub fn n_covariates(&self) -> usize {
        self.beta.ncols()
    }

    pub fn beta_image(&self, k: usize) -> &[f64] {
        let n = self.beta.nrows();
        &self.beta.as_slice()[k * n..(k + 1) * n]
    }

    pub fn check(&self, hp: &Hyperparams) -> Result<()> {
        if let Some(d) = self.tau.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(StmError::Domain(format!("tau[{d}] = {} is not positive", self.tau[d])));
        }
        if let Some(k) = self.nu.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(StmError::Domain(format!("nu[{k}] = {} is not positive", self.nu[k])));
        }
        if let Some(d) = self.lambda.iter().position(|&l| !hp.lambda_in_support(l)) {
            return Err(StmError::Domain(format!(
                "lambda[{d}] = {} outside (-{}, {})",
                self.lambda[d], hp.a, hp.b
            )));
        }
        if self.beta.iter().any(|v| !v.is_finite()) {
            return Err(StmError::Domain("beta has non-finite entries".into()));
        }
        Ok(())
    }
}

/// `log Gamma(x; shape, rate)`.
pub fn gamma_log_density(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// `log N(x; mean, 1/precision)`.
pub fn normal_log_density(x: f64, mean: f64, precision: f64) -> f64 {
    let r = x - mean;
    0.5 * (precision / (2.0 * std::f64::consts::PI)).ln() - 0.5 * precision * r * r
}

/// Log density of the raw responses at voxel `d`, Jacobian included:
/// `Σ_i [½ log(τ/2π) − τ/2 (y_i^{(λ)} − x_iᵀβ)² + (λ − 1) log(y_i + c0)]`.
pub fn log_likelihood_voxel(ds: &Dataset, st: &ModelState, d: usize) -> Result<f64> {
    let tau = st.tau[d];
    let lambda = st.lambda[d];
    let x = ds.x();
    let mut sum_sq = 0.0;
    for i in 0..ds.n_subjects() {
        let z = boxcox::transform(ds.y()[(i, d)], lambda, ds.c0())?;
        let fitted: f64 = (0..ds.n_covariates()).map(|k| x[(i, k)] * st.beta[(d, k)]).sum();
        sum_sq += (z - fitted).powi(2);
    }
    let jac = boxcox::log_jacobian(ds.y().column(d).as_slice(), lambda, ds.c0())?;
    let n = ds.n_subjects() as f64;
    Ok(0.5 * n * (tau / (2.0 * std::f64::consts::PI)).ln() - 0.5 * tau * sum_sq + jac)
}

/// Log GMRF density of one coefficient image, without `½ log det(I + φH)`.
pub fn gmrf_log_prior(s: &GmrfStructure, nu: f64, image: &[f64]) -> f64 {
    0.5 * image.len() as f64 * nu.ln() - 0.5 * nu * s.quad_form(image)
}

/// Un-normalized log posterior.
///
/// The `½ log det(I + φ_k H)` terms and the `2π` factors of the GMRF prior
/// are omitted: φ is fixed, so they are constant over the whole state space.
/// Returns `-∞` when any λ_d lies outside `(-a, b)` or any precision is not
/// positive.
pub fn log_joint(
    ds: &Dataset,
    st: &ModelState,
    gmrf: &[GmrfStructure],
    hp: &Hyperparams,
) -> Result<f64> {
    if st.lambda.iter().any(|&l| !hp.lambda_in_support(l))
        || st.tau.iter().any(|&t| !(t > 0.0))
        || st.nu.iter().any(|&v| !(v > 0.0))
    {
        return Ok(f64::NEG_INFINITY);
    }
    if gmrf.len() != st.n_covariates() {
        return Err(StmError::Dimension(format!(
            "{} GMRF structures for {} covariates",
            gmrf.len(),
            st.n_covariates()
        )));
    }
    let mut total = 0.0;
    for d in 0..ds.n_voxels() {
        total += log_likelihood_voxel(ds, st, d)?;
        total += gamma_log_density(st.tau[d], hp.delta0 / 2.0, hp.gamma0 / 2.0);
        total += -(hp.a + hp.b).ln();
    }
    for (k, s) in gmrf.iter().enumerate() {
        total += gmrf_log_prior(s, st.nu[k], st.beta_image(k));
        total += gamma_log_density(st.nu[k], hp.n_nu / 2.0, hp.n_nu * hp.s_nu_sq / 2.0);
    }
    Ok(total)
}
