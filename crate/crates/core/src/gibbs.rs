//! Single-site Gibbs sampler with a random-walk Metropolis-Hastings step for
//! the per-voxel transformation exponents.
//!
//! One sweep updates, in order:
//!
//! 1. each `ν_k` from `Gamma((N_D + n_ν)/2, (n_ν s_ν² + β_(k)ᵀ(I + φ_k H)β_(k))/2)`;
//! 2. each `β_k(d)`, `k` outer and `d` inner in lexicographic voxel order, from
//!    its univariate Gaussian conditional combining the data with the GMRF
//!    conditional of the neighbors;
//! 3. each `τ_d` from `Gamma((n + δ0)/2, (RSS_d + γ0)/2)`;
//! 4. each `λ_d` by one Metropolis-Hastings step with proposal
//!    `N(λ_d, δ_λ²)`, rejecting anything outside `(-a, b)`.
//!
//! Steps 3 and 4 are independent across voxels and draw from per-voxel
//! random substreams, so running them in parallel gives the same chain as
//! running them sequentially.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boxcox;
use crate::error::{Result, StmError};
use crate::lattice::{
    build_gmrf_structures, build_neighborhood, GaussianConditional, GaussianKernel, GmrfStructure,
};
use crate::model::{Dataset, Hyperparams, ModelState};
use crate::rng::{substream, Stream, StmRng};

const TARGET_ACCEPTANCE: f64 = 0.44;
const TAU_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub thin: usize,
    /// Run the τ and λ updates across voxels on the rayon pool.
    pub parallel: bool,
    /// Robbins-Monro tuning of the per-voxel λ proposal scale during burn-in,
    /// frozen afterwards.
    pub adapt_lambda: bool,
    /// When false, λ stays at its initial value and the MH step never runs.
    pub sample_lambda: bool,
    /// Starting point used when `run_chain` is given no initial state.
    pub init: InitStrategy,
}

/// How [`run_chain`] picks a starting state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// λ = 1 everywhere (see [`default_init`]).
    Identity,
    /// λ at each voxel's Box-Cox profile-likelihood maximum (see
    /// [`profile_init`]).
    Profile,
}

impl InitStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            InitStrategy::Identity => "identity",
            InitStrategy::Profile => "profile",
        }
    }
}

impl std::str::FromStr for InitStrategy {
    type Err = StmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(InitStrategy::Identity),
            "profile" => Ok(InitStrategy::Profile),
            other => Err(StmError::Parameter(format!("unknown init strategy {other:?}"))),
        }
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 1000,
            burn_in: 50,
            seed: 0,
            thin: 1,
            parallel: true,
            adapt_lambda: false,
            sample_lambda: true,
            init: InitStrategy::Profile,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(StmError::Parameter("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(StmError::Parameter(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(StmError::Parameter("thin must be positive".into()));
        }
        Ok(())
    }

    pub fn retained_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Shape/rate parameters of a Gamma law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        crate::model::gamma_log_density(x, self.shape, self.rate)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let g = Gamma::new(self.shape, 1.0 / self.rate).ok()?;
        let v = g.sample(rng);
        (v > 0.0 && v.is_finite()).then_some(v)
    }
}

/// Full conditional of `ν_k` given the coefficient image `β_(k)`.
pub fn nu_conditional(s: &GmrfStructure, image: &[f64], hp: &Hyperparams) -> GammaParams {
    let q = s.quad_form(image);
    assert!(q >= 0.0, "negative GMRF quadratic form {q}");
    GammaParams {
        shape: 0.5 * (image.len() as f64 + hp.n_nu),
        rate: 0.5 * (hp.n_nu * hp.s_nu_sq + q),
    }
}

/// Full conditional of `β_k(d)`. `transformed` holds `y_i^{(λ_d)}(d)` for all
/// subjects at voxel `d`.
pub fn beta_conditional(
    ds: &Dataset,
    transformed: &[f64],
    st: &ModelState,
    s: &GmrfStructure,
    k: usize,
    d: usize,
) -> GaussianConditional {
    let x = ds.x();
    let p = ds.n_covariates();
    let mut xx = 0.0;
    let mut xr = 0.0;
    for (i, &z) in transformed.iter().enumerate() {
        let xik = x[(i, k)];
        let mut partial = z;
        for l in (0..p).filter(|&l| l != k) {
            partial -= x[(i, l)] * st.beta[(d, l)];
        }
        xx += xik * xik;
        xr += xik * partial;
    }
    let prior = s.conditional_params(st.nu[k], st.beta_image(k), d);
    let tau = st.tau[d];
    let precision = tau * xx + prior.precision;
    GaussianConditional {
        mean: (tau * xr + prior.precision * prior.mean) / precision,
        precision,
    }
}

fn residual_sum_squares(x: &DMatrix<f64>, transformed: &[f64], beta_row: &[f64]) -> f64 {
    transformed
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let fitted: f64 = beta_row.iter().enumerate().map(|(k, b)| x[(i, k)] * b).sum();
            (z - fitted).powi(2)
        })
        .sum()
}

/// Full conditional of `τ_d`.
pub fn tau_conditional(
    ds: &Dataset,
    transformed: &[f64],
    st: &ModelState,
    hp: &Hyperparams,
    d: usize,
) -> GammaParams {
    let row: Vec<f64> = st.beta.row(d).iter().copied().collect();
    tau_params(ds, transformed, &row, hp)
}

fn tau_params(ds: &Dataset, transformed: &[f64], beta_row: &[f64], hp: &Hyperparams) -> GammaParams {
    let rss = residual_sum_squares(ds.x(), transformed, beta_row);
    GammaParams {
        shape: 0.5 * (ds.n_subjects() as f64 + hp.delta0),
        rate: 0.5 * (rss + hp.gamma0),
    }
}

fn fitted_values(x: &DMatrix<f64>, beta_row: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| beta_row.iter().enumerate().map(|(k, b)| x[(i, k)] * b).sum())
        .collect()
}

/// Un-normalized log conditional of `λ_d`:
/// `-τ_d/2 Σ_i (y_i^{(λ)}(d) - x_iᵀβ(d))² + (λ - 1) Σ_i log(y_i(d) + c0)`,
/// `-∞` outside `(-a, b)`.
pub fn lambda_log_target(
    ds: &Dataset,
    st: &ModelState,
    hp: &Hyperparams,
    d: usize,
    lambda: f64,
) -> f64 {
    let row: Vec<f64> = st.beta.row(d).iter().copied().collect();
    let fitted = fitted_values(ds.x(), &row);
    lambda_target_with(ds, hp, d, &fitted, st.tau[d], lambda)
}

fn lambda_target_with(
    ds: &Dataset,
    hp: &Hyperparams,
    d: usize,
    fitted: &[f64],
    tau: f64,
    lambda: f64,
) -> f64 {
    if !hp.lambda_in_support(lambda) {
        return f64::NEG_INFINITY;
    }
    let logs = ds.log_shifted().column(d);
    let rss: f64 = logs
        .iter()
        .zip(fitted)
        .map(|(&l, &f)| (boxcox::transform_log(l, lambda) - f).powi(2))
        .sum();
    -0.5 * tau * rss + (lambda - 1.0) * ds.log_shifted_sum(d)
}

/// Data-informed starting point: per-voxel least squares at λ = 1 (or the
/// middle of the support when 1 is excluded), τ at the inverse residual
/// variance, ν = 1.
pub fn default_init(ds: &Dataset, hp: &Hyperparams) -> ModelState {
    let lambda0 = if hp.lambda_in_support(1.0) {
        1.0
    } else {
        0.5 * (hp.b - hp.a)
    };
    least_squares_init(ds, &vec![lambda0; ds.n_voxels()])
}

/// Like [`default_init`] but each λ_d starts at the maximizer of the
/// Box-Cox profile log-likelihood
/// `-n/2 log RSS_d(λ) + (λ - 1) Σ_i log(y_i(d) + c0)` over the support.
pub fn profile_init(ds: &Dataset, hp: &Hyperparams) -> ModelState {
    least_squares_init(ds, &profile_lambda(ds, hp))
}

pub fn initial_state(ds: &Dataset, hp: &Hyperparams, init: InitStrategy) -> ModelState {
    match init {
        InitStrategy::Identity => default_init(ds, hp),
        InitStrategy::Profile => profile_init(ds, hp),
    }
}

fn design_pinv(x: &DMatrix<f64>) -> DMatrix<f64> {
    if x.is_empty() {
        return DMatrix::zeros(x.ncols(), x.nrows());
    }
    x.clone()
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse with non-negative tolerance")
}

/// β by least squares on the responses transformed at `lambda`, τ at the
/// inverse residual variance (floored), ν = 1.
pub fn least_squares_init(ds: &Dataset, lambda: &[f64]) -> ModelState {
    let n = ds.n_subjects();
    let p = ds.n_covariates();
    let nd = ds.n_voxels();
    assert_eq!(lambda.len(), nd, "one exponent per voxel");
    let x = ds.x();
    let pinv = design_pinv(x);
    let mut beta = DMatrix::zeros(nd, p);
    let mut tau = DVector::zeros(nd);
    for d in 0..nd {
        let z = DVector::from_vec(ds.transformed_voxel(d, lambda[d]));
        let b = &pinv * &z;
        let rss = (x * &b - &z).norm_squared();
        let dof = n.saturating_sub(p).max(1) as f64;
        tau[d] = 1.0 / (rss / dof).max(TAU_VARIANCE_FLOOR);
        beta.row_mut(d).copy_from(&b.transpose());
    }
    ModelState {
        beta,
        tau,
        lambda: DVector::from_column_slice(lambda),
        nu: DVector::from_element(p, 1.0),
    }
}

const PROFILE_GRID_STEP: f64 = 0.05;
const PROFILE_TOL: f64 = 1e-6;

/// Per-voxel maximizer of the Box-Cox profile log-likelihood: a grid scan of
/// `(-a, b)` followed by golden-section refinement around the best point.
pub fn profile_lambda(ds: &Dataset, hp: &Hyperparams) -> Vec<f64> {
    let x = ds.x();
    let pinv = design_pinv(x);
    let n = ds.n_subjects() as f64;
    let (lo, hi) = (-hp.a, hp.b);
    let steps = ((hi - lo) / PROFILE_GRID_STEP).ceil().max(2.0) as usize;
    let h = (hi - lo) / steps as f64;
    let grid: Vec<f64> = (0..steps).map(|i| lo + (i as f64 + 0.5) * h).collect();
    (0..ds.n_voxels())
        .into_par_iter()
        .map(|d| {
            let logs = ds.log_shifted().column(d);
            let jac = ds.log_shifted_sum(d);
            let profile = |lambda: f64| {
                let z = DVector::from_iterator(
                    logs.len(),
                    logs.iter().map(|&l| boxcox::transform_log(l, lambda)),
                );
                let rss = (&z - x * (&pinv * &z)).norm_squared();
                if rss > 0.0 {
                    -0.5 * n * rss.ln() + (lambda - 1.0) * jac
                } else {
                    f64::INFINITY
                }
            };
            let (mut best, mut best_val) = (grid[0], f64::NEG_INFINITY);
            for &g in &grid {
                let v = profile(g);
                if v > best_val {
                    best = g;
                    best_val = v;
                }
            }
            if !best_val.is_finite() {
                return best;
            }
            golden_max(profile, (best - h).max(lo + 1e-9), (best + h).min(hi - 1e-9))
        })
        .collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut e = a + r * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while b - a > PROFILE_TOL {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + r * (b - a);
            fe = f(e);
        }
    }
    0.5 * (a + b)
}

/// Sampler state that persists across sweeps: GMRF structures, random
/// streams and the cache of transformed responses at the current λ.
pub struct GibbsSampler<'a> {
    ds: &'a Dataset,
    hp: &'a Hyperparams,
    cfg: SamplerConfig,
    gmrf: Vec<GmrfStructure>,
    /// Voxel-major `N_D × n`: entries `d*n .. (d+1)*n` are voxel `d`.
    transformed: Vec<f64>,
    nu_rng: StmRng,
    beta_rng: StmRng,
    tau_rngs: Vec<StmRng>,
    lambda_rngs: Vec<StmRng>,
    lambda_scale: Vec<f64>,
    lambda_accept: Vec<u64>,
    sweeps: usize,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        ds: &'a Dataset,
        hp: &'a Hyperparams,
        cfg: SamplerConfig,
        st: &ModelState,
    ) -> Result<Self> {
        hp.validate()?;
        cfg.validate()?;
        if hp.phi.len() != ds.n_covariates() {
            return Err(StmError::Parameter(format!(
                "phi has {} entries for {} covariates",
                hp.phi.len(),
                ds.n_covariates()
            )));
        }
        check_shapes(ds, st)?;
        st.check(hp)?;
        let graph = build_neighborhood(ds.lattice(), hp.r0, &GaussianKernel)?;
        let gmrf = build_gmrf_structures(&graph, &hp.phi)?;
        let nd = ds.n_voxels();
        let mut transformed = Vec::with_capacity(nd * ds.n_subjects());
        for d in 0..nd {
            transformed.extend(ds.transformed_voxel(d, st.lambda[d]));
        }
        Ok(GibbsSampler {
            ds,
            hp,
            gmrf,
            transformed,
            nu_rng: substream(cfg.seed, Stream::Nu),
            beta_rng: substream(cfg.seed, Stream::Beta),
            tau_rngs: (0..nd).map(|d| substream(cfg.seed, Stream::Tau(d))).collect(),
            lambda_rngs: (0..nd).map(|d| substream(cfg.seed, Stream::Lambda(d))).collect(),
            lambda_scale: vec![hp.delta_lambda; nd],
            lambda_accept: vec![0; nd],
            sweeps: 0,
            cfg,
        })
    }

    pub fn gmrf(&self) -> &[GmrfStructure] {
        &self.gmrf
    }

    pub fn lambda_accept(&self) -> &[u64] {
        &self.lambda_accept
    }

    pub fn lambda_scale(&self) -> &[f64] {
        &self.lambda_scale
    }

    fn voxel_transformed(&self, d: usize) -> &[f64] {
        let n = self.ds.n_subjects();
        &self.transformed[d * n..(d + 1) * n]
    }

    pub fn update_nu(&mut self, st: &mut ModelState) -> Result<()> {
        for k in 0..st.n_covariates() {
            let params = nu_conditional(&self.gmrf[k], st.beta_image(k), self.hp);
            st.nu[k] = params.sample(&mut self.nu_rng).ok_or_else(|| {
                StmError::Domain(format!("invalid nu conditional for covariate {k}: {params:?}"))
            })?;
        }
        Ok(())
    }

    pub fn update_beta(&mut self, st: &mut ModelState) -> Result<()> {
        let n = self.ds.n_subjects();
        for k in 0..st.n_covariates() {
            for d in 0..st.n_voxels() {
                let z = &self.transformed[d * n..(d + 1) * n];
                let c = beta_conditional(self.ds, z, st, &self.gmrf[k], k, d);
                let e: f64 = self.beta_rng.sample(StandardNormal);
                let draw = c.mean + e / c.precision.sqrt();
                if !draw.is_finite() {
                    return Err(StmError::Domain(format!(
                        "non-finite beta draw for covariate {k} at voxel {d}: {c:?}"
                    )));
                }
                st.beta[(d, k)] = draw;
            }
        }
        Ok(())
    }

    pub fn update_tau(&mut self, st: &mut ModelState) -> Result<()> {
        let n = self.ds.n_subjects();
        let ds = self.ds;
        let hp = self.hp;
        let beta = &st.beta;
        let transformed = &self.transformed;
        let draw = |(d, (rng, tau)): (usize, (&mut StmRng, &mut f64))| -> Result<()> {
            let row: Vec<f64> = beta.row(d).iter().copied().collect();
            let params = tau_params(ds, &transformed[d * n..(d + 1) * n], &row, hp);
            *tau = params.sample(rng).ok_or_else(|| {
                StmError::Domain(format!("invalid tau conditional at voxel {d}: {params:?}"))
            })?;
            Ok(())
        };
        let taus = st.tau.as_mut_slice();
        if self.cfg.parallel {
            self.tau_rngs
                .par_iter_mut()
                .zip(taus.par_iter_mut())
                .enumerate()
                .try_for_each(draw)
        } else {
            self.tau_rngs
                .iter_mut()
                .zip(taus.iter_mut())
                .enumerate()
                .try_for_each(draw)
        }
    }

    /// One MH step per voxel; returns the per-voxel acceptance flags.
    pub fn update_lambda(&mut self, st: &mut ModelState) -> Vec<bool> {
        let n = self.ds.n_subjects();
        let ds = self.ds;
        let hp = self.hp;
        let beta = &st.beta;
        let tau = &st.tau;
        let step = |(d, (((rng, z), lambda), &scale)): (usize, (((&mut StmRng, &mut [f64]), &mut f64), &f64))| -> bool {
            let row: Vec<f64> = beta.row(d).iter().copied().collect();
            let fitted = fitted_values(ds.x(), &row);
            let current = *lambda;
            let e: f64 = rng.sample(StandardNormal);
            let proposal = current + scale * e;
            let u: f64 = rng.random();
            if !hp.lambda_in_support(proposal) {
                return false;
            }
            let rss_now: f64 = z.iter().zip(&fitted).map(|(a, f)| (a - f).powi(2)).sum();
            let now = -0.5 * tau[d] * rss_now + (current - 1.0) * ds.log_shifted_sum(d);
            let prop = lambda_target_with(ds, hp, d, &fitted, tau[d], proposal);
            if u.ln() < prop - now {
                *lambda = proposal;
                for (zi, &l) in z.iter_mut().zip(ds.log_shifted().column(d).iter()) {
                    *zi = boxcox::transform_log(l, proposal);
                }
                true
            } else {
                false
            }
        };
        let lambdas = st.lambda.as_mut_slice();
        if self.cfg.parallel {
            self.lambda_rngs
                .par_iter_mut()
                .zip(self.transformed.par_chunks_mut(n))
                .zip(lambdas.par_iter_mut())
                .zip(self.lambda_scale.par_iter())
                .enumerate()
                .map(step)
                .collect()
        } else {
            self.lambda_rngs
                .iter_mut()
                .zip(self.transformed.chunks_mut(n))
                .zip(lambdas.iter_mut())
                .zip(self.lambda_scale.iter())
                .enumerate()
                .map(step)
                .collect()
        }
    }

    /// One full sweep `ν → β → τ → λ`.
    pub fn sweep(&mut self, st: &mut ModelState) -> Result<()> {
        let iteration = self.sweeps + 1;
        let wrap = |e: StmError| StmError::Sampling {
            iteration,
            source: Box::new(e),
        };
        self.update_nu(st).map_err(wrap)?;
        self.update_beta(st).map_err(wrap)?;
        self.update_tau(st).map_err(wrap)?;
        if self.cfg.sample_lambda {
            let accepted = self.update_lambda(st);
            let adapting = self.cfg.adapt_lambda && self.sweeps < self.cfg.burn_in;
            let gain = 1.0 / (self.sweeps as f64 + 1.0).powf(0.6);
            for (d, acc) in accepted.into_iter().enumerate() {
                if acc {
                    self.lambda_accept[d] += 1;
                }
                if adapting {
                    let hit = if acc { 1.0 } else { 0.0 };
                    self.lambda_scale[d] *= (gain * (hit - TARGET_ACCEPTANCE)).exp();
                }
            }
        }
        self.sweeps += 1;
        Ok(())
    }

    /// Transformed-response cache for voxel `d` (exposed for diagnostics).
    pub fn transformed(&self, d: usize) -> &[f64] {
        self.voxel_transformed(d)
    }
}

fn check_shapes(ds: &Dataset, st: &ModelState) -> Result<()> {
    let (nd, p) = (ds.n_voxels(), ds.n_covariates());
    if st.beta.shape() != (nd, p) || st.tau.len() != nd || st.lambda.len() != nd || st.nu.len() != p
    {
        return Err(StmError::Dimension(format!(
            "state shapes beta {:?}, tau {}, lambda {}, nu {} do not match {nd} voxels and {p} covariates",
            st.beta.shape(),
            st.tau.len(),
            st.lambda.len(),
            st.nu.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMeta {
    pub config: SamplerConfig,
    pub hyperparams: Hyperparams,
    pub data_fingerprint: String,
    pub dims: Vec<usize>,
    pub n_subjects: usize,
    pub n_covariates: usize,
    /// Final per-voxel λ proposal scales (equal to δ_λ unless adapted).
    pub lambda_scale: Vec<f64>,
    pub sweep_seconds: Vec<f64>,
}

impl ChainMeta {
    pub fn mean_sweep_seconds(&self) -> f64 {
        if self.sweep_seconds.is_empty() {
            0.0
        } else {
            self.sweep_seconds.iter().sum::<f64>() / self.sweep_seconds.len() as f64
        }
    }
}

/// Retained draws plus sampler bookkeeping.
#[derive(Debug, Clone)]
pub struct Chain {
    pub draws: Vec<ModelState>,
    /// Accepted λ moves per voxel over all iterations, burn-in included.
    pub lambda_accept: Vec<u64>,
    pub meta: ChainMeta,
}

impl Chain {
    pub fn acceptance_rates(&self) -> Vec<f64> {
        let iters = self.meta.config.iterations as f64;
        self.lambda_accept.iter().map(|&a| a as f64 / iters).collect()
    }

    /// Draws with timing removed compare bit-for-bit between identical runs.
    pub fn same_draws(&self, other: &Chain) -> bool {
        self.draws == other.draws && self.lambda_accept == other.lambda_accept
    }
}

/// SHA-256 over the design, responses and shift, little-endian.
pub fn data_fingerprint(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    for &dim in ds.lattice().dims() {
        h.update((dim as u64).to_le_bytes());
    }
    h.update((ds.n_subjects() as u64).to_le_bytes());
    h.update((ds.n_covariates() as u64).to_le_bytes());
    for v in ds.y().iter().chain(ds.x().iter()) {
        h.update(v.to_le_bytes());
    }
    h.update(ds.c0().to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run_chain(
    ds: &Dataset,
    hp: &Hyperparams,
    cfg: &SamplerConfig,
    init: Option<ModelState>,
) -> Result<Chain> {
    let mut st = init.unwrap_or_else(|| initial_state(ds, hp, cfg.init));
    let mut sampler = GibbsSampler::new(ds, hp, cfg.clone(), &st)?;
    let mut draws = Vec::with_capacity(cfg.retained_draws());
    let mut sweep_seconds = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let start = Instant::now();
        sampler.sweep(&mut st)?;
        sweep_seconds.push(start.elapsed().as_secs_f64());
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            draws.push(st.clone());
        }
    }
    Ok(Chain {
        draws,
        lambda_accept: sampler.lambda_accept.clone(),
        meta: ChainMeta {
            config: cfg.clone(),
            hyperparams: hp.clone(),
            data_fingerprint: data_fingerprint(ds),
            dims: ds.lattice().dims().to_vec(),
            n_subjects: ds.n_subjects(),
            n_covariates: ds.n_covariates(),
            lambda_scale: sampler.lambda_scale.clone(),
            sweep_seconds,
        },
    })
}
