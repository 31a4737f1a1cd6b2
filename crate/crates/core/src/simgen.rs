//! Synthetic datasets with known coefficient images and exponent fields.
//!
//! Covariates per subject are an intercept, a `N(5, 1)` variable and a
//! three-level categorical variable with contrast coding
//! `x_q = 1(category q) - 1(category 1)` for `q = 2, 3`. Responses are
//! `y_i(d) = g⁻¹(x_iᵀβ(d) + σ ε_i(d); λ(d))` with `g` the Box-Cox transform
//! (`c0 = 0`). Noise draws that would put `λ z + 1 ≤ 0` are redrawn and
//! counted.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::boxcox;
use crate::error::{Result, StmError};
use crate::lattice::Lattice;
use crate::model::Dataset;
use crate::rng::{substream, Stream};

pub const MAX_RETRIES_PER_CELL: u64 = 1_000_000;

/// Number of covariates produced by [`gen_covariates`], intercept included.
pub const SIM_COVARIATES: usize = 4;

/// How the true exponents are laid out on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaLayout {
    /// The lattice is cut into `blocks` equal slabs along every axis and each
    /// block gets one level drawn uniformly from `lambda_levels`.
    Blocks(usize),
    /// Every voxel draws its own level.
    Voxelwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub dims: Vec<usize>,
    pub n: usize,
    pub sigma: f64,
    pub lambda_levels: Vec<f64>,
    pub lambda_layout: LambdaLayout,
    /// One `N_D` image per covariate; `None` uses [`builtin_patterns`].
    pub beta_patterns: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            dims: vec![32, 32],
            n: 200,
            sigma: 0.3,
            lambda_levels: vec![0.5, 1.0, 2.0],
            lambda_layout: LambdaLayout::Blocks(4),
            beta_patterns: None,
            seed: 0,
        }
    }
}

impl SimScenario {
    /// Same scenario with every exponent fixed at 1.
    pub fn without_transformation(mut self) -> Self {
        self.lambda_levels = vec![1.0];
        self
    }
}

pub struct SimulatedData {
    pub dataset: Dataset,
    /// Covariates without the intercept column, `n × 3`.
    pub covariates: DMatrix<f64>,
    /// `N_D × p`.
    pub beta_true: DMatrix<f64>,
    pub lambda_true: Vec<f64>,
    pub retries: u64,
}

/// Design matrix `n × 4`: intercept, `N(5, 1)` and the two contrast columns.
pub fn gen_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(StmError::Parameter("need at least one subject".into()));
    }
    let mut x = DMatrix::zeros(n, SIM_COVARIATES);
    for i in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        let category = rng.random_range(1..=3u8);
        let (x2, x3) = category_contrasts(category);
        x[(i, 0)] = 1.0;
        x[(i, 1)] = 5.0 + e;
        x[(i, 2)] = x2;
        x[(i, 3)] = x3;
    }
    Ok(x)
}

/// `(1(cat 2) - 1(cat 1), 1(cat 3) - 1(cat 1))` for a category in 1..=3.
pub fn category_contrasts(category: u8) -> (f64, f64) {
    let ind = |q: u8| if category == q { 1.0 } else { 0.0 };
    (ind(2) - ind(1), ind(3) - ind(1))
}

/// In-plane coordinates of voxel `d` scaled to `[0, 1]`.
fn plane_position(lat: &Lattice, d: usize) -> (f64, f64) {
    let c = lat.coords(d);
    let scale = |v: usize, n: usize| if n > 1 { v as f64 / (n - 1) as f64 } else { 0.5 };
    (scale(c[0], lat.dims()[0]), scale(c[1], lat.dims()[1]))
}

/// Four piecewise-constant coefficient images, repeated along a third axis:
///
/// * intercept: 1.0 inside a centered disk of radius 0.3, 0.5 elsewhere;
/// * covariate 1: 1.0 inside the rectangle `[0.15, 0.55] × [0.2, 0.85]`, 0.5 elsewhere;
/// * covariate 2: 0.5 on a centered cross of half-width 0.12, 0 elsewhere;
/// * covariate 3: −0.5 on an annulus `0.25 ≤ r ≤ 0.42` around the center, 0 elsewhere.
pub fn builtin_patterns(lat: &Lattice) -> Vec<Vec<f64>> {
    shape_patterns(lat, &BUILTIN_LEVELS)
}

/// `(inside, outside)` values of the disk, rectangle, cross and annulus
/// templates used by [`builtin_patterns`].
pub const BUILTIN_LEVELS: [(f64, f64); SIM_COVARIATES] =
    [(1.0, 0.8), (0.1, -0.1), (0.5, 0.0), (-0.5, 0.0)];

/// The four template shapes with the given `(inside, outside)` values.
pub fn shape_patterns(lat: &Lattice, levels: &[(f64, f64); SIM_COVARIATES]) -> Vec<Vec<f64>> {
    let nd = lat.len();
    let mut out = vec![vec![0.0; nd]; SIM_COVARIATES];
    for d in 0..nd {
        let (u, v) = plane_position(lat, d);
        let r = ((u - 0.5).powi(2) + (v - 0.5).powi(2)).sqrt();
        let inside = [
            r <= 0.3,
            (0.15..=0.55).contains(&u) && (0.2..=0.85).contains(&v),
            (u - 0.5).abs() <= 0.12 || (v - 0.5).abs() <= 0.12,
            (0.25..=0.42).contains(&r),
        ];
        for k in 0..SIM_COVARIATES {
            out[k][d] = if inside[k] { levels[k].0 } else { levels[k].1 };
        }
    }
    out
}

/// SHA-256 of the images, little-endian, pattern after pattern.
pub fn pattern_hash(patterns: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    for p in patterns {
        for v in p {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn gen_lambda_field<R: Rng + ?Sized>(
    lat: &Lattice,
    levels: &[f64],
    layout: &LambdaLayout,
    rng: &mut R,
) -> Vec<f64> {
    let pick = |rng: &mut R| levels[rng.random_range(0..levels.len())];
    match layout {
        LambdaLayout::Voxelwise => (0..lat.len()).map(|_| pick(rng)).collect(),
        LambdaLayout::Blocks(blocks) => {
            let blocks = (*blocks).max(1);
            let per_block: Vec<f64> = (0..blocks.pow(lat.ndim() as u32)).map(|_| pick(rng)).collect();
            (0..lat.len())
                .map(|d| {
                    let idx = lat
                        .coords(d)
                        .iter()
                        .zip(lat.dims())
                        .fold(0, |acc, (&c, &n)| acc * blocks + c * blocks / n);
                    per_block[idx]
                })
                .collect()
        }
    }
}

pub fn gen_dataset(sc: &SimScenario) -> Result<SimulatedData> {
    let lat = Lattice::new(&sc.dims)?;
    if !(sc.sigma >= 0.0) || !sc.sigma.is_finite() {
        return Err(StmError::Parameter(format!("sigma must be non-negative, got {}", sc.sigma)));
    }
    if sc.lambda_levels.is_empty() {
        return Err(StmError::Parameter("lambda_levels is empty".into()));
    }
    let x = gen_covariates(sc.n, &mut substream(sc.seed, Stream::Covariates))?;
    let patterns = match &sc.beta_patterns {
        Some(p) => {
            if p.len() != SIM_COVARIATES || p.iter().any(|img| img.len() != lat.len()) {
                return Err(StmError::Dimension(format!(
                    "need {SIM_COVARIATES} patterns of {} voxels",
                    lat.len()
                )));
            }
            p.clone()
        }
        None => builtin_patterns(&lat),
    };
    let lambda_true = gen_lambda_field(
        &lat,
        &sc.lambda_levels,
        &sc.lambda_layout,
        &mut substream(sc.seed, Stream::LambdaField),
    );
    let nd = lat.len();
    let beta_true = DMatrix::from_fn(nd, SIM_COVARIATES, |d, k| patterns[k][d]);

    let columns: Vec<(Vec<f64>, u64)> = (0..nd)
        .into_par_iter()
        .map(|d| {
            let mut rng = substream(sc.seed, Stream::Noise(d));
            let lambda = lambda_true[d];
            let mut col = Vec::with_capacity(sc.n);
            let mut retries = 0u64;
            for i in 0..sc.n {
                let mean: f64 = (0..SIM_COVARIATES).map(|k| x[(i, k)] * beta_true[(d, k)]).sum();
                let mut tries = 0u64;
                let y = loop {
                    let e: f64 = rng.sample(StandardNormal);
                    let z = mean + sc.sigma * e;
                    if lambda.abs() < boxcox::LAMBDA_ZERO_EPS || lambda * z + 1.0 > 0.0 {
                        let y = boxcox::inverse_transform(z, lambda, 0.0)?;
                        if y > 0.0 {
                            break y;
                        }
                    }
                    tries += 1;
                    if tries > MAX_RETRIES_PER_CELL {
                        return Err(StmError::Generation(format!(
                            "subject {i}, voxel {d}: more than {MAX_RETRIES_PER_CELL} rejected noise draws"
                        )));
                    }
                };
                retries += tries;
                col.push(y);
            }
            Ok((col, retries))
        })
        .collect::<Result<_>>()?;

    let mut y = DMatrix::zeros(sc.n, nd);
    let mut retries = 0;
    for (d, (col, r)) in columns.into_iter().enumerate() {
        y.column_mut(d).copy_from(&DVector::from_vec(col));
        retries += r;
    }
    let covariates = x.columns(1, SIM_COVARIATES - 1).into_owned();
    let dataset = Dataset::new(lat, y, x, 0.0)?;
    Ok(SimulatedData {
        dataset,
        covariates,
        beta_true,
        lambda_true,
        retries,
    })
}
