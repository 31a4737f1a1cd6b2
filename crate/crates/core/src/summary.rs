//! Posterior means, equal-tailed credible intervals and threshold maps.
//!
//! Quantiles interpolate linearly between order statistics: for sorted draws
//! `x_0 ≤ … ≤ x_{m-1}` the `q` quantile is `x_j + (h - j)(x_{j+1} - x_j)` with
//! `h = (m - 1) q` and `j = ⌊h⌋`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Result, StmError};
use crate::gibbs::Chain;
use crate::lattice::Lattice;

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let j = h.floor() as usize;
    if j + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[j] + (h - j as f64) * (sorted[j + 1] - sorted[j])
}

/// Mean and equal-tailed interval of one scalar series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn excludes(&self, value: f64) -> bool {
        value < self.lo || value > self.hi
    }
}

pub fn credible_interval(values: &mut [f64], level: f64) -> Interval {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Interval {
        mean,
        lo: quantile_sorted(values, alpha / 2.0),
        hi: quantile_sorted(values, 1.0 - alpha / 2.0),
    }
}

/// Per-voxel posterior maps. Coefficient maps are `N_D × p`, column `k` being
/// the image for covariate `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryMaps {
    pub level: f64,
    pub beta_mean: DMatrix<f64>,
    pub beta_ci_lo: DMatrix<f64>,
    pub beta_ci_hi: DMatrix<f64>,
    /// Interval excludes 0.
    pub beta_signif: DMatrix<bool>,
    pub lambda_mean: Vec<f64>,
    pub lambda_ci_lo: Vec<f64>,
    pub lambda_ci_hi: Vec<f64>,
    /// Interval excludes 1.
    pub lambda_not_one: Vec<bool>,
    pub tau_mean: Vec<f64>,
    pub accept_rate: Vec<f64>,
}

impl SummaryMaps {
    pub fn fraction_lambda_not_one(&self) -> f64 {
        frac(&self.lambda_not_one)
    }

    pub fn fraction_signif(&self, k: usize) -> f64 {
        frac(self.beta_signif.column(k).as_slice())
    }
}

fn frac(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

pub fn summarize(ch: &Chain, level: f64) -> Result<SummaryMaps> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StmError::Parameter(format!("level must lie in (0, 1), got {level}")));
    }
    let first = ch.draws.first().ok_or(StmError::EmptyChain)?;
    let nd = first.n_voxels();
    let p = first.n_covariates();
    let mut buf = vec![0.0; ch.draws.len()];

    let mut beta_mean = DMatrix::zeros(nd, p);
    let mut beta_ci_lo = DMatrix::zeros(nd, p);
    let mut beta_ci_hi = DMatrix::zeros(nd, p);
    let mut beta_signif = DMatrix::from_element(nd, p, false);
    for k in 0..p {
        for d in 0..nd {
            for (slot, st) in buf.iter_mut().zip(&ch.draws) {
                *slot = st.beta[(d, k)];
            }
            let iv = credible_interval(&mut buf, level);
            beta_mean[(d, k)] = iv.mean;
            beta_ci_lo[(d, k)] = iv.lo;
            beta_ci_hi[(d, k)] = iv.hi;
            beta_signif[(d, k)] = iv.excludes(0.0);
        }
    }

    let mut lambda_mean = vec![0.0; nd];
    let mut lambda_ci_lo = vec![0.0; nd];
    let mut lambda_ci_hi = vec![0.0; nd];
    let mut lambda_not_one = vec![false; nd];
    let mut tau_mean = vec![0.0; nd];
    for d in 0..nd {
        for (slot, st) in buf.iter_mut().zip(&ch.draws) {
            *slot = st.lambda[d];
        }
        let iv = credible_interval(&mut buf, level);
        lambda_mean[d] = iv.mean;
        lambda_ci_lo[d] = iv.lo;
        lambda_ci_hi[d] = iv.hi;
        lambda_not_one[d] = iv.excludes(1.0);
        tau_mean[d] = ch.draws.iter().map(|st| st.tau[d]).sum::<f64>() / ch.draws.len() as f64;
    }

    Ok(SummaryMaps {
        level,
        beta_mean,
        beta_ci_lo,
        beta_ci_hi,
        beta_signif,
        lambda_mean,
        lambda_ci_lo,
        lambda_ci_hi,
        lambda_not_one,
        tau_mean,
        accept_rate: ch.acceptance_rates(),
    })
}

/// Writes per-draw traces of `β(d)`, `τ_d` and `λ_d` for each requested voxel
/// as CSV in long format: `draw,voxel,beta_0..beta_{p-1},tau,lambda`.
pub fn trace_report<W: Write>(ch: &Chain, voxels: &[usize], out: W) -> Result<()> {
    let nd = ch.meta.dims.iter().product::<usize>();
    let p = ch.meta.n_covariates;
    if let Some(&bad) = voxels.iter().find(|&&v| v >= nd) {
        return Err(StmError::Parameter(format!(
            "voxel index {bad} out of range for {nd} voxels"
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["draw".to_string(), "voxel".to_string()];
    header.extend((0..p).map(|k| format!("beta_{k}")));
    header.push("tau".into());
    header.push("lambda".into());
    w.write_record(&header)?;
    for &v in voxels {
        for (t, st) in ch.draws.iter().enumerate() {
            let mut rec = vec![t.to_string(), v.to_string()];
            rec.extend((0..p).map(|k| format!("{:e}", st.beta[(v, k)])));
            rec.push(format!("{:e}", st.tau[v]));
            rec.push(format!("{:e}", st.lambda[v]));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| StmError::io("<trace>", e))?;
    Ok(())
}

/// Anisotropic total variation: sum of `|f(d) - f(d')|` over axis-adjacent
/// voxel pairs.
pub fn total_variation(lat: &Lattice, values: &[f64]) -> f64 {
    lat.axis_edges()
        .into_iter()
        .map(|(a, b)| (values[a] - values[b]).abs())
        .sum()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub fn rmse(estimate: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimate.len(), truth.len());
    let ss: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    (ss / truth.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{ChainMeta, SamplerConfig};
    use crate::model::{Hyperparams, ModelState};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn chain_from(values: &[f64]) -> Chain {
        let draws = values
            .iter()
            .map(|&v| ModelState {
                beta: DMatrix::from_element(2, 1, v),
                tau: DVector::from_element(2, 1.0 + v.abs()),
                lambda: DVector::from_element(2, v),
                nu: DVector::from_element(1, 1.0),
            })
            .collect();
        Chain {
            draws,
            lambda_accept: vec![3, 5],
            meta: ChainMeta {
                config: SamplerConfig {
                    iterations: 10,
                    burn_in: 0,
                    ..SamplerConfig::default()
                },
                hyperparams: Hyperparams::simulation_defaults(1),
                data_fingerprint: String::new(),
                dims: vec![1, 2],
                n_subjects: 1,
                n_covariates: 1,
                lambda_scale: vec![0.1; 2],
                sweep_seconds: vec![],
            },
        }
    }

    #[test]
    fn interpolated_interval() {
        let mut v = vec![3.0, 1.0, 5.0, 2.0, 4.0];
        let iv = credible_interval(&mut v, 0.6);
        assert_relative_eq!(iv.lo, 1.8, max_relative = 1e-14);
        assert_relative_eq!(iv.hi, 4.2, max_relative = 1e-14);
        assert_relative_eq!(iv.mean, 3.0);
    }

    #[test]
    fn constant_chain() {
        let s = summarize(&chain_from(&[0.7; 6]), 0.95).unwrap();
        assert_relative_eq!(s.beta_mean[(0, 0)], 0.7, max_relative = 1e-15);
        assert_eq!(s.beta_ci_lo[(1, 0)], 0.7);
        assert_eq!(s.beta_ci_hi[(1, 0)], 0.7);
        assert!(s.beta_signif[(0, 0)]);
        assert!(s.lambda_not_one[0]);

        let z = summarize(&chain_from(&[0.0; 4]), 0.95).unwrap();
        assert!(!z.beta_signif[(0, 0)]);
        let one = summarize(&chain_from(&[1.0; 4]), 0.95).unwrap();
        assert!(!one.lambda_not_one[1]);
    }

    #[test]
    fn acceptance_rates_use_all_iterations() {
        let s = summarize(&chain_from(&[1.0, 2.0]), 0.9).unwrap();
        assert_eq!(s.accept_rate, vec![0.3, 0.5]);
    }

    #[test]
    fn empty_chain_and_bad_level() {
        assert!(matches!(summarize(&chain_from(&[]), 0.95), Err(StmError::EmptyChain)));
        assert!(summarize(&chain_from(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn trace_shapes() {
        let ch = chain_from(&[1.0, 2.0, 3.0]);
        let mut buf = Vec::new();
        trace_report(&ch, &[1], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "draw,voxel,beta_0,tau,lambda");
        assert_eq!(lines.len(), 4);

        let mut empty = Vec::new();
        trace_report(&ch, &[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);

        assert!(trace_report(&ch, &[2], Vec::new()).is_err());
    }

    #[test]
    fn tv_and_correlation() {
        let lat = Lattice::new(&[2, 2]).unwrap();
        assert_relative_eq!(total_variation(&lat, &[0.0, 1.0, 1.0, 3.0]), 1.0 + 1.0 + 2.0 + 2.0);
        assert_relative_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 1.0, max_relative = 1e-14);
        assert_relative_eq!(rmse(&[1.0, 3.0], &[0.0, 0.0]), 5f64.sqrt(), max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn wider_level_nests_narrower(values in prop::collection::vec(-10.0f64..10.0, 1..200)) {
            let mut a = values.clone();
            let mut b = values;
            let narrow = credible_interval(&mut a, 0.90);
            let wide = credible_interval(&mut b, 0.99);
            prop_assert!(wide.lo <= narrow.lo && narrow.hi <= wide.hi);
            prop_assert!(narrow.lo <= narrow.hi);
        }
    }
}
