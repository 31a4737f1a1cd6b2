//! Runs the 32×32 simulation scenario for one seed and prints RMSE per
//! coefficient image for the spatial model and both comparison fits.
//!
//! cargo run --release --example replication -- [seed] [iterations] [null]

use stm::baselines::{fit_gmrf_fixed_lambda, fit_ols, posterior_mean_beta};
use stm::gibbs::{run_chain, SamplerConfig};
use stm::model::Hyperparams;
use stm::simgen::{gen_dataset, SimScenario};
use stm::summary::{pearson, rmse, summarize, total_variation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let iterations: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let null = args.get(3).is_some_and(|s| s == "null");
    let levels: Vec<f64> = args.iter().skip(4).map(|s| s.parse()).collect::<Result<_, _>>()?;

    let mut sc = SimScenario { seed, ..SimScenario::default() };
    if null {
        sc = sc.without_transformation();
    }
    if levels.len() == 8 {
        let lv = [(levels[0], levels[1]), (levels[2], levels[3]), (levels[4], levels[5]), (levels[6], levels[7])];
        let lat = stm::lattice::Lattice::new(&sc.dims)?;
        sc.beta_patterns = Some(stm::simgen::shape_patterns(&lat, &lv));
    }
    let sim = gen_dataset(&sc)?;
    let hp = Hyperparams::simulation_defaults(4);
    let cfg = SamplerConfig { iterations, burn_in: 50, seed, ..SamplerConfig::default() };

    let chain = run_chain(&sim.dataset, &hp, &cfg, None)?;
    let stm_beta = posterior_mean_beta(&chain)?;
    let fixed = fit_gmrf_fixed_lambda(&sim.dataset, &hp, &cfg)?;
    let ols = fit_ols(&sim.dataset)?;
    let summary = summarize(&chain, 0.95)?;

    println!("seed {seed}: retries {}, mean sweep {:.4}s", sim.retries, chain.meta.mean_sweep_seconds());
    for k in 0..4 {
        let truth = sim.beta_true.column(k);
        println!(
            "beta_{k}: stm {:.4}  fixed {:.4}  ols {:.4}",
            rmse(stm_beta.column(k).as_slice(), truth.as_slice()),
            rmse(fixed.beta_est.column(k).as_slice(), truth.as_slice()),
            rmse(ols.beta_est.column(k).as_slice(), truth.as_slice()),
        );
    }
    let lat = sim.dataset.lattice();
    let rates = chain.acceptance_rates();
    let in_band = rates.iter().filter(|&&r| r > 0.05 && r < 0.95).count();
    println!(
        "lambda: corr {:.4}  tv_hat {:.2}  tv_true {:.2}  accept mean {:.3}  in (0.05,0.95) {}/{}",
        if null { f64::NAN } else { pearson(&summary.lambda_mean, &sim.lambda_true) },
        total_variation(lat, &summary.lambda_mean),
        total_variation(lat, &sim.lambda_true),
        rates.iter().sum::<f64>() / rates.len() as f64,
        in_band,
        rates.len()
    );
    Ok(())
}
