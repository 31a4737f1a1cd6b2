//! Tracks mean λ per true level across sweeps on the 32×32 scenario.
//!
//! cargo run --release --example lambda_trace -- [seed] [iterations] [adapt|-] [identity]

use stm::gibbs::{initial_state, GibbsSampler, SamplerConfig};
use stm::model::Hyperparams;
use stm::simgen::{gen_dataset, SimScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let iterations: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let adapt = args.get(3).is_some_and(|s| s == "adapt");
    let identity = args.get(4).is_some_and(|s| s == "identity");
    let sim = gen_dataset(&SimScenario { seed, ..SimScenario::default() })?;
    let hp = Hyperparams::simulation_defaults(4);
    let cfg = SamplerConfig { iterations, burn_in: 50, seed, adapt_lambda: adapt, ..SamplerConfig::default() };
    let cfg = if identity { SamplerConfig { init: stm::gibbs::InitStrategy::Identity, ..cfg } } else { cfg };
    let mut st = initial_state(&sim.dataset, &hp, cfg.init);
    let mut g = GibbsSampler::new(&sim.dataset, &hp, cfg, &st)?;
    let levels = [0.5, 1.0, 2.0];
    for t in 1..=iterations {
        g.sweep(&mut st)?;
        if t % (iterations / 10).max(1) == 0 || t <= 5 {
            let mut line = format!("t {t:5}");
            for &l in &levels {
                let v: Vec<f64> = (0..st.lambda.len())
                    .filter(|&d| sim.lambda_true[d] == l)
                    .map(|d| st.lambda[d])
                    .collect();
                if !v.is_empty() {
                    line += &format!("  true {l}: mean {:.3}", v.iter().sum::<f64>() / v.len() as f64);
                }
            }
            line += &format!("  nu {:?}", st.nu.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
            println!("{line}");
        }
    }
    Ok(())
}
