//! Minimum retained distance of the screener versus marginal ranking on
//! strongly autocorrelated features.

use smle::bench::{marginal_top_k, mean_mrd};
use smle::{gen_data, run_screening, Correlation, GenConfig, ScreeningConfig};

fn main() -> smle::Result<()> {
    for seed in 1..=5 {
        let g = gen_data(&GenConfig {
            n: 300,
            p: 2000,
            correlation: Correlation::AutoRegressive,
            rho: 0.9,
            num_truecoef: 10,
            seed,
            ..Default::default()
        })?;
        let causal = &g.dataset.truth.as_ref().unwrap().causal_index;
        let fit = run_screening(&g.dataset, &ScreeningConfig::with_k(40))?;
        let smle = mean_mrd(causal, &fit.retained_features)?;
        let marginal = mean_mrd(causal, &marginal_top_k(&g.dataset, 40))?;
        println!("seed {seed}: screener {smle:.2}, marginal {marginal:.2}");
    }
    Ok(())
}
