//! Screens a high-dimensional logistic model and prints the iteration trace.

use smle::{gen_data, run_screening, Correlation, Family, GenConfig, ScreeningConfig};

fn main() -> smle::Result<()> {
    let data = gen_data(&GenConfig {
        n: 400,
        p: 1000,
        family: Family::Binomial,
        correlation: Correlation::AutoRegressive,
        rho: 0.9,
        pos_truecoef: Some(vec![0, 2, 4, 6, 8]),
        effect_truecoef: Some(vec![2.0, 3.0, -3.0, 3.0, -4.0]),
        seed: 2,
        ..Default::default()
    })?
    .dataset;

    let fit = run_screening(&data, &ScreeningConfig::with_k(10))?;
    println!("iter  loglik        step      u-tries");
    for r in fit.trace.records.iter().take(10) {
        println!(
            "{:>4}  {:>12.4}  {:>8.4}  {}",
            r.iter, r.loglik, r.step_delta, r.u_tries
        );
    }
    println!("...");
    println!(
        "stopped after {} iterations ({:?})",
        fit.iterations, fit.stop_reason
    );
    let one_based: Vec<usize> = fit.retained_features.iter().map(|j| j + 1).collect();
    println!("retained features: {one_based:?}");
    Ok(())
}
