//! Categorical features enter as dummy groups; the keyset pins features in.

use smle::{gen_data, run_screening, Family, GenConfig, ScreeningConfig};

fn main() -> smle::Result<()> {
    let data = gen_data(&GenConfig {
        n: 250,
        p: 300,
        family: Family::Gaussian,
        pos_truecoef: Some(vec![0, 5, 8]),
        effect_truecoef: Some(vec![2.0, 1.5, -1.5]),
        pos_ctgidx: Some(vec![0, 1, 2]),
        level_ctgidx: Some(vec![3, 4, 5]),
        seed: 3,
        ..Default::default()
    })?
    .dataset;
    println!(
        "{} features encoded as {} columns",
        data.n_features(),
        data.p()
    );

    let cfg = ScreeningConfig {
        keyset: vec![0, 3, 4],
        ..ScreeningConfig::with_k(15)
    };
    let fit = run_screening(&data, &cfg)?;
    println!(
        "retained {} features: {:?}",
        fit.retained_features.len(),
        fit.retained_features
    );
    println!("retained {} design columns", fit.retained.len());
    Ok(())
}
