//! Simulates a logistic dataset with autoregressive features and two
//! categorical columns, then writes it as CSV.

use smle::frame::write_table;
use smle::{gen_data, Correlation, Family, GenConfig};

fn main() -> smle::Result<()> {
    let cfg = GenConfig {
        n: 200,
        p: 50,
        family: Family::Binomial,
        correlation: Correlation::AutoRegressive,
        rho: 0.5,
        pos_truecoef: Some(vec![0, 4, 9]),
        effect_truecoef: Some(vec![1.5, -2.0, 1.0]),
        pos_ctgidx: Some(vec![1, 2]),
        level_ctgidx: Some(vec![3, 4]),
        seed: 42,
        ..Default::default()
    };
    let g = gen_data(&cfg)?;
    let truth = g.dataset.truth.as_ref().unwrap();
    println!("n = {}, design columns = {}", g.dataset.n(), g.dataset.p());
    println!("causal features: {:?}", truth.causal_index);
    println!("successes: {}", g.dataset.y.sum());

    let path = std::env::temp_dir().join("smle_generated.csv");
    write_table(&path, Some(&g.dataset.y), &g.frame)?;
    println!("wrote {}", path.display());
    Ok(())
}
