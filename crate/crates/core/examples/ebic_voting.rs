//! EBIC selection repeated over a grid of gamma values, keeping the features
//! chosen in most runs.

use smle::{
    gen_data, run_screening, run_selection, Family, GenConfig, ScreeningConfig, SelectionConfig,
};

fn main() -> smle::Result<()> {
    let data = gen_data(&GenConfig {
        n: 200,
        p: 400,
        family: Family::Gaussian,
        pos_truecoef: Some(vec![0, 1, 2, 3]),
        effect_truecoef: Some(vec![1.0, -1.0, 0.8, 0.6]),
        seed: 11,
        ..Default::default()
    })?
    .dataset;
    let fit = run_screening(&data, &ScreeningConfig::with_k(12))?;
    let cfg = SelectionConfig {
        vote: true,
        parallel: true,
        ..Default::default()
    };
    let sel = run_selection(&data, &fit, &cfg)?;
    let votes = sel.votes.as_ref().unwrap();
    println!("gamma grid: {:?}", votes.gamma_seq);
    for &(feature, count) in &votes.counts {
        println!("x{:<4} {:.2}", feature + 1, votes.frequency(count));
    }
    println!("selected: {:?}", sel.selected);
    Ok(())
}
