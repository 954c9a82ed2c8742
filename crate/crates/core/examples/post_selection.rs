//! Screening followed by sub-model selection with each criterion.

use smle::{
    gen_data, run_screening, run_selection, Criterion, Family, GenConfig, ScreeningConfig,
    SelectionConfig,
};

fn main() -> smle::Result<()> {
    let data = gen_data(&GenConfig {
        n: 300,
        p: 500,
        family: Family::Poisson,
        pos_truecoef: Some(vec![3, 10, 25]),
        effect_truecoef: Some(vec![0.6, -0.5, 0.4]),
        seed: 7,
        ..Default::default()
    })?
    .dataset;
    let fit = run_screening(&data, &ScreeningConfig::with_k(15))?;
    println!("screened: {:?}", fit.retained_features);

    for criterion in [Criterion::Aic, Criterion::Bic, Criterion::Ebic] {
        let cfg = SelectionConfig {
            criterion,
            ..Default::default()
        };
        let sel = run_selection(&data, &fit, &cfg)?;
        println!(
            "{criterion:>4}: k = {:?}, selected {:?}",
            sel.chosen_k, sel.selected
        );
    }
    Ok(())
}
