//! Refits the selected model by Newton's method and predicts on new rows.

use nalgebra::DMatrix;
use smle::glm::NewtonOptions;
use smle::{
    gen_data, newton_refit, run_screening, run_selection, Family, GenConfig, Scale,
    ScreeningConfig, SelectionConfig,
};

fn main() -> smle::Result<()> {
    let cfg = GenConfig {
        n: 300,
        p: 200,
        family: Family::Binomial,
        pos_truecoef: Some(vec![1, 4]),
        effect_truecoef: Some(vec![2.0, -1.5]),
        seed: 5,
        ..Default::default()
    };
    let data = gen_data(&cfg)?.dataset;
    let fit = run_screening(&data, &ScreeningConfig::with_k(10))?;
    let sel = run_selection(&data, &fit, &SelectionConfig::default())?;
    let model = newton_refit(&data, &sel.selected_columns, &NewtonOptions::default())?;
    println!("support {:?}, loglik {:.3}", model.support, model.loglik);

    let fresh = gen_data(&GenConfig {
        n: 5,
        seed: 99,
        ..cfg
    })?
    .dataset;
    let x_new: DMatrix<f64> = fresh.x;
    let link = model.predict(&x_new, Scale::Link)?;
    let prob = model.predict(&x_new, Scale::Response)?;
    for i in 0..x_new.nrows() {
        println!("row {i}: eta = {:>7.3}, P(y = 1) = {:.3}", link[i], prob[i]);
    }
    Ok(())
}
