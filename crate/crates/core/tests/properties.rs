use nalgebra::DMatrix;
use proptest::prelude::*;
use smle::datagen::build_covariance;
use smle::glm::{b_prime, b_value, gradient, log_likelihood};
use smle::iht::hard_threshold;
use smle::{
    gen_data, newton_refit, run_screening, CoefVector, Correlation, CovarianceSpec, Dataset,
    Family, GenConfig, ScreeningConfig,
};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::Gaussian),
        Just(Family::Binomial),
        Just(Family::Poisson)
    ]
}

fn small_data(family: Family, n: usize, p: usize, seed: u64) -> Dataset {
    let m = p.min(3);
    let effects = match family {
        Family::Gaussian => vec![1.5; m],
        Family::Binomial => vec![1.0; m],
        Family::Poisson => vec![0.4; m],
    };
    gen_data(&GenConfig {
        n,
        p,
        family,
        num_truecoef: m,
        pos_truecoef: Some((0..m).collect()),
        effect_truecoef: Some(effects),
        seed,
        ..Default::default()
    })
    .unwrap()
    .dataset
}

fn scaled(v: &[f64], s: f64) -> CoefVector {
    CoefVector::from_vec(v.iter().map(|x| x * s).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_finite_differences(
        fam in family(), n in 10usize..40, p in 2usize..8, seed in 0u64..1000,
        raw in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let data = small_data(fam, n, p, seed);
        let beta = scaled(&raw[..p], 0.3);
        let g = gradient(&data, &beta).unwrap();
        let h = 1e-5;
        for j in 0..p {
            let mut up = beta.values().to_vec();
            let mut dn = up.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (log_likelihood(&data, &CoefVector::from_vec(up)).unwrap()
                - log_likelihood(&data, &CoefVector::from_vec(dn)).unwrap())
                / (2.0 * h);
            let scale = g[j].abs().max(1.0);
            prop_assert!((fd - g[j]).abs() / scale < 1e-5, "j={} fd={} g={}", j, fd, g[j]);
        }
    }

    #[test]
    fn mean_is_cumulant_derivative(fam in family(), theta in -8.0f64..8.0) {
        let h = 1e-6;
        let fd = (b_value(fam, theta + h) - b_value(fam, theta - h)) / (2.0 * h);
        prop_assert!((fd - b_prime(fam, theta)).abs() < 1e-6 * b_prime(fam, theta).abs().max(1.0));
    }

    #[test]
    fn log_likelihood_is_concave(
        fam in family(), seed in 0u64..1000,
        a in prop::collection::vec(-1.0f64..1.0, 6),
        b in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let data = small_data(fam, 30, 6, seed);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let la = log_likelihood(&data, &CoefVector::from_vec(a)).unwrap();
        let lb = log_likelihood(&data, &CoefVector::from_vec(b)).unwrap();
        let lm = log_likelihood(&data, &CoefVector::from_vec(mid)).unwrap();
        prop_assert!(lm >= 0.5 * (la + lb) - 1e-9);
    }

    #[test]
    fn gaussian_refit_solves_normal_equations(
        n in 20usize..60, seed in 0u64..1000,
        support in prop::collection::btree_set(0usize..10, 1..4),
    ) {
        let data = small_data(Family::Gaussian, n, 10, seed);
        let cols: Vec<usize> = support.into_iter().collect();
        let fit = newton_refit(&data, &cols, &Default::default()).unwrap();
        let xs = DMatrix::from_fn(n, cols.len(), |i, c| data.x[(i, cols[c])]);
        let direct = (xs.transpose() * &xs)
            .cholesky()
            .unwrap()
            .solve(&(xs.transpose() * &data.y));
        for (c, &j) in cols.iter().enumerate() {
            prop_assert!((fit.coef.get(j) - direct[c]).abs() < 1e-8 * direct[c].abs().max(1.0));
        }
    }

    #[test]
    fn first_gaussian_step_is_marginal_ranking(
        n in 20usize..50, p in 10usize..60, k in 1usize..8, seed in 0u64..1000,
    ) {
        let data = small_data(Family::Gaussian, n, p, seed);
        let fit = run_screening(&data, &ScreeningConfig::with_k(k)).unwrap();
        let mut first: Vec<usize> = fit.trace.records[0].beta.iter().map(|e| e.0).collect();
        first.sort_unstable();
        let xty = data.x.tr_mul(&data.y);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| xty[b].abs().total_cmp(&xty[a].abs()).then(a.cmp(&b)));
        let mut top = order[..k].to_vec();
        top.sort_unstable();
        prop_assert_eq!(first, top);
    }

    #[test]
    fn screening_is_permutation_invariant(
        fam in family(), seed in 0u64..1000, shift in 1usize..29,
    ) {
        let data = small_data(fam, 60, 30, seed);
        let perm: Vec<usize> = (0..30).map(|j| (j + shift) % 30).collect();
        let xp = DMatrix::from_fn(60, 30, |i, j| data.x[(i, perm[j])]);
        let permuted = Dataset::new(data.y.clone(), xp, fam).unwrap();
        let cfg = ScreeningConfig::with_k(5);
        let a = run_screening(&data, &cfg).unwrap();
        let b = run_screening(&permuted, &cfg).unwrap();
        let mut mapped: Vec<usize> = b.retained.iter().map(|&j| perm[j]).collect();
        mapped.sort_unstable();
        prop_assert_eq!(a.retained, mapped);
    }

    #[test]
    fn likelihood_never_decreases(
        fam in family(), n in 20usize..80, p in 5usize..80, k in 1usize..10,
        seed in 0u64..1000, fast in any::<bool>(),
    ) {
        let data = small_data(fam, n, p, seed);
        let cfg = ScreeningConfig { fast, ..ScreeningConfig::with_k(k.min(p)) };
        let fit = run_screening(&data, &cfg).unwrap();
        let mut prev = fit.trace.initial_loglik;
        for r in &fit.trace.records {
            prop_assert!(r.loglik >= prev - 1e-10, "{} < {}", r.loglik, prev);
            prev = r.loglik;
        }
    }

    #[test]
    fn covariance_is_symmetric_with_unit_diagonal(
        which in 0usize..4, rho in 0.0f64..0.6, p in 2usize..30,
    ) {
        let structure = [
            Correlation::Independent,
            Correlation::MovingAverage,
            Correlation::CompoundSymmetry,
            Correlation::AutoRegressive,
        ][which];
        let mut spec = CovarianceSpec::new(structure, rho);
        spec.causal = vec![0, p - 1];
        let s = build_covariance(&spec, p).unwrap();
        prop_assert!(s.clone().cholesky().is_some());
        for i in 0..p {
            prop_assert_eq!(s[(i, i)], 1.0);
            for j in 0..p {
                prop_assert_eq!(s[(i, j)], s[(j, i)]);
            }
        }
    }

    #[test]
    fn threshold_keeps_largest_and_keyset(
        v in prop::collection::vec(-10.0f64..10.0, 4..40), k in 1usize..6, key in 0usize..4,
    ) {
        let out = hard_threshold(&v, k, &[key], None);
        let support = out.support();
        prop_assert!(support.contains(&key) || v[key] == 0.0);
        prop_assert!(support.len() <= k.max(1));
        let kept_min = support.iter().filter(|&&j| j != key).map(|&j| v[j].abs()).fold(f64::INFINITY, f64::min);
        for (j, x) in v.iter().enumerate() {
            if !support.contains(&j) && j != key {
                prop_assert!(x.abs() <= kept_min);
            }
        }
        for &j in &support {
            prop_assert_eq!(out.get(j), v[j]);
        }
    }
}

#[test]
fn screening_full_k_retains_everything() {
    let data = small_data(Family::Binomial, 40, 6, 3);
    let fit = run_screening(&data, &ScreeningConfig::with_k(6)).unwrap();
    assert_eq!(fit.retained, (0..6).collect::<Vec<_>>());
}

#[test]
fn refit_with_empty_support_has_finite_loglik() {
    let data = small_data(Family::Poisson, 30, 4, 9);
    let fit = newton_refit(&data, &[], &Default::default()).unwrap();
    assert!(fit.loglik.is_finite());
}
