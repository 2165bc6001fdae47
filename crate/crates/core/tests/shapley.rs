use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use twofactor::design::{Config, FactorSpace, ReferenceDistribution, RunLog};
use twofactor::effects::{estimate_effects_cm, EffectTable, Provenance, ShrinkageSpec};
use twofactor::rng;
use twofactor::shapley::*;

fn random_table(space: &FactorSpace, seed: u64) -> EffectTable {
    let mut r = rng::stream(seed, &[]);
    let mut t = EffectTable::zeros(space, Provenance::Truth);
    t.mu = r.random_range(-1.0..1.0);
    for g in t.mains.iter_mut().flatten() {
        *g = r.random_range(-1.0..1.0);
    }
    for p in &mut t.pairs {
        for v in p.as_mut_slice() {
            *v = r.random_range(-0.5..0.5);
        }
    }
    t.center(&ReferenceDistribution::uniform(space));
    t
}

fn table_oracle(t: &EffectTable) -> ValueOracle {
    let s = t.space().clone();
    let bound = s
        .enumerate()
        .unwrap()
        .iter()
        .map(|x| t.predict(x).abs())
        .fold(0.0, f64::max);
    let t2 = t.clone();
    ValueOracle::from_fn(
        &s,
        Arc::new(move |x: &Config| t2.predict(x)),
        ReferenceDistribution::uniform(&s),
        bound,
    )
    .unwrap()
}

fn exact_estimates(t: &EffectTable, points: &[Config]) -> Vec<ShapleyEstimate> {
    points
        .iter()
        .map(|x| ShapleyEstimate {
            point: x.clone(),
            phi: exact_shapley_second_order(t, x),
            variance: vec![0.0; x.len()],
            samples: 0,
            value: t.predict(x),
            baseline: t.mu,
            max_abs_contribution: 0.0,
            max_efficiency_residual: None,
        })
        .collect()
}

/// Rank by Gaussian elimination with partial pivoting, independent of the SVD.
fn elimination_rank(m: &DMatrix<f64>) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
        else {
            break;
        };
        if a[(p, c)].abs() < 1e-9 {
            continue;
        }
        a.swap_rows(p, rank);
        for i in rank + 1..rows {
            let f = a[(i, c)] / a[(rank, c)];
            for k in c..cols {
                a[(i, k)] -= f * a[(rank, k)];
            }
        }
        rank += 1;
    }
    rank
}

#[test]
fn closed_form_sums_to_prediction_minus_mean() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2]).unwrap();
    let t = random_table(&s, 3);
    for x in s.enumerate().unwrap() {
        let phi = exact_shapley_second_order(&t, &x);
        assert!((phi.iter().sum::<f64>() - (t.predict(&x) - t.mu)).abs() < 1e-10);
    }
}

#[test]
fn closed_form_matches_coalition_enumeration() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2, 3]).unwrap();
    let t = random_table(&s, 8);
    let o = table_oracle(&t);
    for x in s.enumerate().unwrap() {
        let a = exact_shapley(&o, &x).unwrap();
        let b = exact_shapley_second_order(&t, &x);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn mc_converges_within_hoeffding_bound() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2, 3]).unwrap();
    let t = random_table(&s, 5);
    let o = table_oracle(&t);
    let m = 4000;
    let hw = hoeffding_halfwidth(o.bound(), m, 0.01);
    for (i, x) in s.enumerate().unwrap().iter().enumerate().step_by(5) {
        let e = mc_shapley(&o, x, m, i as u64).unwrap();
        for (p, q) in e.phi.iter().zip(exact_shapley_second_order(&t, x)) {
            assert!((p - q).abs() <= hw, "{p} vs {q}, {hw}");
        }
    }
}

#[test]
fn hoeffding_coverage_over_repeated_runs() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2]).unwrap();
    let t = random_table(&s, 13);
    let o = table_oracle(&t);
    let x = Config(vec![1, 2, 0]);
    let exact = exact_shapley_second_order(&t, &x);
    let (m, delta, runs) = (20, 0.1, 600);
    let hw = hoeffding_halfwidth(o.bound(), m, delta);
    let mut exceed = 0usize;
    let mut total = 0usize;
    for run in 0..runs {
        let e = mc_shapley(&o, &x, m, run).unwrap();
        for (p, q) in e.phi.iter().zip(&exact) {
            total += 1;
            if (p - q).abs() > hw {
                exceed += 1;
            }
        }
    }
    assert!((exceed as f64 / total as f64) <= delta + 0.02);
}

#[test]
fn full_grid_round_trip_recovers_table() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2]).unwrap();
    let r = ReferenceDistribution::uniform(&s);
    let t = random_table(&s, 21);
    let est = exact_estimates(&t, &s.enumerate().unwrap());
    let fit = fit_effects_sf(&est, &s, &r, &ShrinkageSpec::vanishing(&s)).unwrap();
    assert!(fit.table.max_abs_diff(&t) < 1e-8);
    assert!(fit.diagnostics.residual_norm < 1e-10);
    assert_eq!(fit.diagnostics.rows, 36);
    assert_eq!(fit.diagnostics.params, 1 + 2 + 1 + 2 + 1 + 2);
}

// Clustered singular values on this grid once cost the solve seven digits.
#[test]
fn clustered_spectrum_round_trip_is_exact() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2, 2, 2]).unwrap();
    let r = ReferenceDistribution::uniform(&s);
    for seed in 0..5 {
        let t = random_table(&s, 40 + seed);
        let est = exact_estimates(&t, &s.enumerate().unwrap());
        let fit = fit_effects_sf(&est, &s, &r, &ShrinkageSpec::vanishing(&s)).unwrap();
        assert!(fit.table.max_abs_diff(&t) < 1e-12);
        assert!(fit.diagnostics.residual_norm < 1e-12);
    }
}

#[test]
fn perturbed_attributions_obey_stability_bound() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2]).unwrap();
    let r = ReferenceDistribution::uniform(&s);
    let t = random_table(&s, 34);
    let grid = s.enumerate().unwrap();
    let a = build_design_matrix(&grid, &s, &r).unwrap();
    let theta = a.to_params(&t);
    let eta = 0.05;
    let mut rr = rng::stream(34, &[1]);
    for _ in 0..100 {
        let mut est = exact_estimates(&t, &grid);
        let mut noise_sq = 0.0;
        for e in &mut est {
            for p in &mut e.phi {
                let n = rr.random_range(-eta..eta);
                *p += n;
                noise_sq += n * n;
            }
        }
        let fit = fit_effects_sf(&est, &s, &r, &ShrinkageSpec::vanishing(&s)).unwrap();
        let err = (a.to_params(&fit.table) - &theta).norm();
        assert!(err <= stability_bound(&a, noise_sq.sqrt()).unwrap() + 1e-12);
        assert!(err <= (a.rows() as f64).sqrt() * eta / a.sigma_min + 1e-12);
    }
}

#[test]
fn zero_attributions_give_zero_table() {
    let s = FactorSpace::with_level_counts(&[3, 2]).unwrap();
    let r = ReferenceDistribution::uniform(&s);
    let z = EffectTable::zeros(&s, Provenance::Truth);
    let fit = fit_effects_sf(
        &exact_estimates(&z, &s.enumerate().unwrap()),
        &s,
        &r,
        &ShrinkageSpec::default_for(&s),
    )
    .unwrap();
    assert!(fit.table.effect_vector().iter().all(|&v| v == 0.0));
}

#[test]
fn full_grid_is_identifiable_by_two_methods() {
    let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
    let a = build_design_matrix(
        &s.enumerate().unwrap(),
        &s,
        &ReferenceDistribution::uniform(&s),
    )
    .unwrap();
    assert!(a.sigma_min > RANK_TOLERANCE);
    assert_eq!(elimination_rank(&a.matrix), a.params());
}

#[test]
fn rank_deficiency_names_blocks() {
    let s = FactorSpace::with_level_counts(&[2, 2, 3]).unwrap();
    // x3 stays at one of three levels: centering pins one contrast, not both
    let pts = [
        Config(vec![0, 0, 0]),
        Config(vec![0, 1, 0]),
        Config(vec![1, 0, 0]),
        Config(vec![1, 1, 0]),
    ];
    match build_design_matrix(&pts, &s, &ReferenceDistribution::uniform(&s)) {
        Err(twofactor::Error::RankDeficient { blocks, .. }) => {
            assert!(blocks.iter().any(|b| b.contains("x3")), "{blocks:?}");
            assert!(!blocks.contains(&"x1|x2".to_string()));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn cm_and_sf_agree_on_full_grid() {
    let s = FactorSpace::with_level_counts(&[2, 3, 2]).unwrap();
    let r = ReferenceDistribution::uniform(&s);
    let base = random_table(&s, 55);
    // higher-order residual that the two-factor model cannot express
    let f = move |x: &Config| base.predict(x) + 0.3 * ((x[0] * 7 + x[1] * 3 + x[2] * 5) % 4) as f64;
    let grid = s.enumerate().unwrap();
    let log = RunLog::from_pairs(&s, &grid, &grid.iter().map(&f).collect::<Vec<_>>()).unwrap();
    let cm = estimate_effects_cm(&s, &log, &r, &ShrinkageSpec::vanishing(&s)).unwrap();
    let o = ValueOracle::from_fn(&s, Arc::new(f.clone()), r.clone(), 10.0).unwrap();
    let est: Vec<ShapleyEstimate> = grid
        .iter()
        .map(|x| ShapleyEstimate {
            point: x.clone(),
            phi: exact_shapley(&o, x).unwrap(),
            variance: vec![0.0; 3],
            samples: 0,
            value: f(x),
            baseline: o.coalition_value(x, 0).unwrap().value,
            max_abs_contribution: 0.0,
            max_efficiency_residual: None,
        })
        .collect();
    let sf = fit_effects_sf(&est, &s, &r, &ShrinkageSpec::vanishing(&s)).unwrap();
    assert!(
        sf.table.max_abs_diff(&cm) < 1e-6,
        "{}",
        sf.table.max_abs_diff(&cm)
    );
}

#[test]
fn log_backed_oracle_matches_function_on_full_grid() {
    let s = FactorSpace::with_level_counts(&[2, 3]).unwrap();
    let r = ReferenceDistribution::uniform(&s);
    let f = |x: &Config| (x[0] + 2 * x[1]) as f64 + if x[0] == x[1] { 1.0 } else { 0.0 };
    let grid = s.enumerate().unwrap();
    let log = RunLog::from_pairs(&s, &grid, &grid.iter().map(f).collect::<Vec<_>>()).unwrap();
    let a = ValueOracle::from_log(&s, &log, r.clone()).unwrap();
    let b = ValueOracle::from_fn(&s, Arc::new(f), r, 5.0).unwrap();
    assert_eq!(a.unobserved_cells(), 0);
    for x in &grid {
        for mask in 0..4 {
            let (va, vb) = (
                a.coalition_value(x, mask).unwrap().value,
                b.coalition_value(x, mask).unwrap().value,
            );
            assert!((va - vb).abs() < 1e-12);
        }
    }
}

#[test]
fn dump_and_diagnostics_formats() {
    let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
    let t = random_table(&s, 2);
    let o = table_oracle(&t);
    let est = mc_shapley_batch(
        &o,
        &s.enumerate().unwrap(),
        10,
        1,
        SamplingScheme::Permutation,
    )
    .unwrap();
    let mut buf = Vec::new();
    write_shapley_csv(&s, &est, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,factor,phi_hat,variance,M");
    assert_eq!(lines.count(), 8);
    let fit = fit_effects_sf(
        &est,
        &s,
        &ReferenceDistribution::uniform(&s),
        &ShrinkageSpec::default_for(&s),
    )
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&fit.diagnostics.to_json()).unwrap();
    for key in ["sigma_min", "residual_norm", "N", "p"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn contributions_bounded_and_permutations_telescope(seed in 0u64..10_000, point in 0usize..36, m in 1usize..40) {
        let s = FactorSpace::with_level_counts(&[2, 3, 2, 3]).unwrap();
        let t = random_table(&s, seed);
        let o = table_oracle(&t);
        let x = s.unrank(point);
        let e = mc_shapley(&o, &x, m, seed).unwrap();
        prop_assert!(e.max_abs_contribution <= 2.0 * o.bound() + 1e-12);
        prop_assert!(e.max_efficiency_residual.unwrap() <= 1e-10);
        for p in &e.phi {
            prop_assert!(p.abs() <= 2.0 * o.bound() + 1e-12);
        }
    }
}
