use proptest::prelude::*;
use twofactor::design::{DesignPlan, FactorSpace, ReferenceDistribution, RunLog};
use twofactor::effects::{estimate_effects_cm, ShrinkageSpec};
use twofactor::simulation::*;

fn quiet(seed: u64) -> TeacherSpec {
    TeacherSpec {
        residual_scale: 0.0,
        noise_sd: 0.0,
        seed,
        ..TeacherSpec::default()
    }
}

// Textbook formula 1 − 6Σd²/(n(n² − 1)), valid without ties.
fn rank_formula(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| v.iter().filter(|y| *y < x).count() as f64 + 1.0)
            .collect()
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn spearman_matches_rank_formula() {
    let a = [0.3, -1.2, 4.0, 2.2, 0.9];
    let b = [1.0, 0.0, 3.0, 5.0, -2.0];
    // ranks (2,1,5,4,3) and (3,2,4,5,1): Σd² = 1+1+1+1+4 = 8, ρ = 1 − 48/120
    assert!((spearman(&a, &b).unwrap() - 0.6).abs() < 1e-12);
    assert!((rank_formula(&a, &b) - 0.6).abs() < 1e-12);
}

#[test]
fn spearman_with_ties_uses_average_ranks() {
    // ranks (1.5, 1.5, 3, 4) against (1, 2, 3, 4): Pearson on ranks
    let r = spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let ra = [1.5, 1.5, 3.0, 4.0];
    let rb = [1.0, 2.0, 3.0, 4.0];
    let m = 2.5;
    let num: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let den = (ra.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        * rb.iter().map(|y| (y - m).powi(2)).sum::<f64>())
    .sqrt();
    assert!((r - num / den).abs() < 1e-12);
}

#[test]
fn second_order_teacher_is_recovered_by_cm() {
    for seed in 0..10 {
        let t = gen_teacher(&TeacherSpec {
            residual_scale: 0.0,
            seed,
            ..TeacherSpec::default()
        })
        .unwrap();
        let s = t.space().clone();
        let grid = s.enumerate().unwrap();
        let values: Vec<f64> = grid.iter().map(|x| t.value(x)).collect();
        let log = RunLog::from_pairs(&s, &grid, &values).unwrap();
        let est = estimate_effects_cm(
            &s,
            &log,
            &ReferenceDistribution::uniform(&s),
            &ShrinkageSpec::vanishing(&s),
        )
        .unwrap();
        assert!(est.max_abs_diff(&t.truth) < 1e-10);
    }
}

#[test]
fn error_accounting_holds_at_every_config() {
    let t = gen_teacher(&TeacherSpec::default()).unwrap();
    let s = t.space().clone();
    let grid = s.enumerate().unwrap();
    let design: Vec<_> = grid.iter().step_by(3).cloned().collect();
    let values: Vec<f64> = design.iter().map(|x| t.value(x)).collect();
    let log = RunLog::from_pairs(&s, &design, &values).unwrap();
    let est = estimate_effects_cm(
        &s,
        &log,
        &ReferenceDistribution::uniform(&s),
        &ShrinkageSpec::default_for(&s),
    )
    .unwrap();
    for x in &grid {
        let eps = est.predict(x) - t.second_order(x);
        let lhs = est.predict(x) - t.value(x);
        assert!((lhs - (eps - t.residual(x))).abs() < 1e-9);
    }
}

#[test]
fn true_policy_has_zero_gap_without_noise_or_residual() {
    for seed in 0..30 {
        let t = gen_teacher(&quiet(seed)).unwrap();
        for estimator in [Estimator::Cm, Estimator::Sf] {
            let mut spec = TrialSpec::new(DesignPlan::Full, estimator);
            spec.tau = f64::MIN_POSITIVE;
            let r = run_trial(&t, &spec, seed).unwrap();
            assert_eq!(r.optimality_gap, 0.0, "seed {seed} {estimator:?}");
            assert_eq!(r.spearman, 1.0);
            assert!(r.reconstruction_error <= 1e-8);
        }
    }
}

#[test]
fn mains_only_matches_pairwise_on_additive_teacher() {
    for seed in 0..10 {
        let t = gen_teacher(&TeacherSpec {
            pair_scale: 0.0,
            ..quiet(seed)
        })
        .unwrap();
        let mut pairwise = TrialSpec::new(DesignPlan::Full, Estimator::Cm);
        pairwise.tau = f64::MIN_POSITIVE;
        let mut mains = pairwise.clone();
        mains.scoring = Scoring::MainsOnly;
        let a = run_trial(&t, &pairwise, seed).unwrap();
        let b = run_trial(&t, &mains, seed).unwrap();
        assert_eq!(a.optimality_gap, b.optimality_gap);
    }
}

#[test]
fn cm_and_sf_agree_on_noisy_full_grid() {
    let t = gen_teacher(&TeacherSpec::default()).unwrap();
    let cm = run_trial(&t, &TrialSpec::new(DesignPlan::Full, Estimator::Cm), 7).unwrap();
    let sf = run_trial(&t, &TrialSpec::new(DesignPlan::Full, Estimator::Sf), 7).unwrap();
    assert!((cm.reconstruction_error - sf.reconstruction_error).abs() < 1e-6);
    assert_eq!(cm.chosen, sf.chosen);
    assert!(sf.sigma_min.unwrap() > 0.0);
}

#[test]
fn multistart_policy_is_one_swap_optimal() {
    use twofactor::objective::{CostModel, ObjectiveSpec, Problem};
    use twofactor::optimizer::verify_1swap;
    let t = gen_teacher(&quiet(18)).unwrap();
    let mut spec = TrialSpec::new(DesignPlan::Full, Estimator::Cm);
    spec.policy = Policy::Multistart;
    spec.tau = f64::MIN_POSITIVE;
    let r = run_trial(&t, &spec, 18).unwrap();
    let s = t.space().clone();
    let support = twofactor::design::SupportCounts::from_configs(&s, &s.enumerate().unwrap());
    let objective = ObjectiveSpec::new(&s, 0.0, 0.0, 1.0).unwrap();
    let cost = CostModel::zero(&s);
    let problem = Problem::new(&t.truth, &support, &objective, &cost);
    assert!(verify_1swap(&problem, &r.chosen).unwrap().optimal);
    assert!(r.optimality_gap >= 0.0);
}

#[test]
fn mc_sf_path_runs() {
    let t = gen_teacher(&TeacherSpec::default()).unwrap();
    let mut spec = TrialSpec::new(DesignPlan::Balanced { n: 24 }, Estimator::Sf);
    spec.shapley_samples = Some(64);
    let r = run_trial(&t, &spec, 2).unwrap();
    assert!((-1.0..=1.0).contains(&r.spearman));
}

#[test]
fn suite_csv_declares_config_hash() {
    let config = SuiteConfig {
        trials: 3,
        ..SuiteConfig::default()
    };
    let r = ablation_suite(Axis::ShapBackground, &config).unwrap();
    assert_eq!(r.summary.len(), 9);
    assert!(r.summary.iter().all(|row| row.config_hash == r.config_hash));
    let mut buf = Vec::new();
    write_suite_csv(&r.summary, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(&r.config_hash)));
    assert!(text.contains("shap-background,empirical,SF,spearman,"));
}

#[test]
fn small_teacher_without_residual_room() {
    let t = gen_teacher(&TeacherSpec {
        levels: vec![2, 3],
        ..TeacherSpec::default()
    })
    .unwrap();
    assert!(t.residual_factors().is_none());
    let s = FactorSpace::with_level_counts(&[2, 3]).unwrap();
    assert_eq!(t.space(), &s);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trial_metrics_stay_in_range(seed in 0u64..10_000, n in 12usize..60, skew in prop::bool::ANY) {
        let t = gen_teacher(&TeacherSpec { seed, ..TeacherSpec::default() }).unwrap();
        let design = if skew {
            DesignPlan::Skewed { n, bias: 4.0 }
        } else {
            DesignPlan::Balanced { n }
        };
        for estimator in [Estimator::Cm, Estimator::Sf] {
            let r = run_trial(&t, &TrialSpec::new(design, estimator), seed).unwrap();
            prop_assert!(r.optimality_gap >= 0.0);
            prop_assert!((-1.0..=1.0).contains(&r.spearman));
            prop_assert!(r.reconstruction_error.is_finite());
        }
    }
}
