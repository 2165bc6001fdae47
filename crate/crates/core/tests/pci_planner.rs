use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use twofactor::design::{Config, FactorSpace, ReferenceDistribution, RunLog};
use twofactor::effects::{
    conditional_mean, estimate_effects_cm, pair_conditional_mean, weighted_baseline, EffectTable,
    Provenance, ShrinkageSpec,
};
use twofactor::pci::*;
use twofactor::planner::*;
use twofactor::rng;

fn random_table(counts: &[usize], seed: u64) -> EffectTable {
    let s = FactorSpace::with_level_counts(counts).unwrap();
    let mut r = rng::stream(seed, &[]);
    let mut t = EffectTable::zeros(&s, Provenance::Truth);
    for g in t.mains.iter_mut().flatten() {
        *g = r.random_range(-1.0..1.0);
    }
    for p in &mut t.pairs {
        for v in p.as_mut_slice() {
            *v = r.random_range(-1.0..1.0);
        }
    }
    t.center(&ReferenceDistribution::uniform(&s));
    t
}

fn row_col_means(m: &twofactor::cells::CellMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for l in 0..m.rows() {
        worst =
            worst.max(((0..m.cols()).map(|c| m.get(l, c)).sum::<f64>() / m.cols() as f64).abs());
    }
    for c in 0..m.cols() {
        worst =
            worst.max(((0..m.rows()).map(|l| m.get(l, c)).sum::<f64>() / m.rows() as f64).abs());
    }
    worst
}

#[test]
fn energy_and_range_over_random_tables() {
    for seed in 0..100 {
        let t = random_table(&[2, 3, 4], seed);
        for (j, k) in t.space().pairs() {
            let p = pci_matrix(&t, j, k, Normalization::Uniform);
            let cells = (t.space().levels(j) * t.space().levels(k)) as f64;
            let energy: f64 = p.entries.as_slice().iter().map(|v| v * v).sum();
            assert!((energy - cells).abs() < 1e-9);
            let max = p
                .entries
                .as_slice()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((1.0 - 1e-12..=cells.sqrt() + 1e-12).contains(&max));
            assert!(row_col_means(&p.entries) < 1e-9);
        }
    }
}

#[test]
fn weighted_energy_is_one_under_the_weights() {
    let s = FactorSpace::with_level_counts(&[2, 3]).unwrap();
    let r = ReferenceDistribution::product(&s, vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3]]).unwrap();
    let mut t = random_table(&[2, 3], 4);
    t.center(&r);
    let p = pci_matrix(&t, 0, 1, Normalization::Weighted(&r));
    let joint = r.pair_joint(0, 1);
    let energy: f64 = p
        .entries
        .iter()
        .map(|(l, m, v)| joint.get(l, m) * v * v)
        .sum();
    assert!((energy - 1.0).abs() < 1e-12);
}

#[test]
fn symmetric_in_pair_order() {
    let t = random_table(&[2, 3, 2], 9);
    for (j, k) in t.space().pairs() {
        let a = pci_matrix(&t, j, k, Normalization::Uniform);
        let b = pci_matrix(&t, k, j, Normalization::Uniform);
        assert!((a.scale - b.scale).abs() < 1e-14);
        for (l, m, v) in a.entries.iter() {
            assert!((v - b.entries.get(m, l)).abs() < 1e-12);
        }
    }
}

#[test]
fn separable_interaction_is_an_outer_product() {
    let s = FactorSpace::with_level_counts(&[3, 4]).unwrap();
    let a = [1.0, -0.25, -0.75];
    let b = [0.5, -1.5, 0.25, 0.75];
    let mut t = EffectTable::zeros(&s, Provenance::Truth);
    for l in 0..3 {
        for m in 0..4 {
            t.pairs[0].set(l, m, a[l] * b[m]);
        }
    }
    let std = |v: &[f64]| {
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        v.iter().map(|x| x / rms).collect::<Vec<_>>()
    };
    let (sa, sb) = (std(&a), std(&b));
    let p = pci_matrix(&t, 0, 1, Normalization::Uniform);
    for (l, m, v) in p.entries.iter() {
        assert!((v - sa[l] * sb[m]).abs() < 1e-10);
    }
}

#[test]
fn ranking_is_affine_invariant() {
    for seed in 0..20 {
        let t = random_table(&[2, 3, 2, 3], seed);
        let key = |t: &EffectTable| {
            pci_rank_pairs(t)
                .into_iter()
                .map(|(j, k, _)| (j, k))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&t), key(&t.affine(3.5, -2.0)));
        assert_eq!(key(&t), key(&t.affine(0.01, 100.0)));
    }
}

#[test]
fn single_pair_ranking() {
    let t = random_table(&[2, 2], 1);
    assert_eq!(pci_rank_pairs(&t).len(), 1);
    assert_eq!((pci_rank_pairs(&t)[0].0, pci_rank_pairs(&t)[0].1), (0, 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_and_shrinkage_invariance(seed in 0u64..100_000, a in 0.05f64..20.0, b in -50.0f64..50.0, eta in 0.01f64..1.0) {
        let t = random_table(&[3, 2, 4], seed);
        let shifted = t.affine(a, b);
        let flipped = t.affine(-a, b);
        let mut shrunk = t.clone();
        for p in &mut shrunk.pairs {
            p.scale(eta);
        }
        for (j, k) in t.space().pairs() {
            let base = pci_matrix(&t, j, k, Normalization::Uniform);
            let s = pci_matrix(&shifted, j, k, Normalization::Uniform);
            let f = pci_matrix(&flipped, j, k, Normalization::Uniform);
            let h = pci_matrix(&shrunk, j, k, Normalization::Uniform);
            for (((x, y), z), w) in base.entries.as_slice().iter().zip(s.entries.as_slice()).zip(f.entries.as_slice()).zip(h.entries.as_slice()) {
                prop_assert!((x - y).abs() < 1e-10);
                prop_assert!((x + z).abs() < 1e-10);
                prop_assert!((x - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cellwise_shrinkage_bound(seed in 0u64..100_000, lo in 0.1f64..1.0, spread in 0.0f64..0.9) {
        let t = random_table(&[3, 3], seed);
        let hi = (lo + spread).min(1.0);
        let mut r = rng::stream(seed, &[1]);
        let mut shrunk = t.clone();
        for v in shrunk.pairs[0].as_mut_slice() {
            *v *= r.random_range(lo..=hi);
        }
        let base = pci_matrix(&t, 0, 1, Normalization::Uniform);
        let after = pci_matrix(&shrunk, 0, 1, Normalization::Uniform);
        let factor = (hi / lo - 1.0).max(1.0 - lo / hi);
        for (x, y) in base.entries.as_slice().iter().zip(after.entries.as_slice()) {
            prop_assert!((x - y).abs() <= factor * x.abs() + 1e-12);
        }
    }

    #[test]
    fn within_pair_ranks_match_raw_interactions(seed in 0u64..100_000) {
        let t = random_table(&[3, 4], seed);
        let p = pci_matrix(&t, 0, 1, Normalization::Uniform);
        let g = t.pair_matrix(0, 1);
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(a.cmp(&b)));
            idx
        };
        prop_assert_eq!(order(p.entries.as_slice()), order(g.as_slice()));
    }

    #[test]
    fn planners_are_monotone(b in 0.1f64..10.0, eps in 0.01f64..0.5, delta in 0.001f64..0.5, cells in 1usize..20) {
        let n = uniform_cells_n(b, eps, delta, cells, 2).unwrap();
        prop_assert!(uniform_cells_n(b, eps * 0.9, delta, cells, 2).unwrap() >= n);
        prop_assert!(uniform_cells_n(b, eps, delta * 0.9, cells, 2).unwrap() >= n);
        prop_assert!(uniform_cells_n(b * 1.1, eps, delta, cells, 2).unwrap() >= n);
        prop_assert!(uniform_cells_n(b, eps, delta, cells + 1, 2).unwrap() >= n);
        prop_assert!(hoeffding_cell_n(b, eps, delta).unwrap() <= n);
        prop_assert!(bernstein_halfwidth(0.5, b, 100, delta).unwrap() >= bernstein_halfwidth(0.5, b, 101, delta).unwrap());
    }
}

#[test]
fn hoeffding_coverage_over_replications() {
    // responses uniform on [−B, B] around a zero mean; n runs per cell
    let (bound, n, delta, reps) = (1.0, 30, 0.1, 600);
    let hw = hoeffding_halfwidth(bound, n, delta);
    let dist = Uniform::new_inclusive(-bound, bound).unwrap();
    let mut exceed = 0;
    for rep in 0..reps {
        let mut r = rng::stream(rep, &[]);
        let mean: f64 = (0..n).map(|_| dist.sample(&mut r)).sum::<f64>() / n as f64;
        if mean.abs() > hw {
            exceed += 1;
        }
    }
    assert!((exceed as f64 / reps as f64) <= delta + 0.02);
}

#[test]
fn effect_errors_respect_the_budget() {
    let s = FactorSpace::with_level_counts(&[2, 3, 3]).unwrap();
    let uniform = ReferenceDistribution::uniform(&s);
    for seed in 0..50 {
        let truth = random_table(&[2, 3, 3], seed);
        let grid = s.enumerate().unwrap();
        let mut r = rng::stream(seed, &[2]);
        let mut configs = Vec::new();
        let mut noisy = Vec::new();
        let mut clean = Vec::new();
        for x in &grid {
            for _ in 0..3 {
                configs.push(x.clone());
                clean.push(truth.predict(x));
                noisy.push(truth.predict(x) + r.random_range(-0.2..0.2));
            }
        }
        let est_log = RunLog::from_pairs(&s, &configs, &noisy).unwrap();
        let true_log = RunLog::from_pairs(&s, &configs, &clean).unwrap();
        let eps0 =
            (weighted_baseline(&est_log).unwrap() - weighted_baseline(&true_log).unwrap()).abs();
        let mut eps1 = 0.0f64;
        for j in 0..3 {
            for l in 0..s.levels(j) {
                let e = conditional_mean(&est_log, j, l).unwrap()
                    - conditional_mean(&true_log, j, l).unwrap();
                eps1 = eps1.max(e.abs());
            }
        }
        for (j, k) in s.pairs() {
            for l in 0..s.levels(j) {
                for m in 0..s.levels(k) {
                    let e = pair_conditional_mean(&est_log, j, l, k, m).unwrap()
                        - pair_conditional_mean(&true_log, j, l, k, m).unwrap();
                    eps1 = eps1.max(e.abs());
                }
            }
        }
        let (main_budget, pair_budget) = effect_error_budget(eps0, eps1).unwrap();
        let est =
            estimate_effects_cm(&s, &est_log, &uniform, &ShrinkageSpec::vanishing(&s)).unwrap();
        for j in 0..3 {
            for l in 0..s.levels(j) {
                assert!((est.main(j, l) - truth.main(j, l)).abs() <= main_budget + 1e-12);
            }
        }
        for (j, k) in s.pairs() {
            for l in 0..s.levels(j) {
                for m in 0..s.levels(k) {
                    assert!(
                        (est.pair(j, l, k, m) - truth.pair(j, l, k, m)).abs()
                            <= pair_budget + 1e-12
                    );
                }
            }
        }
    }
}

#[test]
fn inferred_bound_is_inflated() {
    let s = FactorSpace::with_level_counts(&[2]).unwrap();
    let log = RunLog::from_pairs(&s, &[Config(vec![0]), Config(vec![1])], &[-2.0, 1.0]).unwrap();
    assert!((infer_bound(&log).unwrap() - 2.2).abs() < 1e-15);
}
