use super::mc::ShapleyEstimate;
use super::oracle::{CoalitionCache, ValueOracle};
use crate::design::Config;
use crate::effects::EffectTable;
use crate::error::{Error, Result};

/// Largest factor count for which [`exact_shapley`] enumerates all coalitions.
pub const EXACT_SHAPLEY_MAX_DIM: usize = 20;

/// Closed-form attribution of a second-order table:
/// φ_j(x) = g_j(x_j) + ½ Σ_{k≠j} g_jk(x_j, x_k).
pub fn exact_shapley_second_order(table: &EffectTable, x: &Config) -> Vec<f64> {
    let d = table.space().dim();
    let mut phi: Vec<f64> = (0..d).map(|j| table.main(j, x[j])).collect();
    for (j, k) in table.space().pairs() {
        let half = 0.5 * table.pair(j, x[j], k, x[k]);
        phi[j] += half;
        phi[k] += half;
    }
    phi
}

/// Shapley values by enumerating every coalition, weighting each marginal
/// contribution by |S|!(d−|S|−1)!/d!.
pub fn exact_shapley(oracle: &ValueOracle, x: &Config) -> Result<Vec<f64>> {
    let d = oracle.space().dim();
    if d > EXACT_SHAPLEY_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "{d} factors is too many for coalition enumeration"
        )));
    }
    oracle.space().check(x)?;
    // weight[s] = s!(d−s−1)!/d!, built by recurrence to avoid factorial overflow
    let mut weight = vec![0.0; d];
    weight[0] = 1.0 / d as f64;
    for s in 1..d {
        weight[s] = weight[s - 1] * s as f64 / (d - s) as f64;
    }
    let mut cache = CoalitionCache::new(oracle, x);
    let mut phi = vec![0.0; d];
    for mask in 0u64..(1 << d) {
        let size = mask.count_ones() as usize;
        if size == d {
            continue;
        }
        let base = cache.get(mask)?;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask & (1 << j) == 0 {
                *p += weight[size] * (cache.get(mask | (1 << j))? - base);
            }
        }
    }
    Ok(phi)
}

/// [`exact_shapley`] packaged as a zero-variance [`ShapleyEstimate`] so exact and
/// sampled attributions feed the same fit.
pub fn exact_shapley_estimate(oracle: &ValueOracle, x: &Config) -> Result<ShapleyEstimate> {
    let d = oracle.space().dim();
    let phi = exact_shapley(oracle, x)?;
    Ok(ShapleyEstimate {
        point: x.clone(),
        variance: vec![0.0; d],
        samples: 0,
        value: oracle.eval(x),
        baseline: oracle.coalition_value(x, 0)?.value,
        max_abs_contribution: 0.0,
        max_efficiency_residual: None,
        phi,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::design::{FactorSpace, ReferenceDistribution};
    use crate::effects::Provenance;

    fn xor_table() -> EffectTable {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let mut t = EffectTable::zeros(&s, Provenance::Truth);
        t.mu = 0.5;
        for l in 0..2 {
            for m in 0..2 {
                t.pairs[0].set(l, m, if l == m { -0.5 } else { 0.5 });
            }
        }
        t
    }

    #[test]
    fn xor_attribution() {
        let phi = exact_shapley_second_order(&xor_table(), &Config(vec![0, 0]));
        assert_eq!(phi, vec![-0.25, -0.25]);
    }

    #[test]
    fn additive_attribution_is_the_main_effect() {
        let s = FactorSpace::with_level_counts(&[3, 2]).unwrap();
        let mut t = EffectTable::zeros(&s, Provenance::Truth);
        t.mains = vec![vec![-1.0, 0.25, 0.75], vec![0.5, -0.5]];
        assert_eq!(
            exact_shapley_second_order(&t, &Config(vec![2, 1])),
            vec![0.75, -0.5]
        );
    }

    #[test]
    fn enumeration_matches_closed_form_on_xor() {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let o = ValueOracle::from_fn(
            &s,
            Arc::new(|x: &Config| (x[0] ^ x[1]) as f64),
            ReferenceDistribution::uniform(&s),
            1.0,
        )
        .unwrap();
        for x in s.enumerate().unwrap() {
            let a = exact_shapley(&o, &x).unwrap();
            let b = exact_shapley_second_order(&xor_table(), &x);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn three_way_term_splits_evenly() {
        let s = FactorSpace::with_level_counts(&[2, 2, 2]).unwrap();
        // centered three-way sign product: each factor receives a third
        let f =
            |x: &Config| -> f64 { x.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).product() };
        let o =
            ValueOracle::from_fn(&s, Arc::new(f), ReferenceDistribution::uniform(&s), 1.0).unwrap();
        let x = Config(vec![1, 1, 1]);
        for p in exact_shapley(&o, &x).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
