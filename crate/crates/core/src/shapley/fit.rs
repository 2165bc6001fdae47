use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mc::ShapleyEstimate;
use crate::design::{Config, FactorSpace, ReferenceDistribution, SupportCounts};
use crate::effects::{apply_shrinkage, EffectTable, Provenance, ShrinkageSpec};
use crate::error::{Error, Result};

/// Singular values below this declare the design matrix rank-deficient.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// A contiguous block of free parameters: one factor's main-effect contrasts
/// or one pair's interaction contrasts.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Linear map from free effect parameters θ to stacked attributions Φ.
///
/// Row `i·d + j` is φ_j at the i-th evaluation point. Each main table is
/// g_j = Q_j a_j and each pair table is g_jk = Q_j B_jk Q_kᵀ, where the columns
/// of Q_j form an orthonormal basis of {v : Σ_ℓ π_j(ℓ) v_ℓ = 0}. Centering thus
/// holds exactly and ‖g − g′‖ = ‖θ − θ′‖.
#[derive(Debug, Clone)]
pub struct EffectDesignMatrix {
    pub points: Vec<Config>,
    pub matrix: DMatrix<f64>,
    pub blocks: Vec<ParamBlock>,
    pub sigma_min: f64,
    bases: Vec<DMatrix<f64>>,
    space: FactorSpace,
}

/// Fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub sigma_min: f64,
    pub residual_norm: f64,
    /// Rows of the design matrix (evaluation points × factors).
    #[serde(rename = "N")]
    pub rows: usize,
    /// Free parameters.
    #[serde(rename = "p")]
    pub params: usize,
    pub points: usize,
}

/// SF effect table plus its fit diagnostics.
#[derive(Debug, Clone)]
pub struct SfFit {
    pub table: EffectTable,
    pub diagnostics: FitDiagnostics,
}

/// Pre-reparametrization row for (x, j): unit weight on g_j(x_j) and ½ on each
/// g_jk(x_j, x_k), indexed into the concatenation of all full main tables
/// followed by all full pair tables (row-major).
pub fn indicator_row(space: &FactorSpace, x: &Config, j: usize) -> Vec<(usize, f64)> {
    let mut offsets = Vec::with_capacity(space.dim());
    let mut offset = 0;
    for k in 0..space.dim() {
        offsets.push(offset);
        offset += space.levels(k);
    }
    let mut row = vec![(offsets[j] + x[j], 1.0)];
    for (a, b) in space.pairs() {
        let width = space.levels(a) * space.levels(b);
        if a == j || b == j {
            row.push((offset + x[a] * space.levels(b) + x[b], 0.5));
        }
        offset += width;
    }
    row
}

/// Orthonormal basis (L × (L−1)) of the π-centered subspace.
fn contrast_basis(pi: &[f64]) -> DMatrix<f64> {
    let l = pi.len();
    let pivot = (0..l)
        .max_by(|&a, &b| pi[a].total_cmp(&pi[b]))
        .expect("nonempty");
    let mut m = DMatrix::zeros(l, l);
    for (i, &p) in pi.iter().enumerate() {
        m[(i, 0)] = p;
    }
    let mut col = 1;
    for i in (0..l).filter(|&i| i != pivot) {
        m[(i, col)] = 1.0;
        col += 1;
    }
    let q = m.qr().q();
    q.columns(1, l - 1).into_owned()
}

impl EffectDesignMatrix {
    /// Assembles the matrix without the identifiability check.
    pub fn assemble(
        eval_set: &[Config],
        space: &FactorSpace,
        reference: &ReferenceDistribution,
    ) -> Result<Self> {
        if eval_set.is_empty() {
            return Err(Error::InvalidParameter("evaluation set is empty".into()));
        }
        for x in eval_set {
            space.check(x)?;
        }
        let d = space.dim();
        let bases: Vec<DMatrix<f64>> = (0..d)
            .map(|j| contrast_basis(reference.marginal(j)))
            .collect();
        let mut blocks = Vec::new();
        let mut offset = 0;
        for j in 0..d {
            let len = space.levels(j) - 1;
            blocks.push(ParamBlock {
                name: space.name(j).to_string(),
                offset,
                len,
            });
            offset += len;
        }
        for (j, k) in space.pairs() {
            let len = (space.levels(j) - 1) * (space.levels(k) - 1);
            blocks.push(ParamBlock {
                name: format!("{}|{}", space.name(j), space.name(k)),
                offset,
                len,
            });
            offset += len;
        }
        let params = offset;
        let mut matrix = DMatrix::zeros(eval_set.len() * d, params);
        for (i, x) in eval_set.iter().enumerate() {
            for j in 0..d {
                let row = i * d + j;
                let b = &blocks[j];
                for r in 0..b.len {
                    matrix[(row, b.offset + r)] = bases[j][(x[j], r)];
                }
            }
            for (p, (j, k)) in space.pairs().into_iter().enumerate() {
                let b = &blocks[d + p];
                let (qj, qk) = (&bases[j], &bases[k]);
                let cols = space.levels(k) - 1;
                for r in 0..space.levels(j) - 1 {
                    for s in 0..cols {
                        let c = 0.5 * qj[(x[j], r)] * qk[(x[k], s)];
                        matrix[(i * d + j, b.offset + r * cols + s)] += c;
                        matrix[(i * d + k, b.offset + r * cols + s)] += c;
                    }
                }
            }
        }
        let sigma_min = smallest_singular_value(&matrix);
        Ok(Self {
            points: eval_set.to_vec(),
            matrix,
            blocks,
            sigma_min,
            bases,
            space: space.clone(),
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn params(&self) -> usize {
        self.matrix.ncols()
    }

    /// Names of parameter blocks touched by near-null right singular vectors.
    pub fn deficient_blocks(&self) -> Vec<String> {
        let square = padded(&self.matrix);
        let svd = square.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let mut hit = vec![false; self.blocks.len()];
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s >= RANK_TOLERANCE {
                continue;
            }
            let v = v_t.row(i);
            for (b, block) in self.blocks.iter().enumerate() {
                let norm: f64 = (0..block.len)
                    .map(|r| v[block.offset + r].powi(2))
                    .sum::<f64>()
                    .sqrt();
                if norm > 1e-6 {
                    hit[b] = true;
                }
            }
        }
        self.blocks
            .iter()
            .zip(hit)
            .filter(|(_, h)| *h)
            .map(|(b, _)| b.name.clone())
            .collect()
    }

    /// Maps a parameter vector back to full centered tables.
    pub fn to_table(&self, theta: &DVector<f64>, mu: f64, provenance: Provenance) -> EffectTable {
        let d = self.space.dim();
        let mut t = EffectTable::zeros(&self.space, provenance);
        t.mu = mu;
        for j in 0..d {
            let b = &self.blocks[j];
            let a = theta.rows(b.offset, b.len);
            let g = &self.bases[j] * a;
            t.mains[j] = g.iter().copied().collect();
        }
        for (p, (j, k)) in self.space.pairs().into_iter().enumerate() {
            let b = &self.blocks[d + p];
            let (rj, rk) = (self.space.levels(j) - 1, self.space.levels(k) - 1);
            let coef = DMatrix::from_row_slice(rj, rk, theta.rows(b.offset, b.len).as_slice());
            let g = &self.bases[j] * coef * self.bases[k].transpose();
            for l in 0..g.nrows() {
                for m in 0..g.ncols() {
                    t.pairs[p].set(l, m, g[(l, m)]);
                }
            }
        }
        t
    }

    /// Parameters of a table centered under the product of this matrix's marginals.
    pub fn to_params(&self, table: &EffectTable) -> DVector<f64> {
        let d = self.space.dim();
        let mut theta = DVector::zeros(self.params());
        for j in 0..d {
            let b = &self.blocks[j];
            let g = DVector::from_column_slice(&table.mains[j]);
            theta
                .rows_mut(b.offset, b.len)
                .copy_from(&(self.bases[j].transpose() * g));
        }
        for (p, (j, k)) in self.space.pairs().into_iter().enumerate() {
            let b = &self.blocks[d + p];
            let pm = &table.pairs[p];
            let g = DMatrix::from_row_slice(pm.rows(), pm.cols(), pm.as_slice());
            let coef = self.bases[j].transpose() * g * &self.bases[k];
            for r in 0..coef.nrows() {
                for s in 0..coef.ncols() {
                    theta[b.offset + r * coef.ncols() + s] = coef[(r, s)];
                }
            }
        }
        theta
    }
}

fn padded(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() >= m.ncols() {
        return m.clone();
    }
    let mut square = DMatrix::zeros(m.ncols(), m.ncols());
    square.rows_mut(0, m.nrows()).copy_from(m);
    square
}

/// Minimum-norm least-squares solution. The bidiagonal SVD loses accuracy in
/// its singular vectors when singular values cluster, as they do for balanced
/// grids, so the solve runs on the eigendecomposition of AᵀA restricted to the
/// numerical rank, followed by one step of residual refinement.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let rank = a
        .singular_values()
        .iter()
        .filter(|&&s| s >= RANK_TOLERANCE)
        .count();
    let eig = (a.transpose() * a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &k| eig.eigenvalues[k].total_cmp(&eig.eigenvalues[i]));
    let pinv_normal = |g: &DVector<f64>| {
        let mut out = DVector::zeros(g.len());
        for &i in &order[..rank] {
            let v = eig.eigenvectors.column(i);
            out += v * (v.dot(g) / eig.eigenvalues[i]);
        }
        out
    };
    let mut theta = pinv_normal(&(a.transpose() * b));
    let residual = b - a * &theta;
    theta += pinv_normal(&(a.transpose() * residual));
    theta
}

fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    m.singular_values().min()
}

/// Design matrix for `eval_set`; rank deficiency is an error naming the
/// unidentified parameter blocks.
pub fn build_design_matrix(
    eval_set: &[Config],
    space: &FactorSpace,
    reference: &ReferenceDistribution,
) -> Result<EffectDesignMatrix> {
    let a = EffectDesignMatrix::assemble(eval_set, space, reference)?;
    if a.sigma_min < RANK_TOLERANCE {
        return Err(Error::RankDeficient {
            sigma_min: a.sigma_min,
            blocks: a.deficient_blocks(),
        });
    }
    Ok(a)
}

/// ‖θ̂ − θ‖₂ ≤ ‖Φ̂ − Φ‖₂ / σ_min.
pub fn stability_bound(matrix: &EffectDesignMatrix, observation_error_norm: f64) -> Result<f64> {
    stability_bound_from_sigma(matrix.sigma_min, observation_error_norm)
}

pub fn stability_bound_from_sigma(sigma_min: f64, observation_error_norm: f64) -> Result<f64> {
    if !(sigma_min > 0.0) {
        return Err(Error::InvalidParameter("sigma_min must be positive".into()));
    }
    Ok(observation_error_norm / sigma_min)
}

/// Least-squares SF fit. Shrinkage uses the evaluation points as support.
pub fn fit_effects_sf(
    estimates: &[ShapleyEstimate],
    space: &FactorSpace,
    reference: &ReferenceDistribution,
    shrinkage: &ShrinkageSpec,
) -> Result<SfFit> {
    let points: Vec<Config> = estimates.iter().map(|e| e.point.clone()).collect();
    let support = SupportCounts::from_configs(space, &points);
    fit_effects_sf_with_support(estimates, space, reference, shrinkage, support)
}

/// As [`fit_effects_sf`] with explicit cell support counts (for instance from the run log).
pub fn fit_effects_sf_with_support(
    estimates: &[ShapleyEstimate],
    space: &FactorSpace,
    reference: &ReferenceDistribution,
    shrinkage: &ShrinkageSpec,
    support: SupportCounts,
) -> Result<SfFit> {
    fit(estimates, space, reference, shrinkage, support, true)
}

/// As [`fit_effects_sf_with_support`], but a rank-deficient system is solved in
/// the minimum-norm sense: parameter directions the evaluation set cannot see
/// are set to zero. A σ_min below [`RANK_TOLERANCE`] in the diagnostics marks
/// such fits.
pub fn fit_effects_sf_min_norm(
    estimates: &[ShapleyEstimate],
    space: &FactorSpace,
    reference: &ReferenceDistribution,
    shrinkage: &ShrinkageSpec,
    support: SupportCounts,
) -> Result<SfFit> {
    fit(estimates, space, reference, shrinkage, support, false)
}

fn fit(
    estimates: &[ShapleyEstimate],
    space: &FactorSpace,
    reference: &ReferenceDistribution,
    shrinkage: &ShrinkageSpec,
    support: SupportCounts,
    strict: bool,
) -> Result<SfFit> {
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no Shapley estimates".into()));
    }
    let d = space.dim();
    for e in estimates {
        if e.phi.len() != d || e.point.len() != d {
            return Err(Error::SpaceMismatch);
        }
    }
    if support.mains.len() != d {
        return Err(Error::SpaceMismatch);
    }
    let points: Vec<Config> = estimates.iter().map(|e| e.point.clone()).collect();
    let a = if strict {
        build_design_matrix(&points, space, reference)?
    } else {
        EffectDesignMatrix::assemble(&points, space, reference)?
    };
    let phi = DVector::from_iterator(
        a.rows(),
        estimates.iter().flat_map(|e| e.phi.iter().copied()),
    );
    let theta = least_squares(&a.matrix, &phi);
    let residual_norm = (&a.matrix * &theta - &phi).norm();
    let mu = estimates.iter().map(|e| e.baseline).sum::<f64>() / estimates.len() as f64;
    let mut table = a.to_table(&theta, mu, Provenance::Sf);
    for j in 0..d {
        for l in 0..space.levels(j) {
            table.unsupported_mains[j][l] = support.main(j, l) == 0;
        }
    }
    for (p, (j, k)) in space.pairs().into_iter().enumerate() {
        for l in 0..space.levels(j) {
            for m in 0..space.levels(k) {
                table.unsupported_pairs[p].set(l, m, *support.pairs[p].get(l, m) == 0);
            }
        }
    }
    table.center(reference);
    apply_shrinkage(&mut table, &support, shrinkage);
    table.center(reference);
    table.support = Some(support);
    let diagnostics = FitDiagnostics {
        sigma_min: a.sigma_min,
        residual_norm,
        rows: a.rows(),
        params: a.params(),
        points: points.len(),
    };
    Ok(SfFit { table, diagnostics })
}

/// Long-form dump: config columns, then factor, phi_hat, variance, M.
pub fn write_shapley_csv<W: Write>(
    space: &FactorSpace,
    estimates: &[ShapleyEstimate],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..space.dim())
        .map(|j| space.name(j).to_string())
        .collect();
    header.extend(["factor", "phi_hat", "variance", "M"].map(String::from));
    w.write_record(&header)?;
    for e in estimates {
        for j in 0..space.dim() {
            let mut row: Vec<String> = space
                .describe(&e.point)
                .into_iter()
                .map(String::from)
                .collect();
            row.push(space.name(j).to_string());
            row.push(format!("{:?}", e.phi[j]));
            row.push(format!("{:?}", e.variance[j]));
            row.push(e.samples.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

impl FitDiagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_rows_have_d_entries() {
        let s = FactorSpace::with_level_counts(&[2, 3, 2, 4]).unwrap();
        let x = Config(vec![1, 2, 0, 3]);
        for j in 0..4 {
            let row = indicator_row(&s, &x, j);
            assert_eq!(row.len(), 4);
            assert_eq!(row.iter().filter(|(_, c)| *c == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|(_, c)| *c == 0.5).count(), 3);
        }
    }

    #[test]
    fn contrast_basis_is_orthonormal_and_centered() {
        for pi in [vec![0.5, 0.5], vec![0.2, 0.3, 0.5], vec![0.0, 0.25, 0.75]] {
            let q = contrast_basis(&pi);
            let gram = q.transpose() * &q;
            assert!(
                (gram - DMatrix::identity(pi.len() - 1, pi.len() - 1))
                    .abs()
                    .max()
                    < 1e-12
            );
            let p = DVector::from_column_slice(&pi);
            assert!((q.transpose() * p).abs().max() < 1e-12);
        }
    }

    #[test]
    fn single_point_is_rank_deficient() {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let err = build_design_matrix(
            &[Config(vec![0, 0])],
            &s,
            &ReferenceDistribution::uniform(&s),
        )
        .unwrap_err();
        match err {
            Error::RankDeficient { blocks, .. } => assert!(!blocks.is_empty()),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn min_norm_fit_tolerates_deficiency() {
        let s = FactorSpace::with_level_counts(&[2, 3]).unwrap();
        let u = ReferenceDistribution::uniform(&s);
        let e = ShapleyEstimate {
            point: Config(vec![0, 0]),
            phi: vec![0.5, -0.25],
            variance: vec![0.0; 2],
            samples: 1,
            value: 0.25,
            baseline: 0.0,
            max_abs_contribution: 0.0,
            max_efficiency_residual: None,
        };
        // full support so shrinkage leaves the solution untouched
        let support = SupportCounts::from_configs(&s, &s.enumerate().unwrap());
        let tau = ShrinkageSpec::vanishing(&s);
        let strict = fit_effects_sf_with_support(&[e.clone()], &s, &u, &tau, support.clone());
        assert!(matches!(strict, Err(Error::RankDeficient { .. })));
        let fit = fit_effects_sf_min_norm(&[e.clone()], &s, &u, &tau, support).unwrap();
        assert!(fit.diagnostics.sigma_min < RANK_TOLERANCE);
        assert!(fit.table.centering_violation(&u) < 1e-12);
        let phi = crate::shapley::exact_shapley_second_order(&fit.table, &e.point);
        assert!((phi[0] - 0.5).abs() < 1e-12 && (phi[1] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn stability_bound_divides() {
        assert_eq!(stability_bound_from_sigma(0.5, 0.1).unwrap(), 0.2);
        assert_eq!(stability_bound_from_sigma(1.0, 0.3).unwrap(), 0.3);
        assert!(stability_bound_from_sigma(0.0, 1.0).is_err());
    }

    #[test]
    fn params_round_trip() {
        let s = FactorSpace::with_level_counts(&[2, 3, 2]).unwrap();
        let r = ReferenceDistribution::uniform(&s);
        let a = build_design_matrix(&s.enumerate().unwrap(), &s, &r).unwrap();
        let theta = DVector::from_fn(a.params(), |i, _| (i as f64 * 0.37).sin());
        let t = a.to_table(&theta, 0.0, Provenance::Truth);
        assert!(t.centering_violation(&r) < 1e-12);
        assert!((a.to_params(&t) - theta).norm() < 1e-12);
    }
}
