//! Pairwise complementarity index: interaction tables standardized by their RMS strength.

use std::io::Write;

use serde::Serialize;

use crate::cells::CellMatrix;
use crate::design::{FactorSpace, ReferenceDistribution};
use crate::effects::EffectTable;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PciMode {
    Uniform,
    Weighted,
}

impl PciMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PciMode::Uniform => "uniform",
            PciMode::Weighted => "weighted",
        }
    }
}

/// How s_jk averages the squared interaction cells.
#[derive(Debug, Clone, Copy)]
pub enum Normalization<'a> {
    /// Plain mean over the L_j·L_k cells.
    Uniform,
    /// Cells weighted by the reference pair marginal π_jk.
    Weighted(&'a ReferenceDistribution),
}

impl Normalization<'_> {
    pub fn mode(&self) -> PciMode {
        match self {
            Normalization::Uniform => PciMode::Uniform,
            Normalization::Weighted(_) => PciMode::Weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PciMatrix {
    pub j: usize,
    pub k: usize,
    /// Rows indexed by levels of j, columns by levels of k.
    pub entries: CellMatrix<f64>,
    pub scale: f64,
    pub mode: PciMode,
}

/// PCI_jk = g_jk / s_jk; an interaction with s_jk = 0 maps to all zeros.
pub fn pci_matrix(table: &EffectTable, j: usize, k: usize, norm: Normalization) -> PciMatrix {
    let g = table.pair_matrix(j, k);
    let scale = match norm {
        Normalization::Uniform => {
            (g.as_slice().iter().map(|v| v * v).sum::<f64>() / g.as_slice().len() as f64).sqrt()
        }
        Normalization::Weighted(reference) => {
            let (a, b) = (j.min(k), j.max(k));
            let joint = reference.pair_joint(a, b);
            let joint = if j < k { joint } else { joint.transposed() };
            g.iter()
                .map(|(l, m, v)| joint.get(l, m) * v * v)
                .sum::<f64>()
                .sqrt()
        }
    };
    let entries = if scale > 0.0 {
        g.map(|v| v / scale)
    } else {
        g.map(|_| 0.0)
    };
    PciMatrix {
        j,
        k,
        entries,
        scale,
        mode: norm.mode(),
    }
}

/// Pairs ordered by uniform RMS strength s_jk, strongest first; ties by pair name.
pub fn pci_rank_pairs(table: &EffectTable) -> Vec<(usize, usize, f64)> {
    let space = table.space();
    let mut ranked: Vec<(usize, usize, f64)> = space
        .pairs()
        .into_iter()
        .map(|(j, k)| (j, k, pci_matrix(table, j, k, Normalization::Uniform).scale))
        .collect();
    let name = |j: usize, k: usize| format!("{}|{}", space.name(j), space.name(k));
    ranked.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| name(a.0, a.1).cmp(&name(b.0, b.1)))
    });
    ranked
}

/// Every pair's PCI matrix in `FactorSpace::pairs` order.
pub fn pci_all(table: &EffectTable, norm: Normalization) -> Vec<PciMatrix> {
    table
        .space()
        .pairs()
        .into_iter()
        .map(|(j, k)| pci_matrix(table, j, k, norm))
        .collect()
}

/// Long-form heatmap data: factor_j, factor_k, level_j, level_k, pci, s_jk, mode.
pub fn write_pci_csv<W: Write>(
    space: &FactorSpace,
    matrices: &[PciMatrix],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "factor_j", "factor_k", "level_j", "level_k", "pci", "s_jk", "mode",
    ])?;
    for p in matrices {
        for (l, m, v) in p.entries.iter() {
            w.write_record([
                space.name(p.j),
                space.name(p.k),
                space.label(p.j, l),
                space.label(p.k, m),
                &format!("{v:?}"),
                &format!("{:?}", p.scale),
                p.mode.as_str(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::Provenance;

    #[test]
    fn xor_has_unit_entries() {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let mut t = EffectTable::zeros(&s, Provenance::Truth);
        for l in 0..2 {
            for m in 0..2 {
                t.pairs[0].set(l, m, if l == m { -0.5 } else { 0.5 });
            }
        }
        let p = pci_matrix(&t, 0, 1, Normalization::Uniform);
        assert_eq!(p.scale, 0.5);
        assert!(p.entries.as_slice().iter().all(|v| v.abs() == 1.0));
        let energy: f64 = p.entries.as_slice().iter().map(|v| v * v).sum();
        assert_eq!(energy, 4.0);
        let w = pci_matrix(
            &t,
            0,
            1,
            Normalization::Weighted(&ReferenceDistribution::uniform(&s)),
        );
        assert_eq!(w.entries, p.entries);
        assert_eq!(w.mode, PciMode::Weighted);
    }

    #[test]
    fn zero_pair_is_zero() {
        let s = FactorSpace::with_level_counts(&[2, 3]).unwrap();
        let t = EffectTable::zeros(&s, Provenance::Truth);
        let p = pci_matrix(&t, 0, 1, Normalization::Uniform);
        assert_eq!(p.scale, 0.0);
        assert!(p.entries.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ranking_orders_by_strength() {
        let s = FactorSpace::with_level_counts(&[2, 2, 2]).unwrap();
        let mut t = EffectTable::zeros(&s, Provenance::Truth);
        let sign = |l: usize, m: usize| if l == m { 1.0 } else { -1.0 };
        for (p, a) in [(0, 0.1), (2, 0.5)] {
            for l in 0..2 {
                for m in 0..2 {
                    t.pairs[p].set(l, m, a * sign(l, m));
                }
            }
        }
        let ranked: Vec<(usize, usize)> = pci_rank_pairs(&t)
            .into_iter()
            .map(|(j, k, _)| (j, k))
            .collect();
        assert_eq!(ranked, vec![(1, 2), (0, 1), (0, 2)]);
    }

    #[test]
    fn csv_layout() {
        let s = FactorSpace::with_level_counts(&[2, 2]).unwrap();
        let t = EffectTable::zeros(&s, Provenance::Truth);
        let mut buf = Vec::new();
        write_pci_csv(&s, &pci_all(&t, Normalization::Uniform), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "factor_j,factor_k,level_j,level_k,pci,s_jk,mode\nx1,x2,0,0,0.0,0.0,uniform\n"
        ));
        assert_eq!(text.lines().count(), 5);
    }
}
