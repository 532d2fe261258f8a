//! Involutivity and Lie-closure certificates for families of fields.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{Monomial, PolyVectorField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InvolutivityWitness {
    pub pair: (usize, usize),
    pub point: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvolutivityReport {
    pub involutive: bool,
    /// Largest scaled least-squares residual seen.
    pub max_residual: f64,
    /// First failing `(pair, point)` in scan order.
    pub witness: Option<InvolutivityWitness>,
}

/// Pointwise involutivity test.
///
/// At every sample point each bracket `[Y_i, Y_j]` (i < j) is projected
/// onto the span of the generator values; the residual divided by
/// `max(1, |[Y_i, Y_j](z)|)` must not exceed `rank_tol`. Singular values
/// below `rank_tol * sigma_max` are treated as zero.
pub fn check_involutive(
    fields: &[PolyVectorField],
    sample_points: &[Vec<f64>],
    rank_tol: f64,
) -> Result<InvolutivityReport> {
    let first = fields
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty generator list".into()))?;
    let n = first.dim();
    if let Some(f) = fields.iter().find(|f| f.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
    }
    if sample_points.is_empty() {
        return Err(Error::InvalidArgument("at least one sample point is required".into()));
    }
    let r = fields.len();
    let mut brackets = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            brackets.push(((i, j), fields[i].bracket(&fields[j])?));
        }
    }

    let mut report = InvolutivityReport { involutive: true, max_residual: 0.0, witness: None };
    for z in sample_points {
        let mut a = DMatrix::zeros(n, r);
        for (c, f) in fields.iter().enumerate() {
            a.set_column(c, &DVector::from_vec(f.evaluate(z)?));
        }
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = (rank_tol * smax).max(f64::MIN_POSITIVE);
        for (pair, b) in &brackets {
            let v = DVector::from_vec(b.evaluate(z)?);
            let coeffs = svd.solve(&v, eps).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let residual = (&a * coeffs - &v).norm() / v.norm().max(1.0);
            report.max_residual = report.max_residual.max(residual);
            if residual > rank_tol && report.witness.is_none() {
                report.involutive = false;
                report.witness = Some(InvolutivityWitness { pair: *pair, point: z.clone(), residual });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ClosureReport {
    pub generators: Vec<PolyVectorField>,
    pub closed: bool,
    pub basis: Vec<PolyVectorField>,
    /// `c[i][j][k]` with `[e_i, e_j] = sum_k c[i][j][k] e_k`.
    pub structure_constants: Option<Vec<Vec<Vec<f64>>>>,
    pub dimension: usize,
    pub cap_hit: bool,
}

/// Coefficient vectors of fields over the union of their monomial supports.
fn coefficient_matrix(fields: &[&PolyVectorField]) -> DMatrix<f64> {
    let mut index: BTreeMap<(usize, Monomial), usize> = BTreeMap::new();
    for f in fields {
        for (c, p) in f.components().iter().enumerate() {
            for (m, _) in p.terms() {
                let next = index.len();
                index.entry((c, m.clone())).or_insert(next);
            }
        }
    }
    let mut a = DMatrix::zeros(index.len().max(1), fields.len());
    for (col, f) in fields.iter().enumerate() {
        for (c, p) in f.components().iter().enumerate() {
            for (m, v) in p.terms() {
                a[(index[&(c, m.clone())], col)] = v;
            }
        }
    }
    a
}

fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = a.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

fn independent_of(basis: &[PolyVectorField], candidate: &PolyVectorField, dep_tol: f64) -> bool {
    if candidate.is_zero() {
        return false;
    }
    let mut cols: Vec<&PolyVectorField> = basis.iter().collect();
    cols.push(candidate);
    numerical_rank(&coefficient_matrix(&cols), dep_tol) > basis.len()
}

/// Expresses `[e_i, e_j]` in the basis; `None` if some bracket leaves the span.
fn structure_constants(basis: &[PolyVectorField], dep_tol: f64) -> Result<Option<Vec<Vec<Vec<f64>>>>> {
    let d = basis.len();
    let mut c = vec![vec![vec![0.0; d]; d]; d];
    for i in 0..d {
        for j in 0..d {
            let b = basis[i].bracket(&basis[j])?;
            let mut cols: Vec<&PolyVectorField> = basis.iter().collect();
            cols.push(&b);
            let m = coefficient_matrix(&cols);
            let a = m.columns(0, d).into_owned();
            let v = m.column(d).into_owned();
            let svd = a.clone().svd(true, true);
            let x = svd
                .solve(&v, dep_tol * svd.singular_values.max())
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            if (&a * &x - &v).norm() > dep_tol * v.norm().max(1.0) {
                return Ok(None);
            }
            for k in 0..d {
                // Clean round-off so integer structure constants print exactly.
                let r = x[k].round();
                c[i][j][k] = if (x[k] - r).abs() <= 1e-12 { r } else { x[k] };
            }
        }
    }
    Ok(Some(c))
}

/// Computes a basis of the real Lie algebra generated by `generators`.
///
/// Independent generators are kept in input order, then brackets
/// `[b_i, b_j]`, `i < j`, are scanned with `j` increasing over the growing
/// basis and appended when independent of the current span. The search
/// stops once the basis would exceed `dim_cap`.
pub fn lie_closure(generators: &[PolyVectorField], dim_cap: usize, dep_tol: f64) -> Result<ClosureReport> {
    if let Some(first) = generators.first() {
        if let Some(f) = generators.iter().find(|f| f.dim() != first.dim()) {
            return Err(Error::DimensionMismatch { expected: first.dim(), got: f.dim() });
        }
    }
    let mut basis: Vec<PolyVectorField> = Vec::new();
    let cap_report = |basis: Vec<PolyVectorField>| ClosureReport {
        generators: generators.to_vec(),
        closed: false,
        dimension: basis.len(),
        basis,
        structure_constants: None,
        cap_hit: true,
    };
    for g in generators {
        if independent_of(&basis, g, dep_tol) {
            if basis.len() == dim_cap {
                return Ok(cap_report(basis));
            }
            basis.push(g.clone());
        }
    }
    let mut j = 0;
    while j < basis.len() {
        for i in 0..j {
            let b = basis[i].bracket(&basis[j])?;
            if independent_of(&basis, &b, dep_tol) {
                if basis.len() == dim_cap {
                    return Ok(cap_report(basis));
                }
                basis.push(b);
            }
        }
        j += 1;
    }
    let structure_constants = structure_constants(&basis, dep_tol)?;
    Ok(ClosureReport {
        generators: generators.to_vec(),
        closed: true,
        dimension: basis.len(),
        basis,
        structure_constants,
        cap_hit: false,
    })
}
