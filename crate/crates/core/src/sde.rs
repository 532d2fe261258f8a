//! Stratonovich systems `delta Gamma = S(X, Gamma) delta X` with
//! `S_j(X, z) = sum_i b_j^i(X) Y_i(z)`, and the Stratonovich-Heun scheme.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{Polynomial, PolyVectorField};
use crate::io::{fmt_real, write_row};
use crate::noise::{sample_brownian, DrivingPath, TimeGrid};

/// States whose max-norm exceeds this trip the explosion guard.
pub const EXPLOSION_NORM: f64 = 1e12;

/// Fields `Y_1..Y_r` on `R^n` and coefficients `b_j^i`, polynomials in the
/// `l` noise variables.
#[derive(Debug, Clone, PartialEq)]
pub struct StratonovichSystem {
    n: usize,
    l: usize,
    fields: Vec<PolyVectorField>,
    /// `coeffs[i][j] = b_j^i`.
    coeffs: Vec<Vec<Polynomial>>,
}

impl StratonovichSystem {
    pub fn new(fields: Vec<PolyVectorField>, coeffs: Vec<Vec<Polynomial>>, l: usize) -> Result<Self> {
        let n = fields
            .first()
            .map(PolyVectorField::dim)
            .ok_or_else(|| Error::InvalidArgument("a system needs at least one field".into()))?;
        if let Some(f) = fields.iter().find(|f| f.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
        }
        if coeffs.len() != fields.len() {
            return Err(Error::DimensionMismatch { expected: fields.len(), got: coeffs.len() });
        }
        for row in &coeffs {
            if row.len() != l {
                return Err(Error::DimensionMismatch { expected: l, got: row.len() });
            }
            if let Some(p) = row.iter().find(|p| p.nvars() != l) {
                return Err(Error::DimensionMismatch { expected: l, got: p.nvars() });
            }
        }
        Ok(Self { n, l, fields, coeffs })
    }

    /// System with constant coefficients `b[i][j]`.
    pub fn with_constant_coeffs(fields: Vec<PolyVectorField>, b: &[Vec<f64>]) -> Result<Self> {
        let l = b.first().map_or(0, Vec::len);
        let coeffs = b
            .iter()
            .map(|row| row.iter().map(|&c| Polynomial::constant(l, c)).collect())
            .collect();
        Self::new(fields, coeffs, l)
    }

    /// `delta Gamma = sum_k (A_k Gamma - B_k) delta X^k`, written over the
    /// basis `Y_j^i = q^i d/dq^j` (index `i * n + j`) followed by
    /// `Z_j = d/dq^j`, so `r = n^2 + n`.
    pub fn inhomogeneous_linear(a: &[DMatrix<f64>], b: &[Vec<f64>]) -> Result<Self> {
        let l = a.len();
        if b.len() != l {
            return Err(Error::DimensionMismatch { expected: l, got: b.len() });
        }
        let n = a.first().map_or(0, DMatrix::nrows);
        for ak in a {
            if ak.nrows() != n || ak.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: ak.nrows().max(ak.ncols()) });
            }
        }
        let mut fields = Vec::with_capacity(n * n + n);
        let mut coeffs = Vec::with_capacity(n * n + n);
        for i in 0..n {
            for j in 0..n {
                fields.push(linear_basis_field(n, i, j));
                coeffs.push(a.iter().map(|ak| Polynomial::constant(l, ak[(j, i)])).collect());
            }
        }
        for j in 0..n {
            fields.push(PolyVectorField::partial(n, j));
            coeffs.push(
                b.iter()
                    .map(|bk| {
                        if bk.len() != n {
                            return Err(Error::DimensionMismatch { expected: n, got: bk.len() });
                        }
                        Ok(Polynomial::constant(l, -bk[j]))
                    })
                    .collect::<Result<_>>()?,
            );
        }
        Self::new(fields, coeffs, l)
    }

    /// The right-invariant group system `delta g = sum_i xi_i g delta X^i`
    /// on `R^{d*d}` (row-major matrix entries).
    pub fn matrix_group(basis: &[DMatrix<f64>]) -> Result<Self> {
        let l = basis.len();
        let fields = basis.iter().map(left_multiplication_field).collect();
        let b: Vec<Vec<f64>> = (0..l).map(|i| (0..l).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::with_constant_coeffs(fields, &b)
    }

    /// Scalar geometric Brownian motion on the path `(t, B)`:
    /// `delta q = (mu - sigma^2/2) q dt + sigma q delta B`.
    pub fn gbm(mu: f64, sigma: f64) -> Self {
        let field = PolyVectorField::linear(&[vec![1.0]]);
        Self::with_constant_coeffs(vec![field], &[vec![mu - 0.5 * sigma * sigma, sigma]])
            .expect("well-formed by construction")
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn noise_dim(&self) -> usize {
        self.l
    }

    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    pub fn coeffs(&self) -> &[Vec<Polynomial>] {
        &self.coeffs
    }

    /// `S_j(x, .)` as a single polynomial field.
    pub fn column_field(&self, x: &[f64], j: usize) -> Result<PolyVectorField> {
        let mut acc = PolyVectorField::zero(self.n);
        for (y, row) in self.fields.iter().zip(&self.coeffs) {
            acc = acc.axpy(row[j].eval(x), y)?;
        }
        Ok(acc)
    }

    /// `S_j(x, z)` for every `j`.
    pub fn operator(&self, x: &[f64], z: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check(x, z)?;
        Ok((0..self.l)
            .map(|j| {
                let mut out = vec![0.0; self.n];
                for (y, row) in self.fields.iter().zip(&self.coeffs) {
                    let w = row[j].eval(x);
                    if w != 0.0 {
                        y.eval_axpy(w, z, &mut out);
                    }
                }
                out
            })
            .collect())
    }

    /// `S(x, z) dx = sum_j S_j(x, z) dx^j`.
    pub fn apply(&self, x: &[f64], z: &[f64], dx: &[f64]) -> Result<Vec<f64>> {
        self.check(x, z)?;
        if dx.len() != self.l {
            return Err(Error::DimensionMismatch { expected: self.l, got: dx.len() });
        }
        Ok(self.apply_unchecked(x, z, dx))
    }

    fn apply_unchecked(&self, x: &[f64], z: &[f64], dx: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (y, row) in self.fields.iter().zip(&self.coeffs) {
            let w: f64 = row.iter().zip(dx).map(|(b, d)| if *d == 0.0 { 0.0 } else { b.eval(x) * d }).sum();
            if w != 0.0 {
                y.eval_axpy(w, z, &mut out);
            }
        }
        out
    }

    fn check(&self, x: &[f64], z: &[f64]) -> Result<()> {
        if x.len() != self.l {
            return Err(Error::DimensionMismatch { expected: self.l, got: x.len() });
        }
        if z.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: z.len() });
        }
        Ok(())
    }

    /// The system with every field's constant part removed; for a linear
    /// system this is its homogeneous part.
    pub fn without_constant_terms(&self) -> Self {
        Self {
            n: self.n,
            l: self.l,
            fields: self.fields.iter().map(PolyVectorField::without_constant_terms).collect(),
            coeffs: self.coeffs.clone(),
        }
    }
}

/// `q^i d/dq^j` on `R^n`.
fn linear_basis_field(n: usize, i: usize, j: usize) -> PolyVectorField {
    let mut e = vec![0; n];
    e[i] = 1;
    PolyVectorField::from_terms(n, [(j, 1.0, e)]).expect("indices in range")
}

/// The linear field `g -> xi g` on row-major `d x d` matrices.
fn left_multiplication_field(xi: &DMatrix<f64>) -> PolyVectorField {
    let d = xi.nrows();
    let dim = d * d;
    let mut terms = Vec::new();
    for r in 0..d {
        for c in 0..d {
            for k in 0..d {
                let v = xi[(r, k)];
                if v != 0.0 {
                    let mut e = vec![0; dim];
                    e[k * d + c] = 1;
                    terms.push((r * d + c, v, e));
                }
            }
        }
    }
    PolyVectorField::from_terms(dim, terms).expect("indices in range")
}

/// A solution sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
    /// First node at which the explosion guard tripped; states from this
    /// node on are NaN.
    pub exit_index: Option<usize>,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("a trajectory has at least one node")
    }

    pub fn is_valid_at(&self, k: usize) -> bool {
        self.exit_index.is_none_or(|e| k < e)
    }

    /// Max over nodes and components of `|self - other|`.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,g0,...,g{n-1},exit`.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("g{i}")));
        header.push("exit".into());
        write_row(w, &header)?;
        for (k, s) in self.states.iter().enumerate() {
            let mut cells = vec![fmt_real(self.grid.node(k))];
            cells.extend(s.iter().map(|&x| fmt_real(x)));
            cells.push(if self.is_valid_at(k) { "0".into() } else { "1".into() });
            write_row(w, &cells)?;
        }
        Ok(())
    }
}

fn tripped(z: &[f64]) -> bool {
    z.iter().any(|x| !x.is_finite() || x.abs() > EXPLOSION_NORM)
}

/// Stratonovich-Heun (predictor-corrector trapezoid) integration.
///
/// Predictor `z~ = z_k + S(X_k, z_k) dX_k`, corrector
/// `z_{k+1} = z_k + (S(X_k, z_k) + S(X_{k+1}, z~)) dX_k / 2`.
pub fn integrate_heun(sys: &StratonovichSystem, path: &DrivingPath, z0: &[f64]) -> Result<Trajectory> {
    if path.dim() != sys.l {
        return Err(Error::DimensionMismatch { expected: sys.l, got: path.dim() });
    }
    if z0.len() != sys.n {
        return Err(Error::DimensionMismatch { expected: sys.n, got: z0.len() });
    }
    let grid = *path.grid();
    let mut states = Vec::with_capacity(grid.len());
    states.push(z0.to_vec());
    let mut exit_index = None;
    let mut x0 = path.row(0);
    for k in 0..grid.steps() {
        let x1 = path.row(k + 1);
        let dx: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let z = &states[k];
        let f0 = sys.apply_unchecked(&x0, z, &dx);
        let pred: Vec<f64> = z.iter().zip(&f0).map(|(a, b)| a + b).collect();
        let f1 = sys.apply_unchecked(&x1, &pred, &dx);
        let next: Vec<f64> = z.iter().zip(f0.iter().zip(&f1)).map(|(a, (p, q))| a + 0.5 * (p + q)).collect();
        if tripped(&next) {
            exit_index = Some(k + 1);
            states.resize(grid.len(), vec![f64::NAN; sys.n]);
            break;
        }
        states.push(next);
        x0 = x1;
    }
    Ok(Trajectory { grid, states, exit_index })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::SlopeUndefined("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::SlopeUndefined("non-positive or non-finite value on a log axis".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::SlopeUndefined("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Parameters of a strong-convergence study. Paths are
/// `(t, B^1, ..., B^dims)`, re-sampled per resolution from `(seed, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorStudy {
    pub t_end: f64,
    pub brownian_dims: usize,
    pub resolutions: Vec<usize>,
    pub n_paths: u64,
    pub seed: u64,
    pub z0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorReport {
    pub steps: Vec<usize>,
    pub mean_errors: Vec<f64>,
    pub slope: f64,
}

/// Mean terminal Euclidean error of Heun against `oracle` at each
/// resolution, and the log-log slope of error against step size.
///
/// `oracle(path, z0)` returns the exact terminal state on `path`.
pub fn strong_error_slope<F>(sys: &StratonovichSystem, oracle: F, study: &StrongErrorStudy) -> Result<StrongErrorReport>
where
    F: Fn(&DrivingPath, &[f64]) -> Vec<f64> + Sync,
{
    if study.resolutions.len() < 2 {
        return Err(Error::SlopeUndefined("need at least two resolutions".into()));
    }
    let mut hs = Vec::new();
    let mut mean_errors = Vec::new();
    for &k in &study.resolutions {
        let grid = TimeGrid::new(study.t_end, k)?;
        let errs: Vec<f64> = (0..study.n_paths)
            .into_par_iter()
            .map(|i| {
                let path = sample_brownian(grid, study.brownian_dims, study.seed, i)?.with_time_component();
                let traj = integrate_heun(sys, &path, &study.z0)?;
                let exact = oracle(&path, &study.z0);
                Ok(traj.terminal().iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            })
            .collect::<Result<_>>()?;
        hs.push(grid.step());
        mean_errors.push(errs.iter().sum::<f64>() / study.n_paths as f64);
    }
    let slope = log_log_slope(&hs, &mean_errors)?;
    Ok(StrongErrorReport { steps: study.resolutions.clone(), mean_errors, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm_path(k: usize, dims: usize, seed: u64) -> DrivingPath {
        sample_brownian(TimeGrid::new(1.0, k).unwrap(), dims, seed, 0).unwrap().with_time_component()
    }

    fn gbm_exact(mu: f64, sigma: f64, q0: f64, path: &DrivingPath, k: usize) -> f64 {
        q0 * ((mu - 0.5 * sigma * sigma) * path.value(k, 0) + sigma * path.value(k, 1)).exp()
    }

    #[test]
    fn zero_system_is_constant() {
        let sys = StratonovichSystem::with_constant_coeffs(
            vec![PolyVectorField::linear(&[vec![1.0, 2.0], vec![0.0, 1.0]])],
            &[vec![0.0, 0.0]],
        )
        .unwrap();
        let p = bm_path(32, 1, 1);
        let t = integrate_heun(&sys, &p, &[0.3, -2.0]).unwrap();
        assert!(t.states.iter().all(|s| s == &[0.3, -2.0]));
        assert!(t.exit_index.is_none());
    }

    #[test]
    fn gbm_matches_closed_form() {
        let sys = StratonovichSystem::gbm(0.1, 0.2);
        let p = bm_path(1024, 1, 4);
        let t = integrate_heun(&sys, &p, &[1.0]).unwrap();
        assert_eq!(t.states[0], vec![1.0]);
        let err = (t.terminal()[0] - gbm_exact(0.1, 0.2, 1.0, &p, 1024)).abs();
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn drift_only_ode() {
        let sys =
            StratonovichSystem::with_constant_coeffs(vec![PolyVectorField::linear(&[vec![1.0]])], &[vec![1.0, 0.0]])
                .unwrap();
        let t = integrate_heun(&sys, &bm_path(1024, 1, 0), &[1.0]).unwrap();
        assert!((t.terminal()[0] - std::f64::consts::E).abs() <= 1e-5);
    }

    #[test]
    fn explosion_sets_exit_index() {
        // dz = z^2 dt from z0 = 2 blows up at t = 0.5.
        let f = PolyVectorField::from_terms(1, [(0, 1.0, vec![2])]).unwrap();
        let sys = StratonovichSystem::with_constant_coeffs(vec![f], &[vec![1.0, 0.0]]).unwrap();
        let t = integrate_heun(&sys, &bm_path(256, 1, 0), &[2.0]).unwrap();
        let e = t.exit_index.expect("guard must trip");
        assert!(e > 100 && e < 200, "{e}");
        assert!(t.states[e].iter().all(|x| x.is_nan()));
        assert!(t.is_valid_at(e - 1) && !t.is_valid_at(e));
    }

    #[test]
    fn dimension_errors() {
        let sys = StratonovichSystem::gbm(0.0, 1.0);
        assert!(integrate_heun(&sys, &bm_path(4, 2, 0), &[1.0]).is_err());
        assert!(integrate_heun(&sys, &bm_path(4, 1, 0), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn inhomogeneous_linear_operator() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let sys = StratonovichSystem::inhomogeneous_linear(&[a], &[vec![5.0, -1.0]]).unwrap();
        assert_eq!(sys.fields().len(), 6);
        let s = sys.operator(&[0.0], &[1.0, -1.0]).unwrap();
        assert_eq!(s[0], vec![1.0 - 2.0 - 5.0, 3.0 - 4.0 + 1.0]);
        let h = sys.without_constant_terms().operator(&[0.0], &[1.0, -1.0]).unwrap();
        assert_eq!(h[0], vec![-1.0, -1.0]);
    }

    #[test]
    fn matrix_group_field_is_left_multiplication() {
        let xi = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let sys = StratonovichSystem::matrix_group(std::slice::from_ref(&xi)).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 0.0, 1.0]);
        let flat: Vec<f64> = g.transpose().iter().copied().collect();
        let v = sys.operator(&[0.0], &flat).unwrap();
        let expect: Vec<f64> = (xi * g).transpose().iter().copied().collect();
        assert_eq!(v[0], expect);
    }

    #[test]
    fn slope_needs_two_resolutions() {
        let study = StrongErrorStudy {
            t_end: 1.0,
            brownian_dims: 1,
            resolutions: vec![64],
            n_paths: 2,
            seed: 0,
            z0: vec![1.0],
        };
        let sys = StratonovichSystem::gbm(0.1, 0.2);
        assert!(matches!(strong_error_slope(&sys, |_, z| z.to_vec(), &study), Err(Error::SlopeUndefined(_))));
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
        assert!(log_log_slope(&xs, &[0.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn trajectory_csv() {
        let sys = StratonovichSystem::gbm(0.0, 1.0);
        let t = integrate_heun(&sys, &bm_path(2, 1, 0), &[1.0]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,g0,exit\n0.0000000000000000e0,1.0000000000000000e0,0\n"));
    }
}
