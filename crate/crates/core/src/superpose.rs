//! Superposition rules and a numerical verification harness.
//!
//! A rule expresses every solution as `Phi(z; s_1(t), ..., s_m(t))` for a
//! fixed set of particular solutions, independently of time and of the
//! noise. The harness integrates the particular solutions and the direct
//! solution from each `z` on the same driving path and compares them.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{fmt_real, write_row};
use crate::noise::DrivingPath;
use crate::sde::{integrate_heun, StratonovichSystem};

/// Central finite-difference step used by [`tangency_check`].
pub const FD_STEP: f64 = 1e-6;

/// `Phi(z; particulars) -> R^n`.
pub type RuleFn = dyn Fn(&[f64], &[Vec<f64>]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub enum SuperpositionRule {
    /// `Phi(z; s_1..s_n, s_bar) = sum_j z^j s_j + s_bar` for inhomogeneous
    /// linear systems; `s_j` solve the homogeneous part from `e_j`, `s_bar`
    /// the full system from 0.
    LinearCombination { n: usize },
    /// `Phi(z; p) = p z` on row-major `d x d` matrices for right-invariant
    /// group systems; `p` starts at the identity.
    GroupTranslation { d: usize },
    /// Arbitrary map. The first `homogeneous_prefix` particular solutions
    /// are integrated with the system's homogeneous part.
    UserCallable { n: usize, m: usize, homogeneous_prefix: usize, map: Arc<RuleFn> },
}

impl fmt::Debug for SuperpositionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LinearCombination { n } => write!(f, "LinearCombination {{ n: {n} }}"),
            Self::GroupTranslation { d } => write!(f, "GroupTranslation {{ d: {d} }}"),
            Self::UserCallable { n, m, homogeneous_prefix, .. } => {
                write!(f, "UserCallable {{ n: {n}, m: {m}, homogeneous_prefix: {homogeneous_prefix} }}")
            }
        }
    }
}

/// The linear-system rule on `R^n`.
pub fn linear_rule(n: usize) -> SuperpositionRule {
    SuperpositionRule::LinearCombination { n }
}

impl SuperpositionRule {
    pub fn user<F>(n: usize, m: usize, map: F) -> Self
    where
        F: Fn(&[f64], &[Vec<f64>]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::UserCallable { n, m, homogeneous_prefix: 0, map: Arc::new(map) }
    }

    /// Integrate the first `k` particular solutions with the homogeneous part.
    pub fn with_homogeneous_prefix(self, k: usize) -> Self {
        match self {
            Self::UserCallable { n, m, map, .. } => Self::UserCallable { n, m, homogeneous_prefix: k, map },
            other => other,
        }
    }

    /// State dimension.
    pub fn state_dim(&self) -> usize {
        match self {
            Self::LinearCombination { n } | Self::UserCallable { n, .. } => *n,
            Self::GroupTranslation { d } => d * d,
        }
    }

    /// Number of particular solutions.
    pub fn m(&self) -> usize {
        match self {
            Self::LinearCombination { n } => n + 1,
            Self::GroupTranslation { .. } => 1,
            Self::UserCallable { m, .. } => *m,
        }
    }

    /// Initial points of the particular solutions at which `Phi(z; .) = z`:
    /// `e_1..e_n, 0` for the linear rule, the identity for translation.
    /// `None` for user rules.
    pub fn canonical_particulars(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Self::LinearCombination { n } => {
                let mut ps: Vec<Vec<f64>> = (0..*n)
                    .map(|j| (0..*n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect();
                ps.push(vec![0.0; *n]);
                Some(ps)
            }
            Self::GroupTranslation { d } => {
                Some(vec![DMatrix::<f64>::identity(*d, *d).transpose().as_slice().to_vec()])
            }
            Self::UserCallable { .. } => None,
        }
    }

    /// Whether particular solution `a` follows the homogeneous part.
    pub fn uses_homogeneous_part(&self, a: usize) -> bool {
        match self {
            Self::LinearCombination { n } => a < *n,
            Self::GroupTranslation { .. } => false,
            Self::UserCallable { homogeneous_prefix, .. } => a < *homogeneous_prefix,
        }
    }

    /// `Phi(z; particulars)`.
    pub fn apply(&self, z: &[f64], particulars: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.state_dim();
        if z.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: z.len() });
        }
        if particulars.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), got: particulars.len() });
        }
        if let Some(p) = particulars.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        Ok(self.apply_unchecked(z, particulars))
    }

    fn apply_unchecked(&self, z: &[f64], particulars: &[Vec<f64>]) -> Vec<f64> {
        match self {
            Self::LinearCombination { n } => {
                let mut out = particulars[*n].clone();
                for (zj, s) in z.iter().zip(particulars) {
                    for (o, si) in out.iter_mut().zip(s) {
                        *o += zj * si;
                    }
                }
                out
            }
            Self::GroupTranslation { d } => {
                let p = DMatrix::from_row_slice(*d, *d, &particulars[0]);
                let g = DMatrix::from_row_slice(*d, *d, z);
                (p * g).transpose().as_slice().to_vec()
            }
            Self::UserCallable { map, .. } => map(z, particulars),
        }
    }

    fn particular_system(&self, sys: &StratonovichSystem, homogeneous: &StratonovichSystem, a: usize) -> StratonovichSystem {
        if self.uses_homogeneous_part(a) {
            homogeneous.clone()
        } else {
            sys.clone()
        }
    }
}

/// One (start, path) comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationEntry {
    pub z_index: usize,
    pub seed: u64,
    pub path_index: u64,
    /// Max over nodes of the Euclidean norm of `Phi(z; s(t)) - Gamma^z(t)`;
    /// infinite if either side left the explosion guard.
    pub max_dev: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub entries: Vec<VerificationEntry>,
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

impl VerificationReport {
    fn from_entries(entries: Vec<VerificationEntry>, tol: f64) -> Self {
        let max_deviation = entries.iter().map(|e| e.max_dev).fold(0.0, f64::max);
        let pass = entries.iter().all(|e| e.pass);
        Self { entries, max_deviation, tol, pass }
    }

    /// CSV: `z_index,seed,max_dev,pass`.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        write_row(w, &["z_index".into(), "seed".into(), "max_dev".into(), "pass".into()])?;
        for e in &self.entries {
            write_row(
                w,
                &[e.z_index.to_string(), e.seed.to_string(), fmt_real(e.max_dev), u8::from(e.pass).to_string()],
            )?;
        }
        Ok(())
    }
}

fn check_particulars(rule: &SuperpositionRule, init: &[Vec<f64>]) -> Result<()> {
    if init.len() != rule.m() {
        return Err(Error::DimensionMismatch { expected: rule.m(), got: init.len() });
    }
    let n = rule.state_dim();
    if let Some(p) = init.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    for i in 0..init.len() {
        for j in i + 1..init.len() {
            if init[i] == init[j] {
                return Err(Error::DuplicateParticulars(i, j));
            }
        }
    }
    Ok(())
}

/// Verifies `rule` on one driving path; see [`verify_rule_on_paths`].
pub fn verify_rule(
    sys: &StratonovichSystem,
    rule: &SuperpositionRule,
    init_particulars: &[Vec<f64>],
    z_list: &[Vec<f64>],
    path: &DrivingPath,
    tol: f64,
) -> Result<VerificationReport> {
    verify_rule_on_paths(sys, rule, init_particulars, z_list, std::slice::from_ref(path), tol)
}

/// Integrates the particular solutions and each direct solution on every
/// path and reports the node-wise deviation per (start, path) pair.
/// Entries are ordered path-major, then by start index.
pub fn verify_rule_on_paths(
    sys: &StratonovichSystem,
    rule: &SuperpositionRule,
    init_particulars: &[Vec<f64>],
    z_list: &[Vec<f64>],
    paths: &[DrivingPath],
    tol: f64,
) -> Result<VerificationReport> {
    if sys.state_dim() != rule.state_dim() {
        return Err(Error::DimensionMismatch { expected: rule.state_dim(), got: sys.state_dim() });
    }
    check_particulars(rule, init_particulars)?;
    if let Some(z) = z_list.iter().find(|z| z.len() != sys.state_dim()) {
        return Err(Error::DimensionMismatch { expected: sys.state_dim(), got: z.len() });
    }
    let homogeneous = sys.without_constant_terms();
    let per_path: Vec<Vec<VerificationEntry>> = paths
        .par_iter()
        .map(|path| -> Result<Vec<VerificationEntry>> {
            let particulars = init_particulars
                .iter()
                .enumerate()
                .map(|(a, p0)| integrate_heun(&rule.particular_system(sys, &homogeneous, a), path, p0))
                .collect::<Result<Vec<_>>>()?;
            z_list
                .par_iter()
                .enumerate()
                .map(|(z_index, z)| {
                    let direct = integrate_heun(sys, path, z)?;
                    let mut max_dev: f64 = 0.0;
                    for (k, target) in direct.states.iter().enumerate() {
                        let ps: Vec<Vec<f64>> = particulars.iter().map(|t| t.states[k].clone()).collect();
                        let phi = rule.apply_unchecked(z, &ps);
                        let dev = phi.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                        max_dev = if dev.is_nan() { f64::INFINITY } else { max_dev.max(dev) };
                    }
                    Ok(VerificationEntry {
                        z_index,
                        seed: path.seed(),
                        path_index: path.path_index(),
                        max_dev,
                        pass: max_dev <= tol,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport::from_entries(per_path.into_iter().flatten().collect(), tol))
}

/// A point `(x, z, q_0, q_1..q_m)` at which the tangency condition is
/// evaluated; `x` is the value of the driving path.
#[derive(Debug, Clone, PartialEq)]
pub struct TangencySample {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub q0: Vec<f64>,
    pub particulars: Vec<Vec<f64>>,
}

/// Sample on the leaf through `z`, i.e. with `q_0 = Phi(z; q_1..q_m)`.
pub fn on_leaf(rule: &SuperpositionRule, x: Vec<f64>, z: Vec<f64>, particulars: Vec<Vec<f64>>) -> Result<TangencySample> {
    let q0 = rule.apply(&z, &particulars)?;
    Ok(TangencySample { x, z, q0, particulars })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangencyReport {
    /// Per sample, max over `j` of the Euclidean residual norm.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Evaluates, for `Psi_z(q_0, ..) = q_0 - Phi(z; q_1..q_m)` and every
/// noise direction `j`,
/// `S_j(x, q_0) - sum_a D_{q_a} Phi(z; q) S_j^{(a)}(x, q_a)`
/// with central differences of step [`FD_STEP`]; `S^{(a)}` is the system
/// that particular `a` follows.
pub fn tangency_check(
    sys: &StratonovichSystem,
    rule: &SuperpositionRule,
    samples: &[TangencySample],
) -> Result<TangencyReport> {
    let n = sys.state_dim();
    if rule.state_dim() != n {
        return Err(Error::DimensionMismatch { expected: rule.state_dim(), got: n });
    }
    let homogeneous = sys.without_constant_terms();
    let residuals = samples
        .iter()
        .map(|s| -> Result<f64> {
            rule.apply(&s.z, &s.particulars)?;
            if s.q0.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.q0.len() });
            }
            let mut rates = sys.operator(&s.x, &s.q0)?;
            for (a, qa) in s.particulars.iter().enumerate() {
                let sa = rule.particular_system(sys, &homogeneous, a).operator(&s.x, qa)?;
                for i in 0..n {
                    let mut plus = s.particulars.clone();
                    let mut minus = s.particulars.clone();
                    plus[a][i] += FD_STEP;
                    minus[a][i] -= FD_STEP;
                    let fp = rule.apply_unchecked(&s.z, &plus);
                    let fm = rule.apply_unchecked(&s.z, &minus);
                    for (rate, sj) in rates.iter_mut().zip(&sa) {
                        for (r, (p, m)) in rate.iter_mut().zip(fp.iter().zip(&fm)) {
                            *r -= (p - m) / (2.0 * FD_STEP) * sj[i];
                        }
                    }
                }
            }
            Ok(rates
                .iter()
                .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(TangencyReport { residuals, max_residual })
}
