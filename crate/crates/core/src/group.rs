//! Matrix Lie groups and the exponential-Euler group integrator.
//!
//! Groups are realized as `d x d` matrices with an explicit algebra basis
//! `xi_1..xi_l`. The right-invariant generator of `xi` is `g -> xi g`, the
//! left-invariant one `g -> g xi`.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::io::{fmt_real, write_row};
use crate::noise::{DrivingPath, TimeGrid};
use crate::sde::Trajectory;

/// Residual allowed when re-expressing a matrix in the algebra basis.
pub const ALGEBRA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupKind {
    /// `[[a1, a0], [0, 1]]`, `a1 > 0`: `x -> a1 x + a0`.
    Affine1,
    /// Positive diagonal `n x n` matrices, `(R_+)^n`.
    PosDiag(usize),
    SO3,
    /// Unipotent upper-triangular `3 x 3` matrices.
    Heisenberg,
    Custom(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `g_{k+1} = exp(dxi_k) g_k`: right-invariant generators `xi g`.
    LeftActionRightInvariant,
    /// `g_{k+1} = g_k exp(dxi_k)`: left-invariant generators `g xi`
    /// (the stochastic exponential).
    RightActionLeftInvariant,
}

#[derive(Debug, Clone)]
pub struct MatrixLieGroup {
    kind: GroupKind,
    d: usize,
    basis: Vec<DMatrix<f64>>,
    /// Maps a flattened matrix to basis coordinates.
    coords_map: DMatrix<f64>,
    /// Span of the flattened basis, for residual checks.
    span: DMatrix<f64>,
    tol: f64,
}

fn unit(d: usize, r: usize, c: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    m[(r, c)] = 1.0;
    m
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

impl MatrixLieGroup {
    fn build(kind: GroupKind, basis: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = basis
            .first()
            .ok_or_else(|| Error::InvalidArgument("algebra basis must be non-empty".into()))?;
        let d = first.nrows();
        if let Some(b) = basis.iter().find(|b| b.nrows() != d || b.ncols() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: b.nrows().max(b.ncols()) });
        }
        let span = DMatrix::from_columns(
            &basis.iter().map(|b| DVector::from_column_slice(b.as_slice())).collect::<Vec<_>>(),
        );
        let sv = span.singular_values();
        if sv.min() <= 1e-12 * sv.max() {
            return Err(Error::InvalidArgument("algebra basis is linearly dependent".into()));
        }
        let coords_map = span
            .clone()
            .pseudo_inverse(1e-14)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self { kind, d, basis, coords_map, span, tol: 1e-9 })
    }

    /// Affine group of the line, basis `(xi_0, xi_1)` = (translation, dilation).
    pub fn affine1() -> Self {
        Self::build(GroupKind::Affine1, vec![unit(2, 0, 1), unit(2, 0, 0)]).expect("valid basis")
    }

    pub fn pos_diag(n: usize) -> Self {
        Self::build(GroupKind::PosDiag(n), (0..n).map(|i| unit(n, i, i)).collect()).expect("valid basis")
    }

    /// `SO(3)` with basis `(L_x, L_y, L_z)`.
    pub fn so3() -> Self {
        let [lx, ly, lz] = so3_generators();
        Self::build(GroupKind::SO3, vec![lx, ly, lz]).expect("valid basis")
    }

    /// Heisenberg group with basis `(E_12, E_23, E_13)`.
    pub fn heisenberg() -> Self {
        Self::build(GroupKind::Heisenberg, vec![unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)])
            .expect("valid basis")
    }

    /// A matrix group given only by its algebra basis; no membership test.
    pub fn custom(name: &str, basis: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::build(GroupKind::Custom(name.to_string()), basis)
    }

    /// Membership tolerance used to flag trajectories.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn matrix_size(&self) -> usize {
        self.d
    }

    /// Algebra dimension `l`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.d, self.d)
    }

    /// `sum_i c_i xi_i`.
    pub fn algebra_element(&self, coords: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.d);
        for (c, b) in coords.iter().zip(&self.basis) {
            m += b * *c;
        }
        m
    }

    /// Basis coordinates of `xi`; fails if `xi` is not in the span.
    pub fn coordinates(&self, xi: &DMatrix<f64>) -> Result<Vec<f64>> {
        let v = DVector::from_column_slice(xi.as_slice());
        let c = &self.coords_map * &v;
        let residual = (&self.span * &c - &v).norm();
        let tol = ALGEBRA_TOL * v.norm().max(1.0);
        if residual > tol {
            return Err(Error::NotInAlgebra { residual, tol });
        }
        Ok(c.iter().copied().collect())
    }

    /// `Ad_g(xi) = g xi g^{-1}`, checked to stay in the algebra.
    pub fn adjoint(&self, g: &DMatrix<f64>, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("group element is singular".into()))?;
        let m = g * xi * inv;
        self.coordinates(&m)?;
        Ok(m)
    }

    /// Matrix of `ad(xi)` in the basis: column `k` holds `[xi, xi_k]`.
    pub fn ad_matrix(&self, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let l = self.dim();
        let mut m = DMatrix::zeros(l, l);
        for (k, b) in self.basis.iter().enumerate() {
            let c = self.coordinates(&(xi * b - b * xi))?;
            m.set_column(k, &DVector::from_vec(c));
        }
        Ok(m)
    }

    pub fn membership_defect(&self, g: &DMatrix<f64>) -> f64 {
        membership_defect(&self.kind, g)
    }
}

/// `(L_x, L_y, L_z)`, the infinitesimal rotations about the coordinate axes.
pub fn so3_generators() -> [DMatrix<f64>; 3] {
    [
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    ]
}

/// Distance of `g` from the group; `inf` when a sign constraint fails.
pub fn membership_defect(kind: &GroupKind, g: &DMatrix<f64>) -> f64 {
    let d = g.nrows();
    match kind {
        GroupKind::Affine1 => {
            if g[(0, 0)] <= 0.0 {
                f64::INFINITY
            } else {
                g[(1, 0)].abs().max((g[(1, 1)] - 1.0).abs())
            }
        }
        GroupKind::PosDiag(_) => {
            let mut defect: f64 = 0.0;
            for r in 0..d {
                for c in 0..d {
                    if r == c {
                        if g[(r, c)] <= 0.0 {
                            return f64::INFINITY;
                        }
                    } else {
                        defect = defect.max(g[(r, c)].abs());
                    }
                }
            }
            defect
        }
        GroupKind::SO3 => {
            let orth = max_abs(&(g.transpose() * g - DMatrix::identity(d, d)));
            orth.max((g.determinant() - 1.0).abs())
        }
        GroupKind::Heisenberg => {
            let mut defect: f64 = 0.0;
            for r in 0..d {
                defect = defect.max((g[(r, r)] - 1.0).abs());
                for c in 0..r {
                    defect = defect.max(g[(r, c)].abs());
                }
            }
            defect
        }
        GroupKind::Custom(_) => 0.0,
    }
}

/// A group-valued solution on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTrajectory {
    pub grid: TimeGrid,
    pub kind: GroupKind,
    pub elements: Vec<DMatrix<f64>>,
    /// Membership defect per node.
    pub defects: Vec<f64>,
    /// Maximum of `defects`.
    pub defect: f64,
    /// Membership tolerance of the group that produced the trajectory.
    pub tolerance: f64,
    /// Set when `defect` exceeds `tolerance`.
    pub flagged: bool,
}

impl GroupTrajectory {
    fn from_elements(grid: TimeGrid, kind: GroupKind, elements: Vec<DMatrix<f64>>, tol: f64) -> Self {
        let defects: Vec<f64> = elements.iter().map(|g| membership_defect(&kind, g)).collect();
        let defect = defects.iter().copied().fold(0.0, f64::max);
        Self { grid, kind, elements, defects, defect, tolerance: tol, flagged: defect.is_nan() || defect > tol }
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        self.elements.last().expect("non-empty trajectory")
    }

    /// Max node-wise entry deviation.
    pub fn max_deviation(&self, other: &GroupTrajectory) -> f64 {
        self.elements.iter().zip(&other.elements).map(|(a, b)| max_abs(&(a - b))).fold(0.0, f64::max)
    }

    /// CSV: `t,m00,m01,...,defect` with row-major matrix entries.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        let d = self.elements.first().map_or(0, DMatrix::nrows);
        let mut header = vec!["t".to_string()];
        for r in 0..d {
            for c in 0..d {
                header.push(format!("m{r}{c}"));
            }
        }
        header.push("defect".into());
        write_row(w, &header)?;
        for (k, g) in self.elements.iter().enumerate() {
            let mut cells = vec![fmt_real(self.grid.node(k))];
            for r in 0..d {
                for c in 0..d {
                    cells.push(fmt_real(g[(r, c)]));
                }
            }
            cells.push(fmt_real(self.defects[k]));
            write_row(w, &cells)?;
        }
        Ok(())
    }
}

/// Exponential-Euler integration of `delta g = sum_i xi_i^G(g) delta X^i`.
pub fn integrate_group_sde(
    group: &MatrixLieGroup,
    path: &DrivingPath,
    g0: &DMatrix<f64>,
    side: Side,
) -> Result<GroupTrajectory> {
    integrate_group_sde_with_drift(group, path, g0, side, None)
}

/// As [`integrate_group_sde`] with an extra deterministic algebra drift
/// `drift dt` added to each increment.
pub fn integrate_group_sde_with_drift(
    group: &MatrixLieGroup,
    path: &DrivingPath,
    g0: &DMatrix<f64>,
    side: Side,
    drift: Option<&DMatrix<f64>>,
) -> Result<GroupTrajectory> {
    if path.dim() != group.dim() {
        return Err(Error::DimensionMismatch { expected: group.dim(), got: path.dim() });
    }
    if g0.nrows() != group.d || g0.ncols() != group.d {
        return Err(Error::DimensionMismatch { expected: group.d, got: g0.nrows() });
    }
    let grid = *path.grid();
    let h = grid.step();
    let mut elements = Vec::with_capacity(grid.len());
    elements.push(g0.clone());
    for k in 0..grid.steps() {
        let mut dxi = group.algebra_element(&path.increment(k));
        if let Some(a) = drift {
            dxi += a * h;
        }
        let e = expm(&dxi);
        let g = &elements[k];
        let next = match side {
            Side::LeftActionRightInvariant => e * g,
            Side::RightActionLeftInvariant => g * e,
        };
        elements.push(next);
    }
    Ok(GroupTrajectory::from_elements(grid, group.kind.clone(), elements, group.tol))
}

/// Identity-started solution of the left-invariant system driven by `path`.
pub fn stochastic_exponential(group: &MatrixLieGroup, path: &DrivingPath) -> Result<GroupTrajectory> {
    integrate_group_sde(group, path, &group.identity(), Side::RightActionLeftInvariant)
}

/// `Gamma^g_t = Gamma^e_t g` node-wise.
pub fn translate_solution(traj_e: &GroupTrajectory, g: &DMatrix<f64>) -> Result<GroupTrajectory> {
    let start = traj_e.elements.first().ok_or(Error::NotIdentityStart(f64::INFINITY))?;
    let d = start.nrows();
    let dev = max_abs(&(start - DMatrix::identity(d, d)));
    if dev > 1e-12 {
        return Err(Error::NotIdentityStart(dev));
    }
    let elements: Vec<DMatrix<f64>> = traj_e.elements.iter().map(|h| h * g).collect();
    Ok(GroupTrajectory::from_elements(traj_e.grid, traj_e.kind.clone(), elements, traj_e.tolerance))
}

/// `z -> g z`.
pub fn linear_action(g: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (g * DVector::from_column_slice(z)).iter().copied().collect()
}

/// `z -> first n entries of g (z, 1)` for `(n+1) x (n+1)` affine matrices.
pub fn affine_action(g: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let mut v = z.to_vec();
    v.push(1.0);
    let mut out = linear_action(g, &v);
    out.pop();
    out
}

/// `Gamma^z_t = Xi(g_t, z)`.
pub fn one_point_motion<A>(traj: &GroupTrajectory, action: A, z0: &[f64]) -> Trajectory
where
    A: Fn(&DMatrix<f64>, &[f64]) -> Vec<f64>,
{
    Trajectory {
        grid: traj.grid,
        states: traj.elements.iter().map(|g| action(g, z0)).collect(),
        exit_index: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousTrajectory {
    pub trajectory: Trajectory,
    /// `max_k | |Gamma_k| - 1 |` for the sphere; zero otherwise.
    pub norm_defect: f64,
}

/// Projects a group trajectory to `G/H` through the orbit of an
/// `H`-fixed base point, in the linear embedding. For `SO(3)` the base
/// point must be a unit vector and the image lies on the sphere.
pub fn project_homogeneous(traj: &GroupTrajectory, base_point: &[f64]) -> Result<HomogeneousTrajectory> {
    let sphere = traj.kind == GroupKind::SO3;
    if sphere {
        let norm = base_point.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitNorm(norm));
        }
    }
    if let Some(g) = traj.elements.first() {
        if g.ncols() != base_point.len() {
            return Err(Error::DimensionMismatch { expected: g.ncols(), got: base_point.len() });
        }
    }
    let trajectory = one_point_motion(traj, linear_action, base_point);
    let norm_defect = if sphere {
        trajectory
            .states
            .iter()
            .map(|z| (z.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(HomogeneousTrajectory { trajectory, norm_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_brownian, ComponentRole};

    fn path(k: usize, dims: usize, seed: u64) -> DrivingPath {
        sample_brownian(TimeGrid::new(1.0, k).unwrap(), dims, seed, 0).unwrap()
    }

    #[test]
    fn affine_algebra_commutator() {
        let g = MatrixLieGroup::affine1();
        let (x0, x1) = (&g.basis()[0], &g.basis()[1]);
        assert_eq!(x0 * x1 - x1 * x0, -x0);
    }

    #[test]
    fn adjoint_examples() {
        let g = MatrixLieGroup::affine1();
        let xi = g.basis()[1].clone();
        assert_eq!(g.adjoint(&g.identity(), &xi).unwrap(), xi);
        let d0 = 0.7;
        let ad = g.adjoint(&expm(&(&g.basis()[0] * d0)), &xi).unwrap();
        let expect = &xi - &g.basis()[0] * d0;
        assert!(max_abs(&(ad - expect)) <= 1e-15);
    }

    #[test]
    fn adjoint_equals_exponential_of_ad() {
        let g = MatrixLieGroup::so3();
        for (n, c) in [[0.1, -0.2, 0.3], [0.02, 0.4, -0.1], [-0.3, 0.0, 0.25]].iter().enumerate() {
            let xi = g.algebra_element(c);
            let series = expm(&g.ad_matrix(&xi).unwrap());
            let ge = expm(&xi);
            for k in 0..3 {
                let lhs = g.coordinates(&g.adjoint(&ge, &g.basis()[k]).unwrap()).unwrap();
                for i in 0..3 {
                    assert!((lhs[i] - series[(i, k)]).abs() <= 1e-10, "case {n}");
                }
            }
        }
    }

    #[test]
    fn out_of_algebra_is_rejected() {
        let g = MatrixLieGroup::so3();
        assert!(matches!(g.coordinates(&DMatrix::identity(3, 3)), Err(Error::NotInAlgebra { .. })));
        assert!(MatrixLieGroup::custom("dup", vec![unit(2, 0, 1), unit(2, 0, 1)]).is_err());
    }

    #[test]
    fn pos_diag_exponential() {
        let g = MatrixLieGroup::pos_diag(1);
        assert!((expm(&g.algebra_element(&[0.3]))[(0, 0)] - 0.3f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_path_gives_constant() {
        let g = MatrixLieGroup::affine1();
        let zero = DrivingPath::from_components(
            TimeGrid::new(1.0, 8).unwrap(),
            vec![(ComponentRole::Custom, vec![0.0; 9]), (ComponentRole::Custom, vec![0.0; 9])],
        )
        .unwrap();
        let g0 = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.0, 1.0]);
        let t = integrate_group_sde(&g, &zero, &g0, Side::LeftActionRightInvariant).unwrap();
        assert!(t.elements.iter().all(|e| e == &g0));
        assert!(!t.flagged);
    }

    #[test]
    fn so3_stays_orthogonal() {
        let g = MatrixLieGroup::so3();
        let b = path(1024, 2, 8);
        let p = b.linear_combination(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let t = integrate_group_sde(&g, &p, &g.identity(), Side::LeftActionRightInvariant).unwrap();
        assert!(t.defect <= 1e-10, "{}", t.defect);
        assert!(!t.flagged);
    }

    #[test]
    fn sides_agree_for_abelian_groups() {
        let g = MatrixLieGroup::pos_diag(2);
        let p = path(64, 2, 1);
        let a = integrate_group_sde(&g, &p, &g.identity(), Side::LeftActionRightInvariant).unwrap();
        let b = stochastic_exponential(&g, &p).unwrap();
        assert!(a.max_deviation(&b) <= 1e-14);
    }

    #[test]
    fn left_invariant_side_right_multiplies() {
        let g = MatrixLieGroup::affine1();
        let p = path(4, 2, 2);
        let t = stochastic_exponential(&g, &p).unwrap();
        let mut acc = g.identity();
        for k in 0..4 {
            acc = &acc * expm(&g.algebra_element(&p.increment(k)));
        }
        assert_eq!(t.terminal(), &acc);
    }

    #[test]
    fn translation_by_identity_is_identity() {
        let g = MatrixLieGroup::affine1();
        let t = integrate_group_sde(&g, &path(16, 2, 0), &g.identity(), Side::LeftActionRightInvariant).unwrap();
        let tr = translate_solution(&t, &g.identity()).unwrap();
        assert_eq!(tr.elements, t.elements);
        let shifted = integrate_group_sde(
            &g,
            &path(16, 2, 0),
            &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            Side::LeftActionRightInvariant,
        )
        .unwrap();
        assert!(matches!(translate_solution(&shifted, &g.identity()), Err(Error::NotIdentityStart(_))));
    }

    #[test]
    fn membership_defects() {
        assert_eq!(membership_defect(&GroupKind::Affine1, &DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])), f64::INFINITY);
        assert_eq!(membership_defect(&GroupKind::PosDiag(2), &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0])), 0.5);
        assert_eq!(membership_defect(&GroupKind::Heisenberg, &MatrixLieGroup::heisenberg().identity()), 0.0);
    }

    #[test]
    fn trivial_action_is_constant() {
        let g = MatrixLieGroup::so3();
        let p = path(16, 3, 5);
        let t = integrate_group_sde(&g, &p, &g.identity(), Side::LeftActionRightInvariant).unwrap();
        let m = one_point_motion(&t, |_, z| z.to_vec(), &[1.0, 2.0, 3.0]);
        assert!(m.states.iter().all(|s| s == &[1.0, 2.0, 3.0]));
    }

    #[test]
    fn isotropy_fixes_the_pole() {
        let g = MatrixLieGroup::so3();
        let b = path(256, 1, 3);
        let p = b.linear_combination(&[vec![0.0], vec![0.0], vec![1.0]]).unwrap();
        let t = integrate_group_sde(&g, &p, &g.identity(), Side::LeftActionRightInvariant).unwrap();
        let proj = project_homogeneous(&t, &[0.0, 0.0, 1.0]).unwrap();
        for z in &proj.trajectory.states {
            assert!(z[0].abs() <= 1e-15 && z[1].abs() <= 1e-15 && (z[2] - 1.0).abs() <= 1e-15);
        }
        assert!(matches!(project_homogeneous(&t, &[0.0, 0.0, 2.0]), Err(Error::NotUnitNorm(_))));
    }

    #[test]
    fn affine_action_on_the_line() {
        let g = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 0.0, 1.0]);
        assert_eq!(affine_action(&g, &[2.0]), vec![7.0]);
    }

    #[test]
    fn group_csv_has_defect_column() {
        let g = MatrixLieGroup::pos_diag(1);
        let t = integrate_group_sde(&g, &path(2, 1, 0), &g.identity(), Side::LeftActionRightInvariant).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,m00,defect\n"));
        assert_eq!(s.lines().count(), 4);
    }
}
