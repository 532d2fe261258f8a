//! Wei-Norman coordinates of the second kind.
//!
//! The identity-started right-invariant solution is written as
//! `Gamma_t = exp(d^1 xi_1) ... exp(d^l xi_l)`. Differentiating gives
//! `dX = M(d) dd` where column `i` of `M(d)` is
//! `Ad_{exp(d^1 xi_1) ... exp(d^{i-1} xi_{i-1})} xi_i` in basis coordinates;
//! the coordinates are integrated from `dd = M(d)^{-1} dX`.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::group::{GroupTrajectory, MatrixLieGroup};
use crate::io::{fmt_real, write_row};
use crate::noise::{stratonovich_integral, DrivingPath, TimeGrid};

/// Condition number of `M(d)` beyond which the chart is considered left.
pub const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct WeiNormanState {
    pub d: Vec<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct WeiNormanRun {
    pub grid: TimeGrid,
    pub states: Vec<WeiNormanState>,
    /// First node at which `M(d)` became ill-conditioned.
    pub singular_index: Option<usize>,
    /// Reconstructed `prod_i exp(d^i xi_i)`; NaN after `singular_index`.
    pub trajectory: GroupTrajectory,
}

impl WeiNormanRun {
    /// CSV: `t,d0,...,d{l-1},valid`.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        write_states_csv(&self.grid, &self.states, w)
    }
}

pub fn write_states_csv<W: Write + ?Sized>(grid: &TimeGrid, states: &[WeiNormanState], w: &mut W) -> io::Result<()> {
    let l = states.first().map_or(0, |s| s.d.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..l).map(|i| format!("d{i}")));
    header.push("valid".into());
    write_row(w, &header)?;
    for (k, s) in states.iter().enumerate() {
        let mut cells = vec![fmt_real(grid.node(k))];
        cells.extend(s.d.iter().map(|&x| fmt_real(x)));
        cells.push(if s.valid { "1".into() } else { "0".into() });
        write_row(w, &cells)?;
    }
    Ok(())
}

/// `M(d)`; the empty product for `i = 1` is the identity.
pub fn wn_matrix(group: &MatrixLieGroup, d: &[f64]) -> Result<DMatrix<f64>> {
    let l = group.dim();
    if d.len() != l {
        return Err(Error::DimensionMismatch { expected: l, got: d.len() });
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut m = DMatrix::zeros(l, l);
    let mut prefix = group.identity();
    for (i, xi) in group.basis().iter().enumerate() {
        let col = group.coordinates(&group.adjoint(&prefix, xi)?)?;
        m.set_column(i, &DVector::from_vec(col));
        prefix = &prefix * expm(&(xi * d[i]));
    }
    Ok(m)
}

/// `prod_i exp(d^i xi_i)` in basis order.
pub fn reconstruct(group: &MatrixLieGroup, d: &[f64]) -> DMatrix<f64> {
    group
        .basis()
        .iter()
        .zip(d)
        .fold(group.identity(), |acc, (xi, &di)| acc * expm(&(xi * di)))
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// `M(d)^{-1} dx`, or `None` when `M(d)` is ill-conditioned.
fn coordinate_rate(group: &MatrixLieGroup, d: &[f64], dx: &DVector<f64>) -> Result<Option<DVector<f64>>> {
    let m = wn_matrix(group, d)?;
    let cond = condition_number(&m);
    if cond.is_nan() || cond > CONDITION_LIMIT {
        return Ok(None);
    }
    Ok(m.lu().solve(dx))
}

/// Integrates the Wei-Norman coordinates with the Stratonovich-Heun
/// scheme and reconstructs the group solution.
pub fn integrate_wei_norman(group: &MatrixLieGroup, path: &DrivingPath) -> Result<WeiNormanRun> {
    let l = group.dim();
    if path.dim() != l {
        return Err(Error::DimensionMismatch { expected: l, got: path.dim() });
    }
    let grid = *path.grid();
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    coords.push(vec![0.0; l]);
    let mut singular_index = None;
    for k in 0..grid.steps() {
        let dx = DVector::from_vec(path.increment(k));
        let d = &coords[k];
        let Some(f0) = coordinate_rate(group, d, &dx)? else {
            singular_index = Some(k);
            break;
        };
        let pred: Vec<f64> = d.iter().zip(f0.iter()).map(|(a, b)| a + b).collect();
        let f1 = if pred.iter().all(|x| x.is_finite()) { coordinate_rate(group, &pred, &dx)? } else { None };
        let Some(f1) = f1 else {
            singular_index = Some(k + 1);
            break;
        };
        let next: Vec<f64> = d.iter().zip(f0.iter().zip(f1.iter())).map(|(a, (p, q))| a + 0.5 * (p + q)).collect();
        coords.push(next);
    }
    if let Some(s) = singular_index {
        coords.truncate(s);
    }
    let valid_len = coords.len();
    let nan = DMatrix::from_element(group.matrix_size(), group.matrix_size(), f64::NAN);
    let mut elements: Vec<DMatrix<f64>> = coords.iter().map(|d| reconstruct(group, d)).collect();
    elements.resize(grid.len(), nan);
    let mut states: Vec<WeiNormanState> = coords.into_iter().map(|d| WeiNormanState { d, valid: true }).collect();
    states.resize(grid.len(), WeiNormanState { d: vec![f64::NAN; l], valid: false });
    let mut trajectory = GroupTrajectory {
        grid,
        kind: group.kind().clone(),
        defects: elements.iter().map(|g| group.membership_defect(g)).collect(),
        elements,
        defect: 0.0,
        tolerance: group.tolerance(),
        flagged: false,
    };
    trajectory.defect = trajectory.defects[..valid_len].iter().copied().fold(0.0, f64::max);
    trajectory.flagged = trajectory.defect > group.tolerance();
    Ok(WeiNormanRun { grid, states, singular_index, trajectory })
}

/// Closed-form coordinates for the affine group with ordering
/// `(xi_0, xi_1)` on the path `(X^0, X^1)`:
/// `d^1 = X^1`, `d^0_t = e^{X^1_t} int_0^t e^{-X^1_s} delta X^0_s`.
pub fn affine_closed_form(path: &DrivingPath) -> Result<Vec<WeiNormanState>> {
    if path.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: path.dim() });
    }
    let x1 = path.component(1)?;
    let weight: Vec<f64> = x1.iter().map(|x| (-x).exp()).collect();
    let integral = stratonovich_integral(&weight, path, 0)?;
    Ok(x1
        .iter()
        .zip(&integral)
        .map(|(&x, &i)| WeiNormanState { d: vec![x.exp() * i, x], valid: true })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{integrate_group_sde, Side};
    use crate::noise::{sample_brownian, ComponentRole};

    fn bm(k: usize, dims: usize, seed: u64) -> DrivingPath {
        sample_brownian(TimeGrid::new(1.0, k).unwrap(), dims, seed, 0).unwrap()
    }

    #[test]
    fn matrix_at_origin_is_identity() {
        for g in [MatrixLieGroup::affine1(), MatrixLieGroup::so3(), MatrixLieGroup::heisenberg()] {
            let m = wn_matrix(&g, &vec![0.0; g.dim()]).unwrap();
            assert!((m - DMatrix::identity(g.dim(), g.dim())).abs().max() <= 1e-14);
        }
    }

    #[test]
    fn affine_matrix() {
        let g = MatrixLieGroup::affine1();
        for d in [[0.3, -1.2], [-2.0, 0.7], [5.0, 3.0]] {
            let m = wn_matrix(&g, &d).unwrap();
            let expect = DMatrix::from_row_slice(2, 2, &[1.0, -d[0], 0.0, 1.0]);
            assert!((m - expect).abs().max() <= 1e-14);
        }
    }

    #[test]
    fn abelian_matrix_is_identity() {
        let g = MatrixLieGroup::pos_diag(3);
        let m = wn_matrix(&g, &[0.4, -1.0, 2.5]).unwrap();
        assert!((m - DMatrix::identity(3, 3)).abs().max() <= 1e-14);
    }

    #[test]
    fn heisenberg_matrix_is_unipotent() {
        let g = MatrixLieGroup::heisenberg();
        let m = wn_matrix(&g, &[1.5, -0.5, 2.0]).unwrap();
        assert!((m.determinant() - 1.0).abs() <= 1e-14);
        for i in 0..3 {
            assert!((m[(i, i)] - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn zero_path() {
        let g = MatrixLieGroup::affine1();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let zero = DrivingPath::from_components(
            grid,
            vec![(ComponentRole::Custom, vec![0.0; 9]), (ComponentRole::Custom, vec![0.0; 9])],
        )
        .unwrap();
        let run = integrate_wei_norman(&g, &zero).unwrap();
        assert!(run.states.iter().all(|s| s.valid && s.d == [0.0, 0.0]));
        assert!(run.trajectory.elements.iter().all(|e| e == &g.identity()));
    }

    #[test]
    fn abelian_coordinates_are_the_path() {
        let g = MatrixLieGroup::pos_diag(2);
        let p = bm(512, 2, 6);
        let run = integrate_wei_norman(&g, &p).unwrap();
        for (k, s) in run.states.iter().enumerate() {
            for i in 0..2 {
                assert!((s.d[i] - p.value(k, i)).abs() <= 1e-12);
            }
        }
        let direct = integrate_group_sde(&g, &p, &g.identity(), Side::LeftActionRightInvariant).unwrap();
        assert!(run.trajectory.max_deviation(&direct) <= 1e-12);
        assert_eq!(run.states[0].d, vec![0.0, 0.0]);
    }

    #[test]
    fn affine_coordinates_match_closed_form() {
        let g = MatrixLieGroup::affine1();
        let p = bm(1024, 1, 12).with_time_component();
        let run = integrate_wei_norman(&g, &p).unwrap();
        assert!(run.singular_index.is_none());
        let exact = affine_closed_form(&p).unwrap();
        let mut dev0: f64 = 0.0;
        for (k, (a, b)) in run.states.iter().zip(&exact).enumerate() {
            assert!((a.d[1] - p.value(k, 1)).abs() <= 1e-12);
            dev0 = dev0.max((a.d[0] - b.d[0]).abs());
        }
        assert!(dev0 <= 2e-3, "{dev0}");
    }

    #[test]
    fn closed_form_special_cases() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let b = bm(16, 1, 0);
        let x0_only = DrivingPath::from_components(
            grid,
            vec![
                (ComponentRole::Custom, b.component(0).unwrap().to_vec()),
                (ComponentRole::Custom, vec![0.0; 17]),
            ],
        )
        .unwrap();
        for (s, k) in affine_closed_form(&x0_only).unwrap().iter().zip(0..) {
            assert!((s.d[0] - b.value(k, 0)).abs() <= 1e-15);
        }
        let x1_only = b.linear_combination(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(affine_closed_form(&x1_only).unwrap().iter().all(|s| s.d[0] == 0.0));
    }

    #[test]
    fn closed_form_deterministic_quadrature() {
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let t = grid.nodes();
        let p = DrivingPath::from_components(grid, vec![(ComponentRole::Time, t.clone()), (ComponentRole::Custom, t)])
            .unwrap();
        let d0 = affine_closed_form(&p).unwrap()[1024].d[0];
        assert!((d0 - (std::f64::consts::E - 1.0)).abs() <= 1e-5);
    }

    #[test]
    fn singular_chart_is_detected() {
        // so(3) with ordering (L_x, L_y, L_z): the middle angle reaching
        // pi/2 makes M(d) singular (gimbal lock). Pure L_y driving moves
        // d^2 by exactly the increment, so the lock is hit at node 32.
        let g = MatrixLieGroup::so3();
        let m = wn_matrix(&g, &[0.0, std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        assert!(condition_number(&m) > CONDITION_LIMIT);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let ramp: Vec<f64> = grid.nodes().iter().map(|t| std::f64::consts::PI * t).collect();
        let p = DrivingPath::from_components(
            grid,
            vec![
                (ComponentRole::Custom, vec![0.0; 65]),
                (ComponentRole::Custom, ramp),
                (ComponentRole::Custom, vec![0.0; 65]),
            ],
        )
        .unwrap();
        let run = integrate_wei_norman(&g, &p).unwrap();
        assert_eq!(run.singular_index, Some(32));
        assert!(run.states[31].valid && !run.states[32].valid);
        assert!(run.states[40].d.iter().all(|x| x.is_nan()));
        assert!(run.trajectory.elements[32][(0, 0)].is_nan());
        assert!(run.trajectory.elements[31].iter().all(|x| x.is_finite()));
    }

    #[test]
    fn csv_layout() {
        let g = MatrixLieGroup::pos_diag(1);
        let run = integrate_wei_norman(&g, &bm(2, 1, 0)).unwrap();
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,d0,valid\n0.0000000000000000e0,0.0000000000000000e0,1\n"));
    }
}
