//! Time grids, driving paths and pathwise Stratonovich integration.
//!
//! All integrals use the trapezoid (midpoint) rule on the grid, so that
//! algebraic identities such as the shuffle relation
//! `B^(i) B^(j) = B^(i,j) + B^(j,i)` hold exactly at the discrete level.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{fmt_real, write_row};

/// Uniform grid `t_k = k * t_end / steps`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("steps must be at least 1".into()));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidGrid(format!("t_end must be positive, got {t_end}")));
        }
        Ok(Self { t_end, steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    /// Node `t_k`; the last node is `t_end` exactly.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentRole {
    Time,
    Brownian,
    Custom,
}

/// A discretized `R^l`-valued driving semimartingale on a [`TimeGrid`].
///
/// Values are stored per component; every component starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    grid: TimeGrid,
    components: Vec<Vec<f64>>,
    roles: Vec<ComponentRole>,
    seed: u64,
    path_index: u64,
}

impl DrivingPath {
    /// Path with no components on `grid`.
    pub fn empty(grid: TimeGrid) -> Self {
        Self { grid, components: Vec::new(), roles: Vec::new(), seed: 0, path_index: 0 }
    }

    /// Builds a path from tabulated components. Each component must have
    /// `grid.len()` values starting at zero; `Time` components must equal
    /// the grid nodes exactly.
    pub fn from_components(grid: TimeGrid, components: Vec<(ComponentRole, Vec<f64>)>) -> Result<Self> {
        let nodes = grid.nodes();
        let mut roles = Vec::with_capacity(components.len());
        let mut values = Vec::with_capacity(components.len());
        for (c, (role, v)) in components.into_iter().enumerate() {
            if v.len() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: v.len() });
            }
            if v[0] != 0.0 {
                return Err(Error::InvalidArgument(format!("component {c} does not start at zero")));
            }
            if role == ComponentRole::Time && v != nodes {
                return Err(Error::InvalidArgument(format!("time component {c} differs from grid nodes")));
            }
            roles.push(role);
            values.push(v);
        }
        Ok(Self { grid, components: values, roles, seed: 0, path_index: 0 })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn roles(&self) -> &[ComponentRole] {
        &self.roles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn component(&self, c: usize) -> Result<&[f64]> {
        self.components
            .get(c)
            .map(Vec::as_slice)
            .ok_or(Error::ComponentOutOfRange { index: c, dim: self.dim() })
    }

    /// `X^c_{t_k}`. Panics on out-of-range indices.
    pub fn value(&self, k: usize, c: usize) -> f64 {
        self.components[c][k]
    }

    /// The full vector `X_{t_k}`.
    pub fn row(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|v| v[k]).collect()
    }

    /// Increment vector `X_{t_{k+1}} - X_{t_k}`.
    pub fn increment(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|v| v[k + 1] - v[k]).collect()
    }

    /// Returns the path with a `Time` component prepended at index 0.
    pub fn with_time_component(&self) -> DrivingPath {
        let mut components = Vec::with_capacity(self.dim() + 1);
        components.push(self.grid.nodes());
        components.extend(self.components.iter().cloned());
        let mut roles = vec![ComponentRole::Time];
        roles.extend_from_slice(&self.roles);
        DrivingPath { grid: self.grid, components, roles, seed: self.seed, path_index: self.path_index }
    }

    /// New path whose component `i` is `sum_c weights[i][c] * X^c`.
    /// Outputs are tagged `Custom`.
    pub fn linear_combination(&self, weights: &[Vec<f64>]) -> Result<DrivingPath> {
        let mut components = Vec::with_capacity(weights.len());
        for row in weights {
            if row.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), got: row.len() });
            }
            let v: Vec<f64> = (0..self.grid.len())
                .map(|k| row.iter().zip(&self.components).map(|(w, x)| w * x[k]).sum())
                .collect();
            components.push(v);
        }
        let roles = vec![ComponentRole::Custom; components.len()];
        Ok(DrivingPath { grid: self.grid, components, roles, seed: self.seed, path_index: self.path_index })
    }

    /// Keeps every `factor`-th node. Increments of the coarse path are sums
    /// of the fine increments they cover.
    pub fn coarsen(&self, factor: usize) -> Result<DrivingPath> {
        if factor == 0 || !self.grid.steps.is_multiple_of(factor) {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {} steps by factor {factor}",
                self.grid.steps
            )));
        }
        let grid = TimeGrid::new(self.grid.t_end, self.grid.steps / factor)?;
        let nodes = grid.nodes();
        let components = self
            .components
            .iter()
            .zip(&self.roles)
            .map(|(v, role)| match role {
                ComponentRole::Time => nodes.clone(),
                _ => v.iter().step_by(factor).copied().collect(),
            })
            .collect();
        Ok(DrivingPath {
            grid,
            components,
            roles: self.roles.clone(),
            seed: self.seed,
            path_index: self.path_index,
        })
    }

    /// CSV dump: header `t,x0,x1,...`, one row per node.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim()).map(|c| format!("x{c}")));
        write_row(w, &header)?;
        for k in 0..self.grid.len() {
            let mut cells = vec![fmt_real(self.grid.node(k))];
            cells.extend(self.components.iter().map(|v| fmt_real(v[k])));
            write_row(w, &cells)?;
        }
        Ok(())
    }
}

/// Samples a `dims`-dimensional Brownian path on `grid`.
///
/// The generator is ChaCha20 keyed by `seed` with `path_index` as its
/// stream id, so each path is a pure function of `(seed, path_index)` and
/// Monte Carlo loops give the same answer under any thread schedule.
pub fn sample_brownian(grid: TimeGrid, dims: usize, seed: u64, path_index: u64) -> Result<DrivingPath> {
    if dims == 0 {
        return Err(Error::InvalidArgument("Brownian path needs at least one dimension".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    let sd = grid.step().sqrt();
    let mut components = vec![vec![0.0; grid.len()]; dims];
    for k in 0..grid.steps() {
        for comp in components.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            comp[k + 1] = comp[k] + sd * z;
        }
    }
    Ok(DrivingPath {
        grid,
        components,
        roles: vec![ComponentRole::Brownian; dims],
        seed,
        path_index,
    })
}

/// Cumulative midpoint-rule integral `int_0^{t_k} f delta X^c`.
pub fn stratonovich_integral(integrand: &[f64], path: &DrivingPath, component: usize) -> Result<Vec<f64>> {
    let x = path.component(component)?;
    if integrand.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: integrand.len() });
    }
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    let mut acc = 0.0;
    for k in 0..x.len() - 1 {
        acc += 0.5 * (integrand[k] + integrand[k + 1]) * (x[k + 1] - x[k]);
        out.push(acc);
    }
    Ok(out)
}

/// An ordered multi-index `(j_1, ..., j_n)`; index 0 refers to the time
/// component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyMultiIndex);
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.len()
    }

    /// Size plus the number of zero entries.
    pub fn degree(&self) -> usize {
        self.0.len() + self.0.iter().filter(|&&j| j == 0).count()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|j| j.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub fn degree(j: &MultiIndex) -> usize {
    j.degree()
}

/// Lazily computed iterated integrals `B^J` of one path.
///
/// `B^(j)` is the path component `j`; `B^(J, j) = int B^J delta X^j`.
#[derive(Debug)]
pub struct IteratedIntegralTable<'a> {
    path: &'a DrivingPath,
    cache: HashMap<Vec<usize>, Vec<f64>>,
}

impl<'a> IteratedIntegralTable<'a> {
    pub fn new(path: &'a DrivingPath) -> Self {
        Self { path, cache: HashMap::new() }
    }

    pub fn path(&self) -> &DrivingPath {
        self.path
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    /// `B^J` at every grid node.
    pub fn get(&mut self, j: &MultiIndex) -> Result<&[f64]> {
        self.fill(j.entries())?;
        Ok(&self.cache[j.entries()])
    }

    /// `B^J_{t_k}`.
    pub fn at(&mut self, j: &MultiIndex, k: usize) -> Result<f64> {
        Ok(self.get(j)?[k])
    }

    fn fill(&mut self, entries: &[usize]) -> Result<()> {
        if self.cache.contains_key(entries) {
            return Ok(());
        }
        let (&last, prefix) = entries.split_last().ok_or(Error::EmptyMultiIndex)?;
        let values = if prefix.is_empty() {
            self.path.component(last)?.to_vec()
        } else {
            self.fill(prefix)?;
            stratonovich_integral(&self.cache[prefix], self.path, last)?
        };
        self.cache.insert(entries.to_vec(), values);
        Ok(())
    }
}

pub fn iterated_integral(table: &mut IteratedIntegralTable<'_>, j: &MultiIndex) -> Result<Vec<f64>> {
    table.get(j).map(<[f64]>::to_vec)
}
