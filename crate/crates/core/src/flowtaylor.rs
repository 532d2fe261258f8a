//! Stochastic Taylor expansion of the flow.
//!
//! For fields `Y_0..Y_r` driven by `(t, B^1..B^r)` the solution from `z` is
//! `exp(zeta_t)(z)` with `zeta_t = sum_J beta_J B_t^J`, summed over
//! multi-indices `J` over `{0..r}`. Truncating at degree `N` (size plus
//! number of zeros) gives `zeta_t^N`, whose remainder scales like
//! `t^{(N+1)/2}`.
//!
//! `beta_J = sum_{sigma in S_n} (-1)^{e(sigma)} / (n^2 C(n-1, e(sigma))) Y_{sigma(J)}`,
//! with `e(sigma)` the number of descents of `sigma` and
//! `Y_{(k_1..k_n)} = [Y_{k_1}, [Y_{k_2}, ..., [Y_{k_{n-1}}, Y_{k_n}]]]`.

use std::collections::HashMap;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::PolyVectorField;
use crate::io::{fmt_real, write_row};
use crate::noise::{sample_brownian, IteratedIntegralTable, MultiIndex, TimeGrid};
use crate::sde::{integrate_heun, log_log_slope, StratonovichSystem};

/// Default cap on `size(J)`; the permutation sum has `size(J)!` terms.
pub const DEFAULT_MAX_SIZE: usize = 5;
/// Default cap on the number of noise fields `r`.
pub const DEFAULT_MAX_NOISE: usize = 4;
/// Steps of the fourth-order flow integrator used by [`taylor_flow`].
pub const TAYLOR_ODE_STEPS: usize = 64;
/// Mean errors at or below this level are treated as round-off.
pub const REMAINDER_FLOOR: f64 = 1e-10;

/// Limits guarding the factorial cost of the expansion. Raising them is
/// allowed but `beta` costs `size(J)!` brackets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaylorOptions {
    pub max_size: usize,
    pub max_noise: usize,
    pub ode_steps: usize,
}

impl Default for TaylorOptions {
    fn default() -> Self {
        Self { max_size: DEFAULT_MAX_SIZE, max_noise: DEFAULT_MAX_NOISE, ode_steps: TAYLOR_ODE_STEPS }
    }
}

/// Multi-indices over `{0..r}` with degree at most `n`, ordered by degree
/// then lexicographically.
pub fn enumerate_multiindices(r: usize, n: usize) -> Result<Vec<MultiIndex>> {
    if r == 0 || n == 0 {
        return Err(Error::InvalidArgument("enumeration needs r >= 1 and N >= 1".into()));
    }
    let mut words: Vec<Vec<usize>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for w in &frontier {
            for letter in 0..=r {
                let mut v = w.clone();
                v.push(letter);
                let deg = v.len() + v.iter().filter(|&&j| j == 0).count();
                if deg <= n {
                    next.push(v);
                }
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    let mut out: Vec<MultiIndex> = words.into_iter().map(|w| MultiIndex::new(w).expect("non-empty")).collect();
    out.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| a.entries().cmp(b.entries())));
    Ok(out)
}

/// The value of `beta_J` as a vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketCoefficient {
    pub j: MultiIndex,
    pub field: PolyVectorField,
}

/// `(-1)^e / (n^2 C(n-1, e))`.
pub fn permutation_weight(n: usize, descents: usize) -> f64 {
    let sign = if descents.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / ((n * n) as f64 * binomial(n - 1, descents))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn descents(perm: &[usize]) -> usize {
    perm.windows(2).filter(|w| w[0] > w[1]).count()
}

/// Advances to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot has a successor");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn nested_bracket(
    word: &[usize],
    fields: &[PolyVectorField],
    memo: &mut HashMap<Vec<usize>, PolyVectorField>,
) -> Result<PolyVectorField> {
    if let Some(f) = memo.get(word) {
        return Ok(f.clone());
    }
    let f = if word.len() == 1 {
        fields[word[0]].clone()
    } else {
        let inner = nested_bracket(&word[1..], fields, memo)?;
        if inner.is_zero() {
            inner
        } else {
            fields[word[0]].bracket(&inner)?
        }
    };
    memo.insert(word.to_vec(), f.clone());
    Ok(f)
}

/// `beta_J` with the default size cap.
pub fn beta(j: &MultiIndex, fields: &[PolyVectorField]) -> Result<BracketCoefficient> {
    beta_with_cap(j, fields, DEFAULT_MAX_SIZE)
}

pub fn beta_with_cap(j: &MultiIndex, fields: &[PolyVectorField], max_size: usize) -> Result<BracketCoefficient> {
    beta_memo(j, fields, max_size, &mut HashMap::new())
}

fn beta_memo(
    j: &MultiIndex,
    fields: &[PolyVectorField],
    max_size: usize,
    memo: &mut HashMap<Vec<usize>, PolyVectorField>,
) -> Result<BracketCoefficient> {
    let n = j.size();
    if n > max_size {
        return Err(Error::SizeCapExceeded { size: n, cap: max_size });
    }
    if let Some(&bad) = j.entries().iter().find(|&&k| k >= fields.len()) {
        return Err(Error::ComponentOutOfRange { index: bad, dim: fields.len() });
    }
    let dim = fields[0].dim();
    let mut field = PolyVectorField::zero(dim);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let word: Vec<usize> = perm.iter().map(|&s| j.entries()[s]).collect();
        let y = nested_bracket(&word, fields, memo)?;
        if !y.is_zero() {
            field = field.axpy(permutation_weight(n, descents(&perm)), &y)?;
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(BracketCoefficient { j: j.clone(), field })
}

/// Fourth-order Runge-Kutta flow of `V` over unit time.
pub fn flow_exp(v: &PolyVectorField, z: &[f64], ode_steps: usize) -> Result<Vec<f64>> {
    if ode_steps == 0 {
        return Err(Error::InvalidArgument("ode_steps must be at least 1".into()));
    }
    let mut y = z.to_vec();
    v.evaluate(&y)?;
    let h = 1.0 / ode_steps as f64;
    let shifted = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for _ in 0..ode_steps {
        let k1 = v.eval_unchecked(&y);
        let k2 = v.eval_unchecked(&shifted(&y, &k1, 0.5 * h));
        let k3 = v.eval_unchecked(&shifted(&y, &k2, 0.5 * h));
        let k4 = v.eval_unchecked(&shifted(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(y)
}

/// `zeta^N` at one node: the terms `(J, B^J, beta_J)` and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedLogFlow {
    pub n: usize,
    pub terms: Vec<(MultiIndex, f64, PolyVectorField)>,
    pub zeta: PolyVectorField,
}

impl TruncatedLogFlow {
    /// Assembles `zeta^N` from the fields `Y_0..Y_r` and the iterated
    /// integrals of the path `(t, B^1..B^r)` at `t_node`.
    pub fn assemble(
        fields: &[PolyVectorField],
        table: &mut IteratedIntegralTable<'_>,
        n: usize,
        t_node: usize,
        options: &TaylorOptions,
    ) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::InvalidArgument("need a drift field and at least one noise field".into()));
        }
        let r = fields.len() - 1;
        if r > options.max_noise {
            return Err(Error::SizeCapExceeded { size: r, cap: options.max_noise });
        }
        if table.path().dim() != fields.len() {
            return Err(Error::DimensionMismatch { expected: fields.len(), got: table.path().dim() });
        }
        let dim = fields[0].dim();
        if let Some(f) = fields.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
        }
        if t_node >= table.path().grid().len() {
            return Err(Error::InvalidArgument(format!("node {t_node} is beyond the grid")));
        }
        let mut memo = HashMap::new();
        let mut zeta = PolyVectorField::zero(dim);
        let mut terms = Vec::new();
        for j in enumerate_multiindices(r, n)? {
            let b = beta_memo(&j, fields, options.max_size, &mut memo)?;
            if b.field.is_zero() {
                continue;
            }
            let value = table.at(&j, t_node)?;
            zeta = zeta.axpy(value, &b.field)?;
            terms.push((j, value, b.field));
        }
        Ok(Self { n, terms, zeta })
    }

    pub fn flow(&self, z: &[f64], ode_steps: usize) -> Result<Vec<f64>> {
        flow_exp(&self.zeta, z, ode_steps)
    }
}

/// `exp(zeta^N_{t_node})(z)`.
pub fn taylor_flow(
    fields: &[PolyVectorField],
    table: &mut IteratedIntegralTable<'_>,
    n: usize,
    z: &[f64],
    t_node: usize,
) -> Result<Vec<f64>> {
    let options = TaylorOptions::default();
    TruncatedLogFlow::assemble(fields, table, n, t_node, &options)?.flow(z, options.ode_steps)
}

/// Remainder study: the truncated flow against a Heun reference on the
/// same path, at several horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderStudy {
    pub n: usize,
    pub t_list: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    /// Steps of the path on `[0, t]` used for both the iterated integrals
    /// and the reference solution.
    pub steps: usize,
}

impl RemainderStudy {
    pub fn new(n: usize, t_list: Vec<f64>, n_paths: usize, seed: u64) -> Self {
        Self { n, t_list, n_paths, seed, steps: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    pub n: usize,
    pub t_list: Vec<f64>,
    pub mean_errors: Vec<f64>,
    pub slope: f64,
    /// All errors are at round-off level, so the slope carries no
    /// information.
    pub at_floor: bool,
}

impl RemainderReport {
    /// CSV: `t,N,mean_err,slope`.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W, header: bool) -> io::Result<()> {
        if header {
            write_row(w, &["t".into(), "N".into(), "mean_err".into(), "slope".into()])?;
        }
        for (t, e) in self.t_list.iter().zip(&self.mean_errors) {
            write_row(w, &[fmt_real(*t), self.n.to_string(), fmt_real(*e), fmt_real(self.slope)])?;
        }
        Ok(())
    }
}

/// Log-log slope of the mean terminal error of `exp(zeta^N_t)(z)` against
/// a Heun solution on the same path, over `t_list`. Each path carries
/// `Y_0` on the time component and `Y_j` on Brownian component `j`.
pub fn remainder_slope(fields: &[PolyVectorField], z: &[f64], study: &RemainderStudy) -> Result<RemainderReport> {
    if study.t_list.len() < 2 {
        return Err(Error::SlopeUndefined("need at least two horizons".into()));
    }
    if study.n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be positive".into()));
    }
    if fields.len() < 2 {
        return Err(Error::InvalidArgument("need a drift field and at least one noise field".into()));
    }
    let r = fields.len() - 1;
    let identity: Vec<Vec<f64>> = (0..=r).map(|i| (0..=r).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let sys = StratonovichSystem::with_constant_coeffs(fields.to_vec(), &identity)?;
    let options = TaylorOptions::default();
    let mut mean_errors = Vec::with_capacity(study.t_list.len());
    for &t in &study.t_list {
        let grid = TimeGrid::new(t, study.steps)?;
        let errors: Vec<f64> = (0..study.n_paths as u64)
            .into_par_iter()
            .map(|p| -> Result<f64> {
                let path = sample_brownian(grid, r, study.seed, p)?.with_time_component();
                let reference = integrate_heun(&sys, &path, z)?;
                let mut table = IteratedIntegralTable::new(&path);
                let approx = TruncatedLogFlow::assemble(fields, &mut table, study.n, grid.steps(), &options)?
                    .flow(z, options.ode_steps)?;
                let err = approx
                    .iter()
                    .zip(reference.terminal())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                Ok(err)
            })
            .collect::<Result<_>>()?;
        mean_errors.push(errors.iter().sum::<f64>() / errors.len() as f64);
    }
    let at_floor = mean_errors.iter().all(|&e| e <= REMAINDER_FLOOR);
    let slope = if at_floor { f64::NAN } else { log_log_slope(&study.t_list, &mean_errors)? };
    Ok(RemainderReport { n: study.n, t_list: study.t_list.clone(), mean_errors, slope, at_floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Polynomial;
    use crate::noise::DrivingPath;

    fn idx(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    fn heisenberg_fields() -> Vec<PolyVectorField> {
        let y2 = PolyVectorField::from_terms(2, [(1, 1.0, vec![1, 0])]).unwrap();
        vec![PolyVectorField::zero(2), PolyVectorField::partial(2, 0), y2]
    }

    fn bm(t: f64, k: usize, r: usize, seed: u64) -> DrivingPath {
        sample_brownian(TimeGrid::new(t, k).unwrap(), r, seed, 0).unwrap().with_time_component()
    }

    #[test]
    fn enumeration_examples() {
        let show = |v: Vec<MultiIndex>| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        assert_eq!(show(enumerate_multiindices(1, 1).unwrap()), "(1)");
        assert_eq!(show(enumerate_multiindices(1, 2).unwrap()), "(1) (0) (1,1)");
        assert_eq!(
            show(enumerate_multiindices(2, 2).unwrap()),
            "(1) (2) (0) (1,1) (1,2) (2,1) (2,2)"
        );
        assert!(enumerate_multiindices(0, 2).is_err());
    }

    #[test]
    fn enumeration_counts_and_degrees() {
        let v = enumerate_multiindices(2, 4).unwrap();
        assert!(v.iter().all(|j| j.degree() <= 4));
        assert!(v.windows(2).all(|w| w[0].degree() <= w[1].degree()));
        // Degree-n words: a(n) = r a(n-1) + a(n-2) with a(1) = r, a(2) = r^2 + 1.
        let count = |d| v.iter().filter(|j| j.degree() == d).count();
        assert_eq!((count(1), count(2), count(3), count(4)), (2, 5, 12, 29));
    }

    #[test]
    fn weights() {
        assert_eq!(permutation_weight(1, 0), 1.0);
        assert_eq!(permutation_weight(2, 0), 0.25);
        assert_eq!(permutation_weight(2, 1), -0.25);
        assert_eq!(permutation_weight(3, 1), -1.0 / 18.0);
        let mut p = vec![0, 1, 2];
        let mut total = 0.0;
        loop {
            total += permutation_weight(3, descents(&p)).abs();
            if !next_permutation(&mut p) {
                break;
            }
        }
        assert!((total - (1.0 / 9.0 + 4.0 / 18.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn beta_low_levels() {
        let f = heisenberg_fields();
        assert_eq!(beta(&idx(&[2]), &f).unwrap().field, f[2]);
        let b12 = beta(&idx(&[1, 2]), &f).unwrap().field;
        assert_eq!(b12, f[1].bracket(&f[2]).unwrap().scale(0.5));
        let b21 = beta(&idx(&[2, 1]), &f).unwrap().field;
        assert!(b12.add(&b21).unwrap().is_zero());
        assert!(beta(&idx(&[1, 1]), &f).unwrap().field.is_zero());
        assert!(matches!(
            beta(&idx(&[1, 2, 1, 2, 1, 2]), &f),
            Err(Error::SizeCapExceeded { size: 6, cap: 5 })
        ));
    }

    #[test]
    fn beta_level_three_matches_hand_expansion() {
        // For J = (1,2,2): beta = (1/6)[[Y1,Y2],Y2] after collecting the six
        // permutation terms.
        let y1 = PolyVectorField::partial(1, 0);
        let y2 = PolyVectorField::from_terms(1, [(0, 1.0, vec![2])]).unwrap();
        let f = vec![PolyVectorField::zero(1), y1.clone(), y2.clone()];
        let got = beta(&idx(&[1, 2, 2]), &f).unwrap().field;
        let expect = y1.bracket(&y2).unwrap().bracket(&y2).unwrap().scale(1.0 / 6.0);
        assert!(got.approx_eq(&expect, 1e-14), "{got:?}");
    }

    #[test]
    fn flow_exp_examples() {
        let z = [0.3, -1.0];
        assert_eq!(flow_exp(&PolyVectorField::zero(2), &z, 8).unwrap(), z.to_vec());
        let c = flow_exp(&PolyVectorField::constant(&[1.5, -2.0]), &z, 8).unwrap();
        assert!((c[0] - 1.8).abs() < 1e-15 && (c[1] + 3.0).abs() < 1e-15);
        // On V = x d/dx each step multiplies by the degree-4 Taylor
        // polynomial of e^h, so 64 steps give e only to ~1.35e-9.
        let lin = PolyVectorField::linear(&[vec![1.0]]);
        let e64 = flow_exp(&lin, &[1.0], 64).unwrap()[0];
        let h: f64 = 1.0 / 64.0;
        let stability = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((e64 - stability.powi(64)).abs() <= 1e-13);
        assert!((e64 - std::f64::consts::E).abs() <= 1.5e-9);
        let e128 = flow_exp(&lin, &[1.0], 128).unwrap()[0];
        assert!((e128 - std::f64::consts::E).abs() <= 1e-10);
        let blow = PolyVectorField::from_terms(1, [(0, 1.0, vec![2])]).unwrap();
        assert!(matches!(flow_exp(&blow, &[1e200], 4), Err(Error::NonFinite)));
        assert!(flow_exp(&blow, &[1.0], 0).is_err());
    }

    #[test]
    fn heisenberg_is_exact_at_level_two() {
        let f = heisenberg_fields();
        let sys = StratonovichSystem::with_constant_coeffs(
            f.clone(),
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let z = [0.4, -0.3];
        for seed in 0..4 {
            let path = bm(1.0, 512, 2, seed);
            let exact = integrate_heun(&sys, &path, &z).unwrap();
            let mut table = IteratedIntegralTable::new(&path);
            for k in [1, 100, 512] {
                let got = taylor_flow(&f, &mut table, 2, &z, k).unwrap();
                let want = &exact.states[k];
                assert!((got[0] - want[0]).abs() <= 1e-10 && (got[1] - want[1]).abs() <= 1e-10);
                // Level one misses exactly B^{(1,2)} - B^1 B^2 / 2.
                let n1 = taylor_flow(&f, &mut table, 1, &z, k).unwrap();
                let b12 = table.at(&idx(&[1, 2]), k).unwrap();
                let miss = b12 - 0.5 * path.value(k, 1) * path.value(k, 2);
                assert!((want[1] - n1[1] - miss).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn common_zero_is_fixed() {
        let y1 = PolyVectorField::linear(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let y2 = PolyVectorField::from_terms(2, [(0, 1.0, vec![1, 1]), (1, -1.0, vec![2, 0])]).unwrap();
        let f = vec![y1.clone(), y1, y2];
        let path = bm(1.0, 64, 2, 3);
        let mut table = IteratedIntegralTable::new(&path);
        for n in 1..=4 {
            assert_eq!(taylor_flow(&f, &mut table, n, &[0.0, 0.0], 64).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn abelian_gbm_matches_closed_form() {
        let (mu, sigma) = (0.8, 0.6);
        let q = |c| PolyVectorField::from_components(vec![Polynomial::from_terms(1, [(c, vec![1])])]).unwrap();
        let f = vec![q(mu - 0.5 * sigma * sigma), q(sigma)];
        let path = bm(1.0, 256, 1, 11);
        let mut table = IteratedIntegralTable::new(&path);
        for k in [64, 256] {
            let t = path.grid().node(k);
            let exact = 1.5 * ((mu - 0.5 * sigma * sigma) * t + sigma * path.value(k, 1)).exp();
            // N=2 brings in the drift index (0); level-2 brackets vanish.
            let got = taylor_flow(&f, &mut table, 2, &[1.5], k).unwrap();
            assert!((got[0] - exact).abs() <= 1e-8, "{} vs {exact}", got[0]);
        }
        // With zero drift the N=1 truncation already equals exp(sum Y_j B^j).
        let g = vec![q(0.0), q(sigma)];
        let n1 = taylor_flow(&g, &mut table, 1, &[1.5], 256).unwrap();
        assert!((n1[0] - 1.5 * (sigma * path.value(256, 1)).exp()).abs() <= 1e-8);
    }

    #[test]
    fn heisenberg_remainder_slopes() {
        let f = heisenberg_fields();
        let ts: Vec<f64> = (2..=6).rev().map(|e| 2f64.powi(-e)).collect();
        let mut study = RemainderStudy::new(1, ts.clone(), 64, 5);
        study.steps = 256;
        let r1 = remainder_slope(&f, &[0.4, -0.3], &study).unwrap();
        assert!(!r1.at_floor);
        assert!((r1.slope - 1.0).abs() <= 0.3, "{}", r1.slope);
        study.n = 2;
        let r2 = remainder_slope(&f, &[0.4, -0.3], &study).unwrap();
        assert!(r2.at_floor, "{:?}", r2.mean_errors);
        let mut buf = Vec::new();
        r1.write_csv(&mut buf, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }

    #[test]
    fn sl2_remainder_order_increases() {
        let f = vec![
            PolyVectorField::zero(1),
            PolyVectorField::partial(1, 0),
            PolyVectorField::from_terms(1, [(0, 1.0, vec![2])]).unwrap(),
        ];
        let ts: Vec<f64> = (2..=6).rev().map(|e| 2f64.powi(-e)).collect();
        let mut study = RemainderStudy::new(2, ts, 64, 9);
        study.steps = 256;
        let r2 = remainder_slope(&f, &[0.5], &study).unwrap();
        study.n = 3;
        let r3 = remainder_slope(&f, &[0.5], &study).unwrap();
        assert!(r3.slope > r2.slope);
        assert!(r2.slope >= 1.5 - 0.3 && r3.slope >= 2.0 - 0.3);
    }

    #[test]
    fn single_horizon_is_rejected() {
        let study = RemainderStudy::new(1, vec![0.5], 4, 0);
        assert!(matches!(remainder_slope(&heisenberg_fields(), &[0.0, 0.0], &study), Err(Error::SlopeUndefined(_))));
    }
}
