//! Polynomial vector fields on `R^n`.
//!
//! Brackets use the Jacobi-Lie convention
//! `[Y1, Y2] = DY2 . Y1 - DY1 . Y2`, i.e. the commutator of the fields
//! viewed as derivations, `[Y1, Y2] f = Y1(Y2 f) - Y2(Y1 f)`. Under this
//! convention the affine generators `d/dx`, `x d/dx + y d/dy` satisfy
//! `[d/dx, x d/dx + y d/dy] = d/dx`, while the matrix commutator of the
//! corresponding algebra elements gives `-xi_0`: infinitesimal generators
//! of a left action are an anti-homomorphism, so the two differ by a
//! global sign.

mod closure;
mod poly;

pub use closure::{check_involutive, lie_closure, ClosureReport, InvolutivityReport, InvolutivityWitness};
pub use poly::{Monomial, Polynomial};

use crate::error::{Error, Result};

/// Default per-coefficient tolerance for structural equality.
pub const STRUCTURAL_TOL: f64 = 1e-12;

/// Vector field on `R^n` with polynomial components.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField {
    dim: usize,
    components: Vec<Polynomial>,
}

impl PolyVectorField {
    pub fn zero(dim: usize) -> Self {
        Self { dim, components: vec![Polynomial::zero(dim); dim] }
    }

    pub fn from_components(components: Vec<Polynomial>) -> Result<Self> {
        let dim = components.len();
        if let Some(p) = components.iter().find(|p| p.nvars() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.nvars() });
        }
        Ok(Self { dim, components })
    }

    /// Builds a field from `(component, coefficient, exponents)` triples.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64, Vec<u32>)>,
    {
        let mut f = Self::zero(dim);
        for (c, coeff, e) in terms {
            if c >= dim {
                return Err(Error::ComponentOutOfRange { index: c, dim });
            }
            if e.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: e.len() });
            }
            f.components[c].add_term(Monomial::new(e), coeff);
        }
        Ok(f)
    }

    /// The coordinate field `d/dq^i`.
    pub fn partial(dim: usize, i: usize) -> Self {
        let mut f = Self::zero(dim);
        f.components[i] = Polynomial::constant(dim, 1.0);
        f
    }

    /// The linear field `z -> A z` for a row-major square matrix.
    pub fn linear(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut f = Self::zero(n);
        for (i, row) in a.iter().enumerate() {
            assert_eq!(row.len(), n, "linear field needs a square matrix");
            for (j, &v) in row.iter().enumerate() {
                f.components[i].add_term(Monomial::var(n, j), v);
            }
        }
        f
    }

    /// The constant field `z -> c`.
    pub fn constant(c: &[f64]) -> Self {
        let n = c.len();
        let mut f = Self::zero(n);
        for (i, &v) in c.iter().enumerate() {
            f.components[i] = Polynomial::constant(n, v);
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Polynomial {
        &self.components[i]
    }

    /// Canonical term list, ordered by component then graded-lex exponents.
    pub fn terms(&self) -> Vec<(usize, f64, Vec<u32>)> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.terms().map(move |(m, c)| (i, c, m.exponents().to_vec())))
            .collect()
    }

    pub fn num_terms(&self) -> usize {
        self.components.iter().map(Polynomial::num_terms).sum()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.components.iter().filter_map(Polynomial::degree).max()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_point(z)?;
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(z)).collect()
    }

    /// Accumulates `out += s * Y(z)` without allocating the field value.
    pub(crate) fn eval_axpy(&self, s: f64, z: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.components) {
            *o += s * p.eval(z);
        }
    }

    /// Jacobian `DY(z)`, row `i` holding `d Y^i / d z^j`.
    pub fn jacobian(&self, z: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_point(z)?;
        Ok(self
            .components
            .iter()
            .map(|p| (0..self.dim).map(|j| p.derivative(j).eval(z)).collect())
            .collect())
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.len() });
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, components: self.components.iter().map(|p| p.scale(s)).collect() }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            dim: self.dim,
            components: self.components.iter().zip(&other.components).map(|(p, q)| p.axpy(a, q)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    /// Lie bracket `[self, other] = D(other) . self - D(self) . other`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut components = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = Polynomial::zero(n);
            for k in 0..n {
                if !self.components[k].is_zero() {
                    let d = other.components[i].derivative(k);
                    if !d.is_zero() {
                        acc = acc.add(&self.components[k].mul(&d));
                    }
                }
                if !other.components[k].is_zero() {
                    let d = self.components[i].derivative(k);
                    if !d.is_zero() {
                        acc = acc.sub(&other.components[k].mul(&d));
                    }
                }
            }
            components.push(acc);
        }
        Ok(Self { dim: n, components })
    }

    /// The field acting as `self` on each of `copies` blocks of `R^n`.
    pub fn diagonal_extend(&self, copies: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidArgument("diagonal extension needs at least one copy".into()));
        }
        let n = self.dim;
        let big = n * copies;
        let mut components = Vec::with_capacity(big);
        for b in 0..copies {
            for p in &self.components {
                components.push(p.embed(big, b * n));
            }
        }
        Ok(Self { dim: big, components })
    }

    /// Drops the degree-0 part of every component.
    pub fn without_constant_terms(&self) -> Self {
        Self {
            dim: self.dim,
            components: self.components.iter().map(Polynomial::without_constant_term).collect(),
        }
    }

    /// Structural equality up to `tol` per coefficient.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self.components.iter().zip(&other.components).all(|(p, q)| p.approx_eq(q, tol))
    }

    pub fn is_approx_zero(&self, tol: f64) -> bool {
        self.approx_eq(&Self::zero(self.dim), tol)
    }

    /// Text form: one term per line, `component exponents coefficient`,
    /// e.g. `0 2,1 -1.5e0` for `-1.5 x^2 y d/dx`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (c, coeff, e) in self.terms() {
            let exps: Vec<String> = e.iter().map(u32::to_string).collect();
            s.push_str(&format!("{} {} {:e}\n", c, exps.join(","), coeff));
        }
        s
    }

    /// Parses [`PolyVectorField::to_text`] output. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_text(dim: usize, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::InvalidArgument(format!("line {}: {what}", lineno + 1));
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad("expected `component exponents coefficient`"));
            }
            let c: usize = parts[0].parse().map_err(|_| bad("bad component"))?;
            let e: Vec<u32> = parts[1]
                .split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad exponent vector"))?;
            let coeff: f64 = parts[2].parse().map_err(|_| bad("bad coefficient"))?;
            terms.push((c, coeff, e));
        }
        Self::from_terms(dim, terms)
    }
}

pub fn evaluate(y: &PolyVectorField, z: &[f64]) -> Result<Vec<f64>> {
    y.evaluate(z)
}

pub fn bracket(y1: &PolyVectorField, y2: &PolyVectorField) -> Result<PolyVectorField> {
    y1.bracket(y2)
}

pub fn diagonal_extend(y: &PolyVectorField, copies: usize) -> Result<PolyVectorField> {
    y.diagonal_extend(copies)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dx() -> PolyVectorField {
        PolyVectorField::partial(1, 0)
    }

    fn x_dx() -> PolyVectorField {
        PolyVectorField::from_terms(1, [(0, 1.0, vec![1])]).unwrap()
    }

    fn affine_generators() -> (PolyVectorField, PolyVectorField) {
        let xi0 = PolyVectorField::partial(2, 0);
        let xi1 = PolyVectorField::linear(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        (xi0, xi1)
    }

    #[test]
    fn evaluation() {
        assert_eq!(x_dx().evaluate(&[2.0]).unwrap(), vec![2.0]);
        assert_eq!(dx().evaluate(&[-7.5]).unwrap(), vec![1.0]);
        let (_, xi1) = affine_generators();
        assert_eq!(xi1.evaluate(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert!(matches!(xi1.evaluate(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bracket_examples() {
        assert!(dx().bracket(&x_dx()).unwrap().approx_eq(&dx(), 0.0));
        assert!(x_dx().bracket(&x_dx()).unwrap().is_zero());
        let (xi0, xi1) = affine_generators();
        // Equals +xi_0 here; the matrix commutator gives -xi_0.
        assert!(xi0.bracket(&xi1).unwrap().approx_eq(&xi0, 0.0));
        assert!(dx().bracket(&xi0).is_err());
    }

    #[test]
    fn diagonal_extension_examples() {
        let d = dx().diagonal_extend(2).unwrap();
        assert_eq!(d.terms(), vec![(0, 1.0, vec![0, 0]), (1, 1.0, vec![0, 0])]);
        assert_eq!(x_dx().diagonal_extend(1).unwrap(), x_dx());
        assert!(dx().diagonal_extend(0).is_err());
        let y1 = PolyVectorField::from_terms(2, [(0, 1.0, vec![0, 2]), (1, -2.0, vec![1, 0])]).unwrap();
        let y2 = PolyVectorField::from_terms(2, [(1, 3.0, vec![1, 1])]).unwrap();
        let lhs = y1.diagonal_extend(2).unwrap().bracket(&y2.diagonal_extend(2).unwrap()).unwrap();
        let rhs = y1.bracket(&y2).unwrap().diagonal_extend(2).unwrap();
        assert!(lhs.approx_eq(&rhs, STRUCTURAL_TOL));
    }

    #[test]
    fn diagonal_extension_evaluates_blockwise() {
        let y = PolyVectorField::from_terms(2, [(0, 1.0, vec![1, 1]), (1, 2.0, vec![0, 0])]).unwrap();
        let d = y.diagonal_extend(3).unwrap();
        let q = [1.0, 2.0, 3.0, 4.0, -1.0, 0.5];
        let v = d.evaluate(&q).unwrap();
        for b in 0..3 {
            assert_eq!(&v[2 * b..2 * b + 2], y.evaluate(&q[2 * b..2 * b + 2]).unwrap().as_slice());
        }
    }

    #[test]
    fn text_round_trip() {
        let y = PolyVectorField::from_terms(2, [(0, 1.0, vec![2, 1]), (1, -1.0, vec![0, 0])]).unwrap();
        let t = y.to_text();
        assert_eq!(t, "0 2,1 1e0\n1 0,0 -1e0\n");
        assert_eq!(PolyVectorField::from_text(2, &t).unwrap(), y);
        assert!(PolyVectorField::from_text(2, "0 1 1.0").is_err());
    }

    #[test]
    fn jacobian_of_quadratic() {
        let y = PolyVectorField::from_terms(2, [(0, 1.0, vec![2, 1])]).unwrap();
        assert_eq!(y.jacobian(&[2.0, 3.0]).unwrap(), vec![vec![12.0, 4.0], vec![0.0, 0.0]]);
    }
}
