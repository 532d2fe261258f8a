//! Sparse multivariate polynomials with real coefficients.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

/// Exponent vector ordered graded-lexicographically: total degree first,
/// then lexicographic on the exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Self(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_add(*b).expect("exponent overflow"))
                .collect(),
        )
    }

    /// Re-embeds into `nvars` variables starting at `offset`.
    pub(crate) fn shifted(&self, nvars: usize, offset: usize) -> Monomial {
        let mut e = vec![0; nvars];
        e[offset..offset + self.0.len()].copy_from_slice(&self.0);
        Monomial(e)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polynomial in `nvars` variables. Terms are kept merged, with exact
/// zeros removed, in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), 1.0);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (f64, Vec<u32>)>>(nvars: usize, terms: I) -> Self {
        let mut p = Self::zero(nvars);
        for (c, e) in terms {
            assert_eq!(e.len(), nvars, "exponent vector length must equal the variable count");
            p.add_term(Monomial(e), c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::total_degree).max()
    }

    /// Value of the constant term.
    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Monomial::one(self.nvars)).copied().unwrap_or(0.0)
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut p = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c * s);
        }
        p
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), a * c);
        }
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut p = Self::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                p.add_term(m1.mul(m2), c1 * c2);
            }
        }
        p
    }

    /// Partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut p = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut d = m.0.clone();
                d[i] -= 1;
                p.add_term(Monomial(d), c * e as f64);
            }
        }
        p
    }

    /// Same polynomial in `nvars` variables, variable `i` renamed to `offset + i`.
    pub fn embed(&self, nvars: usize, offset: usize) -> Polynomial {
        let mut p = Self::zero(nvars);
        for (m, c) in &self.terms {
            p.add_term(m.shifted(nvars, offset), *c);
        }
        p
    }

    pub fn without_constant_term(&self) -> Polynomial {
        let mut p = self.clone();
        p.terms.remove(&Monomial::one(self.nvars));
        p
    }

    /// Term-wise comparison: every coefficient differs by at most `tol`.
    pub fn approx_eq(&self, other: &Polynomial, tol: f64) -> bool {
        if self.nvars != other.nvars {
            return false;
        }
        let within = |a: &Polynomial, b: &Polynomial| {
            a.terms
                .iter()
                .all(|(m, c)| (c - b.terms.get(m).copied().unwrap_or(0.0)).abs() <= tol)
        };
        within(self, other) && within(other, self)
    }
}

impl fmt::Display for Polynomial {
    /// Prints in the `x1^2*x2` notation accepted by the field DSL.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (m, c)) in self.terms.iter().enumerate() {
            let factors: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, e) })
                .collect();
            let sign = if *c < 0.0 { "-" } else if n > 0 { "+" } else { "" };
            let mag = c.abs();
            let body = if factors.is_empty() {
                format!("{mag}")
            } else if mag == 1.0 {
                factors.join("*")
            } else {
                format!("{mag}*{}", factors.join("*"))
            };
            write!(f, "{sign}{body}")?;
        }
        Ok(())
    }
}
