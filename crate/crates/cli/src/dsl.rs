//! A small line-oriented language for polynomial vector fields.
//!
//! ```text
//! # comments start with '#'
//! noise 2
//! field Y1 dim 2: 1=1;
//! field Y2 dim 2: 1=x1^2*x2; 2=-1;
//! coeff Y2: 2=0.5*x1;
//! ```
//!
//! `field <name> dim <n>:` lists components `<i>=<polynomial>;` with
//! 1-based component indices and variables `x1..xn`. `noise <l>` declares
//! the number of driving components; `coeff <name>:` then gives the
//! coefficients `b_j` of a field as polynomials in the driving values
//! `x1..xl`, with 1-based `j`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use stochlie::fields::{Monomial, PolyVectorField, Polynomial};
use stochlie::sde::StratonovichSystem;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: duplicate field name `{name}`")]
    DuplicateName { line: usize, col: usize, name: String },
    #[error("{line}:{col}: exponent overflow")]
    ExponentOverflow { line: usize, col: usize },
    #[error("{0}")]
    System(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedField {
    pub name: String,
    pub field: PolyVectorField,
    /// `b_j` for `j = 1..l`, when a `coeff` line was given.
    pub coeffs: Option<Vec<Polynomial>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDslDocument {
    pub raw: String,
    pub noise_dim: Option<usize>,
    pub fields: Vec<NamedField>,
}

impl FieldDslDocument {
    pub fn field_list(&self) -> Vec<PolyVectorField> {
        self.fields.iter().map(|f| f.field.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&NamedField> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// The system `sum_i b^i(X) Y_i`. Requires a `noise` declaration;
    /// fields without a `coeff` line get zero coefficients.
    pub fn system(&self) -> Result<StratonovichSystem, DslError> {
        let l = self.noise_dim.ok_or_else(|| DslError::System("no `noise` declaration".into()))?;
        let coeffs = self
            .fields
            .iter()
            .map(|f| f.coeffs.clone().unwrap_or_else(|| vec![Polynomial::zero(l); l]))
            .collect();
        StratonovichSystem::new(self.field_list(), coeffs, l).map_err(|e| DslError::System(e.to_string()))
    }

    /// Canonical text: `noise` first, then each field followed by its
    /// coefficients; components in increasing order, zero ones omitted.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        if let Some(l) = self.noise_dim {
            let _ = writeln!(out, "noise {l}");
        }
        for f in &self.fields {
            let _ = write!(out, "field {} dim {}:", f.name, f.field.dim());
            write_entries(&mut out, f.field.components());
            out.push('\n');
            if let Some(c) = &f.coeffs {
                let _ = write!(out, "coeff {}:", f.name);
                write_entries(&mut out, c);
                out.push('\n');
            }
        }
        out
    }
}

fn write_entries(out: &mut String, polys: &[Polynomial]) {
    for (i, p) in polys.iter().enumerate() {
        if !p.is_zero() {
            let _ = write!(out, " {}={};", i + 1, p);
        }
    }
}

/// Parses a document; the first error aborts.
pub fn parse_field_dsl(text: &str) -> Result<FieldDslDocument, DslError> {
    let mut doc = FieldDslDocument { raw: text.to_string(), noise_dim: None, fields: Vec::new() };
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    for (n, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("");
        let mut c = Cursor::new(line, n + 1);
        c.skip_ws();
        if c.at_end() {
            continue;
        }
        let (kw_col, kw) = (c.col(), c.word()?);
        match kw.as_str() {
            "noise" => {
                c.require_ws()?;
                let (col, l) = (c.col(), c.integer()?);
                if l == 0 {
                    return Err(c.error_at(col, "noise dimension must be positive"));
                }
                if doc.noise_dim.is_some() {
                    return Err(c.error_at(kw_col, "`noise` declared twice"));
                }
                if doc.fields.iter().any(|f| f.coeffs.is_some()) {
                    return Err(c.error_at(kw_col, "`noise` must precede every `coeff` line"));
                }
                doc.noise_dim = Some(l);
                c.expect_end()?;
            }
            "field" => {
                c.require_ws()?;
                let (name_col, name) = (c.col(), c.word()?);
                if names.contains_key(&name) {
                    return Err(DslError::DuplicateName { line: n + 1, col: name_col, name });
                }
                c.require_ws()?;
                let dim_col = c.col();
                if c.word()? != "dim" {
                    return Err(c.error_at(dim_col, "expected `dim`"));
                }
                c.require_ws()?;
                let (col, dim) = (c.col(), c.integer()?);
                if dim == 0 {
                    return Err(c.error_at(col, "dimension must be positive"));
                }
                c.skip_ws();
                c.expect(':')?;
                let components = c.entries(dim, dim)?;
                names.insert(name.clone(), doc.fields.len());
                let field = PolyVectorField::from_components(components).expect("dimensions checked by the parser");
                doc.fields.push(NamedField { name, field, coeffs: None });
            }
            "coeff" => {
                let l = doc.noise_dim.ok_or_else(|| c.error_at(kw_col, "`coeff` requires a `noise` declaration"))?;
                c.require_ws()?;
                let (name_col, name) = (c.col(), c.word()?);
                let idx = *names.get(&name).ok_or_else(|| c.error_at(name_col, &format!("unknown field `{name}`")))?;
                if doc.fields[idx].coeffs.is_some() {
                    return Err(c.error_at(name_col, &format!("coefficients for `{name}` given twice")));
                }
                c.skip_ws();
                c.expect(':')?;
                doc.fields[idx].coeffs = Some(c.entries(l, l)?);
            }
            other => return Err(c.error_at(kw_col, &format!("unknown statement `{other}`"))),
        }
    }
    Ok(doc)
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Self { chars: src.chars().collect(), pos: 0, line }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn error_at(&self, col: usize, message: &str) -> DslError {
        DslError::Syntax { line: self.line, col, message: message.to_string() }
    }

    fn error(&self, message: &str) -> DslError {
        self.error_at(self.col(), message)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn require_ws(&mut self) -> Result<(), DslError> {
        if !self.peek().is_some_and(char::is_whitespace) {
            return Err(self.error("expected whitespace"));
        }
        self.skip_ws();
        Ok(())
    }

    fn expect(&mut self, ch: char) -> Result<(), DslError> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{ch}`")))
        }
    }

    fn expect_end(&mut self) -> Result<(), DslError> {
        self.skip_ws();
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    fn word(&mut self) -> Result<String, DslError> {
        let start = self.pos;
        if !self.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
            return Err(self.error("expected a name"));
        }
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn integer(&mut self) -> Result<usize, DslError> {
        let col = self.col();
        let d = self.digits();
        if d.is_empty() {
            return Err(self.error("expected an integer"));
        }
        d.parse().map_err(|_| self.error_at(col, "integer too large"))
    }

    fn number(&mut self) -> Result<f64, DslError> {
        let col = self.col();
        let mut s = self.digits();
        if self.peek() == Some('.') {
            self.pos += 1;
            s.push('.');
            s.push_str(&self.digits());
        }
        if s.is_empty() || s == "." {
            return Err(self.error_at(col, "expected a number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut exp = String::from("e");
            if let Some(sign @ ('+' | '-')) = self.peek() {
                exp.push(sign);
                self.pos += 1;
            }
            let d = self.digits();
            if d.is_empty() {
                self.pos = save;
            } else {
                s.push_str(&exp);
                s.push_str(&d);
            }
        }
        s.parse().map_err(|_| self.error_at(col, "malformed number"))
    }

    /// `<i>=<poly>;` entries until end of line; indices in `1..=count`.
    fn entries(&mut self, count: usize, nvars: usize) -> Result<Vec<Polynomial>, DslError> {
        let mut out = vec![Polynomial::zero(nvars); count];
        let mut seen = vec![false; count];
        loop {
            self.skip_ws();
            if self.at_end() {
                return Ok(out);
            }
            let col = self.col();
            let i = self.integer()?;
            if i == 0 || i > count {
                return Err(self.error_at(col, &format!("index {i} outside 1..{count}")));
            }
            if seen[i - 1] {
                return Err(self.error_at(col, &format!("index {i} given twice")));
            }
            seen[i - 1] = true;
            self.skip_ws();
            self.expect('=')?;
            out[i - 1] = self.polynomial(nvars)?;
            self.skip_ws();
            self.expect(';')?;
        }
    }

    fn polynomial(&mut self, nvars: usize) -> Result<Polynomial, DslError> {
        let mut p = Polynomial::zero(nvars);
        self.skip_ws();
        let mut sign = 1.0;
        match self.peek() {
            Some('-') => {
                sign = -1.0;
                self.pos += 1;
            }
            Some('+') => self.pos += 1,
            _ => {}
        }
        loop {
            let (c, e) = self.term(nvars)?;
            p.add_term(Monomial::new(e), sign * c);
            self.skip_ws();
            match self.peek() {
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                _ => return Ok(p),
            }
            self.pos += 1;
        }
    }

    fn term(&mut self, nvars: usize) -> Result<(f64, Vec<u32>), DslError> {
        let mut coeff = 1.0;
        let mut exps = vec![0u32; nvars];
        loop {
            self.skip_ws();
            let col = self.col();
            match self.peek() {
                Some(c) if c.is_ascii_digit() || c == '.' => coeff *= self.number()?,
                Some('x') => {
                    self.pos += 1;
                    let vcol = self.col();
                    let v = self.integer()?;
                    if v == 0 || v > nvars {
                        return Err(self.error_at(vcol, &format!("variable x{v} outside x1..x{nvars}")));
                    }
                    self.skip_ws();
                    let mut power = 1u32;
                    if self.peek() == Some('^') {
                        self.pos += 1;
                        self.skip_ws();
                        let pcol = self.col();
                        let d = self.digits();
                        if d.is_empty() {
                            return Err(self.error("expected an exponent"));
                        }
                        power = d.parse().map_err(|_| DslError::ExponentOverflow { line: self.line, col: pcol })?;
                    }
                    exps[v - 1] = exps[v - 1]
                        .checked_add(power)
                        .ok_or(DslError::ExponentOverflow { line: self.line, col })?;
                }
                _ => return Err(self.error("expected a number or a variable")),
            }
            self.skip_ws();
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                return Ok((coeff, exps));
            }
        }
    }
}
