//! Exact multivariate polynomials with rational coefficients.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::chart::{ChartId, JetChart, VarId};

/// Arbitrary-precision rational, always in lowest terms with a positive
/// denominator.
pub type Rational = num_rational::BigRational;

/// Shorthand for `num / den`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("expressions belong to different charts")]
pub struct ChartMismatch;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{name}`")]
    Unbound { var: VarId, name: String },
    #[error(transparent)]
    Chart(#[from] ChartMismatch),
}

/// Product of variables with positive exponents, sorted by [`VarId`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<(VarId, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial(vec![(v, 1)])
    }

    /// Builds a monomial from `(variable, exponent)` pairs. Zero exponents are
    /// dropped and repeated variables merged.
    pub fn from_factors(factors: impl IntoIterator<Item = (VarId, u32)>) -> Self {
        let mut v: Vec<(VarId, u32)> = factors.into_iter().filter(|&(_, e)| e > 0).collect();
        v.sort_by_key(|&(w, _)| w);
        let mut out: Vec<(VarId, u32)> = Vec::with_capacity(v.len());
        for (w, e) in v {
            match out.last_mut() {
                Some(last) if last.0 == w => last.1 += e,
                _ => out.push((w, e)),
            }
        }
        Monomial(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(VarId, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, v: VarId) -> u32 {
        self.0
            .binary_search_by_key(&v, |&(w, _)| w)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Removes one power of `v`, returning the old exponent and the quotient.
    fn lower(&self, v: VarId) -> Option<(u32, Monomial)> {
        let i = self.0.binary_search_by_key(&v, |&(w, _)| w).ok()?;
        let e = self.0[i].1;
        let mut out = self.0.clone();
        if e == 1 {
            out.remove(i);
        } else {
            out[i].1 -= 1;
        }
        Some((e, Monomial(out)))
    }
}

/// Lexicographic order on dense exponent vectors, variables compared in
/// registration order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let mut i = 0;
        loop {
            match (a.get(i), b.get(i)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    if va != vb {
                        // The smaller variable is absent from the other side.
                        return if va < vb { Ordering::Greater } else { Ordering::Less };
                    }
                    match ea.cmp(&eb) {
                        Ordering::Equal => i += 1,
                        o => return o,
                    }
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial over the variables of one [`JetChart`].
///
/// The term map never stores zero coefficients, so structural equality is
/// mathematical equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Expr {
    chart: ChartId,
    terms: BTreeMap<Monomial, Rational>,
}

impl Expr {
    pub fn zero(chart: ChartId) -> Self {
        Expr {
            chart,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(chart: ChartId, value: Rational) -> Self {
        let mut e = Expr::zero(chart);
        if !value.is_zero() {
            e.terms.insert(Monomial::one(), value);
        }
        e
    }

    pub fn variable(chart: ChartId, v: VarId) -> Self {
        let mut e = Expr::zero(chart);
        e.terms.insert(Monomial::var(v), Rational::one());
        e
    }

    /// Builds an expression from raw terms, merging duplicates and dropping
    /// zeros.
    pub fn from_terms(chart: ChartId, terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut e = Expr::zero(chart);
        for (m, c) in terms {
            e.add_term(m, c);
        }
        e
    }

    pub fn chart(&self) -> ChartId {
        self.chart
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> + ExactSizeIterator {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the expression has no variables.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: VarId) -> u32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|&(v, _)| v)).collect()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.terms.keys().any(|m| m.exponent(v) > 0)
    }

    fn check(&self, other: &Expr) -> Result<(), ChartMismatch> {
        if self.chart == other.chart {
            Ok(())
        } else {
            Err(ChartMismatch)
        }
    }

    pub fn try_add(&self, other: &Expr) -> Result<Expr, ChartMismatch> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Expr) -> Result<Expr, ChartMismatch> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Expr) -> Result<Expr, ChartMismatch> {
        self.check(other)?;
        let mut out = Expr::zero(self.chart);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: &Rational) -> Expr {
        if factor.is_zero() {
            return Expr::zero(self.chart);
        }
        Expr {
            chart: self.chart,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * factor)).collect(),
        }
    }

    pub fn pow(&self, mut exp: u32) -> Expr {
        let mut result = Expr::constant(self.chart, Rational::one());
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                result = &result * &base;
            }
            exp >>= 1;
            if exp > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Formal partial derivative with respect to `v`.
    pub fn derivative(&self, v: VarId) -> Expr {
        let mut out = Expr::zero(self.chart);
        for (m, c) in &self.terms {
            if let Some((e, rest)) = m.lower(v) {
                out.add_term(rest, c * Rational::from_integer(e.into()));
            }
        }
        out
    }

    /// Simultaneous substitution: every bound variable is replaced by its
    /// image in the original expression, images are not substituted again.
    pub fn substitute(&self, bindings: &HashMap<VarId, Expr>) -> Result<Expr, ChartMismatch> {
        for image in bindings.values() {
            self.check(image)?;
        }
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        let mut out = Expr::zero(self.chart);
        for (m, c) in &self.terms {
            let mut kept = Monomial::one();
            let mut product = Expr::constant(self.chart, c.clone());
            for &(v, e) in &m.0 {
                match bindings.get(&v) {
                    Some(image) => product = &product * &image.pow(e),
                    None => kept = kept.mul(&Monomial(vec![(v, e)])),
                }
            }
            for (pm, pc) in product.terms {
                out.add_term(pm.mul(&kept), pc);
            }
        }
        Ok(out)
    }

    /// Double-precision evaluation. Terms are visited in ascending monomial
    /// order and each term is `coefficient * x1^e1 * x2^e2 ...` in variable
    /// order, so results are reproducible bit for bit.
    pub fn eval(&self, chart: &JetChart, point: &HashMap<VarId, f64>) -> Result<f64, EvalError> {
        if chart.id() != self.chart {
            return Err(ChartMismatch.into());
        }
        self.eval_with(|v| point.get(&v).copied())
            .map_err(|var| EvalError::Unbound {
                var,
                name: chart.name(var).to_string(),
            })
    }

    /// Evaluation with a lookup closure; returns the first unbound variable
    /// on failure.
    pub fn eval_with(&self, mut value: impl FnMut(VarId) -> Option<f64>) -> Result<f64, VarId> {
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for &(v, e) in &m.0 {
                let x = value(v).ok_or(v)?;
                t *= x.powi(e as i32);
            }
            sum += t;
        }
        Ok(sum)
    }
}

/// Correctly rounded for moderate sizes; saturates to infinity otherwise.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            /// Panics when the operands come from different charts; use the
            /// `try_` variant to get an error instead.
            fn $method(self, rhs: &Expr) -> Expr {
                self.$checked(rhs)
                    .expect("expressions belong to different charts")
            }
        }
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                (&self).$method(rhs)
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, try_add);
forward_binop!(Sub, sub, try_sub);
forward_binop!(Mul, mul, try_mul);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr {
            chart: self.chart,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl Mul<&Rational> for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Rational) -> Expr {
        self.scale(rhs)
    }
}

impl Mul<Rational> for Expr {
    type Output = Expr;
    fn mul(self, rhs: Rational) -> Expr {
        self.scale(&rhs)
    }
}
