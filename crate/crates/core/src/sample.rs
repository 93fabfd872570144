//! Random polynomials for property checks.

use rand::Rng;

use crate::chart::{JetChart, VarId};
use crate::expr::{rat, Expr, Monomial};

/// A random polynomial in `vars` with at most `max_terms` terms of total
/// degree at most `max_degree`. Coefficients are `n/d` with `1 <= |n| <= 9`
/// and `1 <= d <= 9`.
pub fn random_expr<R: Rng + ?Sized>(
    rng: &mut R,
    chart: &JetChart,
    vars: &[VarId],
    max_degree: u32,
    max_terms: usize,
) -> Expr {
    let nterms = rng.gen_range(1..=max_terms.max(1));
    let mut terms = Vec::with_capacity(nterms);
    for _ in 0..nterms {
        let degree = rng.gen_range(0..=max_degree);
        let mut m = Monomial::one();
        if !vars.is_empty() {
            for _ in 0..degree {
                let v = vars[rng.gen_range(0..vars.len())];
                m = monomial_times(&m, v);
            }
        }
        let mut num = rng.gen_range(1..=9i64);
        if rng.gen_bool(0.5) {
            num = -num;
        }
        let den = rng.gen_range(1..=9i64);
        terms.push((m, rat(num, den)));
    }
    Expr::from_terms(chart.id(), terms)
}

fn monomial_times(m: &Monomial, v: VarId) -> Monomial {
    let mut factors = m.factors().to_vec();
    match factors.binary_search_by_key(&v, |&(w, _)| w) {
        Ok(i) => factors[i].1 += 1,
        Err(i) => factors.insert(i, (v, 1)),
    }
    Monomial::from_factors(factors)
}
