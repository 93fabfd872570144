//! Euler-Lagrange residuals via jet prolongation, Lie systems built from
//! infinitesimal generators, and the check that the two agree.

use std::collections::HashMap;

use thiserror::Error;

use crate::chart::{JetChart, VarId, VarKind};
use crate::expr::{ChartMismatch, Expr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LagrangianError {
    #[error(transparent)]
    Chart(#[from] ChartMismatch),
    #[error("the chart has no second-jet variables")]
    NoSecondJets,
    #[error("variable `{name}` is not allowed in {context}")]
    UnsupportedVariable { name: String, context: &'static str },
    #[error("expected {expected} generators, found {found}")]
    GeneratorCount { expected: usize, found: usize },
}

fn ensure_chart(e: &Expr, chart: &JetChart) -> Result<(), ChartMismatch> {
    if e.chart() == chart.id() {
        Ok(())
    } else {
        Err(ChartMismatch)
    }
}

/// Rejects any variable outside the allowed roles.
fn ensure_only(
    e: &Expr,
    chart: &JetChart,
    context: &'static str,
    allowed: impl Fn(VarKind) -> bool,
) -> Result<(), LagrangianError> {
    ensure_chart(e, chart)?;
    match e.variables().into_iter().find(|&v| !allowed(chart.kind(v))) {
        Some(v) => Err(LagrangianError::UnsupportedVariable {
            name: chart.name(v).to_string(),
            context,
        }),
        None => Ok(()),
    }
}

/// Total derivative along the evolution parameter: `q -> q'`, `q' -> q''`,
/// extended as a derivation. The input may contain fields and velocities
/// only.
pub fn total_derivative(e: &Expr, chart: &JetChart) -> Result<Expr, LagrangianError> {
    let accelerations = chart.accelerations().ok_or(LagrangianError::NoSecondJets)?;
    ensure_only(e, chart, "a total derivative argument", |k| {
        matches!(k, VarKind::Field(_) | VarKind::Velocity(_))
    })?;
    let mut out = chart.zero();
    for ((&q, &qd), &qdd) in chart.fields().iter().zip(chart.velocities()).zip(accelerations) {
        out = out + e.derivative(q) * chart.var(qd);
        out = out + e.derivative(qd) * chart.var(qdd);
    }
    Ok(out)
}

/// Residuals `E_i = dL/dq_i - D(dL/dq'_i)`, one per field, kept unscaled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElSystem {
    pub residuals: Vec<Expr>,
}

pub fn euler_lagrange(lagrangian: &Expr, chart: &JetChart) -> Result<ElSystem, LagrangianError> {
    ensure_only(lagrangian, chart, "a Lagrangian", |k| {
        matches!(k, VarKind::Field(_) | VarKind::Velocity(_))
    })?;
    let mut residuals = Vec::with_capacity(chart.num_fields());
    for i in 0..chart.num_fields() {
        let force = lagrangian.derivative(chart.field(i));
        let momentum = lagrangian.derivative(chart.velocity(i));
        residuals.push(force - total_derivative(&momentum, chart)?);
    }
    Ok(ElSystem { residuals })
}

/// Infinitesimal generators `xi_i(q)`, one per field, inducing the first
/// order system `q'_i = xi_i(q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LieSystem {
    generators: Vec<Expr>,
}

impl LieSystem {
    pub fn new(chart: &JetChart, generators: Vec<Expr>) -> Result<Self, LagrangianError> {
        if generators.len() != chart.num_fields() {
            return Err(LagrangianError::GeneratorCount {
                expected: chart.num_fields(),
                found: generators.len(),
            });
        }
        for g in &generators {
            ensure_only(g, chart, "a generator", |k| matches!(k, VarKind::Field(_)))?;
        }
        Ok(LieSystem { generators })
    }

    pub fn generators(&self) -> &[Expr] {
        &self.generators
    }

    /// `(q'_i, xi_i)` pairs.
    pub fn lie_equations(&self, chart: &JetChart) -> Vec<(VarId, Expr)> {
        self.generators
            .iter()
            .enumerate()
            .map(|(i, xi)| (chart.velocity(i), xi.clone()))
            .collect()
    }

    /// Prolongation of the flow: `q''_i = sum_j (d xi_i / d q_j) xi_j`.
    pub fn second_order_form(&self, chart: &JetChart) -> Result<Vec<(VarId, Expr)>, LagrangianError> {
        let accelerations = chart.accelerations().ok_or(LagrangianError::NoSecondJets)?;
        Ok(self
            .generators
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                let rhs = self
                    .generators
                    .iter()
                    .enumerate()
                    .fold(chart.zero(), |acc, (j, xj)| acc + xi.derivative(chart.field(j)) * xj);
                (accelerations[i], rhs)
            })
            .collect())
    }

    /// Bindings replacing velocities and accelerations by their values on
    /// the flow.
    pub fn on_shell_bindings(&self, chart: &JetChart) -> Result<HashMap<VarId, Expr>, LagrangianError> {
        let mut map: HashMap<VarId, Expr> = self.lie_equations(chart).into_iter().collect();
        map.extend(self.second_order_form(chart)?);
        Ok(map)
    }

    /// True when the generators are the plane rotation `(-q_2, q_1)`.
    pub fn is_plane_rotation(&self, chart: &JetChart) -> bool {
        chart.num_fields() == 2
            && self.generators[0] == -chart.var(chart.field(1))
            && self.generators[1] == chart.var(chart.field(0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ElLieVerdict {
    Equivalent,
    /// Nonzero residuals as `(field index, residual)`.
    Residuals(Vec<(usize, Expr)>),
}

impl ElLieVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, ElLieVerdict::Equivalent)
    }
}

/// Substitutes the flow and its prolongation into every residual.
pub fn verify_el_equals_lie(el: &ElSystem, lie: &LieSystem, chart: &JetChart) -> Result<ElLieVerdict, LagrangianError> {
    let bindings = lie.on_shell_bindings(chart)?;
    let mut nonzero = Vec::new();
    for (i, r) in el.residuals.iter().enumerate() {
        let reduced = r.substitute(&bindings)?;
        if !reduced.is_zero() {
            nonzero.push((i, reduced));
        }
    }
    Ok(if nonzero.is_empty() {
        ElLieVerdict::Equivalent
    } else {
        ElLieVerdict::Residuals(nonzero)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rat;
    use crate::parser::parse_expr;
    use crate::sample::random_expr;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chart() -> JetChart {
        JetChart::new(&["f", "g"], true).unwrap()
    }

    fn p(c: &JetChart, s: &str) -> Expr {
        parse_expr(s, c).unwrap()
    }

    fn rotation(c: &JetChart) -> LieSystem {
        LieSystem::new(c, vec![p(c, "-g"), p(c, "f")]).unwrap()
    }

    const ROTATION_L: &str = "1/2*(f*g' - f'*g) - 1/2*(f^2 + g^2)";
    const CONVENTIONAL_L: &str = "1/2*(f'^2 + g'^2) - 1/2*(f^2 + g^2)";

    #[test]
    fn total_derivative_examples() {
        let c = chart();
        assert_eq!(total_derivative(&p(&c, "-1/2*g"), &c).unwrap(), p(&c, "-1/2*g'"));
        assert_eq!(total_derivative(&p(&c, "1/2*f"), &c).unwrap(), p(&c, "1/2*f'"));
        assert!(total_derivative(&c.int(7), &c).unwrap().is_zero());
        assert_eq!(total_derivative(&p(&c, "f*f'"), &c).unwrap(), p(&c, "f'^2 + f*f''"));
    }

    #[test]
    fn total_derivative_rejects_second_jets_and_momenta() {
        let c = chart();
        assert!(matches!(
            total_derivative(&p(&c, "f''"), &c),
            Err(LagrangianError::UnsupportedVariable { .. })
        ));
        assert!(total_derivative(&p(&c, "p_f"), &c).is_err());
        let flat = JetChart::new(&["f"], false).unwrap();
        assert_eq!(
            total_derivative(&flat.named("f"), &flat),
            Err(LagrangianError::NoSecondJets)
        );
    }

    #[test]
    fn euler_lagrange_examples() {
        let c = chart();
        let el = euler_lagrange(&p(&c, ROTATION_L), &c).unwrap();
        assert_eq!(el.residuals, vec![p(&c, "g' - f"), p(&c, "-f' - g")]);

        let el = euler_lagrange(&p(&c, CONVENTIONAL_L), &c).unwrap();
        assert_eq!(el.residuals, vec![p(&c, "-f'' - f"), p(&c, "-g'' - g")]);

        let single = JetChart::new(&["f"], true).unwrap();
        let el = euler_lagrange(&p(&single, "1/2*f'^2"), &single).unwrap();
        assert_eq!(el.residuals, vec![p(&single, "-f''")]);

        assert!(euler_lagrange(&p(&c, "p_f*f'"), &c).is_err());
    }

    #[test]
    fn lie_and_second_order_forms() {
        let c = chart();
        let rot = rotation(&c);
        let eqs = rot.lie_equations(&c);
        assert_eq!(eqs[0], (c.velocity(0), p(&c, "-g")));
        assert_eq!(eqs[1], (c.velocity(1), p(&c, "f")));
        let second = rot.second_order_form(&c).unwrap();
        assert_eq!(second[0].1, p(&c, "-f"));
        assert_eq!(second[1].1, p(&c, "-g"));

        let scaling = LieSystem::new(&c, vec![p(&c, "f"), p(&c, "g")]).unwrap();
        let second = scaling.second_order_form(&c).unwrap();
        assert_eq!((second[0].1.clone(), second[1].1.clone()), (p(&c, "f"), p(&c, "g")));

        let still = LieSystem::new(&c, vec![c.zero(), c.zero()]).unwrap();
        assert!(still.lie_equations(&c).iter().all(|(_, e)| e.is_zero()));
        assert!(still.second_order_form(&c).unwrap().iter().all(|(_, e)| e.is_zero()));
    }

    #[test]
    fn generators_must_be_field_only() {
        let c = chart();
        assert!(LieSystem::new(&c, vec![p(&c, "f'"), c.zero()]).is_err());
        assert_eq!(
            LieSystem::new(&c, vec![c.zero()]).unwrap_err(),
            LagrangianError::GeneratorCount { expected: 2, found: 1 }
        );
    }

    #[test]
    fn el_matches_lie_for_both_lagrangians() {
        let c = chart();
        let rot = rotation(&c);
        for l in [ROTATION_L, CONVENTIONAL_L] {
            let el = euler_lagrange(&p(&c, l), &c).unwrap();
            assert!(verify_el_equals_lie(&el, &rot, &c).unwrap().is_equivalent(), "{l}");
        }
    }

    #[test]
    fn stray_term_leaves_unit_residual() {
        let c = chart();
        let l = p(&c, ROTATION_L) + c.named("f");
        let el = euler_lagrange(&l, &c).unwrap();
        match verify_el_equals_lie(&el, &rotation(&c), &c).unwrap() {
            ElLieVerdict::Residuals(r) => assert_eq!(r, vec![(0, c.one())]),
            v => panic!("unexpected verdict {v:?}"),
        }
    }

    #[test]
    fn on_shell_identity_vanishes() {
        let c = chart();
        let identity = p(&c, "f'^2 + g'^2 - (f*g' - g*f')");
        let b = rotation(&c).on_shell_bindings(&c).unwrap();
        assert!(identity.substitute(&b).unwrap().is_zero());
    }

    fn jet_vars(c: &JetChart) -> Vec<VarId> {
        c.fields().iter().chain(c.velocities()).copied().collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn total_derivative_is_a_derivation(s1 in any::<u64>(), s2 in any::<u64>()) {
            let c = chart();
            let vars = jet_vars(&c);
            let a = random_expr(&mut ChaCha8Rng::seed_from_u64(s1), &c, &vars, 3, 4);
            let b = random_expr(&mut ChaCha8Rng::seed_from_u64(s2), &c, &vars, 3, 4);
            let d = |e: &Expr| total_derivative(e, &c).unwrap();
            prop_assert_eq!(d(&(&a * &b)), d(&a) * &b + &a * d(&b));
        }

        #[test]
        fn verdict_is_invariant_under_scaling(seed in any::<u64>(), num in 1i64..9, den in 1i64..9) {
            let c = chart();
            let vars = jet_vars(&c);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_expr(&mut rng, &c, &vars, 3, 4);
            let rot = rotation(&c);
            let k = rat(num, den);
            let base = verify_el_equals_lie(&euler_lagrange(&l, &c).unwrap(), &rot, &c).unwrap();
            let scaled = verify_el_equals_lie(&euler_lagrange(&l.scale(&k), &c).unwrap(), &rot, &c).unwrap();
            prop_assert_eq!(base.is_equivalent(), scaled.is_equivalent());
            if let (ElLieVerdict::Residuals(a), ElLieVerdict::Residuals(b)) = (base, scaled) {
                let a: Vec<_> = a.into_iter().map(|(i, r)| (i, r.scale(&k))).collect();
                prop_assert_eq!(a, b);
            }
        }
    }
}
