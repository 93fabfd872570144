//! Dirac-Bergmann algorithm for polynomial Lagrangians.
//!
//! The supported class is Lagrangians whose velocity Hessian is a constant
//! matrix. Momenta are then affine in the velocities, every primary
//! constraint can be put in the solved form `p_k = h_k`, and weak equality
//! reduces to a plain simultaneous substitution.

use std::collections::HashMap;

use num_traits::Zero;
use thiserror::Error;

use crate::chart::{ChartError, JetChart, VarId, VarKind};
use crate::expr::{rat, ChartMismatch, Expr, Rational};
use crate::linalg::{gauss_jordan, invert};

/// Upper bound on consistency rounds that generate secondary constraints.
pub const MAX_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Chart(#[from] ChartMismatch),
    #[error(transparent)]
    Registry(#[from] ChartError),
    #[error("variable `{name}` is not allowed in the Lagrangian")]
    InvalidLagrangian { name: String },
    #[error("non-invertible Legendre transform beyond supported class: d2L/d{row}d{col} = {entry} is not constant")]
    NonInvertibleLegendre { row: String, col: String, entry: String },
    #[error("Legendre elimination failed: velocity terms `{residual}` survive on the constraint surface")]
    LegendreEliminationFailed { residual: String },
    #[error("non-constant constraint matrix unsupported: entry ({row}, {col}) is `{entry}`")]
    NonConstantConstraintMatrix { row: usize, col: usize, entry: String },
    #[error("constraint `{constraint}` cannot be solved for a variable with constant coefficient")]
    UnsupportedConstraint { constraint: String },
    #[error("inconsistent system: consistency requires `{value} = 0`")]
    Inconsistent { value: String },
    #[error("secondary constraints still appearing after {0} rounds")]
    IterationCap(usize),
    #[error("Dirac bracket undefined: {0}")]
    DiracBracketUndefined(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOrigin {
    Primary,
    /// Produced by the consistency conditions in the given round.
    Secondary {
        round: usize,
    },
}

/// A constraint `phi = 0` together with its solved form `pivot = solution`.
/// The solution never mentions the pivot of any constraint in the same set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    /// 1-based position in the constraint list.
    pub index: usize,
    pub expr: Expr,
    pub pivot: VarId,
    pub solution: Expr,
    pub origin: ConstraintOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintClass {
    FirstClass,
    SecondClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultiplierValue {
    Determined(Expr),
    Undetermined,
}

impl MultiplierValue {
    pub fn expr(&self) -> Option<&Expr> {
        match self {
            MultiplierValue::Determined(e) => Some(e),
            MultiplierValue::Undetermined => None,
        }
    }
}

/// One consistency round: how many conditions were imposed and which
/// constraints (by index) they produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundAudit {
    pub round: usize,
    pub conditions: usize,
    pub rank: usize,
    pub new_constraints: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MultiplierSolution {
    pub values: Vec<MultiplierValue>,
    /// Primary constraints followed by any secondary ones, with solved forms
    /// updated against the whole set.
    pub constraints: Vec<Constraint>,
    pub rounds: Vec<RoundAudit>,
}

/// The two readings of the total energy observable. They are reported side
/// by side and are not asserted equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergyPresentations {
    /// `1/2 sum q'_i^2`.
    pub kinetic: Expr,
    /// `1/2 sum p_i^2 + T`.
    pub momentum_form: Expr,
    /// Weak reduction of `1/2 H + T`, `H` the total Hamiltonian with the
    /// multipliers substituted.
    pub hamiltonian_form: Expr,
}

/// Output of the whole pipeline for one Lagrangian.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub chart: JetChart,
    pub lagrangian: Expr,
    pub momenta: Vec<Expr>,
    pub hessian: Vec<Vec<Rational>>,
    pub num_primary: usize,
    /// Primary constraints first, then secondary ones.
    pub constraints: Vec<Constraint>,
    pub base_hamiltonian: Expr,
    pub multipliers: Vec<VarId>,
    pub total_hamiltonian: Expr,
    /// `{phi_a, phi_b}`, weakly reduced, over all constraints.
    pub constraint_matrix: Vec<Vec<Expr>>,
    pub multiplier_values: Vec<MultiplierValue>,
    pub classification: Vec<ConstraintClass>,
    pub rounds: Vec<RoundAudit>,
    /// Total Hamiltonian with the determined multipliers substituted.
    pub hamiltonian: Expr,
    pub energy: EnergyPresentations,
}

fn is_lagrangian_var(kind: VarKind) -> bool {
    matches!(kind, VarKind::Field(_) | VarKind::Velocity(_))
}

/// `p_i = dL/dq'_i`.
pub fn legendre_momenta(lagrangian: &Expr, chart: &JetChart) -> Result<Vec<Expr>, PipelineError> {
    if lagrangian.chart() != chart.id() {
        return Err(ChartMismatch.into());
    }
    if let Some(v) = lagrangian
        .variables()
        .into_iter()
        .find(|&v| !is_lagrangian_var(chart.kind(v)))
    {
        return Err(PipelineError::InvalidLagrangian {
            name: chart.name(v).to_string(),
        });
    }
    Ok(chart.velocities().iter().map(|&v| lagrangian.derivative(v)).collect())
}

/// `d p_i / d q'_j`, required to be constant.
pub fn velocity_hessian(momenta: &[Expr], chart: &JetChart) -> Result<Vec<Vec<Rational>>, PipelineError> {
    momenta
        .iter()
        .enumerate()
        .map(|(i, p)| {
            chart
                .velocities()
                .iter()
                .map(|&v| {
                    let entry = p.derivative(v);
                    entry.as_constant().ok_or_else(|| PipelineError::NonInvertibleLegendre {
                        row: chart.name(chart.velocity(i)).to_string(),
                        col: chart.name(v).to_string(),
                        entry: crate::parser::render_expr(&entry, chart),
                    })
                })
                .collect()
        })
        .collect()
}

/// Rows `(W_i, p_i - b_i(q))` of the linear system `W q' = p - b`.
fn legendre_rows(momenta: &[Expr], hessian: &[Vec<Rational>], chart: &JetChart) -> Vec<(Vec<Rational>, Expr)> {
    momenta
        .iter()
        .zip(hessian)
        .enumerate()
        .map(|(i, (p, row))| {
            let linear = row
                .iter()
                .zip(chart.velocities())
                .fold(chart.zero(), |acc, (w, &v)| acc + chart.var(v).scale(w));
            let offset = p - linear;
            (row.clone(), chart.var(chart.momentum(i)) - offset)
        })
        .collect()
}

/// Primary constraints from the left null space of the velocity Hessian,
/// normalized so each has a distinct pivot momentum with unit coefficient.
pub fn detect_primary_constraints(momenta: &[Expr], chart: &JetChart) -> Result<Vec<Constraint>, PipelineError> {
    let hessian = velocity_hessian(momenta, chart)?;
    let reduced = gauss_jordan(legendre_rows(momenta, &hessian, chart), chart.num_fields());
    let rows: Vec<(Vec<Rational>, Expr)> = reduced
        .zero_rows
        .into_iter()
        .map(|phi| {
            let coeffs = chart
                .momenta()
                .iter()
                .map(|&p| phi.derivative(p).as_constant().expect("affine in momenta"))
                .collect();
            (coeffs, phi)
        })
        .collect();
    let normalized = gauss_jordan(rows, chart.num_fields());
    debug_assert!(normalized.zero_rows.iter().all(Expr::is_zero));
    Ok(normalized
        .pivots
        .into_iter()
        .enumerate()
        .map(|(k, row)| {
            let pivot = chart.momentum(row.column);
            Constraint {
                index: k + 1,
                solution: chart.var(pivot) - &row.rhs,
                expr: row.rhs,
                pivot,
                origin: ConstraintOrigin::Primary,
            }
        })
        .collect())
}

/// Simultaneous substitution of every solved form.
pub fn weak_reduce(e: &Expr, constraints: &[Constraint]) -> Expr {
    let bindings: HashMap<VarId, Expr> = constraints.iter().map(|c| (c.pivot, c.solution.clone())).collect();
    e.substitute(&bindings)
        .expect("constraints share the expression's chart")
}

/// `H' = sum p_i q'_i - L` with the velocities eliminated.
pub fn base_hamiltonian(
    lagrangian: &Expr,
    momenta: &[Expr],
    constraints: &[Constraint],
    chart: &JetChart,
) -> Result<Expr, PipelineError> {
    let hessian = velocity_hessian(momenta, chart)?;
    let canonical = chart
        .momenta()
        .iter()
        .zip(chart.velocities())
        .fold(chart.zero(), |acc, (&p, &v)| acc + chart.var(p) * chart.var(v))
        - lagrangian;

    // Invertible directions: q'_pivot = rhs - sum_free coeff * q'_free.
    let reduced = gauss_jordan(legendre_rows(momenta, &hessian, chart), chart.num_fields());
    let mut bindings = HashMap::new();
    for row in &reduced.pivots {
        let mut value = row.rhs.clone();
        for (k, c) in row.coeffs.iter().enumerate() {
            if k != row.column && !c.is_zero() {
                value = value - chart.var(chart.velocity(k)).scale(c);
            }
        }
        bindings.insert(chart.velocity(row.column), value);
    }
    let eliminated = canonical.substitute(&bindings)?;

    // Remaining velocity terms must vanish on the constraint surface.
    let at_rest: HashMap<VarId, Expr> = chart.velocities().iter().map(|&v| (v, chart.zero())).collect();
    let velocity_free = eliminated.substitute(&at_rest)?;
    let residual = weak_reduce(&(&eliminated - &velocity_free), constraints);
    if !residual.is_zero() {
        return Err(PipelineError::LegendreEliminationFailed {
            residual: crate::parser::render_expr(&residual, chart),
        });
    }
    Ok(velocity_free)
}

/// `H = H' + sum_a lambda_a phi_a`, registering one new multiplier per
/// constraint.
pub fn total_hamiltonian(
    base: &Expr,
    constraints: &[Constraint],
    chart: &mut JetChart,
) -> Result<(Expr, Vec<VarId>), PipelineError> {
    let lambdas = chart.add_multipliers(constraints.len())?;
    let mut h = base.clone();
    for (c, &l) in constraints.iter().zip(&lambdas) {
        h = h.try_add(&(chart.var(l) * &c.expr))?;
    }
    Ok((h, lambdas))
}

/// `{F, G} = sum_i (dF/dq_i dG/dp_i - dF/dp_i dG/dq_i)`. Multipliers and
/// velocities are inert.
pub fn poisson_bracket(f: &Expr, g: &Expr, chart: &JetChart) -> Result<Expr, ChartMismatch> {
    if f.chart() != chart.id() || g.chart() != chart.id() {
        return Err(ChartMismatch);
    }
    let mut out = chart.zero();
    for (&q, &p) in chart.fields().iter().zip(chart.momenta()) {
        out = out + f.derivative(q) * g.derivative(p) - f.derivative(p) * g.derivative(q);
    }
    Ok(out)
}

/// `{phi_a, phi_b}` weakly reduced against the same constraint set.
pub fn constraint_matrix(constraints: &[Constraint], chart: &JetChart) -> Result<Vec<Vec<Expr>>, ChartMismatch> {
    constraints
        .iter()
        .map(|a| {
            constraints
                .iter()
                .map(|b| Ok(weak_reduce(&poisson_bracket(&a.expr, &b.expr, chart)?, constraints)))
                .collect()
        })
        .collect()
}

/// Puts a reduced constraint into solved form, preferring momenta, then
/// fields, each in registration order.
fn solve_for_pivot(expr: &Expr, chart: &JetChart) -> Option<(VarId, Expr, Expr)> {
    chart.momenta().iter().chain(chart.fields()).find_map(|&v| {
        let c = expr.derivative(v).as_constant()?;
        if c.is_zero() {
            return None;
        }
        let normalized = expr.scale(&c.recip());
        let solution = chart.var(v) - &normalized;
        Some((v, normalized, solution))
    })
}

/// Solves the consistency conditions `{phi_a, H'} + sum_b lambda_b {phi_a, phi_b} ~ 0`
/// for the multipliers, adding secondary constraints while rows with a zero
/// coefficient block leave a nonzero remainder.
pub fn solve_multipliers(
    chart: &JetChart,
    base: &Expr,
    primary: &[Constraint],
    multipliers: &[VarId],
) -> Result<MultiplierSolution, PipelineError> {
    assert_eq!(
        primary.len(),
        multipliers.len(),
        "one multiplier per primary constraint"
    );
    let mut constraints: Vec<Constraint> = primary.to_vec();
    let mut rounds = Vec::new();
    for round in 1..=MAX_ROUNDS {
        let mut rows = Vec::with_capacity(constraints.len());
        for (a, psi) in constraints.iter().enumerate() {
            let drift = weak_reduce(&poisson_bracket(&psi.expr, base, chart)?, &constraints);
            let mut coeffs = Vec::with_capacity(primary.len());
            for (b, phi) in primary.iter().enumerate() {
                let entry = weak_reduce(&poisson_bracket(&psi.expr, &phi.expr, chart)?, &constraints);
                coeffs.push(
                    entry
                        .as_constant()
                        .ok_or_else(|| PipelineError::NonConstantConstraintMatrix {
                            row: a + 1,
                            col: b + 1,
                            entry: crate::parser::render_expr(&entry, chart),
                        })?,
                );
            }
            rows.push((coeffs, -drift));
        }
        let conditions = rows.len();
        let echelon = gauss_jordan(rows, primary.len());

        let mut added = Vec::new();
        for remainder in &echelon.zero_rows {
            let chi = weak_reduce(remainder, &constraints);
            if chi.is_zero() {
                continue;
            }
            if chi.as_constant().is_some() {
                return Err(PipelineError::Inconsistent {
                    value: crate::parser::render_expr(&chi, chart),
                });
            }
            let (pivot, expr, solution) =
                solve_for_pivot(&chi, chart).ok_or_else(|| PipelineError::UnsupportedConstraint {
                    constraint: crate::parser::render_expr(&chi, chart),
                })?;
            let subst: HashMap<VarId, Expr> = [(pivot, solution.clone())].into_iter().collect();
            for c in constraints.iter_mut() {
                c.solution = c.solution.substitute(&subst)?;
            }
            let index = constraints.len() + 1;
            constraints.push(Constraint {
                index,
                expr,
                pivot,
                solution,
                origin: ConstraintOrigin::Secondary { round },
            });
            added.push(index);
        }
        rounds.push(RoundAudit {
            round,
            conditions,
            rank: echelon.rank(),
            new_constraints: added.clone(),
        });
        if !added.is_empty() {
            continue;
        }

        let mut values = vec![MultiplierValue::Undetermined; primary.len()];
        for row in &echelon.pivots {
            let mut value = row.rhs.clone();
            for (k, c) in row.coeffs.iter().enumerate() {
                if k != row.column && !c.is_zero() {
                    value = value - chart.var(multipliers[k]).scale(c);
                }
            }
            values[row.column] = MultiplierValue::Determined(weak_reduce(&value, &constraints));
        }
        return Ok(MultiplierSolution {
            values,
            constraints,
            rounds,
        });
    }
    Err(PipelineError::IterationCap(MAX_ROUNDS))
}

/// Second-class iff the constraint's row of the reduced matrix is nonzero.
pub fn classify_constraints(matrix: &[Vec<Expr>]) -> Vec<ConstraintClass> {
    matrix
        .iter()
        .map(|row| {
            if row.iter().all(Expr::is_zero) {
                ConstraintClass::FirstClass
            } else {
                ConstraintClass::SecondClass
            }
        })
        .collect()
}

/// `q'_i = dH/dp_i`, `p'_i = -dH/dq_i`, fields first. No weak reduction.
pub fn hamilton_equations(h: &Expr, chart: &JetChart) -> Vec<(VarId, Expr)> {
    let mut eqs = Vec::with_capacity(2 * chart.num_fields());
    for (&q, &p) in chart.fields().iter().zip(chart.momenta()) {
        eqs.push((q, h.derivative(p)));
    }
    for (&q, &p) in chart.fields().iter().zip(chart.momenta()) {
        eqs.push((p, -h.derivative(q)));
    }
    eqs
}

/// `F' = {F, H}`; weak reduction is left to the caller.
pub fn observable_eom(f: &Expr, h: &Expr, chart: &JetChart) -> Result<Expr, ChartMismatch> {
    poisson_bracket(f, h, chart)
}

impl ConstrainedSystem {
    /// Runs the whole algorithm. The chart is extended with one multiplier
    /// per primary constraint.
    pub fn derive(lagrangian: &Expr, chart: &JetChart) -> Result<Self, PipelineError> {
        let mut chart = chart.clone();
        let momenta = legendre_momenta(lagrangian, &chart)?;
        let hessian = velocity_hessian(&momenta, &chart)?;
        let primary = detect_primary_constraints(&momenta, &chart)?;
        let base = base_hamiltonian(lagrangian, &momenta, &primary, &chart)?;
        let (total, multipliers) = total_hamiltonian(&base, &primary, &mut chart)?;
        let solution = solve_multipliers(&chart, &base, &primary, &multipliers)?;
        let constraints = solution.constraints;
        let matrix = constraint_matrix(&constraints, &chart)?;
        let classification = classify_constraints(&matrix);

        let bindings: HashMap<VarId, Expr> = multipliers
            .iter()
            .zip(&solution.values)
            .filter_map(|(&l, v)| v.expr().map(|e| (l, e.clone())))
            .collect();
        let hamiltonian = total.substitute(&bindings)?;

        let half = rat(1, 2);
        let kinetic = chart
            .velocities()
            .iter()
            .fold(chart.zero(), |acc, &v| acc + chart.var(v).pow(2))
            .scale(&half);
        let momentum_sq = chart
            .momenta()
            .iter()
            .fold(chart.zero(), |acc, &p| acc + chart.var(p).pow(2))
            .scale(&half);
        let energy = EnergyPresentations {
            momentum_form: &momentum_sq + &kinetic,
            hamiltonian_form: weak_reduce(&hamiltonian.scale(&half), &constraints) + &kinetic,
            kinetic,
        };

        Ok(ConstrainedSystem {
            num_primary: primary.len(),
            chart,
            lagrangian: lagrangian.clone(),
            momenta,
            hessian,
            constraints,
            base_hamiltonian: base,
            multipliers,
            total_hamiltonian: total,
            constraint_matrix: matrix,
            multiplier_values: solution.values,
            classification,
            rounds: solution.rounds,
            hamiltonian,
            energy,
        })
    }

    pub fn primary(&self) -> &[Constraint] {
        &self.constraints[..self.num_primary]
    }

    pub fn secondary(&self) -> &[Constraint] {
        &self.constraints[self.num_primary..]
    }

    pub fn weak_reduce(&self, e: &Expr) -> Expr {
        weak_reduce(e, &self.constraints)
    }

    pub fn bracket(&self, f: &Expr, g: &Expr) -> Result<Expr, ChartMismatch> {
        poisson_bracket(f, g, &self.chart)
    }

    pub fn has_undetermined_multipliers(&self) -> bool {
        self.multiplier_values
            .iter()
            .any(|v| matches!(v, MultiplierValue::Undetermined))
    }

    pub fn hamilton_equations(&self) -> Vec<(VarId, Expr)> {
        hamilton_equations(&self.hamiltonian, &self.chart)
    }

    /// `{phi_a, H}` weakly reduced for every constraint; all zero when the
    /// system is consistent.
    pub fn consistency_residuals(&self) -> Vec<Expr> {
        self.constraints
            .iter()
            .map(|c| {
                let b = poisson_bracket(&c.expr, &self.hamiltonian, &self.chart).expect("same chart");
                self.weak_reduce(&b)
            })
            .collect()
    }

    /// The reduced constraint matrix as rationals, if every entry is
    /// constant.
    pub fn constant_matrix(&self) -> Option<Vec<Vec<Rational>>> {
        self.constraint_matrix
            .iter()
            .map(|row| row.iter().map(Expr::as_constant).collect())
            .collect()
    }

    /// `{F,G}_D = {F,G} - sum_ab {F,phi_a} (C^-1)_ab {phi_b,G}`.
    pub fn dirac_bracket(&self, f: &Expr, g: &Expr) -> Result<Expr, PipelineError> {
        if self.classification.contains(&ConstraintClass::FirstClass) {
            return Err(PipelineError::DiracBracketUndefined(
                "first-class constraints present".into(),
            ));
        }
        let c = self
            .constant_matrix()
            .ok_or_else(|| PipelineError::DiracBracketUndefined("constraint matrix is not constant".into()))?;
        let inv =
            invert(&c).ok_or_else(|| PipelineError::DiracBracketUndefined("constraint matrix is singular".into()))?;
        let chart = &self.chart;
        let left: Vec<Expr> = self
            .constraints
            .iter()
            .map(|phi| poisson_bracket(f, &phi.expr, chart))
            .collect::<Result<_, _>>()?;
        let right: Vec<Expr> = self
            .constraints
            .iter()
            .map(|phi| poisson_bracket(&phi.expr, g, chart))
            .collect::<Result<_, _>>()?;
        let mut out = poisson_bracket(f, g, chart)?;
        for (a, fa) in left.iter().enumerate() {
            for (b, gb) in right.iter().enumerate() {
                if !inv[a][b].is_zero() {
                    out = out - (fa * gb).scale(&inv[a][b]);
                }
            }
        }
        Ok(out)
    }
}
