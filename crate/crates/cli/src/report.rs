//! Report trees for each subcommand. The same structures back the text and
//! JSON outputs.

use std::fmt::{self, Display, Formatter};

use dirac_core::dirac::{ConstrainedSystem, ConstraintClass, ConstraintOrigin, MultiplierValue};
use dirac_core::flow::{MonitorSummary, Trajectory};
use dirac_core::verify::{Check, Verdict};
use dirac_core::{render_expr, Expr, JetChart, SystemDefinition};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Equation {
    pub name: String,
    pub expr: String,
}

#[derive(Debug, Serialize)]
pub struct ConstraintEntry {
    pub name: String,
    pub expr: String,
    pub pivot: String,
    pub solution: String,
    pub origin: String,
    pub class: String,
}

#[derive(Debug, Serialize)]
pub struct MultiplierEntry {
    pub name: String,
    /// `None` when the consistency conditions leave it free.
    pub value: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RoundEntry {
    pub round: usize,
    pub conditions: usize,
    pub rank: usize,
    pub new_constraints: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct HamiltonEquation {
    pub name: String,
    pub rhs: String,
    pub weak: String,
}

#[derive(Debug, Serialize)]
pub struct Energy {
    pub kinetic: String,
    pub momentum_form: String,
    pub hamiltonian_form: String,
}

#[derive(Debug, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub verdict: String,
    pub detail: String,
}

impl From<&Check> for CheckEntry {
    fn from(c: &Check) -> Self {
        CheckEntry {
            name: c.name.to_string(),
            verdict: c.verdict.to_string(),
            detail: c.detail.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DeriveReport {
    pub system: String,
    pub fields: Vec<String>,
    pub lagrangian: String,
    pub momenta: Vec<Equation>,
    pub constraints: Vec<ConstraintEntry>,
    pub base_hamiltonian: String,
    pub total_hamiltonian: String,
    pub constraint_matrix: Vec<Vec<String>>,
    pub multipliers: Vec<MultiplierEntry>,
    pub rounds: Vec<RoundEntry>,
    pub hamiltonian: String,
    pub weak_hamiltonian: String,
    pub hamilton_equations: Vec<HamiltonEquation>,
    pub energy: Energy,
    pub verdicts: Vec<CheckEntry>,
}

fn constraint_name(index: usize) -> String {
    format!("phi_{index}")
}

impl DeriveReport {
    pub fn new(def: &SystemDefinition, sys: &ConstrainedSystem, verdicts: &[Check]) -> Self {
        let c = &sys.chart;
        let r = |e: &Expr| render_expr(e, c);
        DeriveReport {
            system: def.name.clone(),
            fields: c.fields().iter().map(|&v| c.name(v).to_string()).collect(),
            lagrangian: r(&sys.lagrangian),
            momenta: c
                .momenta()
                .iter()
                .zip(&sys.momenta)
                .map(|(&v, e)| Equation {
                    name: c.name(v).to_string(),
                    expr: r(e),
                })
                .collect(),
            constraints: sys
                .constraints
                .iter()
                .zip(&sys.classification)
                .map(|(k, class)| ConstraintEntry {
                    name: constraint_name(k.index),
                    expr: r(&k.expr),
                    pivot: c.name(k.pivot).to_string(),
                    solution: r(&k.solution),
                    origin: match k.origin {
                        ConstraintOrigin::Primary => "primary".into(),
                        ConstraintOrigin::Secondary { round } => format!("secondary (round {round})"),
                    },
                    class: match class {
                        ConstraintClass::FirstClass => "first-class".into(),
                        ConstraintClass::SecondClass => "second-class".into(),
                    },
                })
                .collect(),
            base_hamiltonian: r(&sys.base_hamiltonian),
            total_hamiltonian: r(&sys.total_hamiltonian),
            constraint_matrix: sys
                .constraint_matrix
                .iter()
                .map(|row| row.iter().map(r).collect())
                .collect(),
            multipliers: sys
                .multipliers
                .iter()
                .zip(&sys.multiplier_values)
                .map(|(&l, v)| MultiplierEntry {
                    name: c.name(l).to_string(),
                    value: match v {
                        MultiplierValue::Determined(e) => Some(r(e)),
                        MultiplierValue::Undetermined => None,
                    },
                })
                .collect(),
            rounds: sys
                .rounds
                .iter()
                .map(|a| RoundEntry {
                    round: a.round,
                    conditions: a.conditions,
                    rank: a.rank,
                    new_constraints: a.new_constraints.iter().map(|&i| constraint_name(i)).collect(),
                })
                .collect(),
            hamiltonian: r(&sys.hamiltonian),
            weak_hamiltonian: r(&sys.weak_reduce(&sys.hamiltonian)),
            hamilton_equations: sys
                .hamilton_equations()
                .into_iter()
                .map(|(v, e)| HamiltonEquation {
                    name: c.name(v).to_string(),
                    weak: r(&sys.weak_reduce(&e)),
                    rhs: r(&e),
                })
                .collect(),
            energy: Energy {
                kinetic: r(&sys.energy.kinetic),
                momentum_form: r(&sys.energy.momentum_form),
                hamiltonian_form: r(&sys.energy.hamiltonian_form),
            },
            verdicts: verdicts.iter().map(CheckEntry::from).collect(),
        }
    }
}

fn write_checks(f: &mut Formatter<'_>, checks: &[CheckEntry]) -> fmt::Result {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in checks {
        writeln!(f, "  {:<4} {:<width$}  {}", c.verdict, c.name, c.detail)?;
    }
    Ok(())
}

impl Display for DeriveReport {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.system)?;
        writeln!(f, "fields: {}", self.fields.join(", "))?;
        writeln!(f, "L = {}", self.lagrangian)?;

        writeln!(f, "\nmomenta")?;
        for m in &self.momenta {
            writeln!(f, "  {} = {}", m.name, m.expr)?;
        }

        writeln!(f, "\nconstraints")?;
        if self.constraints.is_empty() {
            writeln!(f, "  no constraints")?;
        }
        for k in &self.constraints {
            writeln!(
                f,
                "  {} = {}    ({}, {}; {} = {})",
                k.name, k.expr, k.origin, k.class, k.pivot, k.solution
            )?;
        }
        for a in &self.rounds {
            let new = if a.new_constraints.is_empty() {
                "none".to_string()
            } else {
                a.new_constraints.join(", ")
            };
            writeln!(
                f,
                "  round {}: {} condition(s), rank {}, new: {}",
                a.round, a.conditions, a.rank, new
            )?;
        }

        writeln!(f, "\nbase hamiltonian\n  H' = {}", self.base_hamiltonian)?;
        writeln!(f, "\ntotal hamiltonian\n  H_T = {}", self.total_hamiltonian)?;

        if !self.constraint_matrix.is_empty() {
            writeln!(f, "\nconstraint matrix")?;
            for row in &self.constraint_matrix {
                writeln!(f, "  [{}]", row.join(", "))?;
            }
        }

        if !self.multipliers.is_empty() {
            writeln!(f, "\nmultipliers")?;
            for m in &self.multipliers {
                match &m.value {
                    Some(v) => writeln!(f, "  {} = {}", m.name, v)?,
                    None => writeln!(f, "  {} undetermined", m.name)?,
                }
            }
        }

        writeln!(f, "\nhamiltonian")?;
        writeln!(f, "  H = {}", self.hamiltonian)?;
        writeln!(f, "  H ~ {}", self.weak_hamiltonian)?;

        writeln!(f, "\nhamilton equations")?;
        for e in &self.hamilton_equations {
            writeln!(f, "  {}' = {}    ~ {}", e.name, e.rhs, e.weak)?;
        }

        writeln!(f, "\nenergy")?;
        writeln!(f, "  kinetic          {}", self.energy.kinetic)?;
        writeln!(f, "  momentum form    {}", self.energy.momentum_form)?;
        writeln!(f, "  hamiltonian form {}", self.energy.hamiltonian_form)?;

        writeln!(f, "\nverdicts")?;
        write_checks(f, &self.verdicts)
    }
}

#[derive(Debug, Serialize)]
pub struct BracketReport {
    pub left: String,
    pub right: String,
    pub bracket: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak: Option<String>,
}

impl Display for BracketReport {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.bracket)?;
        if let Some(w) = &self.weak {
            writeln!(f, "weak: {w}")?;
        }
        Ok(())
    }
}

/// Monitor maxima; `None` where a monitor does not apply.
#[derive(Debug, Serialize)]
pub struct MonitorEntry {
    pub max_hamiltonian_drift: Option<f64>,
    pub max_radius2_drift: Option<f64>,
    pub max_constraint: Option<f64>,
    pub max_constraint_each: Vec<Option<f64>>,
    pub max_em_residual: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&MonitorSummary> for MonitorEntry {
    fn from(s: &MonitorSummary) -> Self {
        MonitorEntry {
            max_hamiltonian_drift: finite(s.max_hamiltonian_drift),
            max_radius2_drift: finite(s.max_radius2_drift),
            max_constraint: if s.max_constraint_each.is_empty() {
                None
            } else {
                finite(s.max_constraint)
            },
            max_constraint_each: s.max_constraint_each.iter().map(|&x| finite(x)).collect(),
            max_em_residual: finite(s.max_em_residual),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StateEntry {
    pub name: String,
    pub initial: f64,
    #[serde(rename = "final")]
    pub last: f64,
}

#[derive(Debug, Serialize)]
pub struct IntegrateReport {
    pub system: String,
    pub mode: String,
    pub step: f64,
    pub alpha_max: f64,
    pub rows: usize,
    pub state: Vec<StateEntry>,
    pub monitors: MonitorEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl IntegrateReport {
    pub fn new(
        def: &SystemDefinition,
        chart: &JetChart,
        reduced: bool,
        alpha_max: f64,
        traj: &Trajectory,
        summary: &MonitorSummary,
        csv: Option<String>,
    ) -> Self {
        let first = &traj.states[0].values;
        let last = &traj.last().values;
        let names = chart
            .fields()
            .iter()
            .chain(chart.momenta())
            .map(|&v| chart.name(v).to_string());
        IntegrateReport {
            system: def.name.clone(),
            mode: if reduced { "reduced" } else { "full" }.into(),
            step: traj.step,
            alpha_max,
            rows: traj.states.len(),
            state: names
                .zip(first.iter().zip(last))
                .map(|(name, (&initial, &last))| StateEntry { name, initial, last })
                .collect(),
            monitors: summary.into(),
            csv,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"))
}

impl Display for IntegrateReport {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {} ({} mode)", self.system, self.mode)?;
        writeln!(
            f,
            "alpha in [0, {}], step {}, {} rows",
            self.alpha_max, self.step, self.rows
        )?;
        writeln!(f, "\nstate")?;
        for s in &self.state {
            writeln!(f, "  {:<8} {:>24.16e} -> {:>24.16e}", s.name, s.initial, s.last)?;
        }
        let m = &self.monitors;
        writeln!(f, "\nmonitors")?;
        writeln!(f, "  max |dH|          {}", opt(m.max_hamiltonian_drift))?;
        writeln!(f, "  max |d radius2|   {}", opt(m.max_radius2_drift))?;
        writeln!(f, "  max |phi|         {}", opt(m.max_constraint))?;
        for (a, x) in m.max_constraint_each.iter().enumerate() {
            writeln!(f, "    phi_{:<12} {}", a + 1, opt(*x))?;
        }
        writeln!(f, "  max |em residual| {}", opt(m.max_em_residual))?;
        if let Some(path) = &self.csv {
            writeln!(f, "\nwrote {path}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub system: String,
    pub passed: bool,
    pub checks: Vec<CheckEntry>,
}

impl VerifyReport {
    pub fn new(def: &SystemDefinition, checks: &[Check]) -> Self {
        VerifyReport {
            system: def.name.clone(),
            passed: checks.iter().all(|c| c.verdict != Verdict::Fail),
            checks: checks.iter().map(CheckEntry::from).collect(),
        }
    }
}

impl Display for VerifyReport {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.system)?;
        write_checks(f, &self.checks)?;
        let failed = self.checks.iter().filter(|c| c.verdict == "fail").count();
        if failed == 0 {
            writeln!(f, "all checks passed")
        } else {
            writeln!(f, "{failed} check(s) failed")
        }
    }
}
