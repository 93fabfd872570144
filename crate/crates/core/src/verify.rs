//! Symbolic and numeric checks run against a system definition.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::chart::VarId;
use crate::dirac::{ConstrainedSystem, ConstraintClass, MultiplierValue};
use crate::expr::Expr;
use crate::flow::{exact_rotation, initial_state, monitor_report, FlowSetup, DEFAULT_STEP};
use crate::lagrangian::{euler_lagrange, verify_el_equals_lie, ElLieVerdict, LieSystem};
use crate::parser::render_expr;
use crate::sample::random_expr;
use crate::system::SystemDefinition;

/// Tolerance on the return to the start and on agreement with the closed form.
pub const ORACLE_TOL: f64 = 1e-6;
/// Tolerance on conserved-quantity and constraint drift.
pub const MONITOR_TOL: f64 = 1e-8;
/// Tolerance on the energy-momentum residual.
pub const EM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, verdict: Verdict, detail: impl Into<String>) -> Self {
        Check {
            name,
            verdict,
            detail: detail.into(),
        }
    }

    fn from_failures(name: &'static str, failures: Vec<String>, ok: impl Into<String>) -> Self {
        if failures.is_empty() {
            Check::new(name, Verdict::Pass, ok)
        } else {
            Check::new(name, Verdict::Fail, failures.join("; "))
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random triples for the bracket identities.
    pub bracket_samples: usize,
    /// Random initial points compared with the closed-form rotation.
    pub rotation_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0x5eed,
            bracket_samples: 20,
            rotation_samples: 10,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.verdict != Verdict::Fail)
}

/// Runs every check. A pipeline failure is reported as a failing check and
/// marks the checks that need the derived system as not applicable.
pub fn run_checks(def: &SystemDefinition, options: &VerifyOptions) -> Vec<Check> {
    let mut checks = vec![el_equals_lie(def)];
    let sys = match ConstrainedSystem::derive(&def.lagrangian, &def.chart) {
        Ok(sys) => {
            checks.insert(
                0,
                Check::new(
                    "pipeline",
                    Verdict::Pass,
                    format!(
                        "{} primary, {} secondary constraint(s)",
                        sys.primary().len(),
                        sys.secondary().len()
                    ),
                ),
            );
            sys
        }
        Err(e) => {
            checks.insert(0, Check::new("pipeline", Verdict::Fail, e.to_string()));
            for name in DERIVED_CHECKS {
                checks.push(Check::new(name, Verdict::NotApplicable, "pipeline failed"));
            }
            return checks;
        }
    };
    let mut rng = StdRng::seed_from_u64(options.seed);
    let lie = def.generators.as_ref();
    checks.push(constraints_weakly_vanish(&sys));
    checks.push(canonical_pairs(&sys));
    checks.push(bracket_algebra(&sys, options.bracket_samples, &mut rng));
    checks.push(consistency(&sys));
    checks.push(hamilton_equals_lie(&sys, lie));
    checks.push(dirac_bracket_centralizes(&sys));
    checks.extend(numeric_checks(def, &sys, options.rotation_samples, &mut rng));
    checks
}

const DERIVED_CHECKS: [&str; 8] = [
    "constraints_weakly_vanish",
    "canonical_pairs",
    "bracket_algebra",
    "consistency",
    "hamilton_equals_lie",
    "dirac_bracket_centralizes",
    "rotation_oracle",
    "flow_monitors",
];

/// Euler-Lagrange residuals on the Lie flow; not applicable without
/// generators.
pub fn el_equals_lie(def: &SystemDefinition) -> Check {
    const NAME: &str = "el_equals_lie";
    let Some(lie) = &def.generators else {
        return Check::new(NAME, Verdict::NotApplicable, "no generators");
    };
    let verdict = euler_lagrange(&def.lagrangian, &def.chart).and_then(|el| verify_el_equals_lie(&el, lie, &def.chart));
    match verdict {
        Ok(ElLieVerdict::Equivalent) => Check::new(NAME, Verdict::Pass, "all residuals vanish on the flow"),
        Ok(ElLieVerdict::Residuals(rs)) => Check::new(
            NAME,
            Verdict::Fail,
            rs.iter()
                .map(|(i, r)| {
                    format!(
                        "residual for {} is {}",
                        def.chart.name(def.chart.field(*i)),
                        render_expr(r, &def.chart)
                    )
                })
                .collect::<Vec<_>>()
                .join("; "),
        ),
        Err(e) => Check::new(NAME, Verdict::Fail, e.to_string()),
    }
}

fn constraints_weakly_vanish(sys: &ConstrainedSystem) -> Check {
    let failures = sys
        .constraints
        .iter()
        .filter(|c| !sys.weak_reduce(&c.expr).is_zero())
        .map(|c| format!("phi_{} does not reduce to 0", c.index))
        .collect();
    Check::from_failures(
        "constraints_weakly_vanish",
        failures,
        format!("{} constraint(s)", sys.constraints.len()),
    )
}

fn canonical_pairs(sys: &ConstrainedSystem) -> Check {
    let chart = &sys.chart;
    let n = chart.num_fields();
    let mut failures = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (qi, qj) = (chart.var(chart.field(i)), chart.var(chart.field(j)));
            let (pi, pj) = (chart.var(chart.momentum(i)), chart.var(chart.momentum(j)));
            let delta = if i == j { chart.one() } else { chart.zero() };
            let cases = [(&qi, &pj, &delta), (&qi, &qj, &chart.zero()), (&pi, &pj, &chart.zero())];
            for (a, b, want) in cases {
                let got = sys.bracket(a, b).expect("same chart");
                if &got != want {
                    failures.push(format!(
                        "{{{}, {}}} = {}",
                        render_expr(a, chart),
                        render_expr(b, chart),
                        render_expr(&got, chart)
                    ));
                }
            }
        }
    }
    Check::from_failures("canonical_pairs", failures, format!("{n} pair(s)"))
}

fn bracket_algebra(sys: &ConstrainedSystem, samples: usize, rng: &mut StdRng) -> Check {
    let chart = &sys.chart;
    let vars: Vec<VarId> = chart.fields().iter().chain(chart.momenta()).copied().collect();
    let br = |a: &Expr, b: &Expr| sys.bracket(a, b).expect("same chart");
    let mut failures = Vec::new();
    for k in 0..samples {
        let [f, g, h] = [(); 3].map(|_| random_expr(rng, chart, &vars, 3, 4));
        if br(&f, &g) != -br(&g, &f) {
            failures.push(format!("antisymmetry fails on sample {k}"));
        }
        if br(&f, &(&g * &h)) != br(&f, &g) * &h + &g * br(&f, &h) {
            failures.push(format!("Leibniz rule fails on sample {k}"));
        }
        let jacobi = br(&f, &br(&g, &h)) + br(&g, &br(&h, &f)) + br(&h, &br(&f, &g));
        if !jacobi.is_zero() {
            failures.push(format!("Jacobi identity fails on sample {k}"));
        }
    }
    Check::from_failures("bracket_algebra", failures, format!("{samples} random triple(s)"))
}

/// Weak preservation of every constraint, noting undetermined multipliers.
pub fn consistency(sys: &ConstrainedSystem) -> Check {
    let chart = &sys.chart;
    let failures: Vec<String> = sys
        .consistency_residuals()
        .iter()
        .zip(&sys.constraints)
        .filter(|(r, _)| !r.is_zero())
        .map(|(r, c)| format!("{{phi_{}, H}} ~ {}", c.index, render_expr(r, chart)))
        .collect();
    if !failures.is_empty() {
        return Check::new("consistency", Verdict::Fail, failures.join("; "));
    }
    let undetermined: Vec<&str> = sys
        .multipliers
        .iter()
        .zip(&sys.multiplier_values)
        .filter(|(_, v)| matches!(v, MultiplierValue::Undetermined))
        .map(|(&l, _)| chart.name(l))
        .collect();
    let detail = if undetermined.is_empty() {
        "all constraints preserved".to_string()
    } else {
        format!(
            "all constraints preserved; undetermined multiplier(s): {}",
            undetermined.join(", ")
        )
    };
    Check::new("consistency", Verdict::Pass, detail)
}

/// Momenta on the flow, `P_i(q) = p_i(q, xi(q))`.
fn momenta_on_flow(sys: &ConstrainedSystem, lie: &LieSystem) -> Vec<Expr> {
    let chart = &sys.chart;
    let velocities: HashMap<VarId, Expr> = lie.lie_equations(chart).into_iter().collect();
    sys.momenta
        .iter()
        .map(|p| p.substitute(&velocities).expect("same chart"))
        .collect()
}

/// Substitutes `p = P(q)` into Hamilton's equations and compares with the
/// Lie equations and their image under `P`.
fn hamilton_equals_lie(sys: &ConstrainedSystem, lie: Option<&LieSystem>) -> Check {
    const NAME: &str = "hamilton_equals_lie";
    let Some(lie) = lie else {
        return Check::new(NAME, Verdict::NotApplicable, "no generators");
    };
    if sys.has_undetermined_multipliers() {
        return Check::new(NAME, Verdict::NotApplicable, "undetermined multipliers");
    }
    let chart = &sys.chart;
    let flow_momenta = momenta_on_flow(sys, lie);
    let bindings: HashMap<VarId, Expr> = chart
        .momenta()
        .iter()
        .copied()
        .zip(flow_momenta.iter().cloned())
        .collect();
    let xi = lie.generators();
    let n = chart.num_fields();
    let mut failures = Vec::new();
    for (k, (v, rhs)) in sys.hamilton_equations().into_iter().enumerate() {
        let got = rhs.substitute(&bindings).expect("same chart");
        let want = if k < n {
            xi[k].clone()
        } else {
            let p = &flow_momenta[k - n];
            (0..n).fold(chart.zero(), |acc, j| acc + p.derivative(chart.field(j)) * &xi[j])
        };
        if got != want {
            failures.push(format!(
                "{}' = {}, expected {}",
                chart.name(v),
                render_expr(&got, chart),
                render_expr(&want, chart)
            ));
        }
    }
    Check::from_failures(NAME, failures, format!("{} equation(s)", 2 * n))
}

fn dirac_bracket_centralizes(sys: &ConstrainedSystem) -> Check {
    const NAME: &str = "dirac_bracket_centralizes";
    if sys.constraints.is_empty() {
        return Check::new(NAME, Verdict::NotApplicable, "no constraints");
    }
    if sys.classification.contains(&ConstraintClass::FirstClass) {
        return Check::new(NAME, Verdict::NotApplicable, "first-class constraints present");
    }
    let chart = &sys.chart;
    let mut failures = Vec::new();
    for &v in chart.fields().iter().chain(chart.momenta()) {
        for c in &sys.constraints {
            match sys.dirac_bracket(&chart.var(v), &c.expr) {
                Ok(b) if sys.weak_reduce(&b).is_zero() => {}
                Ok(b) => failures.push(format!(
                    "{{{}, phi_{}}}_D ~ {}",
                    chart.name(v),
                    c.index,
                    render_expr(&sys.weak_reduce(&b), chart)
                )),
                Err(e) => return Check::new(NAME, Verdict::Fail, e.to_string()),
            }
        }
    }
    Check::from_failures(NAME, failures, "every constraint is central")
}

fn numeric_checks(def: &SystemDefinition, sys: &ConstrainedSystem, samples: usize, rng: &mut StdRng) -> Vec<Check> {
    let skip = |why: &str| {
        vec![
            Check::new("rotation_oracle", Verdict::NotApplicable, why),
            Check::new("flow_monitors", Verdict::NotApplicable, why),
        ]
    };
    let Some(lie) = &def.generators else {
        return skip("no generators");
    };
    if sys.has_undetermined_multipliers() {
        return skip("undetermined multipliers");
    }
    let setup = match FlowSetup::full(sys) {
        Ok(s) => s,
        Err(e) => {
            return vec![
                Check::new("rotation_oracle", Verdict::NotApplicable, e.to_string()),
                Check::new("flow_monitors", Verdict::Fail, e.to_string()),
            ]
        }
    };
    let n = def.chart.num_fields();
    let start = def.integrate.init.clone().unwrap_or_else(|| {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    });
    let alpha_max = def.integrate.alpha_max.unwrap_or(TAU);
    let step = def.integrate.step.unwrap_or(DEFAULT_STEP);
    let run =
        |fields: &[f64]| initial_state(sys, fields, Some(lie)).and_then(|init| setup.integrate(&init, alpha_max, step));

    let rotation = lie.is_plane_rotation(&def.chart);
    let traj = match run(&start) {
        Ok(t) => t,
        Err(e) => {
            return vec![
                Check::new("rotation_oracle", Verdict::Fail, e.to_string()),
                Check::new("flow_monitors", Verdict::Fail, e.to_string()),
            ]
        }
    };

    let summary = monitor_report(&traj);
    let mut failures = Vec::new();
    let mut limit = |label: &str, value: f64, tol: f64| {
        if value.is_nan() {
            return;
        }
        if value > tol {
            failures.push(format!("{label} = {value:.3e} > {tol:.0e}"));
        }
    };
    limit("max |dH|", summary.max_hamiltonian_drift, MONITOR_TOL);
    limit("max |phi|", summary.max_constraint, MONITOR_TOL);
    if rotation {
        limit("max |d radius2|", summary.max_radius2_drift, MONITOR_TOL);
        limit("max |em residual|", summary.max_em_residual, EM_TOL);
    }
    let monitors = Check::from_failures(
        "flow_monitors",
        failures,
        format!(
            "max |dH| = {:.3e}, max |phi| = {:.3e}",
            summary.max_hamiltonian_drift, summary.max_constraint
        ),
    );

    if !rotation {
        return vec![
            Check::new(
                "rotation_oracle",
                Verdict::NotApplicable,
                "generators are not the plane rotation",
            ),
            monitors,
        ];
    }
    let mut starts = vec![start.clone()];
    starts.extend((0..samples).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]));
    let mut worst: f64 = 0.0;
    for (k, s) in starts.iter().enumerate() {
        let t = if k == 0 { Ok(traj.clone()) } else { run(s) };
        match t {
            Ok(t) => {
                for state in &t.states {
                    let (x, y) = exact_rotation(s[0], s[1], state.alpha);
                    worst = worst.max((state.values[0] - x).abs()).max((state.values[1] - y).abs());
                }
            }
            Err(e) => return vec![Check::new("rotation_oracle", Verdict::Fail, e.to_string()), monitors],
        }
    }
    let detail = format!("{} start(s), max deviation {worst:.3e}", starts.len());
    let oracle = if worst <= ORACLE_TOL {
        Check::new("rotation_oracle", Verdict::Pass, detail)
    } else {
        Check::new("rotation_oracle", Verdict::Fail, detail)
    };
    vec![oracle, monitors]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::parse_system_file;

    fn run(text: &str) -> Vec<Check> {
        run_checks(&parse_system_file(text).unwrap(), &VerifyOptions::default())
    }

    fn verdict(checks: &[Check], name: &str) -> Verdict {
        checks.iter().find(|c| c.name == name).unwrap().verdict
    }

    #[test]
    fn so2_passes_everything() {
        let checks = run(include_str!("../../../presets/so2.system"));
        for c in &checks {
            assert_eq!(c.verdict, Verdict::Pass, "{}: {}", c.name, c.detail);
        }
        assert_eq!(checks.len(), 10);
    }

    #[test]
    fn regular_passes_with_no_constraints() {
        let checks = run(include_str!("../../../presets/regular.system"));
        assert!(all_pass(&checks), "{checks:#?}");
        assert_eq!(verdict(&checks, "dirac_bracket_centralizes"), Verdict::NotApplicable);
        assert_eq!(verdict(&checks, "rotation_oracle"), Verdict::Pass);
    }

    #[test]
    fn firstclass_reports_undetermined_multiplier() {
        let checks = run(include_str!("../../../presets/firstclass.system"));
        assert!(all_pass(&checks));
        assert_eq!(verdict(&checks, "el_equals_lie"), Verdict::NotApplicable);
        let c = checks.iter().find(|c| c.name == "consistency").unwrap();
        assert_eq!(c.verdict, Verdict::Pass);
        assert!(
            c.detail.contains("undetermined multiplier(s): lambda_1"),
            "{}",
            c.detail
        );
    }

    #[test]
    fn broken_fails_el_check() {
        let checks = run(include_str!("../../../presets/broken.system"));
        assert!(!all_pass(&checks));
        let c = checks.iter().find(|c| c.name == "el_equals_lie").unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        assert_eq!(c.detail, "residual for f is 1");
    }

    #[test]
    fn pipeline_error_is_a_failed_check() {
        let checks = run("[system]\nname = x\nfields = f\n[lagrangian]\nL = f'^4\n");
        assert_eq!(verdict(&checks, "pipeline"), Verdict::Fail);
        assert_eq!(verdict(&checks, "flow_monitors"), Verdict::NotApplicable);
        assert_eq!(checks.len(), 10);
    }
}
