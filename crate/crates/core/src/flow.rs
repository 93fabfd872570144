//! Fixed-step RK4 integration of derived flows, with conservation and
//! constraint-drift monitors evaluated from the symbolic expressions.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::chart::{JetChart, VarId, VarKind};
use crate::dirac::ConstrainedSystem;
use crate::expr::{rational_to_f64, Expr};
use crate::lagrangian::LieSystem;

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("right side for `{target}` contains multiplier `{name}`; substitute multipliers first")]
    FreeMultiplier { target: String, name: String },
    #[error("right side for `{target}` contains `{name}`, which is not a phase-space variable")]
    NotPhaseSpace { target: String, name: String },
    #[error("no equation given for `{0}`")]
    MissingEquation(String),
    #[error("`{0}` is not a phase-space variable of this chart")]
    UnknownTarget(String),
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("alpha_max must be nonnegative and finite, got {0}")]
    BadAlphaMax(f64),
    #[error("initial state has {found} values, expected {expected}")]
    BadInit { expected: usize, found: usize },
    #[error("non-finite initial value")]
    NonFiniteInit,
    #[error("non-finite value encountered at alpha = {alpha}")]
    NonFinite { alpha: f64 },
    #[error("reduced mode unavailable: {0}")]
    ReducedUnavailable(String),
}

/// Closed-form rotation of `(x, y)` by `alpha`.
pub fn exact_rotation(x: f64, y: f64, alpha: f64) -> (f64, f64) {
    let (s, c) = alpha.sin_cos();
    (x * c - y * s, x * s + y * c)
}

/// A polynomial flattened to `(coefficient, [(slot, exponent)])` terms.
/// Evaluation repeats [`Expr::eval_with`] operation for operation.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    /// Fails with the first variable that has no slot.
    pub fn compile(e: &Expr, slots: &HashMap<VarId, usize>) -> Result<Self, VarId> {
        let terms = e
            .terms()
            .map(|(m, c)| {
                let factors = m
                    .factors()
                    .iter()
                    .map(|&(v, k)| slots.get(&v).map(|&s| (s, k as i32)).ok_or(v))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((rational_to_f64(c), factors))
            })
            .collect::<Result<Vec<_>, VarId>>()?;
        Ok(CompiledPoly { terms })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for &(slot, e) in factors {
                t *= x[slot].powi(e);
            }
            sum += t;
        }
        sum
    }
}

/// Phase-space ordering: fields, then momenta.
pub fn phase_layout(chart: &JetChart) -> Vec<VarId> {
    chart.fields().iter().chain(chart.momenta()).copied().collect()
}

fn phase_slots(chart: &JetChart) -> HashMap<VarId, usize> {
    phase_layout(chart)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect()
}

fn compile_rhs(
    target: VarId,
    e: &Expr,
    chart: &JetChart,
    slots: &HashMap<VarId, usize>,
) -> Result<CompiledPoly, FlowError> {
    CompiledPoly::compile(e, slots).map_err(|v| {
        let (target, name) = (chart.name(target).to_string(), chart.name(v).to_string());
        match chart.kind(v) {
            VarKind::Multiplier(_) => FlowError::FreeMultiplier { target, name },
            _ => FlowError::NotPhaseSpace { target, name },
        }
    })
}

/// Right-hand sides over the phase vector `(fields..., momenta...)`.
///
/// `integrated` lists the slots advanced by the integrator; every other slot
/// is recomputed from `lift` after each accepted step.
#[derive(Debug, Clone)]
pub struct CompiledField {
    dim: usize,
    integrated: Vec<usize>,
    rhs: Vec<CompiledPoly>,
    lift: Vec<(usize, CompiledPoly)>,
}

impl CompiledField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_reduced(&self) -> bool {
        !self.lift.is_empty()
    }

    /// Derivative of each integrated slot, in `integrated` order.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.rhs.iter().map(|p| p.eval(x)).collect()
    }

    fn apply_lift(&self, x: &mut [f64]) {
        for (slot, p) in &self.lift {
            x[*slot] = p.eval(x);
        }
    }
}

/// Compiles a full phase-space system: one equation per field and momentum.
pub fn compile_field(equations: &[(VarId, Expr)], chart: &JetChart) -> Result<CompiledField, FlowError> {
    let slots = phase_slots(chart);
    let mut rhs: Vec<Option<CompiledPoly>> = vec![None; slots.len()];
    for (target, e) in equations {
        let slot = *slots
            .get(target)
            .ok_or_else(|| FlowError::UnknownTarget(chart.name(*target).to_string()))?;
        rhs[slot] = Some(compile_rhs(*target, e, chart, &slots)?);
    }
    let layout = phase_layout(chart);
    let rhs = rhs
        .into_iter()
        .zip(&layout)
        .map(|(r, &v)| r.ok_or_else(|| FlowError::MissingEquation(chart.name(v).to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CompiledField {
        dim: layout.len(),
        integrated: (0..layout.len()).collect(),
        rhs,
        lift: Vec::new(),
    })
}

/// Compiles the Lie equations on the fields, with momenta recovered from
/// field-only expressions after every step.
pub fn compile_reduced(lie: &LieSystem, momenta: &[Expr], chart: &JetChart) -> Result<CompiledField, FlowError> {
    let slots = phase_slots(chart);
    let field_slots: HashMap<VarId, usize> = chart.fields().iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = chart.num_fields();
    let rhs = lie
        .generators()
        .iter()
        .enumerate()
        .map(|(i, g)| compile_rhs(chart.velocity(i), g, chart, &field_slots))
        .collect::<Result<Vec<_>, _>>()?;
    let lift = momenta
        .iter()
        .enumerate()
        .map(|(i, m)| {
            CompiledPoly::compile(m, &field_slots).map(|p| (n + i, p)).map_err(|v| {
                FlowError::ReducedUnavailable(format!(
                    "momentum `{}` depends on `{}` on the constraint surface",
                    chart.name(chart.momentum(i)),
                    chart.name(v)
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CompiledField {
        dim: slots.len(),
        integrated: (0..n).collect(),
        rhs,
        lift,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub alpha: f64,
    pub values: Vec<f64>,
}

/// Observables tracked along a trajectory, compiled over the phase vector.
#[derive(Debug, Clone)]
pub struct Monitors {
    hamiltonian: Option<CompiledPoly>,
    radius2: CompiledPoly,
    constraints: Vec<CompiledPoly>,
    em_residual: Option<CompiledPoly>,
}

impl Monitors {
    pub fn compile(
        chart: &JetChart,
        hamiltonian: Option<&Expr>,
        constraints: &[Expr],
        em_residual: Option<&Expr>,
    ) -> Result<Self, FlowError> {
        let slots = phase_slots(chart);
        let compile = |label: &str, e: &Expr| {
            CompiledPoly::compile(e, &slots).map_err(|v| FlowError::NotPhaseSpace {
                target: label.to_string(),
                name: chart.name(v).to_string(),
            })
        };
        let radius2 = chart
            .fields()
            .iter()
            .fold(chart.zero(), |acc, &q| acc + chart.var(q).pow(2));
        Ok(Monitors {
            hamiltonian: hamiltonian.map(|h| compile("H", h)).transpose()?,
            radius2: compile("radius2", &radius2)?,
            constraints: constraints
                .iter()
                .enumerate()
                .map(|(a, c)| compile(&format!("phi_{}", a + 1), c))
                .collect::<Result<_, _>>()?,
            em_residual: em_residual.map(|e| compile("em_residual", e)).transpose()?,
        })
    }

    /// Monitors that only track the radius.
    pub fn radius_only(chart: &JetChart) -> Self {
        Monitors::compile(chart, None, &[], None).expect("fields are phase-space variables")
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn sample(&self, x: &[f64]) -> MonitorSample {
        MonitorSample {
            hamiltonian: self.hamiltonian.as_ref().map_or(f64::NAN, |p| p.eval(x)),
            radius2: self.radius2.eval(x),
            constraints: self.constraints.iter().map(|p| p.eval(x)).collect(),
            em_residual: self.em_residual.as_ref().map_or(f64::NAN, |p| p.eval(x)),
        }
    }
}

/// Monitor values at one state; `NaN` marks a monitor that does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSample {
    pub hamiltonian: f64,
    pub radius2: f64,
    pub constraints: Vec<f64>,
    pub em_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub step: f64,
    pub states: Vec<PhaseState>,
    pub monitors: Vec<MonitorSample>,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectory is never empty")
    }
}

fn rk4_step(field: &CompiledField, x: &[f64], h: f64) -> Vec<f64> {
    let stage = |base: &[f64], k: &[f64], scale: f64| {
        let mut y = base.to_vec();
        for (&slot, &d) in field.integrated.iter().zip(k) {
            y[slot] = base[slot] + scale * d;
        }
        y
    };
    let k1 = field.eval(x);
    let k2 = field.eval(&stage(x, &k1, h / 2.0));
    let k3 = field.eval(&stage(x, &k2, h / 2.0));
    let k4 = field.eval(&stage(x, &k3, h));
    let mut out = x.to_vec();
    for (i, &slot) in field.integrated.iter().enumerate() {
        out[slot] = x[slot] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    field.apply_lift(&mut out);
    out
}

/// Grid `k * step` for `k = 1, 2, ...` up to `alpha_max`, ending exactly on
/// `alpha_max` with a shortened final step when needed.
fn alpha_grid(alpha_max: f64, step: f64) -> Vec<f64> {
    let full = (alpha_max / step).floor() as usize;
    let mut grid: Vec<f64> = (1..=full).map(|k| k as f64 * step).collect();
    let last = grid.last().copied().unwrap_or(0.0);
    if alpha_max - last > step * 1e-9 {
        grid.push(alpha_max);
    } else if let Some(l) = grid.last_mut() {
        *l = alpha_max;
    }
    grid
}

/// Classical fixed-step RK4 from `init.alpha` over a span of `alpha_max`.
/// Monitors are sampled at every accepted state, including the first.
pub fn integrate(
    field: &CompiledField,
    monitors: &Monitors,
    init: &PhaseState,
    alpha_max: f64,
    step: f64,
) -> Result<Trajectory, FlowError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(FlowError::BadStep(step));
    }
    if !(alpha_max.is_finite() && alpha_max >= 0.0) {
        return Err(FlowError::BadAlphaMax(alpha_max));
    }
    if init.values.len() != field.dim {
        return Err(FlowError::BadInit {
            expected: field.dim,
            found: init.values.len(),
        });
    }
    if !init.values.iter().all(|x| x.is_finite()) || !init.alpha.is_finite() {
        return Err(FlowError::NonFiniteInit);
    }
    let mut x = init.values.clone();
    field.apply_lift(&mut x);
    let grid = alpha_grid(alpha_max, step);
    let mut states = Vec::with_capacity(grid.len() + 1);
    let mut samples = Vec::with_capacity(grid.len() + 1);
    samples.push(monitors.sample(&x));
    states.push(PhaseState {
        alpha: init.alpha,
        values: x.clone(),
    });
    let mut offset = 0.0;
    for target in grid {
        let h = target - offset;
        x = rk4_step(field, &x, h);
        let alpha = init.alpha + target;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(FlowError::NonFinite { alpha });
        }
        samples.push(monitors.sample(&x));
        states.push(PhaseState {
            alpha,
            values: x.clone(),
        });
        offset = target;
    }
    Ok(Trajectory {
        step,
        states,
        monitors: samples,
    })
}

/// Maxima over a trajectory. Conserved quantities are measured against the
/// first state; constraints and the on-shell residual in absolute value.
/// `NaN` marks a monitor that does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSummary {
    pub max_hamiltonian_drift: f64,
    pub max_radius2_drift: f64,
    pub max_constraint: f64,
    pub max_constraint_each: Vec<f64>,
    pub max_em_residual: f64,
}

fn max_or_nan(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NAN, |m, v| if m.is_nan() || v > m { v } else { m })
}

pub fn monitor_report(traj: &Trajectory) -> MonitorSummary {
    let first = &traj.monitors[0];
    let ncons = first.constraints.len();
    let each: Vec<f64> = (0..ncons)
        .map(|a| max_or_nan(traj.monitors.iter().map(|m| m.constraints[a].abs())))
        .collect();
    MonitorSummary {
        max_hamiltonian_drift: max_or_nan(traj.monitors.iter().map(|m| (m.hamiltonian - first.hamiltonian).abs())),
        max_radius2_drift: max_or_nan(traj.monitors.iter().map(|m| (m.radius2 - first.radius2).abs())),
        max_constraint: if ncons == 0 {
            0.0
        } else {
            max_or_nan(each.iter().copied())
        },
        max_constraint_each: each,
        max_em_residual: max_or_nan(traj.monitors.iter().map(|m| m.em_residual.abs())),
    }
}

/// `sum q'_i^2 - (q_1 q'_2 - q_2 q'_1)` with the velocities replaced by the
/// given right sides. Defined for two fields only.
pub fn energy_momentum_residual(chart: &JetChart, velocities: &[Expr]) -> Option<Expr> {
    if chart.num_fields() != 2 || velocities.len() != 2 {
        return None;
    }
    let (q1, q2) = (chart.var(chart.field(0)), chart.var(chart.field(1)));
    let (v1, v2) = (&velocities[0], &velocities[1]);
    Some(v1.pow(2) + v2.pow(2) - (&q1 * v2 - &q2 * v1))
}

/// Compiled field, monitors and column names for one system.
#[derive(Debug, Clone)]
pub struct FlowSetup {
    pub field: CompiledField,
    pub monitors: Monitors,
    pub columns: Vec<String>,
}

impl FlowSetup {
    fn build(sys: &ConstrainedSystem, field: CompiledField, velocities: &[Expr]) -> Result<Self, FlowError> {
        let chart = &sys.chart;
        let constraints: Vec<Expr> = sys.constraints.iter().map(|c| c.expr.clone()).collect();
        let em = energy_momentum_residual(chart, velocities);
        let monitors = Monitors::compile(chart, Some(&sys.hamiltonian), &constraints, em.as_ref())?;
        let mut columns = vec!["alpha".to_string()];
        columns.extend(phase_layout(chart).iter().map(|&v| chart.name(v).to_string()));
        columns.push("H".into());
        columns.push("radius2".into());
        columns.extend((1..=constraints.len()).map(|a| format!("phi_{a}")));
        columns.push("em_residual".into());
        Ok(FlowSetup {
            field,
            monitors,
            columns,
        })
    }

    /// Hamilton equations of the multiplier-substituted Hamiltonian over the
    /// full phase space.
    pub fn full(sys: &ConstrainedSystem) -> Result<Self, FlowError> {
        let eqs = sys.hamilton_equations();
        let field = compile_field(&eqs, &sys.chart)?;
        let velocities: Vec<Expr> = eqs[..sys.chart.num_fields()].iter().map(|(_, e)| e.clone()).collect();
        FlowSetup::build(sys, field, &velocities)
    }

    /// Lie equations on the fields; momenta follow from the constraints.
    pub fn reduced(sys: &ConstrainedSystem, lie: &LieSystem) -> Result<Self, FlowError> {
        let chart = &sys.chart;
        let momenta: Vec<Expr> = chart
            .momenta()
            .iter()
            .map(|&p| sys.weak_reduce(&chart.var(p)))
            .collect();
        let field = compile_reduced(lie, &momenta, chart)?;
        FlowSetup::build(sys, field, lie.generators())
    }

    pub fn integrate(&self, init: &PhaseState, alpha_max: f64, step: f64) -> Result<Trajectory, FlowError> {
        integrate(&self.field, &self.monitors, init, alpha_max, step)
    }
}

/// Initial phase point from field values. Momenta come from the Legendre map
/// at `q' = xi(q)` when generators are given, otherwise from the constraint
/// solved forms with unconstrained momenta set to zero.
pub fn initial_state(
    sys: &ConstrainedSystem,
    fields: &[f64],
    lie: Option<&LieSystem>,
) -> Result<PhaseState, FlowError> {
    let chart = &sys.chart;
    let n = chart.num_fields();
    if fields.len() != n {
        return Err(FlowError::BadInit {
            expected: n,
            found: fields.len(),
        });
    }
    let mut point: HashMap<VarId, f64> = chart.fields().iter().copied().zip(fields.iter().copied()).collect();
    let momenta: Vec<f64> = match lie {
        Some(lie) => {
            let mut velocity_point = point.clone();
            for (i, g) in lie.generators().iter().enumerate() {
                let v = g
                    .eval_with(|w| point.get(&w).copied())
                    .expect("generators are field-only");
                velocity_point.insert(chart.velocity(i), v);
            }
            sys.momenta
                .iter()
                .map(|m| {
                    m.eval_with(|w| velocity_point.get(&w).copied())
                        .expect("momenta use q and q'")
                })
                .collect()
        }
        None => {
            for &p in chart.momenta() {
                point.insert(p, 0.0);
            }
            let mut values = vec![0.0; n];
            for c in &sys.constraints {
                if let VarKind::Momentum(i) = chart.kind(c.pivot) {
                    values[i] =
                        c.solution
                            .eval_with(|w| point.get(&w).copied())
                            .map_err(|v| FlowError::NotPhaseSpace {
                                target: chart.name(c.pivot).to_string(),
                                name: chart.name(v).to_string(),
                            })?;
                }
            }
            values
        }
    };
    let mut values = fields.to_vec();
    values.extend(momenta);
    Ok(PhaseState { alpha: 0.0, values })
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with one row per state: alpha, phase values, H, radius2, each
/// constraint, em_residual. Floats carry 17 significant digits.
pub fn write_csv<W: Write>(out: &mut W, columns: &[String], traj: &Trajectory) -> io::Result<()> {
    writeln!(out, "{}", columns.join(","))?;
    for (state, m) in traj.states.iter().zip(&traj.monitors) {
        let mut row = Vec::with_capacity(columns.len());
        row.push(format_float(state.alpha));
        row.extend(state.values.iter().map(|&x| format_float(x)));
        row.push(format_float(m.hamiltonian));
        row.push(format_float(m.radius2));
        row.extend(m.constraints.iter().map(|&x| format_float(x)));
        row.push(format_float(m.em_residual));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
