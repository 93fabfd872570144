//! Variable registry for jet coordinates, momenta and multipliers.
//!
//! A [`JetChart`] owns every symbol an [`Expr`](crate::Expr) may mention. The
//! registration order is fixed: fields, velocities, accelerations (when the
//! chart carries second jets), momenta, then multipliers in the order they are
//! created. That order is the lexicographic monomial order used everywhere.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::expr::{Expr, Rational};

static NEXT_CHART_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of a chart. Clones of a chart share it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChartId(u64);

impl ChartId {
    fn fresh() -> Self {
        ChartId(NEXT_CHART_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// Index of a registered variable. The index order is the monomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Role of a variable. The payload is the field index, or the 0-based
/// multiplier index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Field(usize),
    Velocity(usize),
    Acceleration(usize),
    Momentum(usize),
    Multiplier(usize),
}

impl VarKind {
    pub fn is_phase_space(self) -> bool {
        matches!(self, VarKind::Field(_) | VarKind::Momentum(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChartError {
    #[error("a chart needs at least one field")]
    NoFields,
    #[error("invalid identifier `{0}`")]
    InvalidName(String),
    #[error("name `{0}` is registered twice")]
    DuplicateName(String),
    #[error("alias `{alias}` collides with an existing name")]
    AliasTaken { alias: String },
}

#[derive(Debug, Clone)]
struct VarEntry {
    name: String,
    alias: Option<String>,
    kind: VarKind,
}

/// The variable registry shared by every expression of one system.
///
/// Variables are append-only: multipliers may be added after construction,
/// which never changes an existing [`VarId`] or the relative order of
/// existing variables.
#[derive(Debug, Clone)]
pub struct JetChart {
    id: ChartId,
    parameter: String,
    entries: Vec<VarEntry>,
    lookup: HashMap<String, VarId>,
    fields: Vec<VarId>,
    velocities: Vec<VarId>,
    accelerations: Option<Vec<VarId>>,
    momenta: Vec<VarId>,
    multipliers: Vec<VarId>,
}

/// `letter (letter | digit | '_')*`, ASCII only.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl JetChart {
    /// Registers `fields` with their velocities, optional accelerations and
    /// momenta `p_<field>`. The evolution parameter is named `alpha`.
    pub fn new<S: AsRef<str>>(fields: &[S], second_jets: bool) -> Result<Self, ChartError> {
        if fields.is_empty() {
            return Err(ChartError::NoFields);
        }
        let mut chart = JetChart {
            id: ChartId::fresh(),
            parameter: "alpha".to_string(),
            entries: Vec::new(),
            lookup: HashMap::new(),
            fields: Vec::new(),
            velocities: Vec::new(),
            accelerations: None,
            momenta: Vec::new(),
            multipliers: Vec::new(),
        };
        for (i, f) in fields.iter().enumerate() {
            let f = f.as_ref();
            if !is_identifier(f) {
                return Err(ChartError::InvalidName(f.to_string()));
            }
            let v = chart.register(f.to_string(), VarKind::Field(i))?;
            chart.fields.push(v);
        }
        for (i, f) in fields.iter().enumerate() {
            let v = chart.register(format!("{}'", f.as_ref()), VarKind::Velocity(i))?;
            chart.velocities.push(v);
        }
        if second_jets {
            let mut acc = Vec::with_capacity(fields.len());
            for (i, f) in fields.iter().enumerate() {
                acc.push(chart.register(format!("{}''", f.as_ref()), VarKind::Acceleration(i))?);
            }
            chart.accelerations = Some(acc);
        }
        for (i, f) in fields.iter().enumerate() {
            let v = chart.register(format!("p_{}", f.as_ref()), VarKind::Momentum(i))?;
            chart.momenta.push(v);
        }
        Ok(chart)
    }

    fn register(&mut self, name: String, kind: VarKind) -> Result<VarId, ChartError> {
        if self.lookup.contains_key(&name) {
            return Err(ChartError::DuplicateName(name));
        }
        let id = VarId(self.entries.len() as u32);
        self.lookup.insert(name.clone(), id);
        self.entries.push(VarEntry {
            name,
            alias: None,
            kind,
        });
        Ok(id)
    }

    pub fn id(&self) -> ChartId {
        self.id
    }

    pub fn parameter(&self) -> &str {
        &self.parameter
    }

    pub fn set_parameter(&mut self, name: impl Into<String>) {
        self.parameter = name.into();
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn num_vars(&self) -> usize {
        self.entries.len()
    }

    pub fn fields(&self) -> &[VarId] {
        &self.fields
    }

    pub fn velocities(&self) -> &[VarId] {
        &self.velocities
    }

    pub fn accelerations(&self) -> Option<&[VarId]> {
        self.accelerations.as_deref()
    }

    pub fn has_second_jets(&self) -> bool {
        self.accelerations.is_some()
    }

    pub fn momenta(&self) -> &[VarId] {
        &self.momenta
    }

    pub fn multipliers(&self) -> &[VarId] {
        &self.multipliers
    }

    /// Appends `count` multipliers named `lambda_<k>`, continuing the
    /// existing numbering.
    pub fn add_multipliers(&mut self, count: usize) -> Result<Vec<VarId>, ChartError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let k = self.multipliers.len();
            let v = self.register(format!("lambda_{}", k + 1), VarKind::Multiplier(k))?;
            self.multipliers.push(v);
            out.push(v);
        }
        Ok(out)
    }

    /// Gives `var` a display alias that is also accepted by the parser.
    pub fn set_alias(&mut self, var: VarId, alias: &str) -> Result<(), ChartError> {
        if !is_identifier(alias) {
            return Err(ChartError::InvalidName(alias.to_string()));
        }
        if let Some(&other) = self.lookup.get(alias) {
            if other == var {
                return Ok(());
            }
            return Err(ChartError::AliasTaken {
                alias: alias.to_string(),
            });
        }
        let entry = &mut self.entries[var.index()];
        if let Some(old) = entry.alias.take() {
            self.lookup.remove(&old);
        }
        entry.alias = Some(alias.to_string());
        self.lookup.insert(alias.to_string(), var);
        Ok(())
    }

    pub fn kind(&self, var: VarId) -> VarKind {
        self.entries[var.index()].kind
    }

    /// Registered name, ignoring any alias.
    pub fn canonical_name(&self, var: VarId) -> &str {
        &self.entries[var.index()].name
    }

    /// Alias if one is set, otherwise the registered name.
    pub fn name(&self, var: VarId) -> &str {
        let e = &self.entries[var.index()];
        e.alias.as_deref().unwrap_or(&e.name)
    }

    /// Resolves a registered name or alias.
    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.lookup.get(name).copied()
    }

    pub fn field(&self, i: usize) -> VarId {
        self.fields[i]
    }

    pub fn velocity(&self, i: usize) -> VarId {
        self.velocities[i]
    }

    pub fn acceleration(&self, i: usize) -> Option<VarId> {
        self.accelerations.as_ref().map(|a| a[i])
    }

    pub fn momentum(&self, i: usize) -> VarId {
        self.momenta[i]
    }

    pub fn zero(&self) -> Expr {
        Expr::zero(self.id)
    }

    pub fn one(&self) -> Expr {
        Expr::constant(self.id, Rational::from_integer(1.into()))
    }

    pub fn constant(&self, value: Rational) -> Expr {
        Expr::constant(self.id, value)
    }

    pub fn int(&self, value: i64) -> Expr {
        Expr::constant(self.id, Rational::from_integer(value.into()))
    }

    pub fn ratio(&self, num: i64, den: i64) -> Expr {
        Expr::constant(self.id, Rational::new(num.into(), den.into()))
    }

    pub fn var(&self, var: VarId) -> Expr {
        assert!(var.index() < self.entries.len(), "variable not in chart");
        Expr::variable(self.id, var)
    }

    /// Expression for a named variable. Panics on unknown names; intended
    /// for code that builds known systems.
    pub fn named(&self, name: &str) -> Expr {
        let v = self.lookup(name).unwrap_or_else(|| panic!("unknown variable `{name}`"));
        self.var(v)
    }
}

impl fmt::Display for JetChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = (0..self.entries.len()).map(|i| self.name(VarId(i as u32))).collect();
        write!(f, "chart[{}]({})", self.parameter, names.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registration_order_is_fields_jets_momenta() {
        let chart = JetChart::new(&["f", "g"], true).unwrap();
        let names: Vec<&str> = (0..chart.num_vars()).map(|i| chart.name(VarId(i as u32))).collect();
        assert_eq!(names, ["f", "g", "f'", "g'", "f''", "g''", "p_f", "p_g"]);
    }

    #[test]
    fn multipliers_append_without_reordering() {
        let mut chart = JetChart::new(&["f", "g"], false).unwrap();
        let before = chart.lookup("p_g").unwrap();
        let lambdas = chart.add_multipliers(2).unwrap();
        assert_eq!(chart.lookup("p_g"), Some(before));
        assert_eq!(chart.name(lambdas[1]), "lambda_2");
        assert!(lambdas[0] > before);
    }

    #[test]
    fn alias_resolves_both_ways() {
        let mut chart = JetChart::new(&["f", "g"], false).unwrap();
        let pf = chart.momentum(0);
        chart.set_alias(pf, "p").unwrap();
        assert_eq!(chart.lookup("p"), Some(pf));
        assert_eq!(chart.lookup("p_f"), Some(pf));
        assert_eq!(chart.name(pf), "p");
        assert!(chart.set_alias(chart.momentum(1), "f").is_err());
    }

    #[test]
    fn rejects_duplicates_and_bad_names() {
        assert_eq!(
            JetChart::new(&["f", "f"], false).unwrap_err(),
            ChartError::DuplicateName("f".into())
        );
        assert!(JetChart::new(&["1f"], false).is_err());
        assert!(JetChart::new::<&str>(&[], false).is_err());
        // `p_f` would shadow the momentum of `f`.
        assert!(JetChart::new(&["f", "p_f"], false).is_err());
    }

    #[test]
    fn clones_share_identity() {
        let chart = JetChart::new(&["x"], false).unwrap();
        let other = JetChart::new(&["x"], false).unwrap();
        assert_eq!(chart.clone().id(), chart.id());
        assert_ne!(chart.id(), other.id());
    }
}
