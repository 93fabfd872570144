//! INI-style system definition files.
//!
//! ```text
//! [system]
//! name = so2
//! fields = f, g
//!
//! [lagrangian]
//! L = 1/2*(f*g' - f'*g) - 1/2*(f^2 + g^2)
//!
//! [generators]        # optional, one line per field
//! f = -g
//! g = f
//!
//! [integrate]         # optional
//! init = 1, 0
//! alpha_max = 6.283185307179586
//! step = 0.001
//! ```

use std::collections::BTreeMap;

use crate::chart::{is_identifier, JetChart, VarKind};
use crate::expr::Expr;
use crate::lagrangian::LieSystem;
use crate::parser::{parse_expr, ParseError, ParseErrorKind, SourceSpan};

/// Numeric defaults from the `[integrate]` section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegrateDefaults {
    pub init: Option<Vec<f64>>,
    pub alpha_max: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SystemDefinition {
    pub name: String,
    pub chart: JetChart,
    pub lagrangian: Expr,
    pub generators: Option<LieSystem>,
    pub integrate: IntegrateDefaults,
}

struct Entry<'a> {
    key: &'a str,
    key_span: SourceSpan,
    value: &'a str,
    value_offset: usize,
}

struct Section<'a> {
    header: SourceSpan,
    entries: Vec<Entry<'a>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&Entry<'a>> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn only_keys(&self, name: &str, allowed: &[&str]) -> Result<(), ParseError> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key)) {
            Some(e) => Err(ParseError::new(
                ParseErrorKind::UnknownKey,
                e.key_span,
                format!("unknown key `{}` in [{name}]", e.key),
            )),
            None => Ok(()),
        }
    }
}

const SECTIONS: [&str; 4] = ["system", "lagrangian", "generators", "integrate"];

fn split_sections(text: &str) -> Result<BTreeMap<&str, Section<'_>>, ParseError> {
    let mut sections: BTreeMap<&str, Section<'_>> = BTreeMap::new();
    let mut current: Option<&str> = None;
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let line_start = offset;
        offset += raw.len();
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let lead = content.len() - content.trim_start().len();
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let start = line_start + lead;
        let span = SourceSpan::new(start, start + trimmed.len());
        if let Some(inner) = trimmed.strip_prefix('[') {
            let name = inner.strip_suffix(']').map(str::trim).ok_or_else(|| {
                ParseError::new(ParseErrorKind::UnexpectedToken, span, "section header is missing `]`")
            })?;
            if !SECTIONS.contains(&name) {
                return Err(ParseError::new(
                    ParseErrorKind::UnknownSection,
                    span,
                    format!("unknown section [{name}]"),
                ));
            }
            sections.entry(name).or_insert(Section {
                header: span,
                entries: Vec::new(),
            });
            current = Some(name);
            continue;
        }
        let Some(section) = current else {
            return Err(ParseError::new(
                ParseErrorKind::UnexpectedToken,
                span,
                "key outside of any section",
            ));
        };
        let Some(eq) = trimmed.find('=') else {
            return Err(ParseError::new(
                ParseErrorKind::UnexpectedToken,
                span,
                "expected `key = value`",
            ));
        };
        let key_raw = &trimmed[..eq];
        let key = key_raw.trim_end();
        let key_span = SourceSpan::new(start, start + key.len());
        let after = &trimmed[eq + 1..];
        let value = after.trim();
        let value_offset = start + eq + 1 + (after.len() - after.trim_start().len());
        let sec = sections.get_mut(section).expect("section registered");
        if sec.get(key).is_some() {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateKey,
                key_span,
                format!("key `{key}` given twice in [{section}]"),
            ));
        }
        sec.entries.push(Entry {
            key,
            key_span,
            value,
            value_offset,
        });
    }
    Ok(sections)
}

fn parse_float(entry: &Entry<'_>, text: &str, offset: usize) -> Result<f64, ParseError> {
    let t = text.trim();
    let lead = text.len() - text.trim_start().len();
    t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
        ParseError::new(
            ParseErrorKind::InvalidValue,
            SourceSpan::new(offset + lead, offset + lead + t.len()),
            format!("`{}` expects finite numbers, found `{t}`", entry.key),
        )
    })
}

fn value_span(entry: &Entry<'_>) -> SourceSpan {
    SourceSpan::new(entry.value_offset, entry.value_offset + entry.value.len())
}

/// True for the system names that get the `p`, `s` momentum aliases.
fn is_rotation_preset(name: &str, fields: &[&str]) -> bool {
    let key: String = name
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    key == "so2" && fields == ["f", "g"]
}

pub fn parse_system_file(text: &str) -> Result<SystemDefinition, ParseError> {
    let sections = split_sections(text)?;
    let end = SourceSpan::new(text.len(), text.len());

    let system = sections
        .get("system")
        .ok_or_else(|| ParseError::new(ParseErrorKind::MissingSection, end, "missing [system] section"))?;
    system.only_keys("system", &["name", "fields"])?;
    let name = system.get("name").map(|e| e.value.to_string()).unwrap_or_default();
    let fields_entry = system
        .get("fields")
        .ok_or_else(|| ParseError::new(ParseErrorKind::MissingSection, system.header, "[system] needs `fields`"))?;

    let mut fields: Vec<&str> = Vec::new();
    let mut offset = fields_entry.value_offset;
    for piece in fields_entry.value.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        let name = piece.trim();
        let span = SourceSpan::new(offset + lead, offset + lead + name.len());
        offset += piece.len() + 1;
        if !is_identifier(name) {
            return Err(ParseError::new(
                ParseErrorKind::InvalidValue,
                span,
                format!("`{name}` is not a valid field name"),
            ));
        }
        if fields.contains(&name) {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateField,
                span,
                format!("field `{name}` declared twice"),
            ));
        }
        fields.push(name);
    }

    let mut chart = JetChart::new(&fields, true)
        .map_err(|e| ParseError::new(ParseErrorKind::InvalidValue, value_span(fields_entry), e.to_string()))?;
    if is_rotation_preset(&name, &fields) {
        // Both aliases are free: the only fields are `f` and `g`.
        chart.set_alias(chart.momentum(0), "p").expect("alias p is free");
        chart.set_alias(chart.momentum(1), "s").expect("alias s is free");
    }

    let lag = sections
        .get("lagrangian")
        .ok_or_else(|| ParseError::new(ParseErrorKind::MissingSection, end, "missing [lagrangian] section"))?;
    lag.only_keys("lagrangian", &["L"])?;
    let l_entry = lag
        .get("L")
        .ok_or_else(|| ParseError::new(ParseErrorKind::MissingSection, lag.header, "[lagrangian] needs `L`"))?;
    let lagrangian = parse_expr(l_entry.value, &chart).map_err(|e| e.shifted(l_entry.value_offset))?;

    let generators = match sections.get("generators") {
        None => None,
        Some(sec) => {
            let mut gens: Vec<Option<Expr>> = vec![None; fields.len()];
            for entry in &sec.entries {
                let idx = chart
                    .lookup(entry.key)
                    .and_then(|v| match chart.kind(v) {
                        VarKind::Field(i) => Some(i),
                        _ => None,
                    })
                    .ok_or_else(|| {
                        ParseError::new(
                            ParseErrorKind::UnknownField,
                            entry.key_span,
                            format!("generator given for unknown field `{}`", entry.key),
                        )
                    })?;
                let e = parse_expr(entry.value, &chart).map_err(|e| e.shifted(entry.value_offset))?;
                if let Some(v) = e
                    .variables()
                    .into_iter()
                    .find(|&v| !matches!(chart.kind(v), VarKind::Field(_)))
                {
                    return Err(ParseError::new(
                        ParseErrorKind::InvalidValue,
                        value_span(entry),
                        format!("generators may only use fields, found `{}`", chart.name(v)),
                    ));
                }
                gens[idx] = Some(e);
            }
            let mut out = Vec::with_capacity(fields.len());
            for (i, g) in gens.into_iter().enumerate() {
                out.push(g.ok_or_else(|| {
                    ParseError::new(
                        ParseErrorKind::MissingGenerator,
                        sec.header,
                        format!("no generator for field `{}`", fields[i]),
                    )
                })?);
            }
            Some(LieSystem::new(&chart, out).expect("generators validated above"))
        }
    };

    let mut integrate = IntegrateDefaults::default();
    if let Some(sec) = sections.get("integrate") {
        sec.only_keys("integrate", &["init", "alpha_max", "step"])?;
        if let Some(entry) = sec.get("init") {
            let mut values = Vec::new();
            let mut offset = entry.value_offset;
            for piece in entry.value.split(',') {
                values.push(parse_float(entry, piece, offset)?);
                offset += piece.len() + 1;
            }
            if values.len() != fields.len() {
                return Err(ParseError::new(
                    ParseErrorKind::InvalidValue,
                    value_span(entry),
                    format!("`init` needs {} values, found {}", fields.len(), values.len()),
                ));
            }
            integrate.init = Some(values);
        }
        if let Some(entry) = sec.get("alpha_max") {
            let x = parse_float(entry, entry.value, entry.value_offset)?;
            if x < 0.0 {
                return Err(ParseError::new(
                    ParseErrorKind::InvalidValue,
                    value_span(entry),
                    "`alpha_max` must be nonnegative",
                ));
            }
            integrate.alpha_max = Some(x);
        }
        if let Some(entry) = sec.get("step") {
            let x = parse_float(entry, entry.value, entry.value_offset)?;
            if x <= 0.0 {
                return Err(ParseError::new(
                    ParseErrorKind::InvalidValue,
                    value_span(entry),
                    "`step` must be positive",
                ));
            }
            integrate.step = Some(x);
        }
    }

    Ok(SystemDefinition {
        name,
        chart,
        lagrangian,
        generators,
        integrate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SO2: &str = include_str!("../../../presets/so2.system");

    #[test]
    fn so2_preset() {
        let def = parse_system_file(SO2).unwrap();
        let c = &def.chart;
        assert_eq!(def.name, "so2");
        assert_eq!(c.num_fields(), 2);
        assert_eq!(c.name(c.momentum(0)), "p");
        assert_eq!(c.name(c.momentum(1)), "s");
        let l = parse_expr("1/2*(f*g' - f'*g) - 1/2*(f^2 + g^2)", c).unwrap();
        assert_eq!(def.lagrangian, l);
        let gens = def.generators.unwrap();
        assert_eq!(gens.generators()[0], -c.named("g"));
        assert_eq!(gens.generators()[1], c.named("f"));
    }

    #[test]
    fn regular_single_field() {
        let def = parse_system_file("[system]\nname = free\nfields = f\n[lagrangian]\nL = 1/2*f'^2\n").unwrap();
        assert_eq!(def.chart.num_fields(), 1);
        assert!(def.generators.is_none());
        assert_eq!(def.integrate, IntegrateDefaults::default());
        assert_eq!(def.chart.name(def.chart.momentum(0)), "p_f");
    }

    #[test]
    fn integrate_defaults_and_comments() {
        let text = "# header\n[system]\nfields = x, y # two\n[lagrangian]\nL = x'*y\n\
                    [integrate]\ninit = 1, 0.5\nalpha_max = 3.5\nstep = 1e-3\n";
        let def = parse_system_file(text).unwrap();
        assert_eq!(def.integrate.init, Some(vec![1.0, 0.5]));
        assert_eq!(def.integrate.alpha_max, Some(3.5));
        assert_eq!(def.integrate.step, Some(1e-3));
    }

    fn err(text: &str) -> ParseError {
        let e = parse_system_file(text).unwrap_err();
        assert!(e.span.end <= text.len());
        e
    }

    #[test]
    fn rejections() {
        let e = err("[system]\nfields = f\n[lagrangian]\nL = f'^2\n[generators]\nh = f\n");
        assert_eq!(e.kind, ParseErrorKind::UnknownField);
        assert_eq!(
            &"[system]\nfields = f\n[lagrangian]\nL = f'^2\n[generators]\nh = f\n"[e.span.begin..e.span.end],
            "h"
        );

        assert_eq!(err("[lagrangian]\nL = 0\n").kind, ParseErrorKind::MissingSection);
        assert_eq!(err("[system]\nfields = f\n").kind, ParseErrorKind::MissingSection);
        assert_eq!(
            err("[system]\nfields = f, f\n[lagrangian]\nL=0").kind,
            ParseErrorKind::DuplicateField
        );
        assert_eq!(
            err("[system]\nfields = f\nfields = g\n").kind,
            ParseErrorKind::DuplicateKey
        );
        assert_eq!(
            err("[system]\nfields = f\ncolor = red\n").kind,
            ParseErrorKind::UnknownKey
        );
        assert_eq!(err("[sys]\n").kind, ParseErrorKind::UnknownSection);
        assert_eq!(
            err("[system]\nfields = f, g\n[lagrangian]\nL = 0\n[generators]\nf = g\n").kind,
            ParseErrorKind::MissingGenerator
        );
        assert_eq!(
            err("[system]\nfields = f\n[lagrangian]\nL = 0\n[generators]\nf = f'\n").kind,
            ParseErrorKind::InvalidValue
        );
        assert_eq!(
            err("[system]\nfields = f\n[lagrangian]\nL = 0\n[integrate]\nstep = -1\n").kind,
            ParseErrorKind::InvalidValue
        );
        assert_eq!(
            err("[system]\nfields = f\n[lagrangian]\nL = 0\n[integrate]\ninit = 1, 2\n").kind,
            ParseErrorKind::InvalidValue
        );
    }

    #[test]
    fn expression_errors_point_into_the_file() {
        let text = "[system]\nfields = f\n[lagrangian]\nL = f ** f\n";
        let e = err(text);
        assert_eq!(e.kind, ParseErrorKind::UnexpectedToken);
        assert_eq!(&text[e.span.begin..e.span.end], "*");
        assert_eq!(e.line_col(text), (4, 8));
    }
}
