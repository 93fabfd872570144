//! Fixtures shared by the benchmarks.

use dirac_core::{parse_system_file, SystemDefinition};

/// The shipped presets, by file stem.
pub const PRESETS: &[(&str, &str)] = &[
    ("so2", include_str!("../../../presets/so2.system")),
    ("regular", include_str!("../../../presets/regular.system")),
    ("firstclass", include_str!("../../../presets/firstclass.system")),
    ("chain", include_str!("../../../presets/chain.system")),
];

pub fn preset(name: &str) -> SystemDefinition {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("unknown preset `{name}`"));
    parse_system_file(text).expect("shipped presets parse")
}
