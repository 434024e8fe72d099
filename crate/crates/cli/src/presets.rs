//! Built-in experiment configurations. Every numeric choice lives in the
//! JSON files under `presets/`, so `ldp preset <name>` is the single source
//! of documented defaults.

/// Preset names in the order they are documented.
pub const NAMES: [&str; 4] = [
    "fractional_linear",
    "fractional_power",
    "ou_1mode",
    "schilder",
];

/// The embedded JSON text of a preset, if the name is known.
pub fn preset_json(name: &str) -> Option<&'static str> {
    match name {
        "fractional_linear" => Some(include_str!("../presets/fractional_linear.json")),
        "fractional_power" => Some(include_str!("../presets/fractional_power.json")),
        "ou_1mode" => Some(include_str!("../presets/ou_1mode.json")),
        "schilder" => Some(include_str!("../presets/schilder.json")),
        _ => None,
    }
}
