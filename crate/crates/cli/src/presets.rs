//! Configurations shipped with the binary, one per acceptance check.

macro_rules! preset {
    ($name:literal) => {
        ($name, include_str!(concat!("../../../presets/", $name, ".toml")))
    };
}

pub const ALL: &[(&str, &str)] = &[
    preset!("gaussian-3d"),
    preset!("gaussian-2d"),
    preset!("floor-certificate"),
    preset!("high-pass-certificate"),
    preset!("greens"),
    preset!("energy-law-1600"),
    preset!("energy-law-3200"),
    preset!("structural-invariants"),
    preset!("linear-stepping"),
    preset!("weak-strong-refinement"),
    preset!("weak-strong-perturbed"),
];

pub fn get(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
