//! Named scenarios shipped with the binary.

use crate::error::{CliError, CliResult};
use crate::scenario::Scenario;

pub const SCENARIOS: &[(&str, &str)] = &[
    ("base-distinct-offline", include_str!("../scenarios/base-distinct-offline.toml")),
    ("counterexample-s2-vs-s3", include_str!("../scenarios/counterexample-s2-vs-s3.toml")),
    ("ct-validate-base", include_str!("../scenarios/ct-validate-base.toml")),
    ("market-base", include_str!("../scenarios/market-base.toml")),
    ("online-distinct-linear", include_str!("../scenarios/online-distinct-linear.toml")),
    ("online-distinct-log", include_str!("../scenarios/online-distinct-log.toml")),
    ("online-distinct-neg-inverse", include_str!("../scenarios/online-distinct-neg-inverse.toml")),
    ("online-shared-linear", include_str!("../scenarios/online-shared-linear.toml")),
    ("online-shared-log", include_str!("../scenarios/online-shared-log.toml")),
    ("online-shared-neg-inverse", include_str!("../scenarios/online-shared-neg-inverse.toml")),
    ("shared-offline-aligned", include_str!("../scenarios/shared-offline-aligned.toml")),
    ("shared-offline-reversed", include_str!("../scenarios/shared-offline-reversed.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load(name: &str) -> CliResult<Scenario> {
    Scenario::parse(text(name).ok_or_else(|| CliError::UnknownScenario(name.to_string()))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses_validates_and_is_named_after_its_file() {
        for (name, _) in SCENARIOS {
            let s = load(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, *name);
        }
        assert!(matches!(load("nope"), Err(CliError::UnknownScenario(_))));
    }
}
