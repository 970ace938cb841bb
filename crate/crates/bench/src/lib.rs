//! Benchmark fixtures shared by the criterion suites.

use etdlab::{build_env, EnvConfig, Environment};

/// A named environment with its default settings.
pub fn env(name: &str) -> Environment {
    build_env(&EnvConfig::named(name)).expect("built-in environments are valid")
}
