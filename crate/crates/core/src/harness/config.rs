//! Flat key-value run configuration with dotted section names.
//!
//! One `key = value` pair per line, `#` comments. No interpolation, no
//! nesting, no programmability: a config is a diffable record of exactly
//! what a run used.

use super::HarnessError;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub map: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, HarnessError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    i + 1
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(HarnessError::Config(format!("line {}: empty key", i + 1)));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn from_path(path: &Path) -> Result<Config, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Config::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, HarnessError> {
        self.get(key)
            .ok_or_else(|| HarnessError::Config(format!("missing required key `{key}`")))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, HarnessError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| HarnessError::Config(format!("key `{key}`: bad number `{v}`")))
            })
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, HarnessError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, HarnessError> {
        self.f64_opt(key)?
            .ok_or_else(|| HarnessError::Config(format!("missing required key `{key}`")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, HarnessError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| HarnessError::Config(format!("key `{key}`: bad integer `{v}`")))
            })
            .transpose()
            .map(|o| o.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, HarnessError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(HarnessError::Config(format!(
                "key `{key}`: expected bool, got `{v}`"
            ))),
        }
    }

    /// Comma-separated list of floats (used for sweep axes).
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, HarnessError> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| HarnessError::Config(format!("key `{key}`: bad number `{s}`")))
            })
            .collect()
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    /// Sweep axes: every `sweep.<target-key> = v1, v2, ...` entry, in
    /// deterministic (sorted) key order.
    pub fn sweep_axes(&self) -> Result<Vec<(String, Vec<String>)>, HarnessError> {
        let mut axes = Vec::new();
        for (key, value) in &self.map {
            if let Some(target) = key.strip_prefix("sweep.") {
                let values: Vec<String> =
                    value.split(',').map(|s| s.trim().to_string()).collect();
                if values.is_empty() || values.iter().any(|v| v.is_empty()) {
                    return Err(HarnessError::Config(format!(
                        "sweep axis `{key}` has an empty value"
                    )));
                }
                axes.push((target.to_string(), values));
            }
        }
        Ok(axes)
    }

    pub fn name(&self) -> String {
        self.get("run.name").unwrap_or("experiment").to_string()
    }
}

/// Presets shipped with the crate; data files, not code.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "ode-exact-p2",
        include_str!("../../presets/ode-exact-p2.conf"),
    ),
    (
        "ode-exact-p3",
        include_str!("../../presets/ode-exact-p3.conf"),
    ),
    (
        "ode-exact-p2-u4",
        include_str!("../../presets/ode-exact-p2-u4.conf"),
    ),
    ("zero-exclusion", include_str!("../../presets/zero-exclusion.conf")),
    ("type-one-rate", include_str!("../../presets/type-one-rate.conf")),
    ("log-global", include_str!("../../presets/log-global.conf")),
    (
        "radial-sigma-sweep",
        include_str!("../../presets/radial-sigma-sweep.conf"),
    ),
    (
        "lambda-sweep",
        include_str!("../../presets/lambda-sweep.conf"),
    ),
];

/// Resolves an argument as a preset name first, then as a filesystem path.
pub fn load(arg: &str) -> Result<Config, HarnessError> {
    if let Some((_, text)) = PRESETS.iter().find(|(name, _)| *name == arg) {
        return Config::parse(text);
    }
    let path = Path::new(arg);
    if path.exists() {
        return Config::from_path(path);
    }
    Err(HarnessError::Config(format!(
        "`{arg}` is neither a preset ({}) nor a file",
        PRESETS
            .iter()
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_dotted_keys() {
        let c = Config::parse(
            "# comment\nsolver.u_blow = 1e12\ndomain.kind = interval\n\nrun.name = demo\n",
        )
        .unwrap();
        assert_eq!(c.get("solver.u_blow"), Some("1e12"));
        assert_eq!(c.require_f64("solver.u_blow").unwrap(), 1e12);
        assert_eq!(c.name(), "demo");
        assert!(Config::parse("not a pair\n").is_err());
    }

    #[test]
    fn sweep_axes_in_sorted_order() {
        let c = Config::parse("sweep.b = 1,2\nsweep.a = 3\n").unwrap();
        let axes = c.sweep_axes().unwrap();
        assert_eq!(axes[0].0, "a");
        assert_eq!(axes[1].0, "b");
        assert_eq!(axes[1].1, vec!["1", "2"]);
    }

    #[test]
    fn all_presets_parse() {
        for (name, text) in PRESETS {
            let c = Config::parse(text).unwrap_or_else(|e| panic!("preset {name}: {e}"));
            assert!(c.get("domain.kind").is_some(), "preset {name} lacks a domain");
        }
    }
}
