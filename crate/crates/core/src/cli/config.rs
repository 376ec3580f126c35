//! Solver configuration files: one `key=value` per line, `#` comments and
//! blank lines ignored. Keys are the [`SolverConfig`] field names.

use std::path::Path;

use super::CliError;
use crate::solver::SolverConfig;

pub const KEYS: [&str; 11] = [
    "gamma",
    "lambda",
    "alpha",
    "eta",
    "iota",
    "kernel_size",
    "sigma",
    "levels",
    "max_iter",
    "tol",
    "element",
];

/// Sets one field of `cfg` from its textual value.
pub fn apply(cfg: &mut SolverConfig, key: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
        value
            .trim()
            .parse()
            .map_err(|_| format!("invalid value `{value}` for `{key}`"))
    }
    match key {
        "gamma" => cfg.gamma = num(key, value)?,
        "lambda" => cfg.lambda = num(key, value)?,
        "alpha" => cfg.alpha = num(key, value)?,
        "eta" => cfg.eta = num(key, value)?,
        "iota" => cfg.iota = num(key, value)?,
        "kernel_size" => cfg.kernel_size = num(key, value)?,
        "sigma" => cfg.sigma = num(key, value)?,
        "levels" => cfg.levels = num(key, value)?,
        "max_iter" => cfg.max_iter = num(key, value)?,
        "tol" => cfg.tol = num(key, value)?,
        "element" => cfg.element = value.trim().parse().map_err(|e| format!("{e}"))?,
        _ => return Err(format!("unknown config key `{key}`")),
    }
    Ok(())
}

pub fn parse(text: &str, cfg: &mut SolverConfig) -> Result<(), String> {
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        apply(cfg, key.trim(), value).map_err(|e| format!("line {}: {e}", n + 1))?;
    }
    Ok(())
}

pub fn load(path: &Path, cfg: &mut SolverConfig) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, cfg).map_err(|reason| CliError::Usage(format!("{}: {reason}", path.display())))
}

/// Resolved values in [`KEYS`] order, formatted for a manifest.
pub fn entries(cfg: &SolverConfig) -> Vec<(String, String)> {
    KEYS.iter()
        .map(|&k| {
            let v = match k {
                "gamma" => cfg.gamma.to_string(),
                "lambda" => cfg.lambda.to_string(),
                "alpha" => cfg.alpha.to_string(),
                "eta" => cfg.eta.to_string(),
                "iota" => cfg.iota.to_string(),
                "kernel_size" => cfg.kernel_size.to_string(),
                "sigma" => cfg.sigma.to_string(),
                "levels" => cfg.levels.to_string(),
                "max_iter" => cfg.max_iter.to_string(),
                "tol" => cfg.tol.to_string(),
                _ => cfg.element.to_string(),
            };
            (k.to_string(), v)
        })
        .collect()
}
