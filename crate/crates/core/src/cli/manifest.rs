//! Run manifest: a `key=value` record of one CLI invocation.
//!
//! ```text
//! command=refine
//! config.gamma=1
//! input.mask=rough.pgm
//! output.soft=refined.pgm
//! duration_s=0.0123
//! iterations=20
//! final_residual=0.0004
//! ```
//!
//! Section prefixes (`config.`, `input.`, `output.`) keep insertion order.
//! Floats use Rust's shortest round-trip formatting, so parsing the text
//! reproduces the manifest exactly.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    pub duration_s: f64,
    pub iterations: usize,
    pub final_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ManifestError {
    #[error("line {0}: expected key=value")]
    MissingEquals(usize),
    #[error("line {0}: unknown key `{1}`")]
    UnknownKey(usize, String),
    #[error("line {0}: bad value for `{1}`")]
    BadValue(usize, String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("entry `{0}` contains a newline or a `=` in its key")]
    Unrepresentable(String),
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_s: 0.0,
            iterations: 0,
            final_residual: None,
        }
    }

    pub fn get_config(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn sections(&self) -> [(&'static str, &Vec<(String, String)>); 3] {
        [
            ("config.", &self.config),
            ("input.", &self.inputs),
            ("output.", &self.outputs),
        ]
    }

    pub fn to_text(&self) -> Result<String, ManifestError> {
        let clean = |k: &str, v: &str| !k.contains('=') && !k.contains('\n') && !v.contains('\n') && !k.is_empty();
        if self.command.contains('\n') {
            return Err(ManifestError::Unrepresentable(self.command.clone()));
        }
        let mut out = String::new();
        writeln!(out, "command={}", self.command).unwrap();
        for (prefix, entries) in self.sections() {
            for (k, v) in entries {
                if !clean(k, v) {
                    return Err(ManifestError::Unrepresentable(k.clone()));
                }
                writeln!(out, "{prefix}{k}={v}").unwrap();
            }
        }
        writeln!(out, "duration_s={}", self.duration_s).unwrap();
        writeln!(out, "iterations={}", self.iterations).unwrap();
        match self.final_residual {
            Some(r) => writeln!(out, "final_residual={r}").unwrap(),
            None => writeln!(out, "final_residual=none").unwrap(),
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut command = None;
        let mut duration = None;
        let mut iterations = None;
        let mut residual = None;
        let mut m = RunManifest::new("");
        for (n, line) in text.lines().enumerate() {
            let n = n + 1;
            let (key, value) = line.split_once('=').ok_or(ManifestError::MissingEquals(n))?;
            let bad = || ManifestError::BadValue(n, key.to_string());
            match key {
                "command" => command = Some(value.to_string()),
                "duration_s" => duration = Some(value.parse::<f64>().map_err(|_| bad())?),
                "iterations" => iterations = Some(value.parse::<usize>().map_err(|_| bad())?),
                "final_residual" => {
                    residual = Some(if value == "none" {
                        None
                    } else {
                        Some(value.parse::<f64>().map_err(|_| bad())?)
                    })
                }
                _ => {
                    let entry = |rest: &str| (rest.to_string(), value.to_string());
                    if let Some(rest) = key.strip_prefix("config.") {
                        m.config.push(entry(rest));
                    } else if let Some(rest) = key.strip_prefix("input.") {
                        m.inputs.push(entry(rest));
                    } else if let Some(rest) = key.strip_prefix("output.") {
                        m.outputs.push(entry(rest));
                    } else {
                        return Err(ManifestError::UnknownKey(n, key.to_string()));
                    }
                }
            }
        }
        m.command = command.ok_or(ManifestError::MissingKey("command"))?;
        m.duration_s = duration.ok_or(ManifestError::MissingKey("duration_s"))?;
        m.iterations = iterations.ok_or(ManifestError::MissingKey("iterations"))?;
        m.final_residual = residual.ok_or(ManifestError::MissingKey("final_residual"))?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_its_own_output() {
        let mut m = RunManifest::new("refine");
        m.config.push(("gamma".into(), "1".into()));
        m.config.push(("iota".into(), "0.01".into()));
        m.inputs.push(("mask".into(), "/tmp/a b=c.pgm".into()));
        m.outputs.push(("soft".into(), "out.pgm".into()));
        m.duration_s = 0.125;
        m.iterations = 20;
        m.final_residual = Some(3.5e-5);
        let text = m.to_text().unwrap();
        assert!(text.contains("config.iota=0.01\n"));
        assert_eq!(RunManifest::parse(&text).unwrap(), m);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            RunManifest::parse("command=x\nbogus"),
            Err(ManifestError::MissingEquals(2))
        ));
        assert!(matches!(
            RunManifest::parse("command=x\nfoo=1"),
            Err(ManifestError::UnknownKey(2, _))
        ));
        assert!(matches!(
            RunManifest::parse("command=x"),
            Err(ManifestError::MissingKey(_))
        ));
        let mut m = RunManifest::new("x");
        m.inputs.push(("a".into(), "line\nbreak".into()));
        assert!(m.to_text().is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(
            command in "[a-z]{1,10}",
            config in proptest::collection::vec(("[a-z_]{1,8}", "[ -~]{0,12}"), 0..5),
            inputs in proptest::collection::vec(("[a-z_]{1,8}", "[^\n\r]{0,20}"), 0..3),
            duration in 0.0f64..1e4,
            iterations in 0usize..1000,
            residual in proptest::option::of(-1e3f64..1e3),
        ) {
            let m = RunManifest {
                command,
                config,
                inputs,
                outputs: vec![("soft".into(), "o.pgm".into())],
                duration_s: duration,
                iterations,
                final_residual: residual,
            };
            prop_assert_eq!(RunManifest::parse(&m.to_text().unwrap()).unwrap(), m);
        }
    }
}
