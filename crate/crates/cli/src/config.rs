//! `key = value` run configuration. Command-line flags win over file values,
//! file values over built-in defaults. Every key that a command reads is
//! recorded so the resolved set can be written next to the outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Keys accepted in config files, with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "random seed"),
    ("endpoint", "reaction predictor: builtin or an http(s) URL"),
    ("retry_attempts", "total attempts per remote request"),
    ("timeout_secs", "per-request timeout for remote calls"),
    ("d", "embedding width"),
    ("h", "recurrent hidden size"),
    ("fp_width", "fingerprint width (power of two)"),
    ("mode", "route representation: dag or linear"),
    ("epochs", "training epochs"),
    ("lr", "learning rate"),
    ("batch_size", "training minibatch size"),
    ("temperature", "sampling temperature; 0 is greedy"),
    ("batches", "sampling batches"),
    ("samples_per_batch", "samples per batch"),
    ("two_tail", "restrict sampling to two tails"),
    ("min_tail_chain", "minimum tail chain when sampling with constraints"),
    ("max_tails", "maximum tails per route"),
    ("target", "dataset size to build"),
    ("tail_weights", "relative weights of 1:2:3 tails"),
    ("attempts_per_target", "attempt budget per requested path"),
    ("fractions", "train,valid,test split fractions"),
    ("max_weight", "head molecular weight limit"),
    ("max_logp", "head logP upper bound (strict)"),
    ("min_reactive", "head minimum reactive groups"),
    ("max_reactive", "head maximum reactive groups"),
    ("min_chain", "tail minimum chain length"),
    ("k", "matches kept per query"),
    ("min_tanimoto", "similarity pass threshold"),
    ("max_ged", "edit distance pass threshold"),
    ("iterations", "optimization iterations"),
    ("samples_per_iter", "samples drawn per optimization iteration"),
    ("top_k", "routes kept per optimization iteration"),
    ("fine_tune_rounds", "fine-tuning epochs per iteration"),
    ("scorer", "optimization scorer: surrogate or an http(s) URL"),
    ("bind", "server bind address"),
];

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, (String, usize)>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let n = i + 1;
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::config(format!("line {n}: expected key = value")));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(key, _)| *key == k) {
                return Err(CliError::config(format!("line {n}: unknown key '{k}'")));
            }
            if file.insert(k.to_string(), (v.to_string(), n)).is_some() {
                return Err(CliError::config(format!("line {n}: duplicate key '{k}'")));
            }
        }
        Ok(Settings {
            file,
            resolved: BTreeMap::new(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::read(p, e))?;
                Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", p.display(), e.message)))
            }
        }
    }

    /// Flag, then file, then `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "undeclared key {key}");
        let value = match (flag, self.file.get(key)) {
            (Some(v), _) => v,
            (None, Some((text, line))) => text
                .parse()
                .map_err(|e| CliError::config(format!("line {line}: bad value for '{key}': {e}")))?,
            (None, None) => default,
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like `get` with no default: absent means `None`.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match (flag, self.file.get(key)) {
            (Some(v), _) => Some(v),
            (None, Some((text, line))) => Some(
                text.parse()
                    .map_err(|e| CliError::config(format!("line {line}: bad value for '{key}': {e}")))?,
            ),
            (None, None) => None,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn snapshot(&self, command: &str) -> String {
        let mut s = format!("# resolved configuration for '{command}'\n");
        for (k, v) in &self.resolved {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn write_snapshot(&self, command: &str, path: &Path) -> Result<()> {
        fs::write(path, self.snapshot(command)).map_err(|e| CliError::write(path, e))
    }
}

/// Comma-separated triple such as `0.9,0.05,0.05`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions(pub [f64; 3]);

impl FromStr for Fractions {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        <[f64; 3]>::try_from(parts)
            .map(Fractions)
            .map_err(|_| format!("expected three comma-separated fractions, got '{s}'"))
    }
}

impl Display for Fractions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let mut s = Settings::parse("# comment\nseed = 3\nlr=0.01\n").unwrap();
        assert_eq!(s.get("seed", None, 0u64).unwrap(), 3);
        assert_eq!(s.get("lr", Some(0.5), 1e-4).unwrap(), 0.5);
        assert_eq!(s.get("epochs", None, 10usize).unwrap(), 10);
        assert_eq!(s.snapshot("train"), "# resolved configuration for 'train'\nepochs = 10\nlr = 0.5\nseed = 3\n");
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let e = Settings::parse("seed = 1\n\nlearning_rate = 3\n").unwrap_err();
        assert!(e.message.contains("line 3") && e.message.contains("learning_rate"), "{}", e.message);
        assert!(Settings::parse("seed 1").is_err());
        assert!(Settings::parse("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn bad_values_report_their_line() {
        let mut s = Settings::parse("\nepochs = ten").unwrap();
        let e = s.get("epochs", None, 1usize).unwrap_err();
        assert!(e.message.contains("line 2"));
    }

    #[test]
    fn fraction_triples() {
        assert_eq!("0.8, 0.1,0.1".parse::<Fractions>().unwrap(), Fractions([0.8, 0.1, 0.1]));
        assert!("0.5,0.5".parse::<Fractions>().is_err());
    }
}
