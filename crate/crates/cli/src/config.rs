//! `key = value` config files and flag/file/default precedence.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every key any subcommand reads. Keys use underscores; hyphens in a file
/// are accepted and normalized.
pub const KNOWN_KEYS: &[&str] = &[
    "adam_epsilon",
    "batch_size",
    "beta1",
    "beta2",
    "epochs",
    "expansion",
    "fraction",
    "inner_block",
    "k",
    "lr",
    "out",
    "s_mode",
    "samples_per_feature",
    "seed",
    "sigma_tol",
    "threads",
    "tile_cols",
    "tile_rows",
];

/// Values from a config file, tracked so each is echoed with its origin.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", n + 1));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: `{key}` set twice", n + 1));
            }
        }
        Ok(Self { values })
    }

    fn lookup<T>(&self, key: &str, flag: Option<T>) -> Result<Option<(T, &'static str)>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key}");
        Ok(match (flag, self.values.get(key)) {
            (Some(v), _) => Some((v, "flag")),
            (None, Some(text)) => Some((
                text.parse()
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: cannot parse {text:?}: {e}")))?,
                "config",
            )),
            (None, None) => None,
        })
    }

    /// `flag`, else the file's `key`, else `default`.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let (value, origin) = self.lookup(key, flag)?.unwrap_or((default, "default"));
        log::info!("{key} = {value} ({origin})");
        Ok(value)
    }

    /// `flag`, else the file's `key`, else nothing.
    pub fn resolve_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        Ok(self.lookup(key, flag)?.map(|(value, origin)| {
            log::info!("{key} = {value} ({origin})");
            value
        }))
    }
}
