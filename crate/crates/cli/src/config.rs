//! Layered settings: command-line flag, then the subcommand's table in the
//! config file, then top-level config keys, then the built-in default.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value as Json};
use toml::{Table, Value};

#[derive(Debug, Default)]
pub struct Config {
    table: Table,
    /// Directory that relative paths in the file are resolved against.
    base: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let table: Table = text.parse().with_context(|| format!("invalid TOML in {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { table, base })
    }

    /// Rejects keys no subcommand understands.
    pub fn check_keys(&self, commands: &[(&str, &[&str])]) -> Result<()> {
        for (key, value) in &self.table {
            if let Some((_, keys)) = commands.iter().find(|(name, _)| name == key) {
                let section = value
                    .as_table()
                    .ok_or_else(|| anyhow!("config: `{key}` must be a table"))?;
                if let Some(bad) = section.keys().find(|k| !keys.contains(&k.as_str())) {
                    bail!("config: unknown key `{key}.{bad}`");
                }
            } else if !commands.iter().any(|(_, keys)| keys.contains(&key.as_str())) {
                bail!("config: unknown key `{key}`");
            }
        }
        Ok(())
    }

    pub fn section(&self, name: &'static str) -> Section<'_> {
        Section {
            config: self,
            name,
            resolved: Map::new(),
        }
    }
}

/// Settings lookup for one subcommand. Every resolved value is recorded for
/// the run summary.
pub struct Section<'a> {
    config: &'a Config,
    name: &'static str,
    resolved: Map<String, Json>,
}

fn flag_name(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

impl Section<'_> {
    fn lookup(&self, key: &str) -> Option<(String, &Value)> {
        let scoped = self
            .config
            .table
            .get(self.name)
            .and_then(Value::as_table)
            .and_then(|t| t.get(key))
            .map(|v| (format!("{}.{key}", self.name), v));
        scoped.or_else(|| self.config.table.get(key).map(|v| (key.to_string(), v)))
    }

    fn file_value<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.lookup(key) {
            None => Ok(None),
            Some((name, v)) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| anyhow!("config key `{name}`: {e}")),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let json = serde_json::to_value(value).unwrap_or(Json::Null);
        self.resolved.insert(key.to_string(), json);
    }

    pub fn get<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    pub fn or<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = self.get(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn require<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.get(key, flag)?.ok_or_else(|| {
            anyhow!(
                "missing required {} (or `{key}` in the config file)",
                flag_name(key)
            )
        })
    }

    fn resolve(&self, p: PathBuf) -> PathBuf {
        if p.is_absolute() {
            p
        } else {
            self.config.base.join(p)
        }
    }

    /// Paths from the config file are relative to the file's directory.
    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let value = match flag {
            Some(p) => Some(p),
            None => self.file_value::<PathBuf>(key)?.map(|p| self.resolve(p)),
        };
        if let Some(p) = &value {
            self.record(key, &p.display().to_string());
        }
        Ok(value)
    }

    pub fn require_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.path(key, flag)?.ok_or_else(|| {
            anyhow!(
                "missing required {} (or `{key}` in the config file)",
                flag_name(key)
            )
        })
    }

    pub fn paths(&mut self, key: &str, flags: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
        let value: Vec<PathBuf> = if !flags.is_empty() {
            flags
        } else {
            self.file_value::<Vec<PathBuf>>(key)?
                .unwrap_or_default()
                .into_iter()
                .map(|p| self.resolve(p))
                .collect()
        };
        if !value.is_empty() {
            let shown: Vec<String> = value.iter().map(|p| p.display().to_string()).collect();
            self.record(key, &shown);
        }
        Ok(value)
    }

    /// Drops a setting that turned out not to matter for this run.
    pub fn forget(&mut self, key: &str) {
        self.resolved.remove(key);
    }

    pub fn into_resolved(self) -> Map<String, Json> {
        self.resolved
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> Config {
        Config {
            table: text.parse().unwrap(),
            base: PathBuf::from("/cfg"),
        }
    }

    #[test]
    fn precedence() {
        let c = config("k = 3\nseed = 1\n[edges]\nk = 7\n");
        let mut s = c.section("edges");
        assert_eq!(s.or("k", Some(9usize), 5).unwrap(), 9);
        assert_eq!(s.or("k", None, 5usize).unwrap(), 7);
        assert_eq!(s.or("seed", None, 0u64).unwrap(), 1);
        assert_eq!(s.or("pairs", None, 50_000usize).unwrap(), 50_000);
        let mut other = c.section("generate");
        assert_eq!(other.or("k", None, 5usize).unwrap(), 3);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let c = config("corpus = \"data/c.jsonl\"\nout = \"/abs/o.json\"\n");
        let mut s = c.section("anisotropy");
        assert_eq!(s.path("corpus", None).unwrap(), Some(PathBuf::from("/cfg/data/c.jsonl")));
        assert_eq!(s.path("out", None).unwrap(), Some(PathBuf::from("/abs/o.json")));
        assert_eq!(s.path("corpus", Some("x".into())).unwrap(), Some(PathBuf::from("x")));
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        let cmds: &[(&str, &[&str])] = &[("edges", &["k", "dist", "out"])];
        assert!(config("k = 5").check_keys(cmds).is_ok());
        assert!(config("kk = 5").check_keys(cmds).is_err());
        assert!(config("[edges]\nseed = 5").check_keys(cmds).is_err());
        let c = config("k = \"five\"");
        let err = c.section("edges").or("k", None, 5usize).unwrap_err();
        assert!(err.to_string().contains("`k`"));
    }

    #[test]
    fn missing_required_names_the_flag() {
        let c = Config::default();
        let err = c.section("generate").require::<String>("strategy", None).unwrap_err();
        assert!(err.to_string().contains("--strategy"));
    }
}
