//! Optional `key=value` settings file. Explicit flags always win; the file
//! only fills in values the command line left unset. Unknown keys are
//! ignored so one file can drive several subcommands.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::errors::CliError;
use crate::files::read_input;

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings, CliError> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = read_input(path)?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{} line {}: expected key=value, found {raw:?}",
                    path.display(),
                    i + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Settings { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::usage(format!("setting {key}={raw} does not parse"))
            }),
        }
    }

    /// Flag value if given, else the setting, else the default.
    pub fn resolve<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Flag value if given, else the setting, else None.
    pub fn resolve_optional<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn settings(body: &str) -> Settings {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(body.as_bytes()).unwrap();
        Settings::load(Some(file.path())).unwrap()
    }

    #[test]
    fn flags_beat_settings_beat_defaults() {
        let s = settings("# tuning\nseed = 9\nepochs=120\n");
        assert_eq!(s.resolve(Some(4u64), "seed", 0).unwrap(), 4);
        assert_eq!(s.resolve(None::<u64>, "seed", 0).unwrap(), 9);
        assert_eq!(s.resolve(None::<u32>, "folds", 10).unwrap(), 10);
        assert_eq!(s.resolve_optional(None::<u32>, "epochs").unwrap(), Some(120));
    }

    #[test]
    fn bad_values_and_lines_are_usage_errors() {
        let s = settings("seed=abc\n");
        let err = s.resolve(None::<u64>, "seed", 0).unwrap_err();
        assert!(err.to_string().starts_with("E_BAD_USAGE: "));

        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(b"just words\n").unwrap();
        let err = Settings::load(Some(file.path())).unwrap_err();
        assert!(err.to_string().starts_with("E_BAD_USAGE: "));
    }

    #[test]
    fn missing_settings_file_is_a_data_error() {
        let err = Settings::load(Some(Path::new("/nonexistent.conf"))).unwrap_err();
        assert!(err.to_string().starts_with("E_NO_INPUT: "));
    }
}
