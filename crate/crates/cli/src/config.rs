//! Layered run settings: profile defaults, then the config file, then flags.
//!
//! The config file is TOML restricted to `key = value` pairs. Keys may be
//! grouped under arbitrary `[section]` headers; section names are ignored
//! but a key may appear only once.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use toml::Value;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }
}

impl FromStr for Profile {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(CliError::Usage(format!("unknown profile {other:?} (expected desk or paper)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

macro_rules! settings {
    ($($key:ident: $ty:ty),* $(,)?) => {
        /// Every configurable value; `None` means "not set at this layer".
        #[derive(Clone, Debug, Default, PartialEq)]
        pub struct Settings {
            pub profile: Option<Profile>,
            $(pub $key: Option<$ty>,)*
        }

        impl Settings {
            /// Values from `top` win over `self`.
            pub fn overlay(self, top: Settings) -> Settings {
                Settings {
                    profile: top.profile.or(self.profile),
                    $($key: top.$key.or(self.$key),)*
                }
            }

            fn set(&mut self, key: &str, value: &Value) -> Result<(), CliError> {
                match key {
                    "profile" => self.profile = Some(value_as::<String>(key, value)?.parse()?),
                    $(stringify!($key) => self.$key = Some(value_as::<$ty>(key, value)?),)*
                    other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
                }
                Ok(())
            }

            /// Set values as TOML, in key order.
            pub fn to_table(&self) -> BTreeMap<String, Value> {
                let mut out = BTreeMap::new();
                if let Some(p) = self.profile {
                    out.insert("profile".to_string(), Value::String(p.name().into()));
                }
                $(if let Some(v) = &self.$key {
                    out.insert(stringify!($key).to_string(), v.clone().into_value());
                })*
                out
            }
        }
    };
}

settings! {
    seed: u64,
    workers: usize,
    measure: String,
    qubits: usize,
    count: usize,
    train_count: usize,
    val_count: usize,
    test_count: usize,
    epochs: usize,
    filters: usize,
    dense1: usize,
    dense2: usize,
    dropout: f64,
    learning_rate: f64,
    batch_size: usize,
    mode: String,
    pad_bloch: String,
    baseline_pairs: usize,
}

trait TomlScalar: Sized {
    fn from_value(v: &Value) -> Option<Self>;
    fn into_value(self) -> Value;
}

impl TomlScalar for u64 {
    fn from_value(v: &Value) -> Option<Self> {
        v.as_integer().and_then(|i| u64::try_from(i).ok())
    }
    fn into_value(self) -> Value {
        // seeds above i64::MAX are stored as strings
        i64::try_from(self).map_or_else(|_| Value::String(self.to_string()), Value::Integer)
    }
}

impl TomlScalar for usize {
    fn from_value(v: &Value) -> Option<Self> {
        v.as_integer().and_then(|i| usize::try_from(i).ok())
    }
    fn into_value(self) -> Value {
        Value::Integer(self as i64)
    }
}

impl TomlScalar for f64 {
    fn from_value(v: &Value) -> Option<Self> {
        v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
    }
    fn into_value(self) -> Value {
        Value::Float(self)
    }
}

impl TomlScalar for String {
    fn from_value(v: &Value) -> Option<Self> {
        v.as_str().map(str::to_string)
    }
    fn into_value(self) -> Value {
        Value::String(self)
    }
}

fn value_as<T: TomlScalar + FromStr>(key: &str, value: &Value) -> Result<T, CliError> {
    T::from_value(value)
        .or_else(|| value.as_str().and_then(|s| s.parse().ok()))
        .ok_or_else(|| CliError::Usage(format!("config key {key:?} has an invalid value {value}")))
}

impl Settings {
    pub fn parse_file_text(text: &str) -> Result<Settings, CliError> {
        let table: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config file: {e}")))?;
        let mut out = Settings::default();
        let mut seen = std::collections::BTreeSet::new();
        let mut visit = |key: &str, value: &Value| -> Result<(), CliError> {
            if !seen.insert(key.to_string()) {
                return Err(CliError::Usage(format!("config key {key:?} given twice")));
            }
            out.set(key, value)
        };
        for (key, value) in &table {
            match value {
                Value::Table(section) => {
                    for (k, v) in section {
                        if v.is_table() {
                            return Err(CliError::Usage(format!("nested section {key}.{k} is not supported")));
                        }
                        visit(k, v)?;
                    }
                }
                _ => visit(key, value)?,
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Settings::parse_file_text(&text)
    }

    pub fn profile_defaults(profile: Profile) -> Settings {
        let (train, val, test, epochs) = match profile {
            Profile::Desk => (4000, 200, 500, 50),
            Profile::Paper => (35000, 500, 1000, 300),
        };
        Settings {
            profile: Some(profile),
            seed: Some(0),
            workers: Some(1),
            measure: Some("hs".into()),
            train_count: Some(train),
            val_count: Some(val),
            test_count: Some(test),
            epochs: Some(epochs),
            filters: Some(25),
            dense1: Some(512),
            dense2: Some(256),
            dropout: Some(0.5),
            learning_rate: Some(0.01),
            batch_size: Some(100),
            mode: Some("engineered".into()),
            baseline_pairs: Some(100_000),
            ..Settings::default()
        }
    }

    /// profile defaults < file < flags; the profile itself may come from
    /// either of the upper layers.
    pub fn resolve(file: Settings, flags: Settings) -> Settings {
        let profile = flags.profile.or(file.profile).unwrap_or(Profile::Desk);
        Settings::profile_defaults(profile).overlay(file).overlay(flags)
    }

    pub fn get<T: Clone>(field: &Option<T>, key: &str) -> Result<T, CliError> {
        field.clone().ok_or_else(|| CliError::Usage(format!("missing required setting {key:?}")))
    }
}

/// Serializes a resolved run description as `key = value` TOML with a
/// `[run]` section for metadata and a `[settings]` section for values.
pub fn render(run: &BTreeMap<String, Value>, settings: &Settings) -> String {
    let mut doc = toml::Table::new();
    doc.insert("run".into(), Value::Table(run.clone().into_iter().collect()));
    doc.insert("settings".into(), Value::Table(settings.to_table().into_iter().collect()));
    toml::to_string(&doc).expect("plain tables always serialize")
}
