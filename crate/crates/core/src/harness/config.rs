//! Flat dotted-key configuration: TOML restricted to scalar leaves, read
//! through a consuming reader that records every resolved value, rejects
//! unknown keys, and hashes the canonical result so each run can stamp the
//! exact configuration it used.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::HarnessError;

/// Consuming view over the override table. Every getter records the value
/// that was actually used (override or default) into the resolved map.
#[derive(Debug)]
pub struct ConfigReader {
    values: BTreeMap<String, toml::Value>,
    resolved: BTreeMap<String, String>,
}

fn flatten(
    prefix: &str,
    value: &toml::Value,
    out: &mut BTreeMap<String, toml::Value>,
) -> Result<(), HarnessError> {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out)?;
            }
            Ok(())
        }
        toml::Value::Datetime(_) => Err(HarnessError::Config(format!(
            "key {prefix}: datetimes are not valid scenario values"
        ))),
        other => {
            out.insert(prefix.to_string(), other.clone());
            Ok(())
        }
    }
}

fn canonical(value: &toml::Value) -> String {
    match value {
        toml::Value::Float(f) => format!("{f:?}"),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::String(s) => format!("{s:?}"),
        toml::Value::Array(a) => {
            let inner: Vec<String> = a.iter().map(canonical).collect();
            format!("[{}]", inner.join(", "))
        }
        other => other.to_string(),
    }
}

impl ConfigReader {
    pub fn new(table: &toml::Table) -> Result<Self, HarnessError> {
        let mut values = BTreeMap::new();
        for (k, v) in table {
            flatten(k, v, &mut values)?;
        }
        Ok(Self {
            values,
            resolved: BTreeMap::new(),
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| HarnessError::Config(format!("TOML parse error: {e}")))?;
        Self::new(&table)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, HarnessError> {
        let v = match self.values.remove(key) {
            None => default,
            Some(toml::Value::Float(f)) => f,
            Some(toml::Value::Integer(i)) => i as f64,
            Some(other) => {
                return Err(HarnessError::Config(format!(
                    "key {key}: expected a number, got {other}"
                )))
            }
        };
        self.resolved
            .insert(key.to_string(), canonical(&toml::Value::Float(v)));
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64, HarnessError> {
        let v = match self.values.remove(key) {
            None => default,
            Some(toml::Value::Integer(i)) if i >= 0 => i as u64,
            Some(other) => {
                return Err(HarnessError::Config(format!(
                    "key {key}: expected a nonnegative integer, got {other}"
                )))
            }
        };
        self.resolved
            .insert(key.to_string(), canonical(&toml::Value::Integer(v as i64)));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize, HarnessError> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    pub fn string(&mut self, key: &str, default: &str) -> Result<String, HarnessError> {
        let v = match self.values.remove(key) {
            None => default.to_string(),
            Some(toml::Value::String(s)) => s,
            Some(other) => {
                return Err(HarnessError::Config(format!(
                    "key {key}: expected a string, got {other}"
                )))
            }
        };
        self.resolved
            .insert(key.to_string(), canonical(&toml::Value::String(v.clone())));
        Ok(v)
    }

    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, HarnessError> {
        let v = match self.values.remove(key) {
            None => default.to_vec(),
            Some(toml::Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        toml::Value::Float(f) => out.push(f),
                        toml::Value::Integer(i) => out.push(i as f64),
                        other => {
                            return Err(HarnessError::Config(format!(
                                "key {key}: expected numbers, got {other}"
                            )))
                        }
                    }
                }
                out
            }
            Some(other) => {
                return Err(HarnessError::Config(format!(
                    "key {key}: expected an array of numbers, got {other}"
                )))
            }
        };
        let arr = toml::Value::Array(v.iter().map(|&f| toml::Value::Float(f)).collect());
        self.resolved.insert(key.to_string(), canonical(&arr));
        Ok(v)
    }

    /// Errors on any override key no getter consumed, then freezes the
    /// resolved configuration into canonical text and its hash.
    pub fn finish(self) -> Result<ResolvedConfig, HarnessError> {
        if !self.values.is_empty() {
            let keys: Vec<&str> = self.values.keys().map(String::as_str).collect();
            return Err(HarnessError::UnknownKeys(keys.join(", ")));
        }
        let mut text = String::new();
        for (k, v) in &self.resolved {
            text.push_str(k);
            text.push_str(" = ");
            text.push_str(v);
            text.push('\n');
        }
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Ok(ResolvedConfig { text, hash })
    }
}

/// Canonical `key = value` text of everything the run used, plus a short
/// content hash for stamping outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub text: String,
    pub hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides_resolve() {
        let mut r = ConfigReader::from_toml_str("observer.k1 = 3.5\nseed = 7").unwrap();
        assert_eq!(r.f64("observer.k1", 2.0).unwrap(), 3.5);
        assert_eq!(r.f64("observer.k2", 2.7783).unwrap(), 2.7783);
        assert_eq!(r.u64("seed", 42).unwrap(), 7);
        let resolved = r.finish().unwrap();
        assert!(resolved.text.contains("observer.k1 = 3.5"));
        assert!(resolved.text.contains("observer.k2 = 2.7783"));
        assert_eq!(resolved.hash.len(), 16);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut r = ConfigReader::from_toml_str("observr.k1 = 3.5").unwrap();
        let _ = r.f64("observer.k1", 2.0).unwrap();
        match r.finish() {
            Err(HarnessError::UnknownKeys(keys)) => assert!(keys.contains("observr.k1")),
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn nested_tables_flatten_to_dotted_keys() {
        let mut r = ConfigReader::from_toml_str("[noise.random]\nvariance = 0.25").unwrap();
        assert_eq!(r.f64("noise.random.variance", 0.01).unwrap(), 0.25);
        r.finish().unwrap();
    }

    #[test]
    fn identical_configs_hash_identically() {
        let run = |text: &str| {
            let mut r = ConfigReader::from_toml_str(text).unwrap();
            let _ = r.f64("a", 1.0).unwrap();
            let _ = r.f64("b", 2.0).unwrap();
            r.finish().unwrap().hash
        };
        assert_eq!(run("a = 5.0"), run("a = 5.0"));
        assert_ne!(run("a = 5.0"), run("b = 5.0"));
    }
}
