//! Layered configuration (defaults < config file < flags) and artifact IO.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Flag values that were given on the command line, keyed like the config.
#[derive(Default)]
pub struct Flags(Map<String, Value>);

impl Flags {
    pub fn set<T: Serialize>(&mut self, key: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0
                .insert(key.to_string(), serde_json::to_value(v).expect("flag values serialise"));
        }
        self
    }

    /// Sets `key` and clears the listed alternatives, so a flag wins over
    /// a mutually exclusive setting from the config file.
    pub fn set_exclusive<T: Serialize>(&mut self, key: &str, v: Option<T>, others: &[&str]) -> &mut Self {
        if v.is_some() {
            self.set(key, v);
            for o in others {
                self.0.insert(o.to_string(), Value::Null);
            }
        }
        self
    }
}

fn load_config_value(path: &Path, command: &str) -> Result<Map<String, Value>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let Value::Object(mut obj) = v else {
        bail!("config {} is not a JSON object", path.display());
    };
    // an artifact from a previous run carries its config under "config"
    if obj.contains_key("version") && obj.contains_key("config") {
        if let Some(Value::String(c)) = obj.get("command") {
            if c != command {
                bail!("config {} was written by '{c}', not '{command}'", path.display());
            }
        }
        match obj.remove("config") {
            Some(Value::Object(c)) => return Ok(c),
            _ => bail!("artifact {} has no config object", path.display()),
        }
    }
    Ok(obj)
}

/// Resolves a command config: defaults, then the config file, then flags.
pub fn resolve<C>(command: &str, file: Option<&Path>, flags: Flags) -> Result<C>
where
    C: Serialize + DeserializeOwned + Default,
{
    let Value::Object(mut merged) = serde_json::to_value(C::default())? else {
        unreachable!("configs serialise to objects");
    };
    if let Some(path) = file {
        merged.extend(load_config_value(path, command)?);
    }
    merged.extend(flags.0);
    serde_json::from_value(Value::Object(merged)).context("invalid configuration")
}

#[derive(Serialize)]
struct Artifact<'a, C: Serialize, R: Serialize> {
    version: &'a str,
    command: &'a str,
    config: &'a C,
    result: &'a R,
}

pub fn write_artifact<C: Serialize, R: Serialize>(path: &Path, command: &str, config: &C, result: &R) -> Result<()> {
    let artifact = Artifact {
        version: privlr_core::VERSION,
        command,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&artifact)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// `out.json` -> `out.<suffix>`; used for CSV companions of a JSON artifact.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Timestamps live only here, so artifacts stay byte-identical across reruns.
pub struct RunLog {
    path: PathBuf,
    started: f64,
}

impl RunLog {
    pub fn start(artifact: &Path) -> Self {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".log");
        Self {
            path: PathBuf::from(name),
            started: unix_now(),
        }
    }

    pub fn finish(self) -> Result<()> {
        let args: Vec<String> = std::env::args().collect();
        let text = format!(
            "version: {}\nargs: {}\nstarted_unix: {:.3}\nfinished_unix: {:.3}\n",
            privlr_core::VERSION,
            serde_json::to_string(&args)?,
            self.started,
            unix_now()
        );
        write_file(&self.path, text.as_bytes())
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("'{p}': {e}")))
        .collect()
}

fn parse_array<T: std::str::FromStr + Copy + Default, const N: usize>(s: &str) -> std::result::Result<[T; N], String>
where
    T::Err: std::fmt::Display,
{
    let v: Vec<T> = parse_list(s)?;
    if v.len() != N {
        return Err(format!("expected {N} comma-separated values, got {}", v.len()));
    }
    let mut out = [T::default(); N];
    out.copy_from_slice(&v);
    Ok(out)
}

pub fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_array(s)
}

pub fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_array(s)
}

pub fn parse_count_pair(s: &str) -> std::result::Result<[usize; 2], String> {
    parse_array(s)
}

pub fn delimiter_byte(s: &str) -> Result<u8> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 => Ok(s.as_bytes()[0]),
        _ => bail!("delimiter must be a single character, got '{s}'"),
    }
}
