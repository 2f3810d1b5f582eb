use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fockdil::invariants::InvariantTrace;
use fockdil::io::{float_value, to_json_string};
use fockdil::FockError;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// A named invariant check. Boolean checks carry no residual.
#[derive(Debug, Clone)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub residual: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: Option<String>,
}

impl Assertion {
    fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), json!(self.name));
        m.insert("passed".into(), json!(self.passed));
        m.insert("residual".into(), self.residual.map_or(Value::Null, float_value));
        m.insert("threshold".into(), self.threshold.map_or(Value::Null, float_value));
        if let Some(d) = &self.detail {
            m.insert("detail".into(), json!(d));
        }
        Value::Object(m)
    }
}

/// Input file echo: base name and SHA-256 of the bytes read.
#[derive(Debug, Clone)]
pub struct InputEcho {
    pub name: String,
    pub sha256: String,
}

impl InputEcho {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        let mut hex = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(hex, "{b:02x}");
        }
        InputEcho {
            name: path
                .file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
            sha256: hex,
        }
    }

    pub fn stem(&self) -> String {
        Path::new(&self.name)
            .file_stem()
            .map_or_else(|| self.name.clone(), |s| s.to_string_lossy().into_owned())
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputEcho>,
    pub config: Value,
    pub outputs: Map<String, Value>,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
    /// Invariant sequences, also emitted as CSV.
    pub traces: Vec<InvariantTrace>,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<InputEcho>, config: Value) -> Self {
        Report {
            command: command.into(),
            inputs,
            config,
            outputs: Map::new(),
            assertions: Vec::new(),
            warnings: Vec::new(),
            traces: Vec::new(),
        }
    }

    pub fn output(&mut self, key: &str, v: Value) {
        self.outputs.insert(key.into(), v);
    }

    pub fn output_f64(&mut self, key: &str, x: f64) {
        self.outputs.insert(key.into(), float_value(x));
    }

    /// Passes when `residual ≤ threshold`; a NaN residual fails.
    pub fn check(&mut self, name: &str, residual: f64, threshold: f64) -> bool {
        let passed = residual <= threshold;
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            residual: Some(residual),
            threshold: Some(threshold),
            detail: None,
        });
        passed
    }

    pub fn check_flag(&mut self, name: &str, passed: bool, detail: &str) -> bool {
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            residual: None,
            threshold: None,
            detail: (!detail.is_empty()).then(|| detail.to_string()),
        });
        passed
    }

    /// Records a library error as a failed assertion named after the
    /// violated precondition and returns `None`.
    pub fn attempt<T>(&mut self, what: &str, res: fockdil::Result<T>) -> Option<T> {
        match res {
            Ok(v) => Some(v),
            Err(e) => {
                let name = assertion_name(&e).unwrap_or(what);
                self.assertions.push(Assertion {
                    name: name.into(),
                    passed: false,
                    residual: error_residual(&e),
                    threshold: None,
                    detail: Some(format!("{what}: {e}")),
                });
                None
            }
        }
    }

    pub fn passed(&self) -> bool {
        !self.assertions.is_empty() && self.assertions.iter().all(|a| a.passed)
    }

    pub fn failed_names(&self) -> Vec<&str> {
        self.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect()
    }

    pub fn to_value(&self) -> Value {
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|i| json!({"name": i.name, "sha256": i.sha256}))
            .collect();
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command));
        m.insert("inputs".into(), Value::Array(inputs));
        m.insert("config".into(), self.config.clone());
        m.insert("outputs".into(), Value::Object(self.outputs.clone()));
        m.insert(
            "assertions".into(),
            Value::Array(self.assertions.iter().map(Assertion::to_value).collect()),
        );
        m.insert("warnings".into(), json!(self.warnings));
        m.insert("passed".into(), json!(self.passed()));
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        to_json_string(&self.to_value())
    }

    pub fn to_text(&self) -> String {
        let names: Vec<&str> = self.inputs.iter().map(|i| i.name.as_str()).collect();
        let mut out = format!("{} {}\n", self.command, names.join(" "));
        for a in &self.assertions {
            let status = if a.passed { "PASS" } else { "FAIL" };
            let _ = write!(out, "  {status} {}", a.name);
            if let (Some(r), Some(t)) = (a.residual, a.threshold) {
                let _ = write!(out, "  residual {r:.3e} (threshold {t:.1e})");
            }
            if let Some(d) = &a.detail {
                let _ = write!(out, "  {d}");
            }
            out.push('\n');
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        for (k, v) in &self.outputs {
            let _ = writeln!(out, "  {k}: {}", summarize(v));
        }
        out
    }

    /// One CSV document per invariant sequence, keyed by statistic name.
    pub fn to_csv(&self) -> Result<Vec<(String, String)>, String> {
        self.traces
            .iter()
            .map(|t| trace_csv(t).map(|body| (t.statistic.clone(), body)))
            .collect()
    }
}

fn summarize(v: &Value) -> String {
    match v {
        Value::Array(items) if !items.iter().all(Value::is_number) || items.len() > 8 => {
            format!("[{} entries]", items.len())
        }
        Value::Object(m) => format!("{{{} fields}}", m.len()),
        Value::Number(n) if n.is_f64() => fockdil::io::format_float(n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn trace_csv(t: &InvariantTrace) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| e.to_string();
    w.write_record(["n", "statistic", "normalization", "estimate"]).map_err(err)?;
    for p in &t.sequence {
        w.write_record([
            p.n.to_string(),
            fockdil::io::format_float(p.raw),
            fockdil::io::format_float(p.normalization),
            fockdil::io::format_float(p.value),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

fn assertion_name(e: &FockError) -> Option<&'static str> {
    Some(match e {
        FockError::NotContraction { .. } => "row_contraction",
        FockError::NotErgodic | FockError::NoInvariantVectorState | FockError::InvalidFrame { .. } => "ergodic",
        FockError::NotReduced => "reduced",
        FockError::InconsistentLifting { .. } => "lifting_consistency",
        FockError::NotConstrained { .. } => "constraints",
        FockError::NotCommuting { .. } => "commuting",
        FockError::BufferTooSmall { .. } => "buffer",
        FockError::NotInvariant { .. } => "invariance",
        FockError::ConvergenceFailure { .. } => "convergence",
        FockError::NotPsd { .. } => "positivity",
        FockError::DimensionMismatch(_) => "dimensions",
        FockError::Unsupported(_) => "supported",
        FockError::SvdFailure { .. } | FockError::Parse(_) => return None,
    })
}

fn error_residual(e: &FockError) -> Option<f64> {
    match e {
        FockError::NotContraction { norm } => Some(norm - 1.0),
        FockError::InvalidFrame { residual }
        | FockError::NotInvariant { residual }
        | FockError::InconsistentLifting { residual }
        | FockError::NotConstrained { residual }
        | FockError::NotCommuting { residual }
        | FockError::ConvergenceFailure { residual, .. } => Some(*residual),
        FockError::NotPsd { min_eig } => Some(-min_eig),
        _ => None,
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename, so
/// readers never see a partial report.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &target)?;
    Ok(target)
}
