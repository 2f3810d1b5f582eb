//! JSON file formats for tuples, liftings and symbols, and a deterministic
//! JSON writer.
//!
//! Complex entries are `[re, im]` pairs and matrices are row-major nested
//! arrays. Words are written as in [`Word`]'s `Display`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{FockError, Result};
use crate::fock::{TruncatedFock, Word};
use crate::liftings::Lifting;
use crate::numkit::{zeros, CMat, C64};
use crate::symbols::MultiAnalyticSymbol;
use crate::tuples::OperatorTuple;
use crate::Tolerances;

/// A matrix as rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Parses a matrix of the given shape; a `0 × cols` or `rows × 0` matrix
/// may be written as `[]` or as empty rows.
pub fn matrix_from_json(rows_json: &MatrixJson, rows: usize, cols: usize, what: &str) -> Result<CMat> {
    if rows == 0 || cols == 0 {
        if rows_json.iter().any(|r| !r.is_empty()) || (rows == 0 && !rows_json.is_empty()) {
            return Err(FockError::Parse(format!("{what}: expected a {rows}x{cols} matrix")));
        }
        return Ok(zeros(rows, cols));
    }
    if rows_json.len() != rows || rows_json.iter().any(|r| r.len() != cols) {
        return Err(FockError::Parse(format!(
            "{what}: expected a {rows}x{cols} matrix, got {} rows",
            rows_json.len()
        )));
    }
    let mut m = zeros(rows, cols);
    for (i, row) in rows_json.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(FockError::Parse(format!("{what}: non-finite entry at ({i}, {j})")));
            }
            m[(i, j)] = C64::new(z[0], z[1]);
        }
    }
    Ok(m)
}

/// `{d, dim, T: [matrices]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TupleFile {
    pub d: usize,
    pub dim: usize,
    #[serde(rename = "T")]
    pub t: Vec<MatrixJson>,
}

impl TupleFile {
    pub fn from_tuple(t: &OperatorTuple) -> Self {
        TupleFile {
            d: t.d(),
            dim: t.dim(),
            t: t.mats.iter().map(matrix_to_json).collect(),
        }
    }

    pub fn to_tuple(&self) -> Result<OperatorTuple> {
        if self.d == 0 || self.t.len() != self.d {
            return Err(FockError::Parse(format!(
                "tuple: d = {} but {} matrices given",
                self.d,
                self.t.len()
            )));
        }
        let mats = self
            .t
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_json(m, self.dim, self.dim, &format!("T[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        OperatorTuple::new(mats)
    }
}

/// `{d, dim_C, dim_A, C, A, B}` with `B_i : ℂ^{dim_C} → ℂ^{dim_A}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftingFile {
    pub d: usize,
    #[serde(rename = "dim_C")]
    pub dim_c: usize,
    #[serde(rename = "dim_A")]
    pub dim_a: usize,
    #[serde(rename = "C")]
    pub c: Vec<MatrixJson>,
    #[serde(rename = "A")]
    pub a: Vec<MatrixJson>,
    #[serde(rename = "B")]
    pub b: Vec<MatrixJson>,
}

impl LiftingFile {
    pub fn from_lifting(l: &Lifting) -> Self {
        LiftingFile {
            d: l.d(),
            dim_c: l.dim_c(),
            dim_a: l.dim_a(),
            c: l.c.mats.iter().map(matrix_to_json).collect(),
            a: l.a.mats.iter().map(matrix_to_json).collect(),
            b: l.b.iter().map(matrix_to_json).collect(),
        }
    }

    /// The blocks `(C, A, B)` after shape checks.
    pub fn to_blocks(&self) -> Result<(OperatorTuple, OperatorTuple, Vec<CMat>)> {
        for (name, v) in [("C", &self.c), ("A", &self.a), ("B", &self.b)] {
            if v.len() != self.d {
                return Err(FockError::Parse(format!(
                    "lifting: d = {} but {} matrices in {name}",
                    self.d,
                    v.len()
                )));
            }
        }
        if self.d == 0 {
            return Err(FockError::Parse("lifting: d must be positive".into()));
        }
        let parse_all = |v: &[MatrixJson], rows: usize, cols: usize, name: &str| {
            v.iter()
                .enumerate()
                .map(|(i, m)| matrix_from_json(m, rows, cols, &format!("{name}[{i}]")))
                .collect::<Result<Vec<_>>>()
        };
        let c = OperatorTuple::new(parse_all(&self.c, self.dim_c, self.dim_c, "C")?)?;
        let a = OperatorTuple::new(parse_all(&self.a, self.dim_a, self.dim_a, "A")?)?;
        let b = parse_all(&self.b, self.dim_a, self.dim_c, "B")?;
        Ok((c, a, b))
    }

    pub fn to_lifting(&self, tol: &Tolerances) -> Result<Lifting> {
        let (c, a, b) = self.to_blocks()?;
        Lifting::from_blocks(c, a, b, tol)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffJson {
    pub word: Word,
    pub matrix: MatrixJson,
}

/// `{d, N, dom_dim, cod_dim, coeffs: [{word, matrix}]}`; absent words are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolFile {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub dom_dim: usize,
    pub cod_dim: usize,
    pub coeffs: Vec<CoeffJson>,
}

impl SymbolFile {
    /// Writes only the coefficients with an entry of modulus above `zero_tol`.
    pub fn from_symbol(theta: &MultiAnalyticSymbol, zero_tol: f64) -> Self {
        let f = theta.fock();
        let coeffs = theta
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, m)| m.iter().any(|z| z.norm() > zero_tol))
            .map(|(k, m)| CoeffJson {
                word: f.word(k),
                matrix: matrix_to_json(m),
            })
            .collect();
        SymbolFile {
            d: theta.d,
            n: theta.n,
            dom_dim: theta.dom_dim,
            cod_dim: theta.cod_dim,
            coeffs,
        }
    }

    pub fn to_symbol(&self) -> Result<MultiAnalyticSymbol> {
        if self.d == 0 {
            return Err(FockError::Parse("symbol: d must be positive".into()));
        }
        let f = TruncatedFock::new(self.d, self.n);
        let mut theta = MultiAnalyticSymbol::zero(self.d, self.n, self.dom_dim, self.cod_dim);
        for c in &self.coeffs {
            if c.word.len() > self.n || c.word.letters().iter().any(|&l| l as usize > self.d) {
                return Err(FockError::Parse(format!(
                    "symbol: word {} outside Γ_≤{}(ℂ^{})",
                    c.word, self.n, self.d
                )));
            }
            let m = matrix_from_json(&c.matrix, self.cod_dim, self.dom_dim, &format!("coefficient {}", c.word))?;
            theta.coeffs[f.index(&c.word)] = m;
        }
        Ok(theta)
    }
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| FockError::Parse(format!("{what}: {e}")))
}

/// Formats a float with 17 significant digits; non-finite values become
/// the strings `"NaN"`, `"inf"`, `"-inf"`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "\"NaN\"".into()
    } else if x.is_infinite() {
        if x > 0.0 { "\"inf\"" } else { "\"-inf\"" }.into()
    } else if x == 0.0 {
        // drops the sign of negative zero so equal reports stay byte-identical
        "0.0000000000000000e0".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty-printed JSON (object keys sorted) with every
/// non-integer number written by [`format_float`].
pub fn to_json_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // numeric leaves stay on one line
            if items.iter().all(|x| x.is_number() || x.is_null()) {
                out.push('[');
                for (k, x) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, x) in items.iter().enumerate() {
                push_indent(out, indent + 1);
                write_value(out, x, indent + 1);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, x)) in map.iter().enumerate() {
                push_indent(out, indent + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, indent + 1);
                if k + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(out, indent);
            out.push('}');
        }
    }
}

fn push_indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Non-finite floats are not representable in `serde_json::Value`; this maps
/// them to the same strings [`format_float`] uses.
pub fn float_value(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None => Value::String(format_float(x).trim_matches('"').to_string()),
    }
}
