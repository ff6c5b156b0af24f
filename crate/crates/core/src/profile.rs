//! Variance profiles: the `d x n` matrix of entrywise standard deviations
//! `b_ij`, its ingestion from CSV/JSON, and generators for the structured
//! families used throughout the examples.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};

/// A single profile cell, kept exact when it was given as an integer or a
/// `p/q` ratio.
#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Exact(BigRational),
    Float(f64),
}

impl Entry {
    pub fn ratio(numer: i64, denom: i64) -> Self {
        Entry::Exact(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Entry::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Entry::Float(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Entry::Exact(_))
    }

    fn is_negative(&self) -> bool {
        match self {
            Entry::Exact(r) => r.is_negative(),
            Entry::Float(x) => *x < 0.0,
        }
    }

    fn mul(&self, other: &Entry) -> Entry {
        match (self, other) {
            (Entry::Exact(a), Entry::Exact(b)) => Entry::Exact(a * b),
            _ => Entry::Float(self.to_f64() * other.to_f64()),
        }
    }
}

impl From<i64> for Entry {
    fn from(v: i64) -> Self {
        Entry::Exact(BigRational::from_integer(BigInt::from(v)))
    }
}

impl From<f64> for Entry {
    fn from(v: f64) -> Self {
        Entry::Float(v)
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Entry::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            // Debug formatting always carries a '.' or exponent, so the cell
            // parses back as a float.
            Entry::Float(x) => write!(f, "{x:?}"),
        }
    }
}

impl FromStr for Entry {
    type Err = String;

    /// Integers and `p/q` ratios parse exactly; anything else that parses as
    /// a finite decimal becomes a float cell.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty cell".into());
        }
        let int = |t: &str| BigInt::from_str(t.trim().trim_start_matches('+')).ok();
        if let Some(i) = int(s) {
            return Ok(Entry::Exact(BigRational::from_integer(i)));
        }
        if let Some((p, q)) = s.split_once('/') {
            return match (int(p), int(q)) {
                (Some(_), Some(q)) if q.is_zero() => Err(format!("zero denominator in {s:?}")),
                (Some(p), Some(q)) => Ok(Entry::Exact(BigRational::new(p, q))),
                _ => Err(format!("invalid ratio {s:?}")),
            };
        }
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Entry::Float(if x == 0.0 { 0.0 } else { x })),
            Ok(_) => Err(format!("non-finite value {s:?}")),
            Err(_) => Err(format!("not a number: {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileFormat {
    Csv,
    Json,
}

impl FromStr for ProfileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ProfileFormat::Csv),
            "json" => Ok(ProfileFormat::Json),
            other => Err(Error::Argument(format!("unknown profile format {other:?}"))),
        }
    }
}

/// Immutable `d x n` matrix of nonnegative standard-deviation weights.
///
/// Float values are always available; exact rational values are kept in
/// addition when every cell was ingested exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    d: usize,
    n: usize,
    values: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl VarianceProfile {
    /// Builds a profile from row-major cells.
    pub fn from_entries(d: usize, n: usize, entries: Vec<Entry>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::Domain("profile must have at least one row and one column".into()));
        }
        if entries.len() != d * n {
            return Err(Error::Argument(format!(
                "expected {} entries for a {d}x{n} profile, got {}",
                d * n,
                entries.len()
            )));
        }
        for (k, e) in entries.iter().enumerate() {
            if e.is_negative() {
                return Err(Error::Domain(format!(
                    "negative entry {e} at row {}, column {}",
                    k / n + 1,
                    k % n + 1
                )));
            }
            if let Entry::Float(x) = e {
                if !x.is_finite() {
                    return Err(Error::Domain(format!("non-finite entry at index {k}")));
                }
            }
        }
        let values = entries.iter().map(Entry::to_f64).collect();
        let exact = if entries.iter().all(Entry::is_exact) {
            Some(
                entries
                    .into_iter()
                    .map(|e| match e {
                        Entry::Exact(r) => r,
                        Entry::Float(_) => unreachable!(),
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(Self { d, n, values, exact })
    }

    /// Float-mode profile from row-major values.
    pub fn from_f64(d: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_entries(d, n, values.into_iter().map(Entry::Float).collect())
    }

    /// Exact profile from row-major integers.
    pub fn from_integers(d: usize, n: usize, values: &[i64]) -> Result<Self> {
        Self::from_entries(d, n, values.iter().map(|&v| Entry::from(v)).collect())
    }

    /// Exact profile from row-major rationals.
    pub fn from_rationals(d: usize, n: usize, values: Vec<BigRational>) -> Result<Self> {
        Self::from_entries(d, n, values.into_iter().map(Entry::Exact).collect())
    }

    pub fn zeros(d: usize, n: usize) -> Result<Self> {
        Self::from_integers(d, n, &vec![0; d * n])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn exactness(&self) -> Exactness {
        if self.exact.is_some() {
            Exactness::Exact
        } else {
            Exactness::Float
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Row-major float values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row-major exact values, when the profile is exact.
    pub fn exact_values(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn entry(&self, i: usize, j: usize) -> Entry {
        match &self.exact {
            Some(ex) => Entry::Exact(ex[i * self.n + j].clone()),
            None => Entry::Float(self.get(i, j)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Euclidean norms of the columns.
    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| crate::numeric::csum((0..self.d).map(|i| self.get(i, j).powi(2))).sqrt())
            .collect()
    }

    /// Entrywise `t * B`. Exact profiles stay exact when `t` is given exactly.
    pub fn scaled(&self, t: &Entry) -> Result<Self> {
        let entries = (0..self.d * self.n)
            .map(|k| self.entry(k / self.n, k % self.n).mul(t))
            .collect();
        Self::from_entries(self.d, self.n, entries)
    }

    /// Applies `row_perm` and `col_perm`: the new cell `(i, j)` is the old
    /// cell `(row_perm[i], col_perm[j])`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Result<Self> {
        if row_perm.len() != self.d || col_perm.len() != self.n {
            return Err(Error::Argument("permutation length mismatch".into()));
        }
        let mut entries = Vec::with_capacity(self.d * self.n);
        for &i in row_perm {
            for &j in col_perm {
                entries.push(self.entry(i, j));
            }
        }
        Self::from_entries(self.d, self.n, entries)
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &VarianceProfile) -> Result<Self> {
        if (self.d, self.n) != (other.d, other.n) {
            return Err(Error::Argument("shape mismatch in entrywise product".into()));
        }
        let entries = (0..self.d * self.n)
            .map(|k| {
                let (i, j) = (k / self.n, k % self.n);
                self.entry(i, j).mul(&other.entry(i, j))
            })
            .collect();
        Self::from_entries(self.d, self.n, entries)
    }

    /// CSV text, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.d {
            let row: Vec<String> = (0..self.n).map(|j| self.entry(i, j).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serialization is infallible")
    }
}

impl Serialize for VarianceProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Row<'a>(&'a VarianceProfile, usize);
        impl Serialize for Row<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut seq = s.serialize_seq(Some(self.0.n))?;
                for j in 0..self.0.n {
                    match self.0.entry(self.1, j) {
                        Entry::Exact(r) if r.is_integer() => match r.numer().to_i64() {
                            Some(v) => seq.serialize_element(&v)?,
                            None => seq.serialize_element(&r.numer().to_string())?,
                        },
                        e @ Entry::Exact(_) => seq.serialize_element(&e.to_string())?,
                        Entry::Float(x) => seq.serialize_element(&x)?,
                    }
                }
                seq.end()
            }
        }
        let rows: Vec<Row<'_>> = (0..self.d).map(|i| Row(self, i)).collect();
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("d", &self.d)?;
        map.serialize_entry("n", &self.n)?;
        map.serialize_entry("entries", &rows)?;
        map.end()
    }
}

/// Reads a profile from `source` in the given format.
pub fn load_profile<R: Read>(mut source: R, format: ProfileFormat) -> Result<VarianceProfile> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::format(None, format!("unreadable input: {e}")))?;
    match format {
        ProfileFormat::Csv => parse_csv(&text),
        ProfileFormat::Json => parse_json(&text),
    }
}

fn parse_csv(text: &str) -> Result<VarianceProfile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::format(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::format(
                    line,
                    format!("ragged row: expected {w} cells, found {}", record.len()),
                ))
            }
            Some(_) => {}
        }
        for cell in record.iter() {
            entries.push(cell.parse::<Entry>().map_err(|m| Error::format(line, m))?);
        }
        rows += 1;
    }
    let n = width.unwrap_or(0);
    if rows == 0 || n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    VarianceProfile::from_entries(rows, n, entries)
}

fn json_cell(v: &Value) -> std::result::Result<Entry, String> {
    match v {
        Value::Number(num) => {
            if let Some(i) = num.as_i64() {
                Ok(Entry::from(i))
            } else if let Some(u) = num.as_u64() {
                Ok(Entry::Exact(BigRational::from_integer(BigInt::from(u))))
            } else {
                num.as_f64()
                    .map(Entry::Float)
                    .ok_or_else(|| format!("unrepresentable number {num}"))
            }
        }
        Value::String(s) => s.parse(),
        other => Err(format!("expected a number or \"p/q\" string, found {other}")),
    }
}

fn parse_json(text: &str) -> Result<VarianceProfile> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::format(Some(e.line()), e.to_string()))?;
    let (rows, declared) = match &doc {
        Value::Array(rows) => (rows, None),
        Value::Object(obj) => {
            let rows = obj
                .get("entries")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::format(None, "missing \"entries\" array"))?;
            let dim = |key: &str| obj.get(key).and_then(Value::as_u64).map(|v| v as usize);
            (rows, Some((dim("d"), dim("n"))))
        }
        _ => return Err(Error::format(None, "expected an array of rows or an object")),
    };
    let mut width: Option<usize> = None;
    let mut entries = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let cells = row
            .as_array()
            .ok_or_else(|| Error::format(None, format!("row {} is not an array", r + 1)))?;
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::format(
                    None,
                    format!("ragged row {}: expected {w} cells, found {}", r + 1, cells.len()),
                ))
            }
            Some(_) => {}
        }
        for c in cells {
            entries.push(json_cell(c).map_err(|m| Error::format(None, format!("row {}: {m}", r + 1)))?);
        }
    }
    let (d, n) = (rows.len(), width.unwrap_or(0));
    if d == 0 || n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    if let Some((dd, nn)) = declared {
        if dd.is_some_and(|v| v != d) || nn.is_some_and(|v| v != n) {
            return Err(Error::format(
                None,
                format!("declared dimensions {dd:?}x{nn:?} do not match entries {d}x{n}"),
            ));
        }
    }
    VarianceProfile::from_entries(d, n, entries)
}

/// Structured families of profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileFamily {
    /// `b_ij = 1`.
    Constant,
    /// i.i.d. columns, `b_ij = b_i` with `b` of length `d`.
    IidColumns { b: Vec<Entry> },
    /// i.i.d. rows, `b_ij = b_j` with `b` of length `n`.
    IidRows { b: Vec<Entry> },
    /// `b_ij = a_i b_j`.
    RankOne { a: Vec<Entry>, b: Vec<Entry> },
    /// `base` with every column norm pulled down to at most `k` times the
    /// smallest nonzero column norm.
    BoundedRatio { k: f64, base: VarianceProfile },
    Explicit(VarianceProfile),
}

impl ProfileFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileFamily::Constant => "constant",
            ProfileFamily::IidColumns { .. } => "iid_columns",
            ProfileFamily::IidRows { .. } => "iid_rows",
            ProfileFamily::RankOne { .. } => "rank_one",
            ProfileFamily::BoundedRatio { .. } => "bounded_ratio",
            ProfileFamily::Explicit(_) => "explicit",
        }
    }
}

fn check_vector(name: &str, v: &[Entry], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::Argument(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    if v.iter().any(Entry::is_negative) {
        return Err(Error::Domain(format!("{name} has a negative component")));
    }
    Ok(())
}

/// Materializes a family member as a `d x n` profile.
pub fn generate(family: &ProfileFamily, d: usize, n: usize) -> Result<VarianceProfile> {
    let cells = |f: &dyn Fn(usize, usize) -> Entry| -> Vec<Entry> {
        (0..d * n).map(|k| f(k / n, k % n)).collect()
    };
    match family {
        ProfileFamily::Constant => VarianceProfile::from_entries(d, n, cells(&|_, _| Entry::from(1))),
        ProfileFamily::IidColumns { b } => {
            check_vector("b", b, d)?;
            VarianceProfile::from_entries(d, n, cells(&|i, _| b[i].clone()))
        }
        ProfileFamily::IidRows { b } => {
            check_vector("b", b, n)?;
            VarianceProfile::from_entries(d, n, cells(&|_, j| b[j].clone()))
        }
        ProfileFamily::RankOne { a, b } => {
            check_vector("a", a, d)?;
            check_vector("b", b, n)?;
            VarianceProfile::from_entries(d, n, cells(&|i, j| a[i].mul(&b[j])))
        }
        ProfileFamily::BoundedRatio { k, base } => bounded_ratio(*k, base, d, n),
        ProfileFamily::Explicit(p) => {
            if (p.d, p.n) != (d, n) {
                return Err(Error::Argument(format!(
                    "explicit profile is {}x{}, requested {d}x{n}",
                    p.d, p.n
                )));
            }
            Ok(p.clone())
        }
    }
}

fn bounded_ratio(k: f64, base: &VarianceProfile, d: usize, n: usize) -> Result<VarianceProfile> {
    if !(k.is_finite() && k >= 1.0) {
        return Err(Error::Argument(format!("bounded_ratio needs K >= 1, got {k}")));
    }
    if (base.d, base.n) != (d, n) {
        return Err(Error::Argument(format!(
            "base profile is {}x{}, requested {d}x{n}",
            base.d, base.n
        )));
    }
    let mut columns: Vec<Vec<Entry>> = (0..n)
        .map(|j| (0..d).map(|i| base.entry(i, j)).collect())
        .collect();
    let norm_of = |col: &[Entry]| crate::numeric::csum(col.iter().map(|e| e.to_f64().powi(2))).sqrt();
    // Rescaled columns may land an ulp below the previous minimum, so capping
    // repeats until the ratio holds for the final norms.
    for _ in 0..64 {
        let norms: Vec<f64> = columns.iter().map(|c| norm_of(c)).collect();
        let min = norms.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            break;
        }
        let cap = k * min;
        if norms.iter().all(|&x| x <= cap) {
            break;
        }
        for (j, col) in columns.iter_mut().enumerate() {
            if norms[j] <= cap {
                continue;
            }
            let mut factor = cap / norms[j];
            loop {
                let scaled: Vec<Entry> = col.iter().map(|e| Entry::Float(e.to_f64() * factor)).collect();
                if norm_of(&scaled) <= cap {
                    *col = scaled;
                    break;
                }
                factor = f64::from_bits(factor.to_bits() - 1);
            }
        }
    }
    let entries = (0..d * n).map(|kk| columns[kk % n][kk / n].clone()).collect();
    VarianceProfile::from_entries(d, n, entries)
}

/// Random exact profile: each cell is zero with probability 1/5, otherwise
/// `p/q` with `p` in `1..=6` and `q` in `1..=4`.
pub fn random_rational_profile<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> VarianceProfile {
    let entries = (0..d * n)
        .map(|_| {
            if rng.random_bool(0.2) {
                Entry::from(0)
            } else {
                Entry::ratio(rng.random_range(1..=6), rng.random_range(1..=4))
            }
        })
        .collect();
    VarianceProfile::from_entries(d, n, entries).expect("generated cells are admissible")
}

/// Random float profile with cells uniform on `[0, 1)`, a fifth of them zeroed.
pub fn random_float_profile<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> VarianceProfile {
    let values = (0..d * n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
        .collect();
    VarianceProfile::from_f64(d, n, values).expect("generated cells are admissible")
}

/// Random nonnegative vector with components uniform on `[lo, hi)`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<Entry> {
    (0..len).map(|_| Entry::Float(rng.random_range(lo..hi))).collect()
}

/// Exact `1` used to scale without leaving exact mode.
pub fn unit() -> Entry {
    Entry::Exact(BigRational::one())
}
