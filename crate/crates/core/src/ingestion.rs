//! CSV datasets, geographic predictors and standardization.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{Composition, CompositionMatrix, PredictorMatrix};
use crate::sum::exact_sum;

/// Names the response and predictor columns of a delimited file.
///
/// Without a header row, columns are referred to by 0-based position
/// (`"0"`, `"3"`, …).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub responses: Vec<String>,
    pub predictors: Vec<String>,
    /// Latitude and longitude columns in degrees, turned into three
    /// Euclidean predictors appended after `predictors`.
    pub geo: Option<(String, String)>,
    pub delimiter: u8,
    pub has_header: bool,
}

impl DatasetSchema {
    pub fn new(responses: Vec<String>, predictors: Vec<String>) -> Self {
        Self { responses, predictors, geo: None, delimiter: b',', has_header: true }
    }

    pub fn with_geo(mut self, lat: impl Into<String>, lon: impl Into<String>) -> Self {
        self.geo = Some((lat.into(), lon.into()));
        self
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn without_header(mut self) -> Self {
        self.has_header = false;
        self
    }

    fn predictor_width(&self) -> usize {
        self.predictors.len() + if self.geo.is_some() { 3 } else { 0 }
    }

    pub fn validate(&self, need_response: bool) -> Result<()> {
        self.check(need_response, true)
    }

    fn check(&self, need_response: bool, need_predictor: bool) -> Result<()> {
        if need_response && self.responses.len() < 2 {
            return Err(Error::validation("need at least 2 response columns"));
        }
        if self.responses.len() == 1 {
            return Err(Error::validation("a composition needs at least 2 response columns"));
        }
        if need_predictor && self.predictor_width() == 0 {
            return Err(Error::validation("need at least 1 predictor column"));
        }
        let mut all: Vec<&String> = self.responses.iter().chain(&self.predictors).collect();
        if let Some((a, b)) = &self.geo {
            all.push(a);
            all.push(b);
        }
        let mut sorted = all.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!("column '{}' is used more than once", w[0])));
        }
        Ok(())
    }
}

/// A loaded dataset with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: PredictorMatrix<T>,
    pub u: CompositionMatrix<T>,
    pub response_names: Vec<String>,
}

struct Columns {
    resp: Vec<usize>,
    pred: Vec<usize>,
    geo: Option<(usize, usize)>,
}

fn resolve(header: Option<&csv::StringRecord>, name: &str) -> Result<usize> {
    match header {
        Some(h) => h
            .iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::validation(format!("column '{name}' not found in header"))),
        None => name
            .parse()
            .map_err(|_| Error::validation(format!("without a header, column '{name}' must be a 0-based position"))),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Csv { line, message: e.to_string() },
    }
}

fn field(rec: &csv::StringRecord, col: usize, line: u64) -> Result<f64> {
    let raw = rec.get(col).ok_or_else(|| Error::Csv { line, message: format!("missing column {col}") })?;
    let raw = raw.trim();
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Csv { line, message: format!("cannot parse '{raw}' as a number") })?;
    if !v.is_finite() {
        return Err(Error::Csv { line, message: format!("non-finite value '{raw}'") });
    }
    Ok(v)
}

type Loaded<T> = (PredictorMatrix<T>, Option<CompositionMatrix<T>>, Vec<String>);

fn read<T: Scalar>(path: &Path, schema: &DatasetSchema) -> Result<Loaded<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .from_path(path)
        .map_err(csv_error)?;
    let header = if schema.has_header { Some(rdr.headers().map_err(csv_error)?.clone()) } else { None };
    let cols = Columns {
        resp: schema.responses.iter().map(|n| resolve(header.as_ref(), n)).collect::<Result<_>>()?,
        pred: schema.predictors.iter().map(|n| resolve(header.as_ref(), n)).collect::<Result<_>>()?,
        geo: match &schema.geo {
            Some((a, b)) => Some((resolve(header.as_ref(), a)?, resolve(header.as_ref(), b)?)),
            None => None,
        },
    };
    let width = schema.predictor_width();
    let mut xs = Vec::new();
    let mut us = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        for &c in &cols.pred {
            xs.push(T::lit(field(&rec, c, line)?));
        }
        if let Some((la, lo)) = cols.geo {
            let v = latlon_to_euclidean::<T>(T::lit(field(&rec, la, line)?), T::lit(field(&rec, lo, line)?))
                .map_err(|e| Error::Csv { line, message: e.to_string() })?;
            xs.extend(v);
        }
        if !cols.resp.is_empty() {
            let vals: Vec<T> = cols.resp.iter().map(|&c| field(&rec, c, line).map(T::lit)).collect::<Result<_>>()?;
            let comp = Composition::new(vals)
                .map_err(|e| Error::Csv { line, message: format!("data row {rows}: {e}") })?;
            us.push(comp);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::validation(format!("{} contains no data rows", path.display())));
    }
    let mut names = schema.predictors.clone();
    if schema.geo.is_some() {
        names.extend(["geo_x", "geo_y", "geo_z"].map(String::from));
    }
    let x = PredictorMatrix::from_flat(xs, rows, width)?.with_names(names)?;
    let u = if us.is_empty() { None } else { Some(CompositionMatrix::from_rows(&us)?) };
    Ok((x, u, schema.responses.clone()))
}

/// Reads predictors and responses. Response rows within the sum tolerance
/// are re-closed; others are rejected with their line number.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset<T>> {
    schema.validate(true)?;
    let (x, u, response_names) = read(path.as_ref(), schema)?;
    Ok(Dataset { x, u: u.expect("response columns requested"), response_names })
}

/// Like [`load_csv`], with the response columns optional.
pub fn load_predictors<T: Scalar>(
    path: impl AsRef<Path>,
    schema: &DatasetSchema,
) -> Result<(PredictorMatrix<T>, Option<CompositionMatrix<T>>)> {
    schema.validate(false)?;
    let (x, u, _) = read(path.as_ref(), schema)?;
    Ok((x, u))
}

/// Reads only the response columns; predictor columns are optional.
pub fn load_responses<T: Scalar>(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset<T>> {
    schema.check(true, false)?;
    let (x, u, response_names) = read(path.as_ref(), schema)?;
    Ok(Dataset { x, u: u.expect("response columns requested"), response_names })
}

/// Column names from the first row of a delimited file.
pub fn csv_header(path: impl AsRef<Path>, delimiter: u8) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(csv_error)?;
    Ok(rdr.headers().map_err(csv_error)?.iter().map(|c| c.trim().to_string()).collect())
}

/// Unit vector `(cos φ cos λ, cos φ sin λ, sin φ)` for latitude φ and
/// longitude λ in degrees.
pub fn latlon_to_euclidean<T: Scalar>(lat: T, lon: T) -> Result<[T; 3]> {
    let (la, lo) = (lat.as_f64(), lon.as_f64());
    if !(-90.0..=90.0).contains(&la) || !(-180.0..=180.0).contains(&lo) {
        return Err(Error::validation(format!("latitude {la} or longitude {lo} out of range")));
    }
    let (phi, lam) = (la.to_radians(), lo.to_radians());
    Ok([T::lit(phi.cos() * lam.cos()), T::lit(phi.cos() * lam.sin()), T::lit(phi.sin())])
}

/// Column centres and sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn fit<T: Scalar>(x: &PredictorMatrix<T>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::validation("standardization needs at least 2 rows"));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col: Vec<f64> = x.rows().map(|r| r[j].as_f64()).collect();
            let m = exact_sum(col.iter().copied()) / n as f64;
            let ss = exact_sum(col.iter().map(|v| (v - m) * (v - m)));
            let sd = (ss / (n - 1) as f64).sqrt();
            if !(sd > 0.0) {
                let name = x.names().map(|ns| ns[j].clone()).unwrap_or_else(|| j.to_string());
                return Err(Error::validation(format!("predictor column '{name}' is constant")));
            }
            means.push(m);
            scales.push(sd);
        }
        Ok(Self { means, scales })
    }

    pub fn apply<T: Scalar>(&self, x: &PredictorMatrix<T>) -> Result<PredictorMatrix<T>> {
        if x.ncols() != self.means.len() {
            return Err(Error::validation("standardization width mismatch"));
        }
        let p = x.ncols();
        let data = x
            .as_flat()
            .iter()
            .enumerate()
            .map(|(i, v)| T::lit((v.as_f64() - self.means[i % p]) / self.scales[i % p]))
            .collect();
        let out = PredictorMatrix::from_flat(data, x.nrows(), p)?;
        match x.names() {
            Some(n) => out.with_names(n.to_vec()),
            None => Ok(out),
        }
    }
}

/// Zero-mean, unit sample-variance columns and the parameters to apply the
/// same map to new queries.
pub fn standardize<T: Scalar>(x: &PredictorMatrix<T>) -> Result<(PredictorMatrix<T>, Standardization)> {
    let s = Standardization::fit(x)?;
    Ok((s.apply(x)?, s))
}

/// Shortest string that parses back to the same value.
pub fn format_number<T: Scalar>(v: T) -> String {
    let a = v.abs();
    if a != T::zero() && (a < T::lit(1e-5) || a >= T::lit(1e16)) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes a header and numeric rows as CSV.
pub fn write_csv<W: Write, T: Scalar, R: AsRef<[T]>>(out: W, header: &[String], rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.as_ref().iter().map(|v| format_number(*v))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes predictors followed by responses, one row per observation.
pub fn write_dataset<W: Write, T: Scalar>(
    out: W,
    x: &PredictorMatrix<T>,
    u: &CompositionMatrix<T>,
    predictor_names: &[String],
    response_names: &[String],
) -> Result<()> {
    if x.nrows() != u.nrows() || predictor_names.len() != x.ncols() || response_names.len() != u.dim() {
        return Err(Error::validation("dataset shape does not match column names"));
    }
    let header: Vec<String> = predictor_names.iter().chain(response_names).cloned().collect();
    let rows: Vec<Vec<T>> = x.rows().zip(u.rows()).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
    write_csv(out, &header, &rows)
}
