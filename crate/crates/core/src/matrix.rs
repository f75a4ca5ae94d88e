//! Square nonnegative OD matrices over a labelled station set.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{OdError, Result};

/// Square nonnegative matrix of counts or rates with a zero diagonal.
///
/// Entry `(i, j)` is the flow from origin `i` to destination `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdMatrix {
    station_ids: Vec<String>,
    entries: DMatrix<f64>,
    symmetric: bool,
}

impl OdMatrix {
    /// Validates `entries` against the OD invariants: square, finite,
    /// nonnegative, zero diagonal. The symmetric flag is set when the matrix
    /// is exactly symmetric.
    pub fn new(station_ids: Vec<String>, entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(OdError::Dimension(format!(
                "OD matrix must be square, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        if station_ids.len() != n {
            return Err(OdError::Dimension(format!(
                "{} station ids for a {n}x{n} matrix",
                station_ids.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(OdError::InvalidMatrix(format!(
                        "entry ({i},{j}) = {v} is not a finite nonnegative value"
                    )));
                }
            }
            if entries[(i, i)] != 0.0 {
                return Err(OdError::InvalidMatrix(format!(
                    "diagonal entry ({i},{i}) = {} must be zero",
                    entries[(i, i)]
                )));
            }
        }
        let symmetric = is_exactly_symmetric(&entries);
        Ok(Self {
            station_ids,
            entries,
            symmetric,
        })
    }

    /// Builds a matrix with default station ids `S1..Sn`.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let ids = default_ids(entries.nrows());
        Self::new(ids, entries)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(OdError::Dimension("rows of unequal length".into()));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(station_ids: Vec<String>) -> Self {
        let n = station_ids.len();
        Self {
            station_ids,
            entries: DMatrix::zeros(n, n),
            symmetric: true,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn station_ids(&self) -> &[String] {
        &self.station_ids
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn total(&self) -> f64 {
        self.entries.sum()
    }

    /// Same entries under different station labels.
    pub fn with_ids(mut self, station_ids: Vec<String>) -> Result<Self> {
        if station_ids.len() != self.n() {
            return Err(OdError::Dimension(format!(
                "{} station ids for {} stations",
                station_ids.len(),
                self.n()
            )));
        }
        self.station_ids = station_ids;
        Ok(self)
    }

    /// Entrywise multiplication by a nonnegative scalar.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(OdError::param("factor", "must be finite and nonnegative"));
        }
        Ok(Self {
            station_ids: self.station_ids.clone(),
            entries: &self.entries * factor,
            symmetric: self.symmetric,
        })
    }

    /// Row sums (departures) and column sums (arrivals).
    pub fn margins(&self) -> (DVector<f64>, DVector<f64>) {
        row_col_margins(self)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_matrix_csv(writer, &self.station_ids, &self.entries)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (ids, m) = read_matrix_csv(reader, "<matrix>")?;
        Self::new(ids, m)
    }
}

pub fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("S{i}")).collect()
}

fn is_exactly_symmetric(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Largest absolute difference between `m[(i,j)]` and `m[(j,i)]`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(A + Aᵀ)/2` with the diagonal forced to zero.
pub fn symmetrize(a: &DMatrix<f64>) -> Result<OdMatrix> {
    symmetrize_with_ids(a, default_ids(a.nrows()))
}

pub fn symmetrize_with_ids(a: &DMatrix<f64>, station_ids: Vec<String>) -> Result<OdMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(OdError::Dimension(format!(
            "cannot symmetrize a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    OdMatrix::new(station_ids, s)
}

/// `departures[i] = Σ_j X[i][j]`, `arrivals[j] = Σ_i X[i][j]`.
pub fn row_col_margins(x: &OdMatrix) -> (DVector<f64>, DVector<f64>) {
    let m = x.entries();
    let n = m.nrows();
    let departures = DVector::from_fn(n, |i, _| m.row(i).sum());
    let arrivals = DVector::from_fn(n, |j, _| m.column(j).sum());
    (departures, arrivals)
}

/// Formats like C's `%.12g`: twelve significant digits, trailing zeros
/// trimmed, exponent form outside `[1e-5, 1e12)`.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Matrix CSV schema: a header row of station ids, then one row per origin
/// station in header order.
pub fn write_matrix_csv<W: Write>(writer: W, ids: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ids)?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| format_sig12(m[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the matrix CSV schema without enforcing OD invariants, so raw
/// reconstructions and coefficient matrices can be loaded too.
pub fn read_matrix_csv<R: Read>(reader: R, path: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let ids: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let n = ids.len();
    if n == 0 || (n == 1 && ids[0].is_empty()) {
        return Err(OdError::schema(path, "empty header"));
    }
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != n {
            return Err(OdError::schema(
                path,
                format!("row {} has {} fields, expected {n}", rows + 1, rec.len()),
            ));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| OdError::schema(path, format!("not a number: '{field}'")))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(OdError::schema(
            path,
            format!("{rows} data rows for {n} stations"),
        ));
    }
    Ok((ids, DMatrix::from_row_slice(n, n, &values)))
}
