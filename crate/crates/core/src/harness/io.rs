//! Matrix ingestion (CSV with header, or the DCNF1 binary cache) and CSV export.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::confound::Dataset;
use crate::solvers::LassoPath;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 5] = b"DCNF1";

/// A CSV file held as strings, with its header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        Table::from_reader(File::open(path)?)
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::Parse { line: 1, message: "missing header".into() });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(Error::Parse { line: 2, message: "no data rows".into() });
        }
        Ok(Table { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            name: name.to_string(),
            available: self.header.join(", "),
        })
    }

    pub fn column(&self, name: &str) -> Result<Vec<String>> {
        let c = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }

    pub fn numeric_column(&self, name: &str) -> Result<DVector<f64>> {
        let c = self.column_index(name)?;
        let vals = (0..self.rows.len()).map(|i| self.parse_cell(i, c)).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    /// All columns except `exclude`, parsed as numbers.
    pub fn numeric_matrix(&self, exclude: &[&str]) -> Result<(Vec<String>, DMatrix<f64>)> {
        for e in exclude {
            self.column_index(e)?;
        }
        let cols: Vec<usize> = (0..self.header.len()).filter(|&c| !exclude.contains(&self.header[c].as_str())).collect();
        if cols.is_empty() {
            return Err(Error::Parse { line: 1, message: "no feature columns".into() });
        }
        let n = self.rows.len();
        let mut x = DMatrix::zeros(n, cols.len());
        for i in 0..n {
            for (k, &c) in cols.iter().enumerate() {
                x[(i, k)] = self.parse_cell(i, c)?;
            }
        }
        Ok((cols.iter().map(|&c| self.header[c].clone()).collect(), x))
    }

    fn parse_cell(&self, row: usize, col: usize) -> Result<f64> {
        let raw = self.rows[row][col].trim();
        let line = row + 2;
        if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
            return Err(Error::Parse { line, message: format!("missing value in column '{}'", self.header[col]) });
        }
        let v: f64 = raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("'{raw}' in column '{}' is not a number", self.header[col]),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite value in column '{}'", self.header[col]) });
        }
        Ok(v)
    }
}

/// Write `names` and `x` as a DCNF1 cache: magic, u64 rows, u64 cols, each
/// name as u64 length plus UTF-8 bytes, then the values column-major as
/// little-endian f64.
pub fn write_cache(path: &Path, names: &[String], x: &DMatrix<f64>) -> Result<()> {
    if names.len() != x.ncols() {
        return Err(Error::Dimension("one name per column required".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(x.nrows() as u64).to_le_bytes())?;
    w.write_all(&(x.ncols() as u64).to_le_bytes())?;
    for n in names {
        w.write_all(&(n.len() as u64).to_le_bytes())?;
        w.write_all(n.as_bytes())?;
    }
    for v in x.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |m: &str| Error::Parse { line: 0, message: format!("{}: {m}", path.display()) };
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != CACHE_MAGIC {
        return Err(bad("not a DCNF1 file"));
    }
    let mut word = [0u8; 8];
    let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
        Ok(u64::from_le_bytes(word))
    };
    let rows = read_u64(&mut r)? as usize;
    let cols = read_u64(&mut r)? as usize;
    let mut names = Vec::with_capacity(cols);
    for _ in 0..cols {
        let len = read_u64(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(|_| bad("truncated names"))?;
        names.push(String::from_utf8(buf).map_err(|_| bad("column name is not UTF-8"))?);
    }
    let mut data = vec![0.0; rows * cols];
    let mut b = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut b).map_err(|_| bad("truncated data"))?;
        *v = f64::from_le_bytes(b);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes"));
    }
    Ok((names, DMatrix::from_vec(rows, cols, data)))
}

pub fn is_cache(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 5];
    let mut f = File::open(path)?;
    Ok(f.read(&mut magic)? == 5 && &magic == CACHE_MAGIC)
}

/// Numeric matrix from either format; CSV columns in `exclude` are skipped.
pub fn load_matrix(path: &Path, exclude: &[&str]) -> Result<(Vec<String>, DMatrix<f64>)> {
    if is_cache(path)? {
        return read_cache(path);
    }
    Table::read(path)?.numeric_matrix(exclude)
}

pub fn write_matrix_csv(path: &Path, names: &[String], x: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for i in 0..x.nrows() {
        w.write_record(x.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// `X` and `y` in one CSV (features then a `y` column), and, for synthetic
/// data, the truth as `feature,beta,tau` rows.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut names = feature_names(data.p());
    names.push("y".into());
    let mut w = csv::Writer::from_path(dir.join("data.csv"))?;
    w.write_record(&names)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.y[i].to_string());
        w.write_record(rec)?;
    }
    w.flush()?;
    if let Some(t) = &data.truth {
        let mut w = csv::Writer::from_path(dir.join("truth.csv"))?;
        w.write_record(["feature", "beta", "tau"])?;
        for j in 0..data.p() {
            let tau = t.tau.as_ref().map_or(String::new(), |v| v[j].to_string());
            w.write_record([format!("x{}", j + 1), t.beta[j].to_string(), tau])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("gamma.csv"))?;
        w.write_record(["confounder", "gamma"])?;
        for (c, g) in t.gamma.iter().enumerate() {
            w.write_record([(c + 1).to_string(), g.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// `<prefix>_coefs.csv` with one row per nonzero (lambda index, feature),
/// and `<prefix>_summary.csv` with lambda, model size, intercept and CVE.
pub fn write_path_csv(dir: &Path, prefix: &str, path: &LassoPath, names: &[String], cve: Option<&[f64]>) -> Result<()> {
    if names.len() != path.coefs.nrows() {
        return Err(Error::Dimension("one name per coefficient required".into()));
    }
    let mut w = csv::Writer::from_path(dir.join(format!("{prefix}_coefs.csv")))?;
    w.write_record(["lambda_index", "feature", "coefficient"])?;
    for l in 0..path.len() {
        for j in 0..path.coefs.nrows() {
            let v = path.coefs[(j, l)];
            if v != 0.0 {
                w.write_record([l.to_string(), names[j].clone(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(format!("{prefix}_summary.csv")))?;
    w.write_record(["lambda_index", "lambda", "model_size", "intercept", "cve"])?;
    for l in 0..path.len() {
        w.write_record([
            l.to_string(),
            path.lambdas[l].to_string(),
            path.model_sizes[l].to_string(),
            path.intercepts[l].to_string(),
            cve.and_then(|c| c.get(l)).map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
