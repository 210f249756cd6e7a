//! Fit report on user data: cross-validated prediction error and model size
//! per method, against the intercept-only model.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use super::io::write_path_csv;
use crate::evaluation::{cross_validate, CvFit, CvOptions, MethodSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub method: String,
    pub pe: f64,
    pub model_size: usize,
    pub lambda_min: Option<f64>,
    pub selected: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    /// The null model first, then one row per method.
    pub rows: Vec<FitRow>,
    pub fits: Vec<CvFit>,
}

/// All methods share the fold assignment derived from `opts.seed`.
pub fn fit_report(
    x: &DMatrix<f64>,
    names: &[String],
    y: &DVector<f64>,
    methods: &[MethodSpec],
    opts: &CvOptions,
) -> Result<FitReport> {
    let mut rows = Vec::with_capacity(methods.len() + 1);
    let mut fits = Vec::with_capacity(methods.len());
    let mut null_pe = None;
    for &m in methods {
        let fit = cross_validate(m, x, y, opts)?;
        null_pe.get_or_insert(fit.cv.null_cve);
        let beta = fit.selected_coefs();
        rows.push(FitRow {
            method: m.label(),
            pe: fit.prediction_error(),
            model_size: fit.model_size(),
            lambda_min: Some(fit.lambda_min()),
            selected: (0..beta.len()).filter(|&j| beta[j] != 0.0).map(|j| names[j].clone()).collect(),
        });
        fits.push(fit);
    }
    let null_pe = match null_pe {
        Some(v) => v,
        None => null_cv_error(y, opts)?,
    };
    rows.insert(0, FitRow { method: "null".into(), pe: null_pe, model_size: 0, lambda_min: None, selected: Vec::new() });
    Ok(FitReport { rows, fits })
}

fn null_cv_error(y: &DVector<f64>, opts: &CvOptions) -> Result<f64> {
    let folds = crate::evaluation::assign_folds(y.len(), opts.n_folds, opts.seed)?;
    let mut sq = 0.0;
    for f in 0..opts.n_folds {
        let train: Vec<f64> = (0..y.len()).filter(|&i| folds[i] != f).map(|i| y[i]).collect();
        let mean = train.iter().sum::<f64>() / train.len() as f64;
        sq += (0..y.len()).filter(|&i| folds[i] == f).map(|i| (y[i] - mean).powi(2)).sum::<f64>();
    }
    Ok(sq / y.len() as f64)
}

/// `fit_report.csv`, `selected_<method>.txt` (one feature name per line) and
/// the per-method path files.
pub fn write_fit_report(dir: &Path, report: &FitReport, names: &[String]) -> Result<()> {
    let rows = &report.rows;
    std::fs::create_dir_all(dir)?;
    for fit in &report.fits {
        write_path_csv(dir, &format!("path_{}", fit.fit.spec.label()), &fit.fit.path, names, Some(&fit.cv.cve))?;
    }
    let mut w = csv::Writer::from_path(dir.join("fit_report.csv"))?;
    w.write_record(["method", "pe", "model_size", "lambda_min"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.pe.to_string(),
            r.model_size.to_string(),
            r.lambda_min.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    for r in rows.iter().filter(|r| r.method != "null") {
        let mut f = std::fs::File::create(dir.join(format!("selected_{}.txt", r.method)))?;
        for name in &r.selected {
            writeln!(f, "{name}")?;
        }
    }
    Ok(())
}

pub fn format_fit_table(rows: &[FitRow]) -> String {
    let mut out = format!("{:<20}{:>14}{:>12}\n", "method", "PE", "model size");
    for r in rows {
        out.push_str(&format!("{:<20}{:>14.4}{:>12}\n", r.method, r.pe, r.model_size));
    }
    out
}
