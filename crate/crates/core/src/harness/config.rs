//! Experiment configuration: `key = value` lines grouped under `[section]`
//! headers, `#` comments, grids as comma lists.
//!
//! ```text
//! [experiment]
//! name = figure2
//! replications = 100
//! base_seed = 1
//! methods = lasso, pc_lasso, plmm
//!
//! [grid]
//! bnr = 0, 1.5, 3
//! n = 150
//! p = 300
//! q = 10
//! k = q
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::confound::{BlockSigns, Convention, ScenarioSpec};
use crate::error::{Error, Result};
use crate::evaluation::{MethodSpec, PcHandling};

/// Number of principal components for PC-LASSO, possibly tied to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KValue {
    Fixed(usize),
    /// The number of confounders entering the outcome.
    Q,
    /// The number of latent factors loading on the features.
    Factors,
}

impl KValue {
    pub fn resolve(self, spec: &ScenarioSpec) -> usize {
        match self {
            KValue::Fixed(k) => k,
            KValue::Q => spec.q,
            KValue::Factors => spec.factors(),
        }
    }
}

impl FromStr for KValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q" => Ok(KValue::Q),
            "factors" => Ok(KValue::Factors),
            t => t.parse().map(KValue::Fixed).map_err(|_| Error::Config(format!("bad k value '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Lasso,
    PcLasso,
    Plmm,
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "lasso" => Ok(MethodKind::Lasso),
            "pc_lasso" | "pclasso" => Ok(MethodKind::PcLasso),
            "plmm" => Ok(MethodKind::Plmm),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Expand methods and k values into concrete fits, in config order with
/// duplicates dropped.
pub fn method_specs(methods: &[MethodKind], ks: &[KValue], spec: &ScenarioSpec) -> Vec<MethodSpec> {
    let mut out = Vec::new();
    for m in methods {
        let new: Vec<MethodSpec> = match m {
            MethodKind::Lasso => vec![MethodSpec::Lasso],
            MethodKind::Plmm => vec![MethodSpec::Plmm],
            MethodKind::PcLasso => ks.iter().map(|k| MethodSpec::PcLasso { k: k.resolve(spec) }).collect(),
        };
        for s in new {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bnr: Vec<f64>,
    pub snr: Vec<f64>,
    pub q: Vec<usize>,
    pub p: Vec<usize>,
    pub n: Vec<usize>,
    pub s: usize,
    pub k: Vec<KValue>,
    /// When set, `2q` factors load on the features and the first `q` enter
    /// the outcome.
    pub hybrid: bool,
    pub convention: Convention,
    pub block_signs: BlockSigns,
    pub sigma_e: f64,
    pub var_psi: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            bnr: vec![0.0],
            snr: vec![1.5],
            q: vec![10],
            p: vec![600],
            n: vec![300],
            s: 8,
            k: vec![KValue::Q],
            hybrid: false,
            convention: Convention::Standardized,
            block_signs: BlockSigns::Strict,
            sigma_e: 1.0,
            var_psi: 1.0,
        }
    }
}

impl Grid {
    /// Scenario specs in a fixed nesting order: p, n, q, snr, bnr.
    pub fn scenarios(&self) -> Vec<ScenarioSpec> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &n in &self.n {
                for &q in &self.q {
                    for &snr in &self.snr {
                        for &bnr in &self.bnr {
                            out.push(ScenarioSpec {
                                p,
                                q,
                                n,
                                s: self.s,
                                snr,
                                bnr,
                                var_psi_target: self.var_psi,
                                sigma_e: self.sigma_e,
                                convention: self.convention,
                                block_signs: self.block_signs,
                                latent_factors: self.hybrid.then_some(2 * q),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub replications: usize,
    pub base_seed: u64,
    pub methods: Vec<MethodKind>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub folds: usize,
    pub pc_handling: PcHandling,
    pub grid: Grid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            replications: 1,
            base_seed: 1,
            methods: vec![MethodKind::Lasso, MethodKind::PcLasso, MethodKind::Plmm],
            output_dir: None,
            threads: None,
            folds: 10,
            pc_handling: PcHandling::WithinFold,
            grid: Grid::default(),
        }
    }
}

fn list<T: FromStr>(v: &str, line: usize, key: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Parse { line, message: format!("'{key}' needs at least one value") });
    }
    items
        .iter()
        .map(|s| s.parse::<T>().map_err(|_| Error::Parse { line, message: format!("bad value '{s}' for '{key}'") }))
        .collect()
}

fn one<T: FromStr>(v: &str, line: usize, key: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| Error::Parse { line, message: format!("bad value '{v}' for '{key}'") })
}

fn parse_bool(v: &str, line: usize, key: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse { line, message: format!("'{key}' expects true or false") }),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::from("experiment");
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(Error::Parse { line, message: "unterminated section".into() })?;
                section = name.trim().to_ascii_lowercase();
                if section != "experiment" && section != "grid" {
                    return Err(Error::Parse { line, message: format!("unknown section [{section}]") });
                }
                continue;
            }
            let (k, v) = l.split_once('=').ok_or(Error::Parse { line, message: "expected key = value".into() })?;
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim());
            let g = &mut cfg.grid;
            match (section.as_str(), k.as_str()) {
                ("experiment", "name") => cfg.name = v.to_string(),
                ("experiment", "replications") => cfg.replications = one(v, line, &k)?,
                ("experiment", "base_seed" | "seed") => cfg.base_seed = one(v, line, &k)?,
                ("experiment", "methods") => cfg.methods = list(v, line, &k)?,
                ("experiment", "output_dir") => cfg.output_dir = Some(PathBuf::from(v)),
                ("experiment", "threads") => cfg.threads = Some(one(v, line, &k)?),
                ("experiment", "folds") => cfg.folds = one(v, line, &k)?,
                ("experiment", "pc_handling") => {
                    cfg.pc_handling = match v.to_ascii_lowercase().as_str() {
                        "within_fold" => PcHandling::WithinFold,
                        "full_data" => PcHandling::FullData,
                        _ => return Err(Error::Parse { line, message: format!("bad pc_handling '{v}'") }),
                    }
                }
                ("grid", "bnr") => g.bnr = list(v, line, &k)?,
                ("grid", "snr") => g.snr = list(v, line, &k)?,
                ("grid", "q") => g.q = list(v, line, &k)?,
                ("grid", "p") => g.p = list(v, line, &k)?,
                ("grid", "n") => g.n = list(v, line, &k)?,
                ("grid", "s") => g.s = one(v, line, &k)?,
                ("grid", "k") => g.k = list(v, line, &k)?,
                ("grid", "hybrid") => g.hybrid = parse_bool(v, line, &k)?,
                ("grid", "convention") => g.convention = one(v, line, &k)?,
                ("grid", "block_signs") => {
                    g.block_signs = match v.to_ascii_lowercase().as_str() {
                        "strict" => BlockSigns::Strict,
                        "alternating" => BlockSigns::Alternating,
                        _ => return Err(Error::Parse { line, message: format!("bad block_signs '{v}'") }),
                    }
                }
                ("grid", "sigma_e") => g.sigma_e = one(v, line, &k)?,
                ("grid", "var_psi") => g.var_psi = one(v, line, &k)?,
                _ => return Err(Error::Parse { line, message: format!("unknown key '{k}' in [{section}]") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let g = &self.grid;
        if g.bnr.is_empty() || g.snr.is_empty() || g.q.is_empty() || g.p.is_empty() || g.n.is_empty() {
            return Err(Error::Config("empty scenario grid".into()));
        }
        if self.methods.contains(&MethodKind::PcLasso) && g.k.is_empty() {
            return Err(Error::Config("pc_lasso needs at least one k".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_lists() {
        let cfg = ExperimentConfig::parse(
            "# comment\n[experiment]\nname = f2\nreplications = 3\nmethods = lasso, plmm\n\n[grid]\nbnr = 0, 1.5,3\nk = q, 20\nhybrid = yes\nblock_signs = alternating\n",
        )
        .unwrap();
        assert_eq!(cfg.name, "f2");
        assert_eq!(cfg.replications, 3);
        assert_eq!(cfg.methods, vec![MethodKind::Lasso, MethodKind::Plmm]);
        assert_eq!(cfg.grid.bnr, vec![0.0, 1.5, 3.0]);
        assert_eq!(cfg.grid.k, vec![KValue::Q, KValue::Fixed(20)]);
        assert!(cfg.grid.hybrid);
        let specs = cfg.grid.scenarios();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[0].latent_factors, Some(20));
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let err = ExperimentConfig::parse("[grid]\nbnr = 0\nq = ten\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(matches!(ExperimentConfig::parse("[grid]\nwhat = 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(ExperimentConfig::parse("[other]\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("replications = 0\n"), Err(Error::Config(_))));
    }

    #[test]
    fn method_expansion() {
        let spec = ScenarioSpec { q: 10, latent_factors: Some(20), ..ScenarioSpec::default() };
        let m = method_specs(
            &[MethodKind::Lasso, MethodKind::PcLasso, MethodKind::Plmm],
            &[KValue::Q, KValue::Factors, KValue::Fixed(10)],
            &spec,
        );
        assert_eq!(
            m,
            vec![MethodSpec::Lasso, MethodSpec::PcLasso { k: 10 }, MethodSpec::PcLasso { k: 20 }, MethodSpec::Plmm]
        );
    }
}
