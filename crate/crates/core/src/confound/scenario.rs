//! Solving generator parameters `(a, r, b)` for target SNR / BNR.

use nalgebra::{DMatrix, DVector};

use super::decomposition::{compute_tau, compute_var_psi};
use super::design::{build_design_with, BlockSigns, ConfoundingDesign};
use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;

/// Which covariance the population quantities are computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// Features are `S(d + Az)` with unit variances.
    #[default]
    Standardized,
    /// Features are `d + Az`.
    Raw,
}

impl Convention {
    pub fn standardize(self) -> bool {
        matches!(self, Convention::Standardized)
    }

    pub fn name(self) -> &'static str {
        match self {
            Convention::Standardized => "standardized",
            Convention::Raw => "raw",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standardized" | "std" => Ok(Convention::Standardized),
            "raw" => Ok(Convention::Raw),
            other => Err(Error::Config(format!("unknown convention '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub p: usize,
    /// Confounders entering the outcome.
    pub q: usize,
    pub n: usize,
    pub s: usize,
    pub snr: f64,
    pub bnr: f64,
    pub var_psi_target: f64,
    pub sigma_e: f64,
    pub convention: Convention,
    pub block_signs: BlockSigns,
    /// Latent factors loading on the features; the first `q` of them also
    /// enter the outcome. `None` means `q`.
    pub latent_factors: Option<usize>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            p: 600,
            q: 10,
            n: 300,
            s: 8,
            snr: 1.5,
            bnr: 0.0,
            var_psi_target: 1.0,
            sigma_e: 1.0,
            convention: Convention::Standardized,
            block_signs: BlockSigns::Strict,
            latent_factors: None,
        }
    }
}

impl ScenarioSpec {
    pub fn factors(&self) -> usize {
        self.latent_factors.unwrap_or(self.q)
    }

    /// BSR implied by the SNR / BNR pair.
    pub fn bsr(&self) -> f64 {
        self.bnr / self.snr
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 || self.n == 0 {
            return Err(Error::Domain("p, q and n must be positive".into()));
        }
        if self.factors() < self.q {
            return Err(Error::Domain("latent factors cannot be fewer than confounders".into()));
        }
        if self.s > self.p {
            return Err(Error::Domain(format!("s = {} exceeds p = {}", self.s, self.p)));
        }
        for (name, v) in [("snr", self.snr), ("var_psi", self.var_psi_target), ("sigma_e", self.sigma_e)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.bnr >= 0.0) || !self.bnr.is_finite() {
            return Err(Error::Domain(format!("bnr must be >= 0, got {}", self.bnr)));
        }
        Ok(())
    }
}

/// Solved generator parameters.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub spec: ScenarioSpec,
    pub a: f64,
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub rho: f64,
    pub gamma: DVector<f64>,
    pub tau: DVector<f64>,
    pub var_psi: f64,
    pub design: ConfoundingDesign,
}

impl ScenarioParams {
    pub fn sigma_e2(&self) -> f64 {
        self.spec.sigma_e * self.spec.sigma_e
    }
}

/// Eigen-summary of `P'P` for a design `A = aP` and a confounder direction
/// `gamma = g * gamma0`: `Var(psi) = g^2 sum_i w_i / (1 + a^2 l_i)`.
struct LoadingSpectrum {
    eigvals: Vec<f64>,
    weights: Vec<f64>,
}

impl LoadingSpectrum {
    fn new(pattern: &DMatrix<f64>, gamma0: &DVector<f64>) -> Self {
        let gram = pattern.tr_mul(pattern);
        let (vals, vecs) = sorted_symmetric_eigen(&gram);
        let proj = vecs.tr_mul(gamma0);
        LoadingSpectrum {
            eigvals: vals.iter().map(|v| v.max(0.0)).collect(),
            weights: proj.iter().map(|v| v * v).collect(),
        }
    }

    fn var_psi(&self, a: f64, g: f64) -> f64 {
        let a2 = a * a;
        g * g
            * self
                .eigvals
                .iter()
                .zip(&self.weights)
                .map(|(l, w)| w / (1.0 + a2 * l))
                .sum::<f64>()
    }

    /// `tau' Var(x) tau`.
    fn bias(&self, a: f64, g: f64) -> f64 {
        let a2 = a * a;
        g * g
            * self
                .eigvals
                .iter()
                .zip(&self.weights)
                .map(|(l, w)| w * a2 * l / (1.0 + a2 * l))
                .sum::<f64>()
    }
}

const ROOT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 200;

/// Root of an increasing `f` on `[0, inf)` with bracket expansion.
fn bisect_increasing(
    f: impl Fn(f64) -> Result<f64>,
    target: f64,
    start_hi: f64,
    max_hi: f64,
    what: &'static str,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = start_hi;
    while f(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > max_hi {
            return Err(Error::NoBracket { what, target, lo: 0.0, hi: max_hi });
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v - target).abs() <= ROOT_TOL {
            return Ok(mid);
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let v = f(mid)?;
    if (v - target).abs() <= ROOT_TOL.max(1e-12 * target.abs()) {
        Ok(mid)
    } else {
        Err(Error::NoBracket { what, target, lo, hi })
    }
}

/// Solve `(a, r)` so that `Var(psi | tau)` and BNR hit their targets, then set
/// the signal size `b` from the SNR with the diagonal approximation
/// `beta' Var(x) beta ~ s b^2 mean(diag Var(x))`.
pub fn solve_scenario(spec: &ScenarioSpec) -> Result<ScenarioParams> {
    spec.validate()?;
    let factors = spec.factors();
    let standardize = spec.convention.standardize();
    let sigma_e2 = spec.sigma_e * spec.sigma_e;
    let gamma0 = DVector::from_fn(factors, |c, _| if c < spec.q { 1.0 } else { 0.0 });

    let (a, r) = if spec.bnr == 0.0 {
        (0.0, 0.0)
    } else {
        let unit = build_design_with(spec.p, factors, 1.0, standardize, spec.block_signs)?;
        let spectrum = LoadingSpectrum::new(&unit.pattern, &gamma0);
        let target = spec.var_psi_target;
        let noise = target + sigma_e2;
        let r_for = |a: f64| -> Result<f64> {
            bisect_increasing(|r| Ok(spectrum.var_psi(a, r * a)), target, 1.0, 1e15, "r")
        };
        let bnr_at = |a: f64| -> Result<f64> {
            if a == 0.0 {
                return Ok(0.0);
            }
            let r = r_for(a)?;
            Ok(spectrum.bias(a, r * a) / noise)
        };
        let a = bisect_increasing(bnr_at, spec.bnr, 0.1, 1e6, "a")?;
        (a, r_for(a)?)
    };

    let design = build_design_with(spec.p, factors, a, standardize, spec.block_signs)?;
    let g = r * a;
    let gamma = &gamma0 * g;
    let tau = compute_tau(&design.loadings, &gamma, design.scale_opt())?;
    let var_psi = compute_var_psi(&design.loadings, &gamma, &tau, design.scale_opt())?;
    let b = if spec.s == 0 {
        0.0
    } else {
        let mean_diag = design.var_x_diagonal().mean();
        (spec.snr * (var_psi + sigma_e2) / (spec.s as f64 * mean_diag)).sqrt()
    };
    Ok(ScenarioParams {
        spec: spec.clone(),
        a,
        r,
        g,
        b,
        rho: a * a / (1.0 + a * a),
        gamma,
        tau,
        var_psi,
        design,
    })
}

/// Signal size that makes `beta' Var(x) beta` exact for the realized support.
pub fn exact_signal_size(params: &ScenarioParams, support: &[usize]) -> Result<f64> {
    if support.is_empty() {
        return Ok(0.0);
    }
    let mut ind = DVector::zeros(params.design.p);
    for &j in support {
        if j >= params.design.p {
            return Err(Error::Dimension(format!("support index {j} out of range")));
        }
        ind[j] = 1.0;
    }
    let quad = params.design.var_x_quadratic(&ind);
    Ok((params.spec.snr * (params.var_psi + params.sigma_e2()) / quad).sqrt())
}
