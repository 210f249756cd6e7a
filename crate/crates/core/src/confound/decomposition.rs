//! Bias and exogenous-noise decomposition of an omitted confounder.

use nalgebra::{DMatrix, DVector};

use super::design::ConfoundingDesign;
use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;

/// Signal, bias and noise ratios of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    pub snr: f64,
    pub bsr: f64,
    pub bnr: f64,
    pub var_psi: f64,
}

fn check_shapes(a: &DMatrix<f64>, gamma: &DVector<f64>, scale: Option<&DVector<f64>>) -> Result<()> {
    if a.ncols() != gamma.len() {
        return Err(Error::Dimension(format!(
            "A has {} columns but gamma has length {}",
            a.ncols(),
            gamma.len()
        )));
    }
    if let Some(s) = scale {
        if s.len() != a.nrows() {
            return Err(Error::Dimension("scale length must equal p".into()));
        }
        if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain("scale entries must be positive and finite".into()));
        }
    }
    if a.iter().chain(gamma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loadings or gamma"));
    }
    Ok(())
}

/// Bias of the misspecified fit, `tau = Var(x)^{-1} Cov(x, z) gamma`.
///
/// Without `scale` this is `(I + AA')^{-1} A gamma`; with `scale = diag(S)` the
/// features are `Sx` and `tau = [S(I + AA')S]^{-1} S A gamma = S^{-1}(I + AA')^{-1} A gamma`.
/// The p x p system is solved through the q x q system `(I + A'A) u = gamma`,
/// `tau = A u`, which is positive definite for every finite `A`.
pub fn compute_tau(a: &DMatrix<f64>, gamma: &DVector<f64>, scale: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    check_shapes(a, gamma, scale)?;
    let q = a.ncols();
    let gram = DMatrix::identity(q, q) + a.tr_mul(a);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("I + A'A is not positive definite".into()))?;
    let u = chol.solve(gamma);
    let mut tau = a * u;
    if let Some(s) = scale {
        tau.component_div_assign(s);
    }
    Ok(tau)
}

/// Rotate `A` and `gamma` by the symmetric square root of `E(zz')` so the
/// model can be evaluated as if `z ~ N(0, I)`.
pub fn absorb_z_covariance(
    a: &DMatrix<f64>,
    gamma: &DVector<f64>,
    cov_z: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if cov_z.nrows() != a.ncols() || cov_z.ncols() != a.ncols() || gamma.len() != a.ncols() {
        return Err(Error::Dimension("cov_z must be q x q matching A and gamma".into()));
    }
    let root = psd_sqrt(cov_z, 1e-8)?;
    Ok((a * &root, &root * gamma))
}

/// `Var(psi | tau) = gamma'gamma + tau' Var(x) tau - 2 gamma' Cov(z, x) tau`.
///
/// `tau` must come from [`compute_tau`] with the same arguments.
pub fn compute_var_psi(
    a: &DMatrix<f64>,
    gamma: &DVector<f64>,
    tau: &DVector<f64>,
    scale: Option<&DVector<f64>>,
) -> Result<f64> {
    check_shapes(a, gamma, scale)?;
    if tau.len() != a.nrows() {
        return Err(Error::Dimension("tau length must equal p".into()));
    }
    let st = match scale {
        Some(s) => tau.component_mul(s),
        None => tau.clone(),
    };
    let at = a.tr_mul(&st);
    let v = gamma.norm_squared() + st.norm_squared() + at.norm_squared() - 2.0 * gamma.dot(&at);
    let tol = 1e-10 * (1.0 + gamma.norm_squared());
    if v < -tol {
        return Err(Error::Inconsistent(v));
    }
    Ok(v.max(0.0))
}

/// SNR, BSR and BNR of a design with effects `beta`, `gamma` and noise
/// variance `sigma_e2`.
pub fn compute_ratios(
    design: &ConfoundingDesign,
    beta: &DVector<f64>,
    gamma: &DVector<f64>,
    sigma_e2: f64,
) -> Result<Ratios> {
    if beta.len() != design.p {
        return Err(Error::Dimension("beta length must equal p".into()));
    }
    let scale = design.scale_opt();
    let tau = compute_tau(&design.loadings, gamma, scale)?;
    let var_psi = compute_var_psi(&design.loadings, gamma, &tau, scale)?;
    let signal = design.var_x_quadratic(beta);
    let bias = design.var_x_quadratic(&tau);
    if signal == 0.0 {
        return Err(Error::Domain("beta'Var(x)beta is zero; BSR is undefined".into()));
    }
    let noise = var_psi + sigma_e2;
    Ok(Ratios {
        snr: signal / noise,
        bsr: bias / signal,
        bnr: bias / noise,
        var_psi,
    })
}

/// Closed form of `tau'tau` for the balanced block design with `gamma = g 1_q`,
/// `p a^2 g^2 (a^2 + 1) / (m a^2 + 1)^2`.
///
/// This equals `tau'tau` of the standardized features; on the raw scale the
/// `(a^2 + 1)` factor drops out.
pub fn tau_norm_closed_form(p: usize, q: usize, a: f64, g: f64) -> Result<f64> {
    if q == 0 || p % q != 0 {
        return Err(Error::Dimension(format!("q = {q} must divide p = {p}")));
    }
    if !(a >= 0.0) {
        return Err(Error::Domain("a must be nonnegative".into()));
    }
    let m = (p / q) as f64;
    let a2 = a * a;
    Ok(p as f64 * a2 * g * g * (a2 + 1.0) / (m * a2 + 1.0).powi(2))
}
