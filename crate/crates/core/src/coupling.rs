//! Phase-space form of the smeared mass-density collapse operator,
//! `Ĉ = α v̂ + β p̂`, for each era.

use serde::{Deserialize, Serialize};

use crate::background::{Background, CosmologyParams, Era};
use crate::error::{Error, Result};
use crate::jet::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CslParams {
    /// Collapse strength (Planck units).
    pub gamma: f64,
    /// Smearing length (Planck units).
    pub r_c: f64,
    /// Reference mass (Planck units).
    pub m0: f64,
    /// Density-contrast index; couplings are multiplied by `(k/aH)^p`.
    pub p_index: f64,
}

impl CslParams {
    pub fn new(gamma: f64, r_c: f64, m0: f64, p_index: f64) -> Result<Self> {
        let c = CslParams {
            gamma,
            r_c,
            m0,
            p_index,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.r_c > 0.0) {
            return Err(Error::InvalidParameter(format!("r_c must be > 0, got {}", self.r_c)));
        }
        if !(self.m0 > 0.0 && self.m0.is_finite()) {
            return Err(Error::InvalidParameter(format!("m0 must be > 0, got {}", self.m0)));
        }
        if !self.p_index.is_finite() {
            return Err(Error::InvalidParameter("p_index must be finite".into()));
        }
        Ok(())
    }

    /// `γ/m₀²`, the combination that multiplies every dissipative term.
    pub fn gamma_hat(&self) -> f64 {
        self.gamma / (self.m0 * self.m0)
    }

    /// Collapse rate `λ = γ/(8π^{3/2} r_c³)`; always derived, never stored.
    pub fn lambda(&self) -> f64 {
        lambda_of_gamma(self.gamma, self.r_c)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        CslParams { gamma, ..*self }
    }
}

pub fn lambda_of_gamma(gamma: f64, r_c: f64) -> f64 {
    gamma / (8.0 * std::f64::consts::PI.powf(1.5) * r_c.powi(3))
}

pub fn gamma_of_lambda(lambda: f64, r_c: f64) -> f64 {
    lambda * 8.0 * std::f64::consts::PI.powf(1.5) * r_c.powi(3)
}

/// Which inflationary bracket to use for `α`: `Full` keeps `ε₂`,
/// `Leading` drops it (the form the closed-form sources assume).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Bracket {
    #[default]
    Full,
    Leading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub era: Era,
    pub eta: f64,
}

/// The collapse operator's coefficients as functions of time, generic over
/// the scalar so that jets deliver time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub bg: Background,
    pub csl: CslParams,
    pub bracket: Bracket,
}

impl Coupling {
    pub fn new(cosmo: CosmologyParams, csl: CslParams, bracket: Bracket) -> Self {
        Coupling {
            bg: Background::new(cosmo),
            csl,
            bracket,
        }
    }

    /// Same coupling with the collapse strength set so that `γ/m₀² = gamma_hat`.
    pub fn with_gamma_hat(&self, gamma_hat: f64) -> Self {
        let m0 = self.csl.m0;
        Coupling {
            csl: self.csl.with_gamma(gamma_hat * m0 * m0),
            ..*self
        }
    }

    pub fn smearing_g<T: Real>(&self, era: Era, k: f64, eta: T) -> T {
        let a = self.bg.scale_factor_g(era, eta);
        let kr = k * self.csl.r_c;
        (-(a.powi(-2) * (0.5 * kr * kr))).exp()
    }

    /// `(α, β)` without the `(k/aH)^p` factor.
    pub fn raw_g<T: Real>(&self, era: Era, k: f64, eta: T) -> (T, T) {
        let bg = &self.bg;
        let a = bg.scale_factor_g(era, eta);
        let h = bg.hubble_g(era, eta);
        let z = bg.pump_g(era, eta);
        let sm = self.smearing_g(era, k, eta);
        // (aH/k)², i.e. (ℋ/k)²
        let q2 = (bg.conformal_hubble_g(era, eta) / k).powi(2);
        match era {
            Era::Inflation => {
                let e1 = bg.cosmo.epsilon1;
                let e2 = match self.bracket {
                    Bracket::Full => bg.cosmo.epsilon2,
                    Bracket::Leading => 0.0,
                };
                let alpha = h * h * e1 / z * sm * (q2 * (6.0 * e1 * (1.0 + 0.5 * e2)) + (-8.0 - e2));
                let beta = h * (2.0 * e1) / (a * z) * sm * (T::cst(1.0) - q2 * (3.0 * e1));
                (alpha, beta)
            }
            Era::Radiation => {
                let alpha = h * h * 24.0 / z * sm * (q2 * 3.0 - 1.0);
                let beta = h * 12.0 / (a * z) * sm * (T::cst(1.0) - q2 * 6.0);
                (alpha, beta)
            }
        }
    }

    /// `(k/aH)^p` at `eta`.
    pub fn p_factor_g<T: Real>(&self, era: Era, k: f64, eta: T) -> T {
        if self.csl.p_index == 0.0 {
            return T::cst(1.0);
        }
        let ratio = (self.bg.conformal_hubble_g(era, eta) / k).recip();
        ratio.powf(self.csl.p_index)
    }

    /// `(α, β)` including the density-contrast index.
    pub fn alpha_beta_g<T: Real>(&self, era: Era, k: f64, eta: T) -> (T, T) {
        let (a, b) = self.raw_g(era, k, eta);
        if self.csl.p_index == 0.0 {
            return (a, b);
        }
        let f = self.p_factor_g(era, k, eta);
        (a * f, b * f)
    }

    pub fn coefficients(&self, era: Era, k: f64, eta: f64) -> CouplingCoefficients {
        let (alpha, beta) = self.alpha_beta_g(era, k, eta);
        CouplingCoefficients { alpha, beta, era, eta }
    }
}

/// Smearing factor `e^{−k²r_c²/(2a²)}`.
pub fn smearing_factor(k: f64, eta: f64, era: Era, r_c: f64, cosmo: &CosmologyParams) -> Result<f64> {
    let bg = Background::new(*cosmo);
    let a = bg.scale_factor(era, eta)?;
    if !(r_c >= 0.0) {
        return Err(Error::InvalidParameter("r_c must be >= 0".into()));
    }
    Ok((-(k * r_c / a).powi(2) / 2.0).exp())
}

pub fn couplings_inflation(k: f64, eta: f64, cosmo: &CosmologyParams, csl: &CslParams) -> Result<CouplingCoefficients> {
    let c = Coupling::new(*cosmo, CslParams { p_index: 0.0, ..*csl }, Bracket::Full);
    c.bg.scale_factor(Era::Inflation, eta)?;
    Ok(c.coefficients(Era::Inflation, k, eta))
}

pub fn couplings_radiation(k: f64, eta: f64, cosmo: &CosmologyParams, csl: &CslParams) -> Result<CouplingCoefficients> {
    let c = Coupling::new(*cosmo, CslParams { p_index: 0.0, ..*csl }, Bracket::Full);
    c.bg.scale_factor(Era::Radiation, eta)?;
    Ok(c.coefficients(Era::Radiation, k, eta))
}

/// Multiply both coefficients by `(k/aH)^p` at the coefficients' own time.
pub fn apply_p_index(coeffs: CouplingCoefficients, k: f64, p: f64, cosmo: &CosmologyParams) -> CouplingCoefficients {
    if p == 0.0 {
        return coeffs;
    }
    let bg = Background::new(*cosmo);
    let f = (k / bg.conformal_hubble_g(coeffs.era, coeffs.eta)).powf(p);
    CouplingCoefficients {
        alpha: coeffs.alpha * f,
        beta: coeffs.beta * f,
        ..coeffs
    }
}
