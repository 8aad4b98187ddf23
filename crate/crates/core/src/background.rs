//! Leading-order slow-roll inflation, instantaneous transition to radiation
//! domination, and the time variables used by the integrators.
//!
//! Units: reduced Planck units, `M_Pl = 1`. During inflation
//! `a = −1/(Hη)`; after `η_end` the radiation-era law
//! `a = a_r (η − η_r)` with `η_r = 2η_end`, `a_r = 1/(H_end η_end²)` keeps
//! `a` and `aH` continuous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Era {
    Inflation,
    Radiation,
}

impl Era {
    pub fn tag(self) -> &'static str {
        match self {
            Era::Inflation => "inflation",
            Era::Radiation => "radiation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosmologyParams {
    /// Hubble rate during inflation.
    pub h_inf: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    /// Conformal time at the end of inflation (negative).
    pub eta_end: f64,
    /// e-folds between Hubble exit of the reference mode and the end of inflation.
    pub delta_n: f64,
}

impl CosmologyParams {
    pub fn new(h_inf: f64, epsilon1: f64, epsilon2: f64, eta_end: f64, delta_n: f64) -> Result<Self> {
        let c = CosmologyParams {
            h_inf,
            epsilon1,
            epsilon2,
            eta_end,
            delta_n,
        };
        c.validate()?;
        Ok(c)
    }

    /// `H = 10⁻⁵`, `ε₁ = 0.005`, `ε₂ = 0`, `ΔN = 50`, with `η_end = −1/H` so that `a_end = 1`.
    pub fn fiducial() -> Self {
        CosmologyParams {
            h_inf: 1e-5,
            epsilon1: 0.005,
            epsilon2: 0.0,
            eta_end: -1e5,
            delta_n: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_inf > 0.0 && self.h_inf.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "H_inf must be positive, got {}",
                self.h_inf
            )));
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon1 must lie in (0, 1), got {}",
                self.epsilon1
            )));
        }
        if !self.epsilon2.is_finite() {
            return Err(Error::InvalidParameter("epsilon2 must be finite".into()));
        }
        if !(self.eta_end < 0.0 && self.eta_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta_end must be negative, got {}",
                self.eta_end
            )));
        }
        if !(self.delta_n > 0.0 && self.delta_n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta_N must be positive, got {}",
                self.delta_n
            )));
        }
        Ok(())
    }

    /// Hubble rate at the end of inflation; equal to `H_inf` at leading order.
    pub fn h_end(&self) -> f64 {
        self.h_inf
    }

    pub fn rho_inf(&self) -> f64 {
        3.0 * self.h_inf * self.h_inf
    }

    pub fn rho_end(&self) -> f64 {
        3.0 * self.h_end() * self.h_end()
    }

    /// Comoving wavenumber of the reference mode, `k = e^{−ΔN}/|η_end|`.
    pub fn k_ref(&self) -> f64 {
        (-self.delta_n).exp() / self.eta_end.abs()
    }

    /// e-folds from Hubble exit of mode `k` to the end of inflation.
    pub fn delta_n_of(&self, k: f64) -> f64 {
        -(k * self.eta_end.abs()).ln()
    }

    pub fn matching(&self) -> MatchingData {
        MatchingData::from_cosmology(self)
    }
}

/// Radiation-era constants fixed by continuity of `a` and `aH` at `η_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingData {
    pub eta_r: f64,
    pub a_r: f64,
    pub h_end: f64,
}

impl MatchingData {
    pub fn from_cosmology(c: &CosmologyParams) -> Self {
        let h_end = c.h_end();
        MatchingData {
            eta_r: 2.0 * c.eta_end,
            a_r: 1.0 / (h_end * c.eta_end * c.eta_end),
            h_end,
        }
    }
}

/// `(k/aH)` at the end of inflation for a mode that exited `delta_n` e-folds earlier.
pub fn efolds_to_ratio(delta_n: f64) -> f64 {
    (-delta_n).exp()
}

/// Background evaluator bundling the cosmology and its matching data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub cosmo: CosmologyParams,
    pub matching: MatchingData,
}

impl Background {
    pub fn new(cosmo: CosmologyParams) -> Self {
        Background {
            cosmo,
            matching: cosmo.matching(),
        }
    }

    pub fn eta_end(&self) -> f64 {
        self.cosmo.eta_end
    }

    /// Era containing `eta`; `η_end` itself is attributed to inflation.
    pub fn era_of(&self, eta: f64) -> Era {
        if eta <= self.cosmo.eta_end {
            Era::Inflation
        } else {
            Era::Radiation
        }
    }

    fn check(&self, era: Era, eta: f64) -> Result<()> {
        let e = self.cosmo.eta_end;
        let ok = eta.is_finite()
            && match era {
                Era::Inflation => eta <= e,
                Era::Radiation => eta >= e,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("eta = {eta} outside the {} era", era.tag())))
        }
    }

    pub fn scale_factor_g<T: Real>(&self, era: Era, eta: T) -> T {
        match era {
            Era::Inflation => -(eta * self.cosmo.h_inf).recip(),
            Era::Radiation => (eta - self.matching.eta_r) * self.matching.a_r,
        }
    }

    /// Conformal Hubble rate `ℋ = a'/a`.
    pub fn conformal_hubble_g<T: Real>(&self, era: Era, eta: T) -> T {
        match era {
            Era::Inflation => -eta.recip(),
            Era::Radiation => (eta - self.matching.eta_r).recip(),
        }
    }

    /// Physical Hubble rate `H = ℋ/a`.
    pub fn hubble_g<T: Real>(&self, era: Era, eta: T) -> T {
        match era {
            Era::Inflation => T::cst(self.cosmo.h_inf),
            Era::Radiation => self.conformal_hubble_g(era, eta) / self.scale_factor_g(era, eta),
        }
    }

    /// Mukhanov–Sasaki pump field `z`.
    pub fn pump_g<T: Real>(&self, era: Era, eta: T) -> T {
        let a = self.scale_factor_g(era, eta);
        match era {
            Era::Inflation => a * (2.0 * self.cosmo.epsilon1).sqrt(),
            Era::Radiation => a * (2.0 * 3f64.sqrt()),
        }
    }

    pub fn omega2_g<T: Real>(&self, era: Era, k: f64, eta: T) -> T {
        match era {
            Era::Inflation => T::cst(k * k) - eta.powi(-2) * 2.0,
            Era::Radiation => T::cst(k * k / 3.0),
        }
    }

    pub fn scale_factor(&self, era: Era, eta: f64) -> Result<f64> {
        self.check(era, eta)?;
        let a = self.scale_factor_g(era, eta);
        if a > 0.0 {
            Ok(a)
        } else {
            Err(Error::Domain(format!("non-positive scale factor at eta = {eta}")))
        }
    }

    pub fn conformal_hubble(&self, era: Era, eta: f64) -> Result<f64> {
        self.check(era, eta)?;
        Ok(self.conformal_hubble_g(era, eta))
    }

    pub fn hubble(&self, era: Era, eta: f64) -> Result<f64> {
        self.check(era, eta)?;
        Ok(self.hubble_g(era, eta))
    }

    pub fn frequency_squared(&self, era: Era, k: f64, eta: f64) -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
        }
        self.check(era, eta)?;
        Ok(self.omega2_g(era, k, eta))
    }

    /// `k/(aH)` at `eta`: `x = −kη` during inflation, `y = k(η − η_r)` after.
    pub fn horizon_ratio(&self, era: Era, k: f64, eta: f64) -> f64 {
        match era {
            Era::Inflation => -k * eta,
            Era::Radiation => k * (eta - self.matching.eta_r),
        }
    }

    /// Inverse of [`Background::horizon_ratio`].
    pub fn eta_at_ratio(&self, era: Era, k: f64, r: f64) -> f64 {
        match era {
            Era::Inflation => -r / k,
            Era::Radiation => self.matching.eta_r + r / k,
        }
    }

    /// Logarithmic evolution variable: `−ln x` in inflation, `ln y` in the
    /// radiation era. Increases with `η` in both eras.
    pub fn log_time(&self, era: Era, k: f64, eta: f64) -> f64 {
        match era {
            Era::Inflation => -(-k * eta).ln(),
            Era::Radiation => (k * (eta - self.matching.eta_r)).ln(),
        }
    }

    /// Inverse of [`Background::log_time`].
    pub fn eta_of_log_time(&self, era: Era, k: f64, tau: f64) -> f64 {
        match era {
            Era::Inflation => -(-tau).exp() / k,
            Era::Radiation => self.matching.eta_r + tau.exp() / k,
        }
    }

    /// `dη/dτ` for the logarithmic variable.
    pub fn deta_dlog_time(&self, era: Era, k: f64, tau: f64) -> f64 {
        match era {
            Era::Inflation => (-tau).exp() / k,
            Era::Radiation => tau.exp() / k,
        }
    }

    /// Conformal time at which `k r_c/a = 1` in `era`, if it falls inside it.
    pub fn smearing_crossing(&self, era: Era, k: f64, r_c: f64) -> Option<f64> {
        let a = k * r_c;
        let eta = match era {
            Era::Inflation => -1.0 / (self.cosmo.h_inf * a),
            Era::Radiation => self.matching.eta_r + a / self.matching.a_r,
        };
        let inside = match era {
            Era::Inflation => eta <= self.cosmo.eta_end,
            Era::Radiation => eta > self.cosmo.eta_end,
        };
        inside.then_some(eta)
    }
}

/// Frequency squared as a free function (era-tagged).
pub fn frequency_squared(era: Era, k: f64, eta: f64, cosmo: &CosmologyParams) -> Result<f64> {
    Background::new(*cosmo).frequency_squared(era, k, eta)
}

/// Scale factor as a free function (era-tagged).
pub fn scale_factor(era: Era, eta: f64, cosmo: &CosmologyParams) -> Result<f64> {
    Background::new(*cosmo).scale_factor(era, eta)
}

/// Time span for one mode: from `x_ini = −kη_ini` (sub-Hubble) to a final
/// time either inside inflation or in the radiation era.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EraSchedule {
    pub k: f64,
    pub eta_ini: f64,
    pub eta_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EraSegment {
    pub era: Era,
    pub eta_start: f64,
    pub eta_stop: f64,
}

impl EraSchedule {
    /// Start at `x_ini`, stop `radiation_efolds` e-folds (in `y`) after the
    /// transition; `radiation_efolds = 0` stops at `η_end`.
    pub fn new(bg: &Background, k: f64, x_ini: f64, radiation_efolds: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
        }
        let x_end = -k * bg.eta_end();
        if !(x_ini > x_end) {
            return Err(Error::InvalidParameter(format!(
                "x_ini = {x_ini} must exceed -k eta_end = {x_end}"
            )));
        }
        if radiation_efolds < 0.0 {
            return Err(Error::InvalidParameter("radiation_efolds must be >= 0".into()));
        }
        let eta_final = if radiation_efolds == 0.0 {
            bg.eta_end()
        } else {
            bg.eta_at_ratio(Era::Radiation, k, x_end * radiation_efolds.exp())
        };
        Ok(EraSchedule {
            k,
            eta_ini: -x_ini / k,
            eta_final,
        })
    }

    pub fn segments(&self, bg: &Background) -> Vec<EraSegment> {
        let e = bg.eta_end();
        if self.eta_final <= e {
            vec![EraSegment {
                era: Era::Inflation,
                eta_start: self.eta_ini,
                eta_stop: self.eta_final,
            }]
        } else {
            vec![
                EraSegment {
                    era: Era::Inflation,
                    eta_start: self.eta_ini,
                    eta_stop: e,
                },
                EraSegment {
                    era: Era::Radiation,
                    eta_start: e,
                    eta_stop: self.eta_final,
                },
            ]
        }
    }

    pub fn ends_in_radiation(&self, bg: &Background) -> bool {
        self.eta_final > bg.eta_end()
    }
}
