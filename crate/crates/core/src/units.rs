//! Conversion between SI and reduced Planck units (`ħ = c = M_Pl = 1`,
//! `M_Pl = √(ħc/8πG)`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The constants file shipped with the crate.
pub const DEFAULT_CONSTANTS: &str = include_str!("../data/constants.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub speed_of_light: f64,
    pub hbar: f64,
    pub gravitational_constant: f64,
    pub atomic_mass_constant: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants::from_toml(DEFAULT_CONSTANTS).expect("shipped constants file parses")
    }
}

impl Constants {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Constants = toml::from_str(text).map_err(|e| Error::Config(format!("constants: {e}")))?;
        for (name, v) in [
            ("speed_of_light", c.speed_of_light),
            ("hbar", c.hbar),
            ("gravitational_constant", c.gravitational_constant),
            ("atomic_mass_constant", c.atomic_mass_constant),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("constants: {name} must be positive, got {v}")));
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Reduced Planck mass in kg.
    pub fn planck_mass(&self) -> f64 {
        (self.hbar * self.speed_of_light / (8.0 * std::f64::consts::PI * self.gravitational_constant)).sqrt()
    }

    /// Unit of length, `ħ/(M_Pl c)`, in m.
    pub fn planck_length(&self) -> f64 {
        self.hbar / (self.planck_mass() * self.speed_of_light)
    }

    /// Unit of time in s.
    pub fn planck_time(&self) -> f64 {
        self.planck_length() / self.speed_of_light
    }

    /// Atomic mass constant in Planck units.
    pub fn amu_planck(&self) -> f64 {
        self.atomic_mass_constant / self.planck_mass()
    }
}

/// Physical dimension, as powers of (length, time, mass).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    Dimensionless,
    /// m
    Length,
    /// s
    Time,
    /// s⁻¹ (rates, Hubble parameter, λ)
    Rate,
    /// kg
    Mass,
    /// m³ s⁻¹ (the CSL strength γ)
    Strength,
    /// m⁻¹ (comoving wavenumber)
    Wavenumber,
}

impl Dimension {
    fn powers(self) -> (i32, i32, i32) {
        match self {
            Dimension::Dimensionless => (0, 0, 0),
            Dimension::Length => (1, 0, 0),
            Dimension::Time => (0, 1, 0),
            Dimension::Rate => (0, -1, 0),
            Dimension::Mass => (0, 0, 1),
            Dimension::Strength => (3, -1, 0),
            Dimension::Wavenumber => (-1, 0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitSystem {
    Planck,
    Si,
}

/// SI value per Planck unit of the given dimension.
pub fn si_per_planck(dim: Dimension, c: &Constants) -> f64 {
    let (l, t, m) = dim.powers();
    c.planck_length().powi(l) * c.planck_time().powi(t) * c.planck_mass().powi(m)
}

/// Convert `value` of dimension `dim` between unit systems.
pub fn convert_units(value: f64, dim: Dimension, from: UnitSystem, to: UnitSystem, c: &Constants) -> f64 {
    match (from, to) {
        (UnitSystem::Planck, UnitSystem::Si) => value * si_per_planck(dim, c),
        (UnitSystem::Si, UnitSystem::Planck) => value / si_per_planck(dim, c),
        _ => value,
    }
}

/// `log₁₀` of the SI-per-Planck factor, for log-space conversions.
pub fn log10_si_per_planck(dim: Dimension, c: &Constants) -> f64 {
    let (l, t, m) = dim.powers();
    l as f64 * c.planck_length().log10() + t as f64 * c.planck_time().log10() + m as f64 * c.planck_mass().log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planck_units_match_high_precision_values() {
        let c = Constants::default();
        // 50-digit evaluation of the defining formulas with the same inputs
        assert!((c.planck_mass() / 4.341358397809341e-9 - 1.0).abs() < 1e-14);
        assert!((c.planck_length() / 8.102701083987416e-35 - 1.0).abs() < 1e-14);
        assert!((c.planck_time() / 2.702770155741348e-43 - 1.0).abs() < 1e-14);
        assert!((c.amu_planck() / 3.824929698128382e-19 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn round_trip() {
        let c = Constants::default();
        for dim in [Dimension::Length, Dimension::Rate, Dimension::Mass, Dimension::Strength] {
            let x = 1.2345e-7;
            let y = convert_units(
                convert_units(x, dim, UnitSystem::Si, UnitSystem::Planck, &c),
                dim,
                UnitSystem::Planck,
                UnitSystem::Si,
                &c,
            );
            assert!((y / x - 1.0).abs() < 1e-14);
            assert!((log10_si_per_planck(dim, &c) - si_per_planck(dim, &c).log10()).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{DEFAULT_CONSTANTS}\nplanck = 1.0\n");
        assert!(Constants::from_toml(&text).is_err());
    }
}
