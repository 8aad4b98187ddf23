//! Run configuration: TOML with sections, explicit unit tags on every
//! dimensional quantity, and no unknown keys.
//!
//! ```toml
//! [cosmology]
//! h_inf = { value = 1e-5, unit = "planck" }
//! epsilon1 = 0.005
//! delta_n = 15.0
//!
//! [csl]
//! gamma = { value = 1e-3, unit = "planck" }
//! r_c = { value = 1e7, unit = "planck" }
//! m0 = { value = 1.0, unit = "planck" }
//! ```
//!
//! Loading resolves everything to Planck units; the resolved config is
//! what manifests record, so a manifest replays without the constants
//! that were used for conversion.

use serde::{Deserialize, Serialize};

use crate::background::CosmologyParams;
use crate::coupling::{gamma_of_lambda, Bracket, CslParams};
use crate::error::{Error, Result};
use crate::exclusion::ScanSpec;
use crate::modes::MatchingRule;
use crate::spectrum::{CoefficientForm, Component, Route};
use crate::units::{convert_units, Constants, Dimension, UnitSystem};

/// A dimensional value with its unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    pub unit: UnitSystem,
}

impl Quantity {
    pub fn planck(value: f64) -> Self {
        Quantity {
            value,
            unit: UnitSystem::Planck,
        }
    }

    pub fn to_planck(self, dim: Dimension, c: &Constants) -> f64 {
        convert_units(self.value, dim, self.unit, UnitSystem::Planck, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CosmologySection {
    pub h_inf: Quantity,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub delta_n: f64,
    /// Conformal time at the end of inflation; defaults to `−1/H_inf`.
    pub eta_end: Option<Quantity>,
}

impl Default for CosmologySection {
    fn default() -> Self {
        CosmologySection {
            h_inf: Quantity::planck(1e-5),
            epsilon1: 0.005,
            epsilon2: 0.0,
            delta_n: 50.0,
            eta_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CslSection {
    /// Collapse strength; give either `gamma` or `lambda`.
    #[serde(default)]
    pub gamma: Option<Quantity>,
    #[serde(default)]
    pub lambda: Option<Quantity>,
    pub r_c: Quantity,
    /// Reference mass; defaults to the atomic mass constant.
    #[serde(default)]
    pub m0: Option<Quantity>,
    #[serde(default)]
    pub p_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    /// Initial `−kη` (sub-Hubble).
    pub x_ini: f64,
    pub rtol: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub steps_per_efold: f64,
    pub bracket: Bracket,
    pub matching: MatchingRule,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            x_ini: 50.0,
            rtol: 1e-10,
            n_traj: 4096,
            seed: 0,
            steps_per_efold: 50.0,
            bracket: Bracket::Leading,
            matching: MatchingRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSection {
    /// Wavenumber relative to the pivot `k_ref = e^{−ΔN}/|η_end|`.
    pub k_over_kref: f64,
    /// e-folds of radiation after the transition (0 stops at `η_end`).
    pub radiation_efolds: f64,
    pub n_outputs: usize,
    /// Also run the stochastic ensemble in `mode-evolve`.
    pub ensemble: bool,
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection {
            k_over_kref: 1.0,
            radiation_efolds: 3.0,
            n_outputs: 40,
            ensemble: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluateAt {
    EndOfInflation,
    #[default]
    Radiation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub k_min_over_kref: f64,
    pub k_max_over_kref: f64,
    pub n_k: usize,
    pub route: Route,
    pub component: Component,
    pub form: CoefficientForm,
    pub evaluate_at: EvaluateAt,
    /// `y = k_max(η − η_r)` at evaluation (radiation only).
    pub y_eval: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            k_min_over_kref: 1.0,
            k_max_over_kref: 10.0,
            n_k: 6,
            route: Route::Lindblad,
            component: Component::default(),
            form: CoefficientForm::default(),
            evaluate_at: EvaluateAt::default(),
            y_eval: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExclusionSection {
    pub log10_rc_m: [f64; 2],
    pub log10_lambda_s: [f64; 2],
    pub n_rc: usize,
    pub n_lambda: usize,
    pub safety: f64,
    /// Lab overlay CSV; relative paths are resolved against the config file.
    pub overlay: Option<String>,
}

impl Default for ExclusionSection {
    fn default() -> Self {
        let s = ScanSpec::default();
        ExclusionSection {
            log10_rc_m: s.log10_rc_m,
            log10_lambda_s: s.log10_lambda_s,
            n_rc: s.n_rc,
            n_lambda: s.n_lambda,
            safety: s.safety,
            overlay: None,
        }
    }
}

impl ExclusionSection {
    pub fn spec(&self) -> ScanSpec {
        ScanSpec {
            log10_rc_m: self.log10_rc_m,
            log10_lambda_s: self.log10_lambda_s,
            n_rc: self.n_rc,
            n_lambda: self.n_lambda,
            safety: self.safety,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: Format,
    pub path: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            format: Format::Csv,
            path: "out".into(),
        }
    }
}

/// Raw configuration as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub cosmology: CosmologySection,
    #[serde(default)]
    pub csl: Option<CslSection>,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub exclusion: ExclusionSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parse TOML text, applying `section.key=value` overrides first (values
/// are TOML literals; bare words are taken as strings).
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut root: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    root.try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

fn apply_override(root: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{spec}` must look like section.key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("override `{spec}` has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = root;
    for seg in &path[..path.len() - 1] {
        let entry = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Usage(format!("override `{spec}`: `{seg}` is not a section")))?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

/// Physical parameters resolved to Planck units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub cosmo: CosmologyParams,
    pub csl: Option<CslParams>,
    /// Reference mass in Planck units (also used by the exclusion scan).
    pub m0: f64,
}

impl RunConfig {
    /// Convert every tagged quantity to Planck units and validate.
    pub fn resolve(&self, c: &Constants) -> Result<Resolved> {
        let cs = &self.cosmology;
        let h = cs.h_inf.to_planck(Dimension::Rate, c);
        let eta_end = match cs.eta_end {
            Some(q) => q.to_planck(Dimension::Time, c),
            None => -1.0 / h,
        };
        let cosmo = CosmologyParams::new(h, cs.epsilon1, cs.epsilon2, eta_end, cs.delta_n)
            .map_err(|e| Error::Config(e.to_string()))?;
        let default_m0 = c.amu_planck();
        let (csl, m0) = match &self.csl {
            None => (None, default_m0),
            Some(s) => {
                let r_c = s.r_c.to_planck(Dimension::Length, c);
                let m0 = s.m0.map_or(default_m0, |q| q.to_planck(Dimension::Mass, c));
                let gamma = match (s.gamma, s.lambda) {
                    (Some(g), None) => g.to_planck(Dimension::Strength, c),
                    (None, Some(l)) => gamma_of_lambda(l.to_planck(Dimension::Rate, c), r_c),
                    _ => return Err(Error::Config("[csl] needs exactly one of `gamma` or `lambda`".into())),
                };
                let p = CslParams::new(gamma, r_c, m0, s.p_index).map_err(|e| Error::Config(e.to_string()))?;
                (Some(p), m0)
            }
        };
        Ok(Resolved { cosmo, csl, m0 })
    }

    /// The same configuration with every quantity rewritten in Planck
    /// units, as recorded in manifests.
    pub fn normalized(&self, c: &Constants) -> Result<RunConfig> {
        let r = self.resolve(c)?;
        let mut out = self.clone();
        out.cosmology.h_inf = Quantity::planck(r.cosmo.h_inf);
        out.cosmology.eta_end = Some(Quantity::planck(r.cosmo.eta_end));
        if let (Some(s), Some(p)) = (out.csl.as_mut(), r.csl) {
            s.gamma = Some(Quantity::planck(p.gamma));
            s.lambda = None;
            s.r_c = Quantity::planck(p.r_c);
            s.m0 = Some(Quantity::planck(p.m0));
        }
        Ok(out)
    }

    pub fn require_csl(&self, c: &Constants) -> Result<(Resolved, CslParams)> {
        let r = self.resolve(c)?;
        let csl = r
            .csl
            .ok_or_else(|| Error::Config("this command needs a [csl] section".into()))?;
        Ok((r, csl))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[cosmology]
h_inf = { value = 1e-5, unit = "planck" }
epsilon1 = 0.005
delta_n = 15.0

[csl]
gamma = { value = 1e-3, unit = "planck" }
r_c = { value = 1e7, unit = "planck" }
m0 = { value = 1.0, unit = "planck" }
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = parse_config(BASIC, &[]).unwrap();
        let r = cfg.resolve(&Constants::default()).unwrap();
        assert!((r.cosmo.eta_end / -1e5 - 1.0).abs() < 1e-15);
        assert_eq!(r.csl.unwrap().gamma, 1e-3);
    }

    #[test]
    fn unknown_keys_and_missing_units_are_errors() {
        let typo = BASIC.replace("epsilon1", "epsilon_1");
        assert!(matches!(parse_config(&typo, &[]), Err(Error::Config(_))));
        let untagged = BASIC.replace(r#"{ value = 1e7, unit = "planck" }"#, "1e7");
        assert!(parse_config(&untagged, &[]).is_err());
        let bad_unit = BASIC.replace(
            r#"unit = "planck" }
m0"#,
            r#"unit = "furlong" }
m0"#,
        );
        assert!(parse_config(&bad_unit, &[]).is_err());
    }

    #[test]
    fn si_inputs_convert_and_normalize() {
        let c = Constants::default();
        let si = BASIC.replace(
            r#"r_c = { value = 1e7, unit = "planck" }"#,
            r#"r_c = { value = 1e-7, unit = "si" }"#,
        );
        let cfg = parse_config(&si, &[]).unwrap();
        let r = cfg.resolve(&c).unwrap();
        assert!((r.csl.unwrap().r_c * c.planck_length() / 1e-7 - 1.0).abs() < 1e-14);
        let n = cfg.normalized(&c).unwrap();
        assert_eq!(n.resolve(&c).unwrap(), r);
    }

    #[test]
    fn lambda_input() {
        let c = Constants::default();
        let l = BASIC.replace("gamma =", "lambda =");
        let r = parse_config(&l, &[]).unwrap().resolve(&c).unwrap().csl.unwrap();
        assert!((r.lambda() / 1e-3 - 1.0).abs() < 1e-12);
        let both = format!("{BASIC}lambda = {{ value = 1.0, unit = \"si\" }}\n");
        assert!(parse_config(&both, &[]).unwrap().resolve(&c).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = parse_config(BASIC, &["cosmology.delta_n=20".into(), "spectrum.route=sde".into()]).unwrap();
        assert_eq!(cfg.cosmology.delta_n, 20.0);
        assert_eq!(cfg.spectrum.route, Route::Sde);
        assert!(parse_config(BASIC, &["cosmology.nonsense=1".into()]).is_err());
        assert!(parse_config(BASIC, &["novalue".into()]).is_err());
    }
}
