//! Observables: the power spectrum of `v` through three independent routes,
//! the collapse criterion `R`, closed-form correction coefficients, and
//! spectral-index fits of the CSL correction.
//!
//! Closed forms are evaluated in log-space with exact rational prefactors,
//! so `ΔN = 50` (where `e^{−10ΔN}` underflows) is handled without loss.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::background::{Background, CosmologyParams, Era, EraSchedule};
use crate::coupling::{Bracket, Coupling, CslParams};
use crate::ensemble::{run_ensemble, EnsembleOptions};
use crate::error::{Error, Result};
use crate::modes::{MatchingRule, Modes};
use crate::moments::{integrate_moments, MomentOptions, MomentState};
use crate::riccati::{integrate_omega, OmegaOptions};
use crate::stats::fit_line;

/// When a mode crosses the smearing scale `r_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    InflationCrossing,
    RadiationCrossing,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::InflationCrossing => "inflation-crossing",
            Regime::RadiationCrossing => "radiation-crossing",
        }
    }
}

/// Branch rule: inflation crossing iff `H_end r_c < e^{ΔN(k)}`.
pub fn regime_of(cosmo: &CosmologyParams, r_c: f64, k: f64) -> Regime {
    if (cosmo.h_end() * r_c).ln() < cosmo.delta_n_of(k) {
        Regime::InflationCrossing
    } else {
        Regime::RadiationCrossing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Lindblad second moments plus the Riccati width.
    Lindblad,
    /// Monte-Carlo ensemble of the stochastic wavefunction.
    Sde,
    /// Leading-order closed forms.
    ClosedForm,
}

impl Route {
    pub fn tag(self) -> &'static str {
        match self {
            Route::Lindblad => "lindblad",
            Route::Sde => "sde",
            Route::ClosedForm => "closed-form",
        }
    }
}

/// Bookkeeping of the closed forms. `MainText` writes them with
/// `ρ = 3H²` (448/3, 35408/429, 6ρ_inf); `Supplement` with `H²`
/// (448, 35408/143, 36H²).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientForm {
    MainText,
    #[default]
    Supplement,
}

/// Which part of the first-order covariance correction to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    Total,
    InflationSourced,
    /// Sourced after the transition: the part the radiation-era closed
    /// forms describe.
    #[default]
    RadiationSourced,
}

/// Exact rational prefactors of the closed forms.
pub mod coefficients {
    use num_rational::Ratio;

    pub fn inflation_main() -> Ratio<i64> {
        Ratio::from_integer(6)
    }
    pub fn inflation_supplement() -> Ratio<i64> {
        Ratio::from_integer(36)
    }
    pub fn inflation_crossing_main() -> Ratio<i64> {
        Ratio::new(448, 3)
    }
    pub fn inflation_crossing_supplement() -> Ratio<i64> {
        Ratio::from_integer(448)
    }
    pub fn radiation_crossing_main() -> Ratio<i64> {
        Ratio::new(35408, 429)
    }
    pub fn radiation_crossing_supplement() -> Ratio<i64> {
        Ratio::new(35408, 143)
    }
    pub fn collapse_inflation_crossing() -> Ratio<i64> {
        Ratio::from_integer(1152)
    }
    pub fn collapse_radiation_crossing() -> Ratio<i64> {
        Ratio::new(7264, 11)
    }
}

fn ln_ratio(r: Ratio<i64>) -> f64 {
    (*r.numer() as f64).ln() - (*r.denom() as f64).ln()
}

/// Where a closed form is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "stage")]
pub enum Stage {
    /// During inflation, super-Hubble, at `x = −kη`.
    Inflation { x: f64 },
    /// Frozen value after the transition.
    Radiation,
}

/// Natural log of the closed-form relative correction to `P_vv`.
/// Returns `-inf` for `γ = 0`. Only `p = 0` has a closed form.
pub fn ln_correction_coefficient(
    regime: Regime,
    stage: Stage,
    form: CoefficientForm,
    cosmo: &CosmologyParams,
    csl: &CslParams,
    k: f64,
) -> Result<f64> {
    use coefficients::*;
    if csl.p_index != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "closed-form corrections exist only for p = 0, got p = {}",
            csl.p_index
        )));
    }
    let ln_gh = csl.gamma_hat().ln();
    let ln_h2 = 2.0 * cosmo.h_end().ln();
    let ln_rho = 3f64.ln() + ln_h2;
    let ln_e1 = cosmo.epsilon1.ln();
    let ln_x_end = -cosmo.delta_n_of(k);
    Ok(match stage {
        Stage::Inflation { x } => {
            let (coef, ln_scale) = match form {
                CoefficientForm::MainText => (inflation_main(), 3f64.ln() + 2.0 * cosmo.h_inf.ln()),
                CoefficientForm::Supplement => (inflation_supplement(), 2.0 * cosmo.h_inf.ln()),
            };
            ln_ratio(coef) + ln_gh + ln_scale + 3.0 * ln_e1 - x.ln()
        }
        Stage::Radiation => {
            let (coef, ln_scale) = match (regime, form) {
                (Regime::InflationCrossing, CoefficientForm::MainText) => (inflation_crossing_main(), ln_rho),
                (Regime::InflationCrossing, CoefficientForm::Supplement) => (inflation_crossing_supplement(), ln_h2),
                (Regime::RadiationCrossing, CoefficientForm::MainText) => (radiation_crossing_main(), ln_rho),
                (Regime::RadiationCrossing, CoefficientForm::Supplement) => (radiation_crossing_supplement(), ln_h2),
            };
            let base = ln_ratio(coef) + ln_gh + ln_scale + ln_e1;
            match regime {
                Regime::InflationCrossing => base - ln_x_end,
                Regime::RadiationCrossing => base - 9.0 * (cosmo.h_end() * csl.r_c).ln() - 10.0 * ln_x_end,
            }
        }
    })
}

/// Natural log of the closed-form `1/R − 1` after the transition
/// (`-inf` for `γ = 0`).
pub fn ln_collapse_closed_form(regime: Regime, cosmo: &CosmologyParams, csl: &CslParams, k: f64) -> f64 {
    use coefficients::*;
    let ln_base = csl.gamma_hat().ln() + cosmo.rho_end().ln();
    let ln_x_end = -cosmo.delta_n_of(k);
    match regime {
        Regime::InflationCrossing => ln_ratio(collapse_inflation_crossing()) + ln_base - 7.0 * ln_x_end,
        Regime::RadiationCrossing => {
            ln_ratio(collapse_radiation_crossing()) + ln_base - 14.0 * ln_x_end - 7.0 * (cosmo.h_end() * csl.r_c).ln()
        }
    }
}

/// `R = 1/(1 + e^{ln(1/R − 1)})`, accurate for either sign of the log and
/// kept strictly positive when `R` underflows.
fn r_from_ln_q(ln_q: f64) -> f64 {
    if ln_q > 0.0 {
        let e = (-ln_q).exp();
        (e / (1.0 + e)).max(f64::MIN_POSITIVE)
    } else {
        1.0 / (1.0 + ln_q.exp())
    }
}

/// One point of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub k: f64,
    /// `k³(⟨v²⟩ − ⟨(v − v̄)²⟩)/(2π²)`.
    pub p_v: f64,
    /// `k³|g⁰|²/(2π²)` at the same time: the γ = 0 Born-rule spectrum.
    pub p_standard: f64,
    /// Relative correction to `P_vv` (component chosen by the options).
    pub correction_rel: f64,
    pub correction_inflation: f64,
    pub correction_radiation: f64,
    /// `R = ReΩ₀/ReΩ`.
    pub r_value: f64,
    pub regime: Regime,
    pub route: Route,
    /// Standard error of `p_v` (Monte-Carlo route only).
    pub p_v_stderr: Option<f64>,
    /// Set when statistical noise made the variance negative.
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// Initial `−kη`.
    pub x_ini: f64,
    /// Evaluate at `y = k_max(η − η_r)` in the radiation era, or at the
    /// end of inflation when `None`.
    pub y_eval: Option<f64>,
    pub rule: MatchingRule,
    pub bracket: Bracket,
    pub form: CoefficientForm,
    pub component: Component,
    pub moments: MomentOptions,
    pub omega: OmegaOptions,
    pub ensemble: EnsembleOptions,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            x_ini: 50.0,
            y_eval: Some(0.05),
            rule: MatchingRule::default(),
            bracket: Bracket::Leading,
            form: CoefficientForm::default(),
            component: Component::default(),
            moments: MomentOptions::default(),
            omega: OmegaOptions::default(),
            ensemble: EnsembleOptions::default(),
        }
    }
}

/// Common evaluation time for a set of wavenumbers.
pub fn evaluation_time(cosmo: &CosmologyParams, ks: &[f64], opts: &SpectrumOptions) -> Result<f64> {
    let bg = Background::new(*cosmo);
    let k_max = ks.iter().copied().fold(0.0, f64::max);
    match opts.y_eval {
        None => Ok(bg.eta_end()),
        Some(y) => {
            let x_end = -k_max * bg.eta_end();
            if !(y > x_end) {
                return Err(Error::InvalidParameter(format!(
                    "y_eval = {y} must exceed -k eta_end = {x_end:.3e} for the largest k"
                )));
            }
            Ok(bg.eta_at_ratio(Era::Radiation, k_max, y))
        }
    }
}

fn pick(component: Component, infl: f64, rad: f64) -> f64 {
    match component {
        Component::Total => infl + rad,
        Component::InflationSourced => infl,
        Component::RadiationSourced => rad,
    }
}

/// Power spectrum of `v` at conformal time `eta_eval` through `route`.
pub fn power_spectrum(
    k: f64,
    route: Route,
    cosmo: &CosmologyParams,
    csl: &CslParams,
    eta_eval: f64,
    opts: &SpectrumOptions,
) -> Result<SpectrumPoint> {
    let bg = Background::new(*cosmo);
    let c = Coupling::new(*cosmo, *csl, opts.bracket);
    let modes = Modes::new(bg, k, opts.rule);
    let era = bg.era_of(eta_eval);
    let x_ini = opts.x_ini.max(2.0 * -k * bg.eta_end());
    let schedule = EraSchedule {
        k,
        eta_ini: -x_ini / k,
        eta_final: eta_eval,
    };
    if !(eta_eval > schedule.eta_ini) {
        return Err(Error::InvalidParameter(format!(
            "evaluation time {eta_eval} precedes the initial time"
        )));
    }
    let norm = k.powi(3) / (2.0 * std::f64::consts::PI.powi(2));
    let g2 = modes.mode_norm2(era, eta_eval);
    let p_standard = norm * g2;
    let regime = regime_of(cosmo, csl.r_c, k);
    let mut point = SpectrumPoint {
        k,
        p_v: 0.0,
        p_standard,
        correction_rel: 0.0,
        correction_inflation: 0.0,
        correction_radiation: 0.0,
        r_value: 1.0,
        regime,
        route,
        p_v_stderr: None,
        clipped: false,
    };
    match route {
        Route::Lindblad => {
            let init = MomentState::bunch_davies(&modes, schedule.eta_ini);
            let mo = integrate_moments(&c, &modes, &init, &schedule, &[], &opts.moments)?;
            let s = mo.last();
            let om = integrate_omega(&c, &modes, &schedule, &[], &opts.omega)?;
            let q = om.last().q;
            point.correction_inflation = s.delta_inflation.p_vv / s.free_exact_vv;
            point.correction_radiation = s.delta_radiation.p_vv / s.free_exact_vv;
            point.r_value = 1.0 / (1.0 + q);
            // P_vv − 1/(4ReΩ) = |g⁰|² (ΔP_vv/|g⁰|² + q/(1 + q)), free of cancellation
            point.p_v = p_standard * (s.delta().p_vv / s.free_exact_vv + q / (1.0 + q));
        }
        Route::Sde => {
            let sum = run_ensemble(&c, &modes, &schedule, &[], &opts.ensemble)?;
            let p = sum.points.last().expect("one output");
            let var = p.mean_v2 - p.mean_v * p.mean_v;
            point.r_value = p.collapse_r;
            point.p_v_stderr = Some(norm * p.stderr_v2);
            if var < 0.0 {
                eprintln!("warning: negative sample variance {var:.3e} at k = {k:.6e} clipped to 0");
                point.clipped = true;
            }
            point.p_v = norm * var.max(0.0);
            // P_v/P_std = 1 + correction − R
            let corr = point.p_v / p_standard - 1.0 + point.r_value;
            point.correction_inflation = f64::NAN;
            point.correction_radiation = f64::NAN;
            point.correction_rel = corr;
            return Ok(point);
        }
        Route::ClosedForm => {
            let (stage, ln_q) = match era {
                Era::Inflation => (Stage::Inflation { x: -k * eta_eval }, f64::NEG_INFINITY),
                Era::Radiation => (Stage::Radiation, ln_collapse_closed_form(regime, cosmo, csl, k)),
            };
            let corr = ln_correction_coefficient(regime, stage, opts.form, cosmo, csl, k)?.exp();
            match era {
                Era::Inflation => point.correction_inflation = corr,
                Era::Radiation => point.correction_radiation = corr,
            }
            point.r_value = r_from_ln_q(ln_q);
            point.p_v = p_standard * (1.0 + corr - point.r_value);
        }
    }
    point.correction_rel = pick(opts.component, point.correction_inflation, point.correction_radiation);
    Ok(point)
}

/// Spectrum over a k-grid, all modes evaluated at the common time set by
/// the largest wavenumber.
pub fn spectrum(
    ks: &[f64],
    route: Route,
    cosmo: &CosmologyParams,
    csl: &CslParams,
    opts: &SpectrumOptions,
) -> Result<Vec<SpectrumPoint>> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("empty k-grid".into()));
    }
    let eta = evaluation_time(cosmo, ks, opts)?;
    ks.iter()
        .map(|&k| power_spectrum(k, route, cosmo, csl, eta, opts))
        .collect()
}

/// Collapse criterion from the Riccati route, `R = ReΩ|γ₌₀/ReΩ`.
pub fn collapse_r(
    k: f64,
    cosmo: &CosmologyParams,
    csl: &CslParams,
    eta_eval: f64,
    opts: &SpectrumOptions,
) -> Result<f64> {
    let bg = Background::new(*cosmo);
    let c = Coupling::new(*cosmo, *csl, opts.bracket);
    let modes = Modes::new(bg, k, opts.rule);
    let x_ini = opts.x_ini.max(2.0 * -k * bg.eta_end());
    let schedule = EraSchedule {
        k,
        eta_ini: -x_ini / k,
        eta_final: eta_eval,
    };
    let om = integrate_omega(&c, &modes, &schedule, &[], &opts.omega)?;
    let r = om.last().collapse_r();
    if !(r > 0.0 && r <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("collapse ratio R = {r} outside (0, 1]")));
    }
    Ok(r.min(1.0))
}

/// Log-log fit of a correction against `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub rms_residual: f64,
    pub regime: Regime,
    pub n_points: usize,
}

/// Fit `correction_rel ∝ k^n`. Requires at least five points spanning a
/// decade, all in one regime, with nonzero corrections of one sign.
pub fn fit_correction_index(points: &[SpectrumPoint]) -> Result<IndexFit> {
    if points.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 k-points, got {}", points.len())));
    }
    let regime = points[0].regime;
    if points.iter().any(|p| p.regime != regime) {
        return Err(Error::Fit(
            "k-grid mixes inflation-crossing and radiation-crossing modes".into(),
        ));
    }
    let (kmin, kmax) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.k), b.max(p.k)));
    if kmax / kmin < 10.0 * (1.0 - 1e-12) {
        return Err(Error::Fit(format!(
            "k-grid spans {:.3} decades, need at least 1",
            (kmax / kmin).log10()
        )));
    }
    let sign = points[0].correction_rel.signum();
    if points
        .iter()
        .any(|p| !(p.correction_rel.is_finite() && p.correction_rel != 0.0 && p.correction_rel.signum() == sign))
    {
        return Err(Error::Fit("corrections must be finite, nonzero and of one sign".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.k.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.correction_rel.abs().ln()).collect();
    let f = fit_line(&xs, &ys).ok_or_else(|| Error::Fit("degenerate k-grid".into()))?;
    Ok(IndexFit {
        exponent: f.slope,
        exponent_stderr: f.slope_stderr,
        rms_residual: f.rms_residual,
        regime,
        n_points: points.len(),
    })
}

/// Super-Hubble growth exponent of the collapse correction during
/// inflation: the slope of `ln|d(1/R − 1)/dN|` against `N = ln(aH/k)`
/// between `x_hi` and the end of inflation. Positive means each e-fold
/// adds more than the last, so the correction keeps building up on large
/// scales; negative means it freezes at its horizon-crossing value.
pub fn collapse_growth_index(
    k: f64,
    cosmo: &CosmologyParams,
    csl: &CslParams,
    x_hi: f64,
    n: usize,
    opts: &SpectrumOptions,
) -> Result<f64> {
    let bg = Background::new(*cosmo);
    let x_end = -k * bg.eta_end();
    if !(x_hi > 10.0 * x_end) || n < 3 {
        return Err(Error::InvalidParameter(format!(
            "growth window needs x_hi > 10 x_end = {:.3e} and at least 3 samples",
            10.0 * x_end
        )));
    }
    let c = Coupling::new(*cosmo, *csl, opts.bracket);
    let modes = Modes::new(bg, k, opts.rule);
    let schedule = EraSchedule {
        k,
        eta_ini: -opts.x_ini.max(2.0 * x_hi) / k,
        eta_final: bg.eta_end(),
    };
    let (l0, l1) = (x_hi.ln(), x_end.ln());
    let outs: Vec<f64> = (0..n)
        .map(|i| -(l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp() / k)
        .map(|e: f64| e.min(bg.eta_end()))
        .collect();
    let om = integrate_omega(&c, &modes, &schedule, &outs, &opts.omega)?;
    let ns: Vec<f64> = om.samples.iter().map(|s| -s.ratio.ln()).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = om
        .samples
        .windows(2)
        .zip(ns.windows(2))
        .map(|(s, n)| (0.5 * (n[0] + n[1]), ((s[1].q - s[0].q) / (n[1] - n[0])).abs().ln()))
        .unzip();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Fit(
            "collapse correction vanishes inside the growth window".into(),
        ));
    }
    fit_line(&xs, &ys)
        .map(|f| f.slope)
        .ok_or_else(|| Error::Fit("degenerate growth window".into()))
}

/// Observational anchors for report annotations (not fitted).
pub const LN_1E10_AS: f64 = 3.044;
pub const N_S: f64 = 0.9649;

#[cfg(test)]
mod tests {
    use super::*;

    fn cosmo(dn: f64) -> CosmologyParams {
        CosmologyParams::new(1e-5, 0.005, 0.0, -1e5, dn).unwrap()
    }

    #[test]
    fn bookkeeping_factor_is_exactly_three() {
        use coefficients::*;
        assert_eq!(
            inflation_crossing_supplement() / inflation_crossing_main(),
            Ratio::from_integer(3)
        );
        assert_eq!(
            radiation_crossing_supplement() / radiation_crossing_main(),
            Ratio::from_integer(3)
        );
        assert_eq!(
            radiation_crossing_main() / inflation_crossing_main(),
            Ratio::new(35408, 64064)
        );
    }

    #[test]
    fn main_and_supplement_forms_agree_after_transition() {
        let cm = cosmo(50.0);
        let k = cm.k_ref();
        for rc in [1e3, 1e30] {
            let csl = CslParams::new(1e-10, rc, 1.0, 0.0).unwrap();
            let reg = regime_of(&cm, rc, k);
            let a = ln_correction_coefficient(reg, Stage::Radiation, CoefficientForm::MainText, &cm, &csl, k).unwrap();
            let b =
                ln_correction_coefficient(reg, Stage::Radiation, CoefficientForm::Supplement, &cm, &csl, k).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_rule() {
        let cm = cosmo(50.0);
        let k = cm.k_ref();
        let rc_break = 50f64.exp() / cm.h_end();
        assert_eq!(regime_of(&cm, rc_break * 0.99, k), Regime::InflationCrossing);
        assert_eq!(regime_of(&cm, rc_break * 1.01, k), Regime::RadiationCrossing);
    }

    #[test]
    fn zero_gamma_gives_empty_spectrum_and_no_collapse() {
        let cm = cosmo(4.0);
        let csl = CslParams::new(0.0, 1e3, 1.0, 0.0).unwrap();
        let opts = SpectrumOptions::default();
        let k = cm.k_ref();
        let eta = evaluation_time(&cm, &[k], &opts).unwrap();
        for route in [Route::Lindblad, Route::ClosedForm] {
            let p = power_spectrum(k, route, &cm, &csl, eta, &opts).unwrap();
            assert_eq!(p.p_v, 0.0, "{route:?}");
            assert_eq!(p.r_value, 1.0);
        }
        assert_eq!(collapse_r(k, &cm, &csl, eta, &opts).unwrap(), 1.0);
    }

    #[test]
    fn fit_rejects_mixed_regimes_and_short_grids() {
        let mk = |k: f64, regime| SpectrumPoint {
            k,
            p_v: 1.0,
            p_standard: 1.0,
            correction_rel: k.powi(-3),
            correction_inflation: 0.0,
            correction_radiation: 0.0,
            r_value: 1.0,
            regime,
            route: Route::ClosedForm,
            p_v_stderr: None,
            clipped: false,
        };
        let ks: Vec<f64> = (0..6).map(|i| 10f64.powf(i as f64 / 5.0)).collect();
        let good: Vec<_> = ks.iter().map(|&k| mk(k, Regime::InflationCrossing)).collect();
        let f = fit_correction_index(&good).unwrap();
        assert!((f.exponent + 3.0).abs() < 1e-12);
        let mut mixed = good.clone();
        mixed[5].regime = Regime::RadiationCrossing;
        assert!(matches!(fit_correction_index(&mixed), Err(Error::Fit(_))));
        assert!(fit_correction_index(&good[..4]).is_err());
        let narrow: Vec<_> = ks.iter().map(|&k| mk(k.sqrt(), Regime::InflationCrossing)).collect();
        assert!(fit_correction_index(&narrow).is_err());
    }

    #[test]
    fn closed_form_exponents() {
        let cm = cosmo(15.0);
        let opts = SpectrumOptions::default();
        for (rc, want) in [(1e7, -1.0), (1e13, -10.0)] {
            let csl = CslParams::new(1e-3, rc, 1.0, 0.0).unwrap();
            let ks: Vec<f64> = (0..6).map(|i| cm.k_ref() * 10f64.powf(i as f64 / 5.0)).collect();
            let pts = spectrum(&ks, Route::ClosedForm, &cm, &csl, &opts).unwrap();
            let f = fit_correction_index(&pts).unwrap();
            assert!((f.exponent - want).abs() < 1e-9, "{rc}: {}", f.exponent);
        }
    }

    #[test]
    fn collapse_closed_form_r_is_stable_at_large_arguments() {
        assert_eq!(r_from_ln_q(f64::NEG_INFINITY), 1.0);
        assert!(r_from_ln_q(800.0) > 0.0);
        assert!((r_from_ln_q(0.0) - 0.5).abs() < 1e-15);
    }
}
