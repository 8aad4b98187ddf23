//! Source of the third-order equation for `P_vv`,
//! `S = γ̂ [2a⁴(α² + ω²β²) − 2(a⁴αβ)′ + (a⁴β²)″]`, evaluated with exact
//! derivatives, plus closed forms for both eras (`p = 0`).

use serde::{Deserialize, Serialize};

use crate::background::{Background, CosmologyParams, Era};
use crate::coupling::{Coupling, CslParams};
use crate::error::{Error, Result};
use crate::jet::{Jet, Real};

/// Which closed-form bracket to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedForm {
    /// The bracket obtained by expanding the source exactly; equals
    /// [`source_s`] to rounding.
    #[default]
    Complete,
    /// The bracket as it is usually quoted in the literature. It differs
    /// from the exact expansion in sub-leading terms only (see the README).
    AsPrinted,
}

/// `a⁴α²`, `a⁴β²` and the two derivative terms of the source at `eta`,
/// all without the `γ̂` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTerms {
    pub a4_alpha2: f64,
    pub a4_omega2_beta2: f64,
    /// `(a⁴αβ)′`
    pub d_a4_alpha_beta: f64,
    /// `(a⁴β²)″`
    pub dd_a4_beta2: f64,
}

impl SourceTerms {
    pub fn combine(&self) -> f64 {
        2.0 * (self.a4_alpha2 + self.a4_omega2_beta2) - 2.0 * self.d_a4_alpha_beta + self.dd_a4_beta2
    }
}

pub fn source_terms(c: &Coupling, era: Era, k: f64, eta: f64) -> SourceTerms {
    let t = Jet::var(eta);
    let (al, be) = c.alpha_beta_g(era, k, t);
    let a4 = c.bg.scale_factor_g(era, t).powi(4);
    let w2 = c.bg.omega2_g(era, k, eta);
    let ab = a4 * al * be;
    let bb = a4 * be * be;
    SourceTerms {
        a4_alpha2: a4.v * al.v * al.v,
        a4_omega2_beta2: w2 * bb.v,
        d_a4_alpha_beta: ab.d1,
        dd_a4_beta2: bb.d2,
    }
}

/// Source `S(η)` for the coupling `c` (including its `p` index).
pub fn source_s(c: &Coupling, era: Era, k: f64, eta: f64) -> f64 {
    let gh = c.csl.gamma_hat();
    if gh == 0.0 {
        return 0.0;
    }
    gh * source_terms(c, era, k, eta).combine()
}

fn require_p0(csl: &CslParams) -> Result<()> {
    if csl.p_index != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "closed-form sources are defined for p = 0, got p = {}",
            csl.p_index
        )));
    }
    Ok(())
}

/// Inflationary bracket in `L = k/(aH)` and `R = k r_c/a`.
pub fn inflation_bracket(l: f64, r: f64, e1: f64, e2: f64, form: ClosedForm) -> f64 {
    let l2 = l * l;
    let r2 = r * r;
    let r4 = r2 * r2;
    match form {
        ClosedForm::Complete => {
            let c6 = 1.0;
            let c4 = 2.0 * r4 + r2 * e2 + 7.0 * r2 - 6.0 * e1 + e2 * e2 / 4.0 + 4.5 * e2 + 18.0;
            let c2 = -12.0 * r4 * e1 - 6.0 * r2 * e1 * e2 - 48.0 * r2 * e1 + 9.0 * e1 * e1
                - 1.5 * e1 * e2 * e2
                - 24.0 * e1 * e2
                - 75.0 * e1;
            let c0 = e1 * e1 * (18.0 * r4 + r2 * (9.0 * e2 + 81.0) + 2.25 * e2 * e2 + 31.5 * e2 + 126.0);
            ((c6 * l2 + c4) * l2 + c2) * l2 + c0
        }
        ClosedForm::AsPrinted => {
            126.0 * e1 * e1 - 75.0 * e1 * l2 + 81.0 * e1 * e1 * r2 + 18.0 * l2 * l2 - 48.0 * e1 * l2 * r2
                + 18.0 * e1 * e1 * r4
                + l2 * l2 * l2
                + 7.0 * l2 * l2 * r2
                - 12.0 * l2 * r4
                + 2.0 * l2 * l2 * r4
        }
    }
}

/// Radiation bracket in `L = k/(aH)`, `u = (a_end/a)(r_c/λ)_end = k r_c/a`.
pub fn radiation_bracket(l: f64, u: f64, q: f64, form: ClosedForm) -> f64 {
    let l2 = l * l;
    let u2 = u * u;
    let u4 = u2 * u2;
    let common = 3024.0 - 414.0 * l2 + l2 * l2 * l2 - 1836.0 * u2 + 216.0 * u4 - 72.0 * u4 * l2 + 432.0 * u2 * l2
        - 21.0 * u2 * l2 * l2;
    match form {
        ClosedForm::Complete => common + 6.0 * u4 * l2 * l2,
        // the quoted term is 6 (a_end/a)² L² (r_c/λ)_end⁴
        ClosedForm::AsPrinted => {
            let re = u / q;
            common + 6.0 * q * q * l2 * re.powi(4)
        }
    }
}

/// Closed-form inflationary source (`p = 0`). `Complete` keeps `ε₂`; set
/// `ε₂ = 0` to compare with the leading-order couplings.
pub fn source_inflation_closed(
    k: f64,
    eta: f64,
    cosmo: &CosmologyParams,
    csl: &CslParams,
    form: ClosedForm,
) -> Result<f64> {
    require_p0(csl)?;
    let bg = Background::new(*cosmo);
    let a = bg.scale_factor(Era::Inflation, eta)?;
    let h = cosmo.h_inf;
    let l = -k * eta;
    let r = k * csl.r_c / a;
    let br = inflation_bracket(l, r, cosmo.epsilon1, cosmo.epsilon2, form);
    Ok(4.0 * csl.gamma_hat() * cosmo.epsilon1 * h * h * k * k * (-r * r).exp() * l.powi(-6) * br)
}

/// Closed-form radiation-era source (`p = 0`).
pub fn source_radiation_closed(
    k: f64,
    eta: f64,
    cosmo: &CosmologyParams,
    csl: &CslParams,
    form: ClosedForm,
) -> Result<f64> {
    require_p0(csl)?;
    let bg = Background::new(*cosmo);
    let a = bg.scale_factor(Era::Radiation, eta)?;
    let a_end = bg.scale_factor(Era::Radiation, bg.eta_end())?;
    let h_end = cosmo.h_end();
    let l = bg.horizon_ratio(Era::Radiation, k, eta);
    let q = a_end / a;
    let u = k * csl.r_c / a;
    let br = radiation_bracket(l, u, q, form);
    Ok(8.0 * csl.gamma_hat() * h_end * h_end * k * k * (-u * u).exp() * q.powi(4) * l.powi(-6) * br)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Bracket;

    fn cosmo(e2: f64) -> CosmologyParams {
        CosmologyParams::new(1e-5, 0.005, e2, -1e5, 15.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn vanishes_without_collapse() {
        let c = Coupling::new(cosmo(0.0), CslParams::new(0.0, 1e6, 1.0, 0.0).unwrap(), Bracket::Full);
        assert_eq!(source_s(&c, Era::Inflation, 1e-5, -2e5), 0.0);
    }

    #[test]
    fn inflation_complete_form_matches_generic_source() {
        for &e2 in &[0.0, 0.03] {
            let cm = cosmo(e2);
            let csl = CslParams::new(1e3, 3e5, 1.0, 0.0).unwrap();
            let c = Coupling::new(cm, csl, Bracket::Full);
            let k = 1e-8;
            for &x in &[50.0, 3.0, 0.7, 0.05, 2e-3] {
                let eta = -x / k;
                let s = source_s(&c, Era::Inflation, k, eta);
                let cf = source_inflation_closed(k, eta, &cm, &csl, ClosedForm::Complete).unwrap();
                assert!(rel(cf, s) < 1e-8, "x={x} e2={e2}: {cf} vs {s}");
            }
        }
    }

    #[test]
    fn radiation_complete_form_matches_generic_source() {
        let cm = cosmo(0.0);
        let csl = CslParams::new(1e3, 2e5, 1.0, 0.0).unwrap();
        let c = Coupling::new(cm, csl, Bracket::Leading);
        let bg = Background::new(cm);
        let k = 2e-6;
        for &y in &[0.21, 0.5, 2.0, 9.0] {
            let eta = bg.eta_at_ratio(Era::Radiation, k, y);
            let s = source_s(&c, Era::Radiation, k, eta);
            let cf = source_radiation_closed(k, eta, &cm, &csl, ClosedForm::Complete).unwrap();
            assert!(rel(cf, s) < 1e-8, "y={y}: {cf} vs {s}");
        }
    }

    #[test]
    fn brackets_reduce_to_leading_constants() {
        let e1 = 0.005;
        assert!(
            rel(
                inflation_bracket(1e-9, 1e-9, e1, 0.0, ClosedForm::AsPrinted),
                126.0 * e1 * e1
            ) < 1e-12
        );
        assert!(
            rel(
                inflation_bracket(1e-9, 1e-9, e1, 0.0, ClosedForm::Complete),
                126.0 * e1 * e1
            ) < 1e-12
        );
        assert!(rel(radiation_bracket(1e-9, 1e-9, 0.5, ClosedForm::AsPrinted), 3024.0) < 1e-12);
        // at r_c-crossing the three u-only terms combine to 3024 − 1836 + 216
        assert!(rel(radiation_bracket(1e-9, 1.0, 0.5, ClosedForm::Complete), 1404.0) < 1e-12);
    }

    #[test]
    fn derivative_terms_match_finite_differences() {
        let cm = cosmo(0.01);
        let csl = CslParams::new(1.0, 4e5, 1.0, 1.0).unwrap();
        let c = Coupling::new(cm, csl, Bracket::Full);
        let k = 1e-5;
        for &(era, eta) in &[(Era::Inflation, -0.8e5 * 1.7), (Era::Radiation, 3.3e5)] {
            let st = source_terms(&c, era, k, eta);
            let f = |t: f64| {
                let (al, be) = c.alpha_beta_g(era, k, t);
                let a4 = c.bg.scale_factor_g(era, t).powi(4);
                (a4 * al * be, a4 * be * be)
            };
            let fd = |h: f64| {
                let (ap, bp) = f(eta + h);
                let (am, bm) = f(eta - h);
                let (_, b0) = f(eta);
                -2.0 * (ap - am) / (2.0 * h) + (bp - 2.0 * b0 + bm) / (h * h)
            };
            let an = -2.0 * st.d_a4_alpha_beta + st.dd_a4_beta2;
            let mut errs = Vec::new();
            for &h in &[80.0, 40.0, 20.0] {
                // one Richardson step removes the O(h²) error
                errs.push(rel((4.0 * fd(h / 2.0) - fd(h)) / 3.0, an));
            }
            assert!(errs.iter().all(|&e| e < 1e-6), "{era:?}: {errs:?}");
        }
    }
}
