//! Deterministic evolution of the Gaussian width `Ω` under the Riccati
//! equation
//!
//! `Ω′ = −2(i + 2b)Ω² + 4iγ̂a⁴αβ Ω + γ̂a⁴α² + iω²/2`, `b = γ̂a⁴β²`,
//!
//! with two backends (exact deviation from the free solution, and the
//! linear second-order equation for `g`), and the first-order solution in
//! `γ` obtained by Green-function quadrature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::{Era, EraSchedule};
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::jet::{Jet, Real};
use crate::modes::Modes;
use crate::ode::{self, OdeOptions, OdeStats};
use crate::quad::{self, QuadOptions};
use crate::source::source_terms;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Right-hand side of the Riccati equation for a given `Ω`.
pub fn riccati_rhs(c: &Coupling, era: Era, k: f64, eta: f64, omega: Complex64) -> Complex64 {
    let bg = &c.bg;
    let gh = c.csl.gamma_hat();
    let (al, be) = c.alpha_beta_g(era, k, eta);
    let a4 = bg.scale_factor_g(era, eta).powi(4);
    let w2 = bg.omega2_g(era, k, eta);
    let b = gh * a4 * be * be;
    -2.0 * (I + 2.0 * b) * omega * omega + 4.0 * I * gh * a4 * al * be * omega + gh * a4 * al * al + I * (0.5 * w2)
}

/// Derivative of the exact deviation `(q, J)` defined by
/// `Ω = Ω₀ + ReΩ₀·q + iJ`, so that `ReΩ/ReΩ₀ = 1 + q`.
pub fn deviation_rhs(c: &Coupling, modes: &Modes, era: Era, eta: f64, q: f64, j: f64) -> (f64, f64) {
    let bg = &c.bg;
    let k = modes.k;
    let gh = c.csl.gamma_hat();
    let o0 = modes.omega0(era, eta);
    let (r0, i0) = (o0.re, o0.im);
    if gh == 0.0 {
        let dq = 4.0 * j * (1.0 + q);
        let dj = 4.0 * i0 * j + 2.0 * j * j - 2.0 * r0 * r0 * q * (2.0 + q);
        return (dq, dj);
    }
    let (_, be) = c.alpha_beta_g(era, k, eta);
    let a4 = bg.scale_factor_g(era, eta).powi(4);
    let d = modes.drive(c, era, eta) - 2.0 * be * j;
    let ga = gh * a4;
    let dq = 4.0 * j * (1.0 + q) + ga * d * d / r0 - 4.0 * ga * be * be * r0 * (1.0 + q) * (1.0 + q);
    let dj = 4.0 * i0 * j + 2.0 * j * j - 2.0 * r0 * r0 * q * (2.0 + q) + 4.0 * ga * be * r0 * (1.0 + q) * d;
    (dq, dj)
}

/// Coefficients of the linearised form `g″ + (−C₁′/2 − C₁²/4 + C₂) g = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedCoeffs {
    pub c1: Complex64,
    pub c1_prime: Complex64,
    pub c2: Complex64,
    /// `−C₁′/2 − C₁²/4 + C₂ − ω²`, with `C₂ − ω²` expanded analytically.
    pub delta_omega_sq: Complex64,
    /// `b = γ̂a⁴β²`
    pub b: f64,
}

pub fn linearized_coeffs(c: &Coupling, era: Era, k: f64, eta: f64) -> LinearizedCoeffs {
    let bg = &c.bg;
    let gh = c.csl.gamma_hat();
    let w2 = bg.omega2_g(era, k, eta);
    let t = Jet::var(eta);
    let (al, be) = c.alpha_beta_g(era, k, t);
    let a4 = bg.scale_factor_g(era, t).powi(4);
    let ab = a4 * al * be;
    let bb = a4 * be * be;
    let aa = a4.v * al.v * al.v;
    // C₁ = −2iγ̂ [2 a⁴αβ − (a⁴β²)′/u],  u = 1 − 2iγ̂ a⁴β²
    let u = Complex64::new(1.0, -2.0 * gh * bb.v);
    let du = Complex64::new(0.0, -2.0 * gh * bb.d1);
    let inner = 2.0 * ab.v - bb.d1 / u;
    let d_inner = 2.0 * ab.d1 - bb.d2 / u + bb.d1 * du / (u * u);
    let c1 = -2.0 * I * gh * inner;
    let c1_prime = -2.0 * I * gh * d_inner;
    let c2 = u * Complex64::new(w2, -2.0 * gh * aa);
    let c2_minus_w2 = -2.0 * I * gh * (bb.v * w2 + aa) - 4.0 * gh * gh * bb.v * aa;
    let delta_omega_sq = -0.5 * c1_prime - 0.25 * c1 * c1 + c2_minus_w2;
    LinearizedCoeffs {
        c1,
        c1_prime,
        c2,
        delta_omega_sq,
        b: gh * bb.v,
    }
}

/// Which representation integrates `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaBackend {
    /// Exact nonlinear equation for the deviation from the free width.
    #[default]
    Direct,
    /// Linear equation for `g`, `Ω = (g′/g − C₁/2)/(2(i + 2b))`.
    Linearized,
}

#[derive(Debug, Clone, Copy)]
pub struct OmegaOptions {
    pub ode: OdeOptions,
    pub backend: OmegaBackend,
    /// The linearised backend hands over to the direct one when `|g|`
    /// drops below this fraction of its running maximum.
    pub pole_threshold: f64,
    /// Pole monitoring checkpoints per unit of log-time.
    pub checkpoints_per_efold: usize,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        OmegaOptions {
            ode: OdeOptions {
                rtol: 1e-11,
                atol: 1e-300,
                running_floor: 1e-8,
                ..OdeOptions::default()
            },
            backend: OmegaBackend::Direct,
            pole_threshold: 1e-3,
            checkpoints_per_efold: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaSample {
    pub eta: f64,
    pub era: Era,
    pub ratio: f64,
    pub omega: Complex64,
    pub omega0: Complex64,
    /// `ReΩ/ReΩ₀ − 1`, i.e. `1/R − 1`.
    pub q: f64,
    /// `ImΩ − ImΩ₀`.
    pub j: f64,
}

impl OmegaSample {
    fn from_deviation(modes: &Modes, era: Era, eta: f64, q: f64, j: f64) -> Self {
        let o0 = modes.omega0(era, eta);
        OmegaSample {
            eta,
            era,
            ratio: modes.ratio(era, eta),
            omega: Complex64::new(o0.re * (1.0 + q), o0.im + j),
            omega0: o0,
            q,
            j,
        }
    }

    /// Collapse criterion `R = ReΩ₀/ReΩ`.
    pub fn collapse_r(&self) -> f64 {
        1.0 / (1.0 + self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEvent {
    pub eta: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct OmegaTrajectory {
    pub samples: Vec<OmegaSample>,
    pub events: Vec<BackendEvent>,
    pub stats: OdeStats,
}

impl OmegaTrajectory {
    pub fn last(&self) -> &OmegaSample {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

fn add_stats(a: &mut OdeStats, b: OdeStats) {
    a.accepted += b.accepted;
    a.rejected += b.rejected;
}

/// Integrate `Ω` from its Bunch–Davies value at `schedule.eta_ini`.
/// Samples are taken at `outputs` (sorted; the final time if empty).
pub fn integrate_omega(
    c: &Coupling,
    modes: &Modes,
    schedule: &EraSchedule,
    outputs: &[f64],
    opts: &OmegaOptions,
) -> Result<OmegaTrajectory> {
    let bg = &c.bg;
    let k = modes.k;
    let default_out = [schedule.eta_final];
    let outputs = if outputs.is_empty() { &default_out[..] } else { outputs };
    let mut prev = schedule.eta_ini;
    for &e in outputs {
        if !(e >= prev) || e > schedule.eta_final {
            return Err(Error::InvalidParameter(format!(
                "output time {e} out of order or range"
            )));
        }
        prev = e;
    }
    let mut stats = OdeStats::default();
    let mut events = Vec::new();
    let mut samples = Vec::with_capacity(outputs.len());
    let (mut q, mut j) = (0.0, 0.0);

    for seg in schedule.segments(bg) {
        let era = seg.era;
        if era == Era::Radiation {
            // the deviation maps as δΩ → δΩ/r²; ReΩ₀ scales the same way
            j /= modes.r * modes.r;
        }
        let seg_out: Vec<f64> = outputs
            .iter()
            .copied()
            .filter(|&e| match era {
                Era::Inflation => e <= seg.eta_stop,
                Era::Radiation => e > seg.eta_start && e <= seg.eta_stop,
            })
            .collect();
        let t0 = bg.log_time(era, k, seg.eta_start);
        let t_stop = bg.log_time(era, k, seg.eta_stop);
        let mut t_out: Vec<f64> = seg_out.iter().map(|&e| bg.log_time(era, k, e).max(t0)).collect();
        t_out.push(t_stop);

        let mut t_start = t0;
        let mut direct_from = 0usize;
        if opts.backend == OmegaBackend::Linearized {
            let lin = linearized_segment(c, modes, era, t0, t_stop, &t_out, (q, j), opts)?;
            add_stats(&mut stats, lin.stats);
            for (idx, &(qq, jj)) in lin.values.iter().enumerate() {
                if idx < seg_out.len() {
                    samples.push(OmegaSample::from_deviation(modes, era, seg_out[idx], qq, jj));
                }
            }
            direct_from = lin.values.len();
            match lin.handover {
                None => {
                    let &(qq, jj) = lin.values.last().expect("segment endpoint");
                    q = qq;
                    j = jj;
                    continue;
                }
                Some((t_h, qq, jj)) => {
                    events.push(BackendEvent {
                        eta: bg.eta_of_log_time(era, k, t_h),
                        message: "g approaches zero (Riccati pole); switching to the direct backend".into(),
                    });
                    t_start = t_h;
                    q = qq;
                    j = jj;
                }
            }
        }
        let f = |t: f64, y: &[f64], dy: &mut [f64]| {
            let eta = bg.eta_of_log_time(era, k, t);
            let d = bg.deta_dlog_time(era, k, t);
            let (dq, dj) = deviation_rhs(c, modes, era, eta, y[0], y[1]);
            dy[0] = d * dq;
            dy[1] = d * dj;
        };
        let rest: Vec<f64> = t_out[direct_from..].to_vec();
        let (ys, st) = ode::solve(f, t_start, &[q, j], &rest, &opts.ode)?;
        add_stats(&mut stats, st);
        for (i, y) in ys.iter().enumerate() {
            let idx = direct_from + i;
            if idx < seg_out.len() {
                samples.push(OmegaSample::from_deviation(modes, era, seg_out[idx], y[0], y[1]));
            }
        }
        let y = ys.last().expect("segment endpoint");
        q = y[0];
        j = y[1];
    }
    Ok(OmegaTrajectory { samples, events, stats })
}

struct LinearizedRun {
    /// `(q, J)` at the output times reached before any handover.
    values: Vec<(f64, f64)>,
    /// Log-time and `(q, J)` at which the direct backend takes over.
    handover: Option<(f64, f64, f64)>,
    stats: OdeStats,
}

fn omega_from_g(c: &Coupling, era: Era, k: f64, eta: f64, g: Complex64, gp: Complex64) -> Complex64 {
    let lc = linearized_coeffs(c, era, k, eta);
    (gp / g - 0.5 * lc.c1) / (2.0 * (I + 2.0 * lc.b))
}

#[allow(clippy::too_many_arguments)]
fn linearized_segment(
    c: &Coupling,
    modes: &Modes,
    era: Era,
    t0: f64,
    t_stop: f64,
    t_out: &[f64],
    start: (f64, f64),
    opts: &OmegaOptions,
) -> Result<LinearizedRun> {
    let bg = &c.bg;
    let k = modes.k;
    let eta0 = bg.eta_of_log_time(era, k, t0);
    let o0 = modes.omega0(era, eta0);
    let omega = Complex64::new(o0.re * (1.0 + start.0), o0.im + start.1);
    let lc = linearized_coeffs(c, era, k, eta0);
    // g is defined up to normalisation; start from g = 1
    // state (g, g′/k): both components start at order one
    let gp = (2.0 * (I + 2.0 * lc.b) * omega + 0.5 * lc.c1) / k;
    let mut y = vec![1.0, 0.0, gp.re, gp.im];
    let f = |t: f64, s: &[f64], ds: &mut [f64]| {
        let eta = bg.eta_of_log_time(era, k, t);
        let d = bg.deta_dlog_time(era, k, t);
        let lc = linearized_coeffs(c, era, k, eta);
        let w = bg.omega2_g(era, k, eta) + lc.delta_omega_sq;
        let g = Complex64::new(s[0], s[1]);
        let acc = -w * g / k;
        ds[0] = d * k * s[2];
        ds[1] = d * k * s[3];
        ds[2] = d * acc.re;
        ds[3] = d * acc.im;
    };
    let ode_opts = OdeOptions {
        atol: opts.ode.rtol * 1e-2,
        ..opts.ode
    };
    // checkpoints for pole monitoring, merged with the requested outputs
    let n = ((t_stop - t0) * opts.checkpoints_per_efold as f64).ceil().max(1.0) as usize;
    let mut grid: Vec<(f64, Option<usize>)> = (1..=n)
        .map(|i| (t0 + (t_stop - t0) * i as f64 / n as f64, None))
        .collect();
    grid.extend(t_out.iter().enumerate().map(|(i, &t)| (t, Some(i))));
    grid.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.is_none().cmp(&b.1.is_none())));
    let mut stats = OdeStats::default();
    let mut values = Vec::new();
    let mut t = t0;
    let mut gmax: f64 = 1.0;
    let mut last = (t0, start.0, start.1);
    for (tn, out_idx) in grid {
        let (ys, st) = ode::solve(f, t, &y, &[tn], &ode_opts)?;
        add_stats(&mut stats, st);
        y = ys.into_iter().next().expect("one output");
        t = tn;
        let g = Complex64::new(y[0], y[1]);
        let gp = Complex64::new(y[2], y[3]) * k;
        let eta = bg.eta_of_log_time(era, k, t);
        let om = omega_from_g(c, era, k, eta, g, gp);
        let o0 = modes.omega0(era, eta);
        let qj = (om.re / o0.re - 1.0, om.im - o0.im);
        if g.norm() < opts.pole_threshold * gmax {
            return Ok(LinearizedRun {
                values,
                handover: Some(last),
                stats,
            });
        }
        gmax = gmax.max(g.norm());
        last = (t, qj.0, qj.1);
        if out_idx.is_some() {
            values.push(qj);
        }
    }
    Ok(LinearizedRun {
        values,
        handover: None,
        stats,
    })
}

/// Which integrand the first-order width is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FirstOrderForm {
    /// `δΩ₁ = (g⁰)⁻² ∫ a⁴(αg⁰ + βg⁰′)² dη̄`: every term is sign-definite on
    /// super-Hubble scales, so the result carries full relative precision.
    #[default]
    Coupling,
    /// `h = i∫G Ŝ g⁰ dη̄` with the local terms `2a⁴αβ − (a⁴β²)′` and
    /// `2a⁴β²`. Equal to `Coupling` after an integration by parts, but the
    /// real part of `Ω₁` then emerges from a cancellation between terms
    /// that can be many orders of magnitude larger (super-Hubble radiation
    /// era in particular).
    Source,
}

/// First-order (in `γ`) width `Ω = Ω₀ + γ̂Ω₁` from the perturbative
/// solution `g = g⁰ + γ̂h`, `h″ + ω²h = iŜg⁰` (`Ŝ = S/γ̂`), for which
/// `Ω₁ = Ω₀[−(h/g⁰ − h′/g⁰′) + i(g⁰/g⁰′)(2a⁴αβ − (a⁴β²)′) + 2ia⁴β²]`.
///
/// Only `W = hg⁰′ − h′g⁰` enters, with `W′ = −iŜ(g⁰)²`, so both forms reduce
/// to one quadrature of an integrand weighted by `(g⁰(η̄)/g⁰(η))²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeOmega {
    pub eta: f64,
    pub omega0: Complex64,
    /// First-order coefficient: `Ω = Ω₀ + γ̂ Ω₁`.
    pub omega1: Complex64,
    pub gamma_hat: f64,
}

impl PerturbativeOmega {
    pub fn omega(&self) -> Complex64 {
        self.omega0 + self.gamma_hat * self.omega1
    }

    /// First-order `1/R − 1 = γ̂ ReΩ₁/ReΩ₀`.
    pub fn q(&self) -> f64 {
        self.gamma_hat * self.omega1.re / self.omega0.re
    }
}

/// Unit-strength (`γ̂ = 1`) coefficients used by the source form.
struct UnitTerms {
    /// `2a⁴αβ − (a⁴β²)′`
    t: f64,
    /// `a⁴β²`
    b: f64,
}

fn unit_terms(c: &Coupling, era: Era, k: f64, eta: f64) -> UnitTerms {
    let t = Jet::var(eta);
    let (al, be) = c.alpha_beta_g(era, k, t);
    let a4 = c.bg.scale_factor_g(era, t).powi(4);
    let ab = a4 * al * be;
    let bb = a4 * be * be;
    UnitTerms {
        t: 2.0 * ab.v - bb.d1,
        b: bb.v,
    }
}

/// Local part of the source form: `Ω₁ = iV/2 + local`, `V = W/(g⁰)²`.
fn source_local(c: &Coupling, modes: &Modes, era: Era, eta: f64) -> Complex64 {
    let u = unit_terms(c, era, modes.k, eta);
    0.5 * u.t + 2.0 * I * u.b * modes.omega0(era, eta)
}

fn quad_breaks(c: &Coupling, era: Era, k: f64, start: f64, stop: f64) -> Vec<f64> {
    let bg = &c.bg;
    let (tl, th) = (bg.log_time(era, k, start), bg.log_time(era, k, stop));
    let mut b = vec![tl, th, 0.0];
    if let Some(e) = bg.smearing_crossing(era, k, c.csl.r_c) {
        b.push(bg.log_time(era, k, e));
    }
    let mut t = tl.ceil();
    while t < th {
        b.push(t);
        t += 1.0;
    }
    b.retain(|&t| t >= tl && t <= th);
    b.sort_by(|a, b| a.partial_cmp(b).unwrap());
    b.dedup();
    b
}

pub fn perturbative_omega(
    c: &Coupling,
    modes: &Modes,
    eta_ini: f64,
    eta: f64,
    form: FirstOrderForm,
    opts: &QuadOptions,
) -> Result<PerturbativeOmega> {
    let bg = &c.bg;
    let k = modes.k;
    if !(eta >= eta_ini) {
        return Err(Error::InvalidParameter(format!(
            "eta = {eta} precedes eta_ini = {eta_ini}"
        )));
    }
    let era_out = bg.era_of(eta);
    let unit = c.with_gamma_hat(1.0);

    // Ω₁ vanishes at eta_ini
    let mut omega1 = Complex64::new(0.0, 0.0);
    let mut start = eta_ini;
    for era in [Era::Inflation, Era::Radiation] {
        let stop = match era {
            Era::Inflation => eta.min(bg.eta_end()),
            Era::Radiation => {
                if era_out == Era::Inflation {
                    break;
                }
                eta
            }
        };
        if era == Era::Radiation {
            // δΩ → δΩ/r² across the transition
            omega1 /= modes.r * modes.r;
            start = bg.eta_end();
        }
        if !(stop > start) {
            continue;
        }
        let g_stop = modes.free_mode(era, stop).g0;
        let g_start = modes.free_mode(era, start).g0;
        let carry = (g_start / g_stop).powi(2);
        let breaks = quad_breaks(c, era, k, start, stop);
        match form {
            FirstOrderForm::Coupling => {
                let integrand = |t: f64, out: &mut [f64]| {
                    let eb = bg.eta_of_log_time(era, k, t);
                    let d = bg.deta_dlog_time(era, k, t);
                    let (_, be) = unit.alpha_beta_g(era, k, eb);
                    let a2 = bg.scale_factor_g(era, eb).powi(2);
                    let r0 = modes.omega0(era, eb).re;
                    // αg⁰ + βg⁰′ = g⁰(α − 2βImΩ₀ + 2iβReΩ₀)
                    let f = a2 * Complex64::new(modes.drive(&unit, era, eb), 2.0 * be * r0);
                    let ratio = modes.free_mode(era, eb).g0 / g_stop;
                    let w = (ratio * f).powi(2) * d;
                    out[0] = w.re;
                    out[1] = w.im;
                };
                let iv = quad::integrate(integrand, &breaks, 2, opts)?;
                omega1 = carry * omega1 + Complex64::new(iv[0], iv[1]);
            }
            FirstOrderForm::Source => {
                let v0 = -2.0 * I * (omega1 - source_local(&unit, modes, era, start));
                let integrand = |t: f64, out: &mut [f64]| {
                    let eb = bg.eta_of_log_time(era, k, t);
                    let d = bg.deta_dlog_time(era, k, t);
                    let s = source_terms(&unit, era, k, eb).combine();
                    let ratio = modes.free_mode(era, eb).g0 / g_stop;
                    let w = ratio * ratio * (s * d);
                    out[0] = w.re;
                    out[1] = w.im;
                };
                let iv = quad::integrate(integrand, &breaks, 2, opts)?;
                let v = carry * v0 - I * Complex64::new(iv[0], iv[1]);
                omega1 = 0.5 * I * v + source_local(&unit, modes, era, stop);
            }
        }
        start = stop;
    }
    let o0 = modes.omega0(era_out, eta);
    Ok(PerturbativeOmega {
        eta,
        omega0: o0,
        omega1,
        gamma_hat: c.csl.gamma_hat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{Background, CosmologyParams};
    use crate::coupling::{Bracket, CslParams};
    use crate::modes::MatchingRule;
    use crate::source::source_s;

    fn setup(gamma: f64, r_c: f64, dn: f64) -> (Coupling, Modes) {
        let cm = CosmologyParams::new(1e-5, 0.005, 0.0, -1e5, dn).unwrap();
        let c = Coupling::new(cm, CslParams::new(gamma, r_c, 1.0, 0.0).unwrap(), Bracket::Full);
        let m = Modes::new(Background::new(cm), cm.k_ref(), MatchingRule::CurvatureContinuous);
        (c, m)
    }

    #[test]
    fn free_width_solves_riccati_equation() {
        let (c, m) = setup(0.0, 1e3, 5.0);
        for &(era, eta) in &[
            (Era::Inflation, -3e6_f64),
            (Era::Inflation, -1.2e5),
            (Era::Radiation, 4e5),
        ] {
            let h = 1e-4 * eta.abs();
            let d = (m.omega0(era, eta + h) - m.omega0(era, eta - h)) / (2.0 * h);
            let r = riccati_rhs(&c, era, m.k, eta, m.omega0(era, eta));
            assert!((d - r).norm() < 1e-6 * r.norm().max(1e-30), "{era:?} {d} {r}");
        }
    }

    #[test]
    fn deviation_form_matches_riccati_equation() {
        let (c, m) = setup(1e6, 3e4, 6.0);
        let (era, eta) = (Era::Inflation, -4e5);
        let (q, j) = (0.3, -2e-7);
        let o0 = m.omega0(era, eta);
        let om = Complex64::new(o0.re * (1.0 + q), o0.im + j);
        let full = riccati_rhs(&c, era, m.k, eta, om);
        let free = riccati_rhs(&c.with_gamma_hat(0.0), era, m.k, eta, o0);
        let (dq, dj) = deviation_rhs(&c, &m, era, eta, q, j);
        // d(ReΩ) = ReΩ₀′ q + ReΩ₀ q′
        let re = free.re * q + o0.re * dq;
        assert!((full.re - free.re - re).abs() < 1e-9 * full.re.abs());
        assert!((full.im - free.im - dj).abs() < 1e-9 * full.im.abs());
    }

    #[test]
    fn delta_omega_sq_is_minus_i_source_at_first_order() {
        let (c, m) = setup(1.0, 3e4, 6.0);
        let eta = -2e5;
        let mut prev: Option<f64> = None;
        // keep γ̂a⁴β² ≪ 1 so the expansion in γ̂ is meaningful
        for &g in &[1e3, 1e4, 1e5] {
            let cg = c.with_gamma_hat(g);
            let lc = linearized_coeffs(&cg, Era::Inflation, m.k, eta);
            let s = source_s(&cg, Era::Inflation, m.k, eta);
            let e = (lc.delta_omega_sq + I * s).norm();
            if let Some(p) = prev {
                let slope = (e / p).log10();
                assert!((slope - 2.0).abs() < 0.01, "slope {slope}");
            }
            prev = Some(e);
        }
    }

    #[test]
    fn backends_agree_near_hubble_crossing() {
        let (c, m) = setup(3e6, 2e4, 4.0);
        let sch = EraSchedule::new(&c.bg, m.k, 60.0, 0.0).unwrap();
        let outs = [
            c.bg.eta_at_ratio(Era::Inflation, m.k, 5.0),
            c.bg.eta_at_ratio(Era::Inflation, m.k, 0.5),
        ];
        let d = integrate_omega(&c, &m, &sch, &outs, &OmegaOptions::default()).unwrap();
        let l = integrate_omega(
            &c,
            &m,
            &sch,
            &outs,
            &OmegaOptions {
                backend: OmegaBackend::Linearized,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in d.samples.iter().zip(&l.samples) {
            assert!((a.omega - b.omega).norm() < 1e-8 * a.omega.norm(), "{a:?} {b:?}");
        }
    }

    #[test]
    fn free_width_stays_free() {
        let (c, m) = setup(0.0, 1e3, 6.0);
        let sch = EraSchedule::new(&c.bg, m.k, 100.0, 2.0).unwrap();
        let t = integrate_omega(&c, &m, &sch, &[], &OmegaOptions::default()).unwrap();
        assert_eq!(t.last().q, 0.0);
        assert_eq!(t.last().collapse_r(), 1.0);
    }

    fn first_order(c: &Coupling, m: &Modes, sch: &EraSchedule, form: FirstOrderForm) -> PerturbativeOmega {
        perturbative_omega(c, m, sch.eta_ini, sch.eta_final, form, &QuadOptions::default()).unwrap()
    }

    #[test]
    fn first_order_width_matches_direct_integration() {
        // crosses r_c during inflation, ends super-Hubble in the radiation era
        let (c, m) = setup(1e-4, 1e3, 6.0);
        let sch = EraSchedule::new(&c.bg, m.k, 100.0, 3.0).unwrap();
        let full = integrate_omega(&c, &m, &sch, &[], &OmegaOptions::default()).unwrap();
        let p = first_order(&c, &m, &sch, FirstOrderForm::Coupling);
        assert!(
            (full.last().q - p.q()).abs() < 1e-9 * p.q(),
            "{} vs {}",
            full.last().q,
            p.q()
        );
    }

    #[test]
    fn perturbative_error_is_second_order() {
        let (c, m) = setup(1.0, 1e3, 6.0);
        let sch = EraSchedule::new(&c.bg, m.k, 100.0, 0.0).unwrap();
        let errs: Vec<f64> = [1e4, 1e5, 1e6]
            .iter()
            .map(|&g| {
                let cg = c.with_gamma_hat(g);
                let full = integrate_omega(&cg, &m, &sch, &[], &OmegaOptions::default()).unwrap();
                (full.last().omega - first_order(&cg, &m, &sch, FirstOrderForm::Coupling).omega()).norm()
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[1] / w[0]).log10();
            assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
        }
    }

    #[test]
    fn source_and_coupling_forms_agree_during_inflation() {
        let (c, m) = setup(1.0, 1e3, 4.0);
        let sch = EraSchedule::new(&c.bg, m.k, 100.0, 0.0).unwrap();
        let a = first_order(&c, &m, &sch, FirstOrderForm::Coupling);
        let b = first_order(&c, &m, &sch, FirstOrderForm::Source);
        assert!((a.omega1 - b.omega1).norm() < 1e-8 * a.omega1.norm());
        assert!((a.q() - b.q()).abs() < 1e-8 * a.q());
    }
}
