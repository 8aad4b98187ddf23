//! Lindblad second moments of one mode, and the independent Green-function
//! quadrature for the same quantities.
//!
//! The moment equations are linear with sources proportional to `γ̂`, so the
//! state splits exactly as `P = X + γ̂ X₁`. We integrate the free part `X`
//! and the unit-strength responses sourced during inflation and during the
//! radiation era separately; the relative correction `ΔP_vv/|g⁰|²` is then
//! read off without subtracting two nearly equal numbers.

use serde::{Deserialize, Serialize};

use crate::background::{Era, EraSchedule};
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::jet::{Jet, Real};
use crate::modes::{congruence, FreeMode, Modes};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::quad::{self, QuadOptions};
use crate::source::source_s;

/// Second moments `(⟨v²⟩, ⟨vp + pv⟩, ⟨p²⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentState {
    pub p_vv: f64,
    pub p_cross: f64,
    pub p_pp: f64,
}

impl MomentState {
    pub fn new(p_vv: f64, p_cross: f64, p_pp: f64) -> Self {
        MomentState { p_vv, p_cross, p_pp }
    }

    /// Pure Gaussian state built from a mode function.
    pub fn from_free_mode(m: &FreeMode) -> Self {
        MomentState {
            p_vv: m.g0.norm_sqr(),
            p_cross: 2.0 * (m.g0.conj() * m.g0_prime).re,
            p_pp: m.g0_prime.norm_sqr(),
        }
    }

    /// Bunch–Davies state at `eta`.
    pub fn bunch_davies(modes: &Modes, eta: f64) -> Self {
        Self::from_free_mode(&modes.free_mode(modes.bg.era_of(eta), eta))
    }

    /// `P_vv P_pp − (P_cross/2)²`; equals 1/4 for a pure state.
    pub fn uncertainty_product(&self) -> f64 {
        self.p_vv * self.p_pp - 0.25 * self.p_cross * self.p_cross
    }

    /// `(P_vv P_pp − (P_cross/2)² − 1/4)/(P_vv P_pp)`: the uncertainty
    /// excess normalised by the size of the terms that cancel in it. On
    /// super-Hubble scales the determinant is a difference of numbers of
    /// order `x⁻⁴`, so only this normalised form is meaningful numerically.
    pub fn uncertainty_margin(&self) -> f64 {
        (self.uncertainty_product() - 0.25) / (self.p_vv * self.p_pp)
    }

    fn covariance(&self) -> [f64; 3] {
        [self.p_vv, 0.5 * self.p_cross, self.p_pp]
    }

    fn from_covariance(c: [f64; 3]) -> Self {
        MomentState {
            p_vv: c[0],
            p_cross: 2.0 * c[1],
            p_pp: c[2],
        }
    }

    fn add(&self, o: &MomentState) -> MomentState {
        MomentState::new(self.p_vv + o.p_vv, self.p_cross + o.p_cross, self.p_pp + o.p_pp)
    }

    fn scale(&self, f: f64) -> MomentState {
        MomentState::new(self.p_vv * f, self.p_cross * f, self.p_pp * f)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MomentOptions {
    pub ode: OdeOptions,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            ode: OdeOptions {
                running_floor: 1e-6,
                ..OdeOptions::default()
            },
        }
    }
}

/// One dense-output record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    pub eta: f64,
    pub era: Era,
    /// `x = −kη` in inflation, `y = k(η − η_r)` in the radiation era.
    pub ratio: f64,
    /// Numerically integrated free (γ = 0) moments.
    pub free: MomentState,
    /// CSL correction `γ̂ X₁` sourced during inflation (transported).
    pub delta_inflation: MomentState,
    /// CSL correction sourced during the radiation era.
    pub delta_radiation: MomentState,
    /// Closed-form `|g⁰|²` for comparison.
    pub free_exact_vv: f64,
    pub source: f64,
}

impl MomentSample {
    pub fn delta(&self) -> MomentState {
        self.delta_inflation.add(&self.delta_radiation)
    }

    pub fn full(&self) -> MomentState {
        self.free.add(&self.delta())
    }

    /// `ΔP_vv/|g⁰|²`.
    pub fn correction_rel(&self) -> f64 {
        self.delta().p_vv / self.free_exact_vv
    }
}

#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    pub samples: Vec<MomentSample>,
    pub stats: OdeStats,
}

impl MomentTrajectory {
    pub fn last(&self) -> &MomentSample {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

fn moment_rhs(c: &Coupling, era: Era, k: f64, eta: f64, deta: f64, y: &[f64], dy: &mut [f64]) {
    let bg = &c.bg;
    let w2 = bg.omega2_g(era, k, eta);
    let (al, be) = c.alpha_beta_g(era, k, eta);
    let a4 = bg.scale_factor_g(era, eta).powi(4);
    for blk in 0..3 {
        let o = 3 * blk;
        let (vv, cr, pp) = (y[o], y[o + 1], y[o + 2]);
        let on = match (blk, era) {
            (1, Era::Inflation) | (2, Era::Radiation) => 1.0,
            _ => 0.0,
        };
        dy[o] = deta * (cr + on * a4 * be * be);
        dy[o + 1] = deta * (2.0 * pp - 2.0 * w2 * vv - on * 2.0 * a4 * al * be);
        dy[o + 2] = deta * (-w2 * cr + on * a4 * al * al);
    }
}

fn check_outputs(schedule: &EraSchedule, outputs: &[f64]) -> Result<()> {
    let mut prev = schedule.eta_ini;
    for &e in outputs {
        if !(e >= prev) || e > schedule.eta_final {
            return Err(Error::InvalidParameter(format!(
                "output times must be sorted within [{}, {}]; got {e}",
                schedule.eta_ini, schedule.eta_final
            )));
        }
        prev = e;
    }
    Ok(())
}

/// Integrate the moment equations from `schedule.eta_ini` with free initial
/// state `initial`, recording samples at `outputs` (sorted conformal times;
/// the final time is used when empty). `η_end` itself is reported before the
/// transition map is applied.
pub fn integrate_moments(
    c: &Coupling,
    modes: &Modes,
    initial: &MomentState,
    schedule: &EraSchedule,
    outputs: &[f64],
    opts: &MomentOptions,
) -> Result<MomentTrajectory> {
    let bg = &c.bg;
    let k = modes.k;
    let default_out = [schedule.eta_final];
    let outputs = if outputs.is_empty() { &default_out[..] } else { outputs };
    check_outputs(schedule, outputs)?;
    let gh = c.csl.gamma_hat();

    let mut y = vec![0.0; 9];
    y[0] = initial.p_vv;
    y[1] = initial.p_cross;
    y[2] = initial.p_pp;
    let mut stats = OdeStats::default();
    let mut samples = Vec::with_capacity(outputs.len());
    let sample = |era: Era, eta: f64, y: &[f64]| {
        let blk = |o: usize| MomentState::new(y[o], y[o + 1], y[o + 2]);
        MomentSample {
            eta,
            era,
            ratio: bg.horizon_ratio(era, k, eta),
            free: blk(0),
            delta_inflation: blk(3).scale(gh),
            delta_radiation: blk(6).scale(gh),
            free_exact_vv: modes.mode_norm2(era, eta),
            source: source_s(c, era, k, eta),
        }
    };

    for seg in schedule.segments(bg) {
        let era = seg.era;
        if seg.era == Era::Radiation {
            // carry the state across the transition
            let m = modes.matching_map();
            for blk in 0..3 {
                let o = 3 * blk;
                let s = MomentState::new(y[o], y[o + 1], y[o + 2]).covariance();
                let t = MomentState::from_covariance(congruence(&m, s));
                y[o] = t.p_vv;
                y[o + 1] = t.p_cross;
                y[o + 2] = t.p_pp;
            }
        }
        let t0 = bg.log_time(era, k, seg.eta_start);
        let seg_out: Vec<f64> = outputs
            .iter()
            .copied()
            .filter(|&e| match era {
                Era::Inflation => e <= seg.eta_stop,
                Era::Radiation => e > seg.eta_start && e <= seg.eta_stop,
            })
            .collect();
        let mut t_out: Vec<f64> = seg_out.iter().map(|&e| bg.log_time(era, k, e).max(t0)).collect();
        let t_stop = bg.log_time(era, k, seg.eta_stop);
        t_out.push(t_stop);
        let f = |t: f64, s: &[f64], ds: &mut [f64]| {
            let eta = bg.eta_of_log_time(era, k, t);
            let deta = bg.deta_dlog_time(era, k, t);
            moment_rhs(c, era, k, eta, deta, s, ds);
        };
        let (ys, st) = ode::solve(f, t0, &y, &t_out, &opts.ode)?;
        stats.accepted += st.accepted;
        stats.rejected += st.rejected;
        for (e, v) in seg_out.iter().zip(&ys) {
            samples.push(sample(era, *e, v));
        }
        y = ys.last().expect("segment endpoint").clone();
    }
    Ok(MomentTrajectory { samples, stats })
}

/// Evolve a Bunch–Davies mode through `schedule` and return the final sample.
pub fn evolve_final(c: &Coupling, modes: &Modes, schedule: &EraSchedule, opts: &MomentOptions) -> Result<MomentSample> {
    let init = MomentState::bunch_davies(modes, schedule.eta_ini);
    Ok(*integrate_moments(c, modes, &init, schedule, &[], opts)?.last())
}

/// Log-time break points for integrals over `[eta_ini, eta]`: era
/// boundary, smearing-scale crossing, Hubble crossing, and unit steps.
fn log_breaks(c: &Coupling, k: f64, era: Era, lo: f64, hi: f64) -> Vec<f64> {
    let bg = &c.bg;
    let (tl, th) = (bg.log_time(era, k, lo), bg.log_time(era, k, hi));
    let mut b = vec![tl, th];
    if let Some(e) = bg.smearing_crossing(era, k, c.csl.r_c) {
        b.push(bg.log_time(era, k, e));
    }
    b.push(0.0);
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

/// Output of the Green-function quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSolution {
    pub eta: f64,
    pub free_vv: f64,
    /// Correction to the covariance sourced during inflation.
    pub delta_inflation: MomentState,
    /// Correction sourced during the radiation era.
    pub delta_radiation: MomentState,
}

impl QuadratureSolution {
    pub fn delta(&self) -> MomentState {
        self.delta_inflation.add(&self.delta_radiation)
    }

    pub fn p_vv(&self) -> f64 {
        self.free_vv + self.delta().p_vv
    }

    pub fn correction_rel(&self) -> f64 {
        self.delta().p_vv / self.free_vv
    }
}

/// `ΔΣ(η) = γ̂ ∫ a⁴ (U w)(U w)ᵀ dη̄` with `w = (β, −α)` and `U(η, η̄)` the
/// classical propagator; the `vv` entry is `γ̂ ∫ a⁴ (αG + β ∂_η̄G)²`.
pub fn quadrature_solution(
    c: &Coupling,
    modes: &Modes,
    eta_ini: f64,
    eta: f64,
    opts: &QuadOptions,
) -> Result<QuadratureSolution> {
    let bg = &c.bg;
    let k = modes.k;
    if !(eta >= eta_ini) {
        return Err(Error::InvalidParameter(format!(
            "eta = {eta} precedes eta_ini = {eta_ini}"
        )));
    }
    let gh = c.csl.gamma_hat();
    let era_out = bg.era_of(eta);
    let mut parts = [MomentState::default(); 2];
    for (idx, era) in [Era::Inflation, Era::Radiation].into_iter().enumerate() {
        let (lo, hi) = match era {
            Era::Inflation => (eta_ini, eta.min(bg.eta_end())),
            Era::Radiation => {
                if era_out == Era::Inflation {
                    continue;
                }
                (bg.eta_end(), eta)
            }
        };
        if gh == 0.0 || !(hi > lo) {
            continue;
        }
        let breaks = log_breaks(c, k, era, lo, hi);
        let integrand = |t: f64, out: &mut [f64]| {
            let eb = bg.eta_of_log_time(era, k, t);
            let d = bg.deta_dlog_time(era, k, t);
            let (al, be) = c.alpha_beta_g(era, k, eb);
            let a4 = bg.scale_factor_g(era, eb).powi(4);
            let u = if era == era_out {
                modes.propagator_within(era, eta, eb)
            } else {
                modes.propagator(eta, eb)
            };
            let wv = u[0][0] * be - u[0][1] * al;
            let wp = u[1][0] * be - u[1][1] * al;
            let f = a4 * d;
            out[0] = f * wv * wv;
            out[1] = f * wv * wp;
            out[2] = f * wp * wp;
        };
        let v = quad::integrate(integrand, &breaks, 3, opts)?;
        parts[idx] = MomentState::new(gh * v[0], 2.0 * gh * v[1], gh * v[2]);
    }
    Ok(QuadratureSolution {
        eta,
        free_vv: modes.mode_norm2(era_out, eta),
        delta_inflation: parts[0],
        delta_radiation: parts[1],
    })
}

/// The source-form representation `ΔP_vv = ½∫S G² dη̄ + boundary terms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceFormSolution {
    /// `½∫S(η̄) G²(η, η̄) dη̄` over both eras.
    pub bulk: f64,
    /// Boundary contribution at the initial time.
    pub boundary_initial: f64,
    /// Boundary contribution at the transition (zero if `η ≤ η_end`).
    pub boundary_transition: f64,
}

impl SourceFormSolution {
    pub fn total(&self) -> f64 {
        self.bulk + self.boundary_initial + self.boundary_transition
    }
}

/// `E(η̄) = A αβ G² + Aβ² G ∂G − ½(Aβ²)′ G²` with `A = γ̂a⁴`, `∂ = ∂_η̄`.
fn boundary_e(c: &Coupling, modes: &Modes, era: Era, eta: f64, eta_bar: f64) -> f64 {
    let bg = &c.bg;
    let k = modes.k;
    let t = Jet::var(eta_bar);
    let (al, be) = c.alpha_beta_g(era, k, t);
    let a4 = bg.scale_factor_g(era, t).powi(4);
    let bb = a4 * be * be;
    let u = if bg.era_of(eta) == era {
        modes.propagator_within(era, eta, eta_bar)
    } else {
        modes.propagator(eta, eta_bar)
    };
    let g = u[0][1];
    let dg = -u[0][0];
    c.csl.gamma_hat() * (a4.v * al.v * be.v * g * g + bb.v * g * dg - 0.5 * bb.d1 * g * g)
}

/// Evaluate the source-form solution. The bulk term alone is what one
/// obtains by dropping the integration-by-parts boundary terms.
pub fn source_form_solution(
    c: &Coupling,
    modes: &Modes,
    eta_ini: f64,
    eta: f64,
    opts: &QuadOptions,
) -> Result<SourceFormSolution> {
    let bg = &c.bg;
    let k = modes.k;
    let era_out = bg.era_of(eta);
    let mut bulk = 0.0;
    let mut boundary_transition = 0.0;
    for era in [Era::Inflation, Era::Radiation] {
        let (lo, hi) = match era {
            Era::Inflation => (eta_ini, eta.min(bg.eta_end())),
            Era::Radiation => {
                if era_out == Era::Inflation {
                    continue;
                }
                (bg.eta_end(), eta)
            }
        };
        if !(hi > lo) {
            continue;
        }
        let breaks = log_breaks(c, k, era, lo, hi);
        let integrand = |t: f64, out: &mut [f64]| {
            let eb = bg.eta_of_log_time(era, k, t);
            let d = bg.deta_dlog_time(era, k, t);
            let g = if era == era_out {
                modes.propagator_within(era, eta, eb)[0][1]
            } else {
                modes.propagator(eta, eb)[0][1]
            };
            out[0] = 0.5 * source_s(c, era, k, eb) * g * g * d;
        };
        bulk += quad::integrate(integrand, &breaks, 1, opts)?[0];
        if era == Era::Inflation && era_out == Era::Radiation {
            boundary_transition += boundary_e(c, modes, Era::Inflation, eta, bg.eta_end());
        }
        if era == Era::Radiation {
            // G(η, η̄) and ∂_η̄G are evaluated just after the transition
            boundary_transition -= boundary_e(c, modes, Era::Radiation, eta, bg.eta_end());
        }
    }
    let boundary_initial = -boundary_e(c, modes, bg.era_of(eta_ini), eta, eta_ini);
    Ok(SourceFormSolution {
        bulk,
        boundary_initial,
        boundary_transition,
    })
}

/// Residual of `P‴ + 4ω²P′ + 2(ω²)′P − S = 0` at `eta`, built from the
/// integrated state: `P″` is formed from the moments and differentiated
/// numerically with a five-point stencil of half-width `2h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirdOrderResidual {
    pub residual: f64,
    /// Largest of `|P‴|`, `|4ω²P′|`, `|2(ω²)′P|`, `|S|`.
    pub scale: f64,
}

pub fn third_order_residual(
    c: &Coupling,
    modes: &Modes,
    schedule: &EraSchedule,
    eta: f64,
    h: f64,
    opts: &MomentOptions,
) -> Result<ThirdOrderResidual> {
    let bg = &c.bg;
    let k = modes.k;
    let era = bg.era_of(eta);
    let pts: Vec<f64> = (-2..=2).map(|i| eta + i as f64 * h).collect();
    if bg.era_of(pts[0]) != era || bg.era_of(pts[4]) != era {
        return Err(Error::InvalidParameter("stencil straddles the transition".into()));
    }
    let init = MomentState::bunch_davies(modes, schedule.eta_ini);
    let sched = EraSchedule {
        eta_final: pts[4].max(schedule.eta_final),
        ..*schedule
    };
    let tr = integrate_moments(c, modes, &init, &sched, &pts, opts)?;
    let gh = c.csl.gamma_hat();
    let second = |s: &MomentSample| {
        let t = Jet::var(s.eta);
        let (al, be) = c.alpha_beta_g(era, k, t);
        let a4 = bg.scale_factor_g(era, t).powi(4);
        let bb = a4 * be * be;
        let p = s.full();
        let w2 = bg.omega2_g(era, k, s.eta);
        2.0 * p.p_pp - 2.0 * w2 * p.p_vv - 2.0 * gh * a4.v * al.v * be.v + gh * bb.d1
    };
    let d: Vec<f64> = tr.samples.iter().map(second).collect();
    let p3 = (d[0] - 8.0 * d[1] + 8.0 * d[3] - d[4]) / (12.0 * h);
    let mid = &tr.samples[2];
    let p = mid.full();
    let t = Jet::var(eta);
    let (_, be) = c.alpha_beta_g(era, k, t);
    let a4 = bg.scale_factor_g(era, t).powi(4);
    let p1 = p.p_cross + gh * a4.v * be.v * be.v;
    let w2 = bg.omega2_g(era, k, t);
    let terms = [p3, 4.0 * w2.v * p1, 2.0 * w2.d1 * p.p_vv, mid.source];
    let residual = terms[0] + terms[1] + terms[2] - terms[3];
    let scale = terms.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(ThirdOrderResidual { residual, scale })
}
