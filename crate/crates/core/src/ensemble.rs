//! Stochastic unravelling of the CSL dynamics for one mode.
//!
//! The Gaussian wavefunction
//! `Ψ ∝ |N| exp[−ReΩ (v − v̄)² + iσ + iχv − i ImΩ v²]`
//! obeys the Itô system
//!
//! ```text
//! v̄′ = χ − 2v̄ ImΩ + √γ̂ a² D/(2ReΩ) ξ
//! χ′ = 2ImΩ χ − 4ReΩ² v̄ + 8γ̂a⁴β ReΩ D v̄ + 2√γ̂ a²β ReΩ ξ
//! σ′ = −ReΩ + 2ReΩ² v̄² − χ²/2 + (γ̂a⁴/2)βD(1 − 8ReΩ v̄²) − 2√γ̂ a²β ReΩ v̄ ξ
//! ln|N|′ = ReΩ′/(4ReΩ)
//! ```
//!
//! with `D = α − 2β ImΩ` and `Ω` following the deterministic Riccati
//! equation. Because `Ω` is noise-free and `(v̄, χ)` enter linearly with
//! additive noise, [`run_ensemble`] computes the `Ω` path and the step
//! propagators once and shares them between trajectories; each trajectory
//! then only draws one Wiener increment per step and per real/imaginary
//! part. [`sde_step`] is the plain Euler–Maruyama step on the full
//! six-component state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{Era, EraSchedule};
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::modes::Modes;
use crate::ode::{self, OdeOptions};
use crate::riccati::{deviation_rhs, riccati_rhs};
use crate::stats::{mean_stderr, neumaier};

/// Parameters of one stochastic Gaussian wavefunction (one real or
/// imaginary part of one mode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionState {
    pub re_omega: f64,
    pub im_omega: f64,
    /// `⟨v̂⟩`
    pub v_bar: f64,
    /// `⟨p̂⟩ + 2ImΩ v̄`
    pub chi: f64,
    /// Global phase.
    pub sigma: f64,
    pub ln_norm: f64,
}

impl WavefunctionState {
    /// Bunch–Davies vacuum: centred, normalised, free width.
    pub fn bunch_davies(modes: &Modes, era: Era, eta: f64) -> Self {
        let o = modes.omega0(era, eta);
        WavefunctionState {
            re_omega: o.re,
            im_omega: o.im,
            v_bar: 0.0,
            chi: 0.0,
            sigma: 0.0,
            ln_norm: normalised_ln_norm(o.re),
        }
    }

    /// `⟨p̂⟩ = χ − 2ImΩ v̄`.
    pub fn p_mean(&self) -> f64 {
        self.chi - 2.0 * self.im_omega * self.v_bar
    }

    /// Quantum spread `⟨(v̂ − v̄)²⟩ = 1/(4ReΩ)`.
    pub fn spread(&self) -> f64 {
        0.25 / self.re_omega
    }

    /// `| |N| / (2ReΩ/π)^{1/4} − 1 |`.
    pub fn norm_drift(&self) -> f64 {
        (self.ln_norm - normalised_ln_norm(self.re_omega)).exp_m1().abs()
    }
}

fn normalised_ln_norm(re_omega: f64) -> f64 {
    0.25 * (2.0 * re_omega / std::f64::consts::PI).ln()
}

/// Itô drift and noise coefficients of the six-component state, in the
/// order `(ReΩ, ImΩ, v̄, χ, σ, ln|N|)`.
pub fn sde_coefficients(c: &Coupling, era: Era, k: f64, eta: f64, s: &WavefunctionState) -> ([f64; 6], [f64; 6]) {
    let gh = c.csl.gamma_hat();
    let (al, be) = c.alpha_beta_g(era, k, eta);
    let a2 = c.bg.scale_factor_g(era, eta).powi(2);
    let (r, i) = (s.re_omega, s.im_omega);
    let d = al - 2.0 * be * i;
    let dom = riccati_rhs(c, era, k, eta, num_complex::Complex64::new(r, i));
    let sg = gh.sqrt();
    let drift = [
        dom.re,
        dom.im,
        s.chi - 2.0 * s.v_bar * i,
        2.0 * i * s.chi - 4.0 * r * r * s.v_bar + 8.0 * gh * a2 * a2 * be * r * d * s.v_bar,
        -r + 2.0 * r * r * s.v_bar * s.v_bar - 0.5 * s.chi * s.chi
            + 0.5 * gh * a2 * a2 * be * d * (1.0 - 8.0 * r * s.v_bar * s.v_bar),
        dom.re / (4.0 * r),
    ];
    let noise = [
        0.0,
        0.0,
        sg * a2 * d / (2.0 * r),
        2.0 * sg * a2 * be * r,
        -2.0 * sg * a2 * be * r * s.v_bar,
        0.0,
    ];
    (drift, noise)
}

/// One Euler–Maruyama step of length `deta` with Wiener increment `dw`
/// (variance `deta`). Fails if the width loses positivity.
pub fn sde_step(
    c: &Coupling,
    era: Era,
    k: f64,
    eta: f64,
    deta: f64,
    s: &WavefunctionState,
    dw: f64,
) -> Result<WavefunctionState> {
    let (f, g) = sde_coefficients(c, era, k, eta, s);
    let x = [s.re_omega, s.im_omega, s.v_bar, s.chi, s.sigma, s.ln_norm];
    let mut y = [0.0; 6];
    for n in 0..6 {
        y[n] = x[n] + f[n] * deta + g[n] * dw;
    }
    if !(y[0] > 0.0) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            t: eta,
            reason: "width lost positivity (ReΩ ≤ 0)".into(),
            last_state: x.to_vec(),
        });
    }
    Ok(WavefunctionState {
        re_omega: y[0],
        im_omega: y[1],
        v_bar: y[2],
        chi: y[3],
        sigma: y[4],
        ln_norm: y[5],
    })
}

/// Maximum number of successive halvings in [`sde_step_adaptive`].
pub const MAX_HALVINGS: u32 = 40;

/// Euler–Maruyama step that, on rejection, halves the step and splits the
/// increment with a Brownian bridge, `ΔW₁ = ΔW/2 + √(Δη/4) Z`, drawing `Z`
/// from `normal`. Returns the state and the number of sub-steps taken.
#[allow(clippy::too_many_arguments)]
pub fn sde_step_adaptive<F: FnMut() -> f64>(
    c: &Coupling,
    era: Era,
    k: f64,
    eta: f64,
    deta: f64,
    s: &WavefunctionState,
    dw: f64,
    normal: &mut F,
) -> Result<(WavefunctionState, usize)> {
    fn go<F: FnMut() -> f64>(
        c: &Coupling,
        era: Era,
        k: f64,
        eta: f64,
        deta: f64,
        s: &WavefunctionState,
        dw: f64,
        normal: &mut F,
        depth: u32,
    ) -> Result<(WavefunctionState, usize)> {
        match sde_step(c, era, k, eta, deta, s, dw) {
            Ok(n) => Ok((n, 1)),
            Err(e) if depth >= MAX_HALVINGS => Err(e),
            Err(_) => {
                let h = 0.5 * deta;
                let dw1 = 0.5 * dw + (0.5 * h).sqrt() * normal();
                let (m, n1) = go(c, era, k, eta, h, s, dw1, normal, depth + 1)?;
                let (e, n2) = go(c, era, k, eta + h, h, &m, dw - dw1, normal, depth + 1)?;
                Ok((e, n1 + n2))
            }
        }
    }
    go(c, era, k, eta, deta, s, dw, normal, 0)
}

/// Words of the ChaCha keystream reserved for each step of each stream.
const WORDS_PER_STEP: u128 = 64;

/// Counter-based Wiener increments: stream `2·trajectory + part` of a
/// ChaCha generator seeded with `seed`, positioned at a fixed offset for
/// every step, so any `(seed, trajectory, part, step)` is reproducible
/// independently of execution order.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64, part: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * trajectory + part);
        NoiseStream { rng }
    }

    /// Standard normal variate number `slot` of step `step`.
    pub fn normal(&mut self, step: u64, slot: u64) -> f64 {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP + slot as u128 * 8);
        self.rng.sample(StandardNormal)
    }

    /// Wiener increment of variance `deta` for `step`.
    pub fn increment(&mut self, step: u64, deta: f64) -> f64 {
        deta.sqrt() * self.normal(step, 0)
    }
}

/// Ensemble controls.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleOptions {
    pub n_traj: usize,
    pub seed: u64,
    /// Upper bound on steps per unit of log-time.
    pub steps_per_efold: f64,
    /// Upper bound on `k Δη` per step (resolves sub-Hubble oscillations).
    pub max_phase_step: f64,
    /// Upper bound on the change of ln(1 + q) per step, where
    /// 1/(1 + q) is the collapse ratio (resolves fast width changes).
    pub max_width_step: f64,
    pub ode: OdeOptions,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            n_traj: 4096,
            seed: 0,
            steps_per_efold: 50.0,
            max_phase_step: 0.05,
            max_width_step: 0.02,
            ode: OdeOptions {
                rtol: 1e-10,
                atol: 1e-13,
                ..OdeOptions::default()
            },
        }
    }
}

/// Ensemble statistics at one output time. Both real and imaginary parts
/// count as samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePoint {
    pub eta: f64,
    pub era: Era,
    pub ratio: f64,
    pub mean_v: f64,
    pub stderr_v: f64,
    pub mean_v2: f64,
    pub stderr_v2: f64,
    pub re_omega: f64,
    /// Sample variance of ReΩ over trajectories, relative to ReΩ².
    pub re_omega_rel_var: f64,
    /// `R = ReΩ₀/ReΩ`.
    pub collapse_r: f64,
    /// `1/(4ReΩ)`
    pub spread: f64,
    /// Largest `| |N|/(2ReΩ/π)^{1/4} − 1 |` over trajectories.
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub points: Vec<EnsemblePoint>,
    pub n_traj: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub steps: usize,
}

/// Shared, noise-independent data for one step `[η_n, η_{n+1}]`.
#[derive(Debug, Clone, Copy)]
struct StepPlan {
    deta: f64,
    /// Homogeneous propagator of `(v̄, χ)` over the step.
    phi: [[f64; 2]; 2],
    /// `Φ(η_{n+1}, η_mid) b(η_mid)`: response to a unit increment.
    kick: [f64; 2],
    /// Left-point coefficients of the phase equation.
    re_omega: f64,
    sigma_beta_d: f64,
    sigma_noise: f64,
    /// `¼ ln(ReΩ_{n+1}/ReΩ_n)`
    d_ln_norm: f64,
    /// Applied before the step (transition map `v̄ → r v̄`, `χ → χ/r`).
    rescale: Option<f64>,
    /// Output index reached at the end of the step.
    output: Option<usize>,
}

struct Plan {
    steps: Vec<StepPlan>,
    re_omega0_ini: f64,
    /// `(η, era, ratio, ReΩ, R)` at each output.
    outputs: Vec<(f64, Era, f64, f64, f64)>,
}

/// Width deviation state `(q, J)` and local coefficients of the linear
/// `(v̄, χ)` system at one time.
struct Local {
    re: f64,
    im: f64,
    /// `α − 2β ImΩ`
    d: f64,
    beta: f64,
    a2: f64,
}

fn local(c: &Coupling, modes: &Modes, era: Era, eta: f64, q: f64, j: f64) -> Local {
    let o0 = modes.omega0(era, eta);
    let (_, beta) = c.alpha_beta_g(era, modes.k, eta);
    Local {
        re: o0.re * (1.0 + q),
        im: o0.im + j,
        d: modes.drive(c, era, eta) - 2.0 * beta * j,
        beta,
        a2: c.bg.scale_factor_g(era, eta).powi(2),
    }
}

/// `Φ(t1, t0)` acting on `(v̄, χ)`.
type Propagator = [[f64; 2]; 2];

/// Integrate `(q, J)` and the `(v̄, χ)` propagator from `t0` to `t1`
/// (log-time). Returns the final `(q, J)` and `Φ(t1, t0)`.
fn propagate(
    c: &Coupling,
    modes: &Modes,
    era: Era,
    t0: f64,
    t1: f64,
    qj: (f64, f64),
    opts: &OdeOptions,
) -> Result<((f64, f64), Propagator)> {
    let bg = &c.bg;
    let k = modes.k;
    let gh = c.csl.gamma_hat();
    // scaled variables (√k v̄, χ/√k) and J/k keep every component of order
    // one, so a plain absolute tolerance is meaningful
    let f = |t: f64, y: &[f64], dy: &mut [f64]| {
        let eta = bg.eta_of_log_time(era, k, t);
        let s = bg.deta_dlog_time(era, k, t);
        let (dq, dj) = deviation_rhs(c, modes, era, eta, y[0], k * y[1]);
        let l = local(c, modes, era, eta, y[0], k * y[1]);
        let a21 = -4.0 * l.re * l.re + 8.0 * gh * l.a2 * l.a2 * l.beta * l.re * l.d;
        dy[0] = s * dq;
        dy[1] = s * dj / k;
        // columns of the scaled propagator
        for col in 0..2 {
            let v = y[2 + 2 * col];
            let x = y[3 + 2 * col];
            dy[2 + 2 * col] = s * (-2.0 * l.im * v + k * x);
            dy[3 + 2 * col] = s * (a21 / k * v + 2.0 * l.im * x);
        }
    };
    let y0 = [qj.0, qj.1 / k, 1.0, 0.0, 0.0, 1.0];
    let (ys, _) = ode::solve(f, t0, &y0, &[t1], opts)?;
    let y = &ys[0];
    Ok(((y[0], k * y[1]), [[y[2], y[4] / k], [k * y[3], y[5]]]))
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn mat_mat(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn build_plan(
    c: &Coupling,
    modes: &Modes,
    schedule: &EraSchedule,
    outputs: &[f64],
    opts: &EnsembleOptions,
) -> Result<Plan> {
    let bg = &c.bg;
    let k = modes.k;
    let gh = c.csl.gamma_hat();
    let sg = gh.sqrt();
    let mut steps = Vec::new();
    let mut outs = Vec::with_capacity(outputs.len());
    let (mut q, mut j) = (0.0, 0.0);
    let era_ini = bg.era_of(schedule.eta_ini);
    let re_omega0_ini = modes.omega0(era_ini, schedule.eta_ini).re;
    let mut next_out = 0usize;
    for seg in schedule.segments(bg) {
        let era = seg.era;
        let mut rescale = None;
        if era == Era::Radiation {
            j /= modes.r * modes.r;
            rescale = Some(modes.r);
        }
        let t0 = bg.log_time(era, k, seg.eta_start);
        let t1 = bg.log_time(era, k, seg.eta_stop);
        // output marks inside this segment
        let mut marks: Vec<(f64, usize)> = Vec::new();
        while next_out < outputs.len() && outputs[next_out] <= seg.eta_stop {
            let e = outputs[next_out];
            if era == Era::Radiation && e <= seg.eta_start {
                return Err(Error::InvalidParameter(format!(
                    "output time {e} coincides with the transition"
                )));
            }
            marks.push((bg.log_time(era, k, e).max(t0).min(t1), next_out));
            next_out += 1;
        }
        let mut mark = 0usize;
        let mut prev = t0;
        let mut l_prev = local(c, modes, era, seg.eta_start, q, j);
        // Adaptive grid: bounded in log-time, in phase k Δη and in the change
        // of the collapse ratio; lands exactly on output times.
        loop {
            // zero-length steps for outputs sitting on the current time
            while mark < marks.len() && marks[mark].0 <= prev {
                let i = marks[mark].1;
                steps.push(StepPlan {
                    deta: 0.0,
                    phi: [[1.0, 0.0], [0.0, 1.0]],
                    kick: [0.0, 0.0],
                    re_omega: l_prev.re,
                    sigma_beta_d: 0.0,
                    sigma_noise: 0.0,
                    d_ln_norm: 0.0,
                    rescale: rescale.take(),
                    output: Some(i),
                });
                let e = outputs[i];
                outs.push((e, era, modes.ratio(era, e), l_prev.re, 1.0 / (1.0 + q)));
                mark += 1;
            }
            if prev >= t1 {
                break;
            }
            let ratio = modes.ratio(era, bg.eta_of_log_time(era, k, prev));
            let mut dt = (1.0 / opts.steps_per_efold).min(opts.max_phase_step / ratio.max(1e-300));
            let target = marks.get(mark).map_or(t1, |m| m.0).min(t1);
            let mut halvings = 0;
            let (tn, phi, kick, qj_e) = loop {
                let tn = if prev + dt >= target { target } else { prev + dt };
                let tm = 0.5 * (prev + tn);
                let (qj_m, phi_a) = propagate(c, modes, era, prev, tm, (q, j), &opts.ode)?;
                let (qj_e, phi_b) = propagate(c, modes, era, tm, tn, qj_m, &opts.ode)?;
                let dw = ((1.0 + qj_e.0) / (1.0 + q)).ln().abs();
                if dw > opts.max_width_step && halvings < MAX_HALVINGS {
                    dt = 0.5 * (tn - prev);
                    halvings += 1;
                    continue;
                }
                let eta_m = bg.eta_of_log_time(era, k, tm);
                let lm = local(c, modes, era, eta_m, qj_m.0, qj_m.1);
                let b = [sg * lm.a2 * lm.d / (2.0 * lm.re), 2.0 * sg * lm.a2 * lm.beta * lm.re];
                break (tn, mat_mat(&phi_b, &phi_a), mat_vec(&phi_b, b), qj_e);
            };
            let deta = bg.eta_of_log_time(era, k, tn) - bg.eta_of_log_time(era, k, prev);
            q = qj_e.0;
            j = qj_e.1;
            let l_new = local(c, modes, era, bg.eta_of_log_time(era, k, tn), q, j);
            steps.push(StepPlan {
                deta,
                phi,
                kick,
                re_omega: l_prev.re,
                sigma_beta_d: 0.5 * gh * l_prev.a2 * l_prev.a2 * l_prev.beta * l_prev.d,
                sigma_noise: -2.0 * sg * l_prev.a2 * l_prev.beta * l_prev.re,
                d_ln_norm: 0.25 * (l_new.re / l_prev.re).ln(),
                rescale: rescale.take(),
                output: None,
            });
            prev = tn;
            l_prev = l_new;
        }
    }
    Ok(Plan {
        steps,
        re_omega0_ini,
        outputs: outs,
    })
}

/// Per-sample record at one output time.
#[derive(Debug, Clone, Copy, Default)]
struct Record {
    v: f64,
    re_omega: f64,
    norm_drift: f64,
}

fn run_sample(plan: &Plan, seed: u64, traj: u64, part: u64, n_out: usize) -> Vec<Record> {
    let mut noise = NoiseStream::new(seed, traj, part);
    let mut rec = vec![Record::default(); n_out];
    let (mut v, mut x, mut sigma) = (0.0f64, 0.0f64, 0.0f64);
    let mut ln_norm = normalised_ln_norm(plan.re_omega0_ini);
    let mut re = plan.re_omega0_ini;
    for (n, st) in plan.steps.iter().enumerate() {
        if let Some(r) = st.rescale {
            v *= r;
            x /= r;
            ln_norm -= 0.5 * r.ln();
            re /= r * r;
        }
        if st.deta > 0.0 {
            let dw = noise.increment(n as u64, st.deta);
            sigma += (-st.re_omega + 2.0 * st.re_omega * st.re_omega * v * v - 0.5 * x * x
                + st.sigma_beta_d * (1.0 - 8.0 * st.re_omega * v * v))
                * st.deta
                + st.sigma_noise * v * dw;
            let nv = mat_vec(&st.phi, [v, x]);
            v = nv[0] + st.kick[0] * dw;
            x = nv[1] + st.kick[1] * dw;
            ln_norm += st.d_ln_norm;
            re *= (4.0 * st.d_ln_norm).exp();
        }
        if let Some(i) = st.output {
            rec[i] = Record {
                v,
                re_omega: re,
                norm_drift: (ln_norm - normalised_ln_norm(re)).exp_m1().abs(),
            };
        }
    }
    let _ = sigma;
    rec
}

/// Run `n_traj` independent trajectories (each with independent real and
/// imaginary parts) and return `E[v̄]`, `E[v̄²]` and their standard errors at
/// the sorted `outputs` (the final time if empty).
pub fn run_ensemble(
    c: &Coupling,
    modes: &Modes,
    schedule: &EraSchedule,
    outputs: &[f64],
    opts: &EnsembleOptions,
) -> Result<EnsembleSummary> {
    if opts.n_traj < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_traj must be at least 2, got {}",
            opts.n_traj
        )));
    }
    let default_out = [schedule.eta_final];
    let outputs = if outputs.is_empty() { &default_out[..] } else { outputs };
    if outputs.windows(2).any(|w| w[1] < w[0])
        || outputs[0] < schedule.eta_ini
        || outputs[outputs.len() - 1] > schedule.eta_final
    {
        return Err(Error::InvalidParameter(
            "ensemble output times out of order or range".into(),
        ));
    }
    let plan = build_plan(c, modes, schedule, outputs, opts)?;
    let n_out = plan.outputs.len();
    let per_traj: Vec<[Vec<Record>; 2]> = (0..opts.n_traj as u64)
        .into_par_iter()
        .map(|t| {
            [
                run_sample(&plan, opts.seed, t, 0, n_out),
                run_sample(&plan, opts.seed, t, 1, n_out),
            ]
        })
        .collect();
    let mut points = Vec::with_capacity(n_out);
    for (i, &(eta, era, ratio, re_omega, collapse_r)) in plan.outputs.iter().enumerate() {
        let samples = per_traj.iter().flat_map(|p| [p[0][i], p[1][i]]);
        let vs: Vec<f64> = samples.clone().map(|r| r.v).collect();
        let v2: Vec<f64> = vs.iter().map(|v| v * v).collect();
        let (mean_v, stderr_v) = mean_stderr(&vs);
        let (mean_v2, stderr_v2) = mean_stderr(&v2);
        let res: Vec<f64> = samples.clone().map(|r| r.re_omega).collect();
        let n = res.len() as f64;
        let mean_re = neumaier(res.iter().copied()) / n;
        let var_re = neumaier(res.iter().map(|r| (r - mean_re).powi(2))) / (n - 1.0);
        let max_norm_drift = samples.map(|r| r.norm_drift).fold(0.0, f64::max);
        points.push(EnsemblePoint {
            eta,
            era,
            ratio,
            mean_v,
            stderr_v,
            mean_v2,
            stderr_v2,
            re_omega,
            re_omega_rel_var: var_re / (re_omega * re_omega),
            collapse_r,
            spread: 0.25 / re_omega,
            max_norm_drift,
        });
    }
    Ok(EnsembleSummary {
        points,
        n_traj: opts.n_traj,
        n_samples: 2 * opts.n_traj,
        seed: opts.seed,
        steps: plan.steps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{Background, CosmologyParams};
    use crate::coupling::{Bracket, CslParams};
    use crate::modes::MatchingRule;

    fn setup(gamma: f64, r_c: f64, dn: f64) -> (Coupling, Modes) {
        let cm = CosmologyParams::new(1e-5, 0.005, 0.0, -1e5, dn).unwrap();
        let c = Coupling::new(cm, CslParams::new(gamma, r_c, 1.0, 0.0).unwrap(), Bracket::Full);
        let m = Modes::new(Background::new(cm), cm.k_ref(), MatchingRule::CurvatureContinuous);
        (c, m)
    }

    #[test]
    fn noise_is_reproducible_and_order_independent() {
        let mut a = NoiseStream::new(7, 3, 1);
        let mut b = NoiseStream::new(7, 3, 1);
        let x5 = a.increment(5, 0.5);
        let x2 = a.increment(2, 0.5);
        assert_eq!(b.increment(2, 0.5), x2);
        assert_eq!(b.increment(5, 0.5), x5);
        assert_ne!(NoiseStream::new(7, 3, 0).increment(5, 0.5), x5);
    }

    #[test]
    fn increments_have_unit_rate_variance() {
        let n = 20_000u64;
        let xs: Vec<f64> = (0..n).map(|t| NoiseStream::new(11, t, 0).increment(0, 0.01)).collect();
        let (m, se) = mean_stderr(&xs);
        assert!(m.abs() < 3.0 * se);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_stderr(&sq);
        assert!((m2 - 0.01).abs() < 3.0 * se2, "{m2} ± {se2}");
    }

    #[test]
    fn without_collapse_the_centre_stays_put() {
        let (c, m) = setup(0.0, 1e3, 4.0);
        let eta = -3.0 / m.k;
        let s = WavefunctionState::bunch_davies(&m, Era::Inflation, eta);
        let n = sde_step(&c, Era::Inflation, m.k, eta, 1e-2 / m.k, &s, 0.7).unwrap();
        assert_eq!((n.v_bar, n.chi), (0.0, 0.0));
    }

    #[test]
    fn centre_drift_and_kick_variance() {
        let (c, m) = setup(1e8, 1e3, 4.0);
        let eta = -2.0 / m.k;
        let mut s = WavefunctionState::bunch_davies(&m, Era::Inflation, eta);
        s.v_bar = 3.0;
        s.chi = 0.4 * m.k.sqrt();
        let h = 1e-3 / m.k;
        let n = 100_000u64;
        let dv: Vec<f64> = (0..n)
            .map(|t| {
                let dw = NoiseStream::new(5, t, 0).increment(0, h);
                sde_step(&c, Era::Inflation, m.k, eta, h, &s, dw).unwrap().v_bar - s.v_bar
            })
            .collect();
        let (mean, se) = mean_stderr(&dv);
        let drift = (s.chi - 2.0 * s.v_bar * s.im_omega) * h;
        assert!((mean - drift).abs() < 3.0 * se, "{mean} vs {drift} ± {se}");
        let (al, be) = c.alpha_beta_g(Era::Inflation, m.k, eta);
        let a4 = c.bg.scale_factor_g(Era::Inflation, eta).powi(4);
        let expect = c.csl.gamma_hat() * a4 * (al - 2.0 * be * s.im_omega).powi(2) / (4.0 * s.re_omega.powi(2)) * h;
        let centred: Vec<f64> = dv.iter().map(|d| (d - drift).powi(2)).collect();
        let (var, se_v) = mean_stderr(&centred);
        assert!((var - expect).abs() < 3.0 * se_v, "{var} vs {expect} ± {se_v}");
    }

    #[test]
    fn rejected_steps_are_halved() {
        let (c, m) = setup(0.0, 1e3, 4.0);
        let eta = -2.0 / m.k;
        let mut s = WavefunctionState::bunch_davies(&m, Era::Inflation, eta);
        // a width so small that a full Euler step overshoots below zero
        s.re_omega = 1e-6 * m.k;
        s.im_omega = -5.0 * m.k;
        let mut z = 0u64;
        let mut normal = || {
            z += 1;
            NoiseStream::new(1, z, 0).normal(0, 0)
        };
        let h = 0.5 / m.k;
        assert!(sde_step(&c, Era::Inflation, m.k, eta, h, &s, 0.0).is_err());
        let (n, sub) = sde_step_adaptive(&c, Era::Inflation, m.k, eta, h, &s, 0.0, &mut normal).unwrap();
        assert!(sub > 1 && n.re_omega > 0.0);
    }

    #[test]
    fn ensemble_is_deterministic_and_centred() {
        let (c, m) = setup(1e9, 1e3, 4.0);
        let sch = EraSchedule::new(&c.bg, m.k, 20.0, 0.0).unwrap();
        let opts = EnsembleOptions {
            n_traj: 64,
            seed: 9,
            ..Default::default()
        };
        let a = run_ensemble(&c, &m, &sch, &[], &opts).unwrap();
        let b = run_ensemble(&c, &m, &sch, &[], &opts).unwrap();
        let p = a.points[0];
        assert_eq!(p.mean_v2.to_bits(), b.points[0].mean_v2.to_bits());
        assert!(p.mean_v.abs() < 3.0 * p.stderr_v);
        assert_eq!(p.re_omega_rel_var, 0.0);
        assert!(p.max_norm_drift < 1e-6);
    }

    #[test]
    fn no_collapse_means_no_spread_of_centres() {
        let (c, m) = setup(0.0, 1e3, 4.0);
        let sch = EraSchedule::new(&c.bg, m.k, 20.0, 1.0).unwrap();
        let opts = EnsembleOptions {
            n_traj: 8,
            ..Default::default()
        };
        let s = run_ensemble(&c, &m, &sch, &[], &opts).unwrap();
        assert_eq!(s.points[0].mean_v2, 0.0);
        assert_eq!(s.points[0].collapse_r, 1.0);
    }
}
