//! Adaptive Dormand–Prince 5(4) integrator with exact landing on output times.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the first derivative.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
    /// If positive, each component's error scale is floored at this fraction
    /// of the largest magnitude that component has reached so far. Keeps
    /// relative control meaningful for quantities that grow from zero and
    /// later change sign.
    pub running_floor: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-14,
            h_init: None,
            h_min: 1e-14,
            max_steps: 2_000_000,
            running_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = f(t, y)` forward from `t0`, returning the state at every
/// entry of `t_out` (non-decreasing, all `>= t0`).
pub fn solve<F>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], opts: &OdeOptions) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(t_out.len());
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut runmax: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let (mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    f(t, &y, &mut k1);

    let span = t_out.last().map(|&te| te - t0).unwrap_or(0.0);
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let d0 = rms_scaled(&y, &y, &runmax, opts);
            let d1 = rms_scaled(&k1, &y, &runmax, opts);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(span.max(1e-12))
        }
    };
    let mut err_prev: f64 = 1e-4;

    for &target in t_out {
        if target < t - 1e-15 * t.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "output time {target} precedes current time {t}"
            )));
        }
        while t < target {
            if stats.accepted + stats.rejected > opts.max_steps {
                return Err(Error::Integration {
                    t,
                    reason: "maximum number of steps exceeded".into(),
                    last_state: y.clone(),
                });
            }
            let mut last = false;
            if t + h >= target || (target - t - h) < 1e-12 * h {
                h = target - t;
                last = true;
            }
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t + h, &ynew, &mut k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = scale(y[i], ynew[i], runmax[i], opts);
                err += (e / sc).powi(2);
            }
            err = (err / n as f64).sqrt();
            if !err.is_finite() {
                if h.abs() < opts.h_min {
                    return Err(Error::Integration {
                        t,
                        reason: "non-finite derivative".into(),
                        last_state: y.clone(),
                    });
                }
                h *= 0.25;
                stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + h };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                for i in 0..n {
                    runmax[i] = runmax[i].max(y[i].abs());
                }
                stats.accepted += 1;
                // PI controller (Gustafsson); exponents for a 5th-order pair.
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                err_prev = err.max(1e-4);
                let hn = h * fac.clamp(0.2, 5.0);
                if !last {
                    h = hn;
                } else {
                    h = hn.max(h);
                }
            } else {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h.abs() < opts.h_min {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size underflow (h = {h:.3e})"),
                        last_state: y.clone(),
                    });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn scale(y: f64, ynew: f64, runmax: f64, opts: &OdeOptions) -> f64 {
    let m = y.abs().max(ynew.abs()).max(opts.running_floor * runmax);
    opts.atol + opts.rtol * m
}

fn rms_scaled(v: &[f64], y: &[f64], runmax: &[f64], opts: &OdeOptions) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .zip(runmax)
        .map(|((vi, yi), ri)| (vi / scale(*yi, *yi, *ri, opts)).powi(2))
        .sum();
    (s / v.len().max(1) as f64).sqrt()
}
