//! Free (γ = 0) mode functions, classical propagators and Green functions,
//! the transition map at `η_end`, and the free Gaussian width `Ω₀`.
//!
//! Everything here is closed-form. Super-Hubble evaluation is written so that
//! no two large terms are subtracted: the decaying-mode coefficient of the
//! radiation-era mode and the combination `α − 2β ImΩ₀` both vanish at
//! leading order, and naïve evaluation loses all digits for `x ≲ 10⁻⁵`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::{Background, Era};
use crate::coupling::Coupling;

/// How `(v, p)` are carried across the instantaneous transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MatchingRule {
    /// `ζ = v/z` and its conjugate momentum continuous: the canonical map
    /// `v → r v`, `p → p/r + ℋ(r − 1/r) v` with `r = z_rad/z_inf = √(6/ε₁)`.
    #[default]
    CurvatureContinuous,
    /// `v` and `p` continuous (identity map).
    FieldContinuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeMode {
    pub g0: Complex64,
    pub g0_prime: Complex64,
    /// `W = g′g* − g g*′`; equals `i` for the Bunch–Davies normalisation.
    pub wronskian: Complex64,
}

/// 2×2 real matrix acting on `(v, p)`.
pub type Mat2 = [[f64; 2]; 2];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
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

/// `M Σ Mᵀ` for a symmetric covariance stored as `(Σvv, Σvp, Σpp)`.
pub fn congruence(m: &Mat2, s: [f64; 3]) -> [f64; 3] {
    let (svv, svp, spp) = (s[0], s[1], s[2]);
    let t00 = m[0][0] * svv + m[0][1] * svp;
    let t01 = m[0][0] * svp + m[0][1] * spp;
    let t10 = m[1][0] * svv + m[1][1] * svp;
    let t11 = m[1][0] * svp + m[1][1] * spp;
    [
        t00 * m[0][0] + t01 * m[0][1],
        t00 * m[1][0] + t01 * m[1][1],
        t10 * m[1][0] + t11 * m[1][1],
    ]
}

/// `sin d − d cos d`, accurate for small `d`.
pub fn f3(d: f64) -> f64 {
    if d.abs() < 0.25 {
        let d2 = d * d;
        d * d2 * (1.0 / 3.0 + d2 * (-1.0 / 30.0 + d2 * (1.0 / 840.0 + d2 * (-1.0 / 45360.0 + d2 / 3991680.0))))
    } else {
        d.sin() - d * d.cos()
    }
}

/// Free-mode data for one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modes {
    pub bg: Background,
    pub k: f64,
    pub rule: MatchingRule,
    /// `−kη_end`
    pub x_end: f64,
    /// `z_rad/z_inf` at the transition (1 for the field-continuous rule).
    pub r: f64,
    /// Radiation-era mode `g = A sin θ + B cos θ`, `θ = k(η − η_r)/√3`.
    pub a_coef: Complex64,
    pub b_coef: Complex64,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn bd_unit(x: f64) -> (Complex64, Complex64) {
    // k = 1 Bunch–Davies mode at η = −x and its η-derivative
    let ph = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -x);
    let g = ph * Complex64::new(1.0, -1.0 / x);
    let gp = ph * Complex64::new(1.0 / x, 1.0 - 1.0 / (x * x));
    (g, gp)
}

impl Modes {
    pub fn new(bg: Background, k: f64, rule: MatchingRule) -> Self {
        let x = -k * bg.eta_end();
        let r = match rule {
            MatchingRule::CurvatureContinuous => (6.0 / bg.cosmo.epsilon1).sqrt(),
            MatchingRule::FieldContinuous => 1.0,
        };
        let (g1, _) = bd_unit(x);
        let t = x / SQRT3;
        let (s, c) = t.sin_cos();
        let ph = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -x);
        let i = Complex64::i();
        let a1 = g1 * (r * (s + SQRT3 * c / x)) + i * ph * (SQRT3 * c / r);
        let b1 = -g1 * (r * f3(t) / t) - i * ph * (SQRT3 * s / r);
        let sk = k.sqrt();
        Modes {
            bg,
            k,
            rule,
            x_end: x,
            r,
            a_coef: a1 / sk,
            b_coef: b1 / sk,
        }
    }

    /// Transition map on `(v, p)`.
    pub fn matching_map(&self) -> Mat2 {
        let r = self.r;
        let hc = self.k / self.x_end; // ℋ at η_end
        [[r, 0.0], [hc * (r - 1.0 / r), 1.0 / r]]
    }

    /// `x` during inflation, `y` during radiation.
    pub fn ratio(&self, era: Era, eta: f64) -> f64 {
        self.bg.horizon_ratio(era, self.k, eta)
    }

    pub fn free_mode(&self, era: Era, eta: f64) -> FreeMode {
        let k = self.k;
        let (g0, g0_prime) = match era {
            Era::Inflation => {
                let (g, gp) = bd_unit(-k * eta);
                (g / k.sqrt(), gp * k.sqrt())
            }
            Era::Radiation => {
                let th = self.ratio(era, eta) / SQRT3;
                let (s, c) = th.sin_cos();
                (
                    self.a_coef * s + self.b_coef * c,
                    (self.a_coef * c - self.b_coef * s) * (k / SQRT3),
                )
            }
        };
        let wronskian = g0_prime * g0.conj() - g0 * g0_prime.conj();
        FreeMode {
            g0,
            g0_prime,
            wronskian,
        }
    }

    /// `|g⁰|²` without forming the complex mode (exact in inflation).
    pub fn mode_norm2(&self, era: Era, eta: f64) -> f64 {
        match era {
            Era::Inflation => {
                let x = -self.k * eta;
                (1.0 + 1.0 / (x * x)) / (2.0 * self.k)
            }
            Era::Radiation => self.free_mode(era, eta).g0.norm_sqr(),
        }
    }

    /// Deviation `Re(g′/g) − k/y` in radiation, free of cancellation.
    fn radiation_du(&self, eta: f64) -> f64 {
        let y = self.ratio(Era::Radiation, eta);
        let th = y / SQRT3;
        let (s, c) = th.sin_cos();
        let g = self.a_coef * s + self.b_coef * c;
        let num = -self.a_coef * (SQRT3 * f3(th)) - self.b_coef * (y * s + SQRT3 * c);
        self.k * (num / (g * (SQRT3 * y))).re
    }

    /// Free Gaussian width `Ω₀ = g⁰′/(2i g⁰)`.
    pub fn omega0(&self, era: Era, eta: f64) -> Complex64 {
        let k = self.k;
        match era {
            Era::Inflation => {
                let x = -k * eta;
                let d = 1.0 + x * x;
                Complex64::new(k * x * x / (2.0 * d), -k / (2.0 * x * d))
            }
            Era::Radiation => {
                let y = self.ratio(era, eta);
                let re = 1.0 / (4.0 * self.mode_norm2(era, eta));
                let im = -0.5 * (k / y + self.radiation_du(eta));
                Complex64::new(re, im)
            }
        }
    }

    /// `α − 2β ImΩ₀`, the combination that drives the width correction and
    /// the stochastic kicks of the wavepacket centre.
    pub fn drive(&self, c: &Coupling, era: Era, eta: f64) -> f64 {
        let bg = &c.bg;
        let sm = c.smearing_g(era, self.k, eta);
        let pf = c.p_factor_g(era, self.k, eta);
        let a = bg.scale_factor_g(era, eta);
        let z = bg.pump_g(era, eta);
        match era {
            Era::Inflation => {
                let x = -self.k * eta;
                let h = bg.cosmo.h_inf;
                let e1 = bg.cosmo.epsilon1;
                let e2 = match c.bracket {
                    crate::coupling::Bracket::Full => bg.cosmo.epsilon2,
                    crate::coupling::Bracket::Leading => 0.0,
                };
                let br = -8.0 - e2 + (2.0 + 6.0 * e1) / (1.0 + x * x) + 3.0 * e1 * e2 / (x * x);
                h * h * e1 / z * sm * br * pf
            }
            Era::Radiation => {
                let y = self.ratio(era, eta);
                let du = self.radiation_du(eta) / self.k;
                let br = -1.0 / (y * y) + (1.0 / y - 6.0 / (y * y * y)) * du;
                12.0 * self.k * self.k * sm / (a * a * z) * br * pf
            }
        }
    }

    /// Classical propagator `U(η, η̄)` within one era, mapping `(v, p)(η̄)`
    /// to `(v, p)(η)`.
    pub fn propagator_within(&self, era: Era, eta: f64, eta_bar: f64) -> Mat2 {
        let k = self.k;
        match era {
            Era::Inflation => {
                let x = -k * eta;
                let xb = -k * eta_bar;
                let d = xb - x;
                let (s, c) = d.sin_cos();
                let f = f3(d);
                let uvp = (s + f / (x * xb)) / k;
                let uvv = c + (d * s * xb - f) / (x * xb * xb);
                let upp = c + d * s / (x * xb) + f / (x * x * xb);
                let upv = k * (-s + ((s + d * c) * xb - d * s) / (x * xb * xb) + (d * s * xb - f) / (x * x * xb * xb));
                [[uvv, uvp], [upv, upp]]
            }
            Era::Radiation => {
                let th = k * (eta - eta_bar) / SQRT3;
                let (s, c) = th.sin_cos();
                [[c, SQRT3 * s / k], [-k * s / SQRT3, c]]
            }
        }
    }

    /// Propagator for arbitrary `η ≥ η̄`, composing across the transition.
    pub fn propagator(&self, eta: f64, eta_bar: f64) -> Mat2 {
        let e = self.bg.eta_end();
        let era = self.bg.era_of(eta);
        let era_b = self.bg.era_of(eta_bar);
        if era == era_b {
            self.propagator_within(era, eta, eta_bar)
        } else {
            let ui = self.propagator_within(Era::Inflation, e, eta_bar);
            let ur = self.propagator_within(Era::Radiation, eta, e);
            mat_mul(&ur, &mat_mul(&self.matching_map(), &ui))
        }
    }

    /// Retarded Green function `G(η, η̄)`: zero for `η < η̄`, `∂_η G = 1` at coincidence.
    pub fn green_function(&self, eta: f64, eta_bar: f64) -> f64 {
        if eta < eta_bar {
            0.0
        } else {
            self.propagator(eta, eta_bar)[0][1]
        }
    }
}

/// Super-Hubble limit of the inflationary Green function, `(η³ − η̄³)/(3ηη̄)`.
pub fn green_inflation_super_hubble(eta: f64, eta_bar: f64) -> f64 {
    if eta < eta_bar {
        0.0
    } else {
        (eta.powi(3) - eta_bar.powi(3)) / (3.0 * eta * eta_bar)
    }
}

/// Leading super-Hubble radiation mode as usually quoted,
/// `g = −3i sin θ/(√(kε₁)(kη_end)²)`; the exact matched mode reduces to it
/// for `−kη_end → 0` under [`MatchingRule::CurvatureContinuous`].
pub fn radiation_mode_leading(bg: &Background, k: f64, eta: f64) -> Complex64 {
    let th = bg.horizon_ratio(Era::Radiation, k, eta) / SQRT3;
    let ke = k * bg.eta_end();
    Complex64::new(0.0, -3.0 * th.sin() / ((k * bg.cosmo.epsilon1).sqrt() * ke * ke))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::CosmologyParams;

    fn modes(rule: MatchingRule, dn: f64) -> Modes {
        let c = CosmologyParams {
            delta_n: dn,
            ..CosmologyParams::fiducial()
        };
        Modes::new(Background::new(c), c.k_ref(), rule)
    }

    #[test]
    fn f3_series_matches_direct_at_switch() {
        let d = 0.2499999999_f64;
        let direct = d.sin() - d * d.cos();
        assert!((f3(d) / direct - 1.0).abs() < 1e-13);
    }

    #[test]
    fn propagator_transports_mode_functions() {
        let m = modes(MatchingRule::CurvatureContinuous, 3.0);
        let k = m.k;
        let e = m.bg.eta_end();
        let pairs = [(0.3 / k, 2.0 / k), (1.5 / k, 40.0 / k), (0.8 / k, 0.9 / k)];
        let mut cases: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (-a, -b)).collect();
        cases.push((e + 3.0 / k, -2.0 / k));
        cases.push((e + 3.0 / k, e + 0.5 / k));
        for (eta, eta_b) in cases {
            let u = m.propagator(eta, eta_b);
            let f = m.free_mode(m.bg.era_of(eta), eta);
            let fb = m.free_mode(m.bg.era_of(eta_b), eta_b);
            let g = fb.g0 * u[0][0] + fb.g0_prime * u[0][1];
            let gp = fb.g0 * u[1][0] + fb.g0_prime * u[1][1];
            assert!((g - f.g0).norm() < 1e-9 * f.g0.norm(), "{eta} {eta_b}");
            assert!((gp - f.g0_prime).norm() < 1e-9 * f.g0_prime.norm());
            let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
            assert!((det - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wronskian_is_i_in_both_eras() {
        for rule in [MatchingRule::CurvatureContinuous, MatchingRule::FieldContinuous] {
            let m = modes(rule, 8.0);
            let e = m.bg.eta_end();
            let w1 = m.free_mode(Era::Inflation, 30.0 * e).wronskian;
            let w2 = m.free_mode(Era::Radiation, e + 5.0 / m.k).wronskian;
            assert!((w1 - Complex64::i()).norm() < 1e-12);
            assert!((w2 - Complex64::i()).norm() < 1e-8, "{w2}");
        }
    }

    #[test]
    fn radiation_mode_continuous_with_mapped_inflation_mode() {
        let m = modes(MatchingRule::CurvatureContinuous, 2.0);
        let e = m.bg.eta_end();
        let fi = m.free_mode(Era::Inflation, e);
        let fr = m.free_mode(Era::Radiation, e);
        let mm = m.matching_map();
        let gv = fi.g0 * mm[0][0];
        let gp = fi.g0 * mm[1][0] + fi.g0_prime * mm[1][1];
        assert!((fr.g0 - gv).norm() < 1e-12 * gv.norm());
        assert!((fr.g0_prime - gp).norm() < 1e-12 * gp.norm());
    }

    #[test]
    fn omega0_consistent_with_mode_ratio() {
        let m = modes(MatchingRule::CurvatureContinuous, 2.0);
        let e = m.bg.eta_end();
        for eta in [3.0 * e, e + 0.5 / m.k, e + 20.0 / m.k] {
            let era = m.bg.era_of(eta);
            let f = m.free_mode(era, eta);
            let direct = f.g0_prime / (2.0 * Complex64::i() * f.g0);
            let om = m.omega0(era, eta);
            assert!((om - direct).norm() < 1e-10 * direct.norm(), "{om} {direct}");
        }
    }
}
