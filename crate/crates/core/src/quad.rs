//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector integrands.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-11,
            abs_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    val: Vec<f64>,
    err: f64,
}

fn kronrod<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv = vec![0.0; dim];
    let mut fw = vec![0.0; dim];
    let mut rk = vec![0.0; dim];
    let mut rg = vec![0.0; dim];
    f(c, &mut fv);
    for d in 0..dim {
        rk[d] = WGK[7] * fv[d];
        rg[d] = WG[3] * fv[d];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        f(c - dx, &mut fv);
        f(c + dx, &mut fw);
        for d in 0..dim {
            let s = fv[d] + fw[d];
            rk[d] += WGK[j] * s;
            if j % 2 == 1 {
                rg[d] += WG[j / 2] * s;
            }
        }
    }
    let val: Vec<f64> = rk.iter().map(|v| v * h).collect();
    let err: Vec<f64> = rk.iter().zip(&rg).map(|(k, g)| ((k - g) * h).abs()).collect();
    (val, err)
}

/// Integrate a `dim`-component integrand over consecutive `breaks`
/// (at least two points). The error criterion is applied to the largest
/// component magnitude.
pub fn integrate<F>(mut f: F, breaks: &[f64], dim: usize, opts: &QuadOptions) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut pieces: Vec<Piece> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (val, err) = kronrod(&mut f, w[0], w[1], dim);
            let e = err.iter().cloned().fold(0.0, f64::max);
            pieces.push(Piece {
                a: w[0],
                b: w[1],
                val,
                err: e,
            });
        }
    }
    loop {
        let mut total = vec![0.0; dim];
        let mut err_tot = 0.0;
        for p in &pieces {
            for (t, v) in total.iter_mut().zip(&p.val) {
                *t += v;
            }
            err_tot += p.err;
        }
        let mag = total.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let tol = opts.abs_tol.max(opts.rel_tol * mag);
        if err_tot <= tol || pieces.is_empty() {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                achieved: err_tot / mag.max(f64::MIN_POSITIVE),
                requested: opts.rel_tol,
            });
        }
        let (imax, _) = pieces.iter().enumerate().fold(
            (0, -1.0),
            |(bi, be), (i, p)| if p.err > be { (i, p.err) } else { (bi, be) },
        );
        let p = pieces.swap_remove(imax);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature {
                achieved: err_tot / mag.max(f64::MIN_POSITIVE),
                requested: opts.rel_tol,
            });
        }
        for (a, b) in [(p.a, m), (m, p.b)] {
            let (val, err) = kronrod(&mut f, a, b, dim);
            let e = err.iter().cloned().fold(0.0, f64::max);
            pieces.push(Piece { a, b, val, err: e });
        }
    }
}
