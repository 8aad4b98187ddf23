//! The `(r_c, λ)` parameter plane: CMB bounds on the collapse strength,
//! branch selection, a digitised laboratory overlay, and classification of
//! a log-spaced grid.
//!
//! All bound arithmetic is in `log₁₀` with rational prefactors; numbers
//! such as `e^{−10ΔN}` at `ΔN = 50` are never formed.

use std::io::Read;
use std::path::Path;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::CosmologyParams;
use crate::error::{Error, Result};
use crate::spectrum::{coefficients, Regime};
use crate::stats::fit_line;
use crate::units::{log10_si_per_planck, Constants, Dimension};

const LN_10: f64 = std::f64::consts::LN_10;

fn log10_ratio(r: Ratio<i64>) -> f64 {
    (*r.numer() as f64).log10() - (*r.denom() as f64).log10()
}

/// `log₁₀(8π^{3/2})`, the factor in `λ = γ/(8π^{3/2} r_c³)`.
fn log10_lambda_factor() -> f64 {
    (8.0 * std::f64::consts::PI.powf(1.5)).log10()
}

/// `log₁₀ λ` from `log₁₀ γ` and `log₁₀ r_c`, in any consistent units.
pub fn log10_lambda_of_gamma(log10_gamma: f64, log10_rc: f64) -> f64 {
    log10_gamma - log10_lambda_factor() - 3.0 * log10_rc
}

pub fn log10_gamma_of_lambda(log10_lambda: f64, log10_rc: f64) -> f64 {
    log10_lambda + log10_lambda_factor() + 3.0 * log10_rc
}

/// Bounds of one branch, in `log₁₀` Planck units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchBounds {
    pub log10_gamma_max: f64,
    pub log10_gamma_min: f64,
}

/// CMB bounds on `γ` at one smearing length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    /// Smearing length in Planck units.
    pub r_c: f64,
    /// Upper bound from scale invariance of the spectrum.
    pub log10_gamma_max: f64,
    /// Lower bound from the collapse requirement.
    pub log10_gamma_min: f64,
    pub branch: Regime,
    /// Both branch formulas, so the boundary `H_end r_c = e^{ΔN}` can be
    /// inspected from either side.
    pub inflation_branch: BranchBounds,
    pub radiation_branch: BranchBounds,
    pub cosmo: CosmologyParams,
}

/// Upper and lower CMB bounds on `γ` for smearing length `r_c` (Planck
/// units) and reference mass `m0`, at the pivot `ΔN = cosmo.delta_n`.
/// The collapse bound uses the same pivot, with `−kη_end = e^{−ΔN}`.
pub fn gamma_bounds(r_c: f64, m0: f64, cosmo: &CosmologyParams) -> Result<BoundSet> {
    use coefficients::*;
    if !(r_c > 0.0 && r_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("r_c must be positive, got {r_c}")));
    }
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(Error::InvalidParameter(format!("m0 must be positive, got {m0}")));
    }
    let dn = cosmo.delta_n;
    let l_m0sq = 2.0 * m0.log10();
    let l_rho = cosmo.rho_end().log10();
    let l_e1 = cosmo.epsilon1.log10();
    let l_hr = (cosmo.h_end() * r_c).log10();
    // log₁₀ e^{−ΔN} = log₁₀(−kη_end)
    let l_x = -dn / LN_10;
    let inflation_branch = BranchBounds {
        log10_gamma_max: l_m0sq - (log10_ratio(inflation_crossing_main()) + l_rho + l_e1) + l_x,
        log10_gamma_min: l_m0sq - (log10_ratio(collapse_inflation_crossing()) + l_rho) + 7.0 * l_x,
    };
    let radiation_branch = BranchBounds {
        log10_gamma_max: l_m0sq - (log10_ratio(radiation_crossing_main()) + l_rho + l_e1) + 9.0 * l_hr + 10.0 * l_x,
        log10_gamma_min: l_m0sq - (log10_ratio(collapse_radiation_crossing()) + l_rho) + 14.0 * l_x + 7.0 * l_hr,
    };
    let branch = if l_hr * LN_10 < dn {
        Regime::InflationCrossing
    } else {
        Regime::RadiationCrossing
    };
    let chosen = match branch {
        Regime::InflationCrossing => inflation_branch,
        Regime::RadiationCrossing => radiation_branch,
    };
    Ok(BoundSet {
        r_c,
        log10_gamma_max: chosen.log10_gamma_max,
        log10_gamma_min: chosen.log10_gamma_min,
        branch,
        inflation_branch,
        radiation_branch,
        cosmo: *cosmo,
    })
}

/// Whether a polygon marks a lab-excluded region or a hole in one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Counter-clockwise: the inside is excluded.
    Excluded,
    /// Clockwise: the inside is carved out of an enclosing excluded region.
    Hole,
}

/// Polygon in `(log₁₀ r_c [m], log₁₀ λ [s⁻¹])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub id: String,
    pub vertices: Vec<(f64, f64)>,
    pub orientation: Orientation,
}

impl Polygon {
    fn signed_area(v: &[(f64, f64)]) -> f64 {
        let n = v.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum::<f64>()
    }

    /// Winding number of the boundary around `p` (non-zero inside).
    pub fn winding(&self, p: (f64, f64)) -> i32 {
        let v = &self.vertices;
        let n = v.len();
        let mut w = 0;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
            if a.1 <= p.1 {
                if b.1 > p.1 && cross > 0.0 {
                    w += 1;
                }
            } else if b.1 <= p.1 && cross < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        self.winding(p) != 0
    }
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        let v = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let on_segment = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        c.0 >= a.0.min(b.0) && c.0 <= a.0.max(b.0) && c.1 >= a.1.min(b.1) && c.1 <= a.1.max(b.1)
    };
    let (d1, d2, d3, d4) = (
        orient(q1, q2, p1),
        orient(q1, q2, p2),
        orient(p1, p2, q1),
        orient(p1, p2, q2),
    );
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && on_segment(q1, q2, p1))
        || (d2 == 0 && on_segment(q1, q2, p2))
        || (d3 == 0 && on_segment(p1, p2, q1))
        || (d4 == 0 && on_segment(p1, p2, q2))
}

/// Digitised laboratory-excluded region.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabOverlay {
    pub polygons: Vec<Polygon>,
}

impl LabOverlay {
    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    /// A point is lab-excluded when it lies inside more excluded polygons
    /// than holes.
    pub fn excludes(&self, log10_rc_m: f64, log10_lambda_s: f64) -> bool {
        let p = (log10_rc_m, log10_lambda_s);
        let depth: i32 = self
            .polygons
            .iter()
            .filter(|g| g.contains(p))
            .map(|g| match g.orientation {
                Orientation::Excluded => 1,
                Orientation::Hole => -1,
            })
            .sum();
        depth > 0
    }
}

#[derive(Debug, Deserialize)]
struct OverlayRecord {
    polygon_id: String,
    vertex_index: usize,
    log10_rc_m: f64,
    log10_lambda_s: f64,
}

/// Parse overlay CSV (`polygon_id,vertex_index,log10_rc_m,log10_lambda_s`,
/// `#` comments allowed). Orientation is read from the vertex winding.
/// Vertex index and `(log10 r_c, log10 λ)` as read from one record.
type IndexedVertex = (usize, (f64, f64));

pub fn parse_lab_overlay<R: Read>(reader: R) -> Result<LabOverlay> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut groups: Vec<(String, Vec<IndexedVertex>)> = Vec::new();
    for (i, rec) in rdr.deserialize::<OverlayRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Overlay(format!("record {}: {e}", i + 1)))?;
        if !(rec.log10_rc_m.is_finite() && rec.log10_lambda_s.is_finite()) {
            return Err(Error::Overlay(format!(
                "record {} (polygon {}): non-finite coordinate",
                i + 1,
                rec.polygon_id
            )));
        }
        let pt = (rec.vertex_index, (rec.log10_rc_m, rec.log10_lambda_s));
        match groups.iter_mut().find(|g| g.0 == rec.polygon_id) {
            Some(g) => g.1.push(pt),
            None => groups.push((rec.polygon_id, vec![pt])),
        }
    }
    let mut polygons = Vec::with_capacity(groups.len());
    for (id, mut pts) in groups {
        pts.sort_by_key(|p| p.0);
        if pts.iter().enumerate().any(|(i, p)| p.0 != i) {
            return Err(Error::Overlay(format!(
                "polygon {id}: vertex indices must be 0..n-1 without gaps or repeats"
            )));
        }
        let vertices: Vec<(f64, f64)> = pts.into_iter().map(|p| p.1).collect();
        polygons.push(validate_polygon(id, vertices)?);
    }
    Ok(LabOverlay { polygons })
}

fn validate_polygon(id: String, vertices: Vec<(f64, f64)>) -> Result<Polygon> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::Overlay(format!(
            "polygon {id}: needs at least 3 vertices, got {n}"
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex; skip them
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
            let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return Err(Error::Overlay(format!(
                    "polygon {id}: self-intersection between edges {i}-{} and {j}-{}",
                    (i + 1) % n,
                    (j + 1) % n
                )));
            }
        }
    }
    let area = Polygon::signed_area(&vertices);
    if area == 0.0 {
        return Err(Error::Overlay(format!("polygon {id}: zero area")));
    }
    let orientation = if area > 0.0 {
        Orientation::Excluded
    } else {
        Orientation::Hole
    };
    Ok(Polygon {
        id,
        vertices,
        orientation,
    })
}

pub fn load_lab_overlay(path: &Path) -> Result<LabOverlay> {
    let f = std::fs::File::open(path).map_err(|e| Error::Overlay(format!("cannot open {}: {e}", path.display())))?;
    parse_lab_overlay(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    /// Allowed by the CMB and not excluded by the lab overlay.
    CmbAllowed,
    /// `γ ≥ γ_max`: non scale-invariant spectrum.
    CmbExcludedSpectrum,
    /// `γ ≤ γ_min`: no collapse by the time the CMB is emitted.
    CmbExcludedNoCollapse,
    /// Allowed by the CMB but excluded in the lab.
    LabExcluded,
    BothExcluded,
}

impl CellStatus {
    pub fn tag(self) -> &'static str {
        match self {
            CellStatus::CmbAllowed => "cmb-allowed",
            CellStatus::CmbExcludedSpectrum => "cmb-excluded-spectrum",
            CellStatus::CmbExcludedNoCollapse => "cmb-excluded-no-collapse",
            CellStatus::LabExcluded => "lab-excluded",
            CellStatus::BothExcluded => "both-excluded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCell {
    pub log10_rc_m: f64,
    pub log10_lambda_s: f64,
    pub status: CellStatus,
}

/// CMB verdict for `log₁₀ γ` against a bound set. When the bounds cross
/// (`γ_min > γ_max`) every `γ` is excluded.
pub fn cmb_status(log10_gamma: f64, b: &BoundSet, safety: f64) -> Option<CellStatus> {
    let upper = b.log10_gamma_max - safety.log10();
    if log10_gamma >= upper {
        Some(CellStatus::CmbExcludedSpectrum)
    } else if log10_gamma <= b.log10_gamma_min || b.log10_gamma_min > upper {
        Some(CellStatus::CmbExcludedNoCollapse)
    } else {
        None
    }
}

pub fn classify(cmb: Option<CellStatus>, lab_excluded: bool) -> CellStatus {
    match (cmb, lab_excluded) {
        (None, false) => CellStatus::CmbAllowed,
        (None, true) => CellStatus::LabExcluded,
        (Some(_), true) => CellStatus::BothExcluded,
        (Some(s), false) => s,
    }
}

/// Grid specification in SI log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub log10_rc_m: [f64; 2],
    pub log10_lambda_s: [f64; 2],
    pub n_rc: usize,
    pub n_lambda: usize,
    /// Cells need `γ < γ_max/safety` to count as scale invariant.
    pub safety: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            log10_rc_m: [-12.0, 2.0],
            log10_lambda_s: [-240.0, 0.0],
            n_rc: 200,
            n_lambda: 200,
            safety: 1.0,
        }
    }
}

/// One column of the boundary polylines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub log10_rc_m: f64,
    /// Planck units.
    pub log10_gamma_max: f64,
    pub log10_gamma_min: f64,
    /// s⁻¹
    pub log10_lambda_max: f64,
    pub log10_lambda_min: f64,
    pub branch: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No cell is allowed by both the CMB and the lab overlay.
    Incompatible,
    Compatible,
    NoLabData,
}

impl Verdict {
    pub fn tag(self) -> &'static str {
        match self {
            Verdict::Incompatible => "incompatible",
            Verdict::Compatible => "compatible",
            Verdict::NoLabData => "no-lab-data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionMap {
    pub spec: ScanSpec,
    /// Row-major: `r_c` outer, `λ` inner.
    pub cells: Vec<ExclusionCell>,
    pub boundary: Vec<BoundaryPoint>,
    /// `log₁₀ r_c [m]` where `H_end r_c = e^{ΔN}`.
    pub log10_rc_break_m: f64,
    pub jointly_allowed: usize,
    pub verdict: Verdict,
}

fn linspace(r: [f64; 2], n: usize, i: usize) -> f64 {
    r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64
}

/// Classify every cell of the grid.
pub fn scan_grid(
    spec: &ScanSpec,
    cosmo: &CosmologyParams,
    m0: f64,
    constants: &Constants,
    overlay: Option<&LabOverlay>,
) -> Result<ExclusionMap> {
    if spec.n_rc < 2 || spec.n_lambda < 2 {
        return Err(Error::InvalidParameter(
            "scan resolution must be at least 2 per axis".into(),
        ));
    }
    for (name, r) in [("log10_rc_m", spec.log10_rc_m), ("log10_lambda_s", spec.log10_lambda_s)] {
        if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
            return Err(Error::InvalidParameter(format!(
                "{name} range must be increasing and finite"
            )));
        }
    }
    if !(spec.safety >= 1.0 && spec.safety.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "safety factor must be >= 1, got {}",
            spec.safety
        )));
    }
    let l_len = log10_si_per_planck(Dimension::Length, constants);
    let l_rate = log10_si_per_planck(Dimension::Rate, constants);
    let columns: Vec<(BoundaryPoint, Vec<ExclusionCell>)> = (0..spec.n_rc)
        .into_par_iter()
        .map(|i| {
            let lrc_m = linspace(spec.log10_rc_m, spec.n_rc, i);
            let lrc_p = lrc_m - l_len;
            let b = gamma_bounds(10f64.powf(lrc_p), m0, cosmo)?;
            let to_si = |lg: f64| log10_lambda_of_gamma(lg, lrc_p) + l_rate;
            let bp = BoundaryPoint {
                log10_rc_m: lrc_m,
                log10_gamma_max: b.log10_gamma_max,
                log10_gamma_min: b.log10_gamma_min,
                log10_lambda_max: to_si(b.log10_gamma_max),
                log10_lambda_min: to_si(b.log10_gamma_min),
                branch: b.branch,
            };
            let cells = (0..spec.n_lambda)
                .map(|j| {
                    let llam_s = linspace(spec.log10_lambda_s, spec.n_lambda, j);
                    let lg = log10_gamma_of_lambda(llam_s - l_rate, lrc_p);
                    let lab = overlay.is_some_and(|o| o.excludes(lrc_m, llam_s));
                    ExclusionCell {
                        log10_rc_m: lrc_m,
                        log10_lambda_s: llam_s,
                        status: classify(cmb_status(lg, &b, spec.safety), lab),
                    }
                })
                .collect();
            Ok((bp, cells))
        })
        .collect::<Result<_>>()?;
    let mut boundary = Vec::with_capacity(spec.n_rc);
    let mut cells = Vec::with_capacity(spec.n_rc * spec.n_lambda);
    for (bp, cs) in columns {
        boundary.push(bp);
        cells.extend(cs);
    }
    let jointly_allowed = cells.iter().filter(|c| c.status == CellStatus::CmbAllowed).count();
    let verdict = match overlay {
        Some(o) if !o.is_empty() => {
            if jointly_allowed == 0 {
                Verdict::Incompatible
            } else {
                Verdict::Compatible
            }
        }
        _ => Verdict::NoLabData,
    };
    let log10_rc_break_m = (cosmo.delta_n / LN_10 - cosmo.h_end().log10()) + l_len;
    Ok(ExclusionMap {
        spec: *spec,
        cells,
        boundary,
        log10_rc_break_m,
        jointly_allowed,
        verdict,
    })
}

/// Log-log slopes of the boundary curves on each branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySlopes {
    pub gamma_max_inflation: f64,
    pub gamma_max_radiation: f64,
    pub gamma_min_inflation: f64,
    pub gamma_min_radiation: f64,
    /// First grid `log₁₀ r_c` on the radiation-crossing branch.
    pub observed_break_m: f64,
}

pub fn boundary_slopes(boundary: &[BoundaryPoint]) -> Result<BoundarySlopes> {
    let fit = |branch: Regime, f: fn(&BoundaryPoint) -> f64| -> Result<f64> {
        let pts: Vec<&BoundaryPoint> = boundary.iter().filter(|p| p.branch == branch).collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.log10_rc_m).collect();
        let ys: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        fit_line(&xs, &ys)
            .map(|l| l.slope)
            .ok_or_else(|| Error::Fit(format!("fewer than two boundary points on the {} branch", branch.tag())))
    };
    let observed_break_m = boundary
        .iter()
        .find(|p| p.branch == Regime::RadiationCrossing)
        .map(|p| p.log10_rc_m)
        .ok_or_else(|| Error::Fit("scan never reaches the radiation-crossing branch".into()))?;
    Ok(BoundarySlopes {
        gamma_max_inflation: fit(Regime::InflationCrossing, |p| p.log10_gamma_max)?,
        gamma_max_radiation: fit(Regime::RadiationCrossing, |p| p.log10_gamma_max)?,
        gamma_min_inflation: fit(Regime::InflationCrossing, |p| p.log10_gamma_min)?,
        gamma_min_radiation: fit(Regime::RadiationCrossing, |p| p.log10_gamma_min)?,
        observed_break_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "polygon_id,vertex_index,log10_rc_m,log10_lambda_s\nsq,0,0,0\nsq,1,1,0\nsq,2,1,1\nsq,3,0,1\n";

    fn fiducial() -> (CosmologyParams, f64, Constants) {
        let c = Constants::default();
        (CosmologyParams::fiducial(), c.amu_planck(), c)
    }

    #[test]
    fn fiducial_bounds_match_high_precision_values() {
        // 50-digit evaluation of the four bound formulas (CODATA 2018, m0 = 1 u)
        let (cm, m0, c) = fiducial();
        let l_len = log10_si_per_planck(Dimension::Length, &c);
        let l_rate = log10_si_per_planck(Dimension::Rate, &c);
        let cases = [
            (
                -7.0,
                Regime::RadiationCrossing,
                -45.252397759700596,
                -179.4982035466029,
                -85.607132217437429,
                -219.85293800433974,
            ),
            (
                -9.0,
                Regime::InflationCrossing,
                -48.89972519895957,
                -182.37639548540781,
                -83.254459656696403,
                -216.73112994314464,
            ),
            (
                0.0,
                Regime::RadiationCrossing,
                17.747602240299404,
                -130.4982035466029,
                -43.607132217437429,
                -191.85293800433974,
            ),
        ];
        for (lrc, branch, gmax, gmin, lmax, lmin) in cases {
            let b = gamma_bounds(10f64.powf(lrc - l_len), m0, &cm).unwrap();
            assert_eq!(b.branch, branch);
            assert!((b.log10_gamma_max - gmax).abs() < 1e-9, "{lrc}: {}", b.log10_gamma_max);
            assert!((b.log10_gamma_min - gmin).abs() < 1e-9);
            let lrc_p = lrc - l_len;
            assert!((log10_lambda_of_gamma(b.log10_gamma_max, lrc_p) + l_rate - lmax).abs() < 1e-9);
            assert!((log10_lambda_of_gamma(b.log10_gamma_min, lrc_p) + l_rate - lmin).abs() < 1e-9);
        }
    }

    #[test]
    fn epsilon_scaling_law() {
        let (cm, m0, _) = fiducial();
        let cm2 = CosmologyParams {
            epsilon1: cm.epsilon1 * 10.0,
            ..cm
        };
        for rc in [1e20, 1e40] {
            let (a, b) = (gamma_bounds(rc, m0, &cm).unwrap(), gamma_bounds(rc, m0, &cm2).unwrap());
            assert!((a.log10_gamma_max - b.log10_gamma_max - 1.0).abs() < 1e-12);
            assert_eq!(a.log10_gamma_min, b.log10_gamma_min);
        }
    }

    #[test]
    fn square_containment() {
        let o = parse_lab_overlay(SQUARE.as_bytes()).unwrap();
        assert_eq!(o.polygons[0].orientation, Orientation::Excluded);
        assert!(o.excludes(0.5, 0.5));
        assert!(!o.excludes(1.5, 0.5));
        assert!(!o.excludes(0.5, -0.1));
        assert!(!o.excludes(-3.0, 2.0));
    }

    #[test]
    fn holes_and_bad_records() {
        let hole =
            "polygon_id,vertex_index,log10_rc_m,log10_lambda_s\nout,0,-2,-2\nout,1,2,-2\nout,2,2,2\nout,3,-2,2\n\
                    in,0,-1,-1\nin,1,-1,1\nin,2,1,1\nin,3,1,-1\n";
        let o = parse_lab_overlay(hole.as_bytes()).unwrap();
        assert_eq!(o.polygons[1].orientation, Orientation::Hole);
        assert!(o.excludes(1.5, 0.0));
        assert!(!o.excludes(0.0, 0.0));
        let bowtie = "polygon_id,vertex_index,log10_rc_m,log10_lambda_s\nb,0,0,0\nb,1,1,1\nb,2,1,0\nb,3,0,1\n";
        let e = parse_lab_overlay(bowtie.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("self-intersection"), "{e}");
        let bad = "polygon_id,vertex_index,log10_rc_m,log10_lambda_s\nx,0,0,0\nx,1,oops,1\n";
        let e = parse_lab_overlay(bad.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("record 2"), "{e}");
        let empty = parse_lab_overlay("polygon_id,vertex_index,log10_rc_m,log10_lambda_s\n".as_bytes()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn small_grid_and_verdicts() {
        let (cm, m0, c) = fiducial();
        let spec = ScanSpec {
            n_rc: 2,
            n_lambda: 2,
            ..ScanSpec::default()
        };
        let m = scan_grid(&spec, &cm, m0, &c, None).unwrap();
        assert_eq!(m.cells.len(), 4);
        assert_eq!(m.verdict, Verdict::NoLabData);
        let empty = LabOverlay::default();
        let m = scan_grid(&spec, &cm, m0, &c, Some(&empty)).unwrap();
        assert!(m
            .cells
            .iter()
            .all(|c| c.status != CellStatus::LabExcluded && c.status != CellStatus::BothExcluded));
        assert_eq!(m.verdict, Verdict::NoLabData);
    }

    #[test]
    fn crossed_bounds_exclude_everything() {
        let (cm, m0, _) = fiducial();
        let mut b = gamma_bounds(1e20, m0, &cm).unwrap();
        b.log10_gamma_min = b.log10_gamma_max + 1.0;
        for lg in [
            b.log10_gamma_max - 5.0,
            b.log10_gamma_max + 0.5,
            b.log10_gamma_min + 5.0,
        ] {
            assert!(cmb_status(lg, &b, 1.0).is_some());
        }
    }
}
