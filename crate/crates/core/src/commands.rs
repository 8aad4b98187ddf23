//! The four front-end commands, output emission and run manifests.
//!
//! Every command writes its tables plus `manifest.json`, which records the
//! resolved configuration (in Planck units), the command, seed and code
//! version. Passing that manifest back as `--config` reproduces the
//! tables byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::background::{Background, Era, EraSchedule};
use crate::config::{parse_config, EvaluateAt, Format, RunConfig};
use crate::coupling::Coupling;
use crate::ensemble::{run_ensemble, EnsembleOptions};
use crate::error::{Error, Result};
use crate::exclusion::{boundary_slopes, load_lab_overlay, scan_grid, BoundarySlopes};
use crate::modes::Modes;
use crate::moments::{integrate_moments, MomentOptions, MomentState};
use crate::ode::OdeOptions;
use crate::riccati::{integrate_omega, OmegaOptions};
use crate::spectrum::{fit_correction_index, spectrum, IndexFit, SpectrumOptions, SpectrumPoint};
use crate::units::Constants;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ModeEvolve,
    Spectrum,
    Ensemble,
    Exclusion,
}

impl Command {
    pub fn tag(self) -> &'static str {
        match self {
            Command::ModeEvolve => "mode-evolve",
            Command::Spectrum => "spectrum",
            Command::Ensemble => "ensemble",
            Command::Exclusion => "exclusion",
        }
    }
}

/// Options shared by all commands; command-line values win over the
/// configuration file.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub constants: Option<PathBuf>,
    /// `section.key=value` overrides.
    pub set: Vec<String>,
}

/// Sidecar written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub config: RunConfig,
    pub constants: Constants,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Report {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
    pub summary: serde_json::Value,
}

/// Load a TOML config or a manifest, then apply command-line overrides.
pub fn load_config(cmd: Command, g: &GlobalOptions) -> Result<(RunConfig, Option<PathBuf>)> {
    let (mut cfg, base) = match &g.config {
        None => (parse_config("", &g.set)?, None),
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = if path.extension().is_some_and(|e| e == "json") {
                let m: Manifest = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{} is not a run manifest: {e}", path.display())))?;
                if m.command != cmd {
                    return Err(Error::Usage(format!(
                        "manifest was written by `{}`, not `{}`",
                        m.command.tag(),
                        cmd.tag()
                    )));
                }
                let toml_text = toml::to_string(&m.config).map_err(|e| Error::Config(e.to_string()))?;
                parse_config(&toml_text, &g.set)?
            } else {
                parse_config(&text, &g.set)?
            };
            (cfg, path.parent().map(Path::to_path_buf))
        }
    };
    if let Some(f) = g.format {
        cfg.output.format = f;
    }
    if let Some(o) = &g.out {
        cfg.output.path = o.to_string_lossy().into_owned();
    }
    if let Some(s) = g.seed {
        cfg.numerics.seed = s;
    }
    Ok((cfg, base))
}

pub fn load_constants(g: &GlobalOptions) -> Result<Constants> {
    match &g.constants {
        Some(p) => Constants::load(p),
        None => Ok(Constants::default()),
    }
}

/// Run `cmd` with the configured thread count.
pub fn run(cmd: Command, g: &GlobalOptions) -> Result<Report> {
    let (cfg, base) = load_config(cmd, g)?;
    let constants = load_constants(g)?;
    match g.threads {
        Some(0) => Err(Error::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot build thread pool: {e}")))?
            .install(|| execute(cmd, cfg, base.as_deref(), &constants)),
        None => execute(cmd, cfg, base.as_deref(), &constants),
    }
}

/// Run a command on an already loaded configuration.
pub fn execute(cmd: Command, mut cfg: RunConfig, base: Option<&Path>, constants: &Constants) -> Result<Report> {
    // overlay paths are made absolute so manifests replay from anywhere
    if let Some(ov) = cfg.exclusion.overlay.clone() {
        let p = PathBuf::from(&ov);
        let p = if p.is_relative() {
            base.map_or(p.clone(), |b| b.join(&p))
        } else {
            p
        };
        let p = fs::canonicalize(&p).map_err(|e| Error::Overlay(format!("cannot open {}: {e}", p.display())))?;
        cfg.exclusion.overlay = Some(p.to_string_lossy().into_owned());
    }
    let cfg = cfg.normalized(constants)?;
    let out_dir = PathBuf::from(&cfg.output.path);
    fs::create_dir_all(&out_dir)?;
    let mut w = Writer {
        dir: out_dir.clone(),
        format: cfg.output.format,
        files: Vec::new(),
    };
    let (lines, summary) = match cmd {
        Command::ModeEvolve => mode_evolve(&cfg, constants, &mut w)?,
        Command::Spectrum => cmd_spectrum(&cfg, constants, &mut w)?,
        Command::Ensemble => cmd_ensemble(&cfg, constants, &mut w)?,
        Command::Exclusion => cmd_exclusion(&cfg, constants, &mut w)?,
    };
    let manifest = Manifest {
        tool: "csl-modes".into(),
        version: VERSION.into(),
        command: cmd,
        seed: cfg.numerics.seed,
        config: cfg.clone(),
        constants: *constants,
        outputs: w.files.clone(),
        summary: summary.clone(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(Report {
        out_dir,
        files: w.files,
        lines,
        summary,
    })
}

struct Writer {
    dir: PathBuf,
    format: Format,
    files: Vec<String>,
}

impl Writer {
    /// Write `rows` as `<stem>.csv` or `<stem>.json`.
    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        let name = match self.format {
            Format::Csv => format!("{stem}.csv"),
            Format::Json => format!("{stem}.json"),
        };
        let path = self.dir.join(&name);
        match self.format {
            Format::Csv => write_csv(&path, rows)?,
            Format::Json => write_json(&path, &rows)?,
        }
        self.files.push(name);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Comma-separated, header row, LF line endings.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Key order follows field order,
/// and maps are sorted, so output is stable.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn moment_options(cfg: &RunConfig) -> MomentOptions {
    let mut o = MomentOptions::default();
    o.ode.rtol = cfg.numerics.rtol;
    o
}

fn omega_options(cfg: &RunConfig) -> OmegaOptions {
    let mut o = OmegaOptions::default();
    o.ode.rtol = cfg.numerics.rtol.min(o.ode.rtol);
    o
}

fn ensemble_options(cfg: &RunConfig) -> EnsembleOptions {
    EnsembleOptions {
        n_traj: cfg.numerics.n_traj,
        seed: cfg.numerics.seed,
        steps_per_efold: cfg.numerics.steps_per_efold,
        ode: OdeOptions {
            rtol: cfg.numerics.rtol,
            atol: 1e-13,
            ..OdeOptions::default()
        },
        ..EnsembleOptions::default()
    }
}

/// `n` output times spread uniformly in log-time over both eras, ending
/// at the final time.
pub fn output_times(bg: &Background, k: f64, schedule: &EraSchedule, n: usize) -> Vec<f64> {
    let x_ini = -k * schedule.eta_ini;
    let x_end = -k * bg.eta_end();
    let l_inf = (x_ini / x_end).ln();
    let l_rad = if schedule.ends_in_radiation(bg) {
        bg.log_time(Era::Radiation, k, schedule.eta_final) - bg.log_time(Era::Radiation, k, bg.eta_end())
    } else {
        0.0
    };
    let total = l_inf + l_rad;
    let mut out: Vec<f64> = (1..=n)
        .map(|i| {
            let t = total * i as f64 / n as f64;
            if t <= l_inf {
                (-x_ini * (-t).exp() / k).min(bg.eta_end())
            } else {
                bg.eta_at_ratio(Era::Radiation, k, x_end * (t - l_inf).exp())
            }
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = schedule.eta_final;
    }
    out.dedup();
    out
}

struct ModeSetup {
    c: Coupling,
    modes: Modes,
    schedule: EraSchedule,
    outputs: Vec<f64>,
}

fn mode_setup(cfg: &RunConfig, constants: &Constants) -> Result<ModeSetup> {
    let (r, csl) = cfg.require_csl(constants)?;
    if !(cfg.mode.k_over_kref > 0.0) {
        return Err(Error::Config("mode.k_over_kref must be positive".into()));
    }
    if cfg.mode.n_outputs == 0 {
        return Err(Error::Config("mode.n_outputs must be at least 1".into()));
    }
    let bg = Background::new(r.cosmo);
    let k = r.cosmo.k_ref() * cfg.mode.k_over_kref;
    let c = Coupling::new(r.cosmo, csl, cfg.numerics.bracket);
    let modes = Modes::new(bg, k, cfg.numerics.matching);
    let schedule = EraSchedule::new(&bg, k, cfg.numerics.x_ini, cfg.mode.radiation_efolds)
        .map_err(|e| Error::Config(e.to_string()))?;
    let outputs = output_times(&bg, k, &schedule, cfg.mode.n_outputs);
    Ok(ModeSetup {
        c,
        modes,
        schedule,
        outputs,
    })
}

#[derive(Debug, Serialize)]
struct MomentRow {
    eta: f64,
    era: &'static str,
    ratio: f64,
    p_vv: f64,
    p_cross: f64,
    p_pp: f64,
    free_vv: f64,
    correction_rel: f64,
    correction_inflation: f64,
    correction_radiation: f64,
}

#[derive(Debug, Serialize)]
struct OmegaRow {
    eta: f64,
    era: &'static str,
    ratio: f64,
    re_omega: f64,
    im_omega: f64,
    re_omega0: f64,
    im_omega0: f64,
    collapse_r: f64,
    inv_r_minus_one: f64,
}

#[derive(Debug, Serialize)]
struct EnsembleRow {
    eta: f64,
    era: &'static str,
    ratio: f64,
    mean_v: f64,
    stderr_v: f64,
    mean_v2: f64,
    stderr_v2: f64,
    /// `P_vv − 1/(4ReΩ)` from the Lindblad and Riccati routes.
    lindblad_v2: f64,
    z_score: f64,
    re_omega: f64,
    re_omega_rel_var: f64,
    collapse_r: f64,
    spread: f64,
    max_norm_drift: f64,
}

fn ensemble_rows(s: &ModeSetup, cfg: &RunConfig) -> Result<(Vec<EnsembleRow>, usize)> {
    let e = run_ensemble(&s.c, &s.modes, &s.schedule, &s.outputs, &ensemble_options(cfg))?;
    let init = MomentState::bunch_davies(&s.modes, s.schedule.eta_ini);
    let mo = integrate_moments(&s.c, &s.modes, &init, &s.schedule, &s.outputs, &moment_options(cfg))?;
    let om = integrate_omega(&s.c, &s.modes, &s.schedule, &s.outputs, &omega_options(cfg))?;
    let rows = e
        .points
        .iter()
        .zip(&mo.samples)
        .zip(&om.samples)
        .map(|((p, m), o)| {
            let d = m.delta().p_vv + m.free_exact_vv * o.q / (1.0 + o.q);
            EnsembleRow {
                eta: p.eta,
                era: p.era.tag(),
                ratio: p.ratio,
                mean_v: p.mean_v,
                stderr_v: p.stderr_v,
                mean_v2: p.mean_v2,
                stderr_v2: p.stderr_v2,
                lindblad_v2: d,
                z_score: if p.stderr_v2 > 0.0 {
                    (p.mean_v2 - d) / p.stderr_v2
                } else {
                    0.0
                },
                re_omega: p.re_omega,
                re_omega_rel_var: p.re_omega_rel_var,
                collapse_r: p.collapse_r,
                spread: p.spread,
                max_norm_drift: p.max_norm_drift,
            }
        })
        .collect();
    Ok((rows, e.steps))
}

fn mode_evolve(cfg: &RunConfig, constants: &Constants, w: &mut Writer) -> Result<(Vec<String>, serde_json::Value)> {
    let s = mode_setup(cfg, constants)?;
    let init = MomentState::bunch_davies(&s.modes, s.schedule.eta_ini);
    let mo = integrate_moments(&s.c, &s.modes, &init, &s.schedule, &s.outputs, &moment_options(cfg))?;
    let om = integrate_omega(&s.c, &s.modes, &s.schedule, &s.outputs, &omega_options(cfg))?;
    let rows: Vec<MomentRow> = mo
        .samples
        .iter()
        .map(|m| {
            let full = m.full();
            MomentRow {
                eta: m.eta,
                era: m.era.tag(),
                ratio: m.ratio,
                p_vv: full.p_vv,
                p_cross: full.p_cross,
                p_pp: full.p_pp,
                free_vv: m.free_exact_vv,
                correction_rel: m.correction_rel(),
                correction_inflation: m.delta_inflation.p_vv / m.free_exact_vv,
                correction_radiation: m.delta_radiation.p_vv / m.free_exact_vv,
            }
        })
        .collect();
    w.table("moments", &rows)?;
    let orows: Vec<OmegaRow> = om
        .samples
        .iter()
        .map(|o| OmegaRow {
            eta: o.eta,
            era: o.era.tag(),
            ratio: o.ratio,
            re_omega: o.omega.re,
            im_omega: o.omega.im,
            re_omega0: o.omega0.re,
            im_omega0: o.omega0.im,
            collapse_r: o.collapse_r(),
            inv_r_minus_one: o.q,
        })
        .collect();
    w.table("omega", &orows)?;
    let last_m = mo.last();
    let last_o = om.last();
    let mut lines = vec![
        format!(
            "k = {:.6e}  final {} ratio = {:.6e}",
            s.modes.k,
            last_m.era.tag(),
            last_m.ratio
        ),
        format!("correction_rel = {:.6e}", last_m.correction_rel()),
        format!("R = {:.12e}", last_o.collapse_r()),
    ];
    let mut summary = serde_json::json!({
        "k": s.modes.k,
        "correction_rel": last_m.correction_rel(),
        "correction_inflation": last_m.delta_inflation.p_vv / last_m.free_exact_vv,
        "correction_radiation": last_m.delta_radiation.p_vv / last_m.free_exact_vv,
        "collapse_r": last_o.collapse_r(),
        "inv_r_minus_one": last_o.q,
    });
    if cfg.mode.ensemble {
        let (erows, steps) = ensemble_rows(&s, cfg)?;
        w.table("ensemble", &erows)?;
        lines.push(format!("ensemble: {} trajectories, {steps} steps", cfg.numerics.n_traj));
        summary["ensemble_steps"] = steps.into();
    }
    Ok((lines, summary))
}

fn cmd_ensemble(cfg: &RunConfig, constants: &Constants, w: &mut Writer) -> Result<(Vec<String>, serde_json::Value)> {
    let s = mode_setup(cfg, constants)?;
    let (rows, steps) = ensemble_rows(&s, cfg)?;
    w.table("ensemble", &rows)?;
    let max_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    let max_var = rows.iter().map(|r| r.re_omega_rel_var).fold(0.0, f64::max);
    let lines = vec![
        format!(
            "{} trajectories, {steps} steps, {} outputs",
            cfg.numerics.n_traj,
            rows.len()
        ),
        format!("max |z| against the Lindblad route = {max_z:.3}"),
        format!("max relative ReΩ variance = {max_var:.3e}"),
    ];
    let summary = serde_json::json!({
        "n_traj": cfg.numerics.n_traj,
        "steps": steps,
        "max_abs_z": max_z,
        "max_re_omega_rel_var": max_var,
    });
    Ok((lines, summary))
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    k: f64,
    #[serde(rename = "P_v")]
    p_v: f64,
    correction_rel: f64,
    #[serde(rename = "R")]
    r: f64,
    regime: &'static str,
    route: &'static str,
    p_standard: f64,
    correction_inflation: f64,
    correction_radiation: f64,
    p_v_stderr: Option<f64>,
}

impl From<&SpectrumPoint> for SpectrumRow {
    fn from(p: &SpectrumPoint) -> Self {
        SpectrumRow {
            k: p.k,
            p_v: p.p_v,
            correction_rel: p.correction_rel,
            r: p.r_value,
            regime: p.regime.tag(),
            route: p.route.tag(),
            p_standard: p.p_standard,
            correction_inflation: p.correction_inflation,
            correction_radiation: p.correction_radiation,
            p_v_stderr: p.p_v_stderr,
        }
    }
}

/// Geometric k-grid between `k_min` and `k_max` inclusive.
pub fn k_grid(k_min: f64, k_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| k_min * (k_max / k_min).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn cmd_spectrum(cfg: &RunConfig, constants: &Constants, w: &mut Writer) -> Result<(Vec<String>, serde_json::Value)> {
    let (r, csl) = cfg.require_csl(constants)?;
    let sp = &cfg.spectrum;
    if sp.n_k < 2 {
        return Err(Error::Usage(format!(
            "spectrum needs at least 2 k-points, got {}",
            sp.n_k
        )));
    }
    if !(sp.k_min_over_kref > 0.0 && sp.k_max_over_kref > sp.k_min_over_kref) {
        return Err(Error::Usage(
            "spectrum needs 0 < k_min_over_kref < k_max_over_kref".into(),
        ));
    }
    let kr = r.cosmo.k_ref();
    let ks = k_grid(sp.k_min_over_kref * kr, sp.k_max_over_kref * kr, sp.n_k);
    let regimes: Vec<_> = ks
        .iter()
        .map(|&k| crate::spectrum::regime_of(&r.cosmo, csl.r_c, k))
        .collect();
    if regimes.iter().any(|&g| g != regimes[0]) {
        return Err(Error::Usage(
            "k-grid mixes inflation-crossing and radiation-crossing modes; split it at H_end r_c = e^{ΔN}".into(),
        ));
    }
    let opts = SpectrumOptions {
        x_ini: cfg.numerics.x_ini,
        y_eval: match sp.evaluate_at {
            EvaluateAt::EndOfInflation => None,
            EvaluateAt::Radiation => Some(sp.y_eval),
        },
        rule: cfg.numerics.matching,
        bracket: cfg.numerics.bracket,
        form: sp.form,
        component: sp.component,
        moments: moment_options(cfg),
        omega: omega_options(cfg),
        ensemble: ensemble_options(cfg),
    };
    let pts = spectrum(&ks, sp.route, &r.cosmo, &csl, &opts)?;
    let rows: Vec<SpectrumRow> = pts.iter().map(SpectrumRow::from).collect();
    w.table("spectrum", &rows)?;
    // the index fit is a by-product: the table is still written when it fails
    let (fit, fit_note): (Option<IndexFit>, Option<String>) = match fit_correction_index(&pts) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut lines = vec![format!(
        "{} k-points, route {}, {}",
        pts.len(),
        sp.route.tag(),
        regimes[0].tag()
    )];
    match (&fit, &fit_note) {
        (Some(f), _) => lines.push(format!(
            "fitted correction index = {:.4} (rms residual {:.2e})",
            f.exponent, f.rms_residual
        )),
        (None, note) => lines.push(format!("no index fit: {}", note.as_deref().unwrap_or("unavailable"))),
    }
    let summary = serde_json::json!({ "regime": regimes[0], "route": sp.route, "fit": fit, "fit_note": fit_note });
    Ok((lines, summary))
}

#[derive(Debug, Serialize)]
struct MapRow {
    log10_rc: f64,
    log10_lambda: f64,
    status: &'static str,
}

#[derive(Debug, Serialize)]
struct ExclusionSummary {
    verdict: &'static str,
    jointly_allowed_cells: usize,
    log10_rc_break_m: f64,
    slopes: Option<BoundarySlopes>,
    counts: std::collections::BTreeMap<&'static str, usize>,
    boundary: Vec<crate::exclusion::BoundaryPoint>,
    parameters: serde_json::Value,
    provenance: serde_json::Value,
}

fn cmd_exclusion(cfg: &RunConfig, constants: &Constants, w: &mut Writer) -> Result<(Vec<String>, serde_json::Value)> {
    let r = cfg.resolve(constants)?;
    let overlay = match &cfg.exclusion.overlay {
        Some(p) => Some(load_lab_overlay(Path::new(p))?),
        None => None,
    };
    let spec = cfg.exclusion.spec();
    let map = scan_grid(&spec, &r.cosmo, r.m0, constants, overlay.as_ref())?;
    let rows: Vec<MapRow> = map
        .cells
        .iter()
        .map(|c| MapRow {
            log10_rc: c.log10_rc_m,
            log10_lambda: c.log10_lambda_s,
            status: c.status.tag(),
        })
        .collect();
    w.table("map", &rows)?;
    let mut counts = std::collections::BTreeMap::new();
    for c in &map.cells {
        *counts.entry(c.status.tag()).or_insert(0usize) += 1;
    }
    let slopes = boundary_slopes(&map.boundary).ok();
    let summary = ExclusionSummary {
        verdict: map.verdict.tag(),
        jointly_allowed_cells: map.jointly_allowed,
        log10_rc_break_m: map.log10_rc_break_m,
        slopes,
        counts,
        boundary: map.boundary.clone(),
        parameters: serde_json::json!({
            "h_inf": r.cosmo.h_inf,
            "epsilon1": r.cosmo.epsilon1,
            "delta_n": r.cosmo.delta_n,
            "m0": r.m0,
            "scan": spec,
        }),
        provenance: serde_json::json!({
            "tool": "csl-modes",
            "version": VERSION,
            "overlay": cfg.exclusion.overlay,
            "overlay_polygons": overlay.as_ref().map_or(0, |o| o.polygons.len()),
            "units": "log10 r_c in m, log10 lambda in s^-1; gamma in reduced Planck units",
        }),
    };
    w.json("exclusion.json", &summary)?;
    let lines = vec![
        format!("{}x{} cells, verdict: {}", spec.n_rc, spec.n_lambda, map.verdict.tag()),
        format!("jointly allowed cells: {}", map.jointly_allowed),
    ];
    let short = serde_json::json!({
        "verdict": map.verdict.tag(),
        "jointly_allowed_cells": map.jointly_allowed,
        "slopes": slopes,
    });
    Ok((lines, short))
}
