//! Batch front end: `expand`, `observables`, `revivals`, `carpet`.
//!
//! Settings come from flags and, optionally, a JSON file given with
//! `--config` (same field names as [`RunConfig`]); flags win. Every run
//! writes `manifest.json` next to its artifacts, and the `config` it records
//! can be fed back through `--config` to repeat the run.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::carpet::{carpet, carpet_export, time_grid, CarpetMeta};
use crate::ce_ingest::{kev_time_to_seconds, load_amplitudes, load_levels, surrogate_amplitudes, AmplitudeSet};
use crate::coherent_state::{expand_cs_with, suggest_lmax, CoherentStateParams, ExpandOptions, Frame, WavePacket};
use crate::error::{Error, Result};
use crate::evolution::{propagate, timescales, SpectrumModel, TimeScales};
use crate::observables::{angular_stats, eta_relations, observable_series, write_series_csv};
use crate::revival::{detect_features, gauss_coefficients, FractionalTime, RevivalReport, DEFAULT_CLONE_THRESHOLD};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_TSTEPS: usize = 101;
pub const DEFAULT_THETAS: usize = 181;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Expand,
    Observables,
    Revivals,
    Carpet,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Expand => "expand",
            Command::Observables => "observables",
            Command::Revivals => "revivals",
            Command::Carpet => "carpet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FrameArg {
    RotationAxis,
    SymmetryAxis,
}

impl From<FrameArg> for Frame {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::RotationAxis => Frame::RotationAxis,
            FrameArg::SymmetryAxis => Frame::SymmetryAxis,
        }
    }
}

/// Everything a run depends on. Unset fields take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// Coherent-state size parameter `N`.
    #[serde(rename = "N")]
    pub size: Option<f64>,
    pub eta: Option<f64>,
    pub frame: Option<FrameArg>,
    pub lmax: Option<usize>,
    pub tol: Option<f64>,
    pub renormalize: Option<bool>,
    /// Rotational constant of the ideal rotor.
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub levels: Option<PathBuf>,
    pub amplitudes: Option<PathBuf>,
    /// `ibar,sigma,imax`
    pub surrogate: Option<String>,
    pub surrogate_all_spins: Option<bool>,
    pub m: Option<u64>,
    pub n: Option<u64>,
    pub clone_threshold: Option<f64>,
    pub scan: Option<usize>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub tsteps: Option<usize>,
    pub thetas: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Fill every unset field of `self` from `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            command, size, eta, frame, lmax, tol, renormalize, b, levels, amplitudes, surrogate,
            surrogate_all_spins, m, n, clone_threshold, scan, t0, t1, tsteps, thetas, out, threads
        )
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "rotorwave", version, about = "Rotor wave packets: expansion, revivals, observables, quantum carpets")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON file with default settings; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Coherent-state size parameter
    #[arg(long = "N")]
    pub size: Option<f64>,
    /// Coherent-state ellipticity in [-1, 1]
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    /// Expansion frame (default: symmetry axis for eta = 0, rotation axis otherwise)
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Truncation tolerance on the norm defect
    #[arg(long)]
    pub tol: Option<f64>,
    /// Rescale the truncated expansion to unit norm
    #[arg(long)]
    pub renormalize: bool,
    /// Rotational constant of the ideal rotor (default 1 when no levels file is given)
    #[arg(long = "B")]
    pub b: Option<f64>,
    /// Level-scheme file (`I E_keV` per line)
    #[arg(long)]
    pub levels: Option<PathBuf>,
    /// Amplitude file (`I M re im` per line)
    #[arg(long)]
    pub amplitudes: Option<PathBuf>,
    /// Gaussian surrogate amplitudes: ibar,sigma,imax
    #[arg(long)]
    pub surrogate: Option<String>,
    /// Let the surrogate populate odd I as well
    #[arg(long)]
    pub surrogate_all_spins: bool,
    /// Fractional time numerator
    #[arg(long)]
    pub m: Option<u64>,
    /// Fractional time denominator
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub clone_threshold: Option<f64>,
    /// Number of azimuthal scan angles for feature detection
    #[arg(long)]
    pub scan: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub tsteps: Option<usize>,
    #[arg(long)]
    pub thetas: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 or unset: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Args {
    pub fn to_config(&self) -> Result<RunConfig> {
        let flags = RunConfig {
            command: Some(self.command),
            size: self.size,
            eta: self.eta,
            frame: self.frame,
            lmax: self.lmax,
            tol: self.tol,
            renormalize: self.renormalize.then_some(true),
            b: self.b,
            levels: self.levels.clone(),
            amplitudes: self.amplitudes.clone(),
            surrogate: self.surrogate.clone(),
            surrogate_all_spins: self.surrogate_all_spins.then_some(true),
            m: self.m,
            n: self.n,
            clone_threshold: self.clone_threshold,
            scan: self.scan,
            t0: self.t0,
            t1: self.t1,
            tsteps: self.tsteps,
            thetas: self.thetas,
            out: self.out.clone(),
            threads: self.threads,
        };
        Ok(match &self.config {
            Some(path) => flags.over(RunConfig::load(path)?),
            None => flags,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PacketSource {
    CoherentState { n: f64, eta: f64, frame: Frame },
    Amplitudes { path: PathBuf },
    Surrogate { i_bar: f64, sigma: f64, i_max: u32, even_only: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketInfo {
    pub source: PacketSource,
    pub l_max: usize,
    pub tol: f64,
    pub norm_defect: f64,
    pub mean_degree: f64,
    pub cylindrical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub packet: PacketInfo,
    pub spectrum: SpectrumModel,
    /// `ħ/B` for an ideal rotor, `ħ/keV` for a level file.
    pub time_unit: String,
    pub time_scales: Option<TimeScales>,
    pub t_cl_seconds: Option<f64>,
    pub t_rev_seconds: Option<f64>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

struct Prepared {
    packet: WavePacket,
    info: PacketInfo,
    spectrum: SpectrumModel,
    from_levels: bool,
}

fn parse_surrogate(s: &str) -> Result<(f64, f64, u32)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::Config(format!("--surrogate expects ibar,sigma,imax; got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn output_names(command: Command) -> &'static [&'static str] {
    match command {
        Command::Expand => &["wavepacket.json"],
        Command::Observables => &["observables.csv"],
        Command::Revivals => &["revival_report.json"],
        Command::Carpet => &["carpet.csv", "carpet_meta.json"],
    }
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

fn check_paths(cfg: &RunConfig, command: Command, out: &Path) -> Result<()> {
    let mut seen: Vec<(PathBuf, String)> = Vec::new();
    let mut add = |p: PathBuf, what: String| -> Result<()> {
        let a = absolute(&p);
        if let Some((_, other)) = seen.iter().find(|(q, _)| *q == a) {
            return Err(Error::Config(format!("{what} and {other} both name {}", p.display())));
        }
        seen.push((a, what));
        Ok(())
    };
    if let Some(p) = &cfg.levels {
        add(p.clone(), "--levels".into())?;
    }
    if let Some(p) = &cfg.amplitudes {
        add(p.clone(), "--amplitudes".into())?;
    }
    for name in output_names(command).iter().chain(&["manifest.json"]) {
        add(out.join(name), format!("output {name}"))?;
    }
    Ok(())
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("--tol must lie in (0, 1), got {tol}")));
    }
    let sources = [cfg.size.is_some(), cfg.amplitudes.is_some(), cfg.surrogate.is_some()];
    match sources.iter().filter(|s| **s).count() {
        0 => {
            return Err(Error::Config(
                "no coefficient source: give --N/--eta, --amplitudes or --surrogate".into(),
            ))
        }
        1 => {}
        _ => {
            return Err(Error::Config(
                "more than one coefficient source among --N, --amplitudes, --surrogate".into(),
            ))
        }
    }
    if cfg.eta.is_some() && cfg.size.is_none() {
        return Err(Error::Config("--eta given without --N".into()));
    }

    let (packet, source) = if let Some(n) = cfg.size {
        let eta = cfg.eta.ok_or_else(|| Error::Config("--N needs --eta".into()))?;
        let params = CoherentStateParams::new(n, eta)?;
        let frame = cfg.frame.map(Frame::from).unwrap_or(Frame::natural(eta));
        let l_max = match cfg.lmax {
            Some(l) => l,
            None => suggest_lmax(&params, tol)?,
        };
        let opts = ExpandOptions {
            frame: Some(frame),
            renormalize: cfg.renormalize.unwrap_or(false),
            ..Default::default()
        };
        (expand_cs_with(&params, l_max, tol, &opts)?, PacketSource::CoherentState { n, eta, frame })
    } else {
        let set: AmplitudeSet = if let Some(path) = &cfg.amplitudes {
            load_amplitudes(path)?
        } else {
            let (i_bar, sigma, i_max) = parse_surrogate(cfg.surrogate.as_deref().unwrap_or_default())?;
            surrogate_amplitudes(i_bar, sigma, i_max, !cfg.surrogate_all_spins.unwrap_or(false))?
        };
        let source = match &cfg.amplitudes {
            Some(path) => PacketSource::Amplitudes { path: path.clone() },
            None => {
                let (i_bar, sigma, i_max) = parse_surrogate(cfg.surrogate.as_deref().unwrap_or_default())?;
                PacketSource::Surrogate {
                    i_bar,
                    sigma,
                    i_max,
                    even_only: !cfg.surrogate_all_spins.unwrap_or(false),
                }
            }
        };
        (set.to_wavepacket(tol), source)
    };

    let (spectrum, from_levels) = match (&cfg.b, &cfg.levels) {
        (Some(_), Some(_)) => return Err(Error::Config("give either --B or --levels, not both".into())),
        (_, Some(path)) => (load_levels(path)?.to_spectrum()?, true),
        (b, None) => (SpectrumModel::ideal(b.unwrap_or(1.0))?, false),
    };
    spectrum.check_covers(&packet)?;

    let info = PacketInfo {
        source,
        l_max: packet.l_max(),
        tol: packet.tol(),
        norm_defect: packet.norm_defect(),
        mean_degree: packet.mean_degree(),
        cylindrical: packet.is_cylindrical(),
    };
    Ok(Prepared {
        packet,
        info,
        spectrum,
        from_levels,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Times for series and carpets; the default window is `[0, t_rev]`.
fn window(cfg: &RunConfig, ts: Option<&TimeScales>) -> Result<(f64, f64)> {
    let t0 = cfg.t0.unwrap_or(0.0);
    let t1 = match (cfg.t1, ts) {
        (Some(t), _) => t,
        (None, Some(ts)) => t0 + ts.t_rev,
        (None, None) => {
            return Err(Error::Config(
                "no --t1 given and no revival time available (mean I below 1)".into(),
            ))
        }
    };
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::Config(format!("empty time window [{t0}, {t1}]")));
    }
    Ok((t0, t1))
}

/// Execute one configured run, writing artifacts under `out` (default `.`).
pub fn run(cfg: &RunConfig) -> Result<Manifest> {
    let command = cfg
        .command
        .ok_or_else(|| Error::Config("no command given".into()))?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    check_paths(cfg, command, &out)?;
    let prep = prepare(cfg)?;
    let ts = timescales(&prep.spectrum, prep.info.mean_degree).ok();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let summary = match command {
        Command::Expand => {
            prep.packet.save_json(out.join("wavepacket.json"))?;
            serde_json::json!({})
        }
        Command::Observables => {
            let (t0, t1) = window(cfg, ts.as_ref())?;
            let steps = cfg.tsteps.unwrap_or(DEFAULT_TSTEPS);
            if steps < 2 {
                return Err(Error::Config("--tsteps must be at least 2".into()));
            }
            let times = time_grid(t0, t1, steps);
            let series = observable_series(&prep.packet, &prep.spectrum, &times)?;
            write_series_csv(out.join("observables.csv"), &series)?;
            let stats = angular_stats(&prep.packet)?;
            let eta = eta_relations(&prep.packet).ok();
            serde_json::json!({ "initial": stats, "eta_estimates": eta })
        }
        Command::Revivals => {
            let b = match prep.spectrum {
                SpectrumModel::IdealRotor { b } => b,
                SpectrumModel::Tabulated { .. } => {
                    return Err(Error::Config("revivals needs the ideal rotor (--B), not a level file".into()))
                }
            };
            let n = cfg.n.ok_or_else(|| Error::Config("revivals needs --n".into()))?;
            let ft = FractionalTime::new(cfg.m.unwrap_or(1), n)?;
            let threshold = cfg.clone_threshold.unwrap_or(DEFAULT_CLONE_THRESHOLD);
            let n_scan = cfg.scan.unwrap_or((720usize).max(8 * n as usize));
            let wp0 = prep.packet.renormalized()?;
            let t = std::f64::consts::TAU / b * ft.fraction();
            let wp_t = propagate(&wp0, &prep.spectrum, t)?;
            let detection = detect_features(&wp_t, &wp0, ft, threshold, n_scan)?;
            let report = RevivalReport::new(&gauss_coefficients(ft), &detection, threshold);
            write_json(&out.join("revival_report.json"), &report)?;
            serde_json::json!({ "t": t, "features": report.features.len(), "clones": report.clones() })
        }
        Command::Carpet => {
            let (t0, t1) = window(cfg, ts.as_ref())?;
            let thetas = cfg.thetas.unwrap_or(DEFAULT_THETAS);
            let steps = cfg.tsteps.unwrap_or(DEFAULT_TSTEPS);
            let grid = carpet(&prep.packet, &prep.spectrum, thetas, t0, t1, steps)?;
            carpet_export(&grid, out.join("carpet.csv"))?;
            let meta = CarpetMeta {
                spectrum: prep.spectrum.clone(),
                packet: serde_json::to_value(&prep.info).unwrap_or_default(),
                time_scales: ts,
                theta_count: thetas,
                t_count: steps,
                t_start: t0,
                t_end: t1,
                max_normalization_error: grid.max_normalization_error(),
            };
            meta.save(out.join("carpet_meta.json"))?;
            serde_json::json!({ "max_normalization_error": grid.max_normalization_error() })
        }
    };

    let seconds = |f: fn(&TimeScales) -> f64| ts.as_ref().filter(|_| prep.from_levels).map(|t| kev_time_to_seconds(f(t)));
    let mut outputs: Vec<String> = output_names(command).iter().map(|s| s.to_string()).collect();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config: cfg.clone(),
        packet: prep.info,
        spectrum: prep.spectrum,
        time_unit: if prep.from_levels { "hbar/keV" } else { "hbar/B" }.to_string(),
        time_scales: ts,
        t_cl_seconds: seconds(|t| t.t_cl),
        t_rev_seconds: seconds(|t| t.t_rev),
        outputs,
        summary,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Parse arguments, run, and map the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if e.use_stderr() && !e.to_string().contains("Usage:") {
                eprintln!("\n{}", Args::command().render_usage());
            }
            return code;
        }
    };
    let result = args.to_config().and_then(|cfg| {
        let threads = cfg.threads.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
        pool.install(|| run(&cfg))
    });
    match result {
        Ok(m) => {
            log::info!("{} finished; wrote {}", m.command.name(), m.outputs.join(", "));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
