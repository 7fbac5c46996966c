//! Level schemes and excitation-amplitude tables as plain text.
//!
//! Levels: one `I E_keV` pair per line. Amplitudes: `I M re im`, or
//! `I re im` / `I re` with `M = 0`. Blank lines and `#` comments are
//! ignored; `# nucleus: ...` and `# source: ...` set the labels.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherent_state::WavePacket;
use crate::error::{Error, Result};
use crate::evolution::{Level, SpectrumModel};
use crate::sphere_basis::HarmonicTable;

/// ħ in keV·s.
pub const HBAR_KEV_S: f64 = 6.582_119_569e-19;

/// Natural time unit `ħ/keV` to seconds.
pub fn kev_time_to_seconds(t: f64) -> f64 {
    t * HBAR_KEV_S
}

/// Defect above which normalizing on load is reported.
pub const NORMALIZE_WARN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub nucleus: String,
    pub source: String,
    /// Energies in keV.
    pub levels: Vec<Level>,
}

struct Line<'a> {
    number: usize,
    fields: Vec<&'a str>,
}

/// Data lines plus the `nucleus` and `source` directives.
fn scan_lines(text: &str) -> (Vec<Line<'_>>, Option<String>, Option<String>) {
    let (mut nucleus, mut source) = (None, None);
    let mut lines = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("nucleus:") {
                nucleus = Some(v.trim().to_string());
            } else if let Some(v) = comment.strip_prefix("source:") {
                source = Some(v.trim().to_string());
            }
            continue;
        }
        let data = line.split('#').next().unwrap_or("").trim();
        if !data.is_empty() {
            lines.push(Line {
                number: k + 1,
                fields: data.split_whitespace().collect(),
            });
        }
    }
    (lines, nucleus, source)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_error(path, line, format!("cannot read {what} from {s:?}")))
}

fn finite(path: &Path, line: usize, s: &str, what: &str) -> Result<f64> {
    let v: f64 = field(path, line, s, what)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_error(path, line, format!("{what} {s:?} is not finite")))
    }
}

pub fn parse_levels(text: &str, path: &Path) -> Result<LevelScheme> {
    let (lines, nucleus, source) = scan_lines(text);
    if lines.is_empty() {
        return Err(Error::Validation(format!("{}: no levels", path.display())));
    }
    let mut levels: Vec<Level> = Vec::with_capacity(lines.len());
    for line in &lines {
        let n = line.number;
        if line.fields.len() != 2 {
            return Err(parse_error(path, n, format!("expected `I E_keV`, found {} fields", line.fields.len())));
        }
        let spin: u32 = field(path, n, line.fields[0], "I")?;
        let energy = finite(path, n, line.fields[1], "energy")?;
        if !spin.is_multiple_of(2) {
            return Err(parse_error(path, n, format!("odd I = {spin} in a ground-band level scheme")));
        }
        if let Some(prev) = levels.last() {
            if spin <= prev.spin {
                return Err(parse_error(path, n, format!("I = {spin} does not increase past I = {}", prev.spin)));
            }
            if energy < prev.energy {
                return Err(parse_error(
                    path,
                    n,
                    format!("E(I = {spin}) = {energy} keV lies below E(I = {}) = {} keV", prev.spin, prev.energy),
                ));
            }
        } else if spin != 0 || energy != 0.0 {
            return Err(parse_error(path, n, "the first level must be the ground state `0 0`"));
        }
        levels.push(Level { spin, energy });
    }
    Ok(LevelScheme {
        nucleus: nucleus.unwrap_or_default(),
        source: source.unwrap_or_default(),
        levels,
    })
}

pub fn load_levels(path: impl AsRef<Path>) -> Result<LevelScheme> {
    let path = path.as_ref();
    parse_levels(&read(path)?, path)
}

impl LevelScheme {
    /// Tabulated spectrum in keV; times then come out in `ħ/keV`.
    pub fn to_spectrum(&self) -> Result<SpectrumModel> {
        SpectrumModel::tabulated(self.levels.clone())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.nucleus.is_empty() {
            let _ = writeln!(out, "# nucleus: {}", self.nucleus);
        }
        if !self.source.is_empty() {
            let _ = writeln!(out, "# source: {}", self.source);
        }
        out.push_str("# I  E_keV\n");
        for l in &self.levels {
            let _ = writeln!(out, "{} {}", l.spin, l.energy);
        }
        out
    }
}

pub fn save_levels(scheme: &LevelScheme, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &scheme.to_text())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub spin: u32,
    pub m: i32,
    pub re: f64,
    pub im: f64,
}

impl Amplitude {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    File { path: PathBuf, source: String },
    Surrogate { i_bar: f64, sigma: f64, i_max: u32, even_only: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSet {
    pub entries: Vec<Amplitude>,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

/// Scale to unit norm; `None` when every entry is zero.
fn normalize(entries: &mut [Amplitude]) -> Option<f64> {
    let norm: f64 = entries.iter().map(|a| a.value().norm_sqr()).sum();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    let s = norm.sqrt();
    for a in entries.iter_mut() {
        a.re /= s;
        a.im /= s;
    }
    Some(norm)
}

pub fn parse_amplitudes(text: &str, path: &Path) -> Result<AmplitudeSet> {
    let (lines, _, source) = scan_lines(text);
    if lines.is_empty() {
        return Err(Error::Validation(format!("{}: no amplitudes", path.display())));
    }
    let mut entries: Vec<Amplitude> = Vec::with_capacity(lines.len());
    let mut warnings = Vec::new();
    for line in &lines {
        let n = line.number;
        let f = &line.fields;
        let spin: u32 = field(path, n, f[0], "I")?;
        let (m, re, im) = match f.len() {
            4 => (
                field::<i32>(path, n, f[1], "M")?,
                finite(path, n, f[2], "real part")?,
                finite(path, n, f[3], "imaginary part")?,
            ),
            3 => (0, finite(path, n, f[1], "real part")?, finite(path, n, f[2], "imaginary part")?),
            2 => (0, finite(path, n, f[1], "amplitude")?, 0.0),
            k => return Err(parse_error(path, n, format!("expected 2 to 4 fields, found {k}"))),
        };
        if m.unsigned_abs() > spin {
            return Err(parse_error(path, n, format!("|M| = {} exceeds I = {spin}", m.abs())));
        }
        if entries.iter().any(|a| a.spin == spin && a.m == m) {
            return Err(parse_error(path, n, format!("duplicate entry for I = {spin}, M = {m}")));
        }
        if spin % 2 == 1 {
            warnings.push(format!("line {n}: odd I = {spin}"));
        }
        entries.push(Amplitude { spin, m, re, im });
    }
    let norm = normalize(&mut entries)
        .ok_or_else(|| Error::Validation(format!("{}: amplitudes are all zero", path.display())))?;
    if (norm - 1.0).abs() > NORMALIZE_WARN {
        warnings.push(format!("normalized on load (Σ|c|² was {norm})"));
    }
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(AmplitudeSet {
        entries,
        provenance: Provenance::File {
            path: path.to_path_buf(),
            source: source.unwrap_or_default(),
        },
        warnings,
    })
}

pub fn load_amplitudes(path: impl AsRef<Path>) -> Result<AmplitudeSet> {
    let path = path.as_ref();
    parse_amplitudes(&read(path)?, path)
}

impl AmplitudeSet {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.provenance {
            Provenance::File { source, .. } if !source.is_empty() => {
                let _ = writeln!(out, "# source: {source}");
            }
            Provenance::Surrogate {
                i_bar,
                sigma,
                i_max,
                even_only,
            } => {
                let _ = writeln!(
                    out,
                    "# source: gaussian surrogate i_bar={i_bar} sigma={sigma} i_max={i_max} even_only={even_only}"
                );
            }
            _ => {}
        }
        out.push_str("# I M re im\n");
        for a in &self.entries {
            let _ = writeln!(out, "{} {} {} {}", a.spin, a.m, a.re, a.im);
        }
        out
    }

    pub fn max_spin(&self) -> u32 {
        self.entries.iter().map(|a| a.spin).max().unwrap_or(0)
    }

    /// `Σ I |c|²`.
    pub fn mean_spin(&self) -> f64 {
        self.entries.iter().map(|a| a.spin as f64 * a.value().norm_sqr()).sum()
    }

    pub fn is_cylindrical(&self) -> bool {
        self.entries.iter().all(|a| a.m == 0)
    }

    pub fn to_wavepacket(&self, tol: f64) -> WavePacket {
        let mut t = HarmonicTable::zeros(self.max_spin() as usize);
        for a in &self.entries {
            t.set(a.spin as usize, a.m, a.value());
        }
        WavePacket::new(t, tol)
    }
}

pub fn save_amplitudes(set: &AmplitudeSet, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &set.to_text())
}

/// Real Gaussian weights `c_I ∝ exp(−(I − Ī)²/(2σ²))`, `M = 0`, over
/// `0 ≤ I ≤ i_max` (even `I` only when `even_only`).
pub fn surrogate_amplitudes(i_bar: f64, sigma: f64, i_max: u32, even_only: bool) -> Result<AmplitudeSet> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(i_bar.is_finite() && i_bar >= 0.0 && i_max as f64 >= i_bar) {
        return Err(Error::Domain(format!("need 0 <= i_bar <= i_max (got {i_bar}, {i_max})")));
    }
    let step = if even_only { 2 } else { 1 };
    let mut entries: Vec<Amplitude> = (0..=i_max)
        .step_by(step)
        .map(|i| Amplitude {
            spin: i,
            m: 0,
            re: (-(i as f64 - i_bar).powi(2) / (2.0 * sigma * sigma)).exp(),
            im: 0.0,
        })
        .collect();
    normalize(&mut entries).ok_or_else(|| Error::Validation("surrogate weights underflow to zero".into()))?;
    Ok(AmplitudeSet {
        entries,
        provenance: Provenance::Surrogate {
            i_bar,
            sigma,
            i_max,
            even_only,
        },
        warnings: Vec::new(),
    })
}
