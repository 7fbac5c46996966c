//! Quantum carpets: the polar marginal
//!
//! ```text
//! ρ(θ, t) = sinθ ∫₀^{2π} |Ψ(θ, φ, t)|² dφ = sinθ Σ_M |Σ_I b_IM(t) P̄_I^M(cosθ)|²
//! ```
//!
//! which for `M = 0` packets is `2π sinθ |Ψ(θ, 0, t)|²`.
//!
//! θ nodes are the Fejér midpoints `θ_j = (j + ½)π/n`. With the matching
//! weights the column integral `∫₀^π ρ dθ` is exact once `n ≥ 2·l_max + 1`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent_state::WavePacket;
use crate::error::{Error, Result};
use crate::evolution::{SpectrumModel, TimeScales};
use crate::format::sig9;
use crate::sphere_basis::LegendreTable;

/// Largest accepted `theta_count · t_count`.
pub const MAX_GRID_CELLS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CarpetGrid {
    pub theta_nodes: Vec<f64>,
    /// `∫₀^π g dθ ≈ Σ_j theta_weights[j] · g(θ_j)` for the densities here.
    pub theta_weights: Vec<f64>,
    pub time_nodes: Vec<f64>,
    /// `columns[k][j] = ρ(θ_j, t_k)`.
    pub columns: Vec<Vec<f64>>,
    /// `∫ρ dθ` per column.
    pub normalization: Vec<f64>,
    /// `|⟨ψ(0)|ψ(t_k)⟩|` per column, when known.
    pub autocorrelation: Option<Vec<f64>>,
}

/// Fejér (first rule) midpoints on `(0, π)` and weights for `∫₀^π g(θ) dθ`
/// where `g(θ)/sinθ` is a polynomial in `cosθ`.
pub fn fejer_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let theta: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * PI / n as f64).collect();
    let weights = theta
        .iter()
        .map(|&t| {
            let s: f64 = (1..=n / 2)
                .map(|k| (2.0 * k as f64 * t).cos() / (4.0 * (k * k) as f64 - 1.0))
                .sum();
            2.0 / n as f64 * (1.0 - 2.0 * s) / t.sin()
        })
        .collect();
    (theta, weights)
}

impl CarpetGrid {
    /// Rebuild a grid from exported parts; θ nodes must be Fejér midpoints.
    pub fn from_parts(theta_nodes: Vec<f64>, time_nodes: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if theta_nodes.is_empty() || time_nodes.is_empty() {
            return Err(Error::Validation("carpet grid is empty".into()));
        }
        if columns.len() != time_nodes.len() || columns.iter().any(|c| c.len() != theta_nodes.len()) {
            return Err(Error::Validation("carpet grid shape does not match its nodes".into()));
        }
        let (nodes, weights) = fejer_nodes(theta_nodes.len());
        if let Some(j) = (0..nodes.len()).find(|&j| (nodes[j] - theta_nodes[j]).abs() > 1e-8) {
            return Err(Error::Validation(format!(
                "θ node {j} = {} is not the Fejér midpoint {}",
                theta_nodes[j], nodes[j]
            )));
        }
        let normalization = columns.iter().map(|c| integrate(&weights, c)).collect();
        Ok(Self {
            theta_nodes,
            theta_weights: weights,
            time_nodes,
            columns,
            normalization,
            autocorrelation: None,
        })
    }

    pub fn theta_count(&self) -> usize {
        self.theta_nodes.len()
    }

    pub fn t_count(&self) -> usize {
        self.time_nodes.len()
    }

    pub fn density(&self, theta_index: usize, time_index: usize) -> f64 {
        self.columns[time_index][theta_index]
    }

    /// Largest `|∫ρ dθ − 1|` over the columns.
    pub fn max_normalization_error(&self) -> f64 {
        self.normalization.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn integrate(weights: &[f64], column: &[f64]) -> f64 {
    weights.iter().zip(column).map(|(w, r)| w * r).sum()
}

/// `t_count` evenly spaced times from `t_start` to `t_end` inclusive.
pub fn time_grid(t_start: f64, t_end: f64, t_count: usize) -> Vec<f64> {
    let d = t_end - t_start;
    let mut t: Vec<f64> = (0..t_count)
        .map(|k| t_start + d * k as f64 / (t_count - 1) as f64)
        .collect();
    if let Some(last) = t.last_mut() {
        *last = t_end;
    }
    t
}

pub fn carpet(
    wp0: &WavePacket,
    spectrum: &SpectrumModel,
    theta_count: usize,
    t_start: f64,
    t_end: f64,
    t_count: usize,
) -> Result<CarpetGrid> {
    if theta_count < 2 || t_count < 2 {
        return Err(Error::Config(format!(
            "carpet needs at least 2 θ and 2 t nodes (got {theta_count} × {t_count})"
        )));
    }
    let cells = theta_count.saturating_mul(t_count);
    if cells > MAX_GRID_CELLS {
        return Err(Error::Config(format!(
            "carpet of {theta_count} × {t_count} = {cells} cells exceeds the cap of {MAX_GRID_CELLS}"
        )));
    }
    if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
        return Err(Error::Config(format!("time window [{t_start}, {t_end}] is empty or not finite")));
    }
    let defect = (wp0.norm_sqr() - 1.0).abs();
    if defect > 1e-6 {
        return Err(Error::Validation(format!("initial packet is not normalized (defect {defect:.3e})")));
    }
    spectrum.check_covers(wp0)?;

    let l_top = wp0.coeffs().support_max(0.0).unwrap_or(0);
    if theta_count < 2 * l_top + 1 {
        log::warn!(
            "{theta_count} θ nodes under-resolve l = {l_top}; column integrals are approximate below {}",
            2 * l_top + 1
        );
    }
    let symmetric = wp0.is_cylindrical();
    let (theta_nodes, theta_weights) = fejer_nodes(theta_count);
    let tables: Vec<LegendreTable> = theta_nodes.iter().map(|t| LegendreTable::new(l_top, t.cos())).collect();
    let energies: Vec<f64> = (0..=l_top).map(|l| spectrum.energy(l).unwrap_or(0.0)).collect();
    let weights_i: Vec<f64> = (0..=l_top)
        .map(|l| {
            let li = l as i32;
            (-li..=li).map(|m| wp0.coeff(l, m).norm_sqr()).sum()
        })
        .collect();
    let time_nodes = time_grid(t_start, t_end, t_count);

    let work: Vec<(Vec<f64>, f64)> = time_nodes
        .par_iter()
        .map(|&t| {
            let phases: Vec<Complex64> = energies.iter().map(|e| Complex64::from_polar(1.0, -e * t)).collect();
            let column = theta_nodes
                .iter()
                .zip(&tables)
                .map(|(th, tab)| th.sin() * marginal(wp0, &phases, tab, l_top, symmetric))
                .collect();
            let auto = weights_i
                .iter()
                .zip(&phases)
                .map(|(p, ph)| ph * *p)
                .sum::<Complex64>()
                .norm();
            (column, auto)
        })
        .collect();
    let (columns, auto): (Vec<Vec<f64>>, Vec<f64>) = work.into_iter().unzip();
    let normalization = columns.iter().map(|c| integrate(&theta_weights, c)).collect();
    Ok(CarpetGrid {
        theta_nodes,
        theta_weights,
        time_nodes,
        columns,
        normalization,
        autocorrelation: Some(auto),
    })
}

/// `Σ_M |Σ_I b_IM e^{−iE_I t} P̄_I^M|²` at one θ.
fn marginal(wp: &WavePacket, phases: &[Complex64], tab: &LegendreTable, l_top: usize, symmetric: bool) -> f64 {
    let m_top = if symmetric { 0 } else { l_top as i32 };
    (-m_top..=m_top)
        .map(|m| {
            (m.unsigned_abs() as usize..=l_top)
                .map(|l| wp.coeff(l, m) * phases[l] * tab.theta_part(l, m))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum()
}

/// Same density through the full φ integral, for cross-checks.
pub fn marginal_general(wp: &WavePacket, spectrum: &SpectrumModel, theta: f64, t: f64) -> f64 {
    let l_top = wp.l_max();
    let phases: Vec<Complex64> = (0..=l_top)
        .map(|l| Complex64::from_polar(1.0, -spectrum.energy(l).unwrap_or(0.0) * t))
        .collect();
    theta.sin() * marginal(wp, &phases, &LegendreTable::new(l_top, theta.cos()), l_top, false)
}

pub const CORNER: &str = "theta/t";

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Header row `theta/t, t_0, t_1, ...`, then one row per θ node.
pub fn carpet_export(grid: &CarpetGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if grid.theta_nodes.is_empty() || grid.time_nodes.is_empty() {
        return Err(Error::Validation("refusing to export an empty carpet".into()));
    }
    let err = csv_error(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    let header = std::iter::once(CORNER.to_string()).chain(grid.time_nodes.iter().map(|&t| sig9(t)));
    w.write_record(header).map_err(&err)?;
    for (j, &th) in grid.theta_nodes.iter().enumerate() {
        let row = std::iter::once(sig9(th)).chain(grid.columns.iter().map(|c| sig9(c[j])));
        w.write_record(row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn carpet_import(path: impl AsRef<Path>) -> Result<CarpetGrid> {
    let path = path.as_ref();
    let err = csv_error(path);
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(&err)?;
    let parse = |line: usize, s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("not a number: {s:?}"),
        })
    };
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h.map_err(&err)?,
        None => return Err(Error::Validation(format!("{}: empty carpet file", path.display()))),
    };
    if header.get(0) != Some(CORNER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected {CORNER:?} in the first cell"),
        });
    }
    let times = header.iter().skip(1).map(|s| parse(1, s)).collect::<Result<Vec<_>>>()?;
    let mut thetas = Vec::new();
    let mut columns = vec![Vec::new(); times.len()];
    for (k, rec) in records.enumerate() {
        let rec = rec.map_err(&err)?;
        let mut cells = rec.iter();
        thetas.push(parse(k + 2, cells.next().unwrap_or(""))?);
        for c in columns.iter_mut() {
            c.push(parse(k + 2, cells.next().unwrap_or(""))?);
        }
    }
    CarpetGrid::from_parts(thetas, times, columns)
}

/// JSON sidecar describing how a carpet was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarpetMeta {
    pub spectrum: SpectrumModel,
    pub packet: serde_json::Value,
    pub time_scales: Option<TimeScales>,
    pub theta_count: usize,
    pub t_count: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub max_normalization_error: f64,
}

impl CarpetMeta {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent_state::{expand_cs, expand_cs_with, CoherentStateParams, ExpandOptions, Frame};
    use crate::evolution::{timescales, Level};
    use crate::sphere_basis::HarmonicTable;

    fn rotor() -> SpectrumModel {
        SpectrumModel::ideal(1.0).unwrap()
    }

    fn linear(n: f64, l: usize) -> WavePacket {
        let p = CoherentStateParams::new(n, 0.0).unwrap();
        expand_cs(&p, l, 1e-10).unwrap().renormalized().unwrap()
    }

    #[test]
    fn fejer_rule_is_exact() {
        let (th, w) = fejer_nodes(9);
        // ∫₀^π sinθ cos^k θ dθ = 2/(k+1) for even k
        for k in [0, 2, 4, 8] {
            let got: f64 = th.iter().zip(&w).map(|(t, w)| w * t.sin() * t.cos().powi(k)).sum();
            assert!((got - 2.0 / (k + 1) as f64).abs() < 1e-14, "{k}");
        }
    }

    #[test]
    fn ground_state_is_flat() {
        let mut t = HarmonicTable::zeros(0);
        t.set(0, 0, Complex64::new(1.0, 0.0));
        let g = carpet(&WavePacket::new(t, 1e-12), &rotor(), 17, 0.0, 5.0, 4).unwrap();
        for c in &g.columns {
            for (rho, th) in c.iter().zip(&g.theta_nodes) {
                assert!((rho - th.sin() / 2.0).abs() < 1e-15);
            }
        }
        assert!(g.max_normalization_error() < 1e-14);
    }

    #[test]
    fn symmetric_shortcut_matches_general_path() {
        let p = CoherentStateParams::new(4.0, 0.0).unwrap();
        let wp = expand_cs_with(&p, 30, 1e-10, &ExpandOptions::default()).unwrap();
        assert!(wp.is_cylindrical());
        let g = carpet(&wp, &rotor(), 21, 0.0, 1.0, 3).unwrap();
        for (k, &t) in g.time_nodes.iter().enumerate() {
            for (j, &th) in g.theta_nodes.iter().enumerate() {
                let direct = 2.0 * PI * th.sin() * propagate_at(&wp, t, th).norm_sqr();
                assert!((g.density(j, k) - marginal_general(&wp, &rotor(), th, t)).abs() < 1e-10);
                assert!((g.density(j, k) - direct).abs() < 1e-10);
            }
        }
    }

    fn propagate_at(wp: &WavePacket, t: f64, theta: f64) -> Complex64 {
        crate::evolution::propagate(wp, &rotor(), t).unwrap().evaluate(theta, 0.0)
    }

    #[test]
    fn general_packet_normalizes() {
        let p = CoherentStateParams::new(5.0, 0.4).unwrap();
        let wp = expand_cs_with(
            &p,
            30,
            1e-10,
            &ExpandOptions {
                frame: Some(Frame::RotationAxis),
                renormalize: true,
                ..Default::default()
            },
        )
        .unwrap();
        let g = carpet(&wp, &rotor(), 61, 0.0, 3.0, 5).unwrap();
        assert!(g.max_normalization_error() < 1e-12);
        assert!(g.columns.iter().flatten().all(|&r| r >= 0.0));
    }

    #[test]
    fn revival_column_repeats() {
        let wp = linear(6.0, 36);
        let ts = timescales(&rotor(), wp.mean_degree()).unwrap();
        let g = carpet(&wp, &rotor(), 91, 0.0, ts.t_rev, 2).unwrap();
        for j in 0..91 {
            assert!((g.density(j, 0) - g.density(j, 1)).abs() < 1e-10);
        }
        let auto = g.autocorrelation.unwrap();
        assert!((auto[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn theta_doubling_converges() {
        let wp = linear(6.0, 36);
        let a = carpet(&wp, &rotor(), 81, 0.0, 1.0, 3).unwrap();
        let b = carpet(&wp, &rotor(), 162, 0.0, 1.0, 3).unwrap();
        for (x, y) in a.normalization.iter().zip(&b.normalization) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn limits_and_shape_errors() {
        let wp = linear(2.0, 20);
        assert!(matches!(carpet(&wp, &rotor(), 1, 0.0, 1.0, 5), Err(Error::Config(_))));
        assert!(matches!(carpet(&wp, &rotor(), 10_001, 0.0, 1.0, 1000), Err(Error::Config(_))));
        assert!(matches!(carpet(&wp, &rotor(), 10, 1.0, 1.0, 5), Err(Error::Config(_))));
        let short = SpectrumModel::tabulated(vec![
            Level { spin: 0, energy: 0.0 },
            Level { spin: 1, energy: 1.0 },
        ])
        .unwrap();
        assert!(matches!(carpet(&wp, &short, 10, 0.0, 1.0, 5), Err(Error::Data(_))));
    }

    #[test]
    fn export_round_trip() {
        let wp = linear(3.0, 24);
        let g = carpet(&wp, &rotor(), 2, 0.0, 1.0, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        carpet_export(&g, &path).unwrap();
        let back = carpet_import(&path).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                let want: f64 = sig9(g.density(j, k)).parse().unwrap();
                assert_eq!(back.density(j, k), want);
            }
        }
        let big = carpet(&wp, &rotor(), 101, 0.0, 2.0, 7).unwrap();
        carpet_export(&big, &path).unwrap();
        assert!(carpet_import(&path).unwrap().max_normalization_error() < 1e-6);
    }

    #[test]
    fn empty_grids_are_refused() {
        let empty = CarpetGrid {
            theta_nodes: vec![],
            theta_weights: vec![],
            time_nodes: vec![],
            columns: vec![],
            normalization: vec![],
            autocorrelation: None,
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(carpet_export(&empty, dir.path().join("e.csv")), Err(Error::Validation(_))));
        assert!(CarpetGrid::from_parts(vec![], vec![], vec![]).is_err());
        std::fs::write(dir.path().join("z.csv"), "").unwrap();
        assert!(carpet_import(dir.path().join("z.csv")).is_err());
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let wp = linear(4.0, 30);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| carpet(&wp, &rotor(), 31, 0.0, 2.0, 9).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
