//! Spectral propagation `b_IM → b_IM e^{−i E_I t}` (ħ = 1) and the two
//! characteristic times of a packet peaked around `Ī`:
//!
//! ```text
//! E_I ≈ E(Ī) + E′·(I − Ī) + E″·(I − Ī)²,   T_cl = 2π / |E′|,   T_rev = 2π / |E″|
//! ```
//!
//! `E″` is the Taylor *coefficient* (half the second derivative), so the
//! ideal rotor `E_I = B·I(I+1)` has `E″ = B` and `T_rev = 2π/B`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherent_state::WavePacket;
use crate::error::{Error, Result};

/// One rotational level: angular momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub spin: u32,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumModel {
    /// `E_I = B·I(I+1)` with `B = ħ²/2J`.
    IdealRotor { b: f64 },
    /// Tabulated band; spins strictly increasing, energies non-decreasing.
    Tabulated { levels: Vec<Level> },
}

impl SpectrumModel {
    pub fn ideal(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Domain(format!("rotational constant must be positive, got {b}")));
        }
        Ok(SpectrumModel::IdealRotor { b })
    }

    pub fn tabulated(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Validation("tabulated spectrum has no levels".into()));
        }
        for w in levels.windows(2) {
            if w[1].spin <= w[0].spin {
                return Err(Error::Validation(format!(
                    "spins must be strictly increasing: I = {} follows I = {}",
                    w[1].spin, w[0].spin
                )));
            }
            if w[1].energy < w[0].energy {
                return Err(Error::Validation(format!(
                    "energies must be non-decreasing: E(I = {}) = {} < E(I = {}) = {}",
                    w[1].spin, w[1].energy, w[0].spin, w[0].energy
                )));
            }
        }
        if let Some(l) = levels.iter().find(|l| !l.energy.is_finite()) {
            return Err(Error::Validation(format!("non-finite energy at I = {}", l.spin)));
        }
        Ok(SpectrumModel::Tabulated { levels })
    }

    pub fn energy(&self, spin: usize) -> Option<f64> {
        match self {
            SpectrumModel::IdealRotor { b } => Some(b * (spin * (spin + 1)) as f64),
            SpectrumModel::Tabulated { levels } => levels
                .binary_search_by_key(&spin, |l| l.spin as usize)
                .ok()
                .map(|k| levels[k].energy),
        }
    }

    /// Spins carried by `wp` (nonzero coefficients) that the spectrum lacks.
    pub fn missing_spins(&self, wp: &WavePacket) -> Vec<usize> {
        (0..=wp.l_max())
            .filter(|&l| {
                let li = l as i32;
                (-li..=li).any(|m| wp.coeff(l, m) != Complex64::new(0.0, 0.0)) && self.energy(l).is_none()
            })
            .collect()
    }

    pub fn check_covers(&self, wp: &WavePacket) -> Result<()> {
        let missing = self.missing_spins(wp);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(format!("spectrum has no level for I = {missing:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScales {
    pub t_cl: f64,
    pub t_rev: f64,
    pub i_bar: f64,
    /// Exact recurrence period of the `I(I+1)` phases (`t_rev / 2`); ideal rotor only.
    pub t_period: Option<f64>,
}

pub fn timescales(spectrum: &SpectrumModel, i_bar: f64) -> Result<TimeScales> {
    if !(i_bar.is_finite() && i_bar >= 1.0) {
        return Err(Error::Domain(format!("mean angular momentum must be >= 1, got {i_bar}")));
    }
    let (d1, d2) = match spectrum {
        SpectrumModel::IdealRotor { b } => (b * (2.0 * i_bar + 1.0), *b),
        SpectrumModel::Tabulated { levels } => tabulated_derivatives(levels, i_bar)?,
    };
    if d1 == 0.0 || d2 == 0.0 {
        return Err(Error::Data(format!(
            "degenerate spectrum at I = {i_bar}: E' = {d1}, E'' = {d2}"
        )));
    }
    let t_rev = 2.0 * PI / d2.abs();
    Ok(TimeScales {
        t_cl: 2.0 * PI / d1.abs(),
        t_rev,
        i_bar,
        t_period: matches!(spectrum, SpectrumModel::IdealRotor { .. }).then_some(t_rev / 2.0),
    })
}

/// Central differences at the tabulated level nearest `i_bar`, with spin
/// step 1 when both neighbours exist and step 2 otherwise (bands of one
/// signature, e.g. even-`I` ground bands).
fn tabulated_derivatives(levels: &[Level], i_bar: f64) -> Result<(f64, f64)> {
    let energy = |s: i64| -> Option<f64> {
        (s >= 0)
            .then(|| levels.binary_search_by_key(&s, |l| l.spin as i64).ok())
            .flatten()
            .map(|k| levels[k].energy)
    };
    let mut centres: Vec<i64> = levels.iter().map(|l| l.spin as i64).collect();
    centres.sort_by(|a, b| {
        let (da, db) = ((*a as f64 - i_bar).abs(), (*b as f64 - i_bar).abs());
        da.total_cmp(&db).then(a.cmp(b))
    });
    let nearest = centres.first().copied().unwrap_or(0);
    // only levels as close as the nearest one are eligible centres
    let reach = (nearest as f64 - i_bar).abs() + 1e-9;
    for &c in centres.iter().take_while(|c| (**c as f64 - i_bar).abs() <= reach) {
        for h in [1i64, 2] {
            if let (Some(lo), Some(mid), Some(hi)) = (energy(c - h), energy(c), energy(c + h)) {
                let hf = h as f64;
                return Ok(((hi - lo) / (2.0 * hf), (hi - 2.0 * mid + lo) / (2.0 * hf * hf)));
            }
        }
    }
    Err(Error::Data(format!(
        "no level triplet around I = {nearest} (nearest tabulated spin to {i_bar})"
    )))
}

/// Phase-rotate every coefficient by `e^{−i E_I t}`.
pub fn propagate(wp: &WavePacket, spectrum: &SpectrumModel, t: f64) -> Result<WavePacket> {
    spectrum.check_covers(wp)?;
    let mut coeffs = wp.coeffs().clone();
    let mut phase = vec![Complex64::new(1.0, 0.0); wp.l_max() + 1];
    for (l, p) in phase.iter_mut().enumerate() {
        if let Some(e) = spectrum.energy(l) {
            *p = Complex64::from_polar(1.0, -e * t);
        }
    }
    coeffs.map_indexed(|l, _, c| c * phase[l]);
    Ok(wp.with_coeffs(coeffs))
}

/// `⟨a|b⟩ = Σ conj(a_IM) b_IM`, zero-padding the shorter table.
pub fn autocorrelation(a: &WavePacket, b: &WavePacket) -> Complex64 {
    let l = a.l_max().min(b.l_max());
    let n = (l + 1) * (l + 1);
    a.coeffs().values()[..n]
        .iter()
        .zip(&b.coeffs().values()[..n])
        .map(|(x, y)| x.conj() * y)
        .sum()
}

/// `|⟨ψ(0)|ψ(t)⟩|` at each time in `times`.
pub fn autocorrelation_series(wp: &WavePacket, spectrum: &SpectrumModel, times: &[f64]) -> Result<Vec<f64>> {
    spectrum.check_covers(wp)?;
    // ⟨ψ|ψ(t)⟩ = Σ_I p_I e^{−i E_I t}
    let weights: Vec<(f64, f64)> = (0..=wp.l_max())
        .filter_map(|l| {
            let li = l as i32;
            let p: f64 = (-li..=li).map(|m| wp.coeff(l, m).norm_sqr()).sum();
            (p > 0.0).then(|| (p, spectrum.energy(l).unwrap_or(0.0)))
        })
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            weights
                .iter()
                .map(|&(p, e)| Complex64::from_polar(p, -e * t))
                .sum::<Complex64>()
                .norm()
        })
        .collect())
}
