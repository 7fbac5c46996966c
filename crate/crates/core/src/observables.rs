//! Angular-momentum moments from ladder-operator matrix elements.
//!
//! With `L± = L_x ± i L_y`:
//!
//! ```text
//! ⟨L_x⟩ = Re⟨L+⟩,   ⟨L_y⟩ = Im⟨L+⟩
//! ⟨L_x²⟩ = ( 2 Re⟨L+²⟩ + 2⟨L² − L_z²⟩) / 4
//! ⟨L_y²⟩ = (−2 Re⟨L+²⟩ + 2⟨L² − L_z²⟩) / 4
//! ```

use std::path::Path;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::coherent_state::WavePacket;
use crate::error::{Error, Result};
use crate::evolution::{autocorrelation, propagate, SpectrumModel};
use crate::format::sig9;

/// Largest `|1 − Σ|b|²|` accepted by [`angular_stats`].
pub const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularMomentumStats {
    pub mean_lx: f64,
    pub mean_ly: f64,
    pub mean_lz: f64,
    pub var_lx: f64,
    pub var_ly: f64,
    pub var_lz: f64,
    pub uncertainty_product: f64,
    pub min_uncertainty_rhs: f64,
}

/// `√(I(I+1) − M(M+1))`, the `L+` matrix element `⟨I, M+1|L+|I, M⟩`.
fn raise(l: usize, m: i32) -> f64 {
    let (l, m) = (l as f64, m as f64);
    (l * (l + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

pub fn angular_stats(wp: &WavePacket) -> Result<AngularMomentumStats> {
    let norm = wp.norm_sqr();
    if (1.0 - norm).abs() > NORM_TOL {
        return Err(Error::Validation(format!(
            "packet norm {norm} differs from 1 by more than {NORM_TOL:e}"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let (mut lz, mut lz2, mut l2) = (0.0, 0.0, 0.0);
    let (mut lp, mut lp2) = (zero, zero);
    for (l, m, b) in wp.coeffs().iter() {
        if b == zero {
            continue;
        }
        let p = b.norm_sqr();
        let mf = m as f64;
        lz += mf * p;
        lz2 += mf * mf * p;
        l2 += (l * (l + 1)) as f64 * p;
        let li = l as i32;
        if m < li {
            let r1 = raise(l, m);
            lp += wp.coeff(l, m + 1).conj() * r1 * b;
            if m + 1 < li {
                lp2 += wp.coeff(l, m + 2).conj() * (r1 * raise(l, m + 1)) * b;
            }
        }
    }
    let (lz, lz2, l2, lp, lp2) = (lz / norm, lz2 / norm, l2 / norm, lp / norm, lp2 / norm);
    let perp = l2 - lz2;
    let lx2 = (2.0 * lp2.re + 2.0 * perp) / 4.0;
    let ly2 = (-2.0 * lp2.re + 2.0 * perp) / 4.0;
    let var_lx = lx2 - lp.re * lp.re;
    let var_ly = ly2 - lp.im * lp.im;
    Ok(AngularMomentumStats {
        mean_lx: lp.re,
        mean_ly: lp.im,
        mean_lz: lz,
        var_lx,
        var_ly,
        var_lz: lz2 - lz * lz,
        uncertainty_product: var_lx * var_ly,
        min_uncertainty_rhs: 0.25 * lz * lz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimates {
    /// `⟨L_z⟩ / (2 ΔL_y²)`
    pub from_lz: f64,
    /// `±√(ΔL_x² / ΔL_y²)`, signed like `⟨L_z⟩`
    pub from_ratio: f64,
}

pub fn eta_relations(wp: &WavePacket) -> Result<EtaEstimates> {
    let s = angular_stats(wp)?;
    if s.var_ly < 1e-12 {
        return Err(Error::Domain(format!(
            "ΔL_y² = {:.3e} is too small for the η estimators",
            s.var_ly
        )));
    }
    let sign = if s.mean_lz < 0.0 { -1.0 } else { 1.0 };
    Ok(EtaEstimates {
        from_lz: s.mean_lz / (2.0 * s.var_ly),
        from_ratio: sign * (s.var_lx.max(0.0) / s.var_ly).sqrt(),
    })
}

/// `⟨L_z⟩ − (N − ½)` for the untruncated circular state, summed in exact
/// rational arithmetic.
///
/// The circular weights are `p_I ∝ u^{2I+1}/(2I+1)!` with `u = 2N`, and the
/// deviation is `2N/(e^{4N} − 1)`, which falls below the resolution of an
/// `f64` mean once `N ≳ 10`. Summing `Σ (I − N + ½) p_I` exactly keeps it
/// resolvable.
pub fn circular_lz_deviation(n: f64) -> Result<f64> {
    if !(n.is_finite() && n > 0.0 && n <= 200.0) {
        return Err(Error::Domain(format!("N must lie in (0, 200], got {n}")));
    }
    let nr = BigRational::from_float(n).ok_or_else(|| Error::Domain(format!("N = {n}")))?;
    let u = &nr * BigInt::from(2);
    let u2 = &u * &u;
    let half = BigRational::new(1.into(), 2.into());
    // stop once t_I / Z < e^{−4N − 80}: far below the deviation itself
    let cutoff = -4.0 * n - 80.0;
    let ln_z = 2.0 * n - std::f64::consts::LN_2 + (-(4.0 * n)).exp().ln_1p();
    let (mut term, mut ln_term) = (u.clone(), (2.0 * n).ln());
    let (mut z, mut s) = (BigRational::zero(), BigRational::zero());
    let mut i = 0u64;
    loop {
        let weight = BigRational::from_integer(i.into()) - &nr + &half;
        s += &term * weight;
        z += &term;
        if i as f64 > n && ln_term - ln_z < cutoff {
            break;
        }
        let step = ((2 * i + 2) * (2 * i + 3)) as f64;
        term = term * &u2 / BigInt::from((2 * i + 2) * (2 * i + 3));
        ln_term += (4.0 * n * n / step).ln();
        i += 1;
    }
    (s / z)
        .to_f64()
        .ok_or_else(|| Error::Domain("deviation not representable".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    pub t: f64,
    pub stats: AngularMomentumStats,
    pub autocorrelation_modulus: f64,
}

pub fn observable_series(wp: &WavePacket, spectrum: &SpectrumModel, times: &[f64]) -> Result<Vec<ObservableSample>> {
    times
        .iter()
        .map(|&t| {
            let wt = propagate(wp, spectrum, t)?;
            Ok(ObservableSample {
                t,
                stats: angular_stats(&wt)?,
                autocorrelation_modulus: autocorrelation(wp, &wt).norm(),
            })
        })
        .collect()
}

pub const SERIES_HEADER: [&str; 8] = [
    "t",
    "mean_lz",
    "var_lx",
    "var_ly",
    "var_lz",
    "uncertainty_product",
    "min_uncertainty_rhs",
    "autocorrelation_modulus",
];

pub fn write_series_csv(path: impl AsRef<Path>, samples: &[ObservableSample]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(SERIES_HEADER).map_err(csv_err)?;
    for s in samples {
        let st = &s.stats;
        let row = [
            s.t,
            st.mean_lz,
            st.var_lx,
            st.var_ly,
            st.var_lz,
            st.uncertainty_product,
            st.min_uncertainty_rhs,
            s.autocorrelation_modulus,
        ];
        w.write_record(row.iter().map(|&x| sig9(x))).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
