//! Fractional revivals of the `I(I+1)` rotor.
//!
//! At `t = (m/n)·T_rev` every coefficient carries the phase
//! `e^{−2πi (m/n) I(I+1)}`. Writing the quadratic part as a finite Fourier
//! series over its period `l`,
//!
//! ```text
//! e^{−2πi k² m/n} = Σ_{s<l} a_s e^{−2πi k s/l}
//! ```
//!
//! splits the packet into `l` components `Ψ^s` with coefficients
//! `b_IM e^{−i I β_s}`, `β_s = 2π(s/l + m/n)`. When `M = I` that phase is
//! an azimuthal rotation and every component is a clone; otherwise the
//! component is only similar to the initial packet (a mutant) unless
//! `β_s ≡ 0` or `π`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherent_state::WavePacket;
use crate::error::{Error, Result};

pub const DEFAULT_CLONE_THRESHOLD: f64 = 0.99;

/// Overlaps below this are treated as numerically zero.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Components with `|a_s|²` below this take no part in attribution.
const ACTIVE_WEIGHT: f64 = 1e-12;

/// Largest tolerated deviation of `wp_t` from the ideal-rotor prediction.
const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionalTime {
    m: u64,
    n: u64,
}

impl FractionalTime {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Domain(format!("fractional time needs m, n >= 1 (got {m}/{n})")));
        }
        if m > n {
            return Err(Error::Domain(format!("fractional time {m}/{n} exceeds 1")));
        }
        if gcd(m, n) != 1 {
            return Err(Error::Domain(format!("{m} and {n} are not coprime")));
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn fraction(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// Period of `k ↦ e^{−2πi k² m/n}`.
    pub fn period(&self) -> u64 {
        if self.n.is_multiple_of(4) {
            self.n / 2
        } else {
            self.n
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn clone_count(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        n / 2
    } else {
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevivalDecomposition {
    pub time: FractionalTime,
    pub l: usize,
    pub a: Vec<Complex64>,
    pub predicted_clones: u64,
}

impl RevivalDecomposition {
    /// `Σ_s a_s e^{−2πi k s/l}`.
    pub fn reconstruct(&self, k: i64) -> Complex64 {
        let l = self.l as i64;
        self.a
            .iter()
            .enumerate()
            .map(|(s, a)| a * unit(-(k.rem_euclid(l) * s as i64 % l) as f64 / l as f64))
            .sum()
    }

    /// Rotation angle `β_s` carried by component `s`, in `[0, 2π)`.
    pub fn component_angle(&self, s: usize) -> f64 {
        let t = &self.time;
        // s/l + m/n reduced exactly before scaling
        let (num, den) = ((s as u64 * t.n + t.m * self.l as u64), self.l as u64 * t.n);
        TAU * (num % den) as f64 / den as f64
    }
}

/// `e^{2πi x}` with the argument reduced to one turn.
fn unit(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * x.rem_euclid(1.0))
}

/// `e^{−2πi k² m/n}` evaluated with exact integer reduction of `k² m mod n`.
fn quadratic_phase(k: i64, ft: &FractionalTime) -> Complex64 {
    let n = ft.n as i128;
    let r = ((k as i128 * k as i128).rem_euclid(n) * ft.m as i128).rem_euclid(n);
    unit(-(r as f64) / ft.n as f64)
}

pub fn gauss_coefficients(ft: FractionalTime) -> RevivalDecomposition {
    let l = ft.period() as usize;
    let f: Vec<Complex64> = (0..l as i64).map(|k| quadratic_phase(k, &ft)).collect();
    let a = (0..l)
        .map(|s| {
            f.iter()
                .enumerate()
                .map(|(k, fk)| fk * unit(((k * s) % l) as f64 / l as f64))
                .sum::<Complex64>()
                / l as f64
        })
        .collect();
    RevivalDecomposition {
        time: ft,
        l,
        a,
        predicted_clones: clone_count(ft.n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Clone,
    Mutant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedFeature {
    /// Rotation angle in `[0, 2π)` best aligning the initial packet with the component.
    pub azimuth: f64,
    /// Best overlap of the attributed component with a rotated initial packet.
    pub fidelity: f64,
    pub kind: FeatureKind,
    /// Raw `|⟨R_z(α) ψ₀ | ψ_t⟩|` at the scan peak attributed to this feature.
    pub overlap: f64,
    /// Index `s` of the Gauss-sum component the feature belongs to.
    pub component: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionStatus {
    Ok,
    /// Every scanned overlap was below the noise floor.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub features: Vec<DetectedFeature>,
    pub status: DetectionStatus,
}

/// Per-`M` sums turning a rotation overlap into a short Fourier series:
/// `⟨R_z(α) a | b⟩ = Σ_M e^{iMα} G_M`, `G_M = Σ_I conj(a_IM) b_IM`.
struct RotationOverlap {
    g: Vec<Complex64>,
}

impl RotationOverlap {
    fn new(a: &WavePacket, b_coeff: impl Fn(usize, i32) -> Complex64) -> Self {
        let l_max = a.l_max() as i32;
        let mut g = vec![Complex64::new(0.0, 0.0); (2 * l_max + 1) as usize];
        for (l, m, c) in a.coeffs().iter() {
            g[(m + l_max) as usize] += c.conj() * b_coeff(l, m);
        }
        Self { g }
    }

    fn at(&self, alpha: f64) -> f64 {
        let step = Complex64::from_polar(1.0, alpha);
        // Horner in e^{iα}; the missing e^{−i l_max α} drops out of the modulus
        let mut acc = Complex64::new(0.0, 0.0);
        for gm in self.g.iter().rev() {
            acc = acc * step + gm;
        }
        acc.norm()
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

fn scan(f: &impl Fn(f64) -> f64, n_scan: usize) -> Vec<f64> {
    (0..n_scan).map(|k| f(TAU * k as f64 / n_scan as f64)).collect()
}

/// Best rotation angle and value of `f` over the circle.
fn global_max(f: impl Fn(f64) -> f64, n_scan: usize) -> (f64, f64) {
    let values = scan(&f, n_scan);
    let (k, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
    refine(&f, k, n_scan)
}

fn refine(f: &impl Fn(f64) -> f64, k: usize, n_scan: usize) -> (f64, f64) {
    let h = TAU / n_scan as f64;
    let centre = h * k as f64;
    let (x, v) = golden_max(f, centre - h, centre + h);
    let grid = f(centre);
    if grid >= v {
        (centre.rem_euclid(TAU), grid)
    } else {
        (x.rem_euclid(TAU), v)
    }
}

fn check_normalized(wp: &WavePacket, what: &str) -> Result<()> {
    let defect = (wp.norm_sqr() - 1.0).abs();
    if defect > 1e-6 {
        return Err(Error::Validation(format!("{what} packet is not normalized (|1 − Σ|b|²| = {defect:.3e})")));
    }
    Ok(())
}

/// Find the fractional-revival features of `wp_t`, the evolution of `wp_0`
/// under `E_I ∝ I(I+1)` to `t = (m/n)·T_rev`.
///
/// Peaks of the rotation overlap `|⟨R_z(α) ψ₀ | ψ_t⟩|` locate the features.
/// Each peak is attributed to the Gauss-sum component contributing most at
/// that angle. The feature's fidelity and azimuth come from the best overlap
/// of that (unit-norm) component with a rotated `ψ₀`, so neighbouring
/// components do not pull the reported position.
pub fn detect_features(
    wp_t: &WavePacket,
    wp_0: &WavePacket,
    ft: FractionalTime,
    clone_threshold: f64,
    n_scan: usize,
) -> Result<Detection> {
    if n_scan < 8 * ft.n as usize {
        return Err(Error::Config(format!("n_scan = {n_scan} below 8·n = {}", 8 * ft.n)));
    }
    if !(clone_threshold > 0.0 && clone_threshold <= 1.0) {
        return Err(Error::Domain(format!("clone threshold must lie in (0, 1], got {clone_threshold}")));
    }
    check_normalized(wp_t, "evolved")?;
    check_normalized(wp_0, "initial")?;

    let dec = gauss_coefficients(ft);
    check_consistent(wp_t, wp_0, &ft)?;

    let raw = RotationOverlap::new(wp_0, |l, m| wp_t.coeff(l, m));
    let raw_at = |a: f64| raw.at(a);
    let values = scan(&raw_at, n_scan);
    let top = values.iter().cloned().fold(0.0, f64::max);
    if top < NOISE_FLOOR {
        log::warn!("rotation overlap below {NOISE_FLOOR:e} everywhere; no features");
        return Ok(Detection {
            features: Vec::new(),
            status: DetectionStatus::Degenerate,
        });
    }

    let norm0 = wp_0.norm_sqr();
    let components: Vec<(usize, RotationOverlap)> = (0..dec.l)
        .filter(|&s| dec.a[s].norm_sqr() > ACTIVE_WEIGHT)
        .map(|s| {
            let beta = dec.component_angle(s);
            let phase: Vec<Complex64> = (0..=wp_0.l_max())
                .map(|l| Complex64::from_polar(1.0, -(l as f64) * beta))
                .collect();
            (s, RotationOverlap::new(wp_0, |l, m| wp_0.coeff(l, m) * phase[l]))
        })
        .collect();

    let bottom = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let peaks: Vec<(f64, f64)> = if top - bottom <= 1e-9 * top {
        // rotation-invariant packet: the whole scan is one feature
        vec![(0.0, values[0])]
    } else {
        (0..n_scan)
            .filter(|&k| {
                let (prev, next) = (values[(k + n_scan - 1) % n_scan], values[(k + 1) % n_scan]);
                values[k] > prev && values[k] >= next && values[k] >= NOISE_FLOOR.max(1e-3 * top)
            })
            .map(|k| refine(&raw_at, k, n_scan))
            .collect()
    };

    let mut claimed: Vec<DetectedFeature> = Vec::new();
    for (peak, overlap) in peaks {
        let Some((s, comp)) = components.iter().max_by(|(s1, c1), (s2, c2)| {
            let w1 = dec.a[*s1].norm() * c1.at(peak);
            let w2 = dec.a[*s2].norm() * c2.at(peak);
            w1.total_cmp(&w2).then(s2.cmp(s1))
        }) else {
            continue;
        };
        if let Some(prev) = claimed.iter_mut().find(|f| f.component == *s) {
            prev.overlap = prev.overlap.max(overlap);
            continue;
        }
        let (best_angle, best) = global_max(|a| comp.at(a), n_scan);
        let fidelity = best / norm0;
        claimed.push(DetectedFeature {
            azimuth: best_angle,
            fidelity,
            kind: if fidelity >= clone_threshold {
                FeatureKind::Clone
            } else {
                FeatureKind::Mutant
            },
            overlap,
            component: *s,
        });
    }
    claimed.sort_by(|a, b| a.azimuth.total_cmp(&b.azimuth));
    Ok(Detection {
        features: claimed,
        status: DetectionStatus::Ok,
    })
}

/// `wp_t` must equal `Σ_s a_s Ψ^s` up to a global phase.
fn check_consistent(wp_t: &WavePacket, wp_0: &WavePacket, ft: &FractionalTime) -> Result<()> {
    let l_max = wp_t.l_max().max(wp_0.l_max());
    let phase: Vec<Complex64> = (0..=l_max as i64)
        .map(|l| {
            let e = (l * (l + 1)) as i128;
            let r = (e * ft.m as i128).rem_euclid(ft.n as i128);
            unit(-(r as f64) / ft.n as f64)
        })
        .collect();
    let predicted = |l: usize, m: i32| wp_0.coeff(l, m) * phase[l];
    let mut cross = Complex64::new(0.0, 0.0);
    for l in 0..=l_max {
        let li = l as i32;
        for m in -li..=li {
            cross += predicted(l, m).conj() * wp_t.coeff(l, m);
        }
    }
    let c = if cross.norm() > 0.0 { cross / cross.norm() } else { Complex64::new(1.0, 0.0) };
    let mut residual = 0.0;
    for l in 0..=l_max {
        let li = l as i32;
        for m in -li..=li {
            residual += (wp_t.coeff(l, m) - c * predicted(l, m)).norm_sqr();
        }
    }
    let residual = residual.sqrt();
    if residual > CONSISTENCY_TOL {
        return Err(Error::Data(format!(
            "evolved packet is not the I(I+1) evolution of the initial packet to t = {}/{} T_rev \
             (residual {residual:.3e})",
            ft.m, ft.n
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevivalReport {
    pub m: u64,
    pub n: u64,
    pub l: usize,
    pub q_predicted: u64,
    pub clone_threshold: f64,
    pub coefficients: Vec<[f64; 2]>,
    pub features: Vec<DetectedFeature>,
    pub status: DetectionStatus,
}

impl RevivalReport {
    pub fn new(dec: &RevivalDecomposition, detection: &Detection, clone_threshold: f64) -> Self {
        Self {
            m: dec.time.m,
            n: dec.time.n,
            l: dec.l,
            q_predicted: dec.predicted_clones,
            clone_threshold,
            coefficients: dec.a.iter().map(|a| [a.re, a.im]).collect(),
            features: detection.features.clone(),
            status: detection.status,
        }
    }

    pub fn clones(&self) -> usize {
        self.features.iter().filter(|f| f.kind == FeatureKind::Clone).count()
    }
}
