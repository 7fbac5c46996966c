//! Two-parameter angular-momentum coherent states
//!
//! ```text
//! Ψ_{N,η}(θ, φ) = √(N / (2π sinh 2N)) · exp[N sin θ (cos φ + iη sin φ)]
//! ```
//!
//! and their expansion over `Y^I_M`. The state is peaked at `+x`; for
//! `η ≠ 0` it circulates about `z`, which is the natural quantization axis
//! (`η = ±1` populates only `M = ±I`). The linear state `η = 0` has no
//! circulation and is cylindrically symmetric about its own peak
//! direction, so it is expanded with that direction as the quantization
//! axis, where only `M = 0` survives. See [`Frame`].

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere_basis::{project_filtered, HarmonicTable, QuadratureGrid};

/// Hard ceiling on truncation orders.
pub const LMAX_CAP: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentStateParams {
    n: f64,
    eta: f64,
}

impl CoherentStateParams {
    pub fn new(n: f64, eta: f64) -> Result<Self> {
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Domain(format!("size parameter N must be positive, got {n}")));
        }
        if !(eta.is_finite() && eta.abs() <= 1.0) {
            return Err(Error::Domain(format!("ellipticity eta must lie in [-1, 1], got {eta}")));
        }
        Ok(Self { n, eta })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `ln √(N / (2π sinh 2N))`, stable for large `N`.
    fn log_prefactor(&self) -> f64 {
        let two_n = 2.0 * self.n;
        let ln_sinh = two_n - std::f64::consts::LN_2 + (-(-2.0 * two_n).exp()).ln_1p();
        0.5 * (self.n.ln() - (2.0 * PI).ln() - ln_sinh)
    }

    /// Amplitude at the unit vector `(x, y, _)` of the defining frame.
    #[inline]
    fn amplitude_cartesian(&self, x: f64, y: f64) -> Complex64 {
        Complex64::from_polar((self.log_prefactor() + self.n * x).exp(), self.n * self.eta * y)
    }
}

/// Quantization axis used for the `Y^I_M` expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `z` is the circulation axis; the amplitude is literally `Ψ_{N,η}(θ, φ)`.
    RotationAxis,
    /// `z` points at the packet's peak. Directions map cyclically
    /// `(x', y', z') = (y, z, x)`, a proper rotation of the defining frame.
    SymmetryAxis,
}

impl Frame {
    /// `SymmetryAxis` for the linear state, `RotationAxis` otherwise.
    pub fn natural(eta: f64) -> Self {
        if eta == 0.0 {
            Frame::SymmetryAxis
        } else {
            Frame::RotationAxis
        }
    }
}

/// The closed form, in the defining frame.
pub fn evaluate_cs(params: &CoherentStateParams, theta: f64, phi: f64) -> Complex64 {
    let s = theta.sin();
    params.amplitude_cartesian(s * phi.cos(), s * phi.sin())
}

/// The same state seen from `frame`: `(θ, φ)` are angles in that frame.
pub fn evaluate_cs_in_frame(
    params: &CoherentStateParams,
    frame: Frame,
    theta: f64,
    phi: f64,
) -> Complex64 {
    match frame {
        Frame::RotationAxis => evaluate_cs(params, theta, phi),
        Frame::SymmetryAxis => {
            // defining-frame x is the new z, defining-frame y is the new x
            let x = theta.cos();
            let y = theta.sin() * phi.cos();
            params.amplitude_cartesian(x, y)
        }
    }
}

/// Truncated expansion `Σ b_IM Y^I_M` of a state at one instant.
///
/// `norm_defect` is the truncation defect `1 − Σ|b|²` measured when the
/// packet was built. It is kept as recorded even if the coefficients were
/// renormalized afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    coeffs: HarmonicTable,
    tol: f64,
    norm_defect: f64,
}

impl WavePacket {
    /// Wrap a coefficient table; the defect is measured from it.
    pub fn new(coeffs: HarmonicTable, tol: f64) -> Self {
        let norm_defect = 1.0 - coeffs.norm_sqr();
        Self {
            coeffs,
            tol,
            norm_defect,
        }
    }

    pub(crate) fn with_defect(coeffs: HarmonicTable, tol: f64, norm_defect: f64) -> Self {
        Self {
            coeffs,
            tol,
            norm_defect,
        }
    }

    pub fn l_max(&self) -> usize {
        self.coeffs.l_max()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn norm_defect(&self) -> f64 {
        self.norm_defect
    }

    pub fn coeffs(&self) -> &HarmonicTable {
        &self.coeffs
    }

    pub fn coeff(&self, l: usize, m: i32) -> Complex64 {
        self.coeffs.get(l, m)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.norm_sqr()
    }

    /// Unit-norm copy; `norm_defect` is left as recorded.
    pub fn renormalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::Validation("cannot renormalize an all-zero packet".into()));
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.values_mut().iter_mut().for_each(|c| *c /= n);
        Ok(Self::with_defect(coeffs, self.tol, self.norm_defect))
    }

    /// Same packet with new coefficients (a time-evolved or rotated copy).
    pub fn with_coeffs(&self, coeffs: HarmonicTable) -> Self {
        Self::with_defect(coeffs, self.tol, self.norm_defect)
    }

    /// `Σ I |b_IM|² / Σ |b_IM|²`.
    pub fn mean_degree(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (l, _, c) in self.coeffs.iter() {
            let p = c.norm_sqr();
            num += l as f64 * p;
            den += p;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// True when every `M ≠ 0` coefficient is exactly zero.
    pub fn is_cylindrical(&self) -> bool {
        self.coeffs.iter().all(|(_, m, c)| m == 0 || c == Complex64::new(0.0, 0.0))
    }

    pub fn evaluate(&self, theta: f64, phi: f64) -> Complex64 {
        self.coeffs.synthesize(theta, phi)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = WavePacketDoc {
            l_max: self.l_max(),
            tol: self.tol,
            norm_defect: self.norm_defect,
            coeffs: self.coeffs.iter().map(|(l, m, c)| (l, m, c.re, c.im)).collect(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WavePacketDoc =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("wave packet JSON: {e}")))?;
        if doc.l_max > LMAX_CAP {
            return Err(Error::Resource(format!("l_max {} exceeds cap {LMAX_CAP}", doc.l_max)));
        }
        let mut coeffs = HarmonicTable::zeros(doc.l_max);
        let mut seen = vec![false; (doc.l_max + 1) * (doc.l_max + 1)];
        for (l, m, re, im) in doc.coeffs {
            if l > doc.l_max || m.unsigned_abs() as usize > l {
                return Err(Error::Validation(format!(
                    "coefficient index (I = {l}, M = {m}) invalid for l_max = {}",
                    doc.l_max
                )));
            }
            let k = (l * l + l).wrapping_add_signed(m as isize);
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::Validation(format!("duplicate coefficient (I = {l}, M = {m})")));
            }
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::Validation(format!("non-finite coefficient at (I = {l}, M = {m})")));
            }
            coeffs.set(l, m, Complex64::new(re, im));
        }
        Ok(Self::with_defect(coeffs, doc.tol, doc.norm_defect))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct WavePacketDoc {
    l_max: usize,
    tol: f64,
    norm_defect: f64,
    coeffs: Vec<(usize, i32, f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExpandOptions {
    /// `None` picks [`Frame::natural`].
    pub frame: Option<Frame>,
    /// Rescale to unit norm after truncation.
    pub renormalize: bool,
    /// Skip entries that vanish identically in the circular and linear limits.
    pub use_symmetry: bool,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self {
            frame: None,
            renormalize: false,
            use_symmetry: true,
        }
    }
}

/// Projection grid band for a non-band-limited integrand; aliasing enters
/// only through content above `2·band − l_max`.
fn projection_band(l_max: usize) -> usize {
    l_max + l_max / 2 + 16
}

fn project_cs(params: &CoherentStateParams, l_max: usize, opts: &ExpandOptions) -> Result<HarmonicTable> {
    if l_max > LMAX_CAP {
        return Err(Error::Resource(format!("l_max {l_max} exceeds cap {LMAX_CAP}")));
    }
    let frame = opts.frame.unwrap_or(Frame::natural(params.eta));
    let grid = QuadratureGrid::for_band(projection_band(l_max));
    let f = |t: f64, p: f64| evaluate_cs_in_frame(params, frame, t, p);
    let eta = params.eta;
    match (opts.use_symmetry, frame) {
        (true, Frame::RotationAxis) if eta == 1.0 => project_filtered(f, l_max, &grid, |l, m| m == l as i32),
        (true, Frame::RotationAxis) if eta == -1.0 => project_filtered(f, l_max, &grid, |l, m| m == -(l as i32)),
        (true, Frame::SymmetryAxis) if eta == 0.0 => project_filtered(f, l_max, &grid, |_, m| m == 0),
        _ => project_filtered(f, l_max, &grid, |_, _| true),
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Expand with default options.
pub fn expand_cs(params: &CoherentStateParams, l_max: usize, tol: f64) -> Result<WavePacket> {
    expand_cs_with(params, l_max, tol, &ExpandOptions::default())
}

/// Expand `Ψ_{N,η}` up to `l_max`, failing if the norm defect is not below `tol`.
pub fn expand_cs_with(
    params: &CoherentStateParams,
    l_max: usize,
    tol: f64,
    opts: &ExpandOptions,
) -> Result<WavePacket> {
    check_tol(tol)?;
    let coeffs = project_cs(params, l_max, opts)?;
    let defect = 1.0 - coeffs.norm_sqr();
    if defect >= tol {
        return Err(Error::Truncation {
            l_max,
            achieved: defect,
            tol,
        });
    }
    let wp = WavePacket::with_defect(coeffs, tol, defect);
    if opts.renormalize {
        wp.renormalized()
    } else {
        Ok(wp)
    }
}

/// Smallest `l_max` whose truncation defect is below `tol`.
pub fn suggest_lmax(params: &CoherentStateParams, tol: f64) -> Result<usize> {
    check_tol(tol)?;
    let opts = ExpandOptions::default();
    let mut l = 8;
    let coeffs = loop {
        let c = project_cs(params, l, &opts)?;
        if 1.0 - c.norm_sqr() < tol {
            break c;
        }
        if l == LMAX_CAP {
            return Err(Error::Resource(format!(
                "norm defect {:.3e} still above {tol:.3e} at the l_max cap {LMAX_CAP}",
                1.0 - c.norm_sqr()
            )));
        }
        l = (2 * l).min(LMAX_CAP);
    };
    // coefficients at I <= L do not depend on where the table is truncated
    let mut cum = 0.0;
    for degree in 0..=coeffs.l_max() {
        let li = degree as i32;
        cum += (-li..=li).map(|m| coeffs.get(degree, m).norm_sqr()).sum::<f64>();
        if 1.0 - cum < tol {
            return Ok(degree);
        }
    }
    Ok(coeffs.l_max())
}

/// Closed-form `|b_II|²` of the circular state, `u^{2I+1} / ((2I+1)! sinh u)`
/// with `u = 2N`, for `I ≤ l_max`.
pub fn circular_weights(n: f64, l_max: usize) -> Vec<f64> {
    let u = 2.0 * n;
    let ln_u = u.ln();
    let ln_sinh = u - std::f64::consts::LN_2 + (-(-2.0 * u).exp()).ln_1p();
    let mut ln_fact = 0.0; // ln (2I+1)!
    (0..=l_max)
        .map(|i| {
            let k = 2 * i + 1;
            ln_fact += if k == 1 { 0.0 } else { ((k - 1) as f64).ln() + (k as f64).ln() };
            (k as f64 * ln_u - ln_fact - ln_sinh).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(n: f64, eta: f64) -> CoherentStateParams {
        CoherentStateParams::new(n, eta).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(CoherentStateParams::new(0.0, 0.5).is_err());
        assert!(CoherentStateParams::new(-1.0, 0.5).is_err());
        assert!(CoherentStateParams::new(1.0, 1.01).is_err());
        assert!(CoherentStateParams::new(1.0, f64::NAN).is_err());
        assert!(CoherentStateParams::new(1.0, -1.0).is_ok());
    }

    #[test]
    fn pole_value_and_eta_independent_density() {
        let p = cs(1.0, 0.0);
        let want = (1.0 / (2.0 * PI * 2f64.sinh())).sqrt();
        for phi in [0.0, 1.0, 3.0] {
            assert!((evaluate_cs(&p, 0.0, phi) - want).norm() < 1e-15);
        }
        for (t, ph) in [(0.3, 0.2), (1.5, 2.5), (2.9, 5.0)] {
            let d0 = evaluate_cs(&cs(7.0, 0.0), t, ph).norm_sqr();
            for eta in [0.3, -0.8, 1.0] {
                let d = evaluate_cs(&cs(7.0, eta), t, ph).norm_sqr();
                assert!((d - d0).abs() <= 1e-14 * d0.max(1e-300));
            }
        }
    }

    #[test]
    fn large_n_does_not_overflow() {
        let p = cs(500.0, 0.5);
        let v = evaluate_cs(&p, PI / 2.0, 0.0);
        assert!(v.is_finite());
        // peak density is N/(2π sinh 2N) e^{2N} → N/π
        assert!((v.norm_sqr() - 500.0 / PI).abs() / (500.0 / PI) < 1e-12);
    }

    #[test]
    fn closed_form_is_normalized() {
        let g = QuadratureGrid::for_band(120);
        for n in [1.0, 5.0, 20.0] {
            for eta in [0.0, 0.3, 1.0] {
                let p = cs(n, eta);
                let q = g.integrate(|t, ph| Complex64::from(evaluate_cs(&p, t, ph).norm_sqr()));
                assert!((q.re - 1.0).abs() < 1e-12, "N={n} eta={eta}: {q}");
            }
        }
    }

    #[test]
    fn frames_are_related_by_rotation() {
        let p = cs(4.0, 0.6);
        // new-frame angles (θ', φ') ↔ defining-frame unit vector (z', x', y')
        for (t, ph) in [(0.4f64, 1.1f64), (2.0, 4.0), (1.2, 0.0)] {
            let (x, y, z) = (t.cos(), t.sin() * ph.cos(), t.sin() * ph.sin());
            let theta0 = z.acos();
            let phi0 = y.atan2(x);
            let a = evaluate_cs_in_frame(&p, Frame::SymmetryAxis, t, ph);
            let b = evaluate_cs(&p, theta0, phi0);
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn circular_and_linear_limits() {
        let wp = expand_cs(&cs(20.0, 1.0), 60, 1e-10).unwrap();
        let off: f64 = wp.coeffs().iter().filter(|(l, m, _)| *m != *l as i32).map(|(_, _, c)| c.norm_sqr()).sum();
        assert!(off < 1e-10);
        let wp = expand_cs(&cs(20.0, 0.0), 60, 1e-10).unwrap();
        assert!(wp.is_cylindrical());
        // the general projection path agrees with the special-cased one
        let opts = ExpandOptions {
            use_symmetry: false,
            ..Default::default()
        };
        for eta in [1.0, 0.0, -1.0] {
            let p = cs(20.0, eta);
            let fast = expand_cs(&p, 60, 1e-10).unwrap();
            let full = expand_cs_with(&p, 60, 1e-10, &opts).unwrap();
            for (a, b) in fast.coeffs().values().iter().zip(full.coeffs().values()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rotation_axis_frame_for_linear_state_is_not_cylindrical() {
        let opts = ExpandOptions {
            frame: Some(Frame::RotationAxis),
            ..Default::default()
        };
        let wp = expand_cs_with(&cs(20.0, 0.0), 60, 1e-10, &opts).unwrap();
        let off: f64 = wp.coeffs().iter().filter(|(_, m, _)| *m != 0).map(|(_, _, c)| c.norm_sqr()).sum();
        assert!(off > 0.5);
    }

    #[test]
    fn truncation_error_reports_defect() {
        match expand_cs(&cs(20.0, 0.3), 10, 1e-8) {
            Err(Error::Truncation { l_max, achieved, tol }) => {
                assert_eq!(l_max, 10);
                assert!(achieved > 1e-3 && tol == 1e-8, "{achieved}");
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
        assert!(matches!(expand_cs(&cs(1.0, 0.3), 10, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn renormalize_keeps_recorded_defect() {
        let opts = ExpandOptions {
            renormalize: true,
            ..Default::default()
        };
        let plain = expand_cs(&cs(5.0, 0.3), 10, 1e-3).unwrap();
        let wp = expand_cs_with(&cs(5.0, 0.3), 10, 1e-3, &opts).unwrap();
        assert!((wp.norm_sqr() - 1.0).abs() < 1e-14);
        assert_eq!(wp.norm_defect(), plain.norm_defect());
        assert!(plain.norm_defect() > 1e-8);
    }

    #[test]
    fn suggested_lmax_is_minimal() {
        let p = cs(20.0, 1.0);
        let l = suggest_lmax(&p, 1e-8).unwrap();
        assert!(expand_cs(&p, l, 1e-8).is_ok());
        assert!(matches!(expand_cs(&p, l - 1, 1e-8), Err(Error::Truncation { .. })));
        assert!(matches!(expand_cs(&p, l - 5, 1e-8), Err(Error::Truncation { .. })));
        assert!(suggest_lmax(&cs(0.5, 0.3), 1e-6).unwrap() <= 10);
        let coarse = suggest_lmax(&cs(10.0, 0.3), 1e-2).unwrap();
        let fine = suggest_lmax(&cs(10.0, 0.3), 1e-10).unwrap();
        assert!(coarse < fine);
    }

    #[test]
    fn cap_exceeded_is_resource_error() {
        assert!(matches!(suggest_lmax(&cs(400.0, 1.0), 1e-8), Err(Error::Resource(_))));
    }

    #[test]
    fn circular_weights_match_projection() {
        let wp = expand_cs(&cs(20.0, 1.0), 70, 1e-12).unwrap();
        let w = circular_weights(20.0, 70);
        for (i, wi) in w.iter().enumerate() {
            let got = wp.coeff(i, i as i32).norm_sqr();
            assert!((got - wi).abs() < 1e-13, "I = {i}: {got} vs {wi}");
        }
        let s: f64 = circular_weights(20.0, 200).iter().sum();
        assert!((s - 1.0).abs() < 1e-13);
        // peak near N, mean within 2 of N - 1/2
        let mean: f64 = w.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
        assert!((mean - 19.5).abs() < 2.0);
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let wp = expand_cs(&cs(3.0, 0.4), 14, 1e-4).unwrap();
        let back = WavePacket::from_json(&wp.to_json().unwrap()).unwrap();
        assert_eq!(back, wp);
        let bad = r#"{"l_max": 2, "tol": 1e-8, "norm_defect": 0.0, "coeffs": [[1, 2, 1.0, 0.0]]}"#;
        assert!(WavePacket::from_json(bad).is_err());
        let dup = r#"{"l_max": 2, "tol": 1e-8, "norm_defect": 0.0, "coeffs": [[1, 1, 1.0, 0.0], [1, 1, 0.0, 0.0]]}"#;
        assert!(WavePacket::from_json(dup).is_err());
    }
}
