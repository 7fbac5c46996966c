//! Spherical-harmonic basis on the unit sphere.
//!
//! Conventions: complex harmonics with the Condon–Shortley phase,
//!
//! ```text
//! Y^I_M(θ, φ) = P̄_I^M(cos θ) e^{iMφ} / √(2π),      Y^I_{-M} = (-1)^M conj(Y^I_M)
//! ```
//!
//! where `P̄` is the fully normalized associated Legendre function
//! (`∫ P̄² dx = 1` on `[-1, 1]`). The normalization is carried inside the
//! recurrence so nothing passes through factorials.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Angular momentum `I` with projection `M`, `|M| ≤ I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HarmonicIndex {
    degree: u32,
    order: i32,
}

impl HarmonicIndex {
    pub fn new(degree: i64, order: i64) -> Result<Self> {
        if degree < 0 || order.abs() > degree || degree > i32::MAX as i64 {
            return Err(Error::Domain(format!(
                "invalid harmonic index (I = {degree}, M = {order})"
            )));
        }
        Ok(Self {
            degree: degree as u32,
            order: order as i32,
        })
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.degree
    }

    #[inline]
    pub fn order(&self) -> i32 {
        self.order
    }
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized `P̄_I^M(x)` including the Condon–Shortley phase.
///
/// `Y^I_M(θ,φ) = normalized_legendre(I, M, cos θ) · e^{iMφ} / √(2π)` for `0 ≤ M ≤ I`.
pub fn normalized_legendre(degree: i64, order: i64, x: f64) -> Result<f64> {
    if degree < 0 || order < 0 || order > degree {
        return Err(Error::Domain(format!(
            "normalized_legendre needs 0 <= M <= I, got I = {degree}, M = {order}"
        )));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    let (l, m) = (degree as usize, order as usize);
    let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();

    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -s * ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt();
    }
    if l == m {
        return Ok(pmm);
    }
    let mf = m as f64;
    let mut prev = pmm;
    let mut cur = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for k in (m + 2)..=l {
        let next = recur_step(k, m, x, cur, prev);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

#[inline]
fn recur_step(l: usize, m: usize, x: f64, p1: f64, p2: f64) -> f64 {
    let lf = l as f64;
    let mf = m as f64;
    let l2 = lf * lf;
    let m2 = mf * mf;
    let a = ((4.0 * l2 - 1.0) / (l2 - m2)).sqrt();
    let b = ((2.0 * lf + 1.0) * ((lf - 1.0) * (lf - 1.0) - m2) / ((2.0 * lf - 3.0) * (l2 - m2))).sqrt();
    a * x * p1 - b * p2
}

/// All `P̄_I^M(x)` for `0 ≤ M ≤ I ≤ l_max` at a single argument.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    l_max: usize,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn new(l_max: usize, x: f64) -> Self {
        let x = x.clamp(-1.0, 1.0);
        let mut values = vec![0.0; tri(l_max, l_max) + 1];
        let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
        values[0] = std::f64::consts::FRAC_1_SQRT_2;
        for m in 1..=l_max {
            let mf = m as f64;
            values[tri(m, m)] = -s * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * values[tri(m - 1, m - 1)];
        }
        for m in 0..l_max {
            let pmm = values[tri(m, m)];
            values[tri(m + 1, m)] = x * (2.0 * m as f64 + 3.0).sqrt() * pmm;
            for l in (m + 2)..=l_max {
                values[tri(l, m)] =
                    recur_step(l, m, x, values[tri(l - 1, m)], values[tri(l - 2, m)]);
            }
        }
        Self { l_max, values }
    }

    #[inline]
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// `P̄_l^m` for `0 ≤ m ≤ l ≤ l_max`.
    #[inline]
    pub fn get(&self, l: usize, m: usize) -> f64 {
        debug_assert!(m <= l && l <= self.l_max);
        self.values[tri(l, m)]
    }

    /// θ-part of `Y^l_m · √(2π)` for signed `m`.
    #[inline]
    pub fn theta_part(&self, l: usize, m: i32) -> f64 {
        let am = m.unsigned_abs() as usize;
        let v = self.get(l, am);
        if m < 0 && am % 2 == 1 {
            -v
        } else {
            v
        }
    }
}

/// Complex spherical harmonic, Condon–Shortley convention.
pub fn ylm(idx: HarmonicIndex, theta: f64, phi: f64) -> Complex64 {
    let l = idx.degree() as i64;
    let m = idx.order() as i64;
    let p = normalized_legendre(l, m.abs(), theta.cos()).expect("HarmonicIndex is valid");
    let p = if m < 0 && m % 2 != 0 { -p } else { p };
    Complex64::from_polar(p / (2.0 * PI).sqrt(), m as f64 * phi)
}

/// Dense coefficient table over `(I, M)`, `I ≤ l_max`, `|M| ≤ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicTable {
    l_max: usize,
    data: Vec<Complex64>,
}

#[inline]
fn flat(l: usize, m: i32) -> usize {
    (l * l + l).wrapping_add_signed(m as isize)
}

impl HarmonicTable {
    pub fn zeros(l_max: usize) -> Self {
        Self {
            l_max,
            data: vec![Complex64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)],
        }
    }

    #[inline]
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Coefficient at `(l, m)`; zero outside the table or for `|m| > l`.
    #[inline]
    pub fn get(&self, l: usize, m: i32) -> Complex64 {
        if l > self.l_max || m.unsigned_abs() as usize > l {
            Complex64::new(0.0, 0.0)
        } else {
            self.data[flat(l, m)]
        }
    }

    /// Panics on an invalid index.
    pub fn set(&mut self, l: usize, m: i32, value: Complex64) {
        assert!(
            l <= self.l_max && m.unsigned_abs() as usize <= l,
            "index (I = {l}, M = {m}) outside table with l_max = {}",
            self.l_max
        );
        self.data[flat(l, m)] = value;
    }

    /// `(I, M, b_IM)` in `I`-major, ascending-`M` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i32, Complex64)> + '_ {
        (0..=self.l_max).flat_map(move |l| {
            let li = l as i32;
            (-li..=li).map(move |m| (l, m, self.data[flat(l, m)]))
        })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Apply `f(I, M, b)` to every entry.
    pub fn map_indexed(&mut self, mut f: impl FnMut(usize, i32, Complex64) -> Complex64) {
        for l in 0..=self.l_max {
            let li = l as i32;
            for m in -li..=li {
                let k = flat(l, m);
                self.data[k] = f(l, m, self.data[k]);
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Same coefficients, truncated or zero-padded to `l_max`.
    pub fn resized(&self, l_max: usize) -> Self {
        let mut out = Self::zeros(l_max);
        let keep = l_max.min(self.l_max);
        let n = (keep + 1) * (keep + 1);
        out.data[..n].copy_from_slice(&self.data[..n]);
        out
    }

    /// Largest `I` carrying a coefficient with modulus above `threshold`.
    pub fn support_max(&self, threshold: f64) -> Option<usize> {
        self.iter()
            .filter(|(_, _, c)| c.norm() > threshold)
            .map(|(l, _, _)| l)
            .max()
    }

    /// `Σ b_IM Y^I_M(θ, φ)`.
    pub fn synthesize(&self, theta: f64, phi: f64) -> Complex64 {
        let table = LegendreTable::new(self.l_max, theta.cos());
        self.synthesize_with(&table, phi)
    }

    /// Synthesis with a precomputed Legendre table at the desired `cos θ`.
    pub fn synthesize_with(&self, table: &LegendreTable, phi: f64) -> Complex64 {
        assert!(table.l_max() >= self.l_max);
        let li = self.l_max as i32;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in -li..=li {
            let am = m.unsigned_abs() as usize;
            let mut col = Complex64::new(0.0, 0.0);
            for l in am..=self.l_max {
                col += self.get(l, m) * table.theta_part(l, m);
            }
            acc += col * Complex64::from_polar(1.0, m as f64 * phi);
        }
        acc / (2.0 * PI).sqrt()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes descending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Product grid: Gauss–Legendre in `cos θ` times a uniform azimuthal grid.
///
/// A product `x^d e^{iMφ}` is integrated exactly for `d ≤ 2·n_theta − 1`
/// and `|M| < n_phi`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    n_theta: usize,
    n_phi: usize,
    cos_theta: Vec<f64>,
    theta_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::Config(format!(
                "quadrature grid needs positive sizes, got {n_theta} x {n_phi}"
            )));
        }
        let (cos_theta, theta_weights) = gauss_legendre(n_theta);
        Ok(Self {
            n_theta,
            n_phi,
            cos_theta,
            theta_weights,
        })
    }

    /// Smallest grid integrating products of two band-`l` functions exactly.
    pub fn for_band(l: usize) -> Self {
        Self::new(l + 1, 2 * l + 1).expect("sizes are positive")
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.cos_theta[j].acos()
    }

    pub fn phi(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_phi as f64
    }

    /// `(θ, φ, weight)` for every node; weights sum to `4π`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let dphi = 2.0 * PI / self.n_phi as f64;
        (0..self.n_theta).flat_map(move |j| {
            let theta = self.theta(j);
            let w = self.theta_weights[j] * dphi;
            (0..self.n_phi).map(move |k| (theta, self.phi(k), w))
        })
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> Complex64) -> Complex64 {
        self.nodes().map(|(t, p, w)| f(t, p) * w).sum()
    }

    fn check_band(&self, l_max: usize) -> Result<()> {
        if self.n_theta < l_max + 1 || self.n_phi < 2 * l_max + 1 {
            return Err(Error::Config(format!(
                "grid {}x{} under-resolves l_max = {l_max} (needs n_theta >= {}, n_phi >= {})",
                self.n_theta,
                self.n_phi,
                l_max + 1,
                2 * l_max + 1
            )));
        }
        Ok(())
    }
}

/// `b_IM = ∫ conj(Y^I_M) f dΩ` for all `I ≤ l_max`.
pub fn project(
    f: impl Fn(f64, f64) -> Complex64,
    l_max: usize,
    grid: &QuadratureGrid,
) -> Result<HarmonicTable> {
    project_filtered(f, l_max, grid, |_, _| true)
}

/// Like [`project`], computing only the entries selected by `keep`; the
/// others are left at zero.
pub fn project_filtered(
    f: impl Fn(f64, f64) -> Complex64,
    l_max: usize,
    grid: &QuadratureGrid,
    keep: impl Fn(usize, i32) -> bool,
) -> Result<HarmonicTable> {
    grid.check_band(l_max)?;
    let n_phi = grid.n_phi;
    let fft = FftPlanner::new().plan_fft_forward(n_phi);
    let dphi = 2.0 * PI / n_phi as f64;
    let norm = 1.0 / (2.0 * PI).sqrt();
    let li = l_max as i32;

    let mut out = HarmonicTable::zeros(l_max);
    let mut row = vec![Complex64::new(0.0, 0.0); n_phi];
    for j in 0..grid.n_theta {
        let theta = grid.theta(j);
        for (k, v) in row.iter_mut().enumerate() {
            *v = f(theta, grid.phi(k));
        }
        fft.process(&mut row);
        let table = LegendreTable::new(l_max, grid.cos_theta[j]);
        let w = grid.theta_weights[j] * dphi * norm;
        for m in -li..=li {
            let fm = row[m.rem_euclid(n_phi as i32) as usize] * w;
            for l in (m.unsigned_abs() as usize)..=l_max {
                if keep(l, m) {
                    let k = flat(l, m);
                    out.data[k] += fm * table.theta_part(l, m);
                }
            }
        }
    }
    Ok(out)
}
