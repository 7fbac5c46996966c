//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rotorwave::coherent_state::WavePacket;
use rotorwave::evolution::SpectrumModel;
use rotorwave::sphere_basis::{gauss_legendre, ylm, HarmonicIndex, HarmonicTable};

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

fn binomial(n: u64, k: u64) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `P̄_l^m(x)` from Rodrigues' formula in exact rational arithmetic; only the
/// final square root and conversion are rounded.
///
/// `P_l^m = (−1)^m (1−x²)^{m/2} d^m/dx^m P_l`, `P_l = (2^l l!)^{-1} d^l/dx^l (x²−1)^l`,
/// `P̄_l^m = √((2l+1)/2 · (l−m)!/(l+m)!) P_l^m`.
pub fn legendre_exact(l: u64, m: u64, x: f64) -> f64 {
    let xr = BigRational::from_float(x).expect("finite x");
    // (x²−1)^l = Σ_k C(l,k) (−1)^{l−k} x^{2k}; differentiate l + m times
    let order = l + m;
    let mut q = BigRational::zero();
    for k in 0..=l {
        let p = 2 * k;
        if p < order {
            continue;
        }
        let falling: BigInt = ((p - order + 1)..=p).fold(BigInt::one(), |acc, j| acc * j);
        let sign = if (l - k).is_multiple_of(2) { BigInt::one() } else { -BigInt::one() };
        let coeff = BigRational::from_integer(binomial(l, k) * falling * sign);
        q += coeff * pow(&xr, p - order);
    }
    let scale = BigRational::from_integer(BigInt::from(2).pow(l as u32) * factorial(l));
    let q = q / scale;
    let one = BigRational::one();
    let sq = pow(&(&one - &xr * &xr), m)
        * BigRational::new(BigInt::from(2 * l + 1) * factorial(l - m), BigInt::from(2) * factorial(l + m));
    let value_sq = &q * &q * sq;
    let magnitude = value_sq.to_f64().expect("representable").sqrt();
    let negative = q.is_negative() ^ (m % 2 == 1);
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

/// `b_IM = ∫ conj(Y) f dΩ` by a plain double sum over a Gauss × uniform grid,
/// calling `ylm` at every node (no FFT, no shared tables).
pub fn project_direct(f: impl Fn(f64, f64) -> Complex64, l_max: usize, n_theta: usize, n_phi: usize) -> HarmonicTable {
    let (x, w) = gauss_legendre(n_theta);
    let dphi = std::f64::consts::TAU / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    for (xj, wj) in x.iter().zip(&w) {
        let theta = xj.acos();
        for k in 0..n_phi {
            let phi = k as f64 * dphi;
            nodes.push((theta, phi, wj * dphi, f(theta, phi)));
        }
    }
    let mut table = HarmonicTable::zeros(l_max);
    for l in 0..=l_max as i64 {
        for m in -l..=l {
            let idx = HarmonicIndex::new(l, m).unwrap();
            let b: Complex64 = nodes
                .iter()
                .map(|&(th, ph, wt, fv)| wt * ylm(idx, th, ph).conj() * fv)
                .sum();
            table.set(l as usize, m as i32, b);
        }
    }
    table
}

/// `Σ b_IM e^{−iE_I t} Y^I_M(θ, φ)` summed term by term.
pub fn evolved_value_direct(wp: &WavePacket, spectrum: &SpectrumModel, t: f64, theta: f64, phi: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..=wp.l_max() as i64 {
        let e = spectrum.energy(l as usize).unwrap_or(0.0);
        for m in -l..=l {
            let b = wp.coeff(l as usize, m as i32);
            if b != Complex64::new(0.0, 0.0) {
                let idx = HarmonicIndex::new(l, m).unwrap();
                acc += b * Complex64::from_polar(1.0, -e * t) * ylm(idx, theta, phi);
            }
        }
    }
    acc
}

/// Largest elementwise `|a − b|` over two coefficient tables.
pub fn max_diff(a: &HarmonicTable, b: &HarmonicTable) -> f64 {
    let l = a.l_max().max(b.l_max());
    let mut worst: f64 = 0.0;
    for li in 0..=l {
        for m in -(li as i32)..=li as i32 {
            worst = worst.max((a.get(li, m) - b.get(li, m)).norm());
        }
    }
    worst
}
