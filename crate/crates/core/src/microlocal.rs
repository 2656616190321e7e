//! Local plane-wave decomposition of a Helmholtz solution.
//!
//! The field is sampled on a circle of radius `r0/k` around an observation
//! point and the samples are expanded in `L = 2L̂+1` plane waves through the
//! Jacobi–Anger identity, with Tikhonov regularization `ε` on the Bessel
//! division. The backscatter strength at a receiver is the amplitude of the
//! outgoing wave travelling against the incident direction.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_orders;
use crate::error::{Error, Result};
use crate::params::{DomainSpec, ExperimentParams};
use crate::solver::ComplexField;

pub const DEFAULT_R0: f64 = 3.0 * PI;
pub const DEFAULT_EPSILON: f64 = 1e-10;

/// `L = 2·ceil(r0 + 5 r0^(1/3)) + 1`.
pub fn truncation_order(r0: f64) -> usize {
    // guard against 3π + 5(3π)^(1/3) landing a hair above an integer
    let lhat = (r0 + 5.0 * r0.cbrt() - 1e-9).ceil().max(0.0) as usize;
    2 * lhat + 1
}

/// Signed Bessel order of DFT bin `b` for an odd length `len`.
#[inline]
fn signed_order(b: usize, len: usize) -> i64 {
    if b <= len / 2 {
        b as i64
    } else {
        b as i64 - len as i64
    }
}

#[inline]
fn i_pow(q: i64) -> Complex64 {
    match q.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Plane-wave amplitudes on an equispaced angular grid
/// `β_l = offset + 2πl/L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayDecomposition {
    pub angles: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// complex plane-wave coefficients before taking magnitudes
    pub coefficients: Vec<Complex64>,
    /// normalized spectrum indexed by DFT bin; `p(β) = (1/L) Σ_q G_q e^{iq(β-offset)}`
    pub spectrum: Vec<Complex64>,
    pub center: (f64, f64),
    pub r0: f64,
    pub epsilon: f64,
    pub offset: f64,
}

/// Reusable transforms for a fixed `(r0, ε)`.
#[derive(Clone)]
pub struct Decomposer {
    r0: f64,
    epsilon: f64,
    len: usize,
    /// `L J_q / (i^q (L² J_q² + 4επ²))` per bin
    filter: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Decomposer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Decomposer")
            .field("r0", &self.r0)
            .field("epsilon", &self.epsilon)
            .field("len", &self.len)
            .finish()
    }
}

impl Decomposer {
    pub fn new(r0: f64, epsilon: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) || !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad r0 {r0} or epsilon {epsilon}")));
        }
        let len = truncation_order(r0);
        let lf = len as f64;
        let j = bessel_j_orders(len / 2, r0);
        let filter = (0..len)
            .map(|b| {
                let q = signed_order(b, len);
                let jq = if q < 0 && q % 2 != 0 { -j[q.unsigned_abs() as usize] } else { j[q.unsigned_abs() as usize] };
                let denom = i_pow(q) * (lf * lf * jq * jq + 4.0 * epsilon * PI * PI);
                Complex64::new(lf * jq, 0.0) / denom
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            r0,
            epsilon,
            len,
            filter,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sample angles for a grid rotated by `offset`.
    pub fn angles(&self, offset: f64) -> Vec<f64> {
        (0..self.len)
            .map(|l| offset + 2.0 * PI * l as f64 / self.len as f64)
            .collect()
    }

    /// Decomposes samples taken at `offset + 2πl/L`.
    pub fn decompose(&self, samples: &[Complex64], offset: f64, center: (f64, f64)) -> Result<RayDecomposition> {
        if samples.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: samples.len(),
            });
        }
        let mut spec = samples.to_vec();
        self.forward.process(&mut spec);
        for (s, f) in spec.iter_mut().zip(&self.filter) {
            *s *= f;
        }
        let mut coeffs = spec.clone();
        self.inverse.process(&mut coeffs);
        let inv_len = 1.0 / self.len as f64;
        for c in coeffs.iter_mut() {
            *c *= inv_len;
        }
        Ok(RayDecomposition {
            angles: self.angles(offset),
            amplitudes: coeffs.iter().map(|c| c.norm()).collect(),
            coefficients: coeffs,
            spectrum: spec,
            center,
            r0: self.r0,
            epsilon: self.epsilon,
            offset,
        })
    }
}

/// Decomposition on the standard grid `β_l = 2πl/L`.
pub fn decompose(samples: &[Complex64], r0: f64, epsilon: f64) -> Result<RayDecomposition> {
    Decomposer::new(r0, epsilon)?.decompose(samples, 0.0, (0.0, 0.0))
}

impl RayDecomposition {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Band-limited continuation of the coefficients to any angle.
    pub fn coefficient_at(&self, beta: f64) -> Complex64 {
        let len = self.spectrum.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, g) in self.spectrum.iter().enumerate() {
            let q = signed_order(b, len) as f64;
            acc += g * Complex64::from_polar(1.0, q * (beta - self.offset));
        }
        acc / len as f64
    }

    /// Angle and amplitude of the strongest plane wave, located on the
    /// band-limited continuation rather than on the grid.
    pub fn peak(&self) -> (f64, f64) {
        let len = self.len();
        let fine = 16 * len;
        let step = 2.0 * PI / fine as f64;
        let mut best = (self.offset, -1.0);
        for m in 0..fine {
            let b = self.offset + m as f64 * step;
            let a = self.coefficient_at(b).norm();
            if a > best.1 {
                best = (b, a);
            }
        }
        let (mut lo, mut hi) = (best.0 - step, best.0 + step);
        for _ in 0..60 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if self.coefficient_at(m1).norm() < self.coefficient_at(m2).norm() {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let b = 0.5 * (lo + hi);
        (b.rem_euclid(2.0 * PI), self.coefficient_at(b).norm())
    }
}

/// Linear interpolation of the amplitudes at `beta`, wrapping at 2π.
pub fn backscatter_at(dec: &RayDecomposition, beta: f64) -> f64 {
    let len = dec.amplitudes.len();
    if len == 0 {
        return 0.0;
    }
    let mut pos = ((beta - dec.offset) / (2.0 * PI)).rem_euclid(1.0) * len as f64;
    if (pos - pos.round()).abs() < 1e-9 {
        pos = pos.round() % len as f64;
    }
    let l = (pos.floor() as usize).min(len - 1);
    let t = pos - l as f64;
    let a = dec.amplitudes[l];
    if t == 0.0 {
        return a;
    }
    let b = dec.amplitudes[(l + 1) % len];
    (1.0 - t) * a + t * b
}

/// Point evaluation of a field.
pub trait FieldSampler: Sync {
    fn sample(&self, x: f64, y: f64) -> Result<Complex64>;
}

impl FieldSampler for ComplexField {
    fn sample(&self, x: f64, y: f64) -> Result<Complex64> {
        self.bilinear(x, y)
    }
}

/// Rayleigh expansion of an outgoing quasi-periodic field above a
/// reference row.
///
/// The row at `y_ref` is split into Floquet orders `kx_n = kx0 + 2πn/W` by
/// FFT and each order is continued upward with `exp(i kz_n (y - y_ref))`,
/// `kz_n = sqrt(k² - kx_n²)`. Valid wherever the field contains only
/// upgoing and evanescent waves, i.e. above the seafloor for a scattered
/// field.
#[derive(Debug, Clone)]
pub struct ModalExpansion {
    x0: f64,
    y_ref: f64,
    kx0: f64,
    dk: f64,
    /// `(n, c_n, kz_n)` for the retained orders
    modes: Vec<(i64, Complex64, Complex64)>,
    cutoff: f64,
}

impl ModalExpansion {
    /// Builds the expansion from grid row `j` of a quasi-periodic field.
    pub fn from_row(field: &ComplexField, j: usize, k: f64) -> Result<Self> {
        let bloch = field
            .bloch
            .ok_or_else(|| Error::InvalidParameter("modal sampling needs a quasi-periodic field".into()))?;
        if j >= field.ny {
            return Err(Error::OutsideDomain {
                x: field.origin.0,
                y: field.origin.1 + j as f64 * field.dy,
            });
        }
        let nx = field.nx;
        let width = field.width();
        let kx0 = bloch.arg() / width;
        let dk = 2.0 * PI / width;
        let mut row: Vec<Complex64> = field
            .row(j)
            .iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::from_polar(1.0, -kx0 * i as f64 * field.dx))
            .collect();
        FftPlanner::new().plan_fft_forward(nx).process(&mut row);
        let modes = row
            .iter()
            .enumerate()
            .map(|(b, c)| {
                let n = if b <= nx / 2 { b as i64 } else { b as i64 - nx as i64 };
                let kx = kx0 + dk * n as f64;
                let mut kz = Complex64::new(k * k - kx * kx, 0.0).sqrt();
                if kz.im < 0.0 {
                    kz = -kz;
                }
                (n, c / nx as f64, kz)
            })
            .collect();
        Ok(Self {
            x0: field.origin.0,
            y_ref: field.origin.1 + j as f64 * field.dy,
            kx0,
            dk,
            modes,
            cutoff: 1e-12,
        })
    }

    pub fn reference_height(&self) -> f64 {
        self.y_ref
    }

    /// Orders whose decay over `dy` stays above the cutoff.
    fn retained(&self, dy: f64) -> impl Iterator<Item = &(i64, Complex64, Complex64)> {
        let cutoff = self.cutoff;
        self.modes
            .iter()
            .filter(move |m| (-m.2.im * dy).exp() > cutoff)
    }

    /// Evaluates the expansion at many points sharing the lowest height.
    pub fn sample_many(&self, pts: &[(f64, f64)]) -> Result<Vec<Complex64>> {
        let min_y = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        if min_y < self.y_ref - 1e-12 {
            return Err(Error::OutsideDomain {
                x: pts[0].0,
                y: min_y,
            });
        }
        let modes: Vec<_> = self.retained(min_y - self.y_ref).copied().collect();
        Ok(pts
            .iter()
            .map(|&(x, y)| {
                let xi = x - self.x0;
                let dy = y - self.y_ref;
                let base = Complex64::from_polar(1.0, self.kx0 * xi);
                let mut acc = Complex64::new(0.0, 0.0);
                for &(n, c, kz) in &modes {
                    let horiz = Complex64::from_polar(1.0, self.dk * n as f64 * xi);
                    acc += c * horiz * (Complex64::i() * kz * dy).exp();
                }
                acc * base
            })
            .collect())
    }
}

impl FieldSampler for ModalExpansion {
    fn sample(&self, x: f64, y: f64) -> Result<Complex64> {
        Ok(self.sample_many(&[(x, y)])?[0])
    }
}

/// Samples `p(center + (r0/k)(cos β_l, sin β_l))` for `β_l = offset + 2πl/len`.
pub fn sample_circle<S: FieldSampler + ?Sized>(
    field: &S,
    center: (f64, f64),
    k: f64,
    r0: f64,
    len: usize,
    offset: f64,
) -> Result<Vec<Complex64>> {
    let radius = r0 / k;
    (0..len)
        .map(|l| {
            let b = offset + 2.0 * PI * l as f64 / len as f64;
            field.sample(center.0 + radius * b.cos(), center.1 + radius * b.sin())
        })
        .collect()
}

fn circle_points(center: (f64, f64), radius: f64, angles: &[f64]) -> Vec<(f64, f64)> {
    angles
        .iter()
        .map(|b| (center.0 + radius * b.cos(), center.1 + radius * b.sin()))
        .collect()
}

/// How circle samples are obtained from a grid field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// bilinear interpolation of the grid
    Bilinear,
    /// Rayleigh expansion from the grid row just below the circles
    #[default]
    Modal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    pub r0: f64,
    pub epsilon: f64,
    pub sampling: Sampling,
    /// rotate the angular grid so the requested direction is a grid angle
    pub align: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            r0: DEFAULT_R0,
            epsilon: DEFAULT_EPSILON,
            sampling: Sampling::Modal,
            align: true,
        }
    }
}

/// Backscatter strengths along the receiver line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackscatterSignal {
    pub values: Vec<f64>,
    pub x_coords: Vec<f64>,
    pub alpha: f64,
    pub segment_width: f64,
}

impl BackscatterSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-signal of `n` samples starting at sample `start`.
    pub fn slice(&self, start: usize, n: usize) -> BackscatterSignal {
        BackscatterSignal {
            values: self.values[start..start + n].to_vec(),
            x_coords: self.x_coords[start..start + n].to_vec(),
            alpha: self.alpha,
            segment_width: self.segment_width,
        }
    }
}

/// Direction of the wave returning toward the source, `π - α`.
pub fn backscatter_direction(alpha: f64) -> f64 {
    PI - alpha
}

/// Amplitude of the plane wave travelling in direction `beta` at each
/// receiver `(x, receiver_line_height)`.
pub fn direction_profile(
    field: &ComplexField,
    exp: &ExperimentParams,
    d: &DomainSpec,
    xs: &[f64],
    beta: f64,
    opts: &ProfileOptions,
) -> Result<Vec<f64>> {
    let k = exp.wavenumber();
    let dec = Decomposer::new(opts.r0, opts.epsilon)?;
    let offset = if opts.align { beta } else { 0.0 };
    let angles = dec.angles(offset);
    let radius = opts.r0 / k;
    let yc = d.receiver_line_height;
    let modal = match opts.sampling {
        Sampling::Modal => {
            let j = ((yc - radius - field.origin.1) / field.dy).floor();
            if j < 0.0 {
                return Err(Error::OutsideDomain { x: field.origin.0, y: yc - radius });
            }
            Some(ModalExpansion::from_row(field, j as usize, k)?)
        }
        Sampling::Bilinear => None,
    };
    xs.par_iter()
        .map(|&x| {
            let pts = circle_points((x, yc), radius, &angles);
            let samples = match &modal {
                Some(m) => m.sample_many(&pts)?,
                None => pts
                    .iter()
                    .map(|&(px, py)| field.bilinear(px, py))
                    .collect::<Result<Vec<_>>>()?,
            };
            let r = dec.decompose(&samples, offset, (x, yc))?;
            Ok(backscatter_at(&r, beta))
        })
        .collect()
}

/// Backscatter signal over `n_segments` segments starting at `x_start`.
pub fn backscatter_profile(
    field: &ComplexField,
    exp: &ExperimentParams,
    d: &DomainSpec,
    x_start: f64,
    n_segments: usize,
    opts: &ProfileOptions,
) -> Result<BackscatterSignal> {
    let xs: Vec<f64> = crate::params::measurement_grid(d, n_segments)
        .into_iter()
        .map(|x| x + x_start)
        .collect();
    let values = direction_profile(field, exp, d, &xs, backscatter_direction(exp.alpha), opts)?;
    Ok(BackscatterSignal {
        values,
        x_coords: xs,
        alpha: exp.alpha,
        segment_width: d.segment_width,
    })
}

/// Full decomposition at one observation point, for polar plots.
pub fn decompose_at(
    field: &ComplexField,
    exp: &ExperimentParams,
    center: (f64, f64),
    opts: &ProfileOptions,
) -> Result<RayDecomposition> {
    let k = exp.wavenumber();
    let dec = Decomposer::new(opts.r0, opts.epsilon)?;
    let offset = if opts.align { backscatter_direction(exp.alpha) } else { 0.0 };
    let samples = match opts.sampling {
        Sampling::Modal => {
            let j = ((center.1 - opts.r0 / k - field.origin.1) / field.dy).floor();
            if j < 0.0 {
                return Err(Error::OutsideDomain { x: center.0, y: center.1 });
            }
            let m = ModalExpansion::from_row(field, j as usize, k)?;
            m.sample_many(&circle_points(center, opts.r0 / k, &dec.angles(offset)))?
        }
        Sampling::Bilinear => sample_circle(field, center, k, opts.r0, dec.len(), offset)?,
    };
    dec.decompose(&samples, offset, center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const R0: f64 = 3.0 * PI;

    fn plane_samples(theta: f64, amp: Complex64, offset: f64) -> Vec<Complex64> {
        let len = truncation_order(R0);
        (0..len)
            .map(|l| {
                let b = offset + 2.0 * PI * l as f64 / len as f64;
                amp * Complex64::from_polar(1.0, R0 * (b - theta).cos())
            })
            .collect()
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_order(3.0 * PI), 41);
        assert_eq!(truncation_order(1.0), 13);
        assert_eq!(truncation_order(8.0), 37);
    }

    #[test]
    fn on_grid_plane_wave_peaks_at_its_bin() {
        let len = truncation_order(R0);
        for bin in [0usize, 7, 20, 33] {
            let theta = 2.0 * PI * bin as f64 / len as f64;
            let d = decompose(&plane_samples(theta, Complex64::new(1.0, 0.0), 0.0), R0, DEFAULT_EPSILON)
                .unwrap();
            let (imax, amax) = d
                .amplitudes
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, &a)| if a > acc.1 { (i, a) } else { acc });
            assert_eq!(imax, bin);
            assert!((amax - 1.0).abs() < 0.01, "{amax}");
        }
    }

    #[test]
    fn zero_samples_give_zero() {
        let d = decompose(&vec![Complex64::new(0.0, 0.0); 41], R0, 1e-6).unwrap();
        assert!(d.amplitudes.iter().all(|&a| a == 0.0));
        assert!(decompose(&[Complex64::new(1.0, 0.0); 40], R0, 1e-6).is_err());
    }

    #[test]
    fn two_waves_keep_their_ratio() {
        let len = truncation_order(R0);
        let b1 = 2.0 * PI * 5.0 / len as f64;
        let b2 = 2.0 * PI * 18.0 / len as f64;
        let mut s = plane_samples(b1, Complex64::new(1.0, 0.0), 0.0);
        for (a, b) in s.iter_mut().zip(plane_samples(b2, Complex64::new(0.5, 0.0), 0.0)) {
            *a += b;
        }
        let d = decompose(&s, R0, DEFAULT_EPSILON).unwrap();
        let ratio = d.amplitudes[5] / d.amplitudes[18];
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn decomposition_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s1: Vec<Complex64> = (0..41).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let s2: Vec<Complex64> = (0..41).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let mix: Vec<Complex64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
        let d1 = decompose(&s1, R0, 1e-6).unwrap();
        let d2 = decompose(&s2, R0, 1e-6).unwrap();
        let dm = decompose(&mix, R0, 1e-6).unwrap();
        for l in 0..41 {
            let want = a * d1.coefficients[l] + b * d2.coefficients[l];
            assert!((dm.coefficients[l] - want).norm() < 1e-9 * (1.0 + want.norm()));
            assert!((dm.amplitudes[l] - want.norm()).abs() < 1e-9 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn peak_recovers_off_grid_waves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let theta = rng.random::<f64>() * 2.0 * PI;
            let amp = 0.1 + 1.9 * rng.random::<f64>();
            let d = decompose(&plane_samples(theta, Complex64::new(amp, 0.0), 0.0), R0, DEFAULT_EPSILON)
                .unwrap();
            let (b, a) = d.peak();
            let diff = (b - theta).rem_euclid(2.0 * PI);
            assert!(diff.min(2.0 * PI - diff) < 1e-3, "{b} vs {theta}");
            assert!((a / amp - 1.0).abs() < 0.01, "{a} vs {amp}");
        }
    }

    #[test]
    fn rotated_grid_puts_direction_on_a_bin() {
        let theta = 1.234;
        let d = Decomposer::new(R0, DEFAULT_EPSILON)
            .unwrap()
            .decompose(&plane_samples(theta, Complex64::new(0.7, 0.2), theta), theta, (0.0, 0.0))
            .unwrap();
        assert!((backscatter_at(&d, theta) - Complex64::new(0.7, 0.2).norm()).abs() < 0.01);
    }

    #[test]
    fn interpolation_rules() {
        let mut d = decompose(&plane_samples(0.4, Complex64::new(1.0, 0.0), 0.0), R0, 1e-6).unwrap();
        let step = 2.0 * PI / 41.0;
        assert_eq!(backscatter_at(&d, 3.0 * step), d.amplitudes[3]);
        let mid = backscatter_at(&d, 3.5 * step);
        assert!((mid - 0.5 * (d.amplitudes[3] + d.amplitudes[4])).abs() < 1e-12);
        let wrap = backscatter_at(&d, 40.5 * step);
        assert!((wrap - 0.5 * (d.amplitudes[40] + d.amplitudes[0])).abs() < 1e-12);
        d.amplitudes = vec![0.25; 41];
        assert!((backscatter_at(&d, 2.2) - 0.25).abs() < 1e-15);
    }

    fn plane_field(k: f64, theta: f64, amp: f64, periodic: bool) -> ComplexField {
        let nx = 200;
        let dx = 2.0 * PI / k / 20.0;
        let f = ComplexField::from_fn(nx, 120, dx, dx, (0.0, 0.0), |x, y| {
            Complex64::from_polar(amp, k * (theta.cos() * x + theta.sin() * y))
        });
        if periodic {
            f.with_bloch(Complex64::from_polar(1.0, k * theta.cos() * nx as f64 * dx))
        } else {
            f
        }
    }

    #[test]
    fn circle_sampling() {
        let c = ComplexField::from_fn(40, 40, 0.1, 0.1, (0.0, 0.0), |_, _| Complex64::new(0.3, -2.0));
        let s = sample_circle(&c, (2.0, 2.0), 10.0, R0, 41, 0.0).unwrap();
        assert!(s.iter().all(|v| (v - Complex64::new(0.3, -2.0)).norm() < 1e-12));
        assert!(sample_circle(&c, (0.5, 2.0), 10.0, R0, 41, 0.0).is_err());
        assert!(sample_circle(&c, (2.0, 3.5), 10.0, R0, 41, 0.0).is_err());

        // bilinear error is second order in the spacing
        let k = 1.0;
        let f = plane_field(k, 0.7, 1.0, false);
        let s = sample_circle(&f, (20.0, 15.0), k, R0, 41, 0.0).unwrap();
        let h = f.dx;
        for (l, v) in s.iter().enumerate() {
            let b = 2.0 * PI * l as f64 / 41.0;
            let (x, y) = (20.0 + R0 * b.cos(), 15.0 + R0 * b.sin());
            let exact = Complex64::from_polar(1.0, k * (0.7f64.cos() * x + 0.7f64.sin() * y));
            assert!((v - exact).norm() < (k * h).powi(2) / 4.0 + 1e-12);
        }
    }

    #[test]
    fn modal_profile_of_an_upgoing_wave() {
        let k = 2.0;
        let exp = ExperimentParams {
            alpha: PI / 5.0,
            frequency: k * 1500.0 / (2.0 * PI),
            ..ExperimentParams::default()
        };
        let beta = backscatter_direction(exp.alpha);
        let f = plane_field(k, beta, 0.8, true);
        let d = DomainSpec {
            segment_width: f.width() / 2.0,
            samples_per_segment: 8,
            receiver_line_height: 10.0,
            water_height: 20.0,
            ..DomainSpec::default()
        };
        let s = backscatter_profile(&f, &exp, &d, 0.0, 2, &ProfileOptions::default()).unwrap();
        assert_eq!(s.len(), 16);
        assert!(s.values.iter().all(|v| (v - 0.8).abs() < 0.008), "{:?}", s.values);

        // invariance under a global phase
        let mut g = f.clone();
        for v in g.values.iter_mut() {
            *v *= Complex64::from_polar(1.0, 0.9);
        }
        let t = backscatter_profile(&g, &exp, &d, 0.0, 2, &ProfileOptions::default()).unwrap();
        for (a, b) in s.values.iter().zip(&t.values) {
            assert!((a - b).abs() < 1e-9);
        }

        let zero = ComplexField { values: vec![Complex64::new(0.0, 0.0); f.values.len()], ..f.clone() };
        let z = backscatter_profile(&zero, &exp, &d, 0.0, 2, &ProfileOptions::default()).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }
}
