//! Second-order finite differences for
//! `s ∂x(b ∂x p) + ∂y((b/s) ∂y p) + s κ p = 0`, with `b = 1/ρ`,
//! `κ = k_c²/ρ` and the PML stretch `s(y)`.
//!
//! Unknowns are node values on rows `1..ny` (the bottom row is Dirichlet for
//! the total field, the top row Dirichlet for the scattered field). Rows
//! below the TF/SF line carry the total field, rows on or above it the
//! scattered field.

use std::f64::consts::LN_10;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use super::field::ComplexField;
use super::medium::MediumMap;
use super::{Solution, SolveSpec};
use crate::error::{Error, Result};
use crate::params::{ExperimentParams, GeoacousticProps};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Complex wavenumber with attenuation given in dB/m.
pub fn complex_wavenumber(omega: f64, props: &GeoacousticProps) -> Complex64 {
    Complex64::new(omega / props.sound_speed, props.attenuation * LN_10 / 20.0)
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    x0: f64,
    y0: f64,
}

impl Grid {
    fn y(&self, j: f64) -> f64 {
        self.y0 + j * self.hy
    }
}

/// Quadratic stretch profile of one absorbing layer.
#[derive(Debug, Clone, Copy)]
struct Layer {
    start: f64,
    end: f64,
    strength: f64,
}

impl Layer {
    fn sigma(&self, y: f64) -> f64 {
        let len = self.end - self.start;
        if len == 0.0 {
            return 0.0;
        }
        let t = (y - self.start) / len;
        if t <= 0.0 {
            0.0
        } else {
            self.strength * t.min(1.0).powi(2)
        }
    }
}

struct Stretch {
    top: Layer,
    bottom: Layer,
}

impl Stretch {
    fn at(&self, y: f64) -> Complex64 {
        Complex64::new(1.0, self.top.sigma(y) + self.bottom.sigma(y))
    }
}

fn layer_strength(reflection: f64, k: f64, thickness: f64) -> f64 {
    if thickness <= 0.0 {
        return 0.0;
    }
    3.0 * (1.0 / reflection).ln() / (2.0 * k * thickness)
}

/// Stencil coefficients of one homogeneous medium.
///
/// With the correction on, plane waves with horizontal wavenumber `±kx`
/// propagate with their exact vertical wavenumber in every homogeneous
/// region, and a flat interface on a grid row reflects them with the exact
/// impedance ratio. This covers the incident Floquet order and its
/// backscattered counterpart.
#[derive(Debug, Clone, Copy)]
struct Dispersion {
    kx: f64,
    hx: f64,
    hy: f64,
    enabled: bool,
}

impl Dispersion {
    /// `(1/b, κ)` for a medium of density `rho` and complex wavenumber `kc`.
    fn coefficients(&self, kc: Complex64, rho: f64) -> (Complex64, Complex64) {
        let k2 = kc * kc;
        if !self.enabled {
            return (Complex64::new(rho, 0.0), k2 / rho);
        }
        let sx = (self.kx * self.hx / 2.0).sin();
        let dx = 4.0 / (self.hx * self.hx) * sx * sx - self.kx * self.kx;
        let mut kz = (k2 - self.kx * self.kx).sqrt();
        if kz.im < 0.0 {
            kz = -kz;
        }
        let theta = kz * self.hy;
        let sy = (theta / 2.0).sin();
        let dy = sy * sy * (4.0 / (self.hy * self.hy)) - kz * kz;
        // the row-interface impedance of the scheme uses sin(kz h)/h for kz
        let c = if theta.norm() < 1e-6 {
            Complex64::new(1.0, 0.0)
        } else {
            theta / theta.sin()
        };
        (rho / c, c * (k2 + dx + dy) / rho)
    }

    /// Vertical wavenumber of a plane wave that solves the discrete water
    /// equation exactly.
    fn vertical(&self, k: f64) -> Result<f64> {
        let (hx, hy) = (self.hx, self.hy);
        let sx = (self.kx * hx / 2.0).sin();
        let (inv_b, kap) = self.coefficients(Complex64::new(k, 0.0), 1.0);
        let k2 = (kap * inv_b).re;
        let rhs = hy * hy / 4.0 * (k2 - 4.0 / (hx * hx) * sx * sx);
        if !(0.0..=1.0).contains(&rhs) {
            return Err(Error::InvalidParameter(
                "grid too coarse for the incident wave".into(),
            ));
        }
        Ok(2.0 / hy * rhs.sqrt().asin())
    }
}

pub(crate) fn solve_medium(
    medium: &MediumMap,
    exp: &ExperimentParams,
    spec: &SolveSpec,
) -> Result<Solution> {
    spec.validate()?;
    let d = &medium.domain;
    let omega = exp.angular_frequency();
    let k = exp.wavenumber();
    let kx = k * exp.alpha.cos();
    let sed = medium.sediment_props();

    // grid spacing
    let lambda_sed = sed
        .iter()
        .map(|p| p.sound_speed / exp.frequency)
        .fold(f64::INFINITY, f64::min);
    let h_target = (exp.wavelength() / spec.ppw_water).min(lambda_sed / spec.ppw_sediment);
    let n_seg = (medium.width / d.segment_width).round();
    let nx = if n_seg >= 1.0 && (n_seg * d.segment_width - medium.width).abs() < 1e-9 * medium.width {
        n_seg as usize * (d.segment_width / h_target).ceil() as usize
    } else {
        (medium.width / h_target).ceil() as usize
    };
    let nx = nx.max(3);
    let hx = medium.width / nx as f64;
    // y = 0 falls on a grid row; the top moves by less than one cell and
    // stays inside the absorbing layer
    let ny_sed = ((d.sediment_depth / hx).ceil() as usize).max(2);
    let hy = d.sediment_depth / ny_sed as f64;
    let ny = ny_sed + ((d.water_height / hy).round() as usize).max(2);
    let grid = Grid {
        nx,
        ny,
        hx,
        hy,
        x0: medium.origin,
        y0: -d.sediment_depth,
    };

    // absorbing layers
    let c_max = sed.iter().map(|p| p.sound_speed).fold(0.0, f64::max);
    let stretch = Stretch {
        top: Layer {
            start: grid.y(ny as f64) - spec.pml_thickness,
            end: grid.y(ny as f64),
            strength: layer_strength(spec.pml_reflection, k, spec.pml_thickness),
        },
        bottom: Layer {
            start: -d.sediment_depth + spec.bottom_absorber,
            end: -d.sediment_depth,
            strength: layer_strength(spec.pml_reflection, omega / c_max, spec.bottom_absorber),
        },
    };

    // TF/SF line
    let ripple_top = medium.max_interface();
    let y_tf = match spec.tfsf_height {
        Some(y) => y,
        None => 0.5 * (ripple_top + d.receiver_line_height - spec.observation_radius / k),
    };
    let j_tf = ((y_tf - grid.y0) / hy - 1e-9).ceil() as usize;
    if j_tf < 2
        || j_tf + 1 >= ny
        || grid.y(j_tf as f64 - 1.0) <= ripple_top
        || grid.y(j_tf as f64 + 1.0) >= stretch.top.start
    {
        return Err(Error::InvalidParameter(format!(
            "TF/SF line at y = {y_tf:.4} must lie in plain water between the ripples \
             (top {ripple_top:.4}) and the PML (start {:.4})",
            stretch.top.start
        )));
    }
    if d.receiver_line_height + spec.observation_radius / k >= stretch.top.start {
        return Err(Error::InvalidParameter(
            "observation circle reaches into the top PML".into(),
        ));
    }

    let disp = Dispersion {
        kx,
        hx,
        hy,
        enabled: spec.dispersion_correction,
    };
    let ky = disp.vertical(k)?;
    let p0 = exp.source_strength;
    let pinc = |i: usize, j: usize| -> Complex64 {
        let x = grid.x0 + i as f64 * hx;
        let y = grid.y(j as f64);
        Complex64::from_polar(p0, kx * x - ky * y)
    };

    let coeffs = Coefficients::build(medium, &grid, spec.subsamples, omega, &disp);
    let bloch = Complex64::from_polar(1.0, kx * medium.width);

    // assembly
    let n = nx * (ny - 1);
    let idx = |i: usize, j: usize| (j - 1) * nx + i;
    let scale = exp.water_density * hx * hx;
    let mut trip: Vec<Triplet<usize, usize, Complex64>> = Vec::with_capacity(5 * n);
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    for j in 1..ny {
        let s_c = stretch.at(grid.y(j as f64));
        let s_n = stretch.at(grid.y(j as f64 + 0.5));
        let s_s = stretch.at(grid.y(j as f64 - 0.5));
        for i in 0..nx {
            let r = idx(i, j);
            let a_e = s_c * coeffs.b_east(i, j) * (scale / (hx * hx));
            let a_w = s_c * coeffs.b_east((i + nx - 1) % nx, j) * (scale / (hx * hx));
            let a_n = coeffs.b_north(i, j) / s_n * (scale / (hy * hy));
            let a_s = coeffs.b_north(i, j - 1) / s_s * (scale / (hy * hy));
            let diag = -(a_e + a_w + a_n + a_s) + s_c * coeffs.kappa(i, j) * scale;
            trip.push(Triplet::new(r, r, diag));
            let (ie, fe) = if i + 1 == nx { (0, bloch) } else { (i + 1, ONE) };
            let (iw, fw) = if i == 0 { (nx - 1, bloch.inv()) } else { (i - 1, ONE) };
            trip.push(Triplet::new(r, idx(ie, j), a_e * fe));
            trip.push(Triplet::new(r, idx(iw, j), a_w * fw));
            if j + 1 < ny {
                trip.push(Triplet::new(r, idx(i, j + 1), a_n));
            }
            if j > 1 {
                trip.push(Triplet::new(r, idx(i, j - 1), a_s));
            }
            if j + 1 == j_tf {
                rhs[r] -= a_n * pinc(i, j + 1);
            } else if j == j_tf {
                rhs[r] += a_s * pinc(i, j - 1);
            }
        }
    }

    let a = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Solver(format!("assembly: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::Solver(format!("factorization failed: {e:?}")))?;
    let mut x = faer::Mat::<Complex64>::from_fn(n, 1, |i, _| rhs[i]);
    lu.solve_in_place(x.as_mut());
    let u: Vec<Complex64> = (0..n).map(|i| x[(i, 0)]).collect();

    let mut res = rhs.clone();
    for t in &trip {
        res[t.row] -= t.val * u[t.col];
    }
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let rhs_norm = norm(&rhs);
    let residual = if rhs_norm > 0.0 { norm(&res) / rhs_norm } else { norm(&res) };
    if !residual.is_finite() || residual > spec.residual_tolerance {
        return Err(Error::Residual {
            residual,
            tolerance: spec.residual_tolerance,
        });
    }

    let origin = (grid.x0, grid.y0);
    let mut total = ComplexField::zeros(nx, ny + 1, hx, hy, origin).with_bloch(bloch);
    let mut scattered = total.clone();
    for j in 0..=ny {
        for i in 0..nx {
            let inc = pinc(i, j);
            let (t, s) = if j == 0 {
                (Complex64::new(0.0, 0.0), -inc)
            } else if j == ny {
                (inc, Complex64::new(0.0, 0.0))
            } else if j < j_tf {
                let v = u[idx(i, j)];
                (v, v - inc)
            } else {
                let v = u[idx(i, j)];
                (v + inc, v)
            };
            total.values[j * nx + i] = t;
            scattered.values[j * nx + i] = s;
        }
    }
    if !total.is_finite() {
        return Err(Error::Solver("non-finite solution".into()));
    }
    Ok(Solution {
        total,
        scattered,
        residual,
        tfsf_height: grid.y(j_tf as f64),
        incident_kx: kx,
        incident_ky: ky,
        unknowns: n,
    })
}

/// Face and cell averages of the coefficients on a sub-sampled raster.
struct Coefficients {
    nx: usize,
    /// `b` on the face between `(i, j)` and `(i+1, j)`, rows `0..=ny`
    b_e: Vec<Complex64>,
    /// `b` on the face between `(i, j)` and `(i, j+1)`, rows `0..ny`
    b_n: Vec<Complex64>,
    /// cell average of `κ`, rows `0..=ny` (rows 0 and ny unused)
    kap: Vec<Complex64>,
}

impl Coefficients {
    fn build(medium: &MediumMap, g: &Grid, s: usize, omega: f64, disp: &Dispersion) -> Self {
        let np = g.nx * s;
        let nq = g.ny * s + s;
        let fine = |p: i64, step: f64| (p as f64 + 0.5) * step / s as f64;
        // raster row q sits at y0 - hy/2 + (q + 0.5) hy/s
        let yq = |q: usize| g.y0 - 0.5 * g.hy + fine(q as i64, g.hy);
        // 1/b and κ on the raster
        let mut rho = vec![Complex64::new(0.0, 0.0); np * nq];
        let mut kap = vec![Complex64::new(0.0, 0.0); np * nq];
        let mut cache: Vec<(GeoacousticProps, Complex64, Complex64)> = Vec::new();
        // raster column p sits at (p + 0.5) hx/s - hx/2 in local coordinates
        for p in 0..np {
            let col = medium.column(fine(p as i64, g.hx) - 0.5 * g.hx);
            for q in 0..nq {
                let props = col.at(yq(q));
                let (ib, kk) = match cache.iter().find(|c| c.0 == props) {
                    Some(c) => (c.1, c.2),
                    None => {
                        let (ib, kk) = disp.coefficients(complex_wavenumber(omega, &props), props.density);
                        cache.push((props, ib, kk));
                        (ib, kk)
                    }
                };
                rho[q * np + p] = ib;
                kap[q * np + p] = kk;
            }
        }

        let (nx, ny) = (g.nx, g.ny);
        let half = s / 2;
        let sf = s as f64;
        let mut b_e = vec![Complex64::new(0.0, 0.0); nx * (ny + 1)];
        let mut b_n = vec![Complex64::new(0.0, 0.0); nx * ny];
        let mut k_c = vec![Complex64::new(0.0, 0.0); nx * (ny + 1)];
        for j in 0..=ny {
            for i in 0..nx {
                // cell of node (i, j): columns i·s .. i·s+s, rows j·s .. j·s+s
                let mut kk = Complex64::new(0.0, 0.0);
                let mut be = Complex64::new(0.0, 0.0);
                for my in 0..s {
                    let q = j * s + my;
                    if q >= nq {
                        continue;
                    }
                    let mut r_along = Complex64::new(0.0, 0.0);
                    for mx in 0..s {
                        kk += kap[q * np + i * s + mx];
                        r_along += rho[q * np + (i * s + half + mx) % np];
                    }
                    be += r_along.inv() * sf;
                }
                k_c[j * nx + i] = kk / (sf * sf);
                b_e[j * nx + i] = be / sf;
                if j < ny {
                    let mut bn = Complex64::new(0.0, 0.0);
                    for mx in 0..s {
                        let p = i * s + mx;
                        let mut r_along = Complex64::new(0.0, 0.0);
                        for my in 0..s {
                            r_along += rho[(j * s + half + my) * np + p];
                        }
                        bn += r_along.inv() * sf;
                    }
                    b_n[j * nx + i] = bn / sf;
                }
            }
        }
        Self {
            nx,
            b_e,
            b_n,
            kap: k_c,
        }
    }

    #[inline]
    fn b_east(&self, i: usize, j: usize) -> Complex64 {
        self.b_e[j * self.nx + i]
    }

    #[inline]
    fn b_north(&self, i: usize, j: usize) -> Complex64 {
        self.b_n[j * self.nx + i]
    }

    #[inline]
    fn kappa(&self, i: usize, j: usize) -> Complex64 {
        self.kap[j * self.nx + i]
    }
}
