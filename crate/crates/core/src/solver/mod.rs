//! Frequency-domain Helmholtz solver for a fluid sediment below water.
//!
//! The domain is a horizontal strip, quasi-periodic in x (Floquet walls),
//! with a Dirichlet bottom, a stretched-coordinate absorbing layer at the top
//! and an optional one just above the bottom. The incident plane wave is
//! injected along a horizontal total-field/scattered-field line.

mod assemble;
mod field;
mod medium;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use assemble::complex_wavenumber;
pub use field::ComplexField;
pub use medium::{build_medium, Column, GeometryProfile, MediumMap, Piece};

use crate::error::{Error, Result};
use crate::params::{DomainSpec, ExperimentParams, SeafloorParams};

/// Side-wall treatment of a template solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Floquet walls on a `domain_width_factor·Δs` strip.
    #[default]
    Periodic,
    /// Floquet walls on a strip twice as wide, as used for transitions.
    EmbeddedTransition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSpec {
    pub ppw_water: f64,
    pub ppw_sediment: f64,
    /// thickness of the top absorbing layer, inside `water_height`, m
    pub pml_thickness: f64,
    /// design reflection of the absorbing layers at normal incidence
    pub pml_reflection: f64,
    /// thickness of the absorbing layer above the bottom, m (0 disables it)
    pub bottom_absorber: f64,
    pub domain_width_factor: usize,
    pub boundary: Boundary,
    /// per-axis sub-samples used to average the coefficients over a cell
    pub subsamples: usize,
    /// height of the TF/SF line; midway between ripples and observation
    /// circles when unset
    pub tfsf_height: Option<f64>,
    /// radius of the observation circles in units of 1/k, kept clear of the
    /// absorbing layer and of the TF/SF line
    pub observation_radius: f64,
    pub residual_tolerance: f64,
    /// tune the stencil so waves with the incident horizontal wavenumber
    /// carry no phase error
    pub dispersion_correction: bool,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self {
            ppw_water: 10.0,
            ppw_sediment: 5.0,
            pml_thickness: 0.1,
            pml_reflection: 1e-10,
            bottom_absorber: 0.0,
            domain_width_factor: 4,
            boundary: Boundary::Periodic,
            subsamples: 4,
            tfsf_height: None,
            observation_radius: 3.0 * std::f64::consts::PI,
            residual_tolerance: 1e-8,
            dispersion_correction: true,
        }
    }
}

impl SolveSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.ppw_water >= 5.0) {
            return bad("points per wavelength in water must be at least 5");
        }
        if !(self.ppw_sediment > 0.0) {
            return bad("points per wavelength in sediment must be positive");
        }
        if !(self.pml_thickness > 0.0) || self.bottom_absorber < 0.0 {
            return bad("absorbing layer thickness must be positive");
        }
        if !(self.pml_reflection > 0.0 && self.pml_reflection < 1.0) {
            return bad("pml_reflection must lie in (0, 1)");
        }
        if self.domain_width_factor == 0 {
            return bad("domain_width_factor must be at least 1");
        }
        if self.subsamples < 2 || self.subsamples % 2 != 0 {
            return bad("subsamples must be even and at least 2");
        }
        if !(self.residual_tolerance > 0.0) || !(self.observation_radius >= 0.0) {
            return bad("bad tolerance or observation radius");
        }
        Ok(())
    }

    /// Width of a template strip in segments.
    pub fn template_segments(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.domain_width_factor,
            Boundary::EmbeddedTransition => 2 * self.domain_width_factor,
        }
    }
}

/// Result of one solve. Both fields share the grid, which includes the
/// bottom and top boundary rows.
#[derive(Debug, Clone)]
pub struct Solution {
    pub total: ComplexField,
    pub scattered: ComplexField,
    /// relative residual of the linear system
    pub residual: f64,
    pub tfsf_height: f64,
    pub incident_kx: f64,
    /// vertical wavenumber of the injected wave (discrete dispersion)
    pub incident_ky: f64,
    pub unknowns: usize,
}

/// `P0 exp(i k_α·(x, y))` with `k_α = (k cos α, -k sin α)`.
pub fn incident_wave(x: f64, y: f64, exp: &ExperimentParams) -> Complex64 {
    let k = exp.wavenumber();
    Complex64::from_polar(
        exp.source_strength,
        k * exp.alpha.cos() * x - k * exp.alpha.sin() * y,
    )
}

/// Solves on an arbitrary medium strip.
pub fn solve_layout(medium: &MediumMap, exp: &ExperimentParams, s: &SolveSpec) -> Result<Solution> {
    assemble::solve_medium(medium, exp, s)
}

/// Periodic template solve for one parameter vector.
pub fn solve_template(
    params: &SeafloorParams,
    exp: &ExperimentParams,
    d: &DomainSpec,
    s: &SolveSpec,
) -> Result<Solution> {
    let width = s.template_segments() as f64 * d.segment_width;
    let medium = MediumMap::homogeneous(params, exp, d, width)?;
    solve_layout(&medium, exp, s)
}

/// `left` on `[0, w)` and `right` on `[w, 2w)` with `w = domain_width_factor·Δs`;
/// the junction of interest is at `x = w`.
pub fn solve_transition(
    left: &SeafloorParams,
    right: &SeafloorParams,
    exp: &ExperimentParams,
    d: &DomainSpec,
    s: &SolveSpec,
) -> Result<Solution> {
    let w = s.domain_width_factor as f64 * d.segment_width;
    let medium = MediumMap::new(
        vec![Piece::new(0.0, w, left), Piece::new(w, 2.0 * w, right)],
        2.0 * w,
        0.0,
        exp,
        d,
    )?;
    solve_layout(&medium, exp, s)
}
