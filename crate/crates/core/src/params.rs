//! Seafloor parameterization, geoacoustic constants and measurement geometry.
//!
//! Everything in this module is a plain value type. The interface between water
//! and sediment is a sum of two sinusoidal ripples,
//!
//! ```text
//! f(x) = A * (sin(2π s·mg1·x) + mg2 · sin(2π s·mg3·x))
//! ```
//!
//! with amplitude `A = 0.01 m` and frequency scale `s = 1` unless a
//! [`DomainSpec`] rescales them (the low-frequency desk preset does).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ripple amplitude of the interface function, in meters.
pub const RIPPLE_AMPLITUDE: f64 = 0.01;

/// Sediment attenuation used for every material unless overridden, dB/m.
pub const DEFAULT_ATTENUATION_DB: f64 = 10.0;

/// Depth of the top of a buried object below the mean interface, in meters.
pub const DEFAULT_OBJECT_DEPTH: f64 = 0.02;

/// Sediment label of one seafloor segment.
///
/// `Metal` is a sand layer with a buried rectangular metal object below
/// `y = -eps_f`, not a homogeneous metal half-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialType {
    Sand,
    Clay,
    Rock,
    Metal,
}

impl MaterialType {
    pub const ALL: [MaterialType; 4] = [
        MaterialType::Sand,
        MaterialType::Clay,
        MaterialType::Rock,
        MaterialType::Metal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MaterialType::Sand => "sand",
            MaterialType::Clay => "clay",
            MaterialType::Rock => "rock",
            MaterialType::Metal => "metal",
        }
    }
}

impl fmt::Display for MaterialType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MaterialType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sand" => Ok(MaterialType::Sand),
            "clay" => Ok(MaterialType::Clay),
            "rock" => Ok(MaterialType::Rock),
            "metal" => Ok(MaterialType::Metal),
            other => Err(Error::InvalidParameter(format!("unknown material '{other}'"))),
        }
    }
}

/// Density, sound speed and attenuation of a fluid medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoacousticProps {
    /// kg/m³
    pub density: f64,
    /// m/s
    pub sound_speed: f64,
    /// dB/m
    pub attenuation: f64,
}

impl GeoacousticProps {
    pub fn new(density: f64, sound_speed: f64, attenuation: f64) -> Self {
        Self {
            density,
            sound_speed,
            attenuation,
        }
    }

    pub fn impedance(&self) -> f64 {
        self.density * self.sound_speed
    }
}

/// Geoacoustic constants of the four sediment labels.
///
/// For `Metal` this returns the properties of the buried object itself; the
/// surrounding sediment is sand (see [`crate::solver::MediumMap`]).
pub fn material_properties(m: MaterialType) -> GeoacousticProps {
    match m {
        MaterialType::Sand => GeoacousticProps::new(2000.0, 1668.0, DEFAULT_ATTENUATION_DB),
        MaterialType::Clay => GeoacousticProps::new(1170.0, 1518.9, DEFAULT_ATTENUATION_DB),
        MaterialType::Rock => GeoacousticProps::new(2870.0, 6000.0, DEFAULT_ATTENUATION_DB),
        MaterialType::Metal => GeoacousticProps::new(8050.0, 6100.0, DEFAULT_ATTENUATION_DB),
    }
}

/// Geometric parameters `m_G = (mg1, mg2, mg3)` of the rippled interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoParams {
    /// spatial frequency of the first ripple, cycles/m
    pub mg1: f64,
    /// amplitude ratio of the second ripple
    pub mg2: f64,
    /// spatial frequency of the second ripple, cycles/m
    pub mg3: f64,
}

impl GeoParams {
    pub const fn new(mg1: f64, mg2: f64, mg3: f64) -> Self {
        Self { mg1, mg2, mg3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.mg1, self.mg2, self.mg3]
    }

    /// Euclidean distance in parameter space.
    pub fn distance(&self, other: &GeoParams) -> f64 {
        let d1 = self.mg1 - other.mg1;
        let d2 = self.mg2 - other.mg2;
        let d3 = self.mg3 - other.mg3;
        (d1 * d1 + d2 * d2 + d3 * d3).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.as_array().iter().all(|v| v.is_finite()) && self.mg1 > 0.0 && self.mg3 > 0.0;
        if !ok || self.mg2 < 0.0 {
            return Err(Error::InvalidParameter(format!("bad geometry {self:?}")));
        }
        Ok(())
    }
}

/// Interface height with the unscaled ripple: `0.01 (sin 2π mg1 x + mg2 sin 2π mg3 x)`.
pub fn interface_height(x: f64, g: &GeoParams) -> f64 {
    RIPPLE_AMPLITUDE * ((2.0 * PI * g.mg1 * x).sin() + g.mg2 * (2.0 * PI * g.mg3 * x).sin())
}

/// Known experimental parameters `m_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// Hz
    pub frequency: f64,
    /// grazing angle of the incident wave, radians
    pub alpha: f64,
    pub source_strength: f64,
    /// kg/m³
    pub water_density: f64,
    /// m/s
    pub water_speed: f64,
    /// depth of the sonar receivers below the sea surface, m (metadata only)
    pub receiver_depth: f64,
    /// dB/m, applied to every sediment and to buried objects
    pub sediment_attenuation: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            frequency: 20_000.0,
            alpha: PI / 6.0,
            source_strength: 1.0,
            water_density: 1030.0,
            water_speed: 1500.0,
            receiver_depth: 0.0,
            sediment_attenuation: DEFAULT_ATTENUATION_DB,
        }
    }
}

impl ExperimentParams {
    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    /// Water wavenumber `k = ω / c0`.
    pub fn wavenumber(&self) -> f64 {
        self.angular_frequency() / self.water_speed
    }

    pub fn wavelength(&self) -> f64 {
        self.water_speed / self.frequency
    }

    pub fn water(&self) -> GeoacousticProps {
        GeoacousticProps::new(self.water_density, self.water_speed, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frequency", self.frequency),
            ("water_density", self.water_density),
            ("water_speed", self.water_speed),
            ("source_strength", self.source_strength),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= PI / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "incident angle {} outside (0, π/2]",
                self.alpha
            )));
        }
        if !(self.sediment_attenuation >= 0.0) {
            return Err(Error::InvalidParameter("attenuation must be non-negative".into()));
        }
        Ok(())
    }
}

/// Parameter vector of one seafloor segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeafloorParams {
    pub material: MaterialType,
    pub geometry: GeoParams,
    /// Depth `eps_f` of the top of the buried object; only for `Metal`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_depth: Option<f64>,
}

impl SeafloorParams {
    /// Segment parameters; `Metal` gets the default object depth.
    pub fn new(material: MaterialType, geometry: GeoParams) -> Self {
        let object_depth = (material == MaterialType::Metal).then_some(DEFAULT_OBJECT_DEPTH);
        Self {
            material,
            geometry,
            object_depth,
        }
    }

    pub fn with_object_depth(mut self, depth: f64) -> Self {
        self.object_depth = Some(depth);
        self
    }

    /// Checks the geometry and, for `Metal`, that the object lies strictly
    /// below the interface everywhere.
    pub fn validate(&self, d: &DomainSpec) -> Result<()> {
        self.geometry.validate()?;
        if self.material == MaterialType::Metal {
            let eps = self.object_depth.ok_or_else(|| {
                Error::InvalidParameter("metal segment requires an object depth".into())
            })?;
            if !(eps > 0.0) {
                return Err(Error::InvalidParameter(format!("object depth {eps} must be positive")));
            }
            let inf = d.interface_infimum(&self.geometry);
            if inf + eps <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "object at depth {eps} intersects the interface (inf f = {inf:.4})"
                )));
            }
        }
        Ok(())
    }
}

/// How the ripple phase is anchored along x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RipplePhase {
    /// `f` is evaluated at the position relative to the start of each
    /// segment, so every segment of a given geometry has the same ripple.
    #[default]
    SegmentLocal,
    /// `f` is evaluated at the absolute position.
    Absolute,
}

/// Template-domain geometry and measurement sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    /// width Δs of one segment, m
    pub segment_width: f64,
    /// thickness of the sediment layer below y = 0, m
    pub sediment_depth: f64,
    /// height of the water layer above y = 0 including the top PML, m
    pub water_height: f64,
    /// measurement samples per segment (power of two)
    pub samples_per_segment: usize,
    /// height of the receiver line above y = 0, m
    pub receiver_line_height: f64,
    /// ripple amplitude A, m (0 gives a flat interface)
    pub ripple_amplitude: f64,
    /// multiplies mg1 and mg3 when evaluating the interface
    pub ripple_frequency_scale: f64,
    pub ripple_phase: RipplePhase,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            segment_width: 1.0,
            sediment_depth: 2.0,
            water_height: 1.0,
            samples_per_segment: 512,
            receiver_line_height: 0.3,
            ripple_amplitude: RIPPLE_AMPLITUDE,
            ripple_frequency_scale: 1.0,
            ripple_phase: RipplePhase::SegmentLocal,
        }
    }
}

impl DomainSpec {
    /// Interface height at phase coordinate `x` (already reduced according to
    /// [`RipplePhase`]).
    pub fn interface_at(&self, x: f64, g: &GeoParams) -> f64 {
        let s = self.ripple_frequency_scale;
        self.ripple_amplitude
            * ((2.0 * PI * s * g.mg1 * x).sin() + g.mg2 * (2.0 * PI * s * g.mg3 * x).sin())
    }

    /// Phase coordinate of an absolute position.
    pub fn phase_coordinate(&self, x: f64) -> f64 {
        match self.ripple_phase {
            RipplePhase::Absolute => x,
            RipplePhase::SegmentLocal => x - (x / self.segment_width).floor() * self.segment_width,
        }
    }

    /// Upper bound on |f|.
    pub fn ripple_bound(&self, g: &GeoParams) -> f64 {
        self.ripple_amplitude.abs() * (1.0 + g.mg2.abs())
    }

    /// Sampled infimum of the interface over one segment (or four segments
    /// when the phase is absolute).
    pub fn interface_infimum(&self, g: &GeoParams) -> f64 {
        let span = match self.ripple_phase {
            RipplePhase::SegmentLocal => self.segment_width,
            RipplePhase::Absolute => 4.0 * self.segment_width,
        };
        let n = 8192;
        (0..n)
            .map(|i| self.interface_at(span * i as f64 / n as f64, g))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn measurement_spacing(&self) -> f64 {
        self.segment_width / self.samples_per_segment as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.samples_per_segment.is_power_of_two() || self.samples_per_segment < 2 {
            return Err(Error::NotPowerOfTwo {
                len: self.samples_per_segment,
            });
        }
        for (name, v) in [
            ("segment_width", self.segment_width),
            ("sediment_depth", self.sediment_depth),
            ("water_height", self.water_height),
            ("receiver_line_height", self.receiver_line_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.receiver_line_height >= self.water_height {
            return Err(Error::InvalidParameter(
                "receiver line must lie inside the water layer".into(),
            ));
        }
        if !(self.ripple_amplitude >= 0.0 && self.ripple_frequency_scale > 0.0) {
            return Err(Error::InvalidParameter("bad ripple scaling".into()));
        }
        Ok(())
    }
}

/// Equispaced measurement abscissae covering `[0, n_segments·Δs)`.
pub fn measurement_grid(d: &DomainSpec, n_segments: usize) -> Vec<f64> {
    let n = d.samples_per_segment;
    (0..n_segments * n)
        .map(|j| j as f64 * d.segment_width / n as f64)
        .collect()
}

/// Index of the segment `D^i` (zero based) containing `x`.
pub fn segment_of(d: &DomainSpec, x: f64) -> usize {
    (x / d.segment_width).floor().max(0.0) as usize
}
