use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{
    material_properties, DomainSpec, ExperimentParams, GeoParams, GeoacousticProps, MaterialType,
    SeafloorParams, DEFAULT_OBJECT_DEPTH,
};

/// Interface geometry as a function of absolute x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeometryProfile {
    Constant(GeoParams),
    /// Linear interpolation between `(x, params)` knots, held constant
    /// outside the first and last knot.
    Knots(Vec<(f64, GeoParams)>),
}

impl GeometryProfile {
    pub fn at(&self, x: f64) -> GeoParams {
        match self {
            GeometryProfile::Constant(g) => *g,
            GeometryProfile::Knots(k) => {
                let first = k.first().expect("empty knot list");
                if x <= first.0 {
                    return first.1;
                }
                for w in k.windows(2) {
                    let ((x0, g0), (x1, g1)) = (w[0], w[1]);
                    if x <= x1 {
                        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 1.0 };
                        let lerp = |a: f64, b: f64| a + t * (b - a);
                        return GeoParams::new(lerp(g0.mg1, g1.mg1), lerp(g0.mg2, g1.mg2), lerp(g0.mg3, g1.mg3));
                    }
                }
                k.last().unwrap().1
            }
        }
    }
}

/// A horizontal run of one sediment label.
///
/// A `Metal` piece is sand with a metal block below `y = -object_depth`
/// spanning the whole piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub x0: f64,
    pub x1: f64,
    pub material: MaterialType,
    pub geometry: GeometryProfile,
    pub object_depth: Option<f64>,
    /// replaces the label's sediment properties (attenuation included)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_sediment: Option<GeoacousticProps>,
}

impl Piece {
    pub fn new(x0: f64, x1: f64, params: &SeafloorParams) -> Self {
        Self {
            x0,
            x1,
            material: params.material,
            geometry: GeometryProfile::Constant(params.geometry),
            object_depth: params.object_depth,
            custom_sediment: None,
        }
    }

    pub fn with_sediment(mut self, props: GeoacousticProps) -> Self {
        self.custom_sediment = Some(props);
        self
    }
}

/// Coefficients of the Helmholtz problem on a periodic strip.
///
/// Positions are local, `x ∈ [0, width)`, and wrap periodically; the absolute
/// position of local `x` is `origin + x`. Ripple phase and geometry profiles are
/// evaluated at absolute positions.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumMap {
    pub width: f64,
    pub origin: f64,
    pub domain: DomainSpec,
    pub water: GeoacousticProps,
    /// dB/m for every sediment and buried object
    pub sediment_attenuation: f64,
    pub pieces: Vec<Piece>,
}

/// Medium of a single homogeneous template on the default `4Δs` strip.
pub fn build_medium(params: &SeafloorParams, exp: &ExperimentParams, d: &DomainSpec) -> Result<MediumMap> {
    MediumMap::homogeneous(params, exp, d, 4.0 * d.segment_width)
}

impl MediumMap {
    pub fn homogeneous(
        params: &SeafloorParams,
        exp: &ExperimentParams,
        d: &DomainSpec,
        width: f64,
    ) -> Result<Self> {
        Self::new(vec![Piece::new(0.0, width, params)], width, 0.0, exp, d)
    }

    /// Pieces must be sorted, contiguous and cover `[0, width)`.
    pub fn new(
        pieces: Vec<Piece>,
        width: f64,
        origin: f64,
        exp: &ExperimentParams,
        d: &DomainSpec,
    ) -> Result<Self> {
        exp.validate()?;
        d.validate()?;
        if pieces.is_empty() || !(width > 0.0) {
            return Err(Error::InvalidParameter("medium needs at least one piece".into()));
        }
        let tol = 1e-9 * width;
        let mut at = 0.0;
        for p in &pieces {
            if (p.x0 - at).abs() > tol || !(p.x1 > p.x0) {
                return Err(Error::InvalidParameter(format!(
                    "pieces must tile [0, {width}); gap or overlap at {at}"
                )));
            }
            at = p.x1;
            let probe = [p.x0, 0.5 * (p.x0 + p.x1), p.x1];
            for x in probe {
                let g = p.geometry.at(origin + x);
                let params = SeafloorParams {
                    material: p.material,
                    geometry: g,
                    object_depth: p.object_depth,
                };
                params.validate(d)?;
            }
        }
        if (at - width).abs() > tol {
            return Err(Error::InvalidParameter(format!("pieces end at {at}, width is {width}")));
        }
        Ok(Self {
            width,
            origin,
            domain: *d,
            water: exp.water(),
            sediment_attenuation: exp.sediment_attenuation,
            pieces,
        })
    }

    fn wrap(&self, x: f64) -> f64 {
        let w = x.rem_euclid(self.width);
        if w >= self.width {
            0.0
        } else {
            w
        }
    }

    fn piece(&self, xl: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.x1 <= xl);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }

    /// Interface height at local position `x`.
    pub fn interface(&self, x: f64) -> f64 {
        let xl = self.wrap(x);
        let xa = self.origin + xl;
        let g = self.piece(xl).geometry.at(xa);
        self.domain.interface_at(self.domain.phase_coordinate(xa), &g)
    }

    /// Everything needed to evaluate one vertical column.
    pub fn column(&self, x: f64) -> Column {
        let xl = self.wrap(x);
        let p = self.piece(xl);
        let xa = self.origin + xl;
        let g = p.geometry.at(xa);
        let interface = self.domain.interface_at(self.domain.phase_coordinate(xa), &g);
        let with_att = |mut props: GeoacousticProps| {
            props.attenuation = self.sediment_attenuation;
            props
        };
        let (sediment, object) = match (p.custom_sediment, p.material) {
            (Some(props), _) => (props, None),
            (None, MaterialType::Metal) => (
                with_att(material_properties(MaterialType::Sand)),
                Some((
                    -p.object_depth.unwrap_or(DEFAULT_OBJECT_DEPTH),
                    with_att(material_properties(MaterialType::Metal)),
                )),
            ),
            (None, m) => (with_att(material_properties(m)), None),
        };
        Column {
            interface,
            water: self.water,
            sediment,
            object,
        }
    }

    pub fn props(&self, x: f64, y: f64) -> GeoacousticProps {
        self.column(x).at(y)
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        self.props(x, y).density
    }

    pub fn speed(&self, x: f64, y: f64) -> f64 {
        self.props(x, y).sound_speed
    }

    pub fn attenuation(&self, x: f64, y: f64) -> f64 {
        self.props(x, y).attenuation
    }

    /// Upper bound of the interface over the strip.
    pub fn max_interface(&self) -> f64 {
        let n = 64 * self.pieces.len().max(1) * 64;
        (0..n)
            .map(|i| self.interface(self.width * i as f64 / n as f64))
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
            + self.domain.ripple_amplitude * 0.05
    }

    /// Every distinct set of properties that can appear below the interface.
    pub fn sediment_props(&self) -> Vec<GeoacousticProps> {
        let mut out: Vec<GeoacousticProps> = Vec::new();
        for p in &self.pieces {
            let c = self.column(0.5 * (p.x0 + p.x1));
            for props in std::iter::once(c.sediment).chain(c.object.map(|o| o.1)) {
                if !out.contains(&props) {
                    out.push(props);
                }
            }
        }
        out
    }
}

/// Vertical profile of the medium at one x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub interface: f64,
    pub water: GeoacousticProps,
    pub sediment: GeoacousticProps,
    /// top of the buried object and its properties
    pub object: Option<(f64, GeoacousticProps)>,
}

impl Column {
    #[inline]
    pub fn at(&self, y: f64) -> GeoacousticProps {
        if y > self.interface {
            self.water
        } else {
            match self.object {
                Some((top, props)) if y < top => props,
                _ => self.sediment,
            }
        }
    }
}
