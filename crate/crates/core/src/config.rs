//! Run configuration read from TOML.
//!
//! A file names a preset and overrides any subset of its tables:
//!
//! ```toml
//! preset = "desk_20khz"
//! fidelity = "segmented"
//!
//! [experiment]
//! alpha = 0.5235987755982988
//!
//! [grid.mg1]
//! min = 10.0
//! max = 15.0
//! count = 3
//!
//! [evaluation]
//! trials = 20
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experiments::{EvaluationSpec, Fidelity};
use crate::library::ParamGrid;
use crate::matcher::MatchConfig;
use crate::microlocal::ProfileOptions;
use crate::params::{DomainSpec, ExperimentParams, MaterialType, SeafloorParams};
use crate::solver::SolveSpec;
use crate::{Error, Result};

/// Object depth of the full-grid preset, m.
pub const PAPER_OBJECT_DEPTH: f64 = 0.021;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Preset {
    /// the full grid at 20 kHz with one-metre segments
    #[serde(rename = "paper")]
    Paper,
    /// a coarse grid at 20 kHz with 0.25 m segments
    #[default]
    #[serde(rename = "desk_20khz")]
    Desk20kHz,
    /// 2 kHz with one-metre segments; ripples and depths scaled with the
    /// wavelength
    #[serde(rename = "desk_2khz")]
    Desk2kHz,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk20kHz => "desk_20khz",
            Preset::Desk2kHz => "desk_2khz",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Preset::Paper),
            "desk_20khz" | "desk" => Ok(Preset::Desk20kHz),
            "desk_2khz" => Ok(Preset::Desk2kHz),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub library: Option<PathBuf>,
    pub signal: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub fidelity: Fidelity,
    pub experiment: ExperimentParams,
    pub domain: DomainSpec,
    pub solver: SolveSpec,
    pub profile: ProfileOptions,
    pub grid: ParamGrid,
    pub matcher: MatchConfig,
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::default())
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = Self {
            preset,
            fidelity: Fidelity::Segmented,
            experiment: ExperimentParams::default(),
            domain: DomainSpec::default(),
            solver: SolveSpec::default(),
            profile: ProfileOptions::default(),
            grid: ParamGrid::default(),
            matcher: MatchConfig::default(),
            evaluation: EvaluationSpec::default(),
            paths: Paths::default(),
        };
        let desk = || Self {
            domain: DomainSpec {
                segment_width: 0.25,
                sediment_depth: 0.5,
                water_height: 0.45,
                receiver_line_height: 0.2,
                samples_per_segment: 256,
                ..DomainSpec::default()
            },
            solver: SolveSpec {
                bottom_absorber: 0.2,
                ..SolveSpec::default()
            },
            grid: ParamGrid::desk(),
            evaluation: EvaluationSpec {
                trials: 20,
                object_widths: vec![2.0, 0.5, 0.0],
                ..EvaluationSpec::default()
            },
            ..base.clone()
        };
        match preset {
            // with mg2 = 1 some grid troughs reach exactly -0.02
            Preset::Paper => Self {
                grid: ParamGrid {
                    object_depth: PAPER_OBJECT_DEPTH,
                    ..base.grid.clone()
                },
                evaluation: EvaluationSpec {
                    object_depth: PAPER_OBJECT_DEPTH,
                    ..base.evaluation.clone()
                },
                ..base
            },
            Preset::Desk20kHz => desk(),
            Preset::Desk2kHz => {
                // every length but the segment width grows with the wavelength
                let d = desk();
                let scale = 10.0;
                Self {
                    experiment: ExperimentParams {
                        frequency: 2_000.0,
                        ..d.experiment
                    },
                    domain: DomainSpec {
                        segment_width: 1.0,
                        sediment_depth: d.domain.sediment_depth * scale,
                        water_height: d.domain.water_height * scale,
                        receiver_line_height: d.domain.receiver_line_height * scale,
                        ripple_amplitude: d.domain.ripple_amplitude * scale,
                        ripple_frequency_scale: 1.0 / scale,
                        ..d.domain
                    },
                    solver: SolveSpec {
                        pml_thickness: d.solver.pml_thickness * scale,
                        bottom_absorber: d.solver.bottom_absorber * scale,
                        ..d.solver
                    },
                    grid: ParamGrid {
                        object_depth: d.grid.object_depth * scale,
                        ..d.grid.clone()
                    },
                    evaluation: EvaluationSpec {
                        object_depth: d.evaluation.object_depth * scale,
                        ..d.evaluation.clone()
                    },
                    ..d
                }
            }
        }
    }

    /// Parses a TOML document; keys it leaves out come from its preset.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let preset = match user.get("preset") {
            None => Preset::default(),
            Some(toml::Value::String(s)) => Preset::from_name(s)?,
            Some(v) => return Err(Error::Config(format!("preset must be a string, found {v}"))),
        };
        let mut merged =
            toml::Table::try_from(Self::preset(preset)).map_err(|e| Error::Config(format!("{e}")))?;
        merge(&mut merged, user);
        let cfg: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("{e}")))
    }

    /// Checks every parameter group before any solve starts.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.experiment.validate().map_err(wrap)?;
        self.domain.validate().map_err(wrap)?;
        self.solver.validate().map_err(wrap)?;
        self.grid.validate().map_err(wrap)?;
        self.matcher.validate().map_err(wrap)?;
        if !(self.profile.r0 > 0.0) || !(self.profile.epsilon > 0.0) {
            return Err(Error::Config("profile r0 and epsilon must be positive".into()));
        }
        let levels = self.domain.samples_per_segment.trailing_zeros() as usize;
        if self.matcher.lmax > levels {
            return Err(Error::Config(format!(
                "lmax {} exceeds the {levels} levels of a {}-sample segment",
                self.matcher.lmax, self.domain.samples_per_segment
            )));
        }
        let ev = &self.evaluation;
        if ev.trials == 0 {
            return Err(Error::Config("evaluation needs at least one trial".into()));
        }
        if !(ev.noise_level >= 0.0) || !ev.noise_level.is_finite() {
            return Err(Error::Config(format!("noise level {} must be non-negative", ev.noise_level)));
        }
        if ev.object_widths.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("object widths must be non-negative".into()));
        }
        // objects must sit below the deepest trough of every grid geometry
        let mut geoms = self.grid.geometries();
        geoms.extend(self.grid.transition_geometries.iter().flatten().copied());
        for g in geoms {
            for depth in [self.grid.object_depth, ev.object_depth] {
                let p = SeafloorParams::new(MaterialType::Metal, g).with_object_depth(depth);
                p.validate(&self.domain).map_err(wrap)?;
            }
        }
        Ok(())
    }

    /// Settings that are valid but lie outside the studied ranges.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.grid.mg2.max > 1.0 {
            out.push(format!("mg2 up to {} exceeds 1; ripple amplitudes may exceed the studied range", self.grid.mg2.max));
        }
        let exp = &self.experiment;
        if self.domain.segment_width < 2.0 * exp.wavelength() {
            out.push(format!(
                "segments span {:.2} wavelengths",
                self.domain.segment_width / exp.wavelength()
            ));
        }
        out
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_roundtrip() {
        for p in [Preset::Paper, Preset::Desk20kHz, Preset::Desk2kHz] {
            let cfg = RunConfig::preset(p);
            cfg.validate().unwrap();
            let text = cfg.to_toml_string().unwrap();
            assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg, "{}", p.name());
        }
    }

    #[test]
    fn overrides_merge_into_preset() {
        let cfg = RunConfig::from_toml_str(
            "preset = \"desk_20khz\"\n[grid.mg1]\nmin = 10.0\nmax = 15.0\ncount = 3\n[evaluation]\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.mg1.count, 3);
        assert_eq!(cfg.grid.mg3, ParamGrid::desk().mg3);
        assert_eq!(cfg.evaluation.seed, 9);
        assert_eq!(cfg.evaluation.trials, 20);
        assert_eq!(cfg.domain.segment_width, 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::from_toml_str("preset = \"nope\""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[domain]\nsegment_wdth = 1.0"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_toml_str("[domain]\nsamples_per_segment = 100"),
            Err(Error::Config(_))
        ));
        assert!(matches!(RunConfig::from_toml_str("[matcher]\nlmax = 12"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[evaluation]\ntrials = 0"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_toml_str("[experiment]\nfrequency = -1.0"),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_toml_str("not toml [").is_err());
    }

    #[test]
    fn warns_on_large_mg2() {
        let cfg = RunConfig::from_toml_str("[grid]\nobject_depth = 0.03\n[grid.mg2]\nmin = 0.5\nmax = 1.5\ncount = 3\n[evaluation]\nobject_depth = 0.03").unwrap();
        assert!(cfg.warnings().iter().any(|w| w.contains("mg2")));
        assert!(RunConfig::preset(Preset::Desk20kHz).warnings().is_empty());
        assert!(!RunConfig::preset(Preset::Desk2kHz).warnings().is_empty());
    }
}
