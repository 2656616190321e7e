//! Python bindings: libraries, seabed simulation, classification and the
//! Haar and ray-decomposition transforms.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use seafloor_core::config::{Preset, RunConfig};
use seafloor_core::experiments::{self, SeabedModel, Simulator};
use seafloor_core::library::{LibraryBuilder, LibraryIndex, TemplateRecord};
use seafloor_core::matcher::{classify_values, ClassificationResult, ClassifyOptions};
use seafloor_core::microlocal::{backscatter_profile, decompose};
use seafloor_core::params::{GeoParams, MaterialType, SeafloorParams};
use seafloor_core::solver::solve_template;
use seafloor_core::wavelet::{dwt_multilevel, idwt_multilevel, WaveletCoeffs};
use seafloor_core::Error;

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else if matches!(e, Error::Io(_)) {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn material(name: &str) -> PyResult<MaterialType> {
    MaterialType::ALL
        .into_iter()
        .find(|m| m.label().eq_ignore_ascii_case(name) || format!("{m:?}").eq_ignore_ascii_case(name))
        .ok_or_else(|| PyValueError::new_err(format!("unknown material {name:?}")))
}

fn name_of(m: MaterialType) -> String {
    format!("{m:?}").to_lowercase()
}

/// Resolves `config`: a preset name, a TOML document, or None for the
/// default preset.
fn run_config(config: Option<&str>) -> PyResult<RunConfig> {
    match config {
        None => Ok(RunConfig::default()),
        Some(text) if !text.contains('=') => Ok(RunConfig::preset(Preset::from_name(text.trim()).map_err(py_err)?)),
        Some(text) => RunConfig::from_toml_str(text).map_err(py_err),
    }
}

/// Template library.
#[pyclass(name = "Library", module = "seafloor", frozen)]
struct PyLibrary {
    inner: LibraryIndex,
}

#[pymethods]
impl PyLibrary {
    #[staticmethod]
    fn load(py: Python<'_>, path: &str) -> PyResult<Self> {
        let inner = py.detach(|| LibraryIndex::load(path.as_ref())).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Solves every template of the configured grid.
    #[staticmethod]
    #[pyo3(signature = (config=None))]
    fn build(py: Python<'_>, config: Option<&str>) -> PyResult<Self> {
        let cfg = run_config(config)?;
        let mut b = LibraryBuilder::new(cfg.grid, cfg.experiment, cfg.domain, cfg.solver);
        b.profile = cfg.profile;
        let inner = py.detach(|| b.build()).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, py: Python<'_>, path: &str) -> PyResult<()> {
        py.detach(|| self.inner.save(path.as_ref())).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<u64> {
        self.inner.records.iter().map(|r| r.id).collect()
    }

    /// `(material, (mg1, mg2, mg3), alpha, values)` of record `id`.
    fn record(&self, id: u64) -> PyResult<(String, (f64, f64, f64), f64, Vec<f64>)> {
        let r: &TemplateRecord = self
            .inner
            .get(id)
            .ok_or_else(|| PyValueError::new_err(format!("no record {id}")))?;
        let g = r.params.geometry;
        Ok((name_of(r.params.material), (g.mg1, g.mg2, g.mg3), r.alpha, r.backscatter.clone()))
    }

    fn pure_only(&self) -> Self {
        Self { inner: self.inner.pure_only() }
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.exp.alpha
    }

    #[getter]
    fn samples_per_segment(&self) -> usize {
        self.inner.domain.samples_per_segment
    }

    fn __repr__(&self) -> String {
        format!("Library({} templates)", self.inner.len())
    }
}

/// Result of classifying one signal.
#[pyclass(name = "Classification", module = "seafloor", frozen)]
struct PyClassification {
    inner: ClassificationResult,
}

#[pymethods]
impl PyClassification {
    #[getter]
    fn materials(&self) -> Vec<String> {
        self.inner.material_map.iter().map(|m| name_of(*m)).collect()
    }

    #[getter]
    fn geometries(&self) -> Vec<(f64, f64, f64)> {
        self.inner.geometries().iter().map(|g| (g.mg1, g.mg2, g.mg3)).collect()
    }

    #[getter]
    fn template_ids(&self) -> Vec<u64> {
        self.inner.matches.iter().map(|m| m.template_id).collect()
    }

    #[getter]
    fn l_star(&self) -> Vec<usize> {
        self.inner.matches.iter().map(|m| m.l_star).collect()
    }

    #[getter]
    fn prediction(&self) -> Vec<f64> {
        self.inner.prediction.clone()
    }

    #[getter]
    fn misfit_evaluations(&self) -> usize {
        self.inner.misfit_evaluations
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.matches.len()
    }
}

/// Backscatter signal `(x, values)` of a synthetic seabed (`"a"`, `"b"` or
/// `"clay_rock"`).
#[pyfunction]
#[pyo3(signature = (model, object_width=0.0, noise=0.0, seed=0, config=None))]
fn simulate(
    py: Python<'_>,
    model: &str,
    object_width: f64,
    noise: f64,
    seed: u64,
    config: Option<&str>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = run_config(config)?;
    let m = SeabedModel::by_name(model)
        .map_err(py_err)?
        .with_object_at(object_width, cfg.evaluation.object_depth);
    let mut sim = Simulator::new(cfg.experiment, cfg.domain, cfg.solver).with_fidelity(cfg.fidelity);
    sim.profile = cfg.profile;
    let sig = py
        .detach(|| {
            let clean = sim.simulate(&m)?.signal;
            if noise > 0.0 {
                experiments::add_noise(&clean, noise, seed)
            } else {
                Ok(clean)
            }
        })
        .map_err(py_err)?;
    Ok((sig.x_coords, sig.values))
}

/// Matches a signal against `library`, segment by segment.
#[pyfunction]
#[pyo3(signature = (library, values, alpha=None, config=None))]
fn classify(
    py: Python<'_>,
    library: &PyLibrary,
    values: Vec<f64>,
    alpha: Option<f64>,
    config: Option<&str>,
) -> PyResult<PyClassification> {
    let cfg = run_config(config)?;
    let alpha = alpha.unwrap_or(library.inner.exp.alpha);
    let inner = py
        .detach(|| classify_values(&values, alpha, &library.inner, &cfg.matcher, ClassifyOptions::default()))
        .map_err(py_err)?;
    Ok(PyClassification { inner })
}

/// Monte Carlo evaluation; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (library, model="a", config=None))]
fn evaluate(py: Python<'_>, library: &PyLibrary, model: &str, config: Option<&str>) -> PyResult<String> {
    let cfg = run_config(config)?;
    let lib = &library.inner;
    let mut sim = Simulator::new(lib.exp, lib.domain, lib.solve).with_fidelity(cfg.fidelity);
    sim.profile = lib.profile;
    let m = SeabedModel::by_name(model).map_err(py_err)?;
    let rep = py
        .detach(|| experiments::evaluate(&sim, &m, lib, &cfg.matcher, &cfg.evaluation))
        .map_err(py_err)?;
    serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Backscatter of one periodic template over `segments` segments.
#[pyfunction]
#[pyo3(signature = (material, mg, config=None, segments=1))]
fn template_signal(
    py: Python<'_>,
    material: &str,
    mg: (f64, f64, f64),
    config: Option<&str>,
    segments: usize,
) -> PyResult<Vec<f64>> {
    let cfg = run_config(config)?;
    let mut p = SeafloorParams::new(self::material(material)?, GeoParams::new(mg.0, mg.1, mg.2));
    if p.material == MaterialType::Metal {
        p = p.with_object_depth(cfg.grid.object_depth);
    }
    py.detach(|| {
        let sol = solve_template(&p, &cfg.experiment, &cfg.domain, &cfg.solver)?;
        let d = &cfg.domain;
        let s = backscatter_profile(&sol.scattered, &cfg.experiment, d, d.segment_width, segments, &cfg.profile)?;
        Ok(s.values)
    })
    .map_err(py_err)
}

/// Multilevel Haar transform: `(approx, [detail_1, ..., detail_lmax])`.
#[pyfunction]
fn dwt(signal: Vec<f64>, lmax: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let c = dwt_multilevel(&signal, lmax).map_err(py_err)?;
    Ok((c.approx, c.details))
}

#[pyfunction]
fn idwt(approx: Vec<f64>, details: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let lmax = details.len();
    idwt_multilevel(&WaveletCoeffs { approx, details, lmax }).map_err(py_err)
}

/// Plane-wave decomposition of circle samples given as `(re, im)` pairs:
/// returns `(angles, amplitudes)`.
#[pyfunction]
#[pyo3(signature = (samples, r0=3.0 * std::f64::consts::PI, epsilon=1e-10))]
fn ray_decomposition(samples: Vec<(f64, f64)>, r0: f64, epsilon: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s: Vec<Complex64> = samples.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
    let d = decompose(&s, r0, epsilon).map_err(py_err)?;
    Ok((d.angles, d.amplitudes))
}

/// Resolved configuration as TOML.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn config_toml(config: Option<&str>) -> PyResult<String> {
    run_config(config)?.to_toml_string().map_err(py_err)
}

#[pymodule]
fn seafloor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLibrary>()?;
    m.add_class::<PyClassification>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(template_signal, m)?)?;
    m.add_function(wrap_pyfunction!(dwt, m)?)?;
    m.add_function(wrap_pyfunction!(idwt, m)?)?;
    m.add_function(wrap_pyfunction!(ray_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(config_toml, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
