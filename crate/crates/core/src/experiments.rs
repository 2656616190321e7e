//! Synthetic seabeds, noisy data and Monte Carlo scoring of the matcher.
//!
//! Models are written in segment units `u`; the physical position is
//! `x = u·Δs`, so the same model runs at any segment width.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::LibraryIndex;
use crate::matcher::{classify_prepared, ClassifyOptions, MatchConfig, PreparedLibrary};
use crate::microlocal::{backscatter_profile, BackscatterSignal, ProfileOptions};
use crate::params::{
    DomainSpec, ExperimentParams, GeoParams, MaterialType, SeafloorParams, DEFAULT_OBJECT_DEPTH,
};
use crate::solver::{solve_layout, solve_template, GeometryProfile, MediumMap, Piece, SolveSpec};

/// Sediment label over `[start, end)` in segment units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialRun {
    pub start: f64,
    pub end: f64,
    pub material: MaterialType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometrySpec {
    Constant(GeoParams),
    /// piecewise-linear in `u`, constant beyond the end knots
    Knots(Vec<(f64, GeoParams)>),
}

impl GeometrySpec {
    pub fn at(&self, u: f64) -> GeoParams {
        self.profile(1.0).at(u)
    }

    /// Same geometry with knots in metres.
    pub fn profile(&self, segment_width: f64) -> GeometryProfile {
        match self {
            GeometrySpec::Constant(g) => GeometryProfile::Constant(*g),
            GeometrySpec::Knots(k) => {
                GeometryProfile::Knots(k.iter().map(|(u, g)| (u * segment_width, *g)).collect())
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, GeometrySpec::Constant(_))
    }
}

/// Metal object buried under sand over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub start: f64,
    pub end: f64,
    /// depth of the object top below y = 0, m
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeabedModel {
    pub name: String,
    pub n_segments: usize,
    pub runs: Vec<MaterialRun>,
    pub geometry: GeometrySpec,
    pub object: Option<ObjectSpec>,
    /// right end of the object placed by [`SeabedModel::with_object`]
    pub object_anchor: f64,
}

impl SeabedModel {
    /// Sand, rock and clay under constant ripples.
    pub fn model_a() -> Self {
        use MaterialType::*;
        Self {
            name: "a".into(),
            n_segments: 20,
            runs: runs(&[(0.0, 2.0, Sand), (2.0, 5.0, Rock), (5.0, 8.0, Clay), (8.0, 20.0, Sand)]),
            geometry: GeometrySpec::Constant(GeoParams::new(15.0, 1.0, 26.0)),
            object: None,
            object_anchor: 14.0,
        }
    }

    /// Sand, rock and clay under slowly varying ripples:
    /// `mg1 = 14 + (0.2u - 1)·χ[5,10) + χ[10,20)`,
    /// `mg2 = 1 + (0.5 - 0.05u)·χ[10,20)`, `mg3 = 25 + u/20`.
    pub fn model_b() -> Self {
        use MaterialType::*;
        let g = |u: f64| {
            let mg1 = 14.0 + if u < 5.0 { 0.0 } else if u < 10.0 { 0.2 * u - 1.0 } else { 1.0 };
            let mg2 = 1.0 + if u < 10.0 { 0.0 } else { 0.5 - 0.05 * u };
            (u, GeoParams::new(mg1, mg2, 25.0 + u / 20.0))
        };
        Self {
            name: "b".into(),
            n_segments: 20,
            runs: runs(&[(0.0, 5.0, Sand), (5.0, 13.0, Rock), (13.0, 20.0, Clay)]),
            geometry: GeometrySpec::Knots(vec![g(0.0), g(5.0), g(10.0), g(20.0)]),
            object: None,
            object_anchor: 4.0,
        }
    }

    /// Sand, clay, rock and sand in blocks of five segments, so the seabed
    /// holds a clay-rock junction.
    pub fn clay_rock() -> Self {
        use MaterialType::*;
        Self {
            name: "clay_rock".into(),
            runs: runs(&[(0.0, 5.0, Sand), (5.0, 10.0, Clay), (10.0, 15.0, Rock), (15.0, 20.0, Sand)]),
            object_anchor: 19.0,
            ..Self::model_a()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "a" | "model_a" => Ok(Self::model_a()),
            "b" | "model_b" => Ok(Self::model_b()),
            "clay_rock" | "clay-rock" => Ok(Self::clay_rock()),
            other => Err(Error::InvalidParameter(format!("unknown seabed model {other:?}"))),
        }
    }

    /// Adds an object `[anchor - width, anchor)`; width 0 leaves the model
    /// unchanged.
    pub fn with_object(self, width: f64) -> Self {
        self.with_object_at(width, DEFAULT_OBJECT_DEPTH)
    }

    /// As [`Self::with_object`] with the top of the object at `depth`.
    pub fn with_object_at(mut self, width: f64, depth: f64) -> Self {
        if width > 0.0 {
            self.object = Some(ObjectSpec {
                start: self.object_anchor - width,
                end: self.object_anchor,
                depth,
            });
        } else {
            self.object = None;
        }
        self
    }

    pub fn width(&self) -> f64 {
        self.n_segments as f64
    }

    fn clamp(&self, u: f64) -> f64 {
        u.clamp(0.0, self.width() * (1.0 - 1e-12))
    }

    /// Sediment at `u`, ignoring the object; the end runs extend outward.
    pub fn material_at(&self, u: f64) -> MaterialType {
        let u = self.clamp(u);
        self.runs
            .iter()
            .find(|r| r.start <= u && u < r.end)
            .or(self.runs.last())
            .map(|r| r.material)
            .unwrap_or(MaterialType::Sand)
    }

    pub fn object_at(&self, u: f64) -> Option<&ObjectSpec> {
        let u = self.clamp(u);
        self.object.as_ref().filter(|o| o.start <= u && u < o.end)
    }

    pub fn geometry_at(&self, u: f64) -> GeoParams {
        self.geometry.at(u)
    }

    pub fn is_object_segment(&self, i: usize) -> bool {
        let (a, b) = (i as f64, i as f64 + 1.0);
        self.object.is_some_and(|o| o.start.max(a) < o.end.min(b))
    }

    /// Label of segment `i`: `Metal` when the object covers part of it,
    /// otherwise the sediment at its centre.
    pub fn segment_label(&self, i: usize) -> MaterialType {
        if self.is_object_segment(i) {
            MaterialType::Metal
        } else {
            self.material_at(i as f64 + 0.5)
        }
    }

    pub fn labels(&self) -> Vec<MaterialType> {
        (0..self.n_segments).map(|i| self.segment_label(i)).collect()
    }

    /// Truth parameters of segment `i` (geometry at its centre).
    pub fn segment_params(&self, i: usize) -> SeafloorParams {
        let mut p = SeafloorParams::new(self.segment_label(i), self.geometry_at(i as f64 + 0.5));
        p.object_depth = self.object.filter(|_| self.is_object_segment(i)).map(|o| o.depth);
        p
    }

    /// Positions in `(a, b)` where the medium changes, ascending.
    fn changes_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self.runs.iter().flat_map(|r| [r.start, r.end]).collect();
        if let Some(o) = self.object {
            pts.extend([o.start, o.end]);
        }
        let w = self.width();
        pts.retain(|&p| p > a && p < b && p > 0.0 && p < w);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.retain(|&p| {
            let eps = 1e-9;
            self.material_at(p - eps) != self.material_at(p + eps)
                || self.object_at(p - eps).is_some() != self.object_at(p + eps).is_some()
        });
        pts
    }

    /// Pieces over `[a, b)` in metres relative to `a`.
    pub fn pieces(&self, a: f64, b: f64, segment_width: f64) -> Vec<Piece> {
        let mut cuts = vec![a];
        cuts.extend(self.changes_in(a, b));
        cuts.push(b);
        let profile = self.geometry.profile(segment_width);
        cuts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let object = self.object_at(mid);
                let material = if object.is_some() {
                    MaterialType::Metal
                } else {
                    self.material_at(mid)
                };
                Piece {
                    x0: (w[0] - a) * segment_width,
                    x1: (w[1] - a) * segment_width,
                    material,
                    geometry: profile.clone(),
                    object_depth: object.map(|o| o.depth),
                    custom_sediment: None,
                }
            })
            .collect()
    }

    /// True when segments `i - 1 ..= i + 1` share one material and the
    /// geometry is constant.
    fn uniform_around(&self, i: usize) -> bool {
        let c = i as f64;
        self.geometry.is_constant() && self.changes_in(c - 1.0, c + 2.0).is_empty()
    }

    /// Transition type at the right edge of every segment but the last.
    pub fn transitions(&self) -> Vec<(MaterialType, MaterialType)> {
        let l = self.labels();
        l.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

fn runs(spec: &[(f64, f64, MaterialType)]) -> Vec<MaterialRun> {
    spec.iter()
        .map(|&(start, end, material)| MaterialRun {
            start,
            end,
            material,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// one template-sized solve per segment, wider windows near changes
    #[default]
    Segmented,
    /// one solve over the padded seabed
    FullDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSignal {
    pub signal: BackscatterSignal,
    pub fidelity: Fidelity,
    pub solves: usize,
}

/// Forward simulation of seabeds, with solved windows cached by content.
#[derive(Debug)]
pub struct Simulator {
    pub exp: ExperimentParams,
    pub domain: DomainSpec,
    pub solve: SolveSpec,
    pub profile: ProfileOptions,
    pub fidelity: Fidelity,
    cache: Mutex<HashMap<String, Arc<Vec<f64>>>>,
}

/// Where one segment's values come from.
#[derive(Debug, Clone)]
struct SegmentSource {
    key: String,
    /// segment offset within the cached profile
    slot: usize,
    job: WindowJob,
}

#[derive(Debug, Clone)]
enum WindowJob {
    Template(SeafloorParams),
    /// pieces, width and origin in metres, first extracted segment
    Window { pieces: Vec<Piece>, width: f64, origin: f64, first: f64, count: usize },
}

impl Simulator {
    pub fn new(exp: ExperimentParams, domain: DomainSpec, solve: SolveSpec) -> Self {
        Self {
            exp,
            domain,
            solve,
            profile: ProfileOptions::default(),
            fidelity: Fidelity::Segmented,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    pub fn cached_solves(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Clean backscatter of the whole seabed.
    pub fn simulate(&self, model: &SeabedModel) -> Result<SimulatedSignal> {
        self.exp.validate()?;
        self.domain.validate()?;
        self.solve.validate()?;
        if model.n_segments == 0 {
            return Err(Error::InvalidParameter("model has no segments".into()));
        }
        let sources = match self.fidelity {
            Fidelity::Segmented => (0..model.n_segments).map(|i| self.segment_source(model, i)).collect(),
            Fidelity::FullDomain => self.full_domain_sources(model),
        };
        let mut distinct: BTreeMap<String, WindowJob> = BTreeMap::new();
        {
            let cache = self.cache.lock().unwrap();
            for s in &sources {
                if !cache.contains_key(&s.key) {
                    distinct.entry(s.key.clone()).or_insert_with(|| s.job.clone());
                }
            }
        }
        let solves = distinct.len();
        let fresh: Vec<(String, Vec<f64>)> = distinct
            .into_par_iter()
            .map(|(key, job)| Ok((key, self.run(&job)?)))
            .collect::<Result<_>>()?;
        let mut cache = self.cache.lock().unwrap();
        for (k, v) in fresh {
            cache.insert(k, Arc::new(v));
        }
        let n = self.domain.samples_per_segment;
        let mut values = Vec::with_capacity(model.n_segments * n);
        for s in &sources {
            let v = &cache[&s.key];
            values.extend_from_slice(&v[s.slot * n..(s.slot + 1) * n]);
        }
        let x_coords = crate::params::measurement_grid(&self.domain, model.n_segments);
        Ok(SimulatedSignal {
            signal: BackscatterSignal {
                values,
                x_coords,
                alpha: self.exp.alpha,
                segment_width: self.domain.segment_width,
            },
            fidelity: self.fidelity,
            solves,
        })
    }

    fn segment_source(&self, model: &SeabedModel, i: usize) -> SegmentSource {
        let ds = self.domain.segment_width;
        if model.uniform_around(i) {
            let p = model.segment_params(i);
            return SegmentSource {
                key: format!("template:{}", serde_json::to_string(&p).unwrap()),
                slot: 0,
                job: WindowJob::Template(p),
            };
        }
        let f = self.solve.domain_width_factor as i64;
        let ii = i as i64;
        let centre = i as f64 + 0.5;
        let nearest = model
            .changes_in(centre - f as f64, centre + f as f64)
            .into_iter()
            .min_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()));
        let start = match nearest {
            Some(c) => (c.floor() as i64 - f).clamp(ii - f, ii - f + 1),
            None => ii - f,
        };
        let (a, b) = (start as f64, (start + 2 * f) as f64);
        let pieces = model.pieces(a, b, ds);
        let origin = a * ds;
        let mut key = serde_json::to_string(&pieces).unwrap();
        if !model.geometry.is_constant() {
            key.push_str(&format!("@{origin}"));
        }
        SegmentSource {
            key: format!("window:{key}"),
            slot: (ii - start) as usize,
            job: WindowJob::Window {
                pieces,
                width: 2.0 * f as f64 * ds,
                origin,
                first: origin,
                count: 2 * f as usize,
            },
        }
    }

    fn full_domain_sources(&self, model: &SeabedModel) -> Vec<SegmentSource> {
        let ds = self.domain.segment_width;
        let pad = self.solve.domain_width_factor as f64;
        let (a, b) = (-pad, model.width() + pad);
        let pieces = model.pieces(a, b, ds);
        let key = format!("full:{}", serde_json::to_string(&(&pieces, &model.geometry)).unwrap());
        let job = WindowJob::Window {
            pieces,
            width: (b - a) * ds,
            origin: a * ds,
            first: 0.0,
            count: model.n_segments,
        };
        (0..model.n_segments)
            .map(|i| SegmentSource {
                key: key.clone(),
                slot: i,
                job: job.clone(),
            })
            .collect()
    }

    fn run(&self, job: &WindowJob) -> Result<Vec<f64>> {
        let d = &self.domain;
        match job {
            WindowJob::Template(p) => {
                let s = SolveSpec {
                    boundary: crate::solver::Boundary::Periodic,
                    ..self.solve
                };
                let sol = solve_template(p, &self.exp, d, &s)?;
                Ok(backscatter_profile(&sol.scattered, &self.exp, d, d.segment_width, 1, &self.profile)?.values)
            }
            WindowJob::Window {
                pieces,
                width,
                origin,
                first,
                count,
            } => {
                let m = MediumMap::new(pieces.clone(), *width, *origin, &self.exp, d)?;
                let sol = solve_layout(&m, &self.exp, &self.solve)?;
                Ok(backscatter_profile(&sol.scattered, &self.exp, d, *first, *count, &self.profile)?.values)
            }
        }
    }
}

pub fn simulate_seabed(
    model: &SeabedModel,
    exp: &ExperimentParams,
    d: &DomainSpec,
    s: &SolveSpec,
    fidelity: Fidelity,
) -> Result<SimulatedSignal> {
    Simulator::new(*exp, *d, *s).with_fidelity(fidelity).simulate(model)
}

/// Adds i.i.d. Gaussian noise with standard deviation `level·RMS(d)`.
pub fn add_noise(d: &BackscatterSignal, level: f64, seed: u64) -> Result<BackscatterSignal> {
    add_noise_with(d, level, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn add_noise_with<R: rand::Rng + ?Sized>(
    d: &BackscatterSignal,
    level: f64,
    rng: &mut R,
) -> Result<BackscatterSignal> {
    if !(level >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise level {level} must be non-negative")));
    }
    let mut out = d.clone();
    if level == 0.0 || d.is_empty() {
        return Ok(out);
    }
    let rms = (d.values.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
    let normal = Normal::new(0.0, level * rms)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    for v in out.values.iter_mut() {
        *v += normal.sample(rng);
    }
    Ok(out)
}

/// Random generator for trial `trial` of case `case`.
pub fn trial_rng(seed: u64, case: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((case as u64) << 32) | trial as u64);
    rng
}

/// Ground truth of one evaluated seabed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub labels: Vec<MaterialType>,
    pub geometries: Vec<GeoParams>,
    pub object_segments: Vec<usize>,
}

impl Truth {
    pub fn of(model: &SeabedModel) -> Self {
        Self {
            labels: model.labels(),
            geometries: (0..model.n_segments).map(|i| model.segment_params(i).geometry).collect(),
            object_segments: (0..model.n_segments).filter(|&i| model.is_object_segment(i)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub materials: Vec<MaterialType>,
    pub geometries: Vec<GeoParams>,
    pub l_star: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRate {
    pub left: MaterialType,
    pub right: MaterialType,
    pub instances: usize,
    pub alarms: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub material_accuracy: f64,
    /// fraction of object segments labelled `Metal`; `None` without object
    pub detection_rate: Option<f64>,
    /// `Metal` labels on object-free segments over all object-free segments
    pub false_alarm_rate: f64,
    pub false_alarms: Vec<TransitionRate>,
    /// mean over trials of `E_i`
    pub geometry_errors: [f64; 3],
}

/// `E_i = ‖m_Gi − m̂_Gi‖ / (√N ‖m_Gi‖)`.
pub fn geometry_errors(truth: &[GeoParams], estimate: &[GeoParams]) -> [f64; 3] {
    let n = truth.len() as f64;
    let mut out = [0.0; 3];
    for (k, e) in out.iter_mut().enumerate() {
        let num: f64 = truth
            .iter()
            .zip(estimate)
            .map(|(t, m)| (t.as_array()[k] - m.as_array()[k]).powi(2))
            .sum();
        let den: f64 = truth.iter().map(|t| t.as_array()[k].powi(2)).sum();
        *e = num.sqrt() / (n.sqrt() * den.sqrt());
    }
    out
}

impl CaseMetrics {
    pub fn compute(truth: &Truth, trials: &[TrialOutcome]) -> Self {
        let nt = trials.len().max(1) as f64;
        let n = truth.labels.len();
        let correct: usize = trials
            .iter()
            .map(|t| t.materials.iter().zip(&truth.labels).filter(|(a, b)| a == b).count())
            .sum();
        let detection_rate = (!truth.object_segments.is_empty()).then(|| {
            let hits: usize = trials
                .iter()
                .map(|t| {
                    truth
                        .object_segments
                        .iter()
                        .filter(|&&i| t.materials[i] == MaterialType::Metal)
                        .count()
                })
                .sum();
            hits as f64 / (truth.object_segments.len() as f64 * nt)
        });
        let clean: Vec<usize> = (0..n).filter(|i| !truth.object_segments.contains(i)).collect();
        let alarm = |t: &TrialOutcome, i: usize| t.materials[i] == MaterialType::Metal;
        let total_alarms: usize = trials
            .iter()
            .map(|t| clean.iter().filter(|&&i| alarm(t, i)).count())
            .sum();
        let false_alarm_rate = if clean.is_empty() {
            0.0
        } else {
            total_alarms as f64 / (clean.len() as f64 * nt)
        };
        let mut by_type: BTreeMap<(MaterialType, MaterialType), (usize, usize)> = BTreeMap::new();
        for &i in clean.iter().filter(|&&i| i + 1 < n) {
            let e = by_type.entry((truth.labels[i], truth.labels[i + 1])).or_default();
            e.0 += 1;
            e.1 += trials.iter().filter(|t| alarm(t, i)).count();
        }
        let false_alarms = by_type
            .into_iter()
            .map(|((left, right), (instances, alarms))| TransitionRate {
                left,
                right,
                instances,
                alarms,
                rate: alarms as f64 / (instances as f64 * nt),
            })
            .collect();
        let mut geometry_errors_mean = [0.0; 3];
        for t in trials {
            let e = geometry_errors(&truth.geometries, &t.geometries);
            for k in 0..3 {
                geometry_errors_mean[k] += e[k] / nt;
            }
        }
        Self {
            material_accuracy: correct as f64 / (n as f64 * nt),
            detection_rate,
            false_alarm_rate,
            false_alarms,
            geometry_errors: geometry_errors_mean,
        }
    }
}

/// Data of the first trial, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub x: Vec<f64>,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub prediction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub model: String,
    pub object_width: f64,
    pub truth: Truth,
    pub trials: Vec<TrialOutcome>,
    pub metrics: CaseMetrics,
    pub overlay: Overlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub n_trials: usize,
    pub noise_level: f64,
    pub fidelity: Fidelity,
    pub cases: Vec<CaseReport>,
    /// `(object width, rate)` for every case with an object
    pub detection_rates: Vec<(f64, f64)>,
    /// pooled over all cases
    pub false_alarm_rates: Vec<TransitionRate>,
    /// mean of the per-case `E_i`
    pub geometry_errors: [f64; 3],
}

impl TrialReport {
    /// Rebuilds every metric from the stored outcomes.
    pub fn recompute(&self) -> TrialReport {
        let mut cases = self.cases.clone();
        for c in &mut cases {
            c.metrics = CaseMetrics::compute(&c.truth, &c.trials);
        }
        Self::assemble(self.seed, self.n_trials, self.noise_level, self.fidelity, cases)
    }

    fn assemble(seed: u64, n_trials: usize, noise_level: f64, fidelity: Fidelity, cases: Vec<CaseReport>) -> Self {
        let detection_rates = cases
            .iter()
            .filter_map(|c| c.metrics.detection_rate.map(|r| (c.object_width, r)))
            .collect();
        let mut pooled: BTreeMap<(MaterialType, MaterialType), (usize, usize)> = BTreeMap::new();
        for c in &cases {
            for r in &c.metrics.false_alarms {
                let e = pooled.entry((r.left, r.right)).or_default();
                e.0 += r.instances;
                e.1 += r.alarms;
            }
        }
        let nt = n_trials.max(1) as f64;
        let false_alarm_rates = pooled
            .into_iter()
            .map(|((left, right), (instances, alarms))| TransitionRate {
                left,
                right,
                instances,
                alarms,
                rate: alarms as f64 / (instances as f64 * nt),
            })
            .collect();
        let mut geometry_errors = [0.0; 3];
        for c in &cases {
            for k in 0..3 {
                geometry_errors[k] += c.metrics.geometry_errors[k] / cases.len() as f64;
            }
        }
        Self {
            seed,
            n_trials,
            noise_level,
            fidelity,
            cases,
            detection_rates,
            false_alarm_rates,
            geometry_errors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSpec {
    pub trials: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub object_widths: Vec<f64>,
    /// depth of the object top below the nominal interface, m
    pub object_depth: f64,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            trials: 100,
            noise_level: 0.05,
            seed: 0,
            object_widths: vec![4.0, 2.0, 1.0, 0.5, 0.0],
            object_depth: DEFAULT_OBJECT_DEPTH,
        }
    }
}

/// Classifies `trials` noisy copies of `clean` for one seabed.
pub fn run_case(
    model: &SeabedModel,
    clean: &BackscatterSignal,
    lib: &PreparedLibrary,
    cfg: &MatchConfig,
    spec: &EvaluationSpec,
    case: usize,
) -> Result<CaseReport> {
    if spec.trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let truth = Truth::of(model);
    let runs: Vec<(TrialOutcome, Option<Overlay>)> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let noisy = add_noise_with(clean, spec.noise_level, &mut trial_rng(spec.seed, case, t))?;
            let r = classify_prepared(&noisy.values, lib, cfg, ClassifyOptions::default())?;
            let outcome = TrialOutcome {
                trial: t,
                materials: r.material_map.clone(),
                geometries: r.geometries(),
                l_star: r.matches.iter().map(|m| m.l_star).collect(),
            };
            let overlay = (t == 0).then(|| Overlay {
                x: clean.x_coords.clone(),
                clean: clean.values.clone(),
                noisy: noisy.values,
                prediction: r.prediction,
            });
            Ok((outcome, overlay))
        })
        .collect::<Result<_>>()?;
    let mut overlay = None;
    let mut trials = Vec::with_capacity(runs.len());
    for (o, ov) in runs {
        trials.push(o);
        overlay = overlay.or(ov);
    }
    let metrics = CaseMetrics::compute(&truth, &trials);
    Ok(CaseReport {
        model: model.name.clone(),
        object_width: model.object.map(|o| o.end - o.start).unwrap_or(0.0),
        truth,
        trials,
        metrics,
        overlay: overlay.expect("trial 0 present"),
    })
}

/// Monte Carlo evaluation of one model over several object widths.
pub fn evaluate(
    sim: &Simulator,
    model: &SeabedModel,
    lib: &LibraryIndex,
    cfg: &MatchConfig,
    spec: &EvaluationSpec,
) -> Result<TrialReport> {
    cfg.validate()?;
    let prepared = PreparedLibrary::new(lib, sim.exp.alpha, cfg.lmax)?;
    let mut cases = Vec::new();
    for (c, &w) in spec.object_widths.iter().enumerate() {
        let m = model.clone().with_object_at(w, spec.object_depth);
        let clean = sim.simulate(&m)?;
        cases.push(run_case(&m, &clean.signal, &prepared, cfg, spec, c)?);
    }
    Ok(TrialReport::assemble(spec.seed, spec.trials, spec.noise_level, sim.fidelity, cases))
}
