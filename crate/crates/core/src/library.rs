//! Library of acoustic templates: the parameter grid, the build loop, the
//! container file and lookups.
//!
//! Every grid point is solved on a periodic strip and contributes two
//! records, one per central segment. Transition pairs are solved on a strip
//! twice as wide with the junction at its centre; the segments on either side
//! of the junction are stored with the material of their own side.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microlocal::{backscatter_profile, ProfileOptions};
use crate::params::{
    DomainSpec, ExperimentParams, GeoParams, MaterialType, SeafloorParams, DEFAULT_OBJECT_DEPTH,
};
use crate::solver::{solve_template, solve_transition, SolveSpec};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SEAFLIB1";

/// Default bound on template values, in units of the source strength.
pub const DEFAULT_CAP: f64 = 10.0;

/// `count` equispaced values on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub const fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub const fn fixed(value: f64) -> Self {
        Self::new(value, value, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| {
                    if i + 1 == n {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }

    /// Distance between neighbouring values (0 for a single value).
    pub fn spacing(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }
}

/// Parameter grid of a library build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub alpha: GridAxis,
    pub mg1: GridAxis,
    pub mg2: GridAxis,
    pub mg3: GridAxis,
    pub materials: Vec<MaterialType>,
    /// `(left, right)` material pairs solved with a junction in the middle
    pub transitions: Vec<(MaterialType, MaterialType)>,
    /// geometries used for the transition solves; every grid geometry when
    /// unset
    #[serde(default)]
    pub transition_geometries: Option<Vec<GeoParams>>,
    /// depth of the object top for `Metal` templates, m
    pub object_depth: f64,
}

impl Default for ParamGrid {
    fn default() -> Self {
        use MaterialType::*;
        Self {
            alpha: GridAxis::new(PI / 12.0, PI / 3.0, 30),
            mg1: GridAxis::new(10.0, 15.0, 20),
            mg2: GridAxis::new(0.5, 1.0, 2),
            mg3: GridAxis::new(25.0, 30.0, 20),
            materials: MaterialType::ALL.to_vec(),
            transitions: vec![(Sand, Clay), (Clay, Sand), (Clay, Rock), (Sand, Metal)],
            transition_geometries: None,
            object_depth: DEFAULT_OBJECT_DEPTH,
        }
    }
}

impl ParamGrid {
    /// A coarse grid at one angle, sized for a workstation. The geometry
    /// axes keep the default ranges; the transition list also covers the
    /// junctions of the synthetic seabeds.
    pub fn desk() -> Self {
        use MaterialType::*;
        Self {
            alpha: GridAxis::fixed(PI / 6.0),
            mg1: GridAxis::new(10.0, 15.0, 5),
            mg2: GridAxis::new(0.5, 1.0, 2),
            mg3: GridAxis::new(25.0, 30.0, 6),
            transitions: vec![
                (Sand, Clay),
                (Clay, Sand),
                (Clay, Rock),
                (Sand, Metal),
                (Metal, Sand),
                (Sand, Rock),
                (Rock, Sand),
                (Rock, Clay),
            ],
            transition_geometries: Some(vec![
                GeoParams::new(15.0, 1.0, 26.0),
                GeoParams::new(12.5, 0.5, 28.0),
            ]),
            ..Self::default()
        }
    }

    /// Grid geometries, `mg1` outermost and `mg3` innermost.
    pub fn geometries(&self) -> Vec<GeoParams> {
        let mut out = Vec::new();
        for a in self.mg1.values() {
            for b in self.mg2.values() {
                for c in self.mg3.values() {
                    out.push(GeoParams::new(a, b, c));
                }
            }
        }
        out
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha.values()
    }

    pub fn params(&self, material: MaterialType, geometry: GeoParams) -> SeafloorParams {
        let p = SeafloorParams::new(material, geometry);
        if material == MaterialType::Metal {
            p.with_object_depth(self.object_depth)
        } else {
            p
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [("alpha", self.alpha), ("mg1", self.mg1), ("mg2", self.mg2), ("mg3", self.mg3)];
        for (name, a) in axes {
            if a.count == 0 || !(a.min <= a.max) || !a.min.is_finite() || !a.max.is_finite() {
                return Err(Error::InvalidParameter(format!("bad grid axis {name}: {a:?}")));
            }
        }
        if self.materials.is_empty() && self.transitions.is_empty() {
            return Err(Error::InvalidParameter("grid has no materials".into()));
        }
        if !(self.object_depth > 0.0) {
            return Err(Error::InvalidParameter("object depth must be positive".into()));
        }
        Ok(())
    }

    /// Solve jobs in build order. Job `j` owns record ids `2j` and `2j + 1`.
    pub fn jobs(&self) -> Vec<Job> {
        let geoms = self.geometries();
        let alphas = self.alphas();
        let mut jobs = Vec::new();
        for &m in &self.materials {
            for g in &geoms {
                for &alpha in &alphas {
                    jobs.push(Job::Pure {
                        params: self.params(m, *g),
                        alpha,
                    });
                }
            }
        }
        let tgeoms = self.transition_geometries.clone().unwrap_or(geoms);
        for &(l, r) in &self.transitions {
            for g in &tgeoms {
                for &alpha in &alphas {
                    jobs.push(Job::Transition {
                        left: self.params(l, *g),
                        right: self.params(r, *g),
                        alpha,
                    });
                }
            }
        }
        jobs
    }

    /// Number of periodic records a complete build holds.
    pub fn pure_record_count(&self) -> usize {
        2 * self.materials.len()
            * self.mg1.count
            * self.mg2.count
            * self.mg3.count
            * self.alpha.count
    }
}

/// One solve of a library build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Job {
    Pure { params: SeafloorParams, alpha: f64 },
    Transition { left: SeafloorParams, right: SeafloorParams, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    PurePeriodic,
    TransitionExtract {
        left: MaterialType,
        right: MaterialType,
        side: Side,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub id: u64,
    pub params: SeafloorParams,
    pub alpha: f64,
    /// backscatter over one segment, `samples_per_segment` values
    pub backscatter: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMetadata {
    pub format_version: u32,
    pub crate_version: String,
    /// seconds since the epoch; `SOURCE_DATE_EPOCH` overrides the clock
    pub created_unix: u64,
}

impl BuildMetadata {
    fn now() -> Self {
        let created_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Self {
            format_version: FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
        }
    }
}

/// A loaded or freshly built library. Records are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryIndex {
    pub grid: ParamGrid,
    pub exp: ExperimentParams,
    pub domain: DomainSpec,
    pub solve: SolveSpec,
    pub profile: ProfileOptions,
    pub metadata: BuildMetadata,
    pub records: Vec<TemplateRecord>,
}

impl LibraryIndex {
    /// Index over hand-made records, with a default grid and solver setup.
    /// Records are sorted by id.
    pub fn from_records(
        mut records: Vec<TemplateRecord>,
        exp: ExperimentParams,
        domain: DomainSpec,
    ) -> Self {
        records.sort_by_key(|r| r.id);
        Self {
            grid: ParamGrid::default(),
            exp,
            domain,
            solve: SolveSpec::default(),
            profile: ProfileOptions::default(),
            metadata: BuildMetadata::now(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&TemplateRecord> {
        self.records
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Distinct record angles, ascending.
    pub fn angles(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.records.iter().map(|r| r.alpha).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }

    /// Record angle closest to `alpha`; the smaller angle wins a tie.
    pub fn nearest_angle(&self, alpha: f64) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for a in self.angles() {
            let dist = (a - alpha).abs();
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((a, dist));
            }
        }
        best.map(|b| b.0)
    }

    /// Records at the angle nearest `alpha`, optionally restricted to one
    /// material, in id order.
    pub fn query(&self, material: Option<MaterialType>, alpha: f64) -> Vec<&TemplateRecord> {
        let Some(a) = self.nearest_angle(alpha) else {
            return Vec::new();
        };
        self.records
            .iter()
            .filter(|r| r.alpha == a && material.is_none_or(|m| r.params.material == m))
            .collect()
    }

    /// Copy holding only the periodic records.
    pub fn pure_only(&self) -> LibraryIndex {
        let mut out = self.clone();
        out.records.retain(|r| r.provenance == Provenance::PurePeriodic);
        out
    }

    /// True when both indexes come from the same grid and solve settings.
    pub fn same_setup(&self, other: &LibraryIndex) -> bool {
        self.grid == other.grid
            && self.exp == other.exp
            && self.domain == other.domain
            && self.solve == other.solve
            && self.profile == other.profile
    }

    /// Writes the container file atomically (temporary file plus rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = tmp_path(path);
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LibraryIndex> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Layout: magic, `u32` version, `u64` header length, JSON header,
    /// `u64` payload length, little-endian `f64` payload, then a CRC-32 of
    /// header and payload.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::with_capacity(self.records.len());
        let mut payload = Vec::new();
        let mut offset = 0u64;
        for r in &self.records {
            entries.push(RecordEntry {
                id: r.id,
                params: r.params,
                alpha: r.alpha,
                provenance: r.provenance,
                offset,
                len: r.backscatter.len() as u64,
            });
            offset += r.backscatter.len() as u64;
            for v in &r.backscatter {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            grid: self.grid.clone(),
            exp: self.exp,
            domain: self.domain,
            solve: self.solve,
            profile: self.profile,
            metadata: self.metadata.clone(),
            records: entries,
        };
        let hjson = serde_json::to_vec(&header)?;
        let mut crc = crc32fast::Hasher::new();
        crc.update(&hjson);
        crc.update(&payload);
        let mut out = Vec::with_capacity(hjson.len() + payload.len() + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(hjson.len() as u64).to_le_bytes());
        out.extend_from_slice(&hjson);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc.finalize().to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LibraryIndex> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Format("not a template library".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Version(version));
        }
        let hlen = cur.u64()? as usize;
        let hjson = cur.take(hlen)?;
        let plen = cur.u64()? as usize;
        let payload = cur.take(plen)?;
        let stored = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if cur.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checksum".into()));
        }
        let mut crc = crc32fast::Hasher::new();
        crc.update(hjson);
        crc.update(payload);
        let computed = crc.finalize();
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        if plen % 8 != 0 {
            return Err(Error::Format("payload is not a whole number of f64".into()));
        }
        let header: Header = serde_json::from_slice(hjson)?;
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut records = Vec::with_capacity(header.records.len());
        for e in header.records {
            let (a, n) = (e.offset as usize, e.len as usize);
            let end = a.checked_add(n).filter(|&end| end <= values.len());
            let end = end.ok_or_else(|| Error::Format(format!("record {} out of bounds", e.id)))?;
            records.push(TemplateRecord {
                id: e.id,
                params: e.params,
                alpha: e.alpha,
                backscatter: values[a..end].to_vec(),
                provenance: e.provenance,
            });
        }
        if records.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::Format("record ids not strictly increasing".into()));
        }
        Ok(LibraryIndex {
            grid: header.grid,
            exp: header.exp,
            domain: header.domain,
            solve: header.solve,
            profile: header.profile,
            metadata: header.metadata,
            records,
        })
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

#[derive(Serialize, Deserialize)]
struct Header {
    grid: ParamGrid,
    exp: ExperimentParams,
    domain: DomainSpec,
    solve: SolveSpec,
    profile: ProfileOptions,
    metadata: BuildMetadata,
    records: Vec<RecordEntry>,
}

#[derive(Serialize, Deserialize)]
struct RecordEntry {
    id: u64,
    params: SeafloorParams,
    alpha: f64,
    provenance: Provenance,
    /// in f64 units from the start of the payload
    offset: u64,
    len: u64,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated library file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Runs the solves of a [`ParamGrid`].
#[derive(Debug, Clone)]
pub struct LibraryBuilder {
    pub grid: ParamGrid,
    pub exp: ExperimentParams,
    pub domain: DomainSpec,
    pub solve: SolveSpec,
    pub profile: ProfileOptions,
    /// templates with a value above `cap·P0` are rejected
    pub cap: f64,
    /// solves between checkpoints
    pub batch_size: usize,
}

impl LibraryBuilder {
    pub fn new(grid: ParamGrid, exp: ExperimentParams, domain: DomainSpec, solve: SolveSpec) -> Self {
        Self {
            grid,
            exp,
            domain,
            solve,
            profile: ProfileOptions::default(),
            cap: DEFAULT_CAP,
            batch_size: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.exp.validate()?;
        self.domain.validate()?;
        self.solve.validate()?;
        for a in self.grid.alphas() {
            ExperimentParams { alpha: a, ..self.exp }.validate()?;
        }
        for m in &self.grid.materials {
            for g in self.grid.geometries() {
                self.grid.params(*m, g).validate(&self.domain)?;
            }
        }
        Ok(())
    }

    pub fn empty_index(&self) -> LibraryIndex {
        LibraryIndex {
            grid: self.grid.clone(),
            exp: self.exp,
            domain: self.domain,
            solve: self.solve,
            profile: self.profile,
            metadata: BuildMetadata::now(),
            records: Vec::new(),
        }
    }

    pub fn build(&self) -> Result<LibraryIndex> {
        self.build_from(self.empty_index(), None, |_, _| {})
    }

    /// Continues the build stored at `path` (or starts it), writing a
    /// checkpoint after every batch. A complete file is returned unchanged.
    pub fn resume(&self, path: &Path, progress: impl Fn(usize, usize)) -> Result<LibraryIndex> {
        let start = if path.exists() {
            let old = LibraryIndex::load(path)?;
            if !old.same_setup(&self.empty_index()) {
                return Err(Error::Config(format!(
                    "{} was built with a different configuration",
                    path.display()
                )));
            }
            old
        } else {
            self.empty_index()
        };
        self.build_from(start, Some(path), progress)
    }

    /// Solves every job whose records are missing from `index`.
    /// `progress(done, total)` is called after each batch.
    pub fn build_from(
        &self,
        mut index: LibraryIndex,
        checkpoint: Option<&Path>,
        progress: impl Fn(usize, usize),
    ) -> Result<LibraryIndex> {
        self.validate()?;
        let jobs = self.grid.jobs();
        let have: BTreeSet<u64> = index.records.iter().map(|r| r.id).collect();
        let pending: Vec<(usize, Job)> = jobs
            .iter()
            .copied()
            .enumerate()
            .filter(|(j, _)| !(have.contains(&(2 * *j as u64)) && have.contains(&(2 * *j as u64 + 1))))
            .collect();
        let mut done = jobs.len() - pending.len();
        progress(done, jobs.len());
        for batch in pending.chunks(self.batch_size.max(1)) {
            let out: Vec<[TemplateRecord; 2]> = batch
                .par_iter()
                .map(|(j, job)| self.run_job(*j, job))
                .collect::<Result<_>>()?;
            index.records.retain(|r| !batch.iter().any(|(j, _)| r.id / 2 == *j as u64));
            index.records.extend(out.into_iter().flatten());
            index.records.sort_by_key(|r| r.id);
            done += batch.len();
            if let Some(path) = checkpoint {
                index.save(path)?;
            }
            progress(done, jobs.len());
        }
        if let Some(path) = checkpoint {
            if !path.exists() {
                index.save(path)?;
            }
        }
        Ok(index)
    }

    /// Solves job `j` and returns its two records.
    pub fn run_job(&self, j: usize, job: &Job) -> Result<[TemplateRecord; 2]> {
        let d = &self.domain;
        let n = d.samples_per_segment;
        let (alpha, sol, x_start, params, provenance) = match *job {
            Job::Pure { params, alpha } => {
                let exp = ExperimentParams { alpha, ..self.exp };
                let sol = solve_template(&params, &exp, d, &self.solve)?;
                let p = Provenance::PurePeriodic;
                (alpha, sol, d.segment_width, [params, params], [p, p])
            }
            Job::Transition { left, right, alpha } => {
                let exp = ExperimentParams { alpha, ..self.exp };
                let sol = solve_transition(&left, &right, &exp, d, &self.solve)?;
                let w = self.solve.domain_width_factor as f64;
                let side = |side| Provenance::TransitionExtract {
                    left: left.material,
                    right: right.material,
                    side,
                };
                (
                    alpha,
                    sol,
                    (w - 1.0) * d.segment_width,
                    [left, right],
                    [side(Side::Left), side(Side::Right)],
                )
            }
        };
        let exp = ExperimentParams { alpha, ..self.exp };
        let signal = backscatter_profile(&sol.scattered, &exp, d, x_start, 2, &self.profile)?;
        let cap = self.cap * self.exp.source_strength;
        if let Some(v) = signal.values.iter().find(|v| !(v.is_finite() && **v >= 0.0 && **v <= cap)) {
            return Err(Error::Solver(format!(
                "template value {v} of job {j} outside [0, {cap}]"
            )));
        }
        let record = |slot: usize| TemplateRecord {
            id: (2 * j + slot) as u64,
            params: params[slot],
            alpha,
            backscatter: signal.values[slot * n..(slot + 1) * n].to_vec(),
            provenance: provenance[slot],
        };
        Ok([record(0), record(1)])
    }
}

/// Builds a complete library in memory.
pub fn build_library(
    grid: &ParamGrid,
    exp: &ExperimentParams,
    d: &DomainSpec,
    s: &SolveSpec,
) -> Result<LibraryIndex> {
    LibraryBuilder::new(grid.clone(), *exp, *d, *s).build()
}

pub fn save_library(index: &LibraryIndex, path: &Path) -> Result<()> {
    index.save(path)
}

pub fn load_library(path: &Path) -> Result<LibraryIndex> {
    LibraryIndex::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MaterialType::*;

    fn small_domain() -> DomainSpec {
        DomainSpec {
            segment_width: 0.25,
            sediment_depth: 0.5,
            water_height: 0.45,
            receiver_line_height: 0.2,
            samples_per_segment: 16,
            ..DomainSpec::default()
        }
    }

    fn one_point_grid() -> ParamGrid {
        ParamGrid {
            alpha: GridAxis::fixed(PI / 6.0),
            mg1: GridAxis::fixed(15.0),
            mg2: GridAxis::fixed(1.0),
            mg3: GridAxis::fixed(26.0),
            materials: vec![Sand],
            transitions: vec![],
            ..ParamGrid::default()
        }
    }

    fn builder(grid: ParamGrid) -> LibraryBuilder {
        let s = SolveSpec {
            bottom_absorber: 0.2,
            ..SolveSpec::default()
        };
        LibraryBuilder::new(grid, ExperimentParams::default(), small_domain(), s)
    }

    fn fake_record(id: u64, m: MaterialType, alpha: f64) -> TemplateRecord {
        TemplateRecord {
            id,
            params: SeafloorParams::new(m, GeoParams::new(12.0, 0.5, 27.0)),
            alpha,
            backscatter: vec![id as f64 * 0.25, 1.0 / 3.0],
            provenance: Provenance::PurePeriodic,
        }
    }

    fn fake_index(records: Vec<TemplateRecord>) -> LibraryIndex {
        let mut idx = builder(one_point_grid()).empty_index();
        idx.records = records;
        idx
    }

    #[test]
    fn axis_values() {
        let a = GridAxis::new(10.0, 15.0, 5);
        assert_eq!(a.values(), vec![10.0, 11.25, 12.5, 13.75, 15.0]);
        assert_eq!(a.spacing(), 1.25);
        assert_eq!(GridAxis::fixed(0.3).values(), vec![0.3]);
        assert_eq!(GridAxis::new(10.0, 15.0, 20).spacing(), 5.0 / 19.0);
    }

    #[test]
    fn default_grid_counts() {
        let g = ParamGrid::default();
        assert_eq!(g.pure_record_count(), 2 * 30 * 20 * 2 * 20 * 4);
        assert_eq!(g.geometries().len(), 800);
        let a = g.alphas();
        assert!((a[0] - PI / 12.0).abs() < 1e-15 && a[29] == PI / 3.0);
        let d = ParamGrid::desk();
        let pure = d.materials.len() * d.geometries().len();
        let jobs = d.jobs();
        assert_eq!(jobs.len(), pure + d.transitions.len() * 2);
        assert!(matches!(jobs[0], Job::Pure { .. }));
        assert!(matches!(jobs[pure], Job::Transition { .. }));
        let metal = jobs.iter().find_map(|j| match j {
            Job::Pure { params, .. } if params.material == Metal => Some(*params),
            _ => None,
        });
        assert_eq!(metal.unwrap().object_depth, Some(DEFAULT_OBJECT_DEPTH));
    }

    #[test]
    fn one_point_build_gives_two_equal_records() {
        let lib = builder(one_point_grid()).build().unwrap();
        assert_eq!(lib.len(), 2);
        let (a, b) = (&lib.records[0].backscatter, &lib.records[1].backscatter);
        assert_eq!(a.len(), 16);
        let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-8 * scale, "{diff} vs {scale}");
        assert!(a.iter().all(|v| *v >= 0.0 && *v < DEFAULT_CAP));
    }

    #[test]
    fn transition_records_carry_their_side() {
        let grid = ParamGrid {
            materials: vec![],
            transitions: vec![(Sand, Clay)],
            transition_geometries: Some(vec![GeoParams::new(15.0, 1.0, 26.0)]),
            ..one_point_grid()
        };
        let lib = builder(grid).build().unwrap();
        assert_eq!(lib.len(), 2);
        assert_eq!(lib.records[0].params.material, Sand);
        assert_eq!(lib.records[1].params.material, Clay);
        assert_eq!(
            lib.records[1].provenance,
            Provenance::TransitionExtract {
                left: Sand,
                right: Clay,
                side: Side::Right
            }
        );
    }

    #[test]
    fn resume_completes_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lib.bin");
        let grid = ParamGrid {
            materials: vec![Sand, Clay],
            ..one_point_grid()
        };
        let b = LibraryBuilder {
            batch_size: 1,
            ..builder(grid)
        };
        let full = b.build().unwrap();
        let mut partial = full.clone();
        partial.records.truncate(2);
        partial.save(&path).unwrap();
        let calls = std::cell::Cell::new(0);
        let resumed = b.resume(&path, |_, _| calls.set(calls.get() + 1)).unwrap();
        assert_eq!(resumed.records, full.records);
        assert_eq!(calls.get(), 2);
        // complete file: nothing left to do
        let before = fs::read(&path).unwrap();
        let again = b.resume(&path, |_, _| {}).unwrap();
        assert_eq!(again.records, full.records);
        assert_eq!(fs::read(&path).unwrap(), before);

        let other = LibraryBuilder {
            exp: ExperimentParams {
                frequency: 10_000.0,
                ..ExperimentParams::default()
            },
            ..b
        };
        assert!(matches!(other.resume(&path, |_, _| {}), Err(Error::Config(_))));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lib.bin");
        let mut recs = vec![fake_record(0, Sand, 0.5), fake_record(3, Metal, 0.5)];
        recs[1].provenance = Provenance::TransitionExtract {
            left: Sand,
            right: Metal,
            side: Side::Right,
        };
        recs[1].params = recs[1].params.with_object_depth(0.03);
        let idx = fake_index(recs);
        save_library(&idx, &path).unwrap();
        let back = load_library(&path).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_bytes().unwrap(), fs::read(&path).unwrap());
    }

    #[test]
    fn empty_library_roundtrip() {
        let idx = fake_index(vec![]);
        let back = LibraryIndex::from_bytes(&idx.to_bytes().unwrap()).unwrap();
        assert!(back.is_empty());
        assert!(back.query(None, 0.5).is_empty());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = fake_index(vec![fake_record(0, Sand, 0.5)]).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(LibraryIndex::from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(LibraryIndex::from_bytes(&bad), Err(Error::Version(9))));
        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 12] ^= 0x40;
        assert!(matches!(LibraryIndex::from_bytes(&bad), Err(Error::Checksum { .. })));
        assert!(LibraryIndex::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn query_snaps_to_nearest_angle() {
        let idx = fake_index(vec![
            fake_record(0, Sand, 0.2),
            fake_record(1, Metal, 0.2),
            fake_record(2, Sand, 0.4),
            fake_record(5, Clay, 0.4),
            fake_record(7, Metal, 0.4),
        ]);
        let ids = |v: Vec<&TemplateRecord>| v.iter().map(|r| r.id).collect::<Vec<_>>();
        assert_eq!(ids(idx.query(None, 0.35)), vec![2, 5, 7]);
        // tie goes to the smaller angle
        assert_eq!(ids(idx.query(None, 0.3)), vec![0, 1]);
        assert_eq!(ids(idx.query(Some(Metal), 1.0)), vec![7]);
        assert_eq!(ids(idx.query(Some(Rock), 0.2)), Vec::<u64>::new());
        assert_eq!(idx.get(5).unwrap().params.material, Clay);
        assert!(idx.get(4).is_none());
    }
}
