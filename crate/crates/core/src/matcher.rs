//! Greedy segment-by-segment inversion against a template library.
//!
//! Each segment is compared with the templates level by level, from the
//! coarsest wavelet level down. A template survives level `l` when its
//! level-`l` misfit is below `epsilon_tol·2^-l`; the search stops at the last
//! non-empty set. The final pick minimises the misfit at the stopping level
//! plus a penalty on the geometry jump from the previous segment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{LibraryIndex, Provenance, TemplateRecord};
use crate::microlocal::BackscatterSignal;
use crate::params::{GeoParams, MaterialType, SeafloorParams};
use crate::wavelet::{dwt_multilevel, WaveletCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub epsilon_tol: f64,
    pub delta_penalty: f64,
    pub lmax: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            epsilon_tol: 1.0 / 256.0,
            delta_penalty: 0.02,
            lmax: 5,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_tol > 0.0) {
            return Err(Error::InvalidParameter("epsilon_tol must be positive".into()));
        }
        if !(self.delta_penalty >= 0.0) {
            return Err(Error::InvalidParameter("delta_penalty must be non-negative".into()));
        }
        if self.lmax == 0 {
            return Err(Error::InvalidParameter("lmax must be at least 1".into()));
        }
        Ok(())
    }

    /// Survival threshold at level `l`.
    pub fn threshold(&self, level: usize) -> f64 {
        self.epsilon_tol * 0.5f64.powi(level as i32)
    }
}

/// `‖ŵ^l − w^l‖² + ‖v̂^l − v^l‖²`.
pub fn misfit(level: usize, a: &WaveletCoeffs, b: &WaveletCoeffs) -> Result<f64> {
    if a.lmax != b.lmax || a.signal_len() != b.signal_len() {
        return Err(Error::LengthMismatch {
            expected: a.signal_len(),
            found: b.signal_len(),
        });
    }
    let (wa, wb) = (a.approx_at(level)?, b.approx_at(level)?);
    let (va, vb) = (a.detail(level)?, b.detail(level)?);
    Ok(sq_dist(&wa, &wb) + sq_dist(va, vb))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Level vectors `(w^l, v^l)`, `l = 1..=lmax`, indexed by `l - 1`.
#[derive(Debug, Clone)]
pub struct LevelVectors(Vec<(Vec<f64>, Vec<f64>)>);

impl LevelVectors {
    pub fn new(signal: &[f64], lmax: usize) -> Result<Self> {
        Ok(Self(dwt_multilevel(signal, lmax)?.level_pairs()))
    }

    pub fn lmax(&self) -> usize {
        self.0.len()
    }

    pub fn misfit(&self, other: &LevelVectors, level: usize) -> f64 {
        let (wa, va) = &self.0[level - 1];
        let (wb, vb) = &other.0[level - 1];
        sq_dist(wa, wb) + sq_dist(va, vb)
    }
}

/// Templates at one angle with their level vectors precomputed.
#[derive(Debug, Clone)]
pub struct PreparedLibrary<'a> {
    pub records: Vec<&'a TemplateRecord>,
    levels: Vec<LevelVectors>,
    pub lmax: usize,
    pub segment_len: usize,
}

impl<'a> PreparedLibrary<'a> {
    /// Templates of `lib` at the grid angle nearest `alpha`.
    pub fn new(lib: &'a LibraryIndex, alpha: f64, lmax: usize) -> Result<Self> {
        let records = lib.query(None, alpha);
        if records.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        let segment_len = lib.domain.samples_per_segment;
        let levels = records
            .par_iter()
            .map(|r| {
                if r.backscatter.len() != segment_len {
                    return Err(Error::LengthMismatch {
                        expected: segment_len,
                        found: r.backscatter.len(),
                    });
                }
                LevelVectors::new(&r.backscatter, lmax)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            records,
            levels,
            lmax,
            segment_len,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Outcome of the level-by-level search for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub l_star: usize,
    /// positions in the prepared library, ascending
    pub candidates: Vec<usize>,
    /// misfit of each candidate at `min(l_star, lmax)`
    pub scores: Vec<f64>,
    /// surviving positions per level, from `lmax + 1` (everything) down to
    /// `l_star`
    pub trace: Vec<(usize, Vec<usize>)>,
    pub evaluations: usize,
}

/// Nested candidate search. Falls back to the whole library, scored at
/// `lmax`, when nothing passes the coarsest level.
pub fn refine_candidates(
    segment: &LevelVectors,
    lib: &PreparedLibrary,
    cfg: &MatchConfig,
) -> Result<Refinement> {
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if segment.lmax() != lib.lmax || lib.lmax != cfg.lmax {
        return Err(Error::InvalidParameter(format!(
            "segment has {} levels, library {}, config {}",
            segment.lmax(),
            lib.lmax,
            cfg.lmax
        )));
    }
    let all: Vec<usize> = (0..lib.len()).collect();
    let mut trace = vec![(cfg.lmax + 1, all.clone())];
    let mut current = all;
    let mut scores: Vec<f64> = Vec::new();
    let mut evaluations = 0;
    let mut l_star = 1;
    for l in (1..=cfg.lmax).rev() {
        let m: Vec<f64> = current
            .par_iter()
            .map(|&i| segment.misfit(&lib.levels[i], l))
            .collect();
        evaluations += m.len();
        let thr = cfg.threshold(l);
        let (next, next_scores): (Vec<usize>, Vec<f64>) = current
            .iter()
            .zip(&m)
            .filter(|(_, s)| **s < thr)
            .map(|(i, s)| (*i, *s))
            .unzip();
        if next.is_empty() {
            l_star = l + 1;
            if l == cfg.lmax {
                scores = m;
            }
            break;
        }
        current = next;
        scores = next_scores;
        trace.push((l, current.clone()));
    }
    Ok(Refinement {
        l_star,
        candidates: current,
        scores,
        trace,
        evaluations,
    })
}

/// Position (into `candidates`) of the minimiser of
/// `score + δ·‖m_G − prev_G‖`; ties go to the smaller score, then to the
/// smallest template id. The score comparison matters when the penalty
/// swamps misfits far below its last bit.
pub fn select_with_penalty(
    candidates: &[(u64, GeoParams, f64)],
    prev: Option<&GeoParams>,
    delta: f64,
) -> Option<usize> {
    let cost = |(_, g, s): &(u64, GeoParams, f64)| match prev {
        Some(p) if delta > 0.0 => s + delta * g.distance(p),
        _ => *s,
    };
    (0..candidates.len()).min_by(|&a, &b| {
        cost(&candidates[a])
            .total_cmp(&cost(&candidates[b]))
            .then(candidates[a].2.total_cmp(&candidates[b].2))
            .then(candidates[a].0.cmp(&candidates[b].0))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatch {
    pub segment_index: usize,
    pub template_id: u64,
    pub chosen: SeafloorParams,
    pub provenance: Provenance,
    pub l_star: usize,
    /// misfit of the chosen template at the stopping level (at `lmax` for
    /// the fallback)
    pub final_misfit: f64,
    pub penalty: f64,
    /// candidate counts from level `lmax + 1` down to `l_star`
    pub candidate_counts: Vec<usize>,
    /// candidate ids per level, same order as `candidate_counts`
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidate_ids: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub alpha: f64,
    pub matches: Vec<SegmentMatch>,
    /// concatenated backscatter of the chosen templates
    pub prediction: Vec<f64>,
    pub material_map: Vec<MaterialType>,
    pub misfit_evaluations: usize,
}

impl ClassificationResult {
    pub fn geometries(&self) -> Vec<GeoParams> {
        self.matches.iter().map(|m| m.chosen.geometry).collect()
    }
}

/// Options beyond [`MatchConfig`] that do not change the result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifyOptions {
    /// keep the candidate ids of every level in each [`SegmentMatch`]
    pub keep_candidate_ids: bool,
}

/// Classifies a concatenated signal of `N` segments.
pub fn classify(
    signal: &BackscatterSignal,
    lib: &LibraryIndex,
    cfg: &MatchConfig,
) -> Result<ClassificationResult> {
    classify_values(&signal.values, signal.alpha, lib, cfg, ClassifyOptions::default())
}

pub fn classify_values(
    values: &[f64],
    alpha: f64,
    lib: &LibraryIndex,
    cfg: &MatchConfig,
    opts: ClassifyOptions,
) -> Result<ClassificationResult> {
    cfg.validate()?;
    let prepared = PreparedLibrary::new(lib, alpha, cfg.lmax)?;
    classify_prepared(values, &prepared, cfg, opts)
}

pub fn classify_prepared(
    values: &[f64],
    lib: &PreparedLibrary,
    cfg: &MatchConfig,
    opts: ClassifyOptions,
) -> Result<ClassificationResult> {
    let n = lib.segment_len;
    if values.is_empty() || values.len() % n != 0 {
        return Err(Error::LengthMismatch {
            expected: n * (values.len() / n).max(1),
            found: values.len(),
        });
    }
    let mut matches = Vec::with_capacity(values.len() / n);
    let mut prediction = Vec::with_capacity(values.len());
    let mut evaluations = 0;
    let mut prev: Option<GeoParams> = None;
    for (i, seg) in values.chunks_exact(n).enumerate() {
        let levels = LevelVectors::new(seg, cfg.lmax)?;
        let r = refine_candidates(&levels, lib, cfg)?;
        evaluations += r.evaluations;
        let cands: Vec<(u64, GeoParams, f64)> = r
            .candidates
            .iter()
            .zip(&r.scores)
            .map(|(&c, &s)| (lib.records[c].id, lib.records[c].params.geometry, s))
            .collect();
        let pick = select_with_penalty(&cands, prev.as_ref(), cfg.delta_penalty)
            .ok_or(Error::EmptyLibrary)?;
        let rec = lib.records[r.candidates[pick]];
        let penalty = match prev {
            Some(p) => cfg.delta_penalty * rec.params.geometry.distance(&p),
            None => 0.0,
        };
        let candidate_ids = if opts.keep_candidate_ids {
            r.trace
                .iter()
                .map(|(_, s)| s.iter().map(|&c| lib.records[c].id).collect())
                .collect()
        } else {
            Vec::new()
        };
        matches.push(SegmentMatch {
            segment_index: i,
            template_id: rec.id,
            chosen: rec.params,
            provenance: rec.provenance,
            l_star: r.l_star,
            final_misfit: cands[pick].2,
            penalty,
            candidate_counts: r.trace.iter().map(|(_, s)| s.len()).collect(),
            candidate_ids,
        });
        prediction.extend_from_slice(&rec.backscatter);
        prev = Some(rec.params.geometry);
    }
    let material_map = matches.iter().map(|m| m.chosen.material).collect();
    Ok(ClassificationResult {
        alpha: lib.records[0].alpha,
        matches,
        prediction,
        material_map,
        misfit_evaluations: evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{DomainSpec, ExperimentParams, MaterialType::*};

    fn record(id: u64, m: MaterialType, g: GeoParams, values: Vec<f64>) -> TemplateRecord {
        TemplateRecord {
            id,
            params: SeafloorParams::new(m, g),
            alpha: 0.5,
            backscatter: values,
            provenance: Provenance::PurePeriodic,
        }
    }

    fn wave(n: usize, a: f64, f: f64) -> Vec<f64> {
        (0..n).map(|i| a * (1.0 + (f * i as f64 / n as f64).sin())).collect()
    }

    fn library(n: usize) -> LibraryIndex {
        let d = DomainSpec {
            samples_per_segment: n,
            ..DomainSpec::default()
        };
        let g = |a| GeoParams::new(a, 1.0, 26.0);
        let recs = vec![
            record(0, Sand, g(10.0), wave(n, 0.05, 3.0)),
            record(1, Clay, g(11.0), wave(n, 0.01, 5.0)),
            record(2, Rock, g(12.0), wave(n, 0.08, 7.0)),
            record(3, Metal, g(13.0), wave(n, 0.2, 2.0)),
            record(4, Sand, g(14.0), wave(n, 0.05, 11.0)),
        ];
        LibraryIndex::from_records(recs, ExperimentParams::default(), d)
    }

    #[test]
    fn misfit_examples() {
        let s: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).cos()).collect();
        let a = dwt_multilevel(&s, 4).unwrap();
        for l in 1..=4 {
            assert_eq!(misfit(l, &a, &a).unwrap(), 0.0);
        }
        let mut b = a.clone();
        b.details[4 - 2][1] += 0.3;
        assert!((misfit(2, &a, &b).unwrap() - 0.09).abs() < 1e-15);
        assert!(misfit(0, &a, &b).is_err());
        assert!(misfit(5, &a, &b).is_err());
    }

    #[test]
    fn coarser_detail_reaches_finer_levels_through_approximation() {
        let s: Vec<f64> = (0..64).map(|i| ((i * i) % 7) as f64).collect();
        let a = dwt_multilevel(&s, 5).unwrap();
        let mut b = a.clone();
        // perturb v^4
        b.details[5 - 4][0] += 0.5;
        let brute = |l: usize| {
            let wa = a.approx_at(l).unwrap();
            let wb = b.approx_at(l).unwrap();
            sq_dist(&wa, &wb) + sq_dist(a.detail(l).unwrap(), b.detail(l).unwrap())
        };
        for l in 1..=5 {
            let m = misfit(l, &a, &b).unwrap();
            assert!((m - brute(l)).abs() < 1e-14);
            if l == 4 {
                assert!((m - 0.25).abs() < 1e-14);
            } else if l == 5 {
                assert_eq!(m, 0.0);
            } else {
                assert!((m - 0.25).abs() < 1e-12, "w^{l} carries the v^4 change");
            }
        }
    }

    #[test]
    fn self_match_survives_to_level_one() {
        let lib = library(64);
        let p = PreparedLibrary::new(&lib, 0.5, 5).unwrap();
        let seg = LevelVectors::new(&lib.records[2].backscatter, 5).unwrap();
        let r = refine_candidates(&seg, &p, &MatchConfig::default()).unwrap();
        assert_eq!(r.l_star, 1);
        assert_eq!(r.candidates, vec![2]);
        assert_eq!(r.scores, vec![0.0]);
    }

    #[test]
    fn infinite_tolerance_keeps_everything() {
        let lib = library(64);
        let p = PreparedLibrary::new(&lib, 0.5, 5).unwrap();
        let seg = LevelVectors::new(&wave(64, 0.3, 1.0), 5).unwrap();
        let cfg = MatchConfig {
            epsilon_tol: f64::INFINITY,
            ..MatchConfig::default()
        };
        let r = refine_candidates(&seg, &p, &cfg).unwrap();
        assert_eq!((r.l_star, r.candidates.len()), (1, 5));
        assert_eq!(r.evaluations, 25);
    }

    #[test]
    fn tiny_tolerance_falls_back_to_everything() {
        let lib = library(64);
        let p = PreparedLibrary::new(&lib, 0.5, 5).unwrap();
        let mut noisy = lib.records[0].backscatter.clone();
        noisy[3] += 1e-3;
        let seg = LevelVectors::new(&noisy, 5).unwrap();
        let cfg = MatchConfig {
            epsilon_tol: 1e-30,
            ..MatchConfig::default()
        };
        let r = refine_candidates(&seg, &p, &cfg).unwrap();
        assert_eq!(r.l_star, 6);
        assert_eq!(r.candidates, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.scores.len(), 5);
        // selection still picks the closest at lmax
        let res = classify_values(&noisy, 0.5, &lib, &cfg, ClassifyOptions::default()).unwrap();
        assert_eq!(res.matches[0].template_id, 0);
        assert_eq!(res.matches[0].l_star, 6);
    }

    #[test]
    fn penalty_selection() {
        let ga = GeoParams::new(10.0, 1.0, 26.0);
        let gb = GeoParams::new(12.0, 0.5, 28.0);
        let c = [(7, gb, 0.1), (9, ga, 0.1)];
        assert_eq!(select_with_penalty(&c, Some(&ga), 0.02), Some(1));
        assert_eq!(select_with_penalty(&c, None, 0.02), Some(0));
        assert_eq!(select_with_penalty(&c, Some(&ga), 0.0), Some(0));
        let c = [(7, gb, 0.3), (9, ga, 0.1)];
        assert_eq!(select_with_penalty(&c, Some(&gb), 0.0), Some(1));
        assert_eq!(select_with_penalty(&c[..1], Some(&ga), 100.0), Some(0));
        assert_eq!(select_with_penalty(&[], None, 0.0), None);
    }

    #[test]
    fn concatenated_templates_are_recovered() {
        let lib = library(64);
        let order = [3usize, 0, 0, 2, 4, 1, 3];
        let y: Vec<f64> = order
            .iter()
            .flat_map(|&i| lib.records[i].backscatter.clone())
            .collect();
        let opts = ClassifyOptions {
            keep_candidate_ids: true,
        };
        let res = classify_values(&y, 0.5, &lib, &MatchConfig::default(), opts).unwrap();
        assert_eq!(res.prediction, y);
        for (m, &i) in res.matches.iter().zip(&order) {
            assert_eq!(m.template_id, i as u64);
            assert_eq!(m.final_misfit, 0.0);
            assert_eq!(m.candidate_ids.len(), m.candidate_counts.len());
        }
        assert_eq!(res.material_map[0], Metal);
        assert_eq!(res.matches[0].penalty, 0.0);
        assert!(res.matches[1].penalty > 0.0);
    }

    #[test]
    fn rejects_bad_lengths() {
        let lib = library(64);
        let cfg = MatchConfig::default();
        assert!(classify_values(&[0.0; 65], 0.5, &lib, &cfg, ClassifyOptions::default()).is_err());
        assert!(classify_values(&[], 0.5, &lib, &cfg, ClassifyOptions::default()).is_err());
        let empty = LibraryIndex::from_records(vec![], lib.exp, lib.domain);
        assert!(matches!(
            classify_values(&[0.0; 64], 0.5, &empty, &cfg, ClassifyOptions::default()),
            Err(Error::EmptyLibrary)
        ));
    }
}
