//! Orthonormal multilevel Haar transform.
//!
//! A level-`lmax` decomposition of a length-`2^N` signal is stored as
//! `(w^lmax, v^lmax, v^(lmax-1), ..., v^1)`, where stage `l` vectors have
//! length `2^(N-l)`. The transform is orthonormal, so the concatenated
//! coefficients carry the same L2 norm as the signal.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoeffs {
    /// approximation coefficients `w^lmax`
    pub approx: Vec<f64>,
    /// detail coefficients ordered `v^lmax, ..., v^1`
    pub details: Vec<Vec<f64>>,
    pub lmax: usize,
}

fn analysis_step(s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let half = s.len() / 2;
    let mut a = Vec::with_capacity(half);
    let mut d = Vec::with_capacity(half);
    for pair in s.chunks_exact(2) {
        a.push((pair[0] + pair[1]) * FRAC_1_SQRT_2);
        d.push((pair[0] - pair[1]) * FRAC_1_SQRT_2);
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(2 * a.len());
    for (&x, &y) in a.iter().zip(d) {
        s.push((x + y) * FRAC_1_SQRT_2);
        s.push((x - y) * FRAC_1_SQRT_2);
    }
    s
}

/// Forward transform with `lmax` stages.
pub fn dwt_multilevel(signal: &[f64], lmax: usize) -> Result<WaveletCoeffs> {
    let n = signal.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { len: n });
    }
    let stages = n.trailing_zeros() as usize;
    if lmax == 0 || lmax > stages {
        return Err(Error::InvalidParameter(format!(
            "lmax = {lmax} must satisfy 1 <= lmax <= {stages}"
        )));
    }
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(lmax);
    for _ in 0..lmax {
        let (a, d) = analysis_step(&approx);
        details.push(d);
        approx = a;
    }
    details.reverse();
    Ok(WaveletCoeffs {
        approx,
        details,
        lmax,
    })
}

/// Inverse of [`dwt_multilevel`].
pub fn idwt_multilevel(c: &WaveletCoeffs) -> Result<Vec<f64>> {
    c.check()?;
    let mut approx = c.approx.clone();
    for d in &c.details {
        approx = synthesis_step(&approx, d);
    }
    Ok(approx)
}

impl WaveletCoeffs {
    fn check(&self) -> Result<()> {
        if self.details.len() != self.lmax {
            return Err(Error::LengthMismatch {
                expected: self.lmax,
                found: self.details.len(),
            });
        }
        let mut expected = self.approx.len();
        for d in &self.details {
            if d.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    found: d.len(),
                });
            }
            expected *= 2;
        }
        Ok(())
    }

    /// Length of the original signal.
    pub fn signal_len(&self) -> usize {
        self.approx.len() << self.lmax
    }

    /// Detail vector `v^l`.
    pub fn detail(&self, level: usize) -> Result<&[f64]> {
        self.level_check(level)?;
        Ok(&self.details[self.lmax - level])
    }

    /// Approximation vector `w^l`, rebuilt from `w^lmax` and the details of
    /// the coarser stages `v^lmax, ..., v^(l+1)`.
    pub fn approx_at(&self, level: usize) -> Result<Vec<f64>> {
        self.level_check(level)?;
        let mut a = self.approx.clone();
        for d in &self.details[..self.lmax - level] {
            a = synthesis_step(&a, d);
        }
        Ok(a)
    }

    /// Every `(w^l, v^l)` pair for `l = 1..=lmax`, indexed by `l - 1`.
    pub fn level_pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.lmax);
        let mut a = self.approx.clone();
        for (i, d) in self.details.iter().enumerate() {
            out.push((a.clone(), d.clone()));
            if i + 1 < self.details.len() {
                a = synthesis_step(&a, d);
            }
        }
        out.reverse();
        out
    }

    /// `(w^lmax, v^lmax, ..., v^1)` as one vector.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut out = self.approx.clone();
        for d in &self.details {
            out.extend_from_slice(d);
        }
        out
    }

    fn level_check(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.lmax {
            return Err(Error::LevelOutOfRange {
                level,
                lmax: self.lmax,
            });
        }
        Ok(())
    }
}
