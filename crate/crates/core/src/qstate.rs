//! Dense complex state vectors.
//!
//! Just enough linear algebra to carry the protocol states around: inner
//! products, Born-rule sampling in the computational basis and a projective
//! "discriminating" measurement against a set of orthonormal vectors with a
//! catch-all `Other` outcome for the orthogonal complement.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{QpqError, Result};

/// Tolerance on `Σ|amp|² = 1`.
pub const EPS_NORM: f64 = 1e-9;
/// Tolerance on pairwise inner products of a measurement basis.
pub const EPS_ORTH: f64 = 1e-9;

/// A pure state as a dense amplitude vector over the labels `0..dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

/// Which projector fired in a measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Outcome {
    /// Index into the measured basis.
    Index(usize),
    /// The orthogonal complement of the supplied basis.
    Other,
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub outcome: Outcome,
    /// Normalized post-measurement state.
    pub collapsed: StateVector,
    /// Born probability of `outcome`.
    pub probability: f64,
}

/// Exact outcome probabilities of a discriminating measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminationProbabilities {
    pub per_vector: Vec<f64>,
    pub other: f64,
}

impl StateVector {
    /// Wraps raw amplitudes without normalizing them.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QpqError::EmptyState);
        }
        Ok(Self { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 {
            return Err(QpqError::EmptyState);
        }
        if index >= dim {
            return Err(QpqError::IndexOutOfRange { index, dim });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// `Σ_i |i⟩ / √dim`.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(QpqError::EmptyState);
        }
        let a = 1.0 / (dim as f64).sqrt();
        Ok(Self {
            amps: vec![Complex64::new(a, 0.0); dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= EPS_NORM
    }

    /// Rescales to unit norm. Fails on the zero vector.
    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QpqError::ZeroNorm);
        }
        let inv = 1.0 / norm;
        for a in &mut self.amps {
            *a *= inv;
        }
        Ok(self)
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(QpqError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Born probabilities in the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn require_normalized(&self) -> Result<()> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > EPS_NORM {
            return Err(QpqError::NotNormalized { norm_sqr });
        }
        Ok(())
    }
}

/// `⟨a|b⟩`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.inner(b)
}

/// Picks an index from a discrete distribution given by `weights`, which must
/// sum to one up to rounding. Rounding slack at the top end falls back to the
/// last index with nonzero weight.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_nonzero = i;
            if u < acc {
                return i;
            }
        }
    }
    last_nonzero
}

/// Projective measurement onto `{|i⟩}`.
pub fn measure_computational<R: Rng + ?Sized>(
    s: &StateVector,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    s.require_normalized()?;
    let probs = s.probabilities();
    let index = sample_index(&probs, rng);
    Ok(MeasurementOutcome {
        outcome: Outcome::Index(index),
        collapsed: StateVector::basis(s.dim(), index)?,
        probability: probs[index],
    })
}

fn check_basis(s: &StateVector, basis: &[StateVector]) -> Result<()> {
    for (k, b) in basis.iter().enumerate() {
        if b.dim() != s.dim() {
            return Err(QpqError::DimensionMismatch {
                expected: s.dim(),
                found: b.dim(),
            });
        }
        for (l, c) in basis.iter().enumerate().skip(k) {
            let ip = b.inner(c)?;
            let target = if k == l { 1.0 } else { 0.0 };
            if (ip - Complex64::new(target, 0.0)).norm() > EPS_ORTH {
                return Err(QpqError::NotOrthonormal {
                    first: k,
                    second: l,
                });
            }
        }
    }
    Ok(())
}

/// Exact outcome probabilities of measuring `s` against `basis` plus the
/// complement projector.
pub fn probabilities(
    s: &StateVector,
    basis: &[StateVector],
) -> Result<DiscriminationProbabilities> {
    s.require_normalized()?;
    check_basis(s, basis)?;
    let per_vector: Vec<f64> = basis
        .iter()
        .map(|b| b.inner(s).map(|c| c.norm_sqr()))
        .collect::<Result<_>>()?;
    let captured: f64 = per_vector.iter().sum();
    Ok(DiscriminationProbabilities {
        per_vector,
        other: (1.0 - captured).clamp(0.0, 1.0),
    })
}

/// Samples a discriminating measurement of `s` against `basis`.
///
/// `Other` collapses to the normalized projection of `s` onto the complement
/// of `span(basis)`.
pub fn discriminate<R: Rng + ?Sized>(
    s: &StateVector,
    basis: &[StateVector],
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    let probs = probabilities(s, basis)?;
    let mut weights = probs.per_vector.clone();
    weights.push(probs.other);
    let pick = sample_index(&weights, rng);
    if pick < basis.len() {
        return Ok(MeasurementOutcome {
            outcome: Outcome::Index(pick),
            collapsed: basis[pick].clone(),
            probability: probs.per_vector[pick],
        });
    }
    let mut rest = s.amps.clone();
    for b in basis {
        let c = b.inner(s)?;
        for (r, bv) in rest.iter_mut().zip(&b.amps) {
            *r -= c * bv;
        }
    }
    Ok(MeasurementOutcome {
        outcome: Outcome::Other,
        collapsed: StateVector::from_amplitudes(rest)?.normalized()?,
        probability: probs.other,
    })
}
