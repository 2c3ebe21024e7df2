//! Plain and feature-masked kernels, the `Q(beta)` matrix, and the reduction
//! of an inhomogeneous polynomial kernel to a homogeneous one.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `(gamma <x, z> + c)^degree`
    Polynomial { gamma: f64, c: f64, degree: u32 },
    /// `exp(-gamma |x - z|^2)`
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn polynomial(gamma: f64, c: f64, degree: u32) -> Result<Self> {
        let spec = KernelSpec::Polynomial { gamma, c, degree };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let gamma = self.gamma();
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("kernel gamma must be positive, got {gamma}")));
        }
        if let KernelSpec::Polynomial { c, degree, .. } = *self {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::domain(format!("polynomial c must be nonnegative, got {c}")));
            }
            if degree < 1 {
                return Err(Error::domain("polynomial degree must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            KernelSpec::Polynomial { gamma, .. } | KernelSpec::Gaussian { gamma } => gamma,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, KernelSpec::Polynomial { .. })
    }

    /// Per-coordinate contribution to the accumulated sum the kernel is a
    /// function of: `a * b` (polynomial) or `(a - b)^2` (Gaussian).
    #[inline]
    pub(crate) fn term(&self, a: f64, b: f64) -> f64 {
        match self {
            KernelSpec::Polynomial { .. } => a * b,
            KernelSpec::Gaussian { .. } => {
                let d = a - b;
                d * d
            }
        }
    }

    /// Kernel value from the accumulated sum of [`KernelSpec::term`]s.
    #[inline]
    pub(crate) fn finish_sum(&self, s: f64) -> f64 {
        match *self {
            KernelSpec::Polynomial { gamma, c, degree } => {
                let base = gamma * s + c;
                match degree {
                    1 => base,
                    2 => base * base,
                    3 => base * base * base,
                    _ => base.powi(degree as i32),
                }
            }
            KernelSpec::Gaussian { gamma } => (-gamma * s).exp(),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Polynomial { gamma, c, degree } => {
                write!(f, "poly(d={degree},gamma={gamma},c={c})")
            }
            KernelSpec::Gaussian { gamma } => write!(f, "gaussian(gamma={gamma})"),
        }
    }
}

/// Binary feature selector. Equality and hashing depend only on which
/// features are selected. The total order compares the ascending lists of
/// selected indices lexicographically and is used for deterministic tie-breaks.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "MaskRepr", try_from = "MaskRepr")]
pub struct FeatureMask {
    bits: Vec<bool>,
    count: usize,
}

/// Serialized form: feature count plus the selected indices.
#[derive(Serialize, Deserialize)]
struct MaskRepr {
    n: usize,
    selected: Vec<usize>,
}

impl From<FeatureMask> for MaskRepr {
    fn from(m: FeatureMask) -> Self {
        MaskRepr {
            n: m.len(),
            selected: m.selected(),
        }
    }
}

impl TryFrom<MaskRepr> for FeatureMask {
    type Error = Error;

    fn try_from(r: MaskRepr) -> Result<Self> {
        FeatureMask::from_indices(r.n, &r.selected)
    }
}

impl FeatureMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let count = bits.iter().filter(|&&b| b).count();
        FeatureMask { bits, count }
    }

    pub fn from_indices(n: usize, selected: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &j in selected {
            if j >= n {
                return Err(Error::domain(format!("feature index {j} out of range for n={n}")));
            }
            bits[j] = true;
        }
        Ok(Self::from_bits(bits))
    }

    pub fn full(n: usize) -> Self {
        Self::from_bits(vec![true; n])
    }

    pub fn empty(n: usize) -> Self {
        Self::from_bits(vec![false; n])
    }

    /// Uniformly random mask with exactly `cardinality` ones.
    pub fn random<R: Rng + ?Sized>(n: usize, cardinality: usize, rng: &mut R) -> Result<Self> {
        if cardinality > n {
            return Err(Error::domain(format!("cannot select {cardinality} of {n} features")));
        }
        let mut bits = vec![false; n];
        for j in index::sample(rng, n, cardinality) {
            bits[j] = true;
        }
        Ok(Self::from_bits(bits))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn cardinality(&self) -> usize {
        self.count
    }

    pub fn is_selected(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect()
    }

    pub fn unselected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| (!b).then_some(j))
            .collect()
    }

    /// Copy with `remove` switched off and `add` switched on.
    pub fn swapped(&self, remove: &[usize], add: &[usize]) -> Self {
        let mut bits = self.bits.clone();
        for &j in remove {
            bits[j] = false;
        }
        for &j in add {
            bits[j] = true;
        }
        Self::from_bits(bits)
    }

    /// Number of 1 -> 0 flips needed to reach `other` (both masks having the
    /// same cardinality, this is also the number of 0 -> 1 flips).
    pub fn swap_distance(&self, other: &FeatureMask) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && !**b)
            .count()
    }

    /// FNV-1a over the sorted selected indices; stable across runs and platforms.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        for byte in (self.bits.len() as u64).to_le_bytes() {
            h = (h ^ byte as u64).wrapping_mul(PRIME);
        }
        for j in self.selected() {
            for byte in (j as u64).to_le_bytes() {
                h = (h ^ byte as u64).wrapping_mul(PRIME);
            }
        }
        h
    }

    /// Compact `0110...` rendering.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureMask({})", self.to_bit_string())
    }
}

impl PartialOrd for FeatureMask {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FeatureMask {
    fn cmp(&self, other: &Self) -> Ordering {
        self.selected()
            .cmp(&other.selected())
            .then(self.bits.len().cmp(&other.bits.len()))
    }
}

fn check_dims(x: &[f64], z: &[f64]) -> Result<()> {
    if x.len() != z.len() {
        return Err(Error::domain(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            z.len()
        )));
    }
    Ok(())
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    check_dims(x, z)?;
    let s = x.iter().zip(z).map(|(&a, &b)| spec.term(a, b)).sum();
    Ok(spec.finish_sum(s))
}

/// Kernel on the selected coordinates only. Unselected coordinates are skipped
/// rather than zeroed, so the result equals [`kernel_eval`] on the restricted
/// subvectors bit for bit.
pub fn masked_kernel_eval(spec: &KernelSpec, mask: &FeatureMask, x: &[f64], z: &[f64]) -> Result<f64> {
    check_dims(x, z)?;
    if mask.len() != x.len() {
        return Err(Error::domain(format!(
            "mask has {} entries, vectors have {}",
            mask.len(),
            x.len()
        )));
    }
    Ok(masked_with_indices(spec, &mask.selected(), x, z))
}

#[inline]
pub(crate) fn masked_with_indices(spec: &KernelSpec, selected: &[usize], x: &[f64], z: &[f64]) -> f64 {
    let s = selected.iter().map(|&j| spec.term(x[j], z[j])).sum();
    spec.finish_sum(s)
}

/// Dense `m x m` matrix with entries `y_i y_h k_beta(x_i, x_h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    entries: Vec<f64>,
    m: usize,
    mask_fingerprint: u64,
}

impl QMatrix {
    /// Wraps a row-major matrix; used for tests and callers with a precomputed Gram matrix.
    pub fn from_dense(m: usize, entries: Vec<f64>, mask_fingerprint: u64) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::domain(format!("expected {} entries, got {}", m * m, entries.len())));
        }
        Ok(QMatrix {
            entries,
            m,
            mask_fingerprint,
        })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, h: usize) -> f64 {
        self.entries[i * self.m + h]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn mask_fingerprint(&self) -> u64 {
        self.mask_fingerprint
    }

    pub fn trace(&self) -> f64 {
        (0..self.m).map(|i| self.get(i, i)).sum()
    }

    /// `x' Q x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.m)
            .filter(|&i| x[i] != 0.0)
            .map(|i| x[i] * self.row(i).iter().zip(x).map(|(q, v)| q * v).sum::<f64>())
            .sum()
    }
}

/// Builds `Q(beta)`. Rows are computed in parallel; every entry depends only on
/// its own pair of samples, so the result does not depend on the thread count.
pub fn build_q(d: &Dataset, spec: &KernelSpec, mask: &FeatureMask) -> Result<QMatrix> {
    if mask.len() != d.n_features() {
        return Err(Error::domain(format!(
            "mask has {} entries, dataset has {} features",
            mask.len(),
            d.n_features()
        )));
    }
    let m = d.n_samples();
    let selected = mask.selected();
    let y = d.labels();
    let mut entries = vec![0.0; m * m];
    entries.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let xi = d.row(i);
        for (h, q) in row.iter_mut().enumerate() {
            *q = y[i] * y[h] * masked_with_indices(spec, &selected, xi, d.row(h));
        }
    });
    Ok(QMatrix {
        entries,
        m,
        mask_fingerprint: mask.fingerprint(),
    })
}

/// Rewrites `(gamma <x_S, z_S> + c)^d` with `c > 0` as a homogeneous kernel
/// on data with an extra leading constant feature `sqrt(c / gamma)`. Feature
/// `j` of the input becomes feature `j + 1`; any subset `S` of the original
/// features corresponds to `S + 1` plus feature `0` in the result.
pub fn homogenize(d: &Dataset, spec: &KernelSpec) -> Result<(Dataset, KernelSpec)> {
    match *spec {
        KernelSpec::Polynomial { gamma, c, degree } if c > 0.0 => {
            let constant = (c / gamma).sqrt();
            let column = vec![constant; d.n_samples()];
            let out = d.prepend_column("bias", &column)?;
            Ok((
                out,
                KernelSpec::Polynomial {
                    gamma,
                    c: 0.0,
                    degree,
                },
            ))
        }
        KernelSpec::Polynomial { .. } => Err(Error::domain(
            "homogenization needs c > 0; the kernel is already homogeneous",
        )),
        KernelSpec::Gaussian { .. } => Err(Error::domain(
            "homogenization applies to polynomial kernels only",
        )),
    }
}
