//! Permutations, inversions, the two-body scattering factor and the
//! inversion-product amplitudes of the Bethe-Ansatz sum.
//!
//! Particle labels and permutation values are 1-based throughout, matching
//! one-line notation: `Permutation::new(vec![2, 3, 1])` maps slot 1 to 2,
//! slot 2 to 3 and slot 3 to 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element of the symmetric group in one-line notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    entries: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(entries: Vec<usize>) -> Result<Self> {
        Permutation::new(entries)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.entries
    }
}

impl Permutation {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::InvalidPermutation(entries));
        }
        let mut seen = vec![false; n];
        for &v in &entries {
            if v == 0 || v > n || seen[v - 1] {
                return Err(Error::InvalidPermutation(entries));
            }
            seen[v - 1] = true;
        }
        Ok(Permutation { entries })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "permutation of an empty set");
        Permutation {
            entries: (1..=n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// Value at 1-based slot `i`.
    pub fn at(&self, i: usize) -> usize {
        self.entries[i - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.entries.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// Inverse permutation: `inverse().at(v) == i` iff `at(i) == v`.
    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.entries.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        Permutation { entries: inv }
    }

    /// One-line notation read backwards, i.e. composition with the full reversal.
    pub fn reversed(&self) -> Permutation {
        let mut entries = self.entries.clone();
        entries.reverse();
        Permutation { entries }
    }

    /// Value pairs `(sigma(i), sigma(j))` with `i < j` and `sigma(i) > sigma(j)`,
    /// enumerated by slot `i`, then slot `j`.
    pub fn inversions(&self) -> Vec<(usize, usize)> {
        let e = &self.entries;
        let mut out = Vec::new();
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                if e[i] > e[j] {
                    out.push((e[i], e[j]));
                }
            }
        }
        out
    }

    pub fn inversion_count(&self) -> usize {
        let e = &self.entries;
        (0..e.len())
            .map(|i| e[i + 1..].iter().filter(|&&v| v < e[i]).count())
            .sum()
    }

    /// `(-1)^inv`.
    pub fn sign(&self) -> f64 {
        if self.inversion_count() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `T_i sigma`: entries at slots `i` and `i + 1` interchanged (1-based `i`).
    pub fn adjacent_transpose(&self, i: usize) -> Result<Permutation> {
        let n = self.len();
        if i == 0 || i >= n {
            return Err(Error::SlotOutOfRange {
                index: i,
                max: n.saturating_sub(1),
            });
        }
        let mut entries = self.entries.clone();
        entries.swap(i - 1, i);
        Ok(Permutation { entries })
    }

    /// Next permutation in lexicographic order, or `None` after the last one.
    pub fn next_lexicographic(&self) -> Option<Permutation> {
        let mut e = self.entries.clone();
        let n = e.len();
        if n < 2 {
            return None;
        }
        let mut i = n - 1;
        while i > 0 && e[i - 1] >= e[i] {
            i -= 1;
        }
        if i == 0 {
            return None;
        }
        let mut j = n - 1;
        while e[j] <= e[i - 1] {
            j -= 1;
        }
        e.swap(i - 1, j);
        e[i..].reverse();
        Some(Permutation { entries: e })
    }
}

/// All of `S_n` in lexicographic one-line order, starting at the identity.
pub fn permutations(n: usize) -> impl Iterator<Item = Permutation> {
    std::iter::successors(Some(Permutation::identity(n)), |p| p.next_lexicographic())
}

/// Default guard radius around the pole, relative to `c`.
pub const DEFAULT_POLE_GUARD: f64 = 1e-8;

/// Repulsive coupling `c > 0` and the scattering factor built from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringContext {
    c: f64,
    pole_guard: f64,
}

impl ScatteringContext {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidCoupling(c));
        }
        Ok(ScatteringContext {
            c,
            pole_guard: DEFAULT_POLE_GUARD * c,
        })
    }

    /// Absolute guard radius around `k = ic`.
    pub fn with_pole_guard(mut self, radius: f64) -> Self {
        self.pole_guard = radius.abs();
        self
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn pole_guard(&self) -> f64 {
        self.pole_guard
    }

    /// `S(k) = -(c - ik)/(c + ik)`.
    pub fn s_factor(&self, k: Complex64) -> Result<Complex64> {
        let pole = Complex64::new(0.0, self.c);
        if (k - pole).norm() < self.pole_guard {
            return Err(Error::PoleProximity {
                re: k.re,
                im: k.im,
                guard: self.pole_guard,
            });
        }
        let ik = Complex64::i() * k;
        Ok(-(self.c - ik) / (self.c + ik))
    }

    /// `S(k)` for real `k`; the pole is off the real axis so this cannot fail.
    #[inline]
    pub fn s_real(&self, k: f64) -> Complex64 {
        // -(c - ik)/(c + ik) = -(c - ik)^2 / (c^2 + k^2)
        let d = self.c * self.c + k * k;
        Complex64::new((k * k - self.c * self.c) / d, 2.0 * self.c * k / d)
    }

    /// `S_{ab} = S(k_a - k_b)`.
    pub fn pair_factor(&self, ka: Complex64, kb: Complex64) -> Result<Complex64> {
        self.s_factor(ka - kb)
    }

    /// `A_sigma`: product of `S_{ab}` over the inversions `(a, b)` of `sigma`,
    /// with `k[a - 1]` the momentum carried by label `a`.
    pub fn amplitude(&self, sigma: &Permutation, k: &[Complex64]) -> Result<Complex64> {
        if k.len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                expected: sigma.len(),
                got: k.len(),
            });
        }
        sigma
            .inversions()
            .into_iter()
            .try_fold(Complex64::new(1.0, 0.0), |acc, (a, b)| {
                Ok(acc * self.pair_factor(k[a - 1], k[b - 1])?)
            })
    }

    /// Real-momentum amplitude, same product order as [`Self::amplitude`].
    pub fn amplitude_real(&self, sigma: &Permutation, k: &[f64]) -> Complex64 {
        debug_assert_eq!(k.len(), sigma.len());
        sigma
            .inversions()
            .into_iter()
            .fold(Complex64::new(1.0, 0.0), |acc, (a, b)| {
                acc * self.s_real(k[a - 1] - k[b - 1])
            })
    }

    /// `|A_{T_i sigma} - S_{sigma(i+1) sigma(i)} A_sigma|` for real momenta.
    pub fn recursion_residual(&self, sigma: &Permutation, i: usize, k: &[f64]) -> Result<f64> {
        let swapped = sigma.adjacent_transpose(i)?;
        if k.len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                expected: sigma.len(),
                got: k.len(),
            });
        }
        let kc: Vec<Complex64> = k.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let lhs = self.amplitude(&swapped, &kc)?;
        let (a, b) = (sigma.at(i + 1), sigma.at(i));
        let rhs = self.pair_factor(kc[a - 1], kc[b - 1])? * self.amplitude(sigma, &kc)?;
        Ok((lhs - rhs).norm())
    }
}
