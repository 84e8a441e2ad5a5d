//! Hopping kernels `a = (a(m))` of the translation-invariant off-diagonal part
//! `(T_a u)(n) = sum_m a(n - m) u(m)` and their weighted norms
//! `||a||_r = sum_m |a(m)| |m|^r`.
//!
//! Every kernel satisfies `a(0) = 0` and `a(m) = conj(a(-m))`, which is what makes
//! the assembled operator Hermitian.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which family a kernel was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    NearestNeighbor,
    PowerLaw { exponent: f64 },
    FiniteSupport,
    Custom,
}

/// Extent of the nonzero coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    /// All nonzero coefficients satisfy `|m| <= radius`.
    Finite { radius: u64 },
    /// Generated by a rule for every `m != 0`; `cutoff` is the numerical
    /// truncation radius used when the kernel is materialized.
    Infinite { cutoff: u64 },
}

/// Parameters accepted by [`build_kernel`].
#[derive(Clone, Debug, PartialEq)]
pub enum KernelParams {
    NearestNeighbor,
    /// `a(m) = |m|^(-exponent)`; `cutoff` defaults to 1 and is raised to
    /// `2N + 1` when an operator is assembled.
    PowerLaw { exponent: f64, cutoff: Option<u64> },
    /// `a(1), a(2), ...`; the negative half is filled in by conjugation.
    FiniteSupport { positive: Vec<Complex64> },
    /// Explicit `(m, a(m))` entries. If only one sign of offset is present the
    /// other half is filled in; if both are present they must be conjugate.
    Custom { entries: Vec<(i64, Complex64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingKernel {
    family: KernelFamily,
    support: Support,
    /// Nonzero entries for finite kernels (both signs of offset). Empty for
    /// power-law kernels, whose coefficients come from the generator rule.
    coefficients: BTreeMap<i64, Complex64>,
}

/// Partial weighted norm together with a bound on what the partial sum left out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelNorm {
    /// `sum_{0 < |m| <= cutoff} |a(m)| |m|^r`
    pub partial: f64,
    /// Upper bound on `sum_{|m| > cutoff} |a(m)| |m|^r`. Exact for finite kernels,
    /// `2 * int_cutoff^inf x^(r - p) dx` for power laws, `inf` when divergent.
    pub tail_bound: f64,
}

impl KernelNorm {
    pub fn is_finite(&self) -> bool {
        self.tail_bound.is_finite()
    }

    pub fn upper_bound(&self) -> f64 {
        self.partial + self.tail_bound
    }
}

pub fn build_kernel(params: KernelParams) -> Result<HoppingKernel> {
    match params {
        KernelParams::NearestNeighbor => {
            let coefficients = BTreeMap::from([
                (-1, Complex64::new(1.0, 0.0)),
                (1, Complex64::new(1.0, 0.0)),
            ]);
            Ok(HoppingKernel {
                family: KernelFamily::NearestNeighbor,
                support: Support::Finite { radius: 1 },
                coefficients,
            })
        }
        KernelParams::PowerLaw { exponent, cutoff } => {
            if exponent.is_nan() || exponent <= 1.0 || !exponent.is_finite() {
                return Err(Error::InvalidExponent(exponent));
            }
            Ok(HoppingKernel {
                family: KernelFamily::PowerLaw { exponent },
                support: Support::Infinite {
                    cutoff: cutoff.unwrap_or(1).max(1),
                },
                coefficients: BTreeMap::new(),
            })
        }
        KernelParams::FiniteSupport { positive } => {
            let entries = positive
                .into_iter()
                .enumerate()
                .map(|(i, a)| (i as i64 + 1, a))
                .collect();
            finite_kernel(KernelFamily::FiniteSupport, entries)
        }
        KernelParams::Custom { entries } => finite_kernel(KernelFamily::Custom, entries),
    }
}

fn finite_kernel(family: KernelFamily, entries: Vec<(i64, Complex64)>) -> Result<HoppingKernel> {
    let mut given: BTreeMap<i64, Complex64> = BTreeMap::new();
    for (m, a) in entries {
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::InvalidKernel(format!("non-finite coefficient at offset {m}")));
        }
        if m == 0 {
            if a != Complex64::new(0.0, 0.0) {
                return Err(Error::NonzeroOrigin(a));
            }
            continue;
        }
        if given.insert(m, a).is_some() {
            return Err(Error::InvalidKernel(format!("offset {m} given twice")));
        }
    }

    let has_pos = given.keys().any(|&m| m > 0);
    let has_neg = given.keys().any(|&m| m < 0);
    let mut coefficients = BTreeMap::new();
    if has_pos && has_neg {
        for (&m, &a) in &given {
            let mirror = given.get(&-m).copied().unwrap_or_default();
            if mirror != a.conj() {
                return Err(Error::ConjugateSymmetry { offset: m.abs() });
            }
            if a != Complex64::default() {
                coefficients.insert(m, a);
            }
        }
    } else {
        for (&m, &a) in &given {
            if a != Complex64::default() {
                coefficients.insert(m, a);
                coefficients.insert(-m, a.conj());
            }
        }
    }
    let radius = coefficients.keys().map(|m| m.unsigned_abs()).max().unwrap_or(0);
    Ok(HoppingKernel {
        family,
        support: Support::Finite { radius },
        coefficients,
    })
}

impl HoppingKernel {
    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn support(&self) -> Support {
        self.support
    }

    /// Largest offset that can carry a nonzero coefficient once materialized.
    pub fn truncation_radius(&self) -> u64 {
        match self.support {
            Support::Finite { radius } => radius,
            Support::Infinite { cutoff } => cutoff,
        }
    }

    /// A copy whose numerical cutoff is `cutoff` (no effect on finite kernels).
    pub fn with_cutoff(&self, cutoff: u64) -> HoppingKernel {
        let mut out = self.clone();
        if let Support::Infinite { .. } = out.support {
            out.support = Support::Infinite { cutoff: cutoff.max(1) };
        }
        out
    }

    /// `a(m)` from the defining sequence (power-law kernels ignore the cutoff here).
    pub fn coefficient(&self, m: i64) -> Complex64 {
        if m == 0 {
            return Complex64::default();
        }
        match self.family {
            KernelFamily::PowerLaw { exponent } => {
                Complex64::new((m.unsigned_abs() as f64).powf(-exponent), 0.0)
            }
            _ => self.coefficients.get(&m).copied().unwrap_or_default(),
        }
    }

    /// `|a(m)|` for `m > 0`.
    fn magnitude(&self, m: u64) -> f64 {
        self.coefficient(m as i64).norm()
    }

    /// Whether every coefficient is real.
    pub fn is_real(&self) -> bool {
        self.coefficients.values().all(|a| a.im == 0.0)
    }

    /// Whether the kernel vanishes identically.
    pub fn is_zero(&self) -> bool {
        matches!(self.support, Support::Finite { radius: 0 })
    }

    /// Explicitly stored nonzero entries (empty for power laws).
    pub fn stored_coefficients(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coefficients.iter().map(|(&m, &a)| (m, a))
    }

    /// `max_m |a(m)|`.
    pub fn max_abs(&self) -> f64 {
        match self.family {
            KernelFamily::PowerLaw { .. } => 1.0,
            _ => self.coefficients.values().map(|a| a.norm()).fold(0.0, f64::max),
        }
    }

    /// `sum_{0<|m|<=cutoff} |a(m)| |m|^r` plus a bound on the rest.
    ///
    /// `r` may be any nonnegative real.
    pub fn norm_r(&self, r: f64, cutoff: u64) -> KernelNorm {
        assert!(r >= 0.0 && r.is_finite(), "norm exponent must be finite and nonnegative");
        let weight = |m: u64| self.magnitude(m) * (m as f64).powf(r);
        match self.support {
            Support::Finite { radius } => {
                // Both signs share |a(m)| by conjugate symmetry.
                let partial = 2.0 * (1..=cutoff.min(radius)).rev().map(weight).sum::<f64>();
                let tail = if cutoff >= radius {
                    0.0
                } else {
                    2.0 * (cutoff + 1..=radius).rev().map(weight).sum::<f64>()
                };
                KernelNorm { partial, tail_bound: tail }
            }
            Support::Infinite { .. } => {
                let KernelFamily::PowerLaw { exponent: p } = self.family else {
                    unreachable!("only power laws have infinite support")
                };
                // Summed smallest-first.
                let partial = 2.0 * (1..=cutoff).rev().map(weight).sum::<f64>();
                let decay = p - r - 1.0;
                let tail_bound = if decay <= 0.0 {
                    f64::INFINITY
                } else if cutoff == 0 {
                    2.0 * (1.0 + 1.0 / decay)
                } else {
                    2.0 * (cutoff as f64).powf(-decay) / decay
                };
                KernelNorm { partial, tail_bound }
            }
        }
    }

    /// Whether `||a||_r < inf`.
    pub fn has_finite_norm(&self, r: f64) -> bool {
        match self.family {
            KernelFamily::PowerLaw { exponent } => r < exponent - 1.0,
            _ => true,
        }
    }

    pub fn describe(&self) -> String {
        match &self.family {
            KernelFamily::NearestNeighbor => "nearest-neighbor".into(),
            KernelFamily::PowerLaw { exponent } => format!("power-law(p={exponent})"),
            KernelFamily::FiniteSupport => format!("finite-support(radius={})", self.truncation_radius()),
            KernelFamily::Custom => format!("custom(radius={})", self.truncation_radius()),
        }
    }
}
