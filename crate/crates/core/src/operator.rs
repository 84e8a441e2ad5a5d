//! Truncated matrices of `H = T_a + V + b` on the box `{-N, ..., N}`.
//!
//! Couplings leaving the box are dropped (hard truncation). Row `i` holds site
//! `i - N`.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::HoppingKernel;

pub const DEFAULT_MAX_DIMENSION: usize = 8001;

/// Sites closer than this to a pole of the Maryland potential are rejected.
pub const MARYLAND_RESONANCE_GUARD: f64 = 1e-6;

/// The unbounded part of the on-site potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OnSiteField {
    /// `V(n) = slope * n`
    Linear { slope: f64 },
    /// `V(n) = coupling * tan(pi * (phase + n * frequency))`
    Maryland { coupling: f64, frequency: f64, phase: f64 },
}

/// The bounded perturbation `b(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    None,
    Constant { value: f64 },
    /// i.i.d. uniform on `[-amplitude, amplitude]`, keyed on `(seed, site)`.
    UniformRandom { amplitude: f64, seed: u64 },
    /// `b(n) = values[n mod len]`
    Periodic { values: Vec<f64> },
    /// `b(first_site + i) = values[i]`, zero elsewhere.
    Explicit { first_site: i64, values: Vec<f64> },
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Perturbation::None => Ok(()),
            Perturbation::Constant { value } if value.is_finite() => Ok(()),
            Perturbation::UniformRandom { amplitude, .. } if amplitude.is_finite() && *amplitude >= 0.0 => Ok(()),
            Perturbation::Periodic { values } if !values.is_empty() && finite(values) => Ok(()),
            Perturbation::Explicit { values, .. } if finite(values) => Ok(()),
            other => Err(Error::InvalidPotential(format!("invalid perturbation {other:?}"))),
        }
    }

    /// `b(site)`
    pub fn value(&self, site: i64) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Constant { value } => *value,
            Perturbation::UniformRandom { amplitude, seed } => {
                if *amplitude == 0.0 {
                    return 0.0;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                // zigzag so that negative sites get their own streams
                rng.set_stream(((site << 1) ^ (site >> 63)) as u64);
                rng.random_range(-*amplitude..=*amplitude)
            }
            Perturbation::Periodic { values } => values[site.rem_euclid(values.len() as i64) as usize],
            Perturbation::Explicit { first_site, values } => {
                let idx = site - first_site;
                if idx >= 0 && (idx as usize) < values.len() {
                    values[idx as usize]
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub field: OnSiteField,
    pub perturbation: Perturbation,
}

impl PotentialSpec {
    /// `V(n) = n`, no perturbation.
    pub fn stark() -> Self {
        PotentialSpec {
            field: OnSiteField::Linear { slope: 1.0 },
            perturbation: Perturbation::None,
        }
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn is_linear_field(&self) -> bool {
        matches!(self.field, OnSiteField::Linear { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self.field {
            OnSiteField::Linear { slope } if !slope.is_finite() => {
                return Err(Error::InvalidPotential("field slope must be finite".into()));
            }
            OnSiteField::Maryland { coupling, frequency, phase }
                if !(coupling.is_finite() && frequency.is_finite() && phase.is_finite()) =>
            {
                return Err(Error::InvalidPotential("Maryland parameters must be finite".into()));
            }
            _ => {}
        }
        self.perturbation.validate()
    }

    /// `V(site)`; fails only for resonant Maryland sites.
    pub fn field_value(&self, site: i64) -> Result<f64> {
        match self.field {
            OnSiteField::Linear { slope } => Ok(slope * site as f64),
            OnSiteField::Maryland { coupling, frequency, phase } => {
                let x = phase + site as f64 * frequency;
                let distance = (x - x.floor() - 0.5).abs();
                if distance <= MARYLAND_RESONANCE_GUARD {
                    return Err(Error::MarylandResonance { site, distance });
                }
                Ok(coupling * (std::f64::consts::PI * x).tan())
            }
        }
    }
}

/// Dense Hermitian restriction of `H` to `{-N, ..., N}`.
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    half_width: usize,
    kernel: HoppingKernel,
    potential: PotentialSpec,
    /// Row-major, `dimension()^2` entries.
    matrix: Vec<Complex64>,
    perturbation: Vec<f64>,
    perturbation_sup: f64,
    real: bool,
}

pub fn build_operator(kernel: &HoppingKernel, potential: &PotentialSpec, half_width: usize) -> Result<TruncatedOperator> {
    build_operator_with_limit(kernel, potential, half_width, DEFAULT_MAX_DIMENSION)
}

pub fn build_operator_with_limit(
    kernel: &HoppingKernel,
    potential: &PotentialSpec,
    half_width: usize,
    max_dimension: usize,
) -> Result<TruncatedOperator> {
    if half_width == 0 {
        return Err(Error::InvalidArgument("half-width N must be at least 1".into()));
    }
    let dim = half_width
        .checked_mul(2)
        .and_then(|d| d.checked_add(1))
        .ok_or(Error::DimensionOverflow { dimension: usize::MAX, max: max_dimension })?;
    if dim > max_dimension {
        return Err(Error::DimensionOverflow { dimension: dim, max: max_dimension });
    }
    potential.validate()?;

    // Offsets beyond 2N never connect two sites of the box.
    let kernel = kernel.with_cutoff(2 * half_width as u64 + 1);
    let n = half_width as i64;

    let mut perturbation = Vec::with_capacity(dim);
    let mut diagonal = Vec::with_capacity(dim);
    for site in -n..=n {
        let b = potential.perturbation.value(site);
        diagonal.push(potential.field_value(site)? + b);
        perturbation.push(b);
    }
    let perturbation_sup = perturbation.iter().fold(0.0_f64, |acc, b| acc.max(b.abs()));

    // a(d) for d = 1..dim-1; the upper triangle is the conjugate mirror.
    let toeplitz: Vec<Complex64> = (0..dim as i64).map(|d| kernel.coefficient(d)).collect();
    let mut matrix = vec![Complex64::default(); dim * dim];
    for i in 0..dim {
        matrix[i * dim + i] = Complex64::new(diagonal[i], 0.0);
        for j in 0..i {
            let a = toeplitz[i - j];
            matrix[i * dim + j] = a;
            matrix[j * dim + i] = a.conj();
        }
    }
    let real = matrix.iter().all(|z| z.im == 0.0);

    Ok(TruncatedOperator {
        half_width,
        kernel,
        potential: potential.clone(),
        matrix,
        perturbation,
        perturbation_sup,
        real,
    })
}

impl TruncatedOperator {
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn dimension(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn site_of_row(&self, row: usize) -> i64 {
        row as i64 - self.half_width as i64
    }

    pub fn row_of_site(&self, site: i64) -> Option<usize> {
        let row = site + self.half_width as i64;
        (row >= 0 && (row as usize) < self.dimension()).then_some(row as usize)
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let n = self.half_width as i64;
        -n..=n
    }

    /// Kernel as materialized for this box (cutoff `2N + 1`).
    pub fn kernel(&self) -> &HoppingKernel {
        &self.kernel
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dimension() + col]
    }

    /// Row-major entries.
    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    /// `b(site(row))` for every row.
    pub fn perturbation(&self) -> &[f64] {
        &self.perturbation
    }

    /// `sup |b(n)|` over the box.
    pub fn perturbation_sup(&self) -> f64 {
        self.perturbation_sup
    }

    /// Whether every matrix entry is real.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Schur-test bound on the bounded part: `||T_a + b|| <= ||a||_0 + ||b||_inf`,
    /// with `||a||_0` summed over the offsets present in the box.
    pub fn bounded_part_norm_bound(&self) -> f64 {
        self.kernel.norm_r(0.0, 2 * self.half_width as u64).partial + self.perturbation_sup
    }

    /// Largest `|H_ij - conj(H_ji)|`; zero by construction.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dimension();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..=i {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn describe(&self) -> String {
        let field = match self.potential.field {
            OnSiteField::Linear { slope } => format!("linear(slope={slope})"),
            OnSiteField::Maryland { coupling, frequency, phase } => {
                format!("maryland(coupling={coupling}, frequency={frequency}, phase={phase})")
            }
        };
        format!("{} + {} + b[sup={}], N={}", self.kernel.describe(), field, self.perturbation_sup, self.half_width)
    }

    /// Writes the matrix as row-major `(re, im)` pairs of little-endian `f64`.
    pub fn write_matrix_dump(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for z in &self.matrix {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelParams};

    #[test]
    fn zero_kernel_is_multiplication_operator() {
        let k = build_kernel(KernelParams::Custom { entries: vec![] }).unwrap();
        let op = build_operator(&k, &PotentialSpec::stark(), 2).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { i as f64 - 2.0 } else { 0.0 };
                assert_eq!(op.entry(i, j), Complex64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn free_stark_operator_n1() {
        let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
        let op = build_operator(&k, &PotentialSpec::stark(), 1).unwrap();
        let expected = [[-1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(op.entry(i, j), Complex64::new(v, 0.0));
            }
        }
        assert!(op.is_real());
    }

    #[test]
    fn random_perturbation_bounded_and_reproducible() {
        let p = Perturbation::UniformRandom { amplitude: 5.0, seed: 7 };
        let values: Vec<f64> = (-300..=300).map(|s| p.value(s)).collect();
        assert!(values.iter().all(|b| b.abs() <= 5.0));
        assert_eq!(values, (-300..=300).map(|s| p.value(s)).collect::<Vec<_>>());
        assert_ne!(p.value(3), p.value(-3));
        let other = Perturbation::UniformRandom { amplitude: 5.0, seed: 8 };
        assert_ne!(p.value(0), other.value(0));
        // crude uniformity check
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!(mean.abs() < 0.5, "mean {mean}");
    }

    #[test]
    fn sup_is_recomputed_over_box() {
        let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
        let pot = PotentialSpec::stark().with_perturbation(Perturbation::Explicit {
            first_site: 3,
            values: vec![0.5, -2.0],
        });
        assert_eq!(build_operator(&k, &pot, 3).unwrap().perturbation_sup(), 0.5);
        assert_eq!(build_operator(&k, &pot, 4).unwrap().perturbation_sup(), 2.0);
    }

    #[test]
    fn periodic_perturbation_wraps_negative_sites() {
        let p = Perturbation::Periodic { values: vec![1.0, 2.0, 3.0] };
        assert_eq!(p.value(-1), 3.0);
        assert_eq!(p.value(4), 2.0);
    }

    #[test]
    fn maryland_guard() {
        let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
        let resonant = PotentialSpec {
            field: OnSiteField::Maryland { coupling: 1.0, frequency: 0.25, phase: 0.0 },
            perturbation: Perturbation::None,
        };
        // sites -2 and 2 sit on poles; the first one in the box is reported
        assert!(matches!(build_operator(&k, &resonant, 3), Err(Error::MarylandResonance { site: -2, .. })));
        let fine = PotentialSpec {
            field: OnSiteField::Maryland {
                coupling: 1.0,
                frequency: (5f64.sqrt() - 1.0) / 2.0,
                phase: 0.1,
            },
            perturbation: Perturbation::None,
        };
        let op = build_operator(&k, &fine, 20).unwrap();
        assert!(op.hermitian_defect() == 0.0);
    }

    #[test]
    fn dimension_limit() {
        let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
        assert!(matches!(
            build_operator_with_limit(&k, &PotentialSpec::stark(), 10, 20),
            Err(Error::DimensionOverflow { dimension: 21, max: 20 })
        ));
        assert!(build_operator(&k, &PotentialSpec::stark(), 0).is_err());
    }

    #[test]
    fn matrix_dump_layout() {
        let k = build_kernel(KernelParams::FiniteSupport { positive: vec![Complex64::new(0.5, 0.25)] }).unwrap();
        let op = build_operator(&k, &PotentialSpec::stark(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        op.write_matrix_dump(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 9 * 16);
        let read = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
        // entry (0, 1) = a(-1) = conj(a(1))
        assert_eq!((read(2), read(3)), (0.5, -0.25));
        assert_eq!((read(6), read(7)), (0.5, 0.25));
    }
}
