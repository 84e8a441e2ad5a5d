//! Full eigendecomposition of a [`TruncatedOperator`], eigenvalue labeling by
//! integers anchored at the smallest nonnegative eigenvalue, and localization
//! centers.
//!
//! Ascending position `p` carries the integer label `p - anchor`, where `anchor`
//! is the position of `min { lambda : lambda >= 0 }`, with zero read up to the
//! residual tolerance. Centers are the site of
//! largest modulus; near-ties (within a relative `1e-9`) go to the smaller site.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::HoppingKernel;
use crate::operator::{build_operator_with_limit, PotentialSpec, TruncatedOperator};

pub const DEFAULT_EIG_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_DEGENERACY_GAP: f64 = 1e-12;
const CENTER_TIE_RELATIVE: f64 = 1e-9;
const DUMP_FORMAT: &str = "ladderloc-spectrum/1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Interior window `W`; `None` uses [`default_window`].
    pub window: Option<usize>,
    /// Residual bound relative to `max(1, spectral radius)`, and orthonormality bound.
    pub eig_tolerance: f64,
    /// Consecutive eigenvalues closer than this are flagged as degenerate.
    pub degeneracy_gap: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            window: None,
            eig_tolerance: DEFAULT_EIG_TOLERANCE,
            degeneracy_gap: DEFAULT_DEGENERACY_GAP,
        }
    }
}

/// `W = max(ceil(N/4), ceil(10 (||a||_0 + ||b||_inf + 1)))`.
pub fn default_window(op: &TruncatedOperator) -> usize {
    let n = op.half_width();
    let scale = 10.0 * (op.bounded_part_norm_bound() + 1.0);
    n.div_ceil(4).max(scale.ceil() as usize)
}

/// How the label-0 eigenvalue was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Smallest nonnegative eigenvalue.
    SmallestNonnegative,
    /// No nonnegative eigenvalue: label 0 sits on the largest one.
    AllNegative,
}

/// Position of label 0 in an ascending list. Values down to `-zero_tolerance`
/// count as nonnegative, so that a computed `-1e-16` standing for an exact zero
/// does not shift every label by one.
pub fn assign_paper_indices(eigenvalues: &[f64], zero_tolerance: f64) -> (usize, Anchor) {
    match eigenvalues.iter().position(|&l| l >= -zero_tolerance) {
        Some(p) => (p, Anchor::SmallestNonnegative),
        None => (eigenvalues.len().saturating_sub(1), Anchor::AllNegative),
    }
}

/// Site of largest modulus among `moduli` (indexed by row), ties to the smaller site.
pub fn center_of(moduli: &[f64], half_width: usize) -> i64 {
    let max = moduli.iter().fold(0.0_f64, |a, &b| a.max(b));
    let row = moduli
        .iter()
        .position(|&m| m >= max * (1.0 - CENTER_TIE_RELATIVE))
        .unwrap_or(0);
    row as i64 - half_width as i64
}

/// Orthonormal eigenvectors stored mode-contiguous, with real and imaginary parts
/// split (`imag` absent for real eigenvectors).
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenbasis {
    dim: usize,
    real: Vec<f64>,
    imag: Option<Vec<f64>>,
}

impl Eigenbasis {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn is_real(&self) -> bool {
        self.imag.is_none()
    }

    pub fn get(&self, mode: usize, row: usize) -> Complex64 {
        let k = mode * self.dim + row;
        Complex64::new(self.real[k], self.imag.as_ref().map_or(0.0, |im| im[k]))
    }

    pub fn abs(&self, mode: usize, row: usize) -> f64 {
        self.get(mode, row).norm()
    }

    pub fn mode_real(&self, mode: usize) -> &[f64] {
        &self.real[mode * self.dim..(mode + 1) * self.dim]
    }

    pub fn mode_imag(&self, mode: usize) -> Option<&[f64]> {
        self.imag.as_ref().map(|im| &im[mode * self.dim..(mode + 1) * self.dim])
    }

    /// `|phi_mode(row)|` for every row.
    pub fn mode_moduli(&self, mode: usize) -> Vec<f64> {
        let re = self.mode_real(mode);
        match self.mode_imag(mode) {
            None => re.iter().map(|x| x.abs()).collect(),
            Some(im) => re.iter().zip(im).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }

    /// Full mode vector.
    pub fn mode(&self, mode: usize) -> Vec<Complex64> {
        (0..self.dim).map(|row| self.get(mode, row)).collect()
    }

    fn set(&mut self, mode: usize, row: usize, value: Complex64) {
        let k = mode * self.dim + row;
        self.real[k] = value.re;
        if value.im != 0.0 && self.imag.is_none() {
            self.imag = Some(vec![0.0; self.real.len()]);
        }
        if let Some(im) = self.imag.as_mut() {
            im[k] = value.im;
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    operator: Arc<TruncatedOperator>,
    options: SpectralOptions,
    eigenvalues: Vec<f64>,
    basis: Eigenbasis,
    anchor: usize,
    anchor_kind: Anchor,
    centers: Vec<i64>,
    residuals: Vec<f64>,
    orthonormality_error: f64,
    window: usize,
    interior_mask: Vec<bool>,
    degenerate_pairs: Vec<(usize, usize)>,
}

/// Diagonalize with default options.
pub fn diagonalize(op: impl Into<Arc<TruncatedOperator>>) -> Result<SpectralData> {
    diagonalize_with(op, &SpectralOptions::default())
}

pub fn diagonalize_with(op: impl Into<Arc<TruncatedOperator>>, options: &SpectralOptions) -> Result<SpectralData> {
    let op = op.into();
    let d = op.dimension();
    let no_convergence = |_| Error::ConvergenceFailure { provenance: op.describe() };

    let (eigenvalues, basis) = if op.kernel().is_zero() {
        // multiplication operator: the standard basis, sorted by diagonal entry
        let mut rows: Vec<usize> = (0..d).collect();
        rows.sort_by(|&a, &b| op.entry(a, a).re.total_cmp(&op.entry(b, b).re));
        let mut real = vec![0.0; d * d];
        for (j, &row) in rows.iter().enumerate() {
            real[j * d + row] = 1.0;
        }
        let eigenvalues = rows.iter().map(|&r| op.entry(r, r).re).collect();
        (eigenvalues, Eigenbasis { dim: d, real, imag: None })
    } else if op.is_real() {
        let h = Mat::<f64>::from_fn(d, d, |i, j| op.entry(i, j).re);
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(no_convergence)?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let eigenvalues: Vec<f64> = (0..d).map(|j| s[j]).collect();
        let mut real = Vec::with_capacity(d * d);
        for j in 0..d {
            real.extend((0..d).map(|i| u[(i, j)]));
        }
        (eigenvalues, Eigenbasis { dim: d, real, imag: None })
    } else {
        let h = Mat::<Complex64>::from_fn(d, d, |i, j| op.entry(i, j));
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(no_convergence)?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let eigenvalues: Vec<f64> = (0..d).map(|j| s[j].re).collect();
        let mut real = Vec::with_capacity(d * d);
        let mut imag = Vec::with_capacity(d * d);
        for j in 0..d {
            for i in 0..d {
                real.push(u[(i, j)].re);
                imag.push(u[(i, j)].im);
            }
        }
        (eigenvalues, Eigenbasis { dim: d, real, imag: Some(imag) })
    };

    SpectralData::assemble(op, *options, eigenvalues, basis)
}

/// Diagonalize independent operators (different seeds, half-widths) under `exec`.
pub fn diagonalize_batch(
    exec: Execution,
    ops: &[Arc<TruncatedOperator>],
    options: &SpectralOptions,
) -> Vec<Result<SpectralData>> {
    exec.map_slice(ops, |op| diagonalize_with(op.clone(), options))
}

/// Residual norms `||H phi_j - lambda_j phi_j||_2` and `max |<phi_i, phi_j> - delta_ij|`.
fn quality(op: &TruncatedOperator, eigenvalues: &[f64], basis: &Eigenbasis) -> (Vec<f64>, f64) {
    let d = op.dimension();
    if basis.is_real() && op.is_real() {
        let h = Mat::<f64>::from_fn(d, d, |i, j| op.entry(i, j).re);
        let u = Mat::<f64>::from_fn(d, d, |i, j| basis.real[j * d + i]);
        let hu = &h * &u;
        let residuals = (0..d)
            .map(|j| (0..d).map(|i| (hu[(i, j)] - u[(i, j)] * eigenvalues[j]).powi(2)).sum::<f64>().sqrt())
            .collect();
        let gram = u.transpose() * &u;
        let ortho = max_identity_defect(d, |i, j| Complex64::new(gram[(i, j)], 0.0));
        return (residuals, ortho);
    }
    let h = Mat::<Complex64>::from_fn(d, d, |i, j| op.entry(i, j));
    let u = Mat::<Complex64>::from_fn(d, d, |i, j| basis.get(j, i));
    let hu = &h * &u;
    let residuals = (0..d)
        .map(|j| (0..d).map(|i| (hu[(i, j)] - u[(i, j)] * eigenvalues[j]).norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let gram = u.adjoint() * &u;
    let ortho = max_identity_defect(d, |i, j| gram[(i, j)]);
    (residuals, ortho)
}

fn max_identity_defect(d: usize, gram: impl Fn(usize, usize) -> Complex64) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..d {
        for i in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram(i, j) - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

impl SpectralData {
    fn assemble(
        operator: Arc<TruncatedOperator>,
        options: SpectralOptions,
        eigenvalues: Vec<f64>,
        basis: Eigenbasis,
    ) -> Result<SpectralData> {
        let (residuals, orthonormality_error) = quality(&operator, &eigenvalues, &basis);
        let radius = eigenvalues.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
        let limit = options.eig_tolerance * radius.max(1.0);
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        if !(worst <= limit && orthonormality_error <= options.eig_tolerance) {
            return Err(Error::EigenQuality {
                provenance: operator.describe(),
                residual: worst,
                orthonormality: orthonormality_error,
                limit,
            });
        }

        let (anchor, anchor_kind) = assign_paper_indices(&eigenvalues, limit);
        let window = options.window.unwrap_or_else(|| default_window(&operator));
        let mut data = SpectralData {
            operator,
            options,
            eigenvalues,
            basis,
            anchor,
            anchor_kind,
            centers: Vec::new(),
            residuals,
            orthonormality_error,
            window,
            interior_mask: Vec::new(),
            degenerate_pairs: Vec::new(),
        };
        data.localization_centers();
        data.degenerate_pairs = data
            .eigenvalues
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] - w[0] < options.degeneracy_gap)
            .map(|(p, _)| (p, p + 1))
            .collect();
        Ok(data)
    }

    /// Recomputes centers and the interior mask.
    fn localization_centers(&mut self) {
        let n = self.half_width();
        let limit = n as i64 - self.window as i64;
        self.centers = (0..self.dimension())
            .map(|j| center_of(&self.basis.mode_moduli(j), n))
            .collect();
        self.interior_mask = self.centers.iter().map(|c| c.abs() <= limit).collect();
    }

    pub fn operator(&self) -> &TruncatedOperator {
        &self.operator
    }

    pub fn operator_arc(&self) -> Arc<TruncatedOperator> {
        self.operator.clone()
    }

    pub fn options(&self) -> &SpectralOptions {
        &self.options
    }

    pub fn half_width(&self) -> usize {
        self.operator.half_width()
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Eigenbasis {
        &self.basis
    }

    pub fn anchor(&self) -> (usize, Anchor) {
        (self.anchor, self.anchor_kind)
    }

    /// Integer label of ascending position `position`.
    pub fn paper_index(&self, position: usize) -> i64 {
        position as i64 - self.anchor as i64
    }

    /// Ascending position carrying label `index`.
    pub fn position_of(&self, index: i64) -> Option<usize> {
        let p = self.anchor as i64 + index;
        (p >= 0 && (p as usize) < self.dimension()).then_some(p as usize)
    }

    /// Eigenvalue with label `index`.
    pub fn eigenvalue_at(&self, index: i64) -> Option<f64> {
        self.position_of(index).map(|p| self.eigenvalues[p])
    }

    /// Range of labels present.
    pub fn index_range(&self) -> std::ops::RangeInclusive<i64> {
        self.paper_index(0)..=self.paper_index(self.dimension() - 1)
    }

    /// Localization center of each ascending position.
    pub fn centers(&self) -> &[i64] {
        &self.centers
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn orthonormality_error(&self) -> f64 {
        self.orthonormality_error
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |a, l| a.max(l.abs()))
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Largest `|site|` considered interior, `N - W` (negative if none).
    pub fn interior_limit(&self) -> i64 {
        self.half_width() as i64 - self.window as i64
    }

    pub fn is_interior_site(&self, site: i64) -> bool {
        site.abs() <= self.interior_limit()
    }

    /// Whether the mode at each position is centered in the interior window.
    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    /// Positions of interior modes, ascending.
    pub fn interior_positions(&self) -> Vec<usize> {
        (0..self.dimension()).filter(|&p| self.interior_mask[p]).collect()
    }

    /// Labels `n` with `|n| <= N - W`, ascending.
    pub fn interior_indices(&self) -> Vec<i64> {
        let limit = self.interior_limit();
        if limit < 0 {
            return Vec::new();
        }
        (-limit..=limit).filter(|&n| self.position_of(n).is_some()).collect()
    }

    pub fn degenerate_pairs(&self) -> &[(usize, usize)] {
        &self.degenerate_pairs
    }

    pub fn is_degenerate(&self, position: usize) -> bool {
        self.degenerate_pairs.iter().any(|&(a, b)| a == position || b == position)
    }

    /// `sum_m |phi_m(row)|^2` for every row.
    pub fn parseval_sums(&self) -> Vec<f64> {
        let d = self.dimension();
        let mut sums = vec![0.0; d];
        for j in 0..d {
            for (s, m) in sums.iter_mut().zip(self.basis.mode_moduli(j)) {
                *s += m * m;
            }
        }
        sums
    }

    /// A copy with one eigenvector entry overwritten. Nothing else is recomputed,
    /// so the copy no longer satisfies the eigen-equation; it exists to feed
    /// negative controls to the verification routines.
    pub fn with_modified_amplitude(&self, position: usize, site: i64, value: Complex64) -> SpectralData {
        let mut out = self.clone();
        let row = self.operator.row_of_site(site).expect("site inside the box");
        out.basis.set(position, row, value);
        out
    }

    /// Writes `<stem>.json` (header) and `<stem>.bin` (payload) into `dir`.
    ///
    /// Payload: `d` eigenvalues, then the eigenvectors mode by mode, as
    /// little-endian `f64`; complex bases store `(re, im)` pairs.
    pub fn write_dump(&self, dir: &Path, stem: &str, config_hash: Option<&str>) -> Result<(PathBuf, PathBuf)> {
        let bin_name = format!("{stem}.bin");
        let json_path = dir.join(format!("{stem}.json"));
        let bin_path = dir.join(&bin_name);

        let mut out = std::io::BufWriter::new(std::fs::File::create(&bin_path)?);
        for l in &self.eigenvalues {
            out.write_all(&l.to_le_bytes())?;
        }
        let d = self.dimension();
        for j in 0..d {
            let re = self.basis.mode_real(j);
            match self.basis.mode_imag(j) {
                None => re.iter().try_for_each(|x| out.write_all(&x.to_le_bytes()))?,
                Some(im) => re.iter().zip(im).try_for_each(|(a, b)| {
                    out.write_all(&a.to_le_bytes())?;
                    out.write_all(&b.to_le_bytes())
                })?,
            }
        }
        out.flush()?;

        let header = DumpHeader {
            format: DUMP_FORMAT.to_string(),
            provenance: self.operator.describe(),
            config_hash: config_hash.map(str::to_string),
            half_width: self.half_width(),
            dimension: d,
            kernel: self.operator.kernel().clone(),
            potential: self.operator.potential().clone(),
            options: self.options,
            window: self.window,
            complex_eigenvectors: !self.basis.is_real(),
            payload: bin_name,
            max_residual: self.max_residual(),
            orthonormality_error: self.orthonormality_error,
        };
        std::fs::write(&json_path, serde_json::to_string_pretty(&header)?)?;
        Ok((json_path, bin_path))
    }

    /// Reads a dump written by [`SpectralData::write_dump`], rebuilding the operator
    /// from the recorded kernel and potential and re-verifying the decomposition.
    pub fn read_dump(json_path: &Path) -> Result<(SpectralData, DumpHeader)> {
        let malformed = |message: String| Error::MalformedDump { path: json_path.to_path_buf(), message };
        let header: DumpHeader = serde_json::from_str(&std::fs::read_to_string(json_path)?)?;
        if header.format != DUMP_FORMAT {
            return Err(malformed(format!("unknown format {}", header.format)));
        }
        let op = build_operator_with_limit(&header.kernel, &header.potential, header.half_width, usize::MAX)?;
        let d = op.dimension();
        if d != header.dimension {
            return Err(malformed("dimension disagrees with half-width".into()));
        }
        let dir = json_path.parent().unwrap_or(Path::new("."));
        let mut bytes = Vec::new();
        std::fs::File::open(dir.join(&header.payload))?.read_to_end(&mut bytes)?;
        let per_entry = if header.complex_eigenvectors { 2 } else { 1 };
        if bytes.len() != 8 * (d + per_entry * d * d) {
            return Err(malformed(format!("payload has {} bytes", bytes.len())));
        }
        let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let eigenvalues: Vec<f64> = values.by_ref().take(d).collect();
        let basis = if header.complex_eigenvectors {
            let (mut real, mut imag) = (Vec::with_capacity(d * d), Vec::with_capacity(d * d));
            while let (Some(a), Some(b)) = (values.next(), values.next()) {
                real.push(a);
                imag.push(b);
            }
            Eigenbasis { dim: d, real, imag: Some(imag) }
        } else {
            Eigenbasis { dim: d, real: values.collect(), imag: None }
        };
        let mut options = header.options;
        options.window = Some(header.window);
        let data = SpectralData::assemble(Arc::new(op), options, eigenvalues, basis)?;
        Ok((data, header))
    }
}

/// JSON header of a spectral dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHeader {
    pub format: String,
    pub provenance: String,
    pub config_hash: Option<String>,
    pub half_width: usize,
    pub dimension: usize,
    pub kernel: HoppingKernel,
    pub potential: PotentialSpec,
    pub options: SpectralOptions,
    pub window: usize,
    pub complex_eigenvectors: bool,
    pub payload: String,
    pub max_residual: f64,
    pub orthonormality_error: f64,
}
