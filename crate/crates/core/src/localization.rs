//! Static localization checks on a [`SpectralData`]:
//!
//! * eigenvalue pinning `|lambda_n - n| <= ||T_a + b|| + 1`,
//! * uniform power-law decay constants `sup |phi_m(n)| |n - m|^alpha`,
//! * the recursive decay inequality
//!   `|phi_m(n)| <= 4 gamma sum_k |a(k)| |phi_m(n - k)| / |m - n|` for `|m - n| > 2 gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::operator::OnSiteField;
use crate::spectral::{Anchor, SpectralData};

/// Amplitudes below this are treated as eigensolver noise in exponent fits.
pub const FIT_NOISE_FLOOR: f64 = 1e-12;

/// Fixed part of the slack allowed by [`bootstrap_inequality_check`].
pub const BOOTSTRAP_BASE_SLACK: f64 = 1e-8;

fn require_unit_field(sd: &SpectralData) -> Result<()> {
    match sd.operator().potential().field {
        OnSiteField::Maryland { .. } => Err(Error::WrongPotentialFamily),
        OnSiteField::Linear { slope } if slope != 1.0 => Err(Error::InvalidArgument(format!(
            "eigenvalue pinning is stated for unit field slope, got {slope}"
        ))),
        OnSiteField::Linear { .. } => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub half_width: usize,
    /// `max |lambda_n - n|` over interior labels.
    pub gamma_observed: f64,
    /// `||a||_0 + ||b||_inf + 1`, with `||a||_0` summed over in-box offsets.
    pub gamma_theoretical: f64,
    pub kernel_norm: f64,
    pub perturbation_sup: f64,
    pub anchor: Anchor,
    /// `(n, lambda_n - n)` for every interior label.
    pub per_index_deviation: Vec<(i64, f64)>,
}

impl AsymptoticsReport {
    pub fn pass(&self) -> bool {
        self.gamma_observed <= self.gamma_theoretical
    }

    /// Labels whose deviation exceeds the theoretical bound.
    pub fn violations(&self) -> Vec<i64> {
        self.per_index_deviation
            .iter()
            .filter(|(_, dev)| dev.abs() > self.gamma_theoretical)
            .map(|&(n, _)| n)
            .collect()
    }
}

pub fn check_eigenvalue_asymptotics(sd: &SpectralData) -> Result<AsymptoticsReport> {
    require_unit_field(sd)?;
    let indices = sd.interior_indices();
    if indices.is_empty() {
        return Err(Error::NoInteriorModes);
    }
    let per_index_deviation: Vec<(i64, f64)> = indices
        .iter()
        .map(|&n| (n, sd.eigenvalue_at(n).expect("interior label present") - n as f64))
        .collect();
    let gamma_observed = per_index_deviation.iter().fold(0.0_f64, |a, (_, d)| a.max(d.abs()));
    let op = sd.operator();
    let kernel_norm = op.kernel().norm_r(0.0, 2 * op.half_width() as u64).partial;
    let perturbation_sup = op.perturbation_sup();
    Ok(AsymptoticsReport {
        half_width: sd.half_width(),
        gamma_observed,
        gamma_theoretical: kernel_norm + perturbation_sup + 1.0,
        kernel_norm,
        perturbation_sup,
        anchor: sd.anchor().1,
        per_index_deviation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDecay {
    pub index: i64,
    pub position: usize,
    pub eigenvalue: f64,
    pub center: i64,
    /// `sup_{n != center} |phi(n)| |n - center|^alpha`
    pub gamma_center: f64,
    /// `sup_{n != index} |phi(n)| |n - index|^alpha`
    pub gamma_index: f64,
    /// `-slope` of `log |phi(n)|` against `log |n - center|` over
    /// `2 <= |n - center| <= N/2`; absent for degenerate or too-flat modes.
    pub fit_alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UleReport {
    pub alpha: f64,
    pub half_width: usize,
    /// Max of `gamma_center` over interior modes.
    pub gamma_alpha: f64,
    /// Max of `gamma_index` over interior modes.
    pub gamma_alpha_index: f64,
    /// `max |center - index|` over interior modes.
    pub max_center_offset: i64,
    pub modes: Vec<ModeDecay>,
}

impl UleReport {
    /// `(label, constant)` measured against the detected center.
    pub fn per_mode_gamma(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.modes.iter().map(|m| (m.index, m.gamma_center))
    }
}

pub fn ule_constants(sd: &SpectralData, alpha: f64) -> Result<UleReport> {
    ule_constants_with(Execution::default(), sd, alpha)
}

pub fn ule_constants_with(exec: Execution, sd: &SpectralData, alpha: f64) -> Result<UleReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay exponent must be positive, got {alpha}")));
    }
    let positions = sd.interior_positions();
    if positions.is_empty() {
        return Err(Error::NoInteriorModes);
    }
    let n = sd.half_width();
    let d = sd.dimension();
    let weights: Vec<f64> = (0..d).map(|dist| (dist as f64).powf(alpha)).collect();
    let fit_max = (n / 2) as i64;

    let modes = exec.map_slice(&positions, |&p| {
        let moduli = sd.basis().mode_moduli(p);
        let center = sd.centers()[p];
        let index = sd.paper_index(p);
        let mut gamma_center = 0.0_f64;
        let mut gamma_index = 0.0_f64;
        let mut fit = LineFit::default();
        for (row, &m) in moduli.iter().enumerate() {
            let site = row as i64 - n as i64;
            let dc = (site - center).unsigned_abs() as usize;
            if dc != 0 {
                gamma_center = gamma_center.max(m * weights[dc]);
            }
            let di = (site - index).unsigned_abs() as usize;
            if di != 0 {
                gamma_index = gamma_index.max(m * weights[di.min(d - 1)]);
            }
            if (2..=fit_max).contains(&(dc as i64)) && m > FIT_NOISE_FLOOR {
                fit.push((dc as f64).ln(), m.ln());
            }
        }
        let fit_alpha = if sd.is_degenerate(p) { None } else { fit.slope().map(|s| -s) };
        ModeDecay {
            index,
            position: p,
            eigenvalue: sd.eigenvalues()[p],
            center,
            gamma_center,
            gamma_index,
            fit_alpha,
        }
    });

    Ok(UleReport {
        alpha,
        half_width: n,
        gamma_alpha: modes.iter().fold(0.0, |a, m| a.max(m.gamma_center)),
        gamma_alpha_index: modes.iter().fold(0.0, |a, m| a.max(m.gamma_index)),
        max_center_offset: modes.iter().map(|m| (m.center - m.index).abs()).max().unwrap_or(0),
        modes,
    })
}

/// ULE constants at `alpha = r + 1` for an integer `r` with `||a||_r < inf`,
/// on a unit-field operator.
pub fn check_power_law_ule(sd: &SpectralData, r: u32) -> Result<UleReport> {
    require_unit_field(sd)?;
    if !sd.operator().kernel().has_finite_norm(r as f64) {
        return Err(Error::InvalidArgument(format!(
            "||a||_{r} diverges for {}",
            sd.operator().kernel().describe()
        )));
    }
    ule_constants(sd, r as f64 + 1.0)
}

#[derive(Default)]
struct LineFit {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
}

impl LineFit {
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    fn slope(&self) -> Option<f64> {
        let denom = self.n * self.sxx - self.sx * self.sx;
        (self.n >= 3.0 && denom > 1e-12).then(|| (self.n * self.sxy - self.sx * self.sy) / denom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapViolation {
    pub index: i64,
    pub site: i64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub gamma: f64,
    /// `max |lambda_m - m - b(n)|` over interior modes `m` and box sites `n`.
    pub gamma_required: f64,
    /// `sum_{|k| > 2N} |a(k)|`, the part of the kernel that never acts in the box.
    pub kernel_tail: f64,
    pub checked_pairs: usize,
    pub violations: Vec<BootstrapViolation>,
}

impl BootstrapReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Smallest `gamma` for which the decay inequality's derivation holds on this
/// box: `max |lambda_m - m - b(n)|` over interior modes and all sites.
pub fn minimal_bootstrap_gamma(sd: &SpectralData) -> f64 {
    let b = sd.operator().perturbation();
    let (lo, hi) = b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    sd.interior_positions()
        .into_iter()
        .map(|p| {
            let shift = sd.eigenvalues()[p] - sd.paper_index(p) as f64;
            (shift - lo).abs().max((shift - hi).abs())
        })
        .fold(0.0, f64::max)
}

pub fn bootstrap_inequality_check(sd: &SpectralData, gamma: f64) -> Result<BootstrapReport> {
    bootstrap_inequality_check_with(Execution::default(), sd, gamma)
}

/// Evaluates both sides of the decay inequality for every interior mode and every
/// site at distance `> 2 gamma` from its label, using in-box amplitudes only.
///
/// A pair violates when `lhs > rhs + slack` with
/// `slack = 1e-8 + kernel_tail * max |phi_m|`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn bootstrap_inequality_check_with(exec: Execution, sd: &SpectralData, gamma: f64) -> Result<BootstrapReport> {
    require_unit_field(sd)?;
    let gamma_required = minimal_bootstrap_gamma(sd);
    // negated so that a NaN gamma is refused
    if !(gamma + BOOTSTRAP_BASE_SLACK >= gamma_required) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} is below max |lambda_m - m - b(n)| = {gamma_required}"
        )));
    }
    let op = sd.operator();
    let n = op.half_width() as i64;
    let kernel = op.kernel();
    let kernel_tail = kernel.norm_r(0.0, 2 * n as u64).tail_bound;
    let hops: Vec<(i64, f64)> = (-2 * n..=2 * n)
        .filter(|&k| k != 0)
        .map(|k| (k, kernel.coefficient(k).norm()))
        .filter(|&(_, a)| a > 0.0)
        .collect();

    let positions = sd.interior_positions();
    let per_mode = exec.map_slice(&positions, |&p| {
        let moduli = sd.basis().mode_moduli(p);
        let m = sd.paper_index(p);
        let slack = BOOTSTRAP_BASE_SLACK + kernel_tail * moduli.iter().fold(0.0_f64, |a, &b| a.max(b));
        let mut checked = 0usize;
        let mut violations = Vec::new();
        for site in -n..=n {
            let dist = (m - site).abs() as f64;
            if dist <= 2.0 * gamma {
                continue;
            }
            checked += 1;
            let conv: f64 = hops
                .iter()
                .filter_map(|&(k, a)| {
                    let other = site - k;
                    (other.abs() <= n).then(|| a * moduli[(other + n) as usize])
                })
                .sum();
            let lhs = moduli[(site + n) as usize];
            let rhs = 4.0 * gamma * conv / dist;
            if lhs > rhs + slack {
                violations.push(BootstrapViolation { index: m, site, lhs, rhs, slack });
            }
        }
        (checked, violations)
    });

    let checked_pairs = per_mode.iter().map(|(c, _)| c).sum();
    let violations = per_mode.into_iter().flat_map(|(_, v)| v).collect();
    Ok(BootstrapReport {
        gamma,
        gamma_required,
        kernel_tail,
        checked_pairs,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelParams};
    use crate::operator::{build_operator, Perturbation, PotentialSpec};
    use crate::spectral::{diagonalize_with, SpectralOptions};

    fn zero_kernel_data(n: usize, window: usize) -> SpectralData {
        let k = build_kernel(KernelParams::Custom { entries: vec![] }).unwrap();
        let op = build_operator(&k, &PotentialSpec::stark(), n).unwrap();
        diagonalize_with(op, &SpectralOptions { window: Some(window), ..Default::default() }).unwrap()
    }

    #[test]
    fn diagonal_operator_is_pinned_exactly() {
        let sd = zero_kernel_data(10, 2);
        let rep = check_eigenvalue_asymptotics(&sd).unwrap();
        assert_eq!(rep.gamma_observed, 0.0);
        assert_eq!(rep.gamma_theoretical, 1.0);
        assert!(rep.pass());
        assert_eq!(rep.per_index_deviation.len(), 17);
    }

    #[test]
    fn diagonal_operator_has_zero_ule_constants() {
        let sd = zero_kernel_data(10, 2);
        for alpha in [0.5, 3.0, 10.0] {
            let rep = ule_constants(&sd, alpha).unwrap();
            assert_eq!(rep.gamma_alpha, 0.0);
            assert_eq!(rep.gamma_alpha_index, 0.0);
            assert_eq!(rep.max_center_offset, 0);
        }
    }

    #[test]
    fn diagonal_operator_bootstrap_is_trivially_clean() {
        let sd = zero_kernel_data(10, 2);
        let rep = bootstrap_inequality_check(&sd, 0.0).unwrap();
        assert!(rep.pass());
        assert!(rep.checked_pairs > 0);
    }

    #[test]
    fn no_interior_modes() {
        let sd = zero_kernel_data(3, 10);
        assert!(matches!(ule_constants(&sd, 2.0), Err(Error::NoInteriorModes)));
        assert!(matches!(ule_constants(&sd, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn maryland_refused() {
        let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
        let pot = PotentialSpec {
            field: OnSiteField::Maryland { coupling: 1.0, frequency: 0.618_033_988_749_895, phase: 0.1 },
            perturbation: Perturbation::None,
        };
        let op = build_operator(&k, &pot, 20).unwrap();
        let sd = diagonalize_with(op, &SpectralOptions { window: Some(5), ..Default::default() }).unwrap();
        assert!(matches!(check_eigenvalue_asymptotics(&sd), Err(Error::WrongPotentialFamily)));
        assert!(matches!(bootstrap_inequality_check(&sd, 3.0), Err(Error::WrongPotentialFamily)));
        assert!(matches!(check_power_law_ule(&sd, 1), Err(Error::WrongPotentialFamily)));
        assert!(ule_constants(&sd, 2.0).is_ok());
    }

    #[test]
    fn gamma_below_requirement_rejected() {
        let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
        let pot = PotentialSpec::stark().with_perturbation(Perturbation::UniformRandom { amplitude: 0.3, seed: 7 });
        let op = build_operator(&k, &pot, 30).unwrap();
        let sd = diagonalize_with(op, &SpectralOptions { window: Some(10), ..Default::default() }).unwrap();
        let needed = minimal_bootstrap_gamma(&sd);
        assert!(needed > 0.05, "needed {needed}");
        assert!(bootstrap_inequality_check(&sd, needed * 0.5).is_err());
        assert!(bootstrap_inequality_check(&sd, needed.max(0.5)).unwrap().pass());
    }

    #[test]
    fn line_fit_recovers_power() {
        let mut fit = LineFit::default();
        for d in 2..40 {
            let x = (d as f64).ln();
            fit.push(x, -3.5 * x + 0.25);
        }
        assert!((fit.slope().unwrap() + 3.5).abs() < 1e-12);
    }
}
