//! Box-doubling comparisons across consecutive half-widths.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::envelope;
use crate::error::Result;
use crate::exec::Execution;
use crate::experiment::config::ExperimentConfig;
use crate::localization::ule_constants_with;
use crate::operator::build_operator_with_limit;
use crate::spectral::{diagonalize_batch, SpectralData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaDrift {
    pub alpha: f64,
    pub smaller: f64,
    pub larger: f64,
    /// `|larger - smaller| / smaller`, `0` when both vanish.
    pub relative_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRatio {
    pub source: i64,
    pub q: f64,
    pub smaller: f64,
    pub larger: f64,
    /// `E_q(larger) / E_q(smaller)`, `1` when both vanish.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyPair {
    pub smaller: usize,
    pub larger: usize,
    /// Number of labels compared: those interior to the smaller box.
    pub compared_indices: usize,
    pub max_interior_eigenvalue_drift: f64,
    pub gamma_alpha: Vec<AlphaDrift>,
    pub envelope_ratios: Vec<EnvelopeRatio>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub half_widths: Vec<usize>,
    pub pairs: Vec<StudyPair>,
}

fn relative(smaller: f64, larger: f64) -> f64 {
    if smaller == larger {
        0.0
    } else {
        (larger - smaller).abs() / smaller.abs()
    }
}

/// Drift tables across consecutive entries of `spectra` (ascending half-width).
/// Envelope ratios are taken for every source interior to the smaller box.
pub fn study_from_spectra(
    exec: Execution,
    spectra: &[Arc<SpectralData>],
    alphas: &[f64],
    sources: &[i64],
    qs: &[f64],
) -> Result<StudyReport> {
    let mut pairs = Vec::new();
    for w in spectra.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let labels = a.interior_indices();
        let max_interior_eigenvalue_drift = labels
            .iter()
            .filter_map(|&n| Some((a.eigenvalue_at(n)? - b.eigenvalue_at(n)?).abs()))
            .fold(0.0, f64::max);

        let mut gamma_alpha = Vec::new();
        for &alpha in alphas {
            let ga = ule_constants_with(exec, a, alpha)?.gamma_alpha;
            let gb = ule_constants_with(exec, b, alpha)?.gamma_alpha;
            gamma_alpha.push(AlphaDrift { alpha, smaller: ga, larger: gb, relative_drift: relative(ga, gb) });
        }

        let mut envelope_ratios = Vec::new();
        for &source in sources.iter().filter(|&&k| a.is_interior_site(k)) {
            let ea = envelope(a, source, qs)?;
            let eb = envelope(b, source, qs)?;
            for (ma, mb) in ea.moments.iter().zip(&eb.moments) {
                let ratio = if ma.value == 0.0 && mb.value == 0.0 { 1.0 } else { mb.value / ma.value };
                envelope_ratios.push(EnvelopeRatio { source, q: ma.q, smaller: ma.value, larger: mb.value, ratio });
            }
        }

        pairs.push(StudyPair {
            smaller: a.half_width(),
            larger: b.half_width(),
            compared_indices: labels.len(),
            max_interior_eigenvalue_drift,
            gamma_alpha,
            envelope_ratios,
        });
    }
    Ok(StudyReport {
        half_widths: spectra.iter().map(|s| s.half_width()).collect(),
        pairs,
    })
}

/// Diagonalizes every box in the config and tabulates drifts across
/// consecutive half-widths.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<StudyReport> {
    cfg.validate()?;
    if cfg.half_widths.len() < 2 {
        return Err(crate::error::Error::config("half_widths", "a convergence study needs at least two half-widths"));
    }
    let kernel = cfg.build_kernel()?;
    let potential = cfg.potential_spec();
    let ops = cfg
        .half_widths
        .iter()
        .map(|&n| build_operator_with_limit(&kernel, &potential, n, cfg.tolerances.max_dimension).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let spectra = diagonalize_batch(cfg.execution, &ops, &cfg.spectral_options())
        .into_iter()
        .map(|r| r.map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let (sources, qs) = match cfg.dynamics_enabled() {
        Some(d) => (d.sources.clone(), d.moments.clone()),
        None => (Vec::new(), Vec::new()),
    };
    study_from_spectra(cfg.execution, &spectra, cfg.ule_alphas().unwrap_or(&[]), &sources, &qs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kernel_drifts_vanish() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            half_widths = [12, 24]
            [kernel]
            family = "custom"
            entries = []
            [ule]
            alphas = [2.0]
            [dynamics]
            sources = [0, 2]
            moments = [2.0]
            "#,
        )
        .unwrap();
        let rep = convergence_study(&cfg).unwrap();
        let pair = &rep.pairs[0];
        assert_eq!(pair.max_interior_eigenvalue_drift, 0.0);
        assert!(pair.gamma_alpha.iter().all(|d| d.relative_drift == 0.0));
        assert_eq!(pair.envelope_ratios.len(), 2);
        assert!(pair.envelope_ratios.iter().all(|r| r.ratio == 1.0));
    }

    #[test]
    fn single_box_rejected() {
        let cfg = ExperimentConfig::from_toml_str("half_widths = [10]\n[kernel]\nfamily = \"nearest_neighbor\"\n").unwrap();
        assert!(convergence_study(&cfg).is_err());
    }
}
