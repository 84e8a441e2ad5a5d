//! Wave-packet evolution through the eigen-expansion
//! `psi(n, t) = sum_m exp(-i lambda_m t) <phi_m, psi_0> phi_m(n)`,
//! position moments, and the time-independent envelope majorant.
//!
//! Packets for many times are produced a block at a time as one dense product
//! `Phi * C`, with `C[m, t] = exp(-i lambda_m t) <phi_m, psi_0>`.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::localization::UleReport;
use crate::spectral::SpectralData;

/// Times per dense block in [`evolve_many`] and the moment sweeps.
pub const TIME_BLOCK: usize = 256;

/// Doubling ratio below which moments are declared bounded.
pub const DOUBLING_RATIO_LIMIT: f64 = 1.1;

/// Largest boundary share of `E_q` for which a verdict is issued.
pub const BOUNDARY_SHARE_LIMIT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct WavePacket {
    pub time: f64,
    pub half_width: usize,
    /// Amplitudes on sites `-N..=N`.
    pub amplitudes: Vec<Complex64>,
}

impl WavePacket {
    pub fn amplitude(&self, site: i64) -> Option<Complex64> {
        let row = site + self.half_width as i64;
        (row >= 0).then(|| self.amplitudes.get(row as usize).copied()).flatten()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn moment(&self, q: f64) -> f64 {
        moment(self, q)
    }
}

/// `sum_n |n|^q |psi(n)|^2`.
pub fn moment(packet: &WavePacket, q: f64) -> f64 {
    let n = packet.half_width as i64;
    packet
        .amplitudes
        .iter()
        .enumerate()
        .map(|(row, z)| site_weight(row as i64 - n, q) * z.norm_sqr())
        .sum()
}

fn site_weight(site: i64, q: f64) -> f64 {
    if site == 0 {
        0.0
    } else {
        (site.unsigned_abs() as f64).powf(q)
    }
}

fn check_source(sd: &SpectralData, source: i64) -> Result<()> {
    if sd.is_interior_site(source) {
        Ok(())
    } else {
        Err(Error::SourceOutsideInterior { site: source, limit: sd.interior_limit() })
    }
}

/// Eigenbasis as dense matrices with column `m` holding mode `m`.
struct Propagator<'a> {
    sd: &'a SpectralData,
    re: Mat<f64>,
    im: Option<Mat<f64>>,
    /// `<phi_m, psi_0>` split into real and imaginary parts.
    overlap_re: Vec<f64>,
    overlap_im: Vec<f64>,
}

impl<'a> Propagator<'a> {
    fn new(sd: &'a SpectralData, initial: &[Complex64]) -> Self {
        let d = sd.dimension();
        let basis = sd.basis();
        let re = Mat::from_fn(d, d, |row, m| basis.mode_real(m)[row]);
        let im = (!basis.is_real()).then(|| Mat::from_fn(d, d, |row, m| basis.mode_imag(m).unwrap()[row]));
        let mut overlap_re = vec![0.0; d];
        let mut overlap_im = vec![0.0; d];
        for m in 0..d {
            let acc: Complex64 = initial
                .iter()
                .enumerate()
                .filter(|(_, z)| **z != Complex64::new(0.0, 0.0))
                .map(|(row, z)| basis.get(m, row).conj() * z)
                .sum();
            overlap_re[m] = acc.re;
            overlap_im[m] = acc.im;
        }
        Propagator { sd, re, im, overlap_re, overlap_im }
    }

    /// Packets at `times`, computed as one dense product.
    fn block(&self, times: &[f64]) -> Vec<WavePacket> {
        let d = self.sd.dimension();
        let lambdas = self.sd.eigenvalues();
        let mut cr = Mat::<f64>::zeros(d, times.len());
        let mut ci = Mat::<f64>::zeros(d, times.len());
        for (j, &t) in times.iter().enumerate() {
            for m in 0..d {
                let (s, c) = (lambdas[m] * t).sin_cos();
                // exp(-i lambda t) * w
                let (wr, wi) = (self.overlap_re[m], self.overlap_im[m]);
                cr[(m, j)] = c * wr + s * wi;
                ci[(m, j)] = c * wi - s * wr;
            }
        }
        let (out_re, out_im) = match &self.im {
            None => (&self.re * &cr, &self.re * &ci),
            Some(bi) => (&self.re * &cr - bi * &ci, &self.re * &ci + bi * &cr),
        };
        times
            .iter()
            .enumerate()
            .map(|(j, &t)| WavePacket {
                time: t,
                half_width: self.sd.half_width(),
                amplitudes: (0..d).map(|row| Complex64::new(out_re[(row, j)], out_im[(row, j)])).collect(),
            })
            .collect()
    }
}

fn delta(sd: &SpectralData, source: i64) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); sd.dimension()];
    v[(source + sd.half_width() as i64) as usize] = Complex64::new(1.0, 0.0);
    v
}

/// `exp(-itH) delta_source` from the eigen-expansion.
pub fn evolve(sd: &SpectralData, source: i64, t: f64) -> Result<WavePacket> {
    Ok(evolve_many(sd, source, &[t])?.pop().expect("one time"))
}

pub fn evolve_many(sd: &SpectralData, source: i64, times: &[f64]) -> Result<Vec<WavePacket>> {
    check_source(sd, source)?;
    let prop = Propagator::new(sd, &delta(sd, source));
    Ok(times.chunks(TIME_BLOCK).flat_map(|c| prop.block(c)).collect())
}

/// `exp(-itH) psi_0` for an arbitrary initial vector on the box.
pub fn propagate(sd: &SpectralData, initial: &[Complex64], times: &[f64]) -> Result<Vec<WavePacket>> {
    if initial.len() != sd.dimension() {
        return Err(Error::InvalidArgument(format!(
            "initial state has length {}, box has {} sites",
            initial.len(),
            sd.dimension()
        )));
    }
    let prop = Propagator::new(sd, initial);
    Ok(times.chunks(TIME_BLOCK).flat_map(|c| prop.block(c)).collect())
}

/// Uniform steps on `[0, horizon]` followed by quasi-random long times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub step: f64,
    pub horizon: f64,
    pub long_time_samples: usize,
    pub long_time_horizon: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            step: 0.05,
            horizon: 1000.0,
            long_time_samples: 100,
            long_time_horizon: 1e6,
        }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {}", self.horizon)));
        }
        if self.long_time_samples > 0 && !(self.long_time_horizon > 0.0 && self.long_time_horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "long-time horizon must be positive, got {}",
                self.long_time_horizon
            )));
        }
        Ok(())
    }

    /// Grid times `j * step` for `j*step <= horizon`, then the Kronecker sequence
    /// `frac(1/2 + j / golden) * long_time_horizon`, `j = 1..=samples`.
    pub fn times(&self) -> Vec<f64> {
        let steps = (self.horizon / self.step + 1e-9).floor() as usize;
        let golden_inv = (5.0_f64.sqrt() - 1.0) / 2.0;
        (0..=steps)
            .map(|j| j as f64 * self.step)
            .chain((1..=self.long_time_samples).map(|j| (0.5 + j as f64 * golden_inv).fract() * self.long_time_horizon))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub q: f64,
    pub source: i64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Running maximum of `values` in sample order.
    pub running_sup: Vec<f64>,
}

impl MomentSeries {
    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRun {
    pub source: i64,
    pub series: Vec<MomentSeries>,
    /// `max_t | ||psi(t)||^2 - 1 |`.
    pub max_norm_error: f64,
    /// Per series, `max_t (M_q(t) - E_q) / max(1, E_q)` when an envelope was supplied.
    pub domination_excess: Option<Vec<f64>>,
}

pub fn moment_series(
    sd: &SpectralData,
    source: i64,
    qs: &[f64],
    times: &[f64],
    envelope: Option<&Envelope>,
) -> Result<MomentRun> {
    moment_series_with(Execution::default(), sd, source, qs, times, envelope)
}

/// Moments `M_q(t)` for every `q` and time. Blocks of times are evaluated in
/// parallel under [`Execution::Parallel`]; results are identical either way.
pub fn moment_series_with(
    exec: Execution,
    sd: &SpectralData,
    source: i64,
    qs: &[f64],
    times: &[f64],
    envelope: Option<&Envelope>,
) -> Result<MomentRun> {
    check_source(sd, source)?;
    if let Some(env) = envelope {
        if env.source != source || env.half_width != sd.half_width() {
            return Err(Error::InvalidArgument("envelope was computed for a different source or box".into()));
        }
        for &q in qs {
            env.moment(q).ok_or_else(|| Error::InvalidArgument(format!("envelope lacks q = {q}")))?;
        }
    }
    let n = sd.half_width() as i64;
    let weights: Vec<Vec<f64>> = qs
        .iter()
        .map(|&q| (-n..=n).map(|s| site_weight(s, q)).collect())
        .collect();
    let prop = Propagator::new(sd, &delta(sd, source));
    let blocks: Vec<&[f64]> = times.chunks(TIME_BLOCK).collect();
    // per block: (moments[q][t], norm error)
    let per_block = exec.map_slice(&blocks, |block| {
        let packets = prop.block(block);
        let mut norm_err = 0.0_f64;
        let mut vals = vec![Vec::with_capacity(block.len()); qs.len()];
        for p in &packets {
            let probs: Vec<f64> = p.amplitudes.iter().map(|z| z.norm_sqr()).collect();
            norm_err = norm_err.max((probs.iter().sum::<f64>() - 1.0).abs());
            for (v, w) in vals.iter_mut().zip(&weights) {
                v.push(w.iter().zip(&probs).map(|(a, b)| a * b).sum());
            }
        }
        (vals, norm_err)
    });

    let max_norm_error = per_block.iter().fold(0.0_f64, |a, (_, e)| a.max(*e));
    let series: Vec<MomentSeries> = qs
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let values: Vec<f64> = per_block.iter().flat_map(|(v, _)| v[i].iter().copied()).collect();
            let running_sup = values
                .iter()
                .scan(f64::NEG_INFINITY, |acc, &v| {
                    *acc = acc.max(v);
                    Some(*acc)
                })
                .collect();
            MomentSeries { q, source, times: times.to_vec(), values, running_sup }
        })
        .collect();
    let domination_excess = envelope.map(|env| {
        series
            .iter()
            .map(|s| {
                let e = env.moment(s.q).expect("checked above").value;
                s.values.iter().fold(f64::NEG_INFINITY, |a, &m| a.max((m - e) / e.max(1.0)))
            })
            .collect()
    });
    Ok(MomentRun { source, series, max_norm_error, domination_excess })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMoment {
    pub q: f64,
    /// `E_q = sum_n |n|^q B(n, k)^2`.
    pub value: f64,
    /// Fraction of `E_q` carried by sites outside the interior window.
    pub boundary_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub source: i64,
    pub half_width: usize,
    pub window: usize,
    /// `B(n, k) = sum_m |phi_m(k)| |phi_m(n)|` on sites `-N..=N`.
    pub majorant: Vec<f64>,
    pub moments: Vec<EnvelopeMoment>,
}

impl Envelope {
    pub fn moment(&self, q: f64) -> Option<&EnvelopeMoment> {
        self.moments.iter().find(|m| m.q == q)
    }

    pub fn at(&self, site: i64) -> Option<f64> {
        let row = site + self.half_width as i64;
        (row >= 0).then(|| self.majorant.get(row as usize).copied()).flatten()
    }
}

pub fn envelope(sd: &SpectralData, source: i64, qs: &[f64]) -> Result<Envelope> {
    check_source(sd, source)?;
    let n = sd.half_width() as i64;
    let d = sd.dimension();
    let src_row = (source + n) as usize;
    let mut majorant = vec![0.0; d];
    for m in 0..d {
        let w = sd.basis().abs(m, src_row);
        if w == 0.0 {
            continue;
        }
        for (b, phi) in majorant.iter_mut().zip(sd.basis().mode_moduli(m)) {
            *b += w * phi;
        }
    }
    let limit = sd.interior_limit();
    let moments = qs
        .iter()
        .map(|&q| {
            let (mut total, mut boundary) = (0.0, 0.0);
            for (row, b) in majorant.iter().enumerate() {
                let site = row as i64 - n;
                let term = site_weight(site, q) * b * b;
                total += term;
                if site.abs() > limit {
                    boundary += term;
                }
            }
            let boundary_share = if total > 0.0 { boundary / total } else { 0.0 };
            EnvelopeMoment { q, value: total, boundary_share }
        })
        .collect();
    Ok(Envelope {
        source,
        half_width: sd.half_width(),
        window: sd.window(),
        majorant,
        moments,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    /// `alpha <= 3/2 + q/2`; nothing is claimed.
    HypothesisNotSatisfied,
    /// No doubled box, or the envelope leaks into the boundary window.
    Inconclusive,
    /// Envelope moment stable under doubling of the box.
    Bounded,
    /// Envelope moment grew by at least the ratio limit under doubling.
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVerdict {
    pub alpha: f64,
    pub q: f64,
    pub source: i64,
    pub hypothesis_holds: bool,
    pub envelope: f64,
    pub boundary_share: f64,
    pub doubled_envelope: Option<f64>,
    pub doubled_boundary_share: Option<f64>,
    /// `E_q(2N) / E_q(N)`, `1` when both vanish.
    pub doubling_ratio: Option<f64>,
    pub status: VerdictStatus,
}

/// Checks that decay at rate `alpha > 3/2 + q/2` keeps the envelope moment of
/// order `q` bounded, by comparing `E_q` on the box of `sd` with `E_q` on a box of
/// twice the half-width.
pub fn ule_implies_bounded_moments_check(
    sd: &SpectralData,
    doubled: Option<&SpectralData>,
    ule: &UleReport,
    source: i64,
    q: f64,
) -> Result<MomentVerdict> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("moment order must be positive, got {q}")));
    }
    let hypothesis_holds = ule.gamma_alpha.is_finite() && ule.alpha > 1.5 + q / 2.0;
    let base = envelope(sd, source, &[q])?;
    let base_m = base.moments[0].clone();
    let doubled_m = doubled
        .map(|dd| envelope(dd, source, &[q]).map(|e| e.moments[0].clone()))
        .transpose()?;
    let doubling_ratio = doubled_m.as_ref().map(|dm| {
        if dm.value == 0.0 && base_m.value == 0.0 {
            1.0
        } else {
            dm.value / base_m.value
        }
    });
    let status = if !hypothesis_holds {
        VerdictStatus::HypothesisNotSatisfied
    } else {
        match doubling_ratio {
            None => VerdictStatus::Inconclusive,
            Some(_) if base_m.boundary_share >= BOUNDARY_SHARE_LIMIT => VerdictStatus::Inconclusive,
            Some(r) if r < DOUBLING_RATIO_LIMIT => VerdictStatus::Bounded,
            Some(_) => VerdictStatus::Unbounded,
        }
    };
    Ok(MomentVerdict {
        alpha: ule.alpha,
        q,
        source,
        hypothesis_holds,
        envelope: base_m.value,
        boundary_share: base_m.boundary_share,
        doubled_envelope: doubled_m.as_ref().map(|m| m.value),
        doubled_boundary_share: doubled_m.as_ref().map(|m| m.boundary_share),
        doubling_ratio,
        status,
    })
}
