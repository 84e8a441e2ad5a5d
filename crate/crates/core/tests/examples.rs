//! Worked examples on the free Stark operator and the power-law family.

use std::sync::OnceLock;

use ladderloc::dynamics::{envelope, moment_series, ule_implies_bounded_moments_check, VerdictStatus};
use ladderloc::localization::*;
use ladderloc::*;
use num_complex::Complex64;

fn h0(n: usize) -> SpectralData {
    let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
    diagonalize(build_operator(&k, &PotentialSpec::stark(), n).unwrap()).unwrap()
}

fn power_law(p: f64, pot: PotentialSpec, n: usize) -> SpectralData {
    let k = build_kernel(KernelParams::PowerLaw { exponent: p, cutoff: None }).unwrap();
    diagonalize(build_operator(&k, &pot, n).unwrap()).unwrap()
}

fn h0_200() -> &'static SpectralData {
    static CELL: OnceLock<SpectralData> = OnceLock::new();
    CELL.get_or_init(|| h0(200))
}

fn h0_400() -> &'static SpectralData {
    static CELL: OnceLock<SpectralData> = OnceLock::new();
    CELL.get_or_init(|| h0(400))
}

#[test]
fn free_stark_spectrum_is_integer_in_the_interior() {
    let sd = h0_200();
    for n in -100..=100 {
        assert!((sd.eigenvalue_at(n).unwrap() - n as f64).abs() <= 1e-8, "label {n}");
    }
    let rep = check_eigenvalue_asymptotics(sd).unwrap();
    assert!(rep.gamma_observed <= 1e-8);
    assert!((rep.gamma_theoretical - 3.0).abs() < 1e-12);
    assert!(rep.pass());
}

#[test]
fn free_stark_modes_peak_next_to_their_label() {
    // |phi_m(n)| = |J_{n-m}(2)|, and |J_1(2)| > |J_0(2)|: the peak is the pair
    // m - 1, m + 1, which the tie rule resolves to m - 1.
    let sd = h0_200();
    let p = sd.position_of(0).unwrap();
    assert_eq!(sd.centers()[p], -1);
    let moduli = sd.basis().mode_moduli(p);
    let at = |site: i64| moduli[(site + 200) as usize];
    assert!((at(0) - 0.223_890_779_141_235_7).abs() < 1e-10);
    assert!((at(1) - 0.576_724_807_756_873_4).abs() < 1e-10);
    assert!((at(-1) - at(1)).abs() < 1e-12);
    let rep = ule_constants(sd, 5.0).unwrap();
    assert_eq!(rep.max_center_offset, 1);
}

#[test]
fn free_stark_spectrum_stable_under_doubling() {
    let (a, b) = (h0_200(), h0_400());
    for n in a.interior_indices() {
        assert!((a.eigenvalue_at(n).unwrap() - b.eigenvalue_at(n).unwrap()).abs() <= 1e-8);
    }
    let ga = ule_constants(a, 5.0).unwrap().gamma_alpha;
    let gb = ule_constants(b, 5.0).unwrap().gamma_alpha;
    assert!(ga.is_finite());
    assert!((ga - gb).abs() / ga < 0.05, "{ga} vs {gb}");
}

#[test]
fn random_field_pinning_with_large_disorder() {
    let k = build_kernel(KernelParams::NearestNeighbor).unwrap();
    let pot = PotentialSpec::stark().with_perturbation(Perturbation::UniformRandom { amplitude: 5.0, seed: 1 });
    let sd = diagonalize(build_operator(&k, &pot, 400).unwrap()).unwrap();
    let rep = check_eigenvalue_asymptotics(&sd).unwrap();
    assert!(rep.gamma_theoretical <= 8.0 + 1e-12);
    assert!(rep.gamma_observed <= 8.0);
    assert!(rep.violations().is_empty());
}

#[test]
fn power_law_constant_stable_without_disorder() {
    let a = power_law(4.0, PotentialSpec::stark(), 200);
    let b = power_law(4.0, PotentialSpec::stark(), 400);
    let ga = check_power_law_ule(&a, 2).unwrap().gamma_alpha;
    let gb = check_power_law_ule(&b, 2).unwrap().gamma_alpha;
    assert!((ga - gb).abs() / ga < 0.05, "{ga} vs {gb}");
    assert!(check_power_law_ule(&a, 3).is_err());
}

#[test]
fn bootstrap_clean_on_free_stark_and_flags_corruption() {
    let sd = h0_200();
    let rep = bootstrap_inequality_check(sd, 3.0).unwrap();
    assert!(rep.pass(), "{:?}", &rep.violations[..rep.violations.len().min(3)]);
    let p = sd.position_of(0).unwrap();
    let corrupted = sd.with_modified_amplitude(p, 50, Complex64::new(0.1, 0.0));
    let rep = bootstrap_inequality_check(&corrupted, 3.0).unwrap();
    assert!(rep.violations.iter().any(|v| v.index == 0 && v.site == 50));
}

#[test]
fn free_stark_running_sup_settles_early() {
    let sd = h0_200();
    let short: Vec<f64> = (0..=100).map(f64::from).collect();
    let long: Vec<f64> = (0..=1000).map(f64::from).collect();
    let a = moment_series(sd, 0, &[1.0], &short, None).unwrap().series[0].sup();
    let b = moment_series(sd, 0, &[1.0], &long, None).unwrap().series[0].sup();
    assert!(a.is_finite() && a > 0.0);
    assert!((b - a).abs() / b <= 0.02, "{a} vs {b}");
}

#[test]
fn free_stark_moments_dominated_by_envelope() {
    let sd = h0_200();
    let env = envelope(sd, 0, &[2.0]).unwrap();
    assert!(env.moments[0].value.is_finite());
    let times: Vec<f64> = (0..4000).map(|j| j as f64 * 0.25).collect();
    let run = moment_series(sd, 0, &[2.0], &times, Some(&env)).unwrap();
    assert!(run.domination_excess.unwrap()[0] <= 1e-10);
}

#[test]
fn free_stark_verdict_bounded() {
    let ule = ule_constants(h0_200(), 5.0).unwrap();
    let v = ule_implies_bounded_moments_check(h0_200(), Some(h0_400()), &ule, 0, 4.0).unwrap();
    assert!(v.hypothesis_holds);
    assert!(v.doubling_ratio.unwrap() < 1.1);
    assert_eq!(v.status, VerdictStatus::Bounded);
}

#[test]
fn power_law_verdict_hypothesis_arithmetic() {
    let sd = power_law(3.0, PotentialSpec::stark(), 60);
    let ule = ule_constants(&sd, 2.0).unwrap();
    let v = ule_implies_bounded_moments_check(&sd, None, &ule, 0, 3.0).unwrap();
    assert!(!v.hypothesis_holds);
    assert_eq!(v.status, VerdictStatus::HypothesisNotSatisfied);
}

#[test]
fn power_law_envelope_stable_under_doubling() {
    let a = power_law(4.0, PotentialSpec::stark(), 200);
    let b = power_law(4.0, PotentialSpec::stark(), 400);
    let ea = envelope(&a, 0, &[2.5]).unwrap().moments[0].clone();
    let eb = envelope(&b, 0, &[2.5]).unwrap().moments[0].clone();
    assert!((eb.value / ea.value - 1.0).abs() < 0.1);
    assert!(ea.boundary_share < 0.01);
}
