//! Independent reference implementations used by the integration tests. None of
//! these share code with the library beyond the public kernel/potential types.

#![allow(dead_code, clippy::needless_range_loop)]

use ladderloc::{HoppingKernel, PotentialSpec};
use num_complex::Complex64;

pub type CMat = Vec<Vec<Complex64>>;

/// Dense `H` by the defining double loop over sites.
pub fn naive_operator(kernel: &HoppingKernel, potential: &PotentialSpec, n: usize) -> CMat {
    let n = n as i64;
    let sites: Vec<i64> = (-n..=n).collect();
    sites
        .iter()
        .map(|&i| {
            sites
                .iter()
                .map(|&j| {
                    let mut h = if i == j { Complex64::new(0.0, 0.0) } else { kernel.coefficient(i - j) };
                    if i == j {
                        h += potential.field_value(i).unwrap() + potential.perturbation.value(i);
                    }
                    h
                })
                .collect()
        })
        .collect()
}

pub fn matvec(h: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    h.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Eigenvalues of a 3x3 Hermitian matrix from the trigonometric solution of the
/// characteristic cubic, ascending.
pub fn cubic_eigenvalues(a: &CMat) -> [f64; 3] {
    let q = (a[0][0].re + a[1][1].re + a[2][2].re) / 3.0;
    let p1 = a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr();
    let p2 = (0..3).map(|i| (a[i][i].re - q).powi(2)).sum::<f64>() + 2.0 * p1;
    if p2 == 0.0 {
        return [q; 3];
    }
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (a[i][j] - if i == j { Complex64::new(q, 0.0) } else { Complex64::new(0.0, 0.0) }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (det.re / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut e = [e1, e2, e3];
    e.sort_by(f64::total_cmp);
    e
}

/// Cyclic Jacobi rotations on the real `2d x 2d` embedding `[[A, -B], [B, A]]`
/// of `A + iB`; every eigenvalue appears twice there and is reported once.
pub fn jacobi_eigenvalues(h: &CMat) -> Vec<f64> {
    let d = h.len();
    let m = 2 * d;
    let mut a = vec![vec![0.0; m]; m];
    for i in 0..d {
        for j in 0..d {
            a[i][j] = h[i][j].re;
            a[i + d][j + d] = h[i][j].re;
            a[i][j + d] = -h[i][j].im;
            a[i + d][j] = h[i][j].im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    e.sort_by(f64::total_cmp);
    e.into_iter().step_by(2).collect()
}

/// Adaptive Dormand-Prince 5(4) integration of `i psi' = H psi` from 0 to `t`.
pub fn rk45_evolve(h: &CMat, psi0: &[Complex64], t: f64, tol: f64) -> Vec<Complex64> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let minus_i = Complex64::new(0.0, -1.0);
    let f = |y: &[Complex64]| -> Vec<Complex64> { matvec(h, y).into_iter().map(|z| minus_i * z).collect() };

    let mut y = psi0.to_vec();
    let mut time = 0.0;
    let mut dt = 1e-3_f64.min(t);
    while t - time > 1e-13 * t.max(1.0) {
        dt = dt.min(t - time);
        let mut k: Vec<Vec<Complex64>> = Vec::with_capacity(7);
        for stage in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let coef = A[stage][j];
                if coef != 0.0 {
                    for (a, b) in ys.iter_mut().zip(kj) {
                        *a += b * (coef * dt);
                    }
                }
            }
            k.push(f(&ys));
        }
        let mut y5 = y.clone();
        let mut err = 0.0_f64;
        for i in 0..y.len() {
            let mut d5 = Complex64::new(0.0, 0.0);
            let mut d4 = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                d5 += k[s][i] * B5[s];
                d4 += k[s][i] * B4[s];
            }
            y5[i] += d5 * dt;
            let scale = tol + tol * y[i].norm().max(y5[i].norm());
            err = err.max(((d5 - d4) * dt).norm() / scale);
        }
        if err <= 1.0 {
            time += dt;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        dt *= factor;
    }
    y
}

/// `sum_{m=1}^{terms} m^(-s)`
pub fn zeta_partial(s: f64, terms: u64) -> f64 {
    (1..=terms).rev().map(|m| (m as f64).powf(-s)).sum()
}
