//! Independent numerical oracles and random problem generators shared by the
//! integration tests.

#![allow(dead_code)]

pub mod criteria;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxbc::bc::{construct, ConstructedBC, ConstructionParams};
use relaxbc::model::{build_model, GivenBoundaryCondition, SpectralModel};
use relaxbc::profile::{BumpTerm, SmoothProfile};
use relaxbc::signal::SmoothSignal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Dormand-Prince 5(4) integration of `y' = f(x, y)`, returning the state at
/// each of the increasing abscissae `outputs`.
pub fn dopri45<F>(f: F, x0: f64, y0: &[f64], outputs: &[f64], rtol: f64, atol: f64) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

    let dim = y0.len();
    let mut x = x0;
    let mut y = y0.to_vec();
    let mut h: f64 = 1e-3;
    let mut out = Vec::with_capacity(outputs.len());
    for &target in outputs {
        while target - x > 1e-14 * target.abs().max(1.0) {
            let step = h.min(target - x);
            let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let ys: Vec<f64> = (0..dim).map(|i| y[i] + step * (0..s).map(|r| A[s][r] * k[r][i]).sum::<f64>()).collect();
                k.push(f(x + C[s] * step, &ys));
            }
            let y5: Vec<f64> = (0..dim).map(|i| y[i] + step * (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>()).collect();
            let err = (0..dim)
                .map(|i| {
                    let e = step * (0..7).map(|s| (B5[s] - B4[s]) * k[s][i]).sum::<f64>();
                    let sc = atol + rtol * y[i].abs().max(y5[i].abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / dim as f64;
            let err = err.sqrt();
            if err <= 1.0 {
                x += step;
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
        }
        out.push(y.clone());
    }
    out
}

const GK_X: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK_WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WK[7] * fc;
    let mut gauss = GK_WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_X[i]) + f(c + h * GK_X[i]);
        kron += GK_WK[i] * s;
        if i % 2 == 1 {
            gauss += GK_WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7, 15) quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, tol)];
    let mut total = 0.0;
    while let Some((lo, hi, tl)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        if e <= tl || hi - lo < 1e-12 * (b - a).abs() {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tl));
            stack.push((mid, hi, 0.5 * tl));
        }
    }
    total
}

/// `int_a^inf f` through `s = a + r / (1 - r)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    integrate(
        |r| {
            if r >= 1.0 {
                return 0.0;
            }
            let one = 1.0 - r;
            f(a + r / one) / (one * one)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Speed and relaxation coefficient with `a > lambda^2` and `lambda / a <= max_ratio`.
pub fn speed_pair(rng: &mut ChaCha8Rng, positive: bool, max_ratio: f64) -> (f64, f64) {
    let mag = rng.random_range(0.3..2.0);
    let lambda = if positive { mag } else { -mag };
    let floor = if positive { (mag / max_ratio).max(mag * mag) } else { mag * mag };
    (lambda, floor * rng.random_range(1.1..2.0))
}

/// Random strictly sub-characteristic model with `l` positive speeds and a
/// well-conditioned eigenbasis. Positive modes satisfy `lambda / a <= max_ratio`.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, l: usize, max_ratio: f64) -> SpectralModel {
    let mut lambda = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for j in 0..n {
        let (lam, aj) = speed_pair(rng, j < l, max_ratio);
        lambda.push(lam);
        a.push(aj);
    }
    let spread = 0.5 / n as f64;
    let t = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + rng.random_range(-spread..spread));
    build_model(t, DVector::from_vec(lambda), DVector::from_vec(a)).expect("diagonally dominant basis")
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// `Bhat` close to `L1U`, so that `Bhat R1U` stays invertible.
pub fn random_given(rng: &mut ChaCha8Rng, model: &SpectralModel, signal: SmoothSignal) -> GivenBoundaryCondition {
    let bhat = model.l1u() + random_matrix(rng, model.l, model.n, 0.3);
    GivenBoundaryCondition::new(model, bhat, signal).expect("perturbed L1U is admissible")
}

pub fn random_signal(rng: &mut ChaCha8Rng, dim: usize) -> SmoothSignal {
    let coeffs = (0..dim).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    SmoothSignal::polynomial(coeffs)
}

/// Layer datum `D = R1S d(t)`, so that `L1U D = 0`.
pub fn random_layer_datum(rng: &mut ChaCha8Rng, model: &SpectralModel) -> SmoothSignal {
    random_signal(rng, model.n - model.l).map(&model.r1s())
}

/// Gaussian bumps per component at random centers inside `[0.5, 2]`.
pub fn random_profile(rng: &mut ChaCha8Rng, dim: usize) -> SmoothProfile {
    let comps = (0..dim)
        .map(|_| {
            vec![BumpTerm {
                center: rng.random_range(0.5..2.0),
                width: rng.random_range(0.4..1.0),
                poly: vec![rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)],
            }]
        })
        .collect();
    SmoothProfile::new(comps).expect("positive widths")
}

/// Generic construction with random `C~`, `D` and `B_p R1U`.
pub fn random_construction(
    rng: &mut ChaCha8Rng,
    model: &SpectralModel,
    given: &GivenBoundaryCondition,
) -> relaxbc::Result<ConstructedBC> {
    let (n, l) = (model.n, model.l);
    let mut params = ConstructionParams::defaults(model);
    params.bpu_free = random_matrix(rng, n, l, 0.3);
    if l < n {
        params.ctilde = random_matrix(rng, n - l, n - l, 1.0);
        params.d = random_layer_datum(rng, model);
    }
    construct(model, given, &params)
}
