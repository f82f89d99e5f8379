//! Initial data and boundary corrections that make the relaxation problem compatible
//! to order 2 at the corner `(x, t) = (0, 0)`.
//!
//! The relaxation initial data are `u = u0`, `p = -eps (Abar - F^2) u0' + eps^2 p02`
//! with `p02 = -2 F (Abar - F^2) u0''`. The corrections `b1`, `b2` are quadratics in `t`
//! whose jets at `t = 0` are `(B_u, B_p)` applied to the corner moment vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bc::{build_b0, ConstructedBC};
use crate::error::Result;
use crate::model::{GivenBoundaryCondition, SpectralModel};
use crate::profile::SmoothProfile;
use crate::signal::{SmoothSignal, TimeFunction};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Lowest power of `eps` that can appear in corner time derivatives up to order 2.
const MIN_POWER: i32 = -2;
const MAX_POWER: i32 = 2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelaxationInitialData {
    pub u_init: SmoothProfile,
    /// `-(Abar - F^2) u0'`, the coefficient of `eps`.
    pub p1: SmoothProfile,
    /// `p02`, the coefficient of `eps^2`.
    pub p02: SmoothProfile,
}

impl RelaxationInitialData {
    pub fn u(&self, x: f64) -> DVector<f64> {
        self.u_init.eval(x)
    }

    pub fn p(&self, x: f64, eps: f64) -> DVector<f64> {
        self.p1.eval(x) * eps + self.p02.eval(x) * (eps * eps)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IdentityCheck {
    pub order: usize,
    pub residual: f64,
    /// Residual norm of each `eps` power, lowest power first, when the identity is a
    /// polynomial in `eps`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_coefficients: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct CompatibilityReport {
    pub tol: f64,
    /// `Bhat (-F d/dx)^i u0(0) = bhat^(i)(0)`.
    pub given: Vec<IdentityCheck>,
    /// `(B_u, B_p) d^i/dt^i (u, p)(0, 0) = b_eps^(i)(0)`.
    pub relaxation: Vec<IdentityCheck>,
    /// `D^(i)(0) = -(0, C) T^{-1} (-F d/dx)^i u0(0)`.
    pub layer_datum: Vec<IdentityCheck>,
}

impl CompatibilityReport {
    pub fn pass(&self) -> bool {
        self.given.iter().chain(&self.relaxation).chain(&self.layer_datum).all(|c| c.pass)
    }

    pub fn worst(&self) -> f64 {
        self.given.iter().chain(&self.relaxation).chain(&self.layer_datum).map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn merge(mut self, other: CompatibilityReport) -> Self {
        self.given.extend(other.given);
        self.relaxation.extend(other.relaxation);
        self.layer_datum.extend(other.layer_datum);
        self
    }
}

fn check(order: usize, residual: f64, tol: f64) -> IdentityCheck {
    IdentityCheck { order, residual, eps_coefficients: Vec::new(), pass: residual.is_finite() && residual <= tol }
}

/// `(-F d/dx)^i u0(0)`.
fn corner_trace(model: &SpectralModel, u0: &SmoothProfile, i: usize) -> DVector<f64> {
    let mut v = u0.derivative(0.0, i);
    for _ in 0..i {
        v = -&model.f * v;
    }
    v
}

pub fn check_given_compat(model: &SpectralModel, given: &GivenBoundaryCondition, u0: &SmoothProfile, order: usize) -> CompatibilityReport {
    let order = order.min(3);
    let jet = given.signal.jet(0.0, order);
    let given_checks = (0..=order)
        .map(|i| {
            let r = (&given.bhat * corner_trace(model, u0, i) - &jet[i]).amax();
            check(i, r, DEFAULT_TOL)
        })
        .collect();
    CompatibilityReport { tol: DEFAULT_TOL, given: given_checks, ..Default::default() }
}

/// A cubic `bhat` whose jet at 0 satisfies the given-data identities for `u0`.
pub fn matched_bhat_signal(model: &SpectralModel, bhat: &DMatrix<f64>, u0: &SmoothProfile) -> SmoothSignal {
    let mut fact = 1.0;
    let coeffs: Vec<DVector<f64>> = (0..=3)
        .map(|i| {
            if i > 0 {
                fact *= i as f64;
            }
            bhat * corner_trace(model, u0, i) / fact
        })
        .collect();
    SmoothSignal::from_vector_coeffs(&coeffs, bhat.nrows())
}

pub fn build_initial_data(model: &SpectralModel, u0: &SmoothProfile) -> RelaxationInitialData {
    let g = model.abar_minus_f2();
    let p1 = u0.differentiated(1).map(&(-&g));
    let p02 = u0.differentiated(2).map(&(-2.0 * &model.f * &g));
    RelaxationInitialData { u_init: u0.clone(), p1, p02 }
}

/// Corner moment vectors `m_{i1}` and `m_{i2}`, `i = 0, 1, 2`, each of length `2n`.
pub fn moment_vectors(model: &SpectralModel, init: &RelaxationInitialData) -> ([DVector<f64>; 3], [DVector<f64>; 3]) {
    let n = model.n;
    let g = model.abar_minus_f2();
    let f = &model.f;
    let u2 = init.u_init.derivative(0.0, 2);
    let u3 = init.u_init.derivative(0.0, 3);
    let q = init.p02.jet(0.0, 2);
    let stack = |top: DVector<f64>, bottom: DVector<f64>| {
        let mut v = DVector::zeros(2 * n);
        v.rows_mut(0, n).copy_from(&top);
        v.rows_mut(n, n).copy_from(&bottom);
        v
    };
    let zero = DVector::zeros(n);
    let m01 = stack(zero.clone(), init.p1.eval(0.0));
    let m11 = stack(&g * &u2, -f * &g * &u2 - &q[0]);
    let m21 = stack(q[1].clone(), -&model.abar * &g * &u3 - 2.0 * f * &q[1]);
    let m02 = stack(zero.clone(), q[0].clone());
    let m12 = stack(-&q[1], f * &q[1]);
    let m22 = stack(zero, &model.abar * &q[2]);
    ([m01, m11, m21], [m02, m12, m22])
}

/// Quadratic `b1`, `b2` matching the corner jets.
pub fn build_b1_b2(model: &SpectralModel, bc: &ConstructedBC, u0: &SmoothProfile) -> (SmoothSignal, SmoothSignal) {
    let init = build_initial_data(model, u0);
    let (m1, m2) = moment_vectors(model, &init);
    let b = bc.full();
    let quad = |m: &[DVector<f64>; 3]| {
        let c = [&b * &m[0], &b * &m[1], &b * &m[2] / 2.0];
        SmoothSignal::from_vector_coeffs(&c, model.n)
    };
    (quad(&m1), quad(&m2))
}

/// Target jet `-(0, C) T^{-1} (-F d/dx)^i u0(0)` of `D` at `t = 0`.
fn d_target(model: &SpectralModel, bc: &ConstructedBC, u0: &SmoothProfile, i: usize) -> DVector<f64> {
    -&bc.c * (model.l1s() * corner_trace(model, u0, i))
}

/// Residuals of the layer-datum identity for `i = 0, 1, 2`; empty when `l = n`.
pub fn check_d_constraint(model: &SpectralModel, bc: &ConstructedBC, u0: &SmoothProfile) -> Vec<f64> {
    if model.l == model.n {
        return Vec::new();
    }
    let jet = bc.d.jet(0.0, 2);
    (0..=2).map(|i| (&jet[i] - d_target(model, bc, u0, i)).amax()).collect()
}

/// Quadratic `D` in the span of `R1S` with the required jet at 0.
pub fn regenerate_d(model: &SpectralModel, bc: &ConstructedBC, u0: &SmoothProfile) -> SmoothSignal {
    let c = [d_target(model, bc, u0, 0), d_target(model, bc, u0, 1), d_target(model, bc, u0, 2) / 2.0];
    SmoothSignal::from_vector_coeffs(&c, model.n)
}

/// Regenerate `D` when needed, rebuild `b0`, and attach `b1`, `b2`.
pub fn make_compatible(
    model: &SpectralModel,
    given: &GivenBoundaryCondition,
    bc: &ConstructedBC,
    u0: &SmoothProfile,
) -> Result<ConstructedBC> {
    let mut out = bc.clone();
    if model.l < model.n && check_d_constraint(model, bc, u0).iter().any(|r| *r > DEFAULT_TOL) {
        out.d = regenerate_d(model, bc, u0);
        out.b0 = build_b0(model, &out.bu, &out.bp, given, &out.d)?;
    }
    let (b1, b2) = build_b1_b2(model, &out, u0);
    out.b1 = b1;
    out.b2 = b2;
    Ok(out)
}

/// Laurent coefficients in `eps` of the `x`-derivatives of a state at `x = 0`.
/// `state[k][p]` is the coefficient of `eps^(p + MIN_POWER)` in `d^k/dx^k (u, p)(0)`.
type Laurent = Vec<Vec<DVector<f64>>>;

fn initial_laurent(model: &SpectralModel, init: &RelaxationInitialData, kmax: usize) -> Laurent {
    let n = model.n;
    let width = (MAX_POWER - MIN_POWER + 1) as usize;
    let at = |p: i32| (p - MIN_POWER) as usize;
    (0..=kmax)
        .map(|k| {
            let mut row = vec![DVector::zeros(2 * n); width];
            row[at(0)].rows_mut(0, n).copy_from(&init.u_init.derivative(0.0, k));
            row[at(1)].rows_mut(n, n).copy_from(&init.p1.derivative(0.0, k));
            row[at(2)].rows_mut(n, n).copy_from(&init.p02.derivative(0.0, k));
            row
        })
        .collect()
}

/// One application of `-A d/dx + eps^{-1} diag(0, -I)`, losing one `x`-derivative.
fn apply_generator(model: &SpectralModel, state: &Laurent) -> Laurent {
    let n = model.n;
    let a = model.relaxation_matrix();
    let width = state[0].len();
    (0..state.len() - 1)
        .map(|k| {
            (0..width)
                .map(|p| {
                    let mut v = -&a * &state[k + 1][p];
                    if p + 1 < width {
                        let src = &state[k][p + 1];
                        let mut lower = v.rows_mut(n, n);
                        lower -= src.rows(n, n);
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// Check the relaxation corner identities from the PDE applied to the initial data.
pub fn verify_relaxation_compat(
    model: &SpectralModel,
    bc: &ConstructedBC,
    init: &RelaxationInitialData,
    eps: f64,
) -> CompatibilityReport {
    let b = bc.full();
    let bj = [bc.b0.jet(0.0, 2), bc.b1.jet(0.0, 2), bc.b2.jet(0.0, 2)];
    let mut state = initial_laurent(model, init, 2);
    let mut checks = Vec::new();
    for i in 0..=2 {
        if i > 0 {
            state = apply_generator(model, &state);
        }
        let coeffs: Vec<DVector<f64>> = state[0]
            .iter()
            .enumerate()
            .map(|(p, v)| {
                let power = p as i32 + MIN_POWER;
                let mut r = &b * v;
                if (0..=2).contains(&power) {
                    r -= &bj[power as usize][i];
                }
                r
            })
            .collect();
        let total = coeffs
            .iter()
            .enumerate()
            .fold(DVector::zeros(model.n), |acc, (p, r)| acc + r * eps.powi(p as i32 + MIN_POWER));
        let norms: Vec<f64> = coeffs.iter().map(|r| r.amax()).collect();
        let pass = norms.iter().all(|r| *r <= DEFAULT_TOL);
        checks.push(IdentityCheck { order: i, residual: total.amax(), eps_coefficients: norms, pass });
    }
    CompatibilityReport { tol: DEFAULT_TOL, relaxation: checks, ..Default::default() }
}

/// Every identity: given data to order 3, layer datum and relaxation corner jets.
pub fn full_report(
    model: &SpectralModel,
    given: &GivenBoundaryCondition,
    bc: &ConstructedBC,
    u0: &SmoothProfile,
    eps: f64,
) -> CompatibilityReport {
    let init = build_initial_data(model, u0);
    let layer = check_d_constraint(model, bc, u0).into_iter().enumerate().map(|(i, r)| check(i, r, DEFAULT_TOL)).collect();
    check_given_compat(model, given, u0, 3)
        .merge(verify_relaxation_compat(model, bc, &init, eps))
        .merge(CompatibilityReport { tol: DEFAULT_TOL, layer_datum: layer, ..Default::default() })
}
