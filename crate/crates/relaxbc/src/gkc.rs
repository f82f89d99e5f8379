//! Generalized Kreiss condition: stable eigenstructure of `M(eta, xi0)` and the
//! sampled lower bound of the normalized determinant.
//!
//! `M = A^{-1}(eta S - xi0 I)` with `S = diag(0, -I)`. Per wave family `j` the
//! eigenvalues solve `k^2 - (eta lambda_j / a_j) k - (eta + xi0) xi0 / a_j = 0`, and the
//! stable eigenvectors are the columns of `blockdiag(T, T) (I; Q)` with
//! `q_j = a_j k_j+ / (xi0 + eta) - lambda_j`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bc::{ConstructedBC, Q_BOUND_FACTOR};
use crate::error::{Error, Result};
use crate::model::SpectralModel;

/// Tolerance for telling the two root real parts apart.
pub const SPLIT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub eta: f64,
    pub xi0: Complex64,
}

impl FrequencyPoint {
    pub fn new(eta: f64, re: f64, im: f64) -> Self {
        FrequencyPoint { eta, xi0: Complex64::new(re, im) }
    }

    /// Rescaled onto `eta^2 + |xi0|^2 = 1`.
    pub fn normalized(self) -> Self {
        let r = (self.eta * self.eta + self.xi0.norm_sqr()).sqrt();
        FrequencyPoint { eta: self.eta / r, xi0: self.xi0 / r }
    }

    pub fn scaled(self, s: f64) -> Self {
        FrequencyPoint { eta: self.eta * s, xi0: self.xi0 * s }
    }

    pub fn is_interior(&self) -> bool {
        self.eta >= 0.0 && self.xi0.re > 0.0
    }
}

/// Roots `(k+, k-)` with `Re k+ > 0 > Re k-`.
pub fn kappa_pm(a: f64, lambda: f64, p: FrequencyPoint) -> Result<(Complex64, Complex64)> {
    let b = Complex64::new(p.eta * lambda / a, 0.0);
    let prod = -(p.xi0 + p.eta) * p.xi0 / a;
    let disc = (b * b - 4.0 * prod).sqrt();
    // Pick the larger-magnitude root first to avoid cancellation.
    let r1 = if (b.conj() * disc).re >= 0.0 { (b + disc) / 2.0 } else { (b - disc) / 2.0 };
    let r2 = if r1.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { prod / r1 };
    let scale = r1.norm().max(r2.norm()).max(f64::MIN_POSITIVE);
    let split = |x: Complex64| x.re / scale;
    let fail = || Error::EigenSplitFailure { eta: p.eta, xi0_re: p.xi0.re, xi0_im: p.xi0.im };
    let (s1, s2) = (split(r1), split(r2));
    if s1 > SPLIT_TOL && s2 < -SPLIT_TOL {
        Ok((r1, r2))
    } else if s2 > SPLIT_TOL && s1 < -SPLIT_TOL {
        Ok((r2, r1))
    } else {
        Err(fail())
    }
}

/// `q_j = a_j k+ / (xi0 + eta) - lambda_j`.
pub fn q_value(a: f64, lambda: f64, p: FrequencyPoint) -> Result<Complex64> {
    let (kp, _) = kappa_pm(a, lambda, p)?;
    Ok(a * kp / (p.xi0 + p.eta) - lambda)
}

/// Uniform bound `(sqrt 2 + 1) sqrt a` on `|q|`.
pub fn q_upper_bound(a: f64) -> f64 {
    Q_BOUND_FACTOR * a.sqrt()
}

/// Closed form of `h = q + lambda`.
pub fn h_closed_form(a: f64, lambda: f64, p: FrequencyPoint) -> Complex64 {
    let root = (4.0 * a * p.xi0 * p.xi0 + 4.0 * a * p.xi0 * p.eta + lambda * lambda * p.eta * p.eta).sqrt();
    (p.eta * lambda + root) / (2.0 * (p.xi0 + p.eta))
}

#[derive(Clone, Debug)]
pub struct StableBundle {
    pub kappa_plus: Vec<Complex64>,
    pub kappa_minus: Vec<Complex64>,
    pub q: Vec<Complex64>,
    /// `(I; Q)`.
    pub rtilde: DMatrix<Complex64>,
    /// `blockdiag(T, T) (I; Q)`.
    pub rms: DMatrix<Complex64>,
}

pub fn stable_bundle(model: &SpectralModel, p: FrequencyPoint) -> Result<StableBundle> {
    let n = model.n;
    let mut kp = Vec::with_capacity(n);
    let mut km = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for j in 0..n {
        let (a, l) = (model.a[j], model.lambda[j]);
        let (p1, m1) = kappa_pm(a, l, p)?;
        kp.push(p1);
        km.push(m1);
        q.push(a * p1 / (p.xi0 + p.eta) - l);
    }
    let mut rtilde = DMatrix::zeros(2 * n, n);
    for j in 0..n {
        rtilde[(j, j)] = Complex64::new(1.0, 0.0);
        rtilde[(n + j, j)] = q[j];
    }
    let tc = model.t.map(|v| Complex64::new(v, 0.0));
    let mut rms = DMatrix::zeros(2 * n, n);
    rms.view_mut((0, 0), (n, n)).copy_from(&(&tc * rtilde.view((0, 0), (n, n))));
    rms.view_mut((n, 0), (n, n)).copy_from(&(&tc * rtilde.view((n, 0), (n, n))));
    Ok(StableBundle { kappa_plus: kp, kappa_minus: km, q, rtilde, rms })
}

/// `M(eta, xi0) = A^{-1}(eta S - xi0 I)`.
pub fn m_matrix(model: &SpectralModel, p: FrequencyPoint) -> DMatrix<Complex64> {
    let n = model.n;
    let a = model.relaxation_matrix().map(|v| Complex64::new(v, 0.0));
    let a_inv = a.try_inverse().expect("A is invertible for a valid model");
    let mut rhs = DMatrix::from_diagonal_element(2 * n, 2 * n, -p.xi0);
    for j in n..2 * n {
        rhs[(j, j)] -= p.eta;
    }
    a_inv * rhs
}

/// `max |M R - R diag(k-)|`.
pub fn eigen_residual(model: &SpectralModel, p: FrequencyPoint, b: &StableBundle) -> f64 {
    let m = m_matrix(model, p);
    let lhs = &m * &b.rms;
    let rhs = &b.rms * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(b.kappa_minus.clone()));
    (lhs - rhs).iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Precomputed `B~_u`, `B~_p` for repeated ratio evaluations.
#[derive(Clone, Debug)]
pub struct RatioEvaluator {
    but: DMatrix<Complex64>,
    bpt: DMatrix<Complex64>,
    a: Vec<f64>,
    lambda: Vec<f64>,
}

impl RatioEvaluator {
    pub fn new(bc: &ConstructedBC, model: &SpectralModel) -> Self {
        RatioEvaluator {
            but: (&bc.bu * &model.t).map(|v| Complex64::new(v, 0.0)),
            bpt: (&bc.bp * &model.t).map(|v| Complex64::new(v, 0.0)),
            a: model.a.iter().copied().collect(),
            lambda: model.lambda.iter().copied().collect(),
        }
    }

    /// `|det(B~_u + B~_p Q)| / sqrt(prod(1 + |q_j|^2))`; zero where the roots do not split.
    pub fn ratio(&self, p: FrequencyPoint) -> f64 {
        let n = self.a.len();
        let mut m = self.but.clone();
        let mut vol = 1.0;
        for j in 0..n {
            let q = match q_value(self.a[j], self.lambda[j], p) {
                Ok(q) => q,
                Err(_) => return 0.0,
            };
            vol *= 1.0 + q.norm_sqr();
            for i in 0..n {
                m[(i, j)] += self.bpt[(i, j)] * q;
            }
        }
        m.determinant().norm() / vol.sqrt()
    }
}

pub fn gkc_ratio(bc: &ConstructedBC, model: &SpectralModel, p: FrequencyPoint) -> f64 {
    RatioEvaluator::new(bc, model).ratio(p)
}

/// Samples of `h(i theta) - lambda` along the imaginary axis of `xi0`.
pub fn q_boundary_curve(a: f64, lambda: f64, eta: f64, thetas: &[f64]) -> Vec<Complex64> {
    thetas
        .iter()
        .map(|&th| {
            // Limit from the right half plane.
            let re = 1e-13 * (eta + th.abs()).max(1e-300);
            let p = FrequencyPoint::new(eta, re, th);
            q_value(a, lambda, p).unwrap_or_else(|_| h_closed_form(a, lambda, p) - lambda)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSpec {
    /// Polar samples `psi` with `eta = cos psi`, `|xi0| = sin psi`.
    pub n_psi: usize,
    /// Argument samples of `xi0`; odd counts include the real axis.
    pub n_phi: usize,
    /// Samples per `Re xi0 = delta` line.
    pub n_boundary: usize,
    pub deltas: Vec<f64>,
    pub tol_pass: f64,
    pub tol_fail: f64,
    /// Relative change allowed between base and refined sampling.
    pub refine_tol: f64,
    pub refine_factor: usize,
    /// Local minimization started from the best samples.
    pub polish_starts: usize,
    /// Extra uniformly random points; needs `seed`.
    pub n_random: usize,
    pub seed: Option<u64>,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            n_psi: 40,
            n_phi: 41,
            n_boundary: 201,
            deltas: vec![1e-2, 1e-4, 1e-6],
            tol_pass: 1e-3,
            tol_fail: 1e-6,
            refine_tol: 0.1,
            refine_factor: 2,
            polish_starts: 6,
            n_random: 0,
            seed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificationReport {
    pub c_hat: f64,
    pub argmin: FrequencyPoint,
    pub verdict: Verdict,
    pub samples_used: usize,
    pub c_hat_base: f64,
    pub c_hat_refined: f64,
    /// Minimum along each `Re xi0 = delta` line.
    pub c_hat_by_delta: Vec<(f64, f64)>,
    /// Minimum on the `eta = 0` ring, the large-`|xi0|` asymptote.
    pub c_hat_eta_zero: f64,
}

/// Map `(psi, phi)` to a normalized point, keeping `Re xi0 >= delta`.
fn polar_point(psi: f64, phi: f64, delta: f64) -> FrequencyPoint {
    let psi = psi.clamp(0.0, std::f64::consts::FRAC_PI_2);
    let (s, c) = psi.sin_cos();
    let s = s.max(delta);
    let max_phi = (delta / s).min(1.0).acos();
    let phi = phi.clamp(-max_phi, max_phi);
    FrequencyPoint { eta: c.max(0.0), xi0: Complex64::from_polar(s, phi) }.normalized()
}

fn sample_set(spec: &SamplingSpec, factor: usize) -> (Vec<FrequencyPoint>, Vec<(f64, std::ops::Range<usize>)>, std::ops::Range<usize>) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let n_psi = spec.n_psi * factor;
    let n_phi = spec.n_phi * factor + usize::from(spec.n_phi * factor % 2 == 0);
    let n_b = spec.n_boundary * factor;
    let dmin = spec.deltas.iter().copied().fold(f64::INFINITY, f64::min).min(1e-2);
    let mut pts = Vec::new();
    for i in 0..n_psi {
        let psi = (i as f64 + 0.5) / n_psi as f64 * FRAC_PI_2;
        for k in 0..n_phi {
            let phi = -FRAC_PI_2 + (k as f64 + 1.0) * PI / (n_phi as f64 + 1.0);
            pts.push(polar_point(psi, phi, dmin));
        }
    }
    let mut lines = Vec::new();
    for &delta in &spec.deltas {
        let start = pts.len();
        let r = (1.0 - delta * delta).sqrt();
        for k in 0..n_b {
            let s = -1.0 + 2.0 * k as f64 / (n_b - 1).max(1) as f64;
            let th = r * (FRAC_PI_2 * s).sin();
            let eta = (1.0 - delta * delta - th * th).max(0.0).sqrt();
            pts.push(FrequencyPoint::new(eta, delta, th));
        }
        for e in 0..12 {
            let th = delta * 10f64.powf(e as f64 * 0.5);
            if th < r {
                for sgn in [-1.0, 1.0] {
                    let eta = (1.0 - delta * delta - th * th).max(0.0).sqrt();
                    pts.push(FrequencyPoint::new(eta, delta, sgn * th));
                }
            }
        }
        lines.push((delta, start..pts.len()));
    }
    let ring_start = pts.len();
    for k in 0..n_b {
        let phi = -FRAC_PI_2 + (k as f64 + 0.5) * PI / n_b as f64;
        pts.push(polar_point(FRAC_PI_2, phi, dmin));
    }
    let ring = ring_start..pts.len();
    if let (Some(seed), true) = (spec.seed, spec.n_random > 0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(factor as u64));
        for _ in 0..spec.n_random * factor {
            let psi = rng.random_range(0.0..FRAC_PI_2);
            let phi = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            pts.push(polar_point(psi, phi, dmin));
        }
    }
    (pts, lines, ring)
}

/// Two-parameter Nelder-Mead on `(psi, phi)`.
fn polish(f: &dyn Fn(f64, f64) -> f64, start: (f64, f64), step: f64) -> ((f64, f64), f64) {
    let mut s = [start, (start.0 + step, start.1), (start.0, start.1 + step)];
    let mut v = s.map(|p| f(p.0, p.1));
    for _ in 0..400 {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
        s = idx.map(|i| s[i]);
        v = idx.map(|i| v[i]);
        let size = ((s[1].0 - s[0].0).abs() + (s[1].1 - s[0].1).abs() + (s[2].0 - s[0].0).abs() + (s[2].1 - s[0].1).abs()).max(0.0);
        if size < 1e-13 || v[0] == 0.0 {
            break;
        }
        let c = ((s[0].0 + s[1].0) / 2.0, (s[0].1 + s[1].1) / 2.0);
        let at = |t: f64| (c.0 + t * (s[2].0 - c.0), c.1 + t * (s[2].1 - c.1));
        let r = at(-1.0);
        let fr = f(r.0, r.1);
        if fr < v[0] {
            let e = at(-2.0);
            let fe = f(e.0, e.1);
            if fe < fr {
                s[2] = e;
                v[2] = fe;
            } else {
                s[2] = r;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = r;
            v[2] = fr;
        } else {
            let k = at(if fr < v[2] { -0.5 } else { 0.5 });
            let fk = f(k.0, k.1);
            if fk < v[2].min(fr) {
                s[2] = k;
                v[2] = fk;
            } else {
                for i in 1..3 {
                    s[i] = ((s[i].0 + s[0].0) / 2.0, (s[i].1 + s[0].1) / 2.0);
                    v[i] = f(s[i].0, s[i].1);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal)).unwrap();
    (s[best], v[best])
}

fn to_polar(p: FrequencyPoint) -> (f64, f64) {
    let r = (p.eta * p.eta + p.xi0.norm_sqr()).sqrt();
    ((p.xi0.norm() / r).clamp(0.0, 1.0).asin(), p.xi0.arg())
}

struct Pass {
    c_hat: f64,
    argmin: FrequencyPoint,
    by_delta: Vec<(f64, f64)>,
    ring: f64,
    used: usize,
}

fn run_pass(ev: &RatioEvaluator, spec: &SamplingSpec, factor: usize) -> Pass {
    let (pts, lines, ring) = sample_set(spec, factor);
    let vals: Vec<f64> = pts.par_iter().map(|&p| ev.ratio(p)).collect();
    let min_in = |r: std::ops::Range<usize>| vals[r].iter().copied().fold(f64::INFINITY, f64::min);
    let by_delta = lines.iter().map(|(d, r)| (*d, min_in(r.clone()))).collect();
    let ring_min = min_in(ring);
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
    let dmin = spec.deltas.iter().copied().fold(f64::INFINITY, f64::min).min(1e-2);
    let mut best = (vals[order[0]], pts[order[0]]);
    let starts: Vec<FrequencyPoint> = order.iter().take(spec.polish_starts).map(|&i| pts[i]).collect();
    let polished: Vec<(f64, FrequencyPoint)> = starts
        .par_iter()
        .map(|&p0| {
            let f = |psi: f64, phi: f64| ev.ratio(polar_point(psi, phi, dmin));
            let ((psi, phi), v) = polish(&f, to_polar(p0), 0.05 / factor as f64);
            (v, polar_point(psi, phi, dmin))
        })
        .collect();
    for (v, p) in polished {
        if v < best.0 {
            best = (v, p);
        }
    }
    Pass { c_hat: best.0, argmin: best.1, by_delta, ring: ring_min, used: pts.len() + spec.polish_starts * 400 }
}

/// Sampled estimate of the Kreiss constant with a three-way verdict.
pub fn certify(bc: &ConstructedBC, model: &SpectralModel, spec: &SamplingSpec) -> CertificationReport {
    let ev = RatioEvaluator::new(bc, model);
    let base = run_pass(&ev, spec, 1);
    let refined = run_pass(&ev, spec, spec.refine_factor.max(2));
    let (c_hat, argmin) = if refined.c_hat <= base.c_hat { (refined.c_hat, refined.argmin) } else { (base.c_hat, base.argmin) };
    let stable = (refined.c_hat - base.c_hat).abs() <= spec.refine_tol * base.c_hat.max(f64::MIN_POSITIVE);
    let by_delta = refined.by_delta.clone();
    let delta_stable = match by_delta.len() {
        0 | 1 => true,
        k => {
            let (a, b) = (by_delta[k - 2].1, by_delta[k - 1].1);
            (a - b).abs() <= spec.refine_tol * a.max(f64::MIN_POSITIVE) || a.min(b) > (1.0 + spec.refine_tol) * c_hat
        }
    };
    let verdict = if c_hat < spec.tol_fail {
        Verdict::Fail
    } else if c_hat > spec.tol_pass && stable && delta_stable {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    CertificationReport {
        c_hat,
        argmin,
        verdict,
        samples_used: base.used + refined.used,
        c_hat_base: base.c_hat,
        c_hat_refined: refined.c_hat,
        c_hat_by_delta: by_delta,
        c_hat_eta_zero: refined.ring.min(base.ring),
    }
}

/// Ratio field on the sampling grid, for CSV export.
pub fn ratio_field(bc: &ConstructedBC, model: &SpectralModel, spec: &SamplingSpec) -> Vec<(FrequencyPoint, f64)> {
    let ev = RatioEvaluator::new(bc, model);
    let (pts, _, _) = sample_set(spec, 1);
    pts.par_iter().map(|&p| (p, ev.ratio(p))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_at_eta_zero() {
        let (kp, km) = kappa_pm(4.0, 1.0, FrequencyPoint::new(0.0, 1.0, 0.0)).unwrap();
        assert!((kp - 0.5).norm() < 1e-15 && (km + 0.5).norm() < 1e-15);
    }

    #[test]
    fn kappa_by_hand() {
        let (kp, km) = kappa_pm(4.0, 1.0, FrequencyPoint::new(1.0, 1.0, 0.0)).unwrap();
        let s = (1.0f64 / 16.0 + 2.0).sqrt();
        assert!((kp.re - (0.25 + s) / 2.0).abs() < 1e-15);
        assert!((km.re - (0.25 - s) / 2.0).abs() < 1e-15);
        assert!((kp.re - 0.84307).abs() < 1e-5 && (km.re + 0.59307).abs() < 1e-5);
    }

    #[test]
    fn q_examples() {
        let p = FrequencyPoint::new(0.0, 0.3, 0.8);
        assert!((q_value(4.0, 1.0, p).unwrap() - 1.0).norm() < 1e-14);
        assert!((q_value(4.0, -1.0, p).unwrap() - 3.0).norm() < 1e-14);
        let q = q_value(4.0, 1.0, FrequencyPoint::new(1.0, 1.0, 0.0)).unwrap();
        assert!((q.re - 0.68614).abs() < 1e-5);
    }

    #[test]
    fn boundary_curve_ends() {
        let c = q_boundary_curve(4.0, -1.0, 1.0, &[0.0, 1e8, -1e8]);
        assert!((c[0] - 1.0).norm() < 1e-9);
        assert!((c[1] - 3.0).norm() < 1e-6 && (c[2] - 3.0).norm() < 1e-6);
    }

    #[test]
    fn closed_form_matches_roots() {
        let p = FrequencyPoint::new(0.7, 0.2, -0.5);
        for (a, l) in [(4.0, 1.0), (4.0, -1.0), (9.0, 2.5)] {
            let q = q_value(a, l, p).unwrap();
            assert!((h_closed_form(a, l, p) - l - q).norm() < 1e-13);
        }
    }
}
