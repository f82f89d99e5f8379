//! Two-term matched asymptotic solution of the relaxation problem.
//!
//! Everything is computed in the eigen-coordinates `w = T^{-1} u`, where the outer
//! problems decouple into scalar transport equations and the layer problems into
//! scalar ODEs in `xi = x / eps`. With `d_j = a_j - lambda_j^2` and `W = T^{-1} u0`:
//!
//! * `w0_j = W_j(x - lambda_j t)` ahead of the characteristic through the corner and
//!   `w0_j = beta_j(t - x / lambda_j)` behind it, `beta = H alpha^- + J`.
//! * The source of `w1_j` is `d_j w0_j''`, constant along characteristics, so
//!   `w1_j = d_j t W_j''(x - lambda_j t)` ahead and
//!   `w1_j = gamma_j(tau) + d_j x beta_j''(tau) / lambda_j^3` behind.
//! * Layer modes `j > l` decay like `exp(lambda_j xi / a_j)`; the first-order layer has
//!   the resonant factor `(psi1_j(0,t) + c_j xi)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bc::ConstructedBC;
use crate::error::{Error, Result};
use crate::linalg::{self, inverse_checked};
use crate::model::SpectralModel;
use crate::profile::SmoothProfile;
use crate::signal::TimeFunction;

type Jet = Vec<DVector<f64>>;

fn lin(m: &DMatrix<f64>, j: &Jet) -> Jet {
    j.iter().map(|v| m * v).collect()
}

fn add(a: &Jet, b: &Jet) -> Jet {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &Jet, b: &Jet) -> Jet {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn stack(top: &Jet, bottom: &Jet) -> Jet {
    top.iter()
        .zip(bottom)
        .map(|(a, b)| DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied()))
        .collect()
}

fn zeros(dim: usize, order: usize) -> Jet {
    vec![DVector::zeros(dim); order + 1]
}

/// Orthonormal splitting of the boundary equations into outer and layer parts.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionMatrices {
    /// `l x n`, annihilates `(B_p - B_u F^{-1}) R1S`.
    #[serde(with = "linalg::serde_rows")]
    pub bhat1: DMatrix<f64>,
    /// `(n - l) x n`, rows spanning the range of `(B_p - B_u F^{-1}) R1S`.
    #[serde(with = "linalg::serde_rows")]
    pub bhat2: DMatrix<f64>,
    /// `(B_p - B_u F^{-1}) R1S`.
    #[serde(with = "linalg::serde_rows")]
    pub k: DMatrix<f64>,
    /// Condition number of `Bhat1 B_u R1U`.
    pub cond_outer: f64,
    /// Condition number of `Bhat2 (B_p - B_u F^{-1}) R1S`.
    pub cond_layer: f64,
    #[serde(skip)]
    outer_inv: DMatrix<f64>,
    #[serde(skip)]
    layer_inv: DMatrix<f64>,
}

impl ReductionMatrices {
    /// Max-abs of `Bhat1 K`.
    pub fn annihilation_residual(&self) -> f64 {
        linalg::norm_inf(&(&self.bhat1 * &self.k))
    }
}

pub fn reduction_matrices(model: &SpectralModel, bc: &ConstructedBC) -> Result<ReductionMatrices> {
    let (n, l) = (model.n, model.l);
    let k = (&bc.bp - &bc.bu * &model.f_inv) * model.r1s();
    let (bhat1, bhat2) = if l == n {
        (DMatrix::identity(n, n), DMatrix::zeros(0, n))
    } else {
        let b1 = linalg::complement_rows(&k, 1e-10);
        if b1.nrows() != l {
            return Err(Error::ReductionFailure(format!(
                "left null space of (B_p - B_u F^-1) R1S has dimension {}, expected {l}",
                b1.nrows()
            )));
        }
        (b1, linalg::column_basis(&k, 1e-10).transpose())
    };
    let fail = |what: &str, e: Error| Error::ReductionFailure(format!("{what} is not invertible: {e}"));
    let (outer_inv, cond_outer) = inverse_checked(&(&bhat1 * &bc.bu * model.r1u())).map_err(|e| fail("Bhat1 B_u R1U", e))?;
    let (layer_inv, cond_layer) = inverse_checked(&(&bhat2 * &k)).map_err(|e| fail("Bhat2 (B_p - B_u F^-1) R1S", e))?;
    Ok(ReductionMatrices { bhat1, bhat2, k, cond_outer, cond_layer, outer_inv, layer_inv })
}

/// Outer fields and their derivatives at one point, in physical coordinates.
#[derive(Clone, Debug)]
pub struct OuterPoint {
    pub u0: DVector<f64>,
    pub u0_x: DVector<f64>,
    pub u0_xx: DVector<f64>,
    pub u0_t: DVector<f64>,
    pub u1: DVector<f64>,
    pub u1_x: DVector<f64>,
    pub u1_t: DVector<f64>,
    pub p1: DVector<f64>,
    pub p1_x: DVector<f64>,
    pub p1_t: DVector<f64>,
}

/// Layer fields and their derivatives at one `(xi, t)`, in physical coordinates.
#[derive(Clone, Debug)]
pub struct LayerPoint {
    pub nu0: DVector<f64>,
    pub nu0_xi: DVector<f64>,
    pub nu0_t: DVector<f64>,
    pub mu0: DVector<f64>,
    pub mu0_xi: DVector<f64>,
    pub mu0_t: DVector<f64>,
    pub nu1: DVector<f64>,
    pub nu1_xi: DVector<f64>,
    pub nu1_t: DVector<f64>,
    pub mu1: DVector<f64>,
    pub mu1_xi: DVector<f64>,
    pub mu1_t: DVector<f64>,
}

#[derive(Debug)]
struct Core {
    model: SpectralModel,
    bc: ConstructedBC,
    red: ReductionMatrices,
    w0: SmoothProfile,
    gap: DVector<f64>,
    kappa: DVector<f64>,
}

impl Core {
    fn lm(&self) -> (usize, usize) {
        (self.model.l, self.model.n)
    }

    /// `alpha^-_k(t) = W_k(-lambda_k t)`, `k > l`.
    fn alpha_minus(&self, t: f64, order: usize) -> Jet {
        self.incoming(t, order, 0)
    }

    /// Time jet of `W_k^(shift)(-lambda_k t)`, `k > l`.
    fn incoming(&self, t: f64, order: usize, shift: usize) -> Jet {
        let (l, n) = self.lm();
        (0..=order)
            .map(|m| {
                DVector::from_iterator(
                    n - l,
                    (l..n).map(|k| {
                        let lam = self.model.lambda[k];
                        (-lam).powi(m as i32) * self.w0.component_derivative(k, -lam * t, m + shift)
                    }),
                )
            })
            .collect()
    }

    /// `beta = H alpha^- + J`, the outgoing traces of `w0` at `x = 0`.
    fn beta(&self, t: f64, order: usize) -> Jet {
        if self.model.l == 0 {
            return zeros(0, order);
        }
        add(&lin(&self.bc.h, &self.alpha_minus(t, order)), &self.bc.j.jet(t, order))
    }

    fn w0_boundary(&self, t: f64, order: usize) -> Jet {
        stack(&self.beta(t, order), &self.alpha_minus(t, order))
    }

    fn u0_boundary(&self, t: f64, order: usize) -> Jet {
        lin(&self.model.t, &self.w0_boundary(t, order))
    }

    /// Time jet of `d/dx w0(0, t)`.
    fn w0x_boundary(&self, t: f64, order: usize) -> Jet {
        let l = self.model.l;
        let beta = self.beta(t, order + 1);
        let out: Jet = (0..=order)
            .map(|m| DVector::from_iterator(l, (0..l).map(|j| -beta[m + 1][j] / self.model.lambda[j])))
            .collect();
        stack(&out, &self.incoming(t, order, 1))
    }

    /// `psi0(0, t)`, the nonzero block of `T^{-1} nu0(0, t)`.
    fn psi0(&self, t: f64, order: usize) -> Jet {
        let (l, n) = self.lm();
        if l == n {
            return zeros(0, order);
        }
        let rhs = sub(&self.bc.b0.jet(t, order), &lin(&self.bc.bu, &self.u0_boundary(t, order)));
        lin(&(&self.red.layer_inv * &self.red.bhat2), &rhs)
    }

    /// `int_0^inf d/dt mu0 ds = T diag(a_j / lambda_j^2) psi0'(0, t)`.
    fn layer_integral(&self, t: f64, order: usize) -> Jet {
        let (l, n) = self.lm();
        if l == n {
            return zeros(n, order);
        }
        let psi = self.psi0(t, order + 1);
        let scale = DVector::from_iterator(n - l, (l..n).map(|k| self.model.a[k] / self.model.lambda[k].powi(2)));
        let low: Jet = psi[1..].iter().map(|v| v.component_mul(&scale)).collect();
        lin(&self.model.t, &stack(&zeros(l, order), &low))
    }

    /// Incoming traces `w1_k(0, t) = d_k t W_k''(-lambda_k t)`, `k > l`.
    fn delta(&self, t: f64, order: usize) -> Jet {
        let (l, n) = self.lm();
        let g = self.incoming(t, order, 2);
        let dk = self.gap.rows(l, n - l).into_owned();
        (0..=order)
            .map(|m| {
                let mut v = &g[m] * t;
                if m > 0 {
                    v += &g[m - 1] * m as f64;
                }
                v.component_mul(&dk)
            })
            .collect()
    }

    /// `b1 + B_p (Abar - F^2) u0_x(0, t) - B_u F^{-1} int_0^inf mu0_t ds`.
    fn r1(&self, t: f64, order: usize) -> Jet {
        let m = &self.model;
        let ux = lin(&(&self.bc.bp * m.abar_minus_f2() * &m.t), &self.w0x_boundary(t, order));
        let tail = lin(&(&self.bc.bu * &m.f_inv), &self.layer_integral(t, order));
        sub(&add(&self.bc.b1.jet(t, order), &ux), &tail)
    }

    /// Outgoing traces of `w1` at `x = 0`.
    fn gamma(&self, t: f64, order: usize) -> Jet {
        let l = self.model.l;
        if l == 0 {
            return zeros(0, order);
        }
        let rhs = sub(&self.r1(t, order), &lin(&(&self.bc.bu * self.model.r1s()), &self.delta(t, order)));
        lin(&(&self.red.outer_inv * &self.red.bhat1), &rhs)
    }

    fn u1_boundary(&self, t: f64, order: usize) -> Jet {
        lin(&self.model.t, &stack(&self.gamma(t, order), &self.delta(t, order)))
    }

    /// `psi1(0, t)`, the nonzero block of `T^{-1} nu1(0, t)`.
    fn zeta(&self, t: f64, order: usize) -> Jet {
        let (l, n) = self.lm();
        if l == n {
            return zeros(0, order);
        }
        let rhs = sub(&self.r1(t, order), &lin(&self.bc.bu, &self.u1_boundary(t, order)));
        lin(&(&self.red.layer_inv * &self.red.bhat2), &rhs)
    }

    fn outer(&self, x: f64, t: f64) -> Result<OuterPoint> {
        check_domain(x, t)?;
        let m = &self.model;
        let n = m.n;
        let mut w = [(); 8].map(|_| DVector::<f64>::zeros(n));
        let [w0, w0x, w0xx, w0t, w1, w1x, w1t, w0xt] = &mut w;
        for j in 0..n {
            let lam = m.lambda[j];
            let d = self.gap[j];
            if j >= m.l || x >= lam * t {
                let s = x - lam * t;
                let v: Vec<f64> = (0..=3).map(|k| self.w0.component_derivative(j, s, k)).collect();
                w0[j] = v[0];
                w0x[j] = v[1];
                w0xx[j] = v[2];
                w0t[j] = -lam * v[1];
                w0xt[j] = -lam * v[2];
                w1[j] = d * t * v[2];
                w1x[j] = d * t * v[3];
                w1t[j] = d * v[2] - lam * d * t * v[3];
            } else {
                let tau = t - x / lam;
                let b = self.beta(tau, 3);
                let g = self.gamma(tau, 1);
                let (b0, b1, b2, b3) = (b[0][j], b[1][j], b[2][j], b[3][j]);
                w0[j] = b0;
                w0x[j] = -b1 / lam;
                w0xx[j] = b2 / lam.powi(2);
                w0t[j] = b1;
                w0xt[j] = -b2 / lam;
                w1[j] = g[0][j] + d * x * b2 / lam.powi(3);
                w1x[j] = -g[1][j] / lam + d * b2 / lam.powi(3) - d * x * b3 / lam.powi(4);
                w1t[j] = g[1][j] + d * x * b3 / lam.powi(3);
            }
        }
        let t_ = &m.t;
        let neg_gap = -&self.gap;
        Ok(OuterPoint {
            u0: t_ * &*w0,
            u0_x: t_ * &*w0x,
            u0_xx: t_ * &*w0xx,
            u0_t: t_ * &*w0t,
            u1: t_ * &*w1,
            u1_x: t_ * &*w1x,
            u1_t: t_ * &*w1t,
            p1: t_ * w0x.component_mul(&neg_gap),
            p1_x: t_ * w0xx.component_mul(&neg_gap),
            p1_t: t_ * w0xt.component_mul(&neg_gap),
        })
    }

    fn layer(&self, xi: f64, t: f64) -> Result<LayerPoint> {
        check_domain(xi, t)?;
        let m = &self.model;
        let (l, n) = self.lm();
        let mut w = [(); 12].map(|_| DVector::<f64>::zeros(n));
        if l < n {
            let a = self.psi0(t, 2);
            let z = self.zeta(t, 1);
            let [p0, p0x, p0t, m0, m0x, m0t, p1, p1x, p1t, m1, m1x, m1t] = &mut w;
            for k in l..n {
                let i = k - l;
                let (lam, ak, kap) = (m.lambda[k], m.a[k], self.kappa[k]);
                let e = (kap * xi).exp();
                let (a0, a1, a2) = (a[0][i], a[1][i], a[2][i]);
                let (c, c_t) = (a1 / lam, a2 / lam);
                p0[k] = e * a0;
                p0x[k] = kap * e * a0;
                p0t[k] = e * a1;
                m0[k] = -p0[k] / lam;
                m0x[k] = -p0x[k] / lam;
                m0t[k] = -p0t[k] / lam;
                let lin_part = z[0][i] + c * xi;
                p1[k] = lin_part * e;
                p1x[k] = c * e + kap * lin_part * e;
                p1t[k] = (z[1][i] + c_t * xi) * e;
                let r = ak / lam.powi(3);
                m1[k] = -p1[k] / lam + r * e * a1;
                m1x[k] = -p1x[k] / lam + r * kap * e * a1;
                m1t[k] = -p1t[k] / lam + r * e * a2;
            }
        }
        let [nu0, nu0_xi, nu0_t, mu0, mu0_xi, mu0_t, nu1, nu1_xi, nu1_t, mu1, mu1_xi, mu1_t] = w.map(|v| &m.t * v);
        Ok(LayerPoint { nu0, nu0_xi, nu0_t, mu0, mu0_xi, mu0_t, nu1, nu1_xi, nu1_t, mu1, mu1_xi, mu1_t })
    }
}

fn check_domain(x: f64, t: f64) -> Result<()> {
    if x < 0.0 || t < 0.0 || !x.is_finite() || !t.is_finite() {
        return Err(Error::DomainError(format!("(x, t) = ({x}, {t}) lies outside the quarter plane")));
    }
    Ok(())
}

/// `ubar0`, `ubar1`, `pbar0 = 0` and `pbar1 = -(Abar - F^2) ubar0_x`.
#[derive(Clone, Debug)]
pub struct OuterSolution {
    core: Arc<Core>,
}

impl OuterSolution {
    pub fn eval(&self, x: f64, t: f64) -> Result<OuterPoint> {
        self.core.outer(x, t)
    }

    pub fn u0_bar(&self, x: f64, t: f64) -> Result<DVector<f64>> {
        Ok(self.eval(x, t)?.u0)
    }

    pub fn u1_bar(&self, x: f64, t: f64) -> Result<DVector<f64>> {
        Ok(self.eval(x, t)?.u1)
    }

    pub fn p1_bar(&self, x: f64, t: f64) -> Result<DVector<f64>> {
        Ok(self.eval(x, t)?.p1)
    }

    /// Time jet of `ubar0(0, t)`.
    pub fn u0_boundary(&self, t: f64, order: usize) -> Vec<DVector<f64>> {
        self.core.u0_boundary(t, order)
    }

    /// Time jet of `ubar1(0, t)`.
    pub fn u1_boundary(&self, t: f64, order: usize) -> Vec<DVector<f64>> {
        self.core.u1_boundary(t, order)
    }

    /// Time jet of `alpha^-(t)`.
    pub fn alpha_minus(&self, t: f64, order: usize) -> Vec<DVector<f64>> {
        self.core.alpha_minus(t, order)
    }
}

/// Boundary-layer correctors `nu0`, `nu1`, `mu0`, `mu1` as functions of `(xi, t)`.
#[derive(Clone, Debug)]
pub struct LayerSolution {
    core: Arc<Core>,
}

impl LayerSolution {
    pub fn eval(&self, xi: f64, t: f64) -> Result<LayerPoint> {
        self.core.layer(xi, t)
    }

    /// Decay rates `lambda_j / a_j` of the layer modes `j > l`.
    pub fn decay_rates(&self) -> Vec<f64> {
        let (l, n) = self.core.lm();
        (l..n).map(|k| self.core.kappa[k]).collect()
    }

    /// Time jet of `nu0(0, t)`.
    pub fn nu0_boundary(&self, t: f64, order: usize) -> Vec<DVector<f64>> {
        let l = self.core.model.l;
        lin(&self.core.model.t, &stack(&zeros(l, order), &self.core.psi0(t, order)))
    }

    /// Time jet of `nu1(0, t)`.
    pub fn nu1_boundary(&self, t: f64, order: usize) -> Vec<DVector<f64>> {
        let l = self.core.model.l;
        lin(&self.core.model.t, &stack(&zeros(l, order), &self.core.zeta(t, order)))
    }

    /// Resonant coefficients `c_j(t) = psi0_j'(0, t) / lambda_j`, `j > l`.
    pub fn resonant_coefficients(&self, t: f64) -> Vec<f64> {
        let l = self.core.model.l;
        let psi = self.core.psi0(t, 1);
        psi[1].iter().enumerate().map(|(i, v)| v / self.core.model.lambda[l + i]).collect()
    }

    /// `|nu0(0, t) - (C alpha^-(t) + D(t))|_inf`.
    pub fn nu0_consistency(&self, t: f64) -> f64 {
        let c = &self.core;
        if c.model.l == c.model.n {
            return 0.0;
        }
        let expected = &c.bc.c * &c.alpha_minus(t, 0)[0] + c.bc.d.eval(t);
        (&self.nu0_boundary(t, 0)[0] - expected).amax()
    }
}

/// `(u_eps, p_eps)` with all derivatives needed for the residual.
#[derive(Clone, Debug)]
pub struct AssembledPoint {
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    pub u_x: DVector<f64>,
    pub u_t: DVector<f64>,
    pub p_x: DVector<f64>,
    pub p_t: DVector<f64>,
    /// `eps (mu1_t ; y + nu1_t)`, the residual the expansion predicts.
    pub predicted_u: DVector<f64>,
    pub predicted_p: DVector<f64>,
}

/// The two-term expansion `u = ubar0 + eps ubar1 + mu0 + eps mu1`,
/// `p = eps pbar1 + nu0 + eps nu1`.
#[derive(Clone, Debug)]
pub struct AsymptoticSolution {
    core: Arc<Core>,
}

impl AsymptoticSolution {
    pub fn new(model: &SpectralModel, bc: &ConstructedBC, u0: &SmoothProfile) -> Result<Self> {
        if u0.dim() != model.n || bc.bu.nrows() != model.n {
            return Err(Error::DimensionMismatch(format!("profile has dimension {}, model {}", u0.dim(), model.n)));
        }
        let red = reduction_matrices(model, bc)?;
        let gap = DVector::from_iterator(model.n, (0..model.n).map(|j| model.gap(j)));
        let kappa = model.lambda.component_div(&model.a);
        let core = Core { model: model.clone(), bc: bc.clone(), red, w0: u0.map(&model.t_inv), gap, kappa };
        Ok(AsymptoticSolution { core: Arc::new(core) })
    }

    pub fn outer(&self) -> OuterSolution {
        OuterSolution { core: self.core.clone() }
    }

    pub fn layer(&self) -> LayerSolution {
        LayerSolution { core: self.core.clone() }
    }

    pub fn model(&self) -> &SpectralModel {
        &self.core.model
    }

    pub fn bc(&self) -> &ConstructedBC {
        &self.core.bc
    }

    pub fn reduction(&self) -> &ReductionMatrices {
        &self.core.red
    }

    /// `(u_eps, p_eps)(x, t)`.
    pub fn eval(&self, x: f64, t: f64, eps: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let a = self.assemble(x, t, eps)?;
        Ok((a.u, a.p))
    }

    pub fn assemble(&self, x: f64, t: f64, eps: f64) -> Result<AssembledPoint> {
        if !(eps > 0.0) {
            return Err(Error::DomainError(format!("eps = {eps} must be positive")));
        }
        let o = self.core.outer(x, t)?;
        let ly = self.core.layer(x / eps, t)?;
        let m = &self.core.model;
        let y = &o.p1_t + m.abar_minus_f2() * &o.u1_x - &m.f * &o.p1_x;
        Ok(AssembledPoint {
            u: &o.u0 + &o.u1 * eps + &ly.mu0 + &ly.mu1 * eps,
            p: &o.p1 * eps + &ly.nu0 + &ly.nu1 * eps,
            u_x: &o.u0_x + &o.u1_x * eps + &ly.mu0_xi / eps + &ly.mu1_xi,
            u_t: &o.u0_t + &o.u1_t * eps + &ly.mu0_t + &ly.mu1_t * eps,
            p_x: &o.p1_x * eps + &ly.nu0_xi / eps + &ly.nu1_xi,
            p_t: &o.p1_t * eps + &ly.nu0_t + &ly.nu1_t * eps,
            predicted_u: &ly.mu1_t * eps,
            predicted_p: (y + &ly.nu1_t) * eps,
        })
    }

    /// Boundary defect `B (u_eps, p_eps)(0, t) - b0(t) - eps b1(t)`.
    pub fn boundary_defect(&self, t: f64, eps: f64) -> Result<f64> {
        let (u, p) = self.eval(0.0, t, eps)?;
        let bc = &self.core.bc;
        let lhs = &bc.bu * u + &bc.bp * p;
        let rhs = bc.b0.eval(t) + bc.b1.eval(t) * eps;
        Ok((lhs - rhs).amax())
    }

    /// Samples on a set of abscissae; evaluation is parallel over points.
    pub fn sample(&self, xs: &[f64], t: f64, eps: f64) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
        use rayon::prelude::*;
        xs.par_iter().map(|&x| self.eval(x, t, eps)).collect()
    }
}

/// Residual of the relaxation system applied to the expansion on a grid at time `t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub t: f64,
    pub eps: f64,
    /// Discrete `L^2` norm of the computed residual `(R_u; R_p)`.
    pub l2: f64,
    /// Discrete `L^2` norm of the predicted residual.
    pub l2_predicted: f64,
    /// Largest pointwise gap between computed and predicted residuals.
    pub max_mismatch: f64,
    #[serde(skip)]
    pub field: Vec<DVector<f64>>,
}

/// Evaluate `u_t + F u_x + p_x` and `p_t + (Abar - F^2) u_x - F p_x + p / eps` by analytic
/// differentiation at uniformly spaced points `xs` (spacing taken from the first two).
pub fn residual(sol: &AsymptoticSolution, eps: f64, xs: &[f64], t: f64) -> Result<ResidualReport> {
    use rayon::prelude::*;
    let m = sol.model();
    let g = m.abar_minus_f2();
    let rows: Vec<(DVector<f64>, DVector<f64>)> = xs
        .par_iter()
        .map(|&x| {
            let a = sol.assemble(x, t, eps)?;
            let ru = &a.u_t + &m.f * &a.u_x + &a.p_x;
            let rp = &a.p_t + &g * &a.u_x - &m.f * &a.p_x + &a.p / eps;
            let computed = stack(&vec![ru], &vec![rp]).swap_remove(0);
            let predicted = stack(&vec![a.predicted_u], &vec![a.predicted_p]).swap_remove(0);
            Ok((computed, predicted))
        })
        .collect::<Result<_>>()?;
    let dx = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
    let l2 = (rows.iter().map(|(c, _)| c.norm_squared()).sum::<f64>() * dx).sqrt();
    let l2_predicted = (rows.iter().map(|(_, p)| p.norm_squared()).sum::<f64>() * dx).sqrt();
    let max_mismatch = rows.iter().map(|(c, p)| (c - p).amax()).fold(0.0, f64::max);
    Ok(ResidualReport { t, eps, l2, l2_predicted, max_mismatch, field: rows.into_iter().map(|(c, _)| c).collect() })
}
