//! Initial-data profiles `u0(x)` built from polynomial-times-Gaussian bumps.
//!
//! A term is `P(s) exp(-s^2)` with `s = (x - center) / width`. Its derivatives are of the
//! same form, so every order is exact. Terms are cut off at `|s| > CUTOFF`, which makes the
//! support compact; the neglected tail is below `1e-27` relative.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::poly;

/// Cutoff in units of the bump width.
pub const CUTOFF: f64 = 8.0;
const CACHED_ORDERS: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BumpTerm {
    pub center: f64,
    pub width: f64,
    /// Ascending coefficients of `P(s)`.
    pub poly: Vec<f64>,
}

#[derive(Clone, Debug)]
struct CachedTerm {
    center: f64,
    width: f64,
    derivs: Vec<Vec<f64>>,
}

impl CachedTerm {
    fn new(t: &BumpTerm) -> Self {
        let mut derivs = vec![t.poly.clone()];
        for _ in 0..CACHED_ORDERS {
            derivs.push(next_poly(derivs.last().unwrap(), t.width));
        }
        CachedTerm { center: t.center, width: t.width, derivs }
    }

    fn eval(&self, x: f64, k: usize) -> f64 {
        let s = (x - self.center) / self.width;
        if s.abs() > CUTOFF {
            return 0.0;
        }
        let g = (-s * s).exp();
        if k < self.derivs.len() {
            return poly::eval(&self.derivs[k], s) * g;
        }
        let mut p = self.derivs.last().unwrap().clone();
        for _ in self.derivs.len()..=k {
            p = next_poly(&p, self.width);
        }
        poly::eval(&p, s) * g
    }
}

/// d/dx [P(s) e^{-s^2}] = (P'(s) - 2 s P(s)) e^{-s^2} / w.
fn next_poly(p: &[f64], width: f64) -> Vec<f64> {
    let mut out = poly::derivative(p);
    let mut shifted = vec![0.0];
    shifted.extend(p.iter().map(|v| -2.0 * v));
    poly::axpy(&mut out, 1.0, &shifted);
    out.iter_mut().for_each(|v| *v /= width);
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    components: Vec<Vec<BumpTerm>>,
}

/// Vector profile of `x` with analytic derivatives of every order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ProfileDoc", into = "ProfileDoc")]
pub struct SmoothProfile {
    terms: Vec<Vec<BumpTerm>>,
    cached: Vec<Vec<CachedTerm>>,
}

impl TryFrom<ProfileDoc> for SmoothProfile {
    type Error = Error;
    fn try_from(doc: ProfileDoc) -> Result<Self> {
        SmoothProfile::new(doc.components)
    }
}

impl From<SmoothProfile> for ProfileDoc {
    fn from(p: SmoothProfile) -> Self {
        ProfileDoc { components: p.terms }
    }
}

impl SmoothProfile {
    pub fn new(components: Vec<Vec<BumpTerm>>) -> Result<Self> {
        for t in components.iter().flatten() {
            if !(t.width > 0.0) || !t.center.is_finite() {
                return Err(Error::ConfigError(format!("bump term needs a positive width, got {}", t.width)));
            }
        }
        let cached = components.iter().map(|c| c.iter().map(CachedTerm::new).collect()).collect();
        Ok(SmoothProfile { terms: components, cached })
    }

    /// One Gaussian bump per component with the given amplitudes.
    pub fn gaussian(center: f64, width: f64, amps: &[f64]) -> Self {
        Self::new(amps.iter().map(|&a| vec![BumpTerm { center, width, poly: vec![a] }]).collect())
            .expect("valid gaussian")
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![Vec::new(); dim]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    /// Beyond this point the profile and all its derivatives vanish.
    pub fn x_max(&self) -> f64 {
        self.terms.iter().flatten().map(|t| t.center + CUTOFF * t.width).fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }

    /// Smallest abscissa where the profile can be nonzero.
    pub fn x_min(&self) -> f64 {
        self.terms.iter().flatten().map(|t| t.center - CUTOFF * t.width).fold(f64::INFINITY, f64::min)
    }

    /// `k`-th derivative at `x`.
    pub fn derivative(&self, x: f64, k: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.cached.iter().map(|c| c.iter().map(|t| t.eval(x, k)).sum()))
    }

    /// `k`-th derivative of a single component.
    pub fn component_derivative(&self, i: usize, x: f64, k: usize) -> f64 {
        self.cached[i].iter().map(|t| t.eval(x, k)).sum()
    }

    pub fn eval(&self, x: f64) -> DVector<f64> {
        self.derivative(x, 0)
    }

    /// Value and the first `order` derivatives at `x`.
    pub fn jet(&self, x: f64, order: usize) -> Vec<DVector<f64>> {
        (0..=order).map(|k| self.derivative(x, k)).collect()
    }

    /// `m * self` as a profile of dimension `m.nrows()`.
    pub fn map(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.ncols(), self.dim(), "profile map dimension mismatch");
        let comps = (0..m.nrows())
            .map(|i| {
                let mut out = Vec::new();
                for (j, c) in self.terms.iter().enumerate() {
                    let w = m[(i, j)];
                    if w != 0.0 {
                        out.extend(c.iter().map(|t| BumpTerm {
                            center: t.center,
                            width: t.width,
                            poly: t.poly.iter().map(|v| v * w).collect(),
                        }));
                    }
                }
                out
            })
            .collect();
        Self::new(comps).unwrap()
    }

    /// The `k`-th derivative as a profile of the same form.
    pub fn differentiated(&self, k: usize) -> Self {
        let comps = self
            .terms
            .iter()
            .map(|c| {
                c.iter()
                    .map(|t| {
                        let mut poly = t.poly.clone();
                        for _ in 0..k {
                            poly = next_poly(&poly, t.width);
                        }
                        BumpTerm { center: t.center, width: t.width, poly }
                    })
                    .collect()
            })
            .collect();
        Self::new(comps).unwrap()
    }

    /// True when every derivative up to `order` vanishes at `x = 0`.
    pub fn is_flat_at_zero(&self, order: usize) -> bool {
        (0..=order).all(|k| self.derivative(0.0, k).amax() == 0.0)
    }
}
