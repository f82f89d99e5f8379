//! Closed-form vector signals of time with exact derivatives.
//!
//! A component is a sum of terms `e^{r t} (P(t) cos(w t) + Q(t) sin(w t))`, a family
//! that is closed under differentiation and linear maps. The JSON form lists terms as
//! `{poly, rate, freq, phase}`, meaning `poly(t) e^{rate t} cos(freq t + phase)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that can report a vector-valued function of time with derivatives.
pub trait TimeFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// Value and the first `order` derivatives at `t`.
    fn jet(&self, t: f64, order: usize) -> Vec<DVector<f64>>;

    fn eval(&self, t: f64) -> DVector<f64> {
        self.jet(t, 0).swap_remove(0)
    }
}

/// Ascending-coefficient polynomial helpers.
pub(crate) mod poly {
    pub fn eval(c: &[f64], t: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
    }

    pub fn derivative(c: &[f64]) -> Vec<f64> {
        c.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect()
    }

    pub fn axpy(y: &mut Vec<f64>, alpha: f64, x: &[f64]) {
        if y.len() < x.len() {
            y.resize(x.len(), 0.0);
        }
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }

    pub fn trim(c: &mut Vec<f64>) {
        while matches!(c.last(), Some(v) if *v == 0.0) {
            c.pop();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    rate: f64,
    freq: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Term {
    fn eval(&self, t: f64) -> f64 {
        let e = (self.rate * t).exp();
        if self.freq == 0.0 {
            return e * poly::eval(&self.cos, t);
        }
        let (s, c) = (self.freq * t).sin_cos();
        e * (poly::eval(&self.cos, t) * c + poly::eval(&self.sin, t) * s)
    }

    fn derivative(&self) -> Term {
        let mut cos = poly::derivative(&self.cos);
        poly::axpy(&mut cos, self.rate, &self.cos);
        poly::axpy(&mut cos, self.freq, &self.sin);
        let mut sin = poly::derivative(&self.sin);
        poly::axpy(&mut sin, self.rate, &self.sin);
        poly::axpy(&mut sin, -self.freq, &self.cos);
        Term { rate: self.rate, freq: self.freq, cos, sin }
    }

    fn is_zero(&self) -> bool {
        self.cos.iter().all(|v| *v == 0.0) && (self.freq == 0.0 || self.sin.iter().all(|v| *v == 0.0))
    }
}

fn normalize(terms: Vec<Term>) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    for mut t in terms {
        if t.freq < 0.0 {
            t.freq = -t.freq;
            t.sin.iter_mut().for_each(|v| *v = -*v);
        }
        if t.freq == 0.0 {
            t.sin.clear();
        }
        match out.iter_mut().find(|o| o.rate == t.rate && o.freq == t.freq) {
            Some(o) => {
                poly::axpy(&mut o.cos, 1.0, &t.cos);
                poly::axpy(&mut o.sin, 1.0, &t.sin);
            }
            None => out.push(t),
        }
    }
    for t in out.iter_mut() {
        poly::trim(&mut t.cos);
        poly::trim(&mut t.sin);
    }
    out.retain(|t| !t.is_zero());
    out
}

/// One JSON term: `poly(t) * exp(rate t) * cos(freq t + phase)`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub poly: Vec<f64>,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalDoc {
    dim: usize,
    components: Vec<Vec<TermDoc>>,
}

/// Vector signal with closed-form terms per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalDoc", into = "SignalDoc")]
pub struct SmoothSignal {
    comps: Vec<Vec<Term>>,
}

impl TryFrom<SignalDoc> for SmoothSignal {
    type Error = Error;

    fn try_from(doc: SignalDoc) -> Result<Self> {
        if doc.components.len() != doc.dim {
            return Err(Error::DimensionMismatch(format!(
                "signal declares dim {} but lists {} components",
                doc.dim,
                doc.components.len()
            )));
        }
        Ok(SmoothSignal::from_terms(doc.components))
    }
}

impl From<SmoothSignal> for SignalDoc {
    fn from(s: SmoothSignal) -> Self {
        let components = s
            .comps
            .iter()
            .map(|terms| {
                let mut docs = Vec::new();
                for t in terms {
                    if !t.cos.is_empty() {
                        docs.push(TermDoc { poly: t.cos.clone(), rate: t.rate, freq: t.freq, phase: 0.0 });
                    }
                    if t.freq != 0.0 && !t.sin.is_empty() {
                        docs.push(TermDoc {
                            poly: t.sin.clone(),
                            rate: t.rate,
                            freq: t.freq,
                            phase: -std::f64::consts::FRAC_PI_2,
                        });
                    }
                }
                docs
            })
            .collect();
        SignalDoc { dim: s.comps.len(), components }
    }
}

impl SmoothSignal {
    pub fn zero(dim: usize) -> Self {
        SmoothSignal { comps: vec![Vec::new(); dim] }
    }

    /// Build from per-component lists of `poly * exp(rate t) * cos(freq t + phase)` terms.
    pub fn from_terms(components: Vec<Vec<TermDoc>>) -> Self {
        let comps = components
            .into_iter()
            .map(|terms| {
                normalize(
                    terms
                        .into_iter()
                        .map(|d| {
                            let (s, c) = d.phase.sin_cos();
                            Term {
                                rate: d.rate,
                                freq: d.freq,
                                cos: d.poly.iter().map(|v| v * c).collect(),
                                sin: d.poly.iter().map(|v| -v * s).collect(),
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        SmoothSignal { comps }
    }

    /// Polynomial signal from ascending coefficients per component.
    pub fn polynomial(coeffs: Vec<Vec<f64>>) -> Self {
        Self::from_terms(
            coeffs.into_iter().map(|c| vec![TermDoc { poly: c, rate: 0.0, freq: 0.0, phase: 0.0 }]).collect(),
        )
    }

    /// Polynomial signal whose coefficient of `t^k` is the vector `coeffs[k]`.
    pub fn from_vector_coeffs(coeffs: &[DVector<f64>], dim: usize) -> Self {
        Self::polynomial((0..dim).map(|i| coeffs.iter().map(|c| c[i]).collect()).collect())
    }

    pub fn constant(v: &DVector<f64>) -> Self {
        Self::polynomial(v.iter().map(|x| vec![*x]).collect())
    }

    /// Scalar-per-component sinusoid `amp * sin(freq t)`.
    pub fn sine(amps: &[f64], freq: f64) -> Self {
        Self::from_terms(
            amps.iter()
                .map(|&a| vec![TermDoc { poly: vec![a], rate: 0.0, freq, phase: -std::f64::consts::FRAC_PI_2 }])
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_empty())
    }

    pub fn derivative(&self) -> Self {
        SmoothSignal { comps: self.comps.iter().map(|c| normalize(c.iter().map(Term::derivative).collect())).collect() }
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |s, _| s.derivative())
    }

    /// `m * self` as a signal of dimension `m.nrows()`.
    pub fn map(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.ncols(), self.comps.len(), "signal map dimension mismatch");
        let comps = (0..m.nrows())
            .map(|i| {
                let mut terms = Vec::new();
                for (j, c) in self.comps.iter().enumerate() {
                    let w = m[(i, j)];
                    if w != 0.0 {
                        terms.extend(c.iter().map(|t| Term {
                            rate: t.rate,
                            freq: t.freq,
                            cos: t.cos.iter().map(|v| v * w).collect(),
                            sin: t.sin.iter().map(|v| v * w).collect(),
                        }));
                    }
                }
                normalize(terms)
            })
            .collect();
        SmoothSignal { comps }
    }

    pub fn add(&self, other: &SmoothSignal) -> Self {
        assert_eq!(self.dim(), other.dim(), "signal add dimension mismatch");
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| normalize(a.iter().chain(b.iter()).cloned().collect()))
            .collect();
        SmoothSignal { comps }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(&(DMatrix::identity(self.dim(), self.dim()) * s))
    }
}

impl TimeFunction for SmoothSignal {
    fn dim(&self) -> usize {
        self.comps.len()
    }

    fn jet(&self, t: f64, order: usize) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(order + 1);
        let mut cur = self.clone();
        for k in 0..=order {
            out.push(DVector::from_iterator(cur.dim(), cur.comps.iter().map(|c| c.iter().map(|tm| tm.eval(t)).sum())));
            if k < order {
                cur = cur.derivative();
            }
        }
        out
    }
}
