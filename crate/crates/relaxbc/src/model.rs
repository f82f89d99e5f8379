//! The diagonalized conservation law `u_t + F u_x = 0` and its relaxation system.
//!
//! The model is given by its eigendecomposition: `F = T diag(lambda) T^{-1}` and
//! `Abar = T diag(a) T^{-1}`. Positive speeds come first, so
//! `T = (R1U, R1S)` and `T^{-1} = (L1U; L1S)` split after column/row `l`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, inverse_checked};
use crate::signal::{SmoothSignal, TimeFunction};

/// Position of `a_j` relative to `lambda_j^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubcharacteristicStatus {
    Strict,
    Weak,
    Violated,
}

#[derive(Clone, Debug)]
pub struct SpectralModel {
    pub n: usize,
    pub l: usize,
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub a: DVector<f64>,
    pub f: DMatrix<f64>,
    pub f_inv: DMatrix<f64>,
    pub abar: DMatrix<f64>,
    pub cond_t: f64,
}

/// JSON form `{"T": [[...]], "lambda": [...], "a": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub a: Vec<f64>,
}

impl SpectralModel {
    pub fn from_doc(doc: &ModelDoc) -> Result<Self> {
        let t = linalg::from_rows(&doc.t, doc.lambda.len())?;
        build_model(t, DVector::from_vec(doc.lambda.clone()), DVector::from_vec(doc.a.clone()))
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc { t: linalg::to_rows(&self.t), lambda: self.lambda.iter().copied().collect(), a: self.a.iter().copied().collect() }
    }

    /// Diagonal model `T = I`.
    pub fn diagonal(lambda: &[f64], a: &[f64]) -> Result<Self> {
        build_model(DMatrix::identity(lambda.len(), lambda.len()), DVector::from_column_slice(lambda), DVector::from_column_slice(a))
    }

    pub fn r1u(&self) -> DMatrix<f64> {
        self.t.columns(0, self.l).into_owned()
    }

    pub fn r1s(&self) -> DMatrix<f64> {
        self.t.columns(self.l, self.n - self.l).into_owned()
    }

    pub fn l1u(&self) -> DMatrix<f64> {
        self.t_inv.rows(0, self.l).into_owned()
    }

    pub fn l1s(&self) -> DMatrix<f64> {
        self.t_inv.rows(self.l, self.n - self.l).into_owned()
    }

    /// `Abar - F^2`.
    pub fn abar_minus_f2(&self) -> DMatrix<f64> {
        &self.abar - &self.f * &self.f
    }

    /// `diag(lambda)` restricted to the negative block.
    pub fn lambda_minus(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.lambda.rows(self.l, self.n - self.l).into_owned())
    }

    /// `d_j = a_j - lambda_j^2`.
    pub fn gap(&self, j: usize) -> f64 {
        self.a[j] - self.lambda[j] * self.lambda[j]
    }

    pub fn max_speed(&self) -> f64 {
        self.a.iter().fold(0.0_f64, |m, v| m.max(v.sqrt()))
    }

    pub fn subcharacteristic_status(&self) -> SubcharacteristicStatus {
        subcharacteristic_status(self)
    }

    /// `A = (F, I; Abar - F^2, -F)`.
    pub fn relaxation_matrix(&self) -> DMatrix<f64> {
        relaxation_coefficient_matrix(self)
    }
}

/// Validate an eigendecomposition and derive `F`, `Abar` and the partition.
pub fn build_model(t: DMatrix<f64>, lambda: DVector<f64>, a: DVector<f64>) -> Result<SpectralModel> {
    let n = lambda.len();
    if t.nrows() != n || t.ncols() != n || a.len() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "T is {}x{}, lambda has {} entries, a has {}",
            t.nrows(),
            t.ncols(),
            n,
            a.len()
        )));
    }
    if let Some(index) = lambda.iter().position(|v| *v == 0.0) {
        return Err(Error::NonCharacteristicViolation { index });
    }
    let l = lambda.iter().take_while(|v| **v > 0.0).count();
    if lambda.iter().skip(l).any(|v| *v > 0.0) {
        return Err(Error::OrderingError);
    }
    if let Some(index) = a.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidRelaxationSpeed { index, value: a[index] });
    }
    let (t_inv, cond_t) = inverse_checked(&t).map_err(|e| match e {
        Error::IllConditioned { cond } => Error::SingularEigenbasis { cond },
        other => other,
    })?;
    let f = &t * DMatrix::from_diagonal(&lambda) * &t_inv;
    let f_inv = &t * DMatrix::from_diagonal(&lambda.map(|v| 1.0 / v)) * &t_inv;
    let abar = &t * DMatrix::from_diagonal(&a) * &t_inv;
    Ok(SpectralModel { n, l, t, t_inv, lambda, a, f, f_inv, abar, cond_t })
}

pub fn subcharacteristic_status(model: &SpectralModel) -> SubcharacteristicStatus {
    let mut weak = false;
    for j in 0..model.n {
        let l2 = model.lambda[j] * model.lambda[j];
        if model.a[j] < l2 {
            return SubcharacteristicStatus::Violated;
        }
        if model.a[j] == l2 {
            weak = true;
        }
    }
    if weak {
        SubcharacteristicStatus::Weak
    } else {
        SubcharacteristicStatus::Strict
    }
}

pub fn relaxation_coefficient_matrix(model: &SpectralModel) -> DMatrix<f64> {
    let n = model.n;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&model.f);
    a.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
    a.view_mut((n, 0), (n, n)).copy_from(&model.abar_minus_f2());
    a.view_mut((n, n), (n, n)).copy_from(&(-&model.f));
    a
}

/// The boundary condition `Bhat u(0,t) = bhat(t)` of the equilibrium problem.
#[derive(Clone, Debug)]
pub struct GivenBoundaryCondition {
    pub bhat: DMatrix<f64>,
    pub signal: SmoothSignal,
    /// Condition number of `Bhat R1U`.
    pub cond: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GivenBcDoc {
    #[serde(rename = "Bhat")]
    pub bhat: Vec<Vec<f64>>,
    pub bhat_signal: SmoothSignal,
}

impl GivenBoundaryCondition {
    pub fn new(model: &SpectralModel, bhat: DMatrix<f64>, signal: SmoothSignal) -> Result<Self> {
        if bhat.nrows() != model.l || bhat.ncols() != model.n || signal.dim() != model.l {
            return Err(Error::InvalidGivenBC(format!(
                "Bhat must be {}x{} with a {}-dimensional signal",
                model.l, model.n, model.l
            )));
        }
        if linalg::rank(&bhat, 1e-12) != model.l {
            return Err(Error::InvalidGivenBC("Bhat is rank deficient".into()));
        }
        let (_, cond) = inverse_checked(&(&bhat * model.r1u()))
            .map_err(|e| Error::InvalidGivenBC(format!("Bhat R1U is not invertible: {e}")))?;
        Ok(GivenBoundaryCondition { bhat, signal, cond })
    }

    pub fn from_doc(model: &SpectralModel, doc: &GivenBcDoc) -> Result<Self> {
        Self::new(model, linalg::from_rows(&doc.bhat, model.n)?, doc.bhat_signal.clone())
    }

    pub fn to_doc(&self) -> GivenBcDoc {
        GivenBcDoc { bhat: linalg::to_rows(&self.bhat), bhat_signal: self.signal.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_model() {
        let m = SpectralModel::diagonal(&[1.0, -1.0], &[4.0, 4.0]).unwrap();
        assert_eq!(m.l, 1);
        assert_eq!(m.f, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])));
        assert_eq!(m.subcharacteristic_status(), SubcharacteristicStatus::Strict);
    }

    #[test]
    fn status_examples() {
        let weak = SpectralModel::diagonal(&[2.0, -1.0], &[4.0, 4.0]).unwrap();
        assert_eq!(weak.subcharacteristic_status(), SubcharacteristicStatus::Weak);
        let bad = SpectralModel::diagonal(&[3.0, -1.0], &[4.0, 4.0]).unwrap();
        assert_eq!(bad.subcharacteristic_status(), SubcharacteristicStatus::Violated);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(SpectralModel::diagonal(&[0.0], &[1.0]), Err(Error::NonCharacteristicViolation { index: 0 })));
        assert!(matches!(SpectralModel::diagonal(&[-1.0, 1.0], &[4.0, 4.0]), Err(Error::OrderingError)));
        assert!(matches!(SpectralModel::diagonal(&[1.0], &[0.0]), Err(Error::InvalidRelaxationSpeed { .. })));
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            build_model(t, DVector::from_vec(vec![1.0, -1.0]), DVector::from_vec(vec![4.0, 4.0])),
            Err(Error::SingularEigenbasis { .. })
        ));
    }

    #[test]
    fn scalar_relaxation_matrix() {
        let m = SpectralModel::diagonal(&[1.0], &[4.0]).unwrap();
        assert_eq!(m.relaxation_matrix(), DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 3.0, -1.0]));
        let m = SpectralModel::diagonal(&[-1.0], &[4.0]).unwrap();
        assert_eq!(m.relaxation_matrix(), DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 3.0, 1.0]));
    }
}
