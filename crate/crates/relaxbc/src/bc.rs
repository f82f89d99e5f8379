//! Boundary matrices `B = (B_u, B_p)` for the relaxation system.
//!
//! Given `Bhat u(0,t) = bhat(t)`, the construction picks `B` with
//! `B_bar Z = 0`, `B_bar = (B_u, B_p R1S)`, and the datum
//! `b0 = B_u R1U J + (B_p - B_u F^{-1}) D`. Tilde quantities are `B~_u = B_u T`,
//! `B~_p = B_p T`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, inverse_checked, serde_rows};
use crate::model::{GivenBoundaryCondition, SpectralModel};
use crate::signal::{SmoothSignal, TimeFunction};

/// `(sqrt 2 + 1)`, the factor in the uniform bound on `|q_j|`.
pub const Q_BOUND_FACTOR: f64 = std::f64::consts::SQRT_2 + 1.0;

/// How the annihilator `B_bar` of `Z` is completed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnihilatorChoice {
    /// Pivoted Gram-Schmidt over coordinate axes.
    #[default]
    Pivoted,
    /// Unit eigenvectors of the complementary projector.
    Projector,
}

#[derive(Clone, Debug)]
pub struct ConstructionParams {
    pub ctilde: DMatrix<f64>,
    pub d: SmoothSignal,
    /// `B_p R1U`, left free by the constraint.
    pub bpu_free: DMatrix<f64>,
    pub annihilator: AnnihilatorChoice,
}

impl ConstructionParams {
    /// `C~ = 0`, `D = 0`, `B_p R1U = 0`.
    pub fn defaults(model: &SpectralModel) -> Self {
        let (n, l) = (model.n, model.l);
        ConstructionParams {
            ctilde: DMatrix::zeros(n - l, n - l),
            d: SmoothSignal::zero(n),
            bpu_free: DMatrix::zeros(n, l),
            annihilator: AnnihilatorChoice::Pivoted,
        }
    }

    /// `L1U D(t) = 0`, checked on the jet at a few times.
    pub fn check_layer_datum(&self, model: &SpectralModel) -> Result<()> {
        check_d(model, &self.d)
    }
}

fn check_d(model: &SpectralModel, d: &SmoothSignal) -> Result<()> {
    if d.dim() != model.n {
        return Err(Error::InvalidLayerDatum(format!("D has dimension {}, expected {}", d.dim(), model.n)));
    }
    if d.is_zero() || model.l == 0 {
        return Ok(());
    }
    let projected = d.map(&model.l1u());
    for t in [0.0, 0.37, 1.1, 2.9] {
        let scale = d.jet(t, 2).iter().map(|v| v.amax()).fold(1.0, f64::max);
        let worst = projected.jet(t, 2).iter().map(|v| v.amax()).fold(0.0, f64::max);
        if worst > 1e-12 * scale {
            return Err(Error::InvalidLayerDatum(format!("L1U D(t) = {worst:e} at t = {t}")));
        }
    }
    Ok(())
}

/// Named shapes with a known sufficient condition for the Kreiss condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    LEqN,
    N1Pos,
    N1Neg,
    N2L1Czero,
    N2L1Cnonzero,
    GenCzero,
    GenClambda,
}

impl Family {
    pub const ALL: [Family; 7] =
        [Family::LEqN, Family::N1Pos, Family::N1Neg, Family::N2L1Czero, Family::N2L1Cnonzero, Family::GenCzero, Family::GenClambda];

    pub fn name(self) -> &'static str {
        match self {
            Family::LEqN => "L_EQ_N",
            Family::N1Pos => "N1_POS",
            Family::N1Neg => "N1_NEG",
            Family::N2L1Czero => "N2_L1_CZERO",
            Family::N2L1Cnonzero => "N2_L1_CNONZERO",
            Family::GenCzero => "GEN_CZERO",
            Family::GenClambda => "GEN_CLAMBDA",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Family::LEqN => "l = n: B_u = I, B_p free; small spectral radius or triangular T^-1 B_p T",
            Family::N1Pos => "n = 1, F > 0: B_u = 1, B_p > 1/(F - sqrt a)",
            Family::N1Neg => "n = 1, F < 0: constraint with C~ > F - F^2/sqrt a",
            Family::N2L1Czero => "n = 2, l = 1, C~ = 0: B~u2 = -B~u1 H, (B~u1, B~p2) invertible, B~p1 small",
            Family::N2L1Cnonzero => "n = 2, l = 1, C~ != 0: B_u invertible, B~p2 from the constraint, B~p1 small",
            Family::GenCzero => "l < n, C~ = 0: block upper-triangular B~ with B~u11, B~p22 invertible",
            Family::GenClambda => "l < n, C~ = Lambda_-: block upper-triangular B~ with B~u11, B~u22 invertible",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Outcome of checking a family's sufficient condition.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HypothesisReport {
    pub condition: String,
    /// `None` when the condition is qualitative and cannot be decided.
    pub satisfied: Option<bool>,
    pub warnings: Vec<String>,
}

/// Row-major matrix in JSON.
pub type Rows = Vec<Vec<f64>>;

/// Free entries of a preset. Unused entries must be absent.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    pub bp: Option<Rows>,
    pub ctilde: Option<Rows>,
    pub bu11: Option<Rows>,
    pub bu22: Option<Rows>,
    pub bp11: Option<Rows>,
    pub bp22: Option<Rows>,
    pub star: Option<Rows>,
    pub bu1: Option<Rows>,
    pub bu2: Option<Rows>,
    pub bp1: Option<Rows>,
    pub bp2: Option<Rows>,
    pub d: Option<SmoothSignal>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructedBC {
    #[serde(with = "serde_rows")]
    pub bu: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub bp: DMatrix<f64>,
    pub b0: SmoothSignal,
    pub b1: SmoothSignal,
    pub b2: SmoothSignal,
    #[serde(with = "serde_rows")]
    pub h: DMatrix<f64>,
    pub j: SmoothSignal,
    #[serde(with = "serde_rows")]
    pub ctilde: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub c: DMatrix<f64>,
    pub d: SmoothSignal,
    pub family: Option<Family>,
    pub hypothesis: Option<HypothesisReport>,
}

impl ConstructedBC {
    /// `(B_u, B_p)` as one `n x 2n` matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.bu.nrows();
        let mut b = DMatrix::zeros(n, 2 * n);
        b.view_mut((0, 0), (n, n)).copy_from(&self.bu);
        b.view_mut((0, n), (n, n)).copy_from(&self.bp);
        b
    }

    /// `b0 + eps b1 + eps^2 b2`.
    pub fn b_eps(&self, eps: f64) -> SmoothSignal {
        self.b0.add(&self.b1.scale(eps)).add(&self.b2.scale(eps * eps))
    }
}

/// `H = -(Bhat R1U)^{-1} Bhat R1S` and `(Bhat R1U)^{-1}`.
pub fn h_matrix(model: &SpectralModel, bhat: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (inv, _) = inverse_checked(&(bhat * model.r1u()))
        .map_err(|e| Error::InvalidGivenBC(format!("Bhat R1U is not invertible: {e}")))?;
    let h = -&inv * bhat * model.r1s();
    Ok((h, inv))
}

/// `Z = (R1U H + R1S - F^{-1} R1S C~ ; C~)`, of size `(2n - l) x (n - l)`.
pub fn build_z(model: &SpectralModel, bhat: &DMatrix<f64>, ctilde: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, l) = (model.n, model.l);
    if l >= n {
        return Err(Error::DimensionMismatch("Z exists only for l < n".into()));
    }
    if ctilde.nrows() != n - l || ctilde.ncols() != n - l {
        return Err(Error::DimensionMismatch(format!("C~ must be {0}x{0}", n - l)));
    }
    let (h, _) = h_matrix(model, bhat)?;
    let r1s = model.r1s();
    let top = model.r1u() * h + &r1s - &model.f_inv * &r1s * ctilde;
    let mut z = DMatrix::zeros(2 * n - l, n - l);
    z.view_mut((0, 0), (n, n - l)).copy_from(&top);
    z.view_mut((n, 0), (n - l, n - l)).copy_from(ctilde);
    Ok(z)
}

/// Full-row-rank `B_bar` with `B_bar Z = 0`.
pub fn complete_annihilator(z: &DMatrix<f64>, choice: AnnihilatorChoice) -> Result<DMatrix<f64>> {
    let r = linalg::rank(z, 1e-10);
    if r != z.ncols() {
        return Err(Error::DegenerateConstruction(format!("Z has rank {r}, expected {}", z.ncols())));
    }
    let bbar = match choice {
        AnnihilatorChoice::Pivoted => linalg::complement_rows(z, 1e-10),
        AnnihilatorChoice::Projector => linalg::complement_rows_projector(z, 1e-10),
    };
    if bbar.nrows() != z.nrows() - z.ncols() {
        return Err(Error::DegenerateConstruction("annihilator has the wrong number of rows".into()));
    }
    Ok(bbar)
}

/// Split `B_bar` into `B_u` and `B_p`, with `B_p R1S` from `B_bar` and `B_p R1U = bpu_free`.
pub fn assemble_b(model: &SpectralModel, bbar: &DMatrix<f64>, bpu_free: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, l) = (model.n, model.l);
    if bpu_free.nrows() != n || bpu_free.ncols() != l {
        return Err(Error::DimensionMismatch(format!("B_p R1U must be {n}x{l}")));
    }
    if bbar.nrows() != n || bbar.ncols() != 2 * n - l {
        return Err(Error::DimensionMismatch(format!("B_bar must be {}x{}", n, 2 * n - l)));
    }
    let bu = bbar.columns(0, n).into_owned();
    let mut bpt = DMatrix::zeros(n, n);
    bpt.view_mut((0, 0), (n, l)).copy_from(bpu_free);
    bpt.view_mut((0, l), (n, n - l)).copy_from(&bbar.columns(n, n - l));
    let bp = bpt * &model.t_inv;
    check_full_rank(&bu, &bp)?;
    Ok((bu, bp))
}

fn check_full_rank(bu: &DMatrix<f64>, bp: &DMatrix<f64>) -> Result<()> {
    let n = bu.nrows();
    let mut b = DMatrix::zeros(n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(bu);
    b.view_mut((0, n), (n, n)).copy_from(bp);
    let r = linalg::rank(&b, 1e-10);
    if r != n {
        return Err(Error::DegenerateConstruction(format!("(B_u, B_p) has rank {r}, expected {n}")));
    }
    Ok(())
}

/// `b0 = B_u R1U J + (B_p - B_u F^{-1}) D`, or `bhat` when `l = n`.
pub fn build_b0(
    model: &SpectralModel,
    bu: &DMatrix<f64>,
    bp: &DMatrix<f64>,
    given: &GivenBoundaryCondition,
    d: &SmoothSignal,
) -> Result<SmoothSignal> {
    if model.l == model.n {
        return Ok(given.signal.clone());
    }
    check_d(model, d)?;
    let j = j_signal(model, given)?;
    let part_j = j.map(&(bu * model.r1u()));
    let part_d = d.map(&(bp - bu * &model.f_inv));
    Ok(part_j.add(&part_d))
}

/// `J(t) = (Bhat R1U)^{-1} bhat(t)`.
pub fn j_signal(model: &SpectralModel, given: &GivenBoundaryCondition) -> Result<SmoothSignal> {
    let (_, inv) = h_matrix(model, &given.bhat)?;
    Ok(given.signal.map(&inv))
}

/// Max-abs entry of `B~_p (0; C~) + B~_u (H; I - Lambda_-^{-1} C~)`.
pub fn check_constraint(model: &SpectralModel, bu: &DMatrix<f64>, bp: &DMatrix<f64>, h: &DMatrix<f64>, ctilde: &DMatrix<f64>) -> f64 {
    let (n, l) = (model.n, model.l);
    let but = bu * &model.t;
    let bpt = bp * &model.t;
    let lm_inv = DMatrix::from_diagonal(&model.lambda.rows(l, n - l).map(|v| 1.0 / v));
    let mut lower = DMatrix::zeros(n, n - l);
    lower.view_mut((l, 0), (n - l, n - l)).copy_from(ctilde);
    let mut upper = DMatrix::zeros(n, n - l);
    upper.view_mut((0, 0), (l, n - l)).copy_from(h);
    upper.view_mut((l, 0), (n - l, n - l)).copy_from(&(DMatrix::identity(n - l, n - l) - lm_inv * ctilde));
    linalg::norm_inf(&(bpt * lower + but * upper))
}

/// Generic construction: `Z`, annihilator, assembly, `b0`.
pub fn construct(model: &SpectralModel, given: &GivenBoundaryCondition, params: &ConstructionParams) -> Result<ConstructedBC> {
    let (n, l) = (model.n, model.l);
    if l == n {
        if params.bpu_free.nrows() != n || params.bpu_free.ncols() != n {
            return Err(Error::DimensionMismatch(format!("B_p R1U must be {n}x{n} when l = n")));
        }
        let bu = given.bhat.clone();
        let bp = &params.bpu_free * &model.t_inv;
        check_full_rank(&bu, &bp)?;
        return Ok(finish(model, given, bu, bp, DMatrix::zeros(0, 0), SmoothSignal::zero(n), None, None)?);
    }
    check_d(model, &params.d)?;
    let z = build_z(model, &given.bhat, &params.ctilde)?;
    let bbar = complete_annihilator(&z, params.annihilator)?;
    let (bu, bp) = assemble_b(model, &bbar, &params.bpu_free)?;
    finish(model, given, bu, bp, params.ctilde.clone(), params.d.clone(), None, None)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: &SpectralModel,
    given: &GivenBoundaryCondition,
    bu: DMatrix<f64>,
    bp: DMatrix<f64>,
    ctilde: DMatrix<f64>,
    d: SmoothSignal,
    family: Option<Family>,
    hypothesis: Option<HypothesisReport>,
) -> Result<ConstructedBC> {
    let n = model.n;
    let (h, j) = if model.l == 0 {
        (DMatrix::zeros(0, n), SmoothSignal::zero(0))
    } else {
        (h_matrix(model, &given.bhat)?.0, j_signal(model, given)?)
    };
    let c = model.r1s() * &ctilde;
    let b0 = build_b0(model, &bu, &bp, given, &d)?;
    Ok(ConstructedBC {
        bu,
        bp,
        b0,
        b1: SmoothSignal::zero(n),
        b2: SmoothSignal::zero(n),
        h,
        j,
        ctilde,
        c,
        d,
        family,
        hypothesis,
    })
}

fn param(m: &Option<Rows>, rows: usize, cols: usize, default: DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    match m {
        None => Ok(default),
        Some(r) => {
            let mat = linalg::from_rows(r, cols)?;
            if mat.nrows() != rows || mat.ncols() != cols {
                return Err(Error::ConfigError(format!("preset parameter {name} must be {rows}x{cols}")));
            }
            Ok(mat)
        }
    }
}

fn reject_unused(params: &PresetParams, allowed: &[&str]) -> Result<()> {
    let present = [
        ("bp", params.bp.is_some()),
        ("ctilde", params.ctilde.is_some()),
        ("bu11", params.bu11.is_some()),
        ("bu22", params.bu22.is_some()),
        ("bp11", params.bp11.is_some()),
        ("bp22", params.bp22.is_some()),
        ("star", params.star.is_some()),
        ("bu1", params.bu1.is_some()),
        ("bu2", params.bu2.is_some()),
        ("bp1", params.bp1.is_some()),
        ("bp2", params.bp2.is_some()),
    ];
    for (name, set) in present {
        if set && !allowed.contains(&name) {
            return Err(Error::ConfigError(format!("preset parameter {name} is not used by this family")));
        }
    }
    Ok(())
}

/// Spectral radius of a real square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues().iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn radius_condition(model: &SpectralModel, m: &DMatrix<f64>, upto: usize) -> (bool, String) {
    let max_sqrt_a = (0..upto).map(|j| model.a[j].sqrt()).fold(0.0, f64::max);
    let bound = 1.0 / (Q_BOUND_FACTOR * max_sqrt_a);
    let rho = spectral_radius(m);
    (rho < bound, format!("spectral radius {rho:.6} < {bound:.6}"))
}

fn block_tilde(n: usize, blocks: &[(usize, usize, &DMatrix<f64>)]) -> DMatrix<f64> {
    let mut bt = DMatrix::zeros(n, 2 * n);
    for (r, c, m) in blocks {
        bt.view_mut((*r, *c), (m.nrows(), m.ncols())).copy_from(m);
    }
    bt
}

fn invertible(m: &DMatrix<f64>) -> bool {
    m.is_empty() || inverse_checked(m).is_ok()
}

/// Build one of the named families, conjugated back to physical coordinates.
///
/// A violated sufficient condition is reported in `hypothesis`, not as an error.
pub fn preset(model: &SpectralModel, given: &GivenBoundaryCondition, family: Family, params: &PresetParams) -> Result<ConstructedBC> {
    let (n, l) = (model.n, model.l);
    let need = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigError(format!("{} requires {}", family.name(), what)))
        }
    };
    let d = params.d.clone().unwrap_or_else(|| SmoothSignal::zero(n));
    let mut warnings = Vec::new();
    let (bt, ctilde, condition, satisfied) = match family {
        Family::LEqN => {
            need(l == n, "l = n")?;
            reject_unused(params, &["bp"])?;
            need(linalg::norm_inf(&(&given.bhat - DMatrix::<f64>::identity(n, n))) == 0.0, "Bhat = I")?;
            let bp = param(&params.bp, n, n, DMatrix::zeros(n, n), "bp")?;
            let (rad_ok, rad_txt) = radius_condition(model, &bp, n);
            let tbt = &model.t_inv * &bp * &model.t;
            let upper = (0..n).all(|i| (0..i).all(|j| tbt[(i, j)] == 0.0));
            let lower = (0..n).all(|i| (i + 1..n).all(|j| tbt[(i, j)] == 0.0));
            let tri_ok = (upper || lower)
                && (0..n).all(|j| tbt[(j, j)] == 0.0 || tbt[(j, j)] > 1.0 / (model.lambda[j] - model.a[j].sqrt()));
            let bt = block_tilde(n, &[(0, 0, &model.t), (0, n, &(&bp * &model.t))]);
            (bt, DMatrix::zeros(0, 0), format!("{rad_txt}, or T^-1 B_p T triangular with delta_j > 1/(lambda_j - sqrt a_j)"), Some(rad_ok || tri_ok))
        }
        Family::N1Pos => {
            need(n == 1 && l == 1, "n = 1 and F > 0")?;
            reject_unused(params, &["bp"])?;
            need(given.bhat[(0, 0)] == 1.0, "Bhat = 1")?;
            let bp = param(&params.bp, 1, 1, DMatrix::zeros(1, 1), "bp")?[(0, 0)];
            let bound = 1.0 / (model.lambda[0] - model.a[0].sqrt());
            let bt = DMatrix::from_row_slice(1, 2, &[1.0, bp]);
            (bt, DMatrix::zeros(0, 0), format!("B_p = {bp} > {bound:.6}"), Some(bp > bound))
        }
        Family::N1Neg => {
            need(n == 1 && l == 0, "n = 1 and F < 0")?;
            reject_unused(params, &["ctilde", "bp"])?;
            let f = model.lambda[0];
            let ct = param(&params.ctilde, 1, 1, DMatrix::from_element(1, 1, f), "ctilde")?[(0, 0)];
            let bt = if ct == f {
                if params.bp.is_some() {
                    warnings.push("bp is ignored when C~ = F".into());
                }
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
            } else {
                let bpt = param(&params.bp, 1, 1, DMatrix::from_element(1, 1, 1.0), "bp")?[(0, 0)];
                need(bpt != 0.0, "a nonzero B~_p when C~ != F")?;
                DMatrix::from_row_slice(1, 2, &[f * ct / (ct - f) * bpt, bpt])
            };
            let bound = f - f * f / model.a[0].sqrt();
            (bt, DMatrix::from_element(1, 1, ct), format!("C~ = {ct} > {bound:.6}"), Some(ct > bound))
        }
        Family::N2L1Czero => {
            need(n == 2 && l == 1, "n = 2 and l = 1")?;
            reject_unused(params, &["bu1", "bp1", "bp2"])?;
            let (h, _) = h_matrix(model, &given.bhat)?;
            let bu1 = param(&params.bu1, 2, 1, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), "bu1")?;
            let bp1 = param(&params.bp1, 2, 1, DMatrix::zeros(2, 1), "bp1")?;
            let bp2 = param(&params.bp2, 2, 1, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), "bp2")?;
            let bu2 = -&bu1 * h[(0, 0)];
            let mut pair = DMatrix::zeros(2, 2);
            pair.set_column(0, &bu1.column(0));
            pair.set_column(1, &bp2.column(0));
            let inv_ok = invertible(&pair);
            if bp1.amax() > 0.0 {
                warnings.push("smallness of B~p1 is not quantified; certify numerically".into());
            }
            let bt = block_tilde(2, &[(0, 0, &bu1), (0, 1, &bu2), (0, 2, &bp1), (0, 3, &bp2)]);
            (bt, DMatrix::zeros(1, 1), "(B~u1, B~p2) invertible and B~p1 close to zero".into(), if inv_ok { None } else { Some(false) })
        }
        Family::N2L1Cnonzero => {
            need(n == 2 && l == 1, "n = 2 and l = 1")?;
            reject_unused(params, &["bu1", "bu2", "bp1", "ctilde"])?;
            let (h, _) = h_matrix(model, &given.bhat)?;
            let ct = param(&params.ctilde, 1, 1, DMatrix::from_element(1, 1, 1.0), "ctilde")?[(0, 0)];
            need(ct != 0.0, "C~ != 0")?;
            let bu1 = param(&params.bu1, 2, 1, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), "bu1")?;
            let bu2 = param(&params.bu2, 2, 1, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), "bu2")?;
            let bp1 = param(&params.bp1, 2, 1, DMatrix::zeros(2, 1), "bp1")?;
            let l2 = model.lambda[1];
            let bp2 = -&bu1 * (h[(0, 0)] / ct) + &bu2 * ((ct - l2) / (l2 * ct));
            let mut but = DMatrix::zeros(2, 2);
            but.set_column(0, &bu1.column(0));
            but.set_column(1, &bu2.column(0));
            let lo = l2 - l2 * l2 / model.a[1].sqrt();
            let range_ok = (ct > lo && ct < 0.0) || ct > 0.0;
            if bp1.amax() > 0.0 {
                warnings.push("smallness of B~p1 is not quantified; certify numerically".into());
            }
            let ok = invertible(&but) && range_ok;
            let bt = block_tilde(2, &[(0, 0, &bu1), (0, 1, &bu2), (0, 2, &bp1), (0, 3, &bp2)]);
            (
                bt,
                DMatrix::from_element(1, 1, ct),
                format!("B_u invertible, C~ = {ct} in ({lo:.6}, 0) U (0, inf), B~p1 close to zero"),
                if ok { None } else { Some(false) },
            )
        }
        Family::GenCzero | Family::GenClambda => {
            need(l < n, "l < n")?;
            let (h, _) = if l == 0 { (DMatrix::zeros(0, n), DMatrix::zeros(0, 0)) } else { h_matrix(model, &given.bhat)? };
            let m = n - l;
            let bu11 = param(&params.bu11, l, l, DMatrix::identity(l, l), "bu11")?;
            let bp11 = param(&params.bp11, l, l, DMatrix::zeros(l, l), "bp11")?;
            let star = param(&params.star, l, m, DMatrix::zeros(l, m), "star")?;
            let inv11 = if l == 0 { Some(DMatrix::zeros(0, 0)) } else { inverse_checked(&bu11).ok().map(|x| x.0) };
            let (mut ok, mut cond) = match &inv11 {
                Some(inv) => {
                    let k = inv * &bp11;
                    let (r_ok, txt) = radius_condition(model, &k, l);
                    if family == Family::GenCzero && l == 1 {
                        let bound = 1.0 / (model.lambda[0] - model.a[0].sqrt());
                        (r_ok || k[(0, 0)] > bound, format!("{txt}, or B~u11^-1 B~p11 = {:.6} > {bound:.6}", k[(0, 0)]))
                    } else {
                        (r_ok, txt)
                    }
                }
                None => (false, "B~u11 invertible".to_string()),
            };
            if family == Family::GenCzero {
                reject_unused(params, &["bu11", "bp11", "bp22", "star"])?;
                let bp22 = param(&params.bp22, m, m, DMatrix::identity(m, m), "bp22")?;
                ok &= invertible(&bp22);
                cond = format!("B~u11, B~p22 invertible; {cond}");
                let bt = block_tilde(n, &[(0, 0, &bu11), (0, l, &(-&bu11 * &h)), (0, n, &bp11), (0, n + l, &star), (l, n + l, &bp22)]);
                (bt, DMatrix::zeros(m, m), cond, Some(ok))
            } else {
                reject_unused(params, &["bu11", "bu22", "bp11", "star"])?;
                let bu22 = param(&params.bu22, m, m, DMatrix::identity(m, m), "bu22")?;
                ok &= invertible(&bu22);
                cond = format!("B~u11, B~u22 invertible; {cond}");
                let lm = model.lambda_minus();
                let lm_inv = DMatrix::from_diagonal(&lm.diagonal().map(|v| 1.0 / v));
                let p12 = -&bu11 * &h * lm_inv;
                let bt = block_tilde(n, &[(0, 0, &bu11), (0, l, &star), (l, l, &bu22), (0, n, &bp11), (0, n + l, &p12)]);
                (bt, lm, cond, Some(ok))
            }
        }
    };
    if satisfied == Some(false) {
        warnings.push(format!("sufficient condition violated: {condition}"));
    }
    let bu = bt.columns(0, n) * &model.t_inv;
    let bp = bt.columns(n, n) * &model.t_inv;
    check_full_rank(&bu, &bp)?;
    let hyp = HypothesisReport { condition, satisfied, warnings };
    if l == n {
        let bc = finish(model, given, bu, bp, DMatrix::zeros(0, 0), SmoothSignal::zero(n), Some(family), Some(hyp))?;
        return Ok(bc);
    }
    finish(model, given, bu, bp, ctilde, d, Some(family), Some(hyp))
}

/// Entries of `B~ = (B_u T, B_p T)`.
pub fn tilde(model: &SpectralModel, bc: &ConstructedBC) -> (DMatrix<f64>, DMatrix<f64>) {
    (&bc.bu * &model.t, &bc.bp * &model.t)
}

/// `B_bar = (B_u, B_p R1S)` of a constructed condition.
pub fn bbar_of(model: &SpectralModel, bc: &ConstructedBC) -> DMatrix<f64> {
    let (n, l) = (model.n, model.l);
    let mut b = DMatrix::zeros(n, 2 * n - l);
    b.view_mut((0, 0), (n, n)).copy_from(&bc.bu);
    b.view_mut((0, n), (n, n - l)).copy_from(&(&bc.bp * model.r1s()));
    b
}

/// Value of `b0` minus its defining formula at `t`.
pub fn b0_identity_residual(model: &SpectralModel, bc: &ConstructedBC, t: f64) -> f64 {
    let j = if model.l == 0 { DVector::zeros(0) } else { bc.j.eval(t) };
    let rhs = &bc.bu * model.r1u() * j + (&bc.bp - &bc.bu * &model.f_inv) * bc.d.eval(t);
    (bc.b0.eval(t) - rhs).amax()
}
