//! Convergence studies: run the stiff solver over a list of `eps`, compare with the
//! matched asymptotic solution and fit log-log slopes.
//!
//! Every row is checked by one grid halving. A norm's slope uses only the rows whose
//! error changed by less than `refine_tol` under the halving.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticSolution;
use crate::bc::{construct, preset, AnnihilatorChoice, ConstructedBC, ConstructionParams, Family, PresetParams, Rows};
use crate::compat::{build_initial_data, make_compatible, RelaxationInitialData};
use crate::error::{Error, Result};
use crate::linalg;
use crate::gkc::{certify, CertificationReport, SamplingSpec, Verdict};
use crate::model::{GivenBcDoc, GivenBoundaryCondition, ModelDoc, SpectralModel};
use crate::profile::{BumpTerm, SmoothProfile};
use crate::signal::SmoothSignal;
use crate::solver::{h1_norm, l2_norm, run, Grid1D, GridSolution, SolverOptions};

/// Extra room between the domain of influence and the right end.
pub const DOMAIN_MARGIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `(u, p)` against the assembled expansion.
    L2,
    H1,
    /// `u` against the leading outer term.
    L2VsU0bar,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L2, NormKind::H1, NormKind::L2VsU0bar];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::H1 => "h1",
            NormKind::L2VsU0bar => "l2_vs_u0bar",
        }
    }

    /// Rate of the corresponding upper bound.
    pub fn theory(self) -> f64 {
        match self {
            NormKind::L2 => 1.5,
            NormKind::H1 | NormKind::L2VsU0bar => 0.5,
        }
    }
}

/// Built-in problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetId {
    /// `F = diag(1, -1)`, `a = (4, 4)`, `Bhat = (1, 1)`, `C~ = 0`.
    P1Czero,
    /// The same system with `C~ = Lambda_-`.
    P1Clambda,
    /// `n = l = 1`, `F = 1`, `a = 4`, `B = (1, 0)`; no boundary layer.
    ScalarLEqN,
}

impl PresetId {
    pub const ALL: [PresetId; 3] = [PresetId::P1Czero, PresetId::P1Clambda, PresetId::ScalarLEqN];
}

/// How the boundary matrix is built.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Construction {
    Preset {
        family: Family,
        #[serde(default)]
        params: PresetParams,
    },
    /// Any `C~`; defaults as in [`ConstructionParams::defaults`].
    Generic {
        ctilde: Option<Rows>,
        bpu_free: Option<Rows>,
        d: Option<SmoothSignal>,
        #[serde(default)]
        annihilator: AnnihilatorChoice,
    },
}

impl Construction {
    pub fn build(&self, model: &SpectralModel, given: &GivenBoundaryCondition) -> Result<ConstructedBC> {
        match self {
            Construction::Preset { family, params } => preset(model, given, *family, params),
            Construction::Generic { ctilde, bpu_free, d, annihilator } => {
                let mut p = ConstructionParams::defaults(model);
                let (n, l) = (model.n, model.l);
                if let Some(c) = ctilde {
                    p.ctilde = sized(c, n - l, n - l, "ctilde")?;
                }
                if let Some(b) = bpu_free {
                    p.bpu_free = sized(b, n, l, "bpu_free")?;
                }
                if let Some(d) = d {
                    p.d = d.clone();
                }
                p.annihilator = *annihilator;
                construct(model, given, &p)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Construction::Preset { family, .. } => family.name().to_lowercase(),
            Construction::Generic { .. } => "generic".into(),
        }
    }
}

fn sized(rows: &Rows, r: usize, c: usize, what: &str) -> Result<DMatrix<f64>> {
    let m = if rows.is_empty() { DMatrix::zeros(0, c) } else { linalg::from_rows(rows, c)? };
    if m.nrows() != r {
        return Err(Error::DimensionMismatch(format!("{what} must be {r}x{c}")));
    }
    Ok(m)
}

/// A full problem: model, given condition, boundary construction and initial data.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub model: ModelDoc,
    pub given: GivenBcDoc,
    pub construction: Construction,
    pub u0: SmoothProfile,
}

/// Width of the built-in bumps; `eps |u1bar| <= 0.1 |u0bar|` holds at `eps = 2e-2`.
pub const PRESET_WIDTH: f64 = 2.0;

/// `s^4 exp(-s^2)` bumps at the origin, flat to order three there.
pub fn flat_bumps(amps: &[f64], width: f64) -> SmoothProfile {
    let comps = amps
        .iter()
        .map(|&a| {
            let mut poly = vec![0.0; 5];
            poly[4] = a;
            vec![BumpTerm { center: 0.0, width, poly }]
        })
        .collect();
    SmoothProfile::new(comps).expect("positive width")
}

impl ProblemSpec {
    pub fn preset(id: PresetId) -> Self {
        match id {
            PresetId::P1Czero | PresetId::P1Clambda => ProblemSpec {
                model: ModelDoc { t: vec![vec![1.0, 0.0], vec![0.0, 1.0]], lambda: vec![1.0, -1.0], a: vec![4.0, 4.0] },
                given: GivenBcDoc { bhat: vec![vec![1.0, 1.0]], bhat_signal: SmoothSignal::zero(1) },
                construction: Construction::Preset {
                    family: if id == PresetId::P1Czero { Family::GenCzero } else { Family::GenClambda },
                    params: PresetParams::default(),
                },
                u0: flat_bumps(&[0.5, 1.0], PRESET_WIDTH),
            },
            PresetId::ScalarLEqN => ProblemSpec {
                model: ModelDoc { t: vec![vec![1.0]], lambda: vec![1.0], a: vec![4.0] },
                given: GivenBcDoc { bhat: vec![vec![1.0]], bhat_signal: SmoothSignal::zero(1) },
                construction: Construction::Preset {
                    family: Family::LEqN,
                    params: PresetParams { bp: Some(vec![vec![0.0]]), ..Default::default() },
                },
                u0: flat_bumps(&[0.5], PRESET_WIDTH),
            },
        }
    }
}

/// Where an experiment takes its problem from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemRef {
    Preset(PresetId),
    Inline(Box<ProblemSpec>),
}

impl ProblemRef {
    pub fn resolve(&self) -> ProblemSpec {
        match self {
            ProblemRef::Preset(id) => ProblemSpec::preset(*id),
            ProblemRef::Inline(p) => (**p).clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProblemRef::Preset(id) => serde_json::to_value(id).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            ProblemRef::Inline(p) => format!("inline_{}", p.construction.label()),
        }
    }
}

/// Everything derived from a [`ProblemSpec`] before any solve.
#[derive(Clone, Debug)]
pub struct PreparedProblem {
    pub model: SpectralModel,
    pub given: GivenBoundaryCondition,
    pub bc: ConstructedBC,
    pub u0: SmoothProfile,
    pub init: RelaxationInitialData,
    pub asymptotic: AsymptoticSolution,
}

impl PreparedProblem {
    /// Construct the preset boundary matrix and make the data compatible.
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        let model = SpectralModel::from_doc(&spec.model)?;
        let given = GivenBoundaryCondition::from_doc(&model, &spec.given)?;
        if spec.u0.dim() != model.n {
            return Err(Error::DimensionMismatch(format!("u0 has {} components, model has {}", spec.u0.dim(), model.n)));
        }
        let raw = spec.construction.build(&model, &given)?;
        let bc = make_compatible(&model, &given, &raw, &spec.u0)?;
        let init = build_initial_data(&model, &spec.u0);
        let asymptotic = AsymptoticSolution::new(&model, &bc, &spec.u0)?;
        Ok(PreparedProblem { model, given, bc, u0: spec.u0.clone(), init, asymptotic })
    }

    /// Right end of the initial support plus the distance travelled by `t*`.
    pub fn reach(&self, t_star: f64) -> f64 {
        self.u0.x_max() + t_star * self.model.max_speed()
    }
}

/// `N(eps) = max(n_min, ceil(coeff X eps^-exponent))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridPolicy {
    /// Domain length; `None` picks the reach plus [`DOMAIN_MARGIN`].
    pub x_len: Option<f64>,
    pub n_min: usize,
    pub coeff: f64,
    pub exponent: f64,
    pub cfl: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { x_len: None, n_min: 2000, coeff: 1.0, exponent: 1.25, cfl: 0.9 }
    }
}

impl GridPolicy {
    pub fn cells(&self, x_len: f64, eps: f64) -> usize {
        ((self.coeff * x_len * eps.powf(-self.exponent)).ceil() as usize).max(self.n_min)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemRef,
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default = "default_norms")]
    pub norms: Vec<NormKind>,
    #[serde(default = "default_t_star")]
    pub t_star: f64,
    /// Errors are maxima over `t* k / samples`, `k = 1..=samples`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
    #[serde(default)]
    pub gkc: SamplingSpec,
}

fn default_norms() -> Vec<NormKind> {
    NormKind::ALL.to_vec()
}

fn default_t_star() -> f64 {
    1.0
}

fn default_samples() -> usize {
    5
}

fn default_refine_tol() -> f64 {
    0.05
}

impl ExperimentSpec {
    pub fn new(problem: ProblemRef, eps: Vec<f64>) -> Self {
        ExperimentSpec {
            problem,
            eps,
            grid: GridPolicy::default(),
            norms: default_norms(),
            t_star: default_t_star(),
            samples: default_samples(),
            refine_tol: default_refine_tol(),
            gkc: SamplingSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::ConfigError("every eps must be positive and finite".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::ConfigError("eps list must be strictly decreasing".into()));
        }
        if self.norms.is_empty() || self.samples == 0 {
            return Err(Error::ConfigError("need at least one norm and one sample time".into()));
        }
        if !(self.t_star > 0.0) || !(self.refine_tol > 0.0) {
            return Err(Error::ConfigError("t_star and refine_tol must be positive".into()));
        }
        if !(self.grid.exponent > 0.0 && self.grid.coeff > 0.0) {
            return Err(Error::ConfigError("grid coefficient and exponent must be positive".into()));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (1..=self.samples).map(|k| self.t_star * k as f64 / self.samples as f64).collect()
    }
}

/// Discrete norms of the difference between a grid solution and the expansion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    pub l2_vs_u0bar: f64,
}

impl ErrorNorms {
    pub fn get(&self, k: NormKind) -> f64 {
        match k {
            NormKind::L2 => self.l2,
            NormKind::H1 => self.h1,
            NormKind::L2VsU0bar => self.l2_vs_u0bar,
        }
    }

    fn max(self, o: ErrorNorms) -> ErrorNorms {
        ErrorNorms { l2: self.l2.max(o.l2), h1: self.h1.max(o.h1), l2_vs_u0bar: self.l2_vs_u0bar.max(o.l2_vs_u0bar) }
    }
}

/// Norms at time `t`, with the expansion sampled at the cell centers.
pub fn error_norms(gs: &GridSolution, asymptotic: &AsymptoticSolution, t: f64) -> Result<ErrorNorms> {
    let snap = gs.at(t)?;
    let xs = gs.grid.centers();
    let dx = gs.grid.dx();
    let n = snap.u.nrows();
    let outer = asymptotic.outer();
    let points: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> = xs
        .par_iter()
        .map(|&x| {
            let (u, p) = asymptotic.eval(x, t, gs.eps)?;
            Ok((u, p, outer.u0_bar(x, t)?))
        })
        .collect::<Result<_>>()?;
    let mut diff = snap.stacked();
    let mut diff0 = snap.u.clone();
    for (i, (u, p, ub)) in points.iter().enumerate() {
        for j in 0..n {
            diff[(j, i)] -= u[j];
            diff[(n + j, i)] -= p[j];
            diff0[(j, i)] -= ub[j];
        }
    }
    Ok(ErrorNorms { l2: l2_norm(&diff, dx), h1: h1_norm(&diff, dx), l2_vs_u0bar: l2_norm(&diff0, dx) })
}

/// Base and refined error of one norm in one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub norm: NormKind,
    pub error: f64,
    pub refined: f64,
    /// `|error - refined| / refined`.
    pub change: f64,
    pub refinement_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub eps: f64,
    pub n_cells: usize,
    pub refined_cells: usize,
    pub entries: Vec<NormEntry>,
}

impl RateRow {
    pub fn entry(&self, k: NormKind) -> Option<&NormEntry> {
        self.entries.iter().find(|e| e.norm == k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub norm: NormKind,
    /// Least-squares slope of `ln error` against `ln eps` over refinement-passed rows.
    pub slope: Option<f64>,
    pub rows_used: usize,
    /// `log2(e_i / e_{i+1})` for consecutive rows.
    pub log2_ratios: Vec<f64>,
    /// `ln(e_i / e_{i+1}) / ln(eps_i / eps_{i+1})`.
    pub pairwise: Vec<f64>,
    /// Slope after dropping the largest passed `eps`.
    pub slope_without_largest: Option<f64>,
    pub stable: Option<bool>,
    /// Errors of passed rows strictly decrease.
    pub monotone: bool,
    pub theory: f64,
    pub above_theory: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub problem: String,
    pub version: String,
    pub t_star: f64,
    pub sample_times: Vec<f64>,
    pub x_len: f64,
    pub gkc_c_hat: Option<f64>,
    pub norms: Vec<NormKind>,
    pub rows: Vec<RateRow>,
    pub fits: Vec<SlopeFit>,
}

impl RateTable {
    pub fn empty(norms: Vec<NormKind>) -> Self {
        RateTable {
            problem: String::new(),
            version: crate::VERSION.to_string(),
            t_star: 0.0,
            sample_times: Vec::new(),
            x_len: 0.0,
            gkc_c_hat: None,
            fits: norms.iter().map(|&k| fit_norm(&[], k)).collect(),
            norms,
            rows: Vec::new(),
        }
    }

    pub fn fit(&self, k: NormKind) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.norm == k)
    }

    /// Recompute the fits from the rows.
    pub fn refit(&mut self) {
        self.fits = self.norms.iter().map(|&k| fit_norm(&self.rows, k)).collect();
    }
}

/// Least-squares slope of `y` against `x`; `None` below two points.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope stability threshold under dropping the largest `eps`.
pub const SLOPE_STABILITY: f64 = 0.15;

fn fit_norm(rows: &[RateRow], k: NormKind) -> SlopeFit {
    let passed: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.entry(k).filter(|e| e.refinement_ok && e.error > 0.0).map(|e| (r.eps, e.error)))
        .collect();
    let all: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.entry(k).map(|e| (r.eps, e.error))).collect();
    let logs = |pts: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { pts.iter().map(|(e, v)| (e.ln(), v.ln())).unzip() };
    let (lx, ly) = logs(&passed);
    let slope = least_squares_slope(&lx, &ly);
    let slope_without_largest = if passed.len() > 2 { least_squares_slope(&lx[1..], &ly[1..]) } else { None };
    let stable = slope.zip(slope_without_largest).map(|(a, b)| (a - b).abs() < SLOPE_STABILITY);
    let log2_ratios = all.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    let pairwise = all.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect();
    SlopeFit {
        norm: k,
        slope,
        rows_used: passed.len(),
        log2_ratios,
        pairwise,
        slope_without_largest,
        stable,
        monotone: passed.windows(2).all(|w| w[1].1 < w[0].1),
        theory: k.theory(),
        above_theory: slope.is_some_and(|s| s > k.theory() + SLOPE_STABILITY),
    }
}

fn max_over_samples(gs: &GridSolution, asymptotic: &AsymptoticSolution, times: &[f64]) -> Result<ErrorNorms> {
    times.iter().try_fold(ErrorNorms::default(), |acc, &t| Ok(acc.max(error_norms(gs, asymptotic, t)?)))
}

/// Errors of one `eps` on `n` cells, maximized over the sample times.
pub fn run_row(prep: &PreparedProblem, spec: &ExperimentSpec, x_len: f64, eps: f64, n_cells: usize) -> Result<ErrorNorms> {
    let grid = Grid1D { x_len, n_cells, cfl: spec.grid.cfl, t_star: spec.t_star };
    let times = spec.sample_times();
    let opts = SolverOptions { sample_times: times.clone(), ..Default::default() };
    let gs = run(&prep.model, &prep.bc, &prep.init, &grid, eps, &opts)?;
    max_over_samples(&gs, &prep.asymptotic, &times)
}

/// Certify the boundary condition; anything but PASS is refused.
pub fn require_certified(prep: &PreparedProblem, sampling: &SamplingSpec) -> Result<CertificationReport> {
    let report = certify(&prep.bc, &prep.model, sampling);
    if report.verdict != Verdict::Pass {
        return Err(Error::NotCertified { verdict: format!("{:?}", report.verdict).to_uppercase(), c_hat: report.c_hat });
    }
    Ok(report)
}

/// Run every `eps` at `N(eps)` and `2 N(eps)` cells and fit the slopes.
pub fn convergence_study(spec: &ExperimentSpec) -> Result<RateTable> {
    spec.validate()?;
    let prep = PreparedProblem::new(&spec.problem.resolve())?;
    let cert = require_certified(&prep, &spec.gkc)?;
    let x_len = spec.grid.x_len.unwrap_or_else(|| prep.reach(spec.t_star) + DOMAIN_MARGIN);

    let rows: Vec<RateRow> = spec
        .eps
        .par_iter()
        .map(|&eps| {
            let n = spec.grid.cells(x_len, eps);
            let (base, fine) = rayon::join(|| run_row(&prep, spec, x_len, eps, n), || run_row(&prep, spec, x_len, eps, 2 * n));
            let (base, fine) = (base?, fine?);
            let entries = spec
                .norms
                .iter()
                .map(|&k| {
                    let (e, r) = (base.get(k), fine.get(k));
                    let change = if r > 0.0 { (e - r).abs() / r } else { (e - r).abs() };
                    NormEntry { norm: k, error: e, refined: r, change, refinement_ok: change < spec.refine_tol }
                })
                .collect();
            Ok(RateRow { eps, n_cells: n, refined_cells: 2 * n, entries })
        })
        .collect::<Result<_>>()?;

    if rows.iter().all(|r| r.entries.iter().all(|e| !e.refinement_ok)) {
        return Err(Error::InconclusiveStudy);
    }
    let mut table = RateTable {
        problem: spec.problem.label(),
        version: crate::VERSION.to_string(),
        t_star: spec.t_star,
        sample_times: spec.sample_times(),
        x_len,
        gkc_c_hat: Some(cert.c_hat),
        norms: spec.norms.clone(),
        rows,
        fits: Vec::new(),
    };
    table.refit();
    Ok(table)
}

/// Which report files to write besides CSV and JSON.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFormats {
    pub svg: bool,
}

/// CSV of the rows followed by `slope,<norm>,<value>` records.
pub fn table_csv(table: &RateTable) -> Result<String> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut header = vec!["eps".to_string(), "n_cells".to_string()];
    for k in &table.norms {
        for suffix in ["", "_refined", "_change", "_ok"] {
            header.push(format!("{}{suffix}", k.name()));
        }
    }
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![format!("{:e}", r.eps), r.n_cells.to_string()];
        for &k in &table.norms {
            match r.entry(k) {
                Some(e) => rec.extend([format!("{:e}", e.error), format!("{:e}", e.refined), format!("{:e}", e.change), e.refinement_ok.to_string()]),
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        w.write_record(&rec)?;
    }
    for f in &table.fits {
        if let Some(s) = f.slope {
            w.write_record(["slope", f.norm.name(), &format!("{s:.6}")])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

/// Log-log plot of error against `eps`, one polyline per norm.
pub fn table_svg(table: &RateTable) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 50.0;
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .flat_map(|r| r.entries.iter().filter(|e| e.error > 0.0).map(move |e| (r.eps.log10(), e.error.log10())))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * PAD, H - 2.0 * PAD);
    if !pts.is_empty() {
        let range = |f: fn(&(f64, f64)) -> f64| {
            let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min).floor();
            let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
            (lo, if hi > lo { hi } else { lo + 1.0 })
        };
        let (x0, x1) = range(|p| p.0);
        let (y0, y1) = range(|p| p.1);
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        let colors = ["#1f77b4", "#d62728", "#2ca02c"];
        for (i, &k) in table.norms.iter().enumerate() {
            let line: Vec<String> = table
                .rows
                .iter()
                .filter_map(|r| r.entry(k).filter(|e| e.error > 0.0).map(|e| format!("{:.2},{:.2}", sx(r.eps.log10()), sy(e.error.log10()))))
                .collect();
            let color = colors[i % colors.len()];
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, line.join(" "));
            let slope = table.fit(k).and_then(|f| f.slope).map(|s| format!(" slope {s:.3}")).unwrap_or_default();
            let _ = writeln!(svg, r#"<text x="{:.0}" y="{:.0}" fill="{color}" font-size="12">{}{slope}</text>"#, PAD + 8.0, PAD + 16.0 * (i + 1) as f64, k.name());
        }
        let _ = writeln!(svg, r#"<text x="{:.0}" y="{:.0}" font-size="12">log10 eps [{x0}, {x1}], log10 error [{y0}, {y1}]</text>"#, PAD, H - 15.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write `<stem>.csv`, `<stem>.json` and optionally `<stem>.svg` into `dir`.
pub fn emit_report(table: &RateTable, dir: &Path, stem: &str, formats: ReportFormats) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, table_csv(table)?)?;
    out.push(csv_path);
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(table)? + "\n")?;
    out.push(json_path);
    if formats.svg {
        let svg_path = dir.join(format!("{stem}.svg"));
        fs::write(&svg_path, table_svg(table))?;
        out.push(svg_path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eps: f64, errs: &[(NormKind, f64, bool)]) -> RateRow {
        RateRow {
            eps,
            n_cells: 10,
            refined_cells: 20,
            entries: errs
                .iter()
                .map(|&(norm, error, ok)| NormEntry { norm, error, refined: error, change: 0.0, refinement_ok: ok })
                .collect(),
        }
    }

    fn synthetic(rate: f64) -> RateTable {
        let mut t = RateTable::empty(vec![NormKind::L2]);
        t.rows = [2e-2, 1e-2, 5e-3, 2.5e-3].iter().map(|&e: &f64| row(e, &[(NormKind::L2, 3.0 * e.powf(rate), true)])).collect();
        t.refit();
        t
    }

    #[test]
    fn slope_of_power_law() {
        let t = synthetic(1.5);
        let f = t.fit(NormKind::L2).unwrap();
        assert!((f.slope.unwrap() - 1.5).abs() < 1e-12);
        assert!(f.pairwise.iter().all(|s| (s - 1.5).abs() < 1e-12));
        assert!(f.log2_ratios.iter().all(|s| (s - 1.5).abs() < 1e-12));
        assert_eq!(f.stable, Some(true));
        assert!(f.monotone && !f.above_theory);
    }

    #[test]
    fn failed_rows_are_excluded() {
        let mut t = synthetic(1.5);
        t.rows[0].entries[0].error = 100.0;
        t.rows[0].entries[0].refinement_ok = false;
        t.refit();
        let f = t.fit(NormKind::L2).unwrap();
        assert_eq!(f.rows_used, 3);
        assert!((f.slope.unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_table_csv_is_header_only() {
        let csv = table_csv(&RateTable::empty(vec![NormKind::L2, NormKind::H1])).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("eps,n_cells,l2,l2_refined"));
    }

    #[test]
    fn four_rows_and_slope_footer() {
        let csv = table_csv(&synthetic(1.5)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[5], "slope,l2,1.500000");
    }

    #[test]
    fn json_round_trip() {
        let t = synthetic(0.5);
        let s = serde_json::to_string(&t).unwrap();
        let back: RateTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn grid_policy_floor() {
        let g = GridPolicy::default();
        assert_eq!(g.cells(6.5, 0.5), 2000);
        assert_eq!(g.cells(6.5, 1e-4), (6.5 * 1e-4f64.powf(-1.25)).ceil() as usize);
    }

    #[test]
    fn spec_validation() {
        let mut s = ExperimentSpec::new(ProblemRef::Preset(PresetId::P1Czero), vec![1e-2, 2e-2]);
        assert!(matches!(s.validate(), Err(Error::ConfigError(_))));
        s.eps = vec![2e-2, 1e-2];
        assert!(s.validate().is_ok());
        assert_eq!(s.sample_times(), vec![0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn presets_prepare() {
        for id in PresetId::ALL {
            let p = PreparedProblem::new(&ProblemSpec::preset(id)).unwrap();
            assert!(p.u0.is_flat_at_zero(3));
        }
    }

    #[test]
    fn identical_fields_have_zero_error() {
        let p = PreparedProblem::new(&ProblemSpec::preset(PresetId::ScalarLEqN)).unwrap();
        let grid = Grid1D { x_len: 20.0, n_cells: 400, cfl: 0.9, t_star: 0.5 };
        let xs = grid.centers();
        let eps = 0.1;
        let pts = p.asymptotic.sample(&xs, 0.5, eps).unwrap();
        let u = DMatrix::from_fn(1, xs.len(), |_, i| pts[i].0[0]);
        let pv = DMatrix::from_fn(1, xs.len(), |_, i| pts[i].1[0]);
        let gs = GridSolution { grid, eps, snapshots: vec![crate::solver::Snapshot { t: 0.5, u, p: pv }], steps: 0 };
        let e = error_norms(&gs, &p.asymptotic, 0.5).unwrap();
        assert_eq!(e.l2, 0.0);
        assert_eq!(e.h1, 0.0);
        assert!(matches!(error_norms(&gs, &p.asymptotic, 0.3), Err(Error::DomainError(_))));
    }
}
