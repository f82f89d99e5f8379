//! Stiff solver for the relaxation system on `[0, X]`.
//!
//! Each eigenmode `j` of `F` carries two characteristic variables
//! `c_j^± = (lambda_j ± sqrt a_j) u^_j + p^_j` (hats are `T^{-1}` coordinates) moving with
//! speeds `± sqrt a_j`. A step is Strang split: half relaxation `p <- p exp(-dt / 2 eps)`,
//! transport, half relaxation. Boundary data enter the transport at the midpoint of the
//! step. Transport is Fromm's upwind scheme with central slopes; the incoming `c^+` at
//! `x = 0` comes from the boundary rows together with the outgoing `c^-` face values.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bc::ConstructedBC;
use crate::compat::RelaxationInitialData;
use crate::error::{Error, Result};
use crate::linalg::inverse_checked;
use crate::model::{SpectralModel, SubcharacteristicStatus};
use crate::signal::{SmoothSignal, TimeFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    /// Domain length `X`.
    pub x_len: f64,
    pub n_cells: usize,
    /// CFL number in `(0, 1]`.
    pub cfl: f64,
    pub t_star: f64,
}

impl Grid1D {
    pub fn dx(&self) -> f64 {
        self.x_len / self.n_cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_cells).map(|i| (i as f64 + 0.5) * dx).collect()
    }

    /// Largest stable step `cfl dx / max sqrt a_j`.
    pub fn dt_max(&self, model: &SpectralModel) -> f64 {
        self.cfl * self.dx() / model.max_speed()
    }

    /// Check the CFL number and that the right end stays outside the domain of influence.
    pub fn validate(&self, model: &SpectralModel, support_max: f64) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::ConfigError(format!("CFL number {} is outside (0, 1]", self.cfl)));
        }
        if self.n_cells < 4 || !(self.x_len > 0.0) || !(self.t_star > 0.0) {
            return Err(Error::ConfigError("grid needs X > 0, t* > 0 and at least 4 cells".into()));
        }
        let reach = support_max + self.t_star * model.max_speed();
        if self.x_len <= reach {
            return Err(Error::ConfigError(format!(
                "domain length {} does not exceed support plus propagation distance {reach}",
                self.x_len
            )));
        }
        Ok(())
    }
}

/// `L` with `L A L^{-1} = diag(sqrt a, -sqrt a)`.
#[derive(Clone, Debug)]
pub struct CharacteristicFrame {
    pub n: usize,
    pub lambda: DVector<f64>,
    pub sqrt_a: DVector<f64>,
    pub l: DMatrix<f64>,
    pub l_inv: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
}

impl CharacteristicFrame {
    pub fn speeds(&self) -> DVector<f64> {
        let n = self.n;
        DVector::from_iterator(2 * n, self.sqrt_a.iter().copied().chain(self.sqrt_a.iter().map(|v| -v)))
    }

    /// `(c^+, c^-)` of a physical state.
    pub fn to_characteristic(&self, u: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let uh = &self.t_inv * u;
        let ph = &self.t_inv * p;
        let cp = DVector::from_iterator(self.n, (0..self.n).map(|j| (self.lambda[j] + self.sqrt_a[j]) * uh[j] + ph[j]));
        let cm = DVector::from_iterator(self.n, (0..self.n).map(|j| (self.lambda[j] - self.sqrt_a[j]) * uh[j] + ph[j]));
        (cp, cm)
    }

    /// Physical `(u, p)` from `(c^+, c^-)`.
    pub fn to_physical(&self, cp: &DVector<f64>, cm: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut uh = DVector::zeros(self.n);
        let mut ph = DVector::zeros(self.n);
        for j in 0..self.n {
            let (u, p) = hat_from_char(self.lambda[j], self.sqrt_a[j], cp[j], cm[j]);
            uh[j] = u;
            ph[j] = p;
        }
        (&self.t * uh, &self.t * ph)
    }
}

#[inline]
fn hat_from_char(lam: f64, s: f64, cp: f64, cm: f64) -> (f64, f64) {
    let u = (cp - cm) / (2.0 * s);
    (u, cp - (lam + s) * u)
}

pub fn characteristic_frame(model: &SpectralModel) -> CharacteristicFrame {
    let n = model.n;
    let sqrt_a = model.a.map(f64::sqrt);
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    let plus = DMatrix::from_diagonal(&(&model.lambda + &sqrt_a)) * &model.t_inv;
    let minus = DMatrix::from_diagonal(&(&model.lambda - &sqrt_a)) * &model.t_inv;
    l.view_mut((0, 0), (n, n)).copy_from(&plus);
    l.view_mut((n, 0), (n, n)).copy_from(&minus);
    l.view_mut((0, n), (n, n)).copy_from(&model.t_inv);
    l.view_mut((n, n), (n, n)).copy_from(&model.t_inv);
    let l_inv = l.clone().try_inverse().expect("characteristic frame is invertible for a > 0");
    CharacteristicFrame { n, lambda: model.lambda.clone(), sqrt_a, l, l_inv, t: model.t.clone(), t_inv: model.t_inv.clone() }
}

/// `A0 = blockdiag(T^{-T} (Abar_diag - Lambda^2) T^{-1}, T^{-T} T^{-1})`.
pub fn symmetrizer(model: &SpectralModel) -> Result<DMatrix<f64>> {
    if model.subcharacteristic_status() != SubcharacteristicStatus::Strict {
        return Err(Error::SymmetrizerUnavailable);
    }
    let n = model.n;
    let gap = DVector::from_iterator(n, (0..n).map(|j| model.gap(j)));
    let mut a0 = DMatrix::zeros(2 * n, 2 * n);
    a0.view_mut((0, 0), (n, n)).copy_from(&(model.t_inv.transpose() * DMatrix::from_diagonal(&gap) * &model.t_inv));
    a0.view_mut((n, n), (n, n)).copy_from(&(model.t_inv.transpose() * &model.t_inv));
    Ok(a0)
}

/// Precomputed boundary rows in characteristic form: `c^+ = M_in^{-1} (b - M_out c^-)`.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    m_in_inv: DMatrix<f64>,
    m_out: DMatrix<f64>,
    pub cond: f64,
}

impl BoundaryOperator {
    pub fn new(frame: &CharacteristicFrame, bu: &DMatrix<f64>, bp: &DMatrix<f64>) -> Result<Self> {
        let n = frame.n;
        let but = bu * &frame.t;
        let bpt = bp * &frame.t;
        let mut m_in = DMatrix::zeros(n, n);
        let mut m_out = DMatrix::zeros(n, n);
        for j in 0..n {
            let (lam, s) = (frame.lambda[j], frame.sqrt_a[j]);
            // u^ = (c+ - c-) / 2s, p^ = ((s - lam) c+ + (s + lam) c-) / 2s
            let col_in = but.column(j) / (2.0 * s) + bpt.column(j) * ((s - lam) / (2.0 * s));
            let col_out = -but.column(j) / (2.0 * s) + bpt.column(j) * ((s + lam) / (2.0 * s));
            m_in.set_column(j, &col_in);
            m_out.set_column(j, &col_out);
        }
        let (m_in_inv, cond) = inverse_checked(&m_in).map_err(|e| {
            Error::BoundarySolveFailure(format!("boundary rows cannot determine the incoming characteristics ({e}); the Kreiss condition is likely violated"))
        })?;
        Ok(BoundaryOperator { m_in_inv, m_out, cond })
    }

    /// Incoming characteristic values for given outgoing ones and boundary data.
    pub fn incoming(&self, outgoing: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        &self.m_in_inv * (b - &self.m_out * outgoing)
    }
}

/// Ghost state at `x = 0`: satisfies `B (u, p) = b` and carries the given outgoing `c^-`.
pub fn boundary_solve(
    frame: &CharacteristicFrame,
    bc: &ConstructedBC,
    outgoing: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let op = BoundaryOperator::new(frame, &bc.bu, &bc.bp)?;
    let cp = op.incoming(outgoing, b);
    Ok(frame.to_physical(&cp, outgoing))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationMode {
    /// `p <- p exp(-dt / eps)`.
    Exact,
    /// `p <- 0`, the `eps -> 0` limit of the scheme.
    Projection,
    /// No source term.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// 1 (upwind) or 2 (Fromm).
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_relaxation")]
    pub relaxation: RelaxationMode,
    #[serde(default = "default_true")]
    pub transport: bool,
    /// Output times in `(0, t*]`; `t*` is always included.
    #[serde(default)]
    pub sample_times: Vec<f64>,
}

fn default_order() -> usize {
    2
}

fn default_relaxation() -> RelaxationMode {
    RelaxationMode::Exact
}

fn default_true() -> bool {
    true
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { order: 2, relaxation: RelaxationMode::Exact, transport: true, sample_times: Vec::new() }
    }
}

/// `(u, p)` on cell centers at one time; columns are cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    #[serde(with = "crate::linalg::serde_rows")]
    pub u: DMatrix<f64>,
    #[serde(with = "crate::linalg::serde_rows")]
    pub p: DMatrix<f64>,
}

impl Snapshot {
    /// `(u; p)` stacked, `2n x N`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.u.nrows();
        let mut s = DMatrix::zeros(2 * n, self.u.ncols());
        s.view_mut((0, 0), (n, self.u.ncols())).copy_from(&self.u);
        s.view_mut((n, 0), (n, self.u.ncols())).copy_from(&self.p);
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: Grid1D,
    pub eps: f64,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
}

impl GridSolution {
    pub fn at(&self, t: f64) -> Result<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::DomainError(format!("no snapshot at t = {t}")))
    }
}

/// Discrete `L^2` norm of a field sampled at cell centers (rows are components).
pub fn l2_norm(field: &DMatrix<f64>, dx: f64) -> f64 {
    (field.iter().map(|v| v * v).sum::<f64>() * dx).sqrt()
}

/// Derivative by central differences with one-sided second-order ends.
pub fn x_derivative(field: &DMatrix<f64>, dx: f64) -> DMatrix<f64> {
    let (r, c) = field.shape();
    let mut d = DMatrix::zeros(r, c);
    if c < 3 {
        return d;
    }
    for i in 0..r {
        d[(i, 0)] = (-3.0 * field[(i, 0)] + 4.0 * field[(i, 1)] - field[(i, 2)]) / (2.0 * dx);
        d[(i, c - 1)] = (3.0 * field[(i, c - 1)] - 4.0 * field[(i, c - 2)] + field[(i, c - 3)]) / (2.0 * dx);
        for k in 1..c - 1 {
            d[(i, k)] = (field[(i, k + 1)] - field[(i, k - 1)]) / (2.0 * dx);
        }
    }
    d
}

pub fn h1_norm(field: &DMatrix<f64>, dx: f64) -> f64 {
    let l2 = l2_norm(field, dx);
    let d = l2_norm(&x_derivative(field, dx), dx);
    (l2 * l2 + d * d).sqrt()
}

/// `sum (u, p)^T A0 (u, p) dx`.
pub fn energy(a0: &DMatrix<f64>, snap: &Snapshot, dx: f64) -> f64 {
    let s = snap.stacked();
    (0..s.ncols()).map(|i| s.column(i).dot(&(a0 * s.column(i)))).sum::<f64>() * dx
}

struct State {
    /// `cp[j][i]`, right-moving.
    cp: Vec<Vec<f64>>,
    /// `cm[j][i]`, left-moving.
    cm: Vec<Vec<f64>>,
}

fn slopes(c: &[f64], order: usize) -> Vec<f64> {
    let n = c.len();
    if order < 2 {
        return vec![0.0; n];
    }
    let mut s = vec![0.0; n];
    s[0] = c[1] - c[0];
    s[n - 1] = c[n - 1] - c[n - 2];
    for i in 1..n - 1 {
        s[i] = 0.5 * (c[i + 1] - c[i - 1]);
    }
    s
}

/// Right-moving update with Courant number `nu` and inflow face value at `x = 0`.
fn advect_right(c: &mut [f64], nu: f64, inflow: f64, order: usize) {
    let s = slopes(c, order);
    let k = 0.5 * (1.0 - nu);
    let mut left = inflow;
    for i in 0..c.len() {
        let right = c[i] + k * s[i];
        c[i] -= nu * (right - left);
        left = right;
    }
}

/// Face value of a left-moving variable at `x = 0` over the coming substep.
fn outgoing_face(c: &[f64], nu: f64, order: usize) -> f64 {
    let s0 = if order < 2 { 0.0 } else { c[1] - c[0] };
    c[0] - 0.5 * (1.0 - nu) * s0
}

/// Left-moving update; the face beyond the last cell copies the last cell.
fn advect_left(c: &mut [f64], nu: f64, order: usize) {
    let s = slopes(c, order);
    let k = 0.5 * (1.0 - nu);
    let n = c.len();
    let mut right = c[n - 1];
    for i in (0..n).rev() {
        let left = c[i] - k * s[i];
        c[i] += nu * (right - left);
        right = left;
    }
}

struct Stepper<'a> {
    frame: &'a CharacteristicFrame,
    op: BoundaryOperator,
    b: SmoothSignal,
    dx: f64,
    eps: f64,
    opts: &'a SolverOptions,
}

impl Stepper<'_> {
    fn transport(&self, st: &mut State, t: f64, h: f64) {
        if !self.opts.transport {
            return;
        }
        let n = self.frame.n;
        let order = self.opts.order;
        let nus: Vec<f64> = (0..n).map(|j| self.frame.sqrt_a[j] * h / self.dx).collect();
        let out = DVector::from_iterator(n, (0..n).map(|j| outgoing_face(&st.cm[j], nus[j], order)));
        let inflow = self.op.incoming(&out, &self.b.eval(t + 0.5 * h));
        st.cp.par_iter_mut().enumerate().for_each(|(j, c)| advect_right(c, nus[j], inflow[j], order));
        st.cm.par_iter_mut().enumerate().for_each(|(j, c)| advect_left(c, nus[j], order));
    }

    fn relax(&self, st: &mut State, h: f64) {
        let theta = match self.opts.relaxation {
            RelaxationMode::Exact => (-h / self.eps).exp(),
            RelaxationMode::Projection => 0.0,
            RelaxationMode::Off => return,
        };
        let f = self.frame;
        st.cp.par_iter_mut().zip(st.cm.par_iter_mut()).enumerate().for_each(|(j, (cp, cm))| {
            let (lam, s) = (f.lambda[j], f.sqrt_a[j]);
            for (a, b) in cp.iter_mut().zip(cm.iter_mut()) {
                let (u, p) = hat_from_char(lam, s, *a, *b);
                let p = p * theta;
                *a = (lam + s) * u + p;
                *b = (lam - s) * u + p;
            }
        });
    }

    fn snapshot(&self, st: &State, t: f64) -> Snapshot {
        let f = self.frame;
        let n = f.n;
        let cells = st.cp[0].len();
        let mut uh = DMatrix::zeros(n, cells);
        let mut ph = DMatrix::zeros(n, cells);
        for j in 0..n {
            for i in 0..cells {
                let (u, p) = hat_from_char(f.lambda[j], f.sqrt_a[j], st.cp[j][i], st.cm[j][i]);
                uh[(j, i)] = u;
                ph[(j, i)] = p;
            }
        }
        Snapshot { t, u: &f.t * uh, p: &f.t * ph }
    }
}

/// Strang-split run from `t = 0` to `grid.t_star`, recording `t = 0` and every sample time.
pub fn run(
    model: &SpectralModel,
    bc: &ConstructedBC,
    init: &RelaxationInitialData,
    grid: &Grid1D,
    eps: f64,
    opts: &SolverOptions,
) -> Result<GridSolution> {
    if !(eps > 0.0) {
        return Err(Error::ConfigError(format!("eps = {eps} must be positive")));
    }
    if opts.order != 1 && opts.order != 2 {
        return Err(Error::ConfigError(format!("transport order {} is not 1 or 2", opts.order)));
    }
    grid.validate(model, init.u_init.x_max())?;
    let frame = characteristic_frame(model);
    let op = BoundaryOperator::new(&frame, &bc.bu, &bc.bp)?;
    let stepper = Stepper { frame: &frame, op, b: bc.b_eps(eps), dx: grid.dx(), eps, opts };

    let xs = grid.centers();
    let n = model.n;
    let mut st = State { cp: vec![vec![0.0; xs.len()]; n], cm: vec![vec![0.0; xs.len()]; n] };
    for (i, &x) in xs.iter().enumerate() {
        let (cp, cm) = frame.to_characteristic(&init.u(x), &init.p(x, eps));
        for j in 0..n {
            st.cp[j][i] = cp[j];
            st.cm[j][i] = cm[j];
        }
    }

    let mut times: Vec<f64> = opts.sample_times.iter().copied().filter(|t| *t > 0.0 && *t < grid.t_star).collect();
    times.push(grid.t_star);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let dt_max = grid.dt_max(model);
    let mut snapshots = vec![stepper.snapshot(&st, 0.0)];
    let mut t = 0.0;
    let mut steps = 0;
    for &target in &times {
        let m = ((target - t) / dt_max).ceil().max(1.0) as usize;
        let dt = (target - t) / m as f64;
        stepper.relax(&mut st, 0.5 * dt);
        for k in 0..m {
            stepper.transport(&mut st, t + k as f64 * dt, dt);
            let h = if k + 1 == m { 0.5 * dt } else { dt };
            stepper.relax(&mut st, h);
        }
        steps += m;
        t = target;
        snapshots.push(stepper.snapshot(&st, t));
        if !snapshots.last().unwrap().u.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericsError(format!("solution blew up before t = {t}")));
        }
    }
    Ok(GridSolution { grid: grid.clone(), eps, snapshots, steps })
}
