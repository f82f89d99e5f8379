//! The twelve acceptance checks, each returning a verdict with its measured numbers.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relaxbc::asymptotics::{residual, AsymptoticSolution};
use relaxbc::bc::{b0_identity_residual, bbar_of, build_z, preset, Family, PresetParams};
use relaxbc::compat::{full_report, make_compatible, matched_bhat_signal};
use relaxbc::gkc::{certify, eigen_residual, kappa_pm, q_upper_bound, q_value, stable_bundle, FrequencyPoint, SamplingSpec, Verdict};
use relaxbc::harness::{convergence_study, least_squares_slope, ExperimentSpec, NormKind, PreparedProblem, PresetId, ProblemRef, ProblemSpec, RateTable};
use relaxbc::linalg::{norm_inf, rank};
use relaxbc::model::{GivenBoundaryCondition, SpectralModel};
use relaxbc::signal::SmoothSignal;
use relaxbc::solver::{energy, l2_norm, run, symmetrizer, Grid1D, RelaxationMode, SolverOptions};

use super::{dopri45, random_construction, random_given, random_model, random_profile, random_signal, rng, speed_pair};

#[derive(Clone, Debug)]
pub struct Verdict12 {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict12 {
    fn new(id: usize, name: &'static str, pass: bool, detail: String) -> Self {
        Verdict12 { id, name, pass, detail }
    }

    pub fn line(&self) -> String {
        format!("criterion {:>2} {:<28} {}  {}", self.id, self.name, if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

/// Random point with `eta >= 0`, `Re xi0 > 0` on the unit sphere.
pub fn random_point(r: &mut ChaCha8Rng) -> FrequencyPoint {
    FrequencyPoint::new(r.random_range(0.0..1.0), r.random_range(1e-3..1.0), r.random_range(-1.0..1.0)).normalized()
}

pub fn construction_correctness(seed: u64, cases: usize) -> Verdict12 {
    let start = Instant::now();
    let mut r = rng(seed);
    let (mut worst_z, mut worst_b0, mut rank_fail, mut errors) = (0.0_f64, 0.0_f64, 0, Vec::new());
    for case in 0..cases {
        let n = r.random_range(1..=6);
        let l = r.random_range(1..=n);
        let model = random_model(&mut r, n, l, 1.0);
        let signal = random_signal(&mut r, l);
        let given = random_given(&mut r, &model, signal);
        let bc = match random_construction(&mut r, &model, &given) {
            Ok(bc) => bc,
            Err(e) => {
                errors.push(format!("case {case}: {e}"));
                continue;
            }
        };
        if l < n {
            let z = build_z(&model, &given.bhat, &bc.ctilde).expect("Z for l < n");
            worst_z = worst_z.max(norm_inf(&(bbar_of(&model, &bc) * z)));
        }
        if rank(&bc.full(), 1e-10) != n {
            rank_fail += 1;
        }
        for t in [0.0, 0.3, 0.9, 2.0] {
            worst_b0 = worst_b0.max(b0_identity_residual(&model, &bc, t));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = errors.is_empty() && worst_z <= 1e-10 && worst_b0 <= 1e-11 && rank_fail == 0 && secs < 10.0;
    Verdict12::new(
        1,
        "construction",
        pass,
        format!("|BbarZ| {worst_z:.1e}, b0 identity {worst_b0:.1e}, rank failures {rank_fail}, errors {errors:?}, {secs:.2} s"),
    )
}

pub fn eigenstructure(seed: u64, points: usize, bundle_points: usize) -> Verdict12 {
    let start = Instant::now();
    let mut r = rng(seed);
    let (mut worst_q, mut split_fail, mut errors) = (0.0_f64, 0, 0);
    for _ in 0..points {
        let positive = r.random_bool(0.5);
        let (lambda, a) = speed_pair(&mut r, positive, 1.0);
        let p = random_point(&mut r);
        let Ok((kp, km)) = kappa_pm(a, lambda, p) else {
            errors += 1;
            continue;
        };
        let b = Complex64::new(p.eta * lambda / a, 0.0);
        let c = -(p.xi0 + p.eta) * p.xi0 / a;
        for k in [kp, km] {
            let res = k * k - b * k + c;
            let scale = k.norm_sqr() + b.norm() * k.norm() + c.norm();
            worst_q = worst_q.max(res.norm() / scale);
        }
        if kp.re * km.re >= 0.0 {
            split_fail += 1;
        }
    }
    let mut worst_m = 0.0_f64;
    for _ in 0..bundle_points {
        let n = r.random_range(1..=4);
        let l = r.random_range(0..=n);
        let model = random_model(&mut r, n, l, 1.0);
        let p = random_point(&mut r);
        match stable_bundle(&model, p) {
            Ok(b) => worst_m = worst_m.max(eigen_residual(&model, p, &b)),
            Err(_) => errors += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = errors == 0 && split_fail == 0 && worst_q <= 1e-10 && worst_m <= 1e-8 && secs < 5.0;
    Verdict12::new(
        2,
        "eigenstructure",
        pass,
        format!("quadratic {worst_q:.1e}, MR - RK {worst_m:.1e}, split failures {split_fail}, errors {errors}, {secs:.2} s"),
    )
}

/// Minimum of `|q|` over a `m x m` grid of the normalized interior.
pub fn min_q_on_grid(a: f64, lambda: f64, m: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..m {
        let psi = std::f64::consts::FRAC_PI_2 * (i as f64 + 0.5) / m as f64;
        for k in 0..m {
            let phi = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
            let p = FrequencyPoint::new(psi.cos(), psi.sin() * phi.cos(), psi.sin() * phi.sin());
            if let Ok(q) = q_value(a, lambda, p) {
                best = best.min(q.norm());
            }
        }
    }
    best
}

pub fn q_bounds(seed: u64, points: usize) -> Verdict12 {
    let mut r = rng(seed);
    let (mut worst, mut errors) = (f64::NEG_INFINITY, 0);
    for _ in 0..points {
        let positive = r.random_bool(0.5);
        let (lambda, a) = speed_pair(&mut r, positive, 1.0);
        match q_value(a, lambda, random_point(&mut r)) {
            Ok(q) => worst = worst.max(q.norm() - q_upper_bound(a)),
            Err(_) => errors += 1,
        }
    }
    let mut mins = Vec::new();
    let mut stable = true;
    for _ in 0..8 {
        let (lambda, a) = speed_pair(&mut r, false, 1.0);
        let base = min_q_on_grid(a, lambda, 40);
        let fine = min_q_on_grid(a, lambda, 80);
        stable &= base > 0.0 && (fine - base).abs() <= 0.1 * base;
        mins.push((base, fine));
    }
    let pass = errors == 0 && worst <= 1e-9 && stable;
    let shown: Vec<String> = mins.iter().map(|(b, f)| format!("{b:.3}/{f:.3}")).collect();
    Verdict12::new(
        3,
        "q bounds",
        pass,
        format!("max |q| - bound {worst:.1e}, min |q| base/4x [{}], errors {errors}", shown.join(" ")),
    )
}

pub fn projective_invariance(seed: u64, pairs: usize) -> Verdict12 {
    let mut r = rng(seed);
    let (mut worst, mut errors) = (0.0_f64, 0);
    for _ in 0..pairs {
        let positive = r.random_bool(0.5);
        let (lambda, a) = speed_pair(&mut r, positive, 1.0);
        let p = random_point(&mut r).scaled(10f64.powf(r.random_range(-2.0..2.0)));
        let s = 10f64.powf(r.random_range(-3.0..3.0));
        match (q_value(a, lambda, p), q_value(a, lambda, p.scaled(s))) {
            (Ok(q1), Ok(q2)) => worst = worst.max((q1 - q2).norm()),
            _ => errors += 1,
        }
    }
    Verdict12::new(4, "projective invariance", errors == 0 && worst <= 1e-9, format!("max |q(s p) - q(p)| {worst:.1e}, errors {errors}"))
}

fn scalar_given(lambda: f64, a: f64) -> (SpectralModel, GivenBoundaryCondition) {
    let m = SpectralModel::diagonal(&[lambda], &[a]).unwrap();
    let g = GivenBoundaryCondition::new(&m, DMatrix::identity(1, 1), SmoothSignal::zero(1)).unwrap();
    (m, g)
}

/// `(label, verdict, c_hat)` for each certification case.
pub fn certification_cases() -> Vec<(String, Verdict, f64, Verdict)> {
    let spec = SamplingSpec::default();
    let mut out = Vec::new();
    for id in [PresetId::P1Czero, PresetId::ScalarLEqN] {
        let prep = PreparedProblem::new(&ProblemSpec::preset(id)).unwrap();
        let rep = certify(&prep.bc, &prep.model, &spec);
        out.push((format!("{id:?}"), rep.verdict, rep.c_hat, Verdict::Pass));
    }
    let (m, g) = scalar_given(1.0, 4.0);
    for (bp, want) in [(-1.0, Verdict::Fail), (0.0, Verdict::Pass), (0.5, Verdict::Pass), (-1.01, Verdict::Fail)] {
        let params = PresetParams { bp: Some(vec![vec![bp]]), ..Default::default() };
        let bc = preset(&m, &g, Family::N1Pos, &params).unwrap();
        let rep = certify(&bc, &m, &spec);
        out.push((format!("n=1 B_p={bp}"), rep.verdict, rep.c_hat, want));
    }
    out
}

pub fn gkc_certification() -> Verdict12 {
    let cases = certification_cases();
    let pass = cases.iter().all(|(_, v, c, want)| v == want && (*want != Verdict::Pass || *c > 1e-2));
    let shown: Vec<String> = cases.iter().map(|(l, v, c, _)| format!("{l}: {v:?} {c:.3e}")).collect();
    Verdict12::new(5, "GKC certification", pass, shown.join(", "))
}

/// Largest scaled gap between the closed-form layer and a numerical integration of
/// the layer equations for one random problem.
pub fn layer_oracle_gap(r: &mut ChaCha8Rng) -> relaxbc::Result<f64> {
    let n = r.random_range(2..=4);
    let l = r.random_range(1..n);
    let model = random_model(r, n, l, 0.1);
    let signal = random_signal(r, l);
    let given = random_given(r, &model, signal);
    let bc = random_construction(r, &model, &given)?;
    let u0 = random_profile(r, n);
    let sol = AsymptoticSolution::new(&model, &bc, &u0)?;
    let layer = sol.layer();
    let t = r.random_range(0.2..1.5);

    let g = &model.f * model.abar.clone().try_inverse().expect("Abar is invertible");
    let f_inv = model.f_inv.clone();
    let nu0 = layer.nu0_boundary(t, 1);
    let nu1 = layer.nu1_boundary(t, 0);
    let mut y0 = Vec::with_capacity(3 * n);
    y0.extend(nu0[0].iter());
    y0.extend(nu0[1].iter());
    y0.extend(nu1[0].iter());
    let rhs = |_: f64, y: &[f64]| -> Vec<f64> {
        let v0 = DVector::from_column_slice(&y[0..n]);
        let v0t = DVector::from_column_slice(&y[n..2 * n]);
        let v1 = DVector::from_column_slice(&y[2 * n..3 * n]);
        let mut out = Vec::with_capacity(3 * n);
        out.extend((&g * &v0).iter());
        out.extend((&g * &v0t).iter());
        out.extend((&g * &v1 + &f_inv * &v0t).iter());
        out
    };
    let xis = [0.0, 0.25, 1.0, 2.5, 5.0, 10.0, 20.0, 35.0, 50.0];
    let states = dopri45(rhs, 0.0, &y0, &xis, 1e-12, 1e-15);
    let scale = y0.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0_f64;
    for (xi, y) in xis.iter().zip(&states) {
        let v0 = DVector::from_column_slice(&y[0..n]);
        let v0t = DVector::from_column_slice(&y[n..2 * n]);
        let v1 = DVector::from_column_slice(&y[2 * n..3 * n]);
        let p = layer.eval(*xi, t)?;
        let gaps = [
            (&p.nu0 - &v0).amax(),
            (&p.nu0_xi - &g * &v0).amax(),
            (&p.nu0_t - &v0t).amax(),
            (&p.mu0 + &f_inv * &v0).amax(),
            (&p.nu1 - &v1).amax(),
            (&p.nu1_xi - (&g * &v1 + &f_inv * &v0t)).amax(),
        ];
        worst = gaps.iter().fold(worst, |m, v| m.max(*v));
    }
    Ok(worst / scale)
}

pub fn layer_oracle(seed: u64, cases: usize) -> Verdict12 {
    let mut r = rng(seed);
    let mut worst = 0.0_f64;
    let mut errors = Vec::new();
    for case in 0..cases {
        match layer_oracle_gap(&mut r) {
            Ok(g) => worst = worst.max(g),
            Err(e) => errors.push(format!("case {case}: {e}")),
        }
    }
    Verdict12::new(6, "layer oracle", errors.is_empty() && worst <= 1e-8, format!("max scaled gap {worst:.1e}, errors {errors:?}"))
}

/// `(eps, L2 of residual, max pointwise mismatch)` for the layered preset at `t = 0.5`.
pub fn residual_scan(eps_list: &[f64]) -> relaxbc::Result<Vec<(f64, f64, f64)>> {
    let prep = PreparedProblem::new(&ProblemSpec::preset(PresetId::P1Clambda))?;
    let x_len = prep.reach(1.0) + 0.5;
    let t = 0.5;
    let xs: Vec<f64> = (0..4001).map(|i| x_len * i as f64 / 4000.0).collect();
    eps_list
        .iter()
        .map(|&eps| {
            let rep = residual(&prep.asymptotic, eps, &xs, t)?;
            let near: Vec<f64> = (0..400).map(|k| k as f64 * 0.05 * eps).collect();
            let layer = residual(&prep.asymptotic, eps, &near, t)?;
            Ok((eps, rep.l2, rep.max_mismatch.max(layer.max_mismatch)))
        })
        .collect()
}

pub fn asymptotic_residual() -> Verdict12 {
    let eps = [1e-1, 1e-2, 1e-3];
    match residual_scan(&eps) {
        Ok(rows) => {
            let x: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
            let slope = least_squares_slope(&x, &y).unwrap_or(f64::NAN);
            let mismatch = rows.iter().map(|r| r.2).fold(0.0, f64::max);
            let pass = mismatch <= 1e-8 && (slope - 1.0).abs() <= 0.1;
            Verdict12::new(7, "asymptotic residual", pass, format!("pointwise mismatch {mismatch:.1e}, L2 slope {slope:.3}"))
        }
        Err(e) => Verdict12::new(7, "asymptotic residual", false, format!("error: {e}")),
    }
}

/// Worst relaxation corner-identity coefficient over presets and random compatible data.
pub fn compat_worst(seed: u64, random_cases: usize) -> relaxbc::Result<(f64, bool)> {
    let mut worst = 0.0_f64;
    let mut all_pass = true;
    let mut record = |model: &SpectralModel, given: &GivenBoundaryCondition, bc: &relaxbc::bc::ConstructedBC, u0: &relaxbc::profile::SmoothProfile| {
        for eps in [1e-1, 1e-3] {
            let rep = full_report(model, given, bc, u0, eps);
            all_pass &= rep.pass() && rep.relaxation.len() == 3;
            for c in &rep.relaxation {
                worst = c.eps_coefficients.iter().fold(worst, |m, v| m.max(*v));
            }
        }
    };
    for id in PresetId::ALL {
        let prep = PreparedProblem::new(&ProblemSpec::preset(id))?;
        record(&prep.model, &prep.given, &prep.bc, &prep.u0);
    }
    let mut r = rng(seed);
    for _ in 0..random_cases {
        let n = r.random_range(1..=4);
        let l = r.random_range(1..=n);
        let model = random_model(&mut r, n, l, 1.0);
        let u0 = random_profile(&mut r, n);
        let probe = random_given(&mut r, &model, SmoothSignal::zero(l));
        let signal = matched_bhat_signal(&model, &probe.bhat, &u0);
        let given = GivenBoundaryCondition::new(&model, probe.bhat.clone(), signal)?;
        let raw = random_construction(&mut r, &model, &given)?;
        let bc = make_compatible(&model, &given, &raw, &u0)?;
        record(&model, &given, &bc, &u0);
    }
    Ok((worst, all_pass))
}

pub fn compatibility(seed: u64) -> Verdict12 {
    match compat_worst(seed, 20) {
        Ok((worst, all)) => {
            Verdict12::new(8, "compatibility", all && worst <= 1e-10, format!("worst eps-coefficient residual {worst:.1e}, all reports pass {all}"))
        }
        Err(e) => Verdict12::new(8, "compatibility", false, format!("error: {e}")),
    }
}

pub const STUDY_EPS: [f64; 4] = [2e-2, 1e-2, 5e-3, 2.5e-3];

pub fn study(id: PresetId, norms: Vec<NormKind>) -> relaxbc::Result<RateTable> {
    let mut spec = ExperimentSpec::new(ProblemRef::Preset(id), STUDY_EPS.to_vec());
    spec.norms = norms;
    convergence_study(&spec)
}

fn slope_in(table: &relaxbc::Result<RateTable>, k: NormKind, lo: f64, hi: f64) -> (bool, String) {
    match table {
        Ok(t) => match t.fit(k).and_then(|f| f.slope.map(|s| (s, f.rows_used))) {
            Some((s, used)) => (s >= lo && s <= hi, format!("{} slope {s:.3} over {used} rows, band [{lo}, {hi}]", k.name())),
            None => (false, format!("{} slope unavailable: no refinement-passed rows", k.name())),
        },
        Err(e) => (false, format!("study failed: {e}")),
    }
}

/// Criteria 9 and 10 from one study of P1/GEN_CZERO.
pub fn convergence_rates() -> (Verdict12, Verdict12) {
    let start = Instant::now();
    let table = study(PresetId::P1Czero, vec![NormKind::L2, NormKind::H1]);
    let secs = start.elapsed().as_secs_f64();
    let (p9, d9) = slope_in(&table, NormKind::L2, 1.35, 1.65);
    let (p10, d10) = slope_in(&table, NormKind::H1, 0.35, 0.65);
    (
        Verdict12::new(9, "L2 rate", p9 && secs <= 600.0, format!("{d9}, {secs:.0} s")),
        Verdict12::new(10, "H1 rate", p10, d10),
    )
}

pub fn equilibrium_limit() -> Verdict12 {
    let layered = study(PresetId::P1Clambda, vec![NormKind::L2VsU0bar]);
    let free = study(PresetId::ScalarLEqN, vec![NormKind::L2VsU0bar]);
    let (p1, d1) = slope_in(&layered, NormKind::L2VsU0bar, 0.35, 0.65);
    let (p2, d2) = slope_in(&free, NormKind::L2VsU0bar, 0.9, f64::INFINITY);
    Verdict12::new(11, "equilibrium limit", p1 && p2, format!("layered P1/GEN_CLAMBDA: {d1}; layer-free l=n: {d2}"))
}

fn grid_for(prep: &PreparedProblem, n_cells: usize, t_star: f64) -> Grid1D {
    Grid1D { x_len: prep.reach(t_star) + 0.5, n_cells, cfl: 0.9, t_star }
}

/// Interior L2 gap between the exact-relaxation run at `eps` and the projected run.
pub fn ap_gap(eps: f64) -> relaxbc::Result<f64> {
    let prep = PreparedProblem::new(&ProblemSpec::preset(PresetId::P1Czero))?;
    let grid = grid_for(&prep, 2000, 1.0);
    let exact = run(&prep.model, &prep.bc, &prep.init, &grid, eps, &SolverOptions::default())?;
    let opts = SolverOptions { relaxation: RelaxationMode::Projection, ..Default::default() };
    let proj = run(&prep.model, &prep.bc, &prep.init, &grid, eps, &opts)?;
    let (a, b) = (exact.at(1.0)?, proj.at(1.0)?);
    let first = grid.centers().iter().position(|x| *x >= 0.5).unwrap_or(0);
    let cols = grid.n_cells - first;
    let diff = a.stacked().columns(first, cols) - b.stacked().columns(first, cols);
    Ok(l2_norm(&diff, grid.dx()))
}

/// Average adjacent cell pairs onto the coarse grid.
fn restrict(fine: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(fine.nrows(), fine.ncols() / 2, |i, j| 0.5 * (fine[(i, 2 * j)] + fine[(i, 2 * j + 1)]))
}

/// Observed order from self-convergence on `N, 2N, 4N` cells.
pub fn observed_order(eps: f64, order: usize, n0: usize) -> relaxbc::Result<f64> {
    let prep = PreparedProblem::new(&ProblemSpec::preset(PresetId::P1Czero))?;
    let opts = SolverOptions { order, ..Default::default() };
    let fields: Vec<(DMatrix<f64>, f64)> = [n0, 2 * n0, 4 * n0]
        .iter()
        .map(|&n| {
            let grid = grid_for(&prep, n, 1.0);
            let sol = run(&prep.model, &prep.bc, &prep.init, &grid, eps, &opts)?;
            Ok((sol.at(1.0)?.stacked(), grid.dx()))
        })
        .collect::<relaxbc::Result<_>>()?;
    let e1 = l2_norm(&(&fields[0].0 - restrict(&fields[1].0)), fields[0].1);
    let e2 = l2_norm(&(&fields[1].0 - restrict(&fields[2].0)), fields[1].1);
    Ok((e1 / e2).log2())
}

/// Relative error of the relaxation-only run against `p(0) exp(-t / eps)`, and whether `u` is untouched.
pub fn relaxation_only_error(eps: f64) -> relaxbc::Result<(f64, bool)> {
    let prep = PreparedProblem::new(&ProblemSpec::preset(PresetId::P1Czero))?;
    let grid = grid_for(&prep, 500, 1.0);
    let opts = SolverOptions { transport: false, sample_times: vec![0.25, 0.5], ..Default::default() };
    let sol = run(&prep.model, &prep.bc, &prep.init, &grid, eps, &opts)?;
    let s0 = &sol.snapshots[0];
    let scale = s0.p.amax().max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    let mut u_same = true;
    for s in &sol.snapshots[1..] {
        let expected = &s0.p * (-s.t / eps).exp();
        worst = worst.max((&s.p - expected).amax() / scale);
        u_same &= (&s.u - &s0.u).amax() <= 1e-14 * s0.u.amax();
    }
    Ok((worst, u_same))
}

/// Largest relative energy increase between consecutive samples, for homogeneous boundary data.
pub fn energy_increase(id: PresetId, eps: f64) -> relaxbc::Result<f64> {
    let prep = PreparedProblem::new(&ProblemSpec::preset(id))?;
    let mut bc = prep.bc.clone();
    let n = prep.model.n;
    bc.b0 = SmoothSignal::zero(n);
    bc.b1 = SmoothSignal::zero(n);
    bc.b2 = SmoothSignal::zero(n);
    let grid = grid_for(&prep, 1000, 1.0);
    let times: Vec<f64> = (1..40).map(|k| k as f64 / 40.0).collect();
    let opts = SolverOptions { sample_times: times, ..Default::default() };
    let sol = run(&prep.model, &bc, &prep.init, &grid, eps, &opts)?;
    let a0 = symmetrizer(&prep.model)?;
    let e: Vec<f64> = sol.snapshots.iter().map(|s| energy(&a0, s, grid.dx())).collect();
    Ok(e.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max))
}

pub fn solver_sanity() -> Verdict12 {
    let result = (|| -> relaxbc::Result<(bool, String)> {
        let ap = ap_gap(1e-10)?;
        let order = observed_order(1.0, 2, 400)?;
        let (relax, u_same) = relaxation_only_error(0.1)?;
        let rise = energy_increase(PresetId::ScalarLEqN, 1.0)?.max(energy_increase(PresetId::ScalarLEqN, 1e-3)?);
        let pass = ap <= 1e-8 && order >= 1.9 && relax <= 1e-14 && u_same && rise <= 1e-12;
        Ok((
            pass,
            format!("AP gap {ap:.1e}, order {order:.3}, relaxation error {relax:.1e} (u untouched {u_same}), max energy rise {rise:.1e}"),
        ))
    })();
    match result {
        Ok((pass, d)) => Verdict12::new(12, "solver sanity", pass, d),
        Err(e) => Verdict12::new(12, "solver sanity", false, format!("error: {e}")),
    }
}
