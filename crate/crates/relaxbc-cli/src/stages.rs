//! Pipeline stages. Each writes one JSON artifact wrapped in an [`Artifact`] envelope.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use relaxbc::asymptotics::{residual, ResidualReport};
use relaxbc::bc::ConstructedBC;
use relaxbc::compat::{build_initial_data, full_report, make_compatible, CompatibilityReport, RelaxationInitialData};
use relaxbc::gkc::{certify, ratio_field, CertificationReport, Verdict};
use relaxbc::harness::{convergence_study, emit_report, error_norms, ErrorNorms, PreparedProblem, ProblemSpec, RateTable, ReportFormats};
use relaxbc::model::{GivenBoundaryCondition, SpectralModel};
use relaxbc::solver::{energy, h1_norm, l2_norm, run, symmetrizer, SolverOptions};
use relaxbc::signal::SmoothSignal;
use relaxbc::Error;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub stage: String,
    pub version: String,
    pub config_hash: String,
    pub outcome: Outcome,
    pub data: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Construct,
    Certify,
    Compat,
    Asymptotic,
    Stiff,
    Converge,
}

impl Stage {
    pub const PIPELINE: [Stage; 6] = [Stage::Construct, Stage::Certify, Stage::Compat, Stage::Asymptotic, Stage::Stiff, Stage::Converge];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Construct => "construct-bc",
            Stage::Certify => "verify-gkc",
            Stage::Compat => "compat-check",
            Stage::Asymptotic => "run-asymptotic",
            Stage::Stiff => "run-stiff",
            Stage::Converge => "converge",
        }
    }

    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Construct => "bc.json",
            Stage::Certify => "gkc.json",
            Stage::Compat => "compat.json",
            Stage::Asymptotic => "asymptotic.json",
            Stage::Stiff => "stiff.json",
            Stage::Converge => "converge.json",
        }
    }
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub hash: String,
    pub out: PathBuf,
    /// Write the ratio field CSV in `verify-gkc`.
    pub gkc_field: bool,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out: PathBuf) -> Self {
        let hash = cfg.hash();
        Ctx { cfg, hash, out, gkc_field: false }
    }

    fn write<T: Serialize>(&self, stage: Stage, outcome: Outcome, data: T) -> Result<(), CliError> {
        let art = Artifact { stage: stage.name().into(), version: relaxbc::VERSION.into(), config_hash: self.hash.clone(), outcome, data };
        write_file(&self.out.join(stage.artifact()), &(serde_json::to_string_pretty(&art).map_err(Error::from)? + "\n"))
    }

    fn write_aux(&self, name: &str, text: &str) -> Result<(), CliError> {
        write_file(&self.out.join(name), text)
    }

    /// Outcome of an existing artifact built from the same config and version.
    pub fn reusable(&self, stage: Stage) -> Option<Outcome> {
        let text = fs::read_to_string(self.out.join(stage.artifact())).ok()?;
        let art: Artifact<serde_json::Value> = serde_json::from_str(&text).ok()?;
        (art.config_hash == self.hash && art.version == relaxbc::VERSION && art.stage == stage.name()).then_some(art.outcome)
    }

    fn spec(&self) -> ProblemSpec {
        self.cfg.problem.resolve()
    }

    fn base(&self, stage: Stage) -> Result<(SpectralModel, GivenBoundaryCondition, ConstructedBC), CliError> {
        let spec = self.spec();
        let tag = |e| CliError::stage(stage, e);
        let model = SpectralModel::from_doc(&spec.model).map_err(tag)?;
        let given = GivenBoundaryCondition::from_doc(&model, &spec.given).map_err(tag)?;
        let bc = spec.construction.build(&model, &given).map_err(tag)?;
        Ok((model, given, bc))
    }

    fn prepared(&self, stage: Stage) -> Result<PreparedProblem, CliError> {
        PreparedProblem::new(&self.spec()).map_err(|e| CliError::stage(stage, e))
    }

    pub fn run(&self, stage: Stage) -> Result<Outcome, CliError> {
        match stage {
            Stage::Construct => self.construct(),
            Stage::Certify => self.certify(),
            Stage::Compat => self.compat(),
            Stage::Asymptotic => self.asymptotic(),
            Stage::Stiff => self.stiff(),
            Stage::Converge => self.converge(),
        }
    }

    fn construct(&self) -> Result<Outcome, CliError> {
        let (_, _, bc) = self.base(Stage::Construct)?;
        if let Some(h) = &bc.hypothesis {
            if h.satisfied == Some(false) {
                eprintln!("warning: sufficient condition not met: {}", h.condition);
            }
        }
        self.write(Stage::Construct, Outcome::Pass, &bc)?;
        Ok(Outcome::Pass)
    }

    fn certify(&self) -> Result<Outcome, CliError> {
        let (model, _, bc) = self.base(Stage::Certify)?;
        let report: CertificationReport = certify(&bc, &model, &self.cfg.gkc);
        let outcome = match report.verdict {
            Verdict::Pass => Outcome::Pass,
            Verdict::Fail => Outcome::Fail,
            Verdict::Inconclusive => Outcome::Inconclusive,
        };
        if self.gkc_field {
            let mut csv = String::from("eta,xi0_re,xi0_im,ratio\n");
            for (p, r) in ratio_field(&bc, &model, &self.cfg.gkc) {
                let _ = writeln!(csv, "{:e},{:e},{:e},{:e}", p.eta, p.xi0.re, p.xi0.im, r);
            }
            self.write_aux("gkc_field.csv", &csv)?;
        }
        self.write(Stage::Certify, outcome, &report)?;
        Ok(outcome)
    }

    fn compat(&self) -> Result<Outcome, CliError> {
        #[derive(Serialize)]
        struct CompatData<'a> {
            report: &'a CompatibilityReport,
            bc: &'a ConstructedBC,
        }
        let (model, given, bc) = self.base(Stage::Compat)?;
        let u0 = self.spec().u0;
        let bc = make_compatible(&model, &given, &bc, &u0).map_err(|e| CliError::stage(Stage::Compat, e))?;
        let eps = self.cfg.asymptotic.as_ref().map_or(1e-2, |a| a.eps);
        let report = full_report(&model, &given, &bc, &u0, eps);
        let outcome = if report.pass() { Outcome::Pass } else { Outcome::Fail };
        self.write(Stage::Compat, outcome, CompatData { report: &report, bc: &bc })?;
        Ok(outcome)
    }

    /// Initial data and boundary signals for the solver; not a pipeline stage.
    pub fn build_data(&self) -> Result<Outcome, CliError> {
        #[derive(Serialize)]
        struct DataFile<'a> {
            version: &'a str,
            config_hash: &'a str,
            init: &'a RelaxationInitialData,
            b0: &'a SmoothSignal,
            b1: &'a SmoothSignal,
            b2: &'a SmoothSignal,
        }
        let (model, given, bc) = self.base(Stage::Compat)?;
        let u0 = self.spec().u0;
        let bc = make_compatible(&model, &given, &bc, &u0).map_err(|e| CliError::stage(Stage::Compat, e))?;
        let init = build_initial_data(&model, &u0);
        let doc = DataFile { version: relaxbc::VERSION, config_hash: &self.hash, init: &init, b0: &bc.b0, b1: &bc.b1, b2: &bc.b2 };
        self.write_aux("data.json", &(serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n"))?;
        Ok(Outcome::Pass)
    }

    fn asymptotic(&self) -> Result<Outcome, CliError> {
        #[derive(Serialize)]
        struct TimeSummary {
            t: f64,
            l2_u: f64,
            l2_p: f64,
            boundary_defect: f64,
            residual: ResidualReport,
        }
        let sec = self.cfg.asymptotic.as_ref().ok_or_else(|| CliError::Config("config has no asymptotic section".into()))?;
        let prep = self.prepared(Stage::Asymptotic)?;
        let tag = |e| CliError::stage(Stage::Asymptotic, e);
        let t_max = sec.times.iter().copied().fold(0.0, f64::max);
        let x_max = sec.x_max.unwrap_or_else(|| prep.reach(t_max));
        let dx = x_max / (sec.points - 1) as f64;
        let xs: Vec<f64> = (0..sec.points).map(|i| i as f64 * dx).collect();
        let n = prep.model.n;
        let mut csv = String::from("x,t");
        for i in 0..n {
            let _ = write!(csv, ",u{i}");
        }
        for i in 0..n {
            let _ = write!(csv, ",p{i}");
        }
        csv.push('\n');
        let mut summary = Vec::new();
        for &t in &sec.times {
            let vals = prep.asymptotic.sample(&xs, t, sec.eps).map_err(tag)?;
            for (x, (u, p)) in xs.iter().zip(&vals) {
                let _ = write!(csv, "{x:e},{t:e}");
                for v in u.iter().chain(p.iter()) {
                    let _ = write!(csv, ",{v:e}");
                }
                csv.push('\n');
            }
            let l2 = |f: &dyn Fn(&(nalgebra::DVector<f64>, nalgebra::DVector<f64>)) -> f64| (vals.iter().map(f).sum::<f64>() * dx).sqrt();
            summary.push(TimeSummary {
                t,
                l2_u: l2(&|v| v.0.norm_squared()),
                l2_p: l2(&|v| v.1.norm_squared()),
                boundary_defect: prep.asymptotic.boundary_defect(t, sec.eps).map_err(tag)?,
                residual: residual(&prep.asymptotic, sec.eps, &xs, t).map_err(tag)?,
            });
        }
        self.write_aux("asymptotic.csv", &csv)?;
        if sec.svg {
            self.write_aux("layers.svg", &layer_svg(&prep, &sec.times).map_err(tag)?)?;
        }
        self.write(Stage::Asymptotic, Outcome::Pass, &summary)?;
        Ok(Outcome::Pass)
    }

    fn stiff(&self) -> Result<Outcome, CliError> {
        #[derive(Serialize)]
        struct SnapshotSummary {
            t: f64,
            l2: f64,
            h1: f64,
            energy: Option<f64>,
            error: ErrorNorms,
        }
        #[derive(Serialize)]
        struct StiffData {
            eps: f64,
            steps: usize,
            snapshots: Vec<SnapshotSummary>,
        }
        let sec = self.cfg.stiff.as_ref().ok_or_else(|| CliError::Config("config has no stiff section".into()))?;
        let prep = self.prepared(Stage::Stiff)?;
        let tag = |e| CliError::stage(Stage::Stiff, e);
        let opts = SolverOptions { order: sec.order, sample_times: sec.sample_times.clone(), ..Default::default() };
        let gs = run(&prep.model, &prep.bc, &prep.init, &sec.grid, sec.eps, &opts).map_err(tag)?;
        let dx = sec.grid.dx();
        let xs = sec.grid.centers();
        let a0 = symmetrizer(&prep.model).ok();
        let n = prep.model.n;
        let mut csv = String::from("t,x");
        for i in 0..n {
            let _ = write!(csv, ",u{i}");
        }
        for i in 0..n {
            let _ = write!(csv, ",p{i}");
        }
        csv.push('\n');
        let mut snaps = Vec::new();
        for s in &gs.snapshots {
            for i in (0..xs.len()).step_by(sec.stride) {
                let _ = write!(csv, "{:e},{:e}", s.t, xs[i]);
                for v in s.u.column(i).iter().chain(s.p.column(i).iter()) {
                    let _ = write!(csv, ",{v:e}");
                }
                csv.push('\n');
            }
            let stacked = s.stacked();
            snaps.push(SnapshotSummary {
                t: s.t,
                l2: l2_norm(&stacked, dx),
                h1: h1_norm(&stacked, dx),
                energy: a0.as_ref().map(|a| energy(a, s, dx)),
                error: error_norms(&gs, &prep.asymptotic, s.t).map_err(tag)?,
            });
        }
        self.write_aux("stiff.csv", &csv)?;
        self.write(Stage::Stiff, Outcome::Pass, StiffData { eps: sec.eps, steps: gs.steps, snapshots: snaps })?;
        Ok(Outcome::Pass)
    }

    fn converge(&self) -> Result<Outcome, CliError> {
        #[derive(Serialize)]
        struct Judgement {
            norm: String,
            slope: Option<f64>,
            band: [f64; 2],
            outcome: Outcome,
        }
        #[derive(Serialize)]
        struct ConvergeData {
            table: RateTable,
            judgements: Vec<Judgement>,
        }
        let sec = self.cfg.experiment.as_ref().ok_or_else(|| CliError::Config("config has no experiment section".into()))?;
        let spec = self.cfg.experiment_spec(sec);
        let table = match convergence_study(&spec) {
            Ok(t) => t,
            Err(Error::InconclusiveStudy) => {
                self.write(Stage::Converge, Outcome::Inconclusive, "no row passed the refinement check")?;
                return Ok(Outcome::Inconclusive);
            }
            Err(Error::NotCertified { verdict, c_hat }) => {
                let outcome = if verdict == "FAIL" { Outcome::Fail } else { Outcome::Inconclusive };
                self.write(Stage::Converge, outcome, format!("boundary condition not certified: {verdict}, c_hat = {c_hat:e}"))?;
                return Ok(outcome);
            }
            Err(e) => return Err(CliError::stage(Stage::Converge, e)),
        };
        emit_report(&table, &self.out, "rates", ReportFormats { svg: sec.svg }).map_err(|e| CliError::stage(Stage::Converge, e))?;
        let judgements: Vec<Judgement> = sec
            .bands
            .iter()
            .map(|(k, band)| {
                let slope = table.fit(*k).and_then(|f| f.slope);
                let outcome = match slope {
                    None => Outcome::Inconclusive,
                    Some(s) if s >= band[0] && s <= band[1] => Outcome::Pass,
                    Some(_) => Outcome::Fail,
                };
                Judgement { norm: k.name().into(), slope, band: *band, outcome }
            })
            .collect();
        let outcome = if judgements.iter().any(|j| j.outcome == Outcome::Fail) {
            Outcome::Fail
        } else if judgements.iter().any(|j| j.outcome == Outcome::Inconclusive) {
            Outcome::Inconclusive
        } else {
            Outcome::Pass
        };
        self.write(Stage::Converge, outcome, ConvergeData { table, judgements })?;
        Ok(outcome)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
}

/// Leading layer profiles `|nu0(xi, t)|` for `xi` in `[0, 10]`.
fn layer_svg(prep: &PreparedProblem, times: &[f64]) -> relaxbc::Result<String> {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let layer = prep.asymptotic.layer();
    let xis: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
    let mut curves = Vec::new();
    for &t in times {
        let ys = xis.iter().map(|&xi| Ok(layer.eval(xi, t)?.nu0.norm())).collect::<relaxbc::Result<Vec<f64>>>()?;
        curves.push((t, ys));
    }
    let y_max = curves.iter().flat_map(|(_, ys)| ys.iter().copied()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut svg = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    let _ = writeln!(svg, "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>", W - 2.0 * PAD, H - 2.0 * PAD);
    for (t, ys) in &curves {
        let pts: Vec<String> = xis
            .iter()
            .zip(ys)
            .map(|(xi, y)| format!("{:.2},{:.2}", PAD + xi / 10.0 * (W - 2.0 * PAD), H - PAD - y / y_max * (H - 2.0 * PAD)))
            .collect();
        let _ = writeln!(svg, "<polyline fill=\"none\" stroke=\"black\" points=\"{}\"><title>t = {t}</title></polyline>", pts.join(" "));
    }
    let _ = writeln!(svg, "<text x=\"{PAD}\" y=\"{:.0}\" font-size=\"12\">|nu0| against xi in [0, 10], max {y_max:.3e}</text>", H - 12.0);
    svg.push_str("</svg>\n");
    Ok(svg)
}
