//! Batch jobs behind the `interpmor` binary. Every job writes its artifacts
//! and a `report.json` into the output directory; failures produce
//! `error.json` instead.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::coprime::{self, CoprimeSystem};
use crate::dae;
use crate::error::{MorError, Result};
use crate::h2::{self, IrkaConfig};
use crate::interp::{self, BasisMode};
use crate::io::{self, Model};
use crate::loewner;
use crate::lti::{self, DescriptorSystem, HinfOptions, TransferFunction};
use crate::models;
use crate::parametric::{self, ParametricCoprimeSystem};
use crate::weighted::{self, WeightSystem};
use crate::{CMat, C64};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Reduce,
    Irka,
    TfIrka,
    DaeReduce,
    ParamReduce,
    Bode,
    Norms,
    Check,
    GenDelay,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Reduce,
        Command::Irka,
        Command::TfIrka,
        Command::DaeReduce,
        Command::ParamReduce,
        Command::Bode,
        Command::Norms,
        Command::Check,
        Command::GenDelay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Reduce => "reduce",
            Command::Irka => "irka",
            Command::TfIrka => "tfirka",
            Command::DaeReduce => "dae-reduce",
            Command::ParamReduce => "param-reduce",
            Command::Bode => "bode",
            Command::Norms => "norms",
            Command::Check => "check",
            Command::GenDelay => "gen-delay",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = MorError;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| MorError::InvalidInput(format!("unknown command '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct JobSpec {
    pub command: Command,
    /// Input models; `bode` accepts several, the other commands use the first.
    pub systems: Vec<PathBuf>,
    pub reduced: Option<PathBuf>,
    pub weight: Option<PathBuf>,
    pub tangent: Option<PathBuf>,
    pub order: Option<usize>,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub freq_min: f64,
    pub freq_max: f64,
    pub freq_points: usize,
    pub basis: BasisMode,
    pub out: PathBuf,
    /// `gen-delay` size, `κ` and `τ`.
    pub delay_n: usize,
    pub delay_kappa: f64,
    pub delay_tau: f64,
}

impl JobSpec {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        JobSpec {
            command,
            systems: Vec::new(),
            reduced: None,
            weight: None,
            tangent: None,
            order: None,
            tol: 1e-10,
            max_iters: 200,
            seed: 0,
            freq_min: 1e-2,
            freq_max: 1e2,
            freq_points: 200,
            basis: BasisMode::Orthonormal,
            out: out.into(),
            delay_n: 100,
            delay_kappa: 3.0,
            delay_tau: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MorError::InvalidInput(m));
        let needs_system = self.command != Command::GenDelay;
        if needs_system && self.systems.is_empty() {
            return bad(format!("{} needs --system", self.command));
        }
        if self.command != Command::Bode && self.systems.len() > 1 {
            return bad(format!("{} takes a single --system", self.command));
        }
        for p in self.systems.iter().chain(&self.reduced).chain(&self.weight).chain(&self.tangent) {
            if !p.is_file() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        match self.command {
            Command::Reduce | Command::DaeReduce | Command::ParamReduce if self.tangent.is_none() => {
                return bad(format!("{} needs --tangent", self.command));
            }
            Command::Check if self.tangent.is_none() || self.reduced.is_none() => {
                return bad("check needs --reduced and --tangent".into());
            }
            Command::Irka | Command::TfIrka if self.order.is_none() => {
                return bad(format!("{} needs --order", self.command));
            }
            _ => {}
        }
        if self.order == Some(0) {
            return bad("--order must be positive".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("--tol must lie in (0, 1)".into());
        }
        if self.max_iters == 0 {
            return bad("--max-iters must be positive".into());
        }
        if !(self.freq_min > 0.0 && self.freq_max > self.freq_min && self.freq_max.is_finite()) {
            return bad("need 0 < --freq-min < --freq-max".into());
        }
        if self.freq_points < 2 {
            return bad("--freq-points must be at least 2".into());
        }
        if self.command == Command::GenDelay
            && !(self.delay_n >= 2 && self.delay_kappa.is_finite() && self.delay_tau > 0.0 && self.delay_tau.is_finite())
        {
            return bad("gen-delay needs n >= 2, finite kappa and tau > 0".into());
        }
        Ok(())
    }
}

/// Exit status and written files of one job.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub error: Option<String>,
}

struct Output {
    report: Value,
    artifacts: Vec<PathBuf>,
    converged: bool,
}

impl Output {
    fn new(report: Value) -> Self {
        Output { report, artifacts: Vec::new(), converged: true }
    }
}

pub fn exit_code_for(err: &MorError) -> i32 {
    if err.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERICAL
    }
}

/// Run one job. Errors are reported through the exit code and `error.json`;
/// nothing panics on bad input.
pub fn run(job: &JobSpec) -> RunOutcome {
    let result = job.validate().and_then(|_| {
        std::fs::create_dir_all(&job.out)?;
        dispatch(job)
    });
    match result {
        Ok(mut out) => {
            let path = job.out.join("report.json");
            let mut report = json!({ "command": job.command.name(), "converged": out.converged });
            if let (Value::Object(dst), Value::Object(src)) = (&mut report, out.report) {
                dst.extend(src);
            }
            if let Err(e) = io::write_json(&path, &report) {
                return failure(job, e);
            }
            out.artifacts.push(path);
            RunOutcome {
                exit_code: if out.converged { EXIT_OK } else { EXIT_NOT_CONVERGED },
                artifacts: out.artifacts,
                error: None,
            }
        }
        Err(e) => failure(job, e),
    }
}

fn failure(job: &JobSpec, err: MorError) -> RunOutcome {
    let code = exit_code_for(&err);
    let record = json!({
        "command": job.command.name(),
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": code,
    });
    let mut artifacts = Vec::new();
    if std::fs::create_dir_all(&job.out).is_ok() {
        let path = job.out.join("error.json");
        if io::write_json(&path, &record).is_ok() {
            artifacts.push(path);
        }
    }
    RunOutcome { exit_code: code, artifacts, error: Some(err.to_string()) }
}

fn dispatch(job: &JobSpec) -> Result<Output> {
    match job.command {
        Command::Reduce => cmd_reduce(job),
        Command::Irka => cmd_irka(job),
        Command::TfIrka => cmd_tfirka(job),
        Command::DaeReduce => cmd_dae(job),
        Command::ParamReduce => cmd_param(job),
        Command::Bode => cmd_bode(job),
        Command::Norms => cmd_norms(job),
        Command::Check => cmd_check(job),
        Command::GenDelay => cmd_gen_delay(job),
    }
}

fn load_system(job: &JobSpec) -> Result<Model> {
    io::read_model(&job.systems[0])
}

fn descriptor(model: Model, what: &str) -> Result<DescriptorSystem> {
    match model {
        Model::Descriptor(s) => Ok(s),
        other => Err(MorError::InvalidInput(format!("{what} needs a descriptor system, got {}", other.kind()))),
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn write_reduced(job: &JobSpec, model: &Model, out: &mut Output) -> Result<()> {
    let path = io::write_model(&job.out, "reduced", model)?;
    out.artifacts.push(path);
    Ok(())
}

fn cmd_reduce(job: &JobSpec) -> Result<Output> {
    let model = load_system(job)?;
    let data = io::read_tangent(job.tangent.as_ref().expect("validated"))?;
    let (reduced, report) = match &model {
        Model::Descriptor(sys) => {
            let red = interp::interpolatory_reduce(sys, &data, job.basis)?;
            let rep = interp::verify_interpolation(sys, &red, &data)?;
            (Model::Descriptor(red), rep)
        }
        Model::Coprime(sys) => {
            let red = coprime::coprime_reduce(sys, &data, job.basis)?;
            let rep = interp::verify_interpolation(sys, &red, &data)?;
            (Model::Coprime(red), rep)
        }
        Model::Parametric(_) => {
            return Err(MorError::InvalidInput("use param-reduce for parametric systems".into()));
        }
    };
    let mut out = Output::new(json!({
        "full_order": model.order(),
        "reduced_order": reduced.order(),
        "interpolation": to_json(&report),
    }));
    write_reduced(job, &reduced, &mut out)?;
    Ok(out)
}

fn irka_config(job: &JobSpec) -> IrkaConfig {
    let mut cfg = IrkaConfig::new(job.order.expect("validated"));
    cfg.max_iters = job.max_iters;
    cfg.shift_tol = job.tol;
    cfg.seed = job.seed;
    cfg
}

fn cmd_irka(job: &JobSpec) -> Result<Output> {
    let sys = descriptor(load_system(job)?, "irka")?;
    let res = h2::irka(&sys, &irka_config(job))?;
    let err = h2::h2_error_norm(&sys, &res.pole_residue)?;
    let full = sys.h2_norm()?;
    let mut out = Output::new(json!({
        "full_order": sys.order(),
        "reduced_order": res.reduced.order(),
        "iterations": res.history.len(),
        "history": to_json(&res.history),
        "optimality": to_json(&res.optimality),
        "h2_error": err,
        "h2_relative_error": if full > 0.0 { err / full } else { err },
        "poles": res.pole_residue.poles.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
    }));
    out.converged = res.converged;
    write_reduced(job, &Model::Descriptor(res.reduced), &mut out)?;
    Ok(out)
}

fn cmd_tfirka(job: &JobSpec) -> Result<Output> {
    let model = load_system(job)?;
    if let Model::Parametric(_) = model {
        return Err(MorError::InvalidInput("tfirka needs a non-parametric system".into()));
    }
    let res = loewner::tf_irka(&model, &irka_config(job))?;
    let reduced = res.reduced.clone().ok_or(MorError::NotConjugateClosed)?;
    let mut report = json!({
        "full_order": model.order(),
        "reduced_order": reduced.order(),
        "iterations": res.history.len(),
        "history": to_json(&res.history),
        "optimality": to_json(&res.optimality),
        "poles": res.pole_residue.poles.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
    });
    if let Model::Descriptor(sys) = &model {
        if let Ok(err) = h2::h2_error_norm(sys, &res.pole_residue) {
            report["h2_error"] = json!(err);
        }
    }
    let mut out = Output::new(report);
    out.converged = res.converged;
    write_reduced(job, &Model::Descriptor(reduced), &mut out)?;
    Ok(out)
}

fn probe_points() -> Vec<C64> {
    (0..10).map(|k| C64::new(0.1 * (k + 1) as f64, 0.7 * k as f64 - 2.0)).collect()
}

fn cmd_dae(job: &JobSpec) -> Result<Output> {
    let sys = descriptor(load_system(job)?, "dae-reduce")?;
    let data = io::read_tangent(job.tangent.as_ref().expect("validated"))?;
    let res = dae::dae_reduce(&sys, &data)?;
    let full = dae::additive_decomposition(&sys)?;
    let red = dae::additive_decomposition(&res.reduced)?;
    let mut poly_dev: f64 = 0.0;
    for s in probe_points() {
        let pf = full.eval_poly(s);
        let dev = (&pf - red.eval_poly(s)).norm() / pf.norm().max(1.0);
        poly_dev = poly_dev.max(dev);
    }
    let far = C64::new(0.0, 1e6);
    let far_err = lti::sigma_max(&(sys.transfer(far)? - res.reduced.transfer(far)?));
    let rep = interp::verify_interpolation(&sys, &res.reduced, &data)?;
    let mut out = Output::new(json!({
        "full_order": sys.order(),
        "finite_order": res.finite_order,
        "infinite_dim": res.infinite_dim,
        "polynomial_degree": full.degree(),
        "polynomial_part_deviation": poly_dev,
        "error_at_1e6": far_err,
        "interpolation": to_json(&rep),
    }));
    write_reduced(job, &Model::Descriptor(res.reduced), &mut out)?;
    Ok(out)
}

fn cmd_param(job: &JobSpec) -> Result<Output> {
    let sys = match load_system(job)? {
        Model::Parametric(s) => s,
        other => {
            return Err(MorError::InvalidInput(format!("param-reduce needs a parametric system, got {}", other.kind())))
        }
    };
    let data = io::read_param_tangent(job.tangent.as_ref().expect("validated"))?;
    let bases = parametric::multipoint_bases(&sys, &data)?;
    let red = parametric::param_reduce(&sys, &bases.v, &bases.w)?;
    let conditions = param_conditions(&sys, &red, &data)?;
    let max = conditions.iter().map(|c| c.residual).fold(0.0, f64::max);
    let mut out = Output::new(json!({
        "full_order": sys.order(),
        "reduced_order": red.order(),
        "conditions": to_json(&conditions),
        "max_residual": max,
    }));
    write_reduced(job, &Model::Parametric(red), &mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct ParamCondition {
    parameter: Vec<f64>,
    point: [f64; 2],
    kind: &'static str,
    residual: f64,
}

fn param_conditions(
    full: &ParametricCoprimeSystem,
    red: &ParametricCoprimeSystem,
    data: &parametric::ParamTangentData,
) -> Result<Vec<ParamCondition>> {
    let mut out = Vec::new();
    let rel = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
    for pt in &data.points {
        let t = &pt.tangent;
        let push = |out: &mut Vec<ParamCondition>, s: C64, kind, residual| {
            out.push(ParamCondition { parameter: pt.parameter.clone(), point: pair(s), kind, residual })
        };
        for (i, (&s, r)) in t.right_points.iter().zip(&t.right_dirs).enumerate() {
            let paired = t.left_points.get(i).filter(|&&m| m == s).map(|_| &t.left_dirs[i]);
            if let Some(l) = paired {
                let rep = parametric::sensitivity_residual(full, red, s, &pt.parameter, r, l)?;
                push(&mut out, s, "right", rep.right);
                push(&mut out, s, "left", rep.left);
                push(&mut out, s, "hermite", rep.hermite);
                push(&mut out, s, "gradient", rep.gradient);
            } else {
                let hf = full.eval(s, &pt.parameter)? * r;
                let hr = red.eval(s, &pt.parameter)? * r;
                push(&mut out, s, "right", rel((&hf - hr).norm(), hf.norm()));
            }
        }
        for (i, (&s, l)) in t.left_points.iter().zip(&t.left_dirs).enumerate() {
            if t.right_points.get(i) == Some(&s) {
                continue;
            }
            let hf = l.transpose() * full.eval(s, &pt.parameter)?;
            let hr = l.transpose() * red.eval(s, &pt.parameter)?;
            push(&mut out, s, "left", rel((&hf - hr).norm(), hf.norm()));
        }
    }
    Ok(out)
}

/// `n` logarithmically spaced frequencies in `[lo, hi]`.
pub fn log_frequencies(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "system".into())
}

fn cmd_bode(job: &JobSpec) -> Result<Output> {
    let omegas = log_frequencies(job.freq_min, job.freq_max, job.freq_points);
    let mut responses: Vec<Vec<CMat>> = Vec::new();
    let mut out = Output::new(Value::Null);
    let mut files = Vec::new();
    for (idx, path) in job.systems.iter().enumerate() {
        let model = io::read_model(path)?;
        let hs = omegas.iter().map(|&w| model.eval(C64::new(0.0, w))).collect::<Result<Vec<_>>>()?;
        let (p, m) = (model.outputs(), model.inputs());
        let mut csv = String::from("omega,sigma_max");
        for i in 0..p {
            for j in 0..m {
                csv.push_str(&format!(",abs_h{}_{}", i + 1, j + 1));
            }
        }
        csv.push('\n');
        for (w, h) in omegas.iter().zip(&hs) {
            csv.push_str(&format!("{:.16e},{:.16e}", w, lti::sigma_max(h)));
            for i in 0..p {
                for j in 0..m {
                    csv.push_str(&format!(",{:.16e}", h[(i, j)].norm()));
                }
            }
            csv.push('\n');
        }
        let file = job.out.join(format!("bode_{}_{}.csv", idx, stem_of(path)));
        std::fs::write(&file, csv)?;
        files.push(file.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
        out.artifacts.push(file);
        responses.push(hs);
    }
    let mut comparisons = Vec::new();
    for (k, hs) in responses.iter().enumerate().skip(1) {
        let (mut logdev, mut abs): (f64, f64) = (0.0, 0.0);
        for (h0, h) in responses[0].iter().zip(hs) {
            if h0.shape() != h.shape() {
                return Err(MorError::DimensionMismatch("bode systems have different sizes".into()));
            }
            logdev = logdev.max((lti::sigma_max(h).log10() - lti::sigma_max(h0).log10()).abs());
            abs = abs.max(lti::sigma_max(&(h - h0)));
        }
        comparisons.push(json!({
            "system": job.systems[k].display().to_string(),
            "max_log10_magnitude_deviation": logdev,
            "max_abs_error": abs,
        }));
    }
    out.report = json!({
        "reference": job.systems[0].display().to_string(),
        "frequencies": { "min": job.freq_min, "max": job.freq_max, "points": job.freq_points },
        "files": files,
        "comparisons": comparisons,
    });
    Ok(out)
}

fn sampled_hinf(tf: &dyn TransferFunction, job: &JobSpec) -> Result<f64> {
    let est = lti::hinf_sampled(tf, job.freq_min, job.freq_max, 50, &[])?;
    Ok(est.norm)
}

fn cmd_norms(job: &JobSpec) -> Result<Output> {
    let model = load_system(job)?;
    let reduced = job.reduced.as_ref().map(|p| io::read_model(p)).transpose()?;
    let weight = match &job.weight {
        Some(p) => Some(WeightSystem::from_descriptor(&descriptor(io::read_model(p)?, "--weight")?)?),
        None => None,
    };
    let mut report = json!({ "order": model.order() });
    let attempt = |r: Result<f64>| match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.kind(), "message": e.to_string() }),
    };
    match &model {
        Model::Descriptor(sys) => {
            report["h2"] = attempt(sys.h2_norm());
            report["hinf"] = attempt(sys.hinf_estimate(&HinfOptions::default()).map(|e| e.norm));
            if let Some(w) = &weight {
                report["weighted_h2"] = attempt(weighted::weighted_system(sys, w).and_then(|s| s.h2_norm()));
            }
        }
        Model::Coprime(sys) => {
            report["hinf_sampled"] = attempt(sampled_hinf(sys, job));
        }
        Model::Parametric(_) => return Err(MorError::InvalidInput("norms needs a non-parametric system".into())),
    }
    if let Some(red) = &reduced {
        match (&model, red) {
            (Model::Descriptor(full), Model::Descriptor(r)) => {
                let err = full.error_system(r)?;
                report["error_h2"] = attempt(err.h2_norm());
                report["error_hinf"] = attempt(err.hinf_estimate(&HinfOptions::default()).map(|e| e.norm));
                if let Some(w) = &weight {
                    report["weighted_error_h2"] = attempt(weighted::weighted_h2_norm(full, r, w));
                }
            }
            (full, r) => {
                let diff = Difference(full, r);
                report["error_hinf_sampled"] = attempt(sampled_hinf(&diff, job));
            }
        }
    }
    Ok(Output::new(report))
}

/// `H_1 − H_2` as a sampled transfer function.
struct Difference<'a>(&'a Model, &'a Model);

impl TransferFunction for Difference<'_> {
    fn inputs(&self) -> usize {
        self.0.inputs()
    }
    fn outputs(&self) -> usize {
        self.0.outputs()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        Ok(self.0.eval(s)? - self.1.eval(s)?)
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        let (a, da) = self.0.eval_with_derivative(s)?;
        let (b, db) = self.1.eval_with_derivative(s)?;
        Ok((a - b, da - db))
    }
}

fn cmd_check(job: &JobSpec) -> Result<Output> {
    let full = load_system(job)?;
    let red = io::read_model(job.reduced.as_ref().expect("validated"))?;
    let data = io::read_tangent(job.tangent.as_ref().expect("validated"))?;
    let rep = interp::verify_interpolation(&full, &red, &data)?;
    Ok(Output::new(json!({
        "full_order": full.order(),
        "reduced_order": red.order(),
        "interpolation": to_json(&rep),
    })))
}

fn cmd_gen_delay(job: &JobSpec) -> Result<Output> {
    let sys: CoprimeSystem = models::delay_family(job.delay_n, job.delay_kappa, job.delay_tau);
    let pade = coprime::pade2_delay_baseline(&sys)?;
    let mut out = Output::new(json!({
        "n": job.delay_n,
        "kappa": job.delay_kappa,
        "tau": job.delay_tau,
    }));
    out.artifacts.push(io::write_model(&job.out, "delay", &Model::Coprime(sys))?);
    out.artifacts.push(io::write_model(&job.out, "pade2", &Model::Coprime(pade))?);
    Ok(out)
}
