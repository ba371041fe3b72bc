//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on domain errors (a JSON error document goes
//! to stderr) or failed checks, 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::extrema::{self, Direction};
use crate::fluctuation::{LatticeAnalysis, TransformCheck};
use crate::format::{self, rows_of};
use crate::linalg::Mat;
use crate::mmbm::MmbmAnalysis;
use crate::model::{LatticeModel, MmbmModel, Model};
use crate::sim::{self, LatticeTarget, MmbmTarget, SimConfig};
use crate::solvers::{LatticeFundamentals, MmbmFundamentals, SolveOptions};
use crate::verify::{self, Check, Status};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "skipfree", version, about = "Fluctuation identities for one-sided Markov additive processes")]
pub struct Cli {
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub max_iter: usize,
    /// Level horizon K for tables (raised automatically when a query needs more).
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo paths per starting phase.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub paths: u64,
    /// Euler step for MMBM simulation.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirArg {
    Max,
    Min,
}

impl From<DirArg> for Direction {
    fn from(d: DirArg) -> Self {
        match d {
            DirArg::Max => Direction::Max,
            DirArg::Min => Direction::Min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    G,
    Exit,
    Occupation,
    Creep,
    Extrema,
    Holding,
    HitDown,
    HitUp,
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model file (JSON).
    pub model: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the model and report its regime.
    Validate(ModelArg),
    /// G, R, H and the regime.
    Fundamentals(ModelArg),
    /// Two-sided exit: P[tau_{-a} < tau_b^up, J].
    Exit {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Scale matrices: W(0..=k) on the lattice, W(x) for MMBM.
    Scale {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, num_args = 1..)]
        x: Vec<f64>,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Expected occupation of level k: before leaving (-l, m), before
    /// crossing m, or over the whole horizon.
    Occupation {
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Creeping probability P[tau_m = tau_m^up, J] (lattice) or the creeping
    /// identity residual at x (MMBM).
    Creep {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        x: Option<f64>,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Joint law of the extremum and the pre-kill position.
    Extrema {
        #[arg(long, value_enum, default_value_t = DirArg::Max)]
        direction: DirArg,
        #[arg(long, default_value_t = 1e-10)]
        tail_tol: f64,
        #[arg(long, default_value_t = 4096)]
        max_horizon: usize,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Decay of the taboo occupation sequence (negative drift only).
    Decay {
        #[arg(long, default_value_t = 40)]
        k: usize,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Generating-function checks against truncated sums.
    TransformCheck {
        #[arg(long)]
        z: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Monte Carlo estimate of one quantity.
    Simulate {
        #[arg(long, value_enum)]
        target: TargetArg,
        #[arg(long, allow_hyphen_values = true)]
        k: Option<i64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        l: Option<u64>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, value_enum, default_value_t = DirArg::Max)]
        direction: DirArg,
        #[arg(long)]
        level_cap: Option<f64>,
        #[arg(long)]
        time_cap: Option<f64>,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Run every applicable identity check.
    Verify {
        /// Verify this many generated lattice models instead of a file.
        #[arg(long)]
        random: Option<usize>,
        model: Option<PathBuf>,
    },
}

/// A finished command: JSON result, optional CSV rendering, success flag.
struct Report {
    json: Value,
    csv: Option<String>,
    ok: bool,
}

impl Report {
    fn ok(json: Value) -> Self {
        Report { json, csv: None, ok: true }
    }
}

fn mat(m: &Mat) -> Value {
    json!(rows_of(m))
}

fn opt_mat(m: Option<&Mat>) -> Value {
    m.map(mat).unwrap_or(Value::Null)
}

fn transform(c: &TransformCheck) -> Value {
    json!({
        "z": c.z,
        "residual": c.residual,
        "tail_bound": c.tail_bound,
        "rounding": c.rounding,
        "terms": c.terms,
        "passes": c.passes(),
    })
}

fn error_value(e: &Error) -> Value {
    json!({"error": e.kind(), "message": e.to_string()})
}

fn nonneg_int(x: f64, name: &str) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x < 1e9 {
        Ok(x as usize)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be a non-negative integer on the lattice")))
    }
}

fn need<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("--{name} is required for this model or target")))
}

struct Ctx {
    opts: SolveOptions,
    horizon: Option<usize>,
    seed: Option<u64>,
    paths: u64,
    dt: f64,
}

impl Ctx {
    fn horizon(&self, need: usize) -> usize {
        self.horizon.unwrap_or(64).max(need)
    }

    fn analysis(&self, m: &LatticeModel, need: usize) -> Result<LatticeAnalysis> {
        LatticeAnalysis::new(m.clone(), &self.opts, self.horizon(need))
    }
}

fn checks_csv(rows: &[(String, &Check)]) -> String {
    let mut out = String::from("model,name,status,residual,limit,note\n");
    let num = |x: Option<f64>| x.filter(|v| v.is_finite()).map(|v| format!("{v:.16e}")).unwrap_or_default();
    for (tag, c) in rows {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        };
        let note = c.note.clone().unwrap_or_default().replace('"', "'");
        out.push_str(&format!(
            "{tag},\"{}\",{status},{},{},\"{note}\"\n",
            c.name,
            num(c.residual),
            num(c.limit)
        ));
    }
    out
}

fn run_lattice(cmd: &Command, m: &LatticeModel, ctx: &Ctx) -> Result<Report> {
    Ok(match cmd {
        Command::Validate(_) => {
            let r = m.drift_and_pi()?;
            Report::ok(json!({
                "type": "lattice",
                "phases": m.n_phases(),
                "max_jump": m.max_jump(),
                "defective": m.is_defective(),
                "kill_rates": m.kill_rates().iter().collect::<Vec<_>>(),
                "regime": r.tag.as_str(),
                "mu": r.mu,
                "pi": r.pi.iter().collect::<Vec<_>>(),
            }))
        }
        Command::Fundamentals(_) => {
            let f = LatticeFundamentals::solve(m, &ctx.opts)?;
            Report::ok(json!({
                "G": mat(&f.g),
                "R": mat(&f.r),
                "R_tilde": mat(&f.r_tilde),
                "H": opt_mat(f.h.as_ref()),
                "overshoot": f.overshoot.iter().map(mat).collect::<Vec<_>>(),
                "mu": f.regime.mu,
                "pi": f.regime.pi.iter().collect::<Vec<_>>(),
                "regime": f.regime.tag.as_str(),
                "residuals": f.residuals,
            }))
        }
        Command::Exit { a, b, .. } => {
            let (a, b) = (nonneg_int(*a, "a")?, nonneg_int(*b, "b")?);
            let an = ctx.analysis(m, a + b)?;
            let d = an.two_sided_exit(a, b)?;
            let routes = json!({
                "scale": an.two_sided_exit_scale(a, b).map(|x| mat(&x)).unwrap_or_else(|e| error_value(&e)),
                "theta": an.two_sided_exit_theta(a, b).map(|x| mat(&x)).unwrap_or_else(|e| error_value(&e)),
            });
            let csv = format::matrices_csv(&["a", "b"], [(vec![a.to_string(), b.to_string()], &d)]);
            Report {
                json: json!({"a": a, "b": b, "D": mat(&d), "alternative_routes": routes}),
                csv: Some(csv),
                ok: true,
            }
        }
        Command::Scale { k, .. } => {
            let k = k.unwrap_or(30);
            let an = ctx.analysis(m, k)?;
            let s = an.scale()?;
            let table: Vec<Mat> = (0..=k as i64).map(|j| s.w(j)).collect::<Result<_>>()?;
            let csv = format::matrices_csv(&["k"], table.iter().enumerate().map(|(j, w)| (vec![j.to_string()], w)));
            Report {
                json: json!({"W": table.iter().map(mat).collect::<Vec<_>>()}),
                csv: Some(csv),
                ok: true,
            }
        }
        Command::Occupation { k, l, m: up, .. } => {
            let (what, value) = match (l, up) {
                (Some(l), Some(up)) => {
                    let an = ctx.analysis(m, l + up + k.unsigned_abs() as usize)?;
                    ("strip", an.strip_occupation(*k, *l, *up)?)
                }
                (None, Some(up)) => {
                    let an = ctx.analysis(m, *up)?;
                    ("before_upcross", an.occupation_before_upcross(*k, *up)?)
                }
                (None, None) => {
                    let f = LatticeFundamentals::solve(m, &ctx.opts)?;
                    ("total", f.occupation_at_level(*k)?)
                }
                (Some(_), None) => return Err(Error::InvalidArgument("--l needs --m".into())),
            };
            Report::ok(json!({"k": k, "l": l, "m": up, "kind": what, "occupation": mat(&value)}))
        }
        Command::Creep { m: level, .. } => {
            let level = need(*level, "m")?;
            let an = ctx.analysis(m, level + 1)?;
            let p = an.creeping(level)?;
            let alt = an.creeping_scale(level).map(|x| mat(&x)).unwrap_or_else(|e| error_value(&e));
            Report::ok(json!({"m": level, "creeping": mat(&p), "scale_route": alt}))
        }
        Command::Extrema {
            direction,
            tail_tol,
            max_horizon,
            ..
        } => {
            let an = ctx.analysis(m, 1)?;
            let law = extrema::extrema_law(&an, (*direction).into(), *tail_tol, *max_horizon)?;
            let cells: Vec<Value> = law
                .cells
                .iter()
                .map(|c| json!({"m": c.m, "l": c.l, "probability": mat(&c.prob)}))
                .collect();
            Report {
                json: json!({
                    "direction": law.direction,
                    "m_horizon": law.m_horizon,
                    "l_horizon": law.l_horizon,
                    "row_mass": law.row_mass,
                    "captured_mass": law.captured_mass,
                    "tail_bound": law.tail_bound,
                    "cells": cells,
                }),
                csv: Some(format::extrema_csv(&law)),
                ok: true,
            }
        }
        Command::Decay { k, .. } => {
            let an = ctx.analysis(m, *k)?;
            Report::ok(serde_json::to_value(an.decay_diagnostic(*k)?).expect("plain data"))
        }
        Command::TransformCheck { z, .. } => {
            let an = ctx.analysis(m, 1)?;
            let mut ok = true;
            let mut record = |r: Result<TransformCheck>| match r {
                Ok(c) => {
                    ok &= c.passes();
                    transform(&c)
                }
                Err(e) => error_value(&e),
            };
            let probes = match z {
                Some(z) => vec![*z],
                None => an.scale_probe_points(),
            };
            let scale: Vec<Value> = if an.scale.is_some() {
                probes.iter().map(|&p| record(an.check_scale_transform(p))).collect()
            } else {
                vec![error_value(&Error::SingularAminus1)]
            };
            let unilateral = record(an.check_h_transform_unilateral(z.unwrap_or(0.5)));
            let (bilateral_z, bilateral) = match an.find_bilateral_z()? {
                Some(bz) => (json!(bz), record(an.check_h_transform_bilateral(bz))),
                None => (Value::Null, json!({"note": "no z in (0,1) with F(z)/z stable"})),
            };
            Report {
                json: json!({
                    "scale": scale,
                    "h_unilateral": unilateral,
                    "bilateral_z": bilateral_z,
                    "h_bilateral": bilateral,
                }),
                csv: None,
                ok,
            }
        }
        Command::Simulate {
            target,
            k,
            a,
            b,
            l,
            m: up,
            direction,
            level_cap,
            time_cap,
            ..
        } => {
            let t = match target {
                TargetArg::G => LatticeTarget::G {
                    k: need(*k, "k")?.try_into().map_err(|_| Error::InvalidArgument("k must be positive".into()))?,
                },
                TargetArg::Exit => LatticeTarget::Exit {
                    a: nonneg_int(need(*a, "a")?, "a")? as u64,
                    b: nonneg_int(need(*b, "b")?, "b")? as u64,
                },
                TargetArg::Occupation => LatticeTarget::StripOccupation {
                    k: need(*k, "k")?,
                    l: need(*l, "l")?,
                    m: need(*up, "m")?,
                },
                TargetArg::Creep => LatticeTarget::Creeping { m: need(*up, "m")? },
                TargetArg::Extrema => LatticeTarget::Extrema {
                    direction: (*direction).into(),
                    m: need(*up, "m")?,
                    l: need(*l, "l")?,
                },
                TargetArg::Holding => LatticeTarget::HoldingTime,
                TargetArg::HitDown | TargetArg::HitUp => {
                    return Err(Error::InvalidArgument("hit-down and hit-up are MMBM targets".into()))
                }
            };
            let est = sim::sim_lattice(m, t, &sim_config(ctx, *level_cap, *time_cap))?;
            Report::ok(json!({
                "target": t,
                "params": t,
                "mean": mat(&est.mean),
                "stderr": mat(&est.stderr),
                "n": est.n,
                "seed": est.seed,
            }))
        }
        Command::Verify { .. } => unreachable!("handled by the caller"),
    })
}

fn sim_config(ctx: &Ctx, level_cap: Option<f64>, time_cap: Option<f64>) -> SimConfig {
    let d = SimConfig::default();
    SimConfig {
        n_paths: ctx.paths,
        seed: ctx.seed.unwrap_or(d.seed),
        level_cap: level_cap.unwrap_or(d.level_cap),
        time_cap: time_cap.unwrap_or(d.time_cap),
        euler_dt: ctx.dt,
    }
}

fn run_mmbm(cmd: &Command, m: &MmbmModel, ctx: &Ctx) -> Result<Report> {
    let analysis = || MmbmAnalysis::new(m.clone(), &ctx.opts);
    Ok(match cmd {
        Command::Validate(_) => {
            let r = m.drift_and_pi()?;
            Report::ok(json!({
                "type": "mmbm",
                "phases": m.n_phases(),
                "defective": m.is_defective(),
                "all_brownian": m.all_brownian(),
                "kill_rates": m.kill_rates().iter().collect::<Vec<_>>(),
                "regime": r.tag.as_str(),
                "mu": r.mu,
                "pi": r.pi.iter().collect::<Vec<_>>(),
            }))
        }
        Command::Fundamentals(_) => {
            let f = MmbmFundamentals::solve(m, &ctx.opts)?;
            Report::ok(json!({
                "G": mat(&f.g),
                "Lambda": opt_mat(f.lambda.as_ref()),
                "R": mat(&f.r),
                "H": opt_mat(f.h.as_ref()),
                "mu": f.regime.mu,
                "pi": f.regime.pi.iter().collect::<Vec<_>>(),
                "regime": f.regime.tag.as_str(),
                "residuals": f.residuals,
            }))
        }
        Command::Exit { a, b, .. } => {
            let d = analysis()?.exit(*a, *b)?;
            let csv = format::matrices_csv(&["a", "b"], [(vec![a.to_string(), b.to_string()], &d)]);
            Report {
                json: json!({"a": a, "b": b, "D": mat(&d)}),
                csv: Some(csv),
                ok: true,
            }
        }
        Command::Scale { x, .. } => {
            let an = analysis()?;
            let xs = if x.is_empty() { vec![0.5, 1.0, 2.0] } else { x.clone() };
            let table: Vec<Mat> = xs.iter().map(|&v| an.scale(v)).collect::<Result<_>>()?;
            let csv = format::matrices_csv(&["x"], xs.iter().zip(&table).map(|(v, w)| (vec![format!("{v:.16e}")], w)));
            Report {
                json: json!({"x": xs, "W": table.iter().map(mat).collect::<Vec<_>>()}),
                csv: Some(csv),
                ok: true,
            }
        }
        Command::Creep { x, .. } => {
            let x = need(*x, "x")?;
            let res = analysis()?.creeping_residual(x)?;
            Report {
                json: json!({"x": x, "residual": res, "limit": 1e-8, "passes": res < 1e-8}),
                csv: None,
                ok: res < 1e-8,
            }
        }
        Command::TransformCheck { alpha, .. } => {
            let an = analysis()?;
            let alpha = alpha.unwrap_or(an.g_abscissa_min() - 1.0);
            let res = an.transform_quadrature_residual(alpha)?;
            Report {
                json: json!({"alpha": alpha, "residual": res, "limit": 1e-6, "passes": res < 1e-6}),
                csv: None,
                ok: res < 1e-6,
            }
        }
        Command::Simulate {
            target,
            a,
            b,
            x,
            level_cap,
            time_cap,
            ..
        } => {
            let t = match target {
                TargetArg::Exit => MmbmTarget::Exit {
                    a: need(*a, "a")?,
                    b: need(*b, "b")?,
                },
                TargetArg::HitDown => MmbmTarget::HitDown { x: need(*x, "x")? },
                TargetArg::HitUp => MmbmTarget::HitUp { x: need(*x, "x")? },
                _ => return Err(Error::InvalidArgument("MMBM targets are exit, hit-down and hit-up".into())),
            };
            let est = sim::sim_mmbm(m, t, &sim_config(ctx, *level_cap, *time_cap))?;
            Report::ok(json!({
                "target": t,
                "params": t,
                "mean": mat(&est.mean),
                "stderr": mat(&est.stderr),
                "n": est.n,
                "seed": est.seed,
                "dt": ctx.dt,
            }))
        }
        Command::Occupation { .. } | Command::Extrema { .. } | Command::Decay { .. } => {
            return Err(Error::InvalidArgument("this command applies to lattice models only".into()))
        }
        Command::Verify { .. } => unreachable!("handled by the caller"),
    })
}

fn run_verify(random: Option<usize>, path: Option<&Path>, ctx: &Ctx) -> Result<(Report, Option<String>)> {
    let horizon = ctx.horizon.unwrap_or(20);
    let mut rows: Vec<(String, Vec<Check>)> = Vec::new();
    let mut hash = None;
    match (random, path) {
        (Some(count), None) => {
            let seed = ctx.seed.unwrap_or(verify::DEFAULT_SEED);
            for (i, m) in verify::random_lattice_models(count, seed).iter().enumerate() {
                rows.push((i.to_string(), verify::verify_lattice(m, &ctx.opts, horizon)));
            }
        }
        (None, Some(p)) => {
            let (model, h) = format::load_model(p)?;
            hash = Some(h);
            let checks = match &model {
                Model::Lattice(m) => verify::verify_lattice(m, &ctx.opts, horizon),
                Model::Mmbm(m) => verify::verify_mmbm(m, &ctx.opts),
            };
            rows.push(("0".into(), checks));
        }
        _ => return Err(Error::InvalidArgument("give either a model file or --random N".into())),
    }
    let ok = rows.iter().all(|(_, c)| verify::all_pass(c));
    let flat: Vec<(String, &Check)> = rows
        .iter()
        .flat_map(|(t, cs)| cs.iter().map(move |c| (t.clone(), c)))
        .collect();
    let csv = checks_csv(&flat);
    let models: Vec<Value> = rows
        .iter()
        .map(|(t, cs)| json!({"model": t, "all_pass": verify::all_pass(cs), "checks": cs}))
        .collect();
    let failed = flat.iter().filter(|(_, c)| c.status == Status::Fail).count();
    let skipped = flat.iter().filter(|(_, c)| c.status == Status::Skip).count();
    let json = json!({
        "all_pass": ok,
        "checks": flat.len(),
        "failed": failed,
        "skipped": skipped,
        "models": models,
    });
    Ok((Report { json, csv: Some(csv), ok }, hash))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate(_) => "validate",
        Command::Fundamentals(_) => "fundamentals",
        Command::Exit { .. } => "exit",
        Command::Scale { .. } => "scale",
        Command::Occupation { .. } => "occupation",
        Command::Creep { .. } => "creep",
        Command::Extrema { .. } => "extrema",
        Command::Decay { .. } => "decay",
        Command::TransformCheck { .. } => "transform-check",
        Command::Simulate { .. } => "simulate",
        Command::Verify { .. } => "verify",
    }
}

fn model_path(c: &Command) -> Option<&Path> {
    match c {
        Command::Validate(m) | Command::Fundamentals(m) => Some(&m.model),
        Command::Exit { model, .. }
        | Command::Scale { model, .. }
        | Command::Occupation { model, .. }
        | Command::Creep { model, .. }
        | Command::Extrema { model, .. }
        | Command::Decay { model, .. }
        | Command::TransformCheck { model, .. }
        | Command::Simulate { model, .. } => Some(&model.model),
        Command::Verify { model, .. } => model.as_deref(),
    }
}

fn execute(cli: &Cli) -> Result<(Report, Option<String>)> {
    let opts = SolveOptions {
        tol: cli.tol,
        max_iter: cli.max_iter,
        ..SolveOptions::default()
    };
    opts.validate()?;
    let ctx = Ctx {
        opts,
        horizon: cli.horizon,
        seed: cli.seed,
        paths: cli.paths,
        dt: cli.dt,
    };
    if let Command::Verify { random, model } = &cli.command {
        return run_verify(*random, model.as_deref(), &ctx);
    }
    let path = model_path(&cli.command).expect("every other command takes a model");
    let (model, hash) = format::load_model(path)?;
    let report = match &model {
        Model::Lattice(m) => run_lattice(&cli.command, m, &ctx)?,
        Model::Mmbm(m) => run_mmbm(&cli.command, m, &ctx)?,
    };
    Ok((report, Some(hash)))
}

fn emit(cli: &Cli, text: &str, stdout: &mut dyn Write) -> std::io::Result<()> {
    match &cli.output {
        Some(p) => std::fs::write(p, text),
        None => stdout.write_all(text.as_bytes()),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let (report, hash) = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            let mut doc = error_value(&e);
            doc["command"] = json!(command_name(&cli.command));
            let _ = writeln!(stderr, "{}", format::to_json_string(&doc, false));
            return 1;
        }
    };
    let tolerances = json!({
        "tol": cli.tol,
        "max_iter": cli.max_iter,
        "horizon": cli.horizon,
    });
    let text = match (cli.format, &report.csv) {
        (OutputFormat::Csv, Some(csv)) => {
            let mut head = format!(
                "# skipfree {VERSION} command={} model_hash={} tol={:e} max_iter={}",
                command_name(&cli.command),
                hash.as_deref().unwrap_or("none"),
                cli.tol,
                cli.max_iter
            );
            if let Some(h) = cli.horizon {
                head.push_str(&format!(" horizon={h}"));
            }
            format!("{head}\n{csv}")
        }
        (OutputFormat::Csv, None) => {
            let e = Error::InvalidArgument(format!("{} has no CSV form", command_name(&cli.command)));
            let _ = writeln!(stderr, "{}", format::to_json_string(&error_value(&e), false));
            return 2;
        }
        (OutputFormat::Json, _) => {
            let doc = json!({
                "tool": "skipfree",
                "version": VERSION,
                "command": command_name(&cli.command),
                "model_hash": hash,
                "tolerances": tolerances,
                "result": report.json,
            });
            format!("{}\n", format::to_json_string(&doc, true))
        }
    };
    if let Err(e) = emit(&cli, &text, stdout) {
        let doc = json!({"error": "Io", "message": e.to_string()});
        let _ = writeln!(stderr, "{}", format::to_json_string(&doc, false));
        return 1;
    }
    if report.ok {
        0
    } else {
        1
    }
}
