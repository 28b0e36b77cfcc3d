use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use weibull_ce::error::Error;
use weibull_ce::estimator::{fit, FitConfig, FitResult, ProfileGrid};
use weibull_ce::io::{load_bins, load_dataset, load_template, write_dataset};
use weibull_ce::model::CeModel;
use weibull_ce::moments::{curve, parameter_grid, CurveRow, GridPoint};
use weibull_ce::newton::{Merit, NewtonConfig};
use weibull_ce::params::{ModelParams, TestPlan};
use weibull_ce::simulate::{
    gof_monte_carlo, generate_dataset, BootstrapMode, DesignTemplate, GofConfig, GofReport,
};

use crate::args::{CurvesArgs, FitArgs, GofArgs, MeritArg, ModeArg, PlanArgs, SimulateArgs, SolverArgs};
use crate::manifest::{sidecar_path, Clock, RunManifest};

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const PARSE: i32 = 3;
    pub const CONFIG: i32 = 4;
    pub const NOT_CONVERGED: i32 = 5;
    pub const SPURIOUS_ROOT: i32 = 6;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => exit::PARSE,
            Error::InvalidInput(_) | Error::InvalidParameter(_) => exit::CONFIG,
            Error::Solver(_) => exit::NOT_CONVERGED,
            _ => exit::OTHER,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError {
            code: exit::OTHER,
            message: e.to_string(),
        }
    }
}

type CliResult<T = i32> = Result<T, CliError>;

fn with_path<T>(path: &Path, r: Result<T, Error>) -> CliResult<T> {
    r.map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn plan(args: &PlanArgs) -> CliResult<TestPlan> {
    Ok(TestPlan::new(args.dv)?)
}

fn newton(args: &SolverArgs) -> NewtonConfig {
    NewtonConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        merit: match args.merit {
            MeritArg::Either => Merit::Either,
            MeritArg::Natural => Merit::Natural,
            MeritArg::Residual => Merit::Residual,
        },
        ..NewtonConfig::default()
    }
}

fn open_out(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(out: Option<&Path>, value: &Value) -> CliResult<()> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_sidecar(out: &Path, manifest: &RunManifest) -> CliResult<()> {
    let value = serde_json::to_value(manifest).map_err(io::Error::from)?;
    write_json(Some(&sidecar_path(out)), &value)
}

fn params_json(p: &ModelParams) -> Value {
    json!({ "beta": p.beta, "n": p.n, "zeta": p.zeta, "v_th": p.v_th, "k0": p.k0 })
}

fn fit_json(r: &FitResult) -> Value {
    json!({
        "beta": r.params.beta,
        "n": r.params.n,
        "zeta": r.params.zeta,
        "v_th": r.params.v_th,
        "k0": r.params.k0,
        "loglik": r.loglik,
        "converged": r.converged,
        "status": r.status,
        "iterations": r.iterations,
        "residual_max": r.residual_max,
        "warnings": r.warnings,
        "profile": r.profile_trace,
    })
}

fn fit_exit_code(r: &FitResult) -> i32 {
    if !r.converged {
        exit::NOT_CONVERGED
    } else if r.params.beta < 1.0 {
        exit::SPURIOUS_ROOT
    } else {
        exit::OK
    }
}

pub fn run_fit(args: &FitArgs) -> CliResult {
    let clock = Clock::start("fit");
    let plan = plan(&args.plan)?;
    let data = with_path(&args.data, load_dataset(&args.data, plan))?;
    let profile = if args.no_profile {
        None
    } else {
        let [a, b, s] = args.profile.0;
        Some(ProfileGrid::new(a, b, s)?)
    };
    let config = FitConfig {
        init: args.init.0,
        k0: args.plan.k0,
        profile,
        newton: newton(&args.solver),
    };
    let result = fit(&data, &config)?;
    let manifest = clock.manifest(
        vec![args.data.clone()],
        json!({ "dv": plan.dv, "fit": config }),
        None,
    );
    let mut report = fit_json(&result);
    report["dv"] = json!(plan.dv);
    report["manifest"] = serde_json::to_value(&manifest).map_err(io::Error::from)?;
    write_json(args.out.as_deref(), &report)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(fit_exit_code(&result))
}

const CURVE_HEADER: [&str; 8] = [
    "k_tilde", "dv", "v_th", "beta", "n", "ts_tilde", "mean_norm", "sd_norm",
];

fn write_curve<W: Write>(w: &mut csv::Writer<W>, point: &GridPoint, rows: &[CurveRow]) -> CliResult<()> {
    for r in rows {
        w.write_record([
            point.k_tilde.to_string(),
            point.dv.to_string(),
            point.v_th.to_string(),
            point.beta.to_string(),
            point.n.to_string(),
            r.ts.to_string(),
            r.moments.mean_norm.to_string(),
            r.moments.sd_norm.to_string(),
        ])
        .map_err(csv_io)?;
    }
    Ok(())
}

fn csv_io(e: csv::Error) -> CliError {
    CliError {
        code: exit::OTHER,
        message: e.to_string(),
    }
}

fn plot_file_name(p: &GridPoint) -> String {
    format!(
        "k{:e}_v{}_b{}_n{}.csv",
        p.k_tilde, p.v_th, p.beta, p.n
    )
}

pub fn run_curves(args: &CurvesArgs) -> CliResult {
    let clock = Clock::start("curves");
    let ts = args.grid.points();
    let points: Vec<GridPoint> = match args.params {
        Some(q) => {
            let plan = plan(&args.plan)?;
            let p = ModelParams::from_array(q.0, args.plan.k0)?;
            vec![GridPoint {
                k_tilde: p.k_tilde(),
                dv: plan.dv,
                v_th: p.v_th,
                beta: p.beta,
                n: p.n,
            }]
        }
        None => parameter_grid(),
    };
    let mut curves = Vec::with_capacity(points.len());
    for p in &points {
        let model = p.model()?;
        curves.push(curve(&ts, &model)?);
    }

    let mut w = csv::Writer::from_writer(open_out(args.out.as_deref())?);
    w.write_record(CURVE_HEADER).map_err(csv_io)?;
    for (p, rows) in points.iter().zip(&curves) {
        write_curve(&mut w, p, rows)?;
    }
    w.flush()?;

    let config = json!({ "grid": {
        "start": args.grid.start, "end": args.grid.end,
        "count": args.grid.count, "log": args.grid.log,
    }, "points": points });
    if let Some(dir) = &args.emit_plot_data {
        fs::create_dir_all(dir)?;
        for (p, rows) in points.iter().zip(&curves) {
            let mut pw = csv::Writer::from_path(dir.join(plot_file_name(p))).map_err(csv_io)?;
            pw.write_record(CURVE_HEADER).map_err(csv_io)?;
            write_curve(&mut pw, p, rows)?;
            pw.flush()?;
        }
        let m = clock.manifest(Vec::new(), config.clone(), None);
        write_sidecar(&dir.join("curves"), &m)?;
    }
    if let Some(out) = &args.out {
        write_sidecar(out, &clock.manifest(Vec::new(), config, None))?;
    }
    Ok(exit::OK)
}

pub fn run_simulate(args: &SimulateArgs) -> CliResult {
    let clock = Clock::start("simulate");
    let plan = plan(&args.plan)?;
    let params = ModelParams::from_array(args.params.0, args.plan.k0)?;
    let model = CeModel::new(params, plan)?;
    let template = with_path(&args.template, load_template(&args.template))?;
    let data = generate_dataset(&template, &model, args.seed)?;
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_dataset(&mut w, &data)?;
    w.flush()?;
    let manifest = clock.manifest(
        vec![args.template.clone()],
        json!({ "params": params_json(&params), "dv": plan.dv, "rows": data.observations.len() }),
        Some(args.seed),
    );
    write_sidecar(&args.out, &manifest)?;
    Ok(exit::OK)
}

#[derive(Serialize)]
struct GofOutput<'a> {
    params: Value,
    #[serde(flatten)]
    report: &'a GofReport,
    manifest: RunManifest,
}

pub fn run_gof(args: &GofArgs) -> CliResult {
    let clock = Clock::start("gof");
    let plan = plan(&args.plan)?;
    let bins = with_path(&args.bins, load_bins(&args.bins))?;
    let data = with_path(&args.data, load_dataset(&args.data, plan))?;
    let template = match &args.template {
        Some(p) => with_path(p, load_template(p))?,
        None => DesignTemplate::from_dataset(&data),
    };
    let [a, b, s] = args.profile.0;
    let profile = ProfileGrid::new(a, b, s)?;
    let solver = newton(&args.solver);
    let mut inputs = vec![args.data.clone(), args.bins.clone()];
    inputs.extend(args.template.clone());

    let (params, initial_fit) = match args.params {
        Some(q) => (ModelParams::from_array(q.0, args.plan.k0)?, None),
        None => {
            let config = FitConfig {
                k0: args.plan.k0,
                newton: solver,
                ..FitConfig::default()
            };
            let r = fit(&data, &config)?;
            if !r.converged {
                return Err(CliError {
                    code: exit::NOT_CONVERGED,
                    message: format!("fit of {} did not converge: {:?}", args.data.display(), r.status),
                });
            }
            (r.params, Some(r))
        }
    };
    let mut config = GofConfig::new(args.replicates, args.seed);
    config.mode = match args.mode {
        ModeArg::Refit => BootstrapMode::Refit,
        ModeArg::True => BootstrapMode::TrueParams,
    };
    config.fit.init = args.init.map_or(params.as_array(), |q| q.0);
    config.fit.k0 = args.plan.k0;
    config.fit.profile = Some(profile);
    config.fit.newton = solver;
    let report = gof_monte_carlo(&data, &params, &bins, &template, &config)?;

    let mut config_echo = json!({ "dv": plan.dv, "gof": config });
    if let Some(r) = &initial_fit {
        config_echo["initial_fit"] = fit_json(r);
    }
    let output = GofOutput {
        params: params_json(&params),
        report: &report,
        manifest: clock.manifest(inputs, config_echo, Some(args.seed)),
    };
    let value = serde_json::to_value(&output).map_err(io::Error::from)?;
    write_json(args.out.as_deref(), &value)?;
    Ok(exit::OK)
}
