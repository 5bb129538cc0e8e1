//! One function per subcommand. Each loads and validates the config, runs
//! the experiment and writes CSV tables plus `summary.json` into the output
//! directory next to a verbatim copy of the config.

use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};

use regml_core::analysis::{self, Side};
use regml_core::config::{CheckScalingConfig, RunConfig};
use regml_core::io::{self, fmt_float};
use regml_core::scaling::{log_grid_decreasing, verify_growth_condition};
use regml_core::trajectories;
use regml_core::{Error, RunOutcome, SpacetimeSolution};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_CONTAMINATED: u8 = 4;

pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidSupport { .. }
            | Error::InadmissibleEps { .. }
            | Error::InvalidScaling(_)
            | Error::UnderResolved { .. }
            | Error::ProfileUnderResolved { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidSolver(_)
            | Error::StepBound { .. } => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
    workers: usize,
    run_id: String,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Fields shared by every summary.
    fn header(&self, command: &str) -> Value {
        json!({ "command": command, "run_id": self.run_id, "seed": self.seed, "config": "config.toml" })
    }

    fn write_summary(&self, command: &str, body: Value) -> Result<(), Failure> {
        let mut v = self.header(command);
        if let (Value::Object(head), Value::Object(rest)) = (&mut v, body) {
            head.extend(rest);
        }
        io::write_json(&self.path("summary.json"), &v)?;
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, Failure> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Failure { code: EXIT_FAILURE, message: e.to_string() })
    }
}

fn load_config(opts: &Options) -> Result<(RunConfig, String), Failure> {
    let path = opts.config.as_ref().ok_or_else(|| Failure::config("--config <path> is required"))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::from_toml(&text).map_err(|e| Failure::config(e.to_string()))?;
    Ok((cfg, text))
}

fn check(cfg: &RunConfig) -> Result<(), Failure> {
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Failure::config(format!("invalid configuration:\n  {}", errs.join("\n  "))))
    }
}

fn context(opts: &Options) -> Result<Context, Failure> {
    let (cfg, text) = load_config(opts)?;
    check(&cfg)?;
    let seed = opts.seed.unwrap_or(cfg.output.seed);
    let run_id = io::run_id(&text, seed);
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("regml-out").join(&run_id));
    let workers = opts
        .workers
        .or(cfg.output.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    fs::create_dir_all(&out).map_err(Error::from)?;
    fs::write(out.join("config.toml"), &text).map_err(Error::from)?;
    Ok(Context { cfg, out, seed, workers, run_id })
}

fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    b.as_ref().ok_or_else(|| Failure::config(format!("config has no [{name}] block")))
}

/// Exit status implied by a finished run.
fn run_status(outcome: Option<&RunOutcome>, contaminated: bool) -> u8 {
    match outcome {
        Some(RunOutcome::GuardAbort { .. }) | Some(RunOutcome::Overflow { .. }) => EXIT_GUARD,
        _ if contaminated => EXIT_CONTAMINATED,
        _ => EXIT_OK,
    }
}

/// Combines statuses; guard aborts outrank contamination.
fn worst(a: u8, b: u8) -> u8 {
    let rank = |c: u8| match c {
        EXIT_GUARD => 3,
        EXIT_CONTAMINATED => 2,
        EXIT_OK => 0,
        _ => 1,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn status_of(sol: &SpacetimeSolution) -> u8 {
    run_status(Some(&sol.outcome), sol.boundary_contaminated)
}

fn run_json(sol: &SpacetimeSolution) -> Value {
    json!({
        "eps": sol.meta.eps,
        "nu": sol.meta.nu,
        "grid": { "x_min": sol.grid.x_min(), "x_max": sol.grid.x_max(), "dx": sol.grid.dx(), "n": sol.grid.len() },
        "meta": sol.meta,
        "outcome": sol.outcome,
        "boundary_contaminated": sol.boundary_contaminated,
        "a_priori_bound": sol.meta.a_priori_bound,
        "guard_limit": sol.meta.a_priori_bound * sol.meta.guard_factor,
        "sup_norm": sol.sup_norm(),
        "saved_states": sol.states.len(),
        "picard": sol.picard,
    })
}

pub fn validate(opts: &Options) -> CmdResult {
    let (cfg, _) = load_config(opts)?;
    check(&cfg)?;
    println!("configuration ok");
    Ok(EXIT_OK)
}

pub fn solve(opts: &Options) -> CmdResult {
    let ctx = context(opts)?;
    let eps = ctx.cfg.model.eps;
    let sol = ctx.cfg.run(eps, false)?;
    io::write_solution_csv(&ctx.path("solution.csv"), &sol)?;

    let q0 = sol.states[0].total_charge(&sol.grid);
    let drift = sol.states.iter().map(|s| (s.total_charge(&sol.grid) - q0).abs()).fold(0.0, f64::max);
    let residual = match analysis::transport_residual(&sol) {
        Ok(r) => json!({ "value": r }),
        Err(e) => json!({ "skipped": e.to_string() }),
    };
    let mut body = run_json(&sol);
    body["charge"] = json!({ "initial": q0, "max_drift": drift, "relative_drift": if q0 != 0.0 { drift / q0.abs() } else { drift } });
    body["transport_residual"] = residual;
    ctx.write_summary("solve", body)?;
    Ok(status_of(&sol))
}

pub fn sweep(opts: &Options) -> CmdResult {
    let ctx = context(opts)?;
    let sw = block(&ctx.cfg.sweep, "sweep")?;
    let observables = ctx.cfg.sweep_observables()?;
    let res = ctx.pool()?.install(|| analysis::limit_sweep(&sw.eps, &observables, |eps| ctx.cfg.run(eps, sw.refine_grid)))?;

    let mut rows = Vec::new();
    for o in &res.observables {
        for (k, (eps, p)) in o.eps.iter().zip(&o.pairings).enumerate() {
            rows.push(vec![
                o.name.clone(),
                fmt_float(*eps),
                fmt_float(*p),
                if k == 0 { String::new() } else { fmt_float(o.increments[k - 1]) },
                o.target.map(fmt_float).unwrap_or_default(),
            ]);
        }
    }
    io::write_records(&ctx.path("sweep.csv"), &["observable", "eps", "pairing", "increment", "target"], &rows)?;

    let status = res.runs.iter().fold(EXIT_OK, |s, r| worst(s, run_status(r.outcome.as_ref(), r.boundary_contaminated)));
    ctx.write_summary("sweep", json!({ "result": res }))?;
    Ok(status)
}

pub fn check_support(opts: &Options) -> CmdResult {
    let ctx = context(opts)?;
    let sp = block(&ctx.cfg.support, "support")?;
    let tol = sp.tol.unwrap_or(analysis::SUPPORT_TOL);
    let schedule = sp.eps.clone().unwrap_or_else(|| vec![ctx.cfg.model.eps]);
    let runs: Vec<Result<SpacetimeSolution, Error>> = ctx.pool()?.install(|| {
        use rayon::prelude::*;
        schedule.par_iter().map(|&eps| ctx.cfg.run(eps, true)).collect()
    });

    let mut status = EXIT_OK;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (eps, run) in schedule.iter().zip(runs) {
        let sol = run?;
        status = worst(status, status_of(&sol));
        let r = analysis::support_probe(&sol, sp.x0, sp.side)?;
        rows.push(vec![*eps, r.sup.e, r.sup.u, r.sup.sigma, r.relative.e, r.relative.u, r.relative.sigma]);
        reports.push(json!({ "eps": eps, "report": r, "pass": r.relative.max() <= tol, "run": run_json(&sol) }));
    }
    io::write_table(&ctx.path("support.csv"), &["eps", "sup_E", "sup_u", "sup_sigma", "rel_E", "rel_u", "rel_sigma"], &rows)?;
    let pass = reports.iter().all(|r| r["pass"] == json!(true));
    let side = match sp.side {
        Side::Right => "x >= x0",
        Side::Left => "x <= x0",
    };
    ctx.write_summary("check-support", json!({ "x0": sp.x0, "side": side, "tol": tol, "pass": pass, "runs": reports }))?;
    Ok(status)
}

pub fn compare_lin(opts: &Options) -> CmdResult {
    let ctx = context(opts)?;
    let cl = block(&ctx.cfg.compare_lin, "compare_lin")?;
    let eps = ctx.cfg.model.eps;
    let runs: Vec<Result<SpacetimeSolution, Error>> = ctx.pool()?.install(|| {
        use rayon::prelude::*;
        cl.q
            .par_iter()
            .map(|&q| {
                let mut c = ctx.cfg.clone();
                c.model.q = q;
                c.run(eps, false)
            })
            .collect()
    });

    let mut status = EXIT_OK;
    let (mut rows, mut series, mut entries) = (Vec::new(), Vec::new(), Vec::new());
    for (&q, run) in cl.q.iter().zip(runs) {
        let sol = run?;
        status = worst(status, status_of(&sol));
        let c = analysis::compare_linearized(&sol, q);
        let scale = if q != 0.0 { q.abs() } else { 1.0 };
        rows.push(vec![q, c.max_err_e, c.max_err_u, c.max_err_e / scale, c.max_err_u / scale]);
        for k in 0..c.times.len() {
            series.push(vec![q, c.times[k], c.err_e[k], c.err_u[k]]);
        }
        entries.push(json!({ "q": q, "max_err_e": c.max_err_e, "max_err_u": c.max_err_u, "rel_err_e": c.max_err_e / scale, "rel_err_u": c.max_err_u / scale }));
    }
    io::write_table(&ctx.path("compare_lin.csv"), &["q", "max_err_E", "max_err_u", "rel_err_E", "rel_err_u"], &rows)?;
    io::write_table(&ctx.path("compare_lin_times.csv"), &["q", "t", "err_E", "err_u"], &series)?;
    ctx.write_summary("compare-lin", json!({ "eps": eps, "b0": ctx.cfg.model.b0, "charges": entries }))?;
    Ok(status)
}

pub fn probe_blowup(opts: &Options) -> CmdResult {
    let ctx = context(opts)?;
    let b = block(&ctx.cfg.blowup, "blowup")?;
    let runs: Vec<Result<SpacetimeSolution, Error>> = ctx.pool()?.install(|| {
        use rayon::prelude::*;
        b.eps.par_iter().map(|&eps| ctx.cfg.run(eps, true)).collect()
    });
    let mut sols = Vec::new();
    let mut status = EXIT_OK;
    for r in runs {
        let sol = r?;
        status = worst(status, status_of(&sol));
        sols.push(sol);
    }
    let report = analysis::blow_up_probe(&sols, b.center, b.window);
    let rows: Vec<Vec<f64>> = report.rows.iter().map(|r| vec![r.eps, r.peak, r.peak_time]).collect();
    io::write_table(&ctx.path("blowup.csv"), &["eps", "peak", "peak_time"], &rows)?;
    ctx.write_summary("probe-blowup", json!({ "report": report }))?;
    Ok(status)
}

pub fn trajectories(opts: &Options) -> CmdResult {
    let ctx = context(opts)?;
    let tc = block(&ctx.cfg.trajectories, "trajectories")?;
    let sol = ctx.cfg.run(ctx.cfg.model.eps, false)?;
    let save_dt = sol.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let dr = tc.dr.unwrap_or(save_dt);
    let r_end = tc.r_end.unwrap_or(*sol.times.last().unwrap());
    let results = ctx.pool()?.install(|| trajectories::integrate_many(&sol, &tc.starts, r_end, dr));

    let mut status = status_of(&sol);
    let mut entries = Vec::new();
    for (k, (start, res)) in tc.starts.iter().zip(results).enumerate() {
        match res {
            Ok(tr) => {
                let name = format!("trajectory_{k:03}.csv");
                let rows: Vec<Vec<f64>> = tr.r.iter().zip(&tr.w).map(|(r, w)| vec![*r, *w]).collect();
                io::write_table(&ctx.path(&name), &["r", "w"], &rows)?;
                let reparam = if tc.reparam_check {
                    match trajectories::reparam_cross_check(&sol, *start, r_end, dr) {
                        Ok(c) => json!(c),
                        Err(e) => json!({ "error": e.to_string() }),
                    }
                } else {
                    Value::Null
                };
                entries.push(json!({
                    "start": start, "file": name, "samples": tr.r.len(), "exited": tr.exited,
                    "max_speed": tr.max_speed(), "reparam_check": reparam,
                }));
            }
            Err(e) => {
                status = worst(status, EXIT_FAILURE);
                entries.push(json!({ "start": start, "error": e.to_string() }));
            }
        }
    }
    let mut body = json!({ "r_end": r_end, "dr": dr, "trajectories": entries });
    body["run"] = run_json(&sol);
    ctx.write_summary("trajectories", body)?;
    Ok(status)
}

pub fn check_scaling(opts: &Options) -> CmdResult {
    let ctx = context(opts)?;
    let cs = ctx.cfg.check_scaling.clone().unwrap_or_else(CheckScalingConfig::default);
    let candidates = if cs.candidates.is_empty() { vec![ctx.cfg.scaling] } else { cs.candidates.clone() };
    let grid = log_grid_decreasing(cs.eps_hi, cs.eps_lo, cs.points);
    let (mut rows, mut reports) = (Vec::new(), Vec::new());
    for c in &candidates {
        for &p in &cs.p {
            let rep = verify_growth_condition(c, p, &grid)?;
            for r in &rep.rows {
                rows.push(vec![
                    serde_json::to_value(c.kind)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    fmt_float(c.c),
                    fmt_float(c.exponent),
                    p.to_string(),
                    fmt_float(r.eps),
                    fmt_float(r.h),
                    fmt_float(r.ratio),
                ]);
            }
            reports.push(rep);
        }
    }
    io::write_records(&ctx.path("scaling.csv"), &["kind", "c", "exponent", "p", "eps", "h", "ratio"], &rows)?;
    ctx.write_summary("check-scaling", json!({ "eps_grid": grid, "reports": reports }))?;
    Ok(EXIT_OK)
}
