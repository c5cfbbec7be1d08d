//! The work behind each subcommand. Everything here returns data or writes files; printing
//! is left to `main`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde_json::{json, Value};
use xy_butterfly::analytic::butterfly_velocity;
use xy_butterfly::butterfly::{analyze_surface, evolution_schedule, linspace, PipelineReport};
use xy_butterfly::model::Propagator;
use xy_butterfly::rtr::{cost, rtr_compile_with_starts, trotter_compile, CompilationResult, GateSequence, TrustRegionConfig};
use xy_butterfly::yky::{surface_slice, SurfacePoint};

use crate::config::{RunConfig, SweepRow};
use crate::output::{csv, sig, write_atomic, write_json, Metadata};

/// `v_B` printed with six decimals.
pub fn analytic_line(j: f64, r: f64, h: f64) -> String {
    format!("{:.6}", butterfly_velocity(j, r, h).v_b)
}

/// Parity-symmetric `(r, h)` grid on `[-r_max, r_max] x [-h_max, h_max]`, rows in parallel.
pub fn analytic_sweep(meta: &Metadata, j: f64, r_max: f64, h_max: f64, points: usize) -> anyhow::Result<String> {
    if points == 0 || !(r_max >= 0.0 && h_max >= 0.0) {
        bail!("sweep needs at least one point and non-negative ranges");
    }
    let rs = linspace(-r_max, r_max, points);
    let hs = linspace(-h_max, h_max, points);
    let rows: Vec<Vec<Vec<String>>> = rs
        .par_iter()
        .map(|&r| hs.iter().map(|&h| vec![sig(r), sig(h), sig(butterfly_velocity(j, r, h).v_b)]).collect())
        .collect();
    Ok(csv(meta, "r,h,v_B", &rows.concat()))
}

fn gate_json(gates: &GateSequence) -> Value {
    gates
        .gates()
        .iter()
        .map(|g| {
            let mut flat = Vec::with_capacity(16);
            for row in 0..4 {
                for col in 0..4 {
                    let z = g[(row, col)];
                    flat.push(json!([z.re, z.im]));
                }
            }
            Value::Array(flat)
        })
        .collect()
}

pub fn compilation_json(res: &CompilationResult, seed: u64, cfg: &TrustRegionConfig) -> Value {
    json!({
        "layers": res.gates.layers(),
        "qubits": res.gates.qubits(),
        "final_error": res.final_error,
        "phase_aligned_error": res.phase_aligned_error,
        "iterations": res.iterations,
        "converged": res.converged,
        "random_start": res.start,
        "seed": seed,
        "trust_region": {
            "initial_radius": cfg.initial_radius,
            "max_radius": cfg.max_radius,
            "accept_ratio": cfg.accept_ratio,
            "expand_ratio": cfg.expand_ratio,
            "max_iters": cfg.max_iters,
            "grad_tol": cfg.grad_tol,
            "cost_tol": cfg.cost_tol,
            "min_radius": cfg.min_radius,
            "restarts": cfg.restarts,
            "init_spread": cfg.init_spread,
        },
        "cost_history": res.cost_history,
        "gates": gate_json(&res.gates),
    })
}

#[derive(Debug, Clone)]
pub struct CompileRow {
    pub layers: usize,
    pub trotter_error: f64,
    pub rtr: CompilationResult,
    pub config: TrustRegionConfig,
}

/// RTR against first-order Trotter at every depth of `[compile]`. RTR is warm started from
/// the Trotter circuit of the same depth plus the configured random restarts.
pub fn compile_rows(cfg: &RunConfig) -> anyhow::Result<Vec<CompileRow>> {
    let params = cfg.params()?;
    if cfg.compile.layers.is_empty() {
        bail!("compile.layers is empty");
    }
    let target = Propagator::for_model(&params)?.at(cfg.compile.t)?;
    cfg.compile
        .layers
        .par_iter()
        .map(|&layers| {
            if layers == 0 {
                bail!("layers must be at least 1");
            }
            let trotter = trotter_compile(&params, cfg.compile.t, layers)?;
            let trotter_error = cost(&trotter, &target)?.normalized;
            let config = TrustRegionConfig {
                max_iters: cfg.compiler.max_iters,
                restarts: cfg.compiler.restarts,
                grad_tol: cfg.compiler.grad_tol,
                cost_tol: cfg.compiler.cost_tol,
                ..TrustRegionConfig::for_layers(layers)
            };
            let rtr = rtr_compile_with_starts(&target, layers, &config, cfg.seed, &[trotter])?;
            Ok(CompileRow { layers, trotter_error, rtr, config })
        })
        .collect()
}

pub fn write_compile(dir: &Path, cfg: &RunConfig, rows: &[CompileRow]) -> anyhow::Result<Vec<PathBuf>> {
    let meta = Metadata::new("compile", cfg);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.layers.to_string(), sig(r.rtr.final_error), sig(r.trotter_error)])
        .collect();
    let csv_path = dir.join("compile_errors.csv");
    write_atomic(&csv_path, &csv(&meta, "layers,rtr_error,trotter_error", &table))?;
    let json_path = dir.join("compile_results.json");
    let results: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut v = compilation_json(&r.rtr, cfg.seed, &r.config);
            v["trotter_error"] = json!(r.trotter_error);
            v
        })
        .collect();
    write_json(
        &json_path,
        &json!({ "metadata": meta.json(), "config": cfg, "t": cfg.compile.t, "results": results }),
    )?;
    Ok(vec![csv_path, json_path])
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub config: RunConfig,
    pub report: PipelineReport,
    pub compilations: Vec<CompilationResult>,
}

/// Compiles the evolution schedule, evaluates the surface with slices in parallel, then
/// extracts spreading times and the velocity fit.
pub fn surface(cfg: &RunConfig) -> anyhow::Result<(Vec<SurfacePoint>, Vec<CompilationResult>)> {
    let spec = cfg.surface_spec()?;
    let (evolutions, compilations) =
        evolution_schedule(&spec.params, &spec.t_grid, &cfg.compiler.compiler(), cfg.seed)?;
    let slices: Vec<Vec<SurfacePoint>> =
        evolutions.par_iter().enumerate().map(|(i, ev)| surface_slice(&spec, i, ev)).collect();
    Ok((slices.concat(), compilations))
}

pub fn pipeline(cfg: &RunConfig) -> anyhow::Result<PipelineRun> {
    let (points, compilations) = surface(cfg)?;
    let report = analyze_surface(&cfg.params()?, &cfg.probes(), points, cfg.threshold);
    Ok(PipelineRun { config: cfg.clone(), report, compilations })
}

pub fn surface_csv(meta: &Metadata, points: &[SurfacePoint]) -> String {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| match &p.record {
            Ok(r) => vec![
                p.j.to_string(),
                sig(p.t),
                sig(r.f_epr),
                sig(r.otoc),
                sig(r.c),
                r.mode.as_str().to_owned(),
                r.shots.to_string(),
                r.ci_halfwidth.map(sig).unwrap_or_default(),
            ],
            Err(_) => {
                let nan = sig(f64::NAN);
                vec![p.j.to_string(), sig(p.t), nan.clone(), nan.clone(), nan, "failed".into(), "0".into(), String::new()]
            }
        })
        .collect();
    csv(meta, "j,t,F_EPR,otoc,C,mode,shots,ci", &rows)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(v))
}

pub fn fit_json(meta: &Metadata, run: &PipelineRun) -> Value {
    let r = &run.report;
    let fit = r.fit.as_ref().ok();
    json!({
        "metadata": meta.json(),
        "slope": opt(fit.map(|f| f.slope)),
        "intercept": opt(fit.map(|f| f.intercept)),
        "v_B": opt(fit.map(|f| f.v_b)),
        "residual_rms": opt(fit.map(|f| f.residual_rms)),
        "points": fit.map_or(0, |f| f.points),
        "analytic_vB": r.analytic.v_b,
        "rel_dev": opt(r.rel_dev),
        "causal": fit.map(|f| f.causal),
        "fit_error": r.fit.as_ref().err().map(|e| e.to_string()),
        "spreading": r.spreading.iter().map(|s| json!({
            "j": s.j,
            "t_j": opt(s.t_j),
            "quality": format!("{:?}", s.quality),
        })).collect::<Vec<_>>(),
        "excluded": r.excluded.iter().map(|(j, e)| json!({ "j": j, "reason": e.to_string() })).collect::<Vec<_>>(),
        "worst_compile_error": run.compilations.iter().map(|c| c.final_error).reduce(f64::max),
    })
}

pub fn summary_header() -> String {
    format!("{:>8} {:>8} {:>8} {:>12} {:>12} {:>9} {:>6}", "r", "h", "mode", "analytic", "fitted", "rel_dev", "points")
}

pub fn summary_line(run: &PipelineRun) -> String {
    let r = &run.report;
    let (fitted, points) = match &r.fit {
        Ok(f) => (format!("{:.6}", f.v_b), f.points),
        Err(_) => ("-".to_owned(), 0),
    };
    let dev = r.rel_dev.map_or("-".to_owned(), |d| format!("{:.2}%", 100.0 * d));
    format!(
        "{:>8} {:>8} {:>8} {:>12.6} {:>12} {:>9} {:>6}",
        run.config.model.r,
        run.config.model.h,
        run.config.mode.estimator().as_str(),
        r.analytic.v_b,
        fitted,
        dev,
        points
    )
}

pub fn write_velocity(dir: &Path, run: &PipelineRun) -> anyhow::Result<Vec<PathBuf>> {
    let meta = Metadata::new("velocity", &run.config);
    let surface_path = dir.join("surface.csv");
    write_atomic(&surface_path, &surface_csv(&meta, &run.report.surface))?;
    let fit_path = dir.join("fit.json");
    write_json(&fit_path, &fit_json(&meta, run))?;
    let summary_path = dir.join("summary.txt");
    write_atomic(&summary_path, &format!("{}{}\n{}\n", meta.csv_header(), summary_header(), summary_line(run)))?;
    Ok(vec![surface_path, fit_path, summary_path])
}

/// One pipeline per `[sweep]` row; rows run in parallel.
pub fn sweep(cfg: &RunConfig) -> anyhow::Result<Vec<PipelineRun>> {
    if cfg.sweep.rows.is_empty() {
        bail!("sweep.rows is empty");
    }
    cfg.sweep
        .rows
        .par_iter()
        .map(|row: &SweepRow| {
            let row_cfg = cfg.with_row(row);
            row_cfg.validate()?;
            pipeline(&row_cfg).with_context(|| format!("row r = {}, h = {}", row.r, row.h))
        })
        .collect()
}

pub fn write_sweep(dir: &Path, cfg: &RunConfig, runs: &[PipelineRun]) -> anyhow::Result<Vec<PathBuf>> {
    let meta = Metadata::new("sweep", cfg);
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|run| {
            let fit = run.report.fit.as_ref().ok();
            vec![
                sig(run.config.model.r),
                sig(run.config.model.h),
                sig(run.report.analytic.v_b),
                fit.map_or(String::new(), |f| sig(f.v_b)),
                run.report.rel_dev.map_or(String::new(), sig),
                fit.map_or(0, |f| f.points).to_string(),
            ]
        })
        .collect();
    let csv_path = dir.join("sweep.csv");
    write_atomic(&csv_path, &csv(&meta, "r,h,analytic_vB,v_B,rel_dev,points", &rows))?;
    let json_path = dir.join("sweep.json");
    let fits: Vec<Value> = runs.iter().map(|run| fit_json(&meta, run)).collect();
    write_json(&json_path, &json!({ "metadata": meta.json(), "config": cfg, "rows": fits }))?;
    Ok(vec![csv_path, json_path])
}
