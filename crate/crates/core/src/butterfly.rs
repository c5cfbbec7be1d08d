//! From `C_j(t)` to a butterfly velocity: threshold crossings per probe site and a
//! least-squares fit of crossing time against site index.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::analytic::{butterfly_velocity, VelocityResult};
use crate::model::{ModelParams, Propagator};
use crate::rtr::{rtr_schedule, trotter_compile, CompilationResult, TrustRegionConfig};
use crate::yky::{otoc_surface, Evolution, SurfacePoint, SurfaceSpec};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// `0, 0.05, ..., 3`.
pub fn default_t_grid() -> Vec<f64> {
    linspace(0.0, 3.0, 61)
}

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![start],
        _ => (0..points).map(|k| start + (stop - start) * k as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingQuality {
    Interpolated,
    ExactSample,
    NotReached,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// `None` when the threshold is never reached on the grid.
    pub t: Option<f64>,
    pub quality: CrossingQuality,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadingPoint {
    pub j: usize,
    pub t_j: Option<f64>,
    pub quality: CrossingQuality,
}

/// First time the series reaches `threshold`, linearly interpolated between the bracketing
/// samples. `series` is `(t, C)` sorted by `t`.
pub fn spreading_time(series: &[(f64, f64)], threshold: f64) -> Result<Crossing> {
    let (&(t0, c0), _) = series.split_first().ok_or(Error::EmptySeries)?;
    if c0 >= threshold {
        if t0 > 0.0 {
            return Err(Error::CrossingBeforeGrid(t0));
        }
        return Ok(Crossing { t: Some(t0), quality: CrossingQuality::ExactSample });
    }
    for w in series.windows(2) {
        let ((ta, ca), (tb, cb)) = (w[0], w[1]);
        if cb >= threshold {
            if cb == threshold {
                return Ok(Crossing { t: Some(tb), quality: CrossingQuality::ExactSample });
            }
            let t = ta + (threshold - ca) * (tb - ta) / (cb - ca);
            return Ok(Crossing { t: Some(t), quality: CrossingQuality::Interpolated });
        }
    }
    Ok(Crossing { t: None, quality: CrossingQuality::NotReached })
}

/// Ordinary least squares of `t_j` against `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityFit {
    pub slope: f64,
    pub intercept: f64,
    /// `1 / slope`.
    pub v_b: f64,
    pub residual_rms: f64,
    pub points: usize,
    /// `slope > 0`; acausal data still produce a fit but are flagged here.
    pub causal: bool,
}

pub fn fit_velocity(points: &[(f64, f64)]) -> Result<VelocityFit> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints(1));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(VelocityFit { slope, intercept, v_b: 1.0 / slope, residual_rms, points: points.len(), causal: slope > 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub surface: Vec<SurfacePoint>,
    pub spreading: Vec<SpreadingPoint>,
    /// Probe sites left out of the fit, with the reason.
    pub excluded: Vec<(usize, Error)>,
    pub fit: Result<VelocityFit>,
    pub analytic: VelocityResult,
    /// `|v_fit - v_analytic| / v_analytic`, when both exist.
    pub rel_dev: Option<f64>,
}

/// Spreading times per probe site and the velocity fit for an already computed surface.
pub fn analyze_surface(params: &ModelParams, js: &[usize], surface: Vec<SurfacePoint>, threshold: f64) -> PipelineReport {
    let mut spreading = Vec::new();
    let mut excluded = Vec::new();
    let mut fit_points = Vec::new();
    for &j in js {
        let mut series = Vec::new();
        let mut failure = None;
        for p in surface.iter().filter(|p| p.j == j) {
            match &p.record {
                Ok(r) => series.push((p.t, r.c)),
                Err(e) => {
                    failure = Some(e.clone());
                    break;
                }
            }
        }
        if let Some(e) = failure {
            excluded.push((j, e));
            continue;
        }
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        match spreading_time(&series, threshold) {
            Ok(c) => {
                spreading.push(SpreadingPoint { j, t_j: c.t, quality: c.quality });
                if let Some(t) = c.t {
                    fit_points.push((j as f64, t));
                }
            }
            Err(e) => excluded.push((j, e)),
        }
    }
    let fit = fit_velocity(&fit_points);
    let analytic = butterfly_velocity(params.j, params.r, params.h);
    let rel_dev = fit.as_ref().ok().map(|f| (f.v_b - analytic.v_b).abs() / analytic.v_b);
    PipelineReport { surface, spreading, excluded, fit, analytic, rel_dev }
}

/// How `exp(-iHt)` enters the protocol at each time of the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiler {
    /// Exact propagator as a dense block.
    Exact,
    /// Brick-wall circuit from the trust-region compiler.
    Rtr { layers: usize, config: TrustRegionConfig },
    /// First-order Trotter circuit.
    Trotter { layers: usize },
}

/// Evolutions for every time of `t_grid`, with the compilation diagnostics when RTR is used.
pub fn evolution_schedule(
    params: &ModelParams,
    t_grid: &[f64],
    compiler: &Compiler,
    seed: u64,
) -> Result<(Vec<Evolution>, Vec<CompilationResult>)> {
    match compiler {
        Compiler::Exact => {
            let prop = Propagator::for_model(params)?;
            let evs = t_grid.iter().map(|&t| prop.at(t).map(Evolution::Unitary)).collect::<Result<_>>()?;
            Ok((evs, Vec::new()))
        }
        Compiler::Trotter { layers } => {
            let evs = t_grid
                .iter()
                .map(|&t| trotter_compile(params, t, *layers).map(Evolution::Compiled))
                .collect::<Result<_>>()?;
            Ok((evs, Vec::new()))
        }
        Compiler::Rtr { layers, config } => {
            let results = rtr_schedule(params, t_grid, *layers, config, seed)?;
            let evs = results.iter().map(|r| Evolution::Compiled(r.gates.clone())).collect();
            Ok((evs, results))
        }
    }
}

/// Surface, spreading times, fit and analytic comparison in one call.
pub fn run_pipeline(spec: &SurfaceSpec, compiler: &Compiler, threshold: f64) -> Result<PipelineReport> {
    let (evolutions, _) = evolution_schedule(&spec.params, &spec.t_grid, compiler, spec.seed)?;
    let surface = otoc_surface(spec, |index, _| Ok(evolutions[index].clone()));
    Ok(analyze_surface(&spec.params, &spec.js, surface, threshold))
}
