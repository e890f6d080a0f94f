//! The full measurement grid: every (volume fraction, agglomeration,
//! seed) cell generated, rasterized, thickened, and scored, with the
//! agglomeration-zero cells doubling as the calibration set.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::cade::{delta_from_reference, pipeline_cade, CalibrationEntry};
use crate::genesis::{generate_configuration, Point};
use crate::morphology::{schedule_for_radius, ScheduleKind};
use crate::pointstats::{boundary_length, clark_evans};
use crate::raster::{stamp_disk, rasterize, BinaryImage};
use crate::topology::{euler_number_with, Connectivity};
use crate::{Error, Result};

/// Parameters of one grid run. The defaults are the reference setup this
/// crate is validated against: p in {0.1..0.4}, agglomeration in
/// {0, 0.3, 0.6, 0.9}, seeds 1..10, radius 10 in a 2400 box.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub volume_fractions: Vec<f64>,
    pub gammas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub rho: f64,
    pub box_size: u32,
    pub schedule: ScheduleKind,
    pub connectivity: Connectivity,
    pub alpha: f64,
    /// Thread count; `None` uses the process-wide pool.
    pub workers: Option<usize>,
    /// Also compute Euler-vs-radius curves on the first seed of each cell.
    pub radius_curves: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            volume_fractions: vec![0.1, 0.2, 0.3, 0.4],
            gammas: vec![0.0, 0.3, 0.6, 0.9],
            seeds: (1..=10).collect(),
            rho: 10.0,
            box_size: 2400,
            schedule: ScheduleKind::CountMatched,
            connectivity: Connectivity::EightFour,
            alpha: crate::cade::DEFAULT_ALPHA,
            workers: None,
            radius_curves: true,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.volume_fractions.is_empty() || self.gammas.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "volume fractions, gammas, and seeds must all be nonempty".into(),
            ));
        }
        for &p in &self.volume_fractions {
            if !(p > 0.0 && p <= 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "volume fraction {p} outside (0, 0.5]"
                )));
            }
        }
        let mut sorted = self.volume_fractions.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "duplicate volume fraction in grid".into(),
            ));
        }
        for &g in &self.gammas {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidParameter(format!(
                    "agglomeration parameter {g} outside [0, 1]"
                )));
            }
        }
        if !(self.rho.is_finite() && self.rho >= 2.0) {
            return Err(Error::InvalidParameter("radius below 2 pixels".into()));
        }
        if (self.box_size as f64) < 20.0 * self.rho {
            return Err(Error::InvalidParameter("box below 20 radii".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(
                "normalization factor must be positive".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("worker count must be positive".into()));
        }
        Ok(())
    }
}

/// One scored run of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub p: f64,
    pub gamma: f64,
    pub seed: u64,
    pub cade: u64,
    pub e_hat_p: f64,
    pub delta: f64,
    pub clark_evans: f64,
    pub n_particles: usize,
    pub achieved_p: f64,
}

/// avg/max/min of one quantity over the seeds of a (p, gamma) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryCell {
    pub p: f64,
    pub gamma: f64,
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

/// Seed-averaged cumulus up to each thickening step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCurvePoint {
    pub p: f64,
    pub gamma: f64,
    pub step: usize,
    pub mean_cumulus: f64,
}

/// Euler number and normalized functionals of one cell's first-seed
/// centers redrawn at radius r.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusCurvePoint {
    pub p: f64,
    pub gamma: f64,
    pub r: f64,
    pub chi: i64,
    pub euler_density: f64,
    pub area_ratio: f64,
    pub boundary_ratio: f64,
}

/// A cell the grid could not complete.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub p: f64,
    pub gamma: f64,
    pub seed: u64,
    pub message: String,
}

/// Everything a grid run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub spec: ExperimentSpec,
    pub calibration: Vec<CalibrationEntry>,
    pub records: Vec<RunRecord>,
    pub cade_summary: Vec<SummaryCell>,
    pub delta_summary: Vec<SummaryCell>,
    pub clark_evans_summary: Vec<SummaryCell>,
    pub step_curves: Vec<StepCurvePoint>,
    pub radius_curves: Vec<RadiusCurvePoint>,
    pub failures: Vec<CellFailure>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ReportBundle> {
    run_experiment_with_progress(spec, |_, _| {})
}

/// Like [`run_experiment`]; `progress(done, total)` fires after each
/// completed cell, possibly from worker threads.
pub fn run_experiment_with_progress(
    spec: &ExperimentSpec,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<ReportBundle> {
    spec.validate()?;
    match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(|| run_grid(spec, &progress)),
        None => run_grid(spec, &progress),
    }
}

struct CellOut {
    chis: Vec<i64>,
    cade: u64,
    ce: f64,
    n_particles: usize,
    achieved_p: f64,
    centers: Option<Vec<Point>>,
}

fn run_grid(spec: &ExperimentSpec, progress: &(impl Fn(usize, usize) + Sync)) -> Result<ReportBundle> {
    // Cell layout: all visible (p, gamma, seed) first; when the grid has
    // no gamma = 0 column, hidden calibration cells follow.
    let has_zero = spec.gammas.iter().any(|&g| g == 0.0);
    let mut cells: Vec<(usize, Option<usize>, u64)> = Vec::new();
    for pi in 0..spec.volume_fractions.len() {
        for gi in 0..spec.gammas.len() {
            for &seed in &spec.seeds {
                cells.push((pi, Some(gi), seed));
            }
        }
    }
    if !has_zero {
        for pi in 0..spec.volume_fractions.len() {
            for &seed in &spec.seeds {
                cells.push((pi, None, seed));
            }
        }
    }

    let total = cells.len();
    let done = AtomicUsize::new(0);
    let outcomes: Vec<Result<CellOut>> = cells
        .par_iter()
        .map(|&(pi, gi, seed)| {
            let out = run_cell(spec, pi, gi, seed);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            out
        })
        .collect();

    let mut failures = Vec::new();
    let mut by_cell: Vec<Option<CellOut>> = Vec::with_capacity(total);
    for (&(pi, gi, seed), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(out) => by_cell.push(Some(out)),
            Err(e) => {
                failures.push(CellFailure {
                    p: spec.volume_fractions[pi],
                    gamma: gi.map_or(0.0, |g| spec.gammas[g]),
                    seed,
                    message: e.to_string(),
                });
                by_cell.push(None);
            }
        }
    }

    // Calibration per volume fraction from the gamma = 0 cells.
    let is_calibration = |gi: Option<usize>| gi.map_or(true, |g| spec.gammas[g] == 0.0);
    let mut calibration: Vec<Option<CalibrationEntry>> = Vec::new();
    for pi in 0..spec.volume_fractions.len() {
        let mut seeds = Vec::new();
        let mut values = Vec::new();
        for (&(ci, gi, seed), out) in cells.iter().zip(&by_cell) {
            if ci == pi && is_calibration(gi) && !seeds.contains(&seed) {
                if let Some(out) = out {
                    seeds.push(seed);
                    values.push(out.cade);
                }
            }
        }
        calibration.push((!values.is_empty()).then(|| {
            CalibrationEntry::from_samples(
                spec.volume_fractions[pi],
                spec.rho,
                spec.box_size,
                seeds,
                &values,
            )
        }));
    }

    // Per-run records for the visible cells.
    let mut records = Vec::new();
    for (&(pi, gi, seed), out) in cells.iter().zip(&by_cell) {
        let (Some(gi), Some(out)) = (gi, out) else { continue };
        let p = spec.volume_fractions[pi];
        let gamma = spec.gammas[gi];
        let Some(entry) = &calibration[pi] else {
            failures.push(CellFailure {
                p,
                gamma,
                seed,
                message: "no calibration available for this volume fraction".into(),
            });
            continue;
        };
        match delta_from_reference(out.cade, entry.mean, spec.alpha) {
            Ok(index) => records.push(RunRecord {
                p,
                gamma,
                seed,
                cade: out.cade,
                e_hat_p: entry.mean,
                delta: index.delta,
                clark_evans: out.ce,
                n_particles: out.n_particles,
                achieved_p: out.achieved_p,
            }),
            Err(e) => failures.push(CellFailure {
                p,
                gamma,
                seed,
                message: e.to_string(),
            }),
        }
    }

    let summarize = |value: &dyn Fn(&RunRecord) -> f64| -> Vec<SummaryCell> {
        let mut out = Vec::new();
        for pi in 0..spec.volume_fractions.len() {
            for gi in 0..spec.gammas.len() {
                let vals: Vec<f64> = records
                    .iter()
                    .filter(|r| r.p == spec.volume_fractions[pi] && r.gamma == spec.gammas[gi])
                    .map(value)
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                out.push(SummaryCell {
                    p: spec.volume_fractions[pi],
                    gamma: spec.gammas[gi],
                    avg: vals.iter().sum::<f64>() / vals.len() as f64,
                    max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
                });
            }
        }
        out
    };
    let cade_summary = summarize(&|r| r.cade as f64);
    let delta_summary = summarize(&|r| r.delta);
    let clark_evans_summary = summarize(&|r| r.clark_evans);

    // Seed-averaged cumulus growth per visible cell.
    let schedule = schedule_for_radius(spec.rho, 1.0, spec.schedule)?;
    let (n1, n2) = (schedule.skipped_steps(), schedule.total_steps());
    let mut step_curves = Vec::new();
    for pi in 0..spec.volume_fractions.len() {
        for gi in 0..spec.gammas.len() {
            let traces: Vec<&Vec<i64>> = cells
                .iter()
                .zip(&by_cell)
                .filter(|(&(ci, cgi, _), out)| ci == pi && cgi == Some(gi) && out.is_some())
                .map(|(_, out)| &out.as_ref().unwrap().chis)
                .collect();
            if traces.is_empty() {
                continue;
            }
            for step in 1..=n2 {
                let mean = traces
                    .iter()
                    .map(|chis| {
                        (n1 + 1..=step.max(n1))
                            .map(|i| chis[i].abs_diff(chis[i - 1]))
                            .sum::<u64>() as f64
                    })
                    .sum::<f64>()
                    / traces.len() as f64;
                step_curves.push(StepCurvePoint {
                    p: spec.volume_fractions[pi],
                    gamma: spec.gammas[gi],
                    step,
                    mean_cumulus: mean,
                });
            }
        }
    }

    // Euler-vs-radius curves on the first seed of each cell.
    let mut radius_curves = Vec::new();
    if spec.radius_curves {
        let keepers: Vec<(usize, usize, &CellOut)> = cells
            .iter()
            .zip(&by_cell)
            .filter_map(|(&(pi, gi, _), out)| {
                let out = out.as_ref()?;
                out.centers.as_ref()?;
                Some((pi, gi?, out))
            })
            .collect();
        let radii: Vec<f64> = (1..=(2.5 * spec.rho).ceil() as u32).map(f64::from).collect();
        let points: Vec<Vec<RadiusCurvePoint>> = keepers
            .par_iter()
            .map(|&(pi, gi, out)| {
                let centers = out.centers.as_ref().unwrap();
                radii
                    .iter()
                    .map(|&r| {
                        radius_point(
                            spec,
                            spec.volume_fractions[pi],
                            spec.gammas[gi],
                            centers,
                            r,
                        )
                    })
                    .collect()
            })
            .collect();
        radius_curves.extend(points.into_iter().flatten());
    }

    Ok(ReportBundle {
        spec: spec.clone(),
        calibration: calibration.into_iter().flatten().collect(),
        records,
        cade_summary,
        delta_summary,
        clark_evans_summary,
        step_curves,
        radius_curves,
        failures,
    })
}

fn run_cell(spec: &ExperimentSpec, pi: usize, gi: Option<usize>, seed: u64) -> Result<CellOut> {
    let gamma = gi.map_or(0.0, |g| spec.gammas[g]);
    let p = spec.volume_fractions[pi];
    let config = generate_configuration(gamma, p, spec.rho, spec.box_size, seed)?;
    let image = rasterize(&config);
    let (trace, cade_value) = pipeline_cade(&image, spec.rho, spec.schedule, spec.connectivity)?;
    let ce = clark_evans(&config)?;
    let keep_centers = spec.radius_curves && gi.is_some() && seed == spec.seeds[0];
    Ok(CellOut {
        chis: trace.chis,
        cade: cade_value.value,
        ce,
        n_particles: config.n_particles(),
        achieved_p: config.achieved_p(),
        centers: keep_centers.then(|| config.centers().to_vec()),
    })
}

fn radius_point(
    spec: &ExperimentSpec,
    p: f64,
    gamma: f64,
    centers: &[Point],
    r: f64,
) -> RadiusCurvePoint {
    let mut img = BinaryImage::new(spec.box_size, spec.box_size);
    for c in centers {
        stamp_disk(&mut img, c.x, c.y, r);
    }
    let chi = euler_number_with(&img, spec.connectivity);
    let n = centers.len() as f64;
    let l = spec.box_size as f64;
    let x = n * std::f64::consts::PI * r * r / (l * l);
    RadiusCurvePoint {
        p,
        gamma,
        r,
        chi,
        euler_density: chi as f64 / n,
        area_ratio: img.volume_fraction() / x,
        boundary_ratio: boundary_length(&img) as f64 / (2.0 * std::f64::consts::PI * r * n),
    }
}
