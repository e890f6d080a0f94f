//! Python module exposing the particle toolkit: configuration synthesis,
//! rasters, Euler measurements, the cumulus index, and grid runs.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use agglo_core::store;
use agglo_core::{
    analyze_image_with, clark_evans_points, euler_number_with, foreground_components,
    generate_configuration, hole_count, run_experiment, schedule_for_radius, thicken_trace_with,
    BinaryImage, CalibrationSource, Connectivity, EdgeCorrection, Error, ExperimentSpec, Point,
    ScheduleKind, DEFAULT_ALPHA,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Format(_) => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::ResampleCapExceeded { .. } | Error::DegenerateImage(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
    }
}

fn parse_connectivity(s: &str) -> PyResult<Connectivity> {
    match s {
        "8-4" => Ok(Connectivity::EightFour),
        "4-8" => Ok(Connectivity::FourEight),
        _ => Err(PyValueError::new_err(format!(
            "connectivity {s:?}, expected '8-4' or '4-8'"
        ))),
    }
}

fn parse_schedule(s: &str) -> PyResult<ScheduleKind> {
    match s {
        "count-matched" => Ok(ScheduleKind::CountMatched),
        "printed" => Ok(ScheduleKind::Printed),
        _ => Err(PyValueError::new_err(format!(
            "schedule {s:?}, expected 'count-matched' or 'printed'"
        ))),
    }
}

/// A placed set of equal disks in a square window.
#[pyclass(module = "agglo")]
struct Configuration {
    inner: agglo_core::Configuration,
}

#[pymethods]
impl Configuration {
    #[getter]
    fn n_particles(&self) -> usize {
        self.inner.n_particles()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho()
    }

    #[getter]
    fn box_size(&self) -> u32 {
        self.inner.box_size()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma_agg()
    }

    #[getter]
    fn target_p(&self) -> f64 {
        self.inner.target_p()
    }

    #[getter]
    fn achieved_p(&self) -> f64 {
        self.inner.achieved_p()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    /// Center coordinates as (x, y) pairs.
    fn centers(&self) -> Vec<(f64, f64)> {
        self.inner.centers().iter().map(|c| (c.x, c.y)).collect()
    }

    /// Draws every disk into a fresh raster.
    fn rasterize(&self) -> Image {
        Image {
            inner: agglo_core::rasterize(&self.inner),
        }
    }

    /// Clark-Evans index of the centers; below 1 means clustered.
    fn clark_evans(&self) -> PyResult<f64> {
        agglo_core::clark_evans(&self.inner).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        store::save_configuration(path, &self.inner).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Configuration> {
        Ok(Configuration {
            inner: store::load_configuration(path).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.n_particles()
    }

    fn __repr__(&self) -> String {
        format!(
            "Configuration(n={}, rho={}, box={}, gamma={}, achieved_p={:.4})",
            self.inner.n_particles(),
            self.inner.rho(),
            self.inner.box_size(),
            self.inner.gamma_agg(),
            self.inner.achieved_p()
        )
    }
}

/// A packed binary raster.
#[pyclass(module = "agglo")]
struct Image {
    inner: BinaryImage,
}

#[pymethods]
impl Image {
    #[new]
    fn new(width: u32, height: u32) -> Image {
        Image {
            inner: BinaryImage::new(width, height),
        }
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    #[getter]
    fn volume_fraction(&self) -> f64 {
        self.inner.volume_fraction()
    }

    #[getter]
    fn foreground_count(&self) -> u64 {
        self.inner.foreground_count()
    }

    fn get(&self, x: u32, y: u32) -> PyResult<bool> {
        self.bounds(x, y)?;
        Ok(self.inner.get(x, y))
    }

    fn set(&mut self, x: u32, y: u32, on: bool) -> PyResult<()> {
        self.bounds(x, y)?;
        self.inner.set(x, y, on);
        Ok(())
    }

    /// Euler number: foreground components minus holes.
    #[pyo3(signature = (connectivity = "8-4"))]
    fn euler(&self, connectivity: &str) -> PyResult<i64> {
        Ok(euler_number_with(&self.inner, parse_connectivity(connectivity)?))
    }

    #[pyo3(signature = (connectivity = "8-4"))]
    fn components(&self, connectivity: &str) -> PyResult<usize> {
        Ok(foreground_components(&self.inner, parse_connectivity(connectivity)?))
    }

    #[pyo3(signature = (connectivity = "8-4"))]
    fn holes(&self, connectivity: &str) -> PyResult<usize> {
        Ok(hole_count(&self.inner, parse_connectivity(connectivity)?))
    }

    /// Writes a PBM file; `plain` chooses the ASCII flavor over packed bytes.
    #[pyo3(signature = (path, plain = false))]
    fn save(&self, path: PathBuf, plain: bool) -> PyResult<()> {
        let format = if plain {
            store::PbmFormat::Plain
        } else {
            store::PbmFormat::Raw
        };
        store::save_image(path, &self.inner, format).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Image> {
        Ok(Image {
            inner: store::load_image(path).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Image({}x{}, p={:.4})",
            self.inner.width(),
            self.inner.height(),
            self.inner.volume_fraction()
        )
    }
}

impl Image {
    fn bounds(&self, x: u32, y: u32) -> PyResult<()> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyIndexError::new_err(format!(
                "pixel ({x}, {y}) outside {}x{}",
                self.inner.width(),
                self.inner.height()
            )));
        }
        Ok(())
    }
}

/// Everything one analysis pass produces.
#[pyclass(module = "agglo")]
struct Analysis {
    #[pyo3(get)]
    delta: f64,
    #[pyo3(get)]
    cade: u64,
    #[pyo3(get)]
    e_hat_p: f64,
    #[pyo3(get)]
    alpha: f64,
    #[pyo3(get)]
    measured_p: f64,
    #[pyo3(get)]
    warnings: Vec<String>,
}

#[pymethods]
impl Analysis {
    fn __repr__(&self) -> String {
        format!(
            "Analysis(delta={:.4}, cade={}, e_hat_p={:.1}, p={:.4})",
            self.delta, self.cade, self.e_hat_p, self.measured_p
        )
    }
}

/// Dispersed-pattern reference means over a grid of volume fractions.
#[pyclass(module = "agglo")]
struct CalibrationTable {
    inner: agglo_core::CalibrationTable,
}

#[pymethods]
impl CalibrationTable {
    /// Runs dispersed configurations at each volume fraction and records
    /// their cumulus statistics.
    #[staticmethod]
    #[pyo3(signature = (p_values, rho = 10.0, box_size = 2400, seeds = None, schedule = "count-matched", connectivity = "8-4"))]
    fn build(
        p_values: Vec<f64>,
        rho: f64,
        box_size: u32,
        seeds: Option<Vec<u64>>,
        schedule: &str,
        connectivity: &str,
    ) -> PyResult<CalibrationTable> {
        let seeds = seeds.unwrap_or_else(|| (1..=10).collect());
        let inner = agglo_core::CalibrationTable::build(
            &p_values,
            rho,
            box_size,
            &seeds,
            parse_schedule(schedule)?,
            parse_connectivity(connectivity)?,
        )
        .map_err(err)?;
        Ok(CalibrationTable { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<CalibrationTable> {
        let entries = store::load_calibration(path).map_err(err)?;
        Ok(CalibrationTable {
            inner: agglo_core::CalibrationTable::from_entries(entries).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        store::save_calibration(path, self.inner.entries()).map_err(err)
    }

    /// Reference cumulus for a measured volume fraction, with a warning
    /// string when the lookup left the covered range.
    fn reference_for(&self, p: f64) -> (f64, Option<String>) {
        let (value, warning) = self.inner.reference_for(p);
        (value, warning.map(|w| w.to_string()))
    }

    fn volume_fractions(&self) -> Vec<f64> {
        self.inner.entries().iter().map(|e| e.p).collect()
    }

    fn means(&self) -> Vec<f64> {
        self.inner.entries().iter().map(|e| e.mean).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.entries().len()
    }

    fn __repr__(&self) -> String {
        format!("CalibrationTable(p={:?})", self.volume_fractions())
    }
}

/// Draws a fresh particle configuration.
#[pyfunction]
#[pyo3(signature = (p, gamma = 0.0, rho = 10.0, box_size = 2400, seed = 1))]
fn generate(p: f64, gamma: f64, rho: f64, box_size: u32, seed: u64) -> PyResult<Configuration> {
    Ok(Configuration {
        inner: generate_configuration(gamma, p, rho, box_size, seed).map_err(err)?,
    })
}

/// Agglomeration index of an image. Without a calibration table the
/// dispersed reference is simulated on the fly at the measured fraction.
#[pyfunction]
#[pyo3(signature = (image, rho, calibration = None, alpha = DEFAULT_ALPHA, schedule = "count-matched", connectivity = "8-4"))]
fn analyze(
    image: &Image,
    rho: f64,
    calibration: Option<&CalibrationTable>,
    alpha: f64,
    schedule: &str,
    connectivity: &str,
) -> PyResult<Analysis> {
    let source = match calibration {
        Some(table) => CalibrationSource::Table(&table.inner),
        None => CalibrationSource::Auto,
    };
    let out = analyze_image_with(
        &image.inner,
        rho,
        source,
        parse_schedule(schedule)?,
        parse_connectivity(connectivity)?,
        alpha,
    )
    .map_err(err)?;
    Ok(Analysis {
        delta: out.index.delta,
        cade: out.cade.value,
        e_hat_p: out.index.e_hat_p,
        alpha: out.index.alpha,
        measured_p: out.measured_p,
        warnings: out.warnings.iter().map(|w| w.to_string()).collect(),
    })
}

/// Dilates the image through the schedule scaled for `rho`, returning
/// (chi, area) lists; entry 0 is the untouched input.
#[pyfunction]
#[pyo3(signature = (image, rho = 10.0, schedule = "count-matched", connectivity = "8-4"))]
fn thicken_trace(
    image: &Image,
    rho: f64,
    schedule: &str,
    connectivity: &str,
) -> PyResult<(Vec<i64>, Vec<u64>)> {
    let plan = schedule_for_radius(rho, image.inner.pixel_size(), parse_schedule(schedule)?)
        .map_err(err)?;
    let trace = thicken_trace_with(
        &image.inner,
        &plan,
        parse_connectivity(connectivity)?,
        |_, _| {},
    );
    Ok((trace.chis, trace.areas))
}

/// Total absolute Euler-number change accumulated over the thickening.
#[pyfunction]
#[pyo3(signature = (image, rho = 10.0, schedule = "count-matched", connectivity = "8-4"))]
fn cade(image: &Image, rho: f64, schedule: &str, connectivity: &str) -> PyResult<u64> {
    let plan = schedule_for_radius(rho, image.inner.pixel_size(), parse_schedule(schedule)?)
        .map_err(err)?;
    let trace = thicken_trace_with(
        &image.inner,
        &plan,
        parse_connectivity(connectivity)?,
        |_, _| {},
    );
    let value = agglo_core::cade(&trace, plan.skipped_steps(), plan.total_steps()).map_err(err)?;
    Ok(value.value)
}

/// Clark-Evans index of raw (x, y) centers in a square box.
#[pyfunction]
#[pyo3(signature = (centers, box_size, reflective = false))]
fn clark_evans(centers: Vec<(f64, f64)>, box_size: u32, reflective: bool) -> PyResult<f64> {
    let points: Vec<Point> = centers.iter().map(|&(x, y)| Point { x, y }).collect();
    let correction = if reflective {
        EdgeCorrection::Reflective
    } else {
        EdgeCorrection::None
    };
    clark_evans_points(&points, box_size, correction).map_err(err)
}

/// Runs a (p, gamma, seed) grid and returns its per-run records as
/// dicts. With `out` the full CSV report is written there as well.
#[pyfunction]
#[pyo3(signature = (p = None, gammas = None, seeds = None, rho = 10.0, box_size = 2400, alpha = DEFAULT_ALPHA, workers = None, radius_curves = false, out = None))]
#[allow(clippy::too_many_arguments)]
fn run_grid<'py>(
    py: Python<'py>,
    p: Option<Vec<f64>>,
    gammas: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    rho: f64,
    box_size: u32,
    alpha: f64,
    workers: Option<usize>,
    radius_curves: bool,
    out: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = ExperimentSpec {
        volume_fractions: p.unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.4]),
        gammas: gammas.unwrap_or_else(|| vec![0.0, 0.3, 0.6, 0.9]),
        seeds: seeds.unwrap_or_else(|| (1..=10).collect()),
        rho,
        box_size,
        schedule: ScheduleKind::CountMatched,
        connectivity: Connectivity::EightFour,
        alpha,
        workers,
        radius_curves,
    };
    let bundle = run_experiment(&spec).map_err(err)?;
    if let Some(dir) = out {
        store::write_report(dir, &bundle).map_err(err)?;
    }
    if let Some(failure) = bundle.failures.first() {
        return Err(PyRuntimeError::new_err(format!(
            "cell p={} gamma={} seed={} failed: {}",
            failure.p, failure.gamma, failure.seed, failure.message
        )));
    }
    let mut records = Vec::with_capacity(bundle.records.len());
    for r in &bundle.records {
        let d = PyDict::new(py);
        d.set_item("p", r.p)?;
        d.set_item("gamma", r.gamma)?;
        d.set_item("seed", r.seed)?;
        d.set_item("cade", r.cade)?;
        d.set_item("e_hat_p", r.e_hat_p)?;
        d.set_item("delta", r.delta)?;
        d.set_item("clark_evans", r.clark_evans)?;
        d.set_item("n_particles", r.n_particles)?;
        d.set_item("achieved_p", r.achieved_p)?;
        records.push(d);
    }
    Ok(records)
}

#[pymodule]
fn agglo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Configuration>()?;
    m.add_class::<Image>()?;
    m.add_class::<Analysis>()?;
    m.add_class::<CalibrationTable>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(thicken_trace, m)?)?;
    m.add_function(wrap_pyfunction!(cade, m)?)?;
    m.add_function(wrap_pyfunction!(clark_evans, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    m.add("DEFAULT_ALPHA", DEFAULT_ALPHA)?;
    Ok(())
}
