//! The cumulus of the absolute differential Euler number and the
//! agglomeration index built on it.
//!
//! The cumulus (CADE) sums |chi_i - chi_{i-1}| over a window of
//! thickening steps. Its expected value for a well-dispersed pattern,
//! estimated from standard patterns generated at agglomeration zero, is
//! the calibration reference E_p. The index is
//! delta = alpha * (E_p - CADE) / E_p, zero on average for dispersed
//! pictures and approaching alpha for fully clumped ones.

use rayon::prelude::*;

use crate::genesis::generate_configuration;
use crate::morphology::{schedule_for_radius, thicken_trace_with, EulerTrace, ScheduleKind};
use crate::raster::{rasterize, BinaryImage};
use crate::topology::Connectivity;
use crate::{Error, Result};

/// Default normalization factor of the agglomeration index.
pub const DEFAULT_ALPHA: f64 = 1.2;

/// Seeds used when a calibration has to be computed on the fly.
pub const DEFAULT_CALIBRATION_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// When a calibration table is consulted for a measured volume fraction,
/// an entry this close is used verbatim instead of interpolating.
pub const SNAP_TOLERANCE: f64 = 0.02;

/// A computed cumulus together with the step window it was taken over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CadeValue {
    pub value: u64,
    /// Steps 1..=n1 are thickened but not summed.
    pub n1: usize,
    pub n2: usize,
    /// Optional tag naming the picture this was computed from.
    pub source: Option<String>,
}

/// Sums the absolute Euler-number changes of steps n1+1 ..= n2.
pub fn cade(trace: &EulerTrace, n1: usize, n2: usize) -> Result<CadeValue> {
    if n1 >= n2 || n2 > trace.steps() {
        return Err(Error::InvalidParameter(format!(
            "cumulus bounds ({n1}, {n2}) invalid for a {}-step trace",
            trace.steps()
        )));
    }
    let value = (n1 + 1..=n2)
        .map(|i| trace.chis[i].abs_diff(trace.chis[i - 1]))
        .sum();
    Ok(CadeValue {
        value,
        n1,
        n2,
        source: None,
    })
}

/// The dispersed-pattern reference for one volume fraction: cumulus
/// statistics over standard patterns (agglomeration zero), one per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationEntry {
    pub p: f64,
    pub rho: f64,
    pub box_size: u32,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation; absent when only one seed was used.
    pub std_dev: Option<f64>,
}

impl CalibrationEntry {
    pub(crate) fn from_samples(
        p: f64,
        rho: f64,
        box_size: u32,
        seeds: Vec<u64>,
        values: &[u64],
    ) -> Self {
        debug_assert_eq!(seeds.len(), values.len());
        debug_assert!(!values.is_empty());
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let std_dev = (values.len() >= 2).then(|| {
            let ss = values
                .iter()
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>();
            (ss / (n - 1.0)).sqrt()
        });
        CalibrationEntry {
            p,
            rho,
            box_size,
            seeds,
            mean,
            min: *values.iter().min().unwrap() as f64,
            max: *values.iter().max().unwrap() as f64,
            std_dev,
        }
    }
}

/// Generates a standard pattern per seed and averages the cumulus.
/// Defaults: count-matched schedule, 8-connected foreground.
pub fn calibrate(p: f64, rho: f64, box_size: u32, seeds: &[u64]) -> Result<CalibrationEntry> {
    calibrate_with(
        p,
        rho,
        box_size,
        seeds,
        ScheduleKind::CountMatched,
        Connectivity::EightFour,
    )
}

pub fn calibrate_with(
    p: f64,
    rho: f64,
    box_size: u32,
    seeds: &[u64],
    kind: ScheduleKind,
    connectivity: Connectivity,
) -> Result<CalibrationEntry> {
    if seeds.len() < 2 {
        return Err(Error::InvalidParameter(
            "calibration needs at least two seeds".into(),
        ));
    }
    let values = seeds
        .par_iter()
        .map(|&seed| {
            let config = generate_configuration(0.0, p, rho, box_size, seed)?;
            let image = rasterize(&config);
            Ok(pipeline_cade(&image, rho, kind, connectivity)?.1.value)
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(CalibrationEntry::from_samples(
        p,
        rho,
        box_size,
        seeds.to_vec(),
        &values,
    ))
}

/// Thickens with the schedule sized to `rho` and takes the cumulus over
/// its full window.
pub(crate) fn pipeline_cade(
    image: &BinaryImage,
    rho: f64,
    kind: ScheduleKind,
    connectivity: Connectivity,
) -> Result<(EulerTrace, CadeValue)> {
    let schedule = schedule_for_radius(rho, image.pixel_size(), kind)?;
    let trace = thicken_trace_with(image, &schedule, connectivity, |_, _| {});
    let value = cade(&trace, schedule.skipped_steps(), schedule.total_steps())?;
    Ok((trace, value))
}

/// The agglomeration index and the reference it was normalized against.
#[derive(Clone, Debug, PartialEq)]
pub struct AggIndex {
    pub delta: f64,
    pub alpha: f64,
    /// Calibration reference the cumulus was compared to.
    pub e_hat_p: f64,
}

/// delta = alpha * (reference - cumulus) / reference.
pub fn delta_agg(
    cade_value: &CadeValue,
    calibration: &CalibrationEntry,
    alpha: f64,
) -> Result<AggIndex> {
    delta_from_reference(cade_value.value, calibration.mean, alpha)
}

pub(crate) fn delta_from_reference(cade: u64, e_hat_p: f64, alpha: f64) -> Result<AggIndex> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "normalization factor {alpha} must be positive"
        )));
    }
    if !(e_hat_p.is_finite() && e_hat_p > 0.0) {
        return Err(Error::DegenerateImage(format!(
            "calibration reference {e_hat_p} is not positive; volume fraction or window too small"
        )));
    }
    Ok(AggIndex {
        delta: alpha * (e_hat_p - cade as f64) / e_hat_p,
        alpha,
        e_hat_p,
    })
}

/// Calibration entries over a grid of volume fractions, for looking up a
/// reference at arbitrary measured p.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTable {
    entries: Vec<CalibrationEntry>,
}

impl CalibrationTable {
    /// Entries must be nonempty with strictly distinct volume fractions;
    /// they are kept sorted by p.
    pub fn from_entries(mut entries: Vec<CalibrationEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("empty calibration table".into()));
        }
        if entries.iter().any(|e| !e.p.is_finite()) {
            return Err(Error::InvalidParameter(
                "calibration entry with non-finite volume fraction".into(),
            ));
        }
        entries.sort_by(|a, b| a.p.total_cmp(&b.p));
        if entries.windows(2).any(|w| w[0].p == w[1].p) {
            return Err(Error::InvalidParameter(
                "duplicate volume fraction in calibration table".into(),
            ));
        }
        Ok(CalibrationTable { entries })
    }

    /// Runs `calibrate` at every listed volume fraction.
    pub fn build(
        p_values: &[f64],
        rho: f64,
        box_size: u32,
        seeds: &[u64],
        kind: ScheduleKind,
        connectivity: Connectivity,
    ) -> Result<Self> {
        let entries = p_values
            .iter()
            .map(|&p| calibrate_with(p, rho, box_size, seeds, kind, connectivity))
            .collect::<Result<Vec<_>>>()?;
        CalibrationTable::from_entries(entries)
    }

    pub fn entries(&self) -> &[CalibrationEntry] {
        &self.entries
    }

    /// Reference value for a measured volume fraction. An entry within
    /// [`SNAP_TOLERANCE`] is used as is (closest wins); otherwise the
    /// reference is interpolated linearly between the bracketing
    /// entries, or clamped to the nearest end outside the covered range
    /// (flagged by the warning).
    pub fn reference_for(&self, p: f64) -> (f64, Option<AnalysisWarning>) {
        let nearest = self
            .entries
            .iter()
            .min_by(|a, b| (a.p - p).abs().total_cmp(&(b.p - p).abs()))
            .unwrap();
        if (nearest.p - p).abs() <= SNAP_TOLERANCE {
            return (nearest.mean, None);
        }
        let first = self.entries.first().unwrap();
        let last = self.entries.last().unwrap();
        if p < first.p || p > last.p {
            return (
                nearest.mean,
                Some(AnalysisWarning::CalibrationExtrapolated {
                    measured: p,
                    covered: (first.p, last.p),
                }),
            );
        }
        let hi = self.entries.iter().position(|e| e.p >= p).unwrap();
        let (a, b) = (&self.entries[hi - 1], &self.entries[hi]);
        let t = (p - a.p) / (b.p - a.p);
        (a.mean + t * (b.mean - a.mean), None)
    }
}

/// Conditions worth reporting alongside an analysis result.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalysisWarning {
    /// Measured volume fraction above the validated range; auto
    /// calibration was run at 0.5 instead.
    VolumeFractionHigh { measured: f64 },
    /// Fewer than three thickening steps; the cumulus is noisy.
    ScheduleShort { steps: usize },
    /// Supplied calibration was made for a clearly different volume
    /// fraction.
    CalibrationMismatch { measured: f64, calibrated: f64 },
    /// Measured volume fraction outside the calibration table's range;
    /// the nearest end entry was used.
    CalibrationExtrapolated { measured: f64, covered: (f64, f64) },
}

impl std::fmt::Display for AnalysisWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnalysisWarning::VolumeFractionHigh { measured } => write!(
                f,
                "volume fraction {measured:.4} above validated 0.5; calibrated at 0.5"
            ),
            AnalysisWarning::ScheduleShort { steps } => {
                write!(f, "only {steps} thickening steps; cumulus will be noisy")
            }
            AnalysisWarning::CalibrationMismatch {
                measured,
                calibrated,
            } => write!(
                f,
                "image volume fraction {measured:.4} vs calibration at {calibrated:.4}"
            ),
            AnalysisWarning::CalibrationExtrapolated { measured, covered } => write!(
                f,
                "volume fraction {measured:.4} outside calibrated range [{}, {}]",
                covered.0, covered.1
            ),
        }
    }
}

/// Where the analysis takes its dispersed-pattern reference from.
#[derive(Clone, Copy, Debug)]
pub enum CalibrationSource<'a> {
    /// Measure p on the image and calibrate at that fraction, with the
    /// image's own dimensions and the default seeds.
    Auto,
    Entry(&'a CalibrationEntry),
    Table(&'a CalibrationTable),
}

/// Everything `analyze_image` determined about a picture.
#[derive(Clone, Debug)]
pub struct ImageAnalysis {
    pub index: AggIndex,
    pub cade: CadeValue,
    pub measured_p: f64,
    /// The entry used or computed; absent when a table was interpolated.
    pub calibration: Option<CalibrationEntry>,
    pub warnings: Vec<AnalysisWarning>,
}

/// Full pipeline on a user picture: thicken, cumulus, index. `None`
/// calibration measures the image and calibrates itself.
pub fn analyze_image(
    image: &BinaryImage,
    rho: f64,
    calibration: Option<&CalibrationEntry>,
) -> Result<ImageAnalysis> {
    let source = match calibration {
        Some(entry) => CalibrationSource::Entry(entry),
        None => CalibrationSource::Auto,
    };
    analyze_image_with(
        image,
        rho,
        source,
        ScheduleKind::CountMatched,
        Connectivity::EightFour,
        DEFAULT_ALPHA,
    )
}

pub fn analyze_image_with(
    image: &BinaryImage,
    rho: f64,
    source: CalibrationSource,
    kind: ScheduleKind,
    connectivity: Connectivity,
    alpha: f64,
) -> Result<ImageAnalysis> {
    if !(rho.is_finite() && rho >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "particle radius {rho} below the 2-pixel minimum"
        )));
    }
    let measured_p = image.volume_fraction();
    if measured_p == 0.0 {
        return Err(Error::DegenerateImage(
            "no foreground pixels; volume fraction is zero".into(),
        ));
    }
    let mut warnings = Vec::new();
    let steps = (rho / image.pixel_size()).round() as usize;
    if steps < 3 {
        warnings.push(AnalysisWarning::ScheduleShort { steps });
    }
    if measured_p > 0.5 {
        warnings.push(AnalysisWarning::VolumeFractionHigh {
            measured: measured_p,
        });
    }

    let (_, cade_value) = pipeline_cade(image, rho, kind, connectivity)?;

    let (e_hat_p, calibration) = match source {
        CalibrationSource::Entry(entry) => {
            if (entry.p - measured_p).abs() > 0.05 {
                warnings.push(AnalysisWarning::CalibrationMismatch {
                    measured: measured_p,
                    calibrated: entry.p,
                });
            }
            (entry.mean, Some(entry.clone()))
        }
        CalibrationSource::Table(table) => {
            let (value, warning) = table.reference_for(measured_p);
            warnings.extend(warning);
            (value, None)
        }
        CalibrationSource::Auto => {
            let side = calibration_box(image);
            let entry = calibrate_with(
                measured_p.min(0.5),
                rho,
                side,
                &DEFAULT_CALIBRATION_SEEDS,
                kind,
                connectivity,
            )?;
            (entry.mean, Some(entry))
        }
    };
    let index = delta_from_reference(cade_value.value, e_hat_p, alpha)?;
    Ok(ImageAnalysis {
        index,
        cade: cade_value,
        measured_p,
        calibration,
        warnings,
    })
}

/// Square box matching the image's pixel count, for calibrating against
/// pictures that are not square.
fn calibration_box(image: &BinaryImage) -> u32 {
    let area = image.width() as f64 * image.height() as f64;
    area.sqrt().round() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cumulus_by_hand() {
        let trace = EulerTrace {
            chis: vec![5, 3, 4],
            areas: vec![1, 2, 3],
        };
        assert_eq!(cade(&trace, 0, 2).unwrap().value, 3);
        assert_eq!(cade(&trace, 1, 2).unwrap().value, 1);
    }

    #[test]
    fn constant_trace_gives_zero() {
        let trace = EulerTrace {
            chis: vec![7; 11],
            areas: (0..11).collect(),
        };
        assert_eq!(cade(&trace, 1, 10).unwrap().value, 0);
    }

    #[test]
    fn bounds_validated() {
        let trace = EulerTrace {
            chis: vec![1, 1, 1],
            areas: vec![1, 1, 1],
        };
        assert!(cade(&trace, 2, 2).is_err());
        assert!(cade(&trace, 0, 3).is_err());
        assert!(cade(&trace, 0, 2).is_ok());
    }

    #[test]
    fn sample_statistics() {
        let e = CalibrationEntry::from_samples(0.2, 10.0, 100, vec![1, 2], &[100, 120]);
        assert_eq!(e.mean, 110.0);
        assert_eq!((e.min, e.max), (100.0, 120.0));
        assert_relative_eq!(e.std_dev.unwrap(), 200f64.sqrt(), max_relative = 1e-12);
        let single = CalibrationEntry::from_samples(0.2, 10.0, 100, vec![1], &[100]);
        assert_eq!(single.std_dev, None);
    }

    #[test]
    fn identical_seeds_give_zero_spread() {
        let e = calibrate(0.15, 4.0, 120, &[9, 9]).unwrap();
        assert_eq!(e.std_dev, Some(0.0));
        assert_eq!(e.min, e.mean);
        assert_eq!(e.max, e.mean);
    }

    #[test]
    fn calibrate_needs_two_seeds() {
        assert!(calibrate(0.2, 4.0, 120, &[1]).is_err());
    }

    #[test]
    fn index_formula_fixed_points() {
        let entry = CalibrationEntry::from_samples(0.2, 10.0, 100, vec![1, 2], &[200, 200]);
        let at_reference = CadeValue {
            value: 200,
            n1: 1,
            n2: 10,
            source: None,
        };
        assert_eq!(delta_agg(&at_reference, &entry, 1.2).unwrap().delta, 0.0);
        let at_zero = CadeValue {
            value: 0,
            ..at_reference.clone()
        };
        assert_eq!(delta_agg(&at_zero, &entry, 1.2).unwrap().delta, 1.2);
        let above = CadeValue {
            value: 300,
            ..at_reference
        };
        assert!(delta_agg(&above, &entry, 1.2).unwrap().delta < 0.0);
    }

    #[test]
    fn zero_reference_rejected() {
        let entry = CalibrationEntry::from_samples(0.2, 10.0, 100, vec![1, 2], &[0, 0]);
        let v = CadeValue {
            value: 10,
            n1: 1,
            n2: 10,
            source: None,
        };
        assert!(delta_agg(&v, &entry, 1.2).is_err());
    }

    fn entry_at(p: f64, mean: f64) -> CalibrationEntry {
        CalibrationEntry {
            p,
            rho: 10.0,
            box_size: 2400,
            seeds: vec![1, 2],
            mean,
            min: mean,
            max: mean,
            std_dev: Some(0.0),
        }
    }

    #[test]
    fn table_snaps_then_interpolates() {
        let table = CalibrationTable::from_entries(vec![
            entry_at(0.1, 800.0),
            entry_at(0.2, 2100.0),
            entry_at(0.3, 2900.0),
        ])
        .unwrap();
        // Within tolerance of a grid point: exact entry value.
        assert_eq!(table.reference_for(0.1004).0, 800.0);
        assert_eq!(table.reference_for(0.085).0, 800.0);
        // Between points: linear.
        let (mid, warn) = table.reference_for(0.25);
        assert_relative_eq!(mid, 2500.0, max_relative = 1e-12);
        assert!(warn.is_none());
        // Outside: clamped with a warning.
        let (low, warn) = table.reference_for(0.01);
        assert_eq!(low, 800.0);
        assert!(matches!(
            warn,
            Some(AnalysisWarning::CalibrationExtrapolated { .. })
        ));
    }

    #[test]
    fn table_rejects_duplicates() {
        assert!(
            CalibrationTable::from_entries(vec![entry_at(0.1, 800.0), entry_at(0.1, 820.0)])
                .is_err()
        );
        assert!(CalibrationTable::from_entries(vec![]).is_err());
    }

    #[test]
    fn analysis_rejects_empty_image() {
        let img = BinaryImage::new(64, 64);
        assert!(matches!(
            analyze_image(&img, 5.0, None),
            Err(Error::DegenerateImage(_))
        ));
    }

    #[test]
    fn analysis_against_entry_matches_formula() {
        let config = generate_configuration(0.8, 0.15, 5.0, 250, 3).unwrap();
        let image = rasterize(&config);
        let entry = calibrate(0.15, 5.0, 250, &[1, 2, 3]).unwrap();
        let report = analyze_image(&image, 5.0, Some(&entry)).unwrap();
        let (_, direct) = pipeline_cade(
            &image,
            5.0,
            ScheduleKind::CountMatched,
            Connectivity::EightFour,
        )
        .unwrap();
        assert_eq!(report.cade.value, direct.value);
        assert_relative_eq!(
            report.index.delta,
            1.2 * (entry.mean - direct.value as f64) / entry.mean,
            max_relative = 1e-12
        );
        assert!(report.index.delta > 0.3, "clumped pattern: {}", report.index.delta);
    }
}
