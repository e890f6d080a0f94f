//! Morphological thickening and the Euler trace it produces.
//!
//! Thickening dilates the picture repeatedly, alternating between a
//! 5-pixel cross and a 3x3 square so that the grown area tracks a true
//! Euclidean disk. The trace records the Euler number and foreground area
//! after every step; downstream the absolute step-to-step Euler changes
//! are summed into the cumulus.

use crate::raster::{tail_mask, BinaryImage};
use crate::topology::{euler_number_with, Connectivity};
use crate::{Error, Result};

/// The two dilation kernels used by the thickening schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructuringElement {
    /// Center plus the four edge neighbors.
    Cross,
    /// Full 3x3 neighborhood.
    Square,
}

impl StructuringElement {
    pub fn label(self) -> &'static str {
        match self {
            StructuringElement::Cross => "cross",
            StructuringElement::Square => "square",
        }
    }
}

/// How the cross/square alternation is laid out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Square on steps 1, 4, 7, ...; reproduces the ideal disk pixel
    /// counts exactly for the first ten steps.
    #[default]
    CountMatched,
    /// Fixed published cycle of square and cross steps.
    Printed,
}

impl ScheduleKind {
    pub fn label(self) -> &'static str {
        match self {
            ScheduleKind::CountMatched => "count-matched",
            ScheduleKind::Printed => "printed",
        }
    }
}

const PRINTED_CYCLE: [StructuringElement; 10] = {
    use StructuringElement::{Cross, Square};
    [
        Square, Cross, Cross, Cross, Square, Cross, Cross, Square, Cross, Cross,
    ]
};

fn element_at(step: usize, kind: ScheduleKind) -> StructuringElement {
    match kind {
        ScheduleKind::CountMatched => {
            if step % 3 == 1 {
                StructuringElement::Square
            } else {
                StructuringElement::Cross
            }
        }
        ScheduleKind::Printed => PRINTED_CYCLE[(step - 1) % 10],
    }
}

/// A fixed sequence of dilation steps plus the cumulus bounds: steps
/// 1..=skipped_steps are thickened but excluded from the cumulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThickeningSchedule {
    elements: Vec<StructuringElement>,
    skip: usize,
}

impl ThickeningSchedule {
    /// `total_steps` dilations laid out per `kind`. Requires
    /// `skip < total_steps`.
    pub fn with_kind(total_steps: usize, skip: usize, kind: ScheduleKind) -> Result<Self> {
        let elements = (1..=total_steps).map(|i| element_at(i, kind)).collect();
        ThickeningSchedule::from_elements(elements, skip)
    }

    pub fn from_elements(elements: Vec<StructuringElement>, skip: usize) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidParameter(
                "thickening schedule needs at least one step".into(),
            ));
        }
        if skip >= elements.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot skip {skip} of {} thickening steps",
                elements.len()
            )));
        }
        Ok(ThickeningSchedule { elements, skip })
    }

    pub fn elements(&self) -> &[StructuringElement] {
        &self.elements
    }

    /// Upper cumulus bound: the number of dilation steps.
    pub fn total_steps(&self) -> usize {
        self.elements.len()
    }

    /// Lower cumulus bound: leading steps whose Euler change is ignored.
    pub fn skipped_steps(&self) -> usize {
        self.skip
    }
}

/// Ten count-matched steps, first step excluded from the cumulus. This is
/// the schedule for the standard particle radius of 10 pixels.
pub fn default_schedule() -> ThickeningSchedule {
    ThickeningSchedule::with_kind(10, 1, ScheduleKind::CountMatched).unwrap()
}

/// Schedule sized to a particle radius: round(rho / pixel_size) steps.
pub fn schedule_for_radius(rho: f64, pixel_size: f64, kind: ScheduleKind) -> Result<ThickeningSchedule> {
    if !(rho.is_finite() && rho > 0.0) || !(pixel_size.is_finite() && pixel_size > 0.0) {
        return Err(Error::InvalidParameter(
            "radius and pixel size must be positive".into(),
        ));
    }
    let total = ((rho / pixel_size).round() as usize).max(1);
    ThickeningSchedule::with_kind(total, 1.min(total - 1), kind)
}

/// One dilation. Word-parallel: a row of the result is the OR of the
/// widened (left|center|right) source rows above/at/below for the square,
/// or the widened center row with the raw rows above and below for the
/// cross. Pixels never grow past the picture border.
pub fn dilate(image: &BinaryImage, element: StructuringElement) -> BinaryImage {
    let (w, h) = (image.width(), image.height());
    let mut out = BinaryImage::new(w, h);
    out.set_pixel_size(image.pixel_size());
    if w == 0 || h == 0 {
        return out;
    }
    let wpr = image.words_per_row();
    let tail = tail_mask(w);
    let mut widened = vec![0u64; wpr * h as usize];
    for y in 0..h {
        widen_row(image.row(y), &mut widened[wpr * y as usize..wpr * (y + 1) as usize], tail);
    }
    for y in 0..h {
        let mid = &widened[wpr * y as usize..wpr * (y + 1) as usize];
        let (above, below) = match element {
            StructuringElement::Square => (
                (y > 0).then(|| &widened[wpr * (y - 1) as usize..wpr * y as usize]),
                (y + 1 < h).then(|| &widened[wpr * (y + 1) as usize..wpr * (y + 2) as usize]),
            ),
            StructuringElement::Cross => (
                (y > 0).then(|| image.row(y - 1)),
                (y + 1 < h).then(|| image.row(y + 1)),
            ),
        };
        let row = out.row_mut(y);
        for k in 0..wpr {
            row[k] = mid[k] | above.map_or(0, |r| r[k]) | below.map_or(0, |r| r[k]);
        }
    }
    out
}

/// dst = src | (src shifted left) | (src shifted right), slack bits kept zero.
fn widen_row(src: &[u64], dst: &mut [u64], tail: u64) {
    let n = src.len();
    for k in 0..n {
        let from_left = if k > 0 { src[k - 1] >> 63 } else { 0 };
        let from_right = if k + 1 < n { src[k + 1] << 63 } else { 0 };
        dst[k] = src[k] | (src[k] << 1 | from_left) | (src[k] >> 1 | from_right);
    }
    dst[n - 1] &= tail;
}

/// Euler numbers and foreground areas along a thickening run. Index 0 is
/// the untouched picture, index k the picture after k dilations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EulerTrace {
    pub chis: Vec<i64>,
    pub areas: Vec<u64>,
}

impl EulerTrace {
    /// Number of dilation steps recorded.
    pub fn steps(&self) -> usize {
        self.chis.len() - 1
    }
}

/// Runs the schedule and records the trace under default connectivity.
pub fn thicken_trace(image: &BinaryImage, schedule: &ThickeningSchedule) -> EulerTrace {
    thicken_trace_with(image, schedule, Connectivity::EightFour, |_, _| {})
}

/// Like [`thicken_trace`], with explicit connectivity and an observer
/// that receives each intermediate picture (step index starts at 1).
pub fn thicken_trace_with(
    image: &BinaryImage,
    schedule: &ThickeningSchedule,
    connectivity: Connectivity,
    mut observer: impl FnMut(usize, &BinaryImage),
) -> EulerTrace {
    let mut chis = Vec::with_capacity(schedule.total_steps() + 1);
    let mut areas = Vec::with_capacity(schedule.total_steps() + 1);
    let mut cur = image.clone();
    chis.push(euler_number_with(&cur, connectivity));
    areas.push(cur.foreground_count());
    for (i, &element) in schedule.elements().iter().enumerate() {
        cur = dilate(&cur, element);
        chis.push(euler_number_with(&cur, connectivity));
        areas.push(cur.foreground_count());
        observer(i + 1, &cur);
    }
    EulerTrace { chis, areas }
}
