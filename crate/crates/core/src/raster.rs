//! Packed binary rasters and disk rasterization.
//!
//! Pixels are stored row-major, 64 per word, least significant bit first.
//! Every operation in this crate relies on one invariant: bits at or above
//! `width` in the last word of a row are always zero. Windowed scans can
//! then treat whole words at a time without masking.

use crate::genesis::Configuration;

/// A width x height black-and-white picture. Foreground pixels are `true`.
///
/// Pixel (x, y) represents the unit cell whose center is at
/// (x + 0.5, y + 0.5) in continuous coordinates, scaled by `pixel_size`.
#[derive(Clone, PartialEq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    words_per_row: usize,
    bits: Vec<u64>,
    pixel_size: f64,
}

impl std::fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("pixel_size", &self.pixel_size)
            .field("foreground", &self.foreground_count())
            .finish()
    }
}

impl BinaryImage {
    /// All-background picture.
    pub fn new(width: u32, height: u32) -> Self {
        let words_per_row = (width as usize).div_ceil(64);
        BinaryImage {
            width,
            height,
            words_per_row,
            bits: vec![0; words_per_row * height as usize],
            pixel_size: 1.0,
        }
    }

    /// Builds a picture by evaluating `f` at every (x, y).
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut img = BinaryImage::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    img.set(x, y, true);
                }
            }
        }
        img
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Edge length of one pixel in world units.
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    /// Panics unless `a` is finite and positive.
    pub fn set_pixel_size(&mut self, a: f64) {
        assert!(a.is_finite() && a > 0.0, "pixel size must be positive");
        self.pixel_size = a;
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let word = self.words_per_row * y as usize + (x / 64) as usize;
        self.bits[word] >> (x % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let word = self.words_per_row * y as usize + (x / 64) as usize;
        if on {
            self.bits[word] |= 1 << (x % 64);
        } else {
            self.bits[word] &= !(1 << (x % 64));
        }
    }

    pub fn foreground_count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Foreground pixels over total pixels; 0 for an empty raster.
    pub fn volume_fraction(&self) -> f64 {
        let total = self.width as u64 * self.height as u64;
        if total == 0 {
            return 0.0;
        }
        self.foreground_count() as f64 / total as f64
    }

    /// Quarter turn clockwise. The result is height x width.
    pub fn rotate90(&self) -> BinaryImage {
        let mut out = BinaryImage::from_fn(self.height, self.width, |x, y| {
            self.get(y, self.height - 1 - x)
        });
        out.pixel_size = self.pixel_size;
        out
    }

    /// Left-right flip.
    pub fn mirror_horizontal(&self) -> BinaryImage {
        let mut out =
            BinaryImage::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y));
        out.pixel_size = self.pixel_size;
        out
    }

    /// Top-bottom flip.
    pub fn mirror_vertical(&self) -> BinaryImage {
        let mut out = BinaryImage::from_fn(self.width, self.height, |x, y| {
            self.get(x, self.height - 1 - y)
        });
        out.pixel_size = self.pixel_size;
        out
    }

    pub(crate) fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub(crate) fn row(&self, y: u32) -> &[u64] {
        let start = self.words_per_row * y as usize;
        &self.bits[start..start + self.words_per_row]
    }

    pub(crate) fn row_mut(&mut self, y: u32) -> &mut [u64] {
        let start = self.words_per_row * y as usize;
        &mut self.bits[start..start + self.words_per_row]
    }

    /// Sets pixels x0..=x1 of row y, returning how many were newly set.
    pub(crate) fn set_row_run(&mut self, y: u32, x0: u32, x1: u32) -> u64 {
        debug_assert!(x0 <= x1 && x1 < self.width && y < self.height);
        let row = self.words_per_row * y as usize;
        let (w0, w1) = ((x0 / 64) as usize, (x1 / 64) as usize);
        let mut newly = 0;
        for w in w0..=w1 {
            let lo = if w == w0 { x0 % 64 } else { 0 };
            let hi = if w == w1 { x1 % 64 } else { 63 };
            let mask = (u64::MAX << lo) & (u64::MAX >> (63 - hi));
            let word = &mut self.bits[row + w];
            newly += (mask & !*word).count_ones() as u64;
            *word |= mask;
        }
        newly
    }
}

pub(crate) fn tail_mask(width: u32) -> u64 {
    match width % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Renders every disk of a configuration at radius `rho` into a square
/// raster of side `box_size`. A pixel is foreground when its center lies
/// within `rho` of some disk center.
pub fn rasterize(config: &Configuration) -> BinaryImage {
    let side = config.box_size();
    let mut img = BinaryImage::new(side, side);
    for c in config.centers() {
        stamp_disk(&mut img, c.x, c.y, config.rho());
    }
    img
}

/// Fills one disk row by row, returning the number of pixels that flipped
/// from background to foreground.
pub(crate) fn stamp_disk(img: &mut BinaryImage, cx: f64, cy: f64, rho: f64) -> u64 {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return 0;
    }
    let j0 = (cy - rho - 0.5).ceil().max(0.0) as u32;
    let j1 = ((cy + rho - 0.5).floor()).min(h as f64 - 1.0);
    if j1 < 0.0 {
        return 0;
    }
    let mut newly = 0;
    for j in j0..=j1 as u32 {
        let dy = (j as f64 + 0.5) - cy;
        let rem = rho * rho - dy * dy;
        if rem < 0.0 {
            continue;
        }
        let half = rem.sqrt();
        let i0 = (cx - half - 0.5).ceil().max(0.0);
        let i1 = (cx + half - 0.5).floor().min(w as f64 - 1.0);
        if i1 < i0 || i1 < 0.0 {
            continue;
        }
        newly += img.set_row_run(j, i0 as u32, i1 as u32);
    }
    newly
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_roundtrip_across_word_boundary() {
        let mut img = BinaryImage::new(130, 3);
        for &x in &[0, 63, 64, 127, 128, 129] {
            img.set(x, 1, true);
        }
        for &x in &[0, 63, 64, 127, 128, 129] {
            assert!(img.get(x, 1));
        }
        assert!(!img.get(1, 1));
        assert_eq!(img.foreground_count(), 6);
        img.set(64, 1, false);
        assert!(!img.get(64, 1));
        assert_eq!(img.foreground_count(), 5);
    }

    #[test]
    fn slack_bits_stay_zero() {
        let mut img = BinaryImage::new(70, 2);
        img.set_row_run(0, 0, 69);
        img.set(69, 1, true);
        let tail = tail_mask(70);
        for y in 0..2 {
            let row = img.row(y);
            assert_eq!(row[1] & !tail, 0);
        }
        assert_eq!(img.foreground_count(), 71);
    }

    #[test]
    fn run_counts_only_new_pixels() {
        let mut img = BinaryImage::new(200, 1);
        assert_eq!(img.set_row_run(0, 10, 150), 141);
        assert_eq!(img.set_row_run(0, 100, 180), 30);
        assert_eq!(img.foreground_count(), 171);
    }

    #[test]
    fn disk_matches_pointwise_membership() {
        let mut img = BinaryImage::new(40, 40);
        let (cx, cy, rho) = (17.25, 21.5, 6.5);
        let newly = stamp_disk(&mut img, cx, cy, rho);
        let mut count = 0;
        for y in 0..40 {
            for x in 0..40 {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                let inside = dx * dx + dy * dy <= rho * rho;
                assert_eq!(img.get(x, y), inside, "pixel ({x}, {y})");
                count += inside as u64;
            }
        }
        assert_eq!(newly, count);
    }

    #[test]
    fn disk_clips_at_borders() {
        let mut img = BinaryImage::new(20, 20);
        stamp_disk(&mut img, 0.0, 0.0, 5.0);
        stamp_disk(&mut img, 25.0, 19.0, 7.0);
        for y in 0..20 {
            for x in 0..20 {
                let inside = |cx: f64, cy: f64, r: f64| {
                    let dx = x as f64 + 0.5 - cx;
                    let dy = y as f64 + 0.5 - cy;
                    dx * dx + dy * dy <= r * r
                };
                let want = inside(0.0, 0.0, 5.0) || inside(25.0, 19.0, 7.0);
                assert_eq!(img.get(x, y), want);
            }
        }
    }

    #[test]
    fn disk_entirely_outside_is_noop() {
        let mut img = BinaryImage::new(10, 10);
        assert_eq!(stamp_disk(&mut img, -20.0, 5.0, 3.0), 0);
        assert_eq!(stamp_disk(&mut img, 5.0, 40.0, 3.0), 0);
        assert_eq!(img.foreground_count(), 0);
    }

    #[test]
    fn transforms_preserve_count_and_compose() {
        let img = BinaryImage::from_fn(37, 22, |x, y| (x * 7 + y * 13) % 5 == 0);
        let n = img.foreground_count();
        let r = img.rotate90();
        assert_eq!((r.width(), r.height()), (22, 37));
        assert_eq!(r.foreground_count(), n);
        assert_eq!(r.get(0, 0), img.get(0, 21));
        let full_turn = r.rotate90().rotate90().rotate90();
        assert_eq!(full_turn, img);
        assert_eq!(img.mirror_horizontal().mirror_horizontal(), img);
        assert_eq!(img.mirror_vertical().mirror_vertical(), img);
    }
}
