//! Euler numbers of binary pictures.
//!
//! Two independent routes to the same quantity: a linear scan that counts
//! 2x2 window patterns word-parallel, and a labeling pass that counts
//! foreground components minus holes. The scan is the fast path; the
//! labeling pass exists so the two can check each other.

use crate::raster::BinaryImage;

/// Which adjacency applies to foreground pixels. The background always
/// gets the dual adjacency, otherwise the Euler number is inconsistent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Connectivity {
    /// 8-connected foreground, 4-connected background.
    #[default]
    EightFour,
    /// 4-connected foreground, 8-connected background.
    FourEight,
}

impl Connectivity {
    pub fn label(self) -> &'static str {
        match self {
            Connectivity::EightFour => "8-4",
            Connectivity::FourEight => "4-8",
        }
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Euler number under the default 8-connected foreground.
pub fn euler_number(image: &BinaryImage) -> i64 {
    euler_number_with(image, Connectivity::EightFour)
}

/// Counts 2x2 windows with exactly one foreground pixel (q1), exactly
/// three (q3), and the two diagonal patterns (qd) over the picture padded
/// by one background ring, then combines them. Runs word-parallel: each
/// row is shifted left once so window columns line up inside the words,
/// and the zeroed slack bits make out-of-range windows count nothing.
pub fn euler_number_with(image: &BinaryImage, connectivity: Connectivity) -> i64 {
    let ws = image.words_per_row() + 1;
    let mut above = vec![0u64; ws];
    let mut below = vec![0u64; ws];
    let (mut q1, mut q3, mut qd) = (0i64, 0i64, 0i64);
    for y in 0..=image.height() {
        if y < image.height() {
            shift_left(image.row(y), &mut below);
        } else {
            below.fill(0);
        }
        for k in 0..ws {
            let carry = |row: &[u64]| if k + 1 < ws { row[k + 1] << 63 } else { 0 };
            let a0 = above[k];
            let a1 = above[k] >> 1 | carry(&above);
            let b0 = below[k];
            let b1 = below[k] >> 1 | carry(&below);
            let one = (a0 & !a1 & !b0 & !b1)
                | (!a0 & a1 & !b0 & !b1)
                | (!a0 & !a1 & b0 & !b1)
                | (!a0 & !a1 & !b0 & b1);
            let three = (!a0 & a1 & b0 & b1)
                | (a0 & !a1 & b0 & b1)
                | (a0 & a1 & !b0 & b1)
                | (a0 & a1 & b0 & !b1);
            let diag = (a0 & !a1 & !b0 & b1) | (!a0 & a1 & b0 & !b1);
            q1 += one.count_ones() as i64;
            q3 += three.count_ones() as i64;
            qd += diag.count_ones() as i64;
        }
        std::mem::swap(&mut above, &mut below);
    }
    let sum = match connectivity {
        Connectivity::EightFour => q1 - q3 - 2 * qd,
        Connectivity::FourEight => q1 - q3 + 2 * qd,
    };
    debug_assert_eq!(sum % 4, 0);
    sum / 4
}

/// Writes `src` shifted up by one bit into `dst`, which holds one extra
/// word to receive the carry out of the last one.
fn shift_left(src: &[u64], dst: &mut [u64]) {
    debug_assert_eq!(dst.len(), src.len() + 1);
    let mut carry = 0;
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s << 1 | carry;
        carry = s >> 63;
    }
    dst[src.len()] = carry;
}

/// Euler number as foreground components minus holes, via labeling.
pub fn euler_by_components(image: &BinaryImage) -> i64 {
    euler_by_components_with(image, Connectivity::EightFour)
}

pub fn euler_by_components_with(image: &BinaryImage, connectivity: Connectivity) -> i64 {
    foreground_components(image, connectivity) as i64 - hole_count(image, connectivity) as i64
}

/// Number of connected foreground components.
pub fn foreground_components(image: &BinaryImage, connectivity: Connectivity) -> usize {
    let eight = matches!(connectivity, Connectivity::EightFour);
    component_stats(image, true, eight).0
}

/// Number of background components fully enclosed by foreground, i.e. not
/// reaching the picture border.
pub fn hole_count(image: &BinaryImage, connectivity: Connectivity) -> usize {
    let eight = matches!(connectivity, Connectivity::FourEight);
    let (total, touching_border) = component_stats(image, false, eight);
    total - touching_border
}

struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let up = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = up;
            i = up;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

/// (component count, components touching the border) among pixels whose
/// value equals `value`, under 8- or 4-adjacency.
fn component_stats(image: &BinaryImage, value: bool, eight: bool) -> (usize, usize) {
    let (w, h) = (image.width(), image.height());
    if w == 0 || h == 0 {
        return (0, 0);
    }
    let idx = |x: u32, y: u32| y * w + x;
    let mut sets = DisjointSets::new((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            if image.get(x, y) != value {
                continue;
            }
            let mut link = |nx: u32, ny: u32| {
                if image.get(nx, ny) == value {
                    sets.union(idx(x, y), idx(nx, ny));
                }
            };
            if x > 0 {
                link(x - 1, y);
            }
            if y > 0 {
                link(x, y - 1);
                if eight {
                    if x > 0 {
                        link(x - 1, y - 1);
                    }
                    if x + 1 < w {
                        link(x + 1, y - 1);
                    }
                }
            }
        }
    }
    let mut roots = std::collections::HashSet::new();
    let mut border_roots = std::collections::HashSet::new();
    for y in 0..h {
        for x in 0..w {
            if image.get(x, y) != value {
                continue;
            }
            let root = sets.find(idx(x, y));
            roots.insert(root);
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                border_roots.insert(root);
            }
        }
    }
    (roots.len(), border_roots.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_from(rows: &[&str]) -> BinaryImage {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        BinaryImage::from_fn(w, h, |x, y| {
            rows[y as usize].as_bytes()[x as usize] == b'#'
        })
    }

    fn both(img: &BinaryImage, conn: Connectivity) -> i64 {
        let fast = euler_number_with(img, conn);
        assert_eq!(fast, euler_by_components_with(img, conn));
        fast
    }

    #[test]
    fn empty_and_full() {
        let empty = BinaryImage::new(9, 5);
        assert_eq!(both(&empty, Connectivity::EightFour), 0);
        assert_eq!(both(&empty, Connectivity::FourEight), 0);
        let full = BinaryImage::from_fn(9, 5, |_, _| true);
        assert_eq!(both(&full, Connectivity::EightFour), 1);
        assert_eq!(both(&full, Connectivity::FourEight), 1);
    }

    #[test]
    fn single_pixel() {
        let img = image_from(&["...", ".#.", "..."]);
        assert_eq!(both(&img, Connectivity::EightFour), 1);
        assert_eq!(both(&img, Connectivity::FourEight), 1);
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let img = image_from(&["#.", ".#"]);
        assert_eq!(both(&img, Connectivity::EightFour), 1);
        assert_eq!(both(&img, Connectivity::FourEight), 2);
    }

    #[test]
    fn ring_has_zero_euler_number() {
        let img = image_from(&["###", "#.#", "###"]);
        assert_eq!(both(&img, Connectivity::EightFour), 0);
        assert_eq!(both(&img, Connectivity::FourEight), 0);
        assert_eq!(hole_count(&img, Connectivity::EightFour), 1);
        assert_eq!(foreground_components(&img, Connectivity::EightFour), 1);
    }

    #[test]
    fn separate_blobs_add_up() {
        let img = image_from(&[
            "##....#",
            "##.....",
            ".....##",
            "#......",
        ]);
        assert_eq!(foreground_components(&img, Connectivity::EightFour), 4);
        assert_eq!(both(&img, Connectivity::EightFour), 4);
    }

    #[test]
    fn border_touching_background_is_not_a_hole() {
        let img = image_from(&["##", "#."]);
        assert_eq!(hole_count(&img, Connectivity::EightFour), 0);
        assert_eq!(both(&img, Connectivity::EightFour), 1);
    }

    #[test]
    fn methods_agree_across_word_boundaries() {
        for w in [63, 64, 65, 128, 130] {
            let img = BinaryImage::from_fn(w, 40, |x, y| {
                (x.wrapping_mul(2654435761) ^ y.wrapping_mul(40503)) % 7 < 3
            });
            assert_eq!(
                euler_number_with(&img, Connectivity::EightFour),
                euler_by_components_with(&img, Connectivity::EightFour),
                "width {w}"
            );
            assert_eq!(
                euler_number_with(&img, Connectivity::FourEight),
                euler_by_components_with(&img, Connectivity::FourEight),
                "width {w}"
            );
        }
    }
}
