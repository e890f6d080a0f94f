//! Uniform bucket grid over points, shared by the generator (contact
//! queries against the grown cluster) and the point statistics (nearest
//! neighbor searches).

use crate::genesis::Point;

pub(crate) struct PointGrid {
    origin: f64,
    cell: f64,
    cols: i64,
    buckets: Vec<Vec<(u32, Point)>>,
}

impl PointGrid {
    /// Grid covering the square [origin, origin + extent)^2 with buckets
    /// of roughly `cell` edge length. Points outside the square are
    /// clamped into the border buckets, so inserts never fail.
    pub fn new(origin: f64, extent: f64, cell: f64) -> Self {
        assert!(extent > 0.0 && cell > 0.0);
        let cols = (extent / cell).ceil().max(1.0) as i64;
        PointGrid {
            origin,
            cell: extent / cols as f64,
            cols,
            buckets: vec![Vec::new(); (cols * cols) as usize],
        }
    }

    fn coord(&self, v: f64) -> i64 {
        (((v - self.origin) / self.cell).floor() as i64).clamp(0, self.cols - 1)
    }

    fn bucket(&self, cx: i64, cy: i64) -> &[(u32, Point)] {
        &self.buckets[(cy * self.cols + cx) as usize]
    }

    pub fn insert(&mut self, id: u32, p: Point) {
        let (cx, cy) = (self.coord(p.x), self.coord(p.y));
        self.buckets[(cy * self.cols + cx) as usize].push((id, p));
    }

    /// True when some stored point lies within `radius` of `p` (closed).
    pub fn any_within(&self, p: Point, radius: f64) -> bool {
        let r2 = radius * radius;
        let (x0, x1) = (self.coord(p.x - radius), self.coord(p.x + radius));
        let (y0, y1) = (self.coord(p.y - radius), self.coord(p.y + radius));
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if self
                    .bucket(cx, cy)
                    .iter()
                    .any(|&(_, q)| p.distance2(q) <= r2)
                {
                    return true;
                }
            }
        }
        false
    }

    /// Distance from `p` to the closest stored point whose id differs
    /// from `id`. Scans bucket rings outward and stops once no farther
    /// ring can beat the best hit. Infinity when no other point exists.
    pub fn nearest_excluding(&self, id: u32, p: Point) -> f64 {
        let (hx, hy) = (self.coord(p.x), self.coord(p.y));
        // Tracks the squared distance; a bucket at ring distance r holds
        // nothing closer than (r - 1) cells.
        let mut best = f64::INFINITY;
        let max_ring = self.cols;
        for ring in 0..=max_ring {
            let reach = (ring as f64 - 1.0) * self.cell;
            if ring >= 2 && best <= reach * reach {
                break;
            }
            let (x0, x1) = (hx - ring, hx + ring);
            let (y0, y1) = (hy - ring, hy + ring);
            for cy in y0.max(0)..=y1.min(self.cols - 1) {
                for cx in x0.max(0)..=x1.min(self.cols - 1) {
                    let on_ring = cx == x0 || cx == x1 || cy == y0 || cy == y1;
                    if !on_ring {
                        continue;
                    }
                    for &(qid, q) in self.bucket(cx, cy) {
                        if qid != id {
                            best = best.min(p.distance2(q));
                        }
                    }
                }
            }
        }
        best.sqrt()
    }
}
