//! Surface partitioning, candidate grids and spacing constraints.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point on the surface plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }

    /// Smallest distance between any point of `self` and any point of `other`.
    pub fn gap(&self, other: &Rect) -> f64 {
        let dx = (other.x_min - self.x_max).max(self.x_min - other.x_max).max(0.0);
        let dy = (other.y_min - self.y_max).max(self.y_min - other.y_max).max(0.0);
        dx.hypot(dy)
    }
}

/// The `A x A` aperture split into `N` subareas, one per fluid element.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceLayout {
    pub side: f64,
    pub spacing: f64,
    pub subareas: Vec<Rect>,
}

impl SurfaceLayout {
    pub fn len(&self) -> usize {
        self.subareas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subareas.is_empty()
    }

    pub fn subarea(&self, n: usize) -> Result<&Rect> {
        self.subareas.get(n).ok_or(Error::IndexOutOfRange {
            index: n,
            len: self.subareas.len(),
        })
    }
}

/// Element positions `t_1..t_N`, one per subarea.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ElementPositions(pub Vec<Point>);

impl ElementPositions {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    /// Copy with element `n` moved to `p`.
    pub fn with_element(&self, n: usize, p: Point) -> Self {
        let mut out = self.clone();
        out.0[n] = p;
        out
    }
}

fn perfect_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Tiles the square into a `sqrt(n) x sqrt(n)` lattice.
///
/// With more than one element every tile is inset by `d/2` on all four
/// sides, which makes the subareas congruent, keeps their centers on the
/// tile pitch and guarantees a gap of at least `d` between tiles.
pub fn partition_surface(a: f64, n: usize, d: f64) -> Result<SurfaceLayout> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Config(format!("surface side must be positive, got {a}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::Config(format!("spacing must be non-negative, got {d}")));
    }
    let side = perfect_sqrt(n)
        .filter(|&s| s > 0)
        .ok_or_else(|| Error::Config(format!("element count {n} is not a perfect square")))?;
    let pitch = a / side as f64;
    if n > 1 && pitch <= d {
        return Err(Error::InfeasibleLayout(format!(
            "tile pitch {pitch} m does not exceed spacing {d} m"
        )));
    }
    let inset = if n > 1 { 0.5 * d } else { 0.0 };
    let mut subareas = Vec::with_capacity(n);
    for iy in 0..side {
        for ix in 0..side {
            let x0 = ix as f64 * pitch;
            let y0 = iy as f64 * pitch;
            subareas.push(Rect {
                x_min: x0 + inset,
                x_max: x0 + pitch - inset,
                y_min: y0 + inset,
                y_max: y0 + pitch - inset,
            });
        }
    }
    Ok(SurfaceLayout {
        side: a,
        spacing: d,
        subareas,
    })
}

/// `gx * gy` cell-centered lattice points inside subarea `n`, row-major in y.
pub fn candidate_grid(layout: &SurfaceLayout, n: usize, gx: usize, gy: usize) -> Result<Vec<Point>> {
    if gx == 0 || gy == 0 {
        return Err(Error::Config(format!("grid resolution must be >= 1, got {gx}x{gy}")));
    }
    let r = layout.subarea(n)?;
    let mut pts = Vec::with_capacity(gx * gy);
    for j in 0..gy {
        let y = r.y_min + (j as f64 + 0.5) * r.height() / gy as f64;
        for i in 0..gx {
            let x = r.x_min + (i as f64 + 0.5) * r.width() / gx as f64;
            pts.push(Point::new(x, y));
        }
    }
    Ok(pts)
}

const SPACING_EPS: f64 = 1e-12;

/// True iff every pair of elements is at least `d` apart (inclusive).
pub fn spacing_ok(t: &ElementPositions, d: f64) -> bool {
    violating_pairs(t.points(), d) == 0
}

/// Number of pairs `n < n'` closer than `d`.
pub fn violating_pairs(points: &[Point], d: f64) -> usize {
    let mut count = 0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.distance(*b) < d - SPACING_EPS {
                count += 1;
            }
        }
    }
    count
}

pub fn project_to_subarea(p: Point, layout: &SurfaceLayout, n: usize) -> Result<Point> {
    Ok(layout.subarea(n)?.clamp(p))
}

/// Conventional RIS: every element fixed at its subarea center.
pub fn ris_baseline_positions(layout: &SurfaceLayout) -> ElementPositions {
    ElementPositions(layout.subareas.iter().map(Rect::center).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const D: f64 = 0.0625;

    #[test]
    fn four_tiles_inset() {
        let l = partition_surface(4.0, 4, D).unwrap();
        assert_eq!(l.len(), 4);
        for r in &l.subareas {
            assert!((r.width() - 1.9375).abs() < 1e-12);
            assert!((r.height() - 1.9375).abs() < 1e-12);
        }
        for (i, a) in l.subareas.iter().enumerate() {
            for b in &l.subareas[i + 1..] {
                assert!(a.gap(b) >= D - 1e-12);
            }
        }
    }

    #[test]
    fn single_tile_covers_square() {
        let l = partition_surface(4.0, 1, D).unwrap();
        assert_eq!(
            l.subareas,
            vec![Rect { x_min: 0.0, x_max: 4.0, y_min: 0.0, y_max: 4.0 }]
        );
    }

    #[test]
    fn sixteen_tiles_corner_distances() {
        let l = partition_surface(4.0, 16, D).unwrap();
        let corners = |r: &Rect| {
            [
                Point::new(r.x_min, r.y_min),
                Point::new(r.x_max, r.y_min),
                Point::new(r.x_min, r.y_max),
                Point::new(r.x_max, r.y_max),
            ]
        };
        for (i, a) in l.subareas.iter().enumerate() {
            for b in &l.subareas[i + 1..] {
                for p in corners(a) {
                    for q in corners(b) {
                        assert!(p.distance(q) >= D - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(partition_surface(4.0, 5, D), Err(Error::Config(_))));
        assert!(matches!(partition_surface(4.0, 0, D), Err(Error::Config(_))));
        assert!(matches!(
            partition_surface(0.25, 16, D),
            Err(Error::InfeasibleLayout(_))
        ));
    }

    #[test]
    fn grids() {
        let l = partition_surface(4.0, 4, D).unwrap();
        let one = candidate_grid(&l, 2, 1, 1).unwrap();
        assert_eq!(one, vec![l.subareas[2].center()]);

        let sq = SurfaceLayout {
            side: 2.0,
            spacing: 0.0,
            subareas: vec![Rect { x_min: 0.0, x_max: 2.0, y_min: 0.0, y_max: 2.0 }],
        };
        let g = candidate_grid(&sq, 0, 3, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.iter().any(|p| (p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12));
        assert!(g.iter().all(|p| sq.subareas[0].contains(*p)));

        assert!(matches!(
            candidate_grid(&l, 4, 2, 2),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
        assert!(candidate_grid(&l, 0, 0, 2).is_err());
    }

    #[test]
    fn spacing_boundary() {
        let close = ElementPositions(vec![Point::new(0.0, 0.0), Point::new(0.05, 0.0)]);
        assert!(!spacing_ok(&close, D));
        let edge = ElementPositions(vec![Point::new(0.0, 0.0), Point::new(0.0625, 0.0)]);
        assert!(spacing_ok(&edge, D));
        assert_eq!(violating_pairs(close.points(), D), 1);
    }

    #[test]
    fn projection() {
        let sq = SurfaceLayout {
            side: 2.0,
            spacing: 0.0,
            subareas: vec![
                Rect { x_min: 0.0, x_max: 2.0, y_min: 0.0, y_max: 2.0 },
                Rect { x_min: 0.5, x_max: 2.0, y_min: 0.0, y_max: 2.0 },
            ],
        };
        assert_eq!(project_to_subarea(Point::new(5.0, 5.0), &sq, 0).unwrap(), Point::new(2.0, 2.0));
        assert_eq!(project_to_subarea(Point::new(1.0, 1.0), &sq, 0).unwrap(), Point::new(1.0, 1.0));
        assert_eq!(project_to_subarea(Point::new(-1.0, 1.5), &sq, 1).unwrap(), Point::new(0.5, 1.5));
    }

    #[test]
    fn baseline_centers() {
        let l = partition_surface(4.0, 4, D).unwrap();
        let c = ris_baseline_positions(&l);
        let expected = [(1.0, 1.0), (3.0, 1.0), (1.0, 3.0), (3.0, 3.0)];
        for (p, (x, y)) in c.points().iter().zip(expected) {
            assert!((p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12);
        }
        assert!(spacing_ok(&c, D));
        let single = ris_baseline_positions(&partition_surface(4.0, 1, D).unwrap());
        assert_eq!(single.0, vec![Point::new(2.0, 2.0)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn any_grid_combination_respects_spacing(
            side in 1usize..=4,
            gx in 1usize..=10,
            gy in 1usize..=10,
            a in 1.0f64..8.0,
        ) {
            let n = side * side;
            let l = partition_surface(a, n, D).unwrap();
            let grids: Vec<_> = (0..n).map(|i| candidate_grid(&l, i, gx, gy).unwrap()).collect();
            for i in 0..n {
                for j in i + 1..n {
                    for p in &grids[i] {
                        prop_assert!(l.subareas[i].contains(*p));
                        for q in &grids[j] {
                            prop_assert!(p.distance(*q) >= D - 1e-12);
                        }
                    }
                }
            }
        }

        #[test]
        fn projection_idempotent_and_non_expansive(
            x in -10.0f64..10.0, y in -10.0f64..10.0,
            u in -10.0f64..10.0, v in -10.0f64..10.0,
        ) {
            let l = partition_surface(4.0, 4, D).unwrap();
            let p = project_to_subarea(Point::new(x, y), &l, 1).unwrap();
            let q = project_to_subarea(Point::new(u, v), &l, 1).unwrap();
            prop_assert_eq!(project_to_subarea(p, &l, 1).unwrap(), p);
            prop_assert!((p.x - q.x).abs() <= (x - u).abs() + 1e-15);
            prop_assert!((p.y - q.y).abs() <= (y - v).abs() + 1e-15);
        }
    }
}
