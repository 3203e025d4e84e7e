//! Planar projections of contact fronts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_text};
use crate::reach::{ContactFront, ReachTube};

pub type Point2 = [f64; 2];

/// A coordinate plane spanned by two state axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plane {
    pub a: usize,
    pub b: usize,
}

impl Plane {
    pub fn new(a: usize, b: usize) -> Self {
        Self { a, b }
    }

    pub fn project(&self, x: &nalgebra::DVector<f64>) -> Point2 {
        [x[self.a], x[self.b]]
    }
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain convex hull, counter-clockwise, starting at the
/// lexicographically smallest point, collinear points removed. Degenerate
/// inputs give a single point or a segment.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Convex hull of the contact points projected onto `plane`.
pub fn inner_hull_2d(front: &ContactFront, plane: Plane) -> Vec<Point2> {
    let pts: Vec<Point2> = front.contacts.iter().map(|x| plane.project(x)).collect();
    convex_hull(&pts)
}

/// Shoelace area; zero for points and segments.
pub fn polygon_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let twice: f64 = (0..poly.len())
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// Axis-aligned bounds `[min_a, max_a, min_b, max_b]`.
pub fn extents(poly: &[Point2]) -> [f64; 4] {
    poly.iter().fold(
        [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
        |e, p| [e[0].min(p[0]), e[1].max(p[0]), e[2].min(p[1]), e[3].max(p[1])],
    )
}

/// True when `p` lies in the convex polygon `poly` (CCW), up to `tol`.
pub fn polygon_contains(poly: &[Point2], p: Point2, tol: f64) -> bool {
    match poly.len() {
        0 => false,
        1 => (poly[0][0] - p[0]).hypot(poly[0][1] - p[1]) <= tol,
        2 => {
            let (a, b) = (poly[0], poly[1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len);
            let t = t.clamp(0.0, 1.0);
            let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            (q[0] - p[0]).hypot(q[1] - p[1]) <= tol
        }
        n => (0..n).all(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            cross(a, b, p) >= -tol * len
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeProjection {
    pub plane: Plane,
    pub steps: Vec<Vec<Point2>>,
    /// Hull of the union of all per-step hulls.
    pub footprint: Vec<Point2>,
}

pub fn tube_projection(tube: &ReachTube, plane: Plane) -> Result<TubeProjection> {
    if tube.fronts.is_empty() {
        return Err(Error::Config("cannot project an empty tube".into()));
    }
    let steps: Vec<Vec<Point2>> = tube.fronts.iter().map(|f| inner_hull_2d(f, plane)).collect();
    let all: Vec<Point2> = steps.iter().flatten().copied().collect();
    Ok(TubeProjection {
        plane,
        footprint: convex_hull(&all),
        steps,
    })
}

pub fn write_polygon_csv(path: &Path, poly: &[Point2]) -> Result<()> {
    let mut text = String::from("a,b\n");
    for p in poly {
        text.push_str(&format!("{},{}\n", fmt_f64(p[0]), fmt_f64(p[1])));
    }
    write_text(path, &text)
}

pub fn read_polygon_csv(path: &Path) -> Result<Vec<Point2>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Misaligned(format!("{}: malformed row", path.display())))
        };
        out.push([parse(0)?, parse(1)?]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};
    use nalgebra::DVector;
    use rand::Rng;

    fn front_from(points: &[Point2]) -> ContactFront {
        ContactFront {
            k: 0,
            normals: vec![],
            offsets: vec![],
            contacts: points.iter().map(|p| DVector::from_vec(vec![p[0], 7.0, p[1]])).collect(),
            inputs: vec![],
        }
    }

    #[test]
    fn square_is_ccw() {
        let f = front_from(&[[1.0, 1.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0]]);
        let hull = inner_hull_2d(&f, Plane::new(0, 2));
        assert_eq!(hull, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(polygon_area(&hull), 1.0);
    }

    #[test]
    fn identical_points_give_one_vertex() {
        let f = front_from(&[[0.3, 0.4]; 5]);
        assert_eq!(inner_hull_2d(&f, Plane::new(0, 2)), vec![[0.3, 0.4]]);
        assert_eq!(convex_hull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), vec![[0.0, 0.0], [2.0, 2.0]]);
    }

    /// A point is a hull vertex iff some pair-defined line through it has
    /// every other point weakly on one side and it is not between two
    /// collinear extreme points.
    fn brute_force_vertices(pts: &[Point2]) -> Vec<Point2> {
        let mut out = Vec::new();
        for (i, &p) in pts.iter().enumerate() {
            let mut is_vertex = false;
            for (j, &q) in pts.iter().enumerate() {
                if i == j || p == q {
                    continue;
                }
                // Edge p -> q with every point on the left, and p is not
                // strictly inside the segment of collinear points.
                let all_left = pts.iter().all(|&r| cross(p, q, r) >= 0.0);
                let p_is_end = pts
                    .iter()
                    .all(|&r| cross(p, q, r) != 0.0 || (r[0] - p[0]) * (q[0] - p[0]) + (r[1] - p[1]) * (q[1] - p[1]) >= 0.0);
                if all_left && p_is_end {
                    is_vertex = true;
                    break;
                }
            }
            if is_vertex && !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_hull() {
        for seed in 0..20 {
            let mut rng = substream(seed, Domain::Test, 0);
            let pts: Vec<Point2> = (0..100).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let hull = convex_hull(&pts);
            let mut oracle = brute_force_vertices(&pts);
            let mut got = hull.clone();
            let key = |p: &Point2, q: &Point2| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]));
            oracle.sort_by(key);
            got.sort_by(key);
            assert_eq!(got, oracle);
            for i in 0..hull.len() {
                let (a, b, c) = (hull[i], hull[(i + 1) % hull.len()], hull[(i + 2) % hull.len()]);
                assert!(cross(a, b, c) > 0.0);
            }
        }
    }

    #[test]
    fn footprint_of_translated_squares() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let moved: Vec<Point2> = sq.iter().map(|p| [p[0] + 3.0, p[1] + 1.0]).collect();
        let tube = ReachTube {
            fronts: vec![front_from(&sq), front_from(&moved)],
        };
        let proj = tube_projection(&tube, Plane::new(0, 2)).unwrap();
        let all: Vec<Point2> = sq.iter().chain(&moved).copied().collect();
        assert_eq!(proj.footprint, convex_hull(&all));
        let single = ReachTube {
            fronts: vec![front_from(&sq)],
        };
        let p1 = tube_projection(&single, Plane::new(0, 2)).unwrap();
        assert_eq!(p1.footprint, p1.steps[0]);
        assert!(tube_projection(&ReachTube { fronts: vec![] }, Plane::new(0, 1)).is_err());
    }

    #[test]
    fn containment_and_extents() {
        let sq = convex_hull(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]);
        assert!(polygon_contains(&sq, [1.0, 0.5], 0.0));
        assert!(polygon_contains(&sq, [2.0, 1.0], 0.0));
        assert!(!polygon_contains(&sq, [2.1, 0.5], 0.05));
        assert_eq!(extents(&sq), [0.0, 2.0, 0.0, 1.0]);
        assert!(polygon_contains(&[[0.0, 0.0], [1.0, 1.0]], [0.5, 0.5], 1e-12));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hull_x-y_0.csv");
        let poly = vec![[0.1, 0.2], [1.0 / 3.0, -2.5e-7]];
        write_polygon_csv(&path, &poly).unwrap();
        assert_eq!(read_polygon_csv(&path).unwrap(), poly);
    }
}
