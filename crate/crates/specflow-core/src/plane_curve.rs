//! Closed plane curves represented as simple polygons.
//!
//! A [`PlaneCurve`] stores its vertices in counterclockwise order (input in
//! clockwise order is reversed on construction) and exposes the discrete
//! geometric quantities the flow solvers need: perimeter, enclosed area,
//! pointwise curvature with outward normals, and arclength resampling.
//!
//! Curvature is the Menger (circumradius) curvature of each vertex and its
//! two neighbors, which is exact on circles of any radius. Normals point
//! outward; combined with the sign convention `kappa > 0` on convex arcs,
//! a velocity `-kappa * N` moves a convex curve inward.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("a closed curve needs at least 8 vertices, got {0}")]
    TooFewPoints(usize),
    #[error("curve is self-intersecting (segments {0} and {1} cross)")]
    SelfIntersecting(usize, usize),
    #[error("segment {0} has near-zero length")]
    DegenerateSegment(usize),
}

/// Simple closed polygon, counterclockwise, with no repeated closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCurve {
    points: Vec<[f64; 2]>,
}

impl PlaneCurve {
    /// Validate and normalize a vertex list. Requires at least 8 vertices,
    /// no degenerate segments, and no self-intersections. Clockwise input
    /// is reversed so the stored curve is always counterclockwise.
    pub fn new(mut points: Vec<[f64; 2]>) -> Result<Self, CurveError> {
        let n = points.len();
        if n < 8 {
            return Err(CurveError::TooFewPoints(n));
        }
        let diameter = bounding_diameter(&points);
        for j in 0..n {
            let k = (j + 1) % n;
            let d = dist(points[j], points[k]);
            if d <= 1e-12 * diameter.max(f64::MIN_POSITIVE) {
                return Err(CurveError::DegenerateSegment(j));
            }
        }
        if let Some((i, j)) = first_self_intersection(&points) {
            return Err(CurveError::SelfIntersecting(i, j));
        }
        if signed_area(&points) < 0.0 {
            points.reverse();
        }
        Ok(Self { points })
    }

    /// Regular polygon inscribed in a circle of radius `r` about `center`.
    pub fn circle(center: [f64; 2], r: f64, n: usize) -> Result<Self, CurveError> {
        Self::ellipse(center, r, r, n)
    }

    /// Polygon sampling an axis-aligned ellipse with semi-axes `a`, `b`,
    /// spaced uniformly in arclength (not in the angle parameter, which
    /// would cluster vertices at the flat ends and undercut the uniform
    /// spacing the flow stability bound assumes). Vertices lie exactly on
    /// the ellipse; the parameter values are found on a dense arclength
    /// table with 64-fold oversampling.
    pub fn ellipse(center: [f64; 2], a: f64, b: f64, n: usize) -> Result<Self, CurveError> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let dense = 64 * n.max(8);
        // Cumulative chord length over a dense parameter grid.
        let mut cum = Vec::with_capacity(dense + 1);
        cum.push(0.0);
        let eval = |t: f64| [a * t.cos(), b * t.sin()];
        let mut prev = eval(0.0);
        for j in 1..=dense {
            let p = eval(two_pi * j as f64 / dense as f64);
            cum.push(cum[j - 1] + dist(p, prev));
            prev = p;
        }
        let total = cum[dense];
        let mut pts = Vec::with_capacity(n);
        let mut seg = 0;
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            while seg + 1 < dense && cum[seg + 1] <= s {
                seg += 1;
            }
            let frac = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
            let t = two_pi * (seg as f64 + frac) / dense as f64;
            let p = eval(t);
            pts.push([center[0] + p[0], center[1] + p[1]]);
        }
        Self::new(pts)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Perimeter of the polygon.
    pub fn length(&self) -> f64 {
        polygon_length(&self.points)
    }

    /// Enclosed area by the shoelace formula; positive (counterclockwise).
    pub fn enclosed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    /// `L^2 / (4 pi A)`; equals 1 exactly on a circle, > 1 otherwise.
    pub fn isoperimetric_ratio(&self) -> f64 {
        let l = self.length();
        l * l / (4.0 * std::f64::consts::PI * self.enclosed_area())
    }

    /// Signed Menger curvature and outward unit normal at every vertex.
    ///
    /// Curvature at vertex `j` is twice the cross product of the incoming
    /// and outgoing edges divided by the product of the three side lengths
    /// of the neighbor triangle (the reciprocal circumradius, signed
    /// positive on convex arcs). The normal is the chord tangent rotated
    /// clockwise, which points outward on a counterclockwise curve.
    pub fn curvature_and_normal(&self) -> (Vec<f64>, Vec<[f64; 2]>) {
        curvature_normals(&self.points)
    }

    /// Sum of exterior angles; `2 pi` for any simple counterclockwise
    /// polygon (discrete Gauss-Bonnet, exact up to rounding).
    pub fn total_turning(&self) -> f64 {
        let n = self.points.len();
        let mut total = 0.0;
        for j in 0..n {
            let e1 = sub(self.points[j], self.points[(j + n - 1) % n]);
            let e2 = sub(self.points[(j + 1) % n], self.points[j]);
            total += cross(e1, e2).atan2(dot(e1, e2));
        }
        total
    }

    /// Redistribute `m` vertices uniformly in arclength along the polygon.
    ///
    /// Placement interpolates each segment's chord and then adds the
    /// sagitta of the local circular arc (mean Menger curvature of the two
    /// endpoints, parabolic profile `kappa x (c - x) / 2` along the chord),
    /// so new vertices land on the smooth curve the polygon approximates
    /// instead of on its chords. Plain chord interpolation cuts every
    /// convex corner inward, and that bias compounds into a measurable
    /// area loss when a flow driver resamples thousands of times; the arc
    /// correction removes it at source. Existing vertices are fixed points
    /// of the rule (the sagitta vanishes at chord ends), and vertex 0 of
    /// the result always coincides with vertex 0 of the input.
    pub fn resample_arclength(&self, m: usize) -> Result<Self, CurveError> {
        if m < 8 {
            return Err(CurveError::TooFewPoints(m));
        }
        let n = self.points.len();
        let (kappa, normal) = curvature_normals(&self.points);
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for j in 0..n {
            let d = dist(self.points[j], self.points[(j + 1) % n]);
            cum.push(cum[j] + d);
        }
        let total = cum[n];
        let mut pts = Vec::with_capacity(m);
        let mut seg = 0;
        for k in 0..m {
            let s = total * k as f64 / m as f64;
            while seg + 1 < n && cum[seg + 1] <= s {
                seg += 1;
            }
            let t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
            let j2 = (seg + 1) % n;
            let a = self.points[seg];
            let b = self.points[j2];
            let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            // Outward sagitta of the local arc over this chord.
            let c = cum[seg + 1] - cum[seg];
            let k_seg = 0.5 * (kappa[seg] + kappa[j2]);
            let mut nx = normal[seg][0] + normal[j2][0];
            let mut ny = normal[seg][1] + normal[j2][1];
            let nn = nx.hypot(ny);
            if nn > 1e-12 {
                nx /= nn;
                ny /= nn;
                let bulge = 0.5 * k_seg * (t * c) * ((1.0 - t) * c);
                p[0] += bulge * nx;
                p[1] += bulge * ny;
            }
            pts.push(p);
        }
        Self::new(pts)
    }

    /// Scan every non-adjacent segment pair for a crossing. `None` means
    /// the polygon is simple.
    pub fn self_intersection(&self) -> Option<(usize, usize)> {
        first_self_intersection(&self.points)
    }

    /// Wrap a vertex list without any validation. Flow steppers use this
    /// for intermediate states whose invariants are re-checked at a
    /// coarser cadence.
    pub(crate) fn from_points_unchecked(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }
}

/// Menger curvature and outward normals on a raw vertex list; see
/// [`PlaneCurve::curvature_and_normal`].
pub(crate) fn curvature_normals(points: &[[f64; 2]]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n = points.len();
    let mut kappa = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    for j in 0..n {
        let p = points[(j + n - 1) % n];
        let q = points[j];
        let r = points[(j + 1) % n];
        let e1 = sub(q, p);
        let e2 = sub(r, q);
        let chord = sub(r, p);
        let cr = cross(e1, e2);
        let denom = norm(e1) * norm(e2) * norm(chord);
        kappa.push(2.0 * cr / denom);
        let t = norm(chord);
        normal.push([chord[1] / t, -chord[0] / t]);
    }
    (kappa, normal)
}

pub(crate) fn polygon_length(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|j| dist(points[j], points[(j + 1) % n]))
        .sum()
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

pub(crate) fn signed_area(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for j in 0..n {
        let a = points[j];
        let b = points[(j + 1) % n];
        s += cross(a, b);
    }
    0.5 * s
}

fn bounding_diameter(points: &[[f64; 2]]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}

fn first_self_intersection(points: &[[f64; 2]]) -> Option<(usize, usize)> {
    let n = points.len();
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        for j in i + 2..n {
            // Skip the shared-vertex pair (last segment wraps to touch the
            // first).
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (points[j], points[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Proper crossing or collinear overlap between segments `ab` and `cd`.
fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_length_and_area_closed_forms() {
        // A regular n-gon inscribed in a circle of radius r has exact
        // perimeter 2 n r sin(pi/n) and area n r^2 sin(2 pi/n) / 2.
        let n = 512;
        let r = 1.5;
        let c = PlaneCurve::circle([0.3, -0.2], r, n).unwrap();
        let exact_l = 2.0 * n as f64 * r * (PI / n as f64).sin();
        let exact_a = 0.5 * n as f64 * r * r * (2.0 * PI / n as f64).sin();
        assert_relative_eq!(c.length(), exact_l, epsilon = 1e-12);
        assert_relative_eq!(c.enclosed_area(), exact_a, epsilon = 1e-12);
        assert_relative_eq!(c.length(), 2.0 * PI * r, max_relative = 1e-4);
        assert_relative_eq!(c.enclosed_area(), PI * r * r, max_relative = 1e-4);
    }

    #[test]
    fn menger_curvature_exact_on_circle() {
        let r = 2.5;
        let c = PlaneCurve::circle([0.0, 0.0], r, 64).unwrap();
        let (kappa, normal) = c.curvature_and_normal();
        for (j, &k) in kappa.iter().enumerate() {
            assert_relative_eq!(k, 1.0 / r, epsilon = 1e-12);
            // Outward normal is radial.
            let p = c.points()[j];
            let nr = norm(p);
            assert_abs_diff_eq!(normal[j][0], p[0] / nr, epsilon = 1e-12);
            assert_abs_diff_eq!(normal[j][1], p[1] / nr, epsilon = 1e-12);
        }
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let n = 32;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let t = -2.0 * PI * j as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let c = PlaneCurve::new(pts).unwrap();
        assert!(c.enclosed_area() > 0.0);
        let (kappa, _) = c.curvature_and_normal();
        assert!(kappa.iter().all(|&k| k > 0.0));
    }

    #[test]
    fn ellipse_perimeter_second_order_convergence() {
        // Reference perimeter from dense quadrature of the arclength
        // integrand, independent of the polygon code path.
        let (a, b) = (2.0, 1.0);
        let exact = crate::util::quadrature::simpson_fn(
            |t| ((a * t.sin()).powi(2) + (b * t.cos()).powi(2)).sqrt(),
            0.0,
            2.0 * PI,
            1 << 14,
        );
        assert_relative_eq!(exact, 9.688448, max_relative = 1e-6);
        let err = |n: usize| {
            (PlaneCurve::ellipse([0.0, 0.0], a, b, n).unwrap().length() - exact).abs()
        };
        let (e1, e2) = (err(256), err(512));
        // Inscribed polygons converge at second order: halving h should
        // shrink the error by about 4.
        assert!(e2 > 0.0 && e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn rejects_too_few_points() {
        let pts: Vec<[f64; 2]> = (0..7)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 7.0;
                [t.cos(), t.sin()]
            })
            .collect();
        assert_eq!(PlaneCurve::new(pts), Err(CurveError::TooFewPoints(7)));
    }

    #[test]
    fn rejects_degenerate_segment() {
        let mut pts: Vec<[f64; 2]> = (0..16)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 16.0;
                [t.cos(), t.sin()]
            })
            .collect();
        pts[5] = pts[4];
        assert_eq!(PlaneCurve::new(pts), Err(CurveError::DegenerateSegment(4)));
    }

    #[test]
    fn rejects_figure_eight() {
        // Lemniscate-like path crosses itself at the origin.
        let n = 64;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                [t.sin(), (2.0 * t).sin() * 0.5]
            })
            .collect();
        assert!(matches!(
            PlaneCurve::new(pts),
            Err(CurveError::SelfIntersecting(_, _))
        ));
    }

    #[test]
    fn aligned_resample_preserves_vertices_exactly() {
        let c = PlaneCurve::circle([0.0, 0.0], 1.0, 100).unwrap();
        let r = c.resample_arclength(200).unwrap();
        // Every even output vertex is an input vertex (the sagitta
        // correction vanishes at chord ends); odd ones bulge onto the
        // circle the vertices sample, to fourth order in the spacing.
        for j in 0..100 {
            assert_abs_diff_eq!(r.points()[2 * j][0], c.points()[j][0], epsilon = 1e-12);
            assert_abs_diff_eq!(r.points()[2 * j][1], c.points()[j][1], epsilon = 1e-12);
        }
        for p in r.points() {
            assert_relative_eq!(p[0].hypot(p[1]), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn identity_resample_on_uniform_polygon() {
        // Same count, already uniform: every target arclength hits a
        // vertex, so the polygon comes back bit-for-bit usable.
        let c = PlaneCurve::circle([0.0, 0.0], 1.0, 128).unwrap();
        let r = c.resample_arclength(128).unwrap();
        for (a, b) in c.points().iter().zip(r.points()) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn unaligned_resample_stays_close() {
        let c = PlaneCurve::ellipse([0.0, 0.0], 2.0, 1.0, 512).unwrap();
        let r = c.resample_arclength(400).unwrap();
        assert_relative_eq!(r.length(), c.length(), max_relative = 1e-4);
        assert_relative_eq!(r.enclosed_area(), c.enclosed_area(), max_relative = 1e-4);
        // Segments should be uniform after resampling.
        let pts = r.points();
        let target = r.length() / 400.0;
        for j in 0..400 {
            let d = dist(pts[j], pts[(j + 1) % 400]);
            assert_relative_eq!(d, target, max_relative = 1e-2);
        }
    }

    #[test]
    fn isoperimetric_ratio_of_circle_is_one() {
        let c = PlaneCurve::circle([0.0, 0.0], 3.0, 4096).unwrap();
        assert_relative_eq!(c.isoperimetric_ratio(), 1.0, epsilon = 1e-5);
        let e = PlaneCurve::ellipse([0.0, 0.0], 2.0, 1.0, 512).unwrap();
        assert!(e.isoperimetric_ratio() > 1.18);
    }

    /// Star-shaped polygons `r(theta) = r0 (1 + sum a_k cos(k theta + phi))`
    /// with small harmonics are simple by construction.
    fn star_polygon(
        n: usize,
        r0: f64,
        harmonics: &[(usize, f64, f64)],
    ) -> Vec<[f64; 2]> {
        (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                let mut r = 1.0;
                for &(k, a, phi) in harmonics {
                    r += a * (k as f64 * t + phi).cos();
                }
                [r0 * r * t.cos(), r0 * r * t.sin()]
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn turning_number_is_one(
            n in 16usize..128,
            r0 in 0.5f64..3.0,
            a1 in -0.12f64..0.12,
            a2 in -0.1f64..0.1,
            a3 in -0.08f64..0.08,
            p1 in 0.0f64..(2.0 * PI),
            p2 in 0.0f64..(2.0 * PI),
        ) {
            let pts = star_polygon(n, r0, &[(1, a1, p1), (2, a2, p2), (3, a3, 0.0)]);
            let c = PlaneCurve::new(pts).unwrap();
            prop_assert!((c.total_turning() - 2.0 * PI).abs() < 1e-3);
        }

        #[test]
        fn isoperimetric_ratio_at_least_one(
            n in 32usize..160,
            r0 in 0.5f64..2.0,
            a2 in -0.15f64..0.15,
            a3 in -0.1f64..0.1,
            p2 in 0.0f64..(2.0 * PI),
        ) {
            let pts = star_polygon(n, r0, &[(2, a2, p2), (3, a3, 1.0)]);
            let c = PlaneCurve::new(pts).unwrap();
            prop_assert!(c.isoperimetric_ratio() >= 1.0 - 1e-6);
        }
    }
}
