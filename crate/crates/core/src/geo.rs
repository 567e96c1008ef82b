//! Distance, hull, area and intersection primitives.
//!
//! Point-to-point distances use the haversine formula on a sphere. Everything
//! that needs planar reasoning (hulls, areas, segment tests) runs in a local
//! equirectangular projection centred on the geometry involved, in meters.

use std::f64::consts::PI;

use crate::model::{CoordinateSet, LandUsageElement, LatLng};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Length of one degree of arc on the sphere.
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * PI / 180.0;

/// Great-circle distance in meters.
pub fn haversine_m(a: LatLng, b: LatLng) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lng - a.lng).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection about a fixed origin, in meters.
#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    origin: LatLng,
    cos_lat: f64,
}

impl LocalProjection {
    pub fn at(origin: LatLng) -> Self {
        Self { origin, cos_lat: origin.lat.to_radians().cos() }
    }

    /// Centred on the mean of `points`. Panics on an empty iterator.
    pub fn centered_on<'a>(points: impl IntoIterator<Item = &'a LatLng>) -> Self {
        let (mut lat, mut lng, mut n) = (0.0, 0.0, 0usize);
        for p in points {
            lat += p.lat;
            lng += p.lng;
            n += 1;
        }
        assert!(n > 0, "projection needs at least one point");
        Self::at(LatLng::new(lat / n as f64, lng / n as f64))
    }

    pub fn project(&self, p: LatLng) -> Vec2 {
        Vec2 {
            x: (p.lng - self.origin.lng) * METERS_PER_DEGREE * self.cos_lat,
            y: (p.lat - self.origin.lat) * METERS_PER_DEGREE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2 { x: self.x - o.x, y: self.y - o.y }
    }

    fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Cross product of `(a - o)` and `(b - o)`; positive for a left turn.
pub fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Axis-aligned bounds in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lng: f64,
    pub max_lat: f64,
    pub max_lng: f64,
}

impl BoundingBox {
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a LatLng>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Self {
            min_lat: first.lat,
            min_lng: first.lng,
            max_lat: first.lat,
            max_lng: first.lng,
        };
        for p in it {
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
            b.min_lng = b.min_lng.min(p.lng);
            b.max_lng = b.max_lng.max(p.lng);
        }
        Some(b)
    }

    pub fn of_element(e: &LandUsageElement) -> Option<Self> {
        Self::of_points(e.coordsets.iter().flat_map(|s| s.points.iter()))
    }

    /// Bounds of the circle of `radius_m` meters around `center`, using the
    /// same projection scale as [`circle_intersects_element`].
    pub fn around(center: LatLng, radius_m: f64) -> Self {
        let dlat = radius_m / METERS_PER_DEGREE;
        let cos = center.lat.to_radians().cos().max(1e-6);
        let dlng = radius_m / (METERS_PER_DEGREE * cos);
        Self {
            min_lat: center.lat - dlat,
            max_lat: center.lat + dlat,
            min_lng: center.lng - dlng,
            max_lng: center.lng + dlng,
        }
    }

    pub fn intersects(&self, o: &BoundingBox) -> bool {
        self.min_lat <= o.max_lat
            && o.min_lat <= self.max_lat
            && self.min_lng <= o.max_lng
            && o.min_lng <= self.max_lng
    }
}

/// Convex hull, counter-clockwise in the local projection about the centroid.
///
/// Fewer than three non-collinear inputs yield an open set of the distinct
/// inputs ordered along the line.
pub fn convex_hull(points: &[LatLng]) -> CoordinateSet {
    assert!(!points.is_empty(), "convex hull of an empty point set");
    let proj = LocalProjection::centered_on(points);
    let mut pts: Vec<(Vec2, LatLng)> = points.iter().map(|p| (proj.project(*p), *p)).collect();
    pts.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)));
    pts.dedup_by(|a, b| a.1 == b.1);

    if pts.len() < 3 {
        return CoordinateSet { closed: false, points: pts.into_iter().map(|p| p.1).collect() };
    }

    // Andrew's monotone chain; collinear points are dropped.
    let mut hull: Vec<(Vec2, LatLng)> = Vec::with_capacity(pts.len() * 2);
    for p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();

    if hull.len() < 3 {
        return CoordinateSet { closed: false, points: pts.into_iter().map(|p| p.1).collect() };
    }
    CoordinateSet { closed: true, points: hull.into_iter().map(|p| p.1).collect() }
}

/// Polygon area in square meters; open sets have no area.
pub fn area_m2(s: &CoordinateSet) -> f64 {
    if !s.closed || s.points.len() < 3 {
        return 0.0;
    }
    let proj = LocalProjection::centered_on(&s.points);
    let pts: Vec<Vec2> = s.points.iter().map(|p| proj.project(*p)).collect();
    let mut twice = 0.0;
    for i in 0..pts.len() {
        let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
        twice += a.x * b.y - b.x * a.y;
    }
    twice.abs() / 2.0
}

fn segments(pts: &[Vec2], closed: bool) -> Vec<(Vec2, Vec2)> {
    match pts.len() {
        0 => vec![],
        1 => vec![(pts[0], pts[0])],
        n => {
            let mut segs: Vec<(Vec2, Vec2)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
            if closed && pts[n - 1] != pts[0] {
                segs.push((pts[n - 1], pts[0]));
            }
            segs
        }
    }
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection, including collinear overlap and degenerate
/// (single-point) segments.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Even-odd ray casting. Boundary points may land on either side.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.sub(a).norm();
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    let q = Vec2 { x: a.x + t * ab.x, y: a.y + t * ab.y };
    p.sub(q).norm()
}

/// True when the shapes share any point: crossing or touching edges, or one
/// lying inside the other (closed) set.
pub fn coordsets_intersect(a: &CoordinateSet, b: &CoordinateSet) -> bool {
    match (BoundingBox::of_points(&a.points), BoundingBox::of_points(&b.points)) {
        (Some(ba), Some(bb)) if ba.intersects(&bb) => {}
        _ => return false,
    }
    let proj = LocalProjection::centered_on(a.points.iter().chain(&b.points));
    let pa: Vec<Vec2> = a.points.iter().map(|p| proj.project(*p)).collect();
    let pb: Vec<Vec2> = b.points.iter().map(|p| proj.project(*p)).collect();

    let sa = segments(&pa, a.closed);
    let sb = segments(&pb, b.closed);
    for (p1, p2) in &sa {
        for (q1, q2) in &sb {
            if segments_intersect(*p1, *p2, *q1, *q2) {
                return true;
            }
        }
    }
    (b.closed && point_in_polygon(pa[0], &pb)) || (a.closed && point_in_polygon(pb[0], &pa))
}

/// True when the circle reaches any vertex or edge of `e`, or sits inside
/// one of its polygons.
pub fn circle_intersects_element(center: LatLng, radius_m: f64, e: &LandUsageElement) -> bool {
    let proj = LocalProjection::at(center);
    let origin = Vec2 { x: 0.0, y: 0.0 };
    e.coordsets.iter().any(|s| {
        let pts: Vec<Vec2> = s.points.iter().map(|p| proj.project(*p)).collect();
        segments(&pts, s.closed)
            .iter()
            .any(|(a, b)| point_segment_distance(origin, *a, *b) <= radius_m)
            || (s.closed && point_in_polygon(origin, &pts))
    })
}

/// Smallest haversine distance between any vertex of `a` and any vertex of `b`.
pub fn min_vertex_distance_m<'a>(
    a: impl IntoIterator<Item = &'a LatLng>,
    b: impl IntoIterator<Item = &'a LatLng> + Clone,
) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b.clone() {
            best = best.min(haversine_m(*p, *q));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tag;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ll(lat: f64, lng: f64) -> LatLng {
        LatLng::new(lat, lng)
    }

    fn square(lat: f64, lng: f64, side_m: f64) -> CoordinateSet {
        let d = side_m / METERS_PER_DEGREE;
        let dl = d / lat.to_radians().cos();
        CoordinateSet::polygon(vec![
            ll(lat, lng),
            ll(lat, lng + dl),
            ll(lat + d, lng + dl),
            ll(lat + d, lng),
        ])
        .unwrap()
    }

    // spherical law of cosines, independent of the haversine route
    fn cosine_law(a: LatLng, b: LatLng) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lng - a.lng).to_radians();
        let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn haversine_reference_values() {
        assert_eq!(haversine_m(ll(0.0, 0.0), ll(0.0, 0.0)), 0.0);
        // one degree of arc: pi * R / 180
        assert!((haversine_m(ll(0.0, 0.0), ll(0.0, 1.0)) - 111_194.9).abs() < 0.1);
        let (a, b) = (ll(10.0, 20.0), ll(10.001, 20.001));
        assert_relative_eq!(haversine_m(a, b), cosine_law(a, b), max_relative = 1e-3);
    }

    proptest! {
        #[test]
        fn haversine_metric_laws(
            a in (-80.0f64..80.0, -179.0f64..179.0),
            b in (-80.0f64..80.0, -179.0f64..179.0),
            c in (-80.0f64..80.0, -179.0f64..179.0),
        ) {
            let (a, b, c) = (ll(a.0, a.1), ll(b.0, b.1), ll(c.0, c.1));
            let ab = haversine_m(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - haversine_m(b, a)).abs() <= 1e-6 * ab.max(1.0));
            let bound = haversine_m(a, c) + haversine_m(c, b);
            prop_assert!(ab <= bound * (1.0 + 1e-6) + 1e-6);
        }
    }

    #[test]
    fn hull_drops_interior_point() {
        let pts = vec![ll(0.0, 0.0), ll(0.0, 0.001), ll(0.001, 0.001), ll(0.001, 0.0), ll(0.0005, 0.0005)];
        let h = convex_hull(&pts);
        assert!(h.closed);
        assert_eq!(h.points.len(), 4);
        assert!(!h.points.contains(&ll(0.0005, 0.0005)));
    }

    #[test]
    fn hull_of_triangle_is_itself() {
        let pts = vec![ll(0.0, 0.0), ll(0.0, 0.001), ll(0.001, 0.0)];
        let h = convex_hull(&pts);
        assert!(h.closed);
        assert_eq!(h.points.len(), 3);
        for p in &pts {
            assert!(h.points.contains(p));
        }
    }

    #[test]
    fn collinear_hull_is_open() {
        let h = convex_hull(&[ll(0.0, 0.0), ll(0.0, 0.002), ll(0.0, 0.001)]);
        assert!(!h.closed);
        assert_eq!(h.points, vec![ll(0.0, 0.0), ll(0.0, 0.001), ll(0.0, 0.002)]);
    }

    #[test]
    fn random_hull_contains_inputs_and_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<LatLng> = (0..200)
            .map(|_| ll(52.0 + rng.random_range(0.0..0.01), -1.5 + rng.random_range(0.0..0.01)))
            .collect();
        let h = convex_hull(&pts);
        assert!(h.closed);
        let proj = LocalProjection::centered_on(&pts);
        let poly: Vec<Vec2> = h.points.iter().map(|p| proj.project(*p)).collect();
        let n = poly.len();
        for i in 0..n {
            let c = cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
            assert!(c > 0.0, "hull must turn left at every vertex");
        }
        for p in &pts {
            let q = proj.project(*p);
            // inside, or within float noise of an edge
            let on_edge = (0..n).any(|i| point_segment_distance(q, poly[i], poly[(i + 1) % n]) < 1e-6);
            assert!(point_in_polygon(q, &poly) || on_edge);
        }
    }

    #[test]
    fn area_of_equatorial_square() {
        let s = square(0.0, 0.0, 100.0);
        assert!((area_m2(&s) - 10_000.0).abs() < 1.0);
        let line = CoordinateSet::open(vec![ll(0.0, 0.0), ll(0.0, 0.01), ll(0.01, 0.01)]).unwrap();
        assert_eq!(area_m2(&line), 0.0);
    }

    #[test]
    fn triangle_area_matches_half_cross() {
        let tri = CoordinateSet::polygon(vec![ll(10.0, 10.0), ll(10.0, 10.003), ll(10.002, 10.001)]).unwrap();
        let proj = LocalProjection::centered_on(&tri.points);
        let p: Vec<Vec2> = tri.points.iter().map(|q| proj.project(*q)).collect();
        let half = 0.5 * cross(p[0], p[1], p[2]).abs();
        assert_relative_eq!(area_m2(&tri), half, max_relative = 1e-12);
    }

    #[test]
    fn hull_area_dominates_sub_polygons() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<LatLng> = (0..40)
            .map(|_| ll(rng.random_range(0.0..0.005), rng.random_range(0.0..0.005)))
            .collect();
        let hull = convex_hull(&pts);
        let full = area_m2(&hull);
        for skip in 0..hull.points.len() {
            let sub: Vec<LatLng> =
                hull.points.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, p)| *p).collect();
            if let Ok(s) = CoordinateSet::polygon(sub) {
                assert!(area_m2(&s) <= full + 1e-9);
            }
        }
    }

    #[test]
    fn intersection_cases() {
        let a = square(52.0, -1.5, 100.0);
        assert!(coordsets_intersect(&a, &a));
        // ~1 km east
        let far = square(52.0, -1.5 + 1000.0 / (METERS_PER_DEGREE * 52f64.to_radians().cos()), 100.0);
        assert!(!coordsets_intersect(&a, &far));
        assert!(!coordsets_intersect(&far, &a));
        let big = square(51.999, -1.502, 500.0);
        assert!(coordsets_intersect(&a, &big));
        assert!(coordsets_intersect(&big, &a));
    }

    #[test]
    fn far_squares_have_no_crossing_segment_pairs() {
        // brute force over every vertex pair distance as a sanity bound
        let a = square(52.0, -1.5, 100.0);
        let far = square(52.0, -1.5 + 1000.0 / (METERS_PER_DEGREE * 52f64.to_radians().cos()), 100.0);
        let d = min_vertex_distance_m(&a.points, &far.points);
        assert!(d > 800.0);
    }

    fn element(coordsets: Vec<CoordinateSet>) -> LandUsageElement {
        let mut tags = crate::model::TagSet::new();
        tags.insert(Tag::new("building", "yes").unwrap());
        LandUsageElement::new("w_1", tags, coordsets, None).unwrap()
    }

    #[test]
    fn circle_element_cases() {
        let b = element(vec![square(52.0, -1.5, 100.0)]);
        assert!(circle_intersects_element(ll(52.0004, -1.4993), 1.0, &b));
        assert!(!circle_intersects_element(ll(52.09, -1.5), 100.0, &b));

        // road running north-south, 50 m east of the center
        let dl = 50.0 / (METERS_PER_DEGREE * 52f64.to_radians().cos());
        let road = element(vec![CoordinateSet::open(vec![ll(51.99, -1.5 + dl), ll(52.01, -1.5 + dl)]).unwrap()]);
        assert!(circle_intersects_element(ll(52.0, -1.5), 65.0, &road));
        assert!(!circle_intersects_element(ll(52.0, -1.5), 45.0, &road));
    }
}
