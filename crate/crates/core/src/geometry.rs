//! Floating-point primitives for bounded convex polygons embedded in R^n.
//!
//! Polygons are kept in V-representation only: an ordered vertex list in the
//! input space (the *preimage*) paired with the image of every vertex under
//! the network prefix processed so far. Splitting interpolates both lists with
//! the same factor, which is exact as long as the prefix is affine on the
//! polygon.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("hyperplane normal is the zero vector")]
    ZeroNormal,
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} repeats its predecessor")]
    RepeatedVertex(usize),
    #[error("preimage and image lists differ in length ({preimage} vs {image})")]
    LengthMismatch { preimage: usize, image: usize },
    #[error("vertices are collinear; polygon has no area")]
    Collinear,
    #[error("vertex {index} lies {distance:e} off the polygon plane")]
    NonCoplanar { index: usize, distance: f64 },
    #[error("polygon is not convex")]
    NonConvex,
    #[error("polygon vertices are in clockwise order")]
    Clockwise,
    #[error("segment is parallel to the hyperplane; no crossing")]
    Parallel,
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// Tolerances shared by the geometric kernels and the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative tolerance for classifying a point as lying on a hyperplane.
    pub side: f64,
    /// Absolute distance below which two vertices are merged.
    pub vertex: f64,
    /// Polygons with area at or below this are discarded as degenerate.
    pub area: f64,
    /// Relative distance a vertex may sit off the plane of the polygon.
    pub coplanar: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            side: 1e-7,
            vertex: 1e-10,
            area: 1e-12,
            coplanar: 1e-6,
        }
    }
}

/// A point in R^n. Derefs to its coordinate slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// Builds a point, rejecting NaN and infinite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `self + t * (other - self)`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + t * (b - a)).collect())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Arithmetic mean of a non-empty point list.
    pub fn centroid(points: &[Point]) -> Point {
        let dim = points[0].dim();
        let mut acc = vec![0.0; dim];
        for p in points {
            for (a, c) in acc.iter_mut().zip(&p.0) {
                *a += c;
            }
        }
        let inv = 1.0 / points.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Point(acc)
    }
}

impl From<Vec<f64>> for Point {
    /// Unchecked conversion; callers at trust boundaries use [`Point::new`].
    fn from(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Which side of a hyperplane a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    pub fn opposite(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }

    pub fn is_strict(self) -> bool {
        self != Sign::Zero
    }

    fn of(value: f64) -> Sign {
        if value > 0.0 {
            Sign::Positive
        } else if value < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// The hyperplane `{x : normal · x = offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
    normal_norm: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if !offset.is_finite() || normal.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let normal_norm = norm(&normal);
        if normal_norm == 0.0 {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(Self {
            normal,
            offset,
            normal_norm,
        })
    }

    /// `e_i · x = offset` in R^dim.
    pub fn axis(dim: usize, i: usize, offset: f64) -> Self {
        let mut normal = vec![0.0; dim];
        normal[i] = 1.0;
        Self {
            normal,
            offset,
            normal_norm: 1.0,
        }
    }

    /// `x_a - x_b = 0` in R^dim.
    pub fn difference(dim: usize, a: usize, b: usize) -> Self {
        let mut normal = vec![0.0; dim];
        normal[a] = 1.0;
        normal[b] = -1.0;
        Self {
            normal,
            offset: 0.0,
            normal_norm: std::f64::consts::SQRT_2,
        }
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `normal · p - offset`, unchecked dimensions.
    pub fn residual(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.offset
    }

    /// The on-plane band half-width at `p` for relative tolerance `eps`.
    pub fn band(&self, p: &[f64], eps: f64) -> f64 {
        eps * (1.0 + self.offset.abs() + self.normal_norm * norm(p))
    }

    pub(crate) fn classify(&self, p: &[f64], eps: f64) -> Sign {
        let r = self.residual(p);
        if r.abs() <= self.band(p, eps) {
            Sign::Zero
        } else {
            Sign::of(r)
        }
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() == self.dim() {
            Ok(())
        } else {
            Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            })
        }
    }
}

/// Classifies `p` against `h`: zero iff `|N·p − b| ≤ ε(1 + |b| + ‖N‖‖p‖)`.
pub fn side_of(h: &Hyperplane, p: &[f64], eps: f64) -> Result<Sign> {
    h.check_dim(p)?;
    Ok(h.classify(p, eps))
}

/// The factor `t` at which the segment `a → b` meets `h`.
///
/// `t` is not clamped; it lies in `[0, 1]` when the endpoints are on
/// opposite (or touching) sides.
pub fn crossing_ratio(h: &Hyperplane, a: &[f64], b: &[f64]) -> Result<f64> {
    h.check_dim(a)?;
    h.check_dim(b)?;
    let ra = h.residual(a);
    let rb = h.residual(b);
    let denom = rb - ra;
    let span: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt();
    if denom.abs() <= 1e-12 * h.normal_norm * span || denom == 0.0 {
        return Err(GeometryError::Parallel);
    }
    Ok(-ra / denom)
}

/// An orthonormal 2D frame for a plane embedded in R^n.
///
/// Built from the first vertex, the first vertex distinct from it, and the
/// first vertex off the line through those two. In R^2 the frame is flipped
/// if needed to agree with the standard orientation, so "counter-clockwise"
/// keeps its usual meaning there.
#[derive(Debug, Clone)]
pub struct PlaneFrame {
    origin: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
}

impl PlaneFrame {
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let origin = points.first().ok_or(GeometryError::TooFewVertices(0))?;
        let scale = points.iter().map(|p| p.distance(origin)).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(GeometryError::Collinear);
        }
        let cutoff = 1e-12 * scale;
        if origin.dim() == 2 {
            // Any positively oriented orthonormal frame works in the plane;
            // the standard one keeps projections exact.
            let spread = points.iter().any(|p| {
                let (a, b) = (p[0] - origin[0], p[1] - origin[1]);
                points
                    .iter()
                    .any(|q| (a * (q[1] - origin[1]) - b * (q[0] - origin[0])).abs() > cutoff * scale)
            });
            if !spread {
                return Err(GeometryError::Collinear);
            }
            return Ok(Self {
                origin: origin.to_vec(),
                u: vec![1.0, 0.0],
                w: vec![0.0, 1.0],
            });
        }
        let diff = |p: &Point| -> Vec<f64> { p.iter().zip(origin.iter()).map(|(a, o)| a - o).collect() };

        let mut rest = points.iter().skip(1);
        let u = rest
            .by_ref()
            .map(diff)
            .find(|d| norm(d) > cutoff)
            .ok_or(GeometryError::Collinear)?;
        let u = scaled(&u, 1.0 / norm(&u));

        let mut w = rest
            .map(|p| {
                let d = diff(p);
                let along = dot(&d, &u);
                d.iter().zip(&u).map(|(x, ui)| x - along * ui).collect::<Vec<_>>()
            })
            .find(|d| norm(d) > cutoff)
            .ok_or(GeometryError::Collinear)?;
        w = scaled(&w, 1.0 / norm(&w));
        if u.len() == 2 && u[0] * w[1] - u[1] * w[0] < 0.0 {
            w.iter_mut().for_each(|c| *c = -*c);
        }
        Ok(Self {
            origin: origin.to_vec(),
            u,
            w,
        })
    }

    pub fn project(&self, p: &[f64]) -> (f64, f64) {
        let mut pu = 0.0;
        let mut pw = 0.0;
        for ((x, o), (u, w)) in p.iter().zip(&self.origin).zip(self.u.iter().zip(&self.w)) {
            let d = x - o;
            pu += d * u;
            pw += d * w;
        }
        (pu, pw)
    }

    /// Distance from `p` to the plane.
    pub fn offset_of(&self, p: &[f64]) -> f64 {
        let (a, b) = self.project(p);
        p.iter()
            .zip(&self.origin)
            .zip(self.u.iter().zip(&self.w))
            .map(|((x, o), (u, w))| {
                let r = x - o - a * u - b * w;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Maps plane coordinates back into the ambient space.
    pub fn lift(&self, a: f64, b: f64) -> Point {
        Point(
            self.origin
                .iter()
                .zip(self.u.iter().zip(&self.w))
                .map(|(o, (u, w))| o + a * u + b * w)
                .collect(),
        )
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn shoelace(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain convex hull, counter-clockwise, collinear points dropped.
fn hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// A bounded convex polygon in R^n together with the images of its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarRegion {
    preimage: Vec<Point>,
    image: Vec<Point>,
}

impl PlanarRegion {
    /// Pairs vertex lists without re-running the convexity checks.
    pub(crate) fn from_parts_unchecked(preimage: Vec<Point>, image: Vec<Point>) -> Self {
        debug_assert_eq!(preimage.len(), image.len());
        Self { preimage, image }
    }

    /// Validates `preimage` and attaches `image` (one point per vertex).
    pub fn with_image(preimage: Vec<Point>, image: Vec<Point>, tol: &Tolerances) -> Result<Self> {
        if preimage.len() != image.len() {
            return Err(GeometryError::LengthMismatch {
                preimage: preimage.len(),
                image: image.len(),
            });
        }
        if let Some(first) = image.first() {
            if let Some(bad) = image.iter().find(|p| p.dim() != first.dim()) {
                return Err(GeometryError::DimensionMismatch {
                    expected: first.dim(),
                    found: bad.dim(),
                });
            }
            if image.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                return Err(GeometryError::NonFinite);
            }
        }
        let region = validate_region(preimage, tol)?;
        Ok(Self {
            preimage: region.preimage,
            image,
        })
    }

    pub fn preimage(&self) -> &[Point] {
        &self.preimage
    }

    pub fn image(&self) -> &[Point] {
        &self.image
    }

    pub fn len(&self) -> usize {
        self.preimage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preimage.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.preimage[0].dim()
    }

    pub fn image_dim(&self) -> usize {
        self.image[0].dim()
    }

    pub fn centroid(&self) -> Point {
        Point::centroid(&self.preimage)
    }

    pub fn image_centroid(&self) -> Point {
        Point::centroid(&self.image)
    }

    pub(crate) fn image_mut(&mut self) -> &mut [Point] {
        &mut self.image
    }

    pub fn into_parts(self) -> (Vec<Point>, Vec<Point>) {
        (self.preimage, self.image)
    }

    /// Replaces every image vertex with `f(image)`.
    pub fn map_image(&mut self, mut f: impl FnMut(&Point) -> Point) {
        for p in &mut self.image {
            *p = f(p);
        }
    }

    pub fn frame(&self) -> Result<PlaneFrame> {
        PlaneFrame::from_points(&self.preimage)
    }

    pub fn area(&self) -> f64 {
        polygon_area(self).unwrap_or(0.0)
    }

    /// Rotates the vertex lists so the lexicographically smallest preimage
    /// vertex comes first. Orientation is unchanged.
    pub fn rotate_canonical(&mut self) {
        let start = (0..self.len())
            .min_by(|&a, &b| lex_cmp(&self.preimage[a], &self.preimage[b]))
            .unwrap_or(0);
        self.preimage.rotate_left(start);
        self.image.rotate_left(start);
    }

    /// Whether `p` lies inside the polygon, at least `margin` (in plane
    /// units) away from every edge. Negative margins accept points just
    /// outside. `p` is assumed to lie on the polygon's plane.
    pub fn contains(&self, p: &[f64], margin: f64) -> bool {
        let Ok(frame) = self.frame() else {
            return false;
        };
        let pts: Vec<(f64, f64)> = self.preimage.iter().map(|v| frame.project(v)).collect();
        let q = frame.project(p);
        let n = pts.len();
        (0..n).all(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            len == 0.0 || cross(a, b, q) / len >= margin
        })
    }

    /// Distance from `p` (on the polygon's plane) to the nearest edge line.
    pub fn boundary_distance(&self, p: &[f64]) -> f64 {
        let Ok(frame) = self.frame() else {
            return 0.0;
        };
        let pts: Vec<(f64, f64)> = self.preimage.iter().map(|v| frame.project(v)).collect();
        let q = frame.project(p);
        let n = pts.len();
        (0..n)
            .filter_map(|i| {
                let a = pts[i];
                let b = pts[(i + 1) % n];
                let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                (len > 0.0).then(|| (cross(a, b, q) / len).abs())
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Lexicographic order on coordinates using `total_cmp`.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Shoelace area of the preimage in its own plane coordinates.
pub fn polygon_area(r: &PlanarRegion) -> Result<f64> {
    let frame = match PlaneFrame::from_points(&r.preimage) {
        Ok(f) => f,
        Err(GeometryError::Collinear) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let scale = plane_scale(&r.preimage);
    let pts = project_all(&frame, &r.preimage, scale, 1e-6)?;
    Ok(shoelace(&pts).abs())
}

fn plane_scale(points: &[Point]) -> f64 {
    points.iter().map(|p| p.distance(&points[0])).fold(0.0, f64::max)
}

fn project_all(frame: &PlaneFrame, points: &[Point], scale: f64, eps: f64) -> Result<Vec<(f64, f64)>> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let distance = frame.offset_of(p);
            if distance > eps * scale.max(1.0) {
                Err(GeometryError::NonCoplanar { index, distance })
            } else {
                Ok(frame.project(p))
            }
        })
        .collect()
}

/// Checks a user-supplied vertex list and seeds it with the identity image.
pub fn validate_region(vertices: Vec<Point>, tol: &Tolerances) -> Result<PlanarRegion> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    let dim = vertices[0].dim();
    for p in &vertices {
        if p.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
    }
    for i in 0..n {
        if vertices[i].distance(&vertices[(i + 1) % n]) <= tol.vertex {
            return Err(GeometryError::RepeatedVertex((i + 1) % n));
        }
    }
    let frame = PlaneFrame::from_points(&vertices)?;
    let scale = plane_scale(&vertices);
    let pts = project_all(&frame, &vertices, scale, tol.coplanar)?;

    let signed = shoelace(&pts);
    if signed.abs() <= tol.area {
        return Err(GeometryError::Collinear);
    }
    let turns_left = (0..n).all(|i| {
        let (a, b, c) = (pts[i], pts[(i + 1) % n], pts[(i + 2) % n]);
        let la = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let lb = ((c.0 - b.0).powi(2) + (c.1 - b.1).powi(2)).sqrt();
        cross(a, b, c) * signed.signum() >= -1e-9 * la * lb
    });
    // Uniform turning is not enough (a pentagram turns uniformly); the
    // polygon must also enclose exactly its hull.
    let hull_area = shoelace(&hull(&pts));
    let simple = (hull_area - signed.abs()).abs() <= 1e-9 * hull_area.max(tol.area);
    if !(turns_left && simple) {
        return Err(GeometryError::NonConvex);
    }
    if signed < 0.0 {
        return Err(GeometryError::Clockwise);
    }
    let image = vertices.clone();
    Ok(PlanarRegion {
        preimage: vertices,
        image,
    })
}

/// Result of cutting a polygon with a hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitOutcome {
    /// `a` lies on the side of the first strictly-signed vertex, `b` opposite.
    Split { a: PlanarRegion, b: PlanarRegion },
    /// No pair of image vertices lies strictly on opposite sides.
    NoSplit,
    /// One side was degenerate and dropped; the other side is returned.
    Clamped(PlanarRegion),
}

/// Cuts `r` by `h`, where `h` lives in the image space of `r`.
///
/// Both the preimage and image lists are interpolated with the same factor,
/// so the pairing survives whenever the prefix is affine on `r`. Vertices on
/// the plane go to both halves.
pub fn split_by_plane(r: &PlanarRegion, h: &Hyperplane, tol: &Tolerances) -> Result<SplitOutcome> {
    let n = r.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    if r.image.len() != n {
        return Err(GeometryError::LengthMismatch {
            preimage: n,
            image: r.image.len(),
        });
    }
    if let Some(bad) = r.image.iter().find(|p| p.dim() != h.dim()) {
        return Err(GeometryError::DimensionMismatch {
            expected: h.dim(),
            found: bad.dim(),
        });
    }

    let residuals: Vec<f64> = r.image.iter().map(|p| h.residual(p)).collect();
    let signs: Vec<Sign> = r
        .image
        .iter()
        .zip(&residuals)
        .map(|(p, &res)| {
            if res.abs() <= h.band(p, tol.side) {
                Sign::Zero
            } else {
                Sign::of(res)
            }
        })
        .collect();
    let has_pos = signs.contains(&Sign::Positive);
    let has_neg = signs.contains(&Sign::Negative);
    if !(has_pos && has_neg) {
        return Ok(SplitOutcome::NoSplit);
    }

    let first = signs.iter().position(|s| s.is_strict()).unwrap_or(0);
    let side_a = signs[first];
    let mut a_pre = Vec::with_capacity(n + 2);
    let mut a_img = Vec::with_capacity(n + 2);
    let mut b_pre = Vec::with_capacity(n + 2);
    let mut b_img = Vec::with_capacity(n + 2);
    for step in 0..n {
        let k = (first + step) % n;
        let next = (k + 1) % n;
        let s = signs[k];
        if s != side_a.opposite() {
            a_pre.push(r.preimage[k].clone());
            a_img.push(r.image[k].clone());
        }
        if s != side_a {
            b_pre.push(r.preimage[k].clone());
            b_img.push(r.image[k].clone());
        }
        if s.is_strict() && signs[next] == s.opposite() {
            let t = (residuals[k] / (residuals[k] - residuals[next])).clamp(0.0, 1.0);
            let p_pre = r.preimage[k].lerp(&r.preimage[next], t);
            let p_img = r.image[k].lerp(&r.image[next], t);
            a_pre.push(p_pre.clone());
            a_img.push(p_img.clone());
            b_pre.push(p_pre);
            b_img.push(p_img);
        }
    }
    dedup_cyclic(&mut a_pre, &mut a_img, tol.vertex);
    dedup_cyclic(&mut b_pre, &mut b_img, tol.vertex);

    let frame = r.frame()?;
    let area_of = |pts: &[Point]| -> f64 {
        let proj: Vec<(f64, f64)> = pts.iter().map(|p| frame.project(p)).collect();
        shoelace(&proj).abs()
    };
    let a_ok = a_pre.len() >= 3 && area_of(&a_pre) > tol.area;
    let b_ok = b_pre.len() >= 3 && area_of(&b_pre) > tol.area;
    let a = PlanarRegion::from_parts_unchecked(a_pre, a_img);
    let b = PlanarRegion::from_parts_unchecked(b_pre, b_img);
    Ok(match (a_ok, b_ok) {
        (true, true) => SplitOutcome::Split { a, b },
        (true, false) => SplitOutcome::Clamped(a),
        (false, true) => SplitOutcome::Clamped(b),
        (false, false) => SplitOutcome::NoSplit,
    })
}

fn dedup_cyclic(pre: &mut Vec<Point>, img: &mut Vec<Point>, eps: f64) {
    let mut k = 0;
    while k < pre.len() && pre.len() > 1 {
        let next = (k + 1) % pre.len();
        if pre[k].distance(&pre[next]) <= eps {
            pre.remove(next);
            img.remove(next);
            if next < k {
                k -= 1;
            }
        } else {
            k += 1;
        }
    }
}
