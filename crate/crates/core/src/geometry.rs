//! Parametric curves, scenarios, needles and quadrature grids.
//!
//! All curves are closed, counterclockwise, C^2 smooth and evaluable at any
//! parameter `t` in `[0, 2pi)`. Boundary grids are equispaced in parameter
//! with trapezoidal weights, which is spectrally accurate on smooth closed
//! curves.

use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};

/// Density used for polygonal predicates (containment, distances).
const DENSE_SAMPLES: usize = 1024;

/// Points closer to a curve than this are ambiguous for containment tests.
pub const DEGENERATE_DIST: f64 = 1e-12;

/// Minimum needle segment length, relative to the domain diameter.
const MIN_SEGMENT_REL: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// A closed smooth parametric curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Curve {
    Circle {
        center: Point,
        radius: f64,
    },
    Ellipse {
        center: Point,
        a: f64,
        b: f64,
    },
    /// The standard smooth kite: `center + s (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`.
    Kite {
        center: Point,
        scale: f64,
    },
    /// Closed trigonometric interpolation through sample points (kept as
    /// Fourier coefficients of x(t), y(t)).
    PolylineSmooth {
        cx: Vec<f64>,
        sx: Vec<f64>,
        cy: Vec<f64>,
        sy: Vec<f64>,
    },
}

impl Curve {
    pub fn circle(center: Point, radius: f64) -> Self {
        Curve::Circle { center, radius }
    }

    pub fn ellipse(center: Point, a: f64, b: f64) -> Self {
        Curve::Ellipse { center, a, b }
    }

    pub fn kite(center: Point, scale: f64) -> Self {
        Curve::Kite { center, scale }
    }

    /// Smooth closed curve through `points` (trigonometric interpolation of
    /// the coordinate sequences; `points.len() >= 8`).
    pub fn polyline_smooth(points: &[Point]) -> Result<Self> {
        if points.len() < 8 {
            return Err(Error::Config(
                "polyline-smooth needs at least 8 points".into(),
            ));
        }
        let n = points.len();
        let modes = (n - 1) / 2;
        let dft = |val: &dyn Fn(usize) -> f64| -> (Vec<f64>, Vec<f64>) {
            let mut c = vec![0.0; modes + 1];
            let mut s = vec![0.0; modes + 1];
            for m in 0..=modes {
                let mut cm = 0.0;
                let mut sm = 0.0;
                for (j, _) in (0..n).enumerate() {
                    let t = std::f64::consts::TAU * j as f64 / n as f64;
                    cm += val(j) * (m as f64 * t).cos();
                    sm += val(j) * (m as f64 * t).sin();
                }
                let norm = if m == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
                c[m] = cm * norm;
                s[m] = sm * norm;
            }
            (c, s)
        };
        let (cx, sx) = dft(&|j| points[j].x);
        let (cy, sy) = dft(&|j| points[j].y);
        Ok(Curve::PolylineSmooth { cx, sx, cy, sy })
    }

    /// Position at parameter `t`.
    pub fn point(&self, t: f64) -> Point {
        match self {
            Curve::Circle { center, radius } => {
                *center + Point::new(radius * t.cos(), radius * t.sin())
            }
            Curve::Ellipse { center, a, b } => *center + Point::new(a * t.cos(), b * t.sin()),
            Curve::Kite { center, scale } => {
                *center
                    + Point::new(
                        scale * (t.cos() + 0.65 * (2.0 * t).cos() - 0.65),
                        scale * 1.5 * t.sin(),
                    )
            }
            Curve::PolylineSmooth { cx, sx, cy, sy } => {
                let mut p = Point::new(0.0, 0.0);
                for m in 0..cx.len() {
                    let (c, s) = ((m as f64 * t).cos(), (m as f64 * t).sin());
                    p.x += cx[m] * c + sx[m] * s;
                    p.y += cy[m] * c + sy[m] * s;
                }
                p
            }
        }
    }

    /// Parameter derivative `gamma'(t)`.
    pub fn tangent(&self, t: f64) -> Point {
        match self {
            Curve::Circle { radius, .. } => Point::new(-radius * t.sin(), radius * t.cos()),
            Curve::Ellipse { a, b, .. } => Point::new(-a * t.sin(), b * t.cos()),
            Curve::Kite { scale, .. } => Point::new(
                scale * (-t.sin() - 1.3 * (2.0 * t).sin()),
                scale * 1.5 * t.cos(),
            ),
            Curve::PolylineSmooth { cx, sx, cy, sy } => {
                let mut d = Point::new(0.0, 0.0);
                for m in 1..cx.len() {
                    let mf = m as f64;
                    let (c, s) = ((mf * t).cos(), (mf * t).sin());
                    d.x += -cx[m] * mf * s + sx[m] * mf * c;
                    d.y += -cy[m] * mf * s + sy[m] * mf * c;
                }
                d
            }
        }
    }

    /// Unit outward normal (curves are counterclockwise).
    pub fn normal(&self, t: f64) -> Point {
        let d = self.tangent(t);
        Point::new(d.y, -d.x).normalized()
    }

    /// Second parameter derivative `gamma''(t)`.
    pub fn second_derivative(&self, t: f64) -> Point {
        match self {
            Curve::Circle { radius, .. } => Point::new(-radius * t.cos(), -radius * t.sin()),
            Curve::Ellipse { a, b, .. } => Point::new(-a * t.cos(), -b * t.sin()),
            Curve::Kite { scale, .. } => Point::new(
                scale * (-t.cos() - 2.6 * (2.0 * t).cos()),
                -scale * 1.5 * t.sin(),
            ),
            Curve::PolylineSmooth { cx, sx, cy, sy } => {
                let mut d = Point::new(0.0, 0.0);
                for m in 1..cx.len() {
                    let m2 = (m * m) as f64;
                    let (c, s) = ((m as f64 * t).cos(), (m as f64 * t).sin());
                    d.x += -cx[m] * m2 * c - sx[m] * m2 * s;
                    d.y += -cy[m] * m2 * c - sy[m] * m2 * s;
                }
                d
            }
        }
    }

    /// Radius of curvature at parameter `t`.
    pub fn curvature_radius(&self, t: f64) -> f64 {
        let d1 = self.tangent(t);
        let d2 = self.second_derivative(t);
        let num = (d1.x * d2.y - d1.y * d2.x).abs();
        if num < 1e-14 {
            f64::INFINITY
        } else {
            d1.norm().powi(3) / num
        }
    }

    /// Smallest radius of curvature along the curve (dense scan).
    pub fn min_curvature_radius(&self) -> f64 {
        let n = 2048;
        let mut best = f64::INFINITY;
        for j in 0..n {
            let t = std::f64::consts::TAU * j as f64 / n as f64;
            let d1 = self.tangent(t);
            let d2 = self.second_derivative(t);
            let num = (d1.x * d2.y - d1.y * d2.x).abs();
            if num > 1e-14 {
                best = best.min(d1.norm().powi(3) / num);
            }
        }
        best
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.tangent(t).norm()
    }

    /// Arclength-weighted centroid of the boundary.
    pub fn centroid(&self) -> Point {
        let m = 512;
        let mut acc = Point::new(0.0, 0.0);
        let mut len = 0.0;
        for j in 0..m {
            let t = std::f64::consts::TAU * j as f64 / m as f64;
            let w = self.speed(t);
            acc = acc + self.point(t) * w;
            len += w;
        }
        acc * (1.0 / len)
    }

    /// Diameter (max pairwise distance over a dense sample).
    pub fn diameter(&self) -> f64 {
        let pts = self.dense_polyline(256);
        let mut best = 0.0_f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                best = best.max(pts[i].dist(pts[j]));
            }
        }
        best
    }

    /// Dense polygonization at `n` parameters.
    pub fn dense_polyline(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|j| self.point(std::f64::consts::TAU * j as f64 / n as f64))
            .collect()
    }

    /// Distance from `p` to the curve (via dense polygonization with segment
    /// projection; accurate to O(h^2) curvature terms, h = perimeter/1024).
    pub fn distance_to_point(&self, p: Point) -> f64 {
        let pts = self.dense_polyline(DENSE_SAMPLES);
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            let q = point_segment_distance(p, pts[i], pts[(i + 1) % pts.len()]);
            best = best.min(q);
        }
        best
    }

    /// Distance from `p` to the curve itself (parameter refinement on the
    /// tangency condition; exact for on-curve points, unlike the chord
    /// version above).
    pub fn distance_to_point_exact(&self, p: Point) -> f64 {
        let n = 2048;
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..n {
            let t = std::f64::consts::TAU * j as f64 / n as f64;
            let d = self.point(t).dist(p);
            if d < best.0 {
                best = (d, t);
            }
        }
        // secant iterations on g(t) = (gamma(t) - p) . gamma'(t)
        let g = |t: f64| (self.point(t) - p).dot(self.tangent(t));
        let h = std::f64::consts::TAU / n as f64;
        let (mut t0, mut t1) = (best.1 - 0.5 * h, best.1 + 0.5 * h);
        let (mut g0, mut g1) = (g(t0), g(t1));
        for _ in 0..60 {
            if (g1 - g0).abs() < 1e-300 {
                break;
            }
            let t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
            if !t2.is_finite() || (t2 - t1).abs() < 1e-16 {
                t1 = t2.is_finite().then_some(t2).unwrap_or(t1);
                break;
            }
            t0 = t1;
            g0 = g1;
            t1 = t2;
            g1 = g(t1);
        }
        self.point(t1).dist(p).min(best.0)
    }

    /// Minimum distance between two curves.
    pub fn distance_to_curve(&self, other: &Curve) -> f64 {
        let a = self.dense_polyline(512);
        let b = other.dense_polyline(512);
        let mut best = f64::INFINITY;
        for p in &a {
            for i in 0..b.len() {
                best = best.min(point_segment_distance(*p, b[i], b[(i + 1) % b.len()]));
            }
        }
        best
    }
}

/// Winding-number containment test. Errors for points within
/// [`DEGENERATE_DIST`] of the curve.
pub fn contains(curve: &Curve, p: Point) -> Result<bool> {
    let d = curve.distance_to_point(p);
    if d <= DEGENERATE_DIST {
        return Err(Error::DegeneratePoint { x: p.x, y: p.y, dist: d });
    }
    Ok(winding_number(curve, p, 0.0) == 1)
}

/// Signed winding number of the curve about `p`, summing angle increments of
/// the dense polygonization starting at parameter offset `t0`.
pub fn winding_number(curve: &Curve, p: Point, t0: f64) -> i32 {
    let n = 2048;
    let mut total = 0.0;
    let mut prev = curve.point(t0) - p;
    for j in 1..=n {
        let t = t0 + std::f64::consts::TAU * j as f64 / n as f64;
        let cur = curve.point(t) - p;
        let cross = prev.x * cur.y - prev.y * cur.x;
        let dot = prev.dot(cur);
        total += cross.atan2(dot);
        prev = cur;
    }
    (total / std::f64::consts::TAU).round() as i32
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

// ---------------------------------------------------------------------------
// Boundary grids
// ---------------------------------------------------------------------------

/// Equispaced-in-parameter quadrature grid on a curve (trapezoidal rule).
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    pub nodes: Vec<Point>,
    pub normals: Vec<Point>,
    /// Quadrature weights `(2pi/M) |gamma'(t_j)|`; they sum to the perimeter.
    pub weights: Vec<f64>,
    pub params: Vec<f64>,
    pub parent: Curve,
    pub m: usize,
}

impl BoundaryGrid {
    /// Trapezoidal boundary integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Discretize a curve with `m` nodes (`m >= 16`, even).
pub fn discretize_curve(curve: &Curve, m: usize) -> Result<BoundaryGrid> {
    if m < 16 || m % 2 != 0 {
        return Err(Error::Config(format!(
            "boundary grid needs an even node count >= 16, got {m}"
        )));
    }
    let h = std::f64::consts::TAU / m as f64;
    let mut nodes = Vec::with_capacity(m);
    let mut normals = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    let mut params = Vec::with_capacity(m);
    for j in 0..m {
        let t = h * j as f64;
        nodes.push(curve.point(t));
        normals.push(curve.normal(t));
        weights.push(h * curve.speed(t));
        params.push(t);
    }
    Ok(BoundaryGrid { nodes, normals, weights, params, parent: curve.clone(), m })
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// Physical boundary condition carried by an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// Choice of singular-solution family: free-space (`G0`) or the Dirichlet
/// Green function of the domain (`Gstar`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    G0,
    Gstar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Obstacle {
    pub curve: Curve,
    pub bc: Bc,
}

/// A domain with tagged obstacles, a wavenumber and a family choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub domain: Curve,
    pub obstacles: Vec<Obstacle>,
    pub k: f64,
    pub family: Family,
    /// Minimum admissible gap between boundary components, as a fraction of
    /// the domain diameter.
    pub min_gap_rel: f64,
}

impl Scenario {
    pub fn new(domain: Curve, obstacles: Vec<Obstacle>, k: f64, family: Family) -> Self {
        Scenario { domain, obstacles, k, family, min_gap_rel: 0.05 }
    }

    pub fn diameter(&self) -> f64 {
        self.domain.diameter()
    }

    /// Distance from `p` to the union of obstacle boundaries (infinite when
    /// there are none).
    pub fn distance_to_obstacles(&self, p: Point) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.curve.distance_to_point(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// True if `p` lies inside the domain and outside every obstacle closure.
    pub fn in_exterior(&self, p: Point) -> Result<bool> {
        if !contains(&self.domain, p)? {
            return Ok(false);
        }
        for o in &self.obstacles {
            if contains(&o.curve, p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// SHA-256 fingerprint of the scenario (canonical JSON serialization).
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(16);
        for b in digest.iter().take(8) {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Gap diagnostics from [`validate_scenario`].
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioDiagnostics {
    /// (component pair label, gap) for every obstacle-domain and
    /// obstacle-obstacle pair.
    pub gaps: Vec<(String, f64)>,
    pub min_gap_required: f64,
}

/// Check pairwise disjointness and strict containment in the domain.
pub fn validate_scenario(s: &Scenario) -> Result<ScenarioDiagnostics> {
    let min_gap = s.min_gap_rel * s.diameter();
    let mut gaps = Vec::new();
    for (i, o) in s.obstacles.iter().enumerate() {
        // every obstacle point strictly inside the domain
        for p in o.curve.dense_polyline(256) {
            if !contains(&s.domain, p)? {
                return Err(Error::InvalidScenario(format!(
                    "obstacle {i} is not strictly inside the domain"
                )));
            }
        }
        let gap = s.domain.distance_to_curve(&o.curve);
        if gap < min_gap {
            return Err(Error::InvalidScenario(format!(
                "obstacle {i} too close to the domain boundary: gap {gap:.4} < {min_gap:.4}"
            )));
        }
        gaps.push((format!("obstacle {i} / domain"), gap));
    }
    for i in 0..s.obstacles.len() {
        for j in (i + 1)..s.obstacles.len() {
            // disjoint closures: no sampled point of one inside the other
            let a = &s.obstacles[i].curve;
            let b = &s.obstacles[j].curve;
            for p in b.dense_polyline(128) {
                if contains(a, p).unwrap_or(true) {
                    return Err(Error::InvalidScenario(format!(
                        "obstacles {i} and {j} overlap"
                    )));
                }
            }
            let gap = a.distance_to_curve(b);
            if gap < min_gap {
                return Err(Error::InvalidScenario(format!(
                    "obstacles {i} and {j} too close: gap {gap:.4} < {min_gap:.4}"
                )));
            }
            gaps.push((format!("obstacle {i} / obstacle {j}"), gap));
        }
    }
    Ok(ScenarioDiagnostics { gaps, min_gap_required: min_gap })
}

// ---------------------------------------------------------------------------
// Needles
// ---------------------------------------------------------------------------

/// A non-self-intersecting polyline from a point on the domain boundary to a
/// tip inside the domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Needle {
    pub vertices: Vec<Point>,
}

impl Needle {
    pub fn tip(&self) -> Point {
        *self.vertices.last().expect("needle has vertices")
    }

    pub fn entry(&self) -> Point {
        self.vertices[0]
    }

    pub fn length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| w[0].dist(w[1]))
            .sum()
    }

    /// Exact Euclidean distance from `p` to the polyline.
    pub fn distance_to_point(&self, p: Point) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the tip.
    pub fn distance_to_tip(&self, p: Point) -> f64 {
        p.dist(self.tip())
    }

    /// Validate against a domain: entry on the boundary (within 1e-10),
    /// interior vertices strictly inside, no self-intersections, segments
    /// not shorter than `1e-3 x diameter`.
    pub fn validate(&self, domain: &Curve) -> Result<()> {
        if self.vertices.len() < 2 {
            return Err(Error::Needle("needle needs at least two vertices".into()));
        }
        let d_entry = domain.distance_to_point_exact(self.entry());
        if d_entry > 1e-10 {
            return Err(Error::Needle(format!(
                "first vertex must lie on the domain boundary (distance {d_entry:.3e})"
            )));
        }
        for (i, v) in self.vertices.iter().enumerate().skip(1) {
            if !contains(domain, *v)? {
                return Err(Error::Needle(format!(
                    "vertex {i} at ({}, {}) is not strictly inside the domain",
                    v.x, v.y
                )));
            }
        }
        let min_seg = MIN_SEGMENT_REL * domain.diameter();
        for w in self.vertices.windows(2) {
            if w[0].dist(w[1]) < min_seg {
                return Err(Error::Needle(format!(
                    "segment shorter than {min_seg:.3e}"
                )));
            }
        }
        // pairwise segment intersection, skipping adjacent segments
        let segs: Vec<(Point, Point)> = self
            .vertices
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect();
        for i in 0..segs.len() {
            for j in (i + 2)..segs.len() {
                if segments_intersect(segs[i], segs[j]) {
                    return Err(Error::Needle(format!(
                        "segments {i} and {j} intersect"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn segments_intersect(a: (Point, Point), b: (Point, Point)) -> bool {
    let orient = |p: Point, q: Point, r: Point| {
        let v = (q - p).x * (r - p).y - (q - p).y * (r - p).x;
        if v.abs() < 1e-14 {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let (p1, p2) = a;
    let (q1, q2) = b;
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);
    o1 != o2 && o3 != o4
}
