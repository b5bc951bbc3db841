//! Reconstruction and classification of mixed sound-hard / sound-soft obstacles
//! inside a bounded 2D domain from boundary Dirichlet-to-Neumann data.
//!
//! The crate synthesizes discrete Dirichlet-to-Neumann maps for interior
//! Helmholtz problems with per-component Dirichlet or Neumann conditions
//! (method of fundamental solutions on smooth parametric curves), builds
//! needle sequences of entire Helmholtz solutions by regularized least
//! squares, and evaluates the probe / singular-sources indicator machinery:
//! the indicator sequence and its limit, energy decompositions, the lifted
//! indicator, and grid classification into Neumann-near / Dirichlet-near /
//! background regions.
//!
//! Everything is real-valued and two-dimensional: the fundamental solution
//! is `-Y0(kr)/4` for `k > 0` and `-ln(r)/2pi` for `k = 0`.

pub mod basis;
pub mod bessel;
pub mod config;
pub mod forward;
pub mod geometry;
pub mod identities;
pub mod indicator;
pub mod linalg;
pub mod needles;
pub mod quadrature;
pub mod suite;
pub mod trace;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("point ({x}, {y}) is degenerate: within {dist:.3e} of a curve")]
    DegeneratePoint { x: f64, y: f64, dist: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("solver did not converge on component `{component}`: residual {residual:.3e} exceeds {limit:.3e}")]
    Nonconvergence {
        component: String,
        residual: f64,
        limit: f64,
    },

    #[error("near interior eigenvalue: solution amplification {amplification:.3e} exceeds {limit:.3e}")]
    NearInteriorEigenvalue { amplification: f64, limit: f64 },

    #[error("annulus resonance at mode {mode}: denominator {denominator:.3e}")]
    Resonance { mode: usize, denominator: f64 },

    #[error("needle-sequence approximation failed: residual {residual:.3e} at maximum order {order}")]
    ApproximationFailure { residual: f64, order: usize },

    #[error("invalid needle: {0}")]
    Needle(String),

    #[error("probe point too close to a boundary: distance {distance:.3e} < {minimum:.3e}")]
    Proximity { distance: f64, minimum: f64 },

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotate by +90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        Point::new(self.x / n, self.y / n)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl std::ops::Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}
