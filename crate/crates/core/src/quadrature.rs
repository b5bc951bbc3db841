//! Quadrature rules: Gauss-Legendre on an interval and tensor-product rules
//! on disks and circular sectors (used for gradient energies over probe
//! regions; everything else in the crate reduces to boundary integrals).

use crate::Point;

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre
/// recurrence; accurate to machine precision for n <= 128).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial value and derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A planar region with a tensor-product quadrature: full disk or a sector
/// of an annulus (radii `[r0, r1]`, angles `[a0, a1]`).
#[derive(Debug, Clone)]
pub enum Region {
    Disk { center: Point, radius: f64 },
    Sector { center: Point, r0: f64, r1: f64, a0: f64, a1: f64 },
}

impl Region {
    /// Quadrature nodes and weights for `\int_R f dA`: Gauss-Legendre in
    /// radius (with the `r dr` Jacobian folded in) times a uniform angular
    /// rule (trapezoid on the full circle, Gauss on a sector).
    pub fn quadrature(&self, n_rad: usize, n_ang: usize) -> (Vec<Point>, Vec<f64>) {
        match *self {
            Region::Disk { center, radius } => {
                tensor_rule(center, 0.0, radius, 0.0, std::f64::consts::TAU, true, n_rad, n_ang)
            }
            Region::Sector { center, r0, r1, a0, a1 } => {
                tensor_rule(center, r0, r1, a0, a1, false, n_rad, n_ang)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Region::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Region::Sector { r0, r1, a0, a1, .. } => 0.5 * (r1 * r1 - r0 * r0) * (a1 - a0),
        }
    }
}

fn tensor_rule(
    center: Point,
    r0: f64,
    r1: f64,
    a0: f64,
    a1: f64,
    periodic: bool,
    n_rad: usize,
    n_ang: usize,
) -> (Vec<Point>, Vec<f64>) {
    let (gn, gw) = gauss_legendre(n_rad);
    let radii: Vec<(f64, f64)> = gn
        .iter()
        .zip(&gw)
        .map(|(&t, &w)| {
            let r = 0.5 * (r1 + r0) + 0.5 * (r1 - r0) * t;
            (r, w * 0.5 * (r1 - r0) * r)
        })
        .collect();
    let angles: Vec<(f64, f64)> = if periodic {
        let h = (a1 - a0) / n_ang as f64;
        (0..n_ang).map(|i| (a0 + i as f64 * h, h)).collect()
    } else {
        let (an, aw) = gauss_legendre(n_ang);
        an.iter()
            .zip(&aw)
            .map(|(&t, &w)| (0.5 * (a1 + a0) + 0.5 * (a1 - a0) * t, w * 0.5 * (a1 - a0)))
            .collect()
    };
    let mut pts = Vec::with_capacity(n_rad * n_ang);
    let mut wts = Vec::with_capacity(n_rad * n_ang);
    for &(r, wr) in &radii {
        for &(a, wa) in &angles {
            pts.push(center + Point::new(r * a.cos(), r * a.sin()));
            wts.push(wr * wa);
        }
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (n, w) = gauss_legendre(8);
        // degree-15 monomial is exact for an 8-point rule
        let int: f64 = n.iter().zip(&w).map(|(&x, &wi)| wi * x.powi(14)).sum();
        assert_abs_diff_eq!(int, 2.0 / 15.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn disk_rule_recovers_area_and_moments() {
        let region = Region::Disk { center: Point::new(0.3, -0.1), radius: 0.7 };
        let (pts, wts) = region.quadrature(16, 32);
        let area: f64 = wts.iter().sum();
        assert_abs_diff_eq!(area, region.area(), epsilon = 1e-12);
        // integral of (x - cx)^2 over disk = pi R^4 / 4
        let mom: f64 = pts
            .iter()
            .zip(&wts)
            .map(|(p, &w)| w * (p.x - 0.3) * (p.x - 0.3))
            .sum();
        assert_abs_diff_eq!(mom, std::f64::consts::PI * 0.7f64.powi(4) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn sector_rule_recovers_area() {
        let region = Region::Sector {
            center: Point::new(0.0, 0.0),
            r0: 0.2,
            r1: 0.5,
            a0: 0.3,
            a1: 1.1,
        };
        let (_, wts) = region.quadrature(12, 12);
        let area: f64 = wts.iter().sum();
        assert_abs_diff_eq!(area, region.area(), epsilon = 1e-13);
    }
}
