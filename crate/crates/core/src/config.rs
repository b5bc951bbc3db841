//! Scenario configuration files: a human-editable TOML tree describing the
//! domain, the tagged obstacles, the wavenumber and family, plus optional
//! discretization / needle / grid overrides and explicit needle specs.

use crate::forward::DiscretizationParams;
use crate::geometry::{Bc, Curve, Family, Needle, Obstacle, Scenario};
use crate::indicator::GridSpec;
use crate::needles::{build_needle, NeedleEntry, NeedleSequenceParams};
use crate::{Error, Point, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub k: f64,
    /// `"G0"` or `"Gstar"`.
    #[serde(default = "default_family")]
    pub family: String,
    pub domain: CurveSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default)]
    pub discretization: DiscretizationOverrides,
    #[serde(default)]
    pub needle: NeedleOverrides,
    #[serde(default)]
    pub grid: Option<GridOverrides>,
    /// Optional explicit needles (tip + entry angle, or vertex polyline).
    #[serde(default)]
    pub needles: Vec<NeedleSpec>,
}

fn default_family() -> String {
    "G0".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: String,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub params: Vec<f64>,
    /// Only for `kind = "polyline-smooth"`.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(flatten)]
    pub curve: CurveSpec,
    pub bc: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationSpec {
    /// Minimum component gap relative to the domain diameter.
    pub min_gap: f64,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec { min_gap: 0.05 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiscretizationOverrides {
    pub boundary_nodes: Option<usize>,
    pub sources_per_component: Option<usize>,
    pub offset_rel: Option<f64>,
    pub svd_rel_cutoff: Option<f64>,
    pub trace_order: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NeedleOverrides {
    pub orders: Option<Vec<usize>>,
    pub tube_radius_rel: Option<f64>,
    pub alpha0: Option<f64>,
    pub alpha_floor: Option<f64>,
    pub convergence_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridOverrides {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeedleSpec {
    #[serde(default)]
    pub tip: Option<[f64; 2]>,
    #[serde(default)]
    pub entry_angle: Option<f64>,
    #[serde(default)]
    pub vertices: Vec<[f64; 2]>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let family = match self.family.as_str() {
            "G0" => Family::G0,
            "Gstar" => Family::Gstar,
            other => {
                return Err(Error::Config(format!(
                    "unknown family `{other}` (expected G0 or Gstar)"
                )))
            }
        };
        if self.k < 0.0 {
            return Err(Error::Config("wavenumber must be nonnegative".into()));
        }
        let domain = curve_from_spec(&self.domain)?;
        let mut obstacles = Vec::new();
        for o in &self.obstacles {
            let bc = match o.bc.as_str() {
                "dirichlet" => Bc::Dirichlet,
                "neumann" => Bc::Neumann,
                other => {
                    return Err(Error::Config(format!(
                        "unknown boundary condition `{other}`"
                    )))
                }
            };
            obstacles.push(Obstacle { curve: curve_from_spec(&o.curve)?, bc });
        }
        let mut s = Scenario::new(domain, obstacles, self.k, family);
        s.min_gap_rel = self.validation.min_gap;
        Ok(s)
    }

    pub fn discretization_params(&self) -> DiscretizationParams {
        let mut p = DiscretizationParams::default();
        let o = &self.discretization;
        if let Some(v) = o.boundary_nodes {
            p.boundary_nodes = v;
        }
        if let Some(v) = o.sources_per_component {
            p.sources_per_component = v;
        }
        if let Some(v) = o.offset_rel {
            p.offset_rel = v;
        }
        if let Some(v) = o.svd_rel_cutoff {
            p.svd_rel_cutoff = v;
        }
        if let Some(v) = o.trace_order {
            p.trace_order = v;
        }
        p
    }

    pub fn needle_params(&self, family: Family) -> NeedleSequenceParams {
        let mut p = NeedleSequenceParams { family, ..Default::default() };
        let o = &self.needle;
        if let Some(v) = &o.orders {
            p.orders = v.clone();
            p.max_order = p.max_order.max(*v.iter().max().unwrap_or(&p.max_order));
        }
        if let Some(v) = o.tube_radius_rel {
            p.tube_radius_rel = v;
        }
        if let Some(v) = o.alpha0 {
            p.alpha0 = v;
        }
        if let Some(v) = o.alpha_floor {
            p.alpha_floor = v;
        }
        if let Some(v) = o.convergence_tol {
            p.convergence_tol = v;
        }
        p
    }

    pub fn grid_spec(&self) -> GridSpec {
        let mut g = GridSpec::default();
        if let Some(o) = &self.grid {
            if let Some(v) = o.nx {
                g.nx = v;
            }
            if let Some(v) = o.ny {
                g.ny = v;
            }
            if let Some(v) = o.margin {
                g.margin = v;
            }
        }
        g
    }

    /// Build and validate the explicit needles listed in the file.
    pub fn explicit_needles(&self, scenario: &Scenario) -> Result<Vec<Needle>> {
        let mut out = Vec::new();
        for spec in &self.needles {
            let needle = if !spec.vertices.is_empty() {
                let verts: Vec<Point> =
                    spec.vertices.iter().map(|v| Point::new(v[0], v[1])).collect();
                let tip = *verts.last().unwrap();
                build_needle(&scenario.domain, tip, NeedleEntry::Vertices(verts))?
            } else {
                let tip = spec
                    .tip
                    .ok_or_else(|| Error::Config("needle spec needs a tip or vertices".into()))?;
                let angle = spec
                    .entry_angle
                    .ok_or_else(|| Error::Config("needle spec needs entry_angle".into()))?;
                build_needle(
                    &scenario.domain,
                    Point::new(tip[0], tip[1]),
                    NeedleEntry::Angle(angle),
                )?
            };
            out.push(needle);
        }
        Ok(out)
    }
}

fn curve_from_spec(spec: &CurveSpec) -> Result<Curve> {
    let c = Point::new(spec.center[0], spec.center[1]);
    match spec.kind.as_str() {
        "circle" => {
            let r = *spec
                .params
                .first()
                .ok_or_else(|| Error::Config("circle needs params = [radius]".into()))?;
            if r <= 0.0 {
                return Err(Error::Config("circle radius must be positive".into()));
            }
            Ok(Curve::circle(c, r))
        }
        "ellipse" => {
            if spec.params.len() < 2 {
                return Err(Error::Config("ellipse needs params = [a, b]".into()));
            }
            let (a, b) = (spec.params[0], spec.params[1]);
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::Config("ellipse radii must be positive".into()));
            }
            Ok(Curve::ellipse(c, a, b))
        }
        "kite" => {
            let s = *spec
                .params
                .first()
                .ok_or_else(|| Error::Config("kite needs params = [scale]".into()))?;
            if s <= 0.0 {
                return Err(Error::Config("kite scale must be positive".into()));
            }
            Ok(Curve::kite(c, s))
        }
        "polyline-smooth" => {
            let pts: Vec<Point> = spec.points.iter().map(|p| Point::new(p[0], p[1])).collect();
            Curve::polyline_smooth(&pts)
        }
        other => Err(Error::Config(format!("unknown curve kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S2: &str = r#"
k = 0.8
family = "G0"

[domain]
kind = "circle"
center = [0.0, 0.0]
params = [1.0]

[[obstacles]]
kind = "circle"
center = [-0.4, 0.0]
params = [0.25]
bc = "neumann"

[[obstacles]]
kind = "kite"
center = [0.4, 0.0]
params = [0.15]
bc = "dirichlet"

[validation]
min_gap = 0.05

[[needles]]
tip = [0.0, -0.5]
entry_angle = -1.5707963267948966
"#;

    #[test]
    fn parses_two_obstacle_scenario() {
        let file = ScenarioFile::parse(S2).unwrap();
        let s = file.to_scenario().unwrap();
        assert_eq!(s.obstacles.len(), 2);
        assert_eq!(s.obstacles[0].bc, Bc::Neumann);
        assert_eq!(s.obstacles[1].bc, Bc::Dirichlet);
        assert_eq!(s.k, 0.8);
        crate::geometry::validate_scenario(&s).unwrap();
        let needles = file.explicit_needles(&s).unwrap();
        assert_eq!(needles.len(), 1);
        assert!((needles[0].tip().y + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_kind_and_bc() {
        let bad_kind = S2.replace("kind = \"kite\"", "kind = \"pentagon\"");
        assert!(ScenarioFile::parse(&bad_kind).unwrap().to_scenario().is_err());
        let bad_bc = S2.replace("bc = \"neumann\"", "bc = \"robin\"");
        assert!(ScenarioFile::parse(&bad_bc).unwrap().to_scenario().is_err());
    }

    #[test]
    fn overrides_apply() {
        let text = format!(
            "{S2}\n[discretization]\ntrace_order = 12\n\n[needle]\norders = [5, 10]\n\n[grid]\nnx = 10\nny = 12\n"
        );
        let file = ScenarioFile::parse(&text).unwrap();
        assert_eq!(file.discretization_params().trace_order, 12);
        assert_eq!(file.needle_params(Family::G0).orders, vec![5, 10]);
        let g = file.grid_spec();
        assert_eq!((g.nx, g.ny), (10, 12));
    }
}
