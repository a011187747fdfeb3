//! Convex domains: intervals, axis-aligned rectangles, and convex polygons,
//! with the boundary radial function, scaling, and separation of scaled
//! copies.
//!
//! All geometric operations work in coordinates centered at the domain's
//! center point. Only convex shapes are representable: star-shaped sets that
//! are not convex (a disk with a protruding sector glued on, or a disk with a
//! radial slit removed) can have a discontinuous boundary radial function and
//! are intentionally not supported as inputs.

use crate::error::{invalid, Result};

const DIR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// 1D closed interval `[a, b]`.
    Interval { a: f64, b: f64 },
    /// Axis-aligned rectangle.
    Rect { min: [f64; 2], max: [f64; 2] },
    /// Convex polygon, vertices in counterclockwise order.
    Polygon { vertices: Vec<[f64; 2]> },
}

/// A bounded convex domain with a designated interior center point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain {
    shape: Shape,
    center: [f64; 2],
}

impl ConvexDomain {
    pub fn interval(a: f64, b: f64, center: f64) -> Result<Self> {
        if !(a < b) {
            return Err(invalid("interval must satisfy a < b"));
        }
        if !(a < center && center < b) {
            return Err(invalid("center must be strictly inside the interval"));
        }
        Ok(ConvexDomain {
            shape: Shape::Interval { a, b },
            center: [center, 0.0],
        })
    }

    pub fn rect(min: [f64; 2], max: [f64; 2], center: [f64; 2]) -> Result<Self> {
        if !(min[0] < max[0] && min[1] < max[1]) {
            return Err(invalid("rectangle must have positive extent"));
        }
        let strictly_inside = center[0] > min[0]
            && center[0] < max[0]
            && center[1] > min[1]
            && center[1] < max[1];
        if !strictly_inside {
            return Err(invalid("center must be strictly inside the rectangle"));
        }
        Ok(ConvexDomain {
            shape: Shape::Rect { min, max },
            center,
        })
    }

    /// Convex polygon with counterclockwise vertices.
    pub fn polygon(vertices: Vec<[f64; 2]>, center: [f64; 2]) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(invalid("polygon needs at least 3 vertices"));
        }
        let n = vertices.len();
        let mut scale: f64 = 0.0;
        for v in &vertices {
            scale = scale.max(v[0].abs()).max(v[1].abs());
        }
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let r = vertices[(i + 2) % n];
            let cross = (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0]);
            if cross <= scale * scale * 1e-12 {
                return Err(invalid(
                    "vertices must describe a strictly convex counterclockwise polygon",
                ));
            }
        }
        let dom = ConvexDomain {
            shape: Shape::Polygon { vertices },
            center,
        };
        if !dom.contains_strict(center) {
            return Err(invalid("center must be strictly inside the polygon"));
        }
        Ok(dom)
    }

    /// Regular n-gon of circumradius `r` centered at the origin.
    pub fn regular_polygon(sides: usize, r: f64) -> Result<Self> {
        if sides < 3 || !(r > 0.0) {
            return Err(invalid("need at least 3 sides and positive radius"));
        }
        let vertices = (0..sides)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        ConvexDomain::polygon(vertices, [0.0, 0.0])
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Strict interior membership in centered coordinates is tested against
    /// the radial function; this helper uses original coordinates.
    pub fn contains_strict(&self, p: [f64; 2]) -> bool {
        match &self.shape {
            Shape::Interval { a, b } => p[0] > *a && p[0] < *b,
            Shape::Rect { min, max } => {
                p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1]
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 0.0
                })
            }
        }
    }

    /// Boundary distance from the center along a unit direction:
    /// `lambda(u) = sup { r >= 0 : center + r*u  inside }`.
    ///
    /// The direction must be unit length to 1e-12. Continuous in the
    /// direction for every representable (convex) domain.
    pub fn radial(&self, dir: [f64; 2]) -> Result<f64> {
        let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        if (norm - 1.0).abs() > DIR_TOL {
            return Err(invalid("direction must be a unit vector"));
        }
        match &self.shape {
            Shape::Interval { a, b } => {
                if dir[1].abs() > DIR_TOL {
                    return Err(invalid("1D domain takes directions (+-1, 0)"));
                }
                let c = self.center[0];
                Ok(if dir[0] > 0.0 { b - c } else { c - a })
            }
            Shape::Rect { min, max } => {
                let c = self.center;
                let mut t = f64::INFINITY;
                if dir[0] > DIR_TOL {
                    t = t.min((max[0] - c[0]) / dir[0]);
                } else if dir[0] < -DIR_TOL {
                    t = t.min((min[0] - c[0]) / dir[0]);
                }
                if dir[1] > DIR_TOL {
                    t = t.min((max[1] - c[1]) / dir[1]);
                } else if dir[1] < -DIR_TOL {
                    t = t.min((min[1] - c[1]) / dir[1]);
                }
                Ok(t)
            }
            Shape::Polygon { vertices } => {
                let c = self.center;
                let n = vertices.len();
                let mut t_hit = f64::INFINITY;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    // ray c + t*dir against segment a..b
                    let ex = b[0] - a[0];
                    let ey = b[1] - a[1];
                    let det = dir[0] * (-ey) - dir[1] * (-ex);
                    if det.abs() < 1e-300 {
                        continue;
                    }
                    let rx = a[0] - c[0];
                    let ry = a[1] - c[1];
                    let t = (rx * (-ey) + ry * ex) / det;
                    let s = (dir[0] * ry - dir[1] * rx) / det;
                    if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                        t_hit = t_hit.min(t);
                    }
                }
                if t_hit.is_finite() {
                    Ok(t_hit)
                } else {
                    Err(invalid("ray from center did not hit the polygon boundary"))
                }
            }
        }
    }

    /// Dilation about the center: every boundary point's centered coordinates
    /// are multiplied by `rho`.
    pub fn scale(&self, rho: f64) -> Result<ConvexDomain> {
        if !(rho > 0.0) {
            return Err(invalid("scale factor must be positive"));
        }
        let c = self.center;
        let shape = match &self.shape {
            Shape::Interval { a, b } => Shape::Interval {
                a: c[0] + rho * (a - c[0]),
                b: c[0] + rho * (b - c[0]),
            },
            Shape::Rect { min, max } => Shape::Rect {
                min: [c[0] + rho * (min[0] - c[0]), c[1] + rho * (min[1] - c[1])],
                max: [c[0] + rho * (max[0] - c[0]), c[1] + rho * (max[1] - c[1])],
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices
                    .iter()
                    .map(|v| [c[0] + rho * (v[0] - c[0]), c[1] + rho * (v[1] - c[1])])
                    .collect(),
            },
        };
        Ok(ConvexDomain {
            shape,
            center: c,
        })
    }
}

/// Result of the boundary-separation computation, which is approximate for
/// polygons: dense angular sampling refined by bisection, with the change in
/// the last refinement round reported.
#[derive(Debug, Clone, Copy)]
pub struct Separation {
    pub value: f64,
    pub refinement_residual: f64,
}

/// Distance between the boundaries of the `rho1`- and `rho2`-scaled copies of
/// a convex domain: `inf |rho1*lambda(u)*u - rho2*lambda(v)*v|` over unit
/// directions. Strictly positive whenever `0 < rho1 < rho2`.
pub fn separation(dom: &ConvexDomain, rho1: f64, rho2: f64) -> Result<Separation> {
    if !(rho1 > 0.0 && rho1 < rho2) {
        return Err(invalid("separation needs 0 < rho1 < rho2"));
    }
    if dom.dim() == 1 {
        let lp = dom.radial([1.0, 0.0])?;
        let lm = dom.radial([-1.0, 0.0])?;
        // boundary points: {-rho*lm, rho*lp}; closest pairs are same-side
        let value = ((rho2 - rho1) * lp).min((rho2 - rho1) * lm);
        return Ok(Separation {
            value,
            refinement_residual: 0.0,
        });
    }

    const BASE: usize = 1 << 12;
    let two_pi = 2.0 * std::f64::consts::PI;
    let point = |theta: f64, rho: f64| -> Result<[f64; 2]> {
        let u = [theta.cos(), theta.sin()];
        let l = dom.radial(u)?;
        Ok([rho * l * u[0], rho * l * u[1]])
    };
    let thetas: Vec<f64> = (0..BASE).map(|k| two_pi * k as f64 / BASE as f64).collect();
    let pts1: Vec<[f64; 2]> = thetas
        .iter()
        .map(|&t| point(t, rho1))
        .collect::<Result<_>>()?;
    let pts2: Vec<[f64; 2]> = thetas
        .iter()
        .map(|&t| point(t, rho2))
        .collect::<Result<_>>()?;

    let mut best = f64::INFINITY;
    let mut arg = (0usize, 0usize);
    for (i, p) in pts1.iter().enumerate() {
        for (j, q) in pts2.iter().enumerate() {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let d2 = dx * dx + dy * dy;
            if d2 < best {
                best = d2;
                arg = (i, j);
            }
        }
    }
    let mut value = best.sqrt();
    let mut width = two_pi / BASE as f64;
    let mut t1 = thetas[arg.0];
    let mut t2 = thetas[arg.1];
    let mut residual = 0.0;
    const LOCAL: usize = 33;
    for _ in 0..3 {
        width *= 0.5;
        let mut local_best = f64::INFINITY;
        let mut local_arg = (t1, t2);
        for a in 0..LOCAL {
            let ta = t1 - width + 2.0 * width * a as f64 / (LOCAL - 1) as f64;
            let p = point(ta, rho1)?;
            for b in 0..LOCAL {
                let tb = t2 - width + 2.0 * width * b as f64 / (LOCAL - 1) as f64;
                let q = point(tb, rho2)?;
                let dx = p[0] - q[0];
                let dy = p[1] - q[1];
                let d = (dx * dx + dy * dy).sqrt();
                if d < local_best {
                    local_best = d;
                    local_arg = (ta, tb);
                }
            }
        }
        residual = (value - local_best).abs();
        value = value.min(local_best);
        (t1, t2) = local_arg;
    }
    Ok(Separation {
        value,
        refinement_residual: residual,
    })
}

/// Parse a plain-text domain description. Each non-empty, non-`#` line is one
/// record of whitespace-separated `key=value` fields:
///
/// ```text
/// kind=polygon vertices=0,0;2,0;2,2;0,2 center=1,1
/// kind=interval vertices=-1;3 center=0
/// kind=rect vertices=0,0;4,2 center=2,1
/// ```
pub fn parse_domain_file(text: &str) -> Result<Vec<ConvexDomain>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut kind = None;
        let mut vertices: Option<Vec<Vec<f64>>> = None;
        let mut center: Option<Vec<f64>> = None;
        for tok in line.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key=value", lineno + 1)))?;
            match key {
                "kind" => kind = Some(val.to_string()),
                "vertices" => {
                    let pts = val
                        .split(';')
                        .map(|p| {
                            p.split(',')
                                .map(|c| {
                                    c.parse::<f64>().map_err(|_| {
                                        invalid(format!("line {}: bad number '{c}'", lineno + 1))
                                    })
                                })
                                .collect::<Result<Vec<f64>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    vertices = Some(pts);
                }
                "center" => {
                    center = Some(
                        val.split(',')
                            .map(|c| {
                                c.parse::<f64>().map_err(|_| {
                                    invalid(format!("line {}: bad number '{c}'", lineno + 1))
                                })
                            })
                            .collect::<Result<Vec<f64>>>()?,
                    );
                }
                other => {
                    return Err(invalid(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        let kind = kind.ok_or_else(|| invalid(format!("line {}: missing kind", lineno + 1)))?;
        let verts =
            vertices.ok_or_else(|| invalid(format!("line {}: missing vertices", lineno + 1)))?;
        let center =
            center.ok_or_else(|| invalid(format!("line {}: missing center", lineno + 1)))?;
        let dom = match kind.as_str() {
            "interval" => {
                if verts.len() != 2 || verts.iter().any(|v| v.len() != 1) || center.len() != 1 {
                    return Err(invalid(format!(
                        "line {}: interval wants vertices=a;b center=c",
                        lineno + 1
                    )));
                }
                ConvexDomain::interval(verts[0][0], verts[1][0], center[0])?
            }
            "rect" => {
                if verts.len() != 2 || verts.iter().any(|v| v.len() != 2) || center.len() != 2 {
                    return Err(invalid(format!(
                        "line {}: rect wants vertices=x0,y0;x1,y1 center=cx,cy",
                        lineno + 1
                    )));
                }
                ConvexDomain::rect(
                    [verts[0][0], verts[0][1]],
                    [verts[1][0], verts[1][1]],
                    [center[0], center[1]],
                )?
            }
            "polygon" => {
                if verts.iter().any(|v| v.len() != 2) || center.len() != 2 {
                    return Err(invalid(format!(
                        "line {}: polygon wants 2D vertices and center",
                        lineno + 1
                    )));
                }
                ConvexDomain::polygon(
                    verts.iter().map(|v| [v[0], v[1]]).collect(),
                    [center[0], center[1]],
                )?
            }
            other => return Err(invalid(format!("line {}: unknown kind '{other}'", lineno + 1))),
        };
        out.push(dom);
    }
    Ok(out)
}
