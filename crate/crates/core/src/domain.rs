//! Bounded open game domains.
//!
//! A [`Domain`] is a pure membership oracle plus an axis-aligned bounding box
//! and a documented interior witness point. The game never needs the
//! distance to the boundary: every move from a point of the domain stays
//! within the boundary strip, so "left the domain" is the stopping test.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::point::{dist, dot, norm, sub};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Open axis-aligned box `lo < x < hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `inner < |x - center| < outer`.
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// Open box with the closed cone `{x : angle(x - vertex, axis) <= half_angle}`
    /// removed. `axis` is stored normalised.
    BoxMinusCone {
        lo: Vec<f64>,
        hi: Vec<f64>,
        vertex: Vec<f64>,
        axis: Vec<f64>,
        half_angle: f64,
    },
    /// Half ball `{x : |x - center| < radius, (x - center) . normal > 0}`;
    /// `normal` is stored normalised.
    HalfSpaceCap {
        center: Vec<f64>,
        radius: f64,
        normal: Vec<f64>,
    },
}

fn check_dims(kind: &str, parts: &[&[f64]]) -> Result<usize> {
    let n = parts[0].len();
    if n == 0 {
        return Err(Error::param(format!(
            "{kind}: dimension must be at least 1"
        )));
    }
    if parts.iter().any(|p| p.len() != n) {
        return Err(Error::param(format!("{kind}: inconsistent dimensions")));
    }
    if parts.iter().flat_map(|p| p.iter()).any(|x| !x.is_finite()) {
        return Err(Error::param(format!("{kind}: non-finite coordinate")));
    }
    Ok(n)
}

fn normalised(kind: &str, v: &[f64]) -> Result<Vec<f64>> {
    let r = norm(v);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::param(format!("{kind}: direction must be non-zero")));
    }
    Ok(v.iter().map(|x| x / r).collect())
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_dims("ball", &[&center])?;
        if !(radius > 0.0) {
            return Err(Error::param("ball: radius must be positive"));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Domain::boxed(vec![lo], vec![hi])
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dims("box", &[&lo, &hi])?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::param("box: need lo < hi in every coordinate"));
        }
        Ok(Domain::Box { lo, hi })
    }

    pub fn annulus(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        check_dims("annulus", &[&center])?;
        if !(0.0 <= inner && inner < outer) {
            return Err(Error::param("annulus: need 0 <= inner < outer"));
        }
        Ok(Domain::Annulus {
            center,
            inner,
            outer,
        })
    }

    pub fn box_minus_cone(
        lo: Vec<f64>,
        hi: Vec<f64>,
        vertex: Vec<f64>,
        axis: Vec<f64>,
        half_angle: f64,
    ) -> Result<Self> {
        check_dims("box-minus-cone", &[&lo, &hi, &vertex, &axis])?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::param("box-minus-cone: need lo < hi"));
        }
        if !(half_angle > 0.0 && half_angle < PI) {
            return Err(Error::param(
                "box-minus-cone: half angle must lie in (0, pi)",
            ));
        }
        let axis = normalised("box-minus-cone", &axis)?;
        let d = Domain::BoxMinusCone {
            lo,
            hi,
            vertex,
            axis,
            half_angle,
        };
        d.interior_witness()?;
        Ok(d)
    }

    pub fn half_space_cap(center: Vec<f64>, radius: f64, normal: Vec<f64>) -> Result<Self> {
        check_dims("half-space-cap", &[&center, &normal])?;
        if !(radius > 0.0) {
            return Err(Error::param("half-space-cap: radius must be positive"));
        }
        let normal = normalised("half-space-cap", &normal)?;
        Ok(Domain::HalfSpaceCap {
            center,
            radius,
            normal,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. }
            | Domain::Annulus { center, .. }
            | Domain::HalfSpaceCap { center, .. } => center.len(),
            Domain::Box { lo, .. } | Domain::BoxMinusCone { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball { center, radius } => dist(x, center) < *radius,
            Domain::Box { lo, hi } => in_open_box(x, lo, hi),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                *inner < r && r < *outer
            }
            Domain::BoxMinusCone {
                lo,
                hi,
                vertex,
                axis,
                half_angle,
            } => in_open_box(x, lo, hi) && !in_closed_cone(x, vertex, axis, *half_angle),
            Domain::HalfSpaceCap {
                center,
                radius,
                normal,
            } => {
                let v = sub(x, center);
                norm(&v) < *radius && dot(&v, normal) > 0.0
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Ball { center, radius: r }
            | Domain::Annulus {
                center, outer: r, ..
            }
            | Domain::HalfSpaceCap {
                center, radius: r, ..
            } => (
                center.iter().map(|c| c - r).collect(),
                center.iter().map(|c| c + r).collect(),
            ),
            Domain::Box { lo, hi } | Domain::BoxMinusCone { lo, hi, .. } => {
                (lo.clone(), hi.clone())
            }
        }
    }

    /// Diagonal length of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        dist(&lo, &hi)
    }

    /// A point documented to lie inside the domain.
    pub fn interior_witness(&self) -> Result<Vec<f64>> {
        let w = match self {
            Domain::Ball { center, .. } => center.clone(),
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                let mut w = center.clone();
                w[0] += 0.5 * (inner + outer);
                w
            }
            Domain::HalfSpaceCap {
                center,
                radius,
                normal,
            } => center
                .iter()
                .zip(normal)
                .map(|(c, v)| c + 0.5 * radius * v)
                .collect(),
            Domain::BoxMinusCone {
                lo,
                hi,
                vertex,
                axis,
                ..
            } => {
                // Step away from the vertex against the axis, then fall back
                // to the box centre.
                let reach = lo
                    .iter()
                    .zip(hi)
                    .zip(vertex)
                    .map(|((a, b), v)| (v - a).min(b - v))
                    .fold(f64::INFINITY, f64::min)
                    .max(0.0);
                let back: Vec<f64> = vertex
                    .iter()
                    .zip(axis)
                    .map(|(v, a)| v - 0.5 * reach * a)
                    .collect();
                let centre: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                [back, centre]
                    .into_iter()
                    .find(|p| self.contains(p))
                    .ok_or_else(|| Error::param("box-minus-cone: cone covers the box"))?
            }
        };
        if !self.contains(&w) {
            return Err(Error::param(format!("{self}: interior witness not inside")));
        }
        Ok(w)
    }
}

fn in_open_box(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter().zip(lo).zip(hi).all(|((x, a), b)| a < x && x < b)
}

fn in_closed_cone(x: &[f64], vertex: &[f64], axis: &[f64], half_angle: f64) -> bool {
    let v = sub(x, vertex);
    let r = norm(&v);
    if r == 0.0 {
        return true;
    }
    // Compare cosines with a relative slack so that points on the surface
    // count as part of the closed cone despite rounding.
    dot(&v, axis) >= r * half_angle.cos() - 4.0 * f64::EPSILON * r
}

fn fmt_point(p: &[f64]) -> String {
    p.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Ball { center, radius } => write!(f, "ball({};{})", fmt_point(center), radius),
            Domain::Box { lo, hi } => write!(f, "box({};{})", fmt_point(lo), fmt_point(hi)),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                write!(f, "annulus({};{};{})", fmt_point(center), inner, outer)
            }
            Domain::BoxMinusCone {
                lo,
                hi,
                vertex,
                axis,
                half_angle,
            } => write!(
                f,
                "box-minus-cone({};{};{};{};{})",
                fmt_point(lo),
                fmt_point(hi),
                fmt_point(vertex),
                fmt_point(axis),
                half_angle
            ),
            Domain::HalfSpaceCap {
                center,
                radius,
                normal,
            } => write!(
                f,
                "half-space-cap({};{};{})",
                fmt_point(center),
                radius,
                fmt_point(normal)
            ),
        }
    }
}

fn parse_scalar(s: &str) -> Result<f64> {
    let s = s.trim();
    // `pi` and `pi/k` are accepted for angles.
    if let Some(rest) = s.strip_prefix("pi") {
        if rest.is_empty() {
            return Ok(PI);
        }
        if let Some(k) = rest.strip_prefix('/') {
            let k: f64 = k
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad number `{s}`")))?;
            return Ok(PI / k);
        }
    }
    s.parse()
        .map_err(|_| Error::param(format!("bad number `{s}`")))
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_scalar).collect()
}

/// Parses the descriptor syntax produced by `Display`, e.g.
/// `ball(0,0;1)` or `box-minus-cone(-1,-1;1,1;0,0;0,-1;pi/4)`.
impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::param(format!("domain descriptor `{s}` lacks `(`")))?;
        let body = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::param(format!("domain descriptor `{s}` lacks `)`")))?;
        let fields: Vec<&str> = body.split(';').collect();
        let arity = |want: usize| {
            if fields.len() == want {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{kind}: expected {want} `;`-separated fields, got {}",
                    fields.len()
                )))
            }
        };
        match kind.trim() {
            "ball" => {
                arity(2)?;
                Domain::ball(parse_point(fields[0])?, parse_scalar(fields[1])?)
            }
            "interval" => {
                arity(2)?;
                Domain::interval(parse_scalar(fields[0])?, parse_scalar(fields[1])?)
            }
            "box" => {
                arity(2)?;
                Domain::boxed(parse_point(fields[0])?, parse_point(fields[1])?)
            }
            "annulus" => {
                arity(3)?;
                Domain::annulus(
                    parse_point(fields[0])?,
                    parse_scalar(fields[1])?,
                    parse_scalar(fields[2])?,
                )
            }
            "box-minus-cone" => {
                arity(5)?;
                Domain::box_minus_cone(
                    parse_point(fields[0])?,
                    parse_point(fields[1])?,
                    parse_point(fields[2])?,
                    parse_point(fields[3])?,
                    parse_scalar(fields[4])?,
                )
            }
            "half-space-cap" => {
                arity(3)?;
                Domain::half_space_cap(
                    parse_point(fields[0])?,
                    parse_scalar(fields[1])?,
                    parse_point(fields[2])?,
                )
            }
            other => Err(Error::param(format!("unknown domain kind `{other}`"))),
        }
    }
}

/// Parses a comma-separated point such as `0.5,-0.25`.
pub fn parse_coordinates(s: &str) -> Result<Vec<f64>> {
    let p = parse_point(s)?;
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::param(format!("non-finite coordinate in `{s}`")));
    }
    Ok(p)
}
