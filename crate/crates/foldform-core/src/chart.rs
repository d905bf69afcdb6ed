//! Coordinate charts: named coordinates of line or angle kind, box domains,
//! and an orientation convention. Angle coordinates carry period 2*pi and are
//! compared modulo it.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::real::{self, TWO_PI};
use crate::rng::{halton, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordKind {
    Line,
    Angle,
}

#[derive(Clone, Debug)]
pub struct Coord {
    pub name: String,
    pub kind: CoordKind,
    /// Closed interval for line coordinates; angles are implicitly [0, 2*pi).
    pub interval: [f64; 2],
}

#[derive(Debug)]
pub struct Chart {
    pub name: String,
    coords: Vec<Coord>,
    /// Permutation of coordinate indices whose wedge is the positive volume.
    orientation: Vec<usize>,
}

pub type ChartRef = Arc<Chart>;

/// Builder-style constructor helpers.
impl Chart {
    pub fn new(name: &str, coords: Vec<Coord>, orientation: Option<Vec<usize>>) -> Result<ChartRef> {
        let dim = coords.len();
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].iter().any(|p| p.name == c.name) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "duplicate coordinate `{}` in chart `{}`",
                    c.name,
                    name
                )));
            }
            if c.kind == CoordKind::Line
                && !(c.interval[0].is_finite() && c.interval[1].is_finite() && c.interval[0] < c.interval[1])
            {
                return Err(Error::InvalidParameter(alloc::format!(
                    "empty interval for `{}`",
                    c.name
                )));
            }
        }
        let orientation = orientation.unwrap_or_else(|| (0..dim).collect());
        let mut seen = alloc::vec![false; dim];
        if orientation.len() != dim {
            return Err(Error::InvalidParameter(
                "orientation must list every coordinate".to_string(),
            ));
        }
        for &i in &orientation {
            if i >= dim || seen[i] {
                return Err(Error::InvalidParameter(
                    "orientation must be a permutation of the coordinates".to_string(),
                ));
            }
            seen[i] = true;
        }
        Ok(Arc::new(Chart {
            name: name.to_string(),
            coords,
            orientation,
        }))
    }

    pub fn line(name: &str, lo: f64, hi: f64) -> Coord {
        Coord {
            name: name.to_string(),
            kind: CoordKind::Line,
            interval: [lo, hi],
        }
    }

    pub fn angle(name: &str) -> Coord {
        Coord {
            name: name.to_string(),
            kind: CoordKind::Angle,
            interval: [0.0, TWO_PI],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn orientation(&self) -> &[usize] {
        &self.orientation
    }

    /// Sign of the orientation permutation relative to coordinate order.
    pub fn orientation_sign(&self) -> f64 {
        let mut perm = self.orientation.clone();
        let mut sign = 1.0;
        for i in 0..perm.len() {
            while perm[i] != i {
                let j = perm[i];
                perm.swap(i, j);
                sign = -sign;
            }
        }
        sign
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.coords
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownCoordinate(name.to_string()))
    }

    pub fn coord_name(&self, idx: usize) -> &str {
        &self.coords[idx].name
    }

    pub fn coord_expr(&self, idx: usize) -> ScalarExpr {
        ScalarExpr::var(&self.coords[idx].name)
    }

    pub fn is_angle(&self, idx: usize) -> bool {
        self.coords[idx].kind == CoordKind::Angle
    }

    /// Validate that all variables of an expression are chart coordinates.
    pub fn validate_expr(&self, e: &ScalarExpr) -> Result<()> {
        for v in e.vars() {
            self.index_of(v.as_str())?;
        }
        Ok(())
    }

    /// Exact partial derivative with the coordinate validated against this
    /// chart; unknown coordinates are rejected rather than treated as
    /// constants.
    pub fn partial(&self, e: &ScalarExpr, coord: &str) -> Result<ScalarExpr> {
        self.index_of(coord)?;
        Ok(e.partial(coord))
    }

    /// Wrap angle coordinates into [0, 2*pi); line coordinates untouched.
    pub fn wrap_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.coords)
            .map(|(&v, c)| match c.kind {
                CoordKind::Angle => real::wrap_angle(v),
                CoordKind::Line => v,
            })
            .collect()
    }

    /// Check a point lies in the box domain (angles always do).
    pub fn contains(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::InvalidParameter(alloc::format!(
                "point dim {} vs chart dim {}",
                p.len(),
                self.dim()
            )));
        }
        for (v, c) in p.iter().zip(&self.coords) {
            if c.kind == CoordKind::Line && (*v < c.interval[0] - 1e-12 || *v > c.interval[1] + 1e-12)
            {
                return Err(Error::OutOfDomain {
                    coord: c.name.clone(),
                    value: *v,
                });
            }
        }
        Ok(())
    }

    /// Distance between two points, with angle coordinates compared mod 2*pi.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (i, c) in self.coords.iter().enumerate() {
            let d = match c.kind {
                CoordKind::Angle => real::angle_diff(a[i], b[i]),
                CoordKind::Line => a[i] - b[i],
            };
            sum += d * d;
        }
        real::sqrt(sum)
    }

    /// Evaluate an expression at a point of this chart.
    pub fn eval(&self, e: &ScalarExpr, p: &[f64]) -> Result<f64> {
        debug_assert_eq!(p.len(), self.dim());
        e.eval(&|name| {
            self.coords
                .iter()
                .position(|c| c.name == name)
                .map(|i| match self.coords[i].kind {
                    CoordKind::Angle => real::wrap_angle(p[i]),
                    CoordKind::Line => p[i],
                })
        })
    }

    /// Uniform pseudo-random in-domain point.
    pub fn random_point(&self, rng: &mut Rng) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| rng.range(c.interval[0], c.interval[1]))
            .collect()
    }

    /// `count` quasi-random (Halton) points covering the domain box.
    pub fn halton_points(&self, count: usize, offset: usize) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let mut unit = alloc::vec![0.0; dim];
        (0..count)
            .map(|i| {
                halton(i + offset, dim, &mut unit);
                self.coords
                    .iter()
                    .zip(&unit)
                    .map(|(c, &u)| c.interval[0] + (c.interval[1] - c.interval[0]) * u)
                    .collect()
            })
            .collect()
    }

    /// Uniform product grid with `n` cell midpoints per coordinate (strictly
    /// interior, so open domain ends are respected; angles cover the circle).
    pub fn product_grid(&self, n: usize) -> GridIter<'_> {
        GridIter {
            chart: self,
            n,
            next: 0,
            total: n.checked_pow(self.dim() as u32).unwrap_or(usize::MAX),
        }
    }
}

pub struct GridIter<'a> {
    chart: &'a Chart,
    n: usize,
    next: usize,
    total: usize,
}

impl Iterator for GridIter<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.next >= self.total {
            return None;
        }
        let mut idx = self.next;
        self.next += 1;
        let p = self
            .chart
            .coords
            .iter()
            .map(|c| {
                let i = idx % self.n;
                idx /= self.n;
                let frac = (i as f64 + 0.5) / self.n as f64;
                c.interval[0] + (c.interval[1] - c.interval[0]) * frac
            })
            .collect();
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total - self.next;
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> ChartRef {
        Chart::new(
            "plane",
            alloc::vec![Chart::line("x", -1.0, 1.0), Chart::line("y", -1.0, 1.0)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn rejects_duplicate_names() {
        let r = Chart::new(
            "bad",
            alloc::vec![Chart::line("x", 0.0, 1.0), Chart::line("x", 0.0, 1.0)],
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_bad_orientation() {
        let r = Chart::new(
            "bad",
            alloc::vec![Chart::line("x", 0.0, 1.0), Chart::line("y", 0.0, 1.0)],
            Some(alloc::vec![0, 0]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn orientation_sign_of_swap() {
        let c = Chart::new(
            "sw",
            alloc::vec![Chart::line("x", 0.0, 1.0), Chart::line("y", 0.0, 1.0)],
            Some(alloc::vec![1, 0]),
        )
        .unwrap();
        assert_eq!(c.orientation_sign(), -1.0);
        assert_eq!(plane().orientation_sign(), 1.0);
    }

    #[test]
    fn grid_is_interior_and_complete() {
        let c = plane();
        let pts: Vec<_> = c.product_grid(4).collect();
        assert_eq!(pts.len(), 16);
        for p in &pts {
            assert!(c.contains(p).is_ok());
            assert!(p[0].abs() < 1.0 && p[1].abs() < 1.0);
        }
    }

    #[test]
    fn angle_distance_wraps() {
        let c = Chart::new("circ", alloc::vec![Chart::angle("th")], None).unwrap();
        let d = c.distance(&[0.05], &[TWO_PI - 0.05]);
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn eval_wraps_angles() {
        let c = Chart::new("circ", alloc::vec![Chart::angle("th")], None).unwrap();
        let e = ScalarExpr::var("th");
        let v = c.eval(&e, &[TWO_PI + 1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chart_partial_rejects_unknown_coordinate() {
        let c = plane();
        let e = ScalarExpr::var("x").powi(2);
        assert!(c.partial(&e, "x").is_ok());
        match c.partial(&e, "q") {
            Err(Error::UnknownCoordinate(name)) => assert_eq!(name, "q"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_domain_reports_coord() {
        let c = plane();
        match c.contains(&[0.0, 2.0]) {
            Err(Error::OutOfDomain { coord, .. }) => assert_eq!(coord, "y"),
            other => panic!("{other:?}"),
        }
    }
}
