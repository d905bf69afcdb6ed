//! Differential forms and vector fields on a chart, with the exterior-algebra
//! operations: wedge, exterior derivative, interior product, and multilinear
//! evaluation against tangent frames.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::chart::ChartRef;
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::linalg::{det, Mat};

/// Strictly increasing coordinate multi-index.
pub type MultiIndex = Vec<usize>;

/// Sort a multi-index in place, returning the permutation sign, or `None`
/// when an index repeats (the wedge monomial vanishes).
fn sort_index(idx: &mut MultiIndex) -> Option<f64> {
    let mut sign = 1.0;
    // insertion sort with transposition counting; indices are tiny
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in idx.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some(sign)
}

/// A degree-k form as a sum of `coeff * dx_{i1} ^ ... ^ dx_{ik}` terms with
/// strictly increasing multi-indices.
#[derive(Clone)]
pub struct DifferentialForm {
    chart: ChartRef,
    degree: usize,
    terms: Vec<(ScalarExpr, MultiIndex)>,
}

pub(crate) fn same_chart(a: &ChartRef, b: &ChartRef) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.name == b.name {
        Ok(())
    } else {
        Err(Error::ChartMismatch {
            left: a.name.clone(),
            right: b.name.clone(),
        })
    }
}

impl DifferentialForm {
    pub fn zero(chart: &ChartRef, degree: usize) -> Self {
        DifferentialForm {
            chart: chart.clone(),
            degree,
            terms: Vec::new(),
        }
    }

    /// A degree-0 form (a function).
    pub fn function(chart: &ChartRef, f: ScalarExpr) -> Result<Self> {
        chart.validate_expr(&f)?;
        Ok(Self::build(chart.clone(), 0, alloc::vec![(f, Vec::new())]))
    }

    pub fn from_terms(
        chart: &ChartRef,
        degree: usize,
        terms: Vec<(ScalarExpr, MultiIndex)>,
    ) -> Result<Self> {
        for (c, idx) in &terms {
            chart.validate_expr(c)?;
            if idx.len() != degree {
                return Err(Error::DegreeMismatch {
                    expected: degree,
                    found: idx.len(),
                });
            }
            for &i in idx {
                if i >= chart.dim() {
                    return Err(Error::UnknownCoordinate(alloc::format!("#{i}")));
                }
            }
        }
        let mut fixed = Vec::with_capacity(terms.len());
        for (c, mut idx) in terms {
            match sort_index(&mut idx) {
                Some(sign) => {
                    let c = if sign < 0.0 { -c } else { c };
                    fixed.push((c, idx));
                }
                None => continue,
            }
        }
        Ok(Self::build(chart.clone(), degree, fixed))
    }

    /// `d(coordinate)` as a 1-form.
    pub fn d_coord(chart: &ChartRef, name: &str) -> Result<Self> {
        let i = chart.index_of(name)?;
        Ok(Self::build(
            chart.clone(),
            1,
            alloc::vec![(ScalarExpr::one(), alloc::vec![i])],
        ))
    }

    /// The positively oriented top form of the chart.
    pub fn volume(chart: &ChartRef) -> Self {
        let sign = chart.orientation_sign();
        Self::build(
            chart.clone(),
            chart.dim(),
            alloc::vec![(ScalarExpr::constant(sign), (0..chart.dim()).collect())],
        )
    }

    /// Normalizing constructor: merges equal indices, drops zero coefficients
    /// and any term once the degree exceeds the chart dimension.
    fn build(chart: ChartRef, degree: usize, mut terms: Vec<(ScalarExpr, MultiIndex)>) -> Self {
        if degree > chart.dim() {
            terms.clear();
        }
        terms.sort_by(|a, b| a.1.cmp(&b.1));
        let mut merged: Vec<(ScalarExpr, MultiIndex)> = Vec::with_capacity(terms.len());
        for (c, idx) in terms {
            match merged.last_mut() {
                Some((pc, pidx)) if *pidx == idx => {
                    *pc = &*pc + &c;
                }
                _ => merged.push((c, idx)),
            }
        }
        merged.retain(|(c, _)| !c.is_zero());
        DifferentialForm {
            chart,
            degree,
            terms: merged,
        }
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &[(ScalarExpr, MultiIndex)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Structural equality of normalized term lists.
    pub fn structurally_equal(&self, other: &DifferentialForm) -> bool {
        self.degree == other.degree
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|((c1, i1), (c2, i2))| i1 == i2 && c1 == c2)
    }

    pub fn scale(&self, s: &ScalarExpr) -> Self {
        Self::build(
            self.chart.clone(),
            self.degree,
            self.terms
                .iter()
                .map(|(c, i)| (s * c, i.clone()))
                .collect(),
        )
    }

    pub fn add(&self, other: &DifferentialForm) -> Result<Self> {
        same_chart(&self.chart, &other.chart)?;
        if self.degree != other.degree && !self.is_zero() && !other.is_zero() {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: other.degree,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self::build(
            self.chart.clone(),
            self.degree.max(other.degree),
            terms,
        ))
    }

    pub fn sub(&self, other: &DifferentialForm) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        DifferentialForm {
            chart: self.chart.clone(),
            degree: self.degree,
            terms: self.terms.iter().map(|(c, i)| (-c, i.clone())).collect(),
        }
    }

    /// Wedge product. Bilinear, associative, graded-anticommutative; results
    /// beyond the chart dimension collapse to the zero form.
    pub fn wedge(&self, other: &DifferentialForm) -> Result<Self> {
        same_chart(&self.chart, &other.chart)?;
        let degree = self.degree + other.degree;
        let mut terms = Vec::new();
        for (c1, i1) in &self.terms {
            for (c2, i2) in &other.terms {
                let mut idx: MultiIndex = i1.iter().chain(i2.iter()).copied().collect();
                if let Some(sign) = sort_index(&mut idx) {
                    let c = c1 * c2;
                    terms.push((if sign < 0.0 { -c } else { c }, idx));
                }
            }
        }
        Ok(Self::build(self.chart.clone(), degree, terms))
    }

    /// Exterior derivative. `d . d = 0` holds structurally.
    pub fn d(&self) -> Self {
        let mut terms = Vec::new();
        for (c, idx) in &self.terms {
            for j in 0..self.chart.dim() {
                let dc = c.partial(self.chart.coord_name(j));
                if dc.is_zero() {
                    continue;
                }
                let mut nidx = alloc::vec![j];
                nidx.extend_from_slice(idx);
                if let Some(sign) = sort_index(&mut nidx) {
                    terms.push((if sign < 0.0 { -dc } else { dc }, nidx));
                }
            }
        }
        Self::build(self.chart.clone(), self.degree + 1, terms)
    }

    /// `n`-fold wedge power.
    pub fn wedge_power(&self, n: usize) -> Result<Self> {
        let mut acc = DifferentialForm::function(&self.chart, ScalarExpr::one())?;
        for _ in 0..n {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }

    /// Interior product in the first slot. Degree-0 input is rejected.
    pub fn interior(&self, v: &VectorField) -> Result<Self> {
        same_chart(&self.chart, &v.chart)?;
        if self.degree == 0 {
            return Err(Error::DegreeMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut terms = Vec::new();
        for (c, idx) in &self.terms {
            for (pos, &i) in idx.iter().enumerate() {
                let comp = &v.components[i];
                if comp.is_zero() {
                    continue;
                }
                let mut nidx = idx.clone();
                nidx.remove(pos);
                let mut coeff = c * comp;
                if pos % 2 == 1 {
                    coeff = -coeff;
                }
                terms.push((coeff, nidx));
            }
        }
        Ok(Self::build(self.chart.clone(), self.degree - 1, terms))
    }

    /// Multilinear alternating evaluation at `p` against `frame` (one tangent
    /// vector per degree).
    pub fn eval_frame(&self, p: &[f64], frame: &[&[f64]]) -> Result<f64> {
        if frame.len() != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: frame.len(),
            });
        }
        self.chart.contains(p)?;
        let k = self.degree;
        let mut acc = 0.0;
        for (c, idx) in &self.terms {
            let cv = self.chart.eval(c, p)?;
            if cv == 0.0 {
                continue;
            }
            let minor = if k == 0 {
                1.0
            } else {
                let mut m = Mat::zeros(k);
                for (r, &i) in idx.iter().enumerate() {
                    for (s, v) in frame.iter().enumerate() {
                        m[(r, s)] = v[i];
                    }
                }
                det(&m)
            };
            acc += cv * minor;
        }
        Ok(acc)
    }

    /// Degree-1 components in chart order, evaluated at `p`.
    pub fn covector_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(self.degree, 1);
        let mut out = alloc::vec![0.0; self.chart.dim()];
        for (c, idx) in &self.terms {
            out[idx[0]] = self.chart.eval(c, p)?;
        }
        Ok(out)
    }

    /// Degree-2 antisymmetric pairing matrix on the coordinate basis at `p`.
    pub fn matrix_at(&self, p: &[f64]) -> Result<Mat> {
        debug_assert_eq!(self.degree, 2);
        let mut m = Mat::zeros(self.chart.dim());
        for (c, idx) in &self.terms {
            let v = self.chart.eval(c, p)?;
            m[(idx[0], idx[1])] += v;
            m[(idx[1], idx[0])] -= v;
        }
        Ok(m)
    }

    /// Symbolic pairing of a 1-form with a vector field.
    pub fn pair(&self, v: &VectorField) -> Result<ScalarExpr> {
        same_chart(&self.chart, &v.chart)?;
        if self.degree != 1 {
            return Err(Error::DegreeMismatch {
                expected: 1,
                found: self.degree,
            });
        }
        let mut acc = ScalarExpr::zero();
        for (c, idx) in &self.terms {
            acc = acc + c * &v.components[idx[0]];
        }
        Ok(acc)
    }

    /// Ratio of this top form to the chart's positive volume form, as an
    /// expression (the forms are proportional when both are top degree).
    pub fn volume_ratio(&self) -> Result<ScalarExpr> {
        if self.degree != self.chart.dim() {
            return Err(Error::DegreeMismatch {
                expected: self.chart.dim(),
                found: self.degree,
            });
        }
        let sign = self.chart.orientation_sign();
        match self.terms.as_slice() {
            [] => Ok(ScalarExpr::zero()),
            [(c, _)] => Ok(c * &ScalarExpr::constant(sign)),
            _ => unreachable!("top forms have a single multi-index"),
        }
    }
}

impl fmt::Debug for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (c, idx)) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c})")?;
            for &i in idx {
                write!(f, " d{}", self.chart.coord_name(i))?;
            }
        }
        Ok(())
    }
}

/// A vector field: one component expression per chart coordinate.
#[derive(Clone)]
pub struct VectorField {
    chart: ChartRef,
    components: Vec<ScalarExpr>,
}

impl VectorField {
    pub fn new(chart: &ChartRef, components: Vec<ScalarExpr>) -> Result<Self> {
        if components.len() != chart.dim() {
            return Err(Error::InvalidParameter(alloc::format!(
                "field needs {} components, got {}",
                chart.dim(),
                components.len()
            )));
        }
        for c in &components {
            chart.validate_expr(c)?;
        }
        Ok(VectorField {
            chart: chart.clone(),
            components,
        })
    }

    pub fn zero(chart: &ChartRef) -> Self {
        VectorField {
            chart: chart.clone(),
            components: alloc::vec![ScalarExpr::zero(); chart.dim()],
        }
    }

    /// The coordinate basis field for `name`.
    pub fn basis(chart: &ChartRef, name: &str) -> Result<Self> {
        let i = chart.index_of(name)?;
        let mut comps = alloc::vec![ScalarExpr::zero(); chart.dim()];
        comps[i] = ScalarExpr::one();
        VectorField::new(chart, comps)
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn component(&self, name: &str) -> Result<&ScalarExpr> {
        Ok(&self.components[self.chart.index_of(name)?])
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components
            .iter()
            .map(|c| self.chart.eval(c, p))
            .collect()
    }

    pub fn scale(&self, s: &ScalarExpr) -> Self {
        VectorField {
            chart: self.chart.clone(),
            components: self.components.iter().map(|c| s * c).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        same_chart(&self.chart, &other.chart)?;
        Ok(VectorField {
            chart: self.chart.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.add(&other.scale(&ScalarExpr::constant(-1.0)))
    }

    pub fn structurally_equal(&self, other: &VectorField) -> bool {
        self.components
            .iter()
            .zip(&other.components)
            .all(|(a, b)| a == b)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.components.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({c}) @{}", self.chart.coord_name(i))?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}
