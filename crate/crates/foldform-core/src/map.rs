//! Smooth maps between charts. A map is either closed-form (one coordinate
//! expression per target coordinate, supporting full symbolic pullback) or a
//! numeric flow (a composition of time-1 flows of vector fields, supporting
//! pointwise evaluation and pullback through forward-sensitivity Jacobians).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::chart::ChartRef;
use crate::error::{Error, Result};
use crate::expr::{ScalarExpr, Sym};
use crate::form::{same_chart, DifferentialForm, VectorField};
use crate::linalg::Mat;
use crate::ode::{Integrator, Rhs};

#[derive(Clone)]
pub struct FlowStage {
    pub field: VectorField,
    pub time: f64,
    /// Symbolic Jacobian of the field, row-major, for sensitivity transport.
    jac: Vec<ScalarExpr>,
}

impl FlowStage {
    pub fn new(field: VectorField, time: f64) -> Self {
        let chart = field.chart().clone();
        let dim = chart.dim();
        let mut jac = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                jac.push(field.components()[i].partial(chart.coord_name(j)));
            }
        }
        FlowStage { field, time, jac }
    }
}

#[derive(Clone)]
enum MapBody {
    Closed(Vec<ScalarExpr>),
    Flow(Vec<FlowStage>),
}

#[derive(Clone)]
pub struct SmoothMap {
    source: ChartRef,
    target: ChartRef,
    body: MapBody,
    /// Integration tolerance for numeric-flow maps.
    pub tol: f64,
}

struct SensitivityRhs<'a> {
    stage: &'a FlowStage,
    dim: usize,
}

impl Rhs for SensitivityRhs<'_> {
    fn dim(&self) -> usize {
        self.dim + self.dim * self.dim
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.dim;
        let chart = self.stage.field.chart();
        let point = &y[..n];
        let v = self.stage.field.eval(point)?;
        dy[..n].copy_from_slice(&v);
        // dJ/dt = Dv(x) J
        let mut dv = vec![0.0; n * n];
        for (k, e) in self.stage.jac.iter().enumerate() {
            dv[k] = chart.eval(e, point)?;
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += dv[i * n + l] * y[n + l * n + j];
                }
                dy[n + i * n + j] = acc;
            }
        }
        Ok(())
    }
}

struct PlainRhs<'a> {
    field: &'a VectorField,
}

impl Rhs for PlainRhs<'_> {
    fn dim(&self) -> usize {
        self.field.chart().dim()
    }
    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let v = self.field.eval(y)?;
        dy.copy_from_slice(&v);
        Ok(())
    }
}

impl SmoothMap {
    pub fn closed(source: &ChartRef, target: &ChartRef, rules: Vec<ScalarExpr>) -> Result<Self> {
        if rules.len() != target.dim() {
            return Err(Error::InvalidParameter(alloc::format!(
                "map needs {} rules, got {}",
                target.dim(),
                rules.len()
            )));
        }
        for r in &rules {
            source.validate_expr(r)?;
        }
        Ok(SmoothMap {
            source: source.clone(),
            target: target.clone(),
            body: MapBody::Closed(rules),
            tol: 1e-10,
        })
    }

    pub fn identity(chart: &ChartRef) -> Self {
        let rules = (0..chart.dim()).map(|i| chart.coord_expr(i)).collect();
        SmoothMap {
            source: chart.clone(),
            target: chart.clone(),
            body: MapBody::Closed(rules),
            tol: 1e-10,
        }
    }

    /// Composition of time-1 flows on a single chart, applied left to right.
    pub fn flow(chart: &ChartRef, stages: Vec<FlowStage>, tol: f64) -> Result<Self> {
        for s in &stages {
            same_chart(chart, s.field.chart())?;
        }
        Ok(SmoothMap {
            source: chart.clone(),
            target: chart.clone(),
            body: MapBody::Flow(stages),
            tol,
        })
    }

    pub fn source(&self) -> &ChartRef {
        &self.source
    }

    pub fn target(&self) -> &ChartRef {
        &self.target
    }

    pub fn is_flow(&self) -> bool {
        matches!(self.body, MapBody::Flow(_))
    }

    pub fn rules(&self) -> Option<&[ScalarExpr]> {
        match &self.body {
            MapBody::Closed(r) => Some(r),
            MapBody::Flow(_) => None,
        }
    }

    /// Apply the map to a point.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.body {
            MapBody::Closed(rules) => rules.iter().map(|r| self.source.eval(r, p)).collect(),
            MapBody::Flow(stages) => {
                let mut y = p.to_vec();
                for s in stages {
                    let rhs = PlainRhs { field: &s.field };
                    let integ = Integrator::new(&rhs, self.tol);
                    y = integ.solve(&y, s.time)?;
                }
                Ok(y)
            }
        }
    }

    /// Apply the map and return its Jacobian at `p`. Flow Jacobians come from
    /// the forward sensitivity system integrated alongside the flow.
    pub fn apply_with_jacobian(&self, p: &[f64]) -> Result<(Vec<f64>, Mat)> {
        let n = self.source.dim();
        match &self.body {
            MapBody::Closed(rules) => {
                let q = self.apply(p)?;
                let mut j = Mat::zeros(self.target.dim().max(n));
                for (i, r) in rules.iter().enumerate() {
                    for k in 0..n {
                        j[(i, k)] = self
                            .source
                            .eval(&r.partial(self.source.coord_name(k)), p)?;
                    }
                }
                Ok((q, j))
            }
            MapBody::Flow(stages) => {
                let mut state = vec![0.0; n + n * n];
                state[..n].copy_from_slice(p);
                for i in 0..n {
                    state[n + i * n + i] = 1.0;
                }
                for s in stages {
                    let rhs = SensitivityRhs { stage: s, dim: n };
                    let integ = Integrator::new(&rhs, self.tol);
                    state = integ.solve(&state, s.time)?;
                }
                let mut j = Mat::zeros(n);
                j.a.copy_from_slice(&state[n..]);
                Ok((state[..n].to_vec(), j))
            }
        }
    }

    /// Symbolic pullback of a form on the target chart. Numeric-flow maps are
    /// pointwise only and are rejected here.
    pub fn pullback(&self, a: &DifferentialForm) -> Result<DifferentialForm> {
        same_chart(a.chart(), &self.target)?;
        let rules = match &self.body {
            MapBody::Closed(r) => r,
            MapBody::Flow(_) => return Err(Error::FlowPullbackIsPointwise),
        };
        let subs: BTreeMap<Sym, ScalarExpr> = (0..self.target.dim())
            .map(|i| (Sym::new(self.target.coord_name(i)), rules[i].clone()))
            .collect();
        let mut acc = DifferentialForm::zero(&self.source, a.degree());
        for (c, idx) in a.terms() {
            let mut piece =
                DifferentialForm::function(&self.source, c.substitute(&subs))?;
            for &i in idx {
                let rule = &rules[i];
                let mut one_form_terms = Vec::new();
                for j in 0..self.source.dim() {
                    let dj = rule.partial(self.source.coord_name(j));
                    if !dj.is_zero() {
                        one_form_terms.push((dj, alloc::vec![j]));
                    }
                }
                let drule = DifferentialForm::from_terms(&self.source, 1, one_form_terms)?;
                piece = piece.wedge(&drule)?;
            }
            acc = acc.add(&piece)?;
        }
        Ok(acc)
    }

    /// Pointwise pullback value: `(m^* a)(p; v_1..v_k)` via the Jacobian.
    pub fn pullback_value_at(
        &self,
        a: &DifferentialForm,
        p: &[f64],
        frame: &[&[f64]],
    ) -> Result<f64> {
        same_chart(a.chart(), &self.target)?;
        let (q, j) = self.apply_with_jacobian(p)?;
        let n = self.target.dim();
        let pushed: Vec<Vec<f64>> = frame
            .iter()
            .map(|v| {
                (0..n)
                    .map(|i| (0..self.source.dim()).map(|k| j[(i, k)] * v[k]).sum())
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = pushed.iter().map(|v| v.as_slice()).collect();
        a.eval_frame(&q, &refs)
    }

    /// Pointwise pullback of a 1-form as a covector at `p`.
    pub fn pullback_covector_at(&self, a: &DifferentialForm, p: &[f64]) -> Result<Vec<f64>> {
        same_chart(a.chart(), &self.target)?;
        let (q, j) = self.apply_with_jacobian(p)?;
        let cov = a.covector_at(&q)?;
        let n = self.source.dim();
        Ok((0..n)
            .map(|k| (0..self.target.dim()).map(|i| cov[i] * j[(i, k)]).sum())
            .collect())
    }

    /// Pointwise pullback of a 2-form as a pairing matrix at `p`.
    pub fn pullback_matrix_at(&self, a: &DifferentialForm, p: &[f64]) -> Result<Mat> {
        same_chart(a.chart(), &self.target)?;
        let (q, j) = self.apply_with_jacobian(p)?;
        let w = a.matrix_at(&q)?;
        let n = self.source.dim();
        let m = self.target.dim();
        let mut out = Mat::zeros(n);
        for r in 0..n {
            for s in 0..n {
                let mut acc = 0.0;
                for i in 0..m {
                    for l in 0..m {
                        acc += j[(i, r)] * w[(i, l)] * j[(l, s)];
                    }
                }
                out[(r, s)] = acc;
            }
        }
        Ok(out)
    }

    /// `self` after `first` (i.e. `p -> self(first(p))`). Closed-form only.
    pub fn after(&self, first: &SmoothMap) -> Result<SmoothMap> {
        same_chart(&first.target, &self.source)?;
        match (&first.body, &self.body) {
            (MapBody::Closed(r1), MapBody::Closed(r2)) => {
                let subs: BTreeMap<Sym, ScalarExpr> = (0..self.source.dim())
                    .map(|i| (Sym::new(self.source.coord_name(i)), r1[i].clone()))
                    .collect();
                let rules = r2.iter().map(|r| r.substitute(&subs)).collect();
                SmoothMap::closed(&first.source, &self.target, rules)
            }
            (MapBody::Flow(f1), MapBody::Flow(f2)) => {
                let mut stages = f1.clone();
                stages.extend(f2.iter().cloned());
                SmoothMap::flow(&first.source, stages, self.tol.min(first.tol))
            }
            _ => Err(Error::InvalidParameter(
                "cannot compose closed-form and flow maps symbolically".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;

    fn plane() -> ChartRef {
        Chart::new(
            "plane",
            alloc::vec![Chart::line("x", -2.0, 2.0), Chart::line("y", -2.0, 2.0)],
            None,
        )
        .unwrap()
    }

    fn rotational(chart: &ChartRef) -> DifferentialForm {
        DifferentialForm::from_terms(
            chart,
            1,
            alloc::vec![
                (ScalarExpr::var("x"), alloc::vec![1]),
                (-ScalarExpr::var("y"), alloc::vec![0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_pullback_is_identity() {
        let c = plane();
        let a = rotational(&c);
        let id = SmoothMap::identity(&c);
        assert!(id.pullback(&a).unwrap().structurally_equal(&a));
    }

    #[test]
    fn rigid_rotation_preserves_rotational_form() {
        let c = plane();
        let ang = ScalarExpr::constant(0.7);
        let (ca, sa) = (ang.cos(), ang.sin());
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let rot = SmoothMap::closed(
            &c,
            &c,
            alloc::vec![&ca * &x - &sa * &y, &sa * &x + &ca * &y],
        )
        .unwrap();
        let a = rotational(&c);
        let pulled = rot.pullback(&a).unwrap();
        assert!(pulled.structurally_equal(&a), "{pulled:?}");
    }

    #[test]
    fn pullback_commutes_with_d() {
        let c = plane();
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let m = SmoothMap::closed(
            &c,
            &c,
            alloc::vec![&x * &x - &y, (&x * &y).sin()],
        )
        .unwrap();
        let a = rotational(&c);
        let lhs = m.pullback(&a.d()).unwrap();
        let rhs = m.pullback(&a).unwrap().d();
        assert!(lhs.sub(&rhs).unwrap().is_zero());
    }

    #[test]
    fn pullback_functorial_under_composition() {
        let c = plane();
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let m1 = SmoothMap::closed(&c, &c, alloc::vec![&x + &y, &x - &y]).unwrap();
        let m2 =
            SmoothMap::closed(&c, &c, alloc::vec![&x * &y, x.powi(2)]).unwrap();
        let comp = m2.after(&m1).unwrap();
        let a = rotational(&c);
        let lhs = comp.pullback(&a).unwrap();
        let rhs = m1.pullback(&m2.pullback(&a).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().is_zero());
    }

    #[test]
    fn fiber_inclusion_pulls_back_to_liouville_form() {
        // iota_theta: (x, y) -> (x, y, theta0) kills dtheta and keeps lambda
        let fiber = Chart::new(
            "d2",
            alloc::vec![Chart::line("x", -1.0, 1.0), Chart::line("y", -1.0, 1.0)],
            None,
        )
        .unwrap();
        let total = Chart::new(
            "d2xs1",
            alloc::vec![
                Chart::line("x", -1.0, 1.0),
                Chart::line("y", -1.0, 1.0),
                Chart::angle("theta"),
            ],
            None,
        )
        .unwrap();
        let inclusion = SmoothMap::closed(
            &fiber,
            &total,
            alloc::vec![
                ScalarExpr::var("x"),
                ScalarExpr::var("y"),
                ScalarExpr::constant(1.3),
            ],
        )
        .unwrap();
        let sigma_st = DifferentialForm::from_terms(
            &total,
            1,
            alloc::vec![
                (ScalarExpr::var("x"), alloc::vec![1]),
                (-ScalarExpr::var("y"), alloc::vec![0]),
                (ScalarExpr::constant(2.0), alloc::vec![2]),
            ],
        )
        .unwrap();
        let pulled = inclusion.pullback(&sigma_st).unwrap();
        let lambda = rotational(&fiber);
        assert!(pulled.structurally_equal(&lambda), "{pulled:?}");
    }

    #[test]
    fn two_stage_flow_equals_composition() {
        let c = plane();
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let f1 = VectorField::new(&c, alloc::vec![-&y * ScalarExpr::constant(0.3), &x * ScalarExpr::constant(0.3)])
            .unwrap();
        let f2 = VectorField::new(
            &c,
            alloc::vec![(&y * &y) * ScalarExpr::constant(0.1), ScalarExpr::constant(0.05)],
        )
        .unwrap();
        let both = SmoothMap::flow(
            &c,
            alloc::vec![FlowStage::new(f1.clone(), 1.0), FlowStage::new(f2.clone(), 1.0)],
            1e-11,
        )
        .unwrap();
        let first = SmoothMap::flow(&c, alloc::vec![FlowStage::new(f1, 1.0)], 1e-11).unwrap();
        let second = SmoothMap::flow(&c, alloc::vec![FlowStage::new(f2, 1.0)], 1e-11).unwrap();
        let composed = second.after(&first).unwrap();
        for p in [[0.2, -0.1], [0.5, 0.4], [-0.6, 0.3]] {
            let a = both.apply(&p).unwrap();
            let b = composed.apply(&p).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn flow_rotation_matches_closed_form() {
        // field (-c y, c x): time-1 flow is rotation by c
        let c = plane();
        let rate = 0.6;
        let field = VectorField::new(
            &c,
            alloc::vec![
                ScalarExpr::constant(-rate) * ScalarExpr::var("y"),
                ScalarExpr::constant(rate) * ScalarExpr::var("x"),
            ],
        )
        .unwrap();
        let flow = SmoothMap::flow(&c, alloc::vec![FlowStage::new(field, 1.0)], 1e-12).unwrap();
        let p = [0.8, -0.3];
        let q = flow.apply(&p).unwrap();
        let (cr, sr) = (libm::cos(rate), libm::sin(rate));
        assert!((q[0] - (cr * p[0] - sr * p[1])).abs() < 1e-9);
        assert!((q[1] - (sr * p[0] + cr * p[1])).abs() < 1e-9);

        // sensitivity Jacobian equals the rotation matrix
        let (_, j) = flow.apply_with_jacobian(&p).unwrap();
        assert!((j[(0, 0)] - cr).abs() < 1e-9);
        assert!((j[(0, 1)] + sr).abs() < 1e-9);
        assert!((j[(1, 0)] - sr).abs() < 1e-9);
        assert!((j[(1, 1)] - cr).abs() < 1e-9);

        // pointwise pullback of the rotational form agrees with symbolic
        let a = rotational(&c);
        let e0 = [1.0, 0.0];
        let e1 = [0.0, 1.0];
        let v0 = flow.pullback_value_at(&a, &p, &[&e0]).unwrap();
        let v1 = flow.pullback_value_at(&a, &p, &[&e1]).unwrap();
        let direct = a.covector_at(&p).unwrap();
        assert!((v0 - direct[0]).abs() < 1e-9);
        assert!((v1 - direct[1]).abs() < 1e-9);

        // symbolic pullback is rejected for flows
        assert!(matches!(
            flow.pullback(&a),
            Err(Error::FlowPullbackIsPointwise)
        ));
    }
}
