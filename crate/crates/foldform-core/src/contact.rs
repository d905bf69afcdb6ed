//! Contact-condition certification, Reeb fields, the contact-Hamiltonian
//! correspondence, and restriction of forms to constraint hypersurfaces.
//!
//! A `ContactFormRecord` carries a 1-form on a chart of dimension `2n+1`, or
//! on an ambient chart of dimension `2n+2` together with a level-set
//! constraint whose zero set is the actual `2n+1`-manifold. All pointwise
//! machinery runs on tangent frames, so both cases share one code path.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::chart::ChartRef;
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::form::{same_chart, DifferentialForm, VectorField};
use crate::linalg::{gram_schmidt, one_wedge_two_power, Lu, Mat};
use crate::map::SmoothMap;
use crate::real;
use crate::solve::sym_solve;

/// Level-set hypersurface `{ level = 0 }` in an ambient chart.
pub struct ConstraintHypersurface {
    ambient: ChartRef,
    level: ScalarExpr,
    grad: Vec<ScalarExpr>,
    /// Minimum admissible |grad(level)| on the surface.
    pub regular_tol: f64,
    /// Maximum |level| for a point to count as on-surface.
    pub on_surface_tol: f64,
}

impl ConstraintHypersurface {
    pub fn new(ambient: &ChartRef, level: ScalarExpr, regular_tol: f64) -> Result<Self> {
        ambient.validate_expr(&level)?;
        let grad = (0..ambient.dim())
            .map(|i| level.partial(ambient.coord_name(i)))
            .collect();
        let y = ConstraintHypersurface {
            ambient: ambient.clone(),
            level,
            grad,
            regular_tol,
            on_surface_tol: 1e-9,
        };
        // regular-value validation on a sample of the surface
        let pts = y.sample_points(64, 0)?;
        if pts.is_empty() {
            return Err(Error::InvalidParameter(
                "level set has no points over the chart box".into(),
            ));
        }
        for p in &pts {
            let g = y.gradient_at(p)?;
            if real::hypot_slice(&g) < regular_tol {
                return Err(Error::DegenerateGradient { point: p.clone() });
            }
        }
        Ok(y)
    }

    pub fn ambient(&self) -> &ChartRef {
        &self.ambient
    }

    pub fn level(&self) -> &ScalarExpr {
        &self.level
    }

    pub fn level_at(&self, p: &[f64]) -> Result<f64> {
        self.ambient.eval(&self.level, p)
    }

    pub fn gradient_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.grad.iter().map(|g| self.ambient.eval(g, p)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> Result<()> {
        let l = self.level_at(p)?;
        if real::abs(l) > self.on_surface_tol {
            return Err(Error::OutOfDomain {
                coord: alloc::format!("level({})", self.ambient.name),
                value: l,
            });
        }
        Ok(())
    }

    /// Newton projection of an ambient point onto the level set along the
    /// gradient. Fails where the gradient degenerates.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut q = p.to_vec();
        for _ in 0..50 {
            let l = self.level_at(&q)?;
            if real::abs(l) < 1e-13 {
                return Ok(q);
            }
            let g = self.gradient_at(&q)?;
            let g2 = g.iter().map(|x| x * x).sum::<f64>();
            if g2 < self.regular_tol * self.regular_tol {
                return Err(Error::DegenerateGradient { point: q });
            }
            for (qi, gi) in q.iter_mut().zip(&g) {
                *qi -= l * gi / g2;
            }
        }
        Err(Error::DegenerateGradient { point: q })
    }

    /// Deterministic quasi-random points on the surface.
    pub fn sample_points(&self, count: usize, offset: usize) -> Result<Vec<Vec<f64>>> {
        let raw = self.ambient.halton_points(count * 2, offset);
        let mut out = Vec::with_capacity(count);
        for p in raw {
            if let Ok(q) = self.project(&p) {
                if self.ambient.contains(&q).is_ok() {
                    out.push(q);
                    if out.len() == count {
                        break;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Orthonormal tangent frame at `p`: the numeric kernel of `grad(level)`,
    /// built by Gram-Schmidt over the coordinate basis in coordinate order
    /// (deterministic seed basis, so frames are reproducible).
    pub fn tangent_frame(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.contains(p)?;
        let g = self.gradient_at(p)?;
        let norm = real::hypot_slice(&g);
        if norm < self.regular_tol {
            return Err(Error::DegenerateGradient { point: p.to_vec() });
        }
        let unit: Vec<f64> = g.iter().map(|x| x / norm).collect();
        let dim = self.ambient.dim();
        let basis: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        let frame = gram_schmidt(&[unit], &basis, 1e-8);
        if frame.len() != dim - 1 {
            return Err(Error::DegenerateGradient { point: p.to_vec() });
        }
        Ok(frame)
    }
}

/// Restriction of a form to the tangent space of a hypersurface at a point.
pub struct RestrictedForm {
    pub frame: Vec<Vec<f64>>,
    /// Values on single frame vectors (degree 1).
    pub covector: Option<Vec<f64>>,
    /// Pairing matrix on frame pairs (degree 2).
    pub matrix: Option<Mat>,
}

/// Evaluate a 1- or 2-form on the tangent frame of `y` at `p`.
pub fn restrict_to_hypersurface(
    a: &DifferentialForm,
    y: &ConstraintHypersurface,
    p: &[f64],
) -> Result<RestrictedForm> {
    same_chart(a.chart(), y.ambient())?;
    let frame = y.tangent_frame(p)?;
    let mut out = RestrictedForm {
        frame,
        covector: None,
        matrix: None,
    };
    match a.degree() {
        1 => {
            let cov = a.covector_at(p)?;
            out.covector = Some(
                out.frame
                    .iter()
                    .map(|v| crate::linalg::dot(&cov, v))
                    .collect(),
            );
        }
        2 => {
            let m = a.matrix_at(p)?;
            let k = out.frame.len();
            let mut fm = Mat::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    let mut acc = 0.0;
                    for r in 0..a.chart().dim() {
                        for s in 0..a.chart().dim() {
                            acc += out.frame[i][r] * m[(r, s)] * out.frame[j][s];
                        }
                    }
                    fm[(i, j)] = acc;
                }
            }
            out.matrix = Some(fm);
        }
        d => {
            return Err(Error::DegreeMismatch {
                expected: 2,
                found: d,
            })
        }
    }
    Ok(out)
}

/// Pointwise-only 1-forms (bundle forms whose coefficients come from numeric
/// flows). `d_matrix` must return the pairing matrix of the exterior
/// derivative on the coordinate basis.
pub trait PointwiseOneForm: Send + Sync {
    fn chart(&self) -> &ChartRef;
    fn covector(&self, p: &[f64]) -> Result<Vec<f64>>;
    fn d_matrix(&self, p: &[f64]) -> Result<Mat>;
}

pub enum SigmaRepr {
    Symbolic {
        sigma: DifferentialForm,
        dsigma: DifferentialForm,
    },
    Pointwise(Arc<dyn PointwiseOneForm>),
}

/// Reference volume against which contact positivity is measured.
pub enum Reference {
    /// `sign` times the chart's positive volume form (unconstrained records).
    ChartVolume { sign: f64 },
    /// An explicit top form on the manifold, evaluated on the same frame
    /// (constrained records; e.g. `dt ^ alpha ^ (dalpha)^{n-1} ^ dtheta`).
    Form(DifferentialForm),
}

pub struct ContactFormRecord {
    chart: ChartRef,
    /// Contact half-dimension: the manifold has dimension `2n+1`.
    pub n: usize,
    sigma: SigmaRepr,
    reference: Reference,
    constraint: Option<ConstraintHypersurface>,
}

/// Sampling specification for grid checks.
#[derive(Clone, Debug)]
pub enum GridSpec {
    Product { per_axis: usize },
    Halton { count: usize, offset: usize },
}

/// Min/max scan of a pointwise quantity over a sample set.
#[derive(Clone, Debug)]
pub struct ResidualScan {
    pub min: f64,
    pub max: f64,
    pub min_at: Vec<f64>,
    pub max_at: Vec<f64>,
    pub samples: usize,
}

impl ResidualScan {
    pub fn collect<I: IntoIterator<Item = (Vec<f64>, f64)>>(items: I) -> Option<ResidualScan> {
        let mut scan: Option<ResidualScan> = None;
        for (p, v) in items {
            match &mut scan {
                None => {
                    scan = Some(ResidualScan {
                        min: v,
                        max: v,
                        min_at: p.clone(),
                        max_at: p,
                        samples: 1,
                    })
                }
                Some(s) => {
                    s.samples += 1;
                    if v < s.min {
                        s.min = v;
                        s.min_at = p.clone();
                    }
                    if v > s.max {
                        s.max = v;
                        s.max_at = p;
                    }
                }
            }
        }
        scan
    }

    /// Scale-free positivity: min must clear `1e-8 * max`.
    pub fn passes_positivity_margin(&self) -> bool {
        self.min > 1e-8 * self.max.max(0.0)
    }
}

impl ContactFormRecord {
    pub fn new_symbolic(
        chart: &ChartRef,
        sigma: DifferentialForm,
        n: usize,
        reference: Reference,
        constraint: Option<ConstraintHypersurface>,
    ) -> Result<Arc<Self>> {
        same_chart(chart, sigma.chart())?;
        if sigma.degree() != 1 {
            return Err(Error::DegreeMismatch {
                expected: 1,
                found: sigma.degree(),
            });
        }
        let expected_dim = if constraint.is_some() { 2 * n + 2 } else { 2 * n + 1 };
        if chart.dim() != expected_dim {
            return Err(Error::InvalidParameter(alloc::format!(
                "chart dim {} incompatible with n = {n}",
                chart.dim()
            )));
        }
        if constraint.is_some() && matches!(reference, Reference::ChartVolume { .. }) {
            return Err(Error::InvalidParameter(
                "constrained records need an explicit reference form".into(),
            ));
        }
        let dsigma = sigma.d();
        Ok(Arc::new(ContactFormRecord {
            chart: chart.clone(),
            n,
            sigma: SigmaRepr::Symbolic { sigma, dsigma },
            reference,
            constraint,
        }))
    }

    pub fn new_pointwise(
        chart: &ChartRef,
        sigma: Arc<dyn PointwiseOneForm>,
        n: usize,
        reference: Reference,
    ) -> Result<Arc<Self>> {
        same_chart(chart, sigma.chart())?;
        if chart.dim() != 2 * n + 1 {
            return Err(Error::InvalidParameter(alloc::format!(
                "chart dim {} incompatible with n = {n}",
                chart.dim()
            )));
        }
        Ok(Arc::new(ContactFormRecord {
            chart: chart.clone(),
            n,
            sigma: SigmaRepr::Pointwise(sigma),
            reference,
            constraint: None,
        }))
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn constraint(&self) -> Option<&ConstraintHypersurface> {
        self.constraint.as_ref()
    }

    pub fn symbolic_sigma(&self) -> Option<&DifferentialForm> {
        match &self.sigma {
            SigmaRepr::Symbolic { sigma, .. } => Some(sigma),
            SigmaRepr::Pointwise(_) => None,
        }
    }

    pub fn sigma_covector(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.sigma {
            SigmaRepr::Symbolic { sigma, .. } => sigma.covector_at(p),
            SigmaRepr::Pointwise(f) => f.covector(p),
        }
    }

    pub fn dsigma_matrix(&self, p: &[f64]) -> Result<Mat> {
        match &self.sigma {
            SigmaRepr::Symbolic { dsigma, .. } => dsigma.matrix_at(p),
            SigmaRepr::Pointwise(f) => f.d_matrix(p),
        }
    }

    /// Tangent frame at `p`: coordinate basis on plain charts, level-set
    /// kernel frame on constrained ones.
    pub fn frame_at(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        match &self.constraint {
            None => Ok((0..self.chart.dim())
                .map(|i| {
                    let mut e = vec![0.0; self.chart.dim()];
                    e[i] = 1.0;
                    e
                })
                .collect()),
            Some(y) => y.tangent_frame(p),
        }
    }

    /// Sample points of the manifold (projected to the constraint if any).
    pub fn sample_points(&self, spec: &GridSpec) -> Result<Vec<Vec<f64>>> {
        let raw: Vec<Vec<f64>> = match spec {
            GridSpec::Product { per_axis } => self.chart.product_grid(*per_axis).collect(),
            GridSpec::Halton { count, offset } => self.chart.halton_points(*count, *offset),
        };
        match &self.constraint {
            None => Ok(raw),
            Some(y) => {
                let mut out = Vec::with_capacity(raw.len());
                for p in raw {
                    if let Ok(q) = y.project(&p) {
                        if self.chart.contains(&q).is_ok() {
                            out.push(q);
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// `sigma ^ (d sigma)^n / reference` at a point, evaluated on the frame.
    pub fn contact_ratio_at(&self, p: &[f64]) -> Result<f64> {
        let frame = self.frame_at(p)?;
        self.contact_ratio_on_frame(p, &frame)
    }

    fn contact_ratio_on_frame(&self, p: &[f64], frame: &[Vec<f64>]) -> Result<f64> {
        let m = frame.len();
        debug_assert_eq!(m, 2 * self.n + 1);
        let cov = self.sigma_covector(p)?;
        let dm = self.dsigma_matrix(p)?;
        let a: Vec<f64> = frame
            .iter()
            .map(|v| crate::linalg::dot(&cov, v))
            .collect();
        let mut omega = Mat::zeros(m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for r in 0..self.chart.dim() {
                    for s in 0..self.chart.dim() {
                        acc += frame[i][r] * dm[(r, s)] * frame[j][s];
                    }
                }
                omega[(i, j)] = acc;
            }
        }
        let vol = one_wedge_two_power(&a, &omega);
        let reference = match &self.reference {
            Reference::ChartVolume { sign } => {
                // frame is the coordinate basis here
                *sign
            }
            Reference::Form(f) => {
                let refs: Vec<&[f64]> = frame.iter().map(|v| v.as_slice()).collect();
                f.eval_frame(p, &refs)?
            }
        };
        if reference == 0.0 {
            return Err(Error::DegenerateSystem { point: p.to_vec() });
        }
        Ok(vol / reference)
    }

    /// Scan of the contact ratio over a grid; pass iff the scale-free
    /// positivity margin holds.
    pub fn contact_residual(&self, spec: &GridSpec) -> Result<ResidualScan> {
        let points = self.sample_points(spec)?;
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty grid".into()));
        }
        let mut items = Vec::with_capacity(points.len());
        for p in points {
            let r = self.contact_ratio_at(&p)?;
            items.push((p, r));
        }
        Ok(ResidualScan::collect(items).expect("nonempty"))
    }

    /// Pointwise Reeb solve. Returns ambient components and the LU pivot
    /// ratio of the frame system (conditioning gauge).
    pub fn reeb_at(&self, p: &[f64]) -> Result<(Vec<f64>, f64)> {
        let frame = self.frame_at(p)?;
        let (coeffs, ratio) = self.contact_solve_at(p, &frame, None)?;
        Ok((frame_combine(&frame, &coeffs), ratio))
    }

    /// Pointwise contact-field solve for a Hamiltonian `h`; `None` solves the
    /// Reeb equations (`h` identically 1).
    fn contact_solve_at(
        &self,
        p: &[f64],
        frame: &[Vec<f64>],
        h: Option<&ScalarExpr>,
    ) -> Result<(Vec<f64>, f64)> {
        let m = frame.len();
        let cov = self.sigma_covector(p)?;
        let dm = self.dsigma_matrix(p)?;
        let a: Vec<f64> = frame.iter().map(|v| crate::linalg::dot(&cov, v)).collect();
        let mut sys = Mat::zeros(m);
        for i in 0..m {
            for j in 0..m {
                let mut c = 0.0;
                for r in 0..self.chart.dim() {
                    for s in 0..self.chart.dim() {
                        c += frame[i][r] * dm[(r, s)] * frame[j][s];
                    }
                }
                // (C^T)_{ij} + a_i a_j, writing C_{ij} = dsigma(v_i, v_j)
                sys[(j, i)] += c;
                sys[(i, j)] += a[i] * a[j];
            }
        }
        let lu = Lu::factor(&sys).ok_or_else(|| Error::DegenerateSystem { point: p.to_vec() })?;
        let rhs: Vec<f64> = match h {
            None => a.clone(),
            Some(h) => {
                // w + a*H with w = dH(R) a - dH, R from the Reeb solve
                let reeb = lu.solve(&a);
                let grad_h: Vec<f64> = (0..self.chart.dim())
                    .map(|i| self.chart.eval(&h.partial(self.chart.coord_name(i)), p))
                    .collect::<Result<_>>()?;
                let dh: Vec<f64> = frame
                    .iter()
                    .map(|v| crate::linalg::dot(&grad_h, v))
                    .collect();
                let dhr: f64 = reeb.iter().zip(&dh).map(|(r, d)| r * d).sum();
                let hval = self.chart.eval(h, p)?;
                (0..m).map(|j| dhr * a[j] - dh[j] + a[j] * hval).collect()
            }
        };
        let x = lu.solve(&rhs);
        Ok((x, lu.pivot_ratio))
    }

    /// Pointwise contact field for Hamiltonian `h`, in ambient components.
    pub fn hamiltonian_field_at(&self, h: &ScalarExpr, p: &[f64]) -> Result<Vec<f64>> {
        let frame = self.frame_at(p)?;
        let (coeffs, _) = self.contact_solve_at(p, &frame, Some(h))?;
        Ok(frame_combine(&frame, &coeffs))
    }

    /// Coarse validation that the record is contact at all (positivity on a
    /// small quasi-random sample).
    pub fn validate_contact_coarse(&self) -> Result<()> {
        let scan = self.contact_residual(&GridSpec::Halton {
            count: 48,
            offset: 7,
        })?;
        if !scan.passes_positivity_margin() {
            return Err(Error::NotContact {
                witness: scan.min_at,
                ratio: scan.min,
            });
        }
        Ok(())
    }

    /// The Reeb field of this record. Validates contact positivity on a
    /// coarse grid first, then solves symbolically when the closed-form route
    /// succeeds and falls back to the pointwise frame solver otherwise.
    pub fn reeb_field(self: &Arc<Self>) -> Result<ReebField> {
        self.validate_contact_coarse()?;
        Ok(ReebField {
            symbolic: self.reeb_symbolic(),
            record: self.clone(),
        })
    }

    /// Symbolic system `(C^T + a a^T) x = rhs` for unconstrained symbolic
    /// records; used by the closed-form Reeb/Hamiltonian solves.
    fn symbolic_system(&self) -> Option<(Vec<Vec<ScalarExpr>>, Vec<ScalarExpr>)> {
        if self.constraint.is_some() {
            return None;
        }
        let (sigma, dsigma) = match &self.sigma {
            SigmaRepr::Symbolic { sigma, dsigma } => (sigma, dsigma),
            SigmaRepr::Pointwise(_) => return None,
        };
        let dim = self.chart.dim();
        let mut a = vec![ScalarExpr::zero(); dim];
        for (c, idx) in sigma.terms() {
            a[idx[0]] = c.clone();
        }
        let mut m = vec![vec![ScalarExpr::zero(); dim]; dim];
        for (c, idx) in dsigma.terms() {
            let (i, j) = (idx[0], idx[1]);
            // C[i][j] = c, C[j][i] = -c; system uses C^T
            m[j][i] = &m[j][i] + c;
            m[i][j] = &m[i][j] - c;
        }
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = &m[i][j] + &(&a[i] * &a[j]);
            }
        }
        Some((m, a))
    }

    /// Closed-form Reeb field when the symbolic solve succeeds.
    pub fn reeb_symbolic(&self) -> Option<VectorField> {
        let (m, a) = self.symbolic_system()?;
        let sol = sym_solve(&m, &a)??;
        VectorField::new(&self.chart, sol).ok()
    }

    /// Closed-form contact field for a Hamiltonian, when solvable.
    pub fn hamiltonian_field_symbolic(&self, h: &ScalarExpr) -> Option<VectorField> {
        let (m, a) = self.symbolic_system()?;
        let reeb = self.reeb_symbolic()?;
        let dim = self.chart.dim();
        let grad: Vec<ScalarExpr> = (0..dim)
            .map(|i| h.partial(self.chart.coord_name(i)))
            .collect();
        let mut dhr = ScalarExpr::zero();
        for (g, r) in grad.iter().zip(reeb.components()) {
            dhr = dhr + g * r;
        }
        let rhs: Vec<ScalarExpr> = (0..dim)
            .map(|j| &dhr * &a[j] - &grad[j] + &a[j] * h)
            .collect();
        let sol = sym_solve(&m, &rhs)??;
        VectorField::new(&self.chart, sol).ok()
    }

    /// `H_Z = sigma(Z)`, the contact Hamiltonian of a field.
    pub fn field_to_hamiltonian(&self, z: &VectorField) -> Result<ScalarExpr> {
        match &self.sigma {
            SigmaRepr::Symbolic { sigma, .. } => sigma.pair(z),
            SigmaRepr::Pointwise(_) => Err(Error::InvalidParameter(
                "pointwise records pair fields per point".into(),
            )),
        }
    }
}

/// A solved Reeb field: closed-form when available, with the pointwise frame
/// solver as the evaluation fallback and for cross-checking.
pub struct ReebField {
    /// Closed-form solution, when the symbolic solve succeeded.
    pub symbolic: Option<VectorField>,
    record: Arc<ContactFormRecord>,
}

impl ReebField {
    pub fn eval_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.symbolic {
            Some(field) => field.eval(p),
            None => Ok(self.record.reeb_at(p)?.0),
        }
    }

    /// Max residual of the two defining equations over the samples:
    /// `|sigma(R) - 1|` and every frame component of `i_R d(sigma)`.
    pub fn residual_scan(&self, points: &[Vec<f64>]) -> Result<ResidualScan> {
        let mut items = Vec::with_capacity(points.len());
        for p in points {
            let r = self.eval_at(p)?;
            let cov = self.record.sigma_covector(p)?;
            let mut worst = crate::real::abs(crate::linalg::dot(&cov, &r) - 1.0);
            let dm = self.record.dsigma_matrix(p)?;
            let frame = self.record.frame_at(p)?;
            for v in &frame {
                let mut acc = 0.0;
                for (i, ri) in r.iter().enumerate() {
                    for (j, vj) in v.iter().enumerate() {
                        acc += ri * dm[(i, j)] * vj;
                    }
                }
                worst = worst.max(crate::real::abs(acc));
            }
            items.push((p.clone(), worst));
        }
        ResidualScan::collect(items).ok_or_else(|| Error::InvalidParameter("empty grid".into()))
    }
}

fn frame_combine(frame: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let dim = frame[0].len();
    let mut out = vec![0.0; dim];
    for (v, &c) in frame.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

/// Outcome of a contactomorphism check: proportionality residuals of
/// `m^*(alpha_tgt)` against `alpha_src`, and the conformal factor range.
pub struct ContactomorphismReport {
    pub max_residual: f64,
    pub witness: Option<Vec<f64>>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples: usize,
}

impl ContactomorphismReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.lambda_min > 0.0
    }
}

/// Check `m^*(alpha_tgt) = lambda * alpha_src` with `lambda > 0` on sample
/// points of the source record.
pub fn verify_contactomorphism(
    m: &SmoothMap,
    src: &ContactFormRecord,
    tgt: &ContactFormRecord,
    points: &[Vec<f64>],
) -> Result<ContactomorphismReport> {
    same_chart(m.source(), src.chart())?;
    same_chart(m.target(), tgt.chart())?;
    let tgt_sigma = tgt
        .symbolic_sigma()
        .ok_or_else(|| Error::InvalidParameter("target form must be symbolic".into()))?;
    let mut max_residual = 0.0f64;
    let mut witness = None;
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    for p in points {
        let frame = src.frame_at(p)?;
        let pulled_cov = m.pullback_covector_at(tgt_sigma, p)?;
        let src_cov = src.sigma_covector(p)?;
        let pulled: Vec<f64> = frame
            .iter()
            .map(|v| crate::linalg::dot(&pulled_cov, v))
            .collect();
        let base: Vec<f64> = frame
            .iter()
            .map(|v| crate::linalg::dot(&src_cov, v))
            .collect();
        let bb = crate::linalg::dot(&base, &base);
        if bb < 1e-24 {
            return Err(Error::DegenerateSystem { point: p.clone() });
        }
        let lambda = crate::linalg::dot(&pulled, &base) / bb;
        let scale = real::hypot_slice(&pulled).max(real::hypot_slice(&base));
        let mut res = 0.0f64;
        for (a, b) in pulled.iter().zip(&base) {
            res = res.max(real::abs(a - lambda * b));
        }
        let rel = if scale > 0.0 { res / scale } else { res };
        if rel > max_residual {
            max_residual = rel;
            witness = Some(p.clone());
        }
        lambda_min = lambda_min.min(lambda);
        lambda_max = lambda_max.max(lambda);
    }
    Ok(ContactomorphismReport {
        max_residual,
        witness,
        lambda_min,
        lambda_max,
        samples: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::rng::Rng;

    fn solid_torus() -> ChartRef {
        Chart::new(
            "d2xs1",
            vec![
                Chart::line("x", -1.0, 1.0),
                Chart::line("y", -1.0, 1.0),
                Chart::angle("theta"),
            ],
            None,
        )
        .unwrap()
    }

    fn sigma_st(chart: &ChartRef, k: f64) -> DifferentialForm {
        // x dy - y dx + K dtheta
        DifferentialForm::from_terms(
            chart,
            1,
            vec![
                (ScalarExpr::var("x"), vec![1]),
                (-ScalarExpr::var("y"), vec![0]),
                (ScalarExpr::constant(k), vec![2]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn sigma_st_ratio_is_two() {
        let c = solid_torus();
        let rec =
            ContactFormRecord::new_symbolic(&c, sigma_st(&c, 1.0), 1, Reference::ChartVolume { sign: 1.0 }, None)
                .unwrap();
        let scan = rec
            .contact_residual(&GridSpec::Product { per_axis: 20 })
            .unwrap();
        assert!(scan.passes_positivity_margin());
        assert!((scan.min - 2.0).abs() < 1e-12, "min {}", scan.min);
        assert!((scan.max - 2.0).abs() < 1e-12);
        assert_eq!(scan.samples, 8000);
    }

    fn r3_standard() -> (ChartRef, DifferentialForm) {
        let c = Chart::new(
            "r3",
            vec![
                Chart::line("x", -1.0, 1.0),
                Chart::line("y", -1.0, 1.0),
                Chart::line("z", -1.0, 1.0),
            ],
            None,
        )
        .unwrap();
        // dz + x dy
        let a = DifferentialForm::from_terms(
            &c,
            1,
            vec![
                (ScalarExpr::one(), vec![2]),
                (ScalarExpr::var("x"), vec![1]),
            ],
        )
        .unwrap();
        (c, a)
    }

    #[test]
    fn standard_r3_ratio_is_one() {
        let (c, a) = r3_standard();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            a,
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let scan = rec
            .contact_residual(&GridSpec::Product { per_axis: 8 })
            .unwrap();
        assert!((scan.min - 1.0).abs() < 1e-13 && (scan.max - 1.0).abs() < 1e-13);
    }

    #[test]
    fn reeb_of_sigma_st_is_dtheta() {
        let c = solid_torus();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            sigma_st(&c, 1.0),
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let r = rec.reeb_symbolic().unwrap();
        let expect = VectorField::basis(&c, "theta").unwrap();
        assert!(r.structurally_equal(&expect), "{r:?}");
        // scaled constant: K = 2.5 gives (1/2.5) dtheta
        let rec = ContactFormRecord::new_symbolic(
            &c,
            sigma_st(&c, 2.5),
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let r = rec.reeb_symbolic().unwrap();
        assert_eq!(
            r.component("theta").unwrap().as_constant(),
            Some(1.0 / 2.5)
        );
    }

    #[test]
    fn reeb_of_standard_r3_is_dz() {
        let (c, a) = r3_standard();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            a.clone(),
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let r = rec.reeb_symbolic().unwrap();
        assert!(r.structurally_equal(&VectorField::basis(&c, "z").unwrap()));
        // defining equations hold structurally
        let alpha_r = a.pair(&r).unwrap();
        assert_eq!(alpha_r, ScalarExpr::one());
        let contraction = a.d().interior(&r).unwrap();
        assert!(contraction.is_zero());
    }

    #[test]
    fn pointwise_reeb_matches_symbolic() {
        let c = solid_torus();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            sigma_st(&c, 1.0),
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let mut rng = Rng::new(11);
        for _ in 0..50 {
            let p = c.random_point(&mut rng);
            let (r, cond) = rec.reeb_at(&p).unwrap();
            assert!(cond.is_finite());
            assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);
            assert!((r[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_correspondence_on_standard_model() {
        let (c, a) = r3_standard();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            a.clone(),
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        // H = 1 -> Reeb
        let z1 = rec
            .hamiltonian_field_symbolic(&ScalarExpr::one())
            .unwrap();
        assert!(z1.structurally_equal(&VectorField::basis(&c, "z").unwrap()));
        // H = x -> d/dy
        let zx = rec
            .hamiltonian_field_symbolic(&ScalarExpr::var("x"))
            .unwrap();
        assert!(zx.structurally_equal(&VectorField::basis(&c, "y").unwrap()), "{zx:?}");
        // field -> Hamiltonian round trips
        let z = VectorField::new(
            &c,
            vec![
                ScalarExpr::one(),
                ScalarExpr::zero(),
                -ScalarExpr::var("y"),
            ],
        )
        .unwrap();
        // alpha(Z) = -y ... wait alpha = dz + x dy: alpha(d/dx - y d/dz) = -y
        let h = rec.field_to_hamiltonian(&z).unwrap();
        assert_eq!(h, -ScalarExpr::var("y"));
        let back = rec.hamiltonian_field_symbolic(&h).unwrap();
        assert!(back.structurally_equal(&z), "{back:?}");
    }

    #[test]
    fn failing_profile_reports_witness() {
        // f = 2 + t^2, g = -t: f'g - fg' = 2 - t^2 crosses zero inside the
        // band when the interval reaches past sqrt(2).
        let c = Chart::new(
            "middle",
            vec![
                Chart::line("t", -1.6, 1.6),
                Chart::angle("phi"),
                Chart::angle("theta"),
            ],
            None,
        )
        .unwrap();
        let t = ScalarExpr::var("t");
        let f = ScalarExpr::constant(2.0) + t.powi(2);
        let g = -t;
        let sigma = DifferentialForm::from_terms(
            &c,
            1,
            vec![(f, vec![1]), (g, vec![2])],
        )
        .unwrap();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            sigma,
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let scan = rec
            .contact_residual(&GridSpec::Product { per_axis: 12 })
            .unwrap();
        assert!(!scan.passes_positivity_margin());
        assert!(scan.min < 0.0);
        assert!(scan.min_at[0].abs() > libm::sqrt(2.0));
    }

    #[test]
    fn restriction_of_rotational_form_to_circle() {
        let c = Chart::new(
            "r2",
            vec![Chart::line("x", -2.0, 2.0), Chart::line("y", -2.0, 2.0)],
            None,
        )
        .unwrap();
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let level = x.powi(2) + y.powi(2) - ScalarExpr::one();
        let surf = ConstraintHypersurface::new(&c, level, 1e-6).unwrap();
        let a = DifferentialForm::from_terms(
            &c,
            1,
            vec![(x, vec![1]), (-y, vec![0])],
        )
        .unwrap();
        let r = restrict_to_hypersurface(&a, &surf, &[1.0, 0.0]).unwrap();
        let vals = r.covector.unwrap();
        assert_eq!(vals.len(), 1);
        assert!((vals[0] - 1.0).abs() < 1e-12, "{vals:?}");
    }

    #[test]
    fn model_change_of_coordinates_is_strict_contactomorphism() {
        // (x, y, z) -> (-2y, x, z + x y) pulls dz~ + x~ dy~ back to
        // dz + x dy - y dx exactly; a candidate map the checker certifies
        // with factor identically 1.
        let src = Chart::new(
            "rot_model",
            vec![
                Chart::line("x", -1.0, 1.0),
                Chart::line("y", -1.0, 1.0),
                Chart::line("z", -1.0, 1.0),
            ],
            None,
        )
        .unwrap();
        let tgt = Chart::new(
            "std_model",
            vec![
                Chart::line("x", -3.0, 3.0),
                Chart::line("y", -3.0, 3.0),
                Chart::line("z", -3.0, 3.0),
            ],
            None,
        )
        .unwrap();
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let z = ScalarExpr::var("z");
        let m = SmoothMap::closed(
            &src,
            &tgt,
            vec![ScalarExpr::constant(-2.0) * &y, x.clone(), &z + &(&x * &y)],
        )
        .unwrap();
        // source: dz + x dy - y dx; target: dz + x dy
        let alpha_rot = DifferentialForm::from_terms(
            &src,
            1,
            vec![
                (ScalarExpr::one(), vec![2]),
                (x.clone(), vec![1]),
                (-y.clone(), vec![0]),
            ],
        )
        .unwrap();
        let alpha_std = DifferentialForm::from_terms(
            &tgt,
            1,
            vec![(ScalarExpr::one(), vec![2]), (ScalarExpr::var("x"), vec![1])],
        )
        .unwrap();
        // exact symbolic pullback
        let pulled = m.pullback(&alpha_std).unwrap();
        assert!(pulled.structurally_equal(&alpha_rot), "{pulled:?}");
        // and through the grid checker
        let rec_src = ContactFormRecord::new_symbolic(
            &src,
            alpha_rot,
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let rec_tgt = ContactFormRecord::new_symbolic(
            &tgt,
            alpha_std,
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let pts = src.halton_points(30, 5);
        let rep = verify_contactomorphism(&m, &rec_src, &rec_tgt, &pts).unwrap();
        assert!(rep.passed(1e-12));
        assert!((rep.lambda_min - 1.0).abs() < 1e-12 && (rep.lambda_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reeb_field_validates_and_reports_residuals() {
        let c = solid_torus();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            sigma_st(&c, 2.0),
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let reeb = rec.reeb_field().unwrap();
        assert!(reeb.symbolic.is_some());
        let pts = c.halton_points(200, 3);
        let scan = reeb.residual_scan(&pts).unwrap();
        assert!(scan.max < 1e-12, "{}", scan.max);
        // a degenerate form is rejected up front: dtheta alone has
        // sigma ^ d sigma = 0
        let degenerate = DifferentialForm::d_coord(&c, "theta").unwrap();
        let rec = ContactFormRecord::new_symbolic(
            &c,
            degenerate,
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        assert!(matches!(rec.reeb_field(), Err(Error::NotContact { .. })));
    }

    #[test]
    fn restriction_error_paths() {
        let c = Chart::new(
            "r2",
            vec![Chart::line("x", -2.0, 2.0), Chart::line("y", -2.0, 2.0)],
            None,
        )
        .unwrap();
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let level = x.powi(2) + y.powi(2) - ScalarExpr::one();
        let surf = ConstraintHypersurface::new(&c, level, 1e-6).unwrap();
        let a = DifferentialForm::d_coord(&c, "x").unwrap();
        // off-surface point rejected
        match restrict_to_hypersurface(&a, &surf, &[0.3, 0.1]) {
            Err(Error::OutOfDomain { .. }) => {}
            other => panic!("{:?}", other.map(|_| ())),
        }
        // degenerate gradient: projection from the center cannot converge
        assert!(surf.project(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn contactomorphism_identity_scale_and_failure() {
        let c = solid_torus();
        let rec1 = ContactFormRecord::new_symbolic(
            &c,
            sigma_st(&c, 1.0),
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let ke = 2.0 * libm::exp(1.0);
        let scaled = sigma_st(&c, 1.0).scale(&ScalarExpr::constant(ke));
        let rec2 = ContactFormRecord::new_symbolic(
            &c,
            scaled,
            1,
            Reference::ChartVolume { sign: 1.0 },
            None,
        )
        .unwrap();
        let id = SmoothMap::identity(&c);
        let pts = c.halton_points(40, 3);
        let rep = verify_contactomorphism(&id, &rec1, &rec1, &pts).unwrap();
        assert!(rep.passed(1e-12));
        assert!((rep.lambda_min - 1.0).abs() < 1e-12 && (rep.lambda_max - 1.0).abs() < 1e-12);
        let rep = verify_contactomorphism(&id, &rec1, &rec2, &pts).unwrap();
        assert!(rep.passed(1e-12));
        assert!((rep.lambda_min - ke).abs() < 1e-12);
        // perturbed map fails with a witness
        let x = ScalarExpr::var("x");
        let y = ScalarExpr::var("y");
        let th = ScalarExpr::var("theta");
        let warped = SmoothMap::closed(
            &c,
            &c,
            vec![&x + &(&y * &y) * &ScalarExpr::constant(0.3), y.clone(), th],
        )
        .unwrap();
        let rep = verify_contactomorphism(&warped, &rec1, &rec1, &pts).unwrap();
        assert!(!rep.passed(1e-9));
        assert!(rep.witness.is_some());
    }
}
