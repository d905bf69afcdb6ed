//! Mapping-torus machinery: two-arc circle partitions of unity, monodromies
//! realized as compositions of Hamiltonian time-1 flows, the fiberwise 1-form
//! that restricts to the pulled-back Liouville form on every fiber, the
//! bundle contact form `lambda + K dtheta` with a doubling search for the
//! contact constant, and collar/product checks near the fiber boundary.
//!
//! Model conventions: the total space is the fiber chart times an angle
//! coordinate `theta` appended last, with points over `[0, 2*pi)` and the
//! monodromy acting across the seam. Trivialization 1 covers the arc around
//! `theta = 0` (crossing the seam), trivialization 2 the arc around `pi`;
//! their transition is the identity on one overlap band and the monodromy on
//! the other, so the twisted mixing happens on `(pi, 2*pi)` only.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::chart::{Chart, ChartRef, Coord};
use crate::contact::{ContactFormRecord, PointwiseOneForm, Reference, ResidualScan};
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::form::{same_chart, DifferentialForm, VectorField};
use crate::linalg::{Lu, Mat};
use crate::map::{FlowStage, SmoothMap};
use crate::real::{self, TWO_PI};

/// Two open arcs covering the circle with a smooth subordinate partition of
/// unity. `f1` peaks at `theta = 0`, `f2 = 1 - f1` at `pi`; the ramps are
/// built from `bump(cos theta)` so periodicity is exact.
pub struct CirclePartition {
    pub overlap: f64,
    /// Half-width of the arcs removed around 0 / pi: arc 1 is the circle
    /// minus `[pi - w, pi + w]`, arc 2 minus `[-w, w]`.
    pub w: f64,
    pub f1: ScalarExpr,
    pub f2: ScalarExpr,
}

pub fn circle_partition(overlap: f64) -> Result<CirclePartition> {
    if !(overlap > 0.0 && overlap < core::f64::consts::PI) {
        return Err(Error::InvalidParameter(alloc::format!(
            "overlap must lie in (0, pi), got {overlap}"
        )));
    }
    let w = (core::f64::consts::PI - overlap) / 2.0;
    // Ramp strictly inside the overlap bands: transitions happen where
    // |cos theta| < sin(overlap/4), leaving a quarter-overlap margin so the
    // supports sit inside the open arcs.
    let s = real::sin(overlap / 4.0);
    let f1 = ScalarExpr::bump(&ScalarExpr::var("theta").cos(), -s, s);
    let f2 = ScalarExpr::one() - &f1;
    Ok(CirclePartition { overlap, w, f1, f2 })
}

impl CirclePartition {
    pub fn f1_at(&self, theta: f64) -> f64 {
        self.f1
            .eval(&|n| (n == "theta").then_some(real::wrap_angle(theta)))
            .expect("partition depends on theta only")
    }

    /// True on the overlap band `(pi, 2*pi)` side where the transition is the
    /// monodromy rather than the identity.
    pub fn theta_is_twisted(&self, theta: f64) -> bool {
        real::wrap_angle(theta) > core::f64::consts::PI
    }
}

/// Where monodromy Hamiltonians must vanish: the band `radius >= inner_radius`
/// measured over the listed coordinates.
#[derive(Clone, Debug)]
pub struct CollarSpec {
    pub radial_coords: Vec<usize>,
    pub inner_radius: f64,
}

impl CollarSpec {
    pub fn radius(&self, p: &[f64]) -> f64 {
        real::sqrt(self.radial_coords.iter().map(|&i| p[i] * p[i]).sum())
    }
}

/// Hamiltonian vector field of `h` for the symplectic form `d beta`:
/// the unique `X` with `i_X d(beta) = -dh`.
pub fn hamiltonian_vector_field(
    fiber: &ChartRef,
    beta: &DifferentialForm,
    h: &ScalarExpr,
) -> Result<VectorField> {
    same_chart(fiber, beta.chart())?;
    fiber.validate_expr(h)?;
    let dim = fiber.dim();
    let dbeta = beta.d();
    let mut c = vec![vec![ScalarExpr::zero(); dim]; dim];
    for (coef, idx) in dbeta.terms() {
        c[idx[0]][idx[1]] = &c[idx[0]][idx[1]] + coef;
        c[idx[1]][idx[0]] = &c[idx[1]][idx[0]] - coef;
    }
    let grad: Vec<ScalarExpr> = (0..dim).map(|i| h.partial(fiber.coord_name(i))).collect();
    // Constant-coefficient shortcut: invert numerically once.
    let consts: Option<Vec<f64>> = c
        .iter()
        .flatten()
        .map(|e| {
            if e.is_zero() {
                Some(0.0)
            } else {
                e.as_constant()
            }
        })
        .collect();
    if let Some(flat) = consts {
        let mut m = Mat::zeros(dim);
        m.a.copy_from_slice(&flat);
        let lu = Lu::factor(&m).ok_or_else(|| {
            Error::InvalidParameter("fiber symplectic form is degenerate".into())
        })?;
        let mut cols = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            cols.push(lu.solve(&e));
        }
        // X = C^{-1} grad(h)
        let comps = (0..dim)
            .map(|i| {
                let mut acc = ScalarExpr::zero();
                for (j, g) in grad.iter().enumerate() {
                    let w = cols[j][i];
                    if w != 0.0 {
                        acc = acc + ScalarExpr::constant(w) * g;
                    }
                }
                acc
            })
            .collect();
        return VectorField::new(fiber, comps);
    }
    match crate::solve::sym_solve(&c, &grad) {
        Some(Some(x)) => VectorField::new(fiber, x),
        Some(None) => Err(Error::InvalidParameter(
            "fiber symplectic form is structurally degenerate".into(),
        )),
        None => Err(Error::InvalidParameter(
            "symbolic Hamiltonian solve exceeded the size cap".into(),
        )),
    }
}

/// A monodromy given as a composition of time-1 Hamiltonian flows, identity
/// near the fiber boundary because every Hamiltonian vanishes on the collar.
pub struct MonodromyMap {
    pub fiber: ChartRef,
    pub hamiltonians: Vec<ScalarExpr>,
    pub map: SmoothMap,
    pub collar: CollarSpec,
    pub tol: f64,
}

impl MonodromyMap {
    pub fn is_identity(&self) -> bool {
        self.hamiltonians.is_empty()
    }
}

/// Build a monodromy from Hamiltonians, verifying each vanishes identically
/// (value and gradient, exact zeros) on sampled collar points.
pub fn monodromy_from_hamiltonians(
    fiber: &ChartRef,
    beta: &DifferentialForm,
    hs: Vec<ScalarExpr>,
    collar: CollarSpec,
    tol: f64,
) -> Result<MonodromyMap> {
    for h in &hs {
        let grads: Vec<ScalarExpr> = (0..fiber.dim())
            .map(|i| h.partial(fiber.coord_name(i)))
            .collect();
        for q in collar_samples(fiber, &collar, 200) {
            let hv = fiber.eval(h, &q)?;
            if hv != 0.0 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "Hamiltonian is nonzero on the collar (value {hv} at {q:?})"
                )));
            }
            for g in &grads {
                if fiber.eval(g, &q)? != 0.0 {
                    return Err(Error::InvalidParameter(
                        "Hamiltonian gradient leaks into the collar".into(),
                    ));
                }
            }
        }
    }
    let stages = hs
        .iter()
        .map(|h| Ok(FlowStage::new(hamiltonian_vector_field(fiber, beta, h)?, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    let map = SmoothMap::flow(fiber, stages, tol)?;
    Ok(MonodromyMap {
        fiber: fiber.clone(),
        hamiltonians: hs,
        map,
        collar,
        tol,
    })
}

/// Deterministic sample points of the collar band `radius in [inner, outer]`,
/// where `outer` is the box radius 1 of the radial block.
fn collar_samples(fiber: &ChartRef, collar: &CollarSpec, count: usize) -> Vec<Vec<f64>> {
    let raw = fiber.halton_points(count * 3, 13);
    let mut out = Vec::with_capacity(count);
    for mut p in raw {
        let r = collar.radius(&p);
        if r < 1e-9 {
            continue;
        }
        // rescale the radial block into the collar band
        let target = collar.inner_radius + (1.0 - collar.inner_radius) * (out.len() as f64 + 0.5)
            / count as f64;
        for &i in &collar.radial_coords {
            p[i] *= target / r;
        }
        out.push(p);
        if out.len() == count {
            break;
        }
    }
    out
}

/// Grid report for the exact-symplectomorphism checks.
pub struct ExactnessReport {
    /// max over grid of |phi^*(dbeta) - dbeta| relative to |dbeta|.
    pub dbeta_residual: f64,
    /// max over grid of |d(phi^* beta - beta)| via central differences.
    pub closedness_residual: f64,
    /// max over collar samples of |phi(p) - p|.
    pub collar_identity_residual: f64,
    pub samples: usize,
}

/// Check (i) `phi^*(d beta) = d beta` on the grid, (ii) closedness of
/// `phi^* beta - beta` numerically, (iii) identity on the collar.
pub fn verify_exact_symplectomorphism(
    phi: &MonodromyMap,
    beta: &DifferentialForm,
    grid_points: usize,
) -> Result<ExactnessReport> {
    let fiber = &phi.fiber;
    let dbeta = beta.d();
    let pts = fiber.halton_points(grid_points, 3);
    let mut dbeta_residual = 0.0f64;
    let mut closedness_residual = 0.0f64;
    let dim = fiber.dim();
    for p in &pts {
        let direct = dbeta.matrix_at(p)?;
        let pulled = phi.map.pullback_matrix_at(&dbeta, p)?;
        let mut scale = 0.0f64;
        let mut diff = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                scale = scale.max(real::abs(direct[(i, j)]));
                diff = diff.max(real::abs(pulled[(i, j)] - direct[(i, j)]));
            }
        }
        dbeta_residual = dbeta_residual.max(diff / scale.max(1.0));

        // d(phi^* beta) by fourth-order central differences of the pulled
        // covector, compared against d(beta) directly; their difference is
        // d(phi^* beta - beta). The flow has steep higher derivatives across
        // the Hamiltonian ramp, so the stencil and step are chosen tight and
        // the sample flows run at a sharpened tolerance.
        let h = 1e-4;
        let mut tight = phi.map.clone();
        tight.tol = phi.tol.min(1e-12);
        let mut dnu = Mat::zeros(dim);
        for i in 0..dim {
            let sample = |off: f64| -> Result<Vec<f64>> {
                let mut pp = p.clone();
                pp[i] += off;
                tight.pullback_covector_at(beta, &pp)
            };
            let (p2, p1, m1, m2) = (
                sample(2.0 * h)?,
                sample(h)?,
                sample(-h)?,
                sample(-2.0 * h)?,
            );
            for j in 0..dim {
                dnu[(i, j)] = (-p2[j] + 8.0 * p1[j] - 8.0 * m1[j] + m2[j]) / (12.0 * h);
            }
        }
        for i in 0..dim {
            for j in i + 1..dim {
                let v = dnu[(i, j)] - dnu[(j, i)] - direct[(i, j)];
                closedness_residual = closedness_residual.max(real::abs(v));
            }
        }
    }
    let mut collar_identity_residual = 0.0f64;
    for q in collar_samples(fiber, &phi.collar, 60) {
        let img = phi.map.apply(&q)?;
        for (a, b) in img.iter().zip(&q) {
            collar_identity_residual = collar_identity_residual.max(real::abs(a - b));
        }
    }
    Ok(ExactnessReport {
        dbeta_residual,
        closedness_residual,
        collar_identity_residual,
        samples: pts.len(),
    })
}

/// Line integral of `phi^* beta - beta` along a closed loop given by a
/// parametrization `s -> (point, tangent)` over `[0, 2*pi)`; composite
/// Simpson with `n` panels. Evidence for exactness on fibers with holes.
pub fn monodromy_period_integral(
    phi: &MonodromyMap,
    beta: &DifferentialForm,
    gamma: &dyn Fn(f64) -> (Vec<f64>, Vec<f64>),
    n: usize,
) -> Result<f64> {
    let n = if n.is_multiple_of(2) { n } else { n + 1 };
    let h = TWO_PI / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let s = i as f64 * h;
        let (p, v) = gamma(s % TWO_PI);
        let pulled = phi.map.pullback_value_at(beta, &p, &[&v])?;
        let direct = beta.eval_frame(&p, &[&v])?;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (pulled - direct);
    }
    Ok(acc * h / 3.0)
}

/// Radial collar model: the boundary sits at radius 1 of the radial block and
/// the inward parametrization scales it by `exp(weight * (t + 1))`, so the
/// Liouville form is `e^{t+1}` times the boundary form with the 1-unit shift.
#[derive(Clone, Debug)]
pub struct CollarModel {
    pub radial_coords: Vec<usize>,
    /// 1/2 for forms quadratic in the radial coordinates, 1 for linear.
    pub weight: f64,
}

impl CollarModel {
    /// Liouville field of this model: `weight * sum x_i d/dx_i`.
    pub fn liouville_field(&self, fiber: &ChartRef) -> Result<VectorField> {
        let mut comps = vec![ScalarExpr::zero(); fiber.dim()];
        for &i in &self.radial_coords {
            comps[i] = ScalarExpr::constant(self.weight) * fiber.coord_expr(i);
        }
        VectorField::new(fiber, comps)
    }

    /// Fiber point at collar coordinate `t` over the boundary point `u`
    /// (radius 1 in the radial block).
    pub fn point_at(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let scale = real::exp(self.weight * (t + 1.0));
        let mut p = u.to_vec();
        for &i in &self.radial_coords {
            p[i] *= scale;
        }
        p
    }

    /// Deterministic boundary samples (radius normalized to 1).
    pub fn boundary_samples(&self, fiber: &ChartRef, count: usize, offset: usize) -> Vec<Vec<f64>> {
        let raw = fiber.halton_points(count * 2, offset);
        let mut out = Vec::with_capacity(count);
        for mut p in raw {
            let r = real::sqrt(self.radial_coords.iter().map(|&i| p[i] * p[i]).sum());
            if r < 1e-6 {
                continue;
            }
            for &i in &self.radial_coords {
                p[i] /= r;
            }
            out.push(p);
            if out.len() == count {
                break;
            }
        }
        out
    }
}

/// Full build recipe for a bundle contact form over the circle.
pub struct MappingTorusSpec {
    pub fiber: ChartRef,
    pub beta: DifferentialForm,
    pub monodromy: MonodromyMap,
    pub partition: CirclePartition,
    pub collar_model: CollarModel,
    pub epsilon: f64,
    pub total: ChartRef,
    /// Sign of `(d beta)^n` against the fiber's coordinate volume: the
    /// symplectic orientation that contact positivity is measured against.
    pub orientation_sign: f64,
}

impl MappingTorusSpec {
    pub fn new(
        fiber: &ChartRef,
        beta: DifferentialForm,
        monodromy: MonodromyMap,
        partition: CirclePartition,
        collar_model: CollarModel,
        epsilon: f64,
    ) -> Result<Arc<Self>> {
        same_chart(fiber, beta.chart())?;
        same_chart(fiber, &monodromy.fiber)?;
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        // The radial collar encodes `beta = e^{t+1} alpha`: equivalent to the
        // structural Liouville identity for the model's scaling field.
        let x = collar_model.liouville_field(fiber)?;
        let lhs = beta.d().interior(&x)?;
        if !lhs.structurally_equal(&beta) {
            return Err(Error::InvalidParameter(
                "Liouville identity i_X d(beta) = beta fails for the collar model".into(),
            ));
        }
        // d(beta) nondegenerate on a validation grid of the fiber.
        let dbeta = beta.d();
        let pts = fiber.halton_points(256, 5);
        let mut dets = Vec::with_capacity(pts.len());
        for p in &pts {
            dets.push((p.clone(), real::abs(crate::linalg::det(&dbeta.matrix_at(p)?))));
        }
        let max = dets.iter().fold(0.0f64, |m, (_, d)| m.max(*d));
        if let Some((p, d)) = dets.iter().find(|(_, d)| *d <= 1e-8 * max) {
            return Err(Error::NotContact {
                witness: p.clone(),
                ratio: *d,
            });
        }
        // symplectic orientation: sign of (d beta)^n against coordinate order
        let n = fiber.dim() / 2;
        let top_ratio = dbeta.wedge_power(n)?.volume_ratio()?;
        let best = dets
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let orientation_sign = if fiber.eval(&top_ratio, &pts[best])? >= 0.0 {
            1.0
        } else {
            -1.0
        };
        let mut coords: Vec<Coord> = fiber.coords().to_vec();
        coords.push(Chart::angle("theta"));
        let total = Chart::new(&alloc::format!("{}_x_s1", fiber.name), coords, None)?;
        Ok(Arc::new(MappingTorusSpec {
            fiber: fiber.clone(),
            beta,
            monodromy,
            partition,
            collar_model,
            epsilon,
            total,
            orientation_sign,
        }))
    }

    /// Fiberwise 1-form evaluator (`build_lambda_beta`).
    pub fn lambda_beta(self: &Arc<Self>) -> LambdaBeta {
        LambdaBeta { spec: self.clone() }
    }
}

/// Evaluator for the fiberwise 1-form: at `(p, theta)` it returns
/// `f1(theta) * (trivialization-1 pullback of beta) + f2(theta) * beta`,
/// where the trivialization-1 branch is `beta` before the twisted band and
/// the monodromy pullback of `beta` after it. Restriction to each fiber is
/// the pulled-back Liouville form; on the collar it is `beta` exactly.
pub struct LambdaBeta {
    spec: Arc<MappingTorusSpec>,
}

impl LambdaBeta {
    pub fn spec(&self) -> &Arc<MappingTorusSpec> {
        &self.spec
    }

    fn needs_twist(&self, theta: f64) -> bool {
        let th = real::wrap_angle(theta);
        !self.spec.monodromy.is_identity()
            && th > core::f64::consts::PI
            && self.spec.partition.f1_at(th) != 0.0
    }

    /// Fiber-coordinate covector of the fiberwise form at `(p, theta)`.
    pub fn covector(&self, p: &[f64], theta: f64) -> Result<Vec<f64>> {
        let beta_cov = self.spec.beta.covector_at(p)?;
        if !self.needs_twist(theta) {
            return Ok(beta_cov);
        }
        let f1 = self.spec.partition.f1_at(theta);
        let pulled = self.spec.monodromy.map.pullback_covector_at(&self.spec.beta, p)?;
        Ok(beta_cov
            .iter()
            .zip(&pulled)
            .map(|(b, t)| (1.0 - f1) * b + f1 * t)
            .collect())
    }

    /// Covector and full exterior-derivative pairing matrix on the total
    /// chart (fiber coordinates plus theta last) at `(p, theta)`.
    pub fn covector_and_d_matrix(&self, p: &[f64], theta: f64) -> Result<(Vec<f64>, Mat)> {
        let dim = self.spec.fiber.dim();
        let beta_cov = self.spec.beta.covector_at(p)?;
        let dbeta = self.spec.beta.d().matrix_at(p)?;
        let mut m = Mat::zeros(dim + 1);
        let mut cov = vec![0.0; dim + 1];
        if !self.needs_twist(theta) {
            cov[..dim].copy_from_slice(&beta_cov);
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] = dbeta[(i, j)];
                }
            }
            // On the untwisted side both trivializations carry beta, so the
            // mixing derivative terms cancel identically.
            return Ok((cov, m));
        }
        let th = real::wrap_angle(theta);
        let f1 = self.spec.partition.f1_at(th);
        let df1 = self
            .spec
            .partition
            .f1
            .partial("theta")
            .eval(&|n| (n == "theta").then_some(th))
            .expect("partition depends on theta only");
        let pulled_cov = self
            .spec
            .monodromy
            .map
            .pullback_covector_at(&self.spec.beta, p)?;
        let pulled_d = self
            .spec
            .monodromy
            .map
            .pullback_matrix_at(&self.spec.beta.d(), p)?;
        for i in 0..dim {
            cov[i] = (1.0 - f1) * beta_cov[i] + f1 * pulled_cov[i];
            for j in 0..dim {
                m[(i, j)] = (1.0 - f1) * dbeta[(i, j)] + f1 * pulled_d[(i, j)];
            }
        }
        // d(f1) ^ (pulled - beta) contributes the theta row/column.
        for j in 0..dim {
            let v = df1 * (pulled_cov[j] - beta_cov[j]);
            m[(dim, j)] = v;
            m[(j, dim)] = -v;
        }
        Ok((cov, m))
    }
}

/// The bundle contact form `lambda_beta + K dtheta` on the total chart.
pub struct BundleSigma {
    pub lambda: LambdaBeta,
    pub k: f64,
}

impl BundleSigma {
    fn split(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let dim = self.lambda.spec.fiber.dim();
        (x[..dim].to_vec(), x[dim])
    }
}

impl PointwiseOneForm for BundleSigma {
    fn chart(&self) -> &ChartRef {
        &self.lambda.spec.total
    }

    fn covector(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (p, theta) = self.split(x);
        let mut cov = self.lambda.covector(&p, theta)?;
        cov.push(self.k);
        Ok(cov)
    }

    fn d_matrix(&self, x: &[f64]) -> Result<Mat> {
        let (p, theta) = self.split(x);
        let (_, m) = self.lambda.covector_and_d_matrix(&p, theta)?;
        Ok(m)
    }
}

/// Result of `build_bundle_contact_form`.
pub struct BuiltBundle {
    pub record: Arc<ContactFormRecord>,
    /// Returned contact constant: twice the minimal grid-certified one.
    pub k: f64,
    pub k_min: f64,
    pub certification: ResidualScan,
    pub audit: ResidualScan,
}

/// Doubling search for the contact constant starting at `K = 1`: certify on
/// `cert` points, return `2 * K_min`, then re-certify and audit on the finer
/// audit sample.
pub fn build_bundle_contact_form(
    spec: &Arc<MappingTorusSpec>,
    cert: &crate::contact::GridSpec,
    audit: &crate::contact::GridSpec,
) -> Result<BuiltBundle> {
    let n = spec.fiber.dim() / 2;
    let mut k = 1.0f64;
    let mut k_min = None;
    for _ in 0..60 {
        let sigma = BundleSigma {
            lambda: spec.lambda_beta(),
            k,
        };
        let record = ContactFormRecord::new_pointwise(
            &spec.total,
            Arc::new(sigma),
            n,
            Reference::ChartVolume {
                sign: spec.orientation_sign,
            },
        )?;
        let scan = record.contact_residual(cert)?;
        if scan.passes_positivity_margin() {
            k_min = Some((k, scan));
            break;
        }
        k *= 2.0;
    }
    let Some((k_min, _)) = k_min else {
        let sigma = BundleSigma {
            lambda: spec.lambda_beta(),
            k,
        };
        let record = ContactFormRecord::new_pointwise(
            &spec.total,
            Arc::new(sigma),
            n,
            Reference::ChartVolume {
                sign: spec.orientation_sign,
            },
        )?;
        let scan = record.contact_residual(cert)?;
        return Err(Error::ContactConstantDiverged {
            witness: scan.min_at,
        });
    };
    let k = 2.0 * k_min;
    let sigma = BundleSigma {
        lambda: spec.lambda_beta(),
        k,
    };
    let record = ContactFormRecord::new_pointwise(
        &spec.total,
        Arc::new(sigma),
        n,
        Reference::ChartVolume {
            sign: spec.orientation_sign,
        },
    )?;
    let certification = record.contact_residual(cert)?;
    let audit_scan = record.contact_residual(audit)?;
    Ok(BuiltBundle {
        record,
        k,
        k_min,
        certification,
        audit: audit_scan,
    })
}

/// Componentwise deviation of the bundle form from the product form
/// `beta + K dtheta` over the boundary collar `t in (-1-eps, -1]`.
pub fn collar_check(
    built: &BuiltBundle,
    spec: &Arc<MappingTorusSpec>,
    t_samples: usize,
    boundary_samples: usize,
    theta_samples: usize,
) -> Result<ResidualScan> {
    let boundary = spec
        .collar_model
        .boundary_samples(&spec.fiber, boundary_samples, 17);
    let mut items = Vec::new();
    for bi in &boundary {
        for it in 0..t_samples {
            let t = -1.0 - spec.epsilon * (it as f64) / t_samples as f64;
            let p = spec.collar_model.point_at(t, bi);
            if spec.fiber.contains(&p).is_err() {
                continue;
            }
            // product form: beta on fiber components, K on the theta slot
            let mut expect = spec.beta.covector_at(&p)?;
            expect.push(built.k);
            for ith in 0..theta_samples {
                let theta = TWO_PI * (ith as f64 + 0.5) / theta_samples as f64;
                let mut point = p.clone();
                point.push(theta);
                let cov = built.record.sigma_covector(&point)?;
                let mut diff = 0.0f64;
                for (a, b) in cov.iter().zip(&expect) {
                    diff = diff.max(real::abs(a - b));
                }
                items.push((point, diff));
            }
        }
    }
    ResidualScan::collect(items)
        .ok_or_else(|| Error::InvalidParameter("empty collar grid".into()))
}

/// Basis vector of the horizontal complement at a point of the total chart:
/// the unique `u = e_theta + (fiber part)` with `d(lambda)(u, v) = 0` for all
/// fiber-tangent `v`. Errors where the vertical form degenerates.
pub fn horizontal_vector(
    lambda: &LambdaBeta,
    p: &[f64],
    theta: f64,
) -> Result<Vec<f64>> {
    let dim = lambda.spec.fiber.dim();
    let (_, m) = lambda.covector_and_d_matrix(p, theta)?;
    horizontal_from_matrix(&m, dim, p)
}

/// Same computation from an explicit pairing matrix of the 2-form on the
/// (fiber + base) coordinates, the base direction last: the unique
/// `u = e_base + (fiber part)` with `omega(u, v) = 0` for all fiber `v`.
/// Errors where the vertical block degenerates (fold points).
pub fn horizontal_from_matrix(m: &Mat, fiber_dim: usize, p: &[f64]) -> Result<Vec<f64>> {
    // solve sum_i c_i M[i][j] = -M[base][j] over fiber columns j
    let mut a = Mat::zeros(fiber_dim);
    let mut b = vec![0.0; fiber_dim];
    for j in 0..fiber_dim {
        for i in 0..fiber_dim {
            a[(j, i)] = m[(i, j)];
        }
        b[j] = -m[(fiber_dim, j)];
    }
    let lu = Lu::factor(&a).ok_or_else(|| Error::DegenerateVertical { point: p.to_vec() })?;
    let c = lu.solve(&b);
    let mut u = c;
    u.push(1.0);
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::GridSpec;

    fn disk_fiber() -> ChartRef {
        Chart::new(
            "d2",
            vec![Chart::line("x", -1.0, 1.0), Chart::line("y", -1.0, 1.0)],
            None,
        )
        .unwrap()
    }

    fn lambda_st(fiber: &ChartRef) -> DifferentialForm {
        DifferentialForm::from_terms(
            fiber,
            1,
            vec![
                (ScalarExpr::var("x"), vec![1]),
                (-ScalarExpr::var("y"), vec![0]),
            ],
        )
        .unwrap()
    }

    fn disk_collar() -> CollarSpec {
        CollarSpec {
            radial_coords: vec![0, 1],
            inner_radius: 0.9,
        }
    }

    fn radial_bump_hamiltonian() -> ScalarExpr {
        // c * (1 - bump(x^2+y^2; 0.1, 0.8)): plateau c inside, 0 for r^2 >= 0.8
        let r2 = ScalarExpr::var("x").powi(2) + ScalarExpr::var("y").powi(2);
        ScalarExpr::constant(0.2) * (ScalarExpr::one() - ScalarExpr::bump(&r2, 0.1, 0.8))
    }

    fn disk_spec(hs: Vec<ScalarExpr>) -> Arc<MappingTorusSpec> {
        let fiber = disk_fiber();
        let beta = lambda_st(&fiber);
        let monodromy =
            monodromy_from_hamiltonians(&fiber, &beta, hs, disk_collar(), 1e-10).unwrap();
        MappingTorusSpec::new(
            &fiber,
            beta,
            monodromy,
            circle_partition(core::f64::consts::PI / 2.0).unwrap(),
            CollarModel {
                radial_coords: vec![0, 1],
                weight: 0.5,
            },
            0.2,
        )
        .unwrap()
    }

    #[test]
    fn partition_is_exact_and_localized() {
        let part = circle_partition(core::f64::consts::PI / 4.0).unwrap();
        assert_eq!(part.f1_at(0.0), 1.0);
        assert_eq!(part.f1_at(core::f64::consts::PI), 0.0);
        // f1 + f2 = 1 structurally
        assert!((&part.f1 + &part.f2 - ScalarExpr::one()).is_zero());
        // derivative vanishes outside the overlap bands
        let df = part.f1.partial("theta");
        let at = |th: f64| df.eval(&|n| (n == "theta").then_some(th)).unwrap();
        assert_eq!(at(0.0), 0.0);
        assert_eq!(at(core::f64::consts::PI), 0.0);
        assert_eq!(at(0.1), 0.0);
        let mid = core::f64::consts::PI / 2.0;
        assert!(at(mid).abs() > 0.0, "ramp must be active mid-overlap");
        // and f1 + f2 = 1 numerically at random angles
        let mut rng = crate::rng::Rng::new(3);
        for _ in 0..1000 {
            let th = rng.range(0.0, TWO_PI);
            let f1 = part.f1_at(th);
            let f2 = part
                .f2
                .eval(&|n| (n == "theta").then_some(th))
                .unwrap();
            assert_eq!(f1 + f2, 1.0);
        }
    }

    #[test]
    fn partition_rejects_bad_overlap() {
        assert!(circle_partition(0.0).is_err());
        assert!(circle_partition(3.2).is_err());
    }

    #[test]
    fn empty_monodromy_is_identity() {
        let spec = disk_spec(vec![]);
        let p = [0.3, -0.2];
        let q = spec.monodromy.map.apply(&p).unwrap();
        assert_eq!(q, vec![0.3, -0.2]);
    }

    #[test]
    fn hamiltonian_flow_is_symplectic_on_grid() {
        let spec = disk_spec(vec![radial_bump_hamiltonian()]);
        let report = verify_exact_symplectomorphism(&spec.monodromy, &spec.beta, 40).unwrap();
        assert!(report.dbeta_residual < 1e-6, "{}", report.dbeta_residual);
        assert!(
            report.closedness_residual < 1e-6,
            "{}",
            report.closedness_residual
        );
        assert_eq!(report.collar_identity_residual, 0.0);
    }

    #[test]
    fn non_symplectic_map_fails_with_unit_residual() {
        // (x, y) -> (2x, y) scales dx^dy by 2: relative residual 1.
        let fiber = disk_fiber();
        let beta = lambda_st(&fiber);
        let doubling = SmoothMap::closed(
            &fiber,
            &fiber,
            vec![
                ScalarExpr::constant(2.0) * ScalarExpr::var("x"),
                ScalarExpr::var("y"),
            ],
        )
        .unwrap();
        let dbeta = beta.d();
        let p = [0.2, 0.1];
        let pulled = doubling.pullback_matrix_at(&dbeta, &p).unwrap();
        let direct = dbeta.matrix_at(&p).unwrap();
        let rel = (pulled[(0, 1)] - direct[(0, 1)]).abs() / direct[(0, 1)].abs();
        assert!((rel - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_leaking_into_collar_is_rejected() {
        let fiber = disk_fiber();
        let beta = lambda_st(&fiber);
        let leak = ScalarExpr::var("x"); // nonzero at the boundary
        let r = monodromy_from_hamiltonians(&fiber, &beta, vec![leak], disk_collar(), 1e-10);
        assert!(r.is_err());
    }

    #[test]
    fn lambda_beta_identity_monodromy_is_beta() {
        let spec = disk_spec(vec![]);
        let lambda = spec.lambda_beta();
        let mut rng = crate::rng::Rng::new(9);
        for _ in 0..40 {
            let p = spec.fiber.random_point(&mut rng);
            let th = rng.range(0.0, TWO_PI);
            let cov = lambda.covector(&p, th).unwrap();
            let expect = spec.beta.covector_at(&p).unwrap();
            assert_eq!(cov, expect);
        }
    }

    #[test]
    fn lambda_beta_twisted_band_is_convex_combination() {
        let spec = disk_spec(vec![radial_bump_hamiltonian()]);
        let lambda = spec.lambda_beta();
        // r^2 = 0.29 sits inside the ramp, away from its inflection, so the
        // twist genuinely shears the form
        let p = [0.5, 0.2];
        // mid-ramp angle on the twisted side: cos(3*pi/2) = 0 sits at the
        // center of the transition band
        let th = 1.5 * core::f64::consts::PI;
        let f1 = spec.partition.f1_at(th);
        assert!(f1 > 0.0 && f1 < 1.0, "f1 = {f1} not mid-ramp");
        let cov = lambda.covector(&p, th).unwrap();
        // independent two-term oracle
        let beta_cov = spec.beta.covector_at(&p).unwrap();
        let pulled = spec
            .monodromy
            .map
            .pullback_covector_at(&spec.beta, &p)
            .unwrap();
        for i in 0..2 {
            let expect = (1.0 - f1) * beta_cov[i] + f1 * pulled[i];
            assert!((cov[i] - expect).abs() < 1e-14);
        }
        // and the two branches genuinely differ here
        assert!((pulled[0] - beta_cov[0]).abs() > 1e-6);
    }

    #[test]
    fn lambda_beta_collar_is_beta_exactly() {
        let spec = disk_spec(vec![radial_bump_hamiltonian()]);
        let lambda = spec.lambda_beta();
        // collar point: radius 0.95, any angle including the twisted band
        let p = [0.95 * 0.6, 0.95 * 0.8];
        for &th in &[0.3, core::f64::consts::PI + 2.2, 6.0] {
            let cov = lambda.covector(&p, th).unwrap();
            let expect = spec.beta.covector_at(&p).unwrap();
            assert_eq!(cov, expect, "theta = {th}");
        }
    }

    #[test]
    fn trivial_torus_k_search_returns_two() {
        let spec = disk_spec(vec![]);
        let built = build_bundle_contact_form(
            &spec,
            &GridSpec::Halton {
                count: 400,
                offset: 0,
            },
            &GridSpec::Halton {
                count: 800,
                offset: 1000,
            },
        )
        .unwrap();
        assert_eq!(built.k_min, 1.0);
        assert_eq!(built.k, 2.0);
        assert!(built.certification.passes_positivity_margin());
        assert!(built.audit.passes_positivity_margin());
        // sigma_st ratio is constant K n! 2^n = 2 * 1 * 2 = 4 for K = 2
        assert!((built.certification.min - 4.0).abs() < 1e-12);
        assert!((built.certification.max - 4.0).abs() < 1e-12);
    }

    #[test]
    fn collar_check_identity_is_exact_zero() {
        let spec = disk_spec(vec![]);
        let built = build_bundle_contact_form(
            &spec,
            &GridSpec::Halton {
                count: 200,
                offset: 0,
            },
            &GridSpec::Halton {
                count: 400,
                offset: 1000,
            },
        )
        .unwrap();
        let scan = collar_check(&built, &spec, 5, 20, 8).unwrap();
        assert_eq!(scan.max, 0.0);
    }

    #[test]
    fn collar_check_flow_monodromy_below_tolerance() {
        let spec = disk_spec(vec![radial_bump_hamiltonian()]);
        let built = build_bundle_contact_form(
            &spec,
            &GridSpec::Halton {
                count: 200,
                offset: 0,
            },
            &GridSpec::Halton {
                count: 400,
                offset: 1000,
            },
        )
        .unwrap();
        let scan = collar_check(&built, &spec, 5, 20, 8).unwrap();
        assert!(scan.max < 1e-6, "{}", scan.max);
    }

    #[test]
    fn horizontal_vector_of_trivial_torus_is_dtheta() {
        let spec = disk_spec(vec![]);
        let lambda = spec.lambda_beta();
        let u = horizontal_vector(&lambda, &[0.3, 0.4], 1.0).unwrap();
        assert!(u[0].abs() < 1e-14 && u[1].abs() < 1e-14);
        assert_eq!(u[2], 1.0);
    }

    #[test]
    fn horizontal_vector_twisted_band_annihilates_fiber() {
        let spec = disk_spec(vec![radial_bump_hamiltonian()]);
        let lambda = spec.lambda_beta();
        let p = [0.25, 0.15];
        let th = core::f64::consts::PI + 2.2;
        let u = horizontal_vector(&lambda, &p, th).unwrap();
        let (_, m) = lambda.covector_and_d_matrix(&p, th).unwrap();
        for j in 0..2 {
            let mut v = 0.0;
            for i in 0..3 {
                v += u[i] * m[(i, j)];
            }
            assert!(v.abs() < 1e-10, "residual {v} on fiber direction {j}");
        }
    }
}
