//! Gluing profiles and the three-piece folded contact form.
//!
//! The gluing profile is a pair `(f, g)` of smooth functions on
//! `(-1-eps, 1+eps)` subject to four machine-checked conditions:
//!
//! 1. `f` even, equal to `K e^{t+1}` on the left collar band;
//! 2. `g` odd, equal to `K` on the left collar band;
//! 3. `f'g - fg' > 0` on the whole interval;
//! 4. `f'(t) = 0` exactly at `t = 0`.
//!
//! With those in place the middle piece `f alpha + g dtheta` glues the two
//! bundle forms `lambda +/- K dtheta` into one smooth contact form whose
//! fiberwise exterior derivative degenerates exactly on the fold `t = 0`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::chart::{Chart, ChartRef, Coord};
use crate::contact::{
    ConstraintHypersurface, ContactFormRecord, GridSpec, Reference, ResidualScan,
};
use crate::error::{Error, Result};
use crate::expr::{Interval, ScalarExpr, Sym};
use crate::fibration::{BuiltBundle, BundleSigma, MappingTorusSpec};
use crate::form::{DifferentialForm, VectorField};
use crate::linalg::two_form_power;
use crate::map::SmoothMap;
use crate::real;

// ---------------------------------------------------------------------------
// gluing profiles
// ---------------------------------------------------------------------------

/// Outcome of one profile-condition check.
#[derive(Clone, Debug)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// `t` where the condition failed, when applicable.
    pub witness: Option<f64>,
    /// "structural" when proved by canonical simplification, otherwise the
    /// numeric evidence used.
    pub mode: &'static str,
}

/// Certification artifacts for a profile candidate.
#[derive(Clone, Debug)]
pub struct ProfileCertificate {
    pub conditions: Vec<ConditionCheck>,
    pub sweep_points: usize,
    /// Interval bound on |d/dt (f'g - fg')| over the whole interval.
    pub lipschitz_bound: f64,
    pub min_positivity: f64,
    /// `min (f'g - fg') - L h / 2`: positive means positivity holds between
    /// sweep samples as well.
    pub gap_margin: f64,
}

impl ProfileCertificate {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| !c.passed)
    }
}

/// Shape parameters of the default profile construction.
#[derive(Clone, Copy, Debug)]
pub struct ProfileShape {
    /// Exponential-to-cap blend band is `[-blend_lo, -blend_hi]` (mirrored).
    pub blend_lo: f64,
    pub blend_hi: f64,
    /// Cap curvature as a multiple of `K`: center piece is `K(e - c2 t^2)`.
    pub cap_coeff: f64,
    /// `g` ramps from `K` to `-K` on `(-ramp_half_width, ramp_half_width)`.
    pub ramp_half_width: f64,
}

impl Default for ProfileShape {
    fn default() -> Self {
        ProfileShape {
            blend_lo: 0.9,
            blend_hi: 0.55,
            cap_coeff: 0.5,
            ramp_half_width: 0.9,
        }
    }
}

/// The pair `(f, g)` with its certification.
pub struct GluingProfile {
    pub f: ScalarExpr,
    pub g: ScalarExpr,
    pub k: f64,
    pub epsilon: f64,
    pub certificate: ProfileCertificate,
}

fn t_var() -> ScalarExpr {
    ScalarExpr::var("t")
}

/// Default closed-form profile from bump-blended pieces; see `ProfileShape`.
pub fn default_profile_pair(k: f64, shape: &ProfileShape) -> (ScalarExpr, ScalarExpr) {
    let t = t_var();
    let kc = ScalarExpr::constant(k);
    let (a, b) = (shape.blend_hi, shape.blend_lo);
    // weights: w_l ramps 0 -> 1 over [-b, -a]; w_r mirrors it
    let w_l = ScalarExpr::bump(&t, -b, -a);
    let w_r = ScalarExpr::bump(&(-&t), -b, -a);
    let u_l = ScalarExpr::one() - &w_l;
    let u_r = ScalarExpr::one() - &w_r;
    let m = &w_l * &w_r;
    let e_left = (&t + ScalarExpr::one()).exp();
    let e_right = (ScalarExpr::one() - &t).exp();
    // cap K(e - c2 t^2), with e entering symbolically so f(0) = K e exactly
    let cap = ScalarExpr::one().exp() - ScalarExpr::constant(shape.cap_coeff) * t.powi(2);
    let f = &kc * &(u_l * e_left + u_r * e_right + m * cap);
    // g = K (B(-t) - B(t)) with B the ramp over (-c, c): odd by construction
    let c = shape.ramp_half_width;
    let ramp_pos = ScalarExpr::bump(&t, -c, c);
    let ramp_neg = ScalarExpr::bump(&(-&t), -c, c);
    let g = &kc * &(ramp_neg - ramp_pos);
    (f, g)
}

fn eval_t(e: &ScalarExpr, t: f64) -> f64 {
    e.eval(&|n| (n == "t").then_some(t))
        .expect("profile depends on t only")
}

fn subst_t(e: &ScalarExpr, with: &ScalarExpr) -> ScalarExpr {
    let mut map = BTreeMap::new();
    map.insert(Sym::new("t"), with.clone());
    e.substitute(&map)
}

/// Certify a candidate `(f, g)` against the four profile conditions. Never
/// errors: failures are reported inside the certificate.
pub fn certify_candidate(
    f: &ScalarExpr,
    g: &ScalarExpr,
    k: f64,
    epsilon: f64,
    sweep_points: usize,
) -> ProfileCertificate {
    let lo = -1.0 - epsilon;
    let hi = 1.0 + epsilon;
    let t = t_var();
    let mut conditions = Vec::new();

    // parity: structural first, numeric sweep as evidence otherwise
    let parity = |e: &ScalarExpr, odd: bool| -> (bool, Option<f64>, &'static str) {
        let reflected = subst_t(e, &(-&t));
        let delta = if odd { e + &reflected } else { e - &reflected };
        if delta.is_zero() {
            return (true, None, "structural");
        }
        for i in 0..2000 {
            let tv = lo + (hi - lo) * (i as f64 + 0.5) / 2000.0;
            if real::abs(eval_t(&delta, tv)) > 1e-10 {
                return (false, Some(tv), "numeric sweep");
            }
        }
        (true, None, "numeric sweep")
    };
    let (p, w, m) = parity(f, false);
    conditions.push(ConditionCheck {
        name: "(1) f even",
        passed: p,
        witness: w,
        mode: m,
    });
    let (p, w, m) = parity(g, true);
    conditions.push(ConditionCheck {
        name: "(2) g odd",
        passed: p,
        witness: w,
        mode: m,
    });

    // collar matches on the band (-1-eps, -1]
    let band: Interval = [lo, -1.0];
    let band_env = |n: &str| (n == "t").then_some(band);
    let collar_f = ScalarExpr::constant(k) * (&t + ScalarExpr::one()).exp();
    let collar_match = |e: &ScalarExpr, target: &ScalarExpr| -> (bool, Option<f64>, &'static str) {
        let restricted = e.restrict_to_band(&band_env);
        let delta = restricted - target;
        if delta.is_zero() {
            return (true, None, "structural");
        }
        for i in 0..500 {
            let tv = lo + (-1.0 - lo) * (i as f64 + 0.5) / 500.0;
            if real::abs(eval_t(e, tv) - eval_t(target, tv)) > 1e-10 {
                return (false, Some(tv), "numeric sweep");
            }
        }
        (true, None, "numeric sweep")
    };
    let (p, w, m) = collar_match(f, &collar_f);
    conditions.push(ConditionCheck {
        name: "(1) f collar match",
        passed: p,
        witness: w,
        mode: m,
    });
    let (p, w, m) = collar_match(g, &ScalarExpr::constant(k));
    conditions.push(ConditionCheck {
        name: "(2) g collar match",
        passed: p,
        witness: w,
        mode: m,
    });

    // (3) positivity of D = f'g - fg' by sweep plus a first-order gap bound
    let fp = f.partial("t");
    let gp = g.partial("t");
    let d = &fp * g - f * &gp;
    let dp = d.partial("t");
    let full_env = |n: &str| (n == "t").then_some([lo, hi]);
    let lipschitz_bound = dp
        .eval_interval(&full_env)
        .map(|iv| real::abs(iv[0]).max(real::abs(iv[1])))
        .unwrap_or(f64::INFINITY);
    let h = (hi - lo) / sweep_points as f64;
    let mut min_positivity = f64::INFINITY;
    let mut min_at = 0.0;
    for i in 0..sweep_points {
        let tv = lo + (hi - lo) * (i as f64 + 0.5) / sweep_points as f64;
        let v = eval_t(&d, tv);
        if v < min_positivity {
            min_positivity = v;
            min_at = tv;
        }
    }
    let gap_margin = min_positivity - lipschitz_bound * h / 2.0;
    conditions.push(ConditionCheck {
        name: "(3) f'g - fg' > 0",
        passed: min_positivity > 0.0 && gap_margin > 0.0,
        witness: (min_positivity <= 0.0 || gap_margin <= 0.0).then_some(min_at),
        mode: "sweep + interval gap bound",
    });

    // (4) f'(0) = 0 structurally, f' sign matches -sign(t) on the sweep
    let fp_at_zero = subst_t(&fp, &ScalarExpr::zero());
    let structural_zero = fp_at_zero.is_zero();
    let mut sign_ok = true;
    let mut sign_witness = None;
    for i in 0..sweep_points {
        let tv = lo + (hi - lo) * (i as f64 + 0.5) / sweep_points as f64;
        if tv == 0.0 {
            continue;
        }
        let v = eval_t(&fp, tv);
        if v * tv >= 0.0 {
            sign_ok = false;
            sign_witness = Some(tv);
            break;
        }
    }
    conditions.push(ConditionCheck {
        name: "(4) f' vanishes only at t = 0",
        passed: structural_zero && sign_ok,
        witness: if structural_zero { sign_witness } else { Some(0.0) },
        mode: if structural_zero {
            "structural zero at 0 + sign sweep"
        } else {
            "f'(0) not structurally zero"
        },
    });

    ProfileCertificate {
        conditions,
        sweep_points,
        lipschitz_bound,
        min_positivity,
        gap_margin,
    }
}

/// Build and certify the default profile; rejects naming the violated
/// condition and a witness if certification fails.
pub fn make_gluing_profile(k: f64, epsilon: f64, shape: &ProfileShape) -> Result<GluingProfile> {
    if !k.is_finite() || k <= 0.0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
        return Err(Error::InvalidParameter("epsilon must lie in (0, 1)".into()));
    }
    let sane = shape.blend_hi.is_finite()
        && shape.blend_lo.is_finite()
        && 0.0 < shape.blend_hi
        && shape.blend_hi < shape.blend_lo
        && shape.blend_lo < 1.0
        && shape.cap_coeff.is_finite()
        && shape.cap_coeff > 0.0
        && shape.ramp_half_width.is_finite()
        && 0.0 < shape.ramp_half_width
        && shape.ramp_half_width < 1.0;
    if !sane {
        return Err(Error::InvalidParameter(alloc::format!(
            "profile shape out of range: need 0 < blend_hi < blend_lo < 1, cap_coeff > 0, \
             0 < ramp_half_width < 1; got {shape:?}"
        )));
    }
    let (f, g) = default_profile_pair(k, shape);
    GluingProfile::from_pair(f, g, k, epsilon, 100_000)
}

impl GluingProfile {
    /// Certify an explicit pair, rejecting on any failed condition.
    pub fn from_pair(
        f: ScalarExpr,
        g: ScalarExpr,
        k: f64,
        epsilon: f64,
        sweep_points: usize,
    ) -> Result<GluingProfile> {
        let certificate = certify_candidate(&f, &g, k, epsilon, sweep_points);
        if let Some(fail) = certificate.first_failure() {
            return Err(Error::ProfileCondition {
                condition: fail.name.to_string(),
                witness: fail.witness.unwrap_or(f64::NAN),
            });
        }
        Ok(GluingProfile {
            f,
            g,
            k,
            epsilon,
            certificate,
        })
    }

    pub fn f_prime(&self) -> ScalarExpr {
        self.f.partial("t")
    }

    pub fn g_prime(&self) -> ScalarExpr {
        self.g.partial("t")
    }

    /// `f'g - fg'`.
    pub fn positivity_expr(&self) -> ScalarExpr {
        &self.f_prime() * &self.g - &self.f * &self.g_prime()
    }

    /// Pointwise linear interpolation against another certified profile with
    /// the same `(K, epsilon)`; used for the profile-family checks.
    pub fn interpolate(&self, other: &GluingProfile, s: f64) -> (ScalarExpr, ScalarExpr) {
        let a = ScalarExpr::constant(1.0 - s);
        let b = ScalarExpr::constant(s);
        (
            &a * &self.f + &b * &other.f,
            &a * &self.g + &b * &other.g,
        )
    }
}

// ---------------------------------------------------------------------------
// cutoff profiles
// ---------------------------------------------------------------------------

/// The even cutoff `h` on `[-1, 1]`: 1 near the ends, 0 exactly at 0.
pub struct CutoffProfile {
    pub h: ScalarExpr,
    pub plateau_start: f64,
}

/// Default cutoff: `h = w + (1 - w)(t/a)^2` with `w = bump(t^2; a^2, b^2)`,
/// plateauing at 1 for `|t| >= b`, quadratic near the fold.
pub fn make_cutoff(inner: f64, plateau_start: f64) -> Result<CutoffProfile> {
    if !(0.0 < inner && inner < plateau_start && plateau_start <= 0.8) {
        return Err(Error::InvalidParameter(
            "cutoff needs 0 < inner < plateau_start <= 0.8".into(),
        ));
    }
    let t = t_var();
    let w = ScalarExpr::bump(&t.powi(2), inner * inner, plateau_start * plateau_start);
    let quad = t.powi(2) * ScalarExpr::constant(1.0 / (inner * inner));
    let h = &w + &((ScalarExpr::one() - &w) * quad);
    let profile = CutoffProfile {
        h,
        plateau_start,
    };
    profile.validate()?;
    Ok(profile)
}

impl CutoffProfile {
    fn validate(&self) -> Result<()> {
        let t = t_var();
        // even
        if !(subst_t(&self.h, &(-&t)) - &self.h).is_zero() {
            return Err(Error::ProfileCondition {
                condition: "h even".into(),
                witness: f64::NAN,
            });
        }
        // identically 1 near t = +/-1 (structural on the band)
        let band = [self.plateau_start, 1.0];
        let restricted = self
            .h
            .restrict_to_band(&|n: &str| (n == "t").then_some(band));
        if !(restricted - ScalarExpr::one()).is_zero() {
            return Err(Error::ProfileCondition {
                condition: "h plateau at 1".into(),
                witness: band[0],
            });
        }
        // h(0) = 0 structurally and h > 0 elsewhere
        if !subst_t(&self.h, &ScalarExpr::zero()).is_zero() {
            return Err(Error::ProfileCondition {
                condition: "h(0) = 0".into(),
                witness: 0.0,
            });
        }
        for i in 0..4000 {
            let tv = -1.0 + 2.0 * (i as f64 + 0.5) / 4000.0;
            if tv != 0.0 && eval_t(&self.h, tv) <= 0.0 {
                return Err(Error::ProfileCondition {
                    condition: "h > 0 off the fold".into(),
                    witness: tv,
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// middle model and folded assembly
// ---------------------------------------------------------------------------

/// The common boundary `Y` as it appears in the middle piece: coordinates,
/// the induced contact form `alpha` (ambient expression), its Reeb field, and
/// an optional level-set constraint carving `Y` out of the coordinate box.
pub struct MiddleModel {
    pub name: String,
    pub y_coords: Vec<Coord>,
    /// `alpha` terms as (coefficient, y-coordinate name).
    pub alpha_terms: Vec<(ScalarExpr, String)>,
    /// Reeb field components per y-coordinate name.
    pub reeb_components: Vec<(String, ScalarExpr)>,
    /// Constraint level in the y-coordinates (`None` for parametrized Y).
    pub level: Option<ScalarExpr>,
    pub n: usize,
}

/// A middle chart instance, with the circle coordinate either the angle
/// `theta` or the line `z` (the circle with one fiber removed).
pub struct MiddlePiece {
    pub chart: ChartRef,
    pub circle_coord: String,
    pub alpha: DifferentialForm,
    pub reeb_alpha: VectorField,
    pub sigma: DifferentialForm,
    pub record: Arc<ContactFormRecord>,
    /// `dt ^ alpha ^ (dalpha)^{n-1} ^ d(circle)`: the declared positive
    /// reference volume of the middle piece.
    pub reference: DifferentialForm,
    /// `dt ^ alpha ^ (dalpha)^{n-1}`: fiber reference for fold checks.
    pub fiber_reference: DifferentialForm,
    pub n: usize,
}

impl MiddleModel {
    fn build_chart(&self, epsilon: f64, circle: bool, z_max: f64) -> Result<ChartRef> {
        let mut coords = vec![Chart::line("t", -1.0 - epsilon, 1.0 + epsilon)];
        coords.extend(self.y_coords.iter().cloned());
        if circle {
            coords.push(Chart::angle("theta"));
        } else {
            coords.push(Chart::line("z", -z_max, z_max));
        }
        Chart::new(
            &alloc::format!("{}_{}", self.name, if circle { "theta" } else { "z" }),
            coords,
            None,
        )
    }

    /// Instantiate the middle piece for a certified profile.
    pub fn instantiate(
        &self,
        profile: &GluingProfile,
        circle: bool,
        z_max: f64,
    ) -> Result<MiddlePiece> {
        let chart = self.build_chart(profile.epsilon, circle, z_max)?;
        let circle_coord = if circle { "theta" } else { "z" }.to_string();
        let mut alpha_terms = Vec::new();
        for (c, name) in &self.alpha_terms {
            alpha_terms.push((c.clone(), vec![chart.index_of(name)?]));
        }
        let alpha = DifferentialForm::from_terms(&chart, 1, alpha_terms)?;
        let mut reeb_comps = vec![ScalarExpr::zero(); chart.dim()];
        for (name, c) in &self.reeb_components {
            reeb_comps[chart.index_of(name)?] = c.clone();
        }
        let reeb_alpha = VectorField::new(&chart, reeb_comps)?;
        let dcirc = DifferentialForm::d_coord(&chart, &circle_coord)?;
        let sigma = alpha
            .scale(&profile.f)
            .add(&dcirc.scale(&profile.g))?;
        let dt = DifferentialForm::d_coord(&chart, "t")?;
        let fiber_reference = dt
            .wedge(&alpha)?
            .wedge(&alpha.d().wedge_power(self.n - 1)?)?;
        let reference = fiber_reference.wedge(&dcirc)?;
        let constraint = match &self.level {
            None => None,
            Some(level) => Some(ConstraintHypersurface::new(&chart, level.clone(), 1e-6)?),
        };
        let record = ContactFormRecord::new_symbolic(
            &chart,
            sigma.clone(),
            self.n,
            Reference::Form(reference.clone()),
            constraint,
        )?;
        // alpha really is a contact form on Y: alpha(R) = 1 and
        // i_R dalpha|_TY = 0 at samples
        let pts = record.sample_points(&GridSpec::Halton {
            count: 32,
            offset: 23,
        })?;
        for p in &pts {
            let a_r = chart.eval(&alpha.pair(&reeb_alpha)?, p)?;
            if real::abs(a_r - 1.0) > 1e-9 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "alpha(R_alpha) = {a_r} != 1 on Y"
                )));
            }
            let contraction = alpha.d().interior(&reeb_alpha)?;
            let frame = record.frame_at(p)?;
            let cov = contraction.covector_at(p)?;
            for v in &frame {
                let r = crate::linalg::dot(&cov, v);
                if real::abs(r) > 1e-9 {
                    return Err(Error::InvalidParameter(alloc::format!(
                        "i_R dalpha does not vanish on TY: {r}"
                    )));
                }
            }
        }
        Ok(MiddlePiece {
            chart,
            circle_coord,
            alpha,
            reeb_alpha,
            sigma,
            record,
            reference,
            fiber_reference,
            n: self.n,
        })
    }
}

/// Seam consistency data: profile values against the collar expressions and
/// the covector match between the middle form and the embedded piece forms.
pub struct SeamReport {
    /// |f - K e^{t+1}|, |f' - K e^{t+1}|, |g - K|, |g'| at t = -1 (max),
    /// and the mirrored quantities at t = +1.
    pub profile_value_residual: f64,
    pub profile_derivative_residual: f64,
    /// Max covector mismatch between middle sigma and the embedded piece
    /// sigma at seam samples.
    pub alpha_consistency: f64,
    pub samples: usize,
}

/// The assembled three-piece folded contact form.
pub struct FoldedForm {
    pub k: f64,
    pub profile: GluingProfile,
    pub piece1: Arc<ContactFormRecord>,
    pub piece2: Arc<ContactFormRecord>,
    pub middle: MiddlePiece,
    pub middle_z: MiddlePiece,
    pub seam: SeamReport,
    pub spec1: Arc<MappingTorusSpec>,
    pub spec2: Arc<MappingTorusSpec>,
}

/// Bundle record at an explicit contact constant (no search); `sign = -1`
/// builds the orientation-reversed second piece `lambda - K dtheta`.
pub fn bundle_record_at(
    spec: &Arc<MappingTorusSpec>,
    k: f64,
    sign: f64,
) -> Result<Arc<ContactFormRecord>> {
    let n = spec.fiber.dim() / 2;
    let sigma = BundleSigma {
        lambda: spec.lambda_beta(),
        k: sign * k,
    };
    ContactFormRecord::new_pointwise(
        &spec.total,
        Arc::new(sigma),
        n,
        Reference::ChartVolume {
            sign: sign * spec.orientation_sign,
        },
    )
}

/// Assemble the folded form from two built mapping tori sharing boundary
/// data. `embed1` maps the middle chart into fiber 1 near `t = -1`; `embed2`
/// into fiber 2 near `t = +1` (with the piece-2 collar coordinate `-t`).
#[allow(clippy::too_many_arguments)]
pub fn assemble_folded_form(
    spec1: &Arc<MappingTorusSpec>,
    built1: &BuiltBundle,
    spec2: &Arc<MappingTorusSpec>,
    built2: &BuiltBundle,
    profile: GluingProfile,
    model: &MiddleModel,
    embed1: &SmoothMap,
    embed2: &SmoothMap,
    z_max: f64,
) -> Result<FoldedForm> {
    let k = built1.k.max(built2.k);
    if profile.k != k {
        return Err(Error::InvalidParameter(alloc::format!(
            "profile K = {} must match the common contact constant {k}",
            profile.k
        )));
    }
    let middle = model.instantiate(&profile, true, z_max)?;
    let middle_z = model.instantiate(&profile, false, z_max)?;
    let piece1 = bundle_record_at(spec1, k, 1.0)?;
    let piece2 = bundle_record_at(spec2, k, -1.0)?;

    // Profile side of the seam: conditions (1)-(2) make these exact for
    // closed-form profiles.
    let fp = profile.f_prime();
    let gp = profile.g_prime();
    let e0 = real::exp(0.0);
    let mut value_res = 0.0f64;
    let mut deriv_res = 0.0f64;
    for (tv, fv, fpv, gv, gpv) in [
        (-1.0, k * e0, k * e0, k, 0.0),
        (1.0, k * e0, -k * e0, -k, 0.0),
    ] {
        value_res = value_res.max(real::abs(eval_t(&profile.f, tv) - fv));
        value_res = value_res.max(real::abs(eval_t(&profile.g, tv) - gv));
        deriv_res = deriv_res.max(real::abs(eval_t(&fp, tv) - fpv));
        deriv_res = deriv_res.max(real::abs(eval_t(&gp, tv) - gpv));
    }

    // Covector consistency: middle sigma vs the embedded piece sigma on the
    // middle frame at seam samples.
    let mut alpha_consistency = 0.0f64;
    let mut samples = 0;
    for (piece, embed, t_seam) in [(&piece1, embed1, -1.0), (&piece2, embed2, 1.0)] {
        let pts = middle.record.sample_points(&GridSpec::Halton {
            count: 40,
            offset: 31,
        })?;
        for mut p in pts {
            p[0] = t_seam;
            if let Some(c) = middle.record.constraint() {
                p = c.project(&p)?;
                p[0] = t_seam;
            }
            let frame = middle.record.frame_at(&p)?;
            let mid_cov = middle.record.sigma_covector(&p)?;
            // embed the middle point: fiber part from the embedding map, the
            // circle coordinate passes through
            let dim_mid = middle.chart.dim();
            let theta = p[dim_mid - 1];
            let (q_f, j) = embed.apply_with_jacobian(&p)?;
            let mut q = q_f.clone();
            q.push(theta);
            let piece_cov = piece.sigma_covector(&q)?;
            for v in &frame {
                let mid_v = crate::linalg::dot(&mid_cov, v);
                // push v through the embedding: fiber block by J, theta as-is
                let fdim = q_f.len();
                let mut pv = vec![0.0; fdim + 1];
                for i in 0..fdim {
                    for (l, vl) in v.iter().enumerate() {
                        pv[i] += j[(i, l)] * vl;
                    }
                }
                pv[fdim] = v[dim_mid - 1];
                let piece_v = crate::linalg::dot(&piece_cov, &pv);
                alpha_consistency = alpha_consistency.max(real::abs(mid_v - piece_v));
            }
            samples += 1;
        }
    }
    let seam = SeamReport {
        profile_value_residual: value_res,
        profile_derivative_residual: deriv_res,
        alpha_consistency,
        samples,
    };
    if seam.profile_value_residual > 1e-9 || seam.profile_derivative_residual > 1e-9 {
        return Err(Error::ProfileCondition {
            condition: "seam match of (f, g) against the collar expressions".into(),
            witness: 1.0,
        });
    }
    Ok(FoldedForm {
        k,
        profile,
        piece1,
        piece2,
        middle,
        middle_z,
        seam,
        spec1: spec1.clone(),
        spec2: spec2.clone(),
    })
}

// ---------------------------------------------------------------------------
// middle identity, fold locus, Reeb and contact fields
// ---------------------------------------------------------------------------

/// Max relative deviation between the engine-computed `sigma ^ (dsigma)^n`
/// and the closed form `n f^{n-1}(f'g - fg')` times the reference volume.
pub fn middle_identity_residual(middle: &MiddlePiece, profile: &GluingProfile, points: &[Vec<f64>])
    -> Result<ResidualScan>
{
    let n = middle.n;
    let closed = ScalarExpr::constant(n as f64)
        * profile.f.powi(n as i32 - 1)
        * profile.positivity_expr();
    let mut items = Vec::with_capacity(points.len());
    for p in points {
        let ratio = middle.record.contact_ratio_at(p)?;
        let expect = middle.chart.eval(&closed, p)?;
        let rel = real::abs(ratio - expect) / real::abs(expect).max(1e-300);
        items.push((p.clone(), rel));
    }
    ResidualScan::collect(items).ok_or_else(|| Error::InvalidParameter("empty grid".into()))
}

/// Fold-locus report: the restricted top power against its closed form, the
/// zero set, and the sign structure across the fold.
pub struct FoldLocusReport {
    /// Max |engine - closed| / scale over the grid.
    pub residual: f64,
    /// Largest |t| at which the restricted power is numerically zero.
    pub zero_set_extent: f64,
    /// True when the sign of the restricted power matches -sign(t) everywhere
    /// it is not numerically zero.
    pub signs_consistent: bool,
    pub samples: usize,
}

/// Evaluate `[d sigma |_{fiber}]^n` on fiber frames (all directions except
/// the circle one) against `n f' f^{n-1} dt ^ alpha ^ (dalpha)^{n-1}`.
pub fn fold_locus(
    middle: &MiddlePiece,
    profile: &GluingProfile,
    points: &[Vec<f64>],
    grid_step: f64,
) -> Result<FoldLocusReport> {
    let n = middle.n;
    let closed_coeff = ScalarExpr::constant(n as f64)
        * profile.f_prime()
        * profile.f.powi(n as i32 - 1);
    let dsigma = middle.sigma.d();
    let mut residual = 0.0f64;
    let mut zero_set_extent = 0.0f64;
    let mut signs_consistent = true;
    let mut scale = 0.0f64;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let frame = middle.record.frame_at(p)?;
        debug_assert_eq!(frame.len(), 2 * n + 1);
        let fiber_frame = &frame[..2 * n];
        let dm = dsigma.matrix_at(p)?;
        let mut omega = crate::linalg::Mat::zeros(2 * n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                let mut acc = 0.0;
                for r in 0..middle.chart.dim() {
                    for s in 0..middle.chart.dim() {
                        acc += fiber_frame[i][r] * dm[(r, s)] * fiber_frame[j][s];
                    }
                }
                omega[(i, j)] = acc;
            }
        }
        let engine = two_form_power(&omega);
        let frame_refs: Vec<&[f64]> = fiber_frame.iter().map(|v| v.as_slice()).collect();
        let ref_vol = middle.fiber_reference.eval_frame(p, &frame_refs)?;
        if ref_vol == 0.0 {
            return Err(Error::DegenerateSystem { point: p.clone() });
        }
        // frame-independent coefficient of dt ^ alpha ^ (dalpha)^{n-1}
        let coeff = engine / ref_vol;
        let expect = middle.chart.eval(&closed_coeff, p)?;
        scale = scale.max(real::abs(expect)).max(real::abs(coeff));
        rows.push((p[0], coeff, expect));
    }
    for (t, coeff, expect) in rows {
        residual = residual.max(real::abs(coeff - expect) / scale.max(1e-300));
        if real::abs(coeff) <= 1e-9 * scale {
            zero_set_extent = zero_set_extent.max(real::abs(t));
        } else if coeff * t >= 0.0 {
            // away from the fold the coefficient carries the sign of f',
            // i.e. the opposite sign of t
            if real::abs(t) > grid_step {
                signs_consistent = false;
            }
        }
    }
    Ok(FoldLocusReport {
        residual,
        zero_set_extent,
        signs_consistent,
        samples: points.len(),
    })
}

/// The piecewise Reeb field of the folded form.
pub struct FoldedReeb {
    /// `(-g'/(f'g-fg')) R_alpha + (f'/(f'g-fg')) d_theta` on the middle.
    pub middle: VectorField,
    /// `1/K`: the interior pieces carry `(1/K) d_theta` and `-(1/K) d_theta`.
    pub interior_coefficient: f64,
}

pub fn folded_reeb_field(folded: &FoldedForm) -> Result<FoldedReeb> {
    let mid = &folded.middle;
    let d = folded.profile.positivity_expr();
    let coeff_r = -&folded.profile.g_prime() / &d;
    let coeff_th = folded.profile.f_prime() / d;
    let theta_field = VectorField::basis(&mid.chart, &mid.circle_coord)?;
    let middle = mid
        .reeb_alpha
        .scale(&coeff_r)
        .add(&theta_field.scale(&coeff_th))?;
    Ok(FoldedReeb {
        middle,
        interior_coefficient: 1.0 / folded.k,
    })
}

/// Cross-check of the closed-form middle Reeb field against the pointwise
/// solver of the assembled record.
pub fn folded_reeb_crosscheck(folded: &FoldedForm, points: &[Vec<f64>]) -> Result<ResidualScan> {
    let reeb = folded_reeb_field(folded)?;
    // generic route: coarse contact validation, then the pointwise solver
    folded.middle.record.validate_contact_coarse()?;
    let mut items = Vec::with_capacity(points.len());
    for p in points {
        let formula = reeb.middle.eval(p)?;
        let (solved, _) = folded.middle.record.reeb_at(p)?;
        let mut diff = 0.0f64;
        for (a, b) in formula.iter().zip(&solved) {
            diff = diff.max(real::abs(a - b));
        }
        items.push((p.clone(), diff));
    }
    ResidualScan::collect(items).ok_or_else(|| Error::InvalidParameter("empty grid".into()))
}

/// The contact vector field used by the confinement argument, on the
/// z-coordinate middle piece, together with its verification data.
pub struct FoldedContactField {
    /// `(fg/(f'g-fg')) d_t + z d_z` on the middle z-chart.
    pub middle: VectorField,
    /// Its contact Hamiltonian `sigma(Z)`, structurally `g z`.
    pub hamiltonian: ScalarExpr,
    /// `fg/(f'g-fg')`: the transport coefficient whose sign is (+, 0, -).
    pub t_coefficient: ScalarExpr,
}

pub fn contact_field_z(folded: &FoldedForm) -> Result<FoldedContactField> {
    let mid = &folded.middle_z;
    let d = folded.profile.positivity_expr();
    let t_coefficient = &(&folded.profile.f * &folded.profile.g) / &d;
    let zvar = ScalarExpr::var("z");
    let t_field = VectorField::basis(&mid.chart, "t")?.scale(&t_coefficient);
    let z_field = VectorField::basis(&mid.chart, "z")?.scale(&zvar);
    let middle = t_field.add(&z_field)?;
    let hamiltonian = mid.record.field_to_hamiltonian(&middle)?;
    Ok(FoldedContactField {
        middle,
        hamiltonian,
        t_coefficient,
    })
}

/// The cutoff-modified field `Z'` with Hamiltonian `mu H_Z` where `mu = h(t)`
/// on the middle band.
pub struct CutoffField {
    pub field: VectorField,
    pub hamiltonian: ScalarExpr,
}

pub fn cutoff_contact_field(
    folded: &FoldedForm,
    base: &FoldedContactField,
    cutoff: &CutoffProfile,
) -> Result<CutoffField> {
    let h_z = &cutoff.h * &base.hamiltonian;
    let field = folded
        .middle_z
        .record
        .hamiltonian_field_symbolic(&h_z)
        .ok_or_else(|| Error::InvalidParameter("symbolic contact solve failed".into()))?;
    Ok(CutoffField {
        field,
        hamiltonian: h_z,
    })
}

// ---------------------------------------------------------------------------
// the standard-model field/Hamiltonian table
// ---------------------------------------------------------------------------

/// The `2n+1` contact fields and Hamiltonians of the standard contact
/// structure `dz + sum x_i dy_i` on R^{2n+1}, with verification that each
/// pair satisfies both correspondence equations exactly and that the fields
/// are everywhere linearly independent.
pub struct StandardModel {
    pub chart: ChartRef,
    pub alpha: DifferentialForm,
    pub record: Arc<ContactFormRecord>,
    pub pairs: Vec<(VectorField, ScalarExpr)>,
    /// Symbolic determinant of the component matrix (must be +/-1).
    pub independence_det: ScalarExpr,
}

pub fn standard_model_fields(n: usize) -> Result<StandardModel> {
    if n < 2 {
        return Err(Error::InvalidParameter("standard model needs n >= 2".into()));
    }
    let mut coords = Vec::new();
    for i in 1..=n {
        coords.push(Chart::line(&alloc::format!("x{i}"), -1.0, 1.0));
    }
    for i in 1..=n {
        coords.push(Chart::line(&alloc::format!("y{i}"), -1.0, 1.0));
    }
    coords.push(Chart::line("z", -1.0, 1.0));
    let chart = Chart::new(&alloc::format!("std_r{}", 2 * n + 1), coords, None)?;
    let mut alpha_terms = vec![(ScalarExpr::one(), vec![2 * n])];
    for i in 0..n {
        alpha_terms.push((
            ScalarExpr::var(&alloc::format!("x{}", i + 1)),
            vec![n + i],
        ));
    }
    let alpha = DifferentialForm::from_terms(&chart, 1, alpha_terms)?;
    let record = ContactFormRecord::new_symbolic(
        &chart,
        alpha.clone(),
        n,
        Reference::ChartVolume {
            sign: chart.orientation_sign(),
        },
        None,
    )?;
    let mut pairs = Vec::new();
    for i in 1..=n {
        let z = VectorField::basis(&chart, &alloc::format!("y{i}"))?;
        pairs.push((z, ScalarExpr::var(&alloc::format!("x{i}"))));
    }
    for i in 1..=n {
        let z = VectorField::basis(&chart, &alloc::format!("x{i}"))?
            .add(&VectorField::basis(&chart, "z")?.scale(&-ScalarExpr::var(&alloc::format!("y{i}"))))?;
        pairs.push((z, -ScalarExpr::var(&alloc::format!("y{i}"))));
    }
    pairs.push((VectorField::basis(&chart, "z")?, ScalarExpr::one()));

    // verify both correspondence equations exactly for every pair
    let reeb = record
        .reeb_symbolic()
        .ok_or_else(|| Error::InvalidParameter("standard Reeb solve failed".into()))?;
    let dalpha = alpha.d();
    for (zf, h) in &pairs {
        let pairing = alpha.pair(zf)?;
        if !(pairing - h.clone()).is_zero() {
            return Err(Error::InvalidParameter(
                "alpha(Z) != H in the standard table".into(),
            ));
        }
        // i_Z dalpha = dH(R) alpha - dH
        let mut dh_terms = Vec::new();
        let mut dh_r = ScalarExpr::zero();
        for i in 0..chart.dim() {
            let di = h.partial(chart.coord_name(i));
            dh_r = dh_r + &di * &reeb.components()[i];
            if !di.is_zero() {
                dh_terms.push((di, vec![i]));
            }
        }
        let dh = DifferentialForm::from_terms(&chart, 1, dh_terms)?;
        let rhs = alpha.scale(&dh_r).sub(&dh)?;
        let lhs = dalpha.interior(zf)?;
        if !lhs.sub(&rhs)?.is_zero() {
            return Err(Error::InvalidParameter(
                "i_Z dalpha equation fails in the standard table".into(),
            ));
        }
    }
    // independence: symbolic determinant of the (2n+1)^2 component matrix
    let rows: Vec<Vec<ScalarExpr>> = pairs
        .iter()
        .map(|(z, _)| z.components().to_vec())
        .collect();
    let independence_det = crate::solve::sym_det(&rows)
        .ok_or_else(|| Error::InvalidParameter("independence determinant too large".into()))?;
    let det_const = independence_det.as_constant();
    if det_const.map(real::abs) != Some(1.0) {
        return Err(Error::InvalidParameter(
            "standard fields are not unimodular".into(),
        ));
    }
    Ok(StandardModel {
        chart,
        alpha,
        record,
        pairs,
        independence_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_certifies() {
        let p = make_gluing_profile(1.0, 0.2, &ProfileShape::default()).unwrap();
        assert!(p.certificate.all_passed());
        assert!(p.certificate.gap_margin > 0.0);
        // f(0) = K e exactly
        assert_eq!(eval_t(&p.f, 0.0), real::exp(1.0));
        // g(0) structural zero
        assert!(subst_t(&p.g, &ScalarExpr::zero()).is_zero());
        // structural checks ran structurally
        for c in &p.certificate.conditions {
            assert!(c.passed, "{c:?}");
        }
        let modes: Vec<&str> = p.certificate.conditions.iter().map(|c| c.mode).collect();
        assert!(modes[..4].iter().all(|m| *m == "structural"), "{modes:?}");
    }

    #[test]
    fn candidate_interior_pair_passes_interior_conditions_only() {
        // f = 2 - t^2, g = -t: (3) gives t^2 + 2 > 0 and (4) holds, but the
        // collar matches fail.
        let t = t_var();
        let f = ScalarExpr::constant(2.0) - t.powi(2);
        let g = -&t;
        let cert = certify_candidate(&f, &g, 1.0, 0.2, 20_000);
        let by_name = |n: &str| {
            cert.conditions
                .iter()
                .find(|c| c.name.contains(n))
                .unwrap()
        };
        assert!(by_name("f even").passed);
        assert!(by_name("g odd").passed);
        assert!(!by_name("f collar").passed);
        assert!(!by_name("g collar").passed);
        assert!(by_name("> 0").passed);
        assert!(by_name("vanishes only").passed);
        // and the closed form of the positivity expression
        let d = f.partial("t") * &g - &f * g.partial("t");
        assert_eq!(d, t.powi(2) + ScalarExpr::constant(2.0));
    }

    #[test]
    fn even_g_candidate_is_rejected_with_witness() {
        let t = t_var();
        let f = ScalarExpr::constant(2.0) - t.powi(2);
        let g = t.powi(2); // even, not odd
        let r = GluingProfile::from_pair(f, g, 1.0, 0.2, 4000);
        match r {
            Err(Error::ProfileCondition { condition, .. }) => {
                assert!(condition.contains("g odd"), "{condition}");
            }
            Err(other) => panic!("{other:?}"),
            Ok(_) => panic!("even g must be rejected"),
        }
    }

    #[test]
    fn profile_interpolation_stays_certified() {
        let p0 = make_gluing_profile(1.0, 0.2, &ProfileShape::default()).unwrap();
        let alt = ProfileShape {
            blend_lo: 0.92,
            blend_hi: 0.6,
            cap_coeff: 0.8,
            ramp_half_width: 0.8,
        };
        let p1 = make_gluing_profile(1.0, 0.2, &alt).unwrap();
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let (fs, gs) = p0.interpolate(&p1, s);
            let cert = certify_candidate(&fs, &gs, 1.0, 0.2, 20_000);
            assert!(cert.all_passed(), "s = {s}: {:?}", cert.first_failure());
        }
    }

    #[test]
    fn cutoff_meets_invariants() {
        let c = make_cutoff(0.6, 0.78).unwrap();
        assert_eq!(eval_t(&c.h, 0.9), 1.0);
        assert_eq!(eval_t(&c.h, -1.0), 1.0);
        assert_eq!(eval_t(&c.h, 0.0), 0.0);
        assert!(eval_t(&c.h, 0.3) > 0.0);
        assert!(make_cutoff(0.9, 0.5).is_err());
    }

    #[test]
    fn middle_identity_hand_case() {
        // f = 2 - t^2, g = -t on (t, phi, theta) with alpha = dphi:
        // sigma ^ d sigma = (t^2 + 2) dt ^ dphi ^ dtheta.
        let c = Chart::new(
            "hand_mid",
            vec![
                Chart::line("t", -1.2, 1.2),
                Chart::angle("phi"),
                Chart::angle("theta"),
            ],
            None,
        )
        .unwrap();
        let t = t_var();
        let f = ScalarExpr::constant(2.0) - t.powi(2);
        let g = -&t;
        let alpha = DifferentialForm::d_coord(&c, "phi").unwrap();
        let dth = DifferentialForm::d_coord(&c, "theta").unwrap();
        let sigma = alpha.scale(&f).add(&dth.scale(&g)).unwrap();
        let top = sigma.wedge(&sigma.d()).unwrap();
        let expect = DifferentialForm::from_terms(
            &c,
            3,
            vec![(t.powi(2) + ScalarExpr::constant(2.0), vec![0, 1, 2])],
        )
        .unwrap();
        assert!(top.structurally_equal(&expect), "{top:?}");
        // fiber coefficient f'(t) = -2t: -1 at t = 0.5, +1 at t = -0.5, 0 at 0
        let fp = f.partial("t");
        assert_eq!(eval_t(&fp, 0.5), -1.0);
        assert_eq!(eval_t(&fp, -0.5), 1.0);
        assert_eq!(eval_t(&fp, 0.0), 0.0);
        // transport coefficient fg/(f'g - fg') at t = -0.5: 0.875/2.25
        let d = fp.clone() * &g - &f * g.partial("t");
        let coeff = &(&f * &g) / &d;
        let v = eval_t(&coeff, -0.5);
        // f(-1/2) g(-1/2) / D(-1/2) = 1.75 * 0.5 / 2.25 = 0.875 / 2.25 > 0
        assert!((v - 0.875 / 2.25).abs() < 1e-15);
        assert!(v > 0.0);
    }

    #[test]
    fn standard_model_table_n2_and_n3() {
        for n in [2usize, 3] {
            let model = standard_model_fields(n).unwrap();
            assert_eq!(model.pairs.len(), 2 * n + 1);
            assert_eq!(model.independence_det.as_constant().map(real::abs), Some(1.0));
            // spot check the displayed pairs
            let (z1, h1) = &model.pairs[0];
            assert!(z1.structurally_equal(&VectorField::basis(&model.chart, "y1").unwrap()));
            assert_eq!(h1, &ScalarExpr::var("x1"));
            let (zn1, hn1) = &model.pairs[n];
            assert_eq!(hn1, &(-ScalarExpr::var("y1")));
            assert_eq!(
                zn1.component("z").unwrap(),
                &(-ScalarExpr::var("y1"))
            );
            let (zlast, hlast) = &model.pairs[2 * n];
            assert!(zlast.structurally_equal(&VectorField::basis(&model.chart, "z").unwrap()));
            assert_eq!(hlast, &ScalarExpr::one());
        }
        assert!(standard_model_fields(1).is_err());
    }

    #[test]
    fn standard_model_roundtrip_is_exact() {
        let model = standard_model_fields(2).unwrap();
        for (z, h) in &model.pairs {
            let zh = model.record.hamiltonian_field_symbolic(h).unwrap();
            assert!(zh.structurally_equal(z), "H = {h}");
            let back = model.record.field_to_hamiltonian(&zh).unwrap();
            assert!((back - h.clone()).is_zero());
        }
    }
}
