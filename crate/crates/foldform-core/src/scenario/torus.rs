//! The standard product torus: disk fibers with the rotational Liouville
//! form, identity or Hamiltonian-flow monodromy, and the bundle form
//! `lambda_st + K dtheta`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{anchors, scan_check, ScenarioParams};
use crate::chart::{Chart, ChartRef};
use crate::contact::{ContactFormRecord, GridSpec, Reference, ResidualScan};
use crate::error::Result;
use crate::expr::ScalarExpr;
use crate::fibration::{
    build_bundle_contact_form, circle_partition, collar_check, horizontal_vector,
    monodromy_from_hamiltonians, verify_exact_symplectomorphism, BuiltBundle, CollarModel,
    CollarSpec, MappingTorusSpec,
};
use crate::form::{DifferentialForm, VectorField};
use crate::real;
use crate::report::CheckResult;
use crate::rng::Rng;

/// Disk fiber chart `D^{2n}` as the box `[-1,1]^{2n}` with coordinates
/// `x1, y1, ..., xn, yn`.
pub fn disk_chart(n: usize) -> Result<ChartRef> {
    let mut coords = Vec::new();
    for i in 1..=n {
        coords.push(Chart::line(&alloc::format!("x{i}"), -1.0, 1.0));
        coords.push(Chart::line(&alloc::format!("y{i}"), -1.0, 1.0));
    }
    Chart::new(&alloc::format!("d{}", 2 * n), coords, None)
}

/// `lambda_st = sum_i (x_i dy_i - y_i dx_i)`.
pub fn rotational_liouville(chart: &ChartRef, n: usize) -> Result<DifferentialForm> {
    let mut terms = Vec::new();
    for i in 1..=n {
        let xi = alloc::format!("x{i}");
        let yi = alloc::format!("y{i}");
        terms.push((ScalarExpr::var(&xi), vec![chart.index_of(&yi)?]));
        terms.push((-ScalarExpr::var(&yi), vec![chart.index_of(&xi)?]));
    }
    DifferentialForm::from_terms(chart, 1, terms)
}

fn radius_sq(n: usize) -> ScalarExpr {
    let mut acc = ScalarExpr::zero();
    for i in 1..=n {
        acc = acc
            + ScalarExpr::var(&alloc::format!("x{i}")).powi(2)
            + ScalarExpr::var(&alloc::format!("y{i}")).powi(2);
    }
    acc
}

/// Gentle interior Hamiltonian: a plateau bump of the squared radius,
/// vanishing identically (with all derivatives) for `r^2 >= 0.8`.
pub fn interior_hamiltonian(n: usize) -> ScalarExpr {
    ScalarExpr::constant(0.2) * (ScalarExpr::one() - ScalarExpr::bump(&radius_sq(n), 0.1, 0.8))
}

pub struct DiskTorus {
    pub n: usize,
    pub spec: Arc<MappingTorusSpec>,
    pub built: BuiltBundle,
    /// The standard symbolic product form `lambda_st + K_std dtheta`.
    pub sigma_st: Arc<ContactFormRecord>,
}

pub fn build_disk_torus(
    n: usize,
    with_monodromy: bool,
    params: &ScenarioParams,
) -> Result<DiskTorus> {
    let fiber = disk_chart(n)?;
    let beta = rotational_liouville(&fiber, n)?;
    let collar = CollarSpec {
        radial_coords: (0..2 * n).collect(),
        inner_radius: 0.9,
    };
    let hs = if with_monodromy {
        vec![interior_hamiltonian(n)]
    } else {
        vec![]
    };
    let monodromy =
        monodromy_from_hamiltonians(&fiber, &beta, hs, collar, params.integrator_tol)?;
    let spec = MappingTorusSpec::new(
        &fiber,
        beta,
        monodromy,
        circle_partition(core::f64::consts::PI / 2.0)?,
        CollarModel {
            radial_coords: (0..2 * n).collect(),
            weight: 0.5,
        },
        params.epsilon,
    )?;
    // certification on half the audit budget, audit twice as fine; flows are
    // costly, so the twisted build uses a quarter of it
    let cert_points = if with_monodromy {
        (params.audit_points / 4).max(200)
    } else {
        (params.audit_points / 2).max(400)
    };
    let built = build_bundle_contact_form(
        &spec,
        &GridSpec::Halton {
            count: cert_points,
            offset: 0,
        },
        &GridSpec::Halton {
            count: 2 * cert_points,
            offset: 10_000,
        },
    )?;
    // sigma_st on the total chart, symbolically
    let lam = rotational_liouville(&spec.total, n)?;
    let sigma_st_form = lam.add(
        &DifferentialForm::d_coord(&spec.total, "theta")?
            .scale(&ScalarExpr::constant(params.k_standard)),
    )?;
    let sigma_st = ContactFormRecord::new_symbolic(
        &spec.total,
        sigma_st_form,
        n,
        Reference::ChartVolume { sign: 1.0 },
        None,
    )?;
    Ok(DiskTorus {
        n,
        spec,
        built,
        sigma_st,
    })
}

/// The factorial-power constant `K n! 2^n` of the standard form's ratio.
pub fn standard_ratio(n: usize, k: f64) -> f64 {
    let mut fact = 1.0;
    for i in 1..=n as u64 {
        fact *= i as f64;
    }
    k * fact * real::powi(2.0, n as i32)
}

pub fn checks(
    params: &ScenarioParams,
    sink: &mut dyn FnMut(CheckResult),
) -> Result<()> {
    let n = params.n.clamp(1, 2);

    // --- standard product form, identity monodromy ---------------------
    let plain = build_disk_torus(n, false, params)?;
    let per_axis = params.grid_override.unwrap_or(if n == 1 { 20 } else { 10 });
    let scan = plain
        .sigma_st
        .contact_residual(&GridSpec::Product { per_axis })?;
    sink(scan_check(
        "sigma_st_contact",
        anchors::CONTACT,
        &scan,
        true,
        0.0,
    ));
    let expect = standard_ratio(n, params.k_standard);
    let const_dev = (scan.min - expect).abs().max((scan.max - expect).abs()) / expect;
    sink(CheckResult::residual_below(
        "sigma_st_ratio_constant",
        anchors::CONTACT,
        const_dev,
        1e-12,
        scan.samples as u64,
        Some(scan.max_at.clone()),
    ));

    // --- contact-constant search and audit ------------------------------
    sink(CheckResult::flag(
        "k_doubling_search",
        anchors::BUNDLE,
        plain.built.k_min <= 1.0 && plain.built.k == 2.0 * plain.built.k_min,
        None,
    ));
    sink(scan_check(
        "k_certification_grid",
        anchors::BUNDLE,
        &plain.built.certification,
        true,
        0.0,
    ));
    sink(scan_check(
        "k_audit_grid",
        anchors::BUNDLE,
        &plain.built.audit,
        true,
        0.0,
    ));

    // --- collar checks ---------------------------------------------------
    let scan = collar_check(&plain.built, &plain.spec, 6, 24, 8)?;
    sink(CheckResult::residual_below(
        "collar_identity_monodromy",
        anchors::COLLAR,
        scan.max,
        0.0,
        scan.samples as u64,
        Some(scan.max_at.clone()),
    ));

    let twisted = build_disk_torus(n, true, params)?;
    let scan = collar_check(&twisted.built, &twisted.spec, 6, 24, 8)?;
    sink(CheckResult::residual_below(
        "collar_flow_monodromy",
        anchors::COLLAR,
        scan.max,
        1e-6,
        scan.samples as u64,
        Some(scan.max_at.clone()),
    ));

    // --- partition of unity ---------------------------------------------
    let part = &plain.spec.partition;
    let sum_exact = (&part.f1 + &part.f2 - ScalarExpr::one()).is_zero();
    sink(CheckResult::flag(
        "partition_of_unity",
        anchors::PARTITION,
        sum_exact && part.f1_at(0.0) == 1.0 && part.f1_at(core::f64::consts::PI) == 0.0,
        None,
    ));

    // --- fiber restriction: the form restricts to the pulled-back
    //     Liouville form on 100 random fibers -----------------------------
    let mut rng = Rng::new(params.seed);
    let lambda = twisted.spec.lambda_beta();
    let mut worst = 0.0f64;
    let mut worst_at = vec![];
    for _ in 0..100 {
        let p = twisted.spec.fiber.random_point(&mut rng);
        let theta = rng.range(0.0, real::TWO_PI);
        // sigma has no d(fiber) contribution beyond lambda and none of the
        // fiber components involve K: compare the evaluator against the
        // independent two-branch formula
        let cov = lambda.covector(&p, theta)?;
        let f1 = twisted.spec.partition.f1_at(theta);
        let beta_cov = twisted.spec.beta.covector_at(&p)?;
        let expect: Vec<f64> = if twisted.spec.partition.theta_is_twisted(theta) && f1 > 0.0 {
            let pulled = twisted
                .spec
                .monodromy
                .map
                .pullback_covector_at(&twisted.spec.beta, &p)?;
            beta_cov
                .iter()
                .zip(&pulled)
                .map(|(b, t)| (1.0 - f1) * b + f1 * t)
                .collect()
        } else {
            beta_cov
        };
        for (a, b) in cov.iter().zip(&expect) {
            if (a - b).abs() > worst {
                worst = (a - b).abs();
                worst_at = p.clone();
            }
        }
    }
    sink(CheckResult::residual_below(
        "fiber_restriction",
        anchors::RESTRICT,
        worst,
        1e-9,
        100,
        Some(worst_at),
    ));

    // --- vertical nondegeneracy ------------------------------------------
    let mut dets = Vec::new();
    for ptheta in twisted.spec.total.halton_points(400, 41) {
        let (p, theta) = (ptheta[..2 * n].to_vec(), ptheta[2 * n]);
        let (_, m) = lambda.covector_and_d_matrix(&p, theta)?;
        let mut fiber_block = crate::linalg::Mat::zeros(2 * n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                fiber_block[(i, j)] = m[(i, j)];
            }
        }
        dets.push((ptheta, real::abs(crate::linalg::det(&fiber_block))));
    }
    let scan = ResidualScan::collect(dets).expect("nonempty");
    sink(CheckResult::margin_above(
        "vertical_nondegeneracy",
        anchors::VERTICAL,
        scan.min / scan.max,
        1e-8,
        scan.samples as u64,
        Some(scan.min_at.clone()),
    ));

    // --- horizontal complement -------------------------------------------
    let plain_lambda = plain.spec.lambda_beta();
    let u = horizontal_vector(&plain_lambda, &vec![0.2; 2 * n], 1.0)?;
    let trivial_horizontal = u[..2 * n].iter().all(|c| c.abs() < 1e-12) && u[2 * n] == 1.0;
    let mut residual = 0.0f64;
    for ptheta in twisted.spec.total.halton_points(60, 57) {
        let (p, theta) = (ptheta[..2 * n].to_vec(), ptheta[2 * n]);
        let u = horizontal_vector(&lambda, &p, theta)?;
        let (_, m) = lambda.covector_and_d_matrix(&p, theta)?;
        for j in 0..2 * n {
            let mut v = 0.0;
            for (i, ui) in u.iter().enumerate() {
                v += ui * m[(i, j)];
            }
            residual = residual.max(real::abs(v));
        }
    }
    sink(CheckResult::flag(
        "horizontal_trivial_is_dtheta",
        anchors::HORIZONTAL,
        trivial_horizontal,
        None,
    ));
    sink(CheckResult::residual_below(
        "horizontal_annihilates_vertical",
        anchors::HORIZONTAL,
        residual,
        1e-9,
        60,
        None,
    ));

    // --- exact-symplectomorphism evidence --------------------------------
    let report = verify_exact_symplectomorphism(twisted.monodromy(), &twisted.spec.beta, 40)?;
    sink(CheckResult::residual_below(
        "monodromy_preserves_dbeta",
        anchors::EXACT,
        report.dbeta_residual,
        1e-6,
        report.samples as u64,
        None,
    ));
    sink(CheckResult::residual_below(
        "monodromy_difference_closed",
        anchors::EXACT,
        report.closedness_residual,
        1e-6,
        report.samples as u64,
        None,
    ));
    sink(CheckResult::residual_below(
        "monodromy_identity_on_collar",
        anchors::EXACT,
        report.collar_identity_residual,
        1e-6,
        60,
        None,
    ));

    // --- Reeb field of the standard form ----------------------------------
    let reeb = plain
        .sigma_st
        .reeb_symbolic()
        .expect("standard Reeb solve is closed-form");
    let mut expect_comps = vec![ScalarExpr::zero(); 2 * n + 1];
    expect_comps[2 * n] = ScalarExpr::constant(1.0 / params.k_standard);
    let expect_field = VectorField::new(&plain.spec.total, expect_comps)?;
    sink(CheckResult::flag(
        "reeb_of_sigma_st",
        anchors::REEB_EQS,
        reeb.structurally_equal(&expect_field),
        None,
    ));
    let mut worst = 0.0f64;
    let count = 10_000usize;
    let sigma_form = plain.sigma_st.symbolic_sigma().expect("symbolic");
    let pairing = sigma_form.pair(&reeb)?;
    let contraction = sigma_form.d().interior(&reeb)?;
    for p in plain.spec.total.halton_points(count, 3) {
        let a = plain.spec.total.eval(&pairing, &p)?;
        worst = worst.max(real::abs(a - 1.0));
        let cov = contraction.covector_at(&p)?;
        for c in cov {
            worst = worst.max(real::abs(c));
        }
    }
    sink(CheckResult::residual_below(
        "reeb_defining_equations",
        anchors::REEB_EQS,
        worst,
        1e-10,
        count as u64,
        None,
    ));

    Ok(())
}

impl DiskTorus {
    fn monodromy(&self) -> &crate::fibration::MonodromyMap {
        &self.spec.monodromy
    }
}
