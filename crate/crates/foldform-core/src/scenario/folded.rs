//! Folded-sum scenarios: two disk bundles glued along the boundary sphere
//! (any half-dimension), and two cotangent bundles glued along the torus
//! sphere bundle.

use alloc::vec;
use alloc::vec::Vec;

use super::{anchors, scan_check, ScenarioParams};
use crate::chart::Chart;
use crate::contact::GridSpec;
use crate::dynamics::integrate;
use crate::error::Result;
use crate::expr::{ScalarExpr, Sym};
use crate::fibration::collar_check;
use crate::folding::{
    assemble_folded_form, certify_candidate, contact_field_z, folded_reeb_crosscheck,
    folded_reeb_field, fold_locus, make_cutoff, make_gluing_profile,
    middle_identity_residual, standard_model_fields, FoldedForm, MiddleModel, ProfileShape,
};
use crate::map::SmoothMap;
use crate::real;
use crate::report::CheckResult;

fn spheres_middle_model(n: usize, k: f64) -> MiddleModel {
    let inv_k = ScalarExpr::constant(1.0 / k);
    let kc = ScalarExpr::constant(k);
    if n == 1 {
        MiddleModel {
            name: "sphere_middle".into(),
            y_coords: vec![Chart::angle("phi")],
            alpha_terms: vec![(inv_k, "phi".into())],
            reeb_components: vec![("phi".into(), kc)],
            level: None,
            n,
        }
    } else {
        let mut y_coords = Vec::new();
        let mut alpha_terms = Vec::new();
        let mut reeb_components = Vec::new();
        let mut level = -ScalarExpr::one();
        for i in 1..=n {
            let xi = alloc::format!("x{i}");
            let yi = alloc::format!("y{i}");
            y_coords.push(Chart::line(&xi, -1.0, 1.0));
            y_coords.push(Chart::line(&yi, -1.0, 1.0));
            alpha_terms.push((&inv_k * &ScalarExpr::var(&xi), yi.clone()));
            alpha_terms.push((-(&inv_k * &ScalarExpr::var(&yi)), xi.clone()));
            reeb_components.push((xi.clone(), -(&kc * &ScalarExpr::var(&yi))));
            reeb_components.push((yi.clone(), &kc * &ScalarExpr::var(&xi)));
            level = level + ScalarExpr::var(&xi).powi(2) + ScalarExpr::var(&yi).powi(2);
        }
        MiddleModel {
            name: "sphere_middle".into(),
            y_coords,
            alpha_terms,
            reeb_components,
            level: Some(level),
            n,
        }
    }
}

fn t3_middle_model(k: f64) -> MiddleModel {
    let inv_k = ScalarExpr::constant(1.0 / k);
    let kc = ScalarExpr::constant(k);
    let level = ScalarExpr::var("x1").powi(2) + ScalarExpr::var("x2").powi(2)
        + ScalarExpr::var("x3").powi(2)
        - ScalarExpr::one();
    MiddleModel {
        name: "t3_middle".into(),
        y_coords: vec![
            Chart::angle("th1"),
            Chart::angle("th2"),
            Chart::angle("th3"),
            Chart::line("x1", -1.0, 1.0),
            Chart::line("x2", -1.0, 1.0),
            Chart::line("x3", -1.0, 1.0),
        ],
        alpha_terms: vec![
            (&inv_k * &ScalarExpr::var("x1"), "th1".into()),
            (-(&inv_k * &ScalarExpr::var("x2")), "th2".into()),
            (&inv_k * &ScalarExpr::var("x3"), "th3".into()),
        ],
        reeb_components: vec![
            ("th1".into(), &kc * &ScalarExpr::var("x1")),
            ("th2".into(), -(&kc * &ScalarExpr::var("x2"))),
            ("th3".into(), &kc * &ScalarExpr::var("x3")),
        ],
        level: Some(level),
        n: 3,
    }
}

/// Collar embedding of the middle chart into the disk fiber near a seam:
/// radial scaling by `exp(weight (t+1))`, with the `n = 1` case parametrized
/// by the boundary angle. `flip` swaps `t -> -t` for the second piece.
fn spheres_embedding(
    middle: &crate::folding::MiddlePiece,
    fiber: &crate::chart::ChartRef,
    n: usize,
    flip: bool,
) -> Result<SmoothMap> {
    let t = if flip {
        -ScalarExpr::var("t")
    } else {
        ScalarExpr::var("t")
    };
    let scale = ((t + ScalarExpr::one()) * ScalarExpr::rational(1, 2)).exp();
    let rules = if n == 1 {
        vec![
            &scale * &ScalarExpr::var("phi").cos(),
            &scale * &ScalarExpr::var("phi").sin(),
        ]
    } else {
        let mut rules = Vec::new();
        for i in 1..=n {
            rules.push(&scale * &ScalarExpr::var(&alloc::format!("x{i}")));
            rules.push(&scale * &ScalarExpr::var(&alloc::format!("y{i}")));
        }
        rules
    };
    SmoothMap::closed(&middle.chart, fiber, rules)
}

fn t3_embedding(
    middle: &crate::folding::MiddlePiece,
    fiber: &crate::chart::ChartRef,
    flip: bool,
) -> Result<SmoothMap> {
    let t = if flip {
        -ScalarExpr::var("t")
    } else {
        ScalarExpr::var("t")
    };
    let scale = (t + ScalarExpr::one()).exp();
    let rules = vec![
        ScalarExpr::var("th1"),
        ScalarExpr::var("th2"),
        ScalarExpr::var("th3"),
        &scale * &ScalarExpr::var("x1"),
        &scale * &ScalarExpr::var("x2"),
        &scale * &ScalarExpr::var("x3"),
    ];
    SmoothMap::closed(&middle.chart, fiber, rules)
}

pub fn build_folded_spheres(params: &ScenarioParams) -> Result<FoldedForm> {
    let n = params.n.clamp(1, 3);
    let torus = super::torus::build_disk_torus(n, false, params)?;
    let k = torus.built.k;
    let profile = make_gluing_profile(k, params.epsilon, &params.shape)?;
    let model = spheres_middle_model(n, k);
    // instantiate once to learn the middle chart for the embeddings
    let probe = model.instantiate(&profile, true, params.z_max)?;
    let embed1 = spheres_embedding(&probe, &torus.spec.fiber, n, false)?;
    let embed2 = spheres_embedding(&probe, &torus.spec.fiber, n, true)?;
    assemble_folded_form(
        &torus.spec,
        &torus.built,
        &torus.spec,
        &torus.built,
        profile,
        &model,
        &embed1,
        &embed2,
        params.z_max,
    )
}

pub fn build_folded_t3(params: &ScenarioParams) -> Result<FoldedForm> {
    let assets = super::cotangent::build_assets()?;
    let monodromy = crate::fibration::monodromy_from_hamiltonians(
        &assets.fiber,
        &assets.beta,
        vec![],
        crate::fibration::CollarSpec {
            radial_coords: vec![3, 4, 5],
            inner_radius: 0.9,
        },
        params.integrator_tol,
    )?;
    let spec = super::cotangent::build_torus_spec(&assets, monodromy, params.epsilon)?;
    let cert = (params.audit_points / 2).max(400);
    let built = crate::fibration::build_bundle_contact_form(
        &spec,
        &GridSpec::Halton {
            count: cert,
            offset: 0,
        },
        &GridSpec::Halton {
            count: 2 * cert,
            offset: 10_000,
        },
    )?;
    let k = built.k;
    let profile = make_gluing_profile(k, params.epsilon, &params.shape)?;
    let model = t3_middle_model(k);
    let probe = model.instantiate(&profile, true, params.z_max)?;
    let embed1 = t3_embedding(&probe, &spec.fiber, false)?;
    let embed2 = t3_embedding(&probe, &spec.fiber, true)?;
    assemble_folded_form(
        &spec, &built, &spec, &built, profile, &model, &embed1, &embed2, params.z_max,
    )
}

/// Checks shared by every folded scenario.
fn folded_common_checks(
    folded: &FoldedForm,
    params: &ScenarioParams,
    sink: &mut dyn FnMut(CheckResult),
) -> Result<()> {
    let cert = &folded.profile.certificate;
    sink(CheckResult::flag(
        "profile_conditions",
        anchors::PROFILE,
        cert.all_passed(),
        cert.first_failure().and_then(|c| c.witness.map(|w| vec![w])),
    ));
    sink(CheckResult::margin_above(
        "profile_positivity_gap",
        anchors::PROFILE,
        cert.gap_margin,
        0.0,
        cert.sweep_points as u64,
        None,
    ));
    sink(CheckResult::residual_below(
        "seam_profile_match",
        anchors::SEAM,
        folded
            .seam
            .profile_value_residual
            .max(folded.seam.profile_derivative_residual),
        1e-9,
        4,
        None,
    ));
    sink(CheckResult::residual_below(
        "seam_form_consistency",
        anchors::SEAM,
        folded.seam.alpha_consistency,
        1e-9,
        folded.seam.samples as u64,
        None,
    ));

    // contact on the three pieces
    let scan = folded.piece1.contact_residual(&GridSpec::Halton {
        count: 500,
        offset: 0,
    })?;
    sink(scan_check("contact_piece_1", anchors::CONTACT, &scan, true, 0.0));
    let scan = folded.piece2.contact_residual(&GridSpec::Halton {
        count: 500,
        offset: 0,
    })?;
    sink(scan_check("contact_piece_2", anchors::CONTACT, &scan, true, 0.0));
    let scan = folded.middle.record.contact_residual(&GridSpec::Halton {
        count: 1500,
        offset: 0,
    })?;
    sink(scan_check("contact_middle", anchors::CONTACT, &scan, true, 0.0));

    // seam-straddling band
    let mut straddle = folded.middle.record.sample_points(&GridSpec::Halton {
        count: 400,
        offset: 61,
    })?;
    for (i, p) in straddle.iter_mut().enumerate() {
        // spread the band (-1 - eps/2, -1 + 0.3) and its mirror
        let frac = (i as f64 + 0.5) / 400.0;
        let band = -1.0 - params.epsilon / 2.0 + (params.epsilon / 2.0 + 0.3) * frac;
        p[0] = if i % 2 == 0 { band } else { -band };
    }
    let mut items = Vec::new();
    for p in &straddle {
        items.push((p.clone(), folded.middle.record.contact_ratio_at(p)?));
    }
    let scan = crate::contact::ResidualScan::collect(items).expect("nonempty");
    sink(scan_check(
        "contact_seam_straddle",
        anchors::CONTACT,
        &scan,
        true,
        0.0,
    ));

    // middle identity
    let pts = folded.middle.record.sample_points(&GridSpec::Halton {
        count: params.middle_points,
        offset: 101,
    })?;
    let scan = middle_identity_residual(&folded.middle, &folded.profile, &pts)?;
    sink(scan_check(
        "middle_identity",
        anchors::MIDDLE_IDENTITY,
        &scan,
        false,
        1e-9,
    ));

    // fold locus on a t-graded grid
    let t_steps = 64usize;
    let mut locus_pts = folded.middle.record.sample_points(&GridSpec::Halton {
        count: 2000,
        offset: 211,
    })?;
    let t_lo = -1.0 - folded.profile.epsilon;
    let t_hi = 1.0 + folded.profile.epsilon;
    let step = (t_hi - t_lo) / t_steps as f64;
    for (i, p) in locus_pts.iter_mut().enumerate() {
        p[0] = t_lo + step * ((i % t_steps) as f64 + 0.5);
    }
    // ensure the exact fold slice is represented
    for p in locus_pts.iter_mut().take(40) {
        p[0] = 0.0;
    }
    let report = fold_locus(&folded.middle, &folded.profile, &locus_pts, step)?;
    sink(CheckResult::residual_below(
        "fold_locus_closed_form",
        anchors::FOLD_LOCUS,
        report.residual,
        1e-9,
        report.samples as u64,
        None,
    ));
    sink(CheckResult::residual_below(
        "fold_locus_zero_set",
        anchors::FOLD_LOCUS,
        report.zero_set_extent,
        step,
        report.samples as u64,
        None,
    ));
    sink(CheckResult::flag(
        "fold_locus_sign_flip",
        anchors::FOLD_LOCUS,
        report.signs_consistent,
        None,
    ));

    // folded Reeb: cross-check and the value at the fold
    let pts = folded.middle.record.sample_points(&GridSpec::Halton {
        count: params.middle_points,
        offset: 301,
    })?;
    let scan = folded_reeb_crosscheck(folded, &pts)?;
    sink(scan_check(
        "folded_reeb_crosscheck",
        anchors::FOLDED_REEB,
        &scan,
        false,
        1e-10,
    ));
    let reeb = folded_reeb_field(folded)?;
    let ke = folded.k * real::exp(1.0);
    let mut fold_pts = folded.middle.record.sample_points(&GridSpec::Halton {
        count: 200,
        offset: 401,
    })?;
    let mut worst = 0.0f64;
    for p in fold_pts.iter_mut() {
        p[0] = 0.0;
        let got = reeb.middle.eval(p)?;
        let r_alpha = folded.middle.reeb_alpha.eval(p)?;
        for (i, g) in got.iter().enumerate() {
            worst = worst.max(real::abs(g - r_alpha[i] / ke));
        }
    }
    sink(CheckResult::residual_below(
        "folded_reeb_at_fold",
        anchors::REEB_AT_FOLD,
        worst,
        1e-10,
        fold_pts.len() as u64,
        None,
    ));

    // the contact field Z and its Hamiltonian
    let zfield = contact_field_z(folded)?;
    let g_ext_z = &folded.profile.g * &ScalarExpr::var("z");
    sink(CheckResult::flag(
        "contact_field_hamiltonian",
        anchors::CONTACT_FIELD,
        (&zfield.hamiltonian - &g_ext_z).is_zero(),
        None,
    ));
    // sign pattern of the transport coefficient
    let mut sign_ok = true;
    let mut witness = None;
    let samples = 1000usize;
    for i in 0..=samples {
        let t = -1.0 + 2.0 * i as f64 / samples as f64;
        let v = zfield
            .t_coefficient
            .eval(&|n| (n == "t").then_some(t))
            .expect("coefficient depends on t only");
        let ok = if t == 0.0 {
            v == 0.0
        } else if t < 0.0 {
            v > 0.0
        } else {
            v < 0.0
        };
        if !ok {
            sign_ok = false;
            witness = Some(vec![t, v]);
            break;
        }
    }
    sink(CheckResult::flag(
        "contact_field_sign_pattern",
        anchors::CONTACT_FIELD,
        sign_ok,
        witness,
    ));
    // structural zeros: d_t component at t = 0 and d_z component at z = 0
    let mut at_fold = alloc::collections::BTreeMap::new();
    at_fold.insert(Sym::new("t"), ScalarExpr::zero());
    let t_comp_at_fold = zfield.t_coefficient.substitute(&at_fold);
    let mut at_zero = alloc::collections::BTreeMap::new();
    at_zero.insert(Sym::new("z"), ScalarExpr::zero());
    let z_comp = zfield
        .middle
        .component("z")
        .expect("middle field has a z slot")
        .substitute(&at_zero);
    sink(CheckResult::flag(
        "contact_field_structural_zeros",
        anchors::CONTACT_FIELD,
        t_comp_at_fold.is_zero() && z_comp.is_zero(),
        None,
    ));

    // round trip: the correspondence applied to sigma(Z) reproduces the
    // displayed field at sample points
    let mut worst = 0.0f64;
    let mut rt_pts = folded.middle_z.record.sample_points(&GridSpec::Halton {
        count: 200,
        offset: 83,
    })?;
    let zdim = folded.middle_z.chart.dim() - 1;
    for p in rt_pts.iter_mut() {
        p[zdim] = p[zdim].clamp(-1.5, 1.5);
        let solved = folded
            .middle_z
            .record
            .hamiltonian_field_at(&zfield.hamiltonian, p)?;
        let formula = zfield.middle.eval(p)?;
        for (a, b) in solved.iter().zip(&formula) {
            worst = worst.max(real::abs(a - b));
        }
    }
    out_check_round_trip(sink, worst, rt_pts.len());

    // confinement: flowing Z from t = -1/2 on the zero section increases t
    // toward the fold without crossing it
    let mut x0 = folded
        .middle_z
        .record
        .sample_points(&GridSpec::Halton { count: 1, offset: 3 })?
        .remove(0);
    x0[0] = -0.5;
    let zdim = folded.middle_z.chart.dim() - 1;
    x0[zdim] = 0.0;
    let traj = integrate(&zfield.middle, &x0, 20.0, 1e-10)?;
    let mut monotone = true;
    let mut stays_negative = true;
    let mut prev = x0[0];
    for s in &traj.samples {
        if s.lift[0] < prev - 1e-12 {
            monotone = false;
        }
        if s.lift[0] >= 0.0 {
            stays_negative = false;
        }
        prev = s.lift[0];
    }
    sink(CheckResult::flag(
        "contact_field_confinement",
        anchors::CONTACT_FIELD,
        monotone && stays_negative && prev > -0.5,
        None,
    ));

    // cutoff field
    let cutoff = make_cutoff(0.6, 0.78)?;
    let h_at_fold = cutoff
        .h
        .eval(&|n| (n == "t").then_some(0.0))
        .expect("h depends on t only");
    let zprime = cutoff_field_checked(folded, &zfield, &cutoff, params)?;
    sink(CheckResult::flag(
        "cutoff_hamiltonian_vanishes_at_fold",
        anchors::CUTOFF,
        h_at_fold == 0.0 && {
            let mut at_fold = alloc::collections::BTreeMap::new();
            at_fold.insert(Sym::new("t"), ScalarExpr::zero());
            zprime.hamiltonian.substitute(&at_fold).is_zero()
        },
        None,
    ));
    sink(CheckResult::residual_below(
        "cutoff_off_band_agreement",
        anchors::CUTOFF,
        zprime.off_band_residual,
        1e-10,
        zprime.off_band_samples as u64,
        None,
    ));
    sink(CheckResult::residual_below(
        "cutoff_round_trip",
        anchors::CUTOFF,
        zprime.round_trip_residual,
        1e-10,
        zprime.round_trip_samples as u64,
        None,
    ));
    sink(CheckResult::residual_below(
        "cutoff_fold_component",
        anchors::CUTOFF,
        zprime.fold_component,
        1e-12,
        zprime.fold_samples as u64,
        None,
    ));
    Ok(())
}

fn out_check_round_trip(sink: &mut dyn FnMut(CheckResult), worst: f64, samples: usize) {
    sink(CheckResult::residual_below(
        "contact_field_round_trip",
        anchors::HAMILTONIAN,
        worst,
        1e-10,
        samples as u64,
        None,
    ));
}

struct CutoffChecks {
    hamiltonian: ScalarExpr,
    off_band_residual: f64,
    off_band_samples: usize,
    round_trip_residual: f64,
    round_trip_samples: usize,
    fold_component: f64,
    fold_samples: usize,
}

/// Evaluate the cutoff-modified field pointwise on the z-chart middle piece:
/// agreement with `Z` off the band, the numeric round trip of its
/// Hamiltonian, and the vanishing transport component at the fold.
fn cutoff_field_checked(
    folded: &FoldedForm,
    zfield: &crate::folding::FoldedContactField,
    cutoff: &crate::folding::CutoffProfile,
    _params: &ScenarioParams,
) -> Result<CutoffChecks> {
    let mid = &folded.middle_z;
    let hamiltonian = &cutoff.h * &zfield.hamiltonian;
    let mut pts = mid.record.sample_points(&GridSpec::Halton {
        count: 300,
        offset: 71,
    })?;
    // keep z inside a moderate band so the fields stay comparable
    let zdim = mid.chart.dim() - 1;
    for p in pts.iter_mut() {
        p[zdim] = p[zdim].clamp(-1.5, 1.5);
    }
    let mut off_band_residual = 0.0f64;
    let mut off_band_samples = 0usize;
    let mut round_trip_residual = 0.0f64;
    let mut fold_component = 0.0f64;
    let mut fold_samples = 0usize;
    let cov_cache = |p: &[f64]| mid.record.sigma_covector(p);
    for p in &pts {
        let zp = mid.record.hamiltonian_field_at(&hamiltonian, p)?;
        // round trip sigma(Z') = mu H
        let cov = cov_cache(p)?;
        let recovered: f64 = cov.iter().zip(&zp).map(|(a, b)| a * b).sum();
        let expect = mid.chart.eval(&hamiltonian, p)?;
        round_trip_residual = round_trip_residual.max(real::abs(recovered - expect));
        if real::abs(p[0]) >= cutoff.plateau_start + 0.02 {
            let z = zfield.middle.eval(p)?;
            for (a, b) in zp.iter().zip(&z) {
                off_band_residual = off_band_residual.max(real::abs(a - b));
            }
            off_band_samples += 1;
        }
    }
    let mut fold_pts = pts.clone();
    for p in fold_pts.iter_mut().take(60) {
        p[0] = 0.0;
        let zp = mid.record.hamiltonian_field_at(&hamiltonian, p)?;
        fold_component = fold_component.max(real::abs(zp[0]));
        fold_samples += 1;
    }
    Ok(CutoffChecks {
        hamiltonian,
        off_band_residual,
        off_band_samples,
        round_trip_residual,
        round_trip_samples: pts.len(),
        fold_component,
        fold_samples,
    })
}

pub fn spheres_checks(
    params: &ScenarioParams,
    sink: &mut dyn FnMut(CheckResult),
) -> Result<()> {
    let folded = build_folded_spheres(params)?;
    folded_common_checks(&folded, params, sink)?;

    // profile-family isotopy: linear interpolation between two certified
    // shapes stays certified for every sampled s
    let alt = ProfileShape {
        blend_lo: 0.92,
        blend_hi: 0.6,
        cap_coeff: 0.8,
        ramp_half_width: 0.8,
    };
    let other = make_gluing_profile(folded.k, params.epsilon, &alt)?;
    let mut family_ok = true;
    let mut witness = None;
    // the interval gap bound needs enough sweep resolution to close; keep a
    // floor even when the configured sweep is coarse
    let family_sweep = (params.sweep_points / 5).max(20_000);
    for i in 0..=10 {
        let s = i as f64 / 10.0;
        let (fs, gs) = folded.profile.interpolate(&other, s);
        let cert = certify_candidate(&fs, &gs, folded.k, params.epsilon, family_sweep);
        if !cert.all_passed() {
            family_ok = false;
            witness = Some(vec![s]);
            break;
        }
    }
    sink(CheckResult::flag(
        "profile_family_certified",
        anchors::PROFILE,
        family_ok,
        witness,
    ));

    // the standard-model table (exact, n in {2, 3})
    for n in [2usize, 3] {
        let ok = standard_model_fields(n).is_ok();
        sink(CheckResult::flag(
            &alloc::format!("standard_model_table_n{n}"),
            anchors::TABLE,
            ok,
            None,
        ));
    }
    Ok(())
}

pub fn t3_checks(
    params: &ScenarioParams,
    sink: &mut dyn FnMut(CheckResult),
) -> Result<()> {
    let folded = build_folded_t3(params)?;

    // interior-piece certification and collars
    let cert = (params.audit_points / 2).max(400);
    let built1 = crate::fibration::build_bundle_contact_form(
        &folded.spec1,
        &GridSpec::Halton {
            count: cert,
            offset: 0,
        },
        &GridSpec::Halton {
            count: 2 * cert,
            offset: 10_000,
        },
    )?;
    sink(scan_check(
        "interior_certification",
        anchors::BUNDLE,
        &built1.certification,
        true,
        0.0,
    ));
    sink(scan_check(
        "interior_audit",
        anchors::BUNDLE,
        &built1.audit,
        true,
        0.0,
    ));
    let scan = collar_check(&built1, &folded.spec1, 6, 24, 8)?;
    sink(CheckResult::residual_below(
        "interior_collar",
        anchors::COLLAR,
        scan.max,
        1e-9,
        scan.samples as u64,
        Some(scan.max_at.clone()),
    ));

    folded_common_checks(&folded, params, sink)?;
    Ok(())
}
